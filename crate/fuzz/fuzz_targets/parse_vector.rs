#![no_main]

use libfuzzer_sys::fuzz_target;
use toeplitz_spectra::formats::{parse_vector, vector_on_window, write_vector};
use toeplitz_spectra::lattice::LatticeWindow;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(recs) = parse_vector(text, 1) {
        let w = LatticeWindow::two_sided(16, 1);
        if let Ok(x) = vector_on_window(&recs, &w) {
            let back = parse_vector(&write_vector(&x, &w), 1).expect("written vector parses");
            assert_eq!(vector_on_window(&back, &w).expect("same window"), x);
        }
    }
});
