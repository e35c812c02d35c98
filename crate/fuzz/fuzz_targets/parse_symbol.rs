#![no_main]

use libfuzzer_sys::fuzz_target;
use toeplitz_spectra::formats::{parse_symbol, write_symbol};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sym) = parse_symbol(text) {
        // anything accepted must survive a round trip
        let again = parse_symbol(&write_symbol(&sym)).expect("written symbol parses");
        assert_eq!(again, sym);
    }
});
