#![no_main]

use libfuzzer_sys::fuzz_target;
use toeplitz_spectra::formats::parse_perturbation;

fuzz_target!(|data: &[u8]| {
    let Some((&nb, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    if let Ok(v) = parse_perturbation(text, 1 + (nb % 3) as usize) {
        let _ = v.block(0, 0);
        let _ = v.support();
    }
});
