#![no_main]

use libfuzzer_sys::fuzz_target;

use gridflock::cli::parse_matrix_arg;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_matrix_arg("m", text) {
        // Accepted input must yield a real rectangular matrix.
        assert!(m.nrows() > 0 && m.ncols() > 0);
        assert!(m.iter().all(|v| !v.is_nan()));
    }
});
