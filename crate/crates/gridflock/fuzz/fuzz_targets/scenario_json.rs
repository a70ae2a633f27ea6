#![no_main]

use libfuzzer_sys::fuzz_target;

use gridflock::scenario::{parse_scenario_str, validate_and_resolve};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(mut config) = parse_scenario_str(text) else {
        return;
    };
    if validate_and_resolve(&mut config).is_err() {
        return;
    }

    // A validated config must echo through serde unchanged: reprint,
    // reparse, revalidate, and land on the identical value.
    let printed = serde_json::to_string_pretty(&config).expect("validated config must serialize");
    let mut reloaded = parse_scenario_str(&printed).expect("echo must reparse");
    validate_and_resolve(&mut reloaded).expect("resolution must be idempotent");
    assert_eq!(reloaded, config);
});
