#![no_main]

use bdp_core::models::{motif_covariates, ModelSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<ModelSpec>() {
        let again: ModelSpec = spec.to_string().parse().expect("display output parses");
        assert_eq!(again, spec);
        let _ = spec.build();
    }
    let _ = motif_covariates(text);
});
