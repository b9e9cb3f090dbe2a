#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(spec) = finsim::harness::load_experiment_spec(text) {
        assert!(spec.violations().is_empty());
    }
});
