//! Robot documents in TOML: parse, merge onto the defaults, validate.
#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(config) = finsim::model::load_robot_config(text) {
        // Whatever loads must survive a round trip.
        let again = finsim::model::load_robot_config(&finsim::model::to_toml(&config))
            .expect("serialised config reloads");
        assert_eq!(again, config);
    }
});
