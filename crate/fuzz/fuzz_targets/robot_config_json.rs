#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    // A leading brace selects the JSON reader.
    let doc = format!("{{{text}");
    if let Ok(config) = finsim::model::load_robot_config(&doc) {
        let again = finsim::model::load_robot_config(&finsim::model::to_json(&config))
            .expect("serialised config reloads");
        assert_eq!(again, config);
    }
});
