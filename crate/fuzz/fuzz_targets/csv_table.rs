//! Summary and data tables read back from experiment outputs.
#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(table) = finsim::table::read_table(text) {
        for name in table.header.clone() {
            let _ = table.numbers(&name);
        }
    }
    let _ = finsim::harness::compare::read_summary(text);
});
