#![no_main]

use finsim::units::{parse_quantity, Dimension};
use libfuzzer_sys::fuzz_target;

const DIMENSIONS: [Dimension; 8] = [
    Dimension::Dimensionless,
    Dimension::Length,
    Dimension::Mass,
    Dimension::Current,
    Dimension::Frequency,
    Dimension::Time,
    Dimension::Angle,
    Dimension::Stiffness,
];

fuzz_target!(|data: &[u8]| {
    let Some((&pick, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let dim = DIMENSIONS[pick as usize % DIMENSIONS.len()];
    if let Ok(v) = parse_quantity(text, dim) {
        assert!(!v.is_nan(), "{text:?} parsed to NaN");
    }
});
