//! Unit-suffixed quantities in configuration documents.
//!
//! Every stored quantity is base SI. Documents may write a bare number (taken
//! as SI) or a string such as `"2 mm"`, `"480 mA"` or `"667 mg"`, which is
//! converted here at parse time. The unit must match the field's dimension.

use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Dimensionless,
    Length,
    Area,
    Mass,
    Current,
    Frequency,
    Time,
    Force,
    Resistance,
    Inductance,
    Stiffness,
    LinearDamping,
    QuadraticDamping,
    Density,
    Inertia,
    YawDrag,
    Angle,
    Power,
    ForcePerCurrent,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, Scale)] {
        use Dimension::*;
        use Scale::{Factor as F, Pow10 as P};
        match self {
            Dimensionless => &[("", P(0)), ("%", F(0.01))],
            Length => &[("m", P(0)), ("cm", P(-2)), ("mm", P(-3)), ("um", P(-6)), ("µm", P(-6))],
            Area => &[("m2", P(0)), ("m^2", P(0)), ("cm2", P(-4)), ("mm2", P(-6)), ("mm^2", P(-6))],
            Mass => &[("kg", P(0)), ("g", P(-3)), ("mg", P(-6))],
            Current => &[("A", P(0)), ("mA", P(-3)), ("uA", P(-6)), ("µA", P(-6))],
            Frequency => &[("Hz", P(0)), ("kHz", P(3)), ("mHz", P(-3))],
            Time => &[("s", P(0)), ("ms", P(-3)), ("us", P(-6)), ("µs", P(-6))],
            Force => &[("N", P(0)), ("mN", P(-3))],
            Resistance => &[("ohm", P(0)), ("Ω", P(0)), ("kohm", P(3)), ("kΩ", P(3))],
            Inductance => &[("H", P(0)), ("mH", P(-3)), ("uH", P(-6)), ("µH", P(-6))],
            Stiffness => &[("N/m", P(0)), ("N/mm", P(3))],
            LinearDamping => &[("N*s/m", P(0)), ("N·s/m", P(0)), ("Ns/m", P(0))],
            QuadraticDamping => &[("N*s2/m2", P(0)), ("N·s²/m²", P(0)), ("N*s^2/m^2", P(0))],
            Density => &[("kg/m3", P(0)), ("kg/m^3", P(0)), ("g/cm3", P(3))],
            Inertia => &[("kg*m2", P(0)), ("kg·m²", P(0)), ("kg*m^2", P(0)), ("g*cm2", P(-7))],
            YawDrag => &[("N*m*s2", P(0)), ("N·m·s²", P(0)), ("N*m*s^2", P(0))],
            Angle => &[("rad", P(0)), ("deg", F(std::f64::consts::PI / 180.0)), ("°", F(std::f64::consts::PI / 180.0))],
            Power => &[("W", P(0)), ("mW", P(-3))],
            ForcePerCurrent => &[("N/A", P(0)), ("mN/mA", P(0)), ("mN/A", P(-3))],
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Scale {
    Pow10(i32),
    Factor(f64),
}

/// Parse `"<number> <unit>"` (whitespace optional) into an SI value.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && exponent_follows(text, i)))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("'{text}' does not start with a number"))?;
    let unit = unit.trim();
    let scale = dim
        .units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|&(_, s)| s)
        .ok_or_else(|| format!("unit '{unit}' is not valid for a {dim:?} quantity"))?;
    let si = match scale {
        Scale::Pow10(0) => value,
        // Re-parse with a shifted exponent so "35 mm" and "0.035" give identical bits.
        Scale::Pow10(p) => {
            let num = num.trim();
            let (mantissa, exp) = match num.find(['e', 'E']) {
                Some(i) => (&num[..i], num[i + 1..].parse::<i32>().unwrap_or(0)),
                None => (num, 0),
            };
            format!("{mantissa}e{}", exp.saturating_add(p))
                .parse::<f64>()
                .map_err(|_| format!("'{text}' does not start with a number"))?
        }
        Scale::Factor(f) => value * f,
    };
    if !si.is_finite() {
        return Err(format!("'{text}' is not a finite quantity"));
    }
    Ok(si)
}

// `1e-3` keeps the `e` in the number; `3 eV` would not.
fn exponent_follows(text: &str, i: usize) -> bool {
    let rest = &text[i + 1..];
    let rest = rest.strip_prefix(['+', '-']).unwrap_or(rest);
    rest.starts_with(|c: char| c.is_ascii_digit()) && text[..i].chars().any(|c| c.is_ascii_digit())
}

struct QuantityVisitor(Dimension);

impl<'de> Visitor<'de> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a number or a string with a {:?} unit", self.0)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        parse_quantity(v, self.0).map_err(E::custom)
    }
}

struct QuantityListVisitor(Dimension);

impl<'de> Visitor<'de> for QuantityListVisitor {
    type Value = Vec<f64>;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a list of {:?} quantities", self.0)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Vec<f64>, A::Error> {
        let mut out = Vec::new();
        while let Some(v) = seq.next_element::<QuantitySeed>()? {
            let si = match v {
                QuantitySeed::Number(x) => x,
                QuantitySeed::Text(s) => parse_quantity(&s, self.0).map_err(de::Error::custom)?,
            };
            out.push(si);
        }
        Ok(out)
    }
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum QuantitySeed {
    Number(f64),
    Text(String),
}

macro_rules! quantity_fns {
    ($($name:ident, $list:ident => $dim:ident;)*) => {
        $(
            pub fn $name<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                d.deserialize_any(QuantityVisitor(Dimension::$dim))
            }

            #[allow(dead_code)]
            pub fn $list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
                d.deserialize_seq(QuantityListVisitor(Dimension::$dim))
            }
        )*
    };
}

/// `deserialize_with` helpers, one per dimension.
pub mod de_si {
    use super::*;

    quantity_fns! {
        dimensionless, dimensionless_list => Dimensionless;
        length, length_list => Length;
        area, area_list => Area;
        mass, mass_list => Mass;
        current, current_list => Current;
        frequency, frequency_list => Frequency;
        time, time_list => Time;
        resistance, resistance_list => Resistance;
        inductance, inductance_list => Inductance;
        stiffness, stiffness_list => Stiffness;
        linear_damping, linear_damping_list => LinearDamping;
        quadratic_damping, quadratic_damping_list => QuadraticDamping;
        density, density_list => Density;
        inertia, inertia_list => Inertia;
        yaw_drag, yaw_drag_list => YawDrag;
        angle, angle_list => Angle;
        power, power_list => Power;
        force_per_current, force_per_current_list => ForcePerCurrent;
        force, force_list => Force;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converts_prefixed_units() {
        assert_eq!(parse_quantity("2 mm", Dimension::Length).unwrap(), 0.002);
        assert_eq!(parse_quantity("2mm", Dimension::Length).unwrap(), 0.002);
        assert!((parse_quantity("480 mA", Dimension::Current).unwrap() - 0.48).abs() < 1e-15);
        assert!((parse_quantity("667 mg", Dimension::Mass).unwrap() - 667e-6).abs() < 1e-18);
        assert_eq!(parse_quantity("1.75 Hz", Dimension::Frequency).unwrap(), 1.75);
        assert_eq!(parse_quantity("1e-3 m", Dimension::Length).unwrap(), 1e-3);
        assert_eq!(parse_quantity("1e-3 mm", Dimension::Length).unwrap(), 1e-6);
        assert_eq!(parse_quantity("35 mm", Dimension::Length).unwrap(), 0.035);
        assert_eq!(parse_quantity("367.5 mm", Dimension::Length).unwrap(), 0.3675);
        assert_eq!(parse_quantity("0.25", Dimension::Dimensionless).unwrap(), 0.25);
    }

    #[test]
    fn rejects_wrong_dimension() {
        assert!(parse_quantity("2 mA", Dimension::Length).is_err());
        assert!(parse_quantity("mm", Dimension::Length).is_err());
        assert!(parse_quantity("", Dimension::Length).is_err());
        assert!(parse_quantity("1e999 m", Dimension::Length).is_err());
    }
}
