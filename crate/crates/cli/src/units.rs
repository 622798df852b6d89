//! Quantities written with explicit units in configuration files, such as
//! `"335.8 nm"`, `"3.3 MHz"` or `"1.17e-3 um^3"`.

use std::fmt;

use serde::de::{self, Deserializer};
use serde::Deserialize;

use woodpile_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Frequency,
    Time,
    Volume,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, units) = match self {
            Dimension::Length => ("length", "m, mm, um, nm, pm"),
            Dimension::Frequency => ("frequency", "Hz, kHz, MHz, GHz, THz"),
            Dimension::Time => ("time", "s, ms, us, ns, ps, fs"),
            Dimension::Volume => ("volume", "m^3, um^3, nm^3"),
        };
        write!(f, "{name} (units: {units})")
    }
}

fn factor(dim: Dimension, unit: &str) -> Option<f64> {
    let u = unit.replace('µ', "u");
    Some(match (dim, u.as_str()) {
        (Dimension::Length, "m") => 1.0,
        (Dimension::Length, "mm") => 1e-3,
        (Dimension::Length, "um") => 1e-6,
        (Dimension::Length, "nm") => 1e-9,
        (Dimension::Length, "pm") => 1e-12,
        (Dimension::Frequency, "Hz") => 1.0,
        (Dimension::Frequency, "kHz") => 1e3,
        (Dimension::Frequency, "MHz") => 1e6,
        (Dimension::Frequency, "GHz") => 1e9,
        (Dimension::Frequency, "THz") => 1e12,
        (Dimension::Time, "s") => 1.0,
        (Dimension::Time, "ms") => 1e-3,
        (Dimension::Time, "us") => 1e-6,
        (Dimension::Time, "ns") => 1e-9,
        (Dimension::Time, "ps") => 1e-12,
        (Dimension::Time, "fs") => 1e-15,
        (Dimension::Volume, "m^3") => 1.0,
        (Dimension::Volume, "um^3") => 1e-18,
        (Dimension::Volume, "nm^3") => 1e-27,
        _ => return None,
    })
}

/// Parse `"<number> <unit>"` into SI.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, ch)| {
            ch.is_alphabetic()
                && !((ch == 'e' || ch == 'E')
                    && t[i + 1..].starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+'))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Config(format!("`{text}` has no unit; expected a {dim}")))?;
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{text}`: cannot read the number `{}`", num.trim())))?;
    let f = factor(dim, unit.trim())
        .ok_or_else(|| Error::Config(format!("`{text}`: unit `{}` is not a {dim}", unit.trim())))?;
    Ok(value * f)
}

macro_rules! quantity {
    ($name:ident, $dim:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub f64);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                parse_quantity(&s, $dim).map($name).map_err(de::Error::custom)
            }
        }
    };
}

quantity!(Length, Dimension::Length);
quantity!(Frequency, Dimension::Frequency);
quantity!(Time, Dimension::Time);
quantity!(Volume, Dimension::Volume);
