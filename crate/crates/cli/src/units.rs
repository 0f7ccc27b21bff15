//! Parsing of physical quantities written in config files.
//!
//! A frequency is a string `"<value> <unit> [x2pi]"`. Accepted units are
//! `rad/s`, `Hz`, `kHz`, `MHz`, `GHz` and `w0` (multiples of the crystal's
//! natural frequency). Cyclic units must carry the explicit `x2pi` (or `×2π`)
//! factor; a bare `MHz` is rejected because it is ambiguous.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreqUnit {
    /// Multiples of omega0.
    Omega0,
    /// Angular frequency, rad/s, after any scale factor.
    Angular(f64),
}

impl FreqUnit {
    pub fn to_omega0(self, value: f64, omega0: f64) -> f64 {
        match self {
            FreqUnit::Omega0 => value,
            FreqUnit::Angular(scale) => value * scale / omega0,
        }
    }
}

fn strip_two_pi(s: &str) -> (String, bool) {
    let compact: String = s.split_whitespace().collect::<Vec<_>>().join(" ");
    for suffix in ["x2pi", "×2π", "*2pi", "x 2pi", "× 2π", "* 2pi"] {
        if let Some(rest) = compact.strip_suffix(suffix) {
            return (rest.trim().to_string(), true);
        }
    }
    (compact, false)
}

/// Parse a bare unit such as `"MHz x2pi"` or `"w0"`.
pub fn parse_unit(s: &str) -> Result<FreqUnit, String> {
    let (unit, two_pi) = strip_two_pi(s.trim());
    let cyclic = |scale: f64| {
        if two_pi {
            Ok(FreqUnit::Angular(2.0 * PI * scale))
        } else {
            Err(format!(
                "`{s}` is ambiguous: write `{unit} x2pi` for a cyclic frequency or use rad/s"
            ))
        }
    };
    match unit.as_str() {
        "w0" | "omega0" | "ω₀" => {
            if two_pi {
                Err(format!("`{s}`: w0 is already an angular unit"))
            } else {
                Ok(FreqUnit::Omega0)
            }
        }
        "rad/s" => {
            if two_pi {
                Ok(FreqUnit::Angular(2.0 * PI))
            } else {
                Ok(FreqUnit::Angular(1.0))
            }
        }
        "Hz" => cyclic(1.0),
        "kHz" => cyclic(1e3),
        "MHz" => cyclic(1e6),
        "GHz" => cyclic(1e9),
        "" => Err(format!("`{s}` has no unit")),
        other => Err(format!("unknown frequency unit `{other}`")),
    }
}

/// Parse `"<value> <unit>"` into a value and its unit.
pub fn parse_frequency(s: &str) -> Result<(f64, FreqUnit), String> {
    let t = s.trim();
    let split = t
        .find(|c: char| c.is_whitespace())
        .ok_or_else(|| format!("`{s}` needs a unit, e.g. \"2.4 MHz x2pi\" or \"2.0 w0\""))?;
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| format!("`{num}` is not a number"))?;
    if !value.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok((value, parse_unit(unit)?))
}
