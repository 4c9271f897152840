//! SI quantities with metric prefixes and unit suffixes: `75uH`, `140kHz`,
//! `4.7 mOhm`, `20%`.

/// Physical unit expected by a config key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    None,
    Volt,
    Ampere,
    Watt,
    Hertz,
    Henry,
    Farad,
    Ohm,
    Second,
    Joule,
    Meter,
    SquareMeter,
    Celsius,
    KelvinPerWatt,
    /// W/(K L).
    Cspi,
    /// J/(K m^3).
    VolumetricHeat,
    /// W/(m K).
    Conductivity,
    Liter,
    /// A/mm^2.
    CurrentDensity,
}

impl Unit {
    /// Accepted spellings, longest first so that `mOhm` is not read as `m` + `Ohm`.
    fn symbols(self) -> &'static [&'static str] {
        match self {
            Unit::None => &[],
            Unit::Volt => &["V"],
            Unit::Ampere => &["A"],
            Unit::Watt => &["W"],
            Unit::Hertz => &["Hz"],
            Unit::Henry => &["H"],
            Unit::Farad => &["F"],
            Unit::Ohm => &["Ohm", "ohm", "Ω"],
            Unit::Second => &["s"],
            Unit::Joule => &["J"],
            Unit::Meter => &["m"],
            Unit::SquareMeter => &["m2", "m^2"],
            Unit::Celsius => &["degC", "C"],
            Unit::KelvinPerWatt => &["K/W"],
            Unit::Cspi => &["W/(K L)", "W/KL"],
            Unit::VolumetricHeat => &["J/(K m3)", "J/Km3"],
            Unit::Conductivity => &["W/(m K)", "W/mK"],
            Unit::Liter => &["L", "l"],
            Unit::CurrentDensity => &["A/mm2", "A/mm^2"],
        }
    }

    pub fn label(self) -> &'static str {
        self.symbols().first().copied().unwrap_or("1")
    }
}

fn prefix_scale(p: &str) -> Option<f64> {
    Some(match p {
        "" => 1.0,
        "p" => 1e-12,
        "n" => 1e-9,
        "u" | "µ" | "μ" => 1e-6,
        "m" => 1e-3,
        "k" => 1e3,
        "M" => 1e6,
        "G" => 1e9,
        _ => return None,
    })
}

/// Splits a leading decimal number from its suffix.
fn split_number(s: &str) -> Option<(f64, &str)> {
    let bytes = s.as_bytes();
    let mut end = 0;
    let mut seen_e = false;
    while end < bytes.len() {
        let c = bytes[end] as char;
        let ok = c.is_ascii_digit()
            || c == '.'
            || ((c == '+' || c == '-') && (end == 0 || matches!(bytes[end - 1], b'e' | b'E')))
            || ((c == 'e' || c == 'E')
                && !seen_e
                && end > 0
                && bytes.get(end + 1).is_some_and(|n| n.is_ascii_digit() || *n == b'-' || *n == b'+'));
        if !ok {
            break;
        }
        seen_e |= c == 'e' || c == 'E';
        end += 1;
    }
    let v: f64 = s[..end].parse().ok()?;
    Some((v, s[end..].trim()))
}

/// Parses `text` as a quantity in `unit`. A bare number is taken in base
/// units; `%` scales by 1/100 for dimensionless keys.
pub fn parse_quantity(text: &str, unit: Unit) -> Result<f64, String> {
    let t = text.trim();
    let (v, suffix) = split_number(t).ok_or_else(|| format!("`{t}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{t}` is not finite"));
    }
    if suffix.is_empty() {
        return Ok(v);
    }
    if unit == Unit::None {
        return match suffix {
            "%" => Ok(v / 100.0),
            _ => Err(format!("`{t}`: dimensionless value takes no unit")),
        };
    }
    for sym in unit.symbols() {
        if let Some(prefix) = suffix.strip_suffix(sym) {
            if let Some(k) = prefix_scale(prefix.trim()) {
                let k = if unit == Unit::SquareMeter { k * k } else { k };
                return Ok(v * k);
            }
        }
    }
    Err(format!("`{t}`: expected a value in {}", unit.label()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixes_and_units() {
        assert_eq!(parse_quantity("75uH", Unit::Henry).unwrap(), 75e-6);
        assert_eq!(parse_quantity("140kHz", Unit::Hertz).unwrap(), 140e3);
        assert_eq!(parse_quantity("30 mOhm", Unit::Ohm).unwrap(), 30e-3);
        assert_eq!(parse_quantity("270", Unit::Volt).unwrap(), 270.0);
        assert_eq!(parse_quantity("1e-6F", Unit::Farad).unwrap(), 1e-6);
        assert_eq!(parse_quantity("20%", Unit::None).unwrap(), 0.2);
        assert_eq!(parse_quantity("4.62 K/W", Unit::KelvinPerWatt).unwrap(), 4.62);
        assert_eq!(parse_quantity("10 m", Unit::Meter).unwrap(), 10.0);
        assert_eq!(parse_quantity("10mm", Unit::Meter).unwrap(), 0.01);
        assert!((parse_quantity("13.6 mm2", Unit::SquareMeter).unwrap() - 13.6e-6).abs() < 1e-18);
        assert_eq!(parse_quantity("-5 degC", Unit::Celsius).unwrap(), -5.0);
    }

    #[test]
    fn wrong_unit_is_rejected() {
        assert!(parse_quantity("75uF", Unit::Henry).is_err());
        assert!(parse_quantity("abc", Unit::Volt).is_err());
        assert!(parse_quantity("3 V", Unit::None).is_err());
    }
}
