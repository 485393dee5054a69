//! Strict parsing of lengths with unit suffixes.

const LENGTH_UNITS: &[(&str, f64)] = &[
    ("nm", 1e-9),
    ("um", 1e-6),
    ("\u{b5}m", 1e-6),
    ("\u{3bc}m", 1e-6),
    ("mm", 1e-3),
    ("cm", 1e-2),
    ("m", 1.0),
];

/// Parses `"<number> <unit>"` (space optional) into metres. A bare number is an
/// error: every length must say what it is measured in.
pub fn parse_length(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let (unit, scale) = LENGTH_UNITS
        .iter()
        .find(|(u, _)| t.ends_with(u))
        .ok_or_else(|| format!("`{text}` has no length unit (expected one of m, cm, mm, um, nm)"))?;
    let number = t[..t.len() - unit.len()].trim_end();
    // "mm" also ends with "m": the number part must be a plain float
    let v: f64 = number
        .parse()
        .map_err(|_| format!("`{text}` is not a number followed by a length unit"))?;
    if !v.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    Ok(v * scale)
}

/// Canonical text for a length in metres; parses back to the identical value.
pub fn format_length(v: f64) -> String {
    format!("{v:e} m")
}
