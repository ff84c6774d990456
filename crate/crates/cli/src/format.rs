//! Bit-exact number formatting for the CSV outputs.

/// Round-trip float formatting with 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}
