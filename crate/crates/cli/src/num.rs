//! Report number formatting.

/// 9 significant digits, like C's `%.9g`.
pub fn g9(x: f64) -> String {
    tmart::numeric::format_sig(x, 9)
}
