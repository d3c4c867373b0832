/// Complementary error function, accurate to about one ulp over the whole
/// real line (FreeBSD `s_erf.c` rational approximations via `libm`).
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}
