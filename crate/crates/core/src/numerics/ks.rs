use super::grid::DensityGrid;

/// A one-dimensional distribution that can report its cumulative
/// distribution function.
pub trait Cdf {
    /// Abscissae at which the CDF changes character (grid nodes, bin edges).
    fn knots(&self) -> Vec<f64>;
    /// CDF evaluated at each point of `xs`.
    fn cdf_at(&self, xs: &[f64]) -> Vec<f64>;
}

impl Cdf for DensityGrid {
    fn knots(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.x(k)).collect()
    }

    /// Exact CDF of the piecewise-linear interpolant, normalized to end at 1.
    fn cdf_at(&self, xs: &[f64]) -> Vec<f64> {
        let cum = self.cumulative();
        let total = *cum.last().unwrap_or(&0.0);
        let n = self.len();
        xs.iter()
            .map(|&x| {
                if total <= 0.0 || n < 2 {
                    return if x >= self.x0 { 1.0 } else { 0.0 };
                }
                let t = (x - self.x0) / self.dx;
                if t <= 0.0 {
                    return 0.0;
                }
                if t >= (n - 1) as f64 {
                    return 1.0;
                }
                let k = t.floor() as usize;
                let f = t - k as f64;
                let (v0, v1) = (self.values[k], self.values[k + 1]);
                let partial = self.dx * (v0 * f + 0.5 * (v1 - v0) * f * f);
                (cum[k] + partial) / total
            })
            .collect()
    }
}

/// Supremum distance between two CDFs, evaluated on the union of both
/// knot sets. Lies in `[0, 1]`.
pub fn ks_distance<A: Cdf + ?Sized, B: Cdf + ?Sized>(a: &A, b: &B) -> f64 {
    let mut xs = a.knots();
    xs.extend(b.knots());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let fa = a.cdf_at(&xs);
    let fb = b.cdf_at(&xs);
    fa.iter()
        .zip(&fb)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against a
/// continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::GridSpec;

    fn bump(center: f64) -> DensityGrid {
        let spec = GridSpec::centered(center, 1.0, 101).unwrap();
        DensityGrid::from_fn(&spec, |x| (1.0 - (x - center).abs()).max(0.0))
    }

    #[test]
    fn identical_is_zero() {
        let a = bump(0.0);
        assert_eq!(ks_distance(&a, &a), 0.0);
    }

    #[test]
    fn disjoint_supports_is_one() {
        assert!((ks_distance(&bump(0.0), &bump(5.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cdf_is_exact_for_linear_pieces() {
        // Triangle on [-1, 1]: CDF(-0.5) = 0.125, CDF(0) = 0.5.
        let cdf = bump(0.0).cdf_at(&[-0.5, 0.0, 2.0]);
        assert!((cdf[0] - 0.125).abs() < 1e-12);
        assert!((cdf[1] - 0.5).abs() < 1e-12);
        assert_eq!(cdf[2], 1.0);
    }

    #[test]
    fn small_shift_gives_small_distance() {
        let d = ks_distance(&bump(0.0), &bump(0.02));
        assert!(d > 0.0 && d < 0.03, "{d}");
    }

    #[test]
    fn one_sample_statistic() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert!((ks_statistic(&[0.5], uniform) - 0.5).abs() < 1e-15);
        let grid: Vec<f64> = (0..100).map(|k| (k as f64 + 0.5) / 100.0).collect();
        assert!((ks_statistic(&grid, uniform) - 0.005).abs() < 1e-12);
        assert!((ks_statistic(&[2.0, 3.0], uniform) - 1.0).abs() < 1e-15);
    }
}
