//! The Gaussian unitary ensemble: parameters, Hermitian samples and the
//! joint density of eigenvalues.
//!
//! Convention: the matrix density is proportional to
//! `exp(−Tr (H − μ)² / 2σ²)`, so diagonal elements have variance `σ²` and the
//! real and imaginary parts of each off-diagonal element have variance `σ²/2`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::eigen::ComplexMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GueParams {
    dim: usize,
    mu: f64,
    sigma: f64,
}

impl GueParams {
    pub fn new(dim: usize, mu: f64, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be > 0, got {sigma}")));
        }
        Ok(GueParams { dim, mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Half-width `2σ√N` of the large-N semicircle.
    pub fn semicircle_radius(&self) -> f64 {
        2.0 * self.sigma * (self.dim as f64).sqrt()
    }
}

/// A Hermitian matrix stored by its independent real degrees of freedom:
/// `N` real diagonal entries and the `N(N−1)/2` complex entries above the
/// diagonal (row-major). Hermiticity therefore holds exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HermitianJson", into = "HermitianJson")]
pub struct HermitianMatrix {
    dim: usize,
    diag: Vec<f64>,
    upper: Vec<Complex64>,
}

fn upper_index(dim: usize, row: usize, col: usize) -> usize {
    debug_assert!(row < col && col < dim);
    row * dim - row * (row + 1) / 2 + (col - row - 1)
}

impl HermitianMatrix {
    pub fn from_parts(diag: Vec<f64>, upper: Vec<Complex64>) -> Result<Self> {
        let dim = diag.len();
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        let expected = dim * (dim - 1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: upper.len(),
            });
        }
        Ok(HermitianMatrix { dim, diag, upper })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::from_parts(
            values.to_vec(),
            vec![Complex64::new(0.0, 0.0); n * n.saturating_sub(1) / 2],
        )
    }

    /// `h·1 + a_x σ_x + a_y σ_y + a_z σ_z`.
    pub fn two_level(h: f64, a: [f64; 3]) -> Self {
        HermitianMatrix {
            dim: 2,
            diag: vec![h + a[2], h - a[2]],
            upper: vec![Complex64::new(a[0], -a[1])],
        }
    }

    /// Builds from a dense row-major matrix, which must be exactly Hermitian.
    pub fn from_dense(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let mut diag = Vec::with_capacity(dim);
        let mut upper = Vec::with_capacity(dim * dim.saturating_sub(1) / 2);
        for r in 0..dim {
            let d = entries[r * dim + r];
            if d.im != 0.0 {
                return Err(Error::invalid(
                    "entries",
                    format!("diagonal ({r},{r}) is not real"),
                ));
            }
            diag.push(d.re);
            for c in r + 1..dim {
                let a = entries[r * dim + c];
                if a != entries[c * dim + r].conj() {
                    return Err(Error::invalid(
                        "entries",
                        format!("({r},{c}) is not the conjugate of ({c},{r})"),
                    ));
                }
                upper.push(a);
            }
        }
        Self::from_parts(diag, upper)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        use std::cmp::Ordering::*;
        match row.cmp(&col) {
            Equal => Complex64::new(self.diag[row], 0.0),
            Less => self.upper[upper_index(self.dim, row, col)],
            Greater => self.upper[upper_index(self.dim, col, row)].conj(),
        }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[Complex64] {
        &self.upper
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let n = self.dim;
        let mut m = ComplexMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = self.get(r, c);
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        let d: f64 = self.diag.iter().map(|x| x * x).sum();
        let o: f64 = self.upper.iter().map(|z| z.norm_sqr()).sum();
        (d + 2.0 * o).sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }
}

/// JSON debug form: `{"dim": N, "entries": [[re, im], …]}` row-major.
#[derive(Serialize, Deserialize)]
struct HermitianJson {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl From<HermitianMatrix> for HermitianJson {
    fn from(h: HermitianMatrix) -> Self {
        let n = h.dim;
        let entries = (0..n * n)
            .map(|i| {
                let z = h.get(i / n, i % n);
                [z.re, z.im]
            })
            .collect();
        HermitianJson { dim: n, entries }
    }
}

impl TryFrom<HermitianJson> for HermitianMatrix {
    type Error = Error;

    fn try_from(j: HermitianJson) -> Result<Self> {
        let dense: Vec<Complex64> = j
            .entries
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        HermitianMatrix::from_dense(j.dim, &dense)
    }
}

/// Draws one matrix from the GUE described by `params`.
pub fn sample_gue<R: Rng + ?Sized>(params: &GueParams, rng: &mut R) -> HermitianMatrix {
    let n = params.dim;
    let sigma = params.sigma;
    let off = sigma * std::f64::consts::FRAC_1_SQRT_2;
    let diag = (0..n)
        .map(|_| params.mu + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let upper = (0..n * (n - 1) / 2)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(off * re, off * im)
        })
        .collect();
    HermitianMatrix {
        dim: n,
        diag,
        upper,
    }
}

/// Samples the (unordered) eigenvalue pair of a 2×2 GUE matrix without
/// building it, by rejection from the joint density.
///
/// In the rotated coordinates `u = (e₁ − e₂)/√2`, `v = (e₁ + e₂)/√2 − √2μ`
/// the density factorizes into `v ~ N(0, σ²)` and `u² exp(−u²/2σ²)`. The
/// latter is sampled against an `N(0, 2σ²)` proposal with acceptance
/// probability `(u²/4σ²) · exp(1 − u²/4σ²)`.
pub fn sample_two_level_eigenvalues<R: Rng + ?Sized>(params: &GueParams, rng: &mut R) -> [f64; 2] {
    debug_assert_eq!(params.dim, 2);
    let sigma = params.sigma;
    let u = loop {
        let z: f64 = rng.sample(StandardNormal);
        let r = 0.5 * z * z; // u² / 4σ² for u = √2 σ z
        let accept = r * (1.0 - r).exp();
        if rng.random::<f64>() < accept {
            break std::f64::consts::SQRT_2 * sigma * z;
        }
    };
    let v: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = ((u + v) * h, (v - u) * h);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    [params.mu + lo, params.mu + hi]
}

/// How to draw a sorted spectrum from a GUE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelSampler {
    /// Build a matrix and diagonalize it.
    Matrix,
    /// Sample eigenvalues directly when `N = 2`, else as `Matrix`.
    #[default]
    Direct,
}

impl LevelSampler {
    /// Ascending eigenvalues of one GUE draw.
    pub fn sample<R: Rng + ?Sized>(self, params: &GueParams, rng: &mut R) -> Result<Vec<f64>> {
        match (self, params.dim) {
            (LevelSampler::Direct, 2) => Ok(sample_two_level_eigenvalues(params, rng).to_vec()),
            (_, 1) => Ok(vec![
                params.mu + params.sigma * rng.sample::<f64, _>(StandardNormal),
            ]),
            _ => crate::eigen::eigenvalues(&sample_gue(params, rng)),
        }
    }
}

fn log_factorial_product(n: usize) -> f64 {
    // ln ∏_{k=1}^{n} k!
    (1..=n)
        .map(|k| (1..=k).map(|j| (j as f64).ln()).sum::<f64>())
        .sum()
}

fn log_vandermonde_squared(e: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, a) in e.iter().enumerate() {
        for b in &e[i + 1..] {
            let d = a - b;
            if d == 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += 2.0 * d.abs().ln();
        }
    }
    acc
}

/// Joint density of the `N` eigenvalues (as an unordered, symmetric
/// function on `ℝᴺ`).
pub fn joint_eigenvalue_pdf(e: &[f64], params: &GueParams) -> Result<f64> {
    let n = params.dim;
    if e.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: e.len(),
        });
    }
    let s2 = params.sigma * params.sigma;
    let log_norm = 0.5 * n as f64 * (2.0 * PI).ln()
        + (n * n) as f64 * params.sigma.ln()
        + log_factorial_product(n);
    let gauss: f64 = e.iter().map(|x| (x - params.mu).powi(2)).sum::<f64>() / (2.0 * s2);
    Ok((log_vandermonde_squared(e) - gauss - log_norm).exp())
}

/// Volume factor of the change of variables from matrix elements to
/// eigenvalues and eigenvector angles: `∏_{n<m}(e_n − e_m)² / ((2π)^N ∏ n!)`.
pub fn jacobian(e: &[f64]) -> f64 {
    let n = e.len();
    let log = log_vandermonde_squared(e) - n as f64 * (2.0 * PI).ln() - log_factorial_product(n);
    log.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, QuadSpec};
    use crate::parallel::stream_rng;
    use proptest::prelude::*;

    #[test]
    fn params_validated() {
        assert!(GueParams::new(0, 0.0, 1.0).is_err());
        assert!(GueParams::new(2, 0.0, 0.0).is_err());
        assert!(GueParams::new(2, 0.0, -1.0).is_err());
        assert!(GueParams::new(2, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn sample_is_exactly_hermitian() {
        let p = GueParams::new(5, 0.3, 1.0).unwrap();
        let h = sample_gue(&p, &mut stream_rng(1, 0));
        let d = h.to_dense();
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(d[(r, c)], d[(c, r)].conj());
            }
        }
    }

    #[test]
    fn element_statistics_match_convention() {
        let p = GueParams::new(3, 0.7, 1.3).unwrap();
        let mut rng = stream_rng(2024, 0);
        let m = 100_000;
        let (mut s_d, mut s_d2, mut s_re, mut s_re2, mut s_im2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..m {
            let h = sample_gue(&p, &mut rng);
            let d = h.diag()[1];
            let z = h.get(0, 2);
            s_d += d;
            s_d2 += d * d;
            s_re += z.re;
            s_re2 += z.re * z.re;
            s_im2 += z.im * z.im;
        }
        let mf = m as f64;
        let mean_d = s_d / mf;
        let var_d = s_d2 / mf - mean_d * mean_d;
        let s2 = 1.3f64.powi(2);
        // standard errors: σ/√M for the mean, σ²√(2/M) for a Gaussian variance
        assert!((mean_d - 0.7).abs() < 4.0 * 1.3 / mf.sqrt());
        assert!((var_d - s2).abs() < 4.0 * s2 * (2.0 / mf).sqrt());
        let half = s2 / 2.0;
        assert!((s_re / mf).abs() < 4.0 * half.sqrt() / mf.sqrt());
        assert!((s_re2 / mf - half).abs() < 4.0 * half * (2.0 / mf).sqrt());
        assert!((s_im2 / mf - half).abs() < 4.0 * half * (2.0 / mf).sqrt());
    }

    #[test]
    fn json_debug_form_round_trips() {
        let p = GueParams::new(3, 0.0, 1.0).unwrap();
        let h = sample_gue(&p, &mut stream_rng(5, 0));
        let json = serde_json::to_string(&h).unwrap();
        assert!(json.starts_with("{\"dim\":3,\"entries\":[["));
        let back: HermitianMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn json_rejects_non_hermitian() {
        let bad = r#"{"dim":2,"entries":[[1,0],[0,1],[0,1],[2,0]]}"#;
        assert!(serde_json::from_str::<HermitianMatrix>(bad).is_err());
    }

    #[test]
    fn pauli_construction() {
        let sx = HermitianMatrix::two_level(0.0, [1.0, 0.0, 0.0]);
        assert_eq!(sx.get(0, 1), Complex64::new(1.0, 0.0));
        let sy = HermitianMatrix::two_level(0.0, [0.0, 1.0, 0.0]);
        assert_eq!(sy.get(0, 1), Complex64::new(0.0, -1.0));
        assert_eq!(sy.get(1, 0), Complex64::new(0.0, 1.0));
    }

    #[test]
    fn joint_pdf_vanishes_on_coincidence() {
        let p = GueParams::new(2, 0.4, 0.8).unwrap();
        assert_eq!(joint_eigenvalue_pdf(&[0.3, 0.3], &p).unwrap(), 0.0);
    }

    #[test]
    fn joint_pdf_two_level_value() {
        // (2)²/(4π) · e^{−1}
        let p = GueParams::new(2, 0.0, 1.0).unwrap();
        let v = joint_eigenvalue_pdf(&[1.0, -1.0], &p).unwrap();
        let expected = 4.0 / (4.0 * PI) * (-1.0f64).exp();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.117_099).abs() < 1e-6);
    }

    #[test]
    fn joint_pdf_dimension_checked() {
        let p = GueParams::new(3, 0.0, 1.0).unwrap();
        assert!(joint_eigenvalue_pdf(&[0.0, 1.0], &p).is_err());
    }

    #[test]
    fn joint_pdf_normalized_two_level() {
        let p = GueParams::new(2, 0.0, 1.0).unwrap();
        let spec = QuadSpec::with_tol(1e-9);
        let total = integrate(
            |x| {
                integrate(
                    |y| joint_eigenvalue_pdf(&[x, y], &p).unwrap(),
                    -10.0,
                    10.0,
                    &spec,
                )
                .unwrap()
            },
            -10.0,
            10.0,
            &spec,
        )
        .unwrap();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn joint_pdf_normalized_three_level() {
        let p = GueParams::new(3, 0.0, 1.0).unwrap();
        let (outer, mid, inner) = (
            QuadSpec::with_tol(1e-7),
            QuadSpec::with_tol(1e-9),
            QuadSpec::with_tol(1e-11),
        );
        let total = integrate(
            |x| {
                integrate(
                    |y| {
                        integrate(
                            |z| joint_eigenvalue_pdf(&[x, y, z], &p).unwrap(),
                            -9.0,
                            9.0,
                            &inner,
                        )
                        .unwrap()
                    },
                    -9.0,
                    9.0,
                    &mid,
                )
                .unwrap()
            },
            -9.0,
            9.0,
            &outer,
        )
        .unwrap();
        assert!((total - 1.0).abs() < 1e-5, "{total}");
    }

    #[test]
    fn jacobian_values() {
        assert_eq!(jacobian(&[0.5, 0.5]), 0.0);
        assert!((jacobian(&[3.0]) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let expected = 4.0 / ((2.0 * PI).powi(2) * 2.0);
        assert!((jacobian(&[1.0, -1.0]) - expected).abs() < 1e-15);
        assert!((jacobian(&[1.0, -1.0]) - 0.050_660).abs() < 1e-6);
    }

    #[test]
    fn two_level_fast_path_matches_matrix_moments() {
        let p = GueParams::new(2, 0.5, 1.0).unwrap();
        let mut rng = stream_rng(11, 0);
        let m = 200_000;
        let (mut s_gap, mut s_mid) = (0.0, 0.0);
        for _ in 0..m {
            let [lo, hi] = sample_two_level_eigenvalues(&p, &mut rng);
            assert!(lo <= hi);
            s_gap += hi - lo;
            s_mid += 0.5 * (lo + hi);
        }
        // gap = 2|α| with α ~ N(0, σ²/2)³: E = 4σ/√π; midpoint mean μ
        let mf = m as f64;
        let gap_mean = 4.0 / PI.sqrt();
        assert!((s_gap / mf - gap_mean).abs() < 0.01, "{}", s_gap / mf);
        assert!((s_mid / mf - 0.5).abs() < 0.01);
    }

    #[test]
    fn level_samplers_agree_on_moments() {
        let p = GueParams::new(2, 0.0, 1.0).unwrap();
        let m = 100_000;
        let stats = |sampler: LevelSampler, seed| {
            let mut rng = stream_rng(seed, 0);
            let (mut gap, mut gap2) = (0.0, 0.0);
            for _ in 0..m {
                let e = sampler.sample(&p, &mut rng).unwrap();
                assert!(e[0] <= e[1]);
                gap += e[1] - e[0];
                gap2 += (e[1] - e[0]).powi(2);
            }
            (gap / m as f64, gap2 / m as f64)
        };
        let (g1, s1) = stats(LevelSampler::Matrix, 3);
        let (g2, s2) = stats(LevelSampler::Direct, 4);
        // gap² = 4|α|² has mean 6σ² and variance 24σ⁴
        let se2 = (24.0f64 / m as f64).sqrt();
        assert!((s1 - 6.0).abs() < 4.0 * se2 && (s2 - 6.0).abs() < 4.0 * se2);
        assert!((g1 - g2).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn joint_pdf_permutation_symmetric(
            e in proptest::collection::vec(-3.0f64..3.0, 4),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let p = GueParams::new(4, 0.2, 1.1).unwrap();
            let shuffled: Vec<f64> = perm.iter().map(|&i| e[i]).collect();
            let a = joint_eigenvalue_pdf(&e, &p).unwrap();
            let b = joint_eigenvalue_pdf(&shuffled, &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * a.max(1e-300));
        }
    }
}
