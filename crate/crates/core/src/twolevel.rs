//! Closed forms and quadratures for a two-level system.
//!
//! These serve both as results in their own right and as the reference
//! values the grid and Monte Carlo code is checked against.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{erfc, integrate, DensityGrid, GridSpec, QuadSpec};
use crate::parallel::Execution;

/// Gaussian factors are negligible (< 1e−30) beyond this many scale units.
const TRUNCATION: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelParams {
    pub sigma_i: f64,
    pub sigma_f: f64,
    pub beta: f64,
    /// Level spacing of a deterministic initial Hamiltonian `(ε/2) σ_z`.
    pub epsilon: f64,
    pub mu_i: f64,
    pub mu_f: f64,
}

impl TwoLevelParams {
    pub fn new(sigma_i: f64, sigma_f: f64, beta: f64) -> Result<Self> {
        if !(sigma_i > 0.0 && sigma_i.is_finite()) {
            return Err(Error::invalid(
                "sigma_i",
                format!("must be > 0, got {sigma_i}"),
            ));
        }
        if !(sigma_f > 0.0 && sigma_f.is_finite()) {
            return Err(Error::invalid(
                "sigma_f",
                format!("must be > 0, got {sigma_f}"),
            ));
        }
        if !(beta >= 0.0) || beta.is_nan() {
            return Err(Error::invalid("beta", format!("must be >= 0, got {beta}")));
        }
        Ok(TwoLevelParams {
            sigma_i,
            sigma_f,
            beta,
            epsilon: 0.0,
            mu_i: 0.0,
            mu_f: 0.0,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(
                "epsilon",
                format!("must be >= 0, got {epsilon}"),
            ));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_means(mut self, mu_i: f64, mu_f: f64) -> Self {
        self.mu_i = mu_i;
        self.mu_f = mu_f;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// `s = σ_f / σ_i`.
    pub fn ratio(&self) -> f64 {
        self.sigma_f / self.sigma_i
    }
}

/// `1 / (1 + eˣ)` without overflow for either sign of `x`.
#[inline]
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Density of states of the 2×2 GUE with `μ = 0`.
pub fn dos2(e: f64, sigma: f64) -> f64 {
    let x = e / sigma;
    (x * x + 1.0) / (2.0 * (2.0 * PI).sqrt() * sigma) * (-0.5 * x * x).exp()
}

/// Population of the lower level of `(ε/2) σ_z` at inverse temperature `β`.
pub fn ground_state_population(beta: f64, epsilon: f64) -> f64 {
    if beta.is_infinite() {
        return if epsilon > 0.0 { 1.0 } else { 0.5 };
    }
    fermi(-beta * epsilon)
}

/// Averaged work density for a quench from `(ε/2) σ_z` into a 2×2 GUE.
pub fn pdf_det_to_random(w: f64, p: &TwoLevelParams) -> f64 {
    let ground = ground_state_population(p.beta, p.epsilon);
    let x = w - p.mu_f;
    let half = 0.5 * p.epsilon;
    dos2(x - half, p.sigma_f) * ground + dos2(x + half, p.sigma_f) * (1.0 - ground)
}

/// Thermally weighted density of initial energies for a 2×2 GUE (`μ = 0`):
/// `(1/2πσ⁴) e^{−ε²/2σ²} ∫ de (ε−e)² e^{−e²/2σ²} / (1 + e^{β(ε−e)})`.
pub fn q2(eps: f64, sigma_i: f64, beta: f64) -> Result<f64> {
    let spec = QuadSpec::with_tol(1e-10 * sigma_i.powi(3));
    q2_with(eps, sigma_i, beta, &spec)
}

fn q2_with(eps: f64, sigma_i: f64, beta: f64, spec: &QuadSpec) -> Result<f64> {
    let s2 = sigma_i * sigma_i;
    let prefactor = (-0.5 * eps * eps / s2).exp() / (2.0 * PI * s2 * s2);
    if prefactor == 0.0 {
        return Ok(0.0);
    }
    let r = TRUNCATION * sigma_i;
    let inner = |e: f64| {
        let d = eps - e;
        d * d * fermi(beta * d) * (-0.5 * e * e / s2).exp()
    };
    // The Fermi factor steps at e = ε; split there so the step sits on a panel edge.
    let split = eps.clamp(-r, r);
    let total = integrate(inner, -r, split, spec)? + integrate(inner, split, r, spec)?;
    Ok(prefactor * total)
}

/// Density of the smaller eigenvalue of a 2×2 GUE (`μ = 0`).
pub fn ground_state_pdf(eps: f64, sigma_i: f64) -> f64 {
    let x = eps / sigma_i;
    let g = (-0.5 * x * x).exp();
    let bracket = (x * x + 1.0) * erfc(x / std::f64::consts::SQRT_2) - (2.0 / PI).sqrt() * x * g;
    g * bracket / (2.0 * (2.0 * PI).sqrt() * sigma_i)
}

/// Infinite-temperature work density for a quench between two 2×2 GUEs.
pub fn pdf_high_t(w: f64, sigma_i: f64, sigma_f: f64) -> f64 {
    let s = sigma_f / sigma_i;
    let s2 = s * s;
    let x2 = (w / sigma_i).powi(2);
    let poly = s2 * x2 * x2
        + 2.0 * (1.0 + s2 * s2 * s2) * x2
        + (1.0 + s2).powi(2) * (2.0 * s2 * s2 + 7.0 * s2 + 2.0);
    poly * (-x2 / (2.0 * (1.0 + s2))).exp()
        / (4.0 * (2.0 * PI).sqrt() * sigma_i * (s2 + 1.0).powf(4.5))
}

/// `∫ dε f(ε + w) g(ε)` for `f` of width `sigma_f` centred at zero and `g`
/// of width `sigma_i`, restricted to where both are non-negligible.
fn correlate_densities<F, G>(
    w: f64,
    f: F,
    sigma_f: f64,
    g: G,
    sigma_i: f64,
    spec: &QuadSpec,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let lo = (-TRUNCATION * sigma_i).max(-w - TRUNCATION * sigma_f);
    let hi = (TRUNCATION * sigma_i).min(-w + TRUNCATION * sigma_f);
    if lo >= hi {
        return Ok(0.0);
    }
    integrate(|e| f(e + w) * g(e), lo, hi, spec)
}

/// Zero-temperature work density `∫ dε D_f(ε + w) ρ_gs(ε)`, shifted by the
/// ensemble means.
pub fn pdf_zero_t(w: f64, p: &TwoLevelParams) -> Result<f64> {
    let x = w - p.mu_f + p.mu_i;
    correlate_densities(
        x,
        |e| dos2(e, p.sigma_f),
        p.sigma_f,
        |e| ground_state_pdf(e, p.sigma_i),
        p.sigma_i,
        &QuadSpec::default(),
    )
}

/// The same cross-correlation as [`pdf_high_t`], by quadrature.
pub fn pdf_high_t_quadrature(w: f64, sigma_i: f64, sigma_f: f64) -> Result<f64> {
    correlate_densities(
        w,
        |e| dos2(e, sigma_f),
        sigma_f,
        |e| dos2(e, sigma_i),
        sigma_i,
        &QuadSpec::with_tol(1e-12),
    )
}

/// First moment of the thermally weighted initial energy (`μ_i = 0`):
/// `(σ/4√π) ∫ dx x³ e^{−x²/4} / (1 + e^{βσx})`.
pub fn mean_initial_energy(beta: f64, sigma_i: f64) -> Result<f64> {
    if beta == 0.0 {
        return Ok(0.0);
    }
    let spec = QuadSpec::with_tol(1e-12);
    let f = |x: f64| x.powi(3) * (-0.25 * x * x).exp() * fermi(beta * sigma_i * x);
    let total = integrate(f, -40.0, 0.0, &spec)? + integrate(f, 0.0, 40.0, &spec)?;
    Ok(sigma_i / (4.0 * PI.sqrt()) * total)
}

/// Mean of the two-level ground-state energy, `−2σ/√π`.
pub fn ground_state_mean(sigma_i: f64) -> f64 {
    -2.0 * sigma_i / PI.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkMoments {
    pub mean: f64,
    pub second: f64,
    pub variance: f64,
}

fn moments_from_initial_mean(p: &TwoLevelParams, m1: f64) -> WorkMoments {
    let e_f = p.mu_f;
    let e2_f = 2.0 * p.sigma_f * p.sigma_f + p.mu_f * p.mu_f;
    let e_i = p.mu_i + m1;
    let e2_i = 2.0 * p.sigma_i * p.sigma_i + 2.0 * p.mu_i * m1 + p.mu_i * p.mu_i;
    let mean = e_f - e_i;
    let second = e2_f - 2.0 * e_f * e_i + e2_i;
    WorkMoments {
        mean,
        second,
        variance: second - mean * mean,
    }
}

/// First two moments of work for a quench between two 2×2 GUEs.
pub fn work_moments(p: &TwoLevelParams) -> Result<WorkMoments> {
    let m1 = if p.beta.is_infinite() {
        ground_state_mean(p.sigma_i)
    } else {
        mean_initial_energy(p.beta, p.sigma_i)?
    };
    Ok(moments_from_initial_mean(p, m1))
}

/// The `β → ∞` asymptotes of [`work_moments`].
pub fn work_moments_zero_temperature(p: &TwoLevelParams) -> WorkMoments {
    moments_from_initial_mean(p, ground_state_mean(p.sigma_i))
}

/// `⟨e^{2n}⟩ⁱ` at each `β` in `beta_grid`, from the defining double integral
/// `(1/2πσ⁴) ∫∫ de de' e^{2n} (e−e')² e^{−(e²+e'²)/2σ²} / (1 + e^{β(e−e')})`.
pub fn even_moment_check(n: u32, beta_grid: &[f64], sigma_i: f64) -> Result<Vec<f64>> {
    if !(1..=3).contains(&n) {
        return Err(Error::invalid("n", format!("must be 1, 2 or 3, got {n}")));
    }
    if !(sigma_i > 0.0) {
        return Err(Error::invalid("sigma_i", "must be > 0"));
    }
    let s2 = sigma_i * sigma_i;
    let r = TRUNCATION * sigma_i;
    let scale = sigma_i.powi(2 * n as i32);
    let inner_spec = QuadSpec::with_tol(1e-13 * s2 * sigma_i);
    let outer_spec = QuadSpec::with_tol(1e-11 * scale);
    beta_grid
        .iter()
        .map(|&beta| {
            let mut failure = None;
            let outer = |e: f64| {
                let inner = |e2: f64| {
                    let d = e - e2;
                    d * d * fermi(beta * d) * (-0.5 * e2 * e2 / s2).exp()
                };
                let split = e.clamp(-r, r);
                let v = integrate(inner, -r, split, &inner_spec)
                    .and_then(|a| Ok(a + integrate(inner, split, r, &inner_spec)?));
                match v {
                    Ok(v) => e.powi(2 * n as i32) * (-0.5 * e * e / s2).exp() * v,
                    Err(err) => {
                        failure.get_or_insert(err);
                        0.0
                    }
                }
            };
            let total = integrate(outer, -r, r, &outer_spec)?;
            if let Some(err) = failure {
                return Err(err);
            }
            Ok(total / (2.0 * PI * s2 * s2))
        })
        .collect()
}

/// Random-to-random work density `∫ dε D_f(w + ε) q_i(ε)` with `q_i`
/// tabulated once on a uniform grid and `D_f` evaluated in closed form.
#[derive(Clone, Debug)]
pub struct ConvolvedWorkPdf {
    params: TwoLevelParams,
    q: DensityGrid,
}

impl ConvolvedWorkPdf {
    pub fn new(params: &TwoLevelParams) -> Result<Self> {
        let dx = params.sigma_i.min(params.sigma_f) / 50.0;
        Self::with_spacing(params, dx, Execution::default())
    }

    pub fn with_spacing(params: &TwoLevelParams, dx: f64, execution: Execution) -> Result<Self> {
        let r = TRUNCATION * params.sigma_i;
        let spec = GridSpec::with_spacing(-r, r, dx)?;
        let (sigma_i, beta) = (params.sigma_i, params.beta);
        let q = if beta.is_infinite() {
            DensityGrid::from_fn(&spec, |e| ground_state_pdf(e, sigma_i))
        } else {
            DensityGrid::try_from_fn(&spec, execution, |e| q2(e, sigma_i, beta))?
        };
        Ok(ConvolvedWorkPdf { params: *params, q })
    }

    /// The tabulated `q_i` (centred at zero).
    pub fn initial_density(&self) -> &DensityGrid {
        &self.q
    }

    pub fn density(&self, w: f64) -> f64 {
        let x = w - self.params.mu_f + self.params.mu_i;
        let q = &self.q;
        let n = q.len();
        let sf = self.params.sigma_f;
        let reach = TRUNCATION * sf;
        // Only nodes with |x + ε| within the truncation window contribute.
        let k_lo = (((-x - reach) - q.x0) / q.dx).floor().max(0.0) as usize;
        let k_hi = ((((-x + reach) - q.x0) / q.dx).ceil().max(0.0) as usize).min(n - 1);
        let mut acc = 0.0;
        for k in k_lo.min(n - 1)..=k_hi {
            let weight = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            acc += weight * q.values[k] * dos2(x + q.x(k), sf);
        }
        acc * q.dx
    }

    pub fn tabulate(&self, spec: &GridSpec) -> DensityGrid {
        DensityGrid::from_fn(spec, |w| self.density(w))
    }

    /// Probability mass on `[lo, hi]`.
    pub fn probability(&self, lo: f64, hi: f64) -> Result<f64> {
        integrate(|w| self.density(w), lo, hi, &QuadSpec::with_tol(1e-12))
    }
}
