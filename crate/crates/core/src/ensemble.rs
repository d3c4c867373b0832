//! Ensemble-averaged densities for general `N`: the density of states, the
//! thermally weighted initial-energy density, the semicircle law, and the
//! averaged work densities built from them.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::eigen::eigendecompose;
use crate::error::{Error, Result};
use crate::numerics::{cross_correlate, DensityGrid, GridSpec};
use crate::parallel::SamplingPlan;
use crate::rmt::{sample_gue, GueParams, HermitianMatrix, LevelSampler};
use crate::work::{boltzmann_weights, transition_matrix};

pub const DEFAULT_GRID_POINTS: usize = 4096;

/// A normalized density on a grid with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEstimate {
    pub grid: DensityGrid,
    /// `1 − ∫ density` before renormalization.
    pub normalization_deficit: f64,
    /// The grid does not cover the region where the density is expected to
    /// be non-negligible.
    pub coverage_warning: bool,
}

impl GridEstimate {
    fn normalize(grid: DensityGrid, coverage_warning: bool) -> Result<Self> {
        if grid.integral() <= 0.0 {
            return Err(Error::invalid("density", "no mass on the grid"));
        }
        let (grid, normalization_deficit) = grid.normalized();
        Ok(GridEstimate {
            grid,
            normalization_deficit,
            coverage_warning,
        })
    }
}

fn bulk_half_width(params: &GueParams, margin: f64) -> f64 {
    params.semicircle_radius() + margin * params.sigma()
}

/// `μ ± (2σ√N + 8σ)` with [`DEFAULT_GRID_POINTS`] nodes.
pub fn default_grid(params: &GueParams) -> GridSpec {
    GridSpec::centered(
        params.mu(),
        bulk_half_width(params, 8.0),
        DEFAULT_GRID_POINTS,
    )
    .expect("positive width")
}

/// Whether `spec` reaches `μ ± (2σ√N + 6σ)`.
pub fn covers_spectrum(spec: &GridSpec, params: &GueParams) -> bool {
    let r = bulk_half_width(params, 6.0);
    spec.start <= params.mu() - r && spec.end >= params.mu() + r
}

/// Weighted histogram with one bin centred on each grid node.
#[derive(Clone, Debug)]
struct NodeHistogram {
    spec: GridSpec,
    weights: Vec<f64>,
    total: f64,
}

impl NodeHistogram {
    fn new(spec: &GridSpec) -> Self {
        NodeHistogram {
            spec: *spec,
            weights: vec![0.0; spec.points],
            total: 0.0,
        }
    }

    fn add(&mut self, x: f64, weight: f64) {
        self.total += weight;
        let k = ((x - self.spec.start) / self.spec.dx()).round();
        if k >= 0.0 && (k as usize) < self.weights.len() {
            self.weights[k as usize] += weight;
        }
    }

    fn merge(mut self, other: &NodeHistogram) -> Self {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.total += other.total;
        self
    }

    fn into_density(self) -> Result<DensityGrid> {
        let scale = 1.0 / (self.total * self.spec.dx());
        DensityGrid::new(
            self.spec.start,
            self.spec.dx(),
            self.weights.into_iter().map(|w| w * scale).collect(),
        )
    }
}

fn histogram_levels<F>(
    params: &GueParams,
    spec: &GridSpec,
    plan: &SamplingPlan,
    sampler: LevelSampler,
    bin: F,
) -> Result<GridEstimate>
where
    F: Fn(&[f64], &mut NodeHistogram) -> Result<()> + Sync + Send,
{
    if spec.points < 2 {
        return Err(Error::EmptyGrid);
    }
    let partials = plan.run(|rng, n| -> Result<NodeHistogram> {
        let mut h = NodeHistogram::new(spec);
        for _ in 0..n {
            let levels = sampler.sample(params, rng)?;
            bin(&levels, &mut h)?;
        }
        Ok(h)
    });
    let mut merged = NodeHistogram::new(spec);
    for p in partials {
        merged = merged.merge(&p?);
    }
    GridEstimate::normalize(merged.into_density()?, !covers_spectrum(spec, params))
}

/// Monte Carlo density of states: every eigenvalue of every sampled matrix
/// is binned.
pub fn dos_mc(
    params: &GueParams,
    spec: &GridSpec,
    plan: &SamplingPlan,
    sampler: LevelSampler,
) -> Result<GridEstimate> {
    histogram_levels(params, spec, plan, sampler, |levels, h| {
        for &e in levels {
            h.add(e, 1.0);
        }
        Ok(())
    })
}

/// Monte Carlo estimate of the thermally weighted density of initial
/// energies: each eigenvalue is binned with its Boltzmann weight.
pub fn q_mc(
    params: &GueParams,
    beta: f64,
    spec: &GridSpec,
    plan: &SamplingPlan,
    sampler: LevelSampler,
) -> Result<GridEstimate> {
    histogram_levels(params, spec, plan, sampler, |levels, h| {
        let w = boltzmann_weights(levels, beta)?;
        for (&e, &p) in levels.iter().zip(&w.weights) {
            h.add(e, p);
        }
        Ok(())
    })
}

/// Wigner semicircle `(1/2πσ²N) √(4σ²N − (E−μ)²)`.
pub fn semicircle_density(e: f64, params: &GueParams) -> f64 {
    let n = params.dim() as f64;
    let s2 = params.sigma() * params.sigma();
    let r2 = 4.0 * s2 * n - (e - params.mu()).powi(2);
    if r2 <= 0.0 {
        0.0
    } else {
        r2.sqrt() / (2.0 * PI * s2 * n)
    }
}

/// CDF of [`semicircle_density`].
pub fn semicircle_cdf(e: f64, params: &GueParams) -> f64 {
    let x = ((e - params.mu()) / params.semicircle_radius()).clamp(-1.0, 1.0);
    0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / PI
}

pub fn semicircle_grid(params: &GueParams, spec: &GridSpec) -> DensityGrid {
    DensityGrid::from_fn(spec, |e| semicircle_density(e, params))
}

/// Work grid spanning every shift of `dos_f` by the given initial energies,
/// at `dos_f`'s spacing.
pub fn fixed_to_random_grid(e_i: &[f64], dos_f: &DensityGrid) -> Result<GridSpec> {
    let (lo, hi) = min_max(e_i)?;
    GridSpec::with_spacing(dos_f.x0 - hi, dos_f.x_end() - lo, dos_f.dx)
}

fn min_max(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::invalid("e_i", "at least one level is required"));
    }
    Ok(values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        }))
}

/// `⟨p(w)⟩ = Σₙ D_f(w + eₙ) pₙ` for a fixed initial spectrum, with `D_f`
/// linearly interpolated from `dos_f`.
pub fn averaged_pdf_fixed_to_random(
    e_i: &[f64],
    beta: f64,
    dos_f: &DensityGrid,
    work: &GridSpec,
) -> Result<GridEstimate> {
    let (lo, hi) = min_max(e_i)?;
    let thermal = boltzmann_weights(e_i, beta)?;
    let grid = DensityGrid::from_fn(work, |w| {
        e_i.iter()
            .zip(&thermal.weights)
            .map(|(&e, &p)| p * dos_f.interpolate(w + e))
            .sum()
    });
    let covered = work.start <= dos_f.x0 - hi && work.end >= dos_f.x_end() - lo;
    GridEstimate::normalize(grid, !covered)
}

/// `⟨p(w)⟩ = ∫ dε D_f(w + ε) q_i(ε)` as a trapezoid cross-correlation.
pub fn averaged_pdf_random_to_random(
    q_i: &DensityGrid,
    dos_f: &DensityGrid,
) -> Result<GridEstimate> {
    GridEstimate::normalize(cross_correlate(dos_f, q_i)?, false)
}

/// Moves a work density from zero-mean ensembles to means `μ_i`, `μ_f`.
pub fn mean_shift(pdf: &DensityGrid, mu_f: f64, mu_i: f64) -> DensityGrid {
    pdf.shifted(mu_f - mu_i)
}

/// Sample mean and standard error of each `p(m|n)` over GUE draws of the
/// final Hamiltonian against a fixed initial one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedTransitions {
    pub dim: usize,
    pub n_samples: u64,
    /// Row-major, indexed `[m · dim + n]`.
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl AveragedTransitions {
    pub fn get(&self, m: usize, n: usize) -> (f64, f64) {
        let k = m * self.dim + n;
        (self.mean[k], self.stderr[k])
    }

    /// Largest `|mean − 1/N| / stderr` over all entries.
    pub fn max_deviation_in_stderr(&self) -> f64 {
        let target = 1.0 / self.dim as f64;
        self.mean
            .iter()
            .zip(&self.stderr)
            .map(|(m, s)| (m - target).abs() / s)
            .fold(0.0, f64::max)
    }
}

pub fn averaged_transitions(
    h_i: &HermitianMatrix,
    params_f: &GueParams,
    plan: &SamplingPlan,
) -> Result<AveragedTransitions> {
    let dim = params_f.dim();
    if h_i.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: h_i.dim(),
        });
    }
    let initial = eigendecompose(h_i)?;
    let partials = plan.run(|rng, n| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut sum = vec![0.0; dim * dim];
        let mut sum_sq = vec![0.0; dim * dim];
        for _ in 0..n {
            let fin = eigendecompose(&sample_gue(params_f, rng))?;
            let t = transition_matrix(&initial, &fin)?;
            for m in 0..dim {
                for k in 0..dim {
                    let v = t.get(m, k);
                    sum[m * dim + k] += v;
                    sum_sq[m * dim + k] += v * v;
                }
            }
        }
        Ok((sum, sum_sq))
    });
    let mut sum = vec![0.0; dim * dim];
    let mut sum_sq = vec![0.0; dim * dim];
    for p in partials {
        let (s, q) = p?;
        for k in 0..dim * dim {
            sum[k] += s[k];
            sum_sq[k] += q[k];
        }
    }
    let m = plan.n_samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let stderr = mean
        .iter()
        .zip(&sum_sq)
        .map(|(mu, q)| ((q / m - mu * mu).max(0.0) / (m - 1.0).max(1.0)).sqrt())
        .collect();
    Ok(AveragedTransitions {
        dim,
        n_samples: plan.n_samples,
        mean,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, ks_distance, QuadSpec};
    use crate::twolevel::{
        dos2, ground_state_pdf, pdf_det_to_random, pdf_high_t, q2, TwoLevelParams,
    };
    use crate::Execution;

    fn plan(n: u64, seed: u64) -> SamplingPlan {
        SamplingPlan::new(n, seed, 8).unwrap()
    }

    fn gaussian(var: f64) -> impl Fn(f64) -> f64 {
        move |x| (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    #[test]
    fn default_grid_geometry() {
        let p = GueParams::new(4, 1.0, 0.5).unwrap();
        let g = default_grid(&p);
        assert_eq!(g.points, 4096);
        assert!((g.end - 1.0 - (2.0 * 0.5 * 2.0 + 4.0)).abs() < 1e-12);
        assert!(covers_spectrum(&g, &p));
        assert!(!covers_spectrum(
            &GridSpec::centered(1.0, 3.0, 100).unwrap(),
            &p
        ));
    }

    #[test]
    fn semicircle_values() {
        let p = GueParams::new(16, 0.5, 2.0).unwrap();
        assert!((semicircle_density(0.5, &p) - 1.0 / (PI * 2.0 * 4.0)).abs() < 1e-16);
        assert_eq!(semicircle_density(0.5 + 16.001, &p), 0.0);
        let r = p.semicircle_radius();
        let total = integrate(
            |e| semicircle_density(e, &p),
            0.5 - r,
            0.5 + r,
            &QuadSpec::with_tol(1e-13),
        )
        .unwrap();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn semicircle_cdf_matches_quadrature() {
        let p = GueParams::new(9, -0.4, 0.8).unwrap();
        let r = p.semicircle_radius();
        for &e in &[-5.0f64, -2.0, -0.4, 1.0, 4.4, 6.0] {
            let q = integrate(
                |x| semicircle_density(x, &p),
                -0.4 - r,
                e.clamp(-0.4 - r, -0.4 + r),
                &QuadSpec::with_tol(1e-13),
            )
            .unwrap();
            assert!((semicircle_cdf(e, &p) - q).abs() < 1e-10, "{e}");
        }
    }

    #[test]
    fn dos_one_level_is_gaussian() {
        let p = GueParams::new(1, 0.3, 0.7).unwrap();
        let spec = GridSpec::centered(0.3, 6.0, 241).unwrap();
        let est = dos_mc(&p, &spec, &plan(400_000, 1), LevelSampler::Matrix).unwrap();
        let sup = est.grid.sup_distance_to(|x| gaussian(0.49)(x - 0.3));
        assert!(sup < 0.02, "{sup}");
        assert!(est.normalization_deficit.abs() < 1e-3);
        assert!(!est.coverage_warning);
    }

    #[test]
    fn dos_two_levels_matches_closed_form() {
        let p = GueParams::new(2, 0.0, 1.0).unwrap();
        let spec = GridSpec::centered(0.0, 7.0, 141).unwrap();
        let est = dos_mc(&p, &spec, &plan(1_000_000, 2), LevelSampler::Direct).unwrap();
        let sup = est.grid.sup_distance_to(|x| dos2(x, 1.0));
        assert!(sup < 0.01, "{sup}");
    }

    #[test]
    fn coverage_warning_raised() {
        let p = GueParams::new(2, 0.0, 1.0).unwrap();
        let spec = GridSpec::centered(0.0, 3.0, 61).unwrap();
        let est = dos_mc(&p, &spec, &plan(1000, 2), LevelSampler::Direct).unwrap();
        assert!(est.coverage_warning);
        assert!(est.normalization_deficit > 0.0);
    }

    #[test]
    fn dos_large_n_approaches_semicircle() {
        let p = GueParams::new(64, 0.0, 1.0).unwrap();
        let spec = GridSpec::centered(0.0, 24.0, 481).unwrap();
        let est = dos_mc(&p, &spec, &plan(200, 3), LevelSampler::Matrix).unwrap();
        let ks = ks_distance(&est.grid, &semicircle_grid(&p, &spec));
        assert!(ks < 0.02, "{ks}");
    }

    #[test]
    fn q_mc_infinite_temperature_is_dos() {
        let p = GueParams::new(3, 0.0, 1.0).unwrap();
        let spec = default_grid(&p);
        let a = dos_mc(&p, &spec, &plan(2000, 5), LevelSampler::Matrix).unwrap();
        let b = q_mc(&p, 0.0, &spec, &plan(2000, 5), LevelSampler::Matrix).unwrap();
        assert!(a.grid.sup_distance(&b.grid) < 1e-12);
    }

    #[test]
    fn q_mc_two_levels_matches_quadrature() {
        let p = GueParams::new(2, 0.0, 1.0).unwrap();
        let spec = GridSpec::centered(0.0, 7.0, 141).unwrap();
        for &beta in &[0.5, 3.0] {
            let est = q_mc(&p, beta, &spec, &plan(1_000_000, 6), LevelSampler::Direct).unwrap();
            let sup = est.grid.sup_distance_to(|e| q2(e, 1.0, beta).unwrap());
            assert!(sup < 0.01, "β={beta}: {sup}");
        }
    }

    #[test]
    fn q_mc_cold_concentrates_on_ground_state() {
        let p = GueParams::new(2, 0.0, 1.0).unwrap();
        let spec = GridSpec::centered(0.0, 7.0, 141).unwrap();
        let est = q_mc(&p, 50.0, &spec, &plan(400_000, 7), LevelSampler::Direct).unwrap();
        let sup = est.grid.sup_distance_to(|e| ground_state_pdf(e, 1.0));
        assert!(sup < 0.015, "{sup}");
    }

    #[test]
    fn estimates_reproducible_across_execution() {
        let p = GueParams::new(3, 0.0, 1.0).unwrap();
        let spec = default_grid(&p);
        let a = q_mc(&p, 1.0, &spec, &plan(500, 9), LevelSampler::Matrix).unwrap();
        let b = q_mc(
            &p,
            1.0,
            &spec,
            &plan(500, 9).with_execution(Execution::Sequential),
            LevelSampler::Matrix,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_to_random_single_level_is_shifted_dos() {
        let spec = GridSpec::centered(0.0, 10.0, 2001).unwrap();
        let dos = DensityGrid::from_fn(&spec, |e| dos2(e, 1.0));
        let work = fixed_to_random_grid(&[0.0], &dos).unwrap();
        let est = averaged_pdf_fixed_to_random(&[0.0], 1.0, &dos, &work).unwrap();
        assert!(est.grid.sup_distance(&dos) < 1e-12);
        let shifted = averaged_pdf_fixed_to_random(
            &[0.5],
            1.0,
            &dos,
            &fixed_to_random_grid(&[0.5], &dos).unwrap(),
        )
        .unwrap();
        assert!(shifted.grid.sup_distance_to(|w| dos2(w + 0.5, 1.0)) < 1e-10);
        assert!(!shifted.coverage_warning);
    }

    #[test]
    fn fixed_to_random_infinite_temperature_is_uniform_mixture() {
        let spec = GridSpec::centered(0.0, 10.0, 2001).unwrap();
        let dos = DensityGrid::from_fn(&spec, |e| dos2(e, 1.0));
        let levels = [-1.0, 0.2, 0.9];
        let work = fixed_to_random_grid(&levels, &dos).unwrap();
        let est = averaged_pdf_fixed_to_random(&levels, 0.0, &dos, &work).unwrap();
        let permuted = averaged_pdf_fixed_to_random(&[0.9, -1.0, 0.2], 0.0, &dos, &work).unwrap();
        assert!(est.grid.sup_distance(&permuted.grid) < 1e-15);
        let mix = |w: f64| levels.iter().map(|e| dos.interpolate(w + e)).sum::<f64>() / 3.0;
        assert!(est.grid.sup_distance_to(mix) < 1e-12);
    }

    #[test]
    fn fixed_to_random_two_levels_matches_closed_form() {
        let gp = GueParams::new(2, 0.0, 1.0).unwrap();
        let dos = DensityGrid::from_fn(&default_grid(&gp), |e| dos2(e, 1.0));
        for &beta in &[0.1, 1.0, 10.0] {
            let p = TwoLevelParams::new(1.0, 1.0, beta)
                .unwrap()
                .with_epsilon(1.0)
                .unwrap();
            let levels = [-0.5, 0.5];
            let work = fixed_to_random_grid(&levels, &dos).unwrap();
            let est = averaged_pdf_fixed_to_random(&levels, beta, &dos, &work).unwrap();
            let sup = est.grid.sup_distance_to(|w| pdf_det_to_random(w, &p));
            assert!(sup < 1e-6, "β={beta}: {sup}");
        }
    }

    #[test]
    fn random_to_random_gaussians() {
        let spec = GridSpec::centered(0.0, 12.0, 2401).unwrap();
        let g = DensityGrid::from_fn(&spec, gaussian(1.0));
        let est = averaged_pdf_random_to_random(&g, &g).unwrap();
        assert!(est.grid.sup_distance_to(gaussian(2.0)) < 1e-10);
        assert!(est.normalization_deficit.abs() < 1e-10);
    }

    #[test]
    fn random_to_random_near_delta() {
        let spec = GridSpec::centered(0.0, 12.0, 2401).unwrap();
        let dos = DensityGrid::from_fn(&spec, |e| dos2(e, 1.0));
        let delta = DensityGrid::from_fn(&spec, |e| gaussian(1e-4)(e - 0.8));
        let est = averaged_pdf_random_to_random(&delta, &dos).unwrap();
        assert!(est.grid.sup_distance_to(|w| dos2(w + 0.8, 1.0)) < 1e-3);
    }

    #[test]
    fn random_to_random_high_temperature_closed_form() {
        for &s in &[0.25, 1.0] {
            let pi = GueParams::new(2, 0.0, 1.0).unwrap();
            let pf = GueParams::new(2, 0.0, s).unwrap();
            let dx = default_grid(&pi).dx();
            let q = DensityGrid::from_fn(&default_grid(&pi), |e| dos2(e, 1.0));
            let span = default_grid(&pf);
            let d = DensityGrid::from_fn(
                &GridSpec::with_spacing(span.start, span.end, dx).unwrap(),
                |e| dos2(e, s),
            );
            let est = averaged_pdf_random_to_random(&q, &d).unwrap();
            let sup = est.grid.sup_distance_to(|w| pdf_high_t(w, 1.0, s));
            assert!(sup < 1e-6, "s={s}: {sup}");
        }
    }

    #[test]
    fn incommensurate_grids_rejected() {
        let a = DensityGrid::from_fn(&GridSpec::new(-1.0, 1.0, 11).unwrap(), |_| 1.0);
        let b = DensityGrid::from_fn(&GridSpec::new(-1.0, 1.0, 12).unwrap(), |_| 1.0);
        assert!(averaged_pdf_random_to_random(&a, &b).is_err());
    }

    #[test]
    fn mean_shift_properties() {
        let spec = GridSpec::centered(0.0, 10.0, 1001).unwrap();
        let g = DensityGrid::from_fn(&spec, |e| dos2(e, 1.0));
        assert_eq!(mean_shift(&g, 0.4, 0.4), g);
        let shifted = mean_shift(&g, 1.5, 0.25);
        assert!((shifted.mean() - g.mean() - 1.25).abs() < 1e-12);
        let back = mean_shift(&shifted, 0.25, 1.5);
        assert!((back.x0 - g.x0).abs() < 1e-15);
        assert_eq!(back.values, g.values);
    }

    #[test]
    fn transitions_average_to_uniform() {
        let h = HermitianMatrix::diagonal(&[-1.0, 0.0, 2.0]).unwrap();
        let pf = GueParams::new(3, 0.0, 1.0).unwrap();
        let t = averaged_transitions(&h, &pf, &plan(20_000, 11)).unwrap();
        assert!(t.max_deviation_in_stderr() < 4.0, "{t:?}");
        let (m, s) = t.get(0, 2);
        assert!((m - 1.0 / 3.0).abs() < 4.0 * s);
    }

    #[test]
    fn transitions_dimension_checked() {
        let h = HermitianMatrix::diagonal(&[0.0, 1.0]).unwrap();
        let pf = GueParams::new(3, 0.0, 1.0).unwrap();
        assert!(averaged_transitions(&h, &pf, &plan(10, 1)).is_err());
    }
}
