//! The acceptance suite: one check per criterion, each reporting its own
//! measured figures.

use serde::Serialize;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use crate::eigen::eigendecompose;
use crate::ensemble::{averaged_transitions, semicircle_cdf};
use crate::error::Result;
use crate::io::Metadata;
use crate::montecarlo::{compare_with_reference, estimate_work_pdf, BinSpec, McConfig};
use crate::numerics::{
    cross_correlate, integrate, integrate_centered, ks_statistic, DensityGrid, GridSpec, QuadSpec,
};
use crate::parallel::{stream_rng, Execution, SamplingPlan};
use crate::rmt::{sample_gue, GueParams, LevelSampler};
use crate::twolevel::{
    dos2, even_moment_check, ground_state_mean, ground_state_pdf, mean_initial_energy,
    pdf_det_to_random, pdf_high_t, q2, work_moments, ConvolvedWorkPdf, TwoLevelParams,
};
use crate::work::jarzynski_check;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<34} {:>8.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    check: fn(bool) -> Result<(bool, String)>,
}

impl Criterion {
    /// Runs the check. `quick` only skips slow duplicate timings; every
    /// tolerance is the same in both modes.
    pub fn run(&self, quick: bool) -> CriterionOutcome {
        let start = Instant::now();
        let (passed, detail) = match (self.check)(quick) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionOutcome {
            id: self.id,
            name: self.name,
            passed,
            detail,
            elapsed: start.elapsed(),
        }
    }
}

pub const CRITERIA: [Criterion; 11] = [
    Criterion {
        id: 1,
        name: "jarzynski identity",
        check: jarzynski,
    },
    Criterion {
        id: 2,
        name: "two-level closed forms",
        check: two_level_closed_forms,
    },
    Criterion {
        id: 3,
        name: "second work moment",
        check: second_work_moment,
    },
    Criterion {
        id: 4,
        name: "temperature-independent moments",
        check: even_moments,
    },
    Criterion {
        id: 5,
        name: "high-temperature closed form",
        check: high_temperature,
    },
    Criterion {
        id: 6,
        name: "zero-temperature limit",
        check: zero_temperature,
    },
    Criterion {
        id: 7,
        name: "monte carlo vs quadrature",
        check: monte_carlo,
    },
    Criterion {
        id: 8,
        name: "semicircle law",
        check: semicircle,
    },
    Criterion {
        id: 9,
        name: "averaged transition probability",
        check: transitions,
    },
    Criterion {
        id: 10,
        name: "mean initial energy",
        check: initial_energy,
    },
    Criterion {
        id: 11,
        name: "determinism",
        check: determinism,
    },
];

pub fn run_all(quick: bool) -> Vec<CriterionOutcome> {
    CRITERIA.iter().map(|c| c.run(quick)).collect()
}

fn jarzynski(_: bool) -> Result<(bool, String)> {
    let start = Instant::now();
    let mut rng = stream_rng(2024, 0);
    let mut worst = 0.0f64;
    for pair in 0..100 {
        let n = 2 + pair % 7;
        let p = GueParams::new(n, 0.0, 1.0)?;
        let initial = eigendecompose(&sample_gue(&p, &mut rng))?;
        let fin = eigendecompose(&sample_gue(&p, &mut rng))?;
        for beta in [0.1, 1.0, 10.0] {
            worst = worst.max(jarzynski_check(&initial, &fin, beta)?.defect());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-10 && secs < 5.0,
        format!("max defect {worst:.2e}, {secs:.2}s"),
    ))
}

fn two_level_closed_forms(_: bool) -> Result<(bool, String)> {
    let spec = QuadSpec::with_tol(1e-13);
    let mut worst_dos = 0.0f64;
    for sigma in [0.25, 1.0, 3.0] {
        let mass = integrate_centered(|e| dos2(e, sigma), 0.0, sigma, &spec)?;
        let second = integrate_centered(|e| e * e * dos2(e, sigma), 0.0, sigma, &spec)?;
        worst_dos = worst_dos
            .max((mass - 1.0).abs())
            .max((second / (sigma * sigma) - 2.0).abs());
    }
    let mut worst_det = 0.0f64;
    let sigma_f = 1.0;
    for ratio in [0.1, 1.0, 10.0] {
        for bs in [0.1, 1.0, 10.0] {
            let p =
                TwoLevelParams::new(1.0, sigma_f, bs / sigma_f)?.with_epsilon(ratio * sigma_f)?;
            let reach = 12.0 * sigma_f + p.epsilon;
            let mass = integrate(|w| pdf_det_to_random(w, &p), -reach, reach, &spec)?;
            worst_det = worst_det.max((mass - 1.0).abs());
        }
    }
    Ok((
        worst_dos < 1e-10 && worst_det < 1e-8,
        format!("dos {worst_dos:.1e}, det-to-random mass {worst_det:.1e}"),
    ))
}

fn second_work_moment(_: bool) -> Result<(bool, String)> {
    let mut worst_formula = 0.0f64;
    let mut worst_quad = 0.0f64;
    for s in [0.25, 0.5] {
        let target = 2.0 * (1.0 + s * s);
        for bs in [0.0, 1.0, 10.0] {
            let p = TwoLevelParams::new(1.0, s, bs)?;
            let m = work_moments(&p)?;
            worst_formula = worst_formula.max((m.second / target - 1.0).abs());
            let conv = ConvolvedWorkPdf::new(&p)?;
            let reach = 12.0 + 12.0 * s;
            let second = integrate(
                |w| w * w * conv.density(w),
                -reach,
                reach,
                &QuadSpec::with_tol(1e-11),
            )?;
            worst_quad = worst_quad.max((second / target - 1.0).abs());
        }
    }
    Ok((
        worst_formula < 1e-6 && worst_quad < 1e-6,
        format!("relative error: formulas {worst_formula:.1e}, quadrature {worst_quad:.1e}"),
    ))
}

fn even_moments(_: bool) -> Result<(bool, String)> {
    let betas = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0];
    let fourth_oracle = integrate_centered(
        |e| e.powi(4) * dos2(e, 1.0),
        0.0,
        1.0,
        &QuadSpec::with_tol(1e-13),
    )?;
    let second = even_moment_check(1, &betas, 1.0)?;
    let fourth = even_moment_check(2, &betas, 1.0)?;
    let spread = |v: &[f64]| {
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        (hi - lo) / lo.abs()
    };
    let (s2, s4) = (spread(&second), spread(&fourth));
    let dev2 = (second[0] / 2.0 - 1.0).abs();
    let dev4 = (fourth[0] / fourth_oracle - 1.0)
        .abs()
        .max((fourth_oracle / 9.0 - 1.0).abs());
    Ok((
        s2 < 1e-7 && s4 < 1e-7 && dev2 < 1e-7 && dev4 < 1e-7,
        format!(
            "spread <e2> {s2:.1e}, <e4> {s4:.1e}; values {:.10}, {:.10}",
            second[0], fourth[0]
        ),
    ))
}

fn high_temperature(_: bool) -> Result<(bool, String)> {
    let dx = 0.005;
    let mut worst = 0.0f64;
    for s in [0.25, 0.5, 0.75] {
        let d_i = DensityGrid::from_fn(&GridSpec::with_spacing(-12.0, 12.0, dx)?, |e| dos2(e, 1.0));
        let d_f = DensityGrid::from_fn(&GridSpec::with_spacing(-12.0 * s, 12.0 * s, dx)?, |e| {
            dos2(e, s)
        });
        let conv = cross_correlate(&d_f, &d_i)?;
        for k in 0..conv.len() {
            let w = conv.x(k);
            if w.abs() <= 6.0 {
                worst = worst.max((conv.values[k] - pdf_high_t(w, 1.0, s)).abs());
            }
        }
    }
    Ok((worst < 1e-6, format!("sup norm {worst:.1e}")))
}

fn zero_temperature(_: bool) -> Result<(bool, String)> {
    let mut sup = 0.0f64;
    for k in -800..=800 {
        let e = k as f64 * 0.01;
        sup = sup.max((q2(e, 1.0, 10.0)? - ground_state_pdf(e, 1.0)).abs());
    }
    let mean = integrate_centered(
        |e| e * ground_state_pdf(e, 1.0),
        0.0,
        1.0,
        &QuadSpec::with_tol(1e-13),
    )?;
    let dev = (mean - ground_state_mean(1.0)).abs();
    let exact = (ground_state_mean(1.0) + 2.0 / PI.sqrt()).abs();
    Ok((
        sup < 1e-3 && dev < 1e-8 && exact < 1e-15,
        format!("sup |q - rho_gs| {sup:.1e}, ground-state mean error {dev:.1e}"),
    ))
}

fn monte_carlo(quick: bool) -> Result<(bool, String)> {
    let (beta, s) = (0.1, 0.25);
    let pi = GueParams::new(2, 0.0, 1.0)?;
    let pf = GueParams::new(2, 0.0, s)?;
    let bins = BinSpec::default_for(&pi, &pf);
    let reference = ConvolvedWorkPdf::new(&TwoLevelParams::new(1.0, s, beta)?)?;

    let run = |plan: SamplingPlan| -> Result<_> {
        let start = Instant::now();
        let est = estimate_work_pdf(&pi, &pf, beta, &McConfig::new(plan, bins))?;
        Ok((est, start.elapsed().as_secs_f64()))
    };
    let (est, parallel_secs) = run(SamplingPlan::new(1_000_000, 7, 8)?)?;
    let sequential_secs = if quick {
        None
    } else {
        let plan = SamplingPlan::new(1_000_000, 7, 1)?.with_execution(Execution::Sequential);
        Some(run(plan)?.1)
    };
    let cmp = compare_with_reference(&est.histogram, |a, b| reference.probability(a, b))?;
    let timing_ok = parallel_secs < 10.0 && sequential_secs.is_none_or(|t| t < 60.0);
    let seq = sequential_secs.map_or("skipped".to_string(), |t| format!("{t:.2}s"));
    Ok((
        cmp.fraction_within_3se >= 0.99 && cmp.ks < 5e-3 && timing_ok,
        format!(
            "{:.1}% bins within 3 SE, KS {:.1e}, 8 streams {parallel_secs:.2}s, 1 thread {seq}",
            100.0 * cmp.fraction_within_3se,
            cmp.ks
        ),
    ))
}

fn semicircle(_: bool) -> Result<(bool, String)> {
    let start = Instant::now();
    let p = GueParams::new(64, 0.0, 1.0)?;
    let plan = SamplingPlan::new(200, 8, 8)?;
    let spectra = plan.run(|rng, n| -> Result<Vec<f64>> {
        let mut levels = Vec::new();
        for _ in 0..n {
            levels.extend(LevelSampler::Matrix.sample(&p, rng)?);
        }
        Ok(levels)
    });
    let mut levels = Vec::new();
    for s in spectra {
        levels.extend(s?);
    }
    let ks = ks_statistic(&levels, |e| semicircle_cdf(e, &p));
    let secs = start.elapsed().as_secs_f64();
    Ok((
        ks < 0.02 && secs < 30.0,
        format!("KS {ks:.2e} over {} levels, {secs:.2}s", levels.len()),
    ))
}

fn transitions(_: bool) -> Result<(bool, String)> {
    let p = GueParams::new(4, 0.0, 1.0)?;
    let h_i = sample_gue(&p, &mut stream_rng(9, 1_000));
    let t = averaged_transitions(&h_i, &p, &SamplingPlan::new(100_000, 9, 8)?)?;
    let dev = t.max_deviation_in_stderr();
    Ok((
        dev < 4.0,
        format!("max |p - 1/4| = {dev:.2} standard errors"),
    ))
}

fn initial_energy(_: bool) -> Result<(bool, String)> {
    let cold = mean_initial_energy(8.0, 1.0)?;
    let rel = (cold / ground_state_mean(1.0) - 1.0).abs();
    let hot = mean_initial_energy(0.0, 1.0)?.abs();
    let values = (0..=100)
        .map(|k| mean_initial_energy(k as f64 * 0.1, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let monotone = values.windows(2).all(|w| w[1] <= w[0]);
    Ok((
        rel < 0.01 && hot < 1e-12 && monotone,
        format!(
            "beta=8 off by {:.2}%, beta=0 value {hot:.1e}, monotone {monotone}",
            100.0 * rel
        ),
    ))
}

fn determinism(_: bool) -> Result<(bool, String)> {
    let pi = GueParams::new(2, 0.0, 1.0)?;
    let pf = GueParams::new(2, 0.0, 0.25)?;
    let cfg = McConfig::new(
        SamplingPlan::new(200_000, 42, 8)?,
        BinSpec::default_for(&pi, &pf),
    );
    let render = || -> Result<String> {
        let est = estimate_work_pdf(&pi, &pf, 0.1, &cfg)?;
        Ok(est
            .histogram
            .to_csv_string(&Metadata::new().with("seed", 42).with("streams", 8)))
    };
    let (a, b) = (render()?, render()?);
    Ok((a == b, format!("{} bytes, identical: {}", a.len(), a == b)))
}
