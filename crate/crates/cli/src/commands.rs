use anyhow::Result;
use serde_json::json;
use std::io::Write;

use gue_quench::ensemble::{dos_mc, semicircle_grid, GridEstimate};
use gue_quench::io::{Metadata, Table};
use gue_quench::montecarlo::{
    compare_with_reference, estimate_work_pdf, BinSpec, Histogram, McConfig,
};
use gue_quench::parallel::stream_rng;
use gue_quench::rmt::sample_gue;
use gue_quench::twolevel::{
    dos2, ground_state_pdf, pdf_det_to_random, q2, work_moments, work_moments_zero_temperature,
    ConvolvedWorkPdf, TwoLevelParams,
};
use gue_quench::verify::CRITERIA;
use gue_quench::work::jarzynski_check;
use gue_quench::{
    eigendecompose, eigenvalues, DensityGrid, Error, Execution, GridSpec, GueParams, SamplingPlan,
};

use crate::args::*;
use crate::output::{destination, emit, grid_json, header, metadata_json, pretty, write_text};

/// Result of a subcommand that ran to completion.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    VerificationFailed,
}

pub fn run(command: Command) -> Result<Status> {
    match command {
        Command::GueSample(a) => gue_sample(a),
        Command::Dos(a) => dos(a),
        Command::Det2rand(a) => det2rand(a),
        Command::QDensity(a) => q_density(a),
        Command::Rand2rand(a) => rand2rand(a),
        Command::Mc(a) => mc(a),
        Command::Moments(a) => moments(a),
        Command::Jarzynski(a) => jarzynski(a),
        Command::Verify(a) => verify(a),
    }
}

fn usage(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

fn plan(s: &SamplingArgs) -> Result<SamplingPlan> {
    let execution = if s.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    Ok(SamplingPlan::new(s.samples, s.seed, s.streams)?.with_execution(execution))
}

fn sampling_metadata(meta: &mut Metadata, s: &SamplingArgs) {
    meta.push("samples", s.samples);
    meta.push("seed", s.seed);
    meta.push("streams", s.streams);
    meta.push("sampler", format!("{:?}", s.sampler).to_lowercase());
}

fn emit_grid(
    out: &OutputArgs,
    stem: &str,
    grid: &DensityGrid,
    meta: &Metadata,
    diagnostics: Option<(f64, bool)>,
) -> Result<()> {
    emit(
        out,
        stem,
        || grid.to_csv_string(meta),
        || grid_json(grid, meta, diagnostics),
    )?;
    Ok(())
}

fn gue_sample(a: GueSampleArgs) -> Result<Status> {
    let params = GueParams::new(a.n, a.mu, a.sigma)?;
    let mut rng = stream_rng(a.seed, 0);
    let mut samples = Vec::with_capacity(a.count);
    for _ in 0..a.count {
        let h = sample_gue(&params, &mut rng);
        let e = eigenvalues(&h)?;
        samples.push((h, e));
    }
    let meta = header("gue-sample")
        .with("n", a.n)
        .with("mu", a.mu)
        .with("sigma", a.sigma)
        .with("seed", a.seed);
    let names: Vec<String> = (1..=a.n).map(|k| format!("e{k}")).collect();
    emit(
        &a.output,
        "gue-sample",
        || {
            let cols: Vec<&str> = names.iter().map(String::as_str).collect();
            let mut t = Table::new(meta.clone().with("units", "eigenvalues in sigma"), &cols);
            for (_, e) in &samples {
                t.push_row(e.iter().map(|x| x / a.sigma).collect());
            }
            t.to_csv_string()
        },
        || {
            json!({
                "metadata": metadata_json(&meta),
                "samples": samples.iter().map(|(h, e)| json!({"matrix": h, "eigenvalues": e})).collect::<Vec<_>>(),
            })
        },
    )?;
    Ok(Status::Success)
}

fn dos(a: DosArgs) -> Result<Status> {
    let params = GueParams::new(a.n, a.mu, a.sigma)?;
    let spec = GridSpec::centered(a.mu, params.semicircle_radius() + 8.0 * a.sigma, a.points)?;
    let mut meta = header("dos")
        .with("n", a.n)
        .with("mu", a.mu)
        .with("sigma", a.sigma)
        .with("method", format!("{:?}", a.method).to_lowercase());
    let (grid, diagnostics) = match a.method {
        DosMethod::Mc => {
            sampling_metadata(&mut meta, &a.sampling);
            let GridEstimate {
                grid,
                normalization_deficit,
                coverage_warning,
            } = dos_mc(
                &params,
                &spec,
                &plan(&a.sampling)?,
                a.sampling.sampler.into(),
            )?;
            meta.push("normalization_deficit", normalization_deficit);
            (grid, Some((normalization_deficit, coverage_warning)))
        }
        DosMethod::Semicircle => (semicircle_grid(&params, &spec), None),
        DosMethod::ClosedForm => {
            if a.n != 2 {
                return Err(usage("method", "the closed form exists for --n 2 only").into());
            }
            (
                DensityGrid::from_fn(&spec, |e| dos2(e - a.mu, a.sigma)),
                None,
            )
        }
    };
    meta.push("units", "x = E/sigma, density in 1/sigma");
    emit_grid(
        &a.output,
        "dos",
        &grid.rescaled(a.sigma),
        &meta,
        diagnostics,
    )?;
    Ok(Status::Success)
}

fn det2rand(a: Det2randArgs) -> Result<Status> {
    let p = TwoLevelParams::new(1.0, a.sigma_f, a.beta)?
        .with_epsilon(a.epsilon)?
        .with_means(0.0, a.mu_f);
    let spec = GridSpec::centered(a.mu_f, 6.0 * a.sigma_f + 0.5 * a.epsilon, a.points)?;
    let grid = DensityGrid::from_fn(&spec, |w| pdf_det_to_random(w, &p));
    let meta = header("det2rand")
        .with("epsilon", a.epsilon)
        .with("sigma_f", a.sigma_f)
        .with("mu_f", a.mu_f)
        .with("beta", a.beta)
        .with("epsilon_over_sigma_f", a.epsilon / a.sigma_f)
        .with("beta_sigma_f", a.beta * a.sigma_f)
        .with("units", "x = w/sigma_f, density in 1/sigma_f");
    emit_grid(
        &a.output,
        "det2rand",
        &grid.rescaled(a.sigma_f),
        &meta,
        None,
    )?;
    Ok(Status::Success)
}

fn q_density(a: QDensityArgs) -> Result<Status> {
    TwoLevelParams::new(a.sigma_i, 1.0, a.beta)?;
    let spec = GridSpec::centered(0.0, 6.0 * a.sigma_i, a.points)?;
    let (sigma, beta) = (a.sigma_i, a.beta);
    let grid = if beta.is_infinite() {
        DensityGrid::from_fn(&spec, |e| ground_state_pdf(e, sigma))
    } else {
        DensityGrid::try_from_fn(&spec, Execution::Parallel, |e| q2(e, sigma, beta))?
    };
    let meta = header("q-density")
        .with("sigma_i", a.sigma_i)
        .with("beta", a.beta)
        .with("beta_sigma_i", a.beta * a.sigma_i)
        .with("units", "x = e/sigma_i, density in 1/sigma_i");
    emit_grid(
        &a.output,
        "q-density",
        &grid.rescaled(a.sigma_i),
        &meta,
        None,
    )?;
    Ok(Status::Success)
}

fn pair_params(p: &PairArgs) -> Result<TwoLevelParams> {
    Ok(TwoLevelParams::new(p.sigma_i, p.sigma_f(), p.beta)?.with_means(p.mu_i, p.mu_f))
}

fn pair_metadata(meta: &mut Metadata, p: &PairArgs) {
    meta.push("sigma_i", p.sigma_i);
    meta.push("sigma_f", p.sigma_f());
    meta.push("s", p.sigma_f() / p.sigma_i);
    meta.push("mu_i", p.mu_i);
    meta.push("mu_f", p.mu_f);
    meta.push("beta", p.beta);
    meta.push("beta_sigma_i", p.beta * p.sigma_i);
}

fn rand2rand(a: Rand2randArgs) -> Result<Status> {
    let p = pair_params(&a.pair)?;
    let half = 6.0 * std::f64::consts::SQRT_2 * p.sigma_i.max(p.sigma_f);
    let spec = GridSpec::centered(p.mu_f - p.mu_i, half, a.points)?;
    let grid = ConvolvedWorkPdf::new(&p)?.tabulate(&spec);
    let mut meta = header("rand2rand");
    pair_metadata(&mut meta, &a.pair);
    meta.push("units", "x = w/sigma_i, density in 1/sigma_i");
    emit_grid(
        &a.output,
        "rand2rand",
        &grid.rescaled(p.sigma_i),
        &meta,
        None,
    )?;
    Ok(Status::Success)
}

fn mc(a: McArgs) -> Result<Status> {
    let pi = GueParams::new(a.n, a.pair.mu_i, a.pair.sigma_i)?;
    let pf = GueParams::new(a.n, a.pair.mu_f, a.pair.sigma_f())?;
    let default = BinSpec::default_for(&pi, &pf);
    let bins = BinSpec::new(default.lo, default.hi, a.bins)?;
    let cfg = McConfig::new(plan(&a.sampling)?, bins)
        .with_model(a.model.into())
        .with_sampler(a.sampling.sampler.into());
    let est = estimate_work_pdf(&pi, &pf, a.pair.beta, &cfg)?;
    let comparison = if a.compare {
        if a.n != 2 {
            return Err(usage("compare", "the quadrature reference exists for --n 2 only").into());
        }
        let reference = ConvolvedWorkPdf::new(&pair_params(&a.pair)?)?;
        Some(compare_with_reference(&est.histogram, |lo, hi| {
            reference.probability(lo, hi)
        })?)
    } else {
        None
    };

    let mut meta = header("mc").with("n", a.n);
    pair_metadata(&mut meta, &a.pair);
    sampling_metadata(&mut meta, &a.sampling);
    meta.push("model", format!("{:?}", a.model).to_lowercase());
    meta.push("bins", a.bins);
    meta.push(
        "out_of_range",
        est.histogram.underflow + est.histogram.overflow,
    );
    meta.push("units", "w in sigma_i, density and stderr in 1/sigma_i");
    let scaled = Histogram {
        edges: est
            .histogram
            .edges
            .iter()
            .map(|e| e / a.pair.sigma_i)
            .collect(),
        ..est.histogram.clone()
    };
    let summary = json!({
        "metadata": metadata_json(&meta),
        "summary": est.summary(comparison),
    });
    if let Some(path) = &a.summary {
        let target = destination(
            &OutputArgs {
                out: Some(path.clone()),
                format: Format::Json,
            },
            "mc-summary",
        );
        write_text(target.as_deref(), &pretty(&summary))?;
    }
    emit(
        &a.output,
        "mc",
        || scaled.to_csv_string(&meta),
        || summary.clone(),
    )?;
    Ok(Status::Success)
}

fn moments(a: MomentsArgs) -> Result<Status> {
    let meta = header("moments")
        .with("sigma_i", a.sigma_i)
        .with("mu_i", a.mu_i)
        .with("mu_f", a.mu_f)
        .with("beta_max", a.beta_max)
        .with(
            "units",
            "beta in 1/sigma_i, means in sigma_i, variances in sigma_i^2",
        );
    let mut table = Table::new(
        meta.clone(),
        &[
            "s",
            "beta",
            "mean",
            "variance",
            "mean_zero_t",
            "variance_zero_t",
        ],
    );
    for &s in &a.s {
        for k in 0..a.points {
            let b = a.beta_max * k as f64 / (a.points - 1) as f64;
            let p = TwoLevelParams::new(a.sigma_i, s * a.sigma_i, b / a.sigma_i)?
                .with_means(a.mu_i, a.mu_f);
            let m = work_moments(&p)?;
            let cold = work_moments_zero_temperature(&p);
            let s2 = a.sigma_i * a.sigma_i;
            table.push_row(vec![
                s,
                b,
                m.mean / a.sigma_i,
                m.variance / s2,
                cold.mean / a.sigma_i,
                cold.variance / s2,
            ]);
        }
    }
    emit(
        &a.output,
        "moments",
        || table.to_csv_string(),
        || {
            let rows: Vec<_> = table
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "s": r[0], "beta": r[1], "mean": r[2], "variance": r[3],
                        "mean_zero_t": r[4], "variance_zero_t": r[5],
                    })
                })
                .collect();
            json!({"metadata": metadata_json(&meta), "rows": rows})
        },
    )?;
    Ok(Status::Success)
}

fn jarzynski(a: JarzynskiArgs) -> Result<Status> {
    if !(a.pair.beta > 0.0 && a.pair.beta.is_finite()) {
        return Err(usage("beta", "must be finite and > 0").into());
    }
    let pi = GueParams::new(a.n, a.pair.mu_i, a.pair.sigma_i)?;
    let pf = GueParams::new(a.n, a.pair.mu_f, a.pair.sigma_f())?;
    let mut rng = stream_rng(a.seed, 0);
    let mut reports = Vec::with_capacity(a.pairs);
    for _ in 0..a.pairs {
        let initial = eigendecompose(&sample_gue(&pi, &mut rng))?;
        let fin = eigendecompose(&sample_gue(&pf, &mut rng))?;
        reports.push(jarzynski_check(&initial, &fin, a.pair.beta)?);
    }
    let worst = reports.iter().map(|r| r.defect()).fold(0.0, f64::max);
    let mut meta = header("jarzynski").with("n", a.n);
    pair_metadata(&mut meta, &a.pair);
    meta.push("pairs", a.pairs);
    meta.push("seed", a.seed);
    meta.push("tol", a.tol);
    meta.push("max_defect", worst);
    emit(
        &a.output,
        "jarzynski",
        || {
            let mut t = Table::new(meta.clone(), &["pair", "lhs", "rhs", "defect"]);
            for (k, r) in reports.iter().enumerate() {
                t.push_row(vec![k as f64, r.lhs, r.rhs, r.defect()]);
            }
            t.to_csv_string()
        },
        || json!({"metadata": metadata_json(&meta), "reports": reports, "max_defect": worst}),
    )?;
    let passed = worst <= a.tol;
    eprintln!(
        "jarzynski: max defect {worst:.3e} over {} pairs ({})",
        a.pairs,
        if passed { "pass" } else { "FAIL" }
    );
    Ok(if passed {
        Status::Success
    } else {
        Status::VerificationFailed
    })
}

fn verify(a: VerifyArgs) -> Result<Status> {
    let live = a.output.format == Format::Csv && destination(&a.output, "verify").is_none();
    let mut outcomes = Vec::with_capacity(CRITERIA.len());
    for c in &CRITERIA {
        let o = c.run(a.quick);
        if live {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{o}")
                .and_then(|_| stdout.flush())
                .map_err(|source| crate::output::IoFailure {
                    target: "stdout".into(),
                    source,
                })?;
        }
        outcomes.push(o);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if !live {
        emit(
            &a.output,
            "verify",
            || outcomes.iter().map(|o| format!("{o}\n")).collect(),
            || json!({"quick": a.quick, "failed": failed, "criteria": outcomes}),
        )?;
    }
    eprintln!(
        "{} of {} criteria passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    Ok(if failed > 0 {
        Status::VerificationFailed
    } else {
        Status::Success
    })
}
