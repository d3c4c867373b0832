//! Sampling estimators for averaged work densities.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::eigen::eigendecompose;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, Metadata};
use crate::numerics::Cdf;
use crate::parallel::{SamplingPlan, StreamRng};
use crate::rmt::{sample_gue, GueParams, HermitianMatrix, LevelSampler};
use crate::work::{boltzmann_weights, log_partition, transition_matrix};

pub const DEFAULT_BINS: usize = 201;

/// Uniform bins on `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl BinSpec {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("bins", "must be >= 1"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(
                "bins",
                format!("need finite lo < hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(BinSpec { lo, hi, bins })
    }

    /// [`DEFAULT_BINS`] bins over `μ_f − μ_i ± 6·max(σ_i, σ_f)·√N`.
    pub fn default_for(params_i: &GueParams, params_f: &GueParams) -> Self {
        let half = 6.0 * params_i.sigma().max(params_f.sigma()) * (params_f.dim() as f64).sqrt();
        let c = params_f.mu() - params_i.mu();
        BinSpec {
            lo: c - half,
            hi: c + half,
            bins: DEFAULT_BINS,
        }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        let h = self.width();
        (0..=self.bins)
            .map(|k| {
                if k == self.bins {
                    self.hi
                } else {
                    self.lo + k as f64 * h
                }
            })
            .collect()
    }

    fn index(&self, w: f64) -> Option<usize> {
        if !(w >= self.lo && w < self.hi) {
            return None;
        }
        Some((((w - self.lo) / self.width()) as usize).min(self.bins - 1))
    }
}

/// Weighted counts in uniform bins, with out-of-range mass tracked
/// separately so densities stay normalized against all samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<f64>,
    /// `Σ counts`.
    pub total_weight: f64,
    pub underflow: f64,
    pub overflow: f64,
}

impl Histogram {
    pub fn new(spec: &BinSpec) -> Self {
        Histogram {
            edges: spec.edges(),
            counts: vec![0.0; spec.bins],
            total_weight: 0.0,
            underflow: 0.0,
            overflow: 0.0,
        }
    }

    fn spec(&self) -> BinSpec {
        BinSpec {
            lo: self.edges[0],
            hi: self.edges[self.edges.len() - 1],
            bins: self.counts.len(),
        }
    }

    pub fn add(&mut self, w: f64) {
        let spec = self.spec();
        match spec.index(w) {
            Some(k) => {
                self.counts[k] += 1.0;
                self.total_weight += 1.0;
            }
            None if w < spec.lo => self.underflow += 1.0,
            None => self.overflow += 1.0,
        }
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::invalid(
                "histogram",
                "cannot merge histograms with different edges",
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_weight += other.total_weight;
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }

    /// All recorded samples, in range or not.
    pub fn samples(&self) -> f64 {
        self.total_weight + self.underflow + self.overflow
    }

    pub fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn density(&self) -> Vec<f64> {
        let n = self.samples();
        (0..self.counts.len())
            .map(|k| self.counts[k] / (n * self.width(k)))
            .collect()
    }

    /// Binomial standard error of each bin's density.
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.samples();
        (0..self.counts.len())
            .map(|k| {
                let p = self.counts[k] / n;
                (p * (1.0 - p) / n).sqrt() / self.width(k)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, metadata: &Metadata) -> Result<()> {
        metadata.write_to(out)?;
        writeln!(out, "w_left,w_right,density,stderr")?;
        let (d, s) = (self.density(), self.stderr());
        for k in 0..self.counts.len() {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(self.edges[k]),
                fmt_f64(self.edges[k + 1]),
                fmt_f64(d[k]),
                fmt_f64(s[k])
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, metadata: &Metadata) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, metadata)
            .expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

impl Cdf for Histogram {
    fn knots(&self) -> Vec<f64> {
        self.edges.clone()
    }

    fn cdf_at(&self, xs: &[f64]) -> Vec<f64> {
        EdgeCdf::from_histogram(self).cdf_at(xs)
    }
}

/// A CDF known at bin edges and linear in between.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCdf {
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl EdgeCdf {
    pub fn from_histogram(h: &Histogram) -> Self {
        let n = h.samples();
        let mut acc = h.underflow;
        let mut values = Vec::with_capacity(h.edges.len());
        values.push(acc / n);
        for c in &h.counts {
            acc += c;
            values.push(acc / n);
        }
        EdgeCdf {
            edges: h.edges.clone(),
            values,
        }
    }
}

impl Cdf for EdgeCdf {
    fn knots(&self) -> Vec<f64> {
        self.edges.clone()
    }

    fn cdf_at(&self, xs: &[f64]) -> Vec<f64> {
        let n = self.edges.len();
        xs.iter()
            .map(|&x| {
                if x <= self.edges[0] {
                    return if x < self.edges[0] {
                        0.0
                    } else {
                        self.values[0]
                    };
                }
                if x >= self.edges[n - 1] {
                    return 1.0;
                }
                let k = self.edges.partition_point(|e| *e <= x) - 1;
                let t = (x - self.edges[k]) / (self.edges[k + 1] - self.edges[k]);
                self.values[k] + t * (self.values[k + 1] - self.values[k])
            })
            .collect()
    }
}

/// How the final level is chosen once the initial one is fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionModel {
    /// Uniformly over the final spectrum; needs eigenvalues only.
    #[default]
    UniformFinal,
    /// From the overlaps `|⟨ψᶠ_m, ψⁱ_n⟩|²`; needs full diagonalization.
    ExactTransitions,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub plan: SamplingPlan,
    pub bins: BinSpec,
    pub model: TransitionModel,
    pub sampler: LevelSampler,
}

impl McConfig {
    pub fn new(plan: SamplingPlan, bins: BinSpec) -> Self {
        McConfig {
            plan,
            bins,
            model: TransitionModel::default(),
            sampler: LevelSampler::default(),
        }
    }

    pub fn with_model(mut self, model: TransitionModel) -> Self {
        self.model = model;
        self
    }

    pub fn with_sampler(mut self, sampler: LevelSampler) -> Self {
        self.sampler = sampler;
        self
    }
}

/// One sampled work value with the free-energy factor `Z_f / Z_i` of the
/// spectra it was drawn from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkEvent {
    pub w: f64,
    pub partition_ratio: f64,
}

fn pick<R: Rng + ?Sized>(probabilities: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, p) in probabilities.enumerate() {
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

fn partition_ratio(e_i: &[f64], e_f: &[f64], beta: f64) -> f64 {
    (log_partition(e_f, beta) - log_partition(e_i, beta)).exp()
}

fn event_from_spectra<R: Rng + ?Sized>(
    e_i: &[f64],
    e_f: &[f64],
    beta: f64,
    rng: &mut R,
) -> Result<WorkEvent> {
    let thermal = boltzmann_weights(e_i, beta)?;
    let n = pick(thermal.weights.iter().copied(), rng);
    let m = rng.random_range(0..e_f.len());
    Ok(WorkEvent {
        w: e_f[m] - e_i[n],
        partition_ratio: partition_ratio(e_i, e_f, beta),
    })
}

fn event_from_matrices<R: Rng + ?Sized>(
    h_i: &HermitianMatrix,
    h_f: &HermitianMatrix,
    beta: f64,
    rng: &mut R,
) -> Result<WorkEvent> {
    let initial = eigendecompose(h_i)?;
    let fin = eigendecompose(h_f)?;
    let t = transition_matrix(&initial, &fin)?;
    let thermal = boltzmann_weights(&initial.eigenvalues, beta)?;
    let n = pick(thermal.weights.iter().copied(), rng);
    let m = pick((0..t.dim()).map(|m| t.get(m, n)), rng);
    Ok(WorkEvent {
        w: fin.eigenvalues[m] - initial.eigenvalues[n],
        partition_ratio: partition_ratio(&initial.eigenvalues, &fin.eigenvalues, beta),
    })
}

/// Draws both Hamiltonians, a thermally distributed initial level and a
/// final level according to `model`.
pub fn sample_work_event<R: Rng + ?Sized>(
    params_i: &GueParams,
    params_f: &GueParams,
    beta: f64,
    model: TransitionModel,
    sampler: LevelSampler,
    rng: &mut R,
) -> Result<WorkEvent> {
    if params_i.dim() != params_f.dim() {
        return Err(Error::DimensionMismatch {
            expected: params_i.dim(),
            found: params_f.dim(),
        });
    }
    match model {
        TransitionModel::UniformFinal => {
            let e_i = sampler.sample(params_i, rng)?;
            let e_f = sampler.sample(params_f, rng)?;
            event_from_spectra(&e_i, &e_f, beta, rng)
        }
        TransitionModel::ExactTransitions => {
            let h_i = sample_gue(params_i, rng);
            let h_f = sample_gue(params_f, rng);
            event_from_matrices(&h_i, &h_f, beta, rng)
        }
    }
}

/// One work value from a pair of GUE draws, final level chosen uniformly.
pub fn sample_work_pair<R: Rng + ?Sized>(
    params_i: &GueParams,
    params_f: &GueParams,
    beta: f64,
    rng: &mut R,
) -> Result<f64> {
    sample_work_event(
        params_i,
        params_f,
        beta,
        TransitionModel::UniformFinal,
        LevelSampler::Direct,
        rng,
    )
    .map(|e| e.w)
}

#[derive(Clone, Debug)]
struct Tally {
    histogram: Histogram,
    n: f64,
    sum_w: f64,
    sum_w2: f64,
    sum_w4: f64,
    sum_exp: f64,
    sum_ratio: f64,
    sum_diff: f64,
    sum_diff2: f64,
}

impl Tally {
    fn new(bins: &BinSpec) -> Self {
        Tally {
            histogram: Histogram::new(bins),
            n: 0.0,
            sum_w: 0.0,
            sum_w2: 0.0,
            sum_w4: 0.0,
            sum_exp: 0.0,
            sum_ratio: 0.0,
            sum_diff: 0.0,
            sum_diff2: 0.0,
        }
    }

    fn add(&mut self, e: WorkEvent, beta: f64) {
        self.histogram.add(e.w);
        let w2 = e.w * e.w;
        self.n += 1.0;
        self.sum_w += e.w;
        self.sum_w2 += w2;
        self.sum_w4 += w2 * w2;
        let x = (-beta * e.w).exp();
        self.sum_exp += x;
        self.sum_ratio += e.partition_ratio;
        let d = x - e.partition_ratio;
        self.sum_diff += d;
        self.sum_diff2 += d * d;
    }

    fn merge(&mut self, o: &Tally) -> Result<()> {
        self.histogram.merge(&o.histogram)?;
        self.n += o.n;
        self.sum_w += o.sum_w;
        self.sum_w2 += o.sum_w2;
        self.sum_w4 += o.sum_w4;
        self.sum_exp += o.sum_exp;
        self.sum_ratio += o.sum_ratio;
        self.sum_diff += o.sum_diff;
        self.sum_diff2 += o.sum_diff2;
        Ok(())
    }
}

fn stderr_of(sum: f64, sum_sq: f64, n: f64) -> f64 {
    let mean = sum / n;
    ((sum_sq / n - mean * mean).max(0.0) / (n - 1.0).max(1.0)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub mean: f64,
    pub mean_stderr: f64,
    pub second: f64,
    pub second_stderr: f64,
}

/// Sample averages of `e^{−βw}` and of `Z_f/Z_i`, and of their per-pair
/// difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JarzynskiSample {
    pub mean_exp_work: f64,
    pub mean_partition_ratio: f64,
    pub difference: f64,
    pub difference_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkPdfEstimate {
    pub config: McConfig,
    pub beta: f64,
    pub histogram: Histogram,
    pub moments: SampleMoments,
    pub jarzynski: JarzynskiSample,
}

fn run_tallies<F>(cfg: &McConfig, beta: f64, draw: F) -> Result<WorkPdfEstimate>
where
    F: Fn(&mut StreamRng) -> Result<WorkEvent> + Sync + Send,
{
    let partials = cfg.plan.run(|rng, n| -> Result<Tally> {
        let mut t = Tally::new(&cfg.bins);
        for _ in 0..n {
            t.add(draw(rng)?, beta);
        }
        Ok(t)
    });
    let mut total = Tally::new(&cfg.bins);
    for p in partials {
        total.merge(&p?)?;
    }
    let n = total.n;
    Ok(WorkPdfEstimate {
        config: *cfg,
        beta,
        moments: SampleMoments {
            mean: total.sum_w / n,
            mean_stderr: stderr_of(total.sum_w, total.sum_w2, n),
            second: total.sum_w2 / n,
            second_stderr: stderr_of(total.sum_w2, total.sum_w4, n),
        },
        jarzynski: JarzynskiSample {
            mean_exp_work: total.sum_exp / n,
            mean_partition_ratio: total.sum_ratio / n,
            difference: total.sum_diff / n,
            difference_stderr: stderr_of(total.sum_diff, total.sum_diff2, n),
        },
        histogram: total.histogram,
    })
}

/// Histogram estimate of the work density for a quench between two GUEs.
pub fn estimate_work_pdf(
    params_i: &GueParams,
    params_f: &GueParams,
    beta: f64,
    cfg: &McConfig,
) -> Result<WorkPdfEstimate> {
    check_beta(beta)?;
    if params_i.dim() != params_f.dim() {
        return Err(Error::DimensionMismatch {
            expected: params_i.dim(),
            found: params_f.dim(),
        });
    }
    run_tallies(cfg, beta, |rng| {
        sample_work_event(params_i, params_f, beta, cfg.model, cfg.sampler, rng)
    })
}

/// Histogram estimate of the work density for a quench from a fixed
/// diagonal Hamiltonian with levels `e_i` into a GUE.
pub fn estimate_det_to_random_pdf(
    e_i: &[f64],
    beta: f64,
    params_f: &GueParams,
    cfg: &McConfig,
) -> Result<WorkPdfEstimate> {
    check_beta(beta)?;
    if e_i.len() != params_f.dim() {
        return Err(Error::DimensionMismatch {
            expected: params_f.dim(),
            found: e_i.len(),
        });
    }
    let h_i = HermitianMatrix::diagonal(e_i)?;
    run_tallies(cfg, beta, |rng| match cfg.model {
        TransitionModel::UniformFinal => {
            let e_f = cfg.sampler.sample(params_f, rng)?;
            event_from_spectra(e_i, &e_f, beta, rng)
        }
        TransitionModel::ExactTransitions => {
            event_from_matrices(&h_i, &sample_gue(params_f, rng), beta, rng)
        }
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(
            "beta",
            format!("must be finite and >= 0, got {beta}"),
        ));
    }
    Ok(())
}

/// Agreement between a histogram and reference bin probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinComparison {
    pub bins: usize,
    /// Fraction of bins whose density lies within 3 standard errors.
    pub fraction_within_3se: f64,
    pub max_deviation_se: f64,
    pub mean_stderr: f64,
    pub ks: f64,
}

/// Compares `h` with a reference distribution given through
/// `probability(a, b)`, the reference mass on `[a, b]`. Standard errors are
/// binomial in the reference bin probability.
pub fn compare_with_reference<P>(h: &Histogram, mut probability: P) -> Result<BinComparison>
where
    P: FnMut(f64, f64) -> Result<f64>,
{
    let n = h.samples();
    let bins = h.counts.len();
    let lo = h.edges[0];
    let span = h.edges[bins] - lo;
    let mut cdf = Vec::with_capacity(bins + 1);
    let mut acc = probability(lo - 10.0 * span, lo)?;
    cdf.push(acc);
    let (mut within, mut max_dev, mut se_sum) = (0usize, 0.0f64, 0.0);
    for k in 0..bins {
        let p = probability(h.edges[k], h.edges[k + 1])?.max(0.0);
        acc += p;
        cdf.push(acc);
        let se = (p * (1.0 - p) / n).sqrt();
        se_sum += se / h.width(k);
        let dev = if se > 0.0 {
            (h.counts[k] / n - p).abs() / se
        } else if h.counts[k] == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if dev <= 3.0 {
            within += 1;
        }
        max_dev = max_dev.max(dev);
    }
    let reference = EdgeCdf {
        edges: h.edges.clone(),
        values: cdf.into_iter().map(|c| c.clamp(0.0, 1.0)).collect(),
    };
    Ok(BinComparison {
        bins,
        fraction_within_3se: within as f64 / bins as f64,
        max_deviation_se: max_dev,
        mean_stderr: se_sum / bins as f64,
        ks: crate::numerics::ks_distance(&EdgeCdf::from_histogram(h), &reference),
    })
}

/// Serializable summary of a Monte Carlo run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub samples: u64,
    pub seed: u64,
    pub streams: usize,
    pub beta: f64,
    pub model: TransitionModel,
    pub moments: SampleMoments,
    pub jarzynski: JarzynskiSample,
    pub out_of_range: f64,
    pub comparison: Option<BinComparison>,
}

impl WorkPdfEstimate {
    pub fn summary(&self, comparison: Option<BinComparison>) -> McSummary {
        McSummary {
            samples: self.config.plan.n_samples,
            seed: self.config.plan.master_seed,
            streams: self.config.plan.n_streams,
            beta: self.beta,
            model: self.config.model,
            moments: self.moments,
            jarzynski: self.jarzynski,
            out_of_range: self.histogram.underflow + self.histogram.overflow,
            comparison,
        }
    }
}
