//! Two-point-measurement work statistics for a fixed pair of Hamiltonians.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::io::{self, Metadata};

/// Work values closer than `MERGE_TOL · max(1, energy scale)` are merged.
pub const MERGE_TOL: f64 = 1e-9;

/// Points whose probability falls below this are dropped from a pmf.
pub const PMF_FLOOR: f64 = 1e-15;

/// `T[(m, n)] = |⟨ψᶠ_m, ψⁱ_n⟩|²`: probability of ending in final level `m`
/// after starting in initial level `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.data[m * self.dim + n]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|m| (0..self.dim).map(|n| self.get(m, n)).sum())
            .collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|n| (0..self.dim).map(|m| self.get(m, n)).sum())
            .collect()
    }

    /// Largest deviation of any row or column sum from one.
    pub fn stochasticity_defect(&self) -> f64 {
        self.row_sums()
            .into_iter()
            .chain(self.column_sums())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn check_dims(a: &Spectrum, b: &Spectrum) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.dim())
}

pub fn transition_matrix(initial: &Spectrum, fin: &Spectrum) -> Result<TransitionMatrix> {
    let n = check_dims(initial, fin)?;
    let (ui, uf) = (&initial.eigenvectors, &fin.eigenvectors);
    let mut data = Vec::with_capacity(n * n);
    for m in 0..n {
        for k in 0..n {
            let overlap: num_complex::Complex64 =
                (0..n).map(|r| uf[(r, m)].conj() * ui[(r, k)]).sum();
            data.push(overlap.norm_sqr());
        }
    }
    Ok(TransitionMatrix { dim: n, data })
}

/// Canonical populations of the initial levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalWeights {
    pub beta: f64,
    pub weights: Vec<f64>,
}

/// `ln Σ_k exp(−β e_k)`, evaluated with the minimum energy factored out.
pub fn log_partition(energies: &[f64], beta: f64) -> f64 {
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let tail: f64 = energies.iter().map(|e| (-beta * (e - e_min)).exp()).sum();
    -beta * e_min + tail.ln()
}

pub fn boltzmann_weights(energies: &[f64], beta: f64) -> Result<ThermalWeights> {
    if energies.is_empty() {
        return Err(Error::invalid("energies", "must not be empty"));
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("energies", "must be finite"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(
            "beta",
            format!("must be finite and >= 0, got {beta}"),
        ));
    }
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = energies
        .iter()
        .map(|e| (-beta * (e - e_min)).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    Ok(ThermalWeights {
        beta,
        weights: raw.into_iter().map(|w| w / z).collect(),
    })
}

/// `F = −β⁻¹ ln Σ_k exp(−β e_k)`. Rejects `β = 0`, where `F` diverges.
pub fn free_energy(energies: &[f64], beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(
            "beta",
            format!("free energy needs finite beta > 0, got {beta}"),
        ));
    }
    if energies.is_empty() || energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("energies", "must be non-empty and finite"));
    }
    Ok(-log_partition(energies, beta) / beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkPoint {
    pub w: f64,
    pub p: f64,
}

/// A work distribution with finite support, ascending in `w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteWorkDist {
    pub points: Vec<WorkPoint>,
}

impl DiscreteWorkDist {
    /// Sorts, merges near-coincident work values (mass-weighted position),
    /// drops negligible points and normalizes.
    pub fn from_points(mut raw: Vec<WorkPoint>, merge_tol: f64) -> Result<Self> {
        raw.retain(|pt| pt.p > 0.0);
        if raw.is_empty() {
            return Err(Error::invalid("points", "no positive mass"));
        }
        raw.sort_by(|a, b| a.w.total_cmp(&b.w));
        let mut merged: Vec<(f64, f64, f64)> = Vec::new(); // (anchor w, Σ p·w, Σ p)
        for pt in raw {
            match merged.last_mut() {
                Some((anchor, pw, p)) if pt.w - *anchor < merge_tol => {
                    *pw += pt.p * pt.w;
                    *p += pt.p;
                }
                _ => merged.push((pt.w, pt.p * pt.w, pt.p)),
            }
        }
        let total: f64 = merged.iter().map(|m| m.2).sum();
        let points = merged
            .into_iter()
            .map(|(_, pw, p)| WorkPoint {
                w: pw / p,
                p: p / total,
            })
            .filter(|pt| pt.p >= PMF_FLOOR)
            .collect::<Vec<_>>();
        let total: f64 = points.iter().map(|pt| pt.p).sum();
        Ok(DiscreteWorkDist {
            points: points
                .into_iter()
                .map(|pt| WorkPoint {
                    w: pt.w,
                    p: pt.p / total,
                })
                .collect(),
        })
    }

    pub fn total(&self) -> f64 {
        self.points.iter().map(|pt| pt.p).sum()
    }

    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(|pt| pt.p * f(pt.w)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|w| w)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, metadata: &Metadata) -> Result<()> {
        metadata.write_to(out)?;
        writeln!(out, "w,p")?;
        for pt in &self.points {
            io::write_row(out, &[pt.w, pt.p])?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<(Self, Metadata)> {
        let table = io::read_table(input)?;
        table.expect_header(&["w", "p"])?;
        let points = table
            .rows
            .iter()
            .map(|r| WorkPoint { w: r[0], p: r[1] })
            .collect();
        Ok((DiscreteWorkDist { points }, table.metadata))
    }
}

fn energy_scale(a: &Spectrum, b: &Spectrum) -> f64 {
    a.eigenvalues
        .iter()
        .chain(&b.eigenvalues)
        .map(|e| e.abs())
        .fold(1.0, f64::max)
}

/// `p(w) = Σ_{m,n} δ(w − eᶠ_m + eⁱ_n) p(m|n) pⁱ(n)` with canonical `pⁱ` at
/// inverse temperature `beta` (`β = 0` allowed).
pub fn work_pmf(initial: &Spectrum, fin: &Spectrum, beta: f64) -> Result<DiscreteWorkDist> {
    let n = check_dims(initial, fin)?;
    let t = transition_matrix(initial, fin)?;
    let pi = boltzmann_weights(&initial.eigenvalues, beta)?;
    let mut raw = Vec::with_capacity(n * n);
    for m in 0..n {
        for k in 0..n {
            raw.push(WorkPoint {
                w: fin.eigenvalues[m] - initial.eigenvalues[k],
                p: t.get(m, k) * pi.weights[k],
            });
        }
    }
    DiscreteWorkDist::from_points(raw, MERGE_TOL * energy_scale(initial, fin))
}

/// Both sides of `⟨e^{−βw}⟩ = e^{−βΔF}`, also as logarithms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JarzynskiReport {
    pub lhs: f64,
    pub rhs: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
}

impl JarzynskiReport {
    /// `|lhs/rhs − 1|`.
    pub fn defect(&self) -> f64 {
        (self.log_lhs - self.log_rhs).exp_m1().abs()
    }
}

/// Evaluates `⟨e^{−βw}⟩` over the two-point-measurement work distribution
/// and `e^{−β(Fᶠ − Fⁱ)}`. The left side is summed over every `(m, n)` pair
/// in log space.
pub fn jarzynski_check(initial: &Spectrum, fin: &Spectrum, beta: f64) -> Result<JarzynskiReport> {
    let n = check_dims(initial, fin)?;
    let f_i = free_energy(&initial.eigenvalues, beta)?;
    let f_f = free_energy(&fin.eigenvalues, beta)?;
    let t = transition_matrix(initial, fin)?;
    let log_z_i = log_partition(&initial.eigenvalues, beta);
    // ln[p(m|n) pⁱ(n) e^{−β(eᶠ_m − eⁱ_n)}] = ln p(m|n) − β eᶠ_m − ln Zⁱ
    let terms: Vec<f64> = (0..n)
        .flat_map(|m| (0..n).map(move |k| (m, k)))
        .filter(|&(m, k)| t.get(m, k) > 0.0)
        .map(|(m, k)| t.get(m, k).ln() - beta * fin.eigenvalues[m] - log_z_i)
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_lhs = top + terms.iter().map(|x| (x - top).exp()).sum::<f64>().ln();
    let log_rhs = -beta * (f_f - f_i);
    Ok(JarzynskiReport {
        lhs: log_lhs.exp(),
        rhs: log_rhs.exp(),
        log_lhs,
        log_rhs,
    })
}

/// `⟨w⟩ = Σ_m eᶠ_m (T pⁱ)_m − Σ_n eⁱ_n pⁱ(n)`, computed from the transition
/// matrix without forming the work distribution.
pub fn mean_work(initial: &Spectrum, fin: &Spectrum, beta: f64) -> Result<f64> {
    let n = check_dims(initial, fin)?;
    let t = transition_matrix(initial, fin)?;
    let pi = boltzmann_weights(&initial.eigenvalues, beta)?;
    let final_energy: f64 = (0..n)
        .map(|m| fin.eigenvalues[m] * (0..n).map(|k| t.get(m, k) * pi.weights[k]).sum::<f64>())
        .sum();
    let initial_energy: f64 = (0..n).map(|k| initial.eigenvalues[k] * pi.weights[k]).sum();
    Ok(final_energy - initial_energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eigendecompose;
    use crate::parallel::stream_rng;
    use crate::rmt::{sample_gue, GueParams, HermitianMatrix};
    use proptest::prelude::*;

    fn spectrum(h: &HermitianMatrix) -> Spectrum {
        eigendecompose(h).unwrap()
    }

    fn sz(scale: f64) -> Spectrum {
        spectrum(&HermitianMatrix::two_level(0.0, [0.0, 0.0, scale]))
    }

    fn sx(scale: f64) -> Spectrum {
        spectrum(&HermitianMatrix::two_level(0.0, [scale, 0.0, 0.0]))
    }

    fn random_pair(seed: u64, n: usize) -> (Spectrum, Spectrum) {
        let p = GueParams::new(n, 0.0, 1.0).unwrap();
        let mut rng = stream_rng(seed, 0);
        (
            spectrum(&sample_gue(&p, &mut rng)),
            spectrum(&sample_gue(&p, &mut rng)),
        )
    }

    #[test]
    fn identical_spectra_give_identity_transitions() {
        let (a, _) = random_pair(1, 4);
        let t = transition_matrix(&a, &a).unwrap();
        for m in 0..4 {
            for n in 0..4 {
                let expected = if m == n { 1.0 } else { 0.0 };
                assert!((t.get(m, n) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sigma_z_to_sigma_x_all_half() {
        let t = transition_matrix(&sz(1.0), &sx(1.0)).unwrap();
        for m in 0..2 {
            for n in 0..2 {
                assert!((t.get(m, n) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (a, _) = random_pair(2, 3);
        let (b, _) = random_pair(2, 4);
        assert!(matches!(
            transition_matrix(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(work_pmf(&a, &b, 1.0).is_err());
    }

    #[test]
    fn boltzmann_examples() {
        let w = boltzmann_weights(&[0.3, -2.0, 5.0], 0.0).unwrap();
        assert!(w.weights.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));

        let w = boltzmann_weights(&[-0.5, 0.5], 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((w.weights[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((w.weights[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((w.weights[0] - 0.731_059).abs() < 1e-6);

        let w = boltzmann_weights(&[0.1, -0.2, 0.3], 1e6).unwrap();
        assert!((w.weights[1] - 1.0).abs() < 1e-15);
        assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_rejects_bad_input() {
        assert!(boltzmann_weights(&[], 1.0).is_err());
        assert!(boltzmann_weights(&[f64::NAN], 1.0).is_err());
        assert!(boltzmann_weights(&[0.0], -1.0).is_err());
    }

    #[test]
    fn free_energy_examples() {
        assert!((free_energy(&[1.7], 2.0).unwrap() - 1.7).abs() < 1e-15);
        let beta = 0.8;
        let f = free_energy(&[0.4; 5], beta).unwrap();
        assert!((f - (0.4 - 5f64.ln() / beta)).abs() < 1e-14);
        let eps = 1.3;
        let f = free_energy(&[-eps / 2.0, eps / 2.0], beta).unwrap();
        let expected = -(2.0 * (beta * eps / 2.0).cosh()).ln() / beta;
        assert!((f - expected).abs() < 1e-14);
        assert!(free_energy(&[0.0, 1.0], 0.0).is_err());
        // overflow safety
        assert!(free_energy(&[-1e3, -999.0], 10.0).unwrap().is_finite());
    }

    #[test]
    fn pmf_of_identical_spectra_is_delta_at_zero() {
        let (a, _) = random_pair(3, 5);
        let d = work_pmf(&a, &a, 0.7).unwrap();
        assert_eq!(d.points.len(), 1);
        assert!(d.points[0].w.abs() < 1e-12);
        assert!((d.points[0].p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_two_level_sigma_z_to_sigma_x() {
        let eps = 1.5;
        let beta = 0.9;
        let d = work_pmf(&sz(eps / 2.0), &sx(eps / 2.0), beta).unwrap();
        let ws: Vec<f64> = d.points.iter().map(|p| p.w).collect();
        assert_eq!(ws.len(), 3);
        assert!((ws[0] + eps).abs() < 1e-14 && ws[1].abs() < 1e-14 && (ws[2] - eps).abs() < 1e-14);
        let ground = 1.0 / (1.0 + (-beta * eps).exp());
        assert!((d.points[1].p - 0.5).abs() < 1e-14);
        assert!((d.points[2].p - ground / 2.0).abs() < 1e-14);
        assert!((d.points[0].p - (1.0 - ground) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn jarzynski_trivial_cases() {
        let (a, _) = random_pair(4, 3);
        let r = jarzynski_check(&a, &a, 1.3).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 1.0).abs() < 1e-12);
        let r = jarzynski_check(&sz(1.0), &sx(1.0), 1.0).unwrap();
        assert!(r.defect() < 1e-12);
        assert!(jarzynski_check(&a, &a, 0.0).is_err());
    }

    #[test]
    fn jarzynski_survives_large_beta() {
        let (a, b) = random_pair(5, 8);
        let r = jarzynski_check(&a, &b, 100.0).unwrap();
        assert!(r.defect() < 1e-10, "{}", r.defect());
    }

    #[test]
    fn csv_round_trip() {
        let (a, b) = random_pair(6, 3);
        let d = work_pmf(&a, &b, 1.0).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf, &Metadata::new().with("beta", 1.0))
            .unwrap();
        let (back, meta) = DiscreteWorkDist::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
        let mut again = Vec::new();
        back.write_csv(&mut again, &meta).unwrap();
        assert_eq!(again, buf);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<DiscreteWorkDist>(&json).unwrap(), d);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn pair_invariants(seed in any::<u64>(), n in 2usize..=8, log_beta in -3.0f64..2.0) {
            let beta = 10f64.powf(log_beta);
            let (a, b) = random_pair(seed, n);
            let t = transition_matrix(&a, &b).unwrap();
            prop_assert!(t.stochasticity_defect() < 1e-10);
            let d = work_pmf(&a, &b, beta).unwrap();
            prop_assert!((d.total() - 1.0).abs() < 1e-12);
            prop_assert!(d.points.windows(2).all(|w| w[0].w < w[1].w));
            let direct = mean_work(&a, &b, beta).unwrap();
            prop_assert!((d.mean() - direct).abs() < 1e-9);
            let r = jarzynski_check(&a, &b, beta).unwrap();
            prop_assert!(r.defect() < 1e-10, "defect {}", r.defect());
        }
    }
}
