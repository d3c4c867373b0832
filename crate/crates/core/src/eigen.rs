//! Dense complex matrices and a cyclic Jacobi eigensolver for Hermitian
//! matrices.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::rmt::HermitianMatrix;

const OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.dim).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                m[(c, r)] = self[(r, c)].conj();
            }
        }
        m
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Self {
        let n = self.dim;
        let mut m = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self[(r, k)];
                for c in 0..n {
                    m[(r, c)] += a * other[(k, c)];
                }
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

/// Eigenvalues in ascending order and the unitary whose column `m` is the
/// eigenvector belonging to `eigenvalues[m]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U diag(e) U†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.dim();
        let u = &self.eigenvectors;
        let mut m = ComplexMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = (0..n)
                    .map(|k| u[(r, k)] * self.eigenvalues[k] * u[(c, k)].conj())
                    .sum();
            }
        }
        m
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let u = &self.eigenvectors;
        u.adjoint()
            .matmul(u)
            .max_abs_diff(&ComplexMatrix::identity(self.dim()))
    }
}

struct Jacobi {
    n: usize,
    a: ComplexMatrix,
    v: Option<ComplexMatrix>,
}

impl Jacobi {
    fn max_off_diagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for p in 0..self.n {
            for q in p + 1..self.n {
                m = m.max(self.a[(p, q)].norm());
            }
        }
        m
    }

    /// Annihilates `a[p][q]` with the unitary
    /// `G = diag(1, e^{−iφ}) · [[c, s], [−s, c]]` acting on indices `p, q`,
    /// where `a[p][q] = |a[p][q]| e^{iφ}`.
    fn rotate(&mut self, p: usize, q: usize) {
        let b = self.a[(p, q)];
        let mag = b.norm();
        let phase = b / mag;
        let app = self.a[(p, p)].re;
        let aqq = self.a[(q, q)].re;
        let theta = (aqq - app) / (2.0 * mag);
        let t = if theta.abs() > 1e150 {
            0.5 / theta
        } else {
            let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
            sign / (theta.abs() + (theta * theta + 1.0).sqrt())
        };
        let c = 1.0 / (1.0 + t * t).sqrt();
        let s = t * c;
        let g_qp = -s * phase.conj();
        let g_qq = c * phase.conj();

        let a = &mut self.a;
        for k in 0..self.n {
            let akp = a[(k, p)];
            let akq = a[(k, q)];
            a[(k, p)] = akp * c + akq * g_qp;
            a[(k, q)] = akp * s + akq * g_qq;
        }
        for k in 0..self.n {
            let apk = a[(p, k)];
            let aqk = a[(q, k)];
            a[(p, k)] = apk * c + aqk * g_qp.conj();
            a[(q, k)] = apk * s + aqk * g_qq.conj();
        }
        let zero = Complex64::new(0.0, 0.0);
        a[(p, q)] = zero;
        a[(q, p)] = zero;
        a[(p, p)] = Complex64::new(app - t * mag, 0.0);
        a[(q, q)] = Complex64::new(aqq + t * mag, 0.0);

        if let Some(v) = self.v.as_mut() {
            for k in 0..self.n {
                let vkp = v[(k, p)];
                let vkq = v[(k, q)];
                v[(k, p)] = vkp * c + vkq * g_qp;
                v[(k, q)] = vkp * s + vkq * g_qq;
            }
        }
    }

    fn run(&mut self, scale: f64) -> Result<()> {
        let threshold = OFF_DIAGONAL_TOL * scale;
        for _ in 0..MAX_SWEEPS {
            if self.max_off_diagonal() < threshold {
                return Ok(());
            }
            for p in 0..self.n {
                for q in p + 1..self.n {
                    if self.a[(p, q)].norm() >= threshold {
                        self.rotate(p, q);
                    }
                }
            }
        }
        let off_norm = self.max_off_diagonal();
        if off_norm < threshold {
            Ok(())
        } else {
            Err(Error::EigenNonConvergence {
                sweeps: MAX_SWEEPS,
                off_norm,
            })
        }
    }
}

fn solve(h: &HermitianMatrix, vectors: bool) -> Result<(Vec<f64>, Option<ComplexMatrix>)> {
    let n = h.dim();
    let mut jac = Jacobi {
        n,
        a: h.to_dense(),
        v: vectors.then(|| ComplexMatrix::identity(n)),
    };
    let scale = h.frobenius_norm();
    if scale > 0.0 {
        jac.run(scale)?;
    }
    let raw: Vec<f64> = (0..n).map(|i| jac.a[(i, i)].re).collect();
    // Stable sort: exact ties keep their original index order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]));
    let eigenvalues = order.iter().map(|&i| raw[i]).collect();
    let eigenvectors = jac.v.map(|v| {
        let mut u = ComplexMatrix::zeros(n);
        for (dst, &src) in order.iter().enumerate() {
            let col = v.column(src);
            // Fix the phase so the largest component is real and positive.
            let (lead, _) = col.iter().enumerate().fold((0, -1.0), |(bi, bm), (i, z)| {
                if z.norm() > bm {
                    (i, z.norm())
                } else {
                    (bi, bm)
                }
            });
            let rot = col[lead].conj() / col[lead].norm();
            for r in 0..n {
                u[(r, dst)] = col[r] * rot;
            }
            u[(lead, dst)] = Complex64::new(col[lead].norm(), 0.0);
        }
        u
    });
    Ok((eigenvalues, eigenvectors))
}

/// Full eigendecomposition. Deterministic: fixed sweep order, ascending
/// eigenvalues and a canonical eigenvector phase.
pub fn eigendecompose(h: &HermitianMatrix) -> Result<Spectrum> {
    let (eigenvalues, eigenvectors) = solve(h, true)?;
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: eigenvectors.expect("vectors requested"),
    })
}

/// Ascending eigenvalues only; skips eigenvector accumulation.
pub fn eigenvalues(h: &HermitianMatrix) -> Result<Vec<f64>> {
    Ok(solve(h, false)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::stream_rng;
    use crate::rmt::{sample_gue, GueParams};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diagonal_input_sorted_with_permuted_identity() {
        let h = HermitianMatrix::diagonal(&[2.0, 1.0]).unwrap();
        let s = eigendecompose(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0]);
        assert_eq!(s.eigenvectors[(0, 0)], c(0.0));
        assert_eq!(s.eigenvectors[(1, 0)], c(1.0));
        assert_eq!(s.eigenvectors[(0, 1)], c(1.0));
        assert_eq!(s.eigenvectors[(1, 1)], c(0.0));
    }

    #[test]
    fn pauli_x() {
        let h = HermitianMatrix::two_level(0.0, [1.0, 0.0, 0.0]);
        let s = eigendecompose(&h).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.eigenvectors[(0, 1)] - c(r)).norm() < 1e-15);
        assert!((s.eigenvectors[(1, 1)] - c(r)).norm() < 1e-15);
    }

    #[test]
    fn pauli_y_complex_eigenvectors() {
        let h = HermitianMatrix::two_level(0.0, [0.0, 1.0, 0.0]);
        let s = eigendecompose(&h).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!(s.reconstruct().max_abs_diff(&h.to_dense()) < 1e-15);
    }

    #[test]
    fn zero_matrix() {
        let h = HermitianMatrix::diagonal(&[0.0; 3]).unwrap();
        let s = eigendecompose(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0; 3]);
        assert!(s.unitarity_defect() == 0.0);
    }

    #[test]
    fn ties_keep_index_order() {
        let h = HermitianMatrix::diagonal(&[1.0, 0.0, 1.0]).unwrap();
        let s = eigendecompose(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0, 1.0, 1.0]);
        assert_eq!(s.eigenvectors[(0, 1)], c(1.0));
        assert_eq!(s.eigenvectors[(2, 2)], c(1.0));
    }

    #[test]
    fn large_matrix_round_trip() {
        let p = GueParams::new(128, 0.0, 1.0).unwrap();
        let h = sample_gue(&p, &mut stream_rng(3, 0));
        let s = eigendecompose(&h).unwrap();
        let scale = h.frobenius_norm();
        assert!(s.unitarity_defect() < 1e-10);
        assert!(s.reconstruct().max_abs_diff(&h.to_dense()) < 1e-10 * scale);
    }

    #[test]
    fn values_only_agree_with_full() {
        let p = GueParams::new(9, 1.0, 2.0).unwrap();
        let h = sample_gue(&p, &mut stream_rng(4, 0));
        assert_eq!(
            eigenvalues(&h).unwrap(),
            eigendecompose(&h).unwrap().eigenvalues
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gue_round_trip(seed in any::<u64>(), n in 1usize..=12) {
            let p = GueParams::new(n, 0.5, 1.5).unwrap();
            let h = sample_gue(&p, &mut stream_rng(seed, 0));
            let s = eigendecompose(&h).unwrap();
            prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(s.unitarity_defect() < 1e-10);
            let scale = h.frobenius_norm().max(1.0);
            prop_assert!(s.reconstruct().max_abs_diff(&h.to_dense()) < 1e-10 * scale);
            // canonical phase: the largest component of each column is real positive
            for m in 0..n {
                let col = s.eigenvectors.column(m);
                let lead = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
                prop_assert!(col.iter().any(|z| z.im == 0.0 && z.re > 0.0 && (z.re - lead).abs() < 1e-15));
            }
            prop_assert_eq!(eigendecompose(&h).unwrap(), s);
        }
    }
}
