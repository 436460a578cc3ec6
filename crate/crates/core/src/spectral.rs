//! Spectral summaries of the sample covariance `S_n = (1/n) X X^T`.

use faer::linalg::matmul::triangular::{matmul, BlockStructure};
use faer::{Accum, Mat, MatRef, Par, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::mp::DiscreteLaw;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub p: usize,
    pub n: usize,
    /// `tr(S_n)`.
    pub l1: f64,
    /// `tr(S_n^2)`.
    pub l2: f64,
    /// Per-observation energies `T_i = |r_i|^2`.
    pub energies: Vec<f64>,
    /// Eigenvalues of `S_n`, ascending, length `p`.
    pub eigenvalues: Option<Vec<f64>>,
}

impl SpectralSample {
    pub fn c_n(&self) -> f64 {
        self.p as f64 / self.n as f64
    }
}

fn check_finite(x: MatRef<'_, f64>) -> Result<()> {
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if !x[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// `|r_i|^2` for every column.
pub fn column_energies(x: MatRef<'_, f64>) -> Vec<f64> {
    (0..x.ncols()).map(|j| x.col(j).iter().map(|v| v * v).sum()).collect()
}

/// Lower triangle of the smaller of `X X^T` and `X^T X`.
fn small_gram(x: MatRef<'_, f64>) -> Mat<f64> {
    let (p, n) = (x.nrows(), x.ncols());
    let (lhs, rhs, dim) = if p <= n {
        (x, x.transpose(), p)
    } else {
        (x.transpose(), x, n)
    };
    let mut g = Mat::<f64>::zeros(dim, dim);
    matmul(
        g.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Replace,
        lhs,
        BlockStructure::Rectangular,
        rhs,
        BlockStructure::Rectangular,
        1.0,
        Par::Seq,
    );
    g
}

/// Trace powers, energies and optionally the spectrum of `S_n`.
///
/// `tr(S_n^2)` is the squared Frobenius norm of whichever of `X X^T` and
/// `X^T X` is smaller, scaled by `1/n^2`; `S_n` itself is never formed when
/// `p > n`.
pub fn covariance_stats(x: MatRef<'_, f64>, want_eigen: bool) -> Result<SpectralSample> {
    let (p, n) = (x.nrows(), x.ncols());
    if p == 0 || n == 0 {
        return Err(Error::InvalidArgument("empty data matrix".into()));
    }
    check_finite(x)?;
    let energies = column_energies(x);
    let nf = n as f64;
    let l1 = energies.iter().sum::<f64>() / nf;

    let g = small_gram(x);
    let dim = g.nrows();
    let mut frob = 0.0;
    for j in 0..dim {
        frob += g[(j, j)] * g[(j, j)];
        let mut off = 0.0;
        for i in j + 1..dim {
            off += g[(i, j)] * g[(i, j)];
        }
        frob += 2.0 * off;
    }
    let l2 = frob / (nf * nf);

    let eigenvalues = if want_eigen {
        let evs = g
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Degenerate(format!("symmetric eigensolver failed: {e:?}")))?;
        let mut out = vec![0.0; p - dim];
        out.extend(evs.into_iter().map(|v| (v / nf).max(0.0)));
        out.sort_by(f64::total_cmp);
        Some(out)
    } else {
        None
    };

    Ok(SpectralSample {
        p,
        n,
        l1,
        l2,
        energies,
        eigenvalues,
    })
}

/// `(1/p) sum_j 1/(lambda_j - z)`.
pub fn empirical_stieltjes(eigenvalues: &[f64], z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::InvalidArgument("Stieltjes transform needs Im z != 0".into()));
    }
    if eigenvalues.is_empty() {
        return Err(Error::InvalidArgument("no eigenvalues".into()));
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite eigenvalue".into()));
    }
    let sum: Complex64 = eigenvalues.iter().map(|&l| (l - z).inv()).sum();
    Ok(sum / eigenvalues.len() as f64)
}

/// `(L(x), L(x^2))` where `L(f) = p int f d(F^{S_n} - F^{c_n, H})`.
///
/// Uses the limiting moments `int x dF = int t dH` and
/// `int x^2 dF = int t^2 dH + c_n (int t dH)^2`.
pub fn lss_centered(sample: &SpectralSample, c_n: f64, law: &DiscreteLaw) -> (f64, f64) {
    let p = sample.p as f64;
    let m1 = law.moment(1);
    let m2 = law.moment(2);
    (sample.l1 - p * m1, sample.l2 - p * (m2 + c_n * m1 * m1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mat(p: usize, n: usize, data: &[f64]) -> Mat<f64> {
        Mat::from_fn(p, n, |i, j| data[i * n + j])
    }

    #[test]
    fn scaled_identity_hand_computation() {
        let x = Mat::<f64>::from_fn(2, 2, |i, j| if i == j { 2f64.sqrt() } else { 0.0 });
        let s = covariance_stats(x.as_ref(), true).unwrap();
        assert_relative_eq!(s.l1, 2.0, epsilon = 1e-14);
        assert_relative_eq!(s.l2, 2.0, epsilon = 1e-14);
        assert_relative_eq!(s.energies[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(s.energies[1], 2.0, epsilon = 1e-14);
        let ev = s.eigenvalues.unwrap();
        assert_relative_eq!(ev[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rademacher_trace_is_p() {
        let (p, n) = (13, 7);
        let x = Mat::<f64>::from_fn(p, n, |i, j| if (i * 31 + j * 17) % 3 == 0 { 1.0 } else { -1.0 });
        let s = covariance_stats(x.as_ref(), false).unwrap();
        assert_eq!(s.l1, p as f64);
    }

    #[test]
    fn rejects_non_finite() {
        let mut x = Mat::<f64>::zeros(3, 3);
        x[(1, 2)] = f64::NAN;
        assert!(matches!(
            covariance_stats(x.as_ref(), false),
            Err(Error::NonFinite { row: 1, col: 2 })
        ));
    }

    #[test]
    fn wide_and_tall_inputs_pad_zero_eigenvalues() {
        let x = mat(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.0]);
        let s = covariance_stats(x.as_ref(), true).unwrap();
        let ev = s.eigenvalues.as_ref().unwrap();
        assert_eq!(ev.len(), 3);
        assert_eq!(ev[0], 0.0);
        assert_relative_eq!(ev.iter().sum::<f64>(), s.l1, max_relative = 1e-12);
        assert_relative_eq!(ev.iter().map(|l| l * l).sum::<f64>(), s.l2, max_relative = 1e-12);
    }

    #[test]
    fn stieltjes_atoms() {
        let one = empirical_stieltjes(&[2.0], Complex64::i()).unwrap();
        assert_relative_eq!(one.re, 0.4, epsilon = 1e-15);
        assert_relative_eq!(one.im, 0.2, epsilon = 1e-15);
        let two = empirical_stieltjes(&[0.0, 2.0], Complex64::i()).unwrap();
        assert_relative_eq!(two.re, 0.2, epsilon = 1e-15);
        assert_relative_eq!(two.im, 0.6, epsilon = 1e-15);
        assert!(empirical_stieltjes(&[1.0], Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn centering_examples() {
        let sample = SpectralSample {
            p: 10,
            n: 20,
            l1: 10.0,
            l2: 17.0,
            energies: vec![],
            eigenvalues: None,
        };
        let (a, b) = lss_centered(&sample, 0.5, &DiscreteLaw::point_mass(1.0));
        assert_eq!(a, 0.0);
        assert_eq!(b, 17.0 - 15.0);

        let law = DiscreteLaw::new(vec![(2.0, 0.2), (1.0, 0.8)]).unwrap();
        let sample = SpectralSample {
            l1: 12.0,
            l2: 23.2,
            ..sample
        };
        let (a, b) = lss_centered(&sample, 0.5, &law);
        assert_relative_eq!(a, 0.0, epsilon = 1e-12);
        assert_relative_eq!(b, 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn gram_path_matches_eigen_path(
            p in 1usize..30,
            n in 1usize..30,
            seed in any::<u64>(),
        ) {
            let mut state = seed;
            let x = Mat::<f64>::from_fn(p, n, |_, _| {
                state = crate::models::splitmix64(state);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            });
            let s = covariance_stats(x.as_ref(), true).unwrap();
            let ev = s.eigenvalues.as_ref().unwrap();
            prop_assert_eq!(ev.len(), p);
            prop_assert!(ev.iter().all(|&l| l >= -1e-10));
            prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
            let tr: f64 = ev.iter().sum();
            let tr2: f64 = ev.iter().map(|l| l * l).sum();
            prop_assert!((tr - s.l1).abs() <= 1e-8 * s.l1.abs().max(1e-300));
            prop_assert!((tr2 - s.l2).abs() <= 1e-8 * s.l2.abs().max(1e-300));
            let mean_energy = s.energies.iter().sum::<f64>() / n as f64;
            prop_assert!((mean_energy - s.l1).abs() <= 1e-10 * s.l1.abs().max(1e-300));
        }

        #[test]
        fn scale_equivariance(seed in any::<u64>(), k in -3i32..3) {
            // Powers of two keep the scaling exact in floating point.
            let sigma = 2f64.powi(k);
            let mut state = seed;
            let x = Mat::<f64>::from_fn(6, 9, |_, _| {
                state = crate::models::splitmix64(state);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            });
            let y = Mat::<f64>::from_fn(6, 9, |i, j| sigma * x[(i, j)]);
            let a = covariance_stats(x.as_ref(), false).unwrap();
            let b = covariance_stats(y.as_ref(), false).unwrap();
            prop_assert_eq!(b.l1, sigma * sigma * a.l1);
            prop_assert_eq!(b.l2, sigma.powi(4) * a.l2);
            for (u, v) in a.energies.iter().zip(&b.energies) {
                prop_assert_eq!(*v, sigma * sigma * u);
            }
        }

        #[test]
        fn stieltjes_conjugate_symmetry(
            ev in proptest::collection::vec(0.0f64..5.0, 1..20),
            re in -3.0f64..8.0,
            im in 0.01f64..3.0,
        ) {
            let z = Complex64::new(re, im);
            let a = empirical_stieltjes(&ev, z).unwrap();
            let b = empirical_stieltjes(&ev, z.conj()).unwrap();
            prop_assert_eq!(b, a.conj());
            prop_assert!(a.im > 0.0);
        }
    }
}
