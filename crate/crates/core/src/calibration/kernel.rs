//! Correction kernels evaluated along the contour.
//!
//! The approximants need `Gamma(H^{-1}(z), H^{-2}(z))` and
//! `Gamma(H^{-1}(z1), H^{-1}(z2))` with `H(z) = u(z) Sigma + I`. Because the
//! kernel acts on the standardized vector while the data are `Sigma^{1/2}`
//! times it, both arguments are conjugated by `Sigma^{1/2}`: for diagonal
//! `Sigma = diag(t_i)` they become `diag(t_i/(1 + u t_i))` and
//! `diag(t_i/(1 + u t_i)^2)`.

use num_complex::Complex64;

use crate::ghost::GammaBlockParams;
use crate::{Error, Result};

pub trait CorrectionKernel: Sync {
    /// `Gamma(Sigma^{1/2} H^{-1} Sigma^{1/2}, Sigma^{1/2} H^{-2} Sigma^{1/2})` at `u`.
    fn mean_term(&self, u: Complex64) -> Complex64;

    /// `Gamma(Sigma^{1/2} H^{-1}(u1) Sigma^{1/2}, Sigma^{1/2} H^{-1}(u2) Sigma^{1/2})`.
    fn cov_term(&self, u1: Complex64, u2: Complex64) -> Complex64;

    /// `Gamma(Sigma, Sigma)`, the scalar the kernel reduces to at `u = 0`.
    fn gamma(&self) -> f64 {
        self.mean_term(Complex64::new(0.0, 0.0)).re
    }
}

/// Kernel of the spherical reduction. With `Sigma = t I` every argument is a
/// multiple of the identity and `Gamma(a I, b I) = a b gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalKernel {
    pub gamma: f64,
    pub t: f64,
}

impl SphericalKernel {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, t: 1.0 }
    }
}

impl CorrectionKernel for SphericalKernel {
    fn mean_term(&self, u: Complex64) -> Complex64 {
        let d = (u * self.t + 1.0).inv();
        d * d * d * (self.gamma * self.t * self.t)
    }

    fn cov_term(&self, u1: Complex64, u2: Complex64) -> Complex64 {
        ((u1 * self.t + 1.0) * (u2 * self.t + 1.0)).inv() * (self.gamma * self.t * self.t)
    }

    fn gamma(&self) -> f64 {
        self.gamma * self.t * self.t
    }
}

/// The blockwise kernel with a diagonal population covariance.
///
/// Coordinates within a block that share a variance are grouped, so each
/// evaluation costs one term per distinct `(block, variance)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockKernel {
    nu4: Vec<f64>,
    radial_variance: Vec<f64>,
    /// Per block: distinct variances with multiplicities.
    groups: Vec<Vec<(f64, f64)>>,
}

impl BlockKernel {
    pub fn new(params: &GammaBlockParams, sigma_diag: &[f64]) -> Result<Self> {
        params.validate()?;
        if sigma_diag.len() != params.p {
            return Err(Error::InvalidArgument("sigma_diag length differs from p".into()));
        }
        let groups = params
            .ranges()
            .into_iter()
            .map(|r| {
                let mut ts = sigma_diag[r].to_vec();
                ts.sort_by(f64::total_cmp);
                let mut g: Vec<(f64, f64)> = Vec::new();
                for t in ts {
                    match g.last_mut() {
                        Some(last) if last.0 == t => last.1 += 1.0,
                        _ => g.push((t, 1.0)),
                    }
                }
                g
            })
            .collect();
        Ok(Self {
            nu4: params.nu4.clone(),
            radial_variance: (0..params.nu4.len()).map(|j| params.radial_variance(j)).collect(),
            groups,
        })
    }
}

impl CorrectionKernel for BlockKernel {
    fn mean_term(&self, u: Complex64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (j, g) in self.groups.iter().enumerate() {
            let (mut had, mut ta, mut tb) = (Complex64::default(), Complex64::default(), Complex64::default());
            for &(t, k) in g {
                let a = (u * t + 1.0).inv() * t;
                let b = a * (u * t + 1.0).inv();
                had += a * b * k;
                ta += a * k;
                tb += b * k;
            }
            total += had * self.nu4[j] + ta * tb * self.radial_variance[j];
        }
        total
    }

    fn cov_term(&self, u1: Complex64, u2: Complex64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (j, g) in self.groups.iter().enumerate() {
            let (mut had, mut ta, mut tb) = (Complex64::default(), Complex64::default(), Complex64::default());
            for &(t, k) in g {
                let a = (u1 * t + 1.0).inv() * t;
                let b = (u2 * t + 1.0).inv() * t;
                had += a * b * k;
                ta += a * k;
                tb += b * k;
            }
            total += had * self.nu4[j] + ta * tb * self.radial_variance[j];
        }
        total
    }
}
