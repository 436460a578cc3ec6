//! Fourth-order correction kernels.
//!
//! For a quadratic form `Q(A) = r^T A r` the covariance of two forms splits
//! into a Gaussian part and a correction
//!
//! ```text
//! Cov(Q(A), Q(B)) = tr(A S B S) + tr(A S B^T S) + Gamma(A, B)
//! ```
//!
//! where `Gamma(A, B) = sum_{ijkl} kappa_{ijkl} A_ij B_kl` contracts the fourth
//! cumulant tensor of `r`. For the blockwise mixed radial model the leading
//! part of `Gamma` is the explicit kernel
//!
//! ```text
//! Gamma_blk(A, B) = sum_j nu4_j sum_{i in j} A_ii B_ii
//!                 + sum_j tau_j p^(-delta_j) tr(A F_j) tr(B F_j)
//! ```
//!
//! with `F_j` the selector of block `j`. At finite `p` the exact kernel adds
//! `sum_j v_j [tr(A_j B_j) + tr(A_j B_j^T) + nu4_j sum_{i in j} A_ii B_ii]`,
//! `v_j = tau_j p^(-delta_j)`, which is of lower order and vanishes for
//! diagonal arguments when `nu4_j = -2`.

use faer::{Mat, MatRef};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::models::BlockModelConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaBlockParams {
    pub p: usize,
    pub block_sizes: Vec<usize>,
    pub nu4: Vec<f64>,
    pub tau: Vec<f64>,
    pub delta: Vec<f64>,
}

impl GammaBlockParams {
    pub fn from_config(cfg: &BlockModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            p: cfg.p,
            block_sizes: cfg.block_sizes()?,
            nu4: cfg.blocks.iter().map(|b| b.direction.nu4()).collect(),
            tau: cfg.blocks.iter().map(|b| b.tau).collect(),
            delta: cfg.blocks.iter().map(|b| b.delta).collect(),
        })
    }

    /// A single block with fourth cumulant `nu4` and no radial fluctuation.
    pub fn independent_components(p: usize, nu4: f64) -> Self {
        Self {
            p,
            block_sizes: vec![p],
            nu4: vec![nu4],
            tau: vec![0.0],
            delta: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.block_sizes.len();
        if b == 0 || self.nu4.len() != b || self.tau.len() != b || self.delta.len() != b {
            return Err(Error::InvalidArgument(
                "kernel parameters have inconsistent block counts".into(),
            ));
        }
        if self.block_sizes.iter().sum::<usize>() != self.p || self.block_sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "block sizes must be positive and sum to p".into(),
            ));
        }
        Ok(())
    }

    /// `tau_j p^(-delta_j)`, the variance of `rho_j^2`.
    pub fn radial_variance(&self, j: usize) -> f64 {
        self.tau[j] * (self.p as f64).powf(-self.delta[j])
    }

    /// Index ranges of the blocks.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.block_sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect()
    }
}

fn check_square(a: MatRef<'_, f64>, p: usize, name: &str) -> Result<()> {
    if a.nrows() != p || a.ncols() != p {
        return Err(Error::InvalidArgument(format!(
            "{name} is {}x{}, expected {p}x{p}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// `Gamma_blk(A, B)` for dense `A`, `B`.
pub fn gamma_block(a: MatRef<'_, f64>, b: MatRef<'_, f64>, params: &GammaBlockParams) -> Result<f64> {
    params.validate()?;
    check_square(a, params.p, "A")?;
    check_square(b, params.p, "B")?;
    let mut total = 0.0;
    for (j, range) in params.ranges().into_iter().enumerate() {
        let (mut hadamard, mut ta, mut tb) = (0.0, 0.0, 0.0);
        for i in range {
            hadamard += a[(i, i)] * b[(i, i)];
            ta += a[(i, i)];
            tb += b[(i, i)];
        }
        total += params.nu4[j] * hadamard + params.radial_variance(j) * (ta * tb);
    }
    Ok(total)
}

/// `Gamma_blk(diag(a), diag(b))`, the form used along integration contours.
pub fn gamma_block_diag(a: &[Complex64], b: &[Complex64], params: &GammaBlockParams) -> Result<Complex64> {
    params.validate()?;
    if a.len() != params.p || b.len() != params.p {
        return Err(Error::InvalidArgument("diagonal length differs from p".into()));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for (j, range) in params.ranges().into_iter().enumerate() {
        let hadamard: Complex64 = range.clone().map(|i| a[i] * b[i]).sum();
        let ta: Complex64 = a[range.clone()].iter().sum();
        let tb: Complex64 = b[range].iter().sum();
        total += hadamard * params.nu4[j] + (ta * tb) * params.radial_variance(j);
    }
    Ok(total)
}

/// Finite-`p` part of the exact kernel that `Gamma_blk` leaves out.
pub fn gamma_block_remainder(a: MatRef<'_, f64>, b: MatRef<'_, f64>, params: &GammaBlockParams) -> Result<f64> {
    params.validate()?;
    check_square(a, params.p, "A")?;
    check_square(b, params.p, "B")?;
    let mut total = 0.0;
    for (j, range) in params.ranges().into_iter().enumerate() {
        let mut s = 0.0;
        for i in range.clone() {
            for k in range.clone() {
                s += a[(i, k)] * (b[(k, i)] + b[(i, k)]);
            }
            s += params.nu4[j] * a[(i, i)] * b[(i, i)];
        }
        total += params.radial_variance(j) * s;
    }
    Ok(total)
}

/// Exact fourth-order correction of the radial model with identity scale.
pub fn gamma_block_exact(a: MatRef<'_, f64>, b: MatRef<'_, f64>, params: &GammaBlockParams) -> Result<f64> {
    Ok(gamma_block(a, b, params)? + gamma_block_remainder(a, b, params)?)
}

/// `gamma_n = Gamma_blk(I, I) = sum_j nu4_j p_j + sum_j tau_j p_j^2 p^(-delta_j)`.
pub fn gamma_scalar_closed_form(params: &GammaBlockParams) -> f64 {
    params
        .block_sizes
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let s = s as f64;
            params.nu4[j] * s + params.radial_variance(j) * (s * s)
        })
        .sum()
}

/// `E(|r|^2 - p)^2 - 2p` for the radial model, i.e. the exact kernel at `(I, I)`.
pub fn gamma_scalar_exact(params: &GammaBlockParams) -> f64 {
    gamma_scalar_closed_form(params)
        + params
            .block_sizes
            .iter()
            .enumerate()
            .map(|(j, &s)| params.radial_variance(j) * s as f64 * (2.0 + params.nu4[j]))
            .sum::<f64>()
}

/// Plug-in estimator `(1/n) sum (T_i - p)^2 - 2p` of `gamma_n`.
///
/// With `studentize` the energies are first rescaled to have mean `p`, which
/// makes the estimate invariant to the overall scale of the data.
pub fn gamma_hat(energies: &[f64], p: usize, studentize: bool) -> Result<f64> {
    if energies.len() < 2 {
        return Err(Error::InvalidArgument("gamma_hat needs at least two energies".into()));
    }
    let n = energies.len() as f64;
    let pf = p as f64;
    let scale = if studentize {
        let mean = energies.iter().sum::<f64>() / n;
        if !(mean > 0.0) {
            return Err(Error::Degenerate("mean energy is not positive".into()));
        }
        pf / mean
    } else {
        1.0
    };
    let ss: f64 = energies.iter().map(|t| (scale * t - pf).powi(2)).sum();
    Ok(ss / n - 2.0 * pf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseIndices {
    /// `phi_j = 2 alpha_j - delta_j` per block.
    pub phi: Vec<f64>,
    /// `max_j phi_j / 2`.
    pub kappa: f64,
    /// `min(1, p^(1/2 - kappa))`.
    pub r_p: f64,
}

pub fn phase_indices(blocks: &[(f64, f64)], p: usize) -> Result<PhaseIndices> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("no blocks".into()));
    }
    if blocks.iter().any(|&(_, d)| !(d > 0.0)) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let phi: Vec<f64> = blocks.iter().map(|&(a, d)| 2.0 * a - d).collect();
    let max_phi = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r_p = if max_phi <= 1.0 {
        1.0
    } else {
        (p as f64).powf((1.0 - max_phi) / 2.0)
    };
    Ok(PhaseIndices {
        phi,
        kappa: max_phi / 2.0,
        r_p,
    })
}

/// Result of the exact covariance enumeration for two quadratic forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadformOracle {
    /// `Cov(Q(A), Q(B))` by enumeration.
    pub lhs: f64,
    /// `tr(AB) + tr(AB^T)`.
    pub gaussian: f64,
    /// `Gamma_blk(A, B)`.
    pub gamma_blk: f64,
    /// `sum kappa_ijkl A_ij B_kl` with the cumulant tensor also enumerated.
    pub gamma_cumulant: f64,
    /// `gamma_block_remainder(A, B)`.
    pub remainder: f64,
}

const ENUMERATION_CAP: u64 = 1 << 16;

/// Exact `Cov(r^T A r, r^T B r)` for Rademacher directions and two-point
/// radials `rho_j^2 in {1 - s_j, 1 + s_j}`, `s_j = sqrt(tau_j) p^(-delta_j/2)`,
/// by summing over all `2^p 2^B` equally likely outcomes.
///
/// `params.nu4` is ignored; every block is Rademacher.
pub fn quadform_cov_oracle(
    a: MatRef<'_, f64>,
    b: MatRef<'_, f64>,
    params: &GammaBlockParams,
) -> Result<QuadformOracle> {
    params.validate()?;
    check_square(a, params.p, "A")?;
    check_square(b, params.p, "B")?;
    let p = params.p;
    let nb = params.block_sizes.len();
    let outcomes = 1u64
        .checked_shl((p + nb) as u32)
        .filter(|&o| o <= ENUMERATION_CAP)
        .ok_or(Error::EnumerationTooLarge(2f64.powi((p + nb) as i32) as u64))?;
    let rad = GammaBlockParams {
        nu4: vec![-2.0; nb],
        ..params.clone()
    };
    let half: Vec<f64> = (0..nb).map(|j| rad.radial_variance(j).sqrt()).collect();
    if let Some(j) = half.iter().position(|&s| s >= 1.0) {
        return Err(Error::RadialOutOfRange {
            block: j,
            scale: half[j],
        });
    }
    let block_of: Vec<usize> = rad
        .ranges()
        .into_iter()
        .enumerate()
        .flat_map(|(j, r)| r.map(move |_| j))
        .collect();

    let weight = 1.0 / outcomes as f64;
    let (mut qa_sum, mut qb_sum, mut qab_sum) = (0.0, 0.0, 0.0);
    let mut m4 = vec![0.0; p * p * p * p];
    let mut r = vec![0.0; p];
    for k in 0..outcomes {
        for i in 0..p {
            let sign = if (k >> i) & 1 == 1 { 1.0 } else { -1.0 };
            let j = block_of[i];
            let rho2 = if (k >> (p + j)) & 1 == 1 {
                1.0 + half[j]
            } else {
                1.0 - half[j]
            };
            r[i] = sign * rho2.sqrt();
        }
        let (qa, qb) = (quadratic_form(a, &r), quadratic_form(b, &r));
        qa_sum += qa;
        qb_sum += qb;
        qab_sum += qa * qb;
        for i in 0..p {
            for j in 0..p {
                let rij = r[i] * r[j];
                for l in 0..p {
                    let rijl = rij * r[l];
                    let base = ((i * p + j) * p + l) * p;
                    for m in 0..p {
                        m4[base + m] += rijl * r[m];
                    }
                }
            }
        }
    }
    let lhs = qab_sum * weight - (qa_sum * weight) * (qb_sum * weight);

    // E r r^T = I, so the cumulant is the fourth moment minus three pairings.
    let delta = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
    let mut gamma_cumulant = 0.0;
    for i in 0..p {
        for j in 0..p {
            for l in 0..p {
                for m in 0..p {
                    let kappa = m4[((i * p + j) * p + l) * p + m] * weight
                        - delta(i, j) * delta(l, m)
                        - delta(i, l) * delta(j, m)
                        - delta(i, m) * delta(j, l);
                    gamma_cumulant += kappa * a[(i, j)] * b[(l, m)];
                }
            }
        }
    }

    let mut gaussian = 0.0;
    for i in 0..p {
        for j in 0..p {
            gaussian += a[(i, j)] * (b[(j, i)] + b[(i, j)]);
        }
    }
    Ok(QuadformOracle {
        lhs,
        gaussian,
        gamma_blk: gamma_block(a, b, &rad)?,
        gamma_cumulant,
        remainder: gamma_block_remainder(a, b, &rad)?,
    })
}

fn quadratic_form(a: MatRef<'_, f64>, r: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..r.len() {
        let mut col = 0.0;
        for i in 0..r.len() {
            col += r[i] * a[(i, j)];
        }
        s += col * r[j];
    }
    s
}

/// `Gamma_n(A_n, A_n) = n^2 (n^2 beta4 - 1)/(n - 1) - 2n` for self-normalized
/// rows with `beta4 = E Y_1^4`.
pub fn corr_boundary_gamma(n: usize, beta4: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    if !(beta4 > 0.0 && beta4 < 1.0) {
        return Err(Error::InvalidArgument(format!("beta4 = {beta4} not in (0,1)")));
    }
    let nf = n as f64;
    Ok(nf * nf * (nf * nf * beta4 - 1.0) / (nf - 1.0) - 2.0 * nf)
}

/// Identity matrix helper for kernel evaluations.
pub fn identity(p: usize) -> Mat<f64> {
    Mat::<f64>::identity(p, p)
}
