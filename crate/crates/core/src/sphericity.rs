//! John's sphericity test with three calibrations.
//!
//! `U = p L2 / L1^2 - 1` and `Q = (n p / 2) U`, with `L1 = tr S`,
//! `L2 = tr S^2`. Each calibration standardizes `n U` by a mean of the form
//! `p + 1 + shift` and the limiting variance 4:
//!
//! * Gaussian: no shift;
//! * fourth moment: shift `nu4_hat`, the pooled entrywise excess kurtosis;
//! * corrected: shift `gamma_hat / p`.
//!
//! Each z-score is referred to the standard normal law in both tails.

use faer::MatRef;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::ghost::gamma_hat;
use crate::spectral::SpectralSample;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohnReport {
    pub p: usize,
    pub n: usize,
    pub u: f64,
    pub q: f64,
    pub gamma_hat: f64,
    /// Only available when the data matrix is supplied.
    pub nu4_hat: Option<f64>,
    pub z_gaussian: f64,
    pub z_wy: Option<f64>,
    pub z_corrected: f64,
    pub p_gaussian: f64,
    pub p_wy: Option<f64>,
    pub p_corrected: f64,
}

/// `(U, Q)` from the trace powers.
pub fn john_statistic(l1: f64, l2: f64, p: usize, n: usize) -> Result<(f64, f64)> {
    if l1 == 0.0 || !l1.is_finite() || !l2.is_finite() {
        return Err(Error::InvalidArgument(format!("need finite nonzero tr S, got {l1}")));
    }
    let (pf, nf) = (p as f64, n as f64);
    let u = pf * l2 / (l1 * l1) - 1.0;
    Ok((u, nf * pf / 2.0 * u))
}

/// Pooled excess kurtosis `mean(X^4) / mean(X^2)^2 - 3` over all entries.
pub fn wy_nu4_estimator(x: MatRef<'_, f64>) -> Result<f64> {
    let count = x.nrows() * x.ncols();
    if count < 2 {
        return Err(Error::InvalidArgument("need at least two entries".into()));
    }
    let (mut s2, mut s4) = (0.0, 0.0);
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            let v = x[(i, j)] * x[(i, j)];
            s2 += v;
            s4 += v * v;
        }
    }
    if !(s2 > 0.0) {
        return Err(Error::Degenerate("all entries are zero".into()));
    }
    let m2 = s2 / count as f64;
    Ok(s4 / count as f64 / (m2 * m2) - 3.0)
}

/// `P(Z > z)` for standard normal `Z`.
pub fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `P(|Z| > |z|)`.
pub fn two_sided_p_value(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// `Phi^{-1}(1 - level)`.
pub fn critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} not in (0,1)")));
    }
    Ok(std::f64::consts::SQRT_2 * erfc_inv(2.0 * level))
}

/// Two-sided rejection threshold for `|z|`.
pub fn two_sided_critical_value(level: f64) -> Result<f64> {
    critical_value(level / 2.0)
}

/// Three calibrated z-scores for one sample. The fourth-moment calibration
/// needs the data matrix (`p x n`, one observation per column).
pub fn calibrate_all(sample: &SpectralSample, x: Option<MatRef<'_, f64>>) -> Result<JohnReport> {
    let (p, n) = (sample.p, sample.n);
    if sample.energies.len() != n {
        return Err(Error::InvalidArgument("energies do not match n".into()));
    }
    let (u, q) = john_statistic(sample.l1, sample.l2, p, n)?;
    let g = gamma_hat(&sample.energies, p, true)?;
    let (pf, nf) = (p as f64, n as f64);
    let base = nf * u - pf - 1.0;
    let z_gaussian = base / 2.0;
    let z_corrected = (base - g / pf) / 2.0;
    let nu4_hat = match x {
        Some(x) => {
            if x.nrows() != p || x.ncols() != n {
                return Err(Error::InvalidArgument("data matrix does not match the sample".into()));
            }
            Some(wy_nu4_estimator(x)?)
        }
        None => None,
    };
    let z_wy = nu4_hat.map(|k| (base - k) / 2.0);
    Ok(JohnReport {
        p,
        n,
        u,
        q,
        gamma_hat: g,
        nu4_hat,
        z_gaussian,
        z_wy,
        z_corrected,
        p_gaussian: two_sided_p_value(z_gaussian),
        p_wy: z_wy.map(two_sided_p_value),
        p_corrected: two_sided_p_value(z_corrected),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sample_block_dataset, BlockModelConfig, SeedSpec};
    use crate::spectral::covariance_stats;
    use approx::assert_relative_eq;
    use faer::Mat;

    #[test]
    fn john_examples() {
        assert_eq!(john_statistic(50.0, 50.0, 50, 100).unwrap(), (0.0, 0.0));
        let (u, _) = john_statistic(200.0, 300.0, 200, 400).unwrap();
        assert_eq!(u, 0.5);
        assert_eq!(400.0 * u, 200.0);
        let (a, _) = john_statistic(3.0, 7.0, 5, 9).unwrap();
        let (b, _) = john_statistic(3.0 * 4.0, 7.0 * 16.0, 5, 9).unwrap();
        assert_eq!(a, b);
        assert!(john_statistic(0.0, 1.0, 3, 3).is_err());
    }

    #[test]
    fn kurtosis_examples() {
        let x = Mat::<f64>::from_fn(5, 7, |i, j| if (i + 2 * j) % 3 == 0 { 1.0 } else { -1.0 });
        assert_eq!(wy_nu4_estimator(x.as_ref()).unwrap(), -2.0);
        let y = Mat::<f64>::from_fn(5, 7, |i, j| 0.25 * x[(i, j)]);
        assert_eq!(wy_nu4_estimator(y.as_ref()).unwrap(), -2.0);
        assert!(wy_nu4_estimator(Mat::<f64>::zeros(3, 3).as_ref()).is_err());
    }

    #[test]
    fn tails() {
        assert_eq!(upper_tail(0.0), 0.5);
        assert_relative_eq!(upper_tail(1.6448536269514722), 0.05, max_relative = 1e-9);
        assert_relative_eq!(critical_value(0.05).unwrap(), 1.6448536269514722, max_relative = 1e-9);
        assert_relative_eq!(critical_value(0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert!(critical_value(1.0).is_err());
        assert_relative_eq!(
            two_sided_critical_value(0.05).unwrap(),
            1.959963984540054,
            max_relative = 1e-9
        );
        assert_relative_eq!(two_sided_p_value(-1.959963984540054), 0.05, max_relative = 1e-9);
    }

    #[test]
    fn centered_input_gives_zero_score() {
        // Energies all equal to p give gamma_hat = -2p; choose L2 so that
        // n U = p + 1 + gamma_hat / p = p - 1.
        let (p, n) = (20usize, 40usize);
        let (pf, nf) = (p as f64, n as f64);
        let l1 = pf;
        let u = (pf - 1.0) / nf;
        let l2 = (u + 1.0) * l1 * l1 / pf;
        let sample = SpectralSample {
            p,
            n,
            l1,
            l2,
            energies: vec![pf; n],
            eigenvalues: None,
        };
        let r = calibrate_all(&sample, None).unwrap();
        assert_eq!(r.gamma_hat, -2.0 * pf);
        assert!(r.z_corrected.abs() < 1e-12);
        assert!((r.p_corrected - 1.0).abs() < 1e-12);
        assert!(r.z_wy.is_none() && r.p_wy.is_none());
    }

    #[test]
    fn q_form_equals_u_form() {
        let cfg = BlockModelConfig::preset("M4", 100, 200).unwrap();
        let x = sample_block_dataset(&cfg, &SeedSpec::new(5, "q-form", 0)).unwrap();
        let s = covariance_stats(x.as_ref(), false).unwrap();
        let r = calibrate_all(&s, Some(x.as_ref())).unwrap();
        let pf = 100.0;
        assert_eq!(r.q, 200.0 * pf / 2.0 * r.u);
        let via_q = (r.q - 0.5 * (pf * pf + pf + r.gamma_hat)) / pf;
        assert_relative_eq!(via_q, r.z_corrected, max_relative = 1e-10, epsilon = 1e-10);
    }

    #[test]
    fn pipeline_scale_invariance() {
        let cfg = BlockModelConfig::preset("M6", 100, 200).unwrap();
        let x = sample_block_dataset(&cfg, &SeedSpec::new(5, "scale", 0)).unwrap();
        let base = calibrate_all(&covariance_stats(x.as_ref(), false).unwrap(), Some(x.as_ref())).unwrap();
        for sigma in [0.1, 0.25, 1.0, 10.0] {
            let y = Mat::<f64>::from_fn(100, 200, |i, j| sigma * x[(i, j)]);
            let r = calibrate_all(&covariance_stats(y.as_ref(), false).unwrap(), Some(y.as_ref())).unwrap();
            for (a, b) in [
                (base.z_gaussian, r.z_gaussian),
                (base.z_corrected, r.z_corrected),
                (base.z_wy.unwrap(), r.z_wy.unwrap()),
                (base.gamma_hat, r.gamma_hat),
            ] {
                assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "sigma {sigma}: {a} vs {b}");
            }
        }
    }
}
