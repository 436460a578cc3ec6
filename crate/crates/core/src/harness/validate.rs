//! Oracle suite behind the `validate` subcommand.

use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::experiments::{poisson_spike_check, sphere_fourth_moment};
use crate::calibration::{
    cov_approximant, mean_approximant, residue_m1_spherical, ContourSpec, Polynomial, SignConvention, SphericalKernel,
    NESTING_GAP,
};
use crate::ghost::{corr_boundary_gamma, gamma_scalar_exact, quadform_cov_oracle, GammaBlockParams};
use crate::models::{BlockModelConfig, SeedSpec};
use crate::mp::{companion_closed_form_null, inverse_map, solve_companion, DiscreteLaw};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    /// Measured error or statistic.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl ValidationCheck {
    fn new(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    /// `name: pass (detail)`.
    pub fn line(&self) -> String {
        format!(
            "{}: {} ({}; value {:.3e}, tolerance {:.1e})",
            self.name,
            if self.passed { "pass" } else { "FAIL" },
            self.detail,
            self.value,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    pub seed: u64,
    pub poisson_reps: usize,
    pub poisson_p: usize,
    pub sphere_rows: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 20240601,
            poisson_reps: 5000,
            poisson_p: 1000,
            sphere_rows: 400_000,
        }
    }
}

/// Two blocks of Rademacher directions with unequal radial scales.
pub fn two_block_params(p: usize) -> GammaBlockParams {
    GammaBlockParams {
        p,
        block_sizes: vec![p / 2, p - p / 2],
        nu4: vec![-2.0, -2.0],
        tau: vec![0.8, 1.5],
        delta: vec![1.0, 0.6],
    }
}

fn random_pair(p: usize, seed: &SeedSpec, diagonal: bool) -> (Mat<f64>, Mat<f64>) {
    let mut rng = seed.rng();
    let mut draw = |i: usize, j: usize| {
        if diagonal && i != j {
            0.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    };
    let a = Mat::from_fn(p, p, &mut draw);
    let b = Mat::from_fn(p, p, &mut draw);
    (a, b)
}

/// Largest errors of the cumulant decomposition over random pairs at
/// `p = 4, 6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadformErrors {
    /// `|Cov - Gaussian - sum kappa A B|`.
    pub cumulant: f64,
    /// `|Cov - Gaussian - Gamma_blk - remainder|`.
    pub exact_kernel: f64,
    /// `|Cov - Gaussian - Gamma_blk|` on dense pairs.
    pub leading_dense: f64,
    /// `|Cov - Gaussian - Gamma_blk|` on diagonal pairs.
    pub leading_diagonal: f64,
}

pub fn quadform_errors(pairs: usize, seed: u64) -> Result<QuadformErrors> {
    let mut e = QuadformErrors {
        cumulant: 0.0,
        exact_kernel: 0.0,
        leading_dense: 0.0,
        leading_diagonal: 0.0,
    };
    for p in [4usize, 6] {
        let params = two_block_params(p);
        let spec = SeedSpec::new(seed, format!("quadform:{p}"), 0);
        for r in 0..pairs as u64 {
            let (a, b) = random_pair(p, &spec.with_replicate(r), false);
            let o = quadform_cov_oracle(a.as_ref(), b.as_ref(), &params)?;
            let dev = o.lhs - o.gaussian;
            e.cumulant = e.cumulant.max((dev - o.gamma_cumulant).abs());
            e.exact_kernel = e.exact_kernel.max((dev - o.gamma_blk - o.remainder).abs());
            e.leading_dense = e.leading_dense.max((dev - o.gamma_blk).abs());

            let (a, b) = random_pair(p, &spec.with_replicate(r + pairs as u64), true);
            let o = quadform_cov_oracle(a.as_ref(), b.as_ref(), &params)?;
            e.leading_diagonal = e.leading_diagonal.max((o.lhs - o.gaussian - o.gamma_blk).abs());
        }
    }
    Ok(e)
}

/// `count` points spread along the rectangle `[x_l, x_r] x [-v0, v0]`,
/// none of them on the real axis.
pub fn rectangle_points(x_l: f64, x_r: f64, v0: f64, count: usize) -> Vec<Complex64> {
    let w = x_r - x_l;
    let perimeter = 2.0 * w + 4.0 * v0;
    (0..count)
        .map(|k| {
            let mut s = (k as f64 + 0.5) / count as f64 * perimeter;
            // Start at (x_r, 0) and walk counterclockwise.
            if s < v0 {
                return Complex64::new(x_r, s);
            }
            s -= v0;
            if s < w {
                return Complex64::new(x_r - s, v0);
            }
            s -= w;
            if s < 2.0 * v0 {
                return Complex64::new(x_l, v0 - s);
            }
            s -= 2.0 * v0;
            if s < w {
                return Complex64::new(x_l + s, -v0);
            }
            s -= w;
            Complex64::new(x_r, -v0 + s)
        })
        .collect()
}

/// Sup error of the solver against the null closed form, and whether every
/// solution has `Im u Im z > 0` and `Im m Im z > 0`.
pub fn mp_closed_form_check(c: f64, nodes: usize) -> Result<(f64, bool)> {
    let law = DiscreteLaw::point_mass(1.0);
    let contour = ContourSpec::around(c, &law);
    let mut err = 0.0f64;
    let mut herglotz = true;
    for z in rectangle_points(contour.x_l, contour.x_r, contour.v0, nodes) {
        let s = solve_companion(z, c, &law, 1e-13)?;
        err = err.max((s.u - companion_closed_form_null(z, c)).norm());
        herglotz &= s.u.im * z.im > 0.0 && s.m.im * z.im > 0.0;
    }
    Ok((err, herglotz))
}

/// Sup of `|z(u(z)) - z|` for a two-atom law.
pub fn mp_round_trip_check(nodes: usize) -> Result<f64> {
    let law = DiscreteLaw::new(vec![(1.0, 0.8), (2.5, 0.2)])?;
    let mut err = 0.0f64;
    for c in [0.25, 0.5, 2.0] {
        let contour = ContourSpec::around(c, &law);
        for z in rectangle_points(contour.x_l, contour.x_r, contour.v0, nodes) {
            let s = solve_companion(z, c, &law, 1e-13)?;
            let (back, _) = inverse_map(s.u, c, &law)?;
            err = err.max((back - z).norm());
        }
    }
    Ok(err)
}

/// Largest deviation of the quadrature moments from the exact finite-`n`
/// moments of `tr S` and `tr S^2` under the spherical null, relative to the
/// tolerances `1e-8` (`M0(x)`), `1e-6` (`M0(x^2)`), `1e-5` (`M0 + M1` of
/// `x^2`) and `1e-4` (`V0 + V1` of `(x, x)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationErrors {
    pub m0_x: f64,
    pub m0_x2: f64,
    pub mean_x2: f64,
    pub var_x: f64,
}

impl CalibrationErrors {
    pub fn passed(&self) -> bool {
        self.m0_x < 1e-8 && self.m0_x2 < 1e-6 && self.mean_x2 < 1e-5 && self.var_x < 1e-4
    }
}

/// Gammas checked by default: the Rademacher extreme `-2p`, zero, and the
/// exact M4 value.
pub fn calibration_gammas(p: usize, n: usize) -> Result<Vec<f64>> {
    let m4 = BlockModelConfig::preset("M4", p, n).expect("built-in preset");
    Ok(vec![
        -2.0 * p as f64,
        0.0,
        gamma_scalar_exact(&GammaBlockParams::from_config(&m4)?),
    ])
}

pub fn calibration_errors(p: usize, n: usize, gammas: &[f64]) -> Result<CalibrationErrors> {
    let c = p as f64 / n as f64;
    let nf = n as f64;
    let law = DiscreteLaw::point_mass(1.0);
    let contour = ContourSpec::around(c, &law);
    let outer = contour.expanded(NESTING_GAP);
    let (x, x2) = (Polynomial::monomial(1), Polynomial::monomial(2));
    let mut e = CalibrationErrors {
        m0_x: 0.0,
        m0_x2: 0.0,
        mean_x2: 0.0,
        var_x: 0.0,
    };
    for &g in gammas {
        let k = SphericalKernel::new(g);
        let (m0, m1) = mean_approximant(&x, c, &law, &k, n, &contour, SignConvention::MomentMatched)?;
        e.m0_x = e.m0_x.max(m0.abs()).max(m1.abs());
        let (m0, m1) = mean_approximant(&x2, c, &law, &k, n, &contour, SignConvention::MomentMatched)?;
        e.m0_x2 = e.m0_x2.max((m0 - c).abs());
        e.mean_x2 = e.mean_x2.max((m0 + m1 - c - g / nf).abs());
        let (v0, v1) = cov_approximant(&x, &x, c, &law, &k, n, &contour, &outer)?;
        e.var_x = e.var_x.max((v0 + v1 - 2.0 * c - g / nf).abs());
    }
    Ok(e)
}

/// `|residue(x)|`, `|residue(x^2) - 1|` and the largest gap between the
/// residue and quadrature values of `M1 n / gamma` over `x, .., x^4`.
pub fn residue_errors(c: f64) -> Result<(f64, f64, f64)> {
    let law = DiscreteLaw::point_mass(1.0);
    let contour = ContourSpec::around(c, &law);
    let n = 400;
    let gamma = 1.0;
    let kernel = SphericalKernel::new(gamma);
    let mut gap = 0.0f64;
    for k in 1..=4 {
        let f = Polynomial::monomial(k);
        let (_, m1) = mean_approximant(&f, c, &law, &kernel, n, &contour, SignConvention::MomentMatched)?;
        gap = gap.max((m1 * n as f64 / gamma - residue_m1_spherical(&f, c)).abs());
    }
    let r1 = residue_m1_spherical(&Polynomial::monomial(1), c).abs();
    let r2 = (residue_m1_spherical(&Polynomial::monomial(2), c) - 1.0).abs();
    Ok((r1, r2, gap))
}

/// Monte Carlo `Gamma_n(A_n, A_n)` for the self-normalized boundary case
/// against `-4n/(n+2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrBoundary {
    pub n: usize,
    pub estimate: f64,
    pub se: f64,
    pub target: f64,
}

impl CorrBoundary {
    pub fn z(&self) -> f64 {
        (self.estimate - self.target) / self.se
    }
}

pub fn corr_boundary_check(n: usize, rows: usize, seed: u64) -> Result<CorrBoundary> {
    let (beta4, se_beta) = sphere_fourth_moment(n, rows, seed)?;
    let nf = n as f64;
    Ok(CorrBoundary {
        n,
        estimate: corr_boundary_gamma(n, beta4)?,
        se: nf.powi(4) / (nf - 1.0) * se_beta,
        target: -4.0 * nf / (nf + 2.0),
    })
}

/// Run every oracle and report one check per invariant.
pub fn run_validate(opts: &ValidateOptions) -> Result<Vec<ValidationCheck>> {
    let mut out = Vec::new();

    let l1 = quadform_errors(20, opts.seed)?;
    out.push(ValidationCheck::new(
        "quadform_enumeration",
        l1.cumulant.max(l1.exact_kernel),
        1e-12,
        format!(
            "p=4,6 two blocks, 20 dense pairs each; cumulant err {:.1e}, exact kernel err {:.1e}",
            l1.cumulant, l1.exact_kernel
        ),
    ));
    out.push(ValidationCheck::new(
        "quadform_block_kernel_diagonal",
        l1.leading_diagonal,
        1e-12,
        format!(
            "leading kernel on diagonal pairs; dense pairs differ by the finite-p remainder (max {:.3e})",
            l1.leading_dense
        ),
    ));

    let (err, herglotz) = mp_closed_form_check(0.5, 100)?;
    let mut check = ValidationCheck::new("mp_closed_form", err, 1e-10, format!("100 nodes, herglotz {herglotz}"));
    check.passed &= herglotz;
    out.push(check);
    out.push(ValidationCheck::new(
        "mp_round_trip",
        mp_round_trip_check(100)?,
        1e-9,
        "two-atom law, c in {0.25, 0.5, 2}",
    ));

    let (p, n) = (200, 400);
    let cal = calibration_errors(p, n, &calibration_gammas(p, n)?)?;
    let mut check = ValidationCheck::new(
        "calibration_identities",
        (cal.m0_x / 1e-8)
            .max(cal.m0_x2 / 1e-6)
            .max(cal.mean_x2 / 1e-5)
            .max(cal.var_x / 1e-4),
        1.0,
        format!(
            "p=200 n=400, errors relative to tolerance; M0(x) {:.1e}, M0(x2) {:.1e}, M(x2) {:.1e}, V(x,x) {:.1e}",
            cal.m0_x, cal.m0_x2, cal.mean_x2, cal.var_x
        ),
    );
    check.passed = cal.passed();
    out.push(check);

    let (r1, r2, gap) = residue_errors(0.5)?;
    out.push(ValidationCheck::new(
        "residue_agreement",
        r1.max(r2).max(gap),
        1e-6,
        format!("residue x {r1:.1e}, x2 - 1 {r2:.1e}, quadrature gap {gap:.1e}"),
    ));

    let pc = poisson_spike_check(1.0, opts.poisson_p, 2 * opts.poisson_p, opts.poisson_reps, opts.seed)?;
    let mut check = ValidationCheck::new(
        "poisson_spike",
        pc.max_pmf_error(),
        0.02,
        format!(
            "lambda=1 p={} reps={}; pmf {:?}, mean {:.4}",
            opts.poisson_p,
            opts.poisson_reps,
            pc.pmf.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            pc.mean
        ),
    );
    check.passed &= (pc.mean - 1.0).abs() <= 0.05;
    out.push(check);

    for n in [4, 8, 16] {
        let cb = corr_boundary_check(n, opts.sphere_rows, opts.seed)?;
        out.push(ValidationCheck::new(
            &format!("corr_boundary_n{n}"),
            cb.z().abs(),
            3.0,
            format!("estimate {:.4} +- {:.4}, target {:.4}", cb.estimate, cb.se, cb.target),
        ));
    }
    Ok(out)
}
