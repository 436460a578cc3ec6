//! Mean and covariance approximants of linear spectral statistics.
//!
//! With `u = m_(z)` the companion transform, the centered statistic
//! `L(f) = p int f d(F^{S_n} - F^{c_n,H_n})` has mean `M0 + M1` and
//! covariance `V0 + V1`:
//!
//! ```text
//! M0(f)   = -1/(2 pi i) oint f(z) c u^3 I3 / (1 - c I2)^2 dz
//! M1(f)   = -1/(2 pi i) oint f(z) u^3 / (1 - c I2) (1/n) Gamma(H^-1, H^-2) dz
//! V0(f,g) = -1/(4 pi^2) oint oint f g 2 (u1' u2'/(u1 - u2)^2 - 1/(z1 - z2)^2) dz1 dz2
//! V1(f,g) = -1/(4 pi^2) oint oint f g u1' u2' (1/n) Gamma(H^-1(z1), H^-1(z2)) dz1 dz2
//! ```
//!
//! with `I2 = int u^2 t^2/(1 + t u)^2 dH` and `I3 = int t^2/(1 + t u)^3 dH`.
//! Each side of the rectangular contour is integrated with Gauss–Legendre
//! nodes. The lower half is solved independently of the upper half, so the
//! imaginary part of every result measures the quadrature error and is
//! checked before it is discarded.
//!
//! Constant terms of the test functions are dropped since `L(1) = 0`
//! identically; their integrals vanish up to roundoff anyway.

mod kernel;
mod polynomial;

pub use kernel::{BlockKernel, CorrectionKernel, SphericalKernel};
pub use polynomial::{Polynomial, MAX_DEGREE};

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::mp::{solve_companion, support_interval, DiscreteLaw, StieltjesValue};
use crate::{Error, Result};

const SOLVER_TOL: f64 = 1e-13;
const IMAG_TOL: f64 = 1e-6;
/// Closest the left edge may come to the pole of `u` at the origin.
const ORIGIN_CLEARANCE: f64 = 0.05;
/// Gap between the two contours of a covariance integral.
pub const NESTING_GAP: f64 = 0.25;

/// Rectangle `[x_l, x_r] x [-v0, v0]`, traversed counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub x_l: f64,
    pub x_r: f64,
    pub v0: f64,
    /// Gauss–Legendre nodes on each of the six segments (the vertical sides
    /// are split at the real axis).
    pub nodes_per_side: usize,
    pub margin: f64,
}

impl ContourSpec {
    pub const DEFAULT_MARGIN: f64 = 0.5;
    pub const DEFAULT_V0: f64 = 0.75;
    pub const DEFAULT_NODES: usize = 512;

    /// Default rectangle around the support of `F^{c,H}`. The left edge sits
    /// at `-margin`, so the origin is always enclosed.
    pub fn around(c: f64, law: &DiscreteLaw) -> Self {
        Self::with(c, law, Self::DEFAULT_MARGIN, Self::DEFAULT_V0, Self::DEFAULT_NODES)
    }

    pub fn with(c: f64, law: &DiscreteLaw, margin: f64, v0: f64, nodes_per_side: usize) -> Self {
        let (_, hi) = support_interval(c, law);
        Self {
            x_l: -margin,
            x_r: hi + margin,
            v0,
            nodes_per_side,
            margin,
        }
    }

    /// The rectangle grown by `by` on the left, right and top/bottom.
    pub fn expanded(&self, by: f64) -> Self {
        Self {
            x_l: self.x_l - by,
            x_r: self.x_r + by,
            v0: self.v0 + by,
            ..*self
        }
    }

    pub fn validate(&self, c: f64, law: &DiscreteLaw) -> Result<()> {
        let (lo, hi) = support_interval(c, law);
        let ok = self.v0 > 0.0
            && self.margin > 0.0
            && self.x_l <= lo - self.margin
            && self.x_r >= hi + self.margin
            && self.x_l.abs() >= ORIGIN_CLEARANCE
            && self.nodes_per_side >= 32
            && [self.x_l, self.x_r, self.v0].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "contour {self:?} does not clear the support [{lo}, {hi}] by the margin"
            )))
        }
    }

    /// Nodes `z_k` and weights `dz_k` of the full counterclockwise contour.
    pub fn nodes(&self) -> Vec<(Complex64, Complex64)> {
        let rule = GaussLegendre::new(NonZeroUsize::new(self.nodes_per_side.max(1)).expect("nonzero"));
        let c = |x: f64, y: f64| Complex64::new(x, y);
        let corners = [
            (c(self.x_r, 0.0), c(self.x_r, self.v0)),
            (c(self.x_r, self.v0), c(self.x_l, self.v0)),
            (c(self.x_l, self.v0), c(self.x_l, 0.0)),
            (c(self.x_l, 0.0), c(self.x_l, -self.v0)),
            (c(self.x_l, -self.v0), c(self.x_r, -self.v0)),
            (c(self.x_r, -self.v0), c(self.x_r, 0.0)),
        ];
        let mut out = Vec::with_capacity(6 * self.nodes_per_side);
        for (a, b) in corners {
            let mid = (a + b) * 0.5;
            let half = (b - a) * 0.5;
            for &(x, w) in rule.as_node_weight_pairs() {
                out.push((mid + half * x, half * w));
            }
        }
        out
    }
}

/// Orientation used for the model-dependent mean term.
///
/// Under the spherical null the two readings differ only in the sign of
/// `M1(x^2)`: the moment-matched one gives `+gamma/n`, which agrees with the
/// exact identity `E tr S^2 = p(1 + c) + c + gamma/n`; the literal one gives
/// `-gamma/n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    #[default]
    MomentMatched,
    ContourLiteral,
}

impl SignConvention {
    fn factor(self) -> f64 {
        match self {
            SignConvention::MomentMatched => 1.0,
            SignConvention::ContourLiteral => -1.0,
        }
    }
}

/// Calibration of one test function (mean) and one pair (covariance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LssCalibration {
    pub m0: f64,
    pub m1: f64,
    pub v0: f64,
    pub v1: f64,
    pub gamma_used: f64,
    pub c_n: f64,
}

struct SolvedNode {
    z: Complex64,
    dz: Complex64,
    s: StieltjesValue,
}

fn solve_nodes(contour: &ContourSpec, c: f64, law: &DiscreteLaw) -> Result<Vec<SolvedNode>> {
    contour.validate(c, law)?;
    contour
        .nodes()
        .into_iter()
        .map(|(z, dz)| {
            Ok(SolvedNode {
                z,
                dz,
                s: solve_companion(z, c, law, SOLVER_TOL)?,
            })
        })
        .collect()
}

fn real_part(v: Complex64) -> Result<f64> {
    if v.im.abs() > IMAG_TOL * v.re.abs().max(1.0) || !v.re.is_finite() {
        return Err(Error::ImaginaryResidue(v.im));
    }
    Ok(v.re)
}

fn check_inputs(c: f64, n: usize, fs: &[&Polynomial]) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("aspect ratio {c} must be positive")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if fs.iter().any(|f| f.degree() > 4) {
        return Err(Error::InvalidArgument("quadrature supports degree <= 4".into()));
    }
    Ok(())
}

/// `(M0(f), M1(f))`.
pub fn mean_approximant(
    f: &Polynomial,
    c: f64,
    law: &DiscreteLaw,
    kernel: &dyn CorrectionKernel,
    n: usize,
    contour: &ContourSpec,
    sign: SignConvention,
) -> Result<(f64, f64)> {
    check_inputs(c, n, &[f])?;
    let f = f.without_constant();
    let nodes = solve_nodes(contour, c, law)?;
    let (mut s0, mut s1) = (Complex64::default(), Complex64::default());
    for node in &nodes {
        let u = node.s.u;
        let i2 = law.integrate(|t| {
            let r = u * t / (u * t + 1.0);
            r * r
        });
        let i3 = law.integrate(|t| (u * t + 1.0).powi(-3) * (t * t));
        let denom = -i2 * c + 1.0;
        let fz = f.eval(node.z) * node.dz;
        let u3 = u * u * u;
        s0 += fz * u3 * i3 * c / (denom * denom);
        s1 += fz * u3 / denom * kernel.mean_term(u);
    }
    // -1/(2 pi i) = i/(2 pi).
    let pre = Complex64::new(0.0, 1.0 / (2.0 * PI));
    let m0 = real_part(s0 * pre)?;
    let m1 = real_part(s1 * pre / n as f64)?;
    Ok((m0, sign.factor() * m1))
}

/// `(V0(f, g), V1(f, g))` over two nested contours; `z1` runs over `inner`
/// and `z2` over `outer`.
#[allow(clippy::too_many_arguments)]
pub fn cov_approximant(
    f: &Polynomial,
    g: &Polynomial,
    c: f64,
    law: &DiscreteLaw,
    kernel: &dyn CorrectionKernel,
    n: usize,
    inner: &ContourSpec,
    outer: &ContourSpec,
) -> Result<(f64, f64)> {
    check_inputs(c, n, &[f, g])?;
    let gap = (inner.x_l - outer.x_l)
        .min(outer.x_r - inner.x_r)
        .min(outer.v0 - inner.v0);
    if !(gap >= 0.05) {
        return Err(Error::InvalidArgument(format!(
            "covariance contours must be nested with a gap of at least 0.05, got {gap}"
        )));
    }
    let (f, g) = (f.without_constant(), g.without_constant());
    let a = solve_nodes(inner, c, law)?;
    let b = solve_nodes(outer, c, law)?;
    let fa: Vec<Complex64> = a.iter().map(|k| f.eval(k.z) * k.dz).collect();
    let gb: Vec<Complex64> = b.iter().map(|k| g.eval(k.z) * k.dz).collect();

    let (mut s0, mut s1) = (Complex64::default(), Complex64::default());
    for (ka, &wa) in a.iter().zip(&fa) {
        let (mut row0, mut row1) = (Complex64::default(), Complex64::default());
        for (kb, &wb) in b.iter().zip(&gb) {
            let du = ka.s.u - kb.s.u;
            let dz = ka.z - kb.z;
            let dd = ka.s.du_dz * kb.s.du_dz;
            row0 += wb * (dd / (du * du) - (dz * dz).inv());
            row1 += wb * dd * kernel.cov_term(ka.s.u, kb.s.u);
        }
        s0 += wa * row0;
        s1 += wa * row1;
    }
    let pre = -1.0 / (4.0 * PI * PI);
    let v0 = real_part(s0 * (2.0 * pre))?;
    let v1 = real_part(s1 * (pre / n as f64))?;
    Ok((v0, v1))
}

/// `M0, M1` for `f` and `V0, V1` for `(f, g)` on the default contours.
#[allow(clippy::too_many_arguments)]
pub fn calibrate(
    f: &Polynomial,
    g: &Polynomial,
    c: f64,
    law: &DiscreteLaw,
    kernel: &dyn CorrectionKernel,
    n: usize,
    contour: &ContourSpec,
    sign: SignConvention,
) -> Result<LssCalibration> {
    let (m0, m1) = mean_approximant(f, c, law, kernel, n, contour, sign)?;
    let (v0, v1) = cov_approximant(f, g, c, law, kernel, n, contour, &contour.expanded(NESTING_GAP))?;
    Ok(LssCalibration {
        m0,
        m1,
        v0,
        v1,
        gamma_used: kernel.gamma(),
        c_n: c,
    })
}

/// Truncated Laurent series in `u` holding the powers `lo..=hi`.
#[derive(Debug, Clone)]
struct Laurent {
    lo: i32,
    coeffs: Vec<f64>,
}

impl Laurent {
    fn zero(lo: i32, hi: i32) -> Self {
        Self {
            lo,
            coeffs: vec![0.0; (hi - lo + 1) as usize],
        }
    }

    fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    fn get(&self, k: i32) -> f64 {
        if k < self.lo || k > self.hi() {
            0.0
        } else {
            self.coeffs[(k - self.lo) as usize]
        }
    }

    fn add(&mut self, k: i32, v: f64) {
        if k >= self.lo && k <= self.hi() {
            self.coeffs[(k - self.lo) as usize] += v;
        }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.lo, self.hi());
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out.add(self.lo + i as i32 + other.lo + j as i32, a * b);
            }
        }
        out
    }
}

/// Coefficient `r` with `M1(f) = r gamma/n` under the spherical null, in the
/// moment-matched convention.
///
/// With `u = m_(z)` the mean integrand becomes `f(z(u)) u/(1 + u)^3 du`
/// where `z(u) = -1/u + c/(1 + u)`. The positively oriented `z` contour maps
/// to a clockwise loop around `u = 0`, the only pole inside, so `r` is the
/// residue there.
pub fn residue_m1_spherical(f: &Polynomial, c: f64) -> f64 {
    let d = f.degree().max(1) as i32;
    // Powers <= 0 of a product of factors with lowest power >= -d are exact
    // when each factor keeps the powers up to d.
    let (lo, hi) = (-d, d);
    let mut z = Laurent::zero(lo, hi);
    z.add(-1, -1.0);
    for k in 0..=hi {
        z.add(k, c * if k % 2 == 0 { 1.0 } else { -1.0 });
    }
    let mut h = Laurent::zero(lo, hi);
    let mut zk = Laurent::zero(lo, hi);
    zk.add(0, 1.0);
    for (k, &a) in f.coeffs().iter().enumerate() {
        if k > 0 {
            zk = zk.mul(&z);
        }
        for m in lo..=hi {
            h.add(m, a * zk.get(m));
        }
    }
    // u/(1+u)^3 = sum_k (-1)^k C(k+2, 2) u^(k+1); the residue pairs u^(k+1)
    // with u^(-k-2).
    (0..=d)
        .map(|k| {
            let b = (-1f64).powi(k) * ((k + 1) * (k + 2)) as f64 / 2.0;
            b * h.get(-k - 2)
        })
        .sum()
}

/// Asymptotic moments of `n U` and of `Q = (n p/2) U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JohnAsymptotics {
    pub mean_nu: f64,
    pub var_nu: f64,
    pub mean_q: f64,
    pub var_q: f64,
}

pub fn john_asymptotics(p: usize, gamma: f64) -> JohnAsymptotics {
    let pf = p as f64;
    JohnAsymptotics {
        mean_nu: pf + 1.0 + gamma / pf,
        var_nu: 4.0,
        mean_q: 0.5 * (pf * pf + pf + gamma),
        var_q: pf * pf,
    }
}
