//! Marčenko–Pastur machinery for discrete population spectral laws.
//!
//! The companion Stieltjes transform `u = m_(z)` of `F^{c,H}` is the unique
//! solution with `Im u Im z > 0` of
//!
//! ```text
//! z = -1/u + c * int t / (1 + t u) dH(t)
//! ```
//!
//! and `m(z) = (u + (1 - c)/z) / c`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Finitely supported probability law `sum_j w_j delta_{t_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteLaw {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("law needs at least one atom".into()));
        }
        for &(t, w) in &atoms {
            if !t.is_finite() || t < 0.0 || !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("bad atom ({t}, {w})")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}")));
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(t: f64) -> Self {
        Self { atoms: vec![(t, 1.0)] }
    }

    /// Empirical spectral law of a diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("empty diagonal".into()));
        }
        let mut sorted = diag.to_vec();
        sorted.sort_by(f64::total_cmp);
        let w = 1.0 / diag.len() as f64;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for t in sorted {
            match atoms.last_mut() {
                Some(last) if last.0 == t => last.1 += w,
                _ => atoms.push((t, w)),
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        atoms.iter_mut().for_each(|a| a.1 /= total);
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `int t^k dH`.
    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|&(t, w)| w * t.powi(k)).sum()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min)
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sum_j w_j g(t_j)`.
    pub fn integrate<F: Fn(f64) -> Complex64>(&self, g: F) -> Complex64 {
        self.atoms.iter().map(|&(t, w)| g(t) * w).sum()
    }
}

/// Solved companion transform at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesValue {
    pub z: Complex64,
    /// Companion transform `m_(z)`.
    pub u: Complex64,
    /// Stieltjes transform `m(z)` of `F^{c,H}`.
    pub m: Complex64,
    pub du_dz: Complex64,
}

/// `z(u) = -1/u + c int t/(1+tu) dH` and its derivative `dz/du`.
pub fn inverse_map(u: Complex64, c: f64, law: &DiscreteLaw) -> Result<(Complex64, Complex64)> {
    if u.norm() == 0.0 {
        return Err(Error::Pole(u));
    }
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut s2 = Complex64::new(0.0, 0.0);
    for &(t, w) in law.atoms() {
        let d = 1.0 + u * t;
        if d.norm() == 0.0 {
            return Err(Error::Pole(u));
        }
        let r = d.inv();
        s1 += r * (w * t);
        s2 += r * r * (w * t * t);
    }
    let inv_u = u.inv();
    Ok((-inv_u + s1 * c, inv_u * inv_u - s2 * c))
}

const MAX_ITERATIONS: usize = 500;
const NEWTON_SWITCH: f64 = 1e-3;
const DAMPING: f64 = 0.5;

/// Companion transform at `z` for the law `(c, H)`.
///
/// Damped fixed-point iteration on `u = -1 / (z - c int t/(1+tu) dH)` from
/// `u0 = -1/z`, switching to Newton on `z(u) - z` once the residual drops
/// below `1e-3`. A Newton step that leaves the correct half-plane falls back
/// to the fixed-point map.
pub fn solve_companion(z: Complex64, c: f64, law: &DiscreteLaw, tol: f64) -> Result<StieltjesValue> {
    if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidArgument(format!("z = {z} must be off the real axis")));
    }
    if !(tol > 1e-14 && tol < 1e-6) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} outside (1e-14, 1e-6)")));
    }
    if !(c >= 0.0) {
        return Err(Error::InvalidArgument(format!("aspect ratio {c} must be >= 0")));
    }
    let side = z.im.signum();
    let target = tol * (1.0 + z.norm());
    let fixed_point = |u: Complex64| -> Complex64 {
        let s: Complex64 = law.integrate(|t| (1.0 + u * t).inv() * t);
        -(z - s * c).inv()
    };

    let mut u = -z.inv();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let (zu, dz) = inverse_map(u, c, law)?;
        residual = (zu - z).norm();
        if residual <= target && u.im * side > 0.0 {
            let du_dz = dz.inv();
            let m = if c > 0.0 {
                (u + (1.0 - c) / z) / c
            } else {
                // F^{0,H} = H.
                law.integrate(|t| (t - z).inv())
            };
            return Ok(StieltjesValue { z, u, m, du_dz });
        }
        let newton = if residual < NEWTON_SWITCH && dz.norm() > 0.0 {
            let cand = u - (zu - z) / dz;
            (cand.im * side > 0.0 && cand.is_finite()).then_some(cand)
        } else {
            None
        };
        u = match newton {
            Some(cand) => cand,
            None => u * (1.0 - DAMPING) + fixed_point(u) * DAMPING,
        };
        if !u.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        z,
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Root of `z u^2 + (z + 1 - c) u + 1 = 0` with `Im u Im z > 0`, the null
/// (`H = delta_1`) companion transform.
pub fn companion_closed_form_null(z: Complex64, c: f64) -> Complex64 {
    let b = z + 1.0 - c;
    let disc = (b * b - z * 4.0).sqrt();
    // Pick the sign that avoids cancellation, then recover the partner root
    // from the product of roots 1/z.
    let q = if (b.conj() * disc).re >= 0.0 {
        -(b + disc) * 0.5
    } else {
        -(b - disc) * 0.5
    };
    let r1 = q / z;
    let r2 = q.inv();
    if r1.im * z.im > 0.0 {
        r1
    } else {
        r2
    }
}

/// Interval `[min t 1{c<1} (1 - sqrt c)^2, max t (1 + sqrt c)^2]` that holds
/// the support of `F^{c,H}`.
pub fn support_interval(c: f64, law: &DiscreteLaw) -> (f64, f64) {
    let sc = c.sqrt();
    let lo = if c < 1.0 {
        law.min_atom() * (1.0 - sc).powi(2)
    } else {
        0.0
    };
    (lo, law.max_atom() * (1.0 + sc).powi(2))
}
