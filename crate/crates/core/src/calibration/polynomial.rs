use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Highest degree accepted anywhere in the crate.
pub const MAX_DEGREE: usize = 8;

/// Real polynomial `sum_k coeffs[k] x^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite polynomial coefficient".into()));
        }
        if coeffs.len() - 1 > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "degree {} exceeds {MAX_DEGREE}",
                coeffs.len() - 1
            )));
        }
        Ok(Self { coeffs })
    }

    /// `x^k`.
    pub fn monomial(k: usize) -> Self {
        assert!(k <= MAX_DEGREE, "degree {k} exceeds {MAX_DEGREE}");
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// The same polynomial with its constant term removed.
    pub fn without_constant(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] = 0.0;
        Self { coeffs }
    }
}

/// Accepts `x`, `x2`, `x^3`, `1` or a comma-separated coefficient list
/// starting with the constant term, e.g. `0,1,1` for `x + x^2`.
impl FromStr for Polynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains(',') {
            let coeffs = s
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("bad coefficient {c:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::new(coeffs);
        }
        if s == "1" {
            return Ok(Self::monomial(0));
        }
        let rest = s
            .strip_prefix('x')
            .ok_or_else(|| Error::InvalidArgument(format!("unknown test function {s:?}")))?;
        let rest = rest.strip_prefix('^').unwrap_or(rest);
        let k = if rest.is_empty() {
            1
        } else {
            rest.parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("unknown test function {s:?}")))?
        };
        if k > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!("degree {k} exceeds {MAX_DEGREE}")));
        }
        Ok(Self::monomial(k))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 && self.coeffs.len() > 1 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 if c == 1.0 => write!(f, "x")?,
                1 => write!(f, "{c}x")?,
                _ if c == 1.0 => write!(f, "x^{k}")?,
                _ => write!(f, "{c}x^{k}")?,
            }
        }
        Ok(())
    }
}
