//! Data-generating processes.
//!
//! The main model is the blockwise mixed radial model: the coordinates of an
//! observation are split into consecutive blocks, each block carries iid
//! standardized coordinates of its own law, and each block is scaled by its
//! own radial variable `rho_j` with `E rho_j^2 = 1` and
//! `Var(rho_j^2) = tau_j p^(-delta_j)`. The population covariance is diagonal.
//!
//! All generators are pure functions of a [`SeedSpec`].

mod seed;

pub use seed::{fnv1a64, splitmix64, SeedSpec, StreamRng};

use faer::Mat;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Law of the standardized coordinates within a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Gaussian,
    Rademacher,
    /// Student t with `df > 4` degrees of freedom, rescaled to unit variance.
    StudentT {
        df: f64,
    },
}

impl Direction {
    /// Fourth cumulant `E x^4 - 3` of the standardized coordinate.
    pub fn nu4(&self) -> f64 {
        match *self {
            Direction::Gaussian => 0.0,
            Direction::Rademacher => -2.0,
            Direction::StudentT { df } => 6.0 / (df - 4.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Direction::StudentT { df } if !(df > 4.0) => Err(Error::InvalidConfig(format!(
                "student_t needs df > 4 for a finite fourth moment, got {df}"
            ))),
            _ => Ok(()),
        }
    }

    /// Fill `out` with iid standardized draws.
    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            Direction::Gaussian => {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
            }
            Direction::Rademacher => {
                for chunk in out.chunks_mut(64) {
                    let bits = rng.next_u64();
                    for (k, v) in chunk.iter_mut().enumerate() {
                        *v = if (bits >> k) & 1 == 1 { 1.0 } else { -1.0 };
                    }
                }
            }
            Direction::StudentT { df } => {
                let t = StudentT::new(df).expect("df validated");
                let scale = ((df - 2.0) / df).sqrt();
                for v in out.iter_mut() {
                    *v = scale * t.sample(rng);
                }
            }
        }
    }
}

fn default_alpha() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    1.0
}

fn default_sigma2() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    /// Share of the dimension taken by this block.
    pub ratio: f64,
    pub direction: Direction,
    /// Radial variance coefficient.
    #[serde(default)]
    pub tau: f64,
    /// Radial decay exponent.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Block growth exponent, only read by the phase diagnostics.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl BlockSpec {
    pub fn new(ratio: f64, direction: Direction, tau: f64, delta: f64) -> Self {
        Self {
            ratio,
            direction,
            tau,
            delta,
            alpha: 1.0,
        }
    }

    /// Half-width `sqrt(3 tau) p^(-delta/2)` of the uniform radial law of `rho^2`.
    pub fn radial_halfwidth(&self, p: usize) -> f64 {
        (3.0 * self.tau).sqrt() * (p as f64).powf(-self.delta / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModelConfig {
    pub p: usize,
    pub n: usize,
    pub blocks: Vec<BlockSpec>,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    /// Diagonal of the population covariance (before `sigma2`); identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_diag: Option<Vec<f64>>,
}

impl BlockModelConfig {
    pub fn new(p: usize, n: usize, blocks: Vec<BlockSpec>) -> Self {
        Self {
            p,
            n,
            blocks,
            sigma2: 1.0,
            sigma_diag: None,
        }
    }

    /// One of the six reference models `M1`..`M6`.
    pub fn preset(name: &str, p: usize, n: usize) -> Option<Self> {
        use Direction::*;
        let t8 = StudentT { df: 8.0 };
        let blocks = match name {
            "M1" => vec![BlockSpec::new(1.0, Gaussian, 0.0, 1.0)],
            "M2" => vec![BlockSpec::new(1.0, Rademacher, 0.0, 1.0)],
            "M3" => vec![
                BlockSpec::new(0.4, Gaussian, 0.8, 1.0),
                BlockSpec::new(0.6, Gaussian, 1.2, 0.8),
            ],
            "M4" => vec![
                BlockSpec::new(0.2, Gaussian, 1.0, 1.0),
                BlockSpec::new(0.8, Gaussian, 2.0, 0.6),
            ],
            "M5" => vec![BlockSpec::new(0.2, t8, 1.0, 1.0), BlockSpec::new(0.8, t8, 2.0, 0.6)],
            "M6" => vec![
                BlockSpec::new(0.1, Rademacher, 0.8, 1.2),
                BlockSpec::new(0.2, Rademacher, 1.5, 0.9),
                BlockSpec::new(0.7, Rademacher, 2.2, 0.6),
            ],
            _ => return None,
        };
        Some(Self::new(p, n, blocks))
    }

    pub const PRESETS: [&'static str; 6] = ["M1", "M2", "M3", "M4", "M5", "M6"];

    pub fn c_n(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// Block sizes `round(ratio_k p)`, the last block taking the remainder.
    pub fn block_sizes(&self) -> Result<Vec<usize>> {
        let mut sizes = Vec::with_capacity(self.blocks.len());
        let mut used = 0usize;
        for (k, b) in self.blocks.iter().enumerate() {
            let size = if k + 1 == self.blocks.len() {
                self.p.saturating_sub(used)
            } else {
                (b.ratio * self.p as f64).round() as usize
            };
            if size == 0 || used + size > self.p {
                return Err(Error::InvalidConfig(format!(
                    "block {k} gets {size} of p = {} coordinates",
                    self.p
                )));
            }
            used += size;
            sizes.push(size);
        }
        Ok(sizes)
    }

    /// Diagonal of the population covariance `Sigma_n`.
    pub fn population_diag(&self) -> Vec<f64> {
        match &self.sigma_diag {
            Some(d) => d.iter().map(|v| self.sigma2 * v).collect(),
            None => vec![self.sigma2; self.p],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("p and n must be positive".into()));
        }
        if self.blocks.is_empty() {
            return Err(Error::InvalidConfig("at least one block is required".into()));
        }
        let total: f64 = self.blocks.iter().map(|b| b.ratio).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("block ratios sum to {total}, expected 1")));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if !(b.ratio > 0.0 && b.ratio <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "block {k} ratio {} not in (0,1]",
                    b.ratio
                )));
            }
            if !(b.tau >= 0.0) || !(b.delta > 0.0) || !(0.0..=1.0).contains(&b.alpha) {
                return Err(Error::InvalidConfig(format!(
                    "block {k}: need tau >= 0, delta > 0, alpha in [0,1]"
                )));
            }
            b.direction.validate()?;
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::InvalidConfig("sigma2 must be positive".into()));
        }
        if let Some(d) = &self.sigma_diag {
            if d.len() != self.p || d.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidConfig(
                    "sigma_diag must have length p with finite nonnegative entries".into(),
                ));
            }
        }
        self.block_sizes()?;
        for (k, b) in self.blocks.iter().enumerate() {
            let scale = b.radial_halfwidth(self.p);
            if scale >= 1.0 {
                return Err(Error::RadialOutOfRange { block: k, scale });
            }
        }
        Ok(())
    }
}

/// Draw a `p x n` sample from the blockwise mixed radial model.
///
/// Column `i` is `Sigma^{1/2} (rho_1 w_1, ..., rho_B w_B)` where
/// `rho_j^2 = 1 + sqrt(3 tau_j) p^(-delta_j/2) U` with `U ~ Uniform[-1, 1]`
/// drawn once per observation and block. The population diagonal only
/// rescales rows, so configs differing only in `sigma_diag` consume the
/// random stream identically.
pub fn sample_block_dataset(cfg: &BlockModelConfig, seed: &SeedSpec) -> Result<Mat<f64>> {
    cfg.validate()?;
    let sizes = cfg.block_sizes()?;
    let scales: Vec<f64> = cfg.population_diag().iter().map(|v| v.sqrt()).collect();
    let halfwidths: Vec<f64> = cfg.blocks.iter().map(|b| b.radial_halfwidth(cfg.p)).collect();

    let mut rng = seed.rng();
    let mut x = Mat::<f64>::zeros(cfg.p, cfg.n);
    for i in 0..cfg.n {
        let col = x
            .col_mut(i)
            .try_as_col_major_mut()
            .expect("owned matrix is column major");
        let col = col.as_slice_mut();
        let mut start = 0;
        for ((block, &size), &h) in cfg.blocks.iter().zip(&sizes).zip(&halfwidths) {
            let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
            let rho = (1.0 + h * u).sqrt();
            let seg = &mut col[start..start + size];
            block.direction.fill(&mut rng, seg);
            for (v, s) in seg.iter_mut().zip(&scales[start..start + size]) {
                *v *= rho * s;
            }
            start += size;
        }
    }
    Ok(x)
}

/// Output of [`sample_spike_dataset`].
#[derive(Debug, Clone)]
pub struct SpikeDataset {
    pub x: Mat<f64>,
    /// Spike probability `lambda / (p n)`.
    pub q: f64,
    /// Squared bulk amplitude `(1 - q n) / (1 - q)`.
    pub b2: f64,
}

/// Parameters `(q, b^2)` of the sparse-spike entry law.
pub fn spike_parameters(p: usize, n: usize, lambda: f64) -> Result<(f64, f64)> {
    if n < 2 || p == 0 || !(lambda > 0.0) {
        return Err(Error::InvalidArgument(
            "spike model needs p >= 1, n >= 2, lambda > 0".into(),
        ));
    }
    let q = lambda / (p as f64 * n as f64);
    if q * n as f64 >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "q n = {} >= 1 leaves no mass for the bulk",
            q * n as f64
        )));
    }
    Ok((q, (1.0 - q * n as f64) / (1.0 - q)))
}

/// Entries iid with `P(+-sqrt n) = q/2`, `P(+-b) = (1-q)/2`, `E r^2 = 1`.
pub fn sample_spike_dataset(p: usize, n: usize, lambda: f64, seed: &SeedSpec) -> Result<SpikeDataset> {
    let (q, b2) = spike_parameters(p, n, lambda)?;
    let spike = (n as f64).sqrt();
    let bulk = b2.sqrt();
    let mut rng = seed.rng();
    let x = Mat::<f64>::from_fn(p, n, |_, _| {
        let bits = rng.next_u64();
        let uniform = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let magnitude = if uniform < q { spike } else { bulk };
        if bits & 1 == 1 {
            magnitude
        } else {
            -magnitude
        }
    });
    Ok(SpikeDataset { x, q, b2 })
}

/// `count` independent points uniform on the unit sphere of `R^n`, one per column.
pub fn sample_sphere_rows(n: usize, count: usize, seed: &SeedSpec) -> Result<Mat<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument("sphere rows need n >= 2".into()));
    }
    let mut rng = seed.rng();
    let mut y = Mat::<f64>::zeros(n, count);
    for j in 0..count {
        let col = y
            .col_mut(j)
            .try_as_col_major_mut()
            .expect("owned matrix is column major");
        let col = col.as_slice_mut();
        loop {
            Direction::Gaussian.fill(&mut rng, col);
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                col.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        }
    }
    Ok(y)
}

/// `diag(a, ..., a, 1, ..., 1)` with `floor(fraction p)` leading entries equal to `a`.
pub fn alternative_sigma_diag(p: usize, fraction: f64, a: f64) -> Vec<f64> {
    let k = ((fraction * p as f64).floor() as usize).min(p);
    (0..p).map(|i| if i < k { a } else { 1.0 }).collect()
}
