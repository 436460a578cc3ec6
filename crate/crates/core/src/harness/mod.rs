//! Monte Carlo experiments, the validation suite and their plumbing.
//!
//! Replicate `r` of an experiment draws from `SeedSpec(master, id, r)` and
//! results are collected in replicate order, so tables do not depend on the
//! number of worker threads.

mod config;
mod experiments;
pub mod svg;
mod table;
mod validate;

pub use config::{AlternativeSpec, ExperimentConfig, ExperimentKind, ModelEntry, NRule, PhaseSpec};
pub use experiments::{
    empirical_critical_value, john_draw, loglog_slope, phase_model, poisson_spike_check, run_phase, run_power,
    run_replicates, run_size, sphere_fourth_moment, summarize_phase, JohnDraw, PhaseSummary, PoissonCheck, FULL_REPS,
    METHODS,
};
pub use table::{ResultRow, ResultTable, CSV_HEADER};
pub use validate::{
    calibration_errors, calibration_gammas, corr_boundary_check, mp_closed_form_check, mp_round_trip_check,
    quadform_errors, rectangle_points, residue_errors, run_validate, two_block_params, CalibrationErrors, CorrBoundary,
    QuadformErrors, ValidateOptions, ValidationCheck,
};

use crate::{Error, Result};

/// Run `f` on a dedicated pool with `threads` workers (all cores if `None`).
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::InvalidConfig("threads must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
