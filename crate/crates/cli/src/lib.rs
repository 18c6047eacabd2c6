//! Experiment runner behind the `catforge` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod config;
pub mod experiments;

use std::time::Instant;

use artifact::{CheckResult, Outcome};
use config::ExperimentConfig;

/// A finished run, checks applied.
pub struct Report {
    pub outcome: Outcome,
    pub checks: Vec<CheckResult>,
    pub dims_bump: usize,
    pub wall_time_s: f64,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn execute(cfg: &ExperimentConfig, extra_bump: usize) -> anyhow::Result<Report> {
    let start = Instant::now();
    let ctx = experiments::Ctx::new(cfg.numerics.clone(), extra_bump);
    let outcome = experiments::run(&cfg.experiment, &ctx)?;
    let checks = artifact::evaluate(&cfg.checks, &outcome.scalars);
    Ok(Report { outcome, checks, dims_bump: ctx.dims_bump, wall_time_s: start.elapsed().as_secs_f64() })
}
