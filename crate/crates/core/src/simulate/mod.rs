//! Monte Carlo paths of the process on a time grid, and diagnostics on them.
//!
//! Every uniform draw comes from a ChaCha8 stream keyed by the seed and the
//! path index, at a word position fixed by the step index, so an ensemble
//! does not depend on how paths are spread over threads.

mod analysis;
mod sampler;

use std::io::Write;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SmprError};
use crate::format::sig17;
use crate::kernels::TransitionKernel;

pub use analysis::{
    default_lags, empirical_increment_moments, exact_increment_moments, holder_estimate, pairwise_sum,
    reversibility_check, scaling_slope, stationarity_check, HolderEstimate, MomentSeries, ReversibilityReport,
    SliceMoments, SlopeFit, SlopeReport, StationarityReport, MIN_SLOPE_LAGS,
};
pub use sampler::{transition_sample, Sampler, TransitionTable, DEFAULT_GRID, MAX_CLIPPED, MIN_GRID, WINDOW_SDS};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "SMPR_THREADS";

/// Settings of a simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub kernel: TransitionKernel,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// Cells of the tabulated transition CDF.
    pub grid: usize,
    /// Worker threads; `None` reads `SMPR_THREADS`, then falls back to the rayon default.
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(kernel: TransitionKernel, horizon: f64, dt: f64, paths: usize, seed: u64) -> Self {
        SimConfig { kernel, horizon, dt, paths, seed, grid: DEFAULT_GRID, threads: None }
    }

    /// Number of steps, `round(horizon / dt)`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SmprError::InvalidParameter(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(SmprError::InvalidParameter(format!("horizon must be nonnegative, got {}", self.horizon)));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(SmprError::InvalidParameter(format!(
                "horizon {} is not a multiple of the step {}",
                self.horizon, self.dt
            )));
        }
        if self.paths == 0 {
            return Err(SmprError::InvalidParameter("at least one path is required".into()));
        }
        if self.grid < MIN_GRID {
            return Err(SmprError::InvalidParameter(format!("CDF grid must have at least {MIN_GRID} cells")));
        }
        if self.threads == Some(0) {
            return Err(SmprError::InvalidParameter("thread count must be positive".into()));
        }
        Ok(())
    }

    fn thread_count(&self) -> Result<Option<usize>> {
        if let Some(n) = self.threads {
            return Ok(Some(n));
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(SmprError::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
            },
            Err(_) => Ok(None),
        }
    }
}

/// Simulated paths: `states[p][s]` is path `p` at time `s · dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEnsemble {
    pub states: Vec<Vec<f64>>,
    /// ChaCha8 stream of each path.
    pub streams: Vec<u64>,
    pub seed: u64,
    pub dt: f64,
    pub steps: usize,
    pub grid: usize,
    /// Largest clipped negative mass fraction met while sampling.
    pub max_clipped: f64,
}

impl PathEnsemble {
    pub fn paths(&self) -> usize {
        self.states.len()
    }

    /// Writes `path,step,time,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "path,step,time,value")?;
        for (p, row) in self.states.iter().enumerate() {
            for (s, x) in row.iter().enumerate() {
                writeln!(out, "{p},{s},{},{}", sig17(s as f64 * self.dt), sig17(*x))?;
            }
        }
        Ok(())
    }
}

/// Uniform draw in (0, 1) for `(seed, path, step)`.
pub fn uniform(seed: u64, path: u64, step: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng.set_word_pos(2 * step as u128);
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn simulate_one(cfg: &SimConfig, sampler: &Sampler<'_>, path: usize, steps: usize) -> Result<(Vec<f64>, f64)> {
    let tag = |step: usize| move |e: SmprError| SmprError::Path { path, step, source: Box::new(e) };
    let spec = cfg.kernel.spec();
    let mut states = Vec::with_capacity(steps + 1);
    let x0 = spec.quantile(uniform(cfg.seed, path as u64, 0));
    if !x0.is_finite() {
        return Err(tag(0)(SmprError::Domain(format!("stationary draw {x0} is not finite"))));
    }
    states.push(x0);
    let mut clipped = 0.0f64;
    let mut x = x0;
    for step in 1..=steps {
        let table = sampler.table(x, cfg.dt).map_err(tag(step))?;
        clipped = clipped.max(table.clipped);
        x = table.invert(uniform(cfg.seed, path as u64, step as u64)).map_err(tag(step))?;
        states.push(x);
    }
    Ok((states, clipped))
}

/// Simulates `paths` independent paths on `0, dt, ..., horizon`, each
/// started from the stationary law.
pub fn simulate_paths(cfg: &SimConfig) -> Result<PathEnsemble> {
    cfg.validate()?;
    let steps = cfg.steps();
    let sampler = Sampler::new(&cfg.kernel, cfg.grid)?;
    let run = || -> Vec<Result<(Vec<f64>, f64)>> {
        (0..cfg.paths).into_par_iter().map(|p| simulate_one(cfg, &sampler, p, steps)).collect()
    };
    let results = match cfg.thread_count()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SmprError::InvalidParameter(format!("cannot start {n} worker threads: {e}")))?
            .install(run),
        None => run(),
    };
    let mut states = Vec::with_capacity(cfg.paths);
    let mut max_clipped = 0.0f64;
    for r in results {
        let (row, c) = r?;
        max_clipped = max_clipped.max(c);
        states.push(row);
    }
    Ok(PathEnsemble {
        states,
        streams: (0..cfg.paths as u64).collect(),
        seed: cfg.seed,
        dt: cfg.dt,
        steps,
        grid: cfg.grid,
        max_clipped,
    })
}

#[cfg(test)]
mod tests;
