//! Box-constrained inertia-weight particle swarm optimization.
//!
//! All random draws come from one seeded stream consumed in particle order,
//! and the per-iteration best update is done sequentially in particle order,
//! so results do not depend on how the fitness evaluations are scheduled.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchSpace {
    /// `lower[d] == upper[d]` pins dimension `d`.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::validation(
                "bounds must be non-empty and of equal length",
            ));
        }
        for (d, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::validation(format!(
                    "dimension {d}: invalid bounds [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub n_particles: usize,
    pub max_iterations: usize,
    pub phi_p: f64,
    pub phi_g: f64,
    pub omega: f64,
    pub seed: u64,
    /// Zero disables the stagnation stop.
    pub stagnation_window: usize,
    pub stagnation_tol: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            n_particles: 50,
            max_iterations: 200,
            phi_p: 1.4962,
            phi_g: 1.4962,
            omega: 0.7298,
            seed: 0,
            stagnation_window: 25,
            stagnation_tol: 1e-8,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::validation("n_particles must be at least 2"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("max_iterations must be positive"));
        }
        if !(self.phi_p > 0.0 && self.phi_g > 0.0 && self.omega > 0.0) {
            return Err(Error::validation("PSO coefficients must be positive"));
        }
        if self.stagnation_tol.is_nan() || self.stagnation_tol < 0.0 {
            return Err(Error::validation("stagnation_tol must be non-negative"));
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Toml(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmResult {
    pub best_position: Vec<f64>,
    pub best_cost: f64,
    /// Global best cost after each iteration; the first entry is the initial swarm.
    pub cost_trace: Vec<f64>,
    pub iterations_run: usize,
    pub evaluations: usize,
}

impl SwarmResult {
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,best_cost")?;
        for (i, c) in self.cost_trace.iter().enumerate() {
            writeln!(w, "{i},{c}")?;
        }
        Ok(())
    }
}

fn evaluate<F>(cost_fn: &F, positions: &[Vec<f64>]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let costs: Vec<f64> = positions.par_iter().map(|x| cost_fn(x)).collect();
    if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFiniteCost {
            value: costs[i],
            position: positions[i].clone(),
        });
    }
    Ok(costs)
}

pub fn optimize<F>(cost_fn: F, space: &SearchSpace, config: &PsoConfig) -> Result<SwarmResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    optimize_observed(cost_fn, space, config, |_, _| {})
}

/// Like [`optimize`], calling `observer(iteration, positions)` after every evaluation round.
pub fn optimize_observed<F, O>(
    cost_fn: F,
    space: &SearchSpace,
    config: &PsoConfig,
    mut observer: O,
) -> Result<SwarmResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
    O: FnMut(usize, &[Vec<f64>]),
{
    config.validate()?;
    let dim = space.dim();
    let n = config.n_particles;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut positions: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut velocities: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = Vec::with_capacity(dim);
        let mut v = Vec::with_capacity(dim);
        for d in 0..dim {
            let (lo, hi) = (space.lower[d], space.upper[d]);
            let range = hi - lo;
            x.push((lo + rng.random::<f64>() * range).min(hi));
            v.push((2.0 * rng.random::<f64>() - 1.0) * 0.1 * range);
        }
        positions.push(x);
        velocities.push(v);
    }

    let costs = evaluate(&cost_fn, &positions)?;
    observer(0, &positions);
    let mut pbest = positions.clone();
    let mut pbest_cost = costs.clone();
    let mut g = 0;
    for i in 1..n {
        if costs[i] < costs[g] {
            g = i;
        }
    }
    let mut gbest = positions[g].clone();
    let mut gbest_cost = costs[g];
    let mut trace = vec![gbest_cost];

    while trace.len() < config.max_iterations {
        let w = config.stagnation_window;
        if w > 0
            && trace.len() > w
            && trace[trace.len() - 1 - w] - gbest_cost < config.stagnation_tol
        {
            break;
        }
        for (p, (x, v)) in positions.iter_mut().zip(velocities.iter_mut()).enumerate() {
            for d in 0..dim {
                let rp: f64 = rng.random();
                let rg: f64 = rng.random();
                v[d] = config.omega * v[d]
                    + config.phi_p * rp * (pbest[p][d] - x[d])
                    + config.phi_g * rg * (gbest[d] - x[d]);
                x[d] += v[d];
                if x[d] < space.lower[d] {
                    x[d] = space.lower[d];
                    v[d] = 0.0;
                } else if x[d] > space.upper[d] {
                    x[d] = space.upper[d];
                    v[d] = 0.0;
                }
            }
        }
        let costs = evaluate(&cost_fn, &positions)?;
        observer(trace.len(), &positions);
        for (p, &c) in costs.iter().enumerate() {
            if c < pbest_cost[p] {
                pbest_cost[p] = c;
                pbest[p].clone_from(&positions[p]);
            }
            if c < gbest_cost {
                gbest_cost = c;
                gbest.clone_from(&positions[p]);
            }
        }
        trace.push(gbest_cost);
    }

    let iterations_run = trace.len();
    Ok(SwarmResult {
        best_position: gbest,
        best_cost: gbest_cost,
        cost_trace: trace,
        iterations_run,
        evaluations: n * iterations_run,
    })
}
