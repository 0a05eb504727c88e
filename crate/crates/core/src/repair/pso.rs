//! Bounded particle swarm maximization.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoParams {
    pub swarm: usize,
    pub iters: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            swarm: 32,
            iters: 100,
            inertia: 0.73,
            c1: 1.49,
            c2: 1.49,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    /// Global-best fitness after initialization and after each iteration
    /// (`iters + 1` entries, non-decreasing).
    pub trace: Vec<f64>,
}

/// Maximizes `fitness` over the box `bounds` (one `(lo, hi)` per dimension).
pub fn pso_optimize<F>(fitness: F, bounds: &[(f64, f64)], params: &PsoParams, seed: u64) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pso_optimize_from(fitness, bounds, params, seed, None, &mut |_, _| {})
}

/// [`pso_optimize`] with particle 0 optionally placed at `start` and a
/// callback receiving `(iteration, global best)` after every iteration.
///
/// Velocities start at zero. Fitness calls within one iteration run in
/// parallel; best-position updates are applied afterwards in particle order,
/// so the result depends only on `seed`.
pub fn pso_optimize_from<F>(
    fitness: F,
    bounds: &[(f64, f64)],
    params: &PsoParams,
    seed: u64,
    start: Option<&[f64]>,
    on_iter: &mut dyn FnMut(usize, f64),
) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = bounds.len();
    if dim == 0 {
        return Err(Error::InvalidArgument("search space has no dimensions".into()));
    }
    if params.swarm == 0 {
        return Err(Error::InvalidArgument("swarm must hold at least one particle".into()));
    }
    if let Some(&(lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(Error::InvalidArgument(format!("invalid bounds [{lo}, {hi}]")));
    }
    if let Some(s) = start {
        if s.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "start point has {} dims, bounds {dim}",
                s.len()
            )));
        }
    }

    let mut rng = rng::seeded(seed);
    let mut pos: Vec<Vec<f64>> = (0..params.swarm)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo })
                .collect()
        })
        .collect();
    if let Some(s) = start {
        pos[0] = s.iter().zip(bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect();
    }
    let mut vel = vec![vec![0.0; dim]; params.swarm];

    let evaluate = |pos: &[Vec<f64>], iteration: usize| -> Result<Vec<f64>> {
        let scores: Vec<f64> = pos.par_iter().map(|p| fitness(p)).collect();
        match scores.iter().position(|s| !s.is_finite()) {
            Some(particle) => Err(Error::NonFiniteFitness { iteration, particle }),
            None => Ok(scores),
        }
    };

    let scores = evaluate(&pos, 0)?;
    let mut pbest = pos.clone();
    let mut pbest_fit = scores.clone();
    let mut g = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > pbest_fit[g] {
            g = i;
        }
    }
    let mut gbest = pbest[g].clone();
    let mut gbest_fit = pbest_fit[g];
    let mut trace = Vec::with_capacity(params.iters + 1);
    trace.push(gbest_fit);

    for it in 1..=params.iters {
        for (i, (x, v)) in pos.iter_mut().zip(vel.iter_mut()).enumerate() {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                v[d] = params.inertia * v[d]
                    + params.c1 * r1 * (pbest[i][d] - x[d])
                    + params.c2 * r2 * (gbest[d] - x[d]);
                x[d] = (x[d] + v[d]).clamp(bounds[d].0, bounds[d].1);
            }
        }
        let scores = evaluate(&pos, it)?;
        for (i, s) in scores.into_iter().enumerate() {
            if s > pbest_fit[i] {
                pbest_fit[i] = s;
                pbest[i].clone_from(&pos[i]);
                if s > gbest_fit {
                    gbest_fit = s;
                    gbest.clone_from(&pos[i]);
                }
            }
        }
        trace.push(gbest_fit);
        on_iter(it, gbest_fit);
    }
    Ok(PsoResult {
        best: gbest,
        best_fitness: gbest_fit,
        trace,
    })
}
