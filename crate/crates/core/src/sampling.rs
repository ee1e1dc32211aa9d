//! Box domains and deterministic sampling plans.
//!
//! Verification over open sets is done empirically: a uniform grid, then
//! Latin-hypercube batches, then a zoom search around the worst samples.
//! All randomness comes from a seeded ChaCha stream and evaluation order
//! never affects results.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "box bounds".into(),
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::InvalidParameter(format!(
                    "box side {i} is [{l}, {u}]"
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Grows every side by `fraction` of its width.
    pub fn inflate(&self, fraction: f64) -> BoxDomain {
        let (mut lower, mut upper) = (self.lower.clone(), self.upper.clone());
        for i in 0..self.dim() {
            let pad = fraction * self.width(i);
            lower[i] -= pad;
            upper[i] += pad;
        }
        BoxDomain { lower, upper }
    }

    /// Sub-box of the given full widths centred at `center`, clipped to `self`.
    pub fn zoom(&self, center: &[f64], widths: &[f64]) -> BoxDomain {
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let half = 0.5 * widths[i];
            lower.push((center[i] - half).max(self.lower[i]));
            upper.push((center[i] + half).min(self.upper[i]));
        }
        BoxDomain { lower, upper }
    }

    /// `per_dim^dim` points evenly spaced including the faces.
    pub fn grid(&self, per_dim: usize) -> Vec<Vec<f64>> {
        if per_dim == 0 || self.dim() == 0 {
            return Vec::new();
        }
        let d = self.dim();
        let total = per_dim.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                (0..d)
                    .map(|i| {
                        let k = idx % per_dim;
                        idx /= per_dim;
                        if per_dim == 1 {
                            0.5 * (self.lower[i] + self.upper[i])
                        } else {
                            self.lower[i] + self.width(i) * k as f64 / (per_dim - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Latin-hypercube sample of `count` points.
    pub fn latin_hypercube<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut points = vec![vec![0.0; d]; count];
        let mut strata: Vec<usize> = (0..count).collect();
        for i in 0..d {
            strata.shuffle(rng);
            for (p, &s) in points.iter_mut().zip(&strata) {
                let t = (s as f64 + rng.random::<f64>()) / count as f64;
                p[i] = self.lower[i] + t * self.width(i);
            }
        }
        points
    }
}

/// How a domain is explored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub domain: BoxDomain,
    /// Grid points per axis (0 disables the grid).
    pub grid_per_dim: usize,
    /// Points per Latin-hypercube batch.
    pub lhs_samples: usize,
    /// Keep drawing batches until this many samples are accepted.
    pub min_accepted: usize,
    pub max_batches: usize,
    /// Number of distinct worst samples to refine around.
    pub refine_seeds: usize,
    pub refine_rounds: usize,
    pub refine_samples: usize,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(domain: BoxDomain, seed: u64) -> Self {
        SamplingPlan {
            domain,
            grid_per_dim: 0,
            lhs_samples: 1000,
            min_accepted: 0,
            max_batches: 200,
            refine_seeds: 4,
            refine_rounds: 40,
            refine_samples: 32,
            seed,
        }
    }

    pub fn with_grid(mut self, per_dim: usize) -> Self {
        self.grid_per_dim = per_dim;
        self
    }

    pub fn with_lhs(mut self, samples: usize) -> Self {
        self.lhs_samples = samples;
        self
    }

    /// Draw batches until `count` samples have been accepted.
    pub fn with_max_batches(mut self, batches: usize) -> Self {
        self.max_batches = batches;
        self
    }

    pub fn with_min_accepted(mut self, count: usize) -> Self {
        self.min_accepted = count;
        self
    }

    pub fn with_refinement(mut self, seeds: usize, rounds: usize, samples: usize) -> Self {
        self.refine_seeds = seeds;
        self.refine_rounds = rounds;
        self.refine_samples = samples;
        self
    }
}

/// One accepted evaluation. Lower scores are worse.
#[derive(Clone, Debug)]
pub struct Sample<T> {
    pub point: Vec<f64>,
    pub score: f64,
    pub payload: T,
}

fn evaluate<T, F>(points: Vec<Vec<f64>>, eval: &F) -> Vec<Sample<T>>
where
    T: Send,
    F: Fn(&[f64]) -> Option<(f64, T)> + Sync,
{
    points
        .into_par_iter()
        .filter_map(|p| {
            eval(&p).map(|(score, payload)| Sample {
                point: p,
                score,
                payload,
            })
        })
        .collect()
}

fn normalized_distance(domain: &BoxDomain, a: &[f64], b: &[f64]) -> f64 {
    (0..domain.dim())
        .map(|i| {
            let w = domain.width(i);
            if w > 0.0 {
                ((a[i] - b[i]) / w).powi(2)
            } else {
                0.0
            }
        })
        .sum::<f64>()
        .sqrt()
}

/// Runs `plan`, returning every accepted sample.
///
/// `eval` returns `None` for points outside the region of interest and
/// otherwise a score (lower is worse) plus a payload.
pub fn explore<T, F>(plan: &SamplingPlan, eval: F) -> Vec<Sample<T>>
where
    T: Send,
    F: Fn(&[f64]) -> Option<(f64, T)> + Sync,
{
    let domain = &plan.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut samples = evaluate(domain.grid(plan.grid_per_dim), &eval);

    if plan.lhs_samples > 0 {
        let mut batches = 0;
        loop {
            let batch = domain.latin_hypercube(plan.lhs_samples, &mut rng);
            samples.extend(evaluate(batch, &eval));
            batches += 1;
            if samples.len() >= plan.min_accepted || batches >= plan.max_batches.max(1) {
                break;
            }
        }
    }

    if plan.refine_seeds == 0 || plan.refine_rounds == 0 || samples.is_empty() {
        return samples;
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].score.total_cmp(&samples[b].score).then(a.cmp(&b)));
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for &i in &order {
        let p = &samples[i].point;
        if starts
            .iter()
            .all(|s| normalized_distance(domain, s, p) > 0.1)
        {
            starts.push(p.clone());
            if starts.len() == plan.refine_seeds {
                break;
            }
        }
    }

    for start in starts {
        let mut best = start;
        let mut best_score = f64::INFINITY;
        let mut widths: Vec<f64> = (0..domain.dim()).map(|i| 0.1 * domain.width(i)).collect();
        for _ in 0..plan.refine_rounds {
            let local = domain.zoom(&best, &widths);
            let found = evaluate(local.latin_hypercube(plan.refine_samples, &mut rng), &eval);
            for s in &found {
                if s.score < best_score {
                    best_score = s.score;
                    best = s.point.clone();
                }
            }
            samples.extend(found);
            widths.iter_mut().for_each(|w| *w *= 0.5);
        }
    }
    samples
}

/// Keeps items in order, dropping any whose point lies within
/// `min_distance` (normalized by the domain widths) of one already kept.
pub fn spread<T>(
    domain: &BoxDomain,
    items: Vec<T>,
    point: impl Fn(&T) -> &[f64],
    min_distance: f64,
    limit: usize,
) -> Vec<T> {
    let mut kept: Vec<T> = Vec::new();
    for item in items {
        if kept.len() == limit {
            break;
        }
        let p = point(&item);
        if kept
            .iter()
            .all(|k| normalized_distance(domain, point(k), p) > min_distance)
        {
            kept.push(item);
        }
    }
    kept
}
