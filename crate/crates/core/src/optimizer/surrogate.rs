//! Inverse-distance-weighted surrogate with a distance exploration bonus.
//!
//! For a candidate `x` and evaluated points `x_i` with scalar values `y_i`:
//!
//! ```text
//! w_i  = 1 / (d(x, x_i)^2 + 1e-9)
//! mu   = sum(w_i * y_i) / sum(w_i)
//! A(x) = mu - lambda * min_i d(x, x_i)
//! ```
//!
//! The suggestion is the pool candidate with the smallest `A`, the earliest
//! one on ties.

use std::collections::HashSet;

use super::space::{grid_point, grid_size, sample_random, Distance, Point};
use crate::rational::{to_f64, Rational};
use crate::rng::SplitMix64;
use crate::spec::ParameterSpace;

pub const DEFAULT_POOL_SIZE: usize = 64;
pub const EPSILON: f64 = 1e-9;

/// Finite spaces up to this size are enumerated when building pools, so
/// candidates are drawn without replacement from the unevaluated points.
pub const ENUMERATION_LIMIT: u64 = 100_000;

const REJECTION_ATTEMPTS_PER_SLOT: usize = 64;

pub fn default_lambda() -> Rational {
    Rational::new(1, 2)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SuggestError {
    #[error("ExhaustedSpace: every point has been evaluated")]
    ExhaustedSpace,
}

/// IDW prediction and distance to the nearest evaluated point.
pub fn idw_predict(distance: &Distance, history: &[(Point, f64)], x: &[crate::spec::ParamValue]) -> (f64, f64) {
    let (mut num, mut den, mut dmin_sq) = (0.0, 0.0, f64::INFINITY);
    for (xi, yi) in history {
        let d2 = distance.distance_sq(x, xi);
        let w = 1.0 / (d2 + EPSILON);
        num += w * yi;
        den += w;
        dmin_sq = dmin_sq.min(d2);
    }
    (num / den, dmin_sq.sqrt())
}

/// Acquisition value of every candidate of an explicit pool.
pub fn score_pool(space: &ParameterSpace, history: &[(Point, f64)], pool: &[Point], lambda: f64) -> Vec<f64> {
    let distance = Distance::new(space);
    pool.iter()
        .map(|x| {
            let (mu, dmin) = idw_predict(&distance, history, x);
            mu - lambda * dmin
        })
        .collect()
}

/// Index of the smallest score, first one on ties.
pub fn argmin(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Up to `size` distinct points not in `seen`, uniformly chosen.
pub fn candidate_pool(
    space: &ParameterSpace,
    seen: &HashSet<&Point>,
    size: usize,
    rng: &mut SplitMix64,
) -> Result<Vec<Point>, SuggestError> {
    match grid_size(space) {
        Some(total) if total <= ENUMERATION_LIMIT => {
            let mut remaining: Vec<Point> = (0..total)
                .map(|i| grid_point(space, i))
                .filter(|p| !seen.contains(p))
                .collect();
            if remaining.is_empty() {
                return Err(SuggestError::ExhaustedSpace);
            }
            if remaining.len() > size {
                // Partial Fisher-Yates: the first `size` slots become a
                // uniform sample without replacement.
                for i in 0..size {
                    let j = i + rng.below((remaining.len() - i) as u64) as usize;
                    remaining.swap(i, j);
                }
                remaining.truncate(size);
            }
            Ok(remaining)
        }
        _ => {
            let mut pool: Vec<Point> = Vec::with_capacity(size);
            for _ in 0..size * REJECTION_ATTEMPTS_PER_SLOT {
                if pool.len() == size {
                    break;
                }
                let p = sample_random(space, 1, rng).remove(0);
                if !seen.contains(&p) && !pool.contains(&p) {
                    pool.push(p);
                }
            }
            if pool.is_empty() {
                Err(SuggestError::ExhaustedSpace)
            } else {
                Ok(pool)
            }
        }
    }
}

/// Next point to evaluate. `history` holds evaluated points with their
/// scalarized values (lower is better); `pending` points are excluded from
/// the pool without contributing to the prediction. With fewer than two
/// observations the suggestion is a uniformly random unevaluated point.
pub fn surrogate_suggest(
    space: &ParameterSpace,
    history: &[(Point, Rational)],
    pending: &[Point],
    rng: &mut SplitMix64,
    pool_size: usize,
    lambda: &Rational,
) -> Result<Point, SuggestError> {
    let seen: HashSet<&Point> = history.iter().map(|(p, _)| p).chain(pending).collect();
    if history.len() < 2 {
        return Ok(candidate_pool(space, &seen, 1, rng)?.remove(0));
    }
    let pool = candidate_pool(space, &seen, pool_size.max(1), rng)?;
    let observed: Vec<(Point, f64)> = history.iter().map(|(p, y)| (p.clone(), to_f64(y))).collect();
    let scores = score_pool(space, &observed, &pool, to_f64(lambda));
    let best = argmin(&scores).expect("pool is non-empty");
    Ok(pool.into_iter().nth(best).expect("index in pool"))
}
