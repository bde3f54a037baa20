//! Points of a parameter space: enumeration, sampling and distances.

use crate::rational::{to_f64, Rational};
use crate::rng::SplitMix64;
use crate::spec::{Domain, ParamValue, ParameterSpace};

/// One value per dimension, in dimension order.
pub type Point = Vec<ParamValue>;

/// Grids larger than this are refused rather than materialized.
pub const MAX_GRID_POINTS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("ContinuousDimension({0})")]
    ContinuousDimension(String),
    #[error("grid has more than {MAX_GRID_POINTS} points")]
    GridTooLarge,
}

/// Number of points when every dimension is finite.
pub fn grid_size(space: &ParameterSpace) -> Option<u64> {
    space
        .dimensions
        .iter()
        .try_fold(1u64, |acc, d| acc.checked_mul(d.domain.cardinality()?))
}

/// Full Cartesian product; the last dimension varies fastest.
pub fn enumerate_grid(space: &ParameterSpace) -> Result<Vec<Point>, SpaceError> {
    if let Some(d) = space.dimensions.iter().find(|d| d.domain.cardinality().is_none()) {
        return Err(SpaceError::ContinuousDimension(d.name.clone()));
    }
    let total = grid_size(space)
        .filter(|n| *n <= MAX_GRID_POINTS)
        .ok_or(SpaceError::GridTooLarge)?;
    Ok((0..total).map(|i| grid_point(space, i)).collect())
}

/// The `index`-th point of the lexicographic grid order.
pub fn grid_point(space: &ParameterSpace, mut index: u64) -> Point {
    let mut point = vec![ParamValue::Int(0); space.dimensions.len()];
    for (slot, d) in point.iter_mut().zip(&space.dimensions).rev() {
        let n = d.domain.cardinality().expect("finite dimension");
        *slot = d.domain.value_at(index % n).expect("index in range");
        index /= n;
    }
    point
}

fn sample_value(domain: &Domain, rng: &mut SplitMix64) -> ParamValue {
    match domain {
        Domain::Continuous { lo, hi } => {
            let k = Rational::from_integer(i128::from(rng.unit_53()));
            ParamValue::from_rational(*lo + (*hi - *lo) * k / Rational::from_integer(1 << 53))
        }
        finite => {
            let n = finite.cardinality().expect("finite domain");
            finite.value_at(rng.below(n)).expect("index in range")
        }
    }
}

/// `n` independent points; each dimension is uniform over its domain
/// (continuous ones over `lo + (hi - lo) * k / 2^53`).
pub fn sample_random(space: &ParameterSpace, n: usize, rng: &mut SplitMix64) -> Vec<Point> {
    (0..n)
        .map(|_| space.dimensions.iter().map(|d| sample_value(&d.domain, rng)).collect())
        .collect()
}

enum Axis {
    /// Offset and span of a numeric domain.
    Numeric {
        lo: f64,
        span: f64,
    },
    Categorical,
}

/// Euclidean distance over dimensions scaled to `[0, 1]` by their declared
/// bounds. Discrete dimensions with any non-numeric value are categorical
/// and contribute 0 when equal, 1 otherwise.
pub struct Distance {
    axes: Vec<Axis>,
}

impl Distance {
    pub fn new(space: &ParameterSpace) -> Self {
        let numeric = |lo: Rational, hi: Rational| Axis::Numeric {
            lo: to_f64(&lo),
            span: to_f64(&(hi - lo)),
        };
        let axes = space
            .dimensions
            .iter()
            .map(|d| match &d.domain {
                Domain::IntRange { lo, hi, .. } => numeric(
                    Rational::from_integer(i128::from(*lo)),
                    Rational::from_integer(i128::from(*hi)),
                ),
                Domain::Continuous { lo, hi } => numeric(*lo, *hi),
                Domain::Discrete(values) => {
                    let nums: Option<Vec<Rational>> = values.iter().map(ParamValue::as_rational).collect();
                    match nums {
                        Some(nums) if !nums.is_empty() => {
                            let lo = *nums.iter().min().expect("non-empty");
                            let hi = *nums.iter().max().expect("non-empty");
                            numeric(lo, hi)
                        }
                        _ => Axis::Categorical,
                    }
                }
            })
            .collect();
        Self { axes }
    }

    fn coordinate(lo: f64, span: f64, v: &ParamValue) -> f64 {
        let x = v.as_rational().map_or(0.0, |r| to_f64(&r));
        if span > 0.0 {
            (x - lo) / span
        } else {
            0.0
        }
    }

    pub fn distance_sq(&self, a: &[ParamValue], b: &[ParamValue]) -> f64 {
        self.axes
            .iter()
            .zip(a.iter().zip(b))
            .map(|(axis, (x, y))| match axis {
                Axis::Numeric { lo, span } => {
                    let d = Self::coordinate(*lo, *span, x) - Self::coordinate(*lo, *span, y);
                    d * d
                }
                Axis::Categorical => f64::from(u8::from(x != y)),
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::Dimension;

    fn space(dims: Vec<(&str, Domain)>) -> ParameterSpace {
        ParameterSpace {
            dimensions: dims
                .into_iter()
                .map(|(name, domain)| Dimension {
                    name: name.into(),
                    domain,
                })
                .collect(),
        }
    }

    fn text(s: &str) -> ParamValue {
        ParamValue::Text(s.into())
    }

    #[test]
    fn grid_is_lexicographic() {
        let s = space(vec![
            ("a", Domain::Discrete(vec![ParamValue::Int(1), ParamValue::Int(2)])),
            ("b", Domain::Discrete(vec![text("x"), text("y")])),
        ]);
        let grid = enumerate_grid(&s).unwrap();
        let expected: Vec<Point> = vec![
            vec![ParamValue::Int(1), text("x")],
            vec![ParamValue::Int(1), text("y")],
            vec![ParamValue::Int(2), text("x")],
            vec![ParamValue::Int(2), text("y")],
        ];
        assert_eq!(grid, expected);
    }

    #[test]
    fn stepped_range_grid() {
        let s = space(vec![("a", Domain::IntRange { lo: 0, hi: 4, step: 2 })]);
        let grid: Vec<ParamValue> = enumerate_grid(&s).unwrap().into_iter().flatten().collect();
        assert_eq!(grid, [ParamValue::Int(0), ParamValue::Int(2), ParamValue::Int(4)]);
    }

    #[test]
    fn continuous_grid_is_rejected() {
        let s = space(vec![(
            "a",
            Domain::Continuous {
                lo: Rational::from_integer(0),
                hi: Rational::from_integer(1),
            },
        )]);
        assert_eq!(enumerate_grid(&s), Err(SpaceError::ContinuousDimension("a".into())));
    }

    #[test]
    fn random_sampling() {
        let single = space(vec![("a", Domain::Discrete(vec![ParamValue::Int(5)]))]);
        assert_eq!(
            sample_random(&single, 1, &mut SplitMix64::new(3)),
            vec![vec![ParamValue::Int(5)]]
        );

        let binary = space(vec![(
            "a",
            Domain::Discrete(vec![ParamValue::Int(0), ParamValue::Int(1)]),
        )]);
        let a = sample_random(&binary, 1000, &mut SplitMix64::new(9));
        assert_eq!(a, sample_random(&binary, 1000, &mut SplitMix64::new(9)));
        assert!(a.contains(&vec![ParamValue::Int(0)]) && a.contains(&vec![ParamValue::Int(1)]));

        let unit = space(vec![(
            "x",
            Domain::Continuous {
                lo: Rational::from_integer(-1),
                hi: Rational::from_integer(1),
            },
        )]);
        for p in sample_random(&unit, 200, &mut SplitMix64::new(1)) {
            assert!(unit.dimensions[0].domain.contains(&p[0]));
        }
    }

    #[test]
    fn distances_are_normalized() {
        let s = space(vec![
            ("a", Domain::IntRange { lo: 0, hi: 10, step: 1 }),
            ("c", Domain::Discrete(vec![text("x"), text("y")])),
        ]);
        let m = Distance::new(&s);
        let d = m.distance_sq(&[ParamValue::Int(0), text("x")], &[ParamValue::Int(5), text("y")]);
        assert!((d - 1.25).abs() < 1e-15);
        assert_eq!(
            m.distance_sq(&[ParamValue::Int(3), text("x")], &[ParamValue::Int(3), text("x")]),
            0.0
        );
    }
}
