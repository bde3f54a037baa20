//! Pareto filtering and parameter/metric correlation.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use super::objective::Direction;
use crate::rational::Rational;

/// `a` dominates `b` when it is no worse everywhere and better somewhere.
/// Values are compared as quantities to minimize.
pub fn dominates<T: Ord>(a: &[T], b: &[T]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Greater => return false,
            Ordering::Less => strictly = true,
            Ordering::Equal => {}
        }
    }
    strictly
}

/// Indices of the non-dominated vectors (all minimized), ascending.
///
/// Vectors are visited in lexicographic order, so a vector can only be
/// dominated by one visited before it; by transitivity it suffices to test
/// against the front found so far.
pub fn non_dominated<T: Ord>(vectors: &[Vec<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by(|&a, &b| vectors[a].cmp(&vectors[b]).then(a.cmp(&b)));
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&f| dominates(&vectors[f], &vectors[i])) {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

/// Pareto-optimal evaluations under the given objective directions.
pub fn pareto_front(objective_vectors: &[Vec<Rational>], directions: &[Direction]) -> Vec<usize> {
    let oriented: Vec<Vec<Rational>> = objective_vectors
        .iter()
        .map(|v| v.iter().zip(directions).map(|(x, d)| d.orient(*x)).collect())
        .collect();
    non_dominated(&oriented)
}

fn big(r: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Sample Pearson correlation, `None` when either variance is zero or fewer
/// than two pairs are given.
///
/// Sums are exact; only the final square root is taken in floating point, as
/// `sign(cov) * sqrt(cov^2 / (var_x * var_y))`.
pub fn pearson(xs: &[Rational], ys: &[Rational]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let nb = BigRational::from_integer(BigInt::from(n));
    let (mut sx, mut sy) = (BigRational::zero(), BigRational::zero());
    let (bx, by): (Vec<BigRational>, Vec<BigRational>) =
        xs[..n].iter().zip(&ys[..n]).map(|(x, y)| (big(x), big(y))).unzip();
    for (x, y) in bx.iter().zip(&by) {
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / &nb, sy / &nb);
    let (mut cov, mut vx, mut vy) = (BigRational::zero(), BigRational::zero(), BigRational::zero());
    for (x, y) in bx.iter().zip(&by) {
        let (dx, dy) = (x - &mx, y - &my);
        cov += &dx * &dy;
        vx += &dx * &dx;
        vy += &dy * &dy;
    }
    if vx.is_zero() || vy.is_zero() {
        return None;
    }
    let r2 = (&cov * &cov) / (vx * vy);
    let r = r2.to_f64()?.sqrt().min(1.0);
    Some(if cov.is_negative() { -r } else { r })
}
