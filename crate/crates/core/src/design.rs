//! Latin-hypercube candidate pools.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// `n` points in the box with exactly one point in each of the `n` equal
/// strata of every coordinate.
pub fn latin_hypercube(bounds: &[(f64, f64)], n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(bounds.len())).collect();
    let mut strata: Vec<usize> = (0..n).collect();
    for (lo, hi) in bounds {
        strata.shuffle(rng);
        for (p, s) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.gen();
            let v = lo + (hi - lo) * (*s as f64 + u) / n as f64;
            p.push(v.min(*hi));
        }
    }
    points
}

/// Unevaluated feasible points. Evaluated points move to the consumed list
/// and never come back.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    points: Vec<Vec<f64>>,
    consumed: Vec<Vec<f64>>,
}

impl CandidatePool {
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::NoFeasiblePoints);
        }
        Ok(CandidatePool { points, consumed: Vec::new() })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn consumed(&self) -> &[Vec<f64>] {
        &self.consumed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Moves the points at `indices` to the consumed list, keeping the order
    /// of the rest.
    pub fn remove(&mut self, indices: &[usize]) -> Result<()> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.last().is_some_and(|i| *i >= self.points.len()) {
            return Err(Error::InvalidParameter("pool index out of range"));
        }
        let mut keep = Vec::with_capacity(self.points.len() - sorted.len());
        for (i, p) in core::mem::take(&mut self.points).into_iter().enumerate() {
            if sorted.binary_search(&i).is_ok() {
                self.consumed.push(p);
            } else {
                keep.push(p);
            }
        }
        self.points = keep;
        Ok(())
    }
}

/// Latin-hypercube pool with infeasible points dropped.
pub fn generate_pool<F>(bounds: &[(f64, f64)], pool_size: usize, feasible: F, seed: u64) -> Result<CandidatePool>
where
    F: Fn(&[f64]) -> bool,
{
    if pool_size == 0 {
        return Err(Error::InvalidParameter("pool size must be positive"));
    }
    if bounds.is_empty() {
        return Err(Error::Empty("bounds"));
    }
    if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(Error::InvalidParameter("lower bound must be below upper bound"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = latin_hypercube(bounds, pool_size, &mut rng).into_iter().filter(|p| feasible(p)).collect();
    CandidatePool::from_points(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn one_point_per_stratum() {
        let pool = generate_pool(&[(0.0, 1.0)], 10, |_| true, 3).unwrap();
        let mut seen = [false; 10];
        for p in pool.points() {
            seen[(p[0] * 10.0) as usize] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn filter_and_determinism() {
        let a = generate_pool(&[(0.0, 1.0), (-1.0, 1.0)], 50, |x| x[0] >= 0.5, 9).unwrap();
        assert!(a.points().iter().all(|x| x[0] >= 0.5));
        let b = generate_pool(&[(0.0, 1.0), (-1.0, 1.0)], 50, |x| x[0] >= 0.5, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(generate_pool(&[(0.0, 1.0)], 5, |_| false, 1), Err(Error::NoFeasiblePoints));
    }

    #[test]
    fn removal_moves_points() {
        let mut pool = CandidatePool::from_points(vec![vec![0.1], vec![0.2], vec![0.3]]).unwrap();
        pool.remove(&[2, 0]).unwrap();
        assert_eq!(pool.points(), &[vec![0.2]]);
        assert_eq!(pool.consumed().len(), 2);
        assert!(pool.remove(&[4]).is_err());
    }
}
