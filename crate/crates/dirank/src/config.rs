//! Solver configuration and dense rank vectors.

use crate::error::{Error, Result};

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_EPSILON: f64 = 1e-9;
pub const DEFAULT_MAX_ROUNDS: usize = 1000;

/// Tolerance on the sum of a probability distribution held in configuration.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-12;

/// Parameters shared by every solver: the damping factor `d`, the default
/// distribution `Z` receiving the non-damped mass, the stopping tolerance and
/// the round budget.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Damping factor, strictly between 0 and 1.
    pub damping: f64,
    /// Default (zap) distribution over nodes; entries are non-negative and
    /// sum to one.
    pub zap: Vec<f64>,
    /// Stopping tolerance, strictly positive.
    pub epsilon: f64,
    /// Round budget; a round is `n` entry updates (pull solvers) or `n`
    /// elementary diffusions (push solvers).
    pub max_rounds: usize,
}

impl SolverConfig {
    /// Default configuration with the uniform zap distribution over `n` nodes.
    pub fn uniform(n: usize) -> Self {
        SolverConfig {
            damping: DEFAULT_DAMPING,
            zap: vec![1.0 / n as f64; n.max(1)],
            epsilon: DEFAULT_EPSILON,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    /// Checks every field against a graph with `n` nodes.
    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Config("graph has no nodes".into()));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::Config(format!(
                "damping must lie strictly between 0 and 1, got {}",
                self.damping
            )));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "epsilon must be a positive real, got {}",
                self.epsilon
            )));
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        if self.zap.len() != n {
            return Err(Error::Config(format!(
                "zap distribution has {} entries but the graph has {} nodes",
                self.zap.len(),
                n
            )));
        }
        validate_distribution(&self.zap, DISTRIBUTION_SUM_TOL)
    }
}

/// Checks that `z` is a probability distribution: finite non-negative entries
/// summing to one within `tol`. The sum is compensated so that plain
/// accumulation error over large vectors cannot fail the check.
pub fn validate_distribution(z: &[f64], tol: f64) -> Result<()> {
    for (i, &v) in z.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Config(format!(
                "distribution entry {i} is {v}; entries must be finite and non-negative"
            )));
        }
    }
    let sum = kahan_sum(z);
    if (sum - 1.0).abs() > tol {
        return Err(Error::Config(format!(
            "distribution sums to {sum}, expected 1 within {tol}"
        )));
    }
    Ok(())
}

/// Compensated (Kahan) summation.
pub fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// A dense vector of per-node scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector {
    pub values: Vec<f64>,
}

impl RankVector {
    pub fn new(values: Vec<f64>) -> Self {
        RankVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// L1 distance to another vector of the same length.
    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        l1_distance(&self.values, other)
    }

    /// The same scores scaled to sum to one. Returned unchanged when the sum
    /// is not positive.
    pub fn normalized(&self) -> RankVector {
        let s = self.sum();
        if s > 0.0 {
            RankVector::new(self.values.iter().map(|v| v / s).collect())
        } else {
            self.clone()
        }
    }
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_config_is_valid() {
        let cfg = SolverConfig::uniform(4);
        assert!(cfg.validate(4).is_ok());
        assert_eq!(cfg.damping, 0.85);
        assert_eq!(cfg.epsilon, 1e-9);
        assert_eq!(cfg.max_rounds, 1000);
    }

    #[test]
    fn rejects_bad_damping_and_epsilon() {
        let mut cfg = SolverConfig::uniform(2);
        cfg.damping = 1.0;
        assert!(cfg.validate(2).is_err());
        cfg.damping = 0.85;
        cfg.epsilon = 0.0;
        assert!(cfg.validate(2).is_err());
    }

    #[test]
    fn rejects_non_distribution_zap() {
        let mut cfg = SolverConfig::uniform(2);
        cfg.zap = vec![0.7, 0.7];
        assert!(cfg.validate(2).is_err());
        cfg.zap = vec![-0.5, 1.5];
        assert!(cfg.validate(2).is_err());
        cfg.zap = vec![1.0];
        assert!(cfg.validate(2).is_err());
    }

    #[test]
    fn rejects_empty_graph() {
        let cfg = SolverConfig::uniform(1);
        assert!(matches!(cfg.validate(0), Err(Error::Config(_))));
    }

    #[test]
    fn normalized_sums_to_one() {
        let r = RankVector::new(vec![1.0, 3.0]);
        let n = r.normalized();
        assert!((n.sum() - 1.0).abs() < 1e-15);
        assert!((n.values[1] - 0.75).abs() < 1e-15);
    }
}
