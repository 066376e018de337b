use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LsOp, LsParams};

/// Transition weights between local-search operators. Row `ops` is the
/// start state used before any operator has succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovState {
    pub weights: Vec<Vec<f64>>,
    /// Smoothed evaluation count per invocation, per operator.
    pub cost: Vec<Option<f64>>,
}

impl Default for MarkovState {
    fn default() -> Self {
        Self::new()
    }
}

impl MarkovState {
    pub fn new() -> Self {
        let k = LsOp::ALL.len();
        MarkovState {
            weights: vec![vec![1.0; k]; k + 1],
            cost: vec![None; k],
        }
    }

    pub fn start_row(&self) -> usize {
        LsOp::ALL.len()
    }

    /// Selection probabilities from row `from`, zero for excluded operators.
    pub fn row_distribution(&self, from: usize, excluded: &[bool]) -> Vec<f64> {
        let row = &self.weights[from];
        let mass: f64 = (0..row.len()).filter(|&c| !excluded[c]).map(|c| row[c]).sum();
        (0..row.len())
            .map(|c| if excluded[c] || mass <= 0.0 { 0.0 } else { row[c] / mass })
            .collect()
    }

    /// Draws the next operator among those not excluded.
    pub fn select<R: Rng + ?Sized>(&self, from: usize, excluded: &[bool], rng: &mut R) -> usize {
        let p = self.row_distribution(from, excluded);
        let mut u = rng.random::<f64>();
        let mut last = None;
        for (c, &pc) in p.iter().enumerate() {
            if pc <= 0.0 {
                continue;
            }
            last = Some(c);
            if u < pc {
                return c;
            }
            u -= pc;
        }
        last.or_else(|| excluded.iter().position(|e| !e)).expect("an operator remains")
    }

    /// Folds `spent` into operator `c`'s cost estimate and returns that
    /// estimate relative to the mean over operators seen so far.
    pub fn observe_cost(&mut self, c: usize, spent: f64, smoothing: f64) -> f64 {
        let v = match self.cost[c] {
            None => spent,
            Some(old) => (1.0 - smoothing) * old + smoothing * spent,
        };
        self.cost[c] = Some(v);
        let seen: Vec<f64> = self.cost.iter().flatten().copied().collect();
        let mean = seen.iter().sum::<f64>() / seen.len() as f64;
        if mean > 0.0 {
            (v / mean).max(0.05)
        } else {
            1.0
        }
    }

    pub fn reward(&mut self, from: usize, to: usize, gain: f64, lambda: f64, params: &LsParams) {
        self.weights[from][to] += params.eps_plus * gain / lambda;
    }

    pub fn penalize(&mut self, from: usize, to: usize, lambda: f64, params: &LsParams) {
        let w = &mut self.weights[from][to];
        *w = (*w - params.eps_minus * lambda).max(params.eps_p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rows_sum_to_one_over_open_operators() {
        let mut m = MarkovState::new();
        m.weights[2][4] = 7.0;
        let excl = [false, true, false, false, true, false];
        let p = m.row_distribution(2, &excl);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p[1], 0.0);
        assert_eq!(p[4], 0.0);
    }

    #[test]
    fn penalties_stop_at_floor() {
        let mut m = MarkovState::new();
        let params = LsParams::default();
        for _ in 0..100 {
            m.penalize(0, 1, 1.0, &params);
        }
        assert_eq!(m.weights[0][1], params.eps_p);
    }

    #[test]
    fn reward_scales_with_gain_over_cost() {
        let mut m = MarkovState::new();
        let params = LsParams::default();
        m.reward(6, 3, 4.0, 2.0, &params);
        assert!((m.weights[6][3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn selection_never_returns_excluded() {
        let m = MarkovState::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let excl = [true, true, false, true, true, true];
        for _ in 0..100 {
            assert_eq!(m.select(6, &excl, &mut rng), 2);
        }
    }
}
