use serde::{Deserialize, Serialize};

use super::LsParams;
use crate::instance::NodeId;

/// Arc pheromone levels, bounded to `[phi_min, phi_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PheromoneMatrix {
    size: usize,
    levels: Vec<f64>,
}

impl PheromoneMatrix {
    pub fn new(node_count: usize, params: &LsParams) -> Self {
        PheromoneMatrix {
            size: node_count,
            levels: vec![params.phi0; node_count * node_count],
        }
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.levels[i.0 * self.size + j.0]
    }

    pub fn set(&mut self, i: NodeId, j: NodeId, value: f64) {
        self.levels[i.0 * self.size + j.0] = value;
    }

    /// After an improving change: built arcs gain `delta_plus`, broken arcs
    /// evaporate by `rho`.
    pub fn reinforce(&mut self, broken: &[(NodeId, NodeId)], built: &[(NodeId, NodeId)], params: &LsParams) {
        for &(i, j) in built {
            let v = (self.get(i, j) + params.delta_plus).clamp(params.phi_min, params.phi_max);
            self.set(i, j, v);
        }
        for &(i, j) in broken {
            let v = (self.get(i, j) * params.rho).clamp(params.phi_min, params.phi_max);
            self.set(i, j, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_stay_bounded() {
        let p = LsParams::default();
        let mut m = PheromoneMatrix::new(3, &p);
        let a = (NodeId(0), NodeId(1));
        let b = (NodeId(1), NodeId(2));
        for _ in 0..100 {
            m.reinforce(&[b], &[a], &p);
        }
        assert_eq!(m.get(a.0, a.1), p.phi_max);
        assert_eq!(m.get(b.0, b.1), p.phi_min);
        m.reinforce(&[], &[b], &p);
        assert!((m.get(b.0, b.1) - 0.6).abs() < 1e-12);
    }
}
