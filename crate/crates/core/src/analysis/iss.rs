use crate::analysis::ExpBound;
use crate::error::{invalid, Error, Result};
use crate::filter::{steady_state_gain, FilterParams};
use crate::graph::NetworkTopology;
use crate::scalar::Scalar;

/// Aggregate disturbance bound
///
/// `φ_max = ε_max ΣN_i / S + δ_max Σ|B_i| + Q_max [N ε_max / R + ε_max ΣN_i / S]`
///
/// with `N_i` the neighbour counts and `Q_max = max_i Q_i*`. Needs uniform
/// `R` and `S`.
pub fn phi_max<T: Scalar>(params: &[FilterParams<T>], topology: &NetworkTopology<T>, delta_max: T, eps_max: T) -> Result<T> {
    if delta_max < T::zero() || eps_max < T::zero() {
        return Err(invalid("bounds", "disturbance bounds must be nonnegative"));
    }
    let n = topology.node_count();
    if params.len() != n {
        return Err(Error::NonUniform(format!("{} parameter sets for {n} nodes", params.len())));
    }
    let r = params[0].r_self;
    if params.iter().any(|p| p.r_self != r) {
        return Err(Error::NonUniform("R differs between nodes".into()));
    }
    let s = params
        .iter()
        .flat_map(|p| p.neighbors.iter().map(|w| w.s))
        .next()
        .unwrap_or_else(T::one);
    if params.iter().flat_map(|p| p.neighbors.iter()).any(|w| w.s != s) {
        return Err(Error::NonUniform("S differs between edges".into()));
    }
    let total_neighbors = T::from_usize_lossy(topology.edge_count());
    let b_sum = params.iter().fold(T::zero(), |acc, p| acc + p.b.abs());
    let q_max = params
        .iter()
        .map(steady_state_gain)
        .fold(T::zero(), |acc, q| acc.max(q));
    let nbr = eps_max * total_neighbors / s;
    Ok(nbr + delta_max * b_sum + q_max * (T::from_usize_lossy(n) * eps_max / r + nbr))
}

/// `b ‖z(0)‖ e^(−a t) + (b φ_max / a)(1 − e^(−a t))`.
pub fn iss_envelope<T: Scalar>(a: T, b: T, z0_norm: T, phi_max: T, t: T) -> T {
    let decay = (-a * t).exp();
    b * z0_norm * decay + b * phi_max / a * (T::one() - decay)
}

/// Input-to-state envelope for one initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IssBound<T> {
    pub a: T,
    pub b: T,
    pub phi_max: T,
    pub z0_norm: T,
}

impl<T: Scalar> IssBound<T> {
    pub fn new(bound: ExpBound<T>, phi_max: T, z0_norm: T) -> Self {
        Self {
            a: bound.a,
            b: bound.b,
            phi_max,
            z0_norm,
        }
    }

    pub fn envelope(&self, t: T) -> T {
        iss_envelope(self.a, self.b, self.z0_norm, self.phi_max, t)
    }

    /// Radius of the ball the envelope settles to, `b φ_max / a`.
    pub fn asymptotic_radius(&self) -> T {
        self.b * self.phi_max / self.a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::params_for_topology;
    use crate::graph::{make_graph, GraphFamily};

    fn ring2() -> (NetworkTopology<f64>, Vec<FilterParams<f64>>) {
        let topo = make_graph(&GraphFamily::UndirectedRing, 2, 1.0).unwrap();
        let ones = [1.0; 2];
        let params = params_for_topology(&topo, &ones, &ones, &ones, &ones, None).unwrap();
        (topo, params)
    }

    #[test]
    fn phi_max_examples() {
        let (topo, params) = ring2();
        assert_eq!(phi_max(&params, &topo, 0.0, 0.0).unwrap(), 0.0);
        let v = phi_max(&params, &topo, 0.1, 0.1).unwrap();
        let expected = 0.2 + 0.2 + 0.4 / 2f64.sqrt();
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 0.68284).abs() < 1e-5);
        let doubled = phi_max(&params, &topo, 0.2, 0.2).unwrap();
        assert!((doubled - 2.0 * v).abs() < 1e-14);
        assert!(phi_max(&params, &topo, -0.1, 0.1).is_err());
    }

    #[test]
    fn envelope_limits() {
        assert_eq!(iss_envelope(0.5, 2.0, 3.0, 0.7, 0.0), 6.0);
        let far = iss_envelope(0.5f64, 2.0, 3.0, 0.7, 1e4);
        assert!((far - 2.0 * 0.7 / 0.5).abs() < 1e-12);
        for t in [0.0, 0.3, 2.0, 9.0] {
            assert_eq!(iss_envelope(0.5, 2.0, 3.0, 0.0, t), 6.0 * (-0.5f64 * t).exp());
        }
        let bound = IssBound { a: 0.5f64, b: 2.0, phi_max: 0.7, z0_norm: 3.0 };
        assert!((bound.asymptotic_radius() - 2.8).abs() < 1e-15);
    }
}
