use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{build_laplacian, NetworkTopology};
use crate::scalar::Scalar;
use crate::simulate::{sum_sq_deviation, Trajectory};

/// Steady-state deviation from the network average under unit-intensity
/// white noise, analytically and from a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport<T> {
    /// Ascending eigenvalues of the standard Laplacian.
    pub eigenvalues: Vec<T>,
    /// `½ Σ_{i>=2} 1/λ_i`; `None` when `λ₂ = 0` (disconnected graph, the
    /// deviation grows without bound).
    pub analytical: Option<T>,
    /// Time average of `Σ_i (x_i − mean x)²` over `[window_start, T]`.
    pub empirical: Option<T>,
    pub window_start: Option<T>,
}

/// Eigenvalues of the (symmetric) standard Laplacian. Directed graphs are
/// rejected: the closed form assumes an undirected network.
pub fn standard_laplacian_spectrum<T: Scalar>(topology: &NetworkTopology<T>) -> Result<Vec<T>> {
    let std_l: DMatrix<T> = build_laplacian(topology).standard();
    let asym = (&std_l - std_l.transpose()).amax();
    if asym > T::lit(1e-12) * T::one().max(std_l.amax()) {
        return Err(Error::InvalidTopology(
            "coherence closed form needs an undirected (symmetric) graph".into(),
        ));
    }
    let mut eig: Vec<T> = std_l.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(eig)
}

/// `½ Σ_{i>=2} 1/λ_i(L_std)`, `None` for disconnected graphs.
pub fn analytical_coherence<T: Scalar>(topology: &NetworkTopology<T>) -> Result<(Vec<T>, Option<T>)> {
    let eig = standard_laplacian_spectrum(topology)?;
    let tol = T::lit(1e-9) * T::one().max(eig.last().copied().unwrap_or_else(T::one));
    let value = if eig.len() < 2 {
        Some(T::zero())
    } else if eig[1] <= tol {
        None
    } else {
        Some(eig[1..].iter().fold(T::zero(), |acc, &l| acc + T::one() / l) * T::lit(0.5))
    };
    Ok((eig, value))
}

/// Time average of `Σ_i (x_i − mean x)²` over the second half of the run,
/// trapezoidal in time. Returns the value and the window start.
pub fn empirical_deviation<T: Scalar>(trajectory: &Trajectory<T>) -> Option<(T, T)> {
    let rows = trajectory.len();
    if rows < 3 {
        return None;
    }
    let start = (rows - 1) / 2;
    let dev: Vec<T> = trajectory.x[start..].iter().map(|r| sum_sq_deviation(r)).collect();
    let times = &trajectory.times[start..];
    let span = times[times.len() - 1] - times[0];
    let half = T::lit(0.5);
    let integral = (1..dev.len()).fold(T::zero(), |acc, k| acc + (times[k] - times[k - 1]) * half * (dev[k] + dev[k - 1]));
    Some((integral / span, times[0]))
}

/// Analytical coherence of `topology`, plus the empirical statistic when a
/// trajectory is given.
pub fn coherence<T: Scalar>(topology: &NetworkTopology<T>, trajectory: Option<&Trajectory<T>>) -> Result<CoherenceReport<T>> {
    let (eigenvalues, analytical) = analytical_coherence(topology)?;
    let (empirical, window_start) = match trajectory.and_then(empirical_deviation) {
        Some((v, t0)) => (Some(v), Some(t0)),
        None => (None, None),
    };
    Ok(CoherenceReport {
        eigenvalues,
        analytical,
        empirical,
        window_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_graph, GraphFamily};

    #[test]
    fn complete_graph_value() {
        let g = make_graph(&GraphFamily::Complete, 100, 1.0f64).unwrap();
        let (eig, d) = analytical_coherence(&g).unwrap();
        assert!(eig[0].abs() < 1e-10);
        assert!(eig[1..].iter().all(|l| (l - 100.0).abs() < 1e-9));
        assert!((d.unwrap() - 0.495).abs() < 1e-12);
    }

    #[test]
    fn ring_of_four() {
        let g = make_graph(&GraphFamily::UndirectedRing, 4, 1.0f64).unwrap();
        let (eig, d) = analytical_coherence(&g).unwrap();
        let expected = [0.0, 2.0, 2.0, 4.0];
        for (a, b) in eig.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((d.unwrap() - 0.625).abs() < 1e-12);
    }

    #[test]
    fn disconnected_is_infinite() {
        let g = NetworkTopology::<f64>::from_one_based(4, &[(1, 2, 1.0), (2, 1, 1.0), (3, 4, 1.0), (4, 3, 1.0)]).unwrap();
        let rep = coherence(&g, None).unwrap();
        assert_eq!(rep.analytical, None);
    }

    #[test]
    fn directed_graph_rejected() {
        let g = make_graph(&GraphFamily::DirectedCycle, 3, 1.0f64).unwrap();
        assert!(analytical_coherence(&g).is_err());
    }
}
