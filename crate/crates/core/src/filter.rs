//! Per-node minimum-energy filter.
//!
//! Node `i` measures its own state with weight `R_ii` and each neighbour
//! `j` with weight `R_ij`, and models the neighbour as its own state plus an
//! approximation error penalised with weight `1/G_ij`. Minimising over that
//! error leaves a neighbour-measurement weight `S_ij = R_ij + G_ij`, a static
//! neighbour estimate and a scalar Riccati gain.
//!
//! Edge weights `a_ij` of the communication graph multiply every neighbour
//! term (consensus input, innovation and Riccati information). With unit
//! weights this is the unweighted filter.

use nalgebra::DVector;

use crate::error::{invalid, Error, Result};
use crate::graph::NetworkTopology;
use crate::integrate::rk4_step;
use crate::scalar::Scalar;

/// Weights of one neighbour measurement channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborWeights<T> {
    /// Approximation-error weight `G_ij > 0`.
    pub g: T,
    /// Combined weight `S_ij = R_ij + G_ij >= G_ij`.
    pub s: T,
    /// Edge weight `a_ij` of the communication graph.
    pub coupling: T,
}

impl<T: Scalar> NeighborWeights<T> {
    pub fn new(s: T, g: T, coupling: T) -> Result<Self> {
        if !(g > T::zero()) || !g.is_finite() {
            return Err(invalid("g", format!("must be positive, got {g}")));
        }
        if !(s >= g) || !s.is_finite() {
            return Err(invalid("s", format!("must satisfy s >= g = {g}, got {s}")));
        }
        if !(coupling > T::zero()) {
            return Err(invalid("coupling", "edge weight must be positive"));
        }
        Ok(Self { g, s, coupling })
    }

    /// Measurement weight `R_ij = S_ij - G_ij`; zero means an exact neighbour
    /// measurement.
    pub fn r(&self) -> T {
        self.s - self.g
    }

    /// Neighbour-estimate gain `G_ij / S_ij ∈ (0, 1]`.
    pub fn trust(&self) -> T {
        self.g / self.s
    }
}

/// Tuning of node `i`'s filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams<T> {
    /// Input-disturbance coefficient `B_i`.
    pub b: T,
    /// Self-measurement weight `R_ii = D_ii²`.
    pub r_self: T,
    pub neighbors: Vec<NeighborWeights<T>>,
    /// Initial-error weight `Ξ_i`; the Riccati variable starts at `1/Ξ_i`.
    pub xi: T,
}

impl<T: Scalar> FilterParams<T> {
    pub fn new(b: T, r_self: T, neighbors: Vec<NeighborWeights<T>>, xi: T) -> Result<Self> {
        if !b.is_finite() {
            return Err(invalid("b", "must be finite"));
        }
        if !(r_self > T::zero()) || !r_self.is_finite() {
            return Err(invalid("r", format!("must be positive, got {r_self}")));
        }
        if !(xi > T::zero()) {
            return Err(invalid("xi", format!("must be positive, got {xi}")));
        }
        Ok(Self {
            b,
            r_self,
            neighbors,
            xi,
        })
    }

    /// Parameters whose `Ξ_i` equals `1/Q_i*`, so the Riccati gain is
    /// constant from the start. Requires `B_i != 0`.
    pub fn steady(b: T, r_self: T, neighbors: Vec<NeighborWeights<T>>) -> Result<Self> {
        let mut p = Self::new(b, r_self, neighbors, T::one())?;
        let q = steady_state_gain(&p);
        if q == T::zero() {
            return Err(invalid("b", "steady initialisation needs a nonzero B"));
        }
        p.xi = T::one() / q;
        Ok(p)
    }

    /// `1/R_ii + Σ a_ij / S_ij`, the Riccati information rate.
    pub fn information(&self) -> T {
        self.neighbors
            .iter()
            .fold(T::one() / self.r_self, |acc, n| acc + n.coupling / n.s)
    }

    pub fn initial_gain(&self) -> T {
        T::one() / self.xi
    }

    /// Measurement coefficient `D_ii = sqrt(R_ii)`.
    pub fn d_self(&self) -> T {
        self.r_self.sqrt()
    }
}

/// Builds per-node parameters on a topology with node-level `B`, `R`, `S`,
/// `G` (the same `S`, `G` on every edge of a node).
///
/// `xi` of `None` selects the steady initialisation `Ξ_i = 1/Q_i*`.
pub fn params_for_topology<T: Scalar>(
    topology: &NetworkTopology<T>,
    b: &[T],
    r: &[T],
    s: &[T],
    g: &[T],
    xi: Option<&[T]>,
) -> Result<Vec<FilterParams<T>>> {
    let n = topology.node_count();
    for (name, v) in [("b", b), ("r", r), ("s", s), ("g", g)] {
        if v.len() != n {
            return Err(invalid(name, format!("expected {n} values, got {}", v.len())));
        }
    }
    if let Some(x) = xi {
        if x.len() != n {
            return Err(invalid("xi", format!("expected {n} values, got {}", x.len())));
        }
    }
    (0..n)
        .map(|i| {
            let neighbors = topology
                .neighbors(i)
                .iter()
                .map(|e| NeighborWeights::new(s[i], g[i], e.weight))
                .collect::<Result<Vec<_>>>()?;
            match xi {
                Some(x) => FilterParams::new(b[i], r[i], neighbors, x[i]),
                None => {
                    let mut p = FilterParams::new(b[i], r[i], neighbors, T::one())?;
                    let q = steady_state_gain(&p);
                    // B = 0 has Q* = 0; keep Ξ finite and let the Riccati flow decay.
                    p.xi = if q > T::zero() { T::one() / q } else { T::one() };
                    Ok(p)
                }
            }
        })
        .collect()
}

/// Inner minimiser of the approximation error: `G/(G+R) · (y_ij − x_i)`.
pub fn eta_star<T: Scalar>(y_ij: T, x_i: T, g: T, r: T) -> T {
    g / (g + r) * (y_ij - x_i)
}

/// Static neighbour estimate `x̂_ij = x̂_i + (G/S)(y_ij − x̂_i)`.
pub fn neighbor_estimate<T: Scalar>(x_hat: T, y_ij: T, g: T, s: T) -> T {
    x_hat + g / s * (y_ij - x_hat)
}

/// Consensus input `Σ_j (x̂_ij − x̂_i)`.
pub fn control_input<T: Scalar>(x_hat: T, neighbor_estimates: &[T]) -> T {
    neighbor_estimates
        .iter()
        .fold(T::zero(), |acc, &est| acc + (est - x_hat))
}

/// Consensus input with edge weights, `Σ_j a_ij (x̂_ij − x̂_i)`.
pub fn weighted_control_input<T: Scalar>(x_hat: T, weighted: impl IntoIterator<Item = (T, T)>) -> T {
    weighted
        .into_iter()
        .fold(T::zero(), |acc, (a, est)| acc + a * (est - x_hat))
}

/// Positive fixed point of the Riccati equation:
/// `Q* = |B| · (1/R_ii + Σ a_ij/S_ij)^(-1/2)`.
pub fn steady_state_gain<T: Scalar>(params: &FilterParams<T>) -> T {
    params.b.abs() / params.information().sqrt()
}

/// `Q' = B² − Q² (1/R_ii + Σ a_ij/S_ij)`.
pub fn riccati_rhs<T: Scalar>(q: T, params: &FilterParams<T>) -> T {
    params.b * params.b - q * q * params.information()
}

/// Integrates the Riccati equation with RK4 from `q0` over `horizon`,
/// returning every grid value (including `q0`).
pub fn riccati_trajectory<T: Scalar>(q0: T, params: &FilterParams<T>, horizon: T, step: T) -> Result<Vec<T>> {
    if !(q0 > T::zero()) {
        return Err(invalid("q0", format!("initial gain must be positive, got {q0}")));
    }
    if !(step > T::zero()) || !(horizon >= T::zero()) {
        return Err(invalid("step", "need step > 0 and horizon >= 0"));
    }
    let steps = (horizon / step).round().to_usize().unwrap_or(0);
    let mut q = DVector::from_element(1, q0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(q0);
    for k in 0..steps {
        let t = step * T::from_usize_lossy(k);
        q = rk4_step(|_, z: &DVector<T>| DVector::from_element(1, riccati_rhs(z[0], params)), &q, t, step)
            .map_err(|e| Error::NonFinite { step: k, time: e.time })?;
        out.push(q[0]);
    }
    Ok(out)
}

/// Terminal value of [`riccati_trajectory`].
pub fn integrate_riccati<T: Scalar>(q0: T, params: &FilterParams<T>, horizon: T, step: T) -> Result<T> {
    Ok(*riccati_trajectory(q0, params, horizon, step)?
        .last()
        .expect("trajectory contains the initial value"))
}

/// Filter state of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState<T> {
    pub x_hat: T,
    pub q: T,
}

/// Observer right-hand side
/// `Σ a_ij (x̂_ij − x̂_i) + Q [ (y_ii − x̂_i)/R_ii + Σ a_ij (y_ij − x̂_i)/S_ij ]`.
///
/// `y_neighbors` is ordered like `params.neighbors`.
pub fn observer_rhs<T: Scalar>(x_hat: T, y_self: T, y_neighbors: &[T], params: &FilterParams<T>, q: T) -> T {
    debug_assert_eq!(y_neighbors.len(), params.neighbors.len());
    let mut consensus = T::zero();
    let mut innovation = (y_self - x_hat) / params.r_self;
    for (w, &y) in params.neighbors.iter().zip(y_neighbors) {
        let est = neighbor_estimate(x_hat, y, w.g, w.s);
        consensus += w.coupling * (est - x_hat);
        innovation += w.coupling * (y - x_hat) / w.s;
    }
    consensus + q * innovation
}

/// Energy decomposition of one hypothesis about the unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBudget<T> {
    pub init_error: T,
    pub model_energy: T,
    pub measurement_energy: T,
    pub approximation_energy: T,
    pub total: T,
}

/// Hypothesised trajectories of the unknowns on a time grid.
///
/// `x` must be consistent with `x' = u + B δ`; that is the caller's job.
#[derive(Debug, Clone)]
pub struct EnergyHypothesis<'a, T> {
    pub times: &'a [T],
    pub x: &'a [T],
    pub delta: &'a [T],
    /// One series per neighbour, ordered like `FilterParams::neighbors`.
    pub eta: &'a [Vec<T>],
}

/// Measurements seen by node `i` on the same grid.
#[derive(Debug, Clone)]
pub struct NodeMeasurements<'a, T> {
    pub y_self: &'a [T],
    pub y_neighbors: &'a [Vec<T>],
}

fn trapezoid<T: Scalar>(times: &[T], values: impl Fn(usize) -> T) -> T {
    let half = T::lit(0.5);
    (1..times.len()).fold(T::zero(), |acc, k| {
        acc + (times[k] - times[k - 1]) * half * (values(k - 1) + values(k))
    })
}

fn check_grid(name: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("{name} has {got} samples, grid has {expected}")))
    }
}

fn validate_grid<T: Scalar>(
    hyp: &EnergyHypothesis<'_, T>,
    meas: &NodeMeasurements<'_, T>,
    params: &FilterParams<T>,
    with_eta: bool,
) -> Result<()> {
    let n = hyp.times.len();
    if n == 0 {
        return Err(Error::GridMismatch("empty time grid".into()));
    }
    check_grid("x", n, hyp.x.len())?;
    check_grid("delta", n, hyp.delta.len())?;
    check_grid("y_self", n, meas.y_self.len())?;
    let m = params.neighbors.len();
    if meas.y_neighbors.len() != m || (with_eta && hyp.eta.len() != m) {
        return Err(Error::GridMismatch(format!(
            "expected {m} neighbour series, got {} measurements and {} approximation errors",
            meas.y_neighbors.len(),
            hyp.eta.len()
        )));
    }
    for (k, y) in meas.y_neighbors.iter().enumerate() {
        check_grid(&format!("y_neighbors[{k}]"), n, y.len())?;
    }
    if with_eta {
        for (k, e) in hyp.eta.iter().enumerate() {
            check_grid(&format!("eta[{k}]"), n, e.len())?;
        }
    }
    Ok(())
}

/// Full cost after substituting the measurement and neighbour models:
///
/// `Ξ/2 (x(0) − x_prior)² + ½∫ [δ² + (y_ii − x)²/R_ii
///   + Σ a_ij ((y_ij − x − η_ij)²/R_ij + η_ij²/G_ij)] dτ`
///
/// integrated with the trapezoidal rule. A neighbour with `R_ij = 0` contributes
/// zero when its residual vanishes and infinity otherwise.
pub fn evaluate_energy<T: Scalar>(
    hyp: &EnergyHypothesis<'_, T>,
    meas: &NodeMeasurements<'_, T>,
    params: &FilterParams<T>,
    x_prior: T,
) -> Result<EnergyBudget<T>> {
    validate_grid(hyp, meas, params, true)?;
    let half = T::lit(0.5);
    let init = params.xi * half * (hyp.x[0] - x_prior).powi(2);
    let model = half * trapezoid(hyp.times, |k| hyp.delta[k].powi(2));
    let measurement = half
        * trapezoid(hyp.times, |k| {
            let mut acc = (meas.y_self[k] - hyp.x[k]).powi(2) / params.r_self;
            for (m, w) in params.neighbors.iter().enumerate() {
                let res = meas.y_neighbors[m][k] - hyp.x[k] - hyp.eta[m][k];
                let r = w.r();
                let term = if r > T::zero() {
                    res * res / r
                } else if res == T::zero() {
                    T::zero()
                } else {
                    T::max_value().unwrap_or_else(T::one)
                };
                acc += w.coupling * term;
            }
            acc
        });
    let approximation = half
        * trapezoid(hyp.times, |k| {
            params
                .neighbors
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (m, w)| acc + w.coupling * hyp.eta[m][k].powi(2) / w.g)
        });
    Ok(EnergyBudget {
        init_error: init,
        model_energy: model,
        measurement_energy: measurement,
        approximation_energy: approximation,
        total: init + model + measurement + approximation,
    })
}

/// Cost with the approximation errors minimised out:
///
/// `Ξ/2 (x(0) − x_prior)² + ½∫ [δ² + (y_ii − x)²/R_ii + Σ a_ij (y_ij − x)²/S_ij] dτ`.
///
/// `hyp.eta` is ignored. The neighbour part is reported as measurement energy.
pub fn reduced_energy<T: Scalar>(
    hyp: &EnergyHypothesis<'_, T>,
    meas: &NodeMeasurements<'_, T>,
    params: &FilterParams<T>,
    x_prior: T,
) -> Result<EnergyBudget<T>> {
    validate_grid(hyp, meas, params, false)?;
    let half = T::lit(0.5);
    let init = params.xi * half * (hyp.x[0] - x_prior).powi(2);
    let model = half * trapezoid(hyp.times, |k| hyp.delta[k].powi(2));
    let measurement = half
        * trapezoid(hyp.times, |k| {
            params.neighbors.iter().enumerate().fold(
                (meas.y_self[k] - hyp.x[k]).powi(2) / params.r_self,
                |acc, (m, w)| acc + w.coupling * (meas.y_neighbors[m][k] - hyp.x[k]).powi(2) / w.s,
            )
        });
    Ok(EnergyBudget {
        init_error: init,
        model_energy: model,
        measurement_energy: measurement,
        approximation_energy: T::zero(),
        total: init + model + measurement,
    })
}

/// `η*` series for a state hypothesis, ordered like `params.neighbors`.
pub fn optimal_eta<T: Scalar>(x: &[T], meas: &NodeMeasurements<'_, T>, params: &FilterParams<T>) -> Vec<Vec<T>> {
    params
        .neighbors
        .iter()
        .enumerate()
        .map(|(m, w)| {
            x.iter()
                .zip(&meas.y_neighbors[m])
                .map(|(&xi, &y)| eta_star(y, xi, w.g, w.r()))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn one_neighbor(s: f64, g: f64) -> FilterParams<f64> {
        FilterParams::new(1.0, 1.0, vec![NeighborWeights::new(s, g, 1.0).unwrap()], 1.0).unwrap()
    }

    /// Golden-section search, independent of the closed form.
    fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if f(a) < f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn eta_star_examples() {
        assert_abs_diff_eq!(eta_star(2.0, 1.0, 1.0, 1.0), 0.5);
        assert_eq!(eta_star(3.3, 3.3, 0.7, 2.0), 0.0);
        let (y, x, g, r) = (2.0, 1.0, 1.0, 1.0);
        let brute = golden_min(|eta| 0.5 * ((y - x - eta).powi(2) / r + eta * eta / g), -10.0, 10.0);
        assert_abs_diff_eq!(eta_star(y, x, g, r), brute, epsilon = 1e-6);
    }

    #[test]
    fn steady_gain_examples() {
        let p = one_neighbor(1.0, 1.0);
        assert_abs_diff_eq!(steady_state_gain(&p), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        // cross-check against long integration of the Riccati equation
        assert_abs_diff_eq!(integrate_riccati(1.0, &p, 20.0, 0.01).unwrap(), 1.0 / 2f64.sqrt(), epsilon = 1e-9);

        let many = FilterParams::new(1.0, 1.0, vec![NeighborWeights::new(1.0, 1.0, 1.0).unwrap(); 99], 1.0).unwrap();
        assert_abs_diff_eq!(steady_state_gain(&many), 0.1, epsilon = 1e-15);

        let mut zero = p.clone();
        zero.b = 0.0;
        assert_eq!(steady_state_gain(&zero), 0.0);
        // gain depends on |B|
        let mut neg = p.clone();
        neg.b = -2.0;
        assert_abs_diff_eq!(steady_state_gain(&neg), 2.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn riccati_fixed_point_and_convergence() {
        let p = one_neighbor(1.0, 1.0);
        let q_star = steady_state_gain(&p);
        let path = riccati_trajectory(q_star, &p, 5.0, 0.01).unwrap();
        assert!(path.iter().all(|&q| (q - q_star).abs() < 1e-15));
        assert!((integrate_riccati(10.0, &p, 20.0, 0.01).unwrap() - q_star).abs() < 1e-6);

        let rising = riccati_trajectory(0.01, &p, 20.0, 0.01).unwrap();
        assert!(rising.windows(2).all(|w| w[1] >= w[0]));
        assert!(rising.iter().all(|&q| q <= q_star + 1e-15));
    }

    #[test]
    fn riccati_rejects_nonpositive_start() {
        let p = one_neighbor(1.0, 1.0);
        assert!(integrate_riccati(0.0, &p, 1.0, 0.1).is_err());
        assert!(integrate_riccati(-1.0, &p, 1.0, 0.1).is_err());
    }

    #[test]
    fn neighbor_estimate_examples() {
        assert_abs_diff_eq!(neighbor_estimate(1.0, 3.0, 1.0, 2.0), 2.0);
        assert_abs_diff_eq!(neighbor_estimate(-4.0, 7.5, 1.3, 1.3), 7.5);
        assert_abs_diff_eq!(neighbor_estimate(5.0, 5.0, 0.2, 3.0), 5.0);
    }

    #[test]
    fn control_input_examples() {
        assert_eq!(control_input(0.0, &[1.0, -1.0]), 0.0);
        assert_eq!(control_input(1.0, &[2.0]), 1.0);
        assert_eq!(control_input(4.0, &[4.0, 4.0, 4.0]), 0.0);
        assert_eq!(weighted_control_input(1.0, [(2.0, 2.0), (0.5, 0.0)]), 1.5);
    }

    #[test]
    fn observer_rhs_examples() {
        let q = 1.0 / 2f64.sqrt();
        let p = one_neighbor(2.0, 1.0);
        let rhs = observer_rhs(0.0, 1.0, &[2.0], &p, q);
        assert_abs_diff_eq!(rhs, 1.0 + 2f64.sqrt(), epsilon = 1e-12);

        assert_eq!(observer_rhs(0.7, 0.7, &[0.7], &p, q), 0.0);

        let innovation = |q: f64| observer_rhs(0.3, 1.1, &[-0.4], &p, q) - observer_rhs(0.3, 1.1, &[-0.4], &p, 0.0);
        assert_abs_diff_eq!(innovation(2.0 * q), 2.0 * innovation(q), epsilon = 1e-14);
    }

    #[test]
    fn parameter_validation() {
        assert!(NeighborWeights::new(1.0, 0.0, 1.0).is_err());
        assert!(NeighborWeights::new(0.5, 1.0, 1.0).is_err());
        assert!(NeighborWeights::new(1.0, 1.0, 1.0).is_ok());
        assert!(FilterParams::new(1.0, 0.0, vec![], 1.0).is_err());
        assert!(FilterParams::new(1.0, 1.0, vec![], 0.0).is_err());
        assert!(FilterParams::<f64>::steady(0.0, 1.0, vec![]).is_err());
        let p = FilterParams::steady(1.0, 1.0, vec![NeighborWeights::new(1.0, 1.0, 1.0).unwrap()]).unwrap();
        assert_abs_diff_eq!(p.xi, 2f64.sqrt(), epsilon = 1e-14);
    }

    fn grid(n: usize, t: f64) -> Vec<f64> {
        (0..n).map(|k| t * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn energy_zero_and_constant_delta() {
        let p = one_neighbor(2.0, 1.0);
        let times = grid(11, 1.0);
        let x = vec![0.5; 11];
        let zeros = vec![0.0; 11];
        let y_nbr = vec![x.clone()];
        let eta = vec![zeros.clone()];
        let meas = NodeMeasurements {
            y_self: &x,
            y_neighbors: &y_nbr,
        };
        let hyp = EnergyHypothesis {
            times: &times,
            x: &x,
            delta: &zeros,
            eta: &eta,
        };
        let e = evaluate_energy(&hyp, &meas, &p, 0.5).unwrap();
        assert_eq!(e.total, 0.0);

        let ones = vec![1.0; 11];
        let hyp = EnergyHypothesis { delta: &ones, ..hyp };
        let e = evaluate_energy(&hyp, &meas, &p, 0.5).unwrap();
        assert_abs_diff_eq!(e.model_energy, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(e.total, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn energy_grid_mismatch() {
        let p = one_neighbor(2.0, 1.0);
        let times = grid(5, 1.0);
        let short = vec![0.0; 4];
        let ok = vec![0.0; 5];
        let y_nbr = vec![ok.clone()];
        let eta = vec![ok.clone()];
        let meas = NodeMeasurements {
            y_self: &ok,
            y_neighbors: &y_nbr,
        };
        let hyp = EnergyHypothesis {
            times: &times,
            x: &short,
            delta: &ok,
            eta: &eta,
        };
        assert!(matches!(evaluate_energy(&hyp, &meas, &p, 0.0), Err(Error::GridMismatch(_))));
        let no_eta: Vec<Vec<f64>> = vec![];
        let hyp = EnergyHypothesis {
            x: &ok,
            eta: &no_eta,
            ..hyp
        };
        assert!(evaluate_energy(&hyp, &meas, &p, 0.0).is_err());
        assert!(reduced_energy(&hyp, &meas, &p, 0.0).is_ok());
    }

    #[test]
    fn exact_neighbor_measurement_forces_zero_residual() {
        // S = G means R_ij = 0
        let p = one_neighbor(1.0, 1.0);
        let times = grid(3, 1.0);
        let x = vec![0.0; 3];
        let y = vec![vec![1.0; 3]];
        let zeros = vec![0.0; 3];
        let meas = NodeMeasurements {
            y_self: &zeros,
            y_neighbors: &y,
        };
        let eta_opt = optimal_eta(&x, &meas, &p);
        assert_eq!(eta_opt[0], vec![1.0; 3]);
        let hyp = EnergyHypothesis {
            times: &times,
            x: &x,
            delta: &zeros,
            eta: &eta_opt,
        };
        let full = evaluate_energy(&hyp, &meas, &p, 0.0).unwrap();
        let reduced = reduced_energy(&hyp, &meas, &p, 0.0).unwrap();
        assert_abs_diff_eq!(full.total, reduced.total, epsilon = 1e-15);
        let bad = vec![vec![0.0; 3]];
        let hyp = EnergyHypothesis { eta: &bad, ..hyp };
        assert!(evaluate_energy(&hyp, &meas, &p, 0.0).unwrap().total > 1e100);
    }

    proptest! {
        #[test]
        fn eta_star_beats_perturbations(
            y in -10.0f64..10.0, x in -10.0f64..10.0,
            g in 0.05f64..5.0, r in 0.05f64..5.0, d in -3.0f64..3.0,
        ) {
            let cost = |eta: f64| 0.5 * ((y - x - eta).powi(2) / r + eta * eta / g);
            let best = eta_star(y, x, g, r);
            let gap = cost(best + d) - cost(best);
            let predicted = 0.5 * (1.0 / r + 1.0 / g) * d * d;
            prop_assert!((gap - predicted).abs() <= 1e-9 * (1.0 + predicted));
        }

        #[test]
        fn reduced_cost_equals_full_cost_at_eta_star(
            seed_vals in proptest::collection::vec(-3.0f64..3.0, 60),
            r_self in 0.1f64..3.0, s in 0.2f64..3.0, frac in 0.05f64..1.0, a in 0.2f64..2.0,
        ) {
            let g = s * frac;
            let p = FilterParams::new(1.3, r_self, vec![
                NeighborWeights::new(s, g, a).unwrap(),
                NeighborWeights::new(s, g, 1.0).unwrap(),
            ], 2.0).unwrap();
            let n = 15;
            let times = grid(n, 0.7);
            let x: Vec<f64> = seed_vals[0..n].to_vec();
            let delta: Vec<f64> = seed_vals[n..2 * n].to_vec();
            let y_self: Vec<f64> = seed_vals[2 * n..3 * n].to_vec();
            let y_nbr = vec![seed_vals[3 * n..4 * n].to_vec(), seed_vals[0..n].iter().map(|v| v * 0.5 + 1.0).collect()];
            let meas = NodeMeasurements { y_self: &y_self, y_neighbors: &y_nbr };
            let eta = optimal_eta(&x, &meas, &p);
            let hyp = EnergyHypothesis { times: &times, x: &x, delta: &delta, eta: &eta };
            let full = evaluate_energy(&hyp, &meas, &p, 0.3).unwrap();
            let reduced = reduced_energy(&hyp, &meas, &p, 0.3).unwrap();
            let pointwise = full.measurement_energy + full.approximation_energy;
            prop_assert!((pointwise - reduced.measurement_energy).abs() <= 1e-12 * (1.0 + pointwise));
            prop_assert!((full.total - reduced.total).abs() <= 1e-12 * (1.0 + full.total));
            prop_assert!(full.init_error >= 0.0 && full.model_energy >= 0.0);
        }

        #[test]
        fn riccati_distance_nonincreasing(q0 in 0.001f64..5.0, b in 0.1f64..3.0, r in 0.3f64..3.0, s in 0.3f64..3.0) {
            let p = FilterParams::new(b, r, vec![NeighborWeights::new(s, s, 1.0).unwrap()], 1.0).unwrap();
            let q_star = steady_state_gain(&p);
            let path = riccati_trajectory(q0, &p, 5.0, 0.01).unwrap();
            for w in path.windows(2) {
                prop_assert!((w[1] - q_star).abs() <= (w[0] - q_star).abs() + 1e-14);
            }
            prop_assert!(path.iter().all(|&q| q > 0.0));
        }
    }
}
