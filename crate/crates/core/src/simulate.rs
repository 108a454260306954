//! Closed-loop simulation of the filter-based consensus network and of the
//! classical consensus baseline on one fixed-step RK4 grid.

use nalgebra::DVector;

use crate::disturbance::{DisturbanceGenerator, DisturbanceProfile, DisturbanceSample};
use crate::error::{invalid, Error, Result};
use crate::filter::{neighbor_estimate, steady_state_gain, FilterParams};
use crate::graph::NetworkTopology;
use crate::integrate::rk4_step;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiccatiMode {
    /// Gains fixed at `Q_i*` for the whole run.
    #[default]
    Steady,
    /// Gains integrated from `Q_i(0) = 1/Ξ_i` alongside the states.
    Dynamic,
}

/// Fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Scenario<T: Scalar> {
    pub topology: NetworkTopology<T>,
    pub params: Vec<FilterParams<T>>,
    /// True initial states `x(0)`.
    pub x0: Vec<T>,
    /// Filter priors `x_i0`, also the initial estimates `x̂_i(0)`.
    pub prior: Vec<T>,
    pub disturbance: DisturbanceProfile,
    pub step: T,
    pub horizon: T,
    pub riccati: RiccatiMode,
    pub record_measurements: bool,
}

impl<T: Scalar> Scenario<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.topology.node_count();
        if self.params.len() != n {
            return Err(invalid("filter", format!("{} parameter sets for {n} nodes", self.params.len())));
        }
        for (i, p) in self.params.iter().enumerate() {
            if p.neighbors.len() != self.topology.neighbor_count(i) {
                return Err(invalid(
                    "filter",
                    format!("node {} has {} neighbour weights for {} edges", i + 1, p.neighbors.len(), self.topology.neighbor_count(i)),
                ));
            }
        }
        if self.x0.len() != n {
            return Err(invalid("initial.x", format!("expected {n} values, got {}", self.x0.len())));
        }
        if self.prior.len() != n {
            return Err(invalid("initial.prior", format!("expected {n} values, got {}", self.prior.len())));
        }
        if self.x0.iter().chain(&self.prior).any(|v| !v.is_finite()) {
            return Err(invalid("initial", "initial values must be finite"));
        }
        if !(self.step > T::zero()) || !self.step.is_finite() {
            return Err(invalid("integration.h", format!("must be positive, got {}", self.step)));
        }
        if !(self.horizon >= self.step) || !self.horizon.is_finite() {
            return Err(invalid("integration.t_end", format!("must be at least h = {}, got {}", self.step, self.horizon)));
        }
        self.disturbance.validate()
    }

    pub fn step_count(&self) -> usize {
        (self.horizon / self.step).round().to_usize().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn steady_gains(&self) -> Vec<T> {
        self.params.iter().map(steady_state_gain).collect()
    }
}

/// Time-indexed record of one run. Row `k` is time `k·h`.
///
/// For the classical baseline there is no filter: `x_hat` repeats `x`, `e`
/// is zero and `q` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub step: T,
    pub times: Vec<T>,
    pub x: Vec<Vec<T>>,
    pub x_hat: Vec<Vec<T>>,
    pub e: Vec<Vec<T>>,
    pub u: Vec<Vec<T>>,
    pub q: Vec<Vec<T>>,
    /// `y_ii` per row, when measurement recording is enabled.
    pub y_self: Vec<Vec<T>>,
    /// `y_ij` per row in topology edge order, when enabled.
    pub y_edge: Vec<Vec<T>>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> Trajectory<T> {
    fn with_capacity(step: T, rows: usize) -> Self {
        Self {
            step,
            times: Vec::with_capacity(rows),
            x: Vec::with_capacity(rows),
            x_hat: Vec::with_capacity(rows),
            e: Vec::with_capacity(rows),
            u: Vec::with_capacity(rows),
            q: Vec::new(),
            y_self: Vec::new(),
            y_edge: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn final_x(&self) -> &[T] {
        self.x.last().map_or(&[], Vec::as_slice)
    }

    pub fn final_e(&self) -> &[T] {
        self.e.last().map_or(&[], Vec::as_slice)
    }

    /// `Σ_i (x_i − mean(x))²` for every row.
    pub fn deviation_from_mean(&self) -> Vec<T> {
        self.x.iter().map(|row| sum_sq_deviation(row)).collect()
    }
}

pub(crate) fn sum_sq_deviation<T: Scalar>(row: &[T]) -> T {
    if row.is_empty() {
        return T::zero();
    }
    let mean = row.iter().fold(T::zero(), |a, &b| a + b) / T::from_usize_lossy(row.len());
    row.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
}

/// Measurements `y_ii = x_i + D_ii ε_ii` and `y_ij = x_j + D_ij ε_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet<T> {
    pub y_self: Vec<T>,
    /// Topology edge order.
    pub y_edge: Vec<T>,
}

/// Builds the measurement set from the true states. `d_self[i]` is `D_ii`
/// and `d_edge[k]` is `D_ij` of edge `k`.
pub fn synthesize_measurements<T: Scalar>(
    x: &[T],
    disturbance: &DisturbanceSample<T>,
    topology: &NetworkTopology<T>,
    d_self: &[T],
    d_edge: &[T],
) -> MeasurementSet<T> {
    let y_self = x
        .iter()
        .zip(d_self)
        .zip(&disturbance.eps_self)
        .map(|((&xi, &d), &eps)| xi + d * eps)
        .collect();
    let y_edge = topology
        .edges()
        .iter()
        .zip(d_edge)
        .zip(&disturbance.eps_edge)
        .map(|((e, &d), &eps)| x[e.observed] + d * eps)
        .collect();
    MeasurementSet { y_self, y_edge }
}

/// Measurement coefficients `(D_ii, D_ij)` with `D = sqrt(R)` and
/// `R_ij = S_ij − G_ij`.
pub fn measurement_coefficients<T: Scalar>(topology: &NetworkTopology<T>, params: &[FilterParams<T>]) -> (Vec<T>, Vec<T>) {
    let d_self = params.iter().map(FilterParams::d_self).collect();
    let mut d_edge = Vec::with_capacity(topology.edge_count());
    for (i, p) in params.iter().enumerate() {
        debug_assert_eq!(p.neighbors.len(), topology.neighbor_count(i));
        d_edge.extend(p.neighbors.iter().map(|w| w.r().max(T::zero()).sqrt()));
    }
    (d_self, d_edge)
}

/// Time derivatives of the closed loop at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRates<T> {
    pub x: Vec<T>,
    pub x_hat: Vec<T>,
    pub q: Vec<T>,
    pub u: Vec<T>,
}

/// Right-hand side of the closed loop:
///
/// `x_i' = u_i + B_i δ_i`, `x̂_i' = u_i + Q_i[(y_ii − x̂_i)/R_ii + Σ a_ij (y_ij − x̂_i)/S_ij]`,
/// `u_i = Σ a_ij (x̂_ij − x̂_i)`, and `Q_i' = B_i² − Q_i²(1/R_ii + Σ a_ij/S_ij)`.
pub fn closed_loop_rates<T: Scalar>(
    topology: &NetworkTopology<T>,
    params: &[FilterParams<T>],
    x_hat: &[T],
    q: &[T],
    measurements: &MeasurementSet<T>,
    disturbance: &DisturbanceSample<T>,
) -> ClosedLoopRates<T> {
    let n = topology.node_count();
    let mut out = ClosedLoopRates {
        x: vec![T::zero(); n],
        x_hat: vec![T::zero(); n],
        q: vec![T::zero(); n],
        u: vec![T::zero(); n],
    };
    for i in 0..n {
        let p = &params[i];
        let xh = x_hat[i];
        let mut u = T::zero();
        let mut innovation = (measurements.y_self[i] - xh) / p.r_self;
        for (w, k) in p.neighbors.iter().zip(topology.edge_range(i)) {
            let y = measurements.y_edge[k];
            u += w.coupling * (neighbor_estimate(xh, y, w.g, w.s) - xh);
            innovation += w.coupling * (y - xh) / w.s;
        }
        out.u[i] = u;
        out.x[i] = u + p.b * disturbance.delta[i];
        out.x_hat[i] = u + q[i] * innovation;
        out.q[i] = p.b * p.b - q[i] * q[i] * p.information();
    }
    out
}

fn check_finite<T: Scalar>(z: &DVector<T>, step: usize, time: T) -> Result<()> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step, time: time.as_f64() })
    }
}

/// Integrates the filter-based consensus network.
pub fn simulate_mef<T: Scalar>(scenario: &Scenario<T>) -> Result<Trajectory<T>> {
    scenario.validate()?;
    let topo = &scenario.topology;
    let params = &scenario.params;
    let n = topo.node_count();
    let steps = scenario.step_count();
    let h = scenario.step;
    let dynamic = scenario.riccati == RiccatiMode::Dynamic;
    let q_steady = scenario.steady_gains();
    let (d_self, d_edge) = measurement_coefficients(topo, params);
    let mut gen = DisturbanceGenerator::<T>::new(scenario.disturbance, n, topo.edge_count(), h.as_f64())?;

    let mut traj = Trajectory::with_capacity(h, steps + 1);
    if !topo.is_strongly_connected() {
        traj.warnings
            .push("topology is not strongly connected; consensus is not guaranteed".to_string());
    }

    let state_len = if dynamic { 3 * n } else { 2 * n };
    let mut z = DVector::zeros(state_len);
    for i in 0..n {
        z[i] = scenario.x0[i];
        z[n + i] = scenario.prior[i];
        if dynamic {
            z[2 * n + i] = params[i].initial_gain();
        }
    }
    let gains = |z: &DVector<T>| -> Vec<T> {
        if dynamic {
            z.rows(2 * n, n).iter().copied().collect()
        } else {
            q_steady.clone()
        }
    };

    let record = |traj: &mut Trajectory<T>, gen: &mut DisturbanceGenerator<T>, k: usize, z: &DVector<T>| {
        let t = h * T::from_usize_lossy(k);
        let x: Vec<T> = z.rows(0, n).iter().copied().collect();
        let xh: Vec<T> = z.rows(n, n).iter().copied().collect();
        let q = gains(z);
        let dist = gen.sample(k, t.as_f64());
        let meas = synthesize_measurements(&x, &dist, topo, &d_self, &d_edge);
        let rates = closed_loop_rates(topo, params, &xh, &q, &meas, &dist);
        traj.times.push(t);
        traj.e.push(xh.iter().zip(&x).map(|(&a, &b)| a - b).collect());
        traj.x.push(x);
        traj.x_hat.push(xh);
        traj.u.push(rates.u);
        traj.q.push(q);
        if scenario.record_measurements {
            traj.y_self.push(meas.y_self);
            traj.y_edge.push(meas.y_edge);
        }
    };

    record(&mut traj, &mut gen, 0, &z);
    for k in 0..steps {
        let t = h * T::from_usize_lossy(k);
        let rhs = |time: T, state: &DVector<T>| {
            let x: Vec<T> = state.rows(0, n).iter().copied().collect();
            let xh: Vec<T> = state.rows(n, n).iter().copied().collect();
            let q = gains(state);
            let dist = gen.sample(k, time.as_f64());
            let meas = synthesize_measurements(&x, &dist, topo, &d_self, &d_edge);
            let rates = closed_loop_rates(topo, params, &xh, &q, &meas, &dist);
            let mut dz = DVector::zeros(state_len);
            for i in 0..n {
                dz[i] = rates.x[i];
                dz[n + i] = rates.x_hat[i];
                if dynamic {
                    dz[2 * n + i] = rates.q[i];
                }
            }
            dz
        };
        z = rk4_step(rhs, &z, t, h).map_err(|e| Error::NonFinite { step: k, time: e.time })?;
        check_finite(&z, k + 1, t + h)?;
        record(&mut traj, &mut gen, k + 1, &z);
    }
    Ok(traj)
}

/// Integrates the classical baseline `x' = −L_std x + δ` (equivalently
/// `x' = L x + δ` in the consensus-flow convention) under the same
/// disturbance realisation as [`simulate_mef`].
pub fn simulate_classical<T: Scalar>(scenario: &Scenario<T>) -> Result<Trajectory<T>> {
    scenario.validate()?;
    let topo = &scenario.topology;
    let n = topo.node_count();
    let steps = scenario.step_count();
    let h = scenario.step;
    let mut gen = DisturbanceGenerator::<T>::new(scenario.disturbance, n, topo.edge_count(), h.as_f64())?;

    let flow = |x: &DVector<T>| -> DVector<T> {
        DVector::from_fn(n, |i, _| {
            topo.neighbors(i)
                .iter()
                .fold(T::zero(), |acc, e| acc + e.weight * (x[e.observed] - x[i]))
        })
    };

    let mut traj = Trajectory::with_capacity(h, steps + 1);
    if !topo.is_strongly_connected() {
        traj.warnings
            .push("topology is not strongly connected; consensus is not guaranteed".to_string());
    }
    let push = |traj: &mut Trajectory<T>, k: usize, z: &DVector<T>| {
        let x: Vec<T> = z.iter().copied().collect();
        traj.times.push(h * T::from_usize_lossy(k));
        traj.u.push(flow(z).iter().copied().collect());
        traj.e.push(vec![T::zero(); n]);
        traj.x_hat.push(x.clone());
        traj.x.push(x);
    };

    let mut z = DVector::from_column_slice(&scenario.x0);
    push(&mut traj, 0, &z);
    for k in 0..steps {
        let t = h * T::from_usize_lossy(k);
        let rhs = |time: T, state: &DVector<T>| {
            let dist = gen.sample(k, time.as_f64());
            flow(state) + DVector::from_column_slice(&dist.delta)
        };
        z = rk4_step(rhs, &z, t, h).map_err(|e| Error::NonFinite { step: k, time: e.time })?;
        check_finite(&z, k + 1, t + h)?;
        push(&mut traj, k + 1, &z);
    }
    Ok(traj)
}
