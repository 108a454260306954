use nalgebra::DVector;

use crate::analysis::GlobalSystem;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Predicted consensus value with the pieces of its formula.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPrediction<T: Scalar> {
    pub x_star: T,
    /// `ωᵀ(I + RΔ̃) x(0)`.
    pub state_term: T,
    /// `G · ωᵀ(RΞΔ̃) e(0)`.
    pub error_term: T,
    /// `ωᵀ(I + RΔ̃) 1`.
    pub denominator: T,
    pub omega: DVector<T>,
}

fn check_len<T>(name: &str, v: &[T], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(invalid(name, format!("expected {n} values, got {}", v.len())))
    }
}

/// Consensus value reached from `(x(0), e(0))` without disturbances:
///
/// `x* = [ωᵀ(I + RΔ̃)x(0) − G·ωᵀ(RΞΔ̃)e(0)] / ωᵀ(I + RΔ̃)1`
///
/// where `ω` is the left null vector of `L`. The factor `G` is 1 for the
/// unit approximation weight; it comes from the conserved quantity of `F`
/// when the upper blocks carry `G/S`.
pub fn predict_equilibrium<T: Scalar>(
    system: &GlobalSystem<T>,
    omega: &DVector<T>,
    x0: &[T],
    e0: &[T],
) -> Result<EquilibriumPrediction<T>> {
    let n = system.node_count();
    check_len("omega", omega.as_slice(), n)?;
    check_len("x0", x0, n)?;
    check_len("e0", e0, n)?;
    let r = system.r;
    let mut state_term = T::zero();
    let mut error_term = T::zero();
    let mut denominator = T::zero();
    for i in 0..n {
        let weight = omega[i] * (T::one() + r * system.delta_tilde[(i, i)]);
        state_term += weight * x0[i];
        denominator += weight;
        error_term += system.g * omega[i] * r * system.xi[i] * system.delta_tilde[(i, i)] * e0[i];
    }
    if denominator == T::zero() || !denominator.is_finite() {
        return Err(Error::ZeroDenominator(denominator.as_f64()));
    }
    Ok(EquilibriumPrediction {
        x_star: (state_term - error_term) / denominator,
        state_term,
        error_term,
        denominator,
        omega: omega.clone(),
    })
}

/// Closed form for balanced graphs (`ω ∝ 1`):
///
/// `x* = [(1 + RΔ̃1)ᵀx(0) − G·(RΞΔ̃1)ᵀe(0)] / [N + (R/S) Σ d_i]`.
pub fn predict_equilibrium_balanced<T: Scalar>(system: &GlobalSystem<T>, x0: &[T], e0: &[T]) -> Result<T> {
    let n = system.node_count();
    check_len("x0", x0, n)?;
    check_len("e0", e0, n)?;
    let r = system.r;
    let degree_sum = (0..n).fold(T::zero(), |acc, i| acc - system.laplacian[(i, i)]);
    let denominator = T::from_usize_lossy(n) + r / system.s * degree_sum;
    let mut numerator = T::zero();
    for i in 0..n {
        let dt = system.delta_tilde[(i, i)];
        numerator += (T::one() + r * dt) * x0[i] - system.g * r * system.xi[i] * dt * e0[i];
    }
    if denominator == T::zero() {
        return Err(Error::ZeroDenominator(0.0));
    }
    Ok(numerator / denominator)
}

/// `(x − x*·1, e)` and its Euclidean norm.
pub fn disagreement_state<T: Scalar>(x: &[T], e: &[T], x_star: T) -> (DVector<T>, T) {
    let z = DVector::from_iterator(x.len() + e.len(), x.iter().map(|&v| v - x_star).chain(e.iter().copied()));
    let norm = z.norm();
    (z, norm)
}

/// Disagreement relative to the consensus value the current state would
/// reach: `(x − x*(x, e)·1, e)`. This is the projection of `(x, e)` onto the
/// stable subspace of `F`, and equals [`disagreement_state`] with the
/// initial `x*` while no disturbance acts.
pub fn projected_disagreement<T: Scalar>(
    system: &GlobalSystem<T>,
    omega: &DVector<T>,
    x: &[T],
    e: &[T],
) -> Result<(DVector<T>, T)> {
    let x_star = predict_equilibrium(system, omega, x, e)?.x_star;
    Ok(disagreement_state(x, e, x_star))
}
