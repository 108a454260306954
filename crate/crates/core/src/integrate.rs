//! Fixed-step classical Runge-Kutta integration.

use nalgebra::DVector;

use crate::scalar::Scalar;

/// A derivative evaluation produced NaN or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFiniteDerivative {
    pub time: f64,
}

/// One classical RK4 step of `z' = f(t, z)`.
pub fn rk4_step<T, F>(mut f: F, z: &DVector<T>, t: T, h: T) -> Result<DVector<T>, NonFiniteDerivative>
where
    T: Scalar,
    F: FnMut(T, &DVector<T>) -> DVector<T>,
{
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let mut stage = |time: T, state: &DVector<T>| {
        let d = f(time, state);
        if d.iter().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err(NonFiniteDerivative { time: time.as_f64() })
        }
    };
    let k1 = stage(t, z)?;
    let k2 = stage(t + half * h, &(z + &k1 * (half * h)))?;
    let k3 = stage(t + half * h, &(z + &k2 * (half * h)))?;
    let k4 = stage(t + h, &(z + &k3 * h))?;
    Ok(z + (k1 + k2 * two + k3 * two + k4) * (h / six))
}

/// Integrates from `t0` over `steps` steps of size `h`, returning every grid
/// point including the initial state.
pub fn rk4_trajectory<T, F>(
    mut f: F,
    z0: DVector<T>,
    t0: T,
    h: T,
    steps: usize,
) -> Result<Vec<DVector<T>>, NonFiniteDerivative>
where
    T: Scalar,
    F: FnMut(T, &DVector<T>) -> DVector<T>,
{
    let mut out = Vec::with_capacity(steps + 1);
    out.push(z0);
    for k in 0..steps {
        let t = t0 + h * T::from_usize_lossy(k);
        let next = rk4_step(&mut f, &out[k], t, h)?;
        out.push(next);
    }
    Ok(out)
}
