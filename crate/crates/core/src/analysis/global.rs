use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::{steady_state_gain, FilterParams};
use crate::graph::{build_laplacian, NetworkTopology};
use crate::scalar::Scalar;

/// Linear closed loop in `(x, e)` coordinates with uniform `R`, `S`, `G`:
///
/// ```text
/// F = [ (G/S)·L        −(G/S)·Δ        ]
///     [ Q*·L/S         −Q*(I/R + Δ/S)  ]
/// ```
///
/// With `G = 1` the upper blocks are `L̃ = L/S` and `−Δ̃ = −Δ/S`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSystem<T: Scalar> {
    pub f: DMatrix<T>,
    pub laplacian: DMatrix<T>,
    /// `L/S`.
    pub l_tilde: DMatrix<T>,
    /// `Δ/S`.
    pub delta_tilde: DMatrix<T>,
    pub q_star: DVector<T>,
    /// Diagonal of `Ξ`.
    pub xi: DVector<T>,
    pub r: T,
    pub s: T,
    pub g: T,
}

impl<T: Scalar> GlobalSystem<T> {
    pub fn node_count(&self) -> usize {
        self.q_star.len()
    }

    /// Builds `F` from its blocks; exposed so callers can check the block
    /// structure independently.
    pub fn from_blocks(
        laplacian: DMatrix<T>,
        q_star: DVector<T>,
        xi: DVector<T>,
        r: T,
        s: T,
        g: T,
    ) -> Self {
        let n = laplacian.nrows();
        let degree = DMatrix::from_diagonal(&laplacian.diagonal().map(|d| -d));
        let l_tilde = &laplacian / s;
        let delta_tilde = &degree / s;
        let q = DMatrix::from_diagonal(&q_star);
        let mut f = DMatrix::zeros(2 * n, 2 * n);
        f.view_mut((0, 0), (n, n)).copy_from(&(&l_tilde * g));
        f.view_mut((0, n), (n, n)).copy_from(&(-&delta_tilde * g));
        f.view_mut((n, 0), (n, n)).copy_from(&(&q * &l_tilde));
        let inner = DMatrix::<T>::identity(n, n) / r + &delta_tilde;
        f.view_mut((n, n), (n, n)).copy_from(&(-(&q * inner)));
        Self {
            f,
            laplacian,
            l_tilde,
            delta_tilde,
            q_star,
            xi,
            r,
            s,
            g,
        }
    }
}

fn same<T: Scalar>(a: T, b: T) -> bool {
    (a - b).abs() <= T::lit(1e-12) * T::one().max(a.abs()).max(b.abs())
}

/// Assembles `F` for a topology whose nodes share `R`, `S` and `G`.
/// `B_i` (hence `Q_i*`) and `Ξ_i` may differ between nodes.
pub fn assemble_global<T: Scalar>(topology: &NetworkTopology<T>, params: &[FilterParams<T>]) -> Result<GlobalSystem<T>> {
    let n = topology.node_count();
    if params.len() != n {
        return Err(Error::NonUniform(format!("{} parameter sets for {n} nodes", params.len())));
    }
    let r = params[0].r_self;
    let mut sg: Option<(T, T)> = None;
    for (i, p) in params.iter().enumerate() {
        if !same(p.r_self, r) {
            return Err(Error::NonUniform(format!("node {} has R = {} but node 1 has R = {r}", i + 1, p.r_self)));
        }
        if p.neighbors.len() != topology.neighbor_count(i) {
            return Err(Error::NonUniform(format!("node {} parameters do not match its edges", i + 1)));
        }
        for (w, e) in p.neighbors.iter().zip(topology.neighbors(i)) {
            if !same(w.coupling, e.weight) {
                return Err(Error::NonUniform(format!("node {} edge weight differs from topology", i + 1)));
            }
            match sg {
                None => sg = Some((w.s, w.g)),
                Some((s, g)) if same(s, w.s) && same(g, w.g) => {}
                Some((s, g)) => {
                    return Err(Error::NonUniform(format!(
                        "node {} uses (S, G) = ({}, {}) but another edge uses ({s}, {g})",
                        i + 1,
                        w.s,
                        w.g
                    )))
                }
            }
        }
    }
    // A graph without edges has no S or G; any positive value gives the same F.
    let (s, g) = sg.unwrap_or((T::one(), T::one()));
    let q_star = DVector::from_iterator(n, params.iter().map(steady_state_gain));
    let xi = DVector::from_iterator(n, params.iter().map(|p| p.xi));
    Ok(GlobalSystem::from_blocks(
        build_laplacian(topology).into_inner(),
        q_star,
        xi,
        r,
        s,
        g,
    ))
}

impl<T: Scalar> GlobalSystem<T> {
    /// Upper-row scale `G/S` applied to `L` and `Δ`.
    pub fn trust(&self) -> T {
        self.g / self.s
    }
}
