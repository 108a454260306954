use nalgebra::{DMatrix, Schur};
use num_complex::Complex;

use crate::analysis::GlobalSystem;
use crate::error::{Error, Result};
use crate::graph::null_space_dim;
use crate::scalar::Scalar;

fn cabs<T: Scalar>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenstructure of `F` relevant to convergence.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport<T: Scalar> {
    pub eigenvalues: Vec<Complex<T>>,
    pub zero_tolerance: T,
    /// Eigenvalues with `|λ| < tol`.
    pub zero_count: usize,
    /// Dimension of the null space of `F` (geometric multiplicity of zero).
    pub null_space_dim: usize,
    /// Eigenvalues with `Re λ < −tol`.
    pub stable_count: usize,
    /// Largest real part among eigenvalues with `|λ| >= tol`.
    pub spectral_abscissa_nonzero: Option<T>,
}

impl<T: Scalar> SpectralReport<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Zero count plus stable count accounts for the whole spectrum.
    pub fn spectrum_split_holds(&self) -> bool {
        self.zero_count + self.stable_count == self.dim() && self.zero_count == self.null_space_dim
    }
}

pub(crate) fn eigenvalues_of<T: Scalar>(m: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let schur = Schur::try_new(m.clone(), T::default_epsilon(), SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Solver("real Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn spectral_report<T: Scalar>(system: &GlobalSystem<T>, zero_tolerance: T) -> Result<SpectralReport<T>> {
    spectral_report_for(&system.f, zero_tolerance)
}

/// [`spectral_report`] for an arbitrary square matrix.
pub fn spectral_report_for<T: Scalar>(f: &DMatrix<T>, zero_tolerance: T) -> Result<SpectralReport<T>> {
    let mut eigenvalues = eigenvalues_of(f)?;
    eigenvalues.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal));
    let zero_count = eigenvalues.iter().filter(|&&z| cabs(z) < zero_tolerance).count();
    let stable_count = eigenvalues.iter().filter(|z| z.re < -zero_tolerance).count();
    let spectral_abscissa_nonzero = eigenvalues
        .iter()
        .filter(|&&z| cabs(z) >= zero_tolerance)
        .map(|z| z.re)
        .fold(None, |acc: Option<T>, re| Some(acc.map_or(re, |a| a.max(re))));
    // rank decisions relative to the largest singular value
    let scale = f.norm().max(T::one());
    let null_dim = null_space_dim(f, zero_tolerance / scale);
    Ok(SpectralReport {
        eigenvalues,
        zero_tolerance,
        zero_count,
        null_space_dim: null_dim,
        stable_count,
        spectral_abscissa_nonzero,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    /// `b` is the condition number of the stable eigenvector basis.
    Eigenbasis,
    /// Defective stable part: Schur-form bound at half the decay rate.
    Schur,
}

/// Constants of the exponential bound `‖z(t)‖ <= b ‖z(0)‖ e^(−a t)` for `z`
/// in the stable invariant subspace of `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpBound<T> {
    pub a: T,
    pub b: T,
    pub method: BoundMethod,
}

/// Computes `(a, b)` with `a` the distance of the nonzero spectrum from the
/// imaginary axis and `b` the condition number of the stable eigenvector
/// matrix. When the stable part is defective (or numerically so) a Schur
/// bound is used instead, which needs a semisimple zero eigenvalue.
pub fn exp_bound_constants<T: Scalar>(report: &SpectralReport<T>, system: &GlobalSystem<T>) -> Result<ExpBound<T>> {
    exp_bound_for(&system.f, report)
}

pub fn exp_bound_for<T: Scalar>(f: &DMatrix<T>, report: &SpectralReport<T>) -> Result<ExpBound<T>> {
    let abscissa = report
        .spectral_abscissa_nonzero
        .ok_or_else(|| Error::Solver("no nonzero eigenvalues".into()))?;
    if !(abscissa < T::zero()) {
        return Err(Error::Solver(format!("nonzero spectrum is not stable (abscissa {abscissa})")));
    }
    if report.zero_count != report.null_space_dim || report.zero_count + report.stable_count != report.dim() {
        return Err(Error::Solver("spectrum does not split into a semisimple zero part and a stable part".into()));
    }
    let a = -abscissa;
    let stable: Vec<Complex<T>> = report
        .eigenvalues
        .iter()
        .copied()
        .filter(|&z| cabs(z) >= report.zero_tolerance)
        .collect();
    match eigenbasis_condition(f, &stable) {
        Some(b) => Ok(ExpBound {
            a,
            b,
            method: BoundMethod::Eigenbasis,
        }),
        None => schur_bound(f, report.zero_count, a),
    }
}

fn to_complex<T: Scalar>(m: &DMatrix<T>) -> DMatrix<Complex<T>> {
    m.map(|v| Complex::new(v, T::zero()))
}

/// Condition number of a basis of eigenvectors for the given eigenvalues, or
/// `None` if an eigenvalue cluster lacks a full set of eigenvectors.
fn eigenbasis_condition<T: Scalar>(f: &DMatrix<T>, eigenvalues: &[Complex<T>]) -> Option<T> {
    let n = f.nrows();
    let fc = to_complex(f);
    let scale = f.norm().max(T::one());
    let cluster_tol = T::lit(1e-6) * scale;
    let defect_tol = T::lit(1e-7) * scale;

    let mut done = vec![false; eigenvalues.len()];
    let mut columns: Vec<nalgebra::DVector<Complex<T>>> = Vec::with_capacity(eigenvalues.len());
    for k in 0..eigenvalues.len() {
        if done[k] {
            continue;
        }
        let members: Vec<usize> = (k..eigenvalues.len())
            .filter(|&m| !done[m] && cabs(eigenvalues[m] - eigenvalues[k]) < cluster_tol)
            .collect();
        let mut centre = Complex::new(T::zero(), T::zero());
        for &m in &members {
            done[m] = true;
            centre += eigenvalues[m];
        }
        centre /= Complex::new(T::from_usize_lossy(members.len()), T::zero());

        let mut shifted = fc.clone();
        for d in 0..n {
            shifted[(d, d)] -= centre;
        }
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&x, &y| {
            svd.singular_values[x]
                .partial_cmp(&svd.singular_values[y])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let multiplicity = members.len();
        if svd.singular_values[order[multiplicity - 1]] > defect_tol {
            return None;
        }
        for &idx in order.iter().take(multiplicity) {
            // right singular vectors are the conjugated rows of Vᴴ
            columns.push(v_t.row(idx).transpose().map(|c| c.conj()));
        }
    }
    let basis = DMatrix::from_columns(&columns);
    let sv = basis.singular_values();
    let max = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    let min = sv.iter().fold(T::max_value().unwrap_or_else(T::one), |a, &b| a.min(b));
    let cond = max / min;
    if cond.is_finite() && cond < T::lit(1e10) {
        Some(cond)
    } else {
        None
    }
}

/// Schur bound on the stable part. The zero eigenvalues are shifted to −1
/// with the spectral projector `P₀ = R (LᴴR)⁻¹ Lᴴ` built from right and left
/// null bases; on the stable subspace `exp(F t) = exp((F − P₀) t)`. With
/// `F − P₀ = U (D + N) Uᴴ`, `‖exp(F t)‖ <= e^(−a' t) Σ_k (‖N‖ t)^k / k!`; the
/// polynomial is absorbed into `b` at half the rate `a'`.
fn schur_bound<T: Scalar>(f: &DMatrix<T>, q: usize, a: T) -> Result<ExpBound<T>> {
    let n = f.nrows();
    let fc = to_complex(f);
    let shifted = if q > 0 {
        let right = fc.clone().svd(false, true);
        let left = fc.adjoint().svd(false, true);
        let (Some(rv), Some(lv)) = (right.v_t, left.v_t) else {
            return Err(Error::Solver("SVD failed while building null projector".into()));
        };
        let smallest = |sv: &nalgebra::DVector<T>| {
            let mut order: Vec<usize> = (0..sv.len()).collect();
            order.sort_by(|&x, &y| sv[x].partial_cmp(&sv[y]).unwrap_or(std::cmp::Ordering::Equal));
            order.truncate(q);
            order
        };
        let r_idx = smallest(&right.singular_values);
        let l_idx = smallest(&left.singular_values);
        let r_basis = DMatrix::from_columns(&r_idx.iter().map(|&i| rv.row(i).adjoint()).collect::<Vec<_>>());
        let l_basis = DMatrix::from_columns(&l_idx.iter().map(|&i| lv.row(i).adjoint()).collect::<Vec<_>>());
        let gram = l_basis.adjoint() * &r_basis;
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Solver("zero eigenvalue is not semisimple".into()))?;
        let projector = &r_basis * gram_inv * l_basis.adjoint();
        fc - projector
    } else {
        fc
    };
    let schur = Schur::try_new(shifted, T::default_epsilon(), SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Solver("complex Schur iteration did not converge".into()))?;
    let (_, tri) = schur.unpack();
    let mut nil_norm_sq = T::zero();
    let mut abscissa = T::min_value().unwrap_or_else(|| -T::one());
    for r in 0..n {
        abscissa = abscissa.max(tri[(r, r)].re);
        for c in (r + 1)..n {
            nil_norm_sq += tri[(r, c)].norm_sqr();
        }
    }
    let rate = (-abscissa).min(a);
    if !(rate > T::zero()) {
        return Err(Error::Solver("shifted matrix is not stable".into()));
    }
    let half = rate * T::lit(0.5);
    let nil = nil_norm_sq.sqrt();
    // sup over t of e^(−half·t) Σ_{k<n} (nil·t)^k / k!, scanned on a grid
    // long enough for the exponential to dominate.
    let horizon = T::lit(40.0) * T::from_usize_lossy(n) / half;
    let samples = 20_000usize;
    let mut b = T::one();
    for s in 0..=samples {
        let t = horizon * T::from_usize_lossy(s) / T::from_usize_lossy(samples);
        let mut term = T::one();
        let mut poly = T::one();
        for k in 1..n {
            term = term * nil * t / T::from_usize_lossy(k);
            poly += term;
        }
        b = b.max(poly * (-half * t).exp());
    }
    // grid sampling of a smooth unimodal profile: small safety factor
    Ok(ExpBound {
        a: half,
        b: b * T::lit(1.01),
        method: BoundMethod::Schur,
    })
}
