//! Two-qubit entanglement monotones.

use crate::error::{Error, Result};
use crate::qcore::{
    hermitian_eigensystem, pauli_y, DensityMatrix, SquareMatrix, DEFAULT_EIGEN_TOL,
    EIGENVALUE_FLOOR,
};

/// Spin-flipped state (sigma_y x sigma_y) rho* (sigma_y x sigma_y).
pub fn spin_flip(rho: &DensityMatrix) -> Result<SquareMatrix> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension { dim: rho.dim() });
    }
    let yy = pauli_y().tensor(&pauli_y())?;
    Ok(yy.mul(&rho.matrix().conjugate()).mul(&yy))
}

/// Square root of a positive semidefinite Hermitian matrix via its
/// eigensystem. Eigenvalues inside the numerical noise band around zero are
/// treated as exact zeros so that rank-deficient inputs do not leak
/// O(sqrt(eps)) errors through the square root; anything below
/// [`EIGENVALUE_FLOOR`] is a genuine negativity and is rejected.
fn sqrt_psd(h: &SquareMatrix) -> Result<SquareMatrix> {
    let eig = hermitian_eigensystem(h, DEFAULT_EIGEN_TOL)?;
    let noise = 10.0 * DEFAULT_EIGEN_TOL * h.frobenius_norm().max(1.0);
    let n = h.dim();
    let mut out = SquareMatrix::zeros(n)?;
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam < EIGENVALUE_FLOOR {
            return Err(Error::InvalidState {
                reason: format!("eigenvalue {lam} below the positivity floor"),
            });
        }
        if lam <= noise {
            continue;
        }
        let root = lam.sqrt();
        let v = eig.vector(k);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, out.get(r, c) + (v[r] * v[c].conj()).scale(root));
            }
        }
    }
    Ok(out)
}

/// Wootters concurrence, max(0, l1 - l2 - l3 - l4) with l_i the descending
/// square roots of the eigenvalues of sqrt(rho) rho~ sqrt(rho).
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension { dim: rho.dim() });
    }
    let flipped = spin_flip(rho)?;
    let root = sqrt_psd(rho.matrix())?;
    let m = root.mul(&flipped).mul(&root);
    let eig = hermitian_eigensystem(&m, DEFAULT_EIGEN_TOL)?;
    let noise = 10.0 * DEFAULT_EIGEN_TOL * m.frobenius_norm().max(1.0);
    let mut lams = [0.0f64; 4];
    for (k, &mu) in eig.values.iter().enumerate() {
        if mu < EIGENVALUE_FLOOR {
            return Err(Error::InvalidState {
                reason: format!("eigenvalue {mu} below the positivity floor"),
            });
        }
        lams[k] = if mu <= noise { 0.0 } else { mu.sqrt() };
    }
    // Ascending in, so the largest root is last.
    Ok((lams[3] - lams[2] - lams[1] - lams[0]).max(0.0))
}

/// Partial transpose over qubit B.
pub fn partial_transpose_b(rho: &DensityMatrix) -> Result<SquareMatrix> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension { dim: rho.dim() });
    }
    let mut out = SquareMatrix::zeros(4)?;
    for a in 0..2 {
        for b in 0..2 {
            for ap in 0..2 {
                for bp in 0..2 {
                    // (a b, a' b') <- (a b', a' b)
                    out.set(2 * a + b, 2 * ap + bp, rho.entry(2 * a + bp, 2 * ap + b));
                }
            }
        }
    }
    Ok(out)
}

/// Negativity: the total weight of negative eigenvalues of the partial
/// transpose. Positive exactly when the state is entangled.
pub fn negativity(rho: &DensityMatrix) -> Result<f64> {
    let pt = partial_transpose_b(rho)?;
    let eig = hermitian_eigensystem(&pt, DEFAULT_EIGEN_TOL)?;
    Ok(eig.values.iter().map(|&v| (-v).max(0.0)).sum())
}
