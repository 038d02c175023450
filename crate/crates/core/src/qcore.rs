//! Dense complex linear algebra on one- and two-qubit Hilbert spaces.
//!
//! All containers are dimension-checked against the two supported sizes, 2
//! and 4. Two-qubit indices follow the ordering {|00>, |01>, |10>, |11>}
//! with qubit A leftmost, so a composite index is `2*a + b`.

use crate::error::{Error, Result};

pub type Complex = num_complex::Complex64;

/// Hermiticity budget accepted when validating a density matrix.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Unit-trace budget accepted when validating a density matrix.
pub const TRACE_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted as numerical noise on a positive
/// semidefinite matrix; anything below this is a genuine violation.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
/// Default relative off-diagonal norm at which the Jacobi iteration stops.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-13;
/// Hard cap on Jacobi sweeps; 4x4 Hermitian problems converge in a handful.
pub const MAX_JACOBI_SWEEPS: usize = 100;

const SUPPORTED_DIMS: [usize; 2] = [2, 4];

fn check_dim(dim: usize) -> Result<()> {
    if SUPPORTED_DIMS.contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension { dim })
    }
}

/// The two qubits of the composite system; A is the left tensor factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Qubit {
    A,
    B,
}

/// One of the three Pauli operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn matrix(self) -> SquareMatrix {
        match self {
            PauliAxis::X => pauli_x(),
            PauliAxis::Y => pauli_y(),
            PauliAxis::Z => pauli_z(),
        }
    }

    pub fn label(self) -> char {
        match self {
            PauliAxis::X => 'x',
            PauliAxis::Y => 'y',
            PauliAxis::Z => 'z',
        }
    }
}

/// Dense row-major complex square matrix of dimension 2 or 4.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<Complex>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            data: vec![Complex::new(0.0, 0.0); dim * dim],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.set(i, i, Complex::new(1.0, 0.0));
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<Complex>]) -> Result<Self> {
        let dim = rows.len();
        check_dim(dim)?;
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    /// Diagonal matrix from real entries.
    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, Complex::new(d, 0.0));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex) {
        self.data[r * self.dim + c] = v;
    }

    pub fn mul(&self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = SquareMatrix {
            dim: n,
            data: vec![Complex::new(0.0, 0.0); n * n],
        };
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.get(r, k) * rhs.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    pub fn add(&self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        SquareMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        SquareMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, factor: Complex) -> SquareMatrix {
        SquareMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn scale_re(&self, factor: f64) -> SquareMatrix {
        self.scale(Complex::new(factor, 0.0))
    }

    pub fn adjoint(&self) -> SquareMatrix {
        let n = self.dim;
        let mut out = SquareMatrix {
            dim: n,
            data: vec![Complex::new(0.0, 0.0); n * n],
        };
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.get(c, r).conj());
            }
        }
        out
    }

    pub fn conjugate(&self) -> SquareMatrix {
        SquareMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> SquareMatrix {
        let n = self.dim;
        let mut out = SquareMatrix {
            dim: n,
            data: vec![Complex::new(0.0, 0.0); n * n],
        };
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.get(c, r));
            }
        }
        out
    }

    pub fn trace(&self) -> Complex {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise deviation from the adjoint.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                let d = (self.get(r, c) - self.get(c, r).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, rhs: &SquareMatrix) -> f64 {
        assert_eq!(self.dim, rhs.dim, "matrix comparison dimension mismatch");
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Kronecker product; both factors must be single-qubit operators so the
    /// result stays within the supported dimensions.
    pub fn tensor(&self, rhs: &SquareMatrix) -> Result<SquareMatrix> {
        if self.dim != 2 || rhs.dim != 2 {
            return Err(Error::UnsupportedDimension {
                dim: self.dim * rhs.dim,
            });
        }
        let mut out = SquareMatrix::zeros(4)?;
        for ar in 0..2 {
            for ac in 0..2 {
                let a = self.get(ar, ac);
                for br in 0..2 {
                    for bc in 0..2 {
                        out.set(2 * ar + br, 2 * ac + bc, a * rhs.get(br, bc));
                    }
                }
            }
        }
        Ok(out)
    }
}

pub fn pauli_x() -> SquareMatrix {
    let o = Complex::new(0.0, 0.0);
    let l = Complex::new(1.0, 0.0);
    SquareMatrix::from_rows(&[vec![o, l], vec![l, o]]).expect("2x2 literal")
}

pub fn pauli_y() -> SquareMatrix {
    let o = Complex::new(0.0, 0.0);
    let i = Complex::new(0.0, 1.0);
    SquareMatrix::from_rows(&[vec![o, -i], vec![i, o]]).expect("2x2 literal")
}

pub fn pauli_z() -> SquareMatrix {
    let o = Complex::new(0.0, 0.0);
    let l = Complex::new(1.0, 0.0);
    SquareMatrix::from_rows(&[vec![l, o], vec![o, -l]]).expect("2x2 literal")
}

/// Normalized state vector of dimension 2 or 4.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    dim: usize,
    amp: Vec<Complex>,
}

impl PureState {
    pub fn new(amp: Vec<Complex>) -> Result<Self> {
        check_dim(amp.len())?;
        if amp.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState {
                reason: "non-finite amplitude".into(),
            });
        }
        let norm_sqr: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > 2.0 * TRACE_TOL {
            return Err(Error::InvalidState {
                reason: format!("state norm^2 = {norm_sqr} is not 1"),
            });
        }
        Ok(Self {
            dim: amp.len(),
            amp,
        })
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        check_dim(dim)?;
        if index >= dim {
            return Err(Error::InvalidParameter {
                name: "index",
                value: index as f64,
                expected: "a basis label below the dimension",
            });
        }
        let mut amp = vec![Complex::new(0.0, 0.0); dim];
        amp[index] = Complex::new(1.0, 0.0);
        Ok(Self { dim, amp })
    }

    pub fn qubit(c0: f64, c1: f64) -> Result<Self> {
        Self::new(vec![Complex::new(c0, 0.0), Complex::new(c1, 0.0)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amp
    }

    /// <self|rhs>
    pub fn inner(&self, rhs: &PureState) -> Complex {
        assert_eq!(self.dim, rhs.dim, "inner product dimension mismatch");
        self.amp
            .iter()
            .zip(&rhs.amp)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn tensor(&self, rhs: &PureState) -> Result<PureState> {
        if self.dim != 2 || rhs.dim != 2 {
            return Err(Error::UnsupportedDimension {
                dim: self.dim * rhs.dim,
            });
        }
        let mut amp = Vec::with_capacity(4);
        for a in &self.amp {
            for b in &rhs.amp {
                amp.push(a * b);
            }
        }
        Ok(PureState { dim: 4, amp })
    }

    pub fn density(&self) -> DensityMatrix {
        let n = self.dim;
        let mut m = SquareMatrix::zeros(n).expect("validated dim");
        for r in 0..n {
            for c in 0..n {
                m.set(r, c, self.amp[r] * self.amp[c].conj());
            }
        }
        DensityMatrix::trusted(m)
    }
}

/// Validated density matrix: Hermitian, unit trace, positive semidefinite
/// up to [`EIGENVALUE_FLOOR`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: SquareMatrix,
}

impl DensityMatrix {
    pub fn new(mat: SquareMatrix) -> Result<Self> {
        if mat.data.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState {
                reason: "non-finite entry".into(),
            });
        }
        let defect = mat.hermiticity_defect();
        if defect > HERMITICITY_TOL {
            return Err(Error::NotHermitian {
                asymmetry: defect,
                tol: HERMITICITY_TOL,
            });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState {
                reason: format!("trace {} is not 1", tr.re),
            });
        }
        let eig = hermitian_eigensystem(&mat, DEFAULT_EIGEN_TOL)?;
        if eig.values[0] < EIGENVALUE_FLOOR {
            return Err(Error::InvalidState {
                reason: format!("negative eigenvalue {}", eig.values[0]),
            });
        }
        Ok(Self { mat })
    }

    /// Wraps a matrix known valid by construction; full validation still
    /// runs in debug builds.
    pub(crate) fn trusted(mat: SquareMatrix) -> Self {
        debug_assert!(
            mat.hermiticity_defect() <= HERMITICITY_TOL
                && (mat.trace().re - 1.0).abs() <= TRACE_TOL,
            "trusted density matrix violates its invariants"
        );
        Self { mat }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        let m = SquareMatrix::identity(dim)?.scale_re(1.0 / dim as f64);
        Ok(Self::trusted(m))
    }

    pub fn dim(&self) -> usize {
        self.mat.dim
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.mat
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex {
        self.mat.get(r, c)
    }
}

/// Ascending eigenvalues with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: SquareMatrix,
}

impl Eigensystem {
    pub fn vector(&self, k: usize) -> Vec<Complex> {
        (0..self.vectors.dim).map(|r| self.vectors.get(r, k)).collect()
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations, iterated until the off-diagonal Frobenius norm falls below
/// `tol * ||h||_F` (at most [`MAX_JACOBI_SWEEPS`] sweeps).
///
/// The rotation order is fixed, so identical input produces identical
/// output. Diagonal updates use closed-form real arithmetic and the pivot
/// is zeroed explicitly; exact zero structure in the input is preserved,
/// which keeps rank-deficient spectra exact.
pub fn hermitian_eigensystem(h: &SquareMatrix, tol: f64) -> Result<Eigensystem> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
            expected: "a finite positive tolerance",
        });
    }
    let defect = h.hermiticity_defect();
    let norm = h.frobenius_norm();
    if defect > tol.max(HERMITICITY_TOL) * norm.max(1.0) {
        return Err(Error::NotHermitian {
            asymmetry: defect,
            tol: tol.max(HERMITICITY_TOL),
        });
    }
    let n = h.dim;

    // Work on the exactly Hermitian part so conjugate symmetry holds
    // bitwise throughout the iteration.
    let mut a = h.clone();
    for r in 0..n {
        let d = a.get(r, r);
        a.set(r, r, Complex::new(d.re, 0.0));
        for c in (r + 1)..n {
            let avg = (a.get(r, c) + a.get(c, r).conj()).scale(0.5);
            a.set(r, c, avg);
            a.set(c, r, avg.conj());
        }
    }

    let mut v = SquareMatrix::identity(n)?;
    let stop = tol * norm;
    let skip = stop / (n * n) as f64;

    let off_norm = |a: &SquareMatrix| -> f64 {
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    acc += a.get(r, c).norm_sqr();
                }
            }
        }
        acc.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= stop {
            break;
        }
        if sweeps >= MAX_JACOBI_SWEEPS {
            return Err(Error::NonConvergence {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let mag = apq.norm();
                if mag <= skip {
                    continue;
                }
                let alpha = a.get(p, p).re;
                let beta = a.get(q, q).re;
                let phase = apq / mag;
                let delta = (alpha - beta) / (2.0 * mag);
                let t = if delta >= 0.0 {
                    1.0 / (delta + (delta * delta + 1.0).sqrt())
                } else {
                    -1.0 / (-delta + (delta * delta + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let sp = phase.scale(s);
                let spc = phase.conj().scale(s);

                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    let new_p = aip.scale(c) + spc * aiq;
                    let new_q = aiq.scale(c) - sp * aip;
                    a.set(i, p, new_p);
                    a.set(p, i, new_p.conj());
                    a.set(i, q, new_q);
                    a.set(q, i, new_q.conj());
                }
                a.set(
                    p,
                    p,
                    Complex::new(c * c * alpha + 2.0 * c * s * mag + s * s * beta, 0.0),
                );
                a.set(
                    q,
                    q,
                    Complex::new(s * s * alpha - 2.0 * c * s * mag + c * c * beta, 0.0),
                );
                a.set(p, q, Complex::new(0.0, 0.0));
                a.set(q, p, Complex::new(0.0, 0.0));

                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, vip.scale(c) + spc * viq);
                    v.set(i, q, viq.scale(c) - sp * vip);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(i, i)
            .re
            .partial_cmp(&a.get(j, j).re)
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i).re).collect();
    let mut vectors = SquareMatrix::zeros(n)?;
    for (k, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, k, v.get(r, src));
        }
    }
    Ok(Eigensystem { values, vectors })
}

/// Trace over one qubit of a two-qubit state, keeping `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: Qubit) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension { dim: rho.dim() });
    }
    let mut out = SquareMatrix::zeros(2)?;
    for r in 0..2 {
        for c in 0..2 {
            let mut acc = Complex::new(0.0, 0.0);
            for t in 0..2 {
                let (row, col) = match keep {
                    Qubit::A => (2 * r + t, 2 * c + t),
                    Qubit::B => (2 * t + r, 2 * t + c),
                };
                acc += rho.entry(row, col);
            }
            out.set(r, c, acc);
        }
    }
    Ok(DensityMatrix::trusted(out))
}

/// The map rho -> m rho m^dagger, returned unnormalized together with its
/// trace (the branch weight).
pub fn conjugate_map(rho: &DensityMatrix, m: &SquareMatrix) -> Result<(SquareMatrix, f64)> {
    if rho.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: m.dim(),
        });
    }
    let out = m.mul(rho.matrix()).mul(&m.adjoint());
    let weight = out.trace().re;
    Ok((out, weight))
}
