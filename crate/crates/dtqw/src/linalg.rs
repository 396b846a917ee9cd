//! Dense complex linear algebra for 2×2 and 4×4 matrices.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Unitarity tolerance on ‖U†U − I‖_max.
pub const UNITARY_TOL: f64 = 1e-12;
/// Tolerance on eigen-pair residuals and moduli.
pub const EIG_TOL: f64 = 1e-10;

/// Square complex matrix of dimension 2 or 4, stored row-major on the stack.
#[derive(Clone, Copy, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: [C64; 16],
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 4, "dimension must be 2 or 4");
        Self { dim, data: [ZERO; 16] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from rows; the row count fixes the dimension.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        if dim != 2 && dim != 4 {
            return Err(Error::InvalidInput(format!("dimension {dim} not in {{2, 4}}")));
        }
        let mut m = Self::zeros(dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::InvalidInput(format!("row {i} has {} entries, expected {dim}", r.len())));
            }
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    pub fn diag(entries: &[C64]) -> Result<Self> {
        let dim = entries.len();
        if dim != 2 && dim != 4 {
            return Err(Error::InvalidInput(format!("dimension {dim} not in {{2, 4}}")));
        }
        let mut m = Self::zeros(dim);
        for (i, v) in entries.iter().enumerate() {
            m[(i, i)] = *v;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.data.iter_mut().for_each(|v| *v *= s);
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = self[(j, i)];
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        let mut m = *self;
        m.data.iter_mut().for_each(|v| *v = v.conj());
        m
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data[..self.dim * self.dim].iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// ‖self − other‖_max; infinite on dimension mismatch.
    pub fn dist(&self, other: &Self) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        (*self - *other).max_abs()
    }

    /// ‖U†U − I‖_max.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self).dist(&Self::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn determinant(&self) -> C64 {
        self.as_dmatrix().determinant()
    }

    /// Block-diagonal 4×4 matrix from two 2×2 blocks.
    pub fn block_diag(a: &Self, b: &Self) -> Result<Self> {
        if a.dim != 2 || b.dim != 2 {
            return Err(Error::InvalidInput("block_diag expects two 2×2 blocks".into()));
        }
        let mut m = Self::zeros(4);
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] = a[(i, j)];
                m[(i + 2, j + 2)] = b[(i, j)];
            }
        }
        Ok(m)
    }

    /// The 2×2 block at block position (r, c) of a 4×4 matrix.
    pub fn block(&self, r: usize, c: usize) -> Self {
        assert_eq!(self.dim, 4, "block() needs a 4×4 matrix");
        let mut m = Self::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] = self[(2 * r + i, 2 * c + j)];
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    /// Outer product v w†.
    pub fn outer(v: &[C64], w: &[C64]) -> Result<Self> {
        let mut m = Self::zeros(v.len());
        if v.len() != w.len() {
            return Err(Error::InvalidInput("outer product of unequal lengths".into()));
        }
        for i in 0..v.len() {
            for j in 0..v.len() {
                m[(i, j)] = v[i] * w[j].conj();
            }
        }
        Ok(m)
    }

    fn as_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.dim && j < self.dim);
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.dim && j < self.dim);
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for ComplexMatrix {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        m
    }
}

impl Add for ComplexMatrix {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sum");
        let mut m = self;
        m.data.iter_mut().zip(rhs.data.iter()).for_each(|(a, b)| *a += b);
        m
    }
}

impl Sub for ComplexMatrix {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in difference");
        let mut m = self;
        m.data.iter_mut().zip(rhs.data.iter()).for_each(|(a, b)| *a -= b);
        m
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}×{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| format!("{:+.6}{:+.6}i", self[(i, j)].re, self[(i, j)].im))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Pauli matrix σ_j (j = 0 is the identity).
pub fn pauli(j: usize) -> ComplexMatrix {
    let rows: [[C64; 2]; 2] = match j {
        0 => [[ONE, ZERO], [ZERO, ONE]],
        1 => [[ZERO, ONE], [ONE, ZERO]],
        2 => [[ZERO, -I], [I, ZERO]],
        3 => [[ONE, ZERO], [ZERO, -ONE]],
        _ => panic!("Pauli index {j} out of range"),
    };
    ComplexMatrix::from_rows(&rows).expect("2×2")
}

/// Three real components, used as a rotation axis or Bloch coefficient vector.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PauliVector(pub [f64; 3]);

impl PauliVector {
    pub const Y: PauliVector = PauliVector([0.0, 1.0, 0.0]);
    pub const NU: PauliVector = PauliVector([0.0, std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2]);

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// v·σ.
    pub fn dot_sigma(&self) -> ComplexMatrix {
        (1..=3).fold(ComplexMatrix::zeros(2), |acc, j| acc + pauli(j).scale(C64::from(self.0[j - 1])))
    }
}

/// exp(−i angle/2 · axis·σ) = cos(angle/2)·I − i sin(angle/2)·axis·σ.
pub fn pauli_exp(axis: PauliVector, angle: f64) -> Result<ComplexMatrix> {
    if (axis.norm() - 1.0).abs() > UNITARY_TOL {
        return Err(Error::InvalidInput(format!("rotation axis {:?} is not normalized", axis.0)));
    }
    if !angle.is_finite() {
        return Err(Error::InvalidInput(format!("rotation angle {angle} is not finite")));
    }
    let (s, c) = (angle / 2.0).sin_cos();
    Ok(ComplexMatrix::identity(2).scale(C64::from(c)) - axis.dot_sigma().scale(I * s))
}

/// Kronecker product A ⊗ B of two 2×2 matrices.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.dim != 2 || b.dim != 2 {
        return Err(Error::InvalidInput(format!("tensor expects 2×2 factors, got {}×{} and {}×{}", a.dim, a.dim, b.dim, b.dim)));
    }
    let mut m = ComplexMatrix::zeros(4);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    Ok(m)
}

/// τ_i ⊗ σ_j.
pub fn tau_sigma(i: usize, j: usize) -> ComplexMatrix {
    tensor(&pauli(i), &pauli(j)).expect("2×2 factors")
}

/// One eigen-pair of a unitary matrix.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: C64,
    pub vector: Vec<C64>,
}

/// Eigen-decomposition of a unitary matrix via complex Schur factorisation.
///
/// Eigenvalues are sorted by principal argument in (−π, π], descending; each
/// eigenvector is normalized with its first nonzero component real-positive.
pub fn eig_unitary(u: &ComplexMatrix) -> Result<Vec<EigenPair>> {
    let defect = u.unitarity_defect();
    if defect > EIG_TOL {
        return Err(Error::InvalidInput(format!("matrix is not unitary (‖U†U − I‖ = {defect:e})")));
    }
    let (q, t) = Schur::new(u.as_dmatrix()).unpack();
    let n = u.dim;
    let mut pairs: Vec<EigenPair> = (0..n)
        .map(|j| {
            let value = t[(j, j)];
            let value = value / value.norm();
            let mut vector: Vec<C64> = (0..n).map(|i| q[(i, j)]).collect();
            fix_phase(&mut vector);
            EigenPair { value, vector }
        })
        .collect();
    for p in &pairs {
        let r: f64 = u
            .apply(&p.vector)
            .iter()
            .zip(&p.vector)
            .map(|(a, b)| (a - p.value * b).norm())
            .fold(0.0, f64::max);
        if r > EIG_TOL {
            return Err(Error::Numeric(format!("eigen-pair residual {r:e} exceeds {EIG_TOL:e}")));
        }
    }
    pairs.sort_by(|a, b| {
        let (x, y) = (principal_arg(a.value), principal_arg(b.value));
        if (x - y).abs() > 1e-12 {
            y.partial_cmp(&x).expect("finite")
        } else {
            lex_cmp(&a.vector, &b.vector)
        }
    });
    Ok(pairs)
}

/// Argument in (−π, π].
pub fn principal_arg(z: C64) -> f64 {
    let a = z.arg();
    if a <= -std::f64::consts::PI {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

fn fix_phase(v: &mut [C64]) {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let pivot = v.iter().copied().find(|c| c.norm() > 1e-12).unwrap_or(ONE);
    let phase = pivot.conj() / pivot.norm();
    v.iter_mut().for_each(|c| *c = *c * phase / norm);
}

fn lex_cmp(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if (p - q).abs() > 1e-12 {
                return q.partial_cmp(&p).expect("finite");
            }
        }
    }
    std::cmp::Ordering::Equal
}

/// Hermitian generator H with U = exp(−iH), eigenphases taken in (−π, π].
pub fn floquet_hamiltonian(u: &ComplexMatrix) -> Result<ComplexMatrix> {
    let pairs = eig_unitary(u)?;
    let mut h = ComplexMatrix::zeros(u.dim);
    for p in &pairs {
        let e = -principal_arg(p.value);
        h = h + ComplexMatrix::outer(&p.vector, &p.vector)?.scale(C64::from(e));
    }
    Ok(h)
}
