//! Small complex-matrix helpers shared by the qubit and circuit modules.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type MatN = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity2() -> Mat2 {
    Mat2::identity()
}

pub fn sigma_x() -> Mat2 {
    Mat2::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> Mat2 {
    Mat2::new(ZERO, -I, I, ZERO)
}

pub fn sigma_z() -> Mat2 {
    Mat2::new(ONE, ZERO, ZERO, -ONE)
}

/// `|0><1|`, which lowers the energy for `H = -(omega/2) sigma_z`.
pub fn sigma_minus() -> Mat2 {
    Mat2::new(ZERO, ONE, ZERO, ZERO)
}

/// `|1><0|`.
pub fn sigma_plus() -> Mat2 {
    Mat2::new(ZERO, ZERO, ONE, ZERO)
}

pub fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
    a * b - b * a
}

pub fn anticommutator(a: &Mat2, b: &Mat2) -> Mat2 {
    a * b + b * a
}

/// Largest entrywise modulus of `m - m^dagger`.
pub fn hermiticity_defect<R, Cc, S>(m: &nalgebra::Matrix<C64, R, Cc, S>) -> f64
where
    R: nalgebra::Dim,
    Cc: nalgebra::Dim,
    S: nalgebra::Storage<C64, R, Cc>,
{
    let (rows, cols) = m.shape();
    let mut worst = 0.0_f64;
    for i in 0..rows {
        for j in 0..cols {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff<R, Cc, S1, S2>(
    a: &nalgebra::Matrix<C64, R, Cc, S1>,
    b: &nalgebra::Matrix<C64, R, Cc, S2>,
) -> f64
where
    R: nalgebra::Dim,
    Cc: nalgebra::Dim,
    S1: nalgebra::Storage<C64, R, Cc>,
    S2: nalgebra::Storage<C64, R, Cc>,
{
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix. The input
/// is symmetrized first so rounding noise in the lower triangle is ignored.
pub fn hermitian_eigen(m: &MatN) -> (Vec<f64>, MatN) {
    let sym = (m + m.adjoint()) * c(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = MatN::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &MatN) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

pub fn to_dynamic(m: &Mat2) -> MatN {
    MatN::from_fn(2, 2, |i, j| m[(i, j)])
}

pub fn is_unitary(u: &MatN, tol: f64) -> bool {
    if u.nrows() != u.ncols() {
        return false;
    }
    let prod = u.adjoint() * u;
    let id = MatN::identity(u.nrows(), u.ncols());
    max_abs_diff(&prod, &id) <= tol
}
