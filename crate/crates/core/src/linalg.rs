//! Dense complex helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative threshold under which leading eigenvalues count as tied.
const EIG_TIE_RTOL: f64 = 1e-12;

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `x^H A y`.
pub fn quad_form(x: &CVector, a: &CMatrix, y: &CVector) -> Complex64 {
    x.dotc(&(a * y))
}

pub fn outer(x: &CVector, y: &CVector) -> CMatrix {
    x * y.adjoint()
}

/// Largest absolute deviation from Hermitian symmetry.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Symmetrize `(M + M^H)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Column `i` of the returned matrix pairs with value `i`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Rotate `v` so its first significant entry is real and nonnegative.
pub fn normalize_phase(v: &mut CVector) {
    let scale = v.norm();
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-9 * scale).copied() {
        let rot = first.conj() / first.norm();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Principal eigenpair of a Hermitian matrix.
///
/// Tied leading eigenvalues are resolved deterministically: among the
/// phase-normalized candidate eigenvectors, the one whose first significant
/// entry has the largest real part wins.
pub fn principal_eigenpair(m: &CMatrix) -> (f64, CVector) {
    let (values, vectors) = hermitian_eigen(m);
    let top = values[0];
    let tol = EIG_TIE_RTOL * top.abs().max(f64::MIN_POSITIVE);
    let mut best: Option<CVector> = None;
    for (i, &val) in values.iter().enumerate() {
        if top - val > tol {
            break;
        }
        let mut v = vectors.column(i).into_owned();
        normalize_phase(&mut v);
        best = match best {
            None => Some(v),
            Some(b) => {
                if leading_real(&v) > leading_real(&b) {
                    Some(v)
                } else {
                    Some(b)
                }
            }
        };
    }
    (top, best.expect("nonempty spectrum"))
}

fn leading_real(v: &CVector) -> f64 {
    let scale = v.norm();
    v.iter().find(|z| z.norm() > 1e-9 * scale).map_or(0.0, |z| z.re)
}

/// Nuclear and spectral norm of a Hermitian matrix.
pub fn nuclear_and_spectral(m: &CMatrix) -> (f64, f64) {
    let (values, _) = hermitian_eigen(m);
    let nuclear = values.iter().map(|v| v.abs()).sum();
    let spectral = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    (nuclear, spectral)
}

/// Principal square root of a real symmetric PSD matrix. Eigenvalues that are
/// slightly negative from rounding are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}
