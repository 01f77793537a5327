//! Hermitian eigensolver wrapper.

use nalgebra::{RealField, SymmetricEigen};

use crate::algebra::CMat;
use crate::scalar::Real;

/// Scalars that also support nalgebra's eigensolvers.
pub trait EigenReal: Real + RealField {}

impl<T: Real + RealField> EigenReal for T {}

/// Eigenvalues and eigenvector columns of a Hermitian matrix, unsorted.
pub fn hermitian_eigen<T: EigenReal>(a: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let eig = SymmetricEigen::new(a.clone());
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Eigenvalues and eigenvector columns of a real symmetric matrix, ascending.
pub fn symmetric_eigen_sorted<T: EigenReal>(
    a: &nalgebra::DMatrix<T>,
) -> (Vec<T>, nalgebra::DMatrix<T>) {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors =
        nalgebra::DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}
