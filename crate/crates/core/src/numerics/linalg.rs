use faer::{Mat, Side as FaerSide};
use nalgebra::{DMatrix, DVector};

use super::NumericsError;
use crate::C64;

/// Lagrange basis values ℓⱼ(x) for interpolation nodes `nodes`.
pub fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    if let Some(j) = nodes.iter().position(|&xj| xj == x) {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        return e;
    }
    (0..n)
        .map(|j| {
            let mut l = 1.0;
            for (k, xk) in nodes.iter().enumerate() {
                if k != j {
                    l *= (x - xk) / (nodes[j] - xk);
                }
            }
            l
        })
        .collect()
}

const DENSE_NALGEBRA_MAX: usize = 64;

fn hermitian_residual(h: &DMatrix<C64>) -> f64 {
    let scale = h.norm().max(f64::MIN_POSITIVE);
    (h - h.adjoint()).norm() / scale
}

fn to_faer(h: &DMatrix<C64>) -> Mat<faer::c64> {
    Mat::from_fn(h.nrows(), h.ncols(), |i, j| {
        let z = h[(i, j)];
        faer::c64::new(z.re, z.im)
    })
}

/// Normalizes the phase of a vector so that its first non-negligible entry is positive real.
pub(crate) fn normalize_phase(v: &mut [C64]) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12 * scale).copied() {
        let ph = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= ph;
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and orthonormal eigenvectors (columns).
pub fn herm_eig(h: &DMatrix<C64>, eig_tol: f64) -> Result<(Vec<f64>, DMatrix<C64>), NumericsError> {
    assert!(h.is_square(), "herm_eig needs a square matrix");
    let residual = hermitian_residual(h);
    if residual > eig_tol {
        return Err(NumericsError::NotHermitian { residual });
    }
    let n = h.nrows();
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let mut pairs: Vec<(f64, DVector<C64>)> = if n <= DENSE_NALGEBRA_MAX {
        let e = sym.symmetric_eigen();
        (0..n).map(|i| (e.eigenvalues[i], e.eigenvectors.column(i).into_owned())).collect()
    } else {
        let m = to_faer(&sym);
        let e = m
            .self_adjoint_eigen(FaerSide::Lower)
            .map_err(|e| NumericsError::EigenFailure(format!("{e:?}")))?;
        let s = e.S();
        let u = e.U();
        (0..n)
            .map(|i| {
                let v = DVector::from_fn(n, |r, _| {
                    let z = u[(r, i)];
                    C64::new(z.re, z.im)
                });
                (s[i].re, v)
            })
            .collect()
    };
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let values = pairs.iter().map(|p| p.0).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (i, (_, v)) in pairs.iter().enumerate() {
        let mut v: Vec<C64> = v.iter().copied().collect();
        normalize_phase(&mut v);
        vectors.set_column(i, &DVector::from_vec(v));
    }
    Ok((values, vectors))
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn herm_eigenvalues(h: &DMatrix<C64>, eig_tol: f64) -> Result<Vec<f64>, NumericsError> {
    let residual = hermitian_residual(h);
    if residual > eig_tol {
        return Err(NumericsError::NotHermitian { residual });
    }
    let n = h.nrows();
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let mut values: Vec<f64> = if n <= DENSE_NALGEBRA_MAX {
        sym.symmetric_eigenvalues().iter().copied().collect()
    } else {
        to_faer(&sym)
            .self_adjoint_eigenvalues(FaerSide::Lower)
            .map_err(|e| NumericsError::EigenFailure(format!("{e:?}")))?
    };
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(values)
}

/// Singular values (descending) and the right singular vector of the smallest one.
pub fn smallest_singular(a: &DMatrix<C64>) -> (Vec<f64>, DVector<C64>) {
    let n = a.ncols();
    if a.nrows().max(n) <= DENSE_NALGEBRA_MAX {
        let svd = a.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
        let sv = idx.iter().map(|&i| svd.singular_values[i]).collect();
        let last = *idx.last().unwrap();
        let v = v_t.row(last).adjoint().into_owned();
        return (sv, v);
    }
    let m = to_faer(a);
    let svd = m.svd().expect("SVD converged");
    let s = svd.S();
    let v = svd.V();
    let k = s.dim() - 1;
    let sv = (0..s.dim()).map(|i| s[i].re).collect();
    let vec = DVector::from_fn(n, |r, _| {
        let z = v[(r, k)];
        C64::new(z.re, z.im)
    });
    (sv, vec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn swap_matrix_eigenvalues() {
        let h = DMatrix::from_row_slice(2, 2, &[r(0.0), r(1.0), r(1.0), r(0.0)]);
        let (vals, vecs) = herm_eig(&h, 1e-10).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        for (i, &v) in vals.iter().enumerate() {
            let res = &h * vecs.column(i) - vecs.column(i) * r(v);
            assert!(res.norm() < 1e-12);
        }
    }

    #[test]
    fn trivial_spectra() {
        let id = DMatrix::<C64>::identity(3, 3);
        assert_eq!(herm_eigenvalues(&id, 1e-10).unwrap(), vec![1.0, 1.0, 1.0]);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![r(5.0), r(2.0)]));
        let v = herm_eigenvalues(&d, 1e-10).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-14 && (v[1] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[r(0.0), r(1.0), r(0.0), r(0.0)]);
        assert!(matches!(herm_eig(&h, 1e-10), Err(NumericsError::NotHermitian { .. })));
    }

    #[test]
    fn large_path_agrees_with_small_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 80;
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let h = &a + a.adjoint();
        let (vals, vecs) = herm_eig(&h, 1e-10).unwrap();
        let scale = h.norm();
        for i in [0, n / 2, n - 1] {
            let res = &h * vecs.column(i) - vecs.column(i) * r(vals[i]);
            assert!(res.norm() <= 1e-10 * scale);
        }
        let sub = h.view((0, 0), (40, 40)).into_owned();
        let small = herm_eigenvalues(&sub, 1e-10).unwrap();
        let trace: f64 = (0..40).map(|i| sub[(i, i)].re).sum();
        assert!((small.iter().sum::<f64>() - trace).abs() < 1e-10 * scale);
    }

    #[test]
    fn smallest_singular_vector_spans_kernel() {
        let a = DMatrix::from_row_slice(2, 2, &[r(1.0), r(2.0), r(2.0), r(4.0)]);
        let (s, v) = smallest_singular(&a);
        assert!(s[1] < 1e-14);
        assert!((&a * v).norm() < 1e-14);
    }
}
