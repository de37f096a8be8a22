use nalgebra::DMatrix;

/// Symmetric square root `V diag(sqrt(max(l, 0))) V^T` of a PSD matrix.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 || m.iter().all(|v| *v == 0.0) {
        return DMatrix::zeros(n, n);
    }
    let eig = m.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 0.3]);
        let r = psd_sqrt(&m);
        assert!((&r * &r - &m).abs().max() < 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let r = psd_sqrt(&singular);
        assert!((&r * &r - &singular).abs().max() < 1e-14);
    }
}
