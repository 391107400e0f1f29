use nalgebra::{DMatrix, DVector};
use qident::gauss::MvnSampler;

fn moments(sampler: &mut MvnSampler, count: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = sampler.dim();
    let mut mean = DVector::zeros(n);
    let mut second = DMatrix::zeros(n, n);
    let mut x = vec![0.0; n];
    for _ in 0..count {
        sampler.sample_into(&mut x);
        let v = DVector::from_column_slice(&x);
        mean += &v;
        second += &v * v.transpose();
    }
    mean /= count as f64;
    second /= count as f64;
    let cov = second - &mean * mean.transpose();
    (mean, cov)
}

fn assert_close(actual: &DMatrix<f64>, expected: &DMatrix<f64>, tol: f64) {
    let err = (actual - expected).abs().max();
    assert!(
        err <= tol,
        "max deviation {err} > {tol}\n{actual}\n{expected}"
    );
}

#[test]
fn identity_covariance() {
    let mut s = MvnSampler::new(DVector::zeros(3), DMatrix::identity(3, 3), 11).unwrap();
    let (mean, cov) = moments(&mut s, 1_000_000);
    assert!(mean.amax() < 0.005, "{mean}");
    assert_close(&cov, &DMatrix::identity(3, 3), 0.01);
}

#[test]
fn scalar_standard_deviation() {
    let mut s = MvnSampler::new(
        DVector::from_element(1, 1.5),
        DMatrix::from_element(1, 1, 4.0),
        12,
    )
    .unwrap();
    let (mean, cov) = moments(&mut s, 1_000_000);
    assert!((mean[0] - 1.5).abs() < 0.01);
    assert!(
        (cov[(0, 0)].sqrt() - 2.0).abs() < 0.005,
        "{}",
        cov[(0, 0)].sqrt()
    );
}

#[test]
fn example_covariance() {
    let h = DMatrix::from_row_slice(3, 3, &[2.5, -0.6, -0.4, -0.6, 2.0, 0.6, -0.4, 0.6, 1.5]);
    let mut s = MvnSampler::new(DVector::zeros(3), h.clone(), 13).unwrap();
    let (_, cov) = moments(&mut s, 1_000_000);
    assert_close(&cov, &h, 0.02);
}
