//! Weighted linear least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative conditioning below which a normal matrix is treated as singular.
const SINGULAR_RCOND: f64 = 1e-13;

/// σ of the slope of a weighted straight-line fit with free intercept:
/// σ² = S / (S·Sxx − Sx²) with S = Σ1/σ², Sx = Σx/σ², Sxx = Σx²/σ².
pub fn slope_uncertainty(xs: &[f64], sigmas: &[f64]) -> Result<f64> {
    Ok(fit_line(xs, &vec![0.0; xs.len()], sigmas)?.slope_sigma())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// [[var(a), cov(a,b)], [cov(a,b), var(b)]]
    pub covariance: [[f64; 2]; 2],
    pub chi2: f64,
    pub dof: usize,
}

impl LineFit {
    pub fn slope_sigma(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn intercept_sigma(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }
}

fn check_inputs(xs: &[f64], ys: &[f64], sigmas: &[f64], min_points: usize) -> Result<()> {
    if xs.len() != ys.len() || xs.len() != sigmas.len() {
        return Err(Error::InvalidInput("x, y and σ must have equal lengths".into()));
    }
    if xs.len() < min_points {
        return Err(Error::InsufficientData(format!(
            "need at least {min_points} points, got {}",
            xs.len()
        )));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidInput(format!("uncertainties must be positive, got {s}")));
    }
    Ok(())
}

/// y = a + b·x with weights 1/σ².
pub fn fit_line(xs: &[f64], ys: &[f64], sigmas: &[f64]) -> Result<LineFit> {
    check_inputs(xs, ys, sigmas, 2)?;
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&x, &y), &sig) in xs.iter().zip(ys).zip(sigmas) {
        let w = 1.0 / (sig * sig);
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    // centred form of S·Sxx − Sx²
    let xm = sx / s;
    let sxx_c: f64 = xs
        .iter()
        .zip(sigmas)
        .map(|(&x, &sig)| (x - xm) * (x - xm) / (sig * sig))
        .sum();
    let spread = xs.iter().fold(0.0f64, |m, &x| m.max((x - xm).abs()));
    if !(sxx_c > 0.0) || spread <= 1e-12 * xm.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateAbscissa);
    }
    let delta = s * sxx_c;
    let slope = (s * sxy - sx * sy) / delta;
    let intercept = (sy - slope * sx) / s;
    let chi2 = xs
        .iter()
        .zip(ys)
        .zip(sigmas)
        .map(|((&x, &y), &sig)| ((y - intercept - slope * x) / sig).powi(2))
        .sum();
    Ok(LineFit {
        intercept,
        slope,
        covariance: [[sxx / delta, -sx / delta], [-sx / delta, s / delta]],
        chi2,
        dof: xs.len() - 2,
    })
}

/// y = b·x through the origin.
pub fn fit_proportional(xs: &[f64], ys: &[f64], sigmas: &[f64]) -> Result<(f64, f64, f64)> {
    check_inputs(xs, ys, sigmas, 1)?;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((&x, &y), &sig) in xs.iter().zip(ys).zip(sigmas) {
        let w = 1.0 / (sig * sig);
        sxx += w * x * x;
        sxy += w * x * y;
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    let chi2 = xs
        .iter()
        .zip(ys)
        .zip(sigmas)
        .map(|((&x, &y), &sig)| ((y - slope * x) / sig).powi(2))
        .sum();
    Ok((slope, (1.0 / sxx).sqrt(), chi2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub params: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
}

/// Solves min Σ ((y − A·β)/σ)² by the normal equations.
pub fn solve_weighted(design: &DMatrix<f64>, ys: &DVector<f64>, sigmas: &DVector<f64>) -> Result<LinearSolution> {
    let n = design.nrows();
    let p = design.ncols();
    if n < p {
        return Err(Error::InsufficientData(format!("{n} data for {p} parameters")));
    }
    let mut a = design.clone();
    let mut y = ys.clone();
    for i in 0..n {
        let w = 1.0 / sigmas[i];
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidInput(format!(
                "uncertainties must be positive, got {}",
                sigmas[i]
            )));
        }
        a.row_mut(i).scale_mut(w);
        y[i] *= w;
    }
    let normal = a.transpose() * &a;
    let covariance = invert_normal(&normal)?;
    let params = &covariance * (a.transpose() * &y);
    let resid = &y - &a * &params;
    Ok(LinearSolution {
        params,
        covariance,
        chi2: resid.norm_squared(),
    })
}

/// Inverse of a symmetric positive-definite normal matrix, rejecting
/// ill-conditioned designs.
pub fn invert_normal(normal: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = normal.nrows();
    // equilibrate so the test is independent of parameter units
    let d: Vec<f64> = (0..p).map(|i| normal[(i, i)].sqrt()).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::SingularDesign("a parameter has no leverage on the data".into()));
    }
    let scaled = DMatrix::from_fn(p, p, |i, j| normal[(i, j)] / (d[i] * d[j]));
    let eig = scaled.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > SINGULAR_RCOND * max) {
        return Err(Error::SingularDesign(format!(
            "normal matrix is singular to working precision (rcond {:.1e})",
            min / max
        )));
    }
    let inv = scaled
        .cholesky()
        .ok_or_else(|| Error::SingularDesign("normal matrix is not positive definite".into()))?
        .inverse();
    Ok(DMatrix::from_fn(p, p, |i, j| inv[(i, j)] / (d[i] * d[j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_slope_sigma() {
        let s = 0.3;
        let v = slope_uncertainty(&[0.0, 1.0], &[s, s]).unwrap();
        assert!((v - s * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_abscissas_decorrelate() {
        let fit = fit_line(&[-2.0, -1.0, 1.0, 2.0], &[1.0, 2.0, 2.5, 4.0], &[0.1; 4]).unwrap();
        assert!(fit.covariance[0][1].abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            slope_uncertainty(&[1.0, 1.0, 1.0], &[0.1; 3]),
            Err(Error::DegenerateAbscissa)
        ));
        assert!(matches!(
            slope_uncertainty(&[1.0], &[0.1]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            slope_uncertainty(&[1.0, 2.0], &[0.1, 0.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn exact_line_recovered() {
        let xs = [0.0, 0.5, 1.3, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 1.5 * x).collect();
        let fit = fit_line(&xs, &ys, &[0.1, 0.2, 0.1, 0.3]).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-13);
        assert!((fit.intercept - 3.0).abs() < 1e-13);
        assert!(fit.chi2 < 1e-20);
    }

    #[test]
    fn general_solver_matches_line_fit() {
        let xs = [0.1, 0.4, 0.7, 1.1, 1.5];
        let ys = [2.0, 1.7, 1.6, 1.1, 0.8];
        let sig = [0.05, 0.1, 0.07, 0.2, 0.1];
        let line = fit_line(&xs, &ys, &sig).unwrap();
        let a = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let sol = solve_weighted(&a, &DVector::from_column_slice(&ys), &DVector::from_column_slice(&sig)).unwrap();
        assert!((sol.params[1] - line.slope).abs() < 1e-12);
        assert!((sol.covariance[(1, 1)] - line.covariance[1][1]).abs() < 1e-12 * line.covariance[1][1]);
        assert!((sol.chi2 - line.chi2).abs() < 1e-10);
    }

    #[test]
    fn collinear_design_is_singular() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let r = solve_weighted(&a, &DVector::from_element(3, 1.0), &DVector::from_element(3, 1.0));
        assert!(matches!(r, Err(Error::SingularDesign(_))));
    }

    proptest! {
        #[test]
        fn slope_sigma_shift_invariant(
            xs in proptest::collection::vec(-5.0f64..5.0, 3..8),
            shift in -100.0f64..100.0,
        ) {
            let sig: Vec<f64> = (0..xs.len()).map(|i| 0.1 + 0.05 * i as f64).collect();
            let spread = xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 0.1);
            let a = slope_uncertainty(&xs, &sig).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
            let b = slope_uncertainty(&shifted, &sig).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a);
        }

        #[test]
        fn slope_sigma_homogeneous(k in 0.01f64..100.0) {
            let xs = [0.1, 0.3, 0.35, 0.6];
            let sig = [0.01, 0.02, 0.015, 0.03];
            let scaled: Vec<f64> = sig.iter().map(|s| s * k).collect();
            let a = slope_uncertainty(&xs, &sig).unwrap();
            let b = slope_uncertainty(&xs, &scaled).unwrap();
            prop_assert!((b - k * a).abs() < 1e-12 * b);
        }
    }
}
