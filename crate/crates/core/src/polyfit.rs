//! Conjugate Bayesian polynomial regression: a compact harness for
//! demonstrating evidence-based model selection.
//!
//! Fitting y = Σ β_k x^k + ε with ε ~ N(0, σ²) and a unit-information
//! g-prior β ~ N(0, n·σ²·(XᵀX)⁻¹) gives the marginal likelihood in closed
//! form. Higher-degree models always fit the training data better (lower
//! RMSE), but the evidence's complexity penalty grows with the parameter
//! count, so the generating degree wins model selection.

use alloc::string::String;
use alloc::vec::Vec;

use crate::linalg::{LuFactors, Matrix};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolyfitError {
    #[error("{0}")]
    Invalid(String),
    #[error("normal equations are singular (degree {degree} with {points} points)")]
    Singular { degree: usize, points: usize },
}

/// Least-squares fit of a polynomial of the given degree.
#[derive(Debug, Clone)]
pub struct PolyFit {
    /// Coefficients in increasing-power order.
    pub coefficients: Vec<f64>,
    /// Root-mean-squared training residual.
    pub rmse: f64,
}

fn design_matrix(xs: &[f64], degree: usize) -> Matrix {
    let n = xs.len();
    let mut x = Matrix::zeros(n, degree + 1);
    for (i, &v) in xs.iter().enumerate() {
        let mut power = 1.0;
        for k in 0..=degree {
            x[(i, k)] = power;
            power *= v;
        }
    }
    x
}

/// XᵀX and Xᵀy assembled for the normal equations.
fn normal_equations(x: &Matrix, ys: &[f64]) -> (Matrix, Vec<f64>) {
    let xt = x.transpose();
    let xtx = xt.matmul(x);
    let xty = xt.matvec(ys);
    (xtx, xty)
}

pub fn fit(xs: &[f64], ys: &[f64], degree: usize) -> Result<PolyFit, PolyfitError> {
    if xs.len() != ys.len() {
        return Err(PolyfitError::Invalid("x and y lengths differ".into()));
    }
    if xs.len() <= degree {
        return Err(PolyfitError::Invalid(alloc::format!(
            "degree {degree} needs more than {degree} points, got {}",
            xs.len()
        )));
    }
    let x = design_matrix(xs, degree);
    let (xtx, xty) = normal_equations(&x, ys);
    let lu = LuFactors::new(&xtx)
        .map_err(|_| PolyfitError::Singular { degree, points: xs.len() })?;
    let coefficients = lu.solve(&xty);
    let fitted = x.matvec(&coefficients);
    let sse: f64 = fitted.iter().zip(ys).map(|(f, y)| (y - f) * (y - f)).sum();
    Ok(PolyFit { coefficients, rmse: math::sqrt(sse / xs.len() as f64) })
}

impl PolyFit {
    pub fn predict(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        let mut power = 1.0;
        for &c in &self.coefficients {
            acc += c * power;
            power *= x;
        }
        acc
    }
}

/// Log marginal likelihood of the degree-`degree` polynomial under the
/// unit-information g-prior (g = n):
///
/// log p(y) = −n/2·ln(2πσ²) − p/2·ln(1+g) − (yᵀy − g/(1+g)·ŷᵀŷ) / (2σ²)
pub fn log_evidence(
    xs: &[f64],
    ys: &[f64],
    degree: usize,
    noise_sd: f64,
) -> Result<f64, PolyfitError> {
    if !(noise_sd > 0.0) {
        return Err(PolyfitError::Invalid("noise_sd must be positive".into()));
    }
    let n = xs.len();
    let fit = fit(xs, ys, degree)?;
    let x = design_matrix(xs, degree);
    let fitted = x.matvec(&fit.coefficients);
    let yty: f64 = ys.iter().map(|y| y * y).sum();
    let yhat_sq: f64 = fitted.iter().map(|f| f * f).sum();

    let g = n as f64;
    let p = (degree + 1) as f64;
    let sigma2 = noise_sd * noise_sd;
    Ok(-(n as f64) * 0.5 * (math::LN_2PI + math::ln(sigma2))
        - 0.5 * p * math::ln_1p(g)
        - 0.5 * (yty - g / (1.0 + g) * yhat_sq) / sigma2)
}

/// Evidence for a range of degrees, as (degree, log evidence, rmse) rows.
pub fn degree_sweep(
    xs: &[f64],
    ys: &[f64],
    degrees: core::ops::RangeInclusive<usize>,
    noise_sd: f64,
) -> Result<Vec<(usize, f64, f64)>, PolyfitError> {
    degrees
        .map(|d| {
            let le = log_evidence(xs, ys, d, noise_sd)?;
            let f = fit(xs, ys, d)?;
            Ok((d, le, f.rmse))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::abs;

    #[test]
    fn exact_fit_of_low_degree_data() {
        let xs: Vec<f64> = (0..8).map(|i| -1.0 + 0.25 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 2.0 - 3.0 * x + 0.5 * x * x).collect();
        let f = fit(&xs, &ys, 2).unwrap();
        assert!(abs(f.coefficients[0] - 2.0) < 1e-10);
        assert!(abs(f.coefficients[1] + 3.0) < 1e-10);
        assert!(abs(f.coefficients[2] - 0.5) < 1e-10);
        assert!(f.rmse < 1e-10);
        assert!(abs(f.predict(2.0) - (2.0 - 6.0 + 2.0)) < 1e-9);
    }

    #[test]
    fn rmse_never_increases_with_degree() {
        let xs: Vec<f64> = (0..30).map(|i| -1.0 + i as f64 / 15.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| x * x * x + 0.1 * math::sin(7.0 * i as f64))
            .collect();
        let mut last = f64::INFINITY;
        for d in 0..=6 {
            let f = fit(&xs, &ys, d).unwrap();
            assert!(f.rmse <= last + 1e-12);
            last = f.rmse;
        }
    }

    #[test]
    fn evidence_matches_quadrature_for_constant_model() {
        // Degree 0: a single location parameter with prior N(0, g sigma^2 / n).
        let xs = [0.1, 0.4, 0.7, 1.0];
        let ys = [1.2, 0.8, 1.1, 0.9];
        let sigma = 0.3;
        let n = xs.len() as f64;
        let g = n;
        let prior_sd = math::sqrt(g * sigma * sigma / n);

        let mut total = 0.0;
        let steps = 400_000;
        let (lo, hi) = (-10.0, 10.0);
        let h = (hi - lo) / steps as f64;
        for i in 0..steps {
            let beta = lo + (i as f64 + 0.5) * h;
            let mut loglik = 0.0;
            for &y in &ys {
                loglik += math::normal_log_pdf(y, beta, sigma);
            }
            total += math::exp(loglik + math::normal_log_pdf(beta, 0.0, prior_sd)) * h;
        }
        let oracle = math::ln(total);
        let closed = log_evidence(&xs, &ys, 0, sigma).unwrap();
        assert!(abs(closed - oracle) < 1e-6, "closed {closed} vs quadrature {oracle}");
    }

    #[test]
    fn evidence_penalizes_overfitting_on_clean_cubic() {
        let xs: Vec<f64> = (0..40).map(|i| -1.0 + i as f64 / 19.5).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 1.0 + 2.0 * x - x * x + 3.0 * x * x * x).collect();
        let rows = degree_sweep(&xs, &ys, 3..=6, 0.2).unwrap();
        // All degrees >= 3 fit perfectly; the evidence must strictly favor
        // the smallest adequate degree.
        let best = rows.iter().max_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap();
        assert_eq!(best.0, 3);
        for w in rows.windows(2) {
            assert!(w[0].1 > w[1].1, "evidence must decrease past the true degree");
        }
    }
}
