//! Least-squares extraction of expansion coefficients from ε sweeps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition number above which a fit is rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// One coefficient per requested exponent, in input order.
    pub coefficients: Vec<f64>,
    /// Coefficient of the `ε^e ln(1/ε)` column, if requested.
    pub log_coefficient: Option<f64>,
    /// Root-mean-square of the unweighted residuals.
    pub residual: f64,
    /// Condition number of the column-equilibrated weighted design matrix.
    pub condition: f64,
}

impl FitResult {
    /// Evaluates the fitted model at `epsilon`.
    pub fn predict(&self, exponents: &[f64], log_exponent: Option<f64>, epsilon: f64) -> f64 {
        let mut v: f64 = self
            .coefficients
            .iter()
            .zip(exponents)
            .map(|(c, e)| c * epsilon.powf(*e))
            .sum();
        if let (Some(c), Some(e)) = (self.log_coefficient, log_exponent) {
            v += c * epsilon.powf(e) * (1.0 / epsilon).ln();
        }
        v
    }
}

/// Fits `value ≈ Σ cₖ ε^{eₖ} [+ c ε^e ln(1/ε)]` with relative weights.
pub fn fit_expansion(samples: &[(f64, f64)], exponents: &[f64], log_exponent: Option<f64>) -> Result<FitResult> {
    let cols = exponents.len() + usize::from(log_exponent.is_some());
    if cols == 0 {
        return Err(Error::InvalidParams("no basis functions".into()));
    }
    if samples.len() < cols + 2 {
        return Err(Error::InvalidParams(format!(
            "{} samples for {cols} unknowns; need at least {}",
            samples.len(),
            cols + 2
        )));
    }
    for (i, a) in exponents.iter().enumerate() {
        if exponents[i + 1..].iter().any(|b| b == a) {
            return Err(Error::InvalidParams(format!("repeated exponent {a}")));
        }
    }
    if samples.iter().any(|&(e, v)| !(e > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParams("samples need epsilon > 0 and finite values".into()));
    }

    let rows = samples.len();
    let scale = samples.iter().map(|s| s.1.abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let mut design = DMatrix::<f64>::zeros(rows, cols);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (i, &(eps, val)) in samples.iter().enumerate() {
        let w = 1.0 / val.abs().max(1e-12 * scale);
        for (j, e) in exponents.iter().enumerate() {
            design[(i, j)] = w * eps.powf(*e);
        }
        if let Some(e) = log_exponent {
            design[(i, cols - 1)] = w * eps.powf(e) * (1.0 / eps).ln();
        }
        rhs[i] = w * val;
    }
    let col_scale: Vec<f64> = (0..cols)
        .map(|j| {
            let n = design.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in col_scale.iter().enumerate() {
        design.column_mut(j).scale_mut(1.0 / s);
    }

    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::Conditioning { condition });
    }
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Domain(format!("least-squares solve failed: {e}")))?;
    let unscaled: Vec<f64> = (0..cols).map(|j| sol[j] / col_scale[j]).collect();

    let (coefficients, log_coefficient) = if log_exponent.is_some() {
        (unscaled[..cols - 1].to_vec(), Some(unscaled[cols - 1]))
    } else {
        (unscaled, None)
    };
    let mut fit = FitResult {
        coefficients,
        log_coefficient,
        residual: 0.0,
        condition,
    };
    let sq: f64 = samples
        .iter()
        .map(|&(e, v)| {
            let r = fit.predict(exponents, log_exponent, e) - v;
            r * r
        })
        .sum();
    fit.residual = (sq / rows as f64).sqrt();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> Vec<f64> {
        (0..9).map(|i| 1e-3 * 10f64.powf(i as f64 / 8.0)).collect()
    }

    #[test]
    fn recovers_linear_model() {
        let s: Vec<(f64, f64)> = grid().into_iter().map(|e| (e, 1.0 - 2.0 * e)).collect();
        let f = fit_expansion(&s, &[0.0, 1.0], None).unwrap();
        assert_relative_eq!(f.coefficients[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(f.coefficients[1], -2.0, max_relative = 1e-10);
        assert!(f.residual < 1e-14);
    }

    #[test]
    fn recovers_log_column() {
        let s: Vec<(f64, f64)> = grid().into_iter().map(|e| (e, 1.0 - e * (1.0 / e).ln())).collect();
        let f = fit_expansion(&s, &[0.0], Some(1.0)).unwrap();
        assert!((f.log_coefficient.unwrap() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn recovers_singular_leading_term() {
        let s: Vec<(f64, f64)> = grid()
            .into_iter()
            .map(|e| (e, 3.5 * e.powf(-4.0) + 0.8 * e.powf(-3.0) - 2.0))
            .collect();
        let f = fit_expansion(&s, &[-4.0, -3.0, 0.0], None).unwrap();
        assert_relative_eq!(f.coefficients[0], 3.5, max_relative = 1e-9);
        assert_relative_eq!(f.coefficients[1], 0.8, max_relative = 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s: Vec<(f64, f64)> = grid().into_iter().map(|e| (e, e)).collect();
        assert!(fit_expansion(&s[..3], &[0.0, 1.0], None).is_err());
        assert!(fit_expansion(&s, &[1.0, 1.0], None).is_err());
    }

    #[test]
    fn nearly_collinear_columns_are_flagged() {
        let s: Vec<(f64, f64)> = grid().into_iter().map(|e| (e, 1.0 + e)).collect();
        let err = fit_expansion(&s, &[1.0, 1.0 + 1e-13, 0.0], None).unwrap_err();
        assert!(matches!(err, Error::Conditioning { condition } if condition > MAX_CONDITION));
    }
}
