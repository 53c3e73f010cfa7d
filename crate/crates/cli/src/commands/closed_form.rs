use steklov_trace::expansion::{
    classify_regime, coefficients, first_order_coefficient, is_good_point, rayleigh_expansion, second_order_e,
    second_order_e_from_coefficients,
};
use steklov_trace::extremal::{
    boundary_norm_lpstar, eval_grad_u, eval_u, gradient_norm_lp, kp_inverse, kp_inverse_from_norms, HalfSpacePoint,
};
use steklov_trace::oracle::{epsilon_grid, extremal_norm_check};
use steklov_trace::{Error, Params};

use super::{cubature, rel_error, Audit, CommandError};
use crate::config::RunConfig;
use crate::format::{g, CsvDoc};

const SELF_CHECK_TOL: f64 = 1e-12;
const FD_TOL: f64 = 1e-6;

pub(super) fn kp(cfg: &RunConfig, doc: &mut CsvDoc, audits: &mut Vec<Audit>) -> Result<(), CommandError> {
    doc.row(["N", "p", "Kp_inverse", "self_check"]);
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for n in cfg.n_min..=cfg.n_max {
        for &p in &cfg.p_grid {
            if p >= n as f64 {
                doc.comment(format!("skipped N={n} p={}: p must be < N", g(p)));
                continue;
            }
            let params = Params::new(n, p)?;
            let closed = kp_inverse(&params)?;
            let check = rel_error(kp_inverse_from_norms(&params)?, closed);
            worst = worst.max(check);
            rows += 1;
            doc.row([n.to_string(), g(p), g(closed), g(check)]);
        }
    }
    audits.push(Audit::new(
        "self_check",
        rows > 0 && worst <= SELF_CHECK_TOL,
        format!("{rows} rows, max relative mismatch {} <= {}", g(worst), g(SELF_CHECK_TOL)),
    ));
    Ok(())
}

pub(super) fn verify_extremal(
    cfg: &RunConfig,
    doc: &mut CsvDoc,
    audits: &mut Vec<Audit>,
) -> Result<(), CommandError> {
    let params = cfg.params()?;
    doc.row(["quantity", "quadrature", "closed_form", "rel_error", "tail_bound", "error_estimate"]);
    match extremal_norm_check(&params, cfg.tail, &cubature(cfg)) {
        Ok(check) => {
            let boundary = boundary_norm_lpstar(&params)?;
            let gradient = gradient_norm_lp(&params)?;
            let kp = kp_inverse(&params)?;
            let cases = [
                ("boundary_norm", check.boundary.value, boundary, check.boundary.tail_bound, check.boundary.quadrature.error_estimate, cfg.tolerance),
                ("gradient_norm", check.gradient.value, gradient, check.gradient.tail_bound, check.gradient.quadrature.error_estimate, cfg.tolerance),
                ("flat_quotient", check.quotient, kp, f64::NAN, f64::NAN, cfg.quotient_tolerance),
            ];
            for (name, value, closed, tail, est, tol) in cases {
                let err = rel_error(value, closed);
                doc.row([name.to_string(), g(value), g(closed), g(err), g(tail), g(est)]);
                audits.push(Audit::new(name, err <= tol, format!("relative error {} <= {}", g(err), g(tol))));
            }
        }
        Err(e @ Error::Budget { .. }) => {
            doc.comment(format!("quadrature failed: {e}"));
            audits.push(Audit::new("norms", false, e.to_string()));
        }
        Err(e) => return Err(e.into()),
    }
    let fd = gradient_fd_error(&params)?;
    audits.push(Audit::new(
        "gradient_fd",
        fd <= FD_TOL,
        format!("max relative finite-difference mismatch {} <= {}", g(fd), g(FD_TOL)),
    ));
    Ok(())
}

// Central differences of U against the analytic gradient at a few points.
fn gradient_fd_error(params: &Params) -> Result<f64, CommandError> {
    let m = params.dim() - 1;
    let mut worst: f64 = 0.0;
    for (scale, t) in [(0.0, 0.0), (0.3, 0.5), (-0.7, 1.5), (1.2, 0.1)] {
        let y: Vec<f64> = (0..m).map(|i| scale * (1.0 - 0.4 * i as f64)).collect();
        let grad = eval_grad_u(params, &HalfSpacePoint::new(y.clone(), t)?)?;
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        for d in 0..=m {
            let step = 1e-5;
            let at = |s: f64| -> Result<f64, CommandError> {
                let mut yy = y.clone();
                let mut tt = t;
                if d < m {
                    yy[d] += s;
                } else {
                    tt += s;
                }
                Ok(eval_u(params, &HalfSpacePoint::new(yy, tt)?)?)
            };
            // One-sided in t on the boundary of the half-space.
            let fd = if d == m && t < step {
                (-3.0 * at(0.0)? + 4.0 * at(step)? - at(2.0 * step)?) / (2.0 * step)
            } else {
                (at(step)? - at(-step)?) / (2.0 * step)
            };
            worst = worst.max((fd - grad[d]).abs() / norm);
        }
    }
    Ok(worst)
}

fn opt(x: Option<f64>) -> String {
    x.map(g).unwrap_or_else(|| "none".into())
}

pub(super) fn expand(cfg: &RunConfig, doc: &mut CsvDoc, audits: &mut Vec<Audit>) -> Result<(), CommandError> {
    let params = cfg.params()?;
    let geom = cfg.geometry();
    let c = coefficients(&params, &geom)?;
    let regime = classify_regime(&params);
    doc.comment(format!("regime gradient: {}", regime.gradient));
    doc.comment(format!("regime mass: {}", regime.mass));
    doc.comment(format!("regime boundary: {}", regime.boundary));
    doc.comment(format!("regime quotient: {}", regime.combined));
    match is_good_point(&params, &geom) {
        Ok(v) => doc.comment(format!("good_point = {} ({})", v.is_good, v.clause)),
        Err(Error::Regime(msg)) => doc.comment(format!("good_point = not applicable ({msg})")),
        Err(e) => return Err(e.into()),
    }

    doc.row(["coefficient", "value"]);
    let first = first_order_coefficient(&params, &geom).ok();
    let stated_e = second_order_e(&params, &geom).ok();
    let derived_e = second_order_e_from_coefficients(&params, &c).ok();
    let entries = [
        ("A1", Some(c.a1)),
        ("A2", c.a2),
        ("A2_prime", c.a2_prime),
        ("A3", c.a3),
        ("B1", Some(c.b1)),
        ("B2", Some(c.b2)),
        ("B3", c.b3),
        ("B4", c.b4),
        ("D", c.d),
        ("c_Np", Some(c.c_np)),
        ("A2/A1", c.a2_over_a1()),
        ("A3/A1", c.a3_over_a1()),
        ("B2/B1", Some(c.b2_over_b1())),
        ("B3/B1", c.b3_over_b1()),
        ("D/A1", c.d_over_a1()),
        ("first_order", first),
        ("E", stated_e),
        ("E_derived", derived_e),
    ];
    let mut all_finite = true;
    for (name, value) in entries {
        all_finite &= value.is_none_or(f64::is_finite);
        doc.row([name.to_string(), opt(value)]);
    }
    audits.push(Audit::new("coefficients_finite", all_finite, "every present coefficient is finite"));

    doc.comment("predicted quotient over the epsilon grid");
    doc.row(["epsilon", "predicted_quotient"]);
    for eps in epsilon_grid(cfg.eps_min, cfg.eps_max, cfg.eps_per_decade)? {
        doc.row([g(eps), g(rayleigh_expansion(&params, &geom, eps)?)]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_differences_agree_with_the_analytic_gradient() {
        for (n, p) in [(2, 1.5), (3, 2.0), (4, 1.3)] {
            let err = gradient_fd_error(&Params::new(n, p).unwrap()).unwrap();
            assert!(err < FD_TOL, "N={n} p={p}: {err}");
        }
    }
}
