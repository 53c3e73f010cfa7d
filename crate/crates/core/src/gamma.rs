//! Gamma-function primitives.
//!
//! Every closed form in the toolkit is a ratio of Gamma values whose
//! individual factors overflow for moderate dimension, so everything is
//! routed through [`ln_gamma`] and exponentiated at the end.

use crate::error::{Error, Result};
use crate::scalar::Real;

// Lanczos approximation, g = 671/128, 14 terms (Numerical Recipes, 3rd ed.).
const LANCZOS_G_SHIFT: f64 = 5.242_187_5;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_092;
const LANCZOS_COEFFS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];
const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_5;

fn check_positive<T: Real>(x: T, what: &str) -> Result<()> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "{what} requires a finite positive argument, got {x}"
        )));
    }
    Ok(())
}

/// Natural logarithm of Γ(x) for x > 0.
pub fn ln_gamma<T: Real>(x: T) -> Result<T> {
    check_positive(x, "ln_gamma")?;
    // The Lanczos series is evaluated in f64 regardless of T; narrower
    // types only lose precision in the final cast.
    let xf = x.as_f64();
    let v = if xf < 0.5 {
        lanczos_ln_gamma(xf + 1.0) - xf.ln()
    } else {
        lanczos_ln_gamma(xf)
    };
    Ok(T::lit(v))
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    let tmp = x + LANCZOS_G_SHIFT;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = LANCZOS_C0;
    let mut y = x;
    for c in LANCZOS_COEFFS {
        y += 1.0;
        ser += c / y;
    }
    tmp + (SQRT_TWO_PI * ser / x).ln()
}

/// Γ(x) for x > 0, evaluated as `exp(ln Γ(x))`.
pub fn gamma<T: Real>(x: T) -> Result<T> {
    let lg = ln_gamma(x)?;
    let v = lg.exp();
    if !v.is_finite() {
        return Err(Error::Domain(format!("gamma({x}) overflows")));
    }
    Ok(v)
}

/// `ln(Γ(a)/Γ(b))`.
pub fn ln_gamma_ratio<T: Real>(a: T, b: T) -> Result<T> {
    Ok(ln_gamma(a)? - ln_gamma(b)?)
}

/// Surface measure ω_{n−1} = 2π^{n/2}/Γ(n/2) of the unit sphere S^{n−1} ⊂ Rⁿ.
///
/// `sphere_volume(1) = 2` counts the two points of S⁰.
pub fn sphere_volume<T: Real>(n: usize) -> Result<T> {
    if n < 1 {
        return Err(Error::Domain(format!(
            "sphere_volume requires n >= 1, got {n}"
        )));
    }
    let half_n = T::from_usize_lossy(n) / T::lit(2.0);
    let ln = T::LN_2() + half_n * T::PI().ln() - ln_gamma(half_n)?;
    Ok(ln.exp())
}

/// ∫₀^∞ r^α / (1 + r²)^β dr = Γ((α+1)/2) Γ((2β−α−1)/2) / (2Γ(β)), valid for 2β − α > 1.
pub fn half_line_beta_integral<T: Real>(alpha: T, beta: T) -> Result<T> {
    let gap = T::lit(2.0) * beta - alpha;
    if !(gap > T::one()) {
        return Err(Error::Divergent {
            alpha: alpha.as_f64(),
            beta: beta.as_f64(),
            gap: gap.as_f64(),
        });
    }
    if !(alpha > -T::one()) {
        return Err(Error::Divergent {
            alpha: alpha.as_f64(),
            beta: beta.as_f64(),
            gap: gap.as_f64(),
        });
    }
    let half = T::lit(0.5);
    let ln = ln_gamma((alpha + T::one()) * half)? + ln_gamma((gap - T::one()) * half)?
        - ln_gamma(beta)?
        - T::LN_2();
    Ok(ln.exp())
}
