//! Small-ε expansion of the Rayleigh quotient of boundary-concentrating
//! test functions `u_ε = φ · [(t+ε)² + |y|²]^{−(N−p)/(2(p−1))}` at a
//! boundary point with principal curvatures `λᵢ` and potential value `h₀`.
//!
//! All integrals are written relative to `k = (N−p)/(p−1)`:
//!
//! ```text
//! ∫ |∇u_ε|^p      = A1 ε^{−k} + A2 ε^{1−k} + A3 ε^{2−k} + …
//! ∫ h |u_ε|^p     = D ε^{−(N−p²)/(p−1)} + …
//! ∫_∂ |u_ε|^{p_*} = B1 ε^{−1−k} + B2 ε^{−k} + B3 ε^{1−k} + …
//! ```
//!
//! Which terms exist depends on where `p` sits relative to the thresholds
//! `(N+3)/4`, `(N+2)/3`, `(N+1)/2`, `√N` and `(−1+√(4N+5))/2`; see
//! [`classify_regime`].

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::extremal::ProblemParams;
use crate::gamma::{ln_gamma, sphere_volume};
use crate::scalar::Real;

/// Absolute tolerance on `p` for landing exactly on a threshold.
pub const THRESHOLD_TOL: f64 = 1e-12;

/// Local boundary data at the concentration point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGeometry<T> {
    /// Principal curvatures, length `N − 1`.
    pub lambdas: Vec<T>,
    /// Potential value `h(x₀)`.
    pub h0: T,
    /// Whether the domain lies locally on one side of the tangent plane.
    pub one_sided: bool,
}

impl<T: Real> BoundaryGeometry<T> {
    pub fn new(lambdas: Vec<T>, h0: T, one_sided: bool) -> Self {
        Self {
            lambdas,
            h0,
            one_sided,
        }
    }

    pub fn flat(n: usize) -> Self {
        Self::new(vec![T::zero(); n.saturating_sub(1)], T::zero(), true)
    }

    /// Σλᵢ
    pub fn sum(&self) -> T {
        self.lambdas.iter().fold(T::zero(), |a, &l| a + l)
    }

    /// Σλᵢ²
    pub fn sum_sq(&self) -> T {
        self.lambdas.iter().fold(T::zero(), |a, &l| a + l * l)
    }

    /// Σ_{i<j} λᵢλⱼ
    pub fn cross_sum(&self) -> T {
        let mut acc = T::zero();
        for i in 0..self.lambdas.len() {
            for j in (i + 1)..self.lambdas.len() {
                acc = acc + self.lambdas[i] * self.lambdas[j];
            }
        }
        acc
    }

    /// H = Σλᵢ / (N−1).
    pub fn mean_curvature(&self) -> T {
        if self.lambdas.is_empty() {
            return T::zero();
        }
        self.sum() / T::from_usize_lossy(self.lambdas.len())
    }

    /// Checks the curvature count against `N` and finiteness.
    pub fn check(&self, params: &ProblemParams<T>) -> Result<()> {
        if self.lambdas.len() + 1 != params.dim() {
            return Err(Error::InvalidParams(format!(
                "expected {} principal curvatures for N = {}, got {}",
                params.dim() - 1,
                params.dim(),
                self.lambdas.len()
            )));
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) || !self.h0.is_finite() {
            return Err(Error::InvalidParams("geometry must be finite".into()));
        }
        Ok(())
    }
}

/// Position of `p` relative to a threshold, with [`THRESHOLD_TOL`] slack.
pub fn compare_threshold<T: Real>(p: T, threshold: T) -> Ordering {
    let d = p - threshold;
    if d.abs() <= T::lit(THRESHOLD_TOL) {
        Ordering::Equal
    } else if d < T::zero() {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// The five critical values of `p` for dimension `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds<T> {
    /// (N+3)/4
    pub gradient: T,
    /// (N+2)/3
    pub boundary: T,
    /// (N+1)/2
    pub critical: T,
    /// √N
    pub mass: T,
    /// (−1+√(4N+5))/2
    pub mass_remainder: T,
}

impl<T: Real> Thresholds<T> {
    pub fn new(n: usize) -> Self {
        let nr = T::from_usize_lossy(n);
        let two = T::lit(2.0);
        Self {
            gradient: (nr + T::lit(3.0)) / T::lit(4.0),
            boundary: (nr + two) / T::lit(3.0),
            critical: (nr + T::one()) / two,
            mass: nr.sqrt(),
            mass_remainder: (-T::one() + (T::lit(4.0) * nr + T::lit(5.0)).sqrt()) / two,
        }
    }
}

/// Size of a neglected remainder: `O(ε^exponent)`, optionally times
/// `ln(1/ε)`, optionally little-o.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Remainder {
    pub exponent: f64,
    pub log: bool,
    pub little_o: bool,
}

impl Remainder {
    pub fn big_o(exponent: f64) -> Self {
        Self {
            exponent,
            log: false,
            little_o: false,
        }
    }

    pub fn big_o_log(exponent: f64) -> Self {
        Self {
            exponent,
            log: true,
            little_o: false,
        }
    }

    pub fn little_o(exponent: f64) -> Self {
        Self {
            exponent,
            log: false,
            little_o: true,
        }
    }

    pub fn bounded() -> Self {
        Self::big_o(0.0)
    }
}

impl fmt::Display for Remainder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = if self.little_o { "o" } else { "O" };
        let base = if self.exponent == 0.0 {
            String::new()
        } else {
            format!("eps^{}", self.exponent)
        };
        match (base.is_empty(), self.log) {
            (true, false) => write!(f, "{o}(1)"),
            (true, true) => write!(f, "{o}(ln(1/eps))"),
            (false, false) => write!(f, "{o}({base})"),
            (false, true) => write!(f, "{o}({base} ln(1/eps))"),
        }
    }
}

/// Gradient-energy estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientRegime {
    /// A1, A2, A3 present, followed by the stated remainder.
    Expanded(Remainder),
    /// p = (N+1)/2: A1 ε^{−k} + A2′ ln(1/ε).
    Logarithmic,
    /// p > (N+1)/2: A1 ε^{−k} + O(1).
    LeadingOnly,
}

/// Potential-term estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassRegime {
    /// p < √N: D ε^{−(N−p²)/(p−1)} plus the stated remainder.
    Singular(Remainder),
    /// p = √N: O(ln(1/ε)).
    Logarithmic,
    /// p > √N: O(1).
    Bounded,
}

/// Boundary-trace estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryRegime {
    /// B1, B2, B3 present, followed by the stated remainder.
    Expanded(Remainder),
    /// p = (N+1)/2: B1, B2 and B4 ln(1/ε).
    Logarithmic,
    /// p > (N+1)/2: B1, B2 and O(1).
    LeadingOnly,
}

/// Expansion of the normalized quotient `Q(u_ε) / K_p^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CombinedRegime {
    /// p > (N+1)/2: 1 + O(ε^k).
    AboveCritical(Remainder),
    /// p = (N+1)/2: 1 − ((N−1)/2) H ε ln(1/ε) + o(ε ln(1/ε)).
    Logarithmic(Remainder),
    /// p < (N+1)/2: 1 + c₁ε [+ (D/A1) ε^p] [+ E ε²] + remainder.
    Expanded {
        mass_term: bool,
        second_order: bool,
        remainder: Remainder,
    },
}

impl fmt::Display for GradientRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Expanded(r) => write!(f, "A1 A2 A3 + {r}"),
            Self::Logarithmic => f.write_str("A1 + A2' ln(1/eps)"),
            Self::LeadingOnly => f.write_str("A1 + O(1)"),
        }
    }
}

impl fmt::Display for MassRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Singular(r) => write!(f, "D + {r}"),
            Self::Logarithmic => f.write_str("O(ln(1/eps))"),
            Self::Bounded => f.write_str("O(1)"),
        }
    }
}

impl fmt::Display for BoundaryRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Expanded(r) => write!(f, "B1 B2 B3 + {r}"),
            Self::Logarithmic => f.write_str("B1 B2 + B4 ln(1/eps)"),
            Self::LeadingOnly => f.write_str("B1 B2 + O(1)"),
        }
    }
}

impl fmt::Display for CombinedRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AboveCritical(r) => write!(f, "1 + {r}"),
            Self::Logarithmic(r) => write!(f, "1 - (N-1)/2 H eps ln(1/eps) + {r}"),
            Self::Expanded {
                mass_term,
                second_order,
                remainder,
            } => {
                f.write_str("1 + c1 eps")?;
                if *mass_term {
                    f.write_str(" + D/A1 eps^p")?;
                }
                if *second_order {
                    f.write_str(" + E eps^2")?;
                }
                write!(f, " + {remainder}")
            }
        }
    }
}

impl CombinedRegime {
    pub fn remainder(&self) -> Remainder {
        match *self {
            CombinedRegime::AboveCritical(r) | CombinedRegime::Logarithmic(r) => r,
            CombinedRegime::Expanded { remainder, .. } => remainder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeLabel {
    pub gradient: GradientRegime,
    pub mass: MassRegime,
    pub boundary: BoundaryRegime,
    pub combined: CombinedRegime,
}

/// Classifies `p` against every threshold for the dimension of `params`.
pub fn classify_regime<T: Real>(params: &ProblemParams<T>) -> RegimeLabel {
    let n = params.dim();
    let p = params.p();
    let th = Thresholds::<T>::new(n);
    let k = params.decay_rate().as_f64();
    let pf = p.as_f64();
    let mass_decay = ((params.n_real() - p * p) / (p - T::one())).as_f64();

    let critical = compare_threshold(p, th.critical);

    let gradient = match critical {
        Ordering::Greater => GradientRegime::LeadingOnly,
        Ordering::Equal => GradientRegime::Logarithmic,
        Ordering::Less => GradientRegime::Expanded(match compare_threshold(p, th.gradient) {
            Ordering::Less => Remainder::big_o(3.0 - k),
            Ordering::Equal => Remainder::big_o_log(0.0),
            Ordering::Greater => Remainder::bounded(),
        }),
    };

    let mass = match compare_threshold(p, th.mass) {
        Ordering::Greater => MassRegime::Bounded,
        Ordering::Equal => MassRegime::Logarithmic,
        Ordering::Less => MassRegime::Singular(match compare_threshold(p, th.mass_remainder) {
            Ordering::Less => Remainder::big_o(1.0 - mass_decay),
            Ordering::Equal => Remainder::big_o_log(0.0),
            Ordering::Greater => Remainder::bounded(),
        }),
    };

    let boundary = match critical {
        Ordering::Greater => BoundaryRegime::LeadingOnly,
        Ordering::Equal => BoundaryRegime::Logarithmic,
        Ordering::Less => BoundaryRegime::Expanded(match compare_threshold(p, th.boundary) {
            Ordering::Less => Remainder::big_o(2.0 - k),
            Ordering::Equal => Remainder::big_o_log(0.0),
            Ordering::Greater => Remainder::bounded(),
        }),
    };

    let below_boundary = compare_threshold(p, th.boundary) == Ordering::Less;
    let mass_cmp = compare_threshold(p, th.mass);
    let combined = match critical {
        Ordering::Greater => CombinedRegime::AboveCritical(Remainder::big_o(k)),
        Ordering::Equal => CombinedRegime::Logarithmic(Remainder {
            exponent: 1.0,
            log: true,
            little_o: true,
        }),
        Ordering::Less if n <= 4 => {
            if below_boundary {
                CombinedRegime::Expanded {
                    mass_term: true,
                    second_order: true,
                    remainder: Remainder::big_o(1.0 + pf),
                }
            } else {
                match mass_cmp {
                    Ordering::Less => CombinedRegime::Expanded {
                        mass_term: true,
                        second_order: false,
                        remainder: Remainder::big_o(k),
                    },
                    Ordering::Equal => CombinedRegime::Expanded {
                        mass_term: false,
                        second_order: false,
                        remainder: Remainder::big_o_log(k),
                    },
                    Ordering::Greater => CombinedRegime::Expanded {
                        mass_term: false,
                        second_order: false,
                        remainder: Remainder::big_o(k),
                    },
                }
            }
        }
        Ordering::Less => {
            if below_boundary {
                if mass_cmp == Ordering::Less {
                    let rem = if compare_threshold(p, T::lit(2.0)) != Ordering::Greater {
                        Remainder::little_o(2.0)
                    } else {
                        Remainder::little_o(pf)
                    };
                    CombinedRegime::Expanded {
                        mass_term: true,
                        second_order: true,
                        remainder: rem,
                    }
                } else {
                    CombinedRegime::Expanded {
                        mass_term: false,
                        second_order: true,
                        remainder: Remainder::little_o(2.0),
                    }
                }
            } else {
                CombinedRegime::Expanded {
                    mass_term: false,
                    second_order: false,
                    remainder: Remainder::big_o(2.0),
                }
            }
        }
    };

    RegimeLabel {
        gradient,
        mass,
        boundary,
        combined,
    }
}

/// The closed-form constants of the three integral expansions.
///
/// A field is `None` when its regime excludes the term (typically because
/// a Gamma argument would sit on a pole).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCoefficients<T> {
    pub a1: T,
    pub a2: Option<T>,
    pub a2_prime: Option<T>,
    pub a3: Option<T>,
    pub b1: T,
    pub b2: T,
    pub b3: Option<T>,
    /// Explicit part only; the trailing `o(1)` inside the braces is dropped.
    pub b4: Option<T>,
    pub d: Option<T>,
    /// Second-order coefficient of the combined expansion, stated form.
    pub e: Option<T>,
    /// Internal constant `c_{N,p}` of the boundary expansion.
    pub c_np: T,
    pub regime: RegimeLabel,
}

impl<T: Real> ExpansionCoefficients<T> {
    pub fn a2_over_a1(&self) -> Option<T> {
        self.a2.map(|a2| a2 / self.a1)
    }

    pub fn a3_over_a1(&self) -> Option<T> {
        self.a3.map(|a3| a3 / self.a1)
    }

    pub fn b2_over_b1(&self) -> T {
        self.b2 / self.b1
    }

    pub fn b3_over_b1(&self) -> Option<T> {
        self.b3.map(|b3| b3 / self.b1)
    }

    pub fn d_over_a1(&self) -> Option<T> {
        self.d.map(|d| d / self.a1)
    }
}

/// Evaluates every coefficient that exists in the regime of `params`.
pub fn coefficients<T: Real>(
    params: &ProblemParams<T>,
    geom: &BoundaryGeometry<T>,
) -> Result<ExpansionCoefficients<T>> {
    geom.check(params)?;
    let regime = classify_regime(params);
    let n = params.n_real();
    let p = params.p();
    let one = T::one();
    let two = T::lit(2.0);
    let pm1 = p - one;
    let ratio = params.decay_rate(); // (N−p)/(p−1)
    let omega = sphere_volume::<T>(params.dim() - 1)?; // ω_{N−2}
    let lg_half = ln_gamma((n - one) / two)?; // ln Γ((N−1)/2)
    let a = params.trace_gamma_arg(); // (N−1)/(2(p−1))
    let b = params.energy_exponent(); // p(N−1)/(2(p−1))
    let lg_a = ln_gamma(a)?;
    let lg_b = ln_gamma(b)?;
    let s1 = geom.sum();
    let s2 = geom.sum_sq();
    let sc = geom.cross_sum();
    let h = geom.mean_curvature();
    let critical = compare_threshold(p, Thresholds::<T>::new(params.dim()).critical);
    let subcritical = critical == Ordering::Less;

    let a1 = T::lit(0.5) * ratio.powf(pm1) * omega * (lg_half + lg_a - lg_b).exp();
    let b1 = omega * (lg_half + lg_a - lg_b).exp() / two;
    let b2 = -omega * s1 / T::lit(8.0) * (p * (n - one) / pm1) * (lg_half + lg_a - ln_gamma(one + b)?).exp();

    // Γ((N−2p+1)/(2(p−1))) only exists below the critical threshold.
    let (a2, a3, b3) = if subcritical {
        let lg_am1 = ln_gamma((n - two * p + one) / (two * pm1))?;
        let a2 = -h * omega / T::lit(4.0)
            * ratio.powf(p)
            * (ln_gamma((n + one) / two)? + lg_am1 - lg_b).exp();
        let a3 = omega / T::lit(16.0)
            * ratio.powf(p)
            * (lg_half + lg_am1 - lg_b).exp()
            * (T::lit(1.5) * s2 + sc);
        let q = (n - two * p + one) / pm1;
        let b3 = omega / T::lit(32.0)
            * (lg_half + lg_am1 - lg_b).exp()
            * ((one + T::lit(3.0) * q) * s2 + (-two + two * q) * sc);
        (Some(a2), Some(a3), Some(b3))
    } else {
        (None, None, None)
    };

    let (a2_prime, b4) = if critical == Ordering::Equal {
        let a2p = -h * omega / two * ratio.powf(p);
        let bb = p * (n - one) / pm1;
        let b4 = omega / two * ((one / (n - one) - bb / T::lit(4.0)) * s2 - bb / two * sc);
        (Some(a2p), Some(b4))
    } else {
        (None, None)
    };

    let d = match regime.mass {
        MassRegime::Singular(_) => {
            let gap = n - p * p;
            let val = geom.h0 * pm1 / gap
                * omega
                * (lg_half + ln_gamma((gap + pm1) / (two * pm1))? - ln_gamma(p * (n - p) / (two * pm1))?).exp()
                / two;
            Some(val)
        }
        _ => None,
    };

    let e = match regime.combined {
        CombinedRegime::Expanded {
            second_order: true, ..
        } => Some(second_order_e_unchecked(params, geom)),
        _ => None,
    };

    let c_np = -(p * (n - one)) / (T::lit(4.0) * pm1) * (b + one);

    Ok(ExpansionCoefficients {
        a1,
        a2,
        a2_prime,
        a3,
        b1,
        b2,
        b3,
        b4,
        d,
        e,
        c_np,
        regime,
    })
}

/// Simplified ratio forms as printed after the Gamma recurrences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatedRatios<T> {
    pub a2_a1: T,
    pub a3_a1: T,
    pub b2_b1: T,
    pub b3_b1: T,
}

/// The printed simplified ratios `A2/A1`, `A3/A1`, `B2/B1`, `B3/B1`.
///
/// The mixed-curvature parts of `A3/A1` and `B3/B1` here do not follow
/// from the coefficient definitions in [`coefficients`]; the two agree
/// only when `Σ_{i<j} λᵢλⱼ = 0`.
pub fn stated_ratios<T: Real>(params: &ProblemParams<T>, geom: &BoundaryGeometry<T>) -> StatedRatios<T> {
    let n = params.n_real();
    let p = params.p();
    let two = T::lit(2.0);
    let gap = n - two * p + T::one();
    let s1 = geom.sum();
    let s2 = geom.sum_sq();
    let sc = geom.cross_sum();
    StatedRatios {
        a2_a1: -T::lit(0.5) * (n - p) / gap * s1,
        a3_a1: T::lit(0.25) * (n - p) / gap * (T::lit(1.5) * s2 - two * sc),
        b2_b1: -T::lit(0.5) * s1,
        b3_b1: ((T::lit(3.0) * n - T::lit(5.0) * p + two) * s2 - T::lit(4.0) * (n - p) * sc)
            / (T::lit(8.0) * gap),
    }
}

/// `D/A1` when `p = 2`: `2h(0)/((N−3)(N−4))`.
pub fn d_over_a1_at_p_two<T: Real>(params: &ProblemParams<T>, h0: T) -> Result<T> {
    if compare_threshold(params.p(), T::lit(2.0)) != Ordering::Equal || params.dim() < 5 {
        return Err(Error::Regime(
            "closed D/A1 form applies only to p = 2 with N >= 5".into(),
        ));
    }
    let n = params.n_real();
    Ok(T::lit(2.0) * h0 / ((n - T::lit(3.0)) * (n - T::lit(4.0))))
}

/// Coefficient of ε: `−(N−p)(p−1)/(N−2p+1) · H(0)`.
pub fn first_order_coefficient<T: Real>(params: &ProblemParams<T>, geom: &BoundaryGeometry<T>) -> Result<T> {
    geom.check(params)?;
    let th = Thresholds::<T>::new(params.dim());
    if compare_threshold(params.p(), th.critical) != Ordering::Less {
        return Err(Error::Regime(format!(
            "first-order term needs p < (N+1)/2 = {}",
            th.critical
        )));
    }
    let n = params.n_real();
    let p = params.p();
    Ok(-(n - p) * (p - T::one()) / (n - T::lit(2.0) * p + T::one()) * geom.mean_curvature())
}

fn second_order_e_unchecked<T: Real>(params: &ProblemParams<T>, geom: &BoundaryGeometry<T>) -> T {
    let n = params.n_real();
    let p = params.p();
    let one = T::one();
    let two = T::lit(2.0);
    let pre = (n - p) * (p - one) / (T::lit(4.0) * (n - one) * (n - two * p + one));
    pre * ((p + n - two) / (n - one) * geom.sum_sq() - two * geom.cross_sum())
}

/// Stated second-order coefficient
/// `E = (N−p)(p−1)/(4(N−1)(N−2p+1)) {((p+N−2)/(N−1))Σλᵢ² − 2Σ_{i<j}λᵢλⱼ}`.
pub fn second_order_e<T: Real>(params: &ProblemParams<T>, geom: &BoundaryGeometry<T>) -> Result<T> {
    geom.check(params)?;
    let th = Thresholds::<T>::new(params.dim());
    if compare_threshold(params.p(), th.boundary) != Ordering::Less {
        return Err(Error::Regime(format!(
            "E enters only for p < (N+2)/3 = {}",
            th.boundary
        )));
    }
    Ok(second_order_e_unchecked(params, geom))
}

/// ε² coefficient recomputed from the evaluated coefficients:
/// `m[½(m+1)(B2/B1)² − B3/B1 − (B2/B1)(A2/A1)] + A3/A1`, `m = (N−p)/(N−1)`.
///
/// This differs from [`second_order_e`] in the `Σ_{i<j} λᵢλⱼ` term and is
/// the value direct quadrature reproduces.
pub fn second_order_e_from_coefficients<T: Real>(
    params: &ProblemParams<T>,
    coeffs: &ExpansionCoefficients<T>,
) -> Result<T> {
    let (Some(a2), Some(a3), Some(b3)) = (coeffs.a2_over_a1(), coeffs.a3_over_a1(), coeffs.b3_over_b1()) else {
        return Err(Error::Regime("A2, A3, B3 required (p < (N+1)/2)".into()));
    };
    let m = params.trace_power();
    let b2 = coeffs.b2_over_b1();
    let half = T::lit(0.5);
    Ok(m * (half * (m + T::one()) * b2 * b2 - b3 - b2 * a2) + a3)
}

/// Truncated prediction of `Q(u_ε) / K_p^{-1}`.
///
/// Only terms with explicit constants are summed; the neglected remainder
/// is described by `classify_regime(params).combined.remainder()`.
pub fn rayleigh_expansion<T: Real>(params: &ProblemParams<T>, geom: &BoundaryGeometry<T>, epsilon: T) -> Result<T> {
    geom.check(params)?;
    if !(epsilon > T::zero()) {
        return Err(Error::Domain(format!("epsilon must be > 0, got {epsilon}")));
    }
    let regime = classify_regime(params);
    match regime.combined {
        CombinedRegime::AboveCritical(_) => Ok(T::one()),
        CombinedRegime::Logarithmic(_) => {
            let n = params.n_real();
            Ok(T::one()
                - (n - T::one()) / T::lit(2.0) * geom.mean_curvature() * epsilon * (T::one() / epsilon).ln())
        }
        CombinedRegime::Expanded {
            mass_term,
            second_order,
            ..
        } => {
            let mut value = T::one() + first_order_coefficient(params, geom)? * epsilon;
            if mass_term {
                let coeffs = coefficients(params, geom)?;
                let d_a1 = coeffs
                    .d_over_a1()
                    .ok_or_else(|| Error::Regime("mass term expected but D absent".into()))?;
                value = value + d_a1 * epsilon.powf(params.p());
            }
            if second_order {
                value = value + second_order_e(params, geom)? * epsilon * epsilon;
            }
            Ok(value)
        }
    }
}

/// Verdict of the good-point classifier with the clause that decided it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodPointVerdict {
    pub is_good: bool,
    pub clause: String,
}

impl GoodPointVerdict {
    fn new(is_good: bool, clause: impl Into<String>) -> Self {
        Self {
            is_good,
            clause: clause.into(),
        }
    }
}

/// Decides whether the point is a good point for `1 < p < (N+1)/2`.
pub fn is_good_point<T: Real>(params: &ProblemParams<T>, geom: &BoundaryGeometry<T>) -> Result<GoodPointVerdict> {
    geom.check(params)?;
    let th = Thresholds::<T>::new(params.dim());
    let p = params.p();
    if compare_threshold(p, th.critical) != Ordering::Less {
        return Err(Error::Regime(format!(
            "good-point criterion needs 1 < p < (N+1)/2 = {}",
            th.critical
        )));
    }
    if !geom.one_sided {
        return Ok(GoodPointVerdict::new(false, "domain not locally on one side of the tangent plane"));
    }
    let h = geom.mean_curvature();
    let tol = T::lit(THRESHOLD_TOL);
    if h > tol {
        return Ok(GoodPointVerdict::new(true, "H > 0"));
    }
    if h < -tol {
        return Ok(GoodPointVerdict::new(false, "H < 0"));
    }
    let n = params.dim();
    let nr = params.n_real();
    let h0 = geom.h0;
    if n <= 4 {
        if compare_threshold(p, th.mass) == Ordering::Less {
            return Ok(GoodPointVerdict::new(h0 < T::zero(), "H = 0, N <= 4, p < sqrt(N): h(x) < 0"));
        }
        return Ok(GoodPointVerdict::new(false, "H = 0, N <= 4, p >= sqrt(N): no criterion applies"));
    }
    let two = T::lit(2.0);
    match compare_threshold(p, two) {
        Ordering::Less => Ok(GoodPointVerdict::new(h0 < T::zero(), "H = 0, N >= 5, p < 2: h(x) < 0")),
        Ordering::Equal => {
            let lhs = nr / (nr - T::one()) * geom.sum_sq() - two * geom.cross_sum();
            let rhs = -T::lit(8.0) * (nr - T::one()) * h0 / ((nr - two) * (nr - T::lit(4.0)));
            Ok(GoodPointVerdict::new(
                lhs < rhs,
                "H = 0, N >= 5, p = 2: N/(N-1) sum l^2 - 2 sum_{i<j} l_i l_j < -8(N-1)h/((N-2)(N-4))",
            ))
        }
        Ordering::Greater => {
            if compare_threshold(p, th.boundary) == Ordering::Less {
                let lhs = (p + nr - two) / (nr - T::one()) * geom.sum_sq() - two * geom.cross_sum();
                Ok(GoodPointVerdict::new(
                    lhs < T::zero(),
                    "H = 0, N >= 5, 2 < p < (N+2)/3: (p+N-2)/(N-1) sum l^2 - 2 sum_{i<j} l_i l_j < 0",
                ))
            } else {
                Ok(GoodPointVerdict::new(false, "H = 0, N >= 5, p >= (N+2)/3: no criterion applies"))
            }
        }
    }
}

/// Quotient of the constant test function `u ≡ 1`:
/// `∫h / |∂Ω|^{p/p_*}`, an upper bound for the eigenvalue.
pub fn constant_testfunction_bound<T: Real>(
    volume: T,
    boundary_area: T,
    h_integral: T,
    params: &ProblemParams<T>,
) -> Result<T> {
    if !(volume > T::zero()) || !(boundary_area > T::zero()) {
        return Err(Error::Domain("volume and boundary area must be positive".into()));
    }
    Ok(h_integral / boundary_area.powf(params.trace_power()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pp(n: usize, p: f64) -> ProblemParams<f64> {
        ProblemParams::new(n, p).unwrap()
    }

    fn geom(l: &[f64], h0: f64) -> BoundaryGeometry<f64> {
        BoundaryGeometry::new(l.to_vec(), h0, true)
    }

    #[test]
    fn geometry_sums() {
        let g = geom(&[1.0, -2.0, 3.0], 0.0);
        assert_eq!(g.sum(), 2.0);
        assert_eq!(g.sum_sq(), 14.0);
        assert_eq!(g.cross_sum(), -2.0 + 3.0 - 6.0);
        assert_eq!(g.sum() * g.sum(), g.sum_sq() + 2.0 * g.cross_sum());
        assert_relative_eq!(g.mean_curvature(), 2.0 / 3.0);
    }

    #[test]
    fn regime_examples() {
        assert!(matches!(classify_regime(&pp(5, 3.0)).combined, CombinedRegime::Logarithmic(_)));
        assert!(matches!(
            classify_regime(&pp(5, 2.0)).combined,
            CombinedRegime::Expanded {
                mass_term: true,
                second_order: true,
                ..
            }
        ));
        assert!(matches!(classify_regime(&pp(3, 2.5)).combined, CombinedRegime::AboveCritical(_)));
    }

    #[test]
    fn thresholds_hit_logarithmic_branches() {
        // p = (N+3)/4 for N = 3.
        let r = classify_regime(&pp(3, 1.5));
        assert_eq!(r.gradient, GradientRegime::Expanded(Remainder::big_o_log(0.0)));
        // p = (N+2)/3 for N = 4.
        let r = classify_regime(&pp(4, 2.0));
        assert_eq!(r.boundary, BoundaryRegime::Expanded(Remainder::big_o_log(0.0)));
        assert_eq!(r.mass, MassRegime::Logarithmic);
        // p = (−1+√(4N+5))/2 for N = 5 is exactly 2.
        let r = classify_regime(&pp(5, 2.0));
        assert_eq!(r.mass, MassRegime::Singular(Remainder::big_o_log(0.0)));
        // p = √N picked up despite round-off.
        let r = classify_regime(&pp(3, 3f64.sqrt() + 1e-13));
        assert_eq!(r.mass, MassRegime::Logarithmic);
        let r = classify_regime(&pp(3, 3f64.sqrt() + 1e-9));
        assert_eq!(r.mass, MassRegime::Bounded);
    }

    #[test]
    fn ratio_examples_n5_p2() {
        let params = pp(5, 2.0);
        let g = geom(&[1.0, 1.0, 1.0, 1.0], 0.0);
        let c = coefficients(&params, &g).unwrap();
        assert_relative_eq!(c.a2_over_a1().unwrap(), -3.0, max_relative = 1e-12);
        assert_relative_eq!(c.b2_over_b1(), -2.0, max_relative = 1e-12);
    }

    #[test]
    fn a1_and_b1_are_the_extremal_norms() {
        for &(n, p) in &[(3usize, 1.5), (4, 2.2), (7, 3.1), (2, 1.3)] {
            let params = pp(n, p);
            let c = coefficients(&params, &BoundaryGeometry::flat(n)).unwrap();
            assert_relative_eq!(c.a1, crate::extremal::gradient_norm_lp(&params).unwrap(), max_relative = 1e-12);
            assert_relative_eq!(c.b1, crate::extremal::boundary_norm_lpstar(&params).unwrap(), max_relative = 1e-12);
            assert_relative_eq!(
                c.a1 / c.b1.powf(params.trace_power()),
                crate::extremal::kp_inverse(&params).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn d_sign_follows_h0_over_gap() {
        let params = pp(5, 1.5);
        let c = coefficients(&params, &geom(&[0.0; 4], -1.0)).unwrap();
        assert!(c.d.unwrap() < 0.0);
        let c = coefficients(&params, &geom(&[0.0; 4], 2.0)).unwrap();
        assert!(c.d.unwrap() > 0.0);
    }

    #[test]
    fn d_over_a1_closed_form_at_p_two() {
        for n in 5..=9usize {
            let params = pp(n, 2.0);
            let c = coefficients(&params, &geom(&vec![0.3; n - 1], 0.7)).unwrap();
            assert_relative_eq!(
                c.d_over_a1().unwrap(),
                d_over_a1_at_p_two(&params, 0.7).unwrap(),
                max_relative = 1e-12
            );
        }
        assert!(d_over_a1_at_p_two(&pp(4, 2.0), 1.0).is_err());
    }

    #[test]
    fn excluded_terms_are_absent() {
        let c = coefficients(&pp(3, 2.5), &geom(&[1.0, 1.0], 1.0)).unwrap();
        assert!(c.a2.is_none() && c.a3.is_none() && c.b3.is_none() && c.d.is_none() && c.e.is_none());
        let c = coefficients(&pp(5, 3.0), &geom(&[1.0; 4], 1.0)).unwrap();
        assert!(c.a2_prime.is_some() && c.b4.is_some() && c.a2.is_none());
    }

    #[test]
    fn first_order_examples() {
        assert_relative_eq!(
            first_order_coefficient(&pp(5, 2.0), &geom(&[1.0; 4], 0.0)).unwrap(),
            -1.5,
            max_relative = 1e-14
        );
        assert_eq!(first_order_coefficient(&pp(5, 2.0), &geom(&[0.0; 4], 0.0)).unwrap(), 0.0);
        assert_relative_eq!(
            first_order_coefficient(&pp(3, 1.5), &geom(&[2.0, 2.0], 0.0)).unwrap(),
            -1.5,
            max_relative = 1e-14
        );
        assert!(matches!(
            first_order_coefficient(&pp(3, 2.0), &geom(&[1.0, 1.0], 0.0)),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn first_order_matches_gamma_ratio_combination() {
        for &(n, p) in &[(3usize, 1.5), (4, 1.8), (5, 2.0), (8, 3.0), (2, 1.2)] {
            let params = pp(n, p);
            let g = geom(&(0..n - 1).map(|i| 0.4 + 0.3 * i as f64).collect::<Vec<_>>(), 0.0);
            let c = coefficients(&params, &g).unwrap();
            let combo = c.a2_over_a1().unwrap() - params.trace_power() * c.b2_over_b1();
            assert_relative_eq!(combo, first_order_coefficient(&params, &g).unwrap(), max_relative = 1e-10);
        }
    }

    #[test]
    fn e_examples() {
        assert_relative_eq!(
            second_order_e(&pp(5, 2.0), &geom(&[1.0; 4], 0.0)).unwrap(),
            -21.0 / 32.0,
            max_relative = 1e-14
        );
        assert_eq!(second_order_e(&pp(5, 2.0), &geom(&[0.0; 4], 0.0)).unwrap(), 0.0);
        assert_relative_eq!(
            second_order_e(&pp(5, 2.0), &geom(&[1.0, -1.0, 1.0, -1.0], 0.0)).unwrap(),
            27.0 / 32.0,
            max_relative = 1e-14
        );
        assert!(second_order_e(&pp(5, 2.5), &geom(&[1.0; 4], 0.0)).is_err());
    }

    #[test]
    fn e_from_coefficients_agrees_without_cross_terms() {
        // With a single curvature direction the cross sum vanishes and both forms coincide.
        let params = pp(5, 2.0);
        let g = geom(&[1.3, 0.0, 0.0, 0.0], 0.0);
        let c = coefficients(&params, &g).unwrap();
        assert_relative_eq!(
            second_order_e_from_coefficients(&params, &c).unwrap(),
            second_order_e(&params, &g).unwrap(),
            max_relative = 1e-10
        );
        // With cross terms they do not.
        let g = geom(&[1.0, 1.0, 1.0, 1.0], 0.0);
        let c = coefficients(&params, &g).unwrap();
        assert_relative_eq!(second_order_e_from_coefficients(&params, &c).unwrap(), 0.75, max_relative = 1e-10);
    }

    #[test]
    fn expansion_examples() {
        let v = rayleigh_expansion(&pp(5, 3.0), &geom(&[1.0; 4], 0.0), 0.01).unwrap();
        assert_relative_eq!(v, 1.0 - 2.0 * 0.01 * 100f64.ln(), max_relative = 1e-14);
        assert!((v - 0.9079).abs() < 1e-4);
        let v = rayleigh_expansion(&pp(5, 2.0), &geom(&[1.0; 4], 0.0), 0.01).unwrap();
        assert_relative_eq!(v, 1.0 - 0.015 - 0.65625e-4, max_relative = 1e-14);
        for &(n, p) in &[(3usize, 1.5), (4, 1.2), (6, 2.0), (5, 2.4)] {
            let v = rayleigh_expansion(&pp(n, p), &geom(&vec![0.0; n - 1], 0.0), 0.01).unwrap();
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn good_point_examples() {
        let v = is_good_point(&pp(3, 1.5), &geom(&[0.5, 0.2], 3.0)).unwrap();
        assert!(v.is_good);
        assert_eq!(v.clause, "H > 0");
        assert!(is_good_point(&pp(3, 1.5), &geom(&[0.0, 0.0], -0.5)).unwrap().is_good);
        let saddle = [1.0, -1.0, 1.0, -1.0];
        assert!(is_good_point(&pp(5, 2.0), &geom(&saddle, -1.0)).unwrap().is_good);
        assert!(!is_good_point(&pp(5, 2.0), &geom(&saddle, 0.0)).unwrap().is_good);
        // Boundary of the p = 2 condition sits at h0 = −27/32.
        assert!(!is_good_point(&pp(5, 2.0), &geom(&saddle, -27.0 / 32.0 + 1e-9)).unwrap().is_good);
        assert!(is_good_point(&pp(5, 2.0), &geom(&saddle, -27.0 / 32.0 - 1e-9)).unwrap().is_good);
        let mut g = geom(&[1.0, 1.0], 0.0);
        g.one_sided = false;
        assert!(!is_good_point(&pp(3, 1.5), &g).unwrap().is_good);
        assert!(matches!(is_good_point(&pp(3, 2.0), &geom(&[1.0, 1.0], 0.0)), Err(Error::Regime(_))));
    }

    #[test]
    fn constant_bound_examples() {
        let params = pp(2, 1.5);
        assert_relative_eq!(constant_testfunction_bound(1.0, 4.0, 1.0, &params).unwrap(), 0.5);
        assert_eq!(constant_testfunction_bound(1.0, 4.0, 0.0, &params).unwrap(), 0.0);
        let pi = std::f64::consts::PI;
        let v = constant_testfunction_bound(pi, 2.0 * pi, pi, &params).unwrap();
        assert!((v - 1.2533).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn first_order_sign_opposes_mean_curvature(
            lambdas in proptest::collection::vec(-3.0f64..3.0, 3),
            frac in 0.05f64..0.95,
        ) {
            let n = 4;
            let p = 1.0 + 1.5 * frac; // (1, 2.5)
            let params = pp(n, p);
            let g = geom(&lambdas, 0.0);
            let c1 = first_order_coefficient(&params, &g).unwrap();
            let h = g.mean_curvature();
            if h.abs() > 1e-12 {
                prop_assert!(c1 * h < 0.0);
            }
        }

        #[test]
        fn good_point_matches_e_sign_for_n_ge_5(
            l in proptest::collection::vec(-2.0f64..2.0, 6),
            frac in 0.05f64..0.95,
        ) {
            let n = 7; // 2 < p < (N+2)/3 = 3
            let p = 2.0 + frac;
            let mean: f64 = l.iter().sum::<f64>() / l.len() as f64;
            let centred: Vec<f64> = l.iter().map(|x| x - mean).collect();
            let params = pp(n, p);
            let g = geom(&centred, 0.3);
            let verdict = is_good_point(&params, &g).unwrap();
            let e = second_order_e(&params, &g).unwrap();
            prop_assert_eq!(verdict.is_good, e < 0.0);
        }

        #[test]
        fn expansion_tends_to_one(
            lambdas in proptest::collection::vec(-2.0f64..2.0, 3),
            h0 in -2.0f64..2.0,
            frac in 0.02f64..0.98,
        ) {
            let params = pp(4, 1.0 + 2.9 * frac);
            let g = geom(&lambdas, h0);
            let far = (rayleigh_expansion(&params, &g, 1e-4).unwrap() - 1.0).abs();
            let near = (rayleigh_expansion(&params, &g, 1e-8).unwrap() - 1.0).abs();
            prop_assert!(near <= far + 1e-15);
            prop_assert!(near < 1e-5);
        }
    }
}
