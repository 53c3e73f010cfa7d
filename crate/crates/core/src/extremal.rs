//! The half-space extremal `U(y, t) = [(t+1)² + |y|²]^{−(N−p)/(2(p−1))}`,
//! its rescalings, and the closed-form norms that give the sharp trace
//! constant K_p.

use crate::error::{Error, Result};
use crate::gamma::ln_gamma;
use crate::scalar::Real;

/// Dimension `N ≥ 2` and exponent `1 < p < N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams<T> {
    n: usize,
    p: T,
}

impl<T: Real> ProblemParams<T> {
    pub fn new(n: usize, p: T) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("dimension N must be >= 2, got {n}")));
        }
        if !p.is_finite() || !(p > T::one()) {
            return Err(Error::InvalidParams(format!("p must be > 1, got {p}")));
        }
        if !(p < T::from_usize_lossy(n)) {
            return Err(Error::InvalidParams(format!("p must be < N (N = {n}, p = {p})")));
        }
        Ok(Self { n, p })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> T {
        self.p
    }

    /// N as a scalar.
    pub fn n_real(&self) -> T {
        T::from_usize_lossy(self.n)
    }

    /// Critical trace exponent p_* = p(N−1)/(N−p).
    pub fn critical_exponent(&self) -> T {
        let n = self.n_real();
        self.p * (n - T::one()) / (n - self.p)
    }

    /// p / p_* = (N−p)/(N−1).
    pub fn trace_power(&self) -> T {
        let n = self.n_real();
        (n - self.p) / (n - T::one())
    }

    /// (N−p)/(p−1): the blow-up rate of the gradient energy as ε → 0.
    pub fn decay_rate(&self) -> T {
        (self.n_real() - self.p) / (self.p - T::one())
    }

    /// (N−p)/(2(p−1)): the exponent of the profile denominator.
    pub fn profile_exponent(&self) -> T {
        self.decay_rate() / T::lit(2.0)
    }

    /// p(N−1)/(2(p−1)): the denominator exponent of |∇U|^p and U^{p_*}.
    pub fn energy_exponent(&self) -> T {
        self.p * (self.n_real() - T::one()) / (T::lit(2.0) * (self.p - T::one()))
    }

    /// (N−1)/(2(p−1)).
    pub fn trace_gamma_arg(&self) -> T {
        (self.n_real() - T::one()) / (T::lit(2.0) * (self.p - T::one()))
    }
}

/// A point `(y, t)` of the closed half-space, `y ∈ R^{N−1}`, `t ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpacePoint<T> {
    pub y: Vec<T>,
    pub t: T,
}

impl<T: Real> HalfSpacePoint<T> {
    pub fn new(y: Vec<T>, t: T) -> Result<Self> {
        if !(t >= T::zero()) {
            return Err(Error::Domain(format!("normal coordinate must be >= 0, got {t}")));
        }
        Ok(Self { y, t })
    }

    fn check_dim(&self, params: &ProblemParams<T>) -> Result<()> {
        if self.y.len() + 1 != params.dim() {
            return Err(Error::Domain(format!(
                "point has {} tangential coordinates, expected {}",
                self.y.len(),
                params.dim() - 1
            )));
        }
        Ok(())
    }
}

/// Concentration scale and centre of a rescaled extremal.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalParams<T> {
    pub epsilon: T,
    pub y0: Vec<T>,
}

impl<T: Real> ExtremalParams<T> {
    pub fn new(epsilon: T, y0: Vec<T>) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::Domain(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { epsilon, y0 })
    }
}

fn norm_sq<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// U(y, t).
pub fn eval_u<T: Real>(params: &ProblemParams<T>, pt: &HalfSpacePoint<T>) -> Result<T> {
    pt.check_dim(params)?;
    let tp = pt.t + T::one();
    let denom = tp * tp + norm_sq(&pt.y);
    Ok(denom.powf(-params.profile_exponent()))
}

/// U_{ε,y₀}(y, t) = ε^{(N−p)/(p(p−1))} [(t+ε)² + |y−y₀|²]^{−(N−p)/(2(p−1))}.
pub fn eval_u_rescaled<T: Real>(
    params: &ProblemParams<T>,
    extremal: &ExtremalParams<T>,
    pt: &HalfSpacePoint<T>,
) -> Result<T> {
    pt.check_dim(params)?;
    if extremal.y0.len() != pt.y.len() {
        return Err(Error::Domain("concentration centre has wrong dimension".into()));
    }
    let eps = extremal.epsilon;
    let dy: Vec<T> = pt.y.iter().zip(&extremal.y0).map(|(&a, &b)| a - b).collect();
    let te = pt.t + eps;
    let denom = te * te + norm_sq(&dy);
    let prefactor = eps.powf(params.decay_rate() / params.p());
    Ok(prefactor * denom.powf(-params.profile_exponent()))
}

/// ∇U(y, t) as an N-vector `(∂_y, ∂_t)`.
pub fn eval_grad_u<T: Real>(params: &ProblemParams<T>, pt: &HalfSpacePoint<T>) -> Result<Vec<T>> {
    pt.check_dim(params)?;
    let tp = pt.t + T::one();
    let denom = tp * tp + norm_sq(&pt.y);
    let scale = -params.decay_rate() * denom.powf(-(params.profile_exponent() + T::one()));
    let mut g: Vec<T> = pt.y.iter().map(|&yi| scale * yi).collect();
    g.push(scale * tp);
    Ok(g)
}

fn ln_norm_ratio<T: Real>(params: &ProblemParams<T>) -> Result<T> {
    let a = params.trace_gamma_arg();
    Ok(ln_gamma(a)? - ln_gamma(params.p() * a)?)
}

/// ∫_{R^{N−1}} U(y, 0)^{p_*} dy = π^{(N−1)/2} Γ((N−1)/(2(p−1))) / Γ(p(N−1)/(2(p−1))).
pub fn boundary_norm_lpstar<T: Real>(params: &ProblemParams<T>) -> Result<T> {
    let half_dim = (params.n_real() - T::one()) / T::lit(2.0);
    Ok((half_dim * T::PI().ln() + ln_norm_ratio(params)?).exp())
}

/// ∫_{R^N_+} |∇U|^p = ((N−p)/(p−1))^{p−1} · boundary_norm_lpstar.
pub fn gradient_norm_lp<T: Real>(params: &ProblemParams<T>) -> Result<T> {
    let half_dim = (params.n_real() - T::one()) / T::lit(2.0);
    let ln = (params.p() - T::one()) * params.decay_rate().ln()
        + half_dim * T::PI().ln()
        + ln_norm_ratio(params)?;
    Ok(ln.exp())
}

/// K_p^{-1} in closed form.
pub fn kp_inverse<T: Real>(params: &ProblemParams<T>) -> Result<T> {
    let p = params.p();
    let pm1 = p - T::one();
    let ln = pm1 * params.decay_rate().ln()
        + pm1 / T::lit(2.0) * T::PI().ln()
        + pm1 / (params.n_real() - T::one()) * ln_norm_ratio(params)?;
    Ok(ln.exp())
}

/// K_p^{-1} recomputed as `gradient_norm / boundary_norm^{p/p_*}`.
pub fn kp_inverse_from_norms<T: Real>(params: &ProblemParams<T>) -> Result<T> {
    Ok(gradient_norm_lp(params)? / boundary_norm_lpstar(params)?.powf(params.trace_power()))
}
