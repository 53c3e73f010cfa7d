//! Direct quadrature of the test functions `u_ε` on curved model patches.
//!
//! The patch is `{(y, t) : t > ρ(y)}` with `ρ(y) = ½Σλᵢyᵢ² + Σcᵢⱼₖyᵢyⱼyₖ`,
//! flattened by `t = ρ(y) + s`. Around the concentration point the
//! half-plane `(|y|, s)` is written in polar form `(R, ψ)`; `R ∈ [0, 4ε]`
//! is integrated linearly and the rest in `ln R`, so the ε-scale peak and
//! the O(1) cutoff region get the same resolution for every ε.

use crate::error::{Error, Result};
use crate::expansion::compare_threshold;
use crate::extremal::{kp_inverse, ProblemParams};
use crate::gamma::sphere_volume;
use crate::quadrature::{integrate, CubatureOptions, QuadratureResult};

type Params = ProblemParams<f64>;

/// Largest dimension the oracle integrates directly.
pub const MAX_ORACLE_DIM: usize = 4;

/// Quintic smoothstep cutoff in `|x|`: 1 inside `inner`, 0 outside `outer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub inner: f64,
    pub outer: f64,
}

impl CutoffProfile {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner && outer.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "cutoff needs 0 < inner < outer, got ({inner}, {outer})"
            )));
        }
        Ok(Self { inner, outer })
    }

    /// Default radii `(r/4, r/2)` for a patch of radius `r`.
    pub fn for_radius(r: f64) -> Self {
        Self {
            inner: r / 4.0,
            outer: r / 2.0,
        }
    }

    fn s(&self, d: f64) -> f64 {
        ((self.outer - d) / (self.outer - self.inner)).clamp(0.0, 1.0)
    }

    pub fn value(&self, d: f64) -> f64 {
        let s = self.s(d);
        s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }

    /// dφ/d|x|
    pub fn derivative(&self, d: f64) -> f64 {
        let s = self.s(d);
        let q = s * (1.0 - s);
        -30.0 * q * q / (self.outer - self.inner)
    }
}

/// Curved half-space patch around the concentration point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDomain {
    /// Patch radius.
    pub r: f64,
    pub lambdas: Vec<f64>,
    /// Cubic coefficients `c[(i·m + j)·m + k]`, `m = N − 1`; empty means zero.
    pub cubic: Vec<f64>,
    pub cutoff: CutoffProfile,
    /// Linear part of the potential, `h(x) = h₀ + g·x`; empty means zero.
    pub h_gradient: Vec<f64>,
}

/// Parametrization used for the angular directions of `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Integrand depends on `|y|` only.
    Radial,
    /// Integrand even in every `yᵢ`.
    Orthant,
    Full,
}

impl ModelDomain {
    pub fn new(r: f64, lambdas: Vec<f64>) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParams(format!("patch radius must be positive, got {r}")));
        }
        Ok(Self {
            r,
            lambdas,
            cubic: Vec::new(),
            cutoff: CutoffProfile::for_radius(r),
            h_gradient: Vec::new(),
        })
    }

    pub fn flat(n: usize, r: f64) -> Result<Self> {
        Self::new(r, vec![0.0; n.saturating_sub(1)])
    }

    pub fn with_cutoff(mut self, cutoff: CutoffProfile) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_cubic(mut self, cubic: Vec<f64>) -> Self {
        self.cubic = cubic;
        self
    }

    pub fn with_h_gradient(mut self, g: Vec<f64>) -> Self {
        self.h_gradient = g;
        self
    }

    fn m(&self) -> usize {
        self.lambdas.len()
    }

    fn has_cubic(&self) -> bool {
        self.cubic.iter().any(|&c| c != 0.0)
    }

    fn tangential_h(&self) -> bool {
        let m = self.m();
        self.h_gradient.iter().take(m).any(|&g| g != 0.0)
    }

    /// Cheapest parametrization that is exact for this domain.
    pub fn symmetry(&self) -> Symmetry {
        if self.has_cubic() || self.tangential_h() {
            Symmetry::Full
        } else if self.lambdas.windows(2).all(|w| w[0] == w[1]) {
            Symmetry::Radial
        } else {
            Symmetry::Orthant
        }
    }

    pub fn rho(&self, y: &[f64]) -> f64 {
        let m = self.m();
        let mut v = 0.0;
        for i in 0..m {
            v += 0.5 * self.lambdas[i] * y[i] * y[i];
        }
        if self.has_cubic() {
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        v += self.cubic[(i * m + j) * m + k] * y[i] * y[j] * y[k];
                    }
                }
            }
        }
        v
    }

    fn grad_rho_sq(&self, y: &[f64]) -> f64 {
        let m = self.m();
        let mut acc = 0.0;
        for i in 0..m {
            let mut g = self.lambdas[i] * y[i];
            if self.has_cubic() {
                for j in 0..m {
                    for k in 0..m {
                        let c = self.cubic[(i * m + j) * m + k]
                            + self.cubic[(j * m + i) * m + k]
                            + self.cubic[(j * m + k) * m + i];
                        g += c * y[j] * y[k];
                    }
                }
            }
            acc += g * g;
        }
        acc
    }

    fn h_at(&self, h0: f64, x: &[f64]) -> f64 {
        h0 + self.h_gradient.iter().zip(x).map(|(g, v)| g * v).sum::<f64>()
    }

    /// Radius beyond which the cutoff vanishes in `(|y|, s)` polar form.
    fn volume_radius(&self) -> f64 {
        let o = self.cutoff.outer;
        let may_dip = self.has_cubic() || self.lambdas.iter().any(|&l| l < 0.0);
        if !may_dip {
            return o;
        }
        let lmax = self.lambdas.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        let cabs: f64 = self.cubic.iter().map(|c| c.abs()).sum();
        let bound = 0.5 * lmax * o * o + cabs * o * o * o;
        (o * o + (o + bound) * (o + bound)).sqrt()
    }

    fn validate(&self, params: &Params) -> Result<()> {
        let n = params.dim();
        if n > MAX_ORACLE_DIM {
            return Err(Error::InvalidParams(format!(
                "oracle supports N <= {MAX_ORACLE_DIM}, got {n}"
            )));
        }
        if self.m() + 1 != n {
            return Err(Error::InvalidParams(format!(
                "expected {} curvatures for N = {n}, got {}",
                n - 1,
                self.m()
            )));
        }
        let m = self.m();
        if !self.cubic.is_empty() && self.cubic.len() != m * m * m {
            return Err(Error::InvalidParams(format!("cubic tensor needs {} entries", m * m * m)));
        }
        if !self.h_gradient.is_empty() && self.h_gradient.len() != n {
            return Err(Error::InvalidParams(format!("h gradient needs {n} entries")));
        }
        if self.cutoff.outer > self.r {
            return Err(Error::InvalidParams("cutoff support exceeds the patch radius".into()));
        }
        Ok(())
    }
}

struct AngularLayout {
    lower: Vec<f64>,
    upper: Vec<f64>,
    factor: f64,
    signs: Vec<f64>,
}

fn angular_layout(n: usize, sym: Symmetry) -> Result<AngularLayout> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let (lower, upper, factor, signs) = match (n, sym) {
        (_, Symmetry::Radial) => (vec![], vec![], sphere_volume::<f64>(n - 1)?, vec![1.0]),
        (2, Symmetry::Orthant) => (vec![], vec![], 2.0, vec![1.0]),
        (2, Symmetry::Full) => (vec![], vec![], 1.0, vec![1.0, -1.0]),
        (3, Symmetry::Orthant) => (vec![0.0], vec![FRAC_PI_2], 4.0, vec![1.0]),
        (3, Symmetry::Full) => (vec![0.0], vec![2.0 * PI], 1.0, vec![1.0]),
        (4, Symmetry::Orthant) => (vec![0.0, 0.0], vec![FRAC_PI_2, FRAC_PI_2], 8.0, vec![1.0]),
        (4, Symmetry::Full) => (vec![0.0, 0.0], vec![PI, 2.0 * PI], 1.0, vec![1.0]),
        _ => return Err(Error::InvalidParams(format!("no angular layout for N = {n}"))),
    };
    Ok(AngularLayout {
        lower,
        upper,
        factor,
        signs,
    })
}

// Unit direction in R^{N−1} and its surface Jacobian.
fn direction(n: usize, ang: &[f64], sign: f64, out: &mut [f64]) -> f64 {
    match (n, ang.len()) {
        (_, 0) => {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[0] = sign;
            1.0
        }
        (3, 1) => {
            out[0] = ang[0].cos();
            out[1] = ang[0].sin();
            1.0
        }
        (4, 2) => {
            let (st, ct) = ang[0].sin_cos();
            out[0] = st * ang[1].cos();
            out[1] = st * ang[1].sin();
            out[2] = ct;
            st
        }
        _ => unreachable!("layout and dimension agree"),
    }
}

// Splits [0, r_max] into a linear core [0, min(4ε, r_max)] and a log shell.
fn radial_pieces(epsilon: f64, r_max: f64) -> Vec<(bool, f64, f64)> {
    let core = (4.0 * epsilon).min(r_max);
    let mut v = vec![(false, 0.0, core)];
    if r_max > core {
        v.push((true, core.ln(), r_max.ln()));
    }
    v
}

struct Exponents {
    gamma: f64,
    p: f64,
}

// u_ε and ∇u_ε at x = (y, t).
fn field(domain: &ModelDomain, ex: &Exponents, epsilon: f64, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let n = x.len();
    let te = x[n - 1] + epsilon;
    let y2: f64 = x[..n - 1].iter().map(|v| v * v).sum();
    let d2 = te * te + y2;
    let v = d2.powf(-ex.gamma);
    let norm = (y2 + x[n - 1] * x[n - 1]).sqrt();
    let phi = domain.cutoff.value(norm);
    if let Some(g) = grad {
        let dphi = if norm > 0.0 { domain.cutoff.derivative(norm) / norm } else { 0.0 };
        let dv = -2.0 * ex.gamma * v / d2;
        for i in 0..n - 1 {
            g[i] = phi * dv * x[i] + v * dphi * x[i];
        }
        g[n - 1] = phi * dv * te + v * dphi * x[n - 1];
    }
    phi * v
}

#[derive(Clone, Copy)]
enum VolumeKind {
    Gradient,
    Mass(f64),
}

fn volume_integral(
    domain: &ModelDomain,
    params: &Params,
    epsilon: f64,
    opts: &CubatureOptions,
    sym: Symmetry,
    kind: VolumeKind,
) -> Result<QuadratureResult> {
    domain.validate(params)?;
    check_epsilon(epsilon)?;
    let n = params.dim();
    let layout = angular_layout(n, sym)?;
    let ex = Exponents {
        gamma: params.profile_exponent(),
        p: params.p(),
    };
    let r_max = domain.volume_radius();
    let mut total = QuadratureResult::zero();
    for &sign in &layout.signs {
        for (log, a, b) in radial_pieces(epsilon, r_max) {
            let f = |z: &[f64]| {
                let big_r = if log { z[0].exp() } else { z[0] };
                let psi = z[1];
                let (sp, cp) = psi.sin_cos();
                let mut omega = [0.0; MAX_ORACLE_DIM - 1];
                let jac_ang = direction(n, &z[2..], sign, &mut omega[..n - 1]);
                let r = big_r * cp;
                let s = big_r * sp;
                let mut x = [0.0; MAX_ORACLE_DIM];
                for i in 0..n - 1 {
                    x[i] = r * omega[i];
                }
                x[n - 1] = domain.rho(&x[..n - 1]) + s;
                let x = &x[..n];
                let value = match kind {
                    VolumeKind::Gradient => {
                        let mut g = [0.0; MAX_ORACLE_DIM];
                        field(domain, &ex, epsilon, x, Some(&mut g[..n]));
                        let g2: f64 = g[..n].iter().map(|v| v * v).sum();
                        g2.powf(0.5 * ex.p)
                    }
                    VolumeKind::Mass(h0) => {
                        let u = field(domain, &ex, epsilon, x, None);
                        domain.h_at(h0, x) * u.abs().powf(ex.p)
                    }
                };
                let jac_r = big_r.powi(n as i32 - 1) * if log { big_r } else { 1.0 };
                value * jac_r * cp.powi(n as i32 - 2) * jac_ang
            };
            let mut lower = vec![a, 0.0];
            let mut upper = vec![b, std::f64::consts::FRAC_PI_2];
            lower.extend(&layout.lower);
            upper.extend(&layout.upper);
            let mut o = opts.clone();
            if o.initial_splits.is_empty() {
                o.initial_splits = initial_splits(log, lower.len());
            }
            total = total.combine(integrate(f, &lower, &upper, &o)?);
        }
    }
    Ok(total.scale(layout.factor))
}

fn initial_splits(log: bool, dims: usize) -> Vec<usize> {
    let mut v = vec![if log { 8 } else { 2 }, 4];
    v.resize(dims, 4);
    v.truncate(dims);
    v
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be > 0, got {epsilon}")));
    }
    Ok(())
}

/// `∫ |∇u_ε|^p` over the patch.
pub fn integrate_gradient_term(
    domain: &ModelDomain,
    params: &Params,
    epsilon: f64,
    opts: &CubatureOptions,
) -> Result<QuadratureResult> {
    integrate_gradient_term_with(domain, params, epsilon, opts, domain.symmetry())
}

/// As [`integrate_gradient_term`] with an explicit parametrization.
pub fn integrate_gradient_term_with(
    domain: &ModelDomain,
    params: &Params,
    epsilon: f64,
    opts: &CubatureOptions,
    sym: Symmetry,
) -> Result<QuadratureResult> {
    volume_integral(domain, params, epsilon, opts, sym, VolumeKind::Gradient)
}

/// `∫ h |u_ε|^p` over the patch with `h(x) = h_value + g·x`.
pub fn integrate_mass_term(
    domain: &ModelDomain,
    params: &Params,
    h_value: f64,
    epsilon: f64,
    opts: &CubatureOptions,
) -> Result<QuadratureResult> {
    domain.validate(params)?;
    check_epsilon(epsilon)?;
    if h_value == 0.0 && domain.h_gradient.iter().all(|&g| g == 0.0) {
        return Ok(QuadratureResult::zero());
    }
    volume_integral(domain, params, epsilon, opts, domain.symmetry(), VolumeKind::Mass(h_value))
}

/// `∫_{|y|≤a} φ^{p_*} [(ε+ρ)² + |y|²]^{−b} √(1+|∇ρ|²) dy`.
pub fn integrate_boundary_term(
    domain: &ModelDomain,
    params: &Params,
    epsilon: f64,
    opts: &CubatureOptions,
) -> Result<QuadratureResult> {
    integrate_boundary_term_with(domain, params, epsilon, opts, domain.symmetry())
}

pub fn integrate_boundary_term_with(
    domain: &ModelDomain,
    params: &Params,
    epsilon: f64,
    opts: &CubatureOptions,
    sym: Symmetry,
) -> Result<QuadratureResult> {
    domain.validate(params)?;
    check_epsilon(epsilon)?;
    let n = params.dim();
    let layout = angular_layout(n, sym)?;
    let pstar = params.critical_exponent();
    let b = params.energy_exponent();
    let mut total = QuadratureResult::zero();
    for &sign in &layout.signs {
        for (log, a, hi) in radial_pieces(epsilon, domain.cutoff.outer) {
            let f = |z: &[f64]| {
                let r = if log { z[0].exp() } else { z[0] };
                let mut y = [0.0; MAX_ORACLE_DIM - 1];
                let jac_ang = direction(n, &z[1..], sign, &mut y[..n - 1]);
                for v in y[..n - 1].iter_mut() {
                    *v *= r;
                }
                let y = &y[..n - 1];
                let rho = domain.rho(y);
                let norm = (r * r + rho * rho).sqrt();
                let phi = domain.cutoff.value(norm);
                if phi == 0.0 {
                    return 0.0;
                }
                let e = epsilon + rho;
                let core = (e * e + r * r).powf(-b);
                let area = (1.0 + domain.grad_rho_sq(y)).sqrt();
                let jac_r = r.powi(n as i32 - 2) * if log { r } else { 1.0 };
                phi.powf(pstar) * core * area * jac_r * jac_ang
            };
            let mut lower = vec![a];
            let mut upper = vec![hi];
            lower.extend(&layout.lower);
            upper.extend(&layout.upper);
            let mut o = opts.clone();
            if o.initial_splits.is_empty() {
                o.initial_splits = initial_splits(log, lower.len());
            }
            total = total.combine(integrate(f, &lower, &upper, &o)?);
        }
    }
    Ok(total.scale(layout.factor))
}

/// One ε sample of the three integrals and the normalized quotient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSample {
    pub epsilon: f64,
    pub gradient: QuadratureResult,
    pub mass: QuadratureResult,
    pub boundary: QuadratureResult,
    /// `Q(u_ε) / K_p^{-1}`.
    pub quotient: f64,
}

/// Evaluates all three integrals at `epsilon`.
pub fn sample(
    domain: &ModelDomain,
    params: &Params,
    h_value: f64,
    epsilon: f64,
    opts: &CubatureOptions,
) -> Result<OracleSample> {
    let gradient = integrate_gradient_term(domain, params, epsilon, opts)?;
    let mass = integrate_mass_term(domain, params, h_value, epsilon, opts)?;
    let boundary = integrate_boundary_term(domain, params, epsilon, opts)?;
    let quotient = (gradient.value + mass.value) / boundary.value.powf(params.trace_power()) / kp_inverse(params)?;
    Ok(OracleSample {
        epsilon,
        gradient,
        mass,
        boundary,
        quotient,
    })
}

/// `Q(u_ε) / K_p^{-1}`; tends to 1 as ε → 0.
pub fn rayleigh_quotient_numeric(
    domain: &ModelDomain,
    params: &Params,
    h_value: f64,
    epsilon: f64,
    opts: &CubatureOptions,
) -> Result<f64> {
    Ok(sample(domain, params, h_value, epsilon, opts)?.quotient)
}

/// `per_decade` log-spaced values per decade from `lo` to `hi`, both included.
pub fn epsilon_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || per_decade == 0 {
        return Err(Error::InvalidParams(format!("bad epsilon grid [{lo}, {hi}] x {per_decade}")));
    }
    let steps = ((hi / lo).log10() * per_decade as f64).round().max(1.0) as usize;
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..=steps)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == steps {
                hi
            } else {
                (a + (b - a) * i as f64 / steps as f64).exp()
            }
        })
        .collect())
}

/// Quadrature estimate of an untruncated half-space norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    /// Integral over the truncation ball.
    pub value: f64,
    /// Analytic upper bound on the discarded tail.
    pub tail_bound: f64,
    pub radius: f64,
    pub quadrature: QuadratureResult,
}

/// Oracle for the closed-form extremal norms and their quotient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremalNormCheck {
    pub boundary: NormEstimate,
    pub gradient: NormEstimate,
    /// `‖∇U‖_p^p / ‖U‖_{p_*}^p` from the two estimates.
    pub quotient: f64,
}

fn truncation_radius(head: f64, tail_at: impl Fn(f64) -> f64, rel_tail: f64) -> f64 {
    let target = rel_tail * head;
    let mut r = 10.0;
    while tail_at(r) > target && r < 1e30 {
        r *= 2.0;
    }
    r
}

/// `∫_{R^{N−1}} U(y,0)^{p_*} dy` by quadrature with a bounded tail.
pub fn boundary_norm_quadrature(params: &Params, rel_tail: f64, opts: &CubatureOptions) -> Result<NormEstimate> {
    let n = params.dim();
    let b = params.energy_exponent();
    let omega = sphere_volume::<f64>(n - 1)?;
    let f = |log: bool| {
        move |z: &[f64]| {
            let r = if log { z[0].exp() } else { z[0] };
            omega * r.powi(n as i32 - 2) * (1.0 + r * r).powf(-b) * if log { r } else { 1.0 }
        }
    };
    let decay = 2.0 * b - (n as f64 - 1.0);
    let tail = |r: f64| omega * r.powf(-decay) / decay;
    let head = integrate(f(false), &[0.0], &[10.0], opts)?;
    let radius = truncation_radius(head.value, tail, rel_tail);
    let mut o = opts.clone();
    o.initial_splits = vec![16];
    let outer = integrate(f(true), &[10f64.ln()], &[radius.ln()], &o)?;
    let q = head.combine(outer);
    Ok(NormEstimate {
        value: q.value,
        tail_bound: tail(radius),
        radius,
        quadrature: q,
    })
}

/// `∫_{t>0} |∇U|^p` by quadrature with a bounded tail.
pub fn gradient_norm_quadrature(params: &Params, rel_tail: f64, opts: &CubatureOptions) -> Result<NormEstimate> {
    let n = params.dim();
    let p = params.p();
    let b = params.energy_exponent();
    let k = params.decay_rate();
    let omega = sphere_volume::<f64>(n - 1)?;
    // |∇U|^p = k^p [(t+1)² + r²]^{−b}
    let kp = k.powf(p);
    let f = |log: bool| {
        move |z: &[f64]| {
            let big_r = if log { z[0].exp() } else { z[0] };
            let (sp, cp) = z[1].sin_cos();
            let r = big_r * cp;
            let t = big_r * sp;
            let d2 = (t + 1.0) * (t + 1.0) + r * r;
            let jac = big_r.powi(n as i32 - 1) * cp.powi(n as i32 - 2) * if log { big_r } else { 1.0 };
            omega * kp * d2.powf(-b) * jac
        }
    };
    // Over |x| > R: |∇U|^p ≤ k^p |x|^{−2b}, half of S^{N−1}.
    let half_sphere = 0.5 * sphere_volume::<f64>(n)?;
    let tail = |r: f64| kp * half_sphere * r.powf(-k) / k;
    let quarter = std::f64::consts::FRAC_PI_2;
    let mut o = opts.clone();
    o.initial_splits = vec![4, 4];
    let head = integrate(f(false), &[0.0, 0.0], &[10.0, quarter], &o)?;
    let radius = truncation_radius(head.value, tail, rel_tail);
    o.initial_splits = vec![16, 4];
    let outer = integrate(f(true), &[10f64.ln(), 0.0], &[radius.ln(), quarter], &o)?;
    let q = head.combine(outer);
    Ok(NormEstimate {
        value: q.value,
        tail_bound: tail(radius),
        radius,
        quadrature: q,
    })
}

/// Both norms by quadrature and the resulting flat half-space quotient.
pub fn extremal_norm_check(params: &Params, rel_tail: f64, opts: &CubatureOptions) -> Result<ExtremalNormCheck> {
    let boundary = boundary_norm_quadrature(params, rel_tail, opts)?;
    let gradient = gradient_norm_quadrature(params, rel_tail, opts)?;
    let quotient = gradient.value / boundary.value.powf(params.trace_power());
    Ok(ExtremalNormCheck {
        boundary,
        gradient,
        quotient,
    })
}

/// Exponent set used to fit each integral near its leading singularity.
pub fn leading_exponents(params: &Params) -> LeadingExponents {
    let n = params.n_real();
    let p = params.p();
    let k = params.decay_rate();
    let mass = (n - p * p) / (p - 1.0);
    LeadingExponents {
        gradient: vec![-k, 1.0 - k, 0.0],
        mass: if compare_threshold(p, n.sqrt()) == std::cmp::Ordering::Less {
            Some(vec![-mass, 1.0 - mass, 0.0])
        } else {
            None
        },
        boundary: vec![-1.0 - k, -k, 0.0],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadingExponents {
    pub gradient: Vec<f64>,
    /// `None` when the mass integral stays bounded.
    pub mass: Option<Vec<f64>>,
    pub boundary: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pp(n: usize, p: f64) -> Params {
        ProblemParams::new(n, p).unwrap()
    }

    fn opts(rel: f64) -> CubatureOptions {
        CubatureOptions {
            rel_tol: rel,
            ..CubatureOptions::default()
        }
    }

    #[test]
    fn cutoff_plateaus_and_derivative() {
        let c = CutoffProfile::for_radius(1.0);
        assert_eq!(c.value(0.1), 1.0);
        assert_eq!(c.value(0.6), 0.0);
        let d = 0.37;
        let h = 1e-6;
        let fd = (c.value(d + h) - c.value(d - h)) / (2.0 * h);
        assert_relative_eq!(c.derivative(d), fd, max_relative = 1e-7);
        assert!(CutoffProfile::new(0.5, 0.2).is_err());
    }

    #[test]
    fn symmetry_selection() {
        assert_eq!(ModelDomain::new(1.0, vec![1.0, 1.0]).unwrap().symmetry(), Symmetry::Radial);
        assert_eq!(ModelDomain::new(1.0, vec![1.0, -1.0]).unwrap().symmetry(), Symmetry::Orthant);
        let d = ModelDomain::new(1.0, vec![1.0, 1.0]).unwrap().with_h_gradient(vec![0.2, 0.0, 0.0]);
        assert_eq!(d.symmetry(), Symmetry::Full);
    }

    #[test]
    fn zero_potential_gives_exact_zero() {
        let d = ModelDomain::flat(3, 1.0).unwrap();
        let r = integrate_mass_term(&d, &pp(3, 1.5), 0.0, 0.01, &opts(1e-8)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn radial_matches_full_parametrization() {
        let params = pp(3, 1.5);
        let d = ModelDomain::new(1.0, vec![0.7, 0.7]).unwrap();
        let o = opts(1e-11);
        for eps in [0.05, 0.01] {
            let a = integrate_gradient_term_with(&d, &params, eps, &o, Symmetry::Radial).unwrap();
            let b = integrate_gradient_term_with(&d, &params, eps, &o, Symmetry::Full).unwrap();
            assert_relative_eq!(a.value, b.value, max_relative = 1e-8);
            let a = integrate_boundary_term_with(&d, &params, eps, &o, Symmetry::Radial).unwrap();
            let b = integrate_boundary_term_with(&d, &params, eps, &o, Symmetry::Full).unwrap();
            assert_relative_eq!(a.value, b.value, max_relative = 1e-8);
        }
    }

    #[test]
    fn orthant_matches_full_for_even_domain() {
        let params = pp(3, 1.5);
        let d = ModelDomain::new(1.0, vec![0.8, -0.3]).unwrap();
        let o = opts(1e-9);
        let a = integrate_boundary_term_with(&d, &params, 0.02, &o, Symmetry::Orthant).unwrap();
        let b = integrate_boundary_term_with(&d, &params, 0.02, &o, Symmetry::Full).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-7);
    }

    #[test]
    fn boundary_term_decreases_in_epsilon() {
        let params = pp(3, 1.5);
        let d = ModelDomain::new(1.0, vec![1.0, 1.0]).unwrap();
        let o = opts(1e-9);
        let vals: Vec<f64> = [0.002, 0.005, 0.01, 0.02]
            .iter()
            .map(|&e| integrate_boundary_term(&d, &params, e, &o).unwrap().value)
            .collect();
        assert!(vals.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn mass_term_bounded_above_sqrt_n() {
        let params = pp(3, 1.8);
        let d = ModelDomain::flat(3, 1.0).unwrap();
        let o = opts(1e-9);
        let a = integrate_mass_term(&d, &params, 1.0, 1e-2, &o).unwrap().value;
        let b = integrate_mass_term(&d, &params, 1.0, 1e-4, &o).unwrap().value;
        assert!(b.is_finite() && b < 2.0 * a);
    }

    #[test]
    fn norm_quadrature_n3_p2() {
        let params = pp(3, 2.0);
        let chk = extremal_norm_check(&params, 1e-9, &opts(1e-11)).unwrap();
        let pi = std::f64::consts::PI;
        assert_relative_eq!(chk.boundary.value, pi, max_relative = 1e-6);
        assert_relative_eq!(chk.gradient.value, pi, max_relative = 1e-6);
        assert_relative_eq!(chk.quotient, pi.sqrt(), max_relative = 1e-5);
    }

    #[test]
    fn grid_is_log_spaced_and_inclusive() {
        let g = epsilon_grid(1e-3, 1e-2, 8).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[8], 1e-2);
        assert_relative_eq!(g[1] / g[0], g[8] / g[7], max_relative = 1e-12);
    }
}
