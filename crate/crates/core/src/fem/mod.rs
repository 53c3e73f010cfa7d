//! P1 finite elements for the discrete Rayleigh quotient
//! `(∫|∇u|^p + ∫h|u|^p) / (∫_∂|u|^q)^{p/q}` on planar meshes.

pub mod mesh;
pub mod sparse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::extremal::{kp_inverse, ProblemParams};
pub use mesh::{generate_mesh, Mesh, MeshShape};
use sparse::{pcg, CsrMatrix};

type Params = ProblemParams<f64>;

// Three-point Gauss rule on [0, 1].
const GAUSS_T: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
// Relative floor on |u| in the mass-curvature weights.
const MASS_FLOOR: f64 = 1e-8;

const GAUSS_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Potential `h` sampled at the mesh vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub values: Vec<f64>,
}

impl PotentialField {
    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self {
            values: vec![c; mesh.num_vertices()],
        }
    }

    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::InvalidParams(format!(
                "potential has {} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("potential must be finite".into()));
        }
        Ok(Self { values })
    }

    /// Lower bound `c₀ = min h` when it is positive, which makes the
    /// energy dominate `c₀‖u‖_p^p`; `None` otherwise.
    pub fn coercivity_witness(&self) -> Option<f64> {
        let m = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        (m > 0.0).then_some(m)
    }
}

/// Discrete eigenpair from [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub lambda: f64,
    /// Vertex values, normalized so that `∫_∂|u|^q = 1`.
    pub dofs: Vec<f64>,
    pub exponent_q: f64,
    pub iterations: usize,
    /// Euler–Lagrange residual in the dual `H¹` norm.
    pub residual: f64,
    /// Quotient after every accepted step, starting with the initial guess.
    pub history: Vec<f64>,
    /// `‖u‖_{L^q(∂Ω)} / ‖u‖_{L^q(Ω)}`; small values flag near-zero traces.
    pub trace_fraction: f64,
}

/// Armijo backtracking parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub armijo: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Relative quotient decrease treated as stagnation.
    pub tol: f64,
    /// Required Euler–Lagrange residual.
    pub residual_tol: f64,
    pub seed: u64,
    /// Additional random starts besides `u ≡ 1`.
    pub restarts: usize,
    /// Floor on `|∇u|` in the `|∇u|^{p−2}` preconditioner weights.
    pub gradient_floor: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            step_rule: StepRule::default(),
            tol: 1e-8,
            residual_tol: 1e-6,
            seed: 0,
            restarts: 0,
            gradient_floor: 1e-5,
        }
    }
}

struct Problem<'a> {
    mesh: &'a Mesh,
    h: &'a [f64],
    p: f64,
    q: f64,
    grads: Vec<([[f64; 2]; 3], f64)>,
    edge_len: Vec<f64>,
}

fn check_inputs(mesh: &Mesh, params: &Params, h: &PotentialField, q: f64) -> Result<()> {
    if params.dim() != 2 {
        return Err(Error::InvalidParams(format!(
            "the finite-element solver is planar (N = 2), got N = {}",
            params.dim()
        )));
    }
    let pstar = params.critical_exponent();
    if !(q > 1.0 && q <= pstar * (1.0 + 1e-12)) {
        return Err(Error::InvalidParams(format!("need 1 < q <= p_* = {pstar}, got {q}")));
    }
    if h.values.len() != mesh.num_vertices() {
        return Err(Error::InvalidParams("potential does not match the mesh".into()));
    }
    Ok(())
}

impl<'a> Problem<'a> {
    fn new(mesh: &'a Mesh, params: &Params, h: &'a PotentialField, q: f64) -> Result<Self> {
        check_inputs(mesh, params, h, q)?;
        Ok(Self {
            mesh,
            h: &h.values,
            p: params.p(),
            q,
            grads: (0..mesh.triangles.len()).map(|t| mesh.hat_gradients(t)).collect(),
            edge_len: mesh.boundary_edges.iter().map(|e| mesh.edge_length(e)).collect(),
        })
    }

    fn n(&self) -> usize {
        self.mesh.num_vertices()
    }

    fn tri_gradient(&self, t: usize, u: &[f64]) -> [f64; 2] {
        let (g, _) = &self.grads[t];
        let tri = &self.mesh.triangles[t];
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += u[tri[k]] * g[k][0];
            out[1] += u[tri[k]] * g[k][1];
        }
        out
    }

    /// Energy `F(u)`, optionally accumulating `dF`.
    fn energy(&self, u: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let p = self.p;
        let mut total = 0.0;
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let (g, area) = &self.grads[t];
            let du = self.tri_gradient(t, u);
            let norm = du[0].hypot(du[1]);
            total += area * norm.powf(p);
            if let Some(gr) = grad.as_deref_mut() {
                if norm > 0.0 {
                    let c = area * p * norm.powf(p - 2.0);
                    for k in 0..3 {
                        gr[tri[k]] += c * (du[0] * g[k][0] + du[1] * g[k][1]);
                    }
                }
            }
            // Vertex-lumped rule for ∫h|u|^p.
            for &v in tri {
                let w = area / 3.0 * self.h[v];
                total += w * u[v].abs().powf(p);
                if let Some(gr) = grad.as_deref_mut() {
                    if u[v] != 0.0 {
                        gr[v] += w * p * u[v].abs().powf(p - 1.0) * u[v].signum();
                    }
                }
            }
        }
        total
    }

    /// Trace functional `G(u) = ∫_∂|u|^q`, optionally accumulating `dG`.
    fn trace(&self, u: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let q = self.q;
        let mut total = 0.0;
        for (e, edge) in self.mesh.boundary_edges.iter().enumerate() {
            let len = self.edge_len[e];
            let (ua, ub) = (u[edge[0]], u[edge[1]]);
            let (v, da, db) = edge_power_integral(ua, ub, q);
            total += len * v;
            if let Some(gr) = grad.as_deref_mut() {
                gr[edge[0]] += len * da;
                gr[edge[1]] += len * db;
            }
        }
        total
    }

    fn quotient(&self, u: &[f64]) -> Result<f64> {
        let g = self.trace(u, None);
        if !(g > 0.0) {
            return Err(Error::ZeroTrace);
        }
        Ok(self.energy(u, None) / g.powf(self.p / self.q))
    }

    fn normalize(&self, u: &mut [f64]) -> Result<()> {
        let g = self.trace(u, None);
        if !(g > 0.0) {
            return Err(Error::ZeroTrace);
        }
        let s = g.powf(-1.0 / self.q);
        u.iter_mut().for_each(|v| *v *= s);
        Ok(())
    }

    /// Weak-form residual `a(u; φᵢ) − λ b(u; φᵢ)` for normalized `u`.
    fn residual_vector(&self, u: &[f64], lambda: f64, fixed: &[bool]) -> Vec<f64> {
        let n = self.n();
        let mut df = vec![0.0; n];
        let mut dg = vec![0.0; n];
        self.energy(u, Some(&mut df));
        self.trace(u, Some(&mut dg));
        (0..n)
            .map(|i| if fixed[i] { 0.0 } else { df[i] / self.p - lambda * dg[i] / self.q })
            .collect()
    }

    fn trace_fraction(&self, u: &[f64]) -> f64 {
        let mut interior = 0.0;
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let area = self.grads[t].1;
            for k in 0..3 {
                let um = 0.5 * (u[tri[k]] + u[tri[(k + 1) % 3]]);
                interior += area / 3.0 * um.abs().powf(self.q);
            }
        }
        if interior > 0.0 {
            (self.trace(u, None) / interior).powf(1.0 / self.q)
        } else {
            f64::INFINITY
        }
    }

    /// `K_w + M` with `K_w` weighted by `max(|∇u|, δ)^{p−2}`; unit weights when `u` is `None`.
    fn metric(&self, u: Option<&[f64]>, floor: f64) -> CsrMatrix {
        let mut trip = Vec::with_capacity(18 * self.mesh.triangles.len());
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let (g, area) = &self.grads[t];
            let w = match u {
                Some(u) => {
                    let du = self.tri_gradient(t, u);
                    du[0].hypot(du[1]).max(floor).powf(self.p - 2.0)
                }
                None => 1.0,
            };
            for i in 0..3 {
                for j in 0..3 {
                    let k = w * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    let m = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                    trip.push((tri[i], tri[j], k + m));
                }
            }
        }
        if let Some(u) = u {
            // Lumped curvature (p−1)|h||u|^{p−2} of the mass term, which
            // blows up near zeros of u when p < 2.
            let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let delta = (MASS_FLOOR * umax).max(f64::MIN_POSITIVE);
            let mut diag = vec![0.0; self.n()];
            for (t, tri) in self.mesh.triangles.iter().enumerate() {
                let area = self.grads[t].1;
                for &v in tri {
                    diag[v] += area / 3.0;
                }
            }
            for (v, d) in diag.iter().enumerate() {
                let c = (self.p - 1.0) * self.h[v].abs() * u[v].abs().max(delta).powf(self.p - 2.0);
                if c > 1.0 {
                    trip.push((v, v, d * (c - 1.0)));
                }
            }
        }
        CsrMatrix::from_triplets(self.n(), &trip)
    }

    fn dual_norm(&self, r: &[f64], fixed: &[bool]) -> Result<f64> {
        let a = self.metric(None, 0.0).with_identity_rows(fixed);
        let z = pcg(&a, r, 1e-12, 10 * self.n() + 100)?;
        Ok(r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
    }
}

/// `∫₀¹ |(1−s)a + s b|^q ds` in closed form, with its partial derivatives.
fn edge_power_integral(a: f64, b: f64, q: f64) -> (f64, f64, f64) {
    let (x, y) = (a.abs(), b.abs());
    if a * b < 0.0 {
        // Split at the sign change.
        let sum = x + y;
        let v = (x.powf(q + 1.0) + y.powf(q + 1.0)) / ((q + 1.0) * sum);
        return (v, a.signum() * (x.powf(q) - v) / sum, b.signum() * (y.powf(q) - v) / sum);
    }
    let scale = x.max(y);
    if scale == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let sign = if a != 0.0 { a.signum() } else { b.signum() };
    if (y - x).abs() <= 1e-3 * scale {
        // Nearly constant: Gauss avoids the cancellation below.
        let (mut v, mut dx, mut dy) = (0.0, 0.0, 0.0);
        for (t, w) in GAUSS_T.iter().zip(GAUSS_W) {
            let z = (1.0 - t) * x + t * y;
            v += w * z.powf(q);
            let d = w * q * z.powf(q - 1.0);
            dx += d * (1.0 - t);
            dy += d * t;
        }
        return (v, sign * dx, sign * dy);
    }
    let v = (y.powf(q + 1.0) - x.powf(q + 1.0)) / ((q + 1.0) * (y - x));
    (v, sign * (v - x.powf(q)) / (y - x), sign * (y.powf(q) - v) / (y - x))
}

/// Discrete Rayleigh quotient of the P1 function with vertex values `dofs`.
pub fn rayleigh_quotient(mesh: &Mesh, dofs: &[f64], params: &Params, h: &PotentialField, q: f64) -> Result<f64> {
    if dofs.len() != mesh.num_vertices() {
        return Err(Error::InvalidParams("dof vector does not match the mesh".into()));
    }
    Problem::new(mesh, params, h, q)?.quotient(dofs)
}

/// Quotient of `u ≡ 1`, the discrete upper bound for λ.
pub fn constant_quotient(mesh: &Mesh, params: &Params, h: &PotentialField, q: f64) -> Result<f64> {
    rayleigh_quotient(mesh, &vec![1.0; mesh.num_vertices()], params, h, q)
}

/// Minimizes the quotient over P1 functions.
pub fn minimize(
    mesh: &Mesh,
    params: &Params,
    h: &PotentialField,
    q: f64,
    options: &MinimizeOptions,
) -> Result<EigenSolution> {
    minimize_constrained(mesh, params, h, q, options, &vec![false; mesh.num_vertices()])
}

/// As [`minimize`] with the dofs flagged in `fixed_zero` held at zero.
pub fn minimize_constrained(
    mesh: &Mesh,
    params: &Params,
    h: &PotentialField,
    q: f64,
    options: &MinimizeOptions,
    fixed_zero: &[bool],
) -> Result<EigenSolution> {
    let prob = Problem::new(mesh, params, h, q)?;
    if fixed_zero.len() != prob.n() {
        return Err(Error::InvalidParams("constraint mask does not match the mesh".into()));
    }
    if mesh.boundary_mask().iter().zip(fixed_zero).all(|(b, f)| !b || *f) {
        return Err(Error::Infeasible("every boundary dof is constrained to zero".into()));
    }
    if h.coercivity_witness().is_none() {
        log::warn!("potential has min h <= 0; coercivity is not guaranteed");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut best: Option<(bool, EigenSolution)> = None;
    for start in 0..=options.restarts {
        let mut u: Vec<f64> = if start == 0 {
            vec![1.0; prob.n()]
        } else {
            (0..prob.n()).map(|_| rng.gen_range(0.5..1.5)).collect()
        };
        for (v, &f) in u.iter_mut().zip(fixed_zero) {
            if f {
                *v = 0.0;
            }
        }
        let (converged, sol) = descend(&prob, u, fixed_zero, options)?;
        let better = match &best {
            None => true,
            Some((bc, bs)) => (converged && !bc) || (converged == *bc && sol.lambda < bs.lambda),
        };
        if better {
            best = Some((converged, sol));
        }
    }
    let (converged, sol) = best.expect("at least one start");
    if converged {
        Ok(sol)
    } else {
        Err(Error::Iteration {
            iterations: sol.iterations,
            residual: sol.residual,
            best: Box::new(sol),
        })
    }
}

fn descend(prob: &Problem<'_>, mut u: Vec<f64>, fixed: &[bool], opts: &MinimizeOptions) -> Result<(bool, EigenSolution)> {
    prob.normalize(&mut u)?;
    let mut lambda = prob.energy(&u, None);
    let mut history = vec![lambda];
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    let mut stalled = 0usize;
    let mut snaps = 0usize;
    while iterations < opts.max_iters {
        let r = prob.residual_vector(&u, lambda, fixed);
        residual = prob.dual_norm(&r, fixed)?;
        let rel_decrease = match history.len() {
            0 | 1 => 0.0,
            k => (history[k - 2] - history[k - 1]) / lambda.abs().max(f64::MIN_POSITIVE),
        };
        if residual <= opts.residual_tol && rel_decrease <= opts.tol {
            converged = true;
            break;
        }
        let step = if stalled >= STALL_WINDOW {
            None
        } else {
            preconditioned_step(prob, &u, &r, lambda, fixed, opts)?
        };
        iterations += 1;
        let Some(trial) = step else {
            // Line search failed or progress stalled. |u|^{p-1} is not
            // Lipschitz at 0 for p < 2, so dofs decaying towards zero stall
            // the descent; set them to exactly zero and resume.
            stalled = 0;
            if snaps < MAX_SNAPS {
                if let Some((snapped, snap_lambda)) = snap_small(prob, &u, &r, lambda)? {
                    snaps += 1;
                    u = snapped;
                    lambda = snap_lambda;
                    history.push(lambda);
                    continue;
                }
            }
            converged = residual <= opts.residual_tol;
            log::debug!("descent stopped at iteration {iterations}, residual {residual:.3e}");
            break;
        };
        let new_lambda = prob.energy(&trial, None);
        if new_lambda > lambda {
            // Renormalization round-off; treat as a stall.
            stalled = STALL_WINDOW;
            continue;
        }
        let rel = (lambda - new_lambda) / lambda.abs().max(f64::MIN_POSITIVE);
        u = trial;
        lambda = new_lambda;
        history.push(lambda);
        if rel <= opts.tol {
            stalled += 1;
        } else {
            stalled = 0;
        }
    }
    if !converged {
        let r = prob.residual_vector(&u, lambda, fixed);
        residual = prob.dual_norm(&r, fixed)?;
    }
    let trace_fraction = prob.trace_fraction(&u);
    // Report the quotient itself so it matches `rayleigh_quotient` exactly.
    let lambda = prob.quotient(&u)?;
    Ok((
        converged,
        EigenSolution {
            lambda,
            dofs: u,
            exponent_q: prob.q,
            iterations,
            residual,
            history,
            trace_fraction,
        },
    ))
}

// Consecutive tiny decreases before a snap is attempted.
const STALL_WINDOW: usize = 50;

/// One Armijo step along the preconditioned descent direction, renormalized.
fn preconditioned_step(
    prob: &Problem<'_>,
    u: &[f64],
    r: &[f64],
    lambda: f64,
    fixed: &[bool],
    opts: &MinimizeOptions,
) -> Result<Option<Vec<f64>>> {
    // ∇Q at G = 1 is p·r.
    let grad: Vec<f64> = r.iter().map(|v| prob.p * v).collect();
    let metric = prob.metric(Some(u), opts.gradient_floor).with_identity_rows(fixed);
    let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
    let mut d = pcg(&metric, &rhs, 1e-10, 10 * prob.n() + 100)?;
    let mut slope: f64 = grad.iter().zip(&d).map(|(a, b)| a * b).sum();
    if !(slope < 0.0) {
        d = grad.iter().map(|g| -g).collect();
        slope = -grad.iter().map(|g| g * g).sum::<f64>();
    }
    for (v, &f) in d.iter_mut().zip(fixed) {
        if f {
            *v = 0.0;
        }
    }
    let mut alpha = 1.0;
    for _ in 0..opts.step_rule.max_backtracks {
        let mut trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
        if let Ok(qt) = prob.quotient(&trial) {
            if qt <= lambda + opts.step_rule.armijo * alpha * slope {
                prob.normalize(&mut trial)?;
                return Ok(Some(trial));
            }
        }
        alpha *= opts.step_rule.shrink;
    }
    Ok(None)
}

// Relative sizes below which dofs are tried at exactly zero, largest first.
const SNAP_RATIOS: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];
const MAX_SNAPS: usize = 6;

fn snap_small(prob: &Problem<'_>, u: &[f64], r: &[f64], lambda: f64) -> Result<Option<(Vec<f64>, f64)>> {
    let max = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for ratio in SNAP_RATIOS {
        let mut snapped = u.to_vec();
        let mut changed = false;
        for (v, &ri) in snapped.iter_mut().zip(r) {
            // Only dofs the residual pushes towards zero.
            if *v != 0.0 && v.abs() <= ratio * max && ri * *v > 0.0 {
                *v = 0.0;
                changed = true;
            }
        }
        if !changed || prob.normalize(&mut snapped).is_err() {
            continue;
        }
        let snapped_lambda = prob.energy(&snapped, None);
        if snapped_lambda <= lambda {
            return Ok(Some((snapped, snapped_lambda)));
        }
    }
    Ok(None)
}

/// Dual-norm residual of the weak Euler–Lagrange system at `solution`.
pub fn el_residual(
    mesh: &Mesh,
    solution: &EigenSolution,
    params: &Params,
    h: &PotentialField,
    q: f64,
) -> Result<f64> {
    el_residual_constrained(mesh, solution, params, h, q, &vec![false; mesh.num_vertices()])
}

/// As [`el_residual`], testing only against hat functions of free dofs.
pub fn el_residual_constrained(
    mesh: &Mesh,
    solution: &EigenSolution,
    params: &Params,
    h: &PotentialField,
    q: f64,
    fixed_zero: &[bool],
) -> Result<f64> {
    let prob = Problem::new(mesh, params, h, q)?;
    if solution.dofs.len() != prob.n() {
        return Err(Error::InvalidParams("dof vector does not match the mesh".into()));
    }
    let mut u = solution.dofs.clone();
    prob.normalize(&mut u)?;
    let r = prob.residual_vector(&u, solution.lambda, fixed_zero);
    prob.dual_norm(&r, fixed_zero)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criticality {
    Below,
    Above,
}

impl std::fmt::Display for Criticality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Below => "below",
            Self::Above => "above",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalityReport {
    pub lambda: f64,
    pub kp_inverse: f64,
    /// `λ − K_p^{-1}`.
    pub margin: f64,
    pub verdict: Criticality,
}

impl CriticalityReport {
    pub fn from_values(lambda: f64, kp_inverse: f64) -> Self {
        let margin = lambda - kp_inverse;
        Self {
            lambda,
            kp_inverse,
            margin,
            verdict: if margin < 0.0 { Criticality::Below } else { Criticality::Above },
        }
    }
}

/// Compares λ with `K_p^{-1}`; strictly below guarantees an extremal.
pub fn criticality_check(solution: &EigenSolution, params: &Params) -> Result<CriticalityReport> {
    let pstar = params.critical_exponent();
    if (solution.exponent_q - pstar).abs() > 1e-12 * pstar {
        log::warn!(
            "criticality check with q = {} instead of p_* = {pstar}",
            solution.exponent_q
        );
    }
    Ok(CriticalityReport::from_values(solution.lambda, kp_inverse(params)?))
}
