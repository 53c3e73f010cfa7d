//! Optimal holes: minimize λ_A over element sets `A` of prescribed measure
//! by alternating an eigen-solve with a sublevel-set update of `|u|`.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, VecDeque};
use std::hash::{Hash, Hasher};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::extremal::ProblemParams;
use crate::fem::{minimize_constrained, rayleigh_quotient, EigenSolution, Mesh, MinimizeOptions, PotentialField};

type Params = ProblemParams<f64>;

/// Number of recent holes remembered for cycle detection.
pub const CYCLE_WINDOW: usize = 10;

/// A union of mesh triangles on which competitors must vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleSet {
    pub element_indices: BTreeSet<usize>,
    pub measure: f64,
}

impl HoleSet {
    pub fn empty() -> Self {
        Self {
            element_indices: BTreeSet::new(),
            measure: 0.0,
        }
    }

    pub fn from_elements(mesh: &Mesh, elements: impl IntoIterator<Item = usize>) -> Result<Self> {
        let element_indices: BTreeSet<usize> = elements.into_iter().collect();
        if let Some(&bad) = element_indices.iter().find(|&&t| t >= mesh.triangles.len()) {
            return Err(Error::InvalidParams(format!("element {bad} is not in the mesh")));
        }
        let measure = element_indices.iter().fold(0.0, |m, &t| m + mesh.area(t));
        Ok(Self {
            element_indices,
            measure,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.element_indices.is_empty()
    }

    /// Vertices of hole elements, where the dofs are fixed at zero.
    pub fn vertex_mask(&self, mesh: &Mesh) -> Vec<bool> {
        let mut m = vec![false; mesh.num_vertices()];
        for &t in &self.element_indices {
            for &v in &mesh.triangles[t] {
                m[v] = true;
            }
        }
        m
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.element_indices.hash(&mut h);
        h.finish()
    }
}

/// Minimizes the quotient among P1 functions vanishing on `hole`.
pub fn solve_with_hole(
    mesh: &Mesh,
    hole: &HoleSet,
    params: &Params,
    h: &PotentialField,
    q: f64,
    options: &MinimizeOptions,
) -> Result<EigenSolution> {
    minimize_constrained(mesh, params, h, q, options, &hole.vertex_mask(mesh))
}

// Non-converged solves keep their best iterate; dead cores (regions where u
// vanishes) can stall the descent short of the residual tolerance.
fn solve_lenient(
    mesh: &Mesh,
    hole: &HoleSet,
    params: &Params,
    h: &PotentialField,
    q: f64,
    options: &MinimizeOptions,
    unconverged: &mut usize,
) -> Result<EigenSolution> {
    match solve_with_hole(mesh, hole, params, h, q, options) {
        Err(Error::Iteration { residual, best, .. }) => {
            log::warn!("hole solve stopped at residual {residual:.3e}; using best iterate");
            *unconverged += 1;
            Ok(*best)
        }
        other => other,
    }
}

/// Elements touching any protected vertex; these never join a hole.
pub fn protected_elements(mesh: &Mesh, protected_vertices: &[usize]) -> Vec<bool> {
    let mut vmask = vec![false; mesh.num_vertices()];
    for &v in protected_vertices {
        if v < vmask.len() {
            vmask[v] = true;
        }
    }
    mesh.triangles.iter().map(|t| t.iter().any(|&v| vmask[v])).collect()
}

// Adds elements in order while doing so brings the measure closer to alpha.
fn fill(mesh: &Mesh, order: impl IntoIterator<Item = usize>, alpha: f64) -> Result<HoleSet> {
    let mut chosen = Vec::new();
    let mut measure = 0.0;
    for t in order {
        let a = mesh.area(t);
        if measure + 0.5 * a >= alpha {
            break;
        }
        measure += a;
        chosen.push(t);
    }
    HoleSet::from_elements(mesh, chosen)
}

fn check_alpha(mesh: &Mesh, alpha: f64) -> Result<()> {
    let total = mesh.total_area();
    if !(alpha >= 0.0 && alpha < total) {
        return Err(Error::InvalidParams(format!(
            "hole measure must lie in [0, {total}), got {alpha}"
        )));
    }
    Ok(())
}

/// Sublevel-set update: elements sorted by mean `|u|` (ties by index) are
/// added while each addition moves the measure closer to `alpha`.
pub fn update_hole(mesh: &Mesh, solution: &EigenSolution, alpha: f64) -> Result<HoleSet> {
    update_hole_excluding(mesh, solution, alpha, &vec![false; mesh.triangles.len()])
}

pub fn update_hole_excluding(
    mesh: &Mesh,
    solution: &EigenSolution,
    alpha: f64,
    excluded: &[bool],
) -> Result<HoleSet> {
    check_alpha(mesh, alpha)?;
    if solution.dofs.len() != mesh.num_vertices() {
        return Err(Error::InvalidParams("solution does not match the mesh".into()));
    }
    let mut order: Vec<(f64, usize)> = mesh
        .triangles
        .iter()
        .enumerate()
        .filter(|(t, _)| !excluded[*t])
        .map(|(t, tri)| (tri.iter().map(|&v| solution.dofs[v].abs()).sum::<f64>() / 3.0, t))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    fill(mesh, order.into_iter().map(|(_, t)| t), alpha)
}

/// Hole of measure ≈ `alpha` made of randomly ordered admissible elements.
pub fn random_hole(mesh: &Mesh, alpha: f64, rng: &mut ChaCha8Rng, excluded: &[bool]) -> Result<HoleSet> {
    check_alpha(mesh, alpha)?;
    let mut order: Vec<usize> = (0..mesh.triangles.len()).filter(|&t| !excluded[t]).collect();
    order.shuffle(rng);
    fill(mesh, order, alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeOptions {
    pub solver: MinimizeOptions,
    pub max_outer: usize,
    /// Vertices whose adjacent elements stay outside the hole.
    pub protected_vertices: Vec<usize>,
    /// Starting hole; the greedy update of the hole-free solution otherwise.
    pub initial_hole: Option<HoleSet>,
    /// Rounds of single-element swap descent after the rearrangement loop.
    pub swap_rounds: usize,
    /// Screened swaps re-solved exactly per round.
    pub swap_candidates: usize,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        Self {
            solver: MinimizeOptions::default(),
            max_outer: 50,
            protected_vertices: Vec::new(),
            initial_hole: None,
            swap_rounds: 40,
            swap_candidates: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRunRecord {
    pub alpha: f64,
    /// Accepted `(hole, λ)` pairs; λ is non-increasing.
    pub history: Vec<(HoleSet, f64)>,
    /// λ of every evaluated hole, accepted or not.
    pub evaluated: Vec<f64>,
    pub lambda_alpha: f64,
    pub best_hole: HoleSet,
    pub best_solution: EigenSolution,
    pub cycle_detected: bool,
    pub outer_iterations: usize,
    /// Eigen-solves that stopped above the residual tolerance.
    pub unconverged_solves: usize,
}

/// Alternates `solve_with_hole` and `update_hole`, keeping only improving holes.
pub fn optimize_shape(
    mesh: &Mesh,
    alpha: f64,
    params: &Params,
    h: &PotentialField,
    q: f64,
    options: &ShapeOptions,
) -> Result<ShapeRunRecord> {
    check_alpha(mesh, alpha)?;
    let excluded = protected_elements(mesh, &options.protected_vertices);
    let mut unconverged_solves = 0;
    let mut hole = match &options.initial_hole {
        Some(hole) => hole.clone(),
        None => {
            let free = solve_lenient(mesh, &HoleSet::empty(), params, h, q, &options.solver, &mut unconverged_solves)?;
            update_hole_excluding(mesh, &free, alpha, &excluded)?
        }
    };
    if hole.element_indices.iter().any(|&t| excluded[t]) {
        return Err(Error::Infeasible("initial hole touches protected vertices".into()));
    }

    let mut history: Vec<(HoleSet, f64)> = Vec::new();
    let mut evaluated = Vec::new();
    let mut best: Option<(HoleSet, EigenSolution)> = None;
    let mut window: VecDeque<u64> = VecDeque::with_capacity(CYCLE_WINDOW);
    let mut cycle_detected = false;
    let mut outer_iterations = 0;

    while outer_iterations < options.max_outer.max(1) {
        outer_iterations += 1;
        let sol = match solve_lenient(mesh, &hole, params, h, q, &options.solver, &mut unconverged_solves) {
            Ok(s) => s,
            Err(Error::Infeasible(msg)) if best.is_some() => {
                log::info!("stopping at infeasible hole: {msg}");
                break;
            }
            Err(e) => return Err(e),
        };
        evaluated.push(sol.lambda);
        let improves = best.as_ref().map_or(true, |(_, b)| sol.lambda < b.lambda);
        if !improves {
            break;
        }
        history.push((hole.clone(), sol.lambda));
        window.push_back(hole.fingerprint());
        if window.len() > CYCLE_WINDOW {
            window.pop_front();
        }
        let next = update_hole_excluding(mesh, &sol, alpha, &excluded)?;
        best = Some((hole.clone(), sol));
        if next == hole {
            break;
        }
        if window.contains(&next.fingerprint()) {
            cycle_detected = true;
            break;
        }
        hole = next;
    }

    let (mut best_hole, mut best_solution) = best.expect("first hole is always accepted");
    let ctx = SwapContext {
        mesh,
        params,
        h,
        q,
        alpha,
        excluded: &excluded,
        options,
    };
    for _ in 0..options.swap_rounds {
        let Some((hole, sol)) = ctx.improve(&best_hole, &best_solution, &mut evaluated, &mut unconverged_solves)? else {
            break;
        };
        history.push((hole.clone(), sol.lambda));
        best_hole = hole;
        best_solution = sol;
    }
    Ok(ShapeRunRecord {
        alpha,
        lambda_alpha: best_solution.lambda,
        history,
        evaluated,
        best_hole,
        best_solution,
        cycle_detected,
        outer_iterations,
        unconverged_solves,
    })
}

struct SwapContext<'a> {
    mesh: &'a Mesh,
    params: &'a Params,
    h: &'a PotentialField,
    q: f64,
    alpha: f64,
    excluded: &'a [bool],
    options: &'a ShapeOptions,
}

impl SwapContext<'_> {
    // Cheap feasible test function for `hole`: the current solution with the
    // new hole vertices zeroed and freed vertices set to their neighbour mean.
    fn screen(&self, u: &[f64], hole: &HoleSet, neighbours: &[Vec<usize>]) -> f64 {
        let mask = hole.vertex_mask(self.mesh);
        let mut v: Vec<f64> = u.iter().zip(&mask).map(|(&x, &m)| if m { 0.0 } else { x }).collect();
        for (i, nb) in neighbours.iter().enumerate() {
            if !mask[i] && u[i] == 0.0 && !nb.is_empty() {
                v[i] = nb.iter().map(|&j| v[j].abs()).sum::<f64>() / nb.len() as f64;
            }
        }
        rayleigh_quotient(self.mesh, &v, self.params, self.h, self.q).unwrap_or(f64::INFINITY)
    }

    /// One round: screen every single-element swap, solve the most promising
    /// ones exactly, and return the best strict improvement.
    fn improve(
        &self,
        hole: &HoleSet,
        sol: &EigenSolution,
        evaluated: &mut Vec<f64>,
        unconverged: &mut usize,
    ) -> Result<Option<(HoleSet, EigenSolution)>> {
        if hole.is_empty() || self.options.swap_candidates == 0 {
            return Ok(None);
        }
        let mesh = self.mesh;
        let neighbours = vertex_neighbours(mesh);
        let max_area = (0..mesh.triangles.len()).map(|t| mesh.area(t)).fold(0.0, f64::max);
        let slack = (hole.measure - self.alpha).abs().max(0.5 * max_area);
        let mut screened: Vec<(f64, usize, usize)> = Vec::new();
        for &out in &hole.element_indices {
            for inn in 0..mesh.triangles.len() {
                if self.excluded[inn] || hole.element_indices.contains(&inn) {
                    continue;
                }
                let measure = hole.measure - mesh.area(out) + mesh.area(inn);
                if (measure - self.alpha).abs() > slack {
                    continue;
                }
                let cand = swapped(mesh, hole, out, inn)?;
                let score = self.screen(&sol.dofs, &cand, &neighbours);
                if score.is_finite() {
                    screened.push((score, out, inn));
                }
            }
        }
        screened.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut found: Option<(HoleSet, EigenSolution)> = None;
        for &(_, out, inn) in screened.iter().take(self.options.swap_candidates) {
            let cand = swapped(mesh, hole, out, inn)?;
            let s = match solve_lenient(mesh, &cand, self.params, self.h, self.q, &self.options.solver, unconverged) {
                Ok(s) => s,
                Err(Error::Infeasible(_)) => continue,
                Err(e) => return Err(e),
            };
            evaluated.push(s.lambda);
            let target = found.as_ref().map_or(sol.lambda, |(_, f)| f.lambda);
            if s.lambda < target * (1.0 - 1e-12) {
                found = Some((cand, s));
            }
        }
        Ok(found)
    }
}

fn swapped(mesh: &Mesh, hole: &HoleSet, out: usize, inn: usize) -> Result<HoleSet> {
    HoleSet::from_elements(
        mesh,
        hole.element_indices.iter().copied().filter(|&t| t != out).chain(std::iter::once(inn)),
    )
}

fn vertex_neighbours(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut nb: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); mesh.num_vertices()];
    for tri in &mesh.triangles {
        for &a in tri {
            for &b in tri {
                if a != b {
                    nb[a].insert(b);
                }
            }
        }
    }
    nb.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// λ(α) for every α, run from the largest α down.
///
/// Each smaller α also tries the best sub-hole of the next larger optimum,
/// which keeps the computed λ(α) non-decreasing in α.
pub fn alpha_sweep(
    mesh: &Mesh,
    alphas: &[f64],
    params: &Params,
    h: &PotentialField,
    q: f64,
    options: &ShapeOptions,
) -> Result<Vec<ShapeRunRecord>> {
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| alphas[b].total_cmp(&alphas[a]).then(a.cmp(&b)));
    let excluded = protected_elements(mesh, &options.protected_vertices);
    let mut out: Vec<Option<ShapeRunRecord>> = vec![None; alphas.len()];
    let mut larger: Option<ShapeRunRecord> = None;
    for i in order {
        let alpha = alphas[i];
        let mut run = optimize_shape(mesh, alpha, params, h, q, options)?;
        if let Some(prev) = &larger {
            let inside: Vec<bool> = (0..mesh.triangles.len())
                .map(|t| excluded[t] || !prev.best_hole.element_indices.contains(&t))
                .collect();
            let seed = update_hole_excluding(mesh, &prev.best_solution, alpha, &inside)?;
            let opts = ShapeOptions {
                initial_hole: Some(seed),
                ..options.clone()
            };
            let nested = optimize_shape(mesh, alpha, params, h, q, &opts)?;
            if nested.lambda_alpha < run.lambda_alpha {
                run = nested;
            }
        }
        larger = Some(run.clone());
        out[i] = Some(run);
    }
    Ok(out.into_iter().map(|r| r.expect("every alpha visited")).collect())
}

/// λ_A for `count` random holes of measure ≈ `alpha`; infeasible holes are skipped.
pub fn random_baseline(
    mesh: &Mesh,
    alpha: f64,
    params: &Params,
    h: &PotentialField,
    q: f64,
    count: usize,
    seed: u64,
    options: &ShapeOptions,
) -> Result<Vec<f64>> {
    let excluded = protected_elements(mesh, &options.protected_vertices);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let hole = random_hole(mesh, alpha, &mut rng, &excluded)?;
        match solve_with_hole(mesh, &hole, params, h, q, &options.solver) {
            Ok(s) => out.push(s.lambda),
            Err(Error::Infeasible(_)) => continue,
            Err(Error::Iteration { best, .. }) => out.push(best.lambda),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
