use steklov_trace::fem::{
    constant_quotient, criticality_check, generate_mesh, minimize, EigenSolution, Mesh, MinimizeOptions,
    PotentialField,
};
use steklov_trace::shape::{alpha_sweep, optimize_shape, random_baseline, ShapeOptions};
use steklov_trace::Error;

use super::{Audit, CommandError};
use crate::config::RunConfig;
use crate::format::{g, CsvDoc};

// Relative slack on comparisons between independently computed quotients.
const SLACK: f64 = 1e-12;
const LIMIT_TOL: f64 = 1e-10;

fn load_mesh(cfg: &RunConfig) -> Result<Mesh, CommandError> {
    let mesh = match &cfg.mesh_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CommandError::Input(format!("cannot read mesh {}: {e}", path.display())))?;
            Mesh::from_text(&text)?
        }
        None => generate_mesh(cfg.mesh, cfg.resolution)?,
    };
    mesh.audit()?;
    Ok(mesh)
}

fn solver_options(cfg: &RunConfig) -> MinimizeOptions {
    MinimizeOptions {
        max_iters: cfg.max_iters,
        residual_tol: cfg.residual_tol,
        seed: cfg.seed,
        restarts: cfg.restarts,
        ..MinimizeOptions::default()
    }
}

fn is_monotone(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0])
}

/// Solution plus whether it met the residual tolerance.
fn solve_free(
    mesh: &Mesh,
    cfg: &RunConfig,
    h: &PotentialField,
    q: f64,
) -> Result<(EigenSolution, bool), CommandError> {
    match minimize(mesh, &cfg.params()?, h, q, &solver_options(cfg)) {
        Ok(s) => Ok((s, true)),
        Err(Error::Iteration { best, .. }) => Ok((*best, false)),
        Err(e) => Err(e.into()),
    }
}

pub(super) fn steklov(cfg: &RunConfig, doc: &mut CsvDoc, audits: &mut Vec<Audit>) -> Result<(), CommandError> {
    let params = cfg.params()?;
    let mesh = load_mesh(cfg)?;
    let q = cfg.q.resolve(&params);
    let h = PotentialField::constant(&mesh, cfg.h);
    let bound = constant_quotient(&mesh, &params, &h, q)?;
    let (sol, converged) = solve_free(&mesh, cfg, &h, q)?;

    doc.comment(format!("vertices = {}, triangles = {}", mesh.num_vertices(), mesh.triangles.len()));
    doc.comment(format!("q = {}", g(q)));
    doc.comment(format!("lambda = {}", g(sol.lambda)));
    doc.comment(format!("residual = {}", g(sol.residual)));
    doc.comment(format!("iterations = {}", sol.iterations));
    doc.comment(format!("constant_bound = {}", g(bound)));
    doc.comment(format!("trace_fraction = {}", g(sol.trace_fraction)));
    if (q - params.critical_exponent()).abs() <= 1e-12 * q {
        let report = criticality_check(&sol, &params)?;
        doc.comment(format!(
            "criticality = {} (Kp_inverse = {}, margin = {})",
            report.verdict,
            g(report.kp_inverse),
            g(report.margin)
        ));
    }
    doc.row(["vertex_index", "x", "y", "u"]);
    for (i, (v, u)) in mesh.vertices.iter().zip(&sol.dofs).enumerate() {
        doc.row([i.to_string(), g(v[0]), g(v[1]), g(*u)]);
    }

    audits.push(Audit::new(
        "converged",
        converged,
        format!("residual {} vs tolerance {}", g(sol.residual), g(cfg.residual_tol)),
    ));
    audits.push(Audit::new(
        "constant_bound",
        sol.lambda <= bound * (1.0 + SLACK),
        format!("lambda {} <= {}", g(sol.lambda), g(bound)),
    ));
    audits.push(Audit::new(
        "monotone_history",
        is_monotone(&sol.history),
        format!("{} accepted steps", sol.history.len().saturating_sub(1)),
    ));
    Ok(())
}

pub(super) fn shapeopt(cfg: &RunConfig, doc: &mut CsvDoc, audits: &mut Vec<Audit>) -> Result<(), CommandError> {
    let params = cfg.params()?;
    let mesh = load_mesh(cfg)?;
    let q = cfg.q.resolve(&params);
    let h = PotentialField::constant(&mesh, cfg.h);
    let area = mesh.total_area();
    let opts = ShapeOptions {
        solver: solver_options(cfg),
        max_outer: cfg.max_outer,
        ..ShapeOptions::default()
    };
    let alphas: Vec<f64> = cfg.alphas.iter().map(|f| f * area).collect();
    let runs = alpha_sweep(&mesh, &alphas, &params, &h, q, &opts)?;

    doc.comment(format!("mesh_area = {}, q = {}", g(area), g(q)));
    doc.row([
        "alpha",
        "alpha_fraction",
        "lambda_alpha",
        "hole_measure",
        "hole_elements",
        "outer_iterations",
        "cycle_detected",
        "unconverged_solves",
        "best_random",
    ]);
    let mut dominated = true;
    let mut dominance = Vec::new();
    for (run, &frac) in runs.iter().zip(&cfg.alphas) {
        let best_random = if run.alpha > 0.0 && cfg.random_holes > 0 {
            let seed = cfg.seed.wrapping_add((frac * 1e6).round() as u64);
            let baseline = random_baseline(&mesh, run.alpha, &params, &h, q, cfg.random_holes, seed, &opts)?;
            let best = baseline.iter().copied().fold(f64::INFINITY, f64::min);
            if !baseline.is_empty() {
                dominated &= run.lambda_alpha <= best * (1.0 + SLACK);
                dominance.push(format!("{}: {} <= {}", g(frac), g(run.lambda_alpha), g(best)));
            }
            Some(best).filter(|b| b.is_finite())
        } else {
            None
        };
        doc.row([
            g(run.alpha),
            g(frac),
            g(run.lambda_alpha),
            g(run.best_hole.measure),
            run.best_hole.element_indices.len().to_string(),
            run.outer_iterations.to_string(),
            run.cycle_detected.to_string(),
            run.unconverged_solves.to_string(),
            best_random.map(g).unwrap_or_else(|| "none".into()),
        ]);
    }

    doc.comment("hole elements per alpha");
    doc.row(["alpha", "element_index"]);
    for run in &runs {
        for t in &run.best_hole.element_indices {
            doc.row([g(run.alpha), t.to_string()]);
        }
    }

    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[a].alpha.total_cmp(&runs[b].alpha));
    let sorted: Vec<f64> = order.iter().map(|&i| runs[i].lambda_alpha).collect();
    audits.push(Audit::new(
        "monotone_in_alpha",
        sorted.windows(2).all(|w| w[0] <= w[1]),
        format!("lambda by increasing alpha: {}", sorted.iter().map(|x| g(*x)).collect::<Vec<_>>().join(" ")),
    ));
    if !dominance.is_empty() {
        audits.push(Audit::new(
            "dominates_random_holes",
            dominated,
            format!("{} random holes per alpha; {}", cfg.random_holes, dominance.join("; ")),
        ));
    }

    let (free, _) = solve_free(&mesh, cfg, &h, q)?;
    let min_area = (0..mesh.triangles.len()).map(|t| mesh.area(t)).fold(f64::INFINITY, f64::min);
    let tiny = optimize_shape(&mesh, 0.25 * min_area, &params, &h, q, &opts)?;
    let gap = (tiny.lambda_alpha - free.lambda).abs() / free.lambda;
    let zero_rows = runs.iter().filter(|r| r.alpha == 0.0);
    let zero_gap = zero_rows.map(|r| (r.lambda_alpha - free.lambda).abs() / free.lambda).fold(0.0, f64::max);
    audits.push(Audit::new(
        "alpha_zero_limit",
        tiny.best_hole.is_empty() && gap.max(zero_gap) <= LIMIT_TOL,
        format!(
            "hole-free lambda {}, tiny-alpha lambda {}, relative gap {} <= {}",
            g(free.lambda),
            g(tiny.lambda_alpha),
            g(gap.max(zero_gap)),
            g(LIMIT_TOL)
        ),
    ));
    Ok(())
}
