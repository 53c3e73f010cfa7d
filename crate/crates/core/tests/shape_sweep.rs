use steklov_trace::extremal::ProblemParams;
use steklov_trace::fem::{generate_mesh, minimize, MeshShape, PotentialField};
use steklov_trace::shape::{alpha_sweep, optimize_shape, random_baseline, update_hole, ShapeOptions};

#[test]
fn disk_sweep_is_monotone_and_beats_random_holes() {
    let mesh = generate_mesh(MeshShape::Disk, 3).unwrap();
    let params = ProblemParams::new(2, 1.5).unwrap();
    let h = PotentialField::constant(&mesh, 1.0);
    let q = 2.0;
    let opts = ShapeOptions::default();
    let area = mesh.total_area();
    let alphas: Vec<f64> = [0.05, 0.1, 0.2, 0.3].iter().map(|f| f * area).collect();

    let runs = alpha_sweep(&mesh, &alphas, &params, &h, q, &opts).unwrap();
    let lambdas: Vec<f64> = runs.iter().map(|r| r.lambda_alpha).collect();
    assert!(lambdas.windows(2).all(|w| w[0] <= w[1]), "{lambdas:?}");

    let max_area = (0..mesh.triangles.len()).map(|t| mesh.area(t)).fold(0.0, f64::max);
    for (run, &alpha) in runs.iter().zip(&alphas) {
        assert!((run.best_hole.measure - alpha).abs() <= max_area);
        assert!(run.history.windows(2).all(|w| w[1].1 <= w[0].1));
        let baseline = random_baseline(&mesh, alpha, &params, &h, q, 20, 7, &opts).unwrap();
        assert!(!baseline.is_empty());
        let best_random = baseline.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(run.lambda_alpha <= best_random, "alpha {alpha}: {} > {best_random}", run.lambda_alpha);
    }
}

#[test]
fn tiny_alpha_recovers_the_hole_free_eigenvalue() {
    let mesh = generate_mesh(MeshShape::Disk, 3).unwrap();
    let params = ProblemParams::new(2, 1.5).unwrap();
    let h = PotentialField::constant(&mesh, 1.0);
    let opts = ShapeOptions::default();
    let free = minimize(&mesh, &params, &h, 2.0, &opts.solver).unwrap();
    let min_area = (0..mesh.triangles.len()).map(|t| mesh.area(t)).fold(f64::INFINITY, f64::min);
    let run = optimize_shape(&mesh, 0.25 * min_area, &params, &h, 2.0, &opts).unwrap();
    assert!(run.best_hole.is_empty());
    assert!((run.lambda_alpha - free.lambda).abs() <= 1e-10 * free.lambda);
}

#[test]
fn converged_hole_is_a_fixed_point_of_the_update() {
    let mesh = generate_mesh(MeshShape::Disk, 3).unwrap();
    let params = ProblemParams::new(2, 1.5).unwrap();
    let h = PotentialField::constant(&mesh, 1.0);
    let alpha = 0.2 * mesh.total_area();
    let run = optimize_shape(&mesh, alpha, &params, &h, 2.0, &ShapeOptions::default()).unwrap();
    if !run.cycle_detected && run.history.len() == run.evaluated.len() {
        let again = update_hole(&mesh, &run.best_solution, alpha).unwrap();
        assert_eq!(again, run.best_hole);
    }
}
