use steklov_trace::extremal::ProblemParams;
use steklov_trace::fem::{
    constant_quotient, generate_mesh, minimize, rayleigh_quotient, Mesh, MeshShape, MinimizeOptions, PotentialField,
};
use steklov_trace::shape::{solve_with_hole, HoleSet};
use steklov_trace::Params;

// Exhaustive grid over [-1, 1]^k for the free dofs, then compass-search polish.
fn brute_force(eval: &dyn Fn(&[f64]) -> f64, k: usize, pts: usize) -> f64 {
    let step = 2.0 / (pts - 1) as f64;
    let mut idx = vec![0usize; k];
    let mut best = (f64::INFINITY, vec![0.0; k]);
    let mut x = vec![0.0; k];
    'grid: loop {
        for (xi, &i) in x.iter_mut().zip(&idx) {
            *xi = -1.0 + step * i as f64;
        }
        let v = eval(&x);
        if v < best.0 {
            best = (v, x.clone());
        }
        for d in 0..k {
            idx[d] += 1;
            if idx[d] < pts {
                continue 'grid;
            }
            idx[d] = 0;
        }
        break;
    }
    let (mut fbest, mut xb) = best;
    let mut h = step;
    while h > 1e-12 {
        let mut moved = false;
        for d in 0..k {
            for s in [-1.0, 1.0] {
                let mut t = xb.clone();
                t[d] += s * h;
                let v = eval(&t);
                if v < fbest {
                    fbest = v;
                    xb = t;
                    moved = true;
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    fbest
}

fn quotient_or_inf(mesh: &Mesh, u: &[f64], params: &Params, h: &PotentialField, q: f64) -> f64 {
    rayleigh_quotient(mesh, u, params, h, q).unwrap_or(f64::INFINITY)
}

#[test]
fn four_dof_square_matches_grid_search() {
    let mesh = generate_mesh(MeshShape::Square, 1).unwrap();
    assert_eq!(mesh.num_vertices(), 4);
    let params = ProblemParams::new(2, 1.5).unwrap();
    let h = PotentialField::constant(&mesh, 1.0);
    for q in [2.0, 3.0] {
        let sol = minimize(&mesh, &params, &h, q, &MinimizeOptions::default()).unwrap();
        let reference = brute_force(&|u| quotient_or_inf(&mesh, u, &params, &h, q), 4, 41);
        let rel = (sol.lambda - reference).abs() / reference;
        assert!(rel < 1e-4, "q={q}: {} vs {reference}", sol.lambda);
        assert!(sol.history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn hole_on_coarse_square_matches_grid_search() {
    let mesh = generate_mesh(MeshShape::Square, 2).unwrap();
    let params = ProblemParams::new(2, 1.5).unwrap();
    let h = PotentialField::constant(&mesh, 1.0);
    // Two triangles meeting at the centre along the anti-diagonal band.
    let hole = HoleSet::from_elements(&mesh, [1, 6]).unwrap();
    assert!((hole.measure - 0.25).abs() < 1e-15);
    let fixed = hole.vertex_mask(&mesh);
    let free: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| !fixed[v]).collect();
    assert!(free.len() <= 5);

    let q = 2.0;
    // The hole splits the free boundary into two mirror images; u ≡ 1 is a
    // symmetric saddle, so random starts are needed to find the minimum.
    let opts = MinimizeOptions {
        restarts: 4,
        ..MinimizeOptions::default()
    };
    let sol = solve_with_hole(&mesh, &hole, &params, &h, q, &opts).unwrap();
    let eval = |x: &[f64]| {
        let mut u = vec![0.0; mesh.num_vertices()];
        for (&v, &xv) in free.iter().zip(x) {
            u[v] = xv;
        }
        quotient_or_inf(&mesh, &u, &params, &h, q)
    };
    let reference = brute_force(&eval, free.len(), 21);
    assert!((sol.lambda - reference).abs() / reference < 1e-4, "{} vs {reference}", sol.lambda);
}

#[test]
fn constant_bound_and_monotone_history_on_all_shapes() {
    let params = ProblemParams::new(2, 1.5).unwrap();
    for shape in [MeshShape::Square, MeshShape::Disk, MeshShape::Annulus] {
        for res in 1..=3 {
            let mesh = generate_mesh(shape, res).unwrap();
            let h = PotentialField::constant(&mesh, 1.0);
            for q in [2.0, 3.0] {
                let sol = minimize(&mesh, &params, &h, q, &MinimizeOptions::default()).unwrap();
                assert!(sol.lambda <= constant_quotient(&mesh, &params, &h, q).unwrap());
                assert!(sol.history.windows(2).all(|w| w[1] <= w[0]), "{shape} res {res}");
            }
        }
    }
}

#[test]
fn refinement_lowers_lambda_on_nested_squares() {
    let params = ProblemParams::new(2, 1.5).unwrap();
    let mut prev = f64::INFINITY;
    for res in 1..=5 {
        let mesh = generate_mesh(MeshShape::Square, res).unwrap();
        let h = PotentialField::constant(&mesh, 1.0);
        let lambda = minimize(&mesh, &params, &h, 2.0, &MinimizeOptions::default()).unwrap().lambda;
        // Nested spaces; the lumped mass rule only shrinks under refinement.
        assert!(lambda <= prev + 1e-6, "res {res}: {lambda} > {prev}");
        prev = lambda;
    }
}

#[test]
fn lambda_is_continuous_up_to_the_critical_exponent() {
    let mesh = generate_mesh(MeshShape::Disk, 3).unwrap();
    let params = ProblemParams::new(2, 1.5).unwrap();
    let h = PotentialField::constant(&mesh, 1.0);
    let p_star = params.critical_exponent();
    let opts = MinimizeOptions::default();
    let at_star = minimize(&mesh, &params, &h, p_star, &opts).unwrap().lambda;
    let mut last_gap = f64::INFINITY;
    for delta in [1e-1, 1e-2, 1e-3] {
        let lam = minimize(&mesh, &params, &h, p_star - delta, &opts).unwrap().lambda;
        let gap = (lam - at_star).abs();
        assert!(gap < last_gap);
        last_gap = gap;
    }
    assert!(last_gap / at_star < 1e-2);
}
