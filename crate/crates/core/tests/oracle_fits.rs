use steklov_trace::expansion::{coefficients, first_order_coefficient, is_good_point, BoundaryGeometry};
use steklov_trace::fit::fit_expansion;
use steklov_trace::oracle::{epsilon_grid, leading_exponents, sample, CutoffProfile, ModelDomain, OracleSample};
use steklov_trace::quadrature::CubatureOptions;
use steklov_trace::Params;

fn opts() -> CubatureOptions {
    CubatureOptions {
        rel_tol: 1e-10,
        ..CubatureOptions::default()
    }
}

fn sweep(domain: &ModelDomain, params: &Params, h0: f64) -> Vec<OracleSample> {
    epsilon_grid(1e-3, 1e-2, 8)
        .unwrap()
        .into_iter()
        .map(|e| sample(domain, params, h0, e, &opts()).unwrap())
        .collect()
}

#[test]
fn leading_coefficients_flat() {
    for p in [1.3, 1.5] {
        let params = Params::new(3, p).unwrap();
        let domain = ModelDomain::flat(3, 1.0).unwrap();
        let h0 = 1.0;
        let s = sweep(&domain, &params, h0);
        let c = coefficients(&params, &BoundaryGeometry::new(vec![0.0, 0.0], h0, true)).unwrap();
        let ex = leading_exponents(&params);
        let g: Vec<_> = s.iter().map(|x| (x.epsilon, x.gradient.value)).collect();
        let m: Vec<_> = s.iter().map(|x| (x.epsilon, x.mass.value)).collect();
        let b: Vec<_> = s.iter().map(|x| (x.epsilon, x.boundary.value)).collect();
        let fg = fit_expansion(&g, &ex.gradient, None).unwrap();
        let fm = fit_expansion(&m, ex.mass.as_ref().unwrap(), None).unwrap();
        let fb = fit_expansion(&b, &ex.boundary, None).unwrap();
        println!("p={p} A1 {} vs {}, D {} vs {:?}, B1 {} vs {}", fg.coefficients[0], c.a1, fm.coefficients[0], c.d, fb.coefficients[0], c.b1);
        assert!((fg.coefficients[0] / c.a1 - 1.0).abs() < 0.01);
        assert!((fm.coefficients[0] / c.d.unwrap() - 1.0).abs() < 0.01);
        assert!((fb.coefficients[0] / c.b1 - 1.0).abs() < 0.01);
    }
}

#[test]
fn first_order_curved() {
    for kappa in [0.5, 1.0] {
        let params = Params::new(3, 1.5).unwrap();
        let domain = ModelDomain::new(1.0, vec![kappa, kappa]).unwrap();
        let s = sweep(&domain, &params, 0.0);
        let q: Vec<_> = s.iter().map(|x| (x.epsilon, x.quotient)).collect();
        let f = fit_expansion(&q, &[0.0, 1.0, 2.0], None).unwrap();
        let geom = BoundaryGeometry::new(vec![kappa, kappa], 0.0, true);
        let c1 = first_order_coefficient(&params, &geom).unwrap();
        println!("kappa={kappa} fit {:?} predicted {c1} residual {}", f.coefficients, f.residual);
        assert!((f.coefficients[1] / c1 - 1.0).abs() < 0.05);
    }
}

#[test]
fn good_points_sign() {
    let cases: Vec<(usize, f64, Vec<f64>, f64)> = vec![
        (3, 1.5, vec![1.0, 1.0], 0.0),
        (3, 1.5, vec![0.0, 0.0], -1.0),
        (3, 1.3, vec![0.0, 0.0], -0.5),
        (3, 1.5, vec![0.6, 0.2], 1.0),
    ];
    for (n, p, l, h0) in cases {
        let params = Params::new(n, p).unwrap();
        let geom = BoundaryGeometry::new(l.clone(), h0, true);
        assert!(is_good_point(&params, &geom).unwrap().is_good);
        let domain = ModelDomain::new(1.0, l.clone()).unwrap();
        let s = sweep(&domain, &params, h0);
        let q: Vec<_> = s.iter().map(|x| (x.epsilon, x.quotient)).collect();
        println!("{l:?} h0={h0}: {:?}", q.iter().map(|x| x.1 - 1.0).collect::<Vec<_>>());
    }
    let params = Params::new(3, 1.5).unwrap();
    let domain = ModelDomain::new(1.0, vec![-2.0, -2.0]).unwrap();
    let s = sweep(&domain, &params, 1.0);
    let q: Vec<_> = s.iter().map(|x| (x.epsilon, x.quotient)).collect();
    let f = fit_expansion(&q, &[0.0, 1.0, 2.0], None).unwrap();
    println!("bad {:?} res {}", f.coefficients, f.residual);
    let _ = CutoffProfile::for_radius(1.0);
}

#[test]
fn second_order_curved() {
    use steklov_trace::expansion::second_order_e_from_coefficients;
    for (p, l) in [(1.3, vec![1.0, 1.0]), (1.3, vec![0.6, 0.2]), (1.2, vec![1.0, -0.5])] {
        let params = Params::new(3, p).unwrap();
        let geom = BoundaryGeometry::new(l.clone(), 0.0, true);
        let c = coefficients(&params, &geom).unwrap();
        let e = second_order_e_from_coefficients(&params, &c).unwrap();
        let domain = ModelDomain::new(1.0, l.clone()).unwrap();
        let s = sweep(&domain, &params, 0.0);
        let q: Vec<_> = s.iter().map(|x| (x.epsilon, x.quotient)).collect();
        let f = fit_expansion(&q, &[0.0, 1.0, 2.0], None).unwrap();
        let stated = steklov_trace::expansion::second_order_e(&params, &geom).unwrap();
        println!("p={p} {l:?}: fit {:?} E {e} stated {stated} residual {}", f.coefficients, f.residual);
        assert!((f.coefficients[2] / e - 1.0).abs() < 0.05);
    }
}
