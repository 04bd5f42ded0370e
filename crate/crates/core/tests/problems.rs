use dfo_sparse::basis::SmoothFunction;
use dfo_sparse::problems::*;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Objective values at the standard starts, from an independent numpy
/// transcription of the formulas.
const START_VALUES: [(&str, usize, f64); 14] = [
    ("ARWHEAD", 15, 42.0),
    ("BDQRTIC", 10, 1356.0),
    ("CHNROSNB", 15, 2121.2799999999997),
    ("CRAGGLVY", 10, 3303.566516699874),
    ("DQDRTIC", 10, 14472.0),
    ("EXTROSNB", 20, 7604.0),
    ("GENHUMPS", 5, 102488.5933782947),
    ("HILBERTA", 10, 42.359937474792254),
    ("LIARWHD", 20, 11700.0),
    ("MOREBV", 10, 0.000788519101264823),
    ("POWELLSG", 20, 1075.0),
    ("SCHMVETT", 20, -34.72673036998134),
    ("SROSENBR", 20, 241.99999999999991),
    ("WOODS", 20, 95960.0),
];

fn named() -> Vec<Problem> {
    list()
        .into_iter()
        .filter(|n| !n.starts_with("SYNTH"))
        .map(|n| get_problem(n, None).unwrap())
        .collect()
}

fn near(p: &Problem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // SCHMVETT divides by x_{i+1}; stay near the start there.
    let r = if p.name == "GENHUMPS" { 0.05 } else { 0.5 };
    p.start
        .iter()
        .map(|v| v + rng.random_range(-r..r))
        .collect()
}

#[test]
fn registry_covers_the_required_problems() {
    let names = list();
    for want in [
        "DQDRTIC",
        "ARWHEAD",
        "SROSENBR",
        "POWELLSG",
        "WOODS",
        "LIARWHD",
        "MOREBV",
        "BDQRTIC",
        "CHNROSNB",
        "EXTROSNB",
        "SCHMVETT",
        "CRAGGLVY",
        "GENHUMPS",
        "HILBERTA",
        "SYNTH_SPARSE_QUAD",
    ] {
        assert!(names.contains(&want), "{want} missing");
    }
}

#[test]
fn start_values_match_fixtures() {
    for (name, n, want) in START_VALUES {
        let p = get_problem(name, None).unwrap();
        assert_eq!(p.n, n);
        let got = p.value(&p.start);
        assert!(
            (got - want).abs() <= 1e-10 * want.abs().max(1.0),
            "{name}: {got} vs {want}"
        );
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for p in named() {
        for _ in 0..10 {
            let x = near(&p, &mut rng);
            let (f, g, h) = p.reference_derivatives(&x);
            assert!((f - p.value(&x)).abs() <= 1e-12 * f.abs().max(1.0));
            let step = 1e-6;
            for i in 0..p.n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                let hi = step;
                xp[i] += hi;
                xm[i] -= hi;
                let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * hi);
                let scale = g.amax().max(1.0);
                assert!(
                    (fd - g[i]).abs() <= 1e-5 * scale,
                    "{} grad {i}: {fd} vs {}",
                    p.name,
                    g[i]
                );
                let gd = (p.reference_gradient(&xp) - p.reference_gradient(&xm)) / (2.0 * hi);
                let hscale = h.amax().max(1.0);
                for j in 0..p.n {
                    assert!(
                        (gd[j] - h[(i, j)]).abs() <= 1e-5 * hscale,
                        "{} hess {i},{j}",
                        p.name
                    );
                }
            }
            assert!((&h - h.transpose()).amax() == 0.0);
        }
    }
}

#[test]
fn arwhead_gradient_at_start() {
    let p = get_problem("ARWHEAD", Some(20)).unwrap();
    let g = p.reference_gradient(&p.start);
    for i in 0..20 {
        let mut xp = p.start.clone();
        let mut xm = p.start.clone();
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        let fd = (p.value(&xp) - p.value(&xm)) / 2e-6;
        assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0));
    }
}

#[test]
fn hessian_counts_match_the_sparsity_pattern() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for p in named() {
        let x = near(&p, &mut rng);
        assert_eq!(
            hessian_nnz(&p, &x).unwrap(),
            p.nnz_upper.unwrap(),
            "{}",
            p.name
        );
    }
    let d = get_problem("DQDRTIC", Some(10)).unwrap();
    for _ in 0..5 {
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
        assert_eq!(hessian_nnz(&d, &x).unwrap(), 10);
    }
    assert_eq!(d.value(&[0.0; 10]), 0.0);
}

#[test]
fn synthetic_quadratic_has_constant_sparsity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..5 {
        let p = synth_sparse_quad(10, 5, seed).unwrap();
        for _ in 0..3 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert_eq!(hessian_nnz(&p, &x).unwrap(), 5);
        }
    }
    let zero = synth_sparse_quad(4, 0, 0).unwrap();
    assert_eq!(hessian_nnz(&zero, &[1.0, 2.0, 3.0, 4.0]).unwrap(), 0);
}

#[test]
fn known_minimizers_attain_zero() {
    let ones = |n| vec![1.0; n];
    let cases: Vec<(&str, Vec<f64>)> = vec![
        ("DQDRTIC", vec![0.0; 10]),
        ("ARWHEAD", {
            let mut x = ones(15);
            x[14] = 0.0;
            x
        }),
        ("SROSENBR", ones(20)),
        ("WOODS", ones(20)),
        ("LIARWHD", ones(20)),
        ("CHNROSNB", ones(15)),
        ("EXTROSNB", ones(20)),
        ("POWELLSG", vec![0.0; 20]),
        ("GENHUMPS", vec![0.0; 5]),
        ("HILBERTA", vec![0.0; 10]),
    ];
    for (name, x) in cases {
        let p = get_problem(name, None).unwrap();
        assert_eq!(p.f_best, Some(0.0));
        assert!(p.value(&x).abs() < 1e-14, "{name}");
    }
}

/// Damped Newton with an eigenvalue floor and backtracking, from the start.
fn newton_minimum(p: &Problem) -> f64 {
    let mut x = DVector::from_column_slice(&p.start);
    let mut f = p.value(x.as_slice());
    for _ in 0..500 {
        let (_, g, h) = p.reference_derivatives(x.as_slice());
        if g.norm() < 1e-12 {
            break;
        }
        let e = SymmetricEigen::new(h);
        let floor = 1e-8 * e.eigenvalues.amax().max(1.0);
        let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / v.abs().max(floor)));
        let step = -(&e.eigenvectors * d * e.eigenvectors.transpose() * &g);
        let mut t = 1.0;
        loop {
            let trial = &x + &step * t;
            let ft = p.value(trial.as_slice());
            if ft <= f + 1e-4 * t * g.dot(&step) {
                x = trial;
                f = ft;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return f;
            }
        }
    }
    f
}

#[test]
fn frozen_minimum_values_are_reachable() {
    for (name, n) in [
        ("BDQRTIC", 10),
        ("BDQRTIC", 20),
        ("CRAGGLVY", 10),
        ("CRAGGLVY", 20),
        ("SCHMVETT", 20),
        ("MOREBV", 10),
        ("DQDRTIC", 20),
    ] {
        let p = get_problem(name, Some(n)).unwrap();
        let fb = p.f_best.unwrap();
        let got = newton_minimum(&p);
        assert!(
            (got - fb).abs() <= 1e-8 * fb.abs().max(1.0),
            "{name} n={n}: {got} vs {fb}"
        );
    }
}

#[test]
fn invalid_requests_are_rejected() {
    assert!(get_problem("NOPE", None).is_err());
    assert!(get_problem("POWELLSG", Some(10)).is_err());
    assert!(get_problem("WOODS", Some(6)).is_err());
    assert!(get_problem("srosenbr", Some(7)).is_err());
    assert!(get_problem("dqdrtic", Some(12)).is_ok());
}

#[test]
fn problems_are_smooth_functions() {
    let p = get_problem("LIARWHD", Some(6)).unwrap();
    let f: &dyn SmoothFunction = &p;
    assert_eq!(f.dim(), 6);
    assert_eq!(f.hessian(&p.start).shape(), (6, 6));
}
