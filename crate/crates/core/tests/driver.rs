mod common;

use common::{check_trace, Coverage};
use dfo_sparse::driver::*;
use dfo_sparse::fit::{fit_mfn, fit_min_l1, SampleSet};
use dfo_sparse::problems::get_problem;

fn cfg(norm: ModelNorm, budget: usize) -> DfoConfig {
    DfoConfig {
        max_fevals: budget,
        ..DfoConfig::default().with_norm(norm)
    }
}

#[test]
fn traces_follow_the_rules() {
    let mut total = Coverage::default();
    for (name, n) in [
        ("DQDRTIC", 6),
        ("ARWHEAD", 5),
        ("SROSENBR", 4),
        ("WOODS", 4),
        ("SCHMVETT", 5),
        ("GENHUMPS", 3),
    ] {
        let p = get_problem(name, Some(n)).unwrap();
        for norm in [ModelNorm::Frobenius, ModelNorm::L1] {
            let c = cfg(norm, 1500);
            let t = run_dfo_tr(|x| p.value(x), &p.start, &c).unwrap();
            let cov =
                check_trace(&t, &p.start, &c).unwrap_or_else(|e| panic!("{name} {norm:?}: {e}"));
            assert!(cov.iterations > 0);
            total.merge(&cov);
        }
    }
    println!("{total:?}");
    assert!(total.reached_p_max);
    for (what, count) in [
        ("expansions", total.expansions),
        ("shrinks", total.shrinks),
        ("additions", total.added),
        ("swaps", total.swapped),
        ("rejections", total.unchanged),
        ("prunes", total.prunes),
    ] {
        assert!(count > 0, "no {what} exercised");
    }
}

#[test]
fn dqdrtic_reaches_accuracy_quickly() {
    let p = get_problem("DQDRTIC", Some(10)).unwrap();
    for norm in [ModelNorm::Frobenius, ModelNorm::L1] {
        let t = run_dfo_tr(|x| p.value(x), &p.start, &cfg(norm, 15000)).unwrap();
        let reached = t.fevals_to_reach(1e-6).expect("accuracy reached");
        assert!((10..=200).contains(&reached), "{reached}");
    }
}

#[test]
fn budget_is_respected_exactly() {
    let p = get_problem("SROSENBR", Some(10)).unwrap();
    let c = cfg(ModelNorm::L1, 60);
    let t = run_dfo_tr(|x| p.value(x), &p.start, &c).unwrap();
    assert_eq!(t.termination, Termination::Budget);
    assert_eq!(t.fevals, 60);
    check_trace(&t, &p.start, &c).unwrap();

    // A budget smaller than the initial stencil.
    let c = cfg(ModelNorm::Frobenius, 5);
    let t = run_dfo_tr(|x| p.value(x), &p.start, &c).unwrap();
    assert_eq!((t.fevals, t.iterations.len()), (5, 0));
}

#[test]
fn counts_evaluations_of_the_objective() {
    let p = get_problem("ARWHEAD", Some(6)).unwrap();
    let mut calls = 0;
    let t = run_dfo_tr(
        |x| {
            calls += 1;
            p.value(x)
        },
        &p.start,
        &cfg(ModelNorm::L1, 400),
    )
    .unwrap();
    assert_eq!(calls, t.fevals);
    let evaluated = t.iterations.iter().filter(|r| r.evaluated).count();
    assert_eq!(t.fevals, 2 * 6 + 1 + evaluated);
}

#[test]
fn stopping_tests() {
    // A constant function stops on the model gradient at once.
    let t = run_dfo_tr(|_| 3.0, &[1.0, 2.0], &DfoConfig::default()).unwrap();
    assert_eq!(t.termination, Termination::Gradient);
    assert_eq!(t.fevals, 5);
    // A tiny initial radius stops on the radius test.
    let c = DfoConfig {
        delta0: 1e-6,
        eps_g: 1e-12,
        ..DfoConfig::default()
    };
    let t = run_dfo_tr(|x| x[0].sin() + x[1], &[0.3, 0.1], &c).unwrap();
    assert_eq!(t.termination, Termination::Radius);
}

#[test]
fn rejects_bad_configurations() {
    let bad = DfoConfig {
        eta1: 0.9,
        eta2: 0.5,
        ..DfoConfig::default()
    };
    assert!(run_dfo_tr(|x| x[0], &[0.0], &bad).is_err());
    assert!(run_dfo_tr(|x| x[0], &[], &DfoConfig::default()).is_err());
    assert!(run_dfo_tr(|x| x[0], &[f64::NAN], &DfoConfig::default()).is_err());
}

#[test]
fn non_finite_values_are_rejected_steps() {
    let c = cfg(ModelNorm::L1, 300);
    let t = run_dfo_tr(
        |x| {
            if x[0] > 2.5 {
                f64::NAN
            } else {
                (x[0] - 2.0).powi(2) + x[1] * x[1]
            }
        },
        &[0.0, 1.0],
        &c,
    )
    .unwrap();
    assert!(t.f.is_finite() && t.f < 1e-3);
}

#[test]
fn step6_examples() {
    let mut y = SampleSet::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0], vec![0.0]).unwrap();
    assert_eq!(
        update_sample_set(&mut y, &[0.5], &[0.5], 0.2, true, 3),
        SampleUpdate::Added
    );
    assert_eq!(y.len(), 3);
    // Full set, success: the point farthest from the new iterate leaves.
    assert_eq!(
        update_sample_set(&mut y, &[0.9], &[0.9], 0.1, true, 3),
        SampleUpdate::Swapped { removed: 0 }
    );
    assert_eq!(y.points, vec![vec![1.0], vec![0.5], vec![0.9]]);
    // Full set, failure, trial farther than every point: unchanged.
    assert_eq!(
        update_sample_set(&mut y, &[0.9], &[5.0], 9.0, false, 3),
        SampleUpdate::Unchanged
    );
    assert_eq!(y.len(), 3);
}

#[test]
fn step7_doubling_example() {
    let pts = [5e-3, 1e-2, 3e-2, 0.5].iter().map(|d| vec![*d]).collect();
    let mut y = SampleSet::new(pts, vec![0.0; 4], vec![0.0]).unwrap();
    let c = DfoConfig::default();
    assert_eq!(prune_far_points(&mut y, &[0.0], 1e-4, &c), Some(400.0));
    assert_eq!(y.len(), 3);
    let mut same = y.clone();
    assert_eq!(prune_far_points(&mut same, &[0.0], 1e-2, &c), None);
    assert_eq!(same, y);
}

#[test]
fn determined_set_gives_the_same_model_for_both_norms() {
    let p = get_problem("SROSENBR", Some(4)).unwrap();
    let c = cfg(ModelNorm::L1, 400);
    let t = run_dfo_tr(|x| p.value(x), &p.start, &c).unwrap();
    assert!(t.iterations.iter().any(|r| r.y_size == 15));
    // Rebuild a determined poised set around the final iterate.
    let mut pts = vec![t.x.clone()];
    for i in 0..4 {
        for j in i..4 {
            let mut q = t.x.clone();
            q[i] += 0.1;
            q[j] += if i == j { 0.0 } else { 0.07 };
            pts.push(q);
        }
        let mut q = t.x.clone();
        q[i] -= 0.13;
        pts.push(q);
    }
    let values = pts.iter().map(|x| p.value(x)).collect();
    let y = SampleSet::new(pts, values, t.x.clone()).unwrap();
    assert_eq!(y.len(), 15);
    let a = fit_mfn(&y).unwrap().model;
    let b = fit_min_l1(&y).unwrap().model;
    for (u, v) in a.alpha.iter().zip(&b.alpha) {
        assert!((u - v).abs() <= 1e-7 * u.abs().max(1.0));
    }
}
