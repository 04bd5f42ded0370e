//! Trace checks shared by the driver and acceptance tests.
#![allow(dead_code)]

use dfo_sparse::basis::basis_len;
use dfo_sparse::driver::{DfoConfig, DfoTrace, SampleUpdate, Termination};

/// How often each rule was exercised by a trace.
#[derive(Debug, Default, Clone, Copy)]
pub struct Coverage {
    pub iterations: usize,
    pub successes: usize,
    pub expansions: usize,
    pub shrinks: usize,
    pub added: usize,
    pub swapped: usize,
    pub unchanged: usize,
    pub prunes: usize,
    pub reached_p_max: bool,
}

impl Coverage {
    pub fn merge(&mut self, o: &Coverage) {
        self.iterations += o.iterations;
        self.successes += o.successes;
        self.expansions += o.expansions;
        self.shrinks += o.shrinks;
        self.added += o.added;
        self.swapped += o.swapped;
        self.unchanged += o.unchanged;
        self.prunes += o.prunes;
        self.reached_p_max |= o.reached_p_max;
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Replays the sample set from the initial stencil and checks every
/// iteration against the method's rules:
/// radius updates, evaluation accounting, `|Y| <= p_max`, the Step 6 case
/// table against the replayed set, and the Step 7 doubling radius.
pub fn check_trace(trace: &DfoTrace, x0: &[f64], cfg: &DfoConfig) -> Result<Coverage, String> {
    let n = x0.len();
    let p_min = n + 1;
    let p_max = basis_len(n);
    let mut cov = Coverage::default();

    let mut y: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut p = x0.to_vec();
            p[i] += s * cfg.delta0;
            y.push(p);
        }
    }
    y.truncate(cfg.max_fevals);
    let mut fevals = y.len();
    let mut x = x0.to_vec();
    let mut delta = cfg.delta0;

    for r in &trace.iterations {
        let k = r.k;
        let fail = |m: String| Err(format!("iteration {k}: {m}"));
        cov.iterations += 1;
        if r.x != x || r.delta != delta {
            return fail("iterate or radius does not continue the previous iteration".into());
        }
        if r.y_size != y.len() {
            return fail(format!("|Y| = {} but replay has {}", r.y_size, y.len()));
        }
        if r.y_size > p_max || r.y_size_next > p_max {
            return fail("sample set exceeds p_max".into());
        }
        cov.reached_p_max |= r.y_size == p_max;

        // Evaluations: one per iteration unless the trial was already in Y.
        let duplicate = y.iter().any(|p| *p == r.trial);
        if r.evaluated == duplicate || r.f_trial.is_some() != r.evaluated {
            return fail("evaluation flag disagrees with the replayed set".into());
        }
        fevals += r.evaluated as usize;
        if r.fevals != fevals {
            return fail(format!("fevals {} but expected {fevals}", r.fevals));
        }

        // Step 5.
        let success = r.rho >= cfg.eta1;
        if success != r.success {
            return fail("success flag disagrees with rho".into());
        }
        let want_delta = if success {
            cov.successes += 1;
            let ft = r.f_trial.ok_or("successful trial without a value")?;
            if !(ft < r.f) {
                return fail(format!("accepted step increased f: {} -> {ft}", r.f));
            }
            if r.rho > cfg.eta2 {
                cov.expansions += 1;
                delta * cfg.gamma2
            } else {
                delta
            }
        } else if r.y_size >= p_min || !r.evaluated {
            cov.shrinks += 1;
            delta * cfg.gamma1
        } else {
            delta
        };
        if r.delta_next != want_delta {
            return fail(format!(
                "radius {} but rules give {want_delta}",
                r.delta_next
            ));
        }
        if success && r.delta_next < delta {
            return fail("radius decreased on a successful iteration".into());
        }
        if r.y_size < p_min && r.evaluated && r.delta_next < delta {
            return fail("radius decreased below p_min points".into());
        }
        let x_next = if success { r.trial.clone() } else { x.clone() };

        // Step 6.
        let want = match r.f_trial {
            Some(ft) if ft.is_finite() => {
                if y.len() < p_max {
                    y.push(r.trial.clone());
                    SampleUpdate::Added
                } else {
                    let mut out = 0;
                    for i in 1..y.len() {
                        if dist(&y[i], &x_next) > dist(&y[out], &x_next) {
                            out = i;
                        }
                    }
                    if success || dist(&r.trial, &x) <= dist(&y[out], &x) {
                        y.remove(out);
                        y.push(r.trial.clone());
                        SampleUpdate::Swapped { removed: out }
                    } else {
                        SampleUpdate::Unchanged
                    }
                }
            }
            _ => SampleUpdate::Unchanged,
        };
        if want != r.update {
            return fail(format!("Step 6 gave {:?}, rules give {want:?}", r.update));
        }
        match want {
            SampleUpdate::Added => cov.added += 1,
            SampleUpdate::Swapped { .. } => cov.swapped += 1,
            SampleUpdate::Unchanged => cov.unchanged += 1,
        }

        // Step 7.
        let d_next = r.delta_next;
        let want_r = if d_next < cfg.prune_trigger && y.len() >= cfg.min_kept_points {
            let mut rr = cfg.prune_radius_base;
            while y.iter().filter(|p| dist(p, &x_next) <= rr * d_next).count() < cfg.min_kept_points
            {
                rr *= 2.0;
            }
            y.retain(|p| dist(p, &x_next) <= rr * d_next);
            Some(rr)
        } else {
            None
        };
        if want_r != r.prune_r {
            return fail(format!(
                "Step 7 used r = {:?}, rules give {want_r:?}",
                r.prune_r
            ));
        }
        if r.prune_r.is_some() {
            cov.prunes += 1;
        }
        if r.y_size_next != y.len() {
            return fail(format!(
                "|Y| after the iteration {} but replay has {}",
                r.y_size_next,
                y.len()
            ));
        }
        x = x_next;
        delta = d_next;
    }

    if trace.fevals != fevals || trace.x != x {
        return Err("final state does not match the last iteration".into());
    }
    if trace.fevals > cfg.max_fevals {
        return Err("budget exceeded".into());
    }
    if trace.termination == Termination::Budget && trace.fevals < cfg.max_fevals {
        return Err("budget termination before the budget was spent".into());
    }
    if trace.iterates.first() != Some(&(1, trace.iterations.first().map_or(trace.f, |r| r.f))) {
        return Err("first iterate is not x0 at one evaluation".into());
    }
    for w in trace.iterates.windows(2) {
        if !(w[1].1 < w[0].1) || w[1].0 <= w[0].0 {
            return Err("accepted iterates are not strictly decreasing".into());
        }
    }
    Ok(cov)
}
