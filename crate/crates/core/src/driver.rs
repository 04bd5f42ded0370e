//! Interpolation-based trust-region method with underdetermined quadratic models.
//!
//! Each iteration fits a model to the current sample set (minimum Frobenius or
//! minimum l1 Hessian norm), stops on a small model gradient or radius, takes a
//! trust-region step, and updates the iterate, the radius and the sample set.
//! The sample set grows until it holds `(n+1)(n+2)/2` points and then swaps
//! points in and out; when the radius gets small, points far from the iterate
//! are dropped.

use crate::basis::basis_len;
use crate::error::{Error, Result};
use crate::fit::{fit_mfn, fit_min_l1, FitOutcome, SampleSet};
use crate::subsolvers::{solve_trs, TrsProblem};

/// Hessian norm minimized when fitting the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelNorm {
    /// `t = 1`: minimum l1 norm of the Hessian coefficients.
    L1,
    /// `t = 2`: minimum Frobenius norm.
    Frobenius,
}

impl ModelNorm {
    pub fn label(self) -> &'static str {
        match self {
            ModelNorm::L1 => "DFO-TR-l1",
            ModelNorm::Frobenius => "DFO-TR-Frob",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfoConfig {
    pub eps_g: f64,
    pub delta_stop: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta0: f64,
    pub norm: ModelNorm,
    pub max_fevals: usize,
    /// Radius below which far points are pruned.
    pub prune_trigger: f64,
    /// First element of the doubling sequence of ball multipliers.
    pub prune_radius_base: f64,
    pub min_kept_points: usize,
    /// The method is deterministic; the seed only labels a run.
    pub seed: u64,
}

impl Default for DfoConfig {
    fn default() -> Self {
        Self {
            eps_g: 1e-5,
            delta_stop: 1e-5,
            eta1: 1e-3,
            eta2: 0.75,
            gamma1: 0.5,
            gamma2: 2.0,
            delta0: 1.0,
            norm: ModelNorm::L1,
            max_fevals: 15000,
            prune_trigger: 1e-3,
            prune_radius_base: 100.0,
            min_kept_points: 3,
            seed: 0,
        }
    }
}

impl DfoConfig {
    pub fn with_norm(mut self, norm: ModelNorm) -> Self {
        self.norm = norm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| {
            Err(Error::InvalidArgument(format!(
                "invalid configuration: {m}"
            )))
        };
        let positive = [
            self.eps_g,
            self.delta_stop,
            self.delta0,
            self.prune_trigger,
            self.prune_radius_base,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return bad("tolerances, radii and multipliers must be positive and finite");
        }
        if !(0.0 < self.eta1 && self.eta1 < self.eta2) {
            return bad("need 0 < eta1 < eta2");
        }
        if !(0.0 < self.gamma1 && self.gamma1 < 1.0 && 1.0 < self.gamma2) {
            return bad("need 0 < gamma1 < 1 < gamma2");
        }
        if self.min_kept_points == 0 {
            return bad("min_kept_points must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Radius,
    Budget,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Gradient => "gradient",
            Termination::Radius => "radius",
            Termination::Budget => "budget",
        }
    }
}

/// How Step 6 changed the sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleUpdate {
    Added,
    /// The point at this index (before removal) was replaced.
    Swapped {
        removed: usize,
    },
    Unchanged,
}

/// One pass through Steps 1 to 7. Fields with a `_next` suffix describe the
/// state handed to the following iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub delta: f64,
    pub y_size: usize,
    pub rho: f64,
    pub success: bool,
    /// Model gradient norm at `x` in original coordinates.
    pub gnorm: f64,
    /// Cumulative evaluations after this iteration.
    pub fevals: usize,
    pub trial: Vec<f64>,
    pub f_trial: Option<f64>,
    /// False when the trial point already belonged to the sample set.
    pub evaluated: bool,
    /// The l1 fit failed and the minimum Frobenius model was used.
    pub mfn_fallback: bool,
    /// No model or no subproblem solution; the step was a coordinate probe.
    pub resampled: bool,
    pub update: SampleUpdate,
    /// Ball multiplier used by Step 7, if pruning happened.
    pub prune_r: Option<f64>,
    pub delta_next: f64,
    pub y_size_next: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfoTrace {
    pub iterations: Vec<IterRecord>,
    pub termination: Termination,
    pub x: Vec<f64>,
    pub f: f64,
    pub final_gnorm: f64,
    pub fevals: usize,
    /// `(cumulative evaluations, f)` for every accepted iterate, `x_0` first.
    pub iterates: Vec<(usize, f64)>,
}

impl DfoTrace {
    /// Evaluations spent when an iterate first reached `f <= target`.
    pub fn fevals_to_reach(&self, target: f64) -> Option<usize> {
        self.iterates
            .iter()
            .find(|(_, f)| *f <= target)
            .map(|(k, _)| *k)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Step 6. `x_next` is the next iterate (the trial point on success).
///
/// Below `p_max` points the trial point is always added. At `p_max`, the
/// point farthest from `x_next` (lowest index on ties) is replaced, except on
/// unsuccessful iterations whose trial point is farther from the iterate than
/// that point.
pub fn update_sample_set(
    y: &mut SampleSet,
    x_next: &[f64],
    trial: &[f64],
    f_trial: f64,
    success: bool,
    p_max: usize,
) -> SampleUpdate {
    if y.len() < p_max {
        y.points.push(trial.to_vec());
        y.values.push(f_trial);
        return SampleUpdate::Added;
    }
    let mut out = 0;
    let mut far = f64::NEG_INFINITY;
    for (i, p) in y.points.iter().enumerate() {
        let d = dist(p, x_next);
        if d > far {
            far = d;
            out = i;
        }
    }
    // On failure x_next is x_k, so `far` is the distance of y_out from x_k.
    if success || dist(trial, x_next) <= far {
        y.points.remove(out);
        y.values.remove(out);
        y.points.push(trial.to_vec());
        y.values.push(f_trial);
        SampleUpdate::Swapped { removed: out }
    } else {
        SampleUpdate::Unchanged
    }
}

/// Step 7. When `delta < prune_trigger`, keeps only the points inside the
/// l2 ball `B(x; r delta)` with `r` the smallest of `base, 2 base, 4 base, ...`
/// for which the ball holds at least `min_kept_points` points. Returns the `r`
/// used, or `None` if nothing was pruned for lack of trigger or points.
pub fn prune_far_points(y: &mut SampleSet, x: &[f64], delta: f64, cfg: &DfoConfig) -> Option<f64> {
    if delta >= cfg.prune_trigger || y.len() < cfg.min_kept_points {
        return None;
    }
    let dists: Vec<f64> = y.points.iter().map(|p| dist(p, x)).collect();
    let mut sorted = dists.clone();
    sorted.sort_by(f64::total_cmp);
    let needed = sorted[cfg.min_kept_points - 1];
    let mut r = cfg.prune_radius_base;
    while r * delta < needed {
        r *= 2.0;
        if !r.is_finite() {
            return None;
        }
    }
    let radius = r * delta;
    let mut i = 0;
    y.points.retain(|_| {
        let keep = dists[i] <= radius;
        i += 1;
        keep
    });
    let mut i = 0;
    y.values.retain(|_| {
        let keep = dists[i] <= radius;
        i += 1;
        keep
    });
    Some(r)
}

fn fit(y: &SampleSet, norm: ModelNorm) -> (Option<FitOutcome>, bool) {
    match norm {
        ModelNorm::Frobenius => (fit_mfn(y).ok(), false),
        ModelNorm::L1 => match fit_min_l1(y) {
            Ok(o) => (Some(o), false),
            Err(_) => (fit_mfn(y).ok(), true),
        },
    }
}

/// Runs the method from `x0` on `f` until a stopping test or the evaluation
/// budget ends it.
pub fn run_dfo_tr<F>(mut f: F, x0: &[f64], cfg: &DfoConfig) -> Result<DfoTrace>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty starting point".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "starting point is not finite".into(),
        ));
    }
    let p_min = n + 1;
    let p_max = basis_len(n);

    // Step 0.
    let mut stencil = vec![x0.to_vec()];
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut p = x0.to_vec();
            p[i] += sign * cfg.delta0;
            stencil.push(p);
        }
    }
    let mut points = Vec::with_capacity(stencil.len());
    let mut values = Vec::with_capacity(stencil.len());
    for p in stencil {
        if points.len() >= cfg.max_fevals {
            break;
        }
        values.push(f(&p));
        points.push(p);
    }
    let mut fevals = points.len();
    let mut x = x0.to_vec();
    let mut fx = values.first().copied().unwrap_or(f64::NAN);
    let mut iterates = Vec::new();
    if fevals > 0 {
        iterates.push((1, fx));
    }
    let mut y = SampleSet {
        points,
        values,
        center: x.clone(),
        scale: 1.0,
    };
    let mut delta = cfg.delta0;
    let mut iterations = Vec::new();
    let mut gnorm = f64::NAN;

    let termination = loop {
        if fevals >= cfg.max_fevals {
            break Termination::Budget;
        }
        let k = iterations.len();
        y.center = x.clone();

        // Step 1.
        let (outcome, mfn_fallback) = fit(&y, cfg.norm);

        let mut step = None;
        if let Some(o) = outcome {
            let parts = o.model.canonical_parts();
            gnorm = parts.gradient.norm();
            // Step 2.
            if gnorm <= cfg.eps_g {
                break Termination::Gradient;
            }
            if delta <= cfg.delta_stop {
                break Termination::Radius;
            }
            // Step 3.
            let sol = solve_trs(&TrsProblem {
                g: parts.gradient,
                h: parts.hessian,
                delta,
            });
            if let Ok(sol) = sol {
                let trial: Vec<f64> = x.iter().zip(sol.s.iter()).map(|(a, b)| a + b).collect();
                step = Some((trial, -sol.model_change));
            }
        } else if delta <= cfg.delta_stop {
            break Termination::Radius;
        }
        let resampled = step.is_none();
        let (trial, pred) = step.unwrap_or_else(|| {
            // No usable model or step: probe a coordinate direction instead.
            let mut trial = x.clone();
            trial[k % n] += delta;
            (trial, f64::NAN)
        });

        // Step 4.
        let duplicate = y.points.contains(&trial);
        let (f_trial, rho) = if duplicate {
            (None, f64::NEG_INFINITY)
        } else {
            let ft = f(&trial);
            fevals += 1;
            let rho = if pred > 0.0 && ft.is_finite() {
                (fx - ft) / pred
            } else {
                f64::NEG_INFINITY
            };
            (Some(ft), rho)
        };

        // Step 5.
        let delta_k = delta;
        let y_size = y.len();
        let success = rho >= cfg.eta1;
        let x_k = x.clone();
        let f_k = fx;
        if success {
            x = trial.clone();
            fx = f_trial.expect("successful trials were evaluated");
            iterates.push((fevals, fx));
            if rho > cfg.eta2 {
                delta *= cfg.gamma2;
            }
        } else if y_size >= p_min || duplicate {
            // A duplicate leaves Y unchanged, so the radius must move to make progress.
            delta *= cfg.gamma1;
        }

        // Step 6.
        let update = match f_trial {
            Some(ft) if ft.is_finite() => update_sample_set(&mut y, &x, &trial, ft, success, p_max),
            _ => SampleUpdate::Unchanged,
        };

        // Step 7.
        let prune_r = prune_far_points(&mut y, &x, delta, cfg);

        iterations.push(IterRecord {
            k,
            x: x_k,
            f: f_k,
            delta: delta_k,
            y_size,
            rho,
            success,
            gnorm,
            fevals,
            trial,
            f_trial,
            evaluated: !duplicate,
            mfn_fallback,
            resampled,
            update,
            prune_r,
            delta_next: delta,
            y_size_next: y.len(),
        });
    };

    Ok(DfoTrace {
        iterations,
        termination,
        x,
        f: fx,
        final_gnorm: gnorm,
        fevals,
        iterates,
    })
}
