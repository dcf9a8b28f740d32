//! Picard-contraction solving of dX = f(X) dt + g(X) dW: a-priori step-size
//! and contraction-factor certificates, per-seed interval iteration on
//! sampled Wiener paths, and interval verification of Lipschitz claims.

use crate::error::{Error, Result};
use crate::exactnum::{pow2, rat_to_f64_up, Rational};
use crate::expr::ExprAst;
use crate::fint::FInterval;
use crate::randvar::rational_sqrt_interval;
use crate::space::CantorPoint;
use crate::wiener::{sample_wiener, SampleMode};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct SdeProblem {
    pub drift: ExprAst,
    pub diffusion: ExprAst,
    /// Certified Lipschitz constant of the drift.
    pub lip_drift: Rational,
    /// Certified Lipschitz constant of the diffusion.
    pub lip_diffusion: Rational,
    pub x0: Rational,
    pub horizon: Rational,
    /// Optional state box for locally-Lipschitz problems; enclosures leaving
    /// it are counted as breaches.
    pub bounding_box: Option<(Rational, Rational)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardCertificate {
    pub step: String,
    pub kappa: String,
    pub iterations: u32,
    pub initial_gap: String,
    pub final_gap_bound: String,
    pub segments: u32,
    pub tolerance: String,
}

/// kappa = K T + 2 L sqrt(T), with the square root rounded outward so the
/// reported contraction factor is an upper bound.
pub fn kappa_at(k: &Rational, l: &Rational, t: &Rational) -> Rational {
    let sqrt_t_up = rational_sqrt_interval(
        &crate::exactnum::DyadicInterval::point(t.clone()),
        40,
    )
    .hi()
    .clone();
    k.clone() * t.clone() + Rational::from_integer(2.into()) * l.clone() * sqrt_t_up
}

/// The largest power-of-two step T <= (1/2) min(1/(2K), 1/(16 L^2)), with
/// its contraction factor. Halving the threshold keeps kappa bounded away
/// from 1, so iteration counts stay predictable.
pub fn contraction_step(k: &Rational, l: &Rational) -> (Rational, Rational) {
    assert!(!k.is_negative() && !l.is_negative());
    let mut bound: Option<Rational> = None;
    if k.is_positive() {
        bound = Some(Rational::one() / (Rational::from_integer(2.into()) * k.clone()));
    }
    if l.is_positive() {
        let b2 = Rational::one()
            / (Rational::from_integer(16.into()) * l.clone() * l.clone());
        bound = Some(match bound {
            None => b2,
            Some(b) => b.min(b2),
        });
    }
    // degenerate deterministic constant-coefficient case: any unit step works
    let bound = bound.unwrap_or_else(|| Rational::from_integer(2.into()));
    let half = bound / Rational::from_integer(2.into());
    let mut t = Rational::one();
    while t > half || t > Rational::one() {
        t = t / Rational::from_integer(2.into());
        assert!(t > pow2(-60), "step underflow");
    }
    let kappa = kappa_at(k, l, &t);
    assert!(kappa < Rational::one());
    (t, kappa)
}

/// One Picard sweep J[X] on a grid slice: left-endpoint drift quadrature and
/// the Ito sum against the path increments, outward rounded.
pub fn picard_apply(
    path: &[FInterval],
    problem: &SdeProblem,
    w_values: &[FInterval],
    x0: FInterval,
    dt: f64,
) -> Vec<FInterval> {
    let n = path.len() - 1;
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = x0;
    out.push(acc);
    let dt_iv = FInterval::point(dt);
    for j in 0..n {
        let fx = problem.drift.eval_fint(&path[j]);
        let gx = problem.diffusion.eval_fint(&path[j]);
        let dw = w_values[j + 1].sub(&w_values[j]);
        acc = acc.add(&fx.mul(&dt_iv)).add(&gx.mul(&dw));
        out.push(acc);
    }
    out
}

/// Certified bound on the drift quadrature residual of a computed path:
/// sum over cells of the oscillation of f along adjacent enclosures times dt.
fn drift_residual(problem: &SdeProblem, path: &[FInterval], dt: f64) -> f64 {
    let mut total = 0.0f64;
    for w in path.windows(2) {
        let a = problem.drift.eval_fint(&w[0]);
        let b = problem.drift.eval_fint(&w[1]);
        let osc = a.hull(&b).width();
        total += osc * dt;
    }
    total * 1.0001
}

#[derive(Clone, Debug)]
pub struct SolveOpts {
    pub level: u32,
    pub grid_level: u32,
    pub iteration_cap: u32,
    pub quantile_tol: Rational,
    /// How many seeds keep their full path in the output.
    pub keep_paths: usize,
}

impl Default for SolveOpts {
    fn default() -> Self {
        SolveOpts {
            level: 10,
            grid_level: 10,
            iteration_cap: 64,
            quantile_tol: pow2(-16),
            keep_paths: 4,
        }
    }
}

pub struct SeedResult {
    pub seed: u64,
    pub endpoint: FInterval,
    pub flagged: bool,
    pub box_breach: bool,
    pub path: Option<Vec<FInterval>>,
    /// Certified containment radius for deterministic problems: drift
    /// residual over contraction slack.
    pub drift_slack: f64,
}

pub struct SolutionProcess {
    pub results: Vec<SeedResult>,
    pub certificate: PicardCertificate,
    pub grid_level: u32,
}

impl SolutionProcess {
    pub fn endpoint_mids(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.endpoint.mid()).collect()
    }

    pub fn breaches(&self) -> usize {
        self.results.iter().filter(|r| r.box_breach).count()
    }
}

/// Solves the SDE by segment-wise Picard iteration on every seed.
///
/// The iteration count per segment comes from the a-priori contraction
/// certificate: kappa^n gap_0 below the per-segment share of the tolerance,
/// with gap_0 = kappa * (running second-moment bound). The certificate is
/// emitted before any path is sampled.
pub fn picard_solve(
    problem: &SdeProblem,
    tol: &Rational,
    seeds: std::ops::Range<u64>,
    opts: &SolveOpts,
) -> Result<SolutionProcess> {
    if problem.horizon > Rational::one() {
        return Err(Error::Unsupported(
            "horizons beyond the unit interval need path concatenation; run unit blocks".into(),
        ));
    }
    if problem.horizon <= Rational::zero() {
        return Err(Error::Unsupported("empty horizon".into()));
    }
    let (t_step, kappa) = contraction_step(&problem.lip_drift, &problem.lip_diffusion);
    let t_step = t_step.min(problem.horizon.clone());
    let segments: u32 = {
        let ratio = problem.horizon.clone() / t_step.clone();
        let c = ratio.ceil().to_integer().to_u32().unwrap_or(u32::MAX)
            .max(1);
        c
    };
    let per_segment_tol = tol.clone() / Rational::from_integer((segments as i64).into());

    // a-priori iteration schedule from the moment-bound recursion
    // B_(k+1) = B_k / (1 - kappa)
    let mut iterations = 0u32;
    let mut final_gap_bound = Rational::zero();
    let mut initial_gap_first = Rational::zero();
    let mut moment_bound = problem.x0.abs().max(Rational::one());
    for k in 0..segments {
        let gap0 = kappa.clone() * moment_bound.clone();
        if k == 0 {
            initial_gap_first = gap0.clone();
        }
        let mut n = 1u32;
        let mut shrink = kappa.clone() * gap0.clone();
        while shrink > per_segment_tol && n < opts.iteration_cap {
            shrink = shrink * kappa.clone();
            n += 1;
        }
        if shrink > per_segment_tol {
            return Err(Error::ToleranceUnreachable {
                cap: opts.iteration_cap,
                tol: tol.to_string(),
                gap: shrink.to_string(),
            });
        }
        iterations = iterations.max(n);
        final_gap_bound += shrink;
        moment_bound = moment_bound / (Rational::one() - kappa.clone());
    }
    let certificate = PicardCertificate {
        step: t_step.to_string(),
        kappa: kappa.to_string(),
        iterations,
        initial_gap: initial_gap_first.to_string(),
        final_gap_bound: final_gap_bound.to_string(),
        segments,
        tolerance: tol.to_string(),
    };

    let g = opts.grid_level;
    let scale = 1u64 << g;
    let seg_points = {
        let pts = t_step.clone() * Rational::from_integer((scale as i64).into());
        let p = pts.to_integer().to_u64().unwrap_or(0);
        if p == 0 || pts != Rational::from_integer((p as i64).into()) {
            return Err(Error::GridMismatch {
                what: format!("segment step {t_step} not on the 2^-{g} grid"),
            });
        }
        p as usize
    };
    let horizon_points = {
        let pts = problem.horizon.clone() * Rational::from_integer((scale as i64).into());
        let p = pts.to_integer().to_u64().unwrap_or(0);
        if pts != Rational::from_integer((p as i64).into()) {
            return Err(Error::GridMismatch {
                what: format!("horizon {} not on the 2^-{g} grid", problem.horizon),
            });
        }
        p as usize
    };
    let dt = 1.0 / scale as f64;
    let x0f = FInterval::from_rat_point(&problem.x0);
    let bbox = problem
        .bounding_box
        .as_ref()
        .map(|(a, b)| (rat_to_f64_up(a), rat_to_f64_up(b)));

    let seed_list: Vec<u64> = seeds.collect();
    let keep = opts.keep_paths;
    let results: Result<Vec<SeedResult>> = seed_list
        .par_iter()
        .map(|&seed| {
            let omega = CantorPoint::from_seed(seed);
            let sample = sample_wiener(&omega, opts.level, SampleMode::Stratified, &opts.quantile_tol)?;
            let w = sample.path(g);
            let mut full_path: Vec<FInterval> = vec![x0f];
            let mut drift_slack = 0.0f64;
            let mut start = x0f;
            let mut breach = false;
            let mut j0 = 0usize;
            while j0 < horizon_points {
                let j1 = (j0 + seg_points).min(horizon_points);
                let w_slice = &w.values[j0..=j1];
                let m = j1 - j0;
                let mut path = vec![start; m + 1];
                for _ in 0..iterations {
                    path = picard_apply(&path, problem, w_slice, start, dt);
                }
                drift_slack += drift_residual(problem, &path, dt);
                if let Some((lo, hi)) = bbox {
                    if path.iter().any(|v| v.lo < lo || v.hi > hi) {
                        breach = true;
                    }
                }
                start = *path.last().unwrap();
                full_path.extend_from_slice(&path[1..]);
                j0 = j1;
            }
            let endpoint = *full_path.last().unwrap();
            let keep_this = (seed_list.iter().position(|&s| s == seed).unwrap_or(usize::MAX)) < keep;
            Ok(SeedResult {
                seed,
                endpoint,
                flagged: w.flagged,
                box_breach: breach,
                path: keep_this.then_some(full_path),
                drift_slack: drift_slack / (1.0 - rat_to_f64_up(&kappa)).max(1e-9),
            })
        })
        .collect();

    Ok(SolutionProcess {
        results: results?,
        certificate,
        grid_level: g,
    })
}

/// Mean sup-gaps between successive Picard iterates over an ensemble, for
/// observing the contraction factor empirically.
pub fn observe_contraction(
    problem: &SdeProblem,
    seeds: std::ops::Range<u64>,
    iterations: u32,
    opts: &SolveOpts,
) -> Result<Vec<f64>> {
    let g = opts.grid_level;
    let scale = 1u64 << g;
    let (t_step, _) = contraction_step(&problem.lip_drift, &problem.lip_diffusion);
    let t_step = t_step.min(problem.horizon.clone());
    let seg_points = (t_step * Rational::from_integer((scale as i64).into()))
        .to_integer()
        .to_u64()
        .unwrap_or(1)
        .max(1) as usize;
    let dt = 1.0 / scale as f64;
    let x0f = FInterval::from_rat_point(&problem.x0);
    let mut gaps_per_iter = vec![Vec::new(); iterations as usize];
    for seed in seeds {
        let omega = CantorPoint::from_seed(seed);
        let w = sample_wiener(&omega, opts.level, SampleMode::Stratified, &opts.quantile_tol)?
            .path(g);
        let w_slice = &w.values[0..=seg_points];
        let mut path = vec![x0f; seg_points + 1];
        for it in 0..iterations {
            let next = picard_apply(&path, problem, w_slice, x0f, dt);
            let gap = path
                .iter()
                .zip(next.iter())
                .map(|(a, b)| (a.mid() - b.mid()).abs())
                .fold(0.0f64, f64::max);
            gaps_per_iter[it as usize].push(gap);
            path = next;
        }
    }
    Ok(gaps_per_iter
        .into_iter()
        .map(|g| crate::stats::mean(&g))
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzVerdict {
    pub pass: bool,
    pub certified_sup: f64,
    pub witness: Option<(f64, f64)>,
}

/// Interval verification of |f'| <= claimed over a box, by adaptive
/// bisection of the symbolic derivative's interval extension.
pub fn lipschitz_check(
    expr: &ExprAst,
    domain: (&Rational, &Rational),
    claimed: &Rational,
) -> LipschitzVerdict {
    let d = expr.derivative();
    let claimed_f = rat_to_f64_up(claimed);
    let mut queue = vec![FInterval::new(
        crate::exactnum::rat_to_f64_down(domain.0),
        rat_to_f64_up(domain.1),
    )];
    let mut certified_sup = 0.0f64;
    let mut depth_guard = 0usize;
    while let Some(cell) = queue.pop() {
        depth_guard += 1;
        if depth_guard > 1 << 16 {
            return LipschitzVerdict {
                pass: false,
                certified_sup,
                witness: Some((cell.lo, cell.hi)),
            };
        }
        let mag = d.eval_fint(&cell).abs();
        if mag.hi <= claimed_f {
            certified_sup = certified_sup.max(mag.hi);
            continue;
        }
        if mag.lo > claimed_f {
            return LipschitzVerdict {
                pass: false,
                certified_sup: mag.lo,
                witness: Some((cell.lo, cell.hi)),
            };
        }
        if cell.width() < 1e-9 {
            // cannot separate: conservative failure with the witness cell
            return LipschitzVerdict {
                pass: false,
                certified_sup: mag.hi,
                witness: Some((cell.lo, cell.hi)),
            };
        }
        let mid = cell.mid();
        queue.push(FInterval::new(cell.lo, mid));
        queue.push(FInterval::new(mid, cell.hi));
    }
    LipschitzVerdict {
        pass: true,
        certified_sup,
        witness: None,
    }
}
