//! Step processes and the Ito integral, with the exhaustive martingale
//! inequalities that certify its extension to continuous integrands.

use crate::error::{Error, Result};
use crate::exactnum::{pow2, rat_to_f64_up, Rational};
use crate::fint::FInterval;
use crate::space::CantorPoint;
use crate::stats::{mean, mean_sigma};
use crate::wiener::WienerPath;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::sync::Arc;

/// Declared dependence of a step value, the syntactic nonanticipativity tag.
#[derive(Clone, Debug, PartialEq)]
pub enum Dependence {
    Deterministic,
    InitialData,
    /// A function of the Wiener path restricted to [0, t].
    WPathUpTo(Rational),
    /// Reads the given interleaved copy of the base space; even copies drive
    /// the Wiener path blocks, so fresh blocks use odd indices.
    FreshCopy(u32),
}

/// Evaluation context for step values: the global point and the sampled path.
pub struct PathCtx<'a> {
    pub omega: &'a CantorPoint,
    pub path: &'a WienerPath,
}

#[derive(Clone)]
pub struct StepValue {
    pub eval: Arc<dyn Fn(&PathCtx) -> FInterval + Send + Sync>,
    pub depends: Dependence,
    /// Exact second moment, when the caller certifies one (isometry RHS).
    pub second_moment: Option<Rational>,
}

impl StepValue {
    pub fn constant(c: Rational) -> Self {
        let cf = FInterval::from_rat_point(&c);
        StepValue {
            eval: Arc::new(move |_| cf),
            depends: Dependence::Deterministic,
            second_moment: Some(c.clone() * c),
        }
    }

    /// The Wiener path sampled at a (left) time point.
    pub fn path_at(t: Rational) -> Self {
        let tf = t.to_f64().unwrap();
        StepValue {
            eval: Arc::new(move |ctx| ctx.path.value_at_time(tf)),
            depends: Dependence::WPathUpTo(t.clone()),
            // E W(t)^2 = t
            second_moment: Some(t),
        }
    }

    /// A +-1 coin read from a fresh copy of the base space.
    pub fn coin(copy: u32) -> Self {
        StepValue {
            eval: Arc::new(move |ctx| {
                let sliced = ctx.omega.copy_slice(copy).expect("copy in range");
                if sliced.bit(0) {
                    FInterval::point(1.0)
                } else {
                    FInterval::point(-1.0)
                }
            }),
            depends: Dependence::FreshCopy(copy),
            second_moment: Some(Rational::one()),
        }
    }
}

/// A nonanticipative step process X(t) = X_i on [t_i, t_(i+1)).
#[derive(Clone)]
pub struct StepProcess {
    times: Vec<Rational>,
    values: Vec<StepValue>,
}

impl StepProcess {
    pub fn new(times: Vec<Rational>, values: Vec<StepValue>) -> Result<Self> {
        if times.len() != values.len() + 1 {
            return Err(Error::GridMismatch {
                what: format!("{} times vs {} values", times.len(), values.len()),
            });
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::GridMismatch {
                what: "times not strictly increasing".into(),
            });
        }
        // tag consistency: a path-dependent value may only look backwards,
        // and fresh blocks must avoid the Wiener sampler's copy 0
        for (i, v) in values.iter().enumerate() {
            match &v.depends {
                Dependence::WPathUpTo(s) => {
                    if s > &times[i] {
                        return Err(Error::Anticipation {
                            what: format!(
                                "value {i} reads the path up to {s} but starts at {}",
                                times[i]
                            ),
                        });
                    }
                }
                Dependence::FreshCopy(c) if c % 2 == 0 => {
                    return Err(Error::Anticipation {
                        what: format!(
                            "value {i} reads copy {c}; even copies drive the Wiener blocks"
                        ),
                    });
                }
                _ => {}
            }
        }
        Ok(StepProcess { times, values })
    }

    pub fn constant(c: Rational, horizon: Rational) -> Self {
        StepProcess::new(vec![Rational::zero(), horizon], vec![StepValue::constant(c)]).unwrap()
    }

    pub fn times(&self) -> &[Rational] {
        &self.times
    }

    pub fn values(&self) -> &[StepValue] {
        &self.values
    }

    pub fn horizon(&self) -> &Rational {
        self.times.last().unwrap()
    }

    /// Index of the step active at time t.
    fn segment_of(&self, t: &Rational) -> usize {
        let mut i = 0;
        while i + 1 < self.values.len() && &self.times[i + 1] <= t {
            i += 1;
        }
        i
    }

    /// Exact integral of second moments: E int_0^T X(t)^2 dt, when every
    /// value carries a certified second moment.
    pub fn second_moment_integral(&self) -> Option<Rational> {
        let mut total = Rational::zero();
        for (i, v) in self.values.iter().enumerate() {
            let m2 = v.second_moment.clone()?;
            total += m2 * (self.times[i + 1].clone() - self.times[i].clone());
        }
        Some(total)
    }

    /// Left-endpoint sampling of a deterministic continuous path on a grid.
    pub fn from_time_function(
        xi: Arc<dyn Fn(&Rational) -> Rational + Send + Sync>,
        times: Vec<Rational>,
    ) -> Result<Self> {
        let mut values = Vec::new();
        for t in &times[..times.len() - 1] {
            let v = xi(t);
            values.push(StepValue::constant(v));
        }
        StepProcess::new(times, values)
    }

    /// Left-endpoint sampling of the Wiener path itself (the integrand of
    /// int W dW).
    pub fn sampling_wiener(times: Vec<Rational>) -> Result<Self> {
        let values = times[..times.len() - 1]
            .iter()
            .map(|t| StepValue::path_at(t.clone()))
            .collect();
        StepProcess::new(times, values)
    }
}

/// Left-endpoint step approximation of a continuous deterministic path, with
/// a certified enclosure of the squared L2 distance (interval quadrature on
/// a refinement of the grid).
pub struct TimeFn {
    pub eval: Arc<dyn Fn(&FInterval) -> FInterval + Send + Sync>,
}

pub fn step_approximate(
    xi: &TimeFn,
    times: Vec<Rational>,
) -> Result<(StepProcess, FInterval)> {
    let mut values = Vec::new();
    for t in &times[..times.len() - 1] {
        let tf = FInterval::from_rat_point(t);
        let v = (xi.eval)(&tf);
        values.push(StepValue {
            eval: {
                let v2 = v;
                Arc::new(move |_| v2)
            },
            depends: Dependence::Deterministic,
            second_moment: None,
        });
    }
    let sp = StepProcess::new(times.clone(), values)?;
    // squared L2 error by interval quadrature, each cell split 16-fold
    let mut err = FInterval::ZERO;
    for w in times.windows(2) {
        let (a, b) = (
            FInterval::from_rat_point(&w[0]),
            FInterval::from_rat_point(&w[1]),
        );
        let left = (xi.eval)(&a);
        let split = 16;
        let h = b.sub(&a).scale(1.0 / split as f64);
        for j in 0..split {
            let lo = a.add(&h.scale(j as f64));
            let cell = lo.hull(&lo.add(&h));
            let dev = (xi.eval)(&cell).sub(&left);
            err = err.add(&dev.square().mul(&h));
        }
    }
    Ok((sp, err))
}

/// The indefinite Ito integral of a step process along a sampled path:
/// cumulative sums X_i (W(t_{i+1}) - W(t_i)) on the path's grid, outward
/// rounded. Refuses when the step times are not grid points.
pub fn ito_step(x: &StepProcess, w: &WienerPath, omega: &CantorPoint) -> Result<Vec<FInterval>> {
    let g = w.grid_level;
    let scale = (1u64 << g) as f64;
    // every step time must be a grid point
    for t in x.times() {
        let tf = t.to_f64().unwrap() * scale;
        if tf.fract() != 0.0 {
            return Err(Error::GridMismatch {
                what: format!("step time {t} is not on the 2^-{g} grid"),
            });
        }
    }
    let horizon = x.horizon().to_f64().unwrap();
    let n_points = ((horizon * scale).round() as usize).min(w.values.len() - 1);
    let ctx = PathCtx { omega, path: w };
    let mut out = Vec::with_capacity(n_points + 1);
    let mut acc = FInterval::ZERO;
    out.push(acc);
    let mut seg = 0usize;
    let mut seg_value = (x.values()[0].eval)(&ctx);
    for j in 0..n_points {
        let t_j = Rational::from_integer((j as i64).into()) * pow2(-(g as i64));
        let next_seg = x.segment_of(&t_j);
        if next_seg != seg {
            seg = next_seg;
            seg_value = (x.values()[seg].eval)(&ctx);
        }
        let dw = w.values[j + 1].sub(&w.values[j]);
        acc = acc.add(&seg_value.mul(&dw));
        out.push(acc);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryReport {
    pub mc_lhs: f64,
    pub exact_rhs: f64,
    pub sigma: f64,
    pub samples: usize,
    pub within_3_sigma: bool,
}

/// Monte Carlo check of E(int X dW)^2 = E int X^2 dt on seeded paths.
pub fn ito_isometry_check(
    x: &StepProcess,
    seeds: std::ops::Range<u64>,
    level: u32,
    grid_level: u32,
    tol: &Rational,
) -> Result<IsometryReport> {
    let rhs = x
        .second_moment_integral()
        .ok_or_else(|| Error::Unsupported("isometry RHS needs certified second moments".into()))?;
    let mut squares = Vec::new();
    for seed in seeds {
        let omega = CantorPoint::from_seed(seed);
        let w = crate::wiener::sample_wiener(&omega, level, crate::wiener::SampleMode::Stratified, tol)?
            .path(grid_level);
        let integral = ito_step(x, &w, &omega)?;
        let end = integral.last().unwrap().mid();
        squares.push(end * end);
    }
    let mc = mean(&squares);
    let sigma = mean_sigma(&squares);
    let rhs_f = rat_to_f64_up(&rhs);
    Ok(IsometryReport {
        mc_lhs: mc,
        exact_rhs: rhs_f,
        sigma,
        samples: squares.len(),
        within_3_sigma: (mc - rhs_f).abs() <= 3.0 * sigma,
    })
}

/// A finite adapted process on sign paths: X_k as an exact function of the
/// first k coins. Drives the exhaustive martingale inequalities.
pub struct DiscreteProcess {
    pub steps: u32,
    /// eval(bits, k) = X_k for k = 1..=steps; bits holds `steps` coins.
    pub eval: Arc<dyn Fn(&[bool], u32) -> Rational + Send + Sync>,
}

impl DiscreteProcess {
    /// |simple random walk|: a positive submartingale.
    pub fn abs_walk(steps: u32) -> Self {
        DiscreteProcess {
            steps,
            eval: Arc::new(|bits, k| {
                let mut s = 0i64;
                for &b in &bits[..k as usize] {
                    s += if b { 1 } else { -1 };
                }
                Rational::from_integer(s.abs().into())
            }),
        }
    }

    /// The signed simple random walk: a martingale.
    pub fn walk(steps: u32) -> Self {
        DiscreteProcess {
            steps,
            eval: Arc::new(|bits, k| {
                let mut s = 0i64;
                for &b in &bits[..k as usize] {
                    s += if b { 1 } else { -1 };
                }
                Rational::from_integer(s.into())
            }),
        }
    }

    pub fn constant(steps: u32, c: Rational) -> Self {
        DiscreteProcess {
            steps,
            eval: Arc::new(move |_, _| c.clone()),
        }
    }

    fn paths(&self) -> impl Iterator<Item = Vec<bool>> + '_ {
        let n = self.steps;
        (0u64..(1 << n)).map(move |mask| (0..n).map(|i| (mask >> i) & 1 == 1).collect())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubmartingaleReport {
    pub lambda: String,
    pub prob_max_ge: String,
    pub lhs: String,
    pub middle: String,
    pub e_xn: String,
    pub holds: bool,
}

/// Exhaustive check of lambda Pr(max X_k >= lambda) <= E(X_n I[max >= lambda])
/// <= E X_n for a positive submartingale, with exact rational arithmetic.
pub fn submartingale_bound(x: &DiscreteProcess, lambda: &Rational) -> SubmartingaleReport {
    let n = x.steps;
    let weight = pow2(-(n as i64));
    let mut prob = Rational::zero();
    let mut e_ind = Rational::zero();
    let mut e_xn = Rational::zero();
    for bits in x.paths() {
        let mut running_max = Rational::zero();
        let mut xn = Rational::zero();
        for k in 1..=n {
            xn = (x.eval)(&bits, k);
            if xn > running_max {
                running_max = xn.clone();
            }
        }
        if &running_max >= lambda {
            prob += weight.clone();
            e_ind += weight.clone() * xn.clone();
        }
        e_xn += weight.clone() * xn;
    }
    let lhs = lambda.clone() * prob.clone();
    SubmartingaleReport {
        lambda: lambda.to_string(),
        prob_max_ge: prob.to_string(),
        holds: lhs <= e_ind && e_ind <= e_xn,
        lhs: lhs.to_string(),
        middle: e_ind.to_string(),
        e_xn: e_xn.to_string(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleL2Report {
    pub e_max_sq: String,
    pub four_e_xn_sq: String,
    pub holds: bool,
}

/// Exhaustive check of E(max |X_k|^2) <= 4 E(X_n^2) for a martingale; the
/// right side is exported as the a-priori uniform bound used downstream.
pub fn martingale_l2_bound(x: &DiscreteProcess) -> (MartingaleL2Report, Rational) {
    let n = x.steps;
    let weight = pow2(-(n as i64));
    let mut e_max_sq = Rational::zero();
    let mut e_xn_sq = Rational::zero();
    for bits in x.paths() {
        let mut max_abs = Rational::zero();
        let mut xn = Rational::zero();
        for k in 1..=n {
            xn = (x.eval)(&bits, k);
            if xn.abs() > max_abs {
                max_abs = xn.abs();
            }
        }
        e_max_sq += weight.clone() * max_abs.clone() * max_abs;
        e_xn_sq += weight.clone() * xn.clone() * xn;
    }
    let bound = Rational::from_integer(4.into()) * e_xn_sq;
    let report = MartingaleL2Report {
        e_max_sq: e_max_sq.to_string(),
        four_e_xn_sq: bound.to_string(),
        holds: e_max_sq <= bound,
    };
    (report, bound)
}

/// A process obtained as the limit of step processes in the 2,2 norm: the
/// integral sequence is Cauchy in the sup-time L2 norm with twice the
/// certificate constant, per the isometry plus the martingale inequality.
pub struct PathProcess {
    pub approx: Arc<dyn Fn(u32) -> StepProcess + Send + Sync>,
    /// c with ||X_m - X_n||_{2,2} <= 2^-min(m,n) c, supplied by the caller.
    pub cauchy_constant: Rational,
}

impl PathProcess {
    /// The uniform-norm Cauchy constant of the integral sequence.
    pub fn integral_cauchy_constant(&self) -> Rational {
        Rational::from_integer(2.into()) * self.cauchy_constant.clone()
    }

    /// Evaluate the n-th integral approximant on one sampled path.
    pub fn integral_at(
        &self,
        n: u32,
        w: &WienerPath,
        omega: &CantorPoint,
    ) -> Result<Vec<FInterval>> {
        ito_step(&(self.approx)(n), w, omega)
    }

    /// Statistical audit of the certificate: the Monte Carlo estimate of
    /// E max |I_m - I_n|^2 must stay below the certified square, with a
    /// 5-sigma alarm. Returns Err on certified violation.
    pub fn audit_certificate(
        &self,
        m: u32,
        n: u32,
        seeds: std::ops::Range<u64>,
        level: u32,
        grid_level: u32,
        tol: &Rational,
    ) -> Result<bool> {
        let bound = self.integral_cauchy_constant()
            * pow2(-(m.min(n) as i64));
        let bound_sq = rat_to_f64_up(&(bound.clone() * bound));
        let mut sq_sups = Vec::new();
        for seed in seeds {
            let omega = CantorPoint::from_seed(seed);
            let w = crate::wiener::sample_wiener(
                &omega,
                level,
                crate::wiener::SampleMode::Stratified,
                tol,
            )?
            .path(grid_level);
            let im = self.integral_at(m, &w, &omega)?;
            let i_n = self.integral_at(n, &w, &omega)?;
            let sup = im
                .iter()
                .zip(i_n.iter())
                .map(|(a, b)| (a.mid() - b.mid()).abs())
                .fold(0.0f64, f64::max);
            sq_sups.push(sup * sup);
        }
        let est = mean(&sq_sups);
        let sigma = mean_sigma(&sq_sups).max(1e-12);
        Ok(est <= bound_sq + 5.0 * sigma)
    }
}

/// Builds the limit object from a sequence of step processes with a caller
/// certificate ||X_m - X_n||_{2,2} <= 2^-min(m,n) c.
pub fn ito_extend(
    seq: impl Fn(u32) -> StepProcess + Send + Sync + 'static,
    cauchy_constant: Rational,
) -> PathProcess {
    PathProcess {
        approx: Arc::new(seq),
        cauchy_constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{rat, rat_int};
    use crate::wiener::{sample_wiener, SampleMode};

    fn tol() -> Rational {
        rat(1, 1 << 18)
    }

    fn path_for(seed: u64, level: u32, grid: u32) -> (CantorPoint, WienerPath) {
        let omega = CantorPoint::from_seed(seed);
        let w = sample_wiener(&omega, level, SampleMode::Stratified, &tol())
            .unwrap()
            .path(grid);
        (omega, w)
    }

    #[test]
    fn constant_integrand_reproduces_path() {
        let (omega, w) = path_for(3, 6, 8);
        let x = StepProcess::constant(rat_int(1), rat_int(1));
        let integral = ito_step(&x, &w, &omega).unwrap();
        // int_0^t 1 dW = W(t): midpoints telescope exactly, enclosures widen
        // only by the accumulated outward rounding
        for (i, v) in integral.iter().enumerate() {
            assert!((v.mid() - w.values[i].mid()).abs() < 1e-9, "at {i}");
        }
        let c = StepProcess::constant(rat(3, 2), rat_int(1));
        let scaled = ito_step(&c, &w, &omega).unwrap();
        let end = scaled.last().unwrap();
        let want = w.endpoint().scale(1.5);
        assert!((end.mid() - want.mid()).abs() < 1e-9);
    }

    #[test]
    fn indicator_after_half_telescopes() {
        let (omega, w) = path_for(9, 6, 8);
        let x = StepProcess::new(
            vec![rat_int(0), rat(1, 2), rat_int(1)],
            vec![StepValue::constant(rat_int(0)), StepValue::constant(rat_int(1))],
        )
        .unwrap();
        let integral = ito_step(&x, &w, &omega).unwrap();
        // I(t) = W(t) - W(1/2) for t >= 1/2, 0 before
        let half_idx = 128;
        assert!(integral[half_idx].abs().hi < 1e-12);
        let w_half = w.values[half_idx];
        let expect = w.endpoint().sub(&w_half);
        let got = integral.last().unwrap();
        assert!((got.mid() - expect.mid()).abs() < 1e-9);
    }

    #[test]
    fn grid_and_tag_refusals() {
        let (omega, w) = path_for(1, 6, 4);
        let bad_grid = StepProcess::new(
            vec![rat_int(0), rat(1, 3), rat_int(1)],
            vec![StepValue::constant(rat_int(0)), StepValue::constant(rat_int(1))],
        )
        .unwrap();
        assert!(matches!(
            ito_step(&bad_grid, &w, &omega),
            Err(Error::GridMismatch { .. })
        ));

        // anticipating tag refused at construction
        let bad_tag = StepProcess::new(
            vec![rat_int(0), rat(1, 2), rat_int(1)],
            vec![StepValue::path_at(rat(3, 4)), StepValue::constant(rat_int(0))],
        );
        assert!(matches!(bad_tag, Err(Error::Anticipation { .. })));

        let bad_copy = StepProcess::new(
            vec![rat_int(0), rat_int(1)],
            vec![StepValue::coin(0)],
        );
        assert!(matches!(bad_copy, Err(Error::Anticipation { .. })));
    }

    #[test]
    fn step_approximation_of_linear_path() {
        // xi(t) = t, mesh 1/4: squared L2 error is exactly 1/48
        let xi = TimeFn {
            eval: Arc::new(|t| *t),
        };
        let times = vec![rat_int(0), rat(1, 4), rat(1, 2), rat(3, 4), rat_int(1)];
        let (sp, err) = step_approximate(&xi, times).unwrap();
        assert_eq!(sp.values().len(), 4);
        let exact = 1.0 / 48.0;
        assert!(err.contains(exact), "{err:?}");
        assert!(err.width() < 0.01);

        // mesh halving quarters the squared error for Lipschitz paths
        let times8: Vec<Rational> = (0..=8).map(|i| rat(i, 8)).collect();
        let (_, err8) = step_approximate(&xi, times8).unwrap();
        assert!(err8.contains(1.0 / 192.0));
        assert!((err.mid() / err8.mid() - 4.0).abs() < 0.5);

        // constant path: identical step process, zero error
        let c = TimeFn {
            eval: Arc::new(|_| FInterval::point(2.5)),
        };
        let (_, errc) = step_approximate(&c, vec![rat_int(0), rat(1, 2), rat_int(1)]).unwrap();
        assert!(errc.abs().hi < 1e-15);
    }

    #[test]
    fn isometry_constant_one() {
        let x = StepProcess::constant(rat_int(1), rat_int(1));
        let rep = ito_isometry_check(&x, 0..256, 6, 6, &tol()).unwrap();
        assert!((rep.exact_rhs - 1.0).abs() < 1e-12);
        assert!(rep.within_3_sigma, "{rep:?}");
    }

    #[test]
    fn isometry_indicator_half() {
        let x = StepProcess::new(
            vec![rat_int(0), rat(1, 2), rat_int(1)],
            vec![StepValue::constant(rat_int(0)), StepValue::constant(rat_int(1))],
        )
        .unwrap();
        assert_eq!(x.second_moment_integral().unwrap(), rat(1, 2));
        let rep = ito_isometry_check(&x, 0..512, 6, 6, &tol()).unwrap();
        assert!(rep.within_3_sigma, "{rep:?}");
    }

    #[test]
    fn isometry_coin_integrand() {
        // X_0 = +-1 fair coin on [0,1]: RHS = 1
        let x = StepProcess::new(vec![rat_int(0), rat_int(1)], vec![StepValue::coin(1)]).unwrap();
        assert_eq!(x.second_moment_integral().unwrap(), rat_int(1));
        let rep = ito_isometry_check(&x, 0..256, 6, 6, &tol()).unwrap();
        assert!(rep.within_3_sigma, "{rep:?}");
    }

    #[test]
    fn martingale_property_of_integral() {
        // ensemble mean of the integral at grid times stays near 0
        let x = StepProcess::sampling_wiener(vec![rat_int(0), rat(1, 2), rat_int(1)]).unwrap();
        let mut ends = Vec::new();
        let mut mids = Vec::new();
        for seed in 0..512u64 {
            let (omega, w) = path_for(seed, 6, 6);
            let integral = ito_step(&x, &w, &omega).unwrap();
            mids.push(integral[32].mid());
            ends.push(integral[64].mid());
        }
        for xs in [&mids, &ends] {
            let m = mean(xs);
            let s = mean_sigma(xs);
            assert!(m.abs() <= 3.0 * s, "mean {m} sigma {s}");
        }
    }

    #[test]
    fn submartingale_inequality_exact() {
        // |walk| over 4 steps at lambda = 2: the exhaustive oracle gives
        // Pr(max >= 2) = 3/4 and E|S_4| = 3/2, and the chain holds
        let x = DiscreteProcess::abs_walk(4);
        let rep = submartingale_bound(&x, &rat_int(2));
        assert_eq!(rep.prob_max_ge, "3/4");
        assert_eq!(rep.e_xn, "3/2");
        assert!(rep.holds, "{rep:?}");

        // lambda below a constant process: lambda * 1 <= c
        let c = DiscreteProcess::constant(3, rat_int(2));
        let rep = submartingale_bound(&c, &rat_int(1));
        assert!(rep.holds);

        // lambda above the certified max: 0 <= E X_n
        let rep = submartingale_bound(&DiscreteProcess::abs_walk(4), &rat_int(9));
        assert_eq!(rep.prob_max_ge, "0");
        assert!(rep.holds);
    }

    #[test]
    fn submartingale_inequality_all_lambdas_all_sizes() {
        for n in 1..=10u32 {
            let x = DiscreteProcess::abs_walk(n);
            for num in 0..=(2 * n as i64) {
                let lambda = rat(num, 2);
                if lambda.is_zero() {
                    continue;
                }
                let rep = submartingale_bound(&x, &lambda);
                assert!(rep.holds, "n={n} lambda={lambda}: {rep:?}");
            }
        }
    }

    #[test]
    fn martingale_l2_exact() {
        // walk of 10 steps: E max^2 <= 4 E S_10^2 = 40, exhaustively
        let (rep, bound) = martingale_l2_bound(&DiscreteProcess::walk(10));
        assert!(rep.holds, "{rep:?}");
        assert_eq!(bound, rat_int(40));

        let (rep, bound) = martingale_l2_bound(&DiscreteProcess::constant(4, rat_int(0)));
        assert!(rep.holds);
        assert_eq!(bound, rat_int(0));

        let (rep, bound) = martingale_l2_bound(&DiscreteProcess::walk(1));
        assert!(rep.holds);
        assert_eq!(bound, rat_int(4));
    }

    #[test]
    fn uniform_norm_inequality() {
        // ||int X dW||_{inf,2}^2 <= (2 sqrt(T))^2 ||X||_{inf,2}^2 for the
        // deterministic X = 1 on [0,1]: E max |W(t)|^2 <= 4, with a 5-sigma
        // alarm on the Monte Carlo side
        let x = StepProcess::constant(rat_int(1), rat_int(1));
        let mut max_sq = Vec::new();
        for seed in 0..512u64 {
            let (omega, w) = path_for(seed + 5, 7, 7);
            let integral = ito_step(&x, &w, &omega).unwrap();
            let sup = integral
                .iter()
                .map(|v| v.mid().abs())
                .fold(0.0f64, f64::max);
            max_sq.push(sup * sup);
        }
        let est = mean(&max_sq);
        let sigma = mean_sigma(&max_sq);
        assert!(est <= 4.0 + 5.0 * sigma, "E max^2 = {est}");
        // the true value E max W^2 ~ 1.47 sits well inside the bound
        assert!(est > 0.5);
    }

    #[test]
    fn extension_constant_sequence() {
        let pp = ito_extend(
            |_| StepProcess::constant(rat_int(1), rat_int(1)),
            Rational::zero(),
        );
        let (omega, w) = path_for(17, 6, 7);
        let i0 = pp.integral_at(0, &w, &omega).unwrap();
        let direct = ito_step(&StepProcess::constant(rat_int(1), rat_int(1)), &w, &omega).unwrap();
        for (a, b) in i0.iter().zip(direct.iter()) {
            assert_eq!(a.mid(), b.mid());
        }
        // certificate constant doubles into the output bound
        let pp2 = ito_extend(
            |_| StepProcess::constant(rat_int(1), rat_int(1)),
            rat(3, 1),
        );
        assert_eq!(pp2.integral_cauchy_constant(), rat_int(6));
        assert!(pp
            .audit_certificate(1, 3, 0..64, 6, 7, &tol())
            .unwrap());
    }

    #[test]
    fn integral_of_w_matches_closed_form() {
        // int_0^1 W dW = (W(1)^2 - 1)/2: fine-mesh reference, statistical
        let times: Vec<Rational> = (0..=32).map(|i| rat(i, 32)).collect();
        let x = StepProcess::sampling_wiener(times).unwrap();
        let mut devs = Vec::new();
        for seed in 0..384u64 {
            let (omega, w) = path_for(seed * 3 + 1, 8, 8);
            let integral = ito_step(&x, &w, &omega).unwrap();
            let end = integral.last().unwrap().mid();
            let w1 = w.endpoint().mid();
            devs.push(end - (w1 * w1 - 1.0) / 2.0);
        }
        let m = mean(&devs);
        let s = mean_sigma(&devs);
        // the discretization bias of the 1/32 mesh is within the band
        assert!(m.abs() <= 3.0 * s + 0.06, "mean {m} sigma {s}");
    }

    #[test]
    fn refining_path_level_keeps_enclosure() {
        // few-segment integrand: the coarse-level integral enclosure padded
        // by sum |X_i| 2 slack contains the fine-level integral
        let x = StepProcess::new(
            vec![rat_int(0), rat(1, 2), rat_int(1)],
            vec![StepValue::constant(rat_int(1)), StepValue::constant(rat_int(-2))],
        )
        .unwrap();
        for seed in 40..48u64 {
            let omega = CantorPoint::from_seed(seed);
            let coarse = sample_wiener(&omega, 6, SampleMode::Stratified, &tol())
                .unwrap()
                .path(8);
            let fine = sample_wiener(&omega, 9, SampleMode::Stratified, &tol())
                .unwrap()
                .path(8);
            let ic = ito_step(&x, &coarse, &omega).unwrap();
            let if_ = ito_step(&x, &fine, &omega).unwrap();
            let pad = 3.0 * 2.0 * coarse.uniform_slack * 2.0; // sum|X_i| = 3, 2 increments each
            let (a, b) = (ic.last().unwrap(), if_.last().unwrap());
            assert!(a.pad(pad).contains_interval(b), "seed {seed}");
        }
    }
}
