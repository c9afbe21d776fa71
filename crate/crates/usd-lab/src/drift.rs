//! Stochastic tools behind the analysis: the lazy biased random walk with
//! its monotone coupling, Bernstein's inequality as a numeric bound, and the
//! Oliveto–Witt drift-theorem condition checker.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{Advance, CountSim};
use crate::model::{expected_opinion_drift, Configuration};
use crate::{Error, LogBase, Result};

/// Per-step parameter schedule: a constant, or a recorded table (clamped to
/// its last entry beyond the end).
#[derive(Debug, Clone)]
pub enum Schedule {
    Constant(f64),
    Table(Vec<f64>),
}

impl Schedule {
    pub fn at(&self, t: u64) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Table(tab) => {
                let idx = (t as usize).min(tab.len().saturating_sub(1));
                tab[idx]
            }
        }
    }

    fn max(&self) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Table(tab) => tab.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Parameters of the lazy biased walk: move probability `p(t)` bounded by
/// `p_max`, bias `q(t)` bounded by `q_max > 0`, simulated up to `horizon`.
#[derive(Debug, Clone)]
pub struct WalkParams {
    pub p: Schedule,
    pub q: Schedule,
    pub p_max: f64,
    pub q_max: f64,
    pub horizon: u64,
}

impl WalkParams {
    /// Constant-parameter walk with `p_max = p`, `q_max = q`.
    pub fn constant(p: f64, q: f64, horizon: u64) -> Result<Self> {
        let params = Self {
            p: Schedule::Constant(p),
            q: Schedule::Constant(q),
            p_max: p,
            q_max: q,
            horizon,
        };
        params.validate()?;
        Ok(params)
    }

    /// Walk driven by recorded per-step tables.
    pub fn from_tables(p: Vec<f64>, q: Vec<f64>, horizon: u64) -> Result<Self> {
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::InvalidWalkParams(
                "schedule tables must be non-empty and equal length".into(),
            ));
        }
        let p_max = Schedule::Table(p.clone()).max();
        let q_max = Schedule::Table(q.clone()).max();
        let params = Self {
            p: Schedule::Table(p),
            q: Schedule::Table(q),
            p_max,
            q_max,
            horizon,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_max > 0.0) {
            return Err(Error::InvalidWalkParams(format!(
                "q_max must be positive, got {}",
                self.q_max
            )));
        }
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(Error::InvalidWalkParams(format!(
                "p_max must lie in (0, 1], got {}",
                self.p_max
            )));
        }
        let check = |t: u64| -> Result<()> {
            let (p_t, q_t) = (self.p.at(t), self.q.at(t));
            if !(0.0..=self.p_max).contains(&p_t) {
                return Err(Error::InvalidWalkParams(format!(
                    "p({t}) = {p_t} outside [0, p_max = {}]",
                    self.p_max
                )));
            }
            if q_t < -p_t || q_t > self.q_max {
                return Err(Error::InvalidWalkParams(format!(
                    "q({t}) = {q_t} outside [-p(t), q_max = {}]",
                    self.q_max
                )));
            }
            Ok(())
        };
        match &self.p {
            Schedule::Constant(_) => check(0)?,
            Schedule::Table(tab) => {
                for t in 0..tab.len() as u64 {
                    check(t)?;
                }
            }
        }
        Ok(())
    }
}

fn validate_step_probs(p_t: f64, q_t: f64) -> Result<()> {
    let stay = 1.0 - p_t;
    let up = (p_t + q_t) / 2.0;
    let down = (p_t - q_t) / 2.0;
    for (name, v) in [("1-p", stay), ("(p+q)/2", up), ("(p-q)/2", down)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidWalkParams(format!(
                "step probability {name} = {v} outside [0, 1] (p = {p_t}, q = {q_t})"
            )));
        }
    }
    Ok(())
}

/// One step of the walk: stay with probability `1 - p_t`, move `+1` with
/// `(p_t + q_t)/2`, move `-1` with `(p_t - q_t)/2`.
pub fn step_walk<R: Rng + ?Sized>(y: i64, p_t: f64, q_t: f64, rng: &mut R) -> Result<i64> {
    validate_step_probs(p_t, q_t)?;
    let r: f64 = rng.random();
    Ok(if r < 1.0 - p_t {
        y
    } else if r < 1.0 - p_t + (p_t + q_t) / 2.0 {
        y + 1
    } else {
        y - 1
    })
}

/// One coupled step of `(Y, Y~)` from a single shared uniform draw, where
/// `Y` moves with bias `q_t` and `Y~` with the uniform bound `q_max`.
///
/// Thresholds: both stay below `1 - p`; both move up below
/// `1 - p + (p + q_t)/2`; `Y` down but `Y~` up below `1 - p + (p + q_max)/2`;
/// both down otherwise. Consequently `Y` stays iff `Y~` stays, `Y` up implies
/// `Y~` up, and pathwise `Y~(t) >= Y(t)` from equal starts.
pub fn coupled_step<R: Rng + ?Sized>(
    y: i64,
    y_tilde: i64,
    p_t: f64,
    q_t: f64,
    q_max: f64,
    rng: &mut R,
) -> Result<(i64, i64)> {
    if q_t > q_max {
        return Err(Error::InvalidWalkParams(format!(
            "q(t) = {q_t} exceeds q_max = {q_max}"
        )));
    }
    validate_step_probs(p_t, q_t)?;
    validate_step_probs(p_t, q_max)?;
    let r: f64 = rng.random();
    let stay = 1.0 - p_t;
    Ok(if r < stay {
        (y, y_tilde)
    } else if r < stay + (p_t + q_t) / 2.0 {
        (y + 1, y_tilde + 1)
    } else if r < stay + (p_t + q_max) / 2.0 {
        (y - 1, y_tilde + 1)
    } else {
        (y - 1, y_tilde - 1)
    })
}

/// Bernstein tail bound for a sum of independent zero-mean variables with
/// `|X_i| <= M` and total variance `sum_var`:
/// `exp(-(t^2 / 2) / (sum_var + M t / 3))`.
pub fn bernstein_tail(t: f64, sum_var: f64, m: f64) -> f64 {
    debug_assert!(t > 0.0 && sum_var >= 0.0 && m > 0.0);
    (-(t * t / 2.0) / (sum_var + m * t / 3.0)).exp()
}

/// Inputs of the drift-theorem checker: interval `[a, b]`, drift bound
/// `epsilon`, scaling factor `r`.
#[derive(Debug, Clone, Copy)]
pub struct DriftTheoremInputs {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub r: f64,
}

impl DriftTheoremInputs {
    pub fn ell(&self) -> f64 {
        self.b - self.a
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a < self.b) {
            return Err(Error::InvalidArgument(format!(
                "need a < b, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if !(self.r >= 1.0) {
            return Err(Error::InvalidArgument("scaling factor r must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of [`oliveto_witt_check`].
///
/// Conditions (i) (drift at least `epsilon` inside the interval) and (ii)
/// (sub-exponential jumps) are properties of the supplied process that the
/// caller asserts; [`verify_subexponential_jumps`] spot-checks (ii)
/// empirically. Condition (iii) is evaluated numerically here.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DriftBoundReport {
    pub ell: f64,
    /// `r^2`, the left side of condition (iii).
    pub r_squared: f64,
    /// `epsilon * ell / (132 log(r / epsilon))`, the right side of condition
    /// (iii); `None` when `log(r / epsilon) <= 0`, which fails the condition
    /// trivially.
    pub condition_iii_upper: Option<f64>,
    pub condition_iii_ok: bool,
    /// `-epsilon * ell / (132 r^2)`: log of the probability-bound scale for
    /// hitting the far end early.
    pub bound_exponent: f64,
    /// `exp(bound_exponent)`.
    pub bound: f64,
    pub log_base: &'static str,
}

/// Evaluate condition (iii) of the Oliveto–Witt hitting-time theorem and the
/// resulting probability-bound scale `exp(-epsilon ell / (132 r^2))`.
pub fn oliveto_witt_check(
    inputs: &DriftTheoremInputs,
    log_base: LogBase,
) -> Result<DriftBoundReport> {
    inputs.validate()?;
    let ell = inputs.ell();
    let r_squared = inputs.r * inputs.r;
    let log_term = log_base.log(inputs.r / inputs.epsilon);
    let condition_iii_upper = (log_term > 0.0).then(|| inputs.epsilon * ell / (132.0 * log_term));
    let condition_iii_ok = match condition_iii_upper {
        Some(upper) => 1.0 <= r_squared && r_squared <= upper,
        None => false,
    };
    let bound_exponent = -inputs.epsilon * ell / (132.0 * r_squared);
    Ok(DriftBoundReport {
        ell,
        r_squared,
        condition_iii_upper,
        condition_iii_ok,
        bound_exponent,
        bound: bound_exponent.exp(),
        log_base: log_base.name(),
    })
}

/// Empirical check of the sub-exponential jump condition
/// `P[|X(t+1) - X(t)| >= j r] <= e^{-j}` from sampled absolute jumps.
#[derive(Debug, Clone, serde::Serialize)]
pub struct JumpCheck {
    pub j: u32,
    pub frequency: f64,
    pub bound: f64,
    pub ok: bool,
}

pub fn verify_subexponential_jumps(abs_jumps: &[f64], r: f64, j_max: u32) -> Vec<JumpCheck> {
    let total = abs_jumps.len().max(1) as f64;
    (0..=j_max)
        .map(|j| {
            let threshold = j as f64 * r;
            let count = abs_jumps.iter().filter(|&&x| x >= threshold).count();
            let frequency = count as f64 / total;
            let bound = (-(j as f64)).exp();
            JumpCheck {
                j,
                frequency,
                bound,
                ok: frequency <= bound,
            }
        })
        .collect()
}

/// Monte Carlo estimate of the probability that the walk reaches `target`
/// within `min(target / (2 q_max), horizon)` steps.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HittingReport {
    pub target: i64,
    pub reps: u64,
    pub hits: u64,
    pub empirical_prob: f64,
    /// Steps simulated per replicate.
    pub window: u64,
    /// Whether `target >= 32 ((p - q^2)/(2q) + 2/3) log n` holds for the
    /// uniform bounds, the hypothesis under which the hitting probability is
    /// at most `n^-2`.
    pub hypothesis_satisfied: bool,
    pub hypothesis_threshold: f64,
    /// `n^-2`, the guaranteed ceiling when the hypothesis holds.
    pub guarantee: f64,
    /// Bernstein-route bound on the per-window hitting probability:
    /// `exp(-(target/8) / ((p - q^2)/(2q) + 2/3))`.
    pub bernstein_bound: f64,
    pub log_base: &'static str,
}

pub fn hitting_time_monte_carlo(
    params: &WalkParams,
    target: i64,
    reps: u64,
    n: u64,
    seed: u64,
    log_base: LogBase,
) -> Result<HittingReport> {
    params.validate()?;
    if target < 1 {
        return Err(Error::InvalidArgument("target must be >= 1".into()));
    }
    let window = ((target as f64 / (2.0 * params.q_max)).floor() as u64).min(params.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..reps {
        let mut y = 0i64;
        for t in 0..window {
            y = step_walk(y, params.p.at(t), params.q.at(t), &mut rng)?;
            if y >= target {
                hits += 1;
                break;
            }
        }
    }
    let scale = (params.p_max - params.q_max * params.q_max) / (2.0 * params.q_max) + 2.0 / 3.0;
    let hypothesis_threshold = 32.0 * scale * log_base.log(n as f64);
    Ok(HittingReport {
        target,
        reps,
        hits,
        empirical_prob: hits as f64 / reps as f64,
        window,
        hypothesis_satisfied: target as f64 >= hypothesis_threshold,
        hypothesis_threshold,
        guarantee: 1.0 / (n as f64 * n as f64),
        bernstein_bound: (-(target as f64 / 8.0) / scale).exp(),
        log_base: log_base.name(),
    })
}

/// Record the per-interaction `(p(t), q(t))` schedule of a chosen opinion's
/// count along one simulated trajectory, so the walk module can replay a
/// real parameter path. `p(t) = P(+1) + P(-1)` and `q(t) = P(+1) - P(-1)`
/// evaluated in the configuration after `t` interactions.
pub fn usd_opinion_schedule(
    start: &Configuration,
    opinion: usize,
    steps: u64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    const CAP: u64 = 10_000_000;
    if steps > CAP {
        return Err(Error::StepCapExceeded { steps, cap: CAP });
    }
    if opinion >= start.k() {
        return Err(Error::IndexOutOfRange {
            index: opinion,
            k: start.k(),
        });
    }
    let mut sim = CountSim::new(start, false, seed)?;
    let mut p = Vec::with_capacity(steps as usize);
    let mut q = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        let c = sim.configuration();
        let d = expected_opinion_drift(&c, opinion)?;
        p.push(d.p_up + d.p_down);
        q.push(d.p_up - d.p_down);
        if sim.is_absorbing() {
            break;
        }
        let next = sim.interactions() + 1;
        let _ = sim.advance_productive(next);
    }
    Ok((p, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_lazy_walk_stays() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(step_walk(3, 0.0, 0.0, &mut rng).unwrap(), 3);
        }
    }

    #[test]
    fn deterministic_ascent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut y = 0i64;
        for _ in 0..50 {
            y = step_walk(y, 1.0, 1.0, &mut rng).unwrap();
        }
        assert_eq!(y, 50);
    }

    #[test]
    fn invalid_probabilities_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(step_walk(0, 0.5, 0.7, &mut rng).is_err()); // (p-q)/2 < 0
        assert!(step_walk(0, 1.5, 0.0, &mut rng).is_err());
        assert!(step_walk(0, 0.5, -0.7, &mut rng).is_err());
    }

    #[test]
    fn unbiased_lazy_walk_moments() {
        // p = 0.5, q = 0: after t steps mean 0, variance p*t.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (steps, reps) = (10_000u64, 10_000u64);
        let mut sum = 0f64;
        let mut sum_sq = 0f64;
        for _ in 0..reps {
            let mut y = 0i64;
            for _ in 0..steps {
                y = step_walk(y, 0.5, 0.0, &mut rng).unwrap();
            }
            sum += y as f64;
            sum_sq += (y * y) as f64;
        }
        let mean = sum / reps as f64;
        let var = sum_sq / reps as f64 - mean * mean;
        let expect_var = 0.5 * steps as f64;
        // mean has stddev sqrt(var/reps)
        let sigma_mean = (expect_var / reps as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean}");
        // variance estimate is loose; 5% is plenty at these sizes
        assert!((var - expect_var).abs() < 0.05 * expect_var, "var {var}");
    }

    #[test]
    fn coupling_at_q_max_moves_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut y, mut yt) = (0i64, 0i64);
        for _ in 0..10_000 {
            (y, yt) = coupled_step(y, yt, 0.6, 0.2, 0.2, &mut rng).unwrap();
            assert_eq!(y, yt);
        }
    }

    #[test]
    fn coupling_dominates_pathwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let (mut y, mut yt) = (0i64, 0i64);
            for _ in 0..500 {
                (y, yt) = coupled_step(y, yt, 0.8, -0.3, 0.4, &mut rng).unwrap();
                assert!(yt >= y);
            }
        }
    }

    #[test]
    fn coupling_extreme_parameters() {
        // p=1, q=-1: Y always down; Y~ with q_max=1 is a fair +-1 walk.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let steps = 100_000u64;
        let (mut y, mut yt) = (0i64, 0i64);
        let mut ups = 0u64;
        for _ in 0..steps {
            let prev = yt;
            (y, yt) = coupled_step(y, yt, 1.0, -1.0, 1.0, &mut rng).unwrap();
            if yt > prev {
                ups += 1;
            }
        }
        assert_eq!(y, -(steps as i64));
        let sigma = (steps as f64 * 0.25).sqrt();
        assert!((ups as f64 - steps as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn bernstein_examples_and_monotonicity() {
        // Vacuous as t -> 0+.
        assert!(bernstein_tail(1e-12, 1.0, 1.0) > 0.999_999);
        // Direct substitution: sum_var=0, M=1, t=6 -> exp(-18/2)/... = exp(-9).
        assert!((bernstein_tail(6.0, 0.0, 1.0) - (-9.0f64).exp()).abs() < 1e-15);
        // Monotone decreasing in t, increasing in sum_var and M.
        let mut prev = 1.0f64;
        for i in 1..=100 {
            let t = i as f64 * 0.3;
            let b = bernstein_tail(t, 2.0, 1.5);
            assert!(b < prev);
            prev = b;
        }
        for i in 1..100 {
            let v = i as f64;
            assert!(bernstein_tail(3.0, v + 1.0, 1.0) > bernstein_tail(3.0, v, 1.0));
            assert!(bernstein_tail(3.0, 1.0, v + 1.0) > bernstein_tail(3.0, 1.0, v));
        }
    }

    #[test]
    fn drift_bound_matches_hand_instantiation() {
        // ell = 20 * 132 * sqrt(n ln n), eps = sqrt(ln n / n), r = sqrt(5)
        // gives exponent exactly -4 ln n.
        for n in [10_000f64, 1_000_000f64] {
            let eps = (n.ln() / n).sqrt();
            let ell = 20.0 * 132.0 * (n * n.ln()).sqrt();
            let inputs = DriftTheoremInputs {
                a: 0.0,
                b: ell,
                epsilon: eps,
                r: 5f64.sqrt(),
            };
            let report = oliveto_witt_check(&inputs, LogBase::Natural).unwrap();
            assert!(
                (report.bound_exponent - (-4.0 * n.ln())).abs() < 1e-9 * n.ln(),
                "exponent {} vs {}",
                report.bound_exponent,
                -4.0 * n.ln()
            );
            assert!(report.condition_iii_ok);
        }
    }

    #[test]
    fn drift_bound_triviality_branch() {
        // r = 1, epsilon = 1 makes log(r/eps) = 0: condition (iii) fails.
        let inputs = DriftTheoremInputs {
            a: 0.0,
            b: 132.0,
            epsilon: 1.0,
            r: 1.0,
        };
        let report = oliveto_witt_check(&inputs, LogBase::Natural).unwrap();
        assert!(!report.condition_iii_ok);
        assert!(report.condition_iii_upper.is_none());
    }

    #[test]
    fn hitting_window_too_short_for_ascent() {
        // Deterministic ascent needs `target` steps but the window is
        // target/2: the target is never reached.
        let params = WalkParams::constant(1.0, 1.0, u64::MAX >> 1).unwrap();
        let report =
            hitting_time_monte_carlo(&params, 10, 1000, 1000, 9, LogBase::Natural).unwrap();
        assert_eq!(report.window, 5);
        assert_eq!(report.hits, 0);
    }

    #[test]
    fn nonpositive_bias_rejected() {
        assert!(WalkParams::constant(0.5, 0.0, 100).is_err());
        assert!(WalkParams::constant(0.5, -0.1, 100).is_err());
    }

    #[test]
    fn subexponential_jump_tally() {
        let jumps = vec![0.5f64; 99].into_iter().chain([10.0]).collect::<Vec<_>>();
        let checks = verify_subexponential_jumps(&jumps, 3.0, 3);
        assert!(checks[0].ok); // j=0: freq 1 <= 1
        assert_eq!(checks[1].frequency, 0.01);
        assert!(checks[1].ok); // 0.01 <= e^-1
        assert!(checks[3].ok); // 10 >= 9: freq 0.01 <= e^-3 ~ 0.0498
    }

    #[test]
    fn usd_schedule_replay() {
        let start = Configuration::new(vec![40, 30, 30], 0).unwrap();
        let (p, q) = usd_opinion_schedule(&start, 0, 500, 11).unwrap();
        assert_eq!(p.len(), q.len());
        assert!(!p.is_empty());
        // Probabilities are valid per step and q(0) matches the closed form:
        // u(0) = 0 so P(+1) = 0 and q(0) = -p(0).
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!((q[0] + p[0]).abs() < 1e-15);
        for (pt, qt) in p.iter().zip(&q) {
            assert!(qt.abs() <= pt + 1e-15);
        }
    }
}
