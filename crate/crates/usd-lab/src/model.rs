//! Configurations of the undecided-state dynamics, the pairwise transition
//! function, exact interaction-event probabilities, and closed-form one-step
//! drift expectations.
//!
//! Everything here is a pure value-level computation. Each probability and
//! drift is available in double precision (for the simulation engine) and in
//! exact rational arithmetic (for the oracle and for unit tests); the two
//! routes are checked against each other in the test suite.
//!
//! Opinions are indexed `0..k` internally. User-facing output (CLI, CSV)
//! labels them `1..=k`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::{Error, Result};

/// Exact rational scalar used by the oracle and the exact drift routes.
pub type Rat = BigRational;

/// Build an exact rational from an integer numerator and denominator.
pub fn rat(num: i128, den: i128) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// State of a single agent: one of `k` opinions or undecided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentState {
    Opinion(usize),
    Undecided,
}

/// The pairwise transition function.
///
/// Two distinct opinions annihilate into undecided; a decided agent recruits
/// an undecided one; every other pair is left unchanged. Symmetric in its
/// effect on counts.
pub fn transition(s1: AgentState, s2: AgentState, k: usize) -> Result<(AgentState, AgentState)> {
    for s in [s1, s2] {
        if let AgentState::Opinion(i) = s {
            if i >= k {
                return Err(Error::InvalidState { index: i, k });
            }
        }
    }
    Ok(match (s1, s2) {
        (AgentState::Opinion(a), AgentState::Opinion(b)) if a != b => {
            (AgentState::Undecided, AgentState::Undecided)
        }
        (AgentState::Opinion(a), AgentState::Undecided) => {
            (AgentState::Opinion(a), AgentState::Opinion(a))
        }
        (AgentState::Undecided, AgentState::Opinion(b)) => {
            (AgentState::Opinion(b), AgentState::Opinion(b))
        }
        identity => identity,
    })
}

/// Complete system state on the clique: one count per opinion plus the
/// undecided count. `sum(counts) + undecided == n` always holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    counts: Vec<u64>,
    undecided: u64,
    n: u64,
}

impl Configuration {
    /// Build a configuration from opinion counts and the undecided count.
    /// The population size is the sum.
    pub fn new(counts: Vec<u64>, undecided: u64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidConfiguration(
                "need at least one opinion (k >= 1)".into(),
            ));
        }
        let sum: u64 = counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::InvalidConfiguration("count sum overflows u64".into()))?;
        let n = sum
            .checked_add(undecided)
            .ok_or_else(|| Error::InvalidConfiguration("population overflows u64".into()))?;
        if n == 0 {
            return Err(Error::InvalidConfiguration("population is empty".into()))?;
        }
        Ok(Self {
            counts,
            undecided,
            n,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn undecided(&self) -> u64 {
        self.undecided
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, i: usize) -> Result<u64> {
        self.counts
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: i,
                k: self.k(),
            })
    }

    /// `max_i x_i - min_j x_j`; 0 when k = 1.
    pub fn max_pairwise_delta(&self) -> u64 {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let min = self.counts.iter().copied().min().unwrap_or(0);
        max - min
    }

    /// Majority-referenced difference `max_{j>=2}(x_1 - x_j)` keyed to the
    /// initial-ordering labels (opinion 1 is index 0). Negative when every
    /// other opinion outnumbers opinion 1; 0 when k = 1.
    pub fn majority_delta(&self) -> i64 {
        match self.counts[1..].iter().copied().min() {
            Some(min_rest) => self.counts[0] as i64 - min_rest as i64,
            None => 0,
        }
    }

    /// Label (1-based) of the largest count, smallest label on ties.
    pub fn argmax_label(&self) -> usize {
        let mut best = 0usize;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best + 1
    }

    /// True iff no event with positive probability changes the configuration:
    /// monochromatic (`x_i = n`) or all-undecided (`u = n`).
    pub fn is_absorbing(&self) -> bool {
        self.undecided == self.n || self.counts.iter().any(|&c| c == self.n)
    }

    /// Winner under the stabilization convention: the monochromatic opinion
    /// (0-based), or `None` for the all-undecided absorbing state. `None` if
    /// not absorbing.
    pub fn winner(&self) -> Option<usize> {
        if self.undecided == self.n {
            return None;
        }
        self.counts.iter().position(|&c| c == self.n)
    }

    /// Number of opinions with positive support.
    pub fn alive_opinions(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let counts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        write!(f, "({}|u={})", counts.join(","), self.undecided)
    }
}

/// The four interaction classes, canonicalized as unordered pairs.
///
/// The scheduler draws an ordered pair of distinct agents uniformly; the
/// transition is symmetric in its effect on counts, so cross and recruit
/// events carry a doubled weight and `CrossOpinion(i, j)` always has `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// Two agents of the same opinion meet; no-op.
    SameOpinion(usize),
    /// Agents of two distinct opinions meet; both become undecided.
    CrossOpinion(usize, usize),
    /// An opinion-`i` agent meets an undecided agent, which adopts opinion `i`.
    Recruit(usize),
    /// Two undecided agents meet; no-op.
    BothUndecided,
}

impl EventKind {
    /// Normalize a cross pair to `i < j`.
    pub fn cross(i: usize, j: usize) -> Self {
        if i < j {
            EventKind::CrossOpinion(i, j)
        } else {
            EventKind::CrossOpinion(j, i)
        }
    }

    /// Change in the undecided count caused by this event.
    pub fn undecided_change(&self) -> i64 {
        match self {
            EventKind::CrossOpinion(_, _) => 2,
            EventKind::Recruit(_) => -1,
            _ => 0,
        }
    }

    /// Change in `x_i` caused by this event.
    pub fn opinion_change(&self, i: usize) -> i64 {
        match *self {
            EventKind::CrossOpinion(a, b) if a == i || b == i => -1,
            EventKind::Recruit(a) if a == i => 1,
            _ => 0,
        }
    }

    /// True if the event leaves every count unchanged.
    pub fn is_noop(&self) -> bool {
        matches!(self, EventKind::SameOpinion(_) | EventKind::BothUndecided)
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventKind::SameOpinion(i) => write!(f, "same({})", i + 1),
            EventKind::CrossOpinion(i, j) => write!(f, "cross({},{})", i + 1, j + 1),
            EventKind::Recruit(i) => write!(f, "recruit({})", i + 1),
            EventKind::BothUndecided => write!(f, "both-undecided"),
        }
    }
}

fn require_pair_population(c: &Configuration) -> Result<()> {
    if c.n() < 2 {
        return Err(Error::DegeneratePopulation { n: c.n() });
    }
    Ok(())
}

/// Integer weight of each event class out of `n(n-1)` ordered pairs.
///
/// Only events with positive weight are returned. Weights sum to exactly
/// `n(n-1)`.
pub fn event_weights(c: &Configuration) -> Result<Vec<(EventKind, u128)>> {
    require_pair_population(c)?;
    let u = c.undecided() as u128;
    let k = c.k();
    let mut out = Vec::new();
    for i in 0..k {
        let xi = c.counts()[i] as u128;
        if xi >= 2 {
            out.push((EventKind::SameOpinion(i), xi * (xi - 1)));
        }
    }
    for i in 0..k {
        let xi = c.counts()[i] as u128;
        if xi == 0 {
            continue;
        }
        for j in (i + 1)..k {
            let xj = c.counts()[j] as u128;
            if xj > 0 {
                out.push((EventKind::CrossOpinion(i, j), 2 * xi * xj));
            }
        }
    }
    if u > 0 {
        for i in 0..k {
            let xi = c.counts()[i] as u128;
            if xi > 0 {
                out.push((EventKind::Recruit(i), 2 * xi * u));
            }
        }
        if u >= 2 {
            out.push((EventKind::BothUndecided, u * (u - 1)));
        }
    }
    Ok(out)
}

/// Event probabilities in double precision. The weights are exact integers;
/// only the final division rounds.
pub fn event_probabilities(c: &Configuration) -> Result<Vec<(EventKind, f64)>> {
    let total = ordered_pairs(c.n()) as f64;
    Ok(event_weights(c)?
        .into_iter()
        .map(|(e, w)| (e, w as f64 / total))
        .collect())
}

/// Event probabilities in exact rational arithmetic; they sum to exactly 1.
pub fn event_probabilities_exact(c: &Configuration) -> Result<Vec<(EventKind, Rat)>> {
    let total = BigInt::from(ordered_pairs(c.n()));
    Ok(event_weights(c)?
        .into_iter()
        .map(|(e, w)| (e, Rat::new(BigInt::from(w), total.clone())))
        .collect())
}

fn ordered_pairs(n: u64) -> u128 {
    (n as u128) * (n as u128 - 1)
}

/// Apply one interaction event to a configuration.
pub fn apply_event(c: &Configuration, event: EventKind) -> Result<Configuration> {
    let infeasible = |reason: &str| Error::InfeasibleEvent {
        event: event.to_string(),
        reason: reason.into(),
    };
    let k = c.k();
    let check = |i: usize| -> Result<()> {
        if i >= k {
            Err(Error::IndexOutOfRange { index: i, k })
        } else {
            Ok(())
        }
    };
    let mut counts = c.counts().to_vec();
    let mut undecided = c.undecided();
    match event {
        EventKind::SameOpinion(i) => {
            check(i)?;
            if counts[i] < 2 {
                return Err(infeasible("needs two agents of the opinion"));
            }
        }
        EventKind::BothUndecided => {
            if undecided < 2 {
                return Err(infeasible("needs two undecided agents"));
            }
        }
        EventKind::CrossOpinion(i, j) => {
            check(i)?;
            check(j)?;
            if i == j {
                return Err(Error::InvalidPair(i));
            }
            if counts[i] == 0 || counts[j] == 0 {
                return Err(infeasible("both opinions need positive support"));
            }
            counts[i] -= 1;
            counts[j] -= 1;
            undecided += 2;
        }
        EventKind::Recruit(i) => {
            check(i)?;
            if counts[i] == 0 || undecided == 0 {
                return Err(infeasible("needs a decided and an undecided agent"));
            }
            counts[i] += 1;
            undecided -= 1;
        }
    }
    Configuration::new(counts, undecided)
}

/// `sum_i x_i^2` as an exact integer.
fn sum_sq(c: &Configuration) -> u128 {
    c.counts().iter().map(|&x| (x as u128) * (x as u128)).sum()
}

/// Exact integer numerator of `E[u(t+1) - u(t)]` over denominator `n(n-1)`:
/// `2 sum_i x_i (n - u - x_i) - 2 u (n - u)`.
fn undecided_drift_numerator(c: &Configuration) -> i128 {
    let n = c.n() as i128;
    let u = c.undecided() as i128;
    let s1 = n - u; // sum of counts
    let s2 = sum_sq(c) as i128;
    2 * (s1 * s1 - s2) - 2 * u * s1
}

/// Exact one-step expectation of the change in the undecided count,
/// `E[u(t+1) - u(t) | x(t) = c]`, with the finite-n `n(n-1)` denominator.
pub fn expected_undecided_drift(c: &Configuration) -> Result<f64> {
    require_pair_population(c)?;
    Ok(undecided_drift_numerator(c) as f64 / ordered_pairs(c.n()) as f64)
}

/// Exact rational form of [`expected_undecided_drift`].
pub fn expected_undecided_drift_exact(c: &Configuration) -> Result<Rat> {
    require_pair_population(c)?;
    Ok(rat(
        undecided_drift_numerator(c),
        ordered_pairs(c.n()) as i128,
    ))
}

/// One-step drift of a single statistic together with its step probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDrift {
    /// `E[X(t+1) - X(t)]`.
    pub drift: f64,
    /// Probability the statistic increases by one.
    pub p_up: f64,
    /// Probability the statistic decreases by one.
    pub p_down: f64,
}

/// Exact rational counterpart of [`StepDrift`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepDriftExact {
    pub drift: Rat,
    pub p_up: Rat,
    pub p_down: Rat,
}

fn opinion_drift_numerators(c: &Configuration, i: usize) -> Result<(i128, i128, i128)> {
    require_pair_population(c)?;
    if i >= c.k() {
        return Err(Error::IndexOutOfRange { index: i, k: c.k() });
    }
    let n = c.n() as i128;
    let u = c.undecided() as i128;
    let xi = c.counts()[i] as i128;
    let up = 2 * xi * u;
    let down = 2 * xi * (n - u - xi);
    // up - down = 2 x_i (2u - n + x_i)
    Ok((up - down, up, down))
}

/// One-step drift of `x_i`: `E[x_i(t+1) - x_i(t)] = 2 x_i (2u - n + x_i) / (n(n-1))`,
/// with `P(+1) = 2 x_i u / (n(n-1))` and `P(-1) = 2 x_i (n-u-x_i) / (n(n-1))`.
pub fn expected_opinion_drift(c: &Configuration, i: usize) -> Result<StepDrift> {
    let (num, up, down) = opinion_drift_numerators(c, i)?;
    let total = ordered_pairs(c.n()) as f64;
    Ok(StepDrift {
        drift: num as f64 / total,
        p_up: up as f64 / total,
        p_down: down as f64 / total,
    })
}

/// Exact rational form of [`expected_opinion_drift`].
pub fn expected_opinion_drift_exact(c: &Configuration, i: usize) -> Result<StepDriftExact> {
    let (num, up, down) = opinion_drift_numerators(c, i)?;
    let total = ordered_pairs(c.n()) as i128;
    Ok(StepDriftExact {
        drift: rat(num, total),
        p_up: rat(up, total),
        p_down: rat(down, total),
    })
}

fn delta_drift_numerators(c: &Configuration, i: usize, j: usize) -> Result<(i128, i128, i128)> {
    require_pair_population(c)?;
    let k = c.k();
    for idx in [i, j] {
        if idx >= k {
            return Err(Error::IndexOutOfRange { index: idx, k });
        }
    }
    if i == j {
        return Err(Error::InvalidPair(i));
    }
    let n = c.n() as i128;
    let u = c.undecided() as i128;
    let xi = c.counts()[i] as i128;
    let xj = c.counts()[j] as i128;
    let rest = n - u - xi - xj; // agents holding opinions other than i, j
    let up = 2 * xi * u + 2 * xj * rest;
    let down = 2 * xj * u + 2 * xi * rest;
    // up - down = 2 (x_i - x_j)(2u - n + x_i + x_j)
    Ok((up - down, up, down))
}

/// One-step drift of the pairwise difference `x_i - x_j`:
/// `E = 2 (x_i - x_j)(2u - n + x_i + x_j) / (n(n-1))`.
pub fn expected_delta_drift(c: &Configuration, i: usize, j: usize) -> Result<StepDrift> {
    let (num, up, down) = delta_drift_numerators(c, i, j)?;
    let total = ordered_pairs(c.n()) as f64;
    Ok(StepDrift {
        drift: num as f64 / total,
        p_up: up as f64 / total,
        p_down: down as f64 / total,
    })
}

/// Exact rational form of [`expected_delta_drift`].
pub fn expected_delta_drift_exact(c: &Configuration, i: usize, j: usize) -> Result<StepDriftExact> {
    let (num, up, down) = delta_drift_numerators(c, i, j)?;
    let total = ordered_pairs(c.n()) as i128;
    Ok(StepDriftExact {
        drift: rat(num, total),
        p_up: rat(up, total),
        p_down: rat(down, total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(counts: &[u64], u: u64) -> Configuration {
        Configuration::new(counts.to_vec(), u).unwrap()
    }

    #[test]
    fn transition_matches_protocol() {
        let k = 5;
        use AgentState::*;
        assert_eq!(
            transition(Opinion(0), Opinion(1), k).unwrap(),
            (Undecided, Undecided)
        );
        assert_eq!(
            transition(Opinion(2), Undecided, k).unwrap(),
            (Opinion(2), Opinion(2))
        );
        assert_eq!(
            transition(Opinion(4), Opinion(4), k).unwrap(),
            (Opinion(4), Opinion(4))
        );
        assert_eq!(
            transition(Undecided, Undecided, k).unwrap(),
            (Undecided, Undecided)
        );
        assert!(matches!(
            transition(Opinion(5), Undecided, k),
            Err(Error::InvalidState { index: 5, k: 5 })
        ));
    }

    #[test]
    fn event_probabilities_two_agents() {
        let c = cfg(&[1, 1], 0);
        let probs = event_probabilities(&c).unwrap();
        assert_eq!(probs, vec![(EventKind::CrossOpinion(0, 1), 1.0)]);
    }

    #[test]
    fn event_probabilities_enumerated_small_cases() {
        // n=4, counts=(2,2), u=0: 12 ordered pairs.
        let c = cfg(&[2, 2], 0);
        let probs: std::collections::HashMap<_, _> =
            event_probabilities_exact(&c).unwrap().into_iter().collect();
        assert_eq!(probs[&EventKind::CrossOpinion(0, 1)], rat(8, 12));
        assert_eq!(probs[&EventKind::SameOpinion(0)], rat(2, 12));
        assert_eq!(probs[&EventKind::SameOpinion(1)], rat(2, 12));

        // n=3, counts=(1,0), u=2: 6 ordered pairs.
        let c = cfg(&[1, 0], 2);
        let probs: std::collections::HashMap<_, _> =
            event_probabilities_exact(&c).unwrap().into_iter().collect();
        assert_eq!(probs[&EventKind::Recruit(0)], rat(4, 6));
        assert_eq!(probs[&EventKind::BothUndecided], rat(2, 6));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let c = cfg(&[3, 1, 2], 2);
        let exact: Rat = event_probabilities_exact(&c)
            .unwrap()
            .into_iter()
            .map(|(_, p)| p)
            .sum();
        assert_eq!(exact, Rat::one());
        let float: f64 = event_probabilities(&c)
            .unwrap()
            .into_iter()
            .map(|(_, p)| p)
            .sum();
        assert!((float - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_population_rejected() {
        let c = cfg(&[1], 0);
        assert!(matches!(
            event_probabilities(&c),
            Err(Error::DegeneratePopulation { n: 1 })
        ));
    }

    #[test]
    fn apply_event_examples() {
        let c = cfg(&[2, 2], 0);
        let c2 = apply_event(&c, EventKind::CrossOpinion(0, 1)).unwrap();
        assert_eq!(c2, cfg(&[1, 1], 2));
        let c3 = apply_event(&c2, EventKind::Recruit(1)).unwrap();
        assert_eq!(c3, cfg(&[1, 2], 1));
        let c4 = apply_event(&cfg(&[3, 0], 1), EventKind::Recruit(0)).unwrap();
        assert_eq!(c4, cfg(&[4, 0], 0));
        assert!(c4.is_absorbing());
    }

    #[test]
    fn apply_event_infeasible() {
        let c = cfg(&[3, 0], 1);
        assert!(matches!(
            apply_event(&c, EventKind::Recruit(1)),
            Err(Error::InfeasibleEvent { .. })
        ));
        assert!(matches!(
            apply_event(&c, EventKind::CrossOpinion(0, 1)),
            Err(Error::InfeasibleEvent { .. })
        ));
        assert!(matches!(
            apply_event(&c, EventKind::CrossOpinion(1, 1)),
            Err(Error::InvalidPair(1))
        ));
    }

    #[test]
    fn conservation_under_all_events() {
        let c = cfg(&[3, 1, 2], 2);
        for (e, _) in event_weights(&c).unwrap() {
            let c2 = apply_event(&c, e).unwrap();
            let sum: u64 = c2.counts().iter().sum();
            assert_eq!(sum + c2.undecided(), c.n());
        }
    }

    #[test]
    fn undecided_drift_examples() {
        // All undecided: absorbing, zero drift.
        assert_eq!(expected_undecided_drift(&cfg(&[0, 0], 5)).unwrap(), 0.0);
        // Monochromatic: zero drift.
        assert_eq!(expected_undecided_drift(&cfg(&[6, 0], 0)).unwrap(), 0.0);
        // n=4, (2,2), u=0: P[+2] = 8/12, no decrease.
        let d = expected_undecided_drift_exact(&cfg(&[2, 2], 0)).unwrap();
        assert_eq!(d, rat(16, 12));
        assert!(
            (expected_undecided_drift(&cfg(&[2, 2], 0)).unwrap() - 4.0 / 3.0).abs() < 1e-15
        );
    }

    #[test]
    fn opinion_drift_examples() {
        // Extinct opinion never moves.
        let d = expected_opinion_drift(&cfg(&[3, 0], 1), 1).unwrap();
        assert_eq!(d.drift, 0.0);
        assert_eq!(d.p_up, 0.0);
        assert_eq!(d.p_down, 0.0);
        // u exactly at the threshold (n - x_i) / 2 makes the drift vanish.
        // n=6, counts=(2,2), u=2: 2u - n + x_1 = 0.
        let d = expected_opinion_drift_exact(&cfg(&[2, 2], 2), 0).unwrap();
        assert_eq!(d.drift, Rat::zero());
        assert_eq!(d.p_up, rat(8, 30));
        assert_eq!(d.p_down, rat(8, 30));
        // Index out of range.
        assert!(expected_opinion_drift(&cfg(&[2, 2], 2), 2).is_err());
    }

    #[test]
    fn delta_drift_examples() {
        // Symmetric pair has zero drift.
        let d = expected_delta_drift(&cfg(&[4, 4, 1], 3), 0, 1).unwrap();
        assert_eq!(d.drift, 0.0);
        // n=8, counts=(3,1,2), u=2.
        let c = cfg(&[3, 1, 2], 2);
        let d = expected_delta_drift_exact(&c, 0, 1).unwrap();
        assert_eq!(d.drift, Rat::zero());
        let d = expected_delta_drift_exact(&c, 0, 2).unwrap();
        assert_eq!(d.drift, rat(2, 56));
        assert!(matches!(
            expected_delta_drift(&c, 1, 1),
            Err(Error::InvalidPair(1))
        ));
    }

    #[test]
    fn drift_consistency_with_event_enumeration() {
        // Sum over events of P[e] * change equals the closed form, exactly.
        let configs = [
            cfg(&[3, 1, 2], 2),
            cfg(&[2, 2], 0),
            cfg(&[1, 0], 2),
            cfg(&[5, 3, 2, 1], 4),
            cfg(&[1, 1, 1], 0),
        ];
        for c in &configs {
            let probs = event_probabilities_exact(c).unwrap();
            let by_events: Rat = probs
                .iter()
                .map(|(e, p)| p * Rat::from_integer(e.undecided_change().into()))
                .sum();
            assert_eq!(by_events, expected_undecided_drift_exact(c).unwrap());
            for i in 0..c.k() {
                let by_events: Rat = probs
                    .iter()
                    .map(|(e, p)| p * Rat::from_integer(e.opinion_change(i).into()))
                    .sum();
                assert_eq!(
                    by_events,
                    expected_opinion_drift_exact(c, i).unwrap().drift,
                    "opinion {i} in {c}"
                );
                for j in 0..c.k() {
                    if i == j {
                        continue;
                    }
                    let by_events: Rat = probs
                        .iter()
                        .map(|(e, p)| {
                            p * Rat::from_integer(
                                (e.opinion_change(i) - e.opinion_change(j)).into(),
                            )
                        })
                        .sum();
                    let exact = expected_delta_drift_exact(c, i, j).unwrap();
                    assert_eq!(by_events, exact.drift, "pair ({i},{j}) in {c}");
                    // p_up/p_down decomposition sums to the drift as well.
                    assert_eq!(&exact.p_up - &exact.p_down, exact.drift);
                }
            }
        }
    }

    #[test]
    fn threshold_property() {
        // drift > 0 iff u > (n - x_i)/2, for x_i > 0.
        for u in 0..=10u64 {
            for x1 in 1..=6u64 {
                let rest = 10 - x1;
                let c = cfg(&[x1, rest], u);
                let d = expected_opinion_drift(&c, 0).unwrap();
                let n = c.n() as f64;
                let threshold = (n - x1 as f64) / 2.0;
                assert_eq!(d.drift > 0.0, (u as f64) > threshold, "{c}");
            }
        }
    }

    #[test]
    fn max_delta_and_absorbing() {
        assert_eq!(cfg(&[5, 5, 5], 0).max_pairwise_delta(), 0);
        assert_eq!(cfg(&[7, 3, 4], 0).max_pairwise_delta(), 4);
        assert_eq!(cfg(&[5], 0).max_pairwise_delta(), 0);
        assert!(cfg(&[5, 0], 0).is_absorbing());
        assert!(cfg(&[0, 0], 7).is_absorbing());
        assert!(!cfg(&[4, 0], 1).is_absorbing());
        assert_eq!(cfg(&[5, 0], 0).winner(), Some(0));
        assert_eq!(cfg(&[0, 0], 7).winner(), None);
        assert_eq!(cfg(&[7, 3, 4], 0).majority_delta(), 4);
        assert_eq!(cfg(&[3, 7, 4], 0).majority_delta(), -1);
    }

    #[test]
    fn change_support() {
        // u changes lie in {-1, 0, +2}; x_i changes in {-1, 0, +1}.
        let c = cfg(&[3, 1, 2], 2);
        for (e, _) in event_weights(&c).unwrap() {
            assert!([-1, 0, 2].contains(&e.undecided_change()));
            for i in 0..c.k() {
                assert!([-1, 0, 1].contains(&e.opinion_change(i)));
            }
            let c2 = apply_event(&c, e).unwrap();
            let du = c2.undecided() as i64 - c.undecided() as i64;
            assert_eq!(du, e.undecided_change());
            for i in 0..c.k() {
                let dx = c2.counts()[i] as i64 - c.counts()[i] as i64;
                assert_eq!(dx, e.opinion_change(i));
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let c = cfg(&[3, 1, 2, 0], 2);
        // Permutation of opinion labels.
        let perm = [2usize, 0, 3, 1]; // new index of old opinion i
        let mut permuted = vec![0u64; 4];
        for (old, &new) in perm.iter().enumerate() {
            permuted[new] = c.counts()[old];
        }
        let cp = Configuration::new(permuted, c.undecided()).unwrap();
        let map_event = |e: EventKind| match e {
            EventKind::SameOpinion(i) => EventKind::SameOpinion(perm[i]),
            EventKind::CrossOpinion(i, j) => EventKind::cross(perm[i], perm[j]),
            EventKind::Recruit(i) => EventKind::Recruit(perm[i]),
            EventKind::BothUndecided => EventKind::BothUndecided,
        };
        let orig: std::collections::HashMap<_, _> = event_probabilities_exact(&c)
            .unwrap()
            .into_iter()
            .map(|(e, p)| (map_event(e), p))
            .collect();
        let perm_probs: std::collections::HashMap<_, _> =
            event_probabilities_exact(&cp).unwrap().into_iter().collect();
        assert_eq!(orig, perm_probs);
    }
}
