//! High-throughput trajectory simulation.
//!
//! Three interchangeable samplers produce the same law on trajectories:
//!
//! * count-level single stepping (Fenwick-tree pair sampling),
//! * count-level with geometric no-op skipping (the fast path), and
//! * an explicit agent-array reference simulator used for cross-validation.
//!
//! A single trajectory is strictly sequential; replicates are independent
//! and safe to fan out across threads. Identical `(start, options, stop,
//! seed)` inputs produce bit-identical results.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{apply_event, Configuration, EventKind};
use crate::sampler::WeightedIndexSampler;
use crate::{Error, Result};

/// Largest population for the count-level engine: event weights must fit
/// in `u64` (they are bounded by `n(n-1)`).
pub const MAX_ENGINE_N: u64 = 1 << 31;

/// Largest population for the agent-array reference simulator.
pub const MAX_AGENT_N: u64 = 1_000_000;

/// Derive the seed of replicate `r` from a master seed.
///
/// SplitMix64 finalizer over `master + (r + 1) * golden`, the standard
/// 64-bit mixing function; replicates are independent and reproducible.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    let mut z = master.wrapping_add((replicate.wrapping_add(1)).wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-opinion counts recorded in a snapshot: full counts for small `k`, or
/// a compact summary for large `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CountsSummary {
    Full(Vec<u64>),
    Compact {
        x1: u64,
        max: u64,
        min: u64,
        /// 1-based label of the largest count (smallest label on ties).
        argmax: usize,
        /// Optionally tracked opinion `(index, count)`, 0-based index.
        tracked: Option<(usize, u64)>,
    },
}

/// State of the system at one interaction index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub interaction: u64,
    pub undecided: u64,
    pub summary: CountsSummary,
    pub max_delta: u64,
}

impl Snapshot {
    pub fn x1(&self) -> u64 {
        match &self.summary {
            CountsSummary::Full(c) => c[0],
            CountsSummary::Compact { x1, .. } => *x1,
        }
    }

    pub fn max_count(&self) -> u64 {
        match &self.summary {
            CountsSummary::Full(c) => c.iter().copied().max().unwrap_or(0),
            CountsSummary::Compact { max, .. } => *max,
        }
    }

    pub fn min_count(&self) -> u64 {
        match &self.summary {
            CountsSummary::Full(c) => c.iter().copied().min().unwrap_or(0),
            CountsSummary::Compact { min, .. } => *min,
        }
    }

    pub fn argmax_label(&self) -> usize {
        match &self.summary {
            CountsSummary::Full(c) => {
                let mut best = 0usize;
                for (i, &v) in c.iter().enumerate() {
                    if v > c[best] {
                        best = i;
                    }
                }
                best + 1
            }
            CountsSummary::Compact { argmax, .. } => *argmax,
        }
    }

    /// Count of the tracked opinion, if recorded.
    pub fn tracked(&self, index: usize) -> Option<u64> {
        match &self.summary {
            CountsSummary::Full(c) => c.get(index).copied(),
            CountsSummary::Compact { tracked, .. } => {
                tracked.and_then(|(i, v)| (i == index).then_some(v))
            }
        }
    }
}

/// Extra stopping rule evaluated after every state change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StopPredicate {
    /// Stop once `x_i >= threshold` (0-based opinion index).
    OpinionAtLeast { opinion: usize, threshold: u64 },
    /// Stop once `max_i x_i - min_j x_j >= threshold`.
    MaxDeltaAtLeast { threshold: u64 },
    /// Stop once `u >= threshold`.
    UndecidedAtLeast { threshold: u64 },
}

impl StopPredicate {
    fn holds(&self, counts: &[u64], undecided: u64, max: u64, min: u64) -> bool {
        match *self {
            StopPredicate::OpinionAtLeast { opinion, threshold } => counts[opinion] >= threshold,
            StopPredicate::MaxDeltaAtLeast { threshold } => max - min >= threshold,
            StopPredicate::UndecidedAtLeast { threshold } => undecided >= threshold,
        }
    }
}

/// When to end a trajectory. At least one rule must be active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopCondition {
    pub max_interactions: u64,
    pub stop_on_absorbing: bool,
    pub stop_when: Option<StopPredicate>,
}

impl StopCondition {
    pub fn new(
        max_interactions: u64,
        stop_on_absorbing: bool,
        stop_when: Option<StopPredicate>,
    ) -> Result<Self> {
        if !stop_on_absorbing && stop_when.is_none() && max_interactions == u64::MAX {
            return Err(Error::InvalidArgument(
                "no stopping rule active: set a budget, stop_on_absorbing, or a predicate".into(),
            ));
        }
        Ok(Self {
            max_interactions,
            stop_on_absorbing,
            stop_when,
        })
    }

    /// Run to absorption with an interaction budget.
    pub fn absorb_within(budget: u64) -> Self {
        Self {
            max_interactions: budget,
            stop_on_absorbing: true,
            stop_when: None,
        }
    }
}

/// Snapshot recording and sampler options for one run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Record a snapshot every `stride` interactions (index 0 included).
    pub stride: u64,
    /// Record full counts (small k) instead of the compact summary.
    pub full_counts: bool,
    /// Opinion index carried in compact summaries (0-based).
    pub tracked: Option<usize>,
    /// Enable geometric no-op skipping when it pays off.
    pub skipping: bool,
    /// Predicate observed but not acted on: the first interaction at which
    /// it holds is reported as `watch_hit`.
    pub watch: Option<StopPredicate>,
}

impl RunOptions {
    pub fn new(stride: u64, skipping: bool) -> Self {
        Self {
            stride: stride.max(1),
            full_counts: true,
            tracked: None,
            skipping,
            watch: None,
        }
    }
}

/// Outcome of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    /// Interaction count at which the run ended.
    pub final_interaction: u64,
    /// First interaction index with an absorbing configuration, if reached.
    pub stabilization: Option<u64>,
    /// First interaction index with at most one surviving opinion.
    pub extinction: Option<u64>,
    /// First interaction index at which `stop_when` held, if it ever did.
    pub predicate_hit: Option<u64>,
    /// First interaction index at which the watch predicate held.
    pub watch_hit: Option<u64>,
    /// Monochromatic winner (0-based); `None` for all-undecided absorption
    /// or when the budget was exhausted first.
    pub winner: Option<usize>,
    /// `final_interaction / n`.
    pub parallel_time: f64,
    pub snapshots: Vec<Snapshot>,
    pub seed: u64,
    /// Budget ran out before absorption (and before the predicate, if any).
    pub exhausted: bool,
    pub n: u64,
}

impl TrajectoryResult {
    pub fn stabilization_parallel_time(&self) -> Option<f64> {
        self.stabilization.map(|t| t as f64 / self.n as f64)
    }
}

/// Sample the number of failures before the first success of a Bernoulli(p).
fn sample_geometric<R: Rng + ?Sized>(rng: &mut R, p: f64) -> u64 {
    debug_assert!(p > 0.0);
    if p >= 1.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let g = ((1.0 - u).ln() / (1.0 - p).ln()).floor();
    if g >= u64::MAX as f64 {
        u64::MAX
    } else {
        g as u64
    }
}

/// Outcome of [`CountSim::advance_productive`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    /// A state-changing event was applied at the returned interaction index.
    Productive(u64, EventKind),
    /// The interaction cap was reached with no state change since the call.
    CapReached,
}

/// Count-level simulator advancing one productive event at a time.
///
/// Maintains `sum x_i^2`, the count extrema and the surviving-opinion count
/// incrementally, so per-interaction work is `O(log k)` plus an `O(k)` scan
/// only on a productive event in skip mode (or when an extremum holder is
/// touched).
pub struct CountSim {
    counts: Vec<u64>,
    undecided: u64,
    n: u64,
    t: u64,
    /// sum of x_i^2 over opinions
    sum_sq: u64,
    /// Fenwick tree over k+1 slots; slot k is the undecided pool.
    sampler: WeightedIndexSampler,
    max_count: u64,
    min_count: u64,
    alive: usize,
    skipping: bool,
    rng: ChaCha8Rng,
}

impl CountSim {
    pub fn new(start: &Configuration, skipping: bool, seed: u64) -> Result<Self> {
        if start.n() < 2 {
            return Err(Error::DegeneratePopulation { n: start.n() });
        }
        if start.n() > MAX_ENGINE_N {
            return Err(Error::InvalidArgument(format!(
                "count engine supports n <= {MAX_ENGINE_N}, got {}",
                start.n()
            )));
        }
        let counts = start.counts().to_vec();
        let sum_sq = counts.iter().map(|&x| x * x).sum();
        let mut weights = counts.clone();
        weights.push(start.undecided());
        Ok(Self {
            max_count: counts.iter().copied().max().unwrap_or(0),
            min_count: counts.iter().copied().min().unwrap_or(0),
            alive: counts.iter().filter(|&&c| c > 0).count(),
            counts,
            undecided: start.undecided(),
            n: start.n(),
            t: 0,
            sum_sq,
            sampler: WeightedIndexSampler::new(&weights)?,
            skipping,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn interactions(&self) -> u64 {
        self.t
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn undecided(&self) -> u64 {
        self.undecided
    }

    pub fn max_count(&self) -> u64 {
        self.max_count
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn max_delta(&self) -> u64 {
        self.max_count - self.min_count
    }

    pub fn alive_opinions(&self) -> usize {
        self.alive
    }

    pub fn is_absorbing(&self) -> bool {
        self.undecided == self.n || self.max_count == self.n
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::new(self.counts.clone(), self.undecided)
            .expect("simulator invariant: counts always form a valid configuration")
    }

    pub fn winner(&self) -> Option<usize> {
        if self.undecided == self.n {
            None
        } else if self.max_count == self.n {
            self.counts.iter().position(|&c| c == self.n)
        } else {
            None
        }
    }

    fn sum_counts(&self) -> u64 {
        self.n - self.undecided
    }

    /// `u(u-1) + sum_i x_i(x_i-1)`: ordered pairs that change nothing.
    fn noop_weight(&self) -> u64 {
        let u = self.undecided;
        u * u - u + self.sum_sq - self.sum_counts()
    }

    fn ordered_pairs(&self) -> u64 {
        self.n * (self.n - 1)
    }

    fn bump_count(&mut self, i: usize, up: bool) {
        let old = self.counts[i];
        if up {
            self.counts[i] = old + 1;
            self.sum_sq += 2 * old + 1;
            self.sampler.increment(i, 1);
            if old == 0 {
                self.alive += 1;
            }
            if self.counts[i] > self.max_count {
                self.max_count = self.counts[i];
            }
            if old == self.min_count {
                self.min_count = self.counts.iter().copied().min().unwrap();
            }
        } else {
            self.counts[i] = old - 1;
            self.sum_sq -= 2 * old - 1;
            self.sampler.decrement(i, 1);
            if old == 1 {
                self.alive -= 1;
            }
            if self.counts[i] < self.min_count {
                self.min_count = self.counts[i];
            }
            if old == self.max_count {
                self.max_count = self.counts.iter().copied().max().unwrap();
            }
        }
    }

    fn apply(&mut self, event: EventKind) {
        match event {
            EventKind::CrossOpinion(i, j) => {
                self.bump_count(i, false);
                self.bump_count(j, false);
                self.undecided += 2;
                self.sampler.increment(self.k(), 2);
            }
            EventKind::Recruit(i) => {
                self.undecided -= 1;
                self.sampler.decrement(self.k(), 1);
                self.bump_count(i, true);
            }
            _ => {}
        }
    }

    /// One interaction via sequential pair sampling. Returns the event.
    fn step_single(&mut self) -> EventKind {
        let k = self.k();
        let first = self
            .sampler
            .draw(&mut self.rng)
            .expect("population is never empty");
        self.sampler.decrement(first, 1);
        let second = self
            .sampler
            .draw(&mut self.rng)
            .expect("n >= 2 leaves a second agent");
        self.sampler.increment(first, 1);
        let event = match (first == k, second == k) {
            (true, true) => EventKind::BothUndecided,
            (true, false) => EventKind::Recruit(second),
            (false, true) => EventKind::Recruit(first),
            (false, false) => {
                if first == second {
                    EventKind::SameOpinion(first)
                } else {
                    EventKind::cross(first, second)
                }
            }
        };
        self.t += 1;
        self.apply(event);
        event
    }

    /// Sample a state-changing event conditioned on the interaction being
    /// productive. `O(k)`.
    fn sample_productive(&mut self) -> EventKind {
        let s1 = self.sum_counts();
        let w_cross = s1 * s1 - self.sum_sq;
        let w_recruit = 2 * s1 * self.undecided;
        debug_assert!(w_cross + w_recruit > 0);
        let r = self.rng.random_range(0..w_cross + w_recruit);
        if r < w_cross {
            // Ordered pair (i, j), i != j, with weight x_i * x_j. The single
            // uniform draw encodes both coordinates of the grid.
            let mut rem = r;
            let mut i = 0usize;
            loop {
                let wi = self.counts[i] * (s1 - self.counts[i]);
                if rem < wi {
                    break;
                }
                rem -= wi;
                i += 1;
            }
            let mut j_target = rem / self.counts[i];
            let mut j = 0usize;
            loop {
                if j != i {
                    if j_target < self.counts[j] {
                        break;
                    }
                    j_target -= self.counts[j];
                }
                j += 1;
            }
            EventKind::cross(i, j)
        } else {
            // Recruit(i) with weight 2 * x_i * u.
            let mut i_target = (r - w_cross) / (2 * self.undecided);
            let mut i = 0usize;
            loop {
                if i_target < self.counts[i] {
                    break;
                }
                i_target -= self.counts[i];
                i += 1;
            }
            EventKind::Recruit(i)
        }
    }

    /// Advance until the next state-changing event, without exceeding `cap`
    /// interactions. The state is unchanged between the previous index and
    /// the returned one, so callers can reconstruct every intermediate
    /// configuration.
    ///
    /// An absorbing state fast-forwards to `cap`: no observable quantity
    /// depends on sampling individual post-absorption no-ops.
    pub fn advance_productive(&mut self, cap: u64) -> Advance {
        debug_assert!(cap >= self.t);
        if self.is_absorbing() {
            self.t = cap;
            return Advance::CapReached;
        }
        let pairs = self.ordered_pairs();
        let noop = self.noop_weight();
        // Geometric skipping pays off once no-ops dominate.
        if self.skipping && 2 * noop > pairs {
            let p_prod = (pairs - noop) as f64 / pairs as f64;
            let skipped = sample_geometric(&mut self.rng, p_prod);
            if skipped >= cap - self.t {
                // The next productive interaction falls beyond the cap; by
                // memorylessness the tail can be redrawn on the next call.
                self.t = cap;
                return Advance::CapReached;
            }
            self.t += skipped + 1;
            let event = self.sample_productive();
            self.apply(event);
            Advance::Productive(self.t, event)
        } else {
            while self.t < cap {
                let event = self.step_single();
                if !event.is_noop() {
                    return Advance::Productive(self.t, event);
                }
            }
            Advance::CapReached
        }
    }

    fn snapshot(&self, opts: &RunOptions) -> Snapshot {
        let summary = if opts.full_counts {
            CountsSummary::Full(self.counts.clone())
        } else {
            let mut argmax = 0usize;
            for (i, &c) in self.counts.iter().enumerate() {
                if c > self.counts[argmax] {
                    argmax = i;
                }
            }
            CountsSummary::Compact {
                x1: self.counts[0],
                max: self.max_count,
                min: self.min_count,
                argmax: argmax + 1,
                tracked: opts.tracked.map(|i| (i, self.counts[i])),
            }
        };
        Snapshot {
            interaction: self.t,
            undecided: self.undecided,
            summary,
            max_delta: self.max_delta(),
        }
    }
}

/// Run one trajectory from an explicit start configuration.
pub fn run_from_config(
    start: &Configuration,
    opts: &RunOptions,
    stop: &StopCondition,
    seed: u64,
) -> Result<TrajectoryResult> {
    let n = start.n();
    if n < 2 || start.k() < 1 {
        // Degenerate instance: no interactions are possible.
        return Ok(degenerate_result(start, opts, seed));
    }
    let mut sim = CountSim::new(start, opts.skipping, seed)?;
    let budget = stop.max_interactions;

    let mut snapshots = vec![sim.snapshot(opts)];
    let mut stabilization = if sim.is_absorbing() { Some(0) } else { None };
    let mut extinction = if sim.alive_opinions() <= 1 {
        Some(0)
    } else {
        None
    };
    let holds_now = |sim: &CountSim, p: &StopPredicate| {
        p.holds(
            sim.counts(),
            sim.undecided(),
            sim.max_count(),
            sim.min_count(),
        )
    };
    let mut predicate_hit = stop
        .stop_when
        .filter(|p| holds_now(&sim, p))
        .map(|_| 0u64);
    let mut watch_hit = opts
        .watch
        .filter(|p| holds_now(&sim, p))
        .map(|_| 0u64);

    let done = |stab: Option<u64>, pred: Option<u64>| {
        (stop.stop_on_absorbing && stab.is_some()) || (stop.stop_when.is_some() && pred.is_some())
    };
    // Absorbed with an unbounded budget and no absorption stop: the state is
    // frozen, so nothing observable remains; stop instead of spinning.
    let frozen = |stab: Option<u64>| {
        stab.is_some() && !stop.stop_on_absorbing && budget == u64::MAX
    };

    while !done(stabilization, predicate_hit)
        && !frozen(stabilization)
        && sim.interactions() < budget
    {
        // Cap each advance at the next snapshot boundary so intermediate
        // snapshots see the exact configuration at their index.
        let next_boundary = {
            let t = sim.interactions();
            let next = (t / opts.stride)
                .saturating_add(1)
                .saturating_mul(opts.stride);
            next.min(budget)
        };
        match sim.advance_productive(next_boundary) {
            Advance::CapReached => {
                snapshots.push(sim.snapshot(opts));
            }
            Advance::Productive(t, _event) => {
                if t % opts.stride == 0 {
                    snapshots.push(sim.snapshot(opts));
                }
                if stabilization.is_none() && sim.is_absorbing() {
                    stabilization = Some(t);
                }
                if extinction.is_none() && sim.alive_opinions() <= 1 {
                    extinction = Some(t);
                }
                if predicate_hit.is_none() {
                    if let Some(p) = stop.stop_when {
                        if holds_now(&sim, &p) {
                            predicate_hit = Some(t);
                        }
                    }
                }
                if watch_hit.is_none() {
                    if let Some(p) = opts.watch {
                        if holds_now(&sim, &p) {
                            watch_hit = Some(t);
                        }
                    }
                }
            }
        }
    }

    // Final snapshot at the stopping index, if not already recorded.
    if snapshots.last().map(|s| s.interaction) != Some(sim.interactions()) {
        snapshots.push(sim.snapshot(opts));
    }

    let exhausted = !done(stabilization, predicate_hit) && stabilization.is_none();
    Ok(TrajectoryResult {
        final_interaction: sim.interactions(),
        stabilization,
        extinction,
        predicate_hit,
        watch_hit,
        winner: if stabilization.is_some() {
            sim.winner()
        } else {
            None
        },
        parallel_time: sim.interactions() as f64 / n as f64,
        snapshots,
        seed,
        exhausted,
        n,
    })
}

fn degenerate_result(start: &Configuration, opts: &RunOptions, seed: u64) -> TrajectoryResult {
    let full = CountsSummary::Full(start.counts().to_vec());
    let summary = if opts.full_counts {
        full
    } else {
        CountsSummary::Compact {
            x1: start.counts()[0],
            max: start.counts().iter().copied().max().unwrap_or(0),
            min: start.counts().iter().copied().min().unwrap_or(0),
            argmax: start.argmax_label(),
            tracked: opts.tracked.map(|i| (i, start.counts()[i])),
        }
    };
    TrajectoryResult {
        final_interaction: 0,
        stabilization: Some(0),
        extinction: Some(0),
        predicate_hit: None,
        watch_hit: None,
        winner: start.winner(),
        parallel_time: 0.0,
        snapshots: vec![Snapshot {
            interaction: 0,
            undecided: start.undecided(),
            summary,
            max_delta: start.max_pairwise_delta(),
        }],
        seed,
        exhausted: false,
        n: start.n(),
    }
}

/// One interaction on a value-level configuration: sample an ordered pair of
/// distinct agents uniformly, apply the transition, return the new
/// configuration and the event class.
pub fn step_counts<R: Rng + ?Sized>(
    c: &Configuration,
    rng: &mut R,
) -> Result<(Configuration, EventKind)> {
    if c.n() < 2 {
        return Err(Error::DegeneratePopulation { n: c.n() });
    }
    let k = c.k();
    let mut weights = c.counts().to_vec();
    weights.push(c.undecided());
    let mut sampler = WeightedIndexSampler::new(&weights)?;
    let first = sampler.draw(rng)?;
    sampler.decrement(first, 1);
    let second = sampler.draw(rng)?;
    let event = match (first == k, second == k) {
        (true, true) => EventKind::BothUndecided,
        (true, false) => EventKind::Recruit(second),
        (false, true) => EventKind::Recruit(first),
        (false, false) => {
            if first == second {
                EventKind::SameOpinion(first)
            } else {
                EventKind::cross(first, second)
            }
        }
    };
    let next = if event.is_noop() {
        c.clone()
    } else {
        apply_event(c, event)?
    };
    Ok((next, event))
}

/// Number of no-op interactions before the next productive one, sampled
/// geometrically in one draw. Errors on absorbing input, where the skip
/// would be infinite.
pub fn skip_noops<R: Rng + ?Sized>(c: &Configuration, rng: &mut R) -> Result<u64> {
    if c.n() < 2 {
        return Err(Error::DegeneratePopulation { n: c.n() });
    }
    if c.is_absorbing() {
        return Err(Error::InfiniteSkip);
    }
    let u = c.undecided() as u128;
    let s1: u128 = c.counts().iter().map(|&x| x as u128).sum();
    let s2: u128 = c.counts().iter().map(|&x| (x as u128) * (x as u128)).sum();
    let pairs = (c.n() as u128) * (c.n() as u128 - 1);
    let noop = u * u - u + s2 - s1;
    let p_prod = (pairs - noop) as f64 / pairs as f64;
    Ok(sample_geometric(rng, p_prod))
}

/// Sample an event conditioned on it being productive (state-changing).
pub fn sample_productive_event<R: Rng + ?Sized>(
    c: &Configuration,
    rng: &mut R,
) -> Result<EventKind> {
    if c.is_absorbing() {
        return Err(Error::InfiniteSkip);
    }
    let mut sim = CountSim::new(c, true, 0)?;
    sim.rng = ChaCha8Rng::from_rng(rng);
    Ok(sim.sample_productive())
}

/// Reference simulator over an explicit agent-state array.
///
/// Draws two distinct agent indices uniformly per interaction. The output
/// contract matches [`run_from_config`]; this path favors obviousness over
/// speed and is used for cross-validation only.
pub fn run_agent_reference(
    start: &Configuration,
    opts: &RunOptions,
    stop: &StopCondition,
    seed: u64,
) -> Result<TrajectoryResult> {
    let n = start.n();
    if n > MAX_AGENT_N {
        return Err(Error::AgentGuard { n, cap: MAX_AGENT_N });
    }
    if n < 2 || start.k() < 1 {
        return Ok(degenerate_result(start, opts, seed));
    }
    const UNDECIDED: u32 = u32::MAX;
    let mut states: Vec<u32> = Vec::with_capacity(n as usize);
    for (i, &c) in start.counts().iter().enumerate() {
        states.extend(std::iter::repeat_n(i as u32, c as usize));
    }
    states.extend(std::iter::repeat_n(UNDECIDED, start.undecided() as usize));

    let mut counts = start.counts().to_vec();
    let mut undecided = start.undecided();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t: u64 = 0;
    let budget = stop.max_interactions;

    let extrema = |counts: &[u64]| {
        let max = counts.iter().copied().max().unwrap();
        let min = counts.iter().copied().min().unwrap();
        (max, min)
    };
    let snap = |t: u64, counts: &[u64], undecided: u64| {
        let (max, min) = extrema(counts);
        let summary = if opts.full_counts {
            CountsSummary::Full(counts.to_vec())
        } else {
            let mut argmax = 0usize;
            for (i, &c) in counts.iter().enumerate() {
                if c > counts[argmax] {
                    argmax = i;
                }
            }
            CountsSummary::Compact {
                x1: counts[0],
                max,
                min,
                argmax: argmax + 1,
                tracked: opts.tracked.map(|i| (i, counts[i])),
            }
        };
        Snapshot {
            interaction: t,
            undecided,
            summary,
            max_delta: max - min,
        }
    };
    let absorbing =
        |counts: &[u64], undecided: u64| undecided == n || counts.iter().any(|&c| c == n);

    let mut snapshots = vec![snap(0, &counts, undecided)];
    let mut stabilization = absorbing(&counts, undecided).then_some(0u64);
    let mut extinction = (counts.iter().filter(|&&c| c > 0).count() <= 1).then_some(0u64);
    let mut predicate_hit = stop
        .stop_when
        .filter(|p| {
            let (max, min) = extrema(&counts);
            p.holds(&counts, undecided, max, min)
        })
        .map(|_| 0u64);
    let mut watch_hit = opts
        .watch
        .filter(|p| {
            let (max, min) = extrema(&counts);
            p.holds(&counts, undecided, max, min)
        })
        .map(|_| 0u64);

    let done = |stab: Option<u64>, pred: Option<u64>| {
        (stop.stop_on_absorbing && stab.is_some()) || (stop.stop_when.is_some() && pred.is_some())
    };

    while !done(stabilization, predicate_hit) && t < budget {
        let a = rng.random_range(0..n) as usize;
        let mut b = rng.random_range(0..n - 1) as usize;
        if b >= a {
            b += 1;
        }
        t += 1;
        let (sa, sb) = (states[a], states[b]);
        if sa != sb {
            if sa != UNDECIDED && sb != UNDECIDED {
                // Distinct opinions annihilate.
                states[a] = UNDECIDED;
                states[b] = UNDECIDED;
                counts[sa as usize] -= 1;
                counts[sb as usize] -= 1;
                undecided += 2;
            } else {
                // Recruit: the undecided one adopts the opinion.
                let opinion = if sa == UNDECIDED { sb } else { sa };
                states[a] = opinion;
                states[b] = opinion;
                counts[opinion as usize] += 1;
                undecided -= 1;
            }
            if stabilization.is_none() && absorbing(&counts, undecided) {
                stabilization = Some(t);
            }
            if extinction.is_none() && counts.iter().filter(|&&c| c > 0).count() <= 1 {
                extinction = Some(t);
            }
            if predicate_hit.is_none() {
                if let Some(p) = stop.stop_when {
                    let (max, min) = extrema(&counts);
                    if p.holds(&counts, undecided, max, min) {
                        predicate_hit = Some(t);
                    }
                }
            }
            if watch_hit.is_none() {
                if let Some(p) = opts.watch {
                    let (max, min) = extrema(&counts);
                    if p.holds(&counts, undecided, max, min) {
                        watch_hit = Some(t);
                    }
                }
            }
        }
        if t % opts.stride == 0 {
            snapshots.push(snap(t, &counts, undecided));
        }
        // Fast-forward through the absorbing tail when nothing can change.
        if stabilization.is_some() && !stop.stop_on_absorbing && stop.stop_when.is_none() {
            if budget == u64::MAX {
                break;
            }
            let mut b_idx = (t / opts.stride + 1) * opts.stride;
            while b_idx < budget {
                snapshots.push(snap(b_idx, &counts, undecided));
                b_idx += opts.stride;
            }
            t = budget;
            break;
        }
        if stabilization.is_some() && !stop.stop_on_absorbing && budget == u64::MAX {
            break; // frozen state, unbounded budget
        }
    }

    if snapshots.last().map(|s| s.interaction) != Some(t) {
        snapshots.push(snap(t, &counts, undecided));
    }
    let exhausted = !done(stabilization, predicate_hit) && stabilization.is_none();
    let winner = if stabilization.is_some() {
        if undecided == n {
            None
        } else {
            counts.iter().position(|&c| c == n)
        }
    } else {
        None
    };
    Ok(TrajectoryResult {
        final_interaction: t,
        stabilization,
        extinction,
        predicate_hit,
        watch_hit,
        winner,
        parallel_time: t as f64 / n as f64,
        snapshots,
        seed,
        exhausted,
        n,
    })
}
