//! Exact analysis of the dynamics as a finite absorbing Markov chain on
//! small instances: state enumeration, exact rational transition rows,
//! absorption probabilities and expected hitting times.
//!
//! This is the ground truth every Monte Carlo component is validated
//! against, so rational arithmetic is the default; a documented iterative
//! floating-point fallback takes over above [`EXACT_SOLVE_CAP`] states.

use std::collections::HashMap;

use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::model::{
    apply_event, event_probabilities_exact, Configuration, Rat,
};
use crate::{Error, Result};

/// Default ceiling on the number of enumerated states.
pub const DEFAULT_STATE_CAP: u64 = 200_000;

/// Above this many states the linear solves switch to the iterative
/// floating-point fallback.
pub const EXACT_SOLVE_CAP: usize = 5_000;

/// Number of states of the chain: compositions of `n` into `k + 1`
/// non-negative parts, `C(n + k, k)`. Saturates at `u128::MAX`.
pub fn state_count(n: u64, k: usize) -> u128 {
    // C(n + k, k) computed factor by factor; exact at every step.
    let mut acc: u128 = 1;
    for i in 1..=(k as u128) {
        let num = n as u128 + i;
        acc = match acc.checked_mul(num) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

/// Enumerated chain with exact transition rows.
#[derive(Debug, Clone)]
pub struct ExactChain {
    n: u64,
    k: usize,
    states: Vec<Configuration>,
    index: HashMap<Configuration, usize>,
    /// `rows[i]` lists `(target, probability)` with exact rationals; filled
    /// by [`ExactChain::build_transitions`].
    rows: Vec<Vec<(usize, Rat)>>,
    absorbing: Vec<usize>,
    built: bool,
}

/// Enumerate all configurations of `n` agents over `k` opinions in
/// lexicographic order of `(x_1, ..., x_k)`; the undecided count is the
/// remainder. Errors when the state count exceeds `cap`.
pub fn enumerate_states(n: u64, k: usize, cap: u64) -> Result<ExactChain> {
    if k == 0 {
        return Err(Error::InvalidConfiguration("need k >= 1".into()));
    }
    let count = state_count(n, k);
    if count > cap as u128 {
        return Err(Error::TooLarge {
            states: count.min(u64::MAX as u128) as u64,
            cap,
        });
    }
    let mut states = Vec::with_capacity(count as usize);
    let mut prefix = Vec::with_capacity(k);
    fn gen(prefix: &mut Vec<u64>, remaining: u64, k: usize, out: &mut Vec<Configuration>) {
        if prefix.len() == k {
            out.push(
                Configuration::new(prefix.clone(), remaining)
                    .expect("generated compositions are valid"),
            );
            return;
        }
        for v in 0..=remaining {
            prefix.push(v);
            gen(prefix, remaining - v, k, out);
            prefix.pop();
        }
    }
    gen(&mut prefix, n, k, &mut states);
    debug_assert_eq!(states.len() as u128, count);

    let index: HashMap<Configuration, usize> = states
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    let absorbing = states
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_absorbing())
        .map(|(i, _)| i)
        .collect();
    Ok(ExactChain {
        n,
        k,
        rows: Vec::new(),
        states,
        index,
        absorbing,
        built: false,
    })
}

/// Number of compositions of `s` into `parts` non-negative parts.
fn compositions(s: u64, parts: usize) -> u128 {
    if parts == 0 {
        return (s == 0) as u128;
    }
    state_count(s, parts - 1)
}

impl ExactChain {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &Configuration {
        &self.states[i]
    }

    pub fn absorbing(&self) -> &[usize] {
        &self.absorbing
    }

    pub fn rows(&self) -> &[Vec<(usize, Rat)>] {
        &self.rows
    }

    pub fn is_built(&self) -> bool {
        self.built
    }

    /// Index of a configuration via the hash index.
    pub fn index_of(&self, c: &Configuration) -> Result<usize> {
        self.index
            .get(c)
            .copied()
            .ok_or_else(|| Error::StateNotInChain(c.to_string()))
    }

    /// Closed-form lexicographic rank, the inverse of [`ExactChain::unrank`].
    /// Counts tuples that precede `c`: for each position, completions of
    /// every smaller coordinate value.
    pub fn rank(&self, c: &Configuration) -> Result<usize> {
        if c.k() != self.k || c.n() != self.n {
            return Err(Error::StateNotInChain(c.to_string()));
        }
        let mut rank: u128 = 0;
        let mut remaining = self.n;
        for (pos, &x) in c.counts().iter().enumerate() {
            let parts_after = self.k - pos; // slots after this one, incl. u
            for v in 0..x {
                rank += compositions(remaining - v, parts_after);
            }
            remaining -= x;
        }
        Ok(rank as usize)
    }

    /// Closed-form inverse of [`ExactChain::rank`].
    pub fn unrank(&self, mut rank: u128) -> Configuration {
        let mut counts = Vec::with_capacity(self.k);
        let mut remaining = self.n;
        for pos in 0..self.k {
            let parts_after = self.k - pos;
            let mut v = 0u64;
            loop {
                let below = compositions(remaining - v, parts_after);
                if rank < below {
                    break;
                }
                rank -= below;
                v += 1;
            }
            counts.push(v);
            remaining -= v;
        }
        Configuration::new(counts, remaining).expect("unrank yields a valid composition")
    }

    /// Fill every transition row from the exact event probabilities.
    /// No-op events contribute self-loop mass.
    pub fn build_transitions(&mut self) -> Result<()> {
        let mut rows = Vec::with_capacity(self.states.len());
        for (i, state) in self.states.iter().enumerate() {
            if state.is_absorbing() || state.n() < 2 {
                rows.push(vec![(i, Rat::one())]);
                continue;
            }
            let mut row: HashMap<usize, Rat> = HashMap::new();
            for (event, p) in event_probabilities_exact(state)? {
                let target = if event.is_noop() {
                    i
                } else {
                    self.index_of(&apply_event(state, event)?)?
                };
                *row.entry(target).or_insert_with(Rat::zero) += p;
            }
            let mut row: Vec<(usize, Rat)> = row.into_iter().collect();
            row.sort_by_key(|(j, _)| *j);
            debug_assert!(row.iter().map(|(_, p)| p).sum::<Rat>() == Rat::one());
            rows.push(row);
        }
        self.rows = rows;
        self.built = true;
        Ok(())
    }
}

/// How a linear solve was performed.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum SolveMethod {
    Exact,
    /// Gauss–Seidel iteration; `residual` is the final max row residual.
    IterativeFloat { sweeps: u64, residual: f64 },
}

/// Absorption data for every start state of a chain.
#[derive(Debug, Clone)]
pub struct AbsorptionTable {
    /// Indices of the absorbing states, the column order of `probs`.
    pub targets: Vec<usize>,
    /// Expected interactions to absorption, per state.
    pub expected_time: Vec<f64>,
    pub expected_time_exact: Option<Vec<Rat>>,
    /// `probs[state][target_pos]`.
    pub probs: Vec<Vec<f64>>,
    pub probs_exact: Option<Vec<Vec<Rat>>>,
    pub method: SolveMethod,
}

/// Absorption data for one start state.
#[derive(Debug, Clone)]
pub struct AbsorptionAnalysis {
    pub start: usize,
    pub expected_time: f64,
    pub expected_time_exact: Option<Rat>,
    /// `(absorbing state index, probability)`, every target listed.
    pub absorb_probs: Vec<(usize, f64)>,
    pub absorb_probs_exact: Option<Vec<(usize, Rat)>>,
    pub method: SolveMethod,
}

/// Solve `(I - Q) t = 1` and `(I - Q) B = R` over the transient states,
/// exactly (Gaussian elimination over rationals) up to [`EXACT_SOLVE_CAP`]
/// states, afterwards by Gauss–Seidel iteration in double precision with a
/// reported residual.
pub fn absorption_table(chain: &ExactChain) -> Result<AbsorptionTable> {
    assert!(chain.is_built(), "call build_transitions first");
    let m_all = chain.len();
    let transient: Vec<usize> = (0..m_all)
        .filter(|i| !chain.state(*i).is_absorbing())
        .collect();
    let targets = chain.absorbing().to_vec();
    if targets.is_empty() {
        return Err(Error::SingularSystem(
            "chain has no absorbing state".into(),
        ));
    }
    let pos_of: HashMap<usize, usize> = transient.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let target_pos: HashMap<usize, usize> = targets.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let m = transient.len();
    let a = targets.len();

    let full_time = |times: Vec<f64>, probs: Vec<Vec<f64>>| -> (Vec<f64>, Vec<Vec<f64>>) {
        // Expand transient-indexed vectors to all states.
        let mut t_all = vec![0.0; m_all];
        let mut p_all = vec![vec![0.0; a]; m_all];
        for (p, &i) in transient.iter().enumerate() {
            t_all[i] = times[p];
            p_all[i] = probs[p].clone();
        }
        for (p, &i) in targets.iter().enumerate() {
            p_all[i][p] = 1.0;
        }
        (t_all, p_all)
    };

    if m_all <= EXACT_SOLVE_CAP {
        // Augmented exact system: columns = m transient + 1 (ones) + a (R).
        let cols = m + 1 + a;
        let mut mat: Vec<Vec<Rat>> = vec![vec![Rat::zero(); cols]; m];
        for (p, &i) in transient.iter().enumerate() {
            mat[p][p] = Rat::one();
            mat[p][m] = Rat::one();
            for (j, prob) in &chain.rows()[i] {
                if let Some(&q) = pos_of.get(j) {
                    mat[p][q] -= prob;
                } else if let Some(&tp) = target_pos.get(j) {
                    mat[p][m + 1 + tp] += prob;
                }
            }
        }
        gaussian_eliminate(&mut mat, m)?;
        let mut times_exact = Vec::with_capacity(m);
        let mut probs_exact: Vec<Vec<Rat>> = Vec::with_capacity(m);
        for row in mat.iter() {
            times_exact.push(row[m].clone());
            probs_exact.push(row[m + 1..].to_vec());
        }
        // Expand to all states.
        let mut t_all = vec![Rat::zero(); m_all];
        let mut p_all = vec![vec![Rat::zero(); a]; m_all];
        for (p, &i) in transient.iter().enumerate() {
            t_all[i] = times_exact[p].clone();
            p_all[i] = probs_exact[p].clone();
        }
        for (p, &i) in targets.iter().enumerate() {
            p_all[i][p] = Rat::one();
        }
        let times_f: Vec<f64> = t_all.iter().map(rat_to_f64).collect();
        let probs_f: Vec<Vec<f64>> = p_all
            .iter()
            .map(|r| r.iter().map(rat_to_f64).collect())
            .collect();
        Ok(AbsorptionTable {
            targets,
            expected_time: times_f,
            expected_time_exact: Some(t_all),
            probs: probs_f,
            probs_exact: Some(p_all),
            method: SolveMethod::Exact,
        })
    } else {
        // Gauss–Seidel on t = 1 + Q t and B = R + Q B.
        let mut times = vec![0.0f64; m];
        let mut probs = vec![vec![0.0f64; a]; m];
        let rows_t: Vec<(Vec<(usize, f64)>, Vec<(usize, f64)>)> = transient
            .iter()
            .map(|&i| {
                let mut q_row = Vec::new();
                let mut r_row = Vec::new();
                for (j, prob) in &chain.rows()[i] {
                    let p = rat_to_f64(prob);
                    if let Some(&q) = pos_of.get(j) {
                        q_row.push((q, p));
                    } else {
                        r_row.push((target_pos[j], p));
                    }
                }
                (q_row, r_row)
            })
            .collect();
        let mut sweeps = 0u64;
        let mut residual = f64::INFINITY;
        const MAX_SWEEPS: u64 = 1_000_000;
        const TOL: f64 = 1e-13;
        while sweeps < MAX_SWEEPS && residual > TOL {
            residual = 0.0;
            for (p, (q_row, r_row)) in rows_t.iter().enumerate() {
                let mut t_new = 1.0;
                let mut b_new = vec![0.0f64; a];
                let mut self_mass = 0.0;
                for &(q, pr) in q_row {
                    if q == p {
                        self_mass = pr;
                        continue;
                    }
                    t_new += pr * times[q];
                    for (tp, b) in b_new.iter_mut().enumerate() {
                        *b += pr * probs[q][tp];
                    }
                }
                for &(tp, pr) in r_row {
                    b_new[tp] += pr;
                }
                let scale = 1.0 / (1.0 - self_mass);
                t_new *= scale;
                for b in b_new.iter_mut() {
                    *b *= scale;
                }
                residual = residual
                    .max((t_new - times[p]).abs() / t_new.max(1.0));
                times[p] = t_new;
                probs[p] = b_new;
            }
            sweeps += 1;
        }
        let (t_all, p_all) = full_time(times, probs);
        Ok(AbsorptionTable {
            targets,
            expected_time: t_all,
            expected_time_exact: None,
            probs: p_all,
            probs_exact: None,
            method: SolveMethod::IterativeFloat { sweeps, residual },
        })
    }
}

/// Absorption analysis for a single start state.
pub fn absorption_analysis(chain: &ExactChain, start: &Configuration) -> Result<AbsorptionAnalysis> {
    let idx = chain.index_of(start)?;
    let table = absorption_table(chain)?;
    Ok(extract_start(&table, idx))
}

/// Pull one start state out of a full [`AbsorptionTable`].
pub fn extract_start(table: &AbsorptionTable, idx: usize) -> AbsorptionAnalysis {
    AbsorptionAnalysis {
        start: idx,
        expected_time: table.expected_time[idx],
        expected_time_exact: table.expected_time_exact.as_ref().map(|t| t[idx].clone()),
        absorb_probs: table
            .targets
            .iter()
            .zip(&table.probs[idx])
            .map(|(&t, &p)| (t, p))
            .collect(),
        absorb_probs_exact: table.probs_exact.as_ref().map(|ps| {
            table
                .targets
                .iter()
                .zip(&ps[idx])
                .map(|(&t, p)| (t, p.clone()))
                .collect()
        }),
        method: table.method.clone(),
    }
}

/// Exact distribution over states after `t` interactions from `start`.
pub fn exact_marginal(
    chain: &ExactChain,
    start: &Configuration,
    t: u64,
    cap: u64,
) -> Result<Vec<Rat>> {
    assert!(chain.is_built(), "call build_transitions first");
    if t > cap {
        return Err(Error::StepCapExceeded { steps: t, cap });
    }
    let idx = chain.index_of(start)?;
    let m = chain.len();
    let mut dist = vec![Rat::zero(); m];
    dist[idx] = Rat::one();
    for _ in 0..t {
        let mut next = vec![Rat::zero(); m];
        for (i, mass) in dist.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for (j, p) in &chain.rows()[i] {
                next[*j] += mass * p;
            }
        }
        dist = next;
    }
    Ok(dist)
}

/// `E[u]` under a distribution over chain states.
pub fn expected_undecided(chain: &ExactChain, dist: &[Rat]) -> Rat {
    dist.iter()
        .enumerate()
        .map(|(i, p)| p * Rat::from_integer(chain.state(i).undecided().into()))
        .sum()
}

fn rat_to_f64(r: &Rat) -> f64 {
    // to_f64 on huge numerators can lose precision; good enough for reports.
    r.to_f64().unwrap_or_else(|| {
        let approx = r.numer().to_f64().unwrap_or(f64::NAN)
            / r.denom().to_f64().unwrap_or(f64::NAN);
        approx
    })
}

/// Render an exact rational as `numer/denom`.
pub fn rat_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// In-place Gaussian elimination of `mat` (m rows, first m columns form the
/// system matrix, the rest are right-hand sides). Leaves the identity in the
/// first m columns.
fn gaussian_eliminate(mat: &mut [Vec<Rat>], m: usize) -> Result<()> {
    for col in 0..m {
        let pivot_row = (col..m)
            .find(|&r| !mat[r][col].is_zero())
            .ok_or_else(|| Error::SingularSystem(format!("zero pivot column {col}")))?;
        mat.swap(col, pivot_row);
        let pivot = mat[col][col].clone();
        for v in mat[col][col..].iter_mut() {
            *v /= &pivot;
        }
        for row in 0..m {
            if row == col || mat[row][col].is_zero() {
                continue;
            }
            let factor = mat[row][col].clone();
            let (head, tail) = mat.split_at_mut(col.max(row));
            let (src, dst) = if col < row {
                (&head[col], &mut tail[0])
            } else {
                (&tail[0], &mut head[row])
            };
            debug_assert!(!std::ptr::eq(src, dst));
            for (d, s) in dst[col..].iter_mut().zip(&src[col..]) {
                *d -= &factor * s;
            }
        }
    }
    Ok(())
}
