//! Local Markov chains on the Johnson graph of `k`-subsets targeting
//! `pi(sigma) ∝ exp(-beta H(sigma))`, plus exact analysis at tiny scale.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

use crate::combin::{binom_u128, for_each_combination, rank_combination};
use crate::error::{domain, Error, Result};
use crate::model::{hamiltonian, KSubset, PrunedInstance};
use crate::rng::{stream_rng, Rng, Stream};

/// Largest state space `stationary_exact` and `bottleneck_ratio` will enumerate.
pub const ENUMERATION_CAP: u128 = 2_000_000;
/// Largest neighbor table (entries) the exact kernel will materialise.
pub const KERNEL_ENTRY_CAP: u128 = 1 << 28;
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Rule {
    /// Heat-bath acceptance `1 / (1 + e^{beta dH})`.
    #[default]
    Glauber,
    /// `min(1, e^{-beta dH})`.
    Metropolis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Init {
    UniformRandomKSubset,
    DisjointFromPlanted,
    Explicit(KSubset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub beta: f64,
    pub max_steps: u64,
    pub init: Init,
    pub stop_overlap: Option<usize>,
    /// Also stop at the first zero-energy state.
    pub stop_at_zero_energy: bool,
    pub record_every: u64,
    pub seed: u64,
    pub rule: Rule,
}

impl ChainConfig {
    pub fn new(beta: f64, max_steps: u64, seed: u64) -> Self {
        Self {
            beta,
            max_steps,
            init: Init::UniformRandomKSubset,
            stop_overlap: None,
            stop_at_zero_energy: false,
            record_every: 1,
            seed,
            rule: Rule::Glauber,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCMCTrace {
    pub steps: Vec<u64>,
    pub energies: Vec<f64>,
    pub overlaps: Vec<usize>,
    pub accepted_cum: Vec<u64>,
    /// First step with overlap `>= stop_overlap`.
    pub hit_step: Option<u64>,
    /// First step with zero energy.
    pub zero_energy_step: Option<u64>,
    pub steps_run: u64,
    pub final_state: KSubset,
    pub accepted_moves: u64,
}

impl MCMCTrace {
    /// Writes `step,energy,overlap,accepted_cum` rows.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "step,energy,overlap,accepted_cum")?;
        for i in 0..self.steps.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.steps[i],
                crate::report::fmt12(self.energies[i]),
                self.overlaps[i],
                self.accepted_cum[i]
            )?;
        }
        Ok(())
    }
}

fn accept_prob(rule: Rule, beta: f64, dh: f64) -> f64 {
    match rule {
        Rule::Glauber => 1.0 / (1.0 + (beta * dh).exp()),
        Rule::Metropolis => (-beta * dh).exp().min(1.0),
    }
}

/// Mutable chain state with per-test cover counts.
struct State<'a> {
    pr: &'a PrunedInstance,
    adj: &'a [Vec<u32>],
    members: Vec<usize>,
    outside: Vec<usize>,
    counts: Vec<u32>,
    uncovered: usize,
    overlap: usize,
}

/// Positive tests covered by each candidate, as index lists.
fn adjacency(pr: &PrunedInstance) -> Vec<Vec<u32>> {
    pr.coverage.iter().map(|b| b.iter().map(|t| t as u32).collect()).collect()
}

impl<'a> State<'a> {
    fn new(pr: &'a PrunedInstance, adj: &'a [Vec<u32>], sigma: &KSubset) -> Self {
        let mut inside = vec![false; pr.p];
        let mut counts = vec![0u32; pr.m];
        for &i in sigma.members() {
            inside[i] = true;
            for &t in &adj[i] {
                counts[t as usize] += 1;
            }
        }
        Self {
            pr,
            adj,
            members: sigma.members().to_vec(),
            outside: (0..pr.p).filter(|&i| !inside[i]).collect(),
            uncovered: counts.iter().filter(|&&c| c == 0).count(),
            counts,
            overlap: sigma.members().iter().filter(|&&i| pr.is_planted(i)).count(),
        }
    }

    /// Change in uncovered count when swapping member `i` out and `j` in.
    fn delta(&self, i: usize, j: usize) -> i64 {
        let lost = self.adj[i]
            .iter()
            .filter(|&&t| self.counts[t as usize] == 1 && !self.pr.coverage[j].contains(t as usize))
            .count();
        let gained = self.adj[j].iter().filter(|&&t| self.counts[t as usize] == 0).count();
        lost as i64 - gained as i64
    }

    fn swap(&mut self, mi: usize, oj: usize, delta: i64) {
        let (i, j) = (self.members[mi], self.outside[oj]);
        for &t in &self.adj[i] {
            self.counts[t as usize] -= 1;
        }
        for &t in &self.adj[j] {
            self.counts[t as usize] += 1;
        }
        self.uncovered = (self.uncovered as i64 + delta) as usize;
        self.overlap = self.overlap + self.pr.is_planted(j) as usize - self.pr.is_planted(i) as usize;
        self.members[mi] = j;
        self.outside[oj] = i;
    }

    /// One proposal plus accept/reject; returns whether the move was taken.
    fn step(&mut self, rule: Rule, beta: f64, rng: &mut Rng) -> bool {
        let (k, rest) = (self.members.len(), self.outside.len());
        let pick = rng.gen_range(0..k * rest);
        let (mi, oj) = (pick / rest, pick % rest);
        let u: f64 = rng.gen();
        let d = self.delta(self.members[mi], self.outside[oj]);
        let a = accept_prob(rule, beta, d as f64 / self.pr.m as f64);
        if u < a {
            self.swap(mi, oj, d);
            true
        } else {
            false
        }
    }

    fn energy(&self) -> f64 {
        self.uncovered as f64 / self.pr.m as f64
    }

    fn subset(&self) -> KSubset {
        let mut m = self.members.clone();
        m.sort_unstable();
        KSubset::from_sorted(m)
    }
}

fn check_chain(pr: &PrunedInstance, beta: f64, sigma: &KSubset) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return domain(format!("beta = {beta} must be a finite nonnegative number"));
    }
    if sigma.len() != pr.k || sigma.members().last().is_some_and(|&i| i >= pr.p) {
        return domain("state is not a k-subset of the candidates");
    }
    if pr.p == pr.k {
        return Err(Error::FrozenChain(pr.k));
    }
    if pr.m == 0 {
        return Err(Error::UndefinedEnergy);
    }
    Ok(())
}

/// One Glauber move from `state`.
pub fn glauber_step(state: &KSubset, pr: &PrunedInstance, beta: f64, rng: &mut Rng) -> Result<KSubset> {
    chain_step(state, pr, beta, Rule::Glauber, rng)
}

/// One move of either local rule from `state`.
pub fn chain_step(state: &KSubset, pr: &PrunedInstance, beta: f64, rule: Rule, rng: &mut Rng) -> Result<KSubset> {
    check_chain(pr, beta, state)?;
    let adj = adjacency(pr);
    let mut st = State::new(pr, &adj, state);
    st.step(rule, beta, rng);
    Ok(st.subset())
}

fn initial_state(pr: &PrunedInstance, init: &Init, rng: &mut Rng) -> Result<KSubset> {
    Ok(match init {
        Init::Explicit(s) => s.clone(),
        Init::UniformRandomKSubset => {
            let mut m = rand::seq::index::sample(rng, pr.p, pr.k).into_vec();
            m.sort_unstable();
            KSubset::from_sorted(m)
        }
        Init::DisjointFromPlanted => {
            let pool = pr.non_planted();
            if pool.len() < pr.k {
                return domain(format!("only {} non-planted candidates, need k = {}", pool.len(), pr.k));
            }
            let mut m: Vec<usize> = rand::seq::index::sample(rng, pool.len(), pr.k)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            m.sort_unstable();
            KSubset::from_sorted(m)
        }
    })
}

/// Runs one chain; randomness comes from the chain stream of `cfg.seed`.
pub fn run_chain(pr: &PrunedInstance, cfg: &ChainConfig) -> Result<MCMCTrace> {
    if cfg.max_steps == 0 {
        return domain("max_steps must be at least 1");
    }
    if cfg.record_every == 0 {
        return domain("record_every must be at least 1");
    }
    if cfg.stop_overlap.is_some_and(|s| s > pr.k) {
        return domain("stop_overlap exceeds k");
    }
    let mut rng = stream_rng(cfg.seed, Stream::Chain);
    let init = initial_state(pr, &cfg.init, &mut rng)?;
    check_chain(pr, cfg.beta, &init)?;
    let adj = adjacency(pr);
    let mut st = State::new(pr, &adj, &init);

    let mut tr = MCMCTrace {
        steps: vec![],
        energies: vec![],
        overlaps: vec![],
        accepted_cum: vec![],
        hit_step: None,
        zero_energy_step: None,
        steps_run: 0,
        final_state: init,
        accepted_moves: 0,
    };
    let record = |tr: &mut MCMCTrace, st: &State, step: u64| {
        tr.steps.push(step);
        tr.energies.push(st.energy());
        tr.overlaps.push(st.overlap);
        tr.accepted_cum.push(tr.accepted_moves);
    };
    // returns true when the run should stop
    let observe = |tr: &mut MCMCTrace, st: &State, step: u64| {
        if tr.hit_step.is_none() && cfg.stop_overlap.is_some_and(|s| st.overlap >= s) {
            tr.hit_step = Some(step);
        }
        if tr.zero_energy_step.is_none() && st.uncovered == 0 {
            tr.zero_energy_step = Some(step);
        }
        tr.hit_step.is_some() || (cfg.stop_at_zero_energy && tr.zero_energy_step.is_some())
    };

    record(&mut tr, &st, 0);
    let mut step = 0;
    if !observe(&mut tr, &st, 0) {
        while step < cfg.max_steps {
            step += 1;
            if st.step(cfg.rule, cfg.beta, &mut rng) {
                tr.accepted_moves += 1;
            }
            let stop = observe(&mut tr, &st, step);
            if stop || step % cfg.record_every == 0 || step == cfg.max_steps {
                record(&mut tr, &st, step);
            }
            if stop {
                break;
            }
        }
    }
    tr.steps_run = step;
    tr.final_state = st.subset();
    Ok(tr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEntry {
    pub seed: u64,
    pub hit_step: Option<u64>,
    pub zero_energy_step: Option<u64>,
    /// Reached the stop condition (`stop_overlap`, or zero energy when that is the only target).
    pub success: bool,
    pub final_energy: f64,
    pub final_overlap: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub beta: f64,
    pub max_steps: u64,
    pub rule: Rule,
    pub runs: Vec<EnsembleEntry>,
    pub success_rate: f64,
}

/// Runs `cfg` once per seed. Chains may run concurrently; results are in seed order.
pub fn run_ensemble(pr: &PrunedInstance, cfg: &ChainConfig, seeds: &[u64]) -> Result<EnsembleSummary> {
    let one = |&seed: &u64| -> Result<EnsembleEntry> {
        let t0 = Instant::now();
        let c = ChainConfig { seed, ..cfg.clone() };
        let tr = run_chain(pr, &c)?;
        let success = if cfg.stop_overlap.is_some() {
            tr.hit_step.is_some()
        } else {
            tr.zero_energy_step.is_some()
        };
        Ok(EnsembleEntry {
            seed,
            hit_step: tr.hit_step,
            zero_energy_step: tr.zero_energy_step,
            success,
            final_energy: *tr.energies.last().unwrap(),
            final_overlap: *tr.overlaps.last().unwrap(),
            wall_time_s: t0.elapsed().as_secs_f64(),
        })
    };
    #[cfg(feature = "parallel")]
    let runs: Vec<_> = {
        use rayon::prelude::*;
        seeds.par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<_> = seeds.iter().map(one).collect::<Result<_>>()?;
    let success_rate = if runs.is_empty() {
        0.0
    } else {
        runs.iter().filter(|r| r.success).count() as f64 / runs.len() as f64
    };
    Ok(EnsembleSummary {
        beta: cfg.beta,
        max_steps: cfg.max_steps,
        rule: cfg.rule,
        runs,
        success_rate,
    })
}

/// One row of the exact transition kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    /// `(neighbor, probability)` for each of the `k(p-k)` swaps.
    pub moves: Vec<(KSubset, f64)>,
    /// Total rejection mass.
    pub holding: f64,
}

impl KernelRow {
    pub fn sum(&self) -> f64 {
        self.moves.iter().map(|m| m.1).sum::<f64>() + self.holding
    }
}

/// Exact kernel row at `sigma`, enumerating every ordered swap.
pub fn kernel_row(pr: &PrunedInstance, sigma: &KSubset, beta: f64, rule: Rule) -> Result<KernelRow> {
    check_chain(pr, beta, sigma)?;
    let h = hamiltonian(pr, sigma)?;
    let outside: Vec<usize> = (0..pr.p).filter(|&j| !sigma.contains(j)).collect();
    let w = 1.0 / (pr.k * outside.len()) as f64;
    let mut moves = Vec::with_capacity(pr.k * outside.len());
    let mut holding = 0.0;
    for &i in sigma.members() {
        for &j in &outside {
            let mut m: Vec<usize> = sigma.members().iter().copied().filter(|&x| x != i).collect();
            m.push(j);
            m.sort_unstable();
            let next = KSubset::from_sorted(m);
            let a = accept_prob(rule, beta, hamiltonian(pr, &next)? - h);
            moves.push((next, w * a));
            holding += w * (1.0 - a);
        }
    }
    Ok(KernelRow { moves, holding })
}

/// Every `k`-subset in lexicographic order with its uncovered count and overlap.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub p: usize,
    pub k: usize,
    pub m: usize,
    pub uncovered: Vec<u32>,
    pub overlaps: Vec<u32>,
}

impl StateSpace {
    pub fn enumerate(pr: &PrunedInstance) -> Result<Self> {
        let count = binom_u128(pr.p as u64, pr.k as u64);
        if count > ENUMERATION_CAP {
            return Err(Error::CapExceeded {
                what: "k-subsets",
                required: count,
                cap: ENUMERATION_CAP,
            });
        }
        let mut uncovered = Vec::with_capacity(count as usize);
        let mut overlaps = Vec::with_capacity(count as usize);
        for_each_combination(pr.p, pr.k, |c| {
            uncovered.push(pr.uncovered_by(c) as u32);
            overlaps.push(c.iter().filter(|&&i| pr.is_planted(i)).count() as u32);
        });
        Ok(Self {
            p: pr.p,
            k: pr.k,
            m: pr.m,
            uncovered,
            overlaps,
        })
    }

    pub fn len(&self) -> usize {
        self.uncovered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uncovered.is_empty()
    }

    /// Normalised `exp(-beta H)`.
    pub fn gibbs(&self, beta: f64) -> Vec<f64> {
        let m = self.m as f64;
        let umin = self.uncovered.iter().copied().min().unwrap_or(0);
        let mut w: Vec<f64> = self
            .uncovered
            .iter()
            .map(|&u| (-beta * (u - umin) as f64 / m).exp())
            .collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        w
    }
}

#[derive(Debug, Clone)]
pub struct Stationary {
    pub states: StateSpace,
    pub gibbs: Vec<f64>,
    pub power: Vec<f64>,
    pub iterations: usize,
    /// L1 change of the last power-iteration step.
    pub residual: f64,
    /// Max absolute difference between the two vectors.
    pub max_abs_diff: f64,
}

/// Gibbs vector and, independently, the fixed point of the exact kernel by
/// power iteration started from the uniform distribution.
pub fn stationary_exact(pr: &PrunedInstance, beta: f64, rule: Rule) -> Result<Stationary> {
    let states = StateSpace::enumerate(pr)?;
    let first = KSubset::from_sorted((0..pr.k).collect());
    check_chain(pr, beta, &first)?;
    let (k, rest) = (pr.k, pr.p - pr.k);
    let deg = k * rest;
    let entries = states.len() as u128 * deg as u128;
    if entries > KERNEL_ENTRY_CAP {
        return Err(Error::CapExceeded {
            what: "kernel entries",
            required: entries,
            cap: KERNEL_ENTRY_CAP,
        });
    }
    // neighbor ranks, row-major in (member, outsider) order
    let mut nbr: Vec<u32> = Vec::with_capacity(entries as usize);
    let mut buf = vec![0usize; k];
    for_each_combination(pr.p, k, |c| {
        let outside = (0..pr.p).filter(|j| c.binary_search(j).is_err());
        for mi in 0..k {
            for j in outside.clone() {
                buf.copy_from_slice(c);
                buf[mi] = j;
                buf.sort_unstable();
                nbr.push(rank_combination(pr.p, &buf) as u32);
            }
        }
    });
    let m = pr.m as f64;
    let w = 1.0 / deg as f64;
    // acceptance indexed by uncovered difference + m
    let acc: Vec<f64> = (0..=2 * pr.m)
        .map(|d| accept_prob(rule, beta, (d as f64 - m) / m))
        .collect();

    let ns = states.len();
    let mut v = vec![1.0 / ns as f64; ns];
    let mut next = vec![0.0; ns];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < POWER_MAX_ITER && residual > POWER_TOL {
        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..ns {
            let us = states.uncovered[s] as usize;
            let mut out = 0.0;
            for &t in &nbr[s * deg..(s + 1) * deg] {
                let t = t as usize;
                let a = w * acc[states.uncovered[t] as usize + pr.m - us];
                next[t] += v[s] * a;
                out += a;
            }
            next[s] += v[s] * (1.0 - out);
        }
        residual = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut v, &mut next);
        iterations += 1;
    }
    if residual > POWER_TOL {
        return Err(Error::NoRoot(format!(
            "power iteration did not converge in {POWER_MAX_ITER} steps (residual {residual:e})"
        )));
    }
    let gibbs = states.gibbs(beta);
    let max_abs_diff = gibbs.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Stationary {
        states,
        gibbs,
        power: v,
        iterations,
        residual,
        max_abs_diff,
    })
}

/// `pi(dB) / pi(B)` with `B = {overlap <= floor(eps1 k)}` and `dB = {overlap = floor(eps1 k)}`.
pub fn bottleneck_ratio(pr: &PrunedInstance, beta: f64, eps1: f64) -> Result<f64> {
    if !(eps1 > 0.0 && eps1 < 1.0) {
        return domain(format!("eps1 = {eps1} is outside (0, 1)"));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return domain(format!("beta = {beta} must be a finite nonnegative number"));
    }
    if pr.m == 0 {
        return Err(Error::UndefinedEnergy);
    }
    let l = (eps1 * pr.k as f64).floor() as u32;
    let states = StateSpace::enumerate(pr)?;
    let m = pr.m as f64;
    let umin = states
        .uncovered
        .iter()
        .zip(&states.overlaps)
        .filter(|(_, &o)| o <= l)
        .map(|(&u, _)| u)
        .min()
        .ok_or_else(|| Error::Domain(format!("B is empty: no k-subset has overlap <= {l}")))?;
    let (mut edge, mut all) = (0.0, 0.0);
    for (&u, &o) in states.uncovered.iter().zip(&states.overlaps) {
        if o <= l {
            let w = (-beta * (u - umin) as f64 / m).exp();
            all += w;
            if o == l {
                edge += w;
            }
        }
    }
    Ok(edge / all)
}
