//! Ant colony search over the assignment graph `S(i) = j`.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, Metrics};
use crate::cost::{sumsq_ddt_cost, SearchState};
use crate::error::{Error, Result};
use crate::localsearch::{climb, ClimbOptions, MoveFilter};
use crate::rng::{self, derive_seed};
use crate::sbox::SBox;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    AntSystem,
    Dorigo,
    Luke,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NextIndex {
    #[default]
    Cycle,
    Increment,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ant-system" => Ok(Variant::AntSystem),
            "dorigo" => Ok(Variant::Dorigo),
            "luke" => Ok(Variant::Luke),
            _ => Err(Error::InvalidParam(format!("variant `{s}`: expected ant-system, dorigo or luke"))),
        }
    }
}

impl FromStr for NextIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycle" => Ok(NextIndex::Cycle),
            "increment" => Ok(NextIndex::Increment),
            _ => Err(Error::InvalidParam(format!("next-index method `{s}`: expected cycle or increment"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::AntSystem => "ant-system",
            Variant::Dorigo => "dorigo",
            Variant::Luke => "luke",
        })
    }
}

impl fmt::Display for NextIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NextIndex::Cycle => "cycle",
            NextIndex::Increment => "increment",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AcoParams {
    pub n: u32,
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub e: f64,
    pub q0: f64,
    pub q: f64,
    /// Defaults to `1 / (2^n · (2^n - 1) · 2^n / 2)` when unset.
    pub tau0: Option<f64>,
    pub ants: usize,
    pub iterations: usize,
    pub next_index: NextIndex,
    pub hillclimb: bool,
    pub seed: u64,
    #[serde(default)]
    pub filter: Option<MoveFilter>,
}

impl Default for AcoParams {
    fn default() -> Self {
        AcoParams {
            n: 5,
            variant: Variant::AntSystem,
            alpha: 1.0,
            beta: 2.0,
            rho: 0.1,
            e: 0.1,
            q0: 0.0,
            q: 1.0,
            tau0: None,
            ants: 10,
            iterations: 100,
            next_index: NextIndex::Cycle,
            hillclimb: true,
            seed: 0,
            filter: None,
        }
    }
}

pub fn default_tau0(n: u32) -> f64 {
    let size = (1u64 << n) as f64;
    1.0 / (size * ((size - 1.0) * size) / 2.0)
}

impl AcoParams {
    pub fn tau0(&self) -> f64 {
        self.tau0.unwrap_or_else(|| default_tau0(self.n))
    }

    /// Elitist selection probability; always zero for Ant System.
    pub fn effective_q0(&self) -> f64 {
        match self.variant {
            Variant::AntSystem => 0.0,
            _ => self.q0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(3..=crate::sbox::MAX_WIDTH).contains(&self.n) {
            return bad(format!("n = {} outside 3..=8", self.n));
        }
        for (name, v) in [("rho", self.rho), ("e", self.e), ("q0", self.q0)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if self.rho >= 1.0 && self.variant != Variant::Dorigo {
            return bad("rho = 1 would evaporate all pheromone".into());
        }
        if !(self.tau0() > 0.0) || !(self.q > 0.0) {
            return bad("tau0 and Q must be positive".into());
        }
        if self.ants == 0 {
            return bad("at least one ant is required".into());
        }
        if let Some(f) = &self.filter {
            if f.n() != self.n {
                return bad("filter width does not match n".into());
            }
        }
        Ok(())
    }
}

/// Pheromone on edge `S(i) = j`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Pheromone {
    size: usize,
    tau: Vec<f64>,
}

impl Pheromone {
    pub fn uniform(n: u32, tau0: f64) -> Self {
        let size = 1usize << n;
        Pheromone { size, tau: vec![tau0; size * size] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.tau[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.tau[i * self.size + j] = v;
    }

    pub fn all_positive(&self) -> bool {
        self.tau.iter().all(|&t| t > 0.0)
    }

    pub fn evaporate(&mut self, rho: f64) {
        for t in &mut self.tau {
            *t *= 1.0 - rho;
        }
    }
}

/// Partial assignment with the sum of squares of its partial DDT: ordered
/// pairs of distinct assigned inputs, plus one count in cell (0,0) per
/// assigned input. A complete trail's cost equals `Σddt²` of the box.
#[derive(Clone, Debug)]
pub struct Trail {
    n: u32,
    assign: Vec<Option<u8>>,
    used: Vec<bool>,
    order: Vec<usize>,
    ddt: Vec<u32>,
    cost: u64,
}

impl Trail {
    pub fn new(n: u32) -> Self {
        let size = 1usize << n;
        Trail {
            n,
            assign: vec![None; size],
            used: vec![false; size],
            order: Vec::with_capacity(size),
            ddt: vec![0; size * size],
            cost: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.order.len() == self.assign.len()
    }

    pub fn running_cost(&self) -> u64 {
        self.cost
    }

    pub fn assigned(&self, i: usize) -> Option<usize> {
        self.assign[i].map(|v| v as usize)
    }

    pub fn is_used(&self, j: usize) -> bool {
        self.used[j]
    }

    /// Inputs in the order they were assigned.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn partial_ddt(&self) -> &[u32] {
        &self.ddt
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        let size = self.len();
        if i >= size || j >= size {
            return Err(Error::IndexOutOfRange(i.max(j), size));
        }
        if self.assign[i].is_some() {
            return Err(Error::InvalidParam(format!("input {i} already assigned")));
        }
        if self.used[j] {
            return Err(Error::InvalidParam(format!("output {j} already used")));
        }
        Ok(())
    }

    fn delta_unchecked(&self, i: usize, j: usize) -> u64 {
        let size = self.len();
        let mut d = 2 * self.ddt[0] as u64 + 1;
        for &y in &self.order {
            let sy = self.assign[y].unwrap() as usize;
            let c = self.ddt[(i ^ y) * size + (j ^ sy)] as u64;
            d += 4 * c + 4;
        }
        d
    }

    /// Increase in the running cost if `S(i) = j` were added.
    pub fn cost_increase(&self, i: usize, j: usize) -> Result<u64> {
        self.check(i, j)?;
        Ok(self.delta_unchecked(i, j))
    }

    pub fn add(&mut self, i: usize, j: usize) -> Result<()> {
        self.check(i, j)?;
        let size = self.len();
        self.cost += self.delta_unchecked(i, j);
        self.ddt[0] += 1;
        for &y in &self.order {
            let sy = self.assign[y].unwrap() as usize;
            self.ddt[(i ^ y) * size + (j ^ sy)] += 2;
        }
        self.assign[i] = Some(j as u8);
        self.used[j] = true;
        self.order.push(i);
        Ok(())
    }

    pub fn to_sbox(&self) -> Result<SBox> {
        if !self.is_complete() {
            return Err(Error::InvalidParam("trail is incomplete".into()));
        }
        SBox::new(self.n, self.n, self.assign.iter().map(|v| v.unwrap()).collect())
    }
}

/// `η = 1 / (1 + Δ)` where `Δ` is the cost increase of adding `S(i) = j`.
pub fn edge_desirability(trail: &Trail, i: usize, j: usize) -> Result<f64> {
    Ok(1.0 / (1.0 + trail.cost_increase(i, j)? as f64))
}

/// Picks an unused output for input `i`, optionally capped at `bound`.
pub fn select_edge<R: Rng + ?Sized>(
    trail: &Trail,
    i: usize,
    pheromone: &Pheromone,
    params: &AcoParams,
    bound: Option<usize>,
    rng: &mut R,
) -> Result<usize> {
    let cap = bound.map_or(trail.len(), |b| (b + 1).min(trail.len()));
    let options: Vec<usize> = (0..cap).filter(|&j| !trail.is_used(j)).collect();
    if options.is_empty() {
        return Err(Error::InvalidParam(format!("no admissible output left for input {i}")));
    }
    let scores: Vec<f64> = options
        .iter()
        .map(|&j| {
            let eta = 1.0 / (1.0 + trail.delta_unchecked(i, j) as f64);
            pheromone.get(i, j).powf(params.alpha) * eta.powf(params.beta)
        })
        .collect();
    let q0 = params.effective_q0();
    let q: f64 = rng.gen();
    if q0 > 0.0 && q <= q0 {
        let mut best = 0;
        for k in 1..options.len() {
            if scores[k] > scores[best] {
                best = k;
            }
        }
        return Ok(options[best]);
    }
    match WeightedIndex::new(&scores) {
        Ok(dist) => Ok(options[dist.sample(rng)]),
        // Every score underflowed; fall back to a uniform pick.
        Err(_) => Ok(options[rng.gen_range(0..options.len())]),
    }
}

fn next_node(trail: &Trail, i: usize, j: usize, method: NextIndex) -> Option<usize> {
    if trail.is_complete() {
        return None;
    }
    let size = trail.len();
    let candidate = match method {
        NextIndex::Cycle => j,
        NextIndex::Increment => (i + 1) % size,
    };
    if trail.assigned(candidate).is_none() {
        return Some(candidate);
    }
    match method {
        NextIndex::Cycle => (0..size).find(|&x| trail.assigned(x).is_none()),
        NextIndex::Increment => (1..size).map(|k| (i + k) % size).find(|&x| trail.assigned(x).is_none()),
    }
}

struct Ant {
    trail: Trail,
    node: Option<usize>,
}

/// Builds one trail per ant, taking edges round-robin in ant order.
pub fn construct_trails<R: Rng + ?Sized>(
    pheromone: &mut Pheromone,
    params: &AcoParams,
    rng: &mut R,
) -> Result<Vec<Trail>> {
    let tau0 = params.tau0();
    let mut ants: Vec<Ant> = (0..params.ants).map(|_| Ant { trail: Trail::new(params.n), node: Some(0) }).collect();
    let pick = |trail: &mut Trail, i: usize, bound: Option<usize>, pheromone: &mut Pheromone, rng: &mut R| -> Result<usize> {
        let j = select_edge(trail, i, pheromone, params, bound, rng)?;
        trail.add(i, j)?;
        if params.variant == Variant::Dorigo {
            let t = pheromone.get(i, j);
            pheromone.set(i, j, (1.0 - params.rho) * t + params.rho * tau0);
        }
        Ok(j)
    };
    if let Some(f) = &params.filter {
        for ant in ants.iter_mut() {
            for (&x, &y) in f.fixed() {
                ant.trail.add(x, y)?;
            }
        }
        let mut bounded: Vec<(usize, usize)> = f.bounds().iter().map(|(&x, &b)| (b, x)).collect();
        bounded.sort_unstable();
        for &(b, x) in &bounded {
            for ant in ants.iter_mut() {
                if ant.trail.assigned(x).is_none() {
                    pick(&mut ant.trail, x, Some(b), pheromone, rng)?;
                }
            }
        }
        for ant in ants.iter_mut() {
            ant.node = next_node(&ant.trail, usize::MAX, 0, NextIndex::Cycle);
        }
    }
    loop {
        let mut progressed = false;
        for ant in ants.iter_mut() {
            let Some(i) = ant.node else { continue };
            let j = pick(&mut ant.trail, i, None, pheromone, rng)?;
            ant.node = next_node(&ant.trail, i, j, params.next_index);
            progressed = true;
        }
        if !progressed {
            break;
        }
    }
    Ok(ants.into_iter().map(|a| a.trail).collect())
}

/// Pheromone update after an iteration. `solutions` pairs each ant's final
/// box with its cost; `best` is the best-so-far box and cost.
pub fn global_update(pheromone: &mut Pheromone, solutions: &[(SBox, u64)], best: (&SBox, u64), params: &AcoParams) {
    let elitist = |pheromone: &mut Pheromone| {
        let deposit = params.q / best.1 as f64;
        for (i, &j) in best.0.table().iter().enumerate() {
            let t = pheromone.get(i, j as usize);
            pheromone.set(i, j as usize, (1.0 - params.e) * t + params.e * deposit);
        }
    };
    match params.variant {
        Variant::AntSystem => {
            pheromone.evaporate(params.rho);
            for (s, c) in solutions {
                let deposit = params.q / *c as f64;
                for (i, &j) in s.table().iter().enumerate() {
                    let t = pheromone.get(i, j as usize);
                    pheromone.set(i, j as usize, t + deposit);
                }
            }
        }
        Variant::Dorigo => elitist(pheromone),
        Variant::Luke => {
            pheromone.evaporate(params.rho);
            elitist(pheromone);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub iteration_best_cost: u64,
    pub best_cost: u64,
    pub best_du: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AcoResult {
    pub best: SBox,
    pub best_cost: u64,
    pub metrics: Metrics,
    pub iterations: Vec<IterationStats>,
}

pub fn run_colony(params: &AcoParams) -> Result<AcoResult> {
    run_colony_with(params, |_| {})
}

pub fn run_colony_with(params: &AcoParams, mut observe: impl FnMut(&IterationStats)) -> Result<AcoResult> {
    params.validate()?;
    let mut r = rng::seeded(params.seed);
    let mut pheromone = Pheromone::uniform(params.n, params.tau0());
    let mut best = match &params.filter {
        Some(f) => f.random_conforming(&mut r)?,
        None => SBox::random_bijection_with(params.n, &mut r)?,
    };
    let mut best_cost = sumsq_ddt_cost(&best);
    let mut history = Vec::with_capacity(params.iterations);
    let opts = ClimbOptions { filter: params.filter.clone(), ..Default::default() };
    for iteration in 0..params.iterations {
        let trails = construct_trails(&mut pheromone, params, &mut r)?;
        let mut solutions = Vec::with_capacity(trails.len());
        for (k, t) in trails.iter().enumerate() {
            let mut s = t.to_sbox()?;
            if params.hillclimb {
                let mut st = SearchState::sumsq(s);
                climb(&mut st, &opts, &mut rng::seeded(derive_seed(params.seed, &[iteration as u64, k as u64])));
                s = st.into_sbox();
            }
            let c = sumsq_ddt_cost(&s);
            solutions.push((s, c));
        }
        let (it_box, it_cost) = solutions.iter().min_by_key(|(_, c)| *c).cloned().expect("at least one ant");
        if it_cost < best_cost {
            best = it_box;
            best_cost = it_cost;
        }
        global_update(&mut pheromone, &solutions, (&best, best_cost), params);
        debug_assert!(pheromone.all_positive());
        let s = IterationStats {
            iteration,
            iteration_best_cost: it_cost,
            best_cost,
            best_du: analysis::differential_profile(&best).du,
        };
        observe(&s);
        history.push(s);
    }
    let metrics = analysis::metrics(&best);
    Ok(AcoResult { best, best_cost, metrics, iterations: history })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Partial-DDT cost recomputed from the assignment alone.
    fn brute_partial_cost(t: &Trail) -> u64 {
        let size = t.len();
        let mut ddt = vec![0u64; size * size];
        let assigned: Vec<(usize, usize)> = (0..size).filter_map(|x| t.assigned(x).map(|y| (x, y))).collect();
        for &(x, sx) in &assigned {
            for &(y, sy) in &assigned {
                ddt[(x ^ y) * size + (sx ^ sy)] += 1;
            }
        }
        ddt.iter().map(|v| v * v).sum()
    }

    #[test]
    fn trail_cost_telescopes() {
        let s = SBox::random_bijection(4, 5).unwrap();
        let mut t = Trail::new(4);
        assert_eq!(t.cost_increase(3, 7).unwrap(), 1);
        assert_eq!(edge_desirability(&t, 3, 7).unwrap(), 0.5);
        for x in [3usize, 0, 15, 8, 1, 2, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14] {
            let before = t.running_cost();
            let d = t.cost_increase(x, s.get(x)).unwrap();
            t.add(x, s.get(x)).unwrap();
            assert_eq!(t.running_cost(), before + d);
            assert_eq!(t.running_cost(), brute_partial_cost(&t));
        }
        assert_eq!(t.running_cost(), sumsq_ddt_cost(&s));
        assert_eq!(t.to_sbox().unwrap(), s);
        assert!(t.cost_increase(0, 0).is_err());
    }

    #[test]
    fn tau0_default() {
        assert_eq!(default_tau0(5), 1.0 / 15872.0);
    }

    #[test]
    fn ant_system_update_arithmetic() {
        let p = AcoParams::default();
        let tau0 = p.tau0();
        let mut ph = Pheromone::uniform(5, tau0);
        let s = SBox::random_bijection(5, 1).unwrap();
        global_update(&mut ph, &[(s.clone(), 100)], (&s, 100), &p);
        let want = 0.9 * tau0 + 0.01;
        assert!((ph.get(0, s.get(0)) - want).abs() < 1e-15);
        let off = (s.get(0) + 1) % 32;
        assert!((ph.get(0, off) - 0.9 * tau0).abs() < 1e-18);
        let mut ph2 = Pheromone::uniform(5, tau0);
        global_update(&mut ph2, &[], (&s, 100), &p);
        assert!(ph2.tau.iter().all(|&t| (t - 0.9 * tau0).abs() < 1e-18));
    }

    #[test]
    fn elitist_selection_is_argmax() {
        let p = AcoParams { variant: Variant::Dorigo, q0: 1.0, ..Default::default() };
        let mut ph = Pheromone::uniform(5, 1.0);
        ph.set(0, 9, 5.0);
        let t = Trail::new(5);
        for seed in 0..20 {
            assert_eq!(select_edge(&t, 0, &ph, &p, None, &mut rng::seeded(seed)).unwrap(), 9);
        }
    }

    #[test]
    fn dorigo_local_update_fixed_point() {
        let p = AcoParams { variant: Variant::Dorigo, ants: 1, n: 3, ..Default::default() };
        let mut ph = Pheromone::uniform(3, p.tau0());
        construct_trails(&mut ph, &p, &mut rng::seeded(3)).unwrap();
        assert!(ph.tau.iter().all(|&t| (t - p.tau0()).abs() < 1e-18));
    }

    #[test]
    fn construction_order() {
        let mut r = rng::seeded(9);
        let p = AcoParams { ants: 3, n: 4, next_index: NextIndex::Increment, ..Default::default() };
        let mut ph = Pheromone::uniform(4, p.tau0());
        for t in construct_trails(&mut ph, &p, &mut r).unwrap() {
            assert_eq!(t.order(), (0..16).collect::<Vec<_>>().as_slice());
            assert!(t.to_sbox().unwrap().is_bijective());
        }
        let p = AcoParams { next_index: NextIndex::Cycle, ..p };
        for t in construct_trails(&mut ph, &p, &mut r).unwrap() {
            let o = t.order();
            assert_eq!(o[0], 0);
            for w in o.windows(2) {
                let prev_out = t.assigned(w[0]).unwrap();
                if t.order().iter().position(|&x| x == prev_out).unwrap() > t.order().iter().position(|&x| x == w[0]).unwrap() {
                    assert_eq!(w[1], prev_out);
                }
            }
        }
    }

    #[test]
    fn colony_runs() {
        let p = AcoParams { n: 4, ants: 4, iterations: 0, seed: 2, ..Default::default() };
        let r0 = run_colony(&p).unwrap();
        assert_eq!(r0.best, SBox::random_bijection_with(4, &mut rng::seeded(2)).unwrap());
        for variant in [Variant::AntSystem, Variant::Dorigo, Variant::Luke] {
            let p = AcoParams { iterations: 5, variant, q0: 0.5, ..p.clone() };
            let r = run_colony(&p).unwrap();
            assert!(r.iterations.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));
            assert_eq!(r.best_cost, sumsq_ddt_cost(&r.best));
            let again = run_colony(&p).unwrap();
            assert_eq!(again.best, r.best);
        }
    }

    #[test]
    fn constrained_trails_conform() {
        let f = MoveFilter::powers(5);
        let p = AcoParams { ants: 4, iterations: 2, filter: Some(f.clone()), ..Default::default() };
        let mut ph = Pheromone::uniform(5, p.tau0());
        for t in construct_trails(&mut ph, &p, &mut rng::seeded(1)).unwrap() {
            assert!(f.admits(&t.to_sbox().unwrap()));
        }
        assert!(f.admits(&run_colony(&p).unwrap().best));
    }
}
