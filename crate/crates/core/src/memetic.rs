//! Memetic search: crossover, mutation, hill climbing and selection over a
//! population of bijections, scored by `2^(3n) - Σddt²`.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, Metrics};
use crate::cost::{fitness, CostSpec, SearchState};
use crate::error::{Error, Result};
use crate::localsearch::{climb, ClimbOptions, MoveFilter};
use crate::rng::{self, derive_seed};
use crate::sbox::SBox;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Crossover {
    #[default]
    Pmx,
    Cycle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Roulette,
    #[default]
    Rank,
}

impl FromStr for Crossover {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pmx" => Ok(Crossover::Pmx),
            "cycle" => Ok(Crossover::Cycle),
            _ => Err(Error::InvalidParam(format!("crossover `{s}`: expected pmx or cycle"))),
        }
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roulette" => Ok(Selection::Roulette),
            "rank" => Ok(Selection::Rank),
            _ => Err(Error::InvalidParam(format!("selection `{s}`: expected roulette or rank"))),
        }
    }
}

impl fmt::Display for Crossover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Crossover::Pmx => "pmx",
            Crossover::Cycle => "cycle",
        })
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Roulette => "roulette",
            Selection::Rank => "rank",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemeticParams {
    pub n: u32,
    pub popsize: usize,
    /// Defaults to `popsize` when unset.
    pub post_crossover_size: Option<usize>,
    pub generations: usize,
    pub crossover: Crossover,
    pub crossover_probability: f64,
    pub children: u8,
    pub max_mutations: u32,
    pub mutation_probability: f64,
    pub selection: Selection,
    pub elitism: usize,
    pub seed: u64,
    #[serde(default)]
    pub filter: Option<MoveFilter>,
}

impl Default for MemeticParams {
    fn default() -> Self {
        MemeticParams {
            n: 5,
            popsize: 400,
            post_crossover_size: None,
            generations: 50,
            crossover: Crossover::Pmx,
            crossover_probability: 1.0,
            children: 2,
            max_mutations: 1,
            mutation_probability: 0.6,
            selection: Selection::Rank,
            elitism: 1,
            seed: 0,
            filter: None,
        }
    }
}

impl MemeticParams {
    pub fn pcp_size(&self) -> usize {
        self.post_crossover_size.unwrap_or(self.popsize)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(3..=crate::sbox::MAX_WIDTH).contains(&self.n) {
            return bad(format!("n = {} outside 3..=8", self.n));
        }
        if self.popsize < 2 {
            return bad("population needs at least two members".into());
        }
        if self.elitism >= self.popsize {
            return bad(format!("elitism {} must be below popsize {}", self.elitism, self.popsize));
        }
        if self.pcp_size() == 0 {
            return bad("post-crossover size must be positive".into());
        }
        if !(1..=2).contains(&self.children) {
            return bad(format!("children must be 1 or 2, got {}", self.children));
        }
        for (name, p) in [("crossover", self.crossover_probability), ("mutation", self.mutation_probability)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} probability {p} outside [0, 1]"));
            }
        }
        if let Some(f) = &self.filter {
            if f.n() != self.n {
                return bad("filter width does not match n".into());
            }
        }
        Ok(())
    }
}

fn check_parents(p1: &SBox, p2: &SBox) -> Result<()> {
    if p1.len() != p2.len() {
        return Err(Error::BadLength(p1.len(), p2.len()));
    }
    if !p1.is_bijective() || !p2.is_bijective() {
        return Err(Error::NotBijective);
    }
    Ok(())
}

/// Partially mapped crossover keeping `p1[cut1..cut2]`.
pub fn pmx_crossover(p1: &SBox, p2: &SBox, cut1: usize, cut2: usize) -> Result<SBox> {
    check_parents(p1, p2)?;
    let len = p1.len();
    if cut1 >= cut2 || cut2 > len {
        return Err(Error::InvalidParam(format!("cuts ({cut1}, {cut2}) invalid for length {len}")));
    }
    let (a, b) = (p1.table(), p2.table());
    let mut pos_in_p1 = vec![0usize; len];
    for (x, &v) in a.iter().enumerate() {
        pos_in_p1[v as usize] = x;
    }
    let mut child = vec![0u8; len];
    let mut in_child = vec![false; len];
    for x in cut1..cut2 {
        child[x] = a[x];
        in_child[a[x] as usize] = true;
    }
    for x in (0..cut1).chain(cut2..len) {
        let mut v = b[x];
        while in_child[v as usize] {
            v = b[pos_in_p1[v as usize]];
        }
        child[x] = v;
        in_child[v as usize] = true;
    }
    SBox::from_table(child)
}

/// Cycle crossover: positions on the cycle through `start` come from `p1`,
/// the rest from `p2`.
pub fn cycle_crossover(p1: &SBox, p2: &SBox, start: usize) -> Result<SBox> {
    check_parents(p1, p2)?;
    let len = p1.len();
    if start >= len {
        return Err(Error::IndexOutOfRange(start, len));
    }
    let (a, b) = (p1.table(), p2.table());
    let mut pos_in_p1 = vec![0usize; len];
    for (x, &v) in a.iter().enumerate() {
        pos_in_p1[v as usize] = x;
    }
    let mut child: Vec<u8> = b.to_vec();
    let mut x = start;
    loop {
        child[x] = a[x];
        x = pos_in_p1[b[x] as usize];
        if x == start {
            break;
        }
    }
    SBox::from_table(child)
}

fn random_cross<R: Rng + ?Sized>(p1: &SBox, p2: &SBox, method: Crossover, rng: &mut R) -> SBox {
    let len = p1.len();
    match method {
        Crossover::Pmx => {
            let mut c1 = rng.gen_range(0..=len);
            let mut c2 = rng.gen_range(0..len);
            if c2 >= c1 {
                c2 += 1;
            }
            if c1 > c2 {
                std::mem::swap(&mut c1, &mut c2);
            }
            pmx_crossover(p1, p2, c1, c2).expect("valid cuts")
        }
        Crossover::Cycle => cycle_crossover(p1, p2, rng.gen_range(0..len)).expect("valid start"),
    }
}

/// Up to `max` Bernoulli(`p`) trials, each applying one random swap.
pub fn mutate<R: Rng + ?Sized>(s: &SBox, max: u32, p: f64, filter: Option<&MoveFilter>, rng: &mut R) -> SBox {
    let mut out = s.clone();
    for _ in 0..max {
        if rng.gen::<f64>() < p {
            let swap = match filter {
                Some(f) => f.random_swap(&out, rng),
                None => {
                    let len = out.len();
                    let a = rng.gen_range(0..len);
                    let mut b = rng.gen_range(0..len - 1);
                    if b >= a {
                        b += 1;
                    }
                    Some((a, b))
                }
            };
            if let Some((a, b)) = swap {
                out.swap_unchecked(a, b);
            }
        }
    }
    out
}

/// Probability of drawing each member under a selection method.
pub fn selection_probabilities(fitnesses: &[u64], method: Selection) -> Result<Vec<f64>> {
    let weights = selection_weights(fitnesses, method)?;
    let total: u64 = weights.iter().sum();
    Ok(weights.iter().map(|&w| w as f64 / total as f64).collect())
}

fn selection_weights(fitnesses: &[u64], method: Selection) -> Result<Vec<u64>> {
    match method {
        Selection::Roulette => {
            if fitnesses.iter().all(|&f| f == 0) {
                return Err(Error::DegeneratePopulation);
            }
            Ok(fitnesses.to_vec())
        }
        Selection::Rank => {
            if fitnesses.is_empty() {
                return Err(Error::DegeneratePopulation);
            }
            let mut order: Vec<usize> = (0..fitnesses.len()).collect();
            order.sort_by_key(|&i| fitnesses[i]);
            let mut w = vec![0u64; fitnesses.len()];
            for (rank, &i) in order.iter().enumerate() {
                w[i] = rank as u64 + 1;
            }
            Ok(w)
        }
    }
}

/// `count` independent draws with replacement; returns member indices.
pub fn select<R: Rng + ?Sized>(fitnesses: &[u64], method: Selection, count: usize, rng: &mut R) -> Result<Vec<usize>> {
    let weights = selection_weights(fitnesses, method)?;
    let dist = WeightedIndex::new(&weights).map_err(|_| Error::DegeneratePopulation)?;
    Ok((0..count).map(|_| dist.sample(rng)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: u64,
    pub mean_fitness: f64,
    pub best_du: u32,
    pub best_nl: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemeticResult {
    pub best: SBox,
    pub best_fitness: u64,
    pub metrics: Metrics,
    pub generations: Vec<GenerationStats>,
}

struct Scored {
    sbox: SBox,
    fitness: u64,
}

fn climb_one(s: SBox, seed: u64, filter: Option<&MoveFilter>) -> Scored {
    let mut st = SearchState::new(s, CostSpec::sumsq()).expect("DDT spec");
    let opts = ClimbOptions { filter: filter.cloned(), ..Default::default() };
    climb(&mut st, &opts, &mut rng::seeded(seed));
    let sbox = st.into_sbox();
    Scored { fitness: fitness(&sbox), sbox }
}

fn climb_all(boxes: Vec<SBox>, base: u64, generation: u64, filter: Option<&MoveFilter>) -> Vec<Scored> {
    boxes
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| climb_one(s, derive_seed(base, &[generation, i as u64]), filter))
        .collect()
}

fn stats(generation: usize, pop: &[Scored]) -> GenerationStats {
    let best = pop.iter().max_by_key(|c| c.fitness).expect("non-empty population");
    let m = analysis::metrics(&best.sbox);
    GenerationStats {
        generation,
        best_fitness: best.fitness,
        mean_fitness: pop.iter().map(|c| c.fitness as f64).sum::<f64>() / pop.len() as f64,
        best_du: m.du,
        best_nl: m.nl,
    }
}

/// Runs the memetic search and returns the fittest individual seen.
pub fn evolve(params: &MemeticParams) -> Result<MemeticResult> {
    evolve_with(params, |_| {})
}

/// As [`evolve`], calling `observe` after every generation (including the
/// initial population as generation 0).
pub fn evolve_with(params: &MemeticParams, mut observe: impl FnMut(&GenerationStats)) -> Result<MemeticResult> {
    params.validate()?;
    let filter = params.filter.as_ref();
    let mut r = rng::seeded(params.seed);
    let initial: Vec<SBox> = (0..params.popsize)
        .map(|_| match filter {
            Some(f) => f.random_conforming(&mut r),
            None => SBox::random_bijection_with(params.n, &mut r),
        })
        .collect::<Result<_>>()?;
    let mut pop = climb_all(initial, params.seed, 0, filter);
    let mut best = pop.iter().max_by_key(|c| c.fitness).map(|c| (c.sbox.clone(), c.fitness)).unwrap();
    let mut history = vec![stats(0, &pop)];
    observe(&history[0]);

    for generation in 1..=params.generations {
        // Stage 1: crossover.
        let size = params.pcp_size();
        let mut pcp: Vec<SBox> = Vec::with_capacity(size + 1);
        while pcp.len() < size {
            let p1 = &pop[r.gen_range(0..pop.len())].sbox;
            let p2 = &pop[r.gen_range(0..pop.len())].sbox;
            if r.gen::<f64>() < params.crossover_probability {
                let mut o1 = random_cross(p1, p2, params.crossover, &mut r);
                let mut o2 = (params.children == 2).then(|| random_cross(p2, p1, params.crossover, &mut r));
                if let Some(f) = filter {
                    if !f.admits(&o1) {
                        o1 = p1.clone();
                    }
                    if o2.as_ref().is_some_and(|o| !f.admits(o)) {
                        o2 = Some(p2.clone());
                    }
                }
                pcp.push(o1);
                pcp.extend(o2);
            } else {
                pcp.push(p1.clone());
                if params.children == 2 {
                    pcp.push(p2.clone());
                }
            }
        }
        pcp.truncate(size);

        // Stage 2: mutation.
        for c in pcp.iter_mut() {
            *c = mutate(c, params.max_mutations, params.mutation_probability, filter, &mut r);
        }

        // Stage 3: hill climbing.
        let pcp = climb_all(pcp, params.seed, generation as u64, filter);

        // Stage 4: elitism, then selection from the climbed pool.
        let mut next: Vec<Scored> = Vec::with_capacity(params.popsize);
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[b].fitness.cmp(&pop[a].fitness));
        for &i in order.iter().take(params.elitism) {
            next.push(Scored { sbox: pop[i].sbox.clone(), fitness: pop[i].fitness });
        }
        let fits: Vec<u64> = pcp.iter().map(|c| c.fitness).collect();
        for i in select(&fits, params.selection, params.popsize - next.len(), &mut r)? {
            next.push(Scored { sbox: pcp[i].sbox.clone(), fitness: pcp[i].fitness });
        }
        for c in &pcp {
            if c.fitness > best.1 {
                best = (c.sbox.clone(), c.fitness);
            }
        }
        pop = next;
        debug_assert!(pop.iter().all(|c| c.sbox.is_bijective()));
        let s = stats(generation, &pop);
        observe(&s);
        history.push(s);
    }
    let metrics = analysis::metrics(&best.0);
    Ok(MemeticResult { best: best.0, best_fitness: best.1, metrics, generations: history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tbl(v: &[u8]) -> SBox {
        // Ten-entry examples are padded to sixteen with fixed tail values.
        let mut t = v.to_vec();
        t.extend(10..16);
        SBox::from_table(t).unwrap()
    }

    #[test]
    fn crossover_worked_examples() {
        let p1 = tbl(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let p2 = tbl(&[2, 5, 0, 9, 7, 3, 8, 6, 1, 4]);
        let c = pmx_crossover(&p1, &p2, 2, 6).unwrap();
        assert_eq!(&c.table()[..10], &[0, 9, 2, 3, 4, 5, 8, 6, 1, 7]);
        let c = cycle_crossover(&p1, &p2, 3).unwrap();
        assert_eq!(&c.table()[..10], &[2, 1, 0, 3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn crossover_trivial_cases() {
        let p1 = SBox::random_bijection(4, 1).unwrap();
        let p2 = SBox::random_bijection(4, 2).unwrap();
        assert_eq!(pmx_crossover(&p1, &p1, 3, 9).unwrap(), p1);
        assert_eq!(pmx_crossover(&p1, &p2, 0, 16).unwrap(), p1);
        assert_eq!(cycle_crossover(&p1, &p1, 5).unwrap(), p1);
        let c = pmx_crossover(&p1, &p2, 4, 11).unwrap();
        assert_eq!(&c.table()[4..11], &p1.table()[4..11]);
        assert!(c.is_bijective());
        assert!(pmx_crossover(&p1, &SBox::identity(3), 0, 2).is_err());
        // A shift by one is a single cycle covering every position.
        let rot = SBox::from_table((0..16).map(|x| ((x + 1) % 16) as u8).collect()).unwrap();
        assert_eq!(cycle_crossover(&rot, &SBox::identity(4), 0).unwrap(), rot);
    }

    #[test]
    fn mutation_counts() {
        let s = SBox::random_bijection(4, 3).unwrap();
        let mut r = rng::seeded(4);
        assert_eq!(mutate(&s, 3, 0.0, None, &mut r), s);
        let m = mutate(&s, 1, 1.0, None, &mut r);
        assert_eq!(s.table().iter().zip(m.table()).filter(|(a, b)| a != b).count(), 2);
    }

    #[test]
    fn selection_formulas() {
        let p = selection_probabilities(&[1, 2, 3], Selection::Roulette).unwrap();
        assert_eq!(p, vec![1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]);
        let p = selection_probabilities(&[30, 10, 20], Selection::Rank).unwrap();
        assert_eq!(p, vec![6.0 / 12.0, 2.0 / 12.0, 4.0 / 12.0]);
        assert!(matches!(select(&[0, 0], Selection::Roulette, 1, &mut rng::seeded(1)), Err(Error::DegeneratePopulation)));
    }

    #[test]
    fn zero_generations_and_sizes() {
        let p = MemeticParams { n: 4, popsize: 12, generations: 0, seed: 3, ..Default::default() };
        let r = evolve(&p).unwrap();
        assert_eq!(r.generations.len(), 1);
        assert_eq!(r.generations[0].best_fitness, r.best_fitness);
        let p = MemeticParams { generations: 4, post_crossover_size: Some(7), ..p };
        let r = evolve(&p).unwrap();
        assert!(r.generations.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
        assert_eq!(r.best_fitness, fitness(&r.best));
    }

    #[test]
    fn validation() {
        assert!(MemeticParams { elitism: 400, ..Default::default() }.validate().is_err());
        assert!(MemeticParams { children: 3, ..Default::default() }.validate().is_err());
        assert!(MemeticParams::default().validate().is_ok());
    }
}
