//! Swap neighborhood, hill climbing and the output-value move filter.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{CostSpec, DuDfState, FlattenState, Landscape, LatNfState};
use crate::error::{Error, Result};
use crate::rng;
use crate::sbox::SBox;

/// All unordered swaps `(a, b)` with `a < b`.
pub fn all_swaps(len: usize) -> Vec<(usize, usize)> {
    (0..len).flat_map(|a| (a + 1..len).map(move |b| (a, b))).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClimbPolicy {
    #[default]
    FirstImprovement,
    BestImprovement,
}

/// Cost minimized by a single hill climb.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClimbCost {
    DuDf,
    LatNf,
    Flatten(CostSpec),
}

/// Hill-climb stage selector used by the search pipelines.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HcChoice {
    #[default]
    DuDf,
    LatNf,
    Dual,
}

impl FromStr for HcChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "du-df" => Ok(HcChoice::DuDf),
            "lat-nf" => Ok(HcChoice::LatNf),
            "dual" => Ok(HcChoice::Dual),
            _ => Err(Error::InvalidParam(format!("hill-climb cost `{s}`: expected du-df, lat-nf or dual"))),
        }
    }
}

impl fmt::Display for HcChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HcChoice::DuDf => "du-df",
            HcChoice::LatNf => "lat-nf",
            HcChoice::Dual => "dual",
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct ClimbOptions {
    pub policy: ClimbPolicy,
    pub filter: Option<MoveFilter>,
}

fn neighborhood(s: &SBox, filter: Option<&MoveFilter>) -> Vec<(usize, usize)> {
    all_swaps(s.len())
        .into_iter()
        .filter(|&(a, b)| filter.map_or(true, |f| f.allows_swap(s, a, b)))
        .collect()
}

/// Climbs until no swap in the (filtered) neighborhood improves the cost.
/// Returns the number of accepted moves.
pub fn climb<L: Landscape, R: Rng + ?Sized>(land: &mut L, opts: &ClimbOptions, rng: &mut R) -> usize {
    let mut moves = 0;
    match opts.policy {
        ClimbPolicy::FirstImprovement => {
            let mut pairs = all_swaps(land.sbox().len());
            pairs.shuffle(rng);
            let total = pairs.len();
            let mut since = 0;
            let mut k = 0;
            while since < total {
                let (a, b) = pairs[k];
                k = (k + 1) % total;
                since += 1;
                if let Some(f) = &opts.filter {
                    if !f.allows_swap(land.sbox(), a, b) {
                        continue;
                    }
                }
                if land.probe(a, b) < land.cost() {
                    land.commit();
                    moves += 1;
                    since = 0;
                }
            }
        }
        ClimbPolicy::BestImprovement => loop {
            let mut best: Option<(L::Cost, usize, usize)> = None;
            for (a, b) in neighborhood(land.sbox(), opts.filter.as_ref()) {
                let c = land.probe(a, b);
                if best.map_or(true, |(bc, _, _)| c < bc) {
                    best = Some((c, a, b));
                }
            }
            match best {
                Some((c, a, b)) if c < land.cost() => {
                    land.probe(a, b);
                    land.commit();
                    moves += 1;
                }
                _ => break,
            }
        },
    }
    moves
}

/// True when no admissible swap strictly lowers the landscape's cost.
pub fn is_local_optimum<L: Landscape>(land: &mut L, filter: Option<&MoveFilter>) -> bool {
    let cur = land.cost();
    let s = land.sbox().clone();
    neighborhood(&s, filter).into_iter().all(|(a, b)| land.probe(a, b) >= cur)
}

pub fn hill_climb(s: &SBox, cost: ClimbCost, seed: u64) -> SBox {
    hill_climb_with(s, cost, seed, &ClimbOptions::default())
}

pub fn hill_climb_with(s: &SBox, cost: ClimbCost, seed: u64, opts: &ClimbOptions) -> SBox {
    let mut r = rng::seeded(seed);
    match cost {
        ClimbCost::DuDf => {
            let mut l = DuDfState::new(s.clone());
            climb(&mut l, opts, &mut r);
            l.into_sbox()
        }
        ClimbCost::LatNf => {
            let mut l = LatNfState::new(s.clone());
            climb(&mut l, opts, &mut r);
            l.into_sbox()
        }
        ClimbCost::Flatten(spec) => {
            let mut l = FlattenState::new(s.clone(), spec);
            climb(&mut l, opts, &mut r);
            l.into_sbox()
        }
    }
}

/// Phase 1 climbs on `DU - 2/DF`; phase 2 accepts swaps that strictly lower
/// `max|LAT| - 2/NF` without raising `DU - 2/DF`.
pub fn dual_hill_climb(s: &SBox, seed: u64) -> SBox {
    dual_hill_climb_with(s, seed, &ClimbOptions::default())
}

pub fn dual_hill_climb_with(s: &SBox, seed: u64, opts: &ClimbOptions) -> SBox {
    let mut r = rng::seeded(seed);
    let mut du = DuDfState::new(s.clone());
    climb(&mut du, opts, &mut r);
    let mut lat = LatNfState::new(du.sbox().clone());
    let mut pairs = all_swaps(s.len());
    pairs.shuffle(&mut r);
    let total = pairs.len();
    let mut since = 0;
    let mut k = 0;
    while since < total {
        let (a, b) = pairs[k];
        k = (k + 1) % total;
        since += 1;
        if let Some(f) = &opts.filter {
            if !f.allows_swap(du.sbox(), a, b) {
                continue;
            }
        }
        if lat.probe(a, b) < lat.cost() && du.probe(a, b) <= du.cost() {
            lat.commit();
            du.commit();
            since = 0;
        }
    }
    du.into_sbox()
}

/// True when no swap is admissible for the dual climb's second phase.
pub fn is_dual_optimum(s: &SBox, filter: Option<&MoveFilter>) -> bool {
    let mut du = DuDfState::new(s.clone());
    let mut lat = LatNfState::new(s.clone());
    neighborhood(s, filter)
        .into_iter()
        .all(|(a, b)| !(lat.probe(a, b) < lat.cost() && du.probe(a, b) <= du.cost()))
}

/// Pins and upper bounds on output values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveFilter {
    n: u32,
    fixed: BTreeMap<usize, usize>,
    bounds: BTreeMap<usize, usize>,
}

impl MoveFilter {
    pub fn new(n: u32, fixed: BTreeMap<usize, usize>, bounds: BTreeMap<usize, usize>) -> Self {
        MoveFilter { n, fixed, bounds }
    }

    /// Output restrictions satisfied by some member of every affine class:
    /// `S(0) = 0`, `S(2^i) = 2^i`, `S(3) = 5`, `S(5) <= 11` and
    /// `S(2^i + 1) <= 2^(i+2) - 2i - 1` for `3 <= i <= n-1`.
    pub fn powers(n: u32) -> Self {
        let mut fixed = BTreeMap::new();
        let mut bounds = BTreeMap::new();
        fixed.insert(0, 0);
        for i in 0..n {
            fixed.insert(1 << i, 1 << i);
        }
        if n >= 3 {
            fixed.insert(3, 5);
            bounds.insert(5, 11);
        }
        for i in 3..n as usize {
            bounds.insert((1 << i) + 1, (1 << (i + 2)) - 2 * i - 1);
        }
        MoveFilter { n, fixed, bounds }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn fixed(&self) -> &BTreeMap<usize, usize> {
        &self.fixed
    }

    pub fn bounds(&self) -> &BTreeMap<usize, usize> {
        &self.bounds
    }

    pub fn is_pinned(&self, x: usize) -> bool {
        self.fixed.contains_key(&x)
    }

    /// Whether output `y` may sit at input `x`.
    pub fn permits(&self, x: usize, y: usize) -> bool {
        self.fixed.get(&x).map_or(true, |&v| v == y) && self.bounds.get(&x).map_or(true, |&v| y <= v)
    }

    /// First input whose output violates the filter.
    pub fn violation(&self, s: &SBox) -> Option<usize> {
        self.fixed
            .keys()
            .chain(self.bounds.keys())
            .copied()
            .filter(|&x| x >= s.len() || !self.permits(x, s.get(x)))
            .min()
    }

    pub fn admits(&self, s: &SBox) -> bool {
        self.violation(s).is_none()
    }

    pub fn allows_swap(&self, s: &SBox, a: usize, b: usize) -> bool {
        a != b && self.permits(a, s.get(b)) && self.permits(b, s.get(a))
    }

    pub fn filtered_moves(&self, s: &SBox) -> Result<Vec<(usize, usize)>> {
        if let Some(x) = self.violation(s) {
            return Err(Error::FilterViolation(x));
        }
        Ok(neighborhood(s, Some(self)))
    }

    /// Uniform random conforming swap, or `None` when there is none.
    pub fn random_swap<R: Rng + ?Sized>(&self, s: &SBox, rng: &mut R) -> Option<(usize, usize)> {
        let free: Vec<usize> = (0..s.len()).filter(|x| !self.is_pinned(*x)).collect();
        if free.len() < 2 {
            return None;
        }
        for _ in 0..10_000 {
            let a = free[rng.gen_range(0..free.len())];
            let b = free[rng.gen_range(0..free.len())];
            if self.allows_swap(s, a, b) {
                return Some((a, b));
            }
        }
        let moves = neighborhood(s, Some(self));
        moves.choose(rng).copied()
    }

    /// Random bijection satisfying the filter: pinned values first, then
    /// bounded inputs from the tightest bound up, then the rest.
    pub fn random_conforming<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SBox> {
        let len = 1usize << self.n;
        let mut table = vec![usize::MAX; len];
        let mut used = vec![false; len];
        for (&x, &y) in &self.fixed {
            if x >= len || y >= len || used[y] {
                return Err(Error::FilterViolation(x));
            }
            table[x] = y;
            used[y] = true;
        }
        let mut bounded: Vec<(usize, usize)> = self.bounds.iter().map(|(&x, &b)| (b, x)).collect();
        bounded.sort_unstable();
        for (bound, x) in bounded {
            if table[x] != usize::MAX {
                continue;
            }
            let options: Vec<usize> = (0..len.min(bound + 1)).filter(|&y| !used[y]).collect();
            let &y = options.choose(rng).ok_or(Error::FilterViolation(x))?;
            table[x] = y;
            used[y] = true;
        }
        let mut rest: Vec<usize> = (0..len).filter(|&y| !used[y]).collect();
        rest.shuffle(rng);
        for slot in table.iter_mut().filter(|v| **v == usize::MAX) {
            *slot = rest.pop().expect("counts match");
        }
        SBox::from_table(table.into_iter().map(|v| v as u8).collect())
    }
}
