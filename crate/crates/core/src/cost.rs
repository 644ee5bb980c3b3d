//! Cost and fitness functions, and incrementally maintained search states.
//!
//! Every cost is an exact integer or an exact rational, so two searches
//! driven by costs that differ by a constant make identical decisions.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::gf2::parity;
use crate::sbox::SBox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Ddt,
    Lat,
}

/// `Σ ||T(i,j)| - X|^r` over a whole table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostSpec {
    pub table: TableKind,
    pub x: i64,
    pub r: u32,
}

pub const MAX_EXPONENT: u32 = 8;
pub const MAX_OFFSET: i64 = 256;

impl CostSpec {
    pub fn new(table: TableKind, x: i64, r: u32) -> Result<Self> {
        if !(2..=MAX_EXPONENT).contains(&r) {
            return Err(Error::InvalidParam(format!("exponent {r} outside 2..={MAX_EXPONENT}")));
        }
        if x.abs() > MAX_OFFSET {
            return Err(Error::InvalidParam(format!("offset {x} outside ±{MAX_OFFSET}")));
        }
        Ok(CostSpec { table, x, r })
    }

    /// The default annealing cost: sum of squared DDT entries.
    pub fn sumsq() -> Self {
        CostSpec { table: TableKind::Ddt, x: 0, r: 2 }
    }

    #[inline]
    pub fn term(&self, entry: i64) -> i128 {
        let d = (entry.abs() - self.x).unsigned_abs() as i128;
        d.pow(self.r)
    }
}

impl Default for CostSpec {
    fn default() -> Self {
        Self::sumsq()
    }
}

impl fmt::Display for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::sumsq() {
            return write!(f, "ddt-sumsq");
        }
        let t = match self.table {
            TableKind::Ddt => "ddt",
            TableKind::Lat => "lat",
        };
        write!(f, "flatten:{t}:{}:{}", self.x, self.r)
    }
}

impl FromStr for CostSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ddt-sumsq" {
            return Ok(Self::sumsq());
        }
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidParam(format!("cost `{s}`: expected ddt-sumsq or flatten:<ddt|lat>:<X>:<r>"));
        if parts.len() != 4 || parts[0] != "flatten" {
            return Err(bad());
        }
        let table = match parts[1] {
            "ddt" => TableKind::Ddt,
            "lat" => TableKind::Lat,
            _ => return Err(bad()),
        };
        let x = parts[2].parse().map_err(|_| bad())?;
        let r = parts[3].parse().map_err(|_| bad())?;
        CostSpec::new(table, x, r)
    }
}

pub fn flatten_cost(s: &SBox, spec: &CostSpec) -> i128 {
    match spec.table {
        TableKind::Ddt => analysis::ddt(s).data().iter().map(|&v| spec.term(v as i64)).sum(),
        TableKind::Lat => analysis::lat(s).data().iter().map(|&v| spec.term(v as i64)).sum(),
    }
}

pub fn sumsq_ddt_cost(s: &SBox) -> u64 {
    analysis::ddt(s).data().iter().map(|&v| (v as u64) * (v as u64)).sum()
}

/// `2^(3n) - Σddt²`; zero exactly for affine bijections.
pub fn fitness(s: &SBox) -> u64 {
    (1u64 << (3 * s.n())) - sumsq_ddt_cost(s)
}

/// Hill-climbing cost `value - 2/freq`, compared exactly.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HcCost {
    pub value: u32,
    pub freq: u32,
}

impl HcCost {
    pub fn new(value: u32, freq: u32) -> Self {
        HcCost { value, freq }
    }

    // Numerator and denominator of value - 2/freq (freq 0 reads as value).
    fn fraction(&self) -> (i128, i128) {
        if self.freq == 0 {
            (self.value as i128, 1)
        } else {
            (self.value as i128 * self.freq as i128 - 2, self.freq as i128)
        }
    }

    pub fn as_f64(&self) -> f64 {
        let (p, q) = self.fraction();
        p as f64 / q as f64
    }
}

impl PartialEq for HcCost {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HcCost {}

impl PartialOrd for HcCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HcCost {
    fn cmp(&self, other: &Self) -> Ordering {
        let (p1, q1) = self.fraction();
        let (p2, q2) = other.fraction();
        (p1 * q2).cmp(&(p2 * q1))
    }
}

impl fmt::Display for HcCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} - 2/{}", self.value, self.freq)
    }
}

pub fn hc_cost_du(s: &SBox) -> HcCost {
    let p = analysis::differential_profile(s);
    HcCost::new(p.du, p.df)
}

pub fn hc_cost_lat(s: &SBox) -> HcCost {
    let p = analysis::linear_profile(s);
    HcCost::new((1u32 << (s.n() - 1)) - p.nl, p.nf)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    Add,
    Multiply,
}

/// Experimental sum or product of several flatten costs. Products saturate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinedCost {
    pub parts: Vec<CostSpec>,
    pub mode: Combine,
}

impl CombinedCost {
    pub fn evaluate(&self, s: &SBox) -> i128 {
        let values = self.parts.iter().map(|p| flatten_cost(s, p));
        match self.mode {
            Combine::Add => values.sum(),
            Combine::Multiply => values.fold(1i128, |acc, v| acc.saturating_mul(v)),
        }
    }
}

/// A cost value that supports an exact signed difference.
pub trait CostValue: Copy + Ord + fmt::Debug {
    /// `self - other` as a float, used for acceptance probabilities.
    fn minus(self, other: Self) -> f64;
}

impl CostValue for i128 {
    fn minus(self, other: Self) -> f64 {
        (self - other) as f64
    }
}

impl CostValue for HcCost {
    fn minus(self, other: Self) -> f64 {
        let (p1, q1) = self.fraction();
        let (p2, q2) = other.fraction();
        (p1 * q2 - p2 * q1) as f64 / (q1 * q2) as f64
    }
}

/// A box together with incrementally maintained cost data.
///
/// `probe` evaluates a swap without applying it; `commit` applies the most
/// recent probe.
pub trait Landscape {
    type Cost: CostValue;

    fn cost(&self) -> Self::Cost;
    fn probe(&mut self, a: usize, b: usize) -> Self::Cost;
    fn commit(&mut self);
    fn sbox(&self) -> &SBox;
}

/// Net DDT changes produced by one swap, as (flat index, delta) pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DdtPatch {
    pub a: usize,
    pub b: usize,
    pub cells: Vec<(usize, i32)>,
}

/// A box with its cached DDT and cost under a DDT-based `CostSpec`.
#[derive(Clone, Debug)]
pub struct SearchState {
    sbox: SBox,
    spec: CostSpec,
    ddt: Vec<u32>,
    cost: i128,
    scratch: Vec<i32>,
    touched: Vec<usize>,
    pending: Option<(DdtPatch, i128)>,
}

impl SearchState {
    pub fn new(sbox: SBox, spec: CostSpec) -> Result<Self> {
        if spec.table != TableKind::Ddt {
            return Err(Error::InvalidParam("search state requires a DDT cost".into()));
        }
        let ddt = analysis::ddt(&sbox).data().to_vec();
        let cost = ddt.iter().map(|&v| spec.term(v as i64)).sum();
        let scratch = vec![0; ddt.len()];
        Ok(SearchState { sbox, spec, ddt, cost, scratch, touched: Vec::new(), pending: None })
    }

    pub fn sumsq(sbox: SBox) -> Self {
        Self::new(sbox, CostSpec::sumsq()).expect("DDT spec")
    }

    pub fn ddt(&self) -> &[u32] {
        &self.ddt
    }

    pub fn spec(&self) -> &CostSpec {
        &self.spec
    }

    pub fn into_sbox(self) -> SBox {
        self.sbox
    }

    /// Mutable access to the cached DDT, for negative tests only.
    #[doc(hidden)]
    pub fn ddt_cache_mut(&mut self) -> &mut [u32] {
        &mut self.ddt
    }

    // Accumulates the raw cell deltas of swapping a and b into scratch.
    fn accumulate(&mut self, a: usize, b: usize) {
        let cols = 1usize << self.sbox.m();
        let t = self.sbox.table();
        let (sa, sb) = (t[a] as usize, t[b] as usize);
        let scratch = &mut self.scratch;
        let touched = &mut self.touched;
        let mut bump = |idx: usize, d: i32| {
            if scratch[idx] == 0 {
                touched.push(idx);
            }
            scratch[idx] += d;
        };
        for (y, &sy) in t.iter().enumerate() {
            if y == a || y == b {
                continue;
            }
            let sy = sy as usize;
            let ra = (a ^ y) * cols;
            let rb = (b ^ y) * cols;
            bump(ra + (sa ^ sy), -2);
            bump(ra + (sb ^ sy), 2);
            bump(rb + (sb ^ sy), -2);
            bump(rb + (sa ^ sy), 2);
        }
    }

    /// Cost change and DDT patch for swapping the outputs at `a` and `b`.
    pub fn swap_cost_delta(&mut self, a: usize, b: usize) -> Result<(i128, DdtPatch)> {
        let len = self.sbox.len();
        if a == b {
            return Err(Error::SameIndex(a));
        }
        if a >= len || b >= len {
            return Err(Error::IndexOutOfRange(a.max(b), len));
        }
        Ok(self.delta_unchecked(a, b))
    }

    fn delta_unchecked(&mut self, a: usize, b: usize) -> (i128, DdtPatch) {
        self.accumulate(a, b);
        let mut delta = 0i128;
        let mut cells = Vec::with_capacity(self.touched.len());
        for &idx in &self.touched {
            let d = std::mem::take(&mut self.scratch[idx]);
            if d != 0 {
                let old = self.ddt[idx] as i64;
                delta += self.spec.term(old + d as i64) - self.spec.term(old);
                cells.push((idx, d));
            }
        }
        self.touched.clear();
        (delta, DdtPatch { a, b, cells })
    }

    /// Applies a patch produced by [`SearchState::swap_cost_delta`] on the
    /// current state.
    pub fn apply_patch(&mut self, patch: &DdtPatch, delta: i128) {
        for &(idx, d) in &patch.cells {
            self.ddt[idx] = (self.ddt[idx] as i64 + d as i64) as u32;
        }
        self.sbox.swap_unchecked(patch.a, patch.b);
        self.cost += delta;
        self.pending = None;
    }

    /// Recomputes DDT and cost from scratch and compares with the cache.
    pub fn is_consistent(&self) -> bool {
        let fresh = analysis::ddt(&self.sbox);
        fresh.data() == self.ddt.as_slice() && flatten_cost(&self.sbox, &self.spec) == self.cost
    }
}

impl Landscape for SearchState {
    type Cost = i128;

    fn cost(&self) -> i128 {
        self.cost
    }

    fn probe(&mut self, a: usize, b: usize) -> i128 {
        let (delta, patch) = self.delta_unchecked(a, b);
        let c = self.cost + delta;
        self.pending = Some((patch, delta));
        c
    }

    fn commit(&mut self) {
        if let Some((patch, delta)) = self.pending.take() {
            self.apply_patch(&patch, delta);
        }
    }

    fn sbox(&self) -> &SBox {
        &self.sbox
    }
}

/// DDT tracker scored by `DU - 2/DF`, using a histogram of the entries
/// other than (0,0).
#[derive(Clone, Debug)]
pub struct DuDfState {
    inner: SearchState,
    hist: Vec<u32>,
    cost: HcCost,
    pending: Option<(DdtPatch, HcCost)>,
}

impl DuDfState {
    pub fn new(sbox: SBox) -> Self {
        let inner = SearchState::sumsq(sbox);
        let mut hist = vec![0u32; inner.sbox.len() + 1];
        for &v in &inner.ddt[1..] {
            hist[v as usize] += 1;
        }
        let cost = Self::extremum(&hist);
        DuDfState { inner, hist, cost, pending: None }
    }

    fn extremum(hist: &[u32]) -> HcCost {
        let top = hist.iter().rposition(|&c| c > 0).unwrap_or(0);
        HcCost::new(top as u32, hist[top])
    }

    fn shift(hist: &mut [u32], ddt: &[u32], patch: &DdtPatch, sign: i32) {
        for &(idx, d) in &patch.cells {
            if idx == 0 {
                continue;
            }
            let old = ddt[idx] as i32;
            let new = old + d;
            if sign > 0 {
                hist[old as usize] -= 1;
                hist[new as usize] += 1;
            } else {
                hist[new as usize] -= 1;
                hist[old as usize] += 1;
            }
        }
    }

    pub fn into_sbox(self) -> SBox {
        self.inner.sbox
    }
}

impl Landscape for DuDfState {
    type Cost = HcCost;

    fn cost(&self) -> HcCost {
        self.cost
    }

    fn probe(&mut self, a: usize, b: usize) -> HcCost {
        let (_, patch) = self.inner.delta_unchecked(a, b);
        Self::shift(&mut self.hist, &self.inner.ddt, &patch, 1);
        let c = Self::extremum(&self.hist);
        Self::shift(&mut self.hist, &self.inner.ddt, &patch, -1);
        self.pending = Some((patch, c));
        c
    }

    fn commit(&mut self) {
        if let Some((patch, c)) = self.pending.take() {
            Self::shift(&mut self.hist, &self.inner.ddt, &patch, 1);
            let delta: i128 = patch
                .cells
                .iter()
                .map(|&(idx, d)| {
                    let old = self.inner.ddt[idx] as i64;
                    self.inner.spec.term(old + d as i64) - self.inner.spec.term(old)
                })
                .sum();
            self.inner.apply_patch(&patch, delta);
            self.cost = c;
        }
    }

    fn sbox(&self) -> &SBox {
        &self.inner.sbox
    }
}

/// Objective evaluated on the Walsh spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalshObjective {
    Flatten(CostSpec),
    MaxNf,
}

/// Box with its Walsh spectra `W = 2·LAT`, updated in `O(2^(n+m))` per swap.
#[derive(Clone, Debug)]
pub struct WalshState<C> {
    sbox: SBox,
    w: Vec<i32>,
    next: Vec<i32>,
    objective: WalshObjective,
    cost: C,
    pending: Option<(usize, usize, C)>,
}

fn sign(bit: u32) -> i32 {
    1 - 2 * bit as i32
}

impl<C> WalshState<C> {
    fn spectra(s: &SBox) -> Vec<i32> {
        analysis::lat(s).data().iter().map(|&v| 2 * v).collect()
    }

    fn fill_next(&mut self, a: usize, b: usize) {
        let cols = 1usize << self.sbox.m();
        let (sa, sb) = (self.sbox.get(a), self.sbox.get(b));
        self.next.copy_from_slice(&self.w);
        for j in 0..cols {
            let dj = sign(parity((j & sb) as u32)) - sign(parity((j & sa) as u32));
            if dj == 0 {
                continue;
            }
            for i in 0..self.sbox.len() {
                let di = sign(parity((i & a) as u32)) - sign(parity((i & b) as u32));
                if di != 0 {
                    self.next[i * cols + j] += dj * di;
                }
            }
        }
    }

    pub fn sbox(&self) -> &SBox {
        &self.sbox
    }

    pub fn into_sbox(self) -> SBox {
        self.sbox
    }
}

fn flatten_from_walsh(w: &[i32], spec: &CostSpec) -> i128 {
    w.iter().map(|&v| spec.term((v / 2) as i64)).sum()
}

fn max_nf_from_walsh(w: &[i32]) -> HcCost {
    let max = w[1..].iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
    let freq = w[1..].iter().filter(|v| v.unsigned_abs() == max).count() as u32;
    HcCost::new(max / 2, freq)
}

pub type LatFlattenState = WalshState<i128>;
pub type LatNfState = WalshState<HcCost>;

impl WalshState<i128> {
    pub fn new(sbox: SBox, spec: CostSpec) -> Result<Self> {
        if spec.table != TableKind::Lat {
            return Err(Error::InvalidParam("walsh state requires a LAT cost".into()));
        }
        let w = Self::spectra(&sbox);
        let cost = flatten_from_walsh(&w, &spec);
        Ok(WalshState { next: w.clone(), w, sbox, objective: WalshObjective::Flatten(spec), cost, pending: None })
    }
}

impl WalshState<HcCost> {
    pub fn new(sbox: SBox) -> Self {
        let w = Self::spectra(&sbox);
        let cost = max_nf_from_walsh(&w);
        WalshState { next: w.clone(), w, sbox, objective: WalshObjective::MaxNf, cost, pending: None }
    }
}

macro_rules! walsh_landscape {
    ($cost:ty, $eval:expr) => {
        impl Landscape for WalshState<$cost> {
            type Cost = $cost;

            fn cost(&self) -> $cost {
                self.cost
            }

            fn probe(&mut self, a: usize, b: usize) -> $cost {
                self.fill_next(a, b);
                let c = $eval(&self.next, &self.objective);
                self.pending = Some((a, b, c));
                c
            }

            fn commit(&mut self) {
                if let Some((a, b, c)) = self.pending.take() {
                    self.fill_next(a, b);
                    std::mem::swap(&mut self.w, &mut self.next);
                    self.sbox.swap_unchecked(a, b);
                    self.cost = c;
                }
            }

            fn sbox(&self) -> &SBox {
                &self.sbox
            }
        }
    };
}

walsh_landscape!(i128, |w: &[i32], o: &WalshObjective| match o {
    WalshObjective::Flatten(spec) => flatten_from_walsh(w, spec),
    WalshObjective::MaxNf => unreachable!("flatten state"),
});
walsh_landscape!(HcCost, |w: &[i32], _o: &WalshObjective| max_nf_from_walsh(w));

/// Landscape for an arbitrary `CostSpec`, dispatching on the table.
#[derive(Clone, Debug)]
pub enum FlattenState {
    Ddt(SearchState),
    Lat(LatFlattenState),
}

impl FlattenState {
    pub fn new(sbox: SBox, spec: CostSpec) -> Self {
        match spec.table {
            TableKind::Ddt => FlattenState::Ddt(SearchState::new(sbox, spec).expect("DDT spec")),
            TableKind::Lat => FlattenState::Lat(LatFlattenState::new(sbox, spec).expect("LAT spec")),
        }
    }

    pub fn into_sbox(self) -> SBox {
        match self {
            FlattenState::Ddt(s) => s.into_sbox(),
            FlattenState::Lat(s) => s.into_sbox(),
        }
    }
}

impl Landscape for FlattenState {
    type Cost = i128;

    fn cost(&self) -> i128 {
        match self {
            FlattenState::Ddt(s) => s.cost(),
            FlattenState::Lat(s) => s.cost(),
        }
    }

    fn probe(&mut self, a: usize, b: usize) -> i128 {
        match self {
            FlattenState::Ddt(s) => s.probe(a, b),
            FlattenState::Lat(s) => s.probe(a, b),
        }
    }

    fn commit(&mut self) {
        match self {
            FlattenState::Ddt(s) => s.commit(),
            FlattenState::Lat(s) => s.commit(),
        }
    }

    fn sbox(&self) -> &SBox {
        match self {
            FlattenState::Ddt(s) => s.sbox(),
            FlattenState::Lat(s) => s.sbox(),
        }
    }
}
