//! Simulated annealing over the swap neighborhood.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisProfile, Metrics};
use crate::cost::{CostSpec, CostValue, FlattenState, Landscape};
use crate::error::{Error, Result};
use crate::localsearch::{dual_hill_climb_with, hill_climb_with, ClimbCost, ClimbOptions, HcChoice, MoveFilter};
use crate::rng::{self, derive_seed};
use crate::sbox::SBox;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Temperature {
    Fixed(f64),
    Auto,
}

impl FromStr for Temperature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Temperature::Auto);
        }
        match s.parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(Temperature::Fixed(t)),
            _ => Err(Error::InvalidParam(format!("temperature `{s}`: expected a positive number or auto"))),
        }
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Temperature::Fixed(t) => write!(f, "{t}"),
            Temperature::Auto => f.write_str("auto"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SAParams {
    pub t0: Temperature,
    pub alpha: f64,
    pub max_inner_loops: u64,
    pub max_outer_loops: u64,
    pub max_frozen_outer_loops: u64,
    pub seed: u64,
    pub cost: CostSpec,
    pub hc: HcChoice,
    pub calibration_samples: usize,
    pub target_acceptance: f64,
    #[serde(default)]
    pub filter: Option<MoveFilter>,
    /// Keep the full accept/reject sequence in the trace.
    #[serde(default)]
    pub record_decisions: bool,
}

impl Default for SAParams {
    fn default() -> Self {
        SAParams {
            t0: Temperature::Auto,
            alpha: 0.97,
            max_inner_loops: 20_000,
            max_outer_loops: 500,
            max_frozen_outer_loops: 200,
            seed: 0,
            cost: CostSpec::sumsq(),
            hc: HcChoice::DuDf,
            calibration_samples: 10_000,
            target_acceptance: 0.5,
            filter: None,
            record_decisions: false,
        }
    }
}

impl SAParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.max_inner_loops == 0 || self.max_frozen_outer_loops == 0 {
            return bad("loop counts must be at least 1".into());
        }
        if self.max_outer_loops > 0 && self.max_frozen_outer_loops > self.max_outer_loops {
            return bad("frozen loop limit exceeds outer loop limit".into());
        }
        if let Temperature::Fixed(t) = self.t0 {
            if !(t > 0.0) {
                return bad(format!("temperature {t} must be positive"));
            }
        }
        if self.calibration_samples < 1000 {
            return bad("calibration needs at least 1000 sample moves".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterStats {
    pub temperature: f64,
    pub accepted: u64,
    pub improving: u64,
    /// Current and best cost relative to the starting cost.
    pub current_delta: f64,
    pub best_delta: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SATrace {
    pub outer: Vec<OuterStats>,
    pub proposals: u64,
    pub accepted: u64,
    pub frozen_exit: bool,
    /// FNV-1a hash over every (a, b, accepted) decision.
    pub decision_hash: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decisions: Option<Vec<bool>>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[derive(Clone, Debug)]
pub struct AnnealOutcome {
    pub best: SBox,
    pub t0: f64,
    pub trace: SATrace,
}

fn propose<R: Rng + ?Sized>(s: &SBox, filter: Option<&MoveFilter>, rng: &mut R) -> Option<(usize, usize)> {
    if let Some(f) = filter {
        return f.random_swap(s, rng);
    }
    let len = s.len();
    let a = rng.gen_range(0..len);
    let mut b = rng.gen_range(0..len - 1);
    if b >= a {
        b += 1;
    }
    Some((a, b))
}

/// Runs the annealing loop on an arbitrary landscape; returns the best box.
pub fn anneal_landscape<L: Landscape, R: Rng + ?Sized>(
    land: &mut L,
    params: &SAParams,
    t0: f64,
    rng: &mut R,
) -> (SBox, SATrace) {
    let start = land.cost();
    let mut best = land.sbox().clone();
    let mut best_cost = start;
    let mut t = t0;
    let mut zero_accept_loops = 0;
    let mut trace = SATrace {
        decision_hash: FNV_OFFSET,
        decisions: params.record_decisions.then(Vec::new),
        ..Default::default()
    };
    for _ in 0..params.max_outer_loops {
        let mut accepted = 0u64;
        let mut improving = 0u64;
        for _ in 0..params.max_inner_loops {
            let Some((a, b)) = propose(land.sbox(), params.filter.as_ref(), rng) else { break };
            let cur = land.cost();
            let next = land.probe(a, b);
            let take = if next < cur {
                improving += 1;
                true
            } else {
                let u: f64 = rng.gen();
                u < (-next.minus(cur) / t).exp()
            };
            if take {
                land.commit();
                accepted += 1;
                if next < best_cost {
                    best_cost = next;
                    best = land.sbox().clone();
                }
            }
            trace.proposals += 1;
            trace.decision_hash = fnv(trace.decision_hash, &[a as u8, b as u8, take as u8]);
            if let Some(d) = trace.decisions.as_mut() {
                d.push(take);
            }
        }
        trace.accepted += accepted;
        trace.outer.push(OuterStats {
            temperature: t,
            accepted,
            improving,
            current_delta: land.cost().minus(start),
            best_delta: best_cost.minus(start),
        });
        if accepted == 0 {
            zero_accept_loops += 1;
            if zero_accept_loops == params.max_frozen_outer_loops {
                trace.frozen_exit = true;
                break;
            }
        } else {
            zero_accept_loops = 0;
        }
        t *= params.alpha;
    }
    (best, trace)
}

/// Anneals `s0` under `params.cost`, calibrating `T0` first when asked.
pub fn anneal(s0: &SBox, params: &SAParams) -> Result<AnnealOutcome> {
    params.validate()?;
    if let Some(f) = &params.filter {
        if let Some(x) = f.violation(s0) {
            return Err(Error::FilterViolation(x));
        }
    }
    let t0 = match params.t0 {
        Temperature::Fixed(t) => t,
        Temperature::Auto => {
            calibrate_temperature(
                s0,
                &params.cost,
                params.target_acceptance,
                params.calibration_samples,
                derive_seed(params.seed, &[0xCA11]),
            )?
            .temperature
        }
    };
    let mut r = rng::seeded(params.seed);
    let mut land = FlattenState::new(s0.clone(), params.cost);
    let (best, trace) = anneal_landscape(&mut land, params, t0, &mut r);
    Ok(AnnealOutcome { best, t0, trace })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub temperature: f64,
    pub acceptance: f64,
    pub doublings: u32,
    pub bisections: u32,
}

/// A fixed sample of neighbor cost differences and uniform draws around a
/// box. Acceptance measured on it is monotone in the temperature.
#[derive(Clone, Debug)]
pub struct MoveSample {
    pub deltas: Vec<f64>,
    pub draws: Vec<f64>,
}

impl MoveSample {
    pub fn draw(s0: &SBox, cost: &CostSpec, samples: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let mut land = FlattenState::new(s0.clone(), *cost);
        let cur = land.cost();
        let mut deltas = Vec::with_capacity(samples);
        let mut draws = Vec::with_capacity(samples);
        for _ in 0..samples {
            let (a, b) = propose(s0, None, &mut r).expect("unfiltered proposal");
            deltas.push(land.probe(a, b).minus(cur));
            draws.push(r.gen());
        }
        MoveSample { deltas, draws }
    }

    pub fn acceptance(&self, t: f64) -> f64 {
        let hits = self
            .deltas
            .iter()
            .zip(&self.draws)
            .filter(|(&d, &u)| d < 0.0 || u < (-d / t).exp())
            .count();
        hits as f64 / self.deltas.len() as f64
    }
}

const CALIBRATION_START: f64 = 0.1;
const MAX_DOUBLINGS: u32 = 60;
const MAX_BISECTIONS: u32 = 20;
const CALIBRATION_TOLERANCE: f64 = 0.05;

pub fn calibrate_temperature(s0: &SBox, cost: &CostSpec, target: f64, samples: usize, seed: u64) -> Result<Calibration> {
    if samples < 1000 {
        return Err(Error::InvalidParam("calibration needs at least 1000 sample moves".into()));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidParam(format!("target acceptance {target} outside [0, 1]")));
    }
    let sample = MoveSample::draw(s0, cost, samples, seed);
    Ok(calibrate_on(&sample, target))
}

pub fn calibrate_on(sample: &MoveSample, target: f64) -> Calibration {
    let mut t = CALIBRATION_START;
    let mut acc = sample.acceptance(t);
    let mut doublings = 0;
    while acc < target && doublings < MAX_DOUBLINGS {
        t *= 2.0;
        acc = sample.acceptance(t);
        doublings += 1;
    }
    let within = |a: f64| (a - target).abs() <= CALIBRATION_TOLERANCE;
    if doublings == 0 || within(acc) {
        return Calibration { temperature: t, acceptance: acc, doublings, bisections: 0 };
    }
    let (mut lo, mut hi) = (t / 2.0, t);
    let mut hi_acc = acc;
    let mut bisections = 0;
    while bisections < MAX_BISECTIONS {
        let mid = (lo + hi) / 2.0;
        let a = sample.acceptance(mid);
        bisections += 1;
        if within(a) {
            return Calibration { temperature: mid, acceptance: a, doublings, bisections };
        }
        if a < target {
            lo = mid;
        } else {
            hi = mid;
            hi_acc = a;
        }
    }
    Calibration { temperature: hi, acceptance: hi_acc, doublings, bisections }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineResult {
    pub annealed: SBox,
    pub final_box: SBox,
    pub annealed_metrics: Metrics,
    pub metrics: Metrics,
    pub t0: f64,
    pub trace: SATrace,
}

impl PipelineResult {
    pub fn profile(&self) -> AnalysisProfile {
        AnalysisProfile::of(&self.final_box)
    }
}

/// Hill climb stage shared by the search pipelines.
pub fn finish_climb(s: &SBox, hc: HcChoice, seed: u64, filter: Option<&MoveFilter>) -> SBox {
    let opts = ClimbOptions { filter: filter.cloned(), ..Default::default() };
    match hc {
        HcChoice::DuDf => hill_climb_with(s, ClimbCost::DuDf, seed, &opts),
        HcChoice::LatNf => hill_climb_with(s, ClimbCost::LatNf, seed, &opts),
        HcChoice::Dual => dual_hill_climb_with(s, seed, &opts),
    }
}

pub fn anneal_then_hillclimb(s0: &SBox, params: &SAParams) -> Result<PipelineResult> {
    let out = anneal(s0, params)?;
    let final_box = finish_climb(&out.best, params.hc, derive_seed(params.seed, &[0x4C]), params.filter.as_ref());
    Ok(PipelineResult {
        annealed_metrics: crate::analysis::metrics(&out.best),
        metrics: crate::analysis::metrics(&final_box),
        annealed: out.best,
        final_box,
        t0: out.t0,
        trace: out.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{hc_cost_du, sumsq_ddt_cost, TableKind};

    fn small(seed: u64) -> SAParams {
        SAParams {
            t0: Temperature::Fixed(50.0),
            max_inner_loops: 300,
            max_outer_loops: 40,
            max_frozen_outer_loops: 10,
            seed,
            record_decisions: true,
            ..Default::default()
        }
    }

    #[test]
    fn zero_outer_loops_returns_start() {
        let s = SBox::random_bijection(4, 1).unwrap();
        let p = SAParams { max_outer_loops: 0, ..small(1) };
        assert_eq!(anneal(&s, &p).unwrap().best, s);
        let r = anneal_then_hillclimb(&s, &p).unwrap();
        assert_eq!(r.annealed, s);
        assert_eq!(r.final_box, finish_climb(&s, HcChoice::DuDf, derive_seed(1, &[0x4C]), None));
    }

    #[test]
    fn tiny_temperature_never_climbs() {
        let s = SBox::random_bijection(4, 2).unwrap();
        let p = SAParams { t0: Temperature::Fixed(1e-300), ..small(2) };
        let out = anneal(&s, &p).unwrap();
        assert!(out.trace.outer.windows(2).all(|w| w[1].current_delta <= w[0].current_delta));
        // Equal-cost moves pass u < exp(0) at any temperature.
        assert!(out.trace.outer.iter().all(|o| o.accepted >= o.improving));
    }

    #[test]
    fn deterministic_and_monotone_best() {
        let s = SBox::random_bijection(5, 3).unwrap();
        let a = anneal(&s, &small(7)).unwrap();
        let b = anneal(&s, &small(7)).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best, b.best);
        assert!(a.trace.outer.windows(2).all(|w| w[1].best_delta <= w[0].best_delta));
        assert!(sumsq_ddt_cost(&a.best) <= sumsq_ddt_cost(&s));
    }

    // Improves for the first `budget` probes, then only worsens.
    struct Ramp {
        s: SBox,
        cost: i128,
        budget: u64,
        next: i128,
    }

    impl Landscape for Ramp {
        type Cost = i128;
        fn cost(&self) -> i128 {
            self.cost
        }
        fn probe(&mut self, _: usize, _: usize) -> i128 {
            self.next = if self.budget > 0 { self.cost - 1 } else { self.cost + 1 };
            self.budget = self.budget.saturating_sub(1);
            self.next
        }
        fn commit(&mut self) {
            self.cost = self.next;
        }
        fn sbox(&self) -> &SBox {
            &self.s
        }
    }

    #[test]
    fn frozen_exit_matches_trace() {
        let p = SAParams { max_inner_loops: 10, max_outer_loops: 200, max_frozen_outer_loops: 5, ..small(4) };
        let mut land = Ramp { s: SBox::identity(3), cost: 0, budget: 35, next: 0 };
        let (_, trace) = anneal_landscape(&mut land, &p, 1e-9, &mut rng::seeded(1));
        assert!(trace.frozen_exit);
        assert_eq!(trace.outer.len(), 4 + 5);
        assert!(trace.outer[4..].iter().all(|o| o.accepted == 0));
        assert_eq!(trace.outer[3].accepted, 5);
        let p = SAParams { max_frozen_outer_loops: 50, ..p };
        let mut land = Ramp { s: SBox::identity(3), cost: 0, budget: u64::MAX, next: 0 };
        let (_, trace) = anneal_landscape(&mut land, &p, 1e-9, &mut rng::seeded(1));
        assert!(!trace.frozen_exit);
        assert_eq!(trace.outer.len(), 200);
    }

    #[test]
    fn x_offset_does_not_change_decisions() {
        let s = SBox::random_bijection(5, 10).unwrap();
        let runs: Vec<AnnealOutcome> = [-2i64, 0, 2]
            .iter()
            .map(|&x| {
                let p = SAParams { cost: CostSpec::new(TableKind::Ddt, x, 2).unwrap(), ..small(5) };
                anneal(&s, &p).unwrap()
            })
            .collect();
        for r in &runs[1..] {
            assert_eq!(r.trace.decisions, runs[0].trace.decisions);
            assert_eq!(r.best, runs[0].best);
        }
    }

    #[test]
    fn calibration() {
        let flat = MoveSample { deltas: vec![0.0; 1000], draws: vec![0.5; 1000] };
        assert_eq!(calibrate_on(&flat, 0.5).temperature, 0.1);
        let s = SBox::random_bijection(4, 6).unwrap();
        let sample = MoveSample::draw(&s, &CostSpec::sumsq(), 5000, 1);
        let mut last = 0.0;
        for k in 0..30 {
            let a = sample.acceptance(0.1 * 1.5f64.powi(k));
            assert!(a >= last);
            last = a;
        }
        let c = calibrate_temperature(&s, &CostSpec::sumsq(), 0.5, 10_000, 3).unwrap();
        let fresh = MoveSample::draw(&s, &CostSpec::sumsq(), 10_000, 99);
        let a = fresh.acceptance(c.temperature);
        assert!((0.45..=0.55).contains(&a), "acceptance {a} at T={}", c.temperature);
    }

    #[test]
    fn pipeline_hill_climb_lowers_du() {
        let s = SBox::random_bijection(5, 8).unwrap();
        let r = anneal_then_hillclimb(&s, &small(8)).unwrap();
        assert!(hc_cost_du(&r.final_box) <= hc_cost_du(&r.annealed));
        assert!(r.metrics.du <= r.annealed_metrics.du);
    }

    #[test]
    fn params_validation() {
        assert!(SAParams { alpha: 1.0, ..Default::default() }.validate().is_err());
        assert!(SAParams { max_frozen_outer_loops: 600, ..Default::default() }.validate().is_err());
        assert!("auto".parse::<Temperature>().unwrap() == Temperature::Auto);
        assert!("-1".parse::<Temperature>().is_err());
    }
}
