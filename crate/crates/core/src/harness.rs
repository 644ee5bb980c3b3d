//! Batch experiments: configuration, seeded runs, aggregation and reports.
//!
//! A batch executes `runs` independent runs of one engine. Run `i` uses seed
//! `base_seed + i`; everything stochastic inside the run derives from it, so
//! a record can be regenerated from `(config, i)` alone.
//!
//! Persisted layout under the output directory:
//!
//! * `run-NNNN.json`: one [`RunRecord`] per run,
//! * `summary.json`: the [`BatchSummary`],
//! * `summary.csv`: one line per `(du, nl)` cell.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aco::{self, AcoParams};
use crate::analysis::{self, Metrics};
use crate::cost::{flatten_cost, CostSpec, SearchState, TableKind};
use crate::error::{Error, Result};
use crate::localsearch::MoveFilter;
use crate::memetic::{self, MemeticParams};
use crate::normalize;
use crate::rng::{derive_seed, seeded};
use crate::sa::{self, SAParams, Temperature};
use crate::sbox::SBox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Sa,
    Memetic,
    Aco,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sa" => Ok(Engine::Sa),
            "memetic" => Ok(Engine::Memetic),
            "aco" => Ok(Engine::Aco),
            _ => Err(Error::InvalidParam(format!("unknown engine `{s}`"))),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Sa => "sa",
            Engine::Memetic => "memetic",
            Engine::Aco => "aco",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub engine: Engine,
    pub n: u32,
    pub runs: usize,
    pub base_seed: u64,
    pub constrain_powers: bool,
    pub output: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub sa: SAParams,
    pub memetic: MemeticParams,
    pub aco: AcoParams,
}

impl ExperimentConfig {
    pub fn new(engine: Engine) -> Self {
        ExperimentConfig {
            engine,
            n: 5,
            runs: 1,
            base_seed: 0,
            constrain_powers: false,
            output: None,
            jobs: 0,
            sa: SAParams::default(),
            memetic: MemeticParams::default(),
            aco: AcoParams::default(),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. `engine` must be set.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParam(format!("line {}: expected key=value", lineno + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let engine = pairs
            .iter()
            .find(|(k, _)| k == "engine")
            .ok_or_else(|| Error::InvalidParam("config does not set `engine`".into()))?
            .1
            .parse()?;
        let mut cfg = ExperimentConfig::new(engine);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::parse(&text)
    }

    /// Sets one key. Engine parameters use `sa.`, `memetic.` and `aco.`
    /// prefixes followed by the field name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "engine" => self.engine = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "runs" => self.runs = parse(key, v)?,
            "base_seed" | "seed" => self.base_seed = parse(key, v)?,
            "constrain_powers" => self.constrain_powers = parse(key, v)?,
            "output" => self.output = Some(PathBuf::from(v)),
            "jobs" => self.jobs = parse(key, v)?,

            "sa.t0" => self.sa.t0 = parse(key, v)?,
            "sa.alpha" => self.sa.alpha = parse(key, v)?,
            "sa.max_inner_loops" => self.sa.max_inner_loops = parse(key, v)?,
            "sa.max_outer_loops" => self.sa.max_outer_loops = parse(key, v)?,
            "sa.max_frozen_outer_loops" => self.sa.max_frozen_outer_loops = parse(key, v)?,
            "sa.cost" => self.sa.cost = parse(key, v)?,
            "sa.hc" => self.sa.hc = parse(key, v)?,
            "sa.calibration_samples" => self.sa.calibration_samples = parse(key, v)?,
            "sa.target_acceptance" => self.sa.target_acceptance = parse(key, v)?,

            "memetic.popsize" => self.memetic.popsize = parse(key, v)?,
            "memetic.post_crossover_size" => self.memetic.post_crossover_size = Some(parse(key, v)?),
            "memetic.generations" => self.memetic.generations = parse(key, v)?,
            "memetic.crossover" => self.memetic.crossover = parse(key, v)?,
            "memetic.crossover_probability" => self.memetic.crossover_probability = parse(key, v)?,
            "memetic.children" => self.memetic.children = parse(key, v)?,
            "memetic.max_mutations" => self.memetic.max_mutations = parse(key, v)?,
            "memetic.mutation_probability" => self.memetic.mutation_probability = parse(key, v)?,
            "memetic.selection" => self.memetic.selection = parse(key, v)?,
            "memetic.elitism" => self.memetic.elitism = parse(key, v)?,

            "aco.variant" => self.aco.variant = parse(key, v)?,
            "aco.alpha" => self.aco.alpha = parse(key, v)?,
            "aco.beta" => self.aco.beta = parse(key, v)?,
            "aco.rho" => self.aco.rho = parse(key, v)?,
            "aco.e" => self.aco.e = parse(key, v)?,
            "aco.q0" => self.aco.q0 = parse(key, v)?,
            "aco.q" => self.aco.q = parse(key, v)?,
            "aco.tau0" => self.aco.tau0 = Some(parse(key, v)?),
            "aco.ants" => self.aco.ants = parse(key, v)?,
            "aco.iterations" => self.aco.iterations = parse(key, v)?,
            "aco.next_index" => self.aco.next_index = parse(key, v)?,
            "aco.hillclimb" => self.aco.hillclimb = parse(key, v)?,
            _ => return Err(Error::InvalidParam(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn seed_for(&self, index: usize) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }

    pub fn filter(&self) -> Option<MoveFilter> {
        self.constrain_powers.then(|| MoveFilter::powers(self.n))
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParam("runs must be at least 1".into()));
        }
        if !(3..=crate::sbox::MAX_WIDTH).contains(&self.n) {
            return Err(Error::InvalidParam(format!("n = {} outside 3..=8", self.n)));
        }
        match self.engine {
            Engine::Sa => self.sa.validate(),
            Engine::Memetic => self.memetic_params(0).validate(),
            Engine::Aco => self.aco_params(0).validate(),
        }
    }

    fn memetic_params(&self, seed: u64) -> MemeticParams {
        MemeticParams { n: self.n, seed, filter: self.filter(), ..self.memetic.clone() }
    }

    fn aco_params(&self, seed: u64) -> AcoParams {
        AcoParams { n: self.n, seed, filter: self.filter(), ..self.aco.clone() }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| Error::InvalidParam(format!("{key} = {v}: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub engine: Engine,
    pub index: usize,
    pub seed: u64,
    pub final_box: SBox,
    pub profile: Metrics,
    pub wall_time_secs: f64,
    pub engine_stats: serde_json::Value,
}

impl RunRecord {
    /// True when the stored profile matches a fresh analysis of the box.
    pub fn profile_matches(&self) -> bool {
        analysis::metrics(&self.final_box) == self.profile
    }
}

/// Executes run `index` of the batch.
pub fn run_single(config: &ExperimentConfig, index: usize) -> Result<RunRecord> {
    let seed = config.seed_for(index);
    let start = Instant::now();
    let (final_box, engine_stats) = match config.engine {
        Engine::Sa => {
            let filter = config.filter();
            let mut r = seeded(derive_seed(seed, &[0x5E]));
            let s0 = match &filter {
                Some(f) => f.random_conforming(&mut r)?,
                None => SBox::random_bijection_with(config.n, &mut r)?,
            };
            let params = SAParams { seed, filter, ..config.sa.clone() };
            let out = sa::anneal_then_hillclimb(&s0, &params)?;
            let stats = serde_json::json!({
                "t0": out.t0,
                "outer_loops": out.trace.outer.len(),
                "proposals": out.trace.proposals,
                "accepted": out.trace.accepted,
                "frozen_exit": out.trace.frozen_exit,
                "annealed_du": out.annealed_metrics.du,
                "annealed_nl": out.annealed_metrics.nl,
            });
            (out.final_box, stats)
        }
        Engine::Memetic => {
            let out = memetic::evolve(&config.memetic_params(seed))?;
            let last = out.generations.last();
            let stats = serde_json::json!({
                "best_fitness": out.best_fitness,
                "generations": out.generations.len().saturating_sub(1),
                "final_mean_fitness": last.map(|g| g.mean_fitness),
            });
            (out.best, stats)
        }
        Engine::Aco => {
            let out = aco::run_colony(&config.aco_params(seed))?;
            let first_best = out.iterations.iter().find(|it| it.best_cost == out.best_cost).map(|it| it.iteration);
            let stats = serde_json::json!({
                "best_cost": out.best_cost,
                "iterations": out.iterations.len(),
                "best_found_at": first_best,
            });
            (out.best, stats)
        }
    };
    Ok(RunRecord {
        engine: config.engine,
        index,
        seed,
        profile: analysis::metrics(&final_box),
        final_box,
        wall_time_secs: start.elapsed().as_secs_f64(),
        engine_stats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub du: u32,
    pub nl: u32,
    pub count: usize,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub engine: Engine,
    pub n: u32,
    pub runs: usize,
    /// Sorted by ascending DU, then descending NL.
    pub cells: Vec<SummaryCell>,
    pub best_du: u32,
    /// Mean DF over the runs reaching `best_du`.
    pub avg_df_best_du: f64,
    pub best_nl: u32,
    /// Mean NF over the runs reaching `best_nl`.
    pub avg_nf_best_nl: f64,
}

impl BatchSummary {
    pub fn from_records(engine: Engine, n: u32, records: &[RunRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidParam("cannot summarize an empty batch".into()));
        }
        let runs = records.len();
        let mut counts: BTreeMap<(u32, std::cmp::Reverse<u32>), usize> = BTreeMap::new();
        for r in records {
            *counts.entry((r.profile.du, std::cmp::Reverse(r.profile.nl))).or_default() += 1;
        }
        let cells = counts
            .into_iter()
            .map(|((du, nl), count)| SummaryCell { du, nl: nl.0, count, percent: 100.0 * count as f64 / runs as f64 })
            .collect();
        let best_du = records.iter().map(|r| r.profile.du).min().unwrap();
        let best_nl = records.iter().map(|r| r.profile.nl).max().unwrap();
        let mean = |vals: Vec<u32>| vals.iter().map(|&v| v as f64).sum::<f64>() / vals.len() as f64;
        Ok(BatchSummary {
            engine,
            n,
            runs,
            cells,
            best_du,
            avg_df_best_du: mean(records.iter().filter(|r| r.profile.du == best_du).map(|r| r.profile.df).collect()),
            best_nl,
            avg_nf_best_nl: mean(records.iter().filter(|r| r.profile.nl == best_nl).map(|r| r.profile.nf).collect()),
        })
    }

    pub fn percent_du(&self, du: u32) -> f64 {
        self.cells.iter().filter(|c| c.du == du).map(|c| c.percent).sum()
    }

    pub fn percent_nl(&self, nl: u32) -> f64 {
        self.cells.iter().filter(|c| c.nl == nl).map(|c| c.percent).sum()
    }

    pub fn percent_pair(&self, du: u32, nl: u32) -> f64 {
        self.cells.iter().filter(|c| c.du == du && c.nl == nl).map(|c| c.percent).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("engine,n,runs,du,nl,count,percent\n");
        for c in &self.cells {
            out += &format!("{},{},{},{},{},{},{:.2}\n", self.engine, self.n, self.runs, c.du, c.nl, c.count, c.percent);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub records: Vec<RunRecord>,
    pub summary: BatchSummary,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs the whole batch on at most `config.jobs` workers. With an output
/// directory, each record is written as soon as its run finishes; the first
/// I/O error is returned after every run has completed.
pub fn run_batch(config: &ExperimentConfig) -> Result<BatchOutcome> {
    run_batch_with(config, |_| {})
}

pub fn run_batch_with(config: &ExperimentConfig, observe: impl Fn(&RunRecord) + Sync) -> Result<BatchOutcome> {
    config.validate()?;
    if let Some(dir) = &config.output {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    let results: Vec<Result<(RunRecord, Option<Error>)>> = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|i| {
                let rec = run_single(config, i)?;
                observe(&rec);
                let io = config.output.as_ref().and_then(|dir| {
                    let json = serde_json::to_string_pretty(&rec).expect("records serialize");
                    write_file(&dir.join(format!("run-{i:04}.json")), &json).err()
                });
                Ok((rec, io))
            })
            .collect()
    });
    let mut records = Vec::with_capacity(config.runs);
    let mut first_io = None;
    for r in results {
        let (rec, io) = r?;
        records.push(rec);
        if first_io.is_none() {
            first_io = io;
        }
    }
    let summary = BatchSummary::from_records(config.engine, config.n, &records)?;
    if let Some(dir) = &config.output {
        let json = serde_json::to_string_pretty(&summary)?;
        if let Err(e) = write_file(&dir.join("summary.json"), &json) {
            first_io.get_or_insert(e);
        }
        if let Err(e) = write_file(&dir.join("summary.csv"), &summary.to_csv()) {
            first_io.get_or_insert(e);
        }
    }
    match first_io {
        Some(e) => Err(e),
        None => Ok(BatchOutcome { records, summary }),
    }
}

/// Reads back every `run-*.json` record in a directory, ordered by index.
pub fn load_records(dir: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
        if name.starts_with("run-") && name.ends_with(".json") {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            out.push(serde_json::from_str::<RunRecord>(&text)?);
        }
    }
    out.sort_by_key(|r| r.index);
    Ok(out)
}

/// One point of a parameter sweep: the swept values and the batch summary.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub params: Vec<(String, String)>,
    pub summary: BatchSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// One row per sweep point: the axis values, the run count, `% DU d` for
/// every DU seen, the mean DF at the best DU, `% NL v` for every NL seen
/// and the mean NF at the best NL.
pub fn report_table(points: &[SweepPoint], axes: &[&str]) -> Result<ReportTable> {
    if points.is_empty() || axes.is_empty() || axes.len() > 2 {
        return Err(Error::InvalidParam("a report needs at least one point and one or two axes".into()));
    }
    let engine = points[0].summary.engine;
    let mut dus = std::collections::BTreeSet::new();
    let mut nls = std::collections::BTreeSet::new();
    for p in points {
        if p.summary.engine != engine {
            return Err(Error::InvalidParam("summaries come from different engines".into()));
        }
        for c in &p.summary.cells {
            dus.insert(c.du);
            nls.insert(c.nl);
        }
    }
    let mut header: Vec<String> = axes.iter().map(|a| a.to_string()).collect();
    header.push("runs".into());
    header.extend(dus.iter().map(|d| format!("% DU {d}")));
    header.push("avg DF".into());
    header.extend(nls.iter().rev().map(|v| format!("% NL {v}")));
    header.push("avg NF".into());
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let mut row = Vec::with_capacity(header.len());
        for axis in axes {
            let v = p
                .params
                .iter()
                .find(|(k, _)| k == axis)
                .ok_or_else(|| Error::InvalidParam(format!("sweep point lacks axis `{axis}`")))?;
            row.push(v.1.clone());
        }
        if p.params.len() != axes.len() {
            return Err(Error::InvalidParam("sweep point has parameters outside the axes".into()));
        }
        let s = &p.summary;
        row.push(s.runs.to_string());
        row.extend(dus.iter().map(|&d| format!("{:.1}", s.percent_du(d))));
        row.push(format!("{:.2}", s.avg_df_best_du));
        row.extend(nls.iter().rev().map(|&v| format!("{:.1}", s.percent_nl(v))));
        row.push(format!("{:.2}", s.avg_nf_best_nl));
        rows.push(row);
    }
    Ok(ReportTable { header, rows })
}

impl ReportTable {
    /// Keeps the named columns, in the given order.
    pub fn select(&self, columns: &[&str]) -> Result<ReportTable> {
        let idx: Vec<usize> = columns
            .iter()
            .map(|c| {
                self.header
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::InvalidParam(format!("no column `{c}`")))
            })
            .collect::<Result<_>>()?;
        Ok(ReportTable {
            header: idx.iter().map(|&i| self.header[i].clone()).collect(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect(),
        })
    }

    /// Swaps rows and columns; the first column becomes the header.
    pub fn transpose(&self) -> ReportTable {
        let cols = self.header.len();
        let mut all: Vec<Vec<String>> = vec![self.header.clone()];
        all.extend(self.rows.iter().cloned());
        let mut t: Vec<Vec<String>> = (0..cols).map(|c| all.iter().map(|r| r[c].clone()).collect()).collect();
        let header = t.remove(0);
        ReportTable { header, rows: t }
    }

    pub fn to_csv(&self) -> String {
        let line = |r: &[String]| r.join(",") + "\n";
        let mut out = line(&self.header);
        for r in &self.rows {
            out += &line(r);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| std::iter::once(&self.header).chain(&self.rows).map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let line = |r: &[String]| {
            r.iter().zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
                + "\n"
        };
        let mut out = line(&self.header);
        out += &(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  ") + "\n");
        for r in &self.rows {
            out += &line(r);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    /// Corrupts the cached DDT before the incremental check.
    pub corrupt_ddt_cache: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn random_map(n: u32, r: &mut impl Rng) -> SBox {
    let table = (0..1usize << n).map(|_| r.gen_range(0..1u32 << n) as u8).collect();
    SBox::from_table(table).expect("valid table")
}

fn check_oracles() -> (bool, String) {
    let mut r = seeded(0x0AC1);
    let mut bad = 0;
    for k in 0..100 {
        let n = 3 + (k % 2);
        let s = if k % 4 == 0 { random_map(n, &mut r) } else { SBox::random_bijection_with(n, &mut r).unwrap() };
        if analysis::ddt(&s) != analysis::reference::ddt(&s)
            || analysis::lat(&s) != analysis::reference::lat(&s)
            || analysis::act(&s) != analysis::reference::act(&s)
        {
            bad += 1;
        }
    }
    (bad == 0, format!("{bad} of 100 boxes differ from the naive tables"))
}

fn check_hadamard() -> (bool, String) {
    let mut r = seeded(0x4ADA);
    let mut bad = 0;
    for k in 0..24 {
        let n = 3 + (k % 4) as u32;
        let s = if k % 3 == 0 { random_map(n, &mut r) } else { SBox::random_bijection_with(n, &mut r).unwrap() };
        bad += !analysis::verify_hadamard_relation(&s) as usize;
    }
    (bad == 0, format!("{bad} of 24 boxes violate H·DDT·H = (2·LAT)²"))
}

fn check_moments() -> (bool, String) {
    let mut r = seeded(0x3033);
    let mut bad = 0;
    for k in 0..24 {
        let n = 3 + (k % 4) as u32;
        let s = SBox::random_bijection_with(n, &mut r).unwrap();
        bad += (analysis::moment_ratio(&s).ratio_log2() != Some(2 * n - 4)) as usize;
    }
    (bad == 0, format!("{bad} of 24 bijections break the fourth-moment ratio"))
}

fn check_x_independence() -> (bool, String) {
    let s0 = SBox::random_bijection(5, 0x71).unwrap();
    let run = |x: i64| {
        let params = SAParams {
            t0: Temperature::Fixed(40.0),
            max_inner_loops: 500,
            max_outer_loops: 20,
            max_frozen_outer_loops: 10,
            seed: 3,
            cost: CostSpec::new(TableKind::Ddt, x, 2).unwrap(),
            ..Default::default()
        };
        let out = sa::anneal(&s0, &params).unwrap();
        (out.trace.decision_hash, out.best)
    };
    let base = run(0);
    let same = [-2, -1, 1, 2].iter().all(|&x| run(x) == base);
    (same, format!("traces for X in -2..=2 {}", if same { "agree" } else { "differ" }))
}

fn check_incremental(opts: VerifyOptions) -> (bool, String) {
    let mut r = seeded(0x1DE1);
    let spec = CostSpec::sumsq();
    let mut bad = 0;
    let trials = 2000;
    for _ in 0..trials {
        let s = SBox::random_bijection_with(5, &mut r).unwrap();
        let mut st = SearchState::new(s.clone(), spec).unwrap();
        if opts.corrupt_ddt_cache {
            // a uniform shift would cancel out of every delta
            for (i, v) in st.ddt_cache_mut().iter_mut().enumerate().skip(1) {
                if i % 3 == 0 {
                    *v += 2;
                }
            }
        }
        let a = r.gen_range(0..32);
        let b = (a + r.gen_range(1..32)) % 32;
        let (delta, _) = st.swap_cost_delta(a, b).unwrap();
        let after = s.swap_move(a, b).unwrap();
        bad += (flatten_cost(&after, &spec) - flatten_cost(&s, &spec) != delta) as usize;
    }
    (bad == 0, format!("{bad} of {trials} swap deltas disagree with recomputation"))
}

fn check_normalization() -> (bool, String) {
    let mut bad = 0;
    let mut total = 0;
    for n in 4..=6u32 {
        for seed in 0..10 {
            total += 1;
            let s = SBox::random_bijection(n, 0x40 + seed).unwrap();
            let ok = normalize::normalize(&s).is_ok_and(|rep| {
                rep.checklist.all()
                    && rep.certificate.verify()
                    && analysis::metrics(&rep.result) == analysis::metrics(&s)
            });
            bad += !ok as usize;
        }
    }
    (bad == 0, format!("{bad} of {total} normalizations fail the checklist"))
}

/// Runs the library's self-checks.
pub fn verify_suite(opts: VerifyOptions) -> VerifyReport {
    let checks: Vec<(&'static str, Box<dyn Fn() -> (bool, String)>)> = vec![
        ("table-oracles", Box::new(check_oracles)),
        ("hadamard", Box::new(check_hadamard)),
        ("moment-ratio", Box::new(check_moments)),
        ("x-independence", Box::new(check_x_independence)),
        ("incremental-delta", Box::new(move || check_incremental(opts))),
        ("normalization", Box::new(check_normalization)),
    ];
    VerifyReport {
        checks: checks
            .into_iter()
            .map(|(name, f)| {
                let (passed, detail) = f();
                CheckResult { name, passed, detail }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::parse(
            "engine = memetic\nn=5 # size\nruns=3\nseed=10\nmemetic.popsize=20\nmemetic.crossover=cycle\n",
        )
        .unwrap();
        assert_eq!(cfg.engine, Engine::Memetic);
        assert_eq!((cfg.runs, cfg.base_seed, cfg.memetic.popsize), (3, 10, 20));
        assert_eq!(cfg.seed_for(2), 12);
        assert!(ExperimentConfig::parse("n=5").is_err());
        assert!(ExperimentConfig::parse("engine=sa\nbogus=1").is_err());
        assert!(ExperimentConfig::parse("engine=sa\nsa.alpha=x").is_err());
    }

    fn record(du: u32, df: u32, nl: u32, nf: u32) -> RunRecord {
        RunRecord {
            engine: Engine::Sa,
            index: 0,
            seed: 0,
            final_box: SBox::identity(3),
            profile: Metrics { du, df, nl, nf, ac: 0, af: 0, degree: 0 },
            wall_time_secs: 0.0,
            engine_stats: serde_json::Value::Null,
        }
    }

    #[test]
    fn summary_statistics() {
        let recs = vec![record(2, 10, 12, 5), record(4, 3, 12, 7), record(2, 20, 10, 1), record(6, 1, 8, 2)];
        let s = BatchSummary::from_records(Engine::Sa, 5, &recs).unwrap();
        assert_eq!(s.best_du, 2);
        assert_eq!(s.avg_df_best_du, 15.0);
        assert_eq!(s.best_nl, 12);
        assert_eq!(s.avg_nf_best_nl, 6.0);
        assert_eq!(s.percent_du(2), 50.0);
        assert_eq!(s.percent_pair(4, 12), 25.0);
        assert_eq!((s.cells[0].du, s.cells[0].nl), (2, 12));
        let one = BatchSummary::from_records(Engine::Sa, 5, &recs[..1]).unwrap();
        assert_eq!(one.cells.len(), 1);
        assert_eq!((one.avg_df_best_du, one.avg_nf_best_nl), (10.0, 5.0));
    }

    #[test]
    fn table_layouts() {
        let recs = vec![record(2, 10, 12, 5), record(4, 3, 12, 7)];
        let s = BatchSummary::from_records(Engine::Memetic, 5, &recs).unwrap();
        let pt = |v: &str| SweepPoint { params: vec![("pc".into(), v.into())], summary: s.clone() };
        let t = report_table(&[pt("0.5"), pt("1.0")], &["pc"]).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.header[..4], ["pc", "runs", "% DU 2", "% DU 4"]);
        let wide = t.select(&["pc", "% DU 2"]).unwrap().transpose();
        assert_eq!(wide.header, ["pc", "0.5", "1.0"]);
        assert_eq!(wide.rows, vec![vec!["% DU 2", "50.0", "50.0"]]);
        assert!(t.to_text().lines().count() == 4);
        assert!(report_table(&[pt("0.5")], &["popsize"]).is_err());
    }
}
