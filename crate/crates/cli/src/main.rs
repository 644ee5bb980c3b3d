use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sboxlab::analysis;
use sboxlab::cost::CostSpec;
use sboxlab::fixtures;
use sboxlab::harness::{self, Engine, ExperimentConfig, RunRecord, SweepPoint, VerifyOptions};
use sboxlab::normalize;
use sboxlab::sa;
use sboxlab::{Error, SBox};

#[derive(Parser)]
#[command(name = "sboxlab", version, about = "Analyse, search for and normalize bijective S-boxes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the cryptographic profile of an S-box.
    Analyze(BoxInput),
    /// Simulated annealing followed by hill climbing.
    Anneal(EngineArgs),
    /// Memetic algorithm.
    Memetic(EngineArgs),
    /// Ant colony search.
    Aco(EngineArgs),
    /// Affine normal form of a bijective S-box.
    Normalize {
        #[command(flatten)]
        input: BoxInput,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Initial annealing temperature for a target acceptance rate.
    CalibrateTemp {
        #[arg(long, default_value_t = 5)]
        n: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "ddt-sumsq")]
        cost: CostSpec,
        #[arg(long, default_value_t = 0.5)]
        target: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Run a batch described by a key=value config file.
    Batch {
        /// Config file; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        engine: Option<Engine>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the built-in self-checks.
    Verify,
}

#[derive(Args)]
struct BoxInput {
    /// S-box file (whitespace or comma separated outputs); `-` reads stdin.
    #[arg(required_unless_present = "fixture")]
    file: Option<PathBuf>,
    /// Built-in box: `aes`, `ctc`, or `power:N:E` for x^E over GF(2^N).
    #[arg(long, conflicts_with = "file")]
    fixture: Option<String>,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    #[arg(long)]
    n: Option<u32>,
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory for per-run records and the summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pin 0, the powers of two and 3, and bound S(2^i+1).
    #[arg(long)]
    constrain_powers: bool,
    /// Extra `key=value` config overrides, e.g. `sa.alpha=0.95`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct EngineArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Annealing: `auto` or a fixed temperature.
    #[arg(long)]
    t0: Option<String>,
    /// Annealing cost: `ddt-sumsq` or `flatten:ddt|lat:X:r`.
    #[arg(long)]
    cost: Option<String>,
    /// Hill climb after annealing: `du-df`, `lat-nf` or `dual`.
    #[arg(long)]
    hc: Option<String>,
    #[arg(long)]
    popsize: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    crossover: Option<String>,
    #[arg(long)]
    selection: Option<String>,
    #[arg(long)]
    ants: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    variant: Option<String>,
}

enum Failure {
    Usage(String),
    Runtime(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParam(_) | Error::BadToken(_) | Error::BadLength(..) | Error::BadWidth(..) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_box(input: &BoxInput) -> Result<SBox, Failure> {
    if let Some(name) = &input.fixture {
        return match name.as_str() {
            "aes" => Ok(fixtures::aes()),
            "ctc" => Ok(fixtures::ctc()),
            other => {
                let parts: Vec<&str> = other.split(':').collect();
                match parts.as_slice() {
                    ["power", n, e] => {
                        let n = n.parse().map_err(|_| Failure::Usage(format!("bad width in `{other}`")))?;
                        let e = e.parse().map_err(|_| Failure::Usage(format!("bad exponent in `{other}`")))?;
                        Ok(fixtures::power_map(n, e)?)
                    }
                    _ => Err(Failure::Usage(format!("unknown fixture `{other}`"))),
                }
            }
        };
    }
    let path = input.file.as_ref().expect("clap requires file or fixture");
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::Runtime(e.to_string()))?;
        s
    } else {
        fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?
    };
    Ok(SBox::parse(&text)?)
}

fn analyze(input: &BoxInput) -> Result<(), Failure> {
    let s = load_box(input)?;
    let m = analysis::metrics(&s);
    println!("n={} m={} bijective={}", s.n(), s.m(), s.is_bijective());
    println!("du={} df={}", m.du, m.df);
    println!("nl={} nf={}", m.nl, m.nf);
    println!("ac={} af={}", m.ac, m.af);
    println!("degree={}", m.degree);
    if let Some(k) = analysis::moment_ratio(&s).ratio_log2() {
        println!("sum lat^4 / sum ddt^2 = 2^{k}");
    }
    Ok(())
}

fn apply_common(cfg: &mut ExperimentConfig, c: &CommonArgs) -> Result<(), Failure> {
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(s) = c.seed {
        cfg.base_seed = s;
    }
    if let Some(r) = c.runs {
        cfg.runs = r;
    }
    if let Some(j) = c.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &c.out {
        cfg.output = Some(o.clone());
    }
    cfg.constrain_powers |= c.constrain_powers;
    for kv in &c.sets {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("expected KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn engine_config(engine: Engine, a: &EngineArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::new(engine);
    let opts: [(&str, Option<String>); 10] = [
        ("sa.t0", a.t0.clone()),
        ("sa.cost", a.cost.clone()),
        ("sa.hc", a.hc.clone()),
        ("memetic.popsize", a.popsize.map(|v| v.to_string())),
        ("memetic.generations", a.generations.map(|v| v.to_string())),
        ("memetic.crossover", a.crossover.clone()),
        ("memetic.selection", a.selection.clone()),
        ("aco.ants", a.ants.map(|v| v.to_string())),
        ("aco.iterations", a.iterations.map(|v| v.to_string())),
        ("aco.variant", a.variant.clone()),
    ];
    for (k, v) in opts {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    apply_common(&mut cfg, &a.common)?;
    Ok(cfg)
}

fn print_record(r: &RunRecord) {
    let p = &r.profile;
    println!(
        "run {:>3} seed {:>6}  du {} df {:>3}  nl {} nf {:>3}  degree {}  {:.1}s",
        r.index, r.seed, p.du, p.df, p.nl, p.nf, p.degree, r.wall_time_secs
    );
}

fn run_engine(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let out = harness::run_batch_with(cfg, print_record)?;
    if cfg.runs == 1 {
        println!("{}", out.records[0].final_box.to_text());
    }
    let point = SweepPoint { params: vec![("n".into(), cfg.n.to_string())], summary: out.summary };
    print!("{}", harness::report_table(&[point], &["n"])?.to_text());
    Ok(())
}

fn run_normalize(input: &BoxInput, out: Option<&PathBuf>) -> Result<(), Failure> {
    let s = load_box(input)?;
    let rep = normalize::normalize(&s)?;
    println!("{}", rep.result.to_text());
    for (name, ok) in [
        ("fixes zero", rep.checklist.fixes_zero),
        ("fixes powers of two", rep.checklist.fixes_units),
        ("S(3)", rep.checklist.three),
        ("S(5)", rep.checklist.five),
        ("S(2^i+1) bounds", rep.checklist.power_plus_one),
        ("no weight-2/3 fixed points (APN)", rep.checklist.no_low_weight_fixed_points),
    ] {
        println!("{:<34} {}", name, if ok { "ok" } else { "FAIL" });
    }
    println!("stages: {}  certificate replays: {}", rep.stage_log.len(), rep.certificate.verify());
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(&rep.to_json()).expect("report serializes");
        fs::write(path, json).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    if rep.checklist.all() && rep.certificate.verify() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze(input) => analyze(&input),
        Command::Anneal(a) => run_engine(&engine_config(Engine::Sa, &a)?),
        Command::Memetic(a) => run_engine(&engine_config(Engine::Memetic, &a)?),
        Command::Aco(a) => run_engine(&engine_config(Engine::Aco, &a)?),
        Command::Normalize { input, out } => run_normalize(&input, out.as_ref()),
        Command::CalibrateTemp { n, seed, cost, target, samples } => {
            let s0 = SBox::random_bijection(n, seed)?;
            let c = sa::calibrate_temperature(&s0, &cost, target, samples, seed)?;
            println!(
                "t0={} acceptance={:.4} doublings={} bisections={}",
                c.temperature, c.acceptance, c.doublings, c.bisections
            );
            Ok(())
        }
        Command::Batch { config, engine, common } => {
            let mut cfg = match (&config, engine) {
                (Some(path), _) => ExperimentConfig::load(path)?,
                (None, Some(e)) => ExperimentConfig::new(e),
                (None, None) => return Err(Failure::Usage("batch needs --config or --engine".into())),
            };
            if let Some(e) = engine {
                cfg.engine = e;
            }
            apply_common(&mut cfg, &common)?;
            run_engine(&cfg)
        }
        Command::Verify => {
            let rep = harness::verify_suite(VerifyOptions::default());
            for c in &rep.checks {
                println!("{:<18} {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
            }
            if rep.all_passed() {
                Ok(())
            } else {
                Err(Failure::Verification)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
