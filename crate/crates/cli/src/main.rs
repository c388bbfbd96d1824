//! `emergence-lab`: effective information, macroscale search and channel
//! capacity for discrete systems given as TPM or element-network files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use emergence_core::capacity::{
    blahut_arimoto, capacity_random_search, emergence_gap, exact_symbol_error, random_message, simulate_coding,
    DEFAULT_CAPACITY_MAX_ITER, DEFAULT_CAPACITY_TOL,
};
use emergence_core::gates::{and_network, compile_tpm, network_from_json_str, GateNetwork};
use emergence_core::io::{tpm_from_csv_str, tpm_from_json_str, tpm_to_csv_string, tpm_to_json_value};
use emergence_core::measures::full_report;
use emergence_core::search::{
    anneal_search, anneal_search_network, exhaustive_search, exhaustive_search_network, ladder_report,
    ladder_report_network, ladder_to_csv, network_emergence_check, LadderRow, Schedule, SearchConfig, SearchMode,
    DEFAULT_BUDGET,
};
use emergence_core::tpm::Distribution;
use emergence_core::{fixtures, Choice, Error, LadderLevel, ModelChoice, Partition, Result, Tpm};

/// Seed used by every randomized command when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_170_906;

#[derive(Parser)]
#[command(name = "emergence-lab", version, about = "Causal emergence analysis of discrete systems")]
struct Cli {
    /// Worker threads; results are identical for any count.
    #[arg(long, global = true, env = "EMERGENCE_LAB_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// EI, determinism, degeneracy and effectiveness of the micro model.
    Analyze { input: PathBuf },
    /// Best macroscale model choice up to a ladder level.
    Search {
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        level: u8,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Emergence gap plus the per-level ladder.
    Report {
        input: PathBuf,
        /// Highest ladder level.
        #[arg(long, default_value_t = 2)]
        ladder: u8,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Channel capacity of the TPM.
    Capacity {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAPACITY_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_CAPACITY_MAX_ITER)]
        max_iter: usize,
        /// Use seeded random search plus hill climbing with this many samples.
        #[arg(long)]
        random_search: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Simulate sending random messages with the micro code and a macro code.
    CodeSim {
        input: PathBuf,
        /// Macro code as comma-separated block labels per state; defaults to the best coarse-graining.
        #[arg(long)]
        code: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        symbols: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Print a built-in fixture TPM; lists the names when none is given.
    Fixtures { name: Option<String> },
    /// Compile an element network to its TPM.
    CompileNet {
        input: PathBuf,
        /// Check the six-AND reference network instead; the input then holds its wiring.
        #[arg(long, value_enum)]
        fixture: Option<NetFixture>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        budget: Option<u128>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NetFixture {
    #[value(name = "six-and", alias = "fig2")]
    SixAnd,
}

#[derive(Args)]
struct SearchArgs {
    /// Simulated annealing instead of exhaustive enumeration.
    #[arg(long)]
    anneal: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Most choices an exhaustive search may evaluate.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    /// Tolerate up to this much probability escaping the endogenous states.
    #[arg(long, value_name = "TOL")]
    allow_leak: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        let mut c = SearchConfig { budget: self.budget, ..SearchConfig::default() };
        if let Some(tol) = self.allow_leak {
            c.leak_tolerance = tol;
        }
        c
    }

    fn schedule(&self) -> Schedule {
        let d = Schedule::default();
        Schedule { steps: self.steps.unwrap_or(d.steps), chains: self.chains.unwrap_or(d.chains), ..d }
    }

    fn mode(&self) -> SearchMode {
        if self.anneal {
            SearchMode::Anneal { seed: self.seed, schedule: self.schedule() }
        } else {
            SearchMode::Exhaustive
        }
    }
}

enum System {
    Tpm(Tpm),
    Network(GateNetwork<f64>),
}

impl System {
    fn tpm(&self) -> Result<Tpm> {
        match self {
            System::Tpm(t) => Ok(t.clone()),
            System::Network(g) => compile_tpm(g),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<System> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return tpm_from_csv_str(&text).map(System::Tpm);
    }
    let value: Value = serde_json::from_str(&text)?;
    if value.get("elements").is_some() {
        network_from_json_str(&text).map(System::Network)
    } else {
        tpm_from_json_str(&text).map(System::Tpm)
    }
}

fn json<S: serde::Serialize>(x: &S) -> String {
    // Value maps are ordered, so keys come out sorted
    let v = serde_json::to_value(x).expect("output serializes");
    serde_json::to_string_pretty(&v).expect("value serializes")
}

fn csv_rows(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = format!("{header}\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn analyze(input: &Path, format: Format) -> Result<String> {
    let t = load(input)?.tpm()?;
    let r = full_report(&t, &Distribution::uniform(t.n()))?;
    Ok(match format {
        Format::Json => json(&r),
        Format::Csv => csv_rows(
            "measure,value",
            [
                ("ei", r.ei),
                ("determinism", r.determinism),
                ("degeneracy", r.degeneracy),
                ("eff", r.effectiveness),
                ("size", r.size),
                ("intervention_entropy", r.intervention_entropy),
            ]
            .map(|(k, v)| format!("{k},{v:?}")),
        ),
    })
}

fn search(input: &Path, level: u8, args: &SearchArgs, format: Format) -> Result<String> {
    let level = LadderLevel::new(level)?;
    let config = args.config();
    let schedule = args.schedule();
    let r = match (load(input)?, args.anneal) {
        (System::Tpm(t), false) => exhaustive_search(&t, level, &config)?,
        (System::Tpm(t), true) => anneal_search(&t, level, args.seed, &schedule, &config)?,
        (System::Network(g), false) => exhaustive_search_network(&g, level, &config)?,
        (System::Network(g), true) => anneal_search_network(&g, level, args.seed, &schedule, &config)?,
    };
    Ok(match format {
        Format::Json => json(&r),
        Format::Csv => csv_rows(
            "level,best_ei,macrostates,evaluated,skipped",
            [format!("{},{:?},{},{},{}", r.level, r.best_ei, r.best_choice.num_macrostates(), r.evaluated, r.skipped)],
        ),
    })
}

fn report(input: &Path, ladder: u8, args: &SearchArgs, format: Format) -> Result<String> {
    let level = LadderLevel::new(ladder)?;
    let config = args.config();
    let (t, rows) = match load(input)? {
        System::Tpm(t) => {
            let rows = ladder_report(&t, level, args.mode(), &config)?;
            (t, rows)
        }
        System::Network(g) => (compile_tpm(&g)?, ladder_report_network(&g, level, args.mode(), &config)?),
    };
    if format == Format::Csv {
        return Ok(ladder_to_csv(&rows));
    }
    let state_choices: Vec<ModelChoice> = rows
        .iter()
        .filter_map(|r| match &r.best_choice {
            Choice::Model(c) => Some(c.clone()),
            Choice::Element(_) => None,
        })
        .collect();
    let mut gap = serde_json::to_value(emergence_gap(&t, &state_choices)?)?;
    // element-level winners are not state choices; fold them in from the ladder
    let top: &LadderRow<f64> = rows.last().expect("ladder has level 0");
    if let Choice::Element(_) = top.best_choice {
        let micro = rows[0].ei_max;
        gap["cc"] = top.ei_max.into();
        gap["emergence"] = (top.ei_max - micro).max(0.0).into();
        gap["capacity_gap"] = (top.capacity - top.ei_max).max(0.0).into();
        gap["best_choice"] = serde_json::to_value(&top.best_choice)?;
    }
    Ok(json(&serde_json::json!({ "gap": gap, "ladder": rows })))
}

fn capacity(input: &Path, tol: f64, max_iter: usize, random: Option<usize>, seed: u64, format: Format) -> Result<String> {
    let t = load(input)?.tpm()?;
    let r = match random {
        Some(samples) => capacity_random_search(&t, samples, seed),
        None => blahut_arimoto(&t, tol, max_iter)?,
    };
    Ok(match format {
        Format::Json => json(&r),
        Format::Csv => csv_rows("state,p", r.optimal_input.as_slice().iter().enumerate().map(|(i, p)| format!("{i},{p:?}"))),
    })
}

fn parse_code(spec: &str, n: usize) -> Result<ModelChoice> {
    let labels = spec
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("code label {s:?}: {e}"))))
        .collect::<Result<Vec<usize>>>()?;
    if labels.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: labels.len() });
    }
    Ok(ModelChoice::coarse_grain(Partition::from_labels(&labels)?))
}

fn code_sim(input: &Path, code: Option<&str>, symbols: usize, seed: u64, format: Format) -> Result<String> {
    let t = load(input)?.tpm()?;
    let macro_code = match code {
        Some(spec) => parse_code(spec, t.n())?,
        None => match exhaustive_search(&t, LadderLevel::COARSE_GRAIN, &SearchConfig::default())?.best_choice {
            Choice::Model(c) => c,
            Choice::Element(_) => unreachable!("state search yields state choices"),
        },
    };
    let mut out = serde_json::Map::new();
    let mut csv = Vec::new();
    for (name, c) in [("micro", ModelChoice::micro(t.n())), ("macro", macro_code)] {
        let bits = c.num_macrostates().ilog2() as usize;
        let message = random_message(symbols * bits, seed);
        let r = simulate_coding(&t, &c, &message, seed)?;
        let exact = exact_symbol_error(&t, &c)?;
        csv.push(format!("{name},{:?},{:?},{exact:?},{}", r.rate, r.symbol_error_rate, r.transitions_used));
        out.insert(name.into(), serde_json::json!({ "code": c, "result": r, "exact_symbol_error": exact }));
    }
    Ok(match format {
        Format::Json => json(&out),
        Format::Csv => csv_rows("code,rate,symbol_error_rate,exact_symbol_error,transitions_used", csv),
    })
}

fn fixture(name: Option<&str>, format: Format) -> Result<String> {
    let Some(name) = name else {
        return Ok(fixtures::NAMES.join("\n") + "\n");
    };
    let t = fixtures::by_name(name).ok_or_else(|| Error::Parse(format!("unknown fixture {name:?}; known: {}", fixtures::NAMES.join(", "))))?;
    Ok(match format {
        Format::Json => json(&tpm_to_json_value(&t)),
        Format::Csv => tpm_to_csv_string(&t),
    })
}

fn state_labels(elements: usize) -> Vec<String> {
    (0..1usize << elements).map(|s| (0..elements).map(|k| if s >> k & 1 == 1 { '1' } else { '0' }).collect()).collect()
}

/// Wiring files are either a full network or a list of AND-gate input lists.
fn load_wiring(path: &Path) -> Result<GateNetwork<f64>> {
    let text = read(path)?;
    let value: Value = serde_json::from_str(&text)?;
    if value.is_array() {
        let wiring: Vec<Vec<usize>> = serde_json::from_value(value)?;
        and_network(&wiring)
    } else {
        network_from_json_str(&text)
    }
}

fn compile_net(input: &Path, fixture: Option<NetFixture>, seed: u64, budget: Option<u128>, format: Format) -> Result<String> {
    if let Some(NetFixture::SixAnd) = fixture {
        let g = load_wiring(input)?;
        let config = SearchConfig { budget: budget.unwrap_or(DEFAULT_BUDGET), ..SearchConfig::default() };
        let check = network_emergence_check(&g, seed, &Schedule::default(), &config)?;
        return Ok(match format {
            Format::Json => json(&check),
            Format::Csv => csv_rows(
                "target,expected,actual,pass",
                check.checks.iter().map(|c| format!("{},{:?},{:?},{}", c.name, c.expected, c.actual, c.pass)),
            ),
        });
    }
    let System::Network(g) = load(input)? else {
        return Err(Error::Parse("compile-net expects a network file with an \"elements\" list".into()));
    };
    let t = compile_tpm(&g)?.with_labels(state_labels(g.len()))?;
    Ok(match format {
        Format::Json => json(&tpm_to_json_value(&t)),
        Format::Csv => tpm_to_csv_string(&t),
    })
}

fn run(cli: &Cli) -> Result<String> {
    let f = cli.format;
    match &cli.command {
        Command::Analyze { input } => analyze(input, f),
        Command::Search { input, level, search: s } => search(input, *level, s, f),
        Command::Report { input, ladder, search: s } => report(input, *ladder, s, f),
        Command::Capacity { input, tol, max_iter, random_search, seed } => capacity(input, *tol, *max_iter, *random_search, *seed, f),
        Command::CodeSim { input, code, symbols, seed } => code_sim(input, code.as_deref(), *symbols, *seed, f),
        Command::Fixtures { name } => fixture(name.as_deref(), f),
        Command::CompileNet { input, fixture, seed, budget } => compile_net(input, *fixture, *seed, *budget, f),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::RefusedAboveThreshold { .. } => 3,
        Error::NotConverged { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = run(&cli).and_then(|mut text| {
        if !text.ends_with('\n') {
            text.push('\n');
        }
        match &cli.out {
            Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::RefusedAboveThreshold { .. } = e {
                eprintln!("hint: pass --anneal or raise --budget");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
