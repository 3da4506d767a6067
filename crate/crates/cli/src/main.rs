//! `ltrust`: command-line front end for the trust engine.
//!
//! Exit codes: 0 on success, 1 on a domain error (invalid scores, weights,
//! corrupt chains, I/O), 2 on a usage error. Errors are a single line on
//! stderr of the form `error[domain]: ...` or `error[usage]: ...`.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use laplace_trust::ledger::{self, Chain, SegmentKey, Segmentation};
use laplace_trust::rational::{self, Rational};
use laplace_trust::simulator::{self, Mode, Scenario, SimulationConfig};
use laplace_trust::trust_engine::{self, EpochScore, ReputationScore, Window};
use laplace_trust::verify::{self, VerifyOptions};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(
    name = "ltrust",
    version,
    about = "Exact trust measures for marketplace sellers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trust (k+1)/(n+2) of a reputation score.
    Trust {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
    },
    /// Extend a score with a new epoch and report the new trust.
    Update {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        #[arg(long = "delta-n")]
        delta_n: u64,
        #[arg(long = "delta-k")]
        delta_k: u64,
    },
    /// Discounted trust over a sequence of epochs.
    Discount {
        #[arg(long, value_parser = ["1", "2"])]
        scheme: String,
        /// JSON array of epochs: `[n, k]` pairs or `{"n", "k", "start", "end"}` objects.
        #[arg(long)]
        epochs: PathBuf,
        /// JSON array of rationals (`"p/q"`, decimal strings or numbers).
        #[arg(long)]
        weights: PathBuf,
        /// Rescale the weights to sum to one before applying them.
        #[arg(long)]
        normalize: bool,
    },
    /// Expected successes among the next m transactions.
    Predict {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        m: u64,
        /// Horizon tick; the score's window is taken as [0, n).
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Run a seeded marketplace simulation.
    Simulate(SimulateArgs),
    /// Manage a hash-chained transaction ledger.
    Ledger {
        #[command(subcommand)]
        command: LedgerCommand,
    },
    /// Run the exhaustive engine-versus-oracle suites.
    Verify {
        /// Largest urn size for the single-sample suites.
        #[arg(long = "max-N", alias = "max-n", default_value_t = 30)]
        max_urn: u64,
        /// Bound for the binomial identity grids.
        #[arg(long, default_value_t = 8)]
        grid: u64,
        #[arg(long = "max-two-sample-N", default_value_t = 10)]
        max_two_sample_urn: u64,
        #[arg(long = "max-predictive-N", default_value_t = 20)]
        max_predictive_urn: u64,
        /// Bound on n, n' and m for the engine-only suites.
        #[arg(long, default_value_t = 50)]
        engine_grid: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = ["price_segments", "service_segments", "discounting", "long_term"])]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = ["fixed_counts", "bernoulli", "urn"])]
    mode: Option<String>,
    #[arg(long, default_value_t = 1)]
    replications: u64,
    /// Output file, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: String,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long)]
    transactions_per_epoch: Option<u64>,
    #[arg(long)]
    history_n: Option<u64>,
    #[arg(long)]
    history_k: Option<u64>,
    #[arg(long)]
    history_success_rate: Option<String>,
    #[arg(long)]
    future_m: Option<u64>,
    #[arg(long)]
    urn_size: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum LedgerCommand {
    /// Create an empty chain file.
    Init {
        #[arg(long, env = "TRUST_CHAIN")]
        chain: PathBuf,
        /// Comma-separated price boundaries, e.g. `10,100,1000`.
        #[arg(long)]
        price_boundaries: Option<String>,
    },
    /// Append a JSON-lines file of transaction records as one block.
    Append {
        #[arg(long, env = "TRUST_CHAIN")]
        chain: PathBuf,
        #[arg(long)]
        records: PathBuf,
        /// Used only when the chain file does not exist yet.
        #[arg(long)]
        price_boundaries: Option<String>,
    },
    /// Reputation of one seller in one segment.
    Query {
        #[arg(long, env = "TRUST_CHAIN")]
        chain: PathBuf,
        #[arg(long)]
        seller: String,
        /// `price:<index>` or `service:<name>`.
        #[arg(long)]
        segment: String,
        #[arg(long, default_value_t = 0)]
        from: u64,
        #[arg(long, default_value_t = u64::MAX)]
        to: u64,
        /// Comma-separated epoch boundaries; prints one line per epoch.
        #[arg(long)]
        epochs: Option<String>,
    },
    /// Check every hash and link.
    Verify {
        #[arg(long, env = "TRUST_CHAIN")]
        chain: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Domain(String),
    Usage(String),
    /// The reader of stdout went away, as with `ltrust ... | head`.
    Closed,
}

impl From<laplace_trust::Error> for CliError {
    fn from(e: laplace_trust::Error) -> Self {
        if e.is_broken_pipe() {
            CliError::Closed
        } else {
            CliError::Domain(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            CliError::Closed
        } else {
            CliError::Domain(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid usage");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli.command, &mut out) {
        Ok(()) | Err(CliError::Closed) => ExitCode::SUCCESS,
        Err(CliError::Domain(msg)) => {
            eprintln!("error[domain]: {}", one_line(&msg));
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error[usage]: {}", one_line(&msg));
            ExitCode::from(2)
        }
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn run(command: Command, out: &mut dyn Write) -> CliResult {
    match command {
        Command::Trust { n, k } => {
            let score = ReputationScore::counts(n, k)?;
            writeln!(out, "{}", laplace_line(&score))?;
        }
        Command::Update {
            n,
            k,
            delta_n,
            delta_k,
        } => {
            let score = ReputationScore::new(n, k, Window::new(0, 1)?)?;
            let delta = EpochScore::new(delta_n, delta_k, Window::new(1, 2)?)?;
            let updated = trust_engine::update(&score, &delta)?;
            writeln!(out, "score {} {}", updated.n(), updated.k())?;
            writeln!(out, "trust {}", laplace_line(&updated))?;
            if delta_n > 0 {
                writeln!(out, "improves {}", trust_engine::improves(&score, &delta)?)?;
            }
        }
        Command::Discount {
            scheme,
            epochs,
            weights,
            normalize,
        } => {
            let epochs = read_epochs(&epochs)?;
            let mut weights = read_weights(&weights)?;
            if normalize {
                weights = trust_engine::normalize(&weights)?;
            }
            let discounted = match scheme.as_str() {
                "1" => trust_engine::discount_scheme1(&epochs, &weights)?,
                _ => trust_engine::discount_scheme2(&epochs, &weights)?,
            };
            let (lo, hi) = trust_engine::epoch_trust_bounds(&epochs)?;
            writeln!(out, "discounted {} {}", discounted, discounted.to_decimal())?;
            writeln!(out, "min {} {}", lo, lo.to_decimal())?;
            writeln!(out, "max {} {}", hi, hi.to_decimal())?;
        }
        Command::Predict { n, k, m, horizon } => {
            let score = ReputationScore::new(n, k, Window::new(0, n)?)?;
            let prediction = trust_engine::predict_score(&score, m, horizon.unwrap_or(n + m))?;
            let horizon_trust = prediction.predicted_trust(&score);
            writeln!(
                out,
                "expected_k {} {}",
                rational::to_canonical(&prediction.expected_k),
                rational::to_decimal6(&prediction.expected_k)
            )?;
            writeln!(
                out,
                "horizon_trust {} {}",
                rational::to_canonical(&horizon_trust),
                rational::to_decimal6(&horizon_trust)
            )?;
        }
        Command::Simulate(args) => simulate(args, out)?,
        Command::Ledger { command } => ledger_cmd(command, out)?,
        Command::Verify {
            max_urn,
            grid,
            max_two_sample_urn,
            max_predictive_urn,
            engine_grid,
        } => {
            let opts = VerifyOptions {
                max_urn,
                max_two_sample_urn,
                max_predictive_urn,
                identity_grid: grid,
                engine_grid,
            };
            let reports = verify::run_all(&opts);
            for r in &reports {
                writeln!(out, "{r}")?;
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            writeln!(
                out,
                "{} of {} suites passed",
                reports.len() - failed,
                reports.len()
            )?;
            if failed > 0 {
                return Err(CliError::Domain(format!(
                    "{failed} verification suites failed"
                )));
            }
        }
    }
    Ok(())
}

/// `k+1/n+2 decimal`, the unreduced rule-of-succession fraction.
fn laplace_line(score: &ReputationScore) -> String {
    let (num, den) = score.laplace_fraction();
    format!("{num}/{den} {}", trust_engine::trust(score).to_decimal())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EpochEntry {
    Pair(u64, u64),
    Full {
        n: u64,
        k: u64,
        start: Option<u64>,
        end: Option<u64>,
    },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let file =
        File::open(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

/// Epochs without explicit windows are stamped on `[i, i+1)`.
fn read_epochs(path: &Path) -> CliResult<Vec<EpochScore>> {
    let entries: Vec<EpochEntry> = read_json(path)?;
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let i = i as u64;
            let (n, k, start, end) = match e {
                EpochEntry::Pair(n, k) => (n, k, i, i + 1),
                EpochEntry::Full { n, k, start, end } => {
                    (n, k, start.unwrap_or(i), end.unwrap_or(i + 1))
                }
            };
            Ok(EpochScore::new(n, k, Window::new(start, end)?)?)
        })
        .collect()
}

fn read_weights(path: &Path) -> CliResult<Vec<Rational>> {
    #[derive(Deserialize)]
    #[serde(transparent)]
    struct Weights(#[serde(with = "rational::serde_rational_vec")] Vec<Rational>);
    Ok(read_json::<Weights>(path)?.0)
}

fn parse_boundaries(text: &str) -> CliResult<Segmentation> {
    let values = text
        .split(',')
        .map(|v| rational::parse_rational(v).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Segmentation::new(values)?)
}

fn parse_ticks(text: &str) -> CliResult<Vec<u64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid tick {t:?}")))
        })
        .collect()
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> CliResult {
    let scenario: Scenario = args.scenario.parse()?;
    let mut config =
        SimulationConfig::new(scenario, args.seed).with_replications(args.replications);
    if let Some(mode) = &args.mode {
        config.mode = mode.parse::<Mode>()?;
    }
    let p = &mut config.params;
    if let Some(v) = args.transactions_per_epoch {
        p.transactions_per_epoch = v;
    }
    if let Some(v) = args.history_n {
        p.history_n = v;
    }
    if let Some(v) = args.history_k {
        p.history_k = v;
    }
    if let Some(v) = &args.history_success_rate {
        p.history_success_rate = rational::parse_rational(v)?;
    }
    if let Some(v) = args.future_m {
        p.future_m = v;
    }
    if args.urn_size.is_some() {
        p.urn_size = args.urn_size;
    }
    let series = simulator::run(&config)?;
    let write = |w: &mut dyn Write| -> CliResult {
        match args.format {
            OutputFormat::Csv => series.write_csv(w)?,
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut *w, &series.to_json())
                    .map_err(laplace_trust::Error::from)?;
                writeln!(w)?;
            }
        }
        Ok(())
    };
    if args.out == "-" {
        write(out)?;
    } else {
        let mut file = io::BufWriter::new(File::create(&args.out)?);
        write(&mut file)?;
        file.flush()?;
        for stat in &series.stats {
            writeln!(out, "{} {}", stat.name, stat.value)?;
        }
    }
    Ok(())
}

fn ledger_cmd(command: LedgerCommand, out: &mut dyn Write) -> CliResult {
    match command {
        LedgerCommand::Init {
            chain,
            price_boundaries,
        } => {
            if chain.exists() {
                return Err(CliError::Domain(format!(
                    "{} already exists",
                    chain.display()
                )));
            }
            let seg = price_boundaries
                .as_deref()
                .map(parse_boundaries)
                .transpose()?;
            Chain::new(seg).save(&chain)?;
            writeln!(out, "created {}", chain.display())?;
        }
        LedgerCommand::Append {
            chain: path,
            records,
            price_boundaries,
        } => {
            let mut chain = if path.exists() {
                load_verified(&path)?
            } else {
                Chain::new(
                    price_boundaries
                        .as_deref()
                        .map(parse_boundaries)
                        .transpose()?,
                )
            };
            let file = File::open(&records)
                .map_err(|e| CliError::Domain(format!("{}: {e}", records.display())))?;
            let batch = ledger::read_records(BufReader::new(file))?;
            let count = batch.len();
            let block = chain.append(batch)?;
            writeln!(
                out,
                "appended block {} ({count} records) {}",
                block.index, block.hash
            )?;
            chain.save(&path)?;
        }
        LedgerCommand::Query {
            chain,
            seller,
            segment,
            from,
            to,
            epochs,
        } => {
            let chain = load_verified(&chain)?;
            let segment: SegmentKey = segment.parse()?;
            match epochs {
                Some(ticks) => {
                    for e in chain.epoch_slices(&seller, &segment, &parse_ticks(&ticks)?)? {
                        writeln!(
                            out,
                            "{} {} {} {}",
                            e.epoch(),
                            e.n(),
                            e.k(),
                            laplace_line(&e.as_score())
                        )?;
                    }
                }
                None => {
                    let score = chain.reputation_of(&seller, &segment, Window::new(from, to)?);
                    writeln!(out, "{} {} {}", score.n(), score.k(), laplace_line(&score))?;
                }
            }
        }
        LedgerCommand::Verify { chain: path } => {
            let chain = load_verified(&path)?;
            writeln!(out, "ok {} blocks tip {}", chain.len(), chain.tip_hash())?;
        }
    }
    Ok(())
}

fn load_verified(path: &Path) -> CliResult<Chain> {
    let chain =
        Chain::load(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    if !chain.verify() {
        return Err(CliError::Domain(format!(
            "{}: chain verification failed",
            path.display()
        )));
    }
    Ok(chain)
}
