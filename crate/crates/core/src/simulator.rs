//! Seeded marketplace experiments.
//!
//! Four scenarios: a seller across four price ranges, a plumber across six
//! service categories, six epochs of improving performance under both
//! discounting schemes, and long-term prediction of future successes.
//! Transactions go through a [`Chain`] and every reported trust value comes
//! from the engine; this module does no trust arithmetic of its own.
//!
//! Replication `r` draws from [`rng::stream`]`(seed, r)`, so replications can
//! run in any order (they do, on the rayon pool) and the output is still
//! bit-identical for a given config.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{Chain, SegmentKey, Segmentation, TransactionRecord};
use crate::rational::{self, from_u64, parse_rational, ratio, serde_rational, Rational};
use crate::rng::{self, StreamRng};
use crate::trust_engine::{self, EpochScore, ReputationScore, Window};
use crate::urn_oracle::{self, CareerSampler, UrnState};

const SELLER: &str = "seller-0";

/// Price boundaries for the four price-range segments.
pub const PRICE_BOUNDARIES: [u64; 3] = [10, 100, 1000];
/// A representative transaction value inside each price range.
const PRICE_VALUES: [u64; 4] = [5, 50, 500, 5000];
/// `(n, k)` per price range M1..M4 over a 250-tick window.
pub const PRICE_SEGMENT_COUNTS: [(u64, u64); 4] = [(100, 85), (3, 3), (1, 1), (0, 0)];
const PRICE_WINDOW: u64 = 250;

/// `(category, n, k)` for the plumber.
pub const SERVICE_SEGMENT_COUNTS: [(&str, u64, u64); 6] = [
    ("electric heater installation", 93, 92),
    ("gas heater installation", 29, 11),
    ("general plumbing repairs", 48, 39),
    ("maintenance contracts", 98, 58),
    ("gas boiler service", 18, 3),
    ("sewer repairs", 0, 0),
];

pub const EPOCH_LENGTH: u64 = 250;
/// Success rate in each of the six discounting epochs, in hundredths.
pub const EPOCH_SUCCESS_PERCENT: [u64; 6] = [55, 65, 70, 75, 80, 90];

/// Discount parameter rows, one per experiment.
pub const DISCOUNT_EXPERIMENTS: [[&str; 6]; 6] = [
    ["0.1", "0.1", "0.1", "0.1", "0.1", "0.5"],
    ["0.0", "0.0", "0.1", "0.2", "0.2", "0.5"],
    ["0.0", "0.0", "0.0", "0.0", "0.5", "0.5"],
    ["0.0", "0.0", "0.0", "0.0", "0.4", "0.6"],
    ["0.0", "0.0", "0.0", "0.0", "0.0", "1.0"],
    ["0.17", "0.17", "0.17", "0.17", "0.17", "0.17"],
];

pub fn discount_experiment(row: usize) -> Vec<Rational> {
    DISCOUNT_EXPERIMENTS[row]
        .iter()
        .map(|v| parse_rational(v).expect("constant parses"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Exact counts, no randomness.
    FixedCounts,
    /// Independent transactions with a fixed success probability.
    Bernoulli,
    /// Draws without replacement from an urn.
    Urn,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_counts" => Ok(Self::FixedCounts),
            "bernoulli" => Ok(Self::Bernoulli),
            "urn" => Ok(Self::Urn),
            _ => Err(Error::InvalidConfig(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PriceSegments,
    ServiceSegments,
    Discounting,
    LongTerm,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PriceSegments => "price_segments",
            Self::ServiceSegments => "service_segments",
            Self::Discounting => "discounting",
            Self::LongTerm => "long_term",
        }
    }

    pub fn default_mode(&self) -> Mode {
        match self {
            Self::PriceSegments | Self::ServiceSegments => Mode::FixedCounts,
            Self::Discounting => Mode::Bernoulli,
            Self::LongTerm => Mode::Urn,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "price_segments" => Ok(Self::PriceSegments),
            "service_segments" => Ok(Self::ServiceSegments),
            "discounting" => Ok(Self::Discounting),
            "long_term" => Ok(Self::LongTerm),
            _ => Err(Error::InvalidConfig(format!("unknown scenario {s:?}"))),
        }
    }
}

/// Scenario knobs. Fields irrelevant to the chosen scenario are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub transactions_per_epoch: u64,
    pub history_n: u64,
    /// Phase-1 successes in `fixed_counts` long-term runs.
    pub history_k: u64,
    /// Phase-1 success probability in `bernoulli` long-term runs.
    #[serde(with = "serde_rational")]
    pub history_success_rate: Rational,
    pub future_m: u64,
    /// Urn size for long-term urn sampling; defaults to `10 (n + m)`.
    pub urn_size: Option<u64>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            transactions_per_epoch: 100,
            history_n: 100,
            history_k: 85,
            history_success_rate: ratio(17, 20),
            future_m: 100,
            urn_size: None,
        }
    }
}

impl ScenarioParams {
    pub fn long_term_urn_size(&self) -> u64 {
        self.urn_size
            .unwrap_or(10 * (self.history_n + self.future_m))
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    pub mode: Mode,
    pub replications: u64,
    pub scenario: Scenario,
    pub params: ScenarioParams,
}

impl SimulationConfig {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        Self {
            seed,
            mode: scenario.default_mode(),
            replications: 1,
            scenario,
            params: ScenarioParams::default(),
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_replications(mut self, replications: u64) -> Self {
        self.replications = replications;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        let p = &self.params;
        if p.history_success_rate < Rational::zero() || p.history_success_rate > Rational::one() {
            return Err(Error::InvalidConfig(
                "history_success_rate must lie in [0, 1]".into(),
            ));
        }
        if self.scenario == Scenario::LongTerm {
            if self.mode == Mode::FixedCounts && p.history_k > p.history_n {
                return Err(Error::InvalidConfig("history_k exceeds history_n".into()));
            }
            if p.long_term_urn_size() < p.history_n + p.future_m {
                return Err(Error::InvalidConfig(
                    "urn_size must be at least history_n + future_m".into(),
                ));
            }
        }
        if self.scenario == Scenario::Discounting && p.transactions_per_epoch > EPOCH_LENGTH * 1_000
        {
            return Err(Error::InvalidConfig(
                "transactions_per_epoch is unreasonably large".into(),
            ));
        }
        Ok(())
    }

    /// Replications actually run: deterministic modes run once.
    fn effective_replications(&self) -> u64 {
        match (self.mode, self.scenario) {
            (Mode::FixedCounts, Scenario::LongTerm) => self.replications,
            (Mode::FixedCounts, _) => 1,
            _ => self.replications,
        }
    }
}

/// Key of a seller's success probability.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProfileKey {
    Segment(SegmentKey),
    Epoch(usize),
}

/// Per-segment or per-epoch success probabilities of a simulated seller.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SellerProfile {
    rates: BTreeMap<ProfileKey, Rational>,
}

impl SellerProfile {
    pub fn insert(&mut self, key: ProfileKey, rate: Rational) -> Result<()> {
        if rate < Rational::zero() || rate > Rational::one() {
            return Err(Error::InvalidConfig(format!(
                "success rate {} outside [0, 1]",
                rational::to_canonical(&rate)
            )));
        }
        self.rates.insert(key, rate);
        Ok(())
    }

    pub fn rate(&self, key: &ProfileKey) -> Option<&Rational> {
        self.rates.get(key)
    }
}

/// One output line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub label: String,
    pub replication: u64,
    pub counts: Option<(u64, u64)>,
    pub trust: Rational,
}

impl ResultRow {
    fn scored(
        scenario: Scenario,
        label: impl Into<String>,
        replication: u64,
        score: &ReputationScore,
    ) -> Self {
        Self {
            scenario,
            label: label.into(),
            replication,
            counts: Some((score.n(), score.k())),
            trust: trust_engine::trust(score).into_inner(),
        }
    }

    fn valued(
        scenario: Scenario,
        label: impl Into<String>,
        replication: u64,
        trust: Rational,
    ) -> Self {
        Self {
            scenario,
            label: label.into(),
            replication,
            counts: None,
            trust,
        }
    }

    /// `(numerator, denominator)` as printed: `(k+1, n+2)` for scored rows,
    /// the reduced fraction otherwise.
    pub fn trust_fraction(&self) -> (String, String) {
        match self.counts {
            Some((n, k)) => ((k + 1).to_string(), (n + 2).to_string()),
            None => (
                self.trust.numer().to_string(),
                self.trust.denom().to_string(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Statistic {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Metadata {
    pub scenario: Scenario,
    pub seed: u64,
    pub generator: &'static str,
    pub replications_run: u64,
    pub config: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSeries {
    pub metadata: Metadata,
    pub rows: Vec<ResultRow>,
    pub stats: Vec<Statistic>,
}

pub const CSV_COLUMNS: [&str; 8] = [
    "scenario",
    "label",
    "replication",
    "n",
    "k",
    "trust_num",
    "trust_den",
    "trust_decimal",
];

impl ResultSeries {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for row in &self.rows {
            let (num, den) = row.trust_fraction();
            let (n, k) = row.counts.map_or((String::new(), String::new()), |(n, k)| {
                (n.to_string(), k.to_string())
            });
            w.write_record([
                row.scenario.name(),
                &row.label,
                &row.replication.to_string(),
                &n,
                &k,
                &num,
                &den,
                &rational::to_decimal6(&row.trust),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|row| {
                let (num, den) = row.trust_fraction();
                serde_json::json!({
                    "scenario": row.scenario.name(),
                    "label": row.label,
                    "replication": row.replication,
                    "n": row.counts.map(|c| c.0),
                    "k": row.counts.map(|c| c.1),
                    "trust_num": num,
                    "trust_den": den,
                    "trust_decimal": rational::to_decimal6(&row.trust),
                })
            })
            .collect();
        serde_json::json!({ "metadata": self.metadata, "rows": rows, "stats": self.stats })
    }

    pub fn rows_labeled<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.label == label)
    }

    pub fn stat(&self, name: &str) -> Option<&str> {
        self.stats
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.value.as_str())
    }
}

/// Runs whichever scenario `config` names.
pub fn run(config: &SimulationConfig) -> Result<ResultSeries> {
    match config.scenario {
        Scenario::PriceSegments => run_price_segments(config),
        Scenario::ServiceSegments => run_service_segments(config),
        Scenario::Discounting => run_discounting(config),
        Scenario::LongTerm => run_long_term(config),
    }
}

fn expect_scenario(config: &SimulationConfig, scenario: Scenario) -> Result<()> {
    config.validate()?;
    if config.scenario != scenario {
        return Err(Error::InvalidConfig(format!(
            "config is for {}, not {}",
            config.scenario.name(),
            scenario.name()
        )));
    }
    Ok(())
}

fn finish(
    config: &SimulationConfig,
    rows: Vec<ResultRow>,
    mut extra: Vec<Statistic>,
) -> ResultSeries {
    let replications_run = config.effective_replications();
    let mut stats = vec![Statistic {
        name: "replications".into(),
        value: replications_run.to_string(),
    }];
    if replications_run > 1 {
        stats.extend(label_statistics(&rows));
    }
    stats.append(&mut extra);
    ResultSeries {
        metadata: Metadata {
            scenario: config.scenario,
            seed: config.seed,
            generator: rng::GENERATOR_ID,
            replications_run,
            config: config.clone(),
        },
        rows,
        stats,
    }
}

/// Mean (exact) and standard error of trust per label, in first-seen order.
fn label_statistics(rows: &[ResultRow]) -> Vec<Statistic> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&Rational>> = HashMap::new();
    for row in rows {
        let entry = groups.entry(&row.label).or_default();
        if entry.is_empty() {
            order.push(&row.label);
        }
        entry.push(&row.trust);
    }
    let mut out = Vec::new();
    for label in order {
        let values = &groups[label];
        let count = values.len() as u64;
        let mean: Rational = values.iter().copied().sum::<Rational>() / from_u64(count);
        let floats: Vec<f64> = values.iter().map(|v| rational::to_f64(v)).collect();
        out.push(Statistic {
            name: format!("mean_trust[{label}]"),
            value: rational::to_decimal6(&mean),
        });
        out.push(Statistic {
            name: format!("stderr_trust[{label}]"),
            value: format!("{:.6}", standard_error(&floats)),
        });
    }
    out
}

fn standard_error(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

fn bernoulli(rng: &mut StreamRng, rate: &Rational) -> bool {
    if rate.is_zero() {
        return false;
    }
    if rate.is_one() {
        return true;
    }
    let num = u64::try_from(rate.numer()).expect("rate numerator fits u64");
    let den = u64::try_from(rate.denom()).expect("rate denominator fits u64");
    rng.random_range(0..den) < num
}

/// Fulfilment outcomes for `n` transactions at `rate` under `mode`.
///
/// `fixed_k` is what `fixed_counts` produces; the urn mode draws `n` from an
/// urn of `10 n` balls holding `floor(rate · 10 n)` black ones.
fn outcomes(mode: Mode, rng: &mut StreamRng, n: u64, fixed_k: u64, rate: &Rational) -> Vec<bool> {
    match mode {
        Mode::FixedCounts => (0..n).map(|i| i < fixed_k).collect(),
        Mode::Bernoulli => (0..n).map(|_| bernoulli(rng, rate)).collect(),
        Mode::Urn => {
            let size = 10 * n;
            let black = (rate * from_u64(size)).floor().to_integer();
            let mut black = u64::try_from(&black).expect("black count fits u64");
            let mut total = size;
            (0..n)
                .map(|_| {
                    let hit = rng.random_range(0..total) < black;
                    if hit {
                        black -= 1;
                    }
                    total -= 1;
                    hit
                })
                .collect()
        }
    }
}

/// Records for `outcomes`, spread evenly over `[start, start + width)`.
fn records_for(
    segment: &SegmentKey,
    value: &Rational,
    start: u64,
    width: u64,
    outcomes: &[bool],
    buyer_offset: usize,
) -> Vec<TransactionRecord> {
    let n = outcomes.len() as u64;
    outcomes
        .iter()
        .enumerate()
        .map(|(i, &fulfilled)| TransactionRecord {
            seller_id: SELLER.to_string(),
            buyer_id: format!("buyer-{}", buyer_offset + i),
            segment: segment.clone(),
            value: value.clone(),
            tick: start + (i as u64 * width) / n.max(1),
            fulfilled,
        })
        .collect()
}

fn replicate<T: Send>(
    config: &SimulationConfig,
    f: impl Fn(u64, &mut StreamRng) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..config.effective_replications())
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng::stream(config.seed, rep);
            f(rep, &mut rng)
        })
        .collect()
}

/// Per-segment rates implied by fixed `(n, k)` counts.
fn profile_from_counts<'a>(
    entries: impl Iterator<Item = (SegmentKey, u64, u64)> + 'a,
) -> Result<SellerProfile> {
    let mut profile = SellerProfile::default();
    for (key, n, k) in entries {
        let rate = if n == 0 {
            Rational::zero()
        } else {
            ratio(k, n)
        };
        profile.insert(ProfileKey::Segment(key), rate)?;
    }
    Ok(profile)
}

fn run_segments(
    config: &SimulationConfig,
    segmentation: Option<Segmentation>,
    segments: Vec<(String, SegmentKey, Rational, u64, u64)>,
) -> Result<ResultSeries> {
    let profile = profile_from_counts(
        segments
            .iter()
            .map(|(_, key, _, n, k)| (key.clone(), *n, *k)),
    )?;
    let window = Window::new(0, PRICE_WINDOW)?;
    let per_rep = replicate(config, |rep, rng| {
        let mut chain = Chain::new(segmentation.clone());
        let mut offset = 0;
        for (_, key, value, n, k) in &segments {
            let rate = profile
                .rate(&ProfileKey::Segment(key.clone()))
                .expect("profile covers every segment");
            let outs = outcomes(config.mode, rng, *n, *k, rate);
            if !outs.is_empty() {
                chain.append(records_for(key, value, 0, PRICE_WINDOW, &outs, offset))?;
            }
            offset += outs.len();
        }
        Ok(segments
            .iter()
            .map(|(label, key, ..)| {
                ResultRow::scored(
                    config.scenario,
                    label.clone(),
                    rep,
                    &chain.reputation_of(SELLER, key, window),
                )
            })
            .collect::<Vec<_>>())
    })?;
    Ok(finish(
        config,
        per_rep.into_iter().flatten().collect(),
        Vec::new(),
    ))
}

/// Seller across four price ranges; rows `M1`..`M4`.
pub fn run_price_segments(config: &SimulationConfig) -> Result<ResultSeries> {
    expect_scenario(config, Scenario::PriceSegments)?;
    let segmentation = Segmentation::new(PRICE_BOUNDARIES.iter().map(|&b| from_u64(b)).collect())?;
    let segments = PRICE_SEGMENT_COUNTS
        .iter()
        .zip(PRICE_VALUES)
        .map(|(&(n, k), value)| {
            let value = from_u64(value);
            let key = segmentation.classify(&value)?;
            let label = match &key {
                SegmentKey::PriceRange(j) => format!("M{j}"),
                SegmentKey::ServiceCategory(_) => unreachable!("classify yields price ranges"),
            };
            Ok((label, key, value, n, k))
        })
        .collect::<Result<Vec<_>>>()?;
    run_segments(config, Some(segmentation), segments)
}

/// Plumber across six service categories; rows labeled by category.
pub fn run_service_segments(config: &SimulationConfig) -> Result<ResultSeries> {
    expect_scenario(config, Scenario::ServiceSegments)?;
    let segments = SERVICE_SEGMENT_COUNTS
        .iter()
        .map(|&(name, n, k)| {
            (
                name.to_string(),
                SegmentKey::service(name),
                from_u64(100),
                n,
                k,
            )
        })
        .collect();
    run_segments(config, None, segments)
}

/// One replication of the discounting experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscountingReplication {
    pub epochs: Vec<EpochScore>,
    pub aggregate: ReputationScore,
    /// Scheme-1 trust per experiment row.
    pub scheme1: Vec<Rational>,
    /// Scheme-2 trust per experiment row, rows normalized to sum to one.
    pub scheme2: Vec<Rational>,
}

pub fn epoch_profile() -> Result<SellerProfile> {
    let mut profile = SellerProfile::default();
    for (i, &pct) in EPOCH_SUCCESS_PERCENT.iter().enumerate() {
        profile.insert(ProfileKey::Epoch(i), ratio(pct, 100))?;
    }
    Ok(profile)
}

pub fn simulate_discounting(config: &SimulationConfig) -> Result<Vec<DiscountingReplication>> {
    expect_scenario(config, Scenario::Discounting)?;
    let per_epoch = config.params.transactions_per_epoch;
    let profile = epoch_profile()?;
    let segment = SegmentKey::service("generic");
    let value = from_u64(100);
    let boundaries: Vec<u64> = (0..=EPOCH_SUCCESS_PERCENT.len() as u64)
        .map(|i| i * EPOCH_LENGTH)
        .collect();
    let lambdas: Vec<Vec<Rational>> = (0..DISCOUNT_EXPERIMENTS.len())
        .map(discount_experiment)
        .collect();
    let weights: Vec<Vec<Rational>> = lambdas
        .iter()
        .map(|l| trust_engine::normalize(l))
        .collect::<Result<_>>()?;

    replicate(config, |_, rng| {
        let mut chain = Chain::new(None);
        let mut offset = 0;
        for (i, &start) in boundaries[..EPOCH_SUCCESS_PERCENT.len()].iter().enumerate() {
            let rate = profile.rate(&ProfileKey::Epoch(i)).expect("six epochs");
            let fixed_k = (rate * from_u64(per_epoch)).floor().to_integer();
            let fixed_k = u64::try_from(&fixed_k).expect("fits u64");
            let outs = outcomes(config.mode, rng, per_epoch, fixed_k, rate);
            if !outs.is_empty() {
                chain.append(records_for(
                    &segment,
                    &value,
                    start,
                    EPOCH_LENGTH,
                    &outs,
                    offset,
                ))?;
            }
            offset += outs.len();
        }
        let epochs = chain.epoch_slices(SELLER, &segment, &boundaries)?;
        let aggregate = trust_engine::aggregate(&epochs)?;
        let scheme1 = lambdas
            .iter()
            .map(|l| trust_engine::discount_scheme1(&epochs, l).map(|t| t.into_inner()))
            .collect::<Result<_>>()?;
        let scheme2 = weights
            .iter()
            .map(|w| trust_engine::discount_scheme2(&epochs, w).map(|t| t.into_inner()))
            .collect::<Result<_>>()?;
        Ok(DiscountingReplication {
            epochs,
            aggregate,
            scheme1,
            scheme2,
        })
    })
}

/// Six improving epochs; rows per epoch, the undiscounted aggregate, and
/// every experiment row under both schemes.
pub fn run_discounting(config: &SimulationConfig) -> Result<ResultSeries> {
    let reps = simulate_discounting(config)?;
    let scenario = config.scenario;
    let mut rows = Vec::new();
    for (rep, r) in reps.iter().enumerate() {
        let rep = rep as u64;
        for (i, e) in r.epochs.iter().enumerate() {
            rows.push(ResultRow::scored(
                scenario,
                format!("epoch{}", i + 1),
                rep,
                &e.as_score(),
            ));
        }
        rows.push(ResultRow::scored(scenario, "aggregate", rep, &r.aggregate));
        for (i, t) in r.scheme1.iter().enumerate() {
            rows.push(ResultRow::valued(
                scenario,
                format!("scheme1/experiment{}", i + 1),
                rep,
                t.clone(),
            ));
        }
        for (i, t) in r.scheme2.iter().enumerate() {
            rows.push(ResultRow::valued(
                scenario,
                format!("scheme2/experiment{}", i + 1),
                rep,
                t.clone(),
            ));
        }
    }
    let favoring = reps
        .iter()
        .filter(|r| r.scheme1[4] > trust_engine::trust(&r.aggregate).into_inner())
        .count();
    let extra = vec![Statistic {
        name: "fraction_experiment5_above_aggregate".into(),
        value: rational::to_decimal6(&ratio(favoring as u64, reps.len() as u64)),
    }];
    Ok(finish(config, rows, extra))
}

/// One replication of the long-term experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongTermReplication {
    pub history: ReputationScore,
    pub future_successes: u64,
    pub predicted_successes: Rational,
    pub predicted_trust: Rational,
}

pub fn simulate_long_term(config: &SimulationConfig) -> Result<Vec<LongTermReplication>> {
    expect_scenario(config, Scenario::LongTerm)?;
    let p = &config.params;
    let (n, m) = (p.history_n, p.future_m);
    let urn_size = p.long_term_urn_size();
    let history_window = Window::new(0, n)?;

    // Phase 1 on every stream, keeping each stream positioned for phase 2.
    let phase1: Vec<(u64, StreamRng)> = replicate(config, |_, rng| {
        let k = match config.mode {
            Mode::FixedCounts => p.history_k,
            Mode::Bernoulli => (0..n)
                .filter(|_| bernoulli(rng, &p.history_success_rate))
                .count() as u64,
            Mode::Urn => {
                let black = rng.random_range(0..=urn_size);
                urn_oracle::draw_without_replacement(rng, black, urn_size, n)
            }
        };
        Ok((k, rng.clone()))
    })?;

    let samplers: HashMap<u64, CareerSampler> = if config.mode == Mode::Bernoulli {
        HashMap::new()
    } else {
        let mut ks: Vec<u64> = phase1.iter().map(|(k, _)| *k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks.into_par_iter()
            .map(|k| Ok((k, CareerSampler::new(UrnState::new(urn_size, n, k)?))))
            .collect::<Result<_>>()?
    };

    phase1
        .into_par_iter()
        .map(|(k, mut rng)| {
            let history = ReputationScore::new(n, k, history_window)?;
            let future_successes = match config.mode {
                Mode::Bernoulli => {
                    let rate = ratio(k + 1, n + 2);
                    (0..m).filter(|_| bernoulli(&mut rng, &rate)).count() as u64
                }
                Mode::FixedCounts | Mode::Urn => samplers[&k].sample(m, &mut rng)?,
            };
            let prediction = trust_engine::predict_score(&history, m, n + m)?;
            Ok(LongTermReplication {
                history,
                future_successes,
                predicted_trust: prediction.predicted_trust(&history),
                predicted_successes: prediction.expected_k,
            })
        })
        .collect()
}

/// Mean future successes against the prediction, with the standard error
/// of the per-replication difference.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSummary {
    pub replications: u64,
    pub mean_simulated: Rational,
    pub mean_predicted: Rational,
    pub standard_error: f64,
}

impl ConvergenceSummary {
    pub fn from_replications(reps: &[LongTermReplication]) -> Self {
        let count = reps.len().max(1) as u64;
        let mean_simulated = reps
            .iter()
            .map(|r| from_u64(r.future_successes))
            .sum::<Rational>()
            / from_u64(count);
        let mean_predicted = reps
            .iter()
            .map(|r| r.predicted_successes.clone())
            .sum::<Rational>()
            / from_u64(count);
        let diffs: Vec<f64> = reps
            .iter()
            .map(|r| r.future_successes as f64 - rational::to_f64(&r.predicted_successes))
            .collect();
        Self {
            replications: reps.len() as u64,
            mean_simulated,
            mean_predicted,
            standard_error: standard_error(&diffs),
        }
    }

    /// `(mean_simulated - mean_predicted) / standard_error`; zero when both
    /// the gap and the error vanish.
    pub fn z_score(&self) -> f64 {
        let gap = rational::to_f64(&(&self.mean_simulated - &self.mean_predicted));
        if gap == 0.0 {
            0.0
        } else {
            gap / self.standard_error
        }
    }
}

/// Long-term prediction; rows `history`, `horizon`, `predicted_horizon` per
/// replication.
pub fn run_long_term(config: &SimulationConfig) -> Result<ResultSeries> {
    let reps = simulate_long_term(config)?;
    let scenario = config.scenario;
    let m = config.params.future_m;
    let mut rows = Vec::with_capacity(reps.len() * 3);
    for (rep, r) in reps.iter().enumerate() {
        let rep = rep as u64;
        let horizon = ReputationScore::new(
            r.history.n() + m,
            r.history.k() + r.future_successes,
            Window::new(0, r.history.n() + m)?,
        )?;
        rows.push(ResultRow::scored(scenario, "history", rep, &r.history));
        rows.push(ResultRow::scored(scenario, "horizon", rep, &horizon));
        rows.push(ResultRow::valued(
            scenario,
            "predicted_horizon",
            rep,
            r.predicted_trust.clone(),
        ));
    }
    let summary = ConvergenceSummary::from_replications(&reps);
    let extra = vec![
        Statistic {
            name: "mean_future_successes".into(),
            value: rational::to_decimal6(&summary.mean_simulated),
        },
        Statistic {
            name: "mean_predicted_successes".into(),
            value: rational::to_decimal6(&summary.mean_predicted),
        },
        Statistic {
            name: "stderr_difference".into(),
            value: format!("{:.6}", summary.standard_error),
        },
        Statistic {
            name: "z_score".into(),
            value: format!("{:.6}", summary.z_score()),
        },
    ];
    Ok(finish(config, rows, extra))
}
