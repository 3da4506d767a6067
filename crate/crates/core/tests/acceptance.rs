//! Acceptance checks, one line per criterion.
//!
//! Run with `cargo test -p laplace-trust --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use laplace_trust::rational::{from_biguint_ratio, ratio, to_f64, Rational};
use laplace_trust::simulator::{self, Mode, ResultSeries, Scenario, SimulationConfig};
use laplace_trust::trust_engine::{
    self, contiguous_epochs, discount_scheme1, discount_scheme2, epoch_trust_bounds, normalize,
    EpochScore, ReputationScore, Window,
};
use laplace_trust::urn_oracle::{self, binom, IdentityCheck};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn score(n: u64, k: u64) -> ReputationScore {
    ReputationScore::new(n, k, Window::new(0, 1).unwrap()).unwrap()
}

fn delta(n: u64, k: u64) -> EpochScore {
    EpochScore::new(n, k, Window::new(1, 2).unwrap()).unwrap()
}

fn laplace(n: u64, k: u64) -> Rational {
    ratio(k + 1, n + 2)
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!(
            "{what} took {:.2}s, limit {}s",
            elapsed.as_secs_f64(),
            limit.as_secs()
        ))
    }
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut cases = 0;
    for urn in 1..=30u64 {
        for n in 0..urn {
            for k in 0..=n {
                let p = urn_oracle::next_black_prob(urn, n, k)
                    .map_err(|e| format!("N={urn} n={n} k={k}: {e}"))?;
                if p != laplace(n, k) {
                    return Err(format!("N={urn} n={n} k={k}: oracle {p}"));
                }
                cases += 1;
            }
        }
    }
    within(started.elapsed(), Duration::from_secs(10), "oracle grid")?;
    Ok(format!(
        "{cases} cases exact in {:.2}s",
        started.elapsed().as_secs_f64()
    ))
}

fn criterion_2() -> Outcome {
    let mut posteriors = 0;
    for urn in 1..=10u64 {
        for n in 0..=urn {
            for k in 0..=n {
                for n2 in 0..=urn - n {
                    for k2 in 0..=n2 {
                        let two = urn_oracle::posterior_two_samples(urn, n, k, n2, k2)
                            .map_err(|e| format!("N={urn} n={n} k={k} n'={n2} k'={k2}: {e}"))?;
                        let pooled = urn_oracle::posterior(urn, n + n2, k + k2)
                            .map_err(|e| e.to_string())?;
                        if two.probs() != pooled.probs() {
                            return Err(format!(
                                "N={urn} n={n} k={k} n'={n2} k'={k2}: pooled mismatch"
                            ));
                        }
                        // C(i, k+k') C(N-i, n+n'-k-k') / C(N+1, n+n'+1)
                        let den = binom(urn + 1, (n + n2 + 1) as i64);
                        for (i, p) in two.probs().iter().enumerate() {
                            let i = i as u64;
                            let num = binom(i, (k + k2) as i64)
                                * binom(urn - i, (n + n2 - k - k2) as i64);
                            if *p != from_biguint_ratio(num, den.clone()) {
                                return Err(format!(
                                    "N={urn} n={n} k={k} n'={n2} k'={k2} i={i}: closed form"
                                ));
                            }
                        }
                        posteriors += 1;
                    }
                }
            }
        }
    }
    let mut predictive = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for urn in 2..=20u64 {
        for _ in 0..60 {
            let n = rng.random_range(0..urn);
            let n2 = rng.random_range(0..urn - n);
            let k = rng.random_range(0..=n);
            let k2 = rng.random_range(0..=n2);
            let p = urn_oracle::next_black_prob_two_samples(urn, n, k, n2, k2)
                .map_err(|e| e.to_string())?;
            if p != laplace(n + n2, k + k2) {
                return Err(format!("Pr[B'] N={urn} n={n} k={k} n'={n2} k'={k2}: {p}"));
            }
            predictive += 1;
        }
    }
    Ok(format!(
        "{posteriors} posteriors (N <= 10), {predictive} predictive cases (N <= 20) exact"
    ))
}

fn criterion_3() -> Outcome {
    let mut cases = 0;
    for r in 0..=8 {
        for s in 0..=8 {
            for t in 0..=8 {
                if !urn_oracle::check_product_identity(r, s, t) {
                    return Err(format!("product identity r={r} s={s} t={t}"));
                }
                cases += 1;
            }
        }
    }
    for n in 0..=8 {
        for r in 0..=n {
            for s in 0..=8 {
                for m in 0..=8 {
                    let res = urn_oracle::check_summation_identity(r, s, n, m);
                    if res != IdentityCheck::Holds {
                        return Err(format!(
                            "summation identity r={r} s={s} n={n} m={m}: {res:?}"
                        ));
                    }
                    cases += 1;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut invariance = 0;
    for _ in 0..150 {
        let n = rng.random_range(0..=10);
        let n2 = rng.random_range(0..=10);
        let k = rng.random_range(0..=n);
        let k2 = rng.random_range(0..=n2);
        // C(k+k', k) C(n-k+n'-k', n-k) / C(n+n'+1, n+1)
        let expected = from_biguint_ratio(
            binom(k + k2, k as i64) * binom(n - k + n2 - k2, (n - k) as i64),
            binom(n + n2 + 1, (n + 1) as i64),
        );
        for urn in (n + n2).max(1)..=25 {
            let p = urn_oracle::second_sample_prob(urn, n, k, n2, k2).map_err(|e| e.to_string())?;
            if p != expected {
                return Err(format!(
                    "second sample N={urn} n={n} k={k} n'={n2} k'={k2}: {p} vs {expected}"
                ));
            }
            invariance += 1;
        }
    }
    Ok(format!(
        "{cases} identity cases, {invariance} urn-size invariance cases exact"
    ))
}

fn criterion_4() -> Outcome {
    let mut cases = 0;
    for n in 0..=30u64 {
        for m in 0..=30 - n {
            for k in 0..=n {
                let d = urn_oracle::future_success_dist(n, k, m).map_err(|e| e.to_string())?;
                let total: Rational = d.probs().iter().cloned().sum();
                let mean: Rational = d
                    .probs()
                    .iter()
                    .enumerate()
                    .map(|(r, p)| p * ratio(r as u64, 1))
                    .sum();
                let expected = ratio(m * (k + 1), n + 2);
                if !total.is_one() || mean != expected || d.mean() != expected {
                    return Err(format!("n={n} k={k} m={m}: total {total}, mean {mean}"));
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} distributions normalized with exact mean"))
}

fn criterion_5() -> Outcome {
    let mut cases = 0;
    for n in 0..=50 {
        for k in 0..=n {
            let s = score(n, k);
            for m in 0..=50 {
                let p = trust_engine::predict_score(&s, m, 1 + m).map_err(|e| e.to_string())?;
                if p.predicted_trust(&s) != laplace(n, k) {
                    return Err(format!("n={n} k={k} m={m}"));
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} predictions exact"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for instance in 0..10_000 {
        let r = rng.random_range(1..=10);
        let counts: Vec<(u64, u64)> = (0..r)
            .map(|_| {
                let n = rng.random_range(0..=500);
                (n, rng.random_range(0..=n))
            })
            .collect();
        let mut lambdas: Vec<Rational> = (0..r)
            .map(|_| ratio(rng.random_range(0..=100), rng.random_range(1..=20)))
            .collect();
        if lambdas.iter().all(Zero::is_zero) {
            lambdas[0] = Rational::one();
        }
        let epochs = contiguous_epochs(0, 250, &counts).map_err(|e| e.to_string())?;
        let (lo, hi) = epoch_trust_bounds(&epochs).map_err(|e| e.to_string())?;
        let d1 = discount_scheme1(&epochs, &lambdas).map_err(|e| e.to_string())?;
        let d2 = discount_scheme2(&epochs, &normalize(&lambdas).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        if !(lo <= d1 && d1 <= hi && lo <= d2 && d2 <= hi) {
            return Err(format!("instance {instance}: {counts:?} {lambdas:?}"));
        }
    }
    let mut lemma = 0;
    for n in 0..=50 {
        for k in 0..=n {
            let s = score(n, k);
            let before = laplace(n, k);
            for n2 in 1..=50 {
                for k2 in 0..=n2 {
                    let d = delta(n2, k2);
                    let claimed = trust_engine::improves(&s, &d).map_err(|e| e.to_string())?;
                    let after = trust_engine::trust(
                        &trust_engine::update(&s, &d).map_err(|e| e.to_string())?,
                    );
                    if claimed != (*after.value() >= before) {
                        return Err(format!("improves n={n} k={k} n'={n2} k'={k2}"));
                    }
                    lemma += 1;
                }
            }
        }
    }
    Ok(format!(
        "10000 discount instances in bounds, {lemma} improvement cases agree"
    ))
}

fn fractions(series: &ResultSeries) -> Vec<(String, String)> {
    series.rows.iter().map(|r| r.trust_fraction()).collect()
}

fn expect_fractions(
    series: &ResultSeries,
    expected: &[(u64, u64)],
    what: &str,
) -> Result<(), String> {
    let got = fractions(series);
    let want: Vec<(String, String)> = expected
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    if got != want {
        return Err(format!("{what}: got {got:?}"));
    }
    for (row, (a, b)) in series.rows.iter().zip(expected) {
        if row.trust != ratio(*a, *b) {
            return Err(format!("{what}: {} is {}", row.label, row.trust));
        }
    }
    Ok(())
}

fn criterion_7() -> Outcome {
    let price = simulator::run(&SimulationConfig::new(Scenario::PriceSegments, 0))
        .map_err(|e| e.to_string())?;
    expect_fractions(
        &price,
        &[(86, 102), (4, 5), (2, 3), (1, 2)],
        "price segments",
    )?;
    let service = simulator::run(&SimulationConfig::new(Scenario::ServiceSegments, 0))
        .map_err(|e| e.to_string())?;
    expect_fractions(
        &service,
        &[(93, 95), (12, 31), (40, 50), (59, 100), (4, 20), (1, 2)],
        "service segments",
    )?;
    let mut reps = 0;
    for mode in [Mode::FixedCounts, Mode::Bernoulli, Mode::Urn] {
        let config = SimulationConfig::new(Scenario::Discounting, 5)
            .with_mode(mode)
            .with_replications(200);
        for r in simulator::simulate_discounting(&config).map_err(|e| e.to_string())? {
            let last = trust_engine::trust(&r.epochs[5].as_score()).into_inner();
            if r.scheme1[4] != last {
                return Err(format!(
                    "{mode:?}: experiment 5 gives {} but last epoch {last}",
                    r.scheme1[4]
                ));
            }
            reps += 1;
        }
    }
    Ok(format!(
        "segment fixtures exact, experiment 5 equals last epoch in {reps} replications"
    ))
}

fn criterion_8() -> Outcome {
    let started = Instant::now();
    let mut config = SimulationConfig::new(Scenario::LongTerm, 8)
        .with_mode(Mode::Urn)
        .with_replications(10_000);
    config.params.history_n = 100;
    config.params.future_m = 100;
    let reps = simulator::simulate_long_term(&config).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let count = reps.len() as f64;
    let diffs: Vec<f64> = reps
        .iter()
        .map(|r| r.future_successes as f64 - 100.0 * (r.history.k() + 1) as f64 / 102.0)
        .collect();
    let mean = diffs.iter().sum::<f64>() / count;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let se = (var / count).sqrt();
    let mean_sim = reps.iter().map(|r| r.future_successes as f64).sum::<f64>() / count;
    let mean_pred = reps
        .iter()
        .map(|r| to_f64(&r.predicted_successes))
        .sum::<f64>()
        / count;
    if mean.abs() > 3.0 * se {
        return Err(format!(
            "simulated {mean_sim:.3} vs predicted {mean_pred:.3}, gap {mean:.3} > 3 x {se:.3}"
        ));
    }
    within(elapsed, Duration::from_secs(60), "long-term simulation")?;
    Ok(format!(
        "{} replications, simulated {mean_sim:.3} vs predicted {mean_pred:.3} (z = {:.2}) in {:.2}s",
        reps.len(),
        mean / se,
        elapsed.as_secs_f64()
    ))
}

fn criterion_9() -> Outcome {
    let chain = common::random_chain(9, 20);
    let bytes = chain.to_bytes();
    if common::tamper_detected(&bytes) {
        return Err("pristine chain rejected".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let mut corrupt = bytes.clone();
        let pos = rng.random_range(0..corrupt.len());
        corrupt[pos] ^= 1 << rng.random_range(0..8);
        if !common::tamper_detected(&corrupt) {
            return Err(format!("bit flip at byte {pos} undetected"));
        }
    }
    let segs = common::segments();
    let window = Window::new(0, u64::MAX).unwrap();
    let mut chain = chain;
    let mut comparisons = 0;
    for batch in 0..200 {
        let target = rng.random_range(0..segs.len());
        let snapshot: Vec<_> = common::SELLERS
            .iter()
            .flat_map(|s| segs.iter().map(move |g| (*s, g)))
            .map(|(s, g)| chain.trust_of(s, g, window).value().clone())
            .collect();
        let tip = chain.records().map(|r| r.tick).max().unwrap_or(0);
        let size = rng.random_range(1..=10);
        let records = (0..size)
            .map(|i| common::random_record(&mut rng, &segs[target], tip + i))
            .collect();
        chain.append(records).map_err(|e| e.to_string())?;
        let mut i = 0;
        for s in common::SELLERS {
            for (j, g) in segs.iter().enumerate() {
                if j != target {
                    if *chain.trust_of(s, g, window).value() != snapshot[i] {
                        return Err(format!(
                            "batch {batch}: {s} in {g} changed after append to {}",
                            segs[target]
                        ));
                    }
                    comparisons += 1;
                }
                i += 1;
            }
        }
    }
    if !chain.verify() {
        return Err("chain fails verification after appends".into());
    }
    Ok(format!(
        "1000 bit flips detected, {comparisons} foreign-segment trusts unchanged"
    ))
}

fn criterion_10() -> Outcome {
    let mut runs = 0;
    for scenario in [
        Scenario::PriceSegments,
        Scenario::ServiceSegments,
        Scenario::Discounting,
        Scenario::LongTerm,
    ] {
        for mode in [Mode::FixedCounts, Mode::Bernoulli, Mode::Urn] {
            let config = SimulationConfig::new(scenario, 10)
                .with_mode(mode)
                .with_replications(50);
            let a = simulator::run(&config)
                .map_err(|e| e.to_string())?
                .to_csv_string();
            let b = simulator::run(&config)
                .map_err(|e| e.to_string())?
                .to_csv_string();
            if a != b {
                return Err(format!(
                    "{} {mode:?}: CSV differs between runs",
                    scenario.name()
                ));
            }
            runs += 1;
        }
    }
    Ok(format!(
        "{runs} configurations byte-identical across two runs"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "next-draw oracle equals Laplace trust, N <= 30",
            criterion_1,
        ),
        (
            "two-sample posterior and predictive probability",
            criterion_2,
        ),
        ("binomial identities and urn-size invariance", criterion_3),
        ("future-success distribution, n + m <= 30", criterion_4),
        ("predicted horizon trust equals current trust", criterion_5),
        ("discount bounds and improvement test", criterion_6),
        ("segment fixtures and experiment 5", criterion_7),
        ("long-term convergence", criterion_8),
        ("ledger tamper detection and segment isolation", criterion_9),
        ("simulator determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
