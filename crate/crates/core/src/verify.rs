//! Exhaustive engine-versus-oracle suites, as run by `ltrust verify`.

use std::fmt;
use std::time::{Duration, Instant};

use crate::rational::ratio;
use crate::trust_engine::{self, EpochScore, ReputationScore, Window};
use crate::urn_oracle::{self, IdentityCheck};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Largest urn for the single-sample suites.
    pub max_urn: u64,
    /// Largest urn for the exhaustive two-sample posterior suite.
    pub max_two_sample_urn: u64,
    /// Largest urn for the sampled two-sample predictive suite.
    pub max_predictive_urn: u64,
    /// Bound on `r, n, s, m` in the binomial identity suites.
    pub identity_grid: u64,
    /// Bound on `n, n'` and `m` in the engine-only suites.
    pub engine_grid: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            max_urn: 30,
            max_two_sample_urn: 10,
            max_predictive_urn: 20,
            identity_grid: 8,
            engine_grid: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, {} failures ({:.2}s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.failures,
            self.elapsed.as_secs_f64()
        )?;
        if let Some(first) = &self.first_failure {
            write!(f, "; first failure: {first}")?;
        }
        Ok(())
    }
}

struct Tally {
    name: &'static str,
    cases: u64,
    failures: u64,
    first_failure: Option<String>,
    started: Instant,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            first_failure: None,
            started: Instant::now(),
        }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            first_failure: self.first_failure,
            elapsed: self.started.elapsed(),
        }
    }
}

fn score(n: u64, k: u64) -> ReputationScore {
    ReputationScore::new(n, k, Window { start: 0, end: 1 }).expect("k <= n")
}

fn delta(n: u64, k: u64) -> EpochScore {
    EpochScore::new(n, k, Window { start: 1, end: 2 }).expect("k <= n")
}

/// Oracle next-draw probability against the closed-form trust.
pub fn next_draw_equivalence(max_urn: u64) -> SuiteReport {
    let mut t = Tally::new("next-draw probability == (k+1)/(n+2)");
    for urn in 1..=max_urn {
        for n in 0..urn {
            for k in 0..=n {
                let oracle = urn_oracle::next_black_prob(urn, n, k);
                let engine = trust_engine::trust(&score(n, k));
                t.check(matches!(&oracle, Ok(p) if p == engine.value()), || {
                    format!("N={urn} n={n} k={k}: oracle {oracle:?} engine {engine}")
                });
            }
        }
    }
    t.finish()
}

/// Sequential, closed-form and pooled two-sample posteriors agree.
pub fn two_sample_posterior(max_urn: u64) -> SuiteReport {
    let mut t = Tally::new("two-sample posterior: sequential == closed form == pooled");
    for urn in 1..=max_urn {
        for n in 0..=urn {
            for k in 0..=n {
                for n2 in 0..=urn - n {
                    for k2 in 0..=n2 {
                        let res = urn_oracle::posterior_two_samples(urn, n, k, n2, k2);
                        t.check(res.is_ok(), || {
                            format!("N={urn} n={n} k={k} n'={n2} k'={k2}: {res:?}")
                        });
                    }
                }
            }
        }
    }
    t.finish()
}

/// Oracle next-draw probability after two samples against `update`.
pub fn two_sample_predictive(max_urn: u64) -> SuiteReport {
    let mut t = Tally::new("two-sample next draw == trust(update)");
    let mut urns: Vec<u64> = (2..=max_urn)
        .step_by(3)
        .chain(std::iter::once(max_urn))
        .collect();
    urns.dedup();
    for urn in urns {
        for n in 0..urn {
            for n2 in 0..urn - n {
                for k in 0..=n {
                    for k2 in 0..=n2 {
                        let oracle = urn_oracle::next_black_prob_two_samples(urn, n, k, n2, k2);
                        let updated =
                            trust_engine::update(&score(n, k), &delta(n2, k2)).expect("contiguous");
                        let engine = trust_engine::trust(&updated);
                        t.check(matches!(&oracle, Ok(p) if p == engine.value()), || {
                            format!("N={urn} n={n} k={k} n'={n2} k'={k2}: {oracle:?} vs {engine}")
                        });
                    }
                }
            }
        }
    }
    t.finish()
}

/// Product and summation binomial identities on the grid.
pub fn binomial_identities(grid: u64) -> SuiteReport {
    let mut t = Tally::new("binomial product and summation identities");
    for r in 0..=grid {
        for s in 0..=grid {
            for u in 0..=grid {
                t.check(urn_oracle::check_product_identity(r, s, u), || {
                    format!("product r={r} s={s} t={u}")
                });
            }
        }
    }
    for n in 0..=grid {
        for r in 0..=n {
            for s in 0..=grid {
                for m in 0..=grid {
                    let res = urn_oracle::check_summation_identity(r, s, n, m);
                    t.check(res == IdentityCheck::Holds, || {
                        format!("summation r={r} s={s} n={n} m={m}: {res:?}")
                    });
                }
            }
        }
    }
    t.finish()
}

/// The second-sample probability does not depend on the urn size.
pub fn second_sample_invariance(max_urn: u64) -> SuiteReport {
    let mut t = Tally::new("second-sample probability is urn-size invariant");
    for n in 0..=4 {
        for k in 0..=n {
            for n2 in 0..=4 {
                for k2 in 0..=n2 {
                    let base = (n + n2).max(1);
                    let reference = urn_oracle::second_sample_prob(base, n, k, n2, k2);
                    for urn in base..=max_urn {
                        let p = urn_oracle::second_sample_prob(urn, n, k, n2, k2);
                        t.check(reference.is_ok() && p.as_ref().ok() == reference.as_ref().ok(), || {
                            format!("n={n} k={k} n'={n2} k'={k2}: N={base} gives {reference:?}, N={urn} gives {p:?}")
                        });
                    }
                }
            }
        }
    }
    t.finish()
}

/// Future-success distribution normalizes and has mean `m (k+1)/(n+2)`.
pub fn future_successes(max_total: u64) -> SuiteReport {
    let mut t = Tally::new("future-success distribution: sums to 1, mean m(k+1)/(n+2)");
    for n in 0..=max_total {
        for m in 0..=max_total - n {
            for k in 0..=n {
                let expected = trust_engine::predict_expected_successes(&score(n, k), m);
                let dist = urn_oracle::future_success_dist(n, k, m);
                t.check(matches!(&dist, Ok(d) if d.mean() == expected), || {
                    format!("n={n} k={k} m={m}: {dist:?} vs {expected}")
                });
            }
        }
    }
    t.finish()
}

/// Marginal sample probability is `1/(n+1)` for every urn.
pub fn marginal_sample(max_urn: u64) -> SuiteReport {
    let mut t = Tally::new("marginal sample probability == 1/(n+1)");
    for urn in 1..=max_urn {
        for n in 0..=urn {
            for k in 0..=n {
                let p = urn_oracle::marginal_sample_prob(urn, n, k);
                t.check(matches!(&p, Ok(p) if *p == ratio(1, n + 1)), || {
                    format!("N={urn} n={n} k={k}: {p:?}")
                });
            }
        }
    }
    t.finish()
}

/// Predicted horizon trust equals current trust.
pub fn prediction_invariance(grid: u64) -> SuiteReport {
    let mut t = Tally::new("predicted horizon trust == current trust");
    for n in 0..=grid {
        for k in 0..=n {
            let s = score(n, k);
            for m in 0..=grid {
                let p = trust_engine::predict_score(&s, m, 1 + m).expect("horizon after window");
                t.check(
                    p.predicted_trust(&s) == *trust_engine::trust(&s).value(),
                    || format!("n={n} k={k} m={m}"),
                );
            }
        }
    }
    t.finish()
}

/// `improves` agrees with comparing trust before and after `update`.
pub fn improvement_equivalence(grid: u64) -> SuiteReport {
    let mut t = Tally::new("improves(s, d) == trust(update) >= trust(s)");
    for n in 0..=grid {
        for k in 0..=n {
            let s = score(n, k);
            let before = trust_engine::trust(&s);
            for n2 in 1..=grid {
                for k2 in 0..=n2 {
                    let d = delta(n2, k2);
                    let after =
                        trust_engine::trust(&trust_engine::update(&s, &d).expect("contiguous"));
                    let claimed = trust_engine::improves(&s, &d).expect("n' >= 1");
                    t.check(claimed == (after >= before), || {
                        format!("n={n} k={k} n'={n2} k'={k2}")
                    });
                }
            }
        }
    }
    t.finish()
}

/// Every suite, in a fixed order.
pub fn run_all(opts: &VerifyOptions) -> Vec<SuiteReport> {
    vec![
        next_draw_equivalence(opts.max_urn),
        marginal_sample(opts.max_urn),
        two_sample_posterior(opts.max_two_sample_urn),
        two_sample_predictive(opts.max_predictive_urn),
        binomial_identities(opts.identity_grid),
        second_sample_invariance(opts.max_urn.min(25)),
        future_successes(opts.max_urn),
        prediction_invariance(opts.engine_grid),
        improvement_equivalence(opts.engine_grid),
    ]
}
