//! Brute-force urn model used to check every closed form in the engine.
//!
//! A seller is an urn of `N` balls, black for a fulfilled transaction and
//! white otherwise. Hypothesis `H_i` says the urn started with `i` black
//! balls; all `N + 1` compositions are equally likely a priori. Observing
//! `k` black among `n` draws without replacement gives a posterior over the
//! `H_i`, and every predictive quantity below is a finite sum over it.
//!
//! Each public quantity is computed along two independent routes (the
//! definitional Bayes sum and the closed form) and the routes must agree
//! exactly; a disagreement surfaces as [`Error::OracleDisagreement`].

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::rational::{self, from_biguint_ratio, Rational};
use crate::rng;

/// `C(a, b)`, zero when `b < 0` or `b > a`.
pub fn binom(a: u64, b: i64) -> BigUint {
    if b < 0 || b as u64 > a {
        return BigUint::zero();
    }
    let b = (b as u64).min(a - b as u64);
    let mut acc = BigUint::one();
    for j in 0..b {
        acc *= a - j;
        acc /= j + 1;
    }
    acc
}

/// Binomial with a possibly negative top, which vanishes.
fn choose(a: i64, b: i64) -> BigUint {
    if a < 0 {
        BigUint::zero()
    } else {
        binom(a as u64, b)
    }
}

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

/// An urn of `urn_size` balls after `drawn` draws, `black_drawn` of them black.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UrnState {
    pub urn_size: u64,
    pub drawn: u64,
    pub black_drawn: u64,
}

impl UrnState {
    pub fn new(urn_size: u64, drawn: u64, black_drawn: u64) -> Result<Self> {
        if urn_size == 0 {
            return Err(Error::InvalidUrn("urn size must be positive".into()));
        }
        if black_drawn > drawn || drawn > urn_size {
            return Err(Error::InvalidUrn(format!(
                "need k <= n <= N, got N={urn_size} n={drawn} k={black_drawn}"
            )));
        }
        Ok(Self {
            urn_size,
            drawn,
            black_drawn,
        })
    }
}

/// Exact distribution over the initial compositions `H_0..H_N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosteriorDistribution {
    probs: Vec<Rational>,
}

impl PosteriorDistribution {
    fn new(probs: Vec<Rational>) -> Result<Self> {
        let total: Rational = probs.iter().sum();
        if !total.is_one() {
            return Err(Error::OracleDisagreement("posterior does not sum to one"));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn urn_size(&self) -> u64 {
        self.probs.len() as u64 - 1
    }
}

/// Exact distribution of the number of black balls among `m` future draws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FutureSuccessDistribution {
    probs: Vec<Rational>,
}

impl FutureSuccessDistribution {
    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn mean(&self) -> Rational {
        self.probs
            .iter()
            .enumerate()
            .map(|(r, p)| rational::from_u64(r as u64) * p)
            .sum()
    }
}

fn check_sample(urn_size: u64, n: u64, k: u64) -> Result<()> {
    UrnState::new(urn_size, n, k).map(|_| ())
}

/// Uniform prior `1 / (N + 1)` over the compositions.
pub fn uniform_prior(urn_size: u64) -> Result<PosteriorDistribution> {
    if urn_size == 0 {
        return Err(Error::InvalidUrn("urn size must be positive".into()));
    }
    PosteriorDistribution::new(vec![
        rational::ratio(1, urn_size + 1);
        urn_size as usize + 1
    ])
}

/// `Pr[k black among n | H_i]`, hypergeometric.
fn sample_likelihood(urn_size: u64, n: u64, k: u64, i: u64) -> Rational {
    let num = binom(i, k as i64) * binom(urn_size - i, (n - k) as i64);
    from_biguint_ratio(num, binom(urn_size, n as i64))
}

/// `Pr[k' black among n' more | H_i, first sample (n, k)]`.
fn second_sample_likelihood(urn_size: u64, n: u64, k: u64, n2: u64, k2: u64, i: u64) -> Rational {
    let (i, urn, n, k, n2, k2) = (
        i as i64,
        urn_size as i64,
        n as i64,
        k as i64,
        n2 as i64,
        k2 as i64,
    );
    let num = choose(i - k, k2) * choose(urn - i - (n - k), n2 - k2);
    from_biguint_ratio(num, choose(urn - n, n2))
}

/// Closed-form posterior weight `C(i,k) C(N-i, n-k) / C(N+1, n+1)`.
fn closed_posterior(urn_size: u64, n: u64, k: u64) -> Vec<Rational> {
    let den = binom(urn_size + 1, n as i64 + 1);
    (0..=urn_size)
        .map(|i| {
            let num = binom(i, k as i64) * binom(urn_size - i, (n - k) as i64);
            from_biguint_ratio(num, den.clone())
        })
        .collect()
}

/// `Σ_i Pr[A | H_i] Pr[H_i]`, the marginal probability of the first sample.
pub fn marginal_sample_prob(urn_size: u64, n: u64, k: u64) -> Result<Rational> {
    check_sample(urn_size, n, k)?;
    let prior = rational::ratio(1, urn_size + 1);
    Ok((0..=urn_size)
        .map(|i| sample_likelihood(urn_size, n, k, i) * &prior)
        .sum())
}

/// Posterior over compositions after observing `k` black in `n` draws.
pub fn posterior(urn_size: u64, n: u64, k: u64) -> Result<PosteriorDistribution> {
    check_sample(urn_size, n, k)?;
    let prior = uniform_prior(urn_size)?;
    let joint: Vec<Rational> = prior
        .probs
        .iter()
        .enumerate()
        .map(|(i, p)| sample_likelihood(urn_size, n, k, i as u64) * p)
        .collect();
    let evidence: Rational = joint.iter().sum();
    let bayes: Vec<Rational> = joint.into_iter().map(|j| j / &evidence).collect();
    if bayes != closed_posterior(urn_size, n, k) {
        return Err(Error::OracleDisagreement("Bayes posterior vs closed form"));
    }
    PosteriorDistribution::new(bayes)
}

/// Probability that the next draw is black, by total probability over `H_i`.
pub fn next_black_prob(urn_size: u64, n: u64, k: u64) -> Result<Rational> {
    check_sample(urn_size, n, k)?;
    if n == urn_size {
        return Err(Error::UrnExhausted(urn_size));
    }
    let post = posterior(urn_size, n, k)?;
    Ok(predictive_black(&post, n, k))
}

fn predictive_black(post: &PosteriorDistribution, n: u64, k: u64) -> Rational {
    let remaining = post.urn_size() - n;
    post.probs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i as u64 >= k)
        .map(|(i, p)| rational::ratio(i as u64 - k, remaining) * p)
        .sum()
}

fn check_two_samples(urn_size: u64, n: u64, k: u64, n2: u64, k2: u64) -> Result<()> {
    check_sample(urn_size, n, k)?;
    if k2 > n2 || n + n2 > urn_size {
        return Err(Error::InvalidUrn(format!(
            "need k' <= n' and n + n' <= N, got N={urn_size} n={n} n'={n2} k'={k2}"
        )));
    }
    Ok(())
}

/// Posterior after a first sample `(n, k)` and a second `(n', k')`.
///
/// Three routes must agree: sequential Bayes through the first posterior,
/// the closed form, and the posterior of the pooled sample.
pub fn posterior_two_samples(
    urn_size: u64,
    n: u64,
    k: u64,
    n2: u64,
    k2: u64,
) -> Result<PosteriorDistribution> {
    check_two_samples(urn_size, n, k, n2, k2)?;
    let first = posterior(urn_size, n, k)?;
    let joint: Vec<Rational> = first
        .probs
        .iter()
        .enumerate()
        .map(|(i, p)| second_sample_likelihood(urn_size, n, k, n2, k2, i as u64) * p)
        .collect();
    let evidence: Rational = joint.iter().sum();
    let sequential: Vec<Rational> = joint.into_iter().map(|j| j / &evidence).collect();

    if sequential != closed_posterior(urn_size, n + n2, k + k2) {
        return Err(Error::OracleDisagreement(
            "sequential Bayes vs two-sample closed form",
        ));
    }
    let pooled = posterior(urn_size, n + n2, k + k2)?;
    if pooled.probs != sequential {
        return Err(Error::OracleDisagreement(
            "sequential Bayes vs pooled posterior",
        ));
    }
    PosteriorDistribution::new(sequential)
}

/// Probability the next draw is black after both samples.
pub fn next_black_prob_two_samples(
    urn_size: u64,
    n: u64,
    k: u64,
    n2: u64,
    k2: u64,
) -> Result<Rational> {
    check_two_samples(urn_size, n, k, n2, k2)?;
    if n + n2 == urn_size {
        return Err(Error::UrnExhausted(urn_size));
    }
    let post = posterior_two_samples(urn_size, n, k, n2, k2)?;
    Ok(predictive_black(&post, n + n2, k + k2))
}

/// `Σ_j Pr[A' | H_j] Pr[H_j | A]`: probability of the second sample given the first.
///
/// Must equal `C(k+k', k) C(n-k+n'-k', n-k) / C(n+n'+1, n+1)`, which does
/// not depend on `N`.
pub fn second_sample_prob(urn_size: u64, n: u64, k: u64, n2: u64, k2: u64) -> Result<Rational> {
    check_two_samples(urn_size, n, k, n2, k2)?;
    let first = posterior(urn_size, n, k)?;
    let direct = second_sample_sum(&first, n, k, n2, k2);
    if direct != second_sample_closed(n, k, n2, k2) {
        return Err(Error::OracleDisagreement(
            "second-sample summation vs closed form",
        ));
    }
    Ok(direct)
}

fn second_sample_sum(first: &PosteriorDistribution, n: u64, k: u64, n2: u64, k2: u64) -> Rational {
    let urn_size = first.urn_size();
    first
        .probs
        .iter()
        .enumerate()
        .map(|(j, p)| second_sample_likelihood(urn_size, n, k, n2, k2, j as u64) * p)
        .sum()
}

fn second_sample_closed(n: u64, k: u64, n2: u64, k2: u64) -> Rational {
    let num = binom(k + k2, k as i64) * binom(n - k + n2 - k2, (n - k) as i64);
    from_biguint_ratio(num, binom(n + n2 + 1, n as i64 + 1))
}

/// Distribution of future successes `R` among the next `m` transactions.
///
/// The definitional route sums over an urn of the smallest admissible size
/// `max(n + m, 1)`; the closed form is `C(k+r,k) C(n-k+m-r, n-k) / C(n+m+1, n+1)`.
pub fn future_success_dist(n: u64, k: u64, m: u64) -> Result<FutureSuccessDistribution> {
    if k > n {
        return Err(Error::InvalidScore { n, k });
    }
    let urn_size = (n + m).max(1);
    let first = posterior(urn_size, n, k)?;
    let mut probs = Vec::with_capacity(m as usize + 1);
    for r in 0..=m {
        let direct = second_sample_sum(&first, n, k, m, r);
        let closed = second_sample_closed(n, k, m, r);
        if direct != closed {
            return Err(Error::OracleDisagreement(
                "future-success summation vs closed form",
            ));
        }
        probs.push(direct);
    }
    let total: Rational = probs.iter().sum();
    if !total.is_one() {
        return Err(Error::OracleDisagreement(
            "future-success distribution does not sum to one",
        ));
    }
    Ok(FutureSuccessDistribution { probs })
}

/// `E[R | A] = Σ r Pr[R = r | A]`, by summation.
pub fn expected_future_successes(n: u64, k: u64, m: u64) -> Result<Rational> {
    Ok(future_success_dist(n, k, m)?.mean())
}

/// `C(r, s) C(r-s, t) == C(s+t, s) C(r, s+t)`.
pub fn check_product_identity(r: u64, s: u64, t: u64) -> bool {
    let lhs = binom(r, s as i64) * choose(r as i64 - s as i64, t as i64);
    let rhs = binom(s + t, s as i64) * binom(r, (s + t) as i64);
    lhs == rhs
}

/// Outcome of checking an identity that carries a side condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityCheck {
    Holds,
    Violated,
    OutsideDomain,
}

/// `Σ_{j=0..s} C(r+j, n) C(s-j, m) == C(r+s+1, n+m+1)`, stated for `r <= n`.
pub fn check_summation_identity(r: u64, s: u64, n: u64, m: u64) -> IdentityCheck {
    if r > n {
        return IdentityCheck::OutsideDomain;
    }
    let lhs: BigUint = (0..=s)
        .map(|j| binom(r + j, n as i64) * binom(s - j, m as i64))
        .sum();
    if lhs == binom(r + s + 1, (n + m + 1) as i64) {
        IdentityCheck::Holds
    } else {
        IdentityCheck::Violated
    }
}

/// Draws `m` balls without replacement from `total` balls of which `black`
/// are black; returns how many black came out.
pub fn draw_without_replacement<R: Rng + ?Sized>(
    rng: &mut R,
    mut black: u64,
    mut total: u64,
    m: u64,
) -> u64 {
    debug_assert!(black <= total && m <= total);
    let mut hits = 0;
    for _ in 0..m {
        if rng.random_range(0..total) < black {
            hits += 1;
            black -= 1;
        }
        total -= 1;
    }
    hits
}

/// Inverse-CDF sampler over the exact posterior of one urn state.
///
/// The posterior is turned into 64-bit thresholds once; a uniform `u64`
/// `x` selects composition `i` iff `x / 2^64` falls in `[cdf_{i-1}, cdf_i)`,
/// decided exactly by comparing against `ceil(cdf_i * 2^64)`.
#[derive(Debug, Clone)]
pub struct CareerSampler {
    state: UrnState,
    thresholds: Vec<u128>,
}

impl CareerSampler {
    pub fn new(state: UrnState) -> Self {
        let UrnState {
            urn_size,
            drawn: n,
            black_drawn: k,
        } = state;
        let fails = n - k;
        // C(t, fails) for t = 0..=N
        let mut white = Vec::with_capacity(urn_size as usize + 1);
        let mut c = BigUint::zero();
        for t in 0..=urn_size {
            if t == fails {
                c = BigUint::one();
            } else if t > fails {
                c = c * big(t) / big(t - fails);
            }
            white.push(c.clone());
        }
        let mut cumulative = Vec::with_capacity(urn_size as usize + 1);
        let mut running = BigUint::zero();
        let mut black = BigUint::zero();
        for i in 0..=urn_size {
            if i == k {
                black = BigUint::one();
            } else if i > k {
                black = black * big(i) / big(i - k);
            }
            running += &black * &white[(urn_size - i) as usize];
            cumulative.push(running.clone());
        }
        let total = running;
        let scale = BigUint::one() << 64u32;
        let thresholds = cumulative
            .iter()
            .map(|c| {
                let scaled = c * &scale;
                let (q, r) = num_integer::Integer::div_rem(&scaled, &total);
                let t = if r.is_zero() { q } else { q + 1u32 };
                u128::try_from(t).expect("threshold fits in 65 bits")
            })
            .collect();
        Self { state, thresholds }
    }

    pub fn state(&self) -> UrnState {
        self.state
    }

    /// Samples an initial composition `i` from the posterior.
    pub fn sample_composition<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        let x = u128::from(rng.next_u64());
        self.thresholds.partition_point(|&t| t <= x) as u64
    }

    /// Samples a composition, then draws `m` more balls from what is left.
    pub fn sample<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Result<u64> {
        let UrnState {
            urn_size,
            drawn,
            black_drawn,
        } = self.state;
        if drawn + m > urn_size {
            return Err(Error::InvalidUrn(format!(
                "cannot draw {m} more from an urn of {urn_size} after {drawn}"
            )));
        }
        let i = self.sample_composition(rng);
        Ok(draw_without_replacement(
            rng,
            i - black_drawn,
            urn_size - drawn,
            m,
        ))
    }
}

/// One simulated continuation of a seller's career; deterministic in `seed`.
pub fn sample_career(urn_size: u64, n: u64, k: u64, m: u64, seed: u64) -> Result<u64> {
    let state = UrnState::new(urn_size, n, k)?;
    if n + m > urn_size {
        return Err(Error::InvalidUrn(format!(
            "need n + m <= N, got n={n} m={m} N={urn_size}"
        )));
    }
    let mut rng = rng::stream(seed, 0);
    CareerSampler::new(state).sample(m, &mut rng)
}
