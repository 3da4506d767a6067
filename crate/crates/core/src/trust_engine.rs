//! Closed-form trust arithmetic over reputation scores.
//!
//! A seller's reputation score is `(n, k, window)`: `n` transactions, `k` of
//! them fulfilled, tallied over a half-open tick window. Its trust measure is
//! the rule-of-succession estimate `(k + 1) / (n + 2)`. Everything here is
//! exact; nothing touches floating point.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, ratio, Rational};

/// Half-open tick interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: u64,
    pub end: u64,
}

impl Window {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, tick: u64) -> bool {
        self.start <= tick && tick < self.end
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

fn check_counts(n: u64, k: u64) -> Result<()> {
    if k > n {
        return Err(Error::InvalidScore { n, k });
    }
    Ok(())
}

/// `(n, k, window)`: total and fulfilled transactions over a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ReputationScore {
    n: u64,
    k: u64,
    window: Window,
}

impl ReputationScore {
    pub fn new(n: u64, k: u64, window: Window) -> Result<Self> {
        check_counts(n, k)?;
        Window::new(window.start, window.end)?;
        Ok(Self { n, k, window })
    }

    /// Score with no time information, stamped on the window `[0, 0)`.
    pub fn counts(n: u64, k: u64) -> Result<Self> {
        Self::new(n, k, Window { start: 0, end: 0 })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// The unreduced pair `(k + 1, n + 2)`.
    pub fn laplace_fraction(&self) -> (u64, u64) {
        (self.k + 1, self.n + 2)
    }
}

/// Subjective probability that the next transaction is fulfilled.
///
/// Always stored in lowest terms and strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrustMeasure(Rational);

impl TrustMeasure {
    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_inner(self) -> Rational {
        self.0
    }

    pub fn to_decimal(&self) -> String {
        rational::to_decimal6(&self.0)
    }

    /// Wraps an arbitrary rational produced by a discounting scheme.
    fn from_bounded(value: Rational) -> Self {
        debug_assert!(value.is_positive() && value < Rational::one());
        Self(value)
    }
}

impl fmt::Display for TrustMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&rational::to_canonical(&self.0))
    }
}

/// Tally for a single epoch of a partitioned history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct EpochScore {
    n: u64,
    k: u64,
    epoch: Window,
}

impl EpochScore {
    pub fn new(n: u64, k: u64, epoch: Window) -> Result<Self> {
        check_counts(n, k)?;
        Window::new(epoch.start, epoch.end)?;
        Ok(Self { n, k, epoch })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn epoch(&self) -> Window {
        self.epoch
    }

    pub fn as_score(&self) -> ReputationScore {
        ReputationScore {
            n: self.n,
            k: self.k,
            window: self.epoch,
        }
    }
}

/// Stamps `(n, k)` pairs onto consecutive windows of `width` ticks starting
/// at `start`.
pub fn contiguous_epochs(start: u64, width: u64, counts: &[(u64, u64)]) -> Result<Vec<EpochScore>> {
    counts
        .iter()
        .enumerate()
        .map(|(i, &(n, k))| {
            let s = start + width * i as u64;
            EpochScore::new(
                n,
                k,
                Window {
                    start: s,
                    end: s + width,
                },
            )
        })
        .collect()
}

fn check_contiguous(epochs: &[EpochScore]) -> Result<()> {
    if epochs.is_empty() {
        return Err(Error::EmptyEpochs);
    }
    for pair in epochs.windows(2) {
        if pair[0].epoch.end != pair[1].epoch.start {
            return Err(Error::NonContiguous {
                expected: pair[0].epoch.end,
                found: pair[1].epoch.start,
            });
        }
    }
    Ok(())
}

/// Discount parameters for the two weighting schemes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiscountWeights {
    /// Non-negative λ with a positive sum; applied to counts.
    Lambdas(Vec<Rational>),
    /// Non-negative weights summing to exactly one; applied to per-epoch trust.
    Normalized(Vec<Rational>),
}

impl DiscountWeights {
    pub fn apply(&self, epochs: &[EpochScore]) -> Result<TrustMeasure> {
        match self {
            Self::Lambdas(l) => discount_scheme1(epochs, l),
            Self::Normalized(w) => discount_scheme2(epochs, w),
        }
    }
}

/// Rescales non-negative parameters so they sum to one.
pub fn normalize(lambdas: &[Rational]) -> Result<Vec<Rational>> {
    if lambdas.iter().any(Signed::is_negative) {
        return Err(Error::NegativeWeight);
    }
    let total: Rational = lambdas.iter().sum();
    if total.is_zero() {
        return Err(Error::ZeroLambdaSum);
    }
    Ok(lambdas.iter().map(|l| l / &total).collect())
}

/// Trust measure `(k + 1) / (n + 2)`.
pub fn trust(score: &ReputationScore) -> TrustMeasure {
    TrustMeasure(ratio(score.k + 1, score.n + 2))
}

/// Checked form taking raw counts.
pub fn trust_of_counts(n: u64, k: u64) -> Result<TrustMeasure> {
    check_counts(n, k)?;
    Ok(TrustMeasure(ratio(k + 1, n + 2)))
}

/// Extends `score` with the tally `delta` of the epoch that follows it.
pub fn update(score: &ReputationScore, delta: &EpochScore) -> Result<ReputationScore> {
    if delta.epoch.start != score.window.end {
        return Err(Error::NonContiguous {
            expected: score.window.end,
            found: delta.epoch.start,
        });
    }
    Ok(ReputationScore {
        n: score.n + delta.n,
        k: score.k + delta.k,
        window: Window {
            start: score.window.start,
            end: delta.epoch.end,
        },
    })
}

/// Folds contiguous, ordered epochs into one score over their union.
pub fn aggregate(epochs: &[EpochScore]) -> Result<ReputationScore> {
    check_contiguous(epochs)?;
    let (n, k) = epochs.iter().fold((0, 0), |(n, k), e| (n + e.n, k + e.k));
    Ok(ReputationScore {
        n,
        k,
        window: Window {
            start: epochs[0].epoch.start,
            end: epochs[epochs.len() - 1].epoch.end,
        },
    })
}

/// Whether appending `delta` keeps trust at or above its current value.
///
/// Holds exactly when the epoch's success ratio `k'/n'` is at least the
/// current trust.
pub fn improves(score: &ReputationScore, delta: &EpochScore) -> Result<bool> {
    if delta.n == 0 {
        return Err(Error::EmptyDelta);
    }
    let lhs = u128::from(delta.k) * u128::from(score.n + 2);
    let rhs = u128::from(delta.n) * u128::from(score.k + 1);
    Ok(lhs >= rhs)
}

fn check_weights(epochs: &[EpochScore], weights: &[Rational]) -> Result<()> {
    check_contiguous(epochs)?;
    if weights.len() != epochs.len() {
        return Err(Error::LengthMismatch {
            epochs: epochs.len(),
            weights: weights.len(),
        });
    }
    if weights.iter().any(Signed::is_negative) {
        return Err(Error::NegativeWeight);
    }
    Ok(())
}

/// λ-weighted counts: `Σ λ_i (k_i + 1) / Σ λ_i (n_i + 2)`.
pub fn discount_scheme1(epochs: &[EpochScore], lambdas: &[Rational]) -> Result<TrustMeasure> {
    check_weights(epochs, lambdas)?;
    if lambdas.iter().all(Zero::is_zero) {
        return Err(Error::ZeroLambdaSum);
    }
    let mut num = Rational::zero();
    let mut den = Rational::zero();
    for (e, l) in epochs.iter().zip(lambdas) {
        num += l * Rational::from_integer(BigInt::from(e.k + 1));
        den += l * Rational::from_integer(BigInt::from(e.n + 2));
    }
    Ok(TrustMeasure::from_bounded(num / den))
}

/// Weighted mean of per-epoch trust: `Σ w_i (k_i + 1) / (n_i + 2)`.
///
/// The weights must already sum to one; see [`normalize`].
pub fn discount_scheme2(epochs: &[EpochScore], weights: &[Rational]) -> Result<TrustMeasure> {
    check_weights(epochs, weights)?;
    let total: Rational = weights.iter().sum();
    if !total.is_one() {
        return Err(Error::WeightsNotNormalized(rational::to_canonical(&total)));
    }
    let value = epochs
        .iter()
        .zip(weights)
        .map(|(e, w)| w * ratio(e.k + 1, e.n + 2))
        .sum();
    Ok(TrustMeasure::from_bounded(value))
}

/// Smallest and largest per-epoch trust.
pub fn epoch_trust_bounds(epochs: &[EpochScore]) -> Result<(TrustMeasure, TrustMeasure)> {
    let trusts: Vec<_> = epochs.iter().map(|e| trust(&e.as_score())).collect();
    let min = trusts.iter().min().cloned().ok_or(Error::EmptyEpochs)?;
    let max = trusts.iter().max().cloned().ok_or(Error::EmptyEpochs)?;
    Ok((min, max))
}

/// Expected fulfilled transactions among the next `m`: `m (k + 1) / (n + 2)`.
pub fn predict_expected_successes(score: &ReputationScore, m: u64) -> Rational {
    Rational::from_integer(BigInt::from(m)) * ratio(score.k + 1, score.n + 2)
}

/// Expected reputation once `m` more transactions have happened by tick `horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub m: u64,
    pub expected_k: Rational,
    pub horizon_tick: u64,
}

impl Prediction {
    /// Trust of the expected score `(n + m, k + expected_k)`.
    pub fn predicted_trust(&self, base: &ReputationScore) -> Rational {
        let num = &self.expected_k + rational::from_u64(base.k + 1);
        num / rational::from_u64(base.n + self.m + 2)
    }
}

pub fn predict_score(score: &ReputationScore, m: u64, horizon: u64) -> Result<Prediction> {
    if horizon < score.window.end {
        return Err(Error::HorizonInsideWindow {
            horizon,
            window_end: score.window.end,
        });
    }
    Ok(Prediction {
        m,
        expected_k: predict_expected_successes(score, m),
        horizon_tick: horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(start: u64, end: u64) -> Window {
        Window::new(start, end).unwrap()
    }

    fn s(n: u64, k: u64) -> ReputationScore {
        ReputationScore::new(n, k, w(0, 1)).unwrap()
    }

    fn e(n: u64, k: u64, start: u64, end: u64) -> EpochScore {
        EpochScore::new(n, k, w(start, end)).unwrap()
    }

    #[test]
    fn trust_values() {
        assert_eq!(trust(&s(0, 0)).value(), &ratio(1, 2));
        assert_eq!(trust(&s(100, 85)).value(), &ratio(86, 102));
        assert_eq!(trust(&s(1, 1)).value(), &ratio(2, 3));
        assert_eq!(trust(&s(93, 92)).value(), &ratio(93, 95));
        assert_eq!(trust(&s(100, 85)).to_string(), "43/51");
        assert!(matches!(
            trust_of_counts(3, 5),
            Err(Error::InvalidScore { n: 3, k: 5 })
        ));
        assert!(ReputationScore::new(3, 5, w(0, 1)).is_err());
        assert!(Window::new(5, 4).is_err());
    }

    #[test]
    fn update_examples() {
        let base = ReputationScore::new(2, 1, w(0, 10)).unwrap();
        let next = update(&base, &e(2, 2, 10, 20)).unwrap();
        assert_eq!((next.n(), next.k(), next.window()), (4, 3, w(0, 20)));
        assert_eq!(trust(&next).value(), &ratio(2, 3));

        let base = ReputationScore::new(5, 3, w(0, 10)).unwrap();
        let same = update(&base, &e(0, 0, 10, 10)).unwrap();
        assert_eq!(trust(&same), trust(&base));

        let empty = ReputationScore::new(0, 0, w(0, 0)).unwrap();
        assert_eq!(
            trust(&update(&empty, &e(100, 85, 0, 250)).unwrap()).value(),
            &ratio(86, 102)
        );

        assert!(matches!(
            update(&base, &e(1, 1, 11, 12)),
            Err(Error::NonContiguous {
                expected: 10,
                found: 11
            })
        ));
    }

    #[test]
    fn aggregate_examples() {
        let agg = aggregate(&[e(3, 3, 0, 5), e(1, 1, 5, 9)]).unwrap();
        assert_eq!((agg.n(), agg.k(), agg.window()), (4, 4, w(0, 9)));
        assert_eq!(trust(&agg).value(), &ratio(5, 6));

        let single = aggregate(&[e(7, 4, 3, 8)]).unwrap();
        assert_eq!(single, e(7, 4, 3, 8).as_score());

        assert!(matches!(aggregate(&[]), Err(Error::EmptyEpochs)));
        assert!(matches!(
            aggregate(&[e(1, 1, 0, 5), e(1, 1, 6, 9)]),
            Err(Error::NonContiguous { .. })
        ));
        assert!(matches!(
            aggregate(&[e(1, 1, 0, 5), e(1, 1, 4, 9)]),
            Err(Error::NonContiguous { .. })
        ));
    }

    #[test]
    fn improves_examples() {
        assert!(improves(&s(2, 1), &e(2, 2, 1, 2)).unwrap());
        assert!(improves(&s(2, 1), &e(2, 1, 1, 2)).unwrap());
        let after = update(&s(2, 1), &e(2, 1, 1, 2)).unwrap();
        assert_eq!(trust(&after).value(), &ratio(1, 2));
        let zero = ReputationScore::new(0, 0, w(0, 1)).unwrap();
        assert!(!improves(&zero, &e(4, 1, 1, 2)).unwrap());
        assert_eq!(
            trust(&update(&zero, &e(4, 1, 1, 2)).unwrap()).value(),
            &ratio(2, 6)
        );
        assert!(matches!(
            improves(&s(2, 1), &e(0, 0, 1, 2)),
            Err(Error::EmptyDelta)
        ));
    }

    #[test]
    fn scheme1_examples() {
        let epochs = contiguous_epochs(0, 10, &[(10, 5), (10, 9)]).unwrap();
        let one = rational::from_u64(1);
        let zero = Rational::zero();
        let d = discount_scheme1(&epochs, &[one.clone(), one.clone()]).unwrap();
        assert_eq!(d.value(), &ratio(2, 3));

        let d = discount_scheme1(&epochs, &[zero.clone(), one.clone()]).unwrap();
        assert_eq!(d, trust(&epochs[1].as_score()));

        let epochs3 = contiguous_epochs(0, 5, &[(4, 1), (6, 6), (9, 2)]).unwrap();
        let third = ratio(1, 3);
        let d = discount_scheme1(&epochs3, &vec![third; 3]).unwrap();
        assert_eq!(d.value(), &ratio(1 + 1 + 6 + 1 + 2 + 1, 4 + 6 + 9 + 6));

        assert!(matches!(
            discount_scheme1(&epochs, &[zero.clone(), zero]),
            Err(Error::ZeroLambdaSum)
        ));
        assert!(matches!(
            discount_scheme1(&epochs, &[one]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn scheme2_examples() {
        let epochs = contiguous_epochs(0, 10, &[(10, 5), (10, 9)]).unwrap();
        let half = ratio(1, 2);
        let d = discount_scheme2(&epochs, &[half.clone(), half]).unwrap();
        assert_eq!(d.value(), &ratio(2, 3));

        let d = discount_scheme2(&epochs, &[Rational::zero(), rational::from_u64(1)]).unwrap();
        assert_eq!(d, trust(&epochs[1].as_score()));

        let six = contiguous_epochs(
            0,
            250,
            &[
                (100, 55),
                (100, 65),
                (100, 70),
                (100, 75),
                (100, 80),
                (100, 90),
            ],
        )
        .unwrap();
        let w = vec![ratio(17, 100); 6];
        match discount_scheme2(&six, &w) {
            Err(Error::WeightsNotNormalized(sum)) => assert_eq!(sum, "51/50"),
            other => panic!("expected rejection, got {other:?}"),
        }
        let normalized = normalize(&w).unwrap();
        assert_eq!(normalized[0], ratio(1, 6));
        assert!(discount_scheme2(&six, &normalized).is_ok());
    }

    #[test]
    fn negative_weights_rejected() {
        let epochs = contiguous_epochs(0, 10, &[(10, 5), (10, 9)]).unwrap();
        let w = vec![Rational::from_integer((-1).into()), rational::from_u64(2)];
        assert!(matches!(
            discount_scheme1(&epochs, &w),
            Err(Error::NegativeWeight)
        ));
        assert!(matches!(
            discount_scheme2(&epochs, &w),
            Err(Error::NegativeWeight)
        ));
    }

    #[test]
    fn prediction_examples() {
        let base = ReputationScore::new(2, 1, w(0, 5)).unwrap();
        assert_eq!(predict_expected_successes(&base, 4), rational::from_u64(2));
        assert_eq!(predict_expected_successes(&base, 0), Rational::zero());
        let p = predict_score(&base, 4, 10).unwrap();
        assert_eq!(p.expected_k, rational::from_u64(2));
        assert_eq!(p.predicted_trust(&base), ratio(1, 2));

        let fresh = ReputationScore::new(0, 0, w(0, 5)).unwrap();
        assert_eq!(
            predict_score(&fresh, 10, 5).unwrap().expected_k,
            rational::from_u64(5)
        );

        let big = ReputationScore::new(100, 85, w(0, 250)).unwrap();
        assert_eq!(predict_expected_successes(&big, 100), ratio(4300, 51));
        let seller = ReputationScore::new(93, 92, w(0, 250)).unwrap();
        assert_eq!(predict_expected_successes(&seller, 7), ratio(651, 95));

        assert!(matches!(
            predict_score(&base, 4, 3),
            Err(Error::HorizonInsideWindow { .. })
        ));
    }

    #[test]
    fn trust_is_linear_in_k_and_hyperbolic_in_n() {
        for n in 0..60u64 {
            for k in 0..n {
                let step = trust(&s(n, k + 1)).into_inner() - trust(&s(n, k)).into_inner();
                assert_eq!(step, ratio(1, n + 2));
            }
            for k in 0..=n {
                let drop = trust(&s(n, k)).into_inner() - trust(&s(n + 1, k)).into_inner();
                let expected = rational::from_u64(k + 1) * (ratio(1, n + 2) - ratio(1, n + 3));
                assert_eq!(drop, expected);
                assert!(drop > Rational::zero());
            }
        }
    }

    proptest! {
        #[test]
        fn trust_is_reduced_and_strictly_inside_unit_interval(n in 0u64..10_000, frac in 0.0f64..=1.0) {
            let k = ((n as f64) * frac).floor() as u64;
            let t = trust(&s(n, k)).into_inner();
            prop_assert!(t > Rational::zero() && t < Rational::one());
            prop_assert!(t >= ratio(1, n + 2) && t <= ratio(n + 1, n + 2));
            prop_assert!(num_integer::Integer::gcd(t.numer(), t.denom()).is_one());
        }

        #[test]
        fn mediant_inequality(a in 0u64..1000, a2 in 0u64..1000, b in 1u64..1000, b2 in 1u64..1000) {
            let lhs = ratio(a + a2, b + b2) >= ratio(a, b);
            let rhs = ratio(a2, b2) >= ratio(a, b);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn weighted_ratio_bounded_by_extremes(
            parts in proptest::collection::vec((0u64..200, 1u64..200, 0u64..20), 1..8),
        ) {
            prop_assume!(parts.iter().any(|p| p.2 > 0));
            let num: u64 = parts.iter().map(|&(a, _, l)| a * l).sum();
            let den: u64 = parts.iter().map(|&(_, b, l)| b * l).sum();
            let value = ratio(num, den);
            let max = parts.iter().map(|&(a, b, _)| ratio(a, b)).max().unwrap();
            let min = parts.iter().map(|&(a, b, _)| ratio(a, b)).min().unwrap();
            prop_assert!(min <= value && value <= max);
        }
    }
}
