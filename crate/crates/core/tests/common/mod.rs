#![allow(dead_code)]

use laplace_trust::ledger::{Chain, SegmentKey, Segmentation, TransactionRecord};
use laplace_trust::rational::{ratio, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SELLERS: [&str; 3] = ["alice", "bob", "carol"];

pub fn segments() -> Vec<SegmentKey> {
    vec![
        SegmentKey::PriceRange(1),
        SegmentKey::PriceRange(2),
        SegmentKey::PriceRange(3),
        SegmentKey::service("plumbing"),
        SegmentKey::service("heating"),
    ]
}

pub fn segmentation() -> Segmentation {
    Segmentation::new(vec![ratio(10, 1), ratio(100, 1)]).unwrap()
}

/// A value lying in `segment` under [`segmentation`].
pub fn value_for(segment: &SegmentKey, rng: &mut impl Rng) -> Rational {
    match segment {
        SegmentKey::PriceRange(1) => ratio(rng.random_range(0..1000), 100),
        SegmentKey::PriceRange(2) => ratio(rng.random_range(1000..10_000), 100),
        SegmentKey::PriceRange(_) => ratio(rng.random_range(10_000..1_000_000), 100),
        SegmentKey::ServiceCategory(_) => ratio(rng.random_range(1..500), 7),
    }
}

pub fn random_record(rng: &mut impl Rng, segment: &SegmentKey, tick: u64) -> TransactionRecord {
    TransactionRecord {
        seller_id: SELLERS[rng.random_range(0..SELLERS.len())].to_string(),
        buyer_id: format!("buyer-{}", rng.random_range(0..20)),
        segment: segment.clone(),
        value: value_for(segment, rng),
        tick,
        fulfilled: rng.random_bool(0.7),
    }
}

/// A chain of `blocks` blocks with a handful of mixed records each.
pub fn random_chain(seed: u64, blocks: usize) -> Chain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let segs = segments();
    let mut chain = Chain::new(Some(segmentation()));
    let mut tick = 0;
    for _ in 0..blocks {
        let count = rng.random_range(1..5);
        let records = (0..count)
            .map(|_| {
                tick += rng.random_range(0..3);
                let seg = &segs[rng.random_range(0..segs.len())];
                random_record(&mut rng, seg, tick)
            })
            .collect();
        chain.append(records).unwrap();
    }
    chain
}

/// True when the mutated bytes either fail to load or fail verification.
pub fn tamper_detected(bytes: &[u8]) -> bool {
    match Chain::from_bytes(bytes) {
        Err(_) => true,
        Ok(chain) => !chain.verify(),
    }
}
