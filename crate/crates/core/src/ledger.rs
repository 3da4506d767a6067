//! Hash-chained transaction log with per-segment reputation views.
//!
//! One chain holds every feedback event of a marketplace. Each record is a
//! smart-contract verdict (`fulfilled` or not) for one seller in exactly one
//! market segment, either a price range or a service category. Reputation is
//! never global: [`Chain::reputation_of`] folds only the records of the
//! requested seller and segment.
//!
//! # Hashing
//!
//! Block hashes are SHA-256 over a fixed byte layout:
//!
//! ```text
//! block   := index ';' prev_hash ';' record (0x1F record)*
//! record  := str(seller) ';' str(buyer) ';' segment ';' value ';' tick ';' ('1' | '0')
//! segment := 'P' index | 'S' str(name)
//! str(s)  := byte_len ':' bytes
//! ```
//!
//! Integers are decimal ASCII, `value` is the reduced rational `p` or `p/q`,
//! and `prev_hash` is lowercase hex. Block 0 links to 64 zeros.
//!
//! # File format
//!
//! JSON lines: a header object, then one object per block, each line
//! terminated by `\n`. Loading is strict: every line must be byte-identical
//! to its own re-serialization, so any edit that is not a semantic change is
//! rejected as well.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rational::{self, serde_rational, serde_rational_vec, Rational};
use crate::trust_engine::{self, EpochScore, ReputationScore, TrustMeasure, Window};

pub const HASH_ALGORITHM: &str = "sha256";
pub const CHAIN_FORMAT: &str = "laplace-trust-chain";
pub const CHAIN_VERSION: u32 = 1;
pub const ZERO_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

const FIELD_SEP: u8 = b';';
const RECORD_SEP: u8 = 0x1F;

/// Market segment a transaction belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum SegmentKey {
    /// 1-based index of a price range.
    PriceRange(u32),
    ServiceCategory(String),
}

impl SegmentKey {
    pub fn service(name: impl Into<String>) -> Self {
        Self::ServiceCategory(name.into())
    }

    fn write_canonical(&self, out: &mut Vec<u8>) {
        match self {
            Self::PriceRange(j) => {
                out.push(b'P');
                out.extend_from_slice(j.to_string().as_bytes());
            }
            Self::ServiceCategory(name) => {
                out.push(b'S');
                write_str(out, name);
            }
        }
    }
}

impl fmt::Display for SegmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PriceRange(j) => write!(f, "price:{j}"),
            Self::ServiceCategory(name) => write!(f, "service:{name}"),
        }
    }
}

impl std::str::FromStr for SegmentKey {
    type Err = Error;

    /// Parses `price:<index>` or `service:<name>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidRecord(format!(
                "segment {s:?} is not price:<index> or service:<name>"
            ))
        };
        match s.split_once(':') {
            Some(("price", idx)) => idx.parse().map(Self::PriceRange).map_err(|_| bad()),
            Some(("service", name)) if !name.is_empty() => {
                Ok(Self::ServiceCategory(name.to_string()))
            }
            _ => Err(bad()),
        }
    }
}

/// Price boundaries `b_1 < … < b_{s-1}` splitting `[0, ∞)` into `s` ranges.
///
/// A boundary value belongs to the range above it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    boundaries: Vec<Rational>,
}

impl Segmentation {
    pub fn new(boundaries: Vec<Rational>) -> Result<Self> {
        if boundaries.is_empty() {
            return Err(Error::InvalidSegmentation("no boundaries".into()));
        }
        if boundaries[0] <= Rational::from_integer(0.into()) {
            return Err(Error::InvalidSegmentation(
                "boundaries must be positive".into(),
            ));
        }
        if boundaries.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidSegmentation(
                "boundaries must be strictly increasing".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[Rational] {
        &self.boundaries
    }

    /// Number of ranges, `s`.
    pub fn ranges(&self) -> u32 {
        self.boundaries.len() as u32 + 1
    }

    pub fn classify(&self, value: &Rational) -> Result<SegmentKey> {
        if value < &Rational::from_integer(0.into()) {
            return Err(Error::NegativeValue(rational::to_canonical(value)));
        }
        let below = self.boundaries.partition_point(|b| b <= value);
        Ok(SegmentKey::PriceRange(below as u32 + 1))
    }
}

/// One smart-contract feedback event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransactionRecord {
    pub seller_id: String,
    pub buyer_id: String,
    pub segment: SegmentKey,
    #[serde(with = "serde_rational")]
    pub value: Rational,
    pub tick: u64,
    pub fulfilled: bool,
}

impl TransactionRecord {
    fn write_canonical(&self, out: &mut Vec<u8>) {
        write_str(out, &self.seller_id);
        out.push(FIELD_SEP);
        write_str(out, &self.buyer_id);
        out.push(FIELD_SEP);
        self.segment.write_canonical(out);
        out.push(FIELD_SEP);
        out.extend_from_slice(rational::to_canonical(&self.value).as_bytes());
        out.push(FIELD_SEP);
        out.extend_from_slice(self.tick.to_string().as_bytes());
        out.push(FIELD_SEP);
        out.push(if self.fulfilled { b'1' } else { b'0' });
    }
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(s.len().to_string().as_bytes());
    out.push(b':');
    out.extend_from_slice(s.as_bytes());
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub index: u64,
    pub prev_hash: String,
    pub records: Vec<TransactionRecord>,
    pub hash: String,
}

impl Block {
    /// Canonical bytes the block hash covers.
    pub fn canonical_bytes(index: u64, prev_hash: &str, records: &[TransactionRecord]) -> Vec<u8> {
        let mut out = Vec::with_capacity(96 + 64 * records.len());
        out.extend_from_slice(index.to_string().as_bytes());
        out.push(FIELD_SEP);
        out.extend_from_slice(prev_hash.as_bytes());
        out.push(FIELD_SEP);
        for (i, r) in records.iter().enumerate() {
            if i > 0 {
                out.push(RECORD_SEP);
            }
            r.write_canonical(&mut out);
        }
        out
    }

    pub fn compute_hash(index: u64, prev_hash: &str, records: &[TransactionRecord]) -> String {
        hex::encode(Sha256::digest(Self::canonical_bytes(
            index, prev_hash, records,
        )))
    }
}

/// First line of a chain file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainHeader {
    pub format: String,
    pub version: u32,
    pub hash_algorithm: String,
    #[serde(with = "serde_rational_vec")]
    pub price_boundaries: Vec<Rational>,
    /// Digest of the fields above.
    pub digest: String,
}

impl ChainHeader {
    fn new(segmentation: Option<&Segmentation>) -> Self {
        let mut header = Self {
            format: CHAIN_FORMAT.to_string(),
            version: CHAIN_VERSION,
            hash_algorithm: HASH_ALGORITHM.to_string(),
            price_boundaries: segmentation
                .map(|s| s.boundaries.clone())
                .unwrap_or_default(),
            digest: String::new(),
        };
        header.digest = header.compute_digest();
        header
    }

    fn compute_digest(&self) -> String {
        let mut out = Vec::new();
        write_str(&mut out, &self.format);
        out.push(FIELD_SEP);
        out.extend_from_slice(self.version.to_string().as_bytes());
        out.push(FIELD_SEP);
        write_str(&mut out, &self.hash_algorithm);
        for b in &self.price_boundaries {
            out.push(FIELD_SEP);
            out.extend_from_slice(rational::to_canonical(b).as_bytes());
        }
        hex::encode(Sha256::digest(out))
    }
}

/// Append-only marketplace log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    header: ChainHeader,
    segmentation: Option<Segmentation>,
    blocks: Vec<Block>,
}

impl Chain {
    /// Empty chain; price-range records are only accepted with a segmentation.
    pub fn new(segmentation: Option<Segmentation>) -> Self {
        Self {
            header: ChainHeader::new(segmentation.as_ref()),
            segmentation,
            blocks: Vec::new(),
        }
    }

    pub fn header(&self) -> &ChainHeader {
        &self.header
    }

    pub fn segmentation(&self) -> Option<&Segmentation> {
        self.segmentation.as_ref()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip_hash(&self) -> &str {
        self.blocks.last().map_or(ZERO_HASH, |b| b.hash.as_str())
    }

    pub fn records(&self) -> impl Iterator<Item = &TransactionRecord> {
        self.blocks.iter().flat_map(|b| b.records.iter())
    }

    pub fn validate_record(&self, record: &TransactionRecord) -> Result<()> {
        if record.seller_id.is_empty() {
            return Err(Error::InvalidRecord("empty seller id".into()));
        }
        if record.value < Rational::from_integer(0.into()) {
            return Err(Error::NegativeValue(rational::to_canonical(&record.value)));
        }
        match &record.segment {
            SegmentKey::ServiceCategory(name) if name.is_empty() => {
                Err(Error::InvalidRecord("empty service category".into()))
            }
            SegmentKey::ServiceCategory(_) => Ok(()),
            SegmentKey::PriceRange(j) => {
                let seg = self.segmentation.as_ref().ok_or_else(|| {
                    Error::InvalidRecord(
                        "price-range record on a chain without segmentation".into(),
                    )
                })?;
                let expected = seg.classify(&record.value)?;
                if expected != SegmentKey::PriceRange(*j) {
                    return Err(Error::InvalidRecord(format!(
                        "value {} belongs to {expected}, record says price:{j}",
                        rational::to_canonical(&record.value)
                    )));
                }
                Ok(())
            }
        }
    }

    /// Seals `records` into a new block. On error the chain is unchanged.
    pub fn append(&mut self, records: Vec<TransactionRecord>) -> Result<&Block> {
        if records.is_empty() {
            return Err(Error::InvalidRecord(
                "a block needs at least one record".into(),
            ));
        }
        for r in &records {
            self.validate_record(r)?;
        }
        let index = self.blocks.len() as u64;
        let prev_hash = self.tip_hash().to_string();
        let hash = Block::compute_hash(index, &prev_hash, &records);
        self.blocks.push(Block {
            index,
            prev_hash,
            records,
            hash,
        });
        Ok(self.blocks.last().expect("just pushed"))
    }

    /// True iff the header digest, every block hash and every link recompute.
    pub fn verify(&self) -> bool {
        if self.header.hash_algorithm != HASH_ALGORITHM
            || self.header.digest != self.header.compute_digest()
        {
            return false;
        }
        let mut prev = ZERO_HASH;
        for (i, block) in self.blocks.iter().enumerate() {
            if block.index != i as u64
                || block.prev_hash != prev
                || block.records.is_empty()
                || block.hash != Block::compute_hash(block.index, &block.prev_hash, &block.records)
                || block
                    .records
                    .iter()
                    .any(|r| self.validate_record(r).is_err())
            {
                return false;
            }
            prev = &block.hash;
        }
        true
    }

    /// `(n, k, window)` for one seller in one segment.
    pub fn reputation_of(
        &self,
        seller_id: &str,
        segment: &SegmentKey,
        window: Window,
    ) -> ReputationScore {
        let (n, k) = self
            .records()
            .filter(|r| {
                r.seller_id == seller_id && &r.segment == segment && window.contains(r.tick)
            })
            .fold((0u64, 0u64), |(n, k), r| {
                (n + 1, k + u64::from(r.fulfilled))
            });
        ReputationScore::new(n, k, window).expect("fold keeps k <= n")
    }

    pub fn trust_of(&self, seller_id: &str, segment: &SegmentKey, window: Window) -> TrustMeasure {
        trust_engine::trust(&self.reputation_of(seller_id, segment, window))
    }

    /// Per-epoch tallies for the epochs `[b_0, b_1), [b_1, b_2), …`.
    pub fn epoch_slices(
        &self,
        seller_id: &str,
        segment: &SegmentKey,
        boundaries: &[u64],
    ) -> Result<Vec<EpochScore>> {
        if boundaries.len() < 2 || boundaries.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::UnsortedBoundaries);
        }
        let mut counts = vec![(0u64, 0u64); boundaries.len() - 1];
        for r in self
            .records()
            .filter(|r| r.seller_id == seller_id && &r.segment == segment)
        {
            if r.tick < boundaries[0] || r.tick >= boundaries[boundaries.len() - 1] {
                continue;
            }
            let slot = boundaries.partition_point(|&b| b <= r.tick) - 1;
            counts[slot].0 += 1;
            counts[slot].1 += u64::from(r.fulfilled);
        }
        counts
            .into_iter()
            .zip(boundaries.windows(2))
            .map(|((n, k), w)| EpochScore::new(n, k, Window::new(w[0], w[1])?))
            .collect()
    }

    /// Distinct segments in which `seller_id` has records.
    pub fn segments_of(&self, seller_id: &str) -> Vec<SegmentKey> {
        let mut segs: Vec<SegmentKey> = self
            .records()
            .filter(|r| r.seller_id == seller_id)
            .map(|r| r.segment.clone())
            .collect();
        segs.sort();
        segs.dedup();
        segs
    }

    /// Rebuilds the chain from genesis by re-appending every block's records.
    pub fn replay(&self) -> Result<Chain> {
        let mut fresh = Chain::new(self.segmentation.clone());
        for b in &self.blocks {
            fresh.append(b.records.clone())?;
        }
        Ok(fresh)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        for b in &self.blocks {
            serde_json::to_writer(&mut out, b)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    /// Parses a chain file. Structural problems are errors; hash problems
    /// are left for [`Chain::verify`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Chain> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::MalformedChain(e.to_string()))?;
        let body = text
            .strip_suffix('\n')
            .ok_or_else(|| Error::MalformedChain("file must end with a newline".into()))?;
        let mut lines = body.split('\n');
        let header_line = lines.next().unwrap_or_default();
        let header: ChainHeader = strict_parse(header_line, 1)?;
        if header.format != CHAIN_FORMAT || header.version != CHAIN_VERSION {
            return Err(Error::MalformedChain(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        if header.hash_algorithm != HASH_ALGORITHM {
            return Err(Error::MalformedChain(format!(
                "unsupported hash algorithm {}",
                header.hash_algorithm
            )));
        }
        let segmentation = if header.price_boundaries.is_empty() {
            None
        } else {
            Some(Segmentation::new(header.price_boundaries.clone())?)
        };
        let mut blocks = Vec::new();
        for (i, line) in lines.enumerate() {
            let block: Block = strict_parse(line, i + 2)?;
            if !is_lower_hex_digest(&block.hash) || !is_lower_hex_digest(&block.prev_hash) {
                return Err(Error::MalformedChain(format!(
                    "line {}: hashes must be 64 lowercase hex digits",
                    i + 2
                )));
            }
            blocks.push(block);
        }
        Ok(Chain {
            header,
            segmentation,
            blocks,
        })
    }

    pub fn read_from<R: BufRead>(mut input: R) -> Result<Chain> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Chain> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

fn strict_parse<T: Serialize + for<'de> Deserialize<'de>>(line: &str, lineno: usize) -> Result<T> {
    let value: T = serde_json::from_str(line)
        .map_err(|e| Error::MalformedChain(format!("line {lineno}: {e}")))?;
    if serde_json::to_string(&value)? != line {
        return Err(Error::MalformedChain(format!(
            "line {lineno}: not in canonical form"
        )));
    }
    Ok(value)
}

fn is_lower_hex_digest(s: &str) -> bool {
    s.len() == 64
        && s.bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Reads a JSON-lines file of transaction records. Blank lines are skipped.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<TransactionRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut out: W, records: &[TransactionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
