//! SHA-256 digests, canonical Merkle batches and inclusion proofs.
//!
//! Leaves are sorted bytewise and deduplicated before the tree is built, so a
//! batch depends only on the set of digests. Each level hashes adjacent pairs
//! as `H(left || right)`; an unpaired last node moves up unchanged.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

/// Longest path a proof may carry (trees of up to 2^64 leaves).
pub const MAX_PROOF_DEPTH: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, StampFormatError> {
        let bytes = hex::decode(s).map_err(|_| StampFormatError(format!("`{s}` is not hex")))?;
        let arr: [u8; 32] =
            bytes.try_into().map_err(|_| StampFormatError(format!("`{s}` is not a 32-byte digest")))?;
        Ok(Digest(arr))
    }

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for Digest {
    type Err = StampFormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Digest::from_hex(s)
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed stamp data: {0}")]
pub struct StampFormatError(pub String);

/// Streams `reader` through SHA-256.
pub fn hash_file(mut reader: impl Read) -> std::io::Result<Digest> {
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        hasher.update(&buf[..n]);
    }
    Ok(Digest(hasher.finalize().into()))
}

pub fn hash_pair(left: &Digest, right: &Digest) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update(left.0);
    hasher.update(right.0);
    Digest(hasher.finalize().into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampBatch {
    pub batch_date: NaiveDate,
    pub leaves: Vec<Digest>,
    pub root: Digest,
    pub submitted_at: Option<NaiveDateTime>,
    pub backend_receipt: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub sibling: Digest,
    /// Side the sibling sits on.
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampProof {
    pub leaf: Digest,
    pub path: Vec<ProofStep>,
    pub root: Digest,
    pub batch_date: NaiveDate,
}

fn next_level(level: &[Digest]) -> Vec<Digest> {
    level
        .chunks(2)
        .map(|pair| match pair {
            [l, r] => hash_pair(l, r),
            [single] => *single,
            _ => unreachable!(),
        })
        .collect()
}

/// Sorted, deduplicated copy of `digests`.
pub fn canonical_leaves(digests: impl IntoIterator<Item = Digest>) -> Vec<Digest> {
    let mut leaves: Vec<Digest> = digests.into_iter().collect();
    leaves.sort_unstable();
    leaves.dedup();
    leaves
}

/// Root over already canonical leaves; `None` when empty.
pub fn merkle_root(leaves: &[Digest]) -> Option<Digest> {
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = next_level(&level);
    }
    level.first().copied()
}

/// Builds the canonical batch for `digests`, or `None` if there are none.
pub fn build_batch(digests: impl IntoIterator<Item = Digest>, date: NaiveDate) -> Option<StampBatch> {
    let leaves = canonical_leaves(digests);
    let root = merkle_root(&leaves)?;
    Some(StampBatch { batch_date: date, leaves, root, submitted_at: None, backend_receipt: None })
}

/// Inclusion proof for `leaf`, or `None` if the batch does not contain it.
pub fn prove(leaf: &Digest, batch: &StampBatch) -> Option<StampProof> {
    let mut index = batch.leaves.binary_search(leaf).ok()?;
    let mut level = batch.leaves.clone();
    let mut path = Vec::new();
    while level.len() > 1 {
        let sibling = index ^ 1;
        if sibling < level.len() {
            let side = if sibling < index { Side::Left } else { Side::Right };
            path.push(ProofStep { sibling: level[sibling], side });
        }
        level = next_level(&level);
        index /= 2;
    }
    Some(StampProof { leaf: *leaf, path, root: batch.root, batch_date: batch.batch_date })
}

/// Folds the leaf along the path and compares with the root.
///
/// A proof that cannot have come from any batch (path deeper than
/// [`MAX_PROOF_DEPTH`]) is malformed rather than merely false.
pub fn verify(proof: &StampProof) -> Result<bool, StampFormatError> {
    if proof.path.len() > MAX_PROOF_DEPTH {
        return Err(StampFormatError(format!("proof path has {} steps", proof.path.len())));
    }
    let folded = proof.path.iter().fold(proof.leaf, |acc, step| match step.side {
        Side::Left => hash_pair(&step.sibling, &acc),
        Side::Right => hash_pair(&acc, &step.sibling),
    });
    Ok(folded == proof.root)
}

/// Parses a proof from JSON and verifies it.
pub fn verify_json(json: &str) -> Result<bool, StampFormatError> {
    let proof: StampProof = serde_json::from_str(json).map_err(|e| StampFormatError(e.to_string()))?;
    verify(&proof)
}
