//! Run configuration and the hash recorded in every artifact.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the canonical JSON form of `value`.
pub fn digest<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}
