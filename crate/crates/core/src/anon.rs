//! Keyed hashing for worker anonymization and completion codes.

use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;

type HmacSha256 = Hmac<Sha256>;

/// Secret key held by the service; never written into records.
#[derive(Clone)]
pub struct HashKey(Vec<u8>);

impl HashKey {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        HashKey(bytes.into())
    }

    /// HMAC-SHA256 over the parts, each length-prefixed so that
    /// `("ab", "c")` and `("a", "bc")` hash differently.
    pub fn digest(&self, parts: &[&str]) -> [u8; 32] {
        let mut mac = HmacSha256::new_from_slice(&self.0).expect("HMAC accepts any key length");
        for p in parts {
            mac.update(&(p.len() as u64).to_le_bytes());
            mac.update(p.as_bytes());
        }
        mac.finalize().into_bytes().into()
    }
}

impl std::fmt::Debug for HashKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("HashKey(..)")
    }
}

/// 16 hex characters of the keyed hash of a raw worker id.
pub fn anonymize_worker(key: &HashKey, raw_worker_id: &str) -> String {
    hex::encode(&key.digest(&["worker", raw_worker_id])[..8])
}
