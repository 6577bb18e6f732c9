//! Salted, iterated SHA-256 password digests.
//!
//! Encoded form: `sha256i$<rounds>$<salt hex>$<digest hex>`.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use thiserror::Error;

pub const DEFAULT_ROUNDS: u32 = 10_000;
const SCHEME: &str = "sha256i";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed password hash: {0}")]
pub struct MalformedHash(&'static str);

#[derive(Clone, PartialEq, Eq)]
pub struct PasswordHash {
    rounds: u32,
    salt: [u8; 16],
    digest: [u8; 32],
}

impl PasswordHash {
    pub fn new(password: &str) -> PasswordHash {
        let mut salt = [0u8; 16];
        rand::rng().fill_bytes(&mut salt);
        PasswordHash::with_salt(password, salt, DEFAULT_ROUNDS)
    }

    pub fn with_salt(password: &str, salt: [u8; 16], rounds: u32) -> PasswordHash {
        let digest = stretch(password.as_bytes(), &salt, rounds);
        PasswordHash { rounds, salt, digest }
    }

    /// Constant-time comparison against the stored digest.
    pub fn verify(&self, password: &str) -> bool {
        let candidate = stretch(password.as_bytes(), &self.salt, self.rounds);
        candidate.ct_eq(&self.digest).into()
    }
}

fn stretch(password: &[u8], salt: &[u8], rounds: u32) -> [u8; 32] {
    let mut acc: [u8; 32] = Sha256::new().chain_update(salt).chain_update(password).finalize().into();
    for _ in 1..rounds.max(1) {
        acc = Sha256::new().chain_update(acc).chain_update(salt).finalize().into();
    }
    acc
}

impl fmt::Display for PasswordHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{SCHEME}${}${}${}", self.rounds, hex::encode(self.salt), hex::encode(self.digest))
    }
}

impl fmt::Debug for PasswordHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PasswordHash(..)")
    }
}

impl FromStr for PasswordHash {
    type Err = MalformedHash;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.trim().split('$');
        if parts.next() != Some(SCHEME) {
            return Err(MalformedHash("unknown scheme"));
        }
        let rounds = parts
            .next()
            .and_then(|r| r.parse::<u32>().ok())
            .filter(|r| *r > 0)
            .ok_or(MalformedHash("bad round count"))?;
        let mut salt = [0u8; 16];
        hex::decode_to_slice(parts.next().unwrap_or_default(), &mut salt).map_err(|_| MalformedHash("bad salt"))?;
        let mut digest = [0u8; 32];
        hex::decode_to_slice(parts.next().unwrap_or_default(), &mut digest).map_err(|_| MalformedHash("bad digest"))?;
        if parts.next().is_some() {
            return Err(MalformedHash("trailing fields"));
        }
        Ok(PasswordHash { rounds, salt, digest })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_accepts_only_the_original_password() {
        let h = PasswordHash::new("correct horse");
        assert!(h.verify("correct horse"));
        assert!(!h.verify("correct horse "));
        assert!(!h.verify(""));
    }

    #[test]
    fn encoded_form_round_trips() {
        let h = PasswordHash::with_salt("pw", [7; 16], 3);
        let s = h.to_string();
        assert!(s.starts_with("sha256i$3$0707"));
        let back: PasswordHash = s.parse().unwrap();
        assert_eq!(back, h);
        assert!(back.verify("pw"));
    }

    #[test]
    fn salts_differ() {
        assert_ne!(PasswordHash::new("pw").to_string(), PasswordHash::new("pw").to_string());
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "md5$1$00$00", "sha256i$0$00$00", "sha256i$1$zz$00", "sha256i$1$00"] {
            assert!(bad.parse::<PasswordHash>().is_err(), "{bad}");
        }
    }
}
