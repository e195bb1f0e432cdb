//! AES-128 encryption of credentials at rest.
//!
//! Two subkeys are derived from the 128-bit store key with HKDF-SHA256:
//!
//! * usernames are sealed with AES-128-GCM-SIV under a fixed nonce. The
//!   synthetic IV depends only on the plaintext and the key, so the same
//!   username always produces the same ciphertext and records can be looked up
//!   by ciphertext. The price is that equal usernames are recognisable.
//! * key numbers are sealed with AES-128-GCM under a random 96-bit nonce,
//!   stored as `nonce || ciphertext || tag`. The username ciphertext is bound
//!   in as associated data so key blobs cannot be swapped between records.

use std::fmt;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes128Gcm, Nonce};
use aes_gcm_siv::Aes128GcmSiv;
use hkdf::Hkdf;
use rand::Rng;
use sha2::Sha256;
use thiserror::Error;

use super::username::Username;
use crate::key::KeyNumber;

pub const STORE_KEY_LEN: usize = 16;
const NONCE_LEN: usize = 12;

const USERNAME_INFO: &[u8] = b"gridauth/v1/username/aes-128-gcm-siv";
const KEY_INFO: &[u8] = b"gridauth/v1/key-number/aes-128-gcm";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("store key must be 32 hex characters (128 bits)")]
    BadStoreKey,
    #[error("ciphertext failed authentication")]
    Authentication,
    #[error("decrypted credential is malformed")]
    Malformed,
}

/// The 128-bit secret protecting the account store.
#[derive(Clone, PartialEq, Eq)]
pub struct StoreKey([u8; STORE_KEY_LEN]);

impl StoreKey {
    pub fn from_bytes(bytes: [u8; STORE_KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_hex(hex_key: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(hex_key.trim()).map_err(|_| CryptoError::BadStoreKey)?;
        let bytes: [u8; STORE_KEY_LEN] = raw.try_into().map_err(|_| CryptoError::BadStoreKey)?;
        Ok(Self(bytes))
    }

    pub fn generate<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(rng.random())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for StoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("StoreKey(..)")
    }
}

#[derive(Clone)]
pub struct CredentialCipher {
    username: Aes128GcmSiv,
    key: Aes128Gcm,
}

impl fmt::Debug for CredentialCipher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CredentialCipher(..)")
    }
}

impl CredentialCipher {
    pub fn new(store_key: &StoreKey) -> Self {
        let hk = Hkdf::<Sha256>::new(None, &store_key.0);
        let mut username_key = [0u8; STORE_KEY_LEN];
        let mut key_key = [0u8; STORE_KEY_LEN];
        hk.expand(USERNAME_INFO, &mut username_key).expect("16 bytes is a valid HKDF length");
        hk.expand(KEY_INFO, &mut key_key).expect("16 bytes is a valid HKDF length");
        Self { username: Aes128GcmSiv::new(&username_key.into()), key: Aes128Gcm::new(&key_key.into()) }
    }

    /// Deterministic encryption; equal inputs give equal outputs.
    pub fn encrypt_username(&self, username: &Username) -> Vec<u8> {
        self.username
            .encrypt(&[0u8; NONCE_LEN].into(), username.as_str().as_bytes())
            .expect("AES-GCM-SIV encryption of a short message cannot fail")
    }

    pub fn decrypt_username(&self, ciphertext: &[u8]) -> Result<Username, CryptoError> {
        let plain =
            self.username.decrypt(&[0u8; NONCE_LEN].into(), ciphertext).map_err(|_| CryptoError::Authentication)?;
        let text = String::from_utf8(plain).map_err(|_| CryptoError::Malformed)?;
        Username::parse(&text).map_err(|_| CryptoError::Malformed)
    }

    /// Randomised authenticated encryption of arbitrary bytes.
    pub fn encrypt_credential<R: Rng + ?Sized>(&self, plaintext: &[u8], aad: &[u8], rng: &mut R) -> Vec<u8> {
        let nonce: [u8; NONCE_LEN] = rng.random();
        let sealed = self
            .key
            .encrypt(Nonce::from_slice(&nonce), Payload { msg: plaintext, aad })
            .expect("AES-GCM encryption of a short message cannot fail");
        let mut out = Vec::with_capacity(NONCE_LEN + sealed.len());
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&sealed);
        out
    }

    pub fn decrypt_credential(&self, ciphertext: &[u8], aad: &[u8]) -> Result<Vec<u8>, CryptoError> {
        if ciphertext.len() < NONCE_LEN {
            return Err(CryptoError::Authentication);
        }
        let (nonce, sealed) = ciphertext.split_at(NONCE_LEN);
        self.key
            .decrypt(Nonce::from_slice(nonce), Payload { msg: sealed, aad })
            .map_err(|_| CryptoError::Authentication)
    }

    pub fn encrypt_key<R: Rng + ?Sized>(&self, key: KeyNumber, aad: &[u8], rng: &mut R) -> Vec<u8> {
        self.encrypt_credential(key.to_string().as_bytes(), aad, rng)
    }

    pub fn decrypt_key(&self, ciphertext: &[u8], aad: &[u8]) -> Result<KeyNumber, CryptoError> {
        let plain = self.decrypt_credential(ciphertext, aad)?;
        std::str::from_utf8(&plain).ok().and_then(|s| s.parse().ok()).ok_or(CryptoError::Malformed)
    }
}
