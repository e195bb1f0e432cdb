//! Registration, encrypted persistence and lockout bookkeeping.
//!
//! The store keeps every record in an in-memory index keyed by the
//! deterministic username ciphertext. Mutations go through a single writer
//! lock, are appended to the record file as a full replacement line, and only
//! then become visible in the index. Opening a store replays the file (the
//! last line for a username wins), checks every record decrypts under the
//! configured key, and rewrites the file compacted.

mod crypto;
mod record;
mod username;

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use rand::Rng;
use thiserror::Error;

pub use crypto::{CredentialCipher, CryptoError, StoreKey, STORE_KEY_LEN};
pub use record::{LockState, LockoutPolicy, UserRecord, RECORD_VERSION};
pub use username::{Username, UsernameError, MAX_USERNAME_LEN, MIN_USERNAME_LEN};

use crate::key::{self, DayOfMonth, KeyNumber};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Validation(#[from] UsernameError),
    #[error("username already registered")]
    Conflict,
    #[error("no such user")]
    NotFound,
    #[error("storage error: {0}")]
    Io(#[from] io::Error),
    #[error("record file line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Outcome of checking a submitted key for an existing user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoginVerdict {
    Accepted,
    /// Wrong key. `lock` reports the state after the failure was recorded.
    Rejected {
        lock: LockState,
    },
    /// The user was already locked; the key was not checked.
    Locked {
        until: DateTime<Utc>,
    },
}

#[derive(Debug)]
enum Backend {
    Memory,
    File { path: PathBuf, file: File },
}

impl Backend {
    fn append(&mut self, line: &str) -> io::Result<()> {
        let Backend::File { file, .. } = self else {
            return Ok(());
        };
        let len = file.metadata()?.len();
        let mut buf = Vec::with_capacity(line.len() + 1);
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
        if let Err(e) = file.write_all(&buf).and_then(|_| file.sync_data()) {
            // Drop any torn tail so the file never holds a partial record.
            let _ = file.set_len(len);
            return Err(e);
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct AccountStore {
    cipher: CredentialCipher,
    policy: LockoutPolicy,
    index: RwLock<HashMap<Vec<u8>, UserRecord>>,
    writer: Mutex<Backend>,
    decoy_user_ct: Vec<u8>,
    decoy_key_ct: Vec<u8>,
}

impl AccountStore {
    /// A store without a backing file.
    pub fn in_memory(key: &StoreKey, policy: LockoutPolicy) -> Self {
        Self::with_backend(key, policy, HashMap::new(), Backend::Memory)
    }

    /// Opens (or creates) the record file at `path`.
    pub fn open(path: impl AsRef<Path>, key: &StoreKey, policy: LockoutPolicy) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let cipher = CredentialCipher::new(key);
        let mut records: HashMap<Vec<u8>, UserRecord> = HashMap::new();

        match File::open(&path) {
            Ok(f) => {
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line?;
                    if line.is_empty() {
                        continue;
                    }
                    let corrupt = |reason: String| StoreError::Corrupt { line: i + 1, reason };
                    let rec = UserRecord::parse_line(&line).map_err(corrupt)?;
                    cipher
                        .decrypt_username(&rec.username_ct)
                        .and_then(|_| cipher.decrypt_key(&rec.key_ct, &rec.username_ct))
                        .map_err(|e| corrupt(e.to_string()))?;
                    records.insert(rec.username_ct.clone(), rec);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }

        compact(&path, &records)?;
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(Self::with_backend(key, policy, records, Backend::File { path, file }))
    }

    fn with_backend(
        key: &StoreKey,
        policy: LockoutPolicy,
        records: HashMap<Vec<u8>, UserRecord>,
        backend: Backend,
    ) -> Self {
        let cipher = CredentialCipher::new(key);
        let decoy_user_ct = cipher.encrypt_username(&Username::parse("decoy").expect("valid literal"));
        let decoy_key_ct = cipher.encrypt_key(KeyNumber::from_value(0).unwrap(), &decoy_user_ct, &mut rand::rng());
        Self { cipher, policy, index: RwLock::new(records), writer: Mutex::new(backend), decoy_user_ct, decoy_key_ct }
    }

    pub fn policy(&self) -> LockoutPolicy {
        self.policy
    }

    pub fn path(&self) -> Option<PathBuf> {
        match &*self.writer.lock() {
            Backend::File { path, .. } => Some(path.clone()),
            Backend::Memory => None,
        }
    }

    pub fn len(&self) -> usize {
        self.index.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Creates an account and returns its freshly generated key. This is the
    /// only place the plaintext key leaves the store.
    pub fn register<R: Rng + ?Sized>(
        &self,
        username: &Username,
        now: DateTime<Utc>,
        rng: &mut R,
    ) -> Result<KeyNumber, StoreError> {
        let username_ct = self.cipher.encrypt_username(username);
        let mut backend = self.writer.lock();
        if self.index.read().contains_key(&username_ct) {
            return Err(StoreError::Conflict);
        }
        let key = key::generate_key(rng);
        let record = UserRecord {
            key_ct: self.cipher.encrypt_key(key, &username_ct, rng),
            username_ct,
            created_at: now,
            failed_attempts: 0,
            locked_until: None,
        };
        self.commit(&mut backend, record)?;
        Ok(key)
    }

    pub fn lookup(&self, username: &Username) -> Option<UserRecord> {
        let ct = self.cipher.encrypt_username(username);
        self.index.read().get(&ct).cloned()
    }

    /// Decrypts both credential fields of a record.
    pub fn decrypt_record(&self, record: &UserRecord) -> Result<(Username, KeyNumber), StoreError> {
        let user = self.cipher.decrypt_username(&record.username_ct)?;
        let key = self.cipher.decrypt_key(&record.key_ct, &record.username_ct)?;
        Ok((user, key))
    }

    pub fn check_lockout(&self, username: &Username, now: DateTime<Utc>) -> Result<LockState, StoreError> {
        self.lookup(username).map(|r| r.lock_state(now)).ok_or(StoreError::NotFound)
    }

    pub fn record_failure(&self, username: &Username, now: DateTime<Utc>) -> Result<UserRecord, StoreError> {
        let ct = self.cipher.encrypt_username(username);
        let mut backend = self.writer.lock();
        let current = self.index.read().get(&ct).cloned().ok_or(StoreError::NotFound)?;
        let next = current.with_failure(now, &self.policy);
        self.commit(&mut backend, next.clone())?;
        Ok(next)
    }

    pub fn record_success(&self, username: &Username) -> Result<UserRecord, StoreError> {
        let ct = self.cipher.encrypt_username(username);
        let mut backend = self.writer.lock();
        let current = self.index.read().get(&ct).cloned().ok_or(StoreError::NotFound)?;
        let next = current.with_success();
        if next != current {
            self.commit(&mut backend, next.clone())?;
        }
        Ok(next)
    }

    /// Checks a submitted key and applies lockout bookkeeping in one atomic
    /// step with respect to other mutations. `None` stands for an entry that
    /// contained a garbage click and can never match.
    pub fn attempt_login(
        &self,
        username: &Username,
        entered: Option<KeyNumber>,
        day: DayOfMonth,
        now: DateTime<Utc>,
    ) -> Result<LoginVerdict, StoreError> {
        let ct = self.cipher.encrypt_username(username);
        let mut backend = self.writer.lock();
        let current = self.index.read().get(&ct).cloned().ok_or(StoreError::NotFound)?;
        if let LockState::Locked { until } = current.lock_state(now) {
            return Ok(LoginVerdict::Locked { until });
        }
        let stored = self.cipher.decrypt_key(&current.key_ct, &current.username_ct)?;
        if entered.is_some_and(|k| key::verify_key(k, stored, day).is_accept()) {
            let next = current.with_success();
            if next != current {
                self.commit(&mut backend, next)?;
            }
            Ok(LoginVerdict::Accepted)
        } else {
            let next = current.with_failure(now, &self.policy);
            let lock = next.lock_state(now);
            self.commit(&mut backend, next)?;
            Ok(LoginVerdict::Rejected { lock })
        }
    }

    /// Spends the same decryption work as a real check and always rejects.
    /// Used for logins against unknown usernames.
    pub fn decoy_attempt(&self, entered: Option<KeyNumber>, day: DayOfMonth) -> bool {
        let _guard = self.writer.lock();
        if let (Ok(k), Some(entered)) = (self.cipher.decrypt_key(&self.decoy_key_ct, &self.decoy_user_ct), entered) {
            let _ = key::verify_key(entered, k, day);
        }
        false
    }

    /// Flushes and fsyncs the record file.
    pub fn flush(&self) -> Result<(), StoreError> {
        if let Backend::File { file, .. } = &mut *self.writer.lock() {
            file.flush()?;
            file.sync_all()?;
        }
        Ok(())
    }

    fn commit(&self, backend: &mut Backend, record: UserRecord) -> Result<(), StoreError> {
        backend.append(&record.to_line())?;
        self.index.write().insert(record.username_ct.clone(), record);
        Ok(())
    }
}

fn compact(path: &Path, records: &HashMap<Vec<u8>, UserRecord>) -> Result<(), StoreError> {
    let mut ordered: Vec<&UserRecord> = records.values().collect();
    ordered.sort_by(|a, b| (a.created_at, &a.username_ct).cmp(&(b.created_at, &b.username_ct)));

    let tmp = path.with_extension("compact.tmp");
    {
        let mut out = File::create(&tmp)?;
        for r in ordered {
            writeln!(out, "{}", r.to_line())?;
        }
        out.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
