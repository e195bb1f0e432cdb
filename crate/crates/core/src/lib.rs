//! Image-grid key entry with a date-shifted key transform.
//!
//! Users receive a random four digit key at registration. To log in they
//! click images on a 10x10 grid whose header row assigns digits to images;
//! the grid is reshuffled after every click. On any day the key may also be
//! entered shifted by the digital root of the day of month.

pub mod accounts;
pub mod clock;
pub mod grid;
pub mod key;
pub mod protocol;
pub mod selftest;
pub mod sim;

pub use accounts::{AccountStore, LockState, LockoutPolicy, StoreError, StoreKey, UserRecord, Username};
pub use clock::{Clock, MockClock, ServerCalendar, SystemClock};
pub use grid::{Cell, ClickResult, GridLayout, ImageId};
pub use key::{DayOfMonth, KeyNumber, Verdict};
pub use protocol::{LoginEndpoint, SessionStatus};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// CSPRNG used for keys, layouts and session ids.
pub type Entropy = ChaCha20Rng;

#[derive(Debug, thiserror::Error)]
#[error("operating system entropy unavailable: {0}")]
pub struct EntropyError(String);

/// Seeds an [`Entropy`] from the operating system.
pub fn os_entropy() -> Result<Entropy, EntropyError> {
    ChaCha20Rng::try_from_os_rng().map_err(|e| EntropyError(e.to_string()))
}
