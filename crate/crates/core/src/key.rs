//! Key numbers and the date-shifted key transform.
//!
//! A key number is a four digit decimal secret handed out at registration.
//! On any given day a user may enter either the key itself or a shifted form
//! of it: every digit is advanced by the digital root of the day of month,
//! modulo 10, with no carry between positions. The server undoes the shift
//! with a borrow-free digit-wise subtraction.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of digits in a key number.
pub const KEY_DIGITS: usize = 4;

/// Size of the key space (`0000` to `9999`).
pub const KEY_SPACE: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("key number must be exactly 4 decimal digits, got {0:?}")]
    Malformed(String),
    #[error("key value {0} is outside 0..=9999")]
    OutOfRange(u32),
    #[error("digit {0} is outside 0..=9")]
    BadDigit(u8),
    #[error("day of month {0} is outside 1..=31")]
    BadDay(u32),
}

/// A four digit decimal key, most significant digit first.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyNumber([u8; KEY_DIGITS]);

impl KeyNumber {
    pub fn from_digits(digits: [u8; KEY_DIGITS]) -> Result<Self, KeyError> {
        if let Some(&bad) = digits.iter().find(|&&d| d > 9) {
            return Err(KeyError::BadDigit(bad));
        }
        Ok(Self(digits))
    }

    pub fn from_value(value: u32) -> Result<Self, KeyError> {
        if value >= KEY_SPACE {
            return Err(KeyError::OutOfRange(value));
        }
        let digits = [(value / 1000) as u8, (value / 100 % 10) as u8, (value / 10 % 10) as u8, (value % 10) as u8];
        Ok(Self(digits))
    }

    pub fn digits(&self) -> [u8; KEY_DIGITS] {
        self.0
    }

    pub fn value(&self) -> u32 {
        self.0.iter().fold(0, |acc, &d| acc * 10 + u32::from(d))
    }
}

impl fmt::Display for KeyNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

// Keep secrets out of debug logs by accident.
impl fmt::Debug for KeyNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyNumber({self})")
    }
}

impl FromStr for KeyNumber {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        if bytes.len() != KEY_DIGITS || !bytes.iter().all(u8::is_ascii_digit) {
            return Err(KeyError::Malformed(s.to_owned()));
        }
        let mut digits = [0u8; KEY_DIGITS];
        for (slot, b) in digits.iter_mut().zip(bytes) {
            *slot = b - b'0';
        }
        Ok(Self(digits))
    }
}

impl Serialize for KeyNumber {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KeyNumber {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Calendar day of month, 1 to 31.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DayOfMonth(u8);

impl DayOfMonth {
    pub fn new(day: u32) -> Result<Self, KeyError> {
        if (1..=31).contains(&day) {
            Ok(Self(day as u8))
        } else {
            Err(KeyError::BadDay(day))
        }
    }

    pub fn get(self) -> u32 {
        u32::from(self.0)
    }

    /// All valid days, 1 through 31.
    pub fn all() -> impl Iterator<Item = DayOfMonth> {
        (1..=31).map(|d| DayOfMonth(d as u8))
    }
}

/// A key whose four digits are all the same.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepeatedDigitKey {
    digit: u8,
}

impl RepeatedDigitKey {
    pub fn digit(&self) -> u8 {
        self.digit
    }

    pub fn expansion(&self) -> KeyNumber {
        KeyNumber([self.digit; KEY_DIGITS])
    }
}

/// Draws a uniformly distributed key number.
///
/// No uniqueness across users is enforced: with ten thousand possible keys a
/// uniqueness constraint would cap the user base and tell every new user which
/// keys are already taken.
pub fn generate_key<R: Rng + ?Sized>(rng: &mut R) -> KeyNumber {
    let mut digits = [0u8; KEY_DIGITS];
    for d in &mut digits {
        *d = rng.random_range(0..10);
    }
    KeyNumber(digits)
}

/// Iterated decimal digit sum of the day, until one digit remains.
pub fn digital_root(day: DayOfMonth) -> u8 {
    let mut n = day.get();
    while n >= 10 {
        let mut sum = 0;
        while n > 0 {
            sum += n % 10;
            n /= 10;
        }
        n = sum;
    }
    n as u8
}

pub fn repeat_digit(digit: u8) -> Result<RepeatedDigitKey, KeyError> {
    if digit > 9 {
        return Err(KeyError::BadDigit(digit));
    }
    Ok(RepeatedDigitKey { digit })
}

fn day_shift(day: DayOfMonth) -> KeyNumber {
    KeyNumber([digital_root(day); KEY_DIGITS])
}

/// Shifts every digit of `original` by the day's digital root, keeping only
/// the last digit of each sum.
pub fn encode_ssr(original: KeyNumber, day: DayOfMonth) -> KeyNumber {
    let shift = day_shift(day).0;
    let mut out = original.0;
    for (d, s) in out.iter_mut().zip(shift) {
        *d = (*d + s) % 10;
    }
    KeyNumber(out)
}

/// Inverse of [`encode_ssr`] for the same day. A digit smaller than the shift
/// borrows 10 locally; borrows never propagate to the neighbouring position.
pub fn decode_ssr(entered: KeyNumber, day: DayOfMonth) -> KeyNumber {
    let shift = day_shift(day).0;
    let mut out = entered.0;
    for (d, s) in out.iter_mut().zip(shift) {
        let minuend = if *d < s { *d + 10 } else { *d };
        *d = minuend - s;
    }
    KeyNumber(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        self == Verdict::Accept
    }
}

/// Accepts either the stored key itself or its shifted form for `day`.
pub fn verify_key(entered: KeyNumber, stored: KeyNumber, day: DayOfMonth) -> Verdict {
    if entered == stored || decode_ssr(entered, day) == stored {
        Verdict::Accept
    } else {
        Verdict::Reject
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn key(s: &str) -> KeyNumber {
        s.parse().unwrap()
    }

    fn day(d: u32) -> DayOfMonth {
        DayOfMonth::new(d).unwrap()
    }

    // Independent oracle: repeated string digit sums.
    fn digit_sum_oracle(day: u32) -> u32 {
        let mut s = day.to_string();
        while s.len() > 1 {
            s = s.chars().map(|c| c.to_digit(10).unwrap()).sum::<u32>().to_string();
        }
        s.parse().unwrap()
    }

    #[test]
    fn digital_root_examples() {
        assert_eq!(digital_root(day(5)), 5);
        assert_eq!(digital_root(day(27)), 9);
        assert_eq!(digital_root(day(29)), 2);
        assert_eq!(digital_root(day(16)), 7);
    }

    #[test]
    fn digital_root_matches_oracle_and_closed_form() {
        for d in DayOfMonth::all() {
            let root = u32::from(digital_root(d));
            assert_eq!(root, digit_sum_oracle(d.get()), "day {}", d.get());
            assert_eq!(root, 1 + (d.get() - 1) % 9, "day {}", d.get());
            assert!((1..=9).contains(&root));
        }
    }

    #[test]
    fn repeat_digit_examples() {
        assert_eq!(repeat_digit(7).unwrap().expansion(), key("7777"));
        assert_eq!(repeat_digit(0).unwrap().expansion(), key("0000"));
        assert_eq!(repeat_digit(1).unwrap().expansion(), key("1111"));
        assert_eq!(repeat_digit(10), Err(KeyError::BadDigit(10)));
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_ssr(key("1241"), day(16)), key("8918"));
        assert_eq!(encode_ssr(key("0000"), day(7)), key("7777"));
        assert_eq!(encode_ssr(key("9999"), day(1)), key("0000"));
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_ssr(key("8918"), day(16)), key("1241"));
        assert_eq!(decode_ssr(key("8918"), day(25)), key("1241"));
        assert_eq!(decode_ssr(key("7777"), day(7)), key("0000"));
    }

    #[test]
    fn verify_examples() {
        for d in DayOfMonth::all() {
            assert_eq!(verify_key(key("1241"), key("1241"), d), Verdict::Accept);
        }
        assert_eq!(verify_key(key("8918"), key("1241"), day(16)), Verdict::Accept);
        assert_eq!(decode_ssr(key("8918"), day(4)), key("4574"));
        assert_eq!(verify_key(key("8918"), key("1241"), day(4)), Verdict::Reject);
    }

    #[test]
    fn exhaustive_round_trip_and_non_identity() {
        for v in 0..KEY_SPACE {
            let k = KeyNumber::from_value(v).unwrap();
            for d in DayOfMonth::all() {
                let enc = encode_ssr(k, d);
                assert_ne!(enc, k);
                assert_eq!(decode_ssr(enc, d), k);
            }
        }
    }

    #[test]
    fn parse_rejects_bad_text() {
        for bad in ["", "123", "12345", "12a4", "-123", " 123", "１２３４"] {
            assert!(bad.parse::<KeyNumber>().is_err(), "{bad:?}");
        }
        assert_eq!(key("0042").value(), 42);
        assert_eq!(KeyNumber::from_value(42).unwrap().to_string(), "0042");
        assert!(KeyNumber::from_value(10_000).is_err());
        assert!(DayOfMonth::new(0).is_err());
        assert!(DayOfMonth::new(32).is_err());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = generate_key(&mut ChaCha20Rng::seed_from_u64(99));
        let b = generate_key(&mut ChaCha20Rng::seed_from_u64(99));
        assert_eq!(a, b);
    }

    #[test]
    fn generated_digits_are_uniform() {
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut counts = [[0u32; 10]; KEY_DIGITS];
        for _ in 0..n {
            let k = generate_key(&mut rng);
            for (pos, d) in k.digits().into_iter().enumerate() {
                counts[pos][d as usize] += 1;
            }
        }
        for (pos, row) in counts.iter().enumerate() {
            let mut chi2 = 0.0;
            for &c in row {
                let f = f64::from(c) / f64::from(n);
                assert!((f - 0.1).abs() <= 0.01, "pos {pos}: freq {f}");
                let e = f64::from(n) / 10.0;
                chi2 += (f64::from(c) - e).powi(2) / e;
            }
            // chi-square, 9 dof, p = 0.001
            assert!(chi2 < 27.88, "pos {pos}: chi2 {chi2}");
        }
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(v in 0u32..KEY_SPACE) {
            let k = KeyNumber::from_value(v).unwrap();
            prop_assert_eq!(k.to_string().parse::<KeyNumber>().unwrap(), k);
            prop_assert_eq!(k.value(), v);
        }

        #[test]
        fn positions_are_independent(v in 0u32..KEY_SPACE, pos in 0usize..4, nd in 0u8..10, d in 1u32..=31) {
            let k = KeyNumber::from_value(v).unwrap();
            let mut digits = k.digits();
            digits[pos] = nd;
            let k2 = KeyNumber::from_digits(digits).unwrap();
            let (a, b) = (encode_ssr(k, day(d)).digits(), encode_ssr(k2, day(d)).digits());
            for i in 0..4 {
                if i != pos {
                    prop_assert_eq!(a[i], b[i]);
                }
            }
        }

        #[test]
        fn stored_key_always_verifies(v in 0u32..KEY_SPACE, d in 1u32..=31) {
            let k = KeyNumber::from_value(v).unwrap();
            prop_assert!(verify_key(k, k, day(d)).is_accept());
            prop_assert!(verify_key(encode_ssr(k, day(d)), k, day(d)).is_accept());
        }
    }
}
