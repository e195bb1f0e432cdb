//! In-process consistency checks run by `gridauth selftest`.

use rand::Rng;
use thiserror::Error;

use crate::grid::{self, GridLayout, COPIES_PER_IMAGE, GRID_SIZE, IMAGE_POOL};
use crate::key::{encode_ssr, DayOfMonth, KeyNumber, KEY_SPACE};

pub const LAYOUT_CHECKS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelftestReport {
    pub ssr_cases: usize,
    pub layout_cases: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelftestFailure {
    #[error("key transform round trip failed for key {key} on day {day}: decoded {decoded}")]
    RoundTrip { key: KeyNumber, day: u32, decoded: KeyNumber },
    #[error("layout {index} violates composition: {reason}")]
    Layout { index: usize, reason: String },
}

pub fn run<R: Rng + ?Sized>(rng: &mut R) -> Result<SelftestReport, SelftestFailure> {
    run_with_decoder(crate::key::decode_ssr, rng)
}

/// Same as [`run`] with a replaceable decoder, so the detector itself can be
/// tested against a broken one.
pub fn run_with_decoder<R, F>(decode: F, rng: &mut R) -> Result<SelftestReport, SelftestFailure>
where
    R: Rng + ?Sized,
    F: Fn(KeyNumber, DayOfMonth) -> KeyNumber,
{
    let mut ssr_cases = 0;
    for value in 0..KEY_SPACE {
        let key = KeyNumber::from_value(value).expect("below key space");
        for day in DayOfMonth::all() {
            let decoded = decode(encode_ssr(key, day), day);
            if decoded != key {
                return Err(SelftestFailure::RoundTrip { key, day: day.get(), decoded });
            }
            ssr_cases += 1;
        }
    }

    for index in 0..LAYOUT_CHECKS {
        let layout = grid::generate_layout(rng);
        check_composition(&layout).map_err(|reason| SelftestFailure::Layout { index, reason })?;
    }

    Ok(SelftestReport { ssr_cases, layout_cases: LAYOUT_CHECKS })
}

fn check_composition(layout: &GridLayout) -> Result<(), String> {
    let header = layout.header();
    let mut totals = [0usize; IMAGE_POOL];
    for row in layout.cells() {
        for id in row {
            totals[id.index()] += 1;
        }
    }
    if let Some(id) = totals.iter().position(|&c| c != COPIES_PER_IMAGE) {
        return Err(format!("image {id} appears {} times", totals[id]));
    }
    for (i, h) in header.iter().enumerate() {
        if header[..i].contains(h) {
            return Err(format!("header repeats image {}", h.get()));
        }
    }
    for digit in 0..GRID_SIZE as u8 {
        let n = layout.cells_for_digit(digit).len();
        if n != COPIES_PER_IMAGE - 1 {
            return Err(format!("digit {digit} has {n} clickable copies"));
        }
    }
    Ok(())
}
