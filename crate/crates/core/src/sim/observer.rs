use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use super::trial_rng;
use crate::grid::{self, Cell, ClickResult, GridLayout, GRID_SIZE};
use crate::key::{self, KeyNumber, KEY_DIGITS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    /// Layout on screen when the click was made.
    pub layout: GridLayout,
    pub click: Cell,
}

/// Four recorded clicks of one legitimate login.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginTrace {
    steps: Vec<TraceStep>,
}

impl LoginTrace {
    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    /// Digits entered by replaying every click against its layout.
    pub fn replay(&self) -> Option<KeyNumber> {
        let mut digits = [0u8; KEY_DIGITS];
        for (slot, step) in digits.iter_mut().zip(&self.steps) {
            match grid::resolve_cell(&step.layout, step.click) {
                ClickResult::Digit(d) => *slot = d,
                _ => return None,
            }
        }
        KeyNumber::from_digits(digits).ok()
    }
}

/// A legitimate user entering `key`, choosing uniformly among the three
/// copies of each header image.
pub fn simulate_login_trace<R: Rng + ?Sized>(key: KeyNumber, rng: &mut R) -> LoginTrace {
    let mut layout = grid::generate_layout(rng);
    let mut steps = Vec::with_capacity(KEY_DIGITS);
    for digit in key.digits() {
        let candidates = layout.cells_for_digit(digit);
        let click = candidates[rng.random_range(0..candidates.len())];
        let next = grid::reshuffle_after_click(rng);
        steps.push(TraceStep { layout: std::mem::replace(&mut layout, next), click });
    }
    LoginTrace { steps }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObserverModel {
    /// Sees and remembers every layout and every click.
    FullSnapshot,
    /// Remembers click coordinates only.
    ClickOnly,
    /// Remembers the clicked image plus `k` random header cells per step.
    KCellRecall { k: u32 },
}

impl ObserverModel {
    pub fn label(&self) -> &'static str {
        match self {
            ObserverModel::FullSnapshot => "full-snapshot",
            ObserverModel::ClickOnly => "click-only",
            ObserverModel::KCellRecall { .. } => "k-cell",
        }
    }

    pub fn k(&self) -> Option<u32> {
        match *self {
            ObserverModel::KCellRecall { k } => Some(k),
            _ => None,
        }
    }
}

/// The observer's best guess at the key behind `trace`.
pub fn observer_attack<R: Rng + ?Sized>(trace: &LoginTrace, model: ObserverModel, rng: &mut R) -> KeyNumber {
    let mut digits = [0u8; KEY_DIGITS];
    for (slot, step) in digits.iter_mut().zip(trace.steps()) {
        let clicked = step.layout.image_at(step.click);
        let decoded = match model {
            ObserverModel::FullSnapshot => step.layout.header_index(clicked),
            // The layout is gone after the click; coordinates say nothing.
            ObserverModel::ClickOnly => None,
            ObserverModel::KCellRecall { k } => {
                let k = (k as usize).min(GRID_SIZE);
                sample(rng, GRID_SIZE, k).into_iter().find(|&i| step.layout.header()[i] == clicked).map(|i| i as u8)
            }
        };
        *slot = decoded.unwrap_or_else(|| rng.random_range(0..10));
    }
    KeyNumber::from_digits(digits).expect("digits are 0..=9")
}

/// Number of trials in which the observer recovers a random key exactly.
pub fn run_observer_trials(model: ObserverModel, trials: u64, seed: u64) -> u64 {
    (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = trial_rng(seed, i);
            let key = key::generate_key(&mut rng);
            let trace = simulate_login_trace(key, &mut rng);
            observer_attack(&trace, model, &mut rng) == key
        })
        .count() as u64
}
