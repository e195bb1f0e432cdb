//! The 10x10 image grid used to enter key digits.
//!
//! Row 0 (the header) shows 10 distinct images out of a pool of 25; the
//! header index of an image is the digit it stands for. Rows 1 to 9 hold
//! three more copies of every header image and four copies of each of the 15
//! images left out of the header. Clicking a copy of a header image enters its
//! index; clicking any other image enters a garbage value. The header row
//! itself cannot be clicked.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRID_SIZE: usize = 10;
pub const IMAGE_POOL: usize = 25;
pub const COPIES_PER_IMAGE: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("cell ({row}, {col}) is outside the 10x10 grid")]
    OutOfRange { row: i64, col: i64 },
    #[error("image id {0} is outside 0..=24")]
    BadImage(i64),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
}

/// Identifier of one of the 25 distinct images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct ImageId(u8);

impl ImageId {
    pub fn new(id: u8) -> Result<Self, GridError> {
        if usize::from(id) < IMAGE_POOL {
            Ok(Self(id))
        } else {
            Err(GridError::BadImage(i64::from(id)))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn all() -> impl Iterator<Item = ImageId> {
        (0..IMAGE_POOL as u8).map(ImageId)
    }
}

impl TryFrom<i64> for ImageId {
    type Error = GridError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        u8::try_from(value).ok().and_then(|v| ImageId::new(v).ok()).ok_or(GridError::BadImage(value))
    }
}

impl From<ImageId> for u8 {
    fn from(id: ImageId) -> u8 {
        id.0
    }
}

/// A validated cell position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: i64, col: i64) -> Result<Self, GridError> {
        let in_range = |v: i64| (0..GRID_SIZE as i64).contains(&v);
        if in_range(row) && in_range(col) {
            Ok(Self { row: row as usize, col: col as usize })
        } else {
            Err(GridError::OutOfRange { row, col })
        }
    }
}

/// What a click on a cell means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClickResult {
    Digit(u8),
    Garbage,
    HeaderCell,
}

/// One grid shown to the user. Row 0 of `cells` is the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLayout")]
pub struct GridLayout {
    header: [ImageId; GRID_SIZE],
    cells: [[ImageId; GRID_SIZE]; GRID_SIZE],
}

#[derive(Deserialize)]
struct RawLayout {
    header: [ImageId; GRID_SIZE],
    cells: [[ImageId; GRID_SIZE]; GRID_SIZE],
}

impl TryFrom<RawLayout> for GridLayout {
    type Error = GridError;

    fn try_from(raw: RawLayout) -> Result<Self, Self::Error> {
        GridLayout::from_parts(raw.header, raw.cells)
    }
}

impl GridLayout {
    /// Builds a layout from explicit parts, checking every composition rule.
    pub fn from_parts(
        header: [ImageId; GRID_SIZE],
        cells: [[ImageId; GRID_SIZE]; GRID_SIZE],
    ) -> Result<Self, GridError> {
        let layout = Self { header, cells };
        layout.validate()?;
        Ok(layout)
    }

    pub fn header(&self) -> &[ImageId; GRID_SIZE] {
        &self.header
    }

    pub fn cells(&self) -> &[[ImageId; GRID_SIZE]; GRID_SIZE] {
        &self.cells
    }

    pub fn image_at(&self, cell: Cell) -> ImageId {
        self.cells[cell.row][cell.col]
    }

    /// Header index of `image`, if it is in the header.
    pub fn header_index(&self, image: ImageId) -> Option<u8> {
        self.header.iter().position(|&h| h == image).map(|i| i as u8)
    }

    fn validate(&self) -> Result<(), GridError> {
        let invalid = |msg: String| Err(GridError::InvalidLayout(msg));
        if self.cells[0] != self.header {
            return invalid("row 0 differs from header".into());
        }
        let mut seen = [false; IMAGE_POOL];
        for h in self.header {
            if std::mem::replace(&mut seen[h.index()], true) {
                return invalid(format!("image {} repeated in header", h.get()));
            }
        }
        let mut below = [0usize; IMAGE_POOL];
        for row in &self.cells[1..] {
            for id in row {
                below[id.index()] += 1;
            }
        }
        for id in ImageId::all() {
            let want = if seen[id.index()] { COPIES_PER_IMAGE - 1 } else { COPIES_PER_IMAGE };
            if below[id.index()] != want {
                return invalid(format!(
                    "image {} appears {} times below the header, expected {want}",
                    id.get(),
                    below[id.index()]
                ));
            }
        }
        Ok(())
    }

    /// Clickable cells that enter `digit`, in row-major order.
    pub fn cells_for_digit(&self, digit: u8) -> Vec<Cell> {
        let Some(&target) = self.header.get(usize::from(digit)) else {
            return Vec::new();
        };
        self.clickable_cells().filter(|&c| self.image_at(c) == target).collect()
    }

    /// Clickable cells that enter a garbage value, in row-major order.
    pub fn garbage_cells(&self) -> Vec<Cell> {
        self.clickable_cells().filter(|&c| self.header_index(self.image_at(c)).is_none()).collect()
    }

    fn clickable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (1..GRID_SIZE).flat_map(|row| (0..GRID_SIZE).map(move |col| Cell { row, col }))
    }
}

/// Draws a fresh layout: 10 header images chosen uniformly without
/// replacement, then an unbiased shuffle of the 90 remaining copies into
/// rows 1 to 9.
pub fn generate_layout<R: Rng + ?Sized>(rng: &mut R) -> GridLayout {
    let mut pool: Vec<ImageId> = ImageId::all().collect();
    pool.shuffle(rng);

    let mut header = [ImageId(0); GRID_SIZE];
    header.copy_from_slice(&pool[..GRID_SIZE]);

    let mut rest = Vec::with_capacity(GRID_SIZE * (GRID_SIZE - 1));
    for (i, &id) in pool.iter().enumerate() {
        let copies = if i < GRID_SIZE { COPIES_PER_IMAGE - 1 } else { COPIES_PER_IMAGE };
        rest.extend(std::iter::repeat_n(id, copies));
    }
    rest.shuffle(rng);

    let mut cells = [[ImageId(0); GRID_SIZE]; GRID_SIZE];
    cells[0] = header;
    for (row, chunk) in cells[1..].iter_mut().zip(rest.chunks_exact(GRID_SIZE)) {
        row.copy_from_slice(chunk);
    }
    GridLayout { header, cells }
}

/// The layout shown after an accepted click. Independent of the previous one.
pub fn reshuffle_after_click<R: Rng + ?Sized>(rng: &mut R) -> GridLayout {
    generate_layout(rng)
}

pub fn resolve_click(layout: &GridLayout, row: i64, col: i64) -> Result<ClickResult, GridError> {
    let cell = Cell::new(row, col)?;
    Ok(resolve_cell(layout, cell))
}

pub fn resolve_cell(layout: &GridLayout, cell: Cell) -> ClickResult {
    if cell.row == 0 {
        return ClickResult::HeaderCell;
    }
    match layout.header_index(layout.image_at(cell)) {
        Some(d) => ClickResult::Digit(d),
        None => ClickResult::Garbage,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn every_digit_has_three_copies() {
        let mut r = rng(1);
        for _ in 0..200 {
            let layout = generate_layout(&mut r);
            for d in 0..10 {
                let cells = layout.cells_for_digit(d);
                assert_eq!(cells.len(), 3);
                for c in cells {
                    assert_eq!(resolve_cell(&layout, c), ClickResult::Digit(d));
                }
            }
            assert_eq!(layout.garbage_cells().len(), 60);
        }
    }

    #[test]
    fn header_row_is_not_clickable() {
        let layout = generate_layout(&mut rng(2));
        for col in 0..10 {
            assert_eq!(resolve_click(&layout, 0, col).unwrap(), ClickResult::HeaderCell);
        }
    }

    #[test]
    fn click_on_sixth_header_copy_is_digit_six() {
        let layout = generate_layout(&mut rng(3));
        let six = layout.header()[6];
        let copy = layout.clickable_cells().find(|&c| layout.image_at(c) == six).unwrap();
        assert_eq!(resolve_click(&layout, copy.row as i64, copy.col as i64).unwrap(), ClickResult::Digit(6));
    }

    #[test]
    fn garbage_click() {
        let layout = generate_layout(&mut rng(4));
        let g = layout.garbage_cells()[0];
        assert_eq!(resolve_cell(&layout, g), ClickResult::Garbage);
    }

    #[test]
    fn out_of_range_clicks_are_errors() {
        let layout = generate_layout(&mut rng(5));
        for (r, c) in [(-1, 0), (0, -1), (10, 0), (0, 10), (i64::MAX, 3)] {
            assert_eq!(resolve_click(&layout, r, c), Err(GridError::OutOfRange { row: r, col: c }));
        }
    }

    #[test]
    fn wire_round_trip_and_validation() {
        let layout = generate_layout(&mut rng(6));
        let json = serde_json::to_value(&layout).unwrap();
        assert_eq!(json["header"].as_array().unwrap().len(), 10);
        assert_eq!(json["cells"].as_array().unwrap().len(), 10);
        let back: GridLayout = serde_json::from_value(json.clone()).unwrap();
        assert_eq!(back, layout);

        let mut bad = json.clone();
        bad["cells"][1][0] = bad["cells"][1][1].clone();
        if bad != json {
            assert!(serde_json::from_value::<GridLayout>(bad).is_err());
        }
        let mut bad = json;
        bad["header"][0] = serde_json::json!(25);
        assert!(serde_json::from_value::<GridLayout>(bad).is_err());
    }

    #[test]
    fn reshuffles_differ() {
        let mut r = rng(7);
        let mut prev = generate_layout(&mut r);
        for _ in 0..1000 {
            let next = reshuffle_after_click(&mut r);
            assert_ne!(next, prev);
            prev = next;
        }
    }
}
