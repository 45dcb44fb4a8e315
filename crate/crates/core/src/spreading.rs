//! The indexed block grid: block geometry for time, frequency and
//! time-frequency spreading, exclusive device-to-block assignment, spreading
//! of a symbol over a block with a dispersion vector, and demapping of the
//! gateway frame back into per-device block observations.
//!
//! A frame is a grid of `subbands·tones` rows (frequency streams) by
//! `slots·block_len` columns (symbol periods). Frequency blocks are separated
//! by guard bands wide enough that rows never leak into each other; time
//! blocks end with a guard of `n_taps − 1` empty symbols so that channel
//! tails never reach the next block.
//!
//! Inside a block, row `tone = 0` carries the pilot:
//!
//! ```text
//! | cyclic prefix | pilot | guard | data (T) | guard |
//!   n_taps − 1     P       n_taps−1  spread     n_taps − 1
//! ```

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::channel::Frame;
use crate::error::{Error, Result};
pub use crate::modem::TxSymbol;

/// How the transmission frame is divided among devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Baseline without spreading: every device uses the whole frame.
    None,
    /// Time blocks over the full band.
    St,
    /// Frequency sub-bands over the whole frame duration.
    Sf,
    /// A lattice of time slots by sub-bands.
    Stf,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::None, Mode::St, Mode::Sf, Mode::Stf];

    pub fn name(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::St => "st",
            Mode::Sf => "sf",
            Mode::Stf => "stf",
        }
    }

    /// Whether the data stream is carried (at least partly) by FSK tones.
    pub fn uses_tones(self) -> bool {
        matches!(self, Mode::Sf | Mode::Stf)
    }
}

/// Symbol layout of a single block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub cyclic_prefix: usize,
    pub pilot_len: usize,
    pub guard: usize,
    pub data_len: usize,
}

impl BlockLayout {
    /// Layout for channels with `n_taps` taps, a pilot of `pilot_len`
    /// symbols and dispersion vectors of length `data_len`.
    pub fn new(n_taps: usize, pilot_len: usize, data_len: usize) -> Result<Self> {
        if n_taps == 0 || data_len == 0 {
            return Err(Error::Config("block layout needs n_taps >= 1 and T >= 1".into()));
        }
        if pilot_len < n_taps {
            return Err(Error::Config(format!(
                "pilot length {pilot_len} is shorter than the channel ({n_taps} taps)"
            )));
        }
        Ok(BlockLayout {
            cyclic_prefix: n_taps - 1,
            pilot_len,
            guard: n_taps - 1,
            data_len,
        })
    }

    pub fn block_len(&self) -> usize {
        self.cyclic_prefix + self.pilot_len + self.guard + self.data_len + self.guard
    }

    pub fn pilot_offset(&self) -> usize {
        self.cyclic_prefix
    }

    pub fn data_offset(&self) -> usize {
        self.cyclic_prefix + self.pilot_len + self.guard
    }

    /// Length of the received data window: the spread symbol plus its channel tail.
    pub fn data_window(&self) -> usize {
        self.data_len + self.guard
    }
}

/// Physical block dimensions, reported alongside results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridTiming {
    pub block_duration_us: f64,
    pub guard_band_hz: f64,
}

impl Default for GridTiming {
    fn default() -> Self {
        GridTiming {
            block_duration_us: 10.0,
            guard_band_hz: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    mode: Mode,
    slots: usize,
    subbands: usize,
    tones: usize,
    layout: BlockLayout,
    pub timing: GridTiming,
}

/// Where a block sits in the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub slot: usize,
    pub subband: usize,
}

/// Sub-band count for an `l`-block time-frequency lattice: the largest
/// divisor of `l` not exceeding `√l` (so 20 blocks become 4 sub-bands × 5 slots).
pub fn stf_subbands(l: usize) -> usize {
    (1..=l).filter(|d| l.is_multiple_of(*d) && d * d <= l).max().unwrap_or(1)
}

/// Builds the block grid for `m` devices over `l` blocks.
///
/// `tones` is the number of FSK tones per block in the modes that use them;
/// time-only and baseline grids always have one.
pub fn build_grid(
    mode: Mode,
    l: usize,
    m: usize,
    layout: BlockLayout,
    tones: usize,
) -> Result<BlockGrid> {
    if m == 0 {
        return Err(Error::Config("at least one device is required".into()));
    }
    if mode != Mode::None && l < m {
        return Err(Error::Config(format!(
            "L >= M violated (L = {l}, M = {m}): every device needs its own block"
        )));
    }
    let (slots, subbands) = match mode {
        Mode::None => (1, 1),
        Mode::St => (l, 1),
        Mode::Sf => (1, l),
        Mode::Stf => {
            let f = stf_subbands(l);
            (l / f, f)
        }
    };
    build_lattice(mode, slots, subbands, layout, tones)
}

/// Grid with an explicit `slots × subbands` lattice.
pub fn build_lattice(
    mode: Mode,
    slots: usize,
    subbands: usize,
    layout: BlockLayout,
    tones: usize,
) -> Result<BlockGrid> {
    if slots == 0 || subbands == 0 {
        return Err(Error::Config("grid needs at least one slot and one sub-band".into()));
    }
    let tones = if mode.uses_tones() { tones } else { 1 };
    if tones == 0 {
        return Err(Error::Config("tone count must be at least 1".into()));
    }
    Ok(BlockGrid {
        mode,
        slots,
        subbands,
        tones,
        layout,
        timing: GridTiming::default(),
    })
}

impl BlockGrid {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_blocks(&self) -> usize {
        self.slots * self.subbands
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn subbands(&self) -> usize {
        self.subbands
    }

    pub fn tones(&self) -> usize {
        self.tones
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn block_len(&self) -> usize {
        self.layout.block_len()
    }

    pub fn frame_rows(&self) -> usize {
        self.subbands * self.tones
    }

    pub fn frame_len(&self) -> usize {
        self.slots * self.block_len()
    }

    pub fn empty_frame(&self) -> Frame {
        Frame::zeros(self.frame_rows(), self.frame_len())
    }

    /// Block index → (time slot, sub-band). Sub-bands vary fastest.
    pub fn cell(&self, block: usize) -> Cell {
        Cell {
            slot: block / self.subbands,
            subband: block % self.subbands,
        }
    }

    /// Rows and columns occupied by a block, as half-open ranges.
    pub fn support(&self, block: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let c = self.cell(block);
        let rows = c.subband * self.tones..(c.subband + 1) * self.tones;
        let cols = c.slot * self.block_len()..(c.slot + 1) * self.block_len();
        (rows, cols)
    }

    fn check_block(&self, block: usize) -> Result<()> {
        if block >= self.n_blocks() {
            return Err(Error::Contract(format!(
                "block {block} is outside the grid of {} blocks",
                self.n_blocks()
            )));
        }
        Ok(())
    }
}

/// Device → block map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    blocks: Vec<usize>,
}

impl Assignment {
    /// Explicit map; must be injective.
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        let mut seen = blocks.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Contract(format!("assignment {blocks:?} is not injective")));
        }
        Ok(Assignment { blocks })
    }

    /// Device `i` on block `i`.
    pub fn identity(m: usize) -> Self {
        Assignment {
            blocks: (0..m).collect(),
        }
    }

    /// Every device on block 0: the no-spreading baseline.
    pub fn shared(m: usize) -> Self {
        Assignment { blocks: vec![0; m] }
    }

    pub fn block_of(&self, device: usize) -> usize {
        self.blocks[device]
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// No two devices share a block.
    pub fn is_exclusive(&self) -> bool {
        let mut s = self.blocks.clone();
        s.sort_unstable();
        s.windows(2).all(|w| w[0] != w[1])
    }

    /// Devices placed on `block`.
    pub fn occupants(&self, block: usize) -> impl Iterator<Item = usize> + '_ {
        self.blocks
            .iter()
            .enumerate()
            .filter(move |(_, &b)| b == block)
            .map(|(d, _)| d)
    }
}

/// Random injective assignment: a uniformly drawn ordered subset of `m` blocks.
pub fn assign_blocks<R: Rng + ?Sized>(grid: &BlockGrid, m: usize, rng: &mut R) -> Result<Assignment> {
    if grid.mode == Mode::None {
        return Ok(Assignment::shared(m));
    }
    if grid.n_blocks() < m {
        return Err(Error::Config(format!(
            "L >= M violated (L = {}, M = {m})",
            grid.n_blocks()
        )));
    }
    let mut all: Vec<usize> = (0..grid.n_blocks()).collect();
    all.shuffle(rng);
    all.truncate(m);
    Ok(Assignment { blocks: all })
}

/// Frame that is `symbol.point · vector` on the data part of `block` (in the
/// row of `symbol.tone`) and zero everywhere else.
pub fn spread(symbol: TxSymbol, vector: &[Complex64], block: usize, grid: &BlockGrid) -> Result<Frame> {
    let mut frame = grid.empty_frame();
    spread_into(&mut frame, symbol, vector, block, grid)?;
    Ok(frame)
}

/// [`spread`] into an existing frame.
pub fn spread_into(
    frame: &mut Frame,
    symbol: TxSymbol,
    vector: &[Complex64],
    block: usize,
    grid: &BlockGrid,
) -> Result<()> {
    grid.check_block(block)?;
    if vector.len() != grid.layout.data_len {
        return Err(Error::Contract(format!(
            "dispersion vector has length {} but blocks carry T = {}",
            vector.len(),
            grid.layout.data_len
        )));
    }
    if symbol.tone >= grid.tones {
        return Err(Error::Contract(format!(
            "tone {} outside the {} tones of a block",
            symbol.tone, grid.tones
        )));
    }
    let (rows, cols) = grid.support(block);
    let row = frame.row_mut(rows.start + symbol.tone);
    let start = cols.start + grid.layout.data_offset();
    for (dst, v) in row[start..start + vector.len()].iter_mut().zip(vector) {
        *dst = symbol.point * v;
    }
    Ok(())
}

/// Writes `pilot` (preceded by its cyclic prefix) into the pilot part of `block`.
pub fn insert_pilot(frame: &mut Frame, pilot: &[Complex64], block: usize, grid: &BlockGrid) -> Result<()> {
    grid.check_block(block)?;
    let lay = grid.layout;
    if pilot.len() != lay.pilot_len {
        return Err(Error::Contract(format!(
            "pilot has length {} but blocks reserve {}",
            pilot.len(),
            lay.pilot_len
        )));
    }
    let (rows, cols) = grid.support(block);
    let row = frame.row_mut(rows.start);
    let base = cols.start;
    for i in 0..lay.cyclic_prefix {
        row[base + i] = pilot[lay.pilot_len - lay.cyclic_prefix + i];
    }
    row[base + lay.pilot_offset()..base + lay.pilot_offset() + lay.pilot_len].copy_from_slice(pilot);
    Ok(())
}

/// Received samples of one block on every antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockObservation {
    /// `pilot[n]`: the pilot symbols (cyclic prefix removed) on antenna `n`.
    pub pilot: Vec<Vec<Complex64>>,
    /// `data[n][tone]`: the data window of each tone on antenna `n`.
    pub data: Vec<Vec<Vec<Complex64>>>,
}

impl BlockObservation {
    pub fn antennas(&self) -> usize {
        self.pilot.len()
    }

    /// Data window of one tone on every antenna.
    pub fn tone(&self, tone: usize) -> Vec<Vec<Complex64>> {
        self.data.iter().map(|d| d[tone].clone()).collect()
    }

    /// Per-antenna, per-tone energy of the data windows.
    pub fn tone_energies(&self) -> Vec<Vec<f64>> {
        self.data
            .iter()
            .map(|tones| tones.iter().map(|w| w.iter().map(|z| z.norm_sqr()).sum()).collect())
            .collect()
    }
}

/// Extracts one block from every antenna's frame. In grids with several
/// sub-bands the sub-band rows are selected first, then the time slot.
pub fn demap_block(received: &[Frame], grid: &BlockGrid, block: usize) -> Result<BlockObservation> {
    grid.check_block(block)?;
    let lay = grid.layout;
    let (rows, cols) = grid.support(block);
    let mut pilot = Vec::with_capacity(received.len());
    let mut data = Vec::with_capacity(received.len());
    for frame in received {
        if frame.rows() != grid.frame_rows() || frame.len() != grid.frame_len() {
            return Err(Error::Contract(format!(
                "received frame is {}x{}, grid expects {}x{}",
                frame.rows(),
                frame.len(),
                grid.frame_rows(),
                grid.frame_len()
            )));
        }
        // frequency first: the sub-band's tone rows
        let band: Vec<&[Complex64]> = rows.clone().map(|r| frame.row(r)).collect();
        // then time: the slot's columns
        let p0 = cols.start + lay.pilot_offset();
        pilot.push(band[0][p0..p0 + lay.pilot_len].to_vec());
        let d0 = cols.start + lay.data_offset();
        data.push(
            band.iter()
                .map(|row| row[d0..d0 + lay.data_window()].to_vec())
                .collect(),
        );
    }
    Ok(BlockObservation { pilot, data })
}

/// Per-device block observations, in device order.
pub fn demap(received: &[Frame], grid: &BlockGrid, assignment: &Assignment) -> Result<Vec<BlockObservation>> {
    assignment
        .blocks()
        .iter()
        .map(|&b| demap_block(received, grid, b))
        .collect()
}
