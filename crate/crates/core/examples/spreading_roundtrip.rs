//! Spreads one symbol per device over each grid, maps the blocks back out
//! and checks that every device's data window is recovered untouched.

use stfs_sim::channel::{propagate, LinkChannel, TapSet};
use stfs_sim::codebook::gen_unitary_codebook;
use stfs_sim::modem::{Constellation, SymbolAlphabet};
use stfs_sim::rng::substream;
use stfs_sim::spreading::{assign_blocks, build_grid, demap, spread_into, BlockLayout};
use stfs_sim::Mode;

fn main() -> stfs_sim::Result<()> {
    let (m, l, t) = (4, 8, 8);
    let layout = BlockLayout::new(1, 4, t)?;
    let codebook = gen_unitary_codebook(m, t)?;
    for mode in Mode::ALL {
        let alphabet = if mode.uses_tones() {
            SymbolAlphabet::split(Constellation::psk(4)?, Constellation::fsk(4)?)?
        } else {
            SymbolAlphabet::points_only(Constellation::psk(4)?)?
        };
        let grid = build_grid(mode, l, m, layout, alphabet.n_tones())?;
        let assignment = assign_blocks(&grid, m, &mut substream(3, &[]))?;
        let mut frame = grid.empty_frame();
        let labels: Vec<usize> = (0..m).map(|d| (3 * d + 1) % alphabet.size()).collect();
        for (d, &label) in labels.iter().enumerate() {
            spread_into(&mut frame, alphabet.tx_symbol(label), codebook.vector(d), assignment.block_of(d), &grid)?;
        }
        // A unit single-tap channel leaves the frame as it was sent.
        let rx = propagate(&frame, &[LinkChannel::unit(TapSet::fixed(&[1.0.into()]))]);
        let obs = demap(&rx, &grid, &assignment)?;
        let exact = mode == Mode::None
            || (0..m).all(|d| {
                let sym = alphabet.tx_symbol(labels[d]);
                let got = &obs[d].data[0][sym.tone];
                codebook.vector(d).iter().zip(got).all(|(v, y)| (v * sym.point - y).norm() < 1e-12)
            });
        println!(
            "{:<5} blocks {:>2} ({}x{} cells, {} tones)  exclusive {:<5}  round-trip {}",
            mode.name(),
            grid.n_blocks(),
            grid.slots(),
            grid.subbands(),
            grid.tones(),
            assignment.is_exclusive(),
            if mode == Mode::None { "superposed" } else if exact { "exact" } else { "MISMATCH" }
        );
    }
    Ok(())
}
