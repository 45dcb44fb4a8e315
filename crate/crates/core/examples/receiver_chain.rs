//! Sends one block from a single device to a multi-antenna gateway and runs
//! the receiver: pilot estimation, each decoder, and RAKE output SINR.

use stfs_sim::channel::{awgn, gen_taps, propagate, Doppler, LinkChannel, PowerDelayProfile};
use stfs_sim::codebook::gen_unitary_codebook;
use stfs_sim::modem::{Constellation, SymbolAlphabet};
use stfs_sim::receiver::{decode, estimate_csi, post_sinr, rake_weights, DecoderKind, Estimator, PilotSet};
use stfs_sim::rng::substream;
use stfs_sim::spreading::{build_grid, demap_block, insert_pilot, spread_into, BlockLayout};
use stfs_sim::Mode;

fn main() -> stfs_sim::Result<()> {
    let (antennas, n_taps, t, noise) = (16, 4, 8, 0.05);
    let pdp = PowerDelayProfile::exponential(n_taps, 3.0)?;
    let layout = BlockLayout::new(n_taps, n_taps, t)?;
    let grid = build_grid(Mode::St, 1, 1, layout, 1)?;
    let pilots = PilotSet::zadoff_chu(1, n_taps, n_taps)?;
    let alphabet = SymbolAlphabet::points_only(Constellation::psk(4)?)?;
    let codebook = gen_unitary_codebook(4, t)?;
    let (q, label) = (2, 3);

    let mut frame = grid.empty_frame();
    insert_pilot(&mut frame, pilots.sequence(0), 0, &grid)?;
    spread_into(&mut frame, alphabet.tx_symbol(label), codebook.vector(q), 0, &grid)?;

    let mut rng = substream(5, &[]);
    let links: Vec<LinkChannel> = (0..antennas)
        .map(|_| gen_taps(&pdp, Doppler::STATIC, &mut rng).map(LinkChannel::unit))
        .collect::<stfs_sim::Result<_>>()?;
    let clean = propagate(&frame, &links);
    let mut rx = awgn(antennas, grid.frame_rows(), grid.frame_len(), noise, &mut rng);
    for (y, s) in rx.iter_mut().zip(&clean) {
        y.add_scaled(s, 1.0.into())?;
    }

    let obs = demap_block(&rx, &grid, 0)?;
    println!("sent vector {q}, label {label}\n");
    for estimator in [Estimator::Ls, Estimator::Mmse] {
        let est = estimate_csi(&obs.pilot, &pilots, 0, estimator, noise, pdp.weights())?;
        let mse: f64 = est
            .taps
            .iter()
            .zip(&links)
            .flat_map(|(e, l)| e.iter().zip(l.small_scale.current()).map(|(a, b)| (a - b).norm_sqr()))
            .sum::<f64>()
            / (antennas * n_taps) as f64;
        println!("{estimator:?}: tap MSE {mse:.2e}");
        for kind in [DecoderKind::Ml, DecoderKind::Zf, DecoderKind::Mmse, DecoderKind::Mf] {
            let d = decode(kind, &obs, &est, &codebook, &alphabet, noise)?;
            println!("  {kind:<5?} -> vector {} label {} cost {:.3}", d.vector_index, d.label, d.cost);
        }
        let w = layout.data_window();
        let weights = rake_weights(&est, codebook.vector(q), w);
        let clean_obs = demap_block(&clean, &grid, 0)?;
        let sinr = post_sinr(&weights, (&clean_obs.tone(0), 1.0), &[], noise);
        println!("  RAKE output SINR {:.2} dB\n", sinr.db());
    }
    Ok(())
}
