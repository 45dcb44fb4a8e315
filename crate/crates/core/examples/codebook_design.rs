//! Compares random and unitary dispersion codebooks under each design
//! criterion and round-trips the winner through its text format.

use stfs_sim::codebook::{
    gen_random_codebook, gen_unitary_codebook_with, min_distance, optimize_codebook, score, Codebook, Criterion,
    ScoreContext, UnitarySource,
};
use stfs_sim::modem::Constellation;
use stfs_sim::rng::substream;

fn main() -> stfs_sim::Result<()> {
    let (q, t) = (8, 8);
    let qpsk = Constellation::psk(4)?;
    let ctx = ScoreContext { constellation: &qpsk, sinr: 10.0 };
    for criterion in [Criterion::MaxMinDistance, Criterion::MinErrorProb, Criterion::MaxCapacity] {
        let (random, s_random) =
            optimize_codebook(|r| gen_random_codebook(q, t, r), criterion, &ctx, 64, &mut substream(1, &[]))?;
        let (unitary, s_unitary) = optimize_codebook(
            |r| gen_unitary_codebook_with(q, t, UnitarySource::Haar, r),
            criterion,
            &ctx,
            64,
            &mut substream(1, &[]),
        )?;
        println!(
            "{:<18} random {:+.4e} (dmin {:.3})   unitary {:+.4e} (dmin {:.3})",
            criterion.name(),
            s_random,
            min_distance(&random, &qpsk),
            s_unitary,
            min_distance(&unitary, &qpsk),
        );
    }

    let cb = gen_unitary_codebook_with(q, t, UnitarySource::Dft, &mut substream(0, &[]))?;
    let back = Codebook::from_text(&cb.to_text())?;
    println!(
        "\nDFT codebook: power error {:.2e}, score {:.4}, text round-trip {}",
        cb.power_error(),
        score(&cb, Criterion::MaxMinDistance, &ctx),
        if back.vectors().len() == q { "ok" } else { "mismatch" }
    );
    Ok(())
}
