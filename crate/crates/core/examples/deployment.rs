//! Drops devices over the annulus and prints their large-scale gains.

use stfs_sim::rng::substream;
use stfs_sim::scenario::{deploy_nodes, draw_shadowing, pathloss_db, LargeScaleGain, Scenario};

fn main() -> stfs_sim::Result<()> {
    let mut rng = substream(7, &[]);
    let nodes = deploy_nodes(8, 100.0, 1000.0, &mut rng)?;
    println!("{:>8} {:>8} {:>10} {:>10} {:>10}", "r [m]", "angle", "umi [dB]", "inh [dB]", "gain");
    for p in &nodes.positions {
        let umi = pathloss_db(Scenario::Outdoor, p.radius, 2.0)?;
        let inh = pathloss_db(Scenario::Indoor, p.radius, 2.0)?;
        let gain = LargeScaleGain {
            pathloss_db: umi,
            shadowing_db: draw_shadowing(4.0, 2.0, &mut rng)?,
        };
        println!(
            "{:8.1} {:8.3} {:10.2} {:10.2} {:10.3e}",
            p.radius,
            p.angle,
            umi,
            inh,
            gain.power_gain()
        );
    }
    Ok(())
}
