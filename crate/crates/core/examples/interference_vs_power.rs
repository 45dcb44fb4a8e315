//! Aggregate interference metric against transmit power in the indoor
//! scenario (the `fig6` preset, shortened).

use stfs_sim::{preset, run_experiment};

fn main() -> stfs_sim::Result<()> {
    let mut cfg = preset("fig6")?;
    cfg.n_trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let table = run_experiment(&cfg)?;
    let scenario = cfg.scenarios[0].name();
    println!("{:>8} {:>12} {:>12} {:>12}", "tx dBm", "st", "sf", "stf");
    let modes = ["st", "sf", "stf"];
    for row in table.series(&format!("interference_db/st/{scenario}")) {
        print!("{:>8.1}", row.sweep_value);
        for mode in modes {
            let r = table.get(&format!("interference_db/{mode}/{scenario}"), row.sweep_value);
            print!(" {:>12.2}", r.map_or(f64::NAN, |r| r.estimate));
        }
        println!();
    }
    Ok(())
}
