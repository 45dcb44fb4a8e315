//! Outage probability against nominal SNR for every spreading mode, from a
//! short run of the `fig3` preset. Pass a trial count to change its length.

use stfs_sim::{preset, run_experiment};

fn main() -> stfs_sim::Result<()> {
    let mut cfg = preset("fig3")?;
    cfg.n_trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    cfg.error_rates = false;
    cfg.scenarios.truncate(1);
    let table = run_experiment(&cfg)?;
    let scenario = cfg.scenarios[0].name();
    print!("{:>8}", "snr");
    for mode in &cfg.modes {
        print!("{:>10}", mode.name());
    }
    println!();
    for row in table.series(&format!("outage_probability/{}/{scenario}", cfg.modes[0].name())) {
        print!("{:>8.1}", row.sweep_value);
        for mode in &cfg.modes {
            let metric = format!("outage_probability/{}/{scenario}", mode.name());
            let p = table.get(&metric, row.sweep_value).map_or(f64::NAN, |r| r.estimate);
            print!("{p:>10.4}");
        }
        println!();
    }
    Ok(())
}
