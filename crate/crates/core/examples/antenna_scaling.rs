//! Output SINR and outage against the number of gateway antennas
//! (the `fig7` preset, shortened), written out as CSV.

use stfs_sim::{emit_results, preset, run_experiment, OutputFormat};

fn main() -> stfs_sim::Result<()> {
    let mut cfg = preset("fig7")?;
    cfg.n_trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    cfg.sweep_values = vec![10.0, 40.0, 100.0];
    let table = run_experiment(&cfg)?;
    let scenario = cfg.scenarios[0].name();
    for mode in &cfg.modes {
        for row in table.series(&format!("sinr_db/{}/{scenario}", mode.name())) {
            println!(
                "{:<5} N = {:>3}  mean SINR {:>7.2} dB  [{:.2}, {:.2}]",
                mode.name(),
                row.sweep_value,
                row.estimate,
                row.ci_lo,
                row.ci_hi
            );
        }
    }
    let path = std::env::temp_dir().join("antenna_scaling.csv");
    emit_results(&table, OutputFormat::Csv, &path)?;
    println!("\nwrote {}", path.display());
    Ok(())
}
