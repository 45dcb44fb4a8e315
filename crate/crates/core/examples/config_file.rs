//! Builds a configuration in code, writes it as TOML, loads it back and runs
//! it. This is the same path the `stfsim run --config` command takes.

use stfs_sim::config::SweepKind;
use stfs_sim::{run_experiment_with_workers, Mode, OutputFormat, SystemConfig};

fn main() -> stfs_sim::Result<()> {
    let cfg = SystemConfig {
        m: 4,
        n: 8,
        l: 4,
        t: 4,
        q: 4,
        modes: vec![Mode::St, Mode::Sf],
        n_trials: 50,
        master_seed: Some(99),
        sweep: SweepKind::SnrDb,
        sweep_values: vec![-30.0, -20.0],
        ..SystemConfig::default()
    };
    let dir = std::env::temp_dir().join("stfs-config-example");
    std::fs::create_dir_all(&dir).map_err(|e| stfs_sim::Error::Config(e.to_string()))?;
    let path = dir.join("small.toml");
    std::fs::write(&path, cfg.to_toml()).map_err(|e| stfs_sim::Error::Config(e.to_string()))?;
    let loaded = SystemConfig::load(&path)?;
    let table = run_experiment_with_workers(&loaded, 2)?;
    print!("{}", table.render(OutputFormat::Csv)?);
    Ok(())
}
