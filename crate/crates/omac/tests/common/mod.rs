use std::path::PathBuf;

use omac::ExperimentConfig;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// The shipped pendulum config cut down to two seeds and a few environments.
pub fn small_pendulum() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&config_path("pendulum.toml")).unwrap();
    cfg.seeds = vec![0, 1];
    cfg.outer_iterations = 4;
    cfg.validate().unwrap();
    cfg
}
