//! Shared fixtures: a deterministic synthetic master file and config bodies.

use std::path::{Path, PathBuf};

/// Synthetic master CSV starting 2000-01: three indicators (growing level,
/// drifting rate, stationary sentiment) and a sparse GDP column whose
/// quarterly growth aggregates the monthly signal exactly.
pub fn master_body(n_months: usize) -> String {
    let mut lines = vec!["DATE,IP,RATE,SENT,GDP".to_string()];
    let mut ip_level = 100.0;
    let mut gdp = 100.0;
    let mut quarter_growth = 0.0;
    for m in 0..n_months {
        let year = 2000 + (m / 12) as i32;
        let month = (m % 12) + 1;
        let t = m as f64;
        let g1 = 0.004 + 0.002 * (0.3 * t).sin();
        ip_level *= g1.exp();
        let rate = 5.0 + 0.002 * t + 0.4 * (0.17 * t + 1.0).sin();
        let sent = 0.5 * (0.23 * t).sin() + 0.05 * (0.05 * t).cos();
        quarter_growth += g1 + 0.01 * sent;
        let gdp_cell = if month % 3 == 0 {
            gdp *= quarter_growth.exp();
            quarter_growth = 0.0;
            format!("{gdp}")
        } else {
            String::new()
        };
        lines.push(format!("{year:04}-{month:02}-01,{ip_level},{rate},{sent},{gdp_cell}"));
    }
    lines.join("\n") + "\n"
}

/// Config over the synthetic master with fast search settings.
pub fn config_body(seed: u64, models: &str, lags: &str, mode: &str) -> String {
    format!(
        r#"version = 1
country = "synthetic"
master = "master.csv"
out_dir = "out"
seed = {seed}

[columns]
IP = "log_diff"
RATE = "diff"
SENT = "level"

[lags]
counts = {lags}

[models]
kinds = {models}

[models.elastic_net]
folds = 3
n_alphas = 20
mix_grid = [0.5]
bootstrap = 50

[reconciliation]
mode = "{mode}"
base_level = 100.0
"#
    )
}

/// Writes master + config into `dir` and returns the config path.
pub fn setup(dir: &Path, config: &str, n_months: usize) -> PathBuf {
    std::fs::write(dir.join("master.csv"), master_body(n_months)).unwrap();
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}
