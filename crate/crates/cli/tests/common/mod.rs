//! Shared helpers for CLI integration tests.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evpricer"))
}

/// Fresh scratch directory under the target-specific temp root.
pub fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("evpricer-cli-tests")
        .join(format!("{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}

/// Small 24-hour scenario used by most CLI tests.
pub fn write_test_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("scenario.json");
    let json = r#"{
        "seed": 99,
        "horizon_hours": 24,
        "stations": [
            {"id": 0, "level": "L3", "poles": 2, "capacity": 4, "service_rate": 2.2,
             "power": 150.0, "grid_price": 0.2, "price_cap": 0.8, "location": [1.0, 1.0]},
            {"id": 1, "level": "L3", "poles": 3, "capacity": 6, "service_rate": 2.3,
             "power": 90.0, "grid_price": 0.2, "price_cap": 0.8, "location": [4.0, 2.0]},
            {"id": 2, "level": "L2", "poles": 2, "capacity": 4, "service_rate": 0.4,
             "power": 20.0, "grid_price": 0.2, "price_cap": 0.8, "location": [2.0, 4.0]}
        ],
        "demand": {
            "hourly_counts": [2,1,1,1,2,3,4,6,8,8,7,6,6,7,8,8,7,6,4,3,2,2,1,1],
            "area": [[0.0, 0.0], [5.0, 5.0]]
        },
        "travel": { "mode": "euclidean", "speed_kmh": 40.0 },
        "choice": { "theta": 0.01, "gumbel_scale": 1.0, "msa_max_iters": 60, "msa_tol": 0.001 },
        "cem": { "population": 24, "elite_ratio": 0.1, "max_iters": 8,
                 "psa_frequency": 4, "window_hours": 1 }
    }"#;
    std::fs::write(&path, json).expect("write test scenario");
    path
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

pub fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "command failed ({:?}):\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}
