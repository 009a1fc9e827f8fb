//! Serializable run reports: one residual per check, pass iff every residual
//! is below its tolerance.

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Check {
    pub id: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(id: impl Into<String>, residual: f64, tol: f64) -> Self {
        Check {
            id: id.into(),
            residual,
            tol,
            pass: residual < tol,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(command: &str, config_digest: String, seed: u64) -> Self {
        RunReport {
            command: command.to_string(),
            config_digest,
            seed,
            checks: Vec::new(),
            pass: true,
            wall_time_s: 0.0,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }
}

/// Hex SHA-256 of the raw config file bytes.
pub fn digest(path: &std::path::Path) -> anyhow::Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}
