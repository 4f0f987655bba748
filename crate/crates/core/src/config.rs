use serde::{Deserialize, Serialize};

/// Environment variable overriding [`Config::dense_cap`].
pub const DENSE_CAP_ENV: &str = "MTLS_DENSE_CAP";

/// Numerical tolerances and size caps shared by every stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// `Q` of the partitioned QR is materialized only when `m <= q_cap`.
    pub q_cap: usize,
    /// Largest number of entries allowed in an explicit Kronecker-structured matrix.
    pub dense_cap: usize,
    pub svd_eps: f64,
    pub svd_max_iter: usize,
    /// Inverse-iteration steps used to polish the trailing singular vector.
    pub refine_iter: usize,
    /// Multiplier of machine epsilon for the genericity-gap and pivot tests.
    pub gap_factor: f64,
    /// Multiplier of machine epsilon for the consistency test `||r|| <= c * eps * ||b||`.
    pub consistent_factor: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            q_cap: 2000,
            dense_cap: 10_000_000,
            svd_eps: f64::EPSILON,
            svd_max_iter: 200_000,
            refine_iter: 20,
            gap_factor: 1e2,
            consistent_factor: 1e3,
        }
    }
}

impl Config {
    /// Defaults, with `dense_cap` taken from `MTLS_DENSE_CAP` when it parses.
    pub fn from_env() -> Self {
        let mut cfg = Config::default();
        if let Some(cap) = std::env::var(DENSE_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
        {
            cfg.dense_cap = cap;
        }
        cfg
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    pub(crate) fn check_dense(&self, rows: usize, cols: usize) -> crate::Result<()> {
        let entries = rows.saturating_mul(cols);
        if entries > self.dense_cap {
            return Err(crate::MtlsError::SizeOverflow { entries, cap: self.dense_cap });
        }
        Ok(())
    }
}
