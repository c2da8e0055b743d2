//! Engine configuration: dimension, truncation bounds and the sampling
//! seed used by the audit suite.

use crate::error::{EngineError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    /// Number of polynomial variables.
    pub d: usize,
    /// Bound on coefficient degrees in random samples.
    pub max_poly_degree: u32,
    /// Bound on word lengths for homotopy blocks.
    pub max_word_length: usize,
    /// Bound on total slot order for homotopy blocks.
    pub max_total_order: u32,
    /// Truncation order of the deformation parameter.
    pub hbar_order: usize,
    /// Seed for reproducible property sampling.
    pub sample_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            d: 2,
            max_poly_degree: 3,
            max_word_length: 6,
            max_total_order: 10,
            hbar_order: 3,
            sample_seed: 42,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(EngineError::argument("dimension must be positive"));
        }
        if self.max_word_length == 0 {
            return Err(EngineError::argument("word length bound must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_validates() {
        assert!(EngineConfig::default().validate().is_ok());
        let mut bad = EngineConfig::default();
        bad.d = 0;
        assert!(bad.validate().is_err());
    }
}
