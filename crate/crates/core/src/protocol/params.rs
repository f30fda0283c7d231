use rand::Rng;
use serde::{Deserialize, Serialize};

use super::message::Rank;
use crate::error::{Error, Result};

/// Named parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// c = 1000, q = 0.9. Only meaningful for astronomically large n: below
    /// that the role probability clamps to 1 and the quorum exceeds n.
    Paper,
    /// c = 16, q = 0.8, usable for n in [128, 4096].
    Desk,
}

impl Preset {
    pub fn coefficients(self) -> (f64, f64) {
        match self {
            Preset::Paper => (1000.0, 0.9),
            Preset::Desk => (16.0, 0.8),
        }
    }
}

/// What every node is told up front. `quorum_high_analysis` is carried for
/// the metrics only; no transition reads it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n_estimate: u64,
    pub role_coefficient: f64,
    pub quorum_fraction: f64,
    pub quorum_low: u64,
    pub quorum_high_analysis: u64,
    pub rank_space_max: u64,
    pub role_probability: f64,
}

fn log2(n: u64) -> f64 {
    (n as f64).log2()
}

// Ceiling that ignores floating noise just above an integer.
fn ceil_tol(x: f64) -> u64 {
    (x - 1e-9).ceil().max(0.0) as u64
}

impl ProtocolParams {
    /// Role probability `min(1, c·log₂ n / n)` and approval threshold
    /// `⌈q·c·log₂ n⌉`, both evaluated at `n_estimate`.
    pub fn new(n_estimate: u64, c: f64, quorum_fraction: f64) -> Result<Self> {
        if n_estimate < 2 {
            return Err(Error::Parameter(format!(
                "n_estimate must be >= 2, got {n_estimate}"
            )));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Parameter(format!(
                "role coefficient {c} must be positive"
            )));
        }
        if !(quorum_fraction > 0.0 && quorum_fraction <= 1.0) {
            return Err(Error::Parameter(format!(
                "quorum fraction {quorum_fraction} not in (0, 1]"
            )));
        }
        let mu = c * log2(n_estimate);
        let rank_space_max = n_estimate.checked_pow(4).ok_or_else(|| {
            Error::Parameter(format!(
                "n_estimate {n_estimate} too large for a 64-bit rank space"
            ))
        })?;
        Ok(Self {
            n_estimate,
            role_coefficient: c,
            quorum_fraction,
            quorum_low: ceil_tol(quorum_fraction * mu).max(1),
            quorum_high_analysis: ceil_tol((2.0 - quorum_fraction) * mu).max(1),
            rank_space_max,
            role_probability: (mu / n_estimate as f64).min(1.0),
        })
    }

    pub fn preset(preset: Preset, n_estimate: u64) -> Result<Self> {
        let (c, q) = preset.coefficients();
        Self::new(n_estimate, c, q)
    }

    pub fn paper(n_estimate: u64) -> Result<Self> {
        Self::preset(Preset::Paper, n_estimate)
    }

    pub fn desk(n_estimate: u64) -> Result<Self> {
        Self::preset(Preset::Desk, n_estimate)
    }

    /// Overrides the approval threshold (forced-roles experiments).
    pub fn with_quorum_low(mut self, quorum_low: u64) -> Result<Self> {
        if quorum_low == 0 {
            return Err(Error::Parameter("quorum_low must be >= 1".into()));
        }
        self.quorum_low = quorum_low;
        Ok(self)
    }

    /// Expected number of candidates (and of referees) when the estimate is exact.
    pub fn expected_role_count(&self) -> f64 {
        self.role_coefficient * log2(self.n_estimate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quorum_low < 1 {
            return Err(Error::Parameter("quorum_low must be >= 1".into()));
        }
        if self.rank_space_max < self.n_estimate.saturating_mul(self.n_estimate) {
            return Err(Error::Parameter(
                "rank space smaller than n_estimate²".into(),
            ));
        }
        if !(self.role_probability > 0.0 && self.role_probability <= 1.0) {
            return Err(Error::Parameter("role probability not in (0, 1]".into()));
        }
        Ok(())
    }
}

/// The random choices a node makes when it wakes: its rank and the two
/// independent role coins, drawn in that order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coins {
    pub rank: Rank,
    pub candidate: bool,
    pub referee: bool,
}

impl Coins {
    pub fn draw(params: &ProtocolParams, rng: &mut impl Rng) -> Self {
        let rank = Rank(rng.gen_range(1..=params.rank_space_max));
        let candidate = rng.gen_bool(params.role_probability);
        let referee = rng.gen_bool(params.role_probability);
        Coins {
            rank,
            candidate,
            referee,
        }
    }
}
