use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use congestion_core::learning::{DiscountSequence, SIGNED_MW_MAX_RATE};
use congestion_core::{CongestionModel, ProductDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::spec::EXAMPLE_NETWORK;

/// Largest discount used with REP and signed multiplicative weights in
/// simulations; the regret bound for both needs `γ_τ ≤ 1/2`.
pub const CAPPED_RATE: f64 = SIGNED_MW_MAX_RATE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Hedge,
    Rep,
    /// Signed multiplicative weights fed with `m_p = ℓ_p / ρ`.
    MwCustom,
}

impl Algorithm {
    pub fn needs_rate_cap(self) -> bool {
        matches!(self, Algorithm::Rep | Algorithm::MwCustom)
    }

    pub fn needs_interior_start(self) -> bool {
        matches!(self, Algorithm::Hedge | Algorithm::MwCustom)
    }
}

impl FromStr for Algorithm {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hedge" => Ok(Algorithm::Hedge),
            "rep" => Ok(Algorithm::Rep),
            "mw-custom" => Ok(Algorithm::MwCustom),
            _ => Err(SimError::Config(format!(
                "unknown algorithm {s:?} (expected hedge, rep or mw-custom)"
            ))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Hedge => "hedge",
            Algorithm::Rep => "rep",
            Algorithm::MwCustom => "mw-custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDistribution {
    Uniform,
    /// Flat-Dirichlet draw per population from the configured seed.
    Random,
    Explicit(Vec<Vec<f64>>),
}

impl InitialDistribution {
    pub fn resolve(&self, model: &CongestionModel, seed: u64) -> Result<ProductDistribution> {
        match self {
            InitialDistribution::Uniform => Ok(ProductDistribution::uniform(model)),
            InitialDistribution::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let blocks = model
                    .bundle_counts()
                    .into_iter()
                    .map(|n| {
                        let w: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
                        let s: f64 = w.iter().sum();
                        w.into_iter().map(|x: f64| x / s).collect()
                    })
                    .collect();
                Ok(ProductDistribution::new(blocks)?)
            }
            InitialDistribution::Explicit(blocks) => {
                let mu = ProductDistribution::new(blocks.clone())?;
                mu.check_shape(model)?;
                Ok(mu)
            }
        }
    }
}

/// `uniform`, `random`, or explicit blocks `a,b,c;d,e,f` (one block per
/// population).
impl FromStr for InitialDistribution {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(InitialDistribution::Uniform),
            "random" => Ok(InitialDistribution::Random),
            _ => parse_blocks(s).map(InitialDistribution::Explicit),
        }
    }
}

impl fmt::Display for InitialDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialDistribution::Uniform => f.write_str("uniform"),
            InitialDistribution::Random => f.write_str("random"),
            InitialDistribution::Explicit(blocks) => {
                let parts: Vec<String> = blocks
                    .iter()
                    .map(|b| b.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
                    .collect();
                f.write_str(&parts.join(";"))
            }
        }
    }
}

/// Parses `a,b;c,d` into per-population vectors.
pub fn parse_blocks(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|block| {
            block
                .split(',')
                .map(|x| {
                    x.trim().parse::<f64>().map_err(|_| {
                        SimError::Config(format!("cannot parse {x:?} in distribution {s:?}"))
                    })
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    /// Built-in name or path to a JSON game spec.
    pub game: String,
    pub algorithm: Algorithm,
    pub discounts: DiscountSequence,
    /// Learning rates decoupled from the discounts. Exploration only: the
    /// regret bounds assume rates equal to discounts.
    pub learning_rates: Option<DiscountSequence>,
    pub horizon: usize,
    pub init: InitialDistribution,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Radius for the density-of-distant-iterates diagnostic.
    pub density_epsilon: f64,
    pub write_svg: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            game: EXAMPLE_NETWORK.to_string(),
            algorithm: Algorithm::Hedge,
            discounts: DiscountSequence::harmonic(20.0, 10.0).expect("valid default"),
            learning_rates: None,
            horizon: 10_000,
            init: InitialDistribution::Uniform,
            seed: 0,
            out: None,
            density_epsilon: 0.05,
            write_svg: false,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(SimError::Config("horizon must be at least 1".into()));
        }
        if !(self.density_epsilon.is_finite() && self.density_epsilon > 0.0) {
            return Err(SimError::Config(format!(
                "density epsilon must be positive, got {}",
                self.density_epsilon
            )));
        }
        for seq in std::iter::once(&self.discounts).chain(&self.learning_rates) {
            if let Some(len) = seq.len_limit() {
                if len <= self.horizon {
                    return Err(SimError::Config(format!(
                        "explicit rate list has {len} values, horizon {} needs {}",
                        self.horizon,
                        self.horizon + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Discounts actually applied: capped at 1/2 for REP and mw-custom.
    pub fn effective_discounts(&self) -> Result<DiscountSequence> {
        self.capped(&self.discounts)
    }

    pub fn effective_learning_rates(&self) -> Result<DiscountSequence> {
        self.capped(self.learning_rates.as_ref().unwrap_or(&self.discounts))
    }

    fn capped(&self, seq: &DiscountSequence) -> Result<DiscountSequence> {
        if self.algorithm.needs_rate_cap() {
            Ok(seq.clone().with_cap(CAPPED_RATE)?)
        } else {
            Ok(seq.clone())
        }
    }

    pub fn initial_distribution(&self, model: &CongestionModel) -> Result<ProductDistribution> {
        let mu = self.init.resolve(model, self.seed)?;
        if self.algorithm.needs_interior_start() {
            if let Some((k, _)) = mu
                .blocks()
                .iter()
                .enumerate()
                .find(|(_, b)| b.len() > 1 && b.contains(&0.0))
            {
                return Err(SimError::Config(format!(
                    "{} needs a strictly positive initial distribution; population {k} has a zero entry",
                    self.algorithm
                )));
            }
        }
        Ok(mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::load_game;

    #[test]
    fn parse_algorithms_and_inits() {
        assert_eq!(
            "mw-custom".parse::<Algorithm>().unwrap(),
            Algorithm::MwCustom
        );
        assert!("sgd".parse::<Algorithm>().is_err());
        assert_eq!(
            "0.5,0.5;1,0,0".parse::<InitialDistribution>().unwrap(),
            InitialDistribution::Explicit(vec![vec![0.5, 0.5], vec![1.0, 0.0, 0.0]])
        );
        assert!("0.5,x".parse::<InitialDistribution>().is_err());
        let init = InitialDistribution::Explicit(vec![vec![0.25, 0.75]]);
        assert_eq!(
            init.to_string().parse::<InitialDistribution>().unwrap(),
            init
        );
    }

    #[test]
    fn random_init_is_seeded() {
        let game = load_game(EXAMPLE_NETWORK).unwrap();
        let a = InitialDistribution::Random.resolve(&game.model, 3).unwrap();
        let b = InitialDistribution::Random.resolve(&game.model, 3).unwrap();
        let c = InitialDistribution::Random.resolve(&game.model, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.is_interior());
    }

    #[test]
    fn hedge_rejects_boundary_start() {
        let game = load_game(EXAMPLE_NETWORK).unwrap();
        let mut config = SimulationConfig {
            init: "1,0,0;0.2,0.3,0.5".parse().unwrap(),
            ..SimulationConfig::default()
        };
        assert!(config.initial_distribution(&game.model).is_err());
        config.algorithm = Algorithm::Rep;
        assert!(config.initial_distribution(&game.model).is_ok());
        config.init = "0.5,0.5;1".parse().unwrap();
        assert!(config.initial_distribution(&game.model).is_err());
    }

    #[test]
    fn rate_cap_applies_to_rep_only() {
        let mut config = SimulationConfig::default();
        assert_eq!(config.effective_discounts().unwrap().gamma(0), Some(2.0));
        config.algorithm = Algorithm::Rep;
        assert_eq!(config.effective_discounts().unwrap().gamma(0), Some(0.5));
        assert_eq!(config.effective_discounts().unwrap().gamma(40), Some(0.4));
    }

    #[test]
    fn validation() {
        let mut config = SimulationConfig {
            horizon: 0,
            ..SimulationConfig::default()
        };
        assert!(config.validate().is_err());
        config.horizon = 5;
        config.discounts = DiscountSequence::explicit(vec![0.1; 5]).unwrap();
        assert!(config.validate().is_err());
        config.discounts = DiscountSequence::explicit(vec![0.1; 6]).unwrap();
        assert!(config.validate().is_ok());
    }
}
