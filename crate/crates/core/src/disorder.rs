//! Random potentials `V_ω(n) = λ ω_n`.
//!
//! The field is counter-based: the value at a site is a pure function of the
//! master seed and the site coordinates, so every box sees the same `ω`
//! regardless of how it was reached. A ChaCha8 stream keyed by the seed is
//! selected by a hash of the coordinates.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Region, Site};

/// Single-site law `μ` (before the coupling is applied).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    /// `low` with probability `1 - weight`, `high` with probability `weight`.
    Bernoulli {
        low: f64,
        high: f64,
        weight: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Point {
        value: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    #[serde(flatten)]
    pub kind: DistributionKind,
    pub coupling: f64,
}

impl Distribution {
    pub fn new(kind: DistributionKind, coupling: f64) -> Result<Self> {
        let d = Distribution { kind, coupling };
        d.validate()?;
        Ok(d)
    }

    /// Bernoulli on `{0, 1}` with weight 1/2.
    pub fn half_bernoulli(coupling: f64) -> Self {
        Distribution {
            kind: DistributionKind::Bernoulli {
                low: 0.0,
                high: 1.0,
                weight: 0.5,
            },
            coupling,
        }
    }

    pub fn point(value: f64, coupling: f64) -> Self {
        Distribution {
            kind: DistributionKind::Point { value },
            coupling,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coupling.is_finite() {
            return Err(Error::param("coupling", "must be finite"));
        }
        match self.kind {
            DistributionKind::Bernoulli { low, high, weight } => {
                if !(weight > 0.0 && weight < 1.0) {
                    return Err(Error::param(
                        "weight",
                        format!("need 0 < q < 1, got {weight}"),
                    ));
                }
                if !(low.is_finite() && high.is_finite()) || low == high {
                    return Err(Error::param(
                        "bernoulli",
                        "support must be two distinct finite points",
                    ));
                }
            }
            DistributionKind::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::param(
                        "uniform",
                        format!("need low < high, got [{low}, {high}]"),
                    ));
                }
            }
            DistributionKind::Point { value } => {
                if !value.is_finite() {
                    return Err(Error::param("point", "value must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Inverse-CDF map of a uniform variate `u ∈ [0,1)` to `λ·X`.
    pub fn sample(&self, u: f64) -> f64 {
        let x = match self.kind {
            DistributionKind::Bernoulli { low, high, weight } => {
                if u < weight {
                    high
                } else {
                    low
                }
            }
            DistributionKind::Uniform { low, high } => low + (high - low) * u,
            DistributionKind::Point { value } => value,
        };
        self.coupling * x
    }

    /// CDF of `λ·X` (right-continuous).
    pub fn cdf(&self, v: f64) -> f64 {
        let lam = self.coupling;
        if lam == 0.0 {
            return if v >= 0.0 { 1.0 } else { 0.0 };
        }
        // P(λX ≤ v)
        let below = |x: f64| x * lam <= v;
        match self.kind {
            DistributionKind::Bernoulli { low, high, weight } => {
                let mut p = 0.0;
                if below(low) {
                    p += 1.0 - weight;
                }
                if below(high) {
                    p += weight;
                }
                p
            }
            DistributionKind::Uniform { low, high } => {
                let (a, b) = if lam > 0.0 {
                    (low * lam, high * lam)
                } else {
                    (high * lam, low * lam)
                };
                ((v - a) / (b - a)).clamp(0.0, 1.0)
            }
            DistributionKind::Point { value } => {
                if below(value) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `max |λ s|` over the support.
    pub fn max_abs(&self) -> f64 {
        let m = match self.kind {
            DistributionKind::Bernoulli { low, high, .. } => low.abs().max(high.abs()),
            DistributionKind::Uniform { low, high } => low.abs().max(high.abs()),
            DistributionKind::Point { value } => value.abs(),
        };
        m * self.coupling.abs()
    }

    /// Smallest and largest value of `λ·X`.
    pub fn range(&self) -> (f64, f64) {
        let (a, b) = match self.kind {
            DistributionKind::Bernoulli { low, high, .. } => (low, high),
            DistributionKind::Uniform { low, high } => (low, high),
            DistributionKind::Point { value } => (value, value),
        };
        let (a, b) = (a * self.coupling, b * self.coupling);
        (a.min(b), a.max(b))
    }
}

/// A potential on `Z^d`.
pub trait Potential: Sync {
    fn value(&self, site: &Site) -> f64;
}

/// 64-bit finalizer from SplitMix64; used only to key streams.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn site_key(site: &Site) -> u64 {
    let mut h = mix64(site.dim() as u64);
    for &c in site.coords() {
        h = mix64(h ^ (c as u64));
    }
    h
}

/// Seed of the `index`-th disorder sample of an experiment.
pub fn sample_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// `ω` realised from a seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderField {
    pub seed: u64,
    pub distribution: Distribution,
}

impl DisorderField {
    pub fn new(seed: u64, distribution: Distribution) -> Self {
        DisorderField { seed, distribution }
    }

    /// The `index`-th independent sample of an experiment.
    pub fn for_sample(master: u64, index: u64, distribution: Distribution) -> Self {
        Self::new(sample_seed(master, index), distribution)
    }

    /// The uniform variate attached to a site.
    pub fn uniform_at(&self, site: &Site) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(site_key(site));
        rng.random::<f64>()
    }

    pub fn potential_at(&self, site: &Site) -> f64 {
        self.distribution.sample(self.uniform_at(site))
    }

    pub fn potentials(&self, sites: &[Site]) -> Vec<f64> {
        sites.iter().map(|s| self.potential_at(s)).collect()
    }
}

impl Potential for DisorderField {
    fn value(&self, site: &Site) -> f64 {
        self.potential_at(site)
    }
}

/// Same value everywhere (`V ≡ c`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantPotential(pub f64);

impl Potential for ConstantPotential {
    fn value(&self, _: &Site) -> f64 {
        self.0
    }
}

/// Explicit values on finitely many sites, a default elsewhere.
#[derive(Clone, Debug, Default)]
pub struct TablePotential {
    pub values: HashMap<Site, f64>,
    pub default: f64,
}

impl TablePotential {
    pub fn new(default: f64) -> Self {
        TablePotential {
            values: HashMap::new(),
            default,
        }
    }

    pub fn from_pairs(sites: &[Site], values: &[f64], default: f64) -> Self {
        TablePotential {
            values: sites.iter().cloned().zip(values.iter().copied()).collect(),
            default,
        }
    }

    pub fn set(&mut self, site: Site, v: f64) {
        self.values.insert(site, v);
    }
}

impl Potential for TablePotential {
    fn value(&self, site: &Site) -> f64 {
        self.values.get(site).copied().unwrap_or(self.default)
    }
}

/// `inside` on a region, `outside` elsewhere.
pub struct SplicedPotential<'a> {
    pub inside: &'a dyn Potential,
    pub outside: &'a dyn Potential,
    pub region: &'a dyn Region,
}

impl Potential for SplicedPotential<'_> {
    fn value(&self, site: &Site) -> f64 {
        if self.region.contains(site) {
            self.inside.value(site)
        } else {
            self.outside.value(site)
        }
    }
}

/// Checks that `statistic` depends only on the potential inside `region`:
/// the exterior is redrawn `trials` times from fresh seeds and the statistic
/// must never change.
pub fn event_sigma_algebra_check<T, F>(
    field: &DisorderField,
    region: &dyn Region,
    statistic: F,
    trials: usize,
) -> bool
where
    T: PartialEq,
    F: Fn(&dyn Potential) -> T,
{
    let reference = statistic(field);
    (0..trials as u64).all(|t| {
        let exterior = DisorderField::new(mix64(field.seed ^ mix64(t + 1)), field.distribution);
        let spliced = SplicedPotential {
            inside: field,
            outside: &exterior,
            region,
        };
        statistic(&spliced) == reference
    })
}
