//! Monte Carlo certification of good scales.
//!
//! The disorder is i.i.d., so the law of `Λ_L(x)` does not depend on `x`; every
//! certificate samples boxes centred at the origin only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, Site};
use crate::operator::FiniteHamiltonian;
use crate::resolvent::classify_box;
use crate::stats::{wilson, ProportionEstimate};

use super::config::ExperimentConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Pass when the whole interval clears the target, fail when it lies below.
    pub fn from_interval(est: &ProportionEstimate, target: f64) -> Self {
        if est.lower >= target {
            Verdict::Pass
        } else if est.upper < target {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodScaleCertificate {
    pub scale: f64,
    pub energy: f64,
    pub estimate: ProportionEstimate,
    /// Samples whose energy sat numerically on the box spectrum (counted as not good).
    pub singular: usize,
    /// `1 - L^{-pd}`
    pub target: f64,
    pub level: f64,
    pub verdict: Verdict,
}

/// `1 - L^{-pd}`
pub fn good_target(scale: f64, p: f64, d: usize) -> f64 {
    1.0 - scale.powf(-p * d as f64)
}

pub fn certify_good_scale(
    config: &ExperimentConfig,
    scale: f64,
    energy: f64,
) -> Result<GoodScaleCertificate> {
    let n = config.seeds.samples;
    let params = config.msa.goodness();
    let bx = LatticeBox::new(Site::origin(config.dimension), scale);
    let outcomes: Vec<(bool, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let field =
                DisorderField::for_sample(config.seeds.master, i as u64, config.distribution);
            let h = FiniteHamiltonian::assemble(&bx, &field);
            match classify_box(&h, energy, &params) {
                Ok(r) => Ok((r.good, false)),
                Err(Error::NearSingular { .. }) => Ok((false, true)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let good = outcomes.iter().filter(|o| o.0).count();
    let singular = outcomes.iter().filter(|o| o.1).count();
    let level = config.certify.level;
    let estimate = wilson(good, n, level);
    let target = good_target(scale, config.msa.p, config.dimension);
    Ok(GoodScaleCertificate {
        scale,
        energy,
        estimate,
        singular,
        target,
        level,
        verdict: Verdict::from_interval(&estimate, target),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalCertificate {
    pub scale: f64,
    pub certificates: Vec<GoodScaleCertificate>,
    /// Index of the lowest point estimate.
    pub worst: Option<usize>,
    /// Pass only if every grid point passes; fail if any fails.
    pub verdict: Option<Verdict>,
}

pub fn certify_interval(
    config: &ExperimentConfig,
    scale: f64,
    energies: &[f64],
) -> Result<IntervalCertificate> {
    let certificates = energies
        .iter()
        .map(|&e| certify_good_scale(config, scale, e))
        .collect::<Result<Vec<_>>>()?;
    let worst = (0..certificates.len()).min_by(|&a, &b| {
        certificates[a]
            .estimate
            .estimate
            .total_cmp(&certificates[b].estimate.estimate)
    });
    let verdict = (!certificates.is_empty()).then(|| {
        if certificates.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if certificates.iter().all(|c| c.verdict == Verdict::Pass) {
            Verdict::Pass
        } else {
            Verdict::Inconclusive
        }
    });
    Ok(IntervalCertificate {
        scale,
        certificates,
        worst,
        verdict,
    })
}

/// The certification energy grid: explicit energies, or evenly spaced points over `I`.
pub fn certify_energies(config: &ExperimentConfig) -> Vec<f64> {
    let c = &config.certify;
    if !c.energies.is_empty() {
        return c.energies.clone();
    }
    let i = config.interval;
    match c.grid_points {
        0 => vec![],
        1 => vec![config.midpoint()],
        n => (0..n)
            .map(|k| i.lo + i.width() * k as f64 / (n - 1) as f64)
            .collect(),
    }
}
