//! Spectral reduction: the constants ledger, the reduced spectrum, notsobad
//! annuli with their singular sets, and membership probes for the layered
//! shell event and the key-theorem implication.
//!
//! The exponent `30M/K` is astronomically small at desk scale, so every probe
//! takes an effective exponent `θ` from the ledger: the derived value unless
//! an override was supplied. Reports carry both.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::Potential;
use crate::error::{Error, Result};
use crate::lattice::{Annulus, CoarseLattice, LatticeBox, Region, Site};
use crate::modes::ModeHost;
use crate::operator::{nearest_distance, FiniteHamiltonian, Interval};
use crate::percolation::{extract_shell, label_nodes, NodeKind, ShellGeometry};
use crate::resolvent::{classify_box, GoodnessParams};

/// Inputs of the constants ledger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsInput {
    pub m0: f64,
    pub eta0: f64,
    pub p0: f64,
    pub p: f64,
    pub b: f64,
    pub d: usize,
    pub rho: f64,
    /// Fixed `N2`, validated instead of searched.
    #[serde(default)]
    pub n2: Option<u32>,
    /// Replaces `ceil(3^{d+3} b)`.
    #[serde(default)]
    pub j: Option<u64>,
    /// Replaces `30M/K`.
    #[serde(default)]
    pub theta: Option<f64>,
}

impl ConstantsInput {
    pub fn new(m0: f64, eta0: f64, p0: f64, p: f64, b: f64, d: usize, rho: f64) -> Self {
        ConstantsInput {
            m0,
            eta0,
            p0,
            p,
            b,
            d,
            rho,
            n2: None,
            j: None,
            theta: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub input: ConstantsInput,
    pub n1: u32,
    /// `M = m0 / 30^{N1+2}`
    pub big_m: f64,
    /// `(1 + r)^{N1} = 2`
    pub r: f64,
    pub j: u64,
    /// `ceil(3^{d+3} b)`
    pub j_default: u64,
    /// `K = 1 + 2 J N1`
    pub k: f64,
    pub rho: f64,
    pub n2: u32,
    /// `β = ρ^{N2}`
    pub beta: f64,
    /// `c = 15M/K`
    pub c: f64,
    /// `μ = β/2`
    pub mu: f64,
    /// `30M/K`
    pub theta_default: f64,
    /// Effective exponent used by the probes.
    pub theta: f64,
}

/// Upper end of the `N2` search.
pub const MAX_N2: u32 = 10_000;

/// `N1 = min{n >= 1 : 2^{1/n} - 1 < p0}`
pub fn n1_for(p0: f64) -> u32 {
    (1u32..)
        .find(|&n| 2f64.powf(1.0 / n as f64) - 1.0 < p0)
        .unwrap()
}

pub fn derive_constants(input: ConstantsInput) -> Result<ConstantsLedger> {
    let ConstantsInput {
        m0,
        eta0,
        p0,
        p,
        b,
        d,
        rho,
        ..
    } = input;
    if !(m0 > 0.0) {
        return Err(Error::param("m0", "need m0 > 0"));
    }
    if !(eta0 > 0.0 && eta0 < 1.0) {
        return Err(Error::param("eta0", "need 0 < eta0 < 1"));
    }
    if !(p > 0.0 && p < p0) {
        return Err(Error::param(
            "p",
            format!("need 0 < p < p0, got p={p}, p0={p0}"),
        ));
    }
    if !(b >= 1.0) {
        return Err(Error::param("b", "need b >= 1"));
    }
    if d == 0 {
        return Err(Error::param("d", "need d >= 1"));
    }
    if !(1.0 / (1.0 + p0) < rho && rho < 1.0) {
        return Err(Error::param(
            "rho",
            format!("need 1/(1+p0) = {} < rho < 1, got {rho}", 1.0 / (1.0 + p0)),
        ));
    }
    let n1 = n1_for(p0);
    let big_m = m0 / 30f64.powi(n1 as i32 + 2);
    let r = 2f64.powf(1.0 / n1 as f64) - 1.0;
    let j_default = (3f64.powi(d as i32 + 3) * b).ceil() as u64;
    let j = match input.j {
        Some(0) => return Err(Error::param("j", "need J >= 1")),
        Some(j) => j,
        None => j_default,
    };
    let k = 1.0 + 2.0 * j as f64 * n1 as f64;
    let gap = p0 - p;
    let lhs = |n: u32| (n as f64 + 1.0) * rho.powi(n as i32);
    let n2 = match input.n2 {
        Some(0) => return Err(Error::param("n2", "need N2 >= 1")),
        Some(n) => {
            if !(lhs(n) < gap) {
                return Err(Error::InfeasibleConstants {
                    rho,
                    best: lhs(n),
                    gap,
                });
            }
            n
        }
        None => match (1..=MAX_N2).find(|&n| lhs(n) < gap) {
            Some(n) => n,
            None => {
                let best = (1..=MAX_N2).map(lhs).fold(f64::INFINITY, f64::min);
                return Err(Error::InfeasibleConstants { rho, best, gap });
            }
        },
    };
    let beta = rho.powi(n2 as i32);
    let theta_default = 30.0 * big_m / k;
    let theta = match input.theta {
        Some(t) if !(t > 0.0) => return Err(Error::param("theta", "need theta > 0")),
        Some(t) => t,
        None => theta_default,
    };
    Ok(ConstantsLedger {
        input,
        n1,
        big_m,
        r,
        j,
        j_default,
        k,
        rho,
        n2,
        beta,
        c: 15.0 * big_m / k,
        mu: beta / 2.0,
        theta_default,
        theta,
    })
}

impl ConstantsLedger {
    /// `L_n = L^{ρ^n}`, `n = 1..N2`.
    pub fn scales(&self, side: f64) -> Vec<f64> {
        (1..=self.n2)
            .map(|n| side.powf(self.rho.powi(n as i32)))
            .collect()
    }

    /// `2 e^{-θ L_n}`
    pub fn survival_thresholds(&self, side: f64) -> Vec<f64> {
        self.scales(side)
            .iter()
            .map(|l| 2.0 * (-self.theta * l).exp())
            .collect()
    }

    /// `(N2 + 1) β d`
    pub fn count_exponent(&self) -> f64 {
        (self.n2 as f64 + 1.0) * self.beta * self.input.d as f64
    }

    /// `c` that pairs with the effective exponent: `θ/2`.
    pub fn c_effective(&self) -> f64 {
        self.theta / 2.0
    }

    /// Name and value of every entry that differs from its derived default.
    pub fn overrides(&self) -> Vec<(&'static str, f64, f64)> {
        let mut out = Vec::new();
        if self.j != self.j_default {
            out.push(("j", self.j as f64, self.j_default as f64));
        }
        if self.theta != self.theta_default {
            out.push(("theta", self.theta, self.theta_default));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyAudit {
    pub energy: f64,
    /// `dist(E, σ^{(I)}(H_{Λ_{L_n}}))`, `n = 1..N2`.
    pub distances: Vec<f64>,
    pub survived: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSpectrum {
    pub side: f64,
    pub scales: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub base: Vec<f64>,
    pub survivors: Vec<f64>,
    pub audit: Vec<EnergyAudit>,
    pub theta: f64,
    pub theta_default: f64,
}

/// Survival filter on already computed spectra.
pub fn reduce_spectra(
    base: &[f64],
    inner: &[Vec<f64>],
    thresholds: &[f64],
) -> (Vec<f64>, Vec<EnergyAudit>) {
    assert_eq!(inner.len(), thresholds.len());
    let mut survivors = Vec::new();
    let audit = base
        .iter()
        .map(|&e| {
            let distances: Vec<f64> = inner.iter().map(|s| nearest_distance(s, e)).collect();
            let survived = distances.iter().zip(thresholds).all(|(d, t)| d <= t);
            if survived {
                survivors.push(e);
            }
            EnergyAudit {
                energy: e,
                distances,
                survived,
            }
        })
        .collect();
    (survivors, audit)
}

/// `σ^{(I,red)}(H_{Λ_L(x0)})`
pub fn reduced_spectrum(
    potential: &dyn Potential,
    x0: &Site,
    side: f64,
    interval: &Interval,
    ledger: &ConstantsLedger,
) -> Result<ReducedSpectrum> {
    let scales = ledger.scales(side);
    if scales.last().is_some_and(|&l| l < 2.0) {
        return Err(Error::Precondition(format!(
            "innermost scale L^beta = {} is below 2",
            scales.last().unwrap()
        )));
    }
    let spectrum = |l: f64| -> Result<Vec<f64>> {
        let h = FiniteHamiltonian::assemble(&LatticeBox::new(x0.clone(), l), potential);
        Ok(h.diagonalize()?.values_in(interval))
    };
    let base = spectrum(side)?;
    let inner = scales
        .iter()
        .map(|&l| spectrum(l))
        .collect::<Result<Vec<_>>>()?;
    let thresholds = ledger.survival_thresholds(side);
    let (survivors, audit) = reduce_spectra(&base, &inner, &thresholds);
    Ok(ReducedSpectrum {
        side,
        scales,
        thresholds,
        base,
        survivors,
        audit,
        theta: ledger.theta,
        theta_default: ledger.theta_default,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountCheck {
    pub count: usize,
    pub bound: f64,
    pub holds: bool,
}

/// `#σ^{red} <= C L^{(N2+1)βd}`
pub fn count_bound_check(
    reduced: &ReducedSpectrum,
    ledger: &ConstantsLedger,
    constant: f64,
) -> CountCheck {
    let count = reduced.survivors.len();
    let bound = constant * reduced.side.powf(ledger.count_exponent());
    CountCheck {
        count,
        bound,
        holds: count as f64 <= bound,
    }
}

/// Goodness of `Λ_side(center)`.
pub trait BoxOracle: Sync {
    fn is_good(&self, center: &Site, side: f64) -> bool;
}

impl<F: Fn(&Site, f64) -> bool + Sync> BoxOracle for F {
    fn is_good(&self, center: &Site, side: f64) -> bool {
        self(center, side)
    }
}

/// Direct classification at a fixed energy, memoized.
pub struct GoodnessOracle<'a> {
    pub potential: &'a dyn Potential,
    pub energy: f64,
    pub params: GoodnessParams,
    memo: Mutex<HashMap<(Site, u64), bool>>,
}

impl<'a> GoodnessOracle<'a> {
    pub fn new(potential: &'a dyn Potential, energy: f64, params: GoodnessParams) -> Self {
        GoodnessOracle {
            potential,
            energy,
            params,
            memo: Mutex::new(HashMap::new()),
        }
    }
}

impl BoxOracle for GoodnessOracle<'_> {
    fn is_good(&self, center: &Site, side: f64) -> bool {
        let key = (center.clone(), side.to_bits());
        if let Some(&v) = self.memo.lock().unwrap().get(&key) {
            return v;
        }
        let h = FiniteHamiltonian::assemble(&LatticeBox::new(center.clone(), side), self.potential);
        let v = classify_box(&h, self.energy, &self.params).is_ok_and(|r| r.good);
        self.memo.lock().unwrap().insert(key, v);
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularSet {
    pub centers: Vec<Site>,
    /// Side of the boxes `Λ_{3 L_{N2}}(r_i)` making up the covered region.
    pub side: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NotsobadReport {
    pub notsobad: bool,
    pub singular: SingularSet,
    pub points: usize,
    pub uncovered: usize,
    /// How many points were first covered at level `n` (index `n - 1`).
    pub covered_at: Vec<usize>,
    pub max_singular: usize,
}

/// Is the annulus `Λ_{L,L'}(x0)` notsobad with at most `max_singular` exceptional boxes?
pub fn notsobad_check(
    oracle: &dyn BoxOracle,
    x0: &Site,
    outer: f64,
    inner: f64,
    max_singular: usize,
    ledger: &ConstantsLedger,
) -> Result<NotsobadReport> {
    if !(outer.powf(ledger.rho) < (outer - inner) / 7.0) {
        return Err(Error::Precondition(format!(
            "need L^rho < (L - L')/7, got {} vs {}",
            outer.powf(ledger.rho),
            (outer - inner) / 7.0
        )));
    }
    let ann = Annulus::new(x0.clone(), outer, inner)?;
    let big = LatticeBox::new(x0.clone(), outer);
    let scales = ledger.scales(outer);
    let lattices = scales
        .iter()
        .map(|&l| CoarseLattice::desk(l))
        .collect::<Result<Vec<_>>>()?;
    let points = ann.sites();

    let first_level = |x: &Site| -> Option<usize> {
        for (n, (&l, lat)) in scales.iter().zip(&lattices).enumerate() {
            let probe = LatticeBox::new(x.clone(), l / 5.0);
            let need: Vec<Site> = probe
                .sites()
                .into_iter()
                .filter(|s| ann.contains(s))
                .collect();
            let reach = LatticeBox::new(x.clone(), l).half_extent();
            for r in lat.nodes_in_cube(x, reach) {
                if !big.contains(&r) {
                    continue;
                }
                let bx = LatticeBox::new(r.clone(), l);
                if need.iter().all(|s| bx.contains(s)) && oracle.is_good(&r, l) {
                    return Some(n);
                }
            }
        }
        None
    };
    let levels: Vec<Option<usize>> = points.par_iter().map(first_level).collect();

    let mut covered_at = vec![0usize; scales.len()];
    let mut uncovered: Vec<&Site> = Vec::new();
    for (x, lv) in points.iter().zip(&levels) {
        match lv {
            Some(n) => covered_at[*n] += 1,
            None => uncovered.push(x),
        }
    }
    let last = *scales.last().unwrap();
    let coarse = lattices.last().unwrap();
    let side = 3.0 * last;
    let mut centers = Vec::new();
    let mut absorbed = vec![false; uncovered.len()];
    for i in 0..uncovered.len() {
        if absorbed[i] {
            continue;
        }
        let c = coarse.nearest_node(uncovered[i]);
        let bx = LatticeBox::new(c.clone(), side);
        for (j, p) in uncovered.iter().enumerate().skip(i) {
            if !absorbed[j] && bx.contains(p) {
                absorbed[j] = true;
            }
        }
        centers.push(c);
    }
    let notsobad = centers.len() <= max_singular;
    Ok(NotsobadReport {
        notsobad,
        singular: SingularSet { centers, side },
        points: points.len(),
        uncovered: uncovered.len(),
        covered_at,
        max_singular,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    /// Shell scale `l_k`.
    pub scale: f64,
    pub inner: f64,
    pub outer: f64,
    pub energies: usize,
    pub missing: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FirstReductionReport {
    pub member: bool,
    pub layers: Vec<LayerReport>,
    /// `L_0, ..., L_{N1}`
    pub sides: Vec<f64>,
    /// `dist(E, σ^{(I)}(H_{Λ_{L_k}}))` for `k = 0..N1`.
    pub distances: Vec<f64>,
    pub energy: f64,
    pub w: f64,
    /// `e^{-θ sqrt(L K)}`
    pub w_threshold: f64,
    /// `e^{-θ L}`
    pub distance_threshold: f64,
    /// Membership plus the hypotheses on `W` and `dist(E, I^c)`.
    pub applies: bool,
    pub holds: bool,
}

impl FirstReductionReport {
    pub fn distances_non_increasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `L_0`
    pub base: f64,
    /// `l_0`; defaults to `sqrt(L_0)`.
    pub first_scale: Option<f64>,
    /// Spacing of the layer-0 energy grid; defaults to `2 e^{-m0 l0}`.
    pub grid_step: Option<f64>,
    pub goodness: GoodnessParams,
}

/// Layered shell event around `x0` and the distance chain for one energy.
pub fn first_reduction_probe(
    potential: &dyn Potential,
    x0: &Site,
    interval: &Interval,
    ledger: &ConstantsLedger,
    layers: &LayerParams,
    energy: f64,
    w: f64,
) -> Result<FirstReductionReport> {
    let l0 = layers.first_scale.unwrap_or(layers.base.sqrt());
    let mut scales = vec![l0];
    let mut sides = vec![layers.base];
    for k in 1..=ledger.n1 as usize {
        let l = scales[k - 1].powf(1.0 + ledger.r);
        scales.push(l);
        sides.push(sides[k - 1] + 2.0 * ledger.j as f64 * l);
    }
    let spectrum = |side: f64| -> Result<Vec<f64>> {
        let h = FiniteHamiltonian::assemble(&LatticeBox::new(x0.clone(), side), potential);
        Ok(h.diagonalize()?.values_in(interval))
    };
    let spectra = sides
        .iter()
        .map(|&s| spectrum(s))
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::new();
    for k in 0..=ledger.n1 as usize {
        let (inner, outer) = if k == 0 {
            (l0, sides[0])
        } else {
            (sides[k - 1], sides[k])
        };
        let energies = if k == 0 {
            let step = layers
                .grid_step
                .unwrap_or(2.0 * (-ledger.input.m0 * l0).exp());
            interval.grid(step)
        } else {
            spectra[k - 1].clone()
        };
        let geometry = ShellGeometry::new(
            Annulus::new(x0.clone(), outer, inner)?,
            CoarseLattice::desk(scales[k])?,
        )?;
        let missing = energies
            .par_iter()
            .map(|&e| -> Result<bool> {
                let field = label_nodes(
                    geometry.clone(),
                    potential,
                    e,
                    &layers.goodness,
                    NodeKind::Good,
                )?;
                Ok(extract_shell(&field)?.is_none())
            })
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .filter(|m| *m)
            .count();
        reports.push(LayerReport {
            layer: k,
            scale: scales[k],
            inner,
            outer,
            energies: energies.len(),
            missing,
        });
    }
    let member = reports.iter().all(|r| r.missing == 0);
    let side = *sides.last().unwrap();
    let distances: Vec<f64> = spectra
        .iter()
        .map(|s| nearest_distance(s, energy))
        .collect();
    let w_threshold = (-ledger.theta * (side * ledger.k).sqrt()).exp();
    let distance_threshold = (-ledger.theta * side).exp();
    let applies =
        member && w >= w_threshold && interval.distance_to_complement(energy) >= w_threshold;
    let holds = *distances.last().unwrap() <= distance_threshold;
    Ok(FirstReductionReport {
        member,
        layers: reports,
        sides,
        distances,
        energy,
        w,
        w_threshold,
        distance_threshold,
        applies,
        holds,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyRow {
    pub energy: f64,
    pub w: f64,
    pub w_l: f64,
    pub implication: bool,
    pub product: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyTheoremReport {
    pub side: f64,
    pub c: f64,
    pub mu: f64,
    /// `e^{-c L^μ}`
    pub w_threshold: f64,
    /// `e^{-c L}`
    pub annulus_threshold: f64,
    /// `e^{-c L^μ / 2}`
    pub product_threshold: f64,
    pub rows: Vec<KeyRow>,
}

impl KeyTheoremReport {
    pub fn implication_violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.implication).count()
    }

    pub fn product_violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.product).count()
    }
}

/// Evaluate `W > e^{-cL^μ} => W_L <= e^{-cL}` and `W W_L < e^{-cL^μ/2}` on
/// the host eigenvalues in `I` at distance at least `e^{-cL^μ}` from `I^c`.
pub fn key_theorem_probe(
    host: &ModeHost,
    x0: &Site,
    side: f64,
    interval: &Interval,
    c: f64,
    mu: f64,
    window: f64,
) -> Result<KeyTheoremReport> {
    let w_threshold = (-c * side.powf(mu)).exp();
    let annulus_threshold = (-c * side).exp();
    let product_threshold = (-c * side.powf(mu) / 2.0).exp();
    let mut rows = Vec::new();
    for e in host.grid_in(interval) {
        if interval.distance_to_complement(e) < w_threshold {
            continue;
        }
        let proxies = host.proxies(e, window);
        let w = host.w_point(&proxies, x0);
        let w_l = host.w_annulus(&proxies, x0, side)?;
        rows.push(KeyRow {
            energy: e,
            w,
            w_l,
            implication: !(w > w_threshold) || w_l <= annulus_threshold,
            product: w * w_l < product_threshold,
        });
    }
    Ok(KeyTheoremReport {
        side,
        c,
        mu,
        w_threshold,
        annulus_threshold,
        product_threshold,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{ConstantPotential, DisorderField, Distribution};

    fn desk_ledger(theta: f64) -> ConstantsLedger {
        let mut input = ConstantsInput::new(1.0, 0.5, 2.0, 0.25, 1.0, 1, 0.75);
        input.n2 = Some(2);
        input.j = Some(2);
        input.theta = Some(theta);
        derive_constants(input).unwrap()
    }

    #[test]
    fn n1_examples() {
        assert_eq!(n1_for(0.4), 3);
        assert_eq!(n1_for(2.0), 1);
        let l = derive_constants(ConstantsInput::new(1.0, 0.5, 0.4, 0.1, 1.0, 1, 0.75)).unwrap();
        assert_eq!(l.n1, 3);
        assert_eq!(l.big_m, 1.0 / 30f64.powi(5));
        assert!(((1.0 + l.r).powi(3) - 2.0).abs() < 1e-12);
        assert_eq!(l.j, 81);
        assert_eq!(l.k, 1.0 + 2.0 * 81.0 * 3.0);
        assert!((l.n2 as f64 + 1.0) * l.beta < 0.3);
        assert!((l.n2 as f64) * l.rho.powi(l.n2 as i32 - 1) >= 0.3);
        assert_eq!(l.c, 15.0 * l.big_m / l.k);
        assert_eq!(l.mu, l.beta / 2.0);
        assert_eq!(derive_constants(l.input).unwrap(), l);
    }

    #[test]
    fn constant_errors() {
        let bad_rho = ConstantsInput::new(1.0, 0.5, 0.4, 0.1, 1.0, 1, 0.7);
        assert!(derive_constants(bad_rho).is_err());
        let mut tight = ConstantsInput::new(1.0, 0.5, 0.4, 0.399, 1.0, 1, 0.9999);
        tight.n2 = None;
        assert!(matches!(
            derive_constants(tight),
            Err(Error::InfeasibleConstants { .. })
        ));
        let mut fixed = ConstantsInput::new(1.0, 0.5, 2.0, 1.0, 1.0, 1, 0.75);
        fixed.n2 = Some(1);
        assert!(matches!(
            derive_constants(fixed),
            Err(Error::InfeasibleConstants { .. })
        ));
    }

    #[test]
    fn desk_constants() {
        let l = desk_ledger(0.05);
        assert_eq!(l.n2, 2);
        assert_eq!(l.beta, 0.5625);
        assert!((l.count_exponent() - 1.6875).abs() < 1e-12);
        assert_eq!(l.overrides().len(), 2);
    }

    #[test]
    fn vacuous_threshold_keeps_base() {
        let f = DisorderField::new(3, Distribution::half_bernoulli(8.0));
        let l = desk_ledger(1e-12);
        let red = reduced_spectrum(
            &f,
            &Site::origin(1),
            32.0,
            &Interval::new(-5.0, 9.0).unwrap(),
            &l,
        )
        .unwrap();
        assert_eq!(red.base, red.survivors);
    }

    #[test]
    fn empty_inner_spectrum_empties_reduction() {
        let l = desk_ledger(1.0);
        let i = Interval::new(-3.9, -3.8).unwrap();
        // free line: the 4-site box has no eigenvalue in this window
        let red =
            reduced_spectrum(&ConstantPotential(0.0), &Site::origin(1), 64.0, &i, &l).unwrap();
        assert!(red.survivors.is_empty());
    }

    #[test]
    fn threshold_monotonicity() {
        let base = vec![-1.0, 0.0, 0.5, 2.0];
        let inner = vec![vec![-0.99, 0.4], vec![0.1, 2.2]];
        let (tight, _) = reduce_spectra(&base, &inner, &[0.05, 0.05]);
        let (loose, _) = reduce_spectra(&base, &inner, &[0.3, 0.3]);
        assert!(tight.iter().all(|e| loose.contains(e)));
        assert!(loose.len() >= tight.len());
    }

    #[test]
    fn count_bound_trivia() {
        let l = desk_ledger(1.0);
        let empty = ReducedSpectrum {
            side: 64.0,
            scales: vec![],
            thresholds: vec![],
            base: vec![1.0],
            survivors: vec![],
            audit: vec![],
            theta: 1.0,
            theta_default: 1.0,
        };
        assert!(count_bound_check(&empty, &l, 1e-9).holds);
    }

    #[test]
    fn notsobad_all_good_and_all_bad() {
        let mut input = ConstantsInput::new(1.0, 0.5, 2.0, 0.25, 1.0, 1, 0.5);
        input.n2 = Some(2);
        let l = derive_constants(input).unwrap();
        let x0 = Site::origin(1);
        let good = |_: &Site, _: f64| true;
        let r = notsobad_check(&good, &x0, 128.0, 40.0, 0, &l).unwrap();
        assert!(r.notsobad && r.singular.centers.is_empty());
        let bad = |_: &Site, _: f64| false;
        let r = notsobad_check(&bad, &x0, 128.0, 40.0, 1, &l).unwrap();
        assert!(!r.notsobad);
        assert!(notsobad_check(&good, &x0, 128.0, 100.0, 1, &l).is_err());
    }

    #[test]
    fn notsobad_single_bad_region() {
        let mut input = ConstantsInput::new(1.0, 0.5, 2.0, 0.25, 1.0, 1, 0.5);
        input.n2 = Some(2);
        let l = derive_constants(input).unwrap();
        let x0 = Site::origin(1);
        // every box meeting a short stretch around 50 is bad
        let oracle = |c: &Site, side: f64| {
            let b = LatticeBox::new(c.clone(), side);
            !(48..=52).any(|i| b.contains(&Site::new(vec![i])))
        };
        let r = notsobad_check(&oracle, &x0, 128.0, 40.0, 1, &l).unwrap();
        assert!(r.uncovered > 0);
        assert!(r.notsobad, "{r:?}");
        assert_eq!(r.singular.centers.len(), 1);
    }

    #[test]
    fn key_theorem_free_case() {
        let host =
            ModeHost::new(LatticeBox::centered(1, 121.0), &ConstantPotential(0.0), 1.0).unwrap();
        let i = Interval::new(1.0, 2.0).unwrap();
        let r = key_theorem_probe(&host, &Site::origin(1), 20.0, &i, 0.5, 0.3, 1e-6).unwrap();
        assert!(r.rows.is_empty());
        let i = Interval::new(-4.5, 0.5).unwrap();
        let r = key_theorem_probe(&host, &Site::origin(1), 20.0, &i, 0.5, 0.3, 1e-6).unwrap();
        assert!(!r.rows.is_empty());
    }

    #[test]
    fn first_reduction_on_free_gap() {
        let mut input = ConstantsInput::new(1.0, 0.5, 2.0, 0.25, 1.0, 1, 0.75);
        input.j = Some(2);
        input.theta = Some(0.05);
        let l = derive_constants(input).unwrap();
        let lp = LayerParams {
            base: 16.0,
            first_scale: None,
            grid_step: Some(0.5),
            goodness: GoodnessParams::new(0.5, 0.5),
        };
        let i = Interval::new(-11.0, -9.0).unwrap();
        let r = first_reduction_probe(
            &ConstantPotential(0.0),
            &Site::origin(1),
            &i,
            &l,
            &lp,
            -10.0,
            1.0,
        )
        .unwrap();
        assert!(r.member);
        assert_eq!(r.sides, vec![16.0, 80.0]);
        assert_eq!(r.layers[0].energies, 5);
        assert_eq!(r.layers[1].energies, 0);
        assert!(r.distances.iter().all(|d| d.is_infinite()));
    }
}
