//! Green functions, the regular/good/jgood predicates, and residual checks of
//! the resolvent, geometric-resolvent and Poisson identities.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{boundary_pairs, LatticeBox, Site};
use crate::operator::{EigenSystem, FiniteHamiltonian};

/// Relative distance to the spectrum below which an inverse is not trusted.
pub const NEAR_SINGULAR_REL: f64 = 1e-12;

/// `G = (H_Λ - E)^{-1}`.
#[derive(Clone, Debug)]
pub struct GreenFunction {
    pub energy: f64,
    pub matrix: DMatrix<f64>,
    /// `min_k |E - E_k|`
    pub dist: f64,
    index: HashMap<Site, usize>,
    sites: Vec<Site>,
}

impl GreenFunction {
    /// `‖G‖ = 1 / dist(E, σ(H))`
    pub fn norm(&self) -> f64 {
        1.0 / self.dist
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn index_of(&self, s: &Site) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// `G(x, y)`; panics if either site is outside the box.
    pub fn entry(&self, x: &Site, y: &Site) -> f64 {
        self.matrix[(self.index[x], self.index[y])]
    }
}

fn singular_check(values: &[f64], e: f64) -> Result<f64> {
    let dist = values
        .iter()
        .map(|v| (v - e).abs())
        .fold(f64::INFINITY, f64::min);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = NEAR_SINGULAR_REL * scale;
    if !(dist > threshold) {
        return Err(Error::NearSingular {
            energy: e,
            distance: dist,
            threshold,
        });
    }
    Ok(dist)
}

/// Dense inverse of `H - E`.
pub fn green(h: &FiniteHamiltonian, e: f64) -> Result<GreenFunction> {
    let values: Vec<f64> = h
        .matrix()
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    let dist = singular_check(&values, e)?;
    let n = h.len();
    let shifted = h.matrix() - DMatrix::identity(n, n) * e;
    let matrix = shifted.try_inverse().ok_or(Error::NearSingular {
        energy: e,
        distance: dist,
        threshold: 0.0,
    })?;
    Ok(GreenFunction {
        energy: e,
        matrix,
        dist,
        index: h
            .sites()
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect(),
        sites: h.sites().to_vec(),
    })
}

/// `G = V diag(1/(E_k - E)) V^T`, reusing a diagonalization.
pub fn green_from_eigen(sys: &EigenSystem, e: f64) -> Result<GreenFunction> {
    let dist = singular_check(&sys.values, e)?;
    let mut scaled = sys.vectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col /= sys.values[k] - e;
    }
    let matrix = scaled * sys.vectors.transpose();
    Ok(GreenFunction {
        energy: e,
        matrix,
        dist,
        index: sys
            .sites
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect(),
        sites: sys.sites.clone(),
    })
}

/// `m`, `η` and the pair-distance fraction `f` of the goodness predicates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodnessParams {
    pub m: f64,
    pub eta: f64,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
}

fn default_fraction() -> f64 {
    0.01
}

impl GoodnessParams {
    pub fn new(m: f64, eta: f64) -> Self {
        GoodnessParams {
            m,
            eta,
            fraction: default_fraction(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) {
            return Err(Error::param("m", format!("need m > 0, got {}", self.m)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::param(
                "eta",
                format!("need 0 < eta < 1, got {}", self.eta),
            ));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::param(
                "fraction",
                format!("need 0 < f <= 1, got {}", self.fraction),
            ));
        }
        Ok(())
    }

    /// `e^{L^{1-η}}`
    pub fn norm_threshold(&self, side: f64) -> f64 {
        side.powf(1.0 - self.eta).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodnessReport {
    pub regular: bool,
    pub good: bool,
    pub jgood: bool,
    /// `min (-ln|G(x,y)|/|x-y| - m)` over the tested pairs; `None` when no pair qualifies.
    pub decay_margin: Option<f64>,
    pub norm: f64,
    pub norm_threshold: f64,
    pub side: f64,
    pub energy: f64,
    pub m: f64,
    pub eta: f64,
    pub fraction: f64,
    pub pairs_tested: usize,
}

/// Classify an already inverted box of side `side`.
pub fn classify_green(g: &GreenFunction, side: f64, params: &GoodnessParams) -> GoodnessReport {
    let cutoff = params.fraction * side;
    let sites = g.sites();
    let n = sites.len();
    let mut margin: Option<f64> = None;
    let mut regular = true;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = sites[i].distance(&sites[j]);
            if r < cutoff {
                continue;
            }
            pairs += 1;
            let a = g.matrix[(i, j)].abs().max(g.matrix[(j, i)].abs());
            if a > (-params.m * r).exp() {
                regular = false;
            }
            let mg = if a == 0.0 {
                f64::INFINITY
            } else {
                -a.ln() / r - params.m
            };
            margin = Some(margin.map_or(mg, |x: f64| x.min(mg)));
        }
    }
    let norm = g.norm();
    let norm_threshold = params.norm_threshold(side);
    let good = regular && norm <= norm_threshold;
    let jgood = regular && norm <= 2.0 * norm_threshold;
    GoodnessReport {
        regular,
        good,
        jgood,
        decay_margin: margin,
        norm,
        norm_threshold,
        side,
        energy: g.energy,
        m: params.m,
        eta: params.eta,
        fraction: params.fraction,
        pairs_tested: pairs,
    }
}

fn side_of(h: &FiniteHamiltonian) -> Result<f64> {
    h.region().map(|b| b.side()).ok_or_else(|| {
        Error::Precondition("goodness needs a Hamiltonian assembled on a box".into())
    })
}

/// Regular / good / jgood predicates of a box at energy `E`.
pub fn classify_box(
    h: &FiniteHamiltonian,
    e: f64,
    params: &GoodnessParams,
) -> Result<GoodnessReport> {
    params.validate()?;
    let side = side_of(h)?;
    let g = green(h, e)?;
    Ok(classify_green(&g, side, params))
}

/// Residual of an identity together with the scale its tolerance is relative to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub residual: f64,
    pub scale: f64,
}

impl IdentityResidual {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.residual <= rel_tol * self.scale
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// `‖G_E - G_{E0} - (E - E0) G_E G_{E0}‖_max`, scale `‖G_E‖‖G_{E0}‖`.
pub fn check_resolvent_identity(
    h: &FiniteHamiltonian,
    e: f64,
    e0: f64,
) -> Result<IdentityResidual> {
    let sys = h.diagonalize()?;
    let g = green_from_eigen(&sys, e)?;
    let g0 = green_from_eigen(&sys, e0)?;
    let rhs = (&g.matrix * &g0.matrix) * (e - e0);
    let residual = max_abs(&(&g.matrix - &g0.matrix - rhs));
    Ok(IdentityResidual {
        residual,
        scale: g.norm() * g0.norm(),
    })
}

fn embedding(big: &FiniteHamiltonian, small: &FiniteHamiltonian) -> Result<Vec<usize>> {
    small
        .sites()
        .iter()
        .map(|s| {
            big.index_of(s).ok_or_else(|| {
                Error::NotContained(format!(
                    "site {s} of the inner region is outside the outer one"
                ))
            })
        })
        .collect()
}

/// Pairs `(u, v)` with `u ∈ Λ'`, `v ∈ Λ \ Λ'`, `|u - v| = 1`, as indices into `Λ'` and `Λ`.
fn inner_boundary(big: &FiniteHamiltonian, small: &FiniteHamiltonian) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (iu, u) in small.sites().iter().enumerate() {
        for v in u.neighbors() {
            if small.index_of(&v).is_none() {
                if let Some(iv) = big.index_of(&v) {
                    out.push((iu, iv));
                }
            }
        }
    }
    out
}

/// Both sides of the geometric resolvent identity for `Λ' ⊂ Λ` (hopping `+1`):
///
/// ```text
/// G_Λ(x,y) = G_Λ'(x,y) [y ∈ Λ'] - Σ_{u ∈ Λ', v ∈ Λ\Λ', |u-v|=1} G_Λ'(x,u) G_Λ(v,y)
/// ```
pub struct GeometricResolvent {
    g_big: GreenFunction,
    g_small: GreenFunction,
    embed: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

impl GeometricResolvent {
    pub fn new(big: &FiniteHamiltonian, small: &FiniteHamiltonian, e: f64) -> Result<Self> {
        let embed = embedding(big, small)?;
        Ok(GeometricResolvent {
            g_big: green(big, e)?,
            g_small: green(small, e)?,
            embed,
            pairs: inner_boundary(big, small),
        })
    }

    fn scale(&self) -> f64 {
        self.g_big.norm().max(1.0) * self.g_small.norm().max(1.0)
    }

    /// `|lhs - rhs|` at indices `x` (into `Λ'`) and `y` (into `Λ`).
    fn residual_at(&self, x: usize, y: usize, y_small: Option<usize>) -> f64 {
        let lhs = self.g_big.matrix[(self.embed[x], y)];
        let mut rhs = y_small.map_or(0.0, |j| self.g_small.matrix[(x, j)]);
        for &(u, v) in &self.pairs {
            rhs -= self.g_small.matrix[(x, u)] * self.g_big.matrix[(v, y)];
        }
        (lhs - rhs).abs()
    }

    pub fn at(&self, x: &Site, y: &Site) -> Result<IdentityResidual> {
        let xi = self
            .g_small
            .index_of(x)
            .ok_or_else(|| Error::NotContained(format!("x = {x} is not in the inner region")))?;
        let yi = self
            .g_big
            .index_of(y)
            .ok_or_else(|| Error::NotContained(format!("y = {y} is not in the outer region")))?;
        Ok(IdentityResidual {
            residual: self.residual_at(xi, yi, self.g_small.index_of(y)),
            scale: self.scale(),
        })
    }

    /// Worst residual over all `x ∈ Λ'`, `y ∈ Λ`.
    pub fn worst(&self) -> IdentityResidual {
        let inverse: HashMap<usize, usize> = self
            .embed
            .iter()
            .enumerate()
            .map(|(i, &b)| (b, i))
            .collect();
        let mut worst = 0.0f64;
        for x in 0..self.embed.len() {
            for y in 0..self.g_big.sites().len() {
                worst = worst.max(self.residual_at(x, y, inverse.get(&y).copied()));
            }
        }
        IdentityResidual {
            residual: worst,
            scale: self.scale(),
        }
    }
}

pub fn check_geometric_resolvent(
    big: &FiniteHamiltonian,
    small: &FiniteHamiltonian,
    e: f64,
    x: &Site,
    y: &Site,
) -> Result<IdentityResidual> {
    GeometricResolvent::new(big, small, e)?.at(x, y)
}

/// Residual of `ψ(x) = -Σ_{(y,y') ∈ ∂Λ} G_Λ(x,y) ψ(y')` over `x ∈ Λ`, for an
/// eigenpair `(E, ψ)` of `big` and a box `Λ` whose exterior boundary lies in `big`.
pub fn check_poisson(
    big: &FiniteHamiltonian,
    energy: f64,
    psi: &DVector<f64>,
    sub: &LatticeBox,
    potential: &dyn crate::disorder::Potential,
) -> Result<IdentityResidual> {
    let h_sub = FiniteHamiltonian::assemble(sub, potential);
    embedding(big, &h_sub)?;
    let pairs = boundary_pairs(sub);
    let mut outer = Vec::with_capacity(pairs.len());
    for (y, yp) in &pairs {
        let j = big.index_of(yp).ok_or_else(|| {
            Error::Precondition(format!("boundary site {yp} is outside the host box"))
        })?;
        outer.push((
            h_sub.index_of(y).expect("boundary pair starts inside"),
            psi[j],
        ));
    }
    let g = green(&h_sub, energy)?;
    let mut worst = 0.0f64;
    for (i, x) in h_sub.sites().iter().enumerate() {
        let rhs: f64 = -outer
            .iter()
            .map(|&(yi, v)| g.matrix[(i, yi)] * v)
            .sum::<f64>();
        let lhs = psi[big.index_of(x).unwrap()];
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(IdentityResidual {
        residual: worst,
        scale: g.norm().max(1.0) * psi.norm(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityRow {
    pub energy: f64,
    pub report: GoodnessReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityTable {
    pub e0: f64,
    /// `e^{-m' L}`
    pub radius: f64,
    pub rows: Vec<StabilityRow>,
    /// Energies where the Green function could not be formed.
    pub singular: Vec<f64>,
}

impl StabilityTable {
    pub fn all_jgood(&self) -> bool {
        self.singular.is_empty() && self.rows.iter().all(|r| r.report.jgood)
    }

    pub fn violations(&self) -> usize {
        self.singular.len() + self.rows.iter().filter(|r| !r.report.jgood).count()
    }
}

/// Classify `H` at `m` on `2n+1` energies spread over `|E - E0| <= e^{-m' L}`.
pub fn stability_probe(
    h: &FiniteHamiltonian,
    e0: f64,
    params: &GoodnessParams,
    m_prime: f64,
    n: usize,
) -> Result<StabilityTable> {
    params.validate()?;
    if !(m_prime > params.m) {
        return Err(Error::param(
            "m_prime",
            format!("need m < m', got m={} m'={m_prime}", params.m),
        ));
    }
    let side = side_of(h)?;
    let radius = (-m_prime * side).exp();
    let sys = h.diagonalize()?;
    let mut rows = Vec::new();
    let mut singular = Vec::new();
    let k = n as i64;
    for i in -k..=k {
        let e = if k == 0 {
            e0
        } else {
            e0 + radius * i as f64 / k as f64
        };
        match green_from_eigen(&sys, e) {
            Ok(g) => rows.push(StabilityRow {
                energy: e,
                report: classify_green(&g, side, params),
            }),
            Err(Error::NearSingular { .. }) => singular.push(e),
            Err(err) => return Err(err),
        }
    }
    Ok(StabilityTable {
        e0,
        radius,
        rows,
        singular,
    })
}
