//! Integer-lattice geometry.
//!
//! Boxes `Λ_L(x) = {y : |y - x| < L/2}` are cubes under the sup-norm by default
//! (the Euclidean ball is available through [`BoxNorm::Euclidean`]). Every
//! site listing in this crate is lexicographic in the coordinates; that order
//! is the row/column order of every matrix built on a region.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(Vec<i64>);

impl Site {
    pub fn new(coords: Vec<i64>) -> Self {
        assert!(!coords.is_empty(), "a site needs at least one coordinate");
        Site(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Site::new(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn offset(&self, other: &Site) -> Site {
        debug_assert_eq!(self.dim(), other.dim());
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn translate(&self, by: &Site) -> Site {
        debug_assert_eq!(self.dim(), by.dim());
        Site(self.0.iter().zip(&by.0).map(|(a, b)| a + b).collect())
    }

    /// `max_i |x_i|`
    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|c| c * c).sum()
    }

    /// Euclidean norm `|x|`.
    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// `<x> = (1 + |x|^2)^{1/2}`
    pub fn bracket(&self) -> f64 {
        (1.0 + self.norm_sq() as f64).sqrt()
    }

    pub fn distance(&self, other: &Site) -> f64 {
        self.offset(other).norm()
    }

    pub fn sup_distance(&self, other: &Site) -> i64 {
        self.offset(other).sup_norm()
    }

    /// The `2d` nearest neighbours, ordered by axis then by sign (`-` first).
    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            [-1i64, 1].into_iter().map(move |step| {
                let mut c = self.0.clone();
                c[axis] += step;
                Site(c)
            })
        })
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<i64>> for Site {
    fn from(v: Vec<i64>) -> Self {
        Site::new(v)
    }
}

/// Which norm decides box membership.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxNorm {
    #[default]
    Sup,
    Euclidean,
}

/// Anything that can answer lattice membership queries.
pub trait Region: Sync {
    fn contains(&self, site: &Site) -> bool;
    fn dim(&self) -> usize;
}

/// `Λ_L(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeBox {
    center: Site,
    side: f64,
    #[serde(default)]
    norm: BoxNorm,
}

impl LatticeBox {
    pub fn new(center: Site, side: f64) -> Self {
        Self::with_norm(center, side, BoxNorm::Sup)
    }

    pub fn with_norm(center: Site, side: f64, norm: BoxNorm) -> Self {
        assert!(side.is_finite() && side > 0.0, "box side must be positive");
        LatticeBox { center, side, norm }
    }

    pub fn centered(dim: usize, side: f64) -> Self {
        Self::new(Site::origin(dim), side)
    }

    pub fn center(&self) -> &Site {
        &self.center
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn norm(&self) -> BoxNorm {
        self.norm
    }

    /// Largest integer `k` with `k < L/2`.
    pub fn half_extent(&self) -> i64 {
        (self.side / 2.0).ceil() as i64 - 1
    }

    /// Membership for an offset from the center.
    fn contains_offset(&self, off: &Site) -> bool {
        let r = self.side / 2.0;
        match self.norm {
            BoxNorm::Sup => (off.sup_norm() as f64) < r,
            BoxNorm::Euclidean => off.norm() < r,
        }
    }

    pub fn sites(&self) -> Vec<Site> {
        let h = self.half_extent();
        let d = self.center.dim();
        let mut out = Vec::with_capacity(((2 * h + 1).max(0) as usize).pow(d as u32));
        if h < 0 {
            return out;
        }
        let mut off = vec![-h; d];
        loop {
            let o = Site(off.clone());
            if self.contains_offset(&o) {
                out.push(self.center.translate(&o));
            }
            // odometer, last coordinate fastest => lexicographic
            let mut axis = d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if off[axis] < h {
                    off[axis] += 1;
                    for a in off.iter_mut().skip(axis + 1) {
                        *a = -h;
                    }
                    break;
                }
            }
        }
    }

    /// True when every site of `self` lies in `outer`.
    pub fn is_inside(&self, outer: &dyn Region) -> bool {
        self.sites().iter().all(|s| outer.contains(s))
    }

    fn as_sup_cube(&self) -> Option<(&Site, i64)> {
        (self.norm == BoxNorm::Sup).then_some((&self.center, self.half_extent()))
    }

    /// Sup-norm cube containment shortcut: true iff `self ⊂ outer`, both cubes.
    pub fn cube_inside(&self, outer: &LatticeBox) -> Option<bool> {
        let (c, h) = self.as_sup_cube()?;
        let (oc, oh) = outer.as_sup_cube()?;
        if h < 0 {
            return Some(true);
        }
        Some(c.sup_distance(oc) + h <= oh)
    }

    /// Sup-norm cube intersection shortcut.
    pub fn cube_meets(&self, other: &LatticeBox) -> Option<bool> {
        let (c, h) = self.as_sup_cube()?;
        let (oc, oh) = other.as_sup_cube()?;
        if h < 0 || oh < 0 {
            return Some(false);
        }
        Some(c.sup_distance(oc) <= h + oh)
    }

    pub fn with_side(&self, side: f64) -> LatticeBox {
        LatticeBox::with_norm(self.center.clone(), side, self.norm)
    }
}

impl Region for LatticeBox {
    fn contains(&self, site: &Site) -> bool {
        site.dim() == self.center.dim() && self.contains_offset(&site.offset(&self.center))
    }

    fn dim(&self) -> usize {
        self.center.dim()
    }
}

/// Lexicographic sites of a box, checking the ambient dimension.
pub fn box_sites(bx: &LatticeBox, dim: usize) -> Result<Vec<Site>> {
    if bx.center().dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bx.center().dim(),
        });
    }
    Ok(bx.sites())
}

/// `Λ_{L2,L1}(x) = Λ_{L2}(x) \ Λ_{L1}(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    outer: LatticeBox,
    inner: LatticeBox,
}

impl Annulus {
    pub fn new(center: Site, outer: f64, inner: f64) -> Result<Self> {
        Self::with_norm(center, outer, inner, BoxNorm::Sup)
    }

    pub fn with_norm(center: Site, outer: f64, inner: f64, norm: BoxNorm) -> Result<Self> {
        if !(inner > 0.0 && inner < outer) {
            return Err(Error::param(
                "annulus",
                format!("need 0 < inner < outer, got inner={inner}, outer={outer}"),
            ));
        }
        Ok(Annulus {
            outer: LatticeBox::with_norm(center.clone(), outer, norm),
            inner: LatticeBox::with_norm(center, inner, norm),
        })
    }

    pub fn center(&self) -> &Site {
        self.outer.center()
    }

    pub fn outer(&self) -> &LatticeBox {
        &self.outer
    }

    pub fn inner(&self) -> &LatticeBox {
        &self.inner
    }

    pub fn sites(&self) -> Vec<Site> {
        self.outer
            .sites()
            .into_iter()
            .filter(|s| !self.inner.contains(s))
            .collect()
    }
}

impl Region for Annulus {
    fn contains(&self, site: &Site) -> bool {
        self.outer.contains(site) && !self.inner.contains(site)
    }

    fn dim(&self) -> usize {
        self.outer.dim()
    }
}

/// All pairs `(y, y')` with `y ∈ Λ`, `y' ∉ Λ`, `|y - y'| = 1`.
pub fn boundary_pairs(bx: &LatticeBox) -> Vec<(Site, Site)> {
    let mut out = Vec::new();
    for y in bx.sites() {
        for n in y.neighbors() {
            if !bx.contains(&n) {
                out.push((y.clone(), n));
            }
        }
    }
    out
}

/// `C_l = (α_l Z)^d` with `α_l = ⌊3l/5⌋`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseLattice {
    scale: f64,
    spacing: i64,
}

impl CoarseLattice {
    pub const MIN_SCALE: f64 = 10.0;

    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > Self::MIN_SCALE) {
            return Err(Error::param(
                "scale",
                format!("coarse lattice needs l > {}, got {scale}", Self::MIN_SCALE),
            ));
        }
        Ok(Self::unchecked(scale))
    }

    /// Coarse lattice below the `l > 10` regime, for desk-scale experiments.
    /// Only requires a positive spacing.
    pub fn desk(scale: f64) -> Result<Self> {
        let lat = Self::unchecked(scale);
        if lat.spacing < 1 {
            return Err(Error::param(
                "scale",
                format!("l={scale} gives spacing floor(3l/5) < 1"),
            ));
        }
        Ok(lat)
    }

    fn unchecked(scale: f64) -> Self {
        CoarseLattice {
            scale,
            spacing: (3.0 * scale / 5.0).floor() as i64,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn spacing(&self) -> i64 {
        self.spacing
    }

    pub fn is_node(&self, site: &Site) -> bool {
        site.coords()
            .iter()
            .all(|c| c.rem_euclid(self.spacing) == 0)
    }

    /// Coarse index of a node (`node / α`).
    pub fn index_of(&self, node: &Site) -> Site {
        Site(
            node.coords()
                .iter()
                .map(|c| c.div_euclid(self.spacing))
                .collect(),
        )
    }

    pub fn node_at(&self, index: &Site) -> Site {
        Site(index.coords().iter().map(|k| k * self.spacing).collect())
    }

    /// The node whose coarse cell contains `site` (coordinate-wise rounding).
    pub fn nearest_node(&self, site: &Site) -> Site {
        let a = self.spacing as f64;
        Site(
            site.coords()
                .iter()
                .map(|&c| ((c as f64) / a).round() as i64 * self.spacing)
                .collect(),
        )
    }

    /// Nodes lying in a box of the given center and sup half-extent, lexicographic.
    pub fn nodes_in_cube(&self, center: &Site, half: i64) -> Vec<Site> {
        let ranges: Vec<(i64, i64)> = center
            .coords()
            .iter()
            .map(|&c| {
                (
                    (c - half).div_euclid(self.spacing)
                        + i64::from((c - half).rem_euclid(self.spacing) != 0),
                    (c + half).div_euclid(self.spacing),
                )
            })
            .collect();
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(Site(idx.iter().map(|k| k * self.spacing).collect()));
            let mut axis = idx.len();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if idx[axis] < ranges[axis].1 {
                    idx[axis] += 1;
                    for a in axis + 1..idx.len() {
                        idx[a] = ranges[a].0;
                    }
                    break;
                }
            }
        }
    }

    /// All nodes inside `region`, whose sites are bounded by `bounding` (a box containing it).
    pub fn nodes_in(&self, bounding: &LatticeBox, region: &dyn Region) -> Vec<Site> {
        self.nodes_in_cube(bounding.center(), bounding.half_extent())
            .into_iter()
            .filter(|n| region.contains(n))
            .collect()
    }
}

/// Coarse nodes of `C_l` inside a box, for `l > 10`.
pub fn coarse_nodes_box(scale: f64, bx: &LatticeBox) -> Result<Vec<Site>> {
    let lat = CoarseLattice::new(scale)?;
    Ok(lat.nodes_in(bx, bx))
}

/// Coarse nodes of `C_l` inside an annulus, for `l > 10`.
pub fn coarse_nodes_annulus(scale: f64, ann: &Annulus) -> Result<Vec<Site>> {
    let lat = CoarseLattice::new(scale)?;
    Ok(lat.nodes_in(ann.outer(), ann))
}

/// `T_a`: multiplication by `<y - a>^ν`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub nu: f64,
    pub anchor: Site,
}

impl Weight {
    pub fn new(nu: f64, anchor: Site) -> Self {
        Weight { nu, anchor }
    }

    pub fn at(&self, y: &Site) -> f64 {
        y.offset(&self.anchor).bracket().powf(self.nu)
    }

    /// Multiply `values[i]` by `<sites[i] - anchor>^{±ν}`.
    pub fn apply(&self, sites: &[Site], values: &[f64], inverted: bool) -> Vec<f64> {
        assert_eq!(sites.len(), values.len());
        sites
            .iter()
            .zip(values)
            .map(|(s, v)| {
                let w = self.at(s);
                if inverted {
                    v / w
                } else {
                    v * w
                }
            })
            .collect()
    }

    /// `‖T_a^{-1} φ‖` over the listed sites.
    pub fn inverse_norm(&self, sites: &[Site], values: &[f64]) -> f64 {
        sites
            .iter()
            .zip(values)
            .map(|(s, v)| {
                let x = v / self.at(s);
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Pointwise weight application, as a free function.
pub fn apply_weight(w: &Weight, sites: &[Site], values: &[f64], inverted: bool) -> Vec<f64> {
    w.apply(sites, values, inverted)
}

/// Set of sites with O(1) membership, handy for arbitrary site lists.
#[derive(Clone, Debug, Default)]
pub struct SiteSet {
    dim: usize,
    set: HashSet<Site>,
}

impl SiteSet {
    pub fn from_sites<'a>(dim: usize, sites: impl IntoIterator<Item = &'a Site>) -> Self {
        SiteSet {
            dim,
            set: sites.into_iter().cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

impl Region for SiteSet {
    fn contains(&self, site: &Site) -> bool {
        self.set.contains(site)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
