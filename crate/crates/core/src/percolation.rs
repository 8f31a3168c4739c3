//! Good and bad nodes of a coarse lattice inside an annulus, bad-path search,
//! and good-shell extraction.
//!
//! Only nodes `r` with `Λ_{l+2}(r) ⊂ Λ_{L2,L1}(x0)` can belong to a fully
//! contained shell, so only those are labelled ("eligible"). The remaining
//! nodes of the search window are either *inner* (their `(l+2)`-box meets the
//! hole `Λ_{L1}`) or *outer*. Connectivity is `*`-adjacency: two nodes are
//! neighbours when their coarse indices differ by at most one in every
//! coordinate.

use std::collections::{HashMap, HashSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::Potential;
use crate::error::{Error, Result};
use crate::lattice::{Annulus, CoarseLattice, LatticeBox, Region, Site};
use crate::operator::FiniteHamiltonian;
use crate::resolvent::{classify_box, GoodnessParams};

/// What a node label certifies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    /// `Λ_l(r)` is good.
    Good,
    /// Every `Λ_{l'}(r')`, `r' ∈ C_{l'} ∩ Λ_l(r)`, `l' = l^{1/(1+ratio)}`, is good.
    Pgood { ratio: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Inner,
    Eligible,
    Outer,
}

/// Coarse nodes around an annulus, sorted into roles.
#[derive(Clone, Debug)]
pub struct ShellGeometry {
    pub lattice: CoarseLattice,
    pub annulus: Annulus,
    /// Window nodes in lexicographic order.
    pub nodes: Vec<Site>,
    pub roles: Vec<NodeRole>,
    slot: HashMap<Site, usize>,
}

fn fat_box(node: &Site, lattice: &CoarseLattice, annulus: &Annulus) -> LatticeBox {
    LatticeBox::with_norm(node.clone(), lattice.scale() + 2.0, annulus.outer().norm())
}

fn role_of(node: &Site, lattice: &CoarseLattice, annulus: &Annulus) -> NodeRole {
    let fat = fat_box(node, lattice, annulus);
    let meets_hole = fat
        .cube_meets(annulus.inner())
        .unwrap_or_else(|| fat.sites().iter().any(|s| annulus.inner().contains(s)));
    if meets_hole {
        return NodeRole::Inner;
    }
    let inside = fat
        .cube_inside(annulus.outer())
        .unwrap_or_else(|| fat.is_inside(annulus.outer()));
    if inside {
        NodeRole::Eligible
    } else {
        NodeRole::Outer
    }
}

impl ShellGeometry {
    pub fn new(annulus: Annulus, lattice: CoarseLattice) -> Result<Self> {
        let reach = annulus.outer().half_extent()
            + LatticeBox::new(Site::origin(1), lattice.scale() + 2.0).half_extent()
            + 2 * lattice.spacing();
        let nodes = lattice.nodes_in_cube(annulus.center(), reach);
        let roles: Vec<NodeRole> = nodes
            .iter()
            .map(|n| role_of(n, &lattice, &annulus))
            .collect();
        if !roles.contains(&NodeRole::Eligible) {
            return Err(Error::DegenerateAnnulus(format!(
                "no node of spacing {} has its {}-box inside the annulus",
                lattice.spacing(),
                lattice.scale() + 2.0
            )));
        }
        let slot = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (lattice.index_of(n), i))
            .collect();
        Ok(ShellGeometry {
            lattice,
            annulus,
            nodes,
            roles,
            slot,
        })
    }

    pub fn dim(&self) -> usize {
        self.annulus.center().dim()
    }

    pub fn eligible(&self) -> Vec<Site> {
        self.with_role(NodeRole::Eligible)
    }

    pub fn with_role(&self, role: NodeRole) -> Vec<Site> {
        self.nodes
            .iter()
            .zip(&self.roles)
            .filter(|(_, r)| **r == role)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn role(&self, node: &Site) -> Option<NodeRole> {
        self.slot_of(node).map(|i| self.roles[i])
    }

    fn slot_of(&self, node: &Site) -> Option<usize> {
        self.slot.get(&self.lattice.index_of(node)).copied()
    }

    /// Window slots of the `3^d - 1` coarse neighbours of slot `i`.
    fn star_neighbors(&self, i: usize) -> Vec<usize> {
        let idx = self.lattice.index_of(&self.nodes[i]);
        let d = idx.dim();
        let mut out = Vec::with_capacity(3usize.pow(d as u32) - 1);
        let mut step = vec![-1i64; d];
        loop {
            if step.iter().any(|&s| s != 0) {
                let nb = idx.translate(&Site::new(step.clone()));
                if let Some(&j) = self.slot.get(&nb) {
                    out.push(j);
                }
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if step[axis] < 1 {
                    step[axis] += 1;
                    for s in step.iter_mut().skip(axis + 1) {
                        *s = -1;
                    }
                    break;
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub e0: f64,
    pub params: Option<GoodnessParams>,
    pub kind: Option<NodeKind>,
}

/// Good/bad labels on the eligible nodes of a [`ShellGeometry`].
#[derive(Clone, Debug)]
pub struct NodeField {
    pub geometry: ShellGeometry,
    /// Indexed like `geometry.nodes`; meaningful only for eligible nodes.
    good: Vec<bool>,
    pub provenance: Provenance,
    /// Nodes whose box had an energy numerically on its spectrum (labelled bad).
    pub incidents: Vec<Site>,
}

impl NodeField {
    /// Labels from a predicate on eligible nodes.
    pub fn from_predicate(geometry: ShellGeometry, mut is_good: impl FnMut(&Site) -> bool) -> Self {
        let good = geometry
            .nodes
            .iter()
            .zip(&geometry.roles)
            .map(|(n, r)| *r == NodeRole::Eligible && is_good(n))
            .collect();
        NodeField {
            geometry,
            good,
            provenance: Provenance::default(),
            incidents: Vec::new(),
        }
    }

    pub fn is_good(&self, node: &Site) -> Option<bool> {
        let i = self.geometry.slot_of(node)?;
        (self.geometry.roles[i] == NodeRole::Eligible).then_some(self.good[i])
    }

    pub fn eligible_count(&self) -> usize {
        self.geometry
            .roles
            .iter()
            .filter(|r| **r == NodeRole::Eligible)
            .count()
    }

    pub fn bad_count(&self) -> usize {
        self.geometry
            .roles
            .iter()
            .zip(&self.good)
            .filter(|(r, g)| **r == NodeRole::Eligible && !**g)
            .count()
    }

    fn is_bad_eligible(&self, i: usize) -> bool {
        self.geometry.roles[i] == NodeRole::Eligible && !self.good[i]
    }

    /// `G`/`B` for labelled nodes, `.` otherwise; rows along the first axis,
    /// `d <= 2` only.
    pub fn text_grid(&self) -> Option<String> {
        let d = self.geometry.dim();
        if d > 2 {
            return None;
        }
        let lat = &self.geometry.lattice;
        let idx: Vec<Site> = self
            .geometry
            .nodes
            .iter()
            .map(|n| lat.index_of(n))
            .collect();
        let lo: Vec<i64> = (0..d)
            .map(|a| idx.iter().map(|s| s.coords()[a]).min().unwrap())
            .collect();
        let hi: Vec<i64> = (0..d)
            .map(|a| idx.iter().map(|s| s.coords()[a]).max().unwrap())
            .collect();
        let (rows, cols) = if d == 1 {
            ((0, 0), (lo[0], hi[0]))
        } else {
            ((lo[0], hi[0]), (lo[1], hi[1]))
        };
        let mut out = String::new();
        for r in rows.0..=rows.1 {
            for c in cols.0..=cols.1 {
                let key = if d == 1 {
                    Site::new(vec![c])
                } else {
                    Site::new(vec![r, c])
                };
                let ch = match self.geometry.slot.get(&key) {
                    Some(&i) if self.geometry.roles[i] == NodeRole::Eligible => {
                        if self.good[i] {
                            'G'
                        } else {
                            'B'
                        }
                    }
                    _ => '.',
                };
                out.push(ch);
            }
            out.push('\n');
        }
        Some(out)
    }
}

/// Whether `Λ_l(r)` (kind `Good`) or its sub-boxes (kind `Pgood`) are good at `E0`.
/// A box with `E0` numerically in its spectrum counts as bad; the flag says so.
pub fn node_is_good(
    potential: &dyn Potential,
    node: &Site,
    scale: f64,
    e0: f64,
    params: &GoodnessParams,
    kind: NodeKind,
) -> Result<(bool, bool)> {
    let check = |center: &Site, side: f64| -> Result<(bool, bool)> {
        let h = FiniteHamiltonian::assemble(&LatticeBox::new(center.clone(), side), potential);
        match classify_box(&h, e0, params) {
            Ok(r) => Ok((r.good, false)),
            Err(Error::NearSingular { .. }) => Ok((false, true)),
            Err(e) => Err(e),
        }
    };
    match kind {
        NodeKind::Good => check(node, scale),
        NodeKind::Pgood { ratio } => {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(Error::param(
                    "ratio",
                    format!("need 0 < r < 1, got {ratio}"),
                ));
            }
            let small = scale.powf(1.0 / (1.0 + ratio));
            let sub = CoarseLattice::desk(small)?;
            let outer = LatticeBox::new(node.clone(), scale);
            for r in sub.nodes_in(&outer, &outer) {
                let (good, singular) = check(&r, small)?;
                if !good {
                    return Ok((false, singular));
                }
            }
            Ok((true, false))
        }
    }
}

/// Label every eligible node of the geometry by direct classification.
pub fn label_nodes(
    geometry: ShellGeometry,
    potential: &dyn Potential,
    e0: f64,
    params: &GoodnessParams,
    kind: NodeKind,
) -> Result<NodeField> {
    params.validate()?;
    let scale = geometry.lattice.scale();
    let results: Vec<Result<(bool, bool)>> = geometry
        .nodes
        .par_iter()
        .zip(&geometry.roles)
        .map(|(n, r)| {
            if *r == NodeRole::Eligible {
                node_is_good(potential, n, scale, e0, params, kind)
            } else {
                Ok((false, false))
            }
        })
        .collect();
    let mut good = Vec::with_capacity(results.len());
    let mut incidents = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (g, singular) = r?;
        good.push(g);
        if singular {
            incidents.push(geometry.nodes[i].clone());
        }
    }
    Ok(NodeField {
        geometry,
        good,
        provenance: Provenance {
            e0,
            params: Some(*params),
            kind: Some(kind),
        },
        incidents,
    })
}

/// Outcome of the bad-path search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadPath {
    pub exists: bool,
    /// Chain of bad eligible nodes from the inner side to the outer side. Empty
    /// when the inner and outer sides touch directly.
    pub path: Vec<Site>,
}

/// Is there a `*`-connected chain of bad eligible nodes joining the inner
/// side of the annulus to the outer side?
pub fn bad_path_exists(field: &NodeField) -> BadPath {
    let g = &field.geometry;
    let n = g.nodes.len();
    let touches =
        |i: usize, role: NodeRole| g.star_neighbors(i).into_iter().any(|j| g.roles[j] == role);
    for i in 0..n {
        if g.roles[i] == NodeRole::Inner && touches(i, NodeRole::Outer) {
            return BadPath {
                exists: true,
                path: Vec::new(),
            };
        }
    }
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        if field.is_bad_eligible(i) && touches(i, NodeRole::Inner) {
            seen[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        if touches(i, NodeRole::Outer) {
            let mut path = vec![g.nodes[i].clone()];
            let mut cur = i;
            while let Some(p) = parent[cur] {
                path.push(g.nodes[p].clone());
                cur = p;
            }
            path.reverse();
            return BadPath { exists: true, path };
        }
        for j in g.star_neighbors(i) {
            if !seen[j] && field.is_bad_eligible(j) {
                seen[j] = true;
                parent[j] = Some(i);
                queue.push_back(j);
            }
        }
    }
    BadPath {
        exists: false,
        path: Vec::new(),
    }
}

/// A fully contained good shell and the two sides it separates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    /// `A`: good eligible nodes.
    pub nodes: Vec<Site>,
    /// `A_in`: the finite side, including every inner node.
    pub inside: Vec<Site>,
    /// `A_out` restricted to the search window.
    pub outside: Vec<Site>,
}

/// Outer contour of the bad cluster grown from the hole, or `None` when a bad
/// path crosses the annulus.
pub fn extract_shell(field: &NodeField) -> Result<Option<Shell>> {
    if bad_path_exists(field).exists {
        return Ok(None);
    }
    let g = &field.geometry;
    let n = g.nodes.len();
    // B*: inner nodes plus bad eligible nodes connected to them
    let mut in_b = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| g.roles[i] == NodeRole::Inner).collect();
    for &i in &queue {
        in_b[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        for j in g.star_neighbors(i) {
            if !in_b[j] && (g.roles[j] == NodeRole::Inner || field.is_bad_eligible(j)) {
                in_b[j] = true;
                queue.push_back(j);
            }
        }
    }
    let mut in_a = vec![false; n];
    for i in (0..n).filter(|&i| in_b[i]) {
        for j in g.star_neighbors(i) {
            if !in_b[j] {
                in_a[j] = true;
            }
        }
    }
    let pick = |mask: &[bool]| -> Vec<Site> {
        (0..n)
            .filter(|&i| mask[i])
            .map(|i| g.nodes[i].clone())
            .collect()
    };
    let outside_mask: Vec<bool> = (0..n).map(|i| !in_a[i] && !in_b[i]).collect();
    let shell = Shell {
        nodes: pick(&in_a),
        inside: pick(&in_b),
        outside: pick(&outside_mask),
    };
    verify_shell(field, &shell)?;
    Ok(Some(shell))
}

/// Post-hoc check of the shell invariants: all nodes good and fully contained,
/// the inside is closed under `*`-adjacency off the shell, holds every inner
/// node and no outer one.
pub fn verify_shell(field: &NodeField, shell: &Shell) -> Result<()> {
    let g = &field.geometry;
    let fail = |m: String| Err(Error::ShellInvariantViolated(m));
    if shell.nodes.is_empty() {
        return fail("shell is empty".into());
    }
    let mut a = HashSet::new();
    for node in &shell.nodes {
        match (g.role(node), field.is_good(node)) {
            (Some(NodeRole::Eligible), Some(true)) => {}
            _ => {
                return fail(format!(
                    "shell node {node} is not a good fully contained node"
                ))
            }
        }
        let fat = fat_box(node, &g.lattice, &g.annulus);
        if !fat.is_inside(&g.annulus) {
            return fail(format!("box around {node} leaves the annulus"));
        }
        a.insert(g.slot_of(node).unwrap());
    }
    let inside: HashSet<usize> = shell.inside.iter().filter_map(|s| g.slot_of(s)).collect();
    for (i, r) in g.roles.iter().enumerate() {
        if *r == NodeRole::Inner && !inside.contains(&i) {
            return fail(format!("inner node {} is not on the inside", g.nodes[i]));
        }
        if *r == NodeRole::Outer && inside.contains(&i) {
            return fail(format!("outer node {} is on the inside", g.nodes[i]));
        }
    }
    for &i in &inside {
        for j in g.star_neighbors(i) {
            if !inside.contains(&j) && !a.contains(&j) {
                return fail(format!(
                    "inside node {} is adjacent to outside node {}",
                    g.nodes[i], g.nodes[j]
                ));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellBound {
    /// `dist(E, σ^{(I)}(H_{Λ_{L2}})) W(x0; E)`
    pub lhs: f64,
    /// `L2^{2ν} e^{-m l / 3}`
    pub rhs: f64,
    pub distance: f64,
    pub w: f64,
    pub holds: bool,
}

/// Compare both sides of the shell-to-spectrum bound. `spectrum` is
/// `σ^{(I)}(H_{Λ_{L2}(x0)})` and `w` the measured `W(x0; E)`.
pub fn shell_distance_bound(
    shell: Option<&Shell>,
    spectrum: &[f64],
    energy: f64,
    w: f64,
    m: f64,
    nu: f64,
    scale: f64,
    outer_side: f64,
) -> Result<ShellBound> {
    if shell.is_none() {
        return Err(Error::Precondition("no good shell in the annulus".into()));
    }
    let distance = crate::operator::nearest_distance(spectrum, energy);
    let lhs = if w == 0.0 { 0.0 } else { distance * w };
    let rhs = outer_side.powf(2.0 * nu) * (-m * scale / 3.0).exp();
    Ok(ShellBound {
        lhs,
        rhs,
        distance,
        w,
        holds: lhs <= rhs,
    })
}

/// `1 - 2d ((L1+3l)/l)^{d-1} (2^d)^{(L2-L1-l)/l} l^{-pd (L2-L1-l)/((3^d-1) l)}`
pub fn shell_probability_bound(d: usize, scale: f64, inner: f64, outer: f64, p: f64) -> f64 {
    let df = d as f64;
    let span = (outer - inner - scale) / scale;
    let log_fail =
        (2.0 * df).ln() + (df - 1.0) * ((inner + 3.0 * scale) / scale).ln() + span * df * 2f64.ln()
            - p * df * span / (3f64.powi(d as i32) - 1.0) * scale.ln();
    1.0 - log_fail.exp()
}

/// `p` solving `q = l^{-pd}` for a measured per-node bad rate `q`.
pub fn exponent_from_rate(q: f64, scale: f64, d: usize) -> f64 {
    if q <= 0.0 {
        return f64::INFINITY;
    }
    -q.ln() / (d as f64 * scale.ln())
}
