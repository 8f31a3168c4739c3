//! Slow reference implementations, independent of the library fast paths.
#![allow(dead_code)]

use std::collections::HashSet;

use msa_core::lattice::{LatticeBox, Site};
use msa_core::percolation::{NodeRole, ShellGeometry};
use msa_core::{Interval, Potential};
use nalgebra::DMatrix;

/// `H - E` built entry by entry from the definition: diagonal `-2d + V`, `+1` between neighbours.
pub fn brute_matrix(sites: &[Site], potential: &dyn Potential, e: f64) -> DMatrix<f64> {
    let n = sites.len();
    let d = sites[0].dim() as f64;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = -2.0 * d + potential.value(&sites[i]) - e;
        for j in 0..n {
            let diff: i64 = sites[i]
                .coords()
                .iter()
                .zip(sites[j].coords())
                .map(|(a, b)| (a - b).abs())
                .sum();
            if diff == 1 {
                m[(i, j)] = 1.0;
            }
        }
    }
    m
}

fn minor(m: &DMatrix<f64>, row: usize, col: usize) -> DMatrix<f64> {
    m.clone().remove_row(row).remove_column(col)
}

/// `G(x_i, x_j)` by Cramer's rule.
pub fn brute_green_entry(
    sites: &[Site],
    potential: &dyn Potential,
    e: f64,
    i: usize,
    j: usize,
) -> f64 {
    let a = brute_matrix(sites, potential, e);
    let det = a.determinant();
    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
    sign * minor(&a, j, i).determinant() / det
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// diagonal `a` and unit off-diagonal (Sturm sequence).
fn sturm_count(a: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for (k, &ak) in a.iter().enumerate() {
        q = if k == 0 { ak - x } else { ak - x - 1.0 / q };
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalues of a one-dimensional box in `I`, by bisection on Sturm counts.
pub fn brute_spectrum_1d(
    bx: &LatticeBox,
    potential: &dyn Potential,
    interval: &Interval,
) -> Vec<f64> {
    let sites = bx.sites();
    assert_eq!(sites[0].dim(), 1);
    let a: Vec<f64> = sites.iter().map(|s| -2.0 + potential.value(s)).collect();
    let lo_all = a.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 - 1.0;
    let hi_all = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 + 1.0;
    let mut out = Vec::new();
    for k in 0..a.len() {
        // k-th eigenvalue: smallest x with count(x) > k
        let (mut lo, mut hi) = (lo_all, hi_all);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(&a, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        let ev = 0.5 * (lo + hi);
        if interval.contains(ev) {
            out.push(ev);
        }
    }
    out
}

/// Reduced spectrum by definition, with every spectrum taken from Sturm bisection.
pub fn brute_reduced_spectrum(
    potential: &dyn Potential,
    x0: &Site,
    side: f64,
    interval: &Interval,
    scales: &[f64],
    thresholds: &[f64],
) -> Vec<f64> {
    let base = brute_spectrum_1d(&LatticeBox::new(x0.clone(), side), potential, interval);
    let inner: Vec<Vec<f64>> = scales
        .iter()
        .map(|&l| brute_spectrum_1d(&LatticeBox::new(x0.clone(), l), potential, interval))
        .collect();
    base.into_iter()
        .filter(|&e| {
            inner.iter().zip(thresholds).all(|(spec, &t)| {
                let d = spec
                    .iter()
                    .map(|x| (x - e).abs())
                    .fold(f64::INFINITY, f64::min);
                d <= t
            })
        })
        .collect()
}

/// Every simple `*`-path of eligible nodes from the inner side to the outer side,
/// recorded as a bitmask over the eligible nodes.
pub struct PathCatalog {
    pub eligible: Vec<Site>,
    pub masks: HashSet<u64>,
    /// Some inner node touches an outer node directly.
    pub direct: bool,
}

impl PathCatalog {
    pub fn new(g: &ShellGeometry) -> Self {
        let spacing = g.lattice.spacing();
        let adjacent = |a: &Site, b: &Site| a != b && a.sup_distance(b) == spacing;
        let eligible = g.with_role(NodeRole::Eligible);
        assert!(eligible.len() <= 64);
        let inner = g.with_role(NodeRole::Inner);
        let outer = g.with_role(NodeRole::Outer);
        let direct = inner.iter().any(|a| outer.iter().any(|b| adjacent(a, b)));
        let touches_inner: Vec<bool> = eligible
            .iter()
            .map(|e| inner.iter().any(|a| adjacent(a, e)))
            .collect();
        let touches_outer: Vec<bool> = eligible
            .iter()
            .map(|e| outer.iter().any(|b| adjacent(b, e)))
            .collect();
        let n = eligible.len();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| adjacent(&eligible[i], &eligible[j]))
                    .collect()
            })
            .collect();
        let mut masks = HashSet::new();
        fn walk(i: usize, mask: u64, adj: &[Vec<usize>], ends: &[bool], masks: &mut HashSet<u64>) {
            if ends[i] {
                masks.insert(mask);
            }
            for &j in &adj[i] {
                if mask & (1 << j) == 0 {
                    walk(j, mask | (1 << j), adj, ends, masks);
                }
            }
        }
        for s in (0..n).filter(|&i| touches_inner[i]) {
            walk(s, 1 << s, &adj, &touches_outer, &mut masks);
        }
        PathCatalog {
            eligible,
            masks,
            direct,
        }
    }

    /// A good shell exists iff every crossing path contains a good node.
    pub fn shell_exists(&self, good_mask: u64) -> bool {
        !self.direct && self.masks.iter().all(|m| m & good_mask != 0)
    }

    pub fn mask_of(&self, good: impl Fn(&Site) -> bool) -> u64 {
        self.eligible
            .iter()
            .enumerate()
            .filter(|(_, s)| good(s))
            .fold(0, |m, (i, _)| m | (1 << i))
    }
}

/// `brute_shell_search`: does a good shell exist for this labelling?
pub fn brute_shell_search(g: &ShellGeometry, good: impl Fn(&Site) -> bool) -> bool {
    let cat = PathCatalog::new(g);
    cat.shell_exists(cat.mask_of(good))
}
