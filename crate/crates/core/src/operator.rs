//! Finite-volume Anderson Hamiltonians and their dense diagonalization.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::disorder::Potential;
use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, Site};

/// Closed energy interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::param(
                "interval",
                format!("need finite lo <= hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, e: f64) -> bool {
        self.lo <= e && e <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// `dist(E, I^c)`; zero outside `I`.
    pub fn distance_to_complement(&self, e: f64) -> f64 {
        if !self.contains(e) {
            return 0.0;
        }
        (e - self.lo).min(self.hi - e)
    }

    /// Uniform grid from `lo` to `hi` with spacing at most `step`.
    pub fn grid(&self, step: f64) -> Vec<f64> {
        assert!(step > 0.0);
        let n = (self.width() / step).ceil().max(0.0) as usize;
        if n == 0 {
            return vec![self.lo];
        }
        (0..=n)
            .map(|i| self.lo + self.width() * i as f64 / n as f64)
            .collect()
    }
}

/// `H_{ω,Λ}` as a dense symmetric matrix in lexicographic site order.
#[derive(Clone, Debug)]
pub struct FiniteHamiltonian {
    dim: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    potentials: Vec<f64>,
    matrix: DMatrix<f64>,
    region: Option<LatticeBox>,
}

impl FiniteHamiltonian {
    /// Restriction of `H_ω` to a box.
    pub fn assemble(bx: &LatticeBox, potential: &dyn Potential) -> Self {
        let mut h = Self::on_sites(bx.sites(), potential);
        h.region = Some(bx.clone());
        h
    }

    /// Restriction of `H_ω` to an arbitrary finite site list (kept in the given order).
    pub fn on_sites(sites: Vec<Site>, potential: &dyn Potential) -> Self {
        let values = sites.iter().map(|s| potential.value(s)).collect();
        Self::from_potentials(sites, values)
    }

    pub fn from_potentials(sites: Vec<Site>, potentials: Vec<f64>) -> Self {
        assert!(!sites.is_empty(), "Hamiltonian needs at least one site");
        assert_eq!(sites.len(), potentials.len());
        let dim = sites[0].dim();
        let n = sites.len();
        let index: HashMap<Site, usize> = sites
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect();
        let mut matrix = DMatrix::zeros(n, n);
        let diag = -2.0 * dim as f64;
        for (i, s) in sites.iter().enumerate() {
            matrix[(i, i)] = diag + potentials[i];
            for nb in s.neighbors() {
                if let Some(&j) = index.get(&nb) {
                    matrix[(i, j)] = 1.0;
                }
            }
        }
        FiniteHamiltonian {
            dim,
            sites,
            index,
            potentials,
            matrix,
            region: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        self.index.get(site).copied()
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potentials
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The box this operator lives on, when it was assembled from one.
    pub fn region(&self) -> Option<&LatticeBox> {
        self.region.as_ref()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn diagonalize(&self) -> Result<EigenSystem> {
        EigenSystem::of_matrix(self.matrix.clone(), self.sites.clone())
    }

    /// Coordinate-format dump (`row col value`, zero-based), nonzeros only.
    pub fn write_coordinates<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.len();
        writeln!(out, "% {n} {n} symmetric, sites in lexicographic order")?;
        for j in 0..n {
            for i in 0..n {
                let v = self.matrix[(i, j)];
                if v != 0.0 {
                    writeln!(out, "{i} {j} {v:.17e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub sites: Vec<Site>,
}

impl EigenSystem {
    pub fn of_matrix(matrix: DMatrix<f64>, sites: Vec<Site>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 {
            return Err(Error::param("matrix", "dimension must be at least 1"));
        }
        let eig = SymmetricEigen::try_new(matrix, f64::EPSILON, 1000 * n.max(30))
            .ok_or(Error::EigenSolver(n))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            vectors.set_column(col, &(v * sign));
        }
        Ok(EigenSystem {
            values,
            vectors,
            sites,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.vectors.column(k).into_owned()
    }

    /// `max_k |E_k|`
    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    /// `min_k |E - E_k|`; infinite when the spectrum is empty.
    pub fn distance(&self, e: f64) -> f64 {
        nearest_distance(&self.values, e)
    }

    /// Indices of the eigenvalues lying in `I`, ascending.
    pub fn indices_in(&self, interval: &Interval) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| interval.contains(self.values[k]))
            .collect()
    }

    pub fn values_in(&self, interval: &Interval) -> Vec<f64> {
        self.values
            .iter()
            .copied()
            .filter(|e| interval.contains(*e))
            .collect()
    }

    /// `max |V^T H V - diag(E)|`
    pub fn reconstruction_residual(&self, h: &DMatrix<f64>) -> f64 {
        let d = self.vectors.transpose() * h * &self.vectors;
        let mut r = 0.0f64;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                let target = if i == j { self.values[i] } else { 0.0 };
                r = r.max((d[(i, j)] - target).abs());
            }
        }
        r
    }

    /// `max |V^T V - 1|`
    pub fn orthogonality_residual(&self) -> f64 {
        let g = self.vectors.transpose() * &self.vectors;
        let n = g.nrows();
        let mut r = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                r = r.max((g[(i, j)] - target).abs());
            }
        }
        r
    }
}

/// Distance from `e` to a sorted or unsorted list of energies.
pub fn nearest_distance(values: &[f64], e: f64) -> f64 {
    values
        .iter()
        .map(|v| (v - e).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Eigenpairs with eigenvalue in `I`, ascending.
pub fn spectrum_in_interval(sys: &EigenSystem, interval: &Interval) -> Vec<(f64, DVector<f64>)> {
    sys.indices_in(interval)
        .into_iter()
        .map(|k| (sys.values[k], sys.vector(k)))
        .collect()
}

/// `Σ_x <x - a>^{-2ν} Σ_{E_k ∈ I} |φ_k(x)|^2`
pub fn weighted_trace(sys: &EigenSystem, interval: &Interval, nu: f64, anchor: &Site) -> f64 {
    let ks = sys.indices_in(interval);
    sys.sites
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let w = x.offset(anchor).bracket().powf(-2.0 * nu);
            let mass: f64 = ks.iter().map(|&k| sys.vectors[(i, k)].powi(2)).sum();
            w * mass
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{ConstantPotential, DisorderField, Distribution, TablePotential};
    use std::f64::consts::PI;

    fn line(n: i64) -> Vec<Site> {
        (0..n).map(|i| Site::new(vec![i])).collect()
    }

    #[test]
    fn tiny_matrices() {
        let h = FiniteHamiltonian::from_potentials(line(1), vec![0.7]);
        assert_eq!(h.matrix()[(0, 0)], -2.0 + 0.7);
        let h = FiniteHamiltonian::from_potentials(line(2), vec![0.5, 1.5]);
        let m = h.matrix();
        assert_eq!(
            (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]),
            (-1.5, 1.0, 1.0, -0.5)
        );
        let sys = FiniteHamiltonian::from_potentials(line(1), vec![3.0])
            .diagonalize()
            .unwrap();
        assert_eq!(sys.values, vec![1.0]);
        assert_eq!(sys.vectors[(0, 0)], 1.0);
    }

    #[test]
    fn free_path_graph_spectrum() {
        for n in [1usize, 2, 5, 17, 40] {
            let h = FiniteHamiltonian::on_sites(line(n as i64), &ConstantPotential(0.0));
            let sys = h.diagonalize().unwrap();
            let mut exact: Vec<f64> = (1..=n)
                .map(|k| -2.0 + 2.0 * (k as f64 * PI / (n as f64 + 1.0)).cos())
                .collect();
            exact.sort_by(f64::total_cmp);
            for (a, b) in sys.values.iter().zip(&exact) {
                assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn row_sums_count_neighbours() {
        let bx = LatticeBox::centered(2, 5.0);
        let h = FiniteHamiltonian::assemble(&bx, &ConstantPotential(0.0));
        for (i, s) in h.sites().iter().enumerate() {
            let off: f64 = (0..h.len())
                .filter(|&j| j != i)
                .map(|j| h.matrix()[(i, j)])
                .sum();
            let inside = s.neighbors().filter(|n| bx.sites().contains(n)).count();
            assert_eq!(off as usize, inside);
            assert_eq!(h.matrix()[(i, i)], -4.0);
        }
    }

    #[test]
    fn eigen_invariants_and_gershgorin() {
        let f = DisorderField::new(11, Distribution::half_bernoulli(8.0));
        let bx = LatticeBox::centered(2, 9.0);
        let h = FiniteHamiltonian::assemble(&bx, &f);
        let sys = h.diagonalize().unwrap();
        let scale = sys.spectral_norm();
        assert!(sys.reconstruction_residual(h.matrix()) <= 1e-10 * scale);
        assert!(sys.orthogonality_residual() <= 1e-10);
        assert!(sys.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(sys.values.iter().all(|&e| (-8.0 - 8.0..=8.0).contains(&e)));
    }

    #[test]
    fn sub_box_is_principal_submatrix() {
        let f = DisorderField::new(4, Distribution::half_bernoulli(3.0));
        let big = FiniteHamiltonian::assemble(&LatticeBox::centered(2, 9.0), &f);
        let small = FiniteHamiltonian::assemble(&LatticeBox::new(Site::new(vec![1, 0]), 5.0), &f);
        for (i, a) in small.sites().iter().enumerate() {
            for (j, b) in small.sites().iter().enumerate() {
                let (bi, bj) = (big.index_of(a).unwrap(), big.index_of(b).unwrap());
                assert_eq!(small.matrix()[(i, j)], big.matrix()[(bi, bj)]);
            }
        }
    }

    #[test]
    fn interval_selection() {
        let h = FiniteHamiltonian::on_sites(line(5), &ConstantPotential(0.0));
        let sys = h.diagonalize().unwrap();
        let all = spectrum_in_interval(&sys, &Interval::new(-10.0, 10.0).unwrap());
        assert_eq!(all.len(), 5);
        assert!(spectrum_in_interval(&sys, &Interval::new(1.0, 2.0).unwrap()).is_empty());
        // -2 + 2cos(kπ/6) for k = 1, 2, 3; k = 3 sits on the edge, hence the padding
        let half: Vec<f64> =
            spectrum_in_interval(&sys, &Interval::new(-2.0 - 1e-10, 1e-10).unwrap())
                .into_iter()
                .map(|p| p.0)
                .collect();
        let exact: Vec<f64> = (1..=3)
            .rev()
            .map(|k| -2.0 + 2.0 * (k as f64 * PI / 6.0).cos())
            .collect();
        assert_eq!(half.len(), 3);
        for (a, b) in half.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_trace_full_and_empty() {
        let mut t = TablePotential::new(0.0);
        t.set(Site::new(vec![0, 1]), 2.0);
        let bx = LatticeBox::centered(2, 7.0);
        let sys = FiniteHamiltonian::assemble(&bx, &t).diagonalize().unwrap();
        let nu = 1.5;
        let o = Site::origin(2);
        let exact: f64 = bx.sites().iter().map(|x| x.bracket().powf(-2.0 * nu)).sum();
        let full = weighted_trace(&sys, &Interval::new(-100.0, 100.0).unwrap(), nu, &o);
        assert!((full - exact).abs() < 1e-12);
        assert_eq!(
            weighted_trace(&sys, &Interval::new(50.0, 60.0).unwrap(), nu, &o),
            0.0
        );
        let part = weighted_trace(&sys, &Interval::new(-4.0, -1.0).unwrap(), nu, &o);
        let wider = weighted_trace(&sys, &Interval::new(-5.0, -1.0).unwrap(), nu, &o);
        assert!(part <= wider + 1e-15);
    }

    #[test]
    fn coordinate_dump() {
        let h = FiniteHamiltonian::from_potentials(line(2), vec![0.0, 0.0]);
        let mut buf = Vec::new();
        h.write_coordinates(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn interval_grid_spacing() {
        let i = Interval::new(-1.0, 1.0).unwrap();
        let g = i.grid(0.3);
        assert_eq!(*g.first().unwrap(), -1.0);
        assert!((g.last().unwrap() - 1.0).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] - w[0] <= 0.3 + 1e-15));
        assert!(Interval::new(1.0, 0.0).is_err());
    }
}
