//! Spectrally filtered time evolution `e^{-itH} 1_I(H) δ_x0` and its position moments.
//!
//! Two propagators share one interface. [`SpectralPropagator`] evolves on the
//! eigendecomposition of a desk-size box and handles any interval.
//! [`ChebyshevPropagator`] steps a sparse Hamiltonian with a Bessel-weighted
//! Chebyshev series and is exact to round-off only when `I` covers the whole
//! spectrum; it exists for ballistic reference runs on hosts far beyond dense
//! diagonalization.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::Potential;
use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, Region, Site};
use crate::operator::{EigenSystem, Interval};
use crate::stats::{bootstrap_mean, MeanEstimate};

/// Share of the squared norm on the outer 10% shell of the host that raises the boundary flag.
pub const BOUNDARY_MASS_LIMIT: f64 = 0.01;

/// `t = 0` followed by `points` log-spaced times from `t_min` to `t_max`.
pub fn log_time_grid(t_min: f64, t_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max >= t_min) {
        return Err(Error::param("time grid", "need 0 < t_min <= t_max"));
    }
    if points < 2 {
        return Err(Error::param("time grid", "need at least two points"));
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    let mut times = vec![0.0];
    times.extend((0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()));
    *times.last_mut().unwrap() = t_max;
    Ok(times)
}

/// `‖<X - anchor>^p ψ‖`
pub fn moment(sites: &[Site], anchor: &Site, state: &[Complex64], p: f64) -> f64 {
    sites
        .iter()
        .zip(state)
        .map(|(s, v)| s.offset(anchor).bracket().powf(2.0 * p) * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn norm(state: &[Complex64]) -> f64 {
    state.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Squared mass outside the inner 90% box of the host, relative to the total.
pub fn boundary_fraction(host: &LatticeBox, sites: &[Site], state: &[Complex64]) -> f64 {
    let inner = LatticeBox::with_norm(host.center().clone(), 0.9 * host.side(), host.norm());
    let total: f64 = state.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outer: f64 = sites
        .iter()
        .zip(state)
        .filter(|(s, _)| !inner.contains(s))
        .map(|(_, v)| v.norm_sqr())
        .sum();
    outer / total
}

pub trait Propagator: Sync {
    fn sites(&self) -> &[Site];
    fn host(&self) -> &LatticeBox;
    /// Visit the evolved state at every time of a non-decreasing grid.
    fn run(&self, times: &[f64], visit: &mut dyn FnMut(usize, &[Complex64])) -> Result<()>;
    /// `<ψ, H ψ>`
    fn energy(&self, state: &[Complex64]) -> f64;
}

/// Exact evolution on an eigendecomposition.
#[derive(Clone, Debug)]
pub struct SpectralPropagator {
    host: LatticeBox,
    sys: EigenSystem,
    interval: Interval,
    /// Indices of the eigenvalues in `I`.
    active: Vec<usize>,
    /// `<φ_k, δ_x0>` for the active `k`.
    weights: Vec<f64>,
}

impl SpectralPropagator {
    pub fn new(
        host: LatticeBox,
        sys: EigenSystem,
        interval: Interval,
        initial: &Site,
    ) -> Result<Self> {
        let i0 = sys.sites.binary_search(initial).map_err(|_| {
            Error::NotContained(format!("initial site {initial:?} is not in the host"))
        })?;
        let active = sys.indices_in(&interval);
        let weights = active.iter().map(|&k| sys.vectors[(i0, k)]).collect();
        Ok(SpectralPropagator {
            host,
            sys,
            interval,
            active,
            weights,
        })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// `Σ_k e^{-iE_k t} <φ_k, P_I δ_x0> φ_k`
    pub fn evolve(&self, t: f64) -> Vec<Complex64> {
        let n = self.sys.sites.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (&k, &w) in self.active.iter().zip(&self.weights) {
            let phase = Complex64::from_polar(w, -self.sys.values[k] * t);
            let col = self.sys.vectors.column(k);
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += phase * v;
            }
        }
        out
    }

    /// Dense `P_I`.
    pub fn projector(&self) -> nalgebra::DMatrix<f64> {
        let n = self.sys.sites.len();
        let mut v = nalgebra::DMatrix::zeros(n, self.active.len());
        for (c, &k) in self.active.iter().enumerate() {
            v.set_column(c, &self.sys.vectors.column(k));
        }
        &v * v.transpose()
    }

    /// `(max|P² - P|, max|P - Pᵀ|)`
    pub fn projector_residuals(&self) -> (f64, f64) {
        let p = self.projector();
        let idem = (&p * &p - &p).amax();
        let sym = (&p - p.transpose()).amax();
        (idem, sym)
    }
}

impl Propagator for SpectralPropagator {
    fn sites(&self) -> &[Site] {
        &self.sys.sites
    }

    fn host(&self) -> &LatticeBox {
        &self.host
    }

    fn run(&self, times: &[f64], visit: &mut dyn FnMut(usize, &[Complex64])) -> Result<()> {
        let states: Vec<Vec<Complex64>> = times.par_iter().map(|&t| self.evolve(t)).collect();
        for (i, s) in states.iter().enumerate() {
            visit(i, s);
        }
        Ok(())
    }

    fn energy(&self, state: &[Complex64]) -> f64 {
        // coefficients in the eigenbasis
        (0..self.sys.len())
            .map(|k| {
                let c: Complex64 = self
                    .sys
                    .vectors
                    .column(k)
                    .iter()
                    .zip(state)
                    .map(|(v, s)| s * v)
                    .sum();
                self.sys.values[k] * c.norm_sqr()
            })
            .sum()
    }
}

/// Nearest-neighbour Hamiltonian in adjacency-list form.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    host: LatticeBox,
    sites: Vec<Site>,
    diagonal: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl SparseHamiltonian {
    pub fn assemble(host: &LatticeBox, potential: &dyn Potential) -> Self {
        let sites = host.sites();
        let dim = host.center().dim() as f64;
        let diagonal = sites
            .iter()
            .map(|s| -2.0 * dim + potential.value(s))
            .collect();
        let neighbors = sites
            .iter()
            .map(|s| {
                s.neighbors()
                    .filter_map(|nb| sites.binary_search(&nb).ok())
                    .collect()
            })
            .collect();
        SparseHamiltonian {
            host: host.clone(),
            sites,
            diagonal,
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let mut acc = x[i] * self.diagonal[i];
            for &j in &self.neighbors[i] {
                acc += x[j];
            }
            *o = acc;
        });
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (d, nb) in self.diagonal.iter().zip(&self.neighbors) {
            lo = lo.min(d - nb.len() as f64);
            hi = hi.max(d + nb.len() as f64);
        }
        (lo, hi)
    }
}

/// `J_0(x), ..., J_kmax(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    assert!(x >= 0.0);
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = kmax.max(x.ceil() as usize) + 30 + (40.0 * x.max(kmax as f64)).sqrt() as usize;
    let top = top + top % 2;
    let mut vals = vec![0.0f64; top + 2];
    vals[top] = 1e-300;
    for k in (1..=top).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for (o, v) in out.iter_mut().zip(&vals) {
        *o = v / norm;
    }
    out
}

/// Chebyshev-series evolution of `δ_x0` under the full `e^{-itH}`.
#[derive(Clone, Debug)]
pub struct ChebyshevPropagator {
    h: SparseHamiltonian,
    initial: usize,
    center: f64,
    half_width: f64,
    /// Series truncation: drop terms past `x` once `|J_k| < tol`.
    pub tol: f64,
}

impl ChebyshevPropagator {
    pub fn new(h: SparseHamiltonian, initial: &Site) -> Result<Self> {
        let initial = h.sites.binary_search(initial).map_err(|_| {
            Error::NotContained(format!("initial site {initial:?} is not in the host"))
        })?;
        let (lo, hi) = h.spectral_bounds();
        let center = (lo + hi) / 2.0;
        let half_width = ((hi - lo) / 2.0 * 1.01).max(1e-3);
        Ok(ChebyshevPropagator {
            h,
            initial,
            center,
            half_width,
            tol: 1e-16,
        })
    }

    fn scaled_apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        self.h.apply(x, out);
        let (c, a) = (self.center, self.half_width);
        out.par_iter_mut()
            .zip(x)
            .for_each(|(o, v)| *o = (*o - v * c) / a);
    }

    /// `e^{-i H dt} ψ`
    pub fn step(&self, psi: &[Complex64], dt: f64) -> Vec<Complex64> {
        if dt == 0.0 {
            return psi.to_vec();
        }
        let x = self.half_width * dt.abs();
        let kmax = (x + 12.0 * x.cbrt() + 40.0).ceil() as usize;
        let j = bessel_j_sequence(x, kmax);
        let last = (0..=kmax)
            .rev()
            .find(|&k| (k as f64) < x || j[k].abs() > self.tol)
            .unwrap_or(0);
        let n = psi.len();
        let minus_i = Complex64::new(0.0, -dt.signum());
        let mut acc: Vec<Complex64> = psi.iter().map(|v| v * j[0]).collect();
        let mut prev = psi.to_vec();
        let mut cur = vec![Complex64::new(0.0, 0.0); n];
        self.scaled_apply(&prev, &mut cur);
        let mut phase = minus_i;
        let mut next = vec![Complex64::new(0.0, 0.0); n];
        for k in 1..=last {
            let coef = phase * (2.0 * j[k]);
            acc.par_iter_mut()
                .zip(&cur)
                .for_each(|(a, c)| *a += c * coef);
            if k == last {
                break;
            }
            self.scaled_apply(&cur, &mut next);
            next.par_iter_mut()
                .zip(&prev)
                .for_each(|(nx, p)| *nx = *nx * 2.0 - p);
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
            phase *= minus_i;
        }
        let global = Complex64::from_polar(1.0, -self.center * dt);
        acc.iter_mut().for_each(|a| *a *= global);
        acc
    }
}

impl Propagator for ChebyshevPropagator {
    fn sites(&self) -> &[Site] {
        &self.h.sites
    }

    fn host(&self) -> &LatticeBox {
        &self.h.host
    }

    fn run(&self, times: &[f64], visit: &mut dyn FnMut(usize, &[Complex64])) -> Result<()> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("times", "must be non-decreasing"));
        }
        let mut psi = vec![Complex64::new(0.0, 0.0); self.h.len()];
        psi[self.initial] = Complex64::new(1.0, 0.0);
        let mut now = 0.0;
        for (i, &t) in times.iter().enumerate() {
            psi = self.step(&psi, t - now);
            now = t;
            visit(i, &psi);
        }
        Ok(())
    }

    fn energy(&self, state: &[Complex64]) -> f64 {
        let mut hs = vec![Complex64::new(0.0, 0.0); state.len()];
        self.h.apply(state, &mut hs);
        state.iter().zip(&hs).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub orders: Vec<f64>,
    /// `moments[i][j]`: order `orders[j]` at `times[i]`.
    pub moments: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    pub max_boundary_fraction: f64,
    /// Set when more than 1% of the mass reached the outer 10% shell.
    pub boundary_flag: bool,
}

impl Trajectory {
    pub fn column(&self, order: usize) -> Vec<f64> {
        self.moments.iter().map(|row| row[order]).collect()
    }

    /// Running `sup_{s <= t} moment(s)^power`.
    pub fn running_sup(&self, order: usize, power: f64) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.moments
            .iter()
            .map(|row| {
                best = best.max(row[order].powf(power));
                best
            })
            .collect()
    }

    pub fn sup(&self, order: usize, power: f64) -> f64 {
        self.running_sup(order, power)
            .last()
            .copied()
            .unwrap_or(0.0)
    }
}

pub fn trajectory(
    prop: &dyn Propagator,
    anchor: &Site,
    times: &[f64],
    orders: &[f64],
) -> Result<Trajectory> {
    if orders.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::param("orders", "need p >= 0"));
    }
    let mut moments = vec![Vec::new(); times.len()];
    let mut norms = vec![0.0; times.len()];
    let mut worst = 0.0f64;
    let sites = prop.sites();
    let host = prop.host().clone();
    prop.run(times, &mut |i, state| {
        moments[i] = orders
            .iter()
            .map(|&p| moment(sites, anchor, state, p))
            .collect();
        norms[i] = norm(state);
        worst = worst.max(boundary_fraction(&host, sites, state));
    })?;
    Ok(Trajectory {
        times: times.to_vec(),
        orders: orders.to_vec(),
        moments,
        norms,
        max_boundary_fraction: worst,
        boundary_flag: worst > BOUNDARY_MASS_LIMIT,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdlReport {
    pub order: f64,
    pub power: f64,
    pub t_max: f64,
    pub estimate: MeanEstimate,
    /// `sup_t moment^s` per seed.
    pub per_seed: Vec<f64>,
    /// Running sup per seed over the shared time grid.
    pub running: Vec<Vec<f64>>,
    /// Seeds whose trajectory raised the boundary flag.
    pub flagged: Vec<usize>,
}

/// Disorder average of `sup_t ‖<X>^p e^{-itH} P_I δ_x0‖^s` over a seed family.
pub fn sdl_statistic(
    trajectories: &[Trajectory],
    order: usize,
    power: f64,
    level: f64,
    seed: u64,
) -> Result<SdlReport> {
    if trajectories.len() < 2 {
        return Err(Error::param("seeds", "need at least two trajectories"));
    }
    if !(power > 0.0) {
        return Err(Error::param("s", "need s > 0"));
    }
    let running: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| t.running_sup(order, power))
        .collect();
    let per_seed: Vec<f64> = running
        .iter()
        .map(|r| r.last().copied().unwrap_or(0.0))
        .collect();
    let flagged = trajectories
        .iter()
        .enumerate()
        .filter(|(_, t)| t.boundary_flag)
        .map(|(i, _)| i)
        .collect();
    Ok(SdlReport {
        order: trajectories[0].orders[order],
        power,
        t_max: trajectories[0].times.last().copied().unwrap_or(0.0),
        estimate: bootstrap_mean(&per_seed, level, 2000, seed),
        per_seed,
        running,
        flagged,
    })
}
