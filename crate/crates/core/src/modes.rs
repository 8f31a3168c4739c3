//! Finite-volume proxies for generalized eigenfunctions and the two
//! W-quantities
//!
//! ```text
//! W(x;E)   = sup_ψ |ψ(x)| / ‖T_x^{-1} ψ‖
//! W_L(x;E) = sup_ψ ‖ψ‖_{Λ_{2L,L}(x)} / ‖T_x^{-1} ψ‖
//! ```
//!
//! where ψ runs over the host-box eigenvectors whose eigenvalue lies within
//! `δ_E` of `E`. Both are zero when no eigenvalue is that close.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::Potential;
use crate::error::{Error, Result};
use crate::lattice::{Annulus, BoxNorm, CoarseLattice, LatticeBox, Region, Site};
use crate::operator::{EigenSystem, FiniteHamiltonian, Interval};
use crate::percolation::{node_is_good, NodeKind};
use crate::resolvent::GoodnessParams;

pub const DEFAULT_ENERGY_WINDOW: f64 = 1e-6;

/// A diagonalized host box `Λ_B(x0)` standing in for `ℓ²(Z^d)`.
#[derive(Clone, Debug)]
pub struct ModeHost {
    pub host: LatticeBox,
    pub sys: EigenSystem,
    pub nu: f64,
    /// Norm of the annuli `Λ_{2L,L}(x)` used by [`ModeHost::w_annulus`].
    pub annulus_norm: BoxNorm,
}

impl ModeHost {
    pub fn new(host: LatticeBox, potential: &dyn Potential, nu: f64) -> Result<Self> {
        let d = host.dim() as f64;
        if !(nu > d / 2.0) {
            return Err(Error::param(
                "nu",
                format!("need nu > d/2 = {}, got {nu}", d / 2.0),
            ));
        }
        let sys = FiniteHamiltonian::assemble(&host, potential).diagonalize()?;
        Ok(ModeHost {
            host,
            sys,
            nu,
            annulus_norm: BoxNorm::Sup,
        })
    }

    pub fn with_annulus_norm(mut self, norm: BoxNorm) -> Self {
        self.annulus_norm = norm;
        self
    }

    /// Indices of the eigenpairs with `|E_k - E| <= δ`.
    pub fn proxies(&self, energy: f64, window: f64) -> Vec<usize> {
        (0..self.sys.len())
            .filter(|&k| (self.sys.values[k] - energy).abs() <= window)
            .collect()
    }

    fn column(&self, k: usize) -> &[f64] {
        let n = self.sys.len();
        &self.sys.vectors.as_slice()[k * n..(k + 1) * n]
    }

    fn slot(&self, x: &Site) -> Option<usize> {
        // host sites are listed lexicographically, which is `Site`'s order
        self.sys.sites.binary_search(x).ok()
    }

    /// `‖T_x^{-1} ψ_k‖`
    pub fn inverse_weight_norm(&self, k: usize, anchor: &Site) -> f64 {
        let psi = self.column(k);
        self.sys
            .sites
            .iter()
            .zip(psi)
            .map(|(s, v)| {
                let w = s.offset(anchor).bracket().powf(-self.nu);
                (v * w).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `|ψ_k(x)| / ‖T_x^{-1} ψ_k‖`
    pub fn point_ratio(&self, k: usize, x: &Site) -> f64 {
        let amp = self.slot(x).map_or(0.0, |i| self.column(k)[i].abs());
        if amp == 0.0 {
            return 0.0;
        }
        amp / self.inverse_weight_norm(k, x)
    }

    pub fn annulus(&self, x: &Site, scale: f64) -> Result<Annulus> {
        let ann = Annulus::with_norm(x.clone(), 2.0 * scale, scale, self.annulus_norm)?;
        let inside = ann
            .outer()
            .cube_inside(&self.host)
            .unwrap_or_else(|| ann.outer().is_inside(&self.host));
        if !inside {
            return Err(Error::NotContained(format!(
                "annulus of scale {scale} around {x} leaves the host box of side {}",
                self.host.side()
            )));
        }
        Ok(ann)
    }

    /// `‖ψ_k‖_{Λ_{2L,L}(x)} / ‖T_x^{-1} ψ_k‖`
    pub fn annulus_ratio(&self, k: usize, x: &Site, scale: f64) -> Result<f64> {
        let ann = self.annulus(x, scale)?;
        Ok(self.annulus_ratio_in(k, x, &ann))
    }

    fn annulus_ratio_in(&self, k: usize, x: &Site, ann: &Annulus) -> f64 {
        let psi = self.column(k);
        let mass: f64 = self
            .sys
            .sites
            .iter()
            .zip(psi)
            .filter(|(s, _)| ann.contains(s))
            .map(|(_, v)| v * v)
            .sum();
        if mass == 0.0 {
            return 0.0;
        }
        mass.sqrt() / self.inverse_weight_norm(k, x)
    }

    /// `W(x;E)` over the given proxy set.
    pub fn w_point(&self, proxies: &[usize], x: &Site) -> f64 {
        proxies
            .iter()
            .map(|&k| self.point_ratio(k, x))
            .fold(0.0, f64::max)
    }

    /// `W_L(x;E)` over the given proxy set.
    pub fn w_annulus(&self, proxies: &[usize], x: &Site, scale: f64) -> Result<f64> {
        let ann = self.annulus(x, scale)?;
        Ok(proxies
            .iter()
            .map(|&k| self.annulus_ratio_in(k, x, &ann))
            .fold(0.0, f64::max))
    }

    /// Squared mass of `ψ_k` on the outer 10% shell of the host.
    pub fn boundary_mass(&self, k: usize) -> f64 {
        let inner = LatticeBox::with_norm(
            self.host.center().clone(),
            0.9 * self.host.side(),
            self.host.norm(),
        );
        self.sys
            .sites
            .iter()
            .zip(self.column(k))
            .filter(|(s, _)| !inner.contains(s))
            .map(|(_, v)| v * v)
            .sum()
    }

    /// `(site, |ψ_k(site)|)` in site order.
    pub fn profile(&self, k: usize) -> Vec<(Site, f64)> {
        self.sys
            .sites
            .iter()
            .zip(self.column(k))
            .map(|(s, v)| (s.clone(), v.abs()))
            .collect()
    }

    /// Site where `|ψ_k|` is largest.
    pub fn center_of(&self, k: usize) -> Site {
        let psi = self.column(k);
        let i = (0..psi.len())
            .max_by(|&a, &b| psi[a].abs().total_cmp(&psi[b].abs()))
            .unwrap();
        self.sys.sites[i].clone()
    }

    /// Host eigenvalues in `I`; the energy grid of every scan in this module.
    pub fn grid_in(&self, interval: &Interval) -> Vec<f64> {
        self.sys.values_in(interval)
    }
}

/// `2^{ν/2} <a - b>^ν`, the anchor-shift factor between `T_a^{-1}` and `T_b^{-1}` norms.
pub fn anchor_shift_factor(a: &Site, b: &Site, nu: f64) -> f64 {
    2f64.powf(nu / 2.0) * a.offset(b).bracket().powf(nu)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrapRow {
    pub energy: f64,
    pub proxies: usize,
    pub w_annulus: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrapReport {
    pub scale: f64,
    pub small_scale: f64,
    /// Whether every node box in the annulus `Λ_{2L-,L+}` is good at `E0`.
    pub in_event: bool,
    pub nodes: usize,
    pub bad_nodes: usize,
    /// `e^{-m' γ L θ}`
    pub radius: f64,
    /// `e^{-m γ L θ}`
    pub threshold: f64,
    pub rows: Vec<TrapRow>,
}

impl TrapReport {
    /// `None` outside the event; otherwise whether the bound held at every grid energy.
    pub fn verified(&self) -> Option<bool> {
        self.in_event.then(|| self.rows.iter().all(|r| r.holds))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub m: f64,
    pub m_prime: f64,
    /// Small-scale ratio `γ = l / L`.
    pub gamma: f64,
    /// Multiplies both exponents.
    pub theta_adj: f64,
    pub grid_points: usize,
    pub window: f64,
}

impl Default for TrapParams {
    fn default() -> Self {
        TrapParams {
            m: 0.5,
            m_prime: 0.8,
            gamma: 0.2,
            theta_adj: 1.0,
            grid_points: 5,
            window: DEFAULT_ENERGY_WINDOW,
        }
    }
}

/// The fixed-energy trap: all good node boxes `Λ_{γL}(r)`, `r ∈ C_{γL} ∩ Λ_{2L-,L+}(x0)`
/// with `L± = L(1 ± γ)`, should force `W_L(x0;E) <= e^{-mγLθ}` for
/// `|E - E0| <= e^{-m'γLθ}`.
pub fn trap_check(
    host: &ModeHost,
    potential: &dyn Potential,
    x0: &Site,
    scale: f64,
    e0: f64,
    node_params: &GoodnessParams,
    p: &TrapParams,
) -> Result<TrapReport> {
    if !(p.m < p.m_prime) {
        return Err(Error::param("m_prime", "need m < m'"));
    }
    if !(p.gamma > 0.0 && p.gamma < 1.0) {
        return Err(Error::param("gamma", "need 0 < gamma < 1"));
    }
    let small = p.gamma * scale;
    let lat = CoarseLattice::desk(small)?;
    let ann = Annulus::new(
        x0.clone(),
        2.0 * scale * (1.0 - p.gamma),
        scale * (1.0 + p.gamma),
    )?;
    let nodes = lat.nodes_in(ann.outer(), &ann);
    let labels: Vec<bool> = nodes
        .par_iter()
        .map(|r| node_is_good(potential, r, small, e0, node_params, NodeKind::Good).map(|x| x.0))
        .collect::<Result<_>>()?;
    let bad = labels.iter().filter(|g| !**g).count();
    let radius = (-p.m_prime * small * p.theta_adj).exp();
    let threshold = (-p.m * small * p.theta_adj).exp();
    let mut rows = Vec::new();
    if bad == 0 {
        let k = p.grid_points as i64;
        for i in -k..=k {
            let e = if k == 0 {
                e0
            } else {
                e0 + radius * i as f64 / k as f64
            };
            let proxies = host.proxies(e, p.window);
            let w = host.w_annulus(&proxies, x0, scale)?;
            rows.push(TrapRow {
                energy: e,
                proxies: proxies.len(),
                w_annulus: w,
                holds: w <= threshold,
            });
        }
    }
    Ok(TrapReport {
        scale,
        small_scale: small,
        in_event: bad == 0,
        nodes: nodes.len(),
        bad_nodes: bad,
        radius,
        threshold,
        rows,
    })
}

/// `sup_{E ∈ grid} (W(x0;E) W_L(x0;E))^s` for one host.
pub fn product_sup(
    host: &ModeHost,
    x0: &Site,
    interval: &Interval,
    scale: f64,
    s: f64,
    window: f64,
) -> Result<f64> {
    let mut best = 0.0f64;
    for e in host.grid_in(interval) {
        let proxies = host.proxies(e, window);
        let v = host.w_point(&proxies, x0) * host.w_annulus(&proxies, x0, scale)?;
        best = best.max(if s == 0.0 { 1.0 } else { v.powf(s) });
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    Ok(best)
}
