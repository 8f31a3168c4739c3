//! Versioned JSON experiment configuration with field-level validation and
//! dotted-path overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::disorder::Distribution;
use crate::error::{Error, Result};
use crate::modes::{TrapParams, DEFAULT_ENERGY_WINDOW};
use crate::operator::Interval;
use crate::percolation::NodeKind;
use crate::reduction::{derive_constants, ConstantsInput, ConstantsLedger};
use crate::resolvent::GoodnessParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Certify,
    Shell,
    Reduce,
    Trap,
    Keythm,
    Dynamics,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 6] = [
        ProbeKind::Certify,
        ProbeKind::Shell,
        ProbeKind::Reduce,
        ProbeKind::Trap,
        ProbeKind::Keythm,
        ProbeKind::Dynamics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::Certify => "certify",
            ProbeKind::Shell => "shell",
            ProbeKind::Reduce => "reduce",
            ProbeKind::Trap => "trap",
            ProbeKind::Keythm => "keythm",
            ProbeKind::Dynamics => "dynamics",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsaSpec {
    pub m: f64,
    pub eta: f64,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    /// Probability exponent: target `1 - L^{-pd}`.
    pub p: f64,
}

fn default_fraction() -> f64 {
    0.01
}

impl MsaSpec {
    pub fn goodness(&self) -> GoodnessParams {
        GoodnessParams {
            m: self.m,
            eta: self.eta,
            fraction: self.fraction,
        }
    }
}

/// Ledger inputs; the dimension comes from the top level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerSpec {
    pub m0: f64,
    pub eta0: f64,
    pub p0: f64,
    pub p: f64,
    #[serde(default = "one")]
    pub b: f64,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub master: u64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySpec {
    pub scales: Vec<f64>,
    /// Explicit energies; when empty, `grid_points` evenly spaced energies over `I`.
    pub energies: Vec<f64>,
    pub grid_points: usize,
    pub level: f64,
}

impl Default for CertifySpec {
    fn default() -> Self {
        CertifySpec {
            scales: vec![16.0, 32.0],
            energies: vec![],
            grid_points: 3,
            level: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShellSpec {
    pub scale: f64,
    pub inner: f64,
    pub outer: f64,
    /// Defaults to the midpoint of `I`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    pub node: NodeKind,
}

impl Default for ShellSpec {
    fn default() -> Self {
        ShellSpec {
            scale: 8.0,
            inner: 24.0,
            outer: 48.0,
            energy: None,
            node: NodeKind::Good,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceSpec {
    pub scales: Vec<f64>,
    /// `C` in `#σ^red <= C L^{(N2+1)βd}`.
    pub count_constant: f64,
}

impl Default for ReduceSpec {
    fn default() -> Self {
        ReduceSpec {
            scales: vec![32.0, 64.0, 128.0],
            count_constant: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapSpec {
    pub host: f64,
    pub scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    pub params: TrapParams,
}

impl Default for TrapSpec {
    fn default() -> Self {
        TrapSpec {
            host: 121.0,
            scale: 20.0,
            energy: None,
            params: TrapParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeySpec {
    pub host: f64,
    pub scale: f64,
    /// Exponent constant; defaults to the effective `θ` of the ledger.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Defaults to `β/2` from the ledger.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub window: f64,
}

impl Default for KeySpec {
    fn default() -> Self {
        KeySpec {
            host: 181.0,
            scale: 60.0,
            c: None,
            mu: None,
            window: DEFAULT_ENERGY_WINDOW,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSpec {
    pub host: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub orders: Vec<f64>,
    /// `s` in `sup_t moment^s`.
    pub power: f64,
    pub level: f64,
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        DynamicsSpec {
            host: 201.0,
            t_min: 1.0,
            t_max: 1e4,
            points: 400,
            orders: vec![1.0],
            power: 1.0,
            level: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub dimension: usize,
    pub distribution: Distribution,
    pub nu: f64,
    pub interval: Interval,
    pub msa: MsaSpec,
    pub ledger: LedgerSpec,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub probes: Vec<ProbeKind>,
    #[serde(default)]
    pub certify: CertifySpec,
    #[serde(default)]
    pub shell: ShellSpec,
    #[serde(default)]
    pub reduce: ReduceSpec,
    #[serde(default)]
    pub trap: TrapSpec,
    #[serde(default)]
    pub keythm: KeySpec,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
}

fn check(ok: bool, field: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        match value.get("schema_version").and_then(Value::as_u64) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::config(
                    "schema_version",
                    format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
                ))
            }
            None => return Err(Error::config("schema_version", "missing or not an integer")),
        }
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path == "." {
                    "<document>".into()
                } else {
                    path
                },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Apply `key=value` overrides (dotted paths) and revalidate.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        check(
            (1..=3).contains(&d),
            "dimension",
            format!("need 1 <= d <= 3, got {d}"),
        )?;
        self.distribution
            .validate()
            .map_err(|e| Error::config("distribution", e.to_string()))?;
        check(
            self.nu > d as f64 / 2.0,
            "nu",
            format!("need nu > d/2 = {}", d as f64 / 2.0),
        )?;
        Interval::new(self.interval.lo, self.interval.hi)
            .map_err(|e| Error::config("interval", e.to_string()))?;
        check(
            self.interval.lo < self.interval.hi,
            "interval",
            "need lo < hi",
        )?;
        check(self.msa.m > 0.0, "msa.m", "need m > 0")?;
        check(
            self.msa.eta > 0.0 && self.msa.eta < 1.0,
            "msa.eta",
            "need 0 < eta < 1",
        )?;
        check(
            self.msa.fraction > 0.0 && self.msa.fraction <= 1.0,
            "msa.fraction",
            "need 0 < f <= 1",
        )?;
        check(self.msa.p > 0.0, "msa.p", "need p > 0")?;
        check(
            self.seeds.samples >= 1,
            "seeds.samples",
            "need at least one sample",
        )?;
        self.ledger().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                Error::config(format!("ledger.{name}"), reason)
            }
            other => Error::config("ledger", other.to_string()),
        })?;
        let mut seen = self.probes.clone();
        seen.sort();
        seen.dedup();
        check(seen.len() == self.probes.len(), "probes", "duplicate probe")?;

        let c = &self.certify;
        check(
            c.scales.iter().all(|l| *l >= 1.0),
            "certify.scales",
            "need L >= 1",
        )?;
        check(
            c.level > 0.0 && c.level < 1.0,
            "certify.level",
            "need 0 < level < 1",
        )?;
        check(
            !c.energies.is_empty() || c.grid_points >= 1,
            "certify.grid_points",
            "need at least one energy",
        )?;
        let s = &self.shell;
        check(s.scale >= 2.0, "shell.scale", "need l >= 2")?;
        check(
            s.inner > 0.0 && s.outer > s.inner,
            "shell.outer",
            "need 0 < inner < outer",
        )?;
        check(
            self.reduce.scales.iter().all(|l| *l >= 2.0),
            "reduce.scales",
            "need L >= 2",
        )?;
        check(
            self.reduce.count_constant > 0.0,
            "reduce.count_constant",
            "need C > 0",
        )?;
        let t = &self.trap;
        check(
            t.params.m < t.params.m_prime,
            "trap.params.m_prime",
            "need m < m'",
        )?;
        check(
            t.params.gamma > 0.0 && t.params.gamma < 1.0,
            "trap.params.gamma",
            "need 0 < gamma < 1",
        )?;
        check(
            t.host >= 4.0 * t.scale,
            "trap.host",
            "host must be at least 4x the trap scale",
        )?;
        let k = &self.keythm;
        check(
            k.host >= 2.0 * k.scale,
            "keythm.host",
            "host must contain the 2L box",
        )?;
        check(k.window > 0.0, "keythm.window", "need a positive window")?;
        check(k.c.is_none_or(|c| c > 0.0), "keythm.c", "need c > 0")?;
        check(
            k.mu.is_none_or(|m| m > 0.0 && m <= 1.0),
            "keythm.mu",
            "need 0 < mu <= 1",
        )?;
        let dy = &self.dynamics;
        check(dy.host >= 1.0, "dynamics.host", "need a nonempty host")?;
        check(
            dy.t_min > 0.0 && dy.t_max >= dy.t_min,
            "dynamics.t_max",
            "need 0 < t_min <= t_max",
        )?;
        check(dy.points >= 2, "dynamics.points", "need at least two times")?;
        check(
            !dy.orders.is_empty() && dy.orders.iter().all(|p| *p >= 0.0),
            "dynamics.orders",
            "need p >= 0",
        )?;
        check(dy.power > 0.0, "dynamics.power", "need s > 0")?;
        check(
            self.probes
                .contains(&ProbeKind::Dynamics)
                .then_some(self.seeds.samples >= 2)
                .unwrap_or(true),
            "seeds.samples",
            "dynamics needs at least two samples",
        )?;
        Ok(())
    }

    pub fn ledger_input(&self) -> ConstantsInput {
        let l = &self.ledger;
        ConstantsInput {
            m0: l.m0,
            eta0: l.eta0,
            p0: l.p0,
            p: l.p,
            b: l.b,
            d: self.dimension,
            rho: l.rho,
            n2: l.n2,
            j: l.j,
            theta: l.theta,
        }
    }

    pub fn ledger(&self) -> Result<ConstantsLedger> {
        derive_constants(self.ledger_input())
    }

    pub fn energy_interval(&self) -> Interval {
        self.interval
    }

    pub fn midpoint(&self) -> f64 {
        (self.interval.lo + self.interval.hi) / 2.0
    }

    /// `sha256` of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Every desk-scale setting that departs from its derived or documented default.
    pub fn desk_overrides(&self) -> Vec<OverrideEntry> {
        let mut out = Vec::new();
        if let Ok(ledger) = self.ledger() {
            for (name, value, default) in ledger.overrides() {
                out.push(OverrideEntry::new(format!("ledger.{name}"), value, default));
            }
            if self.ledger.n2.is_some() {
                let mut free = self.ledger_input();
                free.n2 = None;
                if let Ok(smallest) = derive_constants(free) {
                    if smallest.n2 != ledger.n2 {
                        out.push(OverrideEntry::new(
                            "ledger.n2",
                            ledger.n2 as f64,
                            smallest.n2 as f64,
                        ));
                    }
                }
            }
            if let Some(c) = self.keythm.c {
                out.push(OverrideEntry::new("keythm.c", c, ledger.c));
            } else if ledger.theta != ledger.c {
                out.push(OverrideEntry::new("keythm.c", ledger.theta, ledger.c));
            }
            if let Some(mu) = self.keythm.mu {
                if mu != ledger.mu {
                    out.push(OverrideEntry::new("keythm.mu", mu, ledger.mu));
                }
            }
        }
        let tp = TrapParams::default();
        let t = &self.trap.params;
        for (name, v, d) in [
            ("trap.params.m", t.m, tp.m),
            ("trap.params.m_prime", t.m_prime, tp.m_prime),
            ("trap.params.gamma", t.gamma, tp.gamma),
            ("trap.params.theta_adj", t.theta_adj, tp.theta_adj),
            ("trap.params.window", t.window, tp.window),
        ] {
            if v != d {
                out.push(OverrideEntry::new(name, v, d));
            }
        }
        if self.keythm.window != DEFAULT_ENERGY_WINDOW {
            out.push(OverrideEntry::new(
                "keythm.window",
                self.keythm.window,
                DEFAULT_ENERGY_WINDOW,
            ));
        }
        if self.msa.fraction != default_fraction() {
            out.push(OverrideEntry::new(
                "msa.fraction",
                self.msa.fraction,
                default_fraction(),
            ));
        }
        let dy = DynamicsSpec::default();
        if self.dynamics.points != dy.points {
            out.push(OverrideEntry::new(
                "dynamics.points",
                self.dynamics.points as f64,
                dy.points as f64,
            ));
        }
        if self.dynamics.t_max != dy.t_max {
            out.push(OverrideEntry::new(
                "dynamics.t_max",
                self.dynamics.t_max,
                dy.t_max,
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverrideEntry {
    pub name: String,
    pub value: f64,
    pub default: f64,
}

impl OverrideEntry {
    pub fn new(name: impl Into<String>, value: f64, default: f64) -> Self {
        OverrideEntry {
            name: name.into(),
            value,
            default,
        }
    }
}

/// Parse `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::config(text, "override must look like key=value")),
    }
}

/// Set a dotted path inside a JSON document. The value is read as JSON when
/// it parses, otherwise as a string. Only the last segment may be new.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = doc;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        let obj = cur.as_object_mut().ok_or_else(|| {
            Error::config(key, format!("`{}` is not an object", parts[..i].join(".")))
        })?;
        if last {
            let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            obj.insert(part.to_string(), v);
            return Ok(());
        }
        cur = obj
            .get_mut(*part)
            .ok_or_else(|| Error::config(key, format!("no field `{}`", parts[..=i].join("."))))?;
    }
    Ok(())
}
