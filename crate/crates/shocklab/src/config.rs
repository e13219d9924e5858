//! Run configuration: flat `key = value` text files.
//!
//! Blank lines and lines starting with `#` are ignored.  Unknown keys,
//! duplicate keys and unparsable values are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Result, ShockError};

/// Pipeline selected by the `mode` key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Burgers1d,
    EulerPoisson1d,
    EulerPoisson3d,
    ProfileCertify,
    PoissonTest,
}

impl Mode {
    /// Parse the textual mode name.
    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "burgers-1d" => Ok(Mode::Burgers1d),
            "euler-poisson-1d" => Ok(Mode::EulerPoisson1d),
            "euler-poisson-3d" => Ok(Mode::EulerPoisson3d),
            "profile-certify" => Ok(Mode::ProfileCertify),
            "poisson-test" => Ok(Mode::PoissonTest),
            other => Err(ShockError::Config(format!("unknown mode {other:?}"))),
        }
    }

    /// Textual mode name.
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Burgers1d => "burgers-1d",
            Mode::EulerPoisson1d => "euler-poisson-1d",
            Mode::EulerPoisson3d => "euler-poisson-3d",
            Mode::ProfileCertify => "profile-certify",
            Mode::PoissonTest => "poisson-test",
        }
    }

    /// Spatial dimension of the evolution grid.
    pub fn dim(&self) -> usize {
        match self {
            Mode::EulerPoisson3d | Mode::PoissonTest => 3,
            _ => 1,
        }
    }

    /// Whether the self-consistent potential is active.
    pub fn potential(&self) -> bool {
        matches!(self, Mode::EulerPoisson1d | Mode::EulerPoisson3d)
    }
}

/// Ion background selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonKind {
    /// Smooth ball (slab in 1D) of radius one, scaled for neutrality.
    Ball,
    /// No ions (only meaningful without the potential).
    None,
}

/// `β₁ = 1/(1+α)`, `β₂ = (1-α)/(1+α)`, `β₃ = α/(1+α)` with `α = (γ-1)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaConstants {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

/// Constants of the Riemann-variable form for adiabatic exponent `gamma`.
pub fn beta_constants(gamma: f64) -> Result<BetaConstants> {
    if !(gamma.is_finite() && gamma > 1.0) {
        return Err(ShockError::Config(format!("gamma must exceed 1, got {gamma}")));
    }
    let alpha = (gamma - 1.0) / 2.0;
    Ok(BetaConstants {
        alpha,
        beta1: 1.0 / (1.0 + alpha),
        beta2: (1.0 - alpha) / (1.0 + alpha),
        beta3: alpha / (1.0 + alpha),
    })
}

/// Smallest admissible `κ₀ = 3 / (1 - max(β₁, β₂))`.
pub fn kappa0_min(b: &BetaConstants) -> f64 {
    3.0 / (1.0 - b.beta1.max(b.beta2))
}

/// Parameters of the initial data.
#[derive(Clone, Debug, PartialEq)]
pub struct InitConfig {
    pub epsilon: f64,
    pub kappa0: f64,
    pub gamma: f64,
    pub dim: usize,
    pub n: [usize; 3],
    pub ext: [f64; 3],
    pub seed: u64,
    /// Perturbation size as a fraction of `ε^{1/4}` in the weighted norms.
    pub perturbation_amp: f64,
    pub nplus: IonKind,
    /// Whether the data carry the vacuum envelope (false for the pure
    /// Burgers simple wave on a constant background).
    pub vacuum: bool,
}

/// Full run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub init: InitConfig,
    pub m_audit: f64,
    pub delta: f64,
    pub energy_k: usize,
    pub cfl: f64,
    pub stop_time: Option<f64>,
    pub stop_slope: Option<f64>,
    /// Stop when the steepest gradient spans fewer than this many cells.
    pub resolution_cells: f64,
    /// Stop when the core `|y₁| ≤ 1` spans fewer than this many cells along
    /// `x₁` (zero disables the rule).
    pub core_cells: f64,
    pub max_steps: usize,
    /// Number of earlier records entering the least-squares modulation rates.
    pub rate_window: usize,
    pub audit_every: usize,
    pub snapshots_every: usize,
    pub ygrid_n: [usize; 3],
    pub ygrid_ext: [f64; 3],
    pub out: Option<String>,
    /// Original key/value pairs (sorted), used to compare runs.
    pub raw: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "mode",
    "epsilon",
    "kappa0",
    "gamma",
    "grid.n1",
    "grid.n2",
    "grid.n3",
    "grid.ext1",
    "grid.ext2",
    "grid.ext3",
    "seed",
    "perturbation.amp",
    "nplus.kind",
    "m_audit",
    "delta",
    "energy.k",
    "cfl",
    "stop.time",
    "stop.slope",
    "stop.resolution_cells",
    "stop.core_cells",
    "stop.max_steps",
    "modulation.rate_window",
    "audit.every",
    "snapshots.every",
    "ygrid.n1",
    "ygrid.n2",
    "ygrid.n3",
    "ygrid.ext1",
    "ygrid.ext2",
    "ygrid.ext3",
    "out",
];

/// Split a config text into key/value pairs.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            ShockError::Config(format!("line {}: expected key = value", lineno + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ShockError::Config(format!("line {}: unknown key {k:?}", lineno + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ShockError::Config(format!("line {}: duplicate key {k:?}", lineno + 1)));
        }
    }
    Ok(map)
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| ShockError::Config(format!("invalid value {v:?} for {key}"))),
    }
}

impl RunConfig {
    /// Parse and validate a configuration text.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let raw = parse_pairs(text)?;
        let mode = Mode::parse(
            raw.get("mode")
                .ok_or_else(|| ShockError::Config("missing key mode".into()))?,
        )?;
        let epsilon: f64 = get(&raw, "epsilon")?.unwrap_or(0.05);
        if !(epsilon > 0.0 && epsilon <= 0.2) {
            return Err(ShockError::Config(format!("epsilon {epsilon} outside (0, 0.2]")));
        }
        let gamma: f64 = get(&raw, "gamma")?.unwrap_or(3.0);
        let betas = beta_constants(gamma)?;
        let kmin = kappa0_min(&betas);
        let kappa0: f64 = get(&raw, "kappa0")?.unwrap_or(kmin);
        if !(kappa0 >= kmin * (1.0 - 1e-12)) {
            return Err(ShockError::Config(format!(
                "kappa0 {kappa0} below the admissible minimum {kmin}"
            )));
        }
        let dim = mode.dim();
        let (dn, de, dyn_, dye) = default_grids(mode, epsilon, kappa0);
        let mut n = dn;
        let mut ext = de;
        let mut ygrid_n = dyn_;
        let mut ygrid_ext = dye;
        for a in 0..3 {
            if let Some(v) = get(&raw, &format!("grid.n{}", a + 1))? {
                n[a] = v;
            }
            if let Some(v) = get(&raw, &format!("grid.ext{}", a + 1))? {
                ext[a] = v;
            }
            if let Some(v) = get(&raw, &format!("ygrid.n{}", a + 1))? {
                ygrid_n[a] = v;
            }
            if let Some(v) = get(&raw, &format!("ygrid.ext{}", a + 1))? {
                ygrid_ext[a] = v;
            }
        }
        for a in 0..dim {
            if n[a] < crate::grid::MIN_POINTS || !(ext[a] > 0.0) {
                return Err(ShockError::Config(format!("invalid grid along axis {}", a + 1)));
            }
        }
        let nplus = match raw.get("nplus.kind").map(String::as_str) {
            None if !mode.potential() => IonKind::None,
            None | Some("ball") => IonKind::Ball,
            Some("none") => IonKind::None,
            Some(other) => {
                return Err(ShockError::Config(format!("unknown nplus.kind {other:?}")))
            }
        };
        if mode.potential() && nplus == IonKind::None {
            return Err(ShockError::Config(
                "nplus.kind = none is incompatible with a self-consistent potential".into(),
            ));
        }
        let perturbation_amp: f64 = get(&raw, "perturbation.amp")?.unwrap_or(0.1);
        if !(0.0..=0.5).contains(&perturbation_amp) {
            return Err(ShockError::Config("perturbation.amp must lie in [0, 0.5]".into()));
        }
        let init = InitConfig {
            epsilon,
            kappa0,
            gamma,
            dim,
            n,
            ext,
            seed: get(&raw, "seed")?.unwrap_or(0),
            perturbation_amp,
            nplus,
            vacuum: mode != Mode::Burgers1d,
        };
        let m_audit: f64 = get(&raw, "m_audit")?.unwrap_or(20.0);
        let delta: f64 = get(&raw, "delta")?.unwrap_or(1.0 / 32.0);
        if !(delta > 0.0 && delta <= 1.0 / 32.0) {
            return Err(ShockError::Config("delta must lie in (0, 1/32]".into()));
        }
        let energy_k: usize = get(&raw, "energy.k")?.unwrap_or(2);
        if energy_k > 4 {
            return Err(ShockError::Config(format!(
                "reduced-k build: energy.k = {energy_k} exceeds 4"
            )));
        }
        let cfl: f64 = get(&raw, "cfl")?.unwrap_or(0.4);
        if !(cfl > 0.0 && cfl <= 0.5) {
            return Err(ShockError::Config("cfl must lie in (0, 0.5]".into()));
        }
        let stop_slope: Option<f64> = get(&raw, "stop.slope")?;
        let stop_time: Option<f64> = get(&raw, "stop.time")?;
        let rate_window: usize = get(&raw, "modulation.rate_window")?.unwrap_or(if dim == 3 { 8 } else { 1 });
        if rate_window == 0 {
            return Err(ShockError::Config("modulation.rate_window must be at least 1".into()));
        }
        Ok(RunConfig {
            mode,
            init,
            m_audit,
            delta,
            energy_k,
            cfl,
            stop_time,
            stop_slope: Some(stop_slope.unwrap_or(-1000.0 / epsilon)),
            resolution_cells: get(&raw, "stop.resolution_cells")?.unwrap_or(4.0),
            core_cells: get(&raw, "stop.core_cells")?.unwrap_or(default_core_cells(mode)),
            max_steps: get(&raw, "stop.max_steps")?.unwrap_or(2_000_000),
            rate_window,
            audit_every: get(&raw, "audit.every")?.unwrap_or(default_audit_every(mode)),
            snapshots_every: get(&raw, "snapshots.every")?.unwrap_or(0),
            ygrid_n,
            ygrid_ext,
            out: raw.get("out").cloned(),
            raw,
        })
    }

    /// Canonical text of the configuration (sorted keys).
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.raw {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Beta constants of this configuration.
    pub fn betas(&self) -> BetaConstants {
        beta_constants(self.init.gamma).expect("validated at parse time")
    }
}

fn default_core_cells(mode: Mode) -> f64 {
    match mode {
        Mode::Burgers1d | Mode::EulerPoisson1d => 10.0,
        Mode::EulerPoisson3d => 4.0,
        _ => 0.0,
    }
}

fn default_audit_every(mode: Mode) -> usize {
    match mode {
        Mode::EulerPoisson3d => 4,
        _ => 50,
    }
}

type GridDefaults = ([usize; 3], [f64; 3], [usize; 3], [f64; 3]);

fn default_grids(mode: Mode, eps: f64, kappa0: f64) -> GridDefaults {
    let s = eps.sqrt();
    let c = eps.powf(1.0 / 6.0);
    match mode {
        Mode::Burgers1d => {
            // The perturbation occupies |x₁| ≤ p₂ and drifts by κ₀ε before blowup.
            let p1 = 2.0 * eps.powf(1.4);
            let p2 = p1 + 0.15 * (s - p1);
            let ext = (1.05 * s).max(p2 + kappa0 * eps + 0.1 * s);
            ([4096, 1, 1], [ext, 0.0, 0.0], [161, 1, 1], [4.0, 0.0, 0.0])
        }
        Mode::EulerPoisson1d => ([16384, 1, 1], [1.1, 0.0, 0.0], [161, 1, 1], [4.0, 0.0, 0.0]),
        Mode::PoissonTest => ([64, 64, 64], [1.0, 1.0, 1.0], [81, 31, 31], [4.0, 1.5, 1.5]),
        Mode::EulerPoisson3d => {
            // The self-similar window stays inside the cutoff plateau.
            let y1 = (1.6 * eps.powf(-0.1)).min(4.0);
            let yc = (0.48 * eps.powf(-1.0 / 3.0)).min(1.5);
            ([128, 64, 64], [1.3 * s, 1.25 * c, 1.25 * c], [81, 41, 41], [y1, yc, yc])
        }
        Mode::ProfileCertify => ([101, 101, 101], [10.0, 5.0, 5.0], [101, 101, 101], [10.0, 5.0, 5.0]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_examples() {
        let b = beta_constants(3.0).unwrap();
        assert_eq!((b.beta1, b.beta2, b.beta3), (0.5, 0.0, 0.5));
        let b = beta_constants(2.0).unwrap();
        assert!((b.beta1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.beta2 - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.beta3 - 1.0 / 3.0).abs() < 1e-15);
        let b = beta_constants(5.0 / 3.0).unwrap();
        assert!((b.beta1 - 0.75).abs() < 1e-15);
        assert!((b.beta2 - 0.5).abs() < 1e-15);
        assert!((b.beta3 - 0.25).abs() < 1e-15);
        assert!(beta_constants(1.0).is_err());
        assert_eq!(kappa0_min(&beta_constants(3.0).unwrap()), 6.0);
    }

    #[test]
    fn parse_rules() {
        let c = RunConfig::parse("mode = burgers-1d\nepsilon = 0.05\n# comment\n").unwrap();
        assert_eq!(c.mode, Mode::Burgers1d);
        assert_eq!(c.init.kappa0, 6.0);
        assert!(RunConfig::parse("mode = burgers-1d\nfoo = 1\n").is_err());
        assert!(RunConfig::parse("mode = burgers-1d\nepsilon = x\n").is_err());
        assert!(RunConfig::parse("mode = burgers-1d\nkappa0 = 2\n").is_err());
        assert!(RunConfig::parse("mode = burgers-1d\nepsilon = 0.3\n").is_err());
        assert!(RunConfig::parse("epsilon = 0.1\n").is_err());
        assert!(RunConfig::parse("mode = euler-poisson-1d\nnplus.kind = none\n").is_err());
    }
}
