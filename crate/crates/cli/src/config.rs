//! TOML run configuration.
//!
//! Every section and key is optional; missing values fall back to the
//! defaults listed in the README. Unknown keys are rejected. Errors carry
//! the line of the offending key.

use std::path::{Path, PathBuf};

use ghostlab::formats::parse_phase;
use ghostlab::montecarlo::{NoiseModel, RateInputs};
use ghostlab::{BellEprState, BiphotonParams, Grid, KVector, PhaseProfile, Setting};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// The configuration shipped with the tool.
pub const REFERENCE_CONFIG: &str = include_str!("../../../configs/reference.toml");

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct File {
    source: SourceSection,
    noise: NoiseSection,
    phases: PhasesSection,
    run: RunSection,
    budget: BudgetSection,
    rates: RatesSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SourceSection {
    kappa: f64,
    sigma: f64,
    delta_k: f64,
    xi_k: f64,
    bucket_radius_k: f64,
    fov_half_width: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        let p = BiphotonParams::default();
        SourceSection {
            kappa: p.kappa,
            sigma: p.sigma,
            delta_k: p.delta_k,
            xi_k: p.xi_k,
            bucket_radius_k: p.bucket_radius_k,
            fov_half_width: p.fov_half_width,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NoiseSection {
    p: f64,
    chi_s: f64,
    chi_i: f64,
    zeta_s: f64,
    zeta_i: f64,
    multi_pair: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { p: 0.05, chi_s: 0.075, chi_i: 0.3, zeta_s: 2.5e-4, zeta_i: 1.2e-3, multi_pair: true }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PhasesSection {
    signal: String,
    idler: String,
}

impl Default for PhasesSection {
    fn default() -> Self {
        PhasesSection { signal: "linear 0 0.0124 0".into(), idler: "linear 0 -0.45 0".into() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSection {
    n_trials: u64,
    seed: u64,
    bins: [usize; 2],
    optics_visibility: f64,
    settings: Vec<String>,
    out: String,
    events: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            n_trials: 1_000_000,
            seed: 1,
            bins: [64, 64],
            optics_visibility: 1.0,
            settings: Vec::new(),
            out: "ghostlab-out".into(),
            events: true,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BudgetSection {
    v_ult: Option<f64>,
    optics: Option<f64>,
    alpha: Option<f64>,
    xi_k: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RatesSection {
    trial_rate: f64,
    duty_cycle: f64,
    delay: f64,
    half_retention: f64,
    shape: f64,
}

impl Default for RatesSection {
    fn default() -> Self {
        RatesSection { trial_rate: 5.1e4, duty_cycle: 0.11, delay: 0.15e-6, half_retention: 45e-6, shape: 1.0 }
    }
}

/// Inputs of the visibility budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetInputs {
    pub v_ult: f64,
    pub optics: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub xi_k: f64,
}

/// A fully validated configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub state: BellEprState,
    pub noise: NoiseModel,
    pub n_trials: u64,
    pub seed: u64,
    pub bins: (usize, usize),
    pub optics_visibility: f64,
    pub settings: Vec<Setting>,
    pub out: PathBuf,
    pub events: bool,
    pub budget: BudgetInputs,
    pub rates: RateInputs,
    /// Configuration text as read.
    pub text: String,
    /// Hex SHA-256 of `text`.
    pub sha256: String,
}

/// Line of `key` inside `[section]`, for error messages.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') && !line.starts_with("[[") {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Ctx<'a> {
    text: &'a str,
    origin: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
        let at = match key_line(self.text, section, key) {
            Some(l) => format!("{}:{l}", self.origin),
            None => format!("{} (default value)", self.origin),
        };
        CliError::Config(format!("{at}: [{section}] {key}: {msg}"))
    }
}

/// Parses a setting descriptor `"θs θi"`, with `INF` for a removed signal analyzer.
pub fn parse_setting(theta_s: &str, theta_i: &str) -> Result<Setting, String> {
    let angle = |s: &str| -> Result<f64, String> {
        let v: f64 = s.trim().parse().map_err(|_| format!("cannot parse angle {s:?}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("angle {s:?} is not finite"))
        }
    };
    let ti = angle(theta_i)?;
    if theta_s.trim().eq_ignore_ascii_case("INF") {
        Ok(Setting::marginal(ti))
    } else {
        Ok(Setting::new(angle(theta_s)?, ti))
    }
}

/// Inline profile (`flat`, `linear sx sy off`) or a path to a PHASE v1 file.
fn load_phase(spec: &str, base: &Path) -> Result<PhaseProfile, String> {
    let t: Vec<&str> = spec.split_whitespace().collect();
    match t.first().copied() {
        Some("flat") if t.len() == 1 => Ok(PhaseProfile::flat()),
        Some("linear") => {
            if t.len() != 4 {
                return Err("expected 'linear slope_x slope_y offset'".into());
            }
            let v: Result<Vec<f64>, _> = t[1..].iter().map(|s| s.parse::<f64>()).collect();
            let v = v.map_err(|_| format!("cannot parse numbers in {spec:?}"))?;
            Ok(PhaseProfile::linear(v[0], v[1], v[2]))
        }
        Some(_) => {
            let path = base.join(spec);
            let text = crate::io::read_text(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_phase(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => Err("empty phase specification".into()),
    }
}

impl RunConfig {
    /// The built-in configuration.
    pub fn reference() -> Result<Self, CliError> {
        Self::parse(REFERENCE_CONFIG, "<built-in reference config>", Path::new("."))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: cannot read config: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// `base` resolves relative phase-file paths.
    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<Self, CliError> {
        let file: File = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            let msg = e.message().trim().to_string();
            match line {
                Some(l) => CliError::Config(format!("{origin}:{l}: {msg}")),
                None => CliError::Config(format!("{origin}: {msg}")),
            }
        })?;
        let cx = Ctx { text, origin };

        let s = &file.source;
        let params = BiphotonParams {
            kappa: s.kappa,
            sigma: s.sigma,
            delta_k: s.delta_k,
            xi_k: s.xi_k,
            bucket_radius_k: s.bucket_radius_k,
            fov_half_width: s.fov_half_width,
        };
        for (key, v, ok) in [
            ("kappa", s.kappa, s.kappa > 0.0),
            ("sigma", s.sigma, s.sigma >= 0.0),
            ("delta_k", s.delta_k, s.delta_k >= 0.0),
            ("xi_k", s.xi_k, s.xi_k >= 0.0),
            ("bucket_radius_k", s.bucket_radius_k, s.bucket_radius_k > 0.0),
            ("fov_half_width", s.fov_half_width, s.fov_half_width > 0.0),
        ] {
            if !(ok && v.is_finite()) {
                return Err(cx.err("source", key, format!("invalid value {v}")));
            }
        }
        for w in params.validate().map_err(|e| cx.err("source", "kappa", e))? {
            log::warn!("{w}");
        }
        if s.sigma != 0.0 {
            log::warn!("sigma = {} is ignored by the simulator, which samples the sigma -> 0 limit", s.sigma);
        }

        let phase_s = load_phase(&file.phases.signal, base).map_err(|e| cx.err("phases", "signal", e))?;
        let phase_i = load_phase(&file.phases.idler, base).map_err(|e| cx.err("phases", "idler", e))?;
        phase_s.validate().map_err(|e| cx.err("phases", "signal", e))?;
        phase_i.validate().map_err(|e| cx.err("phases", "idler", e))?;
        let state = BellEprState::new(params, phase_s, phase_i).map_err(|e| cx.err("source", "kappa", e))?;

        let n = &file.noise;
        for (key, v) in [("p", n.p), ("chi_s", n.chi_s), ("chi_i", n.chi_i), ("zeta_s", n.zeta_s), ("zeta_i", n.zeta_i)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(cx.err("noise", key, format!("must be in [0, 1], got {v}")));
            }
        }
        let noise = NoiseModel {
            p: n.p,
            chi_s: n.chi_s,
            chi_i: n.chi_i,
            zeta_s: n.zeta_s,
            zeta_i: n.zeta_i,
            multi_pair: n.multi_pair,
        };
        noise.validate().map_err(|e| cx.err("noise", "zeta_s", e))?;

        let r = &file.run;
        if r.n_trials == 0 {
            return Err(cx.err("run", "n_trials", "must be at least 1"));
        }
        let [nx, ny] = r.bins;
        if nx == 0 || ny == 0 || nx > 4096 || ny > 4096 {
            return Err(cx.err("run", "bins", format!("bin counts must be in 1..=4096, got {nx}x{ny}")));
        }
        Grid::new(nx, ny, params.fov_half_width).map_err(|e| cx.err("run", "bins", e))?;
        if !(r.optics_visibility > 0.0 && r.optics_visibility <= 1.0) {
            return Err(cx.err("run", "optics_visibility", format!("must be in (0, 1], got {}", r.optics_visibility)));
        }
        let settings = if r.settings.is_empty() {
            Setting::standard_set().to_vec()
        } else {
            r.settings
                .iter()
                .map(|d| {
                    let t: Vec<&str> = d.split_whitespace().collect();
                    if t.len() != 2 {
                        return Err(format!("setting {d:?} must be 'theta_s theta_i' (theta_s may be INF)"));
                    }
                    parse_setting(t[0], t[1])
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| cx.err("run", "settings", e))?
        };
        if r.out.trim().is_empty() {
            return Err(cx.err("run", "out", "output directory must not be empty"));
        }

        let b = &file.budget;
        let budget = BudgetInputs {
            v_ult: b.v_ult.unwrap_or(0.886),
            optics: b.optics.unwrap_or(r.optics_visibility),
            alpha: b.alpha.unwrap_or_else(|| state.phase_s.gradient(KVector::zero()).norm()),
            kappa: params.kappa,
            xi_k: b.xi_k.unwrap_or(params.xi_k),
        };
        for (key, v) in [("v_ult", budget.v_ult), ("optics", budget.optics)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(cx.err("budget", key, format!("must be in (0, 1], got {v}")));
            }
        }
        if !budget.alpha.is_finite() || budget.xi_k.is_nan() || budget.xi_k < 0.0 {
            return Err(cx.err("budget", "alpha", "alpha must be finite and xi_k >= 0"));
        }

        let q = &file.rates;
        let rates = RateInputs {
            trial_rate: q.trial_rate,
            duty_cycle: q.duty_cycle,
            p: n.p,
            chi_s: n.chi_s,
            chi_i: n.chi_i,
            delay: q.delay,
            half_retention: q.half_retention,
            shape: q.shape,
        };
        for (key, v, ok) in [
            ("trial_rate", q.trial_rate, q.trial_rate > 0.0),
            ("duty_cycle", q.duty_cycle, q.duty_cycle > 0.0 && q.duty_cycle <= 1.0),
            ("delay", q.delay, q.delay >= 0.0),
            ("half_retention", q.half_retention, q.half_retention > 0.0),
            ("shape", q.shape, q.shape > 0.0),
        ] {
            if !(ok && v.is_finite()) {
                return Err(cx.err("rates", key, format!("invalid value {v}")));
            }
        }

        Ok(RunConfig {
            state,
            noise,
            n_trials: r.n_trials,
            seed: r.seed,
            bins: (nx, ny),
            optics_visibility: r.optics_visibility,
            settings,
            out: PathBuf::from(&r.out),
            events: r.events,
            budget,
            rates,
            text: text.to_string(),
            sha256: sha256_hex(text.as_bytes()),
        })
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.bins.0, self.bins.1, self.state.params.fov_half_width).expect("validated at load")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
