use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::bell::{sd_violation, CurvePoint};
use crate::error::{Error, Result};
use crate::Setting;

/// Everything `bell` computes, serializable as `key = value` lines plus a
/// `[curve]` table of `phi c c_err n` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct BellReport {
    /// The four CHSH settings with fitted `(V, σ_V)` and `(offset, σ)`.
    pub visibilities: Vec<(Setting, (f64, f64), (f64, f64))>,
    pub c_marginal: (f64, f64),
    pub s_chsh: (f64, f64),
    pub s_chsh_raw: (f64, f64),
    pub freedman_setting: Setting,
    pub freedman_visibility: (f64, f64),
    pub s_freedman: (f64, f64),
    pub curve: Vec<CurvePoint>,
}

impl BellReport {
    pub fn sd_violation_chsh(&self) -> Option<f64> {
        sd_violation(self.s_chsh.0, self.s_chsh.1)
    }

    pub fn sd_violation_freedman(&self) -> Option<f64> {
        sd_violation(self.s_freedman.0, self.s_freedman.1)
    }

    /// `S − 2 > 3σ` for either form.
    pub fn violation(&self) -> bool {
        [self.s_chsh, self.s_freedman].iter().any(|&(s, e)| s - 2.0 > 3.0 * e)
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let pair = |(v, e): (f64, f64)| format!("{v} {e}");
        let sd = |x: Option<f64>| x.map_or("none".to_string(), |v| v.to_string());
        let _ = writeln!(o, "# values are 'estimate standard_error'");
        for (i, (s, v, off)) in self.visibilities.iter().enumerate() {
            let _ = writeln!(o, "setting.{} = {s}", i + 1);
            let _ = writeln!(o, "visibility.{} = {}", i + 1, pair(*v));
            let _ = writeln!(o, "offset.{} = {}", i + 1, pair(*off));
        }
        let _ = writeln!(o, "c_marginal = {}", pair(self.c_marginal));
        let _ = writeln!(o, "s_chsh = {}", pair(self.s_chsh));
        let _ = writeln!(o, "sd_violation_chsh = {}", sd(self.sd_violation_chsh()));
        let _ = writeln!(o, "s_chsh_raw = {}", pair(self.s_chsh_raw));
        let _ = writeln!(o, "freedman_setting = {}", self.freedman_setting);
        let _ = writeln!(o, "freedman_visibility = {}", pair(self.freedman_visibility));
        let _ = writeln!(o, "s_freedman = {}", pair(self.s_freedman));
        let _ = writeln!(o, "sd_violation_freedman = {}", sd(self.sd_violation_freedman()));
        let _ = writeln!(o, "verdict = {}", if self.violation() { "VIOLATION" } else { "no violation" });
        let _ = writeln!(o, "\n[curve]\n# phi c c_err n");
        for p in &self.curve {
            let _ = writeln!(o, "{} {} {} {}", p.phi, p.c, p.c_err, p.n);
        }
        o
    }
}

/// Key/value pairs and curve rows of a report file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedReport {
    pub values: BTreeMap<String, String>,
    pub curve: Vec<CurvePoint>,
}

impl ParsedReport {
    /// First number of a value.
    pub fn number(&self, key: &str) -> Option<f64> {
        self.values.get(key)?.split_whitespace().next()?.parse().ok()
    }

    /// `(estimate, error)` of a value.
    pub fn estimate(&self, key: &str) -> Option<(f64, f64)> {
        let mut t = self.values.get(key)?.split_whitespace();
        Some((t.next()?.parse().ok()?, t.next()?.parse().ok()?))
    }
}

pub fn parse_report(text: &str) -> Result<ParsedReport> {
    let mut out = ParsedReport::default();
    let mut in_curve = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[curve]" {
            in_curve = true;
            continue;
        }
        if in_curve {
            let t: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::parse(i + 1, "curve rows are 'phi c c_err n'");
            if t.len() != 4 {
                return Err(bad());
            }
            out.curve.push(CurvePoint {
                phi: t[0].parse().map_err(|_| bad())?,
                c: t[1].parse().map_err(|_| bad())?,
                c_err: t[2].parse().map_err(|_| bad())?,
                n: t[3].parse().map_err(|_| bad())?,
            });
        } else {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(i + 1, "expected 'key = value'"))?;
            out.values.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(out)
}
