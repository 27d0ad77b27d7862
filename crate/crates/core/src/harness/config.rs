//! Experiment configuration files.
//!
//! The format is line based: `[section]` headers followed by `key = value`
//! pairs, with `#` starting a comment. Power values take a `dBm`, `W`, `mW`
//! or `uW` suffix; a bare number is read as watts.
//!
//! ```text
//! [system]
//! k = 4
//! p_s_max = 18 dBm
//!
//! [sweep]
//! variable = p_s_max
//! values = 0 dBm, 12 dBm, 24 dBm
//!
//! [run]
//! schemes = Alg1, EPS, DCC
//! trials = 50
//! ```

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use crate::baselines::{SchemeId, SchemeSpec};
use crate::channel::Geometry;
use crate::error::{Error, Result};
use crate::ia::IaOptions;
use crate::model::{NonlinearEhParams, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVar {
    None,
    /// Per-source power budget, swept in dBm.
    PsMax,
    /// Relay antenna count.
    N,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::None => "none",
            SweepVar::PsMax => "p_s_max_dbm",
            SweepVar::N => "n",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn none() -> Self {
        Self { variable: SweepVar::None, values: vec![0.0] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub eh: NonlinearEhParams,
    pub geometry: Geometry,
    pub sweep: Sweep,
    pub schemes: Vec<SchemeSpec>,
    pub trials: usize,
    pub seed: u64,
    pub parallel: usize,
    pub options: IaOptions,
}

/// Reference gain that puts the harvester input in the active part of the
/// logistic curve at the reference distances and power budgets.
pub const DEFAULT_REF_GAIN_DB: f64 = 30.0;

impl Default for ExperimentConfig {
    fn default() -> Self {
        let k = 4;
        Self {
            params: SystemParams::reference(k, 4, dbm_to_watts(18.0)),
            eh: NonlinearEhParams::reference(),
            geometry: Geometry::uniform(k, 10.0, 15.0, 3.5, DEFAULT_REF_GAIN_DB),
            sweep: Sweep::none(),
            schemes: [SchemeId::Alg1, SchemeId::Ebt, SchemeId::Eps, SchemeId::EbtEps, SchemeId::NonSic, SchemeId::Dcc]
                .into_iter()
                .map(SchemeSpec::of)
                .collect(),
            trials: 50,
            seed: 1,
            parallel: 1,
            options: IaOptions::default(),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}

/// Parses a power with an optional unit suffix into watts.
pub fn parse_power(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let split = s.find(|c: char| c.is_ascii_alphabetic() || c == 'µ').unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let v: f64 = num.trim().parse().map_err(|_| format!("cannot read '{s}' as a power"))?;
    let w = match unit.trim() {
        "" | "W" => v,
        "dBm" => dbm_to_watts(v),
        "mW" => v * 1e-3,
        "uW" | "µW" => v * 1e-6,
        u => return Err(format!("unknown power unit '{u}'")),
    };
    if !w.is_finite() {
        return Err(format!("power '{s}' is not finite"));
    }
    Ok(w)
}

/// Like [`parse_power`] but in dBm, keeping dBm literals exact.
fn parse_power_dbm(s: &str) -> std::result::Result<f64, String> {
    match s.trim().strip_suffix("dBm") {
        Some(num) => parse_num(num),
        None => parse_power(s).map(watts_to_dbm),
    }
}

fn parse_num<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim().parse().map_err(|_| format!("cannot read '{}' as a number", s.trim()))
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(f).collect()
}

/// Per-pair distances may be given once (shared by all pairs) or once per pair.
fn expand(v: Vec<f64>, k: usize, key: &str) -> std::result::Result<Vec<f64>, String> {
    match v.len() {
        1 => Ok(vec![v[0]; k]),
        n if n == k => Ok(v),
        n => Err(format!("{key} lists {n} values but K = {k}")),
    }
}

#[derive(Default)]
struct Raw {
    k: Option<usize>,
    n: Option<usize>,
    sigma_ant2: Option<f64>,
    sigma_r2: Option<f64>,
    sigma_d2: Option<f64>,
    p_sta: Option<f64>,
    p_s_max: Option<f64>,
    p_acc_min: Option<f64>,
    p_dcc_min: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    p_eh_max: Option<f64>,
    d_sr: Option<Vec<f64>>,
    d_rd: Option<Vec<f64>>,
    ple: Option<f64>,
    ref_gain_db: Option<f64>,
    sweep_var: Option<SweepVar>,
    sweep_values: Option<String>,
    schemes: Option<Vec<SchemeSpec>>,
    trials: Option<usize>,
    seed: Option<u64>,
    parallel: Option<usize>,
    max_iter: Option<usize>,
    max_feasibility_iter: Option<usize>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = Raw::default();
        let mut section = String::new();
        let mut seen = HashSet::new();
        let mut sweep_line = 0;
        for (idx, full) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::Config { line: line_no, msg };
            let line = full.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| err(format!("malformed section header '{line}'")))?;
                section = name.trim().to_string();
                if !matches!(section.as_str(), "system" | "eh" | "geometry" | "sweep" | "run") {
                    return Err(err(format!("unknown section [{section}]")));
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if section.is_empty() {
                return Err(err(format!("'{key}' appears before any section header")));
            }
            if !seen.insert(format!("{section}.{key}")) {
                return Err(err(format!("duplicate key '{key}' in [{section}]")));
            }
            let r: std::result::Result<(), String> = (|| {
                match (section.as_str(), key) {
                    ("system", "k") => raw.k = Some(parse_num(value)?),
                    ("system", "n") => raw.n = Some(parse_num(value)?),
                    ("system", "sigma_ant2") => raw.sigma_ant2 = Some(parse_power(value)?),
                    ("system", "sigma_r2") => raw.sigma_r2 = Some(parse_power(value)?),
                    ("system", "sigma_d2") => raw.sigma_d2 = Some(parse_power(value)?),
                    ("system", "p_sta") => raw.p_sta = Some(parse_power(value)?),
                    ("system", "p_s_max") => raw.p_s_max = Some(parse_power(value)?),
                    ("system", "p_acc_min") => raw.p_acc_min = Some(parse_power(value)?),
                    ("system", "p_dcc_min") => raw.p_dcc_min = Some(parse_power(value)?),
                    ("eh", "a") => raw.a = Some(parse_num(value)?),
                    ("eh", "b") => raw.b = Some(parse_power(value)?),
                    ("eh", "p_eh_max") => raw.p_eh_max = Some(parse_power(value)?),
                    ("geometry", "d_sr") => raw.d_sr = Some(parse_list(value, parse_num)?),
                    ("geometry", "d_rd") => raw.d_rd = Some(parse_list(value, parse_num)?),
                    ("geometry", "ple") => raw.ple = Some(parse_num(value)?),
                    ("geometry", "ref_gain_db") => raw.ref_gain_db = Some(parse_num(value)?),
                    ("sweep", "variable") => {
                        raw.sweep_var = Some(match value {
                            "none" => SweepVar::None,
                            "p_s_max" => SweepVar::PsMax,
                            "n" => SweepVar::N,
                            v => return Err(format!("cannot sweep '{v}' (expected p_s_max, n or none)")),
                        })
                    }
                    ("sweep", "values") => raw.sweep_values = Some(value.to_string()),
                    ("run", "schemes") => {
                        raw.schemes = Some(parse_list(value, |s| {
                            s.trim().parse::<SchemeId>().map(SchemeSpec::of).map_err(|e| e.to_string())
                        })?)
                    }
                    ("run", "trials") => raw.trials = Some(parse_num(value)?),
                    ("run", "seed") => raw.seed = Some(parse_num(value)?),
                    ("run", "parallel") => raw.parallel = Some(parse_num(value)?),
                    ("run", "max_iter") => raw.max_iter = Some(parse_num(value)?),
                    ("run", "max_feasibility_iter") => raw.max_feasibility_iter = Some(parse_num(value)?),
                    ("run", "abs_tol") => raw.abs_tol = Some(parse_num(value)?),
                    ("run", "rel_tol") => raw.rel_tol = Some(parse_num(value)?),
                    (s, k) => return Err(format!("unknown key '{k}' in [{s}]")),
                }
                Ok(())
            })();
            r.map_err(err)?;
            if section == "sweep" {
                sweep_line = line_no;
            }
        }
        let cfg = raw.build(sweep_line)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config { line: 0, msg });
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.parallel == 0 {
            return bad("parallel must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return bad("no schemes selected".into());
        }
        if self.geometry.k() != self.params.k {
            return bad(format!("geometry describes {} pairs but K = {}", self.geometry.k(), self.params.k));
        }
        for v in &self.sweep.values {
            let ok = match self.sweep.variable {
                SweepVar::None => true,
                SweepVar::PsMax => (-30.0..=60.0).contains(v),
                SweepVar::N => *v >= 1.0 && *v <= 256.0 && v.fract() == 0.0,
            };
            if !ok {
                return bad(format!("sweep value {v} is outside the physical range of {}", self.sweep.variable.name()));
            }
        }
        if self.sweep.values.is_empty() {
            return bad("sweep has no values".into());
        }
        if self.params.k != 1 && self.schemes.iter().any(|s| s.id == SchemeId::OracleGrid) {
            return bad("the grid oracle is only defined for K = 1".into());
        }
        self.params.validate().or_else(|e| bad(e.to_string()))?;
        self.geometry.validate().or_else(|e| bad(e.to_string()))
    }

    /// System parameters at one sweep point.
    pub fn params_at(&self, value: f64) -> SystemParams {
        let mut p = self.params.clone();
        match self.sweep.variable {
            SweepVar::None => {}
            SweepVar::PsMax => p.p_s_max = vec![dbm_to_watts(value); p.k],
            SweepVar::N => p.n = value as usize,
        }
        p
    }
}

impl Raw {
    fn build(self, sweep_line: usize) -> Result<ExperimentConfig> {
        let d = ExperimentConfig::default();
        let cfg_err = |msg: String| Error::Config { line: 0, msg };
        let k = self.k.unwrap_or(d.params.k);
        let n = self.n.unwrap_or(d.params.n);
        let params = SystemParams::uniform(
            k,
            n,
            self.sigma_ant2.unwrap_or(d.params.sigma_ant2),
            self.sigma_r2.unwrap_or(d.params.sigma_r2),
            self.sigma_d2.unwrap_or(d.params.sigma_k2[0]),
            self.p_sta.unwrap_or(d.params.p_sta),
            self.p_s_max.unwrap_or(d.params.p_s_max[0]),
            self.p_acc_min.unwrap_or(d.params.p_acc_min),
            self.p_dcc_min.unwrap_or(d.params.p_dcc_min),
        );
        let eh = NonlinearEhParams::new(
            self.a.unwrap_or(d.eh.a),
            self.b.unwrap_or(d.eh.b),
            self.p_eh_max.unwrap_or(d.eh.p_eh_max),
        )
        .map_err(|e| cfg_err(e.to_string()))?;
        let geometry = Geometry {
            d_sr: expand(self.d_sr.unwrap_or(vec![d.geometry.d_sr[0]]), k, "d_sr").map_err(cfg_err)?,
            d_rd: expand(self.d_rd.unwrap_or(vec![d.geometry.d_rd[0]]), k, "d_rd").map_err(cfg_err)?,
            ple: self.ple.unwrap_or(d.geometry.ple),
            ref_gain_db: self.ref_gain_db.unwrap_or(d.geometry.ref_gain_db),
        };
        let variable = self.sweep_var.unwrap_or(SweepVar::None);
        let sweep_err = |msg: String| Error::Config { line: sweep_line, msg };
        let sweep = match (variable, self.sweep_values) {
            (SweepVar::None, None) => Sweep::none(),
            (SweepVar::None, Some(_)) => return Err(sweep_err("sweep values given without a sweep variable".into())),
            (_, None) => return Err(sweep_err("sweep variable given without values".into())),
            (SweepVar::PsMax, Some(v)) => Sweep {
                variable,
                values: parse_list(&v, parse_power_dbm).map_err(sweep_err)?,
            },
            (SweepVar::N, Some(v)) => Sweep { variable, values: parse_list(&v, parse_num::<f64>).map_err(sweep_err)? },
        };
        let options = IaOptions {
            max_iter: self.max_iter.unwrap_or(d.options.max_iter),
            max_feasibility_iter: self.max_feasibility_iter.unwrap_or(d.options.max_feasibility_iter),
            abs_tol: self.abs_tol.unwrap_or(d.options.abs_tol),
            rel_tol: self.rel_tol.unwrap_or(d.options.rel_tol),
            ..d.options
        };
        Ok(ExperimentConfig {
            params,
            eh,
            geometry,
            sweep,
            schemes: self.schemes.unwrap_or(d.schemes),
            trials: self.trials.unwrap_or(d.trials),
            seed: self.seed.unwrap_or(d.seed),
            parallel: self.parallel.unwrap_or(d.parallel),
            options,
        })
    }
}
