//! Restricted schemes used as benchmarks, a grid oracle for single-pair
//! instances, and an independent feasibility checker.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ia::{self, Ctx, IaConfig, IaOptions, IterationTrace};
use crate::model::{self, Allocation, CVec, ChannelSet, Mode, NonlinearEhParams, PowerReport, RateReport, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    Alg1,
    Ebt,
    Eps,
    EbtEps,
    NonSic,
    Dcc,
    OracleGrid,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] =
        [SchemeId::Alg1, SchemeId::Ebt, SchemeId::Eps, SchemeId::EbtEps, SchemeId::NonSic, SchemeId::Dcc, SchemeId::OracleGrid];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Alg1 => "Alg1",
            SchemeId::Ebt => "EBT",
            SchemeId::Eps => "EPS",
            SchemeId::EbtEps => "EBT_EPS",
            SchemeId::NonSic => "NonSIC",
            SchemeId::Dcc => "DCC",
            SchemeId::OracleGrid => "OracleGrid",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !matches!(c, '_' | '-')).collect::<String>().to_ascii_lowercase();
        Ok(match key.as_str() {
            "alg1" => SchemeId::Alg1,
            "ebt" => SchemeId::Ebt,
            "eps" => SchemeId::Eps,
            "ebteps" => SchemeId::EbtEps,
            "nonsic" => SchemeId::NonSic,
            "dcc" => SchemeId::Dcc,
            "oraclegrid" | "oracle" => SchemeId::OracleGrid,
            _ => return Err(Error::InvalidInput(format!("unknown scheme '{s}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSpec {
    pub id: SchemeId,
    pub fixed_tau: Option<f64>,
    pub fixed_alpha: Option<f64>,
    pub sic: bool,
    pub mode: Mode,
}

impl SchemeSpec {
    pub fn of(id: SchemeId) -> Self {
        let base = Self { id, fixed_tau: None, fixed_alpha: None, sic: true, mode: Mode::Acc };
        match id {
            SchemeId::Alg1 | SchemeId::OracleGrid => base,
            SchemeId::Ebt => Self { fixed_tau: Some(0.5), ..base },
            SchemeId::Eps => Self { fixed_alpha: Some(0.5), ..base },
            SchemeId::EbtEps => Self { fixed_tau: Some(0.5), fixed_alpha: Some(0.5), ..base },
            SchemeId::NonSic => Self { sic: false, ..base },
            SchemeId::Dcc => Self { mode: Mode::Dcc, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = Self::of(self.id);
        let pins_ok = match self.id {
            SchemeId::Ebt => self.fixed_tau.is_some(),
            SchemeId::Eps => self.fixed_alpha.is_some(),
            SchemeId::EbtEps => self.fixed_tau.is_some() && self.fixed_alpha.is_some(),
            _ => true,
        };
        if !pins_ok || self.sic != expected.sic || self.mode != expected.mode {
            return Err(Error::InvalidInput(format!("scheme {} has inconsistent settings: {self:?}", self.id)));
        }
        self.ia_config().validate()
    }

    pub fn ia_config(&self) -> IaConfig {
        IaConfig { mode: self.mode, sic: self.sic, fixed_tau: self.fixed_tau, fixed_alpha: self.fixed_alpha }
    }
}

#[derive(Clone, Debug)]
pub struct SchemeRun {
    pub alloc: Allocation,
    pub rates: RateReport,
    pub power: PowerReport,
    pub trace: IterationTrace,
    pub feasibility_iterations: usize,
    pub refinement_iterations: usize,
    pub converged: bool,
    /// Whether every reformulated constraint was active at the output (None for the oracle).
    pub lemma_active: Option<bool>,
    pub warning: Option<String>,
}

impl SchemeRun {
    pub fn min_rate(&self) -> f64 {
        self.rates.min_rate
    }
}

/// Runs one scheme on one channel realization.
pub fn run_scheme(
    spec: &SchemeSpec,
    chan: &ChannelSet,
    params: &SystemParams,
    eh: &NonlinearEhParams,
    opts: &IaOptions,
) -> Result<SchemeRun> {
    spec.validate()?;
    if spec.id == SchemeId::OracleGrid {
        let oracle = oracle_grid_k1(chan, params, eh, ORACLE_DENSITY)?;
        let (rates, power) = model::evaluate(chan, params, eh, &oracle.alloc, Mode::Acc, true)?;
        return Ok(SchemeRun {
            alloc: oracle.alloc,
            rates,
            power,
            trace: IterationTrace::default(),
            feasibility_iterations: 0,
            refinement_iterations: 0,
            converged: true,
            lemma_active: None,
            warning: None,
        });
    }
    let cfg = spec.ia_config();
    let ctx = Ctx { chan, params, eh, cfg: &cfg };
    let out = ia::run(&ctx, opts)?;
    let lemma = ia::verify_lemma1(&ctx, &out.point, out.r, LEMMA_TOL)?;
    Ok(SchemeRun {
        alloc: out.alloc,
        rates: out.rates,
        power: out.power,
        trace: out.trace,
        feasibility_iterations: out.feasibility_iterations,
        refinement_iterations: out.refinement_iterations,
        converged: out.converged,
        lemma_active: Some(lemma.all_active()),
        warning: out.warning,
    })
}

pub const LEMMA_TOL: f64 = 1e-4;
pub const ORACLE_DENSITY: usize = 64;
/// Decades covered by the logarithmic source-power grid below P_S^max.
pub const ORACLE_POWER_DECADES: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub alloc: Allocation,
    pub objective: f64,
    /// Upper bound on the continuous optimum minus `objective`; see
    /// [`oracle_grid_k1`].
    pub cell_gain: f64,
}

struct SinglePair {
    h_gain: f64,
    g_gain: f64,
    noise_ant: f64,
    noise_r: f64,
    noise_d: f64,
    p_sta: f64,
    p_acc_min: f64,
}

impl SinglePair {
    /// Best rate for given (τ, α, β, p²); the beamformer takes all spare harvested power.
    fn objective(&self, eh: &NonlinearEhParams, tau: f64, alpha: f64, beta: f64, p2: f64) -> Option<f64> {
        let x = p2 * self.h_gain;
        if beta * (tau * (1.0 - alpha) * p2 * self.h_gain) < self.p_acc_min {
            return None;
        }
        let spare = tau * eh.harvest((1.0 - alpha) * (1.0 - beta) * x) - self.p_sta;
        if spare < 0.0 {
            return None;
        }
        let r2 = (1.0 - tau) * (spare / (1.0 - tau) * self.g_gain / self.noise_d).ln_1p();
        let r1 = tau * (x / (self.noise_ant + self.noise_r / alpha)).ln_1p();
        Some(r1.min(r2))
    }

    fn cell_upper_bound(&self, eh: &NonlinearEhParams, density: usize, powers: &[f64]) -> f64 {
        let d = density as f64;
        let edges: Vec<f64> = (0..=density).map(|i| i as f64 / d).collect();
        let mut p_edges = vec![0.0];
        p_edges.extend_from_slice(powers);
        let mut upper: f64 = 0.0;
        for p_cell in p_edges.windows(2) {
            let x_hi = p_cell[1] * self.h_gain;
            for t in edges.windows(2) {
                let (t_lo, t_hi) = (t[0], t[1]);
                for a in edges.windows(2) {
                    let (a_lo, a_hi) = (a[0], a[1]);
                    let acc_hi = t_hi * (1.0 - a_lo) * x_hi;
                    let Some(b) = edges.windows(2).find(|b| b[1] * acc_hi >= self.p_acc_min) else {
                        continue;
                    };
                    let spare = t_hi * eh.harvest((1.0 - a_lo) * (1.0 - b[0]) * x_hi) - self.p_sta;
                    if spare < 0.0 {
                        continue;
                    }
                    let r1 = t_hi * (x_hi / (self.noise_ant + self.noise_r / a_hi)).ln_1p();
                    // y·ln(1 + c/y) increases with y = 1 − τ
                    let r2 = (1.0 - t_lo) * (spare / (1.0 - t_lo) * self.g_gain / self.noise_d).ln_1p();
                    upper = upper.max(r1.min(r2));
                }
            }
        }
        upper
    }
}

/// Exhaustive search over (τ, α, β, p) for a single pair with the beamformer
/// matched to the downlink channel and its norm set by the power budget.
///
/// Fractions take the values `i/d`, `i = 1..d−1`; source power takes `d`
/// logarithmically spaced values ending at P_S^max. Both grids nest when `d`
/// doubles. For fixed (τ, α, p) the rate is nonincreasing in β and the AC
/// supply is increasing in β, so only the smallest β meeting the AC supply
/// needs to be evaluated.
///
/// `cell_gain` bounds what the grid can miss. The domain is tiled by the grid
/// cells (plus one power cell down to zero), and on each cell the first-hop
/// rate is bounded at the cell's largest τ, α and p while the second-hop rate
/// is bounded using the smallest α, β and τ together with the largest τ in
/// the harvested power. The largest such bound over all cells that can meet the AC supply
/// is an upper bound on the continuous single-pair optimum.
pub fn oracle_grid_k1(chan: &ChannelSet, params: &SystemParams, eh: &NonlinearEhParams, density: usize) -> Result<OracleResult> {
    if chan.k() != 1 || params.k != 1 {
        return Err(Error::InvalidInput(format!("the grid oracle needs K = 1, got K = {}", chan.k())));
    }
    if density < 2 {
        return Err(Error::InvalidInput(format!("grid density must be at least 2, got {density}")));
    }
    params.validate()?;
    let pair = SinglePair {
        h_gain: chan.gain[0],
        g_gain: chan.g[0].norm_squared(),
        noise_ant: params.sigma_ant2,
        noise_r: params.sigma_r2,
        noise_d: params.sigma_k2[0],
        p_sta: params.p_sta,
        p_acc_min: params.p_acc_min,
    };
    let pmax = params.p_s_max[0];
    let d = density as f64;
    let fractions: Vec<f64> = (1..density).map(|i| i as f64 / d).collect();
    let powers: Vec<f64> =
        (1..=density).map(|j| pmax * 10f64.powf(-ORACLE_POWER_DECADES * (density - j) as f64 / d)).collect();

    let mut best: Option<(f64, [f64; 4])> = None;
    for &p2 in &powers {
        for &tau in &fractions {
            for &alpha in &fractions {
                let x = tau * (1.0 - alpha) * p2 * pair.h_gain;
                let Some(&beta) = fractions.iter().find(|&&b| b * x >= pair.p_acc_min) else {
                    continue;
                };
                if let Some(obj) = pair.objective(eh, tau, alpha, beta, p2) {
                    if best.map_or(true, |b| obj > b.0) {
                        best = Some((obj, [tau, alpha, beta, p2]));
                    }
                }
            }
        }
    }

    let Some((objective, [tau, alpha, beta, p2])) = best else {
        return Ok(OracleResult { alloc: beamformed(chan, pmax.sqrt(), 0.0, 0.5, 0.5, 0.5), objective: 0.0, cell_gain: 0.0 });
    };

    let upper = pair.cell_upper_bound(eh, density, &powers).max(objective);

    let spare = tau * eh.harvest((1.0 - alpha) * (1.0 - beta) * p2 * pair.h_gain) - pair.p_sta;
    let w_norm = (spare.max(0.0) / (1.0 - tau)).sqrt();
    Ok(OracleResult {
        alloc: beamformed(chan, p2.sqrt(), w_norm, tau, alpha, beta),
        objective,
        cell_gain: upper - objective,
    })
}

fn beamformed(chan: &ChannelSet, p: f64, w_norm: f64, tau: f64, alpha: f64, beta: f64) -> Allocation {
    let g = &chan.g[0];
    let gn = g.norm();
    let w: CVec = if gn > 0.0 {
        g.map(|c| c.conj() * (w_norm / gn))
    } else {
        CVec::from_element(chan.n(), Complex64::new(0.0, 0.0))
    };
    Allocation { p: vec![p], w: vec![w], tau, alpha, beta }
}

/// Signed slacks of the power constraints, computed from scratch.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteCheck {
    pub feasible: bool,
    /// `(constraint, slack)`; labels are `budget`, `computing` and `source[k]`.
    pub residuals: Vec<(String, f64)>,
}

impl BruteCheck {
    pub fn violated(&self) -> Vec<&str> {
        self.residuals.iter().filter(|(_, v)| *v < 0.0).map(|(n, _)| n.as_str()).collect()
    }
}

/// Re-evaluates the power constraints of an allocation with plain loops,
/// without going through [`model`]. Fractions are clamped the same way the
/// model clamps them, and β is taken as zero in DCC mode.
pub fn brute_check_allocation(
    alloc: &Allocation,
    chan: &ChannelSet,
    params: &SystemParams,
    eh: &NonlinearEhParams,
    mode: Mode,
) -> BruteCheck {
    let clamp = |v: f64| if v.is_nan() { 0.5 } else { v.clamp(1e-6, 1.0 - 1e-6) };
    let tau = clamp(alloc.tau);
    let alpha = clamp(alloc.alpha);
    let beta = if mode == Mode::Dcc { 0.0 } else { clamp(alloc.beta) };

    let mut received = 0.0;
    for (k, hk) in chan.h.iter().enumerate() {
        let mut norm2 = 0.0;
        for z in hk.iter() {
            norm2 += z.re * z.re + z.im * z.im;
        }
        received += alloc.p[k] * alloc.p[k] * norm2;
    }
    let mut beam = 0.0;
    for wk in &alloc.w {
        for z in wk.iter() {
            beam += z.re * z.re + z.im * z.im;
        }
    }

    let p_in = (1.0 - alpha) * (1.0 - beta) * received;
    let logistic = |x: f64| {
        if x < -700.0 {
            0.0
        } else {
            1.0 / (1.0 + (-x).exp())
        }
    };
    let omega = logistic(-eh.a * eh.b);
    let raw = eh.p_eh_max * (logistic(eh.a * (p_in - eh.b)) - omega) / (1.0 - omega);
    let harvested = tau * raw.max(0.0);
    let consumed = (1.0 - tau) * beam + params.p_sta;

    let mut residuals = vec![("budget".to_string(), harvested - consumed)];
    let computing = match mode {
        Mode::Acc => tau * (1.0 - alpha) * beta * received - params.p_acc_min,
        Mode::Dcc => harvested - consumed - params.p_dcc_min,
    };
    residuals.push(("computing".to_string(), computing));
    for (k, (pk, cap)) in alloc.p.iter().zip(&params.p_s_max).enumerate() {
        residuals.push((format!("source[{k}]"), cap - pk * pk));
    }
    let feasible = residuals.iter().all(|(_, v)| *v >= 0.0);
    BruteCheck { feasible, residuals }
}
