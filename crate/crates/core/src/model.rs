//! Physical-layer quantities of the two-hop SWIPT relay link: SINRs, rates,
//! harvested power, relay consumption, and constraint residuals.
//!
//! All powers are in watts, rates in nats/s/Hz, and the block length is one.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVec = DVector<Complex64>;

/// Lower/upper clamp applied to the time and splitting fractions before evaluation.
pub const FRACTION_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Logic powered from the harvested AC flow (split by β).
    Acc,
    /// Logic powered from the rectified DC budget, β = 0.
    Dcc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub k: usize,
    pub n: usize,
    pub sigma_ant2: f64,
    pub sigma_r2: f64,
    pub sigma_k2: Vec<f64>,
    pub p_sta: f64,
    pub p_s_max: Vec<f64>,
    pub p_acc_min: f64,
    pub p_dcc_min: f64,
}

impl SystemParams {
    /// Uniform per-user noise and source budgets.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        k: usize,
        n: usize,
        sigma_ant2: f64,
        sigma_r2: f64,
        sigma_d2: f64,
        p_sta: f64,
        p_s_max: f64,
        p_acc_min: f64,
        p_dcc_min: f64,
    ) -> Self {
        Self {
            k,
            n,
            sigma_ant2,
            sigma_r2,
            sigma_k2: vec![sigma_d2; k],
            p_sta,
            p_s_max: vec![p_s_max; k],
            p_acc_min,
            p_dcc_min,
        }
    }

    /// The reference operating point: −70 dBm antenna and destination noise,
    /// −50 dBm circuit noise, 1 µW static draw, 0.27 µW / 47.64 µW computing
    /// thresholds, and the given source budget.
    pub fn reference(k: usize, n: usize, p_s_max: f64) -> Self {
        Self::uniform(k, n, 1e-10, 1e-8, 1e-10, 1e-6, p_s_max, 0.27e-6, 47.64e-6)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.k == 0 || self.n == 0 {
            return bad(format!("K and N must be at least 1 (got K={}, N={})", self.k, self.n));
        }
        if self.sigma_k2.len() != self.k || self.p_s_max.len() != self.k {
            return bad("per-user vectors must have length K".into());
        }
        let positive = [self.sigma_ant2, self.sigma_r2, self.p_sta]
            .into_iter()
            .chain(self.sigma_k2.iter().copied())
            .chain(self.p_s_max.iter().copied());
        for v in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("noise and power parameters must be positive and finite, got {v}"));
            }
        }
        if !(self.p_acc_min >= 0.0 && self.p_acc_min.is_finite()) {
            return bad(format!("p_acc_min must be nonnegative, got {}", self.p_acc_min));
        }
        if !(self.p_dcc_min > self.p_acc_min && self.p_dcc_min.is_finite()) {
            return bad(format!(
                "p_dcc_min ({}) must exceed p_acc_min ({})",
                self.p_dcc_min, self.p_acc_min
            ));
        }
        Ok(())
    }
}

/// Logistic energy-harvesting curve with zero output at zero input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlinearEhParams {
    pub a: f64,
    pub b: f64,
    pub p_eh_max: f64,
    pub omega: f64,
    pub xi: f64,
}

impl NonlinearEhParams {
    pub fn new(a: f64, b: f64, p_eh_max: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("p_eh_max", p_eh_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("EH parameter {name} must be positive, got {v}")));
            }
        }
        let omega = sigmoid(-a * b);
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::InvalidInput(format!("a·b = {} leaves Ω outside (0,1)", a * b)));
        }
        Ok(Self { a, b, p_eh_max, omega, xi: p_eh_max / (1.0 - omega) })
    }

    /// a = 6400 /W, b = 3 mW, 0.2 mW saturation.
    pub fn reference() -> Self {
        Self::new(6400.0, 0.003, 2e-4).expect("reference EH constants are valid")
    }

    /// Harvested DC power per unit SWIPT time for a given input power.
    pub fn harvest(&self, p_in: f64) -> f64 {
        (self.xi * (sigmoid(self.a * (p_in - self.b)) - self.omega)).max(0.0)
    }
}

/// Logistic function evaluated without overflow for any finite argument.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Uplink vectors `h_k` and downlink rows `g_k`, with pairs in ascending uplink gain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<CVec>,
    pub g: Vec<CVec>,
    pub gain: Vec<f64>,
    /// `order[k]` is the original index of the pair now stored at `k`.
    pub order: Vec<usize>,
}

impl ChannelSet {
    /// Validates shapes and entries, then stably re-indexes pairs by ascending `‖h_k‖²`.
    pub fn new(h: Vec<CVec>, g: Vec<CVec>) -> Result<Self> {
        if h.is_empty() || h.len() != g.len() {
            return Err(Error::InvalidInput(format!("need K ≥ 1 matching pairs, got {} h and {} g", h.len(), g.len())));
        }
        let n = h[0].len();
        if n == 0 {
            return Err(Error::InvalidInput("channel vectors must be nonempty".into()));
        }
        for v in h.iter().chain(&g) {
            if v.len() != n {
                return Err(Error::InvalidInput("all channel vectors must share length N".into()));
            }
            if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::InvalidInput("non-finite channel entry".into()));
            }
        }
        let gains: Vec<f64> = h.iter().map(|v| v.norm_squared()).collect();
        let mut order: Vec<usize> = (0..h.len()).collect();
        order.sort_by(|&i, &j| gains[i].total_cmp(&gains[j]));
        Ok(Self {
            h: order.iter().map(|&i| h[i].clone()).collect(),
            g: order.iter().map(|&i| g[i].clone()).collect(),
            gain: order.iter().map(|&i| gains[i]).collect(),
            order,
        })
    }

    pub fn k(&self) -> usize {
        self.h.len()
    }

    pub fn n(&self) -> usize {
        self.h[0].len()
    }

    /// `g_k w` (no conjugation; `g_k` is a row vector).
    pub fn gw(&self, k: usize, w: &CVec) -> Complex64 {
        self.g[k].iter().zip(w.iter()).map(|(a, b)| a * b).sum()
    }

    fn check_dims(&self, params: &SystemParams) -> Result<()> {
        if params.k != self.k() || params.n != self.n() {
            return Err(Error::InvalidInput(format!(
                "parameters are for K={}, N={} but channels are K={}, N={}",
                params.k,
                params.n,
                self.k(),
                self.n()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    pub p: Vec<f64>,
    pub w: Vec<CVec>,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub e2e: Vec<f64>,
    pub min_rate: f64,
}

/// Signed slacks; every entry ≥ 0 means the allocation is feasible.
#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    /// `p_dc − p_tot`
    pub budget: f64,
    /// ACC: `p_acc − p_acc_min`; DCC: `p_dc − p_tot − p_dcc_min`
    pub computing: f64,
    /// `p_s_max[k] − p_k²`
    pub source: Vec<f64>,
}

impl Residuals {
    pub fn min_absolute(&self) -> f64 {
        self.source.iter().copied().fold(self.budget.min(self.computing), f64::min)
    }

    pub fn is_feasible(&self) -> bool {
        self.min_absolute() >= 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerReport {
    pub p_in: f64,
    pub p_dc: f64,
    pub p_acc: f64,
    pub p_tot: f64,
    pub residuals: Residuals,
    /// Residuals divided by the natural scale of each constraint.
    pub relative: Residuals,
    /// Set when τ, α or β had to be clamped into the open unit interval
    /// (or β ≠ 0 was overridden in DCC mode).
    pub clamped: bool,
}

impl PowerReport {
    pub fn min_relative(&self) -> f64 {
        self.relative.min_absolute()
    }
}

fn clamp_fraction(v: f64, flag: &mut bool) -> f64 {
    let c = if v.is_nan() { 0.5 } else { v.clamp(FRACTION_EPS, 1.0 - FRACTION_EPS) };
    if c != v {
        *flag = true;
    }
    c
}

fn check_amplitudes(p: &[f64], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(Error::InvalidInput(format!("expected {k} source amplitudes, got {}", p.len())));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput("source amplitudes must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Interference-plus-noise covariance seen when decoding pair `k`, with the
/// given white-noise level on the diagonal.
pub fn interference_covariance(chan: &ChannelSet, p: &[f64], k: usize, noise: f64, sic: bool) -> DMatrix<Complex64> {
    let n = chan.n();
    let mut phi = DMatrix::<Complex64>::identity(n, n) * Complex64::new(noise, 0.0);
    let interferers: Box<dyn Iterator<Item = usize>> =
        if sic { Box::new(0..k) } else { Box::new((0..chan.k()).filter(move |&l| l != k)) };
    for l in interferers {
        let pl2 = p[l] * p[l];
        if pl2 != 0.0 {
            let h = &chan.h[l];
            phi.ger(Complex64::new(pl2, 0.0), h, &h.conjugate(), Complex64::new(1.0, 0.0));
        }
    }
    phi
}

/// `h_k^H Φ⁻¹ h_k` for the covariance built by [`interference_covariance`].
pub fn whitened_gain(chan: &ChannelSet, p: &[f64], k: usize, noise: f64, sic: bool) -> Result<f64> {
    let phi = interference_covariance(chan, p, k, noise, sic);
    let chol = phi
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("interference covariance of pair {k} is not positive definite")))?;
    let v = chol.solve(&chan.h[k]);
    Ok(chan.h[k].dotc(&v).re.max(0.0))
}

/// First-hop SINR of pair `k` at the relay's ID receiver.
pub fn gamma1(chan: &ChannelSet, params: &SystemParams, p: &[f64], alpha: f64, k: usize, sic: bool) -> Result<f64> {
    check_amplitudes(p, chan.k())?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if p[k] == 0.0 {
        return Ok(0.0);
    }
    let noise = params.sigma_ant2 + params.sigma_r2 / alpha;
    Ok(p[k] * p[k] * whitened_gain(chan, p, k, noise, sic)?)
}

#[allow(clippy::too_many_arguments)]
pub fn rate1(
    chan: &ChannelSet,
    params: &SystemParams,
    p: &[f64],
    tau: f64,
    alpha: f64,
    k: usize,
    sic: bool,
) -> Result<f64> {
    Ok(tau * gamma1(chan, params, p, alpha, k, sic)?.ln_1p())
}

/// Second-hop SINR at destination `k`.
pub fn gamma2(chan: &ChannelSet, params: &SystemParams, w: &[CVec], k: usize) -> Result<f64> {
    if w.len() != chan.k() || w.iter().any(|v| v.len() != chan.n()) {
        return Err(Error::InvalidInput(format!("expected {} beamformers of length {}", chan.k(), chan.n())));
    }
    let signal = chan.gw(k, &w[k]).norm_sqr();
    let interference: f64 = (0..chan.k()).filter(|&l| l != k).map(|l| chan.gw(k, &w[l]).norm_sqr()).sum();
    Ok(signal / (interference + params.sigma_k2[k]))
}

pub fn rate2(chan: &ChannelSet, params: &SystemParams, w: &[CVec], tau: f64, k: usize) -> Result<f64> {
    Ok((1.0 - tau) * gamma2(chan, params, w, k)?.ln_1p())
}

/// `Σ p_k² ‖h_k‖²`, the total received RF power before splitting.
pub fn received_power(chan: &ChannelSet, p: &[f64]) -> f64 {
    p.iter().zip(&chan.gain).map(|(pk, g)| pk * pk * g).sum()
}

pub fn p_in(chan: &ChannelSet, p: &[f64], alpha: f64, beta: f64) -> f64 {
    (1.0 - alpha) * (1.0 - beta) * received_power(chan, p)
}

pub fn p_acc(chan: &ChannelSet, p: &[f64], tau: f64, alpha: f64, beta: f64) -> f64 {
    tau * (1.0 - alpha) * beta * received_power(chan, p)
}

pub fn p_dc(chan: &ChannelSet, eh: &NonlinearEhParams, p: &[f64], tau: f64, alpha: f64, beta: f64) -> f64 {
    tau * eh.harvest(p_in(chan, p, alpha, beta))
}

pub fn beamforming_power(w: &[CVec]) -> f64 {
    w.iter().map(|v| v.norm_squared()).sum()
}

pub fn p_tot(params: &SystemParams, w: &[CVec], tau: f64) -> f64 {
    (1.0 - tau) * beamforming_power(w) + params.p_sta
}

/// Rates and power bookkeeping of an allocation under either computing mode.
pub fn evaluate(
    chan: &ChannelSet,
    params: &SystemParams,
    eh: &NonlinearEhParams,
    alloc: &Allocation,
    mode: Mode,
    sic: bool,
) -> Result<(RateReport, PowerReport)> {
    chan.check_dims(params)?;
    check_amplitudes(&alloc.p, chan.k())?;
    let mut clamped = false;
    let tau = clamp_fraction(alloc.tau, &mut clamped);
    let alpha = clamp_fraction(alloc.alpha, &mut clamped);
    let beta = match mode {
        Mode::Acc => clamp_fraction(alloc.beta, &mut clamped),
        Mode::Dcc => {
            clamped |= alloc.beta != 0.0;
            0.0
        }
    };

    let k = chan.k();
    let mut r1 = Vec::with_capacity(k);
    let mut r2 = Vec::with_capacity(k);
    for i in 0..k {
        r1.push(rate1(chan, params, &alloc.p, tau, alpha, i, sic)?);
        r2.push(rate2(chan, params, &alloc.w, tau, i)?);
    }
    let e2e: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| a.min(*b)).collect();
    let min_rate = e2e.iter().copied().fold(f64::INFINITY, f64::min);

    let pin = p_in(chan, &alloc.p, alpha, beta);
    let pdc = p_dc(chan, eh, &alloc.p, tau, alpha, beta);
    let pacc = p_acc(chan, &alloc.p, tau, alpha, beta);
    let ptot = p_tot(params, &alloc.w, tau);

    let source: Vec<f64> = alloc.p.iter().zip(&params.p_s_max).map(|(p, m)| m - p * p).collect();
    let (computing, computing_scale) = match mode {
        Mode::Acc => (pacc - params.p_acc_min, params.p_acc_min.max(pacc)),
        Mode::Dcc => (pdc - ptot - params.p_dcc_min, pdc.max(ptot + params.p_dcc_min)),
    };
    let residuals = Residuals { budget: pdc - ptot, computing, source };
    let rel = |v: f64, scale: f64| if scale > 0.0 { v / scale } else { v };
    let relative = Residuals {
        budget: rel(residuals.budget, pdc.max(ptot)),
        computing: rel(computing, computing_scale),
        source: residuals.source.iter().zip(&params.p_s_max).map(|(v, m)| v / m).collect(),
    };

    Ok((
        RateReport { r1, r2, e2e, min_rate },
        PowerReport { p_in: pin, p_dc: pdc, p_acc: pacc, p_tot: ptot, residuals, relative, clamped },
    ))
}
