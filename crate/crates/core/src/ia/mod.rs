//! Inner-approximation solver for the max-min rate problem.
//!
//! The problem is rewritten over `τ₁ = 1/τ`, `τ₂ = 1/(1−τ)`, `α₁ = 1/α`,
//! `α₂ = 1/(1−α)`, per-hop inverse SINRs `ψ` and the harvesting slacks
//! `ϑ ≤ exp(a(P_IN − b))`, `θ ≤ (τ₂−1)ϑ/(1+ϑ)`. Each iteration replaces the
//! nonconvex pieces by minorants that are tight at the current point
//! ([`surrogate`]), solves the resulting cone program ([`build`]), and then
//! removes any slack left in the reformulated variables before re-expanding.

pub mod build;
pub mod surrogate;
pub mod trace;

use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;

pub use build::{build_feasibility, build_subproblem, HarvestForm, Objective, Subproblem, VarMap};
pub use trace::{IterationRecord, IterationTrace, Phase};

use crate::conic::{self, ConeSolution, SolverSettings, Status};
use crate::error::{Error, Result};
use crate::model::{self, Allocation, ChannelSet, Mode, NonlinearEhParams, PowerReport, RateReport, SystemParams};
use surrogate::{rate_fn, RateSurrogate, UplinkSurrogate};

/// Upper limit on ϑ; `sigmoid(30)` differs from one by about 1e−13.
pub const VARTHETA_CAP: f64 = 1.068_647_458_152_446_2e13;
const PSI_MIN: f64 = 1e-12;
const PSI_MAX: f64 = 1e12;
const SPLIT_MIN: f64 = 1.0 + 1e-6;
const SPLIT_MAX: f64 = 1e6;
const BETA_EPS: f64 = 1e-6;

/// Which restrictions of the full problem are being solved.
#[derive(Clone, Debug, PartialEq)]
pub struct IaConfig {
    pub mode: Mode,
    pub sic: bool,
    pub fixed_tau: Option<f64>,
    pub fixed_alpha: Option<f64>,
}

impl Default for IaConfig {
    fn default() -> Self {
        Self { mode: Mode::Acc, sic: true, fixed_tau: None, fixed_alpha: None }
    }
}

impl IaConfig {
    pub fn validate(&self) -> Result<()> {
        for v in [self.fixed_tau, self.fixed_alpha].into_iter().flatten() {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!("pinned fractions must lie in (0,1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Borrowed problem data shared by every step of a run.
#[derive(Clone, Copy, Debug)]
pub struct Ctx<'a> {
    pub chan: &'a ChannelSet,
    pub params: &'a SystemParams,
    pub eh: &'a NonlinearEhParams,
    pub cfg: &'a IaConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IaOptions {
    pub max_iter: usize,
    pub max_feasibility_iter: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub solver: SolverSettings,
    /// Tolerance of the single retry after a solver failure.
    pub retry_tol: f64,
}

impl Default for IaOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            max_feasibility_iter: 20,
            abs_tol: 1e-4,
            rel_tol: 1e-3,
            solver: SolverSettings::default(),
            retry_tol: 1e-6,
        }
    }
}

/// A point in reformulated coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionPoint {
    pub p: Vec<f64>,
    pub w: Vec<model::CVec>,
    pub tau1: f64,
    pub tau2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    /// `psi[0]` first hop, `psi[1]` second hop.
    pub psi: [Vec<f64>; 2],
    pub vartheta: f64,
    pub theta: f64,
}

impl ExpansionPoint {
    pub fn check_domain(&self, mode: Mode) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(format!("expansion point: {m}")));
        for (name, v) in [("tau1", self.tau1), ("tau2", self.tau2), ("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(v > 1.0 && v.is_finite()) {
                return bad(format!("{name} must exceed 1, got {v}"));
            }
        }
        match mode {
            Mode::Acc if !(self.beta > 0.0 && self.beta < 1.0) => return bad(format!("beta must lie in (0,1), got {}", self.beta)),
            Mode::Dcc if self.beta != 0.0 => return bad(format!("beta must be 0 in DCC mode, got {}", self.beta)),
            _ => {}
        }
        if self.psi.iter().flatten().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("psi must be positive and finite".into());
        }
        if !(self.vartheta > 0.0 && self.vartheta.is_finite() && self.theta > 0.0 && self.theta.is_finite()) {
            return bad(format!("harvest slacks must be positive (vartheta={}, theta={})", self.vartheta, self.theta));
        }
        if self.p.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("source amplitudes must be finite and nonnegative".into());
        }
        Ok(())
    }

    /// `Σ p_k²‖h_k‖² / α₂`, the AC power entering the harvester before the β split.
    pub fn harvester_input(&self, chan: &ChannelSet) -> f64 {
        surrogate::harvest_exact(&chan.gain, &self.p, self.alpha2)
    }
}

fn clamp_psi(v: f64) -> f64 {
    if v.is_nan() {
        PSI_MAX
    } else {
        v.clamp(PSI_MIN, PSI_MAX)
    }
}

fn vartheta_of(eh: &NonlinearEhParams, p_in: f64) -> f64 {
    (eh.a * (p_in - eh.b)).exp().min(VARTHETA_CAP)
}

/// Maps an interior allocation to reformulated coordinates, filling the
/// slacks by their defining equalities.
pub fn to_reformulated(ctx: &Ctx, alloc: &Allocation) -> Result<ExpansionPoint> {
    let open = |v: f64| v > 0.0 && v < 1.0;
    if !open(alloc.tau) || !open(alloc.alpha) {
        return Err(Error::InvalidInput(format!(
            "tau and alpha must lie strictly inside (0,1), got tau={}, alpha={}",
            alloc.tau, alloc.alpha
        )));
    }
    let beta = match ctx.cfg.mode {
        Mode::Acc if !open(alloc.beta) => {
            return Err(Error::InvalidInput(format!("beta must lie strictly inside (0,1), got {}", alloc.beta)))
        }
        Mode::Acc => alloc.beta,
        Mode::Dcc => 0.0,
    };
    let mut ep = ExpansionPoint {
        p: alloc.p.clone(),
        w: alloc.w.clone(),
        tau1: 1.0 / alloc.tau,
        tau2: 1.0 / (1.0 - alloc.tau),
        alpha1: 1.0 / alloc.alpha,
        alpha2: 1.0 / (1.0 - alloc.alpha),
        beta,
        psi: [vec![0.0; alloc.p.len()], vec![0.0; alloc.p.len()]],
        vartheta: 0.0,
        theta: 0.0,
    };
    fill_slacks(ctx, &mut ep)?;
    Ok(ep)
}

pub fn from_reformulated(ep: &ExpansionPoint) -> Allocation {
    Allocation { p: ep.p.clone(), w: ep.w.clone(), tau: 1.0 / ep.tau1, alpha: 1.0 / ep.alpha1, beta: ep.beta }
}

/// Sets ψ, ϑ and θ to the values that make their defining inequalities tight.
fn fill_slacks(ctx: &Ctx, ep: &mut ExpansionPoint) -> Result<()> {
    let alpha = 1.0 / ep.alpha1;
    for k in 0..ctx.chan.k() {
        ep.psi[0][k] = clamp_psi(1.0 / model::gamma1(ctx.chan, ctx.params, &ep.p, alpha, k, ctx.cfg.sic)?);
        ep.psi[1][k] = clamp_psi(1.0 / model::gamma2(ctx.chan, ctx.params, &ep.w, k)?);
    }
    ep.vartheta = vartheta_of(ctx.eh, (1.0 - ep.beta) * ep.harvester_input(ctx.chan));
    ep.theta = (ep.tau2 - 1.0) * ep.vartheta / (1.0 + ep.vartheta);
    Ok(())
}

/// Removes the slack a subproblem solution may leave in the reformulated
/// variables: the split constraints are made tight through τ₁ and α₁, and ψ,
/// ϑ, θ are recomputed from their definitions. Every change moves the point
/// further inside the next subproblem's feasible set.
pub fn tighten(ctx: &Ctx, raw: &ExpansionPoint) -> Result<ExpansionPoint> {
    let mut ep = raw.clone();
    for (pk, m) in ep.p.iter_mut().zip(&ctx.params.p_s_max) {
        *pk = pk.clamp(0.0, m.sqrt());
    }
    match ctx.cfg.fixed_tau {
        Some(t) => {
            ep.tau1 = 1.0 / t;
            ep.tau2 = 1.0 / (1.0 - t);
        }
        None => {
            ep.tau2 = ep.tau2.clamp(SPLIT_MIN, SPLIT_MAX);
            ep.tau1 = ep.tau2 / (ep.tau2 - 1.0);
        }
    }
    match ctx.cfg.fixed_alpha {
        Some(a) => {
            ep.alpha1 = 1.0 / a;
            ep.alpha2 = 1.0 / (1.0 - a);
        }
        None => {
            ep.alpha2 = ep.alpha2.clamp(SPLIT_MIN, SPLIT_MAX);
            ep.alpha1 = ep.alpha2 / (ep.alpha2 - 1.0);
        }
    }
    ep.beta = match ctx.cfg.mode {
        Mode::Acc => ep.beta.clamp(BETA_EPS, 1.0 - BETA_EPS),
        Mode::Dcc => 0.0,
    };
    fill_slacks(ctx, &mut ep)?;
    Ok(ep)
}

/// Whether the AC supply requirement holds at `ep`.
pub fn acc_satisfied(ctx: &Ctx, ep: &ExpansionPoint) -> bool {
    ctx.cfg.mode == Mode::Dcc || ep.harvester_input(ctx.chan) * ep.beta >= ctx.params.p_acc_min * ep.tau1
}

fn fraction_grid(pinned: Option<f64>) -> Vec<f64> {
    match pinned {
        Some(v) => vec![v],
        None => (1..20).map(|i| i as f64 / 20.0).collect(),
    }
}

/// Starting point: full source power, fractions at one half when the
/// harvested power allows it (otherwise the closest grid point that does),
/// and matched-filter beamformers using half of the spare harvested power.
pub fn initialize(ctx: &Ctx) -> Result<ExpansionPoint> {
    let chan = ctx.chan;
    let params = ctx.params;
    let cfg = ctx.cfg;
    let (k, n) = (chan.k(), chan.n());
    let p: Vec<f64> = params.p_s_max.iter().map(|v| v.sqrt()).collect();
    let need = params.p_sta + if cfg.mode == Mode::Dcc { params.p_dcc_min } else { 0.0 };
    let betas = match cfg.mode {
        Mode::Dcc => vec![0.0],
        Mode::Acc => fraction_grid(None),
    };
    let received = model::received_power(chan, &p);
    let dc = |tau: f64, alpha: f64, beta: f64| model::p_dc(chan, ctx.eh, &p, tau, alpha, beta);
    let centre = (cfg.fixed_tau.unwrap_or(0.5), cfg.fixed_alpha.unwrap_or(0.5), if cfg.mode == Mode::Dcc { 0.0 } else { 0.5 });

    let mut best: Option<(f64, (f64, f64, f64))> = None;
    if dc(centre.0, centre.1, centre.2) > 1.1 * need {
        best = Some((0.0, centre));
    } else {
        for &tau in &fraction_grid(cfg.fixed_tau) {
            for &alpha in &fraction_grid(cfg.fixed_alpha) {
                // The smallest β that still feeds the AC logic leaves the most
                // power for the harvester; the coarse grid can miss it.
                let mut cand = betas.clone();
                if cfg.mode == Mode::Acc {
                    let beta_req = 2.0 * params.p_acc_min / (tau * (1.0 - alpha) * received);
                    if beta_req > 0.0 && beta_req < cand[0] {
                        cand.push(beta_req);
                    }
                }
                for &beta in &cand {
                    if dc(tau, alpha, beta) > 1.1 * need {
                        let d = (tau - centre.0).powi(2) + (alpha - centre.1).powi(2) + (beta - centre.2).powi(2);
                        if best.map_or(true, |b| d < b.0) {
                            best = Some((d, (tau, alpha, beta)));
                        }
                    }
                }
            }
        }
    }
    let (tau, alpha, beta) = best
        .ok_or_else(|| {
            Error::FeasibilityPhaseFailed(format!(
                "harvested power at full source power cannot cover the relay's {need:.3e} W draw"
            ))
        })?
        .1;

    let spare = dc(tau, alpha, beta) - need;
    let mag = (0.5 * spare / ((1.0 - tau) * k as f64)).sqrt();
    let w = (0..k)
        .map(|i| {
            let g = &chan.g[i];
            let norm = g.norm();
            if norm > 0.0 {
                g.map(|c| c.conj() * (mag / norm))
            } else {
                let mut v = DVector::from_element(n, Complex64::new(0.0, 0.0));
                v[0] = Complex64::new(mag, 0.0);
                v
            }
        })
        .collect();
    to_reformulated(ctx, &Allocation { p, w, tau, alpha, beta })
}

/// Relative activeness residuals of the reformulation's constraints at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Lemma1Report {
    /// `(min_{i,k} ln(1+1/ψ_{i,k})/τ_i − r) / r`: the common-rate constraint at the bottleneck.
    pub rate: f64,
    /// `γ_{1,k} ψ_{1,k} − 1`
    pub uplink: Vec<f64>,
    /// `γ_{2,k} ψ_{2,k} − 1`
    pub downlink: Vec<f64>,
    /// `1 − 1/τ₁ − 1/τ₂`
    pub time_split: f64,
    /// `1 − 1/α₁ − 1/α₂`
    pub power_split: f64,
    pub tol: f64,
    pub flagged: Vec<String>,
}

impl Lemma1Report {
    pub fn all_active(&self) -> bool {
        self.flagged.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.uplink
            .iter()
            .chain(&self.downlink)
            .map(|v| v.abs())
            .fold(self.rate.abs().max(self.time_split.abs()).max(self.power_split.abs()), f64::max)
    }
}

pub fn verify_lemma1(ctx: &Ctx, ep: &ExpansionPoint, r: f64, tol: f64) -> Result<Lemma1Report> {
    let k = ctx.chan.k();
    let taus = [ep.tau1, ep.tau2];
    let min_f = (0..2)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| rate_fn(ep.psi[i][j], taus[i]))
        .fold(f64::INFINITY, f64::min);
    let rate = (min_f - r) / r.abs().max(1e-12);
    let alpha = 1.0 / ep.alpha1;
    let mut uplink = Vec::with_capacity(k);
    let mut downlink = Vec::with_capacity(k);
    for j in 0..k {
        uplink.push(model::gamma1(ctx.chan, ctx.params, &ep.p, alpha, j, ctx.cfg.sic)? * ep.psi[0][j] - 1.0);
        downlink.push(model::gamma2(ctx.chan, ctx.params, &ep.w, j)? * ep.psi[1][j] - 1.0);
    }
    let time_split = 1.0 - 1.0 / ep.tau1 - 1.0 / ep.tau2;
    let power_split = 1.0 - 1.0 / ep.alpha1 - 1.0 / ep.alpha2;
    let mut flagged = Vec::new();
    if rate.abs() > tol {
        flagged.push("rate".to_string());
    }
    for (name, vals) in [("uplink", &uplink), ("downlink", &downlink)] {
        for (j, v) in vals.iter().enumerate() {
            if v.abs() > tol {
                flagged.push(format!("{name}[{j}]"));
            }
        }
    }
    if time_split.abs() > tol {
        flagged.push("time_split".into());
    }
    if power_split.abs() > tol {
        flagged.push("power_split".into());
    }
    Ok(Lemma1Report { rate, uplink, downlink, time_split, power_split, tol, flagged })
}

/// Worst relative gap between each rate and uplink minorant and its exact value at `ep`.
pub fn tangency_residual(ctx: &Ctx, ep: &ExpansionPoint) -> Result<f64> {
    let taus = [ep.tau1, ep.tau2];
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..ctx.chan.k() {
            let exact = rate_fn(ep.psi[i][j], taus[i]);
            let s = RateSurrogate::at(ep.psi[i][j], taus[i])?.eval(ep.psi[i][j], taus[i]);
            worst = worst.max((s - exact).abs() / exact.abs().max(1e-300));
        }
    }
    for j in 0..ctx.chan.k() {
        let s = UplinkSurrogate::at(ctx.chan, ctx.params, &ep.p, ep.alpha1, j, ctx.cfg.sic)?;
        let exact = surrogate::uplink_exact(ctx.chan, ctx.params, &ep.p, ep.alpha1, j, ctx.cfg.sic)?;
        if exact > 0.0 {
            worst = worst.max((s.eval(ctx.params, &ep.p, ep.alpha1) - exact).abs() / exact);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct IaOutcome {
    pub alloc: Allocation,
    pub rates: RateReport,
    pub power: PowerReport,
    pub trace: IterationTrace,
    /// Final point after slack removal.
    pub point: ExpansionPoint,
    /// Objective of the last subproblem.
    pub r: f64,
    pub feasibility_iterations: usize,
    pub refinement_iterations: usize,
    pub converged: bool,
    pub warning: Option<String>,
}

impl IaOutcome {
    pub fn min_rate(&self) -> f64 {
        self.rates.min_rate
    }
}

fn solve_subproblem(sp: &Subproblem, opts: &IaOptions) -> Result<ConeSolution> {
    let first = conic::solve_with(&sp.program, &opts.solver)?;
    if first.status == Status::Optimal {
        return Ok(first);
    }
    let retry = SolverSettings { tol: opts.retry_tol, ..opts.solver.clone() };
    let second = conic::solve_with(&sp.program, &retry)?;
    if second.status == Status::Optimal {
        return Ok(second);
    }
    // Either attempt may stall just short of its target; a best iterate
    // within the retry tolerance is accepted as optimal.
    let worst = |s: &ConeSolution| s.primal_residual.max(s.dual_residual).max(s.gap);
    let mut best = if worst(&first) <= worst(&second) { first } else { second };
    if best.status == Status::NumericalLimit && worst(&best) <= opts.retry_tol {
        best.status = Status::Optimal;
    }
    Ok(best)
}

fn failure(iteration: usize, status: Status, trace: &IterationTrace) -> Error {
    Error::SolverFailure { iteration, status: format!("{status:?}"), trace: trace.objectives() }
}

fn exact_min_rate(ctx: &Ctx, ep: &ExpansionPoint) -> Result<f64> {
    let taus = [ep.tau1, ep.tau2];
    Ok((0..2)
        .flat_map(|i| (0..ctx.chan.k()).map(move |j| (i, j)))
        .map(|(i, j)| rate_fn(ep.psi[i][j], taus[i]))
        .fold(f64::INFINITY, f64::min))
}

/// Runs both phases: drive the AC-supply margin nonnegative if needed, then
/// refine the common rate until successive objectives agree.
pub fn run(ctx: &Ctx, opts: &IaOptions) -> Result<IaOutcome> {
    check_ctx(ctx)?;
    run_from(ctx, opts, initialize(ctx)?)
}

fn check_ctx(ctx: &Ctx) -> Result<()> {
    ctx.params.validate()?;
    ctx.cfg.validate()?;
    if ctx.params.k != ctx.chan.k() || ctx.params.n != ctx.chan.n() {
        return Err(Error::InvalidInput("system parameters and channel dimensions differ".into()));
    }
    Ok(())
}

/// Same as [`run`] from a caller-supplied starting point. The point must
/// satisfy the relay's power budget; the AC supply requirement may be violated,
/// in which case the feasibility phase runs first.
pub fn run_from(ctx: &Ctx, opts: &IaOptions, start: ExpansionPoint) -> Result<IaOutcome> {
    check_ctx(ctx)?;
    start.check_domain(ctx.cfg.mode)?;
    let mut ep = start;
    let mut trace = IterationTrace::default();
    let mut iteration = 0;

    let mut feasibility_iterations = 0;
    if !acc_satisfied(ctx, &ep) {
        let mut prev_eta = f64::NEG_INFINITY;
        loop {
            if feasibility_iterations >= opts.max_feasibility_iter {
                return Err(Error::FeasibilityPhaseFailed(format!(
                    "AC supply still short after {feasibility_iterations} iterations"
                )));
            }
            feasibility_iterations += 1;
            iteration += 1;
            let started = Instant::now();
            let sp = build_feasibility(ctx, &ep)?;
            let sol = solve_subproblem(&sp, opts)?;
            if sol.status != Status::Optimal {
                return Err(failure(iteration, sol.status, &trace));
            }
            let (raw, eta) = sp.extract(&sol.x);
            ep = tighten(ctx, &raw)?;
            trace.push(IterationRecord {
                iteration,
                phase: Phase::Feasibility,
                objective: eta,
                exact_rate: exact_min_rate(ctx, &ep)?,
                status: sol.status,
                tangency: tangency_residual(ctx, &ep)?,
                millis: started.elapsed().as_secs_f64() * 1e3,
            });
            if acc_satisfied(ctx, &ep) {
                break;
            }
            if eta < 0.0 && eta - prev_eta <= 1e-9 * eta.abs() {
                return Err(Error::FeasibilityPhaseFailed(format!(
                    "AC supply margin stalled at {eta:.3e} W after {feasibility_iterations} iterations"
                )));
            }
            prev_eta = eta;
        }
    }

    let mut r_prev: Option<f64> = None;
    let mut converged = false;
    let mut warning = None;
    let mut refinement_iterations = 0;
    while refinement_iterations < opts.max_iter {
        refinement_iterations += 1;
        iteration += 1;
        let started = Instant::now();
        let sp = build_subproblem(ctx, &ep)?;
        let sol = solve_subproblem(&sp, opts)?;
        if sol.status != Status::Optimal {
            if r_prev.is_some() {
                warning = Some(format!("stopped at iteration {iteration}: solver returned {:?}", sol.status));
                refinement_iterations -= 1;
                break;
            }
            return Err(failure(iteration, sol.status, &trace));
        }
        let (raw, r) = sp.extract(&sol.x);
        let next = tighten(ctx, &raw)?;
        trace.push(IterationRecord {
            iteration,
            phase: Phase::Refinement,
            objective: r,
            exact_rate: exact_min_rate(ctx, &next)?,
            status: sol.status,
            tangency: tangency_residual(ctx, &next)?,
            millis: started.elapsed().as_secs_f64() * 1e3,
        });
        if let Some(rp) = r_prev {
            if r < rp - 1e-6 {
                warning = Some(format!("objective decreased from {rp:.9} to {r:.9} at iteration {iteration}"));
                trace.records.pop();
                refinement_iterations -= 1;
                break;
            }
        }
        let done = r_prev.map_or(false, |rp| (r - rp).abs() <= opts.abs_tol.max(opts.rel_tol * rp.abs()));
        ep = next;
        r_prev = Some(r);
        if done {
            converged = true;
            break;
        }
    }

    let alloc = from_reformulated(&ep);
    let (rates, power) = model::evaluate(ctx.chan, ctx.params, ctx.eh, &alloc, ctx.cfg.mode, ctx.cfg.sic)?;
    Ok(IaOutcome {
        alloc,
        rates,
        power,
        trace,
        point: ep,
        r: r_prev.unwrap_or(0.0),
        feasibility_iterations,
        refinement_iterations,
        converged,
        warning,
    })
}
