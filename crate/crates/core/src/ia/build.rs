//! Assembly of the per-iteration cone programs.
//!
//! Every decision variable is stored as `scale · column`, with the scale taken
//! from the expansion point, so the solver sees unknowns of order one.
//! Constraints of the form "affine ≥ sum of squares" are divided by a
//! reference magnitude for the same reason.

use nalgebra::DVector;
use num_complex::Complex64;

use super::surrogate::{
    log_ratio_convex_limit, BilinearBound, DownlinkSurrogate, HarvestSurrogate, LogProductBound, LogRatioTangent,
    RateSurrogate, UplinkSurrogate,
};
use super::{Ctx, ExpansionPoint, VARTHETA_CAP};
use crate::conic::{Affine, ConeProgram};
use crate::error::{Error, Result};
use crate::model::{CVec, Mode};

const INTERIOR: f64 = 1e-6;
const PSI_MIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Maximise the common rate `r`.
    Rate,
    /// Maximise the AC-supply margin `η`.
    Feasibility,
}

/// Which minorant is used for the logarithmic harvesting constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HarvestForm {
    /// Tangent plane of `−ln ϑ/(1−β)` with `ϑ` restricted to the convex region.
    Tangent,
    /// Globally valid majorant of `(ln ϑ + ab)/(1−β)`.
    Product,
    /// β fixed at zero, so the constraint is linear.
    Linear,
}

/// Column handles of every quantity in the program. Pinned quantities are constants.
#[derive(Clone, Debug)]
pub struct VarMap {
    pub p: Vec<Affine>,
    pub w_re: Vec<Vec<Affine>>,
    pub w_im: Vec<Vec<Affine>>,
    pub tau1: Affine,
    pub tau2: Affine,
    pub alpha1: Affine,
    pub alpha2: Affine,
    pub beta: Affine,
    pub psi: [Vec<Affine>; 2],
    pub vartheta: Affine,
    pub theta: Affine,
    pub r: Affine,
    pub eta: Option<Affine>,
    pub psi1_inv: Vec<Affine>,
    pub tau_inv: Option<[Affine; 2]>,
    pub alpha_inv: Option<[Affine; 2]>,
    pub beta_inv: Option<Affine>,
    pub log_aux: Option<Affine>,
}

#[derive(Clone, Debug)]
pub struct Subproblem {
    pub program: ConeProgram,
    pub vars: VarMap,
    pub objective: Objective,
    pub harvest_form: HarvestForm,
    /// Logical constraints by kind, before hyperbolic splitting.
    pub constraint_counts: Vec<(&'static str, usize)>,
    /// Scalar decision variables of the reformulated problem (complex entries counted once).
    pub core_variables: usize,
}

impl Subproblem {
    pub fn constraint_total(&self) -> usize {
        self.constraint_counts.iter().map(|c| c.1).sum()
    }

    /// Reads the reformulated point and objective value out of a solver vector.
    pub fn extract(&self, x: &[f64]) -> (ExpansionPoint, f64) {
        let v = &self.vars;
        let w = v
            .w_re
            .iter()
            .zip(&v.w_im)
            .map(|(re, im)| {
                DVector::from_iterator(re.len(), re.iter().zip(im).map(|(a, b)| Complex64::new(a.eval(x), b.eval(x))))
            })
            .collect();
        let ep = ExpansionPoint {
            p: v.p.iter().map(|a| a.eval(x).max(0.0)).collect(),
            w,
            tau1: v.tau1.eval(x),
            tau2: v.tau2.eval(x),
            alpha1: v.alpha1.eval(x),
            alpha2: v.alpha2.eval(x),
            beta: v.beta.eval(x),
            psi: [v.psi[0].iter().map(|a| a.eval(x)).collect(), v.psi[1].iter().map(|a| a.eval(x)).collect()],
            vartheta: v.vartheta.eval(x),
            theta: v.theta.eval(x),
        };
        let obj = match (&self.objective, &v.eta) {
            (Objective::Feasibility, Some(eta)) => eta.eval(x),
            _ => v.r.eval(x),
        };
        (ep, obj)
    }

    /// Solver vector representing `ep` with rate `r`, all auxiliary columns at
    /// their tight values. Used to check that an expansion point is feasible
    /// for the program built around it.
    pub fn embed(&self, ctx: &Ctx, ep: &ExpansionPoint, r: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.program.n];
        let v = &self.vars;
        let mut set = |a: &Affine, value: f64| {
            if let Some(&(col, coeff)) = a.terms.first() {
                x[col] = (value - a.constant) / coeff;
            }
        };
        for (a, &pk) in v.p.iter().zip(&ep.p) {
            set(a, pk);
        }
        for (k, wk) in ep.w.iter().enumerate() {
            for (j, c) in wk.iter().enumerate() {
                set(&v.w_re[k][j], c.re);
                set(&v.w_im[k][j], c.im);
            }
        }
        set(&v.tau1, ep.tau1);
        set(&v.tau2, ep.tau2);
        set(&v.alpha1, ep.alpha1);
        set(&v.alpha2, ep.alpha2);
        set(&v.beta, ep.beta);
        for i in 0..2 {
            for (a, &s) in v.psi[i].iter().zip(&ep.psi[i]) {
                set(a, s);
            }
        }
        set(&v.vartheta, ep.vartheta);
        set(&v.theta, ep.theta);
        set(&v.r, r);
        for (a, &s) in v.psi1_inv.iter().zip(&ep.psi[0]) {
            set(a, 1.0 / s);
        }
        if let Some([a, b]) = &v.tau_inv {
            set(a, 1.0 / ep.tau1);
            set(b, 1.0 / ep.tau2);
        }
        if let Some([a, b]) = &v.alpha_inv {
            set(a, 1.0 / ep.alpha1);
            set(b, 1.0 / ep.alpha2);
        }
        if let Some(a) = &v.beta_inv {
            set(a, 1.0 / ep.beta);
        }
        if let Some(a) = &v.log_aux {
            let value = match self.harvest_form {
                HarvestForm::Tangent => ctx.eh.a * ctx.eh.b / (1.0 - ep.beta),
                _ => 1.0 / (1.0 - ep.beta),
            };
            set(a, value);
        }
        if let Some(a) = &v.eta {
            let h = super::surrogate::harvest_exact(&ctx.chan.gain, &ep.p, ep.alpha2);
            set(a, h - ctx.params.p_acc_min * ep.tau1 / ep.beta);
        }
        x
    }
}

struct Builder {
    prog: ConeProgram,
    counts: Vec<(&'static str, usize)>,
}

impl Builder {
    fn var(&mut self, name: String, scale: f64, lb: f64, ub: f64) -> Affine {
        let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
        let col = self.prog.add_var(name, lb / scale, ub / scale);
        Affine::term(col, scale)
    }

    fn count(&mut self, tag: &'static str) {
        match self.counts.iter_mut().find(|c| c.0 == tag) {
            Some(c) => c.1 += 1,
            None => self.counts.push((tag, 1)),
        }
    }

    /// `lhs ≥ ‖u‖²`, divided through by `scale`.
    fn ge_squares(&mut self, lhs: Affine, u: Vec<Affine>, scale: f64, label: String) {
        let s = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
        let r = s.sqrt().recip();
        let u = u.into_iter().map(|a| a * r).collect();
        self.prog.add_affine_ge_squares(lhs * s.recip(), u, label);
    }

    /// `x·y ≥ 1` with both sides rescaled by the reference value `x0` of `x`.
    fn reciprocal(&mut self, x: &Affine, y: &Affine, x0: f64, label: String) -> Result<()> {
        self.prog.add_hyperbolic_expr(x.clone() * x0.recip(), y.clone() * x0, 1.0, label)?;
        Ok(())
    }
}

fn complex_affine(g: &CVec, re: &[Affine], im: &[Affine]) -> (Affine, Affine) {
    let mut out_re = Affine::zero();
    let mut out_im = Affine::zero();
    for (j, c) in g.iter().enumerate() {
        out_re = out_re + re[j].clone() * c.re - im[j].clone() * c.im;
        out_im = out_im + im[j].clone() * c.re + re[j].clone() * c.im;
    }
    (out_re, out_im)
}

pub fn harvest_form(ctx: &Ctx, ep: &ExpansionPoint) -> HarvestForm {
    match ctx.cfg.mode {
        Mode::Dcc => HarvestForm::Linear,
        Mode::Acc if ep.vartheta < log_ratio_convex_limit() * (1.0 - 1e-9) => HarvestForm::Tangent,
        Mode::Acc => HarvestForm::Product,
    }
}

pub fn build_subproblem(ctx: &Ctx, ep: &ExpansionPoint) -> Result<Subproblem> {
    build(ctx, ep, Objective::Rate)
}

pub fn build_feasibility(ctx: &Ctx, ep: &ExpansionPoint) -> Result<Subproblem> {
    if ctx.cfg.mode == Mode::Dcc {
        return Err(Error::InvalidInput("the AC-supply feasibility phase does not apply in DCC mode".into()));
    }
    build(ctx, ep, Objective::Feasibility)
}

fn build(ctx: &Ctx, ep: &ExpansionPoint, objective: Objective) -> Result<Subproblem> {
    let chan = ctx.chan;
    let params = ctx.params;
    let eh = ctx.eh;
    let cfg = ctx.cfg;
    let (k, n) = (chan.k(), chan.n());
    ep.check_domain(cfg.mode)?;

    let mut b = Builder { prog: ConeProgram::new(), counts: Vec::new() };

    // ---- variables ----
    let p: Vec<Affine> = (0..k)
        .map(|i| {
            let pmax = params.p_s_max[i].sqrt();
            b.var(format!("p[{i}]"), ep.p[i].max(1e-3 * pmax), 0.0, pmax)
        })
        .collect();
    let mut w_re = Vec::with_capacity(k);
    let mut w_im = Vec::with_capacity(k);
    for i in 0..k {
        let s = (ep.w[i].norm() / (n as f64).sqrt()).max(1e-12);
        w_re.push((0..n).map(|j| b.var(format!("w_re[{i},{j}]"), s, f64::NEG_INFINITY, f64::INFINITY)).collect::<Vec<_>>());
        w_im.push((0..n).map(|j| b.var(format!("w_im[{i},{j}]"), s, f64::NEG_INFINITY, f64::INFINITY)).collect::<Vec<_>>());
    }
    let (tau1, tau2) = match cfg.fixed_tau {
        Some(t) => (Affine::constant(1.0 / t), Affine::constant(1.0 / (1.0 - t))),
        None => (
            b.var("tau1".into(), ep.tau1, 1.0 + INTERIOR, f64::INFINITY),
            b.var("tau2".into(), ep.tau2, 1.0 + INTERIOR, f64::INFINITY),
        ),
    };
    let (alpha1, alpha2) = match cfg.fixed_alpha {
        Some(a) => (Affine::constant(1.0 / a), Affine::constant(1.0 / (1.0 - a))),
        None => (
            b.var("alpha1".into(), ep.alpha1, 1.0 + INTERIOR, f64::INFINITY),
            b.var("alpha2".into(), ep.alpha2, 1.0 + INTERIOR, f64::INFINITY),
        ),
    };
    let beta = match cfg.mode {
        Mode::Dcc => Affine::constant(0.0),
        Mode::Acc => b.var("beta".into(), 1.0, INTERIOR, 1.0 - INTERIOR),
    };
    let psi: [Vec<Affine>; 2] = [0, 1].map(|i| {
        (0..k).map(|j| b.var(format!("psi[{},{j}]", i + 1), ep.psi[i][j], PSI_MIN, f64::INFINITY)).collect()
    });
    let form = harvest_form(ctx, ep);
    let vartheta_ub = if form == HarvestForm::Tangent { log_ratio_convex_limit() } else { VARTHETA_CAP };
    let vartheta = b.var("vartheta".into(), ep.vartheta, 0.0, vartheta_ub);
    let theta = b.var("theta".into(), ep.theta, 0.0, f64::INFINITY);
    let r = b.var("r".into(), 1.0, 0.0, f64::INFINITY);

    let tau_k = [ep.tau1, ep.tau2];
    let taus = [tau1.clone(), tau2.clone()];

    // ---- per-hop rate minorants ----
    for i in 0..2 {
        for j in 0..k {
            let s = RateSurrogate::at(ep.psi[i][j], tau_k[i])?;
            let lhs = Affine::constant(s.a) + psi[i][j].clone() * s.b + taus[i].clone() * s.c;
            b.prog.add_ge(lhs, r.clone(), format!("rate_surrogate[{},{j}]", i + 1));
            b.count("rate_surrogate");
        }
    }

    // ---- uplink SINR minorants, split through 1/ψ ----
    let mut psi1_inv = Vec::with_capacity(k);
    for j in 0..k {
        let s = UplinkSurrogate::at(chan, params, &ep.p, ep.alpha1, j, cfg.sic)?;
        let inv0 = 1.0 / ep.psi[0][j];
        let inv = b.var(format!("psi1_inv[{j}]"), inv0, 0.0, f64::INFINITY);
        let lhs = p[j].clone() * s.lin
            - (Affine::constant(params.sigma_ant2) + alpha1.clone() * params.sigma_r2) * s.noise
            - inv.clone();
        let u = s.quad.iter().map(|&(l, q)| p[l].clone() * q.sqrt()).collect();
        b.ge_squares(lhs, u, inv0, format!("uplink_sinr[{j}]"));
        b.reciprocal(&psi[0][j], &inv, ep.psi[0][j], format!("uplink_sinr_split[{j}]"))?;
        b.count("uplink_sinr");
        psi1_inv.push(inv);
    }

    // ---- downlink SINR minorants and phase condition ----
    for j in 0..k {
        let re0 = chan.gw(j, &ep.w[j]).re;
        let sig = DownlinkSurrogate { re0 };
        let (re_jj, _) = complex_affine(&chan.g[j], &w_re[j], &w_im[j]);
        let interference: f64 = (0..k).filter(|&l| l != j).map(|l| chan.gw(j, &ep.w[l]).norm_sqr()).sum();
        let s_ref = interference + params.sigma_k2[j];
        let mut u = Vec::with_capacity(2 * k - 1);
        for l in (0..k).filter(|&l| l != j) {
            let (a, c) = complex_affine(&chan.g[j], &w_re[l], &w_im[l]);
            u.push(a * s_ref.sqrt().recip());
            u.push(c * s_ref.sqrt().recip());
        }
        u.push(Affine::constant((params.sigma_k2[j] / s_ref).sqrt()));
        let psi0 = ep.psi[1][j];
        let gk = re_jj.clone() * (2.0 * sig.re0) - sig.re0 * sig.re0;
        b.prog.add_rsoc(psi[1][j].clone() * psi0.recip(), gk * (psi0 / (2.0 * s_ref)), u, format!("downlink_sinr[{j}]"));
        b.count("downlink_sinr");
        b.prog.add_ge(re_jj * (1.0 / re0.abs().max(1e-300)), Affine::zero(), format!("downlink_phase[{j}]"));
        b.count("downlink_phase");
    }

    // source power caps are column bounds on p
    for _ in 0..k {
        b.count("source_power");
    }

    // ---- time and power splits ----
    let tau_inv = if cfg.fixed_tau.is_none() {
        let t1 = b.var("tau1_inv".into(), 1.0 / ep.tau1, 0.0, f64::INFINITY);
        let t2 = b.var("tau2_inv".into(), 1.0 / ep.tau2, 0.0, f64::INFINITY);
        b.prog.add_le(t1.clone() + t2.clone(), Affine::constant(1.0), "time_split");
        b.reciprocal(&tau1, &t1, ep.tau1, "time_split_1".into())?;
        b.reciprocal(&tau2, &t2, ep.tau2, "time_split_2".into())?;
        b.count("time_split");
        Some([t1, t2])
    } else {
        None
    };
    let alpha_inv = if cfg.fixed_alpha.is_none() {
        let a1 = b.var("alpha1_inv".into(), 1.0 / ep.alpha1, 0.0, f64::INFINITY);
        let a2 = b.var("alpha2_inv".into(), 1.0 / ep.alpha2, 0.0, f64::INFINITY);
        b.prog.add_le(a1.clone() + a2.clone(), Affine::constant(1.0), "power_split");
        b.reciprocal(&alpha1, &a1, ep.alpha1, "power_split_1".into())?;
        b.reciprocal(&alpha2, &a2, ep.alpha2, "power_split_2".into())?;
        b.count("power_split");
        Some([a1, a2])
    } else {
        None
    };
    if cfg.mode == Mode::Acc {
        // β ∈ (0,1) is a column bound
        b.count("acc_split_box");
    }

    // ---- relay power budget ----
    let static_draw = params.p_sta + if cfg.mode == Mode::Dcc { params.p_dcc_min } else { 0.0 };
    let budget = theta.clone() * eh.xi - (tau2.clone() - 1.0) * (eh.xi * eh.omega) - tau2.clone() * static_draw;
    let w_all: Vec<Affine> = w_re.iter().flatten().chain(w_im.iter().flatten()).cloned().collect();
    b.ge_squares(budget, w_all, (eh.xi * ep.theta).max(1e-300), "relay_budget".into());
    b.count("relay_budget");

    // ---- logarithmic harvesting constraint ----
    let hs = HarvestSurrogate::at(&chan.gain, &ep.p, ep.alpha2);
    let h_aff: Affine = p.iter().zip(&hs.lin).map(|(pk, l)| pk.clone() * *l).sum::<Affine>() - alpha2.clone() * hs.alpha;
    let ab = eh.a * eh.b;
    let log_aux = match form {
        HarvestForm::Tangent => {
            let t = LogRatioTangent { vartheta0: ep.vartheta, beta0: ep.beta };
            let (c0, cv, cb) = t.coeffs();
            let u0 = ab / (1.0 - ep.beta);
            let u = b.var("log_rhs".into(), u0, 0.0, f64::INFINITY);
            let lhs = h_aff.clone() * eh.a + c0 + vartheta.clone() * cv + beta.clone() * cb - u.clone();
            b.prog.add_ge(lhs * u0.recip(), Affine::zero(), "harvest_log");
            // u·(1−β) ≥ ab
            b.prog.add_hyperbolic_expr(
                u.clone() * u0.recip(),
                (Affine::constant(1.0) - beta.clone()) * (u0 / ab),
                1.0,
                "harvest_log_rhs",
            )?;
            Some(u)
        }
        HarvestForm::Product => {
            let y0 = 1.0 / (1.0 - ep.beta);
            let bound = LogProductBound { vartheta0: ep.vartheta, ytilde0: y0, ab };
            let ytilde = b.var("log_weight".into(), y0, 0.0, f64::INFINITY);
            let (m0, mv) = bound.tangent();
            let m = vartheta.clone() * mv + m0;
            let d0 = bound.d0();
            // a·H + ¼d₀² + ½d₀((m − ỹ) − d₀) ≥ (½(m + ỹ))²
            let lhs = h_aff.clone() * eh.a + 0.25 * d0 * d0 + (m.clone() - ytilde.clone() - d0) * (0.5 * d0);
            let u = vec![(m + ytilde.clone()) * 0.5];
            let scale = (0.25 * (bound.tangent().0 + bound.tangent().1 * ep.vartheta + y0).powi(2)).max(1.0);
            b.ge_squares(lhs, u, scale, "harvest_log".into());
            // ỹ·(1−β) ≥ 1
            b.prog.add_hyperbolic_expr(
                ytilde.clone() * y0.recip(),
                (Affine::constant(1.0) - beta.clone()) * y0,
                1.0,
                "harvest_log_weight",
            )?;
            Some(ytilde)
        }
        HarvestForm::Linear => {
            let bound = LogProductBound { vartheta0: ep.vartheta, ytilde0: 1.0, ab };
            let (m0, mv) = bound.tangent();
            let lhs = h_aff.clone() * eh.a - vartheta.clone() * mv - m0;
            b.prog.add_ge(lhs * (m0 + mv * ep.vartheta).abs().max(1.0).recip(), Affine::zero(), "harvest_log");
            None
        }
    };
    b.count("harvest_log");

    // ---- bilinear harvesting constraint (τ₂−1)ϑ ≥ B(1+ϑ, θ) ----
    {
        let bb = BilinearBound { x0: 1.0 + ep.vartheta, y0: ep.theta };
        let (wy, wx) = bb.weights();
        let t0 = ep.tau2 - 1.0;
        let s_ref = t0 * ep.vartheta;
        let x = (tau2.clone() - 1.0) * t0.recip();
        let y = vartheta.clone() * (t0 / (2.0 * s_ref));
        let u = vec![theta.clone() * (wy / s_ref.sqrt()), (vartheta.clone() + 1.0) * (wx / s_ref.sqrt())];
        b.prog.add_rsoc(x, y, u, "harvest_bilinear");
        b.count("harvest_bilinear");
    }

    // ---- AC computing supply ----
    let mut beta_inv = None;
    let mut eta = None;
    if cfg.mode == Mode::Acc {
        let bi = b.var("beta_inv".into(), 1.0 / ep.beta, 0.0, f64::INFINITY);
        // β can move by orders of magnitude in one step when it starts near
        // zero; referencing the cone at √β₀ keeps both sides moderate at
        // either end of such a step.
        b.reciprocal(&beta, &bi, ep.beta.sqrt(), "acc_supply_split".into())?;
        let h0 = hs.eval(&ep.p)(ep.alpha2);
        let lhs = match objective {
            Objective::Rate => h_aff.clone(),
            Objective::Feasibility => {
                let scale = h0.abs().max(params.p_acc_min * ep.tau1 / ep.beta).max(1e-300);
                let e = b.var("eta".into(), scale, f64::NEG_INFINITY, f64::INFINITY);
                eta = Some(e.clone());
                h_aff.clone() - e
            }
        };
        if params.p_acc_min > 0.0 {
            let bb = BilinearBound { x0: ep.tau1, y0: 1.0 / ep.beta };
            let (wy, wx) = bb.weights();
            let sp = params.p_acc_min.sqrt();
            let u = vec![bi.clone() * (wy * sp), tau1.clone() * (wx * sp)];
            b.ge_squares(lhs, u, params.p_acc_min * ep.tau1 / ep.beta, "acc_supply".into());
        } else {
            b.prog.add_ge(lhs * h0.abs().max(1e-300).recip(), Affine::zero(), "acc_supply");
        }
        if objective == Objective::Rate {
            b.count("acc_supply");
        }
        beta_inv = Some(bi);
    }

    match (&objective, &eta) {
        (Objective::Feasibility, Some(e)) => b.prog.maximize(e),
        _ => b.prog.maximize(&r),
    }

    let core_variables = k
        + k * n
        + if cfg.fixed_tau.is_none() { 2 } else { 0 }
        + if cfg.fixed_alpha.is_none() { 2 } else { 0 }
        + 2 * k
        + usize::from(cfg.mode == Mode::Acc)
        + 3;

    let vars = VarMap {
        p,
        w_re,
        w_im,
        tau1,
        tau2,
        alpha1,
        alpha2,
        beta,
        psi,
        vartheta,
        theta,
        r,
        eta,
        psi1_inv,
        tau_inv,
        alpha_inv,
        beta_inv,
        log_aux,
    };
    b.prog.validate()?;
    Ok(Subproblem {
        program: b.prog,
        vars,
        objective,
        harvest_form: form,
        constraint_counts: b.counts,
        core_variables,
    })
}
