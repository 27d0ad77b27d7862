//! Homogeneous self-dual primal-dual interior-point method with Nesterov–Todd
//! scaling and Mehrotra predictor-corrector steps.
//!
//! Works on the standard form produced by [`ConeProgram::canonicalize`]:
//!
//! ```text
//! min cᵀx  s.t.  A x = b,  G x + s = h,  s ∈ K
//! ```
//!
//! embedded as
//!
//! ```text
//! 0 = Aᵀy + Gᵀz + c τ
//! 0 = A x − b τ
//! s = −G x + h τ
//! κ = −cᵀx − bᵀy − hᵀz,     s, z ∈ K,  τ, κ ≥ 0
//! ```
//!
//! Newton systems are solved through the normal equations
//! `(Gᵀ W⁻² G) dx + Aᵀ dy = r` (dense, with static regularisation and
//! iterative refinement against the unreduced system), or the full
//! quasi-definite KKT matrix when [`KktMethod::Full`] is requested.

use nalgebra::{DMatrix, DVector};

use super::cones::{dot, norm, ConeLayout, NtScaling};
use super::program::{ConeProgram, SparseRow, StandardForm};
use crate::error::Result;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KktMethod {
    Reduced,
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub equilibrate: bool,
    pub kkt: KktMethod,
    pub static_reg: f64,
    pub refine_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            equilibrate: true,
            kkt: KktMethod::Reduced,
            static_reg: 1e-10,
            refine_steps: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

#[derive(Clone, Debug)]
pub struct ConeSolution {
    pub status: Status,
    pub x: Vec<f64>,
    /// Objective of the (maximisation) program at `x`.
    pub obj: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
}

pub fn solve(prog: &ConeProgram, tol: f64) -> Result<ConeSolution> {
    solve_with(prog, &SolverSettings { tol, ..Default::default() })
}

pub fn solve_with(prog: &ConeProgram, settings: &SolverSettings) -> Result<ConeSolution> {
    let sf = prog.canonicalize()?;
    let mut sol = solve_standard(&sf, settings);
    sol.obj = prog.objective_value(&sol.x);
    Ok(sol)
}

fn matvec(rows: &[SparseRow], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().map(|&(j, c)| c * x[j]).sum()).collect()
}

fn matvec_t(rows: &[SparseRow], y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (r, &yi) in rows.iter().zip(y) {
        if yi != 0.0 {
            for &(j, c) in r {
                out[j] += c * yi;
            }
        }
    }
    out
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Ruiz equilibration: `Â = E_a A D`, `Ĝ = E_g G D`, `ĉ = σ D c`.
struct Equilibration {
    d: Vec<f64>,
    ea: Vec<f64>,
    eg: Vec<f64>,
    cost: f64,
}

impl Equilibration {
    fn identity(sf: &StandardForm) -> Self {
        Self { d: vec![1.0; sf.n], ea: vec![1.0; sf.a.len()], eg: vec![1.0; sf.g.len()], cost: 1.0 }
    }

    fn compute(sf: &StandardForm, passes: usize) -> Self {
        let mut eq = Self::identity(sf);
        let n = sf.n;
        for _ in 0..passes {
            let mut col = vec![0.0f64; n];
            let mut ra = vec![0.0f64; sf.a.len()];
            let mut rg = vec![0.0f64; sf.g.len()];
            for (i, r) in sf.a.iter().enumerate() {
                for &(j, c) in r {
                    let v = (c * eq.ea[i] * eq.d[j]).abs();
                    col[j] = col[j].max(v);
                    ra[i] = ra[i].max(v);
                }
            }
            for (i, r) in sf.g.iter().enumerate() {
                for &(j, c) in r {
                    let v = (c * eq.eg[i] * eq.d[j]).abs();
                    col[j] = col[j].max(v);
                    rg[i] = rg[i].max(v);
                }
            }
            // second-order blocks must be scaled uniformly
            for (st, q) in sf.layout.soc_ranges() {
                let m = rg[st..st + q].iter().cloned().fold(0.0, f64::max);
                rg[st..st + q].fill(m);
            }
            for j in 0..n {
                if col[j] > 0.0 {
                    eq.d[j] /= col[j].sqrt();
                }
            }
            for i in 0..ra.len() {
                if ra[i] > 0.0 {
                    eq.ea[i] /= ra[i].sqrt();
                }
            }
            for i in 0..rg.len() {
                if rg[i] > 0.0 {
                    eq.eg[i] /= rg[i].sqrt();
                }
            }
        }
        let cmax = sf.c.iter().zip(&eq.d).map(|(c, d)| (c * d).abs()).fold(0.0, f64::max);
        eq.cost = if cmax > 0.0 { (1.0 / cmax).clamp(1e-4, 1e4) } else { 1.0 };
        eq
    }

    fn apply(&self, sf: &StandardForm) -> StandardForm {
        let scale_rows = |rows: &[SparseRow], e: &[f64]| -> Vec<SparseRow> {
            rows.iter()
                .zip(e)
                .map(|(r, &ei)| r.iter().map(|&(j, c)| (j, c * ei * self.d[j])).collect())
                .collect()
        };
        StandardForm {
            n: sf.n,
            c: sf.c.iter().zip(&self.d).map(|(c, d)| c * d * self.cost).collect(),
            a: scale_rows(&sf.a, &self.ea),
            b: sf.b.iter().zip(&self.ea).map(|(b, e)| b * e).collect(),
            g: scale_rows(&sf.g, &self.eg),
            h: sf.h.iter().zip(&self.eg).map(|(h, e)| h * e).collect(),
            layout: sf.layout.clone(),
        }
    }
}

/// Dense copy of each second-order block's rows restricted to the columns it touches.
struct SocBlockData {
    start: usize,
    cols: Vec<usize>,
    /// q × |cols|, row-major
    dense: Vec<f64>,
}

fn soc_block_data(sf: &StandardForm) -> Vec<SocBlockData> {
    sf.layout
        .soc_ranges()
        .map(|(st, q)| {
            let mut cols: Vec<usize> = sf.g[st..st + q].iter().flat_map(|r| r.iter().map(|&(j, _)| j)).collect();
            cols.sort_unstable();
            cols.dedup();
            let w = cols.len();
            let mut dense = vec![0.0; q * w];
            for (i, r) in sf.g[st..st + q].iter().enumerate() {
                for &(j, c) in r {
                    let k = cols.binary_search(&j).unwrap();
                    dense[i * w + k] += c;
                }
            }
            SocBlockData { start: st, cols, dense }
        })
        .collect()
}

struct KktSystem<'a> {
    sf: &'a StandardForm,
    scaling: NtScaling,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    method: KktMethod,
    refine_steps: usize,
}

impl<'a> KktSystem<'a> {
    fn factor(sf: &'a StandardForm, blocks: &[SocBlockData], scaling: NtScaling, settings: &SolverSettings) -> Self {
        let n = sf.n;
        let p = sf.a.len();
        let m = sf.g.len();
        let delta = settings.static_reg;
        let mat = match settings.kkt {
            KktMethod::Reduced => {
                let mut k = DMatrix::<f64>::zeros(n + p, n + p);
                for j in 0..n {
                    k[(j, j)] = delta;
                }
                for i in 0..sf.layout.nonneg {
                    let wi2 = 1.0 / (scaling.d[i] * scaling.d[i]);
                    let r = &sf.g[i];
                    for &(j, cj) in r {
                        for &(l, cl) in r {
                            k[(j, l)] += wi2 * cj * cl;
                        }
                    }
                }
                for (b, ((st, q), (eta, wbar))) in blocks.iter().zip(sf.layout.soc_ranges().zip(&scaling.soc)) {
                    debug_assert_eq!(b.start, st);
                    let w = b.cols.len();
                    // columns of W⁻¹ B
                    let mut wb = vec![0.0; q * w];
                    let mut colv = vec![0.0; q];
                    for c in 0..w {
                        for i in 0..q {
                            colv[i] = b.dense[i * w + c];
                        }
                        let w1v1 = dot(&wbar[1..], &colv[1..]);
                        let inv_eta = 1.0 / eta;
                        wb[c] = inv_eta * (wbar[0] * colv[0] - w1v1);
                        let coef = -colv[0] + w1v1 / (1.0 + wbar[0]);
                        for i in 1..q {
                            wb[i * w + c] = inv_eta * (colv[i] + coef * wbar[i]);
                        }
                    }
                    for c1 in 0..w {
                        for c2 in c1..w {
                            let mut acc = 0.0;
                            for i in 0..q {
                                acc += wb[i * w + c1] * wb[i * w + c2];
                            }
                            let (j1, j2) = (b.cols[c1], b.cols[c2]);
                            k[(j1, j2)] += acc;
                            if c1 != c2 {
                                k[(j2, j1)] += acc;
                            }
                        }
                    }
                }
                for (i, r) in sf.a.iter().enumerate() {
                    for &(j, c) in r {
                        k[(n + i, j)] += c;
                        k[(j, n + i)] += c;
                    }
                    k[(n + i, n + i)] -= delta;
                }
                k
            }
            KktMethod::Full => {
                let dim = n + p + m;
                let mut k = DMatrix::<f64>::zeros(dim, dim);
                for j in 0..n {
                    k[(j, j)] = delta;
                }
                for (i, r) in sf.a.iter().enumerate() {
                    for &(j, c) in r {
                        k[(n + i, j)] += c;
                        k[(j, n + i)] += c;
                    }
                    k[(n + i, n + i)] -= delta;
                }
                for (i, r) in sf.g.iter().enumerate() {
                    for &(j, c) in r {
                        k[(n + p + i, j)] += c;
                        k[(j, n + p + i)] += c;
                    }
                }
                let mut e = vec![0.0; m];
                for i in 0..m {
                    e.fill(0.0);
                    e[i] = 1.0;
                    let col = scaling.apply_w2(&e);
                    for (r, v) in col.iter().enumerate() {
                        k[(n + p + r, n + p + i)] -= v;
                    }
                    k[(n + p + i, n + p + i)] -= delta;
                }
                k
            }
        };
        Self { sf, scaling, lu: mat.lu(), method: settings.kkt, refine_steps: settings.refine_steps }
    }

    fn raw_solve(&self, r1: &[f64], r2: &[f64], r3: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let sf = self.sf;
        let (n, p) = (sf.n, sf.a.len());
        match self.method {
            KktMethod::Reduced => {
                let w2r3 = self.scaling.apply_winv2(r3);
                let gt = matvec_t(&sf.g, &w2r3, n);
                let mut rhs = DVector::<f64>::zeros(n + p);
                for j in 0..n {
                    rhs[j] = r1[j] + gt[j];
                }
                for i in 0..p {
                    rhs[n + i] = r2[i];
                }
                let sol = self.lu.solve(&rhs).unwrap_or_else(|| DVector::from_element(n + p, f64::NAN));
                let dx: Vec<f64> = sol.as_slice()[..n].to_vec();
                let dy: Vec<f64> = sol.as_slice()[n..].to_vec();
                let mut gdx = matvec(&sf.g, &dx);
                for (v, r) in gdx.iter_mut().zip(r3) {
                    *v -= r;
                }
                let dz = self.scaling.apply_winv2(&gdx);
                (dx, dy, dz)
            }
            KktMethod::Full => {
                let m = sf.g.len();
                let mut rhs = DVector::<f64>::zeros(n + p + m);
                rhs.as_mut_slice()[..n].copy_from_slice(r1);
                rhs.as_mut_slice()[n..n + p].copy_from_slice(r2);
                rhs.as_mut_slice()[n + p..].copy_from_slice(r3);
                let sol = self.lu.solve(&rhs).unwrap_or_else(|| DVector::from_element(n + p + m, f64::NAN));
                let s = sol.as_slice();
                (s[..n].to_vec(), s[n..n + p].to_vec(), s[n + p..].to_vec())
            }
        }
    }

    fn residual(&self, r: [&[f64]; 3], d: [&[f64]; 3]) -> [Vec<f64>; 3] {
        let sf = self.sf;
        let n = sf.n;
        let mut e1 = r[0].to_vec();
        axpy(-1.0, &matvec_t(&sf.a, d[1], n), &mut e1);
        axpy(-1.0, &matvec_t(&sf.g, d[2], n), &mut e1);
        let mut e2 = r[1].to_vec();
        axpy(-1.0, &matvec(&sf.a, d[0]), &mut e2);
        let mut e3 = r[2].to_vec();
        axpy(-1.0, &matvec(&sf.g, d[0]), &mut e3);
        axpy(1.0, &self.scaling.apply_w2(d[2]), &mut e3);
        [e1, e2, e3]
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −W²] (dx, dy, dz) = (r1, r2, r3)`.
    fn solve(&self, r1: &[f64], r2: &[f64], r3: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (mut dx, mut dy, mut dz) = self.raw_solve(r1, r2, r3);
        let rnorm = |e: &[Vec<f64>; 3]| e.iter().map(|v| v.iter().fold(0.0f64, |a, b| a.max(b.abs()))).fold(0.0, f64::max);
        let mut err = self.residual([r1, r2, r3], [&dx, &dy, &dz]);
        let mut en = rnorm(&err);
        for _ in 0..self.refine_steps {
            if !(en > 0.0) {
                break;
            }
            let (cx, cy, cz) = self.raw_solve(&err[0], &err[1], &err[2]);
            let nx: Vec<f64> = dx.iter().zip(&cx).map(|(a, b)| a + b).collect();
            let ny: Vec<f64> = dy.iter().zip(&cy).map(|(a, b)| a + b).collect();
            let nz: Vec<f64> = dz.iter().zip(&cz).map(|(a, b)| a + b).collect();
            let new_err = self.residual([r1, r2, r3], [&nx, &ny, &nz]);
            let new_en = rnorm(&new_err);
            if !(new_en < en) {
                break;
            }
            dx = nx;
            dy = ny;
            dz = nz;
            err = new_err;
            en = new_en;
        }
        (dx, dy, dz)
    }
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

struct Metrics {
    pres: f64,
    dres: f64,
    gap: f64,
    primal_infeasible: bool,
    dual_infeasible: bool,
}

fn metrics(orig: &StandardForm, eq: &Equilibration, it: &Iterate, tol: f64) -> (Metrics, Vec<f64>) {
    let n = orig.n;
    let x: Vec<f64> = it.x.iter().zip(&eq.d).map(|(v, d)| v * d).collect();
    let s: Vec<f64> = it.s.iter().zip(&eq.eg).map(|(v, e)| v / e).collect();
    let y: Vec<f64> = it.y.iter().zip(&eq.ea).map(|(v, e)| v * e / eq.cost).collect();
    let z: Vec<f64> = it.z.iter().zip(&eq.eg).map(|(v, e)| v * e / eq.cost).collect();
    let tau = it.tau;

    let nb = norm(&orig.b);
    let nh = norm(&orig.h);
    let nc = norm(&orig.c);

    let ax = matvec(&orig.a, &x);
    let gx = matvec(&orig.g, &x);
    let aty = matvec_t(&orig.a, &y, n);
    let gtz = matvec_t(&orig.g, &z, n);

    let ry: f64 = ax.iter().zip(&orig.b).map(|(a, b)| (a / tau - b).powi(2)).sum::<f64>().sqrt();
    let rz: f64 = gx.iter().zip(&s).zip(&orig.h).map(|((g, s), h)| ((g + s) / tau - h).powi(2)).sum::<f64>().sqrt();
    let pres = (ry / (1.0 + nb)).max(rz / (1.0 + nh));
    let rx: f64 = (0..n).map(|j| ((aty[j] + gtz[j]) / tau + orig.c[j]).powi(2)).sum::<f64>().sqrt();
    let dres = rx / (1.0 + nc);
    let pcost = dot(&orig.c, &x) / tau;
    let dcost = -(dot(&orig.b, &y) + dot(&orig.h, &z)) / tau;
    let sz = dot(&s, &z) / (tau * tau);
    let gap = sz.abs().max((pcost - dcost).abs()) / (1.0 + pcost.abs().min(dcost.abs()));

    let by_hz = dot(&orig.b, &y) + dot(&orig.h, &z);
    let dual_ray: f64 = (0..n).map(|j| (aty[j] + gtz[j]).powi(2)).sum::<f64>().sqrt();
    let primal_infeasible = by_hz < 0.0 && dual_ray <= tol * (-by_hz) * (1.0 + nc).max(1.0) / (1.0 + nc) && it.kappa > it.tau;
    let cx = dot(&orig.c, &x);
    let prim_ray = (ax.iter().map(|v| v * v).sum::<f64>() + gx.iter().zip(&s).map(|(g, s)| (g + s).powi(2)).sum::<f64>()).sqrt();
    let dual_infeasible = cx < 0.0 && prim_ray <= tol * (-cx) && it.kappa > it.tau;

    let xbar = x.iter().map(|v| v / tau).collect();
    (Metrics { pres, dres, gap, primal_infeasible, dual_infeasible }, xbar)
}

fn solve_standard(orig: &StandardForm, settings: &SolverSettings) -> ConeSolution {
    let eq = if settings.equilibrate { Equilibration::compute(orig, 20) } else { Equilibration::identity(orig) };
    let sf = eq.apply(orig);
    let layout: &ConeLayout = &sf.layout;
    let (n, p, m) = (sf.n, sf.a.len(), sf.g.len());
    let blocks = soc_block_data(&sf);
    let deg = layout.degree() as f64;

    let fail = |status: Status, iterations: usize| ConeSolution {
        status,
        x: vec![0.0; n],
        obj: 0.0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
        iterations,
    };

    // initial point from two least-squares style solves with W = I
    let init = KktSystem::factor(&sf, &blocks, NtScaling::identity(layout), settings);
    let zeros_n = vec![0.0; n];
    let zeros_p = vec![0.0; p];
    let zeros_m = vec![0.0; m];
    let (x0, _, zp) = init.solve(&zeros_n, &sf.b, &sf.h);
    let neg_c: Vec<f64> = sf.c.iter().map(|v| -v).collect();
    let (_, y0, zd) = init.solve(&neg_c, &zeros_p, &zeros_m);
    if x0.iter().chain(&zp).chain(&y0).chain(&zd).any(|v| !v.is_finite()) {
        return fail(Status::NumericalLimit, 0);
    }
    let e = layout.identity();
    let shift = |u: Vec<f64>| -> Vec<f64> {
        let a = layout.boundary_shift(&u);
        if a < 0.0 {
            u
        } else {
            u.iter().zip(&e).map(|(v, ei)| v + (1.0 + a) * ei).collect()
        }
    };
    let s0 = shift(zp.iter().map(|v| -v).collect());
    let z0 = shift(zd);
    let mut it = Iterate { x: x0, y: y0, z: z0, s: s0, tau: 1.0, kappa: 1.0 };

    let mut best: Option<(f64, Vec<f64>, Metrics)> = None;
    let mut iterations = 0;
    for k in 0..=settings.max_iter {
        iterations = k;
        let (met, xbar) = metrics(orig, &eq, &it, settings.tol);
        if met.pres <= settings.tol && met.dres <= settings.tol && met.gap <= settings.tol {
            return ConeSolution {
                status: Status::Optimal,
                x: xbar,
                obj: 0.0,
                primal_residual: met.pres,
                dual_residual: met.dres,
                gap: met.gap,
                iterations: k,
            };
        }
        if met.primal_infeasible {
            return ConeSolution { status: Status::Infeasible, ..fail(Status::Infeasible, k) };
        }
        if met.dual_infeasible {
            return ConeSolution { status: Status::Unbounded, ..fail(Status::Unbounded, k) };
        }
        let merit = met.pres.max(met.dres).max(met.gap);
        if merit.is_finite() && best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, xbar, met));
        }
        if k == settings.max_iter {
            break;
        }

        // residuals of the embedding
        let mut rx = matvec_t(&sf.a, &it.y, n);
        axpy(1.0, &matvec_t(&sf.g, &it.z, n), &mut rx);
        axpy(it.tau, &sf.c, &mut rx);
        let mut ry = matvec(&sf.a, &it.x);
        axpy(-it.tau, &sf.b, &mut ry);
        let mut rz = matvec(&sf.g, &it.x);
        axpy(1.0, &it.s, &mut rz);
        axpy(-it.tau, &sf.h, &mut rz);
        let rtau = it.kappa + dot(&sf.c, &it.x) + dot(&sf.b, &it.y) + dot(&sf.h, &it.z);
        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (deg + 1.0);

        let scaling = NtScaling::compute(layout, &it.s, &it.z);
        let lambda = scaling.lambda.clone();
        let kkt = KktSystem::factor(&sf, &blocks, scaling, settings);
        let (x2, y2, z2) = kkt.solve(&neg_c, &sf.b, &sf.h);
        let denom2 = dot(&sf.c, &x2) + dot(&sf.b, &y2) + dot(&sf.h, &z2) - it.kappa / it.tau;

        let direction = |f: f64, d_s: &[f64], d_k: f64| -> Direction {
            let v = layout.jordan_div(&lambda, d_s);
            let wv = kkt.scaling.apply_w(&v);
            let r1: Vec<f64> = rx.iter().map(|r| -f * r).collect();
            let r2: Vec<f64> = ry.iter().map(|r| -f * r).collect();
            let r3: Vec<f64> = rz.iter().zip(&wv).map(|(r, w)| -f * r - w).collect();
            let (x1, y1, z1) = kkt.solve(&r1, &r2, &r3);
            let num = -f * rtau - d_k / it.tau - (dot(&sf.c, &x1) + dot(&sf.b, &y1) + dot(&sf.h, &z1));
            let dtau = num / denom2;
            let mut dx = x1;
            axpy(dtau, &x2, &mut dx);
            let mut dy = y1;
            axpy(dtau, &y2, &mut dy);
            let mut dz = z1;
            axpy(dtau, &z2, &mut dz);
            let wdz = kkt.scaling.apply_w(&dz);
            let inner: Vec<f64> = v.iter().zip(&wdz).map(|(a, b)| a - b).collect();
            let ds = kkt.scaling.apply_w(&inner);
            let dkappa = (d_k - it.kappa * dtau) / it.tau;
            Direction { dx, dy, dz, ds, dtau, dkappa }
        };
        let step_len = |d: &Direction| -> f64 {
            let mut a = layout.max_step(&it.s, &d.ds, 1e6).min(layout.max_step(&it.z, &d.dz, 1e6));
            if d.dtau < 0.0 {
                a = a.min(-it.tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-it.kappa / d.dkappa);
            }
            a
        };

        // affine-scaling predictor
        let ll = layout.jordan_prod(&lambda, &lambda);
        let ds_aff: Vec<f64> = ll.iter().map(|v| -v).collect();
        let aff = direction(1.0, &ds_aff, -it.kappa * it.tau);
        let alpha_aff = step_len(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // combined centring-corrector
        let a1 = kkt.scaling.apply_winv(&aff.ds);
        let b1 = kkt.scaling.apply_w(&aff.dz);
        let corr = layout.jordan_prod(&a1, &b1);
        let ds_c: Vec<f64> = ll.iter().zip(&corr).zip(&e).map(|((l, c), ei)| -l - c + sigma * mu * ei).collect();
        let dk_c = -it.kappa * it.tau - aff.dkappa * aff.dtau + sigma * mu;
        let dir = direction(1.0 - sigma, &ds_c, dk_c);
        let alpha = (0.99 * step_len(&dir)).min(1.0);
        if !(alpha > 1e-12) || dir.dx.iter().any(|v| !v.is_finite()) {
            break;
        }

        let mut next = it.clone();
        axpy(alpha, &dir.dx, &mut next.x);
        axpy(alpha, &dir.dy, &mut next.y);
        axpy(alpha, &dir.dz, &mut next.z);
        axpy(alpha, &dir.ds, &mut next.s);
        next.tau += alpha * dir.dtau;
        next.kappa += alpha * dir.dkappa;
        if !(layout.is_interior(&next.s) && layout.is_interior(&next.z) && next.tau > 0.0 && next.kappa > 0.0) {
            break;
        }
        it = next;
    }
    match best {
        Some((_, x, met)) => ConeSolution {
            status: Status::NumericalLimit,
            x,
            obj: 0.0,
            primal_residual: met.pres,
            dual_residual: met.dres,
            gap: met.gap,
            iterations,
        },
        None => fail(Status::NumericalLimit, iterations),
    }
}
