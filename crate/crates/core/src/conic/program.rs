//! Cone program data model and canonicalisation to standard conic form.

use std::fmt::Write as _;

use super::affine::Affine;
use super::cones::ConeLayout;
use crate::error::{Error, Result};

/// Sparse linear row `coeffs · x (= | ≤) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub label: String,
}

/// `‖u‖ ≤ t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SocBlock {
    pub t: Affine,
    pub u: Vec<Affine>,
    pub label: String,
}

/// `2·x·y ≥ ‖u‖²` with `x, y ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RsocBlock {
    pub x: Affine,
    pub y: Affine,
    pub u: Vec<Affine>,
    pub label: String,
}

/// Handle to a cone block appended to a program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockRef {
    Soc(usize),
    Rsoc(usize),
}

/// A maximisation over real variables with linear, second-order and rotated
/// second-order cone constraints.
#[derive(Clone, Debug, Default)]
pub struct ConeProgram {
    pub n: usize,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub lin_eq: Vec<LinearRow>,
    /// `coeffs · x ≤ rhs`
    pub lin_ineq: Vec<LinearRow>,
    pub soc_blocks: Vec<SocBlock>,
    pub rsoc_blocks: Vec<RsocBlock>,
    pub var_bounds: Vec<(f64, f64)>,
    pub var_names: Vec<String>,
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a variable and returns its column.
    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> usize {
        self.n += 1;
        self.objective.push(0.0);
        self.var_bounds.push((lb, ub));
        self.var_names.push(name.into());
        self.n - 1
    }

    /// Sets the objective to `maximize expr`.
    pub fn maximize(&mut self, expr: &Affine) {
        self.objective = vec![0.0; self.n];
        for &(j, c) in &expr.terms {
            self.objective[j] += c;
        }
        self.objective_constant = expr.constant;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// `lhs == rhs`
    pub fn add_eq(&mut self, lhs: Affine, rhs: Affine, label: impl Into<String>) {
        let e = (lhs - rhs).compact();
        self.lin_eq.push(LinearRow { coeffs: e.terms, rhs: -e.constant, label: label.into() });
    }

    /// `lhs ≤ rhs`
    pub fn add_le(&mut self, lhs: Affine, rhs: Affine, label: impl Into<String>) {
        let e = (lhs - rhs).compact();
        self.lin_ineq.push(LinearRow { coeffs: e.terms, rhs: -e.constant, label: label.into() });
    }

    /// `lhs ≥ rhs`
    pub fn add_ge(&mut self, lhs: Affine, rhs: Affine, label: impl Into<String>) {
        self.add_le(rhs, lhs, label);
    }

    pub fn add_soc(&mut self, t: Affine, u: Vec<Affine>, label: impl Into<String>) -> BlockRef {
        self.soc_blocks.push(SocBlock {
            t: t.compact(),
            u: u.into_iter().map(Affine::compact).collect(),
            label: label.into(),
        });
        BlockRef::Soc(self.soc_blocks.len() - 1)
    }

    pub fn add_rsoc(&mut self, x: Affine, y: Affine, u: Vec<Affine>, label: impl Into<String>) -> BlockRef {
        self.rsoc_blocks.push(RsocBlock {
            x: x.compact(),
            y: y.compact(),
            u: u.into_iter().map(Affine::compact).collect(),
            label: label.into(),
        });
        BlockRef::Rsoc(self.rsoc_blocks.len() - 1)
    }

    /// Hyperbolic constraint `x·y ≥ c`, `x, y ≥ 0`, on two columns.
    pub fn add_hyperbolic(&mut self, x_idx: usize, y_idx: usize, c: f64) -> Result<BlockRef> {
        self.add_hyperbolic_expr(Affine::var(x_idx), Affine::var(y_idx), c, "hyperbolic")
    }

    /// Hyperbolic constraint on affine expressions, encoded as `‖(2√c, x − y)‖ ≤ x + y`.
    pub fn add_hyperbolic_expr(&mut self, x: Affine, y: Affine, c: f64, label: impl Into<String>) -> Result<BlockRef> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidInput(format!("hyperbolic constant must be positive, got {c}")));
        }
        let t = x.clone() + y.clone();
        let u = vec![Affine::constant(2.0 * c.sqrt()), x - y];
        Ok(self.add_soc(t, u, label))
    }

    /// `2·x·y ≥ ‖u‖²` on two columns.
    pub fn add_quad_over_lin(&mut self, u: Vec<Affine>, x_idx: usize, y_idx: usize) -> BlockRef {
        self.add_rsoc(Affine::var(x_idx), Affine::var(y_idx), u, "quad-over-lin")
    }

    /// `lhs ≥ ‖u‖²` for an affine `lhs`, i.e. a rotated cone with `y = 1/2`.
    pub fn add_affine_ge_squares(&mut self, lhs: Affine, u: Vec<Affine>, label: impl Into<String>) -> BlockRef {
        self.add_rsoc(lhs, Affine::constant(0.5), u, label)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("cone program: {what}")));
        if self.objective.len() != self.n || self.var_bounds.len() != self.n {
            return bad("objective/bounds length differs from variable count");
        }
        let in_range = |a: &Affine| a.max_col().map_or(true, |j| j < self.n) && a.terms.iter().all(|t| t.1.is_finite()) && a.constant.is_finite();
        let row_ok = |r: &LinearRow| r.coeffs.iter().all(|&(j, c)| j < self.n && c.is_finite()) && r.rhs.is_finite();
        if !self.lin_eq.iter().chain(&self.lin_ineq).all(row_ok) {
            return bad("linear row references an unknown column or is non-finite");
        }
        if !self.soc_blocks.iter().all(|b| in_range(&b.t) && b.u.iter().all(in_range)) {
            return bad("second-order block references an unknown column or is non-finite");
        }
        if !self.rsoc_blocks.iter().all(|b| in_range(&b.x) && in_range(&b.y) && b.u.iter().all(in_range)) {
            return bad("rotated block references an unknown column or is non-finite");
        }
        if self.var_bounds.iter().any(|&(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return bad("inconsistent variable bounds");
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return bad("non-finite objective");
        }
        Ok(())
    }

    /// Largest constraint violation at `x` (0 when feasible), evaluated directly
    /// on the modelling form without going through canonicalisation.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        let row = |r: &LinearRow| r.coeffs.iter().map(|&(j, c)| c * x[j]).sum::<f64>() - r.rhs;
        for r in &self.lin_eq {
            v = v.max(row(r).abs());
        }
        for r in &self.lin_ineq {
            v = v.max(row(r));
        }
        for b in &self.soc_blocks {
            let n: f64 = b.u.iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt();
            v = v.max(n - b.t.eval(x));
        }
        for b in &self.rsoc_blocks {
            let (xv, yv) = (b.x.eval(x), b.y.eval(x));
            let uu: f64 = b.u.iter().map(|a| a.eval(x).powi(2)).sum();
            v = v.max(-xv).max(-yv);
            // same measure as the equivalent second-order cone
            let t = (xv + yv) / std::f64::consts::SQRT_2;
            let d = (xv - yv) / std::f64::consts::SQRT_2;
            v = v.max((d * d + uu).sqrt() - t);
        }
        for (j, &(l, u)) in self.var_bounds.iter().enumerate() {
            v = v.max(l - x[j]).max(x[j] - u);
        }
        v
    }

    /// Plain-text listing, one constraint per line, for cross-checking with other solvers.
    pub fn to_listing(&self) -> String {
        let mut out = String::new();
        let fmt_aff = |a: &Affine| {
            let mut s = String::new();
            for &(j, c) in &a.terms {
                let _ = write!(s, "{c:+e}*x{j} ");
            }
            let _ = write!(s, "{:+e}", a.constant);
            s
        };
        let _ = writeln!(out, "# variables {}", self.n);
        for (j, (name, (l, u))) in self.var_names.iter().zip(&self.var_bounds).enumerate() {
            let _ = writeln!(out, "var x{j} {name} [{l:e}, {u:e}]");
        }
        let obj = Affine {
            terms: self.objective.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect(),
            constant: self.objective_constant,
        };
        let _ = writeln!(out, "maximize {}", fmt_aff(&obj));
        for r in &self.lin_eq {
            let a = Affine { terms: r.coeffs.clone(), constant: 0.0 };
            let _ = writeln!(out, "eq [{}] {} == {:e}", r.label, fmt_aff(&a), r.rhs);
        }
        for r in &self.lin_ineq {
            let a = Affine { terms: r.coeffs.clone(), constant: 0.0 };
            let _ = writeln!(out, "le [{}] {} <= {:e}", r.label, fmt_aff(&a), r.rhs);
        }
        for b in &self.soc_blocks {
            let u: Vec<String> = b.u.iter().map(|a| fmt_aff(a)).collect();
            let _ = writeln!(out, "soc [{}] t={} u=({})", b.label, fmt_aff(&b.t), u.join("; "));
        }
        for b in &self.rsoc_blocks {
            let u: Vec<String> = b.u.iter().map(|a| fmt_aff(a)).collect();
            let _ = writeln!(out, "rsoc [{}] x={} y={} u=({})", b.label, fmt_aff(&b.x), fmt_aff(&b.y), u.join("; "));
        }
        out
    }

    /// Lowers the program to `min cᵀx  s.t.  A x = b,  G x + s = h,  s ∈ K`.
    pub fn canonicalize(&self) -> Result<StandardForm> {
        self.validate()?;
        let mut lp_g: Vec<SparseRow> = Vec::new();
        let mut lp_h = Vec::new();
        let mut soc_g: Vec<SparseRow> = Vec::new();
        let mut soc_h = Vec::new();
        let mut soc_dims = Vec::new();

        // entry `e` of a cone block: s_i = e(x) = h_i - G_i x
        let push_entry = |g: &mut Vec<SparseRow>, h: &mut Vec<f64>, e: &Affine| {
            g.push(e.terms.iter().map(|&(j, c)| (j, -c)).collect());
            h.push(e.constant);
        };
        let mut push_lp = |e: &Affine| {
            if e.is_constant() {
                if e.constant < 0.0 {
                    lp_g.push(Vec::new());
                    lp_h.push(e.constant);
                }
                return;
            }
            push_entry(&mut lp_g, &mut lp_h, e);
        };

        for r in &self.lin_ineq {
            push_lp(&Affine { terms: r.coeffs.iter().map(|&(j, c)| (j, -c)).collect(), constant: r.rhs });
        }
        for (j, &(l, u)) in self.var_bounds.iter().enumerate() {
            if l.is_finite() {
                push_lp(&(Affine::var(j) - l));
            }
            if u.is_finite() {
                push_lp(&(Affine::constant(u) - Affine::var(j)));
            }
        }
        let mut cone_entries: Vec<Vec<Affine>> = Vec::new();
        for b in &self.soc_blocks {
            if b.u.iter().all(Affine::is_constant) && b.u.iter().all(|a| a.constant == 0.0) {
                push_lp(&b.t);
            } else {
                let mut ent = vec![b.t.clone()];
                ent.extend(b.u.iter().cloned());
                cone_entries.push(ent);
            }
        }
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        for b in &self.rsoc_blocks {
            if b.u.iter().all(|a| a.is_constant() && a.constant == 0.0) {
                push_lp(&b.x);
                push_lp(&b.y);
            } else {
                let mut ent = vec![(b.x.clone() + b.y.clone()) * r2, (b.x.clone() - b.y.clone()) * r2];
                ent.extend(b.u.iter().cloned());
                cone_entries.push(ent);
            }
        }
        for ent in cone_entries {
            let ent: Vec<Affine> = ent.into_iter().map(Affine::compact).collect();
            if ent.iter().all(Affine::is_constant) {
                // fully constant block: keep only if violated, so the solver reports infeasibility
                let t = ent[0].constant;
                let n: f64 = ent[1..].iter().map(|a| a.constant * a.constant).sum::<f64>().sqrt();
                if t >= n {
                    continue;
                }
            }
            soc_dims.push(ent.len());
            for e in &ent {
                push_entry(&mut soc_g, &mut soc_h, e);
            }
        }

        let nonneg = lp_g.len();
        let mut g = lp_g;
        g.extend(soc_g);
        let mut h = lp_h;
        h.extend(soc_h);

        let a: Vec<SparseRow> = self.lin_eq.iter().map(|r| r.coeffs.clone()).collect();
        let b: Vec<f64> = self.lin_eq.iter().map(|r| r.rhs).collect();
        Ok(StandardForm {
            n: self.n,
            c: self.objective.iter().map(|v| -v).collect(),
            a,
            b,
            g,
            h,
            layout: ConeLayout { nonneg, soc: soc_dims },
        })
    }
}

pub type SparseRow = Vec<(usize, f64)>;

/// `min cᵀx  s.t.  A x = b,  G x + s = h,  s ∈ K(layout)`.
#[derive(Clone, Debug)]
pub struct StandardForm {
    pub n: usize,
    pub c: Vec<f64>,
    pub a: Vec<SparseRow>,
    pub b: Vec<f64>,
    pub g: Vec<SparseRow>,
    pub h: Vec<f64>,
    pub layout: ConeLayout,
}
