//! Cone algebra for the product cone `R+^l × Q^{q1} × … × Q^{qk}`:
//! Jordan products, Nesterov–Todd scalings and step-to-boundary searches.

/// Layout of the slack vector: `nonneg` orthant rows first, then second-order cone blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeLayout {
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl ConeLayout {
    pub fn dim(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree: one per orthant row and one per second-order block.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    /// `(start, len)` of every second-order block.
    pub fn soc_ranges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut start = self.nonneg;
        self.soc.iter().map(move |&q| {
            let r = (start, q);
            start += q;
            r
        })
    }

    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        e[..self.nonneg].fill(1.0);
        for (st, _) in self.soc_ranges() {
            e[st] = 1.0;
        }
        e
    }

    /// Smallest `a` such that `u + a·e` lies in the (closed) cone.
    pub fn boundary_shift(&self, u: &[f64]) -> f64 {
        let mut a = f64::NEG_INFINITY;
        for &v in &u[..self.nonneg] {
            a = a.max(-v);
        }
        for (st, q) in self.soc_ranges() {
            let b = &u[st..st + q];
            a = a.max(norm(&b[1..]) - b[0]);
        }
        a
    }

    pub fn is_interior(&self, u: &[f64]) -> bool {
        u[..self.nonneg].iter().all(|&v| v > 0.0)
            && self.soc_ranges().all(|(st, q)| {
                let b = &u[st..st + q];
                b[0] > 0.0 && soc_det(b) > 0.0
            })
    }

    /// Jordan product `u ∘ v`.
    pub fn jordan_prod(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for i in 0..self.nonneg {
            out[i] = u[i] * v[i];
        }
        for (st, q) in self.soc_ranges() {
            let (u, v) = (&u[st..st + q], &v[st..st + q]);
            out[st] = dot(u, v);
            for i in 1..q {
                out[st + i] = u[0] * v[i] + v[0] * u[i];
            }
        }
        out
    }

    /// Solves `lambda ∘ x = v` for `x` (`lambda` interior).
    pub fn jordan_div(&self, lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for i in 0..self.nonneg {
            out[i] = v[i] / lambda[i];
        }
        for (st, q) in self.soc_ranges() {
            let (l, v) = (&lambda[st..st + q], &v[st..st + q]);
            let det = soc_det(l);
            let l1v1 = dot(&l[1..], &v[1..]);
            let x0 = (l[0] * v[0] - l1v1) / det;
            out[st] = x0;
            for i in 1..q {
                out[st + i] = (v[i] - x0 * l[i]) / l[0];
            }
        }
        out
    }

    /// Largest step `a ≥ 0` (capped at `cap`) keeping `u + a·du` in the cone. `u` must be interior.
    pub fn max_step(&self, u: &[f64], du: &[f64], cap: f64) -> f64 {
        let mut a = cap;
        for i in 0..self.nonneg {
            if du[i] < 0.0 {
                a = a.min(-u[i] / du[i]);
            }
        }
        for (st, q) in self.soc_ranges() {
            a = a.min(soc_max_step(&u[st..st + q], &du[st..st + q], cap));
        }
        a.max(0.0)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `u0² − ‖u1‖²`, factored for accuracy near the boundary.
pub(crate) fn soc_det(u: &[f64]) -> f64 {
    let n1 = norm(&u[1..]);
    (u[0] - n1) * (u[0] + n1)
}

fn soc_max_step(u: &[f64], du: &[f64], cap: f64) -> f64 {
    // f(a) = (u0 + a d0)^2 - |u1 + a d1|^2 = c + 2 b a + qa a^2, f(0) = c > 0
    let c = soc_det(u);
    let b = u[0] * du[0] - dot(&u[1..], &du[1..]);
    let qa = du[0] * du[0] - dot(&du[1..], &du[1..]);
    let mut best = cap;
    let mut consider = |r: f64| {
        if r.is_finite() && r > 0.0 && r < best {
            best = r;
        }
    };
    if qa == 0.0 {
        if b < 0.0 {
            consider(-c / (2.0 * b));
        }
    } else {
        let disc = b * b - qa * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let t = -(b + b.signum() * sq);
            if t != 0.0 {
                consider(t / qa);
                consider(c / t);
            } else {
                consider((-b + sq) / qa);
                consider((-b - sq) / qa);
            }
        }
    }
    // the cone also requires u0 + a d0 >= 0
    if du[0] < 0.0 {
        consider(-u[0] / du[0]);
    }
    best
}

/// Block-diagonal NT scaling `W` with `W z = W⁻¹ s = lambda`.
#[derive(Clone, Debug)]
pub struct NtScaling {
    pub layout: ConeLayout,
    /// orthant diagonal `sqrt(s/z)`
    pub d: Vec<f64>,
    pub soc: Vec<(f64, Vec<f64>)>,
    pub lambda: Vec<f64>,
}

impl NtScaling {
    /// Identity scaling (used for the initial point).
    pub fn identity(layout: &ConeLayout) -> Self {
        let soc = layout
            .soc
            .iter()
            .map(|&q| {
                let mut w = vec![0.0; q];
                w[0] = 1.0;
                (1.0, w)
            })
            .collect();
        Self { layout: layout.clone(), d: vec![1.0; layout.nonneg], soc, lambda: layout.identity() }
    }

    pub fn compute(layout: &ConeLayout, s: &[f64], z: &[f64]) -> Self {
        let l = layout.nonneg;
        let d: Vec<f64> = (0..l).map(|i| (s[i] / z[i]).sqrt()).collect();
        let mut soc = Vec::with_capacity(layout.soc.len());
        for (st, q) in layout.soc_ranges() {
            let (sb, zb) = (&s[st..st + q], &z[st..st + q]);
            let sdet = soc_det(sb).max(f64::MIN_POSITIVE);
            let zdet = soc_det(zb).max(f64::MIN_POSITIVE);
            let (sn, zn) = (sdet.sqrt(), zdet.sqrt());
            let sbar: Vec<f64> = sb.iter().map(|v| v / sn).collect();
            let zbar: Vec<f64> = zb.iter().map(|v| v / zn).collect();
            let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
            let mut wbar = vec![0.0; q];
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            for i in 1..q {
                wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
            }
            // renormalise so that wbar stays on the hyperboloid w0^2 - |w1|^2 = 1
            let w1n = norm(&wbar[1..]);
            wbar[0] = (1.0 + w1n * w1n).sqrt();
            let eta = (sdet / zdet).powf(0.25);
            soc.push((eta, wbar));
        }
        let mut out = Self { layout: layout.clone(), d, soc, lambda: Vec::new() };
        out.lambda = out.apply_w(z);
        out
    }

    fn apply_block(wbar: &[f64], v: &[f64], out: &mut [f64], scale: f64, inverse: bool) {
        // W̄ v, or J W̄ J v for the inverse
        let q = v.len();
        let sgn = if inverse { -1.0 } else { 1.0 };
        let w1v1 = dot(&wbar[1..], &v[1..]);
        out[0] = scale * (wbar[0] * v[0] + sgn * w1v1);
        let coef = sgn * v[0] + w1v1 / (1.0 + wbar[0]);
        for i in 1..q {
            out[i] = scale * (v[i] + coef * wbar[i]);
        }
    }

    pub fn apply_w(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for i in 0..self.layout.nonneg {
            out[i] = self.d[i] * v[i];
        }
        for ((st, q), (eta, wbar)) in self.layout.soc_ranges().zip(&self.soc) {
            Self::apply_block(wbar, &v[st..st + q], &mut out[st..st + q], *eta, false);
        }
        out
    }

    pub fn apply_winv(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for i in 0..self.layout.nonneg {
            out[i] = v[i] / self.d[i];
        }
        for ((st, q), (eta, wbar)) in self.layout.soc_ranges().zip(&self.soc) {
            Self::apply_block(wbar, &v[st..st + q], &mut out[st..st + q], 1.0 / eta, true);
        }
        out
    }

    pub fn apply_w2(&self, v: &[f64]) -> Vec<f64> {
        self.apply_w(&self.apply_w(v))
    }

    pub fn apply_winv2(&self, v: &[f64]) -> Vec<f64> {
        self.apply_winv(&self.apply_winv(v))
    }
}
