//! Convex inner approximations used by the subproblems. Each surrogate is
//! exact at its expansion point and lies on the feasible side everywhere else
//! on its stated domain.

use crate::error::{Error, Result};
use crate::model::{self, ChannelSet, SystemParams};

/// `ln(1 + 1/ψ) / τ`
pub fn rate_fn(psi: f64, tau: f64) -> f64 {
    (1.0 / psi).ln_1p() / tau
}

/// Affine minorant `A + Bψ + Cτ` of [`rate_fn`] (convex on ψ > 0, τ > 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateSurrogate {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl RateSurrogate {
    pub fn at(psi: f64, tau: f64) -> Result<Self> {
        if !(psi > 0.0 && psi.is_finite() && tau >= 1.0 && tau.is_finite()) {
            return Err(Error::InvalidInput(format!("rate surrogate needs ψ > 0 and τ ≥ 1, got ψ={psi}, τ={tau}")));
        }
        let l = (1.0 / psi).ln_1p();
        Ok(Self {
            a: 2.0 * l / tau + 1.0 / ((psi + 1.0) * tau),
            b: -1.0 / (psi * (psi + 1.0) * tau),
            c: -l / (tau * tau),
        })
    }

    pub fn eval(&self, psi: f64, tau: f64) -> f64 {
        self.a + self.b * psi + self.c * tau
    }
}

/// Concave minorant of `p_k² hᴴ Φ̄⁻¹ h` around `(p^κ, α₁^κ)`, where
/// `Φ̄ = Σ_ℓ p_ℓ² h_ℓ h_ℓᴴ + (σ_ant² + α₁σ_R²) I`:
///
/// `lin·p_k − Σ_ℓ quad_ℓ·p_ℓ² − noise·(σ_ant² + α₁σ_R²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UplinkSurrogate {
    pub k: usize,
    pub lin: f64,
    pub quad: Vec<(usize, f64)>,
    pub noise: f64,
}

impl UplinkSurrogate {
    pub fn at(chan: &ChannelSet, params: &SystemParams, p: &[f64], alpha1: f64, k: usize, sic: bool) -> Result<Self> {
        let noise_level = params.sigma_ant2 + alpha1 * params.sigma_r2;
        let phi = model::interference_covariance(chan, p, k, noise_level, sic);
        let chol = phi
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("uplink covariance of pair {k} is not positive definite")))?;
        let v = chol.solve(&chan.h[k]);
        let c = chan.h[k].dotc(&v).re;
        let pk = p[k];
        let interferers: Vec<usize> =
            if sic { (0..k).collect() } else { (0..chan.k()).filter(|&l| l != k).collect() };
        let quad = interferers
            .into_iter()
            .map(|l| (l, pk * pk * chan.h[l].dotc(&v).norm_sqr()))
            .collect();
        Ok(Self { k, lin: 2.0 * pk * c, quad, noise: pk * pk * v.norm_squared() })
    }

    pub fn eval(&self, params: &SystemParams, p: &[f64], alpha1: f64) -> f64 {
        let interference: f64 = self.quad.iter().map(|&(l, q)| q * p[l] * p[l]).sum();
        self.lin * p[self.k] - interference - self.noise * (params.sigma_ant2 + alpha1 * params.sigma_r2)
    }
}

/// Exact `p_k² hᴴ Φ̄⁻¹ h` with the α₁-parametrised noise floor.
pub fn uplink_exact(chan: &ChannelSet, params: &SystemParams, p: &[f64], alpha1: f64, k: usize, sic: bool) -> Result<f64> {
    let noise = params.sigma_ant2 + alpha1 * params.sigma_r2;
    Ok(p[k] * p[k] * model::whitened_gain(chan, p, k, noise, sic)?)
}

/// Tangent minorant `2x₀x − x₀²` of `x²`, applied to `x = Re{g_k w_k}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DownlinkSurrogate {
    pub re0: f64,
}

impl DownlinkSurrogate {
    pub fn eval(&self, re: f64) -> f64 {
        2.0 * self.re0 * re - self.re0 * self.re0
    }
}

/// Minorant of `Σ p_k² ‖h_k‖² / α₂` (jointly convex for p ≥ 0, α₂ > 0):
/// `Σ lin_k p_k − alpha·α₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarvestSurrogate {
    pub lin: Vec<f64>,
    pub alpha: f64,
}

impl HarvestSurrogate {
    pub fn at(gain: &[f64], p: &[f64], alpha2: f64) -> Self {
        Self {
            lin: p.iter().zip(gain).map(|(pk, g)| 2.0 * pk * g / alpha2).collect(),
            alpha: p.iter().zip(gain).map(|(pk, g)| pk * pk * g).sum::<f64>() / (alpha2 * alpha2),
        }
    }

    pub fn eval(&self, p: &[f64]) -> impl Fn(f64) -> f64 + '_ {
        let s: f64 = self.lin.iter().zip(p).map(|(l, pk)| l * pk).sum();
        move |alpha2| s - self.alpha * alpha2
    }
}

pub fn harvest_exact(gain: &[f64], p: &[f64], alpha2: f64) -> f64 {
    p.iter().zip(gain).map(|(pk, g)| pk * pk * g).sum::<f64>() / alpha2
}

/// `0.5·(x₀/y₀·y² + y₀/x₀·x²)`, an upper bound of `x·y` that is tight along `y/x = y₀/x₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilinearBound {
    pub x0: f64,
    pub y0: f64,
}

impl BilinearBound {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        0.5 * (self.x0 / self.y0 * y * y + self.y0 / self.x0 * x * x)
    }

    /// Weights `(√(x₀/2y₀), √(y₀/2x₀))` so that the bound equals `(w_y·y)² + (w_x·x)²`.
    pub fn weights(&self) -> (f64, f64) {
        ((0.5 * self.x0 / self.y0).sqrt(), (0.5 * self.y0 / self.x0).sqrt())
    }
}

/// Largest ϑ for which `−ln ϑ / (1 − β)` is jointly convex in (ϑ, β).
pub fn log_ratio_convex_limit() -> f64 {
    (-0.5f64).exp()
}

/// `−ln ϑ / (1 − β)`
pub fn log_ratio(vartheta: f64, beta: f64) -> f64 {
    -vartheta.ln() / (1.0 - beta)
}

/// Tangent plane of [`log_ratio`] at `(ϑ₀, β₀)`; a global minorant on
/// `0 < ϑ ≤ e^{−1/2}`, `β < 1`, where the function is convex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRatioTangent {
    pub vartheta0: f64,
    pub beta0: f64,
}

impl LogRatioTangent {
    /// `(constant, coefficient of ϑ, coefficient of β)`
    pub fn coeffs(&self) -> (f64, f64, f64) {
        let l = -self.vartheta0.ln();
        let y0 = 1.0 - self.beta0;
        // 2L/y₀ − ϑ/(ϑ₀y₀) + 1/y₀ − L(1−β)/y₀²
        (2.0 * l / y0 + 1.0 / y0 - l / (y0 * y0), -1.0 / (self.vartheta0 * y0), l / (y0 * y0))
    }

    pub fn eval(&self, vartheta: f64, beta: f64) -> f64 {
        let (c0, cv, cb) = self.coeffs();
        c0 + cv * vartheta + cb * beta
    }
}

/// Convex majorant of `(ln ϑ + ab)·ỹ` for ϑ > 0, ỹ ≥ 0, valid on the whole domain.
///
/// `ln ϑ` is replaced by its tangent `m(ϑ) = ln ϑ₀ + ϑ/ϑ₀ − 1 + ab`, and the
/// product `m·ỹ = ¼(m+ỹ)² − ¼(m−ỹ)²` is bounded by linearising the concave
/// second square at `d₀ = m₀ − ỹ₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogProductBound {
    pub vartheta0: f64,
    pub ytilde0: f64,
    pub ab: f64,
}

impl LogProductBound {
    /// `(constant, coefficient of ϑ)` of the tangent `m(ϑ)`.
    pub fn tangent(&self) -> (f64, f64) {
        (self.vartheta0.ln() - 1.0 + self.ab, 1.0 / self.vartheta0)
    }

    pub fn d0(&self) -> f64 {
        self.vartheta0.ln() + self.ab - self.ytilde0
    }

    pub fn eval(&self, vartheta: f64, ytilde: f64) -> f64 {
        let (m0, mv) = self.tangent();
        let m = m0 + mv * vartheta;
        let d0 = self.d0();
        0.25 * (m + ytilde).powi(2) - 0.25 * d0 * d0 - 0.5 * d0 * ((m - ytilde) - d0)
    }
}

pub fn log_product(vartheta: f64, ytilde: f64, ab: f64) -> f64 {
    (vartheta.ln() + ab) * ytilde
}
