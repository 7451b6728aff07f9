//! Truncated cylindrical Wiener process and the noise coefficient map.
//!
//! The infinite sum over a Hilbert basis is cut at K modes; mode k carries a
//! fixed positive weight `a_k` (default `1/k`).  The coefficient map sends a
//! velocity field `u` to K divergence-free member fields
//! `a_k * P(rho_eps * Phi(u))`, with `Phi` either the identity or the
//! three-halves nonlinearity `u |u|^{1/2}`.

use crate::error::{Result, SnseError};
use crate::field::{
    gradient_fd, hs_lp_norm, lp_norm, lp_norm_scalar, LtwoSequenceField, RealVectorField,
};
use crate::operators::{leray_project, mollify};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `Phi(u) = u`; exact second moments, used for isometry and coupling tests.
    LinearMollified,
    /// `Phi(u) = u |u|^{1/2}`; realizes the superlinear growth class.
    ThreeHalvesMollified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    weights: Vec<f64>,
    eps: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, weights: Vec<f64>, eps: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(SnseError::InvalidParameter { name: "K", reason: "need K >= 1".into() });
        }
        if weights.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(SnseError::InvalidParameter {
                name: "weights",
                reason: "all mode weights must be positive".into(),
            });
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(SnseError::InvalidParameter {
                name: "weights",
                reason: "mode weights must be non-increasing".into(),
            });
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SnseError::InvalidParameter {
                name: "eps",
                reason: format!("need eps > 0, got {eps}"),
            });
        }
        Ok(Self { kind, weights, eps })
    }

    /// Default weight schedule `a_k = 1/k`, k = 1..=K.
    pub fn inverse_k(kind: NoiseKind, k: usize, eps: f64) -> Result<Self> {
        Self::new(kind, (1..=k).map(|i| 1.0 / i as f64).collect(), eps)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn modes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

/// K independent Gaussian increments, each with variance dt.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    dw: Vec<f64>,
}

impl WienerIncrement {
    pub fn values(&self) -> &[f64] {
        &self.dw
    }

    pub fn len(&self) -> usize {
        self.dw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dw.is_empty()
    }

    pub fn zeros(k: usize) -> Self {
        Self { dw: vec![0.0; k] }
    }
}

/// RNG for one trajectory: master seed plus a disjoint ChaCha stream per
/// ensemble member.
pub fn trajectory_rng(master_seed: u64, trajectory: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(trajectory);
    rng
}

/// Draw K independent N(0, dt) increments from the trajectory RNG.
pub fn wiener_increment(rng: &mut ChaCha20Rng, dt: f64, k: usize) -> Result<WienerIncrement> {
    if !(dt > 0.0) {
        return Err(SnseError::InvalidParameter { name: "dt", reason: format!("need dt > 0, got {dt}") });
    }
    let s = dt.sqrt();
    let dw = (0..k).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(WienerIncrement { dw })
}

/// Coefficient map sigma(u): K weighted copies of the mollified, Leray-projected
/// nonlinearity of u.
pub fn sigma_apply(model: &NoiseModel, u: &RealVectorField) -> Result<LtwoSequenceField> {
    let base = sigma_base(model, u)?;
    let modes = model
        .weights
        .iter()
        .map(|&a| {
            let mut m = base.clone();
            m.scale(a);
            m
        })
        .collect();
    LtwoSequenceField::new(modes)
}

/// The common (unweighted) member field of sigma(u).
pub fn sigma_base(model: &NoiseModel, u: &RealVectorField) -> Result<RealVectorField> {
    let phi_u = match model.kind {
        NoiseKind::LinearMollified => u.clone(),
        NoiseKind::ThreeHalvesMollified => {
            let mut out = u.clone();
            let pts = u.grid().points();
            for i in 0..pts {
                let s = u.magnitude_at(i).sqrt();
                for j in 0..u.grid().dim() {
                    out.component_mut(j)[i] = u.component(j)[i] * s;
                }
            }
            out
        }
    };
    leray_project(&mollify(&phi_u, model.eps)?)
}

/// Empirical constants for the growth, Lipschitz, gradient, and L^2 bounds on
/// sigma, measured as maximal LHS/RHS ratios over a sample set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseAudit {
    pub p: f64,
    pub samples: usize,
    /// max |sigma(u)|_{L^p-mixed} / (|u|_{3p/2}^2 + 1)
    pub growth_ratio: f64,
    /// max |sigma(u1)-sigma(u2)| / |(|u1|+|u2|)^{1/2} |u1-u2||_p over pairs
    pub lipschitz_ratio: f64,
    /// max |grad sigma(u)| / (|u|_{3p/2}^2 + 1)
    pub gradient_ratio: f64,
    /// max |sigma(u)|_{L^2-mixed} / (|u|_2 + 1)
    pub l2_ratio: f64,
    pub all_finite: bool,
}

pub fn noise_audit(model: &NoiseModel, samples: &[RealVectorField], p: f64) -> Result<NoiseAudit> {
    if samples.len() < 2 {
        return Err(SnseError::InvalidParameter {
            name: "samples",
            reason: "audit needs at least 2 samples".into(),
        });
    }
    let weight_l2: f64 = model.weights.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut growth: f64 = 0.0;
    let mut gradient: f64 = 0.0;
    let mut l2: f64 = 0.0;
    let bases: Vec<RealVectorField> =
        samples.iter().map(|u| sigma_base(model, u)).collect::<Result<Vec<_>>>()?;
    for (u, base) in samples.iter().zip(&bases) {
        let grid = u.grid();
        let sig = sigma_apply(model, u)?;
        let rhs_p = lp_norm(u, 1.5 * p)?.powi(2) + 1.0;
        growth = growth.max(hs_lp_norm(&sig, p)? / rhs_p);
        l2 = l2.max(hs_lp_norm(&sig, 2.0)? / (lp_norm(u, 2.0)? + 1.0));
        // grad sigma: modes differ only by scalar weights, so the mixed norm
        // factors through the Frobenius gradient of the base field
        let mut frob = vec![0.0; grid.points()];
        for j in 0..grid.dim() {
            for axis in 0..grid.dim() {
                let g = gradient_fd(grid, base.component(j), axis);
                for (f, v) in frob.iter_mut().zip(&g) {
                    *f += v * v;
                }
            }
        }
        let frob: Vec<f64> = frob.iter().map(|v| v.sqrt()).collect();
        gradient = gradient.max(weight_l2 * lp_norm_scalar(grid, &frob, p)? / rhs_p);
    }
    let mut lipschitz: f64 = 0.0;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let (u1, u2) = (&samples[i], &samples[j]);
            let grid = u1.grid();
            let diff_base = bases[i].sub(&bases[j]);
            let lhs = weight_l2 * lp_norm(&diff_base, p)?;
            let w: Vec<f64> = (0..grid.points())
                .map(|x| {
                    (u1.magnitude_at(x) + u2.magnitude_at(x)).sqrt()
                        * u1.sub(u2).magnitude_at(x)
                })
                .collect();
            let rhs = lp_norm_scalar(grid, &w, p)?;
            if rhs == 0.0 && lhs == 0.0 {
                continue;
            }
            lipschitz = lipschitz.max(lhs / rhs);
        }
    }
    let all_finite =
        [growth, lipschitz, gradient, l2].iter().all(|v| v.is_finite());
    Ok(NoiseAudit {
        p,
        samples: samples.len(),
        growth_ratio: growth,
        lipschitz_ratio: lipschitz,
        gradient_ratio: gradient,
        l2_ratio: l2,
        all_finite,
    })
}
