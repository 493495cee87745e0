//! The abstract simultaneously damped pair
//!
//! ```text
//! y'' + a A y + γ A^θ (y' + z') = 0
//! z'' + b A z + γ A^θ (y' + z') = 0
//! ```
//!
//! with `A` diagonal, eigenvalues `μ_k = (kπ)⁴`. The generator decouples into
//! 4×4 blocks on `(y, z, y', z')`, so resolvent norms are exact suprema of
//! per-mode 4×4 singular value problems.

use crate::error::{LabError, Result};
use crate::fit::log_space;
use crate::resolvent::{exponent_from_logs, ExponentFit};
use nalgebra::{Complex, Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative change below which doubling the mode count is considered converged.
pub const TRUNCATION_TOL: f64 = 1e-3;
const MIN_MODES: usize = 16;
const MAX_MODES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstractConfig {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl Default for AbstractConfig {
    fn default() -> Self {
        AbstractConfig {
            a: 1.0,
            b: 2.0,
            gamma: 1.0,
            theta: 0.5,
        }
    }
}

impl AbstractConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(LabError::param("gamma", format!("must be nonnegative, got {}", self.gamma)));
        }
        if !(-1.0..=1.0).contains(&self.theta) {
            return Err(LabError::param("theta", format!("must lie in [-1, 1], got {}", self.theta)));
        }
        Ok(())
    }

    /// Equal speeds leave the `y − z` component undamped.
    pub fn equal_speeds(&self) -> bool {
        self.a == self.b
    }

    pub fn with_theta(self, theta: f64) -> Self {
        AbstractConfig { theta, ..self }
    }
}

/// `μ_k = (kπ)⁴`, `k ≥ 1`.
pub fn mode_eigenvalue(k: usize) -> f64 {
    (k as f64 * PI).powi(4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeBlock {
    pub mu: f64,
    pub matrix: Matrix4<f64>,
    /// Energy weights `(aμ, bμ, 1, 1)`.
    pub weights: Vector4<f64>,
}

pub fn mode_generator(mu: f64, cfg: &AbstractConfig) -> Result<ModeBlock> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(LabError::param("mu", format!("must be positive, got {mu}")));
    }
    let g = cfg.gamma * mu.powf(cfg.theta);
    #[rustfmt::skip]
    let matrix = Matrix4::new(
        0.0,          0.0,          1.0, 0.0,
        0.0,          0.0,          0.0, 1.0,
        -cfg.a * mu,  0.0,          -g,  -g,
        0.0,          -cfg.b * mu,  -g,  -g,
    );
    Ok(ModeBlock {
        mu,
        matrix,
        weights: Vector4::new(cfg.a * mu, cfg.b * mu, 1.0, 1.0),
    })
}

impl ModeBlock {
    /// `S A S⁻¹` with `S = diag(√weights)`.
    pub fn balanced(&self) -> Matrix4<f64> {
        let s = self.weights.map(f64::sqrt);
        Matrix4::from_fn(|i, j| s[i] * self.matrix[(i, j)] / s[j])
    }

    pub fn energy_inner(&self, x: &Vector4<Complex64>, y: &Vector4<Complex64>) -> Complex64 {
        (0..4).map(|i| x[i].conj() * y[i] * self.weights[i]).sum()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.balanced().complex_eigenvalues().iter().copied().collect()
    }

    /// Energy-norm of `(iλ − A)⁻¹`; errors when `iλ` is an eigenvalue.
    pub fn resolvent_norm(&self, lambda: f64) -> Result<f64> {
        let bal = self.balanced();
        let shifted: Matrix4<Complex<f64>> = Matrix4::from_fn(|i, j| {
            let d = if i == j { Complex64::new(0.0, lambda) } else { Complex64::new(0.0, 0.0) };
            d - Complex64::new(bal[(i, j)], 0.0)
        });
        let sv = shifted.singular_values();
        let smin = sv.min();
        if smin <= 64.0 * f64::EPSILON * sv.max() {
            return Err(LabError::AxisEigenvalue { lambda });
        }
        Ok(1.0 / smin)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AbstractNorm {
    pub norm: f64,
    /// Mode index attaining the supremum.
    pub argmax: usize,
    pub modes: usize,
}

fn initial_modes(cfg: &AbstractConfig, lambda: f64) -> usize {
    // modes with min(a, b) μ ≥ (10λ)² sit far above the shift
    let k = ((10.0 * lambda.abs()).sqrt() / cfg.a.min(cfg.b).powf(0.25) / PI).ceil() as usize;
    k.max(MIN_MODES)
}

/// `sup_k ‖(iλ − A_k)⁻¹‖`, doubling the truncation until the supremum moves by
/// less than 0.1 %.
pub fn abstract_resolvent_norm(cfg: &AbstractConfig, lambda: f64) -> Result<AbstractNorm> {
    cfg.validate()?;
    let mut best = (0.0f64, 0usize);
    let mut scanned = 0usize;
    let mut target = initial_modes(cfg, lambda);
    loop {
        let before = best.0;
        for k in scanned + 1..=target {
            let r = mode_generator(mode_eigenvalue(k), cfg)?.resolvent_norm(lambda)?;
            if r > best.0 {
                best = (r, k);
            }
        }
        scanned = target;
        if scanned > initial_modes(cfg, lambda) && (best.0 - before) <= TRUNCATION_TOL * best.0 {
            break;
        }
        if scanned >= MAX_MODES {
            break;
        }
        target *= 2;
    }
    Ok(AbstractNorm {
        norm: best.0,
        argmax: best.1,
        modes: scanned,
    })
}

/// Sorted positive imaginary parts of all block eigenvalues for the modes
/// that can resonate below `upto`, plus the first mode frequency above it.
pub fn modal_frequencies(cfg: &AbstractConfig, upto: f64) -> Result<Vec<f64>> {
    cfg.validate()?;
    let kmax = initial_modes(cfg, upto);
    let mut freqs = Vec::new();
    for k in 1..=kmax {
        let block = mode_generator(mode_eigenvalue(k), cfg)?;
        freqs.extend(block.eigenvalues().iter().filter(|z| z.im > 0.0).map(|z| z.im));
    }
    freqs.sort_by(f64::total_cmp);
    Ok(freqs)
}

/// Peak envelope of the resolvent norm on `[lo, hi)`: the largest value at the
/// window centre, at every modal frequency inside the window and at the nearest
/// modal frequency on either side. Resonance peaks are far narrower than the
/// sampling spacing, so pointwise samples alone miss them.
pub fn abstract_resolvent_envelope(cfg: &AbstractConfig, freqs: &[f64], lo: f64, hi: f64) -> Result<f64> {
    let first = freqs.partition_point(|&f| f < lo);
    let last = freqs.partition_point(|&f| f < hi);
    let from = first.saturating_sub(1);
    let to = (last + 1).min(freqs.len());
    let mut best = abstract_resolvent_norm(cfg, (lo * hi).sqrt())?.norm;
    for &f in &freqs[from..to] {
        best = best.max(abstract_resolvent_norm(cfg, f)?.norm);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThetaRow {
    pub theta: f64,
    pub fit: ExponentFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaSample {
    pub theta: f64,
    pub lambda: f64,
    pub norm: f64,
}

/// For each θ, evaluates the windowed supremum on `points` log-spaced windows
/// covering `band` and fits the log-log decay exponent (negative = growth).
pub fn theta_exponent_sweep(
    base: &AbstractConfig,
    thetas: &[f64],
    band: (f64, f64),
    points: usize,
) -> Result<(Vec<ThetaRow>, Vec<ThetaSample>)> {
    base.validate()?;
    if base.equal_speeds() {
        return Err(LabError::param("b", "abstract sweeps need a != b (equal speeds are unstable)"));
    }
    for &t in thetas {
        base.with_theta(t).validate()?;
    }
    if !(band.0 > 0.0 && band.0 < band.1) {
        return Err(LabError::param("band", format!("need 0 < lo < hi, got {band:?}")));
    }
    let edges = log_space(band.0, band.1, points + 1);
    let jobs: Vec<(f64, usize)> = thetas
        .iter()
        .flat_map(|&t| (0..points).map(move |j| (t, j)))
        .collect();
    let freqs = thetas
        .par_iter()
        .map(|&t| modal_frequencies(&base.with_theta(t), band.1))
        .collect::<Result<Vec<_>>>()?;
    let samples = jobs
        .par_iter()
        .map(|&(theta, j)| {
            let cfg = base.with_theta(theta);
            let idx = thetas.iter().position(|&t| t == theta).unwrap_or(0);
            let norm = abstract_resolvent_envelope(&cfg, &freqs[idx], edges[j], edges[j + 1])?;
            Ok(ThetaSample {
                theta,
                lambda: (edges[j] * edges[j + 1]).sqrt(),
                norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = thetas
        .iter()
        .map(|&theta| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = samples
                .iter()
                .filter(|s| s.theta == theta)
                .map(|s| (s.lambda.ln(), s.norm.ln()))
                .unzip();
            Ok(ThetaRow {
                theta,
                fit: exponent_from_logs(&xs, &ys)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, samples))
}
