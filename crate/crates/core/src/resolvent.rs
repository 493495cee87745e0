//! Resolvent norms `‖(iλ − 𝒜)⁻¹‖_ℋ` along the imaginary axis.
//!
//! With `M = SᵀS` the energy Gram form, the ℋ-operator norm of the resolvent
//! `R` is the spectral norm of `X = S R S⁻¹`. Each evaluation factors
//! `iλ − 𝒜` once (complex banded LU, node-interleaved ordering) and runs a
//! Lanczos iteration on the Hermitian operator `X Xᴴ`, which applies one
//! solve with `iλ − 𝒜` and one with its adjoint per step. The largest Ritz
//! value is `‖R‖²` (equivalently `1/σ_min(S(iλ − 𝒜)S⁻¹)²`).

use crate::banded::BandedLu;
use crate::error::{LabError, Result};
use crate::fit::{fit_line, log_space, LineFit};
use crate::generator::{from_interleaved, to_interleaved, CoupledGenerator, EnergyForm};
use crate::spectral::balanced_dense;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Relative Ritz residual at which the Lanczos iteration stops.
pub const LANCZOS_TOL: f64 = 1e-10;
const LANCZOS_MAX_BASIS: usize = 120;
const LANCZOS_MAX_RESTARTS: usize = 50;
const LANCZOS_SEED: u64 = 0x5eed_1a2c;

/// Minimum number of samples inside a fitting band.
pub const MIN_FIT_SAMPLES: usize = 6;
/// Fits with a larger RMS residual (in log space) are reported but not trusted.
pub const TRUSTED_FIT_RMS: f64 = 0.1;
/// The scaling exponent of the Gevrey-type resolvent bound.
pub const GEVREY_SCALING: f64 = 0.4;
/// Upper/lower half-band ratio of the scaled bound accepted as "bounded".
pub const GEVREY_RATIO_LIMIT: f64 = 2.0;
/// Largest log-log slope of the upper band accepted as "non-increasing".
pub const UPPER_TREND_SLOPE_LIMIT: f64 = 0.05;

/// Factors `iλ − 𝒜` in the interleaved ordering.
pub fn factor_shifted(generator: &CoupledGenerator, lambda: f64) -> Result<BandedLu<Complex64>> {
    let dim = generator.dim();
    let mut entries: Vec<(usize, usize, Complex64)> = generator
        .interleaved_entries()
        .into_iter()
        .map(|(r, c, v)| (r, c, Complex64::new(-v, 0.0)))
        .collect();
    entries.extend((0..dim).map(|i| (i, i, Complex64::new(0.0, lambda))));
    BandedLu::factor(dim, entries).map_err(|e| match e {
        LabError::Singular { .. } => LabError::AxisEigenvalue { lambda },
        other => other,
    })
}

/// `R = (iλ − 𝒜)⁻¹` together with the energy-frame similarity.
pub struct ResolventOperator<'a> {
    form: &'a EnergyForm,
    lu: BandedLu<Complex64>,
}

impl<'a> ResolventOperator<'a> {
    pub fn new(generator: &CoupledGenerator, form: &'a EnergyForm, lambda: f64) -> Result<Self> {
        Ok(ResolventOperator {
            form,
            lu: factor_shifted(generator, lambda)?,
        })
    }

    /// `R x` in block ordering.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = to_interleaved(x);
        self.lu.solve_in_place(&mut y);
        from_interleaved(&y)
    }

    /// `Rᴴ x` in block ordering.
    pub fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = to_interleaved(x);
        self.lu.solve_adjoint_in_place(&mut y);
        from_interleaved(&y)
    }

    /// `X Xᴴ x` with `X = S R S⁻¹`.
    fn gram(&self, x: &[Complex64]) -> Vec<Complex64> {
        let f = self.form;
        let a = self.apply_adjoint(&f.apply_st(x));
        let b = f.solve_s(&f.solve_st(&a));
        f.apply_s(&self.apply(&b))
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOutcome {
    /// Largest eigenvalue of the Hermitian operator.
    pub value: f64,
    pub matvecs: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator by
/// restarted Lanczos with full reorthogonalization.
pub fn lanczos_largest(
    dim: usize,
    op: impl Fn(&[Complex64]) -> Vec<Complex64>,
    tol: f64,
) -> LanczosOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);
    let mut start: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut matvecs = 0;
    let mut best = 0.0f64;
    for _ in 0..LANCZOS_MAX_RESTARTS {
        let s = norm(&start);
        start.iter_mut().for_each(|x| *x /= s);
        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let max_basis = LANCZOS_MAX_BASIS.min(dim);
        loop {
            let j = basis.len() - 1;
            let mut w = op(&basis[j]);
            matvecs += 1;
            let alpha = dot(&basis[j], &w).re;
            for _ in 0..2 {
                for q in &basis {
                    let p = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= p * qi);
                }
            }
            let beta = norm(&w);
            alphas.push(alpha);
            let k = alphas.len();
            let mut t = DMatrix::<f64>::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alphas[i];
                if i + 1 < k {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (imax, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            best = best.max(theta);
            let residual = beta * eig.eigenvectors[(k - 1, imax)].abs();
            let exhausted = beta <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) || k == dim;
            if residual <= tol * theta || exhausted {
                return LanczosOutcome {
                    value: theta,
                    matvecs,
                    converged: true,
                };
            }
            if k == max_basis {
                // restart from the current Ritz vector
                let y = eig.eigenvectors.column(imax);
                let mut v = vec![Complex64::new(0.0, 0.0); dim];
                for (q, &c) in basis.iter().zip(y.iter()) {
                    v.iter_mut().zip(q).for_each(|(vi, qi)| *vi += qi * c);
                }
                start = v;
                break;
            }
            betas.push(beta);
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        }
    }
    LanczosOutcome {
        value: best,
        matvecs,
        converged: false,
    }
}

/// `‖(iλ − 𝒜)⁻¹‖_ℋ`.
pub fn resolvent_norm(generator: &CoupledGenerator, form: &EnergyForm, lambda: f64) -> Result<f64> {
    let op = ResolventOperator::new(generator, form, lambda)?;
    let out = lanczos_largest(generator.dim(), |x| op.gram(x), LANCZOS_TOL);
    let value = out.value.sqrt();
    if !value.is_finite() {
        return Err(LabError::AxisEigenvalue { lambda });
    }
    Ok(value)
}

/// Dense oracle: `1 / σ_min(iλ − S𝒜S⁻¹)` from a full complex SVD.
pub fn dense_resolvent_norm(generator: &CoupledGenerator, form: &EnergyForm, lambda: f64) -> f64 {
    let a = balanced_dense(generator, form);
    let dim = a.nrows();
    let shifted = DMatrix::<Complex64>::from_fn(dim, dim, |i, j| {
        let diag = if i == j { Complex64::new(0.0, lambda) } else { Complex64::new(0.0, 0.0) };
        diag - Complex64::new(a[(i, j)], 0.0)
    });
    let sv = shifted.singular_values();
    1.0 / sv.min()
}

/// A local maximum of the sampled curve, refined by golden-section search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Peak {
    pub lambda: f64,
    pub norm: f64,
    /// False when the maximum kept growing as the bracket shrank (a pole on
    /// the axis) or the shifted operator became singular.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExponentFit {
    /// Decay exponent: `‖R(iλ)‖ ≈ prefactor · λ^(−gamma)`.
    pub gamma: f64,
    pub prefactor: f64,
    pub residual: f64,
    pub samples: usize,
    pub trusted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    pub peaks: Vec<Peak>,
    /// Fitting band `(λ_lo, λ_hi)`.
    pub band: (f64, f64),
    pub fit: Option<ExponentFit>,
    /// `‖𝒜⁻¹‖_ℋ`, the λ = 0 value.
    pub static_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOptions {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    /// Explicit fitting band; the default is derived from the grid.
    pub band: Option<(f64, f64)>,
    pub refine_peaks: bool,
}

impl SweepOptions {
    pub fn new(lambda_min: f64, lambda_max: f64, points: usize) -> Self {
        SweepOptions {
            lambda_min,
            lambda_max,
            points,
            band: None,
            refine_peaks: true,
        }
    }
}

/// Largest undamped frequency the grid can represent, `√(max(c, d) ‖B‖∞)`.
pub fn resolved_frequency_limit(generator: &CoupledGenerator) -> f64 {
    (generator.c.max(generator.d) * generator.ops.b.norm_inf()).sqrt()
}

/// Upper two decades of the sweep range, capped at a tenth of the largest
/// resolved frequency.
pub fn default_band(generator: &CoupledGenerator, lambda_min: f64, lambda_max: f64) -> (f64, f64) {
    let hi = lambda_max.min(0.1 * resolved_frequency_limit(generator));
    let lo = (hi / 100.0).max(lambda_min);
    (lo, hi)
}

pub fn sweep(generator: &CoupledGenerator, form: &EnergyForm, opts: &SweepOptions) -> Result<SweepResult> {
    if !(opts.lambda_min > 0.0 && opts.lambda_min < opts.lambda_max) {
        return Err(LabError::param(
            "lambda_min",
            format!("need 0 < lambda_min < lambda_max, got [{}, {}]", opts.lambda_min, opts.lambda_max),
        ));
    }
    if opts.points < 8 {
        return Err(LabError::param("points", format!("need at least 8 samples, got {}", opts.points)));
    }
    let lambdas = log_space(opts.lambda_min, opts.lambda_max, opts.points);
    let norms = lambdas
        .par_iter()
        .map(|&l| resolvent_norm(generator, form, l))
        .collect::<Result<Vec<f64>>>()?;
    let static_norm = resolvent_norm(generator, form, 0.0)?;
    let peaks = if opts.refine_peaks {
        let candidates: Vec<usize> = (1..lambdas.len() - 1)
            .filter(|&k| norms[k] >= norms[k - 1] && norms[k] >= norms[k + 1])
            .collect();
        candidates
            .par_iter()
            .map(|&k| refine_peak(generator, form, lambdas[k - 1], lambdas[k], lambdas[k + 1], norms[k]))
            .collect()
    } else {
        Vec::new()
    };
    let band = opts
        .band
        .unwrap_or_else(|| default_band(generator, opts.lambda_min, opts.lambda_max));
    let mut result = SweepResult {
        lambdas,
        norms,
        peaks,
        band,
        fit: None,
        static_norm,
    };
    result.fit = fit_exponent(&result, band).ok();
    Ok(result)
}

fn refine_peak(generator: &CoupledGenerator, form: &EnergyForm, lo: f64, mid: f64, hi: f64, at_mid: f64) -> Peak {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    const MAX_ITERS: usize = 60;
    const REL_WIDTH: f64 = 1e-8;
    let eval = |l: f64| resolvent_norm(generator, form, l).unwrap_or(f64::INFINITY);
    let (mut a, mut b) = (lo, hi);
    let mut best = (mid, at_mid);
    let mut history = Vec::with_capacity(MAX_ITERS);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    for _ in 0..MAX_ITERS {
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f > best.1 {
                best = (x, f);
            }
        }
        history.push(best.1);
        if !best.1.is_finite() || (b - a) <= REL_WIDTH * best.0 {
            break;
        }
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2);
        }
    }
    let converged = best.1.is_finite()
        && history.len() > 8
        && history[history.len() - 6] >= best.1 * (1.0 - 1e-4);
    Peak {
        lambda: best.0,
        norm: best.1,
        converged,
    }
}

/// Least-squares fit of `log ‖R‖ = log C − γ log λ` over the band.
pub fn fit_exponent(sweep: &SweepResult, band: (f64, f64)) -> Result<ExponentFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = sweep
        .lambdas
        .iter()
        .zip(&sweep.norms)
        .filter(|(l, _)| **l >= band.0 * (1.0 - 1e-12) && **l <= band.1 * (1.0 + 1e-12))
        .map(|(l, r)| (l.ln(), r.ln()))
        .unzip();
    exponent_from_logs(&xs, &ys)
}

pub(crate) fn exponent_from_logs(log_lambda: &[f64], log_norm: &[f64]) -> Result<ExponentFit> {
    let LineFit {
        slope,
        intercept,
        rms,
        samples,
    } = fit_line(log_lambda, log_norm, MIN_FIT_SAMPLES)?;
    Ok(ExponentFit {
        gamma: -slope,
        prefactor: intercept.exp(),
        residual: rms,
        samples,
        trusted: rms <= TRUSTED_FIT_RMS,
    })
}

fn in_band(l: f64, band: (f64, f64)) -> bool {
    l >= band.0 * (1.0 - 1e-12) && l <= band.1 * (1.0 + 1e-12)
}

/// Samples and refined peaks inside the band.
fn band_values(sweep: &SweepResult) -> Vec<(f64, f64, bool)> {
    let mut v: Vec<(f64, f64, bool)> = sweep
        .lambdas
        .iter()
        .zip(&sweep.norms)
        .map(|(&l, &r)| (l, r, true))
        .chain(sweep.peaks.iter().map(|p| (p.lambda, p.norm, p.converged)))
        .filter(|(l, _, _)| in_band(*l, sweep.band))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GevreyCheck {
    /// `max λ^(2/5) ‖R(iλ)‖` over the band.
    pub sigma_star: f64,
    pub lower_half: f64,
    pub upper_half: f64,
    pub ratio: f64,
    pub bounded: bool,
}

/// Compares the scaled bound `λ^(2/5)‖R‖` on the upper and lower halves (in
/// log λ) of the band; bounded when the upper maximum exceeds the lower by at
/// most a factor 2 and no peak in the band diverged.
pub fn gevrey_bound_check(sweep: &SweepResult) -> GevreyCheck {
    let vals = band_values(sweep);
    let split = (sweep.band.0.ln() + sweep.band.1.ln()) / 2.0;
    let (mut lower, mut upper) = (0.0f64, 0.0f64);
    let mut all_converged = true;
    for &(l, r, conv) in &vals {
        all_converged &= conv;
        let s = l.powf(GEVREY_SCALING) * r;
        if l.ln() < split {
            lower = lower.max(s);
        } else {
            upper = upper.max(s);
        }
    }
    let sigma_star = lower.max(upper);
    let ratio = upper / lower;
    GevreyCheck {
        sigma_star,
        lower_half: lower,
        upper_half: upper,
        ratio,
        bounded: all_converged && sigma_star.is_finite() && lower > 0.0 && ratio <= GEVREY_RATIO_LIMIT,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct UniformCheck {
    /// Supremum over samples, refined peaks and λ = 0.
    pub sup_norm: f64,
    /// Log-log slope of the norms over the upper half of the sweep.
    pub upper_trend: f64,
    pub bounded: bool,
}

pub fn uniform_bound_check(sweep: &SweepResult) -> UniformCheck {
    let mut sup = sweep.static_norm;
    let mut all_converged = true;
    for &r in &sweep.norms {
        sup = sup.max(r);
    }
    for p in &sweep.peaks {
        sup = sup.max(p.norm);
        all_converged &= p.converged;
    }
    let half = sweep.lambdas.len() / 2;
    let xs: Vec<f64> = sweep.lambdas[half..].iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = sweep.norms[half..].iter().map(|r| r.ln()).collect();
    let upper_trend = fit_line(&xs, &ys, 2).map(|f| f.slope).unwrap_or(f64::NAN);
    UniformCheck {
        sup_norm: sup,
        upper_trend,
        bounded: all_converged && sup.is_finite() && upper_trend <= UPPER_TREND_SLOPE_LIMIT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::{indicator_profile, DampingProfile, Interval};
    use crate::generator::assemble_generator;
    use crate::mesh::{DiscreteOperators, Grid};
    use crate::spectral::{eigenvalues, DEFAULT_DENSE_CAP, DEFAULT_ZERO_TOL};
    use std::sync::Arc;

    fn setup(n: usize, d: f64, c: f64, damped: bool) -> (CoupledGenerator, EnergyForm) {
        let ops = Arc::new(DiscreteOperators::build(&Grid::line(n).unwrap()));
        let profile = if damped {
            indicator_profile(&[Interval::new(0.7, 1.0).unwrap()], 1.0, &ops).unwrap()
        } else {
            DampingProfile::zero(&ops)
        };
        assemble_generator(ops, d, c, profile).unwrap()
    }

    fn synthetic(lambdas: Vec<f64>, norms: Vec<f64>, band: (f64, f64)) -> SweepResult {
        SweepResult {
            lambdas,
            norms,
            peaks: vec![],
            band,
            fit: None,
            static_norm: 1.0,
        }
    }

    #[test]
    fn exact_power_law_fit() {
        let l = log_space(10.0, 1e4, 20);
        let r: Vec<f64> = l.iter().map(|x| 3.0 * x.powf(-0.4)).collect();
        let s = synthetic(l, r, (10.0, 1e4));
        let f = fit_exponent(&s, s.band).unwrap();
        assert!((f.gamma - 0.4).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-10);
        assert!(f.residual < 1e-12 && f.trusted);
        assert!(matches!(fit_exponent(&s, (10.0, 20.0)), Err(LabError::TooFewSamples { .. })));
    }

    #[test]
    fn normal_case_matches_distance_to_spectrum() {
        let (g, f) = setup(12, 1.0, 2.0, false);
        let spec = eigenvalues(&g, &f, DEFAULT_DENSE_CAP, DEFAULT_ZERO_TOL).unwrap();
        let mut freqs: Vec<f64> = spec.eigenvalues.iter().map(|z| z.im).filter(|&w| w > 0.0).collect();
        freqs.sort_by(f64::total_cmp);
        let dist = |l: f64| {
            spec.eigenvalues
                .iter()
                .map(|z| (Complex64::new(0.0, l) - z).norm())
                .fold(f64::INFINITY, f64::min)
        };
        let mid = 0.5 * (freqs[0] + freqs[1]);
        let r = resolvent_norm(&g, &f, mid).unwrap();
        assert!((r * dist(mid) - 1.0).abs() < 1e-6);
        for &l in &log_space(10.0, 100.0, 8) {
            let r = resolvent_norm(&g, &f, l).unwrap();
            assert!((r * dist(l) - 1.0).abs() < 1e-6, "λ = {l}");
        }
    }

    #[test]
    fn lanczos_matches_dense_svd() {
        for (n, c, lambda) in [(8, 2.0, 3.0), (15, 3.0, 40.0), (20, 2.0, 250.0)] {
            let (g, f) = setup(n, 1.0, c, true);
            let fast = resolvent_norm(&g, &f, lambda).unwrap();
            let dense = dense_resolvent_norm(&g, &f, lambda);
            assert!((fast / dense - 1.0).abs() < 1e-6, "n={n}: {fast} vs {dense}");
        }
    }

    #[test]
    fn zero_shift_is_inverse_generator_norm() {
        let (g, f) = setup(10, 1.0, 2.0, true);
        let r0 = resolvent_norm(&g, &f, 0.0).unwrap();
        let dim = g.dim();
        let mut x = DMatrix::<f64>::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            let col = f.apply_s(&g.solve_static(&f.solve_s(&e)).unwrap());
            e[j] = 0.0;
            for i in 0..dim {
                x[(i, j)] = col[i];
            }
        }
        let inv_norm = x.singular_values().max();
        assert!((r0 / inv_norm - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sweep_validation_and_damped_finiteness() {
        let (g, f) = setup(16, 1.0, 2.0, true);
        assert!(sweep(&g, &f, &SweepOptions::new(10.0, 100.0, 4)).is_err());
        assert!(sweep(&g, &f, &SweepOptions::new(100.0, 10.0, 10)).is_err());
        let s = sweep(&g, &f, &SweepOptions::new(0.1, 1e3, 16)).unwrap();
        assert!(s.norms.iter().all(|r| r.is_finite() && *r > 0.0));
        assert!(s.peaks.iter().all(|p| p.converged && p.norm.is_finite()));
        assert!(uniform_bound_check(&s).bounded);
    }

    #[test]
    fn undamped_and_equal_speed_sweeps_are_unbounded() {
        for (c, damped) in [(2.0, false), (1.0, true)] {
            let (g, f) = setup(16, 1.0, c, damped);
            let mut opts = SweepOptions::new(10.0, 2e3, 24);
            opts.band = Some((10.0, 2e3));
            let s = sweep(&g, &f, &opts).unwrap();
            assert!(!s.peaks.is_empty());
            assert!(s.peaks.iter().any(|p| !p.converged), "c = {c}");
            assert!(!uniform_bound_check(&s).bounded);
            assert!(!gevrey_bound_check(&s).bounded);
        }
    }

    #[test]
    fn gevrey_check_on_synthetic_curves() {
        let l = log_space(100.0, 1e5, 30);
        let decaying: Vec<f64> = l.iter().map(|x| 1.0 / x).collect();
        let s = synthetic(l.clone(), decaying, (100.0, 1e5));
        let g = gevrey_bound_check(&s);
        assert!(g.bounded && g.ratio < 1.0);
        let slow: Vec<f64> = l.iter().map(|x| x.powf(-0.2)).collect();
        let s = synthetic(l, slow, (100.0, 1e5));
        assert!(!gevrey_bound_check(&s).bounded);
    }
}
