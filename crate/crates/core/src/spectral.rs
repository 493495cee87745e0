//! Dense spectra of the generator, spectral abscissa and clearance from the
//! imaginary axis.
//!
//! The eigensolve runs on `S 𝒜 S⁻¹`, which is similar to `𝒜` and, for
//! `a ≡ 0`, exactly skew-symmetric. This keeps the undamped spectrum on the
//! imaginary axis to round-off instead of inheriting the `h⁻⁴` imbalance
//! between the displacement and velocity blocks.

use crate::error::{LabError, Result};
use crate::generator::{CoupledGenerator, EnergyForm};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

pub const DEFAULT_DENSE_CAP: usize = 4000;
/// Relative zero tolerance, scaled by `‖S𝒜S⁻¹‖₁`.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Sorted by imaginary part, then real part.
    pub eigenvalues: Vec<Complex64>,
    pub abscissa: f64,
    pub clearance: f64,
    /// Absolute tolerance used to call an eigenvalue "on the axis".
    pub zero_tol: f64,
    pub axis_count: usize,
    pub all_negative: bool,
    pub operator_norm: f64,
}

/// `S 𝒜 S⁻¹` as a dense matrix.
pub fn balanced_dense(generator: &CoupledGenerator, form: &EnergyForm) -> DMatrix<f64> {
    let n = generator.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = form.apply_s(&generator.apply(&form.solve_s(&e)));
        e[j] = 0.0;
        for (i, v) in col.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    m
}

pub fn eigenvalues(
    generator: &CoupledGenerator,
    form: &EnergyForm,
    dense_cap: usize,
    rel_zero_tol: f64,
) -> Result<SpectrumReport> {
    let dim = generator.dim();
    if dim > dense_cap {
        return Err(LabError::DenseCapExceeded { dim, cap: dense_cap });
    }
    let m = balanced_dense(generator, form);
    let norm1 = (0..dim)
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let eig = m.complex_eigenvalues();
    SpectrumReport::from_eigenvalues(eig.iter().copied().collect(), rel_zero_tol * norm1, norm1)
}

impl SpectrumReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<Complex64>, zero_tol: f64, operator_norm: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(LabError::EmptySpectrum);
        }
        eigenvalues.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        let abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let (clearance, axis_count) = clearance_and_count(&eigenvalues, zero_tol);
        Ok(SpectrumReport {
            all_negative: eigenvalues.iter().all(|z| z.re < 0.0),
            eigenvalues,
            abscissa,
            clearance,
            zero_tol,
            axis_count,
            operator_norm,
        })
    }

    /// Largest distance from an eigenvalue to the nearest conjugate of
    /// another listed eigenvalue.
    pub fn conjugate_pairing_error(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| {
                self.eigenvalues
                    .iter()
                    .map(|w| (z.conj() - w).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

fn clearance_and_count(eigenvalues: &[Complex64], tol: f64) -> (f64, usize) {
    let count = eigenvalues.iter().filter(|z| z.re.abs() < tol).count();
    let kappa = if count > 0 {
        0.0
    } else {
        eigenvalues.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min)
    };
    (kappa, count)
}

pub fn spectral_abscissa(report: &SpectrumReport) -> Result<f64> {
    if report.eigenvalues.is_empty() {
        return Err(LabError::EmptySpectrum);
    }
    Ok(report.abscissa)
}

/// Largest real part among eigenvalues with `|Im| ≤ max_frequency`. Grid-scale
/// modes near the top of the discrete band travel with vanishing group
/// velocity and can sit far closer to the axis than anything the continuum
/// model produces; restricting to the resolved band excludes them.
pub fn band_abscissa(report: &SpectrumReport, max_frequency: f64) -> Result<f64> {
    report
        .eigenvalues
        .iter()
        .filter(|z| z.im.abs() <= max_frequency)
        .map(|z| z.re)
        .reduce(f64::max)
        .ok_or(LabError::EmptySpectrum)
}

/// `(κ, count)`: the distance of the spectrum from the imaginary axis (zero
/// when any eigenvalue is within `tol` of it) and the number of such
/// eigenvalues.
pub fn axis_clearance(report: &SpectrumReport, tol: f64) -> Result<(f64, usize)> {
    if report.eigenvalues.is_empty() {
        return Err(LabError::EmptySpectrum);
    }
    Ok(clearance_and_count(&report.eigenvalues, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::{indicator_profile, DampingProfile, Interval};
    use crate::generator::assemble_generator;
    use crate::mesh::{DiscreteOperators, Grid};
    use nalgebra::SymmetricEigen;
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

    #[test]
    fn synthetic_report() {
        let eig = vec![
            Complex64::new(-1.0, 2.0),
            Complex64::new(-1.0, -2.0),
            Complex64::new(-3.0, 0.0),
        ];
        let r = SpectrumReport::from_eigenvalues(eig, 1e-10, 1.0).unwrap();
        assert_eq!(spectral_abscissa(&r).unwrap(), -1.0);
        assert_eq!(axis_clearance(&r, 1e-10).unwrap(), (1.0, 0));
        assert!(r.all_negative);
        assert_eq!(r.conjugate_pairing_error(), 0.0);
        assert!(matches!(
            SpectrumReport::from_eigenvalues(vec![], 1.0, 1.0),
            Err(LabError::EmptySpectrum)
        ));
    }

    #[test]
    fn undamped_dispersion_matches_biharmonic_spectrum() {
        let (g, f) = setup(24, 1.0, 2.0, false);
        let r = eigenvalues(&g, &f, DEFAULT_DENSE_CAP, DEFAULT_ZERO_TOL).unwrap();
        assert!(r.abscissa.abs() <= 1e-10 * r.operator_norm);
        assert_eq!(axis_clearance(&r, r.zero_tol).unwrap().0, 0.0);
        let nu = SymmetricEigen::new(g.ops.b.to_dense()).eigenvalues;
        let mut expected: Vec<f64> = nu
            .iter()
            .flat_map(|&v| [(1.0 * v).sqrt(), (2.0 * v).sqrt(), (1.0 * v).sqrt(), (2.0 * v).sqrt()])
            .collect();
        expected.sort_by(f64::total_cmp);
        let mut moduli: Vec<f64> = r.eigenvalues.iter().map(|z| z.norm()).collect();
        moduli.sort_by(f64::total_cmp);
        for (a, b) in moduli.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
        }
        assert!(r.conjugate_pairing_error() <= 1e-9 * r.operator_norm);
    }

    #[test]
    fn damped_unequal_speeds_are_stable() {
        let (g, f) = setup(30, 1.0, 2.0, true);
        let r = eigenvalues(&g, &f, DEFAULT_DENSE_CAP, DEFAULT_ZERO_TOL).unwrap();
        assert!(r.abscissa < 0.0);
        assert!(r.clearance > 0.0);
        assert!(r.eigenvalues.iter().all(|z| z.re <= 1e-9));
        assert!(r.conjugate_pairing_error() <= 1e-9 * r.operator_norm);
        let low = band_abscissa(&r, 100.0).unwrap();
        assert!(low < 0.0 && low <= r.abscissa);
        assert!(band_abscissa(&r, -1.0).is_err());
    }

    #[test]
    fn equal_speeds_keep_undamped_modes() {
        let (g, f) = setup(30, 1.0, 1.0, true);
        let r = eigenvalues(&g, &f, DEFAULT_DENSE_CAP, DEFAULT_ZERO_TOL).unwrap();
        let (kappa, count) = axis_clearance(&r, r.zero_tol).unwrap();
        assert_eq!(kappa, 0.0);
        assert!(count >= 2 * g.dofs(), "count {count}");
    }

    #[test]
    fn dense_cap_is_enforced() {
        let (g, f) = setup(30, 1.0, 2.0, true);
        assert!(matches!(
            eigenvalues(&g, &f, 100, DEFAULT_ZERO_TOL),
            Err(LabError::DenseCapExceeded { dim: 120, cap: 100 })
        ));
    }
}
