//! Ordinary least-squares line fits used for power-law and exponential rates.

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub rms: f64,
    pub samples: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64], min_samples: usize) -> Result<LineFit> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < min_samples.max(2) {
        return Err(LabError::TooFewSamples {
            needed: min_samples.max(2),
            have: n,
        });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(LabError::param("samples", "abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok(LineFit {
        slope,
        intercept,
        rms,
        samples: n,
    })
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if n == 1 {
                lo
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..10).map(|k| k as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let f = fit_line(&xs, &ys, 6).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-13);
        assert!(f.rms < 1e-14);
        assert!(matches!(fit_line(&xs[..3], &ys[..3], 6), Err(LabError::TooFewSamples { .. })));
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(10.0, 1e5, 5);
        assert!((v[0] - 10.0).abs() < 1e-12 && (v[4] - 1e5).abs() < 1e-7);
        assert!((v[1] - 100.0).abs() < 1e-10);
    }
}
