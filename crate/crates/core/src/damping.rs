//! Damping coefficients `a(x)`: the rough indicator `a₀·1_ω` and the smooth
//! profile `a₀·g(x)⁴` built from a quintic smoothstep ramp, plus checks of the
//! structural bounds `|a'|⁴ ≤ M a³`, `|a''|² ≤ M a` and coercivity on ω.
//!
//! Profiles depend on the first coordinate only; on a rectangle the damped
//! region is the strip `ω × (0, 1)`.

use crate::error::{LabError, Result};
use crate::mesh::{DiscreteOperators, Grid};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > 1.0 || lo >= hi {
            return Err(LabError::InvalidSupport(format!(
                "({lo}, {hi}) is not a nonempty subinterval of (0, 1)"
            )));
        }
        Ok(Interval { lo, hi })
    }

    /// Open-interval membership with a small tolerance so that grid nodes
    /// lying on an endpoint are treated as outside.
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo + EDGE_TOL && x < self.hi - EDGE_TOL
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    fn inner_edges(&self) -> usize {
        usize::from(self.lo > 0.0) + usize::from(self.hi < 1.0)
    }
}

/// Quintic smoothstep `s(t) = 10t³ − 15t⁴ + 6t⁵` and its first two derivatives.
pub fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let t2 = t * t;
        (
            t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
            30.0 * t2 * (1.0 - t) * (1.0 - t),
            60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingKind {
    Zero,
    Indicator,
    Smooth,
}

impl FromStr for DampingKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "none" => Ok(DampingKind::Zero),
            "indicator" => Ok(DampingKind::Indicator),
            "smooth" => Ok(DampingKind::Smooth),
            other => Err(LabError::Config(format!("unknown damping kind `{other}`"))),
        }
    }
}

/// Closed-form description of `a`; evaluable anywhere in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingShape {
    pub kind: DampingKind,
    pub support: Vec<Interval>,
    pub a0: f64,
    pub tau: f64,
}

impl DampingShape {
    /// `(a, a', a'')` at `x`. Derivatives of the indicator are reported as zero
    /// away from the jumps.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self.kind {
            DampingKind::Zero => (0.0, 0.0, 0.0),
            DampingKind::Indicator => {
                if self.support.iter().any(|w| w.contains(x)) {
                    (self.a0, 0.0, 0.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            DampingKind::Smooth => {
                let Some(w) = self.support.iter().find(|w| x > w.lo && x < w.hi) else {
                    return (0.0, 0.0, 0.0);
                };
                let (mut g, mut g1, mut g2) = (1.0, 0.0, 0.0);
                if w.lo > 0.0 && x < w.lo + self.tau {
                    let (s, s1, s2) = smoothstep((x - w.lo) / self.tau);
                    (g, g1, g2) = (s, s1 / self.tau, s2 / (self.tau * self.tau));
                } else if w.hi < 1.0 && x > w.hi - self.tau {
                    let (s, s1, s2) = smoothstep((w.hi - x) / self.tau);
                    (g, g1, g2) = (s, -s1 / self.tau, s2 / (self.tau * self.tau));
                }
                let g3 = g * g * g;
                (
                    self.a0 * g3 * g,
                    4.0 * self.a0 * g3 * g1,
                    self.a0 * (12.0 * g * g * g1 * g1 + 4.0 * g3 * g2),
                )
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// The region where `a` is guaranteed `≥ a₀`: ω itself for the indicator,
    /// the plateau ω₁ (ω minus its ramps) for the smooth profile.
    pub fn plateau(&self) -> Vec<Interval> {
        match self.kind {
            DampingKind::Smooth => self
                .support
                .iter()
                .map(|w| Interval {
                    lo: if w.lo > 0.0 { w.lo + self.tau } else { w.lo },
                    hi: if w.hi < 1.0 { w.hi - self.tau } else { w.hi },
                })
                .collect(),
            _ => self.support.clone(),
        }
    }
}

/// A damping coefficient sampled on a grid.
#[derive(Debug, Clone)]
pub struct DampingProfile {
    pub shape: DampingShape,
    /// Values at interior nodes.
    pub nodal: Vec<f64>,
    /// Values at the midpoints where the gradient lives.
    pub mid: Vec<f64>,
    /// `(a', a'')` at interior nodes; smooth kind only.
    pub nodal_derivatives: Option<Vec<(f64, f64)>>,
}

impl DampingProfile {
    fn sample(shape: DampingShape, ops: &DiscreteOperators) -> Self {
        let points = ops.grid.points();
        let nodal = points.iter().map(|p| shape.value(p[0])).collect();
        let mid = ops.mid_points.iter().map(|p| shape.value(p[0])).collect();
        let nodal_derivatives = (shape.kind == DampingKind::Smooth).then(|| {
            points
                .iter()
                .map(|p| {
                    let (_, d1, d2) = shape.eval(p[0]);
                    (d1, d2)
                })
                .collect()
        });
        DampingProfile {
            shape,
            nodal,
            mid,
            nodal_derivatives,
        }
    }

    pub fn zero(ops: &DiscreteOperators) -> Self {
        Self::sample(
            DampingShape {
                kind: DampingKind::Zero,
                support: Vec::new(),
                a0: 0.0,
                tau: 0.0,
            },
            ops,
        )
    }

    pub fn kind(&self) -> DampingKind {
        self.shape.kind
    }

    pub fn is_zero(&self) -> bool {
        self.mid.iter().all(|&v| v == 0.0)
    }
}

fn check_support(omega: &[Interval]) -> Result<()> {
    if omega.is_empty() {
        return Err(LabError::InvalidSupport("empty damping region".into()));
    }
    for w in omega {
        Interval::new(w.lo, w.hi)?;
    }
    for (i, a) in omega.iter().enumerate() {
        for b in &omega[i + 1..] {
            if a.lo < b.hi && b.lo < a.hi {
                return Err(LabError::InvalidSupport(format!(
                    "overlapping intervals ({}, {}) and ({}, {})",
                    a.lo, a.hi, b.lo, b.hi
                )));
            }
        }
    }
    Ok(())
}

fn check_amplitude(a0: f64) -> Result<()> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(LabError::param("a0", format!("must be positive, got {a0}")));
    }
    Ok(())
}

/// `a = a₀·1_ω`; a midpoint (or node) gets `a₀` iff it lies inside ω.
pub fn indicator_profile(omega: &[Interval], a0: f64, ops: &DiscreteOperators) -> Result<DampingProfile> {
    check_support(omega)?;
    check_amplitude(a0)?;
    Ok(DampingProfile::sample(
        DampingShape {
            kind: DampingKind::Indicator,
            support: omega.to_vec(),
            a0,
            tau: 0.0,
        },
        ops,
    ))
}

/// `a = a₀·g⁴` with `g` ramping 0 → 1 over width `tau` at every edge of ω
/// that lies inside the domain.
pub fn smooth_bump_profile(
    omega: &[Interval],
    a0: f64,
    tau: f64,
    ops: &DiscreteOperators,
) -> Result<DampingProfile> {
    check_support(omega)?;
    check_amplitude(a0)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(LabError::param("tau", format!("must be positive, got {tau}")));
    }
    for w in omega {
        if w.inner_edges() as f64 * tau >= w.len() {
            return Err(LabError::InvalidSupport(format!(
                "transition width {tau} leaves no plateau in ({}, {})",
                w.lo, w.hi
            )));
        }
    }
    Ok(DampingProfile::sample(
        DampingShape {
            kind: DampingKind::Smooth,
            support: omega.to_vec(),
            a0,
            tau,
        },
        ops,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuralReport {
    /// `sup |a'|⁴ / a³` over `{a > floor}`.
    pub m1: f64,
    /// `sup |a''|² / a` over `{a > floor}`.
    pub m2: f64,
    pub floor: f64,
    pub cap: f64,
    pub samples: usize,
    /// `min a` over the plateau ω₁.
    pub coercivity: f64,
    pub pass: bool,
}

pub const DEFAULT_STRUCTURAL_CAP: f64 = 1e12;

/// Evaluates the structural suprema on a uniform sampling of `[0, 1]` with at
/// least `max(10⁴, 10·(n + 1))` points. `floor` defaults to `1e-12·a₀`.
pub fn validate_structural(
    profile: &DampingProfile,
    floor: Option<f64>,
    cap: f64,
    grid: &Grid,
) -> Result<StructuralReport> {
    let resolution = grid.axes()[0].n + 1;
    validate_structural_sampled(&profile.shape, floor, cap, (10 * resolution).max(10_000))
}

pub fn validate_structural_sampled(
    shape: &DampingShape,
    floor: Option<f64>,
    cap: f64,
    samples: usize,
) -> Result<StructuralReport> {
    if shape.kind != DampingKind::Smooth {
        return Err(LabError::NotApplicable(format!(
            "{:?} profile has no bounded derivatives",
            shape.kind
        )));
    }
    let floor = floor.unwrap_or(1e-12 * shape.a0);
    let (mut m1, mut m2) = (0.0f64, 0.0f64);
    for i in 0..=samples {
        let x = i as f64 / samples as f64;
        let (a, d1, d2) = shape.eval(x);
        if a > floor {
            m1 = m1.max(d1.powi(4) / a.powi(3));
            m2 = m2.max(d2 * d2 / a);
        }
    }
    let coercivity = shape
        .plateau()
        .iter()
        .flat_map(|w| {
            let lo = w.lo;
            let len = w.len();
            (0..=1000).map(move |k| lo + len * (k as f64 / 1000.0))
        })
        .filter(|&x| x > 0.0 && x < 1.0)
        .map(|x| shape.value(x))
        .fold(f64::INFINITY, f64::min);
    let pass = m1.is_finite() && m2.is_finite() && m1 <= cap && m2 <= cap && coercivity > 0.0;
    Ok(StructuralReport {
        m1,
        m2,
        floor,
        cap,
        samples: samples + 1,
        coercivity,
        pass,
    })
}

/// True iff `a ≥ a0_required` at every node of ω (of the plateau ω₁ for the
/// smooth profile). Regions without nodes fail.
pub fn validate_coercive(
    profile: &DampingProfile,
    omega: &[Interval],
    a0_required: f64,
    grid: &Grid,
) -> bool {
    let region: Vec<Interval> = match profile.kind() {
        DampingKind::Smooth => {
            let tau = profile.shape.tau;
            omega
                .iter()
                .map(|w| Interval {
                    lo: if w.lo > 0.0 { w.lo + tau } else { w.lo },
                    hi: if w.hi < 1.0 { w.hi - tau } else { w.hi },
                })
                .collect()
        }
        _ => omega.to_vec(),
    };
    let mut seen = false;
    for (p, a) in grid.points().iter().zip(&profile.nodal) {
        if region.iter().any(|w| w.contains(p[0])) {
            seen = true;
            if *a < a0_required {
                return false;
            }
        }
    }
    seen
}

/// Damping regions satisfying the geometric condition in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GcPreset {
    /// `(1 − ℓ, 1)`: with the multiplier point left of the interval only the
    /// right endpoint is illuminated.
    RightCollar,
    /// `(0, ℓ) ∪ (1 − ℓ, 1)`: a collar around the whole boundary.
    BothCollars,
    /// The whole interval.
    Full,
}

pub const DEFAULT_COLLAR: f64 = 0.3;

impl FromStr for GcPreset {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right-collar" => Ok(GcPreset::RightCollar),
            "both-collars" => Ok(GcPreset::BothCollars),
            "full" => Ok(GcPreset::Full),
            other => Err(LabError::UnknownPreset(other.to_string())),
        }
    }
}

impl GcPreset {
    pub fn support(self, collar: f64) -> Vec<Interval> {
        match self {
            GcPreset::RightCollar => vec![Interval { lo: 1.0 - collar, hi: 1.0 }],
            GcPreset::BothCollars => vec![
                Interval { lo: 0.0, hi: collar },
                Interval { lo: 1.0 - collar, hi: 1.0 },
            ],
            GcPreset::Full => vec![Interval { lo: 0.0, hi: 1.0 }],
        }
    }
}

pub fn gc_preset_1d(name: &str) -> Result<Vec<Interval>> {
    Ok(name.parse::<GcPreset>()?.support(DEFAULT_COLLAR))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops(n: usize) -> DiscreteOperators {
        DiscreteOperators::build(&Grid::line(n).unwrap())
    }

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn indicator_membership() {
        let full = indicator_profile(&[iv(0.0, 1.0)], 1.0, &ops(7)).unwrap();
        assert!(full.nodal.iter().chain(&full.mid).all(|&v| v == 1.0));

        let o = ops(9);
        let p = indicator_profile(&[iv(0.7, 1.0)], 2.0, &o).unwrap();
        let expect = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0];
        assert_eq!(p.nodal, expect);
        assert!(p.nodal.iter().chain(&p.mid).all(|&v| v == 0.0 || v == 2.0));
        // midpoint 0.75 is inside, 0.65 is not
        assert_eq!(p.mid[7], 2.0);
        assert_eq!(p.mid[6], 0.0);
        assert!(p.nodal_derivatives.is_none());

        assert!(matches!(
            indicator_profile(&[Interval { lo: 2.0, hi: 3.0 }], 1.0, &o),
            Err(LabError::InvalidSupport(_))
        ));
        assert!(matches!(indicator_profile(&[], 1.0, &o), Err(LabError::InvalidSupport(_))));
        assert!(indicator_profile(&[iv(0.7, 1.0)], 0.0, &o).is_err());
    }

    #[test]
    fn smooth_bump_closed_form_values() {
        let o = ops(19);
        let p = smooth_bump_profile(&[iv(0.6, 1.0)], 1.0, 0.2, &o).unwrap();
        let s = &p.shape;
        assert_eq!(s.eval(0.9), (1.0, 0.0, 0.0));
        assert_eq!(s.eval(0.3), (0.0, 0.0, 0.0));
        assert!((s.value(0.7) - 0.0625).abs() < 1e-15);
        assert!(p.nodal_derivatives.is_some());
        // vanishes outside ω
        for (pt, v) in o.grid.points().iter().zip(&p.nodal) {
            if pt[0] <= 0.6 {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(matches!(
            smooth_bump_profile(&[iv(0.6, 1.0)], 1.0, 0.5, &o),
            Err(LabError::InvalidSupport(_))
        ));
        assert!(smooth_bump_profile(&[iv(0.6, 1.0)], 1.0, 0.0, &o).is_err());
    }

    #[test]
    fn smooth_derivatives_agree_with_finite_differences() {
        let s = DampingShape {
            kind: DampingKind::Smooth,
            support: vec![iv(0.2, 0.9)],
            a0: 1.5,
            tau: 0.15,
        };
        let err = |h: f64| {
            let mut e1 = 0.0f64;
            let mut e2 = 0.0f64;
            for &x in &[0.23, 0.27, 0.31, 0.8, 0.84, 0.88] {
                let (a, d1, d2) = s.eval(x);
                let (ap, am) = (s.value(x + h), s.value(x - h));
                e1 = e1.max(((ap - am) / (2.0 * h) - d1).abs());
                e2 = e2.max(((ap - 2.0 * a + am) / (h * h) - d2).abs());
            }
            (e1, e2)
        };
        let (a1, a2) = err(1e-3);
        let (b1, b2) = err(5e-4);
        assert!((a1 / b1 - 4.0).abs() < 0.1, "first derivative ratio {}", a1 / b1);
        assert!((a2 / b2 - 4.0).abs() < 0.1, "second derivative ratio {}", a2 / b2);
    }

    #[test]
    fn structural_check() {
        let o = ops(50);
        let flat = smooth_bump_profile(&[iv(0.0, 1.0)], 2.0, 0.1, &o).unwrap();
        let r = validate_structural(&flat, None, DEFAULT_STRUCTURAL_CAP, &o.grid).unwrap();
        assert_eq!((r.m1, r.m2), (0.0, 0.0));
        assert!(r.pass);
        assert_eq!(r.coercivity, 2.0);

        let rough = indicator_profile(&[iv(0.7, 1.0)], 1.0, &o).unwrap();
        assert!(matches!(
            validate_structural(&rough, None, DEFAULT_STRUCTURAL_CAP, &o.grid),
            Err(LabError::NotApplicable(_))
        ));

        let bump = smooth_bump_profile(&[iv(0.6, 1.0)], 1.0, 0.15, &o).unwrap();
        let r1 = validate_structural_sampled(&bump.shape, None, DEFAULT_STRUCTURAL_CAP, 10_000).unwrap();
        let r2 = validate_structural_sampled(&bump.shape, None, DEFAULT_STRUCTURAL_CAP, 20_000).unwrap();
        assert!(r1.pass && r2.pass);
        assert!(r1.m1 > 0.0 && r1.m2 > 0.0);
        assert!((r1.m1 / r2.m1 - 1.0).abs() < 0.05);
        assert!((r1.m2 / r2.m2 - 1.0).abs() < 0.05);
        // |a'|⁴/a³ = 256 g'⁴ ≤ 256 (15 / (8τ))⁴
        assert!(r2.m1 <= 256.0 * (15.0 / (8.0 * 0.15f64)).powi(4) * (1.0 + 1e-12));
    }

    #[test]
    fn coercivity() {
        let o = ops(99);
        let w = [iv(0.7, 1.0)];
        let p = indicator_profile(&w, 1.0, &o).unwrap();
        assert!(validate_coercive(&p, &w, 1.0, &o.grid));
        assert!(!validate_coercive(&p, &w, 1.1, &o.grid));
        assert!(!validate_coercive(&DampingProfile::zero(&o), &w, 1.0, &o.grid));
        let s = smooth_bump_profile(&w, 1.0, 0.1, &o).unwrap();
        assert!(validate_coercive(&s, &w, 1.0, &o.grid));
    }

    #[test]
    fn presets() {
        assert_eq!(gc_preset_1d("right-collar").unwrap(), vec![iv(0.7, 1.0)]);
        assert_eq!(gc_preset_1d("full").unwrap(), vec![iv(0.0, 1.0)]);
        assert_eq!(gc_preset_1d("both-collars").unwrap().len(), 2);
        assert!(matches!(gc_preset_1d("left"), Err(LabError::UnknownPreset(_))));
    }

    #[test]
    fn profiles_are_nonnegative_on_fine_samples() {
        let o = ops(30);
        let shapes = [
            indicator_profile(&gc_preset_1d("both-collars").unwrap(), 1.0, &o).unwrap().shape,
            smooth_bump_profile(&gc_preset_1d("both-collars").unwrap(), 3.0, 0.1, &o).unwrap().shape,
            smooth_bump_profile(&[iv(0.25, 0.75)], 1.0, 0.2, &o).unwrap().shape,
        ];
        for s in &shapes {
            for i in 0..=10_000 {
                assert!(s.value(i as f64 / 10_000.0) >= 0.0);
            }
        }
    }
}
