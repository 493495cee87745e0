//! The block generator on the state `(u, w, v, z)`:
//!
//! ```text
//! u' = v
//! w' = z
//! v' = -d B u + L_a (v + z)
//! z' = -c B w + L_a (v + z)
//! ```
//!
//! and the energy form `M = W·diag(d B, c B, I, I)` realizing the inner
//! product of the energy space. Every module uses the block ordering above;
//! factorizations permute internally to a node-interleaved ordering to keep
//! the bandwidth small.

use crate::banded::BandedCholesky;
use crate::damping::DampingProfile;
use crate::error::{LabError, Result};
use crate::mesh::DiscreteOperators;
use crate::sparse::Csr;
use nalgebra::ComplexField;
use rand::Rng;
use std::ops::{AddAssign, Mul};
use std::sync::Arc;

/// Splits a state into its four blocks.
pub fn blocks<T>(z: &[T]) -> (&[T], &[T], &[T], &[T]) {
    let n = z.len() / 4;
    (&z[..n], &z[n..2 * n], &z[2 * n..3 * n], &z[3 * n..])
}

pub fn concat<T: Copy>(parts: [&[T]; 4]) -> Vec<T> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Position of block entry `(block, node)` in the interleaved ordering.
#[inline]
pub fn interleaved_index(block: usize, node: usize) -> usize {
    4 * node + block
}

pub fn to_interleaved<T: Copy>(z: &[T]) -> Vec<T> {
    let n = z.len() / 4;
    (0..4 * n).map(|k| z[(k % 4) * n + k / 4]).collect()
}

pub fn from_interleaved<T: Copy>(x: &[T]) -> Vec<T> {
    let n = x.len() / 4;
    (0..4 * n).map(|k| x[interleaved_index(k / n, k % n)]).collect()
}

#[derive(Debug, Clone)]
pub struct CoupledGenerator {
    pub ops: Arc<DiscreteOperators>,
    pub d: f64,
    pub c: f64,
    pub profile: DampingProfile,
    /// `L_a`, the discrete `div(a ∇ ·)`.
    pub lap: Csr,
    b_chol: Arc<BandedCholesky>,
}

/// Gram form of the energy space together with its square factor
/// `S = diag(√(Wd) R, √(Wc) R, √W I, √W I)`, where `B = Rᵀ R`.
#[derive(Debug, Clone)]
pub struct EnergyForm {
    pub ops: Arc<DiscreteOperators>,
    pub d: f64,
    pub c: f64,
    b_chol: Arc<BandedCholesky>,
}

pub fn assemble_generator(
    ops: Arc<DiscreteOperators>,
    d: f64,
    c: f64,
    profile: DampingProfile,
) -> Result<(CoupledGenerator, EnergyForm)> {
    for (name, v) in [("d", d), ("c", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(LabError::param(name, format!("must be positive, got {v}")));
        }
    }
    let lap = ops.weighted_laplacian(&profile.mid)?;
    let b_chol = Arc::new(BandedCholesky::factor(&ops.b)?);
    let form = EnergyForm {
        ops: ops.clone(),
        d,
        c,
        b_chol: b_chol.clone(),
    };
    Ok((
        CoupledGenerator {
            ops,
            d,
            c,
            profile,
            lap,
            b_chol,
        },
        form,
    ))
}

impl CoupledGenerator {
    /// Interior degrees of freedom per field.
    pub fn dofs(&self) -> usize {
        self.ops.dofs()
    }

    pub fn dim(&self) -> usize {
        4 * self.dofs()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(LabError::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn apply<T>(&self, z: &[T]) -> Vec<T>
    where
        T: Copy + Default + AddAssign + Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        assert_eq!(z.len(), self.dim());
        let (u, w, v, zz) = blocks(z);
        let s: Vec<T> = v.iter().zip(zz).map(|(&a, &b)| a + b).collect();
        let ls = self.lap.mul_vec(&s);
        let bu = self.ops.b.mul_vec(u);
        let bw = self.ops.b.mul_vec(w);
        let mut out = Vec::with_capacity(z.len());
        out.extend_from_slice(v);
        out.extend_from_slice(zz);
        out.extend(bu.iter().zip(&ls).map(|(&b, &l)| b * (-self.d) + l));
        out.extend(bw.iter().zip(&ls).map(|(&b, &l)| b * (-self.c) + l));
        out
    }

    /// The generator as one sparse matrix in block ordering.
    pub fn to_csr(&self) -> Csr {
        let n = self.dofs();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, 2 * n + i, 1.0));
            t.push((n + i, 3 * n + i, 1.0));
        }
        for (r, c, v) in self.ops.b.triplets() {
            t.push((2 * n + r, c, -self.d * v));
            t.push((3 * n + r, n + c, -self.c * v));
        }
        for (r, c, v) in self.lap.triplets() {
            for (br, bc) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
                t.push((br * n + r, bc * n + c, v));
            }
        }
        Csr::from_triplets(4 * n, 4 * n, &t)
    }

    /// Entries of the generator in the interleaved ordering.
    pub fn interleaved_entries(&self) -> Vec<(usize, usize, f64)> {
        let n = self.dofs();
        self.to_csr()
            .triplets()
            .map(|(r, c, v)| {
                (
                    interleaved_index(r / n, r % n),
                    interleaved_index(c / n, c % n),
                    v,
                )
            })
            .collect()
    }

    /// `D(Z) = Σ_mid a·|G(v + z)|²·|cell|`.
    pub fn dissipation(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z.len())?;
        let (_, _, v, zz) = blocks(z);
        let s: Vec<f64> = v.iter().zip(zz).map(|(a, b)| a + b).collect();
        let gs = self.ops.g.mul_vec(&s);
        Ok(gs
            .iter()
            .zip(&self.profile.mid)
            .zip(&self.ops.mid_weights)
            .map(|((g, a), w)| a * w * g * g)
            .sum())
    }

    /// Solves `𝒜 Z = U`: the first two rows give the velocities directly,
    /// the last two are biharmonic solves.
    pub fn solve_static(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(rhs.len())?;
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(LabError::param("U", "right-hand side must be finite"));
        }
        let (f1, f2, f3, f4) = blocks(rhs);
        let s: Vec<f64> = f1.iter().zip(f2).map(|(a, b)| a + b).collect();
        let ls = self.lap.mul_vec(&s);
        let ru: Vec<f64> = ls.iter().zip(f3).map(|(l, f)| (l - f) / self.d).collect();
        let rw: Vec<f64> = ls.iter().zip(f4).map(|(l, f)| (l - f) / self.c).collect();
        let u = self.b_chol.solve(&ru);
        let w = self.b_chol.solve(&rw);
        Ok(concat([&u, &w, f1, f2]))
    }
}

impl EnergyForm {
    pub fn dofs(&self) -> usize {
        self.ops.dofs()
    }

    pub fn dim(&self) -> usize {
        4 * self.dofs()
    }

    fn scales(&self) -> [f64; 4] {
        let w = self.ops.grid.weight();
        [(w * self.d).sqrt(), (w * self.c).sqrt(), w.sqrt(), w.sqrt()]
    }

    /// `M Z`.
    pub fn apply_m(&self, z: &[f64]) -> Vec<f64> {
        let w = self.ops.grid.weight();
        let (u, ww, v, zz) = blocks(z);
        let bu = self.ops.b.mul_vec(u);
        let bw = self.ops.b.mul_vec(ww);
        let mut out = Vec::with_capacity(z.len());
        out.extend(bu.iter().map(|x| w * self.d * x));
        out.extend(bw.iter().map(|x| w * self.c * x));
        out.extend(v.iter().map(|x| w * x));
        out.extend(zz.iter().map(|x| w * x));
        out
    }

    /// `⟨X, Y⟩ = Xᵀ M Y` for real states.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.apply_m(y)).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self, z: &[f64]) -> f64 {
        self.inner(z, z)
    }

    /// `M` as a sparse matrix.
    pub fn to_csr(&self) -> Csr {
        let n = self.dofs();
        let w = self.ops.grid.weight();
        let mut t = Vec::new();
        for (r, c, v) in self.ops.b.triplets() {
            t.push((r, c, w * self.d * v));
            t.push((n + r, n + c, w * self.c * v));
        }
        for i in 0..n {
            t.push((2 * n + i, 2 * n + i, w));
            t.push((3 * n + i, 3 * n + i, w));
        }
        Csr::from_triplets(4 * n, 4 * n, &t)
    }

    /// `S x`, so that `‖Z‖²_ℋ = |S Z|²`.
    pub fn apply_s<T: ComplexField<RealField = f64> + Copy>(&self, x: &[T]) -> Vec<T> {
        let sc = self.scales();
        let (u, w, v, z) = blocks(x);
        let ru = self.b_chol.mul_r(u);
        let rw = self.b_chol.mul_r(w);
        let mut out = Vec::with_capacity(x.len());
        out.extend(ru.iter().map(|a| a.scale(sc[0])));
        out.extend(rw.iter().map(|a| a.scale(sc[1])));
        out.extend(v.iter().map(|a| a.scale(sc[2])));
        out.extend(z.iter().map(|a| a.scale(sc[3])));
        out
    }

    /// `Sᵀ x`.
    pub fn apply_st<T: ComplexField<RealField = f64> + Copy>(&self, x: &[T]) -> Vec<T> {
        let sc = self.scales();
        let (u, w, v, z) = blocks(x);
        let ru = self.b_chol.mul_rt(u);
        let rw = self.b_chol.mul_rt(w);
        let mut out = Vec::with_capacity(x.len());
        out.extend(ru.iter().map(|a| a.scale(sc[0])));
        out.extend(rw.iter().map(|a| a.scale(sc[1])));
        out.extend(v.iter().map(|a| a.scale(sc[2])));
        out.extend(z.iter().map(|a| a.scale(sc[3])));
        out
    }

    /// `S⁻¹ x`.
    pub fn solve_s<T: ComplexField<RealField = f64> + Copy>(&self, x: &[T]) -> Vec<T> {
        let n = self.dofs();
        let sc = self.scales();
        let mut out = x.to_vec();
        self.b_chol.solve_r(&mut out[..n]);
        self.b_chol.solve_r(&mut out[n..2 * n]);
        for (k, chunk) in out.chunks_mut(n).enumerate() {
            chunk.iter_mut().for_each(|a| *a = a.unscale(sc[k]));
        }
        out
    }

    /// `S⁻ᵀ x`.
    pub fn solve_st<T: ComplexField<RealField = f64> + Copy>(&self, x: &[T]) -> Vec<T> {
        let n = self.dofs();
        let sc = self.scales();
        let mut out = x.to_vec();
        self.b_chol.solve_rt(&mut out[..n]);
        self.b_chol.solve_rt(&mut out[n..2 * n]);
        for (k, chunk) in out.chunks_mut(n).enumerate() {
            chunk.iter_mut().for_each(|a| *a = a.unscale(sc[k]));
        }
        out
    }

    /// `E(Z) = ½(d‖Ku‖² + c‖Kw‖² + ‖v‖² + ‖z‖²)` evaluated through `K` and the
    /// quadrature weights (not through `M`).
    pub fn energy(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(LabError::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        let (u, w, v, zz) = blocks(z);
        let ops = &self.ops;
        Ok(0.5
            * (self.d * ops.k_norm_sq(u)
                + self.c * ops.k_norm_sq(w)
                + ops.inner(v, v)
                + ops.inner(zz, zz)))
    }

    /// A random state with i.i.d. uniform coordinates in the `S`-frame, so all
    /// four blocks contribute comparably to the energy norm.
    pub fn random_state<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let xi: Vec<f64> = (0..self.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        self.solve_s(&xi)
    }
}

/// `max |Re⟨𝒜Z, Z⟩_ℋ + D(Z)| / ‖Z‖²_ℋ` over `trials` random states.
pub fn dissipativity_check<R: Rng>(
    generator: &CoupledGenerator,
    form: &EnergyForm,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(LabError::param("trials", "must be at least 1"));
    }
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let z = form.random_state(rng);
        worst = worst.max(dissipativity_residual(generator, form, &z)?);
    }
    Ok(worst)
}

pub fn dissipativity_residual(generator: &CoupledGenerator, form: &EnergyForm, z: &[f64]) -> Result<f64> {
    let az = generator.apply(z);
    let re = form.inner(&az, z);
    let dis = generator.dissipation(z)?;
    Ok((re + dis).abs() / form.norm_sq(z))
}
