//! Uniform grids on the unit interval / unit square and the energy-consistent
//! difference operators built on them.
//!
//! Everything is assembled from two factors:
//!
//! * `K`, the second difference mapping interior values to *all* nodes
//!   (boundary included). Clamped conditions are encoded by `u = 0` on the
//!   boundary and the reflection `u(-h) = u(h)` for the ghost node.
//! * `G`, the forward difference mapping interior values to cell midpoints.
//!
//! The biharmonic is `B = W⁻¹ Kᵀ N K` and the damping operator is
//! `L_a = -W⁻¹ Gᵀ diag(a) M G`, with `W`, `N`, `M` the interior, trapezoidal
//! node and midpoint quadrature weights. Discrete integration by parts then
//! holds exactly: `⟨Bu, v⟩_W = ⟨Ku, Kv⟩_N`.

use crate::error::{LabError, Result};
use crate::sparse::Csr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    /// Interior points.
    pub n: usize,
    pub h: f64,
}

impl Axis {
    fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(LabError::InvalidGrid(format!(
                "need at least 3 interior points per axis, got {n}"
            )));
        }
        Ok(Axis {
            n,
            h: 1.0 / (n as f64 + 1.0),
        })
    }

    /// Coordinate of interior point `i` (0-based), i.e. `(i + 1) h`.
    pub fn point(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn line(n: usize) -> Result<Self> {
        Ok(Grid {
            axes: vec![Axis::new(n)?],
        })
    }

    pub fn rect(nx: usize, ny: usize) -> Result<Self> {
        Ok(Grid {
            axes: vec![Axis::new(nx)?, Axis::new(ny)?],
        })
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> Axis {
        self.axes[k]
    }

    /// Number of interior degrees of freedom.
    pub fn dofs(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    /// Quadrature weight attached to each interior node.
    pub fn weight(&self) -> f64 {
        self.axes.iter().map(|a| a.h).product()
    }

    /// Interior node coordinates; in 2D the x index is the slow one.
    pub fn points(&self) -> Vec<[f64; 2]> {
        match self.axes.as_slice() {
            [x] => (0..x.n).map(|i| [x.point(i), 0.0]).collect(),
            [x, y] => (0..x.n)
                .flat_map(|i| (0..y.n).map(move |j| [x.point(i), y.point(j)]))
                .collect(),
            _ => unreachable!(),
        }
    }
}

/// Difference operators on one grid; immutable once built.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    pub grid: Grid,
    /// Second difference, interior → all nodes.
    pub k: Csr,
    /// Trapezoidal weights of the nodes `K` maps to.
    pub node_weights: Vec<f64>,
    /// Clamped biharmonic `W⁻¹ Kᵀ N K`.
    pub b: Csr,
    /// Forward difference, interior → edge midpoints.
    pub g: Csr,
    pub mid_weights: Vec<f64>,
    pub mid_points: Vec<[f64; 2]>,
}

fn second_difference_1d(ax: Axis) -> Csr {
    let n = ax.n;
    let s = 1.0 / (ax.h * ax.h);
    let mut t = vec![(0, 0, 2.0 * s), (n + 1, n - 1, 2.0 * s)];
    for j in 1..=n {
        t.push((j, j - 1, -2.0 * s));
        if j >= 2 {
            t.push((j, j - 2, s));
        }
        if j < n {
            t.push((j, j, s));
        }
    }
    Csr::from_triplets(n + 2, n, &t)
}

fn trapezoid_weights_1d(ax: Axis) -> Vec<f64> {
    let mut w = vec![ax.h; ax.n + 2];
    w[0] = 0.5 * ax.h;
    w[ax.n + 1] = 0.5 * ax.h;
    w
}

fn gradient_1d(ax: Axis) -> Csr {
    let n = ax.n;
    let s = 1.0 / ax.h;
    let mut t = Vec::with_capacity(2 * n);
    for m in 0..=n {
        // midpoint between nodes m and m + 1; interior node k sits at index k - 1
        if m >= 1 {
            t.push((m, m - 1, -s));
        }
        if m < n {
            t.push((m, m, s));
        }
    }
    Csr::from_triplets(n + 1, n, &t)
}

/// Injection of interior values into the full node set (zero on the boundary).
fn injection_1d(ax: Axis) -> Csr {
    let t: Vec<_> = (0..ax.n).map(|i| (i + 1, i, 1.0)).collect();
    Csr::from_triplets(ax.n + 2, ax.n, &t)
}

fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// The clamped second-difference map `K` for a grid.
pub fn second_difference_map(grid: &Grid) -> Csr {
    match grid.axes() {
        [x] => second_difference_1d(*x),
        [x, y] => second_difference_1d(*x)
            .kron(&injection_1d(*y))
            .add(&injection_1d(*x).kron(&second_difference_1d(*y))),
        _ => unreachable!(),
    }
}

impl DiscreteOperators {
    pub fn build(grid: &Grid) -> Self {
        let k = second_difference_map(grid);
        let (node_weights, g, mid_weights, mid_points) = match grid.axes() {
            [x] => {
                let mids = (0..=x.n).map(|m| [(m as f64 + 0.5) * x.h, 0.0]).collect();
                (
                    trapezoid_weights_1d(*x),
                    gradient_1d(*x),
                    vec![x.h; x.n + 1],
                    mids,
                )
            }
            [x, y] => {
                let nw = kron_vec(&trapezoid_weights_1d(*x), &trapezoid_weights_1d(*y));
                let gx = gradient_1d(*x).kron(&Csr::identity(y.n));
                let gy = Csr::identity(x.n).kron(&gradient_1d(*y));
                let rows_x = gx.nrows();
                let t: Vec<_> = gx
                    .triplets()
                    .chain(gy.triplets().map(|(r, c, v)| (r + rows_x, c, v)))
                    .collect();
                let g = Csr::from_triplets(rows_x + gy.nrows(), grid.dofs(), &t);
                let mut mids = Vec::with_capacity(g.nrows());
                for m in 0..=x.n {
                    for j in 0..y.n {
                        mids.push([(m as f64 + 0.5) * x.h, y.point(j)]);
                    }
                }
                for i in 0..x.n {
                    for m in 0..=y.n {
                        mids.push([x.point(i), (m as f64 + 0.5) * y.h]);
                    }
                }
                (nw, g, vec![x.h * y.h; mids.len()], mids)
            }
            _ => unreachable!(),
        };
        let b = k
            .transpose()
            .matmul(&k.scale_rows(&node_weights))
            .scale(1.0 / grid.weight());
        DiscreteOperators {
            grid: grid.clone(),
            k,
            node_weights,
            b,
            g,
            mid_weights,
            mid_points,
        }
    }

    pub fn dofs(&self) -> usize {
        self.grid.dofs()
    }

    pub fn midpoint_count(&self) -> usize {
        self.g.nrows()
    }

    /// `L_a = -W⁻¹ Gᵀ diag(a ⊙ mid_weights) G`.
    pub fn weighted_laplacian(&self, a_mid: &[f64]) -> Result<Csr> {
        if a_mid.len() != self.midpoint_count() {
            return Err(LabError::DimensionMismatch {
                expected: self.midpoint_count(),
                got: a_mid.len(),
            });
        }
        if let Some((i, v)) = a_mid.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(LabError::InvalidDamping(format!(
                "midpoint value a[{i}] = {v} is negative or not finite"
            )));
        }
        let d: Vec<f64> = a_mid
            .iter()
            .zip(&self.mid_weights)
            .map(|(a, w)| a * w)
            .collect();
        Ok(self
            .g
            .transpose()
            .matmul(&self.g.scale_rows(&d))
            .scale(-1.0 / self.grid.weight()))
    }

    /// Interior quadrature inner product `Σ W u v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.grid.weight() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `‖K u‖²` under trapezoidal node weights.
    pub fn k_norm_sq(&self, u: &[f64]) -> f64 {
        self.k
            .mul_vec(u)
            .iter()
            .zip(&self.node_weights)
            .map(|(x, w)| w * x * x)
            .sum()
    }
}
