//! Periodic cubic grid, wavenumber lattice and the 3-D transform.
//!
//! Samples are stored x-fastest: index `ix + n*iy + n*n*iz`. The physical
//! coordinate of index `j` along an axis is `-L/2 + j*h`, so the box center
//! (the origin) sits on index `n/2`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Spectrally truncated free-space Coulomb kernel.
///
/// `symbol[k] = 4π(1 − cos(T|k|))/|k|²`, with the `k = 0` limit `2πT²`.
/// Convolution with it reproduces `|x|^{-1} ∗ ρ` exactly as long as the
/// support of `ρ` has diameter at most `T` and `T ≤ L/2`.
#[derive(Clone)]
pub struct CoulombKernel {
    radius: f64,
    symbol: Vec<f64>,
}

impl CoulombKernel {
    fn new(radius: f64, k_sq: &[f64]) -> Self {
        let symbol = k_sq.iter().map(|&k2| Self::symbol_at(radius, k2.sqrt())).collect();
        CoulombKernel { radius, symbol }
    }

    /// Kernel symbol at wavenumber magnitude `k`.
    pub fn symbol_at(radius: f64, k: f64) -> f64 {
        if k == 0.0 {
            return 2.0 * PI * radius * radius;
        }
        // 1 − cos x = 2 sin²(x/2), free of cancellation near x = 0
        let s = (0.5 * radius * k).sin();
        8.0 * PI * s * s / (k * k)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }
}

pub(crate) struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized forward transform `Σ_x u(x) e^{-ik·x}`, in place.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &*self.forward);
    }

    /// Normalized inverse transform (divides by `n³`), in place.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &*self.inverse);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn run(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let n = self.n;
        let plane = n * n;
        debug_assert_eq!(data.len(), plane * n);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut buf = vec![Complex64::default(); plane];

        // x lines are contiguous
        fft.process_with_scratch(data, &mut scratch);

        // y lines: transpose each z-slab
        for slab in data.chunks_exact_mut(plane) {
            for iy in 0..n {
                for ix in 0..n {
                    buf[ix * n + iy] = slab[iy * n + ix];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for iy in 0..n {
                for ix in 0..n {
                    slab[iy * n + ix] = buf[ix * n + iy];
                }
            }
        }

        // z lines: gather one (x, z) plane per y
        for iy in 0..n {
            for iz in 0..n {
                let row = &data[iz * plane + iy * n..iz * plane + iy * n + n];
                for (ix, v) in row.iter().enumerate() {
                    buf[ix * n + iz] = *v;
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for iz in 0..n {
                let row = &mut data[iz * plane + iy * n..iz * plane + iy * n + n];
                for (ix, v) in row.iter_mut().enumerate() {
                    *v = buf[ix * n + iz];
                }
            }
        }
    }
}

struct GridData {
    n: usize,
    box_length: f64,
    spacing: f64,
    axis_k: Vec<f64>,
    k_sq: Vec<f64>,
    half_wave: Vec<f64>,
    inv_half_wave: Vec<f64>,
    abs_k: Vec<f64>,
    coulomb: CoulombKernel,
    fft: Fft3,
}

/// A periodic `n³` grid on the box `[-L/2, L/2)³`.
///
/// Cheap to clone; all per-mode tables and transform plans are shared.
#[derive(Clone)]
pub struct Grid {
    data: Arc<GridData>,
}

impl Grid {
    /// Builds a grid with the default Coulomb truncation radius `L/2`.
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        Self::with_truncation(n, box_length, box_length / 2.0)
    }

    pub fn with_truncation(n: usize, box_length: f64, radius: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two and at least 8, got {n}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::Config(format!("box length must be positive, got {box_length}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Config(format!(
                "Coulomb truncation radius must be positive, got {radius}"
            )));
        }
        let spacing = box_length / n as f64;
        let dk = 2.0 * PI / box_length;
        // FFT ordering: 0, 1, ..., n/2-1, -n/2, ..., -1
        let axis_k: Vec<f64> = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
                dk * m as f64
            })
            .collect();
        let total = n * n * n;
        let mut k_sq = Vec::with_capacity(total);
        for iz in 0..n {
            for iy in 0..n {
                let kyz = axis_k[iy] * axis_k[iy] + axis_k[iz] * axis_k[iz];
                for kx in &axis_k {
                    k_sq.push(kx * kx + kyz);
                }
            }
        }
        let half_wave: Vec<f64> = k_sq.iter().map(|k2| (1.0 + k2).sqrt()).collect();
        let inv_half_wave = half_wave.iter().map(|a| 1.0 / a).collect();
        let abs_k = k_sq.iter().map(|k2| k2.sqrt()).collect();
        let coulomb = CoulombKernel::new(radius, &k_sq);
        Ok(Grid {
            data: Arc::new(GridData {
                n,
                box_length,
                spacing,
                axis_k,
                k_sq,
                half_wave,
                inv_half_wave,
                abs_k,
                coulomb,
                fft: Fft3::new(n),
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.data.n
    }

    pub fn len(&self) -> usize {
        self.data.n * self.data.n * self.data.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn box_length(&self) -> f64 {
        self.data.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.data.spacing
    }

    /// Quadrature weight `h³`.
    pub fn cell_volume(&self) -> f64 {
        self.data.spacing.powi(3)
    }

    /// Wavenumbers along one axis in transform order.
    pub fn axis_wavenumbers(&self) -> &[f64] {
        &self.data.axis_k
    }

    /// `|k|²` per mode.
    pub fn k_squared(&self) -> &[f64] {
        &self.data.k_sq
    }

    /// `√(1+|k|²)` per mode.
    pub fn half_wave_symbol(&self) -> &[f64] {
        &self.data.half_wave
    }

    /// `1/√(1+|k|²)` per mode.
    pub fn inverse_half_wave_symbol(&self) -> &[f64] {
        &self.data.inv_half_wave
    }

    /// `|k|` per mode.
    pub fn abs_k(&self) -> &[f64] {
        &self.data.abs_k
    }

    pub fn coulomb(&self) -> &CoulombKernel {
        &self.data.coulomb
    }

    pub(crate) fn fft(&self) -> &Fft3 {
        &self.data.fft
    }

    /// Physical coordinate of grid index `j` along any axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.data.box_length + j as f64 * self.data.spacing
    }

    /// Splits a flat index into `(ix, iy, iz)`.
    pub fn unflatten(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.data.n;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    pub fn flatten(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let n = self.data.n;
        ix + n * (iy + n * iz)
    }

    /// True when both grids describe the same discretization.
    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.data, &other.data)
            || (self.data.n == other.data.n
                && self.data.box_length == other.data.box_length
                && self.data.coulomb.radius == other.data.coulomb.radius)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.data.n)
            .field("box_length", &self.data.box_length)
            .field("spacing", &self.data.spacing)
            .field("truncation_radius", &self.data.coulomb.radius)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

/// Serializable grid description used in result documents.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridMeta {
    pub n: usize,
    pub box_length: f64,
    pub spacing: f64,
    pub truncation_radius: f64,
}

impl From<&Grid> for GridMeta {
    fn from(g: &Grid) -> Self {
        GridMeta {
            n: g.n(),
            box_length: g.box_length(),
            spacing: g.spacing(),
            truncation_radius: g.coulomb().radius(),
        }
    }
}
