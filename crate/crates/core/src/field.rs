//! Complex fields sampled on a [`Grid`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Complex samples `u(x_j)`, one per grid point, x-fastest.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field {
            grid: grid.clone(),
            values: vec![Complex64::default(); grid.len()],
        }
    }

    /// Wraps raw samples, checking length and finiteness.
    pub fn from_values(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} samples, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        let f = Field {
            grid: grid.clone(),
            values,
        };
        f.ensure_finite()?;
        Ok(f)
    }

    pub(crate) fn from_values_unchecked(grid: &Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field {
            grid: grid.clone(),
            values,
        }
    }

    /// Samples `f(x, y, z)` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> Complex64) -> Self {
        let n = grid.n();
        let coords: Vec<f64> = (0..n).map(|j| grid.coordinate(j)).collect();
        let mut values = Vec::with_capacity(grid.len());
        for z in &coords {
            for y in &coords {
                for x in &coords {
                    values.push(f(*x, *y, *z));
                }
            }
        }
        Field {
            grid: grid.clone(),
            values,
        }
    }

    /// `amplitude · exp(−|x − center|²/width²)`.
    pub fn gaussian(grid: &Grid, amplitude: f64, width: f64, center: [f64; 3]) -> Self {
        let inv = 1.0 / (width * width);
        Field::from_fn(grid, |x, y, z| {
            let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2) + (z - center[2]).powi(2);
            Complex64::new(amplitude * (-r2 * inv).exp(), 0.0)
        })
    }

    /// Smooth random field: a Gaussian envelope of the given width times
    /// a few random low-frequency complex modes.
    pub fn random_smooth(grid: &Grid, width: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = grid.box_length();
        let base = 2.0 * std::f64::consts::PI / l;
        let modes: Vec<([f64; 3], Complex64)> = (0..6)
            .map(|_| {
                let k = [
                    base * rng.gen_range(-2i32..=2) as f64,
                    base * rng.gen_range(-2i32..=2) as f64,
                    base * rng.gen_range(-2i32..=2) as f64,
                ];
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (k, c)
            })
            .collect();
        let shift = [
            rng.gen_range(-0.5..0.5) * width,
            rng.gen_range(-0.5..0.5) * width,
            rng.gen_range(-0.5..0.5) * width,
        ];
        let inv = 1.0 / (width * width);
        Field::from_fn(grid, |x, y, z| {
            let r2 = (x - shift[0]).powi(2) + (y - shift[1]).powi(2) + (z - shift[2]).powi(2);
            let env = (-r2 * inv).exp();
            let mut s = Complex64::new(1.0, 0.0);
            for (k, c) in &modes {
                s += c * Complex64::from_polar(0.5, k[0] * x + k[1] * y + k[2] * z);
            }
            s * env
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("field"))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    /// `‖u‖₂²` by physical-space quadrature.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * crate::sum::sum(self.values.iter().map(|v| v.norm_sqr()))
    }

    /// Discrete `⟨u, v⟩ = h³ Σ u · conj(v)`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        debug_assert!(self.grid.same_as(&other.grid));
        let s = crate::sum::sum_complex(self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()));
        s * self.grid.cell_volume()
    }

    /// `Re⟨u, v⟩`.
    pub fn re_inner(&self, other: &Field) -> f64 {
        debug_assert!(self.grid.same_as(&other.grid));
        let s = crate::sum::sum(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.re * b.re + a.im * b.im),
        );
        s * self.grid.cell_volume()
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn scaled_complex(&self, c: Complex64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b * c).collect(),
        }
    }

    /// Pointwise modulus `|u|` as a real-valued field.
    pub fn modulus(&self) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect(),
        }
    }

    /// Forward transform `û_k = Σ_x u(x) e^{-ik·x}` in transform order.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut s = self.values.clone();
        self.grid.fft().forward(&mut s);
        s
    }

    /// Builds a field from its spectrum (inverse of [`Field::spectrum`]).
    pub fn from_spectrum(grid: &Grid, mut spectrum: Vec<Complex64>) -> Field {
        grid.fft().inverse(&mut spectrum);
        Field {
            grid: grid.clone(),
            values: spectrum,
        }
    }

    /// Circular shift by integer grid offsets.
    pub fn shifted(&self, offset: [i64; 3]) -> Field {
        let n = self.grid.n() as i64;
        let wrap = |j: usize, d: i64| ((j as i64 - d).rem_euclid(n)) as usize;
        let mut out = vec![Complex64::default(); self.values.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            let (ix, iy, iz) = self.grid.unflatten(idx);
            let src = self
                .grid
                .flatten(wrap(ix, offset[0]), wrap(iy, offset[1]), wrap(iz, offset[2]));
            *slot = self.values[src];
        }
        Field {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// Fraction of the mass sitting in the outermost grid layer of each face.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let total = self.mass();
        if total == 0.0 {
            return 0.0;
        }
        let n = self.grid.n();
        let edge = |j: usize| j == 0 || j == n - 1;
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let (x, y, z) = self.grid.unflatten(*i);
                edge(x) || edge(y) || edge(z)
            })
            .map(|(_, v)| v.norm_sqr())
            .sum();
        s * self.grid.cell_volume() / total
    }
}
