#![allow(dead_code)]

use num_complex::Complex64;
use sps_core::grid::CoulombKernel;
use sps_core::{Field, Grid};

/// Real-space kernel `G(r) = L⁻³ Σ_k K̂(k) e^{ik·r}` on the lattice of
/// differences, summed mode by mode.
pub fn lattice_kernel(grid: &Grid) -> Vec<f64> {
    let n = grid.n();
    let l = grid.box_length();
    let h = grid.spacing();
    let radius = grid.coulomb().radius();
    let ks: Vec<f64> = (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
            2.0 * std::f64::consts::PI * m as f64 / l
        })
        .collect();
    // phase[a][m] = exp(i k_a m h)
    let phase: Vec<Vec<Complex64>> = ks
        .iter()
        .map(|k| (0..n).map(|m| Complex64::from_polar(1.0, k * m as f64 * h)).collect())
        .collect();
    let mut symbol = vec![0.0; n * n * n];
    for c in 0..n {
        for b in 0..n {
            for a in 0..n {
                let k = (ks[a] * ks[a] + ks[b] * ks[b] + ks[c] * ks[c]).sqrt();
                symbol[a + n * (b + n * c)] = CoulombKernel::symbol_at(radius, k);
            }
        }
    }
    let mut g = vec![0.0; n * n * n];
    for mz in 0..n {
        for my in 0..n {
            for mx in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for c in 0..n {
                    for b in 0..n {
                        let yz = phase[b][my] * phase[c][mz];
                        for a in 0..n {
                            s += symbol[a + n * (b + n * c)] * phase[a][mx] * yz;
                        }
                    }
                }
                g[mx + n * (my + n * mz)] = s.re / (l * l * l);
            }
        }
    }
    g
}

/// `Φ(x) = h³ Σ_y G(x − y)|u(y)|²` by direct summation.
pub fn direct_potential(u: &Field, kernel: &[f64]) -> Vec<f64> {
    let g = u.grid();
    let n = g.n();
    let h3 = g.cell_volume();
    let dens: Vec<f64> = u.values().iter().map(|v| v.norm_sqr()).collect();
    (0..g.len())
        .map(|i| {
            let (x, y, z) = g.unflatten(i);
            let mut s = 0.0;
            for (j, d) in dens.iter().enumerate() {
                let (a, b, c) = g.unflatten(j);
                let dx = (x + n - a) % n;
                let dy = (y + n - b) % n;
                let dz = (z + n - c) % n;
                s += kernel[dx + n * (dy + n * dz)] * d;
            }
            h3 * s
        })
        .collect()
}

pub fn direct_double_integral(u: &Field, potential: &[f64]) -> f64 {
    u.grid().cell_volume()
        * u.values()
            .iter()
            .zip(potential)
            .map(|(v, p)| v.norm_sqr() * p)
            .sum::<f64>()
}

pub fn max_relative(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Seeded smooth complex direction with unit L² norm.
pub fn unit_direction(grid: &Grid, seed: u64) -> Field {
    let f = Field::random_smooth(grid, grid.box_length() / 6.0, seed);
    f.scaled(1.0 / f.mass().sqrt())
}
