//! Discrete Fourier transform on the torus and diagonal (multiplier) operators.
//!
//! Frequencies are indexed by `n_j in {0, .., L-1}`, i.e. `x_j = 2 pi n_j / L`
//! ranges over `[0, 2 pi)`. On this branch `sin(x_j / 2) >= 0`, so the axis
//! derivative multiplier `2i sin(x_j/2)` is `i` times a nonnegative square root
//! of the Laplacian symbol in one dimension. Coefficients share the flat
//! storage layout of [`Field`].
//!
//! Conventions: forward `F u(n) = sum_k u(k) e^{-i k.x_n}` (unnormalized),
//! inverse `u(k) = L^{-d} sum_n F u(n) e^{i k.x_n}`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::lattice::{Field, LatticeBox};

/// Below this many sites the line transforms run on the calling thread.
const PARALLEL_MIN_SITES: usize = 1 << 14;

/// Relative size of `|tK|` below which `sin(tK)/K` switches to its Taylor form.
pub const SINC_TAYLOR_THRESHOLD: f64 = 1e-6;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Frequency-space representation of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    lattice: LatticeBox,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn from_coeffs(lattice: LatticeBox, coeffs: Vec<Complex64>) -> Result<Self> {
        // reuse the length check on Field
        let f = Field::from_values(lattice, coeffs)?;
        Ok(Self {
            lattice,
            coeffs: f.into_values(),
        })
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// `L^{-d} sum_n |F u(n)|^2`, equal to `sum_k |u(k)|^2` by Parseval.
    pub fn normalized_norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.lattice.total() as f64
    }

    /// Pointwise product with a multiplier.
    pub fn multiply(&self, mult: &Multiplier) -> Result<SpectralField> {
        self.lattice.ensure_same(&mult.lattice)?;
        Ok(SpectralField {
            lattice: self.lattice,
            coeffs: self
                .coeffs
                .iter()
                .zip(&mult.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

/// Applies 1-d transforms along every axis in place.
fn transform_in_place(lattice: &LatticeBox, data: &mut [Complex64], inverse: bool) {
    let l = lattice.side();
    let fft = plan(l, inverse);
    let parallel = data.len() >= PARALLEL_MIN_SITES;
    for axis in 1..=lattice.dim() {
        let stride = lattice.stride(axis);
        if stride == 1 {
            if parallel {
                data.par_chunks_mut(l).for_each(|line| fft.process(line));
            } else {
                let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                for line in data.chunks_mut(l) {
                    fft.process_with_scratch(line, &mut scratch);
                }
            }
            continue;
        }
        // lines along `axis`: index = block * (L * stride) + p * stride + inner
        let block = l * stride;
        let line_starts: Vec<usize> = (0..data.len() / block)
            .flat_map(|b| (0..stride).map(move |inner| b * block + inner))
            .collect();
        let gather = |start: usize, data: &[Complex64]| -> Vec<Complex64> {
            (0..l).map(|p| data[start + p * stride]).collect()
        };
        let lines: Vec<Vec<Complex64>> = if parallel {
            let src: &[Complex64] = data;
            line_starts
                .par_iter()
                .map(|&s| {
                    let mut line = gather(s, src);
                    fft.process(&mut line);
                    line
                })
                .collect()
        } else {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            line_starts
                .iter()
                .map(|&s| {
                    let mut line = gather(s, data);
                    fft.process_with_scratch(&mut line, &mut scratch);
                    line
                })
                .collect()
        };
        for (&s, line) in line_starts.iter().zip(lines) {
            for (p, z) in line.into_iter().enumerate() {
                data[s + p * stride] = z;
            }
        }
    }
}

pub fn dft_forward(f: &Field) -> SpectralField {
    let lattice = *f.lattice();
    let mut coeffs = f.values().to_vec();
    transform_in_place(&lattice, &mut coeffs, false);
    SpectralField { lattice, coeffs }
}

pub fn dft_inverse(spec: &SpectralField) -> Field {
    let lattice = spec.lattice;
    let mut values = spec.coeffs.clone();
    transform_in_place(&lattice, &mut values, true);
    let norm = 1.0 / lattice.total() as f64;
    for z in values.iter_mut() {
        *z *= norm;
    }
    Field::from_values(lattice, values).expect("length preserved")
}

/// Diagonal operator in frequency space.
#[derive(Clone, Debug, PartialEq)]
pub struct Multiplier {
    lattice: LatticeBox,
    values: Vec<Complex64>,
    label: String,
}

impl Multiplier {
    pub fn from_fn(
        lattice: LatticeBox,
        label: impl Into<String>,
        f: impl Fn(&[usize]) -> Complex64,
    ) -> Self {
        let values = (0..lattice.total())
            .map(|i| {
                let n = lattice.positions(i);
                f(&n[..lattice.dim()])
            })
            .collect();
        Self {
            lattice,
            values,
            label: label.into(),
        }
    }

    pub fn identity(lattice: LatticeBox) -> Self {
        Self {
            lattice,
            values: vec![Complex64::new(1.0, 0.0); lattice.total()],
            label: "identity".into(),
        }
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Pointwise product (operator composition).
    pub fn compose(&self, other: &Multiplier) -> Result<Multiplier> {
        self.lattice.ensure_same(&other.lattice)?;
        Ok(Multiplier {
            lattice: self.lattice,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
            label: format!("{}*{}", self.label, other.label),
        })
    }

    pub fn scale(&self, c: Complex64) -> Multiplier {
        Multiplier {
            lattice: self.lattice,
            values: self.values.iter().map(|z| z * c).collect(),
            label: format!("{c}*{}", self.label),
        }
    }

    /// `sup_n |m(n)|`, the l2 operator norm of the multiplier.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn half_angle_sin(n: usize, l: usize) -> f64 {
    (PI * n as f64 / l as f64).sin()
}

/// `2i sin(pi n_j / L)` for 1-based `axis`.
pub fn partial_multiplier(lattice: LatticeBox, axis: usize) -> Result<Multiplier> {
    lattice.check_axis(axis)?;
    let l = lattice.side();
    Ok(Multiplier::from_fn(lattice, format!("d{axis}"), |n| {
        Complex64::new(0.0, 2.0 * half_angle_sin(n[axis - 1], l))
    }))
}

/// Sum of squared half-angle sines, `sum_j sin^2(x_j/2)`.
fn sin_sq_sum(n: &[usize], l: usize) -> f64 {
    n.iter().map(|&nj| half_angle_sin(nj, l).powi(2)).sum()
}

/// `-4 sum_j sin^2(pi n_j / L)`.
pub fn laplacian_multiplier(lattice: LatticeBox) -> Multiplier {
    let l = lattice.side();
    Multiplier::from_fn(lattice, "laplacian", |n| {
        Complex64::new(-4.0 * sin_sq_sum(n, l), 0.0)
    })
}

/// `K = 2 (sum_j sin^2(pi n_j / L))^{1/2}`, the symbol of `(-Delta)^{1/2}`.
pub fn k_multiplier(lattice: LatticeBox) -> Multiplier {
    let l = lattice.side();
    Multiplier::from_fn(lattice, "K", |n| {
        Complex64::new(2.0 * sin_sq_sum(n, l).sqrt(), 0.0)
    })
}

/// Real symbol values of `K` in storage order.
pub fn k_values(lattice: LatticeBox) -> Vec<f64> {
    k_multiplier(lattice).values.iter().map(|z| z.re).collect()
}

/// `sin(tK)/K` with the removable singularity at `K = 0` filled by `t`.
pub fn sinc_t(t: f64, k: f64) -> f64 {
    let x = t * k;
    if x.abs() < SINC_TAYLOR_THRESHOLD {
        let x2 = x * x;
        t * (1.0 - x2 / 6.0 + x2 * x2 / 120.0)
    } else {
        x.sin() / k
    }
}

/// Wave propagators `(cos(tK), sin(tK)/K)`.
pub fn propagator_pair(lattice: LatticeBox, t: f64) -> (Multiplier, Multiplier) {
    let k = k_values(lattice);
    let cos = k.iter().map(|&kv| Complex64::new((t * kv).cos(), 0.0)).collect();
    let sinc = k.iter().map(|&kv| Complex64::new(sinc_t(t, kv), 0.0)).collect();
    (
        Multiplier {
            lattice,
            values: cos,
            label: format!("cos({t}K)"),
        },
        Multiplier {
            lattice,
            values: sinc,
            label: format!("sin({t}K)/K"),
        },
    )
}

/// `F^{-1}(mult * F f)`.
pub fn apply(mult: &Multiplier, f: &Field) -> Result<Field> {
    mult.lattice.ensure_same(f.lattice())?;
    Ok(dft_inverse(&dft_forward(f).multiply(mult)?))
}

/// Spectral `partial_j f`.
pub fn partial(f: &Field, axis: usize) -> Result<Field> {
    apply(&partial_multiplier(*f.lattice(), axis)?, f)
}

/// Spectral Laplacian.
pub fn laplacian(f: &Field) -> Field {
    apply(&laplacian_multiplier(*f.lattice()), f).expect("same box")
}
