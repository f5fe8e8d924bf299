//! Direct-space realizations of the lattice operators: the convolution kernel
//! of the nonlocal derivative, the forward difference `D_j`, the 2d-point
//! stencil Laplacian and the inner products used in the adjointness identities.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Field, LatticeBox};

/// Default number of periodic images summed on each side of the origin.
pub const DEFAULT_TAIL_TERMS: usize = 64;

/// Kernel of `partial_j` on the infinite lattice, `-4i / (pi (4a^2 - 1))`.
pub fn raw_kernel(a: i64) -> Complex64 {
    let a = a as f64;
    Complex64::new(0.0, -4.0 / (PI * (4.0 * a * a - 1.0)))
}

/// `sum_{b >= first} 1/(4b^2 - 1) = 1 / (2 (2 first - 1))`, valid for `first >= 1`.
fn telescoped_tail(first: f64) -> f64 {
    0.5 / (2.0 * first - 1.0)
}

/// Closed form of `sum_{n in Z} 1/(4(a+nL)^2 - 1)` via the cotangent series
/// `sum_n 1/(z + nL) = (pi/L) cot(pi z / L)`.
fn periodic_image_sum(a: i64, l: usize) -> f64 {
    let l = l as f64;
    let a = a as f64;
    let cot = |x: f64| 1.0 / x.tan();
    PI / (4.0 * l) * (cot(PI * (a - 0.5) / l) - cot(PI * (a + 0.5) / l))
}

/// Periodized kernel `phi_per(a) = sum_n phi(a + nL)` on the offsets
/// `a in [-L/2, L/2)` of one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    axis: usize,
    lattice: LatticeBox,
    tail_terms: usize,
    /// Indexed by `a + L/2`.
    values: Vec<Complex64>,
    partial_sums: Vec<Complex64>,
    tail_bounds: Vec<f64>,
}

impl Kernel {
    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    pub fn tail_terms(&self) -> usize {
        self.tail_terms
    }

    pub fn offsets(&self) -> impl Iterator<Item = i64> {
        let half = (self.lattice.side() / 2) as i64;
        -half..half
    }

    /// Periodized value at offset `a` (any integer, taken mod `L`).
    pub fn at(&self, a: i64) -> Complex64 {
        self.values[self.offset_slot(a)]
    }

    /// Truncated image sum `sum_{|n| <= tail_terms} phi(a + nL)`.
    pub fn partial_sum(&self, a: i64) -> Complex64 {
        self.partial_sums[self.offset_slot(a)]
    }

    /// Rigorous bound on `|phi_per(a) - partial_sum(a)|`.
    pub fn tail_bound(&self, a: i64) -> f64 {
        self.tail_bounds[self.offset_slot(a)]
    }

    fn offset_slot(&self, a: i64) -> usize {
        let l = self.lattice.side() as i64;
        (a + l / 2).rem_euclid(l) as usize
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn max_tail_bound(&self) -> f64 {
        self.tail_bounds.iter().cloned().fold(0.0, f64::max)
    }

    /// The kernel as a field supported on the axis through the origin.
    pub fn to_field(&self) -> Field {
        let mut f = Field::zeros(self.lattice);
        let mut site = vec![0i64; self.lattice.dim()];
        for a in self.offsets() {
            site[self.axis - 1] = a;
            let i = self.lattice.index(&site);
            f.values_mut()[i] = self.at(a);
        }
        f
    }
}

/// Builds the periodized kernel for 1-based `axis`.
///
/// Values come from the closed-form image sum. The direct truncated sum over
/// `|n| <= tail_terms` is kept next to it together with the telescoping bound
/// on the omitted images, and the two are checked against each other.
pub fn kernel_periodized(lattice: LatticeBox, axis: usize, tail_terms: usize) -> Result<Kernel> {
    lattice.check_axis(axis)?;
    if tail_terms == 0 {
        return Err(Error::InvalidArgument("tail_terms must be at least 1".into()));
    }
    let l = lattice.side();
    let half = (l / 2) as i64;
    let mut values = Vec::with_capacity(l);
    let mut partial_sums = Vec::with_capacity(l);
    let mut tail_bounds = Vec::with_capacity(l);
    let scale = 4.0 / PI;
    for a in -half..half {
        let closed = Complex64::new(0.0, -scale * periodic_image_sum(a, l));
        let n_max = tail_terms as i64;
        // sum far images first so small terms are not swamped
        let direct: Complex64 = (-n_max..=n_max)
            .rev()
            .map(|n| raw_kernel(a + n * l as i64))
            .sum();
        let first = ((tail_terms + 1) * l) as f64;
        let bound = scale
            * (telescoped_tail(first + a as f64) + telescoped_tail(first - a as f64));
        let gap = (closed - direct).norm();
        if gap > bound + 1e-14 {
            return Err(Error::InvalidArgument(format!(
                "periodized kernel check failed at a={a}: gap {gap:e} > bound {bound:e}"
            )));
        }
        values.push(closed);
        partial_sums.push(direct);
        tail_bounds.push(bound);
    }
    Ok(Kernel {
        axis,
        lattice,
        tail_terms,
        values,
        partial_sums,
        tail_bounds,
    })
}

/// Circular convolution `f * phi_per` along `axis`.
pub fn conv_partial(f: &Field, axis: usize, kernel: &Kernel) -> Result<Field> {
    let lattice = *f.lattice();
    lattice.ensure_same(kernel.lattice())?;
    lattice.check_axis(axis)?;
    if kernel.axis() != axis {
        return Err(Error::InvalidArgument(format!(
            "kernel is for axis {}, not {axis}",
            kernel.axis()
        )));
    }
    let l = lattice.side();
    let stride = lattice.stride(axis);
    // taps[s] = phi_per(s) with s the residue of the offset
    let taps: Vec<Complex64> = (0..l).map(|s| kernel.at(s as i64)).collect();
    let src = f.values();
    let mut out = vec![Complex64::default(); lattice.total()];
    for (i, o) in out.iter_mut().enumerate() {
        let p = (i / stride) % l;
        let base = i - p * stride;
        let mut acc = Complex64::default();
        for (s, tap) in taps.iter().enumerate() {
            // f(m - s e_j)
            let q = (p + l - s) % l;
            acc += tap * src[base + q * stride];
        }
        *o = acc;
    }
    Field::from_values(lattice, out)
}

/// Forward difference `D_j u(m) = u(m + e_j) - u(m)`.
pub fn difference(f: &Field, axis: usize) -> Result<Field> {
    let lattice = *f.lattice();
    lattice.check_axis(axis)?;
    let src = f.values();
    let out = (0..lattice.total())
        .map(|i| src[lattice.shifted(i, axis, 1)] - src[i])
        .collect();
    Field::from_values(lattice, out)
}

/// `sum_{y ~ x} f(y) - 2d f(x)` with periodic neighbours.
pub fn stencil_laplacian(f: &Field) -> Field {
    let lattice = *f.lattice();
    let d = lattice.dim();
    let src = f.values();
    let out = (0..lattice.total())
        .map(|i| {
            let mut acc = src[i] * (-2.0 * d as f64);
            for axis in 1..=d {
                acc += src[lattice.shifted(i, axis, 1)] + src[lattice.shifted(i, axis, -1)];
            }
            acc
        })
        .collect();
    Field::from_values(lattice, out).expect("same length")
}

/// `<f, g> = sum_k f(k) conj(g(k))`.
pub fn inner(f: &Field, g: &Field) -> Result<Complex64> {
    f.lattice().ensure_same(g.lattice())?;
    Ok(f.values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a * b.conj())
        .sum())
}

/// `sum_k f(k) g(k)` without conjugation.
pub fn bilinear(f: &Field, g: &Field) -> Result<Complex64> {
    f.lattice().ensure_same(g.lattice())?;
    Ok(f.values().iter().zip(g.values()).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{delta_field, make_box};
    use crate::spectral::{apply, dft_forward, laplacian, partial, partial_multiplier};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(b: LatticeBox, rng: &mut ChaCha8Rng) -> Field {
        let vals = (0..b.total())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Field::from_values(b, vals).unwrap()
    }

    #[test]
    fn raw_kernel_values() {
        assert!((raw_kernel(0).im - 1.2732395447351628).abs() < 1e-15);
        assert!((raw_kernel(1).im + 0.4244131815783876).abs() < 1e-15);
        assert_eq!(raw_kernel(3), raw_kernel(-3));
    }

    #[test]
    fn raw_kernel_sums_to_zero() {
        // sum_{a>=1} 1/(4a^2-1) telescopes to 1/2, so phi(0) = -2 sum_{a>=1} phi(a)
        let n = 200_000i64;
        let tail: f64 = (1..=n).rev().map(|a| raw_kernel(a).im).sum();
        let analytic_rest = 4.0 / PI * telescoped_tail((n + 1) as f64);
        let total = raw_kernel(0).im + 2.0 * (tail - analytic_rest);
        assert!(total.abs() < 1e-12, "{total}");
    }

    #[test]
    fn periodized_kernel_matches_multiplier() {
        for l in [8usize, 16, 64, 128] {
            let b = make_box(1, l).unwrap();
            let k = kernel_periodized(b, 1, DEFAULT_TAIL_TERMS).unwrap();
            let spec = dft_forward(&k.to_field());
            let m = partial_multiplier(b, 1).unwrap();
            for (a, e) in spec.coeffs().iter().zip(m.values()) {
                assert!((a - e).norm() < 1e-12, "L={l}");
            }
            let sum: Complex64 = k.values().iter().sum();
            assert!(sum.norm() < 1e-13);
        }
    }

    #[test]
    fn periodized_kernel_structure() {
        let b = make_box(1, 16).unwrap();
        let k = kernel_periodized(b, 1, 8).unwrap();
        for a in k.offsets() {
            assert_eq!(k.at(a).re, 0.0);
            assert!(k.tail_bound(a) > 0.0);
            assert!((k.at(a) - k.partial_sum(a)).norm() <= k.tail_bound(a) + 1e-14);
            if a > -8 {
                // phi is even in the offset
                assert!((k.at(a) - k.at(-a)).norm() < 1e-14);
            }
        }
        assert!(kernel_periodized(b, 2, 8).is_err());
        assert!(kernel_periodized(b, 1, 0).is_err());
    }

    #[test]
    fn tail_bound_shrinks_with_more_images() {
        let b = make_box(1, 8).unwrap();
        let k8 = kernel_periodized(b, 1, 8).unwrap();
        let k64 = kernel_periodized(b, 1, 64).unwrap();
        assert!(k64.max_tail_bound() < k8.max_tail_bound() / 4.0);
    }

    #[test]
    fn conv_examples() {
        let b = make_box(2, 8).unwrap();
        let k = kernel_periodized(b, 2, DEFAULT_TAIL_TERMS).unwrap();
        let d0 = delta_field(b, &[0, 0]).unwrap();
        let c = conv_partial(&d0, 2, &k).unwrap();
        assert!(c.max_abs_diff(&k.to_field()).unwrap() < 1e-15);
        let one = Field::constant(b, Complex64::new(1.0, 0.0));
        assert!(conv_partial(&one, 2, &k).unwrap().sup_norm() < 1e-13);
        assert!(conv_partial(&one, 1, &k).is_err());
    }

    #[test]
    fn conv_matches_spectral_partial() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = make_box(2, 16).unwrap();
        let f = random_field(b, &mut rng);
        for axis in 1..=2 {
            let k = kernel_periodized(b, axis, DEFAULT_TAIL_TERMS).unwrap();
            let direct = conv_partial(&f, axis, &k).unwrap();
            let spectral = partial(&f, axis).unwrap();
            assert!(direct.max_abs_diff(&spectral).unwrap() < 1e-11);
        }
    }

    #[test]
    fn delta_partial_is_periodized_kernel_and_nonlocal() {
        let b = make_box(1, 64).unwrap();
        let d0 = delta_field(b, &[0]).unwrap();
        let spectral = partial(&d0, 1).unwrap();
        let k = kernel_periodized(b, 1, DEFAULT_TAIL_TERMS).unwrap();
        assert!(spectral.max_abs_diff(&k.to_field()).unwrap() < 1e-12);
        for l in [8usize, 32, 128] {
            let b = make_box(1, l).unwrap();
            let g = partial(&delta_field(b, &[0]).unwrap(), 1).unwrap();
            assert!(g.values().iter().all(|z| z.norm() > 0.0));
        }
    }

    #[test]
    fn difference_examples() {
        let b = make_box(1, 8).unwrap();
        let one = Field::constant(b, Complex64::new(2.0, 0.0));
        assert_eq!(difference(&one, 1).unwrap().sup_norm(), 0.0);
        let dd = difference(&delta_field(b, &[0]).unwrap(), 1).unwrap();
        assert_eq!(dd.at(&[0]).re, -1.0);
        assert_eq!(dd.at(&[-1]).re, 1.0);
        assert_eq!(dd.norm_sqr_sum(), 2.0);
    }

    #[test]
    fn stencil_examples() {
        let b = make_box(1, 8).unwrap();
        let lap = stencil_laplacian(&delta_field(b, &[0]).unwrap());
        assert_eq!(lap.at(&[0]).re, -2.0);
        assert_eq!(lap.at(&[1]).re, 1.0);
        assert_eq!(lap.at(&[-1]).re, 1.0);
        let one = Field::constant(b, Complex64::new(1.0, 0.0));
        assert_eq!(stencil_laplacian(&one).sup_norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b3 = make_box(3, 8).unwrap();
        let f = random_field(b3, &mut rng);
        assert!(stencil_laplacian(&f).max_abs_diff(&laplacian(&f)).unwrap() < 1e-11);
    }

    #[test]
    fn difference_and_partial_share_l2_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = make_box(2, 16).unwrap();
        let f = random_field(b, &mut rng);
        for axis in 1..=2 {
            let a = difference(&f, axis).unwrap().l2_norm();
            let p = partial(&f, axis).unwrap().l2_norm();
            assert!((a - p).abs() < 1e-11);
        }
    }

    #[test]
    fn adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = make_box(2, 8).unwrap();
        let d0 = delta_field(b, &[0, 0]).unwrap();
        assert_eq!(inner(&d0, &d0).unwrap(), Complex64::new(1.0, 0.0));
        for _ in 0..10 {
            let u = random_field(b, &mut rng);
            let v = random_field(b, &mut rng);
            let lhs = inner(&partial(&u, 1).unwrap(), &v).unwrap();
            let rhs = inner(&u, &partial(&v, 1).unwrap()).unwrap();
            assert!((lhs + rhs).norm() <= 1e-11 * u.l2_norm() * v.l2_norm());
            let ur = u.map(|z| Complex64::new(z.re, 0.0));
            let vr = v.map(|z| Complex64::new(z.re, 0.0));
            let a = bilinear(&partial(&ur, 2).unwrap(), &vr).unwrap();
            let c = bilinear(&ur, &partial(&vr, 2).unwrap()).unwrap();
            assert!((a - c).norm() < 1e-11);
        }
    }

    #[test]
    fn partial_of_real_field_is_imaginary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = make_box(1, 32).unwrap();
        let vals: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = Field::from_real(b, &vals).unwrap();
        let k = kernel_periodized(b, 1, DEFAULT_TAIL_TERMS).unwrap();
        let g = conv_partial(&f, 1, &k).unwrap();
        assert!(g.values().iter().all(|z| z.re.abs() <= 1e-13));
        let s = apply(&partial_multiplier(b, 1).unwrap(), &f).unwrap();
        assert!(s.max_abs_diff(&g).unwrap() < 1e-12);
    }
}
