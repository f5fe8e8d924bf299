//! Self-checks run by `lattwave verify`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::calculus::{conv_partial, difference, inner, kernel_periodized, stencil_laplacian, DEFAULT_TAIL_TERMS};
use crate::energy::{difference_norm_sqr, gradient_norm_sqr, linear_energy, uprime_norm};
use crate::error::{Error, Result};
use crate::experiments::{counterexample_growth, isomorphism_check};
use crate::lattice::{delta_field, make_box, Field, LatticeBox, WaveState};
use crate::solvers::LinearPropagator;
use crate::spectral::{apply, k_multiplier, partial};

pub const SUITES: [&str; 5] = ["identities", "adjointness", "conservation", "counterexample", "isomorphism"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
}

fn outcome(suite: &str, name: &str, value: f64, tolerance: f64) -> Outcome {
    Outcome {
        suite: suite.into(),
        name: name.into(),
        passed: value <= tolerance,
        value,
        tolerance,
    }
}

/// Field of independent complex standard normals.
pub fn random_field(lattice: LatticeBox, rng: &mut ChaCha8Rng) -> Field {
    let vals = (0..lattice.total())
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        })
        .collect();
    Field::from_values(lattice, vals).expect("length")
}

const SWEEP: [(usize, usize); 9] = [(1, 8), (1, 16), (1, 32), (2, 8), (2, 16), (2, 32), (3, 8), (3, 16), (3, 32)];

/// Max over the sweep of the scaled deviation `quantity(f)`, `per_box` random
/// fields on each box.
fn sweep_max(seed: u64, per_box: usize, mut quantity: impl FnMut(&Field) -> Result<f64>) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (d, l) in SWEEP {
        let b = make_box(d, l)?;
        for _ in 0..per_box {
            worst = worst.max(quantity(&random_field(b, &mut rng))?);
        }
    }
    Ok(worst)
}

pub fn identities(seed: u64, per_box: usize) -> Result<Vec<Outcome>> {
    let s = "identities";
    let conv = sweep_max(seed, per_box, |f| {
        let mut worst: f64 = 0.0;
        for axis in 1..=f.lattice().dim() {
            let k = kernel_periodized(*f.lattice(), axis, DEFAULT_TAIL_TERMS)?;
            worst = worst.max(conv_partial(f, axis, &k)?.max_abs_diff(&partial(f, axis)?)?);
        }
        Ok(worst)
    })?;
    let lap = sweep_max(seed + 1, per_box, |f| {
        let mut sum = Field::zeros(*f.lattice());
        for axis in 1..=f.lattice().dim() {
            sum = sum.add(&partial(&partial(f, axis)?, axis)?)?;
        }
        Ok(sum.max_abs_diff(&stencil_laplacian(f))? / f.sup_norm())
    })?;
    let grad = sweep_max(seed + 2, per_box, |f| {
        Ok((gradient_norm_sqr(f) - difference_norm_sqr(f)).abs() / f.norm_sqr_sum())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
    let mut root: f64 = 0.0;
    for l in [8, 16, 32] {
        let b = make_box(1, l)?;
        let k = k_multiplier(b);
        for _ in 0..per_box.max(1) * 3 {
            let f = random_field(b, &mut rng);
            let ik = apply(&k, &f)?.scale(Complex64::new(0.0, 1.0));
            root = root.max(partial(&f, 1)?.sub(&ik)?.l2_norm() / f.l2_norm());
        }
    }
    Ok(vec![
        outcome(s, "convolution_equals_multiplier", conv, 1e-11),
        outcome(s, "laplacian_factorization", lap, 1e-11),
        outcome(s, "gradient_norm_identity", grad, 1e-10),
        outcome(s, "square_root_identity_1d", root, 1e-11),
    ])
}

pub fn adjointness(seed: u64, pairs: usize) -> Result<Vec<Outcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut fwd: f64 = 0.0;
    for i in 0..pairs {
        let (d, l) = SWEEP[i % SWEEP.len()];
        let b = make_box(d, l)?;
        let u = random_field(b, &mut rng);
        let v = random_field(b, &mut rng);
        let scale = u.l2_norm() * v.l2_norm();
        for axis in 1..=d {
            let s = inner(&partial(&u, axis)?, &v)? + inner(&u, &partial(&v, axis)?)?;
            worst = worst.max(s.norm() / scale);
            // D_j^* = -D_j shifted by one site: <D u, v> = <u, -(v - v(. - e_j))>
            let du = difference(&u, axis)?;
            let back = Field::from_fn(b, |m| {
                let mut mm = m.to_vec();
                mm[axis - 1] -= 1;
                v.at(m) - v.at(&mm)
            });
            let s = inner(&du, &v)? + inner(&u, &back)?;
            fwd = fwd.max(s.norm() / scale);
        }
    }
    Ok(vec![
        outcome("adjointness", "partial_is_skew_adjoint", worst, 1e-11),
        outcome("adjointness", "difference_adjoint_is_backward_difference", fwd, 1e-11),
    ])
}

/// Free evolution of `delta_0` plus a smooth velocity, 1000 exact steps to `t = 10`.
pub fn conservation() -> Result<Vec<Outcome>> {
    let mut energy: f64 = 0.0;
    let mut strong: f64 = 0.0;
    for (d, l) in [(1, 32), (2, 16)] {
        let b = make_box(d, l)?;
        let f = delta_field(b, &vec![0; d])?;
        let g = Field::from_fn(b, |m| {
            let r2: f64 = m.iter().map(|&x| (x * x) as f64).sum();
            Complex64::new(0.5 * (-r2 / 4.0).exp(), 0.0)
        });
        let mut s = WaveState::new(f, g, 0.0)?;
        let e0 = linear_energy(&s).total;
        let p0 = uprime_norm(&s);
        let prop = LinearPropagator::new(b, 0.01);
        for _ in 0..1000 {
            s = prop.step(&s, None)?;
            energy = energy.max((linear_energy(&s).total / e0 - 1.0).abs());
            strong = strong.max((uprime_norm(&s) - p0).abs());
        }
    }
    Ok(vec![
        outcome("conservation", "linear_energy", energy, 1e-10),
        outcome("conservation", "uprime_norm", strong, 1e-9),
    ])
}

pub fn counterexample() -> Result<Vec<Outcome>> {
    let mut out = Vec::new();
    for d in [1, 2] {
        let r = counterexample_growth(&[16, 32, 64, 128], d)?;
        for c in r.checks {
            out.push(Outcome {
                suite: "counterexample".into(),
                name: format!("{}_d{d}", c.name),
                passed: c.passed,
                value: if c.passed { 0.0 } else { 1.0 },
                tolerance: 0.0,
            });
        }
    }
    Ok(out)
}

pub fn isomorphism(seed: u64, trials: usize) -> Result<Vec<Outcome>> {
    let r = isomorphism_check(seed, trials, 16, 2)?;
    Ok(vec![
        Outcome {
            suite: "isomorphism".into(),
            name: "ratio_lower_bound".into(),
            passed: r.min >= r.lower,
            value: r.min,
            tolerance: r.lower,
        },
        outcome("isomorphism", "ratio_upper_bound", r.max, r.upper),
    ])
}

/// Runs one suite or `all`.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Outcome>> {
    match name {
        "identities" => identities(seed, 4),
        "adjointness" => adjointness(seed, 100),
        "conservation" => conservation(),
        "counterexample" => counterexample(),
        "isomorphism" => isomorphism(seed, 100),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, seed)?);
            }
            Ok(out)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown suite `{other}` (expected one of {}, all)",
            SUITES.join(", ")
        ))),
    }
}
