//! Energy functionals and the energy estimates used by the solvers.

use serde::Serialize;

use crate::calculus::difference;
use crate::error::{Error, Result};
use crate::lattice::{Field, WaveState};
use crate::norms::{lp_alpha_norm, NormSpec};
use crate::spectral::{dft_forward, k_values};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub gradient: f64,
    pub potential: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(kinetic: f64, gradient: f64, potential: f64) -> Self {
        Self {
            kinetic,
            gradient,
            potential,
            total: kinetic + gradient + potential,
        }
    }
}

/// `sum_j ||partial_j u||^2`, evaluated as `L^{-d} sum_n K(n)^2 |F u(n)|^2`.
pub fn gradient_norm_sqr(u: &Field) -> f64 {
    let spec = dft_forward(u);
    let k = k_values(*u.lattice());
    spec.coeffs()
        .iter()
        .zip(&k)
        .map(|(z, kv)| kv * kv * z.norm_sqr())
        .sum::<f64>()
        / u.lattice().total() as f64
}

/// `sum_j ||D_j u||^2` with the local forward difference.
pub fn difference_norm_sqr(u: &Field) -> f64 {
    (1..=u.lattice().dim())
        .map(|axis| difference(u, axis).expect("axis in range").norm_sqr_sum())
        .sum()
}

/// `1/2 sum (|u_t|^2 + |partial u|^2)`.
pub fn linear_energy(state: &WaveState) -> EnergyBreakdown {
    EnergyBreakdown::new(
        0.5 * state.ut.norm_sqr_sum(),
        0.5 * gradient_norm_sqr(&state.u),
        0.0,
    )
}

/// Conserved energy of `u_tt - Delta u = mu |u|^{p-1} u`:
/// linear part plus `-mu sum |u|^{p+1} / (p+1)`.
pub fn nlw_energy(state: &WaveState, mu: f64, p: f64) -> Result<EnergyBreakdown> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("power p = {p} must exceed 1")));
    }
    let lin = linear_energy(state);
    let potential = -mu
        * state
            .u
            .values()
            .iter()
            .map(|z| z.norm().powf(p + 1.0))
            .sum::<f64>()
        / (p + 1.0);
    Ok(EnergyBreakdown::new(lin.kinetic, lin.gradient, potential))
}

/// `A(t) = ||u||_{l^{2,k}} + ||u_t||_{l^{2,k}}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyA {
    pub k: u8,
    pub value: f64,
}

pub fn check_weight_index(k: u8) -> Result<()> {
    if k > 1 {
        Err(Error::InvalidArgument(format!("weight index k = {k} not in {{0, 1}}")))
    } else {
        Ok(())
    }
}

pub fn energy_a(state: &WaveState, k: u8) -> Result<EnergyA> {
    check_weight_index(k)?;
    let spec = NormSpec::l2_weighted(k);
    Ok(EnergyA {
        k,
        value: lp_alpha_norm(&state.u, spec) + lp_alpha_norm(&state.ut, spec),
    })
}

/// `||u'||_{l^2}` for `u' = (u_t, partial u)`.
pub fn uprime_norm(state: &WaveState) -> f64 {
    (state.ut.norm_sqr_sum() + gradient_norm_sqr(&state.u)).sqrt()
}

/// Trapezoid integral of `(t_i, y_i)` samples over `[t_0, t]`, interpolating
/// linearly inside the last interval. Samples must have increasing `t`.
pub fn trapezoid_until(series: &[(f64, f64)], t: f64) -> f64 {
    let mut acc = 0.0;
    for w in series.windows(2) {
        let (t0, y0) = w[0];
        let (t1, y1) = w[1];
        if t0 >= t {
            break;
        }
        if t1 <= t {
            acc += 0.5 * (t1 - t0) * (y0 + y1);
        } else {
            let y = y0 + (y1 - y0) * (t - t0) / (t1 - t0);
            acc += 0.5 * (t - t0) * (y0 + y);
            break;
        }
    }
    acc
}

/// `(1 + |t|^{k+1}) [||f||_{l^{2,k}} + ||g||_{l^{2,k}} + int_0^t ||F||_{l^{2,k}}]`.
pub fn estimate_rhs_explicit(
    f: &Field,
    g: &Field,
    forcing_norms: &[(f64, f64)],
    t: f64,
    k: u8,
) -> Result<f64> {
    check_weight_index(k)?;
    let spec = NormSpec::l2_weighted(k);
    let bracket =
        lp_alpha_norm(f, spec) + lp_alpha_norm(g, spec) + trapezoid_until(forcing_norms, t);
    Ok((1.0 + t.abs().powi(k as i32 + 1)) * bracket)
}

/// Implicit (Gronwall) bound split into its factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImplicitBound {
    /// `A(0) + int_0^t ||box_g u||`.
    pub base: f64,
    /// `int_0^t (sum_{jk} ||g^{jk}||_inf + 1)`.
    pub exponent_integral: f64,
    pub c: f64,
    pub exp_factor: f64,
    pub value: f64,
}

/// `(A0 + int ||box_g u||) exp(C int (sum ||g^{jk}||_inf + 1))`.
pub fn estimate_rhs_implicit(
    a0: f64,
    forcing_norms: &[(f64, f64)],
    gjk_sup_norms: &[(f64, f64)],
    t: f64,
    c: f64,
) -> ImplicitBound {
    let base = a0 + trapezoid_until(forcing_norms, t);
    let shifted: Vec<(f64, f64)> = gjk_sup_norms.iter().map(|&(s, g)| (s, g + 1.0)).collect();
    let exponent_integral = trapezoid_until(&shifted, t);
    let exp_factor = (c * exponent_integral).exp();
    ImplicitBound {
        base,
        exponent_integral,
        c,
        exp_factor,
        value: base * exp_factor,
    }
}

/// Smallest `C` with `measured_i <= C * bound_i` for every pair (pairs with a
/// zero bound must have zero measurement).
pub fn fit_multiplicative_constant(pairs: &[(f64, f64)]) -> Option<f64> {
    let mut c = 0.0f64;
    for &(measured, bound) in pairs {
        if bound > 0.0 {
            c = c.max(measured / bound);
        } else if measured > 0.0 {
            return None;
        }
    }
    Some(c)
}

/// Smallest `C >= 0` with `A_i <= base_i exp(C x_i)` for samples `(A_i, base_i, x_i)`.
pub fn fit_exponent_constant(samples: &[(f64, f64, f64)]) -> Option<f64> {
    let mut c = 0.0f64;
    for &(a, base, x) in samples {
        if a <= base {
            continue;
        }
        if base <= 0.0 || x <= 0.0 {
            return None;
        }
        c = c.max((a / base).ln() / x);
    }
    Some(c)
}

/// One time sample for [`strong_energy_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StrongSample {
    pub t: f64,
    pub uprime_norm: f64,
    /// `||box u(t)||_{l^2}`, the forcing of the d'Alembertian.
    pub box_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StrongRow {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrongEnergyReport {
    pub rows: Vec<StrongRow>,
    pub all_hold: bool,
    pub min_slack: f64,
}

/// Checks `||u'(t)|| <= ||u'(0)|| + int_0^t ||box u||` (constant one) at every
/// sample, allowing `tol` for quadrature.
pub fn strong_energy_check(samples: &[StrongSample], tol: f64) -> StrongEnergyReport {
    let Some(first) = samples.first() else {
        return StrongEnergyReport {
            rows: Vec::new(),
            all_hold: true,
            min_slack: 0.0,
        };
    };
    let forcing: Vec<(f64, f64)> = samples.iter().map(|s| (s.t, s.box_norm)).collect();
    let rows: Vec<StrongRow> = samples
        .iter()
        .map(|s| {
            let rhs = first.uprime_norm + trapezoid_until(&forcing, s.t);
            let slack = rhs - s.uprime_norm;
            StrongRow {
                t: s.t,
                lhs: s.uprime_norm,
                rhs,
                slack,
                holds: slack >= -tol,
            }
        })
        .collect();
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    StrongEnergyReport {
        all_hold: rows.iter().all(|r| r.holds),
        rows,
        min_slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{delta_field, make_box};
    use num_complex::Complex64;

    #[test]
    fn linear_energy_examples() {
        let b = make_box(1, 16).unwrap();
        assert_eq!(linear_energy(&WaveState::zeros(b)).total, 0.0);
        let d0 = delta_field(b, &[0]).unwrap();
        let s = WaveState::new(Field::zeros(b), d0.clone(), 0.0).unwrap();
        assert!((linear_energy(&s).total - 0.5).abs() < 1e-15);
        let s = WaveState::new(d0.clone(), Field::zeros(b), 0.0).unwrap();
        let e = linear_energy(&s);
        assert!((e.gradient - 1.0).abs() < 1e-14);
        assert_eq!(0.5 * difference_norm_sqr(&d0), 1.0);
    }

    #[test]
    fn nlw_energy_examples() {
        let b = make_box(1, 8).unwrap();
        assert_eq!(nlw_energy(&WaveState::zeros(b), 1.0, 3.0).unwrap().total, 0.0);
        let c = 0.7;
        let s = WaveState::new(
            Field::constant(b, Complex64::new(c, 0.0)),
            Field::zeros(b),
            0.0,
        )
        .unwrap();
        let e = nlw_energy(&s, 1.0, 3.0).unwrap();
        assert!((e.total + 2.0 * c.powi(4)).abs() < 1e-14);
        assert!(nlw_energy(&s, -1.0, 3.0).unwrap().potential > 0.0);
        assert!(nlw_energy(&s, 1.0, 1.0).is_err());
    }

    #[test]
    fn energy_a_examples() {
        let b = make_box(2, 8).unwrap();
        assert_eq!(energy_a(&WaveState::zeros(b), 1).unwrap().value, 0.0);
        let d0 = delta_field(b, &[0, 0]).unwrap();
        let s = WaveState::new(d0.clone(), Field::zeros(b), 0.0).unwrap();
        assert_eq!(energy_a(&s, 1).unwrap().value, 1.0);
        let s2 = WaveState::new(d0.clone(), delta_field(b, &[1, 2]).unwrap(), 0.0).unwrap();
        let a = energy_a(&s2, 1).unwrap().value;
        let scaled = energy_a(&s2.scale(Complex64::new(0.0, -3.0)), 1).unwrap().value;
        assert!((scaled - 3.0 * a).abs() < 1e-14);
        assert!(energy_a(&s, 2).is_err());
    }

    #[test]
    fn explicit_bound_examples() {
        let b = make_box(1, 8).unwrap();
        let z = Field::zeros(b);
        assert_eq!(estimate_rhs_explicit(&z, &z, &[], 3.0, 0).unwrap(), 0.0);
        let f = delta_field(b, &[0]).unwrap();
        let g = delta_field(b, &[2]).unwrap().scale_real(2.0);
        assert_eq!(estimate_rhs_explicit(&f, &g, &[], 0.0, 0).unwrap(), 3.0);
        let forcing = [(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)];
        let v = estimate_rhs_explicit(&f, &z, &forcing, 2.0, 1).unwrap();
        assert!((v - 5.0 * 3.0).abs() < 1e-14);
    }

    #[test]
    fn implicit_bound_examples() {
        let zero_g = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)];
        let b = estimate_rhs_implicit(2.0, &[], &zero_g, 2.0, 0.5);
        assert!((b.value - 2.0 * (0.5f64 * 2.0).exp()).abs() < 1e-14);
        let mut last = 0.0;
        for i in 0..=20 {
            let v = estimate_rhs_implicit(1.0, &[(0.0, 1.0), (2.0, 1.0)], &zero_g, 0.1 * i as f64, 1.0)
                .value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn trapezoid_interpolates() {
        let s = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)];
        assert!((trapezoid_until(&s, 2.0) - 2.0).abs() < 1e-15);
        assert!((trapezoid_until(&s, 1.5) - 1.125).abs() < 1e-15);
        assert_eq!(trapezoid_until(&s, 0.0), 0.0);
    }

    #[test]
    fn fits() {
        assert_eq!(fit_multiplicative_constant(&[(1.0, 2.0), (3.0, 2.0)]), Some(1.5));
        assert_eq!(fit_multiplicative_constant(&[(1.0, 0.0)]), None);
        let c = fit_exponent_constant(&[(1.0, 1.0, 0.0), (std::f64::consts::E, 1.0, 0.5)]).unwrap();
        assert!((c - 2.0).abs() < 1e-14);
    }

    #[test]
    fn strong_check_zero_and_constant() {
        let rep = strong_energy_check(
            &[
                StrongSample { t: 0.0, uprime_norm: 0.0, box_norm: 0.0 },
                StrongSample { t: 1.0, uprime_norm: 0.0, box_norm: 0.0 },
            ],
            0.0,
        );
        assert!(rep.all_hold);
        let rep = strong_energy_check(
            &[
                StrongSample { t: 0.0, uprime_norm: 1.0, box_norm: 0.0 },
                StrongSample { t: 1.0, uprime_norm: 1.5, box_norm: 0.0 },
            ],
            1e-6,
        );
        assert!(!rep.all_hold);
        assert!((rep.min_slack + 0.5).abs() < 1e-15);
    }
}
