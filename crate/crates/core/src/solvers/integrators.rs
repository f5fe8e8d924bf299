//! One-step maps: exact propagator, Lawson exponential RK4 and classical RK4.

use std::collections::HashMap;
use std::rc::Rc;

use num_complex::Complex64;

use super::config::rk4_stability_bound;
use super::rhs::RightSide;
use super::spec::{EquationKind, EquationSpec, Forcing, Jet};
use crate::error::{Error, Result};
use crate::lattice::{Field, LatticeBox, WaveState};
use crate::spectral::{dft_forward, dft_inverse, k_values, sinc_t, SpectralField};

/// Free propagator symbols for steps `h` and `h/2`.
#[derive(Clone, Debug)]
pub struct LinearPropagator {
    lattice: LatticeBox,
    h: f64,
    ksq: Vec<f64>,
    cos_full: Vec<f64>,
    sinc_full: Vec<f64>,
    cos_half: Vec<f64>,
    sinc_half: Vec<f64>,
}

fn combine(a: &[Complex64], ca: &[f64], b: &[Complex64], cb: &[f64]) -> Vec<Complex64> {
    a.iter()
        .zip(ca)
        .zip(b.iter().zip(cb))
        .map(|((x, p), (y, q))| x * p + y * q)
        .collect()
}

fn spectral(lattice: LatticeBox, coeffs: Vec<Complex64>) -> Field {
    dft_inverse(&SpectralField::from_coeffs(lattice, coeffs).expect("same box"))
}

impl LinearPropagator {
    pub fn new(lattice: LatticeBox, h: f64) -> Self {
        let k = k_values(lattice);
        Self {
            lattice,
            h,
            ksq: k.iter().map(|x| x * x).collect(),
            cos_full: k.iter().map(|x| (h * x).cos()).collect(),
            sinc_full: k.iter().map(|&x| sinc_t(h, x)).collect(),
            cos_half: k.iter().map(|x| (0.5 * h * x).cos()).collect(),
            sinc_half: k.iter().map(|&x| sinc_t(0.5 * h, x)).collect(),
        }
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    fn evolve_hat(
        &self,
        u: &[Complex64],
        v: &[Complex64],
        half: bool,
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        let (c, s) = if half {
            (&self.cos_half, &self.sinc_half)
        } else {
            (&self.cos_full, &self.sinc_full)
        };
        let ks: Vec<f64> = self.ksq.iter().zip(s).map(|(k2, s)| -k2 * s).collect();
        (combine(u, c, v, s), combine(u, &ks, v, c))
    }

    /// Free evolution of `(u, v)` by `h` (or `h/2`).
    fn propagate(&self, u: &Field, v: &Field, half: bool) -> (Field, Field) {
        let uh = dft_forward(u);
        let vh = dft_forward(v);
        let (a, b) = self.evolve_hat(uh.coeffs(), vh.coeffs(), half);
        (spectral(self.lattice, a), spectral(self.lattice, b))
    }

    /// Exact homogeneous step; the Duhamel integral of the forcing uses
    /// Simpson's rule on `(t, t + h/2, t + h)`.
    pub fn step(&self, state: &WaveState, forcing: Option<&Forcing>) -> Result<WaveState> {
        self.lattice.ensure_same(state.lattice())?;
        let h = self.h;
        let uh = dft_forward(&state.u);
        let vh = dft_forward(&state.ut);
        let (mut u1, mut v1) = self.evolve_hat(uh.coeffs(), vh.coeffs(), false);
        if let Some(forcing) = forcing.filter(|f| !f.is_none()) {
            let sample = |t: f64| -> Vec<Complex64> {
                match forcing.at(t, &self.lattice) {
                    Some(f) => dft_forward(&f).coeffs().to_vec(),
                    None => vec![Complex64::default(); self.lattice.total()],
                }
            };
            let f0 = sample(state.t);
            let fm = sample(state.t + 0.5 * h);
            let f1 = sample(state.t + h);
            let w = h / 6.0;
            for i in 0..u1.len() {
                u1[i] += (f0[i] * self.sinc_full[i] + fm[i] * (4.0 * self.sinc_half[i])) * w;
                v1[i] += (f0[i] * self.cos_full[i] + fm[i] * (4.0 * self.cos_half[i]) + f1[i]) * w;
            }
        }
        Ok(WaveState {
            u: spectral(self.lattice, u1),
            ut: spectral(self.lattice, v1),
            t: state.t + h,
        })
    }
}

/// Advances a linear state by `dt` with the exact free propagator.
pub fn exact_linear_step(state: &WaveState, dt: f64, forcing: Option<&Forcing>) -> Result<WaveState> {
    LinearPropagator::new(*state.lattice(), dt).step(state, forcing)
}

/// Propagators keyed by step size, rebuilt only when `h` changes.
#[derive(Debug, Default)]
pub(crate) struct PropagatorCache {
    cache: HashMap<u64, Rc<LinearPropagator>>,
}

impl PropagatorCache {
    pub(crate) fn get(&mut self, lattice: LatticeBox, h: f64) -> Rc<LinearPropagator> {
        self.cache
            .entry(h.to_bits())
            .or_insert_with(|| Rc::new(LinearPropagator::new(lattice, h)))
            .clone()
    }
}

/// Frozen coefficient jets at the RK4 stage times `t`, `t + h/2`, `t + h`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct StageJets<'j> {
    pub start: &'j [Jet],
    pub mid: &'j [Jet],
    pub end: &'j [Jet],
}

fn lin(a: &Field, c: f64, b: &Field) -> Field {
    a.axpy(c, b).expect("same box")
}

/// Classical RK4 on `(u, v)`; also returns the acceleration at the start.
pub(crate) fn rk4_core(
    rhs: &RightSide<'_>,
    state: &WaveState,
    h: f64,
    frozen: Option<StageJets<'_>>,
) -> (WaveState, Field) {
    let t = state.t;
    let (u, v) = (&state.u, &state.ut);
    let acc = |uu: &Field, vv: &Field, tt: f64, jets: Option<&[Jet]>| {
        rhs.acceleration(uu, vv, tt, jets)
    };
    let a1 = acc(u, v, t, frozen.map(|f| f.start));
    let u2 = lin(u, 0.5 * h, v);
    let v2 = lin(v, 0.5 * h, &a1);
    let a2 = acc(&u2, &v2, t + 0.5 * h, frozen.map(|f| f.mid));
    let u3 = lin(u, 0.5 * h, &v2);
    let v3 = lin(v, 0.5 * h, &a2);
    let a3 = acc(&u3, &v3, t + 0.5 * h, frozen.map(|f| f.mid));
    let u4 = lin(u, h, &v3);
    let v4 = lin(v, h, &a3);
    let a4 = acc(&u4, &v4, t + h, frozen.map(|f| f.end));

    let w = h / 6.0;
    let un = u
        .zip_map(v, |x, y| x + y * w)
        .and_then(|f| f.zip_map(&v2, |x, y| x + y * (2.0 * w)))
        .and_then(|f| f.zip_map(&v3, |x, y| x + y * (2.0 * w)))
        .and_then(|f| f.zip_map(&v4, |x, y| x + y * w))
        .expect("same box");
    let vn = v
        .zip_map(&a1, |x, y| x + y * w)
        .and_then(|f| f.zip_map(&a2, |x, y| x + y * (2.0 * w)))
        .and_then(|f| f.zip_map(&a3, |x, y| x + y * (2.0 * w)))
        .and_then(|f| f.zip_map(&a4, |x, y| x + y * w))
        .expect("same box");
    (
        WaveState {
            u: un,
            ut: vn,
            t: t + h,
        },
        a1,
    )
}

/// Fourth-order Lawson step: RK4 on the interaction picture of the free
/// wave group, so the linear part is integrated exactly.
pub(crate) fn lawson_core(rhs: &RightSide<'_>, prop: &LinearPropagator, state: &WaveState) -> WaveState {
    let h = prop.step_size();
    let t = state.t;
    let zero = Field::zeros(*state.lattice());
    let remainder = |u: &Field, v: &Field, tt: f64| -> Field {
        let a = rhs.acceleration(u, v, tt, None);
        let lap = rhs.symbols.laplacian(&dft_forward(u));
        a.sub(&lap).expect("same box")
    };
    let (u, v) = (&state.u, &state.ut);

    let n1 = remainder(u, v, t);
    let (u2, v2) = prop.propagate(u, &lin(v, 0.5 * h, &n1), true);
    let n2 = remainder(&u2, &v2, t + 0.5 * h);
    let (uh, vh) = prop.propagate(u, v, true);
    let (u3, v3) = (uh.clone(), lin(&vh, 0.5 * h, &n2));
    let n3 = remainder(&u3, &v3, t + 0.5 * h);
    let (uf, vf) = prop.propagate(u, v, false);
    let (pu3, pv3) = prop.propagate(&zero, &n3, true);
    let u4 = lin(&uf, h, &pu3);
    let v4 = lin(&vf, h, &pv3);
    let n4 = remainder(&u4, &v4, t + h);

    let (pu1, pv1) = prop.propagate(&zero, &n1, false);
    let n23 = n2.add(&n3).expect("same box");
    let (pu23, pv23) = prop.propagate(&zero, &n23, true);
    let w = h / 6.0;
    let un = lin(&lin(&uf, w, &pu1), 2.0 * w, &pu23);
    let vn = lin(&lin(&lin(&vf, w, &pv1), 2.0 * w, &pv23), w, &n4);
    WaveState { u: un, ut: vn, t: t + h }
}

fn check_finite(state: WaveState) -> Result<WaveState> {
    if state.is_finite() {
        Ok(state)
    } else {
        Err(Error::BlowUp {
            t: state.t,
            sup_u: state.u.sup_norm(),
            sup_ut: state.ut.sup_norm(),
        })
    }
}

/// One classical RK4 step of the full equation. Rejects steps above the
/// stability bound `0.5 / sqrt(d G)` with `G = sup sum |g^{jk}|` at the
/// current state.
pub fn rk4_step(state: &WaveState, dt: f64, spec: &EquationSpec) -> Result<WaveState> {
    let lattice = *state.lattice();
    spec.validate(&lattice)?;
    let rhs = RightSide::new(spec, lattice);
    let g_hat = rhs.coefficient_bound(&rhs.jets(&state.u, &state.ut));
    let bound = rk4_stability_bound(lattice.dim(), g_hat);
    if !(dt > 0.0) || dt > bound {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} outside the rk4 stability bound {bound}"
        )));
    }
    check_finite(rk4_core(&rhs, state, dt, None).0)
}

/// One Lawson exponential RK4 step.
pub fn exponential_step(state: &WaveState, dt: f64, spec: &EquationSpec) -> Result<WaveState> {
    let lattice = *state.lattice();
    spec.validate(&lattice)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let rhs = RightSide::new(spec, lattice);
    check_finite(lawson_core(&rhs, &LinearPropagator::new(lattice, dt), state))
}

/// Whether the exact propagator covers this equation.
pub(crate) fn exact_applicable(spec: &EquationSpec) -> bool {
    spec.kind == EquationKind::Linear
        && spec.metric.is_identity()
        && spec.nonlinearity.is_none()
        && spec.lower_order.is_zero()
}
