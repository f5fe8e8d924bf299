//! Closed-form blow-up profile and continuous-dependence probe.

use num_complex::Complex64;
use serde::Serialize;

use super::config::SolverConfig;
use super::evolve::evolve;
use super::spec::EquationSpec;
use crate::energy::energy_a;
use crate::error::{Error, Result};
use crate::lattice::{Field, LatticeBox, WaveState};
use crate::norms::{lp_alpha_norm, NormSpec};

/// `u(t) = C_p (t0 - t)^{-2/(p-1)}`, a spatially constant solution of
/// `u_tt = u^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlowupReference {
    pub p: f64,
    pub t0: f64,
    pub cp: f64,
    pub u0: f64,
    pub ut0: f64,
}

impl BlowupReference {
    fn exponent(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    pub fn u(&self, t: f64) -> f64 {
        self.cp * (self.t0 - t).powf(-self.exponent())
    }

    pub fn ut(&self, t: f64) -> f64 {
        self.exponent() * self.cp * (self.t0 - t).powf(-self.exponent() - 1.0)
    }

    pub fn utt(&self, t: f64) -> f64 {
        let a = self.exponent();
        a * (a + 1.0) * self.cp * (self.t0 - t).powf(-a - 2.0)
    }

    /// Constant initial data `(u(0), u_t(0))` on a box.
    pub fn data(&self, lattice: LatticeBox) -> (Field, Field) {
        (
            Field::constant(lattice, Complex64::new(self.u0, 0.0)),
            Field::constant(lattice, Complex64::new(self.ut0, 0.0)),
        )
    }
}

pub fn blowup_reference(p: f64, t0: f64) -> Result<BlowupReference> {
    if !(p > 1.0) || !(t0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "blow-up profile needs p > 1 and t0 > 0 (got p = {p}, t0 = {t0})"
        )));
    }
    let cp = (2.0 * (p + 1.0) / (p - 1.0).powi(2)).powf(1.0 / (p - 1.0));
    let mut r = BlowupReference {
        p,
        t0,
        cp,
        u0: 0.0,
        ut0: 0.0,
    };
    r.u0 = r.u(0.0);
    r.ut0 = r.ut(0.0);
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LipschitzRow {
    /// `||(df, dg)||_{l^{2,k}}`.
    pub size: f64,
    /// `sup_t A(u_delta - u) / size`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub rows: Vec<LipschitzRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// `max_ratio / min_ratio - 1`.
    pub spread: f64,
}

/// `(scale^j df, scale^j dg)` for `j = 0..levels`, with `scale = 1/2`.
pub fn dyadic_perturbations(df: &Field, dg: &Field, levels: usize) -> Vec<(Field, Field)> {
    (0..levels)
        .map(|j| {
            let s = 0.5f64.powi(j as i32);
            (df.scale_real(s), dg.scale_real(s))
        })
        .collect()
}

/// Compares the run from `(f, g)` with runs from perturbed data. The distance
/// is `sup_t (||u_delta - u||_{l^{2,k}} + ||u_delta_t - u_t||_{l^{2,k}})` over
/// common sample times; zero perturbations are skipped.
pub fn lipschitz_dependence_probe(
    f: &Field,
    g: &Field,
    perturbations: &[(Field, Field)],
    spec: &EquationSpec,
    config: &SolverConfig,
) -> Result<LipschitzReport> {
    let mut cfg = config.clone();
    cfg.keep_states = true;
    cfg.growth_control = None;
    let base = evolve(f, g, spec, &cfg)?;
    if base.blew_up() {
        return Err(Error::InvalidArgument("unperturbed run blew up inside the window".into()));
    }
    let norm = NormSpec::l2_weighted(config.k);
    let mut rows = Vec::new();
    for (df, dg) in perturbations {
        let size = lp_alpha_norm(df, norm) + lp_alpha_norm(dg, norm);
        if size == 0.0 {
            continue;
        }
        let run = evolve(&f.add(df)?, &g.add(dg)?, spec, &cfg)?;
        if run.blew_up() {
            return Err(Error::InvalidArgument(format!(
                "perturbed run of size {size:e} blew up inside the window"
            )));
        }
        let mut sup: f64 = 0.0;
        for (a, b) in run.states.iter().zip(&base.states) {
            let diff = WaveState::new(a.u.sub(&b.u)?, a.ut.sub(&b.ut)?, a.t)?;
            sup = sup.max(energy_a(&diff, config.k)?.value);
        }
        rows.push(LipschitzRow {
            size,
            ratio: sup / size,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(LipschitzReport {
        rows,
        max_ratio,
        min_ratio,
        spread: max_ratio / min_ratio - 1.0,
    })
}
