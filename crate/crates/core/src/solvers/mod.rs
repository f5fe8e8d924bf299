//! Time evolution for linear, semilinear and quasilinear wave equations on the
//! lattice, by the method of lines. Spatial operators are bounded Fourier
//! multipliers, so the semi-discrete system is an ODE in sequence space.

mod config;
mod evolve;
mod integrators;
mod picard;
mod probes;
mod rhs;
mod spec;
mod trajectory;

pub use config::{
    rk4_stability_bound, BlowupAction, BlowupConfig, GrowthControl, Method, PicardConfig,
    SolverConfig,
};
pub use evolve::{evolve, evolve_until, picard_solve, PicardRun};
pub use integrators::{exact_linear_step, exponential_step, rk4_step, LinearPropagator};
pub use picard::{pde_residual, PicardDiagnostics};
pub use probes::{
    blowup_reference, dyadic_perturbations, lipschitz_dependence_probe, BlowupReference,
    LipschitzReport, LipschitzRow,
};
pub use spec::{
    hash_hex, CustomForcing, CustomMetric, CustomSource, EquationKind, EquationSpec, Forcing,
    Jet, LowerOrder, Metric, MetricMatrix, Nonlinearity,
};
pub use trajectory::{BlowUpRecord, Outcome, Sample, Trajectory};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_box, Field, LatticeBox};
    use num_complex::Complex64;

    fn bump(lattice: LatticeBox, amp: f64, width: f64) -> Field {
        Field::from_fn(lattice, |m| {
            let r2: f64 = m.iter().map(|&x| (x * x) as f64).sum();
            Complex64::new(amp * (-r2 / (width * width)).exp(), 0.0)
        })
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let b = make_box(1, 16).unwrap();
        let z = Field::zeros(b);
        for spec in [
            EquationSpec::power(1.0, 3.0),
            EquationSpec::quasilinear(Metric::Conformal { c0: 1.0, c1: 0.0, c2: 1.0 }, Nonlinearity::DtSquared),
        ] {
            let t = evolve(&z, &z, &spec, &SolverConfig::new(0.1, 1.0, Method::Rk4)).unwrap();
            assert_eq!(t.final_state.u.sup_norm(), 0.0);
            assert!(t.samples.iter().all(|s| s.sup_u == 0.0 && s.sup_ut == 0.0));
        }
    }

    #[test]
    fn exact_linear_requires_a_linear_equation() {
        let b = make_box(1, 8).unwrap();
        let z = Field::zeros(b);
        let cfg = SolverConfig::new(0.1, 1.0, Method::ExactLinear);
        assert!(evolve(&z, &z, &EquationSpec::power(-1.0, 3.0), &cfg).is_err());
        let t = evolve(&z, &z, &EquationSpec::linear(), &cfg).unwrap();
        assert_eq!(t.steps, 10);
        assert!(t.is_time_ordered());
        assert!((t.last().t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn defocusing_run_conserves_energy() {
        let b = make_box(1, 32).unwrap();
        let f = bump(b, 1.0, 3.0);
        let g = Field::zeros(b);
        let spec = EquationSpec::power(-1.0, 3.0);
        let mut cfg = SolverConfig::new(0.02, 5.0, Method::Rk4);
        cfg.sample_every = 10;
        let t = evolve(&f, &g, &spec, &cfg).unwrap();
        assert_eq!(t.outcome, Outcome::Completed);
        assert!(t.energy_drift() < 1e-7, "{}", t.energy_drift());
        let lw = evolve(&f, &g, &spec, &SolverConfig { method: Method::ExponentialDuhamel, ..cfg }).unwrap();
        assert!(lw.energy_drift() < 1e-7, "{}", lw.energy_drift());
        assert!(lw.final_state.u.max_abs_diff(&t.final_state.u).unwrap() < 1e-6);
    }

    #[test]
    fn focusing_constant_data_blows_up_near_t0() {
        let b = make_box(1, 8).unwrap();
        let r = blowup_reference(3.0, 1.0).unwrap();
        let (f, g) = r.data(b);
        let mut cfg = SolverConfig::new(0.01, 2.0, Method::Rk4);
        cfg.growth_control = Some(GrowthControl { max_growth: 1.1, min_dt: 1e-12 });
        let t = evolve(&f, &g, &EquationSpec::power(1.0, 3.0), &cfg).unwrap();
        let rec = t.blowup().expect("blow-up");
        assert!((rec.t - 1.0).abs() < 0.02, "t = {}", rec.t);
        // trajectory follows the closed form well before t0
        let s = t.samples.iter().find(|s| s.t > 0.5).unwrap();
        assert!((s.sup_u - r.u(s.t)).abs() < 1e-6 * r.u(s.t));

        cfg.blowup.action = BlowupAction::Halt;
        assert!(matches!(
            evolve(&f, &g, &EquationSpec::power(1.0, 3.0), &cfg),
            Err(crate::Error::BlowUp { .. })
        ));
    }

    #[test]
    fn picard_linear_is_trivial() {
        let b = make_box(1, 16).unwrap();
        let f = bump(b, 0.1, 2.0);
        let g = Field::zeros(b);
        let mut cfg = SolverConfig::new(0.05, 1.0, Method::Rk4);
        cfg.picard = Some(PicardConfig::default());
        let run = picard_solve(&f, &g, &EquationSpec::linear(), &cfg).unwrap();
        let h = &run.windows[0].history;
        assert_eq!(h.len(), 2);
        assert_eq!(h[1], 0.0);
    }

    #[test]
    fn picard_small_data_contracts_and_matches_rk4() {
        let b = make_box(1, 32).unwrap();
        let f = bump(b, 1e-2, 3.0);
        let g = Field::zeros(b);
        let spec = EquationSpec::quasilinear(
            Metric::Conformal { c0: 1.0, c1: 0.0, c2: 1.0 },
            Nonlinearity::None,
        );
        let mut cfg = SolverConfig::new(0.01, 1.0, Method::Rk4);
        cfg.picard = Some(PicardConfig::default());
        let run = picard_solve(&f, &g, &spec, &cfg).unwrap();
        let diag = &run.windows[0];
        assert!(*diag.history.last().unwrap() < 1e-10);
        let ratios = diag.ratios();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
        assert!(pde_residual(&run.grid, &spec).unwrap() < 1e-6);

        cfg.picard = None;
        let direct = evolve(&f, &g, &spec, &cfg).unwrap();
        let gap = direct.final_state.u.max_abs_diff(&run.trajectory.final_state.u).unwrap();
        assert!(gap < 1e-9, "{gap}");
    }

    #[test]
    fn lipschitz_ratio_for_linear_equation_is_constant() {
        let b = make_box(1, 16).unwrap();
        let f = bump(b, 0.5, 2.0);
        let g = Field::zeros(b);
        let df = bump(b, 0.1, 1.0);
        let perts = dyadic_perturbations(&df, &Field::zeros(b), 4);
        let cfg = SolverConfig::new(0.05, 1.0, Method::ExactLinear);
        let rep = lipschitz_dependence_probe(&f, &g, &perts, &EquationSpec::linear(), &cfg).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert!(rep.spread < 1e-9, "{}", rep.spread);
        // the free group is bounded on l2 x l2 by 1 + sup|K| + ...
        assert!(rep.max_ratio < 4.0);
    }
}
