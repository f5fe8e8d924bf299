//! Time stepping with continuation monitoring.

use super::config::{rk4_stability_bound, BlowupAction, Method, SolverConfig};
use super::integrators::{exact_applicable, lawson_core, rk4_core, PropagatorCache};
use super::picard::{solve_window, PicardDiagnostics};
use super::rhs::RightSide;
use super::spec::{EquationKind, EquationSpec};
use super::trajectory::{BlowUpRecord, Outcome, Sample, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::{Field, WaveState};

/// Trajectory of a Picard run plus its per-window iteration diagnostics.
#[derive(Clone, Debug)]
pub struct PicardRun {
    pub trajectory: Trajectory,
    pub windows: Vec<PicardDiagnostics>,
    /// Every grid state of the converged iterates, in time order.
    pub grid: Vec<WaveState>,
}

struct Stepper<'a> {
    rhs: RightSide<'a>,
    method: Method,
    cache: PropagatorCache,
}

impl Stepper<'_> {
    fn step(&mut self, state: &WaveState, h: f64) -> WaveState {
        let lattice = *state.lattice();
        match self.method {
            Method::ExactLinear => self
                .cache
                .get(lattice, h)
                .step(state, Some(&self.rhs.spec.forcing))
                .expect("same box"),
            Method::ExponentialDuhamel => {
                let prop = self.cache.get(lattice, h);
                lawson_core(&self.rhs, &prop, state)
            }
            Method::Rk4 => rk4_core(&self.rhs, state, h, None).0,
        }
    }

    /// Largest step allowed at this state.
    fn step_cap(&self, state: &WaveState) -> f64 {
        match self.method {
            Method::Rk4 => {
                let jets = self.rhs.jets(&state.u, &state.ut);
                rk4_stability_bound(state.lattice().dim(), self.rhs.coefficient_bound(&jets))
            }
            _ => f64::INFINITY,
        }
    }
}

fn validate(f: &Field, g: &Field, spec: &EquationSpec, config: &SolverConfig) -> Result<()> {
    f.lattice().ensure_same(g.lattice())?;
    spec.validate(f.lattice())?;
    config.validate()?;
    if config.method == Method::ExactLinear && !exact_applicable(spec) {
        return Err(Error::InvalidArgument(
            "exact_linear needs a linear equation without lower-order terms".into(),
        ));
    }
    Ok(())
}

fn finish(
    outcome: Outcome,
    config: &SolverConfig,
) -> Result<Outcome> {
    if let (Outcome::BlowUp(r), BlowupAction::Halt) = (outcome, config.blowup.action) {
        return Err(Error::BlowUp {
            t: r.t,
            sup_u: r.sup_u,
            sup_ut: r.sup_ut,
        });
    }
    Ok(outcome)
}

/// Runs to `t_max` or blow-up.
pub fn evolve(f: &Field, g: &Field, spec: &EquationSpec, config: &SolverConfig) -> Result<Trajectory> {
    evolve_until(f, g, spec, config, |_| false)
}

/// As [`evolve`], stopping at the first sample for which `stop` holds.
pub fn evolve_until(
    f: &Field,
    g: &Field,
    spec: &EquationSpec,
    config: &SolverConfig,
    stop: impl Fn(&Sample) -> bool,
) -> Result<Trajectory> {
    validate(f, g, spec, config)?;
    if spec.kind == EquationKind::Quasilinear && config.picard.is_some() {
        return picard_solve(f, g, spec, config).map(|r| r.trajectory);
    }
    let lattice = *f.lattice();
    let mut stepper = Stepper {
        rhs: RightSide::new(spec, lattice),
        method: config.method,
        cache: PropagatorCache::default(),
    };
    let mut state = WaveState::new(f.clone(), g.clone(), 0.0)?;
    if config.method == Method::Rk4 {
        let cap = stepper.step_cap(&state);
        if config.dt > cap {
            return Err(Error::InvalidArgument(format!(
                "dt = {} exceeds the rk4 stability bound {cap}",
                config.dt
            )));
        }
    }

    let threshold = config.blowup.sup_threshold;
    let mut current = Sample::of(&state, spec, config.k)?;
    let mut samples = vec![current.clone()];
    let mut states = if config.keep_states {
        vec![state.clone()]
    } else {
        Vec::new()
    };
    let mut outcome = Outcome::Completed;
    let mut steps = 0usize;
    let mut h = config.dt;
    let t_end = config.t_max;
    let eps = 1e-9 * config.dt;

    if stop(&current) {
        outcome = Outcome::Stopped;
    }
    while outcome == Outcome::Completed && state.t < t_end - eps {
        let mut h_try = h.min(t_end - state.t).min(stepper.step_cap(&state));
        if t_end - state.t - h_try <= eps {
            h_try = t_end - state.t;
        }
        let base = current.continuation();
        let accepted: Option<(WaveState, f64)> = loop {
            let next = stepper.step(&state, h_try);
            let level = next.u.sup_norm().max(next.ut.sup_norm());
            let sum = next.u.sup_norm() + next.ut.sup_norm();
            let finite = next.is_finite() && level.is_finite();
            if finite && level <= threshold {
                match &config.growth_control {
                    Some(gc) if base > 0.0 && sum > gc.max_growth * base => {
                        if h_try / 2.0 < gc.min_dt {
                            break None;
                        }
                        h_try /= 2.0;
                        continue;
                    }
                    _ => break Some((next, h_try)),
                }
            }
            // Retry over substeps before declaring blow-up.
            let mut rescued = None;
            for j in 1..=config.blowup.halvings {
                let parts = 1usize << j;
                let sub = h_try / parts as f64;
                let mut s = state.clone();
                let mut ok = true;
                for _ in 0..parts {
                    s = stepper.step(&s, sub);
                    let lv = s.u.sup_norm().max(s.ut.sup_norm());
                    if !s.is_finite() || !(lv <= threshold) {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    rescued = Some(s);
                    break;
                }
            }
            match rescued {
                Some(s) => break Some((s, h_try)),
                None => break None,
            }
        };

        match accepted {
            Some((next, used)) => {
                state = next;
                steps += 1;
                if let Some(gc) = &config.growth_control {
                    let sum = state.u.sup_norm() + state.ut.sup_norm();
                    let calm = base == 0.0 || sum <= (1.0 + 0.5 * (gc.max_growth - 1.0)) * base;
                    h = if calm { (used * 2.0).min(config.dt) } else { used };
                }
                let last = state.t >= t_end - eps;
                if steps % config.sample_every == 0 || last {
                    current = Sample::of(&state, spec, config.k)?;
                    samples.push(current.clone());
                    if config.keep_states {
                        states.push(state.clone());
                    }
                    if stop(&current) {
                        outcome = Outcome::Stopped;
                    }
                } else {
                    current = Sample {
                        t: state.t,
                        sup_u: state.u.sup_norm(),
                        sup_ut: state.ut.sup_norm(),
                        ..current
                    };
                }
            }
            None => {
                let last_dt = h_try / (1u64 << config.blowup.halvings) as f64;
                if samples.last().map(|s| s.t) != Some(state.t) {
                    samples.push(Sample::of(&state, spec, config.k)?);
                    if config.keep_states {
                        states.push(state.clone());
                    }
                }
                outcome = Outcome::BlowUp(BlowUpRecord {
                    t: state.t,
                    sup_u: state.u.sup_norm(),
                    sup_ut: state.ut.sup_norm(),
                    last_dt,
                });
            }
        }
    }

    let outcome = finish(outcome, config)?;
    Ok(Trajectory {
        samples,
        states,
        outcome,
        final_state: state,
        steps,
        spec_hash: spec.spec_hash(),
    })
}

/// Picard iteration over consecutive windows. Each iterate is an RK4 solve
/// with the coefficient and source evaluated on the previous iterate; the
/// first iterate freezes them at zero.
pub fn picard_solve(f: &Field, g: &Field, spec: &EquationSpec, config: &SolverConfig) -> Result<PicardRun> {
    f.lattice().ensure_same(g.lattice())?;
    spec.validate(f.lattice())?;
    config.validate()?;
    let picard = config.picard.clone().unwrap_or_default();
    let lattice = *f.lattice();
    let rhs = RightSide::new(spec, lattice);
    let start = WaveState::new(f.clone(), g.clone(), 0.0)?;
    let cap = rk4_stability_bound(lattice.dim(), rhs.coefficient_bound(&rhs.jets(f, g)));
    if config.dt > cap {
        return Err(Error::InvalidArgument(format!(
            "dt = {} exceeds the rk4 stability bound {cap}",
            config.dt
        )));
    }

    let mut window = picard.window.unwrap_or(config.t_max).min(config.t_max.max(config.dt));
    let mut state = start;
    let mut grid = vec![state.clone()];
    let mut windows = Vec::new();
    let eps = 1e-9 * config.dt;
    let mut outcome = Outcome::Completed;
    while state.t < config.t_max - eps {
        let len = window.min(config.t_max - state.t);
        let solution = match solve_window(&rhs, &state, len, config, &picard) {
            Ok(s) => s,
            Err(Error::BlowUp { .. }) if config.blowup.action == BlowupAction::Record => {
                outcome = Outcome::BlowUp(BlowUpRecord {
                    t: state.t,
                    sup_u: state.u.sup_norm(),
                    sup_ut: state.ut.sup_norm(),
                    last_dt: config.dt,
                });
                break;
            }
            Err(e) => return Err(e),
        };
        window = window.min(solution.diagnostics.window);
        windows.push(solution.diagnostics);
        grid.extend(solution.points.iter().skip(1).map(|p| p.state.clone()));
        state = grid.last().expect("nonempty").clone();
    }

    let mut samples = Vec::new();
    let mut states = Vec::new();
    let n = grid.len();
    for (i, s) in grid.iter().enumerate() {
        if i % config.sample_every == 0 || i + 1 == n {
            samples.push(Sample::of(s, spec, config.k)?);
            if config.keep_states {
                states.push(s.clone());
            }
        }
    }
    let outcome = finish(outcome, config)?;
    Ok(PicardRun {
        trajectory: Trajectory {
            samples,
            states,
            outcome,
            final_state: state,
            steps: n - 1,
            spec_hash: spec.spec_hash(),
        },
        windows,
        grid,
    })
}
