//! Picard iteration with coefficients frozen at the previous iterate.

use serde::Serialize;

use super::config::{PicardConfig, SolverConfig};
use super::integrators::{rk4_core, StageJets};
use super::rhs::RightSide;
use super::spec::{EquationSpec, Jet};
use crate::energy::energy_a;
use crate::error::{Error, Result};
use crate::lattice::{Field, WaveState};

/// One grid point of an iterate: state and its acceleration.
#[derive(Clone, Debug)]
pub(crate) struct GridPoint {
    pub state: WaveState,
    pub acc: Field,
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardDiagnostics {
    /// `sup_t C_m` for `m = 0, 1, ...`, with `u_{-1} = 0`.
    pub history: Vec<f64>,
    /// Window length that contracted.
    pub window: f64,
    /// Windows abandoned because the iteration did not contract.
    pub halvings: usize,
}

impl PicardDiagnostics {
    /// `C_{m+1} / C_m`.
    pub fn ratios(&self) -> Vec<f64> {
        self.history.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

pub(crate) struct WindowSolution {
    pub points: Vec<GridPoint>,
    pub diagnostics: PicardDiagnostics,
}

enum Attempt {
    Converged(Vec<GridPoint>, Vec<f64>),
    NotContracting(Vec<f64>),
}

/// Hermite midpoint of a cubic through `(y0, y0')`, `(y1, y1')` over `h`.
fn hermite_mid(y0: &Field, d0: &Field, y1: &Field, d1: &Field, h: f64) -> Field {
    let avg = y0.add(y1).expect("same box").scale_real(0.5);
    let slope = d0.sub(d1).expect("same box");
    avg.axpy(h / 8.0, &slope).expect("same box")
}

struct FrozenJets {
    nodes: Vec<Vec<Jet>>,
    mids: Vec<Vec<Jet>>,
}

fn frozen_from(rhs: &RightSide<'_>, prev: Option<&[GridPoint]>, start: &WaveState, steps: usize, h: f64) -> FrozenJets {
    match prev {
        None => {
            let zero = Field::zeros(*start.lattice());
            let z = rhs.jets(&zero, &zero);
            FrozenJets {
                nodes: vec![z.clone(); steps + 1],
                mids: vec![z; steps],
            }
        }
        Some(points) => {
            let nodes = points
                .iter()
                .map(|p| rhs.jets(&p.state.u, &p.state.ut))
                .collect();
            let mids = points
                .windows(2)
                .map(|w| {
                    let (a, b) = (&w[0], &w[1]);
                    let u = hermite_mid(&a.state.u, &a.state.ut, &b.state.u, &b.state.ut, h);
                    let v = hermite_mid(&a.state.ut, &a.acc, &b.state.ut, &b.acc, h);
                    rhs.jets(&u, &v)
                })
                .collect();
            FrozenJets { nodes, mids }
        }
    }
}

fn sweep(
    rhs: &RightSide<'_>,
    start: &WaveState,
    steps: usize,
    h: f64,
    frozen: &FrozenJets,
    threshold: f64,
) -> Result<Vec<GridPoint>> {
    let mut points = Vec::with_capacity(steps + 1);
    let mut state = start.clone();
    for n in 0..steps {
        let jets = StageJets {
            start: &frozen.nodes[n],
            mid: &frozen.mids[n],
            end: &frozen.nodes[n + 1],
        };
        let (next, acc) = rk4_core(rhs, &state, h, Some(jets));
        points.push(GridPoint { state, acc });
        let (su, sut) = (next.u.sup_norm(), next.ut.sup_norm());
        if !next.is_finite() || su.max(sut) > threshold {
            return Err(Error::BlowUp {
                t: next.t,
                sup_u: su,
                sup_ut: sut,
            });
        }
        state = next;
    }
    let acc = rhs.acceleration(&state.u, &state.ut, state.t, Some(&frozen.nodes[steps]));
    points.push(GridPoint { state, acc });
    Ok(points)
}

fn distance(a: &[GridPoint], b: Option<&[GridPoint]>, k: u8) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for (i, p) in a.iter().enumerate() {
        let diff = match b {
            Some(prev) => WaveState {
                u: p.state.u.sub(&prev[i].state.u)?,
                ut: p.state.ut.sub(&prev[i].state.ut)?,
                t: p.state.t,
            },
            None => p.state.clone(),
        };
        sup = sup.max(energy_a(&diff, k)?.value);
    }
    Ok(sup)
}

fn attempt(
    rhs: &RightSide<'_>,
    start: &WaveState,
    window: f64,
    dt: f64,
    picard: &PicardConfig,
    k: u8,
    threshold: f64,
) -> Result<Attempt> {
    let steps = ((window / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = window / steps as f64;
    let mut prev: Option<Vec<GridPoint>> = None;
    let mut history: Vec<f64> = Vec::new();
    for m in 0..picard.max_iters {
        let frozen = frozen_from(rhs, prev.as_deref(), start, steps, h);
        let points = sweep(rhs, start, steps, h, &frozen, threshold)?;
        let c = distance(&points, prev.as_deref(), k)?;
        history.push(c);
        if c < picard.tol {
            return Ok(Attempt::Converged(points, history));
        }
        if m >= 1 && c >= 0.5 * history[m - 1] {
            return Ok(Attempt::NotContracting(history));
        }
        prev = Some(points);
    }
    Err(Error::PicardNonConvergence {
        iters: history.len(),
        last: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// Solves one window starting at `start`, halving the window length until
/// the iteration contracts.
pub(crate) fn solve_window(
    rhs: &RightSide<'_>,
    start: &WaveState,
    window: f64,
    config: &SolverConfig,
    picard: &PicardConfig,
) -> Result<WindowSolution> {
    let mut w = window;
    let mut halvings = 0;
    loop {
        match attempt(rhs, start, w, config.dt, picard, config.k, config.blowup.sup_threshold)? {
            Attempt::Converged(points, history) => {
                return Ok(WindowSolution {
                    points,
                    diagnostics: PicardDiagnostics {
                        history,
                        window: w,
                        halvings,
                    },
                })
            }
            Attempt::NotContracting(history) => {
                if w / 2.0 < picard.min_window {
                    return Err(Error::PicardNonConvergence {
                        iters: history.len(),
                        last: *history.last().unwrap_or(&f64::NAN),
                        history,
                    });
                }
                w /= 2.0;
                halvings += 1;
            }
        }
    }
}

/// Fourth-order centered second difference in time against the right side,
/// `max_n ||D_t^2 u_n - RHS(u_n)||_{l^2}` over interior points of a uniform grid.
pub fn pde_residual(states: &[WaveState], spec: &EquationSpec) -> Result<f64> {
    if states.len() < 5 {
        return Err(Error::InvalidArgument("residual needs at least 5 states".into()));
    }
    let h = states[1].t - states[0].t;
    for w in states.windows(2) {
        if ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::InvalidArgument("residual needs a uniform time grid".into()));
        }
    }
    let lattice = *states[0].lattice();
    let rhs = RightSide::new(spec, lattice);
    let mut worst: f64 = 0.0;
    for n in 2..states.len() - 2 {
        let u = |i: usize| &states[i].u;
        let d2 = u(n - 2)
            .zip_map(u(n - 1), |a, b| -a + b * 16.0)?
            .axpy(-30.0, u(n))?
            .axpy(16.0, u(n + 1))?
            .axpy(-1.0, u(n + 2))?
            .scale_real(1.0 / (12.0 * h * h));
        let acc = rhs.acceleration(u(n), &states[n].ut, states[n].t, None);
        worst = worst.max(d2.sub(&acc)?.l2_norm());
    }
    Ok(worst)
}
