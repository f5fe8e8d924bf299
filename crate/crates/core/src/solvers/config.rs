use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Spectral propagator plus Simpson quadrature of the forcing.
    ExactLinear,
    /// Fourth-order Lawson scheme around the free propagator.
    ExponentialDuhamel,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupAction {
    /// Return `Error::BlowUp`.
    Halt,
    /// Return the trajectory with a blow-up outcome.
    Record,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupConfig {
    #[serde(default = "default_threshold")]
    pub sup_threshold: f64,
    #[serde(default = "default_action")]
    pub action: BlowupAction,
    /// Step halvings tried on a failing step before declaring blow-up.
    #[serde(default = "default_halvings")]
    pub halvings: u32,
}

fn default_threshold() -> f64 {
    1e6
}
fn default_action() -> BlowupAction {
    BlowupAction::Record
}
fn default_halvings() -> u32 {
    2
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            sup_threshold: default_threshold(),
            action: default_action(),
            halvings: default_halvings(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_picard_tol")]
    pub tol: f64,
    /// Requested window length; `None` uses the whole run.
    #[serde(default)]
    pub window: Option<f64>,
    /// Smallest window tried before giving up on contraction.
    #[serde(default = "default_min_window")]
    pub min_window: f64,
}

fn default_max_iters() -> usize {
    12
}
fn default_picard_tol() -> f64 {
    1e-10
}
fn default_min_window() -> f64 {
    1e-3
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            tol: default_picard_tol(),
            window: None,
            min_window: default_min_window(),
        }
    }
}

/// Step-size control by relative growth of `sup|u| + sup|u_t|` per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthControl {
    pub max_growth: f64,
    #[serde(default = "default_min_dt")]
    pub min_dt: f64,
}

fn default_min_dt() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_max: f64,
    pub method: Method,
    #[serde(default)]
    pub picard: Option<PicardConfig>,
    #[serde(default)]
    pub blowup: BlowupConfig,
    /// Weight index of `A(t)`.
    #[serde(default)]
    pub k: u8,
    /// Record a sample every this many steps.
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default)]
    pub growth_control: Option<GrowthControl>,
    /// Keep the state at every sample.
    #[serde(default)]
    pub keep_states: bool,
}

fn default_sample_every() -> usize {
    1
}

impl SolverConfig {
    pub fn new(dt: f64, t_max: f64, method: Method) -> Self {
        Self {
            dt,
            t_max,
            method,
            picard: None,
            blowup: BlowupConfig::default(),
            k: 0,
            sample_every: 1,
            growth_control: None,
            keep_states: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return bad(format!("t_max = {} must be nonnegative", self.t_max));
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        if !(self.blowup.sup_threshold > 0.0) {
            return bad("blow-up threshold must be positive".into());
        }
        crate::energy::check_weight_index(self.k)?;
        if let Some(p) = &self.picard {
            if p.max_iters < 2 || !(p.tol > 0.0) || !(p.min_window > 0.0) {
                return bad("picard needs max_iters >= 2, tol > 0, min_window > 0".into());
            }
            if let Some(w) = p.window {
                if !(w > 0.0) {
                    return bad(format!("picard window {w} must be positive"));
                }
            }
        }
        if let Some(g) = &self.growth_control {
            if !(g.max_growth > 1.0) || !(g.min_dt > 0.0) {
                return bad("growth control needs max_growth > 1 and min_dt > 0".into());
            }
        }
        Ok(())
    }

    /// Number of nominal steps to reach `t_max`.
    pub fn step_count(&self) -> usize {
        (self.t_max / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Largest stable RK4 step for a coefficient bound `g_hat = sup sum |g^{jk}|`.
pub fn rk4_stability_bound(d: usize, g_hat: f64) -> f64 {
    0.5 / (d as f64 * g_hat.max(f64::MIN_POSITIVE)).sqrt()
}
