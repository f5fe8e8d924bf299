//! Parameter scans: lifespan against data size, the strong/weak norm
//! dichotomy for `partial_1 delta_0`, lattice/torus norm equivalence, and the
//! quadratic-derivative Picard demo.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lattice::{delta_field, make_box, Field, LatticeBox};
use crate::norms::{h1_torus_norm, lp_alpha_norm, weak_l11_functional, NormSpec};
use crate::solvers::{
    evolve_until, pde_residual, picard_solve, BlowupAction, EquationSpec, Metric, Method,
    Nonlinearity, Outcome, PicardConfig, PicardRun, SolverConfig,
};
use crate::spectral::{dft_inverse, partial, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Completed,
    BlewUp,
    HitTMax,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Completed => "completed",
            RowStatus::BlewUp => "blew-up",
            RowStatus::HitTMax => "hit-t_max",
        }
    }

    pub fn is_censored(&self) -> bool {
        *self == RowStatus::HitTMax
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub param: f64,
    pub values: Vec<f64>,
    pub status: RowStatus,
}

/// `T* >= coefficient * shape(1/eps)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelFit {
    pub model: String,
    /// Largest `K` with the bound holding on every uncensored row.
    pub coefficient: f64,
    pub least_squares: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub experiment: String,
    pub parameter: String,
    pub columns: Vec<String>,
    pub rows: Vec<ScanRow>,
    pub fits: Vec<ModelFit>,
    pub checks: Vec<Check>,
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:e}")
    }
}

impl ScanResult {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[j]).collect())
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One row per grid point, after a `# config_hash=` comment line.
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut out = format!("# config_hash={config_hash}\n{}", self.parameter);
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",status,censored\n");
        for r in &self.rows {
            out.push_str(&fmt_num(r.param));
            for v in &r.values {
                out.push(',');
                out.push_str(&fmt_num(*v));
            }
            let _ = writeln!(out, ",{},{}", r.status.as_str(), r.status.is_censored() as u8);
        }
        out
    }

    /// Comment line, one JSON object per row, then fits and checks.
    pub fn to_ndjson(&self, config_hash: &str) -> Result<String> {
        let mut out = String::new();
        for r in &self.rows {
            let mut obj = serde_json::Map::new();
            obj.insert("config_hash".into(), config_hash.into());
            obj.insert("experiment".into(), self.experiment.clone().into());
            obj.insert(self.parameter.clone(), r.param.into());
            for (c, v) in self.columns.iter().zip(&r.values) {
                obj.insert(c.clone(), serde_json::to_value(v)?);
            }
            obj.insert("status".into(), r.status.as_str().into());
            out.push_str(&serde_json::Value::Object(obj).to_string());
            out.push('\n');
        }
        for f in &self.fits {
            out.push_str(&serde_json::json!({ "config_hash": config_hash, "fit": f }).to_string());
            out.push('\n');
        }
        for c in &self.checks {
            out.push_str(&serde_json::json!({ "config_hash": config_hash, "check": c }).to_string());
            out.push('\n');
        }
        Ok(out)
    }
}

/// When a lifespan run counts as ended.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LifespanCriterion {
    /// `sup|u| + sup|u_t|` passes the blow-up threshold.
    BlowUp,
    /// `A(t) > r`.
    Threshold { r: f64 },
}

impl Default for LifespanCriterion {
    fn default() -> Self {
        LifespanCriterion::BlowUp
    }
}

/// Default `r` of [`LifespanCriterion::Threshold`].
pub const DEFAULT_LIFESPAN_THRESHOLD: f64 = 0.1;

fn strictly_decreasing(grid: &[f64]) -> bool {
    grid.windows(2).all(|w| w[1] < w[0])
}

fn run_pool<T: Send>(jobs: usize, work: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(work))
}

/// Blow-up time of `u'' = u^p` from `u(0) = u0 > 0`, `u'(0) = v0 >= 0`:
/// `T = int_{u0}^inf du / sqrt(v0^2 + 2 (u^{p+1} - u0^{p+1}) / (p+1))`.
pub fn constant_profile_blowup_time(p: f64, u0: f64, v0: f64) -> Result<f64> {
    if !(p > 1.0) || !(u0 > 0.0) || !(v0 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "constant-profile blow-up needs p > 1, u0 > 0, v0 >= 0 (got {p}, {u0}, {v0})"
        )));
    }
    // u = u0 / s, s in (0, 1]
    let q = p + 1.0;
    let integrand = |s: f64, one_minus_s: f64| -> f64 {
        let grow = (-q * (-one_minus_s).ln_1p()).exp_m1() * 2.0 * u0.powf(q) / q;
        u0 / (s * s) / (v0 * v0 + grow).sqrt()
    };
    Ok(tanh_sinh(integrand, 0.0, 1.0))
}

/// Double-exponential quadrature on `(a, b)`; tolerates integrable endpoint
/// singularities. The integrand also receives the exact distance `b - x`.
fn tanh_sinh(f: impl Fn(f64, f64) -> f64, a: f64, b: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let half = 0.5 * (b - a);
    let mut h: f64 = 0.5;
    let mut prev = f64::NAN;
    for _ in 0..12 {
        let mut sum = 0.0;
        let n = (4.0 / h).ceil() as i64;
        for k in -n..=n {
            let t = k as f64 * h;
            let sh = FRAC_PI_2 * t.sinh();
            let x = sh.tanh();
            let w = FRAC_PI_2 * t.cosh() / sh.cosh().powi(2);
            // distance to the nearer endpoint without cancellation
            let gap = 1.0 / (sh.abs().exp() * sh.cosh());
            let (point, to_b) = if x < 0.0 {
                (a + half * gap, b - a - half * gap)
            } else {
                (b - half * gap, half * gap)
            };
            if gap == 0.0 || point <= a || to_b <= 0.0 {
                continue;
            }
            let v = f(point, to_b);
            if v.is_finite() {
                sum += w * v;
            }
        }
        let est = sum * h * half;
        if (est - prev).abs() <= 1e-13 * est.abs() {
            return est;
        }
        prev = est;
        h /= 2.0;
    }
    prev
}

fn lifespan_models(spec: &EquationSpec) -> Vec<(String, Box<dyn Fn(f64) -> f64 + Send + Sync>)> {
    let mut models: Vec<(String, Box<dyn Fn(f64) -> f64 + Send + Sync>)> = vec![
        ("log_log".into(), Box::new(|e: f64| (1.0 / e).ln().ln())),
        ("sqrt_log".into(), Box::new(|e: f64| (1.0 / e).ln().sqrt())),
    ];
    if let Some((_, p)) = spec.nonlinearity.power() {
        let a = (p - 1.0) / (p + 1.0);
        models.push((format!("power_{a}"), Box::new(move |e: f64| e.powf(-a))));
    }
    models
}

fn constant_value(f: &Field) -> Option<f64> {
    let v0 = f.values()[0];
    (v0.im == 0.0 && f.values().iter().all(|&z| z == v0)).then_some(v0.re)
}

/// Measures `T*(eps)` for data `(eps f, eps g)` over a strictly decreasing
/// grid in `(0, 1)`, on a pool of `jobs` workers. Rows that reach `t_max`
/// are censored and excluded from the fits. For spatially constant data and
/// a focusing power nonlinearity the closed-form ODE lifespan is added.
pub fn lifespan_scan(
    spec: &EquationSpec,
    f: &Field,
    g: &Field,
    eps_grid: &[f64],
    config: &SolverConfig,
    criterion: LifespanCriterion,
    jobs: usize,
) -> Result<ScanResult> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidArgument("empty eps grid".into()));
    }
    if !strictly_decreasing(eps_grid) || eps_grid.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidArgument(
            "eps grid must be strictly decreasing inside (0, 1)".into(),
        ));
    }
    let mut cfg = config.clone();
    cfg.blowup.action = BlowupAction::Record;
    let constant = match (spec.nonlinearity.power(), &spec.metric, constant_value(f), constant_value(g)) {
        (Some((mu, p)), Metric::Identity, Some(u0), Some(v0)) if mu > 0.0 && u0 > 0.0 && v0 >= 0.0 => {
            Some((p, u0, v0))
        }
        _ => None,
    };

    let measure = |eps: f64| -> Result<ScanRow> {
        let stop = |s: &crate::solvers::Sample| match criterion {
            LifespanCriterion::BlowUp => false,
            LifespanCriterion::Threshold { r } => s.a.value > r,
        };
        let traj = evolve_until(&f.scale_real(eps), &g.scale_real(eps), spec, &cfg, stop)?;
        let (t_star, status) = match traj.outcome {
            Outcome::BlowUp(r) => (r.t, RowStatus::BlewUp),
            Outcome::Stopped => (traj.last().t, RowStatus::Completed),
            Outcome::Completed => (traj.last().t, RowStatus::HitTMax),
        };
        let mut values = vec![t_star];
        if let Some((p, u0, v0)) = constant {
            let exact = constant_profile_blowup_time(p, eps * u0, eps * v0)?;
            values.push(exact);
            values.push(t_star / exact - 1.0);
        }
        Ok(ScanRow {
            param: eps,
            values,
            status,
        })
    };
    let rows: Vec<ScanRow> = run_pool(jobs, || {
        eps_grid.par_iter().map(|&e| measure(e)).collect::<Result<Vec<_>>>()
    })??;

    let mut columns = vec!["t_star".to_string()];
    if constant.is_some() {
        columns.push("ode_t_star".into());
        columns.push("relative_error".into());
    }

    let measured: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.status.is_censored())
        .map(|r| (r.param, r.values[0]))
        .collect();
    let fits = lifespan_models(spec)
        .into_iter()
        .map(|(model, shape)| {
            let pts: Vec<(f64, f64)> = measured.iter().map(|&(e, t)| (shape(e), t)).collect();
            let coefficient = pts.iter().map(|&(h, t)| t / h).fold(f64::INFINITY, f64::min);
            let hh: f64 = pts.iter().map(|(h, _)| h * h).sum();
            let ht: f64 = pts.iter().map(|(h, t)| h * t).sum();
            let coefficient = if pts.is_empty() { 0.0 } else { coefficient };
            ModelFit {
                model,
                coefficient,
                least_squares: if hh > 0.0 { ht / hh } else { 0.0 },
                satisfied: coefficient > 0.0 && coefficient.is_finite(),
            }
        })
        .collect();

    let t_col: Vec<f64> = rows.iter().map(|r| r.values[0]).collect();
    let mut checks = vec![Check {
        name: "t_star_nondecreasing".into(),
        passed: t_col.windows(2).all(|w| w[1] >= w[0]),
        detail: format!("{t_col:?}"),
    }];
    if constant.is_some() {
        let worst = rows
            .iter()
            .filter(|r| r.status == RowStatus::BlewUp)
            .map(|r| r.values[2].abs())
            .fold(0.0, f64::max);
        checks.push(Check {
            name: "ode_agreement".into(),
            passed: worst <= 0.05,
            detail: format!("max relative error {worst:e}"),
        });
    }
    Ok(ScanResult {
        experiment: "lifespan".into(),
        parameter: "eps".into(),
        columns,
        rows,
        fits,
        checks,
    })
}

/// `(L, ||partial_1 delta_0||_{l^{1,1}}, weak l^{1,1} functional)` over an
/// increasing grid of powers of two.
pub fn counterexample_growth(l_grid: &[usize], d: usize) -> Result<ScanResult> {
    if l_grid.is_empty() {
        return Err(Error::InvalidArgument("empty L grid".into()));
    }
    if !l_grid.windows(2).all(|w| w[1] > w[0]) || l_grid.iter().any(|l| !l.is_power_of_two()) {
        return Err(Error::InvalidArgument("L grid must be increasing powers of two".into()));
    }
    let strong_norm = NormSpec::new(1.0, 1.0)?;
    let mut rows = Vec::new();
    for &l in l_grid {
        let b = make_box(d, l)?;
        let df = partial(&delta_field(b, &vec![0; d])?, 1)?;
        rows.push(ScanRow {
            param: l as f64,
            values: vec![lp_alpha_norm(&df, strong_norm), weak_l11_functional(&df)],
            status: RowStatus::Completed,
        });
    }
    let strong: Vec<f64> = rows.iter().map(|r| r.values[0]).collect();
    let weak: Vec<f64> = rows.iter().map(|r| r.values[1]).collect();
    let band = weak.iter().cloned().fold(0.0, f64::max) / weak.iter().cloned().fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check {
            name: "strong_norm_increasing".into(),
            passed: strong.windows(2).all(|w| w[1] > w[0]),
            detail: format!("{strong:?}"),
        },
        Check {
            name: "weak_functional_band".into(),
            passed: band < 1.5,
            detail: format!("max/min = {band}"),
        },
    ];
    Ok(ScanResult {
        experiment: "counterexample".into(),
        parameter: "L".into(),
        columns: vec!["strong_l11".into(), "weak_l11".into()],
        rows,
        fits: Vec::new(),
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsomorphismReport {
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub lower: f64,
    pub upper: f64,
    pub all_inside: bool,
}

/// Ratios `||F^{-1} g||_{l^{2,1}} / ||g||_{H^1}` for random torus data `g`
/// with random algebraic decay in frequency.
pub fn isomorphism_check(seed: u64, trials: usize, l: usize, d: usize) -> Result<IsomorphismReport> {
    if trials == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let lattice = make_box(d, l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = NormSpec::l2_weighted(1);
    let mut ratios = Vec::with_capacity(trials);
    for _ in 0..trials {
        let decay: f64 = rng.random_range(0.0..2.0);
        let coeffs = (0..lattice.total())
            .map(|i| {
                let n = lattice.coord(i);
                let r2: f64 = n[..d].iter().map(|&x| (x * x) as f64).sum();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * (1.0 + r2).powf(-decay / 2.0)
            })
            .collect();
        let spec = SpectralField::from_coeffs(lattice, coeffs)?;
        ratios.push(lp_alpha_norm(&dft_inverse(&spec), norm) / h1_torus_norm(&spec));
    }
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let lower = std::f64::consts::FRAC_1_SQRT_2 - 1e-9;
    let upper = std::f64::consts::SQRT_2 + 1e-9;
    Ok(IsomorphismReport {
        all_inside: min >= lower && max <= upper,
        ratios,
        min,
        max,
        lower,
        upper,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuadraticSource {
    DtSquared,
    DjSquared { axis: usize },
}

/// `u_tt - Delta u = |u_t|^2` (or `|partial_j u|^2`) from a Gaussian bump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaddeevConfig {
    pub d: usize,
    pub l: usize,
    pub amplitude: f64,
    pub width: f64,
    pub source: QuadraticSource,
    pub window: f64,
    pub dt: f64,
    #[serde(default)]
    pub k: u8,
    #[serde(default)]
    pub picard: PicardConfig,
}

#[derive(Clone, Debug)]
pub struct FaddeevReport {
    pub run: PicardRun,
    /// Length of the first window on which the iteration contracted.
    pub window: f64,
    pub residual: f64,
    pub max_a: f64,
}

pub fn gaussian_bump(lattice: LatticeBox, amplitude: f64, width: f64) -> Field {
    Field::from_fn(lattice, |m| {
        let r2: f64 = m.iter().map(|&x| (x * x) as f64).sum();
        Complex64::new(amplitude * (-r2 / (width * width)).exp(), 0.0)
    })
}

pub fn faddeev_demo(config: &FaddeevConfig) -> Result<FaddeevReport> {
    let lattice = make_box(config.d, config.l)?;
    let source = match config.source {
        QuadraticSource::DtSquared => Nonlinearity::DtSquared,
        QuadraticSource::DjSquared { axis } => Nonlinearity::DjSquared { axis },
    };
    let spec = EquationSpec::quasilinear(Metric::Identity, source);
    let f = gaussian_bump(lattice, config.amplitude, config.width);
    let g = Field::zeros(lattice);
    let mut solver = SolverConfig::new(config.dt, config.window, Method::Rk4);
    solver.k = config.k;
    solver.blowup.action = BlowupAction::Halt;
    solver.picard = Some(PicardConfig {
        window: Some(config.window),
        ..config.picard.clone()
    });
    let run = picard_solve(&f, &g, &spec, &solver)?;
    let window = run.windows.first().map(|w| w.window).unwrap_or(config.window);
    let residual = if run.grid.len() >= 5 {
        pde_residual(&run.grid, &spec)?
    } else {
        0.0
    };
    let max_a = run.trajectory.max_a();
    Ok(FaddeevReport {
        run,
        window,
        residual,
        max_a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ode_lifespan_closed_forms() {
        // u'' = u^3 from (u0, 0): T = (sqrt 2 / u0) int_1^inf dw / sqrt(w^4 - 1)
        let t = constant_profile_blowup_time(3.0, 0.5, 0.0).unwrap();
        let expected = 2f64.sqrt() / 0.5 * 1.311_028_777_146_059_9;
        assert!((t - expected).abs() < 1e-9 * expected, "{t} vs {expected}");
        // on the self-similar profile T equals t0
        let r = crate::solvers::blowup_reference(3.0, 0.8).unwrap();
        let t = constant_profile_blowup_time(3.0, r.u0, r.ut0).unwrap();
        assert!((t - 0.8).abs() < 1e-10, "{t}");
        let r = crate::solvers::blowup_reference(2.0, 1.5).unwrap();
        let t = constant_profile_blowup_time(2.0, r.u0, r.ut0).unwrap();
        assert!((t - 1.5).abs() < 1e-8, "{t}");
    }

    #[test]
    fn counterexample_rows() {
        let r = counterexample_growth(&[16, 32, 64, 128], 1).unwrap();
        assert!(r.all_checks_pass(), "{:?}", r.checks);
        assert!(counterexample_growth(&[], 1).is_err());
        assert!(counterexample_growth(&[32, 16], 1).is_err());
        assert!(counterexample_growth(&[12, 24], 1).is_err());
    }

    #[test]
    fn isomorphism_ratios_in_band() {
        let r = isomorphism_check(7, 20, 16, 2).unwrap();
        assert!(r.all_inside, "{} {}", r.min, r.max);
        let r2 = isomorphism_check(7, 20, 16, 2).unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn lifespan_grid_validation() {
        let b = make_box(1, 8).unwrap();
        let f = Field::constant(b, Complex64::new(1.0, 0.0));
        let g = Field::zeros(b);
        let spec = EquationSpec::power(1.0, 3.0);
        let cfg = SolverConfig::new(0.1, 1.0, Method::Rk4);
        let run = |grid: &[f64]| lifespan_scan(&spec, &f, &g, grid, &cfg, LifespanCriterion::BlowUp, 1);
        assert!(run(&[]).is_err());
        assert!(run(&[0.1, 0.2]).is_err());
        assert!(run(&[1.5, 0.5]).is_err());
        // t_max too short: every row is censored
        let r = run(&[0.5, 0.25]).unwrap();
        assert!(r.rows.iter().all(|row| row.status == RowStatus::HitTMax));
        assert!(r.fits.iter().all(|f| !f.satisfied));
        assert!(r.to_csv("abc").starts_with("# config_hash=abc\neps,t_star,"));
    }

    #[test]
    fn faddeev_zero_data_stays_zero() {
        let cfg = FaddeevConfig {
            d: 1,
            l: 16,
            amplitude: 0.0,
            width: 2.0,
            source: QuadraticSource::DtSquared,
            window: 0.5,
            dt: 0.05,
            k: 0,
            picard: PicardConfig::default(),
        };
        let rep = faddeev_demo(&cfg).unwrap();
        assert_eq!(rep.max_a, 0.0);
        assert_eq!(rep.run.windows[0].history, vec![0.0]);
    }
}
