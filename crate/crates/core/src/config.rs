//! The JSON run configuration read by the command line tool.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{FaddeevConfig, LifespanCriterion};
use crate::lattice::{delta_field, make_box, read_snapshot, Field, LatticeBox};
use crate::norms::{lp_alpha_norm, NormSpec};
use crate::solvers::{hash_hex, EquationSpec, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
}

/// A field described by a closed-form profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    Constant { value: f64 },
    Delta {
        site: Vec<i64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `amplitude exp(-|m - center|^2 / width^2)`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// `amplitude cos(2 pi n m_axis / L)`.
    Mode { axis: usize, n: i64, amplitude: f64 },
    /// Independent standard normals times `amplitude`, from the run seed.
    Random { amplitude: f64 },
    /// A field snapshot file.
    Snapshot { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Zero
    }
}

impl Profile {
    pub fn build(&self, lattice: LatticeBox, seed: u64, base: &Path) -> Result<Field> {
        let d = lattice.dim();
        let real = |x: f64| Complex64::new(x, 0.0);
        Ok(match self {
            Profile::Zero => Field::zeros(lattice),
            Profile::Constant { value } => Field::constant(lattice, real(*value)),
            Profile::Delta { site, amplitude } => delta_field(lattice, site)?.scale_real(*amplitude),
            Profile::Gaussian {
                amplitude,
                width,
                center,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::Config(format!("gaussian width {width} must be positive")));
                }
                let c = center.clone().unwrap_or_else(|| vec![0.0; d]);
                if c.len() != d {
                    return Err(Error::Config(format!("gaussian center {c:?} has wrong dimension")));
                }
                Field::from_fn(lattice, |m| {
                    let r2: f64 = m.iter().zip(&c).map(|(&x, &y)| (x as f64 - y).powi(2)).sum();
                    real(amplitude * (-r2 / (width * width)).exp())
                })
            }
            Profile::Mode { axis, n, amplitude } => {
                lattice.check_axis(*axis)?;
                let l = lattice.side() as f64;
                Field::from_fn(lattice, |m| {
                    let x = 2.0 * std::f64::consts::PI * (*n as f64) * m[axis - 1] as f64 / l;
                    real(amplitude * x.cos())
                })
            }
            Profile::Random { amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let vals: Vec<f64> = (0..lattice.total())
                    .map(|_| amplitude * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect();
                Field::from_real(lattice, &vals)?
            }
            Profile::Snapshot { path } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let file = std::fs::File::open(&full)
                    .map_err(|e| Error::Config(format!("{}: {e}", full.display())))?;
                let f = read_snapshot(std::io::BufReader::new(file))?;
                lattice.ensure_same(f.lattice())?;
                f
            }
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default)]
    pub u: Profile,
    #[serde(default)]
    pub ut: Profile,
    /// Rescales `u` to this `l^2` norm.
    #[serde(default)]
    pub u_l2_norm: Option<f64>,
}

impl InitialData {
    pub fn build(&self, lattice: LatticeBox, seed: u64, base: &Path) -> Result<(Field, Field)> {
        let mut u = self.u.build(lattice, seed, base)?;
        let ut = self.ut.build(lattice, seed.wrapping_add(1), base)?;
        if let Some(target) = self.u_l2_norm {
            let n = lp_alpha_norm(&u, NormSpec::l2());
            if n == 0.0 || !(target >= 0.0) {
                return Err(Error::Config("cannot rescale a zero field".into()));
            }
            u = u.scale_real(target / n);
        }
        Ok((u, ut))
    }
}

/// What a run computes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Simulate,
    /// `eps` grid given explicitly or as `2^{-k}` for `k` in `k_range`.
    Lifespan {
        #[serde(default)]
        eps: Vec<f64>,
        #[serde(default)]
        k_range: Option<[u32; 2]>,
        #[serde(default)]
        criterion: LifespanCriterion,
    },
    Counterexample {
        l_grid: Vec<usize>,
        #[serde(default = "one_usize")]
        d: usize,
    },
    Isomorphism {
        trials: usize,
    },
    Faddeev(FaddeevConfig),
}

fn one_usize() -> usize {
    1
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment::Simulate
    }
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Lifespan { .. } => "lifespan",
            Experiment::Counterexample { .. } => "counterexample",
            Experiment::Isomorphism { .. } => "isomorphism",
            Experiment::Faddeev(_) => "faddeev",
        }
    }

    /// The explicit grid, or `2^{-k}` over the inclusive range.
    pub fn eps_grid(&self) -> Vec<f64> {
        match self {
            Experiment::Lifespan { eps, k_range, .. } => {
                let mut g = eps.clone();
                if let Some([a, b]) = k_range {
                    g.extend((*a..=*b).map(|k| 0.5f64.powi(k as i32)));
                }
                g
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "box")]
    pub lattice: BoxConfig,
    pub equation: EquationSpec,
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub experiment: Experiment,
    /// Output directory; `--out` takes precedence. Not part of the hash.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// A parsed configuration with its data built.
#[derive(Clone, Debug)]
pub struct PreparedRun {
    pub config: RunConfig,
    pub lattice: LatticeBox,
    pub f: Field,
    pub g: Field,
    pub hash: String,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON.
    pub fn hash(&self) -> String {
        hash_hex(serde_json::to_string(self).unwrap_or_default().as_bytes())
    }

    /// Validates everything and builds the initial data; nothing is computed
    /// on an invalid configuration.
    pub fn prepare(self, base: &Path) -> Result<PreparedRun> {
        let cfg_err = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let lattice = make_box(self.lattice.d, self.lattice.l).map_err(cfg_err)?;
        self.equation.validate(&lattice).map_err(cfg_err)?;
        self.solver.validate().map_err(cfg_err)?;
        match &self.experiment {
            Experiment::Lifespan { .. } => {
                let g = self.experiment.eps_grid();
                if g.is_empty() {
                    return Err(Error::Config("lifespan scan needs a nonempty eps grid".into()));
                }
                if !g.windows(2).all(|w| w[1] < w[0]) || g.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
                    return Err(Error::Config("eps grid must be strictly decreasing inside (0, 1)".into()));
                }
            }
            Experiment::Counterexample { l_grid, .. } if l_grid.is_empty() => {
                return Err(Error::Config("counterexample scan needs a nonempty L grid".into()));
            }
            Experiment::Isomorphism { trials } if *trials == 0 => {
                return Err(Error::Config("isomorphism check needs at least one trial".into()));
            }
            _ => {}
        }
        let (f, g) = self.initial.build(lattice, self.seed, base).map_err(cfg_err)?;
        let hash = self.hash();
        Ok(PreparedRun {
            config: self,
            lattice,
            f,
            g,
            hash,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "box": {"d": 1, "L": 16},
        "equation": {"kind": "semilinear", "nonlinearity": {"type": "power", "mu": -1, "p": 3}},
        "solver": {"dt": 0.05, "t_max": 1, "method": "rk4"},
        "initial": {"u": {"type": "gaussian", "amplitude": 1, "width": 2}, "u_l2_norm": 5},
        "seed": 3
    }"#;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::from_json(SAMPLE).unwrap();
        assert_eq!(cfg.experiment, Experiment::Simulate);
        let run = cfg.prepare(Path::new(".")).unwrap();
        assert!((run.f.l2_norm() - 5.0).abs() < 1e-12);
        assert_eq!(run.g.sup_norm(), 0.0);
        assert_eq!(run.hash.len(), 16);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = SAMPLE.replace("\"seed\"", "\"sead\"");
        assert!(matches!(RunConfig::from_json(&typo), Err(Error::Config(_))));
        let nested = SAMPLE.replace("\"width\"", "\"widht\"");
        assert!(RunConfig::from_json(&nested).is_err());
    }

    #[test]
    fn invalid_values_fail_in_prepare() {
        let bad_box = SAMPLE.replace("\"L\": 16", "\"L\": 15");
        let cfg = RunConfig::from_json(&bad_box).unwrap();
        assert!(matches!(cfg.prepare(Path::new(".")), Err(Error::Config(_))));
        let bad_mu = SAMPLE.replace("\"mu\": -1", "\"mu\": 2");
        assert!(RunConfig::from_json(&bad_mu).unwrap().prepare(Path::new(".")).is_err());
    }

    #[test]
    fn hash_ignores_output_but_not_seed() {
        let a = RunConfig::from_json(SAMPLE).unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn eps_grid_from_range() {
        let e = Experiment::Lifespan {
            eps: vec![],
            k_range: Some([3, 5]),
            criterion: LifespanCriterion::BlowUp,
        };
        assert_eq!(e.eps_grid(), vec![0.125, 0.0625, 0.03125]);
    }
}
