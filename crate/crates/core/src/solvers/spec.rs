//! Equation descriptions: `u_tt - g^{jk}(u,u') partial_jk u = F(u,u') - b u_t - b^j partial_j u - c u + forcing`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{delta_field, Field, LatticeBox, MAX_DIM};

/// Pointwise arguments of the coefficient and nonlinearity: `(u, u_t, partial u)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub u: Complex64,
    pub ut: Complex64,
    pub du: [Complex64; MAX_DIM],
}

/// Symmetric coefficient matrix; only the leading `d x d` block is used.
pub type MetricMatrix = [[Complex64; MAX_DIM]; MAX_DIM];

type MetricFn = dyn Fn(&Jet, usize) -> MetricMatrix + Send + Sync;
type SourceFn = dyn Fn(&Jet) -> Complex64 + Send + Sync;
type ForcingFn = dyn Fn(f64, &LatticeBox) -> Field + Send + Sync;

#[derive(Clone)]
pub struct CustomMetric {
    pub name: String,
    pub eval: Arc<MetricFn>,
}

impl fmt::Debug for CustomMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomMetric({})", self.name)
    }
}

#[derive(Clone)]
pub struct CustomSource {
    pub name: String,
    pub eval: Arc<SourceFn>,
}

impl fmt::Debug for CustomSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomSource({})", self.name)
    }
}

#[derive(Clone)]
pub struct CustomForcing {
    pub name: String,
    pub eval: Arc<ForcingFn>,
}

impl fmt::Debug for CustomForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomForcing({})", self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    Linear,
    Semilinear,
    Quasilinear,
}

/// The coefficient `g^{jk}(u, u')`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Metric {
    #[default]
    Identity,
    /// `g^{jk} = (c0 + c1 u + c2 u^2) delta_jk`.
    Conformal { c0: f64, c1: f64, c2: f64 },
    #[serde(skip)]
    Custom(CustomMetric),
}

impl Metric {
    pub fn is_identity(&self) -> bool {
        matches!(self, Metric::Identity)
    }

    /// Scalar factor when the metric is a multiple of the identity.
    pub fn conformal_factor(&self, jet: &Jet) -> Option<Complex64> {
        match self {
            Metric::Identity => Some(Complex64::new(1.0, 0.0)),
            Metric::Conformal { c0, c1, c2 } => Some(jet.u * jet.u * *c2 + jet.u * *c1 + *c0),
            Metric::Custom(_) => None,
        }
    }

    pub fn eval(&self, jet: &Jet, d: usize) -> MetricMatrix {
        match self {
            Metric::Custom(c) => (c.eval)(jet, d),
            _ => {
                let s = self.conformal_factor(jet).expect("conformal");
                let mut m = [[Complex64::default(); MAX_DIM]; MAX_DIM];
                for (j, row) in m.iter_mut().enumerate().take(d) {
                    row[j] = s;
                }
                m
            }
        }
    }

    /// `sum_{jk} |g^{jk}|` at a point.
    pub fn abs_sum(&self, jet: &Jet, d: usize) -> f64 {
        match self.conformal_factor(jet) {
            Some(s) => d as f64 * s.norm(),
            None => {
                let m = self.eval(jet, d);
                m.iter()
                    .take(d)
                    .flat_map(|row| row.iter().take(d))
                    .map(|z| z.norm())
                    .sum()
            }
        }
    }

    fn needs_gradient(&self) -> bool {
        matches!(self, Metric::Custom(_))
    }
}

/// The source term `F(u, u')` with `F(0) = 0`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    #[default]
    None,
    /// `mu |u|^{p-1} u`.
    Power { mu: f64, p: f64 },
    /// `|u_t|^2`.
    DtSquared,
    /// `|partial_axis u|^2`.
    DjSquared { axis: usize },
    #[serde(skip)]
    Custom(CustomSource),
}

impl Nonlinearity {
    pub fn eval(&self, jet: &Jet) -> Complex64 {
        match self {
            Nonlinearity::None => Complex64::default(),
            Nonlinearity::Power { mu, p } => {
                let r = jet.u.norm();
                if r == 0.0 {
                    Complex64::default()
                } else {
                    jet.u * (mu * r.powf(p - 1.0))
                }
            }
            Nonlinearity::DtSquared => Complex64::new(jet.ut.norm_sqr(), 0.0),
            Nonlinearity::DjSquared { axis } => Complex64::new(jet.du[axis - 1].norm_sqr(), 0.0),
            Nonlinearity::Custom(c) => (c.eval)(jet),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Nonlinearity::None)
    }

    fn needs_gradient(&self) -> bool {
        matches!(self, Nonlinearity::DjSquared { .. } | Nonlinearity::Custom(_))
    }

    /// `(mu, p)` for power nonlinearities.
    pub fn power(&self) -> Option<(f64, f64)> {
        match self {
            Nonlinearity::Power { mu, p } => Some((*mu, *p)),
            _ => None,
        }
    }
}

/// Lower-order terms `b u_t + b^j partial_j u + c u` moved to the left side.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerOrder {
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub bj: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

impl LowerOrder {
    pub fn is_zero(&self) -> bool {
        self.b == 0.0 && self.c == 0.0 && self.bj.iter().all(|&x| x == 0.0)
    }

    fn has_drift(&self) -> bool {
        self.bj.iter().any(|&x| x != 0.0)
    }
}

/// External forcing `F(x, t)`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    #[default]
    None,
    /// `amplitude cos(omega t) delta_site`.
    Point {
        site: Vec<i64>,
        amplitude: f64,
        omega: f64,
    },
    #[serde(skip)]
    Custom(CustomForcing),
}

impl Forcing {
    pub fn is_none(&self) -> bool {
        matches!(self, Forcing::None)
    }

    pub fn at(&self, t: f64, lattice: &LatticeBox) -> Option<Field> {
        match self {
            Forcing::None => None,
            Forcing::Point {
                site,
                amplitude,
                omega,
            } => {
                let d = delta_field(*lattice, site).ok()?;
                Some(d.scale_real(amplitude * (omega * t).cos()))
            }
            Forcing::Custom(c) => Some((c.eval)(t, lattice)),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSpec {
    pub kind: EquationKind,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub lower_order: LowerOrder,
    #[serde(default)]
    pub forcing: Forcing,
}

impl EquationSpec {
    pub fn linear() -> Self {
        Self {
            kind: EquationKind::Linear,
            metric: Metric::Identity,
            nonlinearity: Nonlinearity::None,
            lower_order: LowerOrder::default(),
            forcing: Forcing::None,
        }
    }

    pub fn power(mu: f64, p: f64) -> Self {
        Self {
            kind: EquationKind::Semilinear,
            nonlinearity: Nonlinearity::Power { mu, p },
            ..Self::linear()
        }
    }

    pub fn quasilinear(metric: Metric, nonlinearity: Nonlinearity) -> Self {
        Self {
            kind: EquationKind::Quasilinear,
            metric,
            nonlinearity,
            ..Self::linear()
        }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_lower_order(mut self, lower: LowerOrder) -> Self {
        self.lower_order = lower;
        self
    }

    pub fn validate(&self, lattice: &LatticeBox) -> Result<()> {
        let d = lattice.dim();
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self.kind {
            EquationKind::Linear => {
                if !self.metric.is_identity() || !self.nonlinearity.is_none() {
                    return bad("linear equations take the identity metric and no nonlinearity".into());
                }
            }
            EquationKind::Semilinear => {
                if !self.metric.is_identity() {
                    return bad("semilinear equations take the identity metric".into());
                }
            }
            EquationKind::Quasilinear => {}
        }
        match &self.nonlinearity {
            Nonlinearity::Power { mu, p } => {
                if !(*p > 1.0) {
                    return bad(format!("power p = {p} must exceed 1"));
                }
                if *mu != 1.0 && *mu != -1.0 {
                    return bad(format!("mu = {mu} must be +1 or -1"));
                }
            }
            Nonlinearity::DjSquared { axis } => lattice.check_axis(*axis)?,
            Nonlinearity::Custom(c) => {
                let f0 = (c.eval)(&Jet::default());
                if f0.norm() != 0.0 {
                    return bad(format!("custom nonlinearity `{}` has F(0) = {f0}", c.name));
                }
            }
            _ => {}
        }
        if !self.lower_order.bj.is_empty() && self.lower_order.bj.len() != d {
            return bad(format!(
                "lower-order drift has {} components for d = {d}",
                self.lower_order.bj.len()
            ));
        }
        if let Forcing::Point { site, .. } = &self.forcing {
            if site.len() != d {
                return bad(format!("forcing site {site:?} has wrong dimension"));
            }
        }
        Ok(())
    }

    /// Whether the right side needs `partial_j u` on the current iterate.
    pub fn needs_gradient(&self) -> bool {
        self.metric.needs_gradient()
            || self.nonlinearity.needs_gradient()
            || self.lower_order.has_drift()
    }

    /// Whether the coefficient or source reads `partial_j u`.
    pub fn metric_or_source_needs_gradient(&self) -> bool {
        self.metric.needs_gradient() || self.nonlinearity.needs_gradient()
    }

    /// Whether the coefficient and source depend on the unknown at all.
    pub fn is_state_dependent(&self) -> bool {
        !self.metric.is_identity() || !self.nonlinearity.is_none()
    }

    /// Hex SHA-256 prefix of the canonical JSON description; closures are
    /// represented by their names.
    pub fn spec_hash(&self) -> String {
        let mut desc = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        if let serde_json::Value::Object(map) = &mut desc {
            if let Metric::Custom(c) = &self.metric {
                map.insert("metric".into(), format!("custom:{}", c.name).into());
            }
            if let Nonlinearity::Custom(c) = &self.nonlinearity {
                map.insert("nonlinearity".into(), format!("custom:{}", c.name).into());
            }
            if let Forcing::Custom(c) = &self.forcing {
                map.insert("forcing".into(), format!("custom:{}", c.name).into());
            }
        }
        hash_hex(desc.to_string().as_bytes())
    }
}

/// First 16 hex digits of SHA-256.
pub fn hash_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_box;

    #[test]
    fn power_nonlinearity() {
        let f = Nonlinearity::Power { mu: 1.0, p: 3.0 };
        let jet = Jet {
            u: Complex64::new(2.0, 0.0),
            ..Jet::default()
        };
        assert_eq!(f.eval(&jet), Complex64::new(8.0, 0.0));
        assert_eq!(f.eval(&Jet::default()), Complex64::default());
    }

    #[test]
    fn validation() {
        let b = make_box(1, 8).unwrap();
        assert!(EquationSpec::linear().validate(&b).is_ok());
        assert!(EquationSpec::power(-1.0, 3.0).validate(&b).is_ok());
        assert!(EquationSpec::power(0.5, 3.0).validate(&b).is_err());
        assert!(EquationSpec::power(1.0, 1.0).validate(&b).is_err());
        let mut s = EquationSpec::linear();
        s.nonlinearity = Nonlinearity::DtSquared;
        assert!(s.validate(&b).is_err());
        let q = EquationSpec::quasilinear(
            Metric::Conformal { c0: 1.0, c1: 0.0, c2: 1.0 },
            Nonlinearity::DjSquared { axis: 2 },
        );
        assert!(q.validate(&b).is_err());
        let custom = EquationSpec::quasilinear(
            Metric::Identity,
            Nonlinearity::Custom(CustomSource {
                name: "shifted".into(),
                eval: Arc::new(|j: &Jet| j.u + 1.0),
            }),
        );
        assert!(custom.validate(&b).is_err());
    }

    #[test]
    fn spec_json_round_trip_and_hash() {
        let s = EquationSpec::quasilinear(
            Metric::Conformal { c0: 1.0, c1: 0.0, c2: 1.0 },
            Nonlinearity::Power { mu: -1.0, p: 3.0 },
        );
        let text = serde_json::to_string(&s).unwrap();
        let back: EquationSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s.spec_hash(), back.spec_hash());
        assert_eq!(s.spec_hash().len(), 16);
        assert_ne!(s.spec_hash(), EquationSpec::linear().spec_hash());
        let bad = r#"{"kind":"linear","metrc":{"type":"identity"}}"#;
        assert!(serde_json::from_str::<EquationSpec>(bad).is_err());
    }
}
