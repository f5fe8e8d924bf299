//! Evaluation of `u_tt` from the current state, optionally with the
//! coefficient and source frozen at a previous iterate.

use num_complex::Complex64;

use super::spec::{EquationSpec, Jet, Metric};
use crate::lattice::{Field, LatticeBox, MAX_DIM};
use crate::spectral::{dft_forward, dft_inverse, SpectralField};

/// Per-frequency derivative symbols: `partial_j` is `i s_j(n)` with
/// `s_j = 2 sin(pi n_j / L)`.
#[derive(Clone, Debug)]
pub(crate) struct Symbols {
    lattice: LatticeBox,
    s: Vec<[f64; MAX_DIM]>,
    ksq: Vec<f64>,
}

impl Symbols {
    pub(crate) fn new(lattice: LatticeBox) -> Self {
        let l = lattice.side() as f64;
        let d = lattice.dim();
        let s: Vec<[f64; MAX_DIM]> = (0..lattice.total())
            .map(|i| {
                let n = lattice.positions(i);
                let mut row = [0.0; MAX_DIM];
                for j in 0..d {
                    row[j] = 2.0 * (std::f64::consts::PI * n[j] as f64 / l).sin();
                }
                row
            })
            .collect();
        let ksq = s.iter().map(|r| r.iter().map(|x| x * x).sum()).collect();
        Self { lattice, s, ksq }
    }

    fn transformed(&self, hat: &SpectralField, f: impl Fn(usize) -> Complex64) -> Field {
        let coeffs = hat
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, z)| z * f(i))
            .collect();
        dft_inverse(&SpectralField::from_coeffs(self.lattice, coeffs).expect("same box"))
    }

    pub(crate) fn partial(&self, hat: &SpectralField, axis: usize) -> Field {
        self.transformed(hat, |i| Complex64::new(0.0, self.s[i][axis - 1]))
    }

    pub(crate) fn second(&self, hat: &SpectralField, j: usize, k: usize) -> Field {
        self.transformed(hat, |i| Complex64::new(-self.s[i][j - 1] * self.s[i][k - 1], 0.0))
    }

    pub(crate) fn laplacian(&self, hat: &SpectralField) -> Field {
        self.transformed(hat, |i| Complex64::new(-self.ksq[i], 0.0))
    }
}

/// Right side of `u_tt = g^{jk} partial_jk u + F - b u_t - b^j partial_j u - c u + forcing`.
#[derive(Clone, Debug)]
pub(crate) struct RightSide<'a> {
    pub(crate) spec: &'a EquationSpec,
    pub(crate) symbols: Symbols,
}

impl<'a> RightSide<'a> {
    pub(crate) fn new(spec: &'a EquationSpec, lattice: LatticeBox) -> Self {
        Self {
            spec,
            symbols: Symbols::new(lattice),
        }
    }

    fn lattice(&self) -> LatticeBox {
        self.symbols.lattice
    }

    /// Pointwise jets `(u, u_t, partial u)`; the gradient is only filled when
    /// the coefficient or source needs it.
    pub(crate) fn jets(&self, u: &Field, v: &Field) -> Vec<Jet> {
        let d = self.lattice().dim();
        let grads: Vec<Field> = if self.spec.metric_or_source_needs_gradient() {
            let hat = dft_forward(u);
            (1..=d).map(|j| self.symbols.partial(&hat, j)).collect()
        } else {
            Vec::new()
        };
        (0..u.len())
            .map(|i| {
                let mut du = [Complex64::default(); MAX_DIM];
                for (j, g) in grads.iter().enumerate() {
                    du[j] = g.values()[i];
                }
                Jet {
                    u: u.values()[i],
                    ut: v.values()[i],
                    du,
                }
            })
            .collect()
    }

    /// `sup_x sum_{jk} |g^{jk}|` over the given jets.
    pub(crate) fn coefficient_bound(&self, jets: &[Jet]) -> f64 {
        let d = self.lattice().dim();
        match self.spec.metric {
            Metric::Identity => d as f64,
            _ => jets
                .iter()
                .map(|j| self.spec.metric.abs_sum(j, d))
                .fold(0.0, f64::max),
        }
    }

    /// `u_tt` at `(u, v, t)`. With `frozen`, the coefficient and the source are
    /// evaluated on those jets instead of the current state.
    pub(crate) fn acceleration(&self, u: &Field, v: &Field, t: f64, frozen: Option<&[Jet]>) -> Field {
        let lattice = self.lattice();
        let d = lattice.dim();
        let spec = self.spec;
        let hat = dft_forward(u);
        let current_jets;
        let jets: Option<&[Jet]> = if spec.is_state_dependent() {
            match frozen {
                Some(j) => Some(j),
                None => {
                    current_jets = self.jets(u, v);
                    Some(&current_jets)
                }
            }
        } else {
            None
        };

        let mut acc: Vec<Complex64> = match &spec.metric {
            Metric::Custom(_) => {
                let jets = jets.expect("state-dependent");
                let mut out = vec![Complex64::default(); u.len()];
                let coeffs: Vec<_> = jets.iter().map(|j| spec.metric.eval(j, d)).collect();
                for a in 1..=d {
                    for b in a..=d {
                        let second = self.symbols.second(&hat, a, b);
                        for (i, z) in second.values().iter().enumerate() {
                            let g = coeffs[i];
                            let w = if a == b {
                                g[a - 1][a - 1]
                            } else {
                                g[a - 1][b - 1] + g[b - 1][a - 1]
                            };
                            out[i] += w * z;
                        }
                    }
                }
                out
            }
            metric => {
                let lap = self.symbols.laplacian(&hat).into_values();
                if metric.is_identity() {
                    lap
                } else {
                    let jets = jets.expect("state-dependent");
                    lap.iter()
                        .zip(jets)
                        .map(|(z, j)| z * metric.conformal_factor(j).expect("conformal"))
                        .collect()
                }
            }
        };

        if !spec.nonlinearity.is_none() {
            let jets = jets.expect("state-dependent");
            for (a, j) in acc.iter_mut().zip(jets) {
                *a += spec.nonlinearity.eval(j);
            }
        }

        let lower = &spec.lower_order;
        if lower.b != 0.0 || lower.c != 0.0 {
            for ((a, uu), vv) in acc.iter_mut().zip(u.values()).zip(v.values()) {
                *a -= vv * lower.b + uu * lower.c;
            }
        }
        for (j, &bj) in lower.bj.iter().enumerate() {
            if bj != 0.0 {
                let du = self.symbols.partial(&hat, j + 1);
                for (a, z) in acc.iter_mut().zip(du.values()) {
                    *a -= z * bj;
                }
            }
        }

        if let Some(force) = spec.forcing.at(t, &lattice) {
            for (a, z) in acc.iter_mut().zip(force.values()) {
                *a += z;
            }
        }
        Field::from_values(lattice, acc).expect("length preserved")
    }
}
