//! Periodic truncation of the lattice graph `Z^d` and the fields living on it.
//!
//! A [`LatticeBox`] is the discrete torus `(Z/LZ)^d`. Sites are stored
//! row-major (axis 1 slowest) by their residue `m_j mod L`, so index 0 is the
//! origin and the storage order coincides with the natural FFT order. Signed
//! coordinates are the representatives in `[-L/2, L/2)`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// Width of the seam band, as a fraction of `L`, used by [`Field::seam_tail_fraction`].
pub const SEAM_BAND_FRACTION: f64 = 0.125;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeBox {
    d: usize,
    l: usize,
}

impl LatticeBox {
    /// Validates `1 <= d <= 3`, `L` even and `L >= 4`.
    pub fn new(d: usize, l: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidBox(format!("dimension {d} not in 1..=3")));
        }
        if l < 4 {
            return Err(Error::InvalidBox(format!("L = {l} must be at least 4")));
        }
        if l % 2 != 0 {
            return Err(Error::InvalidBox(format!(
                "L = {l} is odd; signed coordinates need even L"
            )));
        }
        Ok(Self { d, l })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.l
    }

    pub fn total(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Stride of 1-based `axis` in the flat layout.
    pub fn stride(&self, axis: usize) -> usize {
        debug_assert!(axis >= 1 && axis <= self.d);
        self.l.pow((self.d - axis) as u32)
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis == 0 || axis > self.d {
            Err(Error::AxisOutOfRange { axis, d: self.d })
        } else {
            Ok(())
        }
    }

    pub fn signed(&self, position: usize) -> i64 {
        let p = position as i64;
        let l = self.l as i64;
        if p < l / 2 {
            p
        } else {
            p - l
        }
    }

    pub fn position(&self, m: i64) -> usize {
        m.rem_euclid(self.l as i64) as usize
    }

    pub fn contains_signed(&self, m: &[i64]) -> bool {
        let half = (self.l / 2) as i64;
        m.len() == self.d && m.iter().all(|&c| c >= -half && c < half)
    }

    /// Per-axis residues `0..L` of a flat index.
    pub fn positions(&self, mut index: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for a in (0..self.d).rev() {
            out[a] = index % self.l;
            index /= self.l;
        }
        out
    }

    /// Signed coordinates of a flat index; entries past `d` are zero.
    pub fn coord(&self, index: usize) -> [i64; MAX_DIM] {
        let pos = self.positions(index);
        let mut out = [0; MAX_DIM];
        for a in 0..self.d {
            out[a] = self.signed(pos[a]);
        }
        out
    }

    /// Flat index of a signed (or any integer) coordinate, wrapped onto the torus.
    pub fn index(&self, m: &[i64]) -> usize {
        debug_assert_eq!(m.len(), self.d);
        m.iter()
            .fold(0usize, |acc, &c| acc * self.l + self.position(c))
    }

    /// Flat index of the site `index + shift * e_axis` (periodic).
    pub fn shifted(&self, index: usize, axis: usize, shift: i64) -> usize {
        let stride = self.stride(axis);
        let p = (index / stride) % self.l;
        let q = (p as i64 + shift).rem_euclid(self.l as i64) as usize;
        index + q * stride - p * stride
    }

    /// `<m> = (1 + |m|^2)^{1/2}` at the signed coordinate of `index`.
    pub fn weight_at(&self, index: usize) -> f64 {
        let m = self.coord(index);
        let r2: f64 = m[..self.d].iter().map(|&c| (c * c) as f64).sum();
        (1.0 + r2).sqrt()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.total()).map(|i| self.weight_at(i)).collect()
    }

    pub fn describe(&self) -> String {
        format!("d={} L={}", self.d, self.l)
    }

    pub fn ensure_same(&self, other: &LatticeBox) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::BoxMismatch {
                left: self.describe(),
                right: other.describe(),
            })
        }
    }
}

pub fn make_box(d: usize, l: usize) -> Result<LatticeBox> {
    LatticeBox::new(d, l)
}

/// `<m> = (1+|m|^2)^{1/2}` for a signed coordinate valid in `lattice`.
pub fn weight(lattice: &LatticeBox, m: &[i64]) -> Result<f64> {
    if !lattice.contains_signed(m) {
        return Err(Error::InvalidArgument(format!(
            "{m:?} is not a signed coordinate of {}",
            lattice.describe()
        )));
    }
    let r2: f64 = m.iter().map(|&c| (c * c) as f64).sum();
    Ok((1.0 + r2).sqrt())
}

/// Complex scalar function on a [`LatticeBox`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    lattice: LatticeBox,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(lattice: LatticeBox) -> Self {
        Self {
            lattice,
            values: vec![Complex64::new(0.0, 0.0); lattice.total()],
        }
    }

    pub fn constant(lattice: LatticeBox, value: Complex64) -> Self {
        Self {
            lattice,
            values: vec![value; lattice.total()],
        }
    }

    pub fn from_values(lattice: LatticeBox, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != lattice.total() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a box of {} sites",
                values.len(),
                lattice.total()
            )));
        }
        Ok(Self { lattice, values })
    }

    pub fn from_real(lattice: LatticeBox, values: &[f64]) -> Result<Self> {
        Self::from_values(
            lattice,
            values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// Builds a field from a function of the signed coordinate.
    pub fn from_fn(lattice: LatticeBox, mut f: impl FnMut(&[i64]) -> Complex64) -> Self {
        let values = (0..lattice.total())
            .map(|i| {
                let m = lattice.coord(i);
                f(&m[..lattice.dim()])
            })
            .collect();
        Self { lattice, values }
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, m: &[i64]) -> Complex64 {
        self.values[self.lattice.index(m)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr_sum().sqrt()
    }

    pub fn norm_sqr_sum(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }

    pub fn scale(&self, c: Complex64) -> Field {
        self.map(|z| z * c)
    }

    pub fn scale_real(&self, c: f64) -> Field {
        self.map(|z| z * c)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            lattice: self.lattice,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &Field,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Field> {
        self.lattice.ensure_same(&other.lattice)?;
        Ok(Field {
            lattice: self.lattice,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b * c)
    }

    /// Maximum absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.lattice.ensure_same(&other.lattice)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Share of the squared l2 mass lying in the band `max_j |m_j| >= L/2 - L/8`
    /// next to the periodic seam. Zero for the zero field.
    pub fn seam_tail_fraction(&self) -> f64 {
        let total = self.norm_sqr_sum();
        if total == 0.0 {
            return 0.0;
        }
        let l = self.lattice.side() as f64;
        let edge = l / 2.0 - (l * SEAM_BAND_FRACTION).max(1.0);
        let tail: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let m = self.lattice.coord(*i);
                m[..self.lattice.dim()]
                    .iter()
                    .any(|&c| (c.abs() as f64) >= edge)
            })
            .map(|(_, z)| z.norm_sqr())
            .sum();
        tail / total
    }
}

/// `delta_site`: one at `site`, zero elsewhere.
pub fn delta_field(lattice: LatticeBox, site: &[i64]) -> Result<Field> {
    if site.len() != lattice.dim() {
        return Err(Error::InvalidArgument(format!(
            "site {site:?} has wrong dimension for {}",
            lattice.describe()
        )));
    }
    let mut f = Field::zeros(lattice);
    let i = lattice.index(site);
    f.values[i] = Complex64::new(1.0, 0.0);
    Ok(f)
}

/// The Cauchy pair `(u, u_t)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub u: Field,
    pub ut: Field,
    pub t: f64,
}

impl WaveState {
    pub fn new(u: Field, ut: Field, t: f64) -> Result<Self> {
        u.lattice().ensure_same(ut.lattice())?;
        Ok(Self { u, ut, t })
    }

    pub fn zeros(lattice: LatticeBox) -> Self {
        Self {
            u: Field::zeros(lattice),
            ut: Field::zeros(lattice),
            t: 0.0,
        }
    }

    pub fn lattice(&self) -> &LatticeBox {
        self.u.lattice()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.ut.is_finite()
    }

    pub fn scale(&self, c: Complex64) -> WaveState {
        WaveState {
            u: self.u.scale(c),
            ut: self.ut.scale(c),
            t: self.t,
        }
    }
}

const SNAPSHOT_MAGIC: &str = "lattwave-field v1";

/// Writes the ASCII snapshot: header `lattwave-field v1 d=<d> L=<L>` then one
/// `re im` line per site in storage order, 17 significant digits.
pub fn write_snapshot<W: Write>(field: &Field, mut out: W) -> Result<()> {
    out.write_all(snapshot_string(field).as_bytes())?;
    Ok(())
}

pub fn snapshot_string(field: &Field) -> String {
    let lattice = field.lattice();
    let mut s = String::with_capacity(48 * field.len() + 32);
    let _ = writeln!(
        s,
        "{SNAPSHOT_MAGIC} d={} L={}",
        lattice.dim(),
        lattice.side()
    );
    for z in field.values() {
        let _ = writeln!(s, "{:.16e} {:.16e}", z.re, z.im);
    }
    s
}

/// Reads one snapshot block from a line iterator.
pub fn read_snapshot_lines<I, S>(lines: &mut I) -> Result<Field>
where
    I: Iterator<Item = S>,
    S: AsRef<str>,
{
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header".into()))?;
    let header = header.as_ref().trim();
    let rest = header
        .strip_prefix(SNAPSHOT_MAGIC)
        .ok_or_else(|| Error::Parse(format!("bad header `{header}`")))?;
    let mut d = None;
    let mut l = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("d=") {
            d = v.parse::<usize>().ok();
        } else if let Some(v) = tok.strip_prefix("L=") {
            l = v.parse::<usize>().ok();
        } else {
            return Err(Error::Parse(format!("unexpected token `{tok}`")));
        }
    }
    let (d, l) = match (d, l) {
        (Some(d), Some(l)) => (d, l),
        _ => return Err(Error::Parse(format!("bad header `{header}`"))),
    };
    let lattice = LatticeBox::new(d, l)?;
    let mut values = Vec::with_capacity(lattice.total());
    for k in 0..lattice.total() {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("truncated at site {k}")))?;
        let mut parts = line.as_ref().split_whitespace();
        let mut next = || -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| Error::Parse(format!("short line at site {k}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("site {k}: {e}")))
        };
        let re = next()?;
        let im = next()?;
        values.push(Complex64::new(re, im));
    }
    Field::from_values(lattice, values)
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<Field> {
    let lines: Vec<String> = input.lines().collect::<std::io::Result<_>>()?;
    let mut it = lines.iter();
    read_snapshot_lines(&mut it)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_examples() {
        let b = make_box(1, 8).unwrap();
        let coords: Vec<i64> = (0..8).map(|i| b.coord(i)[0]).collect();
        let mut sorted = coords.clone();
        sorted.sort();
        assert_eq!(sorted, (-4..4).collect::<Vec<_>>());
        assert_eq!(make_box(2, 4).unwrap().total(), 16);
        assert!(make_box(3, 3).is_err());
        assert!(make_box(0, 8).is_err());
        assert!(make_box(4, 8).is_err());
        assert!(make_box(1, 2).is_err());
    }

    #[test]
    fn index_coord_round_trip() {
        for (d, l) in [(1, 8), (2, 6), (3, 4)] {
            let b = make_box(d, l).unwrap();
            for i in 0..b.total() {
                let m = b.coord(i);
                assert_eq!(b.index(&m[..d]), i);
                assert!(b.contains_signed(&m[..d]));
            }
        }
    }

    #[test]
    fn weight_examples() {
        let b2 = make_box(2, 16).unwrap();
        assert_eq!(weight(&b2, &[0, 0]).unwrap(), 1.0);
        assert!((weight(&b2, &[3, 4]).unwrap() - 26f64.sqrt()).abs() < 1e-15);
        let b1 = make_box(1, 8).unwrap();
        assert!((weight(&b1, &[-4]).unwrap() - 17f64.sqrt()).abs() < 1e-15);
        assert!(weight(&b1, &[4]).is_err());
    }

    #[test]
    fn weight_even_on_representable_points() {
        let b = make_box(2, 8).unwrap();
        for i in 0..b.total() {
            let m = b.coord(i);
            let neg = [-m[0], -m[1]];
            if b.contains_signed(&neg) {
                assert_eq!(weight(&b, &m[..2]).unwrap(), weight(&b, &neg).unwrap());
            }
        }
    }

    #[test]
    fn delta_examples() {
        let b = make_box(1, 8).unwrap();
        let d0 = delta_field(b, &[0]).unwrap();
        assert_eq!(d0.sum(), Complex64::new(1.0, 0.0));
        assert_eq!(d0.l2_norm(), 1.0);
        assert_eq!(d0.values()[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn shift_wraps() {
        let b = make_box(2, 4).unwrap();
        let i = b.index(&[1, -2]);
        let j = b.shifted(i, 2, -1);
        assert_eq!(b.coord(j)[..2], [1, 1]);
        let k = b.shifted(i, 1, 1);
        assert_eq!(b.coord(k)[..2], [-2, -2]);
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let b = make_box(2, 4).unwrap();
        let f = Field::from_fn(b, |m| {
            Complex64::new(1.0 / 3.0 + m[0] as f64, std::f64::consts::PI * m[1] as f64)
        });
        let text = snapshot_string(&f);
        assert!(text.starts_with("lattwave-field v1 d=2 L=4\n"));
        assert_eq!(text.lines().count(), 17);
        let g = read_snapshot(text.as_bytes()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn snapshot_rejects_garbage() {
        assert!(read_snapshot("nope\n".as_bytes()).is_err());
        assert!(read_snapshot("lattwave-field v1 d=1 L=4\n0 0\n".as_bytes()).is_err());
    }

    #[test]
    fn seam_fraction() {
        let b = make_box(1, 16).unwrap();
        assert_eq!(delta_field(b, &[0]).unwrap().seam_tail_fraction(), 0.0);
        assert_eq!(delta_field(b, &[-8]).unwrap().seam_tail_fraction(), 1.0);
        assert_eq!(Field::zeros(b).seam_tail_fraction(), 0.0);
    }
}
