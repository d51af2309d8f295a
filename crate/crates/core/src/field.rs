//! Real and complex fields sampled on a [`GridSpec`], with quadrature, norms and CSV dumps.
//!
//! Fields are immutable once built: every operation returns a fresh field.

use std::io::{BufRead, Write};

use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scalar::Real;

fn check_finite<T: Real>(values: &[T], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

fn check_len<T>(grid: &GridSpec<T>, len: usize) -> Result<()>
where
    T: Real,
{
    if grid.len() != len {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: len,
        });
    }
    Ok(())
}

/// A real value per grid node (density, phase, potential, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every node (`y` is zero on 1D grids).
    pub fn from_fn(grid: GridSpec<T>, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.position(i);
                f(p[0], p[1])
            })
            .collect();
        Self { grid, values }
    }

    pub fn constant(grid: GridSpec<T>, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn ensure_finite(&self) -> Result<()> {
        check_finite(&self.values, "scalar field")
    }

    /// Riemann sum times cell volume; spectrally accurate for smooth periodic integrands.
    pub fn integrate(&self) -> Result<T> {
        self.ensure_finite()?;
        Ok(self.sum() * self.grid.cell_volume())
    }

    fn sum(&self) -> T {
        // pairwise-ish: accumulate in chunks to limit round-off on large grids
        self.values
            .chunks(256)
            .map(|c| c.iter().copied().sum::<T>())
            .sum()
    }

    pub fn max(&self) -> T {
        self.values
            .iter()
            .copied()
            .fold(T::neg_infinity(), Float::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), Float::min)
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, &v| Float::max(m, Float::abs(v)))
    }

    /// `sqrt(∫ f² dV)`.
    pub fn l2_norm(&self) -> T {
        l2(&self.values, self.grid.cell_volume(), None)
    }

    /// `sqrt(∫ (f - g)² dV)`.
    pub fn l2_distance(&self, other: &Self) -> Result<T> {
        self.grid.ensure_same(&other.grid)?;
        let d: Vec<T> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(l2(&d, self.grid.cell_volume(), None))
    }

    /// Scales the field so that it integrates to one. Fails if the integral is not positive.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.integrate()?;
        if total <= T::zero() {
            return Err(Error::Config(
                "cannot normalize a field with non-positive mass".into(),
            ));
        }
        Ok(self.scale(T::one() / total))
    }

    /// Density-role check: non-negative everywhere and unit mass within `tol`.
    pub fn is_density(&self, tol: T) -> bool {
        self.values.iter().all(|&v| v >= T::zero())
            && self
                .integrate()
                .map(|m| Float::abs(m - T::one()) <= tol)
                .unwrap_or(false)
    }
}

/// `sqrt(sum v² * dv)`, optionally restricted by a mask.
pub(crate) fn l2<T: Real>(values: &[T], dv: T, mask: Option<&[bool]>) -> T {
    let s: T = match mask {
        Some(m) => values
            .iter()
            .zip(m)
            .filter(|(_, &keep)| keep)
            .map(|(&v, _)| v * v)
            .sum(),
        None => values.iter().map(|&v| v * v).sum(),
    };
    Float::sqrt(s * dv)
}

/// One real component field per grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    grid: GridSpec<T>,
    components: Vec<Vec<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn new(grid: GridSpec<T>, components: Vec<Vec<T>>) -> Result<Self> {
        if components.len() != grid.dims() {
            return Err(Error::Dimension {
                expected: grid.dims(),
                got: components.len(),
            });
        }
        for c in &components {
            check_len(&grid, c.len())?;
        }
        Ok(Self { grid, components })
    }

    pub fn from_scalars(components: Vec<ScalarField<T>>) -> Result<Self> {
        let grid = *components
            .first()
            .ok_or_else(|| Error::Config("vector field needs at least one component".into()))?
            .grid();
        for c in &components {
            grid.ensure_same(c.grid())?;
        }
        Self::new(grid, components.into_iter().map(|c| c.values).collect())
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self {
            grid,
            components: vec![vec![T::zero(); grid.len()]; grid.dims()],
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn dims(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, axis: usize) -> &[T] {
        &self.components[axis]
    }

    pub fn component_field(&self, axis: usize) -> ScalarField<T> {
        ScalarField {
            grid: self.grid,
            values: self.components[axis].clone(),
        }
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        })
    }

    /// Multiplies every component pointwise by a scalar field.
    pub fn mul_scalar_field(&self, s: &ScalarField<T>) -> Result<Self> {
        self.grid.ensure_same(s.grid())?;
        Ok(Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|c| c.iter().zip(s.values()).map(|(&a, &b)| a * b).collect())
                .collect(),
        })
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn ensure_finite(&self) -> Result<()> {
        for c in &self.components {
            check_finite(c, "vector field")?;
        }
        Ok(())
    }

    /// `sqrt(∫ |v|² dV)`, optionally restricted to masked nodes.
    pub fn l2_norm_masked(&self, mask: Option<&[bool]>) -> T {
        let dv = self.grid.cell_volume();
        let s: T = self
            .components
            .iter()
            .map(|c| {
                let n = l2(c, dv, mask);
                n * n
            })
            .sum();
        Float::sqrt(s)
    }

    pub fn l2_norm(&self) -> T {
        self.l2_norm_masked(None)
    }

    pub fn l2_distance_masked(&self, other: &Self, mask: Option<&[bool]>) -> Result<T> {
        Ok(self.zip_map(other, |a, b| a - b)?.l2_norm_masked(mask))
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> T {
        self.components
            .iter()
            .flatten()
            .fold(T::zero(), |m, &v| Float::max(m, Float::abs(v)))
    }

    /// Euclidean inner product `∫ a·b dV` over masked nodes.
    pub fn dot_masked(&self, other: &Self, mask: Option<&[bool]>) -> Result<T> {
        self.grid.ensure_same(&other.grid)?;
        let mut s = T::zero();
        for (a, b) in self.components.iter().zip(&other.components) {
            for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
                if mask.is_none_or(|m| m[i]) {
                    s += x * y;
                }
            }
        }
        Ok(s * self.grid.cell_volume())
    }
}

/// Complex wave function sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField<T> {
    grid: GridSpec<T>,
    values: Vec<Complex<T>>,
}

impl<T: Real> WaveField<T> {
    pub fn new(grid: GridSpec<T>, values: Vec<Complex<T>>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec<T>, f: impl Fn(T, T) -> Complex<T>) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.position(i);
                f(p[0], p[1])
            })
            .collect();
        Self { grid, values }
    }

    /// Real-valued wave function from a real field.
    pub fn from_real(f: &ScalarField<T>) -> Self {
        Self {
            grid: f.grid,
            values: f
                .values
                .iter()
                .map(|&v| Complex::new(v, T::zero()))
                .collect(),
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self
            .values
            .iter()
            .position(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            Some(index) => Err(Error::NonFinite {
                what: "wave field",
                index,
            }),
            None => Ok(()),
        }
    }

    /// `|Ψ|²` as a scalar field.
    pub fn density(&self) -> ScalarField<T> {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|c| c.norm_sqr()).collect(),
        }
    }

    /// `∫ |Ψ|² dV`.
    pub fn norm_sqr(&self) -> T {
        let s: T = self
            .values
            .chunks(256)
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<T>())
            .sum();
        s * self.grid.cell_volume()
    }

    /// Rescales so that `∫ |Ψ|² dV = 1`.
    pub fn normalized(&self) -> Result<Self> {
        self.ensure_finite()?;
        let n = self.norm_sqr();
        if n <= T::zero() {
            return Err(Error::Config(
                "cannot normalize a zero wave function".into(),
            ));
        }
        Ok(self.scale(Complex::new(T::one() / Float::sqrt(n), T::zero())))
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    /// `∫ conj(self) · other dV`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        self.grid.ensure_same(&other.grid)?;
        let s = self
            .values
            .iter()
            .zip(&other.values)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
                acc + a.conj() * b
            });
        Ok(s * self.grid.cell_volume())
    }

    /// `sqrt(∫ |Ψ - Φ|² dV)`.
    pub fn l2_distance(&self, other: &Self) -> Result<T> {
        self.grid.ensure_same(&other.grid)?;
        let s: T = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).norm_sqr())
            .sum();
        Ok(Float::sqrt(s * self.grid.cell_volume()))
    }

    /// L2 distance after removing the best global phase between the two fields.
    pub fn l2_distance_up_to_phase(&self, other: &Self) -> Result<T> {
        let ov = self.inner(other)?;
        let n = ov.norm();
        let phase = if n > T::zero() {
            ov / n
        } else {
            Complex::new(T::one(), T::zero())
        };
        self.scale(phase).l2_distance(other)
    }

    /// Real part as a scalar field.
    pub fn real_part(&self) -> ScalarField<T> {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|c| c.re).collect(),
        }
    }
}

fn csv_header<T: Real>(grid: &GridSpec<T>) -> String {
    let dims = grid.dims();
    let extent: Vec<String> = (0..dims).map(|a| grid.extent(a).to_string()).collect();
    let points: Vec<String> = (0..dims).map(|a| grid.points(a).to_string()).collect();
    format!("# grid: {},{},{}", dims, extent.join("x"), points.join("x"))
}

fn write_rows<T: Real, W: Write>(
    grid: &GridSpec<T>,
    mut out: W,
    row: impl Fn(usize) -> Vec<T>,
) -> Result<()> {
    writeln!(out, "{}", csv_header(grid))?;
    for i in 0..grid.len() {
        let p = grid.position(i);
        write!(out, "{i},{}", p[0])?;
        if grid.dims() == 2 {
            write!(out, ",{}", p[1])?;
        }
        for v in row(i) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

impl<T: Real> ScalarField<T> {
    /// Writes `# grid: dims,extent,points` then `index,x[,y],value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.grid, out, |i| vec![self.values[i]])
    }
}

impl<T: Real> VectorField<T> {
    /// Same layout as the scalar dump with one value column per component.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.grid, out, |i| {
            self.components.iter().map(|c| c[i]).collect()
        })
    }
}

impl<T: Real> WaveField<T> {
    /// Writes `index,x[,y],value,value_imag` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.grid, out, |i| {
            vec![self.values[i].re, self.values[i].im]
        })
    }
}

/// Parsed contents of a field CSV dump.
#[derive(Debug, Clone)]
pub struct CsvField<T> {
    pub dims: usize,
    pub extent: Vec<T>,
    pub points: Vec<usize>,
    /// Node coordinates, one entry per row (`dims` values each).
    pub coords: Vec<Vec<T>>,
    /// Value columns, one entry per row.
    pub values: Vec<Vec<T>>,
}

impl<T: Real> CsvField<T> {
    /// Reconstructs the grid; the origin is taken from the first row's coordinates.
    pub fn grid(&self) -> Result<GridSpec<T>> {
        let first = self
            .coords
            .first()
            .ok_or_else(|| Error::Parse("field dump has no rows".into()))?;
        match self.dims {
            1 => GridSpec::line(first[0], self.extent[0], self.points[0]),
            2 => GridSpec::plane(
                [first[0], first[1]],
                [self.extent[0], self.extent[1]],
                [self.points[0], self.points[1]],
            ),
            d => Err(Error::Parse(format!("unsupported dims {d}"))),
        }
    }

    pub fn to_scalar(&self) -> Result<ScalarField<T>> {
        let vals = self.values.iter().map(|r| r[0]).collect();
        ScalarField::new(self.grid()?, vals)
    }

    pub fn to_wave(&self) -> Result<WaveField<T>> {
        let vals = self
            .values
            .iter()
            .map(|r| {
                let im = r.get(1).copied().unwrap_or_else(T::zero);
                Complex::new(r[0], im)
            })
            .collect();
        WaveField::new(self.grid()?, vals)
    }
}

fn parse_num<T: Real>(s: &str) -> Result<T> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number {s:?}")))?;
    Ok(T::lit(v))
}

/// Reads any field dump produced by the `write_csv` methods.
pub fn read_field_csv<T: Real, R: BufRead>(input: R) -> Result<CsvField<T>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field dump".into()))??;
    let spec = header
        .strip_prefix("# grid:")
        .ok_or_else(|| Error::Parse(format!("missing grid header: {header:?}")))?;
    let parts: Vec<&str> = spec.trim().split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("malformed grid header: {header:?}")));
    }
    let dims: usize = parts[0]
        .parse()
        .map_err(|_| Error::Parse(format!("bad dims {:?}", parts[0])))?;
    let extent = parts[1]
        .split('x')
        .map(parse_num::<T>)
        .collect::<Result<Vec<_>>>()?;
    let points = parts[2]
        .split('x')
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad point count {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if extent.len() != dims || points.len() != dims {
        return Err(Error::Parse("header axis count disagrees with dims".into()));
    }
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 2 + dims {
            return Err(Error::Parse(format!("short row {line:?}")));
        }
        coords.push(
            cols[1..1 + dims]
                .iter()
                .map(|s| parse_num(s))
                .collect::<Result<Vec<T>>>()?,
        );
        values.push(
            cols[1 + dims..]
                .iter()
                .map(|s| parse_num(s))
                .collect::<Result<Vec<T>>>()?,
        );
    }
    let expected: usize = points.iter().product();
    if values.len() != expected {
        return Err(Error::Dimension {
            expected,
            got: values.len(),
        });
    }
    Ok(CsvField {
        dims,
        extent,
        points,
        coords,
        values,
    })
}
