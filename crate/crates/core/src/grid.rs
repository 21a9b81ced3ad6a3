//! Periodic truncated computational domain, sampled fields, quadrature and
//! the forward/inverse spectral transform.
//!
//! The box is `[-L/2, L/2)^N` with `M` points per axis and spacing `h = L/M`.
//! The frequency lattice is `xi_k = 2 pi k / L` for `k in {-M/2, ..., M/2-1}`,
//! stored in FFT layout (nonnegative indices first).
//!
//! Transform convention (Riemann-sum approximation of the continuum pair):
//!
//! ```text
//!   u_hat(xi_k) = h^N sum_x u(x) e^{-i xi_k . x}
//!   u(x)        = L^{-N} sum_k u_hat(xi_k) e^{+i xi_k . x}
//! ```
//!
//! so discrete quantities approximate continuum integrals with no stray
//! normalization factors: `integrate(u v) = L^{-N} sum_k u_hat conj(v_hat)`.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fft;
use crate::scalar::{kahan_sum, real, real_of_usize, Real};

/// Periodic box `[-L/2, L/2)^N` with `M` sample points per axis.
///
/// `Grid` is a small value type; fields carry their own copy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T: Real = f64> {
    dim: usize,
    extent: T,
    points: usize,
}

impl<T: Real> Grid<T> {
    /// Build a grid, rejecting odd `points`, non-positive `extent` and
    /// dimensions outside `{1, 2}`.
    pub fn new(dim: usize, extent: T, points: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(extent > T::zero()) || !extent.is_finite() {
            return Err(Error::InvalidGrid(format!("extent must be positive, got {extent}")));
        }
        if points % 2 != 0 || points < 8 {
            return Err(Error::InvalidGrid(format!(
                "points must be an even integer >= 8, got {points}"
            )));
        }
        Ok(Grid { dim, extent, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Box side length `L`.
    pub fn extent(&self) -> T {
        self.extent
    }

    /// Points per axis `M`.
    pub fn points(&self) -> usize {
        self.points
    }

    /// Sample spacing `h = L/M`.
    pub fn spacing(&self) -> T {
        self.extent / real_of_usize(self.points)
    }

    /// Total number of samples `M^N`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^N` of one cell.
    pub fn cell_volume(&self) -> T {
        let h = self.spacing();
        match self.dim {
            1 => h,
            _ => h * h,
        }
    }

    /// Coordinate of axis index `j`: `x_j = -L/2 + j h`.
    pub fn coord(&self, j: usize) -> T {
        debug_assert!(j < self.points);
        real_of_usize::<T>(j) * self.spacing() - self.extent * real(0.5)
    }

    /// Signed integer frequency behind FFT-layout axis index `j`.
    #[inline]
    pub fn signed_index(&self, j: usize) -> i64 {
        debug_assert!(j < self.points);
        if j < self.points / 2 {
            j as i64
        } else {
            j as i64 - self.points as i64
        }
    }

    /// Frequency `xi = 2 pi k / L` behind FFT-layout axis index `j`.
    #[inline]
    pub fn freq(&self, j: usize) -> T {
        let k = T::from_i64(self.signed_index(j)).expect("frequency index");
        real::<T>(2.0) * T::PI() * k / self.extent
    }

    /// Spatial coordinates of a flat row-major index (second entry 0 in 1D).
    #[inline]
    pub fn site(&self, flat: usize) -> [T; 2] {
        match self.dim {
            1 => [self.coord(flat), T::zero()],
            _ => [self.coord(flat / self.points), self.coord(flat % self.points)],
        }
    }

    /// Euclidean distance of a sample site from the origin.
    #[inline]
    pub fn radius(&self, flat: usize) -> T {
        let [x, y] = self.site(flat);
        (x * x + y * y).sqrt()
    }

    /// Euclidean norm `|xi|` of the frequency at a flat spectral index.
    #[inline]
    pub fn freq_norm(&self, flat: usize) -> T {
        match self.dim {
            1 => self.freq(flat).abs(),
            _ => {
                let fx = self.freq(flat / self.points);
                let fy = self.freq(flat % self.points);
                (fx * fx + fy * fy).sqrt()
            }
        }
    }

    /// `(-1)^{sum of axis indices}`: the phase relating the FFT kernel on
    /// `[0, L)` to the transform kernel on `[-L/2, L/2)`. Valid because `M`
    /// is even.
    #[inline]
    fn center_phase(&self, flat: usize) -> T {
        let parity = match self.dim {
            1 => flat,
            _ => flat / self.points + flat % self.points,
        };
        if parity % 2 == 0 {
            T::one()
        } else {
            -T::one()
        }
    }
}

/// Real-valued function sampled on a [`Grid`], stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: Real = f64> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    /// Zero field.
    pub fn zeros(grid: &Grid<T>) -> Self {
        Field { grid: *grid, values: vec![T::zero(); grid.len()] }
    }

    /// Constant field.
    pub fn constant(grid: &Grid<T>, value: T) -> Self {
        Field { grid: *grid, values: vec![value; grid.len()] }
    }

    /// Sample a function of the coordinates.
    pub fn from_fn(grid: &Grid<T>, mut f: impl FnMut([T; 2]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.site(i))).collect();
        Field { grid: *grid, values }
    }

    /// Wrap raw samples, validating length and finiteness.
    pub fn from_values(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("field contains NaN or Inf".into()));
        }
        Ok(Field { grid: *grid, values })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise map into a new field.
    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `self * c` into a new field.
    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// In-place `self += c * other`.
    pub fn add_scaled(&mut self, other: &Field<T>, c: T) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + c * b;
        }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }
}

/// Complex Fourier coefficients of a field, in FFT layout.
#[derive(Clone, Debug)]
pub struct SpectralField<T: Real = f64> {
    grid: Grid<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    pub fn from_coeffs(grid: &Grid<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { grid: *grid, coeffs })
    }

    /// Largest deviation from Hermitian symmetry, relative to the max
    /// coefficient modulus. Zero (to roundoff) for transforms of real fields.
    pub fn hermitian_defect(&self) -> T {
        let m = self.grid.points;
        let conj_index = |j: usize| (m - j) % m;
        let mut defect = T::zero();
        let mut scale = T::zero();
        for flat in 0..self.coeffs.len() {
            let mirror = match self.grid.dim {
                1 => conj_index(flat),
                _ => conj_index(flat / m) * m + conj_index(flat % m),
            };
            let d = (self.coeffs[flat] - self.coeffs[mirror].conj()).norm();
            defect = defect.max(d);
            scale = scale.max(self.coeffs[flat].norm());
        }
        if scale > T::zero() {
            defect / scale
        } else {
            T::zero()
        }
    }
}

fn run_fft<T: Real>(grid: &Grid<T>, buf: &mut [Complex<T>], inverse: bool) {
    match grid.dim {
        1 => fft::fft_1d(buf, inverse),
        _ => fft::fft_2d(buf, grid.points, inverse),
    }
}

/// Forward transform: `u_hat(xi_k) = h^N sum_x u(x) e^{-i xi_k . x}`.
pub fn transform<T: Real>(u: &Field<T>) -> SpectralField<T> {
    let grid = u.grid;
    let mut buf: Vec<Complex<T>> =
        u.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    run_fft(&grid, &mut buf, false);
    let hn = grid.cell_volume();
    for (flat, c) in buf.iter_mut().enumerate() {
        *c = *c * (hn * grid.center_phase(flat));
    }
    SpectralField { grid, coeffs: buf }
}

/// Inverse transform: `u(x) = L^{-N} sum_k u_hat(xi_k) e^{+i xi_k . x}`,
/// discarding the (roundoff-level) imaginary part.
pub fn inverse_transform<T: Real>(w: &SpectralField<T>) -> Field<T> {
    let (re, _) = inverse_transform_parts(w);
    re
}

/// Inverse transform keeping the imaginary part, for residue checks.
pub(crate) fn inverse_transform_parts<T: Real>(w: &SpectralField<T>) -> (Field<T>, T) {
    let grid = w.grid;
    let mut buf = w.coeffs.clone();
    for (flat, c) in buf.iter_mut().enumerate() {
        *c = *c * grid.center_phase(flat);
    }
    run_fft(&grid, &mut buf, true);
    let ln = match grid.dim {
        1 => grid.extent,
        _ => grid.extent * grid.extent,
    };
    let inv = T::one() / ln;
    let mut imag_sq = T::zero();
    let values = buf
        .iter()
        .map(|c| {
            imag_sq = imag_sq + c.im * c.im;
            c.re * inv
        })
        .collect();
    (Field { grid, values }, imag_sq.sqrt() * inv)
}

/// Transform complex samples with the same convention (used by the
/// time-dependent integrator).
pub fn transform_complex<T: Real>(grid: &Grid<T>, psi: &[Complex<T>]) -> Vec<Complex<T>> {
    assert_eq!(psi.len(), grid.len(), "sample count mismatch");
    let mut buf = psi.to_vec();
    run_fft(grid, &mut buf, false);
    let hn = grid.cell_volume();
    for (flat, c) in buf.iter_mut().enumerate() {
        *c = *c * (hn * grid.center_phase(flat));
    }
    buf
}

/// Inverse of [`transform_complex`].
pub fn inverse_transform_complex<T: Real>(grid: &Grid<T>, coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
    assert_eq!(coeffs.len(), grid.len(), "coefficient count mismatch");
    let mut buf = coeffs.to_vec();
    for (flat, c) in buf.iter_mut().enumerate() {
        *c = *c * grid.center_phase(flat);
    }
    run_fft(grid, &mut buf, true);
    let ln = match grid.dim {
        1 => grid.extent,
        _ => grid.extent * grid.extent,
    };
    let inv = T::one() / ln;
    for c in buf.iter_mut() {
        *c = *c * inv;
    }
    buf
}

/// Quadrature `h^N sum_x u(x)`: exact for band-limited periodic integrands.
pub fn integrate<T: Real>(u: &Field<T>) -> T {
    kahan_sum(u.values.iter().copied()) * u.grid.cell_volume()
}

/// `integrate(u * v)` without materializing the product.
pub fn integrate_product<T: Real>(u: &Field<T>, v: &Field<T>) -> T {
    assert_eq!(u.grid, v.grid, "fields live on different grids");
    kahan_sum(u.values.iter().zip(&v.values).map(|(&a, &b)| a * b)) * u.grid.cell_volume()
}

/// `L^2` norm `sqrt(integrate(u^2))`.
pub fn norm_l2<T: Real>(u: &Field<T>) -> T {
    integrate_product(u, u).sqrt()
}

/// Translate periodically: result(x) = u(x + shift), via a spectral phase.
pub fn translate<T: Real>(u: &Field<T>, shift: [T; 2]) -> Field<T> {
    let mut w = transform(u);
    let grid = u.grid;
    let m = grid.points;
    for (flat, c) in w.coeffs.iter_mut().enumerate() {
        let phase = match grid.dim {
            1 => grid.freq(flat) * shift[0],
            _ => grid.freq(flat / m) * shift[0] + grid.freq(flat % m) * shift[1],
        };
        *c = *c * Complex::new(phase.cos(), phase.sin());
    }
    inverse_transform(&w)
}

fn fmt_value<T: Real>(v: T) -> String {
    // 17 significant digits
    format!("{:.16e}", v)
}

/// Write the CSV dump format: header `# grid: dim=<N> L=<L> M=<M>`, then
/// `x[,y],value` rows in row-major order, 17 significant digits.
pub fn write_field_csv<T: Real>(u: &Field<T>, out: &mut impl Write) -> Result<()> {
    let g = u.grid;
    writeln!(out, "# grid: dim={} L={} M={}", g.dim, g.extent, g.points)?;
    let mut line = String::new();
    for (flat, &v) in u.values.iter().enumerate() {
        line.clear();
        let [x, y] = g.site(flat);
        write!(line, "{}", fmt_value(x)).expect("string write");
        if g.dim == 2 {
            write!(line, ",{}", fmt_value(y)).expect("string write");
        }
        write!(line, ",{}", fmt_value(v)).expect("string write");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Convenience wrapper writing to a path.
pub fn dump_field_csv<T: Real>(u: &Field<T>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field_csv(u, &mut f)
}

/// Read a CSV dump produced by [`write_field_csv`].
pub fn read_field_csv<T: Real>(input: &mut impl Read) -> Result<Field<T>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty field dump".into()))??;
    let rest = header
        .strip_prefix("# grid: ")
        .ok_or_else(|| Error::InvalidInput("missing grid header".into()))?;
    let mut dim = None;
    let mut extent = None;
    let mut points = None;
    for part in rest.split_whitespace() {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("bad header entry {part}")))?;
        match key {
            "dim" => dim = Some(val.parse::<usize>().map_err(|e| Error::InvalidInput(e.to_string()))?),
            "L" => extent = Some(val.parse::<f64>().map_err(|e| Error::InvalidInput(e.to_string()))?),
            "M" => points = Some(val.parse::<usize>().map_err(|e| Error::InvalidInput(e.to_string()))?),
            _ => return Err(Error::InvalidInput(format!("unknown header key {key}"))),
        }
    }
    let (dim, extent, points) = match (dim, extent, points) {
        (Some(d), Some(l), Some(m)) => (d, l, m),
        _ => return Err(Error::InvalidInput("incomplete grid header".into())),
    };
    let grid = Grid::new(dim, real::<T>(extent), points)?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let v = line
            .rsplit(',')
            .next()
            .ok_or_else(|| Error::InvalidInput("bad csv row".into()))?
            .parse::<f64>()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        values.push(real::<T>(v));
    }
    Field::from_values(&grid, values)
}
