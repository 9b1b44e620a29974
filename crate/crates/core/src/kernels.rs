//! Dispersal kernels: construction on a grid, periodic convolution,
//! reduction to a direction, and truncation to a ball.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::grid::{dot, norm, Field, Grid, Point};
use crate::spectral::KernelSpectrum;
use rustfft::num_complex::Complex64;

/// Grids with at least this many cells convolve through the FFT.
pub const SPECTRAL_THRESHOLD: usize = 256;

/// Kernels whose captured mass falls below this are rejected.
pub const MIN_CAPTURED_MASS: f64 = 0.99;

/// Smallest ratio `extent / scale` accepted by [`build_kernel`].
pub const EXTENT_TO_SCALE: f64 = 20.0;

/// A user-supplied density `a(y)`.
#[derive(Clone)]
pub struct TabulatedDensity {
    pub label: String,
    /// Characteristic length, used for the domain-size guard.
    pub scale: f64,
    density: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
}

impl TabulatedDensity {
    pub fn new(label: impl Into<String>, scale: f64, density: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        TabulatedDensity {
            label: label.into(),
            scale,
            density: Arc::new(density),
        }
    }

    pub fn eval(&self, y: Point) -> f64 {
        (self.density)(y)
    }
}

impl fmt::Debug for TabulatedDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tabulated({}, scale={})", self.label, self.scale)
    }
}

#[derive(Clone, Debug)]
pub enum KernelSpec {
    /// Product of normals; `sigma`/`mean` have one entry per axis (a single
    /// entry is broadcast).
    Gaussian { sigma: Vec<f64>, mean: Vec<f64> },
    UniformBall { radius: f64 },
    /// Multivariate Cauchy density `c (1 + |x/s|^2)^{-(1+d)/2} / s^d`.
    Cauchy { scale: f64 },
    Tabulated(TabulatedDensity),
}

impl KernelSpec {
    pub fn gaussian(sigma: f64, mean: f64) -> Self {
        KernelSpec::Gaussian {
            sigma: vec![sigma],
            mean: vec![mean],
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")));
        match self {
            KernelSpec::Gaussian { sigma, mean } => {
                if sigma.is_empty() || mean.is_empty() {
                    return Err(Error::InvalidParameter("gaussian needs sigma and mean".into()));
                }
                if let Some(&s) = sigma.iter().find(|s| !(**s > 0.0)) {
                    return bad("sigma", s);
                }
                Ok(())
            }
            KernelSpec::UniformBall { radius } if !(*radius > 0.0) => bad("radius", *radius),
            KernelSpec::Cauchy { scale } if !(*scale > 0.0) => bad("scale", *scale),
            KernelSpec::Tabulated(t) if !(t.scale > 0.0) => bad("scale", t.scale),
            _ => Ok(()),
        }
    }

    /// Characteristic length used by the tail-truncation guard.
    pub fn scale(&self) -> f64 {
        match self {
            KernelSpec::Gaussian { sigma, .. } => sigma.iter().copied().fold(0.0, f64::max),
            KernelSpec::UniformBall { radius } => *radius,
            KernelSpec::Cauchy { scale } => *scale,
            KernelSpec::Tabulated(t) => t.scale,
        }
    }

    fn per_axis(v: &[f64], axis: usize) -> f64 {
        if v.len() == 1 {
            v[0]
        } else {
            v[axis]
        }
    }

    /// Raw cell weight (density times cell volume) at offset `y`.
    fn cell_weight(&self, grid: &Grid, y: Point) -> f64 {
        let d = grid.dims();
        let vol = grid.cell_volume();
        match self {
            KernelSpec::Gaussian { sigma, mean } => {
                let mut dens = 1.0;
                for axis in 0..d {
                    let s = Self::per_axis(sigma, axis);
                    let mu = Self::per_axis(mean, axis);
                    let z = (y[axis] - mu) / s;
                    dens *= (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
                }
                dens * vol
            }
            KernelSpec::UniformBall { radius } => {
                let ball = if d == 1 {
                    2.0 * radius
                } else {
                    std::f64::consts::PI * radius * radius
                };
                covered_fraction(grid, y, *radius) * vol / ball
            }
            KernelSpec::Cauchy { scale } => {
                let r = norm(y) / scale;
                let (c, p) = if d == 1 {
                    (1.0 / std::f64::consts::PI, 1.0)
                } else {
                    (0.5 / std::f64::consts::PI, 1.5)
                };
                c * (1.0 + r * r).powf(-p) / scale.powi(d as i32) * vol
            }
            KernelSpec::Tabulated(t) => t.eval(y).max(0.0) * vol,
        }
    }
}

/// Fraction of the cell centered at `y` that lies inside the ball `B_r(0)`.
fn covered_fraction(grid: &Grid, y: Point, r: f64) -> f64 {
    if grid.dims() == 1 {
        let h = grid.spacing(0);
        let lo = (y[0] - 0.5 * h).max(-r);
        let hi = (y[0] + 0.5 * h).min(r);
        return ((hi - lo) / h).max(0.0);
    }
    const SUB: usize = 16;
    let (h0, h1) = (grid.spacing(0), grid.spacing(1));
    let far = norm(y) - 0.5 * (h0 * h0 + h1 * h1).sqrt();
    if far > r {
        return 0.0;
    }
    let mut inside = 0usize;
    for a in 0..SUB {
        let x0 = y[0] + ((a as f64 + 0.5) / SUB as f64 - 0.5) * h0;
        for b in 0..SUB {
            let x1 = y[1] + ((b as f64 + 0.5) / SUB as f64 - 0.5) * h1;
            if x0 * x0 + x1 * x1 <= r * r {
                inside += 1;
            }
        }
    }
    inside as f64 / (SUB * SUB) as f64
}

/// How a convolution is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvolutionPath {
    /// Spectral at or above [`SPECTRAL_THRESHOLD`] cells, direct below.
    Auto,
    Direct,
    Spectral,
}

/// A discretized probability kernel on the offset lattice of a [`Grid`].
pub struct Kernel {
    grid: Grid,
    weights: Vec<f64>,
    mass: f64,
    raw_mass: f64,
    drift_density: Point,
    nondeg_radius: f64,
    nondeg_level: f64,
    support: Vec<(usize, f64)>,
    spectrum: OnceLock<Arc<KernelSpectrum>>,
}

impl Clone for Kernel {
    fn clone(&self) -> Self {
        Kernel {
            grid: self.grid,
            weights: self.weights.clone(),
            mass: self.mass,
            raw_mass: self.raw_mass,
            drift_density: self.drift_density,
            nondeg_radius: self.nondeg_radius,
            nondeg_level: self.nondeg_level,
            support: self.support.clone(),
            spectrum: self.spectrum.clone(),
        }
    }
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("grid", &self.grid)
            .field("mass", &self.mass)
            .field("raw_mass", &self.raw_mass)
            .field("drift_density", &self.drift_density)
            .field("nondeg_radius", &self.nondeg_radius)
            .field("nondeg_level", &self.nondeg_level)
            .finish()
    }
}

impl Kernel {
    /// Wraps FFT-ordered weights without renormalizing them.
    pub fn from_weights(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} weights for {} cells",
                weights.len(),
                grid.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("kernel weight {w} is not a finite nonnegative number")));
        }
        let mass: f64 = weights.iter().sum();
        Ok(Self::assemble(grid, weights, mass, mass))
    }

    /// All weight on the zero offset.
    pub fn delta(grid: Grid) -> Self {
        let mut w = vec![0.0; grid.len()];
        w[0] = 1.0;
        Self::assemble(grid, w, 1.0, 1.0)
    }

    fn assemble(grid: Grid, weights: Vec<f64>, mass: f64, raw_mass: f64) -> Self {
        let mut drift = [0.0; 2];
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                let y = grid.offset_point(i);
                drift[0] += y[0] * w;
                drift[1] += y[1] * w;
            }
        }
        let (nondeg_radius, nondeg_level) = nondegeneracy(&grid, &weights);
        let support = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i, *w))
            .collect();
        Kernel {
            grid,
            weights,
            mass,
            raw_mass,
            drift_density: drift,
            nondeg_radius,
            nondeg_level,
            support,
            spectrum: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Cell weights in FFT order (see [`Grid::offset_point`]).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Mass captured on the grid before normalization.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    /// First moment `sum y a(y)` (the drift per unit birth rate).
    pub fn drift_density(&self) -> Point {
        self.drift_density
    }

    pub fn nondeg_radius(&self) -> f64 {
        self.nondeg_radius
    }

    pub fn nondeg_level(&self) -> f64 {
        self.nondeg_level
    }

    /// Density value at FFT-ordered index `idx`.
    pub fn density(&self, idx: usize) -> f64 {
        self.weights[idx] / self.grid.cell_volume()
    }

    /// `sum (y . xi) a(y)`.
    pub fn moment_along(&self, xi: Point) -> f64 {
        self.support
            .iter()
            .map(|&(i, w)| dot(self.grid.offset_point(i), xi) * w)
            .sum()
    }

    /// `sum |y . xi| a(y)`.
    pub fn abs_moment_along(&self, xi: Point) -> f64 {
        self.support
            .iter()
            .map(|&(i, w)| dot(self.grid.offset_point(i), xi).abs() * w)
            .sum()
    }

    /// `sum |y| a(y)`.
    pub fn abs_first_moment(&self) -> f64 {
        self.support
            .iter()
            .map(|&(i, w)| norm(self.grid.offset_point(i)) * w)
            .sum()
    }

    /// Standard deviation about the mean, `sqrt(sum |y - mean|^2 a / mass)`.
    pub fn spread(&self) -> f64 {
        let mu = [self.drift_density[0] / self.mass, self.drift_density[1] / self.mass];
        let s2: f64 = self
            .support
            .iter()
            .map(|&(i, w)| {
                let y = self.grid.offset_point(i);
                ((y[0] - mu[0]).powi(2) + (y[1] - mu[1]).powi(2)) * w
            })
            .sum();
        (s2 / self.mass).sqrt()
    }

    /// `sum a(y) e^{lambda y . xi}`, the discrete moment generating function.
    pub fn mgf_along(&self, xi: Point, lambda: f64) -> f64 {
        self.support
            .iter()
            .map(|&(i, w)| w * (lambda * dot(self.grid.offset_point(i), xi)).exp())
            .sum()
    }

    pub(crate) fn support(&self) -> &[(usize, f64)] {
        &self.support
    }

    /// Whether two kernels carry identical weights on the same lattice.
    pub fn same_as(&self, other: &Kernel) -> bool {
        std::ptr::eq(self, other) || (self.grid.same_lattice(&other.grid) && self.weights == other.weights)
    }

    fn spectrum(&self) -> &Arc<KernelSpectrum> {
        self.spectrum
            .get_or_init(|| Arc::new(KernelSpectrum::new(&self.grid, &self.weights)))
    }

    /// Applies a Fourier multiplier `m(hat a)` to `input` on the torus.
    pub(crate) fn spectral_apply(&self, input: &[f64], multiplier: impl Fn(Complex64) -> Complex64) -> Vec<f64> {
        let spec = self.spectrum();
        let mut buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        spec.plan.forward(&mut buf);
        for (b, h) in buf.iter_mut().zip(&spec.hat) {
            *b *= multiplier(*h);
        }
        spec.plan.inverse(&mut buf);
        let scale = 1.0 / input.len() as f64;
        buf.iter().map(|b| b.re * scale).collect()
    }

    fn use_spectral(&self, path: ConvolutionPath) -> bool {
        match path {
            ConvolutionPath::Auto => self.grid.len() >= SPECTRAL_THRESHOLD,
            ConvolutionPath::Direct => false,
            ConvolutionPath::Spectral => true,
        }
    }

    pub fn convolve(&self, field: &Field) -> Result<Field> {
        self.convolve_with(field, ConvolutionPath::Auto)
    }

    pub fn convolve_with(&self, field: &Field, path: ConvolutionPath) -> Result<Field> {
        self.grid.ensure_same(field.grid())?;
        let mut out = vec![0.0; self.grid.len()];
        self.convolve_slice(field.values(), &mut out, path);
        Ok(Field::from_values(self.grid, out)?.with_time(field.time()))
    }

    /// Periodic convolution of raw values; `input` and `out` must have the
    /// grid's length.
    pub fn convolve_slice(&self, input: &[f64], out: &mut [f64], path: ConvolutionPath) {
        if self.use_spectral(path) {
            self.spectrum().convolve_pair(input, None, out, None);
        } else {
            self.convolve_direct(input, out);
        }
    }

    /// Convolves two inputs; spectral evaluation packs them into one
    /// complex transform.
    pub fn convolve_pair_slices(&self, u: &[f64], v: &[f64], out_u: &mut [f64], out_v: &mut [f64]) {
        if self.use_spectral(ConvolutionPath::Auto) {
            self.spectrum().convolve_pair(u, Some(v), out_u, Some(out_v));
        } else {
            self.convolve_direct(u, out_u);
            self.convolve_direct(v, out_v);
        }
    }

    fn convolve_direct(&self, input: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let (n0, n1) = (g.cells(0), g.cells(1));
        let offsets: Vec<(usize, usize, f64)> = self
            .support
            .iter()
            .map(|&(idx, w)| {
                let (i, j) = g.split_index(idx);
                (i, j, w)
            })
            .collect();
        for i in 0..n0 {
            for j in 0..n1 {
                let mut acc = 0.0;
                for &(k0, k1, w) in &offsets {
                    let si = (i + n0 - k0) % n0;
                    let sj = (j + n1 - k1) % n1;
                    acc += w * input[si * n1 + sj];
                }
                out[i * n1 + j] = acc;
            }
        }
    }

    /// Places this kernel's weights on another grid with the same spacing;
    /// offsets that do not fit are dropped.
    pub fn resample_to(&self, grid: Grid) -> Result<Kernel> {
        if grid.dims() != self.grid.dims()
            || (0..grid.dims()).any(|a| (grid.spacing(a) - self.grid.spacing(a)).abs() > 1e-12 * grid.spacing(a))
        {
            return Err(Error::GridMismatch(format!(
                "resampling needs equal spacing: {:?} vs {:?}",
                self.grid, grid
            )));
        }
        let mut w = vec![0.0; grid.len()];
        let (h0, h1) = (grid.cells(0) as isize / 2, grid.cells(1) as isize / 2);
        for &(idx, weight) in &self.support {
            let (i, j) = self.grid.split_index(idx);
            let k0 = self.grid.offset_cells(0, i);
            let k1 = if grid.dims() == 2 { self.grid.offset_cells(1, j) } else { 0 };
            let fits0 = k0 >= -h0 && k0 < h0;
            let fits1 = grid.dims() == 1 || (k1 >= -h1 && k1 < h1);
            if fits0 && fits1 {
                w[grid.offset_index(k0, k1)] += weight;
            }
        }
        let mass = w.iter().sum();
        let raw = self.raw_mass * mass / self.mass.max(f64::MIN_POSITIVE);
        Ok(Self::assemble(grid, w, mass, raw))
    }

    /// Kernel of the reflected density `a(-y)`.
    pub fn reflected(&self) -> Kernel {
        let g = self.grid;
        let mut w = vec![0.0; g.len()];
        for &(idx, weight) in &self.support {
            let (i, j) = g.split_index(idx);
            let k0 = -g.offset_cells(0, i);
            let k1 = if g.dims() == 2 { -g.offset_cells(1, j) } else { 0 };
            w[g.offset_index(k0, k1)] += weight;
        }
        Self::assemble(g, w, self.mass, self.raw_mass)
    }
}

/// Largest radius `rho` (a multiple of the spacing) with density `>= rho`
/// on the whole ball `B_rho(0)`, and the minimum density on that ball.
fn nondegeneracy(grid: &Grid, weights: &[f64]) -> (f64, f64) {
    let vol = grid.cell_volume();
    let h = grid.min_spacing();
    let mut by_radius: Vec<(f64, f64)> = (0..grid.len())
        .map(|i| (norm(grid.offset_point(i)), weights[i] / vol))
        .collect();
    by_radius.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let max_r = (0..grid.dims()).map(|a| grid.half_extent(a)).fold(f64::INFINITY, f64::min);
    let (mut best, mut best_level) = (0.0, 0.0);
    let mut running_min = f64::INFINITY;
    let mut pos = 0;
    let mut j = 1usize;
    loop {
        let rho = j as f64 * h;
        if rho >= max_r {
            break;
        }
        while pos < by_radius.len() && by_radius[pos].0 <= rho * (1.0 + 1e-12) {
            running_min = running_min.min(by_radius[pos].1);
            pos += 1;
        }
        if running_min >= rho * (1.0 - 1e-12) {
            best = rho;
            best_level = running_min;
        } else {
            break;
        }
        j += 1;
    }
    (best, best_level)
}

/// Samples, checks and normalizes `spec` on `grid`.
pub fn build_kernel(spec: &KernelSpec, grid: Grid) -> Result<Kernel> {
    spec.validate()?;
    if let KernelSpec::Gaussian { sigma, mean } = spec {
        for v in [sigma, mean] {
            if v.len() != 1 && v.len() != grid.dims() {
                return Err(Error::InvalidParameter(format!(
                    "gaussian parameters need 1 or {} entries, got {}",
                    grid.dims(),
                    v.len()
                )));
            }
        }
    }
    let mut w: Vec<f64> = (0..grid.len())
        .map(|i| spec.cell_weight(&grid, grid.offset_point(i)))
        .collect();
    let raw: f64 = w.iter().sum();
    if !(raw >= MIN_CAPTURED_MASS) {
        return Err(Error::NonNormalizable { mass: raw });
    }
    let extent = (0..grid.dims()).map(|a| grid.extent(a)).fold(f64::INFINITY, f64::min);
    if extent < EXTENT_TO_SCALE * spec.scale() {
        return Err(Error::DomainTooSmall {
            extent,
            scale: spec.scale(),
        });
    }
    for x in &mut w {
        *x /= raw;
    }
    let mass = w.iter().sum();
    Ok(Kernel::assemble(grid, w, mass, raw))
}

/// Periodic convolution `a * u`.
pub fn convolve(kernel: &Kernel, field: &Field) -> Result<Field> {
    kernel.convolve(field)
}

/// Residual allowed between the projected and the original absolute moment.
pub const REDUCTION_TOLERANCE: f64 = 1e-6;

/// Marginal `a_xi(s)` of the kernel along the unit vector `xi`.
///
/// Axis-aligned directions sum exactly over the orthogonal axis. Other
/// directions deposit each weight linearly onto a line lattice of spacing
/// `min_i h_i |xi_i|`; if that changes the absolute or second moment along
/// `xi` by more than [`REDUCTION_TOLERANCE`], `GridMismatch` is returned.
pub fn reduce_kernel(kernel: &Kernel, xi: Point) -> Result<Kernel> {
    let g = *kernel.grid();
    let len = norm(xi);
    if !((len - 1.0).abs() < 1e-9) {
        return Err(Error::InvalidParameter(format!("direction {xi:?} is not a unit vector")));
    }
    if g.dims() == 1 {
        return Ok(if xi[0] > 0.0 { kernel.clone() } else { kernel.reflected() });
    }
    for axis in 0..2 {
        let other = 1 - axis;
        if xi[other].abs() < 1e-15 {
            let sign = xi[axis].signum();
            let line = Grid::line(g.extent(axis), g.cells(axis))?;
            let mut w = vec![0.0; line.len()];
            for &(idx, weight) in kernel.support() {
                let (i, j) = g.split_index(idx);
                let k = g.offset_cells(axis, if axis == 0 { i } else { j });
                let k = if sign < 0.0 { -k } else { k };
                w[line.offset_index(k, 0)] += weight;
            }
            let mass = w.iter().sum();
            return Ok(Kernel::assemble(line, w, mass, kernel.raw_mass()));
        }
    }
    // oblique direction: linear deposition on the projected lattice spacing
    let h = (g.spacing(0) * xi[0].abs()).min(g.spacing(1) * xi[1].abs());
    let reach: f64 = kernel
        .support()
        .iter()
        .map(|&(i, _)| dot(g.offset_point(i), xi).abs())
        .fold(0.0, f64::max);
    let cells = 2 * ((reach / h).ceil() as usize + 2);
    let line = Grid::line_with_spacing(h, cells)?;
    let mut w = vec![0.0; line.len()];
    for &(idx, weight) in kernel.support() {
        let s = dot(g.offset_point(idx), xi) / h;
        let mut k = s.round();
        let mut frac = s - k;
        if frac.abs() < 1e-9 {
            frac = 0.0;
        } else {
            k = s.floor();
            frac = s - k;
        }
        let k = k as isize;
        w[line.offset_index(k, 0)] += weight * (1.0 - frac);
        if frac != 0.0 {
            w[line.offset_index(k + 1, 0)] += weight * frac;
        }
    }
    let mass = w.iter().sum();
    let reduced = Kernel::assemble(line, w, mass, kernel.raw_mass());
    let second = |k: &Kernel, d: Point| -> f64 {
        k.support()
            .iter()
            .map(|&(i, w)| dot(k.grid().offset_point(i), d).powi(2) * w)
            .sum()
    };
    let residual = (second(&reduced, [1.0, 0.0]) - second(kernel, xi)).abs()
        + (reduced.abs_moment_along([1.0, 0.0]) - kernel.abs_moment_along(xi)).abs();
    if residual > REDUCTION_TOLERANCE {
        return Err(Error::GridMismatch(format!(
            "oblique reduction along {xi:?} has interpolation residual {residual:e}"
        )));
    }
    Ok(reduced)
}

/// `a_n = 1_{B_radius} a`, kept sub-stochastic, with its first moment.
pub fn truncate_kernel(kernel: &Kernel, radius: f64) -> Result<(Kernel, Point)> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation radius must be positive, got {radius}")));
    }
    let g = *kernel.grid();
    let w: Vec<f64> = kernel
        .weights()
        .iter()
        .enumerate()
        .map(|(i, &w)| if norm(g.offset_point(i)) <= radius { w } else { 0.0 })
        .collect();
    let mass: f64 = w.iter().sum();
    if mass <= 0.0 {
        return Err(Error::EmptyTruncation { radius });
    }
    let k = Kernel::assemble(g, w, mass, kernel.raw_mass());
    let drift = k.drift_density();
    Ok((k, drift))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(extent: f64, cells: usize) -> Grid {
        Grid::line(extent, cells).unwrap()
    }

    #[test]
    fn gaussian_is_normalized_and_centered() {
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), line(100.0, 1024)).unwrap();
        assert!((k.mass() - 1.0).abs() <= 1e-12);
        assert!(k.drift_density()[0].abs() < 1e-14);
        assert!(k.weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn cauchy_loses_mass_on_short_domains() {
        let e = build_kernel(&KernelSpec::Cauchy { scale: 1.0 }, line(10.0, 256)).unwrap_err();
        assert!(matches!(e, Error::NonNormalizable { mass } if mass < 0.99));
        // captured fraction on [-50, 50] is (2/pi) atan(50) = 0.98727 < 0.99
        let e = build_kernel(&KernelSpec::Cauchy { scale: 1.0 }, line(100.0, 1024)).unwrap_err();
        assert!(matches!(e, Error::NonNormalizable { .. }));
    }

    #[test]
    fn domain_guard() {
        let e = build_kernel(&KernelSpec::gaussian(1.0, 0.0), line(10.0, 256)).unwrap_err();
        assert!(matches!(e, Error::DomainTooSmall { .. }));
        assert!(build_kernel(&KernelSpec::gaussian(-1.0, 0.0), line(100.0, 256)).is_err());
    }

    #[test]
    fn uniform_kernel_has_flat_density() {
        let k = build_kernel(&KernelSpec::UniformBall { radius: 1.0 }, line(40.0, 400)).unwrap();
        assert!((k.density(0) - 0.5).abs() < 1e-12);
        assert!((k.nondeg_radius() - 0.5).abs() < 1e-12);
        assert!((k.nondeg_level() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let g = line(10.0, 16);
        let u = Field::from_fn(g, |p| (p[0] * 0.7).sin());
        let k = Kernel::delta(g);
        for path in [ConvolutionPath::Direct, ConvolutionPath::Spectral] {
            let v = k.convolve_with(&u, path).unwrap();
            assert!(v.sup_distance(&u).unwrap() < 1e-14);
        }
    }

    #[test]
    fn convolution_of_constant_is_constant() {
        let g = line(100.0, 512);
        let k = build_kernel(&KernelSpec::gaussian(2.0, 1.5), g).unwrap();
        let v = k.convolve(&Field::constant(g, 0.3)).unwrap();
        assert!(v.values().iter().all(|x| (x - 0.3).abs() < 1e-14));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let k = Kernel::delta(line(10.0, 16));
        let u = Field::zeros(line(10.0, 32));
        assert!(matches!(k.convolve(&u), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn truncation_keeps_weights_inside() {
        let g = line(100.0, 1000);
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
        let (t, drift) = truncate_kernel(&k, 60.0).unwrap();
        assert_eq!(t.weights(), k.weights());
        assert!(drift[0].abs() < 1e-15);
        let (t, drift) = truncate_kernel(&k, 1.0).unwrap();
        assert!(t.mass() < 0.75 && drift[0].abs() < 1e-14);
        assert!(matches!(
            truncate_kernel(&k, 0.01),
            Ok(_)
        ));
        let shifted = build_kernel(&KernelSpec::gaussian(0.5, 10.0), g).unwrap();
        assert!(matches!(truncate_kernel(&shifted, 1e-3), Ok((_, _))));
        assert!(matches!(truncate_kernel(&shifted, -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn empty_truncation() {
        let g = line(100.0, 1000);
        let mut w = vec![0.0; g.len()];
        w[g.offset_index(30, 0)] = 1.0;
        let k = Kernel::from_weights(g, w).unwrap();
        assert!(matches!(truncate_kernel(&k, 2.0), Err(Error::EmptyTruncation { .. })));
    }

    #[test]
    fn reduction_of_1d_kernel_is_identity_or_reflection() {
        let g = line(100.0, 1000);
        let k = build_kernel(&KernelSpec::gaussian(1.0, 2.0), g).unwrap();
        let r = reduce_kernel(&k, [1.0, 0.0]).unwrap();
        assert_eq!(r.weights(), k.weights());
        let m = reduce_kernel(&k, [-1.0, 0.0]).unwrap();
        assert!((m.drift_density()[0] + 2.0).abs() < 1e-8);
        assert!(reduce_kernel(&k, [0.5, 0.0]).is_err());
    }

    #[test]
    fn oblique_reduction_on_coarse_grid_is_rejected() {
        let g = Grid::plane([40.0, 40.0], [64, 64]).unwrap();
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
        assert!(matches!(reduce_kernel(&k, [0.6, 0.8]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn diagonal_reduction_is_exact() {
        let g = Grid::plane([40.0, 40.0], [128, 128]).unwrap();
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = reduce_kernel(&k, [s, s]).unwrap();
        assert!((r.mass() - 1.0).abs() < 1e-12);
        assert!((r.abs_moment_along([1.0, 0.0]) - k.abs_moment_along([s, s])).abs() < 1e-10);
        assert!((r.spread() - 1.0).abs() < 1e-6);
    }
}
