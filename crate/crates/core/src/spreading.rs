//! Weinberger's recursion `f_{n+1} = max{phi, Q_t (V_{s,c,xi} f_n)(0)}`,
//! spreading speeds `c*_t(xi)` and the spreading set `Upsilon_t`.
//!
//! The recursion runs in one dimension: a planar field `g(x . xi + s + c)`
//! evolves exactly like `g(. + c)` under the marginal kernel of `a` along
//! `xi`, so `Q_t(V_{s,c,xi} g)(0)` is the 1D solution read at `s`.

use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolveOptions};
use crate::grid::{dot, norm, Field, Grid, Point};
use crate::kernels::{reduce_kernel, Kernel};
use crate::nonlinearity::{Competition, Model};

/// A non-increasing function on the lattice of cell centers of `[-S, S]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    grid: Grid,
    values: Vec<f64>,
}

/// Fraction of `[-S, S]` averaged at either end for the limits at infinity.
pub const TAIL_FRACTION: f64 = 0.05;

impl Profile {
    /// Samples `f` at the cell centers of `[-half_width, half_width]`.
    pub fn from_fn(half_width: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = Grid::line(2.0 * half_width, cells)?;
        let values = (0..cells).map(|i| f(grid.center(0, i))).collect();
        Ok(Profile { grid, values })
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if grid.dims() != 1 || values.len() != grid.len() {
            return Err(Error::GridMismatch("a profile needs a line grid and one value per cell".into()));
        }
        Ok(Profile { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn half_width(&self) -> f64 {
        self.grid.half_extent(0)
    }

    pub fn s(&self, i: usize) -> f64 {
        self.grid.center(0, i)
    }

    fn tail_len(&self) -> usize {
        ((self.values.len() as f64 * TAIL_FRACTION).round() as usize).max(1)
    }

    /// Mean over the leftmost 5% of the lattice.
    pub fn left_limit(&self) -> f64 {
        let k = self.tail_len();
        self.values[..k].iter().sum::<f64>() / k as f64
    }

    /// Mean over the rightmost 5% of the lattice, the proxy for `f(+inf)`.
    pub fn right_limit(&self) -> f64 {
        let k = self.tail_len();
        self.values[self.values.len() - k..].iter().sum::<f64>() / k as f64
    }

    /// Linear interpolation, constant beyond the ends.
    pub fn eval(&self, s: f64) -> f64 {
        let h = self.grid.spacing(0);
        let pos = (s + self.half_width()) / h - 0.5;
        let n = self.values.len();
        if pos <= 0.0 {
            return self.values[0];
        }
        if pos >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        (1.0 - t) * self.values[i] + t * self.values[i + 1]
    }

    /// Exponential decay rate of the right tail, from the log-slope over the
    /// rightmost 5% (0 for a flat or vanished tail).
    pub fn tail_rate(&self) -> f64 {
        let n = self.values.len();
        let k = self.tail_len().max(2);
        let (a, b) = (self.values[n - k], self.values[n - 1]);
        if !(b > 1e-300) || !(a > b) {
            return 0.0;
        }
        (a / b).ln() / ((k - 1) as f64 * self.grid.spacing(0))
    }

    /// Like [`Profile::eval`], but continues the right tail with
    /// [`Profile::tail_rate`] instead of a constant.
    pub fn eval_extrapolated(&self, s: f64, rate: f64) -> f64 {
        let edge = self.s(self.values.len() - 1);
        if s > edge {
            self.values[self.values.len() - 1] * (-rate * (s - edge)).exp()
        } else {
            self.eval(s)
        }
    }

    /// Largest increase between neighbours (0 for a non-increasing profile).
    pub fn monotonicity_defect(&self) -> f64 {
        self.values.windows(2).fold(0.0, |m, w| m.max(w[1] - w[0]))
    }

    /// Last `s` where the profile is at least `level`, interpolated to the
    /// crossing; `-S` if it never reaches `level`, `+S` if it never drops
    /// below it.
    pub fn front_position(&self, level: f64) -> f64 {
        let n = self.values.len();
        if self.values[0] < level {
            return -self.half_width();
        }
        for i in 0..n - 1 {
            let (a, b) = (self.values[i], self.values[i + 1]);
            if a >= level && b < level {
                let t = (a - level) / (a - b);
                return self.s(i) + t * self.grid.spacing(0);
            }
        }
        self.half_width()
    }

    /// Running maximum from the right: the smallest non-increasing profile
    /// above this one.
    fn make_non_increasing(&mut self) {
        for i in (0..self.values.len() - 1).rev() {
            if self.values[i] < self.values[i + 1] {
                self.values[i] = self.values[i + 1];
            }
        }
    }
}

/// The default starting function: `0` for `s >= 0`, rising linearly to
/// `level` at `s = -width` and constant to the left of it.
pub fn default_phi(half_width: f64, cells: usize, level: f64, width: f64) -> Result<Profile> {
    Profile::from_fn(half_width, cells, |s| level * (-s / width).clamp(0.0, 1.0))
}

/// `(V_{s,c,xi} g)(x) = g(x . xi + s + c)` on `grid`.
pub fn embed_planar(g: &Profile, s: f64, c: f64, xi: Point, grid: &Grid) -> Result<Field> {
    let radius = (0..grid.dims())
        .map(|a| grid.half_extent(a).powi(2))
        .sum::<f64>()
        .sqrt();
    let needed = (s + c).abs() + radius;
    if needed > g.half_width() + 1e-12 {
        return Err(Error::DomainExceeded {
            needed,
            limit: g.half_width(),
        });
    }
    Ok(Field::from_fn(*grid, |x| g.eval(dot(x, xi) + s + c)))
}

/// Relative level below which profile values are treated as 0. Round-off
/// and seam leakage sit below it; left alone, the running maximum would
/// spread them into a plateau that grows by `e^{beta t}` per iteration.
pub const PROFILE_FLOOR: f64 = 1e-13;

/// Controls for the recursion and the speed bisection.
#[derive(Clone, Debug)]
pub struct SpreadingOptions {
    /// Half-width `S` of the profile lattice.
    pub half_width: f64,
    /// Extra room on each side of the 1D torus; `None` sizes it from the
    /// kernel spread, the shift `c` and the horizon `t`.
    pub pad: Option<f64>,
    /// Merge this many lattice cells into one before iterating.
    pub coarsen: usize,
    pub n_max: usize,
    pub stall_tol: f64,
    pub tol_c: f64,
    /// Iterations used for the trend classification of stalled-out probes.
    pub trend_window: usize,
    /// Bracket widenings allowed in [`estimate_cstar`].
    pub max_widenings: usize,
    pub evolve: EvolveOptions,
}

impl Default for SpreadingOptions {
    fn default() -> Self {
        SpreadingOptions {
            half_width: 20.0,
            pad: None,
            coarsen: 1,
            n_max: 150,
            stall_tol: 1e-7,
            tol_c: 0.05,
            trend_window: 10,
            max_widenings: 8,
            evolve: EvolveOptions {
                snapshot_interval: None,
                ..EvolveOptions::default()
            },
        }
    }
}

/// The one-dimensional problem along `xi`: reduced kernels on a padded
/// line torus whose central cells coincide with the profile lattice.
#[derive(Clone, Debug)]
pub struct PlanarReduction {
    xi: Point,
    profile_grid: Grid,
    line: Grid,
    pad_cells: usize,
    c_max: f64,
    kernel: Kernel,
    model: Model,
    evolve: EvolveOptions,
}

/// Linear deposition of a 1D kernel onto a lattice `factor` times coarser.
fn coarsen_kernel(k: &Kernel, factor: usize, cells: usize) -> Result<Kernel> {
    let h = k.grid().spacing(0) * factor as f64;
    let line = Grid::line_with_spacing(h, cells)?;
    let mut w = vec![0.0; line.len()];
    for &(idx, weight) in k.support() {
        let s = k.grid().offset_cells(0, idx) as f64 / factor as f64;
        let lo = s.floor();
        let frac = s - lo;
        w[line.offset_index(lo as isize, 0)] += weight * (1.0 - frac);
        if frac > 0.0 {
            w[line.offset_index(lo as isize + 1, 0)] += weight * frac;
        }
    }
    Kernel::from_weights(line, w)
}

impl PlanarReduction {
    pub fn new(model: &Model, kernel: &Kernel, xi: Point, t: f64, c_max: f64, opts: &SpreadingOptions) -> Result<Self> {
        let factor = opts.coarsen.max(1);
        let reduced = reduce_kernel(kernel, xi)?;
        let h = reduced.grid().spacing(0) * factor as f64;
        let half_cells = (opts.half_width / h).round() as usize;
        if half_cells < 4 {
            return Err(Error::InvalidParameter(format!(
                "profile half-width {} is too small for spacing {h}",
                opts.half_width
            )));
        }
        let pad = opts.pad.unwrap_or_else(|| {
            let spread = reduced.spread();
            let drift = reduced.drift_density()[0].abs();
            10.0 * spread + c_max.abs() + 2.0 * t * model.kappa() * (drift + 6.0 * spread) + 5.0
        });
        let pad_cells = (pad / h).ceil() as usize;
        let profile_grid = Grid::line_with_spacing(h, 2 * half_cells)?;
        let line = Grid::line_with_spacing(h, 2 * (half_cells + pad_cells))?;
        let place = |k: &Kernel| -> Result<Kernel> {
            if factor == 1 {
                k.resample_to(line)
            } else {
                coarsen_kernel(k, factor, line.len())
            }
        };
        let kernel_1d = place(&reduced)?;
        let model_1d = match model.competition() {
            Competition::Local { .. } => model.clone(),
            Competition::Logistic { kappa_minus, kernel: am } => {
                let r = place(&reduce_kernel(am, xi)?)?;
                model.with_competition(Competition::Logistic {
                    kappa_minus: *kappa_minus,
                    kernel: if r.same_as(&kernel_1d) { kernel_1d.clone() } else { r },
                })?
            }
            Competition::General { kappa_minus, kernel: am, g1 } => {
                let r = place(&reduce_kernel(am, xi)?)?;
                model.with_competition(Competition::General {
                    kappa_minus: *kappa_minus,
                    kernel: if r.same_as(&kernel_1d) { kernel_1d.clone() } else { r },
                    g1: g1.clone(),
                })?
            }
        };
        let mut evolve = opts.evolve.clone();
        evolve.snapshot_interval = None;
        Ok(PlanarReduction {
            xi,
            profile_grid,
            line,
            pad_cells,
            c_max: c_max.abs(),
            kernel: kernel_1d,
            model: model_1d,
            evolve,
        })
    }

    pub fn xi(&self) -> Point {
        self.xi
    }

    /// Largest `|c|` the padding was sized for.
    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Lattice on which profiles for this reduction must live.
    pub fn profile_grid(&self) -> &Grid {
        &self.profile_grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// `f` resampled onto this reduction's profile lattice.
    pub fn conform(&self, f: &Profile) -> Profile {
        if f.grid.same_lattice(&self.profile_grid) {
            return f.clone();
        }
        let values = (0..self.profile_grid.len())
            .map(|i| f.eval(self.profile_grid.center(0, i)))
            .collect();
        Profile {
            grid: self.profile_grid,
            values,
        }
    }

    /// One application of `R_{t,c,xi}`.
    pub fn apply(&self, f: &Profile, phi: &Profile, t: f64, c: f64) -> Result<Profile> {
        let f = self.conform(f);
        let phi = self.conform(phi);
        let n = self.profile_grid.len();
        if c.abs() > self.pad_cells as f64 * self.line.spacing(0) {
            return Err(Error::DomainExceeded {
                needed: c.abs(),
                limit: self.pad_cells as f64 * self.line.spacing(0),
            });
        }
        // a constant continuation past +S would be amplified by the growth
        // at 0 every iteration
        let rate = f.tail_rate();
        let u0 = Field::from_fn(self.line, |y| f.eval_extrapolated(y[0] + c, rate));
        let traj = evolve(&u0, t, &self.model, &self.kernel, &self.evolve)?;
        let u = traj.last().values();
        let theta = self.model.theta();
        let floor = PROFILE_FLOOR * theta;
        let values = (0..n)
            .map(|i| {
                let v = u[i + self.pad_cells];
                let v = if v < floor { 0.0 } else { v };
                v.max(phi.values[i]).clamp(0.0, theta)
            })
            .collect();
        let mut out = Profile {
            grid: self.profile_grid,
            values,
        };
        out.make_non_increasing();
        Ok(out)
    }
}

/// One step of the recursion; builds the planar reduction on the fly.
pub fn weinberger_step(
    f: &Profile,
    phi: &Profile,
    t: f64,
    c: f64,
    xi: Point,
    model: &Model,
    kernel: &Kernel,
    opts: &SpreadingOptions,
) -> Result<Profile> {
    PlanarReduction::new(model, kernel, xi, t, c, opts)?.apply(f, phi, t, c)
}

/// Everything recorded while iterating towards `f_{t,c,xi}`.
#[derive(Clone, Debug)]
pub struct Iteration {
    pub profile: Profile,
    pub iterations: usize,
    pub stalled: bool,
    /// Largest decrease `f_n - f_{n+1}` seen (0 when monotone in `n`).
    pub monotonicity_defect: f64,
    pub right_limits: Vec<f64>,
    pub fronts: Vec<f64>,
}

/// Iterates `R_{t,c,xi}` from `phi` until the sup change drops below
/// `stall_tol`, the right end crosses `theta/2`, or `n_max` is reached.
pub fn iterate(red: &PlanarReduction, phi: &Profile, t: f64, c: f64, opts: &SpreadingOptions, stop_on_theta: bool) -> Result<Iteration> {
    let phi = red.conform(phi);
    let theta = red.model.theta();
    let mut f = phi.clone();
    let mut out = Iteration {
        profile: phi.clone(),
        iterations: 0,
        stalled: false,
        monotonicity_defect: 0.0,
        right_limits: vec![f.right_limit()],
        fronts: vec![f.front_position(0.5 * theta)],
    };
    for n in 1..=opts.n_max {
        let next = red.apply(&f, &phi, t, c)?;
        let mut change = 0.0f64;
        for (a, b) in f.values.iter().zip(&next.values) {
            change = change.max((b - a).abs());
            out.monotonicity_defect = out.monotonicity_defect.max(a - b);
        }
        f = next;
        out.iterations = n;
        out.right_limits.push(f.right_limit());
        out.fronts.push(f.front_position(0.5 * theta));
        if change < opts.stall_tol {
            out.stalled = true;
            break;
        }
        if stop_on_theta && f.right_limit() > 0.5 * theta {
            break;
        }
    }
    out.profile = f;
    Ok(out)
}

/// The limit profile `f_{t,c,xi}`; `NoStall` if the iterates are still
/// moving after `n_max` steps.
pub fn weinberger_limit(
    phi: &Profile,
    t: f64,
    c: f64,
    xi: Point,
    model: &Model,
    kernel: &Kernel,
    opts: &SpreadingOptions,
) -> Result<Profile> {
    let red = PlanarReduction::new(model, kernel, xi, t, c, opts)?;
    let it = iterate(&red, phi, t, c, opts, false)?;
    if it.stalled {
        Ok(it.profile)
    } else {
        Err(Error::NoStall { n_max: opts.n_max })
    }
}

/// Which branch of the dichotomy `f(inf) in {theta, 0}` a probe falls on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Theta,
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub c: f64,
    pub side: Side,
    pub right_limit: f64,
    pub iterations: usize,
    /// Whether the side came from the front trend rather than a settled
    /// profile.
    pub by_trend: bool,
}

/// Classifies `c` by iterating from `phi`.
///
/// A profile whose right end passes `theta/2` is on the `theta` side; a
/// stalled profile is classified by its right limit. Otherwise the front
/// (the `theta/2` crossing) must still be advancing by more than
/// `tol_c/4` per iteration over the last `trend_window` iterations for
/// the `theta` side.
pub fn classify(red: &PlanarReduction, phi: &Profile, t: f64, c: f64, opts: &SpreadingOptions) -> Result<Probe> {
    let it = iterate(red, phi, t, c, opts, true)?;
    let theta = red.model.theta();
    let rl = it.profile.right_limit();
    let (side, by_trend) = if rl > 0.5 * theta {
        (Side::Theta, false)
    } else if it.stalled {
        (Side::Zero, false)
    } else {
        let w = opts.trend_window.min(it.fronts.len() - 1).max(1);
        let k = it.fronts.len() - 1;
        let advance = (it.fronts[k] - it.fronts[k - w]) / w as f64;
        (if advance > 0.25 * opts.tol_c { Side::Theta } else { Side::Zero }, true)
    };
    Ok(Probe {
        c,
        side,
        right_limit: rl,
        iterations: it.iterations,
        by_trend,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpreadingResult {
    pub xi: Point,
    pub t: f64,
    pub c_star: f64,
    pub bracket: (f64, f64),
    /// Right limits at the final bracket ends.
    pub witnesses: (f64, f64),
    pub probes: Vec<Probe>,
}

/// Bisection for `c*_t(xi)`: the bracket is widened geometrically until its
/// lower end is on the `theta` side and its upper end on the `0` side, then
/// halved until shorter than `tol_c`.
pub fn estimate_cstar(
    t: f64,
    xi: Point,
    model: &Model,
    kernel: &Kernel,
    bracket: (f64, f64),
    opts: &SpreadingOptions,
) -> Result<SpreadingResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("bracket ({lo}, {hi}) is empty")));
    }
    let build = |c_max: f64| PlanarReduction::new(model, kernel, xi, t, c_max, opts);
    let mut red = build(lo.abs().max(hi.abs()))?;
    let phi = default_phi(
        red.profile_grid.half_extent(0),
        red.profile_grid.len(),
        0.5 * red.model.theta(),
        2.0,
    )?;
    let mut probes = Vec::new();
    let mut run = |c: f64, probes: &mut Vec<Probe>| -> Result<Probe> {
        if c.abs() > red.c_max {
            red = build(2.0 * c.abs())?;
        }
        let p = classify(&red, &phi, t, c, opts)?;
        probes.push(p.clone());
        Ok(p)
    };
    let mut p_lo = run(lo, &mut probes)?;
    let mut p_hi = run(hi, &mut probes)?;
    let mut widen = 0;
    while p_lo.side != Side::Theta || p_hi.side != Side::Zero {
        if widen >= opts.max_widenings {
            return Err(Error::BracketNotFound { lo, hi });
        }
        let width = hi - lo;
        if p_lo.side != Side::Theta {
            // lo is already past the speed, so it bounds it from above
            hi = lo;
            p_hi = p_lo;
            lo -= width;
            p_lo = run(lo, &mut probes)?;
        } else {
            lo = hi;
            p_lo = p_hi;
            hi += width;
            p_hi = run(hi, &mut probes)?;
        }
        widen += 1;
    }
    while hi - lo > opts.tol_c {
        let mid = 0.5 * (lo + hi);
        let p = run(mid, &mut probes)?;
        if p.side == Side::Theta {
            lo = mid;
            p_lo = p;
        } else {
            hi = mid;
            p_hi = p;
        }
    }
    Ok(SpreadingResult {
        xi,
        t,
        c_star: 0.5 * (lo + hi),
        bracket: (lo, hi),
        witnesses: (p_lo.right_limit, p_hi.right_limit),
        probes,
    })
}

/// Unit vectors `(cos, sin)` of `n` equally spaced angles (`{1, -1}` in 1D).
pub fn directions(dims: usize, n: usize) -> Vec<Point> {
    if dims == 1 {
        return vec![[1.0, 0.0], [-1.0, 0.0]];
    }
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            [a.cos(), a.sin()]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HalfPlaneMargin {
    pub xi: Point,
    pub c_star: f64,
    pub projection: f64,
    /// `c*_t(xi) - x . xi`.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpsilonReport {
    pub point: Point,
    pub t: f64,
    /// `x . xi <= c*_t(xi)` for every sampled direction.
    pub contained: bool,
    /// Every margin exceeds the bisection tolerance.
    pub interior: bool,
    pub min_margin: f64,
    pub margins: Vec<HalfPlaneMargin>,
    pub results: Vec<SpreadingResult>,
}

/// Tests `point` against the sampled half-planes of `Upsilon_t`.
pub fn upsilon_contains(
    point: Point,
    t: f64,
    model: &Model,
    kernel: &Kernel,
    dirs: &[Point],
    bracket: (f64, f64),
    opts: &SpreadingOptions,
) -> Result<UpsilonReport> {
    let mut margins = Vec::new();
    let mut results = Vec::new();
    for &xi in dirs {
        let len = norm(xi);
        let xi = [xi[0] / len, xi[1] / len];
        let r = estimate_cstar(t, xi, model, kernel, bracket, opts)?;
        let projection = dot(point, xi);
        margins.push(HalfPlaneMargin {
            xi,
            c_star: r.c_star,
            projection,
            margin: r.c_star - projection,
        });
        results.push(r);
    }
    let min_margin = margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min);
    Ok(UpsilonReport {
        point,
        t,
        contained: min_margin >= 0.0,
        interior: min_margin > opts.tol_c,
        min_margin,
        margins,
        results,
    })
}

/// Vertices of the polygon `{x : x . xi_k <= c_k}` for directions ordered
/// by angle.
pub fn upsilon_polygon(margins: &[HalfPlaneMargin]) -> Vec<Point> {
    let n = margins.len();
    let mut out = Vec::new();
    for k in 0..n {
        let (a, b) = (&margins[k], &margins[(k + 1) % n]);
        let det = a.xi[0] * b.xi[1] - a.xi[1] * b.xi[0];
        if det.abs() < 1e-12 {
            continue;
        }
        let x = (a.c_star * b.xi[1] - a.xi[1] * b.c_star) / det;
        let y = (a.xi[0] * b.c_star - a.c_star * b.xi[0]) / det;
        out.push([x, y]);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    /// `kappa * int x a(x) dx`.
    pub drift: Point,
    pub upsilon: UpsilonReport,
}

/// Checks that `t m` lies in the interior of `Upsilon_t`.
pub fn check_drift_in_front(
    model: &Model,
    kernel: &Kernel,
    t: f64,
    dirs: &[Point],
    bracket: (f64, f64),
    opts: &SpreadingOptions,
) -> Result<DriftReport> {
    let d = kernel.drift_density();
    let drift = [model.kappa() * d[0], model.kappa() * d[1]];
    let upsilon = upsilon_contains([t * drift[0], t * drift[1]], t, model, kernel, dirs, bracket, opts)?;
    Ok(DriftReport { drift, upsilon })
}
