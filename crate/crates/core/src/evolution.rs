//! Time integration by the integrating-factor fixed point
//!
//! ```text
//! u(t) = B(0, t) u0 + int_0^t B(s, t) kappa (a * u)(s) ds,
//! B(s, t) = exp(-int_s^t (m + G u)(p) dp)
//! ```
//!
//! solved on each step by Picard iteration, plus checkers for the
//! qualitative properties of the flow.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Window};
use crate::kernels::Kernel;
use crate::nonlinearity::{Model, Verdict};
use rustfft::num_complex::Complex64;

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Interpolation nodes in units of the step: 0, the two Gauss points, 1.
const NODES: [f64; 4] = [0.0, 0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0, 1.0];
const GAUSS3_X: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
const GAUSS3_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Lagrange basis values, basis integrals and quadrature weights, all in
/// units of the step length.
struct Quadrature {
    /// `int_0^{x_j} L_k` for the three unknown nodes.
    gamma_node: [[f64; 4]; 3],
    /// `int_0^{sigma} L_k` at the Gauss points of `[0, x_j]`.
    gamma_gauss: [[[f64; 4]; 3]; 3],
    /// `L_k(sigma)` at the same points.
    basis_gauss: [[[f64; 4]; 3]; 3],
    weight: [[f64; 3]; 3],
}

fn lagrange_coeffs(k: usize) -> [f64; 4] {
    // monomial coefficients of prod_{i != k} (x - x_i) / (x_k - x_i)
    let mut c = [1.0, 0.0, 0.0, 0.0];
    let mut denom = 1.0;
    for (i, &xi) in NODES.iter().enumerate() {
        if i == k {
            continue;
        }
        let mut next = [0.0; 4];
        for d in 0..3 {
            next[d + 1] += c[d];
            next[d] -= xi * c[d];
        }
        c = next;
        denom *= NODES[k] - xi;
    }
    c.map(|v| v / denom)
}

fn poly(c: &[f64; 4], x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

fn poly_integral(c: &[f64; 4], x: f64) -> f64 {
    (((c[3] / 4.0 * x + c[2] / 3.0) * x + c[1] / 2.0) * x + c[0]) * x
}

impl Quadrature {
    fn new() -> Self {
        let basis: Vec<[f64; 4]> = (0..4).map(lagrange_coeffs).collect();
        let mut q = Quadrature {
            gamma_node: [[0.0; 4]; 3],
            gamma_gauss: [[[0.0; 4]; 3]; 3],
            basis_gauss: [[[0.0; 4]; 3]; 3],
            weight: [[0.0; 3]; 3],
        };
        for j in 0..3 {
            let xj = NODES[j + 1];
            for k in 0..4 {
                q.gamma_node[j][k] = poly_integral(&basis[k], xj);
            }
            for g in 0..3 {
                let sigma = xj * GAUSS3_X[g];
                q.weight[j][g] = xj * GAUSS3_W[g];
                for k in 0..4 {
                    q.gamma_gauss[j][g][k] = poly_integral(&basis[k], sigma);
                    q.basis_gauss[j][g][k] = poly(&basis[k], sigma);
                }
            }
        }
        q
    }
}

#[inline]
fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Result of one accepted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Reusable buffers for stepping one grid.
struct Stepper<'a> {
    model: &'a Model,
    kernel: &'a Kernel,
    shared_competition: bool,
    quad: Quadrature,
    v: [Vec<f64>; 4],
    next: [Vec<f64>; 3],
    conv: [Vec<f64>; 4],
    comp: [Vec<f64>; 4],
}

impl<'a> Stepper<'a> {
    fn new(model: &'a Model, kernel: &'a Kernel) -> Result<Self> {
        let grid = *kernel.grid();
        if let Some(am) = model.competition().kernel() {
            grid.ensure_same(am.grid())?;
        }
        let shared = model.competition().kernel().is_some_and(|am| am.same_as(kernel));
        let n = grid.len();
        let buf = || vec![0.0; n];
        Ok(Stepper {
            model,
            kernel,
            shared_competition: shared,
            quad: Quadrature::new(),
            v: [buf(), buf(), buf(), buf()],
            next: [buf(), buf(), buf()],
            conv: [buf(), buf(), buf(), buf()],
            comp: [buf(), buf(), buf(), buf()],
        })
    }

    /// Fills `conv[k] = kappa a*v[k]` and `comp[k] = a_minus*v[k]`, both
    /// clamped at zero, for the listed nodes.
    fn convolve_nodes(&mut self, nodes: &[usize]) {
        let kappa = self.model.kappa();
        let mut i = 0;
        while i < nodes.len() {
            if i + 1 < nodes.len() {
                let (p, q) = (nodes[i], nodes[i + 1]);
                let (cp, cq) = two_mut(&mut self.conv, p, q);
                self.kernel.convolve_pair_slices(&self.v[p], &self.v[q], cp, cq);
                i += 2;
            } else {
                let p = nodes[i];
                self.kernel
                    .convolve_slice(&self.v[p], &mut self.conv[p], crate::kernels::ConvolutionPath::Auto);
                i += 1;
            }
        }
        let has_comp = self.model.competition().kernel().is_some();
        for &k in nodes {
            if has_comp {
                if self.shared_competition {
                    self.comp[k].copy_from_slice(&self.conv[k]);
                } else {
                    self.model.competition_input(&self.v[k], &mut self.comp[k]);
                }
                for s in &mut self.comp[k] {
                    *s = s.max(0.0);
                }
            }
            for c in &mut self.conv[k] {
                *c = kappa * c.max(0.0);
            }
        }
    }

    fn step(&mut self, u0: &[f64], dt: f64, tol: f64, max_iter: usize) -> Result<StepStats> {
        let n = u0.len();
        let m = self.model.m();
        self.v[0].copy_from_slice(u0);
        self.convolve_nodes(&[0]);
        // explicit Euler predictor
        for i in 0..n {
            let u = u0[i];
            let rate = self.conv[0][i] - m * u - self.model.ugu_cell(u, self.comp[0][i]);
            for j in 1..4 {
                self.v[j][i] = (u + NODES[j] * dt * rate).max(0.0);
            }
        }
        let mut residual = f64::INFINITY;
        for iter in 1..=max_iter {
            self.convolve_nodes(&[1, 2, 3]);
            let q = &self.quad;
            residual = 0.0;
            for i in 0..n {
                let mut g = [0.0; 4];
                let mut a = [0.0; 4];
                for k in 0..4 {
                    g[k] = m + self.model.g_cell(self.v[k][i], self.comp[k][i]);
                    a[k] = self.conv[k][i];
                }
                for j in 0..3 {
                    let gt = dt * dot4(&q.gamma_node[j], &g);
                    let mut acc = 0.0;
                    for s in 0..3 {
                        let gs = dt * dot4(&q.gamma_gauss[j][s], &g);
                        let as_ = dot4(&q.basis_gauss[j][s], &a);
                        acc += q.weight[j][s] * (gs - gt).exp() * as_;
                    }
                    let val = ((-gt).exp() * u0[i] + dt * acc).max(0.0);
                    residual = f64::max(residual, (val - self.v[j + 1][i]).abs());
                    self.next[j][i] = val;
                }
            }
            for j in 0..3 {
                std::mem::swap(&mut self.v[j + 1], &mut self.next[j]);
            }
            if residual < tol {
                return Ok(StepStats {
                    iterations: iter,
                    residual,
                });
            }
            if !residual.is_finite() {
                break;
            }
        }
        Err(Error::NoConvergence { max_iter, dt, residual })
    }

    fn result(&self) -> &[f64] {
        &self.v[3]
    }
}

fn two_mut<T>(v: &mut [T], p: usize, q: usize) -> (&mut T, &mut T) {
    assert!(p < q);
    let (lo, hi) = v.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

/// Default Picard tolerance (sup norm of successive iterates).
pub const PICARD_TOL: f64 = 1e-11;
pub const PICARD_MAX_ITER: usize = 60;

/// One step of length `dt` from `u`; the returned field carries time
/// `u.time() + dt`.
pub fn step(u: &Field, dt: f64, model: &Model, kernel: &Kernel, picard_tol: f64, max_iter: usize) -> Result<Field> {
    step_with_stats(u, dt, model, kernel, picard_tol, max_iter).map(|(f, _)| f)
}

pub fn step_with_stats(
    u: &Field,
    dt: f64,
    model: &Model,
    kernel: &Kernel,
    picard_tol: f64,
    max_iter: usize,
) -> Result<(Field, StepStats)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("step length must be positive, got {dt}")));
    }
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("field has non-finite values".into()));
    }
    kernel.grid().ensure_same(u.grid())?;
    let mut stepper = Stepper::new(model, kernel)?;
    let stats = stepper.step(u.values(), dt, picard_tol, max_iter)?;
    let out = Field::from_values(*u.grid(), stepper.result().to_vec())?.with_time(u.time() + dt);
    Ok((out, stats))
}

/// The a-priori step schedule `r_{n+1} = r_n + p e^{-q r_n}` with step
/// lengths `p e^{-q r_n} / (2 kappa r_n)`, where `p = alpha m e`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSchedule {
    pub r_seq: Vec<f64>,
    pub dt_seq: Vec<f64>,
    pub p: f64,
    pub q: f64,
    pub kappa: f64,
}

impl StepSchedule {
    pub fn new(r1: f64, alpha: f64, m: f64, kappa: f64, q: f64) -> Self {
        let p = alpha * m * std::f64::consts::E;
        StepSchedule {
            r_seq: vec![r1],
            dt_seq: Vec::new(),
            p,
            q,
            kappa,
        }
    }

    /// Appends one more term and returns the step length for the last `r`.
    pub fn advance(&mut self) -> f64 {
        let r = *self.r_seq.last().expect("schedule is never empty");
        let decay = self.p * (-self.q * r).exp();
        let dt = decay / (2.0 * self.kappa * r);
        self.r_seq.push(r + decay);
        self.dt_seq.push(dt);
        dt
    }

    /// Largest step allowed from a state of norm `mu`:
    /// `r = mu + p e^{-q mu}`, `dt = p e^{-q r} / (2 kappa r)`.
    pub fn step_cap(mu: f64, alpha: f64, m: f64, kappa: f64, q: f64) -> f64 {
        let p = alpha * m * std::f64::consts::E;
        let r = mu + p * (-q * mu).exp();
        p * (-q * r).exp() / (2.0 * kappa * r)
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub picard_tol: f64,
    pub max_iter: usize,
    /// Step-size parameter in `(0, 1)`.
    pub alpha: f64,
    pub dt_max: f64,
    /// Snapshot cadence; the horizon is always recorded.
    pub snapshot_interval: Option<f64>,
    pub max_halvings: usize,
    /// Lipschitz constant of `G`; the schedule uses `q = ln(1 + l)`.
    /// Defaults to the model's exact constant, else 1.
    pub lipschitz: Option<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            picard_tol: PICARD_TOL,
            max_iter: PICARD_MAX_ITER,
            alpha: 0.5,
            dt_max: 0.05,
            snapshot_interval: Some(1.0),
            max_halvings: 12,
            lipschitz: None,
        }
    }
}

impl EvolveOptions {
    pub fn with_snapshots(mut self, every: f64) -> Self {
        self.snapshot_interval = Some(every);
        self
    }

    fn step_cap(&self, model: &Model, mu: f64) -> f64 {
        let l = self.lipschitz.or(model.exact_lipschitz()).unwrap_or(1.0);
        let q = (1.0 + l).ln();
        let cap = if model.m() > 0.0 {
            StepSchedule::step_cap(mu.max(1e-3), self.alpha, model.m(), model.kappa(), q)
        } else {
            f64::INFINITY
        };
        cap.min(self.dt_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Snapshots of one solution together with the model that produced it.
#[derive(Clone, Debug)]
pub struct Trajectory {
    snapshots: Vec<Field>,
    step_log: Vec<StepRecord>,
    model: Model,
    kernel: Kernel,
}

impl Trajectory {
    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.time()).collect()
    }

    pub fn initial(&self) -> &Field {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn step_log(&self) -> &[StepRecord] {
        &self.step_log
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    /// Snapshot recorded at time `t` (to within `1e-9`).
    pub fn at_time(&self, t: f64) -> Option<&Field> {
        self.snapshots.iter().find(|f| (f.time() - t).abs() <= 1e-9)
    }
}

/// Integrates from `u0` to `horizon`.
///
/// Steps are capped by the schedule bound for the current sup norm, by
/// `dt_max`, and by the next snapshot time. A step that fails to converge
/// is retried with half the length.
pub fn evolve(u0: &Field, horizon: f64, model: &Model, kernel: &Kernel, opts: &EvolveOptions) -> Result<Trajectory> {
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be nonnegative, got {horizon}")));
    }
    if let Some(v) = u0.values().iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("initial data must be finite and nonnegative, found {v}")));
    }
    kernel.grid().ensure_same(u0.grid())?;
    let mut stepper = Stepper::new(model, kernel)?;
    let grid = *u0.grid();
    let t0 = u0.time();
    let mut current = u0.values().to_vec();
    let mut t = 0.0;
    let mut snapshots = vec![u0.clone()];
    let mut step_log = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    if let Some(every) = opts.snapshot_interval.filter(|e| *e > 0.0) {
        let mut k = 1;
        while (k as f64) * every < horizon - 1e-12 {
            targets.push(k as f64 * every);
            k += 1;
        }
    }
    targets.push(horizon);
    for &target in &targets {
        while target - t > 1e-12 {
            let mu = current.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let mut dt = opts.step_cap(model, mu);
            let mut halvings = 0;
            let stats = loop {
                let last = target - t <= dt * (1.0 + 1e-9);
                if last {
                    dt = target - t;
                }
                match stepper.step(&current, dt, opts.picard_tol, opts.max_iter) {
                    Ok(s) => break s,
                    Err(Error::NoConvergence { .. }) if halvings < opts.max_halvings => {
                        halvings += 1;
                        dt *= 0.5;
                    }
                    Err(e) => return Err(e),
                }
            };
            current.copy_from_slice(stepper.result());
            t = if target - t <= dt * (1.0 + 1e-9) { target } else { t + dt };
            step_log.push(StepRecord {
                time: t0 + t,
                dt,
                iterations: stats.iterations,
                residual: stats.residual,
            });
        }
        snapshots.push(Field::from_values(grid, current.clone())?.with_time(t0 + target));
    }
    if horizon == 0.0 {
        snapshots.truncate(1);
    }
    Ok(Trajectory {
        snapshots,
        step_log,
        model: model.clone(),
        kernel: kernel.clone(),
    })
}

/// Duhamel bound `e^{-m t} e^{t kappa A} u0`, evaluated exactly on the
/// torus through the kernel's Fourier multiplier.
pub fn linear_upper_bound(u0: &Field, t: f64, kappa: f64, m: f64, kernel: &Kernel) -> Result<Field> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be nonnegative, got {t}")));
    }
    kernel.grid().ensure_same(u0.grid())?;
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let vals = kernel.spectral_apply(u0.values(), |h| (h * (t * kappa) - Complex64::new(m * t, 0.0)).exp());
    Ok(Field::from_values(*u0.grid(), vals)?.with_time(u0.time() + t))
}

/// Worst cell-wise violation found by a checker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub amount: f64,
    pub time: f64,
    pub cell: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub holds: bool,
    /// `max (lo - hi)` over all cells and snapshots (negative when strict).
    pub worst_margin: f64,
    pub worst: Violation,
}

fn same_times(a: &Trajectory, b: &Trajectory) -> Result<()> {
    a.grid().ensure_same(b.grid())?;
    let (ta, tb) = (a.times(), b.times());
    if ta.len() != tb.len() || ta.iter().zip(&tb).any(|(x, y)| (x - y).abs() > 1e-9) {
        return Err(Error::InvalidParameter("trajectories have different snapshot times".into()));
    }
    Ok(())
}

/// `lo <= hi + tol` cell-wise at every snapshot.
pub fn check_comparison(lo: &Trajectory, hi: &Trajectory, tol: f64) -> Result<ComparisonReport> {
    same_times(lo, hi)?;
    let mut worst = Violation {
        amount: f64::NEG_INFINITY,
        time: 0.0,
        cell: 0,
    };
    for (a, b) in lo.snapshots().iter().zip(hi.snapshots()) {
        for (i, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
            if x - y > worst.amount {
                worst = Violation {
                    amount: x - y,
                    time: a.time(),
                    cell: i,
                };
            }
        }
    }
    Ok(ComparisonReport {
        holds: worst.amount <= tol,
        worst_margin: worst.amount,
        worst,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TubeReport {
    pub holds: bool,
    pub worst: Violation,
}

/// `-tol <= u <= theta + tol` at every snapshot.
pub fn check_tube(traj: &Trajectory, theta: f64, tol: f64) -> TubeReport {
    let mut worst = Violation {
        amount: 0.0,
        time: 0.0,
        cell: 0,
    };
    for f in traj.snapshots() {
        for (i, &v) in f.values().iter().enumerate() {
            let over = (-v).max(v - theta);
            if over > worst.amount {
                worst = Violation {
                    amount: over,
                    time: f.time(),
                    cell: i,
                };
            }
        }
    }
    TubeReport {
        holds: worst.amount <= tol,
        worst,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositivityReport {
    pub verdict: Verdict,
    pub min_value: f64,
    pub time: f64,
    pub cell: usize,
}

/// Strict positivity on `window` for all snapshots with `t >= t_min`.
/// Not applicable when the data are identically `0` or `theta`.
pub fn check_positivity(traj: &Trajectory, t_min: f64, window: &Window) -> PositivityReport {
    let u0 = traj.initial();
    let theta = traj.model().theta();
    if u0.values().iter().all(|&v| v == 0.0) || u0.values().iter().all(|&v| (v - theta).abs() <= 1e-15) {
        return PositivityReport {
            verdict: Verdict::NotApplicable,
            min_value: u0.min(),
            time: 0.0,
            cell: 0,
        };
    }
    let cells = window.cells(traj.grid());
    let mut out = PositivityReport {
        verdict: Verdict::Holds,
        min_value: f64::INFINITY,
        time: 0.0,
        cell: 0,
    };
    for f in traj.snapshots().iter().filter(|f| f.time() >= t_min - 1e-12) {
        for &i in &cells {
            if f.values()[i] < out.min_value {
                out.min_value = f.values()[i];
                out.time = f.time();
                out.cell = i;
            }
        }
    }
    if !(out.min_value > 0.0) {
        out.verdict = Verdict::Fails;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivarianceReport {
    pub holds: bool,
    pub sup_difference: f64,
}

pub const EQUIVARIANCE_TOL: f64 = 1e-10;

/// Compares `evolve(T_y u0)` against `T_y evolve(u0)` at `horizon`.
pub fn check_equivariance(
    u0: &Field,
    shift: [isize; 2],
    horizon: f64,
    model: &Model,
    kernel: &Kernel,
    opts: &EvolveOptions,
) -> Result<EquivarianceReport> {
    let plain = evolve(u0, horizon, model, kernel, opts)?;
    let shifted = evolve(&u0.translate_cells(shift), horizon, model, kernel, opts)?;
    let d = plain.last().translate_cells(shift).sup_distance(shifted.last())?;
    Ok(EquivarianceReport {
        holds: d <= EQUIVARIANCE_TOL,
        sup_difference: d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub holds: bool,
    /// Direction found in the initial data.
    pub kind: Monotonicity,
    pub worst: Violation,
}

fn pair_indices(grid: &Grid, window: &Window, step: [isize; 2]) -> Vec<(usize, usize)> {
    let (n0, n1) = (grid.cells(0) as isize, grid.cells(1) as isize);
    window
        .cells(grid)
        .into_iter()
        .filter_map(|i| {
            let (a, b) = grid.split_index(i);
            let j = grid.index(
                (a as isize + step[0]).rem_euclid(n0) as usize,
                (b as isize + step[1]).rem_euclid(n1) as usize,
            );
            window.contains(grid, grid.cell_center(j)).then_some((i, j))
        })
        .collect()
}

fn classify(vals: &[f64], pairs: &[(usize, usize)], tol: f64) -> Monotonicity {
    let (mut up, mut down) = (false, false);
    for &(i, j) in pairs {
        let d = vals[j] - vals[i];
        up |= d > tol;
        down |= d < -tol;
    }
    match (up, down) {
        (false, false) => Monotonicity::Constant,
        (true, false) => Monotonicity::Increasing,
        (false, true) => Monotonicity::Decreasing,
        (true, true) => Monotonicity::None,
    }
}

/// Checks that the monotonicity of the initial data along the lattice
/// direction `step` persists on `window` in every snapshot.
pub fn check_directional_monotonicity(traj: &Trajectory, step: [isize; 2], window: &Window, tol: f64) -> MonotonicityReport {
    let pairs = pair_indices(traj.grid(), window, step);
    let kind = classify(traj.initial().values(), &pairs, 0.0);
    let mut worst = Violation {
        amount: 0.0,
        time: 0.0,
        cell: 0,
    };
    for f in traj.snapshots() {
        let v = f.values();
        for &(i, j) in &pairs {
            let d = v[j] - v[i];
            let bad = match kind {
                Monotonicity::Increasing => -d,
                Monotonicity::Decreasing => d,
                Monotonicity::Constant => d.abs(),
                Monotonicity::None => 0.0,
            };
            if bad > worst.amount {
                worst = Violation {
                    amount: bad,
                    time: f.time(),
                    cell: i,
                };
            }
        }
    }
    MonotonicityReport {
        holds: kind != Monotonicity::None && worst.amount <= tol,
        kind,
        worst,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityRow {
    pub eps: f64,
    /// `max_{t <= T} max_{x in K} |u_eps - u|`.
    pub max_difference: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityReport {
    pub rows: Vec<ContinuityRow>,
    /// `(d_i / eps_i) / (d_{i+1} / eps_{i+1})` for consecutive rows.
    pub ratios: Vec<f64>,
    pub holds: bool,
}

/// Runs `u0 + eps * perturbation` for each `eps` and tabulates the largest
/// deviation from the unperturbed run on `window`. The table must shrink
/// with `eps`, and the normalized deviations must stay within a factor 10
/// of each other.
pub fn check_continuous_dependence(
    u0: &Field,
    perturbation: &Field,
    eps: &[f64],
    horizon: f64,
    window: &Window,
    model: &Model,
    kernel: &Kernel,
    opts: &EvolveOptions,
) -> Result<ContinuityReport> {
    u0.grid().ensure_same(perturbation.grid())?;
    let base = evolve(u0, horizon, model, kernel, opts)?;
    let cells = window.cells(u0.grid());
    let mut rows = Vec::new();
    for &e in eps {
        let vals = u0
            .values()
            .iter()
            .zip(perturbation.values())
            .map(|(a, b)| (a + e * b).max(0.0))
            .collect();
        let start = Field::from_values(*u0.grid(), vals)?.with_time(u0.time());
        let run = evolve(&start, horizon, model, kernel, opts)?;
        let mut d = 0.0f64;
        for (a, b) in run.snapshots().iter().zip(base.snapshots()) {
            for &i in &cells {
                d = d.max((a.values()[i] - b.values()[i]).abs());
            }
        }
        rows.push(ContinuityRow {
            eps: e,
            max_difference: d,
        });
    }
    let mut ratios = Vec::new();
    let mut holds = true;
    for w in rows.windows(2) {
        if w[1].eps < w[0].eps && w[1].max_difference > w[0].max_difference {
            holds = false;
        }
        if w[0].eps > 0.0 && w[1].eps > 0.0 && w[1].max_difference > 0.0 {
            let r = (w[0].max_difference / w[0].eps) / (w[1].max_difference / w[1].eps);
            if !(0.1..=10.0).contains(&r) {
                holds = false;
            }
            ratios.push(r);
        }
    }
    for r in &rows {
        if r.eps == 0.0 && r.max_difference != 0.0 {
            holds = false;
        }
    }
    Ok(ContinuityReport { rows, ratios, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_kernel, KernelSpec};

    fn setup(cells: usize) -> (Model, Kernel) {
        let g = Grid::line(100.0, cells).unwrap();
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
        (Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap(), k)
    }

    #[test]
    fn lagrange_basis_is_cardinal() {
        for k in 0..4 {
            let c = lagrange_coeffs(k);
            for (i, &x) in NODES.iter().enumerate() {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((poly(&c, x) - expect).abs() < 1e-13);
            }
        }
        let q = Quadrature::new();
        for j in 0..3 {
            let total: f64 = q.gamma_node[j].iter().sum();
            assert!((total - NODES[j + 1]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_and_theta_are_fixed() {
        let (model, k) = setup(128);
        let z = step(&Field::zeros(*k.grid()), 0.05, &model, &k, 1e-12, 50).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
        let t = step(&Field::constant(*k.grid(), 1.0), 0.05, &model, &k, 1e-12, 50).unwrap();
        assert!(t.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn constant_data_follow_logistic_ode() {
        let (model, k) = setup(64);
        let u0 = Field::constant(*k.grid(), 0.5);
        let tr = evolve(&u0, 3f64.ln(), &model, &k, &EvolveOptions::default()).unwrap();
        let v = tr.last().values()[0];
        assert!((v - 0.75).abs() / 0.75 < 1e-6, "{v}");
    }

    #[test]
    fn huge_step_does_not_converge() {
        let (model, k) = setup(64);
        let u0 = Field::from_fn(*k.grid(), |p| if p[0].abs() < 3.0 { 1.0 } else { 0.0 });
        let e = step(&u0, 5.0, &model, &k, 1e-12, 5).unwrap_err();
        assert!(matches!(e, Error::NoConvergence { .. }));
    }

    #[test]
    fn schedule_recurrence() {
        let mut s = StepSchedule::new(1.0, 0.5, 1.0, 2.0, 1.0);
        let dt = s.advance();
        let p = 0.5 * std::f64::consts::E;
        assert!((s.r_seq[1] - (1.0 + p * (-1.0f64).exp())).abs() < 1e-15);
        assert!((dt - p * (-1.0f64).exp() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn linear_bound_on_constants() {
        let (_, k) = setup(128);
        let u0 = Field::constant(*k.grid(), 0.3);
        let b = linear_upper_bound(&u0, 2.0, 2.0, 1.0, &k).unwrap();
        let expect = 0.3 * 2f64.exp();
        assert!(b.values().iter().all(|v| (v - expect).abs() < 1e-12 * expect));
        assert_eq!(linear_upper_bound(&u0, 0.0, 2.0, 1.0, &k).unwrap(), u0);
    }

    #[test]
    fn snapshots_align_with_cadence() {
        let (model, k) = setup(128);
        let u0 = Field::from_fn(*k.grid(), |p| 0.2 * (-p[0] * p[0]).exp());
        let tr = evolve(&u0, 2.5, &model, &k, &EvolveOptions::default()).unwrap();
        assert_eq!(tr.times(), vec![0.0, 1.0, 2.0, 2.5]);
        assert!(tr.step_log().iter().all(|r| r.residual < PICARD_TOL));
    }
}
