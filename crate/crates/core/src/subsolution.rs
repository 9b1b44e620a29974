//! Gaussian sub-solutions `w(x, t) = q exp(-|x - t m|^2 / (alpha t))`
//! and the fitted lower bound `u(x, t) >= q1 exp(-|x - x0|^2 / tau)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolveOptions, Trajectory};
use crate::grid::{norm, Field, Grid, Point};
use crate::kernels::Kernel;
use crate::nonlinearity::{apply_g, check_assumptions, Model};

/// `int |y|^2 dy` over the cone `{|y| <= rho, y . e >= |y|/2}`, by
/// quadrature over the cells of `grid` (16x16 subcells per cell in 2D,
/// exact per cell in 1D).
pub fn cone_second_moment(grid: &Grid, rho: f64) -> f64 {
    if grid.dims() == 1 {
        let h = grid.spacing(0);
        let mut acc = 0.0;
        let mut k = 0.0;
        while k * h < rho {
            let (a, b) = (k * h, ((k + 1.0) * h).min(rho));
            acc += (b.powi(3) - a.powi(3)) / 3.0;
            k += 1.0;
        }
        return acc;
    }
    const SUB: usize = 16;
    let (h0, h1) = (grid.spacing(0), grid.spacing(1));
    let (n0, n1) = ((rho / h0).ceil() as isize + 1, (rho / h1).ceil() as isize + 1);
    let dv = h0 * h1 / (SUB * SUB) as f64;
    let mut acc = 0.0;
    for i in 0..=n0 {
        for j in -n1..=n1 {
            for a in 0..SUB {
                for b in 0..SUB {
                    let y = [
                        (i as f64 - 0.5 + (a as f64 + 0.5) / SUB as f64) * h0,
                        (j as f64 - 0.5 + (b as f64 + 0.5) / SUB as f64) * h1,
                    ];
                    let r = norm(y);
                    if r <= rho && y[0] >= 0.5 * r {
                        acc += r * r * dv;
                    }
                }
            }
        }
    }
    acc
}

/// `alpha_0 = kappa rho B_rho / 2` with `rho` the kernel's nondegeneracy
/// radius and `B_rho` the cone second moment.
pub fn alpha0(kernel: &Kernel, kappa: f64) -> Result<f64> {
    let rho = kernel.nondeg_radius();
    if !(rho > 0.0) {
        return Err(Error::NoNondegeneracy);
    }
    Ok(0.5 * kappa * rho * cone_second_moment(kernel.grid(), rho))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubsolutionParams {
    pub q: f64,
    pub alpha: f64,
    /// Validity threshold `T`; 0 until a search certifies one.
    pub t_min: f64,
    pub drift: Point,
    pub q0: f64,
    pub alpha0: f64,
}

impl SubsolutionParams {
    /// Parameters for `model`: drift `kappa int y a(y) dy`, `alpha0` from the
    /// kernel and `q0 = min{theta, beta / (2 l_theta)}`.
    pub fn for_model(model: &Model, kernel: &Kernel, q: f64, alpha: f64) -> Result<Self> {
        let d = kernel.drift_density();
        Ok(SubsolutionParams {
            q,
            alpha,
            t_min: 0.0,
            drift: [model.kappa() * d[0], model.kappa() * d[1]],
            q0: q0_of(model, kernel),
            alpha0: alpha0(kernel, model.kappa())?,
        })
    }
}

/// `l_theta`: exact for logistic competition, otherwise the sampled
/// estimate from the assumption checker.
pub fn lipschitz_of(model: &Model, kernel: &Kernel) -> f64 {
    model
        .exact_lipschitz()
        .unwrap_or_else(|| check_assumptions(model, kernel).lipschitz)
}

pub fn q0_of(model: &Model, kernel: &Kernel) -> f64 {
    let l = lipschitz_of(model, kernel);
    let cap = if l > 0.0 { model.beta() / (2.0 * l) } else { f64::INFINITY };
    model.theta().min(cap)
}

/// `w(x, t)` at cell centers, with `x - t m` taken as the periodic minimum
/// image.
pub fn gaussian_subsolution(params: &SubsolutionParams, t: f64, grid: &Grid) -> Field {
    let c = [t * params.drift[0], t * params.drift[1]];
    let at = params.alpha * t;
    Field::from_fn(*grid, |x| {
        let z = grid.min_image(x, c);
        params.q * (-(z[0] * z[0] + z[1] * z[1]) / at).exp()
    })
    .with_time(t)
}

/// `dw/dt - kappa (a * w) + m w`, with the time derivative in closed form:
/// `dw/dt = w (|z|^2 / (alpha t^2) + 2 z . m / (alpha t))`, `z = x - t m`.
pub fn f_tilde(params: &SubsolutionParams, t: f64, kernel: &Kernel, kappa: f64, m: f64) -> Result<Field> {
    let grid = kernel.grid();
    let w = gaussian_subsolution(params, t, grid);
    let aw = kernel.convolve(&w)?;
    let c = [t * params.drift[0], t * params.drift[1]];
    let at = params.alpha * t;
    let values = (0..grid.len())
        .map(|i| {
            let z = grid.min_image(grid.cell_center(i), c);
            let rate = (z[0] * z[0] + z[1] * z[1]) / (at * t) + 2.0 * (z[0] * params.drift[0] + z[1] * params.drift[1]) / at;
            let wi = w.values()[i];
            wi * rate - kappa * aw.values()[i] + m * wi
        })
        .collect();
    Field::from_values(*grid, values).map(|f| f.with_time(t))
}

/// Doubling search for the validity time.
#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub t_start: f64,
    pub t_cap: f64,
    /// Geometrically spaced sample times per window `[T, 4T]`.
    pub samples: usize,
    pub tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            t_start: 1.0,
            t_cap: 4096.0,
            samples: 9,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubsolutionReport {
    pub params: SubsolutionParams,
    /// Mortality used in the certificate (`m`, or `m + beta/2`).
    pub mortality: f64,
    pub t_found: f64,
    /// `(t, max F w)` over the certified window.
    pub samples: Vec<(f64, f64)>,
    pub max: f64,
    /// `max G v` over the sampled fields `v <= q0` (nonlinear variant).
    pub g_max: Option<f64>,
}

fn window_times(t: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|k| t * 4f64.powf(k as f64 / (n - 1) as f64)).collect()
}

fn search(params: &SubsolutionParams, kernel: &Kernel, kappa: f64, m: f64, opts: &SearchOptions) -> Result<(f64, Vec<(f64, f64)>)> {
    let grid = kernel.grid();
    let half = (0..grid.dims()).map(|a| grid.half_extent(a)).fold(f64::INFINITY, f64::min);
    let mut t = opts.t_start;
    let mut best = f64::INFINITY;
    while t <= opts.t_cap {
        // the Gaussian must be negligible at the seam for the torus to stand
        // in for the whole space
        let reach = (params.alpha * 4.0 * t * (params.q / opts.tol).max(1.0).ln()).sqrt()
            + 4.0 * t * norm(params.drift);
        if reach > half {
            return Err(Error::DomainExceeded { needed: reach, limit: half });
        }
        let mut samples = Vec::new();
        for s in window_times(t, opts.samples) {
            samples.push((s, f_tilde(params, s, kernel, kappa, m)?.max()));
        }
        let worst = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        if worst <= opts.tol {
            return Ok((t, samples));
        }
        best = best.min(worst);
        t *= 2.0;
    }
    Err(Error::NotASubsolution {
        t_cap: opts.t_cap,
        best_max: best,
    })
}

/// Certifies `w` as a sub-solution of `du/dt = kappa a * u - m u`.
pub fn verify_linear_subsolution(
    params: &SubsolutionParams,
    kernel: &Kernel,
    kappa: f64,
    m: f64,
    opts: &SearchOptions,
) -> Result<SubsolutionReport> {
    let (t, samples) = search(params, kernel, kappa, m, opts)?;
    let max = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(SubsolutionReport {
        params: SubsolutionParams { t_min: t, ..params.clone() },
        mortality: m,
        t_found: t,
        samples,
        max,
        g_max: None,
    })
}

/// Largest `G v` over constants in `[0, q0]` and seeded random fields with
/// values in `[0, q0]`.
pub fn sampled_g_max(model: &Model, grid: &Grid, q0: f64, fields: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    for k in 0..=8 {
        let v = Field::constant(*grid, q0 * k as f64 / 8.0);
        best = best.max(apply_g(model, &v)?.max());
    }
    for _ in 0..fields {
        let values = (0..grid.len()).map(|_| q0 * rng.random::<f64>()).collect();
        let v = Field::from_values(*grid, values)?;
        best = best.max(apply_g(model, &v)?.max());
    }
    Ok(best)
}

/// Certifies `w` against the nonlinear equation via the linear one with
/// mortality `m + beta/2`, valid while `G w <= beta/2`, i.e. `q < q0`.
pub fn verify_nonlinear_subsolution(
    params: &SubsolutionParams,
    model: &Model,
    kernel: &Kernel,
    opts: &SearchOptions,
) -> Result<SubsolutionReport> {
    if !(params.q < params.q0) {
        return Err(Error::QTooLarge {
            q: params.q,
            q0: params.q0,
        });
    }
    let beta = model.beta();
    let g_max = sampled_g_max(model, kernel.grid(), params.q0, 8, 0x5eed)?;
    let mut rep = verify_linear_subsolution(params, kernel, model.kappa(), model.m() + 0.5 * beta, opts)?;
    rep.g_max = Some(g_max);
    if g_max > 0.5 * beta + opts.tol.max(1e-10) {
        return Err(Error::NotASubsolution {
            t_cap: opts.t_cap,
            best_max: g_max - 0.5 * beta,
        });
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominationReport {
    /// `min (u(x, t) - w(x, T + t))` over cells and snapshots.
    pub min_margin: f64,
    pub time: f64,
    pub holds: bool,
}

/// Seeds `u(., 0) = w(., T)` and checks `u(., t) >= w(., T + t) - tol` for
/// `t` in `[0, 3T]`.
pub fn check_domination(
    params: &SubsolutionParams,
    model: &Model,
    kernel: &Kernel,
    snapshots: usize,
    tol: f64,
    opts: &EvolveOptions,
) -> Result<DominationReport> {
    let grid = kernel.grid();
    let t0 = params.t_min;
    if !(t0 > 0.0) {
        return Err(Error::InvalidParameter("domination needs a certified T > 0".into()));
    }
    let horizon = 3.0 * t0;
    let u0 = gaussian_subsolution(params, t0, grid).with_time(0.0);
    let opts = opts.clone().with_snapshots(horizon / snapshots.max(1) as f64);
    let traj = evolve(&u0, horizon, model, kernel, &opts)?;
    let mut min_margin = f64::INFINITY;
    let mut time = 0.0;
    for snap in traj.snapshots() {
        let w = gaussian_subsolution(params, t0 + snap.time(), grid);
        let margin = snap
            .values()
            .iter()
            .zip(w.values())
            .map(|(u, w)| u - w)
            .fold(f64::INFINITY, f64::min);
        if margin < min_margin {
            min_margin = margin;
            time = snap.time();
        }
    }
    Ok(DominationReport {
        min_margin,
        time,
        holds: min_margin >= -tol,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBound {
    pub q1: f64,
    /// Bump found in the initial data: `u0 >= eta` on `B_r(x0)`.
    pub eta: f64,
    pub r: f64,
    pub t: f64,
    pub floor: f64,
}

impl LowerBound {
    pub fn positive(&self) -> bool {
        self.q1 > 0.0
    }
}

/// Largest `q1` with `u(x, t) >= q1 exp(-|x - x0|^2 / tau) - floor` on
/// every cell.
///
/// Far from `x0` the solution underflows while `exp(+|x - x0|^2 / tau)`
/// overflows, so values are raised to `floor` and the minimum is taken in
/// the log domain.
pub fn check_lower_bound_form(traj: &Trajectory, x0: Point, tau: f64, t: f64, floor: f64) -> Result<LowerBound> {
    if !(tau > 0.0) || !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} and floor = {floor} must be positive")));
    }
    let grid = traj.grid();
    let u0 = traj.initial();
    let r = 2.0 * (0..grid.dims()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    let eta = (0..grid.len())
        .filter(|&i| norm(grid.min_image(grid.cell_center(i), x0)) <= r)
        .map(|i| u0.values()[i])
        .fold(f64::INFINITY, f64::min);
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::PreconditionFail(format!(
            "initial data is not bounded below by a positive constant on B_{r}({x0:?})"
        )));
    }
    let u = traj
        .at_time(t)
        .ok_or_else(|| Error::InvalidParameter(format!("no snapshot at t = {t}")))?;
    let log_q1 = (0..grid.len())
        .map(|i| {
            let d = norm(grid.min_image(grid.cell_center(i), x0));
            u.values()[i].max(floor).ln() + d * d / tau
        })
        .fold(f64::INFINITY, f64::min);
    Ok(LowerBound {
        q1: log_q1.exp(),
        eta,
        r,
        t,
        floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_kernel, KernelSpec};

    #[test]
    fn cone_moments() {
        let g = Grid::line(40.0, 4000).unwrap();
        assert!((cone_second_moment(&g, 0.5) - 0.125 / 3.0).abs() < 1e-15);
        let p = Grid::plane([20.0, 20.0], [400, 400]).unwrap();
        let exact = std::f64::consts::PI * 0.5f64.powi(4) / 6.0;
        assert!((cone_second_moment(&p, 0.5) / exact - 1.0).abs() < 1e-3);
    }

    #[test]
    fn alpha0_scales_with_kappa() {
        let g = Grid::line(40.0, 4000).unwrap();
        let k = build_kernel(&KernelSpec::UniformBall { radius: 1.0 }, g).unwrap();
        let a1 = alpha0(&k, 1.0).unwrap();
        assert!((alpha0(&k, 2.0).unwrap() - 2.0 * a1).abs() < 1e-15);
        // rho = 1/2 and B = rho^3/3
        assert!((a1 - 0.5 * 0.5 * 0.125 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn peak_and_alpha_monotonicity() {
        let g = Grid::line(20.0, 200).unwrap();
        let p = SubsolutionParams {
            q: 0.3,
            alpha: 0.5,
            t_min: 0.0,
            drift: [0.05, 0.0],
            q0: 0.5,
            alpha0: 1.0,
        };
        let w = gaussian_subsolution(&p, 1.0, &g);
        assert!((w.values()[100] - 0.3 * (-(0.05f64 - 0.05).powi(2)).exp()).abs() < 1e-12);
        let narrow = gaussian_subsolution(&SubsolutionParams { alpha: 0.25, ..p.clone() }, 1.0, &g);
        assert!(narrow.values().iter().zip(w.values()).all(|(a, b)| a <= b));
    }

    #[test]
    fn logistic_q0_is_half() {
        let g = Grid::line(100.0, 1000).unwrap();
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
        let model = Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap();
        assert!((q0_of(&model, &k) - 0.5).abs() < 1e-12);
        let p = SubsolutionParams::for_model(&model, &k, 1.0, 0.001).unwrap();
        assert!(matches!(
            verify_nonlinear_subsolution(&p, &model, &k, &SearchOptions::default()),
            Err(Error::QTooLarge { .. })
        ));
    }

    #[test]
    fn f_tilde_linear_in_q() {
        let g = Grid::line(100.0, 1000).unwrap();
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
        let model = Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap();
        let p = SubsolutionParams::for_model(&model, &k, 0.1, 0.5).unwrap();
        let a = f_tilde(&p, 3.0, &k, 2.0, 1.0).unwrap();
        let b = f_tilde(&SubsolutionParams { q: 0.2, ..p }, 3.0, &k, 2.0, 1.0).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((2.0 * x - y).abs() < 1e-14);
        }
    }
}
