//! Hair-trigger metrics, front tracking and standalone checks of the
//! auxiliary lemmas.

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::grid::{Field, Point};
use crate::kernels::Kernel;
use crate::nonlinearity::{Competition, Model};
use crate::spreading::Profile;

/// Distance from the torus seam a metric window must keep, in kernel spreads.
pub const SEAM_SCALES: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSeries {
    pub drift: Point,
    pub half_width: f64,
    /// `(t, min over the moving window)`.
    pub points: Vec<(f64, f64)>,
}

impl MetricSeries {
    /// First snapshot time at which the metric is at least `level`.
    pub fn first_reaching(&self, level: f64) -> Option<f64> {
        self.points.iter().find(|p| p.1 >= level).map(|p| p.0)
    }

    /// Largest drop between consecutive snapshots after `t_min`.
    pub fn largest_drop_after(&self, t_min: f64) -> f64 {
        self.points
            .windows(2)
            .filter(|w| w[0].0 >= t_min)
            .fold(0.0, |m, w| m.max(w[0].1 - w[1].1))
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        self.points.last().copied()
    }
}

/// `min_{x in K} u(x + t n, t)` per snapshot, `K = [-half_width, half_width]^d`.
///
/// The window is sampled on the cell lattice shifted to `t n`, with linear
/// interpolation between cells.
pub fn hair_trigger_metric(traj: &Trajectory, half_width: f64, drift: Point) -> Result<MetricSeries> {
    let grid = traj.grid();
    let required = SEAM_SCALES * traj.kernel().spread();
    let dims = grid.dims();
    let steps: Vec<isize> = (0..dims)
        .map(|a| (half_width / grid.spacing(a) + 1e-9).floor() as isize)
        .collect();
    let mut points = Vec::with_capacity(traj.snapshots().len());
    for snap in traj.snapshots() {
        let t = snap.time();
        let c = [t * drift[0], t * drift[1]];
        let distance = grid.seam_distance(c) - half_width;
        if distance < required {
            return Err(Error::SeamViolation { time: t, distance, required });
        }
        let mut min = f64::INFINITY;
        let k1 = if dims == 2 { steps[1] } else { 0 };
        for i in -steps[0]..=steps[0] {
            for j in -k1..=k1 {
                let p = [c[0] + i as f64 * grid.spacing(0), c[1] + j as f64 * grid.spacing(1)];
                min = min.min(snap.sample(p));
            }
        }
        points.push((t, min));
    }
    Ok(MetricSeries {
        drift,
        half_width,
        points,
    })
}

/// Rightmost crossing of `level` along the line `s xi` through the grid
/// center, by linear interpolation of samples one spacing apart.
pub fn level_set_position(field: &Field, level: f64, xi: Point) -> Result<f64> {
    let grid = field.grid();
    let len = xi[0].hypot(xi[1]);
    let xi = [xi[0] / len, xi[1] / len];
    let h = grid.min_spacing();
    // reach of the line before it leaves the fundamental cell
    let reach = (0..grid.dims())
        .filter(|&a| xi[a].abs() > 1e-12)
        .map(|a| grid.half_extent(a) / xi[a].abs())
        .fold(f64::INFINITY, f64::min);
    // stay clear of the periodic wrap between the outermost cells
    let n = ((reach - h) / h).floor() as isize;
    let value = |k: isize| field.sample([k as f64 * h * xi[0], k as f64 * h * xi[1]]);
    let mut prev = value(n);
    for k in (-n..n).rev() {
        let cur = value(k);
        if (cur - level) * (prev - level) <= 0.0 && cur != prev {
            let t = (level - cur) / (prev - cur);
            return Ok((k as f64 + t) * h);
        }
        prev = cur;
    }
    Err(Error::NoCrossing { level })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontSpeed {
    pub speed: f64,
    pub intercept: f64,
    /// Root-mean-square deviation from the fitted line.
    pub residual: f64,
    pub points: Vec<(f64, f64)>,
}

/// Least-squares slope of `(t, position)` pairs.
pub fn fit_line(points: &[(f64, f64)]) -> Result<FrontSpeed> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter("a speed fit needs at least two snapshots".into()));
    }
    let n = points.len() as f64;
    let tm = points.iter().map(|p| p.0).sum::<f64>() / n;
    let xm = points.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let stx: f64 = points.iter().map(|p| (p.0 - tm) * (p.1 - xm)).sum();
    let speed = stx / stt;
    let intercept = xm - speed * tm;
    let residual = (points
        .iter()
        .map(|p| (p.1 - intercept - speed * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(FrontSpeed {
        speed,
        intercept,
        residual,
        points: points.to_vec(),
    })
}

/// Speed of the `level` crossing along `xi` over snapshots in `window`.
pub fn front_speed(traj: &Trajectory, level: f64, xi: Point, window: (f64, f64)) -> Result<FrontSpeed> {
    let mut points = Vec::new();
    for snap in traj.snapshots() {
        let t = snap.time();
        if t >= window.0 - 1e-9 && t <= window.1 + 1e-9 {
            points.push((t, level_set_position(snap, level, xi)?));
        }
    }
    fit_line(&points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpLemmaReport {
    /// `(r, int_{-r}^{r} (b * v - v))`.
    pub rows: Vec<(f64, f64)>,
    /// `(v(-inf) - v(inf)) int s b(s) ds`.
    pub rhs: f64,
    pub final_error: f64,
}

/// Truncated integrals `int_{-r}^{r} (b * v - v)(s) ds` against their
/// limit. `v` is continued by constants beyond its lattice; the integral
/// uses the cell centers of `b`'s grid.
pub fn check_avg_jump_lemma(b: &Kernel, v: &Profile, r_sequence: &[f64]) -> Result<JumpLemmaReport> {
    let grid = b.grid();
    if grid.dims() != 1 {
        return Err(Error::GridMismatch("the jump lemma check needs a 1D kernel".into()));
    }
    let h = grid.spacing(0);
    let vals = v.values();
    let rhs = (vals[0] - vals[vals.len() - 1]) * b.moment_along([1.0, 0.0]);
    let support: Vec<(f64, f64)> = b
        .support()
        .iter()
        .map(|&(idx, w)| (grid.offset_cells(0, idx) as f64 * h, w))
        .collect();
    let integrand = |s: f64| -> f64 {
        let bv: f64 = support.iter().map(|&(y, w)| w * v.eval(s - y)).sum();
        bv - v.eval(s)
    };
    let mut rows = Vec::with_capacity(r_sequence.len());
    for &r in r_sequence {
        // cells of the kernel lattice centered at 0, fully inside [-r, r]
        let k = (r / h).floor() as isize;
        let sum: f64 = (-k..k).map(|i| integrand((i as f64 + 0.5) * h)).sum();
        rows.push((r, sum * h));
    }
    let final_error = rows.last().map(|r| (r.1 - rhs).abs()).unwrap_or(f64::NAN);
    Ok(JumpLemmaReport { rows, rhs, final_error })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceReport {
    /// First `n` whose partial sum reaches the target, if within the cap.
    pub n: Option<usize>,
    pub iterations: usize,
    pub partial_sum: f64,
    pub r_last: f64,
    /// `r_{n+1} > r_n` at every step taken.
    pub increasing: bool,
}

/// `r_{n+1} = r_n + p e^{-q r_n}` with partial sums of `1/(r_n e^{q r_n})`,
/// stopping at `target` or after `cap` terms.
pub fn iterate_recurrence(r1: f64, p: f64, q: f64, target: f64, cap: usize) -> Result<RecurrenceReport> {
    if !(r1 > 0.0 && p > 0.0 && q > 0.0) {
        return Err(Error::InvalidParameter(format!("r1 = {r1}, p = {p}, q = {q} must be positive")));
    }
    let mut r = r1;
    let mut sum = 0.0;
    let mut increasing = true;
    for n in 1..=cap {
        let decay = (-q * r).exp();
        sum += decay / r;
        if sum >= target {
            return Ok(RecurrenceReport {
                n: Some(n),
                iterations: n,
                partial_sum: sum,
                r_last: r,
                increasing,
            });
        }
        if n == cap {
            break;
        }
        let next = r + p * decay;
        increasing &= next > r;
        r = next;
    }
    Ok(RecurrenceReport {
        n: None,
        iterations: cap,
        partial_sum: sum,
        r_last: r,
        increasing,
    })
}

/// Number of terms needed for the partial sums to reach `target`.
pub fn check_recurrence_divergence(r1: f64, p: f64, q: f64, target: f64, cap: usize) -> Result<usize> {
    iterate_recurrence(r1, p, q, target, cap)?
        .n
        .ok_or(Error::IterationCap { cap })
}

/// Dormand-Prince 5(4) for a scalar autonomous ODE, landing exactly on
/// `t_end` with local error control `|err| <= atol + rtol |y|`.
fn dormand_prince(f: impl Fn(f64) -> f64, y0: f64, t_end: f64, rtol: f64, atol: f64) -> Result<f64> {
    const C: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    // fifth-order weights minus the embedded fourth-order ones
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let (mut t, mut y) = (0.0, y0);
    let mut h = (t_end / 100.0).max(1e-12);
    let mut k = [0.0; 7];
    k[0] = f(y);
    for _ in 0..1_000_000 {
        if t >= t_end {
            return Ok(y);
        }
        h = h.min(t_end - t);
        for s in 0..6 {
            let inc: f64 = (0..=s).map(|j| C[s][j] * k[j]).sum();
            k[s + 1] = f(y + h * inc);
        }
        // the last stage is evaluated at the fifth-order solution (FSAL)
        let y_new = y + h * (0..6).map(|j| C[5][j] * k[j]).sum::<f64>();
        let err = h * (0..7).map(|j| E[j] * k[j]).sum::<f64>();
        let scale = atol + rtol * y.abs().max(y_new.abs());
        let ratio = (err / scale).abs();
        if ratio <= 1.0 {
            t = if t_end - t - h <= 1e-15 * t_end { t_end } else { t + h };
            y = y_new;
            k[0] = k[6];
        }
        h *= (0.9 * ratio.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    Err(Error::IterationCap { cap: 1_000_000 })
}

/// Solution at time `t` of `u' = u (beta - G(u))` from the constant `r`.
///
/// Logistic competition uses the closed form
/// `theta r e^{beta t} / (theta - r + r e^{beta t})`; other variants are
/// integrated with Dormand-Prince 5(4) at relative tolerance 1e-12.
pub fn constant_data_oracle(model: &Model, r: f64, t: f64) -> Result<f64> {
    if !(r >= 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("r = {r} and t = {t} must be nonnegative")));
    }
    if r == 0.0 || t == 0.0 {
        return Ok(r);
    }
    if let Competition::Logistic { .. } = model.competition() {
        let theta = model.theta();
        let e = (model.beta() * t).exp();
        return Ok(theta * r * e / (theta - r + r * e));
    }
    let beta = model.beta();
    dormand_prince(|u| u.max(0.0) * (beta - model.g_const(u.max(0.0))), r, t, 1e-12, 1e-14)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernels::{build_kernel, KernelSpec};

    #[test]
    fn level_set_of_a_step() {
        let g = Grid::line(20.0, 200).unwrap();
        let f = Field::from_fn(g, |x| if x[0] < 3.0 { 1.0 } else { 0.0 });
        let s = level_set_position(&f, 0.5, [1.0, 0.0]).unwrap();
        assert!((s - 3.0).abs() <= 0.1);
        let c = Field::constant(g, 0.3);
        assert!(matches!(level_set_position(&c, 0.5, [1.0, 0.0]), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn fit_recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 2.0 + k as f64)).collect();
        let f = fit_line(&pts).unwrap();
        assert!((f.speed - 1.0).abs() < 1e-12 && f.residual < 1e-12);
        let flat: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 4.0)).collect();
        assert_eq!(fit_line(&flat).unwrap().speed, 0.0);
    }

    #[test]
    fn recurrence_first_step_and_q_monotonicity() {
        let r = iterate_recurrence(1.0, 1.0, 1.0, f64::INFINITY, 1).unwrap();
        assert!((r.r_last - 1.0).abs() < 1e-15);
        let two = iterate_recurrence(1.0, 1.0, 1.0, f64::INFINITY, 2).unwrap();
        assert!((two.r_last - (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        let a = check_recurrence_divergence(1.0, 1.0, 1.0, 1.5, 1_000_000).unwrap();
        let b = check_recurrence_divergence(1.0, 1.0, 1.2, 1.5, 1_000_000).unwrap();
        assert!(b > a);
        assert_eq!(
            check_recurrence_divergence(1.0, 1.0, 1.0, 1e3, 100),
            Err(Error::IterationCap { cap: 100 })
        );
    }

    #[test]
    fn oracle_trivial_and_logistic() {
        let g = Grid::line(100.0, 1000).unwrap();
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
        let m = Model::logistic(2.0, 1.0, 1.0, k).unwrap();
        assert_eq!(constant_data_oracle(&m, 0.0, 3.0).unwrap(), 0.0);
        assert!((constant_data_oracle(&m, 1.0, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((constant_data_oracle(&m, 0.5, 3f64.ln()).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn dopri_matches_local_logistic() {
        let model = Model::new(2.0, 1.0, Competition::local_kpp(1.0, 1.0)).unwrap();
        let u = constant_data_oracle(&model, 0.5, 3f64.ln()).unwrap();
        assert!((u - 0.75).abs() < 1e-10, "{u}");
    }

    #[test]
    fn constant_profile_has_zero_integrand() {
        let g = Grid::line(100.0, 1000).unwrap();
        let b = build_kernel(&KernelSpec::gaussian(1.0, 1.0), g).unwrap();
        let v = Profile::from_fn(20.0, 400, |_| 0.7).unwrap();
        let rep = check_avg_jump_lemma(&b, &v, &[5.0, 10.0]).unwrap();
        assert!(rep.rows.iter().all(|r| r.1.abs() < 1e-12));
        assert_eq!(rep.rhs, 0.0);
    }
}
