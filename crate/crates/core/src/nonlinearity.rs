//! The competition operator `G`, the reaction `F u = u (beta - G u)`, the
//! carrying capacity `theta`, and numeric checks of the standing assumptions.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{norm, Field, Grid};
use crate::kernels::{ConvolutionPath, Kernel};

/// A labelled scalar function `R -> R`.
#[derive(Clone)]
pub struct ScalarFn {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}

/// Which nonlinearity `G` the model uses.
#[derive(Clone, Debug)]
pub enum Competition {
    /// Local reaction `F u = f(u)`, i.e. `G u = beta - f(u)/u`.
    Local { f: ScalarFn },
    /// `G u = kappa_minus (a_minus * u)`.
    Logistic { kappa_minus: f64, kernel: Kernel },
    /// `G u = kappa_minus s - g1(s)` with `s = a_minus * u`.
    General {
        kappa_minus: f64,
        kernel: Kernel,
        g1: ScalarFn,
    },
}

impl Competition {
    /// `f(u) = beta u (1 - u/theta)`.
    pub fn local_kpp(beta: f64, theta: f64) -> Self {
        Competition::Local {
            f: ScalarFn::new(format!("{beta}*u*(1-u/{theta})"), move |u| beta * u * (1.0 - u / theta)),
        }
    }

    pub fn logistic(kappa_minus: f64, kernel: Kernel) -> Self {
        Competition::Logistic { kappa_minus, kernel }
    }

    /// `G v = g(a_minus * v)` with `g(s) = beta (1 - (1 - s/theta)^n)`;
    /// `kappa_minus = g'(0) = n beta / theta`.
    pub fn general_power(beta: f64, theta: f64, n: i32, kernel: Kernel) -> Self {
        let kappa_minus = n as f64 * beta / theta;
        let g1 = ScalarFn::new(format!("{kappa_minus}*s-{beta}*(1-(1-s/{theta})^{n})"), move |s| {
            let g = beta * (1.0 - (1.0 - s / theta).max(0.0).powi(n));
            kappa_minus * s - g
        });
        Competition::General {
            kappa_minus,
            kernel,
            g1,
        }
    }

    pub fn kernel(&self) -> Option<&Kernel> {
        match self {
            Competition::Local { .. } => None,
            Competition::Logistic { kernel, .. } | Competition::General { kernel, .. } => Some(kernel),
        }
    }

    pub fn kappa_minus(&self) -> Option<f64> {
        match self {
            Competition::Local { .. } => None,
            Competition::Logistic { kappa_minus, .. } | Competition::General { kappa_minus, .. } => Some(*kappa_minus),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Competition::Local { .. } => "local",
            Competition::Logistic { .. } => "logistic",
            Competition::General { .. } => "general",
        }
    }
}

/// Model parameters: `du/dt = kappa (a*u) - m u - u G u`.
#[derive(Clone, Debug)]
pub struct Model {
    kappa: f64,
    m: f64,
    competition: Competition,
    dispersal_mass: f64,
    declared_theta: Option<f64>,
    theta: f64,
}

impl Model {
    pub fn new(kappa: f64, m: f64, competition: Competition) -> Result<Self> {
        Self::build(kappa, m, competition, 1.0, None)
    }

    /// Like [`Model::new`], but adopts `theta` after confirming that it is
    /// a root of `G(const r) = beta`. Use this for nonlinearities whose root
    /// is degenerate and cannot be located to full precision by bisection.
    pub fn with_declared_theta(kappa: f64, m: f64, competition: Competition, theta: f64) -> Result<Self> {
        Self::build(kappa, m, competition, 1.0, Some(theta))
    }

    pub fn logistic(kappa: f64, m: f64, kappa_minus: f64, kernel: Kernel) -> Result<Self> {
        Self::new(kappa, m, Competition::logistic(kappa_minus, kernel))
    }

    /// The same model with a sub-stochastic dispersal kernel of total mass
    /// `mass`; constants then equilibrate where `G(r) = kappa mass - m`.
    pub fn with_dispersal_mass(&self, mass: f64) -> Result<Self> {
        Self::build(self.kappa, self.m, self.competition.clone(), mass, self.declared_theta)
    }

    /// The model with a different competition operator and otherwise the
    /// same parameters.
    pub fn with_competition(&self, competition: Competition) -> Result<Self> {
        Self::build(self.kappa, self.m, competition, self.dispersal_mass, None)
    }

    fn build(kappa: f64, m: f64, competition: Competition, mass: f64, declared: Option<f64>) -> Result<Self> {
        if !(kappa > 0.0) || !(m >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need kappa > 0 and m >= 0, got kappa={kappa}, m={m}"
            )));
        }
        if !(mass > 0.0 && mass <= 1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("dispersal mass must lie in (0, 1], got {mass}")));
        }
        if let Some(km) = competition.kappa_minus() {
            if !(km > 0.0) {
                return Err(Error::InvalidParameter(format!("kappa_minus must be positive, got {km}")));
            }
        }
        if kappa * mass - m <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta = kappa - m must be positive, got {}",
                kappa * mass - m
            )));
        }
        let mut model = Model {
            kappa,
            m,
            competition,
            dispersal_mass: mass,
            declared_theta: declared,
            theta: f64::NAN,
        };
        model.theta = theta_of(&model)?;
        Ok(model)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `kappa - m`, using the dispersal kernel's mass when it is not one.
    pub fn beta(&self) -> f64 {
        self.kappa * self.dispersal_mass - self.m
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dispersal_mass(&self) -> f64 {
        self.dispersal_mass
    }

    pub fn competition(&self) -> &Competition {
        &self.competition
    }

    /// Exact Lipschitz constant of `G` on `E_theta^+` when it is known in
    /// closed form (logistic: `kappa_minus * |a_minus|`).
    pub fn exact_lipschitz(&self) -> Option<f64> {
        match &self.competition {
            Competition::Logistic { kappa_minus, kernel } => Some(kappa_minus * kernel.mass()),
            _ => None,
        }
    }

    /// `G` on the constant field `r`.
    pub fn g_const(&self, r: f64) -> f64 {
        match &self.competition {
            Competition::Local { f } => local_g(self.beta(), f, r),
            Competition::Logistic { kappa_minus, kernel } => kappa_minus * kernel.mass() * r,
            Competition::General { kappa_minus, kernel, g1 } => {
                let s = kernel.mass() * r;
                kappa_minus * s - g1.eval(s)
            }
        }
    }

    /// Writes `a_minus * u` into `s` (left untouched for the local variant).
    pub(crate) fn competition_input(&self, u: &[f64], s: &mut [f64]) {
        if let Some(k) = self.competition.kernel() {
            k.convolve_slice(u, s, ConvolutionPath::Auto);
        }
    }

    /// `G` at one cell given `u` and `s = (a_minus * u)` there.
    #[inline]
    pub(crate) fn g_cell(&self, u: f64, s: f64) -> f64 {
        match &self.competition {
            Competition::Local { f } => local_g(self.beta(), f, u),
            Competition::Logistic { kappa_minus, .. } => kappa_minus * s,
            Competition::General { kappa_minus, g1, .. } => kappa_minus * s - g1.eval(s),
        }
    }

    /// `u G u` at one cell; the local variant evaluates `beta u - f(u)`.
    #[inline]
    pub(crate) fn ugu_cell(&self, u: f64, s: f64) -> f64 {
        match &self.competition {
            Competition::Local { f } => self.beta() * u - f.eval(u),
            _ => u * self.g_cell(u, s),
        }
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        match self.competition.kernel() {
            Some(k) if !k.grid().same_lattice(grid) => Err(Error::GridMismatch(format!(
                "competition kernel lives on {:?}, field on {grid:?}",
                k.grid()
            ))),
            _ => Ok(()),
        }
    }

    fn map_cells(&self, u: &Field, op: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_grid(u.grid())?;
        let mut s = vec![0.0; u.grid().len()];
        self.competition_input(u.values(), &mut s);
        let vals = u.values().iter().zip(&s).map(|(&x, &y)| op(x, y)).collect();
        Ok(Field::from_values(*u.grid(), vals)?.with_time(u.time()))
    }
}

fn local_g(beta: f64, f: &ScalarFn, u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        beta - f.eval(u) / u
    }
}

/// `G u`.
pub fn apply_g(model: &Model, u: &Field) -> Result<Field> {
    model.map_cells(u, |x, s| model.g_cell(x, s))
}

/// `u G u`, evaluated without the `0/0` of the local variant.
pub fn u_g_u(model: &Model, u: &Field) -> Result<Field> {
    model.map_cells(u, |x, s| model.ugu_cell(x, s))
}

/// `F u = u (beta - G u)`; for the local variant this is `f(u)`.
pub fn reaction(model: &Model, u: &Field) -> Result<Field> {
    let beta = model.beta();
    model.map_cells(u, |x, s| match model.competition() {
        Competition::Local { f } => f.eval(x),
        _ => beta * x - model.ugu_cell(x, s),
    })
}

/// Tolerance of the bisection for `G(const r) = beta`.
pub const THETA_TOLERANCE: f64 = 1e-12;

const THETA_SEARCH_MAX: f64 = 1e8;

/// Positive constant equilibrium: `G(theta) = beta`.
///
/// Logistic models use the closed form `(kappa - m)/kappa_minus`; the other
/// variants bisect on `(0, r_max]`, where `r_max` is found by doubling.
pub fn theta_of(model: &Model) -> Result<f64> {
    let beta = model.beta();
    if let Competition::Logistic { kappa_minus, kernel } = model.competition() {
        return Ok(beta / (kappa_minus * kernel.mass()));
    }
    let h = |r: f64| model.g_const(r) - beta;
    let mut hi = 1e-3;
    while !(h(hi) >= 0.0) {
        hi *= 2.0;
        if hi > THETA_SEARCH_MAX {
            return Err(Error::NoRoot { r_max: THETA_SEARCH_MAX });
        }
    }
    let mut lo = 0.0;
    while hi - lo > THETA_TOLERANCE * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if h(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    match model.declared_theta {
        None => Ok(root),
        Some(t) => {
            let defect = h(t).abs();
            if defect <= 1e-10 && (t - root).abs() <= 1e-6 * t.max(1.0) {
                Ok(t)
            } else {
                Err(Error::InvalidParameter(format!(
                    "declared theta {t} is not a root of G(r) = beta (defect {defect:e}, bisection root {root})"
                )))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::NotApplicable => "not_applicable",
        })
    }
}

/// One line of an [`AssumptionReport`].
#[derive(Clone, Debug)]
pub struct AssumptionCheck {
    pub key: String,
    pub verdict: Verdict,
    /// Cell index of the worst case, when the check is cell-wise.
    pub cell: Option<usize>,
    pub values: Vec<(String, f64)>,
    pub note: String,
}

impl AssumptionCheck {
    fn new(key: &str, verdict: Verdict) -> Self {
        AssumptionCheck {
            key: key.to_string(),
            verdict,
            cell: None,
            values: Vec::new(),
            note: String::new(),
        }
    }

    fn value(mut self, name: &str, v: f64) -> Self {
        self.values.push((name.to_string(), v));
        self
    }

    fn cell(mut self, idx: usize) -> Self {
        self.cell = Some(idx);
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for AssumptionCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}:", self.key, self.verdict)?;
        if let Some(c) = self.cell {
            write!(f, " cell={c}")?;
        }
        for (n, v) in &self.values {
            write!(f, " {n}={v:.6e}")?;
        }
        if !self.note.is_empty() {
            write!(f, " ({})", self.note)?;
        }
        Ok(())
    }
}

/// Verdicts for (A1)-(A10) with witnesses.
#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    /// Lipschitz constant of `G` on `E_theta^+` used downstream.
    pub lipschitz: f64,
}

impl AssumptionReport {
    pub fn get(&self, key: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.key == key)
    }

    pub fn verdict(&self, key: &str) -> Option<Verdict> {
        self.get(key).map(|c| c.verdict)
    }

    /// No check failed.
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fails)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&c.to_string());
            s.push('\n');
        }
        s
    }
}

/// Sampling controls for [`check_assumptions_with`].
#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub seed: u64,
    /// Random field pairs used by the Lipschitz and bound checks.
    pub samples: usize,
    /// Constants sampled on `(0, theta)` for (A8).
    pub constants: usize,
    pub tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            seed: 0x5eed,
            samples: 12,
            constants: 200,
            tol: 1e-10,
        }
    }
}

pub fn check_assumptions(model: &Model, kernel: &Kernel) -> AssumptionReport {
    check_assumptions_with(model, kernel, &CheckOptions::default())
}

/// Random fields in `E_theta^+`: white noise, constants, and smooth waves.
fn sample_field(rng: &mut ChaCha8Rng, grid: Grid, theta: f64, kind: usize) -> Field {
    match kind % 3 {
        0 => {
            let vals = (0..grid.len()).map(|_| theta * rng.random::<f64>()).collect();
            Field::from_values(grid, vals).expect("length matches")
        }
        1 => Field::constant(grid, theta * rng.random::<f64>()),
        _ => {
            let k = [
                rng.random_range(1..6) as f64 * std::f64::consts::TAU / grid.extent(0),
                rng.random_range(1..6) as f64 * std::f64::consts::TAU / grid.extent(1),
            ];
            let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            Field::from_fn(grid, |p| theta * 0.5 * (1.0 + (k[0] * p[0] + k[1] * p[1] + phase).sin()))
        }
    }
}

pub fn check_assumptions_with(model: &Model, kernel: &Kernel, opts: &CheckOptions) -> AssumptionReport {
    let beta = model.beta();
    let theta = model.theta();
    let tol = opts.tol;
    let grid = *kernel.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = Vec::new();

    // A1
    let v = if beta > 0.0 { Verdict::Holds } else { Verdict::Fails };
    checks.push(AssumptionCheck::new("A1", v).value("beta", beta));

    // A2 and A3 share the sampled fields.
    let g0 = model.g_const(0.0);
    let gt = model.g_const(theta);
    let mut lo_worst = (0.0f64, 0usize);
    let mut hi_worst = (0.0f64, 0usize);
    let mut lip = 0.0f64;
    let mut lip_pair = 0usize;
    let fields_ok = model.check_grid(&grid).is_ok();
    if fields_ok {
        for pair in 0..opts.samples {
            let v = sample_field(&mut rng, grid, theta, pair);
            let w = sample_field(&mut rng, grid, theta, pair + 1);
            let gv = apply_g(model, &v).expect("grid checked");
            let gw = apply_g(model, &w).expect("grid checked");
            for (i, &g) in gv.values().iter().enumerate() {
                if -g > lo_worst.0 {
                    lo_worst = (-g, i);
                }
                if g - beta > hi_worst.0 {
                    hi_worst = (g - beta, i);
                }
            }
            let dv = v.sup_distance(&w).expect("same grid");
            if dv > 1e-12 {
                let q = gv.sup_distance(&gw).expect("same grid") / dv;
                if q > lip {
                    lip = q;
                    lip_pair = pair;
                }
            }
        }
    }
    let a2_ok = g0.abs() <= tol && (gt - beta).abs() <= tol && lo_worst.0 <= tol && hi_worst.0 <= tol;
    let worst_cell = if lo_worst.0 >= hi_worst.0 { lo_worst.1 } else { hi_worst.1 };
    checks.push(
        AssumptionCheck::new("A2", if a2_ok { Verdict::Holds } else { Verdict::Fails })
            .cell(worst_cell)
            .value("G0", g0)
            .value("G_theta_minus_beta", gt - beta)
            .value("below_zero", lo_worst.0)
            .value("above_beta", hi_worst.0)
            .value("theta", theta),
    );

    let lipschitz = match model.exact_lipschitz() {
        Some(exact) => exact.max(lip),
        None => lip,
    };
    let mut a3 = AssumptionCheck::new(
        "A3",
        if lipschitz.is_finite() && fields_ok {
            Verdict::Holds
        } else {
            Verdict::Fails
        },
    )
    .value("l_theta", lipschitz)
    .value("sampled", lip)
    .value("pair", lip_pair as f64);
    if let Some(exact) = model.exact_lipschitz() {
        a3 = a3.value("exact", exact);
    }
    checks.push(a3);

    // A4
    let a4 = match model.competition() {
        Competition::Local { f } => {
            // slope of u -> pu - uGu = (p - beta)u + f(u) must be >= 0
            let n = opts.constants.max(10);
            let h = theta / n as f64;
            let mut min_slope = f64::INFINITY;
            let mut at = 0.0;
            for i in 0..n {
                let (x0, x1) = (i as f64 * h, (i + 1) as f64 * h);
                let s = (f.eval(x1) - f.eval(x0)) / h;
                if s < min_slope {
                    min_slope = s;
                    at = x0;
                }
            }
            let p = (beta - min_slope).max(0.0);
            let bound = model.kappa() + lipschitz * theta;
            AssumptionCheck::new("A4", if p <= bound + tol { Verdict::Holds } else { Verdict::Fails })
                .value("p", p)
                .value("bound_kappa_plus_l_theta", bound)
                .value("argmin_u", at)
                .note("one-sided slope bound for f")
        }
        Competition::Logistic { kernel: am, .. } | Competition::General { kernel: am, .. } => {
            if !am.grid().same_lattice(&grid) {
                AssumptionCheck::new("A4", Verdict::Fails).note("dispersal and competition kernels on different grids")
            } else {
                let (mut worst, mut cell) = (f64::INFINITY, 0);
                for i in 0..grid.len() {
                    let d = model.kappa() * kernel.weights()[i] - beta * am.weights()[i];
                    if d < worst {
                        worst = d;
                        cell = i;
                    }
                }
                let vol = grid.cell_volume();
                let ok = worst >= -tol * vol;
                let mut c = AssumptionCheck::new("A4", if ok { Verdict::Holds } else { Verdict::Fails })
                    .cell(cell)
                    .value("min_kappa_a_minus_beta_aminus", worst / vol)
                    .value("offset", grid.offset_point(cell)[0])
                    .value("p", model.kappa() + lipschitz * theta);
                if matches!(model.competition(), Competition::General { .. }) {
                    c = c.note("kernel comparison used as a sufficient proxy");
                }
                c
            }
        }
    };
    checks.push(a4);

    // A5
    let rho = kernel.nondeg_radius();
    checks.push(
        AssumptionCheck::new("A5", if rho > 0.0 { Verdict::Holds } else { Verdict::Fails })
            .value("rho", rho)
            .value("min_density", kernel.nondeg_level()),
    );

    checks.push(AssumptionCheck::new("A6", Verdict::Holds).note("holds by construction"));
    checks.push(AssumptionCheck::new("A7", Verdict::Holds).note("holds by construction"));

    // A8
    let n = opts.constants.max(2);
    let (mut worst, mut at) = (f64::NEG_INFINITY, 0.0);
    for i in 1..n {
        let r = theta * i as f64 / n as f64;
        let d = model.g_const(r) - beta;
        if d > worst {
            worst = d;
            at = r;
        }
    }
    checks.push(
        AssumptionCheck::new("A8", if worst < 0.0 { Verdict::Holds } else { Verdict::Fails })
            .value("max_G_minus_beta", worst)
            .value("at_r", at),
    );

    // A9
    let m1 = kernel.abs_first_moment();
    let drift = kernel.drift_density();
    checks.push(
        AssumptionCheck::new("A9", if m1.is_finite() { Verdict::Holds } else { Verdict::Fails })
            .value("abs_first_moment", m1)
            .value("drift_x", model.kappa() * drift[0])
            .value("drift_y", model.kappa() * drift[1]),
    );

    // A10: a - b >= delta on B_delta
    let (b, q): (Option<(&Kernel, f64)>, f64) = match model.competition() {
        Competition::Local { .. } => (None, beta),
        Competition::Logistic { kappa_minus, kernel: am } | Competition::General { kappa_minus, kernel: am, .. } => {
            (Some((am, kappa_minus * theta / model.kappa())), 0.0)
        }
    };
    let vol = grid.cell_volume();
    let diff = |i: usize| -> f64 {
        let a = kernel.weights()[i] / vol;
        match b {
            Some((am, scale)) if am.grid().same_lattice(&grid) => a - scale * am.weights()[i] / vol,
            Some(_) => f64::NEG_INFINITY,
            None => a,
        }
    };
    let (delta, level) = largest_ball_margin(&grid, diff);
    checks.push(
        AssumptionCheck::new("A10", if delta > 0.0 { Verdict::Holds } else { Verdict::Fails })
            .value("delta", delta)
            .value("min_a_minus_b", level)
            .value("q", q)
            .note(match b {
                Some(_) => "b = kappa_minus theta a_minus / kappa",
                None => "b = 0",
            }),
    );

    AssumptionReport { checks, lipschitz }
}

/// Largest `delta = j h` with `d(y) >= delta` for all offsets `|y| <= delta`.
fn largest_ball_margin(grid: &Grid, d: impl Fn(usize) -> f64) -> (f64, f64) {
    let h = grid.min_spacing();
    let mut offs: Vec<(f64, usize)> = (0..grid.len()).map(|i| (norm(grid.offset_point(i)), i)).collect();
    offs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let limit = (0..grid.dims()).map(|a| grid.half_extent(a)).fold(f64::INFINITY, f64::min);
    let (mut best, mut level) = (0.0, 0.0);
    let (mut pos, mut running) = (0, f64::INFINITY);
    let mut j = 1;
    loop {
        let r = j as f64 * h;
        if r >= limit {
            break;
        }
        while pos < offs.len() && offs[pos].0 <= r * (1.0 + 1e-12) {
            running = running.min(d(offs[pos].1));
            pos += 1;
        }
        if running >= r * (1.0 - 1e-12) {
            best = r;
            level = running;
            j += 1;
        } else {
            break;
        }
    }
    (best, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_kernel, KernelSpec};

    fn gauss(cells: usize) -> Kernel {
        build_kernel(&KernelSpec::gaussian(1.0, 0.0), Grid::line(100.0, cells).unwrap()).unwrap()
    }

    #[test]
    fn logistic_theta_and_g() {
        let k = gauss(512);
        let model = Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap();
        assert!((model.theta() - 1.0).abs() < 1e-12);
        let u = Field::constant(*k.grid(), 1.0);
        let g = apply_g(&model, &u).unwrap();
        assert!(g.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
        let z = apply_g(&model, &Field::zeros(*k.grid())).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn logistic_reaction_on_constants() {
        let k = gauss(512);
        let model = Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap();
        for r in [0.0, 0.3, 1.0] {
            let f = reaction(&model, &Field::constant(*k.grid(), r)).unwrap();
            let expect = r * (1.0 - r);
            assert!(f.values().iter().all(|v| (v - expect).abs() < 1e-12));
        }
    }

    #[test]
    fn local_variant() {
        let k = gauss(512);
        let model = Model::new(2.0, 1.0, Competition::local_kpp(1.0, 1.0)).unwrap();
        assert!((model.theta() - 1.0).abs() < 1e-12);
        let f = reaction(&model, &Field::constant(*k.grid(), 0.5)).unwrap();
        assert!((f.values()[0] - 0.25).abs() < 1e-15);
        let g = apply_g(&model, &Field::zeros(*k.grid())).unwrap();
        assert_eq!(g.values()[0], 0.0);
    }

    #[test]
    fn general_power_variant() {
        let k = gauss(512);
        let comp = Competition::general_power(1.0, 1.0, 2, k.clone());
        let model = Model::with_declared_theta(2.0, 1.0, comp.clone(), 1.0).unwrap();
        assert_eq!(model.theta(), 1.0);
        let g = apply_g(&model, &Field::constant(*k.grid(), 0.5)).unwrap();
        assert!((g.values()[7] - 0.75).abs() < 1e-12);
        // a wrong declaration is rejected
        assert!(Model::with_declared_theta(2.0, 1.0, comp.clone(), 0.8).is_err());
        // plain bisection lands on the double root up to the float floor
        let plain = Model::new(2.0, 1.0, comp).unwrap();
        assert!((plain.theta() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn beta_must_be_positive() {
        let k = gauss(64 * 8);
        assert!(Model::logistic(1.0, 1.0, 1.0, k.clone()).is_err());
        assert!(Model::logistic(1.0, 2.0, 1.0, k).is_err());
    }

    #[test]
    fn no_root() {
        let model = Model::new(2.0, 1.0, Competition::Local { f: ScalarFn::new("u", |u| u) });
        assert!(matches!(model, Err(Error::NoRoot { .. })));
    }

    #[test]
    fn report_for_logistic_equal_kernels() {
        let k = gauss(1024);
        let model = Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap();
        let rep = check_assumptions(&model, &k);
        assert!(rep.all_hold(), "{}", rep.to_text());
        assert!((rep.lipschitz - 1.0).abs() < 1e-9);
        assert!(rep.get("A10").unwrap().get("delta").unwrap() > 0.0);
        let text = rep.to_text();
        assert!(text.lines().any(|l| l.starts_with("A4: holds:")));
    }

    #[test]
    fn report_flags_kernel_comparison_failure() {
        let g = Grid::line(100.0, 1024).unwrap();
        let a = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
        let wide = build_kernel(&KernelSpec::gaussian(3.0, 0.0), g).unwrap();
        let model = Model::logistic(2.0, 1.0, 1.0, wide).unwrap();
        let rep = check_assumptions(&model, &a);
        let a4 = rep.get("A4").unwrap();
        assert_eq!(a4.verdict, Verdict::Fails);
        let y = g.offset_point(a4.cell.unwrap())[0];
        assert!(y.abs() > 2.0, "witness at {y}");
    }

    #[test]
    fn report_for_local_kpp() {
        let k = gauss(512);
        let model = Model::new(2.0, 1.0, Competition::local_kpp(1.0, 1.0)).unwrap();
        let rep = check_assumptions(&model, &k);
        assert!(rep.all_hold(), "{}", rep.to_text());
        let a4 = rep.get("A4").unwrap();
        assert!(a4.get("p").unwrap() <= a4.get("bound_kappa_plus_l_theta").unwrap());
    }
}
