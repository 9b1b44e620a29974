//! Binding of a parsed config to the library operations.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use nlspread::diagnostics::iterate_recurrence;
use nlspread::evolution::{check_comparison, check_positivity, check_tube};
use nlspread::nonlinearity::Verdict;
use nlspread::spreading::{directions, SpreadingResult};
use nlspread::subsolution::{check_domination, SearchOptions};
use nlspread::{
    build_kernel, check_assumptions, check_avg_jump_lemma, estimate_cstar, evolve, front_speed, hair_trigger_metric,
    truncate_kernel, verify_nonlinear_subsolution, Competition, EvolveOptions, Field, Grid, Kernel, KernelSpec, Model,
    Point, Profile, SpreadingOptions, SubsolutionParams, Trajectory, Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{CompetitionKind, ConfigError, ExperimentConfig, InitialConfig, KernelConfig, Scenario};
use crate::output::{Outcome, Plot, Table};

/// Everything a scenario needs, built from the config.
pub struct Setup {
    pub grid: Grid,
    pub specs: BTreeMap<String, KernelSpec>,
    pub kernels: BTreeMap<String, Kernel>,
    pub model: Model,
    pub evolve: EvolveOptions,
}

impl Setup {
    fn dispersal<'a>(&'a self, cfg: &ExperimentConfig) -> &'a Kernel {
        &self.kernels[&cfg.model.dispersal]
    }
}

fn cfg_err(context: &str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{context}: {e}"))
}

fn kernel_spec(k: &KernelConfig) -> KernelSpec {
    match k {
        KernelConfig::Gaussian { sigma, mean } => KernelSpec::Gaussian {
            sigma: sigma.clone(),
            mean: if mean.is_empty() { vec![0.0] } else { mean.clone() },
        },
        KernelConfig::UniformBall { radius } => KernelSpec::UniformBall { radius: *radius },
        KernelConfig::Cauchy { scale } => KernelSpec::Cauchy { scale: *scale },
    }
}

fn build_grid(extent: &[f64], cells: &[usize]) -> Result<Grid, ConfigError> {
    Grid::new(extent, cells).map_err(|e| cfg_err("grid", e))
}

fn build_model(cfg: &ExperimentConfig, kernels: &BTreeMap<String, Kernel>) -> Result<Model, ConfigError> {
    let mc = &cfg.model;
    let comp_kernel = kernels[mc.competition_kernel.as_deref().unwrap_or(&mc.dispersal)].clone();
    let dispersal_mass = kernels[&mc.dispersal].mass();
    let beta = mc.kappa * dispersal_mass - mc.m;
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| ConfigError(format!("model.{name} is required for this competition")));
    let model = match mc.competition {
        CompetitionKind::Logistic => Model::logistic(mc.kappa, mc.m, need(mc.kappa_minus, "kappa_minus")?, comp_kernel),
        CompetitionKind::LocalKpp => Model::new(mc.kappa, mc.m, Competition::local_kpp(beta, need(mc.theta, "theta")?)),
        CompetitionKind::Power => {
            let theta = need(mc.theta, "theta")?;
            let n = mc.n.ok_or_else(|| ConfigError("model.n is required for power competition".into()))?;
            Model::with_declared_theta(mc.kappa, mc.m, Competition::general_power(beta, theta, n, comp_kernel), theta)
        }
    };
    model.map_err(|e| cfg_err("model", e))
}

pub fn resolve(cfg: &ExperimentConfig) -> Result<Setup, ConfigError> {
    let grid = build_grid(&cfg.grid.extent, &cfg.grid.cells)?;
    let mut specs = BTreeMap::new();
    let mut kernels = BTreeMap::new();
    for (name, k) in &cfg.kernels {
        let spec = kernel_spec(k);
        let kernel = build_kernel(&spec, grid).map_err(|e| cfg_err(&format!("kernels.{name}"), e))?;
        specs.insert(name.clone(), spec);
        kernels.insert(name.clone(), kernel);
    }
    let model = build_model(cfg, &kernels)?;
    let e = &cfg.evolve;
    let evolve = EvolveOptions {
        picard_tol: e.picard_tol,
        dt_max: e.dt_max,
        alpha: e.alpha,
        snapshot_interval: Some(e.snapshot_interval),
        ..EvolveOptions::default()
    };
    Ok(Setup {
        grid,
        specs,
        kernels,
        model,
        evolve,
    })
}

fn point(v: &[f64]) -> Point {
    [v.first().copied().unwrap_or(0.0), v.get(1).copied().unwrap_or(0.0)]
}

pub fn initial_field(init: &InitialConfig, grid: Grid, seed: u64) -> Field {
    match init {
        InitialConfig::Constant { value } => Field::constant(grid, *value),
        InitialConfig::Bump {
            amplitude,
            half_width,
            center,
        } => {
            let c = point(center);
            let dims = grid.dims();
            Field::from_fn(grid, |x| {
                let inside = (0..dims).all(|a| (x[a] - c[a]).abs() <= *half_width);
                if inside {
                    *amplitude
                } else {
                    0.0
                }
            })
        }
        InitialConfig::Gaussian { amplitude, width, center } => {
            let c = point(center);
            Field::from_fn(grid, |x| {
                let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                amplitude * (-r2 / (width * width)).exp()
            })
        }
        InitialConfig::Step {
            level,
            position,
            direction,
            width,
        } => {
            let d = point(direction);
            let len = d[0].hypot(d[1]).max(f64::MIN_POSITIVE);
            Field::from_fn(grid, |x| {
                let s = (x[0] * d[0] + x[1] * d[1]) / len - position;
                if *width > 0.0 {
                    0.5 * level * (1.0 - (s / width).tanh())
                } else if s < 0.0 {
                    *level
                } else {
                    0.0
                }
            })
        }
        InitialConfig::Random { max } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..grid.len()).map(|_| max * rng.random::<f64>()).collect();
            Field::from_values(grid, values).expect("one value per cell")
        }
    }
}

fn require_initial(cfg: &ExperimentConfig, setup: &Setup) -> Result<Field> {
    let init = cfg.initial.as_ref().context("missing [initial]")?;
    Ok(initial_field(init, setup.grid, cfg.seed))
}

pub fn run(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outcome) -> Result<()> {
    match cfg.scenario {
        Scenario::Simulate => simulate(cfg, setup, out),
        Scenario::Compare => compare(cfg, setup, out),
        Scenario::Speeds => speeds(cfg, setup, out),
        Scenario::HairTrigger => hair_trigger(cfg, setup, out),
        Scenario::Subsolution => subsolution(cfg, setup, out),
        Scenario::Lemmas => lemmas(cfg, setup, out),
        Scenario::VerifyAssumptions => verify_assumptions(cfg, setup, out),
    }
}

fn summary_table(name: &str, traj: &Trajectory) -> Table {
    let mut t = Table::new(name, &["t", "min", "max", "mass"]);
    for s in traj.snapshots() {
        t.push_numbers(&[s.time(), s.min(), s.max(), s.mass()]);
    }
    t
}

fn simulate(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outcome) -> Result<()> {
    let p = cfg.simulate.clone().unwrap_or_default();
    let u0 = require_initial(cfg, setup)?;
    let kernel = setup.dispersal(cfg);
    let traj = evolve(&u0, cfg.evolve.horizon, &setup.model, kernel, &setup.evolve)?;
    let theta = setup.model.theta();

    let tube = check_tube(&traj, theta, p.tube_tol);
    out.check(
        "tube",
        tube.holds,
        format!("worst excursion {:e} at t = {}", tube.worst.amount, tube.worst.time),
    );
    if let Some(w) = p.positivity_window {
        let rep = check_positivity(&traj, p.positivity_after, &Window::centered(w));
        out.check(
            "positivity",
            rep.verdict != Verdict::Fails,
            format!("{} with min {:e} at t = {}", rep.verdict, rep.min_value, rep.time),
        );
    }

    let g = setup.grid;
    let stride = p.csv_stride.max(1);
    let header: &[&str] = if g.dims() == 1 { &["t", "x", "u"] } else { &["t", "x", "y", "u"] };
    let mut snaps = Table::new("snapshots", header);
    for s in traj.snapshots() {
        for i in (0..g.len()).step_by(stride) {
            let x = g.cell_center(i);
            if g.dims() == 1 {
                snaps.push_numbers(&[s.time(), x[0], s.values()[i]]);
            } else {
                snaps.push_numbers(&[s.time(), x[0], x[1], s.values()[i]]);
            }
        }
    }
    out.tables.push(snaps);
    let summary = summary_table("summary", &traj);
    let series = |col: usize| -> Vec<(f64, f64)> {
        summary
            .rows
            .iter()
            .map(|r| (r[0].parse().unwrap_or(f64::NAN), r[col].parse().unwrap_or(f64::NAN)))
            .collect()
    };
    out.plots.push(Plot {
        name: "summary".into(),
        title: "solution range".into(),
        x_label: "t".into(),
        y_label: "u".into(),
        series: vec![("max".into(), series(2)), ("min".into(), series(1))],
        levels: vec![("theta".into(), theta)],
    });
    out.tables.push(summary);
    out.notes.push(format!("theta = {theta}\nbeta = {}", setup.model.beta()));
    Ok(())
}

/// The model with dispersal and competition kernels restricted to the ball
/// of `radius`, together with the truncated dispersal kernel.
pub fn truncated_model(model: &Model, kernel: &Kernel, radius: f64) -> Result<(Model, Kernel)> {
    let (an, _) = truncate_kernel(kernel, radius)?;
    let comp = match model.competition() {
        Competition::Local { .. } => model.competition().clone(),
        Competition::Logistic { kappa_minus, kernel: am } => Competition::Logistic {
            kappa_minus: *kappa_minus,
            kernel: if am.same_as(kernel) { an.clone() } else { truncate_kernel(am, radius)?.0 },
        },
        Competition::General { kappa_minus, kernel: am, g1 } => Competition::General {
            kappa_minus: *kappa_minus,
            kernel: if am.same_as(kernel) { an.clone() } else { truncate_kernel(am, radius)?.0 },
            g1: g1.clone(),
        },
    };
    let mn = Model::new(model.kappa(), model.m(), comp)?.with_dispersal_mass(an.mass())?;
    Ok((mn, an))
}

fn compare(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outcome) -> Result<()> {
    let p = cfg.compare.clone().unwrap_or_default();
    let u0 = require_initial(cfg, setup)?;
    let kernel = setup.dispersal(cfg);
    let theta = setup.model.theta();
    let horizon = cfg.evolve.horizon;
    let mut did_something = false;

    if let Some(upper) = &p.upper {
        did_something = true;
        let hi0 = initial_field(upper, setup.grid, cfg.seed.wrapping_add(1));
        let lo = evolve(&u0, horizon, &setup.model, kernel, &setup.evolve)?;
        let hi = evolve(&hi0, horizon, &setup.model, kernel, &setup.evolve)?;
        let rep = check_comparison(&lo, &hi, p.tol)?;
        out.check(
            "order",
            rep.holds,
            format!("worst margin {:e}", rep.worst_margin),
        );
        for (name, t) in [("tube_lower", &lo), ("tube_upper", &hi)] {
            let r = check_tube(t, theta, p.tol);
            out.check(name, r.holds, format!("worst excursion {:e}", r.worst.amount));
        }
    }

    if p.random_pairs > 0 {
        did_something = true;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut table = Table::new("pairs", &["pair", "worst_margin", "tube_lower", "tube_upper"]);
        let (mut all_ordered, mut all_tube) = (true, true);
        for k in 0..p.random_pairs {
            let lo: Vec<f64> = (0..setup.grid.len()).map(|_| theta * rng.random::<f64>()).collect();
            let hi: Vec<f64> = lo.iter().map(|v| v + (theta - v) * rng.random::<f64>()).collect();
            let a = evolve(&Field::from_values(setup.grid, lo)?, horizon, &setup.model, kernel, &setup.evolve)?;
            let b = evolve(&Field::from_values(setup.grid, hi)?, horizon, &setup.model, kernel, &setup.evolve)?;
            let rep = check_comparison(&a, &b, p.tol)?;
            let (ta, tb) = (check_tube(&a, theta, p.tol), check_tube(&b, theta, p.tol));
            all_ordered &= rep.holds;
            all_tube &= ta.holds && tb.holds;
            table.push_numbers(&[k as f64, rep.worst_margin, ta.worst.amount, tb.worst.amount]);
        }
        out.check("random_pairs_order", all_ordered, format!("{} pairs", p.random_pairs));
        out.check("random_pairs_tube", all_tube, format!("{} pairs", p.random_pairs));
        out.tables.push(table);
    }

    if let Some(radius) = p.truncate_radius {
        did_something = true;
        let (mn, an) = truncated_model(&setup.model, kernel, radius)?;
        let lower = evolve(&u0, horizon, &mn, &an, &setup.evolve)?;
        let full = evolve(&u0, horizon, &setup.model, kernel, &setup.evolve)?;
        let rep = check_comparison(&lower, &full, p.tol)?;
        out.check(
            "truncated_below_full",
            rep.holds,
            format!("worst margin {:e} at t = {}", rep.worst_margin, rep.worst.time),
        );
        let d = an.drift_density();
        let drift = [mn.kappa() * d[0], mn.kappa() * d[1]];
        let metric = hair_trigger_metric(&lower, p.metric_half_width, drift)?;
        let theta_n = mn.theta();
        if let Some(eps) = p.metric_eps {
            let hit = metric.first_reaching(theta_n - eps);
            out.check(
                "truncated_hair_trigger",
                hit.is_some(),
                match hit {
                    Some(t) => format!("reached theta_n - {eps} at t = {t}"),
                    None => format!("final metric {:?} below theta_n - {eps}", metric.last()),
                },
            );
        }
        let mut table = Table::new("truncated", &["t", "metric_truncated", "min_gap"]);
        for (k, &(t, m)) in metric.points.iter().enumerate() {
            let gap = full.snapshots()[k]
                .values()
                .iter()
                .zip(lower.snapshots()[k].values())
                .map(|(f, l)| f - l)
                .fold(f64::INFINITY, f64::min);
            table.push_numbers(&[t, m, gap]);
        }
        out.plots.push(Plot {
            name: "truncated_metric".into(),
            title: "hair-trigger metric of the truncated model".into(),
            x_label: "t".into(),
            y_label: "min over K".into(),
            series: vec![("truncated".into(), metric.points.clone())],
            levels: vec![("theta_n".into(), theta_n)],
        });
        out.tables.push(table);
        out.notes.push(format!(
            "truncation radius {radius}: mass {}, theta_n {theta_n}, drift {drift:?}",
            an.mass()
        ));
    }

    if !did_something {
        bail!("compare needs `upper`, `random_pairs` or `truncate_radius`");
    }
    Ok(())
}

fn speeds(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outcome) -> Result<()> {
    let p = cfg.speeds.clone().unwrap_or_default();
    let kernel = setup.dispersal(cfg);
    let model = &setup.model;
    let opts = SpreadingOptions {
        half_width: p.half_width,
        coarsen: p.coarsen,
        n_max: p.n_max,
        tol_c: p.tol_c,
        evolve: EvolveOptions {
            snapshot_interval: None,
            ..setup.evolve.clone()
        },
        ..SpreadingOptions::default()
    };
    let dirs = directions(setup.grid.dims(), p.directions);
    let mut results: Vec<SpreadingResult> = Vec::new();
    let mut table = Table::new("speeds", &["xi_x", "xi_y", "c_star", "bracket_lo", "bracket_hi", "probes"]);
    for &xi in &dirs {
        let r = estimate_cstar(p.t, xi, model, kernel, (p.bracket[0], p.bracket[1]), &opts)
            .with_context(|| format!("speed along {xi:?}"))?;
        table.push_numbers(&[xi[0], xi[1], r.c_star, r.bracket.0, r.bracket.1, r.probes.len() as f64]);
        results.push(r);
    }
    out.tables.push(table);

    let d = kernel.drift_density();
    let drift = [model.kappa() * d[0], model.kappa() * d[1]];
    if p.drift_in_front {
        let mut margins = Table::new("drift_margins", &["xi_x", "xi_y", "c_star", "projection", "margin"]);
        let mut min_margin = f64::INFINITY;
        for r in &results {
            let proj = p.t * (drift[0] * r.xi[0] + drift[1] * r.xi[1]);
            let margin = r.c_star - proj;
            min_margin = min_margin.min(margin);
            margins.push_numbers(&[r.xi[0], r.xi[1], r.c_star, proj, margin]);
        }
        out.check(
            "drift_in_front",
            min_margin > p.tol_c,
            format!("t m = {:?}, smallest margin {min_margin:.4} (needs > {})", [p.t * drift[0], p.t * drift[1]], p.tol_c),
        );
        out.tables.push(margins);
    }

    if let Some(f) = &p.front {
        let u0 = require_initial(cfg, setup)?;
        let traj = evolve(&u0, f.t_end, model, kernel, &setup.evolve)?;
        let fit = front_speed(&traj, 0.5 * model.theta(), [1.0, 0.0], (f.t_start, f.t_end))?;
        let along = results
            .iter()
            .find(|r| (r.xi[0] - 1.0).abs() < 1e-12)
            .context("no speed estimate along +e1")?;
        let c_direct = fit.speed;
        // c*_t is a shift over time t
        let per_unit = along.c_star / p.t;
        let rel = (c_direct - per_unit).abs() / per_unit.abs().max(f64::MIN_POSITIVE);
        out.check(
            "front_speed",
            rel <= f.rel_tol,
            format!("direct {c_direct:.4} vs estimate {per_unit:.4} (relative gap {rel:.4})"),
        );
        let mut front = Table::new("front", &["t", "position"]);
        for &(t, x) in &fit.points {
            front.push_numbers(&[t, x]);
        }
        out.tables.push(front);
        out.plots.push(Plot {
            name: "front".into(),
            title: "front position along +e1".into(),
            x_label: "t".into(),
            y_label: "position".into(),
            series: vec![("theta/2 crossing".into(), fit.points.clone())],
            levels: vec![],
        });
    }

    out.plots.push(Plot {
        name: "speeds".into(),
        title: "estimated speed by direction".into(),
        x_label: "angle".into(),
        y_label: "c*".into(),
        series: vec![(
            "c*".into(),
            results.iter().map(|r| (r.xi[1].atan2(r.xi[0]), r.c_star)).collect(),
        )],
        levels: vec![],
    });
    out.notes.push(format!("drift m = {drift:?}"));
    Ok(())
}

fn hair_trigger(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outcome) -> Result<()> {
    let p = cfg.hair_trigger.clone().unwrap_or_default();
    let u0 = require_initial(cfg, setup)?;
    let kernel = setup.dispersal(cfg);
    let d = kernel.drift_density();
    let computed = [setup.model.kappa() * d[0], setup.model.kappa() * d[1]];
    let drift = p.drift.as_deref().map(point).unwrap_or(computed);
    let traj = evolve(&u0, p.t_max, &setup.model, kernel, &setup.evolve)?;
    let metric = hair_trigger_metric(&traj, p.half_width, drift)?;
    let level = setup.model.theta() - p.eps;
    let hit = metric.first_reaching(level);
    out.check(
        "hair_trigger",
        hit.is_some(),
        match hit {
            Some(t) => format!("metric reached {level} at t = {t}"),
            None => format!("metric stayed below {level}; last {:?}", metric.last()),
        },
    );
    let mut table = Table::new("metric", &["t", "metric"]);
    for &(t, m) in &metric.points {
        table.push_numbers(&[t, m]);
    }
    out.tables.push(table);
    out.plots.push(Plot {
        name: "metric".into(),
        title: "min over the moving window".into(),
        x_label: "t".into(),
        y_label: "metric".into(),
        series: vec![("metric".into(), metric.points.clone())],
        levels: vec![("theta - eps".into(), level)],
    });
    out.notes.push(format!("computed drift {computed:?}, frame drift {drift:?}"));
    Ok(())
}

fn subsolution(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outcome) -> Result<()> {
    let p = cfg.subsolution.clone().unwrap_or_default();
    let kernel = setup.dispersal(cfg);
    let model = &setup.model;
    let base = SubsolutionParams::for_model(model, kernel, 0.0, 0.0)?;
    let params = SubsolutionParams {
        q: p.q_fraction * base.q0,
        alpha: p.alpha_fraction * base.alpha0,
        ..base
    };
    let search = SearchOptions {
        t_start: p.t_start,
        t_cap: p.t_cap,
        samples: p.samples,
        tol: p.tol,
    };
    let rep = verify_nonlinear_subsolution(&params, model, kernel, &search)?;
    out.check(
        "certificate",
        rep.max <= p.tol,
        format!("T = {}, max residual {:e}, max G v = {:?}", rep.t_found, rep.max, rep.g_max),
    );
    let mut table = Table::new("residual", &["t", "max_residual"]);
    for &(t, m) in &rep.samples {
        table.push_numbers(&[t, m]);
    }
    out.tables.push(table);
    out.notes.push(format!(
        "alpha0 = {}, alpha = {}, q0 = {}, q = {}, drift = {:?}",
        params.alpha0, params.alpha, params.q0, params.q, params.drift
    ));

    if let Some(cells) = p.domination_cells {
        if setup.grid.dims() != 1 {
            bail!("domination runs are only set up for 1D grids");
        }
        let line = Grid::line_with_spacing(setup.grid.spacing(0), cells)?;
        let mut kernels = BTreeMap::new();
        for (name, spec) in &setup.specs {
            kernels.insert(name.clone(), build_kernel(spec, line).with_context(|| format!("kernel {name} on the domination line"))?);
        }
        let model_d = build_model(cfg, &kernels)?;
        let kernel_d = &kernels[&cfg.model.dispersal];
        let opts = EvolveOptions {
            snapshot_interval: None,
            ..setup.evolve.clone()
        };
        let dom = check_domination(&rep.params, &model_d, kernel_d, p.domination_snapshots, p.domination_tol, &opts)?;
        out.check(
            "domination",
            dom.holds,
            format!("min u - w = {:e} at t = {} over [0, 3T]", dom.min_margin, dom.time),
        );
    }
    Ok(())
}

fn lemmas(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outcome) -> Result<()> {
    let p = cfg.lemmas.clone().unwrap_or_default();
    let jump = p.jump.clone().or_else(|| {
        p.recurrence.is_none().then(|| crate::config::JumpParams {
            kernel: None,
            level: 1.0,
            radii: vec![10.0, 20.0, 40.0],
            tol: 1e-3,
        })
    });
    if let Some(j) = jump {
        let b = &setup.kernels[j.kernel.as_deref().unwrap_or(&cfg.model.dispersal)];
        let h = b.grid().spacing(0);
        let reach = j.radii.iter().cloned().fold(0.0, f64::max) + 10.0;
        let cells = 2 * (reach / h).ceil() as usize;
        let v = Profile::from_fn(0.5 * cells as f64 * h, cells, |s| if s < 0.0 { j.level } else { 0.0 })?;
        let rep = check_avg_jump_lemma(b, &v, &j.radii)?;
        out.check(
            "jump_identity",
            rep.final_error <= j.tol,
            format!("limit {:.6} vs truncated {:.6}", rep.rhs, rep.rows.last().map(|r| r.1).unwrap_or(f64::NAN)),
        );
        let mut table = Table::new("jump", &["r", "integral", "limit"]);
        for &(r, v) in &rep.rows {
            table.push_numbers(&[r, v, rep.rhs]);
        }
        out.tables.push(table);
    }
    if let Some(r) = &p.recurrence {
        let rep = iterate_recurrence(r.r1, r.p, r.q, r.target, r.cap)?;
        out.check(
            "recurrence_target",
            rep.n.is_some(),
            match rep.n {
                Some(n) => format!("partial sum reached {} at n = {n}", r.target),
                None => format!("partial sum {} after {} terms (cap)", rep.partial_sum, rep.iterations),
            },
        );
        out.check("recurrence_increasing", rep.increasing, format!("r_last = {}", rep.r_last));
        let mut table = Table::new("recurrence", &["iterations", "partial_sum", "r_last", "reached"]);
        table.push_numbers(&[rep.iterations as f64, rep.partial_sum, rep.r_last, rep.n.map_or(0.0, |_| 1.0)]);
        out.tables.push(table);
    }
    Ok(())
}

fn verify_assumptions(cfg: &ExperimentConfig, setup: &Setup, out: &mut Outcome) -> Result<()> {
    let rep = check_assumptions(&setup.model, setup.dispersal(cfg));
    let mut table = Table::new("assumptions", &["key", "verdict", "values", "note"]);
    for c in &rep.checks {
        let values = c
            .values
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        table.push(vec![c.key.clone(), c.verdict.to_string(), values, c.note.clone()]);
        out.check(c.key.clone(), c.verdict != Verdict::Fails, c.to_string());
    }
    out.tables.push(table);
    out.notes.push(format!(
        "theta = {}\nbeta = {}\nLipschitz constant of G on [0, theta]: {}",
        setup.model.theta(),
        setup.model.beta(),
        rep.lipschitz
    ));
    Ok(())
}
