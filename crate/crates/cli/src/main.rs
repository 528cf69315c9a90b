//! `treeqed` command-line interface.
//!
//! Every subcommand writes `<out>/<subcommand>/<slug>/` containing
//! `data.csv`, `plot.svg` (where a plot makes sense) and `summary.txt`.
//! Exit status is 0 on success, 1 when a run or the property suite fails and
//! 2 on bad input.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use treeqed::dynamics::{excited_populations, Grid};
use treeqed::experiments::{
    experimental_scenario_with, linspace, open_grid, property_suite, reproduce, run, sweep_1d,
    sweep_2d, Figure, ReproduceOptions, RunConfig, RunOverrides, SweepAxis, EXPERIMENT_GAMMA_MHZ,
    EXPERIMENT_G_MHZ, EXPERIMENT_KAPPA_MHZ,
};
use treeqed::lri::{
    analytic_fidelity, decomposed_fidelity, lr_phase, lr_phase_closed_form, solve_epsilon,
    InvariantParams, LrMode,
};
use treeqed::output::{csv_row, fmt_num, slug_value};
use treeqed::svg::{line_plot, Series};
use treeqed::{Error, PulseSchedule};

use config::Settings;

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::EmptyAxis(_)
            | Error::NegativeRadicand { .. }
            | Error::SingularElimination => Failure::Input(e.to_string()),
            _ => Failure::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "treeqed",
    version,
    about = "Tree-type entanglement in fiber-linked cavities: shortcut pulses and dynamics"
)]
struct Cli {
    /// Output root directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (0 = available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// `key = value` configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// lri, tqd or stirap.
    #[arg(long)]
    method: Option<String>,
    /// Duration in units of 1/g.
    #[arg(long, allow_hyphen_values = true)]
    tf: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    /// Detuning in units of g.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// STIRAP pulse separation as a fraction of t_f.
    #[arg(long = "tau-frac", allow_hyphen_values = true)]
    tau_frac: Option<f64>,
    /// STIRAP pulse width as a fraction of t_f.
    #[arg(long = "T-frac", allow_hyphen_values = true)]
    t_frac: Option<f64>,
    /// STIRAP peak amplitude in units of g.
    #[arg(long, allow_hyphen_values = true)]
    omega0: Option<f64>,
    /// Atomic decay rate in units of g.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Photon leakage rate in units of g.
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    /// Fractional deviation of t_f.
    #[arg(long, allow_hyphen_values = true)]
    dtf: Option<f64>,
    /// Fractional deviation of epsilon.
    #[arg(long, allow_hyphen_values = true)]
    deps: Option<f64>,
    /// Fractional deviation of delta.
    #[arg(long, allow_hyphen_values = true)]
    ddelta: Option<f64>,
    /// TQD amplitude calibration: zeno-projected (default) or nominal.
    #[arg(long)]
    calibration: Option<String>,
    /// RK4 step count.
    #[arg(long)]
    grid: Option<usize>,
}

impl RunArgs {
    fn settings(&self) -> Result<Settings, Failure> {
        let method = self
            .method
            .as_deref()
            .map(config::parse_method)
            .transpose()?;
        let calibration = self
            .calibration
            .as_deref()
            .map(config::parse_calibration)
            .transpose()?;
        Ok(Settings {
            method,
            run: RunOverrides {
                t_f: self.tf,
                epsilon: self.epsilon,
                delta: self.delta,
                tau_frac: self.tau_frac,
                t_frac: self.t_frac,
                omega0: self.omega0,
                gamma: self.gamma,
                kappa: self.kappa,
                dtf: self.dtf,
                deps: self.deps,
                ddelta: self.ddelta,
                calibration,
                steps: self.grid,
            },
            ..Settings::default()
        })
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate one configuration and record the trajectory.
    Simulate(RunArgs),
    /// Final fidelity over a 1-D or 2-D parameter grid.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Axis: tf, epsilon, delta, dtf, deps, ddelta, gamma, kappa, tau-frac, T-frac, omega0.
        #[arg(long)]
        axis: String,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        /// Explicit comma-separated values instead of --from/--to.
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[arg(long)]
        axis2: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        from2: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to2: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        values2: Option<String>,
        #[arg(long, default_value_t = 21)]
        points2: usize,
    },
    /// Data and plot behind a figure: 3a 3b 3c 4 5a 5b 5c 6a 6b 6c 6d 7a 7b 8a 8b 9a 9b.
    Reproduce {
        #[arg(long)]
        figure: String,
        /// Points per axis for 1-D sweeps.
        #[arg(long, default_value_t = 41)]
        points: usize,
        /// Points per axis for 2-D sweeps.
        #[arg(long = "points-2d", default_value_t = 21)]
        points_2d: usize,
        /// RK4 step count.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Tabulate the drive amplitudes of one configuration.
    Pulses {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Closed-form and quadrature quantities of the invariant-based scheme.
    LriAnalytics {
        #[arg(long, default_value_t = 80.0)]
        tf: f64,
        #[arg(long, default_value_t = 0.177)]
        epsilon: f64,
    },
    /// Run the property suite; exits 1 if any property fails.
    Validate,
    /// Both methods with physical rates given in MHz.
    Experimental {
        #[arg(long = "g-mhz", default_value_t = EXPERIMENT_G_MHZ)]
        g_mhz: f64,
        #[arg(long = "gamma-mhz", default_value_t = EXPERIMENT_GAMMA_MHZ)]
        gamma_mhz: f64,
        #[arg(long = "kappa-mhz", default_value_t = EXPERIMENT_KAPPA_MHZ)]
        kappa_mhz: f64,
        /// RK4 step count.
        #[arg(long)]
        grid: Option<usize>,
    },
}

struct Ctx {
    out: PathBuf,
    workers: usize,
    file: Settings,
}

fn write_outputs(dir: &Path, csv: &str, svg: Option<&str>, summary: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let put = |name: &str, body: &str| -> anyhow::Result<()> {
        let p = dir.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    };
    put("data.csv", csv)?;
    if let Some(svg) = svg {
        put("plot.svg", svg)?;
    }
    put("summary.txt", summary)?;
    println!("{}", summary.trim_end());
    println!("wrote {}", dir.display());
    Ok(())
}

fn run_config(args: &RunArgs, ctx: &Ctx) -> Result<RunConfig, Failure> {
    let s = args.settings()?.or(ctx.file.clone());
    let method = s.method.ok_or_else(|| {
        Failure::input(
            "method: required (--method lri|tqd|stirap or `method =` in the config file)",
        )
    })?;
    Ok(RunConfig::from_overrides(method, &s.run)?)
}

fn parse_values(key: &str, list: &str) -> Result<Vec<f64>, Failure> {
    list.split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|_| {
                Failure::input(format!("{key}: expected a number, got `{}`", v.trim()))
            })
        })
        .collect()
}

fn axis_values(
    key: &str,
    from: Option<f64>,
    to: Option<f64>,
    values: Option<&str>,
    points: usize,
) -> Result<Vec<f64>, Failure> {
    match (values, from, to) {
        (Some(list), None, None) => parse_values(key, list),
        (None, Some(a), Some(b)) => {
            if points == 0 {
                return Err(Failure::input(format!(
                    "{key}: at least one point is required"
                )));
            }
            Ok(linspace(a, b, points))
        }
        _ => Err(Failure::input(format!(
            "{key}: give either explicit values or both ends of the range"
        ))),
    }
}

fn parse_axis(key: &str, s: &str) -> Result<SweepAxis, Failure> {
    SweepAxis::parse(s).ok_or_else(|| Failure::input(format!("{key}: unknown sweep axis `{s}`")))
}

fn simulate(args: &RunArgs, ctx: &Ctx) -> Result<(), Failure> {
    let config = run_config(args, ctx)?;
    let out = run(&config)?;
    let t = &out.trajectory.times;
    let pops: Vec<Vec<f64>> = (0..t.len())
        .map(|k| out.trajectory.populations(k))
        .collect();
    let mut series: Vec<Series> = [0usize, 16, 17, 18, 19]
        .iter()
        .map(|&i| {
            Series::new(
                format!("phi{}", i + 1),
                t.clone(),
                pops.iter().map(|p| p[i]).collect(),
            )
        })
        .collect();
    let excited: Vec<(f64, f64)> = pops.iter().map(|p| excited_populations(p)).collect();
    series.push(Series::new("P_a", t.clone(), excited.iter().map(|e| e.0).collect()).dashed());
    series.push(Series::new("P_cf", t.clone(), excited.iter().map(|e| e.1).collect()).dashed());
    let title = format!(
        "{} populations",
        config.method.method().label().to_uppercase()
    );
    let svg = line_plot(&title, "t g", "population", &series);
    let dir = ctx.out.join("simulate").join(config.slug());
    write_outputs(
        &dir,
        &out.trajectory_csv()?,
        Some(&svg),
        &out.summary_text(),
    )
}

/// Second sweep axis: name, range ends, explicit values, point count.
type AxisSpec<'a> = (&'a str, Option<f64>, Option<f64>, Option<&'a str>, usize);

#[allow(clippy::too_many_arguments)]
fn sweep(
    args: &RunArgs,
    axis: &str,
    from: Option<f64>,
    to: Option<f64>,
    values: Option<&str>,
    points: usize,
    second: Option<AxisSpec>,
    ctx: &Ctx,
) -> Result<(), Failure> {
    let template = run_config(args, ctx)?;
    let a1 = parse_axis("axis", axis)?;
    let v1 = axis_values("axis", from, to, values, points)?;
    let span = |v: &[f64]| {
        format!(
            "{}_{}_{}",
            slug_value(v[0]),
            slug_value(*v.last().expect("nonempty")),
            v.len()
        )
    };
    let (result, slug) = match second {
        None => {
            let r = sweep_1d(&template, a1, &v1, ctx.workers)?;
            let slug = format!("{}_{}_{}", template.slug(), a1.label(), span(&v1));
            (r, slug)
        }
        Some((axis2, from2, to2, values2, points2)) => {
            let a2 = parse_axis("axis2", axis2)?;
            let v2 = axis_values("axis2", from2, to2, values2, points2)?;
            let r = sweep_2d(&template, a1, &v1, a2, &v2, ctx.workers)?;
            let slug = format!(
                "{}_{}_{}_{}_{}",
                template.slug(),
                a1.label(),
                span(&v1),
                a2.label(),
                span(&v2)
            );
            (r, slug)
        }
    };
    let dir = ctx.out.join("sweep").join(slug);
    let title = format!(
        "{} fidelity",
        template.method.method().label().to_uppercase()
    );
    write_outputs(
        &dir,
        &result.to_csv(),
        Some(&result.to_svg(&title)),
        &result.metadata(),
    )
}

fn reproduce_figure(
    figure: &str,
    points: usize,
    points_2d: usize,
    grid: Option<usize>,
    ctx: &Ctx,
) -> Result<(), Failure> {
    let fig = Figure::parse(figure.trim_start_matches("fig"))
        .ok_or_else(|| Failure::input(format!("figure: unknown figure `{figure}`")))?;
    if points == 0 || points_2d == 0 {
        return Err(Failure::input(
            "points: at least one point per axis is required",
        ));
    }
    let steps = grid.or(ctx.file.run.steps);
    let mut opts = ReproduceOptions {
        workers: ctx.workers,
        points_1d: points,
        points_2d,
        ..ReproduceOptions::default()
    };
    if let Some(steps) = steps {
        if steps == 0 {
            return Err(Failure::input("grid: step count must be positive"));
        }
        opts.grid.steps = steps;
        opts.open_grid.steps = steps;
    }
    let out = reproduce(fig, &opts)?;
    let dir = ctx
        .out
        .join("reproduce")
        .join(format!("fig{}", fig.label()));
    write_outputs(&dir, &out.csv, Some(&out.svg), &out.summary)
}

fn pulses(args: &RunArgs, points: usize, ctx: &Ctx) -> Result<(), Failure> {
    let config = run_config(args, ctx)?;
    let schedule = config.schedule()?;
    let n = points.max(2);
    let ts = linspace(0.0, schedule.t_f(), n);
    let amps: Vec<_> = ts.iter().map(|&t| schedule.amplitudes(t)).collect();
    let mut series = Vec::new();
    for (line, label) in [(0, "Omega1"), (1, "Omega2"), (2, "Omega3")] {
        let re: Vec<f64> = amps.iter().map(|a| a[line].re).collect();
        let im: Vec<f64> = amps.iter().map(|a| a[line].im).collect();
        if re.iter().any(|x| *x != 0.0) {
            series.push(Series::new(format!("Re {label}"), ts.clone(), re));
        }
        if im.iter().any(|x| *x != 0.0) {
            series.push(Series::new(format!("Im {label}"), ts.clone(), im).dashed());
        }
    }
    let svg = line_plot("Drive amplitudes", "t g", "amplitude / g", &series);
    let mut summary = config.describe();
    let _ = writeln!(
        summary,
        "peak_omega2 = {}",
        fmt_num(schedule.peak_omega2(treeqed::pulses::PULSE_GRID))
    );
    let dir = ctx.out.join("pulses").join(config.slug());
    write_outputs(&dir, &schedule.to_csv(n), Some(&svg), &summary)
}

fn lri_analytics(t_f: f64, epsilon: f64, ctx: &Ctx) -> Result<(), Failure> {
    let schedule = PulseSchedule::lri(t_f, epsilon)?;
    let params = InvariantParams::linear(t_f, epsilon);
    let eps_star = solve_epsilon();
    let mut summary = String::new();
    let _ = writeln!(summary, "tf = {}", fmt_num(t_f));
    let _ = writeln!(summary, "epsilon = {}", fmt_num(epsilon));
    let _ = writeln!(summary, "epsilon_star = {}", fmt_num(eps_star));
    let _ = writeln!(
        summary,
        "analytic_fidelity_at_epsilon_star = {}",
        fmt_num(analytic_fidelity(eps_star)?)
    );
    let _ = writeln!(
        summary,
        "analytic_fidelity = {}",
        fmt_num(analytic_fidelity(epsilon)?)
    );
    let _ = writeln!(
        summary,
        "decomposed_fidelity = {}",
        fmt_num(decomposed_fidelity(t_f, epsilon)?)
    );
    for (mode, name) in [
        (LrMode::Zero, "zero"),
        (LrMode::Plus, "plus"),
        (LrMode::Minus, "minus"),
    ] {
        let _ = writeln!(
            summary,
            "lr_phase_{name} = {}",
            fmt_num(lr_phase(mode, &schedule, &params))
        );
        let _ = writeln!(
            summary,
            "lr_phase_{name}_closed_form = {}",
            fmt_num(lr_phase_closed_form(mode, epsilon))
        );
    }
    let eps = linspace(0.01, 1.5, 150);
    let f: Vec<f64> = eps
        .iter()
        .map(|&e| analytic_fidelity(e))
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("epsilon,analytic_fidelity\n");
    for (e, v) in eps.iter().zip(&f) {
        csv.push_str(&csv_row(&[*e, *v]));
    }
    let svg = line_plot(
        "Closed-form LRI fidelity",
        "epsilon",
        "fidelity",
        &[Series::new("F", eps, f)],
    );
    let dir = ctx.out.join("lri-analytics").join(format!(
        "tf{}_eps{}",
        slug_value(t_f),
        slug_value(epsilon)
    ));
    write_outputs(&dir, &csv, Some(&svg), &summary)
}

fn validate(ctx: &Ctx) -> Result<bool, Failure> {
    let suite = property_suite()?;
    let mut csv = String::from("property,value,passed\n");
    for c in &suite.checks {
        let _ = writeln!(csv, "{},{},{}", c.name, fmt_num(c.value), c.passed as u8);
    }
    let mut summary = suite.report();
    let passed = suite.checks.iter().filter(|c| c.passed).count();
    let _ = writeln!(summary, "{passed}/{} properties hold", suite.checks.len());
    write_outputs(
        &ctx.out.join("validate").join("suite"),
        &csv,
        None,
        &summary,
    )?;
    Ok(suite.passed())
}

fn experimental(
    g: f64,
    gamma: f64,
    kappa: f64,
    grid: Option<usize>,
    ctx: &Ctx,
) -> Result<(), Failure> {
    let mut g_ = open_grid();
    if let Some(steps) = grid.or(ctx.file.run.steps) {
        if steps == 0 {
            return Err(Failure::input("grid: step count must be positive"));
        }
        g_ = Grid { steps, ..g_ };
    }
    let s = experimental_scenario_with(g, gamma, kappa, g_, ctx.workers)?;
    let mut csv = String::from(
        "g_mhz,gamma_mhz,kappa_mhz,gamma_over_g,kappa_over_g,fidelity_lri,fidelity_tqd\n",
    );
    csv.push_str(&csv_row(&[
        g,
        gamma,
        kappa,
        s.gamma,
        s.kappa,
        s.lri.fidelity,
        s.tqd.fidelity,
    ]));
    let mut summary = format!(
        "g_mhz = {}\ngamma_mhz = {}\nkappa_mhz = {}\n",
        fmt_num(g),
        fmt_num(gamma),
        fmt_num(kappa)
    );
    summary.push_str(&s.to_text());
    let slug = format!(
        "g{}_gamma{}_kappa{}",
        slug_value(g),
        slug_value(gamma),
        slug_value(kappa)
    );
    write_outputs(
        &ctx.out.join("experimental").join(slug),
        &csv,
        None,
        &summary,
    )
}

fn dispatch(cli: Cli) -> Result<ExitCode, Failure> {
    let file = match &cli.config {
        Some(p) => config::load(p)?,
        None => Settings::default(),
    };
    let ctx = Ctx {
        out: cli
            .out
            .clone()
            .or(file.out.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        workers: cli.workers.or(file.workers).unwrap_or(0),
        file,
    };
    match &cli.command {
        Command::Simulate(args) => simulate(args, &ctx)?,
        Command::Sweep {
            run,
            axis,
            from,
            to,
            values,
            points,
            axis2,
            from2,
            to2,
            values2,
            points2,
        } => {
            let second = axis2
                .as_deref()
                .map(|a| (a, *from2, *to2, values2.as_deref(), *points2));
            if second.is_none() && (from2.is_some() || to2.is_some() || values2.is_some()) {
                return Err(Failure::input(
                    "axis2: required when a second range is given",
                ));
            }
            sweep(
                run,
                axis,
                *from,
                *to,
                values.as_deref(),
                *points,
                second,
                &ctx,
            )?
        }
        Command::Reproduce {
            figure,
            points,
            points_2d,
            grid,
        } => reproduce_figure(figure, *points, *points_2d, *grid, &ctx)?,
        Command::Pulses { run, points } => pulses(run, *points, &ctx)?,
        Command::LriAnalytics { tf, epsilon } => lri_analytics(*tf, *epsilon, &ctx)?,
        Command::Validate => {
            if !validate(&ctx)? {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Experimental {
            g_mhz,
            gamma_mhz,
            kappa_mhz,
            grid,
        } => experimental(*g_mhz, *gamma_mhz, *kappa_mhz, *grid, &ctx)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
