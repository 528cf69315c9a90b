//! Named runs, parameter sweeps, figure presets and the property suite.
//!
//! Every output here is deterministic: fixed step counts, fixed number
//! formatting and results merged by grid index regardless of scheduling.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dynamics::{
    closure_population, evolve_lindblad, evolve_schrodinger, excited_populations, jump_channels,
    jump_set, Diagnostics, FnHamiltonian, Grid, States, Trajectory,
};
use crate::error::{invalid, Error, Result};
use crate::hamiltonians::{
    build_h0_eff, build_h0_prime_eff, build_h_acf, build_h_eff_eliminated, embed_effective,
    CouplingParams, DrivenHamiltonian,
};
use crate::lri::{
    build_invariant, commutation_residual, lr_phase, lr_phase_closed_form, InvariantParams, LrMode,
};
use crate::output::{csv_row, fmt_num, slug_value};
use crate::pulses::{
    lri_pulses, mixing_angle, stirap_pulses, tqd_pulse_calibrated, Method, PulseSchedule,
    TqdCalibration,
};
use crate::statespace::{
    close_under_jumps, dark_subspace, jump_closed_basis, named_state, DensityMatrix, NamedState,
    OrderedBasis, StateVector, COHERENT_DIM,
};
use crate::svg::{heatmap, line_plot, Series};

pub const DEFAULT_TF: f64 = 80.0;
pub const DEFAULT_EPSILON: f64 = 0.177;
pub const DEFAULT_DELTA: f64 = 6.0;
pub const DEFAULT_OMEGA0: f64 = 1.0;
pub const DEFAULT_POINTS_1D: usize = 41;
pub const DEFAULT_POINTS_2D: usize = 21;

/// Physical rates of the experimental scenario, in MHz (the common `2 pi`
/// cancels in every ratio).
pub const EXPERIMENT_G_MHZ: f64 = 750.0;
pub const EXPERIMENT_GAMMA_MHZ: f64 = 3.5;
pub const EXPERIMENT_KAPPA_MHZ: f64 = 2.62;

pub fn code_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Method together with exactly the parameters it uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MethodParams {
    Lri {
        epsilon: f64,
    },
    Tqd {
        delta: f64,
        tau_frac: f64,
        t_frac: f64,
        calibration: TqdCalibration,
    },
    Stirap {
        omega0: f64,
        tau_frac: f64,
        t_frac: f64,
    },
}

impl MethodParams {
    pub fn method(&self) -> Method {
        match self {
            MethodParams::Lri { .. } => Method::Lri,
            MethodParams::Tqd { .. } => Method::Tqd,
            MethodParams::Stirap { .. } => Method::Stirap,
        }
    }

    pub fn defaults(method: Method) -> Self {
        match method {
            Method::Lri => MethodParams::Lri {
                epsilon: DEFAULT_EPSILON,
            },
            Method::Tqd => MethodParams::Tqd {
                delta: DEFAULT_DELTA,
                tau_frac: crate::pulses::StirapParams::TAU_FRAC,
                t_frac: crate::pulses::StirapParams::WIDTH_FRAC,
                calibration: TqdCalibration::ZenoProjected { g: 1.0, v: 1.0 },
            },
            Method::Stirap => MethodParams::Stirap {
                omega0: DEFAULT_OMEGA0,
                tau_frac: crate::pulses::StirapParams::TAU_FRAC,
                t_frac: crate::pulses::StirapParams::WIDTH_FRAC,
            },
        }
    }
}

/// Fractional offsets `(x' - x) / x` between actual and ideal values.
///
/// Pulses are generated from the actual `t_f'` and `epsilon'` and run for
/// `t_f'`; an actual detuning `delta'` enters both the pulse and the
/// Hamiltonian. Targets never change.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Deviations {
    pub dtf: f64,
    pub deps: f64,
    pub ddelta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub method: MethodParams,
    pub t_f: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub deviations: Deviations,
    pub grid: Grid,
}

/// Optional values for building a [`RunConfig`]; unset fields take defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOverrides {
    pub t_f: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub tau_frac: Option<f64>,
    pub t_frac: Option<f64>,
    pub omega0: Option<f64>,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    pub dtf: Option<f64>,
    pub deps: Option<f64>,
    pub ddelta: Option<f64>,
    pub calibration: Option<TqdCalibration>,
    pub steps: Option<usize>,
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {x}")))
    }
}

fn non_negative(name: &'static str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be non-negative, got {x}")))
    }
}

fn deviation(name: &'static str, x: f64) -> Result<()> {
    if x > -1.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and above -1, got {x}")))
    }
}

impl RunConfig {
    pub fn defaults(method: Method) -> Self {
        RunConfig {
            method: MethodParams::defaults(method),
            t_f: DEFAULT_TF,
            gamma: 0.0,
            kappa: 0.0,
            deviations: Deviations::default(),
            grid: Grid::default(),
        }
    }

    /// Defaults for `method` with `o` applied. Parameters that `method` does
    /// not use are rejected.
    pub fn from_overrides(method: Method, o: &RunOverrides) -> Result<Self> {
        let reject = |name: &'static str, set: bool| {
            if set {
                Err(invalid(name, format!("not used by method {method}")))
            } else {
                Ok(())
            }
        };
        if method != Method::Lri {
            reject("epsilon", o.epsilon.is_some())?;
            reject("deps", o.deps.is_some())?;
        }
        if method != Method::Tqd {
            reject("delta", o.delta.is_some())?;
            reject("ddelta", o.ddelta.is_some())?;
            reject("calibration", o.calibration.is_some())?;
        }
        if method != Method::Stirap {
            reject("omega0", o.omega0.is_some())?;
        }
        if method == Method::Lri {
            reject("tau_frac", o.tau_frac.is_some())?;
            reject("T_frac", o.t_frac.is_some())?;
        }
        let mut c = RunConfig::defaults(method);
        c.method = match c.method {
            MethodParams::Lri { epsilon } => MethodParams::Lri {
                epsilon: o.epsilon.unwrap_or(epsilon),
            },
            MethodParams::Tqd {
                delta,
                tau_frac,
                t_frac,
                calibration,
            } => MethodParams::Tqd {
                delta: o.delta.unwrap_or(delta),
                tau_frac: o.tau_frac.unwrap_or(tau_frac),
                t_frac: o.t_frac.unwrap_or(t_frac),
                calibration: o.calibration.unwrap_or(calibration),
            },
            MethodParams::Stirap {
                omega0,
                tau_frac,
                t_frac,
            } => MethodParams::Stirap {
                omega0: o.omega0.unwrap_or(omega0),
                tau_frac: o.tau_frac.unwrap_or(tau_frac),
                t_frac: o.t_frac.unwrap_or(t_frac),
            },
        };
        c.t_f = o.t_f.unwrap_or(c.t_f);
        c.gamma = o.gamma.unwrap_or(0.0);
        c.kappa = o.kappa.unwrap_or(0.0);
        c.deviations = Deviations {
            dtf: o.dtf.unwrap_or(0.0),
            deps: o.deps.unwrap_or(0.0),
            ddelta: o.ddelta.unwrap_or(0.0),
        };
        if let Some(steps) = o.steps {
            if steps == 0 {
                return Err(invalid("grid", "step count must be positive"));
            }
            c.grid.steps = steps;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        positive("t_f", self.t_f)?;
        non_negative("gamma", self.gamma)?;
        non_negative("kappa", self.kappa)?;
        deviation("dtf", self.deviations.dtf)?;
        deviation("deps", self.deviations.deps)?;
        deviation("ddelta", self.deviations.ddelta)?;
        if self.grid.steps == 0 {
            return Err(invalid("grid", "step count must be positive"));
        }
        let method = self.method.method();
        if method != Method::Lri && self.deviations.deps != 0.0 {
            return Err(invalid("deps", format!("not used by method {method}")));
        }
        if method != Method::Tqd && self.deviations.ddelta != 0.0 {
            return Err(invalid("ddelta", format!("not used by method {method}")));
        }
        match self.method {
            MethodParams::Lri { epsilon } => {
                if !(epsilon > 0.0 && epsilon < std::f64::consts::FRAC_PI_2) {
                    return Err(invalid("epsilon", format!("must lie in (0, pi/2), got {epsilon}")));
                }
            }
            MethodParams::Tqd {
                delta,
                tau_frac,
                t_frac,
                ..
            } => {
                positive("delta", delta)?;
                positive("tau_frac", tau_frac)?;
                positive("T_frac", t_frac)?;
            }
            MethodParams::Stirap {
                omega0,
                tau_frac,
                t_frac,
            } => {
                positive("omega0", omega0)?;
                positive("tau_frac", tau_frac)?;
                positive("T_frac", t_frac)?;
            }
        }
        Ok(())
    }

    pub fn is_open(&self) -> bool {
        self.gamma > 0.0 || self.kappa > 0.0
    }

    /// Duration actually run, `t_f (1 + dtf)`.
    pub fn actual_tf(&self) -> f64 {
        self.t_f * (1.0 + self.deviations.dtf)
    }

    /// Detuning actually present, `delta (1 + ddelta)`; `None` for resonant
    /// methods.
    pub fn actual_delta(&self) -> Option<f64> {
        match self.method {
            MethodParams::Tqd { delta, .. } => Some(delta * (1.0 + self.deviations.ddelta)),
            _ => None,
        }
    }

    /// Coupling constants of the Hamiltonian. A detuning deviation shifts the
    /// physical detuning as well as the pulse built from it.
    pub fn coupling(&self) -> Result<CouplingParams> {
        match self.actual_delta() {
            Some(delta) => CouplingParams::detuned(delta),
            None => Ok(CouplingParams::resonant()),
        }
    }

    pub fn schedule(&self) -> Result<PulseSchedule> {
        self.validate()?;
        let t_f = self.actual_tf();
        match self.method {
            MethodParams::Lri { epsilon } => lri_pulses(t_f, epsilon * (1.0 + self.deviations.deps)),
            MethodParams::Stirap {
                omega0,
                tau_frac,
                t_frac,
            } => stirap_pulses(t_f, omega0, tau_frac * t_f, t_frac * t_f),
            MethodParams::Tqd {
                delta,
                tau_frac,
                t_frac,
                calibration,
            } => {
                let stirap = stirap_pulses(t_f, 1.0, tau_frac * t_f, t_frac * t_f)?;
                tqd_pulse_calibrated(&stirap, delta * (1.0 + self.deviations.ddelta), calibration)
            }
        }
    }

    pub fn target_name(&self) -> NamedState {
        match self.method {
            MethodParams::Tqd { .. } => NamedState::TargetTqd,
            _ => NamedState::TargetLri,
        }
    }

    /// Set one sweepable parameter. Fails if `axis` does not apply to the
    /// method.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<RunConfig> {
        let mut c = *self;
        let method = self.method.method();
        let wrong = || invalid(axis.label(), format!("not used by method {method}"));
        match axis {
            SweepAxis::Tf => c.t_f = value,
            SweepAxis::Gamma => c.gamma = value,
            SweepAxis::Kappa => c.kappa = value,
            SweepAxis::Dtf => c.deviations.dtf = value,
            SweepAxis::Deps => c.deviations.deps = value,
            SweepAxis::Ddelta => c.deviations.ddelta = value,
            SweepAxis::Epsilon => match &mut c.method {
                MethodParams::Lri { epsilon } => *epsilon = value,
                _ => return Err(wrong()),
            },
            SweepAxis::Delta => match &mut c.method {
                MethodParams::Tqd { delta, .. } => *delta = value,
                _ => return Err(wrong()),
            },
            SweepAxis::Omega0 => match &mut c.method {
                MethodParams::Stirap { omega0, .. } => *omega0 = value,
                _ => return Err(wrong()),
            },
            SweepAxis::TauFrac => match &mut c.method {
                MethodParams::Tqd { tau_frac, .. } | MethodParams::Stirap { tau_frac, .. } => {
                    *tau_frac = value
                }
                _ => return Err(wrong()),
            },
            SweepAxis::TFrac => match &mut c.method {
                MethodParams::Tqd { t_frac, .. } | MethodParams::Stirap { t_frac, .. } => {
                    *t_frac = value
                }
                _ => return Err(wrong()),
            },
        }
        c.validate()?;
        Ok(c)
    }

    /// `key = value` lines, the same format the CLI config file reads.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("method", self.method.method().label().to_string());
        kv("tf", fmt_num(self.t_f));
        match self.method {
            MethodParams::Lri { epsilon } => kv("epsilon", fmt_num(epsilon)),
            MethodParams::Tqd {
                delta,
                tau_frac,
                t_frac,
                calibration,
            } => {
                kv("delta", fmt_num(delta));
                kv("tau_frac", fmt_num(tau_frac));
                kv("T_frac", fmt_num(t_frac));
                kv("calibration", calibration.label().to_string());
            }
            MethodParams::Stirap {
                omega0,
                tau_frac,
                t_frac,
            } => {
                kv("omega0", fmt_num(omega0));
                kv("tau_frac", fmt_num(tau_frac));
                kv("T_frac", fmt_num(t_frac));
            }
        }
        kv("gamma", fmt_num(self.gamma));
        kv("kappa", fmt_num(self.kappa));
        kv("dtf", fmt_num(self.deviations.dtf));
        if matches!(self.method, MethodParams::Lri { .. }) {
            kv("deps", fmt_num(self.deviations.deps));
        }
        if matches!(self.method, MethodParams::Tqd { .. }) {
            kv("ddelta", fmt_num(self.deviations.ddelta));
        }
        kv("grid", self.grid.steps.to_string());
        out
    }

    /// Directory-safe name derived from the parameters.
    pub fn slug(&self) -> String {
        let mut s = format!("{}_tf{}", self.method.method().label(), slug_value(self.t_f));
        match self.method {
            MethodParams::Lri { epsilon } => s += &format!("_eps{}", slug_value(epsilon)),
            MethodParams::Tqd {
                delta,
                tau_frac,
                t_frac,
                calibration,
            } => {
                s += &format!(
                    "_delta{}_tau{}_T{}",
                    slug_value(delta),
                    slug_value(tau_frac),
                    slug_value(t_frac)
                );
                if calibration == TqdCalibration::Nominal {
                    s += "_nominal";
                }
            }
            MethodParams::Stirap {
                omega0,
                tau_frac,
                t_frac,
            } => {
                s += &format!(
                    "_omega{}_tau{}_T{}",
                    slug_value(omega0),
                    slug_value(tau_frac),
                    slug_value(t_frac)
                )
            }
        }
        if self.is_open() {
            s += &format!("_gamma{}_kappa{}", slug_value(self.gamma), slug_value(self.kappa));
        }
        let d = self.deviations;
        for (name, v) in [("dtf", d.dtf), ("deps", d.deps), ("ddelta", d.ddelta)] {
            if v != 0.0 {
                s += &format!("_{name}{}", slug_value(v));
            }
        }
        s
    }
}

/// Scalar record of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub method: Method,
    pub t_f: f64,
    pub fidelity: f64,
    pub peak_atomic: f64,
    pub peak_cavity_fiber: f64,
    pub final_closure: f64,
    pub open: bool,
    pub diagnostics: Diagnostics,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let d = &self.diagnostics;
        let mut out = String::new();
        let _ = writeln!(out, "fidelity = {}", fmt_num(self.fidelity));
        let _ = writeln!(out, "peak_p_atomic = {}", fmt_num(self.peak_atomic));
        let _ = writeln!(out, "peak_p_cavity_fiber = {}", fmt_num(self.peak_cavity_fiber));
        let _ = writeln!(out, "final_p_closure = {}", fmt_num(self.final_closure));
        let _ = writeln!(out, "duration = {}", fmt_num(self.t_f));
        let _ = writeln!(out, "dynamics = {}", if self.open { "lindblad" } else { "schrodinger" });
        let _ = writeln!(out, "steps = {}", d.steps);
        let _ = writeln!(out, "drift = {}", fmt_num(d.drift));
        match d.gate_change {
            Some(c) => {
                let _ = writeln!(out, "gate_change = {}", fmt_num(c));
            }
            None => out.push_str("gate_change = off\n"),
        }
        let _ = writeln!(out, "gate_passed = {}", d.gate_passed);
        if let Some(m) = d.min_eigenvalue {
            let _ = writeln!(out, "min_eigenvalue = {}", fmt_num(m));
        }
        out
    }
}

pub struct RunOutput {
    pub config: RunConfig,
    pub schedule: PulseSchedule,
    pub trajectory: Trajectory,
    pub summary: RunSummary,
}

impl RunOutput {
    pub fn trajectory_csv(&self) -> Result<String> {
        let n = self.trajectory.dim();
        let p = CouplingParams::resonant();
        let lri = named_state(NamedState::TargetLri, &p, n)?;
        let tqd = named_state(NamedState::TargetTqd, &p, n)?;
        self.trajectory.to_csv(&lri, &tqd)
    }

    pub fn summary_text(&self) -> String {
        format!("{}{}", self.config.describe(), self.summary.to_text())
    }
}

/// Build the schedule and Hamiltonian for `config` and propagate from
/// `phi_1`, under the Schrödinger equation on the 20 coherent states or,
/// with any loss, the master equation on the jump-closed basis.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let schedule = config.schedule()?;
    let coupling = config.coupling()?;
    let t_f = schedule.t_f();
    let (basis, open) = if config.is_open() {
        (jump_closed_basis(), true)
    } else {
        (OrderedBasis::coherent(), false)
    };
    let n = basis.len();
    let h = DrivenHamiltonian::new(&basis, &coupling, schedule.clone());
    let psi0 = StateVector::basis_state(n, 0);
    let trajectory = if open {
        let jumps = jump_set(&basis, config.gamma, config.kappa)?;
        evolve_lindblad(&h, &jumps, &DensityMatrix::from_pure(&psi0), t_f, &config.grid)?
    } else {
        evolve_schrodinger(&h, &psi0, t_f, &config.grid)?
    };
    let target = named_state(config.target_name(), &CouplingParams::resonant(), n)?;
    let fidelity = trajectory.final_fidelity(&target)?;
    let (peak_atomic, peak_cavity_fiber) = trajectory.peak_excited();
    let summary = RunSummary {
        method: config.method.method(),
        t_f,
        fidelity,
        peak_atomic,
        peak_cavity_fiber,
        final_closure: closure_population(&trajectory.final_populations()),
        open,
        diagnostics: trajectory.diagnostics,
    };
    Ok(RunOutput {
        config: *config,
        schedule,
        trajectory,
        summary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Tf,
    Epsilon,
    Delta,
    Dtf,
    Deps,
    Ddelta,
    Gamma,
    Kappa,
    TauFrac,
    TFrac,
    Omega0,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 11] = [
        SweepAxis::Tf,
        SweepAxis::Epsilon,
        SweepAxis::Delta,
        SweepAxis::Dtf,
        SweepAxis::Deps,
        SweepAxis::Ddelta,
        SweepAxis::Gamma,
        SweepAxis::Kappa,
        SweepAxis::TauFrac,
        SweepAxis::TFrac,
        SweepAxis::Omega0,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Tf => "tf",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Delta => "delta",
            SweepAxis::Dtf => "dtf",
            SweepAxis::Deps => "deps",
            SweepAxis::Ddelta => "ddelta",
            SweepAxis::Gamma => "gamma",
            SweepAxis::Kappa => "kappa",
            SweepAxis::TauFrac => "tau-frac",
            SweepAxis::TFrac => "T-frac",
            SweepAxis::Omega0 => "omega0",
        }
    }

    pub fn parse(s: &str) -> Option<SweepAxis> {
        let s = s.replace('_', "-");
        SweepAxis::ALL.into_iter().find(|a| a.label() == s)
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|k| if k == n - 1 { b } else { a + (b - a) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub coords: Vec<f64>,
    pub summary: RunSummary,
}

/// Final fidelities over a 1-D or 2-D parameter grid, row-major with the
/// last axis fastest.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub axes: Vec<(SweepAxis, Vec<f64>)>,
    pub points: Vec<SweepPoint>,
    pub template: RunConfig,
    pub code_version: &'static str,
}

impl SweepResult {
    pub fn fidelity(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.summary.fidelity).collect()
    }

    pub fn best(&self) -> &SweepPoint {
        self.points
            .iter()
            .fold(&self.points[0], |b, p| if p.summary.fidelity > b.summary.fidelity { p } else { b })
    }

    pub fn worst(&self) -> &SweepPoint {
        self.points
            .iter()
            .fold(&self.points[0], |b, p| if p.summary.fidelity < b.summary.fidelity { p } else { b })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (axis, _) in &self.axes {
            out.push_str(axis.label());
            out.push(',');
        }
        out.push_str("fidelity,peak_p_atomic,peak_p_cavity_fiber\n");
        for p in &self.points {
            let mut row = p.coords.clone();
            row.extend([p.summary.fidelity, p.summary.peak_atomic, p.summary.peak_cavity_fiber]);
            out.push_str(&csv_row(&row));
        }
        out
    }

    /// Template configuration, axes, code version and extrema.
    pub fn metadata(&self) -> String {
        let mut out = self.template.describe();
        let _ = writeln!(out, "code_version = {}", self.code_version);
        for (axis, values) in &self.axes {
            let _ = writeln!(
                out,
                "axis {} = {} points from {} to {}",
                axis.label(),
                values.len(),
                fmt_num(values[0]),
                fmt_num(*values.last().expect("nonempty axis"))
            );
        }
        let coords = |p: &SweepPoint| {
            p.coords
                .iter()
                .zip(&self.axes)
                .map(|(c, (a, _))| format!("{}={}", a.label(), fmt_num(*c)))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let (b, w) = (self.best(), self.worst());
        let _ = writeln!(out, "max_fidelity = {} at {}", fmt_num(b.summary.fidelity), coords(b));
        let _ = writeln!(out, "min_fidelity = {} at {}", fmt_num(w.summary.fidelity), coords(w));
        out
    }

    pub fn to_svg(&self, title: &str) -> String {
        let f = self.fidelity();
        match self.axes.as_slice() {
            [(a, xs)] => line_plot(title, a.label(), "fidelity", &[Series::new("F", xs.clone(), f)]),
            [(a, xs), (b, ys)] => heatmap(title, a.label(), b.label(), xs, ys, &f),
            _ => String::new(),
        }
    }
}

/// Thread pool with `workers` threads; `0` means available parallelism.
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))
}

fn run_all(configs: &[RunConfig], workers: usize) -> Result<Vec<RunSummary>> {
    let pool = worker_pool(workers)?;
    pool.install(|| configs.par_iter().map(|c| run(c).map(|o| o.summary)).collect())
}

pub fn sweep_1d(template: &RunConfig, axis: SweepAxis, values: &[f64], workers: usize) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::EmptyAxis(axis.label().to_string()));
    }
    let configs = values
        .iter()
        .map(|&v| template.with_axis(axis, v))
        .collect::<Result<Vec<_>>>()?;
    let summaries = run_all(&configs, workers)?;
    Ok(SweepResult {
        axes: vec![(axis, values.to_vec())],
        points: values
            .iter()
            .zip(summaries)
            .map(|(&v, summary)| SweepPoint {
                coords: vec![v],
                summary,
            })
            .collect(),
        template: *template,
        code_version: code_version(),
    })
}

pub fn sweep_2d(
    template: &RunConfig,
    axis1: SweepAxis,
    values1: &[f64],
    axis2: SweepAxis,
    values2: &[f64],
    workers: usize,
) -> Result<SweepResult> {
    if axis1 == axis2 {
        return Err(invalid("axes", format!("both axes are {}", axis1.label())));
    }
    for (axis, values) in [(axis1, values1), (axis2, values2)] {
        if values.is_empty() {
            return Err(Error::EmptyAxis(axis.label().to_string()));
        }
    }
    let mut coords = Vec::with_capacity(values1.len() * values2.len());
    let mut configs = Vec::with_capacity(coords.capacity());
    for &a in values1 {
        for &b in values2 {
            configs.push(template.with_axis(axis1, a)?.with_axis(axis2, b)?);
            coords.push(vec![a, b]);
        }
    }
    let summaries = run_all(&configs, workers)?;
    Ok(SweepResult {
        axes: vec![(axis1, values1.to_vec()), (axis2, values2.to_vec())],
        points: coords
            .into_iter()
            .zip(summaries)
            .map(|(coords, summary)| SweepPoint { coords, summary })
            .collect(),
        template: *template,
        code_version: code_version(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioPoint {
    pub delta: f64,
    pub t_f: f64,
    pub fidelity: f64,
    pub peak_omega2: f64,
    /// `Omega'_2(t_f / 2) / sqrt(delta / t_f)`.
    pub midpoint_ratio: f64,
}

/// TQD fidelity on a 3x3 grid of `(delta, t_f)` around the template.
#[derive(Clone, Debug)]
pub struct RatioStudy {
    /// Row-major over `t_f` (slow) and `delta` (fast), each scaled by 1/2, 1, 2.
    pub points: Vec<RatioPoint>,
    /// Fidelity spread along the fixed-ratio diagonal.
    pub iso_spread: f64,
    /// Fidelity spread across ratios at the template `t_f`.
    pub cross_spread: f64,
    /// Relative peak-amplitude mismatch between `(delta, t_f)` and `(2 delta, 2 t_f)`.
    pub peak_scaling_error: f64,
}

impl RatioStudy {
    pub const SCALES: [f64; 3] = [0.5, 1.0, 2.0];

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,tf,delta_over_tf,fidelity,peak_omega2,midpoint_ratio\n");
        for p in &self.points {
            out.push_str(&csv_row(&[
                p.delta,
                p.t_f,
                p.delta / p.t_f,
                p.fidelity,
                p.peak_omega2,
                p.midpoint_ratio,
            ]));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "iso_ratio_spread = {}", fmt_num(self.iso_spread));
        let _ = writeln!(out, "cross_ratio_spread = {}", fmt_num(self.cross_spread));
        let _ = writeln!(out, "peak_scaling_error = {}", fmt_num(self.peak_scaling_error));
        for p in &self.points {
            let _ = writeln!(
                out,
                "delta = {} tf = {} fidelity = {} midpoint_ratio = {}",
                fmt_num(p.delta),
                fmt_num(p.t_f),
                fmt_num(p.fidelity),
                fmt_num(p.midpoint_ratio)
            );
        }
        out
    }
}

fn spread(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    hi - lo
}

pub fn tqd_ratio_study(template: &RunConfig, workers: usize) -> Result<RatioStudy> {
    let MethodParams::Tqd { delta, .. } = template.method else {
        return Err(invalid("method", "the ratio study needs a TQD template"));
    };
    let mut configs = Vec::new();
    for st in RatioStudy::SCALES {
        for sd in RatioStudy::SCALES {
            configs.push(
                template
                    .with_axis(SweepAxis::Tf, template.t_f * st)?
                    .with_axis(SweepAxis::Delta, delta * sd)?,
            );
        }
    }
    let summaries = run_all(&configs, workers)?;
    let mut points = Vec::with_capacity(9);
    for (c, s) in configs.iter().zip(summaries) {
        let schedule = c.schedule()?;
        let MethodParams::Tqd { delta, .. } = c.method else { unreachable!() };
        let mid = schedule.amplitudes(c.t_f / 2.0)[1].norm();
        points.push(RatioPoint {
            delta,
            t_f: c.t_f,
            fidelity: s.fidelity,
            peak_omega2: schedule.peak_omega2(crate::pulses::PULSE_GRID),
            midpoint_ratio: mid / (delta / c.t_f).sqrt(),
        });
    }
    let iso_spread = spread([0, 4, 8].into_iter().map(|i| points[i].fidelity));
    let cross_spread = spread((3..6).map(|i| points[i].fidelity));
    let peak_scaling_error = (points[4].peak_omega2 - points[8].peak_omega2).abs() / points[4].peak_omega2;
    Ok(RatioStudy {
        points,
        iso_spread,
        cross_spread,
        peak_scaling_error,
    })
}

/// `(gamma / g, kappa / g)`.
pub fn rates_in_units_of_g(g_mhz: f64, gamma_mhz: f64, kappa_mhz: f64) -> Result<(f64, f64)> {
    positive("g", g_mhz)?;
    non_negative("gamma", gamma_mhz)?;
    non_negative("kappa", kappa_mhz)?;
    Ok((gamma_mhz / g_mhz, kappa_mhz / g_mhz))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentalSummary {
    pub gamma: f64,
    pub kappa: f64,
    pub lri: RunSummary,
    pub tqd: RunSummary,
}

impl ExperimentalSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "gamma_over_g = {}", fmt_num(self.gamma));
        let _ = writeln!(out, "kappa_over_g = {}", fmt_num(self.kappa));
        let _ = writeln!(out, "fidelity_lri = {}", fmt_num(self.lri.fidelity));
        let _ = writeln!(out, "fidelity_tqd = {}", fmt_num(self.tqd.fidelity));
        out
    }
}

/// Both methods at their defaults under the given physical rates.
pub fn experimental_scenario_with(
    g_mhz: f64,
    gamma_mhz: f64,
    kappa_mhz: f64,
    grid: Grid,
    workers: usize,
) -> Result<ExperimentalSummary> {
    let (gamma, kappa) = rates_in_units_of_g(g_mhz, gamma_mhz, kappa_mhz)?;
    let configs: Vec<RunConfig> = [Method::Lri, Method::Tqd]
        .into_iter()
        .map(|m| RunConfig {
            gamma,
            kappa,
            grid,
            ..RunConfig::defaults(m)
        })
        .collect();
    let s = run_all(&configs, workers)?;
    Ok(ExperimentalSummary {
        gamma,
        kappa,
        lri: s[0],
        tqd: s[1],
    })
}

pub fn experimental_scenario() -> Result<ExperimentalSummary> {
    experimental_scenario_with(
        EXPERIMENT_G_MHZ,
        EXPERIMENT_GAMMA_MHZ,
        EXPERIMENT_KAPPA_MHZ,
        open_grid(),
        0,
    )
}

/// Grid used for master-equation runs in presets: the default step count
/// without the refinement gate.
pub fn open_grid() -> Grid {
    Grid::default().without_gate()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Figure {
    F3a,
    F3b,
    F3c,
    F4,
    F5a,
    F5b,
    F5c,
    F6a,
    F6b,
    F6c,
    F6d,
    F7a,
    F7b,
    F8a,
    F8b,
    F9a,
    F9b,
}

impl Figure {
    pub const ALL: [Figure; 17] = [
        Figure::F3a,
        Figure::F3b,
        Figure::F3c,
        Figure::F4,
        Figure::F5a,
        Figure::F5b,
        Figure::F5c,
        Figure::F6a,
        Figure::F6b,
        Figure::F6c,
        Figure::F6d,
        Figure::F7a,
        Figure::F7b,
        Figure::F8a,
        Figure::F8b,
        Figure::F9a,
        Figure::F9b,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Figure::F3a => "3a",
            Figure::F3b => "3b",
            Figure::F3c => "3c",
            Figure::F4 => "4",
            Figure::F5a => "5a",
            Figure::F5b => "5b",
            Figure::F5c => "5c",
            Figure::F6a => "6a",
            Figure::F6b => "6b",
            Figure::F6c => "6c",
            Figure::F6d => "6d",
            Figure::F7a => "7a",
            Figure::F7b => "7b",
            Figure::F8a => "8a",
            Figure::F8b => "8b",
            Figure::F9a => "9a",
            Figure::F9b => "9b",
        }
    }

    pub fn parse(s: &str) -> Option<Figure> {
        Figure::ALL.into_iter().find(|f| f.label() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReproduceOptions {
    pub workers: usize,
    pub points_1d: usize,
    pub points_2d: usize,
    /// Grid for closed-system runs.
    pub grid: Grid,
    /// Grid for master-equation runs.
    pub open_grid: Grid,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions {
            workers: 0,
            points_1d: DEFAULT_POINTS_1D,
            points_2d: DEFAULT_POINTS_2D,
            grid: Grid::default(),
            open_grid: open_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureOutput {
    pub figure: Figure,
    pub csv: String,
    pub svg: String,
    pub summary: String,
}

const SAMPLE_POINTS: usize = 401;

fn pulse_figure(schedule: &PulseSchedule, title: &str, lines: &[(usize, bool, &str)]) -> (String, String, String) {
    let csv = schedule.to_csv(SAMPLE_POINTS);
    let ts = linspace(0.0, schedule.t_f(), SAMPLE_POINTS);
    let series: Vec<Series> = lines
        .iter()
        .map(|&(line, imag, label)| {
            let y = ts
                .iter()
                .map(|&t| {
                    let a = schedule.amplitudes(t)[line];
                    if imag {
                        a.im
                    } else {
                        a.re
                    }
                })
                .collect();
            Series::new(label, ts.clone(), y)
        })
        .collect();
    let svg = line_plot(title, "t g", "amplitude / g", &series);
    let summary = format!(
        "tf = {}\npeak_omega2 = {}\n",
        fmt_num(schedule.t_f()),
        fmt_num(schedule.peak_omega2(crate::pulses::PULSE_GRID))
    );
    (csv, svg, summary)
}

fn population_figure(out: &RunOutput, title: &str) -> (String, String, String) {
    let t = &out.trajectory.times;
    let cols = [0usize, 16, 17, 18, 19];
    let mut csv = String::from("t,pop_phi1,pop_phi17,pop_phi18,pop_phi19,pop_phi20\n");
    let pops: Vec<Vec<f64>> = (0..t.len()).map(|k| out.trajectory.populations(k)).collect();
    for (k, p) in pops.iter().enumerate() {
        let mut row = vec![t[k]];
        row.extend(cols.iter().map(|&i| p[i]));
        csv.push_str(&csv_row(&row));
    }
    let series: Vec<Series> = cols
        .iter()
        .map(|&i| Series::new(format!("phi{}", i + 1), t.clone(), pops.iter().map(|p| p[i]).collect()))
        .collect();
    let svg = line_plot(title, "t g", "population", &series);
    let last = pops.last().expect("nonempty trajectory");
    let mut summary = out.summary_text();
    for &i in &cols {
        let _ = writeln!(summary, "final_pop_phi{} = {}", i + 1, fmt_num(last[i]));
    }
    (csv, svg, summary)
}

/// Closed-system runs of both methods at their defaults, sharing one time grid.
fn both_methods(grid: Grid) -> Result<(RunOutput, RunOutput)> {
    let lri = run(&RunConfig {
        grid,
        ..RunConfig::defaults(Method::Lri)
    })?;
    let tqd = run(&RunConfig {
        grid,
        ..RunConfig::defaults(Method::Tqd)
    })?;
    Ok((lri, tqd))
}

fn sweep_figure(
    result: SweepResult,
    title: &str,
) -> (String, String, String) {
    (result.to_csv(), result.to_svg(title), result.metadata())
}

/// Data, plot and summary behind one figure.
pub fn reproduce(figure: Figure, opts: &ReproduceOptions) -> Result<FigureOutput> {
    let n1 = opts.points_1d;
    let n2 = opts.points_2d;
    let w = opts.workers;
    let lri = RunConfig {
        grid: opts.grid,
        ..RunConfig::defaults(Method::Lri)
    };
    let tqd = RunConfig {
        grid: opts.grid,
        ..RunConfig::defaults(Method::Tqd)
    };
    let open = |c: RunConfig| RunConfig {
        grid: opts.open_grid,
        ..c
    };
    let tf_range = linspace(10.0, 200.0, n1);
    let (csv, svg, summary) = match figure {
        Figure::F3a => sweep_figure(sweep_1d(&lri, SweepAxis::Tf, &tf_range, w)?, "LRI fidelity vs t_f"),
        Figure::F3b => sweep_figure(
            sweep_1d(&lri, SweepAxis::Epsilon, &linspace(0.05, 0.45, n1), w)?,
            "LRI fidelity vs epsilon",
        ),
        Figure::F3c => sweep_figure(
            sweep_2d(
                &lri,
                SweepAxis::Tf,
                &linspace(10.0, 200.0, n2),
                SweepAxis::Epsilon,
                &linspace(0.05, 0.45, n2),
                w,
            )?,
            "LRI fidelity vs t_f and epsilon",
        ),
        Figure::F4 => pulse_figure(
            &PulseSchedule::stirap_default(DEFAULT_TF)?,
            "STIRAP pulses",
            &[(0, false, "Omega1"), (1, false, "Omega2")],
        ),
        Figure::F5a => sweep_figure(
            sweep_1d(&tqd, SweepAxis::Delta, &linspace(0.5, 12.0, n1), w)?,
            "TQD fidelity vs delta",
        ),
        Figure::F5b => sweep_figure(sweep_1d(&tqd, SweepAxis::Tf, &tf_range, w)?, "TQD fidelity vs t_f"),
        Figure::F5c => sweep_figure(
            sweep_2d(
                &tqd,
                SweepAxis::Delta,
                &linspace(0.5, 12.0, n2),
                SweepAxis::Tf,
                &linspace(10.0, 200.0, n2),
                w,
            )?,
            "TQD fidelity vs delta and t_f",
        ),
        Figure::F6a => pulse_figure(
            &lri.schedule()?,
            "LRI pulses",
            &[(0, false, "Omega1"), (1, false, "Omega2")],
        ),
        Figure::F6b => population_figure(&run(&lri)?, "LRI populations"),
        Figure::F6c => pulse_figure(
            &tqd.schedule()?,
            "TQD pulse",
            &[(1, false, "Omega'2"), (0, true, "Im Omega'1")],
        ),
        Figure::F6d => population_figure(&run(&tqd)?, "TQD populations"),
        Figure::F7a => {
            let (a, b) = both_methods(opts.grid)?;
            let t = &a.trajectory.times;
            let mut csv = String::from("t,lri_p_atomic,lri_p_cavity_fiber,tqd_p_atomic,tqd_p_cavity_fiber\n");
            let mut cols = vec![Vec::new(); 4];
            for (k, &tk) in t.iter().enumerate() {
                let (pa, pc) = excited_populations(&a.trajectory.populations(k));
                let (qa, qc) = excited_populations(&b.trajectory.populations(k));
                for (col, v) in cols.iter_mut().zip([pa, pc, qa, qc]) {
                    col.push(v);
                }
                csv.push_str(&csv_row(&[tk, pa, pc, qa, qc]));
            }
            let labels = ["LRI P_a", "LRI P_cf", "TQD P_a", "TQD P_cf"];
            let series: Vec<Series> = labels
                .iter()
                .zip(cols)
                .enumerate()
                .map(|(i, (l, y))| {
                    let s = Series::new(*l, t.clone(), y);
                    if i >= 2 {
                        s.dashed()
                    } else {
                        s
                    }
                })
                .collect();
            let summary = format!(
                "lri_peak_p_atomic = {}\nlri_peak_p_cavity_fiber = {}\ntqd_peak_p_atomic = {}\ntqd_peak_p_cavity_fiber = {}\n",
                fmt_num(a.summary.peak_atomic),
                fmt_num(a.summary.peak_cavity_fiber),
                fmt_num(b.summary.peak_atomic),
                fmt_num(b.summary.peak_cavity_fiber)
            );
            (csv, line_plot("Excited populations", "t g", "population", &series), summary)
        }
        Figure::F7b => {
            let (a, b) = both_methods(opts.grid)?;
            let t = &a.trajectory.times;
            let p = CouplingParams::resonant();
            let tl = named_state(NamedState::TargetLri, &p, COHERENT_DIM)?;
            let tt = named_state(NamedState::TargetTqd, &p, COHERENT_DIM)?;
            let mut csv = String::from("t,fidelity_lri,fidelity_tqd\n");
            let (mut fl, mut ft) = (Vec::new(), Vec::new());
            for k in 0..t.len() {
                fl.push(a.trajectory.fidelity_at(k, &tl)?);
                ft.push(b.trajectory.fidelity_at(k, &tt)?);
                csv.push_str(&csv_row(&[t[k], fl[k], ft[k]]));
            }
            let series = [Series::new("LRI", t.clone(), fl), Series::new("TQD", t.clone(), ft).dashed()];
            let summary = format!(
                "final_fidelity_lri = {}\nfinal_fidelity_tqd = {}\n",
                fmt_num(a.summary.fidelity),
                fmt_num(b.summary.fidelity)
            );
            (csv, line_plot("Fidelity vs time", "t g", "fidelity", &series), summary)
        }
        Figure::F8a => {
            let d = linspace(-0.1, 0.1, n2);
            sweep_figure(
                sweep_2d(&lri, SweepAxis::Dtf, &d, SweepAxis::Deps, &d, w)?,
                "LRI fidelity vs dt_f/t_f and deps/eps",
            )
        }
        Figure::F8b => {
            let d = linspace(-0.1, 0.1, n2);
            sweep_figure(
                sweep_2d(&tqd, SweepAxis::Dtf, &d, SweepAxis::Ddelta, &d, w)?,
                "TQD fidelity vs dt_f/t_f and ddelta/delta",
            )
        }
        Figure::F9a | Figure::F9b => {
            let r = linspace(0.0, 0.02, n2);
            let (template, title) = if figure == Figure::F9a {
                (open(lri), "LRI fidelity vs kappa and gamma")
            } else {
                (open(tqd), "TQD fidelity vs kappa and gamma")
            };
            sweep_figure(sweep_2d(&template, SweepAxis::Kappa, &r, SweepAxis::Gamma, &r, w)?, title)
        }
    };
    Ok(FigureOutput {
        figure,
        csv,
        svg,
        summary,
    })
}

/// One line of the property suite.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub value: f64,
    pub requirement: String,
    pub passed: bool,
}

impl PropertyCheck {
    fn new(name: &'static str, value: f64, requirement: impl Into<String>, passed: bool) -> Self {
        PropertyCheck {
            name,
            value,
            requirement: requirement.into(),
            passed,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} = {} (required {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            fmt_num(self.value),
            self.requirement
        )
    }
}

/// Dimension of the numerical kernel of `H_acf` on the coherent states.
pub fn kernel_dimension() -> Result<usize> {
    let h = build_h_acf(&OrderedBasis::coherent(), &CouplingParams::resonant());
    match dark_subspace(&h) {
        Ok(d) => Ok(d.dim()),
        Err(Error::KernelDimension { found, .. }) => Ok(found),
        Err(e) => Err(e),
    }
}

/// Largest `|| i dI/dt - [H_0, I] ||` over a uniform grid for the default
/// invariant-based pulses.
pub fn max_commutation_residual(t_f: f64, epsilon: f64, points: usize) -> Result<f64> {
    let schedule = PulseSchedule::lri(t_f, epsilon)?;
    let params = InvariantParams::linear(t_f, epsilon);
    Ok(linspace(0.0, t_f, points)
        .into_iter()
        .map(|t| commutation_residual(&params, &schedule, t))
        .fold(0.0, f64::max))
}

/// Largest deviation of the quadrature phases from their closed forms.
pub fn lr_phase_error(t_f: f64, epsilon: f64) -> Result<f64> {
    let schedule = PulseSchedule::lri(t_f, epsilon)?;
    let params = InvariantParams::linear(t_f, epsilon);
    Ok(LrMode::ALL
        .into_iter()
        .map(|m| (lr_phase(m, &schedule, &params) - lr_phase_closed_form(m, epsilon)).abs())
        .fold(0.0, f64::max))
}

/// Norm of `[H_0, I]` at `t = 0` and `t = t_f`, the larger of the two.
pub fn boundary_commutator(t_f: f64, epsilon: f64) -> Result<f64> {
    let schedule = PulseSchedule::lri(t_f, epsilon)?;
    let params = InvariantParams::linear(t_f, epsilon);
    Ok([0.0, t_f]
        .into_iter()
        .map(|t| {
            let [o1, o2, _] = schedule.amplitudes(t);
            let h = build_h0_eff(o1, o2).into_matrix();
            let i = build_invariant(&params, t).into_matrix();
            (&h * &i - &i * &h).norm()
        })
        .fold(0.0, f64::max))
}

/// Largest population error between the full TQD run and the two-level
/// model `i (|Omega'_2|^2 / 3 delta_eff) |Psi_1><Psi_2| + h.c.`, over the
/// populations of `Psi_1` and `Psi_2` at every recorded time.
pub fn tqd_two_level_error(grid: Grid) -> Result<f64> {
    let config = RunConfig {
        grid,
        ..RunConfig::defaults(Method::Tqd)
    };
    let full = run(&config)?;
    let schedule = full.schedule.clone();
    let MethodParams::Tqd { delta, calibration, .. } = config.method else { unreachable!() };
    let delta_eff = calibration.effective_detuning(delta);
    let two = FnHamiltonian::new(2, |t| {
        build_h_eff_eliminated(schedule.amplitudes(t)[1], delta_eff).expect("positive detuning")
    });
    let reduced = evolve_schrodinger(&two, &StateVector::basis_state(2, 0), schedule.t_f(), &grid)?;
    let p = CouplingParams::resonant();
    let psi1 = named_state(NamedState::Psi1, &p, COHERENT_DIM)?;
    let psi2 = named_state(NamedState::Psi2, &p, COHERENT_DIM)?;
    let e2 = StateVector::basis_state(2, 1);
    let e1 = StateVector::basis_state(2, 0);
    let mut worst: f64 = 0.0;
    for k in 0..full.trajectory.len() {
        let f1 = full.trajectory.fidelity_at(k, &psi1)?;
        let f2 = full.trajectory.fidelity_at(k, &psi2)?;
        let r1 = reduced.fidelity_at(k, &e1)?;
        let r2 = reduced.fidelity_at(k, &e2)?;
        worst = worst.max((f1 - r1).abs()).max((f2 - r2).abs());
    }
    Ok(worst)
}

/// Infidelity between the full resonant LRI run and the embedded solution of
/// the three-level Zeno model driven by the same pulses.
pub fn zeno_equivalence_error(t_f: f64, grid: Grid) -> Result<f64> {
    let config = RunConfig {
        t_f,
        grid,
        ..RunConfig::defaults(Method::Lri)
    };
    let full = run(&config)?;
    let schedule = full.schedule.clone();
    let eff = FnHamiltonian::new(3, |t| {
        let [o1, o2, _] = schedule.amplitudes(t);
        build_h0_eff(o1, o2)
    });
    let reduced = evolve_schrodinger(&eff, &StateVector::basis_state(3, 0), t_f, &grid)?;
    let States::Pure(states) = &reduced.states else { unreachable!() };
    let last = states.last().expect("nonempty trajectory");
    let coeffs: [C64; 3] = [last.amplitude(0), last.amplitude(1), last.amplitude(2)];
    let embedded = embed_effective(&coeffs, &CouplingParams::resonant())?;
    Ok(1.0 - full.trajectory.final_fidelity(&embedded)?)
}

/// Numbers checked by the property suite, with the thresholds they must meet.
pub struct PropertySuite {
    pub checks: Vec<PropertyCheck>,
}

impl PropertySuite {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn report(&self) -> String {
        self.checks.iter().map(|c| c.line() + "\n").collect()
    }
}

pub fn property_suite() -> Result<PropertySuite> {
    let mut checks = Vec::new();
    let kdim = kernel_dimension()?;
    checks.push(PropertyCheck::new("kernel_dimension", kdim as f64, "== 6", kdim == 6));

    let coherent = OrderedBasis::coherent();
    let closed = close_under_jumps(&coherent, &jump_channels(), crate::statespace::DEFAULT_CLOSURE_CAP)?;
    let added = closed.len() - coherent.len();
    checks.push(PropertyCheck::new("closure_added_states", added as f64, "== 2", added == 2));

    let h = build_h0_prime_eff(C64::new(0.3, 0.1), C64::new(-0.2, 0.4), 1.5);
    let herm = h.hermiticity_residual();
    checks.push(PropertyCheck::new("effective_hamiltonian_hermiticity", herm, "< 1e-12", herm < 1e-12));

    let comm = max_commutation_residual(DEFAULT_TF, DEFAULT_EPSILON, 401)?;
    checks.push(PropertyCheck::new("invariant_commutation_residual", comm, "< 1e-8", comm < 1e-8));

    let phase = lr_phase_error(DEFAULT_TF, DEFAULT_EPSILON)?;
    checks.push(PropertyCheck::new("lr_phase_error", phase, "< 1e-6", phase < 1e-6));

    let open = run(&RunConfig {
        gamma: 0.02,
        kappa: 0.02,
        grid: open_grid(),
        ..RunConfig::defaults(Method::Lri)
    })?;
    let trace = open.summary.diagnostics.drift;
    checks.push(PropertyCheck::new("lindblad_trace_drift", trace, "< 1e-6", trace < 1e-6));
    let min_eig = open.summary.diagnostics.min_eigenvalue.unwrap_or(0.0);
    checks.push(PropertyCheck::new("lindblad_min_eigenvalue", min_eig, ">= -1e-7", min_eig >= -1e-7));

    let closed_run = run(&RunConfig::defaults(Method::Lri))?;
    let norm = closed_run.summary.diagnostics.drift;
    checks.push(PropertyCheck::new("schrodinger_norm_drift", norm, "< 1e-6", norm < 1e-6));

    let two = tqd_two_level_error(Grid::default())?;
    checks.push(PropertyCheck::new("tqd_two_level_population_error", two, "< 0.05", two < 0.05));

    let zeno = zeno_equivalence_error(400.0, Grid::default())?;
    checks.push(PropertyCheck::new("zeno_equivalence_infidelity", zeno, "< 1e-2", zeno < 1e-2));

    let boundary = boundary_commutator(DEFAULT_TF, DEFAULT_EPSILON)?;
    checks.push(PropertyCheck::new("boundary_commutator", boundary, "< 1e-8", boundary < 1e-8));

    // angle bookkeeping shared by both schemes
    let theta_end = mixing_angle(&PulseSchedule::stirap_default(DEFAULT_TF)?).theta(DEFAULT_TF);
    let theta_err = (theta_end - crate::pulses::atan2_const()).abs();
    checks.push(PropertyCheck::new("stirap_final_mixing_angle_error", theta_err, "< 1e-3", theta_err < 1e-3));

    Ok(PropertySuite { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coarse(method: Method) -> RunConfig {
        RunConfig {
            grid: Grid::with_steps(4000).without_gate(),
            ..RunConfig::defaults(method)
        }
    }

    #[test]
    fn overrides_reject_irrelevant_parameters() {
        let bad = RunOverrides {
            delta: Some(6.0),
            ..Default::default()
        };
        assert!(RunConfig::from_overrides(Method::Lri, &bad).is_err());
        let bad = RunOverrides {
            epsilon: Some(0.2),
            ..Default::default()
        };
        assert!(RunConfig::from_overrides(Method::Tqd, &bad).is_err());
        let bad = RunOverrides {
            tau_frac: Some(0.1),
            ..Default::default()
        };
        assert!(RunConfig::from_overrides(Method::Lri, &bad).is_err());
        let bad = RunOverrides {
            omega0: Some(2.0),
            ..Default::default()
        };
        assert!(RunConfig::from_overrides(Method::Tqd, &bad).is_err());
        let ok = RunOverrides {
            tau_frac: Some(0.1),
            omega0: Some(2.0),
            ..Default::default()
        };
        assert!(RunConfig::from_overrides(Method::Stirap, &ok).is_ok());
    }

    #[test]
    fn overrides_validate_values() {
        for o in [
            RunOverrides {
                t_f: Some(-1.0),
                ..Default::default()
            },
            RunOverrides {
                gamma: Some(-0.1),
                ..Default::default()
            },
            RunOverrides {
                epsilon: Some(2.0),
                ..Default::default()
            },
            RunOverrides {
                dtf: Some(-1.5),
                ..Default::default()
            },
            RunOverrides {
                steps: Some(0),
                ..Default::default()
            },
        ] {
            assert!(RunConfig::from_overrides(Method::Lri, &o).is_err(), "{o:?}");
        }
    }

    #[test]
    fn axes_apply_only_to_their_method() {
        let lri = RunConfig::defaults(Method::Lri);
        assert!(lri.with_axis(SweepAxis::Delta, 3.0).is_err());
        assert!(lri.with_axis(SweepAxis::Ddelta, 0.1).is_err());
        assert!(lri.with_axis(SweepAxis::TauFrac, 0.1).is_err());
        assert_eq!(
            lri.with_axis(SweepAxis::Epsilon, 0.2).unwrap().method,
            MethodParams::Lri { epsilon: 0.2 }
        );
        let tqd = RunConfig::defaults(Method::Tqd);
        assert!(tqd.with_axis(SweepAxis::Deps, 0.1).is_err());
        assert!(tqd.with_axis(SweepAxis::TFrac, 0.2).is_ok());
        for a in SweepAxis::ALL {
            assert_eq!(SweepAxis::parse(a.label()), Some(a));
        }
        assert_eq!(SweepAxis::parse("tau_frac"), Some(SweepAxis::TauFrac));
    }

    #[test]
    fn deviations_act_on_actual_values() {
        let c = RunConfig::defaults(Method::Tqd)
            .with_axis(SweepAxis::Ddelta, 0.1)
            .unwrap()
            .with_axis(SweepAxis::Dtf, -0.1)
            .unwrap();
        let s = c.schedule().unwrap();
        assert_relative_eq!(s.t_f(), 72.0, epsilon = 1e-12);
        assert_relative_eq!(s.tqd_radicand_detuning().unwrap(), 6.6 * 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(c.coupling().unwrap().delta, 6.6, epsilon = 1e-12);
        let shifted = RunConfig::defaults(Method::Tqd).with_axis(SweepAxis::Delta, 6.6).unwrap();
        let grid = Grid::with_steps(4000).without_gate();
        let a = run(&RunConfig { grid, ..c }).unwrap().summary.fidelity;
        let b = run(&RunConfig {
            grid,
            ..shifted.with_axis(SweepAxis::Dtf, -0.1).unwrap()
        })
        .unwrap()
        .summary
        .fidelity;
        assert_relative_eq!(a, b, epsilon = 1e-10);
        let l = RunConfig::defaults(Method::Lri).with_axis(SweepAxis::Deps, 0.1).unwrap();
        assert_relative_eq!(l.schedule().unwrap().epsilon().unwrap(), 0.177 * 1.1, epsilon = 1e-12);
    }

    #[test]
    fn slug_and_describe_are_parameter_derived() {
        let c = RunConfig::defaults(Method::Lri);
        assert_eq!(c.slug(), "lri_tf80_eps0p177");
        let o = RunConfig {
            gamma: 0.02,
            ..RunConfig::defaults(Method::Tqd)
        };
        assert_eq!(o.slug(), "tqd_tf80_delta6_tau0p14_T0p19_gamma0p02_kappa0");
        assert!(c.describe().contains("epsilon = 1.77000000000e-1\n"));
        assert!(!c.describe().contains("delta"));
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
        let v = linspace(0.05, 0.45, 41);
        assert_eq!(v[40], 0.45);
        assert_relative_eq!(v[1] - v[0], 0.01, epsilon = 1e-15);
    }

    #[test]
    fn empty_and_repeated_axes_are_rejected() {
        let c = coarse(Method::Lri);
        assert!(matches!(sweep_1d(&c, SweepAxis::Tf, &[], 1), Err(Error::EmptyAxis(_))));
        assert!(sweep_2d(&c, SweepAxis::Tf, &[80.0], SweepAxis::Tf, &[80.0], 1).is_err());
        assert!(matches!(
            sweep_2d(&c, SweepAxis::Tf, &[80.0], SweepAxis::Epsilon, &[], 1),
            Err(Error::EmptyAxis(_))
        ));
    }

    #[test]
    fn single_value_sweep_matches_run() {
        let c = coarse(Method::Lri);
        let s = sweep_1d(&c, SweepAxis::Epsilon, &[0.177], 1).unwrap();
        let r = run(&c).unwrap();
        assert_eq!(s.points[0].summary, r.summary);
        assert!(s.to_csv().starts_with("epsilon,fidelity,peak_p_atomic,peak_p_cavity_fiber\n"));
    }

    #[test]
    fn sweep_order_matches_input_order() {
        let c = coarse(Method::Lri);
        let values = [100.0, 40.0, 80.0];
        let s = sweep_1d(&c, SweepAxis::Tf, &values, 2).unwrap();
        for (p, v) in s.points.iter().zip(values) {
            assert_eq!(p.coords, vec![v]);
            let single = run(&c.with_axis(SweepAxis::Tf, v).unwrap()).unwrap();
            assert_eq!(p.summary.fidelity, single.summary.fidelity);
        }
        let two = sweep_2d(&c, SweepAxis::Tf, &[60.0, 80.0], SweepAxis::Epsilon, &[0.15, 0.2], 2).unwrap();
        let coords: Vec<_> = two.points.iter().map(|p| p.coords.clone()).collect();
        assert_eq!(coords, vec![vec![60.0, 0.15], vec![60.0, 0.2], vec![80.0, 0.15], vec![80.0, 0.2]]);
    }

    #[test]
    fn closed_lri_run_reaches_the_target() {
        let out = run(&RunConfig::defaults(Method::Lri)).unwrap();
        assert!((out.summary.fidelity - 0.996).abs() < 3e-3, "{}", out.summary.fidelity);
        assert!(out.summary.diagnostics.gate_passed);
        let last = out.trajectory.final_populations();
        for i in [0, 16, 17, 18, 19] {
            assert!((last[i] - 0.2).abs() < 0.02, "pop {i} = {}", last[i]);
        }
        let csv = out.trajectory_csv().unwrap();
        assert_eq!(csv.lines().count(), 1 + 401);
    }

    #[test]
    fn rates_convert_from_mhz() {
        let (g, k) = rates_in_units_of_g(750.0, 3.5, 2.62).unwrap();
        assert_relative_eq!(g, 4.6667e-3, epsilon = 1e-7);
        assert_relative_eq!(k, 3.4933e-3, epsilon = 1e-7);
        assert!(rates_in_units_of_g(0.0, 1.0, 1.0).is_err());
        assert!(rates_in_units_of_g(750.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn zero_rates_reduce_to_the_closed_run() {
        let grid = Grid::with_steps(4000).without_gate();
        let s = experimental_scenario_with(750.0, 0.0, 0.0, grid, 1).unwrap();
        assert!(!s.lri.open && !s.tqd.open);
        assert_eq!(s.lri, run(&coarse(Method::Lri)).unwrap().summary);
    }

    #[test]
    fn figure_labels_round_trip() {
        for f in Figure::ALL {
            assert_eq!(Figure::parse(f.label()), Some(f));
        }
        assert_eq!(Figure::parse("2"), None);
    }

    #[test]
    fn pulse_figures_are_cheap_and_deterministic() {
        let opts = ReproduceOptions::default();
        let a = reproduce(Figure::F4, &opts).unwrap();
        let b = reproduce(Figure::F4, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.csv.lines().count(), 402);
        let c = reproduce(Figure::F6c, &opts).unwrap();
        assert!(c.summary.contains("peak_omega2"));
    }

    #[test]
    fn boundary_commutator_is_nonzero_for_the_linear_family() {
        let b = boundary_commutator(80.0, 0.177).unwrap();
        let expected = 2f64.sqrt() * 0.177f64.cos() * crate::pulses::atan2_const() / 80.0 / 3f64.sqrt();
        assert_relative_eq!(b, expected, max_relative = 1e-9);
    }
}
