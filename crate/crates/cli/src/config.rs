//! Line-oriented `key = value` configuration files.

use std::path::{Path, PathBuf};

use treeqed::experiments::RunOverrides;
use treeqed::pulses::TqdCalibration;
use treeqed::Method;

use crate::Failure;

/// Values that can come from a config file or from flags.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub method: Option<Method>,
    pub run: RunOverrides,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Settings {
    /// `self` with unset fields taken from `base`.
    pub fn or(self, base: Settings) -> Settings {
        let (a, b) = (self.run, base.run);
        Settings {
            method: self.method.or(base.method),
            run: RunOverrides {
                t_f: a.t_f.or(b.t_f),
                epsilon: a.epsilon.or(b.epsilon),
                delta: a.delta.or(b.delta),
                tau_frac: a.tau_frac.or(b.tau_frac),
                t_frac: a.t_frac.or(b.t_frac),
                omega0: a.omega0.or(b.omega0),
                gamma: a.gamma.or(b.gamma),
                kappa: a.kappa.or(b.kappa),
                dtf: a.dtf.or(b.dtf),
                deps: a.deps.or(b.deps),
                ddelta: a.ddelta.or(b.ddelta),
                calibration: a.calibration.or(b.calibration),
                steps: a.steps.or(b.steps),
            },
            out: self.out.or(base.out),
            workers: self.workers.or(base.workers),
        }
    }
}

pub fn parse_method(s: &str) -> Result<Method, Failure> {
    Method::parse(s).ok_or_else(|| {
        Failure::input(format!(
            "method: unknown method `{s}` (expected lri, tqd or stirap)"
        ))
    })
}

pub fn parse_calibration(s: &str) -> Result<TqdCalibration, Failure> {
    match s {
        "nominal" => Ok(TqdCalibration::Nominal),
        "zeno-projected" | "zeno_projected" => Ok(TqdCalibration::ZenoProjected { g: 1.0, v: 1.0 }),
        _ => Err(Failure::input(format!(
            "calibration: unknown value `{s}` (expected nominal or zeno-projected)"
        ))),
    }
}

fn number(key: &str, value: &str) -> Result<f64, Failure> {
    value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Failure::input(format!("{key}: expected a number, got `{value}`")))
}

fn count(key: &str, value: &str) -> Result<usize, Failure> {
    value.parse::<usize>().map_err(|_| {
        Failure::input(format!(
            "{key}: expected a non-negative integer, got `{value}`"
        ))
    })
}

/// Parse config text. Blank lines and lines starting with `#` are skipped.
pub fn parse(text: &str) -> Result<Settings, Failure> {
    let mut s = Settings::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::input(format!(
                "config line {}: expected `key = value`",
                n + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        let r = &mut s.run;
        match key.replace('-', "_").as_str() {
            "method" => s.method = Some(parse_method(value)?),
            "tf" => r.t_f = Some(number(key, value)?),
            "epsilon" => r.epsilon = Some(number(key, value)?),
            "delta" => r.delta = Some(number(key, value)?),
            "tau_frac" => r.tau_frac = Some(number(key, value)?),
            "T_frac" => r.t_frac = Some(number(key, value)?),
            "omega0" => r.omega0 = Some(number(key, value)?),
            "gamma" => r.gamma = Some(number(key, value)?),
            "kappa" => r.kappa = Some(number(key, value)?),
            "dtf" => r.dtf = Some(number(key, value)?),
            "deps" => r.deps = Some(number(key, value)?),
            "ddelta" => r.ddelta = Some(number(key, value)?),
            "calibration" => r.calibration = Some(parse_calibration(value)?),
            "grid" => r.steps = Some(count(key, value)?),
            "workers" => s.workers = Some(count(key, value)?),
            "out" => s.out = Some(PathBuf::from(value)),
            _ => {
                return Err(Failure::input(format!(
                    "unknown config key `{key}` (line {})",
                    n + 1
                )))
            }
        }
    }
    Ok(s)
}

pub fn load(path: &Path) -> Result<Settings, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("config: cannot read {}: {e}", path.display())))?;
    parse(&text)
}
