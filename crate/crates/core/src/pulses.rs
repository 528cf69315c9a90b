//! Drive schedules: invariant-based pulses, Gaussian STIRAP pulses, and the
//! transitionless-driving pulse derived from the STIRAP mixing angle.
//!
//! All schedules are evaluated lazily at whatever times the integrator asks
//! for. Amplitudes are returned as `[Omega_1, Omega_2, Omega_3]`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::hamiltonians::CouplingParams;

/// Number of grid points used for θ̇ sign checks and pulse tables.
pub const PULSE_GRID: usize = 2001;

/// `arctan 2`, the final mixing angle of every schedule here.
pub fn atan2_const() -> f64 {
    2f64.atan()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Lri,
    Stirap,
    Tqd,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Lri => "lri",
            Method::Stirap => "stirap",
            Method::Tqd => "tqd",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_lowercase().as_str() {
            "lri" => Some(Method::Lri),
            "stirap" | "stirap-reference" => Some(Method::Stirap),
            "tqd" => Some(Method::Tqd),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

type AngleFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Auxiliary angles `nu(t)` and `beta(t)` of the invariant.
#[derive(Clone)]
pub enum AuxiliaryAngles {
    /// `nu = epsilon`, `beta = arctan(2) t / t_f`.
    Linear { t_f: f64, epsilon: f64 },
    /// Arbitrary smooth angles; derivatives by central differences.
    Custom { t_f: f64, nu: AngleFn, beta: AngleFn },
}

impl fmt::Debug for AuxiliaryAngles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuxiliaryAngles::Linear { t_f, epsilon } => f
                .debug_struct("Linear")
                .field("t_f", t_f)
                .field("epsilon", epsilon)
                .finish(),
            AuxiliaryAngles::Custom { t_f, .. } => {
                f.debug_struct("Custom").field("t_f", t_f).finish_non_exhaustive()
            }
        }
    }
}

impl AuxiliaryAngles {
    pub fn linear(t_f: f64, epsilon: f64) -> Self {
        AuxiliaryAngles::Linear { t_f, epsilon }
    }

    pub fn custom(
        t_f: f64,
        nu: impl Fn(f64) -> f64 + Send + Sync + 'static,
        beta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        AuxiliaryAngles::Custom {
            t_f,
            nu: Arc::new(nu),
            beta: Arc::new(beta),
        }
    }

    pub fn t_f(&self) -> f64 {
        match self {
            AuxiliaryAngles::Linear { t_f, .. } | AuxiliaryAngles::Custom { t_f, .. } => *t_f,
        }
    }

    fn step(&self) -> f64 {
        self.t_f() * 1e-6
    }

    pub fn nu(&self, t: f64) -> f64 {
        match self {
            AuxiliaryAngles::Linear { epsilon, .. } => *epsilon,
            AuxiliaryAngles::Custom { nu, .. } => nu(t),
        }
    }

    pub fn beta(&self, t: f64) -> f64 {
        match self {
            AuxiliaryAngles::Linear { t_f, .. } => atan2_const() * t / t_f,
            AuxiliaryAngles::Custom { beta, .. } => beta(t),
        }
    }

    pub fn nu_dot(&self, t: f64) -> f64 {
        match self {
            AuxiliaryAngles::Linear { .. } => 0.0,
            AuxiliaryAngles::Custom { nu, .. } => {
                let h = self.step();
                (nu(t + h) - nu(t - h)) / (2.0 * h)
            }
        }
    }

    pub fn beta_dot(&self, t: f64) -> f64 {
        match self {
            AuxiliaryAngles::Linear { t_f, .. } => atan2_const() / t_f,
            AuxiliaryAngles::Custom { beta, .. } => {
                let h = self.step();
                (beta(t + h) - beta(t - h)) / (2.0 * h)
            }
        }
    }
}

/// Gaussian STIRAP parameters, all in absolute time units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StirapParams {
    pub t_f: f64,
    pub omega0: f64,
    pub tau: f64,
    pub width: f64,
}

impl StirapParams {
    pub const TAU_FRAC: f64 = 0.14;
    pub const WIDTH_FRAC: f64 = 0.19;

    /// `tau = 0.14 t_f`, `T = 0.19 t_f`, `Omega_0 = 1`.
    pub fn defaults(t_f: f64) -> Self {
        StirapParams {
            t_f,
            omega0: 1.0,
            tau: Self::TAU_FRAC * t_f,
            width: Self::WIDTH_FRAC * t_f,
        }
    }

    fn gaussians(&self, t: f64) -> [(f64, f64); 2] {
        let c = self.t_f / 2.0;
        let w2 = self.width * self.width;
        // (value, derivative) of the late (t_f/2 + tau) and early (t_f/2 - tau) Gaussians
        [c + self.tau, c - self.tau].map(|centre| {
            let x = t - centre;
            let g = (-x * x / w2).exp();
            (g, -2.0 * x / w2 * g)
        })
    }
}

/// How the TQD amplitude maps the STIRAP mixing rate onto a drive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TqdCalibration {
    /// `Omega'_2^2 = 3 delta theta_dot`.
    Nominal,
    /// `Omega'_2^2 = 3 delta_eff theta_dot` with the detuning actually seen by
    /// `Psi_D`, `delta_eff = 2 v^2 delta / (2 v^2 + g^2)`.
    ZenoProjected { g: f64, v: f64 },
}

impl TqdCalibration {
    pub fn effective_detuning(&self, delta: f64) -> f64 {
        match *self {
            TqdCalibration::Nominal => delta,
            TqdCalibration::ZenoProjected { g, v } => CouplingParams { g, v, delta }.projected_detuning(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TqdCalibration::Nominal => "nominal",
            TqdCalibration::ZenoProjected { .. } => "zeno-projected",
        }
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Zero,
    LriClosedForm { epsilon: f64 },
    LriGeneral { angles: AuxiliaryAngles },
    Stirap(StirapParams),
    Tqd {
        stirap: StirapParams,
        delta: f64,
        calibration: TqdCalibration,
    },
}

/// Named time-dependent drive amplitudes on `[0, t_f]`.
#[derive(Clone, Debug)]
pub struct PulseSchedule {
    t_f: f64,
    shape: Shape,
}

fn check_tf(t_f: f64) -> Result<()> {
    if t_f > 0.0 && t_f.is_finite() {
        Ok(())
    } else {
        Err(invalid("t_f", format!("must be positive, got {t_f}")))
    }
}

/// Invariant-based pulses for `nu = epsilon`, `beta = arctan(2) t / t_f`.
pub fn lri_pulses(t_f: f64, epsilon: f64) -> Result<PulseSchedule> {
    check_tf(t_f)?;
    if !(epsilon > 0.0 && epsilon < FRAC_PI_2) {
        return Err(invalid(
            "epsilon",
            format!("must lie in (0, pi/2) to keep cot(epsilon) finite, got {epsilon}"),
        ));
    }
    Ok(PulseSchedule {
        t_f,
        shape: Shape::LriClosedForm { epsilon },
    })
}

/// Invariant-based pulses for arbitrary auxiliary angles.
pub fn lri_pulses_general(angles: AuxiliaryAngles) -> Result<PulseSchedule> {
    let t_f = angles.t_f();
    check_tf(t_f)?;
    for k in 0..PULSE_GRID {
        let t = t_f * k as f64 / (PULSE_GRID - 1) as f64;
        let nu = angles.nu(t);
        if nu.sin().abs() < 1e-9 || !nu.is_finite() {
            return Err(invalid("nu", format!("cot(nu) diverges at t = {t}")));
        }
    }
    Ok(PulseSchedule {
        t_f,
        shape: Shape::LriGeneral { angles },
    })
}

pub fn stirap_pulses(t_f: f64, omega0: f64, tau: f64, width: f64) -> Result<PulseSchedule> {
    check_tf(t_f)?;
    for (name, x) in [("omega0", omega0), ("tau", tau), ("T", width)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(invalid(name, format!("must be positive, got {x}")));
        }
    }
    Ok(PulseSchedule {
        t_f,
        shape: Shape::Stirap(StirapParams {
            t_f,
            omega0,
            tau,
            width,
        }),
    })
}

/// Transitionless-driving pulse `Omega'_2 = sqrt(3 delta theta_dot)`,
/// `Omega'_1 = Omega'_3 = i Omega'_2`.
pub fn tqd_pulse(stirap: &PulseSchedule, delta: f64) -> Result<PulseSchedule> {
    tqd_pulse_calibrated(stirap, delta, TqdCalibration::Nominal)
}

pub fn tqd_pulse_calibrated(
    stirap: &PulseSchedule,
    delta: f64,
    calibration: TqdCalibration,
) -> Result<PulseSchedule> {
    let Shape::Stirap(params) = stirap.shape else {
        return Err(invalid("stirap", "TQD pulses derive from a STIRAP schedule"));
    };
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    let angle = mixing_angle(stirap);
    for k in 0..PULSE_GRID {
        let t = stirap.t_f * k as f64 / (PULSE_GRID - 1) as f64;
        let theta_dot = angle.theta_dot(t);
        if theta_dot < 0.0 {
            return Err(Error::NegativeRadicand { time: t, theta_dot });
        }
    }
    Ok(PulseSchedule {
        t_f: stirap.t_f,
        shape: Shape::Tqd {
            stirap: params,
            delta,
            calibration,
        },
    })
}

impl PulseSchedule {
    /// All amplitudes identically zero.
    pub fn zero(t_f: f64) -> Self {
        PulseSchedule {
            t_f,
            shape: Shape::Zero,
        }
    }

    pub fn lri(t_f: f64, epsilon: f64) -> Result<Self> {
        lri_pulses(t_f, epsilon)
    }

    /// STIRAP with the default `tau`, `T` fractions and `Omega_0 = 1`.
    pub fn stirap_default(t_f: f64) -> Result<Self> {
        let p = StirapParams::defaults(t_f);
        stirap_pulses(t_f, p.omega0, p.tau, p.width)
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn method(&self) -> Option<Method> {
        match self.shape {
            Shape::Zero => None,
            Shape::LriClosedForm { .. } | Shape::LriGeneral { .. } => Some(Method::Lri),
            Shape::Stirap(_) => Some(Method::Stirap),
            Shape::Tqd { .. } => Some(Method::Tqd),
        }
    }

    pub fn stirap_params(&self) -> Option<StirapParams> {
        match self.shape {
            Shape::Stirap(p) | Shape::Tqd { stirap: p, .. } => Some(p),
            _ => None,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self.shape {
            Shape::LriClosedForm { epsilon } => Some(epsilon),
            _ => None,
        }
    }

    /// Detuning entering the TQD radicand (after calibration).
    pub fn tqd_radicand_detuning(&self) -> Option<f64> {
        match self.shape {
            Shape::Tqd {
                delta, calibration, ..
            } => Some(calibration.effective_detuning(delta)),
            _ => None,
        }
    }

    pub fn tqd_calibration(&self) -> Option<TqdCalibration> {
        match self.shape {
            Shape::Tqd { calibration, .. } => Some(calibration),
            _ => None,
        }
    }

    /// Real `(Omega_1, Omega_2)` and their time derivatives for real-valued
    /// schedules; `None` for TQD.
    pub fn real_pair(&self, t: f64) -> Option<([f64; 2], [f64; 2])> {
        match &self.shape {
            Shape::Zero => Some(([0.0; 2], [0.0; 2])),
            Shape::LriClosedForm { epsilon } => {
                let a = atan2_const();
                let amp = 3f64.sqrt() * a / self.t_f / epsilon.tan();
                let w = a / self.t_f;
                let (s, c) = (w * t).sin_cos();
                Some(([amp * c, amp * s], [-amp * w * s, amp * w * c]))
            }
            Shape::LriGeneral { angles } => {
                let f = |t: f64| {
                    let (nu, beta) = (angles.nu(t), angles.beta(t));
                    let (nd, bd) = (angles.nu_dot(t), angles.beta_dot(t));
                    let cot = 1.0 / nu.tan();
                    let (sb, cb) = beta.sin_cos();
                    let r3 = 3f64.sqrt();
                    [r3 * (bd * cot * cb - nd * sb), r3 * (bd * cot * sb + nd * cb)]
                };
                let h = self.t_f * 1e-6;
                let (p, m) = (f(t + h), f(t - h));
                Some((f(t), [(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)]))
            }
            Shape::Stirap(p) => {
                let [(gl, dgl), (ge, dge)] = p.gaussians(t);
                let r5 = 5f64.sqrt();
                let o = p.omega0;
                Some((
                    [o * (gl / r5 + ge), 2.0 * o * gl / r5],
                    [o * (dgl / r5 + dge), 2.0 * o * dgl / r5],
                ))
            }
            Shape::Tqd { .. } => None,
        }
    }

    /// `[Omega_1(t), Omega_2(t), Omega_3(t)]`.
    pub fn amplitudes(&self, t: f64) -> [C64; 3] {
        match &self.shape {
            Shape::Tqd {
                stirap,
                delta,
                calibration,
            } => {
                let theta_dot = stirap_theta_dot(stirap, t).max(0.0);
                let o2 = (3.0 * calibration.effective_detuning(*delta) * theta_dot).sqrt();
                let o1 = C64::new(0.0, o2);
                [o1, C64::from(o2), o1]
            }
            _ => {
                let ([o1, o2], _) = self.real_pair(t).expect("real schedule");
                [C64::from(o1), C64::from(o2), C64::from(o1)]
            }
        }
    }

    /// Uniform-grid table: `t, omega1_re, omega1_im, omega2_re, omega2_im,
    /// omega3_re, omega3_im`.
    pub fn to_csv(&self, points: usize) -> String {
        let mut out = String::from("t,omega1_re,omega1_im,omega2_re,omega2_im,omega3_re,omega3_im\n");
        let n = points.max(2);
        for k in 0..n {
            let t = self.t_f * k as f64 / (n - 1) as f64;
            let a = self.amplitudes(t);
            out.push_str(&crate::output::csv_row(&[
                t, a[0].re, a[0].im, a[1].re, a[1].im, a[2].re, a[2].im,
            ]));
        }
        out
    }

    /// Largest `|Omega_2|` on a uniform grid of `points` samples.
    pub fn peak_omega2(&self, points: usize) -> f64 {
        let n = points.max(2);
        (0..n)
            .map(|k| self.amplitudes(self.t_f * k as f64 / (n - 1) as f64)[1].norm())
            .fold(0.0, f64::max)
    }
}

fn stirap_theta_dot(p: &StirapParams, t: f64) -> f64 {
    let schedule = PulseSchedule {
        t_f: p.t_f,
        shape: Shape::Stirap(*p),
    };
    theta_dot_of(&schedule, t)
}

fn theta_dot_of(schedule: &PulseSchedule, t: f64) -> f64 {
    match schedule.shape {
        Shape::Tqd { ref stirap, .. } => stirap_theta_dot(stirap, t),
        _ => {
            let ([o1, o2], [d1, d2]) = schedule.real_pair(t).expect("real schedule");
            let om2 = o1 * o1 + o2 * o2;
            if om2 == 0.0 {
                0.0
            } else {
                (d2 * o1 - o2 * d1) / om2
            }
        }
    }
}

/// Mixing angle `theta = arctan(Omega_2 / Omega_1)` of a schedule. For TQD
/// schedules it is the angle of the underlying STIRAP pair.
#[derive(Clone, Debug)]
pub struct MixingAngle {
    schedule: PulseSchedule,
}

pub fn mixing_angle(schedule: &PulseSchedule) -> MixingAngle {
    let schedule = match schedule.shape {
        Shape::Tqd { stirap, .. } => PulseSchedule {
            t_f: schedule.t_f,
            shape: Shape::Stirap(stirap),
        },
        _ => schedule.clone(),
    };
    MixingAngle { schedule }
}

impl MixingAngle {
    pub fn theta(&self, t: f64) -> f64 {
        let ([o1, o2], _) = self.schedule.real_pair(t).expect("real schedule");
        if o1 == 0.0 && o2 == 0.0 {
            0.0
        } else {
            o2.atan2(o1)
        }
    }

    /// `(Omega_2' Omega_1 - Omega_2 Omega_1') / Omega^2`.
    pub fn theta_dot(&self, t: f64) -> f64 {
        theta_dot_of(&self.schedule, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn lri_closed_form_values() {
        let s = lri_pulses(80.0, 0.177).unwrap();
        let [o1, o2, o3] = s.amplitudes(0.0);
        assert_eq!(o2.re, 0.0);
        // sqrt3 * 1.107149 / 80 * cot(0.177)
        assert_relative_eq!(o1.re, 3f64.sqrt() * 1.107_148_717_794_090_4 / 80.0 / 0.177f64.tan(), epsilon = 1e-15);
        assert_relative_eq!(o1.re, 0.1341, epsilon = 5e-4);
        assert_eq!(o1, o3);
        let [o1, o2, _] = s.amplitudes(80.0);
        assert_relative_eq!(o2.re / o1.re, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn lri_rejects_bad_epsilon() {
        assert!(lri_pulses(80.0, 0.0).is_err());
        assert!(lri_pulses(80.0, -0.1).is_err());
        assert!(lri_pulses(80.0, 1.6).is_err());
        assert!(lri_pulses(0.0, 0.1).is_err());
    }

    #[test]
    fn general_form_reproduces_closed_form() {
        let closed = lri_pulses(80.0, 0.177).unwrap();
        let general = lri_pulses_general(AuxiliaryAngles::linear(80.0, 0.177)).unwrap();
        let custom = lri_pulses_general(AuxiliaryAngles::custom(
            80.0,
            |_| 0.177,
            |t| atan2_const() * t / 80.0,
        ))
        .unwrap();
        for k in 0..=40 {
            let t = 2.0 * k as f64;
            let a = closed.amplitudes(t);
            for other in [&general, &custom] {
                let b = other.amplitudes(t);
                for i in 0..3 {
                    assert!((a[i] - b[i]).norm() < 1e-10, "t = {t}");
                }
            }
        }
    }

    #[test]
    fn constant_angles_give_zero_pulses() {
        let s = lri_pulses_general(AuxiliaryAngles::custom(10.0, |_| 0.3, |_| 0.4)).unwrap();
        for t in [0.0, 3.0, 10.0] {
            assert!(s.amplitudes(t).iter().all(|z| z.norm() < 1e-9));
        }
        assert!(lri_pulses_general(AuxiliaryAngles::custom(10.0, |t| 0.5 - 0.1 * t, |_| 0.0)).is_err());
    }

    #[test]
    fn general_pulses_invert_angle_equations() {
        let angles = AuxiliaryAngles::custom(
            50.0,
            |t| 0.2 + 0.05 * (std::f64::consts::PI * t / 50.0).sin().powi(2),
            |t| atan2_const() * (t / 50.0).powi(2),
        );
        let s = lri_pulses_general(angles.clone()).unwrap();
        for t in [5.0, 17.0, 33.0, 45.0] {
            let ([o1, o2], _) = s.real_pair(t).unwrap();
            let (nu, beta) = (angles.nu(t), angles.beta(t));
            let nu_dot = (o2 * beta.cos() - o1 * beta.sin()) / 3f64.sqrt();
            let beta_dot = nu.tan() * (o1 * beta.cos() + o2 * beta.sin()) / 3f64.sqrt();
            assert_relative_eq!(nu_dot, angles.nu_dot(t), epsilon = 1e-8);
            assert_relative_eq!(beta_dot, angles.beta_dot(t), epsilon = 1e-8);
        }
    }

    #[test]
    fn stirap_shape() {
        let s = PulseSchedule::stirap_default(80.0).unwrap();
        let p = s.stirap_params().unwrap();
        assert_relative_eq!(p.tau, 0.14 * 80.0);
        assert_relative_eq!(p.width, 0.19 * 80.0);
        let peak = s.amplitudes(40.0 + p.tau)[1].re;
        assert_relative_eq!(peak, 2.0 / 5f64.sqrt(), epsilon = 1e-15);
        let [o1, o2, _] = s.amplitudes(80.0);
        assert_relative_eq!(o2.re / o1.re, 2.0, max_relative = 1e-3);
        assert!(stirap_pulses(80.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn stirap_derivatives_match_finite_differences() {
        let s = stirap_pulses(60.0, 1.3, 8.0, 11.0).unwrap();
        for t in [3.0, 21.0, 30.0, 44.0] {
            let (_, d) = s.real_pair(t).unwrap();
            let h = 1e-5;
            let (p, _) = s.real_pair(t + h).unwrap();
            let (m, _) = s.real_pair(t - h).unwrap();
            for i in 0..2 {
                assert_relative_eq!(d[i], (p[i] - m[i]) / (2.0 * h), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn mixing_angle_of_lri_is_linear() {
        let s = lri_pulses(80.0, 0.177).unwrap();
        let m = mixing_angle(&s);
        for t in [0.0, 10.0, 55.0, 80.0] {
            assert_relative_eq!(m.theta(t), atan2_const() * t / 80.0, epsilon = 1e-14);
            assert_relative_eq!(m.theta_dot(t), atan2_const() / 80.0, epsilon = 1e-14);
        }
        let z = mixing_angle(&PulseSchedule::zero(5.0));
        assert_eq!(z.theta(1.0), 0.0);
        assert_eq!(z.theta_dot(1.0), 0.0);
    }

    #[test]
    fn stirap_mixing_angle_boundaries() {
        let m = mixing_angle(&PulseSchedule::stirap_default(80.0).unwrap());
        assert!(m.theta(0.0) < 1e-3);
        assert_relative_eq!(m.theta(80.0), atan2_const(), epsilon = 1e-3);
    }

    #[test]
    fn theta_dot_integrates_to_theta() {
        let schedules = [
            lri_pulses(80.0, 0.177).unwrap(),
            PulseSchedule::stirap_default(80.0).unwrap(),
            stirap_pulses(120.0, 2.0, 10.0, 30.0).unwrap(),
        ];
        for s in &schedules {
            let m = mixing_angle(s);
            let integral = simpson(|t| m.theta_dot(t), 0.0, s.t_f(), 4000);
            assert_relative_eq!(integral, m.theta(s.t_f()) - m.theta(0.0), epsilon = 1e-6);
        }
    }

    #[test]
    fn tqd_squares_to_radicand() {
        let stirap = PulseSchedule::stirap_default(80.0).unwrap();
        let tqd = tqd_pulse(&stirap, 6.0).unwrap();
        let m = mixing_angle(&stirap);
        for k in 0..=80 {
            let t = k as f64;
            let [o1, o2, o3] = tqd.amplitudes(t);
            let expected = 3.0 * 6.0 * m.theta_dot(t);
            assert!((o2.re * o2.re - expected).abs() <= 1e-10 * expected.abs().max(1e-300));
            assert_eq!(o1, C64::i() * o2);
            assert_eq!(o3, o1);
        }
    }

    #[test]
    fn tqd_independent_of_omega0() {
        let a = stirap_pulses(80.0, 1.0, 11.2, 15.2).unwrap();
        let b = stirap_pulses(80.0, 2.0, 11.2, 15.2).unwrap();
        let (ta, tb) = (tqd_pulse(&a, 6.0).unwrap(), tqd_pulse(&b, 6.0).unwrap());
        for t in [0.0, 20.0, 40.0, 61.0, 80.0] {
            assert!((ta.amplitudes(t)[1] - tb.amplitudes(t)[1]).norm() < 1e-10);
        }
    }

    #[test]
    fn tqd_midpoint_closed_form() {
        // theta_dot(t_f/2) t_f = 8 (tau/t_f) / (T/t_f)^2 * sqrt5 / ((1 + sqrt5)^2 + 4)
        let (tf, delta) = (80.0, 6.0);
        let tqd = tqd_pulse(&PulseSchedule::stirap_default(tf).unwrap(), delta).unwrap();
        let r5 = 5f64.sqrt();
        let rate = 8.0 * 0.14 / (0.19 * 0.19) * r5 / ((1.0 + r5).powi(2) + 4.0) / tf;
        assert_relative_eq!(tqd.amplitudes(tf / 2.0)[1].re, (3.0 * delta * rate).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn calibrated_tqd_scales_by_projected_detuning() {
        let stirap = PulseSchedule::stirap_default(80.0).unwrap();
        let nominal = tqd_pulse(&stirap, 6.0).unwrap();
        let cal = tqd_pulse_calibrated(&stirap, 6.0, TqdCalibration::ZenoProjected { g: 1.0, v: 1.0 }).unwrap();
        assert_relative_eq!(cal.tqd_radicand_detuning().unwrap(), 4.0, epsilon = 1e-14);
        let ratio = cal.amplitudes(40.0)[1].re / nominal.amplitudes(40.0)[1].re;
        assert_relative_eq!(ratio, (2.0f64 / 3.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn tqd_requires_stirap_and_positive_delta() {
        let lri = lri_pulses(80.0, 0.177).unwrap();
        assert!(tqd_pulse(&lri, 6.0).is_err());
        let stirap = PulseSchedule::stirap_default(80.0).unwrap();
        assert!(tqd_pulse(&stirap, 0.0).is_err());
    }

    #[test]
    fn tqd_rejects_decreasing_mixing_angle() {
        // tau < 0 puts the Omega_2 pulse first, so theta falls
        let stirap = PulseSchedule {
            t_f: 80.0,
            shape: Shape::Stirap(StirapParams {
                t_f: 80.0,
                omega0: 1.0,
                tau: -11.2,
                width: 15.2,
            }),
        };
        assert!(matches!(
            tqd_pulse(&stirap, 6.0),
            Err(Error::NegativeRadicand { .. })
        ));
    }

    #[test]
    fn lri_amplitude_scales_inversely_with_duration() {
        let a = lri_pulses(80.0, 0.2).unwrap();
        let b = lri_pulses(160.0, 0.2).unwrap();
        for t in [0.0, 13.0, 40.0, 80.0] {
            let x = a.amplitudes(t / 2.0);
            let y = b.amplitudes(t);
            for i in 0..3 {
                assert!((y[i] - x[i] * 0.5).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let csv = lri_pulses(80.0, 0.177).unwrap().to_csv(PULSE_GRID);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), PULSE_GRID + 1);
        assert_eq!(lines[0], "t,omega1_re,omega1_im,omega2_re,omega2_im,omega3_re,omega3_im");
        assert_eq!(lines[1].split(',').count(), 7);
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn method_parsing() {
        assert_eq!(Method::parse("LRI"), Some(Method::Lri));
        assert_eq!(Method::parse("stirap-reference"), Some(Method::Stirap));
        assert_eq!(Method::parse("x"), None);
    }
}
