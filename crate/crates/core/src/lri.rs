//! Lewis-Riesenfeld invariant of the effective three-level model.
//!
//! Matrices and vectors use the ordering `(Psi_1, Psi_D, Psi_2)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};
use crate::hamiltonians::{build_h0_eff, HamiltonianMatrix};
use crate::pulses::{atan2_const, AuxiliaryAngles, PulseSchedule};
use crate::statespace::StateVector;

/// Grid size of the Simpson rule used for Lewis-Riesenfeld phases.
pub const PHASE_GRID: usize = 4001;

#[derive(Clone, Debug)]
pub struct InvariantParams {
    pub chi: f64,
    pub angles: AuxiliaryAngles,
}

impl InvariantParams {
    pub fn new(chi: f64, angles: AuxiliaryAngles) -> Result<Self> {
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(invalid("chi", format!("must be positive, got {chi}")));
        }
        Ok(InvariantParams { chi, angles })
    }

    /// `chi = 1` with the linear angle family.
    pub fn linear(t_f: f64, epsilon: f64) -> Self {
        InvariantParams {
            chi: 1.0,
            angles: AuxiliaryAngles::linear(t_f, epsilon),
        }
    }
}

/// Invariant eigenmodes, eigenvalues `0, +chi/sqrt3, -chi/sqrt3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LrMode {
    Zero,
    Plus,
    Minus,
}

impl LrMode {
    pub const ALL: [LrMode; 3] = [LrMode::Zero, LrMode::Plus, LrMode::Minus];

    pub fn eigenvalue(self, chi: f64) -> f64 {
        let s = chi / 3f64.sqrt();
        match self {
            LrMode::Zero => 0.0,
            LrMode::Plus => s,
            LrMode::Minus => -s,
        }
    }
}

fn c(x: f64) -> C64 {
    C64::from(x)
}

fn ci(x: f64) -> C64 {
    C64::new(0.0, x)
}

fn invariant_matrix(chi: f64, nu: f64, beta: f64) -> DMatrix<C64> {
    let (sn, cn) = nu.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let k = chi / 3f64.sqrt();
    DMatrix::from_row_slice(
        3,
        3,
        &[
            c(0.0),
            c(cn * sb),
            ci(-sn),
            c(cn * sb),
            c(0.0),
            c(cn * cb),
            ci(sn),
            c(cn * cb),
            c(0.0),
        ],
    ) * c(k)
}

pub fn build_invariant(params: &InvariantParams, t: f64) -> HamiltonianMatrix {
    let a = &params.angles;
    HamiltonianMatrix::from_raw(invariant_matrix(params.chi, a.nu(t), a.beta(t))).at_time(t)
}

/// `dI/dt` from the angle derivatives.
pub fn invariant_derivative(params: &InvariantParams, t: f64) -> DMatrix<C64> {
    let a = &params.angles;
    let (nu, beta) = (a.nu(t), a.beta(t));
    let (nd, bd) = (a.nu_dot(t), a.beta_dot(t));
    let (sn, cn) = nu.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let k = params.chi / 3f64.sqrt();
    let d_sb = -sn * nd * sb + cn * cb * bd; // d(cos nu sin beta)
    let d_cb = -sn * nd * cb - cn * sb * bd; // d(cos nu cos beta)
    let d_s = cn * nd; // d(sin nu)
    DMatrix::from_row_slice(
        3,
        3,
        &[
            c(0.0),
            c(d_sb),
            ci(-d_s),
            c(d_sb),
            c(0.0),
            c(d_cb),
            ci(d_s),
            c(d_cb),
            c(0.0),
        ],
    ) * c(k)
}

/// `|| i dI/dt - [H_0, I] ||` with `H_0` built from `schedule`.
pub fn commutation_residual(params: &InvariantParams, schedule: &PulseSchedule, t: f64) -> f64 {
    let [o1, o2, _] = schedule.amplitudes(t);
    let h = build_h0_eff(o1, o2).into_matrix();
    let i_mat = build_invariant(params, t).into_matrix();
    let lhs = invariant_derivative(params, t) * ci(1.0);
    let comm = &h * &i_mat - &i_mat * &h;
    (lhs - comm).norm()
}

fn eigenvector(mode: LrMode, nu: f64, beta: f64) -> DVector<C64> {
    let (sn, cn) = nu.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match mode {
        LrMode::Zero => DVector::from_vec(vec![c(cn * cb), ci(-sn), c(-cn * sb)]),
        LrMode::Plus | LrMode::Minus => {
            let s = if mode == LrMode::Plus { 1.0 } else { -1.0 };
            DVector::from_vec(vec![
                C64::new(sn * cb, s * sb) * r,
                ci(cn) * r,
                C64::new(-sn * sb, s * cb) * r,
            ])
        }
    }
}

fn eigenvector_derivative(mode: LrMode, nu: f64, beta: f64, nd: f64, bd: f64) -> DVector<C64> {
    let (sn, cn) = nu.sin_cos();
    let (sb, cb) = beta.sin_cos();
    match mode {
        LrMode::Zero => DVector::from_vec(vec![
            c(-sn * cb * nd - cn * sb * bd),
            ci(-cn * nd),
            c(sn * sb * nd - cn * cb * bd),
        ]),
        LrMode::Plus | LrMode::Minus => {
            let s = if mode == LrMode::Plus { 1.0 } else { -1.0 };
            let r = std::f64::consts::FRAC_1_SQRT_2;
            DVector::from_vec(vec![
                C64::new(cn * cb * nd - sn * sb * bd, s * cb * bd) * r,
                ci(-sn * nd) * r,
                C64::new(-cn * sb * nd - sn * cb * bd, -s * sb * bd) * r,
            ])
        }
    }
}

/// `phi_0, phi_+, phi_-` at time `t`.
pub fn invariant_eigenstates(params: &InvariantParams, t: f64) -> [StateVector; 3] {
    let (nu, beta) = (params.angles.nu(t), params.angles.beta(t));
    LrMode::ALL.map(|m| StateVector::from_raw(eigenvector(m, nu, beta)))
}

/// Integrand `<phi_n| i d/dt - H_0 |phi_n>` of the Lewis-Riesenfeld phase.
pub fn lr_phase_integrand(
    mode: LrMode,
    schedule: &PulseSchedule,
    params: &InvariantParams,
    t: f64,
) -> f64 {
    let a = &params.angles;
    let (nu, beta) = (a.nu(t), a.beta(t));
    let phi = eigenvector(mode, nu, beta);
    let dphi = eigenvector_derivative(mode, nu, beta, a.nu_dot(t), a.beta_dot(t));
    let [o1, o2, _] = schedule.amplitudes(t);
    let h = build_h0_eff(o1, o2).into_matrix();
    let value = phi.dotc(&(dphi * ci(1.0) - h * &phi));
    value.re
}

/// `alpha_n(t)` by composite Simpson on [`PHASE_GRID`] points over `[0, t]`.
pub fn lr_phase_until(
    mode: LrMode,
    schedule: &PulseSchedule,
    params: &InvariantParams,
    t: f64,
) -> f64 {
    let n = PHASE_GRID - 1;
    let h = t / n as f64;
    let f = |s: f64| lr_phase_integrand(mode, schedule, params, s);
    let mut sum = f(0.0) + f(t);
    for k in 1..n {
        sum += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// `alpha_n(t_f)`.
pub fn lr_phase(mode: LrMode, schedule: &PulseSchedule, params: &InvariantParams) -> f64 {
    lr_phase_until(mode, schedule, params, schedule.t_f())
}

/// Closed-form phases of the linear family: `alpha_0 = 0`,
/// `alpha_+- = -+ arctan(2) / sin(epsilon)`.
pub fn lr_phase_closed_form(mode: LrMode, epsilon: f64) -> f64 {
    let a = atan2_const() / epsilon.sin();
    match mode {
        LrMode::Zero => 0.0,
        LrMode::Plus => -a,
        LrMode::Minus => a,
    }
}

/// `[cos^2 eps + sin^2 eps cos(arctan 2 / sin eps)]^2`.
pub fn analytic_fidelity(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < std::f64::consts::FRAC_PI_2) {
        return Err(invalid("epsilon", format!("must lie in (0, pi/2), got {epsilon}")));
    }
    let (s, co) = epsilon.sin_cos();
    let x = co * co + s * s * (atan2_const() / s).cos();
    Ok(x * x)
}

/// The LRI target `(Psi_1 - 2 Psi_2) / sqrt5` in the effective basis.
pub fn effective_target_lri() -> DVector<C64> {
    let r5 = 5f64.sqrt();
    DVector::from_vec(vec![c(1.0 / r5), c(0.0), c(-2.0 / r5)])
}

/// `sum_n C_n e^{i alpha_n(t)} phi_n(t)` with `C_n = <phi_n(0)|Psi_1>` and
/// phases from quadrature.
pub fn decomposed_state(schedule: &PulseSchedule, params: &InvariantParams, t: f64) -> DVector<C64> {
    let a = &params.angles;
    let psi1 = DVector::from_vec(vec![c(1.0), c(0.0), c(0.0)]);
    let mut out = DVector::zeros(3);
    for mode in LrMode::ALL {
        let c0 = eigenvector(mode, a.nu(0.0), a.beta(0.0)).dotc(&psi1);
        let alpha = lr_phase_until(mode, schedule, params, t);
        out += eigenvector(mode, a.nu(t), a.beta(t)) * (c0 * C64::from_polar(1.0, alpha));
    }
    out
}

/// Fidelity rebuilt from the invariant decomposition at `t_f`, the oracle for
/// [`analytic_fidelity`].
pub fn decomposed_fidelity(t_f: f64, epsilon: f64) -> Result<f64> {
    let schedule = PulseSchedule::lri(t_f, epsilon)?;
    let params = InvariantParams::linear(t_f, epsilon);
    let psi = decomposed_state(&schedule, &params, t_f);
    Ok(effective_target_lri().dotc(&psi).norm_sqr())
}

/// `arcsin(arctan 2 / 2 pi)`: the largest epsilon whose phases close with a
/// single winding.
pub fn solve_epsilon() -> f64 {
    (atan2_const() / (2.0 * PI)).asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_angles() -> Vec<(f64, f64)> {
        vec![(0.177, 0.0), (0.3, 0.4), (1.1, -0.7), (-0.4, 2.5), (0.0, 1.0)]
    }

    #[test]
    fn invariant_spectrum_is_fixed() {
        for (nu, beta) in random_angles() {
            let h = HamiltonianMatrix::from_raw(invariant_matrix(3f64.sqrt(), nu, beta));
            assert!(h.hermiticity_residual() == 0.0);
            let ev = h.eigenvalues();
            assert_relative_eq!(ev[0], -1.0, epsilon = 1e-12);
            assert_relative_eq!(ev[1], 0.0, epsilon = 1e-12);
            assert_relative_eq!(ev[2], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenstates_satisfy_eigen_equation() {
        for (nu, beta) in random_angles() {
            let m = invariant_matrix(1.0, nu, beta);
            let vecs: Vec<_> = LrMode::ALL.iter().map(|&md| eigenvector(md, nu, beta)).collect();
            for (mode, v) in LrMode::ALL.iter().zip(&vecs) {
                let r = &m * v - v * c(mode.eigenvalue(1.0));
                assert!(r.norm() < 1e-12);
            }
            for i in 0..3 {
                for j in 0..3 {
                    let g = vecs[i].dotc(&vecs[j]);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g - c(expect)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_mode_at_start() {
        let p = InvariantParams::linear(80.0, 0.177);
        let [phi0, _, _] = invariant_eigenstates(&p, 0.0);
        assert_relative_eq!(phi0.amplitude(0).re, 0.177f64.cos(), epsilon = 1e-15);
        assert_relative_eq!(phi0.amplitude(1).im, -0.177f64.sin(), epsilon = 1e-15);
        assert_eq!(phi0.amplitude(2).norm(), 0.0);
    }

    #[test]
    fn eigenvector_derivatives_match_finite_differences() {
        let (nu_of, beta_of) = (|t: f64| 0.2 + 0.1 * t.sin(), |t: f64| 0.5 * t * t);
        let t = 0.8;
        let h = 1e-6;
        for mode in LrMode::ALL {
            let d = eigenvector_derivative(mode, nu_of(t), beta_of(t), 0.1 * t.cos(), t);
            let fd = (eigenvector(mode, nu_of(t + h), beta_of(t + h))
                - eigenvector(mode, nu_of(t - h), beta_of(t - h)))
                / c(2.0 * h);
            assert!((d - fd).norm() < 1e-8);
        }
    }

    #[test]
    fn invariant_commutes_along_lri_pulses() {
        let p = InvariantParams::linear(80.0, 0.177);
        let s = PulseSchedule::lri(80.0, 0.177).unwrap();
        for k in 0..=16 {
            assert!(commutation_residual(&p, &s, 5.0 * k as f64) < 1e-12);
        }
    }

    #[test]
    fn invariant_commutes_for_general_angles() {
        let angles = AuxiliaryAngles::custom(
            40.0,
            |t| 0.25 + 0.05 * (t / 40.0 * PI).sin().powi(2),
            |t| atan2_const() * (3.0 * (t / 40.0).powi(2) - 2.0 * (t / 40.0).powi(3)),
        );
        let s = crate::pulses::lri_pulses_general(angles.clone()).unwrap();
        let p = InvariantParams::new(1.0, angles).unwrap();
        for t in [1.0, 10.0, 20.0, 37.0] {
            assert!(commutation_residual(&p, &s, t) < 1e-8);
        }
    }

    #[test]
    fn boundary_commutators_equal_invariant_rate() {
        // linear beta keeps dI/dt finite at both ends, so [H_0, I] does too
        let p = InvariantParams::linear(80.0, 0.177);
        let s = PulseSchedule::lri(80.0, 0.177).unwrap();
        let expected = 2f64.sqrt() * 0.177f64.cos() * atan2_const() / 80.0 / 3f64.sqrt();
        for t in [0.0, 80.0] {
            let [o1, o2, _] = s.amplitudes(t);
            let h = build_h0_eff(o1, o2).into_matrix();
            let i = build_invariant(&p, t).into_matrix();
            assert_relative_eq!((&h * &i - &i * &h).norm(), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn phases_match_closed_form() {
        let eps = 0.177;
        let s = PulseSchedule::lri(80.0, eps).unwrap();
        let p = InvariantParams::linear(80.0, eps);
        for mode in LrMode::ALL {
            assert!((lr_phase(mode, &s, &p) - lr_phase_closed_form(mode, eps)).abs() < 1e-8);
        }
        assert_relative_eq!(lr_phase_closed_form(LrMode::Plus, solve_epsilon()), -2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn phases_do_not_depend_on_chi() {
        let s = PulseSchedule::lri(60.0, 0.3).unwrap();
        let p1 = InvariantParams::linear(60.0, 0.3);
        let p2 = InvariantParams { chi: 2.0, ..p1.clone() };
        for mode in LrMode::ALL {
            assert_eq!(lr_phase(mode, &s, &p1), lr_phase(mode, &s, &p2));
        }
    }

    #[test]
    fn epsilon_solution() {
        let e = solve_epsilon();
        assert!((e - 0.177).abs() < 5e-4);
        assert_relative_eq!(e.sin() * 2.0 * PI, atan2_const(), epsilon = 1e-15);
        assert!((analytic_fidelity(e).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn analytic_fidelity_limits_and_maxima() {
        assert!(analytic_fidelity(0.0).is_err());
        assert!((analytic_fidelity(1e-6).unwrap() - 1.0).abs() < 1e-10);
        // second winding: arctan2 / sin(eps) = 4 pi
        let e2 = (atan2_const() / (4.0 * PI)).asin();
        assert!((analytic_fidelity(e2).unwrap() - 1.0).abs() < 1e-12);
        assert!(analytic_fidelity(0.25).unwrap() < analytic_fidelity(0.177).unwrap());
    }

    #[test]
    fn decomposition_reproduces_closed_form_fidelity() {
        for eps in [0.1, 0.177, 0.25, 0.4] {
            let f = decomposed_fidelity(80.0, eps).unwrap();
            assert!((f - analytic_fidelity(eps).unwrap()).abs() < 1e-8, "eps = {eps}");
        }
    }
}
