//! Independent test-side oracles for the propagators and the pulse formulas.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use treeqed::dynamics::{evolve_lindblad, evolve_schrodinger, jump_set, FnHamiltonian, Grid};
use treeqed::experiments::{run, tqd_ratio_study, MethodParams, RunConfig};
use treeqed::hamiltonians::{build_h0_eff, build_h_total, CouplingParams, DrivenHamiltonian};
use treeqed::lri::{analytic_fidelity, effective_target_lri};
use treeqed::statespace::{jump_closed_basis, named_state, NamedState, OrderedBasis};
use treeqed::{DensityMatrix, Method, PulseSchedule, StateVector};

/// Product of exact exponentials of the midpoint Hamiltonians.
fn exponential_propagate(config: &RunConfig, steps: usize) -> DVector<C64> {
    let basis = OrderedBasis::coherent();
    let schedule = config.schedule().unwrap();
    let params = config.coupling().unwrap();
    let t_f = schedule.t_f();
    let dt = t_f / steps as f64;
    let mut psi = DVector::from_element(basis.len(), C64::from(0.0));
    psi[0] = C64::from(1.0);
    for k in 0..steps {
        let t = (k as f64 + 0.5) * dt;
        let h = build_h_total(&basis, &params, &schedule, t).into_matrix();
        let eig = h.symmetric_eigen();
        let phases = eig.eigenvalues.map(|l| C64::from_polar(1.0, -l * dt));
        let v = &eig.eigenvectors;
        let coeffs = v.adjoint() * &psi;
        psi = v * coeffs.component_mul(&phases);
    }
    psi
}

fn target(config: &RunConfig) -> DVector<C64> {
    let name = match config.method {
        MethodParams::Tqd { .. } => NamedState::TargetTqd,
        _ => NamedState::TargetLri,
    };
    named_state(name, &CouplingParams::resonant(), 20).unwrap().amplitudes().clone()
}

#[test]
fn rk4_matches_exponential_propagator() {
    for method in [Method::Lri, Method::Tqd] {
        let config = RunConfig::defaults(method);
        let psi = exponential_propagate(&config, 16_000);
        let oracle = target(&config).dotc(&psi).norm_sqr();
        let f = run(&config).unwrap().summary.fidelity;
        assert!((f - oracle).abs() < 1e-6, "{method}: rk4 {f} vs exponential {oracle}");
    }
}

/// Dense RK4 of `d rho/dt = -i[H, rho] + sum r (L rho L^+ - {L^+ L, rho}/2)`.
fn dense_lindblad(config: &RunConfig, steps: usize) -> DMatrix<C64> {
    let basis = jump_closed_basis();
    let schedule = config.schedule().unwrap();
    let h = DrivenHamiltonian::new(&basis, &config.coupling().unwrap(), schedule.clone());
    let jumps: Vec<(f64, DMatrix<C64>)> = jump_set(&basis, config.gamma, config.kappa)
        .unwrap()
        .into_iter()
        .map(|j| (j.rate, j.matrix().clone()))
        .collect();
    let i = C64::new(0.0, 1.0);
    let rhs = |t: f64, rho: &DMatrix<C64>| {
        let hm = h.at(t).into_matrix();
        let mut d = (&hm * rho - rho * &hm) * (-i);
        for (r, l) in &jumps {
            let ld = l.adjoint();
            let ldl = &ld * l;
            d += (l * rho * &ld - (&ldl * rho + rho * &ldl) * C64::from(0.5)) * C64::from(*r);
        }
        d
    };
    let n = basis.len();
    let mut rho = DMatrix::from_element(n, n, C64::from(0.0));
    rho[(0, 0)] = C64::from(1.0);
    let dt = schedule.t_f() / steps as f64;
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = rhs(t, &rho);
        let k2 = rhs(t + dt / 2.0, &(&rho + &k1 * C64::from(dt / 2.0)));
        let k3 = rhs(t + dt / 2.0, &(&rho + &k2 * C64::from(dt / 2.0)));
        let k4 = rhs(t + dt, &(&rho + &k3 * C64::from(dt)));
        rho += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(dt / 6.0);
    }
    rho
}

#[test]
fn sparse_master_equation_matches_dense_oracle() {
    let config = RunConfig {
        gamma: 0.02,
        kappa: 0.01,
        grid: Grid {
            steps: 4000,
            samples: 2,
            ..Grid::default().without_gate()
        },
        ..RunConfig::defaults(Method::Tqd)
    };
    let rho = dense_lindblad(&config, 4000);
    let tg = target(&config);
    let mut padded = DVector::from_element(rho.nrows(), C64::from(0.0));
    padded.rows_mut(0, 20).copy_from(&tg);
    let oracle = padded.dotc(&(&rho * &padded)).re;
    let f = run(&config).unwrap().summary.fidelity;
    assert!((f - oracle).abs() < 1e-8, "sparse {f} vs dense {oracle}");
}

#[test]
fn lindblad_at_zero_rates_is_schrodinger() {
    let basis = jump_closed_basis();
    let schedule = PulseSchedule::lri(40.0, 0.177).unwrap();
    let h = DrivenHamiltonian::new(&basis, &CouplingParams::resonant(), schedule);
    let grid = Grid::with_steps(4000).without_gate();
    let psi0 = StateVector::basis_state(basis.len(), 0);
    let pure = evolve_schrodinger(&h, &psi0, 40.0, &grid).unwrap();
    let mixed = evolve_lindblad(&h, &jump_set(&basis, 0.0, 0.0).unwrap(), &DensityMatrix::from_pure(&psi0), 40.0, &grid)
        .unwrap();
    for (a, b) in pure.final_populations().iter().zip(mixed.final_populations()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn effective_model_reaches_the_closed_form_fidelity() {
    for eps in [0.1, 0.177, 0.3, 0.6] {
        let schedule = PulseSchedule::lri(80.0, eps).unwrap();
        let h = FnHamiltonian::new(3, |t| {
            let [o1, o2, _] = schedule.amplitudes(t);
            build_h0_eff(o1, o2)
        });
        let out = evolve_schrodinger(&h, &StateVector::basis_state(3, 0), 80.0, &Grid::default()).unwrap();
        let target = StateVector::new(effective_target_lri()).unwrap();
        let f = out.final_fidelity(&target).unwrap();
        let closed = analytic_fidelity(eps).unwrap();
        assert!((f - closed).abs() < 1e-8, "eps {eps}: integrated {f} vs closed form {closed}");
    }
}

#[test]
fn tqd_ratio_study_scaling() {
    let study = tqd_ratio_study(&RunConfig::defaults(Method::Tqd), 0).unwrap();
    // sqrt(3 delta theta_dot): doubling delta and t_f halves theta_dot
    assert!(study.peak_scaling_error < 1e-3, "{}", study.peak_scaling_error);
    assert!(study.iso_spread < study.cross_spread, "{} vs {}", study.iso_spread, study.cross_spread);
    // midpoint theta_dot t_f = 8 (tau/t_f) / (T/t_f)^2 * sqrt5 / ((1 + sqrt5)^2 + 4)
    let r5 = 5f64.sqrt();
    let theta_dot_tf = 8.0 * 0.14 / (0.19 * 0.19) * r5 / ((1.0 + r5).powi(2) + 4.0);
    let expected = (3.0 * (2.0 / 3.0) * theta_dot_tf).sqrt();
    for p in &study.points {
        assert!((p.midpoint_ratio - expected).abs() < 1e-6, "{} vs {expected}", p.midpoint_ratio);
    }
}

#[test]
fn trajectory_csv_is_bit_reproducible() {
    let config = RunConfig {
        grid: Grid::with_steps(2000).without_gate(),
        ..RunConfig::defaults(Method::Tqd)
    };
    let a = run(&config).unwrap().trajectory_csv().unwrap();
    let b = run(&config).unwrap().trajectory_csv().unwrap();
    assert_eq!(a, b);
}
