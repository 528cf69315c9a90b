//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use treeqed::experiments::{
    experimental_scenario, linspace, open_grid, property_suite, run, sweep_1d, sweep_2d,
    MethodParams, RunConfig, SweepAxis, SweepResult,
};
use treeqed::lri::{analytic_fidelity, solve_epsilon};
use treeqed::pulses::PULSE_GRID;
use treeqed::Method;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(x: f64, centre: f64, tol: f64) -> bool {
    (x - centre).abs() <= tol
}

fn criterion_1() -> Outcome {
    let oracle = (2f64.atan() / (2.0 * PI)).asin();
    let eps = solve_epsilon();
    let f = analytic_fidelity(eps).unwrap();
    let ok = within(eps, 0.177, 5e-4) && (eps - oracle).abs() < 1e-15 && within(f, 1.0, 1e-10);
    outcome(ok, format!("epsilon* = {eps:.6} (oracle {oracle:.6}), F(epsilon*) = {f:.12}"))
}

fn criterion_2() -> Outcome {
    let out = run(&RunConfig::defaults(Method::Lri)).unwrap();
    let f = out.summary.fidelity;
    outcome(within(f, 0.996, 0.003), format!("F_LRI = {f:.5}, target 0.996 +- 0.003"))
}

fn criterion_3() -> Outcome {
    let out = run(&RunConfig::defaults(Method::Tqd)).unwrap();
    let f = out.summary.fidelity;
    outcome(within(f, 0.996, 0.004), format!("F_TQD = {f:.5}, target 0.996 +- 0.004"))
}

fn criterion_4() -> Outcome {
    let c = RunConfig::defaults(Method::Tqd);
    let MethodParams::Tqd { delta, .. } = c.method else { unreachable!() };
    let s = c.schedule().unwrap();
    let peak = s.peak_omega2(PULSE_GRID);
    let ratio = s.amplitudes(c.t_f / 2.0)[1].norm() / (delta / c.t_f).sqrt();
    outcome(
        within(peak, 0.80, 0.03) && within(ratio, 2.9, 0.1),
        format!("peak Omega'2 = {peak:.4} g (target 0.80 +- 0.03), midpoint ratio = {ratio:.4} (target 2.9 +- 0.1)"),
    )
}

fn argmax(s: &SweepResult) -> f64 {
    s.best().coords[0]
}

fn criterion_5() -> Outcome {
    let lri = sweep_1d(
        &RunConfig::defaults(Method::Lri),
        SweepAxis::Epsilon,
        &linspace(0.05, 0.45, 41),
        0,
    )
    .unwrap();
    let tqd = sweep_1d(
        &RunConfig::defaults(Method::Tqd),
        SweepAxis::Delta,
        &linspace(0.5, 12.0, 41),
        0,
    )
    .unwrap();
    let (e, d) = (argmax(&lri), argmax(&tqd));
    outcome(
        within(e, 0.177, 0.01) && within(d, 6.0, 0.5),
        format!(
            "LRI argmax epsilon = {e:.4} (F {:.5}), TQD argmax delta = {d:.4} g (F {:.5}); targets 0.177 +- 0.01, 6 +- 0.5",
            lri.best().summary.fidelity,
            tqd.best().summary.fidelity
        ),
    )
}

fn criterion_6() -> Outcome {
    let d = linspace(-0.1, 0.1, 21);
    let lri = sweep_2d(&RunConfig::defaults(Method::Lri), SweepAxis::Dtf, &d, SweepAxis::Deps, &d, 0).unwrap();
    let tqd = sweep_2d(&RunConfig::defaults(Method::Tqd), SweepAxis::Dtf, &d, SweepAxis::Ddelta, &d, 0).unwrap();
    let (a, b) = (lri.worst().summary.fidelity, tqd.worst().summary.fidelity);
    outcome(
        a > 0.98 && b > 0.98,
        format!("min F over 21x21 deviation grids: LRI {a:.5}, TQD {b:.5}; required > 0.98"),
    )
}

fn open(method: Method, gamma: f64, kappa: f64) -> f64 {
    run(&RunConfig {
        gamma,
        kappa,
        grid: open_grid(),
        ..RunConfig::defaults(method)
    })
    .unwrap()
    .summary
    .fidelity
}

fn criterion_7() -> Outcome {
    let (a, b) = (open(Method::Lri, 0.02, 0.02), open(Method::Tqd, 0.02, 0.02));
    outcome(
        within(a, 0.94, 0.01) && b >= 0.955,
        format!("kappa = gamma = 0.02 g: F_LRI = {a:.5} (target 0.94 +- 0.01), F_TQD = {b:.5} (target >= 0.955)"),
    )
}

fn criterion_8() -> Outcome {
    let s = experimental_scenario().unwrap();
    let (a, b) = (s.lri.fidelity, s.tqd.fidelity);
    outcome(
        within(a, 0.984, 0.005) && within(b, 0.990, 0.005),
        format!(
            "gamma/g = {:.4e}, kappa/g = {:.4e}: F_LRI = {a:.5} (target 0.984 +- 0.005), F_TQD = {b:.5} (target 0.990 +- 0.005)",
            s.gamma, s.kappa
        ),
    )
}

fn criterion_9() -> Outcome {
    let lri = run(&RunConfig::defaults(Method::Lri)).unwrap().summary;
    let tqd = run(&RunConfig::defaults(Method::Tqd)).unwrap().summary;
    let in_band = |x: f64| (0.03..=0.08).contains(&x);
    let ok = (0.15..=0.30).contains(&tqd.peak_cavity_fiber)
        && tqd.peak_atomic < 0.02
        && in_band(lri.peak_atomic)
        && in_band(lri.peak_cavity_fiber);
    outcome(
        ok,
        format!(
            "TQD peaks P_cf = {:.4} (0.15..0.30), P_a = {:.4} (< 0.02); LRI peaks P_a = {:.4}, P_cf = {:.4} (both 0.03..0.08)",
            tqd.peak_cavity_fiber, tqd.peak_atomic, lri.peak_atomic, lri.peak_cavity_fiber
        ),
    )
}

fn criterion_10() -> Outcome {
    let suite = property_suite().unwrap();
    let failed: Vec<_> = suite.checks.iter().filter(|c| !c.passed).collect();
    let mut detail = format!("{}/{} properties hold", suite.checks.len() - failed.len(), suite.checks.len());
    for c in &suite.checks {
        detail.push_str("\n    ");
        detail.push_str(&c.line());
    }
    outcome(failed.is_empty(), detail)
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut passed = 0;
    for (n, f) in criteria {
        let start = Instant::now();
        let o = f();
        passed += o.passed as usize;
        println!(
            "criterion {n:>2} {} [{:.1} s] {}",
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {passed}/10 criteria pass");
    if passed == 10 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
