//! Time evolution: fixed-step RK4 for pure states and for the Lindblad
//! master equation, plus the observables reported along a trajectory.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::hamiltonians::{DrivenHamiltonian, HamiltonianMatrix};
use crate::output::csv_row;
use crate::statespace::{
    AtomLevel, DensityMatrix, LocalOp, Mode, OpString, OrderedBasis, Polarization, StateVector,
    COHERENT_DIM,
};

/// Nonzero entry `(row, col, value)`.
pub type Entry = (usize, usize, C64);

/// A Hamiltonian that can be sampled at any time.
pub trait TimeDependentHamiltonian: Sync {
    fn dim(&self) -> usize;

    fn matrix_at(&self, t: f64) -> HamiltonianMatrix;

    /// Nonzero entries at time `t`, appended to `out` after clearing it.
    fn entries_at(&self, t: f64, out: &mut Vec<Entry>) {
        out.clear();
        let h = self.matrix_at(t);
        let m = h.matrix();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let z = m[(r, c)];
                if z != C64::from(0.0) {
                    out.push((r, c, z));
                }
            }
        }
    }
}

impl TimeDependentHamiltonian for DrivenHamiltonian {
    fn dim(&self) -> usize {
        DrivenHamiltonian::dim(self)
    }

    fn matrix_at(&self, t: f64) -> HamiltonianMatrix {
        self.at(t)
    }

    fn entries_at(&self, t: f64, out: &mut Vec<Entry>) {
        self.sparse_entries(t, out);
    }
}

/// Time-independent Hamiltonian.
#[derive(Clone, Debug)]
pub struct ConstantHamiltonian(pub HamiltonianMatrix);

impl TimeDependentHamiltonian for ConstantHamiltonian {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn matrix_at(&self, _t: f64) -> HamiltonianMatrix {
        self.0.clone()
    }
}

/// Hamiltonian given by a closure.
pub struct FnHamiltonian<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64) -> HamiltonianMatrix + Sync> FnHamiltonian<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnHamiltonian { dim, f }
    }
}

impl<F: Fn(f64) -> HamiltonianMatrix + Sync> TimeDependentHamiltonian for FnHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn matrix_at(&self, t: f64) -> HamiltonianMatrix {
        (self.f)(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateKind {
    /// Atomic spontaneous emission, rate `gamma`.
    Gamma,
    /// Cavity or fiber photon leakage, rate `kappa`.
    Kappa,
}

/// Symbolic decay channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JumpChannel {
    pub label: String,
    pub kind: RateKind,
    pub op: OpString,
}

/// The 21 decay channels: two per excited level of atoms 1 and 3, three
/// from `e0` of atom 2, and one annihilation per polarized cavity and fiber
/// mode.
pub fn jump_channels() -> Vec<JumpChannel> {
    let mut out = Vec::with_capacity(21);
    for atom in [0usize, 2] {
        for pol in Polarization::BOTH {
            for to in [pol.ground(), AtomLevel::G0] {
                out.push(JumpChannel {
                    label: format!(
                        "sigma{}_{}{}",
                        atom + 1,
                        to.label(),
                        pol.excited().label()
                    ),
                    kind: RateKind::Gamma,
                    op: OpString::single(LocalOp::Atom {
                        atom,
                        from: pol.excited(),
                        to,
                    }),
                });
            }
        }
    }
    for to in [AtomLevel::GL, AtomLevel::G0, AtomLevel::GR] {
        out.push(JumpChannel {
            label: format!("sigma2_{}e0", to.label()),
            kind: RateKind::Gamma,
            op: OpString::single(LocalOp::Atom {
                atom: 1,
                from: AtomLevel::E0,
                to,
            }),
        });
    }
    for mode in Mode::CAVITIES.into_iter().chain(Mode::FIBERS) {
        for pol in Polarization::BOTH {
            out.push(JumpChannel {
                label: format!("{}_{}", mode.label(), pol.label()),
                kind: RateKind::Kappa,
                op: OpString::single(LocalOp::Annihilate(mode, pol)),
            });
        }
    }
    out
}

/// Collapse operator over a basis, with its rate.
#[derive(Clone, Debug)]
pub struct JumpOperator {
    pub label: String,
    pub rate: f64,
    matrix: DMatrix<C64>,
    entries: Vec<(usize, usize)>,
}

impl JumpOperator {
    pub fn new(label: impl Into<String>, matrix: DMatrix<C64>, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(invalid("rate", format!("must be non-negative, got {rate}")));
        }
        let mut entries = Vec::new();
        for c in 0..matrix.ncols() {
            for r in 0..matrix.nrows() {
                if matrix[(r, c)] != C64::from(0.0) {
                    entries.push((r, c));
                }
            }
        }
        Ok(JumpOperator {
            label: label.into(),
            rate,
            matrix,
            entries,
        })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn nonzeros(&self) -> &[(usize, usize)] {
        &self.entries
    }
}

/// Dense collapse operators for every channel over a jump-closed basis.
pub fn jump_set(basis: &OrderedBasis, gamma: f64, kappa: f64) -> Result<Vec<JumpOperator>> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(invalid("gamma", format!("must be non-negative, got {gamma}")));
    }
    if kappa.is_nan() || kappa < 0.0 {
        return Err(invalid("kappa", format!("must be non-negative, got {kappa}")));
    }
    let n = basis.len();
    jump_channels()
        .into_iter()
        .map(|ch| {
            let mut m = DMatrix::zeros(n, n);
            for (col, s) in basis.states().iter().enumerate() {
                if let Some(next) = ch.op.apply(s) {
                    let row = basis.index_of(&next).ok_or_else(|| {
                        Error::BasisMismatch(format!("basis not closed under {}", ch.label))
                    })?;
                    m[(row, col)] = C64::from(1.0);
                }
            }
            let rate = match ch.kind {
                RateKind::Gamma => gamma,
                RateKind::Kappa => kappa,
            };
            JumpOperator::new(ch.label, m, rate)
        })
        .collect()
}

/// Integration grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    /// RK4 steps over `[0, t_f]`.
    pub steps: usize,
    /// Recorded time points including both ends.
    pub samples: usize,
    /// Rerun at half the step and require agreement.
    pub convergence_gate: bool,
    /// Maximum number of step halvings when the gate is on.
    pub max_refinements: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            steps: 20_000,
            samples: 401,
            convergence_gate: true,
            max_refinements: 3,
        }
    }
}

impl Grid {
    pub const GATE_TOL: f64 = 1e-8;
    pub const DRIFT_ERROR: f64 = 1e-4;

    pub fn with_steps(steps: usize) -> Self {
        Grid {
            steps,
            ..Grid::default()
        }
    }

    pub fn without_gate(mut self) -> Self {
        self.convergence_gate = false;
        self
    }

    fn normalized(&self) -> Result<(usize, usize)> {
        if self.steps == 0 {
            return Err(invalid("grid", "step count must be positive"));
        }
        let intervals = self.samples.max(2) - 1;
        let stride = self.steps.div_ceil(intervals);
        Ok((stride * intervals, stride))
    }
}

#[derive(Clone, Debug)]
pub enum States {
    Pure(Vec<StateVector>),
    Mixed(Vec<DensityMatrix>),
}

/// Convergence and conservation diagnostics of one run.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Diagnostics {
    pub steps: usize,
    /// Largest `| ||psi|| - 1 |` or `| tr rho - 1 |` over all steps.
    pub drift: f64,
    /// Infidelity (pure) or largest entry change (mixed) between the last two
    /// refinements; `None` without the gate.
    pub gate_change: Option<f64>,
    pub gate_passed: bool,
    /// Smallest eigenvalue of the final density matrix.
    pub min_eigenvalue: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: States,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn populations(&self, k: usize) -> Vec<f64> {
        match &self.states {
            States::Pure(v) => v[k].populations(),
            States::Mixed(v) => v[k].populations(),
        }
    }

    pub fn final_populations(&self) -> Vec<f64> {
        self.populations(self.len() - 1)
    }

    pub fn dim(&self) -> usize {
        match &self.states {
            States::Pure(v) => v[0].dim(),
            States::Mixed(v) => v[0].dim(),
        }
    }

    pub fn fidelity_at(&self, k: usize, target: &StateVector) -> Result<f64> {
        match &self.states {
            States::Pure(v) => fidelity_pure(target, &v[k]),
            States::Mixed(v) => fidelity_mixed(target, &v[k]),
        }
    }

    pub fn final_fidelity(&self, target: &StateVector) -> Result<f64> {
        self.fidelity_at(self.len() - 1, target)
    }

    pub fn norm_or_trace(&self, k: usize) -> f64 {
        match &self.states {
            States::Pure(v) => v[k].norm(),
            States::Mixed(v) => v[k].trace(),
        }
    }

    /// Peak `(p_atomic, p_cavity_fiber)` over the recorded times.
    pub fn peak_excited(&self) -> (f64, f64) {
        (0..self.len()).fold((0.0, 0.0), |(a, c), k| {
            let (pa, pc) = excited_populations(&self.populations(k));
            (a.max(pa), c.max(pc))
        })
    }

    /// CSV with per-state populations, excited-manifold sums, closure
    /// population, both target fidelities, and the norm (pure) or trace.
    pub fn to_csv(&self, target_lri: &StateVector, target_tqd: &StateVector) -> Result<String> {
        let n = self.dim();
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",pop_phi{i}"));
        }
        out.push_str(",p_atomic,p_cavity_fiber,p_closure,fidelity_lri,fidelity_tqd,norm_or_trace\n");
        for k in 0..self.len() {
            let pops = self.populations(k);
            let (pa, pc) = excited_populations(&pops);
            let mut row = Vec::with_capacity(n + 7);
            row.push(self.times[k]);
            row.extend_from_slice(&pops);
            row.extend([
                pa,
                pc,
                closure_population(&pops),
                self.fidelity_at(k, target_lri)?,
                self.fidelity_at(k, target_tqd)?,
                self.norm_or_trace(k),
            ]);
            out.push_str(&csv_row(&row));
        }
        Ok(out)
    }
}

fn matvec(entries: &[Entry], x: &DVector<C64>, out: &mut DVector<C64>) {
    out.fill(C64::from(0.0));
    for &(r, c, v) in entries {
        out[r] += v * x[c];
    }
}

/// `k = -i H x`.
fn schrodinger_rhs(entries: &[Entry], x: &DVector<C64>, k: &mut DVector<C64>) {
    matvec(entries, x, k);
    for z in k.iter_mut() {
        *z = C64::new(z.im, -z.re);
    }
}

struct PureRun {
    times: Vec<f64>,
    states: Vec<StateVector>,
    drift: f64,
}

fn rk4_pure(
    h: &dyn TimeDependentHamiltonian,
    psi0: &DVector<C64>,
    t_f: f64,
    steps: usize,
    stride: usize,
) -> Result<PureRun> {
    let n = psi0.len();
    let dt = t_f / steps as f64;
    let mut psi = psi0.clone();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
    );
    let (mut e0, mut e_half, mut e1) = (Vec::new(), Vec::new(), Vec::new());
    let mut times = vec![0.0];
    let mut states = vec![StateVector::from_raw(psi.clone())];
    let mut drift: f64 = 0.0;
    h.entries_at(0.0, &mut e1);
    for step in 0..steps {
        let t = step as f64 * dt;
        std::mem::swap(&mut e0, &mut e1);
        h.entries_at(t + 0.5 * dt, &mut e_half);
        h.entries_at(t + dt, &mut e1);
        schrodinger_rhs(&e0, &psi, &mut k1);
        tmp.copy_from(&psi);
        tmp.axpy(C64::from(0.5 * dt), &k1, C64::from(1.0));
        schrodinger_rhs(&e_half, &tmp, &mut k2);
        tmp.copy_from(&psi);
        tmp.axpy(C64::from(0.5 * dt), &k2, C64::from(1.0));
        schrodinger_rhs(&e_half, &tmp, &mut k3);
        tmp.copy_from(&psi);
        tmp.axpy(C64::from(dt), &k3, C64::from(1.0));
        schrodinger_rhs(&e1, &tmp, &mut k4);
        let w = C64::from(dt / 6.0);
        for i in 0..n {
            psi[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let d = (psi.norm() - 1.0).abs();
        drift = drift.max(d);
        if d > Grid::DRIFT_ERROR || !d.is_finite() {
            return Err(Error::IntegrationFailure(format!(
                "norm drift {d:e} at t = {:.6}",
                t + dt
            )));
        }
        if (step + 1) % stride == 0 {
            times.push(if step + 1 == steps { t_f } else { t + dt });
            states.push(StateVector::from_raw(psi.clone()));
        }
    }
    Ok(PureRun {
        times,
        states,
        drift,
    })
}

/// Integrate `i d/dt psi = H(t) psi` on `[0, t_f]` with fixed-step RK4.
///
/// With the gate on, the run is repeated at half the step until the final
/// states agree to `1 - |<a|b>|^2 < 1e-8`; the finest run is returned.
pub fn evolve_schrodinger(
    h: &dyn TimeDependentHamiltonian,
    psi0: &StateVector,
    t_f: f64,
    grid: &Grid,
) -> Result<Trajectory> {
    if psi0.dim() != h.dim() {
        return Err(Error::BasisMismatch(format!(
            "state has {} amplitudes, Hamiltonian acts on {}",
            psi0.dim(),
            h.dim()
        )));
    }
    if t_f.is_nan() || t_f <= 0.0 {
        return Err(invalid("t_f", format!("must be positive, got {t_f}")));
    }
    let (mut steps, mut stride) = grid.normalized()?;
    let mut run = rk4_pure(h, psi0.amplitudes(), t_f, steps, stride)?;
    let mut gate_change = None;
    let mut gate_passed = !grid.convergence_gate;
    if grid.convergence_gate {
        for _ in 0..=grid.max_refinements {
            steps *= 2;
            stride *= 2;
            let fine = rk4_pure(h, psi0.amplitudes(), t_f, steps, stride)?;
            let a = run.states.last().expect("nonempty");
            let b = fine.states.last().expect("nonempty");
            let change = 1.0 - a.amplitudes().dotc(b.amplitudes()).norm_sqr();
            let change = change.abs();
            gate_change = Some(change);
            run = fine;
            if change < Grid::GATE_TOL {
                gate_passed = true;
                break;
            }
        }
    }
    Ok(Trajectory {
        times: run.times,
        states: States::Pure(run.states),
        diagnostics: Diagnostics {
            steps,
            drift: run.drift,
            gate_change,
            gate_passed,
            min_eigenvalue: None,
        },
    })
}

struct Dissipator {
    anti_hermitian: Vec<Entry>,
    jumps: Vec<(f64, Vec<(usize, usize)>)>,
}

impl Dissipator {
    fn new(jumps: &[JumpOperator], n: usize) -> Self {
        let mut gamma = DMatrix::<C64>::zeros(n, n);
        let mut list = Vec::new();
        for j in jumps.iter().filter(|j| j.rate > 0.0) {
            gamma += j.matrix.adjoint() * &j.matrix * C64::from(j.rate);
            list.push((j.rate, j.entries.clone()));
        }
        let mut anti_hermitian = Vec::new();
        for c in 0..n {
            for r in 0..n {
                let z = gamma[(r, c)];
                if z != C64::from(0.0) {
                    // H_eff = H - (i/2) sum rate L^dag L
                    anti_hermitian.push((r, c, C64::new(0.0, -0.5) * z));
                }
            }
        }
        Dissipator {
            anti_hermitian,
            jumps: list,
        }
    }
}

/// `drho = -i (H_eff rho - rho H_eff^dag) + sum rate L rho L^dag`.
fn lindblad_rhs(h_eff: &[Entry], diss: &Dissipator, rho: &DMatrix<C64>, out: &mut DMatrix<C64>, m: &mut DMatrix<C64>) {
    let n = rho.nrows();
    m.fill(C64::from(0.0));
    for &(r, c, v) in h_eff {
        for j in 0..n {
            m[(r, j)] += v * rho[(c, j)];
        }
    }
    for j in 0..n {
        for i in 0..n {
            let d = m[(i, j)] - m[(j, i)].conj();
            out[(i, j)] = C64::new(d.im, -d.re);
        }
    }
    for (rate, entries) in &diss.jumps {
        for &(a, i) in entries {
            for &(b, j) in entries {
                out[(a, b)] += rho[(i, j)] * *rate;
            }
        }
    }
}

/// Integrate the Lindblad master equation with collapse operators `jumps`.
///
/// `rho` is symmetrized to `(rho + rho^dag) / 2` after every step.
pub fn evolve_lindblad(
    h: &dyn TimeDependentHamiltonian,
    jumps: &[JumpOperator],
    rho0: &DensityMatrix,
    t_f: f64,
    grid: &Grid,
) -> Result<Trajectory> {
    let n = h.dim();
    if rho0.dim() != n || jumps.iter().any(|j| j.matrix.nrows() != n) {
        return Err(Error::BasisMismatch(
            "density matrix, Hamiltonian and jumps must share one basis".into(),
        ));
    }
    if t_f.is_nan() || t_f <= 0.0 {
        return Err(invalid("t_f", format!("must be positive, got {t_f}")));
    }
    let diss = Dissipator::new(jumps, n);
    let (mut steps, mut stride) = grid.normalized()?;
    let mut run = rk4_mixed(h, &diss, rho0.matrix(), t_f, steps, stride)?;
    let mut gate_change = None;
    let mut gate_passed = !grid.convergence_gate;
    if grid.convergence_gate {
        for _ in 0..=grid.max_refinements {
            steps *= 2;
            stride *= 2;
            let fine = rk4_mixed(h, &diss, rho0.matrix(), t_f, steps, stride)?;
            let a = run.1.last().expect("nonempty").matrix();
            let b = fine.1.last().expect("nonempty").matrix();
            let change = (a - b).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            gate_change = Some(change);
            run = fine;
            if change < Grid::GATE_TOL {
                gate_passed = true;
                break;
            }
        }
    }
    let (times, states, drift) = run;
    let min_eigenvalue = states.last().map(|r| r.min_eigenvalue());
    Ok(Trajectory {
        times,
        states: States::Mixed(states),
        diagnostics: Diagnostics {
            steps,
            drift,
            gate_change,
            gate_passed,
            min_eigenvalue,
        },
    })
}

type MixedRun = (Vec<f64>, Vec<DensityMatrix>, f64);

fn rk4_mixed(
    h: &dyn TimeDependentHamiltonian,
    diss: &Dissipator,
    rho0: &DMatrix<C64>,
    t_f: f64,
    steps: usize,
    stride: usize,
) -> Result<MixedRun> {
    let n = rho0.nrows();
    let dt = t_f / steps as f64;
    let mut rho = rho0.clone();
    let z = || DMatrix::<C64>::zeros(n, n);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp, mut scratch) = (z(), z(), z(), z(), z(), z());
    let (mut e0, mut e_half, mut e1) = (Vec::new(), Vec::new(), Vec::new());
    let with_decay = |e: &mut Vec<Entry>| e.extend_from_slice(&diss.anti_hermitian);
    let mut times = vec![0.0];
    let mut states = vec![DensityMatrix::from_raw(rho.clone())];
    let mut drift: f64 = 0.0;
    h.entries_at(0.0, &mut e1);
    with_decay(&mut e1);
    for step in 0..steps {
        let t = step as f64 * dt;
        std::mem::swap(&mut e0, &mut e1);
        h.entries_at(t + 0.5 * dt, &mut e_half);
        with_decay(&mut e_half);
        h.entries_at(t + dt, &mut e1);
        with_decay(&mut e1);
        lindblad_rhs(&e0, diss, &rho, &mut k1, &mut scratch);
        tmp.copy_from(&rho);
        tmp += &k1 * C64::from(0.5 * dt);
        lindblad_rhs(&e_half, diss, &tmp, &mut k2, &mut scratch);
        tmp.copy_from(&rho);
        tmp += &k2 * C64::from(0.5 * dt);
        lindblad_rhs(&e_half, diss, &tmp, &mut k3, &mut scratch);
        tmp.copy_from(&rho);
        tmp += &k3 * C64::from(dt);
        lindblad_rhs(&e1, diss, &tmp, &mut k4, &mut scratch);
        let w = dt / 6.0;
        for j in 0..n {
            for i in 0..n {
                rho[(i, j)] += (k1[(i, j)] + 2.0 * k2[(i, j)] + 2.0 * k3[(i, j)] + k4[(i, j)]) * w;
            }
        }
        for j in 0..n {
            for i in 0..j {
                let s = (rho[(i, j)] + rho[(j, i)].conj()) * 0.5;
                rho[(i, j)] = s;
                rho[(j, i)] = s.conj();
            }
            rho[(j, j)] = C64::from(rho[(j, j)].re);
        }
        let d = (rho.trace().re - 1.0).abs();
        drift = drift.max(d);
        if d > Grid::DRIFT_ERROR || !d.is_finite() {
            return Err(Error::IntegrationFailure(format!(
                "trace drift {d:e} at t = {:.6}",
                t + dt
            )));
        }
        if (step + 1) % stride == 0 {
            times.push(if step + 1 == steps { t_f } else { t + dt });
            states.push(DensityMatrix::from_raw(rho.clone()));
        }
    }
    Ok((times, states, drift))
}

/// `|<target|psi>|^2`, with `target` zero-padded onto closure states.
pub fn fidelity_pure(target: &StateVector, psi: &StateVector) -> Result<f64> {
    let t = target.padded(psi.dim())?;
    Ok(t.inner(psi)?.norm_sqr())
}

/// `<target|rho|target>`, with `target` zero-padded onto closure states.
pub fn fidelity_mixed(target: &StateVector, rho: &DensityMatrix) -> Result<f64> {
    rho.expectation(target)
}

/// Pure or mixed state.
#[derive(Clone, Debug)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

pub fn fidelity(target: &StateVector, state: &QuantumState) -> Result<f64> {
    match state {
        QuantumState::Pure(psi) => fidelity_pure(target, psi),
        QuantumState::Mixed(rho) => fidelity_mixed(target, rho),
    }
}

/// Indices of `phi_2, phi_13 .. phi_16` (0-based).
pub const ATOMIC_EXCITED: [usize; 5] = [1, 12, 13, 14, 15];

/// `(p_atomic, p_cavity_fiber)`: population on `phi_2, phi_13 .. phi_16` and
/// on `phi_3 .. phi_12`.
pub fn excited_populations(populations: &[f64]) -> (f64, f64) {
    let pa = ATOMIC_EXCITED.iter().map(|&i| populations[i]).sum();
    let pc = populations[2..12].iter().sum();
    (pa, pc)
}

/// Population outside the coherent manifold.
pub fn closure_population(populations: &[f64]) -> f64 {
    populations.iter().skip(COHERENT_DIM).sum()
}
