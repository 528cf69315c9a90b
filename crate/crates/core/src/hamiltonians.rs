//! Hamiltonian builders.
//!
//! Every operator of the cavity-fiber network is assembled from symbolic
//! [`Term`]s, so the matrices, the basis closure and the mirror-symmetry checks
//! all share one source of truth. Effective Hamiltonians on the Zeno subspace
//! use the ordering `(Psi_1, Psi_D, Psi_2)` throughout. Units: `hbar = 1`,
//! frequencies in units of `g`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::pulses::PulseSchedule;
use crate::statespace::{
    dark_subspace, AtomLevel, LocalOp, Mode, OpString, OrderedBasis, Polarization, StateVector,
    COHERENT_DIM,
};

const HERMITIAN_TOL: f64 = 1e-12;

/// Atom-cavity coupling `g`, cavity-fiber coupling `v` and detuning `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingParams {
    pub g: f64,
    pub v: f64,
    pub delta: f64,
}

impl CouplingParams {
    pub fn new(g: f64, v: f64, delta: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(invalid("g", format!("must be positive, got {g}")));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid("v", format!("must be positive, got {v}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(invalid("delta", format!("must be non-negative, got {delta}")));
        }
        Ok(CouplingParams { g, v, delta })
    }

    /// `g = v = 1`, no detuning.
    pub fn resonant() -> Self {
        CouplingParams {
            g: 1.0,
            v: 1.0,
            delta: 0.0,
        }
    }

    /// `g = v = 1` with detuning `delta`.
    pub fn detuned(delta: f64) -> Result<Self> {
        CouplingParams::new(1.0, 1.0, delta)
    }

    /// Detuning seen by `Psi_D` after projection: the excited-state weight of
    /// the dark state times `delta`, i.e. `2 v^2 delta / (2 v^2 + g^2)`.
    pub fn projected_detuning(&self) -> f64 {
        2.0 * self.v * self.v * self.delta / (2.0 * self.v * self.v + self.g * self.g)
    }
}

/// Classical drive lines. Line 1 and 3 act on the M-type atoms, line 2 on
/// the tripod atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriveLine {
    Omega1,
    Omega2,
    Omega3,
}

impl DriveLine {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    Drive(DriveLine),
    AtomCavity,
    CavityFiber,
}

/// One term of the interaction Hamiltonian, without its Hermitian conjugate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub coupling: Coupling,
    pub op: OpString,
}

/// Drive terms `Omega_j |e_i><g_i|` (j = 1, 3) and `Omega_2 |e0><g0|`.
pub fn drive_terms() -> Vec<Term> {
    let mut terms = Vec::with_capacity(5);
    for (atom, line) in [(0, DriveLine::Omega1), (2, DriveLine::Omega3)] {
        for pol in Polarization::BOTH {
            terms.push(Term {
                coupling: Coupling::Drive(line),
                op: OpString::single(LocalOp::Atom {
                    atom,
                    from: pol.ground(),
                    to: pol.excited(),
                }),
            });
        }
    }
    terms.push(Term {
        coupling: Coupling::Drive(DriveLine::Omega2),
        op: OpString::single(LocalOp::Atom {
            atom: 1,
            from: AtomLevel::G0,
            to: AtomLevel::E0,
        }),
    });
    terms
}

/// Atom-cavity and cavity-fiber terms.
pub fn acf_terms() -> Vec<Term> {
    let mut terms = Vec::with_capacity(14);
    for pol in Polarization::BOTH {
        for (atom, cavity) in [(0, Mode::C1), (2, Mode::C3)] {
            terms.push(Term {
                coupling: Coupling::AtomCavity,
                op: OpString::new(vec![
                    LocalOp::Atom {
                        atom,
                        from: AtomLevel::G0,
                        to: pol.excited(),
                    },
                    LocalOp::Annihilate(cavity, pol),
                ]),
            });
        }
        terms.push(Term {
            coupling: Coupling::AtomCavity,
            op: OpString::new(vec![
                LocalOp::Atom {
                    atom: 1,
                    from: pol.ground(),
                    to: AtomLevel::E0,
                },
                LocalOp::Annihilate(Mode::C2, pol),
            ]),
        });
        for (fiber, cavities) in [(Mode::F1, [Mode::C1, Mode::C2]), (Mode::F2, [Mode::C2, Mode::C3])] {
            for cavity in cavities {
                terms.push(Term {
                    coupling: Coupling::CavityFiber,
                    op: OpString::new(vec![
                        LocalOp::Create(fiber, pol),
                        LocalOp::Annihilate(cavity, pol),
                    ]),
                });
            }
        }
    }
    terms
}

/// Every Hamiltonian operator string together with its adjoint.
pub fn hamiltonian_ops() -> Vec<OpString> {
    drive_terms()
        .into_iter()
        .chain(acf_terms())
        .flat_map(|t| {
            let adj = t.op.adjoint();
            [t.op, adj]
        })
        .collect()
}

/// Dense Hermitian matrix with an optional time tag.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix {
    m: DMatrix<C64>,
    time: Option<f64>,
}

impl HamiltonianMatrix {
    pub fn zeros(dim: usize) -> Self {
        HamiltonianMatrix {
            m: DMatrix::zeros(dim, dim),
            time: None,
        }
    }

    /// Wrap a matrix, checking Hermiticity within `1e-12`.
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        let h = HamiltonianMatrix { m, time: None };
        let r = h.hermiticity_residual();
        if r > HERMITIAN_TOL {
            return Err(invalid("hamiltonian", format!("hermiticity residual {r:e}")));
        }
        Ok(h)
    }

    pub(crate) fn from_raw(m: DMatrix<C64>) -> Self {
        HamiltonianMatrix { m, time: None }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (&self.m - self.m.adjoint())
            .iter()
            .fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn apply(&self, psi: &StateVector) -> Result<nalgebra::DVector<C64>> {
        if psi.dim() != self.dim() {
            return Err(Error::BasisMismatch(format!(
                "operator on {} states applied to vector of {}",
                self.dim(),
                psi.dim()
            )));
        }
        Ok(&self.m * psi.amplitudes())
    }

    /// `<a|H|b>`.
    pub fn element(&self, a: &StateVector, b: &StateVector) -> Result<C64> {
        let hb = self.apply(b)?;
        Ok(a.amplitudes().dotc(&hb))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.m.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Text dump: one line `row col re im` (1-based indices) per nonzero entry.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if let Some(t) = self.time {
            let _ = writeln!(out, "# t = {t:.11e}");
        }
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let z = self.m[(r, c)];
                if z.norm() > 0.0 {
                    let _ = writeln!(out, "{} {} {:.11e} {:.11e}", r + 1, c + 1, z.re, z.im);
                }
            }
        }
        out
    }
}

impl std::ops::Add for HamiltonianMatrix {
    type Output = HamiltonianMatrix;
    fn add(self, rhs: HamiltonianMatrix) -> HamiltonianMatrix {
        HamiltonianMatrix {
            m: self.m + rhs.m,
            time: self.time.or(rhs.time),
        }
    }
}

/// Matrix of a single operator string, no conjugate.
fn op_matrix(basis: &OrderedBasis, op: &OpString) -> DMatrix<C64> {
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    for (col, s) in basis.states().iter().enumerate() {
        if let Some(row) = op.apply(s).and_then(|t| basis.index_of(&t)) {
            m[(row, col)] += C64::from(1.0);
        }
    }
    m
}

fn add_with_conjugate(h: &mut DMatrix<C64>, part: &DMatrix<C64>, coef: C64) {
    *h += part * coef;
    *h += part.transpose() * coef.conj();
}

pub fn build_h_acf(basis: &OrderedBasis, params: &CouplingParams) -> HamiltonianMatrix {
    let mut h = DMatrix::zeros(basis.len(), basis.len());
    for term in acf_terms() {
        let coef = match term.coupling {
            Coupling::AtomCavity => params.g,
            Coupling::CavityFiber => params.v,
            Coupling::Drive(_) => unreachable!("acf_terms holds no drives"),
        };
        add_with_conjugate(&mut h, &op_matrix(basis, &term.op), C64::from(coef));
    }
    HamiltonianMatrix::from_raw(h)
}

pub fn build_h_al(basis: &OrderedBasis, omega1: C64, omega2: C64, omega3: C64) -> HamiltonianMatrix {
    let omegas = [omega1, omega2, omega3];
    let mut h = DMatrix::zeros(basis.len(), basis.len());
    for term in drive_terms() {
        let Coupling::Drive(line) = term.coupling else {
            unreachable!("drive_terms holds only drives")
        };
        add_with_conjugate(&mut h, &op_matrix(basis, &term.op), omegas[line.index()]);
    }
    HamiltonianMatrix::from_raw(h)
}

/// `delta` on every state with an excited atom.
pub fn build_h_e(basis: &OrderedBasis, delta: f64) -> HamiltonianMatrix {
    let n = basis.len();
    let mut h = DMatrix::zeros(n, n);
    for (i, s) in basis.states().iter().enumerate() {
        if s.has_atomic_excitation() {
            h[(i, i)] = C64::from(delta);
        }
    }
    HamiltonianMatrix::from_raw(h)
}

/// `H_al(t) + H_acf`, plus `H_e` when `params.delta > 0`.
pub fn build_h_total(
    basis: &OrderedBasis,
    params: &CouplingParams,
    schedule: &PulseSchedule,
    t: f64,
) -> HamiltonianMatrix {
    let [o1, o2, o3] = schedule.amplitudes(t);
    let mut h = build_h_al(basis, o1, o2, o3) + build_h_acf(basis, params);
    if params.delta > 0.0 {
        h = h + build_h_e(basis, params.delta);
    }
    h.at_time(t)
}

/// Time-dependent total Hamiltonian with the static part and the per-line
/// drive patterns assembled once.
#[derive(Clone, Debug)]
pub struct DrivenHamiltonian {
    static_part: DMatrix<C64>,
    drives: [DMatrix<C64>; 3],
    schedule: PulseSchedule,
    static_nz: Vec<(usize, usize, C64)>,
    drive_nz: [Vec<(usize, usize)>; 3],
}

impl DrivenHamiltonian {
    pub fn new(basis: &OrderedBasis, params: &CouplingParams, schedule: PulseSchedule) -> Self {
        let mut static_part = build_h_acf(basis, params).into_matrix();
        if params.delta > 0.0 {
            static_part += build_h_e(basis, params.delta).into_matrix();
        }
        let n = basis.len();
        let mut drives = [
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
        ];
        for term in drive_terms() {
            let Coupling::Drive(line) = term.coupling else {
                unreachable!()
            };
            drives[line.index()] += op_matrix(basis, &term.op);
        }
        let mut static_nz = Vec::new();
        for c in 0..n {
            for r in 0..n {
                if static_part[(r, c)] != C64::from(0.0) {
                    static_nz.push((r, c, static_part[(r, c)]));
                }
            }
        }
        let drive_nz = drives.each_ref().map(|d| {
            let mut nz = Vec::new();
            for c in 0..n {
                for r in 0..n {
                    if d[(r, c)] != C64::from(0.0) {
                        nz.push((r, c));
                    }
                }
            }
            nz
        });
        DrivenHamiltonian {
            static_part,
            drives,
            schedule,
            static_nz,
            drive_nz,
        }
    }

    /// Nonzero entries of `H(t)`; drive patterns carry unit weights.
    pub fn sparse_entries(&self, t: f64, out: &mut Vec<(usize, usize, C64)>) {
        out.clear();
        out.extend_from_slice(&self.static_nz);
        for (nz, omega) in self.drive_nz.iter().zip(self.schedule.amplitudes(t)) {
            if omega == C64::from(0.0) {
                continue;
            }
            for &(r, c) in nz {
                out.push((r, c, omega));
                out.push((c, r, omega.conj()));
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.static_part.nrows()
    }

    pub fn schedule(&self) -> &PulseSchedule {
        &self.schedule
    }

    pub fn static_part(&self) -> &DMatrix<C64> {
        &self.static_part
    }

    /// Raising pattern of one drive line (no conjugate, unit amplitude).
    pub fn drive_pattern(&self, line: DriveLine) -> &DMatrix<C64> {
        &self.drives[line.index()]
    }

    pub fn at(&self, t: f64) -> HamiltonianMatrix {
        let mut h = self.static_part.clone();
        for (pattern, omega) in self.drives.iter().zip(self.schedule.amplitudes(t)) {
            add_with_conjugate(&mut h, pattern, omega);
        }
        HamiltonianMatrix::from_raw(h).at_time(t)
    }
}

fn sqrt3() -> f64 {
    3f64.sqrt()
}

/// Resonant effective Hamiltonian on `(Psi_1, Psi_D, Psi_2)`:
/// `<Psi_D|H|Psi_1> = omega2 / sqrt 3`, `<Psi_D|H|Psi_2> = omega1 / sqrt 3`.
pub fn build_h0_eff(omega1: C64, omega2: C64) -> HamiltonianMatrix {
    let mut h = DMatrix::zeros(3, 3);
    h[(1, 0)] = omega2 / sqrt3();
    h[(0, 1)] = omega2.conj() / sqrt3();
    h[(1, 2)] = omega1 / sqrt3();
    h[(2, 1)] = omega1.conj() / sqrt3();
    HamiltonianMatrix::from_raw(h)
}

/// [`build_h0_eff`] plus `delta |Psi_D><Psi_D|`.
pub fn build_h0_prime_eff(omega1: C64, omega2: C64, delta: f64) -> HamiltonianMatrix {
    let mut h = build_h0_eff(omega1, omega2).into_matrix();
    h[(1, 1)] = C64::from(delta);
    HamiltonianMatrix::from_raw(h)
}

/// Two-level form on `(Psi_1, Psi_2)` after eliminating `Psi_D`, before the
/// Stark terms are dropped:
/// `(1/3 delta) [|O2|^2 |1><1| + |O1|^2 |2><2| + (O1* O2 |2><1| + h.c.)]`.
pub fn build_h_eff_before_removal(omega1: C64, omega2: C64, delta: f64) -> Result<HamiltonianMatrix> {
    if delta == 0.0 {
        return Err(Error::SingularElimination);
    }
    let k = 1.0 / (3.0 * delta);
    let mut h = DMatrix::zeros(2, 2);
    h[(0, 0)] = C64::from(omega2.norm_sqr() * k);
    h[(1, 1)] = C64::from(omega1.norm_sqr() * k);
    h[(1, 0)] = omega1.conj() * omega2 * k;
    h[(0, 1)] = h[(1, 0)].conj();
    Ok(HamiltonianMatrix::from_raw(h))
}

/// Two-level Hamiltonian on `(Psi_1, Psi_2)` for `Omega'_1 = i Omega'_2`:
/// `i (|O2|^2 / 3 delta) |Psi_1><Psi_2| + h.c.`
///
/// Same overall sign as [`build_h_eff_before_removal`]; a second-order
/// expansion around a level detuned by `+delta` yields the opposite sign,
/// which only reverses the rotation sense.
pub fn build_h_eff_eliminated(omega2prime: C64, delta: f64) -> Result<HamiltonianMatrix> {
    if delta == 0.0 {
        return Err(Error::SingularElimination);
    }
    let c = C64::new(0.0, omega2prime.norm_sqr() / (3.0 * delta));
    let mut h = DMatrix::zeros(2, 2);
    h[(0, 1)] = c;
    h[(1, 0)] = c.conj();
    Ok(HamiltonianMatrix::from_raw(h))
}

/// Counterdiabatic Hamiltonian `i theta_dot |Psi_1><Psi_2| + h.c.`.
pub fn build_h_cd(theta_dot: f64) -> HamiltonianMatrix {
    let mut h = DMatrix::zeros(2, 2);
    h[(0, 1)] = C64::new(0.0, theta_dot);
    h[(1, 0)] = C64::new(0.0, -theta_dot);
    HamiltonianMatrix::from_raw(h)
}

/// Orthonormal basis of the dark subspace ordered as `Psi_1, Psi_D, Psi_2`
/// followed by the remaining kernel directions.
pub fn zeno_basis(params: &CouplingParams) -> Result<Vec<StateVector>> {
    let h = build_h_acf(&OrderedBasis::coherent(), params);
    let dark = dark_subspace(&h)?;
    let mut e1 = [0.0; COHERENT_DIM];
    e1[0] = 1.0;
    let mut e2 = [0.0; COHERENT_DIM];
    e2[16..20].fill(0.5);
    let mut out = vec![
        StateVector::from_real(&e1)?,
        dark.psi_d().clone(),
        StateVector::from_real(&e2)?,
    ];
    for v in dark.vectors() {
        let mut w = v.amplitudes().clone();
        for q in &out {
            let c = q.amplitudes().dotc(&w);
            w -= q.amplitudes() * c;
        }
        if w.norm() > 1e-8 {
            out.push(StateVector::normalized(w)?.phase_fixed());
        }
    }
    Ok(out)
}

/// `<d_i|H|d_j>` over a set of coherent-manifold vectors.
pub fn zeno_project(h: &HamiltonianMatrix, dark_basis: &[StateVector]) -> Result<HamiltonianMatrix> {
    let n = dark_basis.len();
    let mut out = DMatrix::zeros(n, n);
    let padded: Vec<StateVector> = dark_basis
        .iter()
        .map(|d| d.padded(h.dim()))
        .collect::<Result<_>>()?;
    for (j, dj) in padded.iter().enumerate() {
        let hd = h.apply(dj)?;
        for (i, di) in padded.iter().enumerate() {
            out[(i, j)] = di.amplitudes().dotc(&hd);
        }
    }
    Ok(HamiltonianMatrix::from_raw(out))
}

/// Embed a vector over `(Psi_1, Psi_D, Psi_2)` into the coherent manifold.
pub fn embed_effective(coeffs: &[C64; 3], params: &CouplingParams) -> Result<StateVector> {
    let basis = zeno_basis(params)?;
    let mut amps = nalgebra::DVector::zeros(COHERENT_DIM);
    for (c, v) in coeffs.iter().zip(&basis) {
        amps += v.amplitudes() * *c;
    }
    StateVector::new(amps)
}
