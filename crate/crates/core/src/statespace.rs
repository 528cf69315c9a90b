//! Hilbert-space bookkeeping for three atoms in three cavities joined by two
//! fibers.
//!
//! Atoms 1 and 3 are M-type (`gL, g0, gR, eL, eR`), atom 2 is tripod-type
//! (`gL, g0, gR, e0`). The photonic part is five mode groups
//! `c1, f1, c2, f2, c3`, each holding at most one circularly polarized photon,
//! with at most one photon in total. The first 20 entries of every
//! [`OrderedBasis`] built here are the coherent single-excitation manifold
//! reachable from `|g0 g0 g0; vac>`; states reached only through quantum jumps
//! are appended after them.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonians::{build_h_acf, CouplingParams, HamiltonianMatrix};

/// Number of states in the coherent manifold.
pub const COHERENT_DIM: usize = 20;

/// Dimension of ker(H_acf) on the coherent manifold: the six dark states that
/// can be reached from `|phi_1>` plus two mirror-odd zero modes of the
/// photonic chain `c1-f1-c2-f2-c3` that carry no `|phi_2>` amplitude.
pub const KERNEL_DIM: usize = 8;

/// Default cap for [`close_under`].
pub const DEFAULT_CLOSURE_CAP: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomLevel {
    GL,
    G0,
    GR,
    EL,
    ER,
    E0,
}

impl AtomLevel {
    pub fn is_excited(self) -> bool {
        matches!(self, AtomLevel::EL | AtomLevel::ER | AtomLevel::E0)
    }

    pub fn label(self) -> &'static str {
        match self {
            AtomLevel::GL => "gL",
            AtomLevel::G0 => "g0",
            AtomLevel::GR => "gR",
            AtomLevel::EL => "eL",
            AtomLevel::ER => "eR",
            AtomLevel::E0 => "e0",
        }
    }

    /// Whether the level exists on atom `atom` (0-based).
    pub fn allowed_on(self, atom: usize) -> bool {
        match self {
            AtomLevel::EL | AtomLevel::ER => atom != 1,
            AtomLevel::E0 => atom == 1,
            _ => atom < 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    L,
    R,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::L, Polarization::R];

    pub fn label(self) -> &'static str {
        match self {
            Polarization::L => "L",
            Polarization::R => "R",
        }
    }

    /// Ground level `g_i` paired with this polarization.
    pub fn ground(self) -> AtomLevel {
        match self {
            Polarization::L => AtomLevel::GL,
            Polarization::R => AtomLevel::GR,
        }
    }

    /// Excited level `e_i` of an M-type atom paired with this polarization.
    pub fn excited(self) -> AtomLevel {
        match self {
            Polarization::L => AtomLevel::EL,
            Polarization::R => AtomLevel::ER,
        }
    }
}

/// Photonic mode groups in chain order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    C1,
    F1,
    C2,
    F2,
    C3,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::C1, Mode::F1, Mode::C2, Mode::F2, Mode::C3];
    pub const CAVITIES: [Mode; 3] = [Mode::C1, Mode::C2, Mode::C3];
    pub const FIBERS: [Mode; 2] = [Mode::F1, Mode::F2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::C1 => "c1",
            Mode::F1 => "f1",
            Mode::C2 => "c2",
            Mode::F2 => "f2",
            Mode::C3 => "c3",
        }
    }

    /// Image under the left-right mirror of the setup.
    pub fn mirrored(self) -> Mode {
        match self {
            Mode::C1 => Mode::C3,
            Mode::F1 => Mode::F2,
            Mode::C2 => Mode::C2,
            Mode::F2 => Mode::F1,
            Mode::C3 => Mode::C1,
        }
    }
}

/// Occupation of the five mode groups; at most one photon overall.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PhotonConfig([Option<Polarization>; 5]);

impl PhotonConfig {
    pub fn vacuum() -> Self {
        PhotonConfig([None; 5])
    }

    pub fn single(mode: Mode, pol: Polarization) -> Self {
        let mut modes = [None; 5];
        modes[mode.index()] = Some(pol);
        PhotonConfig(modes)
    }

    pub fn get(&self, mode: Mode) -> Option<Polarization> {
        self.0[mode.index()]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|m| m.is_some()).count()
    }

    pub fn is_vacuum(&self) -> bool {
        self.count() == 0
    }

    fn mirrored(&self) -> Self {
        let mut modes = [None; 5];
        for mode in Mode::ALL {
            modes[mode.mirrored().index()] = self.get(mode);
        }
        PhotonConfig(modes)
    }
}

/// Three atomic levels plus the photonic configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    atoms: [AtomLevel; 3],
    photons: PhotonConfig,
}

impl BasisState {
    pub fn new(atoms: [AtomLevel; 3], photons: PhotonConfig) -> Result<Self> {
        for (j, level) in atoms.iter().enumerate() {
            if !level.allowed_on(j) {
                return Err(Error::InvalidState(format!(
                    "atom {} cannot carry level {}",
                    j + 1,
                    level.label()
                )));
            }
        }
        if photons.count() > 1 {
            return Err(Error::InvalidState(
                "more than one photon in the truncated space".into(),
            ));
        }
        Ok(BasisState { atoms, photons })
    }

    /// Shorthand used by tests and the basis table; panics on invalid input.
    pub fn ground(a1: AtomLevel, a2: AtomLevel, a3: AtomLevel) -> Self {
        BasisState::new([a1, a2, a3], PhotonConfig::vacuum()).expect("valid ground state")
    }

    pub fn atoms(&self) -> [AtomLevel; 3] {
        self.atoms
    }

    pub fn atom(&self, j: usize) -> AtomLevel {
        self.atoms[j]
    }

    pub fn photons(&self) -> PhotonConfig {
        self.photons
    }

    pub fn excitation(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_excited()).count() + self.photons.count()
    }

    pub fn has_atomic_excitation(&self) -> bool {
        self.atoms.iter().any(|a| a.is_excited())
    }

    /// Swap atom 1 with atom 3, c1 with c3 and f1 with f2.
    pub fn mirrored(&self) -> BasisState {
        BasisState {
            atoms: [self.atoms[2], self.atoms[1], self.atoms[0]],
            photons: self.photons.mirrored(),
        }
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|{},{},{};",
            self.atoms[0].label(),
            self.atoms[1].label(),
            self.atoms[2].label()
        )?;
        for mode in Mode::ALL {
            let occ = self.photons.get(mode).map_or("0", |p| p.label());
            f.write_str(occ)?;
        }
        f.write_str(">")
    }
}

/// Elementary operator acting on one subsystem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalOp {
    /// `|to><from|` on atom `atom` (0-based).
    Atom {
        atom: usize,
        from: AtomLevel,
        to: AtomLevel,
    },
    Annihilate(Mode, Polarization),
    Create(Mode, Polarization),
}

impl LocalOp {
    pub fn apply(&self, s: &BasisState) -> Option<BasisState> {
        match *self {
            LocalOp::Atom { atom, from, to } => {
                if s.atoms[atom] != from {
                    return None;
                }
                let mut next = *s;
                next.atoms[atom] = to;
                Some(next)
            }
            LocalOp::Annihilate(mode, pol) => {
                if s.photons.get(mode) != Some(pol) {
                    return None;
                }
                let mut next = *s;
                next.photons.0[mode.index()] = None;
                Some(next)
            }
            LocalOp::Create(mode, pol) => {
                // truncation: single photon overall
                if !s.photons.is_vacuum() {
                    return None;
                }
                let mut next = *s;
                next.photons.0[mode.index()] = Some(pol);
                Some(next)
            }
        }
    }

    pub fn adjoint(&self) -> LocalOp {
        match *self {
            LocalOp::Atom { atom, from, to } => LocalOp::Atom {
                atom,
                from: to,
                to: from,
            },
            LocalOp::Annihilate(m, p) => LocalOp::Create(m, p),
            LocalOp::Create(m, p) => LocalOp::Annihilate(m, p),
        }
    }
}

/// Product of local operators. The last factor acts first, as in `A B |s>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpString(Vec<LocalOp>);

impl OpString {
    pub fn new(factors: Vec<LocalOp>) -> Self {
        OpString(factors)
    }

    pub fn single(op: LocalOp) -> Self {
        OpString(vec![op])
    }

    pub fn factors(&self) -> &[LocalOp] {
        &self.0
    }

    pub fn apply(&self, s: &BasisState) -> Option<BasisState> {
        self.0.iter().rev().try_fold(*s, |state, op| op.apply(&state))
    }

    pub fn adjoint(&self) -> OpString {
        OpString(self.0.iter().rev().map(LocalOp::adjoint).collect())
    }
}

/// Ordered list of basis states with reverse lookup.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedBasis {
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

impl OrderedBasis {
    pub fn from_states(states: Vec<BasisState>) -> Result<Self> {
        let mut index = HashMap::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            if index.insert(*s, i).is_some() {
                return Err(Error::DuplicateState(s.to_string()));
            }
        }
        Ok(OrderedBasis { states, index })
    }

    /// The coherent manifold `|phi_1> ... |phi_20>` in its canonical order.
    pub fn coherent() -> Self {
        use AtomLevel::*;
        use Mode::*;
        use Polarization::{L, R};
        let photon = |a2, mode, pol| {
            BasisState::new([G0, a2, G0], PhotonConfig::single(mode, pol)).expect("valid")
        };
        let states = vec![
            BasisState::ground(G0, G0, G0),
            BasisState::ground(G0, E0, G0),
            photon(GL, C2, L),
            photon(GR, C2, R),
            photon(GL, F1, L),
            photon(GL, F2, L),
            photon(GR, F1, R),
            photon(GR, F2, R),
            photon(GL, C1, L),
            photon(GL, C3, L),
            photon(GR, C1, R),
            photon(GR, C3, R),
            BasisState::ground(EL, GL, G0),
            BasisState::ground(G0, GL, EL),
            BasisState::ground(ER, GR, G0),
            BasisState::ground(G0, GR, ER),
            BasisState::ground(GL, GL, G0),
            BasisState::ground(G0, GL, GL),
            BasisState::ground(GR, GR, G0),
            BasisState::ground(G0, GR, GR),
        ];
        OrderedBasis::from_states(states).expect("coherent basis has no duplicates")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &BasisState {
        &self.states[i]
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn contains(&self, s: &BasisState) -> bool {
        self.index.contains_key(s)
    }

    /// Whether `self` starts with exactly the states of `other`, in order.
    pub fn extends(&self, other: &OrderedBasis) -> bool {
        other.len() <= self.len() && self.states[..other.len()] == other.states[..]
    }

    fn push(&mut self, s: BasisState) {
        self.index.insert(s, self.states.len());
        self.states.push(s);
    }

    /// Whitespace-aligned table: index, atom1, atom2, atom3, c1, f1, c2, f2, c3.
    pub fn manifest(&self) -> String {
        let mut out = String::from("index atom1 atom2 atom3 c1 f1 c2 f2 c3\n");
        for (i, s) in self.states.iter().enumerate() {
            let mut row = format!(
                "{} {} {} {}",
                i + 1,
                s.atoms[0].label(),
                s.atoms[1].label(),
                s.atoms[2].label()
            );
            for mode in Mode::ALL {
                row.push(' ');
                row.push_str(s.photons.get(mode).map_or("0", |p| p.label()));
            }
            out.push_str(&row);
            out.push('\n');
        }
        out
    }
}

/// Smallest superset of `basis` closed under every operator in `ops`.
///
/// States are visited in index order and operators in iteration order, so new
/// states are appended deterministically. To close under a Hamiltonian pass
/// both its terms and their adjoints.
pub fn close_under<'a>(
    basis: &OrderedBasis,
    ops: impl IntoIterator<Item = &'a OpString>,
    cap: usize,
) -> Result<OrderedBasis> {
    let ops: Vec<&OpString> = ops.into_iter().collect();
    let mut closed = basis.clone();
    let mut cursor = 0;
    while cursor < closed.len() {
        let s = *closed.state(cursor);
        for op in &ops {
            if let Some(next) = op.apply(&s) {
                if !closed.contains(&next) {
                    if closed.len() >= cap {
                        return Err(Error::ClosureCap { cap });
                    }
                    closed.push(next);
                }
            }
        }
        cursor += 1;
    }
    Ok(closed)
}

/// Closure of `basis` under the full Hamiltonian (drives and cavity-fiber
/// couplings) and the given jump channels.
pub fn close_under_jumps(
    basis: &OrderedBasis,
    jumps: &[crate::dynamics::JumpChannel],
    cap: usize,
) -> Result<OrderedBasis> {
    let h_ops = crate::hamiltonians::hamiltonian_ops();
    close_under(basis, h_ops.iter().chain(jumps.iter().map(|j| &j.op)), cap)
}

/// The coherent basis extended by every state reachable through jumps.
pub fn jump_closed_basis() -> OrderedBasis {
    close_under_jumps(
        &OrderedBasis::coherent(),
        &crate::dynamics::jump_channels(),
        DEFAULT_CLOSURE_CAP,
    )
    .expect("jump closure stays far below the default cap")
}

/// Normalized complex amplitudes over an ordered basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    pub const NORM_TOL: f64 = 1e-8;

    pub fn new(amps: DVector<C64>) -> Result<Self> {
        let norm_sq = amps.norm_squared();
        if (norm_sq - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(StateVector { amps })
    }

    pub fn normalized(amps: DVector<C64>) -> Result<Self> {
        let norm = amps.norm();
        if norm < 1e-300 {
            return Err(Error::NotNormalized { norm_sq: 0.0 });
        }
        Ok(StateVector { amps: amps / C64::from(norm) })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::normalized(DVector::from_iterator(
            coeffs.len(),
            coeffs.iter().map(|&c| C64::from(c)),
        ))
    }

    /// Integrator output: skips the normalization check.
    pub(crate) fn from_raw(amps: DVector<C64>) -> Self {
        StateVector { amps }
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut amps = DVector::zeros(dim);
        amps[index] = C64::from(1.0);
        StateVector { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amplitude(&self, i: usize) -> C64 {
        self.amps[i]
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::BasisMismatch(format!(
                "dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self.amps.dotc(&other.amps))
    }

    /// Zero-pad onto a larger basis that extends the current one.
    pub fn padded(&self, dim: usize) -> Result<StateVector> {
        if dim < self.dim() {
            return Err(Error::BasisMismatch(format!(
                "cannot pad a {}-dim state to {}",
                self.dim(),
                dim
            )));
        }
        let mut amps = DVector::zeros(dim);
        amps.rows_mut(0, self.dim()).copy_from(&self.amps);
        Ok(StateVector { amps })
    }

    /// Global phase fixed so the first nonzero amplitude is real-positive.
    pub fn phase_fixed(mut self) -> StateVector {
        if let Some(first) = self.amps.iter().find(|a| a.norm() > 1e-12).copied() {
            let phase = first.conj() / first.norm();
            self.amps *= phase;
        }
        self
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<C64>,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-8;
    pub const EIGEN_TOL: f64 = 1e-7;

    pub fn new(rho: DMatrix<C64>) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::InvalidDensityMatrix("not square".into()));
        }
        let dm = DensityMatrix { rho };
        let herm = dm.hermiticity_residual();
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "hermiticity residual {herm:e}"
            )));
        }
        let tr = dm.trace();
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = dm.min_eigenvalue();
        if min < -Self::EIGEN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(dm)
    }

    pub(crate) fn from_raw(rho: DMatrix<C64>) -> Self {
        DensityMatrix { rho }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        DensityMatrix {
            rho: psi.amplitudes() * psi.amplitudes().adjoint(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            rho: DMatrix::identity(dim, dim) / C64::from(dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (&self.rho - self.rho.adjoint())
            .iter()
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * C64::from(0.5);
        herm.symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn populations(&self) -> Vec<f64> {
        self.rho.diagonal().iter().map(|z| z.re).collect()
    }

    /// `<psi|rho|psi>`, with `psi` zero-padded onto closure states.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        let psi = psi.padded(self.dim())?;
        let a = psi.amplitudes();
        Ok((a.adjoint() * &self.rho * a)[(0, 0)].re)
    }
}

/// Orthonormal basis of ker(H_acf) on the coherent manifold together with the
/// single-excitation dark state `|Psi_D>`.
#[derive(Clone, Debug)]
pub struct DarkSubspace {
    vectors: Vec<StateVector>,
    psi_d: StateVector,
    threshold: f64,
}

impl DarkSubspace {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Canonical kernel basis: Gram-Schmidt of the kernel projections of
    /// `|phi_1>, |phi_2>, ...` in index order.
    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    pub fn psi_d(&self) -> &StateVector {
        &self.psi_d
    }

    /// Singular-value threshold used to decide the kernel.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Kernel of an atom-cavity-fiber Hamiltonian restricted to the coherent
/// manifold.
///
/// Singular values below `1e-10` times the largest one count as zero. `Psi_D`
/// is the normalized kernel projection of `|phi_2>`, which is the only kernel
/// direction the `Omega_2` drive reaches from `|phi_1>`.
pub fn dark_subspace(h_acf: &HamiltonianMatrix) -> Result<DarkSubspace> {
    let n = COHERENT_DIM.min(h_acf.dim());
    let block = h_acf.matrix().view((0, 0), (n, n)).into_owned();
    let svd = block.svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let smax = svd.singular_values.max();
    let threshold = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let kernel: Vec<DVector<C64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < threshold)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect();
    if kernel.len() != KERNEL_DIM {
        return Err(Error::KernelDimension {
            found: kernel.len(),
            expected: KERNEL_DIM,
        });
    }
    let project = |x: &DVector<C64>| -> DVector<C64> {
        kernel
            .iter()
            .fold(DVector::zeros(n), |acc, k| acc + k * k.dotc(x))
    };

    let mut vectors: Vec<DVector<C64>> = Vec::with_capacity(kernel.len());
    for i in 0..n {
        if vectors.len() == kernel.len() {
            break;
        }
        let mut e = DVector::zeros(n);
        e[i] = C64::from(1.0);
        let mut w = project(&e);
        for q in &vectors {
            let c = q.dotc(&w);
            w -= q * c;
        }
        let norm = w.norm();
        if norm > 1e-8 {
            vectors.push(w / C64::from(norm));
        }
    }

    let mut phi2 = DVector::zeros(n);
    phi2[1] = C64::from(1.0);
    let psi_d = StateVector::normalized(project(&phi2))
        .map_err(|_| Error::KernelDimension {
            found: 0,
            expected: 1,
        })?
        .phase_fixed();
    let vectors = vectors
        .into_iter()
        .map(|v| StateVector::from_raw(v).phase_fixed())
        .collect();
    Ok(DarkSubspace {
        vectors,
        psi_d,
        threshold,
    })
}

/// Distinguished states of the scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedState {
    /// `|phi_1>`.
    Psi1,
    /// `(|phi_17> + |phi_18> + |phi_19> + |phi_20>) / 2`.
    Psi2,
    /// Single-excitation dark state of H_acf.
    PsiD,
    /// `(|phi_1> - |phi_17> - |phi_18> - |phi_19> - |phi_20>) / sqrt 5`.
    TargetLri,
    /// `(|phi_1> + |phi_17> + |phi_18> + |phi_19> + |phi_20>) / sqrt 5`.
    TargetTqd,
}

impl NamedState {
    pub fn parse(name: &str) -> Option<NamedState> {
        match name {
            "psi1" => Some(NamedState::Psi1),
            "psi2" => Some(NamedState::Psi2),
            "psiD" | "psid" => Some(NamedState::PsiD),
            "target_lri" => Some(NamedState::TargetLri),
            "target_tqd" => Some(NamedState::TargetTqd),
            _ => None,
        }
    }
}

/// Build a named state over the coherent manifold, padded to `dim`.
pub fn named_state(name: NamedState, params: &CouplingParams, dim: usize) -> Result<StateVector> {
    let mut c = [0.0; COHERENT_DIM];
    let state = match name {
        NamedState::Psi1 => {
            c[0] = 1.0;
            StateVector::from_real(&c)?
        }
        NamedState::Psi2 => {
            c[16..20].fill(1.0);
            StateVector::from_real(&c)?
        }
        NamedState::TargetLri => {
            c[0] = 1.0;
            c[16..20].fill(-1.0);
            StateVector::from_real(&c)?
        }
        NamedState::TargetTqd => {
            c[0] = 1.0;
            c[16..20].fill(1.0);
            StateVector::from_real(&c)?
        }
        NamedState::PsiD => {
            let h = build_h_acf(&OrderedBasis::coherent(), params);
            dark_subspace(&h)?.psi_d().clone()
        }
    };
    state.padded(dim)
}

/// Permutation matrix of the mirror map on `basis`. Fails if the basis is not
/// mirror-closed.
pub fn mirror_operator(basis: &OrderedBasis) -> Result<DMatrix<C64>> {
    let n = basis.len();
    let mut p = DMatrix::zeros(n, n);
    for (i, s) in basis.states().iter().enumerate() {
        let j = basis
            .index_of(&s.mirrored())
            .ok_or_else(|| Error::BasisMismatch(format!("mirror image of {s} missing")))?;
        p[(j, i)] = C64::from(1.0);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use AtomLevel::*;

    #[test]
    fn coherent_basis_matches_canonical_order() {
        let b = OrderedBasis::coherent();
        assert_eq!(b.len(), 20);
        assert_eq!(*b.state(0), BasisState::ground(G0, G0, G0));
        assert_eq!(*b.state(16), BasisState::ground(GL, GL, G0));
        assert_eq!(*b.state(19), BasisState::ground(G0, GR, GR));
        assert_eq!(
            *b.state(2),
            BasisState::new([G0, GL, G0], PhotonConfig::single(Mode::C2, Polarization::L))
                .unwrap()
        );
        assert_eq!(
            *b.state(11),
            BasisState::new([G0, GR, G0], PhotonConfig::single(Mode::C3, Polarization::R))
                .unwrap()
        );
        for s in b.states() {
            assert!(s.excitation() <= 1);
        }
    }

    #[test]
    fn level_constraints_enforced() {
        assert!(BasisState::new([G0, EL, G0], PhotonConfig::vacuum()).is_err());
        assert!(BasisState::new([E0, G0, G0], PhotonConfig::vacuum()).is_err());
    }

    #[test]
    fn duplicate_states_rejected() {
        let s = BasisState::ground(G0, G0, G0);
        assert!(matches!(
            OrderedBasis::from_states(vec![s, s]),
            Err(Error::DuplicateState(_))
        ));
    }

    #[test]
    fn op_string_acts_right_to_left() {
        // b1L^dag a2L maps phi_3 to phi_5
        let op = OpString::new(vec![
            LocalOp::Create(Mode::F1, Polarization::L),
            LocalOp::Annihilate(Mode::C2, Polarization::L),
        ]);
        let b = OrderedBasis::coherent();
        assert_eq!(op.apply(b.state(2)), Some(*b.state(4)));
        assert_eq!(op.adjoint().apply(b.state(4)), Some(*b.state(2)));
        assert_eq!(op.apply(b.state(0)), None);
    }

    #[test]
    fn closure_of_single_excited_state_under_atom1_decay() {
        let b = OrderedBasis::coherent();
        let start = OrderedBasis::from_states(vec![*b.state(12)]).unwrap();
        let decay = [
            OpString::single(LocalOp::Atom { atom: 0, from: EL, to: GL }),
            OpString::single(LocalOp::Atom { atom: 0, from: EL, to: G0 }),
        ];
        let closed = close_under(&start, decay.iter(), 10).unwrap();
        assert_eq!(
            closed.states(),
            &[*b.state(12), *b.state(16), BasisState::ground(G0, GL, G0)]
        );
    }

    #[test]
    fn closure_respects_cap() {
        let b = OrderedBasis::coherent();
        let jumps = crate::dynamics::jump_channels();
        assert!(matches!(
            close_under_jumps(&b, &jumps, 21),
            Err(Error::ClosureCap { cap: 21 })
        ));
    }

    #[test]
    fn manifest_lists_every_state() {
        let m = OrderedBasis::coherent().manifest();
        let lines: Vec<_> = m.lines().collect();
        assert_eq!(lines.len(), 21);
        assert_eq!(lines[0], "index atom1 atom2 atom3 c1 f1 c2 f2 c3");
        assert_eq!(lines[3], "3 g0 gL g0 0 0 L 0 0");
        assert_eq!(lines[13], "13 eL gL g0 0 0 0 0 0");
    }

    #[test]
    fn state_vector_checks_norm() {
        let v = DVector::from_element(2, C64::from(1.0));
        assert!(matches!(
            StateVector::new(v.clone()),
            Err(Error::NotNormalized { .. })
        ));
        let s = StateVector::normalized(v).unwrap();
        assert_relative_eq!(s.norm(), 1.0, epsilon = 1e-15);
        assert!(StateVector::normalized(DVector::zeros(3)).is_err());
    }

    #[test]
    fn phase_convention_first_nonzero_real_positive() {
        let v = DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(0.0, -0.6), C64::new(0.8, 0.0)]);
        let s = StateVector::new(v).unwrap().phase_fixed();
        assert_relative_eq!(s.amplitude(1).re, 0.6, epsilon = 1e-15);
        assert_relative_eq!(s.amplitude(1).im, 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.amplitude(2).im, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn density_matrix_validation() {
        let psi = StateVector::from_real(&[1.0, 1.0]).unwrap();
        assert!(DensityMatrix::new(DensityMatrix::from_pure(&psi).matrix().clone()).is_ok());
        let mut bad = DMatrix::<C64>::identity(2, 2);
        assert!(DensityMatrix::new(bad.clone()).is_err()); // trace 2
        bad[(0, 0)] = C64::from(1.5);
        bad[(1, 1)] = C64::from(-0.5);
        assert!(DensityMatrix::new(bad).is_err()); // negative eigenvalue
        let mut skew = DMatrix::<C64>::identity(2, 2) * C64::from(0.5);
        skew[(0, 1)] = C64::new(0.0, 0.1);
        assert!(DensityMatrix::new(skew).is_err());
    }

    #[test]
    fn target_states() {
        let p = CouplingParams::resonant();
        let lri = named_state(NamedState::TargetLri, &p, 20).unwrap();
        let psi1 = named_state(NamedState::Psi1, &p, 20).unwrap();
        let psi2 = named_state(NamedState::Psi2, &p, 20).unwrap();
        assert_relative_eq!(lri.norm(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(lri.inner(&psi1).unwrap().re, 1.0 / 5f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(psi2.inner(&psi1).unwrap().norm(), 0.0);
        assert_eq!(named_state(NamedState::Psi1, &p, 22).unwrap().dim(), 22);
        assert_eq!(NamedState::parse("target_tqd"), Some(NamedState::TargetTqd));
        assert_eq!(NamedState::parse("nope"), None);
    }

    #[test]
    fn mirror_is_an_involution_on_the_coherent_basis() {
        let b = OrderedBasis::coherent();
        for s in b.states() {
            assert!(b.contains(&s.mirrored()));
            assert_eq!(s.mirrored().mirrored(), *s);
        }
        let p = mirror_operator(&b).unwrap();
        assert_relative_eq!((&p * &p - DMatrix::identity(20, 20)).norm(), 0.0);
    }
}
