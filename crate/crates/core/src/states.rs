//! Source states and network states: Bell states, isotropic states, the GHZ
//! state, the star-network product state, reduced states, the two-qubit
//! correlation T-matrix, and random-state sampling.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    expectation, herm_eigenvalues, kron, partial_trace, permute_subsystems, ComplexMatrix,
    SubsystemLayout, HERM_TOL, PSD_TOL,
};
use crate::qubit::{pauli, BlochVector};

/// Largest star network kept as a fully materialized state (4^5 = 1024).
pub const MAX_SOURCES: usize = 5;

// ---------------------------------------------------------------------------
// DensityMatrix
// ---------------------------------------------------------------------------

/// Validated quantum state: Hermitian, unit trace, positive semidefinite,
/// annotated with its tensor-factor layout.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    layout: SubsystemLayout,
}

impl DensityMatrix {
    /// Validate and wrap a candidate state.
    pub fn new(mat: ComplexMatrix, layout: SubsystemLayout) -> Result<Self> {
        if !mat.is_square() || mat.rows() != layout.total() {
            return Err(Error::InvalidState(format!(
                "state dimension {}x{} does not match layout total {}",
                mat.rows(),
                mat.cols(),
                layout.total()
            )));
        }
        let dev = mat.herm_deviation();
        if dev > HERM_TOL {
            return Err(Error::NotHermitian { max_dev: dev });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidState(format!(
                "trace {} + {}i differs from 1",
                tr.re, tr.im
            )));
        }
        let vals = herm_eigenvalues(&mat)?;
        if let Some(&min) = vals.first() {
            if min < PSD_TOL {
                return Err(Error::NotPsd { min_eig: min });
            }
        }
        Ok(Self { mat, layout })
    }

    /// Wrap a matrix known valid by construction (tensor products and
    /// permutations of validated states).
    fn from_valid(mat: ComplexMatrix, layout: SubsystemLayout) -> Self {
        debug_assert_eq!(mat.rows(), layout.total());
        Self { mat, layout }
    }

    /// Rank-one state from a normalized state vector.
    pub fn from_pure(amplitudes: &[Complex64], layout: SubsystemLayout) -> Result<Self> {
        if amplitudes.len() != layout.total() {
            return Err(Error::InvalidState(format!(
                "{} amplitudes do not match layout total {}",
                amplitudes.len(),
                layout.total()
            )));
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!(
                "state vector norm^2 = {} differs from 1",
                norm_sq
            )));
        }
        let n = amplitudes.len();
        let mat = ComplexMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj());
        Ok(Self::from_valid(mat, layout))
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    /// Tensor product of two valid states; the layouts concatenate.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mat = kron(&self.mat, &other.mat)?;
        let mut dims = self.layout.dims().to_vec();
        dims.extend_from_slice(other.layout.dims());
        Ok(Self::from_valid(mat, SubsystemLayout::new(dims)?))
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> Result<f64> {
        expectation(op, &self.mat)
    }

    /// Bloch vector of a single-qubit state.
    pub fn bloch_vector(&self) -> Result<BlochVector> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch(
                "Bloch vector is defined for single-qubit states".into(),
            ));
        }
        let mut v = [0.0; 3];
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = expectation(&pauli(j + 1)?, &self.mat)?;
        }
        Ok(BlochVector(v))
    }
}

// ---------------------------------------------------------------------------
// Named states
// ---------------------------------------------------------------------------

/// The four maximally entangled two-qubit states:
/// `Psi+- = (|00> +- |11>)/sqrt(2)`, `Phi+- = (|01> +- |10>)/sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellKind {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PsiPlus,
        BellKind::PsiMinus,
        BellKind::PhiPlus,
        BellKind::PhiMinus,
    ];
}

pub fn bell_state(kind: BellKind) -> DensityMatrix {
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let amps = match kind {
        BellKind::PsiPlus => [a, z, z, a],
        BellKind::PsiMinus => [a, z, z, -a],
        BellKind::PhiPlus => [z, a, a, z],
        BellKind::PhiMinus => [z, a, -a, z],
    };
    DensityMatrix::from_pure(&amps, SubsystemLayout::qubits(2).expect("two qubits"))
        .expect("Bell states are valid")
}

/// Isotropic two-qubit state `eta |Psi+><Psi+| + (1 - eta) I/4`.
pub fn isotropic(eta: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Parameter(format!(
            "isotropic visibility eta = {} outside [0, 1]",
            eta
        )));
    }
    let bell = bell_state(BellKind::PsiPlus);
    let mat = bell
        .matrix()
        .scale_re(eta)
        .add(&ComplexMatrix::identity(4).scale_re((1.0 - eta) / 4.0))?;
    Ok(DensityMatrix::from_valid(
        mat,
        SubsystemLayout::qubits(2)?,
    ))
}

/// Three-qubit GHZ state `(|000> + |111>)/sqrt(2)`.
pub fn ghz() -> DensityMatrix {
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let amps = [a, z, z, z, z, z, z, a];
    DensityMatrix::from_pure(&amps, SubsystemLayout::qubits(3).expect("three qubits"))
        .expect("GHZ is valid")
}

// ---------------------------------------------------------------------------
// Star network state
// ---------------------------------------------------------------------------

/// `n` independent two-qubit sources, one per edge observer. The global wire
/// order of the assembled state is `A1 B1 A2 B2 ... An Bn`.
#[derive(Debug, Clone)]
pub struct StarNetworkState {
    sources: Vec<DensityMatrix>,
}

pub fn star_state(sources: Vec<DensityMatrix>) -> Result<StarNetworkState> {
    if sources.is_empty() {
        return Err(Error::Parameter("star network needs at least one source".into()));
    }
    for (i, s) in sources.iter().enumerate() {
        if s.dim() != 4 || s.layout().dims() != [2, 2] {
            return Err(Error::InvalidState(format!(
                "source {} is not a two-qubit state",
                i
            )));
        }
    }
    Ok(StarNetworkState { sources })
}

impl StarNetworkState {
    pub fn n(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self) -> &[DensityMatrix] {
        &self.sources
    }

    pub fn source(&self, mu: usize) -> &DensityMatrix {
        &self.sources[mu]
    }

    /// The full product state `W` in wire order `A1 B1 ... An Bn`.
    pub fn full_state(&self) -> Result<DensityMatrix> {
        if self.n() > MAX_SOURCES {
            return Err(Error::Resource(format!(
                "materializing W for n = {} sources exceeds the supported maximum {}",
                self.n(),
                MAX_SOURCES
            )));
        }
        let mut acc = self.sources[0].clone();
        for s in &self.sources[1..] {
            acc = acc.tensor(s)?;
        }
        Ok(acc)
    }

    /// `W` rewired to `A1 A2 ... An B1 B2 ... Bn`, so that joint operators
    /// for the Alices and for Bob factor into contiguous blocks.
    pub fn bob_ordered_state(&self) -> Result<DensityMatrix> {
        let w = self.full_state()?;
        let n = self.n();
        if n == 1 {
            return Ok(w);
        }
        // output position i <- input subsystem perm[i]
        let mut perm = Vec::with_capacity(2 * n);
        perm.extend((0..n).map(|mu| 2 * mu)); // Alice wires
        perm.extend((0..n).map(|mu| 2 * mu + 1)); // Bob wires
        let mat = permute_subsystems(w.matrix(), w.layout(), &perm)?;
        Ok(DensityMatrix::from_valid(
            mat,
            SubsystemLayout::qubits(2 * n)?,
        ))
    }
}

// ---------------------------------------------------------------------------
// T-matrix and reduced states
// ---------------------------------------------------------------------------

/// Two-qubit Pauli correlation matrix `t_ij = Tr[rho (sigma_i (x) sigma_j)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TMatrix(pub [[f64; 3]; 3]);

impl TMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    /// `T^T r`.
    pub fn apply_transpose(&self, r: &BlochVector) -> BlochVector {
        let mut out = [0.0; 3];
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = (0..3).map(|i| self.0[i][j] * r.0[i]).sum();
        }
        BlochVector(out)
    }

    /// Largest singular value, from the spectrum of `T^T T`.
    pub fn largest_singular_value(&self) -> f64 {
        let tt = ComplexMatrix::from_fn(3, 3, |i, j| {
            let v: f64 = (0..3).map(|k| self.0[k][i] * self.0[k][j]).sum();
            Complex64::new(v, 0.0)
        });
        let vals = herm_eigenvalues(&tt).expect("T^T T is symmetric");
        vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }
}

pub fn t_matrix(rho: &DensityMatrix) -> Result<TMatrix> {
    if rho.dim() != 4 || rho.layout().dims() != [2, 2] {
        return Err(Error::DimensionMismatch(
            "T-matrix is defined for two-qubit states".into(),
        ));
    }
    let mut t = [[0.0; 3]; 3];
    for (i, row) in t.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let op = kron(&pauli(i + 1)?, &pauli(j + 1)?)?;
            *slot = expectation(&op, rho.matrix())?;
        }
    }
    Ok(TMatrix(t))
}

/// Which marginal of a two-qubit state to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Alice,
    Bob,
}

pub fn reduced_state(rho: &DensityMatrix, keep: Side) -> Result<DensityMatrix> {
    if rho.dim() != 4 || rho.layout().dims() != [2, 2] {
        return Err(Error::DimensionMismatch(
            "reduced_state expects a two-qubit state".into(),
        ));
    }
    let traced = match keep {
        Side::Alice => [1usize],
        Side::Bob => [0usize],
    };
    let mat = partial_trace(rho.matrix(), rho.layout(), &traced)?;
    DensityMatrix::new(mat, SubsystemLayout::qubits(1)?)
}

// ---------------------------------------------------------------------------
// Random-state sampling
// ---------------------------------------------------------------------------

/// Two independent standard normals via Box-Muller.
fn gaussian_pair(rng: &mut impl Rng) -> (f64, f64) {
    let u1: f64 = loop {
        let u = rng.gen::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Haar-random pure state as a normalized complex-Gaussian vector.
pub fn haar_random_pure(dim: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let mut amps: Vec<Complex64> = (0..dim)
        .map(|_| {
            let (re, im) = gaussian_pair(rng);
            Complex64::new(re, im)
        })
        .collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    amps
}

/// Weights from a flat Dirichlet: normalized unit-rate exponentials.
pub fn dirichlet_uniform(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k)
        .map(|_| {
            let u: f64 = loop {
                let u = rng.gen::<f64>();
                if u > 0.0 {
                    break u;
                }
            };
            -u.ln()
        })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Full-rank random state: a Dirichlet-weighted mixture of `terms`
/// Haar-random pure states.
pub fn random_density(layout: SubsystemLayout, terms: usize, rng: &mut impl Rng) -> DensityMatrix {
    let dim = layout.total();
    let weights = dirichlet_uniform(terms.max(1), rng);
    let mut mat = ComplexMatrix::zeros(dim, dim).expect("within cap");
    for &w in &weights {
        let psi = haar_random_pure(dim, rng);
        for i in 0..dim {
            for j in 0..dim {
                let v = mat.get(i, j) + psi[i] * psi[j].conj() * w;
                mat.set(i, j, v);
            }
        }
    }
    DensityMatrix::from_valid(mat, layout)
}

/// Random two-qubit state: mixture of 4 Haar-random pure states.
pub fn random_two_qubit_state(rng: &mut impl Rng) -> DensityMatrix {
    random_density(SubsystemLayout::qubits(2).expect("two qubits"), 4, rng)
}

/// Random single-qubit pure state.
pub fn random_pure_qubit(rng: &mut impl Rng) -> DensityMatrix {
    let amps = haar_random_pure(2, rng);
    DensityMatrix::from_pure(&amps, SubsystemLayout::qubits(1).expect("one qubit"))
        .expect("normalized by construction")
}

/// Random Bell-diagonal two-qubit state; both marginals are maximally mixed.
pub fn random_bell_diagonal(rng: &mut impl Rng) -> DensityMatrix {
    let weights = dirichlet_uniform(4, rng);
    let mut mat = ComplexMatrix::zeros(4, 4).expect("within cap");
    for (kind, &w) in BellKind::ALL.iter().zip(&weights) {
        mat = mat
            .add(&bell_state(*kind).matrix().scale_re(w))
            .expect("shape fixed");
    }
    DensityMatrix::from_valid(mat, SubsystemLayout::qubits(2).expect("two qubits"))
}
