//! Conditional-state assemblages, network assemblages, Born-rule
//! correlation tables, and no-signalling validation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{kron, kron_all, partial_trace, ComplexMatrix};
use crate::qubit::{is_psd, QubitBinaryPOVM};
use crate::states::{DensityMatrix, StarNetworkState};

// ---------------------------------------------------------------------------
// Assemblage
// ---------------------------------------------------------------------------

/// Unnormalized conditional states `rho~_{a|x}` prepared on Bob's side by a
/// remote measurement with `settings` inputs and `outcomes` results each.
#[derive(Debug, Clone)]
pub struct Assemblage {
    settings: usize,
    outcomes: usize,
    states: Vec<ComplexMatrix>, // indexed x * outcomes + a
}

impl Assemblage {
    pub fn new(settings: usize, outcomes: usize, states: Vec<ComplexMatrix>) -> Result<Self> {
        if states.len() != settings * outcomes {
            return Err(Error::DimensionMismatch(format!(
                "assemblage needs {} members, got {}",
                settings * outcomes,
                states.len()
            )));
        }
        Ok(Self { settings, outcomes, states })
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    /// The member `rho~_{a|x}`.
    pub fn state(&self, x: usize, a: usize) -> &ComplexMatrix {
        &self.states[x * self.outcomes + a]
    }

    pub fn state_mut(&mut self, x: usize, a: usize) -> &mut ComplexMatrix {
        &mut self.states[x * self.outcomes + a]
    }

    /// `sum_a rho~_{a|x}`; equals Bob's reduced state for every x when the
    /// assemblage is physical.
    pub fn setting_total(&self, x: usize) -> ComplexMatrix {
        let mut total = self.state(x, 0).clone();
        for a in 1..self.outcomes {
            total = total.add(self.state(x, a)).expect("uniform member shape");
        }
        total
    }

    /// Checks each member is PSD and the setting totals agree.
    pub fn validate(&self) -> Result<()> {
        for x in 0..self.settings {
            for a in 0..self.outcomes {
                let m = self.state(x, a);
                let dev = m.herm_deviation();
                if dev > 1e-9 {
                    return Err(Error::NotHermitian { max_dev: dev });
                }
                if !is_psd(m)? {
                    return Err(Error::NotPsd {
                        min_eig: crate::linalg::herm_eigenvalues(m)?[0],
                    });
                }
            }
        }
        let (ok, dev) = no_signalling_check(self);
        if !ok {
            return Err(Error::Constraint(format!(
                "assemblage setting totals disagree by {:.3e}",
                dev
            )));
        }
        Ok(())
    }
}

/// Conditional states of a two-qubit state under a list of binary POVMs on
/// the Alice wire: `rho~_{a|x} = Tr_A[(Pi_{a|x} (x) I) W]`.
pub fn conditional_states(
    w: &DensityMatrix,
    povms: &[QubitBinaryPOVM],
) -> Result<Assemblage> {
    if w.dim() != 4 || w.layout().dims() != [2, 2] {
        return Err(Error::DimensionMismatch(
            "conditional_states expects a two-qubit source state".into(),
        ));
    }
    if povms.is_empty() {
        return Err(Error::Parameter("need at least one POVM setting".into()));
    }
    let id = ComplexMatrix::identity(2);
    let mut states = Vec::with_capacity(povms.len() * 2);
    for povm in povms {
        for a in 0..2 {
            let op = kron(povm.effect(a), &id)?;
            let post = op.matmul(w.matrix())?;
            states.push(partial_trace(&post, w.layout(), &[0])?);
        }
    }
    Assemblage::new(povms.len(), 2, states)
}

/// Largest entrywise deviation between the per-setting totals of an
/// assemblage. Returns `(ok, max_deviation)` with `ok` iff the deviation is
/// at most 1e-9.
pub fn no_signalling_check(a: &Assemblage) -> (bool, f64) {
    let reference = a.setting_total(0);
    let mut dev: f64 = 0.0;
    for x in 1..a.settings() {
        dev = dev.max(a.setting_total(x).max_abs_diff(&reference));
    }
    (dev <= 1e-9, dev)
}

/// Per-source assemblages of a star network under per-source POVM sets.
pub fn network_assemblage(
    s: &StarNetworkState,
    per_source_povms: &[Vec<QubitBinaryPOVM>],
) -> Result<Vec<Assemblage>> {
    if per_source_povms.len() != s.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} POVM sets for {} sources",
            per_source_povms.len(),
            s.n()
        )));
    }
    s.sources()
        .iter()
        .zip(per_source_povms)
        .map(|(w, povms)| conditional_states(w, povms))
        .collect()
}

/// The network conditional state for outcome string `outcomes` under setting
/// string `settings`: the tensor product of the per-source members.
pub fn network_conditional_state(
    per_source: &[Assemblage],
    settings: &[usize],
    outcomes: &[usize],
) -> Result<ComplexMatrix> {
    if per_source.len() != settings.len() || per_source.len() != outcomes.len() {
        return Err(Error::DimensionMismatch(
            "settings/outcomes must match the source count".into(),
        ));
    }
    let members: Vec<ComplexMatrix> = per_source
        .iter()
        .zip(settings.iter().zip(outcomes))
        .map(|(a, (&x, &o))| a.state(x, o).clone())
        .collect();
    kron_all(&members)
}

// ---------------------------------------------------------------------------
// Correlation tables
// ---------------------------------------------------------------------------

/// Full table of joint probabilities `p(a-bar, b | x-bar, y)` for `n` Alices
/// with two outcomes each and one Bob with `bob_settings` inputs of
/// `bob_outcomes` results. Entries are grouped by setting tuple `(x-bar, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    alice_settings: Vec<usize>,
    bob_settings: usize,
    bob_outcomes: usize,
    p: Vec<f64>,
}

impl CorrelationTable {
    pub fn zeroed(
        alice_settings: Vec<usize>,
        bob_settings: usize,
        bob_outcomes: usize,
    ) -> Result<Self> {
        if alice_settings.is_empty() || alice_settings.contains(&0) {
            return Err(Error::Parameter("every Alice needs at least one setting".into()));
        }
        if bob_settings == 0 || bob_outcomes == 0 {
            return Err(Error::Parameter("Bob needs settings and outcomes".into()));
        }
        let tuples: usize = alice_settings.iter().product::<usize>() * bob_settings;
        let outcomes = (1usize << alice_settings.len()) * bob_outcomes;
        Ok(Self {
            alice_settings,
            bob_settings,
            bob_outcomes,
            p: vec![0.0; tuples * outcomes],
        })
    }

    pub fn sources(&self) -> usize {
        self.alice_settings.len()
    }

    pub fn alice_settings(&self) -> &[usize] {
        &self.alice_settings
    }

    pub fn bob_settings(&self) -> usize {
        self.bob_settings
    }

    pub fn bob_outcomes(&self) -> usize {
        self.bob_outcomes
    }

    /// Number of `(x-bar, y)` setting tuples.
    pub fn tuple_count(&self) -> usize {
        self.alice_settings.iter().product::<usize>() * self.bob_settings
    }

    /// Joint outcomes per tuple: `2^n * bob_outcomes`.
    pub fn outcomes_per_tuple(&self) -> usize {
        (1usize << self.sources()) * self.bob_outcomes
    }

    /// Linear index of a setting tuple; Alice settings vary fastest in the
    /// last source, Bob's setting is the outermost digit.
    pub fn tuple_index(&self, alice: &[usize], bob: usize) -> usize {
        debug_assert_eq!(alice.len(), self.sources());
        debug_assert!(bob < self.bob_settings);
        let mut idx = bob;
        for (pos, &x) in alice.iter().enumerate() {
            debug_assert!(x < self.alice_settings[pos]);
            idx = idx * self.alice_settings[pos] + x;
        }
        idx
    }

    /// Decode a linear tuple index back into `(alice settings, bob setting)`.
    pub fn decode_tuple(&self, mut idx: usize) -> (Vec<usize>, usize) {
        let n = self.sources();
        let mut alice = vec![0; n];
        for pos in (0..n).rev() {
            alice[pos] = idx % self.alice_settings[pos];
            idx /= self.alice_settings[pos];
        }
        (alice, idx)
    }

    /// Joint outcome index within a tuple; Alice bits first (source 0 most
    /// significant), Bob outcome last.
    pub fn outcome_index(&self, alice: &[usize], bob: usize) -> usize {
        debug_assert_eq!(alice.len(), self.sources());
        let mut idx = 0;
        for &a in alice {
            debug_assert!(a < 2);
            idx = idx * 2 + a;
        }
        idx * self.bob_outcomes + bob
    }

    pub fn decode_outcome(&self, idx: usize) -> (Vec<usize>, usize) {
        let bob = idx % self.bob_outcomes;
        let mut rest = idx / self.bob_outcomes;
        let n = self.sources();
        let mut alice = vec![0; n];
        for pos in (0..n).rev() {
            alice[pos] = rest % 2;
            rest /= 2;
        }
        (alice, bob)
    }

    pub fn prob(&self, alice_out: &[usize], bob_out: usize, alice_set: &[usize], bob_set: usize) -> f64 {
        let t = self.tuple_index(alice_set, bob_set);
        self.p[t * self.outcomes_per_tuple() + self.outcome_index(alice_out, bob_out)]
    }

    pub fn set_prob(
        &mut self,
        alice_out: &[usize],
        bob_out: usize,
        alice_set: &[usize],
        bob_set: usize,
        value: f64,
    ) {
        let t = self.tuple_index(alice_set, bob_set);
        let o = self.outcome_index(alice_out, bob_out);
        let per = self.outcomes_per_tuple();
        self.p[t * per + o] = value;
    }

    /// Outcome distribution of one setting tuple.
    pub fn tuple_distribution(&self, tuple: usize) -> &[f64] {
        let per = self.outcomes_per_tuple();
        &self.p[tuple * per..(tuple + 1) * per]
    }

    /// Normalization and positivity check.
    pub fn validate(&self) -> Result<()> {
        let per = self.outcomes_per_tuple();
        for t in 0..self.tuple_count() {
            let row = &self.p[t * per..(t + 1) * per];
            if row.iter().any(|&v| v < -1e-12) {
                return Err(Error::Constraint(format!(
                    "negative probability in tuple {}",
                    t
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Constraint(format!(
                    "tuple {} sums to {} instead of 1",
                    t, total
                )));
            }
        }
        Ok(())
    }

    /// Signed correlator of one tuple: Alice outcomes contribute `(-1)^a`,
    /// Bob outcomes the given sign pattern.
    pub fn correlator(&self, alice_set: &[usize], bob_set: usize, bob_signs: &[f64]) -> f64 {
        debug_assert_eq!(bob_signs.len(), self.bob_outcomes);
        let t = self.tuple_index(alice_set, bob_set);
        let per = self.outcomes_per_tuple();
        let row = &self.p[t * per..(t + 1) * per];
        let mut acc = 0.0;
        for (o, &p) in row.iter().enumerate() {
            let (alice_out, bob_out) = self.decode_outcome(o);
            let parity = alice_out.iter().sum::<usize>() % 2;
            let sign = if parity == 0 { 1.0 } else { -1.0 };
            acc += sign * bob_signs[bob_out] * p;
        }
        acc
    }

    /// Marginal distribution of the Alice outcomes for a given tuple.
    pub fn alice_marginal(&self, alice_set: &[usize], bob_set: usize) -> Vec<f64> {
        let t = self.tuple_index(alice_set, bob_set);
        let per = self.outcomes_per_tuple();
        let row = &self.p[t * per..(t + 1) * per];
        let alice_outcomes = 1usize << self.sources();
        let mut marg = vec![0.0; alice_outcomes];
        for (o, &p) in row.iter().enumerate() {
            marg[o / self.bob_outcomes] += p;
        }
        marg
    }
}

/// Validate a list of Bob POVM settings on a `dim`-dimensional space:
/// Hermitian PSD effects summing to the identity within 1e-9.
pub fn validate_bob_povms(bob_povms: &[Vec<ComplexMatrix>], dim: usize) -> Result<()> {
    if bob_povms.is_empty() {
        return Err(Error::InvalidPovm("Bob needs at least one setting".into()));
    }
    let outcomes = bob_povms[0].len();
    if outcomes == 0 {
        return Err(Error::InvalidPovm("empty Bob POVM".into()));
    }
    let id = ComplexMatrix::identity(dim);
    for (y, setting) in bob_povms.iter().enumerate() {
        if setting.len() != outcomes {
            return Err(Error::InvalidPovm(
                "all Bob settings must share one outcome count".into(),
            ));
        }
        let mut sum = ComplexMatrix::zeros(dim, dim)?;
        for effect in setting {
            if effect.rows() != dim || effect.cols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "Bob effect in setting {} is {}x{}, expected {}x{}",
                    y,
                    effect.rows(),
                    effect.cols(),
                    dim,
                    dim
                )));
            }
            let dev = effect.herm_deviation();
            if dev > 1e-9 {
                return Err(Error::NotHermitian { max_dev: dev });
            }
            if !is_psd(effect)? {
                return Err(Error::InvalidPovm(format!(
                    "Bob effect in setting {} is not PSD",
                    y
                )));
            }
            sum = sum.add(effect)?;
        }
        if sum.max_abs_diff(&id) > 1e-9 {
            return Err(Error::InvalidPovm(format!(
                "Bob setting {} does not sum to the identity (deviation {:.3e})",
                y,
                sum.max_abs_diff(&id)
            )));
        }
    }
    Ok(())
}

/// Born-rule correlation table for a state whose layout is the `n` Alice
/// qubits followed by Bob's space.
pub fn born_correlations_state(
    state: &DensityMatrix,
    alice_povms: &[Vec<QubitBinaryPOVM>],
    bob_povms: &[Vec<ComplexMatrix>],
) -> Result<CorrelationTable> {
    let n = alice_povms.len();
    if n == 0 {
        return Err(Error::Parameter("need at least one Alice".into()));
    }
    if alice_povms.iter().any(|s| s.is_empty()) {
        return Err(Error::Parameter("every Alice needs at least one setting".into()));
    }
    let alice_dim = 1usize << n;
    if state.dim() % alice_dim != 0 {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} is not divisible by the Alice block {}",
            state.dim(),
            alice_dim
        )));
    }
    let bob_dim = state.dim() / alice_dim;
    validate_bob_povms(bob_povms, bob_dim)?;

    let settings: Vec<usize> = alice_povms.iter().map(|s| s.len()).collect();
    let mut table = CorrelationTable::zeroed(settings, bob_povms.len(), bob_povms[0].len())?;

    let tuple_count = table.tuple_count();
    let per = table.outcomes_per_tuple();
    for t in 0..tuple_count {
        let (alice_set, bob_set) = table.decode_tuple(t);
        for o in 0..per {
            let (alice_out, bob_out) = table.decode_outcome(o);
            let mut factors: Vec<ComplexMatrix> = Vec::with_capacity(n + 1);
            for mu in 0..n {
                factors.push(alice_povms[mu][alice_set[mu]].effect(alice_out[mu]).clone());
            }
            factors.push(bob_povms[bob_set][bob_out].clone());
            let op = kron_all(&factors)?;
            let p = hermitized_trace_product(&op, state.matrix());
            table.set_prob(&alice_out, bob_out, &alice_set, bob_set, p);
        }
    }
    table.validate()?;
    Ok(table)
}

/// Born-rule correlation table for a star network: reorders the wires so the
/// Alices come first and delegates to the state-based routine.
pub fn born_correlations(
    s: &StarNetworkState,
    per_source_povms: &[Vec<QubitBinaryPOVM>],
    bob_povms: &[Vec<ComplexMatrix>],
) -> Result<CorrelationTable> {
    if per_source_povms.len() != s.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} POVM sets for {} sources",
            per_source_povms.len(),
            s.n()
        )));
    }
    born_correlations_state(&s.bob_ordered_state()?, per_source_povms, bob_povms)
}

/// `Re Tr(op * state)` for effects: PSD-validated inputs guarantee a real
/// trace, so no Hermiticity re-check is needed per entry.
fn hermitized_trace_product(op: &ComplexMatrix, state: &ComplexMatrix) -> f64 {
    let n = op.rows();
    let mut t = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            t += op.get(i, j) * state.get(j, i);
        }
    }
    t.re
}
