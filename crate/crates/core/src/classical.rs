//! Finite local-hidden-state and local-hidden-variable models, their
//! predicted assemblages and correlation tables, and the brute-force
//! deterministic-strategy maximization that backs every classical bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assemblage::{Assemblage, CorrelationTable};
use crate::criteria::TableCriterion;
use crate::error::{Error, Result};
use crate::linalg::{kron_all, ComplexMatrix};
use crate::qubit::random_orthonormal_axes;
use crate::sampling::counter_u64;
use crate::states::{dirichlet_uniform, random_pure_qubit, DensityMatrix};

// ---------------------------------------------------------------------------
// Finite LHS models
// ---------------------------------------------------------------------------

/// Hidden-variable strategy for one source: a weighted finite set of hidden
/// values, each carrying a response row per Alice setting and a single-qubit
/// state handed to Bob.
#[derive(Debug, Clone)]
pub struct LhsSource {
    weights: Vec<f64>,
    responses: Vec<Vec<[f64; 2]>>, // [setting][xi] -> [p(a=0), p(a=1)]
    hidden_states: Vec<DensityMatrix>,
}

impl LhsSource {
    pub fn new(
        weights: Vec<f64>,
        responses: Vec<Vec<[f64; 2]>>,
        hidden_states: Vec<DensityMatrix>,
    ) -> Result<Self> {
        let card = weights.len();
        if card == 0 {
            return Err(Error::InvalidModel("empty hidden-variable set".into()));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidModel("negative hidden-variable weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "hidden-variable weights sum to {}, not 1",
                total
            )));
        }
        if responses.is_empty() {
            return Err(Error::InvalidModel("model needs at least one setting".into()));
        }
        for row in &responses {
            if row.len() != card {
                return Err(Error::InvalidModel(
                    "response table cardinality mismatch".into(),
                ));
            }
            for p in row {
                if p[0] < -1e-15 || p[1] < -1e-15 || (p[0] + p[1] - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "response row ({}, {}) is not a distribution",
                        p[0], p[1]
                    )));
                }
            }
        }
        if hidden_states.len() != card {
            return Err(Error::InvalidModel("hidden-state count mismatch".into()));
        }
        if hidden_states.iter().any(|s| s.dim() != 2) {
            return Err(Error::InvalidModel(
                "hidden states must be single-qubit".into(),
            ));
        }
        Ok(Self { weights, responses, hidden_states })
    }

    pub fn cardinality(&self) -> usize {
        self.weights.len()
    }

    pub fn settings(&self) -> usize {
        self.responses.len()
    }

    pub fn weight(&self, xi: usize) -> f64 {
        self.weights[xi]
    }

    pub fn response(&self, setting: usize, xi: usize) -> [f64; 2] {
        self.responses[setting][xi]
    }

    pub fn hidden_state(&self, xi: usize) -> &DensityMatrix {
        &self.hidden_states[xi]
    }
}

/// One `LhsSource` per edge of the star network.
#[derive(Debug, Clone)]
pub struct FiniteLhsModel {
    sources: Vec<LhsSource>,
}

/// Sampling parameters for random finite LHS models.
#[derive(Debug, Clone, Copy)]
pub struct LhsSampleConfig {
    pub sources: usize,
    pub settings: usize,
    pub cardinality: usize,
    /// Draw response rows from {0, 1} instead of the flat Dirichlet; the
    /// extreme points of the model polytope.
    pub deterministic_responses: bool,
}

impl Default for LhsSampleConfig {
    fn default() -> Self {
        Self {
            sources: 2,
            settings: 2,
            cardinality: 8,
            deterministic_responses: false,
        }
    }
}

impl FiniteLhsModel {
    pub fn new(sources: Vec<LhsSource>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidModel("model needs at least one source".into()));
        }
        Ok(Self { sources })
    }

    pub fn n(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self) -> &[LhsSource] {
        &self.sources
    }

    /// Random model: Dirichlet weights, per-(setting, xi) response rows, and
    /// Haar-random pure hidden states.
    pub fn sample(cfg: &LhsSampleConfig, rng: &mut impl Rng) -> Self {
        let sources = (0..cfg.sources)
            .map(|_| {
                let weights = dirichlet_uniform(cfg.cardinality, rng);
                let responses = (0..cfg.settings)
                    .map(|_| {
                        (0..cfg.cardinality)
                            .map(|_| {
                                let p0 = if cfg.deterministic_responses {
                                    if rng.gen::<bool>() {
                                        1.0
                                    } else {
                                        0.0
                                    }
                                } else {
                                    rng.gen::<f64>()
                                };
                                [p0, 1.0 - p0]
                            })
                            .collect()
                    })
                    .collect();
                let hidden_states = (0..cfg.cardinality).map(|_| random_pure_qubit(rng)).collect();
                LhsSource::new(weights, responses, hidden_states).expect("sampled rows normalized")
            })
            .collect();
        Self { sources }
    }

    /// The assemblage predicted for one source:
    /// `rho~_{a|x} = sum_xi w(xi) p(a|x, xi) rho_xi`.
    pub fn lhs_assemblage(&self, source: usize) -> Result<Assemblage> {
        let src = self
            .sources
            .get(source)
            .ok_or_else(|| Error::Parameter(format!("source index {} out of range", source)))?;
        let mut members = Vec::with_capacity(src.settings() * 2);
        for x in 0..src.settings() {
            for a in 0..2 {
                let mut acc = ComplexMatrix::zeros(2, 2)?;
                for xi in 0..src.cardinality() {
                    let coeff = src.weight(xi) * src.response(x, xi)[a];
                    if coeff == 0.0 {
                        continue;
                    }
                    acc = acc.add(&src.hidden_state(xi).matrix().scale_re(coeff))?;
                }
                members.push(acc);
            }
        }
        Assemblage::new(src.settings(), 2, members)
    }

    /// Joint hidden-state products and weights over all sources, enumerated
    /// in mixed-radix order of the per-source hidden variables.
    fn joint_hidden_states(&self) -> Result<(Vec<f64>, Vec<ComplexMatrix>)> {
        let cards: Vec<usize> = self.sources.iter().map(|s| s.cardinality()).collect();
        let total: usize = cards.iter().product();
        let mut weights = Vec::with_capacity(total);
        let mut states = Vec::with_capacity(total);
        for joint in 0..total {
            let xi = decode_mixed(joint, &cards);
            let mut w = 1.0;
            let mut members = Vec::with_capacity(self.n());
            for (mu, src) in self.sources.iter().enumerate() {
                w *= src.weight(xi[mu]);
                members.push(src.hidden_state(xi[mu]).matrix().clone());
            }
            weights.push(w);
            states.push(kron_all(&members)?);
        }
        Ok((weights, states))
    }

    /// Correlation table predicted by the model when Bob measures the given
    /// POVM settings on his `2^n`-dimensional space; his outcome
    /// probabilities are the Born probabilities of the product hidden state.
    pub fn lhs_correlations(
        &self,
        bob_povms: &[Vec<ComplexMatrix>],
    ) -> Result<CorrelationTable> {
        let n = self.n();
        let bob_dim = 1usize << n;
        crate::assemblage::validate_bob_povms(bob_povms, bob_dim)?;
        let cards: Vec<usize> = self.sources.iter().map(|s| s.cardinality()).collect();
        let (weights, products) = self.joint_hidden_states()?;

        // Born probabilities q[joint][y][b]
        let bob_outcomes = bob_povms[0].len();
        let mut q = vec![vec![vec![0.0; bob_outcomes]; bob_povms.len()]; weights.len()];
        for (joint, product) in products.iter().enumerate() {
            for (y, setting) in bob_povms.iter().enumerate() {
                for (b, effect) in setting.iter().enumerate() {
                    q[joint][y][b] = trace_product_re(effect, product);
                }
            }
        }

        let settings: Vec<usize> = self.sources.iter().map(|s| s.settings()).collect();
        let mut table = CorrelationTable::zeroed(settings, bob_povms.len(), bob_outcomes)?;
        for t in 0..table.tuple_count() {
            let (alice_set, bob_set) = table.decode_tuple(t);
            for o in 0..table.outcomes_per_tuple() {
                let (alice_out, bob_out) = table.decode_outcome(o);
                let mut p = 0.0;
                for (joint, &w) in weights.iter().enumerate() {
                    let xi = decode_mixed(joint, &cards);
                    let mut term = w;
                    for mu in 0..n {
                        term *= self.sources[mu].response(alice_set[mu], xi[mu])[alice_out[mu]];
                    }
                    p += term * q[joint][bob_set][bob_out];
                }
                table.set_prob(&alice_out, bob_out, &alice_set, bob_set, p);
            }
        }
        table.validate()?;
        Ok(table)
    }

    /// Mechanical embedding into a finite LHV model: the joint hidden
    /// variable enumerates the per-source variables and Bob's responses are
    /// the Born probabilities of the product hidden states.
    pub fn to_lhv(&self, bob_povms: &[Vec<ComplexMatrix>]) -> Result<FiniteLhvModel> {
        let n = self.n();
        let bob_dim = 1usize << n;
        crate::assemblage::validate_bob_povms(bob_povms, bob_dim)?;
        let cards: Vec<usize> = self.sources.iter().map(|s| s.cardinality()).collect();
        let (weights, products) = self.joint_hidden_states()?;

        let mut alice = Vec::with_capacity(weights.len());
        let mut bob = Vec::with_capacity(weights.len());
        for (joint, product) in products.iter().enumerate() {
            let xi = decode_mixed(joint, &cards);
            let per_source: Vec<Vec<[f64; 2]>> = self
                .sources
                .iter()
                .enumerate()
                .map(|(mu, src)| {
                    (0..src.settings()).map(|x| src.response(x, xi[mu])).collect()
                })
                .collect();
            alice.push(per_source);
            let responses: Vec<Vec<f64>> = bob_povms
                .iter()
                .map(|setting| {
                    setting
                        .iter()
                        .map(|effect| trace_product_re(effect, product).clamp(0.0, 1.0))
                        .collect()
                })
                .collect();
            bob.push(responses);
        }
        FiniteLhvModel::new(weights, alice, bob)
    }
}

fn decode_mixed(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; dims.len()];
    for (pos, &d) in dims.iter().enumerate().rev() {
        digits[pos] = index % d;
        index /= d;
    }
    digits
}

fn trace_product_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut t = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a.get(i, j);
            let y = b.get(j, i);
            t += x.re * y.re - x.im * y.im;
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Finite LHV models
// ---------------------------------------------------------------------------

/// Fully classical model: a shared finite hidden variable fixes response
/// distributions for every Alice setting and every Bob setting.
#[derive(Debug, Clone)]
pub struct FiniteLhvModel {
    weights: Vec<f64>,
    alice: Vec<Vec<Vec<[f64; 2]>>>, // [lambda][mu][x] -> [p(a=0), p(a=1)]
    bob: Vec<Vec<Vec<f64>>>,        // [lambda][y] -> distribution over outcomes
}

impl FiniteLhvModel {
    pub fn new(
        weights: Vec<f64>,
        alice: Vec<Vec<Vec<[f64; 2]>>>,
        bob: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidModel("empty hidden-variable set".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel("weights are not a distribution".into()));
        }
        if alice.len() != weights.len() || bob.len() != weights.len() {
            return Err(Error::InvalidModel("response tables do not match weights".into()));
        }
        for per_lambda in &alice {
            for per_mu in per_lambda {
                for p in per_mu {
                    if p[0] < -1e-15 || p[1] < -1e-15 || (p[0] + p[1] - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidModel(
                            "Alice response row is not a distribution".into(),
                        ));
                    }
                }
            }
        }
        for per_lambda in &bob {
            for row in per_lambda {
                let s: f64 = row.iter().sum();
                if row.iter().any(|&p| p < -1e-12) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidModel(
                        "Bob response row is not a distribution".into(),
                    ));
                }
            }
        }
        Ok(Self { weights, alice, bob })
    }

    pub fn lambda_count(&self) -> usize {
        self.weights.len()
    }

    /// The correlation table
    /// `p(a-bar, b | x-bar, y) = sum_lambda w(lambda) prod_mu p(a|x, lambda) p(b|y, lambda)`.
    pub fn lhv_correlations(&self) -> Result<CorrelationTable> {
        let n = self.alice[0].len();
        let settings: Vec<usize> = self.alice[0].iter().map(|per_mu| per_mu.len()).collect();
        let bob_settings = self.bob[0].len();
        let bob_outcomes = self.bob[0][0].len();
        let mut table = CorrelationTable::zeroed(settings, bob_settings, bob_outcomes)?;
        for t in 0..table.tuple_count() {
            let (alice_set, bob_set) = table.decode_tuple(t);
            for o in 0..table.outcomes_per_tuple() {
                let (alice_out, bob_out) = table.decode_outcome(o);
                let mut p = 0.0;
                for (lambda, &w) in self.weights.iter().enumerate() {
                    let mut term = w * self.bob[lambda][bob_set][bob_out];
                    for mu in 0..n {
                        term *= self.alice[lambda][mu][alice_set[mu]][alice_out[mu]];
                    }
                    p += term;
                }
                table.set_prob(&alice_out, bob_out, &alice_set, bob_set, p);
            }
        }
        table.validate()?;
        Ok(table)
    }
}

// ---------------------------------------------------------------------------
// Bell functional and its exact classical bound
// ---------------------------------------------------------------------------

/// Shape of the star-network Bell functional: `2^n` terms, one per bit
/// string gamma-bar, each pairing `(x)_mu (A1 + (-1)^gamma_mu A2)` with a
/// dedicated Bob observable.
#[derive(Debug, Clone, Copy)]
pub struct BellFunctional {
    n: usize,
}

impl BellFunctional {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("Bell functional needs n >= 1".into()));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn term_count(&self) -> usize {
        1 << self.n
    }

    /// The classical (LHV) bound `2^n`.
    pub fn analytic_bound(&self) -> f64 {
        (1u64 << self.n) as f64
    }
}

/// Exact classical maximum of the Bell functional over deterministic
/// strategies, by exhaustive enumeration of the Alice assignments; each
/// term's optimal Bob sign is the sign of its coefficient, which removes
/// Bob's `2^(2^n)` assignments from the search. Integer arithmetic
/// throughout.
pub fn lhv_bell_bound(f: &BellFunctional) -> Result<f64> {
    let n = f.n();
    if n > 4 {
        return Err(Error::Resource(format!(
            "deterministic enumeration supports n <= 4, got {}",
            n
        )));
    }
    let mut best: i64 = 0;
    // every source carries two +/-1 values (A1, A2): 2 bits each
    for assignment in 0u32..(1 << (2 * n)) {
        let mut plus = [0i64; 4]; // A1 + A2 per source
        let mut minus = [0i64; 4]; // A1 - A2 per source
        for mu in 0..n {
            let a1: i64 = if assignment >> (2 * mu) & 1 == 1 { 1 } else { -1 };
            let a2: i64 = if assignment >> (2 * mu + 1) & 1 == 1 { 1 } else { -1 };
            plus[mu] = a1 + a2;
            minus[mu] = a1 - a2;
        }
        let mut total: i64 = 0;
        for gamma in 0u32..(1 << n) {
            let mut prod: i64 = 1;
            for mu in 0..n {
                prod *= if gamma >> mu & 1 == 1 { minus[mu] } else { plus[mu] };
            }
            total += prod.abs();
        }
        best = best.max(total);
    }
    Ok(best as f64)
}

/// Full enumeration including Bob's deterministic sign assignments; only
/// tractable for small n, used to validate the reduced search.
pub fn lhv_bell_bound_full(f: &BellFunctional) -> Result<f64> {
    let n = f.n();
    if n > 2 {
        return Err(Error::Resource(
            "full enumeration only supported for n <= 2".into(),
        ));
    }
    let terms = 1usize << n;
    let mut best: i64 = i64::MIN;
    for assignment in 0u32..(1 << (2 * n)) {
        let mut plus = [0i64; 2];
        let mut minus = [0i64; 2];
        for mu in 0..n {
            let a1: i64 = if assignment >> (2 * mu) & 1 == 1 { 1 } else { -1 };
            let a2: i64 = if assignment >> (2 * mu + 1) & 1 == 1 { 1 } else { -1 };
            plus[mu] = a1 + a2;
            minus[mu] = a1 - a2;
        }
        for bob_bits in 0u32..(1 << terms) {
            let mut total: i64 = 0;
            for gamma in 0..terms {
                let mut prod: i64 = 1;
                for mu in 0..n {
                    prod *= if gamma >> mu & 1 == 1 { minus[mu] } else { plus[mu] };
                }
                let b: i64 = if bob_bits >> gamma & 1 == 1 { 1 } else { -1 };
                total += prod * b;
            }
            best = best.max(total);
        }
    }
    Ok(best as f64)
}

// ---------------------------------------------------------------------------
// Randomized LHS oracle for the nonlinear criterion
// ---------------------------------------------------------------------------

/// Configuration for the randomized LHS soundness oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub sources: usize,
    pub cardinality: usize,
    pub deterministic_responses: bool,
    pub trials: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            sources: 2,
            cardinality: 8,
            deterministic_responses: false,
            trials: 1000,
            seed: 7,
        }
    }
}

/// Largest criterion values observed across the sampled models.
#[derive(Debug, Clone, Copy)]
pub struct OracleOutcome {
    pub max_nonlinear: f64,
    pub max_simplified: f64,
    pub trials: usize,
}

/// Sample random finite LHS models and evaluate the nonlinear criterion (and
/// its simplified form) on each induced correlation table, with fresh random
/// orthonormal Bob axes per trial. Classical models must stay at or below
/// the bound of 1.
pub fn run_lhs_oracle(cfg: &OracleConfig) -> Result<OracleOutcome> {
    if cfg.trials == 0 {
        return Err(Error::Parameter("oracle needs at least one trial".into()));
    }
    let n = cfg.sources;
    let sample_cfg = LhsSampleConfig {
        sources: n,
        settings: 2,
        cardinality: cfg.cardinality,
        deterministic_responses: cfg.deterministic_responses,
    };
    let results: Result<Vec<(f64, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(counter_u64(cfg.seed, trial as u64, 0));
            let model = FiniteLhsModel::sample(&sample_cfg, &mut rng);
            let axes: Vec<_> = (0..n).map(|_| random_orthonormal_axes(&mut rng)).collect();
            let bob_povms = nonlinear_bob_povms(&axes)?;
            let table = model.lhs_correlations(&bob_povms)?;
            let full = TableCriterion::Nonlinear { sources: n }.evaluate(&table)?;
            let simplified =
                TableCriterion::NonlinearSimplified { sources: n }.evaluate(&table)?;
            Ok((full, simplified))
        })
        .collect();
    let results = results?;
    let (mut max_full, mut max_simpl) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (f_val, s_val) in results {
        max_full = max_full.max(f_val);
        max_simpl = max_simpl.max(s_val);
    }
    Ok(OracleOutcome {
        max_nonlinear: max_full,
        max_simplified: max_simpl,
        trials: cfg.trials,
    })
}

/// Default-configuration oracle over `trials` random models.
pub fn lhs_nonlinear_oracle(trials: usize, seed: u64) -> Result<OracleOutcome> {
    run_lhs_oracle(&OracleConfig {
        trials,
        seed,
        ..OracleConfig::default()
    })
}

/// Bob's two dichotomic product settings for the nonlinear criterion:
/// effects `(I +- (x)_mu n_y . sigma)/2` for y = 1, 2.
pub fn nonlinear_bob_povms(
    axes: &[(crate::qubit::BlochVector, crate::qubit::BlochVector)],
) -> Result<Vec<Vec<ComplexMatrix>>> {
    let n = axes.len();
    let dim = 1usize << n;
    let id = ComplexMatrix::identity(dim);
    let mut settings = Vec::with_capacity(2);
    for y in 0..2 {
        let factors: Vec<ComplexMatrix> = axes
            .iter()
            .map(|(n1, n2)| if y == 0 { n1 } else { n2 }.dot_sigma())
            .collect();
        let observable = kron_all(&factors)?;
        let m0 = id.add(&observable)?.scale_re(0.5);
        let m1 = id.sub(&observable)?.scale_re(0.5);
        settings.push(vec![m0, m1]);
    }
    Ok(settings)
}
