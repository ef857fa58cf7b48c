//! The three sufficient criteria for n -> 1 steering in a star network: a
//! nonlinear steering inequality, a linear steering inequality whose trusted
//! party performs one fixed joint measurement, and a Bell inequality. Each
//! evaluation returns a [`CriterionReport`] carrying the raw expectations
//! and the provenance of its classical bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assemblage::CorrelationTable;
use crate::error::{Error, Result};
use crate::linalg::{expectation, herm_eigenvalues, kron, kron_all, ComplexMatrix};
use crate::qubit::{observable, pauli, povm_from_bloch, BlochVector, QubitBinaryPOVM};
use crate::states::{
    bell_state, ghz, isotropic, reduced_state, star_state, BellKind, DensityMatrix, Side,
    StarNetworkState,
};

/// A criterion counts as violated when its value exceeds the bound by more
/// than this.
pub const VIOLATION_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Where a criterion's classical bound comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundProvenance {
    /// Closed-form bound.
    Analytic,
    /// Exhaustive deterministic-strategy enumeration.
    Enumeration,
    /// Numerical optimization over product states.
    Optimizer,
}

/// Evaluated criterion: value, classical bound, violation verdict, and the
/// raw expectations behind the value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub scenario: String,
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
    pub violated: bool,
    pub bound_provenance: BoundProvenance,
    pub details: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CriterionReport {
    pub fn new(
        criterion: impl Into<String>,
        scenario: impl Into<String>,
        value: f64,
        bound: f64,
        provenance: BoundProvenance,
    ) -> Self {
        Self {
            criterion: criterion.into(),
            scenario: scenario.into(),
            value,
            bound,
            ratio: value / bound,
            violated: value > bound + VIOLATION_TOL,
            bound_provenance: provenance,
            details: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

// ---------------------------------------------------------------------------
// Nonlinear steering inequality
// ---------------------------------------------------------------------------

/// Per-source settings for the nonlinear criterion: two Alice POVMs and two
/// orthonormal Bloch axes for Bob.
#[derive(Debug, Clone)]
pub struct SourceSetting {
    pub povms: [QubitBinaryPOVM; 2],
    pub bob_axes: [BlochVector; 2],
}

#[derive(Debug, Clone)]
pub struct NonlinearSettings {
    per_source: Vec<SourceSetting>,
}

impl NonlinearSettings {
    /// Validates that each source's Bob axes are unit length and mutually
    /// orthogonal; the derivation needs both.
    pub fn new(per_source: Vec<SourceSetting>) -> Result<Self> {
        if per_source.is_empty() {
            return Err(Error::Parameter("need at least one source".into()));
        }
        for (mu, s) in per_source.iter().enumerate() {
            for axis in &s.bob_axes {
                if (axis.norm() - 1.0).abs() > 1e-10 {
                    return Err(Error::Parameter(format!(
                        "Bob axis for source {} is not unit length",
                        mu
                    )));
                }
            }
            if s.bob_axes[0].dot(&s.bob_axes[1]).abs() > 1e-10 {
                return Err(Error::Parameter(format!(
                    "Bob axes for source {} are not orthogonal",
                    mu
                )));
            }
        }
        Ok(Self { per_source })
    }

    /// The diagonal x/z setting: Alice pairs with `A1 + A2 = sqrt(2) x` and
    /// `A1 - A2 = sqrt(2) z`, Bob axes x and z. Maximally violating for
    /// maximally entangled sources.
    pub fn mub_xz(n: usize) -> Result<Self> {
        let per_source = (0..n)
            .map(|_| -> Result<SourceSetting> {
                Ok(SourceSetting {
                    povms: diag_pair_xz()?,
                    bob_axes: [BlochVector::new(1.0, 0.0, 0.0), BlochVector::new(0.0, 0.0, 1.0)],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(per_source)
    }

    pub fn n(&self) -> usize {
        self.per_source.len()
    }

    pub fn per_source(&self) -> &[SourceSetting] {
        &self.per_source
    }

    /// Bob's two product-observable POVM settings, for correlation tables.
    pub fn bob_povms(&self) -> Result<Vec<Vec<ComplexMatrix>>> {
        let axes: Vec<(BlochVector, BlochVector)> = self
            .per_source
            .iter()
            .map(|s| (s.bob_axes[0], s.bob_axes[1]))
            .collect();
        nonlinear_bob_povms(&axes)
    }
}

/// The diagonal pair in the x-z plane: `r = (1, 0, +-1)/sqrt(2)`, `k = 0`.
pub fn diag_pair_xz() -> Result<[QubitBinaryPOVM; 2]> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok([
        povm_from_bloch(0.0, BlochVector::new(s, 0.0, s))?,
        povm_from_bloch(0.0, BlochVector::new(s, 0.0, -s))?,
    ])
}

/// The diagonal pair in the x-y plane: `r = (1, +-1, 0)/sqrt(2)`, `k = 0`.
pub fn diag_pair_xy() -> Result<[QubitBinaryPOVM; 2]> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok([
        povm_from_bloch(0.0, BlochVector::new(s, s, 0.0))?,
        povm_from_bloch(0.0, BlochVector::new(s, -s, 0.0))?,
    ])
}

/// Bob's two dichotomic product settings for the nonlinear criterion:
/// effects `(I +- (x)_mu n_y . sigma)/2` for y = 1, 2.
pub fn nonlinear_bob_povms(
    axes: &[(BlochVector, BlochVector)],
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
        let obs = kron_all(&factors)?;
        settings.push(vec![
            id.add(&obs)?.scale_re(0.5),
            id.sub(&obs)?.scale_re(0.5),
        ]);
    }
    Ok(settings)
}

/// Alice-side operator `(x)_mu (A1 + (-1)^alpha_mu A2) / 2`, with the 1/2
/// applied per source; `alphas[mu]` selects the sign for source `mu`.
pub fn a_bar_operator(alphas: &[bool], settings: &NonlinearSettings) -> Result<ComplexMatrix> {
    if alphas.len() != settings.n() {
        return Err(Error::DimensionMismatch(
            "one sign bit per source required".into(),
        ));
    }
    let factors: Vec<ComplexMatrix> = settings
        .per_source()
        .iter()
        .zip(alphas)
        .map(|(s, &alpha)| {
            let a1 = observable(&s.povms[0]);
            let a2 = observable(&s.povms[1]);
            let combined = if alpha {
                a1.op().sub(a2.op())
            } else {
                a1.op().add(a2.op())
            }
            .expect("2x2 shape");
            combined.scale_re(0.5)
        })
        .collect();
    kron_all(&factors)
}

/// Bob-side operator `(x)_mu n^(mu)_{alpha_mu + 1} . sigma`.
pub fn b_bar_operator(alphas: &[bool], settings: &NonlinearSettings) -> Result<ComplexMatrix> {
    if alphas.len() != settings.n() {
        return Err(Error::DimensionMismatch(
            "one sign bit per source required".into(),
        ));
    }
    let factors: Vec<ComplexMatrix> = settings
        .per_source()
        .iter()
        .zip(alphas)
        .map(|(s, &alpha)| s.bob_axes[usize::from(alpha)].dot_sigma())
        .collect();
    kron_all(&factors)
}

/// The four expectations `<A_a (x) B_b>` for the uniform sign strings, on
/// the rewired network state.
fn nonlinear_expectations(
    s: &StarNetworkState,
    settings: &NonlinearSettings,
) -> Result<[[f64; 2]; 2]> {
    if settings.n() != s.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} settings for {} sources",
            settings.n(),
            s.n()
        )));
    }
    // the derivation requires Tr(B rho_B) = 0 for every axis and source
    for (mu, (setting, source)) in settings.per_source().iter().zip(s.sources()).enumerate() {
        let rho_b = reduced_state(source, Side::Bob)?;
        for (y, axis) in setting.bob_axes.iter().enumerate() {
            let bias = expectation(&axis.dot_sigma(), rho_b.matrix())?;
            if bias.abs() > 1e-6 {
                return Err(Error::Constraint(format!(
                    "Tr(B rho_B) = {:.3e} for source {} axis {}; \
                     the nonlinear criterion requires unbiased Bob axes",
                    bias, mu, y
                )));
            }
        }
    }
    let w = s.bob_ordered_state()?;
    let n = s.n();
    let mut e = [[0.0; 2]; 2];
    for alpha in 0..2 {
        let a_op = a_bar_operator(&vec![alpha == 1; n], settings)?;
        for y in 0..2 {
            let b_op = b_bar_operator(&vec![y == 1; n], settings)?;
            e[alpha][y] = expectation(&kron(&a_op, &b_op)?, w.matrix())?;
        }
    }
    Ok(e)
}

fn nonlinear_value(e: &[[f64; 2]; 2], n: usize) -> f64 {
    let root = 1.0 / n as f64;
    let branch = |row: &[f64; 2]| -> f64 {
        ((row[0] * row[0]).powf(root) + (row[1] * row[1]).powf(root)).sqrt()
    };
    branch(&e[0]) + branch(&e[1])
}

fn simplified_value(e: &[[f64; 2]; 2], n: usize) -> f64 {
    let root = 1.0 / n as f64;
    e[0][0].abs().powf(root) + e[1][1].abs().powf(root)
}

/// Nonlinear steering criterion:
/// `sqrt(<A_0 B_0>^(2/n) + <A_0 B_1>^(2/n)) + sqrt(<A_1 B_0>^(2/n) + <A_1 B_1>^(2/n)) <= 1`
/// for every state admitting an n-LHS model.
pub fn eval_nonlinear(
    s: &StarNetworkState,
    settings: &NonlinearSettings,
) -> Result<CriterionReport> {
    let e = nonlinear_expectations(s, settings)?;
    let value = nonlinear_value(&e, s.n());
    Ok(CriterionReport::new(
        "nonlinear",
        format!("nonlinear criterion, n = {}", s.n()),
        value,
        1.0,
        BoundProvenance::Analytic,
    )
    .with_detail("exp_a0_b0", e[0][0])
    .with_detail("exp_a0_b1", e[0][1])
    .with_detail("exp_a1_b0", e[1][0])
    .with_detail("exp_a1_b1", e[1][1]))
}

/// Simplified nonlinear criterion `|<A_0 B_0>|^(1/n) + |<A_1 B_1>|^(1/n) <= 1`;
/// equivalent to the full form iff both cross expectations vanish.
pub fn eval_nonlinear_simplified(
    s: &StarNetworkState,
    settings: &NonlinearSettings,
) -> Result<CriterionReport> {
    let e = nonlinear_expectations(s, settings)?;
    let value = simplified_value(&e, s.n());
    let cross_zero = e[0][1].abs() <= 1e-9 && e[1][0].abs() <= 1e-9;
    let mut report = CriterionReport::new(
        "nonlinear-simplified",
        format!("simplified nonlinear criterion, n = {}", s.n()),
        value,
        1.0,
        BoundProvenance::Analytic,
    )
    .with_detail("exp_a0_b0", e[0][0])
    .with_detail("exp_a0_b1", e[0][1])
    .with_detail("exp_a1_b0", e[1][0])
    .with_detail("exp_a1_b1", e[1][1]);
    if cross_zero {
        report = report.with_note("cross expectations vanish: equivalent to the full nonlinear criterion");
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Linear steering inequality (fixed joint measurement for Bob)
// ---------------------------------------------------------------------------

/// Alice observables (three per source) and Bob's three joint operators for
/// the linear criterion at n = 2.
#[derive(Debug, Clone)]
pub struct LsiSpec {
    alice_obs: [[ComplexMatrix; 3]; 2],
    bob_ops: [ComplexMatrix; 3],
}

impl LsiSpec {
    pub fn new(alice_obs: [[ComplexMatrix; 3]; 2], bob_ops: [ComplexMatrix; 3]) -> Result<Self> {
        for per_source in &alice_obs {
            for op in per_source {
                let vals = herm_eigenvalues(op)?;
                if op.rows() != 2 {
                    return Err(Error::DimensionMismatch(
                        "Alice observables must be 2x2".into(),
                    ));
                }
                if vals[0] < -1.0 - 1e-9 || vals[1] > 1.0 + 1e-9 {
                    return Err(Error::Parameter(
                        "Alice observable spectrum exceeds [-1, 1]".into(),
                    ));
                }
            }
        }
        for op in &bob_ops {
            if op.rows() != 4 || op.cols() != 4 {
                return Err(Error::DimensionMismatch("Bob operators must be 4x4".into()));
            }
            let dev = op.herm_deviation();
            if dev > 1e-10 {
                return Err(Error::NotHermitian { max_dev: dev });
            }
        }
        Ok(Self { alice_obs, bob_ops })
    }

    /// Pauli observables for both Alices, `sigma_j (x) sigma_j` for Bob.
    pub fn canonical() -> Self {
        let alice = || -> [ComplexMatrix; 3] {
            [pauli(1).unwrap(), pauli(2).unwrap(), pauli(3).unwrap()]
        };
        let bob: [ComplexMatrix; 3] = [
            kron(&pauli(1).unwrap(), &pauli(1).unwrap()).unwrap(),
            kron(&pauli(2).unwrap(), &pauli(2).unwrap()).unwrap(),
            kron(&pauli(3).unwrap(), &pauli(3).unwrap()).unwrap(),
        ];
        Self { alice_obs: [alice(), alice()], bob_ops: bob }
    }

    pub fn alice_obs(&self) -> &[[ComplexMatrix; 3]; 2] {
        &self.alice_obs
    }

    pub fn bob_ops(&self) -> &[ComplexMatrix; 3] {
        &self.bob_ops
    }

    /// True when the Bob operators equal `sigma_j (x) sigma_j`, the case
    /// with the closed-form bound of 1.
    pub fn has_canonical_bob(&self) -> bool {
        (0..3).all(|j| {
            let canonical = kron(&pauli(j + 1).unwrap(), &pauli(j + 1).unwrap()).unwrap();
            self.bob_ops[j].max_abs_diff(&canonical) <= 1e-12
        })
    }
}

/// The 16x16 operator `H = sum_j A_j^(1) (x) A_j^(2) (x) B_j` in wire order
/// `A1 A2 B1 B2`.
pub fn build_lsi_h(spec: &LsiSpec) -> Result<ComplexMatrix> {
    let mut h = ComplexMatrix::zeros(16, 16)?;
    for j in 0..3 {
        let term = kron(
            &kron(&spec.alice_obs[0][j], &spec.alice_obs[1][j])?,
            &spec.bob_ops[j],
        )?;
        h = h.add(&term)?;
    }
    Ok(h)
}

/// Optimizer budget for the product-state bound.
#[derive(Debug, Clone, Copy)]
pub struct BetaBudget {
    pub starts: usize,
    pub iters: usize,
    pub step: f64,
}

impl Default for BetaBudget {
    fn default() -> Self {
        Self { starts: 64, iters: 500, step: 0.1 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BetaResult {
    pub value: f64,
    pub converged: bool,
}

/// Classical bound of the linear criterion: the maximum of
/// `sum_j d_j^(1) d_j^(2) <psi (x) phi| B_j |psi (x) phi>` over response
/// coefficients `d in [-1, 1]^3` (optimal at sign vertices) and pure product
/// states, by multi-start projected gradient ascent over the two Bloch
/// vectors.
pub fn lsi_beta(spec: &LsiSpec, budget: &BetaBudget) -> Result<BetaResult> {
    use rand::SeedableRng;
    use rayon::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED_BE7A);

    let mut sigma = Vec::with_capacity(4);
    sigma.push(ComplexMatrix::identity(2));
    for j in 1..=3 {
        sigma.push(pauli(j)?);
    }

    // per sign pattern c in {-1, 1}^3, the bilinear coefficient table:
    // value(s, t) = sum_ab h_ab s_a t_b with s_0 = t_0 = 1 and sigma_0 = I
    let mut tasks: Vec<([[f64; 4]; 4], [f64; 3], [f64; 3])> = Vec::new();
    for bits in 0u8..8 {
        let c = [
            if bits & 1 == 1 { -1.0 } else { 1.0 },
            if bits & 2 == 2 { -1.0 } else { 1.0 },
            if bits & 4 == 4 { -1.0 } else { 1.0 },
        ];
        let mut hc = ComplexMatrix::zeros(4, 4)?;
        for j in 0..3 {
            hc = hc.add(&spec.bob_ops[j].scale_re(c[j]))?;
        }
        let mut h = [[0.0; 4]; 4];
        for (a, row) in h.iter_mut().enumerate() {
            for (b, slot) in row.iter_mut().enumerate() {
                let basis = kron(&sigma[a], &sigma[b])?;
                *slot = trace_product_re(&hc, &basis) / 4.0;
            }
        }
        // deterministic axis starts plus random restarts
        for i in 0..3 {
            let mut e = [0.0; 3];
            e[i] = 1.0;
            let mut me = [0.0; 3];
            me[i] = -1.0;
            tasks.push((h, e, e));
            tasks.push((h, e, me));
        }
        for _ in 0..budget.starts {
            tasks.push((h, random_unit3(&mut rng), random_unit3(&mut rng)));
        }
    }

    // independent ascents; the reduction order is fixed afterwards
    let outcomes: Vec<(f64, bool)> = tasks
        .par_iter()
        .map(|&(h, s0, t0)| ascend(&h, s0, t0, budget))
        .collect();

    let mut best = f64::NEG_INFINITY;
    let mut best_converged = false;
    for (val, converged) in outcomes {
        if val > best + 1e-12 {
            best = val;
            best_converged = converged;
        } else if (val - best).abs() <= 1e-12 {
            best_converged |= converged;
        }
    }
    Ok(BetaResult { value: best, converged: best_converged })
}

/// Projected gradient ascent of one start; returns the reached value and
/// whether the iterate converged within the budget.
fn ascend(h: &[[f64; 4]; 4], mut s: [f64; 3], mut t: [f64; 3], budget: &BetaBudget) -> (f64, bool) {
    let value = |s: &[f64; 3], t: &[f64; 3]| -> f64 {
        let sv = [1.0, s[0], s[1], s[2]];
        let tv = [1.0, t[0], t[1], t[2]];
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                acc += h[a][b] * sv[a] * tv[b];
            }
        }
        acc
    };
    let grad = |s: &[f64; 3], t: &[f64; 3]| -> ([f64; 3], [f64; 3]) {
        let sv = [1.0, s[0], s[1], s[2]];
        let tv = [1.0, t[0], t[1], t[2]];
        let mut gs = [0.0; 3];
        let mut gt = [0.0; 3];
        for i in 0..3 {
            for b in 0..4 {
                gs[i] += h[i + 1][b] * tv[b];
            }
            for a in 0..4 {
                gt[i] += h[a][i + 1] * sv[a];
            }
        }
        (gs, gt)
    };

    let mut val = value(&s, &t);
    for _ in 0..budget.iters {
        let (gs, gt) = grad(&s, &t);
        let pgs = project_tangent(&gs, &s);
        let pgt = project_tangent(&gt, &t);
        let gnorm = (norm3(&pgs).powi(2) + norm3(&pgt).powi(2)).sqrt();
        if gnorm < 1e-10 {
            return (val, true);
        }
        // backtracking line search along the projected gradient
        let mut step = budget.step;
        let mut advanced = false;
        for _ in 0..30 {
            let s_new = normalize3(&add3(&s, &scale3(&pgs, step)));
            let t_new = normalize3(&add3(&t, &scale3(&pgt, step)));
            let v_new = value(&s_new, &t_new);
            if v_new > val + 1e-15 {
                s = s_new;
                t = t_new;
                val = v_new;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            // no improving step along the gradient: stationary
            return (val, true);
        }
    }
    (val, false)
}

/// Linear steering criterion at n = 2: `<H> <= beta`, with `beta = 1` for
/// the canonical Bob operators.
pub fn eval_lsi(s: &StarNetworkState, spec: &LsiSpec) -> Result<CriterionReport> {
    if s.n() != 2 {
        return Err(Error::Parameter(format!(
            "the linear criterion is defined for n = 2, got n = {}",
            s.n()
        )));
    }
    let w = s.bob_ordered_state()?;
    let h = build_lsi_h(spec)?;
    let value = expectation(&h, w.matrix())?;

    let (bound, provenance, beta_note) = if spec.has_canonical_bob() {
        (1.0, BoundProvenance::Analytic, None)
    } else {
        let beta = lsi_beta(spec, &BetaBudget::default())?;
        let note = (!beta.converged)
            .then(|| "product-state bound optimizer did not converge; bound is best observed".to_string());
        (beta.value, BoundProvenance::Optimizer, note)
    };

    let mut report = CriterionReport::new(
        "lsi",
        "linear criterion with fixed joint measurement, n = 2".to_string(),
        value,
        bound,
        provenance,
    );
    for j in 0..3 {
        let term = kron(
            &kron(&spec.alice_obs[0][j], &spec.alice_obs[1][j])?,
            &spec.bob_ops[j],
        )?;
        report = report.with_detail(
            &format!("term_{}", j + 1),
            expectation(&term, w.matrix())?,
        );
    }
    if let Some(note) = beta_note {
        report = report.with_note(note);
    }
    Ok(report)
}

/// Residual of the sign decompositions of `sigma_j (x) sigma_j` over four
/// given rank-one projectors in the Bell-basis outcome order
/// `(Psi+, Psi-, Phi+, Phi-)`.
pub fn sbm_identities_residual(projectors: &[ComplexMatrix; 4]) -> Result<f64> {
    let signs: [[f64; 4]; 3] = [
        [1.0, -1.0, 1.0, -1.0],
        [-1.0, 1.0, 1.0, -1.0],
        [1.0, 1.0, -1.0, -1.0],
    ];
    let mut residual: f64 = 0.0;
    for j in 0..3 {
        let target = kron(&pauli(j + 1)?, &pauli(j + 1)?)?;
        let mut combo = ComplexMatrix::zeros(4, 4)?;
        for (proj, &sign) in projectors.iter().zip(&signs[j]) {
            combo = combo.add(&proj.scale_re(sign))?;
        }
        residual = residual.max(combo.max_abs_diff(&target));
    }
    Ok(residual)
}

/// Entrywise residual of the canonical decomposition of the three
/// `sigma_j (x) sigma_j` operators over the standard Bell projectors.
pub fn sbm_decomposition_residual() -> f64 {
    let projectors = [
        bell_state(BellKind::PsiPlus).matrix().clone(),
        bell_state(BellKind::PsiMinus).matrix().clone(),
        bell_state(BellKind::PhiPlus).matrix().clone(),
        bell_state(BellKind::PhiMinus).matrix().clone(),
    ];
    sbm_identities_residual(&projectors).expect("canonical projectors are 4x4")
}

/// Checks that Bob's three joint operators decompose exactly (within 1e-12)
/// over the standard Bell measurement, so one fixed four-outcome measurement
/// serves all three.
pub fn sbm_decomposition_check() -> bool {
    sbm_decomposition_residual() <= 1e-12
}

// ---------------------------------------------------------------------------
// Bell inequality
// ---------------------------------------------------------------------------

/// Alice-side Bell operator `(x)_mu (A1 + (-1)^gamma_mu A2)`, without the
/// per-source 1/2 of the nonlinear construction.
pub fn a_gamma_operator(
    gammas: &[bool],
    alice_obs: &[[ComplexMatrix; 2]],
) -> Result<ComplexMatrix> {
    if gammas.len() != alice_obs.len() {
        return Err(Error::DimensionMismatch(
            "one sign bit per source required".into(),
        ));
    }
    let factors: Vec<ComplexMatrix> = alice_obs
        .iter()
        .zip(gammas)
        .map(|(obs, &gamma)| {
            if gamma {
                obs[0].sub(&obs[1])
            } else {
                obs[0].add(&obs[1])
            }
            .expect("2x2 shape")
        })
        .collect();
    kron_all(&factors)
}

/// Bit string of length `n` for index `g`; source 0 is the most significant
/// bit, matching the tensor order of the operators.
pub fn gamma_bits(g: usize, n: usize) -> Vec<bool> {
    (0..n).map(|mu| (g >> (n - 1 - mu)) & 1 == 1).collect()
}

/// Star-network Bell inequality `sum_gamma <A_gamma (x) B_gamma> <= 2^n`.
/// The state's layout must put the `n` Alice qubits first; Bob's space is
/// the remainder. `bob_obs[g]` is the observable paired with the bit string
/// of `g` and must have spectrum inside [-1, 1].
pub fn eval_bell(
    state: &DensityMatrix,
    alice_obs: &[[ComplexMatrix; 2]],
    bob_obs: &[ComplexMatrix],
) -> Result<CriterionReport> {
    let n = alice_obs.len();
    if n == 0 {
        return Err(Error::Parameter("need at least one Alice".into()));
    }
    if bob_obs.len() != 1 << n {
        return Err(Error::DimensionMismatch(format!(
            "expected {} Bob observables, got {}",
            1 << n,
            bob_obs.len()
        )));
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
    for (mu, obs) in alice_obs.iter().enumerate() {
        for op in obs {
            if op.rows() != 2 || op.cols() != 2 {
                return Err(Error::DimensionMismatch(format!(
                    "Alice {} observable is not 2x2",
                    mu
                )));
            }
            let vals = herm_eigenvalues(op)?;
            if vals[0] < -1.0 - 1e-9 || vals[1] > 1.0 + 1e-9 {
                return Err(Error::Parameter(format!(
                    "Alice {} observable spectrum exceeds [-1, 1]",
                    mu
                )));
            }
        }
    }
    for (g, op) in bob_obs.iter().enumerate() {
        if op.rows() != bob_dim || op.cols() != bob_dim {
            return Err(Error::DimensionMismatch(format!(
                "Bob observable {} is {}x{}, expected {}x{}",
                g,
                op.rows(),
                op.cols(),
                bob_dim,
                bob_dim
            )));
        }
        let vals = herm_eigenvalues(op)?;
        let lo = vals.first().copied().unwrap_or(0.0);
        let hi = vals.last().copied().unwrap_or(0.0);
        if lo < -1.0 - 1e-9 || hi > 1.0 + 1e-9 {
            return Err(Error::Parameter(format!(
                "Bob observable {} spectrum [{:.6}, {:.6}] exceeds [-1, 1]",
                g, lo, hi
            )));
        }
    }

    let bound = (1u64 << n) as f64;
    let mut value = 0.0;
    let mut report = CriterionReport::new(
        "bell",
        format!("Bell criterion, n = {}", n),
        0.0,
        bound,
        BoundProvenance::Analytic,
    );
    for g in 0..(1usize << n) {
        let bits = gamma_bits(g, n);
        let a_op = a_gamma_operator(&bits, alice_obs)?;
        let term = expectation(&kron(&a_op, &bob_obs[g])?, state.matrix())?;
        value += term;
        let label: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        report = report.with_detail(&format!("term_{}", label), term);
    }
    report.value = value;
    report.ratio = value / bound;
    report.violated = value > bound + VIOLATION_TOL;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Criterion evaluation on correlation tables
// ---------------------------------------------------------------------------

/// One raw correlator needed by a criterion: a setting tuple plus the sign
/// pattern for Bob's outcomes (Alice outcomes always contribute `(-1)^a`).
#[derive(Debug, Clone)]
pub struct CorrelatorSpec {
    pub alice_settings: Vec<usize>,
    pub bob_setting: usize,
    pub bob_signs: Vec<f64>,
}

/// Sign recombination of the standard Bell measurement outcomes
/// `(Psi+, Psi-, Phi+, Phi-)` into the three `sigma_j (x) sigma_j`
/// correlators.
pub const SBM_SIGNS: [[f64; 4]; 3] = [
    [1.0, -1.0, 1.0, -1.0],
    [-1.0, 1.0, 1.0, -1.0],
    [1.0, 1.0, -1.0, -1.0],
];

/// A criterion evaluated directly on a correlation table; the common path
/// for classical-model oracles and finite-shot estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableCriterion {
    Nonlinear { sources: usize },
    NonlinearSimplified { sources: usize },
    Lsi,
    Bell { sources: usize },
}

impl TableCriterion {
    pub fn name(&self) -> &'static str {
        match self {
            TableCriterion::Nonlinear { .. } => "nonlinear",
            TableCriterion::NonlinearSimplified { .. } => "nonlinear-simplified",
            TableCriterion::Lsi => "lsi",
            TableCriterion::Bell { .. } => "bell",
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            TableCriterion::Nonlinear { .. } | TableCriterion::NonlinearSimplified { .. } => 1.0,
            TableCriterion::Lsi => 1.0,
            TableCriterion::Bell { sources } => (1u64 << sources) as f64,
        }
    }

    /// The correlators the criterion reads from a table of this shape;
    /// errors if the table lacks a needed setting tuple.
    pub fn plan(&self, table: &CorrelationTable) -> Result<Vec<CorrelatorSpec>> {
        match *self {
            TableCriterion::Nonlinear { sources } | TableCriterion::NonlinearSimplified { sources } => {
                if table.sources() != sources {
                    return Err(Error::DimensionMismatch(format!(
                        "table has {} sources, criterion expects {}",
                        table.sources(),
                        sources
                    )));
                }
                if table.alice_settings().iter().any(|&s| s < 2) {
                    return Err(Error::Parameter(
                        "missing setting tuple: every Alice needs two settings".into(),
                    ));
                }
                if table.bob_settings() < 2 || table.bob_outcomes() != 2 {
                    return Err(Error::Parameter(
                        "missing setting tuple: Bob needs two dichotomic settings".into(),
                    ));
                }
                let mut specs = Vec::with_capacity(2 << sources);
                for y in 0..2 {
                    for x in 0..(1usize << sources) {
                        specs.push(CorrelatorSpec {
                            alice_settings: index_bits(x, sources),
                            bob_setting: y,
                            bob_signs: vec![1.0, -1.0],
                        });
                    }
                }
                Ok(specs)
            }
            TableCriterion::Lsi => {
                if table.sources() != 2 {
                    return Err(Error::DimensionMismatch(
                        "the linear criterion reads two-source tables".into(),
                    ));
                }
                if table.alice_settings().iter().any(|&s| s < 3) {
                    return Err(Error::Parameter(
                        "missing setting tuple: every Alice needs three settings".into(),
                    ));
                }
                if table.bob_outcomes() != 4 || table.bob_settings() < 1 {
                    return Err(Error::Parameter(
                        "missing setting tuple: Bob needs the four-outcome joint measurement".into(),
                    ));
                }
                Ok((0..3)
                    .map(|j| CorrelatorSpec {
                        alice_settings: vec![j, j],
                        bob_setting: 0,
                        bob_signs: SBM_SIGNS[j].to_vec(),
                    })
                    .collect())
            }
            TableCriterion::Bell { sources } => {
                if table.sources() != sources {
                    return Err(Error::DimensionMismatch(format!(
                        "table has {} sources, criterion expects {}",
                        table.sources(),
                        sources
                    )));
                }
                if table.alice_settings().iter().any(|&s| s < 2) {
                    return Err(Error::Parameter(
                        "missing setting tuple: every Alice needs two settings".into(),
                    ));
                }
                if table.bob_settings() != 1 << sources || table.bob_outcomes() != 2 {
                    return Err(Error::Parameter(format!(
                        "missing setting tuple: Bob needs {} dichotomic settings",
                        1 << sources
                    )));
                }
                let mut specs = Vec::with_capacity(1 << (2 * sources));
                for g in 0..(1usize << sources) {
                    for x in 0..(1usize << sources) {
                        specs.push(CorrelatorSpec {
                            alice_settings: index_bits(x, sources),
                            bob_setting: g,
                            bob_signs: vec![1.0, -1.0],
                        });
                    }
                }
                Ok(specs)
            }
        }
    }

    /// Combine the planned correlators into the criterion value.
    pub fn value_from_correlators(&self, c: &[f64]) -> f64 {
        match *self {
            TableCriterion::Nonlinear { sources } => {
                let e = nonlinear_e_from_correlators(c, sources);
                nonlinear_value(&e, sources)
            }
            TableCriterion::NonlinearSimplified { sources } => {
                let e = nonlinear_e_from_correlators(c, sources);
                simplified_value(&e, sources)
            }
            TableCriterion::Lsi => c.iter().sum(),
            TableCriterion::Bell { sources } => {
                let blocks = 1usize << sources;
                let mut total = 0.0;
                for g in 0..blocks {
                    for x in 0..blocks {
                        let sign = if (g & x).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        total += sign * c[g * blocks + x];
                    }
                }
                total
            }
        }
    }

    pub fn correlators(&self, table: &CorrelationTable) -> Result<Vec<f64>> {
        let plan = self.plan(table)?;
        Ok(plan
            .iter()
            .map(|spec| table.correlator(&spec.alice_settings, spec.bob_setting, &spec.bob_signs))
            .collect())
    }

    pub fn evaluate(&self, table: &CorrelationTable) -> Result<f64> {
        Ok(self.value_from_correlators(&self.correlators(table)?))
    }
}

fn index_bits(x: usize, n: usize) -> Vec<usize> {
    (0..n).map(|mu| (x >> (n - 1 - mu)) & 1).collect()
}

/// Recover the four uniform-string expectations `<A_a (x) B_y>` from the raw
/// per-tuple correlators, with the per-source 1/2 folded in.
fn nonlinear_e_from_correlators(c: &[f64], n: usize) -> [[f64; 2]; 2] {
    let blocks = 1usize << n;
    let norm = 1.0 / blocks as f64;
    let mut e = [[0.0; 2]; 2];
    for y in 0..2 {
        for x in 0..blocks {
            let raw = c[y * blocks + x];
            e[0][y] += raw;
            let sign = if (x.count_ones() % 2) == 0 { 1.0 } else { -1.0 };
            e[1][y] += sign * raw;
        }
        e[0][y] *= norm;
        e[1][y] *= norm;
    }
    e
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

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn add3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale3(a: &[f64; 3], f: f64) -> [f64; 3] {
    [a[0] * f, a[1] * f, a[2] * f]
}

fn normalize3(v: &[f64; 3]) -> [f64; 3] {
    let n = norm3(v);
    if n < 1e-300 {
        [1.0, 0.0, 0.0]
    } else {
        scale3(v, 1.0 / n)
    }
}

fn project_tangent(g: &[f64; 3], at: &[f64; 3]) -> [f64; 3] {
    let dot = g[0] * at[0] + g[1] * at[1] + g[2] * at[2];
    [g[0] - dot * at[0], g[1] - dot * at[1], g[2] - dot * at[2]]
}

fn random_unit3(rng: &mut impl rand::Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n = norm3(&v);
        if n > 1e-3 && n <= 1.0 {
            return normalize3(&v);
        }
    }
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Packaged scenarios with known expected values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    NonlinearMaxent,
    LsiIsotropic,
    BellGhz,
    BellStar,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::NonlinearMaxent,
        PresetName::LsiIsotropic,
        PresetName::BellGhz,
        PresetName::BellStar,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::NonlinearMaxent => "nonlinear-maxent",
            PresetName::LsiIsotropic => "lsi-isotropic",
            PresetName::BellGhz => "bell-ghz",
            PresetName::BellStar => "bell-star",
        }
    }
}

impl std::str::FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonlinear-maxent" => Ok(PresetName::NonlinearMaxent),
            "lsi-isotropic" => Ok(PresetName::LsiIsotropic),
            "bell-ghz" => Ok(PresetName::BellGhz),
            "bell-star" => Ok(PresetName::BellStar),
            other => Err(Error::Parameter(format!("unknown preset '{}'", other))),
        }
    }
}

impl std::fmt::Display for PresetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully specified scenario: state plus measurements plus criterion.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: PresetName,
    pub n: usize,
    pub eta: f64,
}

/// Preset by name and source count; `eta` defaults to 1 where applicable.
pub fn preset(name: PresetName, n: usize) -> Result<Preset> {
    match name {
        PresetName::NonlinearMaxent => {
            if !(1..=5).contains(&n) {
                return Err(Error::Parameter("nonlinear-maxent supports n in 1..=5".into()));
            }
        }
        PresetName::LsiIsotropic => {
            if n != 2 {
                return Err(Error::Parameter("lsi-isotropic is defined for n = 2".into()));
            }
        }
        PresetName::BellGhz => {
            if n != 2 {
                return Err(Error::Parameter("bell-ghz is defined for n = 2".into()));
            }
        }
        PresetName::BellStar => {
            if !(1..=5).contains(&n) {
                return Err(Error::Parameter("bell-star supports n in 1..=5".into()));
            }
        }
    }
    Ok(Preset { name, n, eta: 1.0 })
}

/// State plus measurement lists ready for Born-rule tables and sampling.
/// The state's layout keeps the Alice qubits in front.
#[derive(Debug, Clone)]
pub struct MeasurementPlan {
    pub state: DensityMatrix,
    pub alice_povms: Vec<Vec<QubitBinaryPOVM>>,
    pub bob_povms: Vec<Vec<ComplexMatrix>>,
    pub criterion: TableCriterion,
}

impl MeasurementPlan {
    pub fn correlation_table(&self) -> Result<CorrelationTable> {
        crate::assemblage::born_correlations_state(&self.state, &self.alice_povms, &self.bob_povms)
    }
}

impl Preset {
    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Parameter(format!("eta = {} outside [0, 1]", eta)));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn expected_ratio(&self) -> f64 {
        match self.name {
            PresetName::NonlinearMaxent => std::f64::consts::SQRT_2,
            PresetName::LsiIsotropic => 3.0 * self.eta * self.eta,
            PresetName::BellGhz => 2.0,
            PresetName::BellStar => std::f64::consts::SQRT_2.powi(self.n as i32),
        }
    }

    pub fn description(&self) -> &'static str {
        match self.name {
            PresetName::NonlinearMaxent => {
                "maximally entangled sources, diagonal x/z Alice pairs, x/z Bob axes; \
                 nonlinear criterion with expected ratio sqrt(2) for every n"
            }
            PresetName::LsiIsotropic => {
                "two isotropic(eta) sources, Pauli triples for the Alices, fixed joint \
                 Bell measurement for Bob; linear criterion with value 3 eta^2"
            }
            PresetName::BellGhz => {
                "three-qubit GHZ state split between two Alices and Bob; Bell criterion \
                 with expected ratio 2"
            }
            PresetName::BellStar => {
                "maximally entangled sources with mirrored Bob observables; Bell \
                 criterion with expected ratio sqrt(2)^n"
            }
        }
    }

    fn star_sources(&self) -> Result<StarNetworkState> {
        let source = match self.name {
            PresetName::LsiIsotropic => isotropic(self.eta)?,
            _ => bell_state(BellKind::PsiPlus),
        };
        star_state(vec![source; self.n])
    }

    fn star_alice_obs(&self) -> Result<Vec<[ComplexMatrix; 2]>> {
        let pair = diag_pair_xz()?;
        let obs = [
            observable(&pair[0]).op().clone(),
            observable(&pair[1]).op().clone(),
        ];
        Ok(vec![obs; self.n])
    }

    fn ghz_alice_obs() -> Result<Vec<[ComplexMatrix; 2]>> {
        let pair = diag_pair_xy()?;
        let obs = [
            observable(&pair[0]).op().clone(),
            observable(&pair[1]).op().clone(),
        ];
        Ok(vec![obs; 2])
    }

    fn ghz_bob_obs() -> Result<Vec<ComplexMatrix>> {
        Ok(vec![
            pauli(1)?,
            pauli(2)?.scale_re(-1.0),
            pauli(2)?.scale_re(-1.0),
            pauli(1)?.scale_re(-1.0),
        ])
    }

    /// Bob's mirrored star observables `(1/sqrt(2))^n A_gamma` on his wires.
    fn star_bob_obs(&self) -> Result<Vec<ComplexMatrix>> {
        let alice_obs = self.star_alice_obs()?;
        let scale = std::f64::consts::FRAC_1_SQRT_2.powi(self.n as i32);
        (0..(1usize << self.n))
            .map(|g| {
                let bits = gamma_bits(g, self.n);
                Ok(a_gamma_operator(&bits, &alice_obs)?.scale_re(scale))
            })
            .collect()
    }

    /// Evaluate the preset with the exact state-based path.
    pub fn evaluate(&self) -> Result<CriterionReport> {
        let mut report = match self.name {
            PresetName::NonlinearMaxent => {
                let s = self.star_sources()?;
                let settings = NonlinearSettings::mub_xz(self.n)?;
                eval_nonlinear(&s, &settings)?
            }
            PresetName::LsiIsotropic => {
                let s = self.star_sources()?;
                eval_lsi(&s, &LsiSpec::canonical())?
            }
            PresetName::BellGhz => {
                eval_bell(&ghz(), &Self::ghz_alice_obs()?, &Self::ghz_bob_obs()?)?
            }
            PresetName::BellStar => {
                let s = self.star_sources()?;
                let w = s.bob_ordered_state()?;
                eval_bell(&w, &self.star_alice_obs()?, &self.star_bob_obs()?)?
            }
        };
        report.scenario = match self.name {
            PresetName::LsiIsotropic => format!("{} (eta = {})", self.name, self.eta),
            _ => format!("{} (n = {})", self.name, self.n),
        };
        Ok(report)
    }

    /// Measurement plan for finite-shot sampling of the same scenario.
    pub fn measurement_plan(&self) -> Result<MeasurementPlan> {
        match self.name {
            PresetName::NonlinearMaxent => {
                let s = self.star_sources()?;
                let settings = NonlinearSettings::mub_xz(self.n)?;
                Ok(MeasurementPlan {
                    state: s.bob_ordered_state()?,
                    alice_povms: vec![diag_pair_xz()?.to_vec(); self.n],
                    bob_povms: settings.bob_povms()?,
                    criterion: TableCriterion::Nonlinear { sources: self.n },
                })
            }
            PresetName::LsiIsotropic => {
                let s = self.star_sources()?;
                let pauli_povms: Vec<QubitBinaryPOVM> = vec![
                    povm_from_bloch(0.0, BlochVector::new(1.0, 0.0, 0.0))?,
                    povm_from_bloch(0.0, BlochVector::new(0.0, 1.0, 0.0))?,
                    povm_from_bloch(0.0, BlochVector::new(0.0, 0.0, 1.0))?,
                ];
                let sbm: Vec<ComplexMatrix> = [
                    BellKind::PsiPlus,
                    BellKind::PsiMinus,
                    BellKind::PhiPlus,
                    BellKind::PhiMinus,
                ]
                .iter()
                .map(|&k| bell_state(k).matrix().clone())
                .collect();
                Ok(MeasurementPlan {
                    state: s.bob_ordered_state()?,
                    alice_povms: vec![pauli_povms; 2],
                    bob_povms: vec![sbm],
                    criterion: TableCriterion::Lsi,
                })
            }
            PresetName::BellGhz => {
                let bob_povms = dichotomic_effects(&Self::ghz_bob_obs()?)?;
                Ok(MeasurementPlan {
                    state: ghz(),
                    alice_povms: vec![diag_pair_xy()?.to_vec(); 2],
                    bob_povms,
                    criterion: TableCriterion::Bell { sources: 2 },
                })
            }
            PresetName::BellStar => {
                let s = self.star_sources()?;
                let bob_povms = dichotomic_effects(&self.star_bob_obs()?)?;
                Ok(MeasurementPlan {
                    state: s.bob_ordered_state()?,
                    alice_povms: vec![diag_pair_xz()?.to_vec(); self.n],
                    bob_povms,
                    criterion: TableCriterion::Bell { sources: self.n },
                })
            }
        }
    }
}

/// Effect pairs `(I +- B)/2` for a list of dichotomic observables.
pub fn dichotomic_effects(observables: &[ComplexMatrix]) -> Result<Vec<Vec<ComplexMatrix>>> {
    observables
        .iter()
        .map(|b| {
            let id = ComplexMatrix::identity(b.rows());
            Ok(vec![
                id.add(b)?.scale_re(0.5),
                id.sub(b)?.scale_re(0.5),
            ])
        })
        .collect()
}
