//! Scenario files: a JSON description of state, measurements, and criterion
//! that resolves into the core evaluation objects. Explicit matrices are
//! nested arrays of `[re, im]` pairs.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use netsteer_core::criteria::{
    diag_pair_xy, diag_pair_xz, dichotomic_effects, eval_bell, eval_lsi, eval_nonlinear,
    eval_nonlinear_simplified, gamma_bits, a_gamma_operator, CriterionReport, LsiSpec,
    MeasurementPlan, NonlinearSettings, SourceSetting, TableCriterion,
};
use netsteer_core::linalg::ComplexMatrix;
use netsteer_core::qubit::{observable, povm_from_bloch, BlochVector, QubitBinaryPOVM};
use netsteer_core::sampling::ShotPlan;
use netsteer_core::states::{
    bell_state, ghz, isotropic, star_state, BellKind, DensityMatrix, StarNetworkState,
};

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub criterion: CriterionKind,
    pub n: usize,
    /// Joint-state alternative to `sources` (currently the GHZ state).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    /// One entry per source; a single entry is replicated to all n sources.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceSpec>,
    /// One measurement set per source; a single entry is replicated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alice: Vec<AliceSpec>,
    pub bob: BobSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<ShotSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionKind {
    Nonlinear,
    NonlinearSimplified,
    Lsi,
    Bell,
}

impl CriterionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriterionKind::Nonlinear => "nonlinear",
            CriterionKind::NonlinearSimplified => "nonlinear-simplified",
            CriterionKind::Lsi => "lsi",
            CriterionKind::Bell => "bell",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Ghz,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    Bell { kind: String },
    Isotropic { eta: f64 },
    Explicit { matrix: Vec<Vec<[f64; 2]>> },
}

/// Named Alice measurement sets (`"pauli-xz"`, `"pauli-xy"`, `"pauli-xyz"`)
/// or an explicit `(k, r)` list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AliceSpec {
    Named(String),
    Explicit(Vec<PovmSpec>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmSpec {
    #[serde(default)]
    pub k: f64,
    pub r: [f64; 3],
}

/// Bob's side: a named construction (`"mub-xz"`, `"sbm"`, `"star"`,
/// `"ghz"`), per-source axis pairs (nonlinear criterion), or explicit
/// observable matrices (one per Bell setting / LSI index).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BobSpec {
    Named(String),
    Axes { axes: Vec<[[f64; 3]; 2]> },
    Observables { observables: Vec<Vec<Vec<[f64; 2]>>> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotSpec {
    pub shots: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario =
            serde_json::from_str(text).context("scenario does not match the schema")?;
        Ok(scenario)
    }

    pub fn descriptor(&self) -> String {
        match &self.name {
            Some(name) => format!("{} (n = {})", name, self.n),
            None => format!("{} scenario (n = {})", self.criterion.as_str(), self.n),
        }
    }
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

/// A scenario resolved into core objects, ready to evaluate or sample.
pub enum Resolved {
    Nonlinear {
        star: StarNetworkState,
        settings: NonlinearSettings,
        simplified: bool,
        alice_povms: Vec<Vec<QubitBinaryPOVM>>,
    },
    Lsi {
        star: StarNetworkState,
        spec: LsiSpec,
        alice_povms: Vec<Vec<QubitBinaryPOVM>>,
        canonical_bob: bool,
    },
    Bell {
        state: DensityMatrix,
        alice_obs: Vec<[ComplexMatrix; 2]>,
        bob_obs: Vec<ComplexMatrix>,
        alice_povms: Vec<Vec<QubitBinaryPOVM>>,
        sources: usize,
    },
}

impl Resolved {
    pub fn evaluate(&self, descriptor: &str) -> Result<CriterionReport> {
        let mut report = match self {
            Resolved::Nonlinear { star, settings, simplified, .. } => {
                if *simplified {
                    eval_nonlinear_simplified(star, settings)?
                } else {
                    eval_nonlinear(star, settings)?
                }
            }
            Resolved::Lsi { star, spec, .. } => eval_lsi(star, spec)?,
            Resolved::Bell { state, alice_obs, bob_obs, .. } => {
                eval_bell(state, alice_obs, bob_obs)?
            }
        };
        report.scenario = descriptor.to_string();
        Ok(report)
    }

    /// Measurement plan for finite-shot sampling.
    pub fn measurement_plan(&self) -> Result<MeasurementPlan> {
        match self {
            Resolved::Nonlinear { star, settings, simplified, alice_povms } => {
                let criterion = if *simplified {
                    TableCriterion::NonlinearSimplified { sources: star.n() }
                } else {
                    TableCriterion::Nonlinear { sources: star.n() }
                };
                Ok(MeasurementPlan {
                    state: star.bob_ordered_state()?,
                    alice_povms: alice_povms.clone(),
                    bob_povms: settings.bob_povms()?,
                    criterion,
                })
            }
            Resolved::Lsi { star, alice_povms, canonical_bob, .. } => {
                if !canonical_bob {
                    bail!("sampling the linear criterion requires bob = \"sbm\"");
                }
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
                    state: star.bob_ordered_state()?,
                    alice_povms: alice_povms.clone(),
                    bob_povms: vec![sbm],
                    criterion: TableCriterion::Lsi,
                })
            }
            Resolved::Bell { state, bob_obs, alice_povms, sources, .. } => Ok(MeasurementPlan {
                state: state.clone(),
                alice_povms: alice_povms.clone(),
                bob_povms: dichotomic_effects(bob_obs)?,
                criterion: TableCriterion::Bell { sources: *sources },
            }),
        }
    }
}

pub fn resolve(scenario: &Scenario) -> Result<Resolved> {
    if scenario.n == 0 {
        bail!("field 'n': need at least one source");
    }
    let required_settings = match scenario.criterion {
        CriterionKind::Lsi => 3,
        _ => 2,
    };
    let alice_povms = resolve_alice(scenario, required_settings)?;

    match scenario.criterion {
        CriterionKind::Nonlinear | CriterionKind::NonlinearSimplified => {
            let star = resolve_star(scenario)?;
            let axes = resolve_bob_axes(scenario)?;
            let per_source = alice_povms
                .iter()
                .zip(&axes)
                .map(|(povms, axis_pair)| SourceSetting {
                    povms: [povms[0].clone(), povms[1].clone()],
                    bob_axes: *axis_pair,
                })
                .collect();
            let settings = NonlinearSettings::new(per_source)
                .map_err(|e| anyhow!("field 'bob': {e}"))?;
            Ok(Resolved::Nonlinear {
                star,
                settings,
                simplified: scenario.criterion == CriterionKind::NonlinearSimplified,
                alice_povms,
            })
        }
        CriterionKind::Lsi => {
            if scenario.n != 2 {
                bail!("field 'n': the linear criterion is defined for n = 2");
            }
            let star = resolve_star(scenario)?;
            let obs = |povm: &QubitBinaryPOVM| observable(povm).op().clone();
            let alice_obs: [[ComplexMatrix; 3]; 2] = [
                [
                    obs(&alice_povms[0][0]),
                    obs(&alice_povms[0][1]),
                    obs(&alice_povms[0][2]),
                ],
                [
                    obs(&alice_povms[1][0]),
                    obs(&alice_povms[1][1]),
                    obs(&alice_povms[1][2]),
                ],
            ];
            let (bob_ops, canonical_bob) = resolve_bob_lsi(scenario)?;
            let spec = LsiSpec::new(alice_obs, bob_ops).map_err(|e| anyhow!("field 'bob': {e}"))?;
            Ok(Resolved::Lsi { star, spec, alice_povms, canonical_bob })
        }
        CriterionKind::Bell => {
            let alice_obs: Vec<[ComplexMatrix; 2]> = alice_povms
                .iter()
                .map(|povms| {
                    [
                        observable(&povms[0]).op().clone(),
                        observable(&povms[1]).op().clone(),
                    ]
                })
                .collect();
            let (state, bob_dim) = match &scenario.state {
                Some(StateSpec::Ghz) => {
                    if scenario.n != 2 {
                        bail!("field 'state': the ghz state serves n = 2 Alices");
                    }
                    (ghz(), 2usize)
                }
                None => {
                    let star = resolve_star(scenario)?;
                    let dim = 1usize << star.n();
                    (star.bob_ordered_state()?, dim)
                }
            };
            let bob_obs = resolve_bob_bell(scenario, &alice_obs, bob_dim)?;
            Ok(Resolved::Bell {
                state,
                alice_obs,
                bob_obs,
                alice_povms,
                sources: scenario.n,
            })
        }
    }
}

fn resolve_star(scenario: &Scenario) -> Result<StarNetworkState> {
    if scenario.state.is_some() {
        bail!(
            "field 'state': a joint state is only supported with the bell criterion"
        );
    }
    if scenario.sources.is_empty() {
        bail!("field 'sources': at least one source is required");
    }
    let specs: Vec<&SourceSpec> = replicate(&scenario.sources, scenario.n)
        .map_err(|e| anyhow!("field 'sources': {e}"))?;
    let sources: Result<Vec<DensityMatrix>> = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            source_state(spec).with_context(|| format!("field 'sources[{}]'", i))
        })
        .collect();
    Ok(star_state(sources?)?)
}

fn source_state(spec: &SourceSpec) -> Result<DensityMatrix> {
    match spec {
        SourceSpec::Bell { kind } => {
            let kind = match kind.as_str() {
                "psi+" => BellKind::PsiPlus,
                "psi-" => BellKind::PsiMinus,
                "phi+" => BellKind::PhiPlus,
                "phi-" => BellKind::PhiMinus,
                other => bail!("unknown bell kind '{}' (use psi+/psi-/phi+/phi-)", other),
            };
            Ok(bell_state(kind))
        }
        SourceSpec::Isotropic { eta } => Ok(isotropic(*eta)?),
        SourceSpec::Explicit { matrix } => {
            let mat = matrix_from_spec(matrix)?;
            Ok(DensityMatrix::new(
                mat,
                netsteer_core::linalg::SubsystemLayout::qubits(2)?,
            )?)
        }
    }
}

fn matrix_from_spec(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let converted: Vec<Vec<(f64, f64)>> = rows
        .iter()
        .map(|row| row.iter().map(|&[re, im]| (re, im)).collect())
        .collect();
    Ok(ComplexMatrix::from_rows(&converted)?)
}

fn replicate<T>(items: &[T], n: usize) -> std::result::Result<Vec<&T>, String> {
    if items.len() == n {
        Ok(items.iter().collect())
    } else if items.len() == 1 {
        Ok(std::iter::repeat_n(&items[0], n).collect())
    } else {
        Err(format!("expected 1 or {} entries, got {}", n, items.len()))
    }
}

fn resolve_alice(scenario: &Scenario, settings: usize) -> Result<Vec<Vec<QubitBinaryPOVM>>> {
    if scenario.alice.is_empty() {
        bail!("field 'alice': measurement sets are required");
    }
    let specs = replicate(&scenario.alice, scenario.n)
        .map_err(|e| anyhow!("field 'alice': {e}"))?;
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let povms = alice_povms(spec)
                .with_context(|| format!("field 'alice[{}]'", i))?;
            if povms.len() != settings {
                bail!(
                    "field 'alice[{}]': the {} criterion needs {} settings per source, got {}",
                    i,
                    scenario.criterion.as_str(),
                    settings,
                    povms.len()
                );
            }
            Ok(povms)
        })
        .collect()
}

fn alice_povms(spec: &AliceSpec) -> Result<Vec<QubitBinaryPOVM>> {
    match spec {
        AliceSpec::Named(name) => match name.as_str() {
            "pauli-xz" => Ok(diag_pair_xz()?.to_vec()),
            "pauli-xy" => Ok(diag_pair_xy()?.to_vec()),
            "pauli-xyz" => Ok(vec![
                povm_from_bloch(0.0, BlochVector::new(1.0, 0.0, 0.0))?,
                povm_from_bloch(0.0, BlochVector::new(0.0, 1.0, 0.0))?,
                povm_from_bloch(0.0, BlochVector::new(0.0, 0.0, 1.0))?,
            ]),
            other => bail!(
                "unknown measurement set '{}' (use pauli-xz, pauli-xy, pauli-xyz, or an explicit list)",
                other
            ),
        },
        AliceSpec::Explicit(list) => list
            .iter()
            .map(|p| {
                povm_from_bloch(p.k, BlochVector::new(p.r[0], p.r[1], p.r[2]))
                    .map_err(|e| anyhow!("{e}"))
            })
            .collect(),
    }
}

fn resolve_bob_axes(scenario: &Scenario) -> Result<Vec<[BlochVector; 2]>> {
    match &scenario.bob {
        BobSpec::Named(name) if name == "mub-xz" => Ok(vec![
            [
                BlochVector::new(1.0, 0.0, 0.0),
                BlochVector::new(0.0, 0.0, 1.0),
            ];
            scenario.n
        ]),
        BobSpec::Named(other) => bail!(
            "field 'bob': '{}' does not define axes for the nonlinear criterion (use mub-xz or explicit axes)",
            other
        ),
        BobSpec::Axes { axes } => {
            let specs = replicate(axes, scenario.n).map_err(|e| anyhow!("field 'bob.axes': {e}"))?;
            Ok(specs
                .iter()
                .map(|pair| {
                    [
                        BlochVector::new(pair[0][0], pair[0][1], pair[0][2]),
                        BlochVector::new(pair[1][0], pair[1][1], pair[1][2]),
                    ]
                })
                .collect())
        }
        BobSpec::Observables { .. } => bail!(
            "field 'bob': the nonlinear criterion takes axis pairs, not observable matrices"
        ),
    }
}

fn resolve_bob_lsi(scenario: &Scenario) -> Result<([ComplexMatrix; 3], bool)> {
    match &scenario.bob {
        BobSpec::Named(name) if name == "sbm" => {
            let canonical = LsiSpec::canonical();
            Ok((canonical.bob_ops().clone(), true))
        }
        BobSpec::Named(other) => {
            bail!("field 'bob': '{}' is not valid for the linear criterion (use sbm or explicit observables)", other)
        }
        BobSpec::Observables { observables } => {
            if observables.len() != 3 {
                bail!(
                    "field 'bob.observables': the linear criterion needs 3 operators, got {}",
                    observables.len()
                );
            }
            let ops: Result<Vec<ComplexMatrix>> =
                observables.iter().map(|m| matrix_from_spec(m)).collect();
            let mut ops = ops?;
            let b3 = ops.pop().unwrap();
            let b2 = ops.pop().unwrap();
            let b1 = ops.pop().unwrap();
            let spec = LsiSpec::canonical();
            let canonical = [b1.clone(), b2.clone(), b3.clone()]
                .iter()
                .zip(spec.bob_ops())
                .all(|(a, b)| a.max_abs_diff(b) <= 1e-12);
            Ok(([b1, b2, b3], canonical))
        }
        BobSpec::Axes { .. } => {
            bail!("field 'bob': the linear criterion takes observables, not axis pairs")
        }
    }
}

fn resolve_bob_bell(
    scenario: &Scenario,
    alice_obs: &[[ComplexMatrix; 2]],
    bob_dim: usize,
) -> Result<Vec<ComplexMatrix>> {
    let n = scenario.n;
    match &scenario.bob {
        BobSpec::Named(name) if name == "star" => {
            if bob_dim != 1 << n {
                bail!("field 'bob': the star construction needs one Bob qubit per source");
            }
            let scale = std::f64::consts::FRAC_1_SQRT_2.powi(n as i32);
            (0..(1usize << n))
                .map(|g| {
                    let bits = gamma_bits(g, n);
                    Ok(a_gamma_operator(&bits, alice_obs)?.scale_re(scale))
                })
                .collect()
        }
        BobSpec::Named(name) if name == "ghz" => {
            if bob_dim != 2 || n != 2 {
                bail!("field 'bob': the ghz observables need the ghz state with n = 2");
            }
            use netsteer_core::qubit::pauli;
            Ok(vec![
                pauli(1)?,
                pauli(2)?.scale_re(-1.0),
                pauli(2)?.scale_re(-1.0),
                pauli(1)?.scale_re(-1.0),
            ])
        }
        BobSpec::Named(other) => bail!(
            "field 'bob': unknown construction '{}' for the bell criterion (use star, ghz, or explicit observables)",
            other
        ),
        BobSpec::Observables { observables } => {
            if observables.len() != 1 << n {
                bail!(
                    "field 'bob.observables': the bell criterion needs {} operators, got {}",
                    1 << n,
                    observables.len()
                );
            }
            observables.iter().map(|m| matrix_from_spec(m)).collect()
        }
        BobSpec::Axes { .. } => {
            bail!("field 'bob': the bell criterion takes observables, not axis pairs")
        }
    }
}

pub fn shot_plan(scenario: &Scenario, shots: Option<u64>, seed: Option<u64>) -> Result<ShotPlan> {
    let base = scenario.shots;
    let shots = shots.or(base.map(|s| s.shots)).ok_or_else(|| {
        anyhow!("no shot plan: add a 'shots' section to the scenario or pass --shots")
    })?;
    let seed = seed.or(base.map(|s| s.seed)).unwrap_or(0);
    Ok(ShotPlan::new(shots, seed)?)
}
