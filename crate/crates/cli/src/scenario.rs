//! Scenario files: schema, validation and construction of the system.

use std::sync::Arc;

use dualpair::actions::ActionSpec;
use dualpair::builtins::{self, System};
use dualpair::geometry::{PhaseSpace, Poly, ScalarField, Table, TrigPoly, VectorField, DEFAULT_STEP};
use dualpair::lie::{BracketEntry, LieAlgebra};
use dualpair::poisson::PoissonTensor;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub space: SpaceSpec,
    /// Defaults to the builtin's own action when `space` is a builtin.
    #[serde(default)]
    pub action: Option<ActionChoice>,
    pub commands: Vec<Command>,
    #[serde(default)]
    pub numeric: Numeric,
    #[serde(default)]
    pub output: Output,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceSpec {
    Builtin(String),
    Custom(CustomSpace),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpace {
    pub name: String,
    /// Per-coordinate periodicity; may be omitted for Lie–Poisson tensors.
    #[serde(default)]
    pub periodic: Option<Vec<bool>>,
    #[serde(default)]
    pub coordinates: Option<Vec<String>>,
    pub tensor: TensorSpec,
    /// Known Casimir functions, checked by the `leaf` command.
    #[serde(default)]
    pub casimirs: Vec<TableSpec>,
    #[serde(default = "one")]
    pub sample_half_width: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum TensorSpec {
    /// The Poisson matrix `B` itself, row by row.
    Constant(Vec<Vec<f64>>),
    /// A constant symplectic matrix `Ω`; the tensor is `−Ω⁻¹`.
    Symplectic(Vec<Vec<f64>>),
    LiePoisson(AlgebraSpec),
    /// `B_ij` as coefficient tables, row by row.
    Tables(Vec<Vec<TableSpec>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgebraSpec {
    /// `so3`, `se2` or `heisenberg`.
    Builtin(String),
    Abelian(usize),
    Brackets(BracketAlgebra),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketAlgebra {
    pub name: String,
    pub labels: Vec<String>,
    /// Nonzero brackets, once per unordered pair.
    pub brackets: Vec<Bracket>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bracket {
    pub i: usize,
    pub j: usize,
    /// `[e_i, e_j] = Σ c e_k` as `(k, c)` pairs.
    pub terms: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum TableSpec {
    Trig(Vec<TrigTerm>),
    Poly(Vec<PolyTerm>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub mode: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActionChoice {
    Builtin(String),
    Coadjoint(AlgebraSpec),
    Custom(CustomAction),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomAction {
    pub name: String,
    /// Defaults to the abelian algebra of the generator count.
    #[serde(default)]
    pub algebra: Option<AlgebraSpec>,
    /// One table per coordinate for each generator `(e_i)_M`.
    pub generators: Vec<Vec<TableSpec>>,
    #[serde(default)]
    pub compact: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    RankReport {
        samples: Option<usize>,
    },
    VonNeumann {
        samples: Option<usize>,
    },
    Howe {
        samples: Option<usize>,
    },
    DualPair {
        samples: Option<usize>,
    },
    Leaf {
        point: Option<Vec<f64>>,
        #[serde(default)]
        family: LeafFamily,
        density: Option<DensitySpec>,
        /// Number of orbit targets for the leaf-correspondence check.
        correspondence: Option<usize>,
    },
    Reconstruct {
        point: Option<Vec<f64>>,
        xi: Option<Vec<f64>>,
        radius: Option<f64>,
    },
    GammaDiagnostics {
        point: Option<Vec<f64>>,
    },
}

impl Command {
    pub fn kind(&self) -> &'static str {
        match self {
            Command::RankReport { .. } => "rank-report",
            Command::VonNeumann { .. } => "von-neumann",
            Command::Howe { .. } => "howe",
            Command::DualPair { .. } => "dual-pair",
            Command::Leaf { .. } => "leaf",
            Command::Reconstruct { .. } => "reconstruct",
            Command::GammaDiagnostics { .. } => "gamma-diagnostics",
        }
    }
}

/// Which Hamiltonian fields the leaf words are built from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeafFamily {
    /// Coordinate functions: the symplectic leaf.
    #[default]
    Coordinates,
    /// Invariants of the action: the polar leaf.
    Invariants,
    /// Invariants of the polar: the double-polar leaf.
    PolarInvariants,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub coordinates: Vec<usize>,
    pub resolution: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numeric {
    pub step: f64,
    /// Residual tolerance for Casimir and constancy verdicts.
    pub tol: f64,
    pub degree: Option<usize>,
    pub seed: u64,
    pub samples: usize,
    pub words: Words,
}

impl Default for Numeric {
    fn default() -> Self {
        Self { step: DEFAULT_STEP, tol: 1e-6, degree: None, seed: 0, samples: 20, words: Words::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Words {
    pub max_len: usize,
    pub max_duration: f64,
    pub words: usize,
}

impl Default for Words {
    fn default() -> Self {
        Self { max_len: 6, max_duration: 1.0, words: 500 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub report: Option<String>,
    /// Directory for CSV point clouds.
    #[serde(default)]
    pub clouds: Option<String>,
}

/// Parses and validates a scenario, reporting the path of the offending
/// field on schema errors.
pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Schema { path: e.path().to_string(), message: e.inner().to_string() })?;
    validate(&scenario)?;
    Ok(scenario)
}

fn schema_error(path: &str, message: impl Into<String>) -> CliError {
    CliError::Schema { path: path.into(), message: message.into() }
}

fn validate(s: &Scenario) -> Result<(), CliError> {
    if s.schema != SCHEMA_VERSION {
        return Err(schema_error("schema", format!("unsupported schema {}, expected {SCHEMA_VERSION}", s.schema)));
    }
    if s.commands.is_empty() {
        return Err(schema_error("commands", "at least one command is required"));
    }
    let n = &s.numeric;
    if !(n.step > 0.0 && n.step.is_finite()) {
        return Err(schema_error("numeric.step", "must be positive"));
    }
    if !(n.tol > 0.0 && n.tol.is_finite()) {
        return Err(schema_error("numeric.tol", "must be positive"));
    }
    if n.samples == 0 {
        return Err(schema_error("numeric.samples", "must be positive"));
    }
    if !(n.words.max_duration >= 0.0 && n.words.max_duration.is_finite()) {
        return Err(schema_error("numeric.words.max_duration", "must be non-negative"));
    }
    for (i, c) in s.commands.iter().enumerate() {
        let samples = match c {
            Command::RankReport { samples }
            | Command::VonNeumann { samples }
            | Command::Howe { samples }
            | Command::DualPair { samples } => *samples,
            _ => None,
        };
        if samples == Some(0) {
            return Err(schema_error(&format!("commands[{i}].samples"), "must be positive"));
        }
        if let Command::Reconstruct { radius: Some(r), .. } = c {
            if !(*r > 0.0 && r.is_finite()) {
                return Err(schema_error(&format!("commands[{i}].radius"), "must be positive"));
            }
        }
    }
    if s.action.is_none() && matches!(s.space, SpaceSpec::Custom(_)) {
        return Err(schema_error("action", "required for custom spaces"));
    }
    Ok(())
}

fn matrix(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(schema_error(path, "matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl TableSpec {
    pub fn build(&self, dim: usize) -> Result<Table, CliError> {
        match self {
            TableSpec::Trig(terms) => {
                let mut p = TrigPoly::zero(dim);
                for t in terms {
                    if t.mode.len() != dim {
                        return Err(schema_error("mode", format!("expected {dim} entries, got {}", t.mode.len())));
                    }
                    p.add_term(t.mode.clone(), t.cos, t.sin);
                }
                Ok(Table::Trig(p))
            }
            TableSpec::Poly(terms) => {
                let mut p = Poly::zero(dim);
                for t in terms {
                    if t.exponents.len() != dim {
                        return Err(schema_error(
                            "exponents",
                            format!("expected {dim} entries, got {}", t.exponents.len()),
                        ));
                    }
                    p.add_term(t.exponents.clone(), t.coeff);
                }
                Ok(Table::Poly(p))
            }
        }
    }
}

impl AlgebraSpec {
    pub fn build(&self) -> Result<LieAlgebra, CliError> {
        Ok(match self {
            AlgebraSpec::Builtin(name) => match name.as_str() {
                "so3" => LieAlgebra::so3(),
                "se2" => LieAlgebra::se2(),
                "heisenberg" => LieAlgebra::heisenberg(),
                other => {
                    return Err(schema_error(
                        "algebra",
                        format!("unknown algebra {other:?}; available: so3, se2, heisenberg"),
                    ))
                }
            },
            AlgebraSpec::Abelian(n) => LieAlgebra::abelian(*n)?,
            AlgebraSpec::Brackets(b) => {
                let labels: Vec<&str> = b.labels.iter().map(String::as_str).collect();
                let brackets: Vec<BracketEntry> = b.brackets.iter().map(|x| (x.i, x.j, x.terms.as_slice())).collect();
                LieAlgebra::from_brackets(b.name.clone(), &labels, &brackets)?
            }
        })
    }
}

fn custom_space(c: &CustomSpace) -> Result<(PoissonTensor, Vec<ScalarField>), CliError> {
    let tensor = match &c.tensor {
        TensorSpec::LiePoisson(alg) => {
            let tensor = PoissonTensor::lie_poisson(&alg.build()?)?;
            if let Some(p) = &c.periodic {
                if p.len() != tensor.dim() || p.iter().any(|&x| x) {
                    return Err(schema_error(
                        "space.custom.periodic",
                        format!("a Lie-Poisson chart has {} non-periodic coordinates", tensor.dim()),
                    ));
                }
            }
            tensor
        }
        other => {
            let periodic =
                c.periodic.clone().ok_or_else(|| schema_error("space.custom.periodic", "required for this tensor"))?;
            let dim = periodic.len();
            let coords = c.coordinates.clone().unwrap_or_else(|| (1..=dim).map(|i| format!("x{i}")).collect());
            if coords.len() != dim {
                return Err(schema_error("space.custom.coordinates", format!("expected {dim} names")));
            }
            let space = Arc::new(PhaseSpace::with_coordinates(c.name.clone(), periodic, coords)?);
            match other {
                TensorSpec::Constant(rows) => {
                    let b = matrix(rows, "space.custom.tensor.constant")?;
                    PoissonTensor::constant(space, "constant", b)?
                }
                TensorSpec::Symplectic(rows) => {
                    let omega = matrix(rows, "space.custom.tensor.symplectic")?;
                    PoissonTensor::from_symplectic(space, "symplectic", omega)?
                }
                TensorSpec::Tables(rows) => {
                    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                        return Err(schema_error("space.custom.tensor.tables", format!("expected {dim}×{dim} tables")));
                    }
                    let tables = rows.iter().flatten().map(|t| t.build(dim)).collect::<Result<Vec<_>, _>>()?;
                    PoissonTensor::from_tables(space, "tables", tables)?
                }
                TensorSpec::LiePoisson(_) => unreachable!("handled above"),
            }
        }
    };
    let casimirs = c
        .casimirs
        .iter()
        .enumerate()
        .map(|(i, t)| Ok(ScalarField::from_table(format!("casimir{}", i + 1), t.build(tensor.dim())?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((tensor, casimirs))
}

/// Rebuilds `action`'s generators on `space`, which must have the same
/// dimension and periodicity.
fn transplant(action: &ActionSpec, space: &Arc<PhaseSpace>) -> Result<ActionSpec, CliError> {
    if action.space.periodic != space.periodic {
        return Err(schema_error("action.builtin", "action chart does not match the space"));
    }
    let gens = action
        .generators
        .iter()
        .map(|g| {
            let tables = g.tables().ok_or_else(|| schema_error("action.builtin", "generator has no tables"))?;
            Ok(VectorField::from_tables(space.clone(), g.label.clone(), tables.to_vec())?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut out =
        ActionSpec::new(action.name.clone(), action.algebra.clone(), space.clone(), gens)?.compact(action.compact);
    if let Some(g) = &action.group {
        out = out.with_group(g.clone());
    }
    Ok(out)
}

fn build_action(choice: &ActionChoice, tensor: &PoissonTensor) -> Result<ActionSpec, CliError> {
    let space = &tensor.space;
    match choice {
        ActionChoice::Builtin(name) => {
            let sys = builtins::builtin(name).map_err(|e| schema_error("action.builtin", e.to_string()))?;
            transplant(&sys.action, space)
        }
        ActionChoice::Coadjoint(alg) => {
            let alg = alg.build()?;
            if alg.dim != space.dim {
                return Err(schema_error("action.coadjoint", "algebra dimension differs from the space"));
            }
            Ok(ActionSpec::coadjoint(&alg, tensor)?)
        }
        ActionChoice::Custom(c) => {
            let gens = c
                .generators
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    if g.len() != space.dim {
                        return Err(schema_error(
                            &format!("action.custom.generators[{i}]"),
                            format!("expected {} tables", space.dim),
                        ));
                    }
                    let tables = g.iter().map(|t| t.build(space.dim)).collect::<Result<Vec<_>, _>>()?;
                    Ok(VectorField::from_tables(space.clone(), format!("e{}_M", i + 1), tables)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let alg = match &c.algebra {
                Some(a) => a.build()?,
                None => LieAlgebra::abelian(gens.len())?,
            };
            Ok(ActionSpec::new(c.name.clone(), alg, space.clone(), gens)?.compact(c.compact))
        }
    }
}

/// The Poisson manifold and action the scenario describes.
pub fn build_system(s: &Scenario) -> Result<System, CliError> {
    match &s.space {
        SpaceSpec::Builtin(name) => {
            let sys = builtins::builtin(name).map_err(|e| schema_error("space.builtin", e.to_string()))?;
            match &s.action {
                None => Ok(sys),
                Some(ActionChoice::Builtin(a)) if a == name => Ok(sys),
                Some(choice) => {
                    let action = build_action(choice, &sys.tensor)?;
                    Ok(System { action, ..sys })
                }
            }
        }
        SpaceSpec::Custom(c) => {
            let (tensor, casimirs) = custom_space(c)?;
            let choice = s.action.as_ref().ok_or_else(|| schema_error("action", "required for custom spaces"))?;
            let action = build_action(choice, &tensor)?;
            Ok(System { name: c.name.clone(), tensor, action, casimirs, sample_half_width: c.sample_half_width })
        }
    }
}
