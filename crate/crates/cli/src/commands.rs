//! Execution of scenario commands.

use std::cell::OnceCell;
use std::path::{Path, PathBuf};

use dualpair::builtins::System;
use dualpair::geometry::ScalarField;
use dualpair::leaves::{self, WordPolicy};
use dualpair::polarity::{self, PolarChain, Verdict};
use dualpair::reconstruction::{self, BumpOptions, BumpProfile};
use dualpair::rng;
use dualpair::Error;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{Command, DensitySpec, LeafFamily, Numeric};
use crate::{export, CliError};

/// Relative variance below which a principal axis of a cloud is dropped.
pub const PCA_TOLERANCE: f64 = 0.05;
/// Certificate bounds for bump Hamiltonians.
pub const ENDPOINT_TOL: f64 = 1e-5;
pub const CENTRALIZER_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
    Informational,
}

impl From<Verdict> for Outcome {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => Outcome::Pass,
            Verdict::Fail => Outcome::Fail,
            Verdict::Inconclusive => Outcome::Inconclusive,
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Inconclusive => "INCONCLUSIVE",
            Outcome::Informational => "INFORMATIONAL",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CommandResult {
    pub command: &'static str,
    pub verdict: Outcome,
    pub result: Value,
}

pub struct Context<'a> {
    pub system: &'a System,
    pub numeric: &'a Numeric,
    pub degree: usize,
    pub clouds: Option<PathBuf>,
    chain: OnceCell<PolarChain>,
}

impl<'a> Context<'a> {
    pub fn new(system: &'a System, numeric: &'a Numeric, degree: usize, clouds: Option<PathBuf>) -> Self {
        Self { system, numeric, degree, clouds, chain: OnceCell::new() }
    }

    /// The first `n` points of the scenario's sample stream.
    pub fn samples(&self, n: Option<usize>) -> Vec<Vec<f64>> {
        let n = n.unwrap_or(self.numeric.samples);
        self.system.sample_points(&mut rng::stream(self.numeric.seed, "samples"), n)
    }

    /// `command` with every optional parameter filled in.
    pub fn resolve(&self, command: &Command) -> Result<Command, CliError> {
        let n = Some(self.numeric.samples);
        Ok(match command.clone() {
            Command::RankReport { samples } => Command::RankReport { samples: samples.or(n) },
            Command::VonNeumann { samples } => Command::VonNeumann { samples: samples.or(n) },
            Command::Howe { samples } => Command::Howe { samples: samples.or(n) },
            Command::DualPair { samples } => Command::DualPair { samples: samples.or(n) },
            Command::Leaf { point, family, density, correspondence } => {
                Command::Leaf { point: Some(self.point(&point)?), family, density, correspondence }
            }
            Command::Reconstruct { point, xi, radius } => Command::Reconstruct {
                point: Some(self.point(&point)?),
                xi: Some(xi.unwrap_or_else(|| self.random_xi())),
                radius: Some(radius.unwrap_or(1.0)),
            },
            Command::GammaDiagnostics { point } => Command::GammaDiagnostics { point: Some(self.point(&point)?) },
        })
    }

    fn random_xi(&self) -> Vec<f64> {
        let mut r = rng::stream(self.numeric.seed, "reconstruct");
        (0..self.system.action.dim()).map(|_| r.gen_range(-1.5..1.5)).collect()
    }

    fn point(&self, given: &Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
        let m = match given {
            Some(p) => p.clone(),
            None => self.samples(Some(1)).remove(0),
        };
        self.system.space().check_point(&m)?;
        Ok(m)
    }

    fn chain(&self) -> Result<&PolarChain, Error> {
        if let Some(c) = self.chain.get() {
            return Ok(c);
        }
        let c = PolarChain::new(&self.system.tensor, &self.system.action, self.degree)?;
        Ok(self.chain.get_or_init(|| c))
    }

    fn policy(&self) -> WordPolicy {
        let w = &self.numeric.words;
        WordPolicy {
            max_len: w.max_len,
            max_duration: w.max_duration,
            words: w.words,
            seed: self.numeric.seed,
            step: self.numeric.step,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize to JSON")
}

pub fn run(ctx: &Context, index: usize, command: &Command) -> Result<CommandResult, CliError> {
    let (verdict, result) = match command {
        Command::RankReport { samples } => rank_report(ctx, &ctx.samples(*samples))?,
        Command::VonNeumann { samples } => {
            let sys = ctx.system;
            let r = polarity::von_neumann_test(&sys.tensor, &sys.action, &ctx.samples(*samples), ctx.degree)?;
            (r.verdict.into(), to_value(&r))
        }
        Command::Howe { samples } => {
            let chain = ctx.chain()?;
            let r = polarity::howe_check(
                &ctx.system.tensor,
                &chain.action.family,
                &chain.polar.family,
                &ctx.samples(*samples),
            )?;
            let body = json!({
                "degree": ctx.degree,
                "action_invariants": chain.action.family.len(),
                "polar_invariants": chain.polar.family.len(),
                "report": to_value(&r),
            });
            (r.verdict.into(), body)
        }
        Command::DualPair { samples } => {
            let chain = ctx.chain()?;
            let r = polarity::dual_pair_check(&ctx.system.tensor, &chain.action, &chain.polar, &ctx.samples(*samples))?;
            (r.verdict.into(), to_value(&r))
        }
        Command::Leaf { point, family, density, correspondence } => {
            leaf(ctx, index, &ctx.point(point)?, *family, density.as_ref(), *correspondence)?
        }
        Command::Reconstruct { point, xi, radius } => reconstruct(ctx, &ctx.point(point)?, xi.as_deref(), *radius)?,
        Command::GammaDiagnostics { point } => {
            let m = ctx.point(point)?;
            let r = reconstruction::gamma_diagnostics(&ctx.system.action, &ctx.system.tensor, &m)?;
            (Outcome::Informational, to_value(&r))
        }
    };
    Ok(CommandResult { command: command.kind(), verdict, result })
}

#[derive(Serialize)]
struct RankRow {
    point: Vec<f64>,
    orbit_rank: usize,
    polar_rank: usize,
    classical_rank: usize,
    singular_rank: Option<usize>,
    containment_angle: f64,
    polar_in_classical: bool,
}

fn rank_report(ctx: &Context, samples: &[Vec<f64>]) -> Result<(Outcome, Value), CliError> {
    let sys = ctx.system;
    let chain = ctx.chain()?;
    let rows = samples
        .iter()
        .map(|m| {
            let r = polarity::polar_report(&sys.tensor, &sys.action, &chain.action.family, m)?;
            Ok(RankRow {
                point: m.clone(),
                orbit_rank: sys.action.orbit_tangent(m).rank,
                polar_rank: r.polar.rank,
                classical_rank: r.classical.rank,
                singular_rank: r.singular.as_ref().map(|s| s.rank),
                containment_angle: r.containment_angle,
                polar_in_classical: r.polar_in_classical,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let contained = rows.iter().all(|r| r.polar_in_classical);
    let worst = rows.iter().map(|r| r.containment_angle).fold(0.0, f64::max);
    let body = json!({
        "degree": ctx.degree,
        "invariants": chain.action.family.len(),
        "max_containment_angle": worst,
        "samples": to_value(&rows),
    });
    Ok((Verdict::from_bool(contained).into(), body))
}

fn leaf(
    ctx: &Context,
    index: usize,
    m: &[f64],
    family: LeafFamily,
    density: Option<&DensitySpec>,
    correspondence: Option<usize>,
) -> Result<(Outcome, Value), CliError> {
    let sys = ctx.system;
    let n = sys.space().dim;
    let members: Vec<ScalarField> = match family {
        LeafFamily::Coordinates => (0..n).map(|i| ScalarField::coordinate(n, i)).collect(),
        LeafFamily::Invariants => ctx.chain()?.action.family.members.clone(),
        LeafFamily::PolarInvariants => ctx.chain()?.polar.family.members.clone(),
    };
    let policy = ctx.policy();
    let cloud = leaves::leaf_sample(&sys.tensor, &members, m, &policy)?;
    let casimirs = sys
        .casimirs
        .iter()
        .map(|c| Ok(json!({"casimir": c.label, "residual": leaves::casimir_residual(&cloud, c)?})))
        .collect::<Result<Vec<_>, Error>>()?;
    let casimir_ok =
        sys.casimirs.iter().all(|c| leaves::casimir_residual(&cloud, c).is_ok_and(|r| r < ctx.numeric.tol));
    let mut body = json!({
        "point": m,
        "family": family,
        "fields": members.len(),
        "cloud": to_value(&cloud),
        "casimirs": casimirs,
        "pca_dimension": leaves::pca_dimension(&cloud, PCA_TOLERANCE),
    });
    if let Some(d) = density {
        body["density"] = to_value(&leaves::density_report(&cloud, &d.coordinates, d.resolution)?);
    }
    let mut outcome = if sys.casimirs.is_empty() { None } else { Some(Verdict::from_bool(casimir_ok)) };
    if let Some(targets) = correspondence {
        let chain = ctx.chain()?;
        let r = leaves::leaf_correspondence_check(&sys.tensor, &chain.action, &chain.polar, m, &policy, targets)?;
        outcome = Some(match (outcome, r.verdict) {
            (Some(Verdict::Fail), _) | (_, Verdict::Fail) => Verdict::Fail,
            (Some(Verdict::Inconclusive), _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        });
        body["correspondence"] = to_value(&r);
    }
    if let Some(dir) = &ctx.clouds {
        let path = dir.join(format!("{index:02}-leaf.csv"));
        export::write_cloud(&cloud, &path)?;
        body["csv"] = Value::String(display_path(&path));
    }
    Ok((outcome.map_or(Outcome::Informational, Outcome::from), body))
}

fn display_path(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn reconstruct(
    ctx: &Context,
    m: &[f64],
    xi: Option<&[f64]>,
    radius: Option<f64>,
) -> Result<(Outcome, Value), CliError> {
    let sys = ctx.system;
    let xi = xi.map_or_else(|| ctx.random_xi(), <[f64]>::to_vec);
    if xi.len() != sys.action.dim() {
        return Err(Error::Dimension { expected: sys.action.dim(), got: xi.len() }.into());
    }
    let radius = radius.unwrap_or(1.0);
    let tube = match reconstruction::build_splitting(&sys.action, &sys.tensor, m, None) {
        Ok(t) => to_value(&t.with_radius(radius)),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let profile = BumpProfile::for_radius(radius)?;
    let options = BumpOptions {
        degree: Some(ctx.degree),
        step: ctx.numeric.step,
        seed: ctx.numeric.seed,
        ..BumpOptions::default()
    };
    let mut body = json!({ "point": m, "xi": xi, "radius": radius, "tube": tube });
    let outcome = match reconstruction::bump_hamiltonian_with(&sys.action, &sys.tensor, m, &xi, &profile, &options) {
        Ok(b) => {
            let c = &b.certificate;
            let ok = c.endpoint_error < ENDPOINT_TOL && c.centralizer_residual < CENTRALIZER_TOL;
            body["bump"] = json!({
                "closure": b.closure,
                "orbit_class": b.orbit_class,
                "momentum_directions": b.momentum_directions,
                "certificate": to_value(c),
            });
            Verdict::from_bool(ok).into()
        }
        Err(e @ Error::HypothesisViolation(_)) => {
            body["hypothesis_violation"] = Value::String(e.to_string());
            Outcome::Fail
        }
        Err(e @ (Error::NotApplicable(_) | Error::UnsupportedIsotropy(_))) => {
            body["not_applicable"] = Value::String(e.to_string());
            Outcome::Inconclusive
        }
        Err(e) => return Err(e.into()),
    };
    Ok((outcome, body))
}
