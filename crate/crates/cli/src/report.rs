//! Running a scenario end to end and assembling its report.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use crate::commands::{self, CommandResult, Context, Outcome};
use crate::scenario::{self, Scenario};
use crate::CliError;

pub const TOOL: &str = "dualpair";

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub degree: usize,
    pub wall_time_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    /// The scenario with every default filled in.
    pub scenario: Scenario,
    pub system: String,
    pub results: Vec<CommandResult>,
    pub exit_code: i32,
    pub provenance: Provenance,
}

/// Command-line overrides of the scenario.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub degree: Option<usize>,
    pub out: Option<PathBuf>,
}

/// 2 if any verdict failed, 0 otherwise.
pub fn exit_code(results: &[CommandResult]) -> i32 {
    if results.iter().any(|r| r.verdict == Outcome::Fail) {
        2
    } else {
        0
    }
}

/// Parses, resolves defaults, and executes every command in order.
pub fn run_text(text: &str, overrides: &Overrides) -> Result<Report, CliError> {
    let start = Instant::now();
    let mut scenario = scenario::parse(text)?;
    if let Some(s) = overrides.seed {
        scenario.numeric.seed = s;
    }
    if let Some(d) = overrides.degree {
        scenario.numeric.degree = Some(d);
    }
    if let Some(out) = &overrides.out {
        scenario.output.report = Some(out.to_string_lossy().into_owned());
    }
    let system = scenario::build_system(&scenario)?;
    let degree = scenario.numeric.degree.unwrap_or_else(|| system.default_degree());
    scenario.numeric.degree = Some(degree);
    let clouds = scenario.output.clouds.as_ref().map(PathBuf::from);
    let numeric = scenario.numeric.clone();
    let ctx = Context::new(&system, &numeric, degree, clouds);
    scenario.commands = scenario.commands.iter().map(|c| ctx.resolve(c)).collect::<Result<_, _>>()?;
    let results =
        scenario.commands.iter().enumerate().map(|(i, c)| commands::run(&ctx, i, c)).collect::<Result<Vec<_>, _>>()?;
    let exit_code = exit_code(&results);
    let seed = scenario.numeric.seed;
    Ok(Report {
        system: system.name.clone(),
        results,
        exit_code,
        provenance: Provenance {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            degree,
            wall_time_seconds: start.elapsed().as_secs_f64(),
        },
        scenario,
    })
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize to JSON");
    s.push('\n');
    s
}

/// Runs the scenario file and writes the report to its output path, or
/// returns it for printing when no path is set.
pub fn run_file(path: &std::path::Path, overrides: &Overrides) -> Result<(Report, Option<PathBuf>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let report = run_text(&text, overrides)?;
    let out = report.scenario.output.report.as_ref().map(PathBuf::from);
    if let Some(p) = &out {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        std::fs::write(p, to_json(&report)).map_err(|e| CliError::io(p, e))?;
    }
    Ok((report, out))
}
