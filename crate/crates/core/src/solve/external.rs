//! Bridge to an external MIP solver through LP files.
//!
//! The solver is a shell command template with `{lp}` and `{sol}`
//! placeholders. Its solution listing is parsed with regular expressions,
//! so supporting another layout is a matter of data, not code. Every point
//! returned is re-checked against the model before it is trusted.

use std::collections::HashMap;
use std::process::Command;

use regex::Regex;

use crate::error::{Error, Result};
use crate::mip::MipModel;

use super::{export_lp, lp_names, Solution, Source, Status, EXTERNAL_TOL};

/// Environment variable holding the default solver command template.
pub const SOLVER_ENV: &str = "LIMID_RJT_SOLVER";

#[derive(Debug, Clone)]
pub struct SolutionFormat {
    /// Captures a variable name and its value.
    pub value: Regex,
    /// Captures the solver's status word.
    pub status: Regex,
    /// Status words meaning the model is infeasible.
    pub infeasible: Regex,
    /// Status words meaning an optimal point follows.
    pub optimal: Regex,
}

impl SolutionFormat {
    /// `name value` lines, with an optional `status <word>` line.
    pub fn name_value() -> Self {
        Self::from_patterns(
            r"^\s*([A-Za-z_][A-Za-z0-9_.]*)\s+(\S+)\s*$",
            r"(?i)^\s*status\s*[:=]?\s*(.+?)\s*$",
            r"(?i)infeasible",
            r"(?i)^optimal",
        )
        .expect("built-in patterns compile")
    }

    pub fn from_patterns(value: &str, status: &str, infeasible: &str, optimal: &str) -> Result<Self> {
        let re = |p: &str| Regex::new(p).map_err(|e| Error::Parse(format!("bad solution pattern `{p}`: {e}")));
        Ok(Self {
            value: re(value)?,
            status: re(status)?,
            infeasible: re(infeasible)?,
            optimal: re(optimal)?,
        })
    }
}

impl Default for SolutionFormat {
    fn default() -> Self {
        Self::name_value()
    }
}

#[derive(Debug, Clone)]
pub struct ExternalSolver {
    /// Shell command; `{lp}` and `{sol}` are replaced by quoted paths. When
    /// `{sol}` is absent the listing is read from standard output.
    pub command: String,
    pub format: SolutionFormat,
    /// Row slack for the mandatory re-check.
    pub tol: f64,
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            format: SolutionFormat::default(),
            tol: EXTERNAL_TOL,
        }
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(SOLVER_ENV).ok().filter(|c| !c.trim().is_empty()).map(Self::new)
    }
}

fn quote(path: &std::path::Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

/// Parsed listing: status word (if any) and values by LP name.
fn parse_listing(text: &str, format: &SolutionFormat) -> (Option<String>, HashMap<String, String>) {
    let mut status = None;
    let mut values = HashMap::new();
    for line in text.lines() {
        if let Some(c) = format.status.captures(line) {
            status = Some(c[1].to_string());
            continue;
        }
        if let Some(c) = format.value.captures(line) {
            values.insert(c[1].to_string(), c[2].to_string());
        }
    }
    (status, values)
}

pub fn solve_external(model: &MipModel, solver: &ExternalSolver) -> Result<Solution> {
    let dir = tempfile::tempdir()?;
    let lp = dir.path().join("model.lp");
    let sol = dir.path().join("model.sol");
    std::fs::write(&lp, export_lp(model))?;
    let cmd = solver.command.replace("{lp}", &quote(&lp)).replace("{sol}", &quote(&sol));
    let out = Command::new("sh").arg("-c").arg(&cmd).output()?;
    if !out.status.success() {
        return Err(Error::Solver(format!(
            "`{}` exited with {}: {}",
            solver.command,
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let text = if solver.command.contains("{sol}") {
        std::fs::read_to_string(&sol)
            .map_err(|e| Error::Solver(format!("solver wrote no solution file: {e}")))?
    } else {
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    let source = Source::External(solver.command.clone());
    let (status, raw) = parse_listing(&text, &solver.format);
    let mut solution = Solution {
        status: Status::Unknown,
        values: Vec::new(),
        objective: None,
        source,
        diagnostics: Vec::new(),
        optimal_set: Vec::new(),
        evaluated: 0,
    };
    if let Some(word) = &status {
        if solver.format.infeasible.is_match(word) {
            solution.status = Status::Infeasible;
            return Ok(solution);
        }
        if !solver.format.optimal.is_match(word) {
            solution.diagnostics.push(format!("solver status `{word}`"));
            return Ok(solution);
        }
    }

    let names = lp_names(model);
    let mut values = Vec::with_capacity(names.len());
    let mut missing = Vec::new();
    for name in &names {
        match raw.get(name) {
            Some(v) => values.push(
                v.parse::<f64>()
                    .map_err(|_| Error::Solver(format!("unparsable value `{v}` for `{name}`")))?,
            ),
            None => {
                missing.push(name.as_str());
                values.push(f64::NAN);
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Solver(format!(
            "solution lacks {} of {} variables (first: `{}`)",
            missing.len(),
            names.len(),
            missing[0]
        )));
    }

    for v in model.violations(&values, solver.tol) {
        let row = &model.constraints()[v.row];
        solution.diagnostics.push(format!("row r{} ({}) violated by {:e}", v.row, row.tag, v.amount));
    }
    for (var, amount) in model.domain_violations(&values, solver.tol) {
        solution
            .diagnostics
            .push(format!("{} outside its domain by {amount:e}", model.variable(var).name));
    }
    solution.status = if solution.diagnostics.is_empty() { Status::Optimal } else { Status::Unknown };
    solution.objective = Some(model.objective_value(&values));
    solution.values = values;
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::{Domain, Family, VarKind};
    use crate::risk::Sense;

    fn one_var(lo_row: f64) -> MipModel {
        let mut m = MipModel::new();
        let x = m.add_var("x", Domain::Continuous { lo: 0.0, hi: 10.0 }, VarKind::Mu).unwrap();
        m.add_constraint([(1.0, x)], Sense::Ge, lo_row, Family::Chance, "x>=lo").unwrap();
        m.set_objective(vec![(-1.0, x)], "meu");
        m
    }

    #[test]
    fn listing_parse() {
        let (status, values) = parse_listing("status Optimal\nobjective -1\nx 1.5\n", &SolutionFormat::default());
        assert_eq!(status.as_deref(), Some("Optimal"));
        assert_eq!(values["x"], "1.5");
    }

    #[test]
    fn infeasible_status() {
        let s = ExternalSolver::new("echo 'status Infeasible'");
        assert_eq!(solve_external(&one_var(1.0), &s).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn recheck_downgrades_violations() {
        let ok = solve_external(&one_var(1.0), &ExternalSolver::new("printf 'status optimal\\nx 1\\n'")).unwrap();
        assert_eq!(ok.status, Status::Optimal);
        assert_eq!(ok.objective, Some(-1.0));
        let bad = solve_external(&one_var(1.0), &ExternalSolver::new("printf 'x 0.5\\n'")).unwrap();
        assert_eq!(bad.status, Status::Unknown);
        assert!(bad.diagnostics[0].contains("x>=lo"));
    }

    #[test]
    fn structured_errors() {
        let m = one_var(1.0);
        assert!(matches!(solve_external(&m, &ExternalSolver::new("exit 3")), Err(Error::Solver(_))));
        assert!(matches!(solve_external(&m, &ExternalSolver::new("echo y 1")), Err(Error::Solver(_))));
        assert!(matches!(solve_external(&m, &ExternalSolver::new("echo x abc")), Err(Error::Solver(_))));
        assert!(matches!(solve_external(&m, &ExternalSolver::new("true {sol}")), Err(Error::Solver(_))));
    }

    #[test]
    fn lp_file_is_passed_by_path() {
        let s = ExternalSolver::new("grep -q '^Maximize' {lp} && echo x 2");
        assert_eq!(solve_external(&one_var(1.0), &s).unwrap().status, Status::Optimal);
    }
}
