//! CPLEX-style LP text.

use std::collections::HashSet;
use std::fmt::Write;

use crate::mip::{Domain, MipModel, VarId};
use crate::risk::Sense;

pub const MAX_LP_NAME: usize = 255;
const WRAP: usize = 100;

/// LP-safe variable names: characters outside `[A-Za-z0-9_.]` become `_`;
/// collisions and overlong names fall back to `x<index>`.
pub fn lp_names(model: &MipModel) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(model.variables().len());
    for (i, v) in model.variables().iter().enumerate() {
        let mut name: String = v
            .name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
            .collect();
        if name.len() > MAX_LP_NAME || name.starts_with(|c: char| c.is_ascii_digit() || c == '.') || !seen.insert(name.clone()) {
            name = format!("x{i}");
            while !seen.insert(name.clone()) {
                name.push('_');
            }
        }
        out.push(name);
    }
    out
}

fn sense(s: Sense) -> &'static str {
    match s {
        Sense::Le => "<=",
        Sense::Ge => ">=",
        Sense::Eq => "=",
    }
}

/// Appends `terms` to `line`, flushing wrapped lines into `out`.
fn push_terms(out: &mut String, line: &mut String, terms: &[(f64, VarId)], names: &[String]) {
    for (k, &(c, v)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else { "+" };
        let mag = c.abs();
        let coef = if mag == 1.0 { String::new() } else { format!("{mag} ") };
        let piece = match (k, sign) {
            (0, "+") => format!("{coef}{}", names[v.index()]),
            _ => format!("{sign} {coef}{}", names[v.index()]),
        };
        if line.len() + piece.len() + 1 > WRAP && !line.trim().is_empty() && !line.trim_end().ends_with(':') {
            out.push_str(line.trim_end());
            out.push('\n');
            line.clear();
            line.push_str("   ");
        } else if !line.ends_with(' ') {
            line.push(' ');
        }
        line.push_str(&piece);
    }
}

fn finish(out: &mut String, line: &mut String, tail: &str) {
    if line.len() + tail.len() + 1 > WRAP {
        out.push_str(line.trim_end());
        out.push('\n');
        line.clear();
        line.push_str("   ");
    } else {
        line.push(' ');
    }
    line.push_str(tail);
    out.push_str(line);
    out.push('\n');
    line.clear();
}

/// Deterministic LP text: objective, rows preceded by their provenance
/// tag as a comment, bounds and binaries.
pub fn export_lp(model: &MipModel) -> String {
    let names = lp_names(model);
    let mut out = String::new();
    let mut line = String::new();
    let _ = writeln!(
        out,
        "\\ objective {}: {} variables, {} rows",
        model.objective_label(),
        model.variables().len(),
        model.constraints().len()
    );
    out.push_str("Maximize\n");
    line.push_str(" obj:");
    if model.objective().is_empty() {
        if let Some(first) = names.first() {
            let _ = write!(line, " 0 {first}");
        }
    } else {
        push_terms(&mut out, &mut line, model.objective(), &names);
    }
    out.push_str(line.trim_end());
    out.push('\n');
    line.clear();

    out.push_str("Subject To\n");
    for (r, c) in model.constraints().iter().enumerate() {
        let _ = writeln!(out, "\\ {}", c.tag);
        let _ = write!(line, " r{r}:");
        if let Some(ind) = c.indicator {
            let _ = write!(line, " {} = {} ->", names[ind.var.index()], ind.when as u8);
        }
        if c.terms.is_empty() {
            // An empty row still has to name a variable.
            if let Some(first) = names.first() {
                let _ = write!(line, " 0 {first}");
            }
        } else {
            push_terms(&mut out, &mut line, &c.terms, &names);
        }
        finish(&mut out, &mut line, &format!("{} {}", sense(c.sense), c.rhs));
    }

    out.push_str("Bounds\n");
    for (i, v) in model.variables().iter().enumerate() {
        match v.domain {
            Domain::Continuous { lo, hi } => {
                let _ = writeln!(out, " {lo} <= {} <= {hi}", names[i]);
            }
            Domain::Free => {
                let _ = writeln!(out, " {} free", names[i]);
            }
            Domain::Binary => {}
        }
    }
    let binaries: Vec<&String> = model
        .variables()
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.domain == Domain::Binary)
        .map(|(_, n)| n)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for name in binaries {
            if !line.is_empty() && line.len() + name.len() + 1 > WRAP {
                out.push_str(&line);
                out.push('\n');
                line.clear();
            }
            line.push(' ');
            line.push_str(name);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::{Family, VarKind};

    #[test]
    fn ge_rows_and_sections() {
        let mut m = MipModel::new();
        let x = m.add_var("x", Domain::Continuous { lo: 0.0, hi: 4.0 }, VarKind::Mu).unwrap();
        let b = m.add_var("b", Domain::Binary, VarKind::Delta).unwrap();
        let e = m.add_var("eta", Domain::Free, VarKind::Eta).unwrap();
        m.add_constraint([(1.0, x), (-2.5, b)], Sense::Ge, 1.0, Family::Chance, "lower").unwrap();
        m.add_constraint([(-1.0, x), (1.0, e)], Sense::Le, 0.0, Family::Chance, "upper").unwrap();
        m.set_objective(vec![(3.0, x), (-1.0, e)], "meu");
        let lp = export_lp(&m);
        assert!(lp.contains(" obj: 3 x - eta\n"));
        assert!(lp.contains(" r0: x - 2.5 b >= 1\n"));
        assert!(lp.contains(" r1: - x + eta <= 0\n"));
        assert!(lp.contains("\\ lower\n"));
        assert!(lp.contains(" 0 <= x <= 4\n eta free\nBinaries\n b\nEnd\n"));
        assert_eq!(lp, export_lp(&m));
    }

    #[test]
    fn names_are_sanitized_and_unique() {
        let mut m = MipModel::new();
        m.add_var("mu_a b_0", Domain::UNIT, VarKind::Mu).unwrap();
        m.add_var("mu_a-b_0", Domain::UNIT, VarKind::Mu).unwrap();
        m.add_var("9lives", Domain::UNIT, VarKind::Mu).unwrap();
        m.add_var("y".repeat(300), Domain::UNIT, VarKind::Mu).unwrap();
        assert_eq!(lp_names(&m), vec!["mu_a_b_0", "x1", "x2", "x3"]);
    }

    #[test]
    fn long_rows_wrap() {
        let mut m = MipModel::new();
        let vars: Vec<VarId> = (0..40)
            .map(|i| m.add_var(format!("mu_cluster_{i}"), Domain::UNIT, VarKind::Mu).unwrap())
            .collect();
        m.add_constraint(vars.iter().map(|&v| (1.0, v)), Sense::Eq, 1.0, Family::Normalization, "n").unwrap();
        let lp = export_lp(&m);
        assert!(lp.lines().all(|l| l.len() <= WRAP));
        assert!(lp.contains("\n   + mu_cluster_"));
    }
}
