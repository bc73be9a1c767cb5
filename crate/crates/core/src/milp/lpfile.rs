//! CPLEX LP text-format writer and a solution-file reader for the external
//! solver bridge.
//!
//! Written grammar (subset): an objective section (`Minimize`/`Maximize`)
//! with a single `obj:` row, `Subject To` with named rows, `Bounds`,
//! `Binaries`, and `End`. Solution files are plain text: optional comment
//! lines starting with `#`, an optional `objective <value>` line, and one
//! `<name> <value>` pair per line.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{MilpModel, RowSense, Sense, VarKind};

#[derive(Debug, Error)]
pub enum LpFileError {
    #[error("variable name {0:?} contains whitespace or is empty")]
    BadName(String),
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn check_name(name: &str) -> Result<(), LpFileError> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace()) {
        return Err(LpFileError::BadName(name.to_string()));
    }
    Ok(())
}

fn push_terms(out: &mut String, terms: &[(usize, f64)], model: &MilpModel) {
    let mut first = true;
    for &(v, coeff) in terms {
        if coeff == 0.0 {
            continue;
        }
        let name = &model.variables[v].name;
        if first {
            if coeff < 0.0 {
                let _ = write!(out, "- ");
            }
            first = false;
        } else if coeff < 0.0 {
            let _ = write!(out, " - ");
        } else {
            let _ = write!(out, " + ");
        }
        let mag = coeff.abs();
        if (mag - 1.0).abs() < f64::EPSILON {
            let _ = write!(out, "{name}");
        } else {
            let _ = write!(out, "{mag} {name}");
        }
    }
    if first {
        let _ = write!(out, "0");
    }
}

pub fn lp_text(model: &MilpModel) -> Result<String, LpFileError> {
    for v in &model.variables {
        check_name(&v.name)?;
    }
    let mut out = String::new();
    out.push_str(match model.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj: ");
    push_terms(&mut out, &model.objective, model);
    out.push_str("\nSubject To\n");
    for (i, con) in model.constraints.iter().enumerate() {
        let name = if con.name.is_empty() { format!("c{i}") } else { con.name.clone() };
        check_name(&name)?;
        let _ = write!(out, " {name}: ");
        push_terms(&mut out, &con.terms, model);
        let op = match con.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", con.rhs);
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.kind == VarKind::Binary {
            continue; // the Binaries section implies [0, 1]
        }
        match (v.lo.is_finite(), v.hi.is_finite()) {
            (true, true) => {
                let _ = writeln!(out, " {} <= {} <= {}", v.lo, v.name, v.hi);
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", v.name, v.lo);
            }
            (false, true) => {
                let _ = writeln!(out, " {} <= {}", v.name, v.hi);
            }
            (false, false) => {
                let _ = writeln!(out, " {} free", v.name);
            }
        }
    }
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n ");
        out.push_str(&binaries.join(" "));
        out.push('\n');
    }
    out.push_str("End\n");
    Ok(out)
}

pub fn export_lp(model: &MilpModel, path: &Path) -> Result<(), LpFileError> {
    std::fs::write(path, lp_text(model)?)?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct ParsedSolution {
    pub objective: Option<f64>,
    pub values: Vec<(String, f64)>,
}

pub fn import_solution(text: &str) -> Result<ParsedSolution, LpFileError> {
    let mut parsed = ParsedSolution::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().expect("non-empty line has a token");
        let value_str = parts.next().ok_or_else(|| LpFileError::Parse {
            line: i + 1,
            column: raw.trim_end().len() + 1,
            message: "expected a value after the name".into(),
        })?;
        if parts.next().is_some() {
            return Err(LpFileError::Parse {
                line: i + 1,
                column: raw.find(value_str).unwrap_or(0) + value_str.len() + 1,
                message: "unexpected trailing tokens".into(),
            });
        }
        let value: f64 = value_str.parse().map_err(|_| LpFileError::Parse {
            line: i + 1,
            column: raw.find(value_str).unwrap_or(0) + 1,
            message: format!("invalid number {value_str:?}"),
        })?;
        if head.eq_ignore_ascii_case("objective") {
            parsed.objective = Some(value);
        } else {
            parsed.values.push((head.to_string(), value));
        }
    }
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_embedded, SolveOptions};

    fn sample_model() -> MilpModel {
        let mut m = MilpModel::new(Sense::Maximize);
        let x = m.add_binary("x");
        let y = m.add_binary("y");
        let t = m.add_continuous("t", 0.0, 2.5);
        m.set_objective_term(x, 3.0);
        m.set_objective_term(y, 2.0);
        m.set_objective_term(t, 1.0);
        m.add_constraint("w", vec![(x, 2.0), (y, 2.0), (t, 1.0)], RowSense::Le, 4.0);
        m
    }

    #[test]
    fn export_import_round_trip_objective() {
        let m = sample_model();
        let sol = solve_embedded(&m, &SolveOptions::default()).unwrap();
        let mut text = format!("# solved externally\nobjective {}\n", sol.objective);
        for (v, val) in m.variables.iter().zip(&sol.x) {
            text.push_str(&format!("{} {}\n", v.name, val));
        }
        let parsed = import_solution(&text).unwrap();
        assert_eq!(parsed.objective, Some(sol.objective));
        let x_back: Vec<f64> = m
            .variables
            .iter()
            .map(|v| parsed.values.iter().find(|(n, _)| n == &v.name).unwrap().1)
            .collect();
        assert!((m.objective_value(&x_back) - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn zero_coefficients_omitted() {
        let mut m = sample_model();
        m.set_objective_term(1, -2.0); // cancels y's coefficient to zero
        let text = lp_text(&m).unwrap();
        assert!(text.contains("obj: 3 x + t"));
        assert!(!text.contains("0 y"));
    }

    #[test]
    fn sections_present() {
        let text = lp_text(&sample_model()).unwrap();
        for section in ["Maximize", "Subject To", "Bounds", "Binaries", "End"] {
            assert!(text.contains(section), "missing {section}");
        }
        assert!(text.contains(" 0 <= t <= 2.5"));
        assert!(text.contains("Binaries\n x y"));
    }

    #[test]
    fn name_with_space_rejected() {
        let mut m = sample_model();
        m.variables[0].name = "bad name".into();
        assert!(matches!(lp_text(&m), Err(LpFileError::BadName(_))));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = import_solution("x\n").unwrap_err();
        assert!(matches!(err, LpFileError::Parse { line: 1, .. }));
        let err = import_solution("x notanumber\n").unwrap_err();
        match err {
            LpFileError::Parse { line, column, .. } => {
                assert_eq!(line, 1);
                assert_eq!(column, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = import_solution("x 1 2\n").unwrap_err();
        assert!(matches!(err, LpFileError::Parse { line: 1, .. }));
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let parsed = import_solution("# header\n\nx 1\n# tail\ny 0\n").unwrap();
        assert_eq!(parsed.values, vec![("x".into(), 1.0), ("y".into(), 0.0)]);
        assert_eq!(parsed.objective, None);
    }
}
