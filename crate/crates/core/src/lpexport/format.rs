use std::collections::HashMap;
use std::fmt::Write as _;

use super::{LinearModel, Relation, RouteCap, Row, Sense, VarKind, Variable};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

/// CPLEX LP text. Numbers use the shortest representation that reads back
/// exactly, so `parse_lp(&write_lp(m)) == m`.
pub fn write_lp(model: &LinearModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ model: {}", model.name);
    let _ = writeln!(out, "\\ constant K = {}", model.big_m);
    for c in &model.route_caps {
        let _ = writeln!(out, "\\ constant K_ih {} {} = {}", c.from, c.to, c.cap);
    }
    out.push_str(match model.sense {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, model, &model.objective);
    out.push('\n');
    out.push_str("Subject To\n");
    for row in &model.rows {
        let _ = write!(out, " {}:", row.name);
        if row.terms.is_empty() {
            match model.variables.first() {
                Some(v) => {
                    let _ = write!(out, " 0 {}", v.name);
                }
                None => out.push_str(" 0"),
            }
        } else {
            write_terms(&mut out, model, &row.terms);
        }
        let _ = writeln!(out, " {} {}", row.relation.symbol(), row.rhs);
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
    }
    let binaries: Vec<&str> =
        model.variables.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

fn write_terms(out: &mut String, model: &LinearModel, terms: &[(usize, f64)]) {
    for (k, &(v, a)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {} {} {}", sign, a.abs(), model.variables[v].name);
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Rows,
    Bounds,
    Binaries,
    Done,
}

struct Token<'a> {
    text: &'a str,
    line: usize,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::LpParse { line, message: message.into() }
}

fn number(tok: &Token) -> Result<f64> {
    tok.text.parse::<f64>().map_err(|_| err(tok.line, format!("expected a number, found {:?}", tok.text)))
}

/// Reads text produced by [`write_lp`]. Every variable must appear in the
/// Bounds section, which fixes declaration order.
pub fn parse_lp(text: &str) -> Result<LinearModel> {
    let mut name = String::new();
    let mut big_m = 0.0;
    let mut route_caps = Vec::new();
    let mut sense = None;
    let mut section = Section::Preamble;
    let mut objective_tokens: Vec<Token> = Vec::new();
    let mut row_tokens: Vec<Token> = Vec::new();
    let mut bound_lines: Vec<(usize, &str)> = Vec::new();
    let mut binary_names: Vec<Token> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('\\') {
            parse_comment(comment.trim(), line_no, &mut name, &mut big_m, &mut route_caps)?;
            continue;
        }
        let keyword = line.to_ascii_lowercase();
        let next = match keyword.as_str() {
            "maximize" | "maximise" | "max" => {
                sense = Some(Sense::Maximize);
                Some(Section::Objective)
            }
            "minimize" | "minimise" | "min" => {
                sense = Some(Sense::Minimize);
                Some(Section::Objective)
            }
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Rows),
            "bounds" => Some(Section::Bounds),
            "binaries" | "binary" | "bin" => Some(Section::Binaries),
            "end" => Some(Section::Done),
            _ => None,
        };
        if let Some(next) = next {
            section = next;
            continue;
        }
        let tokens = line.split_whitespace().map(|text| Token { text, line: line_no });
        match section {
            Section::Objective => objective_tokens.extend(tokens),
            Section::Rows => row_tokens.extend(tokens),
            Section::Bounds => bound_lines.push((line_no, line)),
            Section::Binaries => binary_names.extend(tokens),
            Section::Preamble => return Err(err(line_no, "content before the objective section")),
            Section::Done => return Err(err(line_no, "content after End")),
        }
    }
    let sense = sense.ok_or_else(|| err(0, "missing Maximize or Minimize section"))?;
    if section != Section::Done {
        return Err(err(text.lines().count(), "missing End"));
    }

    let mut variables = Vec::with_capacity(bound_lines.len());
    let mut index: HashMap<&str, usize> = HashMap::new();
    for &(line_no, line) in &bound_lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 || parts[1] != "<=" || parts[3] != "<=" {
            return Err(err(line_no, "expected `lower <= name <= upper`"));
        }
        let lower = number(&Token { text: parts[0], line: line_no })?;
        let upper = number(&Token { text: parts[4], line: line_no })?;
        if index.insert(parts[2], variables.len()).is_some() {
            return Err(err(line_no, format!("variable {} bounded twice", parts[2])));
        }
        variables.push(Variable { name: parts[2].to_string(), kind: VarKind::Continuous, lower, upper });
    }
    for tok in &binary_names {
        let &v = index.get(tok.text).ok_or_else(|| err(tok.line, format!("binary {} has no bounds line", tok.text)))?;
        variables[v].kind = VarKind::Binary;
    }

    let objective = {
        let mut toks = objective_tokens.iter().peekable();
        match toks.next() {
            Some(t) if t.text.ends_with(':') => {}
            Some(t) => return Err(err(t.line, "objective must be named")),
            None => return Err(err(0, "empty objective section")),
        }
        let rest: Vec<&Token> = toks.collect();
        parse_terms(&rest, &index)?
    };

    let mut rows = Vec::new();
    let mut k = 0;
    while k < row_tokens.len() {
        let head = &row_tokens[k];
        let row_name = head
            .text
            .strip_suffix(':')
            .ok_or_else(|| err(head.line, format!("expected a row name, found {:?}", head.text)))?;
        k += 1;
        let start = k;
        while k < row_tokens.len() && !matches!(row_tokens[k].text, "<=" | ">=" | "=" | "=<" | "=>") {
            k += 1;
        }
        if k + 1 >= row_tokens.len() {
            return Err(err(head.line, format!("row {row_name} has no relation and right-hand side")));
        }
        let relation = match row_tokens[k].text {
            "<=" | "=<" => Relation::Le,
            ">=" | "=>" => Relation::Ge,
            _ => Relation::Eq,
        };
        let lhs: Vec<&Token> = row_tokens[start..k].iter().collect();
        let terms = parse_terms(&lhs, &index)?;
        let rhs = number(&row_tokens[k + 1])?;
        k += 2;
        rows.push(Row { name: row_name.to_string(), terms, relation, rhs });
    }

    Ok(LinearModel { name, sense, objective, variables, rows, big_m, route_caps })
}

fn parse_comment(
    comment: &str,
    line: usize,
    name: &mut String,
    big_m: &mut f64,
    caps: &mut Vec<RouteCap>,
) -> Result<()> {
    if let Some(rest) = comment.strip_prefix("model:") {
        *name = rest.trim().to_string();
    } else if let Some(rest) = comment.strip_prefix("constant K_ih") {
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 4 || parts[2] != "=" {
            return Err(err(line, "expected `constant K_ih from to = value`"));
        }
        let node = |s: &str| s.parse().map_err(|_| err(line, format!("bad node id {s:?}")));
        caps.push(RouteCap {
            from: node(parts[0])?,
            to: node(parts[1])?,
            cap: number(&Token { text: parts[3], line })?,
        });
    } else if let Some(rest) = comment.strip_prefix("constant K =") {
        *big_m = number(&Token { text: rest.trim(), line })?;
    }
    Ok(())
}

/// Terms written as `sign magnitude name`; a bare `0` or a zero coefficient adds nothing.
fn parse_terms(tokens: &[&Token], index: &HashMap<&str, usize>) -> Result<Vec<(usize, f64)>> {
    let mut terms = Vec::new();
    let mut k = 0;
    while k < tokens.len() {
        let mut sign = 1.0;
        if matches!(tokens[k].text, "+" | "-") {
            if tokens[k].text == "-" {
                sign = -1.0;
            }
            k += 1;
        }
        let Some(tok) = tokens.get(k) else {
            return Err(err(tokens[k - 1].line, "dangling sign"));
        };
        let (coef, var_tok) = match tok.text.parse::<f64>() {
            Ok(c) => match tokens.get(k + 1) {
                Some(v) if v.text.parse::<f64>().is_err() && !matches!(v.text, "+" | "-") => {
                    k += 2;
                    (c, Some(*v))
                }
                _ => {
                    k += 1;
                    (c, None)
                }
            },
            Err(_) => {
                k += 1;
                (1.0, Some(*tok))
            }
        };
        let Some(var_tok) = var_tok else {
            if coef == 0.0 {
                continue;
            }
            return Err(err(tok.line, "constant terms are not supported"));
        };
        let &v = index
            .get(var_tok.text)
            .ok_or_else(|| err(var_tok.line, format!("undeclared variable {}", var_tok.text)))?;
        if coef != 0.0 {
            terms.push((v, sign * coef));
        }
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::super::ModelBuilder;
    use super::*;

    fn sample() -> LinearModel {
        let mut b = ModelBuilder::new("sample", Sense::Maximize);
        let x = b.binary("x_0".into());
        let y = b.binary("y_0_1".into());
        let f = b.nonneg("f_1_0".into());
        let l = b.var("lam".into(), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        b.row("memory_0".into(), vec![(x, 0.1), (y, 1e-7)], Relation::Le, 3.0);
        b.row("energy_1".into(), vec![(f, -2.5e-8), (l, 1.0)], Relation::Eq, -32400.5);
        b.row("cover_0_0".into(), vec![], Relation::Eq, 1.0);
        let many: Vec<(usize, f64)> = (0..20).map(|k| ([x, y, f, l][k % 4], 1.0 + k as f64)).collect();
        b.row("airtime_3".into(), many, Relation::Ge, 0.0);
        b.objective(vec![(l, 1.0), (x, 1.0 / 3.0)]);
        b.set_big_m(1234.5, vec![RouteCap { from: 1, to: 0, cap: 1234.5 }]);
        b.finish()
    }

    #[test]
    fn round_trip_is_exact_and_stable() {
        let m = sample();
        let text = write_lp(&m);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_lp(&back), text);
    }

    #[test]
    fn text_layout() {
        let text = write_lp(&sample());
        assert!(text.starts_with("\\ model: sample\n\\ constant K = 1234.5\n\\ constant K_ih 1 0 = 1234.5\nMaximize\n"));
        assert!(text.contains(" obj: + 1 lam + 0.3333333333333333 x_0\n"));
        assert!(text.contains(" energy_1: - 0.000000025 f_1_0 + 1 lam = -32400.5\n"));
        assert!(text.contains(" cover_0_0: 0 x_0 = 1\n"));
        assert!(text.contains(" -inf <= lam <= inf\n"));
        assert!(text.contains("Binaries\n x_0 y_0_1\nEnd\n"));
    }

    #[test]
    fn reader_reports_line_numbers() {
        let bad = "Maximize\n obj: + 1 x\nSubject To\n c: + 1 q <= 1\nBounds\n 0 <= x <= 1\nEnd\n";
        match parse_lp(bad) {
            Err(Error::LpParse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("undeclared"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_lp("Maximize\n obj:\n"), Err(Error::LpParse { .. })));
        assert!(matches!(parse_lp("hello\n"), Err(Error::LpParse { line: 1, .. })));
    }

    #[test]
    fn reader_accepts_implicit_coefficients() {
        let text = "Minimize\n obj: x - y\nSubject To\n c: 2 x + y >= 1\nBounds\n 0 <= x <= 1\n 0 <= y <= 3\nEnd\n";
        let m = parse_lp(text).unwrap();
        assert_eq!(m.sense, Sense::Minimize);
        assert_eq!(m.objective, vec![(0, 1.0), (1, -1.0)]);
        assert_eq!(m.rows[0].terms, vec![(0, 2.0), (1, 1.0)]);
        assert_eq!(m.variables[1].upper, 3.0);
    }
}
