use std::collections::HashSet;

use super::expr::parse_expr;
use super::{ComplexParam, EstModel, Operand, PriorKind, PriorSpec, Rule, RuleOp};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Parameters,
    Rules,
    Complex,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Est {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace-separated fields with their 1-based columns.
fn fields(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_flag(line: usize, (col, tok): (usize, &str)) -> Result<bool> {
    match tok {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(err(line, col, format!("integer indicator must be 0 or 1, found `{tok}`"))),
    }
}

fn parse_number(line: usize, (col, tok): (usize, &str)) -> Result<f64> {
    tok.parse()
        .map_err(|_| err(line, col, format!("expected a number, found `{tok}`")))
}

/// Parses an est file. Either a complete model or a positioned error.
pub fn parse_est(text: &str) -> Result<EstModel> {
    let mut section = Section::None;
    let mut seen_parameters = false;
    let mut priors: Vec<PriorSpec> = Vec::new();
    let mut complex: Vec<ComplexParam> = Vec::new();
    let mut rules: Vec<(usize, usize, Rule)> = Vec::new();
    let mut declared: HashSet<String> = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with("//") || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('[') {
            section = match trimmed.to_ascii_uppercase().as_str() {
                "[PARAMETERS]" => {
                    seen_parameters = true;
                    Section::Parameters
                }
                "[RULES]" => Section::Rules,
                "[COMPLEX PARAMETERS]" => Section::Complex,
                other => return Err(err(lineno, 1, format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::None => {
                return Err(err(lineno, 1, "content before the [PARAMETERS] section"));
            }
            Section::Parameters => {
                let p = parse_prior(lineno, raw)?;
                if !declared.insert(p.name.clone()) {
                    return Err(err(lineno, 1, format!("duplicate name `{}`", p.name)));
                }
                priors.push(p);
            }
            Section::Rules => {
                let col = raw.find(|c: char| !c.is_whitespace()).unwrap_or(0) + 1;
                rules.push((lineno, col, parse_rule(lineno, raw)?));
            }
            Section::Complex => {
                let c = parse_complex(lineno, raw)?;
                for id in c.expr.identifiers() {
                    if !declared.contains(id) {
                        return Err(err(
                            lineno,
                            1,
                            format!("`{}` references undeclared name `{id}`", c.name),
                        ));
                    }
                }
                if !declared.insert(c.name.clone()) {
                    return Err(err(lineno, 1, format!("duplicate name `{}`", c.name)));
                }
                complex.push(c);
            }
        }
    }
    if !seen_parameters {
        return Err(err(1, 1, "missing mandatory [PARAMETERS] section"));
    }
    let mut checked = Vec::with_capacity(rules.len());
    for (line, col, rule) in rules {
        for operand in [&rule.lhs, &rule.rhs] {
            if let Operand::Name(n) = operand {
                if !declared.contains(n) {
                    return Err(err(line, col, format!("rule references undeclared name `{n}`")));
                }
            }
        }
        checked.push(rule);
    }
    Ok(EstModel::new(priors, checked, complex))
}

fn parse_prior(line: usize, raw: &str) -> Result<PriorSpec> {
    let f = fields(raw);
    if f.len() < 4 {
        return Err(err(line, 1, "expected `<int> <name> <prior> <args...> [output|hide]`"));
    }
    let integer = parse_flag(line, f[0])?;
    let (name_col, name) = f[1];
    if !is_identifier(name) {
        return Err(err(line, name_col, format!("invalid parameter name `{name}`")));
    }
    let (mut args_end, output) = match f.last().map(|t| t.1) {
        Some("output") => (f.len() - 1, true),
        Some("hide") => (f.len() - 1, false),
        _ => (f.len(), true),
    };
    args_end = args_end.max(3);
    let (kind_col, kind_name) = f[2];
    let args = f[3..args_end]
        .iter()
        .map(|&t| parse_number(line, t))
        .collect::<Result<Vec<_>>>()?;
    let want = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(err(
                line,
                kind_col,
                format!("`{kind_name}` prior takes {n} argument(s), found {}", args.len()),
            ))
        }
    };
    let bounded = |min: f64, max: f64| -> Result<()> {
        if min < max {
            Ok(())
        } else {
            Err(err(line, kind_col, format!("prior bounds must satisfy min < max ({min} >= {max})")))
        }
    };
    let kind = match kind_name {
        "unif" => {
            want(2)?;
            bounded(args[0], args[1])?;
            PriorKind::Uniform { min: args[0], max: args[1] }
        }
        "logunif" => {
            want(2)?;
            bounded(args[0], args[1])?;
            if args[0] <= 0.0 {
                return Err(err(line, kind_col, "logunif bounds must be positive"));
            }
            PriorKind::LogUniform { min: args[0], max: args[1] }
        }
        "norm" => {
            want(4)?;
            bounded(args[0], args[1])?;
            if args[3] <= 0.0 {
                return Err(err(line, kind_col, "normal prior needs sd > 0"));
            }
            PriorKind::Normal { min: args[0], max: args[1], mean: args[2], sd: args[3] }
        }
        "fixed" => {
            want(1)?;
            PriorKind::Fixed(args[0])
        }
        other => return Err(err(line, kind_col, format!("unknown prior kind `{other}`"))),
    };
    Ok(PriorSpec {
        name: name.to_string(),
        integer,
        kind,
        output,
    })
}

fn parse_operand(line: usize, col: usize, s: &str) -> Result<Operand> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        Ok(Operand::Const(v))
    } else if is_identifier(s) {
        Ok(Operand::Name(s.to_string()))
    } else {
        Err(err(line, col, format!("rule operand `{s}` is neither a name nor a number")))
    }
}

fn parse_rule(line: usize, raw: &str) -> Result<Rule> {
    const OPS: [(&str, RuleOp); 4] = [
        ("<=", RuleOp::Le),
        (">=", RuleOp::Ge),
        ("<", RuleOp::Lt),
        (">", RuleOp::Gt),
    ];
    for (sym, op) in OPS {
        if let Some(pos) = raw.find(sym) {
            let lhs = parse_operand(line, 1, &raw[..pos])?;
            let rhs = parse_operand(line, pos + sym.len() + 1, &raw[pos + sym.len()..])?;
            return Ok(Rule { lhs, op, rhs });
        }
    }
    Err(err(line, 1, "rule needs one of <, >, <=, >="))
}

fn parse_complex(line: usize, raw: &str) -> Result<ComplexParam> {
    let eq = raw
        .find('=')
        .ok_or_else(|| err(line, 1, "complex parameter needs `<int> <name> = <expression>`"))?;
    let head = fields(&raw[..eq]);
    if head.len() != 2 {
        return Err(err(line, 1, "complex parameter needs `<int> <name> = <expression>`"));
    }
    let integer = parse_flag(line, head[0])?;
    let (name_col, name) = head[1];
    if !is_identifier(name) {
        return Err(err(line, name_col, format!("invalid parameter name `{name}`")));
    }
    let mut body = &raw[eq + 1..];
    let mut output = true;
    let trimmed = body.trim_end();
    for (flag, out) in [("output", true), ("hide", false)] {
        if let Some(rest) = trimmed.strip_suffix(flag) {
            if rest.ends_with(char::is_whitespace) {
                body = rest;
                output = out;
                break;
            }
        }
    }
    let expr = parse_expr(body, line, eq + 2)?;
    Ok(ComplexParam {
        name: name.to_string(),
        integer,
        expr,
        output,
    })
}
