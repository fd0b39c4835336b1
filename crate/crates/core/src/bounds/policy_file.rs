//! Text serialization of a lower bound.
//!
//! ```text
//! hsvi-policy 1
//! problem 3f2a...
//! discount 0.95
//! vectors 2
//! vector listen full -20.0000000000 -20.0000000000
//! vector open-left mask 0 3 : 1.25000000000 -4.00000000000
//! ```
//!
//! Values carry 12 significant digits. Only the vectors are stored; the
//! beliefs they were created at are not.

use std::fmt::Write as _;

use thiserror::Error;

use super::{AlphaVector, LowerBound};
use crate::model::PomdpModel;

const MAGIC: &str = "hsvi-policy 1";

#[derive(Debug, Error, PartialEq)]
pub enum PolicyFileError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("policy was computed for problem {found}, not {expected}")]
    ProblemMismatch { expected: String, found: String },
    #[error("policy has no full-mask vector")]
    NoFullVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHeader {
    pub problem_hash: String,
    pub discount: f64,
    pub num_vectors: usize,
}

pub fn write_policy(model: &PomdpModel, lb: &LowerBound) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "problem {}", model.content_hash());
    let _ = writeln!(out, "discount {}", model.discount());
    let _ = writeln!(out, "vectors {}", lb.len());
    for alpha in lb.vectors() {
        let _ = write!(out, "vector {}", model.action_names()[alpha.action()]);
        match alpha.mask() {
            None => out.push_str(" full"),
            Some(mask) => {
                out.push_str(" mask");
                for s in mask {
                    let _ = write!(out, " {s}");
                }
                out.push_str(" :");
            }
        }
        for v in alpha.values() {
            let _ = write!(out, " {v:.11e}");
        }
        out.push('\n');
    }
    out
}

fn format_err(line: usize, message: impl Into<String>) -> PolicyFileError {
    PolicyFileError::Format {
        line,
        message: message.into(),
    }
}

fn header_value<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, &'a str), PolicyFileError> {
    let (n, line) = lines
        .next()
        .ok_or_else(|| format_err(0, format!("missing `{key}` line")))?;
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .map(|v| (n, v.trim()))
        .ok_or_else(|| format_err(n, format!("expected `{key}`")))
}

/// Parses a policy file and checks that it belongs to `model`.
pub fn read_policy(
    model: &PomdpModel,
    text: &str,
) -> Result<(PolicyHeader, LowerBound), PolicyFileError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((n, _)) => return Err(format_err(n, format!("expected `{MAGIC}`"))),
        None => return Err(format_err(0, "empty policy file")),
    }
    let (_, hash) = header_value(&mut lines, "problem")?;
    let expected = model.content_hash();
    if hash != expected {
        return Err(PolicyFileError::ProblemMismatch {
            expected,
            found: hash.to_string(),
        });
    }
    let (n, discount) = header_value(&mut lines, "discount")?;
    let discount: f64 = discount
        .parse()
        .map_err(|_| format_err(n, "bad discount"))?;
    let (n, count) = header_value(&mut lines, "vectors")?;
    let count: usize = count
        .parse()
        .map_err(|_| format_err(n, "bad vector count"))?;

    let ns = model.num_states();
    let mut vectors = Vec::with_capacity(count);
    for (n, line) in lines {
        let mut tok = line.split_whitespace();
        if tok.next() != Some("vector") {
            return Err(format_err(n, "expected `vector`"));
        }
        let label = tok.next().ok_or_else(|| format_err(n, "missing action"))?;
        let action = model
            .action_index(label)
            .or_else(|| {
                label
                    .parse()
                    .ok()
                    .filter(|&a: &usize| a < model.num_actions())
            })
            .ok_or_else(|| format_err(n, format!("unknown action `{label}`")))?;
        let parse_f = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| format_err(n, format!("bad value `{t}`")))
        };
        let alpha = match tok.next() {
            Some("full") => {
                let values = tok.map(parse_f).collect::<Result<Vec<_>, _>>()?;
                if values.len() != ns {
                    return Err(format_err(
                        n,
                        format!("expected {ns} values, found {}", values.len()),
                    ));
                }
                AlphaVector::full(action, values)
            }
            Some("mask") => {
                let mut mask = Vec::new();
                for t in tok.by_ref() {
                    if t == ":" {
                        break;
                    }
                    let s: usize = t
                        .parse()
                        .map_err(|_| format_err(n, format!("bad state index `{t}`")))?;
                    if s >= ns || mask.last().is_some_and(|&p| p >= s) {
                        return Err(format_err(n, "mask must be increasing state indices"));
                    }
                    mask.push(s);
                }
                let values = tok.map(parse_f).collect::<Result<Vec<_>, _>>()?;
                if mask.is_empty() || values.len() != mask.len() {
                    return Err(format_err(
                        n,
                        "mask and values must be nonempty and the same length",
                    ));
                }
                AlphaVector::masked(action, mask, values)
            }
            _ => return Err(format_err(n, "expected `full` or `mask`")),
        };
        vectors.push(alpha);
    }
    if vectors.len() != count {
        return Err(format_err(
            0,
            format!("header promises {count} vectors, found {}", vectors.len()),
        ));
    }
    if !vectors.iter().any(AlphaVector::is_full) {
        return Err(PolicyFileError::NoFullVector);
    }
    let header = PolicyHeader {
        problem_hash: expected,
        discount,
        num_vectors: count,
    };
    Ok((header, LowerBound::new(vectors)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::init_lower_blind;
    use crate::ingest::{generate_random, tiger};
    use crate::model::Belief;

    #[test]
    fn round_trip_preserves_values_to_twelve_digits() {
        let m = tiger();
        let mut lb = init_lower_blind(&m, 1e-6, 1000);
        lb.update(&m, &Belief::from_dense(&[0.3, 0.7]).unwrap());
        let text = write_policy(&m, &lb);
        let (header, back) = read_policy(&m, &text).unwrap();
        assert_eq!(header.num_vectors, lb.len());
        assert_eq!(header.discount, 0.95);
        for (a, b) in lb.vectors().iter().zip(back.vectors()) {
            assert_eq!(a.action(), b.action());
            assert_eq!(a.mask(), b.mask());
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-11 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn refuses_a_different_problem() {
        let m = tiger();
        let text = write_policy(&m, &init_lower_blind(&m, 1e-3, 100));
        let other = generate_random(2, 3, 2, 0.95, 1).unwrap();
        assert!(matches!(
            read_policy(&other, &text),
            Err(PolicyFileError::ProblemMismatch { .. })
        ));
    }

    #[test]
    fn reports_bad_lines() {
        let m = tiger();
        let text = write_policy(&m, &init_lower_blind(&m, 1e-3, 100)).replace("full", "fool");
        assert!(matches!(
            read_policy(&m, &text),
            Err(PolicyFileError::Format { line: 5, .. })
        ));
    }
}
