//! Reader and writer for Cassandra's `.pomdp` text format.
//!
//! The grammar is documented in `docs/pomdp-format.md`. Statements are parsed
//! from a flat token stream; `:` is always a token of its own, and a matrix
//! body is simply the next `k` numbers, so line breaks carry no meaning.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Belief, CsrMatrix, ModelError, ModelParts, PomdpModel, SparseVector};

/// Rows whose sum is off by at most this much are renormalized on load.
/// Published problem files routinely print probabilities with six digits.
pub const LOAD_NORMALIZE_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{kind} row for action '{action}', state '{state}' sums to {sum} (expected 1)")]
    Stochasticity {
        kind: &'static str,
        action: String,
        state: String,
        sum: f64,
    },
    #[error("missing block: {0}")]
    MissingBlock(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Fill unspecified transition rows with identity and observation rows
    /// with uniform instead of failing.
    pub permissive: bool,
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut start: Option<usize> = None;
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let flush = |start: &mut Option<usize>, end: usize, out: &mut Vec<Token>| {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: line[s..end].to_string(),
                    line: ln + 1,
                    column: line[..s].chars().count() + 1,
                });
            }
        };
        for &(i, c) in &chars {
            if c.is_whitespace() {
                flush(&mut start, i, &mut out);
            } else if c == ':' {
                flush(&mut start, i, &mut out);
                out.push(Token {
                    text: ":".into(),
                    line: ln + 1,
                    column: line[..i].chars().count() + 1,
                });
            } else if start.is_none() {
                start = Some(i);
            }
        }
        flush(&mut start, line.len(), &mut out);
    }
    out
}

const KEYWORDS: &[&str] = &[
    "discount",
    "values",
    "states",
    "actions",
    "observations",
    "start",
    "T",
    "O",
    "R",
];

#[derive(Debug, Clone, Copy)]
enum Sel {
    All,
    One(usize),
}

impl Sel {
    fn matches(self, i: usize) -> bool {
        match self {
            Sel::All => true,
            Sel::One(j) => i == j,
        }
    }

    fn expand(self, n: usize) -> Vec<usize> {
        match self {
            Sel::All => (0..n).collect(),
            Sel::One(j) => vec![j],
        }
    }
}

#[derive(Debug, Clone)]
struct RewardRule {
    action: Sel,
    start: Sel,
    end: Sel,
    obs: Sel,
    value: f64,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Token> {
        self.tokens.get(self.pos + k)
    }

    fn err_here(&self, message: impl Into<String>) -> ParseError {
        let (line, column) = match self.peek().or_else(|| self.tokens.last()) {
            Some(t) => (t.line, t.column),
            None => (1, 1),
        };
        ParseError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        let t = self
            .peek()
            .cloned()
            .ok_or_else(|| self.err_here("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, text: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.text == text => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err_here(format!("expected '{text}', found '{}'", t.text))),
            None => Err(self.err_here(format!("expected '{text}', found end of input"))),
        }
    }

    fn at_colon(&self) -> bool {
        self.peek().is_some_and(|t| t.text == ":")
    }

    /// A statement begins at the current token.
    fn at_statement(&self) -> bool {
        match self.peek() {
            None => true,
            Some(t) if KEYWORDS.contains(&t.text.as_str()) => match self.peek_at(1) {
                Some(n) => {
                    n.text == ":"
                        || (t.text == "start" && (n.text == "include" || n.text == "exclude"))
                }
                None => false,
            },
            _ => false,
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let t = self.next()?;
        t.text.parse::<f64>().map_err(|_| ParseError::Syntax {
            line: t.line,
            column: t.column,
            message: format!("expected a number, found '{}'", t.text),
        })
    }

    fn numbers(&mut self, k: usize) -> Result<Vec<f64>, ParseError> {
        (0..k).map(|_| self.number()).collect()
    }

    /// Rest of the current statement as raw tokens.
    fn until_statement(&mut self) -> Vec<Token> {
        let mut out = Vec::new();
        while !self.at_statement() {
            out.push(self.tokens[self.pos].clone());
            self.pos += 1;
        }
        out
    }
}

fn resolve(tok: &Token, names: &[String], what: &str) -> Result<Sel, ParseError> {
    if tok.text == "*" {
        return Ok(Sel::All);
    }
    if let Some(i) = names.iter().position(|n| *n == tok.text) {
        return Ok(Sel::One(i));
    }
    match tok.text.parse::<usize>() {
        Ok(i) if i < names.len() => Ok(Sel::One(i)),
        _ => Err(ParseError::Syntax {
            line: tok.line,
            column: tok.column,
            message: format!("unknown {what} '{}'", tok.text),
        }),
    }
}

/// Either a count or an explicit list of names.
fn parse_name_list(p: &mut Parser, prefix: &str) -> Result<Vec<String>, ParseError> {
    let toks = p.until_statement();
    match toks.as_slice() {
        [] => Err(p.err_here(format!("empty {prefix} declaration"))),
        [t] if t.text.parse::<usize>().is_ok() => {
            let n: usize = t.text.parse().unwrap();
            if n == 0 {
                return Err(ParseError::Syntax {
                    line: t.line,
                    column: t.column,
                    message: format!("{prefix} count must be positive"),
                });
            }
            Ok((0..n).map(|i| i.to_string()).collect())
        }
        many => Ok(many.iter().map(|t| t.text.clone()).collect()),
    }
}

type RowTable = Vec<Vec<Option<BTreeMap<usize, f64>>>>;

fn set_entry(table: &mut RowTable, a: usize, row: usize, col: usize, v: f64) {
    let r = table[a][row].get_or_insert_with(BTreeMap::new);
    if v == 0.0 {
        r.remove(&col);
    } else {
        r.insert(col, v);
    }
}

fn set_row(table: &mut RowTable, a: usize, row: usize, values: &[f64]) {
    let r: BTreeMap<usize, f64> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i, *v))
        .collect();
    table[a][row] = Some(r);
}

/// Parses a Cassandra-format model in strict mode.
pub fn parse_pomdp(text: &str) -> Result<PomdpModel, ParseError> {
    parse_pomdp_with(text, ParseOptions::default())
}

pub fn parse_pomdp_with(text: &str, opts: ParseOptions) -> Result<PomdpModel, ParseError> {
    let mut p = Parser {
        tokens: tokenize(text),
        pos: 0,
    };

    let mut discount: Option<f64> = None;
    let mut cost = false;
    let mut states: Option<Vec<String>> = None;
    let mut actions: Option<Vec<String>> = None;
    let mut observations: Option<Vec<String>> = None;
    let mut start_tokens: Option<(String, Vec<Token>)> = None;

    // Preamble.
    while let Some(t) = p.peek() {
        match t.text.as_str() {
            "discount" => {
                p.pos += 1;
                p.expect(":")?;
                discount = Some(p.number()?);
            }
            "values" => {
                p.pos += 1;
                p.expect(":")?;
                let v = p.next()?;
                cost = match v.text.as_str() {
                    "reward" => false,
                    "cost" => true,
                    other => {
                        return Err(ParseError::Syntax {
                            line: v.line,
                            column: v.column,
                            message: format!("values must be 'reward' or 'cost', found '{other}'"),
                        })
                    }
                };
            }
            "states" => {
                p.pos += 1;
                p.expect(":")?;
                states = Some(parse_name_list(&mut p, "state")?);
            }
            "actions" => {
                p.pos += 1;
                p.expect(":")?;
                actions = Some(parse_name_list(&mut p, "action")?);
            }
            "observations" => {
                p.pos += 1;
                p.expect(":")?;
                observations = Some(parse_name_list(&mut p, "observation")?);
            }
            "start" => {
                p.pos += 1;
                let mode = match p.peek().map(|t| t.text.as_str()) {
                    Some("include") | Some("exclude") => p.next()?.text,
                    _ => String::new(),
                };
                p.expect(":")?;
                start_tokens = Some((mode, p.until_statement()));
            }
            "T" | "O" | "R" => break,
            other => return Err(p.err_here(format!("unexpected token '{other}' in preamble"))),
        }
    }

    let discount = discount.ok_or_else(|| ParseError::MissingBlock("discount".into()))?;
    let states = states.ok_or_else(|| ParseError::MissingBlock("states".into()))?;
    let actions = actions.ok_or_else(|| ParseError::MissingBlock("actions".into()))?;
    let observations =
        observations.ok_or_else(|| ParseError::MissingBlock("observations".into()))?;
    let (ns, na, nz) = (states.len(), actions.len(), observations.len());

    let initial_belief = match start_tokens {
        None => Belief::uniform(ns),
        Some((mode, toks)) => parse_start(&mode, &toks, &states)?,
    };

    let mut trans: RowTable = vec![vec![None; ns]; na];
    let mut obs: RowTable = vec![vec![None; ns]; na];
    let mut rules: Vec<RewardRule> = Vec::new();
    let mut saw_t = vec![false; na];
    let mut saw_o = vec![false; na];

    while let Some(t) = p.peek().cloned() {
        match t.text.as_str() {
            "T" => {
                p.pos += 1;
                p.expect(":")?;
                let a = resolve(&p.next()?, &actions, "action")?;
                for ai in a.expand(na) {
                    saw_t[ai] = true;
                }
                if p.at_colon() {
                    p.pos += 1;
                    let s = resolve(&p.next()?, &states, "state")?;
                    if p.at_colon() {
                        p.pos += 1;
                        let sp = resolve(&p.next()?, &states, "state")?;
                        let v = p.number()?;
                        for ai in a.expand(na) {
                            for si in s.expand(ns) {
                                for spi in sp.expand(ns) {
                                    set_entry(&mut trans, ai, si, spi, v);
                                }
                            }
                        }
                    } else {
                        let body = parse_row(&mut p, ns, true)?;
                        for ai in a.expand(na) {
                            for si in s.expand(ns) {
                                let r = match &body {
                                    RowBody::Values(v) => v.clone(),
                                    RowBody::Uniform => vec![1.0 / ns as f64; ns],
                                    RowBody::Identity => one_hot(ns, si),
                                };
                                set_row(&mut trans, ai, si, &r);
                            }
                        }
                    }
                } else {
                    let kw = p.peek().map(|t| t.text.clone()).unwrap_or_default();
                    match kw.as_str() {
                        "identity" => {
                            p.pos += 1;
                            for ai in a.expand(na) {
                                for si in 0..ns {
                                    set_row(&mut trans, ai, si, &one_hot(ns, si));
                                }
                            }
                        }
                        "uniform" => {
                            p.pos += 1;
                            let r = vec![1.0 / ns as f64; ns];
                            for ai in a.expand(na) {
                                for si in 0..ns {
                                    set_row(&mut trans, ai, si, &r);
                                }
                            }
                        }
                        _ => {
                            let m = p.numbers(ns * ns)?;
                            for ai in a.expand(na) {
                                for si in 0..ns {
                                    set_row(&mut trans, ai, si, &m[si * ns..(si + 1) * ns]);
                                }
                            }
                        }
                    }
                }
            }
            "O" => {
                p.pos += 1;
                p.expect(":")?;
                let a = resolve(&p.next()?, &actions, "action")?;
                for ai in a.expand(na) {
                    saw_o[ai] = true;
                }
                if p.at_colon() {
                    p.pos += 1;
                    let sp = resolve(&p.next()?, &states, "state")?;
                    if p.at_colon() {
                        p.pos += 1;
                        let z = resolve(&p.next()?, &observations, "observation")?;
                        let v = p.number()?;
                        for ai in a.expand(na) {
                            for spi in sp.expand(ns) {
                                for zi in z.expand(nz) {
                                    set_entry(&mut obs, ai, spi, zi, v);
                                }
                            }
                        }
                    } else {
                        let row = match parse_row(&mut p, nz, false)? {
                            RowBody::Values(v) => v,
                            _ => vec![1.0 / nz as f64; nz],
                        };
                        for ai in a.expand(na) {
                            for spi in sp.expand(ns) {
                                set_row(&mut obs, ai, spi, &row);
                            }
                        }
                    }
                } else {
                    let kw = p.peek().map(|t| t.text.clone()).unwrap_or_default();
                    if kw == "uniform" {
                        p.pos += 1;
                        let r = vec![1.0 / nz as f64; nz];
                        for ai in a.expand(na) {
                            for spi in 0..ns {
                                set_row(&mut obs, ai, spi, &r);
                            }
                        }
                    } else {
                        let m = p.numbers(ns * nz)?;
                        for ai in a.expand(na) {
                            for spi in 0..ns {
                                set_row(&mut obs, ai, spi, &m[spi * nz..(spi + 1) * nz]);
                            }
                        }
                    }
                }
            }
            "R" => {
                p.pos += 1;
                p.expect(":")?;
                let a = resolve(&p.next()?, &actions, "action")?;
                let s = if p.at_colon() {
                    p.pos += 1;
                    resolve(&p.next()?, &states, "state")?
                } else {
                    return Err(p.err_here("reward statement needs a start state"));
                };
                if p.at_colon() {
                    p.pos += 1;
                    let sp = resolve(&p.next()?, &states, "state")?;
                    if p.at_colon() {
                        p.pos += 1;
                        let z = resolve(&p.next()?, &observations, "observation")?;
                        let v = p.number()?;
                        rules.push(RewardRule {
                            action: a,
                            start: s,
                            end: sp,
                            obs: z,
                            value: v,
                        });
                    } else {
                        let row = p.numbers(nz)?;
                        for (zi, v) in row.into_iter().enumerate() {
                            rules.push(RewardRule {
                                action: a,
                                start: s,
                                end: sp,
                                obs: Sel::One(zi),
                                value: v,
                            });
                        }
                    }
                } else {
                    let m = p.numbers(ns * nz)?;
                    for spi in 0..ns {
                        for zi in 0..nz {
                            rules.push(RewardRule {
                                action: a,
                                start: s,
                                end: Sel::One(spi),
                                obs: Sel::One(zi),
                                value: m[spi * nz + zi],
                            });
                        }
                    }
                }
            }
            other => return Err(p.err_here(format!("unexpected token '{other}'"))),
        }
    }

    if !opts.permissive {
        if let Some(a) = saw_t.iter().position(|s| !s) {
            return Err(ParseError::MissingBlock(format!(
                "T for action '{}'",
                actions[a]
            )));
        }
        if let Some(a) = saw_o.iter().position(|s| !s) {
            return Err(ParseError::MissingBlock(format!(
                "O for action '{}'",
                actions[a]
            )));
        }
    }

    let transitions = finish_table(trans, ns, "transition", &actions, &states, opts, |s| {
        one_hot(ns, s)
    })?;
    let observations_m = finish_table(obs, nz, "observation", &actions, &states, opts, |_| {
        vec![1.0 / nz as f64; nz]
    })?;

    let mut rewards = vec![vec![0.0; ns]; na];
    for (a, row) in rewards.iter_mut().enumerate() {
        let for_action: Vec<&RewardRule> = rules.iter().filter(|r| r.action.matches(a)).collect();
        for (s, out) in row.iter_mut().enumerate() {
            let relevant: Vec<&RewardRule> = for_action
                .iter()
                .copied()
                .filter(|r| r.start.matches(s))
                .collect();
            let Some(last) = relevant.last() else {
                continue;
            };
            if relevant
                .iter()
                .all(|r| matches!(r.end, Sel::All) && matches!(r.obs, Sel::All))
            {
                *out = last.value;
                continue;
            }
            let mut acc = 0.0;
            for (sp, tp) in transitions[a].row_iter(s) {
                for (z, op) in observations_m[a].row_iter(sp) {
                    let v = relevant
                        .iter()
                        .rev()
                        .find(|r| r.end.matches(sp) && r.obs.matches(z))
                        .map_or(0.0, |r| r.value);
                    acc += tp * op * v;
                }
            }
            *out = acc;
        }
        if cost {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }

    Ok(PomdpModel::new(ModelParts {
        num_states: ns,
        num_actions: na,
        num_observations: nz,
        transitions,
        observations: observations_m,
        rewards,
        discount,
        initial_belief,
        state_names: Some(states),
        action_names: Some(actions),
        observation_names: Some(observations),
    })?)
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

enum RowBody {
    Values(Vec<f64>),
    Uniform,
    Identity,
}

fn parse_row(p: &mut Parser, n: usize, allow_identity: bool) -> Result<RowBody, ParseError> {
    match p.peek().map(|t| t.text.as_str()) {
        Some("uniform") => {
            p.pos += 1;
            Ok(RowBody::Uniform)
        }
        Some("identity") if allow_identity => {
            p.pos += 1;
            Ok(RowBody::Identity)
        }
        _ => Ok(RowBody::Values(p.numbers(n)?)),
    }
}

fn finish_table(
    table: RowTable,
    cols: usize,
    kind: &'static str,
    actions: &[String],
    states: &[String],
    opts: ParseOptions,
    fill: impl Fn(usize) -> Vec<f64>,
) -> Result<Vec<CsrMatrix>, ParseError> {
    let mut out = Vec::with_capacity(table.len());
    for (a, rows) in table.into_iter().enumerate() {
        let mut built = Vec::with_capacity(rows.len());
        for (s, row) in rows.into_iter().enumerate() {
            let pairs: Vec<(usize, f64)> = match row {
                Some(r) => r.into_iter().collect(),
                None if opts.permissive => fill(s)
                    .into_iter()
                    .enumerate()
                    .filter(|(_, v)| *v != 0.0)
                    .collect(),
                None => Vec::new(),
            };
            let sum: f64 = pairs.iter().map(|(_, v)| v).sum();
            if (sum - 1.0).abs() > LOAD_NORMALIZE_TOL || pairs.iter().any(|(_, v)| *v < 0.0) {
                return Err(ParseError::Stochasticity {
                    kind,
                    action: actions[a].clone(),
                    state: states[s].clone(),
                    sum,
                });
            }
            if (sum - 1.0).abs() > 1e-12 {
                built.push(pairs.into_iter().map(|(c, v)| (c, v / sum)).collect());
            } else {
                built.push(pairs);
            }
        }
        out.push(CsrMatrix::from_rows(cols, built));
    }
    Ok(out)
}

fn parse_start(mode: &str, toks: &[Token], states: &[String]) -> Result<Belief, ParseError> {
    let ns = states.len();
    let syntax = |t: &Token, m: &str| ParseError::Syntax {
        line: t.line,
        column: t.column,
        message: m.to_string(),
    };
    let first = toks
        .first()
        .ok_or_else(|| ParseError::MissingBlock("start distribution".into()))?;
    let belief = match mode {
        "include" | "exclude" => {
            let mut chosen = vec![mode == "exclude"; ns];
            for t in toks {
                match resolve(t, states, "state")? {
                    Sel::One(i) => chosen[i] = mode == "include",
                    Sel::All => chosen.iter_mut().for_each(|c| *c = mode == "include"),
                }
            }
            let k = chosen.iter().filter(|c| **c).count();
            if k == 0 {
                return Err(syntax(first, "start set is empty"));
            }
            let probs: Vec<f64> = chosen
                .iter()
                .map(|&c| if c { 1.0 / k as f64 } else { 0.0 })
                .collect();
            Belief::from_dense(&probs)
        }
        _ if toks.len() == 1 && first.text == "uniform" => Ok(Belief::uniform(ns)),
        _ if toks.len() == ns
            && toks.iter().all(|t| t.text.parse::<f64>().is_ok())
            && !(ns == 1 && states[0] == first.text) =>
        {
            let probs: Vec<f64> = toks.iter().map(|t| t.text.parse().unwrap()).collect();
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > LOAD_NORMALIZE_TOL || probs.iter().any(|p| *p < 0.0) {
                return Err(syntax(first, &format!("start distribution sums to {sum}")));
            }
            Belief::new(SparseVector::from_dense(
                &probs.iter().map(|p| p / sum).collect::<Vec<_>>(),
            ))
        }
        _ if toks.len() == 1 => match resolve(first, states, "state")? {
            Sel::One(i) => Ok(Belief::corner(ns, i)),
            Sel::All => Ok(Belief::uniform(ns)),
        },
        _ => return Err(syntax(first, "malformed start distribution")),
    };
    Ok(belief?)
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Serializes a model with explicit per-entry statements.
pub fn write_pomdp(model: &PomdpModel) -> String {
    let mut out = String::new();
    let (ns, na) = (model.num_states(), model.num_actions());
    let _ = writeln!(out, "discount: {}", fmt_num(model.discount()));
    let _ = writeln!(out, "values: reward");
    let _ = writeln!(out, "states: {}", model.state_names().join(" "));
    let _ = writeln!(out, "actions: {}", model.action_names().join(" "));
    let _ = writeln!(out, "observations: {}", model.observation_names().join(" "));
    let start = model.initial_belief().to_dense();
    let _ = writeln!(
        out,
        "start: {}",
        start
            .iter()
            .map(|v| fmt_num(*v))
            .collect::<Vec<_>>()
            .join(" ")
    );
    out.push('\n');
    let sn = model.state_names();
    let an = model.action_names();
    let on = model.observation_names();
    for a in 0..na {
        for s in 0..ns {
            for (sp, p) in model.transition(a).row_iter(s) {
                let _ = writeln!(out, "T: {} : {} : {} {}", an[a], sn[s], sn[sp], fmt_num(p));
            }
        }
    }
    out.push('\n');
    for a in 0..na {
        for sp in 0..ns {
            for (z, p) in model.observation(a).row_iter(sp) {
                let _ = writeln!(out, "O: {} : {} : {} {}", an[a], sn[sp], on[z], fmt_num(p));
            }
        }
    }
    out.push('\n');
    for a in 0..na {
        for s in 0..ns {
            let r = model.reward(s, a);
            if r != 0.0 {
                let _ = writeln!(out, "R: {} : {} : * : * {}", an[a], sn[s], fmt_num(r));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_rocksample, tiger, RockSampleConfig, TIGER_POMDP};

    #[test]
    fn tiger_header() {
        let m = parse_pomdp(TIGER_POMDP).unwrap();
        assert_eq!(
            (m.num_states(), m.num_actions(), m.num_observations()),
            (2, 3, 2)
        );
        assert_eq!(m.discount(), 0.95);
        assert_eq!(m.reward(0, 1), -100.0);
        assert_eq!(m.reward(1, 1), 10.0);
        assert_eq!(m.reward(0, 0), -1.0);
        assert_eq!(m.transition(1).get(0, 1), 0.5);
    }

    #[test]
    fn identity_keyword() {
        let text = "discount: 0.9\nvalues: reward\nstates: 3\nactions: a b\nobservations: 1\n\
                    T: a identity\nT: b\nuniform\nO: * uniform\nR: * : * : * : * 1\n";
        let m = parse_pomdp(text).unwrap();
        for s in 0..3 {
            assert_eq!(
                m.transition(0).row_iter(s).collect::<Vec<_>>(),
                vec![(s, 1.0)]
            );
        }
        assert!((m.transition(1).get(2, 0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bad_row_sum_is_reported() {
        let text = "discount: 0.9\nstates: 2\nactions: 1\nobservations: 1\n\
                    T: 0 : 0\n0.9 0.0\nT: 0 : 1\n0 1\nO: 0 uniform\n";
        match parse_pomdp(text) {
            Err(ParseError::Stochasticity {
                kind, state, sum, ..
            }) => {
                assert_eq!(kind, "transition");
                assert_eq!(state, "0");
                assert!((sum - 0.9).abs() < 1e-12);
            }
            other => panic!("expected stochasticity error, got {other:?}"),
        }
    }

    #[test]
    fn missing_rows_strict_vs_permissive() {
        let text = "discount: 0.9\nstates: 2\nactions: 1\nobservations: 2\nT: 0 : 0 : 1 1.0\nO: 0 : 0\n0.5 0.5\n";
        assert!(matches!(
            parse_pomdp(text),
            Err(ParseError::Stochasticity { .. })
        ));
        let m = parse_pomdp_with(text, ParseOptions { permissive: true }).unwrap();
        assert_eq!(m.transition(0).get(1, 1), 1.0);
        assert_eq!(m.observation(0).get(1, 0), 0.5);
    }

    #[test]
    fn missing_preamble_and_syntax_positions() {
        assert!(matches!(
            parse_pomdp("states: 2\nactions: 1\nobservations: 1\n"),
            Err(ParseError::MissingBlock(b)) if b == "discount"
        ));
        let err = parse_pomdp(
            "discount: 0.9\nstates: 2\nactions: 1\nobservations: 1\nT: 0 : 0 : 1 abc\n",
        )
        .unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => assert_eq!((line, column), (5, 14)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_pomdp(
                "discount: 0.9\nstates: 2\nactions: 1\nobservations: 1\nT: 0 : 7 : 1 1.0\n"
            ),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn cost_values_negate_rewards() {
        let text = "discount: 0.5\nvalues: cost\nstates: 1\nactions: 1\nobservations: 1\nT: 0 identity\nO: 0 uniform\nR: 0 : * : * : * 3\n";
        assert_eq!(parse_pomdp(text).unwrap().reward(0, 0), -3.0);
    }

    #[test]
    fn reward_depending_on_next_state_and_observation_is_averaged() {
        let text = "discount: 0.5\nstates: 2\nactions: 1\nobservations: 2\nstart: 1 0\n\
                    T: 0 : 0\n0.25 0.75\nT: 0 : 1 : 1 1\nO: 0\n0.5 0.5\n1 0\n\
                    R: 0 : 0 : 1 : * 4\nR: 0 : 0 : 0 : 1 8\n";
        let m = parse_pomdp(text).unwrap();
        // 0.75 * 4 + 0.25 * 0.5 * 8
        assert!((m.reward(0, 0) - 4.0).abs() < 1e-12);
        assert_eq!(m.initial_belief().to_dense(), vec![1.0, 0.0]);
    }

    #[test]
    fn start_forms() {
        let base = "discount: 0.5\nstates: a b c\nactions: 1\nobservations: 1\n";
        let tail = "T: 0 identity\nO: 0 uniform\n";
        let m = parse_pomdp(&format!("{base}start: b\n{tail}")).unwrap();
        assert_eq!(m.initial_belief().to_dense(), vec![0.0, 1.0, 0.0]);
        let m = parse_pomdp(&format!("{base}start include: a c\n{tail}")).unwrap();
        assert_eq!(m.initial_belief().to_dense(), vec![0.5, 0.0, 0.5]);
        let m = parse_pomdp(&format!("{base}start exclude: a\n{tail}")).unwrap();
        assert_eq!(m.initial_belief().to_dense(), vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn write_then_parse_is_identity() {
        for m in [
            tiger(),
            generate_rocksample(&RockSampleConfig::with_positions(
                3,
                2,
                vec![(0, 1), (2, 2)],
            ))
            .unwrap(),
        ] {
            let back = parse_pomdp(&write_pomdp(&m)).unwrap();
            assert_eq!(back.content_hash(), m.content_hash());
            for a in 0..m.num_actions() {
                assert_eq!(back.transition(a), m.transition(a));
                assert_eq!(back.observation(a), m.observation(a));
                assert_eq!(back.rewards(a), m.rewards(a));
            }
        }
    }
}
