//! Denial constraints over one tuple or a pair of tuples, and per-tuple
//! violation counting.
//!
//! Concrete syntax, one constraint per line:
//!
//! ```text
//! t1&t2: t1.zip=t2.zip & t1.city!=t2.city
//! t1: t1.age<'0'
//! ```
//!
//! A pair `(t1, t2)` violates a constraint when every predicate holds. Each
//! ordered pair is checked separately and both tuples of a violating pair
//! are charged one violation.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Schema};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TupleVar {
    T1,
    T2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Gt => ">",
            Op::Le => "<=",
            Op::Ge => ">=",
        }
    }

    /// Evaluates `lhs op rhs`. Ordering operators compare numerically when
    /// both sides parse as decimals, lexicographically otherwise; equality
    /// is always exact string equality.
    pub fn holds(self, lhs: &str, rhs: &str) -> bool {
        match self {
            Op::Eq => lhs == rhs,
            Op::Ne => lhs != rhs,
            Op::Lt => compare(lhs, rhs) == Ordering::Less,
            Op::Gt => compare(lhs, rhs) == Ordering::Greater,
            Op::Le => compare(lhs, rhs) != Ordering::Greater,
            Op::Ge => compare(lhs, rhs) != Ordering::Less,
        }
    }

    pub const ALL: [Op; 6] = [Op::Eq, Op::Ne, Op::Lt, Op::Gt, Op::Le, Op::Ge];
}

fn parse_decimal(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+')) {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn compare(a: &str, b: &str) -> Ordering {
    match (parse_decimal(a), parse_decimal(b)) {
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        _ => a.cmp(b),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttrRef {
    pub var: TupleVar,
    pub attr: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Attr(AttrRef),
    Const(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub lhs: AttrRef,
    pub op: Op,
    pub rhs: Operand,
}

impl Predicate {
    fn eval(&self, t1: &[String], t2: &[String]) -> bool {
        let pick = |r: &AttrRef| match r.var {
            TupleVar::T1 => t1[r.attr].as_str(),
            TupleVar::T2 => t2[r.attr].as_str(),
        };
        let lhs = pick(&self.lhs);
        let rhs = match &self.rhs {
            Operand::Attr(r) => pick(r),
            Operand::Const(c) => c.as_str(),
        };
        self.op.holds(lhs, rhs)
    }

    /// `t1.A = t2.B` (or mirrored), usable as a hash-join key.
    fn cross_equality(&self) -> Option<(usize, usize)> {
        match (&self.op, &self.rhs) {
            (Op::Eq, Operand::Attr(r)) if r.var != self.lhs.var => Some(match self.lhs.var {
                TupleVar::T1 => (self.lhs.attr, r.attr),
                TupleVar::T2 => (r.attr, self.lhs.attr),
            }),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenialConstraint {
    pub id: String,
    pub text: String,
    pub arity: usize,
    pub predicates: Vec<Predicate>,
}

impl DenialConstraint {
    /// True when all predicates hold for `(t1, t2)`. For arity-1
    /// constraints `t2` is ignored.
    pub fn violated_by(&self, t1: &[String], t2: &[String]) -> bool {
        self.predicates.iter().all(|p| p.eval(t1, t2))
    }
}

impl fmt::Display for DenialConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.text)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    schema: &'a Schema,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::ConstraintParse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            self.err(format!("expected `{token}`"))
        }
    }

    fn tuple_var(&mut self) -> Result<TupleVar> {
        self.skip_ws();
        if self.eat("t1") {
            Ok(TupleVar::T1)
        } else if self.eat("t2") {
            Ok(TupleVar::T2)
        } else {
            self.err("expected tuple variable `t1` or `t2`")
        }
    }

    fn attr_ref(&mut self, arity: usize) -> Result<AttrRef> {
        let start = self.pos;
        let var = self.tuple_var()?;
        if var == TupleVar::T2 && arity == 1 {
            self.pos = start;
            self.skip_ws();
            return self.err("`t2` referenced in a single-tuple constraint");
        }
        self.expect(".")?;
        let name_start = self.pos;
        let len = self
            .rest()
            .find(['=', '!', '<', '>', '&', '~', '≈', '≠', '≤', '≥'])
            .unwrap_or(self.rest().len());
        let name = self.src[name_start..name_start + len].trim();
        if name.is_empty() {
            return self.err("expected attribute name");
        }
        match self.schema.index_of(name) {
            Some(attr) => {
                self.pos = name_start + len;
                Ok(AttrRef { var, attr })
            }
            None => {
                self.pos = name_start;
                self.err(format!("unknown attribute `{name}`"))
            }
        }
    }

    fn op(&mut self) -> Result<Op> {
        self.skip_ws();
        const TABLE: [(&str, Op); 9] = [
            ("!=", Op::Ne),
            ("<=", Op::Le),
            (">=", Op::Ge),
            ("≠", Op::Ne),
            ("≤", Op::Le),
            ("≥", Op::Ge),
            ("=", Op::Eq),
            ("<", Op::Lt),
            (">", Op::Gt),
        ];
        if self.rest().starts_with('~') || self.rest().starts_with('≈') {
            return self.err("similarity operator is not supported");
        }
        for (tok, op) in TABLE {
            if self.rest().starts_with(tok) {
                self.pos += tok.len();
                return Ok(op);
            }
        }
        self.err("expected comparison operator (=, !=, <, >, <=, >=)")
    }

    fn operand(&mut self, arity: usize) -> Result<Operand> {
        self.skip_ws();
        if self.rest().starts_with('\'') {
            self.pos += 1;
            match self.rest().find('\'') {
                Some(end) => {
                    let lit = self.rest()[..end].to_string();
                    self.pos += end + 1;
                    Ok(Operand::Const(lit))
                }
                None => self.err("unterminated string literal"),
            }
        } else {
            Ok(Operand::Attr(self.attr_ref(arity)?))
        }
    }

    fn predicate(&mut self, arity: usize) -> Result<Predicate> {
        let lhs = self.attr_ref(arity)?;
        let op = self.op()?;
        let rhs = self.operand(arity)?;
        Ok(Predicate { lhs, op, rhs })
    }
}

/// Parses one constraint against a schema.
pub fn parse_dc(text: &str, schema: &Schema) -> Result<DenialConstraint> {
    parse_dc_with_id(text, schema, "dc")
}

pub fn parse_dc_with_id(text: &str, schema: &Schema, id: &str) -> Result<DenialConstraint> {
    let mut p = Parser {
        src: text,
        pos: 0,
        schema,
    };
    p.expect("t1")?;
    let arity = if p.eat("&") {
        p.expect("t2")?;
        2
    } else {
        1
    };
    p.expect(":")?;
    let mut predicates = vec![p.predicate(arity)?];
    while p.eat("&") {
        predicates.push(p.predicate(arity)?);
    }
    p.skip_ws();
    if !p.rest().is_empty() {
        return p.err("unexpected trailing input");
    }
    Ok(DenialConstraint {
        id: id.to_string(),
        text: text.trim().to_string(),
        arity,
        predicates,
    })
}

/// Parses a constraints file: one constraint per line, `#` comments and
/// blank lines ignored.
pub fn parse_constraints(source: &str, schema: &Schema) -> Result<Vec<DenialConstraint>> {
    let mut out = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let id = format!("dc{}", out.len() + 1);
        let dc = parse_dc_with_id(line, schema, &id).map_err(|e| match e {
            Error::ConstraintParse { position, message } => Error::ConstraintParse {
                position,
                message: format!("line {}: {message}", lineno + 1),
            },
            other => other,
        })?;
        out.push(dc);
    }
    Ok(out)
}

pub fn load_constraints(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<DenialConstraint>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_constraints(&text, schema)
}

type Key = Vec<String>;

/// Per-constraint hash-join index over a dataset, on the constraint's
/// cross-tuple equality predicates.
struct Blocking {
    /// (t1 attribute, t2 attribute) pairs joined by equality.
    keys: Vec<(usize, usize)>,
    /// key built from the t1-side attributes -> tuples
    by_t1: HashMap<Key, Vec<usize>>,
    /// key built from the t2-side attributes -> tuples
    by_t2: HashMap<Key, Vec<usize>>,
}

impl Blocking {
    fn build(dc: &DenialConstraint, rows: &[Vec<String>]) -> Option<Self> {
        let keys: Vec<(usize, usize)> = dc.predicates.iter().filter_map(Predicate::cross_equality).collect();
        if keys.is_empty() {
            return None;
        }
        let mut by_t1: HashMap<Key, Vec<usize>> = HashMap::new();
        let mut by_t2: HashMap<Key, Vec<usize>> = HashMap::new();
        for (i, row) in rows.iter().enumerate() {
            by_t1.entry(key(row, keys.iter().map(|k| k.0))).or_default().push(i);
            by_t2.entry(key(row, keys.iter().map(|k| k.1))).or_default().push(i);
        }
        Some(Blocking { keys, by_t1, by_t2 })
    }
}

fn key(row: &[String], attrs: impl Iterator<Item = usize>) -> Key {
    attrs.map(|a| row[a].clone()).collect()
}

/// Violation counter bound to one dataset. Counts can be taken for the
/// dataset's own tuples or for a modified copy of one tuple.
pub struct ViolationIndex<'a> {
    rows: &'a [Vec<String>],
    constraints: &'a [DenialConstraint],
    blocking: Vec<Option<Blocking>>,
}

impl<'a> ViolationIndex<'a> {
    pub fn new(dataset: &'a Dataset, constraints: &'a [DenialConstraint]) -> Self {
        let rows = dataset.rows();
        let blocking = constraints
            .iter()
            .map(|dc| if dc.arity == 2 { Blocking::build(dc, rows) } else { None })
            .collect();
        ViolationIndex {
            rows,
            constraints,
            blocking,
        }
    }

    /// Violations charged to tuple `tuple` whose values are `row` (which
    /// may differ from the stored row). Pairs with the tuple itself are
    /// skipped.
    pub fn counts_for(&self, tuple: usize, row: &[String]) -> Vec<u32> {
        self.constraints
            .iter()
            .zip(&self.blocking)
            .map(|(dc, block)| self.count_one(dc, block.as_ref(), tuple, row))
            .collect()
    }

    fn count_one(&self, dc: &DenialConstraint, block: Option<&Blocking>, tuple: usize, row: &[String]) -> u32 {
        if dc.arity == 1 {
            return u32::from(dc.violated_by(row, row));
        }
        let mut n = 0u32;
        match block {
            Some(b) => {
                // row as t1: partners share the t2-side key
                if let Some(js) = b.by_t2.get(&key(row, b.keys.iter().map(|k| k.0))) {
                    n += js
                        .iter()
                        .filter(|&&j| j != tuple && dc.violated_by(row, &self.rows[j]))
                        .count() as u32;
                }
                // row as t2
                if let Some(js) = b.by_t1.get(&key(row, b.keys.iter().map(|k| k.1))) {
                    n += js
                        .iter()
                        .filter(|&&j| j != tuple && dc.violated_by(&self.rows[j], row))
                        .count() as u32;
                }
            }
            None => {
                for (j, other) in self.rows.iter().enumerate() {
                    if j == tuple {
                        continue;
                    }
                    n += u32::from(dc.violated_by(row, other));
                    n += u32::from(dc.violated_by(other, row));
                }
            }
        }
        n
    }
}

/// Per-tuple violation counts, one entry per constraint.
pub fn count_violations(dataset: &Dataset, constraints: &[DenialConstraint]) -> Vec<Vec<u32>> {
    let index = ViolationIndex::new(dataset, constraints);
    dataset
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| index.counts_for(i, row))
        .collect()
}
