//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use augclean::constraints::{DenialConstraint, Op, Operand, TupleVar};
use augclean::data::{Dataset, Schema};
use rand::seq::SliceRandom;
use rand::Rng;

const POOL: [&str; 8] = ["1", "2", "10", "-3.5", "a", "b", "ab", ""];
pub const ATTRS: [&str; 3] = ["p", "q", "r"];

pub fn random_table<R: Rng>(rng: &mut R, max_rows: usize) -> Dataset {
    let n = rng.gen_range(1..=max_rows);
    let rows = (0..n)
        .map(|_| ATTRS.iter().map(|_| POOL.choose(rng).unwrap().to_string()).collect())
        .collect();
    Dataset::new("random", Schema::new(ATTRS).unwrap(), rows).unwrap()
}

/// A constraint in concrete syntax; `ops` lists the operators to draw from.
pub fn random_constraint<R: Rng>(rng: &mut R, ops: &[&str]) -> String {
    let pair = rng.gen_bool(0.75);
    let k = rng.gen_range(1..=3);
    let preds: Vec<String> = (0..k)
        .map(|_| {
            let op = ops.choose(rng).unwrap();
            let a = ATTRS.choose(rng).unwrap();
            let b = ATTRS.choose(rng).unwrap();
            match (pair, rng.gen_range(0..3)) {
                (true, 0) => format!("t1.{a}{op}t2.{b}"),
                (true, 1) => format!("t2.{a}{op}'{}'", POOL.choose(rng).unwrap()),
                (true, _) => format!("t1.{a}{op}t1.{b}"),
                (false, 0) => format!("t1.{a}{op}t1.{b}"),
                (false, _) => format!("t1.{a}{op}'{}'", POOL.choose(rng).unwrap()),
            }
        })
        .collect();
    format!("{}: {}", if pair { "t1&t2" } else { "t1" }, preds.join(" & "))
}

pub const ALL_OPS: [&str; 6] = ["=", "!=", "<", ">", "<=", ">="];

fn number(s: &str) -> Option<f64> {
    if s.is_empty() || !s.chars().all(|c| c.is_ascii_digit() || "+-.".contains(c)) {
        return None;
    }
    s.parse().ok()
}

/// `a op b` with numeric ordering when both sides are numbers.
fn holds(op: Op, a: &str, b: &str) -> bool {
    let less = match (number(a), number(b)) {
        (Some(x), Some(y)) => (x < y, x > y),
        _ => (a < b, a > b),
    };
    match op {
        Op::Eq => a == b,
        Op::Ne => a != b,
        Op::Lt => less.0,
        Op::Gt => less.1,
        Op::Le => !less.1,
        Op::Ge => !less.0,
    }
}

fn satisfied(dc: &DenialConstraint, t1: &[String], t2: &[String]) -> bool {
    dc.predicates.iter().all(|p| {
        let side = |v: TupleVar, a: usize| {
            if v == TupleVar::T1 {
                t1[a].as_str()
            } else {
                t2[a].as_str()
            }
        };
        let lhs = side(p.lhs.var, p.lhs.attr);
        let rhs = match &p.rhs {
            Operand::Attr(r) => side(r.var, r.attr),
            Operand::Const(c) => c.as_str(),
        };
        holds(p.op, lhs, rhs)
    })
}

/// Enumerates every tuple (arity 1) or ordered pair of distinct tuples
/// (arity 2), charging both tuples of a violating pair.
pub fn brute_force_counts(rows: &[Vec<String>], dcs: &[DenialConstraint]) -> Vec<Vec<u32>> {
    let mut counts = vec![vec![0u32; dcs.len()]; rows.len()];
    for (k, dc) in dcs.iter().enumerate() {
        for i in 0..rows.len() {
            if dc.arity == 1 {
                if satisfied(dc, &rows[i], &rows[i]) {
                    counts[i][k] += 1;
                }
                continue;
            }
            for j in 0..rows.len() {
                if i != j && satisfied(dc, &rows[i], &rows[j]) {
                    counts[i][k] += 1;
                    counts[j][k] += 1;
                }
            }
        }
    }
    counts
}
