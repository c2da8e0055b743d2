//! Canonical JSON serialization shared by the CLI and the golden-file
//! tests. Every element carries `"schema": "hoca/1"`; rationals are
//! `"p/q"` strings and series are arrays of them; indices are 1-based on
//! the wire. Output is deterministic: maps are ordered and the term
//! orders are the canonical ones of the element types.

use serde_json::{json, Map, Value};

use crate::error::{EngineError, Result};
use crate::graphs::{AdmissibleGraph, Target};
use crate::polydiff::{DiffWord, PolyDiffOp};
use crate::polyvector::{Monomial, PolyVector};
use crate::scalar::{rat_from_str, rat_to_string, FormalSeries, Rat, Scalar};
use crate::transfer::PlanarTree;

pub const SCHEMA: &str = "hoca/1";

/// Either kind of coefficient found on the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Rational(Rat),
    Series(FormalSeries),
}

pub fn coefficient_to_value(c: &Coefficient) -> Value {
    match c {
        Coefficient::Rational(r) => Value::String(rat_to_string(r)),
        Coefficient::Series(s) => Value::Array(
            s.coeffs()
                .iter()
                .map(|r| Value::String(rat_to_string(r)))
                .collect(),
        ),
    }
}

pub fn coefficient_from_value(v: &Value) -> Result<Coefficient> {
    match v {
        Value::String(s) => Ok(Coefficient::Rational(rat_from_str(s)?)),
        Value::Array(items) => {
            let coeffs: Result<Vec<Rat>> = items
                .iter()
                .map(|x| match x {
                    Value::String(s) => rat_from_str(s),
                    _ => Err(EngineError::argument("series entries must be strings")),
                })
                .collect();
            Ok(Coefficient::Series(FormalSeries::from_coeffs(coeffs?)?))
        }
        _ => Err(EngineError::argument(
            "coefficient must be a \"p/q\" string or an array of them",
        )),
    }
}

fn scalar_value<S: Scalar + ScalarWire>(s: &S) -> Value {
    s.to_wire()
}

/// Wire conversion for the two scalar types.
pub trait ScalarWire: Sized {
    fn to_wire(&self) -> Value;
    fn from_wire(v: &Value) -> Result<Self>;
}

impl ScalarWire for Rat {
    fn to_wire(&self) -> Value {
        Value::String(rat_to_string(self))
    }
    fn from_wire(v: &Value) -> Result<Self> {
        match coefficient_from_value(v)? {
            Coefficient::Rational(r) => Ok(r),
            Coefficient::Series(_) => Err(EngineError::argument(
                "expected a rational coefficient, found a series",
            )),
        }
    }
}

impl ScalarWire for FormalSeries {
    fn to_wire(&self) -> Value {
        Value::Array(
            self.coeffs()
                .iter()
                .map(|r| Value::String(rat_to_string(r)))
                .collect(),
        )
    }
    fn from_wire(v: &Value) -> Result<Self> {
        match coefficient_from_value(v)? {
            Coefficient::Series(s) => Ok(s),
            Coefficient::Rational(_) => Err(EngineError::argument(
                "expected a series coefficient, found a rational",
            )),
        }
    }
}

pub fn polyvector_to_value<S: Scalar + ScalarWire>(a: &PolyVector<S>) -> Value {
    let terms: Vec<Value> = a
        .terms()
        .map(|((mono, wedge), c)| {
            json!({
                "coef": scalar_value(c),
                "mono": mono.0,
                "wedge": wedge.iter().map(|s| s + 1).collect::<Vec<usize>>(),
            })
        })
        .collect();
    json!({
        "schema": SCHEMA,
        "type": "polyvector",
        "d": a.dimension(),
        "terms": terms,
    })
}

pub fn polyvector_from_value<S: Scalar + ScalarWire>(v: &Value) -> Result<PolyVector<S>> {
    let obj = expect_object(v, "polyvector")?;
    let d = expect_usize(obj, "d")?;
    let mut out = PolyVector::zero(d);
    for term in expect_array(obj, "terms")? {
        let t = term
            .as_object()
            .ok_or_else(|| EngineError::argument("term must be an object"))?;
        let coef = S::from_wire(
            t.get("coef")
                .ok_or_else(|| EngineError::argument("term missing coef"))?,
        )?;
        let mono = parse_multi_index(t.get("mono"), d)?;
        let wedge: Vec<usize> = t
            .get("wedge")
            .and_then(Value::as_array)
            .ok_or_else(|| EngineError::argument("term missing wedge"))?
            .iter()
            .map(|x| {
                x.as_u64()
                    .and_then(|k| if k >= 1 { Some(k as usize - 1) } else { None })
                    .ok_or_else(|| EngineError::argument("wedge indices are 1-based integers"))
            })
            .collect::<Result<_>>()?;
        if wedge.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EngineError::argument(
                "wedge indices must be strictly increasing",
            ));
        }
        if wedge.iter().any(|s| *s >= d) {
            return Err(EngineError::argument("wedge index out of range"));
        }
        out.add_term(mono, wedge, coef);
    }
    Ok(out)
}

pub fn polydiff_to_value<S: Scalar + ScalarWire>(a: &PolyDiffOp<S>) -> Value {
    let terms: Vec<Value> = a
        .terms()
        .map(|((mono, word), c)| {
            json!({
                "coef": scalar_value(c),
                "mono": mono.0,
                "word": word.iter().map(|s| s.0.clone()).collect::<Vec<Vec<u32>>>(),
            })
        })
        .collect();
    json!({
        "schema": SCHEMA,
        "type": "polydiff",
        "d": a.dimension(),
        "terms": terms,
    })
}

pub fn polydiff_from_value<S: Scalar + ScalarWire>(v: &Value) -> Result<PolyDiffOp<S>> {
    let obj = expect_object(v, "polydiff")?;
    let d = expect_usize(obj, "d")?;
    let mut out = PolyDiffOp::zero(d);
    for term in expect_array(obj, "terms")? {
        let t = term
            .as_object()
            .ok_or_else(|| EngineError::argument("term must be an object"))?;
        let coef = S::from_wire(
            t.get("coef")
                .ok_or_else(|| EngineError::argument("term missing coef"))?,
        )?;
        let mono = parse_multi_index(t.get("mono"), d)?;
        let word: DiffWord = t
            .get("word")
            .and_then(Value::as_array)
            .ok_or_else(|| EngineError::argument("term missing word"))?
            .iter()
            .map(|slot| parse_multi_index(Some(slot), d))
            .collect::<Result<_>>()?;
        out.add_term(mono, word, coef);
    }
    Ok(out)
}

fn parse_multi_index(v: Option<&Value>, d: usize) -> Result<Monomial> {
    let arr = v
        .and_then(Value::as_array)
        .ok_or_else(|| EngineError::argument("multi-index must be an array"))?;
    if arr.len() != d {
        return Err(EngineError::argument(format!(
            "multi-index length {} does not match dimension {d}",
            arr.len()
        )));
    }
    let exps: Result<Vec<u32>> = arr
        .iter()
        .map(|x| {
            x.as_u64()
                .map(|k| k as u32)
                .ok_or_else(|| EngineError::argument("exponents are non-negative integers"))
        })
        .collect();
    Ok(Monomial(exps?))
}

pub fn tree_to_value(t: &PlanarTree) -> Value {
    match t {
        PlanarTree::Leaf(i) => json!(i),
        PlanarTree::Node(children) => Value::Array(children.iter().map(tree_to_value).collect()),
    }
}

pub fn tree_from_value(v: &Value) -> Result<PlanarTree> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .filter(|&k| k >= 1)
            .map(|k| PlanarTree::Leaf(k as usize))
            .ok_or_else(|| EngineError::argument("leaves are positive integers")),
        Value::Array(children) => {
            if children.len() < 2 {
                return Err(EngineError::argument(
                    "internal vertices need at least two children",
                ));
            }
            Ok(PlanarTree::Node(
                children.iter().map(tree_from_value).collect::<Result<_>>()?,
            ))
        }
        _ => Err(EngineError::argument("tree must be an integer or an array")),
    }
}

pub fn graph_to_value(g: &AdmissibleGraph) -> Value {
    let out: Vec<Vec<String>> = g
        .out
        .iter()
        .map(|edges| {
            edges
                .iter()
                .map(|t| match t {
                    Target::T1(v) => format!("T1:{}", v + 1),
                    Target::T2(s) => format!("T2:{}", s + 1),
                })
                .collect()
        })
        .collect();
    json!({
        "schema": SCHEMA,
        "type": "graph",
        "t": g.t,
        "n": g.n,
        "out": out,
    })
}

pub fn graph_from_value(v: &Value) -> Result<AdmissibleGraph> {
    let obj = expect_object(v, "graph")?;
    let t = expect_usize(obj, "t")?;
    let n = expect_usize(obj, "n")?;
    let out_val = expect_array(obj, "out")?;
    let mut out = Vec::with_capacity(out_val.len());
    for edges in out_val {
        let list = edges
            .as_array()
            .ok_or_else(|| EngineError::argument("out entries must be arrays"))?;
        let mut parsed = Vec::with_capacity(list.len());
        for e in list {
            let s = e
                .as_str()
                .ok_or_else(|| EngineError::argument("targets are strings like T1:1 or T2:1"))?;
            let target = if let Some(num) = s.strip_prefix("T1:") {
                Target::T1(parse_one_based(num)?)
            } else if let Some(num) = s.strip_prefix("T2:") {
                Target::T2(parse_one_based(num)?)
            } else {
                return Err(EngineError::argument(format!("bad target {s:?}")));
            };
            parsed.push(target);
        }
        out.push(parsed);
    }
    let g = AdmissibleGraph { t, n, out };
    Ok(g)
}

fn parse_one_based(s: &str) -> Result<usize> {
    let k: usize = s
        .parse()
        .map_err(|_| EngineError::argument(format!("bad index {s:?}")))?;
    if k == 0 {
        return Err(EngineError::argument("indices are 1-based"));
    }
    Ok(k - 1)
}

fn expect_object<'a>(v: &'a Value, ty: &str) -> Result<&'a Map<String, Value>> {
    let obj = v
        .as_object()
        .ok_or_else(|| EngineError::argument(format!("{ty}: expected a JSON object")))?;
    if let Some(schema) = obj.get("schema") {
        if schema != SCHEMA {
            return Err(EngineError::argument(format!(
                "unsupported schema {schema}, expected {SCHEMA}"
            )));
        }
    }
    if let Some(t) = obj.get("type") {
        if t != ty {
            return Err(EngineError::argument(format!(
                "expected type {ty:?}, found {t}"
            )));
        }
    }
    Ok(obj)
}

fn expect_usize(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    obj.get(key)
        .and_then(Value::as_u64)
        .map(|k| k as usize)
        .ok_or_else(|| EngineError::argument(format!("missing or bad field {key:?}")))
}

fn expect_array<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Vec<Value>> {
    obj.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| EngineError::argument(format!("missing or bad field {key:?}")))
}

/// Deterministic rendering: serde_json with ordered maps.
pub fn to_canonical_string(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serialization cannot fail")
}
