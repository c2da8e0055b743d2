//! Two-type admissible graphs and their multi-differential operators.
//!
//! A graph has `t` source vertices with ordered out-edge lists and `n`
//! sinks without out-edges. Feeding the `v`-th source a poly-vector of
//! wedge arity equal to its out-degree produces the operator
//!
//! ```text
//! U(a_1..a_t)(f_1..f_n) = sum over edge labelings
//!     prod_v  d_{In(v)} a_v^{Out(v)}  .  prod_sinks d_{In} f
//! ```
//!
//! summing every edge label over the coordinate directions. Components
//! `a^{s_1..s_k}` are read off a wedge with the sign of the sorting
//! permutation and without factorial normalization, so a bivector
//! `d1 ^ d2` evaluates on one source with two sink edges to the
//! antisymmetrized bidifferential `d1 f d2 g - d2 f d1 g`.
//!
//! Loops (a source edge returning to its own vertex) are representable;
//! enumeration excludes them unless asked. The span comparison includes
//! them: the divergence-type operators they produce are affine-invariant
//! and belong to the span the comparison certifies.
//!
//! The comparison itself works on evaluation vectors (operators evaluated
//! on a finite input basis) rather than raw index tensors, because
//! distinct tensors can induce the same operator on antisymmetric inputs.

use std::collections::BTreeMap;

use crate::error::{EngineError, Result};
use crate::linalg::SparseMat;
use crate::polydiff::{DiffWord, PdTerm, PolyDiffOp};
use crate::polyvector::{Monomial, PolyVector};
use crate::scalar::Rat;

/// Edge target: a source vertex or a sink (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    T1(usize),
    T2(usize),
}

/// Admissible graph: ordered out-edge lists per source vertex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AdmissibleGraph {
    pub t: usize,
    pub n: usize,
    pub out: Vec<Vec<Target>>,
}

impl AdmissibleGraph {
    pub fn out_degrees(&self) -> Vec<usize> {
        self.out.iter().map(Vec::len).collect()
    }

    fn check(&self) -> Result<()> {
        if self.out.len() != self.t {
            return Err(EngineError::argument(
                "graph: out-edge lists do not match the vertex count",
            ));
        }
        for edges in &self.out {
            for e in edges {
                match e {
                    Target::T1(v) if *v >= self.t => {
                        return Err(EngineError::argument("graph: bad source target"))
                    }
                    Target::T2(s) if *s >= self.n => {
                        return Err(EngineError::argument("graph: bad sink target"))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Complete duplicate-free enumeration of target assignments for the
/// given out-degrees; loops excluded unless allowed.
pub fn enumerate_graphs(
    out_degrees: &[usize],
    n: usize,
    allow_loops: bool,
    bound: usize,
) -> Result<Vec<AdmissibleGraph>> {
    let t = out_degrees.len();
    let total_edges: usize = out_degrees.iter().sum();
    let choices = t + n - usize::from(!allow_loops && t > 0);
    // counting bound before materializing
    let mut count = 1usize;
    for _ in 0..total_edges {
        count = count.saturating_mul(choices.max(1));
        if count > bound {
            return Err(EngineError::resource(format!(
                "graph enumeration would produce more than {bound} graphs"
            )));
        }
    }
    let mut out = vec![AdmissibleGraph {
        t,
        n,
        out: out_degrees.iter().map(|&k| Vec::with_capacity(k)).collect(),
    }];
    for (v, &deg) in out_degrees.iter().enumerate() {
        for _ in 0..deg {
            let mut next = Vec::with_capacity(out.len() * choices);
            for g in &out {
                for tv in 0..t {
                    if !allow_loops && tv == v {
                        continue;
                    }
                    let mut g2 = g.clone();
                    g2.out[v].push(Target::T1(tv));
                    next.push(g2);
                }
                for s in 0..n {
                    let mut g2 = g.clone();
                    g2.out[v].push(Target::T2(s));
                    next.push(g2);
                }
            }
            out = next;
        }
    }
    out.sort();
    Ok(out)
}

/// Wedge component `a^{s_1..s_k}` of a poly-vector, as a polynomial
/// (coefficient map). Zero on repeated indices; signed by the sorting
/// permutation.
fn component(a: &PolyVector<Rat>, indices: &[usize]) -> BTreeMap<Monomial, Rat> {
    let mut sorted = indices.to_vec();
    let mut sign = 1i32;
    for i in 1..sorted.len() {
        let mut j = i;
        while j > 0 && sorted[j - 1] > sorted[j] {
            sorted.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return BTreeMap::new();
    }
    let mut out = BTreeMap::new();
    for ((mono, wedge), c) in a.terms() {
        if *wedge == sorted {
            let v = if sign < 0 { -c.clone() } else { c.clone() };
            out.insert(mono.clone(), v);
        }
    }
    out
}

fn poly_deriv_multi(p: &BTreeMap<Monomial, Rat>, delta: &Monomial) -> BTreeMap<Monomial, Rat> {
    let mut out = BTreeMap::new();
    'terms: for (m, c) in p {
        let mut factor = Rat::from_integer(1.into());
        let mut e = m.0.clone();
        for k in 0..m.0.len() {
            if delta.0[k] > m.0[k] {
                continue 'terms;
            }
            for i in 0..delta.0[k] {
                factor *= Rat::from_integer(((m.0[k] - i) as i64).into());
            }
            e[k] = m.0[k] - delta.0[k];
        }
        let v = c * factor;
        if !num_traits::Zero::is_zero(&v) {
            *out.entry(Monomial(e)).or_insert_with(|| Rat::from_integer(0.into())) += v;
        }
    }
    out.retain(|_, v| !num_traits::Zero::is_zero(v));
    out
}

/// Operator form of the graph evaluation: the sinks become the word slots
/// of an `n`-argument poly-differential operator.
pub fn evaluate_graph_op(
    graph: &AdmissibleGraph,
    inputs: &[PolyVector<Rat>],
) -> Result<PolyDiffOp<Rat>> {
    graph.check()?;
    if inputs.len() != graph.t {
        return Err(EngineError::argument(format!(
            "graph evaluation: expected {} inputs, got {}",
            graph.t,
            inputs.len()
        )));
    }
    let d = inputs
        .first()
        .map(PolyVector::dimension)
        .unwrap_or_else(|| 1);
    for (v, a) in inputs.iter().enumerate() {
        if !a.is_zero() && a.homogeneous_degree() != Some(graph.out[v].len() as i64 - 1) {
            return Err(EngineError::argument(format!(
                "graph evaluation: input {v} must be homogeneous of wedge arity {}",
                graph.out[v].len()
            )));
        }
    }
    // edges in a fixed order: (vertex, position)
    let edges: Vec<(usize, usize, Target)> = graph
        .out
        .iter()
        .enumerate()
        .flat_map(|(v, outs)| {
            outs.iter()
                .enumerate()
                .map(move |(pos, tgt)| (v, pos, *tgt))
        })
        .collect();
    let mut result = PolyDiffOp::zero(d);
    let mut labels = vec![0usize; edges.len()];
    loop {
        // assemble the contribution of this labeling
        let mut in_at_t1: Vec<Monomial> = vec![Monomial::one(d); graph.t];
        let mut in_at_sink: Vec<Monomial> = vec![Monomial::one(d); graph.n];
        let mut out_labels: Vec<Vec<usize>> = vec![Vec::new(); graph.t];
        for ((v, _pos, tgt), &lab) in edges.iter().zip(&labels) {
            out_labels[*v].push(lab);
            match tgt {
                Target::T1(w) => in_at_t1[*w].0[lab] += 1,
                Target::T2(s) => in_at_sink[*s].0[lab] += 1,
            }
        }
        // product over source vertices of the differentiated components
        let mut poly: BTreeMap<Monomial, Rat> =
            BTreeMap::from([(Monomial::one(d), Rat::from_integer(1.into()))]);
        let mut zero = false;
        for v in 0..graph.t {
            let comp = component(&inputs[v], &out_labels[v]);
            let der = poly_deriv_multi(&comp, &in_at_t1[v]);
            if der.is_empty() {
                zero = true;
                break;
            }
            let mut next = BTreeMap::new();
            for (m1, c1) in &poly {
                for (m2, c2) in &der {
                    *next
                        .entry(m1.mul(m2))
                        .or_insert_with(|| Rat::from_integer(0.into())) += c1 * c2;
                }
            }
            next.retain(|_, c| !num_traits::Zero::is_zero(c));
            poly = next;
            if poly.is_empty() {
                zero = true;
                break;
            }
        }
        if !zero {
            let word: DiffWord = in_at_sink.clone();
            for (m, c) in poly {
                result.add_term(m, word.clone(), c);
            }
        }
        // next labeling
        let mut i = 0;
        loop {
            if i == labels.len() {
                return Ok(result);
            }
            labels[i] += 1;
            if labels[i] < d {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if labels.iter().all(|&x| x == 0) && edges.is_empty() {
            return Ok(result);
        }
    }
}

/// Scalar form: apply the graph operator to ring elements.
pub fn evaluate_graph(
    graph: &AdmissibleGraph,
    inputs: &[PolyVector<Rat>],
    functions: &[crate::polydiff::Poly],
) -> Result<crate::polydiff::Poly> {
    if functions.len() != graph.n {
        return Err(EngineError::argument(format!(
            "graph evaluation: expected {} functions, got {}",
            graph.n,
            functions.len()
        )));
    }
    let op = evaluate_graph_op(graph, inputs)?;
    crate::polydiff::apply_to_polys(&op, functions)
}

// ---------------------------------------------------------------------------
// Coordinate changes (used for the invariance property tests)
// ---------------------------------------------------------------------------

/// Substitute `t -> t + c` in every coefficient.
pub fn translate_polyvector(a: &PolyVector<Rat>, c: &[Rat]) -> PolyVector<Rat> {
    let d = a.dimension();
    let mut out = PolyVector::zero(d);
    for ((mono, wedge), coeff) in a.terms() {
        for (m2, v) in shift_monomial(mono, c) {
            out.add_term(m2, wedge.clone(), coeff * &v);
        }
    }
    out
}

pub fn translate_polydiff(op: &PolyDiffOp<Rat>, c: &[Rat]) -> PolyDiffOp<Rat> {
    let d = op.dimension();
    let mut out = PolyDiffOp::zero(d);
    for ((mono, word), coeff) in op.terms() {
        for (m2, v) in shift_monomial(mono, c) {
            out.add_term(m2, word.clone(), coeff * &v);
        }
    }
    out
}

/// Binomial expansion of `(t + c)^mono`.
fn shift_monomial(mono: &Monomial, c: &[Rat]) -> Vec<(Monomial, Rat)> {
    let d = mono.0.len();
    let mut acc: Vec<(Vec<u32>, Rat)> = vec![(Vec::new(), Rat::from_integer(1.into()))];
    for k in 0..d {
        let e = mono.0[k];
        let mut next = Vec::new();
        for (prefix, coeff) in &acc {
            // (t_k + c_k)^e = sum_j C(e, j) c_k^{e-j} t_k^j
            let mut binom = Rat::from_integer(1.into());
            // precompute powers of c_k descending; iterate j ascending
            let mut cpows = vec![Rat::from_integer(1.into()); (e + 1) as usize];
            for i in 1..=e as usize {
                cpows[i] = &cpows[i - 1] * &c[k];
            }
            for j in 0..=e {
                // C(e, j)
                if j > 0 {
                    binom = binom * Rat::from_integer(((e - j + 1) as i64).into())
                        / Rat::from_integer((j as i64).into());
                }
                let v = coeff * &binom * &cpows[(e - j) as usize];
                if num_traits::Zero::is_zero(&v) {
                    continue;
                }
                let mut p = prefix.clone();
                p.push(j);
                next.push((p, v));
            }
        }
        acc = next;
    }
    acc.into_iter().map(|(e, v)| (Monomial(e), v)).collect()
}

/// Polynomial substitution `t_j -> sum_i M[i][j] t_i`.
fn substitute_monomial(mono: &Monomial, m: &SparseMat) -> Vec<(Monomial, Rat)> {
    let d = mono.0.len();
    let mut acc: BTreeMap<Monomial, Rat> =
        BTreeMap::from([(Monomial::one(d), Rat::from_integer(1.into()))]);
    for j in 0..d {
        for _ in 0..mono.0[j] {
            let mut next: BTreeMap<Monomial, Rat> = BTreeMap::new();
            for (base, coeff) in &acc {
                for i in 0..d {
                    let mij = m.get(i, j);
                    if num_traits::Zero::is_zero(&mij) {
                        continue;
                    }
                    let mut e = base.0.clone();
                    e[i] += 1;
                    *next
                        .entry(Monomial(e))
                        .or_insert_with(|| Rat::from_integer(0.into())) += coeff * &mij;
                }
            }
            acc = next;
        }
    }
    acc.into_iter().collect()
}

/// Change of coordinates on poly-vectors: coefficients substitute along
/// `M`, derivations along the inverse transpose.
pub fn linear_transform_polyvector(
    a: &PolyVector<Rat>,
    m: &SparseMat,
    m_inv_t: &SparseMat,
) -> PolyVector<Rat> {
    let d = a.dimension();
    let mut out = PolyVector::zero(d);
    for ((mono, wedge), coeff) in a.terms() {
        let coeff_terms = substitute_monomial(mono, m);
        // each wedge factor expands along the inverse transpose
        let mut wedge_terms: Vec<(Vec<usize>, Rat)> =
            vec![(Vec::new(), Rat::from_integer(1.into()))];
        for &s in wedge {
            let mut next = Vec::new();
            for (prefix, c0) in &wedge_terms {
                for i in 0..d {
                    let v = m_inv_t.get(i, s);
                    if num_traits::Zero::is_zero(&v) {
                        continue;
                    }
                    let mut p = prefix.clone();
                    p.push(i);
                    next.push((p, c0 * &v));
                }
            }
            wedge_terms = next;
        }
        for (m2, c1) in &coeff_terms {
            for (indices, c2) in &wedge_terms {
                // sort with sign, drop repeats
                let mut sorted = indices.clone();
                let mut sign = 1i32;
                for i in 1..sorted.len() {
                    let mut j = i;
                    while j > 0 && sorted[j - 1] > sorted[j] {
                        sorted.swap(j - 1, j);
                        sign = -sign;
                        j -= 1;
                    }
                }
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    continue;
                }
                let v = coeff * c1 * c2;
                out.add_term(
                    m2.clone(),
                    sorted,
                    if sign < 0 { -v } else { v },
                );
            }
        }
    }
    out
}

/// Change of coordinates on operators: slots expand multiplicatively
/// along the inverse transpose.
pub fn linear_transform_polydiff(
    op: &PolyDiffOp<Rat>,
    m: &SparseMat,
    m_inv_t: &SparseMat,
) -> PolyDiffOp<Rat> {
    let d = op.dimension();
    let mut out = PolyDiffOp::zero(d);
    for ((mono, word), coeff) in op.terms() {
        let coeff_terms = substitute_monomial(mono, m);
        // each slot D^beta expands as a product of transformed derivations
        let mut word_terms: Vec<(DiffWord, Rat)> =
            vec![(Vec::new(), Rat::from_integer(1.into()))];
        for slot in word {
            // expand slot = prod_k d_k^{beta_k}
            let mut slot_terms: Vec<(Monomial, Rat)> =
                vec![(Monomial::one(d), Rat::from_integer(1.into()))];
            for k in 0..d {
                for _ in 0..slot.0[k] {
                    let mut next = Vec::new();
                    for (base, c0) in &slot_terms {
                        for i in 0..d {
                            let v = m_inv_t.get(i, k);
                            if num_traits::Zero::is_zero(&v) {
                                continue;
                            }
                            let mut e = base.0.clone();
                            e[i] += 1;
                            next.push((Monomial(e), c0 * &v));
                        }
                    }
                    slot_terms = next;
                }
            }
            let mut next_words = Vec::new();
            for (w, c0) in &word_terms {
                for (s, c1) in &slot_terms {
                    let mut w2 = w.clone();
                    w2.push(s.clone());
                    next_words.push((w2, c0 * c1));
                }
            }
            word_terms = next_words;
        }
        for (m2, c1) in &coeff_terms {
            for (w, c2) in &word_terms {
                out.add_term(m2.clone(), w.clone(), coeff * c1 * c2);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Span comparison against affine-invariant operators
// ---------------------------------------------------------------------------

/// Outcome of the invariant span comparison on one block.
#[derive(Debug, Clone)]
pub struct SpanReport {
    pub rank_graphs: usize,
    pub rank_invariants: usize,
    pub rank_gl_invariants: usize,
    pub graphs_considered: usize,
    pub graphs_in_block: usize,
    pub contained: bool,
    pub equal: bool,
}

/// Bounds delimiting the finite operator block for the comparison.
#[derive(Debug, Clone)]
pub struct SpanBlock {
    pub d: usize,
    pub out_degrees: Vec<usize>,
    pub n: usize,
    /// Bound on the coefficient monomial degree of the operator.
    pub coeff_bound: u32,
    /// Bound on the total derivative order applied to each input.
    pub input_deriv_bound: u32,
    /// Bound on the order of each output slot.
    pub slot_bound: u32,
}

struct EvalSpace {
    d: usize,
    /// input basis: one (wedge set, monomial) per source vertex
    inputs: Vec<Vec<(Vec<usize>, Monomial)>>,
    index: BTreeMap<Vec<(Vec<usize>, Monomial)>, usize>,
}

impl EvalSpace {
    fn new(block: &SpanBlock) -> Self {
        let d = block.d;
        let mut per_vertex: Vec<Vec<(Vec<usize>, Monomial)>> = Vec::new();
        for &deg in &block.out_degrees {
            let mut list = Vec::new();
            for set in subsets(d, deg) {
                for mono in monomials_up_to(d, block.input_deriv_bound) {
                    list.push((set.clone(), mono));
                }
            }
            per_vertex.push(list);
        }
        // cartesian product over vertices
        let mut inputs: Vec<Vec<(Vec<usize>, Monomial)>> = vec![vec![]];
        for list in &per_vertex {
            let mut next = Vec::new();
            for prefix in &inputs {
                for item in list {
                    let mut p = prefix.clone();
                    p.push(item.clone());
                    next.push(p);
                }
            }
            inputs = next;
        }
        let index = inputs
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        EvalSpace { d, inputs, index }
    }

    fn input_polyvectors(&self, tuple: &[(Vec<usize>, Monomial)]) -> Vec<PolyVector<Rat>> {
        tuple
            .iter()
            .map(|(set, mono)| {
                PolyVector::from_terms(
                    self.d,
                    vec![(mono.clone(), set.clone(), Rat::from_integer(1.into()))],
                )
            })
            .collect()
    }
}

/// Evaluation vector of an operator family: coordinates indexed by
/// (input tuple, output term).
type EvalVec = BTreeMap<(usize, PdTerm), Rat>;

fn add_eval(v: &mut EvalVec, key: (usize, PdTerm), c: Rat) {
    if num_traits::Zero::is_zero(&c) {
        return;
    }
    let slot = v.entry(key).or_insert_with(|| Rat::from_integer(0.into()));
    *slot += c;
    if num_traits::Zero::is_zero(slot) {
        // removal handled on use
    }
}

fn normalize_eval(v: &mut EvalVec) {
    v.retain(|_, c| !num_traits::Zero::is_zero(c));
}

/// Compare the span of the admissible-graph operators against the space
/// of affine-invariant operators in the block (and against the larger
/// space cut out by the linear-group equations alone).
pub fn invariant_span_compare(block: &SpanBlock, max_graphs: usize) -> Result<SpanReport> {
    let d = block.d;
    let space = EvalSpace::new(block);
    // parameter family spanning the block operators
    let params = block_parameters(block);
    if params.is_empty() || space.inputs.is_empty() {
        return Err(EngineError::argument("span comparison: empty block"));
    }
    let mut vectors: Vec<EvalVec> = Vec::new();
    for p in &params {
        vectors.push(eval_parameter(block, &space, p));
    }
    // coordinate the evaluation space
    let mut coords: BTreeMap<(usize, PdTerm), usize> = BTreeMap::new();
    let register = |v: &EvalVec, coords: &mut BTreeMap<(usize, PdTerm), usize>| {
        for k in v.keys() {
            let next = coords.len();
            coords.entry(k.clone()).or_insert(next);
        }
    };
    for v in &vectors {
        register(v, &mut coords);
    }

    // operator space basis
    let to_row = |v: &EvalVec, coords: &BTreeMap<(usize, PdTerm), usize>| -> Vec<Rat> {
        let mut row = vec![Rat::from_integer(0.into()); coords.len()];
        for (k, c) in v {
            row[coords[k]] = c.clone();
        }
        row
    };

    // expansion of the generator actions on the input basis:
    // translation_inputs[k][b] and gl_inputs[i*d+j][b] list the pairs
    // (a, kappa) with  g . (basis b) = sum kappa_a (basis a)
    let expand_input_actions = || -> (Vec<Vec<Vec<(usize, Rat)>>>, Vec<Vec<Vec<(usize, Rat)>>>) {
        let mut tr: Vec<Vec<Vec<(usize, Rat)>>> =
            vec![vec![Vec::new(); space.inputs.len()]; d];
        let mut gl: Vec<Vec<Vec<(usize, Rat)>>> =
            vec![vec![Vec::new(); space.inputs.len()]; d * d];
        for (b, tuple) in space.inputs.iter().enumerate() {
            for (vpos, (set, m)) in tuple.iter().enumerate() {
                // D_k acts on the coefficient of the v-th input
                for k in 0..d {
                    if m.0[k] == 0 {
                        continue;
                    }
                    let mut m2 = m.0.clone();
                    m2[k] -= 1;
                    let mut t2 = tuple.clone();
                    t2[vpos] = (set.clone(), Monomial(m2));
                    if let Some(&a) = space.index.get(&t2) {
                        tr[k][b].push((a, Rat::from_integer((m.0[k] as i64).into())));
                    }
                }
                for i in 0..d {
                    for j in 0..d {
                        // coefficient part: e_ij t^m = m_j t^{m - e_j + e_i}
                        if m.0[j] > 0 {
                            let mut m2 = m.0.clone();
                            m2[j] -= 1;
                            m2[i] += 1;
                            let mut t2 = tuple.clone();
                            t2[vpos] = (set.clone(), Monomial(m2));
                            if let Some(&a) = space.index.get(&t2) {
                                gl[i * d + j][b]
                                    .push((a, Rat::from_integer((m.0[j] as i64).into())));
                            }
                        }
                        // wedge part: e_ij d_i = -d_j on each factor
                        for (r, &sidx) in set.iter().enumerate() {
                            if sidx != i {
                                continue;
                            }
                            let mut set2 = set.clone();
                            set2[r] = j;
                            let mut sign = -1i32;
                            let mut sorted = set2.clone();
                            for x in 1..sorted.len() {
                                let mut y = x;
                                while y > 0 && sorted[y - 1] > sorted[y] {
                                    sorted.swap(y - 1, y);
                                    sign = -sign;
                                    y -= 1;
                                }
                            }
                            if sorted.windows(2).any(|w| w[0] == w[1]) {
                                continue;
                            }
                            let mut t2 = tuple.clone();
                            t2[vpos] = (sorted, m.clone());
                            if let Some(&a) = space.index.get(&t2) {
                                gl[i * d + j][b].push((
                                    a,
                                    Rat::from_integer((sign as i64).into()),
                                ));
                            }
                        }
                    }
                }
            }
        }
        (tr, gl)
    };
    let (tr_inputs, gl_inputs) = expand_input_actions();

    // rows of the evaluation vector by input index, for gathering
    let rows_of = |v: &EvalVec| -> BTreeMap<usize, Vec<(PdTerm, Rat)>> {
        let mut rows: BTreeMap<usize, Vec<(PdTerm, Rat)>> = BTreeMap::new();
        for ((idx, term), c) in v {
            rows.entry(*idx).or_default().push((term.clone(), c.clone()));
        }
        rows
    };

    // the affine/linear actions on evaluation vectors:
    // (g Phi)(b) = g(Phi(b)) - Phi(g b)
    let act_translation = |v: &EvalVec, k: usize| -> EvalVec {
        let mut out = EvalVec::new();
        // output-side derivative
        for ((idx, term), c) in v {
            let (mono, word) = term;
            if mono.0[k] > 0 {
                let mut e = mono.0.clone();
                e[k] -= 1;
                add_eval(
                    &mut out,
                    (*idx, (Monomial(e), word.clone())),
                    c * Rat::from_integer((mono.0[k] as i64).into()),
                );
            }
        }
        // input side, gathered from the action expansion
        let rows = rows_of(v);
        for (b, expansion) in tr_inputs[k].iter().enumerate() {
            for (a, kappa) in expansion {
                if let Some(row) = rows.get(a) {
                    for (term, c) in row {
                        add_eval(&mut out, (b, term.clone()), -(c * kappa));
                    }
                }
            }
        }
        normalize_eval(&mut out);
        out
    };

    let act_gl = |v: &EvalVec, i: usize, j: usize| -> EvalVec {
        let mut out = EvalVec::new();
        for ((idx, term), c) in v {
            let (mono, word) = term;
            // e_ij t^m = m_j t^{m - e_j + e_i}
            if mono.0[j] > 0 {
                let mut e = mono.0.clone();
                e[j] -= 1;
                e[i] += 1;
                add_eval(
                    &mut out,
                    (*idx, (Monomial(e), word.clone())),
                    c * Rat::from_integer((mono.0[j] as i64).into()),
                );
            }
            // e_ij d^b = -b_i d^{b - e_i + e_j} on each slot
            for (l, slot) in word.iter().enumerate() {
                if slot.0[i] == 0 {
                    continue;
                }
                let mut s2 = slot.0.clone();
                s2[i] -= 1;
                s2[j] += 1;
                let mut w2 = word.clone();
                w2[l] = Monomial(s2);
                add_eval(
                    &mut out,
                    (*idx, (mono.clone(), w2)),
                    -(c * Rat::from_integer((slot.0[i] as i64).into())),
                );
            }
        }
        let rows = rows_of(v);
        for (b, expansion) in gl_inputs[i * d + j].iter().enumerate() {
            for (a, kappa) in expansion {
                if let Some(row) = rows.get(a) {
                    for (term, c) in row {
                        add_eval(&mut out, (b, term.clone()), -(c * kappa));
                    }
                }
            }
        }
        normalize_eval(&mut out);
        out
    };

    // register coordinates also for acted vectors
    for v in &vectors {
        for k in 0..d {
            register(&act_translation(v, k), &mut coords);
        }
        for i in 0..d {
            for j in 0..d {
                register(&act_gl(v, i, j), &mut coords);
            }
        }
    }

    // operator-space basis from the parameters
    let mut op_mat = SparseMat::zero(vectors.len(), coords.len());
    for (r, v) in vectors.iter().enumerate() {
        for (k, c) in v {
            op_mat.set(r, coords[k], c.clone());
        }
    }
    let op_basis: Vec<Vec<Rat>> = {
        let mut m = op_mat.clone();
        let pivots = m.rref_in_place();
        (0..pivots.len()).map(|r| {
            (0..coords.len()).map(|c| m.get(r, c)).collect()
        }).collect()
    };
    let op_dim = op_basis.len();

    // invariance equations as rows over the operator-space coordinates:
    // for each basis vector b and each generator g, expand g(b) in the
    // evaluation coordinates and require the combination to vanish
    let basis_to_eval = |coeffs: &[Rat]| -> EvalVec {
        let mut v = EvalVec::new();
        for (bi, c) in coeffs.iter().enumerate() {
            if num_traits::Zero::is_zero(c) {
                continue;
            }
            for (key, idx) in &coords {
                let x = &op_basis[bi][*idx];
                if !num_traits::Zero::is_zero(x) {
                    add_eval(&mut v, key.clone(), c * x);
                }
            }
        }
        normalize_eval(&mut v);
        v
    };
    let _ = &basis_to_eval;

    // generator matrices acting on op-space coordinates: g(b_i) expressed
    // in evaluation coordinates (they stay inside the operator space)
    let mut translation_rows: Vec<Vec<Rat>> = Vec::new();
    let mut gl_rows: Vec<Vec<Rat>> = Vec::new();
    for (bi, b) in op_basis.iter().enumerate() {
        let mut bv = EvalVec::new();
        for (key, idx) in &coords {
            if !num_traits::Zero::is_zero(&b[*idx]) {
                add_eval(&mut bv, key.clone(), b[*idx].clone());
            }
        }
        let _ = bi;
        for k in 0..d {
            let acted = act_translation(&bv, k);
            translation_rows.push(to_row(&acted, &coords));
        }
        for i in 0..d {
            for j in 0..d {
                let acted = act_gl(&bv, i, j);
                gl_rows.push(to_row(&acted, &coords));
            }
        }
    }
    // kernel of c -> sum_i c_i g(b_i): matrix with columns = basis index
    let build_eq_mat = |rows: &[Vec<Rat>], per_basis: usize| -> SparseMat {
        // rows are grouped per basis vector: rows[bi * per_basis + g]
        let mut m = SparseMat::zero(per_basis * coords.len(), op_dim);
        for bi in 0..op_dim {
            for g in 0..per_basis {
                let row = &rows[bi * per_basis + g];
                for (cidx, val) in row.iter().enumerate() {
                    if !num_traits::Zero::is_zero(val) {
                        m.add_to(g * coords.len() + cidx, bi, val);
                    }
                }
            }
        }
        m
    };
    let tr_mat = build_eq_mat(&translation_rows, d);
    let gl_mat = build_eq_mat(&gl_rows, d * d);
    // affine: stack both
    let mut affine = SparseMat::zero(tr_mat.rows() + gl_mat.rows(), op_dim);
    for r in 0..tr_mat.rows() {
        for (c, v) in tr_mat.row(r) {
            affine.set(r, *c, v.clone());
        }
    }
    for r in 0..gl_mat.rows() {
        for (c, v) in gl_mat.row(r) {
            affine.set(tr_mat.rows() + r, *c, v.clone());
        }
    }
    let rank_invariants = op_dim - affine.rank();
    let rank_gl_invariants = op_dim - gl_mat.rank();

    // graphs: all admissible graphs with the given degrees (loops
    // included: their operators are affine-invariant and in the span)
    let graphs = enumerate_graphs(&block.out_degrees, block.n, true, max_graphs)?;
    let graphs_considered = graphs.len();
    let mut graph_vecs: Vec<EvalVec> = Vec::new();
    'graphs: for g in &graphs {
        let mut v = EvalVec::new();
        for (idx, tuple) in space.inputs.iter().enumerate() {
            let op = evaluate_graph_op(g, &space.input_polyvectors(tuple))?;
            for (term, c) in op.terms() {
                // outside-block outputs disqualify the graph
                if term.0.degree() > block.coeff_bound + block.input_deriv_bound
                    || term.1.iter().any(|s| s.degree() > block.slot_bound)
                {
                    continue 'graphs;
                }
                add_eval(&mut v, (idx, term.clone()), c.clone());
            }
        }
        normalize_eval(&mut v);
        if !v.is_empty() {
            graph_vecs.push(v);
        }
    }
    let graphs_in_block = graph_vecs.len();
    // coordinates may be incomplete for graph vectors outside the span;
    // extend and rebuild rows
    for v in &graph_vecs {
        register(v, &mut coords);
    }
    let width = coords.len();
    let mut all = SparseMat::zero(graph_vecs.len(), width);
    for (r, v) in graph_vecs.iter().enumerate() {
        for (k, c) in v {
            all.set(r, coords[k], c.clone());
        }
    }
    let rank_graphs = all.rank();

    // containment: invariant basis vectors union graphs has the rank of
    // the invariant space alone exactly when graphs are contained; the
    // invariant space is cut out inside the operator space, so express
    // its basis in evaluation coordinates
    let inv_coeff_basis = affine.kernel_basis();
    let mut combined = SparseMat::zero(inv_coeff_basis.len() + graph_vecs.len(), width);
    for (r, coeffs) in inv_coeff_basis.iter().enumerate() {
        for (bi, c) in coeffs.iter().enumerate() {
            if num_traits::Zero::is_zero(c) {
                continue;
            }
            for (key, idx) in &coords {
                if *idx >= op_basis[bi].len() {
                    continue;
                }
                let x = &op_basis[bi][*idx];
                if !num_traits::Zero::is_zero(x) {
                    combined.add_to(r, coords[key], &(c * x));
                }
            }
        }
    }
    for (r, v) in graph_vecs.iter().enumerate() {
        for (k, c) in v {
            combined.set(inv_coeff_basis.len() + r, coords[k], c.clone());
        }
    }
    let contained = combined.rank() == rank_invariants;
    Ok(SpanReport {
        rank_graphs,
        rank_invariants,
        rank_gl_invariants,
        graphs_considered,
        graphs_in_block,
        contained,
        equal: contained && rank_graphs == rank_invariants,
    })
}

/// Parameters spanning the block: coefficient monomial, per-vertex input
/// derivative and component indices, output slots.
#[derive(Debug, Clone)]
struct BlockParam {
    coeff: Monomial,
    per_vertex: Vec<(Monomial, Vec<usize>)>,
    slots: DiffWord,
}

fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(d: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(d, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(d, k, 0, &mut Vec::new(), &mut out);
    out
}

fn monomials_up_to(d: usize, max: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    fn rec(d: usize, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if cur.len() == d {
            out.push(Monomial(cur.clone()));
            return;
        }
        let used: u32 = cur.iter().sum();
        for e in 0..=(max - used) {
            cur.push(e);
            rec(d, max, cur, out);
            cur.pop();
        }
    }
    rec(d, max, &mut Vec::new(), &mut out);
    out.sort();
    out
}

fn index_tuples(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for prefix in &out {
            for i in 0..d {
                let mut p = prefix.clone();
                p.push(i);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn block_parameters(block: &SpanBlock) -> Vec<BlockParam> {
    let d = block.d;
    let coeffs = monomials_up_to(d, block.coeff_bound);
    let derivs = monomials_up_to(d, block.input_deriv_bound);
    let slots_choices = monomials_up_to(d, block.slot_bound);
    let mut per_vertex_choices: Vec<Vec<(Monomial, Vec<usize>)>> = Vec::new();
    for &deg in &block.out_degrees {
        let mut list = Vec::new();
        for delta in &derivs {
            for comps in index_tuples(d, deg) {
                list.push((delta.clone(), comps));
            }
        }
        per_vertex_choices.push(list);
    }
    let mut vertex_combos: Vec<Vec<(Monomial, Vec<usize>)>> = vec![vec![]];
    for list in &per_vertex_choices {
        let mut next = Vec::new();
        for prefix in &vertex_combos {
            for item in list {
                let mut p = prefix.clone();
                p.push(item.clone());
                next.push(p);
            }
        }
        vertex_combos = next;
    }
    let mut slot_combos: Vec<DiffWord> = vec![vec![]];
    for _ in 0..block.n {
        let mut next = Vec::new();
        for prefix in &slot_combos {
            for s in &slots_choices {
                let mut p = prefix.clone();
                p.push(s.clone());
                next.push(p);
            }
        }
        slot_combos = next;
    }
    let mut out = Vec::new();
    for c in &coeffs {
        for vs in &vertex_combos {
            for sl in &slot_combos {
                out.push(BlockParam {
                    coeff: c.clone(),
                    per_vertex: vs.clone(),
                    slots: sl.clone(),
                });
            }
        }
    }
    out
}

fn eval_parameter(block: &SpanBlock, space: &EvalSpace, p: &BlockParam) -> EvalVec {
    let d = block.d;
    let mut out = EvalVec::new();
    for (idx, tuple) in space.inputs.iter().enumerate() {
        // product over vertices of d^{delta} a_v^{comps}
        let mut poly: BTreeMap<Monomial, Rat> =
            BTreeMap::from([(Monomial::one(d), Rat::from_integer(1.into()))]);
        let mut zero = false;
        for (v, (delta, comps)) in p.per_vertex.iter().enumerate() {
            let a = PolyVector::from_terms(
                d,
                vec![(
                    tuple[v].1.clone(),
                    tuple[v].0.clone(),
                    Rat::from_integer(1.into()),
                )],
            );
            let comp = component(&a, comps);
            let der = poly_deriv_multi(&comp, delta);
            if der.is_empty() {
                zero = true;
                break;
            }
            let mut next = BTreeMap::new();
            for (m1, c1) in &poly {
                for (m2, c2) in &der {
                    *next
                        .entry(m1.mul(m2))
                        .or_insert_with(|| Rat::from_integer(0.into())) += c1 * c2;
                }
            }
            poly = next;
        }
        if zero {
            continue;
        }
        for (m, c) in poly {
            add_eval(
                &mut out,
                (idx, (m.mul(&p.coeff), p.slots.clone())),
                c,
            );
        }
    }
    normalize_eval(&mut out);
    out
}
