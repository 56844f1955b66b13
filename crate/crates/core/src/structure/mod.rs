//! Structural invariants of a network: linkage classes, reversibility,
//! exact stoichiometric rank, deficiency, and positive conservation vectors.

pub mod exact;

use std::collections::{BTreeMap, HashSet};

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{Signed, ToPrimitive, Zero};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::network::{Complex, Crn};

/// Outcome of the positive conservation vector search.
///
/// `Undetermined` records that numerics failed to settle the question; it is
/// deliberately distinct from `Absent`, which is an exact verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum Conservation {
    Found(Vec<BigRational>),
    Absent,
    Undetermined(String),
}

impl Conservation {
    pub fn vector(&self) -> Option<&[BigRational]> {
        match self {
            Conservation::Found(v) => Some(v),
            _ => None,
        }
    }
}

impl Serialize for Conservation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Conservation::Found(v) => {
                let mut seq = serializer.serialize_seq(Some(v.len()))?;
                for x in v {
                    seq.serialize_element(&RationalJson(x))?;
                }
                seq.end()
            }
            Conservation::Absent => serializer.serialize_none(),
            Conservation::Undetermined(_) => serializer.serialize_str("undetermined"),
        }
    }
}

/// Serializes a rational as a `{"num", "den"}` pair (decimal strings, so
/// arbitrary precision survives JSON).
struct RationalJson<'a>(&'a BigRational);

impl Serialize for RationalJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Rational", 2)?;
        s.serialize_field("num", &self.0.numer().to_string())?;
        s.serialize_field("den", &self.0.denom().to_string())?;
        s.end()
    }
}

/// Reversibility flags of the complex digraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReversibilityFlags {
    pub reversible: bool,
    pub weakly_reversible: bool,
}

/// Aggregated structural data of a network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralReport {
    pub n_complexes: usize,
    pub linkage_classes: Vec<Vec<usize>>,
    pub n_linkage_classes: usize,
    pub stoich_rank: usize,
    pub deficiency: i64,
    pub weakly_reversible: bool,
    pub reversible: bool,
    pub conservation_vector: Conservation,
}

/// The complex digraph: node list plus one `reactant -> product` edge per
/// reaction (duplicates kept).
fn complex_graph(crn: &Crn) -> (Vec<Complex>, Vec<(usize, usize)>) {
    let complexes = crn.complexes();
    let index: BTreeMap<&Complex, usize> = complexes.iter().zip(0..).collect();
    let edges = crn
        .reactions()
        .iter()
        .map(|r| (index[r.reactant()], index[r.product()]))
        .collect();
    (complexes, edges)
}

/// Connected components of the complex graph with edges taken undirected.
/// Classes are ordered by smallest member; members are sorted.
pub fn linkage_classes(crn: &Crn) -> Vec<Vec<usize>> {
    let (complexes, edges) = complex_graph(crn);
    linkage_classes_of(complexes.len(), &edges)
}

fn linkage_classes_of(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); n];
    for &(a, b) in edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if class_of[start] != usize::MAX {
            continue;
        }
        let id = classes.len();
        let mut members = Vec::new();
        let mut stack = vec![start];
        class_of[start] = id;
        while let Some(v) = stack.pop() {
            members.push(v);
            for &w in &adjacency[v] {
                if class_of[w] == usize::MAX {
                    class_of[w] = id;
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        classes.push(members);
    }
    classes
}

/// Tarjan SCC on an adjacency list; returns the component id of each node.
pub(crate) fn scc_ids(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    struct State {
        next_index: usize,
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        comp_of: Vec<usize>,
        n_comps: usize,
    }

    fn connect(v: usize, adjacency: &[Vec<usize>], st: &mut State) {
        st.index[v] = Some(st.next_index);
        st.low[v] = st.next_index;
        st.next_index += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &w in &adjacency[v] {
            if st.index[w].is_none() {
                connect(w, adjacency, st);
                st.low[v] = st.low[v].min(st.low[w]);
            } else if st.on_stack[w] {
                st.low[v] = st.low[v].min(st.index[w].unwrap());
            }
        }
        if st.low[v] == st.index[v].unwrap() {
            let id = st.n_comps;
            st.n_comps += 1;
            loop {
                let w = st.stack.pop().expect("stack underflow");
                st.on_stack[w] = false;
                st.comp_of[w] = id;
                if w == v {
                    break;
                }
            }
        }
    }

    let mut adjacency = vec![Vec::new(); n];
    for &(a, b) in edges {
        adjacency[a].push(b);
    }
    let mut st = State {
        next_index: 0,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        comp_of: vec![usize::MAX; n],
        n_comps: 0,
    };
    for v in 0..n {
        if st.index[v].is_none() {
            connect(v, &adjacency, &mut st);
        }
    }
    st.comp_of
}

/// Reversibility and weak reversibility of the reaction digraph.
///
/// Reversible: every reaction's exact reverse is present. Weakly reversible:
/// every edge stays inside one strongly connected component.
pub fn reversibility_flags(crn: &Crn) -> ReversibilityFlags {
    let (complexes, edges) = complex_graph(crn);
    let edge_set: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let reversible = edge_set.iter().all(|&(a, b)| edge_set.contains(&(b, a)));
    let comp_of = scc_ids(complexes.len(), &edges);
    let weakly_reversible = edges.iter().all(|&(a, b)| comp_of[a] == comp_of[b]);
    ReversibilityFlags {
        reversible,
        weakly_reversible,
    }
}

/// Rank of an integer matrix over the rationals (fraction-free elimination).
pub fn exact_rank(matrix: &[Vec<i64>]) -> usize {
    exact::rank(matrix)
}

/// Deficiency: `n_complexes - n_linkage_classes - rank(stoichiometric matrix)`.
pub fn deficiency(crn: &Crn) -> i64 {
    let n = crn.complexes().len() as i64;
    let l = linkage_classes(crn).len() as i64;
    let rank = exact_rank(&crn.stoichiometric_matrix()) as i64;
    n - l - rank
}

/// Searches for a strictly positive rational `v` with `v^T Gamma = 0`.
///
/// Procedure: exact rational basis of the left null space; a floating-point
/// linear program maximizing the minimum component of a normalized
/// combination; the candidate is rationalized, scaled to the primitive
/// integer form, and re-verified exactly. Only that exact verification can
/// produce `Found`.
pub fn conservation_vector(crn: &Crn) -> Conservation {
    conservation_of_matrix(&crn.stoichiometric_matrix(), crn.n_species())
}

pub(crate) fn conservation_of_matrix(gamma: &[Vec<i64>], n_species: usize) -> Conservation {
    if n_species == 0 {
        return Conservation::Absent;
    }
    let basis = exact::left_nullspace(gamma);
    if basis.is_empty() {
        return Conservation::Absent;
    }

    let basis_f64: Vec<Vec<f64>> = basis
        .iter()
        .map(|v| v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
        .collect();
    if basis_f64.iter().flatten().any(|x| !x.is_finite()) {
        return Conservation::Undetermined("null space entries overflow f64".into());
    }

    // maximize t  s.t.  sum_k c_k B[k][i] >= t for each i,  sum_i v_i = 1.
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let t = problem.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let cs: Vec<_> = basis_f64
        .iter()
        .map(|_| problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for i in 0..n_species {
        let mut terms: Vec<_> = cs
            .iter()
            .enumerate()
            .map(|(k, &c)| (c, basis_f64[k][i]))
            .collect();
        terms.push((t, -1.0));
        problem.add_constraint(&terms, ComparisonOp::Ge, 0.0);
    }
    let sums: Vec<_> = cs
        .iter()
        .enumerate()
        .map(|(k, &c)| (c, basis_f64[k].iter().sum::<f64>()))
        .collect();
    problem.add_constraint(&sums, ComparisonOp::Eq, 1.0);

    let solution = match problem.solve() {
        Ok(solution) => solution,
        Err(minilp::Error::Infeasible) => return Conservation::Absent,
        Err(e) => return Conservation::Undetermined(format!("LP solver failed: {e}")),
    };
    // Positivity must survive exact re-verification, so the acceptance
    // threshold here only filters hopeless candidates.
    if solution.objective() < 1e-9 {
        return Conservation::Absent;
    }
    let coeffs: Vec<f64> = cs.iter().map(|&c| solution[c]).collect();

    for max_denominator in [1u64 << 16, 1 << 32, 1 << 48] {
        let mut v = vec![BigRational::zero(); n_species];
        for (k, &c) in coeffs.iter().enumerate() {
            let c = rationalize(c, max_denominator);
            for i in 0..n_species {
                v[i] += &c * &basis[k][i];
            }
        }
        let v = exact::primitive_integer_scale(&v);
        if v.iter().all(|x| x.is_positive()) && exact::is_left_null_vector(gamma, &v) {
            return Conservation::Found(v);
        }
    }
    Conservation::Undetermined("LP candidate failed exact positivity verification".into())
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// by continued fractions.
fn rationalize(x: f64, max_den: u64) -> BigRational {
    if !x.is_finite() {
        return BigRational::zero();
    }
    let negative = x < 0.0;
    let mut x = x.abs();
    let (mut h0, mut h1) = (BigInt::from(0), BigInt::from(1));
    let (mut k0, mut k1) = (BigInt::from(1), BigInt::from(0));
    let limit = BigInt::from(max_den);
    for _ in 0..64 {
        let a = x.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        if k2 > limit {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = x - a;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    if k1.is_zero() {
        return BigRational::zero();
    }
    let r = BigRational::new(h1, k1);
    if negative {
        -r
    } else {
        r
    }
}

/// Runs all structural analyses and aggregates them.
pub fn structural_report(crn: &Crn) -> StructuralReport {
    let complexes = crn.complexes();
    let classes = linkage_classes(crn);
    let gamma = crn.stoichiometric_matrix();
    let rank = exact_rank(&gamma);
    let flags = reversibility_flags(crn);
    let conservation = conservation_of_matrix(&gamma, crn.n_species());
    let deficiency = complexes.len() as i64 - classes.len() as i64 - rank as i64;
    StructuralReport {
        n_complexes: complexes.len(),
        n_linkage_classes: classes.len(),
        linkage_classes: classes,
        stoich_rank: rank,
        deficiency,
        weakly_reversible: flags.weakly_reversible,
        reversible: flags.reversible,
        conservation_vector: conservation,
    }
}
