//! Discrete vector fields on cubical complexes and reduction to the
//! critical (Morse) complex.
//!
//! A field is a set of arrows `source → target` where the source is a
//! regular face of the target one dimension up. Cells in no arrow are
//! critical. For an acyclic field the critical cells, with the boundary
//! induced along alternating paths, form a chain complex with the same
//! homology as the original one.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::cubical::{build_complex, ChainBoundaryMatrix, CubicalComplex};
use crate::homology::ChainComplex;
use crate::image::BinaryImage;

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DvfError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cell {0} does not exist in the complex")]
    UnknownCell(usize),
    #[error("cell {source_cell} is not a regular face of cell {target}")]
    NotARegularFace { source_cell: usize, target: usize },
    #[error("cell {0} appears in more than one pair")]
    RepeatedCell(usize),
    #[error("field has a closed V-path through cell {0}")]
    Cycle(usize),
    #[error("integer overflow while accumulating the induced boundary")]
    Overflow,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscreteVectorField {
    pairs: Vec<(usize, usize)>,
}

impl DiscreteVectorField {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Fixture format: one `pair <source> <target>` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, t) in &self.pairs {
            let _ = writeln!(out, "pair {s} {t}");
        }
        out
    }
}

pub fn parse_field(text: &str) -> Result<DiscreteVectorField, DvfError> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |reason: &str| DvfError::Parse {
            line: i + 1,
            reason: reason.to_string(),
        };
        if toks.len() != 3 || toks[0] != "pair" {
            return Err(err("expected `pair <source> <target>`"));
        }
        let s = toks[1].parse().map_err(|_| err("bad source index"))?;
        let t = toks[2].parse().map_err(|_| err("bad target index"))?;
        pairs.push((s, t));
    }
    Ok(DiscreteVectorField { pairs })
}

/// A validated field in lookup form.
#[derive(Debug, Clone)]
struct FieldIndex {
    /// For a source cell: its target. For a target: its source.
    partner: Vec<u32>,
    /// Whether the cell is the source of its pair.
    is_source: Vec<bool>,
    /// Topological rank of source cells along V-paths (predecessors first).
    rank: Vec<u32>,
}

impl FieldIndex {
    fn is_critical(&self, id: usize) -> bool {
        self.partner[id] == NONE
    }
}

fn index_field(cx: &CubicalComplex, field: &DiscreteVectorField) -> Result<FieldIndex, DvfError> {
    let n = cx.len();
    let mut partner = vec![NONE; n];
    let mut is_source = vec![false; n];
    for &(s, t) in &field.pairs {
        if s >= n {
            return Err(DvfError::UnknownCell(s));
        }
        if t >= n {
            return Err(DvfError::UnknownCell(t));
        }
        let regular = cx.dim(t) == cx.dim(s) + 1 && cx.boundary(t).iter().any(|&(f, sign)| f == s && sign.abs() == 1);
        if !regular {
            return Err(DvfError::NotARegularFace {
                source_cell: s,
                target: t,
            });
        }
        for c in [s, t] {
            if partner[c] != NONE {
                return Err(DvfError::RepeatedCell(c));
            }
        }
        partner[s] = t as u32;
        partner[t] = s as u32;
        is_source[s] = true;
    }

    // Kahn's algorithm on the V-path digraph: σ → σ' whenever σ' is another
    // face of V(σ) and is itself a source.
    let (partner_ref, source_ref) = (&partner, &is_source);
    let successors = move |s: usize| {
        let t = partner_ref[s] as usize;
        cx.boundary(t)
            .into_iter()
            .map(|(f, _)| f)
            .filter(move |&f| f != s && source_ref[f])
    };
    let mut indegree = vec![0u32; n];
    for &(s, _) in &field.pairs {
        for f in successors(s) {
            indegree[f] += 1;
        }
    }
    let mut queue: Vec<usize> = field
        .pairs
        .iter()
        .map(|&(s, _)| s)
        .filter(|&s| indegree[s] == 0)
        .collect();
    queue.sort_unstable();
    let mut rank = vec![NONE; n];
    let mut next = 0u32;
    let mut head = 0;
    while head < queue.len() {
        let s = queue[head];
        head += 1;
        rank[s] = next;
        next += 1;
        for f in successors(s) {
            indegree[f] -= 1;
            if indegree[f] == 0 {
                queue.push(f);
            }
        }
    }
    if (next as usize) < field.pairs.len() {
        let stuck = field
            .pairs
            .iter()
            .map(|&(s, _)| s)
            .find(|&s| rank[s] == NONE)
            .expect("some source was not ranked");
        return Err(DvfError::Cycle(stuck));
    }
    Ok(FieldIndex {
        partner,
        is_source,
        rank,
    })
}

/// Checks that every pair is face-regular, no cell repeats and no V-path closes.
pub fn validate_field(cx: &CubicalComplex, field: &DiscreteVectorField) -> Result<(), DvfError> {
    index_field(cx, field).map(|_| ())
}

/// Greedy acyclic matching.
///
/// Vertices are matched along a breadth-first spanning forest of the
/// 1-skeleton, each with the edge to its parent; one root per component
/// stays critical. Squares are then collapsed from the free side: an
/// unmatched edge with exactly one unmatched square coface is matched with
/// it, and the search continues through that square's other edges. In a
/// planar complex this leaves `b0` critical vertices, `b1` critical edges
/// and no critical squares.
pub fn build_greedy_dvf(cx: &CubicalComplex) -> DiscreteVectorField {
    let n = cx.len();
    let mut paired = vec![false; n];
    let mut pairs = Vec::new();
    let mut queue = VecDeque::new();

    let mut seen = vec![false; n];
    for &root in cx.cells_of_dim(0) {
        let root = root as usize;
        if seen[root] {
            continue;
        }
        seen[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            for (e, _) in cx.coboundary(v) {
                if paired[e] {
                    continue;
                }
                let Some(w) = cx.boundary(e).iter().map(|&(f, _)| f).find(|&f| f != v) else {
                    continue;
                };
                if !seen[w] {
                    seen[w] = true;
                    paired[w] = true;
                    paired[e] = true;
                    pairs.push((w, e));
                    queue.push_back(w);
                }
            }
        }
    }

    let free_square = |e: usize, paired: &[bool]| {
        let mut open = cx.coboundary(e).into_iter().map(|(s, _)| s).filter(|&s| !paired[s]);
        match (open.next(), open.next()) {
            (Some(s), None) => Some(s),
            _ => None,
        }
    };
    let try_collapse =
        |e: usize, paired: &mut Vec<bool>, pairs: &mut Vec<(usize, usize)>, queue: &mut VecDeque<usize>| {
            if paired[e] {
                return;
            }
            if let Some(s) = free_square(e, paired) {
                paired[e] = true;
                paired[s] = true;
                pairs.push((e, s));
                queue.push_back(s);
            }
        };
    for &e in cx.cells_of_dim(1) {
        let e = e as usize;
        if paired[e] || cx.coboundary(e).len() != 1 {
            continue;
        }
        try_collapse(e, &mut paired, &mut pairs, &mut queue);
        while let Some(s) = queue.pop_front() {
            for (f, _) in cx.boundary(s) {
                try_collapse(f, &mut paired, &mut pairs, &mut queue);
            }
        }
    }
    DiscreteVectorField { pairs }
}

/// Critical cells with the boundary induced by a field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalComplex {
    /// Global ids of the critical cells of each dimension, ascending.
    pub cells: [Vec<usize>; 3],
    /// Induced `∂_1`, `∂_2` between critical cells (positions within `cells`).
    pub d1: ChainBoundaryMatrix,
    pub d2: ChainBoundaryMatrix,
}

impl CriticalComplex {
    pub fn count(&self, dim: usize) -> usize {
        self.cells[dim].len()
    }

    pub fn chain_complex(&self) -> ChainComplex {
        ChainComplex {
            sizes: [self.count(0), self.count(1), self.count(2)],
            d1: self.d1.clone(),
            d2: self.d2.clone(),
        }
    }

    pub fn betti_mod2(&self) -> (usize, usize) {
        self.chain_complex().betti_mod2()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.count(0) as i64 - self.count(1) as i64 + self.count(2) as i64
    }
}

/// Reduces `cx` to its critical complex.
///
/// Each critical cell's boundary is pushed along the field by elementary
/// reductions: the earliest (in V-path order) paired source `σ` left in the
/// chain is cancelled by subtracting `coef · ε · ∂V(σ)`, where `ε = ±1` is
/// the incidence of `σ` in `V(σ)`. Faces that are targets of the field drop
/// out; what remains lies on critical cells.
pub fn apply_field(cx: &CubicalComplex, field: &DiscreteVectorField) -> Result<CriticalComplex, DvfError> {
    let idx = index_field(cx, field)?;
    let mut cells: [Vec<usize>; 3] = Default::default();
    let mut position = vec![NONE; cx.len()];
    for (d, list) in cells.iter_mut().enumerate() {
        for &id in cx.cells_of_dim(d) {
            if idx.is_critical(id as usize) {
                position[id as usize] = list.len() as u32;
                list.push(id as usize);
            }
        }
    }
    let induced = |k: usize| -> Result<ChainBoundaryMatrix, DvfError> {
        let mut columns = Vec::with_capacity(cells[k].len());
        for &c in &cells[k] {
            columns.push(flow_boundary(cx, &idx, &position, c)?);
        }
        Ok(ChainBoundaryMatrix {
            dim: k,
            rows: cells[k - 1].len(),
            columns,
        })
    };
    let d1 = induced(1)?;
    let d2 = induced(2)?;
    Ok(CriticalComplex { cells, d1, d2 })
}

fn flow_boundary(
    cx: &CubicalComplex,
    idx: &FieldIndex,
    position: &[u32],
    cell: usize,
) -> Result<Vec<(u32, i64)>, DvfError> {
    let mut coef: HashMap<usize, i64> = HashMap::new();
    let mut heap: BinaryHeap<Reverse<(u32, usize)>> = BinaryHeap::new();
    let mut out: Vec<(u32, i64)> = Vec::new();

    let push = |coef: &mut HashMap<usize, i64>,
                heap: &mut BinaryHeap<Reverse<(u32, usize)>>,
                f: usize,
                v: i64|
     -> Result<(), DvfError> {
        if idx.partner[f] != NONE && !idx.is_source[f] {
            return Ok(()); // target cells vanish in the quotient
        }
        let e = coef.entry(f).or_insert(0);
        if *e == 0 && idx.is_source[f] {
            heap.push(Reverse((idx.rank[f], f)));
        }
        *e = e.checked_add(v).ok_or(DvfError::Overflow)?;
        Ok(())
    };

    for (f, s) in cx.boundary(cell) {
        push(&mut coef, &mut heap, f, s as i64)?;
    }
    while let Some(Reverse((_, s))) = heap.pop() {
        let a = coef.remove(&s).unwrap_or(0);
        if a == 0 {
            continue;
        }
        let t = idx.partner[s] as usize;
        let faces = cx.boundary(t);
        let eps = faces
            .iter()
            .find(|&&(f, _)| f == s)
            .map(|&(_, e)| e as i64)
            .expect("regular face");
        let factor = a.checked_mul(eps).ok_or(DvfError::Overflow)?;
        for (f, sign) in faces {
            if f == s {
                continue;
            }
            let delta = factor
                .checked_mul(sign as i64)
                .and_then(i64::checked_neg)
                .ok_or(DvfError::Overflow)?;
            push(&mut coef, &mut heap, f, delta)?;
        }
    }
    for (f, v) in coef {
        if v != 0 && idx.is_critical(f) {
            out.push((position[f], v));
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Betti numbers through the greedy reduction.
pub fn reduced_betti(bin: &BinaryImage) -> (usize, usize) {
    let cx = build_complex(bin);
    let field = build_greedy_dvf(&cx);
    apply_field(&cx, &field)
        .expect("greedy fields are valid by construction")
        .betti_mod2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::homology::betti_mod2;
    use proptest::prelude::*;

    /// Independent path-sum oracle: expands every alternating path
    /// recursively instead of cancelling in V-path order.
    fn path_sum(cx: &CubicalComplex, field: &DiscreteVectorField, cell: usize) -> HashMap<usize, i64> {
        let mut partner = HashMap::new();
        let mut sources = std::collections::HashSet::new();
        for &(s, t) in field.pairs() {
            partner.insert(s, t);
            partner.insert(t, s);
            sources.insert(s);
        }
        fn psi(
            cx: &CubicalComplex,
            partner: &HashMap<usize, usize>,
            sources: &std::collections::HashSet<usize>,
            s: usize,
            weight: i64,
            acc: &mut HashMap<usize, i64>,
        ) {
            match partner.get(&s) {
                None => *acc.entry(s).or_insert(0) += weight,
                Some(&t) if sources.contains(&s) => {
                    let faces = cx.boundary(t);
                    let eps = faces.iter().find(|f| f.0 == s).unwrap().1 as i64;
                    for (f, sign) in faces {
                        if f != s {
                            psi(cx, partner, sources, f, -weight * eps * sign as i64, acc);
                        }
                    }
                }
                Some(_) => {}
            }
        }
        let mut acc = HashMap::new();
        for (f, sign) in cx.boundary(cell) {
            psi(cx, &partner, &sources, f, sign as i64, &mut acc);
        }
        acc.retain(|_, v| *v != 0);
        acc
    }

    #[test]
    fn annulus_fixture_leaves_a_vertex_and_an_edge() {
        let cx = build_complex(&fixtures::annulus_mask());
        let field = fixtures::annulus_field();
        assert_eq!(field.len(), 23);
        let crit = apply_field(&cx, &field).unwrap();
        assert_eq!((crit.count(0), crit.count(1), crit.count(2)), (1, 1, 0));
        let v = cx.cell(crit.cells[0][0]);
        let e = cx.cell(crit.cells[1][0]);
        assert_eq!((v.x, v.y), (0, 6));
        assert_eq!((e.x, e.y), (3, 2));
        assert_eq!(crit.betti_mod2(), (1, 1));
        // the critical edge is a cycle: its induced boundary vanishes
        assert!(crit.d1.columns[0].is_empty());
    }

    #[test]
    fn empty_field_is_identity() {
        let cx = build_complex(&fixtures::three_hole_mask());
        let crit = apply_field(&cx, &DiscreteVectorField::default()).unwrap();
        assert_eq!(crit.d1, cx.boundary_matrix(1));
        assert_eq!(crit.d2, cx.boundary_matrix(2));
        let empty = build_complex(&BinaryImage::empty(2, 2));
        assert!(build_greedy_dvf(&empty).is_empty());
    }

    #[test]
    fn greedy_on_single_pixel_and_annulus() {
        let one = build_complex(&BinaryImage::from_rows(&["1"]).unwrap());
        let crit = apply_field(&one, &build_greedy_dvf(&one)).unwrap();
        assert_eq!(crit.betti_mod2(), (1, 0));
        assert_eq!((crit.count(0), crit.count(1), crit.count(2)), (1, 0, 0));

        let ann = build_complex(&fixtures::annulus_mask());
        let field = build_greedy_dvf(&ann);
        validate_field(&ann, &field).unwrap();
        assert_eq!(apply_field(&ann, &field).unwrap().betti_mod2(), (1, 1));
        assert_eq!(reduced_betti(&fixtures::annulus_mask()), (1, 1));
        assert_eq!(reduced_betti(&fixtures::three_hole_mask()), (2, 3));
    }

    #[test]
    fn invalid_fields_are_rejected() {
        let cx = build_complex(&BinaryImage::from_rows(&["11"]).unwrap());
        // cells: row 0 = v0 e1 v2 e3 v4; row 1 = e5 s6 e7 s8 e9; row 2 = v10 ...
        let bad = |pairs: Vec<(usize, usize)>| apply_field(&cx, &DiscreteVectorField::new(pairs)).unwrap_err();
        assert_eq!(
            bad(vec![(0, 3)]),
            DvfError::NotARegularFace {
                source_cell: 0,
                target: 3
            }
        );
        assert_eq!(bad(vec![(1, 6), (0, 1)]), DvfError::RepeatedCell(1));
        assert_eq!(bad(vec![(0, 99)]), DvfError::UnknownCell(99));
        assert_eq!(
            bad(vec![(6, 1)]),
            DvfError::NotARegularFace {
                source_cell: 6,
                target: 1
            }
        );
        // v0→e1, v2→e7? e7 is vertical between (4,0)... use a genuine cycle:
        // around a single square the edges top→? squares only; build a vertex cycle instead
        let sq = build_complex(&BinaryImage::from_rows(&["1"]).unwrap());
        // v0 -e1-> v2 -e5-> v8 -e7-> v6 -e3-> v0 (ids: 0 1 2 / 3 4 5 / 6 7 8)
        let cyc = DiscreteVectorField::new(vec![(0, 1), (2, 5), (8, 7), (6, 3)]);
        assert!(matches!(apply_field(&sq, &cyc), Err(DvfError::Cycle(_))));
        assert!(matches!(validate_field(&sq, &cyc), Err(DvfError::Cycle(_))));
    }

    #[test]
    fn fixture_text_round_trip() {
        let f = fixtures::annulus_field();
        assert_eq!(parse_field(&f.to_text()).unwrap(), f);
        assert!(matches!(parse_field("pear 1 2"), Err(DvfError::Parse { line: 1, .. })));
        assert!(matches!(
            parse_field("# c\n\npair 1 x"),
            Err(DvfError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn induced_boundary_matches_path_sums_on_fixture() {
        let cx = build_complex(&fixtures::annulus_mask());
        let field = fixtures::annulus_field();
        let crit = apply_field(&cx, &field).unwrap();
        for k in 1..=2 {
            let m = if k == 1 { &crit.d1 } else { &crit.d2 };
            for (j, &c) in crit.cells[k].iter().enumerate() {
                let oracle = path_sum(&cx, &field, c);
                let got: HashMap<usize, i64> = m.columns[j]
                    .iter()
                    .map(|&(r, v)| (crit.cells[k - 1][r as usize], v))
                    .collect();
                assert_eq!(got, oracle);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn greedy_reduction_preserves_homology(bits in proptest::collection::vec(any::<bool>(), 144)) {
            let m = BinaryImage::new(12, 12, bits).unwrap();
            let cx = build_complex(&m);
            let field = build_greedy_dvf(&cx);
            prop_assert!(validate_field(&cx, &field).is_ok());
            let crit = apply_field(&cx, &field).unwrap();
            let (b0, b1) = crit.betti_mod2();
            prop_assert_eq!((b0, b1), betti_mod2(&cx));
            prop_assert!(crit.count(0) >= b0 && crit.count(1) >= b1);
            prop_assert_eq!(crit.euler_characteristic(), crate::cubical::euler_characteristic(&cx));
            prop_assert!(crit.d1.composes_to_zero(&crit.d2));
            for k in 1..=2 {
                let mat = if k == 1 { &crit.d1 } else { &crit.d2 };
                for (j, &c) in crit.cells[k].iter().enumerate() {
                    let oracle = path_sum(&cx, &field, c);
                    let got: HashMap<usize, i64> =
                        mat.columns[j].iter().map(|&(r, v)| (crit.cells[k - 1][r as usize], v)).collect();
                    prop_assert_eq!(got, oracle);
                }
            }
        }
    }
}
