//! H0 zigzag persistence over `X_1 ⊇ X_1∩X_2 ⊆ X_2 ⊇ ... ⊆ X_n`.
//!
//! Diagram positions run over `0..=2n-2`: even positions are slices, odd
//! positions are intersections of neighbouring slices.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::PersistenceError;
use crate::homology::gf2;
use crate::image::{label_components, BinaryImage, ComponentLabeling, Connectivity, ImageError};

/// An H0 class alive over diagram positions `birth..=death`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ZigzagInterval {
    pub birth: usize,
    pub death: usize,
}

impl ZigzagInterval {
    /// First slice covered, 1-based.
    pub fn start_slice(&self) -> usize {
        self.birth.div_ceil(2) + 1
    }

    /// Last slice covered, 1-based.
    pub fn end_slice(&self) -> usize {
        self.death / 2 + 1
    }

    /// `false` for classes living only in one intersection.
    pub fn covers_a_slice(&self) -> bool {
        self.start_slice() <= self.end_slice()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZigzagIntervals {
    pub intervals: Vec<ZigzagInterval>,
    pub slices: usize,
}

impl ZigzagIntervals {
    /// `(start, end)` slice spans, 1-based and inclusive.
    pub fn slice_spans(&self) -> Vec<(usize, usize)> {
        self.intervals
            .iter()
            .filter(|i| i.covers_a_slice())
            .map(|i| (i.start_slice(), i.end_slice()))
            .collect()
    }

    /// Intervals alive on slice `i` (1-based).
    pub fn alive_on_slice(&self, slice: usize) -> usize {
        let p = 2 * (slice - 1);
        self.intervals.iter().filter(|i| i.birth <= p && p <= i.death).count()
    }

    /// `start,end,birth_position,death_position`; intersection-only classes
    /// have an empty slice span.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("start,end,birth_position,death_position\n");
        for i in &self.intervals {
            if i.covers_a_slice() {
                let _ = writeln!(out, "{},{},{},{}", i.start_slice(), i.end_slice(), i.birth, i.death);
            } else {
                let _ = writeln!(out, ",,{},{}", i.birth, i.death);
            }
        }
        out
    }
}

/// First pixel of every label, indexed by label (0 unused).
fn representatives(lab: &ComponentLabeling) -> Vec<usize> {
    let mut rep = vec![usize::MAX; lab.count() as usize + 1];
    for (p, &l) in lab.labels().iter().enumerate() {
        if l != 0 && rep[l as usize] == usize::MAX {
            rep[l as usize] = p;
        }
    }
    rep
}

/// A basis vector of `H_0` at the current position: a set of components
/// (0-based labels, ascending) and the interval it belongs to.
struct Class {
    support: Vec<u32>,
    interval: usize,
}

/// Age order: classes born going backwards (odd positions) are older than
/// classes born going forwards; among backward births the later is older,
/// among forward births the earlier is older.
fn age_key(birth: usize) -> (bool, isize) {
    if birth % 2 == 1 {
        (false, -(birth as isize))
    } else {
        (true, birth as isize)
    }
}

fn low(v: &[u32]) -> Option<u32> {
    v.last().copied()
}

/// Interval decomposition of the H0 zigzag module over Z/2.
///
/// A basis of `H_0` is carried along the diagram, every vector tagged with
/// its interval. Into an intersection, the classes of the slice that are
/// independent of older ones modulo the image die; the rest are rewritten
/// as images, pulled back, and the kernel of the inclusion opens new
/// classes. Out of an intersection, a class whose image depends on the
/// images of older classes dies (elder rule) and components not reached
/// open new classes.
pub fn zigzag_h0(slices: &[BinaryImage]) -> Result<ZigzagIntervals, PersistenceError> {
    let first = slices.first().ok_or(PersistenceError::EmptySlices)?;
    let (w, h) = first.dimensions();
    for s in slices {
        if s.dimensions() != (w, h) {
            let (sw, sh) = s.dimensions();
            return Err(ImageError::DimensionMismatch(w, h, sw, sh).into());
        }
    }
    let mut intervals: Vec<ZigzagInterval> = Vec::new();
    let open = |intervals: &mut Vec<ZigzagInterval>, birth: usize| {
        intervals.push(ZigzagInterval {
            birth,
            death: usize::MAX,
        });
        intervals.len() - 1
    };
    let by_age = |basis: &mut Vec<Class>, intervals: &[ZigzagInterval]| {
        basis.sort_by_key(|c| age_key(intervals[c.interval].birth));
    };
    let mut scratch = Vec::new();

    let mut cur = label_components(first, Connectivity::Eight);
    let mut basis: Vec<Class> = (0..cur.count())
        .map(|l| Class {
            support: vec![l],
            interval: open(&mut intervals, 0),
        })
        .collect();

    for i in 0..slices.len() - 1 {
        let (p_slice, p_inter, p_next) = (2 * i, 2 * i + 1, 2 * i + 2);
        let inter = label_components(&slices[i].and(&slices[i + 1])?, Connectivity::Eight);
        let rep = representatives(&inter);
        let up: Vec<u32> = (1..rep.len()).map(|l| cur.labels()[rep[l]] - 1).collect();

        // backward: X_i ⊇ X_i ∩ X_{i+1}
        let mut hit = vec![false; cur.count() as usize];
        let mut first_pre = vec![u32::MAX; cur.count() as usize];
        for (c, &u) in up.iter().enumerate() {
            hit[u as usize] = true;
            if first_pre[u as usize] == u32::MAX {
                first_pre[u as usize] = c as u32;
            }
        }
        by_age(&mut basis, &intervals);
        let mut pivots: HashMap<u32, (Vec<u32>, Vec<u32>)> = HashMap::new();
        let mut next_basis = Vec::new();
        for class in basis {
            let mut quotient: Vec<u32> = class.support.iter().copied().filter(|&c| !hit[c as usize]).collect();
            let mut full = class.support;
            while let Some(l) = low(&quotient) {
                let Some((q, f)) = pivots.get(&l) else { break };
                gf2::xor_into(&mut quotient, q, &mut scratch);
                gf2::xor_into(&mut full, f, &mut scratch);
            }
            match low(&quotient) {
                Some(l) => {
                    intervals[class.interval].death = p_slice;
                    pivots.insert(l, (quotient, full));
                }
                None => {
                    let mut support: Vec<u32> = full.iter().map(|&c| first_pre[c as usize]).collect();
                    support.sort_unstable();
                    next_basis.push(Class {
                        support,
                        interval: class.interval,
                    });
                }
            }
        }
        for (c, &u) in up.iter().enumerate() {
            let f = first_pre[u as usize];
            if f != c as u32 {
                next_basis.push(Class {
                    support: vec![f, c as u32],
                    interval: open(&mut intervals, p_inter),
                });
            }
        }
        basis = next_basis;

        // forward: X_i ∩ X_{i+1} ⊆ X_{i+1}
        let next = label_components(&slices[i + 1], Connectivity::Eight);
        let down: Vec<u32> = (1..rep.len()).map(|l| next.labels()[rep[l]] - 1).collect();
        by_age(&mut basis, &intervals);
        let mut reduced: HashMap<u32, Vec<u32>> = HashMap::new();
        let mut next_basis = Vec::new();
        for class in basis {
            let mut image: Vec<u32> = Vec::new();
            for &c in &class.support {
                gf2::xor_into(&mut image, &[down[c as usize]], &mut scratch);
            }
            let mut r = image.clone();
            while let Some(l) = low(&r) {
                let Some(p) = reduced.get(&l) else { break };
                gf2::xor_into(&mut r, p, &mut scratch);
            }
            match low(&r) {
                None => intervals[class.interval].death = p_inter,
                Some(l) => {
                    reduced.insert(l, r);
                    next_basis.push(Class {
                        support: image,
                        interval: class.interval,
                    });
                }
            }
        }
        for m in 0..next.count() {
            if !reduced.contains_key(&m) {
                next_basis.push(Class {
                    support: vec![m],
                    interval: open(&mut intervals, p_next),
                });
            }
        }
        basis = next_basis;
        cur = next;
    }
    let last = 2 * (slices.len() - 1);
    for iv in &mut intervals {
        if iv.death == usize::MAX {
            iv.death = last;
        }
    }
    intervals.sort_unstable();
    Ok(ZigzagIntervals {
        intervals,
        slices: slices.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;
    use crate::persistence::{build_filtration, h0_barcode, Direction};
    use proptest::prelude::*;

    fn rows(r: &[&str]) -> BinaryImage {
        BinaryImage::from_rows(r).unwrap()
    }

    /// Component maps of the zigzag: spaces in position order and, for
    /// every odd position, the maps to its left and right neighbours.
    struct Diagram {
        dims: Vec<usize>,
        left: Vec<Vec<usize>>,
        right: Vec<Vec<usize>>,
    }

    fn diagram(slices: &[BinaryImage]) -> Diagram {
        let mut dims = Vec::new();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for i in 0..slices.len() {
            let a = label_components(&slices[i], Connectivity::Eight);
            dims.push(a.count() as usize);
            if i + 1 == slices.len() {
                break;
            }
            let b = label_components(&slices[i + 1], Connectivity::Eight);
            let x = label_components(&slices[i].and(&slices[i + 1]).unwrap(), Connectivity::Eight);
            let rep = representatives(&x);
            dims.push(x.count() as usize);
            left.push((1..rep.len()).map(|l| a.labels()[rep[l]] as usize - 1).collect());
            right.push((1..rep.len()).map(|l| b.labels()[rep[l]] as usize - 1).collect());
        }
        Diagram { dims, left, right }
    }

    fn rank(vectors: &[Vec<u32>], len: usize) -> usize {
        gf2::rank(vectors.to_vec(), len)
    }

    /// Null space over Z/2 of a dense matrix given as rows.
    fn nullspace(rows: &[Vec<u8>], n: usize) -> Vec<Vec<u8>> {
        let mut m: Vec<Vec<u8>> = rows.to_vec();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..n {
            let Some(p) = (r..m.len()).find(|&i| m[i][c] == 1) else {
                continue;
            };
            m.swap(r, p);
            for i in 0..m.len() {
                if i != r && m[i][c] == 1 {
                    let row = m[r].clone();
                    m[i].iter_mut().zip(row).for_each(|(a, b)| *a ^= b);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (0..n)
            .filter(|c| !pivots.contains(c))
            .map(|free| {
                let mut v = vec![0u8; n];
                v[free] = 1;
                for (i, &pc) in pivots.iter().enumerate() {
                    v[pc] = m[i][free];
                }
                v
            })
            .collect()
    }

    /// Rank of the limit-to-colimit map of the diagram restricted to [a, b].
    fn generalized_rank(d: &Diagram, a: usize, b: usize) -> usize {
        let mut offset = vec![0usize; b + 2];
        for p in a..=b {
            offset[p + 1] = offset[p] + d.dims[p];
        }
        let total = offset[b + 1];
        let at = |p: usize, c: usize| offset[p] + c;
        let mut arrows = Vec::new(); // (source pos, target pos, map)
        for q in (a..=b).filter(|q| q % 2 == 1) {
            let k = q / 2;
            if q > a {
                arrows.push((q, q - 1, &d.left[k]));
            }
            if q < b {
                arrows.push((q, q + 1, &d.right[k]));
            }
        }
        // limit: v with f(v_source) = v_target on every arrow
        let mut eqs = Vec::new();
        for &(s, t, f) in &arrows {
            for tc in 0..d.dims[t] {
                let mut row = vec![0u8; total];
                row[at(t, tc)] ^= 1;
                for (sc, &img) in f.iter().enumerate() {
                    if img == tc {
                        row[at(s, sc)] ^= 1;
                    }
                }
                eqs.push(row);
            }
        }
        let lim = nullspace(&eqs, total);
        // colimit relations: ι_s(e_c) = ι_t(e_f(c))
        let mut rel: Vec<Vec<u32>> = Vec::new();
        for &(s, t, f) in &arrows {
            for (sc, &img) in f.iter().enumerate() {
                let mut v = vec![at(s, sc) as u32, at(t, img) as u32];
                v.sort_unstable();
                rel.push(v);
            }
        }
        let base = rank(&rel, total);
        let mut with = rel.clone();
        for v in lim {
            let col: Vec<u32> = (offset[a]..offset[a + 1])
                .filter(|&i| v[i] == 1)
                .map(|i| i as u32)
                .collect();
            with.push(col);
        }
        rank(&with, total) - base
    }

    fn oracle(slices: &[BinaryImage]) -> Vec<ZigzagInterval> {
        let d = diagram(slices);
        let m = d.dims.len();
        let rk = |a: isize, b: usize| -> isize {
            if a < 0 || b >= m {
                0
            } else {
                generalized_rank(&d, a as usize, b) as isize
            }
        };
        let mut out = Vec::new();
        for a in 0..m {
            for b in a..m {
                let mult =
                    rk(a as isize, b) - rk(a as isize - 1, b) - rk(a as isize, b + 1) + rk(a as isize - 1, b + 1);
                assert!(mult >= 0);
                for _ in 0..mult {
                    out.push(ZigzagInterval { birth: a, death: b });
                }
            }
        }
        out.sort_unstable();
        out
    }

    #[test]
    fn identical_slices_span_everything() {
        let s = rows(&["1100", "0001", "1001"]);
        let z = zigzag_h0(&[s.clone(), s.clone(), s.clone(), s]).unwrap();
        assert_eq!(z.slice_spans(), vec![(1, 4), (1, 4), (1, 4)]);
    }

    #[test]
    fn disjoint_slices_give_singletons() {
        let a = rows(&["1010", "0000"]);
        let b = rows(&["0000", "0101"]);
        let z = zigzag_h0(&[a.clone(), b, a]).unwrap();
        let spans = z.slice_spans();
        assert_eq!(spans.len(), 6);
        assert!(spans.iter().all(|&(s, e)| s == e));
    }

    #[test]
    fn split_then_remerge_matches_module_decomposition() {
        // one bar, then two pieces, then joined again through a bridge
        let x1 = rows(&["11111", "00000", "00000"]);
        let x2 = rows(&["11011", "00000", "00000"]);
        let x3 = rows(&["11011", "01110", "00000"]);
        let slices = [x1, x2, x3];
        let z = zigzag_h0(&slices).unwrap();
        assert_eq!(z.intervals, oracle(&slices));
        assert_eq!(z.slice_spans(), vec![(1, 3), (2, 2)]);
        for (i, s) in slices.iter().enumerate() {
            assert_eq!(
                z.alive_on_slice(i + 1),
                label_components(s, Connectivity::Eight).count() as usize
            );
        }
    }

    #[test]
    fn intersection_only_classes() {
        // slices are connected, their intersection is not
        let a = rows(&["111", "100", "111"]);
        let b = rows(&["111", "001", "111"]);
        let slices = [a, b];
        let z = zigzag_h0(&slices).unwrap();
        assert_eq!(z.intervals, oracle(&slices));
        assert_eq!(
            z.intervals,
            vec![
                ZigzagInterval { birth: 0, death: 2 },
                ZigzagInterval { birth: 1, death: 1 }
            ]
        );
        assert_eq!(z.slice_spans(), vec![(1, 2)]);
        assert_eq!(z.to_csv(), "start,end,birth_position,death_position\n1,2,0,2\n,,1,1\n");
    }

    #[test]
    fn errors() {
        assert_eq!(zigzag_h0(&[]), Err(PersistenceError::EmptySlices));
        let r = zigzag_h0(&[BinaryImage::empty(2, 2), BinaryImage::empty(3, 2)]);
        assert!(matches!(
            r,
            Err(PersistenceError::Image(ImageError::DimensionMismatch(..)))
        ));
    }

    fn nested_stack(gray: &GrayImage, n: usize) -> Vec<BinaryImage> {
        (0..n)
            .map(|i| BinaryImage::from_fn(gray.width(), gray.height(), |x, y| (gray.get(x, y) as usize) <= i))
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn monotone_stack_reproduces_filtration(data in proptest::collection::vec(0u8..6, 36)) {
            let g = GrayImage::new(6, 6, data).unwrap();
            let n = 4;
            let stack = nested_stack(&g, n);
            let z = zigzag_h0(&stack).unwrap();
            let f = build_filtration(&g, &[0, 1, 2, 3], Direction::Sublevel).unwrap();
            let mut from_filtration: Vec<(usize, usize)> = h0_barcode(&f)
                .bars
                .iter()
                .map(|b| (b.birth + 1, b.death.unwrap_or(n)))
                .collect();
            from_filtration.sort_unstable();
            prop_assert_eq!(z.slice_spans(), from_filtration);
        }

        #[test]
        fn matches_module_decomposition(bits in proptest::collection::vec(any::<bool>(), 4 * 20)) {
            let slices: Vec<BinaryImage> = bits.chunks(20).map(|c| BinaryImage::new(5, 4, c.to_vec()).unwrap()).collect();
            prop_assert_eq!(zigzag_h0(&slices).unwrap().intervals, oracle(&slices));
        }

        #[test]
        fn alive_counts_match_slice_components(bits in proptest::collection::vec(any::<bool>(), 3 * 25)) {
            let slices: Vec<BinaryImage> = bits.chunks(25).map(|c| BinaryImage::new(5, 5, c.to_vec()).unwrap()).collect();
            let z = zigzag_h0(&slices).unwrap();
            for (i, s) in slices.iter().enumerate() {
                prop_assert_eq!(z.alive_on_slice(i + 1), label_components(s, Connectivity::Eight).count() as usize);
            }
            for iv in &z.intervals {
                prop_assert!(iv.birth <= iv.death && iv.death <= 2 * (slices.len() - 1));
            }
        }
    }
}
