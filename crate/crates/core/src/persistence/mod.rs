//! Persistent homology of threshold filtrations and zigzag H0 persistence.
//!
//! Bars are measured in level indices: a bar `[b, d)` is born when level
//! `b` is added and dies when level `d` is added. A bar alive at the last
//! level never dies (`death == None`).

mod zigzag;

pub use zigzag::{zigzag_h0, ZigzagInterval, ZigzagIntervals};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cubical::{build_complex, CubicalComplex};
use crate::homology::gf2;
use crate::image::{label_components, BinaryImage, Connectivity, GrayImage, ImageError};
use crate::unionfind::UnionFind;

const NEVER: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PersistenceError {
    #[error("at least one level is required")]
    EmptyLevels,
    #[error("levels must be strictly {expected}; level {index} breaks the order")]
    NonMonotoneLevels { index: usize, expected: &'static str },
    #[error("min_persistence must be at least 1")]
    InvalidMinPersistence,
    #[error("at least one slice is required")]
    EmptySlices,
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Pixels `≥ t`, thresholds descending: bright structure enters first.
    #[default]
    Superlevel,
    /// Pixels `≤ t`, thresholds ascending.
    Sublevel,
}

/// `n` equispaced thresholds `k·256/(n+1)`, listed for a superlevel sweep.
pub fn default_levels(n: usize) -> Vec<u8> {
    (1..=n).rev().map(|k| (k * 256 / (n + 1)) as u8).collect()
}

/// Nested complexes of a thresholded image, stored as the final complex
/// plus the level at which every pixel and cell appears.
#[derive(Debug, Clone)]
pub struct Filtration {
    levels: Vec<u8>,
    direction: Direction,
    width: usize,
    height: usize,
    pixel_birth: Vec<u32>,
    complex: CubicalComplex,
    cell_birth: Vec<u32>,
}

pub fn build_filtration(img: &GrayImage, levels: &[u8], direction: Direction) -> Result<Filtration, PersistenceError> {
    if levels.is_empty() {
        return Err(PersistenceError::EmptyLevels);
    }
    for i in 1..levels.len() {
        let ok = match direction {
            Direction::Superlevel => levels[i] < levels[i - 1],
            Direction::Sublevel => levels[i] > levels[i - 1],
        };
        if !ok {
            let expected = match direction {
                Direction::Superlevel => "descending",
                Direction::Sublevel => "ascending",
            };
            return Err(PersistenceError::NonMonotoneLevels { index: i, expected });
        }
    }
    let (width, height) = img.dimensions();
    let pixel_birth: Vec<u32> = img
        .pixels()
        .iter()
        .map(|&v| {
            levels
                .iter()
                .position(|&t| match direction {
                    Direction::Superlevel => v >= t,
                    Direction::Sublevel => v <= t,
                })
                .map_or(NEVER, |i| i as u32)
        })
        .collect();
    let final_mask = BinaryImage::new(width, height, pixel_birth.iter().map(|&b| b != NEVER).collect())?;
    let complex = build_complex(&final_mask);
    let cell_birth = complex
        .cells()
        .iter()
        .map(|c| {
            let span = |v: u32, n: usize| (v.saturating_sub(1) as usize / 2, (v as usize / 2).min(n - 1));
            let (x0, x1) = span(c.x, width);
            let (y0, y1) = span(c.y, height);
            let mut b = NEVER;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    b = b.min(pixel_birth[y * width + x]);
                }
            }
            b
        })
        .collect();
    Ok(Filtration {
        levels: levels.to_vec(),
        direction,
        width,
        height,
        pixel_birth,
        complex,
        cell_birth,
    })
}

impl Filtration {
    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// The complex at the last level; every earlier complex is a subcomplex.
    pub fn final_complex(&self) -> &CubicalComplex {
        &self.complex
    }

    /// Level index at which a cell of the final complex appears.
    pub fn cell_birth(&self, id: usize) -> usize {
        self.cell_birth[id] as usize
    }

    /// Level index at which a pixel enters, if it ever does.
    pub fn pixel_birth(&self, x: usize, y: usize) -> Option<usize> {
        match self.pixel_birth[y * self.width + x] {
            NEVER => None,
            b => Some(b as usize),
        }
    }

    pub fn mask_at(&self, level: usize) -> BinaryImage {
        let lv = level as u32;
        BinaryImage::from_fn(self.width, self.height, |x, y| {
            self.pixel_birth[y * self.width + x] <= lv
        })
    }

    pub fn complex_at(&self, level: usize) -> CubicalComplex {
        build_complex(&self.mask_at(level))
    }

    /// Cell ids sorted by `(birth level, dimension, id)`.
    fn order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.complex.len()).collect();
        order.sort_unstable_by_key(|&id| (self.cell_birth[id], self.complex.dim(id), id));
        order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bar {
    pub dim: usize,
    pub birth: usize,
    /// `None` for a class that survives the last level.
    pub death: Option<usize>,
}

impl Bar {
    pub fn is_alive_at(&self, level: usize) -> bool {
        self.birth <= level && self.death.is_none_or(|d| level < d)
    }

    /// Length in levels; an infinite bar counts up to the end of a filtration
    /// with `levels` levels.
    pub fn length(&self, levels: usize) -> usize {
        self.death.unwrap_or(levels) - self.birth
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Barcode {
    pub bars: Vec<Bar>,
    /// Number of levels of the filtration the bars come from.
    pub levels: usize,
}

impl Barcode {
    pub fn alive_at(&self, level: usize, dim: usize) -> usize {
        self.bars
            .iter()
            .filter(|b| b.dim == dim && b.is_alive_at(level))
            .count()
    }

    pub fn of_dim(&self, dim: usize) -> impl Iterator<Item = &Bar> {
        self.bars.iter().filter(move |b| b.dim == dim)
    }

    /// `dimension,birth,death` with `inf` for bars that never die.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dimension,birth,death\n");
        for b in &self.bars {
            match b.death {
                Some(d) => writeln!(out, "{},{},{}", b.dim, b.birth, d),
                None => writeln!(out, "{},{},inf", b.dim, b.birth),
            }
            .expect("writing to a String");
        }
        out
    }
}

/// H0 pairs by union-find with the elder rule over vertex order.
///
/// Returns the finite H0 bars, the still-open classes as `(root, birth)` and
/// the edges that closed a cycle.
fn h0_pairs(filt: &Filtration, order: &[usize]) -> (Vec<Bar>, Vec<usize>, UnionFind, Vec<u32>) {
    let cx = &filt.complex;
    let nv = cx.count(0);
    let mut uf = UnionFind::new(nv);
    // oldest vertex (by position in `order`) of each root
    let mut oldest = vec![u32::MAX; nv];
    let mut rank = vec![0u32; cx.len()];
    for (r, &id) in order.iter().enumerate() {
        rank[id] = r as u32;
    }
    let mut bars = Vec::new();
    let mut cycles = Vec::new();
    for &id in order {
        match cx.dim(id) {
            0 => oldest[cx.dim_position(id)] = rank[id],
            1 => {
                let b = cx.boundary(id);
                let (u, v) = (cx.dim_position(b[0].0), cx.dim_position(b[1].0));
                let (ru, rv) = (uf.find(u), uf.find(v));
                if ru == rv {
                    cycles.push(id);
                    continue;
                }
                let (elder, younger) = if oldest[ru] < oldest[rv] { (ru, rv) } else { (rv, ru) };
                let born = filt.cell_birth[order[oldest[younger] as usize]] as usize;
                let dies = filt.cell_birth[id] as usize;
                if born < dies {
                    bars.push(Bar {
                        dim: 0,
                        birth: born,
                        death: Some(dies),
                    });
                }
                let keep = oldest[elder];
                let root = uf.union(ru, rv).expect("distinct roots");
                oldest[root] = keep;
            }
            _ => {}
        }
    }
    (bars, cycles, uf, oldest)
}

/// H0 barcode only; cheap enough for full-size images.
pub fn h0_barcode(filt: &Filtration) -> Barcode {
    let order = filt.order();
    let cx = &filt.complex;
    let (mut bars, _, mut uf, oldest) = h0_pairs(filt, &order);
    for v in 0..cx.count(0) {
        if uf.find(v) == v {
            bars.push(Bar {
                dim: 0,
                birth: filt.cell_birth[order[oldest[v] as usize]] as usize,
                death: None,
            });
        }
    }
    bars.sort_unstable();
    Barcode {
        bars,
        levels: filt.len(),
    }
}

/// Persistence pairing of the filtration ordered by `(birth, dim, id)`.
///
/// H0 pairs come from union-find with the elder rule, which is exactly the
/// pairing of the lowest-pivot reduction of `∂_1`; H1 pairs come from
/// lowest-pivot reduction of `∂_2` over Z/2.
pub fn persistent_homology(filt: &Filtration) -> Barcode {
    let order = filt.order();
    let cx = &filt.complex;
    let mut bars = h0_barcode(filt).bars;
    let (_, cycles, _, _) = h0_pairs(filt, &order);

    let mut rank = vec![0u32; cx.len()];
    for (r, &id) in order.iter().enumerate() {
        rank[id] = r as u32;
    }
    let mut pivot_of: std::collections::HashMap<u32, Vec<u32>> = std::collections::HashMap::new();
    let mut paired = vec![false; cx.len()];
    let mut scratch = Vec::new();
    for &sq in order.iter().filter(|&&id| cx.dim(id) == 2) {
        let mut col: Vec<u32> = cx.boundary(sq).iter().map(|&(f, _)| rank[f]).collect();
        col.sort_unstable();
        while let Some(&low) = col.last() {
            match pivot_of.get(&low) {
                Some(prev) => gf2::xor_into(&mut col, prev, &mut scratch),
                None => break,
            }
        }
        if let Some(&low) = col.last() {
            let edge = order[low as usize];
            paired[edge] = true;
            let (born, dies) = (filt.cell_birth[edge] as usize, filt.cell_birth[sq] as usize);
            if born < dies {
                bars.push(Bar {
                    dim: 1,
                    birth: born,
                    death: Some(dies),
                });
            }
            pivot_of.insert(low, col);
        }
    }
    for e in cycles {
        if !paired[e] {
            bars.push(Bar {
                dim: 1,
                birth: filt.cell_birth[e] as usize,
                death: None,
            });
        }
    }
    bars.sort_unstable();
    Barcode {
        bars,
        levels: filt.len(),
    }
}

/// Final-level foreground restricted to components that have persisted for
/// at least `min_persistence` levels.
///
/// Every component of the last level carries the class of its oldest pixel
/// (elder rule), which is alive at the end; its bar therefore runs from the
/// earliest level any of its pixels appears to the end of the filtration.
pub fn persistent_components_in(filt: &Filtration, min_persistence: usize) -> Result<BinaryImage, PersistenceError> {
    if min_persistence == 0 {
        return Err(PersistenceError::InvalidMinPersistence);
    }
    let last = filt.len() - 1;
    let mask = filt.mask_at(last);
    let lab = label_components(&mask, Connectivity::Eight);
    let mut birth = vec![u32::MAX; lab.count() as usize + 1];
    for (p, &l) in lab.labels().iter().enumerate() {
        if l != 0 {
            birth[l as usize] = birth[l as usize].min(filt.pixel_birth[p]);
        }
    }
    let levels = filt.len();
    let (w, h) = filt.dimensions();
    Ok(BinaryImage::from_fn(w, h, |x, y| {
        let l = lab.label(x, y) as usize;
        l != 0 && levels - birth[l] as usize >= min_persistence
    }))
}

/// Superlevel filtration of `img` followed by [`persistent_components_in`].
pub fn persistent_components(
    img: &GrayImage,
    levels: &[u8],
    min_persistence: usize,
) -> Result<BinaryImage, PersistenceError> {
    let filt = build_filtration(img, levels, Direction::Superlevel)?;
    persistent_components_in(&filt, min_persistence)
}
