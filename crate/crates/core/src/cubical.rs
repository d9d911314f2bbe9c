//! Cubical cell complexes of binary images.
//!
//! Cells are addressed in doubled ("Khalimsky") coordinates on a
//! `(2w+1) × (2h+1)` lattice: vertices sit at even/even positions, edges at
//! odd/even (horizontal) or even/odd (vertical), and the square of pixel
//! `(x, y)` at `(2x+1, 2y+1)`. Cells are indexed in raster order of their
//! doubled coordinates (row first, then column).
//!
//! Boundary orientation is the product orientation `I_x × I_y`:
//!
//! ```text
//! ∂[a,b]       = (b) − (a)
//! ∂(I_x × I_y) = right − left − bottom + top
//! ```

use std::fmt::Write as _;

use smallvec::SmallVec;
use thiserror::Error;

use crate::image::BinaryImage;

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CubicalError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cell ({x}, {y}) lies outside the {width}x{height} lattice")]
    OutOfBounds {
        x: u32,
        y: u32,
        width: usize,
        height: usize,
    },
    #[error("cell ({x}, {y}) is missing its face ({fx}, {fy})")]
    NotClosed { x: u32, y: u32, fx: u32, fy: u32 },
    #[error("line {line}: recorded boundary differs from the computed one")]
    BoundaryMismatch { line: usize },
}

/// A cell in doubled coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn dim(self) -> usize {
        (self.x & 1) as usize + (self.y & 1) as usize
    }

    /// Faces with orientation signs, in no particular order.
    pub fn faces(self) -> SmallVec<[(Cell, i8); 4]> {
        let Cell { x, y } = self;
        let mut out = SmallVec::new();
        match (x & 1, y & 1) {
            (0, 0) => {}
            (1, 0) => {
                out.push((Cell::new(x - 1, y), -1));
                out.push((Cell::new(x + 1, y), 1));
            }
            (0, 1) => {
                out.push((Cell::new(x, y - 1), -1));
                out.push((Cell::new(x, y + 1), 1));
            }
            _ => {
                out.push((Cell::new(x, y - 1), 1));
                out.push((Cell::new(x - 1, y), -1));
                out.push((Cell::new(x + 1, y), 1));
                out.push((Cell::new(x, y + 1), -1));
            }
        }
        out
    }

    /// Potential cofaces with the sign this cell carries in their boundary.
    fn cofaces(self) -> SmallVec<[(Cell, i8); 4]> {
        let Cell { x, y } = self;
        let mut out = SmallVec::new();
        match (x & 1, y & 1) {
            (0, 0) => {
                if x > 0 {
                    out.push((Cell::new(x - 1, y), 1));
                }
                out.push((Cell::new(x + 1, y), -1));
                if y > 0 {
                    out.push((Cell::new(x, y - 1), 1));
                }
                out.push((Cell::new(x, y + 1), -1));
            }
            (1, 0) => {
                if y > 0 {
                    out.push((Cell::new(x, y - 1), -1));
                }
                out.push((Cell::new(x, y + 1), 1));
            }
            (0, 1) => {
                if x > 0 {
                    out.push((Cell::new(x - 1, y), 1));
                }
                out.push((Cell::new(x + 1, y), -1));
            }
            _ => {}
        }
        out
    }
}

/// Signed incidence matrix `∂_k : C_k → C_{k-1}` in per-dimension positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainBoundaryMatrix {
    pub dim: usize,
    pub rows: usize,
    /// Column `j` lists `(row, coefficient)` with rows ascending.
    pub columns: Vec<Vec<(u32, i64)>>,
}

impl ChainBoundaryMatrix {
    pub fn zero(dim: usize, rows: usize, cols: usize) -> Self {
        Self {
            dim,
            rows,
            columns: vec![Vec::new(); cols],
        }
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    /// Supports of the columns reduced mod 2.
    pub fn mod2_columns(&self) -> Vec<Vec<u32>> {
        self.columns
            .iter()
            .map(|c| {
                c.iter()
                    .filter(|(_, v)| v.rem_euclid(2) == 1)
                    .map(|&(r, _)| r)
                    .collect()
            })
            .collect()
    }

    /// True when `self · next` vanishes over the integers.
    pub fn composes_to_zero(&self, next: &ChainBoundaryMatrix) -> bool {
        if next.rows != self.cols() {
            return false;
        }
        let mut acc: std::collections::BTreeMap<u32, i64> = Default::default();
        for col in &next.columns {
            acc.clear();
            for &(mid, a) in col {
                for &(row, b) in &self.columns[mid as usize] {
                    *acc.entry(row).or_insert(0) += a * b;
                }
            }
            if acc.values().any(|&v| v != 0) {
                return false;
            }
        }
        true
    }

    pub fn dense(&self) -> Vec<Vec<i64>> {
        let mut m = vec![vec![0i64; self.cols()]; self.rows];
        for (j, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                m[r as usize][j] = v;
            }
        }
        m
    }
}

/// The closed cubical complex of a set of unit squares (plus any extra
/// lower-dimensional cells supplied through [`CubicalComplex::from_cells`]).
#[derive(Debug, Clone)]
pub struct CubicalComplex {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    /// Doubled-lattice position → cell index.
    index: Vec<u32>,
    by_dim: [Vec<u32>; 3],
    dim_pos: Vec<u32>,
}

impl PartialEq for CubicalComplex {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.cells == other.cells
    }
}

impl Eq for CubicalComplex {}

impl CubicalComplex {
    fn lattice(width: usize, height: usize) -> (usize, usize) {
        (2 * width + 1, 2 * height + 1)
    }

    fn from_presence(width: usize, height: usize, present: &[bool]) -> Self {
        let (lw, _) = Self::lattice(width, height);
        let mut index = vec![NONE; present.len()];
        let mut cells = Vec::new();
        let mut by_dim: [Vec<u32>; 3] = Default::default();
        let mut dim_pos = Vec::new();
        for (p, &here) in present.iter().enumerate() {
            if !here {
                continue;
            }
            let c = Cell::new((p % lw) as u32, (p / lw) as u32);
            let id = cells.len() as u32;
            index[p] = id;
            cells.push(c);
            let d = c.dim();
            dim_pos.push(by_dim[d].len() as u32);
            by_dim[d].push(id);
        }
        Self {
            width,
            height,
            cells,
            index,
            by_dim,
            dim_pos,
        }
    }

    /// Builds a complex from explicit cells; every face of every cell must
    /// be listed too.
    pub fn from_cells(
        width: usize,
        height: usize,
        cells: impl IntoIterator<Item = Cell>,
    ) -> Result<Self, CubicalError> {
        let (lw, lh) = Self::lattice(width, height);
        let mut present = vec![false; lw * lh];
        let mut listed = Vec::new();
        for c in cells {
            if c.x as usize >= lw || c.y as usize >= lh {
                return Err(CubicalError::OutOfBounds {
                    x: c.x,
                    y: c.y,
                    width,
                    height,
                });
            }
            present[c.y as usize * lw + c.x as usize] = true;
            listed.push(c);
        }
        for c in listed {
            for (f, _) in c.faces() {
                if !present[f.y as usize * lw + f.x as usize] {
                    return Err(CubicalError::NotClosed {
                        x: c.x,
                        y: c.y,
                        fx: f.x,
                        fy: f.y,
                    });
                }
            }
        }
        Ok(Self::from_presence(width, height, &present))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn count(&self, dim: usize) -> usize {
        self.by_dim[dim].len()
    }

    pub fn cell(&self, id: usize) -> Cell {
        self.cells[id]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn dim(&self, id: usize) -> usize {
        self.cells[id].dim()
    }

    /// Global ids of the cells of one dimension, ascending.
    pub fn cells_of_dim(&self, dim: usize) -> &[u32] {
        &self.by_dim[dim]
    }

    /// Position of a cell among the cells of its dimension.
    pub fn dim_position(&self, id: usize) -> usize {
        self.dim_pos[id] as usize
    }

    pub fn index_of(&self, c: Cell) -> Option<usize> {
        let (lw, lh) = Self::lattice(self.width, self.height);
        if c.x as usize >= lw || c.y as usize >= lh {
            return None;
        }
        match self.index[c.y as usize * lw + c.x as usize] {
            NONE => None,
            id => Some(id as usize),
        }
    }

    /// Signed faces of a cell, ascending by face id.
    pub fn boundary(&self, id: usize) -> SmallVec<[(usize, i8); 4]> {
        let mut out: SmallVec<[(usize, i8); 4]> = self.cells[id]
            .faces()
            .into_iter()
            .map(|(f, s)| (self.index_of(f).expect("complex is closed"), s))
            .collect();
        out.sort_unstable();
        out
    }

    /// Signed cofaces present in the complex, ascending by id.
    pub fn coboundary(&self, id: usize) -> SmallVec<[(usize, i8); 4]> {
        let mut out: SmallVec<[(usize, i8); 4]> = self.cells[id]
            .cofaces()
            .into_iter()
            .filter_map(|(c, s)| self.index_of(c).map(|i| (i, s)))
            .collect();
        out.sort_unstable();
        out
    }

    /// `∂_k` for `k ∈ {1, 2}`; other degrees give zero matrices.
    pub fn boundary_matrix(&self, k: usize) -> ChainBoundaryMatrix {
        if k == 0 || k > 2 {
            let cols = if k <= 2 { self.count(k) } else { 0 };
            let rows = if k == 0 { 0 } else { self.count(2) };
            return ChainBoundaryMatrix::zero(k, rows, cols);
        }
        let columns = self.by_dim[k]
            .iter()
            .map(|&id| {
                let mut col: Vec<(u32, i64)> = self
                    .boundary(id as usize)
                    .into_iter()
                    .map(|(f, s)| (self.dim_pos[f], s as i64))
                    .collect();
                col.sort_unstable();
                col
            })
            .collect();
        ChainBoundaryMatrix {
            dim: k,
            rows: self.count(k - 1),
            columns,
        }
    }

    /// Writes the text dump: a header line, then one line per cell in index
    /// order: `dim x y` followed by signed face indices (`+3 -1 ...`).
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cubical {} {} {}", self.width, self.height, self.len());
        for (id, c) in self.cells.iter().enumerate() {
            let _ = write!(out, "{} {} {}", c.dim(), c.x, c.y);
            for (f, s) in self.boundary(id) {
                let _ = write!(out, " {}{}", if s > 0 { '+' } else { '-' }, f);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self, CubicalError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });
        let parse_err = |line: usize, reason: &str| CubicalError::Parse {
            line: line + 1,
            reason: reason.to_string(),
        };
        let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "empty dump"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "cubical" {
            return Err(parse_err(hl, "expected `cubical <width> <height> <cells>`"));
        }
        let num = |s: &str, line: usize| -> Result<usize, CubicalError> {
            s.parse::<usize>()
                .map_err(|_| parse_err(line, &format!("bad number {s:?}")))
        };
        let (width, height, n) = (num(h[1], hl)?, num(h[2], hl)?, num(h[3], hl)?);
        let mut rows = Vec::with_capacity(n);
        for (ln, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() < 3 {
                return Err(parse_err(ln, "expected `dim x y [faces]`"));
            }
            let (d, x, y) = (num(t[0], ln)?, num(t[1], ln)? as u32, num(t[2], ln)? as u32);
            let cell = Cell::new(x, y);
            if cell.dim() != d {
                return Err(parse_err(ln, "dimension disagrees with coordinate parity"));
            }
            let mut faces = Vec::new();
            for tok in &t[3..] {
                let (sign, rest) = match tok.split_at(1) {
                    ("+", r) => (1i8, r),
                    ("-", r) => (-1i8, r),
                    _ => return Err(parse_err(ln, &format!("face {tok:?} lacks a sign"))),
                };
                faces.push((num(rest, ln)?, sign));
            }
            rows.push((ln, cell, faces));
        }
        if rows.len() != n {
            return Err(parse_err(
                hl,
                &format!("header announces {n} cells, found {}", rows.len()),
            ));
        }
        let cx = Self::from_cells(width, height, rows.iter().map(|r| r.1))?;
        for (id, (ln, cell, faces)) in rows.iter().enumerate() {
            if cx.cell(id) != *cell {
                return Err(parse_err(*ln, "cells are not in canonical order"));
            }
            if cx.boundary(id).as_slice() != faces.as_slice() {
                return Err(CubicalError::BoundaryMismatch { line: ln + 1 });
            }
        }
        Ok(cx)
    }
}

/// One closed unit square per foreground pixel, shared faces merged.
pub fn build_complex(bin: &BinaryImage) -> CubicalComplex {
    let (w, h) = bin.dimensions();
    let (lw, lh) = CubicalComplex::lattice(w, h);
    let mut present = vec![false; lw * lh];
    for y in 0..h {
        for x in 0..w {
            if !bin.get(x, y) {
                continue;
            }
            for dy in 0..3 {
                let row = (2 * y + dy) * lw + 2 * x;
                present[row..row + 3].iter_mut().for_each(|p| *p = true);
            }
        }
    }
    CubicalComplex::from_presence(w, h, &present)
}

pub fn euler_characteristic(cx: &CubicalComplex) -> i64 {
    cx.count(0) as i64 - cx.count(1) as i64 + cx.count(2) as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    #[test]
    fn annulus_cell_counts() {
        let cx = build_complex(&fixtures::annulus_mask());
        assert_eq!((cx.count(0), cx.count(1), cx.count(2)), (16, 24, 8));
        assert_eq!(euler_characteristic(&cx), 0);
    }

    #[test]
    fn single_pixel_and_empty() {
        let cx = build_complex(&BinaryImage::from_rows(&["1"]).unwrap());
        assert_eq!((cx.count(0), cx.count(1), cx.count(2)), (4, 4, 1));
        assert_eq!(euler_characteristic(&cx), 1);
        let empty = build_complex(&BinaryImage::empty(5, 5));
        assert!(empty.is_empty());
        assert_eq!(euler_characteristic(&empty), 0);
    }

    #[test]
    fn disjoint_pixels_add_up() {
        let m = BinaryImage::from_fn(9, 9, |x, y| x % 2 == 0 && y % 2 == 0 && x < 6);
        let k = m.count() as i64;
        assert_eq!(euler_characteristic(&build_complex(&m)), k);
    }

    #[test]
    fn shared_faces() {
        let diag = build_complex(&BinaryImage::from_rows(&["10", "01"]).unwrap());
        // 4 + 4 vertices minus one shared corner; 8 edges, none shared
        assert_eq!((diag.count(0), diag.count(1)), (7, 8));
        let side = build_complex(&BinaryImage::from_rows(&["11"]).unwrap());
        assert_eq!((side.count(0), side.count(1)), (6, 7));
    }

    #[test]
    fn indexing_is_raster_order() {
        let cx = build_complex(&BinaryImage::from_rows(&["1"]).unwrap());
        let order: Vec<(u32, u32)> = cx.cells().iter().map(|c| (c.x, c.y)).collect();
        assert_eq!(
            order,
            vec![(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1), (0, 2), (1, 2), (2, 2)]
        );
        let square = cx.index_of(Cell::new(1, 1)).unwrap();
        // top +, left -, right +, bottom -
        assert_eq!(cx.boundary(square).as_slice(), &[(1, 1), (3, -1), (5, 1), (7, -1)]);
        assert_eq!(cx.coboundary(1).as_slice(), &[(4, 1)]);
        assert_eq!(cx.coboundary(0).as_slice(), &[(1, -1), (3, -1)]);
    }

    #[test]
    fn from_cells_demands_closure() {
        let err = CubicalComplex::from_cells(1, 1, [Cell::new(1, 0)]).unwrap_err();
        assert!(matches!(err, CubicalError::NotClosed { .. }));
        let ok = CubicalComplex::from_cells(1, 1, [Cell::new(0, 0), Cell::new(2, 0), Cell::new(1, 0)]).unwrap();
        assert_eq!(ok.len(), 3);
        assert!(CubicalComplex::from_cells(1, 1, [Cell::new(4, 0)]).is_err());
    }

    #[test]
    fn dump_round_trip_and_rejections() {
        let cx = build_complex(&fixtures::three_hole_mask());
        let text = cx.to_dump();
        assert_eq!(CubicalComplex::from_dump(&text).unwrap(), cx);
        let tampered = text.replacen(" +", " -", 1);
        assert!(matches!(
            CubicalComplex::from_dump(&tampered),
            Err(CubicalError::BoundaryMismatch { .. })
        ));
        assert!(CubicalComplex::from_dump("cubical 1 1 2\n0 0 0\n").is_err());
    }

    fn random_mask(w: usize, h: usize, bits: &[bool]) -> BinaryImage {
        BinaryImage::new(w, h, bits[..w * h].to_vec()).unwrap()
    }

    proptest! {
        #[test]
        fn boundary_squared_vanishes(bits in proptest::collection::vec(any::<bool>(), 32 * 32), w in 1usize..=32, h in 1usize..=32) {
            let cx = build_complex(&random_mask(w, h, &bits));
            let d1 = cx.boundary_matrix(1);
            let d2 = cx.boundary_matrix(2);
            prop_assert!(d1.composes_to_zero(&d2));
            // mod 2
            for col in &d2.columns {
                let mut parity = std::collections::BTreeMap::<u32, u32>::new();
                for &(e, _) in col {
                    for &(v, _) in &d1.columns[e as usize] {
                        *parity.entry(v).or_insert(0) += 1;
                    }
                }
                prop_assert!(parity.values().all(|c| c % 2 == 0));
            }
            for id in 0..cx.len() {
                let faces = cx.boundary(id);
                prop_assert_eq!(faces.len(), [0, 2, 4][cx.dim(id)]);
                for (f, s) in faces {
                    prop_assert!(cx.coboundary(f).contains(&(id, s)));
                }
            }
        }
    }
}
