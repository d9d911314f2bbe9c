use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::image::{BinaryImage, GrayImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateParams {
    /// Side of the square search tiles, in pixels.
    pub tile: usize,
    /// Minimum arc length of a path for a tile to count, in pixels.
    pub min_path: f64,
    /// Background pixels a path may jump over.
    pub max_gap: usize,
    /// Seeds are pixels at or above this value; `None` picks the 99.5th
    /// intensity percentile (never below the foreground threshold).
    pub seed_threshold: Option<u8>,
    /// Pixels at or above this value are foreground for path search.
    pub foreground_threshold: u8,
}

impl Default for LocateParams {
    fn default() -> Self {
        Self {
            tile: 25,
            min_path: 15.0,
            max_gap: 2,
            seed_threshold: None,
            foreground_threshold: 128,
        }
    }
}

/// Tiles accepted while exploring from one seed, plus their bounding box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronBox {
    pub seed: (usize, usize),
    /// Accepted tiles as `(column, row)` grid indices, sorted.
    pub tiles: Vec<(usize, usize)>,
    /// Pixel rectangle `(x, y, width, height)` covering the tiles, clipped to the image.
    pub rect: (usize, usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationReport {
    pub seeds: Vec<(usize, usize)>,
    pub seed_threshold: u8,
    pub boxes: Vec<NeuronBox>,
    pub params: LocateParams,
}

impl LocationReport {
    pub const CSV_HEADER: &'static str = "seed_x,seed_y,x,y,width,height,tiles";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for b in &self.boxes {
            let (x, y, w, h) = b.rect;
            out += &format!("{},{},{x},{y},{w},{h},{}\n", b.seed.0, b.seed.1, b.tiles.len());
        }
        out
    }
}

/// Intensity at the given percentile (nearest rank).
fn percentile(img: &GrayImage, pct: f64) -> u8 {
    let mut hist = [0usize; 256];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    let n = img.pixels().len();
    let rank = ((pct / 100.0) * n as f64).ceil().max(1.0) as usize;
    let mut seen = 0;
    for (v, &c) in hist.iter().enumerate() {
        seen += c;
        if seen >= rank {
            return v as u8;
        }
    }
    255
}

struct Grid {
    tile: usize,
    cols: usize,
    rows: usize,
    width: usize,
    height: usize,
}

impl Grid {
    fn bounds(&self, (c, r): (usize, usize)) -> (usize, usize, usize, usize) {
        let (x0, y0) = (c * self.tile, r * self.tile);
        (
            x0,
            y0,
            (x0 + self.tile).min(self.width),
            (y0 + self.tile).min(self.height),
        )
    }
}

/// Longest arc length found by depth-first search over foreground pixels of
/// one tile, stepping to pixels at Chebyshev distance `≤ max_gap + 1`.
///
/// Each component is searched from its first pixel in raster order and then
/// again from the far end of the deepest path found.
fn tile_path_length(fg: &BinaryImage, grid: &Grid, tile: (usize, usize), max_gap: usize, goal: f64) -> f64 {
    let (x0, y0, x1, y1) = grid.bounds(tile);
    let (tw, th) = (x1 - x0, y1 - y0);
    let inside: Vec<bool> = (0..tw * th).map(|i| fg.get(x0 + i % tw, y0 + i / tw)).collect();
    let reach = (max_gap + 1) as isize;
    let mut steps: Vec<(isize, isize, f64)> = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if (dx, dy) != (0, 0) {
                steps.push((dx, dy, ((dx * dx + dy * dy) as f64).sqrt()));
            }
        }
    }
    steps.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.1, a.0).cmp(&(b.1, b.0))));

    // returns (deepest length, pixel where it ends)
    let dfs = |start: usize, visited: &mut Vec<bool>| -> (f64, usize) {
        let mut stack: Vec<(usize, usize, f64)> = vec![(start, 0, 0.0)];
        visited[start] = true;
        let mut best = (0.0, start);
        while let Some(top) = stack.last_mut() {
            let (p, k, len) = *top;
            if len > best.0 {
                best = (len, p);
            }
            if best.0 >= goal || k == steps.len() {
                if best.0 >= goal {
                    break;
                }
                stack.pop();
                continue;
            }
            top.1 += 1;
            let (dx, dy, d) = steps[k];
            let (x, y) = ((p % tw) as isize + dx, (p / tw) as isize + dy);
            if x < 0 || y < 0 || x >= tw as isize || y >= th as isize {
                continue;
            }
            let q = y as usize * tw + x as usize;
            if inside[q] && !visited[q] {
                visited[q] = true;
                stack.push((q, 0, len + d));
            }
        }
        best
    };

    let mut seen = vec![false; tw * th];
    let mut longest = 0.0f64;
    for start in 0..tw * th {
        if !inside[start] || seen[start] {
            continue;
        }
        let (len, end) = dfs(start, &mut seen);
        longest = longest.max(len);
        if longest >= goal {
            break;
        }
        let mut again = vec![false; tw * th];
        longest = longest.max(dfs(end, &mut again).0);
        if longest >= goal {
            break;
        }
    }
    longest
}

/// Finds seeds among the brightest pixels (one per tile) and grows a region
/// of tiles around each by breadth-first search. A tile joins the region if
/// it holds a gap-tolerant foreground path of at least `min_path` pixels;
/// the frontier moves to the eight neighbouring tiles of accepted ones.
pub fn locate_neurons(img: &GrayImage, params: &LocateParams) -> Result<LocationReport, PipelineError> {
    if params.tile == 0 || !(params.min_path.is_finite() && params.min_path > 0.0) || params.max_gap == 0 {
        return Err(PipelineError::InvalidParameter(
            "tile, min_path and max_gap must be positive".into(),
        ));
    }
    let (width, height) = img.dimensions();
    let grid = Grid {
        tile: params.tile,
        cols: width.div_ceil(params.tile),
        rows: height.div_ceil(params.tile),
        width,
        height,
    };
    let seed_threshold = params
        .seed_threshold
        .unwrap_or_else(|| percentile(img, 99.5).max(params.foreground_threshold));
    let fg = BinaryImage::from_fn(width, height, |x, y| img.get(x, y) >= params.foreground_threshold);

    // brightest pixel per tile, ties to raster order
    let mut best: Vec<Option<(u8, usize, usize)>> = vec![None; grid.cols * grid.rows];
    for y in 0..height {
        for x in 0..width {
            let v = img.get(x, y);
            if v < seed_threshold {
                continue;
            }
            let t = (y / params.tile) * grid.cols + x / params.tile;
            if best[t].is_none_or(|(b, _, _)| v > b) {
                best[t] = Some((v, x, y));
            }
        }
    }
    let mut seeds: Vec<(u8, usize, usize)> = best.into_iter().flatten().collect();
    seeds.sort_by_key(|&(v, x, y)| (std::cmp::Reverse(v), y, x));

    let mut accepted = vec![false; grid.cols * grid.rows];
    let mut boxes = Vec::new();
    for &(_, sx, sy) in &seeds {
        let start = (sx / params.tile, sy / params.tile);
        if accepted[start.1 * grid.cols + start.0] {
            continue;
        }
        let mut visited = vec![false; grid.cols * grid.rows];
        let mut queue = VecDeque::from([start]);
        visited[start.1 * grid.cols + start.0] = true;
        let mut region = BTreeSet::new();
        while let Some(t) = queue.pop_front() {
            if tile_path_length(&fg, &grid, t, params.max_gap, params.min_path) < params.min_path {
                continue;
            }
            accepted[t.1 * grid.cols + t.0] = true;
            region.insert(t);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (c, r) = (t.0 as isize + dc, t.1 as isize + dr);
                    if c < 0 || r < 0 || c >= grid.cols as isize || r >= grid.rows as isize {
                        continue;
                    }
                    let i = r as usize * grid.cols + c as usize;
                    if !visited[i] {
                        visited[i] = true;
                        queue.push_back((c as usize, r as usize));
                    }
                }
            }
        }
        if region.is_empty() {
            continue;
        }
        let tiles: Vec<(usize, usize)> = region.into_iter().collect();
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for &t in &tiles {
            let (a, b, c, d) = grid.bounds(t);
            (x0, y0, x1, y1) = (x0.min(a), y0.min(b), x1.max(c), y1.max(d));
        }
        boxes.push(NeuronBox {
            seed: (sx, sy),
            tiles,
            rect: (x0, y0, x1 - x0, y1 - y0),
        });
    }
    Ok(LocationReport {
        seeds: seeds.iter().map(|&(_, x, y)| (x, y)).collect(),
        seed_threshold,
        boxes,
        params: params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    /// Exhaustive longest simple path over the gap-tolerant pixel graph.
    fn longest_path_oracle(pixels: &[(isize, isize)], reach: isize) -> f64 {
        fn go(at: usize, pixels: &[(isize, isize)], reach: isize, used: &mut Vec<bool>) -> f64 {
            let mut best = 0.0f64;
            for j in 0..pixels.len() {
                let (dx, dy) = (pixels[j].0 - pixels[at].0, pixels[j].1 - pixels[at].1);
                if !used[j] && dx.abs().max(dy.abs()) <= reach {
                    used[j] = true;
                    let d = ((dx * dx + dy * dy) as f64).sqrt();
                    best = best.max(d + go(j, pixels, reach, used));
                    used[j] = false;
                }
            }
            best
        }
        let mut best = 0.0f64;
        for s in 0..pixels.len() {
            let mut used = vec![false; pixels.len()];
            used[s] = true;
            best = best.max(go(s, pixels, reach, &mut used));
        }
        best
    }

    #[test]
    fn blank_and_single_pixel() {
        let blank = GrayImage::filled(60, 60, 0).unwrap();
        let r = locate_neurons(&blank, &LocateParams::default()).unwrap();
        assert!(r.seeds.is_empty() && r.boxes.is_empty());
        let mut one = blank.clone();
        one.set(30, 30, 255);
        let r = locate_neurons(&one, &LocateParams::default()).unwrap();
        assert_eq!(r.seeds, vec![(30, 30)]);
        assert!(r.boxes.is_empty());
    }

    #[test]
    fn cross_covers_five_tiles() {
        let img = fixtures::cross_image();
        let r = locate_neurons(&img, &LocateParams::default()).unwrap();
        assert_eq!(r.boxes.len(), 1);
        assert_eq!(r.boxes[0].tiles, vec![(1, 2), (2, 1), (2, 2), (2, 3), (3, 2)]);
        assert_eq!(r.boxes[0].rect, (25, 25, 75, 75));
        // without gap tolerance the dashed arms break up
        let strict = LocateParams {
            max_gap: 1,
            ..LocateParams::default()
        };
        let r = locate_neurons(&img, &strict).unwrap();
        assert_eq!(r.boxes.iter().map(|b| b.tiles.len()).sum::<usize>(), 1);
    }

    #[test]
    fn arm_tiles_agree_with_exhaustive_paths() {
        let img = fixtures::cross_image();
        let fg = BinaryImage::from_fn(125, 125, |x, y| img.get(x, y) >= 128);
        let grid = Grid {
            tile: 25,
            cols: 5,
            rows: 5,
            width: 125,
            height: 125,
        };
        for tile in [(1, 2), (3, 2), (2, 1), (2, 3), (0, 2), (1, 1)] {
            let (x0, y0, x1, y1) = grid.bounds(tile);
            let pixels: Vec<(isize, isize)> = (y0..y1)
                .flat_map(|y| (x0..x1).map(move |x| (x, y)))
                .filter(|&(x, y)| fg.get(x, y))
                .map(|(x, y)| (x as isize, y as isize))
                .collect();
            let exact = longest_path_oracle(&pixels, 3);
            let found = tile_path_length(&fg, &grid, tile, 2, f64::INFINITY);
            assert!(found <= exact + 1e-9);
            assert_eq!(
                found >= 15.0,
                exact >= 15.0,
                "tile {tile:?}: dfs {found}, exact {exact}"
            );
        }
    }

    #[test]
    fn translation_by_whole_tiles() {
        let img = fixtures::cross_image();
        let params = LocateParams {
            seed_threshold: Some(255),
            ..LocateParams::default()
        };
        let base = locate_neurons(&img, &params).unwrap();
        let shifted = GrayImage::from_fn(
            175,
            150,
            |x, y| {
                if x >= 50 && y >= 25 {
                    img.get(x - 50, y - 25)
                } else {
                    0
                }
            },
        )
        .unwrap();
        let moved = locate_neurons(&shifted, &params).unwrap();
        assert_eq!(base.boxes.len(), moved.boxes.len());
        for (a, b) in base.boxes.iter().zip(&moved.boxes) {
            let t: Vec<(usize, usize)> = a.tiles.iter().map(|&(c, r)| (c + 2, r + 1)).collect();
            assert_eq!(t, b.tiles);
            assert_eq!((a.rect.0 + 50, a.rect.1 + 25, a.rect.2, a.rect.3), b.rect);
        }
    }

    #[test]
    fn percentile_seed_threshold() {
        let img = GrayImage::from_fn(20, 10, |x, y| ((x + 20 * y) % 256) as u8).unwrap();
        assert_eq!(percentile(&img, 100.0), 199);
        assert_eq!(percentile(&img, 50.0), 99);
        assert!(locate_neurons(
            &img,
            &LocateParams {
                tile: 0,
                ..LocateParams::default()
            }
        )
        .is_err());
    }
}
