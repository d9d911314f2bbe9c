use serde::{Deserialize, Serialize};

use super::{BinaryImage, ImageError};
use crate::unionfind::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn back_offsets(self) -> &'static [(isize, isize)] {
        // neighbours already visited in raster order
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
        }
    }

    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = ImageError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(ImageError::InvalidParameter(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }
}

/// Per-pixel component labels; `0` is background, components are `1..=count`
/// numbered in raster order of their first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: u32,
    connectivity: Connectivity,
}

impl ComponentLabeling {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    /// Mask of the pixels carrying `label`.
    pub fn component_mask(&self, label: u32) -> BinaryImage {
        let mask = self.labels.iter().map(|&l| l == label).collect();
        BinaryImage::new(self.width, self.height, mask).expect("same size")
    }

    /// Pixel areas indexed by label (index 0 is background).
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0usize; self.count as usize + 1];
        for &l in &self.labels {
            areas[l as usize] += 1;
        }
        areas
    }

    /// Statistics for every component, in label order.
    pub fn all_stats(&self) -> Vec<ComponentStats> {
        let mut acc = vec![MomentSums::default(); self.count as usize + 1];
        for y in 0..self.height {
            for x in 0..self.width {
                let l = self.labels[y * self.width + x];
                if l != 0 {
                    acc[l as usize].add(x, y);
                }
            }
        }
        acc.into_iter().skip(1).map(MomentSums::finish).collect()
    }
}

pub fn label_components(bin: &BinaryImage, connectivity: Connectivity) -> ComponentLabeling {
    let (w, h) = bin.dimensions();
    let mask = bin.mask();
    let mut provisional = vec![u32::MAX; w * h];
    let mut uf = UnionFind::new(0);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask[i] {
                continue;
            }
            let mut mine = u32::MAX;
            for &(dx, dy) in connectivity.back_offsets() {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize {
                    continue;
                }
                let n = provisional[ny as usize * w + nx as usize];
                if n == u32::MAX {
                    continue;
                }
                if mine == u32::MAX {
                    mine = n;
                } else {
                    uf.union(mine as usize, n as usize);
                }
            }
            if mine == u32::MAX {
                mine = uf.push() as u32;
            }
            provisional[i] = mine;
        }
    }
    // relabel roots in raster order of first appearance
    let mut final_of_root = vec![0u32; uf.len()];
    let mut count = 0u32;
    let mut labels = vec![0u32; w * h];
    for i in 0..w * h {
        let p = provisional[i];
        if p == u32::MAX {
            continue;
        }
        let root = uf.find(p as usize);
        if final_of_root[root] == 0 {
            count += 1;
            final_of_root[root] = count;
        }
        labels[i] = final_of_root[root];
    }
    ComponentLabeling {
        width: w,
        height: h,
        labels,
        count,
        connectivity,
    }
}

/// Shape summary of one component.
///
/// Axes follow the equivalent-ellipse convention: `4 * sqrt(λ)` for the
/// eigenvalues `λ` of the second central moment matrix. Moments are taken
/// over the region as a union of unit squares, so every pixel contributes
/// its own variance of `1/12` along each axis; an `a × b` rectangle thus has
/// axes in ratio exactly `a : b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub area: usize,
    /// Centre of mass in pixel-index coordinates (pixel `(x, y)` has its
    /// centre at `(x, y)`).
    pub centroid: (f64, f64),
    pub major_axis: f64,
    pub minor_axis: f64,
    /// Inclusive pixel bounds `(x0, y0, x1, y1)`.
    pub bbox: (usize, usize, usize, usize),
}

impl ComponentStats {
    /// `major / minor`; infinite for a degenerate minor axis.
    pub fn elongation(&self) -> f64 {
        if self.minor_axis > 0.0 {
            self.major_axis / self.minor_axis
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct MomentSums {
    n: usize,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
    bbox: (usize, usize, usize, usize),
}

impl Default for MomentSums {
    fn default() -> Self {
        Self {
            n: 0,
            sx: 0.0,
            sy: 0.0,
            sxx: 0.0,
            syy: 0.0,
            sxy: 0.0,
            bbox: (usize::MAX, usize::MAX, 0, 0),
        }
    }
}

impl MomentSums {
    fn add(&mut self, x: usize, y: usize) {
        let (fx, fy) = (x as f64, y as f64);
        self.n += 1;
        self.sx += fx;
        self.sy += fy;
        self.sxx += fx * fx;
        self.syy += fy * fy;
        self.sxy += fx * fy;
        let b = &mut self.bbox;
        *b = (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y));
    }

    fn finish(self) -> ComponentStats {
        let n = self.n as f64;
        let (mx, my) = (self.sx / n, self.sy / n);
        let cxx = (self.sxx / n - mx * mx).max(0.0) + 1.0 / 12.0;
        let cyy = (self.syy / n - my * my).max(0.0) + 1.0 / 12.0;
        let cxy = self.sxy / n - mx * my;
        let mean = 0.5 * (cxx + cyy);
        let disc = (0.25 * (cxx - cyy).powi(2) + cxy * cxy).sqrt();
        let l1 = mean + disc;
        let l2 = (mean - disc).max(0.0);
        ComponentStats {
            area: self.n,
            centroid: (mx, my),
            major_axis: 4.0 * l1.sqrt(),
            minor_axis: 4.0 * l2.sqrt(),
            bbox: self.bbox,
        }
    }
}

pub fn component_stats(labeling: &ComponentLabeling, label: u32) -> Result<ComponentStats, ImageError> {
    if label == 0 || label > labeling.count {
        return Err(ImageError::UnknownLabel {
            label,
            count: labeling.count,
        });
    }
    let mut acc = MomentSums::default();
    for y in 0..labeling.height {
        for x in 0..labeling.width {
            if labeling.labels[y * labeling.width + x] == label {
                acc.add(x, y);
            }
        }
    }
    Ok(acc.finish())
}
