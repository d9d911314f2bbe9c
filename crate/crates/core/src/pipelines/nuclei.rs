use serde::{Deserialize, Serialize};

use super::{prefilter, PipelineError};
use crate::image::{band_threshold, label_components, region_mode, ComponentStats, Connectivity, GrayImage};

/// How the major and minor axes are compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "limit", rename_all = "lowercase")]
pub enum AxisCriterion {
    /// Reject when `major / minor > limit`.
    Ratio(f64),
    /// Reject when `major − minor > limit` pixels.
    Difference(f64),
}

impl AxisCriterion {
    fn rejects(self, s: &ComponentStats) -> bool {
        match self {
            AxisCriterion::Ratio(limit) => s.elongation() > limit,
            AxisCriterion::Difference(limit) => s.major_axis - s.minor_axis > limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NucleusParams {
    pub min_area: usize,
    pub max_area: usize,
    pub axis: AxisCriterion,
    /// Radii of the concentric density circles, increasing.
    pub radii: Vec<usize>,
    pub nuclei_threshold: u8,
    pub neuron_threshold: u8,
    /// Median radius applied to both channels; 0 disables filtering.
    pub median_radius: usize,
}

impl Default for NucleusParams {
    fn default() -> Self {
        Self {
            min_area: 40,
            max_area: 200,
            axis: AxisCriterion::Ratio(2.0),
            radii: vec![5, 10, 15],
            nuclei_threshold: 128,
            neuron_threshold: 128,
            median_radius: 1,
        }
    }
}

impl NucleusParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidParameter(m.to_string()));
        if self.min_area > self.max_area {
            return bad("min_area exceeds max_area");
        }
        if self.radii.is_empty() || self.radii.contains(&0) || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return bad("radii must be positive and strictly increasing");
        }
        match self.axis {
            AxisCriterion::Ratio(l) | AxisCriterion::Difference(l) if !(l.is_finite() && l >= 0.0) => {
                bad("axis limit must be a non-negative number")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    TooSmall,
    TooLarge,
    Oblong,
    DenseCluster,
    NoNeuronOverlap,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::TooSmall => "too-small",
            Rejection::TooLarge => "too-large",
            Rejection::Oblong => "oblong",
            Rejection::DenseCluster => "dense-cluster",
            Rejection::NoNeuronOverlap => "no-neuron-overlap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedComponent {
    pub stats: ComponentStats,
    pub reason: Rejection,
    /// Mode of the component, then of each density circle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NucleusReport {
    pub total_cells: usize,
    pub neuron_count: usize,
    pub kept: Vec<ComponentStats>,
    pub rejected: Vec<RejectedComponent>,
    pub params: NucleusParams,
}

impl NucleusReport {
    pub const CSV_HEADER: &'static str = "verdict,area,centroid_x,centroid_y,major_axis,minor_axis";

    /// One row per component.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        let row = |v: &str, s: &ComponentStats| {
            format!(
                "{v},{},{:.3},{:.3},{:.3},{:.3}\n",
                s.area, s.centroid.0, s.centroid.1, s.major_axis, s.minor_axis
            )
        };
        for s in &self.kept {
            out += &row("kept", s);
        }
        for r in &self.rejected {
            out += &row(r.reason.as_str(), &r.stats);
        }
        out
    }
}

/// Filters both channels, binarizes, labels nuclei and applies the gates in
/// order: area, axis, density, neuron overlap.
///
/// The density test takes the mode of the component's own pixels followed
/// by the mode inside each circle around its centroid; an isolated nucleus
/// gives a non-increasing sequence ending below where it started. Anything
/// else is a dense cluster.
pub fn count_nuclei(
    nuclei: &GrayImage,
    neurons: &GrayImage,
    params: &NucleusParams,
) -> Result<NucleusReport, PipelineError> {
    nuclei.same_dimensions(neurons)?;
    params.validate()?;
    let nf = prefilter(nuclei, params.median_radius)?;
    let mf = prefilter(neurons, params.median_radius)?;
    let nuclei_mask = band_threshold(&nf, params.nuclei_threshold, 255)?;
    let neuron_mask = band_threshold(&mf, params.neuron_threshold, 255)?;
    let lab = label_components(&nuclei_mask, Connectivity::Eight);
    let stats = lab.all_stats();

    let n = lab.count() as usize;
    let mut hist = vec![[0u32; 256]; n + 1];
    let mut overlaps = vec![false; n + 1];
    for (p, &l) in lab.labels().iter().enumerate() {
        if l != 0 {
            hist[l as usize][nf.pixels()[p] as usize] += 1;
            overlaps[l as usize] |= neuron_mask.mask()[p];
        }
    }
    let mode_of = |h: &[u32; 256]| (0..256).fold(0usize, |b, v| if h[v] > h[b] { v } else { b }) as u8;

    let mut report = NucleusReport {
        total_cells: 0,
        neuron_count: 0,
        kept: Vec::new(),
        rejected: Vec::new(),
        params: params.clone(),
    };
    for (i, s) in stats.iter().enumerate() {
        let label = i + 1;
        let reject = |reason, modes| RejectedComponent {
            stats: *s,
            reason,
            modes,
        };
        if s.area < params.min_area {
            report.rejected.push(reject(Rejection::TooSmall, None));
            continue;
        }
        report.total_cells += 1;
        if s.area > params.max_area {
            report.rejected.push(reject(Rejection::TooLarge, None));
            continue;
        }
        if params.axis.rejects(s) {
            report.rejected.push(reject(Rejection::Oblong, None));
            continue;
        }
        let center = (s.centroid.0.round() as usize, s.centroid.1.round() as usize);
        let mut modes = vec![mode_of(&hist[label])];
        for &r in &params.radii {
            modes.push(region_mode(&nf, center, r)?);
        }
        let decreasing = modes.windows(2).all(|w| w[1] <= w[0]) && modes.last() < modes.first();
        if !decreasing {
            report.rejected.push(reject(Rejection::DenseCluster, Some(modes)));
            continue;
        }
        if !overlaps[label] {
            report.rejected.push(reject(Rejection::NoNeuronOverlap, Some(modes)));
            continue;
        }
        report.kept.push(*s);
    }
    report.neuron_count = report.kept.len();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, NucleusBlob};
    use crate::image::median_filter;

    fn reason_of(report: &NucleusReport, area: usize) -> Option<Rejection> {
        report.rejected.iter().find(|r| r.stats.area == area).map(|r| r.reason)
    }

    #[test]
    fn fixture_shapes_survive_the_median() {
        let f = fixtures::nucleus_fixture();
        assert_eq!(median_filter(&f.nuclei, 1).unwrap(), f.nuclei);
        let lab = label_components(&band_threshold(&f.nuclei, 128, 255).unwrap(), Connectivity::Eight);
        let mut areas: Vec<usize> = lab.areas()[1..].to_vec();
        areas.sort_unstable();
        let mut expect: Vec<usize> = NucleusBlob::ALL.iter().map(|b| b.area()).collect();
        expect.sort_unstable();
        assert_eq!(areas, expect);
    }

    #[test]
    fn gates_reject_with_reasons() {
        let f = fixtures::nucleus_fixture();
        let r = count_nuclei(&f.nuclei, &f.neurons, &NucleusParams::default()).unwrap();
        assert_eq!(reason_of(&r, NucleusBlob::Small.area()), Some(Rejection::TooSmall));
        assert_eq!(reason_of(&r, NucleusBlob::Large.area()), Some(Rejection::TooLarge));
        assert_eq!(reason_of(&r, NucleusBlob::Oblong.area()), Some(Rejection::Oblong));
        assert_eq!(
            reason_of(&r, NucleusBlob::Orphan.area()),
            Some(Rejection::NoNeuronOverlap)
        );
        assert_eq!(r.kept.len(), 1);
        assert_eq!(r.kept[0].area, 100);
        assert_eq!((r.total_cells, r.neuron_count), (4, 1));
        assert_eq!(r.kept.len() + r.rejected.len(), 5);
        assert!(r.to_csv().contains("too-small,39,"));
    }

    #[test]
    fn single_round_blob_is_a_neuron() {
        let img = fixtures::paint_blob(64, 64, NucleusBlob::Round, (27, 27), 220);
        let r = count_nuclei(&img, &img, &NucleusParams::default()).unwrap();
        assert_eq!((r.total_cells, r.neuron_count), (1, 1));
        assert!(r.rejected.is_empty());
    }

    #[test]
    fn crowded_nucleus_is_a_dense_cluster() {
        let img = fixtures::dense_cluster_image();
        let r = count_nuclei(&img, &img, &NucleusParams::default()).unwrap();
        assert!(r.kept.iter().all(|s| (s.centroid.0 - 41.5).abs() > 1.0));
        let centre = r
            .rejected
            .iter()
            .find(|x| (x.stats.centroid.0 - 41.5).abs() < 1e-9 && (x.stats.centroid.1 - 41.5).abs() < 1e-9)
            .unwrap();
        assert_eq!(centre.stats.area, 96);
        assert_eq!(centre.reason, Rejection::DenseCluster);
        let modes = centre.modes.as_ref().unwrap();
        assert_eq!(modes.first(), modes.last());
    }

    #[test]
    fn difference_criterion() {
        let f = fixtures::nucleus_fixture();
        let p = NucleusParams {
            axis: AxisCriterion::Difference(2.0),
            ..NucleusParams::default()
        };
        let r = count_nuclei(&f.nuclei, &f.neurons, &p).unwrap();
        // under the absolute reading the round blob falls iff its axes differ by more than 2 px
        let round = r.rejected.iter().find(|x| x.stats.area == 100).map(|x| x.reason);
        let expected = {
            let s = r
                .kept
                .iter()
                .chain(r.rejected.iter().map(|x| &x.stats))
                .find(|s| s.area == 100)
                .unwrap();
            (s.major_axis - s.minor_axis > 2.0).then_some(Rejection::Oblong)
        };
        assert_eq!(round, expected);
    }

    #[test]
    fn changing_min_area_only_moves_the_size_gate() {
        let f = fixtures::nucleus_fixture();
        let base = count_nuclei(&f.nuclei, &f.neurons, &NucleusParams::default()).unwrap();
        for min_area in [1, 20, 39, 40, 71, 100, 150, 200] {
            let p = NucleusParams {
                min_area,
                ..NucleusParams::default()
            };
            let r = count_nuclei(&f.nuclei, &f.neurons, &p).unwrap();
            assert_eq!(r.kept.len() + r.rejected.len(), base.kept.len() + base.rejected.len());
            for x in &r.rejected {
                let before = reason_of(&base, x.stats.area);
                if x.reason != Rejection::TooSmall && before != Some(Rejection::TooSmall) {
                    assert_eq!(Some(x.reason), before);
                }
            }
            assert!(r.neuron_count <= r.total_cells);
        }
    }

    #[test]
    fn invalid_inputs() {
        let a = GrayImage::filled(5, 5, 0).unwrap();
        let b = GrayImage::filled(6, 5, 0).unwrap();
        assert!(count_nuclei(&a, &b, &NucleusParams::default()).is_err());
        let p = NucleusParams {
            radii: vec![10, 5],
            ..NucleusParams::default()
        };
        assert!(matches!(
            count_nuclei(&a, &a, &p),
            Err(PipelineError::InvalidParameter(_))
        ));
        let p = NucleusParams {
            min_area: 300,
            ..NucleusParams::default()
        };
        assert!(p.validate().is_err());
    }
}
