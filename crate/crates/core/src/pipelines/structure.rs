use serde::{Deserialize, Serialize};

use super::{prefilter, PipelineError};
use crate::image::{max_projection, BinaryImage, GrayImage, ImageStack};
use crate::persistence::{build_filtration, default_levels, h0_barcode, persistent_components_in, Barcode, Direction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureParams {
    /// Superlevel thresholds, strictly descending.
    pub levels: Vec<u8>,
    /// Minimum bar length, in levels, of a kept component.
    pub min_persistence: usize,
    /// Median radius applied to every slice; 0 disables filtering.
    pub median_radius: usize,
}

impl Default for StructureParams {
    fn default() -> Self {
        Self {
            levels: default_levels(8),
            min_persistence: 2,
            median_radius: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureResult {
    #[serde(skip)]
    pub structure: Option<BinaryImage>,
    #[serde(skip)]
    pub projection: Option<GrayImage>,
    /// H0 barcode of the projection's filtration.
    pub barcode: Barcode,
    pub params: StructureParams,
}

impl StructureResult {
    pub fn structure(&self) -> &BinaryImage {
        self.structure.as_ref().expect("set by extract_structure")
    }
}

/// Median-filters every slice, projects by maximum, filters the projection
/// by superlevel sets and keeps the components that persist long enough.
pub fn extract_structure(stack: &ImageStack, params: &StructureParams) -> Result<StructureResult, PipelineError> {
    let filtered = stack
        .slices()
        .iter()
        .map(|s| prefilter(s, params.median_radius))
        .collect::<Result<Vec<_>, _>>()?;
    let projection = max_projection(&ImageStack::new(filtered)?);
    let filt = build_filtration(&projection, &params.levels, Direction::Superlevel)?;
    let structure = persistent_components_in(&filt, params.min_persistence)?;
    Ok(StructureResult {
        structure: Some(structure),
        projection: Some(projection),
        barcode: h0_barcode(&filt),
        params: params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::image::{band_threshold, label_components, Connectivity};
    use crate::persistence::zigzag_h0;

    #[test]
    fn identical_clean_slices() {
        let blob = fixtures::paint_blob(40, 40, fixtures::NucleusBlob::Round, (12, 12), 200);
        let stack = ImageStack::new(vec![blob.clone(), blob.clone(), blob.clone()]).unwrap();
        let p = StructureParams {
            min_persistence: 1,
            ..StructureParams::default()
        };
        let r = extract_structure(&stack, &p).unwrap();
        assert_eq!(r.structure(), &band_threshold(&blob, 28, 255).unwrap());
    }

    #[test]
    fn transient_speck_is_dropped() {
        let stack = fixtures::structure_stack();
        let r = extract_structure(&stack, &StructureParams::default()).unwrap();
        let s = r.structure();
        assert_eq!(label_components(s, Connectivity::Eight).count(), 2);
        // the speck survives the median but is dim: only the last level sees it
        let proj = r.projection.as_ref().unwrap();
        let last = band_threshold(proj, 28, 255).unwrap();
        assert_eq!(label_components(&last, Connectivity::Eight).count(), 3);
        assert!(s.is_subset_of(&last));
        let one = extract_structure(
            &stack,
            &StructureParams {
                min_persistence: 1,
                ..StructureParams::default()
            },
        )
        .unwrap();
        assert_eq!(one.structure(), &last);
    }

    #[test]
    fn zigzag_agrees_with_structure() {
        let stack = fixtures::structure_stack();
        let r = extract_structure(&stack, &StructureParams::default()).unwrap();
        let slices: Vec<BinaryImage> = stack
            .slices()
            .iter()
            .map(|s| band_threshold(&crate::image::median_filter(s, 1).unwrap(), 113, 255).unwrap())
            .collect();
        let z = zigzag_h0(&slices).unwrap();
        let spanning = z
            .slice_spans()
            .iter()
            .filter(|&&(a, b)| (a, b) == (1, slices.len()))
            .count();
        assert_eq!(
            spanning,
            label_components(r.structure(), Connectivity::Eight).count() as usize
        );
    }

    #[test]
    fn bad_levels_are_reported() {
        let stack = fixtures::structure_stack();
        let p = StructureParams {
            levels: vec![10, 20],
            ..StructureParams::default()
        };
        assert!(matches!(
            extract_structure(&stack, &p),
            Err(PipelineError::Persistence(_))
        ));
    }
}
