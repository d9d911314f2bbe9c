//! Topological image analysis for fluorescence microscopy.
//!
//! Binary images become cubical complexes; homology, discrete Morse
//! reduction and persistence are computed on those complexes and feed the
//! synapse, nucleus, neuron-location and structure pipelines.

pub mod cubical;
pub mod dvf;
pub mod fixtures;
pub mod homology;
pub mod image;
pub mod persistence;
pub mod pipelines;
pub mod unionfind;

pub use cubical::{build_complex, euler_characteristic, Cell, ChainBoundaryMatrix, CubicalComplex, CubicalError};
pub use dvf::{apply_field, build_greedy_dvf, reduced_betti, CriticalComplex, DiscreteVectorField, DvfError};
pub use homology::{betti_mod2, count_components_homological, homology_integral, HomologyError, HomologyResult};
pub use image::{BinaryImage, GrayImage, ImageError, ImageStack};
pub use persistence::{
    build_filtration, persistent_components, persistent_homology, zigzag_h0, Barcode, Direction, Filtration,
    ZigzagIntervals,
};
pub use pipelines::PipelineError;
