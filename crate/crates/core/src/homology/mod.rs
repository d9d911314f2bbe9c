//! Betti numbers and integral homology in degrees 0 and 1.
//!
//! Two independent routes are kept side by side: Gaussian elimination over
//! Z/2 ([`betti_mod2`]) and Smith normal form over Z
//! ([`homology_integral`]). They agree exactly when the integral groups are
//! torsion-free, which the integral route certifies.

pub mod gf2;
pub mod snf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cubical::{build_complex, ChainBoundaryMatrix, CubicalComplex};
use crate::image::BinaryImage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HomologyError {
    #[error("integer overflow during Smith normal form reduction")]
    Overflow,
}

/// A chain complex `C_2 → C_1 → C_0` given by its two boundary matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainComplex {
    pub sizes: [usize; 3],
    pub d1: ChainBoundaryMatrix,
    pub d2: ChainBoundaryMatrix,
}

impl From<&CubicalComplex> for ChainComplex {
    fn from(cx: &CubicalComplex) -> Self {
        Self {
            sizes: [cx.count(0), cx.count(1), cx.count(2)],
            d1: cx.boundary_matrix(1),
            d2: cx.boundary_matrix(2),
        }
    }
}

impl ChainComplex {
    pub fn euler_characteristic(&self) -> i64 {
        self.sizes[0] as i64 - self.sizes[1] as i64 + self.sizes[2] as i64
    }

    pub fn betti_mod2(&self) -> (usize, usize) {
        let r1 = gf2::rank(self.d1.mod2_columns(), self.d1.rows);
        let r2 = gf2::rank(self.d2.mod2_columns(), self.d2.rows);
        (self.sizes[0] - r1, self.sizes[1] - r1 - r2)
    }

    pub fn homology_integral(&self) -> Result<HomologyResult, HomologyError> {
        let f1 = snf::invariant_factors(&self.d1)?;
        let f2 = snf::invariant_factors(&self.d2)?;
        let torsion = |f: &[u64]| f.iter().copied().filter(|&d| d > 1).collect::<Vec<_>>();
        Ok(HomologyResult {
            betti0: self.sizes[0] - f1.len(),
            betti1: self.sizes[1] - f1.len() - f2.len(),
            torsion: [torsion(&f1), torsion(&f2)],
        })
    }
}

/// Free ranks and torsion coefficients of `H_0` and `H_1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyResult {
    pub betti0: usize,
    pub betti1: usize,
    /// Invariant factors greater than one, for `H_0` and `H_1`.
    pub torsion: [Vec<u64>; 2],
}

impl HomologyResult {
    pub fn is_torsion_free(&self) -> bool {
        self.torsion.iter().all(Vec::is_empty)
    }
}

/// `b_k = dim C_k − rank ∂_k − rank ∂_{k+1}` over Z/2.
pub fn betti_mod2(cx: &CubicalComplex) -> (usize, usize) {
    ChainComplex::from(cx).betti_mod2()
}

pub fn homology_integral(cx: &CubicalComplex) -> Result<HomologyResult, HomologyError> {
    ChainComplex::from(cx).homology_integral()
}

/// Number of connected components as the rank of `H_0`.
pub fn count_components_homological(bin: &BinaryImage) -> usize {
    betti_mod2(&build_complex(bin)).0
}
