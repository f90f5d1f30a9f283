use serde::{Deserialize, Serialize};

use super::field::ReceiverSample;
use super::SolverConfig;
use crate::error::Result;
use crate::phantom::{deform, LoadState, MaterialProps, PhantomGeometry};

/// Receiver changes relative to the unloaded phantom when only the
/// geometry, only the tendon stiffness, or both follow the load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityDecomposition {
    pub baseline: Vec<ReceiverSample>,
    pub geometry_only: Vec<ReceiverSample>,
    pub stiffness_only: Vec<ReceiverSample>,
    pub combined: Vec<ReceiverSample>,
}

impl SensitivityDecomposition {
    /// Per receiver `|Δgeometry| / |Δstiffness|`.
    pub fn dominance_ratios(&self) -> Vec<f64> {
        self.geometry_only
            .iter()
            .zip(&self.stiffness_only)
            .map(|(g, s)| g.transfer.norm() / s.transfer.norm())
            .collect()
    }

    /// Per receiver change of `|T|` in the geometry-only, stiffness-only
    /// and combined runs. A wearable measures amplitude, so this is the
    /// view that decides which mechanism a receiver reports.
    pub fn magnitude_deltas(&self) -> Vec<[f64; 3]> {
        (0..self.baseline.len())
            .map(|k| {
                let base = self.baseline[k].transfer;
                let change = |d: &[ReceiverSample]| (base + d[k].transfer).norm() - base.norm();
                [
                    change(&self.geometry_only),
                    change(&self.stiffness_only),
                    change(&self.combined),
                ]
            })
            .collect()
    }

    /// Per receiver `|Δ|T|_geometry| / |Δ|T|_stiffness|`.
    pub fn magnitude_dominance_ratios(&self) -> Vec<f64> {
        self.magnitude_deltas()
            .iter()
            .map(|d| d[0].abs() / d[1].abs())
            .collect()
    }
}

fn delta(loaded: &[ReceiverSample], base: &[ReceiverSample]) -> Vec<ReceiverSample> {
    loaded
        .iter()
        .zip(base)
        .map(|(l, b)| ReceiverSample {
            angle_deg: l.angle_deg,
            transfer: l.transfer - b.transfer,
        })
        .collect()
}

/// Runs the unloaded phantom plus three loaded variants and returns the
/// receiver deltas of each variant.
pub fn sensitivity_decomposition(
    geom: &PhantomGeometry,
    muscle: &MaterialProps,
    tendon: &MaterialProps,
    load: &LoadState,
    config: &SolverConfig,
) -> Result<SensitivityDecomposition> {
    let (deformed, _) = deform(geom, tendon, load.elongation, 1.0)?;
    let stiffened = tendon.with_scaled_modulus(load.stiffness_scale);
    let (_, base) = config.run(geom, muscle, tendon)?;
    let (_, g) = config.run(&deformed, muscle, tendon)?;
    let (_, s) = config.run(geom, muscle, &stiffened)?;
    let (_, c) = config.run(&deformed, muscle, &stiffened)?;
    Ok(SensitivityDecomposition {
        geometry_only: delta(&g, &base),
        stiffness_only: delta(&s, &base),
        combined: delta(&c, &base),
        baseline: base,
    })
}
