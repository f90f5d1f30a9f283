use serde::{Deserialize, Serialize};

use super::grid::Grid2D;
use super::linear::SolveReport;
use super::operator::{aperture_weights, TransducerArc, C64};
use crate::error::{Error, Result};

/// Default receiver angles, degrees relative to the transmitter.
pub const DEFAULT_RECEIVER_ANGLES: [f64; 7] = [45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0];

/// Complex pressure on every grid cell at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub grid: Grid2D,
    pub frequency: f64,
    /// Pa per cell, zero outside the disk.
    pub values: Vec<C64>,
    /// Transducer that produced the field, when there is one.
    pub transmitter: Option<TransducerArc>,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverSample {
    /// Degrees relative to the transmitter.
    pub angle_deg: f64,
    /// Received pressure over drive amplitude.
    pub transfer: C64,
}

impl ReceiverSample {
    pub fn magnitude(&self) -> f64 {
        self.transfer.norm()
    }

    pub fn phase(&self) -> f64 {
        self.transfer.arg()
    }
}

/// How a receiver turns the perimeter field into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverMode {
    /// Mean pressure over a transducer face of the transmitter's arc
    /// length, weighted like the transmitting aperture. Transfers are
    /// exactly reciprocal.
    #[default]
    Aperture,
    /// Bilinear interpolation at the perimeter point, using disk cells
    /// only.
    Point,
}

impl PressureField {
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Bilinear interpolation at `(x, y)` over the surrounding disk cells,
    /// renormalising the weights when some corners are exterior.
    pub fn probe(&self, x: f64, y: f64) -> Result<C64> {
        let g = &self.grid;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::domain("probe position must be finite"));
        }
        let fx = (x - g.origin.0) / g.spacing;
        let fy = (y - g.origin.1) / g.spacing;
        let (i0, j0) = (fx.floor(), fy.floor());
        if i0 < 0.0 || j0 < 0.0 || i0 + 1.0 >= g.nx as f64 || j0 + 1.0 >= g.ny as f64 {
            return Err(Error::domain(format!(
                "probe ({x}, {y}) lies outside the grid"
            )));
        }
        let (tx, ty) = (fx - i0, fy - j0);
        let (i0, j0) = (i0 as usize, j0 as usize);
        let mut acc = C64::new(0.0, 0.0);
        let mut wsum = 0.0;
        for (di, dj, w) in [
            (0, 0, (1.0 - tx) * (1.0 - ty)),
            (1, 0, tx * (1.0 - ty)),
            (0, 1, (1.0 - tx) * ty),
            (1, 1, tx * ty),
        ] {
            let idx = g.index(i0 + di, j0 + dj);
            if g.is_interior(idx) && w > 0.0 {
                acc += self.values[idx] * w;
                wsum += w;
            }
        }
        if wsum == 0.0 {
            return Err(Error::domain(format!(
                "probe ({x}, {y}) has no disk cell nearby"
            )));
        }
        Ok(acc / wsum)
    }
}

/// Samples the default aperture receivers at `angles` (degrees relative to
/// the field's transmitter).
pub fn sample_receivers(field: &PressureField, angles: &[f64]) -> Result<Vec<ReceiverSample>> {
    sample_receivers_with(field, angles, ReceiverMode::Aperture)
}

pub fn sample_receivers_with(
    field: &PressureField,
    angles: &[f64],
    mode: ReceiverMode,
) -> Result<Vec<ReceiverSample>> {
    let tx = field
        .transmitter
        .ok_or_else(|| Error::domain("field has no transducer drive to normalise by"))?;
    if tx.drive.norm() == 0.0 {
        return Err(Error::domain("transducer drive amplitude is zero"));
    }
    angles
        .iter()
        .map(|&rel| {
            if !rel.is_finite() {
                return Err(Error::domain(format!(
                    "receiver angle {rel} is not on the perimeter"
                )));
            }
            let abs = tx.center_angle_deg + rel;
            let pressure = match mode {
                ReceiverMode::Aperture => {
                    let weights =
                        aperture_weights(&field.grid, field.frequency, abs, tx.arc_length)?;
                    if weights.is_empty() {
                        return Err(Error::domain(format!(
                            "receiver at {rel} deg covers no perimeter face"
                        )));
                    }
                    weights
                        .iter()
                        .map(|&(idx, w)| field.values[idx] * w)
                        .sum::<C64>()
                        / tx.arc_length
                }
                ReceiverMode::Point => {
                    let a = abs.to_radians();
                    let r = field.grid.disk_radius;
                    field.probe(r * a.cos(), r * a.sin())?
                }
            };
            Ok(ReceiverSample {
                angle_deg: rel,
                transfer: pressure / tx.drive,
            })
        })
        .collect()
}
