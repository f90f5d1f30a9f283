//! Discrete Helmholtz operator.
//!
//! Solves `div((1/ρ) grad p) + ω²/(ρc²) p = -q` on the disk cells of a
//! [`Grid2D`]. The Laplacian part is a blend of the axis-aligned 5-point
//! stencil (weight 2/3) and its 45° rotated counterpart (weight 1/3), each
//! written in flux form with the harmonic mean of `1/ρ` on every face. The
//! mass term is spread over the 3×3 neighbourhood with weights chosen per
//! cell so that discrete plane waves travel at the exact speed along the
//! axes and diagonals at the cell's `k h`. Away from interfaces this is a
//! compact scheme whose phase error is orders of magnitude below the
//! plain 5-point stencil; across interfaces it stays a conservative
//! second-order flux discretisation.
//!
//! Faces between a disk cell `p` and an exterior cell `q` close the
//! stencil with the outgoing-wave extrapolation
//! `p_q = p_p √(r_p/r_q) e^{ik(r_q−r_p)}`, a discrete form of the radiation
//! condition `∂p/∂r = ik p − p/(2r)`. A transducer aperture adds an
//! incoming wave of amplitude `drive` on the same faces. Every coupling is
//! symmetric, so the assembled matrix is complex symmetric and transfers
//! between apertures are reciprocal.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{Grid2D, EXTERIOR};
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Laplacian coupling per axis neighbour, times h².
const AXIS_COUPLING: f64 = 2.0 / 3.0;
/// Laplacian coupling per diagonal neighbour, times h².
const DIAG_COUPLING: f64 = 1.0 / 6.0;

/// Neighbour offsets: four axis directions first, then the diagonals.
pub(crate) const OFFSETS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Transducer face mounted on the disk perimeter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransducerArc {
    /// Angle of the aperture centre, degrees from +x.
    pub center_angle_deg: f64,
    /// Arc length of the aperture, m.
    pub arc_length: f64,
    /// Complex amplitude of the injected wave.
    pub drive: C64,
}

impl Default for TransducerArc {
    fn default() -> Self {
        TransducerArc {
            center_angle_deg: 0.0,
            arc_length: 0.02,
            drive: C64::new(1.0, 0.0),
        }
    }
}

impl TransducerArc {
    pub fn at(center_angle_deg: f64) -> Self {
        TransducerArc {
            center_angle_deg,
            ..Default::default()
        }
    }

    pub fn validate(&self, disk_radius: f64) -> Result<()> {
        if !self.center_angle_deg.is_finite() {
            return Err(Error::domain("transducer angle must be finite"));
        }
        if !(self.arc_length > 0.0 && self.arc_length < PI * disk_radius) {
            return Err(Error::domain(format!(
                "transducer arc length {} m must lie in (0, half the perimeter)",
                self.arc_length
            )));
        }
        if !(self.drive.re.is_finite() && self.drive.im.is_finite()) {
            return Err(Error::domain("transducer drive must be finite"));
        }
        Ok(())
    }
}

/// How the faces on the disk perimeter are treated.
#[derive(Debug, Clone, PartialEq)]
pub enum Exterior {
    /// First-order absorbing condition on every perimeter face.
    Radiation,
    /// Pressure prescribed on the listed cells, which are removed from the
    /// unknowns. Faces to exterior cells of the remaining unknowns still
    /// absorb.
    Dirichlet(Vec<(usize, C64)>),
}

/// Excitation applied to the phantom.
#[derive(Debug, Clone, PartialEq)]
pub enum Drive {
    Arc(TransducerArc),
    /// Line source of the given strength at the cell nearest `position`.
    Point {
        position: (f64, f64),
        strength: C64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub exterior: Exterior,
    pub drives: Vec<Drive>,
}

impl BoundarySpec {
    /// Absorbing perimeter driven by one transducer.
    pub fn transducer(arc: TransducerArc) -> Self {
        BoundarySpec {
            exterior: Exterior::Radiation,
            drives: vec![Drive::Arc(arc)],
        }
    }

    /// Absorbing perimeter with a point source.
    pub fn point_source(position: (f64, f64), strength: C64) -> Self {
        BoundarySpec {
            exterior: Exterior::Radiation,
            drives: vec![Drive::Point { position, strength }],
        }
    }

    /// Prescribes `value(x, y)` on every disk cell that touches the
    /// exterior through any of its eight neighbours.
    pub fn dirichlet_from_fn(grid: &Grid2D, value: impl Fn(f64, f64) -> C64) -> Self {
        let fixed = perimeter_cells(grid)
            .into_iter()
            .map(|idx| {
                let (i, j) = grid.coords(idx);
                let (x, y) = grid.center(i, j);
                (idx, value(x, y))
            })
            .collect();
        BoundarySpec {
            exterior: Exterior::Dirichlet(fixed),
            drives: Vec::new(),
        }
    }

    /// The first transducer drive, if any.
    pub fn transmitter(&self) -> Option<&TransducerArc> {
        self.drives.iter().find_map(|d| match d {
            Drive::Arc(a) => Some(a),
            Drive::Point { .. } => None,
        })
    }
}

/// Disk cells with at least one exterior neighbour (8-neighbourhood).
pub fn perimeter_cells(grid: &Grid2D) -> Vec<usize> {
    (0..grid.cells.len())
        .filter(|&idx| grid.is_interior(idx) && exterior_neighbors(grid, idx).next().is_some())
        .collect()
}

fn neighbor(grid: &Grid2D, idx: usize, (di, dj): (i64, i64)) -> Option<usize> {
    let (i, j) = grid.coords(idx);
    let (ni, nj) = (i as i64 + di, j as i64 + dj);
    if ni < 0 || nj < 0 || ni >= grid.nx as i64 || nj >= grid.ny as i64 {
        return None;
    }
    Some(grid.index(ni as usize, nj as usize))
}

fn exterior_neighbors(grid: &Grid2D, idx: usize) -> impl Iterator<Item = usize> + '_ {
    OFFSETS
        .iter()
        .enumerate()
        .filter_map(move |(k, &off)| match neighbor(grid, idx, off) {
            Some(n) if grid.is_interior(n) => None,
            _ => Some(k),
        })
}

/// Mass weights `(centre, per axis neighbour, per diagonal neighbour)` for
/// a cell with `kappa = k h`. They sum to one and make the discrete
/// dispersion relation exact at 0° and 45° propagation.
pub(crate) fn mass_weights(kappa: f64) -> (f64, f64, f64) {
    // Small-kappa limit of the expressions below.
    const LIMIT: (f64, f64, f64) = (67.0 / 90.0, 2.0 / 45.0, 7.0 / 360.0);
    if kappa < 0.05 {
        return LIMIT;
    }
    let k2 = kappa * kappa;
    let c0 = kappa.cos();
    let c45 = (kappa * FRAC_1_SQRT_2).cos();
    let r0 = (2.0 * (1.0 - c0) / k2 - 1.0) / (1.0 - c0);
    let r45 = ((1.0 - c45) * (8.0 / 3.0 + 2.0 / 3.0 * (1.0 + c45)) / k2 - 1.0) / (1.0 - c45);
    let diag = (r45 - 2.0 * r0) / (4.0 * (1.0 - c45));
    let axis = -(r0 + 4.0 * diag) / 2.0;
    (1.0 - 4.0 * axis - 4.0 * diag, axis, diag)
}

/// One perimeter face of a cell.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BoundaryFace {
    /// Laplacian coupling of the face, times h².
    pub coupling: f64,
    /// Radius of the cell centre, m.
    pub r_inner: f64,
    /// Radius of the exterior neighbour's centre, m.
    pub r_outer: f64,
    /// Polar angle of the face midpoint, rad.
    pub angle: f64,
}

impl BoundaryFace {
    fn spreading(&self) -> f64 {
        (self.r_inner / self.r_outer).sqrt()
    }

    /// Outgoing-wave ratio `p_q / p_p`.
    fn outgoing(&self, k: f64) -> C64 {
        C64::from_polar(self.spreading(), k * (self.r_outer - self.r_inner))
    }

    /// Aperture weight of the face, m: `coupling · √(r_p/r_q) sin(kΔr) / k`,
    /// which tends to the face's projected length as `k h → 0`.
    fn aperture(&self, k: f64) -> f64 {
        let dr = self.r_outer - self.r_inner;
        let s = if k > 0.0 { (k * dr).sin() / k } else { dr };
        self.coupling * self.spreading() * s
    }
}

/// Perimeter faces of a disk cell (faces towards exterior neighbours).
pub(crate) fn boundary_faces(grid: &Grid2D, idx: usize) -> impl Iterator<Item = BoundaryFace> + '_ {
    let h = grid.spacing;
    let (i, j) = grid.coords(idx);
    let (cx, cy) = grid.center(i, j);
    exterior_neighbors(grid, idx).map(move |k| {
        let (di, dj) = (OFFSETS[k].0 as f64, OFFSETS[k].1 as f64);
        let (mx, my) = (cx + 0.5 * h * di, cy + 0.5 * h * dj);
        BoundaryFace {
            coupling: if k < 4 { AXIS_COUPLING } else { DIAG_COUPLING },
            r_inner: cx.hypot(cy),
            r_outer: (cx + h * di).hypot(cy + h * dj),
            angle: my.atan2(mx),
        }
    })
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI) % (2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a - PI
}

/// Aperture weights of a transducer centred at `center_angle_deg`:
/// `(cell, weight in m)` summed over every perimeter face whose midpoint
/// falls inside the arc. The weights add up to roughly the arc length.
pub fn aperture_weights(
    grid: &Grid2D,
    frequency: f64,
    center_angle_deg: f64,
    arc_length: f64,
) -> Result<Vec<(usize, f64)>> {
    let omega = 2.0 * PI * frequency;
    let half = 0.5 * arc_length / grid.disk_radius;
    let centre = center_angle_deg.to_radians();
    let mut out = Vec::new();
    for idx in perimeter_cells(grid) {
        let faces: Vec<_> = boundary_faces(grid, idx)
            .filter(|f| wrap_angle(f.angle - centre).abs() <= half)
            .collect();
        if faces.is_empty() {
            continue;
        }
        let material = grid
            .material(idx)
            .ok_or_else(|| Error::Assembly("perimeter cell without material".into()))?;
        let k = omega / material.sound_speed()?.value;
        let w: f64 = faces.iter().map(|f| f.aperture(k)).sum();
        out.push((idx, w));
    }
    Ok(out)
}

/// Per-cell coefficients: `1/ρ`, `ω²/(ρc²)`, `k = ω/c` and mass weights.
#[derive(Debug, Clone)]
pub(crate) struct CellCoefficients {
    pub beta: Vec<f64>,
    pub mass: Vec<f64>,
    pub wavenumber: Vec<f64>,
    pub weights: Vec<(f64, f64, f64)>,
    pub spacing: f64,
    pub frequency: f64,
}

impl CellCoefficients {
    pub fn new(grid: &Grid2D, frequency: f64) -> Result<Self> {
        let omega = 2.0 * PI * frequency;
        let mut palette = Vec::with_capacity(grid.materials.len());
        for m in &grid.materials {
            m.validate()?;
            let c = m.sound_speed()?.value;
            let k = omega / c;
            palette.push((
                1.0 / m.density,
                omega * omega / (m.density * c * c),
                k,
                mass_weights(k * grid.spacing),
            ));
        }
        let n = grid.cells.len();
        let mut beta = vec![0.0; n];
        let mut mass = vec![0.0; n];
        let mut wavenumber = vec![0.0; n];
        let mut weights = vec![(0.0, 0.0, 0.0); n];
        for (idx, &tag) in grid.cells.iter().enumerate() {
            if tag == EXTERIOR {
                continue;
            }
            let (b, m, k, w) = *palette.get(tag as usize).ok_or_else(|| {
                Error::Assembly(format!("cell {idx} references missing material {tag}"))
            })?;
            beta[idx] = b;
            mass[idx] = m;
            wavenumber[idx] = k;
            weights[idx] = w;
        }
        Ok(CellCoefficients {
            beta,
            mass,
            wavenumber,
            weights,
            spacing: grid.spacing,
            frequency,
        })
    }
}

/// Matrix row of one disk cell: diagonal plus up to eight couplings.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StencilRow {
    pub diag: C64,
    pub neighbors: [(usize, C64); 8],
    pub len: usize,
}

impl StencilRow {
    pub fn entries(&self) -> &[(usize, C64)] {
        &self.neighbors[..self.len]
    }
}

pub(crate) fn stencil_row(grid: &Grid2D, coef: &CellCoefficients, idx: usize) -> StencilRow {
    let h2 = coef.spacing * coef.spacing;
    let (bp, mp, kp) = (coef.beta[idx], coef.mass[idx], coef.wavenumber[idx]);
    let (wc, wa, wd) = coef.weights[idx];
    let mut diag = C64::new(wc * mp, 0.0);
    let mut row = StencilRow {
        diag: C64::new(0.0, 0.0),
        neighbors: [(0, C64::new(0.0, 0.0)); 8],
        len: 0,
    };
    for (k, &off) in OFFSETS.iter().enumerate() {
        let own_mass = if k < 4 { wa * mp } else { wd * mp };
        match neighbor(grid, idx, off) {
            Some(q) if grid.is_interior(q) => {
                let bq = coef.beta[q];
                let face_beta = 2.0 * bp * bq / (bp + bq);
                let (cpl, other_mass) = if k < 4 {
                    (AXIS_COUPLING, coef.weights[q].1 * coef.mass[q])
                } else {
                    (DIAG_COUPLING, coef.weights[q].2 * coef.mass[q])
                };
                let lap = cpl * face_beta / h2;
                diag -= lap;
                row.neighbors[row.len] = (q, C64::new(lap + 0.5 * (own_mass + other_mass), 0.0));
                row.len += 1;
            }
            // Exterior neighbour: lumped mass; the face itself is closed below.
            _ => diag += own_mass,
        }
    }
    for face in boundary_faces(grid, idx) {
        diag += face.coupling * bp / h2 * (face.outgoing(kp) - 1.0);
    }
    row.diag = diag;
    row
}

/// Right-hand side of the drives, indexed by cell.
pub(crate) fn drive_vector(
    grid: &Grid2D,
    coef: &CellCoefficients,
    drives: &[Drive],
) -> Result<Vec<C64>> {
    let mut rhs = vec![C64::new(0.0, 0.0); grid.cells.len()];
    let h2 = coef.spacing * coef.spacing;
    for drive in drives {
        match drive {
            Drive::Arc(arc) => {
                arc.validate(grid.disk_radius)?;
                let weights =
                    aperture_weights(grid, coef.frequency, arc.center_angle_deg, arc.arc_length)?;
                if weights.is_empty() {
                    return Err(Error::Assembly(
                        "transducer aperture covers no perimeter face".into(),
                    ));
                }
                for (idx, w) in weights {
                    let k = coef.wavenumber[idx];
                    rhs[idx] += C64::new(0.0, 2.0 * k * coef.beta[idx] * w / h2) * arc.drive;
                }
            }
            Drive::Point { position, strength } => {
                let (x, y) = *position;
                let fi = ((x - grid.origin.0) / grid.spacing).round();
                let fj = ((y - grid.origin.1) / grid.spacing).round();
                if !(fi >= 0.0 && fj >= 0.0 && (fi as usize) < grid.nx && (fj as usize) < grid.ny) {
                    return Err(Error::domain(format!(
                        "point source ({x}, {y}) lies outside the grid"
                    )));
                }
                let idx = grid.index(fi as usize, fj as usize);
                if !grid.is_interior(idx) {
                    return Err(Error::domain(format!(
                        "point source ({x}, {y}) lies outside the disk"
                    )));
                }
                // Spread like the mass term so the source sees the same
                // consistent averaging as the field.
                let (wc, wa, wd) = coef.weights[idx];
                rhs[idx] -= strength * (wc / h2);
                for (k, &off) in OFFSETS.iter().enumerate() {
                    if let Some(q) = neighbor(grid, idx, off) {
                        if grid.is_interior(q) {
                            rhs[q] -= strength * (if k < 4 { wa } else { wd } / h2);
                        }
                    }
                }
            }
        }
    }
    Ok(rhs)
}
