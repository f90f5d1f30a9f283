//! Frequency-domain acoustic solver over the phantom cross-section.

mod field;
mod grid;
mod linear;
mod operator;
mod sensitivity;
mod window;

pub use field::{
    sample_receivers, sample_receivers_with, PressureField, ReceiverMode, ReceiverSample,
    DEFAULT_RECEIVER_ANGLES,
};
pub use grid::{
    rasterize, rasterize_with, Grid2D, Rasterization, EXTERIOR, FRACTION_LEVELS,
    MIN_POINTS_PER_WAVELENGTH, MUSCLE, TENDON,
};
pub use linear::{SolveReport, RESIDUAL_LIMIT};
pub use operator::{
    aperture_weights, perimeter_cells, BoundarySpec, Drive, Exterior, TransducerArc, C64,
};
pub use sensitivity::{sensitivity_decomposition, SensitivityDecomposition};
pub use window::{WindowBox, WindowedSolver};

use faer::sparse::Triplet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::{MaterialProps, PhantomGeometry};
use linear::{from_triplets, solve_checked, SparseLu, SparseMatrix};
use operator::{drive_vector, stencil_row, CellCoefficients};

/// Default grid spacing, m.
pub const DEFAULT_SPACING: f64 = 0.25e-3;
/// Default drive frequency, Hz.
pub const DEFAULT_FREQUENCY: f64 = 52e3;

const NO_UNKNOWN: usize = usize::MAX;

/// Assembled linear system `A x = b` over the free disk cells.
pub(crate) struct HelmholtzSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<C64>,
    /// Cell index of each unknown.
    pub unknown_cells: Vec<usize>,
    pub fixed: Vec<(usize, C64)>,
    pub ncells: usize,
}

impl HelmholtzSystem {
    pub fn scatter(&self, x: &[C64]) -> Vec<C64> {
        let mut values = vec![C64::new(0.0, 0.0); self.ncells];
        for (&cell, &v) in self.unknown_cells.iter().zip(x) {
            values[cell] = v;
        }
        for &(cell, v) in &self.fixed {
            values[cell] = v;
        }
        values
    }
}

pub(crate) fn assemble(
    grid: &Grid2D,
    boundary: &BoundarySpec,
    frequency: f64,
) -> Result<HelmholtzSystem> {
    grid.check_resolution(frequency)?;
    let coef = CellCoefficients::new(grid, frequency)?;
    let ncells = grid.cells.len();

    let fixed = match &boundary.exterior {
        Exterior::Radiation => Vec::new(),
        Exterior::Dirichlet(list) => list.clone(),
    };
    let mut fixed_value = vec![None; ncells];
    for &(cell, v) in &fixed {
        if cell >= ncells || !grid.is_interior(cell) {
            return Err(Error::Assembly(format!(
                "Dirichlet cell {cell} is not a disk cell"
            )));
        }
        fixed_value[cell] = Some(v);
    }

    let mut cell_to_unknown = vec![NO_UNKNOWN; ncells];
    let mut unknown_cells = Vec::new();
    for cell in 0..ncells {
        if grid.is_interior(cell) && fixed_value[cell].is_none() {
            cell_to_unknown[cell] = unknown_cells.len();
            unknown_cells.push(cell);
        }
    }
    if unknown_cells.is_empty() {
        return Err(Error::Assembly("no free disk cells to solve for".into()));
    }

    let source = drive_vector(grid, &coef, &boundary.drives)?;
    let mut rhs = Vec::with_capacity(unknown_cells.len());
    let mut triplets = Vec::with_capacity(unknown_cells.len() * 9);
    for (row, &cell) in unknown_cells.iter().enumerate() {
        let stencil = stencil_row(grid, &coef, cell);
        triplets.push(Triplet::new(row, row, stencil.diag));
        let mut b = source[cell];
        for &(q, v) in stencil.entries() {
            match fixed_value[q] {
                Some(g) => b -= v * g,
                None => triplets.push(Triplet::new(row, cell_to_unknown[q], v)),
            }
        }
        rhs.push(b);
    }
    let matrix = from_triplets(unknown_cells.len(), &triplets)?;
    Ok(HelmholtzSystem {
        matrix,
        rhs,
        unknown_cells,
        fixed,
        ncells,
    })
}

/// Assembles the Helmholtz system for `grid` and solves it directly.
pub fn assemble_and_solve(
    grid: &Grid2D,
    boundary: &BoundarySpec,
    frequency: f64,
) -> Result<PressureField> {
    let system = assemble(grid, boundary, frequency)?;
    let (x, report) = if system.rhs.iter().all(|b| *b == C64::new(0.0, 0.0)) {
        // Homogeneous system: the zero field is the solution.
        let n = system.rhs.len();
        (
            vec![C64::new(0.0, 0.0); n],
            SolveReport {
                unknowns: n,
                relative_residual: 0.0,
                refinement_steps: 0,
            },
        )
    } else {
        let lu = SparseLu::factor(&system.matrix)?;
        solve_checked(&system.matrix, &lu, &system.rhs)?
    };
    Ok(PressureField {
        grid: grid.clone(),
        frequency,
        values: system.scatter(&x),
        transmitter: boundary.transmitter().copied(),
        report,
    })
}

/// Solver block of the JSON configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub spacing_m: f64,
    pub frequency_hz: f64,
    pub transmitter_angle_deg: f64,
    pub arc_length_m: f64,
    pub receiver_angles_deg: Vec<f64>,
    pub receiver_mode: ReceiverMode,
    pub rasterization: Rasterization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            spacing_m: DEFAULT_SPACING,
            frequency_hz: DEFAULT_FREQUENCY,
            transmitter_angle_deg: 0.0,
            arc_length_m: TransducerArc::default().arc_length,
            receiver_angles_deg: DEFAULT_RECEIVER_ANGLES.to_vec(),
            receiver_mode: ReceiverMode::Aperture,
            // Keeps the transfers smooth in the load; the center-point rule
            // steps whenever a shrinking outline crosses a cell centre.
            rasterization: Rasterization::AreaFraction(16),
        }
    }
}

impl SolverConfig {
    pub fn transmitter(&self) -> TransducerArc {
        TransducerArc {
            center_angle_deg: self.transmitter_angle_deg,
            arc_length: self.arc_length_m,
            drive: C64::new(1.0, 0.0),
        }
    }

    pub fn boundary(&self) -> BoundarySpec {
        BoundarySpec::transducer(self.transmitter())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing_m.is_finite() && self.spacing_m > 0.0) {
            return Err(Error::config(format!(
                "spacing_m must be > 0, got {}",
                self.spacing_m
            )));
        }
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(Error::config(format!(
                "frequency_hz must be > 0, got {}",
                self.frequency_hz
            )));
        }
        if self.receiver_angles_deg.iter().any(|a| !a.is_finite()) {
            return Err(Error::config("receiver angles must be finite"));
        }
        Ok(())
    }

    pub fn rasterize(
        &self,
        geom: &PhantomGeometry,
        muscle: &MaterialProps,
        tendon: &MaterialProps,
    ) -> Result<Grid2D> {
        rasterize_with(
            geom,
            muscle,
            tendon,
            self.spacing_m,
            self.frequency_hz,
            self.rasterization,
        )
    }

    /// Rasterises `geom` with the given materials and solves for the
    /// receiver transfers.
    pub fn run(
        &self,
        geom: &PhantomGeometry,
        muscle: &MaterialProps,
        tendon: &MaterialProps,
    ) -> Result<(PressureField, Vec<ReceiverSample>)> {
        self.validate()?;
        let grid = self.rasterize(geom, muscle, tendon)?;
        let field = assemble_and_solve(&grid, &self.boundary(), self.frequency_hz)?;
        let samples = sample_receivers_with(&field, &self.receiver_angles_deg, self.receiver_mode)?;
        Ok((field, samples))
    }
}
