use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::{MaterialProps, PhantomGeometry};

/// Cell tag for points outside the muscle disk.
pub const EXTERIOR: u8 = u8::MAX;
/// Palette index of the muscle material.
pub const MUSCLE: u8 = 0;
/// Palette index of the tendon material.
pub const TENDON: u8 = 1;

/// Minimum number of grid points per shortest wavelength.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 10.0;

/// Uniform cell-centred grid over the phantom cross-section.
///
/// Cell `(i, j)` is centred at `origin + (i h, j h)` and stored at
/// `j * nx + i`. The origin is chosen so the grid is symmetric about both
/// axes through the disk centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Centre of cell (0, 0).
    pub origin: (f64, f64),
    pub disk_radius: f64,
    pub materials: Vec<MaterialProps>,
    /// Palette index per cell, [`EXTERIOR`] outside the disk.
    pub cells: Vec<u8>,
}

impl Grid2D {
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + i as f64 * self.spacing,
            self.origin.1 + j as f64 * self.spacing,
        )
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.cells[idx] != EXTERIOR
    }

    pub fn material(&self, idx: usize) -> Option<&MaterialProps> {
        match self.cells[idx] {
            EXTERIOR => None,
            m => self.materials.get(m as usize),
        }
    }

    pub fn count(&self, tag: u8) -> usize {
        self.cells.iter().filter(|&&c| c == tag).count()
    }

    pub fn interior_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c != EXTERIOR).count()
    }

    /// Smallest sound speed over the palette entries actually used.
    pub fn min_sound_speed(&self) -> Result<f64> {
        let mut used = [false; 256];
        for &c in &self.cells {
            used[c as usize] = true;
        }
        let mut cmin = f64::INFINITY;
        for (k, m) in self.materials.iter().enumerate() {
            if used[k] {
                cmin = cmin.min(m.sound_speed()?.value);
            }
        }
        Ok(cmin)
    }

    /// Checks the points-per-wavelength bound at `frequency`.
    pub fn check_resolution(&self, frequency: f64) -> Result<()> {
        check_spacing(self.spacing, self.min_sound_speed()?, frequency)
    }
}

pub(crate) fn check_spacing(spacing: f64, min_speed: f64, frequency: f64) -> Result<()> {
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::config(format!(
            "frequency must be > 0, got {frequency}"
        )));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::config(format!(
            "grid spacing must be > 0, got {spacing}"
        )));
    }
    let lambda_min = min_speed / frequency;
    let bound = lambda_min / MIN_POINTS_PER_WAVELENGTH;
    if spacing > bound * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "grid spacing {spacing:.3e} m exceeds lambda_min/{MIN_POINTS_PER_WAVELENGTH} = {bound:.3e} m \
             (lambda_min = {lambda_min:.3e} m at {frequency} Hz)"
        )));
    }
    Ok(())
}

/// How cells straddling the tendon outline are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rasterization {
    /// Whole cell takes the material at its centre.
    #[default]
    CenterPoint,
    /// Cells cut by the outline get an effective medium weighted by the
    /// tendon fraction, estimated on an `n × n` sub-grid and quantised to
    /// [`FRACTION_LEVELS`] steps. The field then responds smoothly to
    /// diameter changes far below the cell size.
    AreaFraction(u8),
}

/// Number of intermediate tendon fractions in an area-fraction grid.
pub const FRACTION_LEVELS: u8 = 240;

/// Builds the material map by testing each cell centre: inside the oval is
/// tendon, inside the disk is muscle, everything else exterior.
pub fn rasterize(
    geom: &PhantomGeometry,
    muscle: &MaterialProps,
    tendon: &MaterialProps,
    spacing: f64,
    frequency: f64,
) -> Result<Grid2D> {
    rasterize_with(
        geom,
        muscle,
        tendon,
        spacing,
        frequency,
        Rasterization::CenterPoint,
    )
}

pub fn rasterize_with(
    geom: &PhantomGeometry,
    muscle: &MaterialProps,
    tendon: &MaterialProps,
    spacing: f64,
    frequency: f64,
    mode: Rasterization,
) -> Result<Grid2D> {
    geom.validate()?;
    muscle.validate()?;
    tendon.validate()?;
    let cmin = muscle.sound_speed()?.value.min(tendon.sound_speed()?.value);
    check_spacing(spacing, cmin, frequency)?;

    let radius = geom.muscle_radius();
    // One guaranteed exterior ring on every side.
    let n = (geom.muscle_diameter / spacing - 1e-9).ceil() as usize + 2;
    let half = 0.5 * (n as f64 - 1.0) * spacing;
    let mut grid = Grid2D {
        spacing,
        nx: n,
        ny: n,
        origin: (-half, -half),
        disk_radius: radius,
        materials: vec![*muscle, *tendon],
        cells: vec![EXTERIOR; n * n],
    };
    for j in 0..n {
        for i in 0..n {
            let (x, y) = grid.center(i, j);
            let tag = if geom.in_tendon(x, y) {
                TENDON
            } else if geom.in_muscle_disk(x, y) {
                MUSCLE
            } else {
                EXTERIOR
            };
            let idx = grid.index(i, j);
            grid.cells[idx] = tag;
        }
    }
    if let Rasterization::AreaFraction(n) = mode {
        if n < 2 {
            return Err(Error::config(
                "area-fraction rasterisation needs at least 2 sub-samples per side",
            ));
        }
        apply_area_fractions(&mut grid, geom, muscle, tendon, n as usize);
    }
    Ok(grid)
}

fn apply_area_fractions(
    grid: &mut Grid2D,
    geom: &PhantomGeometry,
    muscle: &MaterialProps,
    tendon: &MaterialProps,
    n: usize,
) {
    let levels = FRACTION_LEVELS as usize;
    grid.materials
        .extend((1..levels).map(|q| muscle.mixture(tendon, q as f64 / levels as f64)));
    let h = grid.spacing;
    let (ex, ey) = geom.tendon_half_extent();
    let (ox, oy) = geom.tendon_center_offset;
    let i_lo = ((ox - ex - grid.origin.0) / h).floor().max(0.0) as usize;
    let i_hi = (((ox + ex - grid.origin.0) / h).ceil() as usize).min(grid.nx - 1);
    let j_lo = ((oy - ey - grid.origin.1) / h).floor().max(0.0) as usize;
    let j_hi = (((oy + ey - grid.origin.1) / h).ceil() as usize).min(grid.ny - 1);
    for j in j_lo..=j_hi {
        for i in i_lo..=i_hi {
            let idx = grid.index(i, j);
            if !grid.is_interior(idx) {
                continue;
            }
            let (cx, cy) = grid.center(i, j);
            let mut inside = 0usize;
            for b in 0..n {
                let y = cy + h * ((b as f64 + 0.5) / n as f64 - 0.5);
                for a in 0..n {
                    let x = cx + h * ((a as f64 + 0.5) / n as f64 - 0.5);
                    inside += geom.in_tendon(x, y) as usize;
                }
            }
            let q = (inside * levels + n * n / 2) / (n * n);
            grid.cells[idx] = match q {
                0 => MUSCLE,
                q if q >= levels => TENDON,
                q => TENDON + q as u8,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::OVAL_AREA_FACTOR;

    fn default_grid() -> Grid2D {
        rasterize(
            &PhantomGeometry::default(),
            &MaterialProps::MUSCLE,
            &MaterialProps::TENDON,
            0.25e-3,
            52e3,
        )
        .unwrap()
    }

    #[test]
    fn default_grid_shape_and_tendon_fraction() {
        let g = default_grid();
        assert!((280..=284).contains(&g.nx));
        assert_eq!(g.nx, g.ny);
        let tendon = g.count(TENDON) as f64;
        let disk = g.interior_count() as f64;
        let expected = OVAL_AREA_FACTOR * 12.0 * 9.0 / (std::f64::consts::PI * 35.0 * 35.0);
        let ratio = tendon / disk;
        assert!(
            (ratio / expected - 1.0).abs() < 0.02,
            "ratio {ratio} vs {expected}"
        );
    }

    #[test]
    fn centred_tendon_is_mirror_symmetric() {
        let g = default_grid();
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert_eq!(g.cells[g.index(i, j)], g.cells[g.index(i, g.ny - 1 - j)]);
                assert_eq!(g.cells[g.index(i, j)], g.cells[g.index(g.nx - 1 - i, j)]);
            }
        }
    }

    #[test]
    fn coarse_spacing_is_rejected_with_the_bound() {
        let err = rasterize(
            &PhantomGeometry::default(),
            &MaterialProps::MUSCLE,
            &MaterialProps::TENDON,
            1e-3,
            52e3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("lambda_min"));
    }

    #[test]
    fn oversized_tendon_is_rejected() {
        let geom = PhantomGeometry {
            tendon_major_diameter: 0.07,
            tendon_minor_diameter: 0.07,
            ..Default::default()
        };
        assert!(rasterize(
            &geom,
            &MaterialProps::MUSCLE,
            &MaterialProps::TENDON,
            0.25e-3,
            52e3
        )
        .is_err());
    }

    #[test]
    fn area_fraction_grid_keeps_the_tendon_area() {
        let geom = PhantomGeometry::default();
        let g = rasterize_with(
            &geom,
            &MaterialProps::MUSCLE,
            &MaterialProps::TENDON,
            0.25e-3,
            52e3,
            Rasterization::AreaFraction(16),
        )
        .unwrap();
        let levels = FRACTION_LEVELS as f64;
        let area: f64 = g
            .cells
            .iter()
            .map(|&c| match c {
                EXTERIOR | MUSCLE => 0.0,
                TENDON => 1.0,
                q => (q - TENDON) as f64 / levels,
            })
            .sum::<f64>()
            * g.spacing
            * g.spacing;
        let exact = std::f64::consts::PI * 0.006 * 0.0045;
        assert!((area / exact - 1.0).abs() < 2e-3, "{area} vs {exact}");
        assert!(g.materials.len() <= 255);
    }

    #[test]
    fn outer_ring_is_exterior() {
        let g = default_grid();
        for i in 0..g.nx {
            assert!(!g.is_interior(g.index(i, 0)));
            assert!(!g.is_interior(g.index(i, g.ny - 1)));
            assert!(!g.is_interior(g.index(0, i)));
            assert!(!g.is_interior(g.index(g.nx - 1, i)));
        }
    }
}
