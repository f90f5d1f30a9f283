//! Repeated solves on phantoms that differ only inside a fixed box.
//!
//! The unknowns split into the box `B` and the rest `E`. Since `A_EE`,
//! `A_EB` and the drive on `E` are shared by every phantom that agrees
//! outside the box, they are factorised once and the coupling is reduced
//! to the dense Schur term `M = A_BE A_EE⁻¹ A_EB` on the box ring `R` (box
//! cells with a neighbour outside the box). Each phantom then needs one
//! small factorisation of `A_BB − M` and one back-substitution on `E`.

use faer::sparse::linalg::solvers::SymbolicLu;
use faer::sparse::Triplet;
use faer::Mat;

use super::field::PressureField;
use super::grid::Grid2D;
use super::linear::{from_triplets, norm, SolveReport, SparseLu, SparseMatrix, RESIDUAL_LIMIT};
use super::operator::{
    drive_vector, stencil_row, BoundarySpec, CellCoefficients, Drive, TransducerArc, C64, OFFSETS,
};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
const BATCH: usize = 48;
const REFINE_TARGET: f64 = 1e-12;
const MAX_REFINEMENT_STEPS: usize = 3;

/// Inclusive cell-index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowBox {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl WindowBox {
    /// Smallest box holding a disk of `radius` m around `center`, grown
    /// by `margin` cells on every side.
    pub fn around(grid: &Grid2D, center: (f64, f64), radius: f64, margin: usize) -> Result<Self> {
        let h = grid.spacing;
        let lo_i = ((center.0 - radius - grid.origin.0) / h).floor() - margin as f64;
        let hi_i = ((center.0 + radius - grid.origin.0) / h).ceil() + margin as f64;
        let lo_j = ((center.1 - radius - grid.origin.1) / h).floor() - margin as f64;
        let hi_j = ((center.1 + radius - grid.origin.1) / h).ceil() + margin as f64;
        if lo_i < 0.0 || lo_j < 0.0 || hi_i >= grid.nx as f64 || hi_j >= grid.ny as f64 {
            return Err(Error::domain("window box extends beyond the grid"));
        }
        Ok(WindowBox {
            i0: lo_i as usize,
            i1: hi_i as usize,
            j0: lo_j as usize,
            j1: hi_j as usize,
        })
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.i0..=self.i1).contains(&i) && (self.j0..=self.j1).contains(&j)
    }

    fn width(&self) -> usize {
        self.i1 - self.i0 + 1
    }

    fn len(&self) -> usize {
        self.width() * (self.j1 - self.j0 + 1)
    }
}

/// Direct solver specialised to a family of phantoms sharing everything
/// outside a [`WindowBox`] and driven by one transducer.
pub struct WindowedSolver {
    reference: Grid2D,
    frequency: f64,
    transmitter: TransducerArc,
    window: WindowBox,
    /// Cell of each box unknown, row-major within the box.
    box_cells: Vec<usize>,
    /// Box-local index per cell, or NONE.
    box_pos: Vec<usize>,
    /// Box-local indices of the ring cells.
    ring: Vec<usize>,
    /// Ring index per box-local index, or NONE.
    ring_pos: Vec<usize>,
    ext_cells: Vec<usize>,
    ext_pos: Vec<usize>,
    lu_ee: SparseLu,
    /// `A_EB` entries as (exterior index, ring index, value).
    coupling: Vec<(usize, usize, C64)>,
    /// Dense `M`, column-major `|R| × |R|`.
    schur: Vec<C64>,
    b_ext: Vec<C64>,
    y0: Vec<C64>,
    symbolic: SymbolicLu<usize>,
}

impl WindowedSolver {
    pub fn new(
        reference: &Grid2D,
        frequency: f64,
        transmitter: TransducerArc,
        window: WindowBox,
    ) -> Result<Self> {
        reference.check_resolution(frequency)?;
        transmitter.validate(reference.disk_radius)?;
        if window.i1 >= reference.nx
            || window.j1 >= reference.ny
            || window.i0 > window.i1
            || window.j0 > window.j1
        {
            return Err(Error::domain("window box outside the grid"));
        }
        let ncells = reference.cells.len();
        let mut box_cells = Vec::with_capacity(window.len());
        let mut box_pos = vec![NONE; ncells];
        for j in window.j0..=window.j1 {
            for i in window.i0..=window.i1 {
                let idx = reference.index(i, j);
                let interior_block = OFFSETS.iter().all(|&(di, dj)| {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    ni >= 0
                        && nj >= 0
                        && (ni as usize) < reference.nx
                        && (nj as usize) < reference.ny
                        && reference.is_interior(reference.index(ni as usize, nj as usize))
                });
                if !reference.is_interior(idx) || !interior_block {
                    return Err(Error::domain(
                        "window box must lie strictly inside the disk",
                    ));
                }
                box_pos[idx] = box_cells.len();
                box_cells.push(idx);
            }
        }
        let mut ring = Vec::new();
        let mut ring_pos = vec![NONE; box_cells.len()];
        for (local, &idx) in box_cells.iter().enumerate() {
            let (i, j) = reference.coords(idx);
            if i == window.i0 || i == window.i1 || j == window.j0 || j == window.j1 {
                ring_pos[local] = ring.len();
                ring.push(local);
            }
        }
        let mut ext_cells = Vec::new();
        let mut ext_pos = vec![NONE; ncells];
        for idx in 0..ncells {
            if reference.is_interior(idx) && box_pos[idx] == NONE {
                ext_pos[idx] = ext_cells.len();
                ext_cells.push(idx);
            }
        }

        let coef = CellCoefficients::new(reference, frequency)?;
        let source = drive_vector(reference, &coef, &[Drive::Arc(transmitter)])?;
        let mut triplets = Vec::with_capacity(ext_cells.len() * 9);
        let mut coupling = Vec::new();
        for (row, &idx) in ext_cells.iter().enumerate() {
            let s = stencil_row(reference, &coef, idx);
            triplets.push(Triplet::new(row, row, s.diag));
            for &(q, v) in s.entries() {
                if ext_pos[q] != NONE {
                    triplets.push(Triplet::new(row, ext_pos[q], v));
                } else {
                    let r = ring_pos[box_pos[q]];
                    debug_assert!(r != NONE);
                    coupling.push((row, r, v));
                }
            }
        }
        let a_ee = from_triplets(ext_cells.len(), &triplets)?;
        let lu_ee = SparseLu::factor(&a_ee)?;
        let b_ext: Vec<C64> = ext_cells.iter().map(|&c| source[c]).collect();
        let y0 = lu_ee.solve(&b_ext);

        // Columns of A_EB grouped by ring index; by symmetry A_BE = A_EBᵀ.
        let nr = ring.len();
        let mut columns: Vec<Vec<(usize, C64)>> = vec![Vec::new(); nr];
        for &(e, r, v) in &coupling {
            columns[r].push((e, v));
        }
        let mut schur = vec![C64::new(0.0, 0.0); nr * nr];
        let ne = ext_cells.len();
        for start in (0..nr).step_by(BATCH) {
            let end = (start + BATCH).min(nr);
            let mut rhs = Mat::<C64>::zeros(ne, end - start);
            for r in start..end {
                for &(e, v) in &columns[r] {
                    rhs[(e, r - start)] = v;
                }
            }
            lu_ee.solve_many(&mut rhs);
            for r in start..end {
                for (rr, col) in columns.iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for &(e, v) in col {
                        acc += v * rhs[(e, r - start)];
                    }
                    schur[r * nr + rr] = acc;
                }
            }
        }

        let s = schur_matrix(&box_cells, &box_pos, &ring, &schur, reference, &coef)?;
        let symbolic = SparseLu::symbolic(&s)?;
        Ok(WindowedSolver {
            reference: reference.clone(),
            frequency,
            transmitter,
            window,
            box_cells,
            box_pos,
            ring,
            ring_pos,
            ext_cells,
            ext_pos,
            lu_ee,
            coupling,
            schur,
            b_ext,
            y0,
            symbolic,
        })
    }

    pub fn window(&self) -> WindowBox {
        self.window
    }

    pub fn boundary(&self) -> BoundarySpec {
        BoundarySpec::transducer(self.transmitter)
    }

    /// Checks that `grid` matches the reference everywhere the
    /// precomputation depends on: outside the box and on its ring.
    pub fn is_compatible(&self, grid: &Grid2D) -> bool {
        let r = &self.reference;
        if grid.nx != r.nx
            || grid.ny != r.ny
            || grid.spacing != r.spacing
            || grid.origin != r.origin
        {
            return false;
        }
        (0..grid.cells.len()).all(|idx| {
            let local = self.box_pos[idx];
            if local != NONE && self.ring_pos[local] == NONE {
                return true;
            }
            grid.cells[idx] == r.cells[idx] && grid.material(idx) == r.material(idx)
        })
    }

    /// Solves the block system for right-hand sides on `E` and `B`.
    fn solve_blocks(
        &self,
        lu_s: &SparseLu,
        b_ext: &[C64],
        y: Option<&[C64]>,
        b_box: &[C64],
    ) -> (Vec<C64>, Vec<C64>) {
        let owned;
        let y = match y {
            Some(y) => y,
            None => {
                owned = self.lu_ee.solve(b_ext);
                &owned
            }
        };
        let mut rhs = b_box.to_vec();
        for &(e, r, v) in &self.coupling {
            rhs[self.ring[r]] -= v * y[e];
        }
        let x_box = lu_s.solve(&rhs);
        let mut t = vec![C64::new(0.0, 0.0); self.ext_cells.len()];
        for &(e, r, v) in &self.coupling {
            t[e] += v * x_box[self.ring[r]];
        }
        let z = self.lu_ee.solve(&t);
        let x_ext = y.iter().zip(z).map(|(a, b)| a - b).collect();
        (x_ext, x_box)
    }

    /// Full residual `b − A x` split into the two blocks.
    fn residual(
        &self,
        grid: &Grid2D,
        coef: &CellCoefficients,
        x_ext: &[C64],
        x_box: &[C64],
        b_ext: &[C64],
    ) -> (Vec<C64>, Vec<C64>) {
        let value = |q: usize| {
            if self.ext_pos[q] != NONE {
                x_ext[self.ext_pos[q]]
            } else {
                x_box[self.box_pos[q]]
            }
        };
        let apply = |idx: usize| {
            let s = stencil_row(grid, coef, idx);
            let mut acc = s.diag * value(idx);
            for &(q, v) in s.entries() {
                acc += v * value(q);
            }
            acc
        };
        let r_ext = self
            .ext_cells
            .iter()
            .zip(b_ext)
            .map(|(&c, b)| b - apply(c))
            .collect();
        let r_box = self.box_cells.iter().map(|&c| -apply(c)).collect();
        (r_ext, r_box)
    }

    /// Solves the phantom `grid`, which must be compatible with the
    /// reference.
    pub fn solve(&self, grid: &Grid2D) -> Result<PressureField> {
        if !self.is_compatible(grid) {
            return Err(Error::domain(
                "phantom differs from the reference outside the solver window",
            ));
        }
        let coef = CellCoefficients::new(grid, self.frequency)?;
        let s = schur_matrix(
            &self.box_cells,
            &self.box_pos,
            &self.ring,
            &self.schur,
            grid,
            &coef,
        )?;
        let lu_s = SparseLu::factor_with(&s, self.symbolic.clone())?;
        let zero_box = vec![C64::new(0.0, 0.0); self.box_cells.len()];
        let (mut x_ext, mut x_box) =
            self.solve_blocks(&lu_s, &self.b_ext, Some(&self.y0), &zero_box);
        let b_norm = norm(&self.b_ext);
        let mut steps = 0;
        let mut rel;
        loop {
            let (r_ext, r_box) = self.residual(grid, &coef, &x_ext, &x_box, &self.b_ext);
            rel = (norm(&r_ext).powi(2) + norm(&r_box).powi(2)).sqrt() / b_norm;
            if rel <= REFINE_TARGET || steps == MAX_REFINEMENT_STEPS || !rel.is_finite() {
                break;
            }
            let (d_ext, d_box) = self.solve_blocks(&lu_s, &r_ext, None, &r_box);
            x_ext.iter_mut().zip(d_ext).for_each(|(x, d)| *x += d);
            x_box.iter_mut().zip(d_box).for_each(|(x, d)| *x += d);
            steps += 1;
        }
        if !rel.is_finite() || rel > RESIDUAL_LIMIT {
            return Err(Error::Solver {
                residual: rel,
                limit: RESIDUAL_LIMIT,
            });
        }
        let mut values = vec![C64::new(0.0, 0.0); grid.cells.len()];
        for (&c, &v) in self.ext_cells.iter().zip(&x_ext) {
            values[c] = v;
        }
        for (&c, &v) in self.box_cells.iter().zip(&x_box) {
            values[c] = v;
        }
        Ok(PressureField {
            grid: grid.clone(),
            frequency: self.frequency,
            values,
            transmitter: Some(self.transmitter),
            report: SolveReport {
                unknowns: self.ext_cells.len() + self.box_cells.len(),
                relative_residual: rel,
                refinement_steps: steps,
            },
        })
    }
}

/// `A_BB − M` over the box unknowns. The pattern depends only on the box.
fn schur_matrix(
    box_cells: &[usize],
    box_pos: &[usize],
    ring: &[usize],
    schur: &[C64],
    grid: &Grid2D,
    coef: &CellCoefficients,
) -> Result<SparseMatrix> {
    let nr = ring.len();
    let mut triplets = Vec::with_capacity(box_cells.len() * 9 + nr * nr);
    for (a, &idx) in box_cells.iter().enumerate() {
        let s = stencil_row(grid, coef, idx);
        triplets.push(Triplet::new(a, a, s.diag));
        for &(q, v) in s.entries() {
            let b = box_pos[q];
            if b != NONE {
                triplets.push(Triplet::new(a, b, v));
            }
        }
    }
    for rc in 0..nr {
        for rr in 0..nr {
            triplets.push(Triplet::new(ring[rr], ring[rc], -schur[rc * nr + rr]));
        }
    }
    from_triplets(box_cells.len(), &triplets)
}
