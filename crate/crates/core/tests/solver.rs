mod common;

use std::f64::consts::PI;

use acoustend::phantom::{MaterialProps, PhantomGeometry};
use acoustend::solver::{
    assemble_and_solve, perimeter_cells, rasterize, sample_receivers, sample_receivers_with,
    BoundarySpec, Grid2D, ReceiverMode, SolverConfig, TransducerArc, WindowBox, WindowedSolver,
    C64, DEFAULT_FREQUENCY,
};
use common::green_2d;

const F: f64 = DEFAULT_FREQUENCY;

fn homogeneous_grid(spacing: f64) -> Grid2D {
    let m = MaterialProps::MUSCLE;
    rasterize(&PhantomGeometry::default(), &m, &m, spacing, F).unwrap()
}

fn muscle_wavenumber() -> f64 {
    2.0 * PI * F / MaterialProps::MUSCLE.sound_speed().unwrap().value
}

/// Relative L2 error of the plane wave travelling at `theta` over the
/// free cells.
fn plane_wave_error(spacing: f64, theta: f64) -> f64 {
    let grid = homogeneous_grid(spacing);
    let k = muscle_wavenumber();
    let (kx, ky) = (k * theta.cos(), k * theta.sin());
    let exact = |x: f64, y: f64| C64::new(0.0, kx * x + ky * y).exp();
    let boundary = BoundarySpec::dirichlet_from_fn(&grid, exact);
    let field = assemble_and_solve(&grid, &boundary, F).unwrap();
    let fixed: std::collections::HashSet<usize> = perimeter_cells(&grid).into_iter().collect();
    let (mut num, mut den) = (0.0, 0.0);
    for idx in 0..grid.cells.len() {
        if !grid.is_interior(idx) || fixed.contains(&idx) {
            continue;
        }
        let (i, j) = grid.coords(idx);
        let (x, y) = grid.center(i, j);
        let e = exact(x, y);
        num += (field.values[idx] - e).norm_sqr();
        den += e.norm_sqr();
    }
    (num / den).sqrt()
}

#[test]
fn axis_plane_wave_matches_at_ten_points_per_wavelength() {
    let lambda = 2.0 * PI / muscle_wavenumber();
    let err = plane_wave_error(lambda / 10.0, 0.0);
    assert!(err < 0.02, "10 ppw error {err}");
}

#[test]
fn oblique_plane_wave_matches_and_converges() {
    let lambda = 2.0 * PI / muscle_wavenumber();
    let theta = 30f64.to_radians();
    let coarse = plane_wave_error(lambda / 10.0, theta);
    let fine = plane_wave_error(lambda / 20.0, theta);
    assert!(coarse < 0.02, "10 ppw error {coarse}");
    assert!(
        coarse / fine >= 3.0,
        "refinement ratio {} ({coarse} -> {fine})",
        coarse / fine
    );
}

#[test]
fn point_source_matches_free_space_greens_function() {
    let h = 0.25e-3;
    let grid = homogeneous_grid(h);
    let k = muscle_wavenumber();
    let rho = MaterialProps::MUSCLE.density;
    let strength = C64::new(1.0, 0.0);
    // The grid has no cell centred on the origin; drive the nearest one.
    let (si, sj) = (grid.nx / 2, grid.ny / 2);
    let (sx, sy) = grid.center(si, sj);
    let field =
        assemble_and_solve(&grid, &BoundarySpec::point_source((sx, sy), strength), F).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for idx in 0..grid.cells.len() {
        if !grid.is_interior(idx) {
            continue;
        }
        let (i, j) = grid.coords(idx);
        let (x, y) = grid.center(i, j);
        let r = (x - sx).hypot(y - sy);
        if r <= 2.0 * h {
            continue;
        }
        let exact = strength * rho * green_2d(k, r);
        num += (field.values[idx] - exact).norm_sqr();
        den += exact.norm_sqr();
    }
    let err = (num / den).sqrt();
    assert!(err < 0.05, "Green's function error {err}");
}

#[test]
fn zero_drive_gives_zero_field() {
    let grid = homogeneous_grid(0.25e-3);
    let arc = TransducerArc {
        drive: C64::new(0.0, 0.0),
        ..Default::default()
    };
    let field = assemble_and_solve(&grid, &BoundarySpec::transducer(arc), F).unwrap();
    assert!(field.values.iter().all(|v| *v == C64::new(0.0, 0.0)));
}

fn asymmetric_phantom() -> Grid2D {
    let geom = PhantomGeometry {
        tendon_center_offset: (0.006, -0.004),
        tendon_orientation_deg: 30.0,
        ..Default::default()
    };
    rasterize(
        &geom,
        &MaterialProps::MUSCLE,
        &MaterialProps::TENDON,
        0.25e-3,
        F,
    )
    .unwrap()
}

#[test]
fn transfers_are_reciprocal() {
    let grid = asymmetric_phantom();
    let angles = [0.0, 135.0, 250.0];
    let fields: Vec<_> = angles
        .iter()
        .map(|&a| {
            assemble_and_solve(&grid, &BoundarySpec::transducer(TransducerArc::at(a)), F).unwrap()
        })
        .collect();
    for (s, &a) in angles.iter().enumerate() {
        for (r, &b) in angles.iter().enumerate() {
            if s == r {
                continue;
            }
            let forward = sample_receivers(&fields[s], &[b - a]).unwrap()[0].transfer;
            let backward = sample_receivers(&fields[r], &[a - b]).unwrap()[0].transfer;
            let rel = (forward - backward).norm() / forward.norm();
            assert!(rel < 1e-6, "{a} -> {b}: {forward} vs {backward}");
        }
    }
}

#[test]
fn mirror_symmetric_phantom_gives_symmetric_receivers() {
    let grid = rasterize(
        &PhantomGeometry::default(),
        &MaterialProps::MUSCLE,
        &MaterialProps::TENDON,
        0.25e-3,
        F,
    )
    .unwrap();
    let field =
        assemble_and_solve(&grid, &BoundarySpec::transducer(TransducerArc::at(0.0)), F).unwrap();
    for mode in [ReceiverMode::Aperture, ReceiverMode::Point] {
        let s = sample_receivers_with(&field, &[45.0, -45.0, 135.0, 225.0], mode).unwrap();
        for (a, b) in [(0, 1), (2, 3)] {
            let rel = (s[a].magnitude() - s[b].magnitude()).abs() / s[a].magnitude();
            assert!(
                rel < 1e-6,
                "{mode:?}: {} vs {}",
                s[a].magnitude(),
                s[b].magnitude()
            );
        }
    }
}

#[test]
fn solves_are_deterministic_and_linear_in_the_drive() {
    let grid = asymmetric_phantom();
    let unit = TransducerArc::at(90.0);
    let a = assemble_and_solve(&grid, &BoundarySpec::transducer(unit), F).unwrap();
    let b = assemble_and_solve(&grid, &BoundarySpec::transducer(unit), F).unwrap();
    assert_eq!(a.values, b.values);

    let doubled = TransducerArc {
        drive: C64::new(2.0, 0.0),
        ..unit
    };
    let c = assemble_and_solve(&grid, &BoundarySpec::transducer(doubled), F).unwrap();
    for (x, y) in a.values.iter().zip(&c.values) {
        assert_eq!(*x * 2.0, *y);
    }
    let ta = sample_receivers(&a, &[45.0, 180.0]).unwrap();
    let tc = sample_receivers(&c, &[45.0, 180.0]).unwrap();
    assert_eq!(ta, tc);

    let rotated = TransducerArc {
        drive: C64::new(-1.5, 2.25),
        ..unit
    };
    let d = assemble_and_solve(&grid, &BoundarySpec::transducer(rotated), F).unwrap();
    for (x, y) in a.values.iter().zip(&d.values) {
        assert!((*x * rotated.drive - *y).norm() <= 1e-12 * (1.0 + y.norm()));
    }
}

#[test]
fn default_transfers_stay_bounded_and_residual_is_met() {
    let config = SolverConfig::default();
    let (field, samples) = config
        .run(
            &PhantomGeometry::default(),
            &MaterialProps::MUSCLE,
            &MaterialProps::TENDON,
        )
        .unwrap();
    assert!(field.report.relative_residual <= 1e-8);
    assert_eq!(samples.len(), 7);
    for s in &samples {
        assert!(
            s.magnitude() <= 1.05,
            "{} deg: {}",
            s.angle_deg,
            s.magnitude()
        );
        assert!(s.magnitude() > 0.0);
    }
    for idx in 0..field.grid.cells.len() {
        if !field.grid.is_interior(idx) {
            assert_eq!(field.values[idx], C64::new(0.0, 0.0));
        }
        assert!(field.values[idx].re.is_finite() && field.values[idx].im.is_finite());
    }
}

#[test]
fn windowed_solver_agrees_with_direct_solve() {
    let reference = homogeneous_grid(0.25e-3);
    let window = WindowBox::around(&reference, (0.0, 0.0), 0.0065, 2).unwrap();
    let tx = TransducerArc::at(0.0);
    let solver = WindowedSolver::new(&reference, F, tx, window).unwrap();
    for (scale, orientation) in [(1.0, 0.0), (0.97, 20.0)] {
        let geom = PhantomGeometry {
            tendon_major_diameter: 0.012 * scale,
            tendon_minor_diameter: 0.009 * scale,
            tendon_orientation_deg: orientation,
            ..Default::default()
        };
        let tendon = MaterialProps::TENDON.with_scaled_modulus(1.0 + 0.2 * (1.0 - scale));
        let grid = rasterize(&geom, &MaterialProps::MUSCLE, &tendon, 0.25e-3, F).unwrap();
        assert!(solver.is_compatible(&grid));
        let fast = solver.solve(&grid).unwrap();
        let direct = assemble_and_solve(&grid, &BoundarySpec::transducer(tx), F).unwrap();
        assert!(fast.report.relative_residual <= 1e-8);
        let diff: f64 = fast
            .values
            .iter()
            .zip(&direct.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let base: f64 = direct.values.iter().map(|b| b.norm_sqr()).sum();
        assert!(
            (diff / base).sqrt() < 1e-9,
            "relative difference {}",
            (diff / base).sqrt()
        );
    }

    let shifted = PhantomGeometry {
        tendon_center_offset: (0.02, 0.0),
        ..Default::default()
    };
    let grid = rasterize(
        &shifted,
        &MaterialProps::MUSCLE,
        &MaterialProps::TENDON,
        0.25e-3,
        F,
    )
    .unwrap();
    assert!(!solver.is_compatible(&grid));
    assert!(solver.solve(&grid).is_err());
}
