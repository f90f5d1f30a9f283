//! Geometry and materials of the tendon phantom.
//!
//! The phantom is a muscle-like disk with an oval tendon embedded in it.
//! Axial load on the tendon elongates it, which narrows the oval through
//! Poisson contraction and stiffens the tendon. Everything here is a pure
//! value type; nothing holds state between calls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area factor for an oval from its two diameters. The specimen table was
/// produced with the truncated constant 0.785 rather than `PI / 4`, and the
/// golden areas only reproduce with the truncated value.
pub const OVAL_AREA_FACTOR: f64 = 0.785;

/// Isotropic elastic material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialProps {
    /// kg/m³
    pub density: f64,
    /// Pa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

impl MaterialProps {
    pub const MUSCLE: MaterialProps = MaterialProps {
        density: 1090.0,
        youngs_modulus: 0.076e9,
        poisson_ratio: 0.4,
    };

    pub const TENDON: MaterialProps = MaterialProps {
        density: 1109.0,
        youngs_modulus: 1.1e9,
        poisson_ratio: 0.42,
    };

    /// Validated constructor; requires `0 <= poisson_ratio < 0.5`.
    pub fn new(density: f64, youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        let m = MaterialProps {
            density,
            youngs_modulus,
            poisson_ratio,
        };
        m.validate()?;
        Ok(m)
    }

    /// Like [`MaterialProps::new`] but admits auxetic materials
    /// (`-1 < poisson_ratio < 0.5`).
    pub fn new_auxetic(density: f64, youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        let m = MaterialProps {
            density,
            youngs_modulus,
            poisson_ratio,
        };
        m.validate_with(-1.0)?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(0.0)
    }

    fn validate_with(&self, min_poisson: f64) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::domain(format!(
                "density must be > 0, got {}",
                self.density
            )));
        }
        if !(self.youngs_modulus.is_finite() && self.youngs_modulus > 0.0) {
            return Err(Error::domain(format!(
                "Young's modulus must be > 0, got {}",
                self.youngs_modulus
            )));
        }
        let nu = self.poisson_ratio;
        let lower_ok = if min_poisson == 0.0 {
            nu >= 0.0
        } else {
            nu > min_poisson
        };
        if !(nu.is_finite() && lower_ok && nu < 0.5) {
            return Err(Error::domain(format!(
                "Poisson ratio must lie in [{min_poisson}, 0.5), got {nu}"
            )));
        }
        Ok(())
    }

    /// P-wave (constrained) modulus `E(1-ν)/((1+ν)(1-2ν))`.
    pub fn p_wave_modulus(&self) -> f64 {
        let nu = self.poisson_ratio;
        self.youngs_modulus * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    pub fn sound_speed(&self) -> Result<SoundSpeed> {
        derive_sound_speed(self)
    }

    pub fn with_scaled_modulus(&self, scale: f64) -> Self {
        MaterialProps {
            youngs_modulus: self.youngs_modulus * scale,
            ..*self
        }
    }

    /// Effective acoustic medium of a cell holding volume fraction
    /// `fraction` of `other`: arithmetic mean density and Wood's harmonic
    /// mean of the P-wave moduli. Returned with `ν = 0`, so the Young's
    /// modulus field carries the P-wave modulus.
    pub fn mixture(&self, other: &MaterialProps, fraction: f64) -> Self {
        let f = fraction.clamp(0.0, 1.0);
        let compliance = (1.0 - f) / self.p_wave_modulus() + f / other.p_wave_modulus();
        MaterialProps {
            density: (1.0 - f) * self.density + f * other.density,
            youngs_modulus: 1.0 / compliance,
            poisson_ratio: 0.0,
        }
    }
}

/// Compressional sound speed derived from a [`MaterialProps`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundSpeed {
    /// m/s
    pub value: f64,
    /// Pa
    pub p_wave_modulus: f64,
}

/// `c = sqrt(M / ρ)` with `M` the P-wave modulus.
pub fn derive_sound_speed(m: &MaterialProps) -> Result<SoundSpeed> {
    if m.poisson_ratio >= 0.5 {
        return Err(Error::domain(format!(
            "Poisson ratio {} makes the P-wave modulus unbounded",
            m.poisson_ratio
        )));
    }
    m.validate_with(-1.0)?;
    let modulus = m.p_wave_modulus();
    Ok(SoundSpeed {
        value: (modulus / m.density).sqrt(),
        p_wave_modulus: modulus,
    })
}

/// Oval cross-section area in mm² from two diameters in mm.
pub fn cross_section_area(major_mm: f64, minor_mm: f64) -> Result<f64> {
    if !(major_mm.is_finite() && minor_mm.is_finite() && major_mm > 0.0 && minor_mm > 0.0) {
        return Err(Error::domain(format!(
            "cross-section diameters must be > 0, got ({major_mm}, {minor_mm})"
        )));
    }
    Ok(OVAL_AREA_FACTOR * major_mm * minor_mm)
}

/// Phantom cross-section: muscle disk centred at the origin with an oval
/// tendon inside. All lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhantomGeometry {
    pub muscle_diameter: f64,
    pub tendon_major_diameter: f64,
    pub tendon_minor_diameter: f64,
    pub tendon_center_offset: (f64, f64),
    /// Angle of the major axis from +x, degrees.
    #[serde(default)]
    pub tendon_orientation_deg: f64,
    pub specimen_length: f64,
}

impl Default for PhantomGeometry {
    fn default() -> Self {
        PhantomGeometry {
            muscle_diameter: 0.07,
            tendon_major_diameter: 0.012,
            tendon_minor_diameter: 0.009,
            tendon_center_offset: (0.0, 0.0),
            tendon_orientation_deg: 0.0,
            specimen_length: 0.08,
        }
    }
}

impl PhantomGeometry {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("muscle_diameter", self.muscle_diameter),
            ("tendon_major_diameter", self.tendon_major_diameter),
            ("tendon_minor_diameter", self.tendon_minor_diameter),
            ("specimen_length", self.specimen_length),
        ];
        for (name, v) in dims {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.tendon_minor_diameter > self.tendon_major_diameter {
            return Err(Error::domain(format!(
                "tendon minor diameter {} exceeds major diameter {}",
                self.tendon_minor_diameter, self.tendon_major_diameter
            )));
        }
        let (ox, oy) = self.tendon_center_offset;
        if !(ox.is_finite() && oy.is_finite() && self.tendon_orientation_deg.is_finite()) {
            return Err(Error::domain(
                "tendon offset and orientation must be finite",
            ));
        }
        // The farthest oval point from the disk centre is at most |offset| + a.
        let reach = ox.hypot(oy) + 0.5 * self.tendon_major_diameter;
        if reach >= 0.5 * self.muscle_diameter {
            return Err(Error::domain(format!(
                "tendon oval (reach {reach:.4} m) does not fit strictly inside the muscle disk (radius {:.4} m)",
                0.5 * self.muscle_diameter
            )));
        }
        Ok(())
    }

    pub fn muscle_radius(&self) -> f64 {
        0.5 * self.muscle_diameter
    }

    /// Tendon cross-section in mm² using the oval convention of the
    /// specimen table.
    pub fn tendon_area_mm2(&self) -> f64 {
        OVAL_AREA_FACTOR * self.tendon_major_diameter * 1e3 * self.tendon_minor_diameter * 1e3
    }

    /// Whether point `(x, y)` lies inside the tendon oval.
    pub fn in_tendon(&self, x: f64, y: f64) -> bool {
        let (ox, oy) = self.tendon_center_offset;
        let (s, c) = self.tendon_orientation_deg.to_radians().sin_cos();
        let (dx, dy) = (x - ox, y - oy);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        let a = 0.5 * self.tendon_major_diameter;
        let b = 0.5 * self.tendon_minor_diameter;
        (u / a).powi(2) + (v / b).powi(2) < 1.0
    }

    pub fn in_muscle_disk(&self, x: f64, y: f64) -> bool {
        x * x + y * y < self.muscle_radius().powi(2)
    }

    /// Half-width of the axis-aligned box around the tendon centre that
    /// contains the oval.
    pub fn tendon_half_extent(&self) -> (f64, f64) {
        let (s, c) = self.tendon_orientation_deg.to_radians().sin_cos();
        let a = 0.5 * self.tendon_major_diameter;
        let b = 0.5 * self.tendon_minor_diameter;
        ((a * c).hypot(b * s), (a * s).hypot(b * c))
    }
}

/// Endpoints of the linear force → (elongation, stiffness) map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadCalibration {
    /// N
    pub max_force: f64,
    /// m, elongation reached at `max_force`
    pub max_elongation: f64,
    /// relative stiffness increase reached at `max_force`
    pub stiffness_gain: f64,
}

impl Default for LoadCalibration {
    fn default() -> Self {
        LoadCalibration {
            max_force: 60.0,
            max_elongation: 0.005,
            stiffness_gain: 0.20,
        }
    }
}

impl LoadCalibration {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_force > 0.0 && self.max_elongation >= 0.0 && self.stiffness_gain >= 0.0) {
            return Err(Error::config(format!("invalid load calibration {self:?}")));
        }
        Ok(())
    }

    pub fn stiffness_scale(&self, force: f64) -> f64 {
        1.0 + self.stiffness_gain * force / self.max_force
    }

    pub fn elongation(&self, force: f64) -> f64 {
        self.max_elongation * force / self.max_force
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadState {
    /// N
    pub axial_force: f64,
    /// m
    pub elongation: f64,
    pub stiffness_scale: f64,
}

impl LoadState {
    pub const UNLOADED: LoadState = LoadState {
        axial_force: 0.0,
        elongation: 0.0,
        stiffness_scale: 1.0,
    };
}

/// Deformed geometry and tendon material for a given axial force.
///
/// The muscle is untouched. Both tendon diameters contract by `1 - ν ε`
/// and the tendon modulus is multiplied by the stiffness scale.
pub fn apply_load(
    geom: &PhantomGeometry,
    tendon: &MaterialProps,
    force: f64,
    calibration: &LoadCalibration,
) -> Result<(PhantomGeometry, MaterialProps, LoadState)> {
    calibration.validate()?;
    if !(force.is_finite() && (0.0..=calibration.max_force).contains(&force)) {
        return Err(Error::domain(format!(
            "axial force {force} N outside admissible range [0, {}] N",
            calibration.max_force
        )));
    }
    let state = LoadState {
        axial_force: force,
        elongation: calibration.elongation(force),
        stiffness_scale: calibration.stiffness_scale(force),
    };
    let (g, t) = deform(geom, tendon, state.elongation, state.stiffness_scale)?;
    Ok((g, t, state))
}

/// Applies an explicit elongation and stiffness scale to the tendon.
pub fn deform(
    geom: &PhantomGeometry,
    tendon: &MaterialProps,
    elongation: f64,
    stiffness_scale: f64,
) -> Result<(PhantomGeometry, MaterialProps)> {
    geom.validate()?;
    if !(elongation.is_finite() && elongation >= 0.0) {
        return Err(Error::domain(format!(
            "elongation must be >= 0, got {elongation}"
        )));
    }
    if !(stiffness_scale.is_finite() && stiffness_scale > 0.0) {
        return Err(Error::domain(format!(
            "stiffness scale must be > 0, got {stiffness_scale}"
        )));
    }
    let strain = elongation / geom.specimen_length;
    let lateral = 1.0 - tendon.poisson_ratio * strain;
    if lateral <= 0.0 {
        return Err(Error::domain(format!(
            "strain {strain} collapses the cross-section"
        )));
    }
    let deformed = PhantomGeometry {
        tendon_major_diameter: geom.tendon_major_diameter * lateral,
        tendon_minor_diameter: geom.tendon_minor_diameter * lateral,
        ..*geom
    };
    deformed.validate()?;
    Ok((deformed, tendon.with_scaled_modulus(stiffness_scale)))
}

/// Damage category induced in a specimen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DamageKind {
    Healthy,
    LongitudinalRupture,
    TransverseRupture,
    Microtear,
}

impl DamageKind {
    /// Fixed class order; also the classifier tie-break order.
    pub const ALL: [DamageKind; 4] = [
        DamageKind::Healthy,
        DamageKind::LongitudinalRupture,
        DamageKind::TransverseRupture,
        DamageKind::Microtear,
    ];

    pub fn code(self) -> &'static str {
        match self {
            DamageKind::Healthy => "H",
            DamageKind::LongitudinalRupture => "LC",
            DamageKind::TransverseRupture => "TC",
            DamageKind::Microtear => "MT",
        }
    }

    pub fn from_code(code: &str) -> Result<Self> {
        DamageKind::ALL
            .into_iter()
            .find(|k| k.code().eq_ignore_ascii_case(code))
            .ok_or_else(|| Error::domain(format!("unknown condition code {code:?}")))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageSpec {
    pub kind: DamageKind,
    pub severity: f64,
}

impl DamageSpec {
    pub const HEALTHY: DamageSpec = DamageSpec {
        kind: DamageKind::Healthy,
        severity: 0.0,
    };

    pub fn new(kind: DamageKind, severity: f64) -> Result<Self> {
        let d = DamageSpec { kind, severity };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.severity) {
            return Err(Error::domain(format!(
                "damage severity must lie in [0, 1], got {}",
                self.severity
            )));
        }
        if self.kind == DamageKind::Healthy && self.severity != 0.0 {
            return Err(Error::domain("a healthy specimen must have severity 0"));
        }
        Ok(())
    }
}

/// One row of the dissected-specimen measurement table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSpecimen {
    pub experiment: u32,
    pub condition: DamageKind,
    pub x_mm: f64,
    pub y_mm: f64,
    pub z_mm: f64,
    /// Area as recorded in the table.
    pub area_mm2: f64,
    pub mass_initial_g: f64,
    pub mass_end_g: f64,
}

const fn row(
    experiment: u32,
    condition: DamageKind,
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
    area_mm2: f64,
    mass_initial_g: f64,
    mass_end_g: f64,
) -> MeasuredSpecimen {
    MeasuredSpecimen {
        experiment,
        condition,
        x_mm,
        y_mm,
        z_mm,
        area_mm2,
        mass_initial_g,
        mass_end_g,
    }
}

use DamageKind::{LongitudinalRupture as LC, Microtear as MT, TransverseRupture as TC};

/// Dimensions and masses of the eighteen dissected tendons.
pub const MEASURED_SPECIMENS: [MeasuredSpecimen; 18] = [
    row(1, LC, 9.9, 12.8, 80.8, 99.4752, 7.778, 6.92242),
    row(1, TC, 8.1, 11.6, 81.5, 73.7586, 6.938, 6.17482),
    row(1, MT, 9.6, 10.9, 82.1, 82.1424, 8.861, 7.0888),
    row(2, LC, 8.7, 11.2, 83.5, 83.3199, 7.212, 5.7696),
    row(2, TC, 7.5, 10.25, 80.35, 76.43938, 6.678, 5.3424),
    row(2, MT, 6.0, 12.4, 80.25, 80.7922, 5.48, 5.3),
    row(3, LC, 7.0, 12.2, 86.0, 67.039, 6.167, 5.454),
    row(3, TC, 8.8, 15.0, 80.0, 103.62, 7.433, 6.988),
    row(3, MT, 7.44, 12.77, 80.0, 74.58191, 6.085, 5.858),
    row(4, MT, 7.2, 13.9, 82.5, 78.5628, 8.126, 6.98),
    row(4, TC, 7.3, 13.5, 89.8, 77.36175, 7.727, 6.637),
    row(4, LC, 7.8, 11.5, 80.2, 70.4145, 9.642, 7.178),
    row(5, LC, 6.35, 13.2, 82.4, 65.7987, 5.271, 4.141),
    row(5, TC, 10.6, 13.0, 81.8, 108.173, 11.885, 8.373),
    row(5, MT, 15.5, 11.9, 82.6, 144.7933, 12.934, 6.896),
    row(6, MT, 11.15, 17.35, 91.25, 151.8602, 9.393, 7.411),
    row(6, TC, 11.3, 16.35, 92.0, 145.0327, 10.316, 7.232),
    row(6, LC, 10.98, 10.1, 78.9, 87.05493, 12.061, 9.425),
];

impl MeasuredSpecimen {
    pub fn major_mm(&self) -> f64 {
        self.x_mm.max(self.y_mm)
    }

    pub fn minor_mm(&self) -> f64 {
        self.x_mm.min(self.y_mm)
    }

    /// Area recomputed from the two diameters.
    pub fn computed_area_mm2(&self) -> f64 {
        OVAL_AREA_FACTOR * self.x_mm * self.y_mm
    }

    /// Whether the recorded area agrees with the oval formula to four
    /// decimals.
    pub fn area_is_consistent(&self) -> bool {
        (self.computed_area_mm2() - self.area_mm2).abs() < 0.5e-4 + 1e-12
    }

    /// Phantom geometry with this specimen's cross-section and length.
    pub fn geometry(&self, base: &PhantomGeometry) -> PhantomGeometry {
        PhantomGeometry {
            tendon_major_diameter: self.major_mm() * 1e-3,
            tendon_minor_diameter: self.minor_mm() * 1e-3,
            specimen_length: self.z_mm * 1e-3,
            ..*base
        }
    }
}

/// Phantom block of the JSON configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub muscle_diameter_m: f64,
    pub tendon_major_m: f64,
    pub tendon_minor_m: f64,
    pub specimen_length_m: f64,
    pub max_force_n: f64,
    pub max_elongation_m: f64,
    pub stiffness_gain: f64,
    pub tendon_orientation_deg: f64,
    pub tendon_offset_m: (f64, f64),
    pub muscle: MaterialProps,
    pub tendon: MaterialProps,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        let g = PhantomGeometry::default();
        let c = LoadCalibration::default();
        PhantomConfig {
            muscle_diameter_m: g.muscle_diameter,
            tendon_major_m: g.tendon_major_diameter,
            tendon_minor_m: g.tendon_minor_diameter,
            specimen_length_m: g.specimen_length,
            max_force_n: c.max_force,
            max_elongation_m: c.max_elongation,
            stiffness_gain: c.stiffness_gain,
            tendon_orientation_deg: g.tendon_orientation_deg,
            tendon_offset_m: g.tendon_center_offset,
            muscle: MaterialProps::MUSCLE,
            tendon: MaterialProps::TENDON,
        }
    }
}

impl PhantomConfig {
    pub fn geometry(&self) -> Result<PhantomGeometry> {
        let g = PhantomGeometry {
            muscle_diameter: self.muscle_diameter_m,
            tendon_major_diameter: self.tendon_major_m,
            tendon_minor_diameter: self.tendon_minor_m,
            tendon_center_offset: self.tendon_offset_m,
            tendon_orientation_deg: self.tendon_orientation_deg,
            specimen_length: self.specimen_length_m,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn calibration(&self) -> Result<LoadCalibration> {
        let c = LoadCalibration {
            max_force: self.max_force_n,
            max_elongation: self.max_elongation_m,
            stiffness_gain: self.stiffness_gain,
        };
        c.validate()?;
        Ok(c)
    }
}
