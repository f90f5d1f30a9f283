//! Virtual tensile-test lab: transducer model, damage parametrisation and
//! end-to-end generation of synthetic loading experiments.
//!
//! Every acoustic change with load comes from solving the deformed phantom;
//! the traces only scale, delay and add noise to a fixed transmit pulse.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{SignalTrace, DEFAULT_RECORD_LENGTH, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::mechanics::{
    calibrate_hysteresis, loading_stress, unloading_stress_with, Direction, TendonModelParams,
};
use crate::phantom::{
    deform, DamageKind, DamageSpec, LoadCalibration, MaterialProps, MeasuredSpecimen,
    PhantomGeometry, MEASURED_SPECIMENS,
};
use crate::solver::{
    assemble_and_solve, sample_receivers_with, Grid2D, SolverConfig, WindowBox, WindowedSolver,
};

/// Sound speed of the water tank used for directivity, m/s.
pub const WATER_SOUND_SPEED: f64 = 1481.0;
/// Protocol bound on loading cycles per specimen.
pub const MAX_CYCLES: usize = 6;
/// Protocol bound on tendon force, N.
pub const MAX_FORCE: f64 = 60.0;
/// Dissipated-energy ratio of damaged to healthy cohorts.
pub const COHORT_DISSIPATION_RATIO: f64 = 0.907;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransducerModel {
    /// Resonance, Hz.
    pub f0: f64,
    pub q: f64,
    /// Intensity at resonance, mW/cm².
    pub peak_intensity: f64,
    /// Face width, m.
    pub aperture: f64,
}

impl Default for TransducerModel {
    fn default() -> Self {
        TransducerModel {
            f0: 52.2e3,
            q: 5.22,
            peak_intensity: 25.1,
            aperture: 0.02,
        }
    }
}

impl TransducerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.q > 0.0 && self.aperture > 0.0 && self.peak_intensity >= 0.0) {
            return Err(Error::config(format!("invalid transducer model {self:?}")));
        }
        Ok(())
    }

    /// Complex second-order resonator response.
    pub fn complex_response(&self, f: f64) -> Complex64 {
        if f <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        1.0 / Complex64::new(1.0, self.q * (f / self.f0 - self.f0 / f))
    }

    /// Frequencies where the gain falls to `1/√2`.
    pub fn half_power_band(&self) -> (f64, f64) {
        let s = (1.0 + 0.25 / (self.q * self.q)).sqrt();
        let d = 0.5 / self.q;
        (self.f0 * (s - d), self.f0 * (s + d))
    }
}

/// Resonator gain `1/√(1 + Q²(f/f0 − f0/f)²)`.
pub fn transducer_response(model: &TransducerModel, f: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::domain(format!("frequency must be > 0, got {f}")));
    }
    let x = model.q * (f / model.f0 - model.f0 / f);
    Ok(1.0 / (1.0 + x * x).sqrt())
}

/// Radiated intensity at `f`, mW/cm².
pub fn transducer_intensity(model: &TransducerModel, f: f64) -> Result<f64> {
    Ok(model.peak_intensity * transducer_response(model, f)?.powi(2))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Far-field pattern of a uniform aperture at `theta_deg` off axis.
pub fn directivity(model: &TransducerModel, theta_deg: f64, c_medium: f64) -> Result<f64> {
    if !(-90.0..=90.0).contains(&theta_deg) {
        return Err(Error::domain(format!(
            "angle must lie in [-90, 90] deg, got {theta_deg}"
        )));
    }
    if !(c_medium > 0.0) {
        return Err(Error::domain("sound speed must be > 0"));
    }
    let lambda = c_medium / model.f0;
    Ok(sinc(PI * model.aperture * theta_deg.to_radians().sin() / lambda).abs())
}

/// Off-axis angle where the far-field pattern drops to `1/√2`, or 90° if
/// it never does.
pub fn half_power_beamwidth(model: &TransducerModel, c_medium: f64) -> Result<f64> {
    let target = std::f64::consts::FRAC_1_SQRT_2;
    if directivity(model, 90.0, c_medium)? >= target {
        return Ok(90.0);
    }
    let (mut lo, mut hi) = (0.0, 90.0);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        // The main lobe decreases monotonically until its first null.
        if directivity(model, mid, c_medium)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Pattern at a finite range, by summing cylindrical wavelets over the
/// face and normalising by the on-axis value at the same range.
pub fn directivity_at_range(
    model: &TransducerModel,
    theta_deg: f64,
    range: f64,
    c_medium: f64,
) -> Result<f64> {
    directivity(model, theta_deg, c_medium)?;
    if !(range > 0.0) {
        return Err(Error::domain("range must be > 0"));
    }
    const ELEMENTS: usize = 400;
    let k = 2.0 * PI * model.f0 / c_medium;
    let field = |theta: f64| {
        let (px, py) = (range * theta.cos(), range * theta.sin());
        (0..ELEMENTS)
            .map(|e| {
                let y = model.aperture * ((e as f64 + 0.5) / ELEMENTS as f64 - 0.5);
                let r = px.hypot(py - y);
                Complex64::from_polar(1.0 / r.sqrt(), k * r)
            })
            .sum::<Complex64>()
            .norm()
    };
    Ok(field(theta_deg.to_radians()) / field(0.0))
}

/// Per-kind damage effects at severity 1. All factors multiply the
/// healthy value; intermediate severities interpolate linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DamageFactors {
    pub transverse_area: f64,
    pub transverse_hysteresis: f64,
    pub transverse_divergence: f64,
    /// Relative change applied to every longitudinal-rupture parameter.
    pub longitudinal_perturbation: f64,
    pub microtear_modulus: f64,
    /// Early-stiffening coefficient of a microtear specimen (healthy
    /// tendons use 0); negative values delay the stiffening.
    pub microtear_curvature: f64,
    pub microtear_hysteresis: f64,
}

impl Default for DamageFactors {
    fn default() -> Self {
        DamageFactors {
            transverse_area: 0.85,
            transverse_hysteresis: 0.80,
            transverse_divergence: 0.5,
            longitudinal_perturbation: -0.02,
            microtear_modulus: 0.90,
            microtear_curvature: -1.0,
            microtear_hysteresis: 0.95,
        }
    }
}

impl DamageFactors {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !(unit(self.transverse_area)
            && unit(self.transverse_hysteresis)
            && unit(self.microtear_modulus)
            && unit(self.microtear_hysteresis)
            && self.transverse_divergence >= 0.0)
        {
            return Err(Error::config(format!("invalid damage factors {self:?}")));
        }
        if self.longitudinal_perturbation.abs() > 0.02 + 1e-12 {
            return Err(Error::config(
                "longitudinal perturbation must stay within 2 %",
            ));
        }
        if self.microtear_curvature.abs() > 1.0 {
            return Err(Error::config("curvature coefficient must lie in [-1, 1]"));
        }
        Ok(())
    }

    /// Hysteresis multiplier of `kind` at severity 1.
    pub fn hysteresis_factor(&self, kind: DamageKind) -> f64 {
        match kind {
            DamageKind::Healthy => 1.0,
            DamageKind::LongitudinalRupture => 1.0 + self.longitudinal_perturbation,
            DamageKind::TransverseRupture => self.transverse_hysteresis,
            DamageKind::Microtear => self.microtear_hysteresis,
        }
    }
}

/// Everything that determines one specimen's mechanical and acoustic
/// response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecimenModel {
    pub mechanics: TendonModelParams,
    pub tendon: MaterialProps,
    pub geometry: PhantomGeometry,
    /// Share of the loading/unloading force gap that reaches the tendon
    /// stiffness on the way down.
    pub divergence: f64,
    /// Early-stiffening coefficient of the force → stiffness map: positive
    /// bends it concave, negative convex, 0 keeps it linear.
    pub curvature: f64,
}

/// Applies `damage` to a healthy specimen model. `deficit_scale`
/// stretches every hysteresis reduction, which is how a cohort is tuned
/// to a prescribed mean dissipation ratio.
pub fn damage_transform(
    base: &SpecimenModel,
    damage: &DamageSpec,
    factors: &DamageFactors,
    deficit_scale: f64,
) -> Result<SpecimenModel> {
    damage.validate()?;
    factors.validate()?;
    let s = damage.severity;
    let lerp = |f: f64| 1.0 - s * (1.0 - f);
    let mut m = *base;
    let hyst = 1.0 - deficit_scale * (1.0 - lerp(factors.hysteresis_factor(damage.kind)));
    match damage.kind {
        DamageKind::Healthy => return Ok(*base),
        DamageKind::TransverseRupture => {
            m.mechanics.area_m2 *= lerp(factors.transverse_area);
            m.divergence *= lerp(factors.transverse_divergence);
        }
        DamageKind::LongitudinalRupture => {
            let p = 1.0 + s * factors.longitudinal_perturbation;
            m.mechanics.area_m2 *= p;
            m.mechanics.toe_scale *= p;
            m.tendon = m.tendon.with_scaled_modulus(p);
            m.divergence *= p;
        }
        DamageKind::Microtear => {
            m.tendon = m
                .tendon
                .with_scaled_modulus(lerp(factors.microtear_modulus));
            m.curvature = base.curvature + s * (factors.microtear_curvature - base.curvature);
        }
    }
    if !(hyst > 0.0) {
        return Err(Error::config("damage scaling removes all hysteresis"));
    }
    m.mechanics.hysteresis_target *= hyst;
    Ok(m)
}

/// Scale on every hysteresis reduction that makes the damaged-to-healthy
/// mean ratio equal `ratio`.
pub fn cohort_deficit_scale(
    scenarios: &[ScenarioSpec],
    factors: &DamageFactors,
    ratio: f64,
) -> Result<f64> {
    let (mut h_sum, mut h_n) = (0.0, 0usize);
    let (mut d_sum, mut d_deficit, mut d_n) = (0.0, 0.0, 0usize);
    for s in scenarios {
        let r = s.hysteresis_target;
        if s.damage.kind == DamageKind::Healthy {
            h_sum += r;
            h_n += 1;
        } else {
            let f = 1.0 - s.damage.severity * (1.0 - factors.hysteresis_factor(s.damage.kind));
            d_sum += r;
            d_deficit += r * (1.0 - f);
            d_n += 1;
        }
    }
    if h_n == 0 || d_n == 0 || d_deficit == 0.0 {
        return Ok(1.0);
    }
    let h_mean = h_sum / h_n as f64;
    let scale = (d_sum / d_n as f64 - ratio * h_mean) / (d_deficit / d_n as f64);
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::config(format!(
            "cohort ratio {ratio} cannot be reached by scaling damage"
        )));
    }
    Ok(scale)
}

/// One specimen's experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub specimen_id: String,
    pub damage: DamageSpec,
    /// Unloaded phantom with this specimen's cross-section and length.
    pub geometry: PhantomGeometry,
    pub tendon: MaterialProps,
    pub muscle: MaterialProps,
    /// Table row the dimensions came from, if any.
    pub measured: Option<MeasuredSpecimen>,
    pub cycles: usize,
    pub steps_per_cycle: usize,
    /// N
    pub max_force: f64,
    /// dB; `None` disables noise.
    pub noise_snr: Option<f64>,
    pub hysteresis_target: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.damage.validate()?;
        self.geometry.validate()?;
        self.tendon.validate()?;
        self.muscle.validate()?;
        if self.cycles == 0 || self.cycles > MAX_CYCLES {
            return Err(Error::config(format!(
                "cycles must lie in 1..={MAX_CYCLES}, got {}",
                self.cycles
            )));
        }
        if self.steps_per_cycle < 4 || self.steps_per_cycle % 2 != 0 {
            return Err(Error::config(format!(
                "steps per cycle must be even and >= 4, got {}",
                self.steps_per_cycle
            )));
        }
        if !(self.max_force > 0.0 && self.max_force <= MAX_FORCE) {
            return Err(Error::config(format!(
                "max force must lie in (0, {MAX_FORCE}] N"
            )));
        }
        if let Some(snr) = self.noise_snr {
            if !snr.is_finite() {
                return Err(Error::config("noise SNR must be finite or null"));
            }
        }
        Ok(())
    }
}

/// Generator block of the JSON configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub healthy_specimens: usize,
    pub damaged_per_kind: usize,
    pub damage_severity: f64,
    pub cycles: usize,
    pub steps_per_cycle: usize,
    pub max_force_n: f64,
    /// dB; null disables noise.
    pub noise_snr_db: Option<f64>,
    /// Bound on the per-cycle relative force jitter.
    pub force_jitter: f64,
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub record_length: usize,
    pub burst_cycles: f64,
    pub burst_frequency_hz: f64,
    pub toe_exponent: f64,
    pub hysteresis_target: f64,
    pub prestress_n: f64,
    pub transducer: TransducerModel,
    pub damage: DamageFactors,
    /// Damaged/healthy dissipated-energy ratio enforced on mixed cohorts.
    pub cohort_dissipation_ratio: Option<f64>,
    /// Tendon stiffness follows the unloading force gap by this share.
    pub divergence: f64,
    pub use_cache: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            healthy_specimens: 18,
            damaged_per_kind: 6,
            damage_severity: 1.0,
            cycles: 5,
            steps_per_cycle: 14,
            max_force_n: 60.0,
            noise_snr_db: Some(30.0),
            force_jitter: 0.005,
            seed: 0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            record_length: DEFAULT_RECORD_LENGTH,
            burst_cycles: 2.0,
            burst_frequency_hz: 52e3,
            toe_exponent: 20.0,
            hysteresis_target: 0.25,
            prestress_n: 5.0,
            transducer: TransducerModel::default(),
            damage: DamageFactors::default(),
            cohort_dissipation_ratio: Some(COHORT_DISSIPATION_RATIO),
            divergence: 1.0,
            use_cache: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.transducer.validate()?;
        self.damage.validate()?;
        if !(0.0..=1.0).contains(&self.damage_severity) {
            return Err(Error::config("damage severity must lie in [0, 1]"));
        }
        if !(self.force_jitter >= 0.0 && self.force_jitter < 0.5) {
            return Err(Error::config("force jitter must lie in [0, 0.5)"));
        }
        if !(self.sample_rate_hz > 2.0 * self.burst_frequency_hz && self.burst_frequency_hz > 0.0) {
            return Err(Error::config(
                "sample rate must exceed twice the burst frequency",
            ));
        }
        if self.record_length < crate::dsp::MIN_TRACE_LENGTH {
            return Err(Error::config("record length too short"));
        }
        if !(self.burst_cycles > 0.0 && self.toe_exponent > 0.0 && self.prestress_n >= 0.0) {
            return Err(Error::config(
                "burst cycles, toe exponent and prestress must be positive",
            ));
        }
        if !(self.prestress_n < self.max_force_n) {
            return Err(Error::config("prestress must stay below the maximum force"));
        }
        if !(0.0..1.0).contains(&self.hysteresis_target) {
            return Err(Error::config("hysteresis target must lie in [0, 1)"));
        }
        if !(self.divergence >= 0.0 && self.divergence <= 1.0) {
            return Err(Error::config("divergence must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Scenario for one measured specimen in the given condition.
    pub fn scenario(
        &self,
        id: String,
        damage: DamageSpec,
        row: &MeasuredSpecimen,
        base: &PhantomGeometry,
        muscle: MaterialProps,
        tendon: MaterialProps,
    ) -> ScenarioSpec {
        ScenarioSpec {
            specimen_id: id,
            damage,
            geometry: row.geometry(base),
            tendon,
            muscle,
            measured: Some(*row),
            cycles: self.cycles,
            steps_per_cycle: self.steps_per_cycle,
            max_force: self.max_force_n,
            noise_snr: self.noise_snr_db,
            hysteresis_target: self.hysteresis_target,
            seed: self.seed,
        }
    }

    /// Healthy tendons cycle through the measured table; damaged tendons
    /// take the table rows recorded with their damage kind.
    pub fn default_cohort(
        &self,
        base: &PhantomGeometry,
        muscle: MaterialProps,
        tendon: MaterialProps,
    ) -> Result<Vec<ScenarioSpec>> {
        self.validate()?;
        let mut out = Vec::new();
        for n in 0..self.healthy_specimens {
            let row = &MEASURED_SPECIMENS[n % MEASURED_SPECIMENS.len()];
            out.push(self.scenario(
                format!("H-{:02}", n + 1),
                DamageSpec::HEALTHY,
                row,
                base,
                muscle,
                tendon,
            ));
        }
        for kind in [
            DamageKind::LongitudinalRupture,
            DamageKind::TransverseRupture,
            DamageKind::Microtear,
        ] {
            let rows: Vec<(usize, &MeasuredSpecimen)> = MEASURED_SPECIMENS
                .iter()
                .enumerate()
                .filter(|(_, r)| r.condition == kind)
                .collect();
            for n in 0..self.damaged_per_kind {
                let (idx, row) = rows[n % rows.len()];
                let damage = DamageSpec::new(kind, self.damage_severity)?;
                let id = format!(
                    "{}-{:02}",
                    kind.code(),
                    idx + 1 + MEASURED_SPECIMENS.len() * (n / rows.len())
                );
                out.push(self.scenario(id, damage, row, base, muscle, tendon));
            }
        }
        Ok(out)
    }
}

/// One recorded deformation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub specimen_id: String,
    pub condition: DamageKind,
    pub cycle: usize,
    pub step: usize,
    pub direction: Direction,
    /// mm
    pub deformation: f64,
    /// N
    pub force: f64,
    /// One trace per receiver.
    pub traces: Vec<SignalTrace>,
}

/// Table entry describing a generated specimen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecimenInfo {
    pub id: String,
    pub condition: DamageKind,
    pub severity: f64,
    pub x_mm: f64,
    pub y_mm: f64,
    pub z_mm: f64,
    pub area_mm2: f64,
    pub mass_initial_g: Option<f64>,
    pub mass_end_g: Option<f64>,
    pub cycles: usize,
    pub steps_per_cycle: usize,
    /// Calibrated unloading coefficient of the mechanics model.
    pub hysteresis_h: f64,
    pub hysteresis_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub specimens: Vec<SpecimenInfo>,
    pub records: Vec<ExperimentRecord>,
}

impl Dataset {
    pub fn records_for<'a>(
        &'a self,
        id: &'a str,
    ) -> impl Iterator<Item = &'a ExperimentRecord> + 'a {
        self.records.iter().filter(move |r| r.specimen_id == id)
    }
}

/// Solver transfers per (specimen, step), shared across cycles and, when
/// the acoustic state matches exactly, across calls.
#[derive(Default)]
pub struct TransferCache {
    map: Mutex<HashMap<CacheKey, Vec<f64>>>,
    solves: AtomicUsize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    specimen: String,
    step: usize,
    state: [u64; 5],
}

impl TransferCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solver invocations made through this cache.
    pub fn solver_calls(&self) -> usize {
        self.solves.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loaded state of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
struct StepState {
    direction: Direction,
    /// m
    elongation: f64,
    /// Force on the mechanics curve before jitter, N.
    force: f64,
    geometry: PhantomGeometry,
    tendon: MaterialProps,
}

impl StepState {
    fn fingerprint(&self) -> [u64; 5] {
        [
            self.geometry.tendon_major_diameter.to_bits(),
            self.geometry.tendon_minor_diameter.to_bits(),
            self.tendon.youngs_modulus.to_bits(),
            self.tendon.density.to_bits(),
            self.tendon.poisson_ratio.to_bits(),
        ]
    }
}

/// Direction and deformation index of every step in a cycle: loading up
/// through the turning point, then unloading back to zero.
pub fn step_plan(steps_per_cycle: usize) -> Vec<(Direction, usize)> {
    let half = steps_per_cycle / 2;
    (0..half)
        .map(|k| (Direction::Loading, k))
        .chain((0..half).map(|k| (Direction::Unloading, half - 1 - k)))
        .collect()
}

/// Mechanics and per-step acoustic states of one specimen.
struct SpecimenPlan {
    model: SpecimenModel,
    h: f64,
    steps: Vec<StepState>,
}

fn plan_specimen(
    spec: &ScenarioSpec,
    config: &SynthConfig,
    calibration: &LoadCalibration,
    deficit_scale: f64,
) -> Result<SpecimenPlan> {
    spec.validate()?;
    let length = spec.geometry.specimen_length;
    let max_elongation = calibration.elongation(spec.max_force);
    let max_strain = max_elongation / length;
    let area = spec.geometry.tendon_area_mm2() * 1e-6;
    let toe_scale = TendonModelParams::toe_scale_for(
        spec.max_force,
        max_strain,
        config.toe_exponent,
        config.prestress_n,
        area,
    )?;
    let healthy = SpecimenModel {
        mechanics: TendonModelParams {
            toe_scale,
            toe_exponent: config.toe_exponent,
            hysteresis_target: spec.hysteresis_target,
            prestress: config.prestress_n,
            area_m2: area,
        },
        tendon: spec.tendon,
        geometry: spec.geometry,
        divergence: config.divergence,
        curvature: 0.0,
    };
    let model = damage_transform(&healthy, &spec.damage, &config.damage, deficit_scale)?;
    let h = calibrate_hysteresis(&model.mechanics, max_strain)?;
    let half = spec.steps_per_cycle / 2;
    let params = &model.mechanics;
    let steps = step_plan(spec.steps_per_cycle)
        .into_iter()
        .map(|(direction, k)| {
            let elongation = max_elongation * k as f64 / (half - 1) as f64;
            let strain = elongation / length;
            let f_load = loading_stress(params, strain)? * params.area_m2;
            let f_unload = unloading_stress_with(params, h, strain, max_strain)? * params.area_m2;
            let (force, acoustic_force) = match direction {
                Direction::Loading => (f_load, f_load),
                Direction::Unloading => (f_unload, f_load - model.divergence * (f_load - f_unload)),
            };
            let u = (acoustic_force / calibration.max_force).clamp(0.0, 1.0);
            let shape = u + model.curvature * u * (1.0 - u);
            let stiffness = 1.0 + calibration.stiffness_gain * shape;
            let (geometry, tendon) = deform(&model.geometry, &model.tendon, elongation, stiffness)?;
            Ok(StepState {
                direction,
                elongation,
                force: force.min(spec.max_force),
                geometry,
                tendon,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpecimenPlan { model, h, steps })
}

/// Receiver magnitudes for one phantom, through the windowed solver when
/// the phantom fits it.
struct AcousticModel<'a> {
    config: &'a SolverConfig,
    windowed: Option<WindowedSolver>,
}

impl<'a> AcousticModel<'a> {
    fn new(config: &'a SolverConfig, scenarios: &[ScenarioSpec]) -> Result<Self> {
        config.validate()?;
        let windowed = match scenarios.first() {
            Some(first)
                if scenarios.iter().all(|s| {
                    s.muscle == first.muscle
                        && s.geometry.muscle_diameter == first.geometry.muscle_diameter
                }) =>
            {
                Self::shared_window(config, scenarios, first)
            }
            _ => None,
        };
        Ok(AcousticModel { config, windowed })
    }

    /// Windowed solver around every tendon in the cohort, if one fits.
    fn shared_window(
        config: &SolverConfig,
        scenarios: &[ScenarioSpec],
        first: &ScenarioSpec,
    ) -> Option<WindowedSolver> {
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for s in scenarios {
            let (ox, oy) = s.geometry.tendon_center_offset;
            let (hx, hy) = s.geometry.tendon_half_extent();
            x0 = x0.min(ox - hx);
            x1 = x1.max(ox + hx);
            y0 = y0.min(oy - hy);
            y1 = y1.max(oy + hy);
        }
        let centre = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let radius = 0.5 * (x1 - x0).max(y1 - y0) + config.spacing_m;
        let reference = config
            .rasterize(&first.geometry, &first.muscle, &first.muscle)
            .ok()?;
        let window = WindowBox::around(&reference, centre, radius, 2).ok()?;
        WindowedSolver::new(
            &reference,
            config.frequency_hz,
            config.transmitter(),
            window,
        )
        .ok()
    }

    fn transfers(
        &self,
        geometry: &PhantomGeometry,
        muscle: &MaterialProps,
        tendon: &MaterialProps,
    ) -> Result<Vec<f64>> {
        let grid: Grid2D = self.config.rasterize(geometry, muscle, tendon)?;
        let field = match &self.windowed {
            Some(w) if w.is_compatible(&grid) => w.solve(&grid)?,
            _ => assemble_and_solve(&grid, &self.config.boundary(), self.config.frequency_hz)?,
        };
        Ok(sample_receivers_with(
            &field,
            &self.config.receiver_angles_deg,
            self.config.receiver_mode,
        )?
        .iter()
        .map(|s| s.magnitude())
        .collect())
    }
}

/// Transmit pulse: a sine burst shaped by the transducer resonance, then
/// delayed by `delay` seconds. Returns `length` samples.
pub fn shaped_pulse(config: &SynthConfig, delay: f64) -> Vec<f64> {
    let fs = config.sample_rate_hz;
    let n = config.record_length;
    // Zero-pad so the resonator tail and the delay do not wrap around.
    let m = (4 * n).next_power_of_two();
    let duration = config.burst_cycles / config.burst_frequency_hz;
    let mut buf: Vec<Complex64> = (0..m)
        .map(|k| {
            let t = k as f64 / fs;
            let v = if t < duration {
                (2.0 * PI * config.burst_frequency_hz * t).sin()
            } else {
                0.0
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let signed = if k <= m / 2 {
            k as f64
        } else {
            k as f64 - m as f64
        };
        let f = signed * fs / m as f64;
        let h = config.transducer.complex_response(f.abs());
        let h = if signed < 0.0 { h.conj() } else { h };
        *v *= h * Complex64::from_polar(1.0, -2.0 * PI * f * delay);
    }
    if m % 2 == 0 {
        // The Nyquist bin must stay real for a real output.
        buf[m / 2] = Complex64::new(buf[m / 2].re, 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf[..n].iter().map(|v| v.re / m as f64).collect()
}

/// Straight-line travel time from the transmitter to a receiver at
/// `angle_deg`, s.
pub fn propagation_delay(disk_radius: f64, angle_deg: f64, sound_speed: f64) -> f64 {
    2.0 * disk_radius * (0.5 * angle_deg.to_radians()).sin().abs() / sound_speed
}

/// Summary of a generation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationReport {
    pub records: usize,
    pub solver_calls: usize,
}

/// Worker count from `ACOUSTEND_THREADS`, if set.
pub fn env_threads() -> Option<usize> {
    std::env::var("ACOUSTEND_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Runs `f` on a pool of `threads` workers (or the environment default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.or_else(env_threads) {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Generates every record of `scenarios` with a private cache.
pub fn generate_dataset(
    scenarios: &[ScenarioSpec],
    config: &SynthConfig,
    solver: &SolverConfig,
    calibration: &LoadCalibration,
) -> Result<(Dataset, GenerationReport)> {
    generate_dataset_with(
        scenarios,
        config,
        solver,
        calibration,
        &TransferCache::new(),
    )
}

/// Generates every record of `scenarios`, reusing `cache` for solver
/// transfers. Output does not depend on the worker count.
pub fn generate_dataset_with(
    scenarios: &[ScenarioSpec],
    config: &SynthConfig,
    solver: &SolverConfig,
    calibration: &LoadCalibration,
    cache: &TransferCache,
) -> Result<(Dataset, GenerationReport)> {
    config.validate()?;
    calibration.validate()?;
    let deficit_scale = match config.cohort_dissipation_ratio {
        Some(ratio) => cohort_deficit_scale(scenarios, &config.damage, ratio)?,
        None => 1.0,
    };
    let plans = scenarios
        .par_iter()
        .map(|s| {
            plan_specimen(s, config, calibration, deficit_scale)
                .map_err(|e| e.context(format!("specimen {}", s.specimen_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let calls_before = cache.solver_calls();
    let acoustic = AcousticModel::new(solver, scenarios)?;

    if config.use_cache {
        let jobs: Vec<(CacheKey, usize, usize)> = {
            let map = cache.map.lock().expect("cache lock");
            plans
                .iter()
                .enumerate()
                .flat_map(|(s, plan)| plan.steps.iter().enumerate().map(move |(k, st)| (s, k, st)))
                .map(|(s, k, st)| {
                    (
                        CacheKey {
                            specimen: scenarios[s].specimen_id.clone(),
                            step: k,
                            state: st.fingerprint(),
                        },
                        s,
                        k,
                    )
                })
                .filter(|(key, _, _)| !map.contains_key(key))
                .collect()
        };
        let solved = jobs
            .par_iter()
            .map(|(key, s, k)| {
                let st = &plans[*s].steps[*k];
                let spec = &scenarios[*s];
                cache.solves.fetch_add(1, Ordering::SeqCst);
                acoustic
                    .transfers(&st.geometry, &spec.muscle, &st.tendon)
                    .map(|t| (key.clone(), t))
                    .map_err(|e| e.context(format!("specimen {}, step {k}", spec.specimen_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        cache.map.lock().expect("cache lock").extend(solved);
    }

    let disk_radius = scenarios
        .first()
        .map(|s| s.geometry.muscle_radius())
        .unwrap_or(0.0);
    let records_per_specimen = scenarios
        .par_iter()
        .zip(plans.par_iter())
        .enumerate()
        .map(|(index, (spec, plan))| {
            let c = spec.muscle.sound_speed()?.value;
            let pulses: Vec<Vec<f64>> = solver
                .receiver_angles_deg
                .iter()
                .map(|&a| shaped_pulse(config, propagation_delay(disk_radius, a, c)))
                .collect();
            let transfers = |step: usize| -> Result<Vec<f64>> {
                let st = &plan.steps[step];
                if config.use_cache {
                    let key = CacheKey {
                        specimen: spec.specimen_id.clone(),
                        step,
                        state: st.fingerprint(),
                    };
                    Ok(cache.map.lock().expect("cache lock")[&key].clone())
                } else {
                    cache.solves.fetch_add(1, Ordering::SeqCst);
                    acoustic
                        .transfers(&st.geometry, &spec.muscle, &st.tendon)
                        .map_err(|e| {
                            e.context(format!("specimen {}, step {step}", spec.specimen_id))
                        })
                }
            };
            synthesize_specimen(spec, plan, index as u64, config, &pulses, transfers)
        })
        .collect::<Result<Vec<_>>>()?;

    let specimens = scenarios
        .iter()
        .zip(&plans)
        .map(|(s, p)| specimen_info(s, p))
        .collect();
    let records: Vec<ExperimentRecord> = records_per_specimen.into_iter().flatten().collect();
    let report = GenerationReport {
        records: records.len(),
        solver_calls: cache.solver_calls() - calls_before,
    };
    let snapshot = serde_json::json!({
        "synth": config,
        "solver": solver,
        "calibration": calibration,
        "scenarios": scenarios,
    });
    Ok((
        Dataset {
            master_seed: config.seed,
            config: snapshot,
            specimens,
            records,
        },
        report,
    ))
}

/// The records [`generate_dataset`] would produce, without traces: the
/// same forces and deformations at a fraction of the cost.
pub fn mechanical_dataset(
    scenarios: &[ScenarioSpec],
    config: &SynthConfig,
    calibration: &LoadCalibration,
) -> Result<Dataset> {
    config.validate()?;
    calibration.validate()?;
    let deficit_scale = match config.cohort_dissipation_ratio {
        Some(ratio) => cohort_deficit_scale(scenarios, &config.damage, ratio)?,
        None => 1.0,
    };
    let mut specimens = Vec::with_capacity(scenarios.len());
    let mut records = Vec::new();
    for (index, spec) in scenarios.iter().enumerate() {
        let plan = plan_specimen(spec, config, calibration, deficit_scale)
            .map_err(|e| e.context(format!("specimen {}", spec.specimen_id)))?;
        for (cycle, scale) in cycle_scales(spec, index as u64, config)?
            .into_iter()
            .enumerate()
        {
            for (step, st) in plan.steps.iter().enumerate() {
                records.push(record_for(spec, cycle, step, st, scale));
            }
        }
        specimens.push(specimen_info(spec, &plan));
    }
    Ok(Dataset {
        master_seed: config.seed,
        config: serde_json::json!({ "synth": config, "calibration": calibration, "scenarios": scenarios }),
        specimens,
        records,
    })
}

fn specimen_info(spec: &ScenarioSpec, plan: &SpecimenPlan) -> SpecimenInfo {
    let g = &spec.geometry;
    let (x_mm, y_mm) = match &spec.measured {
        Some(m) => (m.x_mm, m.y_mm),
        None => (g.tendon_minor_diameter * 1e3, g.tendon_major_diameter * 1e3),
    };
    SpecimenInfo {
        id: spec.specimen_id.clone(),
        condition: spec.damage.kind,
        severity: spec.damage.severity,
        x_mm,
        y_mm,
        z_mm: spec.measured.map_or(g.specimen_length * 1e3, |m| m.z_mm),
        area_mm2: crate::phantom::cross_section_area(x_mm, y_mm).unwrap_or(f64::NAN),
        mass_initial_g: spec.measured.map(|m| m.mass_initial_g),
        mass_end_g: spec.measured.map(|m| m.mass_end_g),
        cycles: spec.cycles,
        steps_per_cycle: spec.steps_per_cycle,
        hysteresis_h: plan.h,
        hysteresis_target: plan.model.mechanics.hysteresis_target,
    }
}

/// Per-cycle force multipliers. They come from their own stream, so the
/// forces do not depend on whether traces are synthesised.
fn cycle_scales(spec: &ScenarioSpec, index: u64, config: &SynthConfig) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2 * index);
    let jitter = Uniform::new_inclusive(-config.force_jitter, config.force_jitter)
        .map_err(|e| Error::config(format!("force jitter: {e}")))?;
    Ok((0..spec.cycles)
        .map(|_| 1.0 + jitter.sample(&mut rng))
        .collect())
}

fn record_for(
    spec: &ScenarioSpec,
    cycle: usize,
    step: usize,
    st: &StepState,
    scale: f64,
) -> ExperimentRecord {
    ExperimentRecord {
        specimen_id: spec.specimen_id.clone(),
        condition: spec.damage.kind,
        cycle,
        step,
        direction: st.direction,
        deformation: st.elongation * 1e3,
        force: (st.force * scale).clamp(0.0, spec.max_force),
        traces: Vec::new(),
    }
}

fn synthesize_specimen(
    spec: &ScenarioSpec,
    plan: &SpecimenPlan,
    index: u64,
    config: &SynthConfig,
    pulses: &[Vec<f64>],
    transfers: impl Fn(usize) -> Result<Vec<f64>>,
) -> Result<Vec<ExperimentRecord>> {
    let scales = cycle_scales(spec, index, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2 * index + 1);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let pulse_power: Vec<f64> = pulses
        .iter()
        .map(|p| p.iter().map(|v| v * v).sum::<f64>() / p.len() as f64)
        .collect();
    let mut records = Vec::with_capacity(spec.cycles * plan.steps.len());
    for (cycle, &scale) in scales.iter().enumerate() {
        for (step, st) in plan.steps.iter().enumerate() {
            let magnitudes = transfers(step)?;
            let traces = pulses
                .iter()
                .zip(&magnitudes)
                .zip(&pulse_power)
                .map(|((pulse, &a), &p)| {
                    let sigma = match spec.noise_snr {
                        Some(snr) => (a * a * p / 10f64.powf(snr / 10.0)).sqrt(),
                        None => 0.0,
                    };
                    let samples = pulse
                        .iter()
                        .map(|&v| {
                            let noise = if sigma > 0.0 {
                                sigma * unit.sample(&mut rng)
                            } else {
                                0.0
                            };
                            crate::io::quantize(a * v + noise)
                        })
                        .collect();
                    SignalTrace::new(samples, config.sample_rate_hz, 0.0)
                })
                .collect::<Result<Vec<_>>>()?;
            records.push(ExperimentRecord {
                traces,
                ..record_for(spec, cycle, step, st, scale)
            });
        }
    }
    Ok(records)
}

/// Per-(specimen, step) loaded tendon geometry and material as the
/// generator will solve them; exposed for inspection and tests.
pub fn acoustic_states(
    spec: &ScenarioSpec,
    config: &SynthConfig,
    calibration: &LoadCalibration,
    deficit_scale: f64,
) -> Result<Vec<(Direction, f64, PhantomGeometry, MaterialProps)>> {
    let plan = plan_specimen(spec, config, calibration, deficit_scale)?;
    Ok(plan
        .steps
        .iter()
        .map(|s| (s.direction, s.force, s.geometry, s.tendon))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resonator_peak_and_band() {
        let m = TransducerModel::default();
        assert!((transducer_response(&m, m.f0).unwrap() - 1.0).abs() < 1e-15);
        assert!((transducer_intensity(&m, m.f0).unwrap() - 25.1).abs() < 1e-12);
        assert!(transducer_response(&m, 1.0).unwrap() < 1e-3);
        assert!(transducer_response(&m, 1e9).unwrap() < 1e-3);
        let (lo, hi) = m.half_power_band();
        for f in [lo, hi] {
            assert!((transducer_response(&m, f).unwrap().powi(2) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn directivity_on_axis_and_range() {
        let m = TransducerModel::default();
        assert_eq!(directivity(&m, 0.0, WATER_SOUND_SPEED).unwrap(), 1.0);
        assert!(directivity(&m, 95.0, WATER_SOUND_SPEED).is_err());
        assert!(half_power_beamwidth(&m, WATER_SOUND_SPEED).unwrap() > 22.0);
        let far = directivity_at_range(&m, 30.0, 5.0, WATER_SOUND_SPEED).unwrap();
        let exact = directivity(&m, 30.0, WATER_SOUND_SPEED).unwrap();
        assert!((far - exact).abs() < 1e-2, "{far} vs {exact}");
    }

    #[test]
    fn healthy_damage_is_identity() {
        let base = SpecimenModel {
            mechanics: TendonModelParams::default(),
            tendon: MaterialProps::TENDON,
            geometry: PhantomGeometry::default(),
            divergence: 1.0,
            curvature: 0.0,
        };
        let f = DamageFactors::default();
        assert_eq!(
            damage_transform(&base, &DamageSpec::HEALTHY, &f, 1.0).unwrap(),
            base
        );
        let tc = damage_transform(
            &base,
            &DamageSpec::new(DamageKind::TransverseRupture, 1.0).unwrap(),
            &f,
            1.0,
        )
        .unwrap();
        assert!((tc.mechanics.area_m2 / base.mechanics.area_m2 - 0.85).abs() < 1e-12);
        assert!(DamageSpec::new(DamageKind::Microtear, 1.5).is_err());
    }

    #[test]
    fn step_plan_goes_up_then_down() {
        let plan = step_plan(14);
        assert_eq!(plan.len(), 14);
        assert_eq!(plan[6], (Direction::Loading, 6));
        assert_eq!(plan[7], (Direction::Unloading, 6));
        assert_eq!(plan[13], (Direction::Unloading, 0));
    }

    #[test]
    fn pulse_is_delayed() {
        let c = SynthConfig::default();
        let p0 = shaped_pulse(&c, 0.0);
        let p1 = shaped_pulse(&c, 100e-6);
        for k in 0..800 {
            assert!((p0[k] - p1[k + 100]).abs() < 1e-9);
        }
    }
}
