//! Tendon stress-strain model: exponential-toe loading curve, one-parameter
//! hysteretic unloading curve, and the energy measures built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid size used when the calibration integrates a curve pair.
pub const CALIBRATION_POINTS: usize = 4001;
/// Bisection stops once the bracket on `h` is narrower than this.
pub const CALIBRATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    StressStrain,
    StressAcoustic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Loading,
    Unloading,
}

impl Direction {
    pub fn code(self) -> &'static str {
        match self {
            Direction::Loading => "loading",
            Direction::Unloading => "unloading",
        }
    }
}

/// Ordered `(x, y)` samples. Storage is always increasing in `x`; an
/// unloading curve may be handed over in its natural decreasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    points: Vec<(f64, f64)>,
    pub kind: CurveKind,
    pub direction: Direction,
}

impl CurveSeries {
    pub fn new(points: Vec<(f64, f64)>, kind: CurveKind, direction: Direction) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain(format!(
                "a curve needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::domain("curve points must be finite"));
        }
        let increasing = points.windows(2).all(|w| w[1].0 > w[0].0);
        let decreasing = points.windows(2).all(|w| w[1].0 < w[0].0);
        let points = match direction {
            Direction::Loading if increasing => points,
            Direction::Unloading if increasing => points,
            Direction::Unloading if decreasing => points.into_iter().rev().collect(),
            _ => {
                return Err(Error::domain(format!(
                    "{} curve x values must be strictly monotonic",
                    direction.code()
                )))
            }
        };
        Ok(CurveSeries {
            points,
            kind,
            direction,
        })
    }

    /// Points in increasing `x`.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Linear interpolation at `x`, which must lie within the curve's range.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.x_range();
        if !(x >= lo && x <= hi) {
            return Err(Error::domain(format!(
                "x = {x} lies outside the curve range [{lo}, {hi}]"
            )));
        }
        let k = self.points.partition_point(|p| p.0 < x);
        if k == 0 {
            return Ok(self.points[0].1);
        }
        let (x0, y0) = self.points[k - 1];
        let (x1, y1) = self.points[k];
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }
}

/// Parameters of one specimen's stress-strain behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TendonModelParams {
    /// Toe scale `A`, Pa.
    pub toe_scale: f64,
    /// Toe exponent `B`.
    pub toe_exponent: f64,
    /// Fraction of the loading energy dissipated over a cycle.
    pub hysteresis_target: f64,
    /// Pre-stress force, N.
    pub prestress: f64,
    /// Cross-section the force is spread over, m².
    pub area_m2: f64,
}

impl Default for TendonModelParams {
    fn default() -> Self {
        TendonModelParams {
            toe_scale: 1e6,
            toe_exponent: 20.0,
            hysteresis_target: 0.25,
            prestress: 5.0,
            area_m2: 0.785 * 12e-3 * 9e-3,
        }
    }
}

impl TendonModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.toe_scale) || !positive(self.toe_exponent) {
            return Err(Error::domain("toe scale and exponent must be > 0"));
        }
        if !positive(self.area_m2) {
            return Err(Error::domain("area must be > 0"));
        }
        if !(self.prestress.is_finite() && self.prestress >= 0.0) {
            return Err(Error::domain("prestress must be >= 0"));
        }
        if !(self.hysteresis_target >= 0.0 && self.hysteresis_target < 1.0) {
            return Err(Error::domain(format!(
                "hysteresis target must lie in [0, 1), got {}",
                self.hysteresis_target
            )));
        }
        Ok(())
    }

    pub fn prestress_pa(&self) -> f64 {
        self.prestress / self.area_m2
    }

    /// Toe scale that makes the loading force reach `force` at `strain`.
    pub fn toe_scale_for(
        force: f64,
        strain: f64,
        toe_exponent: f64,
        prestress: f64,
        area_m2: f64,
    ) -> Result<f64> {
        if !(force > prestress && strain > 0.0 && toe_exponent > 0.0 && area_m2 > 0.0) {
            return Err(Error::domain(
                "toe scale needs force > prestress and positive strain, exponent and area",
            ));
        }
        Ok((force - prestress) / area_m2 / (toe_exponent * strain).exp_m1())
    }
}

/// `σ = A(e^{Bε} − 1) + σ_pre`.
pub fn loading_stress(params: &TendonModelParams, strain: f64) -> Result<f64> {
    if !(strain >= 0.0) {
        return Err(Error::domain(format!("strain must be >= 0, got {strain}")));
    }
    Ok(params.toe_scale * (params.toe_exponent * strain).exp_m1() + params.prestress_pa())
}

/// Unloading stress for an explicit hysteresis coefficient `h`.
pub fn unloading_stress_with(
    params: &TendonModelParams,
    h: f64,
    strain: f64,
    max_strain: f64,
) -> Result<f64> {
    if !(strain <= max_strain) {
        return Err(Error::domain(format!(
            "strain {strain} exceeds the turning point {max_strain}"
        )));
    }
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::domain(format!(
            "hysteresis coefficient must lie in [0, 1], got {h}"
        )));
    }
    let u = strain / max_strain;
    Ok(loading_stress(params, strain)? * (1.0 - h * (1.0 - u * u)))
}

/// Unloading stress with `h` calibrated to the parameters' hysteresis
/// target.
pub fn unloading_stress(params: &TendonModelParams, strain: f64, max_strain: f64) -> Result<f64> {
    let h = calibrate_hysteresis(params, max_strain)?;
    unloading_stress_with(params, h, strain, max_strain)
}

/// Stress-strain loading and unloading curves on `n` evenly spaced strains.
pub fn stress_strain_pair(
    params: &TendonModelParams,
    h: f64,
    max_strain: f64,
    n: usize,
) -> Result<(CurveSeries, CurveSeries)> {
    if n < 2 {
        return Err(Error::domain("a curve needs at least 2 points"));
    }
    let strains: Vec<f64> = (0..n)
        .map(|k| (max_strain * k as f64 / (n - 1) as f64).min(max_strain))
        .collect();
    let loading = strains
        .iter()
        .map(|&e| Ok((e, loading_stress(params, e)?)))
        .collect::<Result<Vec<_>>>()?;
    let unloading = strains
        .iter()
        .map(|&e| Ok((e, unloading_stress_with(params, h, e, max_strain)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        CurveSeries::new(loading, CurveKind::StressStrain, Direction::Loading)?,
        CurveSeries::new(unloading, CurveKind::StressStrain, Direction::Unloading)?,
    ))
}

/// Dissipated fraction of the curve pair generated with coefficient `h`.
pub fn dissipated_fraction(params: &TendonModelParams, h: f64, max_strain: f64) -> Result<f64> {
    let (l, u) = stress_strain_pair(params, h, max_strain, CALIBRATION_POINTS)?;
    relative_dissipated_energy(&l, &u)
}

/// Finds `h ∈ [0, 1]` whose curve pair dissipates the target fraction.
pub fn calibrate_hysteresis(params: &TendonModelParams, max_strain: f64) -> Result<f64> {
    params.validate()?;
    if !(max_strain.is_finite() && max_strain > 0.0) {
        return Err(Error::domain(format!(
            "turning-point strain must be > 0, got {max_strain}"
        )));
    }
    let target = params.hysteresis_target;
    if target == 0.0 {
        return Ok(0.0);
    }
    let reachable = dissipated_fraction(params, 1.0, max_strain)?;
    if reachable < target {
        return Err(Error::Calibration(format!(
            "hysteresis target {target} exceeds the largest reachable fraction {reachable:.6}"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > CALIBRATION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if dissipated_fraction(params, mid, max_strain)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &CurveSeries) -> Result<f64> {
    let pts = curve.points();
    if pts.len() < 2 {
        return Err(Error::domain("a curve needs at least 2 points"));
    }
    Ok(pts
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum())
}

/// `(AUC_loading − AUC_unloading) / AUC_loading`.
pub fn relative_dissipated_energy(loading: &CurveSeries, unloading: &CurveSeries) -> Result<f64> {
    let (a0, a1) = loading.x_range();
    let (b0, b1) = unloading.x_range();
    let tol = 1e-9 * (a1 - a0).abs().max(f64::MIN_POSITIVE);
    if (a0 - b0).abs() > tol || (a1 - b1).abs() > tol {
        return Err(Error::domain(format!(
            "curves must share their x range: [{a0}, {a1}] vs [{b0}, {b1}]"
        )));
    }
    let al = auc(loading)?;
    if al == 0.0 {
        return Err(Error::domain("loading curve has zero area"));
    }
    Ok((al - auc(unloading)?) / al)
}

/// Pointwise mean of several curves together with their spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBand {
    pub mean: CurveSeries,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Interpolates every curve onto `x_grid` and averages them.
pub fn average_curves(curves: &[CurveSeries], x_grid: &[f64]) -> Result<CurveBand> {
    let first = curves
        .first()
        .ok_or_else(|| Error::domain("no curves to average"))?;
    if x_grid.len() < 2 || x_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(
            "x grid must hold at least 2 strictly increasing values",
        ));
    }
    let n = curves.len() as f64;
    let mut mean = vec![0.0; x_grid.len()];
    let mut min = vec![f64::INFINITY; x_grid.len()];
    let mut max = vec![f64::NEG_INFINITY; x_grid.len()];
    for c in curves {
        for (k, &x) in x_grid.iter().enumerate() {
            let y = c.interpolate(x)?;
            mean[k] += y / n;
            min[k] = min[k].min(y);
            max[k] = max[k].max(y);
        }
    }
    // Keep the mean inside the envelope despite rounding in the sum.
    for k in 0..mean.len() {
        mean[k] = mean[k].clamp(min[k], max[k]);
    }
    Ok(CurveBand {
        mean: CurveSeries::new(
            x_grid.iter().copied().zip(mean).collect(),
            first.kind,
            first.direction,
        )?,
        min,
        max,
    })
}
