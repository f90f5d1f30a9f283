//! Stress-acoustic curves, damage features and a nearest-centroid damage
//! classifier with leave-one-specimen-out validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsp::{mean_intensity, measure};
use crate::error::{Error, Result};
use crate::mechanics::{
    auc, average_curves, relative_dissipated_energy, CurveBand, CurveKind, CurveSeries, Direction,
};
use crate::phantom::DamageKind;
use crate::synthlab::{Dataset, ExperimentRecord, SpecimenInfo};

/// Points of the shared stress grid used to compare curves.
const COMPARISON_POINTS: usize = 64;

pub const FEATURE_NAMES: [&str; 4] = [
    "mech_hysteresis",
    "acoustic_auc_reldiff",
    "stress_acoustic_curvature",
    "highstress_divergence",
];

/// Analysis block of the JSON configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Receiver whose curves feed the features; `None` averages all of them.
    pub feature_receiver: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            feature_receiver: Some(3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mech_hysteresis: f64,
    pub acoustic_auc_reldiff: f64,
    pub stress_acoustic_curvature: f64,
    pub highstress_divergence: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; 4] {
        [
            self.mech_hysteresis,
            self.acoustic_auc_reldiff,
            self.stress_acoustic_curvature,
            self.highstress_divergence,
        ]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        FeatureVector {
            mech_hysteresis: a[0],
            acoustic_auc_reldiff: a[1],
            stress_acoustic_curvature: a[2],
            highstress_divergence: a[3],
        }
    }

    fn check(self) -> Result<Self> {
        if self.to_array().iter().all(|v| v.is_finite()) {
            Ok(self)
        } else {
            Err(Error::Feature(format!(
                "non-finite feature vector {self:?}"
            )))
        }
    }
}

/// Mean intensity of the band-passed envelope of every trace of a record.
pub fn record_intensities(record: &ExperimentRecord, band: (f64, f64)) -> Result<Vec<f64>> {
    record
        .traces
        .iter()
        .map(|t| Ok(mean_intensity(&measure(t, band)?)))
        .collect()
}

/// Stress-acoustic curve from the intensities of one specimen, cycle and
/// direction. Each entry is `(deformation mm, force N, intensity)`; the
/// intensity is normalised by the zero-deformation entry and stress is
/// reported in MPa.
pub fn stress_acoustic_curve(
    points: &[(f64, f64, f64)],
    area_mm2: f64,
    direction: Direction,
) -> Result<CurveSeries> {
    if !(area_mm2 > 0.0) {
        return Err(Error::domain("cross-section area must be > 0"));
    }
    let base = points
        .iter()
        .find(|p| p.0 == 0.0)
        .ok_or_else(|| Error::domain("no zero-load record to normalise by"))?
        .2;
    if !(base > 0.0) {
        return Err(Error::domain("zero-load intensity must be > 0"));
    }
    let mut xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.1 / area_mm2, p.2 / base))
        .collect();
    xy.sort_by(|a, b| a.0.total_cmp(&b.0));
    if xy.len() == 1 {
        // A lone baseline is still a valid (degenerate) curve for display.
        xy.push((xy[0].0 + f64::EPSILON.max(xy[0].0.abs() * 1e-12), xy[0].1));
    }
    CurveSeries::new(xy, CurveKind::StressAcoustic, direction)
}

/// Mean of per-receiver curves on their shared stress range.
pub fn transducer_band(curves: &[CurveSeries]) -> Result<CurveBand> {
    if curves.is_empty() {
        return Err(Error::domain("no curves to combine"));
    }
    let lo = curves
        .iter()
        .map(|c| c.x_range().0)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = curves
        .iter()
        .map(|c| c.x_range().1)
        .fold(f64::INFINITY, f64::min);
    if !(hi > lo) {
        return Err(Error::domain("curves share no stress range"));
    }
    average_curves(curves, &linspace(lo, hi, COMPARISON_POINTS))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Least-squares `y = a x² + b x + c`; returns `(a, b, c)`.
pub fn quadratic_fit(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Feature(
            "quadratic fit needs at least 3 points".into(),
        ));
    }
    // Centre and scale x so the normal equations stay well conditioned.
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let sx = points.iter().map(|p| (p.0 - mx).abs()).fold(0.0, f64::max);
    if !(sx > 0.0) {
        return Err(Error::Feature(
            "quadratic fit needs distinct x values".into(),
        ));
    }
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for &(x, y) in points {
        let t = (x - mx) / sx;
        let basis = [t * t, t, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            r[i] += basis[i] * y;
        }
    }
    let [p, q, c] = solve3(m, r).ok_or_else(|| Error::Feature("singular quadratic fit".into()))?;
    // Back to the original x.
    let a = p / (sx * sx);
    let b = q / sx - 2.0 * a * mx;
    let c0 = c - q * mx / sx + p * mx * mx / (sx * sx);
    Ok((a, b, c0))
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    let scale = m.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot);
        r.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (r[row] - s) / m[row][row];
    }
    Some(x)
}

/// Features of one loading/unloading cycle.
pub fn extract_features(
    loading: &CurveSeries,
    unloading: &CurveSeries,
    mech_loading: &CurveSeries,
    mech_unloading: &CurveSeries,
) -> Result<FeatureVector> {
    let mech_hysteresis = relative_dissipated_energy(mech_loading, mech_unloading)?;

    let (l0, l1) = loading.x_range();
    let (u0, u1) = unloading.x_range();
    let (lo, hi) = (l0.max(u0), l1.min(u1));
    if !(hi > lo) {
        return Err(Error::Feature(
            "loading and unloading curves share no stress range".into(),
        ));
    }
    let grid = linspace(lo, hi, COMPARISON_POINTS);
    let yl = grid
        .iter()
        .map(|&x| loading.interpolate(x))
        .collect::<Result<Vec<_>>>()?;
    let yu = grid
        .iter()
        .map(|&x| unloading.interpolate(x))
        .collect::<Result<Vec<_>>>()?;
    let on_grid = |ys: &[f64], d| {
        CurveSeries::new(
            grid.iter().copied().zip(ys.iter().copied()).collect(),
            CurveKind::StressAcoustic,
            d,
        )
    };
    // Areas above the zero-load level, so the specimen's overall
    // sensitivity cancels in the ratio.
    let rise = |ys: &[f64]| ys.iter().map(|y| y - 1.0).collect::<Vec<_>>();
    let auc_l = auc(&on_grid(&rise(&yl), Direction::Loading)?)?;
    let auc_u = auc(&on_grid(&rise(&yu), Direction::Unloading)?)?;
    if auc_l == 0.0 {
        return Err(Error::Feature(
            "loading stress-acoustic curve never leaves its baseline".into(),
        ));
    }
    let acoustic_auc_reldiff = (auc_l - auc_u).abs() / auc_l.abs();

    let (ymin, ymax) = loading
        .ys()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
            (lo.min(y), hi.max(y))
        });
    let y_range = ymax - ymin;
    let cut = lo + 0.75 * (hi - lo);
    let top: Vec<f64> = grid
        .iter()
        .zip(yl.iter().zip(&yu))
        .filter(|(x, _)| **x >= cut)
        .map(|(_, (a, b))| (a - b).abs())
        .collect();
    let highstress_divergence = if y_range > 0.0 {
        top.iter().sum::<f64>() / top.len() as f64 / y_range
    } else {
        0.0
    };

    let (a, _, _) = quadratic_fit(loading.points())?;
    let (x0, x1) = loading.x_range();
    let stress_acoustic_curvature = if y_range > 0.0 {
        a * (x1 - x0).powi(2) / y_range
    } else {
        0.0
    };

    FeatureVector {
        mech_hysteresis,
        acoustic_auc_reldiff,
        stress_acoustic_curvature,
        highstress_divergence,
    }
    .check()
}

/// Intensities of every record, `[record][receiver]`, in dataset order.
pub fn dataset_intensities(dataset: &Dataset, band: (f64, f64)) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    dataset
        .records
        .par_iter()
        .map(|r| record_intensities(r, band))
        .collect()
}

/// Curves of one specimen and cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleCurves {
    pub cycle: usize,
    /// Per receiver: (loading, unloading).
    pub acoustic: Vec<(CurveSeries, CurveSeries)>,
    pub mech_loading: CurveSeries,
    pub mech_unloading: CurveSeries,
}

/// Builds the per-cycle curves of specimen `info` from the dataset and
/// its precomputed intensities.
pub fn specimen_curves(
    dataset: &Dataset,
    intensities: &[Vec<f64>],
    info: &SpecimenInfo,
) -> Result<Vec<CycleCurves>> {
    let area = info.area_mm2;
    let length_mm = info.z_mm;
    let mut by_cycle: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, r) in dataset.records.iter().enumerate() {
        if r.specimen_id == info.id {
            by_cycle.entry(r.cycle).or_default().push(k);
        }
    }
    if by_cycle.is_empty() {
        return Err(Error::domain(format!(
            "no records for specimen {}",
            info.id
        )));
    }
    by_cycle
        .into_iter()
        .map(|(cycle, idx)| {
            let pick = |d: Direction| {
                idx.iter()
                    .copied()
                    .filter(move |&k| dataset.records[k].direction == d)
            };
            let receivers = intensities[idx[0]].len();
            let acoustic = (0..receivers)
                .map(|rx| {
                    let curve = |d| {
                        let pts: Vec<(f64, f64, f64)> = pick(d)
                            .map(|k| {
                                let r = &dataset.records[k];
                                (r.deformation, r.force, intensities[k][rx])
                            })
                            .collect();
                        stress_acoustic_curve(&pts, area, d)
                    };
                    Ok((curve(Direction::Loading)?, curve(Direction::Unloading)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let mech = |d| {
                let pts: Vec<(f64, f64)> = pick(d)
                    .map(|k| {
                        let r = &dataset.records[k];
                        (r.deformation / length_mm, r.force / area)
                    })
                    .collect();
                CurveSeries::new(pts, CurveKind::StressStrain, d)
            };
            Ok(CycleCurves {
                cycle,
                acoustic,
                mech_loading: mech(Direction::Loading)?,
                mech_unloading: mech(Direction::Unloading)?,
            })
        })
        .collect()
}

/// Loading/unloading pair the features are computed from.
fn feature_pair(
    curves: &CycleCurves,
    receiver: Option<usize>,
) -> Result<(CurveSeries, CurveSeries)> {
    match receiver {
        Some(rx) => curves
            .acoustic
            .get(rx)
            .cloned()
            .ok_or_else(|| Error::domain(format!("receiver {rx} not present"))),
        None => {
            let (l, u): (Vec<_>, Vec<_>) = curves.acoustic.iter().cloned().unzip();
            Ok((transducer_band(&l)?.mean, transducer_band(&u)?.mean))
        }
    }
}

/// Per-specimen features averaged over its cycles.
pub fn specimen_features(curves: &[CycleCurves], config: &AnalysisConfig) -> Result<FeatureVector> {
    let mut acc = [0.0; 4];
    for c in curves {
        let (l, u) = feature_pair(c, config.feature_receiver)?;
        let f = extract_features(&l, &u, &c.mech_loading, &c.mech_unloading)?.to_array();
        for (a, v) in acc.iter_mut().zip(f) {
            *a += v / curves.len() as f64;
        }
    }
    FeatureVector::from_array(acc).check()
}

/// Features and labels of every specimen of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledFeatures {
    pub specimen_id: String,
    pub label: DamageKind,
    pub features: FeatureVector,
}

pub fn dataset_features(
    dataset: &Dataset,
    config: &AnalysisConfig,
    band: (f64, f64),
) -> Result<Vec<LabelledFeatures>> {
    let intensities = dataset_intensities(dataset, band)?;
    dataset
        .specimens
        .iter()
        .map(|info| {
            let curves = specimen_curves(dataset, &intensities, info)?;
            Ok(LabelledFeatures {
                specimen_id: info.id.clone(),
                label: info.condition,
                features: specimen_features(&curves, config)
                    .map_err(|e| e.context(format!("specimen {}", info.id)))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

/// Nearest-centroid model in z-scored feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    /// Class code → centroid in standardised units.
    pub centroids: BTreeMap<String, [f64; 4]>,
    /// Feature name → training mean and standard deviation.
    pub standardization: BTreeMap<String, Standardization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: DamageKind,
    /// Distance to each class centroid in the fixed class order.
    pub distances: [f64; 4],
}

impl ClassifierModel {
    pub fn validate(&self) -> Result<()> {
        for kind in DamageKind::ALL {
            if !self.centroids.contains_key(kind.code()) {
                return Err(Error::Training(format!(
                    "model lacks class {}",
                    kind.code()
                )));
            }
        }
        for name in FEATURE_NAMES {
            match self.standardization.get(name) {
                Some(s) if s.std > 0.0 && s.mean.is_finite() => {}
                _ => {
                    return Err(Error::Training(format!(
                        "model lacks a valid scale for {name}"
                    )))
                }
            }
        }
        Ok(())
    }

    fn scales(&self) -> [Standardization; 4] {
        FEATURE_NAMES.map(|n| self.standardization[n])
    }

    pub fn standardize(&self, f: &FeatureVector) -> [f64; 4] {
        let s = self.scales();
        let v = f.to_array();
        std::array::from_fn(|k| (v[k] - s[k].mean) / s[k].std)
    }

    pub fn centroid(&self, kind: DamageKind) -> [f64; 4] {
        self.centroids[kind.code()]
    }
}

fn distance(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn train(examples: &[(FeatureVector, DamageKind)]) -> Result<ClassifierModel> {
    for kind in DamageKind::ALL {
        let n = examples.iter().filter(|(_, l)| *l == kind).count();
        if n < 2 {
            return Err(Error::Training(format!(
                "class {} has {n} training examples, need at least 2",
                kind.code()
            )));
        }
    }
    let n = examples.len() as f64;
    let mut standardization = BTreeMap::new();
    let mut scales = [Standardization {
        mean: 0.0,
        std: 0.0,
    }; 4];
    for (k, name) in FEATURE_NAMES.iter().enumerate() {
        let vals: Vec<f64> = examples.iter().map(|(f, _)| f.to_array()[k]).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::Training(format!(
                "feature {name} has no spread in the training set"
            )));
        }
        scales[k] = Standardization { mean, std };
        standardization.insert(name.to_string(), scales[k]);
    }
    let mut centroids = BTreeMap::new();
    for kind in DamageKind::ALL {
        let members: Vec<[f64; 4]> = examples
            .iter()
            .filter(|(_, l)| *l == kind)
            .map(|(f, _)| {
                let v = f.to_array();
                std::array::from_fn(|k| (v[k] - scales[k].mean) / scales[k].std)
            })
            .collect();
        let m = members.len() as f64;
        let centroid: [f64; 4] =
            std::array::from_fn(|k| members.iter().map(|z| z[k]).sum::<f64>() / m);
        centroids.insert(kind.code().to_string(), centroid);
    }
    Ok(ClassifierModel {
        centroids,
        standardization,
    })
}

/// Nearest centroid; ties go to the earlier class in the fixed order.
pub fn classify(model: &ClassifierModel, f: &FeatureVector) -> Result<Classification> {
    model.validate()?;
    FeatureVector::check(*f)?;
    let z = model.standardize(f);
    let distances = DamageKind::ALL.map(|k| distance(&z, &model.centroid(k)));
    let mut best = 0;
    for k in 1..4 {
        if distances[k] < distances[best] {
            best = k;
        }
    }
    Ok(Classification {
        label: DamageKind::ALL[best],
        distances,
    })
}

/// Standardised distances between every pair of class centroids, in the
/// fixed class order.
pub fn centroid_distances(model: &ClassifierModel) -> Vec<(DamageKind, DamageKind, f64)> {
    let mut out = Vec::new();
    for (i, a) in DamageKind::ALL.iter().enumerate() {
        for b in &DamageKind::ALL[i + 1..] {
            out.push((*a, *b, distance(&model.centroid(*a), &model.centroid(*b))));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub specimen_id: String,
    pub truth: DamageKind,
    pub predicted: DamageKind,
    pub distances: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub predictions: Vec<Prediction>,
    /// `[truth][predicted]` counts in the fixed class order.
    pub confusion: [[usize; 4]; 4],
    pub accuracy: f64,
}

/// Leave-one-specimen-out: each specimen is classified by a model trained
/// on all the others.
pub fn leave_one_specimen_out(features: &[LabelledFeatures]) -> Result<CrossValidation> {
    let mut predictions = Vec::with_capacity(features.len());
    let mut confusion = [[0usize; 4]; 4];
    for (k, held) in features.iter().enumerate() {
        let training: Vec<(FeatureVector, DamageKind)> = features
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, f)| (f.features, f.label))
            .collect();
        let model =
            train(&training).map_err(|e| e.context(format!("holding out {}", held.specimen_id)))?;
        let c = classify(&model, &held.features)?;
        confusion[held.label.index()][c.label.index()] += 1;
        predictions.push(Prediction {
            specimen_id: held.specimen_id.clone(),
            truth: held.label,
            predicted: c.label,
            distances: c.distances,
        });
    }
    let correct = (0..4).map(|k| confusion[k][k]).sum::<usize>();
    let accuracy = if predictions.is_empty() {
        0.0
    } else {
        correct as f64 / predictions.len() as f64
    };
    Ok(CrossValidation {
        predictions,
        confusion,
        accuracy,
    })
}

/// Stress-strain curves of every cycle of a specimen, `(cycle, loading,
/// unloading)`, from the recorded forces and deformations alone.
pub fn mechanical_curves(
    dataset: &Dataset,
    info: &SpecimenInfo,
) -> Result<Vec<(usize, CurveSeries, CurveSeries)>> {
    let mut by_cycle: BTreeMap<usize, [Vec<(f64, f64)>; 2]> = BTreeMap::new();
    for r in dataset.records_for(&info.id) {
        let slot = usize::from(r.direction == Direction::Unloading);
        by_cycle.entry(r.cycle).or_default()[slot]
            .push((r.deformation / info.z_mm, r.force / info.area_mm2));
    }
    by_cycle
        .into_iter()
        .map(|(cycle, [l, u])| {
            Ok((
                cycle,
                CurveSeries::new(l, CurveKind::StressStrain, Direction::Loading)?,
                CurveSeries::new(u, CurveKind::StressStrain, Direction::Unloading)?,
            ))
        })
        .collect()
}

/// Mean relative dissipated energy of damaged specimen-cycles over that of
/// healthy ones.
pub fn cohort_dissipation_ratio(dataset: &Dataset) -> Result<f64> {
    let (mut healthy, mut damaged) = (Vec::new(), Vec::new());
    for info in &dataset.specimens {
        for (_, l, u) in mechanical_curves(dataset, info)? {
            let r = relative_dissipated_energy(&l, &u)?;
            if info.condition == DamageKind::Healthy {
                healthy.push(r);
            } else {
                damaged.push(r);
            }
        }
    }
    if healthy.is_empty() || damaged.is_empty() {
        return Err(Error::domain("need both healthy and damaged specimens"));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(mean(&damaged) / mean(&healthy))
}

/// Force-intensity rank correlation of one loading half-cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingCorrelation {
    pub specimen_id: String,
    pub cycle: usize,
    /// Spearman coefficient per receiver.
    pub per_receiver: Vec<f64>,
}

/// Spearman correlation between force and mean intensity for every
/// loading half-cycle of the specimens in condition `kind`.
pub fn loading_correlations(
    dataset: &Dataset,
    intensities: &[Vec<f64>],
    kind: DamageKind,
) -> Result<Vec<LoadingCorrelation>> {
    let mut groups: BTreeMap<(String, usize), Vec<usize>> = BTreeMap::new();
    for (k, r) in dataset.records.iter().enumerate() {
        if r.condition == kind && r.direction == Direction::Loading {
            groups
                .entry((r.specimen_id.clone(), r.cycle))
                .or_default()
                .push(k);
        }
    }
    groups
        .into_iter()
        .map(|((specimen_id, cycle), idx)| {
            let force: Vec<f64> = idx.iter().map(|&k| dataset.records[k].force).collect();
            let receivers = intensities[idx[0]].len();
            let per_receiver = (0..receivers)
                .map(|rx| {
                    let y: Vec<f64> = idx.iter().map(|&k| intensities[k][rx]).collect();
                    spearman(&force, &y)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LoadingCorrelation {
                specimen_id,
                cycle,
                per_receiver,
            })
        })
        .collect()
}

/// Ranks with ties sharing their average rank (1-based).
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::domain(
            "spearman needs two equal-length series of at least 2 values",
        ));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::domain("spearman is undefined for a constant series"));
    }
    Ok(cov / (vx * vy).sqrt())
}
