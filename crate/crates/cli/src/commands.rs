use std::fs;
use std::path::Path;
use std::time::Instant;

use acoustend::analysis::{
    centroid_distances, classify as classify_one, cohort_dissipation_ratio, dataset_features,
    dataset_intensities, leave_one_specimen_out, loading_correlations, specimen_curves, train,
    transducer_band, ClassifierModel, LabelledFeatures, Prediction, FEATURE_NAMES,
};
use acoustend::dsp::{build_spectral_map, measure};
use acoustend::io::{
    emit_svg, read_dataset, write_csv, write_dataset, Config, PlotSeries, PlotSpec,
};
use acoustend::mechanics::Direction;
use acoustend::phantom::{apply_load, DamageKind};
use acoustend::solver::{sensitivity_decomposition, PressureField};
use acoustend::synthlab::{
    directivity, directivity_at_range, generate_dataset, half_power_beamwidth,
    transducer_intensity, transducer_response, Dataset, WATER_SOUND_SPEED,
};
use acoustend::{Error, Result};

/// Largest heat-map side drawn as individual cells.
const MAX_MAP_CELLS: usize = 120;

fn num(v: f64) -> String {
    format!("{v}")
}

fn write_svg(path: &Path, spec: &PlotSpec) -> Result<()> {
    fs::write(path, emit_svg(spec)?)?;
    Ok(())
}

/// Block-maximum downsampling of a field magnitude map, top row first.
fn field_map(field: &PressureField) -> Vec<Vec<f64>> {
    let g = &field.grid;
    let block = g.nx.max(g.ny).div_ceil(MAX_MAP_CELLS).max(1);
    let (cols, rows) = (g.nx.div_ceil(block), g.ny.div_ceil(block));
    (0..rows)
        .rev()
        .map(|r| {
            (0..cols)
                .map(|c| {
                    let mut m: f64 = 0.0;
                    for j in r * block..((r + 1) * block).min(g.ny) {
                        for i in c * block..((c + 1) * block).min(g.nx) {
                            m = m.max(field.at(i, j).norm());
                        }
                    }
                    m
                })
                .collect()
        })
        .collect()
}

pub fn simulate(config: &Config, out: &Path, force: f64) -> Result<()> {
    let p = &config.phantom;
    let geom = p.geometry()?;
    let calibration = p.calibration()?;
    let (deformed, stiffened, state) = apply_load(&geom, &p.tendon, force, &calibration)?;
    let decomposition =
        sensitivity_decomposition(&geom, &p.muscle, &p.tendon, &state, &config.solver)?;
    let (field, loaded) = config.solver.run(&deformed, &p.muscle, &stiffened)?;

    let magnitude_deltas = decomposition.magnitude_deltas();
    let rows: Vec<Vec<String>> = decomposition
        .baseline
        .iter()
        .zip(&loaded)
        .zip(&magnitude_deltas)
        .map(|((b, l), d)| {
            let dominant = if d[0].abs() >= d[1].abs() {
                "geometry"
            } else {
                "stiffness"
            };
            vec![
                num(b.angle_deg),
                num(b.magnitude()),
                num(b.phase()),
                num(l.magnitude()),
                num(l.phase()),
                num(l.magnitude() / b.magnitude() - 1.0),
                num(d[0]),
                num(d[1]),
                num(d[2]),
                dominant.to_string(),
            ]
        })
        .collect();
    write_csv(
        out.join("receivers.csv"),
        &[
            "angle_deg",
            "unloaded_magnitude",
            "unloaded_phase_rad",
            "loaded_magnitude",
            "loaded_phase_rad",
            "relative_change",
            "geometry_only_delta",
            "stiffness_only_delta",
            "combined_delta",
            "dominant",
        ],
        &rows,
    )?;
    write_svg(
        &out.join("field.svg"),
        &PlotSpec::HeatMap {
            title: format!("|p| at {force} N, {} kHz", config.solver.frequency_hz / 1e3),
            x_label: "x".into(),
            y_label: "y".into(),
            values: field_map(&field),
        },
    )?;
    println!(
        "solved {} unknowns, relative residual {:.2e}",
        field.report.unknowns, field.report.relative_residual
    );
    for row in &rows {
        println!(
            "receiver {:>5} deg: change {:>+.4} %, {}",
            row[0],
            100.0 * row[5].parse::<f64>().unwrap_or(0.0),
            row[9]
        );
    }
    Ok(())
}

pub fn characterize(config: &Config, out: &Path) -> Result<()> {
    let model = &config.synth.transducer;
    let response: Vec<Vec<String>> = (0..=500)
        .map(|k| {
            let f = 20e3 + 100.0 * k as f64;
            Ok(vec![
                num(f),
                num(transducer_response(model, f)?),
                num(transducer_intensity(model, f)?),
            ])
        })
        .collect::<Result<_>>()?;
    write_csv(
        out.join("frequency_response.csv"),
        &["frequency_hz", "gain", "intensity_mw_cm2"],
        &response,
    )?;

    let ranges = [0.015, 0.07];
    let mut directivity_rows = Vec::new();
    let mut series: Vec<PlotSeries> = ["far field", "1.5 cm", "7 cm"]
        .iter()
        .map(|name| PlotSeries {
            name: name.to_string(),
            points: Vec::new(),
            band: None,
        })
        .collect();
    for deg in -90..=90 {
        let theta = f64::from(deg);
        let values = [
            directivity(model, theta, WATER_SOUND_SPEED)?,
            directivity_at_range(model, theta, ranges[0], WATER_SOUND_SPEED)?,
            directivity_at_range(model, theta, ranges[1], WATER_SOUND_SPEED)?,
        ];
        for (s, v) in series.iter_mut().zip(values) {
            s.points.push((theta, v));
        }
        directivity_rows.push(std::iter::once(num(theta)).chain(values.map(num)).collect());
    }
    write_csv(
        out.join("directivity.csv"),
        &["angle_deg", "far_field", "range_1.5cm", "range_7cm"],
        &directivity_rows,
    )?;
    write_svg(
        &out.join("frequency_response.svg"),
        &PlotSpec::Curves {
            title: "Transducer frequency response".into(),
            x_label: "frequency (Hz)".into(),
            y_label: "intensity (mW/cm²)".into(),
            series: vec![PlotSeries {
                name: "intensity".into(),
                points: response
                    .iter()
                    .map(|r| (r[0].parse().unwrap_or(0.0), r[2].parse().unwrap_or(0.0)))
                    .collect(),
                band: None,
            }],
        },
    )?;
    write_svg(
        &out.join("directivity.svg"),
        &PlotSpec::Curves {
            title: "Transducer directivity in water".into(),
            x_label: "angle (deg)".into(),
            y_label: "relative pressure".into(),
            series,
        },
    )?;
    let (lo, hi) = model.half_power_band();
    println!("half-power band {:.2}-{:.2} kHz", lo / 1e3, hi / 1e3);
    println!(
        "far-field half-power half-beamwidth {:.1} deg",
        half_power_beamwidth(model, WATER_SOUND_SPEED)?
    );
    Ok(())
}

pub fn synth(config: &Config, out: &Path, noise_free: bool) -> Result<()> {
    let mut synth = config.synth.clone();
    if noise_free {
        synth.noise_snr_db = None;
    }
    let p = &config.phantom;
    let scenarios = synth.default_cohort(&p.geometry()?, p.muscle, p.tendon)?;
    let start = Instant::now();
    let (dataset, report) =
        generate_dataset(&scenarios, &synth, &config.solver, &p.calibration()?)?;
    let generated = start.elapsed();
    write_dataset(&dataset, out)?;
    println!(
        "{} specimens, {} records, {} solver calls, generated in {:.1} s",
        dataset.specimens.len(),
        report.records,
        report.solver_calls,
        generated.as_secs_f64()
    );
    println!("dataset written to {}", out.display());
    Ok(())
}

fn channel_header(first: &[&str], channels: usize, prefix: &str) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain((1..=channels).map(|k| format!("{prefix}{k}")))
        .collect()
}

fn features(config: &Config, dataset: &Dataset) -> Result<Vec<LabelledFeatures>> {
    dataset_features(dataset, &config.analysis, config.dsp.band_hz)
}

fn feature_rows(features: &[LabelledFeatures]) -> Vec<Vec<String>> {
    features
        .iter()
        .map(|f| {
            [f.specimen_id.clone(), f.label.code().to_string()]
                .into_iter()
                .chain(f.features.to_array().map(num))
                .collect()
        })
        .collect()
}

fn feature_header() -> Vec<&'static str> {
    ["specimen_id", "condition"]
        .into_iter()
        .chain(FEATURE_NAMES)
        .collect()
}

pub fn analyze(
    config: &Config,
    out: &Path,
    dataset_dir: &Path,
    specimen: Option<&str>,
    cycle: usize,
) -> Result<()> {
    let dataset = read_dataset(dataset_dir)?;
    let band = config.dsp.band_hz;
    let intensities = dataset_intensities(&dataset, band)?;
    let channels = intensities.first().map_or(0, Vec::len);

    let header = channel_header(
        &[
            "specimen_id",
            "condition",
            "cycle",
            "step",
            "direction",
            "deformation_mm",
            "force_n",
        ],
        channels,
        "ch",
    );
    let rows: Vec<Vec<String>> = dataset
        .records
        .iter()
        .zip(&intensities)
        .map(|(r, ints)| {
            [
                r.specimen_id.clone(),
                r.condition.code().to_string(),
                r.cycle.to_string(),
                r.step.to_string(),
                r.direction.code().to_string(),
                num(r.deformation),
                num(r.force),
            ]
            .into_iter()
            .chain(ints.iter().copied().map(num))
            .collect()
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(out.join("intensities.csv"), &header_refs, &rows)?;

    let features = features(config, &dataset)?;
    write_csv(
        out.join("features.csv"),
        &feature_header(),
        &feature_rows(&features),
    )?;

    let selected: Vec<_> = match specimen {
        Some("all") => dataset.specimens.iter().collect(),
        Some(id) => vec![dataset
            .specimens
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::Config(format!("no specimen {id} in the dataset")))?],
        None => dataset.specimens.iter().take(1).collect(),
    };
    let maps_dir = out.join("spectral_maps");
    let curves_dir = out.join("curves");
    fs::create_dir_all(&maps_dir)?;
    fs::create_dir_all(&curves_dir)?;
    for info in selected {
        let records: Vec<_> = dataset
            .records_for(&info.id)
            .filter(|r| r.cycle == cycle && r.direction == Direction::Loading)
            .collect();
        if records.is_empty() {
            return Err(Error::Config(format!(
                "specimen {} has no cycle {cycle}",
                info.id
            )));
        }
        for ch in 0..channels {
            let envelopes = records
                .iter()
                .map(|r| Ok((r.deformation, measure(&r.traces[ch], band)?)))
                .collect::<Result<Vec<_>>>()?;
            let map = build_spectral_map(&envelopes)?;
            let header: Vec<String> = std::iter::once("deformation_mm".to_string())
                .chain(map.col_labels.iter().map(|t| format!("{t:.9}")))
                .collect();
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<String>> = map
                .row_labels
                .iter()
                .zip(&map.matrix)
                .map(|(d, row)| {
                    std::iter::once(num(*d))
                        .chain(row.iter().copied().map(num))
                        .collect()
                })
                .collect();
            let stem = format!("{}_cycle{cycle}_ch{}", info.id, ch + 1);
            write_csv(maps_dir.join(format!("{stem}.csv")), &header_refs, &rows)?;
            // Column blocks keep the drawing small; the CSV has every sample.
            let block = map.col_labels.len().div_ceil(250).max(1);
            let values = map
                .matrix
                .iter()
                .rev()
                .map(|row| {
                    row.chunks(block)
                        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                        .collect()
                })
                .collect();
            write_svg(
                &maps_dir.join(format!("{stem}.svg")),
                &PlotSpec::HeatMap {
                    title: format!("{} channel {} cycle {cycle}", info.id, ch + 1),
                    x_label: "time".into(),
                    y_label: "deformation (bottom 0 mm)".into(),
                    values,
                },
            )?;
        }
        let curves = specimen_curves(&dataset, &intensities, info)?;
        let c = curves
            .iter()
            .find(|c| c.cycle == cycle)
            .ok_or_else(|| Error::Config(format!("specimen {} has no cycle {cycle}", info.id)))?;
        let mut series = Vec::new();
        for (name, pick) in [("loading", 0), ("unloading", 1)] {
            let members: Vec<_> = c
                .acoustic
                .iter()
                .map(|(l, u)| if pick == 0 { l.clone() } else { u.clone() })
                .collect();
            let band = transducer_band(&members)?;
            let grid: Vec<f64> = band.mean.xs().collect();
            series.push(PlotSeries {
                name: format!("{name} (mean, min-max over channels)"),
                points: band.mean.points().to_vec(),
                band: Some(
                    grid.iter()
                        .zip(band.min.iter().zip(&band.max))
                        .map(|(&x, (&lo, &hi))| (x, lo, hi))
                        .collect(),
                ),
            });
        }
        write_svg(
            &curves_dir.join(format!("{}_cycle{cycle}.svg", info.id)),
            &PlotSpec::Curves {
                title: format!("{} stress-acoustic curve, cycle {cycle}", info.id),
                x_label: "stress (MPa)".into(),
                y_label: "normalised intensity".into(),
                series,
            },
        )?;
    }
    println!(
        "{} records analysed; features of {} specimens written to {}",
        dataset.records.len(),
        features.len(),
        out.display()
    );
    Ok(())
}

fn confusion_outputs(out: &Path, confusion: &[[usize; 4]; 4]) -> Result<()> {
    let rows: Vec<Vec<String>> = DamageKind::ALL
        .iter()
        .zip(confusion)
        .map(|(k, row)| {
            std::iter::once(k.code().to_string())
                .chain(row.iter().map(|n| n.to_string()))
                .collect()
        })
        .collect();
    let header: Vec<&str> = std::iter::once("truth\\predicted")
        .chain(DamageKind::ALL.iter().map(|k| k.code()))
        .collect();
    write_csv(out.join("confusion.csv"), &header, &rows)?;
    write_svg(
        &out.join("confusion.svg"),
        &PlotSpec::HeatMap {
            title: "Confusion matrix (rows: truth H, LC, TC, MT)".into(),
            x_label: "predicted H, LC, TC, MT".into(),
            y_label: "truth".into(),
            values: confusion
                .iter()
                .map(|r| r.iter().map(|&n| n as f64).collect())
                .collect(),
        },
    )
}

fn prediction_rows(predictions: &[Prediction]) -> Vec<Vec<String>> {
    predictions
        .iter()
        .map(|p| {
            [
                p.specimen_id.clone(),
                p.truth.code().to_string(),
                p.predicted.code().to_string(),
            ]
            .into_iter()
            .chain(p.distances.map(num))
            .collect()
        })
        .collect()
}

const PREDICTION_HEADER: [&str; 7] = [
    "specimen_id",
    "truth",
    "predicted",
    "distance_H",
    "distance_LC",
    "distance_TC",
    "distance_MT",
];

pub fn classify(
    config: &Config,
    out: &Path,
    dataset_dir: &Path,
    model_path: Option<&Path>,
) -> Result<()> {
    let dataset = read_dataset(dataset_dir)?;
    let features = features(config, &dataset)?;
    let (predictions, confusion, accuracy) = match model_path {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
            let model: ClassifierModel = serde_json::from_str(&text)?;
            model.validate()?;
            let mut confusion = [[0usize; 4]; 4];
            let predictions = features
                .iter()
                .map(|f| {
                    let c = classify_one(&model, &f.features)?;
                    confusion[f.label.index()][c.label.index()] += 1;
                    Ok(Prediction {
                        specimen_id: f.specimen_id.clone(),
                        truth: f.label,
                        predicted: c.label,
                        distances: c.distances,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let correct = predictions
                .iter()
                .filter(|p| p.truth == p.predicted)
                .count();
            let accuracy = correct as f64 / predictions.len().max(1) as f64;
            (predictions, confusion, accuracy)
        }
        None => {
            let cv = leave_one_specimen_out(&features)?;
            let examples: Vec<_> = features.iter().map(|f| (f.features, f.label)).collect();
            let model = train(&examples)?;
            fs::write(
                out.join("model.json"),
                serde_json::to_string_pretty(&model)? + "\n",
            )?;
            (cv.predictions, cv.confusion, cv.accuracy)
        }
    };
    write_csv(
        out.join("predictions.csv"),
        &PREDICTION_HEADER,
        &prediction_rows(&predictions),
    )?;
    confusion_outputs(out, &confusion)?;
    let mode = if model_path.is_some() {
        "saved model"
    } else {
        "leave-one-specimen-out"
    };
    println!(
        "{mode} accuracy {:.3} over {} specimens",
        accuracy,
        predictions.len()
    );
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

pub fn report(config: &Config, out: &Path, dataset_dir: &Path) -> Result<()> {
    let dataset = read_dataset(dataset_dir)?;
    let intensities = dataset_intensities(&dataset, config.dsp.band_hz)?;
    let ratio = cohort_dissipation_ratio(&dataset)?;

    let correlations = loading_correlations(&dataset, &intensities, DamageKind::Healthy)?;
    let channels = intensities.first().map_or(0, Vec::len);
    let header = channel_header(&["specimen_id", "cycle"], channels, "rho_ch");
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = correlations
        .iter()
        .map(|c| {
            [c.specimen_id.clone(), c.cycle.to_string()]
                .into_iter()
                .chain(c.per_receiver.iter().copied().map(num))
                .collect()
        })
        .collect();
    write_csv(out.join("healthy_correlations.csv"), &header_refs, &rows)?;
    let per_channel: Vec<serde_json::Value> = (0..channels)
        .map(|ch| {
            let v: Vec<f64> = correlations.iter().map(|c| c.per_receiver[ch]).collect();
            serde_json::json!({
                "channel": ch + 1,
                "min": v.iter().copied().fold(f64::INFINITY, f64::min),
                "median": median(v),
            })
        })
        .collect();

    let features = features(config, &dataset)?;
    write_csv(
        out.join("features.csv"),
        &feature_header(),
        &feature_rows(&features),
    )?;
    let mut class_rows = Vec::new();
    let mut class_means = serde_json::Map::new();
    for kind in DamageKind::ALL {
        let members: Vec<[f64; 4]> = features
            .iter()
            .filter(|f| f.label == kind)
            .map(|f| f.features.to_array())
            .collect();
        if members.is_empty() {
            continue;
        }
        let mean: [f64; 4] = std::array::from_fn(|k| {
            members.iter().map(|m| m[k]).sum::<f64>() / members.len() as f64
        });
        class_rows.push(
            [kind.code().to_string(), members.len().to_string()]
                .into_iter()
                .chain(mean.map(num))
                .collect::<Vec<_>>(),
        );
        class_means.insert(kind.code().into(), serde_json::json!(mean));
    }
    let class_header: Vec<&str> = ["condition", "specimens"]
        .into_iter()
        .chain(FEATURE_NAMES)
        .collect();
    write_csv(out.join("class_features.csv"), &class_header, &class_rows)?;
    for (k, name) in FEATURE_NAMES.iter().enumerate() {
        write_svg(
            &out.join(format!("class_{name}.svg")),
            &PlotSpec::Bars {
                title: format!("Class mean {name}"),
                y_label: name.to_string(),
                bars: class_rows
                    .iter()
                    .map(|r| (r[0].clone(), r[2 + k].parse().unwrap_or(f64::NAN)))
                    .collect(),
            },
        )?;
    }

    let classification = match leave_one_specimen_out(&features) {
        Ok(cv) => {
            let examples: Vec<_> = features.iter().map(|f| (f.features, f.label)).collect();
            let distances: Vec<serde_json::Value> = centroid_distances(&train(&examples)?)
                .into_iter()
                .map(|(a, b, d)| serde_json::json!({ "pair": format!("{}-{}", a.code(), b.code()), "distance": d }))
                .collect();
            confusion_outputs(out, &cv.confusion)?;
            println!("leave-one-specimen-out accuracy {:.3}", cv.accuracy);
            serde_json::json!({ "accuracy": cv.accuracy, "confusion": cv.confusion, "centroid_distances": distances })
        }
        // Small datasets may lack two specimens per class.
        Err(e) if matches!(e.root(), Error::Training(_)) => {
            serde_json::json!({ "skipped": e.to_string() })
        }
        Err(e) => return Err(e),
    };

    let summary = serde_json::json!({
        "specimens": dataset.specimens.len(),
        "records": dataset.records.len(),
        "master_seed": dataset.master_seed,
        "dissipation_ratio_damaged_over_healthy": ratio,
        "healthy_loading_spearman": per_channel,
        "class_feature_means": class_means,
        "classification": classification,
    });
    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    println!("damaged/healthy dissipated-energy ratio {ratio:.4}");
    println!("report written to {}", out.join("report.json").display());
    Ok(())
}
