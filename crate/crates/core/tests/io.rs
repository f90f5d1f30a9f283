use std::fs;
use std::path::Path;

use acoustend::io::{
    emit_svg, read_dataset, read_manifest, record_path, write_dataset, Config, DatasetManifest,
    PlotSeries, PlotSpec, MANIFEST_FILE, SCHEMA_VERSION,
};
use acoustend::phantom::PhantomConfig;
use acoustend::solver::SolverConfig;
use acoustend::synthlab::{generate_dataset, Dataset, SynthConfig};
use acoustend::Error;

/// Four specimens, one cycle, on a coarse grid.
fn small_dataset() -> Dataset {
    let phantom = PhantomConfig::default();
    let synth = SynthConfig {
        healthy_specimens: 1,
        damaged_per_kind: 1,
        cycles: 1,
        seed: 3,
        ..SynthConfig::default()
    };
    let solver = SolverConfig {
        spacing_m: 0.7e-3,
        ..SolverConfig::default()
    };
    let scenarios = synth
        .default_cohort(&phantom.geometry().unwrap(), phantom.muscle, phantom.tendon)
        .unwrap();
    generate_dataset(&scenarios, &synth, &solver, &phantom.calibration().unwrap())
        .unwrap()
        .0
}

fn write_manifest(dir: &Path, m: &DatasetManifest) {
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(m).unwrap(),
    )
    .unwrap();
}

#[test]
fn dataset_round_trips_bit_for_bit() {
    let ds = small_dataset();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&ds, dir.path()).unwrap();
    assert_eq!(manifest.records.len(), 4 * 14);
    assert_eq!(manifest.schema_version, SCHEMA_VERSION);
    let back = read_dataset(dir.path()).unwrap();
    assert_eq!(back, ds);
    for (a, b) in back.records.iter().zip(&ds.records) {
        for (ta, tb) in a.traces.iter().zip(&b.traces) {
            let bits = |t: &[f64]| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&ta.samples), bits(&tb.samples));
        }
    }

    let first = fs::read_to_string(dir.path().join(record_path("H-01", 0, 0))).unwrap();
    assert!(first.starts_with("time_s,ch1,ch2,ch3,ch4,ch5,ch6,ch7\n"));
    assert!(!first.contains('\r'));

    // Rewriting gives the same bytes.
    let again = tempfile::tempdir().unwrap();
    write_dataset(&back, again.path()).unwrap();
    assert_eq!(
        fs::read(dir.path().join(MANIFEST_FILE)).unwrap(),
        fs::read(again.path().join(MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn tampering_is_reported_by_kind() {
    let ds = small_dataset();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&ds, dir.path()).unwrap();
    let target = dir.path().join(&manifest.records[5].path);

    let original = fs::read_to_string(&target).unwrap();
    fs::write(&target, original.replacen("0.0", "1.0", 1)).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(Error::Checksum(p)) if p == target));

    fs::remove_file(&target).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(Error::MissingFile(p)) if p == target));
    fs::write(&target, original).unwrap();
    read_dataset(dir.path()).unwrap();

    let mut newer = manifest.clone();
    newer.schema_version = SCHEMA_VERSION + 1;
    write_manifest(dir.path(), &newer);
    assert!(matches!(
        read_manifest(dir.path()),
        Err(Error::SchemaVersion { found, expected }) if found == SCHEMA_VERSION + 1 && expected == SCHEMA_VERSION
    ));

    fs::remove_file(dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(matches!(
        read_dataset(dir.path()),
        Err(Error::MissingFile(_))
    ));
}

#[test]
fn empty_dataset_has_a_valid_manifest() {
    let ds = Dataset {
        master_seed: 9,
        config: serde_json::json!({}),
        specimens: Vec::new(),
        records: Vec::new(),
    };
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&ds, dir.path()).unwrap();
    assert!(manifest.records.is_empty());
    assert_eq!(read_dataset(dir.path()).unwrap(), ds);
}

#[test]
fn manifest_rules() {
    let ds = small_dataset();
    let dir = tempfile::tempdir().unwrap();
    let good = write_dataset(&ds, dir.path()).unwrap();

    let mut m = good.clone();
    m.specimens[0].x_mm = 9.9;
    m.specimens[0].y_mm = 12.8;
    m.specimens[0].area_mm2 = 99.4752;
    m.validate().unwrap();
    m.specimens[0].area_mm2 = 99.53;
    assert!(matches!(m.validate(), Err(Error::Manifest(_))));

    let mut m = good.clone();
    m.records[3].force_n = 60.5;
    assert!(matches!(m.validate(), Err(Error::Manifest(_))));
    m.records[3].force_n = 60.0;
    m.validate().unwrap();

    let mut m = good.clone();
    m.specimens[0].cycles = 7;
    assert!(matches!(m.validate(), Err(Error::Manifest(_))));

    let mut m = good.clone();
    m.records.pop();
    assert!(matches!(m.validate(), Err(Error::Manifest(_))));

    // Rules hold when reading too.
    let mut m = good;
    m.records[0].force_n = 75.0;
    write_manifest(dir.path(), &m);
    assert!(matches!(read_dataset(dir.path()), Err(Error::Manifest(_))));
}

fn count(svg: &str, tag: &str) -> usize {
    svg.matches(&format!("<{tag} ")).count()
}

#[test]
fn heat_map_has_one_rect_per_cell_and_axes() {
    let spec = PlotSpec::HeatMap {
        title: "map".into(),
        x_label: "time".into(),
        y_label: "deformation".into(),
        values: vec![vec![0.0, 1.0], vec![0.5, 0.25]],
    };
    let svg = emit_svg(&spec).unwrap();
    assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
    assert!(svg.ends_with("</svg>\n"));
    assert_eq!(count(&svg, "rect"), 4);
    assert_eq!(count(&svg, "line"), 2);
    assert_eq!(svg, emit_svg(&spec).unwrap());
}

#[test]
fn band_draws_polygon_and_polyline() {
    let spec = PlotSpec::Curves {
        title: "curves <a & b>".into(),
        x_label: "stress".into(),
        y_label: "intensity".into(),
        series: vec![PlotSeries {
            name: "mean".into(),
            points: vec![(0.0, 1.0), (1.0, 1.1), (2.0, 1.3)],
            band: Some(vec![(0.0, 0.9, 1.1), (1.0, 1.0, 1.2), (2.0, 1.2, 1.4)]),
        }],
    };
    let svg = emit_svg(&spec).unwrap();
    assert_eq!(count(&svg, "polygon"), 1);
    assert_eq!(count(&svg, "polyline"), 1);
    assert!(svg.contains("curves &lt;a &amp; b&gt;"));
}

#[test]
fn bad_data_is_refused() {
    let series = |name: &str, y: f64| PlotSeries {
        name: name.into(),
        points: vec![(0.0, 0.0), (1.0, y)],
        band: None,
    };
    let spec = PlotSpec::Curves {
        title: String::new(),
        x_label: String::new(),
        y_label: String::new(),
        series: vec![series("ok", 1.0), series("broken", f64::NAN)],
    };
    assert!(matches!(emit_svg(&spec), Err(Error::Render(names)) if names == ["broken"]));

    let nan_map = PlotSpec::HeatMap {
        title: String::new(),
        x_label: String::new(),
        y_label: String::new(),
        values: vec![vec![1.0], vec![f64::NAN]],
    };
    assert!(matches!(emit_svg(&nan_map), Err(Error::Render(rows)) if rows == ["row 1"]));

    let empty = PlotSpec::Bars {
        title: String::new(),
        y_label: String::new(),
        bars: Vec::new(),
    };
    assert!(matches!(emit_svg(&empty), Err(Error::Domain(_))));
}

#[test]
fn shipped_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let shipped = Config::load(&path).unwrap();
    assert_eq!(shipped, Config::default());
    assert_eq!(
        fs::read_to_string(&path).unwrap(),
        Config::default().to_json()
    );
}

#[test]
fn partial_config_takes_defaults() {
    let c = Config::from_json(r#"{"synth": {"seed": 11, "noise_snr_db": null}}"#).unwrap();
    assert_eq!(c.synth.seed, 11);
    assert_eq!(c.synth.noise_snr_db, None);
    assert_eq!(c.solver, SolverConfig::default());
    assert!(matches!(
        Config::from_json(r#"{"analysis": {"feature_receiver": 7}}"#),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        Config::load(Path::new("/nonexistent/config.json")),
        Err(Error::MissingFile(_))
    ));
}
