use std::path::Path;
use std::process::Command as Process;

use embml::config::{parse_config, CubeFormat, ExperimentSpec};
use embml::cube::{
    ingest_cube, read_binary, read_csv, synthetic_cube, write_binary, write_csv, write_cube,
    DataCube,
};
use embml::curve_csv::{read_curve, write_curve};
use embml::detectors::DetectorKind;
use embml::window::{sliding_window_run, WindowPlan};
use embml::{DetectorId, Harness, ScenarioConfig};
use num_complex::Complex64;
use proptest::prelude::*;

fn kinds() -> impl Strategy<Value = Vec<DetectorKind>> {
    proptest::sample::subsequence(DetectorKind::ALL.to_vec(), 1..=6)
}

fn grid(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(lo..hi, 1..6)
}

prop_compose! {
    fn specs()(
        n in 2usize..12,
        extra in 0usize..20,
        rho in 0.0f64..0.99,
        cnr in -10.0f64..120.0,
        seed in any::<u64>(),
        phase in -3.0f64..3.0,
        detectors in kinds(),
        l_max in proptest::collection::vec(1u32..12, 1..4),
        pfa in 1e-4f64..0.4,
        scnr in grid(-20.0, 40.0),
        cnr_grid in grid(0.0, 120.0),
        rho_grid in grid(0.0, 0.99),
        cos in grid(0.0, 1.0),
        detection in 1usize..5000,
        workers in 0usize..8,
    ) -> ExperimentSpec {
        let mut spec = ExperimentSpec {
            scenario: ScenarioConfig { n, k: n + extra, rho, cnr_db: cnr, master_seed: seed, target_phase: phase, ..ScenarioConfig::default() },
            detectors,
            l_max,
            pfa,
            ..ExperimentSpec::default()
        };
        spec.grids.scnr_db = scnr;
        spec.grids.cnr_db = cnr_grid;
        spec.grids.rho = rho_grid;
        spec.grids.cos_sq_phi = cos;
        spec.trials.detection = detection;
        spec.workers = workers;
        spec
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn config_round_trip(spec in specs()) {
        prop_assert!(spec.validate().is_ok());
        let text = spec.to_toml().unwrap();
        let again = parse_config(&text).unwrap();
        prop_assert_eq!(&again, &spec);
        prop_assert_eq!(again.to_toml().unwrap(), text);
    }

    #[test]
    fn cube_formats_agree(pulses in 1usize..12, bins in 1usize..9, seed in any::<u64>()) {
        let cfg = ScenarioConfig { master_seed: seed, ..ScenarioConfig::default() };
        let cube = synthetic_cube(&cfg, pulses, bins).unwrap();
        let (mut bin, mut text) = (Vec::new(), Vec::new());
        write_binary(&cube, &mut bin).unwrap();
        write_csv(&cube, &mut text).unwrap();
        let a = read_binary(&bin[..], "x").unwrap();
        let b = read_csv(&text[..], "x").unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.as_slice(), cube.as_slice());
    }
}

fn small_contour() -> embml::CurveResult {
    let h = Harness::new(1).unwrap();
    let dets = [
        DetectorId::Amf,
        DetectorId::Glrt,
        DetectorId::EmBml { l_max: 5 },
    ];
    let cal = h
        .calibrate(&ScenarioConfig::default(), &dets, &[0.1], 1_000)
        .unwrap();
    h.mismatch_contour(&cal, 0.1, &[0.0, 10.0, 20.0], &[0.25, 0.5, 1.0], 200)
        .unwrap()
}

#[test]
fn contour_csv_rows_are_lexicographic_and_stable() {
    let curve = small_contour();
    let mut a = Vec::new();
    write_curve(&curve, &mut a).unwrap();
    let text = String::from_utf8(a.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "cos_sq_phi,scnr_db,GLRT_rate,GLRT_ci,AMF_rate,AMF_ci,EM_BML_D5_rate,EM_BML_D5_ci"
    );
    let keys: Vec<(f64, f64)> = lines
        .map(|l| {
            let mut f = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    assert_eq!(keys.len(), 9);
    assert!(keys.windows(2).all(|w| w[0] < w[1]), "{keys:?}");

    let mut b = Vec::new();
    write_curve(&small_contour(), &mut b).unwrap();
    assert_eq!(a, b);
    let back = read_curve(&a[..], 200).unwrap();
    assert_eq!(back, curve);
}

#[test]
fn synthetic_cube_window_pfa_matches_harness() {
    let mut spec = ExperimentSpec {
        pfa: 1e-2,
        detectors: vec![DetectorKind::Glrt, DetectorKind::Amf, DetectorKind::EmBmlD],
        ..ExperimentSpec::default()
    };
    spec.ingest.calibration_bin = 8;
    spec.ingest.evaluation_bin = 25;
    let plan = WindowPlan::from_spec(&spec);
    let pulses = 8 + 3 * 12_499;
    assert_eq!(plan.window_count(pulses), 12_500);
    let cube = synthetic_cube(&spec.scenario, pulses, 34).unwrap();
    let h = Harness::new(0).unwrap();
    let run = sliding_window_run(&cube, &spec, &h).unwrap();
    assert_eq!(run.trials, 12_500);
    assert_eq!(run.curve.points, vec![vec![f64::NEG_INFINITY]]);

    let cal = h
        .calibrate(&spec.scenario, &run.detectors, &[spec.pfa], 12_500)
        .unwrap();
    let fresh = h
        .cfar_sweep(
            &cal,
            spec.pfa,
            &[spec.scenario.cnr_db],
            &[spec.scenario.rho],
            12_500,
        )
        .unwrap();
    // Overlapping windows and a threshold estimated from the same count of
    // trials: allow the spread of two estimated thresholds.
    let p = spec.pfa;
    let sigma = (p * (1.0 - p) * 4.0 / 12_500.0).sqrt();
    for (j, d) in run.detectors.iter().enumerate() {
        let w = run.curve.estimates[0][j].rate;
        let s = fresh.estimate(0, *d).unwrap().rate;
        assert!((w - p).abs() <= 3.0 * sigma, "{d} window Pfa {w}");
        assert!(
            (w - s).abs() <= 3.0 * sigma,
            "{d}: window {w} vs synthetic {s}"
        );
    }
}

#[test]
fn injected_targets_raise_window_pd() {
    let mut spec = ExperimentSpec {
        pfa: 1e-2,
        detectors: vec![DetectorKind::Amf, DetectorKind::Benchmark],
        ..ExperimentSpec::default()
    };
    spec.grids.scnr_db = vec![0.0, 10.0, 20.0];
    spec.ingest.inject_targets = true;
    spec.ingest.calibration_bin = 8;
    spec.ingest.evaluation_bin = 25;
    let cube = synthetic_cube(&spec.scenario, 8 + 3 * 9_999, 34).unwrap();
    let run = sliding_window_run(&cube, &spec, &Harness::new(0).unwrap()).unwrap();
    assert_eq!(run.detectors, vec![DetectorId::Amf]);
    let pd = run.curve.rates(DetectorId::Amf);
    assert_eq!(pd.len(), 4);
    assert!(pd.windows(2).all(|w| w[1] >= w[0]), "{pd:?}");
    assert!(pd[3] > 0.9);
}

#[test]
fn window_run_rejects_short_cubes() {
    let spec = ExperimentSpec::default();
    let cube = DataCube::zeros(100, 76);
    assert!(matches!(
        sliding_window_run(&cube, &spec, &Harness::new(1).unwrap()),
        Err(embml::Error::InsufficientTrials { .. })
    ));
    let cube = DataCube::zeros(100_000, 40);
    assert!(matches!(
        sliding_window_run(&cube, &spec, &Harness::new(1).unwrap()),
        Err(embml::Error::InsufficientData(_))
    ));
}

#[test]
fn cube_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = (0..12)
        .map(|i| Complex64::new(i as f64 * 0.1, -1.0 / (i as f64 + 1.0)))
        .collect();
    let cube = DataCube::new(4, 3, data, "").unwrap();
    for (name, format) in [
        ("c.bin", CubeFormat::InterleavedBinary),
        ("c.csv", CubeFormat::Csv),
    ] {
        let path = dir.path().join(name);
        write_cube(&cube, &path, format).unwrap();
        let back = ingest_cube(&path, format).unwrap();
        assert_eq!(back.label, name);
        assert_eq!(back.as_slice(), cube.as_slice());
    }
    assert!(matches!(
        ingest_cube(
            &dir.path().join("missing.bin"),
            CubeFormat::InterleavedBinary
        ),
        Err(embml::Error::Io(_))
    ));
}

fn embml(args: &[&str], dir: &Path) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_embml"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "pfa = [").unwrap();
    std::fs::write(d.join("zero.toml"), "pfa = 0.0\n").unwrap();
    assert_eq!(
        embml(&["calibrate", "--config", "bad.toml"], d)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        embml(&["calibrate", "--config", "zero.toml"], d)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        embml(&["calibrate", "--config", "absent.toml"], d)
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        embml(
            &["calibrate", "--pfa", "0.1", "--calibration-trials", "999"],
            d
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        embml(&["ingest-run", "--cube", "absent.bin"], d)
            .status
            .code(),
        Some(3)
    );
    std::fs::write(d.join("junk.bin"), [1u8, 2, 3]).unwrap();
    assert_eq!(
        embml(&["ingest-run", "--cube", "junk.bin"], d)
            .status
            .code(),
        Some(3)
    );

    let out = embml(
        &[
            "calibrate",
            "--pfa",
            "0.1",
            "--calibration-trials",
            "1000",
            "--detectors",
            "AMF,EM_BML_D",
            "--l-max",
            "5,7",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "detector,pfa,threshold");
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("EM_BML_D7,0.1,"));
}

#[test]
fn cli_generate_then_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = embml(
        &[
            "generate-cube",
            "--pulses",
            "30005",
            "--bins",
            "34",
            "--seed",
            "7",
            "--out",
            "cube.bin",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::write(
        d.join("run.toml"),
        "command = \"ingest-run\"\npfa = 0.01\ndetectors = [\"GLRT\", \"AMF\"]\n\
         [ingest]\npath = \"cube.bin\"\ncalibration_bin = 8\nevaluation_bin = 25\n",
    )
    .unwrap();
    let out = embml(
        &["ingest-run", "--config", "run.toml", "--out", "pfa.csv"],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let curve = read_curve(std::fs::File::open(d.join("pfa.csv")).unwrap(), 10_000).unwrap();
    assert_eq!(curve.detectors, vec![DetectorId::Glrt, DetectorId::Amf]);
    for r in &curve.estimates[0] {
        assert!((r.rate - 0.01).abs() < 0.005, "{}", r.rate);
    }
    assert!(String::from_utf8_lossy(&out.stderr).contains("10000 windows"));
}

#[test]
fn cli_pd_curve_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "pd-curve",
        "--pfa",
        "0.1",
        "--calibration-trials",
        "1000",
        "--trials",
        "300",
        "--detectors",
        "GLRT,Benchmark",
        "--scnr-grid",
        "-5,5,15",
        "--seed",
        "11",
        "--workers",
        "2",
    ];
    let out = embml(&args, dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let from_cli = read_curve(&out.stdout[..], 300).unwrap();

    let cfg = ScenarioConfig {
        master_seed: 11,
        ..ScenarioConfig::default()
    };
    let h = Harness::new(1).unwrap();
    let cal = h
        .calibrate(
            &cfg,
            &[DetectorId::Glrt, DetectorId::Benchmark],
            &[0.1],
            1_000,
        )
        .unwrap();
    let lib = h.pd_curve(&cal, 0.1, &[-5.0, 5.0, 15.0], 300).unwrap();
    assert_eq!(from_cli, lib);
}
