use super::*;
use crate::oracle::exact_min_peak_aoi;
use crate::tensor::Tensor;
use crate::trainer::{BaselineKind, TrainConfig};
use crate::world::ScenarioConfig;

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("aoiuav-harness-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn empty_config_is_all_defaults() {
    let cfg = parse_config("# nothing here\n\n").unwrap();
    assert_eq!(cfg, RunConfig::default());
}

#[test]
fn format_then_parse_is_identity() {
    let mut cfg = parse_config(&fs::read_to_string(repo_file("presets/tiny.cfg")).unwrap()).unwrap();
    cfg.train.lr = 1.0 / 3.0;
    cfg.scenario.channel.ref_snr = 1e8;
    cfg.train.critic_widths = vec![7, 5, 3];
    let text = format_config(&cfg);
    assert_eq!(parse_config(&text).unwrap(), cfg);
    assert_eq!(format_config(&parse_config(&text).unwrap()), text);
}

#[test]
fn layout_section_round_trips() {
    let text = "[scenario]\nn_uavs = 1\nn_iots = 2\nobs_k_nearest = 2\n[layout]\nUAV 0 0\nIOT 5 0\nIOT -5 0.5\nLBD 0 0 0\n";
    let cfg = parse_config(text).unwrap();
    let layout = cfg.scenario.layout.clone().unwrap();
    assert_eq!(layout.iots, vec![[5.0, 0.0], [-5.0, 0.5]]);
    assert_eq!(parse_config(&format_config(&cfg)).unwrap(), cfg);
}

#[test]
fn unknown_or_malformed_keys_are_errors() {
    let e = parse_config("[scenario]\nspeed = 5\n").unwrap_err();
    assert_eq!((e.line, e.key.as_str()), (2, "speed"));
    assert_eq!(parse_config("[physics]\n").unwrap_err().key, "physics");
    assert_eq!(parse_config("[train]\nlr = fast\n").unwrap_err().key, "lr");
    assert_eq!(parse_config("[train]\nlr = 1\nlr = 2\n").unwrap_err().key, "lr");
    assert_eq!(parse_config("[scenario]\nn_uavs 4\n").unwrap_err().line, 2);
    assert_eq!(parse_config("[layout]\nROVER 1 2\n").unwrap_err().line, 2);
    assert!(parse_config("[scenario]\nhorizon_T = nan\n").is_err());
}

#[test]
fn aoi_norm_follows_horizon_unless_given() {
    let cfg = parse_config("horizon_T = 80\n").unwrap();
    assert_eq!(cfg.scenario.aoi_norm, 80.0);
    let cfg = parse_config("horizon_T = 80\naoi_norm = 10\n").unwrap();
    assert_eq!(cfg.scenario.aoi_norm, 10.0);
}

#[test]
fn presets_match_the_builtin_scenarios() {
    let tiny = load_config(&repo_file("presets/tiny.cfg")).unwrap();
    assert_eq!(tiny.scenario, ScenarioConfig::tiny());
    assert_eq!(tiny.run.seed, 7);
    assert_eq!(tiny.train.episodes, 300);
    let canonical = load_config(&repo_file("presets/canonical.cfg")).unwrap();
    assert_eq!(canonical.scenario, ScenarioConfig::default());
    let ring = load_config(&repo_file("presets/ring10.cfg")).unwrap();
    assert_eq!(ring.scenario, ScenarioConfig::ring_of_lbds());
    assert_eq!(canonical.train.lr, TrainConfig::default().lr);
}

#[test]
fn set_key_qualified_and_bare() {
    let mut cfg = RunConfig::default();
    set_key(&mut cfg, "laser.conversion_eta_le", "0.25").unwrap();
    set_key(&mut cfg, "epochs", "2").unwrap();
    assert_eq!(cfg.scenario.laser.conversion_eta, 0.25);
    assert_eq!(cfg.train.epochs, 2);
    assert!(set_key(&mut cfg, "nope", "1").is_err());
    assert_eq!(config_keys().len(), format_config(&cfg).lines().filter(|l| l.contains(" = ")).count());
}

#[test]
fn bundled_instances_have_the_hand_traced_optima() {
    let adj = load_instance(&repo_file("instances/adjacent_iot.txt")).unwrap();
    assert_eq!(exact_min_peak_aoi(&adj).unwrap().optimum, 1);
    let sym = load_instance(&repo_file("instances/two_iot_symmetric.txt")).unwrap();
    let r = exact_min_peak_aoi(&sym).unwrap();
    assert_eq!(r.optimum, 3);
    assert_eq!(crate::oracle::replay_verify(&sym, &r.witness).unwrap(), 3);
}

#[test]
fn oversized_instance_maps_to_exit_5() {
    let text = "[scenario]\nn_uavs = 2\nn_iots = 1\nobs_k_nearest = 1\nhorizon_T = 8\n\
[layout]\nUAV 0 0\nUAV 5 0\nIOT 5 5\nLBD 0 0 0\n";
    let e = parse_instance(text).unwrap_err();
    assert_eq!(e.exit_code(), 5);
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let cfg = RunConfig {
        scenario: ScenarioConfig::tiny(),
        train: TrainConfig {
            hidden: 6,
            head_hidden: 5,
            critic_widths: vec![7],
            ..TrainConfig::default()
        },
        ..RunConfig::default()
    };
    let bundle = cfg.train.init_bundle(&cfg.scenario, 3);
    let bytes = save_bundle(&bundle);
    assert_eq!(&bytes[..8], b"AOIUAV1\0");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
    let mut other = cfg.train.init_bundle(&cfg.scenario, 99);
    load_bundle(&mut other, &bytes).unwrap();
    assert_eq!(save_bundle(&other), bytes);
    assert_eq!(other.tensors(), bundle.tensors());
    assert_eq!(other.old_actors[0].tensors(), bundle.actors[0].tensors());
}

#[test]
fn checkpoint_layout_matches_hand_encoding() {
    let t = Tensor::new(&[2], vec![1.5, -2.0]).unwrap();
    let bytes = encode_tensors([("w", &t)]);
    let mut expected = b"AOIUAV1\0".to_vec();
    for v in [1u32, 1, 1] {
        expected.extend_from_slice(&v.to_le_bytes());
    }
    expected.push(b'w');
    for v in [1u32, 2] {
        expected.extend_from_slice(&v.to_le_bytes());
    }
    expected.extend_from_slice(&1.5f64.to_le_bytes());
    expected.extend_from_slice(&(-2.0f64).to_le_bytes());
    let crc = crc32fast::hash(&expected);
    expected.extend_from_slice(&crc.to_le_bytes());
    assert_eq!(bytes, expected);
    assert_eq!(decode_tensors(&bytes).unwrap(), vec![("w".to_string(), t)]);
}

#[test]
fn checkpoint_corruption_is_detected() {
    let t = Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap();
    let bytes = encode_tensors([("a", &t)]);
    for i in 0..bytes.len() {
        let mut bad = bytes.clone();
        bad[i] ^= 0x10;
        let e = decode_tensors(&bad).unwrap_err();
        assert!(e.is_corruption(), "byte {i}: {e:?}");
    }
    assert_eq!(decode_tensors(&bytes[..bytes.len() - 1]).unwrap_err().is_corruption(), true);
    let mut v2 = bytes[..bytes.len() - 4].to_vec();
    v2[8] = 2;
    let crc = crc32fast::hash(&v2);
    v2.extend_from_slice(&crc.to_le_bytes());
    assert_eq!(decode_tensors(&v2).unwrap_err(), CheckpointError::Version(2));
}

#[test]
fn checkpoint_for_another_network_is_a_mismatch() {
    let scn = ScenarioConfig::tiny();
    let small = TrainConfig {
        hidden: 4,
        ..TrainConfig::default()
    };
    let bytes = save_bundle(&small.init_bundle(&scn, 0));
    let mut big = TrainConfig::default().init_bundle(&scn, 0);
    let e = load_bundle(&mut big, &bytes).unwrap_err();
    assert!(matches!(e, CheckpointError::Mismatch(_)));
    assert!(!e.is_corruption());
}

fn small_run() -> RunConfig {
    let mut cfg = parse_config(&fs::read_to_string(repo_file("presets/tiny.cfg")).unwrap()).unwrap();
    cfg.scenario.horizon = 12;
    cfg.scenario.aoi_norm = 12.0;
    cfg.train = TrainConfig {
        episodes: 5,
        episodes_per_update: 2,
        eval_interval: 2,
        hidden: 6,
        head_hidden: 6,
        critic_widths: vec![8],
        ..TrainConfig::default()
    };
    cfg.run.write_events = true;
    cfg
}

#[test]
fn training_run_writes_the_directory_layout() {
    let dir = scratch("layout");
    let cfg = small_run();
    run_training(&cfg, &dir, 0).unwrap();
    let metrics = fs::read_to_string(dir.join(METRICS_FILE)).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], METRICS_CSV_HEADER);
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1,"));
    for ep in [2, 4, 5] {
        assert!(checkpoint_path(&dir, ep).exists(), "checkpoint {ep}");
    }
    let events = fs::read_to_string(dir.join(EVENTS_DIR).join("ep_3.csv")).unwrap();
    assert!(events.starts_with(EVENT_CSV_HEADER));
    let manifest = fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(parse_config(&manifest).unwrap(), cfg);
    let bundle = read_checkpoint(&checkpoint_path(&dir, 5), &cfg).unwrap();
    assert_eq!(bundle.names().len(), bundle.tensors().len());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn same_manifest_and_seed_give_identical_bytes() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    let cfg = small_run();
    run_training(&cfg, &a, 1).unwrap();
    let reloaded = parse_config(&fs::read_to_string(a.join(MANIFEST_FILE)).unwrap()).unwrap();
    run_training(&reloaded, &b, 2).unwrap();
    for f in [METRICS_FILE, "checkpoints/ep_4.ckpt", "events/ep_5.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    fs::remove_dir_all(&a).unwrap();
    fs::remove_dir_all(&b).unwrap();
}

#[test]
fn sweep_rows_are_sorted_and_well_formed() {
    let mut cfg = small_run();
    cfg.run.eval_episodes = 2;
    let rows = run_sweep(&cfg, SweepParam::EtaLe, &[0.25, 0.05, 0.15], SweepMode::Eval(BaselineKind::Greedy)).unwrap();
    let values: Vec<f64> = rows.iter().map(|r| r.param_value).collect();
    assert_eq!(values, vec![0.05, 0.15, 0.25]);
    let mut out = Vec::new();
    write_sweep_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(text.lines().next().unwrap(), SWEEP_CSV_HEADER);
    assert!(text.lines().nth(1).unwrap().starts_with("0.05,"));
}

#[test]
fn sweep_rejects_bad_values() {
    let cfg = small_run();
    assert!(SweepParam::parse("speed").is_none());
    let e = run_sweep(&cfg, SweepParam::NUavs, &[1.5], SweepMode::Eval(BaselineKind::Random)).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let e = run_sweep(&cfg, SweepParam::EtaLe, &[1.5], SweepMode::Eval(BaselineKind::Random)).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let rows = run_sweep(&cfg, SweepParam::NIots, &[3.0], SweepMode::Eval(BaselineKind::Random)).unwrap();
    assert_eq!(rows.len(), 1);
}

#[test]
fn missing_config_reports_the_path() {
    let e = load_config(Path::new("/definitely/not/here.cfg")).unwrap_err();
    assert!(e.to_string().contains("/definitely/not/here.cfg"));
    assert_eq!(e.exit_code(), 2);
}
