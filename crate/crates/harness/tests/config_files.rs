use thermsr::{Error, ExperimentConfig, Preset};

fn config_error(text: &str) -> (usize, String, String) {
    match ExperimentConfig::parse_str(text) {
        Err(Error::Config { line, key, message }) => (line, key, message),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn empty_file_gives_published_defaults() {
    let cfg = ExperimentConfig::parse_str("").unwrap();
    assert_eq!(cfg, ExperimentConfig::preset(Preset::Paper));
    assert_eq!(cfg.model.scale, 4);
    assert_eq!(cfg.loss.lambda, 0.03);
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let cfg = ExperimentConfig::parse_str("# header\n\npreset = tiny   # small\nloss.lambda = 0.1\n").unwrap();
    assert_eq!(cfg.preset, Preset::Tiny);
    assert_eq!(cfg.loss.lambda, 0.1);
}

#[test]
fn unsupported_scale_names_its_line() {
    let (line, key, message) = config_error("preset = tiny\nmodel.scale = 3\n");
    assert_eq!(line, 2);
    assert!(key.starts_with("model"), "{key}");
    assert!(message.contains('3'), "{message}");
}

#[test]
fn out_of_range_lambda_names_its_line() {
    let (line, key, _) = config_error("\n\nloss.lambda = 1.5\n");
    assert_eq!(line, 3);
    assert!(key.starts_with("loss"), "{key}");
}

#[test]
fn unknown_and_duplicate_keys_are_rejected() {
    let (line, key, message) = config_error("model.scale = 4\nmodel.sclae = 8\n");
    assert_eq!((line, key.as_str(), message.as_str()), (2, "model.sclae", "unknown key"));
    let (line, _, message) = config_error("loss.lambda = 0.1\nloss.lambda = 0.2\n");
    assert_eq!(line, 2);
    assert!(message.contains("line 1"), "{message}");
}

#[test]
fn error_display_is_one_line_led_by_its_kind() {
    let err = ExperimentConfig::parse_str("model.scale = 3").unwrap_err();
    let shown = err.to_string();
    assert!(shown.starts_with("config: line 1: "), "{shown}");
    assert!(!shown.contains('\n'));
}

#[test]
fn echo_round_trips_every_preset() {
    for p in [Preset::Paper, Preset::Desk, Preset::Tiny] {
        let cfg = ExperimentConfig::preset(p);
        assert_eq!(ExperimentConfig::parse_str(&cfg.echo()).unwrap(), cfg);
    }
}

#[test]
fn hash_ignores_run_extent_only() {
    let base = ExperimentConfig::preset(Preset::Tiny);
    let mut longer = base.clone();
    longer.train.max_steps = 400;
    longer.out_dir = "elsewhere".into();
    assert_eq!(base.hash(), longer.hash());
    let mut other = base.clone();
    other.loss.lambda = 0.1;
    assert_ne!(base.hash(), other.hash());
}
