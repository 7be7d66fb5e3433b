use std::path::PathBuf;

use zzb_core::experiment::{parse_config, Preset};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_parse() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(c.output.is_some(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn figure_configs_match_presets() {
    for p in Preset::ALL {
        let c = parse_config(&configs_dir().join(format!("{}.toml", p.name()))).unwrap();
        assert_eq!(c.preset, Some(p));
        let mut bare = zzb_core::experiment::ExperimentConfig::load(None, Some(p)).unwrap();
        bare.output = c.output.clone();
        assert_eq!(c, bare);
    }
}
