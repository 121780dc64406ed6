use std::path::Path;

use nusid::harness::{preset, ExperimentConfig};

#[test]
fn shipped_configs_match_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["e1", "e2", "e3"] {
        let file = ExperimentConfig::load(dir.join(format!("{name}.json"))).unwrap();
        let built = preset(name).unwrap();
        assert_eq!(file, built, "{name}");
        assert_eq!(file.hash(), built.hash());
        file.validate().unwrap();
    }
}
