use std::path::Path;

use fa_lab::config::load;
use fa_lab::deep::DeepConfig;
use fa_lab::linear::LinearConfig;
use fa_lab::shallow::{OdeCmdConfig, PLearnCmdConfig, TeacherStudentConfig};
use fa_lab::sweeps::{AlphaBetaConfig, CorruptionConfig};

fn check(path: &Path) -> Result<(), String> {
    let stem = path.file_stem().unwrap().to_string_lossy();
    let r = if stem.starts_with("ode_") {
        load::<OdeCmdConfig>(path).and_then(|c| c.validate())
    } else if stem.starts_with("teacher_student") {
        load::<TeacherStudentConfig>(path).and_then(|c| c.validate())
    } else if stem.starts_with("plearn") {
        load::<PLearnCmdConfig>(path).map(|_| ())
    } else if stem.starts_with("linear") {
        load::<LinearConfig>(path).and_then(|c| c.validate())
    } else if stem.starts_with("deep_") {
        load::<DeepConfig>(path).and_then(|c| c.validate())
    } else if stem.starts_with("alphabeta") {
        load::<AlphaBetaConfig>(path).and_then(|c| c.validate())
    } else if stem.starts_with("corruption") {
        load::<CorruptionConfig>(path).and_then(|c| c.validate())
    } else {
        return Err(format!("{}: no command for this file name", path.display()));
    };
    r.map_err(|e| e.to_string())
}

#[test]
fn shipped_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for dir in ["desk", "long"] {
        for entry in std::fs::read_dir(root.join(dir)).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                check(&path).unwrap();
                seen += 1;
            }
        }
    }
    assert!(seen >= 15, "{seen}");
}
