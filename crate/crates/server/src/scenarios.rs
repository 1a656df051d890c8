use std::path::{Path, PathBuf};
use std::sync::Arc;

use shine_core::scenario::{compile, parse_scenario, CompileError, CompiledScenario};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedScenario {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ScenarioLoad {
    pub loaded: Vec<Arc<CompiledScenario>>,
    pub skipped: Vec<SkippedScenario>,
}

/// Compiles every `*.json` file in `dir`, in file name order. Files that
/// fail to parse or validate, and later duplicates of a scenario id, are
/// skipped with a reason.
pub fn load_scenario_dir(dir: &Path) -> std::io::Result<ScenarioLoad> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut out = ScenarioLoad::default();
    for path in paths {
        let skip = |reason: String| SkippedScenario { path: path.clone(), reason };
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) => {
                out.skipped.push(skip(e.to_string()));
                continue;
            }
        };
        let compiled = parse_scenario(&bytes).map_err(|e| e.to_string()).and_then(|spec| {
            compile(spec).map_err(|CompileError::Invalid(report)| report.render())
        });
        match compiled {
            Ok(c) if out.loaded.iter().any(|l| l.id() == c.id()) => {
                out.skipped.push(skip(format!("duplicate scenario id `{}`", c.id())));
            }
            Ok(c) => out.loaded.push(Arc::new(c)),
            Err(reason) => out.skipped.push(skip(reason)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_dir_loads_everything() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
        let load = load_scenario_dir(&dir).unwrap();
        assert!(load.skipped.is_empty(), "{:?}", load.skipped);
        assert!(load.loaded.iter().any(|c| c.id() == "heater-window"));
    }

    #[test]
    fn invalid_and_duplicate_files_are_skipped() {
        let tmp = tempfile::tempdir().unwrap();
        let good = std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/minimal.scenario.json")).unwrap();
        std::fs::write(tmp.path().join("a.json"), &good).unwrap();
        std::fs::write(tmp.path().join("b.json"), &good).unwrap();
        std::fs::write(tmp.path().join("c.json"), b"{").unwrap();
        std::fs::write(tmp.path().join("notes.txt"), b"ignored").unwrap();
        let load = load_scenario_dir(tmp.path()).unwrap();
        assert_eq!(load.loaded.len(), 1);
        assert_eq!(load.skipped.len(), 2);
        assert!(load.skipped[0].reason.contains("duplicate"));
        assert!(load_scenario_dir(&tmp.path().join("missing")).is_err());
    }
}
