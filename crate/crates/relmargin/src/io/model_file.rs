//! Versioned on-disk format for fitted models and affine chains.
//!
//! Files are TOML with a top-level `version` key checked before anything
//! else, so format bumps fail with a clear error instead of a field soup.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::AffineNode;
use crate::error::{Error, Result};
use crate::solver::DualModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    model: DualModel,
}

#[derive(Serialize, Deserialize)]
struct ChainFile {
    version: u32,
    nodes: Vec<AffineNode>,
}

fn check_version(text: &str) -> Result<()> {
    let value: toml::Value =
        toml::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    let got = value
        .get("version")
        .and_then(toml::Value::as_integer)
        .ok_or_else(|| Error::Parse("model file lacks a version key".into()))?;
    if got != i64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            got: got.try_into().unwrap_or(0),
        });
    }
    Ok(())
}

pub fn save_model(model: &DualModel, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile { version: FORMAT_VERSION, model: model.clone() };
    let text = toml::to_string_pretty(&file)
        .map_err(|e| Error::Parse(format!("serialize model: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses model-file text: version gate first, then the full decode.
pub fn model_from_str(text: &str) -> Result<DualModel> {
    check_version(text)?;
    let file: ModelFile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    Ok(file.model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DualModel> {
    let text = std::fs::read_to_string(path)?;
    model_from_str(&text)
}

/// Saves the affine stages of a preprocessing chain. Only affine nodes are
/// representable on disk; differentiable closures cannot be serialized.
pub fn save_chain(nodes: &[AffineNode], path: impl AsRef<Path>) -> Result<()> {
    let file = ChainFile { version: FORMAT_VERSION, nodes: nodes.to_vec() };
    let text = toml::to_string_pretty(&file)
        .map_err(|e| Error::Parse(format!("serialize chain: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses chain-file text; every decoded node is re-validated.
pub fn chain_from_str(text: &str) -> Result<Vec<AffineNode>> {
    check_version(text)?;
    let file: ChainFile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("chain file: {e}")))?;
    for node in &file.nodes {
        node.validate()?;
    }
    Ok(file.nodes)
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<Vec<AffineNode>> {
    let text = std::fs::read_to_string(path)?;
    chain_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Matrix;
    use crate::kernel::KernelSpec;
    use crate::rng::Stream;
    use crate::solver::fit_brmm;
    use crate::types::{Dataset, HyperParams, Sample};

    fn small_model() -> DualModel {
        let mut rng = Stream::new(42);
        let samples: Vec<Sample> = (0..30)
            .map(|i| {
                let label = if i % 2 == 0 { 1 } else { -1 };
                let features = vec![
                    f64::from(label) + 0.4 * rng.normal(),
                    f64::from(label) - 0.3 * rng.normal(),
                ];
                Sample::new(features, label)
            })
            .collect();
        let data = Dataset::new(samples).unwrap();
        let hp = HyperParams { c: 1.0, r: 3.0, ..Default::default() };
        fit_brmm(&data, &hp, KernelSpec::Rbf { sigma: 1.5 }).unwrap()
    }

    #[test]
    fn saved_model_reproduces_decision_scores() {
        let model = small_model();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_model(&model, f.path()).unwrap();
        let back = load_model(f.path()).unwrap();
        let mut rng = Stream::new(43);
        for _ in 0..100 {
            let x = vec![rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)];
            let before = model.decision_score(&x).unwrap();
            let after = back.decision_score(&x).unwrap();
            assert!((before - after).abs() <= 1e-12 * (1.0 + before.abs()));
        }
    }

    #[test]
    fn version_gate_rejects_other_versions() {
        let model = small_model();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_model(&model, f.path()).unwrap();
        let bumped = std::fs::read_to_string(f.path())
            .unwrap()
            .replacen("version = 1", "version = 2", 1);
        std::fs::write(f.path(), bumped).unwrap();
        match load_model(f.path()) {
            Err(Error::VersionMismatch { expected: 1, got: 2 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn garbage_and_missing_files_error_cleanly() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "not = [toml\n").unwrap();
        assert!(matches!(load_model(f.path()), Err(Error::Parse(_))));
        std::fs::write(f.path(), "answer = 42\n").unwrap();
        assert!(matches!(load_model(f.path()), Err(Error::Parse(_))));
        assert!(matches!(
            load_model("/nonexistent/model.toml"),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn chain_files_round_trip() {
        let nodes = vec![
            AffineNode::standardization(&[0.5, -1.0], &[2.0, 4.0]).unwrap(),
            AffineNode::new(
                crate::chain::AffineNodeKind::SpatialFilter,
                Matrix::new(1, 2, vec![3.0, -1.5]).unwrap(),
                vec![0.25],
            )
            .unwrap(),
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        save_chain(&nodes, f.path()).unwrap();
        let back = load_chain(f.path()).unwrap();
        assert_eq!(nodes, back);
    }
}
