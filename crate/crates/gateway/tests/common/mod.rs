#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use geobehave::cohort::SynthSpec;
use geobehave_gateway::config::PipelineConfig;
use geobehave_gateway::pipeline;
use serde_json::Value;

/// Run synth through train once per test binary and hand out the config.
pub fn trained(spec: SynthSpec) -> PipelineConfig {
    let dir = tempfile::tempdir().unwrap().keep();
    run_pipeline(&spec, &dir)
}

pub fn run_pipeline(spec: &SynthSpec, dir: &Path) -> PipelineConfig {
    pipeline::synth(spec, dir).unwrap();
    let cfg = PipelineConfig::load(&dir.join(pipeline::SYNTH_CONFIG)).unwrap();
    pipeline::extract(&cfg).unwrap();
    pipeline::dataset(&cfg).unwrap();
    pipeline::train(&cfg).unwrap();
    cfg
}

pub fn default_cohort() -> &'static PipelineConfig {
    static CFG: OnceLock<PipelineConfig> = OnceLock::new();
    CFG.get_or_init(|| trained(SynthSpec::default()))
}

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

/// Validate `doc` against one of the published schemas.
pub fn assert_schema(name: &str, doc: &Value) {
    let text = std::fs::read_to_string(schema_dir().join(name)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

pub fn schema_accepts(name: &str, doc: &Value) -> bool {
    let text = std::fs::read_to_string(schema_dir().join(name)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&schema).unwrap().is_valid(doc)
}
