//! Builds the sample-corpus artifacts once per test binary.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use pantry_core::pipeline::{run_pipeline, PipelineConfig};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Directory holding artifacts from the default config. Lives until the
/// test process exits.
pub fn sample_artifacts() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap().keep();
        let mut cfg = PipelineConfig::from_file(&repo_root().join("config/pipeline.toml")).unwrap();
        cfg.output_dir = tmp.join("artifacts");
        run_pipeline(&cfg).unwrap();
        cfg.output_dir
    })
}
