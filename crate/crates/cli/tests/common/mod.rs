#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use jsonschema::{Retrieve, Uri};
use serde_json::Value;

pub struct Run {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl Run {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.stdout).expect("stdout is JSON")
    }
}

pub fn mislogit(args: &[&str]) -> Run {
    mislogit_env(args, &[])
}

pub fn mislogit_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mislogit"));
    cmd.args(args).env_remove("MISLOGIT_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schema")
}

/// Serves sibling schema files by name.
struct LocalSchemas;

impl Retrieve for LocalSchemas {
    fn retrieve(&self, uri: &Uri<String>) -> Result<Value, Box<dyn std::error::Error + Send + Sync>> {
        let name = uri.path().as_str().rsplit('/').next().unwrap_or_default().to_string();
        let text = std::fs::read_to_string(schema_dir().join(&name))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Panics with every violation when `value` does not match `schema/<name>.json`.
pub fn assert_schema(name: &str, value: &Value) {
    let text = std::fs::read_to_string(schema_dir().join(format!("{name}.json"))).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::options()
        .with_base_uri("file:///mislogit/schema/")
        .with_retriever(LocalSchemas)
        .build(&schema)
        .unwrap_or_else(|e| panic!("schema {name} does not compile: {e}"));
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name} schema violations:\n{}", errors.join("\n"));
}

pub fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// Simulates `n` rows from `theta` with the binary itself.
pub fn simulated(dir: &Path, name: &str, theta: &str, n: usize, seed: u64) -> String {
    let p = dir.join(name).to_string_lossy().into_owned();
    let r = mislogit(&["simulate", "--theta", theta, "--n", &n.to_string(), "--seed", &seed.to_string(), "--output", &p]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    p
}
