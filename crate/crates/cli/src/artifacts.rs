use std::fs;
use std::path::PathBuf;

use serde_json::Value;

use crate::Failure;

/// Files written by one run, so that a failed run can take them back.
pub struct Artifacts {
    dir: PathBuf,
    fingerprint: String,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: PathBuf, fingerprint: String) -> Self {
        Artifacts {
            dir,
            fingerprint,
            written: Vec::new(),
        }
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, bytes)?;
        Ok(())
    }

    /// CSV body behind a `# config_fingerprint=` line.
    pub fn write_csv(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        let text = format!("# config_fingerprint={}\n{body}", self.fingerprint);
        self.write_bytes(name, text.as_bytes())
    }

    /// A JSON object with `config_fingerprint` inserted at the top level.
    pub fn write_json_value(&mut self, name: &str, mut value: Value) -> Result<(), Failure> {
        match &mut value {
            Value::Object(map) => {
                map.insert("config_fingerprint".into(), Value::String(self.fingerprint.clone()));
            }
            _ => {
                value = serde_json::json!({ "config_fingerprint": self.fingerprint, "data": value });
            }
        }
        let mut text = serde_json::to_string_pretty(&value).expect("json serializes");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn discard(&mut self) {
        for path in self.written.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

/// 17 significant digits, as used by every CSV artifact.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
