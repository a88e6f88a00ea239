use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

/// Everything needed to rerun a command: its arguments, the seeds it
/// derived, the resolved configuration and where the time went.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub dataset: Option<String>,
    pub model: Option<String>,
    pub seeds: BTreeMap<&'static str, u64>,
    pub config: BTreeMap<&'static str, Value>,
    pub timings_seconds: BTreeMap<&'static str, f64>,
    #[serde(skip)]
    clock: Option<(&'static str, Instant)>,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        Self {
            tool: "graphgi",
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: std::env::args().collect(),
            dataset: None,
            model: None,
            seeds: BTreeMap::new(),
            config: BTreeMap::new(),
            timings_seconds: BTreeMap::new(),
            clock: None,
        }
    }

    pub fn dataset(&mut self, d: impl AsRef<Path>) {
        self.dataset = Some(d.as_ref().display().to_string());
    }

    pub fn model(&mut self, m: impl AsRef<Path>) {
        self.model = Some(m.as_ref().display().to_string());
    }

    pub fn seed(&mut self, name: &'static str, value: u64) {
        self.seeds.insert(name, value);
    }

    pub fn set(&mut self, key: &'static str, value: impl Into<Value>) {
        self.config.insert(key, value.into());
    }

    /// Close the running phase (if any) and start `phase`.
    pub fn phase(&mut self, phase: &'static str) {
        self.stop();
        self.clock = Some((phase, Instant::now()));
    }

    pub fn stop(&mut self) {
        if let Some((name, start)) = self.clock.take() {
            *self.timings_seconds.entry(name).or_default() += start.elapsed().as_secs_f64();
        }
    }

    pub fn write(mut self, path: impl AsRef<Path>) -> graphgi_core::Result<()> {
        self.stop();
        graphgi_core::record::write_json(path, &self)
    }
}
