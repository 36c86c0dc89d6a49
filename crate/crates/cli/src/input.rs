use std::fmt;
use std::path::Path;

use qincompat_core::{ChoiMatrix, Povm, PovmCollection};
use serde::de::DeserializeOwned;
use serde::Deserialize;

/// A malformed or invalid input file.
#[derive(Debug)]
pub struct InputError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.path, self.message)
        } else {
            write!(f, "{}:{}:{}: {}", self.path, self.line, self.column, self.message)
        }
    }
}

impl std::error::Error for InputError {}

pub fn parse<T: DeserializeOwned>(name: &str, text: &str) -> Result<T, InputError> {
    serde_json::from_str(text).map_err(|e| InputError {
        path: name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| InputError { path: name.clone(), line: 0, column: 0, message: e.to_string() })?;
    parse(&name, &text)
}

/// Input of `robustness pair`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairInput {
    pub povm: Povm,
    pub channel: ChoiMatrix,
}

/// Input of `robustness measurements`: a bare list of POVMs.
pub fn measurements(povms: Vec<Povm>) -> qincompat_core::Result<PovmCollection> {
    PovmCollection::new(povms)
}
