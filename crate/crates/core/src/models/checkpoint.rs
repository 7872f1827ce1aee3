use std::fmt::Write as _;
use std::path::Path;

use super::Parameters;
use crate::error::{Error, Result};
use crate::numeric::Tensor;

const MAGIC: &str = "textguard-checkpoint 1";

/// Named tensors plus the JSON configuration needed to rebuild the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_model<P: Parameters>(config: serde_json::Value, model: &P) -> Self {
        Checkpoint {
            config,
            tensors: model.tensors().into_iter().map(|(n, t)| (n, t.clone())).collect(),
        }
    }

    /// Copies the stored values into `model`; names and shapes must match.
    pub fn load_into<P: Parameters>(&self, model: &mut P) -> Result<()> {
        let expected: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
        let stored: Vec<&String> = self.tensors.iter().map(|(n, _)| n).collect();
        if expected.len() != stored.len() || expected.iter().zip(&stored).any(|(a, b)| a != *b) {
            return Err(Error::Checkpoint(format!(
                "tensor names do not match the model ({} stored, {} expected)",
                stored.len(),
                expected.len()
            )));
        }
        let values: Vec<Tensor> = self.tensors.iter().map(|(_, t)| t.clone()).collect();
        model
            .load_from(&values)
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "{}", self.config).unwrap();
        writeln!(s, "{}", self.tensors.len()).unwrap();
        for (name, t) in &self.tensors {
            writeln!(s, "{name}").unwrap();
            s.push_str(&t.to_text());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut lines = text.splitn(4, '\n');
        if lines.next().map(str::trim_end) != Some(MAGIC) {
            return Err(bad("not a checkpoint file".into()));
        }
        let config: serde_json::Value = serde_json::from_str(lines.next().unwrap_or(""))
            .map_err(|e| bad(format!("bad config line: {e}")))?;
        let count: usize = lines
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| bad("bad tensor count".into()))?;
        let mut tokens = lines.next().unwrap_or("").split_whitespace();
        let mut tensors = Vec::with_capacity(count);
        for i in 0..count {
            let name = tokens
                .next()
                .ok_or_else(|| bad(format!("missing tensor {} of {count}", i + 1)))?;
            let t = Tensor::read_tokens(&mut tokens).map_err(|e| bad(format!("tensor {name}: {e}")))?;
            tensors.push((name.to_string(), t));
        }
        if tokens.next().is_some() {
            return Err(bad("trailing data after the last tensor".into()));
        }
        Ok(Checkpoint { config, tensors })
    }
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    std::fs::write(path, checkpoint.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_text(&text)
}
