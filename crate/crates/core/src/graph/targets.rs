use std::collections::HashSet;

use serde::Deserialize;

use super::GraphError;

/// A source location the fuzzer has to reach.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetPoint {
    pub tp_id: u32,
    pub file: String,
    pub line: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetsFile {
    #[serde(default)]
    target: Vec<RawTarget>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    file: String,
    line: i64,
}

/// Reads `[[target]] file = "...", line = N` entries. Ids are assigned in
/// declaration order starting at 0.
pub fn parse_targets(text: &str) -> Result<Vec<TargetPoint>, GraphError> {
    let raw: TargetsFile =
        toml::from_str(text).map_err(|e| GraphError::Targets(e.message().to_owned()))?;
    if raw.target.is_empty() {
        return Err(GraphError::Targets(
            "at least one target point required".into(),
        ));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(raw.target.len());
    for (i, t) in raw.target.into_iter().enumerate() {
        if t.file.trim().is_empty() {
            return Err(GraphError::Targets(format!("target {i}: empty file")));
        }
        let line = u32::try_from(t.line)
            .ok()
            .filter(|l| *l > 0)
            .ok_or_else(|| {
                GraphError::Targets(format!("target {i}: line must be positive, got {}", t.line))
            })?;
        if !seen.insert((t.file.clone(), line)) {
            return Err(GraphError::Targets(format!(
                "duplicate target {}:{line}",
                t.file
            )));
        }
        out.push(TargetPoint {
            tp_id: i as u32,
            file: t.file,
            line,
        });
    }
    Ok(out)
}
