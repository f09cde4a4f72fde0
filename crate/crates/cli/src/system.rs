//! System files: mode matrices plus an optional automaton, as JSON.
//!
//! ```json
//! {
//!   "name": "example",
//!   "matrices": [[[0.94, 0.56], [-0.35, 0.73]], ...],
//!   "automaton": { "states": 4, "edges": [[1, 1, 3], ...] },
//!   "metadata": { "source": "..." }
//! }
//! ```
//!
//! The automaton is given either as `edges` (triples `from, label, to`,
//! 1-indexed, `states` required) or as `blocks` (one 0/1 matrix per label).
//! When `automaton` is omitted the system is unconstrained: a single state
//! with a self-loop on every label.

use std::collections::BTreeMap;
use std::path::Path;

use cjsr_core::{build_lift, build_tsm, Dfa, LiftedSet, Mat, MatrixSet, Tsm};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub name: String,
    /// Row-major mode matrices; mode `i + 1` is `matrices[i]`.
    pub matrices: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automaton: Option<AutomatonSpec>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutomatonSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<Vec<f64>>>>,
}

/// A validated system, ready for the algorithms.
#[derive(Debug, Clone)]
pub struct System {
    pub file: SystemFile,
    pub modes: MatrixSet,
    pub tsm: Tsm,
    pub dfa: Dfa,
    pub lifted: LiftedSet,
}

impl System {
    pub fn name(&self) -> &str {
        &self.file.name
    }
}

pub fn parse_system(text: &str) -> Result<System, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SystemFile = serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    validate(file)
}

pub fn load_system(path: &Path) -> Result<System, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_system(&text)
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<Mat, CliError> {
    let n = rows.len();
    if n == 0 {
        return Err(CliError::Dimension(format!("{field} is empty")));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(CliError::Dimension(format!(
                "{field}[{r}] has {} entries, expected {n} (matrices must be square)",
                row.len()
            )));
        }
    }
    Ok(Mat::from_fn(n, n, |r, c| rows[r][c]))
}

pub fn validate(file: SystemFile) -> Result<System, CliError> {
    if file.matrices.is_empty() {
        return Err(CliError::Dimension("matrices: at least one mode is required".into()));
    }
    let mats = file
        .matrices
        .iter()
        .enumerate()
        .map(|(i, m)| matrix(m, &format!("matrices[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let n = mats[0].nrows();
    if let Some(i) = mats.iter().position(|m| m.nrows() != n) {
        return Err(CliError::Dimension(format!(
            "matrices[{i}] is {0}x{0}, matrices[0] is {n}x{n}",
            mats[i].nrows()
        )));
    }
    let m = mats.len();
    let modes = MatrixSet::new(mats).map_err(|e| CliError::from_core("matrices", e))?;

    let tsm = match &file.automaton {
        None => build_tsm(&Dfa::unconstrained(m).map_err(|e| CliError::from_core("automaton", e))?),
        Some(spec) => match (&spec.edges, &spec.blocks) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(CliError::Schema {
                    path: "automaton".into(),
                    message: "exactly one of `edges` or `blocks` must be present".into(),
                })
            }
            (Some(edges), None) => {
                let states = spec.states.ok_or_else(|| CliError::Schema {
                    path: "automaton.states".into(),
                    message: "required when the automaton is given by edges".into(),
                })?;
                let dfa = Dfa::new(states, m, edges.iter().copied())
                    .map_err(|e| CliError::from_core("automaton.edges", e))?;
                build_tsm(&dfa)
            }
            (None, Some(blocks)) => {
                if blocks.len() != m {
                    return Err(CliError::Dimension(format!(
                        "automaton.blocks has {} labels but there are {m} modes",
                        blocks.len()
                    )));
                }
                let fs = blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| matrix(b, &format!("automaton.blocks[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let tsm = Tsm::from_blocks(fs).map_err(|e| CliError::from_core("automaton.blocks", e))?;
                if let Some(states) = spec.states {
                    if states != tsm.num_states() {
                        return Err(CliError::Dimension(format!(
                            "automaton.states is {states} but the blocks are {0}x{0}",
                            tsm.num_states()
                        )));
                    }
                }
                tsm
            }
        },
    };
    let lifted = build_lift(&modes, &tsm).map_err(|e| CliError::from_core("automaton", e))?;
    let dfa = tsm.to_dfa();
    Ok(System {
        file,
        modes,
        tsm,
        dfa,
        lifted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_when_automaton_missing() {
        let s = parse_system(r#"{"name": "id", "matrices": [[[1.0, 0.0], [0.0, 1.0]]]}"#).unwrap();
        assert_eq!(s.tsm.num_states(), 1);
        assert_eq!(s.modes.len(), 1);
        assert_eq!(s.modes.dim(), 2);
    }

    #[test]
    fn schema_errors_cite_the_path() {
        let err = parse_system(r#"{"name": "x", "matrices": [[[1.0, "a"]]]}"#).unwrap_err();
        match err {
            CliError::Schema { path, .. } => assert_eq!(path, "matrices[0][0][1]"),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_system(r#"{"name": "x", "matrices": [[[1.0]]], "extra": 1}"#).unwrap_err();
        assert!(matches!(err, CliError::Schema { .. }));
    }

    #[test]
    fn both_or_neither_automaton_forms_rejected() {
        let text = r#"{"name": "x", "matrices": [[[1.0]]],
            "automaton": {"states": 1, "edges": [[1, 1, 1]], "blocks": [[[1.0]]]}}"#;
        assert!(matches!(parse_system(text), Err(CliError::Schema { .. })));
        let text = r#"{"name": "x", "matrices": [[[1.0]]], "automaton": {"states": 1}}"#;
        assert!(matches!(parse_system(text), Err(CliError::Schema { .. })));
    }

    #[test]
    fn nondeterminism_and_dimension_codes_differ() {
        let nd = r#"{"name": "x", "matrices": [[[1.0]]],
            "automaton": {"states": 2, "edges": [[1, 1, 1], [1, 1, 2]]}}"#;
        let nd = parse_system(nd).unwrap_err();
        assert!(matches!(nd, CliError::Nondeterministic(_)));
        let dim = parse_system(r#"{"name": "x", "matrices": [[[1.0]], [[1.0, 0.0], [0.0, 1.0]]]}"#).unwrap_err();
        assert!(matches!(dim, CliError::Dimension(_)));
        assert_ne!(nd.code(), dim.code());
    }

    #[test]
    fn blocks_must_match_modes() {
        let text = r#"{"name": "x", "matrices": [[[1.0]], [[0.5]]],
            "automaton": {"blocks": [[[1.0]]]}}"#;
        assert!(matches!(parse_system(text), Err(CliError::Dimension(_))));
    }
}
