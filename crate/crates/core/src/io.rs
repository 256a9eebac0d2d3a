//! JSON file schemas shared by the command line and tests.
//!
//! A class file either lists equal-length bit strings (imported as
//! propositional structures) or spells out a vocabulary, named structures
//! `{universe, relations}`, and members `[structureRef, {var: elem}]`.
//! Stable structure ids are assigned by sorted reference name.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Vocabulary;
use crate::structures::{ElemId, StructClass, Structure, StructureError, VarAssignment};

#[derive(Error, Debug)]
pub enum IoError {
    #[error("bad JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("member refers to unknown structure {0:?}")]
    UnknownStructureRef(String),
    #[error("expected value must be a number or \"none\", got {0:?}")]
    BadExpected(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructureSpec {
    pub universe: Vec<ElemId>,
    #[serde(default)]
    pub relations: BTreeMap<String, Vec<Vec<ElemId>>>,
}

impl StructureSpec {
    pub fn build(&self, id: u32, vocabulary: &Vocabulary) -> Result<Structure, StructureError> {
        let interp = self
            .relations
            .iter()
            .map(|(name, tuples)| (name.clone(), tuples.iter().cloned().collect()))
            .collect();
        Structure::new(
            id,
            vocabulary.clone(),
            self.universe.iter().copied().collect(),
            interp,
        )
    }
}

/// A class of tagged structures, as stored on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassFile {
    Strings {
        strings: Vec<String>,
    },
    Explicit {
        vocabulary: Vocabulary,
        structures: BTreeMap<String, StructureSpec>,
        members: Vec<(String, VarAssignment)>,
    },
}

impl ClassFile {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<StructClass, IoError> {
        match self {
            ClassFile::Strings { strings } => Ok(StructClass::from_bit_strings(strings)?),
            ClassFile::Explicit {
                vocabulary,
                structures,
                members,
            } => {
                let mut built: BTreeMap<&str, Arc<Structure>> = BTreeMap::new();
                for (id, (name, spec)) in structures.iter().enumerate() {
                    built.insert(name, Arc::new(spec.build(id as u32, vocabulary)?));
                }
                let mut out = Vec::new();
                for (reference, bindings) in members {
                    let structure = built
                        .get(reference.as_str())
                        .ok_or_else(|| IoError::UnknownStructureRef(reference.clone()))?;
                    out.push((structure.clone(), bindings.clone()));
                }
                let domain = members
                    .first()
                    .map(|(_, b)| b.domain())
                    .unwrap_or_default();
                Ok(StructClass::new(vocabulary.clone(), domain, out)?)
            }
        }
    }
}

/// Input for the two-structure game: one vocabulary and the two structures.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructurePairFile {
    pub vocabulary: Vocabulary,
    pub a: StructureSpec,
    pub b: StructureSpec,
}

impl StructurePairFile {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<(Structure, Structure), IoError> {
        Ok((
            self.a.build(0, &self.vocabulary)?,
            self.b.build(1, &self.vocabulary)?,
        ))
    }
}

/// A corpus of class-pair instances for the game-versus-enumeration check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusFile {
    pub instances: Vec<CorpusInstance>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusInstance {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "classA")]
    pub class_a: ClassFile,
    #[serde(rename = "classB")]
    pub class_b: ClassFile,
    /// The expected minimal value within the budget, when known: a number,
    /// or the string "none" for inseparable-within-budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Value(u64),
    Keyword(String),
}

impl Expected {
    pub fn matches(&self, value: Option<u64>) -> Result<bool, IoError> {
        match self {
            Expected::Value(v) => Ok(value == Some(*v)),
            Expected::Keyword(k) if k == "none" => Ok(value.is_none()),
            Expected::Keyword(k) => Err(IoError::BadExpected(k.clone())),
        }
    }
}

impl CorpusFile {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A finite set of equal-length bit strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StringSetFile {
    pub strings: Vec<String>,
}

impl StringSetFile {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn bit_sets(&self) -> Result<BTreeSet<Vec<bool>>, crate::strings::StringsError> {
        self.strings
            .iter()
            .map(|s| crate::strings::parse_bits(s))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_file_from_strings() {
        let c = ClassFile::parse(r#"{"strings": ["01", "10"]}"#).unwrap();
        let class = c.build().unwrap();
        assert_eq!(class.len(), 2);
        assert_eq!(class.vocabulary().len(), 2);
    }

    #[test]
    fn class_file_explicit() {
        let text = r#"{
            "vocabulary": {"P": 1},
            "structures": {
                "one": {"universe": [0, 1], "relations": {"P": [[0]]}},
                "two": {"universe": [0], "relations": {}}
            },
            "members": [["one", {"0": 1}], ["two", {"0": 0}]]
        }"#;
        let class = ClassFile::parse(text).unwrap().build().unwrap();
        assert_eq!(class.len(), 2);
        assert_eq!(
            class.domain().iter().copied().collect::<Vec<_>>(),
            vec![0]
        );
    }

    #[test]
    fn unknown_reference_is_an_error() {
        let text = r#"{
            "vocabulary": {},
            "structures": {},
            "members": [["ghost", {}]]
        }"#;
        assert!(matches!(
            ClassFile::parse(text).unwrap().build(),
            Err(IoError::UnknownStructureRef(_))
        ));
    }
}
