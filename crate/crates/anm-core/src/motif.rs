//! Motif template library: the fixed connection-matrix building blocks that
//! microcircuit genomes are assembled from.
//!
//! Each template is a small directed graph over `size` neurons given as a
//! signed adjacency matrix (`+1` excitatory, `-1` inhibitory, `0` absent),
//! plus the designated input and output neuron indices that genome-level
//! wiring is allowed to attach to.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of one of the fourteen motif templates.
#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MotifId {
    /// Feed-forward excitation.
    FFE,
    /// Feed-forward inhibition.
    FFI,
    /// Feedback excitation.
    FBE,
    /// Feedback inhibition.
    FBI,
    /// Recurrent excitation ring.
    RCE,
    /// Recurrent inhibition ring.
    RCI,
    /// Lateral inhibition.
    LTI,
    /// Feed-forward reciprocal excitation.
    FFRE,
    /// Feed-forward reciprocal inhibition.
    FFRI,
    /// Feedback reciprocal excitation.
    FBRE,
    /// Feedback reciprocal inhibition.
    FBRI,
    /// Feed-forward lateral inhibition.
    FFLI,
    /// Feedback lateral inhibition.
    FBLI,
    /// Central pattern generator.
    CPG,
}

impl MotifId {
    /// Every template id, in canonical order.
    pub const ALL: [MotifId; 14] = [
        MotifId::FFE,
        MotifId::FFI,
        MotifId::FBE,
        MotifId::FBI,
        MotifId::RCE,
        MotifId::RCI,
        MotifId::LTI,
        MotifId::FFRE,
        MotifId::FFRI,
        MotifId::FBRE,
        MotifId::FBRI,
        MotifId::FFLI,
        MotifId::FBLI,
        MotifId::CPG,
    ];

    /// Canonical upper-case name.
    pub fn name(self) -> &'static str {
        template(self).name
    }
}

impl fmt::Display for MotifId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error produced when parsing an unknown motif id.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown motif id `{0}` (expected one of FFE, FFI, FBE, FBI, RCE, RCI, LTI, FFRE, FFRI, FBRE, FBRI, FFLI, FBLI, CPG)")]
pub struct UnknownMotif(pub String);

impl FromStr for MotifId {
    type Err = UnknownMotif;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.to_ascii_uppercase();
        MotifId::ALL
            .into_iter()
            .find(|id| id.name() == upper)
            .ok_or_else(|| UnknownMotif(s.to_string()))
    }
}

/// A motif's connection matrix and designated input/output neurons.
#[derive(Debug)]
pub struct MotifTemplate {
    pub id: MotifId,
    name: &'static str,
    /// Number of neurons.
    pub size: usize,
    /// Row-major signed adjacency: entry `(from, to)` at `matrix[from * size + to]`.
    matrix: &'static [i8],
    /// Local indices of designated input neurons (sorted).
    pub inputs: &'static [usize],
    /// Local indices of designated output neurons (sorted).
    pub outputs: &'static [usize],
}

impl MotifTemplate {
    /// Signed entry of the connection matrix: `+1`, `-1`, or `0`.
    pub fn entry(&self, from: usize, to: usize) -> i8 {
        self.matrix[from * self.size + to]
    }

    /// All present edges as `(from, to, sign)` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        let size = self.size;
        self.matrix
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != 0)
            .map(move |(k, &s)| (k / size, k % size, s))
    }

    /// Number of present edges.
    pub fn edge_count(&self) -> usize {
        self.matrix.iter().filter(|&&s| s != 0).count()
    }

    /// Whether the local neuron index is a designated input.
    pub fn is_input(&self, local: usize) -> bool {
        self.inputs.contains(&local)
    }

    /// Whether the local neuron index is a designated output.
    pub fn is_output(&self, local: usize) -> bool {
        self.outputs.contains(&local)
    }
}

macro_rules! motif_templates {
    ($( $name:ident, $size:expr, $matrix:expr, $inputs:expr, $outputs:expr; )+) => {
        static TEMPLATES: [MotifTemplate; 14] = [
            $(
                MotifTemplate {
                    id: MotifId::$name,
                    name: stringify!($name),
                    size: $size,
                    matrix: &$matrix,
                    inputs: &$inputs,
                    outputs: &$outputs,
                },
            )+
        ];
    };
}

#[rustfmt::skip]
motif_templates! {
    FFE, 2,
        [0, 1,
         0, 0],
        [0], [1];
    FFI, 3,
        [0, 1, 1,
         0, 0, -1,
         0, 0, 0],
        [0], [2];
    FBE, 2,
        [0, 1,
         1, 0],
        [0], [1];
    FBI, 3,
        [ 0, 1, 0,
          0, 0, 1,
         -1, 0, 0],
        [0], [2];
    RCE, 4,
        [0, 1, 0, 0,
         0, 0, 1, 0,
         0, 0, 0, 1,
         1, 0, 0, 0],
        [0, 1, 2, 3], [0, 1, 2, 3];
    RCI, 4,
        [ 0, -1,  0,  0,
          0,  0, -1,  0,
          0,  0,  0, -1,
         -1,  0,  0,  0],
        [0, 1, 2, 3], [0, 1, 2, 3];
    LTI, 3,
        [0, 1,  0,
         0, 0, -1,
         0, 0,  0],
        [0, 2], [0, 2];
    FFRE, 4,
        [0, 0, 1, 1,
         0, 0, 1, 1,
         0, 0, 0, 0,
         0, 0, 0, 0],
        [0, 1], [2, 3];
    FFRI, 6,
        [0, 0, 1, 0, 1,  0,
         0, 0, 0, 1, 0,  1,
         0, 0, 0, 0, 0, -1,
         0, 0, 0, 0, -1, 0,
         0, 0, 0, 0, 0,  0,
         0, 0, 0, 0, 0,  0],
        [0, 1], [4, 5];
    FBRE, 4,
        [0, 0, 1, 0,
         0, 0, 0, 1,
         0, 1, 0, 0,
         1, 0, 0, 0],
        [0, 1], [2, 3];
    FBRI, 6,
        [0, 0, 1,  0,  0, 0,
         0, 0, 0,  1,  0, 0,
         0, 0, 0,  0,  1, 0,
         0, 0, 0,  0,  0, 1,
         0, 0, 0, -1,  0, 0,
         0, 0, -1, 0,  0, 0],
        [0, 1], [2, 3];
    FFLI, 5,
        [0, 0, 1,  1,  0,
         0, 0, 1,  0,  1,
         0, 0, 0, -1, -1,
         0, 0, 0,  0,  0,
         0, 0, 0,  0,  0],
        [0, 1], [3, 4];
    FBLI, 5,
        [0, 0,  1,  0, 0,
         0, 0,  0,  1, 0,
         0, 0,  0,  0, 1,
         0, 0,  0,  0, 1,
         0, 0, -1, -1, 0],
        [0, 1], [2, 3];
    CPG, 3,
        [0, 1, 1,
         1, 0, 1,
         1, 1, 0],
        [0, 1, 2], [0, 1, 2];
}

/// Look up the static template for a motif id.
pub fn template(id: MotifId) -> &'static MotifTemplate {
    &TEMPLATES[id as usize]
}

/// Error constructing a [`MotifSet`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MotifSetError {
    #[error("motif set must not be empty")]
    Empty,
    #[error("motif set contains duplicate id {0}")]
    Duplicate(MotifId),
}

/// Named baseline selections of templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifProfile {
    /// The original seven templates.
    Initial,
    /// All fourteen templates.
    Expanded,
    /// All templates except the self-exciting CPG.
    ExpandedNoCpg,
}

impl FromStr for MotifProfile {
    type Err = UnknownMotif;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "initial" => Ok(MotifProfile::Initial),
            "expanded" => Ok(MotifProfile::Expanded),
            "expanded_no_cpg" | "expanded-no-cpg" => Ok(MotifProfile::ExpandedNoCpg),
            _ => Err(UnknownMotif(s.to_string())),
        }
    }
}

/// An ordered, duplicate-free selection of motif templates available to a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifSet {
    ids: Vec<MotifId>,
}

impl MotifSet {
    /// Build a set from an explicit id list, rejecting empty or duplicated input.
    pub fn new(ids: Vec<MotifId>) -> Result<Self, MotifSetError> {
        if ids.is_empty() {
            return Err(MotifSetError::Empty);
        }
        for (i, &id) in ids.iter().enumerate() {
            if ids[..i].contains(&id) {
                return Err(MotifSetError::Duplicate(id));
            }
        }
        Ok(MotifSet { ids })
    }

    /// The set for a named profile.
    pub fn from_profile(profile: MotifProfile) -> Self {
        let ids = match profile {
            MotifProfile::Initial => vec![
                MotifId::FFE,
                MotifId::FBE,
                MotifId::FBI,
                MotifId::RCE,
                MotifId::RCI,
                MotifId::LTI,
                MotifId::CPG,
            ],
            MotifProfile::Expanded => MotifId::ALL.to_vec(),
            MotifProfile::ExpandedNoCpg => MotifId::ALL
                .into_iter()
                .filter(|&id| id != MotifId::CPG)
                .collect(),
        };
        MotifSet { ids }
    }

    /// Ids in set order.
    pub fn ids(&self) -> &[MotifId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: MotifId) -> bool {
        self.ids.contains(&id)
    }
}
