//! Reinforcer catalogs.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::{Error, Result};

/// One positive-feedback channel the expert can dispatch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reinforcer {
    pub id: usize,
    pub label: String,
    pub message: String,
}

/// An ordered set of reinforcers with contiguous ids `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReinforcerCatalog {
    entries: Vec<Reinforcer>,
}

impl ReinforcerCatalog {
    pub fn new(entries: Vec<Reinforcer>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::Config(format!(
                "a catalog needs at least 2 reinforcers, got {}",
                entries.len()
            )));
        }
        let mut labels = HashSet::new();
        for (idx, entry) in entries.iter().enumerate() {
            if entry.id != idx {
                return Err(Error::Config(format!(
                    "reinforcer ids must be contiguous from 0; position {idx} has id {}",
                    entry.id
                )));
            }
            if !labels.insert(entry.label.as_str()) {
                return Err(Error::Config(format!("duplicate reinforcer label {:?}", entry.label)));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_kind(kind: CatalogKind) -> Self {
        let pairs: &[(&str, &str)] = match kind {
            CatalogKind::Robot4 => &[
                ("verbal", "Sorry dear, don't worry. You can do it."),
                (
                    "hint",
                    "Try flipping the marker box and using the other side before rejecting it.",
                ),
                ("simple-feedback", "That marker is incorrect."),
                ("gesture", "(pats your back) Don't worry, you can do it."),
            ],
            // Only the first message is attested; the remaining six are authored.
            CatalogKind::Tetris7 => &[
                ("clear-fast", "Clear the lines quickly for faster score."),
                ("look-ahead", "Check the upcoming block and plan your next move ahead."),
                ("fill-gaps", "Avoid leaving gaps under your blocks."),
                ("keep-flat", "Try to keep the surface of the stack flat."),
                ("rotate", "Rotate the block before dropping it to find a better fit."),
                ("edges", "Keep one column open along the edge for long pieces."),
                ("encourage", "Nice effort! Stay calm, you are getting better."),
            ],
        };
        let entries = pairs
            .iter()
            .enumerate()
            .map(|(id, (label, message))| Reinforcer {
                id,
                label: (*label).to_owned(),
                message: (*message).to_owned(),
            })
            .collect();
        Self { entries }
    }

    /// The built-in catalog of that size, or generic labels otherwise.
    pub fn for_size(n: usize) -> Self {
        match n {
            4 => Self::from_kind(CatalogKind::Robot4),
            7 => Self::from_kind(CatalogKind::Tetris7),
            _ => Self {
                entries: (0..n)
                    .map(|id| Reinforcer {
                        id,
                        label: format!("r{id}"),
                        message: format!("Reinforcer {id}"),
                    })
                    .collect(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Reinforcer] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> Option<&Reinforcer> {
        self.entries.get(id)
    }
}

/// The built-in catalogs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogKind {
    /// Four reinforcers used by the robot instructor.
    Robot4,
    /// Seven hint messages used by the block-stacking game.
    Tetris7,
}

impl CatalogKind {
    pub const ALL: [CatalogKind; 2] = [CatalogKind::Robot4, CatalogKind::Tetris7];

    pub fn name(self) -> &'static str {
        match self {
            CatalogKind::Robot4 => "robot4",
            CatalogKind::Tetris7 => "tetris7",
        }
    }

    pub fn size(self) -> usize {
        match self {
            CatalogKind::Robot4 => 4,
            CatalogKind::Tetris7 => 7,
        }
    }

    /// Engine defaults tuned for this catalog: step size 0.015 with a
    /// three-interaction window for the robot, 0.05 with five for the game.
    pub fn default_config(self, seed: u64) -> EngineConfig {
        match self {
            CatalogKind::Robot4 => EngineConfig::with_window(4, 0.015, 3, seed),
            CatalogKind::Tetris7 => EngineConfig::with_window(7, 0.05, 5, seed),
        }
    }
}

impl fmt::Display for CatalogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CatalogKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robot4" => Ok(CatalogKind::Robot4),
            "tetris7" => Ok(CatalogKind::Tetris7),
            other => Err(Error::Validation(format!(
                "unknown catalog {other:?} (expected robot4 or tetris7)"
            ))),
        }
    }
}
