use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The seven player activity classes, in their fixed reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Stand,
    Service,
    Reception,
    Setting,
    Attack,
    Block,
    DefenseMove,
}

impl Activity {
    pub const COUNT: usize = 7;

    pub const ALL: [Activity; 7] = [
        Activity::Stand,
        Activity::Service,
        Activity::Reception,
        Activity::Setting,
        Activity::Attack,
        Activity::Block,
        Activity::DefenseMove,
    ];

    /// The five volleyball-specific classes (everything except the two general ones).
    pub const SPECIFIC: [Activity; 5] = [
        Activity::Service,
        Activity::Reception,
        Activity::Setting,
        Activity::Attack,
        Activity::Block,
    ];

    pub const GENERAL: [Activity; 2] = [Activity::Stand, Activity::DefenseMove];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Activity> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Activity::Stand => "stand",
            Activity::Service => "service",
            Activity::Reception => "reception",
            Activity::Setting => "setting",
            Activity::Attack => "attack",
            Activity::Block => "block",
            Activity::DefenseMove => "defense_move",
        }
    }

    pub fn is_specific(self) -> bool {
        !matches!(self, Activity::Stand | Activity::DefenseMove)
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Activity::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}
