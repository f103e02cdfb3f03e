//! Damage-function variant identifiers and how each one is composed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum VariantId {
    K,
    KU,
    R,
    RU,
    RPU,
    RD,
    RUD,
    RPUD,
    KW,
    KWU,
    W,
    RUW,
    RPUW,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Base {
    /// Cell-level quadratic.
    Kompas,
    /// Regional quadratic distributed to cells.
    Rice,
    /// Regional panel quadratic distributed to cells.
    Panel,
}

/// Global constraint the regional field is tied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    None,
    /// Rescaled each year to the DICE global loss fraction.
    Dice,
    /// Global catastrophic function downscaled with regional weights.
    Weitzman,
}

impl VariantId {
    pub const ALL: [VariantId; 13] = [
        VariantId::K,
        VariantId::KU,
        VariantId::R,
        VariantId::RU,
        VariantId::RPU,
        VariantId::RD,
        VariantId::RUD,
        VariantId::RPUD,
        VariantId::KW,
        VariantId::KWU,
        VariantId::W,
        VariantId::RUW,
        VariantId::RPUW,
    ];

    /// The eight variants reported in the headline PV table, in column order.
    pub const HEADLINE: [VariantId; 8] = [
        VariantId::K,
        VariantId::RUD,
        VariantId::RUW,
        VariantId::KU,
        VariantId::KW,
        VariantId::RPUD,
        VariantId::RPUW,
        VariantId::KWU,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VariantId::K => "K",
            VariantId::KU => "KU",
            VariantId::R => "R",
            VariantId::RU => "RU",
            VariantId::RPU => "RPU",
            VariantId::RD => "R_d",
            VariantId::RUD => "RU_d",
            VariantId::RPUD => "RPU_d",
            VariantId::KW => "KW",
            VariantId::KWU => "KWU",
            VariantId::W => "w",
            VariantId::RUW => "RU_w",
            VariantId::RPUW => "RPU_w",
        }
    }

    pub fn base(&self) -> Base {
        match self {
            VariantId::K | VariantId::KU => Base::Kompas,
            VariantId::KW | VariantId::KWU => Base::Panel,
            _ => Base::Rice,
        }
    }

    pub fn uhi(&self) -> bool {
        matches!(
            self,
            VariantId::KU
                | VariantId::RU
                | VariantId::RPU
                | VariantId::RUD
                | VariantId::RPUD
                | VariantId::KWU
                | VariantId::RUW
                | VariantId::RPUW
        )
    }

    pub fn persistence(&self) -> bool {
        matches!(self, VariantId::RPU | VariantId::RPUD | VariantId::RPUW)
    }

    pub fn target(&self) -> Target {
        match self {
            VariantId::RD | VariantId::RUD | VariantId::RPUD => Target::Dice,
            VariantId::W | VariantId::RUW | VariantId::RPUW => Target::Weitzman,
            _ => Target::None,
        }
    }

    /// The same composition without the urban extension, if it exists.
    pub fn without_uhi(&self) -> Option<VariantId> {
        match self {
            VariantId::KU => Some(VariantId::K),
            VariantId::KWU => Some(VariantId::KW),
            VariantId::RU => Some(VariantId::R),
            VariantId::RUD => Some(VariantId::RD),
            VariantId::RUW => Some(VariantId::W),
            _ => None,
        }
    }

    pub fn valid_list() -> String {
        Self::ALL.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl FromStr for VariantId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        VariantId::ALL
            .iter()
            .copied()
            .find(|v| v.as_str() == t || v.as_str().replace('_', "") == t)
            .ok_or_else(|| Error::UnknownVariant {
                found: t.to_string(),
                valid: VariantId::valid_list(),
            })
    }
}

impl From<VariantId> for String {
    fn from(v: VariantId) -> String {
        v.as_str().to_string()
    }
}

impl TryFrom<String> for VariantId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A variant plus the persistence carry-over it uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageSpec {
    pub variant: VariantId,
    pub rho: f64,
}

pub const DEFAULT_RHO: f64 = 0.5;

impl DamageSpec {
    pub fn new(variant: VariantId, rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::OutOfRange {
                what: "persistence rho",
                value: rho,
            });
        }
        Ok(Self { variant, rho })
    }
}
