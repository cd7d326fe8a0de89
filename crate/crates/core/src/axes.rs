use serde::{Deserialize, Serialize};

use crate::qcore::Party;

/// Position in a party's measurement sequence. Stage 1 couples to the
/// transverse x coordinate, stage 2 to y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    First,
    Second,
}

/// One of the four pointer coordinates, in tensor order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Coordinate {
    XA,
    YA,
    XB,
    YB,
}

impl Coordinate {
    pub const ALL: [Coordinate; 4] = [Coordinate::XA, Coordinate::YA, Coordinate::XB, Coordinate::YB];

    pub fn new(party: Party, stage: Stage) -> Self {
        match (party, stage) {
            (Party::A, Stage::First) => Coordinate::XA,
            (Party::A, Stage::Second) => Coordinate::YA,
            (Party::B, Stage::First) => Coordinate::XB,
            (Party::B, Stage::Second) => Coordinate::YB,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn party(self) -> Party {
        match self {
            Coordinate::XA | Coordinate::YA => Party::A,
            Coordinate::XB | Coordinate::YB => Party::B,
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            Coordinate::XA | Coordinate::XB => Stage::First,
            Coordinate::YA | Coordinate::YB => Stage::Second,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Coordinate::XA => "xA",
            Coordinate::YA => "yA",
            Coordinate::XB => "xB",
            Coordinate::YB => "yB",
        }
    }
}

/// A value per pointer coordinate, indexed in tensor order.
pub type PerCoordinate<T> = [T; 4];
