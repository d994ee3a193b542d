use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Exact matrix entry.
pub type Rational = Ratio<u64>;

/// The 17 legal entry values, smallest first: 1/9 … 1/2, 1, 2 … 9.
pub const JUDGMENT_SCALE: [f64; 17] = [
    1.0 / 9.0,
    1.0 / 8.0,
    1.0 / 7.0,
    1.0 / 6.0,
    1.0 / 5.0,
    1.0 / 4.0,
    1.0 / 3.0,
    1.0 / 2.0,
    1.0,
    2.0,
    3.0,
    4.0,
    5.0,
    6.0,
    7.0,
    8.0,
    9.0,
];

/// Intensity of preference on the 1–9 scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgmentLevel {
    Equal,
    Intermediate2,
    Moderate,
    Intermediate4,
    Strong,
    Intermediate6,
    VeryStrong,
    Intermediate8,
    Extreme,
}

impl JudgmentLevel {
    pub const ALL: [JudgmentLevel; 9] = [
        JudgmentLevel::Equal,
        JudgmentLevel::Intermediate2,
        JudgmentLevel::Moderate,
        JudgmentLevel::Intermediate4,
        JudgmentLevel::Strong,
        JudgmentLevel::Intermediate6,
        JudgmentLevel::VeryStrong,
        JudgmentLevel::Intermediate8,
        JudgmentLevel::Extreme,
    ];

    pub fn intensity(self) -> u64 {
        self as u64 + 1
    }

    pub fn from_intensity(intensity: u64) -> Option<Self> {
        match intensity {
            1..=9 => Some(Self::ALL[intensity as usize - 1]),
            _ => None,
        }
    }

    /// Verbal anchor, if the level has one.
    pub fn verbal_label(self) -> Option<&'static str> {
        match self {
            JudgmentLevel::Equal => Some("Equally preferred"),
            JudgmentLevel::Moderate => Some("Moderately preferred"),
            JudgmentLevel::Strong => Some("Strongly preferred"),
            JudgmentLevel::VeryStrong => Some("Very strongly preferred"),
            JudgmentLevel::Extreme => Some("Extremely preferred"),
            _ => None,
        }
    }
}

/// A judgment level together with which side of the pair it favours.
///
/// For an entry `a_ij`, `favors_row = true` means attribute `i` is preferred
/// and the entry takes the level's intensity; otherwise it takes the
/// reciprocal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Judgment {
    pub level: JudgmentLevel,
    pub favors_row: bool,
}

impl Judgment {
    pub fn favoring_row(level: JudgmentLevel) -> Self {
        Self {
            level,
            favors_row: true,
        }
    }

    pub fn favoring_column(level: JudgmentLevel) -> Self {
        Self {
            level,
            favors_row: false,
        }
    }

    pub fn equal() -> Self {
        Self::favoring_row(JudgmentLevel::Equal)
    }

    pub fn value(self) -> Rational {
        let v = self.level.intensity();
        if self.favors_row {
            Rational::from_integer(v)
        } else {
            Rational::new(1, v)
        }
    }

    pub fn reciprocal(self) -> Self {
        Self {
            level: self.level,
            favors_row: !self.favors_row,
        }
    }

    /// Inverse of [`Judgment::value`]; `None` for values off the scale.
    pub fn from_value(value: Rational) -> Option<Self> {
        if *value.denom() == 1 {
            JudgmentLevel::from_intensity(*value.numer()).map(Self::favoring_row)
        } else if *value.numer() == 1 {
            JudgmentLevel::from_intensity(*value.denom()).map(Self::favoring_column)
        } else {
            None
        }
    }
}

pub(crate) fn is_legal_value(value: &Rational) -> bool {
    Judgment::from_value(*value).is_some()
}
