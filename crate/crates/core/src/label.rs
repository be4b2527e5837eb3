use std::fmt;

use serde::{Deserialize, Serialize};

/// A class label in `1..=K`.
///
/// Labels are one-based everywhere they cross an API or file boundary.
/// [`Label::index`] gives the zero-based position used for indexing
/// vectors and matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Label(usize);

impl Label {
    /// Builds a label from its one-based value. Returns `None` for zero.
    pub const fn new(value: usize) -> Option<Self> {
        if value == 0 {
            None
        } else {
            Some(Self(value))
        }
    }

    /// Label whose zero-based position is `index`.
    pub const fn from_index(index: usize) -> Self {
        Self(index + 1)
    }

    /// One-based value.
    pub const fn get(self) -> usize {
        self.0
    }

    /// Zero-based position.
    pub const fn index(self) -> usize {
        self.0 - 1
    }

    pub(crate) fn check(self, k: usize) -> crate::Result<Self> {
        if self.0 > k {
            Err(crate::Error::LabelOutOfRange { label: self.0, k })
        } else {
            Ok(self)
        }
    }
}

impl TryFrom<usize> for Label {
    type Error = String;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        Label::new(value).ok_or_else(|| "labels are one-based; 0 is not a label".to_string())
    }
}

impl From<Label> for usize {
    fn from(label: Label) -> usize {
        label.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
