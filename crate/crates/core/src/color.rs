//! The three plaquette/edge colors of a 2D color code.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Plaquette (and edge) color. Every face of a color-code lattice carries one
/// of these, every edge carries the color complementary to the two equal-color
/// faces it connects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    #[serde(rename = "r")]
    Red,
    #[serde(rename = "g")]
    Green,
    #[serde(rename = "b")]
    Blue,
}

pub const COLORS: [Color; 3] = [Color::Red, Color::Green, Color::Blue];

impl Color {
    /// Dense index 0..3, stable across runs (used for per-color arrays).
    pub fn index(self) -> usize {
        match self {
            Color::Red => 0,
            Color::Green => 1,
            Color::Blue => 2,
        }
    }

    pub fn from_index(i: usize) -> Color {
        COLORS[i]
    }

    /// The two colors other than `self`, in index order.
    pub fn others(self) -> [Color; 2] {
        match self {
            Color::Red => [Color::Green, Color::Blue],
            Color::Green => [Color::Red, Color::Blue],
            Color::Blue => [Color::Red, Color::Green],
        }
    }

    /// The color that is neither `a` nor `b`. Panics if `a == b`.
    pub fn complement(a: Color, b: Color) -> Color {
        assert_ne!(a, b, "complement of a color pair needs two distinct colors");
        Color::from_index(3 - a.index() - b.index())
    }

    pub fn letter(self) -> char {
        match self {
            Color::Red => 'r',
            Color::Green => 'g',
            Color::Blue => 'b',
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for Color {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "r" | "red" => Ok(Color::Red),
            "g" | "green" => Ok(Color::Green),
            "b" | "blue" => Ok(Color::Blue),
            other => Err(format!("unknown color '{other}' (expected r|g|b)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_covers_all_pairs() {
        for a in COLORS {
            for b in COLORS {
                if a == b {
                    continue;
                }
                let c = Color::complement(a, b);
                assert_ne!(c, a);
                assert_ne!(c, b);
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for c in COLORS {
            assert_eq!(c.to_string().parse::<Color>().unwrap(), c);
            assert_eq!(c.letter().to_string().parse::<Color>().unwrap(), c);
        }
    }

    #[test]
    fn others_are_complementary() {
        for c in COLORS {
            let [a, b] = c.others();
            assert_eq!(Color::complement(a, b), c);
        }
    }
}
