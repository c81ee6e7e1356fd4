//! Static periodic-table reference data for the supported elements.
//!
//! Masses are standard atomic weights (Da), electronegativities are Pauling
//! values and radii are Bondi van der Waals radii (Å).

use std::fmt;
use std::str::FromStr;

pub const HYDROGEN_MASS: f64 = 1.008;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    B,
    C,
    N,
    O,
    F,
    S,
    Cl,
    P,
    Li,
    Si,
    Na,
    K,
    Br,
    I,
}

/// Reference properties of one element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementData {
    pub atomic_number: u32,
    pub mass: f64,
    pub electronegativity: f64,
    pub vdw_radius: f64,
}

impl Element {
    pub const ALL: [Element; 14] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::S,
        Element::Cl,
        Element::P,
        Element::Li,
        Element::Si,
        Element::Na,
        Element::K,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::P => "P",
            Element::Li => "Li",
            Element::Si => "Si",
            Element::Na => "Na",
            Element::K => "K",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn data(self) -> ElementData {
        let (atomic_number, mass, electronegativity, vdw_radius) = match self {
            Element::B => (5, 10.81, 2.04, 1.92),
            Element::C => (6, 12.011, 2.55, 1.70),
            Element::N => (7, 14.007, 3.04, 1.55),
            Element::O => (8, 15.999, 3.44, 1.52),
            Element::F => (9, 18.998, 3.98, 1.47),
            Element::S => (16, 32.06, 2.58, 1.80),
            Element::Cl => (17, 35.45, 3.16, 1.75),
            Element::P => (15, 30.974, 2.19, 1.80),
            Element::Li => (3, 6.94, 0.98, 1.82),
            Element::Si => (14, 28.085, 1.90, 2.10),
            Element::Na => (11, 22.990, 0.93, 2.27),
            Element::K => (19, 39.098, 0.82, 2.75),
            Element::Br => (35, 79.904, 2.96, 1.85),
            Element::I => (53, 126.904, 2.66, 1.98),
        };
        ElementData {
            atomic_number,
            mass,
            electronegativity,
            vdw_radius,
        }
    }

    /// Position in the one-hot block of the node features, if any.
    pub fn one_hot_index(self) -> Option<usize> {
        match self {
            Element::B => Some(0),
            Element::C => Some(1),
            Element::N => Some(2),
            Element::O => Some(3),
            Element::F => Some(4),
            Element::S => Some(5),
            Element::Cl => Some(6),
            _ => None,
        }
    }

    /// Lowest normal valence used for implicit-hydrogen counting. Metals get 0.
    pub fn default_valence(self) -> u32 {
        match self {
            Element::B | Element::N | Element::P => 3,
            Element::C | Element::Si => 4,
            Element::O | Element::S => 2,
            Element::F | Element::Cl | Element::Br | Element::I => 1,
            Element::Li | Element::Na | Element::K => 0,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Element::ALL
            .into_iter()
            .find(|e| e.symbol() == s)
            .ok_or(())
    }
}
