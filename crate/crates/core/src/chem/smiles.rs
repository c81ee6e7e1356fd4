//! Parser for the SMILES subset used by electrolyte datasets.
//!
//! Supported: organic-subset atoms (`B C N O F S Cl P Br I`), aromatic
//! lowercase atoms (`b c n o s`), bracket atoms with element, hydrogen count
//! and charge, bond symbols `- = # :`, ring closures `1`-`9` and `%nn`,
//! branches and the `.` component separator. Bracket atoms `[Cu]` and `[Au]`
//! mark polymer connection sites and are read as plain carbon.
//!
//! Stereo markers, isotopes, atom classes and wildcards are rejected.

use std::collections::HashMap;

use thiserror::Error;

use super::elements::Element;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty SMILES string")]
    Empty,
    #[error("non-ASCII input")]
    NonAscii,
    #[error("unsupported element {0:?}")]
    UnsupportedElement(String),
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("ring closure {0} was never matched")]
    UnmatchedRing(u32),
    #[error("ring bond symbols disagree")]
    RingBondConflict,
    #[error("malformed bracket atom")]
    MalformedBracket,
    #[error("{0} is not supported")]
    Unsupported(&'static str),
    #[error("bond or ring closure without a preceding atom")]
    MissingAtom,
    #[error("bond symbol not followed by an atom")]
    DanglingBond,
    #[error("atom bonded to itself")]
    SelfBond,
    #[error("duplicate bond between the same atoms")]
    DuplicateBond,
    #[error("unexpected character {0:?}")]
    Unexpected(char),
}

/// Parse failure with the character offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SMILES parse error at offset {offset}: {kind}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

impl SmilesError {
    fn new(offset: usize, kind: SmilesErrorKind) -> Self {
        Self { offset, kind }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Aromatic,
    Double,
    Triple,
}

impl BondOrder {
    /// Numeric bond-type code: 1, 1.5, 2 or 3.
    pub fn code(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Aromatic => 1.5,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i32,
    pub aromatic: bool,
    /// Hydrogen count written inside brackets; `None` for organic-subset atoms.
    pub explicit_h: Option<u32>,
    pub implicit_h: u32,
}

impl Atom {
    fn organic(element: Element, aromatic: bool) -> Self {
        Self {
            element,
            formal_charge: 0,
            aromatic,
            explicit_h: None,
            implicit_h: 0,
        }
    }

    /// Hydrogens attached to this atom.
    pub fn total_h(&self) -> u32 {
        self.explicit_h.unwrap_or(self.implicit_h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub endpoints: (usize, usize),
    pub order: BondOrder,
}

impl Bond {
    pub fn order_code(&self) -> f64 {
        self.order.code()
    }
}

/// One connected component, with bond endpoints indexing into `atoms`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Fragment {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

/// Parses `smiles` into connected components with hydrogens assigned.
///
/// Components are ordered by their first atom in the input.
pub fn parse_smiles(smiles: &str) -> Result<Vec<Fragment>, SmilesError> {
    let (atoms, bonds) = Parser::new(smiles)?.run()?;
    let atoms = assign_implicit_hydrogens(atoms, &bonds);
    Ok(split_components(atoms, bonds))
}

/// Fills `implicit_h` for organic-subset atoms from the smallest allowed
/// valence that accommodates the rounded-up bond order sum. Bracket atoms
/// take their written hydrogen count.
pub fn assign_implicit_hydrogens(mut atoms: Vec<Atom>, bonds: &[Bond]) -> Vec<Atom> {
    let mut order_sum = vec![0.0f64; atoms.len()];
    for b in bonds {
        order_sum[b.endpoints.0] += b.order_code();
        order_sum[b.endpoints.1] += b.order_code();
    }
    for (atom, sum) in atoms.iter_mut().zip(order_sum) {
        atom.implicit_h = match atom.explicit_h {
            Some(h) => h,
            None => {
                let used = sum.ceil() as i64;
                let allowed = allowed_valences(atom.element);
                match allowed.iter().find(|&&v| i64::from(v) >= used) {
                    Some(&v) => (i64::from(v) - used) as u32,
                    None => {
                        log::warn!(
                            "{} has bond order sum {sum} above its valence; implicit H clamped to 0",
                            atom.element
                        );
                        0
                    }
                }
            }
        };
    }
    atoms
}

fn allowed_valences(e: Element) -> &'static [u32] {
    match e {
        Element::S => &[2, 4, 6],
        Element::P => &[3, 5],
        Element::B => &[3],
        Element::C | Element::Si => &[4],
        Element::N => &[3],
        Element::O => &[2],
        Element::F | Element::Cl | Element::Br | Element::I => &[1],
        Element::Li | Element::Na | Element::K => &[0],
    }
}

fn split_components(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Vec<Fragment> {
    let n = atoms.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for b in &bonds {
        let (ra, rb) = (find(&mut parent, b.endpoints.0), find(&mut parent, b.endpoints.1));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut frag_of_root: HashMap<usize, usize> = HashMap::new();
    let mut local = vec![(0usize, 0usize); n];
    let mut fragments: Vec<Fragment> = Vec::new();
    for (i, atom) in atoms.into_iter().enumerate() {
        let root = find(&mut parent, i);
        let f = *frag_of_root.entry(root).or_insert_with(|| {
            fragments.push(Fragment::default());
            fragments.len() - 1
        });
        local[i] = (f, fragments[f].atoms.len());
        fragments[f].atoms.push(atom);
    }
    for b in bonds {
        let (f, a) = local[b.endpoints.0];
        let (_, c) = local[b.endpoints.1];
        fragments[f].bonds.push(Bond {
            endpoints: (a, c),
            order: b.order,
        });
    }
    fragments
}

struct RingOpen {
    atom: usize,
    order: Option<BondOrder>,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    branches: Vec<(Option<usize>, usize)>,
    pending: Option<(BondOrder, usize)>,
    rings: HashMap<u32, (RingOpen, usize)>,
}

impl<'a> Parser<'a> {
    fn new(smiles: &'a str) -> Result<Self, SmilesError> {
        if smiles.is_empty() {
            return Err(SmilesError::new(0, SmilesErrorKind::Empty));
        }
        if let Some(p) = smiles.bytes().position(|b| !b.is_ascii()) {
            return Err(SmilesError::new(p, SmilesErrorKind::NonAscii));
        }
        Ok(Self {
            src: smiles.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            prev: None,
            branches: Vec::new(),
            pending: None,
            rings: HashMap::new(),
        })
    }

    fn err<T>(&self, offset: usize, kind: SmilesErrorKind) -> Result<T, SmilesError> {
        Err(SmilesError::new(offset, kind))
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn run(mut self) -> Result<(Vec<Atom>, Vec<Bond>), SmilesError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if self.prev.is_none() {
                        return self.err(start, SmilesErrorKind::MissingAtom);
                    }
                    self.branches.push((self.prev, start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = self.branches.pop() else {
                        return self.err(start, SmilesErrorKind::UnbalancedParens);
                    };
                    if self.pending.is_some() {
                        return self.err(start, SmilesErrorKind::DanglingBond);
                    }
                    self.prev = p;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' => {
                    if self.prev.is_none() {
                        return self.err(start, SmilesErrorKind::MissingAtom);
                    }
                    if self.pending.is_some() {
                        return self.err(start, SmilesErrorKind::Unexpected(c as char));
                    }
                    let order = match c {
                        b'-' => BondOrder::Single,
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        _ => BondOrder::Aromatic,
                    };
                    self.pending = Some((order, start));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'.' => {
                    if self.pending.is_some() {
                        return self.err(start, SmilesErrorKind::DanglingBond);
                    }
                    if !self.branches.is_empty() {
                        return self.err(start, SmilesErrorKind::UnbalancedParens);
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom, start)?;
                }
                b'/' | b'\\' => return self.err(start, SmilesErrorKind::Unsupported("stereo bond")),
                b'*' => return self.err(start, SmilesErrorKind::Unsupported("wildcard atom")),
                _ if c.is_ascii_alphabetic() => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom, start)?;
                }
                _ => return self.err(start, SmilesErrorKind::Unexpected(c as char)),
            }
        }
        if let Some(&(_, offset)) = self.branches.last() {
            return self.err(offset, SmilesErrorKind::UnbalancedParens);
        }
        if let Some((_, offset)) = self.pending {
            return self.err(offset, SmilesErrorKind::DanglingBond);
        }
        if let Some((&digit, (_, offset))) = self.rings.iter().min_by_key(|(_, (_, o))| *o) {
            return self.err(*offset, SmilesErrorKind::UnmatchedRing(digit));
        }
        Ok((self.atoms, self.bonds))
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn connect(&mut self, a: usize, b: usize, order: BondOrder, at: usize) -> Result<(), SmilesError> {
        if a == b {
            return self.err(at, SmilesErrorKind::SelfBond);
        }
        let dup = self.bonds.iter().any(|bd| {
            bd.endpoints == (a, b) || bd.endpoints == (b, a)
        });
        if dup {
            return self.err(at, SmilesErrorKind::DuplicateBond);
        }
        self.bonds.push(Bond {
            endpoints: (a, b),
            order,
        });
        Ok(())
    }

    fn add_atom(&mut self, atom: Atom, at: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(p) = self.prev {
            let order = match self.pending.take() {
                Some((o, _)) => o,
                None => self.default_order(p, idx),
            };
            self.connect(p, idx, order, at)?;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let c = self.src[self.pos];
        let next = self.src.get(self.pos + 1).copied();
        let (element, aromatic, width) = match (c, next) {
            (b'C', Some(b'l')) => (Element::Cl, false, 2),
            (b'B', Some(b'r')) => (Element::Br, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b's', _) => (Element::S, true, 1),
            _ => {
                return self.err(
                    start,
                    SmilesErrorKind::UnsupportedElement((c as char).to_string()),
                )
            }
        };
        self.pos += width;
        Ok(Atom::organic(element, aromatic))
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        let malformed = |p: &Self| p.err(open, SmilesErrorKind::MalformedBracket);
        match self.peek() {
            Some(b'0'..=b'9') => return self.err(self.pos, SmilesErrorKind::Unsupported("isotope")),
            Some(b'*') => return self.err(self.pos, SmilesErrorKind::Unsupported("wildcard atom")),
            Some(c) if c.is_ascii_alphabetic() => {}
            _ => return malformed(self),
        }

        let sym_start = self.pos;
        let first = self.src[self.pos];
        let second = self.src.get(self.pos + 1).copied().filter(u8::is_ascii_lowercase);
        let atom = if first.is_ascii_uppercase() {
            let width = if second.is_some() { 2 } else { 1 };
            let sym = std::str::from_utf8(&self.src[sym_start..sym_start + width]).unwrap_or_default();
            let found = match sym {
                "Cu" | "Au" => Some((Element::C, false, true)),
                _ => sym.parse::<Element>().ok().map(|e| (e, false, false)),
            };
            if found.is_none() {
                return self.err(sym_start, SmilesErrorKind::UnsupportedElement(sym.to_string()));
            }
            self.pos += width;
            found
        } else {
            let found = match first {
                b'b' => Some((Element::B, true, false)),
                b'c' => Some((Element::C, true, false)),
                b'n' => Some((Element::N, true, false)),
                b'o' => Some((Element::O, true, false)),
                b's' => Some((Element::S, true, false)),
                _ => None,
            };
            if found.is_some() {
                self.pos += 1;
            }
            found
        };
        let Some((element, aromatic, placeholder)) = atom else {
            let sym = (first as char).to_string();
            return self.err(sym_start, SmilesErrorKind::UnsupportedElement(sym));
        };

        if self.peek() == Some(b'@') {
            return self.err(self.pos, SmilesErrorKind::Unsupported("chirality"));
        }
        let mut h = 0u32;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            h = self.read_number().unwrap_or(1);
        }
        let mut charge = 0i32;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.read_number() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }
        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(b':') => return self.err(self.pos, SmilesErrorKind::Unsupported("atom class")),
            _ => return malformed(self),
        }
        if placeholder {
            // connection-site marker becomes an ordinary capping carbon
            return Ok(Atom::organic(Element::C, false));
        }
        Ok(Atom {
            element,
            formal_charge: charge,
            aromatic,
            explicit_h: Some(h),
            implicit_h: 0,
        })
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        (self.pos > start)
            .then(|| std::str::from_utf8(&self.src[start..self.pos]).ok()?.parse().ok())
            .flatten()
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let Some(prev) = self.prev else {
            return self.err(start, SmilesErrorKind::MissingAtom);
        };
        let digit = if self.src[self.pos] == b'%' {
            let d = self.src.get(self.pos + 1..self.pos + 3);
            match d {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    u32::from(d[0] - b'0') * 10 + u32::from(d[1] - b'0')
                }
                _ => return self.err(start, SmilesErrorKind::Unexpected('%')),
            }
        } else {
            self.pos += 1;
            u32::from(self.src[start] - b'0')
        };
        let order = self.pending.take().map(|(o, _)| o);
        match self.rings.remove(&digit) {
            None => {
                self.rings.insert(digit, (RingOpen { atom: prev, order }, start));
            }
            Some((open, _)) => {
                let order = match (open.order, order) {
                    (Some(a), Some(b)) if a != b => {
                        return self.err(start, SmilesErrorKind::RingBondConflict)
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => self.default_order(open.atom, prev),
                };
                self.connect(open.atom, prev, order, start)?;
            }
        }
        Ok(())
    }
}
