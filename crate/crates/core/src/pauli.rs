//! Symplectic Pauli words with exact quarter phases.
//!
//! A word is `i^phase · σ_0 ⊗ σ_1 ⊗ …` where qubit `q` carries `σ_q` encoded by
//! the bit pair `(x_q, z_q)`: `(0,0)=I`, `(1,0)=X`, `(1,1)=Y`, `(0,1)=Z`. Y is the
//! Hermitian Y, so a Hermitian word has an even phase.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Single-qubit Pauli. The discriminant is `x + 2z`, so XOR of codes is the
/// product up to phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Pauli1 {
    I = 0,
    X = 1,
    Z = 2,
    Y = 3,
}

impl Pauli1 {
    pub const ALL: [Pauli1; 4] = [Pauli1::I, Pauli1::X, Pauli1::Y, Pauli1::Z];

    #[inline]
    pub fn from_code(code: u8) -> Pauli1 {
        match code & 3 {
            0 => Pauli1::I,
            1 => Pauli1::X,
            2 => Pauli1::Z,
            _ => Pauli1::Y,
        }
    }

    #[inline]
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn letter(self) -> char {
        match self {
            Pauli1::I => 'I',
            Pauli1::X => 'X',
            Pauli1::Y => 'Y',
            Pauli1::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Pauli1> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli1::I),
            'X' => Some(Pauli1::X),
            'Y' => Some(Pauli1::Y),
            'Z' => Some(Pauli1::Z),
            _ => None,
        }
    }
}

/// `MUL_PHASE[a][b]` is `k` in `σ_a σ_b = i^k σ_{a^b}` (codes as in [`Pauli1`]).
const MUL_PHASE: [[u8; 4]; 4] = [
    // I  X  Z  Y
    [0, 0, 0, 0], // I
    [0, 0, 3, 1], // X: XZ = -iY, XY = iZ
    [0, 1, 0, 3], // Z: ZX = iY, ZY = -iX
    [0, 3, 1, 0], // Y: YX = -iZ, YZ = iX
];

#[inline]
fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliWord {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

impl PauliWord {
    pub fn identity(n: usize) -> Self {
        PauliWord { n, x: vec![0; words_for(n)], z: vec![0; words_for(n)], phase: 0 }
    }

    pub fn single(n: usize, qubit: usize, p: Pauli1) -> Result<Self> {
        let mut w = Self::identity(n);
        w.check_qubit(qubit)?;
        w.set(qubit, p);
        Ok(w)
    }

    pub fn from_sparse(n: usize, sites: &[(usize, Pauli1)]) -> Result<Self> {
        let mut w = Self::identity(n);
        for &(q, p) in sites {
            w.check_qubit(q)?;
            if w.get(q) != Pauli1::I {
                return Err(Error::PauliParse {
                    text: format!("{sites:?}"),
                    reason: format!("qubit {q} listed twice"),
                });
            }
            w.set(q, p);
        }
        Ok(w)
    }

    /// Builds a word from explicit x/z bit slices (length n) and a phase exponent.
    pub fn from_bits(x_bits: &[bool], z_bits: &[bool], phase_pow: u8) -> Result<Self> {
        if x_bits.len() != z_bits.len() {
            return Err(Error::Dimension(x_bits.len(), z_bits.len()));
        }
        let mut w = Self::identity(x_bits.len());
        for q in 0..x_bits.len() {
            w.set(q, Pauli1::from_code(x_bits[q] as u8 | ((z_bits[q] as u8) << 1)));
        }
        w.phase = phase_pow & 3;
        Ok(w)
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn phase_pow(&self) -> u8 {
        self.phase
    }

    pub fn with_phase(mut self, phase_pow: u8) -> Self {
        self.phase = phase_pow & 3;
        self
    }

    #[inline]
    pub fn is_hermitian(&self) -> bool {
        self.phase & 1 == 0
    }

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(self.z.iter()).all(|&w| w == 0)
    }

    pub fn x_bits(&self) -> Vec<bool> {
        (0..self.n).map(|q| self.get(q).code() & 1 == 1).collect()
    }

    pub fn z_bits(&self) -> Vec<bool> {
        (0..self.n).map(|q| self.get(q).code() & 2 == 2).collect()
    }

    #[inline]
    pub fn get(&self, q: usize) -> Pauli1 {
        let (w, b) = (q >> 6, q & 63);
        let code = ((self.x[w] >> b) & 1) | (((self.z[w] >> b) & 1) << 1);
        Pauli1::from_code(code as u8)
    }

    #[inline]
    pub fn set(&mut self, q: usize, p: Pauli1) {
        let (w, b) = (q >> 6, q & 63);
        let mask = 1u64 << b;
        let c = p.code() as u64;
        self.x[w] = (self.x[w] & !mask) | ((c & 1) << b);
        self.z[w] = (self.z[w] & !mask) | (((c >> 1) & 1) << b);
    }

    #[inline]
    pub(crate) fn add_phase(&mut self, k: u8) {
        self.phase = (self.phase + k) & 3;
    }

    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(x, z)| (x | z).count_ones() as usize).sum()
    }

    /// Qubits where the word acts nontrivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, (x, z)) in self.x.iter().zip(&self.z).enumerate() {
            let mut m = x | z;
            while m != 0 {
                let b = m.trailing_zeros() as usize;
                out.push(wi * 64 + b);
                m &= m - 1;
            }
        }
        out
    }

    /// Nontrivial sites as `(qubit, pauli)`, ascending.
    pub fn sites(&self) -> Vec<(usize, Pauli1)> {
        self.support().into_iter().map(|q| (q, self.get(q))).collect()
    }

    /// Returns a copy padded with identities (or truncated if the dropped
    /// qubits are all identity) to `n` qubits.
    pub fn resized(&self, n: usize) -> Result<Self> {
        if n < self.n && self.support().last().is_some_and(|&q| q >= n) {
            return Err(Error::Dimension(self.n, n));
        }
        let mut w = Self::identity(n);
        for (q, p) in self.sites() {
            w.set(q, p);
        }
        w.phase = self.phase;
        Ok(w)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            Err(Error::QubitRange { qubit: q, n: self.n })
        } else {
            Ok(())
        }
    }

    fn check_dim(&self, other: &PauliWord) -> Result<()> {
        if self.n != other.n {
            Err(Error::Dimension(self.n, other.n))
        } else {
            Ok(())
        }
    }

    /// Symplectic commutation test.
    pub fn commutes(&self, other: &PauliWord) -> Result<bool> {
        self.check_dim(other)?;
        let mut parity = 0u32;
        for i in 0..self.x.len() {
            parity ^= ((self.x[i] & other.z[i]) ^ (self.z[i] & other.x[i])).count_ones() & 1;
        }
        Ok(parity == 0)
    }

    /// Exact product `self · other`.
    pub fn multiply(&self, other: &PauliWord) -> Result<PauliWord> {
        self.check_dim(other)?;
        let mut plus = 0u32;
        let mut minus = 0u32;
        let mut out = self.clone();
        for i in 0..self.x.len() {
            let (x1, z1, x2, z2) = (self.x[i], self.z[i], other.x[i], other.z[i]);
            let p = (x1 & !z1 & x2 & z2) | (x1 & z1 & !x2 & z2) | (!x1 & z1 & x2 & !z2);
            let m = (x1 & z1 & x2 & !z2) | (!x1 & z1 & x2 & z2) | (x1 & !z1 & !x2 & z2);
            plus += p.count_ones();
            minus += m.count_ones();
            out.x[i] = x1 ^ x2;
            out.z[i] = z1 ^ z2;
        }
        out.phase = ((self.phase as u32 + other.phase as u32 + plus + 3 * minus) & 3) as u8;
        Ok(out)
    }

    /// Parses sparse (`"X0 Z3 Y7"`) or dense (`"XIZY"`) text, case-insensitive.
    /// Dense strings are read with qubit 0 first and must not be longer than `n`.
    /// An optional leading sign (`+`, `-`, `i`, `-i`) sets the phase.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let err = |reason: String| Error::PauliParse { text: text.to_string(), reason };
        let mut s = text.trim();
        let mut phase = 0u8;
        for (prefix, k) in [("-i", 3u8), ("+i", 1), ("-", 2), ("+", 0)] {
            if let Some(rest) = s.strip_prefix(prefix) {
                phase = k;
                s = rest.trim_start();
                break;
            }
        }
        if s.is_empty() {
            return Err(err("empty".into()));
        }
        let tokens: Vec<&str> = s.split(|c: char| c.is_whitespace() || c == ',' || c == '*').filter(|t| !t.is_empty()).collect();
        let sparse = tokens.iter().any(|t| t.chars().skip(1).any(|c| c.is_ascii_digit()));
        let mut w = Self::identity(n);
        if sparse {
            for tok in tokens {
                let mut chars = tok.chars();
                let letter = chars.next().ok_or_else(|| err("empty token".into()))?;
                let p = Pauli1::from_letter(letter).ok_or_else(|| err(format!("bad letter {letter:?}")))?;
                let idx: usize = chars.as_str().parse().map_err(|_| err(format!("bad qubit index in {tok:?}")))?;
                if idx >= n {
                    return Err(Error::QubitRange { qubit: idx, n });
                }
                if w.get(idx) != Pauli1::I {
                    return Err(err(format!("qubit {idx} listed twice")));
                }
                w.set(idx, p);
            }
        } else {
            let dense: String = tokens.concat();
            if dense.chars().count() > n {
                return Err(err(format!("dense form has {} sites but n = {n}", dense.chars().count())));
            }
            for (q, c) in dense.chars().enumerate() {
                let p = Pauli1::from_letter(c).ok_or_else(|| err(format!("bad letter {c:?}")))?;
                w.set(q, p);
            }
        }
        w.phase = phase;
        Ok(w)
    }

    /// Smallest register that can hold the word written in `text`.
    pub fn required_qubits(text: &str) -> Result<usize> {
        let body = text.trim().trim_start_matches(['+', '-']).trim_start().trim_start_matches('i');
        let tokens: Vec<&str> = body.split(|c: char| c.is_whitespace() || c == ',' || c == '*').filter(|t| !t.is_empty()).collect();
        let sparse = tokens.iter().any(|t| t.chars().skip(1).any(|c| c.is_ascii_digit()));
        let n = if sparse {
            let mut hi = 0;
            for tok in &tokens {
                let idx: usize = tok.get(1..).and_then(|s| s.parse().ok()).ok_or_else(|| Error::PauliParse {
                    text: text.to_string(),
                    reason: format!("bad token {tok:?}"),
                })?;
                hi = hi.max(idx + 1);
            }
            hi
        } else {
            tokens.concat().chars().count()
        };
        Self::parse(text, n.max(1))?;
        Ok(n.max(1))
    }

    /// Sparse text form without phase, `"I"` for the identity.
    pub fn to_sparse_string(&self) -> String {
        let sites = self.sites();
        if sites.is_empty() {
            return "I".into();
        }
        sites.iter().map(|(q, p)| format!("{}{}", p.letter(), q)).collect::<Vec<_>>().join(" ")
    }

    pub fn to_dense_string(&self) -> String {
        (0..self.n).map(|q| self.get(q).letter()).collect()
    }

    /// In-place conjugation by a named Clifford gate.
    pub fn apply_clifford(&mut self, g: &CliffordGate, dir: Direction) -> Result<()> {
        for &q in g.qubits() {
            self.check_qubit(q)?;
        }
        self.apply_clifford_unchecked(g.kind, g.qs[0], g.qs[1], dir);
        Ok(())
    }

    #[inline]
    pub(crate) fn apply_clifford_unchecked(&mut self, kind: CliffordKind, a: usize, b: usize, dir: Direction) {
        let kind = match dir {
            Direction::Forward => kind,
            Direction::Backward => kind.inverse(),
        };
        let tables = clifford_tables();
        if kind.arity() == 1 {
            let pa = self.get(a);
            if pa == Pauli1::I {
                return;
            }
            let (out, sign) = tables.one[kind as usize][pa.code() as usize];
            self.set(a, Pauli1::from_code(out));
            self.phase = (self.phase + 2 * sign) & 3;
        } else {
            let pa = self.get(a);
            let pb = self.get(b);
            if pa == Pauli1::I && pb == Pauli1::I {
                return;
            }
            let (oa, ob, sign) = tables.two[kind.two_index()][(pa.code() | (pb.code() << 2)) as usize];
            self.set(a, Pauli1::from_code(oa));
            self.set(b, Pauli1::from_code(ob));
            self.phase = (self.phase + 2 * sign) & 3;
        }
    }

    /// Whether `self` anticommutes with a sparse Hermitian generator.
    #[inline]
    pub(crate) fn anticommutes_sparse(&self, gen: &[(usize, Pauli1)]) -> bool {
        let mut parity = 0u8;
        for &(q, g) in gen {
            let c = self.get(q).code();
            let gc = g.code();
            // symplectic product of (x,z) pairs
            parity ^= ((c & 1) & (gc >> 1)) ^ ((c >> 1) & (gc & 1));
        }
        parity == 1
    }

    /// `self ← self · G` for a sparse Hermitian generator.
    #[inline]
    pub(crate) fn mul_right_sparse(&mut self, gen: &[(usize, Pauli1)]) {
        for &(q, g) in gen {
            let c = self.get(q).code();
            self.phase = (self.phase + MUL_PHASE[c as usize][g.code() as usize]) & 3;
            self.set(q, Pauli1::from_code(c ^ g.code()));
        }
    }

    /// In-place conjugation by `R = exp(-i θ/2 G)` at `θ = k·π/2`.
    /// Forward computes `R p R†`, backward `R† p R`. Returns whether `G`
    /// anticommutes with the word.
    #[inline]
    pub(crate) fn apply_rotation_sparse(&mut self, gen: &[(usize, Pauli1)], quarter_turns: u8, dir: Direction) -> bool {
        if !self.anticommutes_sparse(gen) {
            return false;
        }
        match quarter_turns & 3 {
            0 => {}
            2 => self.phase = (self.phase + 2) & 3,
            k => {
                // R p R† = cos θ p + i sin θ pG; R† p R = cos θ p − i sin θ pG
                self.mul_right_sparse(gen);
                let plus_i = (k == 1) == (dir == Direction::Forward);
                self.phase = (self.phase + if plus_i { 1 } else { 3 }) & 3;
            }
        }
        true
    }

    /// Sign of a Hermitian word: +1 for phase 0, −1 for phase 2.
    #[inline]
    pub fn hermitian_sign(&self) -> f64 {
        match self.phase {
            0 => 1.0,
            2 => -1.0,
            _ => f64::NAN,
        }
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "",
            1 => "+i ",
            2 => "-",
            _ => "-i ",
        };
        write!(f, "{prefix}{}", self.to_sparse_string())
    }
}

/// `commutes(p, q)` as a free function.
pub fn commutes(p: &PauliWord, q: &PauliWord) -> Result<bool> {
    p.commutes(q)
}

/// `multiply(p, q) = p · q` as a free function.
pub fn multiply(p: &PauliWord, q: &PauliWord) -> Result<PauliWord> {
    p.multiply(q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CliffordKind {
    H,
    S,
    Sdg,
    X,
    Y,
    Z,
    CNOT,
    CZ,
    SWAP,
}

impl CliffordKind {
    pub const ALL: [CliffordKind; 9] = [
        CliffordKind::H,
        CliffordKind::S,
        CliffordKind::Sdg,
        CliffordKind::X,
        CliffordKind::Y,
        CliffordKind::Z,
        CliffordKind::CNOT,
        CliffordKind::CZ,
        CliffordKind::SWAP,
    ];

    pub fn arity(self) -> usize {
        match self {
            CliffordKind::CNOT | CliffordKind::CZ | CliffordKind::SWAP => 2,
            _ => 1,
        }
    }

    pub fn inverse(self) -> CliffordKind {
        match self {
            CliffordKind::S => CliffordKind::Sdg,
            CliffordKind::Sdg => CliffordKind::S,
            k => k,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CliffordKind::H => "H",
            CliffordKind::S => "S",
            CliffordKind::Sdg => "Sdg",
            CliffordKind::X => "X",
            CliffordKind::Y => "Y",
            CliffordKind::Z => "Z",
            CliffordKind::CNOT => "CNOT",
            CliffordKind::CZ => "CZ",
            CliffordKind::SWAP => "SWAP",
        }
    }

    pub fn from_name(s: &str) -> Option<CliffordKind> {
        let k = match s.to_ascii_uppercase().as_str() {
            "H" => CliffordKind::H,
            "S" => CliffordKind::S,
            "SDG" | "SDAG" => CliffordKind::Sdg,
            "X" => CliffordKind::X,
            "Y" => CliffordKind::Y,
            "Z" => CliffordKind::Z,
            "CNOT" | "CX" => CliffordKind::CNOT,
            "CZ" => CliffordKind::CZ,
            "SWAP" => CliffordKind::SWAP,
            _ => return None,
        };
        Some(k)
    }

    fn two_index(self) -> usize {
        match self {
            CliffordKind::CNOT => 0,
            CliffordKind::CZ => 1,
            _ => 2,
        }
    }

    /// Images of the generators `X_a, Z_a` (and `X_b, Z_b`) under forward
    /// conjugation, on a 2-qubit register with `a = 0`, `b = 1`.
    fn generator_images(self) -> Vec<(PauliWord, PauliWord)> {
        use Pauli1::*;
        let w = |s: &[(usize, Pauli1)], ph: u8| PauliWord::from_sparse(2, s).unwrap().with_phase(ph);
        match self {
            CliffordKind::H => vec![(w(&[(0, Z)], 0), w(&[(0, X)], 0))],
            CliffordKind::S => vec![(w(&[(0, Y)], 0), w(&[(0, Z)], 0))],
            CliffordKind::Sdg => vec![(w(&[(0, Y)], 2), w(&[(0, Z)], 0))],
            CliffordKind::X => vec![(w(&[(0, X)], 0), w(&[(0, Z)], 2))],
            CliffordKind::Y => vec![(w(&[(0, X)], 2), w(&[(0, Z)], 2))],
            CliffordKind::Z => vec![(w(&[(0, X)], 2), w(&[(0, Z)], 0))],
            CliffordKind::CNOT => vec![
                (w(&[(0, X), (1, X)], 0), w(&[(0, Z)], 0)),
                (w(&[(1, X)], 0), w(&[(0, Z), (1, Z)], 0)),
            ],
            CliffordKind::CZ => vec![
                (w(&[(0, X), (1, Z)], 0), w(&[(0, Z)], 0)),
                (w(&[(0, Z), (1, X)], 0), w(&[(1, Z)], 0)),
            ],
            CliffordKind::SWAP => vec![(w(&[(1, X)], 0), w(&[(1, Z)], 0)), (w(&[(0, X)], 0), w(&[(0, Z)], 0))],
        }
    }
}

struct CliffordTables {
    /// `one[kind][code] = (out_code, sign_bit)`
    one: [[(u8, u8); 4]; 9],
    /// `two[idx][code_a | code_b << 2] = (out_a, out_b, sign_bit)`
    two: [[(u8, u8, u8); 16]; 3],
}

fn clifford_tables() -> &'static CliffordTables {
    static TABLES: OnceLock<CliffordTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut t = CliffordTables { one: [[(0, 0); 4]; 9], two: [[(0, 0, 0); 16]; 3] };
        for kind in CliffordKind::ALL {
            let images = kind.generator_images();
            let arity = kind.arity();
            for code in 0..(1u8 << (2 * arity)) {
                // σ = i^{#Y} X^x Z^z per qubit, images multiplied in that order
                let mut acc = PauliWord::identity(2);
                let mut ny = 0u8;
                for (q, (img_x, img_z)) in images.iter().enumerate() {
                    let c = (code >> (2 * q)) & 3;
                    if c & 1 == 1 {
                        acc = acc.multiply(img_x).unwrap();
                    }
                    if c & 2 == 2 {
                        acc = acc.multiply(img_z).unwrap();
                    }
                    if c == 3 {
                        ny += 1;
                    }
                }
                acc.add_phase(ny);
                debug_assert!(acc.is_hermitian());
                let sign = acc.phase_pow() >> 1;
                if arity == 1 {
                    t.one[kind as usize][code as usize] = (acc.get(0).code(), sign);
                } else {
                    t.two[kind.two_index()][code as usize] = (acc.get(0).code(), acc.get(1).code(), sign);
                }
            }
        }
        t
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CliffordGate {
    pub kind: CliffordKind,
    qs: [usize; 2],
}

impl CliffordGate {
    pub fn new(kind: CliffordKind, qubits: &[usize]) -> Result<Self> {
        if qubits.len() != kind.arity() {
            return Err(Error::Invalid(format!("{} takes {} qubit(s), got {}", kind.name(), kind.arity(), qubits.len())));
        }
        if kind.arity() == 2 && qubits[0] == qubits[1] {
            return Err(Error::Invalid(format!("{} needs distinct qubits", kind.name())));
        }
        Ok(CliffordGate { kind, qs: [qubits[0], *qubits.get(1).unwrap_or(&qubits[0])] })
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qs[..self.kind.arity()]
    }

    #[inline]
    pub(crate) fn pair(&self) -> (usize, usize) {
        (self.qs[0], self.qs[1])
    }
}

/// `g·p·g†` (forward) or `g†·p·g` (backward).
pub fn conjugate_clifford(g: &CliffordGate, p: &PauliWord, dir: Direction) -> Result<PauliWord> {
    let mut out = p.clone();
    out.apply_clifford(g, dir)?;
    Ok(out)
}

/// Conjugation by `R = exp(-i θ/2 G)` at `θ = k·π/2`: forward `R p R†`,
/// backward `R† p R`.
pub fn conjugate_rotation_discrete(generator: &PauliWord, quarter_turns: u8, p: &PauliWord, dir: Direction) -> Result<PauliWord> {
    generator.check_dim(p)?;
    if !generator.is_hermitian() {
        return Err(Error::InvalidGenerator(format!("{generator} is not Hermitian")));
    }
    let mut sites = generator.sites();
    if generator.phase_pow() == 2 {
        // exp(-iθ/2 (−G)) at θ equals exp(-iθ/2 G) at −θ
        sites.sort();
        let mut out = p.clone();
        out.apply_rotation_sparse(&sites, (4 - (quarter_turns & 3)) & 3, dir);
        return Ok(out);
    }
    let mut out = p.clone();
    out.apply_rotation_sparse(&sites, quarter_turns, dir);
    Ok(out)
}
