//! Free-group words over ranked alphabets.
//!
//! A letter is a nonzero signed integer: `i` stands for the generator
//! `x_i` and `-i` for its inverse. Words are always kept freely reduced.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

pub type Letter = i32;

const A_SYMBOLS: &[u8] = b"abcdefgh";
const B_SYMBOLS: &[u8] = b"xyuvwpqr";

/// Which alphabet of a group specification a word lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alphabet {
    pub rank: u32,
    pub tag: Tag,
}

impl Alphabet {
    pub fn new(rank: u32, tag: Tag) -> Result<Self> {
        if rank == 0 {
            return Err(Error::Malformed("alphabet rank must be positive".into()));
        }
        let cap = match tag {
            Tag::A => A_SYMBOLS.len() as u32,
            Tag::B => B_SYMBOLS.len() as u32,
            Tag::C => 99,
        };
        if rank > cap {
            return Err(Error::Malformed(format!("rank {rank} exceeds the {cap} symbols available")));
        }
        Ok(Alphabet { rank, tag })
    }

    /// Number of signed letters, 2r.
    pub fn degree(&self) -> usize {
        2 * self.rank as usize
    }

    pub fn contains(&self, l: Letter) -> bool {
        l != 0 && l.unsigned_abs() <= self.rank
    }

    /// Signed letters in canonical order x1 < x1⁻¹ < x2 < ...
    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        (0..self.degree()).map(letter_of_slot)
    }

    pub fn symbol(&self, l: Letter) -> String {
        let i = (l.unsigned_abs() - 1) as usize;
        let base = match self.tag {
            Tag::A => (A_SYMBOLS[i] as char).to_string(),
            Tag::B => (B_SYMBOLS[i] as char).to_string(),
            Tag::C if self.rank == 1 => "z".to_string(),
            Tag::C => format!("z{}", i + 1),
        };
        if l < 0 {
            base.to_uppercase()
        } else {
            base
        }
    }

    /// Parses a single symbol at the start of `s`; returns the letter and bytes consumed.
    fn parse_symbol(&self, s: &str) -> Option<(Letter, usize)> {
        let c = s.chars().next()?;
        let lower = c.to_ascii_lowercase();
        let sign = if c.is_ascii_uppercase() { -1 } else { 1 };
        match self.tag {
            Tag::A | Tag::B => {
                let table = if self.tag == Tag::A { A_SYMBOLS } else { B_SYMBOLS };
                let i = table.iter().position(|&b| b as char == lower)?;
                let l = (i + 1) as Letter;
                if l as u32 > self.rank {
                    return None;
                }
                Some((sign * l, 1))
            }
            Tag::C => {
                if lower != 'z' {
                    return None;
                }
                let digits: String = s[1..].chars().take_while(|d| d.is_ascii_digit()).collect();
                let idx = if digits.is_empty() { 1 } else { digits.parse::<u32>().ok()? };
                if idx == 0 || idx > self.rank {
                    return None;
                }
                Some((sign * idx as Letter, 1 + digits.len()))
            }
        }
    }
}

/// Position of a signed letter in the canonical order: x_i ↦ 2(i-1), x_i⁻¹ ↦ 2(i-1)+1.
#[inline]
pub fn slot(l: Letter) -> usize {
    2 * (l.unsigned_abs() as usize - 1) + usize::from(l < 0)
}

#[inline]
pub fn letter_of_slot(s: usize) -> Letter {
    let i = (s / 2 + 1) as Letter;
    if s % 2 == 0 {
        i
    } else {
        -i
    }
}

/// Free reduction of a raw letter sequence.
pub fn reduce_letters(raw: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(raw.len());
    for &l in raw {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn invert_letters(w: &[Letter]) -> Vec<Letter> {
    w.iter().rev().map(|l| -l).collect()
}

/// Reduced product of two reduced sequences.
pub fn mul_letters(u: &[Letter], v: &[Letter]) -> Vec<Letter> {
    let mut k = 0;
    while k < u.len() && k < v.len() && u[u.len() - 1 - k] == -v[k] {
        k += 1;
    }
    let mut out = Vec::with_capacity(u.len() + v.len() - 2 * k);
    out.extend_from_slice(&u[..u.len() - k]);
    out.extend_from_slice(&v[k..]);
    out
}

pub fn is_reduced(w: &[Letter]) -> bool {
    w.windows(2).all(|p| p[0] != -p[1])
}

/// Shortlex comparison using the canonical letter order.
pub fn cmp_shortlex(u: &[Letter], v: &[Letter]) -> Ordering {
    u.len()
        .cmp(&v.len())
        .then_with(|| u.iter().map(|&l| slot(l)).cmp(v.iter().map(|&l| slot(l))))
}

/// A freely reduced word together with its alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    alphabet: Alphabet,
    letters: Vec<Letter>,
}

impl Word {
    pub fn identity(alphabet: Alphabet) -> Self {
        Word { alphabet, letters: Vec::new() }
    }

    /// Builds a word from letters already known to be reduced and in range.
    pub(crate) fn from_reduced(alphabet: Alphabet, letters: Vec<Letter>) -> Self {
        debug_assert!(is_reduced(&letters));
        debug_assert!(letters.iter().all(|&l| alphabet.contains(l)));
        Word { alphabet, letters }
    }

    pub fn new(alphabet: Alphabet, raw: &[Letter]) -> Result<Self> {
        free_reduce(raw, alphabet)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn into_letters(self) -> Vec<Letter> {
        self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word { alphabet: self.alphabet, letters: invert_letters(&self.letters) }
    }

    /// Reduced product; panics on alphabet mismatch (use [`concat_reduce`] for the checked form).
    pub fn mul(&self, other: &Word) -> Word {
        assert_eq!(self.alphabet, other.alphabet, "alphabet mismatch");
        Word { alphabet: self.alphabet, letters: mul_letters(&self.letters, &other.letters) }
    }

    pub fn render(&self) -> String {
        if self.letters.is_empty() {
            return "1".to_string();
        }
        self.letters.iter().map(|&l| self.alphabet.symbol(l)).collect::<Vec<_>>().join(" ")
    }

    /// Parses words such as `a B a`, `aBa` or `z2 Z1`; `1` and the empty string denote the identity.
    pub fn parse(alphabet: Alphabet, s: &str) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() || t == "1" || t == "ε" {
            return Ok(Word::identity(alphabet));
        }
        let mut raw = Vec::new();
        let mut rest = t;
        while !rest.is_empty() {
            let c = rest.chars().next().unwrap();
            if c.is_whitespace() {
                rest = &rest[c.len_utf8()..];
                continue;
            }
            let (l, used) = alphabet
                .parse_symbol(rest)
                .ok_or_else(|| Error::Malformed(format!("unknown symbol in {s:?} for alphabet {:?}", alphabet.tag)))?;
            raw.push(l);
            rest = &rest[used..];
        }
        free_reduce(&raw, alphabet)
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_shortlex(&self.letters, &other.letters)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn free_reduce(raw: &[Letter], alphabet: Alphabet) -> Result<Word> {
    if let Some(&bad) = raw.iter().find(|&&l| !alphabet.contains(l)) {
        return Err(Error::Malformed(format!("letter index {bad} outside rank {}", alphabet.rank)));
    }
    Ok(Word { alphabet, letters: reduce_letters(raw) })
}

pub fn concat_reduce(u: &Word, v: &Word) -> Result<Word> {
    if u.alphabet != v.alphabet {
        return Err(Error::AlphabetMismatch(format!("{:?} vs {:?}", u.alphabet, v.alphabet)));
    }
    Ok(u.mul(v))
}

/// Splits `w` as conjugator · core · conjugator⁻¹ with `core` cyclically reduced.
pub fn cyclic_reduce(w: &Word) -> (Word, Word) {
    let l = &w.letters;
    let mut k = 0;
    while 2 * k + 1 < l.len() && l[k] == -l[l.len() - 1 - k] {
        k += 1;
    }
    let core = l[k..l.len() - k].to_vec();
    let conj = l[..k].to_vec();
    (Word::from_reduced(w.alphabet, core), Word::from_reduced(w.alphabet, conj))
}

/// Number of reduced words of length n in a free group of rank r.
pub fn sphere_count(rank: u32, n: usize) -> u128 {
    if n == 0 {
        return 1;
    }
    let r = rank as u128;
    2 * r * (2 * r - 1).pow(n as u32 - 1)
}

/// Same as [`sphere_count`] in floating point, for lengths where the integer overflows.
pub fn sphere_count_f64(rank: u32, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let r = rank as f64;
    2.0 * r * (2.0 * r - 1.0).powi(n as i32 - 1)
}

/// Iterates the reduced words of length n in shortlex order.
#[derive(Debug, Clone)]
pub struct SphereIter {
    rank: u32,
    choice: Vec<usize>,
    letters: Vec<Letter>,
    started: bool,
    done: bool,
}

impl SphereIter {
    pub fn new(rank: u32, n: usize) -> Self {
        let mut it = SphereIter { rank, choice: vec![0; n], letters: vec![0; n], started: false, done: false };
        it.fill_from(0);
        it
    }

    fn letter_at(&self, pos: usize, c: usize) -> Letter {
        if pos == 0 {
            return letter_of_slot(c);
        }
        let forbidden = slot(-self.letters[pos - 1]);
        letter_of_slot(if c >= forbidden { c + 1 } else { c })
    }

    fn fill_from(&mut self, pos: usize) {
        for p in pos..self.choice.len() {
            self.letters[p] = self.letter_at(p, self.choice[p]);
        }
    }

    fn advance(&mut self) -> bool {
        let d = 2 * self.rank as usize;
        let mut p = self.choice.len();
        while p > 0 {
            p -= 1;
            let limit = if p == 0 { d } else { d - 1 };
            if self.choice[p] + 1 < limit {
                self.choice[p] += 1;
                for q in p + 1..self.choice.len() {
                    self.choice[q] = 0;
                }
                self.fill_from(p);
                return true;
            }
        }
        false
    }

    /// Returns the next word as raw letters without allocating.
    pub fn next_letters(&mut self) -> Option<&[Letter]> {
        if self.done {
            return None;
        }
        if self.started && !self.advance() {
            self.done = true;
            return None;
        }
        self.started = true;
        if self.choice.is_empty() {
            self.done = true;
        }
        Some(&self.letters)
    }
}

impl Iterator for SphereIter {
    type Item = Vec<Letter>;

    fn next(&mut self) -> Option<Vec<Letter>> {
        self.next_letters().map(|l| l.to_vec())
    }
}

/// Reduced words of length n over `alphabet`, in shortlex order.
pub fn enumerate_sphere(alphabet: Alphabet, n: usize) -> impl Iterator<Item = Word> {
    SphereIter::new(alphabet.rank, n).map(move |l| Word::from_reduced(alphabet, l))
}

/// Reduced words of length at most n, in shortlex order.
pub fn enumerate_ball(alphabet: Alphabet, n: usize) -> impl Iterator<Item = Word> {
    (0..=n).flat_map(move |k| enumerate_sphere(alphabet, k))
}
