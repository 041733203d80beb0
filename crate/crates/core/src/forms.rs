//! Elements of the amalgamated product `A *_C B` and their normal forms.
//!
//! Elements of `C` are stored as words over the basis alphabet `Z`; they are
//! pushed into one of the factors only when a syllable needs them.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stratify::{conjugate_into_witness, RepClass, Stability, Stratifier};
use crate::subgraph::{fold, Index, Transversal};
use crate::words::{cmp_shortlex, Alphabet, Letter, Tag, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// Ranks, embeddings of `Z`, and the derived subgroup graphs and transversals.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    a: Alphabet,
    b: Alphabet,
    z: Alphabet,
    u: Vec<Word>,
    v: Vec<Word>,
    strat: [Stratifier; 2],
    text: String,
}

fn side_index(side: Side) -> usize {
    match side {
        Side::A => 0,
        Side::B => 1,
    }
}

impl GroupSpec {
    pub fn new(rank_a: u32, rank_b: u32, rank_c: u32, u: Vec<Word>, v: Vec<Word>, radius: Option<usize>) -> Result<Self> {
        let a = Alphabet::new(rank_a, Tag::A).map_err(|e| Error::Config(e.to_string()))?;
        let b = Alphabet::new(rank_b, Tag::B).map_err(|e| Error::Config(e.to_string()))?;
        let z = Alphabet::new(rank_c, Tag::C).map_err(|e| Error::Config(e.to_string()))?;
        if u.len() != rank_c as usize || v.len() != rank_c as usize {
            return Err(Error::Config(format!(
                "expected {rank_c} embedding words per side, got {} and {}",
                u.len(),
                v.len()
            )));
        }
        let mut strat = Vec::new();
        for (alpha, words, name) in [(a, &u, "u_z"), (b, &v, "v_z")] {
            let g = fold(alpha, words).map_err(|e| Error::Config(e.to_string()))?;
            if g.cycle_rank() != rank_c as usize {
                return Err(Error::Config(format!(
                    "the {name} words generate a subgroup of rank {}, not a free basis of rank {rank_c}",
                    g.cycle_rank()
                )));
            }
            strat.push(Stratifier::new(Transversal::new(g), radius));
        }
        let mut text = format!("rank_a = {rank_a}\nrank_b = {rank_b}\nrank_c = {rank_c}\n");
        for w in &u {
            text.push_str(&format!("u_z = {w}\n"));
        }
        for w in &v {
            text.push_str(&format!("v_z = {w}\n"));
        }
        let strat: [Stratifier; 2] = strat.try_into().unwrap();
        Ok(GroupSpec { a, b, z, u, v, strat, text })
    }

    /// Parses the `key = value` spec format; `#` starts a comment.
    pub fn parse(src: &str, radius: Option<usize>) -> Result<Self> {
        let mut ranks = [None, None, None];
        let mut us: Vec<String> = Vec::new();
        let mut vs: Vec<String> = Vec::new();
        for (no, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let rank = |v: &str| v.parse::<u32>().map_err(|_| Error::Config(format!("line {}: bad rank {v:?}", no + 1)));
            match key {
                "rank_a" => ranks[0] = Some(rank(value)?),
                "rank_b" => ranks[1] = Some(rank(value)?),
                "rank_c" => ranks[2] = Some(rank(value)?),
                "u_z" => us.push(value.to_string()),
                "v_z" => vs.push(value.to_string()),
                other => return Err(Error::Config(format!("line {}: unknown key {other:?}", no + 1))),
            }
        }
        let [Some(ra), Some(rb), Some(rc)] = ranks else {
            return Err(Error::Config("rank_a, rank_b and rank_c are required".into()));
        };
        let a = Alphabet::new(ra, Tag::A).map_err(|e| Error::Config(e.to_string()))?;
        let b = Alphabet::new(rb, Tag::B).map_err(|e| Error::Config(e.to_string()))?;
        let parse_all = |alpha: Alphabet, ws: &[String]| -> Result<Vec<Word>> {
            ws.iter().map(|w| Word::parse(alpha, w).map_err(|e| Error::Config(e.to_string()))).collect()
        };
        let u = parse_all(a, &us)?;
        let v = parse_all(b, &vs)?;
        GroupSpec::new(ra, rb, rc, u, v, radius)
    }

    pub fn from_file(path: &Path, radius: Option<usize>) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        GroupSpec::parse(&src, radius)
    }

    /// Canonical text of the spec, used for hashing.
    pub fn canonical_text(&self) -> &str {
        &self.text
    }

    pub fn alphabet(&self, side: Side) -> Alphabet {
        match side {
            Side::A => self.a,
            Side::B => self.b,
        }
    }

    pub fn z_alphabet(&self) -> Alphabet {
        self.z
    }

    pub fn embedding(&self, side: Side) -> &[Word] {
        match side {
            Side::A => &self.u,
            Side::B => &self.v,
        }
    }

    pub fn stratifier(&self, side: Side) -> &Stratifier {
        &self.strat[side_index(side)]
    }

    pub fn transversal(&self, side: Side) -> &Transversal {
        self.strat[side_index(side)].transversal()
    }

    pub fn index(&self, side: Side) -> Index {
        self.transversal(side).graph().index()
    }

    /// First side on which C has infinite index.
    pub fn infinite_side(&self) -> Option<Side> {
        [Side::A, Side::B].into_iter().find(|&s| self.index(s) == Index::Infinite)
    }

    /// Image of a `Z`-word in the given factor.
    pub fn substitute(&self, side: Side, z: &Word) -> Word {
        let emb = self.embedding(side);
        let mut out = Word::identity(self.alphabet(side));
        for &l in z.letters() {
            let g = &emb[l.unsigned_abs() as usize - 1];
            out = if l > 0 { out.mul(g) } else { out.mul(&g.inverse()) };
        }
        out
    }

    /// Expresses `c ∈ C` (given in the factor `side`) as a `Z`-word.
    pub fn to_z(&self, side: Side, c: &Word) -> Result<Word> {
        match self.transversal(side).graph().membership(c) {
            (true, Some(z)) => Ok(z),
            _ => Err(Error::Precondition(format!("{c} is not in the amalgamated subgroup"))),
        }
    }

    pub fn in_c(&self, side: Side, w: &Word) -> bool {
        self.transversal(side).graph().accepts(w.letters())
    }

    /// Moves `c ∈ C` from `from` into the other factor.
    pub fn translate_c(&self, c: &Word, from: Side) -> Result<Word> {
        let z = self.to_z(from, c)?;
        Ok(self.substitute(from.other(), &z))
    }

    /// Letters of a syllable sequence in the combined alphabet: B letters are shifted past A's.
    pub fn flatten(&self, syllables: &[(Side, Word)]) -> Vec<Letter> {
        let shift = self.a.rank as Letter;
        let mut out = Vec::new();
        for (side, w) in syllables {
            match side {
                Side::A => out.extend_from_slice(w.letters()),
                Side::B => out.extend(w.letters().iter().map(|&l| l.signum() * (l.abs() + shift))),
            }
        }
        out
    }

    /// Parses a syllable, trying the A alphabet first.
    pub fn parse_syllable(&self, s: &str) -> Result<(Side, Word)> {
        Word::parse(self.a, s)
            .map(|w| (Side::A, w))
            .or_else(|_| Word::parse(self.b, s).map(|w| (Side::B, w)))
            .map_err(|_| Error::Malformed(format!("syllable {s:?} is in neither factor")))
    }

    /// Parses `[z] a a | x`; the bracketed `Z`-word is optional.
    pub fn parse_element(&self, s: &str) -> Result<MixedWord> {
        let mut rest = s.trim();
        let mut syl = Vec::new();
        if let Some(tail) = rest.strip_prefix('[') {
            let (head, after) =
                tail.split_once(']').ok_or_else(|| Error::Malformed(format!("unclosed head in {s:?}")))?;
            let z = Word::parse(self.z, head)?;
            syl.push((Side::A, self.substitute(Side::A, &z)));
            rest = after.trim();
        }
        if !rest.is_empty() && rest != "1" {
            for part in rest.split('|') {
                syl.push(self.parse_syllable(part)?);
            }
        }
        Ok(MixedWord::new(syl))
    }
}

/// An element written as alternating nontrivial syllables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MixedWord {
    syllables: Vec<(Side, Word)>,
}

impl MixedWord {
    /// Merges adjacent syllables of the same factor and drops trivial ones.
    pub fn new(raw: Vec<(Side, Word)>) -> Self {
        let mut out: Vec<(Side, Word)> = Vec::with_capacity(raw.len());
        for (side, w) in raw {
            if w.is_empty() {
                continue;
            }
            match out.last_mut() {
                Some((s, last)) if *s == side => {
                    let merged = last.mul(&w);
                    if merged.is_empty() {
                        out.pop();
                    } else {
                        *last = merged;
                    }
                }
                _ => out.push((side, w)),
            }
        }
        MixedWord { syllables: out }
    }

    pub fn identity() -> Self {
        MixedWord { syllables: Vec::new() }
    }

    pub fn syllables(&self) -> &[(Side, Word)] {
        &self.syllables
    }

    pub fn len(&self) -> usize {
        self.syllables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn inverse(&self) -> MixedWord {
        MixedWord { syllables: self.syllables.iter().rev().map(|(s, w)| (*s, w.inverse())).collect() }
    }

    pub fn mul(&self, other: &MixedWord) -> MixedWord {
        MixedWord::new(self.syllables.iter().chain(&other.syllables).cloned().collect())
    }
}

impl fmt::Display for MixedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.syllables.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self.syllables.iter().map(|(_, w)| w.render()).collect();
        f.write_str(&parts.join(" | "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    EF,
    RF,
    CNF,
    CRF,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::EF, Kind::RF, Kind::CNF, Kind::CRF];

    pub fn name(self) -> &'static str {
        match self {
            Kind::EF => "ef",
            Kind::RF => "rf",
            Kind::CNF => "cnf",
            Kind::CRF => "crf",
        }
    }
}

/// A normal form `c·g_1⋯g_k` with the head `c` kept as a `Z`-word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormalForm {
    pub kind: Kind,
    pub head: Word,
    pub body: Vec<(Side, Word)>,
    /// For cyclically reduced forms: `h` with `g = h·w·h⁻¹`.
    pub conjugator: Option<MixedWord>,
}

impl NormalForm {
    pub fn k(&self) -> usize {
        self.body.len()
    }

    /// The element as a mixed word, with the head placed in factor A.
    pub fn to_mixed(&self, spec: &GroupSpec) -> MixedWord {
        let mut syl = vec![(Side::A, spec.substitute(Side::A, &self.head))];
        syl.extend(self.body.iter().cloned());
        MixedWord::new(syl)
    }

    pub fn render(&self) -> String {
        let body = MixedWord { syllables: self.body.clone() }.to_string();
        if self.head.is_empty() {
            body
        } else if self.body.is_empty() {
            format!("[{}]", self.head)
        } else {
            format!("[{}] {}", self.head, body)
        }
    }

    /// Checks the defining conditions of the form's kind.
    pub fn validate(&self, spec: &GroupSpec) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(format!("{} form {}: {m}", self.kind.name(), self.render())));
        for w in self.body.windows(2) {
            if w[0].0 == w[1].0 {
                return bad("adjacent syllables in the same factor".into());
            }
        }
        if self.body.iter().any(|(_, w)| w.is_empty()) {
            return bad("trivial syllable".into());
        }
        match self.kind {
            Kind::EF => {}
            Kind::RF => {
                if self.body.iter().any(|(s, w)| spec.in_c(*s, w)) {
                    return bad("syllable in C".into());
                }
                if !self.body.is_empty() && !self.head.is_empty() {
                    return bad("head must be absorbed when k ≥ 1".into());
                }
            }
            Kind::CNF => {
                for (s, w) in &self.body {
                    if !spec.transversal(*s).is_representative(w.letters()) {
                        return bad(format!("{w} is not a representative"));
                    }
                }
            }
            Kind::CRF => {
                let k = self.body.len();
                if self.body.iter().any(|(s, w)| spec.in_c(*s, w)) {
                    return bad("syllable in C".into());
                }
                if k == 1 {
                    let (s, w) = &self.body[0];
                    if crate::stratify::conjugate_into(w, spec.transversal(*s).graph()) {
                        return bad("single syllable is conjugate into C".into());
                    }
                } else if k > 1 && k % 2 == 1 {
                    return bad("odd number of syllables".into());
                }
            }
        }
        Ok(())
    }
}

/// Freely reduced alternating form of the input.
pub fn to_elementary_form(g: &MixedWord, spec: &GroupSpec) -> NormalForm {
    NormalForm {
        kind: Kind::EF,
        head: Word::identity(spec.z),
        body: g.syllables.clone(),
        conjugator: None,
    }
}

pub fn to_reduced_form(g: &MixedWord, spec: &GroupSpec) -> NormalForm {
    let mut syl = g.syllables.clone();
    loop {
        let Some(i) = syl.iter().position(|(s, w)| spec.in_c(*s, w)) else { break };
        if syl.len() == 1 {
            let (s, w) = &syl[0];
            let head = spec.to_z(*s, w).expect("syllable accepted by the subgroup graph");
            return NormalForm { kind: Kind::RF, head, body: Vec::new(), conjugator: None };
        }
        let (side, c) = syl.remove(i);
        let t = spec.translate_c(&c, side).expect("syllable accepted by the subgroup graph");
        if i > 0 {
            syl[i - 1].1 = syl[i - 1].1.mul(&t);
        } else {
            syl[0].1 = t.mul(&syl[0].1);
        }
        syl = MixedWord::new(syl).syllables;
    }
    NormalForm { kind: Kind::RF, head: Word::identity(spec.z), body: syl, conjugator: None }
}

/// The unique form `c·p_1⋯p_l` with every `p_i` a nontrivial coset representative.
pub fn to_canonical_form(g: &MixedWord, spec: &GroupSpec) -> NormalForm {
    let rf = to_reduced_form(g, spec);
    let mut carry = rf.head.clone();
    let mut body = rf.body;
    for (side, w) in body.iter_mut().rev() {
        let h = w.mul(&spec.substitute(*side, &carry));
        let (c, s) = spec.transversal(*side).coset_decompose(&h);
        carry = spec.to_z(*side, &c).expect("coset decomposition yields a subgroup element");
        *w = s;
    }
    NormalForm { kind: Kind::CNF, head: carry, body, conjugator: None }
}

/// Cyclically reduced form `w` and conjugator `h` with `g = h·w·h⁻¹`.
pub fn to_cyclically_reduced_form(g: &MixedWord, spec: &GroupSpec) -> NormalForm {
    let mut h = MixedWord::identity();
    let mut rf = to_reduced_form(g, spec);
    loop {
        let k = rf.body.len();
        if k >= 3 && k % 2 == 1 {
            let (side, last) = rf.body.last().cloned().unwrap();
            h = h.mul(&MixedWord::new(vec![(side, last.inverse())]));
            let mut syl = vec![(side, last)];
            syl.extend(rf.body[..k - 1].iter().cloned());
            rf = to_reduced_form(&MixedWord::new(syl), spec);
            continue;
        }
        break;
    }
    let k = rf.body.len();
    if k == 1 {
        let (side, w) = rf.body[0].clone();
        if let Some((x, c)) = conjugate_into_witness(&w, spec.transversal(side)) {
            h = h.mul(&MixedWord::new(vec![(side, x)]));
            let head = spec.to_z(side, &c).expect("conjugate witness lies in the subgroup");
            return NormalForm { kind: Kind::CRF, head, body: Vec::new(), conjugator: Some(h) };
        }
    }
    let mut body = rf.body;
    if k >= 2 {
        let mut best = 0;
        let mut best_key = spec.flatten(&body);
        for j in 1..k {
            let rot: Vec<(Side, Word)> = body[j..].iter().chain(&body[..j]).cloned().collect();
            let key = spec.flatten(&rot);
            if cmp_shortlex(&key, &best_key).is_lt() {
                best = j;
                best_key = key;
            }
        }
        if best > 0 {
            h = h.mul(&MixedWord::new(body[..best].to_vec()));
            body.rotate_left(best);
        }
    }
    NormalForm { kind: Kind::CRF, head: rf.head, body, conjugator: Some(h) }
}

pub fn normalize(kind: Kind, g: &MixedWord, spec: &GroupSpec) -> NormalForm {
    match kind {
        Kind::EF => to_elementary_form(g, spec),
        Kind::RF => to_reduced_form(g, spec),
        Kind::CNF => to_canonical_form(g, spec),
        Kind::CRF => to_cyclically_reduced_form(g, spec),
    }
}

/// Regular/stable verdict of a form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormVerdict {
    pub regular: bool,
    pub stable: bool,
    /// Not certified stable, but some syllable could only be shown stable up to the search radius.
    pub indeterminate: bool,
}

impl FormVerdict {
    pub fn singular(&self) -> bool {
        !self.regular
    }

    pub fn unstable(&self) -> bool {
        !self.stable
    }
}

/// Class of the coset representative of a syllable.
pub fn syllable_class(side: Side, w: &Word, spec: &GroupSpec) -> RepClass {
    let strat = spec.stratifier(side);
    let (_, s) = strat.transversal().coset_decompose(w);
    strat.classify(&s).expect("coset representatives are representatives")
}

/// A form is regular when some syllable is regular and stable when some syllable is
/// certified stable. Forms without syllables count as singular and unstable.
pub fn classify_form(nf: &NormalForm, spec: &GroupSpec) -> FormVerdict {
    let mut v = FormVerdict { regular: false, stable: false, indeterminate: false };
    let mut up_to = false;
    for (side, w) in &nf.body {
        let c = syllable_class(*side, w, spec);
        v.regular |= !c.singular;
        match c.stability {
            Stability::StableCertified => v.stable = true,
            Stability::StableUpTo(_) => up_to = true,
            Stability::Unstable(_) => {}
        }
    }
    v.indeterminate = !v.stable && up_to;
    v
}
