//! Deterministic automata over signed letters, accepting only freely reduced words.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;

use crate::error::{Error, Result};
use crate::forms::{GroupSpec, Kind, Side};
use crate::measures::{fit_decay, DecayFit};
use crate::stratify::{CosetStrata, ExternalRep, RepClass, Stability};
use crate::subgraph::Transversal;
use crate::words::{enumerate_sphere, is_reduced, letter_of_slot, slot, Alphabet, Letter, Word};

/// Minimal trimmed automaton. State 0 is the start state.
///
/// Letters of the k-th factor alphabet are shifted past the ranks of the earlier factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAutomaton {
    factors: Vec<Alphabet>,
    rank: u32,
    trans: Vec<Vec<Option<usize>>>,
    accepting: Vec<bool>,
    prefix_closed: bool,
}

const NO_LAST: usize = usize::MAX;

impl GroupAutomaton {
    /// Builds the reduced-word language of a raw DFA whose state 0 is the start.
    pub fn from_dfa(factors: Vec<Alphabet>, trans: &[Vec<Option<usize>>], accepting: &[bool]) -> Self {
        let rank: u32 = factors.iter().map(|a| a.rank).sum();
        let d = 2 * rank as usize;
        let mut ids: HashMap<(usize, usize), usize> = HashMap::from([((0, NO_LAST), 0)]);
        let mut states = vec![(0usize, NO_LAST)];
        let mut ptrans: Vec<Vec<Option<usize>>> = Vec::new();
        let mut pacc = Vec::new();
        let mut i = 0;
        while i < states.len() {
            let (q, last) = states[i];
            let mut row = vec![None; d];
            for (s, cell) in row.iter_mut().enumerate() {
                if last != NO_LAST && s == last ^ 1 {
                    continue;
                }
                if let Some(q2) = trans[q][s] {
                    let key = (q2, s);
                    let id = *ids.entry(key).or_insert_with(|| {
                        states.push(key);
                        states.len() - 1
                    });
                    *cell = Some(id);
                }
            }
            ptrans.push(row);
            pacc.push(accepting[q]);
            i += 1;
        }
        let n = states.len();
        let mut rev = vec![Vec::new(); n];
        for (q, row) in ptrans.iter().enumerate() {
            for &t in row.iter().flatten() {
                rev[t].push(q);
            }
        }
        let mut live = pacc.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&q| live[q]).collect();
        while let Some(q) = queue.pop_front() {
            for &p in &rev[q] {
                if !live[p] {
                    live[p] = true;
                    queue.push_back(p);
                }
            }
        }
        if !live[0] {
            return GroupAutomaton { factors, rank, trans: vec![vec![None; d]], accepting: vec![false], prefix_closed: true };
        }
        for row in ptrans.iter_mut() {
            for t in row.iter_mut() {
                if t.is_some_and(|x| !live[x]) {
                    *t = None;
                }
            }
        }
        minimize(factors, rank, &ptrans, &pacc, &live)
    }

    /// All reduced words over one alphabet.
    pub fn full(alphabet: Alphabet) -> Self {
        let d = alphabet.degree();
        Self::from_dfa(vec![alphabet], &[vec![Some(0); d]], &[true])
    }

    /// A finite set of reduced words.
    pub fn from_words(alphabet: Alphabet, words: &[Word]) -> Self {
        let d = alphabet.degree();
        let mut trans = vec![vec![None; d]];
        let mut acc = vec![false];
        for w in words {
            let mut q = 0;
            for &l in w.letters() {
                q = match trans[q][slot(l)] {
                    Some(x) => x,
                    None => {
                        trans.push(vec![None; d]);
                        acc.push(false);
                        let x = trans.len() - 1;
                        trans[q][slot(l)] = Some(x);
                        x
                    }
                };
            }
            acc[q] = true;
        }
        Self::from_dfa(vec![alphabet], &trans, &acc)
    }

    pub fn factors(&self) -> &[Alphabet] {
        &self.factors
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn state_count(&self) -> usize {
        self.trans.len()
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn transition(&self, q: usize, l: Letter) -> Option<usize> {
        self.trans[q].get(slot(l)).copied().flatten()
    }

    pub fn is_prefix_closed(&self) -> bool {
        self.prefix_closed
    }

    /// State after reading `w`, or None if the path dies.
    pub fn run(&self, w: &[Letter]) -> Option<usize> {
        if !is_reduced(w) || w.iter().any(|l| l.unsigned_abs() > self.rank || *l == 0) {
            return None;
        }
        w.iter().try_fold(0, |q, &l| self.trans[q][slot(l)])
    }

    pub fn accepts(&self, w: &[Letter]) -> bool {
        self.run(w).is_some_and(|q| self.accepting[q])
    }

    fn out_degree(&self, q: usize, last: usize) -> usize {
        self.trans[q].iter().enumerate().filter(|(s, t)| t.is_some() && (last == NO_LAST || *s != last ^ 1)).count()
    }

    /// Product of `1/out-degree` along the path of `w` from `q`, entered after a letter of slot `last`.
    fn path_weight_from(&self, mut q: usize, mut last: usize, w: &[Letter]) -> Option<f64> {
        let mut p = 1.0;
        for &l in w {
            let s = slot(l);
            if last != NO_LAST && s == last ^ 1 {
                return None;
            }
            let next = self.trans[q][s]?;
            p /= self.out_degree(q, last) as f64;
            q = next;
            last = s;
        }
        Some(p)
    }

    /// Walk weight of a word of the language.
    pub fn lambda(&self, w: &[Letter]) -> Result<f64> {
        if !self.accepts(w) {
            return Err(Error::Domain("word is not in the language".into()));
        }
        Ok(self.path_weight_from(0, NO_LAST, w).unwrap())
    }

    /// Walk weight of `v` continued from the state reached by `u`.
    pub fn lambda_after(&self, u: &[Letter], v: &[Letter]) -> Result<f64> {
        let q = self.run(u).ok_or_else(|| Error::Domain("prefix is not readable".into()))?;
        let last = u.last().map_or(NO_LAST, |&l| slot(l));
        self.path_weight_from(q, last, v).ok_or_else(|| Error::Domain("continuation is not readable".into()))
    }

    pub fn lambda_exact(&self, w: &[Letter]) -> Result<BigRational> {
        if !self.accepts(w) {
            return Err(Error::Domain("word is not in the language".into()));
        }
        let (mut q, mut last) = (0, NO_LAST);
        let mut den = BigInt::from(1);
        for &l in w {
            den *= BigInt::from(self.out_degree(q, last));
            q = self.trans[q][slot(l)].unwrap();
            last = slot(l);
        }
        Ok(BigRational::new(BigInt::from(1), den))
    }

    /// Random accepted word: a uniform non-backtracking walk that may stop at accepting states
    /// with probability `stop`, restarted if it runs past `4·max_len` letters.
    pub fn sample_word<R: Rng + ?Sized>(&self, stop: f64, max_len: usize, rng: &mut R) -> Vec<Letter> {
        loop {
            let (mut q, mut last) = (0, NO_LAST);
            let mut w = Vec::new();
            loop {
                let opts: Vec<usize> = (0..self.trans[q].len())
                    .filter(|&s| self.trans[q][s].is_some() && (last == NO_LAST || s != last ^ 1))
                    .collect();
                if self.accepting[q] && (opts.is_empty() || w.len() >= max_len || rng.gen::<f64>() < stop) {
                    return w;
                }
                if opts.is_empty() || w.len() >= 4 * max_len {
                    break;
                }
                let s = opts[rng.gen_range(0..opts.len())];
                w.push(letter_of_slot(s));
                q = self.trans[q][s].unwrap();
                last = s;
            }
        }
    }

    /// Accepted words of length exactly n, in shortlex order.
    pub fn words(&self, n: usize) -> Vec<Vec<Letter>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect(0, n, &mut path, &mut out);
        out
    }

    fn collect(&self, q: usize, n: usize, path: &mut Vec<Letter>, out: &mut Vec<Vec<Letter>>) {
        if path.len() == n {
            if self.accepting[q] {
                out.push(path.clone());
            }
            return;
        }
        for s in 0..self.trans[q].len() {
            if path.last().is_some_and(|&l| slot(l) ^ 1 == s) {
                continue;
            }
            if let Some(t) = self.trans[q][s] {
                path.push(letter_of_slot(s));
                self.collect(t, n, path, out);
                path.pop();
            }
        }
    }

    /// `out[n]`: number of accepted words of length n.
    pub fn count_accepted(&self, n_max: usize) -> Vec<u128> {
        let d = 2 * self.rank as usize;
        let idx = |q: usize, last: usize| q * (d + 1) + if last == NO_LAST { d } else { last };
        let mut cur = vec![0u128; self.trans.len() * (d + 1)];
        cur[idx(0, NO_LAST)] = 1;
        let mut out = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            out.push(
                (0..self.trans.len())
                    .filter(|&q| self.accepting[q])
                    .map(|q| (0..=d).map(|j| cur[q * (d + 1) + j]).sum::<u128>())
                    .sum(),
            );
            if n == n_max {
                break;
            }
            let mut next = vec![0u128; cur.len()];
            for q in 0..self.trans.len() {
                for j in 0..=d {
                    let c = cur[q * (d + 1) + j];
                    if c == 0 {
                        continue;
                    }
                    let last = if j == d { NO_LAST } else { j };
                    for s in 0..d {
                        if last != NO_LAST && s == last ^ 1 {
                            continue;
                        }
                        if let Some(t) = self.trans[q][s] {
                            next[idx(t, s)] += c;
                        }
                    }
                }
            }
            cur = next;
        }
        out
    }

    fn walk_dp<T>(&self, r: &GroupAutomaton, n_max: usize, one: T, inv: impl Fn(usize) -> T) -> Result<Vec<T>>
    where
        T: Clone + Zero + Add<Output = T> + Mul<Output = T>,
    {
        if r.rank != self.rank {
            return Err(Error::AlphabetMismatch("automata over different alphabets".into()));
        }
        let d = 2 * self.rank as usize;
        let nr = r.trans.len() + 1;
        let dead = r.trans.len();
        let width = (d + 1) * nr;
        let idx = |q: usize, last: usize, p: usize| q * width + (if last == NO_LAST { d } else { last }) * nr + p;
        let mut cur = vec![T::zero(); self.trans.len() * width];
        cur[idx(0, NO_LAST, 0)] = one;
        let mut out = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let mut total = T::zero();
            for q in (0..self.trans.len()).filter(|&q| self.accepting[q]) {
                for j in 0..=d {
                    for p in (0..r.trans.len()).filter(|&p| r.accepting[p]) {
                        total = total + cur[q * width + j * nr + p].clone();
                    }
                }
            }
            out.push(total);
            if n == n_max {
                break;
            }
            let mut next = vec![T::zero(); cur.len()];
            for q in 0..self.trans.len() {
                for j in 0..=d {
                    let last = if j == d { NO_LAST } else { j };
                    let deg = self.out_degree(q, last);
                    if deg == 0 {
                        continue;
                    }
                    let w = inv(deg);
                    for p in 0..nr {
                        let m = &cur[q * width + j * nr + p];
                        if m.is_zero() {
                            continue;
                        }
                        let share = m.clone() * w.clone();
                        for s in 0..d {
                            if last != NO_LAST && s == last ^ 1 {
                                continue;
                            }
                            if let Some(t) = self.trans[q][s] {
                                let p2 = if p == dead { dead } else { r.trans[p][s].unwrap_or(dead) };
                                let k = idx(t, s, p2);
                                next[k] = next[k].clone() + share.clone();
                            }
                        }
                    }
                }
            }
            cur = next;
        }
        Ok(out)
    }

    /// `out[n] = f′_n(R, L)` with `L = self`, the walk mass of `R ∩ L ∩ S_n`.
    pub fn f_prime(&self, r: &GroupAutomaton, n_max: usize) -> Result<Vec<f64>> {
        self.walk_dp(r, n_max, 1.0, |d| 1.0 / d as f64)
    }

    pub fn f_prime_exact(&self, r: &GroupAutomaton, n_max: usize) -> Result<Vec<BigRational>> {
        self.walk_dp(r, n_max, BigRational::from_integer(1.into()), |d| {
            BigRational::new(BigInt::from(1), BigInt::from(d))
        })
    }

    /// `f′_n` of the words of length n satisfying `pred`, by enumeration.
    pub fn aggregate(&self, n: usize, pred: impl Fn(&[Letter]) -> bool) -> f64 {
        self.words(n).iter().filter(|w| pred(w)).map(|w| self.path_weight_from(0, NO_LAST, w).unwrap()).sum()
    }

    /// Language intersection.
    pub fn intersect(&self, other: &GroupAutomaton) -> Result<GroupAutomaton> {
        if other.rank != self.rank {
            return Err(Error::AlphabetMismatch("automata over different alphabets".into()));
        }
        let d = 2 * self.rank as usize;
        let mut ids = HashMap::from([((0usize, 0usize), 0usize)]);
        let mut pairs = vec![(0usize, 0usize)];
        let mut trans = Vec::new();
        let mut acc = Vec::new();
        let mut i = 0;
        while i < pairs.len() {
            let (a, b) = pairs[i];
            let mut row = vec![None; d];
            for (s, cell) in row.iter_mut().enumerate() {
                if let (Some(x), Some(y)) = (self.trans[a][s], other.trans[b][s]) {
                    let id = *ids.entry((x, y)).or_insert_with(|| {
                        pairs.push((x, y));
                        pairs.len() - 1
                    });
                    *cell = Some(id);
                }
            }
            trans.push(row);
            acc.push(self.accepting[a] && other.accepting[b]);
            i += 1;
        }
        Ok(Self::from_dfa(self.factors.clone(), &trans, &acc))
    }

    /// The L-cone `L ∩ C(u)`.
    pub fn cone(&self, u: &[Letter]) -> Result<GroupAutomaton> {
        if !is_reduced(u) {
            return Err(Error::Precondition("cone prefix must be reduced".into()));
        }
        let d = 2 * self.rank as usize;
        let n = u.len();
        let mut trans = vec![vec![None; d]; n + 1];
        for (i, &l) in u.iter().enumerate() {
            trans[i][slot(l)] = Some(i + 1);
        }
        trans[n] = vec![Some(n); d];
        let mut acc = vec![false; n + 1];
        acc[n] = true;
        self.intersect(&Self::from_dfa(self.factors.clone(), &trans, &acc))
    }

    fn symbol(&self, l: Letter) -> String {
        let mut base = 0;
        for a in &self.factors {
            if l.unsigned_abs() <= base + a.rank {
                return a.symbol(l.signum() * (l.unsigned_abs() - base) as Letter);
            }
            base += a.rank;
        }
        format!("?{l}")
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph automaton {\n  rankdir=LR;\n");
        for q in 0..self.trans.len() {
            let shape = if self.accepting[q] { "doublecircle" } else { "circle" };
            let _ = writeln!(s, "  q{q} [shape={shape}];");
        }
        for (q, row) in self.trans.iter().enumerate() {
            for (sl, t) in row.iter().enumerate() {
                if let Some(t) = t {
                    let _ = writeln!(s, "  q{q} -> q{t} [label=\"{}\"];", self.symbol(letter_of_slot(sl)));
                }
            }
        }
        s.push_str("}\n");
        s
    }

    /// `automaton`, `states`, `accepting` and one `trans` line per transition.
    pub fn to_text(&self) -> String {
        let mut s = format!("automaton {}\nstates {}\naccepting", self.rank, self.trans.len());
        for q in (0..self.trans.len()).filter(|&q| self.accepting[q]) {
            let _ = write!(s, " {q}");
        }
        s.push('\n');
        for (q, row) in self.trans.iter().enumerate() {
            for (sl, t) in row.iter().enumerate() {
                if let Some(t) = t {
                    let _ = writeln!(s, "trans {q} {} {t}", self.symbol(letter_of_slot(sl)));
                }
            }
        }
        s
    }
}

fn minimize(factors: Vec<Alphabet>, rank: u32, trans: &[Vec<Option<usize>>], acc: &[bool], live: &[bool]) -> GroupAutomaton {
    let states: Vec<usize> = (0..trans.len()).filter(|&q| live[q]).collect();
    let mut class = vec![usize::MAX; trans.len()];
    for &q in &states {
        class[q] = usize::from(acc[q]);
    }
    let mut count = 0;
    loop {
        let mut sigs: HashMap<(usize, Vec<Option<usize>>), usize> = HashMap::new();
        let mut next = class.clone();
        for &q in &states {
            let sig = (class[q], trans[q].iter().map(|t| t.map(|x| class[x])).collect());
            let n = sigs.len();
            next[q] = *sigs.entry(sig).or_insert(n);
        }
        let stable = sigs.len() == count;
        count = sigs.len();
        class = next;
        if stable {
            break;
        }
    }
    let mut order = vec![usize::MAX; trans.len()];
    let mut reps = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    let mut seen_class = HashMap::new();
    seen_class.insert(class[0], 0usize);
    order[0] = 0;
    reps.push(0);
    while let Some(q) = queue.pop_front() {
        for &t in trans[q].iter().flatten() {
            if !seen_class.contains_key(&class[t]) {
                seen_class.insert(class[t], reps.len());
                reps.push(t);
                queue.push_back(t);
            }
        }
    }
    let new_trans: Vec<Vec<Option<usize>>> =
        reps.iter().map(|&q| trans[q].iter().map(|t| t.map(|x| seen_class[&class[x]])).collect()).collect();
    let accepting: Vec<bool> = reps.iter().map(|&q| acc[q]).collect();
    let prefix_closed = accepting.iter().all(|&a| a);
    GroupAutomaton { factors, rank, trans: new_trans, accepting, prefix_closed }
}

/// Reduced words containing no word of `patterns` as a factor.
pub fn forbidden_subword_automaton(factors: Vec<Alphabet>, patterns: &[Vec<Letter>]) -> Result<GroupAutomaton> {
    let rank: u32 = factors.iter().map(|a| a.rank).sum();
    let d = 2 * rank as usize;
    if patterns.iter().all(|p| p.is_empty()) {
        return Err(Error::Degenerate("every forbidden word is trivial".into()));
    }
    if patterns.iter().any(|p| !is_reduced(p) || p.iter().any(|l| *l == 0 || l.unsigned_abs() > rank)) {
        return Err(Error::Precondition("forbidden words must be reduced words over the alphabet".into()));
    }
    let mut goto: Vec<Vec<Option<usize>>> = vec![vec![None; d]];
    let mut hit = vec![false];
    for p in patterns.iter().filter(|p| !p.is_empty()) {
        let mut q = 0;
        for &l in p {
            q = match goto[q][slot(l)] {
                Some(x) => x,
                None => {
                    goto.push(vec![None; d]);
                    hit.push(false);
                    let x = goto.len() - 1;
                    goto[q][slot(l)] = Some(x);
                    x
                }
            };
        }
        hit[q] = true;
    }
    let n = goto.len();
    let mut fail = vec![0usize; n];
    let mut delta = vec![vec![0usize; d]; n];
    let mut queue = VecDeque::new();
    for s in 0..d {
        match goto[0][s] {
            Some(x) => {
                delta[0][s] = x;
                queue.push_back(x);
            }
            None => delta[0][s] = 0,
        }
    }
    while let Some(q) = queue.pop_front() {
        hit[q] = hit[q] || hit[fail[q]];
        for s in 0..d {
            match goto[q][s] {
                Some(x) => {
                    fail[x] = if q == 0 { 0 } else { delta[fail[q]][s] };
                    delta[q][s] = x;
                    queue.push_back(x);
                }
                None => delta[q][s] = delta[fail[q]][s],
            }
        }
    }
    let trans: Vec<Vec<Option<usize>>> =
        (0..n).map(|q| (0..d).map(|s| Some(delta[q][s]).filter(|&t| !hit[t])).collect()).collect();
    let acc: Vec<bool> = (0..n).map(|q| !hit[q]).collect();
    Ok(GroupAutomaton::from_dfa(factors, &trans, &acc))
}

/// Alternating concatenations of nonempty `L`-blocks and `M`-blocks, together with ε.
pub fn free_product_regular(l: &GroupAutomaton, m: &GroupAutomaton) -> Result<GroupAutomaton> {
    if l.factors.iter().any(|a| m.factors.iter().any(|b| a.tag == b.tag)) {
        return Err(Error::AlphabetMismatch("free factors must use disjoint alphabets".into()));
    }
    let dl = 2 * l.rank as usize;
    let dm = 2 * m.rank as usize;
    let (nl, nm) = (l.trans.len(), m.trans.len());
    let into_l = |q: Option<usize>| q.map(|x| 1 + x);
    let into_m = |q: Option<usize>| q.map(|x| 1 + nl + x);
    let mut trans = Vec::with_capacity(1 + nl + nm);
    let mut acc = Vec::with_capacity(1 + nl + nm);
    let row = |from_l: Option<usize>, from_m: Option<usize>| -> Vec<Option<usize>> {
        let mut r = vec![None; dl + dm];
        for s in 0..dl {
            r[s] = match (from_l, from_m) {
                (Some(q), _) => into_l(l.trans[q][s]),
                (None, Some(p)) if m.accepting[p] => into_l(l.trans[0][s]),
                (None, None) => into_l(l.trans[0][s]),
                _ => None,
            };
        }
        for s in 0..dm {
            r[dl + s] = match (from_l, from_m) {
                (_, Some(p)) => into_m(m.trans[p][s]),
                (Some(q), None) if l.accepting[q] => into_m(m.trans[0][s]),
                (None, None) => into_m(m.trans[0][s]),
                _ => None,
            };
        }
        r
    };
    trans.push(row(None, None));
    acc.push(true);
    for q in 0..nl {
        trans.push(row(Some(q), None));
        acc.push(l.accepting[q]);
    }
    for p in 0..nm {
        trans.push(row(None, Some(p)));
        acc.push(m.accepting[p]);
    }
    let mut factors = l.factors.clone();
    factors.extend_from_slice(&m.factors);
    Ok(GroupAutomaton::from_dfa(factors, &trans, &acc))
}

/// A coset `C·s` as seen by [`coset_language`].
#[derive(Debug, Clone, Copy)]
pub enum Coset<'a> {
    Internal(usize, Option<&'a RepClass>),
    Listed(&'a ExternalRep),
    /// Any external coset not listed in the strata.
    Unlisted,
}

/// Union of the cosets selected by `pick`, or with `reps_only` the union of their representatives.
///
/// Without strata every external coset is [`Coset::Unlisted`].
pub fn coset_language(
    t: &Transversal,
    strata: Option<&CosetStrata>,
    reps_only: bool,
    pick: impl Fn(Coset<'_>) -> bool,
) -> Result<GroupAutomaton> {
    if strata.is_some_and(|s| !s.exact) {
        return Err(Error::Unsupported("coset strata are not exact".into()));
    }
    let g = t.graph();
    let a = t.alphabet();
    let d = a.degree();
    let nv = g.vertex_count();
    let mut tree = vec![vec![false; d]; nv];
    for (e, edge) in g.edges().iter().enumerate() {
        if t.is_tree_edge(e) {
            tree[edge.from][slot(edge.label)] = true;
            tree[edge.to][slot(-edge.label)] = true;
        }
    }
    let listed: &[ExternalRep] = strata.map_or(&[], |s| &s.external);
    let mut nodes: HashMap<(usize, Vec<Letter>), usize> = HashMap::new();
    let mut keys: Vec<(usize, Vec<Letter>)> = Vec::new();
    for e in listed {
        let tl = e.tail.letters();
        for k in 1..=tl.len() {
            let key = (e.vertex, tl[..k].to_vec());
            if !nodes.contains_key(&key) {
                nodes.insert(key.clone(), nv + keys.len());
                keys.push(key);
            }
        }
    }
    let sink = nv + keys.len();
    let mut trans = vec![vec![None; d]; sink + 1];
    let mut acc = vec![false; sink + 1];
    for v in 0..nv {
        let class = strata.map(|s| &s.internal[v]);
        acc[v] = pick(Coset::Internal(v, class));
        for s in 0..d {
            trans[v][s] = match g.step_slot(v, s) {
                Some(_) if reps_only && !tree[v][s] => None,
                Some(u) => Some(u),
                None => Some(*nodes.get(&(v, vec![letter_of_slot(s)])).unwrap_or(&sink)),
            };
        }
    }
    for (i, (v, prefix)) in keys.iter().enumerate() {
        let q = nv + i;
        acc[q] = match listed.iter().find(|e| e.vertex == *v && e.tail.letters() == prefix.as_slice()) {
            Some(e) => pick(Coset::Listed(e)),
            None => pick(Coset::Unlisted),
        };
        for s in 0..d {
            let mut ext = prefix.clone();
            ext.push(letter_of_slot(s));
            trans[q][s] = Some(*nodes.get(&(*v, ext)).unwrap_or(&sink));
        }
    }
    trans[sink] = vec![Some(sink); d];
    acc[sink] = pick(Coset::Unlisted);
    Ok(GroupAutomaton::from_dfa(vec![a], &trans, &acc))
}

fn not_certified(c: Option<&RepClass>) -> bool {
    c.is_some_and(|c| !matches!(c.stability, Stability::StableCertified))
}

/// True for cosets whose representative is not certified stable.
pub fn is_unstable_coset(c: Coset<'_>) -> bool {
    match c {
        Coset::Internal(_, class) => not_certified(class),
        Coset::Listed(e) => not_certified(Some(&e.class)),
        Coset::Unlisted => false,
    }
}

/// Recognizer of a normal-form language; `unstable_only` restricts syllables to unstable cosets.
///
/// CNF words are read without their head.
pub fn nf_recognizer(spec: &GroupSpec, kind: Kind, unstable_only: bool) -> Result<GroupAutomaton> {
    let factor = |side: Side| -> Result<GroupAutomaton> {
        let st = spec.stratifier(side);
        let t = st.transversal();
        let strata = if unstable_only { Some(st.coset_strata(st.radius())?) } else { None };
        let outside_c = |c: &Coset<'_>| !matches!(c, Coset::Internal(0, _));
        match kind {
            Kind::EF if !unstable_only => Ok(GroupAutomaton::full(spec.alphabet(side))),
            Kind::EF => coset_language(t, strata.as_ref(), false, is_unstable_coset),
            Kind::RF => coset_language(t, strata.as_ref(), false, |c| {
                outside_c(&c) && (!unstable_only || is_unstable_coset(c))
            }),
            Kind::CNF => coset_language(t, strata.as_ref(), true, |c| !unstable_only || is_unstable_coset(c)),
            Kind::CRF => Err(Error::Unsupported("no recognizer for cyclically reduced forms".into())),
        }
    };
    free_product_regular(&factor(Side::A)?, &factor(Side::B)?)
}

/// Shortest certified-stable representative of length at most `max_len` on an infinite-index side.
pub fn find_stable_representative(spec: &GroupSpec, max_len: usize) -> Result<(Side, Word)> {
    for side in [Side::A, Side::B] {
        if spec.index(side) != crate::subgraph::Index::Infinite {
            continue;
        }
        let st = spec.stratifier(side);
        for n in 1..=max_len {
            for w in enumerate_sphere(spec.alphabet(side), n) {
                if st.transversal().is_representative(w.letters())
                    && matches!(st.classify(&w)?.stability, Stability::StableCertified)
                {
                    return Ok((side, w));
                }
            }
        }
    }
    Err(Error::Inconclusive(format!("no certified stable representative up to length {max_len}")))
}

/// `{y·s·y'}` for all letters y, y' of the other factor, in combined letters.
pub fn separator_words(spec: &GroupSpec, side: Side, s: &Word) -> Vec<Vec<Letter>> {
    let other = spec.alphabet(side.other());
    let mut out = Vec::new();
    for y1 in other.letters() {
        for y2 in other.letters() {
            let w1 = Word::new(other, &[y1]).unwrap();
            let w2 = Word::new(other, &[y2]).unwrap();
            out.push(spec.flatten(&[(side.other(), w1), (side, s.clone()), (side.other(), w2)]));
        }
    }
    out
}

/// Outcome of a smallness probe; it is evidence, not a decision.
#[derive(Debug, Clone, PartialEq)]
pub enum Smallness {
    Small(DecayFit),
    NonSmall(DecayFit),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallnessProbe {
    pub series: Vec<f64>,
    pub verdict: Smallness,
}

/// Fits the decay of `f′_n(R, L)` over `n ≤ n_max`.
pub fn smallness_probe(l: &GroupAutomaton, r: &GroupAutomaton, n_max: usize) -> Result<SmallnessProbe> {
    let series = l.f_prime(r, n_max)?;
    let pts: Vec<(f64, f64)> = series.iter().enumerate().skip(1).map(|(n, &v)| (n as f64, v)).collect();
    let fit = fit_decay(&pts)?;
    let verdict = if fit.delta < 0.99 && fit.quality >= 0.9 { Smallness::Small(fit) } else { Smallness::NonSmall(fit) };
    Ok(SmallnessProbe { series, verdict })
}

/// True iff `w` starts with `u` as reduced words.
pub fn cone_membership(u: &[Letter], w: &[Letter]) -> bool {
    w.starts_with(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{classify_form, NormalForm};
    use crate::words::{enumerate_ball, Tag};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fa() -> Alphabet {
        Alphabet::new(2, Tag::A).unwrap()
    }

    fn fb() -> Alphabet {
        Alphabet::new(2, Tag::B).unwrap()
    }

    fn w(s: &str) -> Vec<Letter> {
        Word::parse(fa(), s).unwrap().into_letters()
    }

    fn reference() -> GroupSpec {
        GroupSpec::parse("rank_a = 2\nrank_b = 2\nrank_c = 1\nu_z = a a\nv_z = x x x\n", None).unwrap()
    }

    fn has_factor(h: &[Letter], p: &[Letter]) -> bool {
        p.is_empty() || h.windows(p.len()).any(|x| x == p)
    }

    fn random_reduced(rng: &mut ChaCha8Rng, rank: u32, n: usize) -> Vec<Letter> {
        let mut out: Vec<Letter> = Vec::new();
        while out.len() < n {
            let l = rng.gen_range(1..=rank as Letter) * if rng.gen() { 1 } else { -1 };
            if out.last() != Some(&-l) {
                out.push(l);
            }
        }
        out
    }

    #[test]
    fn forbidden_examples() {
        let f = forbidden_subword_automaton(vec![fa()], &[w("a")]).unwrap();
        assert!(f.accepts(&[]) && f.accepts(&w("A b A")) && !f.accepts(&w("b a")));
        assert!(f.is_prefix_closed());
        let g = forbidden_subword_automaton(vec![fa()], &[w("a b")]).unwrap();
        assert!(!g.accepts(&w("a a b")) && !g.accepts(&w("a b a")) && g.accepts(&w("b a")));
        assert!(matches!(forbidden_subword_automaton(vec![fa()], &[vec![]]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn forbidden_matches_factor_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..12 {
            let k = rng.gen_range(1..=3);
            let pats: Vec<Vec<Letter>> = (0..k).map(|_| {
                let n = rng.gen_range(1..=3);
                random_reduced(&mut rng, 2, n)
            }).collect();
            let f = forbidden_subword_automaton(vec![fa()], &pats).unwrap();
            let total: usize = pats.iter().map(|p| p.len()).sum();
            assert!(f.state_count() <= (1 + total) * 5);
            for word in enumerate_ball(fa(), 8) {
                let want = !pats.iter().any(|p| has_factor(word.letters(), p));
                assert_eq!(f.accepts(word.letters()), want, "{pats:?} {word}");
            }
        }
    }

    #[test]
    fn free_product_examples() {
        let l = GroupAutomaton::from_words(fa(), &[Word::parse(fa(), "a").unwrap()]);
        let m = GroupAutomaton::from_words(fb(), &[Word::parse(fb(), "x").unwrap()]);
        let p = free_product_regular(&l, &m).unwrap();
        assert_eq!(p.words(2), vec![vec![1, 3], vec![3, 1]]);
        assert!(p.accepts(&[1, 3, 1]) && !p.accepts(&[1, 1]));
        assert!(free_product_regular(&l, &l).is_err());
    }

    #[test]
    fn free_product_matches_splitter() {
        let spec = reference();
        let l = coset_language(spec.transversal(Side::A), None, false, |c| !matches!(c, Coset::Internal(0, _))).unwrap();
        let m = forbidden_subword_automaton(vec![fb()], &[vec![1, 2]]).unwrap();
        let p = free_product_regular(&l, &m).unwrap();
        let splitter = |word: &[Letter]| -> bool {
            let mut i = 0;
            while i < word.len() {
                let side_a = word[i].abs() <= 2;
                let mut j = i;
                while j < word.len() && (word[j].abs() <= 2) == side_a {
                    j += 1;
                }
                let block = &word[i..j];
                let ok = if side_a {
                    l.accepts(block)
                } else {
                    m.accepts(&block.iter().map(|x| x.signum() * (x.abs() - 2)).collect::<Vec<_>>())
                };
                if !ok {
                    return false;
                }
                i = j;
            }
            true
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let n = rng.gen_range(0..=9);
            let word = random_reduced(&mut rng, 4, n);
            assert_eq!(p.accepts(&word), splitter(&word), "{word:?}");
        }
        let pc = free_product_regular(
            &forbidden_subword_automaton(vec![fa()], &[vec![1, 1]]).unwrap(),
            &m,
        )
        .unwrap();
        assert!(pc.is_prefix_closed());
    }

    #[test]
    fn lambda_full_group() {
        let f = GroupAutomaton::full(fa());
        assert!(f.lambda(&[1, 2, -2]).is_err());
        assert!((f.lambda(&w("a b a")).unwrap() - 0.25 / 9.0).abs() < 1e-15);
        let r = coset_language(&Transversal::new(crate::subgraph::fold(fa(), &[Word::parse(fa(), "a b").unwrap()]).unwrap()), None, false, |c| matches!(c, Coset::Internal(..))).unwrap();
        let fp = f.f_prime_exact(&r, 6).unwrap();
        let counts = r.count_accepted(6);
        for n in 0..=6 {
            let f_n = BigRational::new(BigInt::from(counts[n]), BigInt::from(crate::words::sphere_count(2, n)));
            assert_eq!(fp[n], f_n);
        }
        let single = GroupAutomaton::from_words(fa(), &[Word::parse(fa(), "a b a a").unwrap(), Word::parse(fa(), "a b").unwrap()]);
        assert_eq!(single.lambda(&w("a b a a")).unwrap(), 1.0);
    }

    #[test]
    fn lambda_multiplicative() {
        let spec = reference();
        let rf = nf_recognizer(&spec, Kind::RF, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 1000 {
            let n = rng.gen_range(2..=10);
            let word = random_reduced(&mut rng, 4, n);
            if !rf.accepts(&word) {
                continue;
            }
            let cut = rng.gen_range(0..=word.len());
            let (u, v) = word.split_at(cut);
            if !rf.accepts(u) {
                continue;
            }
            let whole = rf.lambda(&word).unwrap();
            let split = rf.lambda(u).unwrap() * rf.lambda_after(u, v).unwrap();
            assert!((whole - split).abs() < 1e-15);
            assert!(whole > 0.0 && whole <= 1.0);
            checked += 1;
        }
        let fp = rf.f_prime(&rf, 8).unwrap();
        assert!(fp.iter().all(|&x| x > 0.0 && x <= 1.0 + 1e-12));
        let ef = nf_recognizer(&spec, Kind::EF, false).unwrap();
        assert!(ef.f_prime(&ef, 8).unwrap().iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn cones() {
        assert!(cone_membership(&w("a"), &w("a b")));
        assert!(!cone_membership(&w("a"), &w("A b")));
        let f = forbidden_subword_automaton(vec![fa()], &[w("b b")]).unwrap();
        assert_eq!(f.cone(&[]).unwrap(), f);
        let c = f.cone(&w("a")).unwrap();
        for word in enumerate_ball(fa(), 6) {
            let x = word.letters();
            assert_eq!(c.accepts(x), f.accepts(x) && cone_membership(&w("a"), x));
        }
        let full = GroupAutomaton::full(fa());
        let probe = smallness_probe(&full, &full.cone(&w("a")).unwrap(), 10).unwrap();
        assert!(matches!(probe.verdict, Smallness::NonSmall(_)));
        assert!(probe.series[1..].iter().all(|&x| (x - 0.25).abs() < 1e-12));
        let avoid = forbidden_subword_automaton(vec![fa()], &[w("b")]).unwrap().cone(&w("a")).unwrap();
        let probe = smallness_probe(&full, &avoid, 10).unwrap();
        match probe.verdict {
            Smallness::Small(fit) => assert!(fit.delta < 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nf_uns_matches_form_classifier() {
        let spec = reference();
        for kind in [Kind::EF, Kind::RF, Kind::CNF] {
            let all = nf_recognizer(&spec, kind, false).unwrap();
            let uns = nf_recognizer(&spec, kind, true).unwrap();
            for n in 0..=6 {
                for word in all.words(n) {
                    let mut body: Vec<(Side, Word)> = Vec::new();
                    for &l in &word {
                        let (side, local) = if l.abs() <= 2 { (Side::A, l) } else { (Side::B, l.signum() * (l.abs() - 2)) };
                        match body.last_mut() {
                            Some((s, w)) if *s == side => *w = w.mul(&Word::new(spec.alphabet(side), &[local]).unwrap()),
                            _ => body.push((side, Word::new(spec.alphabet(side), &[local]).unwrap())),
                        }
                    }
                    let nf = NormalForm { kind, head: Word::identity(spec.z_alphabet()), body, conjugator: None };
                    let want = nf.k() == 0 || classify_form(&nf, &spec).unstable();
                    assert_eq!(uns.accepts(&word), want, "{kind:?} {}", nf.render());
                }
            }
        }
    }

    #[test]
    fn separator_containment() {
        let spec = reference();
        let (side, s) = find_stable_representative(&spec, 4).unwrap();
        assert_eq!(side, Side::A);
        let pats = separator_words(&spec, side, &s);
        assert_eq!(pats.len(), 16);
        let f0 = forbidden_subword_automaton(vec![fa(), fb()], &pats).unwrap();
        let uns = nf_recognizer(&spec, Kind::EF, true).unwrap();
        for n in 0..=7 {
            for word in uns.words(n) {
                assert!(f0.accepts(&word));
            }
        }
        let full = GroupAutomaton::full(Alphabet::new(4, Tag::A).unwrap());
        let fp = full.f_prime(&f0, 12).unwrap();
        assert!(fp[12] < fp[4]);
    }

    #[test]
    fn exports() {
        let f = forbidden_subword_automaton(vec![fa()], &[w("a b")]).unwrap();
        assert!(f.to_dot().contains("doublecircle"));
        let text = f.to_text();
        assert!(text.starts_with("automaton 2\nstates"));
        assert_eq!(text.lines().filter(|l| l.starts_with("trans")).count(), f.trans.iter().flatten().flatten().count());
    }
}
