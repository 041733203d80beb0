//! Classification of transversal representatives: internal or external,
//! singular or regular, stable or unstable.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::subgraph::{pullback, CoreGraph, Transversal};
use crate::words::{cyclic_reduce, enumerate_sphere, invert_letters, mul_letters, slot, sphere_count, Letter, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stability {
    /// `s·c ∉ S` for the recorded `c ∈ C`.
    Unstable(Word),
    StableCertified,
    /// No witness of length at most R exists, but stability is not certified.
    StableUpTo(usize),
}

impl Stability {
    pub fn is_unstable(&self) -> bool {
        matches!(self, Stability::Unstable(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepClass {
    pub internal: bool,
    pub singular: bool,
    pub stability: Stability,
}

/// True iff `s⁻¹Cs ∩ C ≠ 1`.
pub fn is_singular(s: &Word, c: &CoreGraph) -> bool {
    let conj = c.conjugate_graph(s);
    pullback(&conj, c).map(|p| p.cycle_rank() >= 1).unwrap_or(false)
}

/// True iff `s·c` is not a representative.
pub fn unstable_witness_check(s: &Word, c: &Word, t: &Transversal) -> Result<bool> {
    if !t.graph().accepts(c.letters()) {
        return Err(Error::Precondition(format!("{c} is not in the subgroup")));
    }
    Ok(!t.is_representative(&mul_letters(s.letters(), c.letters())))
}

/// True iff some conjugate of `g` lies in C.
pub fn conjugate_into(g: &Word, c: &CoreGraph) -> bool {
    let (core, _) = cyclic_reduce(g);
    (0..c.vertex_count()).any(|v| c.read_from(v, core.letters()) == Some(v))
}

/// Finds `h` and `c ∈ C` with `g = h·c·h⁻¹`.
pub fn conjugate_into_witness(g: &Word, t: &Transversal) -> Option<(Word, Word)> {
    let (core, conj) = cyclic_reduce(g);
    let graph = t.graph();
    let v = (0..graph.vertex_count()).find(|&v| graph.read_from(v, core.letters()) == Some(v))?;
    let r = t.representative(v);
    let h = conj.mul(&r.inverse());
    let c = r.mul(&core).mul(&r.inverse());
    Some((h, c))
}

/// 2·(longest internal representative) + 2·diameter + 4.
pub fn default_radius(t: &Transversal) -> usize {
    let longest = t.internal_representatives().iter().map(Word::len).max().unwrap_or(0);
    2 * longest + 2 * t.graph().diameter() + 4
}

/// Per-sphere census of the transversal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CensusRecord {
    pub n: usize,
    pub total: u64,
    pub internal: u64,
    pub external: u64,
    pub singular: u64,
    pub unstable: u64,
    pub stable_certified: u64,
    pub stable_up_to: u64,
}

impl CensusRecord {
    pub const CSV_HEADER: &'static str = "n,total,internal,external,singular,unstable,stable_certified,stable_up_to_R";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            self.total,
            self.internal,
            self.external,
            self.singular,
            self.unstable,
            self.stable_certified,
            self.stable_up_to
        )
    }
}

/// Classifier bound to one transversal, with a write-once cache per representative.
#[derive(Debug)]
pub struct Stratifier {
    t: Transversal,
    radius: usize,
    shifts: Vec<Vec<Letter>>,
    dist: Vec<usize>,
    cache: Mutex<HashMap<Vec<Letter>, RepClass>>,
}

impl Clone for Stratifier {
    fn clone(&self) -> Self {
        Stratifier {
            t: self.t.clone(),
            radius: self.radius,
            shifts: self.shifts.clone(),
            dist: self.dist.clone(),
            cache: Mutex::new(self.cache.lock().unwrap().clone()),
        }
    }
}

impl Stratifier {
    pub fn new(t: Transversal, radius: Option<usize>) -> Self {
        let radius = radius.unwrap_or_else(|| default_radius(&t));
        let reps = t.internal_representatives();
        let mut shifts: Vec<Vec<Letter>> = Vec::new();
        for s1 in reps {
            for s2 in reps {
                shifts.push(mul_letters(s2.letters(), &invert_letters(s1.letters())));
            }
        }
        shifts.sort();
        shifts.dedup();
        let dist = t.graph().distances_from(0);
        Stratifier { t, radius, shifts, dist, cache: Mutex::new(HashMap::new()) }
    }

    pub fn transversal(&self) -> &Transversal {
        &self.t
    }

    pub fn graph(&self) -> &CoreGraph {
        self.t.graph()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Calls `f` on every reduced loop at base of length 1..=max in shortlex order until it returns true.
    pub fn find_loop(&self, max: usize, mut f: impl FnMut(&[Letter]) -> bool) -> Option<Vec<Letter>> {
        let g = self.t.graph();
        let d = g.alphabet().degree();
        let mut path: Vec<Letter> = Vec::new();
        let mut verts: Vec<usize> = vec![0];
        let mut next_slot: Vec<usize> = vec![0];
        for len in 1..=max {
            path.clear();
            verts.truncate(1);
            next_slot.clear();
            next_slot.push(0);
            while let Some(s) = next_slot.last().copied() {
                let depth = path.len();
                if s >= d || depth == len {
                    if depth == len && s == 0 && verts[depth] == 0 && f(&path) {
                        return Some(path);
                    }
                    next_slot.pop();
                    if path.pop().is_some() {
                        verts.pop();
                    }
                    continue;
                }
                *next_slot.last_mut().unwrap() += 1;
                if depth > 0 && s == slot(-path[depth - 1]) {
                    continue;
                }
                let v = verts[depth];
                let Some(w) = g.step_slot(v, s) else { continue };
                if self.dist[w] > len - depth - 1 {
                    continue;
                }
                path.push(crate::words::letter_of_slot(s));
                verts.push(w);
                next_slot.push(0);
            }
        }
        None
    }

    pub fn classify_stability(&self, s: &Word) -> Result<Stability> {
        self.classify_stability_with(s, self.radius)
    }

    pub fn classify_stability_with(&self, s: &Word, radius: usize) -> Result<Stability> {
        if !self.t.is_representative(s.letters()) {
            return Err(Error::Precondition(format!("{s} is not a representative")));
        }
        let g = self.t.graph();
        let certified = self.shifts.iter().all(|p| !g.accepts(&mul_letters(p, s.letters())));
        if certified {
            return Ok(Stability::StableCertified);
        }
        let a = self.t.alphabet();
        let found =
            self.find_loop(radius, |c| !self.t.is_representative(&mul_letters(s.letters(), c)));
        Ok(match found {
            Some(c) => Stability::Unstable(Word::from_reduced(a, c)),
            None => Stability::StableUpTo(radius),
        })
    }

    /// Full classification of a representative, cached.
    pub fn classify(&self, s: &Word) -> Result<RepClass> {
        if let Some(c) = self.cache.lock().unwrap().get(s.letters()) {
            return Ok(c.clone());
        }
        let stability = self.classify_stability(s)?;
        let (_, internal) = self.t.anchor(s.letters());
        let singular = is_singular(s, self.t.graph());
        assert!(
            !(singular && stability == Stability::StableCertified),
            "singular representative {s} certified stable"
        );
        let class = RepClass { internal, singular, stability };
        self.cache.lock().unwrap().insert(s.letters().to_vec(), class.clone());
        Ok(class)
    }

    /// Exhaustive census of `S ∩ S_n`.
    pub fn stratify_sphere(&self, n: usize, n_max: usize) -> Result<CensusRecord> {
        if n > n_max {
            return Err(Error::Guard(format!("sphere radius {n} exceeds the limit {n_max}")));
        }
        let mut rec = CensusRecord { n, ..Default::default() };
        for w in enumerate_sphere(self.t.alphabet(), n) {
            if !self.t.is_representative(w.letters()) {
                continue;
            }
            let c = self.classify(&w)?;
            rec.total += 1;
            if c.internal {
                rec.internal += 1;
            } else {
                rec.external += 1;
            }
            rec.singular += u64::from(c.singular);
            match c.stability {
                Stability::Unstable(_) => rec.unstable += 1,
                Stability::StableCertified => rec.stable_certified += 1,
                Stability::StableUpTo(_) => rec.stable_up_to += 1,
            }
        }
        Ok(rec)
    }

    /// Internal classes plus the external representatives that can possibly be unstable.
    pub fn coset_strata(&self, depth: usize) -> Result<CosetStrata> {
        let t = &self.t;
        let g = t.graph();
        let d = g.alphabet().degree();
        let internal: Vec<RepClass> =
            t.internal_representatives().iter().map(|r| self.classify(r)).collect::<Result<_>>()?;
        // An external representative rep(v)·u with u leaving at v can fail to be
        // stable only when u⁻¹ is readable from base, ending with the inverse of u's first letter.
        let states = g.vertex_count() * d;
        let by_slot = g.path_counts_by_slot(2 * states);
        let mut finite = true;
        for len in states.max(1)..2 * states {
            for &v in t.frontier() {
                for e in g.missing_slots(v) {
                    let back = e ^ 1;
                    if (0..g.vertex_count()).any(|w| by_slot[len][w * d + back] > 0) {
                        finite = false;
                    }
                }
            }
        }
        let mut external = Vec::new();
        for len in 1..=depth {
            for p in enumerate_sphere(t.alphabet(), len) {
                let last = *p.letters().last().unwrap();
                if g.read_from(0, p.letters()).is_none() {
                    continue;
                }
                let u = p.inverse();
                for &v in t.frontier() {
                    if g.step(v, -last).is_some() {
                        continue;
                    }
                    let s = t.representative(v).mul(&u);
                    let class = self.classify(&s)?;
                    if class.singular || !matches!(class.stability, Stability::StableCertified) {
                        external.push(ExternalRep { vertex: v, tail: u.clone(), rep: s, class });
                    }
                }
            }
        }
        let decided = internal.iter().chain(external.iter().map(|e| &e.class)).all(|c| !matches!(c.stability, Stability::StableUpTo(_)));
        Ok(CosetStrata { internal, external, exact: finite && decided, depth })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalRep {
    pub vertex: usize,
    pub tail: Word,
    pub rep: Word,
    pub class: RepClass,
}

/// The unstable and singular part of a transversal, as internal vertices plus external candidates.
#[derive(Debug, Clone)]
pub struct CosetStrata {
    pub internal: Vec<RepClass>,
    /// External representatives found up to `depth` that are singular or not certified stable.
    pub external: Vec<ExternalRep>,
    /// True when the candidate set is finite and fully covered, and no class is undecided.
    pub exact: bool,
    pub depth: usize,
}

impl CosetStrata {
    pub fn unstable_internal(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.internal.len()).filter(|&v| self.internal[v].stability.is_unstable())
    }

    pub fn unstable_external(&self) -> impl Iterator<Item = &ExternalRep> + '_ {
        self.external.iter().filter(|e| e.class.stability.is_unstable())
    }

    /// `out[n]`: reduced words of length n whose coset representative is unstable.
    pub fn unstable_counts(&self, t: &Transversal, n_max: usize) -> Vec<u128> {
        let paths = t.graph().path_counts(n_max);
        (0..=n_max)
            .map(|n| {
                let inner: u128 = self.unstable_internal().map(|v| paths[n][v]).sum();
                let outer: u128 = self
                    .unstable_external()
                    .filter(|e| e.tail.len() <= n)
                    .map(|e| paths[n - e.tail.len()][e.vertex])
                    .sum();
                inner + outer
            })
            .collect()
    }

    /// Same as [`Self::unstable_counts`] divided by the sphere size.
    pub fn unstable_fractions(&self, t: &Transversal, n_max: usize) -> Vec<f64> {
        let probs = t.graph().path_probs(n_max);
        let r = t.alphabet().rank;
        (0..=n_max)
            .map(|n| {
                let inner: f64 = self.unstable_internal().map(|v| probs[n][v]).sum();
                let outer: f64 = self
                    .unstable_external()
                    .filter(|e| e.tail.len() <= n)
                    .map(|e| {
                        let k = n - e.tail.len();
                        probs[k][e.vertex] * crate::words::sphere_count_f64(r, k) / crate::words::sphere_count_f64(r, n)
                    })
                    .sum();
                inner + outer
            })
            .collect()
    }
}

/// `out[n] = |S ∩ S_n|`, counted from the spanning tree and the hanging trees.
pub fn representative_counts(t: &Transversal, n_max: usize) -> Vec<u128> {
    let r = t.alphabet().rank;
    let mut out = vec![0u128; n_max + 1];
    for (v, rep) in t.internal_representatives().iter().enumerate() {
        let k = rep.len();
        if k <= n_max {
            out[k] += 1;
        }
        let m = t.graph().missing_slots(v).count() as u128;
        for (n, slot) in out.iter_mut().enumerate().skip(k + 1) {
            *slot += m * sphere_count(r, n - k) / (2 * r as u128);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subgraph::fold;
    use crate::words::{enumerate_ball, Alphabet, Tag};
    use proptest::prelude::*;

    fn fab() -> Alphabet {
        Alphabet::new(2, Tag::A).unwrap()
    }

    fn w(s: &str) -> Word {
        Word::parse(fab(), s).unwrap()
    }

    fn strat(gens: &[&str]) -> Stratifier {
        let g = fold(fab(), &gens.iter().map(|s| w(s)).collect::<Vec<_>>()).unwrap();
        Stratifier::new(Transversal::new(g), None)
    }

    /// Pairs of subgroup elements up to length `max`, used as an intersection oracle.
    fn common_nontrivial(c: &CoreGraph, s: &Word, max: usize) -> bool {
        enumerate_ball(fab(), max).any(|x| {
            !x.is_empty() && c.accepts(x.letters()) && c.accepts(s.inverse().mul(&x).mul(s).letters())
        })
    }

    #[test]
    fn singular_examples() {
        let st = strat(&["a a"]);
        assert!(is_singular(&w("1"), st.graph()));
        assert!(is_singular(&w("a"), st.graph()));
        assert!(common_nontrivial(st.graph(), &w("a"), 4));
        assert!(!is_singular(&w("b"), st.graph()));
        assert!(!common_nontrivial(st.graph(), &w("b"), 12));
    }

    #[test]
    fn witness_check_examples() {
        let st = strat(&["a a"]);
        let t = st.transversal();
        assert!(unstable_witness_check(&w("a"), &w("a a"), t).unwrap());
        assert!(!unstable_witness_check(&w("b"), &w("a a"), t).unwrap());
        assert!(!unstable_witness_check(&w("b"), &w("1"), t).unwrap());
        assert!(unstable_witness_check(&w("b"), &w("a"), t).is_err());
    }

    #[test]
    fn stability_examples() {
        let st = strat(&["a a"]);
        assert_eq!(st.classify_stability(&w("1")).unwrap(), Stability::Unstable(w("a a")));
        assert_eq!(st.classify_stability(&w("b")).unwrap(), Stability::StableCertified);
        assert_eq!(st.classify_stability(&w("a")).unwrap(), Stability::Unstable(w("a a")));
        assert!(st.classify_stability(&w("a a a")).is_err());
    }

    #[test]
    fn conjugate_into_examples() {
        let st = strat(&["a a"]);
        assert!(conjugate_into(&w("a a"), st.graph()));
        assert!(conjugate_into(&w("b a a B"), st.graph()));
        let b = Alphabet::new(2, Tag::B).unwrap();
        let gx = fold(b, &[Word::parse(b, "x x").unwrap()]).unwrap();
        assert!(!conjugate_into(&Word::parse(b, "x").unwrap(), &gx));
        let (h, c) = conjugate_into_witness(&w("b a a a a B"), st.transversal()).unwrap();
        assert!(st.graph().accepts(c.letters()));
        assert_eq!(h.mul(&c).mul(&h.inverse()), w("b a a a a B"));
    }

    #[test]
    fn sphere_census_examples() {
        let a = Alphabet::new(2, Tag::B).unwrap();
        let whole = fold(a, &[Word::parse(a, "x").unwrap(), Word::parse(a, "y").unwrap()]).unwrap();
        let st = Stratifier::new(Transversal::new(whole), None);
        for n in 1..=4 {
            assert_eq!(st.stratify_sphere(n, 8).unwrap(), CensusRecord { n, ..Default::default() });
        }
        let st = strat(&["a a"]);
        let rec = st.stratify_sphere(1, 8).unwrap();
        assert_eq!((rec.total, rec.unstable, rec.singular), (3, 1, 1));
        assert!(st.stratify_sphere(9, 8).is_err());
        let mut last = 1.0;
        for n in 1..=8 {
            let r = st.stratify_sphere(n, 8).unwrap();
            let frac = r.unstable as f64 / r.total as f64;
            assert!(frac <= last, "n={n}");
            last = frac;
        }
    }

    #[test]
    fn census_invariants_on_several_subgroups() {
        for gens in [vec!["a a"], vec!["a b A B"], vec!["a a", "b b"], vec!["a b a", "b"], vec!["a a", "b", "a b A"]] {
            let st = strat(&gens);
            let t = st.transversal();
            assert_eq!(t.internal_representatives().len(), t.graph().vertex_count());
            let counts = representative_counts(t, 6);
            for n in 0..=6 {
                let rec = st.stratify_sphere(n, 8).unwrap();
                assert_eq!(rec.total as u128, counts[n], "{gens:?} n={n}");
                for s in enumerate_sphere(fab(), n).filter(|s| t.is_representative(s.letters())) {
                    let c = st.classify(&s).unwrap();
                    match &c.stability {
                        Stability::Unstable(wit) => assert!(unstable_witness_check(&s, wit, t).unwrap()),
                        Stability::StableCertified => {
                            assert!(!c.singular);
                            let deeper = st.radius() + 4;
                            assert!(st.find_loop(deeper, |x| !t.is_representative(&mul_letters(s.letters(), x))).is_none());
                        }
                        Stability::StableUpTo(_) => {}
                    }
                }
            }
        }
    }

    #[test]
    fn coset_strata_counts_match_enumeration() {
        for gens in [vec!["a a"], vec!["a b A B"], vec!["a b a", "b"], vec!["a a b", "B a b"]] {
            let st = strat(&gens);
            let t = st.transversal();
            let strata = st.coset_strata(6).unwrap();
            let counts = strata.unstable_counts(t, 6);
            let fr = strata.unstable_fractions(t, 6);
            for n in 0..=6 {
                let brute = enumerate_sphere(fab(), n)
                    .filter(|g| {
                        let (_, s) = t.coset_decompose(g);
                        st.classify(&s).unwrap().stability.is_unstable()
                    })
                    .count() as u128;
                if strata.exact {
                    assert_eq!(counts[n], brute, "{gens:?} n={n}");
                } else {
                    assert!(counts[n] <= brute, "{gens:?} n={n}");
                }
                let expect = counts[n] as f64 / sphere_count(2, n) as f64;
                assert!((fr[n] - expect).abs() < 1e-12);
            }
        }
        let st = strat(&["a a"]);
        let strata = st.coset_strata(8).unwrap();
        assert!(strata.exact && strata.external.is_empty());
        assert_eq!(strata.unstable_internal().count(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn singular_never_certified(raw in prop::collection::vec(prop::collection::vec(prop_oneof![Just(1), Just(-1), Just(2), Just(-2)], 1..=4), 1..=2)) {
            let gens: Vec<Word> = raw.iter().map(|r| Word::new(fab(), r).unwrap()).collect();
            let st = Stratifier::new(Transversal::new(fold(fab(), &gens).unwrap()), None);
            for n in 0..=4 {
                for s in enumerate_sphere(fab(), n).filter(|s| st.transversal().is_representative(s.letters())) {
                    let c = st.classify(&s).unwrap();
                    prop_assert!(!(c.singular && c.stability == Stability::StableCertified));
                }
            }
        }
    }
}
