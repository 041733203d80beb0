//! Folded subgroup graphs of free groups and the Schreier transversals
//! read off their spanning trees.
//!
//! Every edge carries a decoration: a word over the generator alphabet `Z`.
//! Reading the decorations along a closed path at the base spells out the
//! loop label as a product of the original generators.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::words::{invert_letters, letter_of_slot, mul_letters, slot, Alphabet, Letter, Tag, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Always a positive letter.
    pub label: Letter,
    /// Word over `Z`.
    pub deco: Vec<Letter>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Index {
    Finite(usize),
    Infinite,
}

/// Result of reading a word from the base vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trace {
    /// The whole word was read; the path ends at `end`.
    Inside { end: usize, deco: Vec<Letter> },
    /// Letter `pos` has no edge at vertex `from`.
    Left { pos: usize, from: usize, deco: Vec<Letter> },
}

/// A folded, trimmed subgroup graph. The base vertex is always 0 and
/// vertices are numbered in shortlex breadth-first order.
#[derive(Debug, Clone)]
pub struct CoreGraph {
    alphabet: Alphabet,
    z: Alphabet,
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<Option<(usize, usize)>>>,
}

#[derive(Debug, Clone)]
struct Trav {
    edge: usize,
    end: usize,
    deco: Vec<Letter>,
}

struct Builder {
    degree: usize,
    base: usize,
    alive: Vec<bool>,
    edges: Vec<Option<Edge>>,
}

impl Builder {
    fn new(degree: usize) -> Self {
        Builder { degree, base: 0, alive: vec![true], edges: Vec::new() }
    }

    fn add_vertex(&mut self) -> usize {
        self.alive.push(true);
        self.alive.len() - 1
    }

    /// Adds an edge read from `u` as letter `l` towards `v` with decoration `deco` in that direction.
    fn add_signed(&mut self, u: usize, l: Letter, v: usize, deco: Vec<Letter>) {
        let e = if l > 0 {
            Edge { from: u, to: v, label: l, deco }
        } else {
            Edge { from: v, to: u, label: -l, deco: invert_letters(&deco) }
        };
        self.edges.push(Some(e));
    }

    fn add_path(&mut self, from: usize, word: &[Letter], first_deco: Vec<Letter>, to: usize) {
        let mut cur = from;
        let mut deco = first_deco;
        for (i, &l) in word.iter().enumerate() {
            let next = if i + 1 == word.len() { to } else { self.add_vertex() };
            self.add_signed(cur, l, next, std::mem::take(&mut deco));
            cur = next;
        }
    }

    fn trav(&self, e: usize, forward: bool) -> Trav {
        let edge = self.edges[e].as_ref().unwrap();
        if forward {
            Trav { edge: e, end: edge.to, deco: edge.deco.clone() }
        } else {
            Trav { edge: e, end: edge.from, deco: invert_letters(&edge.deco) }
        }
    }

    fn find_pair(&self) -> Option<(Trav, Trav)> {
        let mut table: HashMap<(usize, usize), (usize, bool)> = HashMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            let Some(e) = e else { continue };
            for (v, s, fwd) in [(e.from, slot(e.label), true), (e.to, slot(-e.label), false)] {
                if let Some(&(j, f)) = table.get(&(v, s)) {
                    return Some((self.trav(j, f), self.trav(i, fwd)));
                }
                table.insert((v, s), (i, fwd));
            }
        }
        None
    }

    fn gauge(&mut self, u: usize, g: &[Letter]) {
        let gi = invert_letters(g);
        for e in self.edges.iter_mut().flatten() {
            if e.from == u && e.to == u {
                e.deco = mul_letters(&mul_letters(&gi, &e.deco), g);
            } else if e.to == u {
                e.deco = mul_letters(&e.deco, g);
            } else if e.from == u {
                e.deco = mul_letters(&gi, &e.deco);
            }
        }
    }

    fn merge(&mut self, keep: usize, gone: usize) {
        for e in self.edges.iter_mut().flatten() {
            if e.from == gone {
                e.from = keep;
            }
            if e.to == gone {
                e.to = keep;
            }
        }
        self.alive[gone] = false;
    }

    fn fold(&mut self) {
        while let Some((t1, t2)) = self.find_pair() {
            if t1.end == t2.end {
                self.edges[t2.edge] = None;
                continue;
            }
            let (keep, gone) = if t2.end != self.base { (t1, t2) } else { (t2, t1) };
            let gamma = mul_letters(&invert_letters(&gone.deco), &keep.deco);
            self.gauge(gone.end, &gamma);
            self.merge(keep.end, gone.end);
            self.edges[gone.edge] = None;
        }
    }

    fn trim(&mut self) {
        loop {
            let mut deg = vec![0usize; self.alive.len()];
            for e in self.edges.iter().flatten() {
                deg[e.from] += 1;
                deg[e.to] += 1;
            }
            let victim = (0..self.alive.len()).find(|&v| self.alive[v] && v != self.base && deg[v] <= 1);
            let Some(v) = victim else { break };
            self.alive[v] = false;
            for e in self.edges.iter_mut() {
                if matches!(e, Some(x) if x.from == v || x.to == v) {
                    *e = None;
                }
            }
        }
    }

    fn finish(self, alphabet: Alphabet, z: Alphabet) -> CoreGraph {
        let m = self.alive.len();
        let mut table = vec![vec![None; self.degree]; m];
        for (i, e) in self.edges.iter().enumerate() {
            if let Some(e) = e {
                table[e.from][slot(e.label)] = Some((e.to, i));
                table[e.to][slot(-e.label)] = Some((e.from, i));
            }
        }
        let mut id = vec![usize::MAX; m];
        id[self.base] = 0;
        let mut order = vec![self.base];
        let mut queue = VecDeque::from([self.base]);
        while let Some(v) = queue.pop_front() {
            for &(w, _) in table[v].iter().flatten() {
                if id[w] == usize::MAX {
                    id[w] = order.len();
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        let edges: Vec<Edge> = self
            .edges
            .into_iter()
            .flatten()
            .filter(|e| id[e.from] != usize::MAX)
            .map(|e| Edge { from: id[e.from], to: id[e.to], label: e.label, deco: e.deco })
            .collect();
        CoreGraph::from_parts(alphabet, z, order.len(), edges)
    }
}

/// Builds the folded core graph of the subgroup generated by `generators`.
///
/// The i-th generator is recorded as the letter `z_i` of the returned graph's `Z` alphabet.
pub fn fold(alphabet: Alphabet, generators: &[Word]) -> Result<CoreGraph> {
    if let Some(g) = generators.iter().find(|g| g.alphabet() != alphabet) {
        return Err(Error::AlphabetMismatch(format!("generator {} is not over {:?}", g, alphabet.tag)));
    }
    let z = Alphabet::new(generators.len().max(1) as u32, Tag::C)?;
    let mut b = Builder::new(alphabet.degree());
    for (i, g) in generators.iter().enumerate() {
        if !g.is_empty() {
            b.add_path(0, g.letters(), vec![(i + 1) as Letter], 0);
        }
    }
    b.fold();
    b.trim();
    Ok(b.finish(alphabet, z))
}

impl CoreGraph {
    fn from_parts(alphabet: Alphabet, z: Alphabet, n: usize, edges: Vec<Edge>) -> Self {
        let mut adj = vec![vec![None; alphabet.degree()]; n];
        for (i, e) in edges.iter().enumerate() {
            adj[e.from][slot(e.label)] = Some((e.to, i));
            adj[e.to][slot(-e.label)] = Some((e.from, i));
        }
        CoreGraph { alphabet, z, n, edges, adj }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Alphabet of the decorations.
    pub fn z_alphabet(&self) -> Alphabet {
        self.z
    }

    pub fn base(&self) -> usize {
        0
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// |E| − |V| + 1, the rank of the recognized subgroup.
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + 1 - self.n
    }

    /// Vertex reached from `v` along letter `l`, if the edge exists.
    #[inline]
    pub fn step(&self, v: usize, l: Letter) -> Option<usize> {
        self.adj[v][slot(l)].map(|(w, _)| w)
    }

    #[inline]
    pub fn step_slot(&self, v: usize, s: usize) -> Option<usize> {
        self.adj[v][s].map(|(w, _)| w)
    }

    /// Edge index used by the step, if any.
    pub fn step_edge(&self, v: usize, l: Letter) -> Option<usize> {
        self.adj[v][slot(l)].map(|(_, e)| e)
    }

    /// Decoration of traversing `l` out of `v`.
    fn step_deco(&self, v: usize, l: Letter) -> Option<(usize, Vec<Letter>)> {
        let (w, e) = self.adj[v][slot(l)]?;
        let d = &self.edges[e].deco;
        Some((w, if l > 0 { d.clone() } else { invert_letters(d) }))
    }

    pub fn trace_from(&self, start: usize, w: &[Letter]) -> Trace {
        let mut v = start;
        let mut deco = Vec::new();
        for (i, &l) in w.iter().enumerate() {
            match self.step_deco(v, l) {
                Some((next, d)) => {
                    deco = mul_letters(&deco, &d);
                    v = next;
                }
                None => return Trace::Left { pos: i, from: v, deco },
            }
        }
        Trace::Inside { end: v, deco }
    }

    pub fn trace(&self, w: &[Letter]) -> Trace {
        self.trace_from(0, w)
    }

    /// Endpoint of the path labelled `w` from `start`, if it stays in the graph.
    pub fn read_from(&self, start: usize, w: &[Letter]) -> Option<usize> {
        w.iter().try_fold(start, |v, &l| self.step(v, l))
    }

    pub fn accepts(&self, w: &[Letter]) -> bool {
        self.read_from(0, w) == Some(0)
    }

    /// Membership test; on success also returns the element as a word over `Z`.
    pub fn membership(&self, g: &Word) -> (bool, Option<Word>) {
        if g.alphabet() != self.alphabet {
            return (false, None);
        }
        match self.trace(g.letters()) {
            Trace::Inside { end: 0, deco } => (true, Some(Word::from_reduced(self.z, deco))),
            _ => (false, None),
        }
    }

    pub fn index(&self) -> Index {
        if self.adj.iter().all(|row| row.iter().all(Option::is_some)) {
            Index::Finite(self.n)
        } else {
            Index::Infinite
        }
    }

    /// Missing slots at `v`: letters whose edge leaves the graph into a hanging tree.
    pub fn missing_slots(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.alphabet.degree()).filter(move |&s| self.adj[v][s].is_none())
    }

    /// Reduced paths of exactly `n` letters from base that return to base.
    pub fn count_reduced_accepted(&self, n: usize) -> u128 {
        let counts = self.path_counts(n);
        counts[n][0]
    }

    /// `out[k][v]`: number of reduced paths of length k from base to v inside the graph.
    pub fn path_counts(&self, n_max: usize) -> Vec<Vec<u128>> {
        let d = self.alphabet.degree();
        let mut out = Vec::with_capacity(n_max + 1);
        let mut start = vec![0u128; self.n];
        start[0] = 1;
        out.push(start);
        // cur[v * d + s]: paths ending at v whose last letter has slot s
        let mut cur = vec![0u128; self.n * d];
        for s in 0..d {
            if let Some(w) = self.adj[0][s].map(|(w, _)| w) {
                cur[w * d + s] += 1;
            }
        }
        for k in 1..=n_max {
            let mut tot = vec![0u128; self.n];
            for v in 0..self.n {
                tot[v] = cur[v * d..(v + 1) * d].iter().sum();
            }
            out.push(tot);
            if k == n_max {
                break;
            }
            let mut next = vec![0u128; self.n * d];
            for v in 0..self.n {
                for s in 0..d {
                    let c = cur[v * d + s];
                    if c == 0 {
                        continue;
                    }
                    let back = s ^ 1;
                    for t in 0..d {
                        if t == back {
                            continue;
                        }
                        if let Some((w, _)) = self.adj[v][t] {
                            next[w * d + t] += c;
                        }
                    }
                }
            }
            cur = next;
        }
        out
    }

    /// Probability that the uniform non-backtracking walk of k steps from base
    /// is at v without having left the graph; `out[k][v]`.
    pub fn path_probs(&self, n_max: usize) -> Vec<Vec<f64>> {
        let d = self.alphabet.degree();
        let mut out = Vec::with_capacity(n_max + 1);
        let mut start = vec![0.0; self.n];
        start[0] = 1.0;
        out.push(start);
        let mut cur = vec![0.0f64; self.n * d];
        for s in 0..d {
            if let Some((w, _)) = self.adj[0][s] {
                cur[w * d + s] += 1.0 / d as f64;
            }
        }
        let step = 1.0 / (d as f64 - 1.0);
        for k in 1..=n_max {
            out.push((0..self.n).map(|v| cur[v * d..(v + 1) * d].iter().sum()).collect());
            if k == n_max {
                break;
            }
            let mut next = vec![0.0f64; self.n * d];
            for v in 0..self.n {
                for s in 0..d {
                    let c = cur[v * d + s];
                    if c == 0.0 {
                        continue;
                    }
                    for t in (0..d).filter(|&t| t != s ^ 1) {
                        if let Some((w, _)) = self.adj[v][t] {
                            next[w * d + t] += c * step;
                        }
                    }
                }
            }
            cur = next;
        }
        out
    }

    /// Like [`Self::path_counts`] but split by the slot of the last letter: `out[k][v * 2r + s]`.
    /// Length 0 is recorded under no slot and is omitted.
    pub fn path_counts_by_slot(&self, n_max: usize) -> Vec<Vec<u128>> {
        let d = self.alphabet.degree();
        let mut out = vec![vec![0u128; self.n * d]];
        if n_max == 0 {
            return out;
        }
        let mut cur = vec![0u128; self.n * d];
        for s in 0..d {
            if let Some((w, _)) = self.adj[0][s] {
                cur[w * d + s] += 1;
            }
        }
        for _ in 1..n_max {
            let mut next = vec![0u128; self.n * d];
            for v in 0..self.n {
                for s in 0..d {
                    let c = cur[v * d + s];
                    if c == 0 {
                        continue;
                    }
                    for t in (0..d).filter(|&t| t != s ^ 1) {
                        if let Some((w, _)) = self.adj[v][t] {
                            next[w * d + t] = next[w * d + t].saturating_add(c);
                        }
                    }
                }
            }
            out.push(std::mem::replace(&mut cur, next));
        }
        out.push(cur);
        out
    }

    /// Undirected distances from base.
    pub fn distances_from(&self, start: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &(w, _) in self.adj[v].iter().flatten() {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn diameter(&self) -> usize {
        (0..self.n).map(|v| self.distances_from(v).into_iter().max().unwrap_or(0)).max().unwrap_or(0)
    }

    /// Graph recognizing `w⁻¹ C w`.
    pub fn conjugate_graph(&self, w: &Word) -> CoreGraph {
        let mut b = self.to_builder();
        let nb = if w.is_empty() { 0 } else { b.add_vertex() };
        b.add_path(0, w.letters(), Vec::new(), nb);
        b.base = nb;
        b.fold();
        b.trim();
        b.finish(self.alphabet, self.z)
    }

    fn to_builder(&self) -> Builder {
        let mut b = Builder::new(self.alphabet.degree());
        b.alive = vec![true; self.n];
        b.edges = self.edges.iter().cloned().map(Some).collect();
        b
    }

    /// True when no two edges with the same label share an endpoint in the same role.
    pub fn is_folded(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.edges.iter().all(|e| seen.insert((e.from, slot(e.label))) && seen.insert((e.to, slot(-e.label))))
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph core {\n");
        for v in 0..self.n {
            let shape = if v == 0 { "doublecircle" } else { "circle" };
            let _ = writeln!(s, "  {v} [shape={shape}];");
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  {} -> {} [label=\"{}\", tooltip=\"{}\"];",
                e.from,
                e.to,
                self.alphabet.symbol(e.label),
                Word::from_reduced(self.z, e.deco.clone())
            );
        }
        s.push_str("}\n");
        s
    }

    /// Plain-text serialization: header, vertex count, then one `edge` line per edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("core {} {}\nvertices {}\nbase 0\n", self.alphabet.rank, self.z.rank, self.n);
        for e in &self.edges {
            let deco: String = if e.deco.is_empty() {
                "1".into()
            } else {
                e.deco.iter().map(|&l| self.z.symbol(l)).collect()
            };
            let _ = writeln!(s, "edge {} {} {} {}", e.from, e.to, self.alphabet.symbol(e.label), deco);
        }
        s
    }

    pub fn from_text(text: &str, tag: Tag) -> Result<CoreGraph> {
        let bad = |m: &str| Error::Malformed(format!("graph text: {m}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let head: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if head.len() != 3 || head[0] != "core" {
            return Err(bad("missing header"));
        }
        let rank: u32 = head[1].parse().map_err(|_| bad("rank"))?;
        let zr: u32 = head[2].parse().map_err(|_| bad("z rank"))?;
        let alphabet = Alphabet::new(rank, tag)?;
        let z = Alphabet::new(zr, Tag::C)?;
        let mut n = None;
        let mut edges = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                ["vertices", k] => n = Some(k.parse::<usize>().map_err(|_| bad("vertex count"))?),
                ["base", "0"] => {}
                ["edge", a, b, l, d] => {
                    let from: usize = a.parse().map_err(|_| bad("edge source"))?;
                    let to: usize = b.parse().map_err(|_| bad("edge target"))?;
                    let label = Word::parse(alphabet, l)?;
                    if label.len() != 1 || label.letters()[0] < 0 {
                        return Err(bad("edge label must be one positive letter"));
                    }
                    let deco = Word::parse(z, d)?.into_letters();
                    edges.push(Edge { from, to, label: label.letters()[0], deco });
                }
                _ => return Err(bad(line)),
            }
        }
        let n = n.ok_or_else(|| bad("missing vertex count"))?;
        if edges.iter().any(|e| e.from >= n || e.to >= n) {
            return Err(bad("edge endpoint out of range"));
        }
        let g = CoreGraph::from_parts(alphabet, z, n, edges);
        if !g.is_folded() {
            return Err(bad("graph is not folded"));
        }
        Ok(g)
    }
}

/// Intersection of two subgroups via the based component of the product graph.
pub fn pullback(g1: &CoreGraph, g2: &CoreGraph) -> Result<CoreGraph> {
    if g1.alphabet != g2.alphabet {
        return Err(Error::AlphabetMismatch("pullback of graphs over different alphabets".into()));
    }
    let d = g1.alphabet.degree();
    let mut b = Builder::new(d);
    let mut ids: HashMap<(usize, usize), usize> = HashMap::from([((0, 0), 0)]);
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((u1, u2)) = queue.pop_front() {
        let u = ids[&(u1, u2)];
        for s in 0..d {
            let (Some((w1, e1)), Some((w2, _))) = (g1.adj[u1][s], g2.adj[u2][s]) else { continue };
            let w = match ids.get(&(w1, w2)) {
                Some(&w) => w,
                None => {
                    let w = b.add_vertex();
                    ids.insert((w1, w2), w);
                    queue.push_back((w1, w2));
                    w
                }
            };
            if s % 2 == 0 {
                b.edges.push(Some(Edge { from: u, to: w, label: letter_of_slot(s), deco: g1.edges[e1].deco.clone() }));
            }
        }
    }
    b.trim();
    Ok(b.finish(g1.alphabet, g1.z))
}

/// Schreier transversal read off the shortlex breadth-first spanning tree.
#[derive(Debug, Clone)]
pub struct Transversal {
    graph: CoreGraph,
    reps: Vec<Word>,
    tree: Vec<bool>,
    frontier: Vec<usize>,
}

impl Transversal {
    pub fn new(graph: CoreGraph) -> Self {
        let a = graph.alphabet;
        let mut reps: Vec<Option<Vec<Letter>>> = vec![None; graph.n];
        let mut tree = vec![false; graph.edges.len()];
        reps[0] = Some(Vec::new());
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for s in 0..a.degree() {
                if let Some((w, e)) = graph.adj[v][s] {
                    if reps[w].is_none() {
                        let mut r = reps[v].clone().unwrap();
                        r.push(letter_of_slot(s));
                        reps[w] = Some(r);
                        tree[e] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        let reps: Vec<Word> = reps.into_iter().map(|r| Word::from_reduced(a, r.unwrap())).collect();
        let frontier = (0..graph.n).filter(|&v| graph.missing_slots(v).next().is_some()).collect();
        Transversal { graph, reps, tree, frontier }
    }

    pub fn graph(&self) -> &CoreGraph {
        &self.graph
    }

    pub fn alphabet(&self) -> Alphabet {
        self.graph.alphabet
    }

    /// Representative of the coset of vertex `v`.
    pub fn representative(&self, v: usize) -> &Word {
        &self.reps[v]
    }

    pub fn internal_representatives(&self) -> &[Word] {
        &self.reps
    }

    pub fn is_tree_edge(&self, e: usize) -> bool {
        self.tree[e]
    }

    /// Vertices with at least one missing letter; the hanging trees of Γ* are rooted here.
    pub fn frontier(&self) -> &[usize] {
        &self.frontier
    }

    /// Decides `w ∈ S`.
    pub fn is_representative(&self, w: &[Letter]) -> bool {
        let mut v = 0;
        for &l in w {
            match self.graph.adj[v][slot(l)] {
                Some((next, e)) if self.tree[e] => v = next,
                Some(_) => return false,
                None => return true,
            }
        }
        true
    }

    /// Writes `g = c·s` with `c ∈ C` and `s` the representative of `Cg`.
    pub fn coset_decompose(&self, g: &Word) -> (Word, Word) {
        let a = self.graph.alphabet;
        let l = g.letters();
        match self.graph.trace(l) {
            Trace::Inside { end, .. } => {
                let s = self.reps[end].clone();
                (g.mul(&s.inverse()), s)
            }
            Trace::Left { pos, from, .. } => {
                let r = self.reps[from].letters();
                let mut s = r.to_vec();
                s.extend_from_slice(&l[pos..]);
                let c = mul_letters(&l[..pos], &invert_letters(r));
                (Word::from_reduced(a, c), Word::from_reduced(a, s))
            }
        }
    }

    /// Vertex of Γ where the path of `w` ends, or where it leaves Γ.
    pub fn anchor(&self, w: &[Letter]) -> (usize, bool) {
        match self.graph.trace(w) {
            Trace::Inside { end, .. } => (end, true),
            Trace::Left { from, .. } => (from, false),
        }
    }
}
