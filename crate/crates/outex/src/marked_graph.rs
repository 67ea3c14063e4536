//! Marked metric core graphs: points of (projectivized) Outer space.
//!
//! A `MarkedGraph` is a finite connected core graph with positive edge
//! lengths together with a marking, one based closed edge path per basis
//! generator. Loops translate between the free group and the graph through
//! the marking and its computed inverse.

use std::collections::VecDeque;
use std::fmt;

use crate::automorphism::{invert_basis_images, Automorphism};
use crate::error::{Error, Result};
use crate::words::{Letter, Word};
use crate::ConjugacyClass;

/// A directed edge: edge index and a direction flag (`false` = forward,
/// from `u` to `v`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Dart(pub u32);

impl Dart {
    pub fn new(edge: usize, reversed: bool) -> Self {
        Dart((edge as u32) << 1 | u32::from(reversed))
    }

    pub fn edge(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_reversed(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn reverse(self) -> Self {
        Dart(self.0 ^ 1)
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub len: f64,
}

pub type DartPath = Vec<Dart>;

#[derive(Clone, Debug)]
pub struct MarkedGraph {
    rank: usize,
    vertex_count: usize,
    edges: Vec<Edge>,
    basepoint: usize,
    marking: Vec<DartPath>,
    /// Image of each spanning-tree basis loop under the marking inverse.
    inverse_marking: Vec<Word>,
    /// Deterministic spanning tree used for loop/word translation.
    tree: SpanningTree,
}

#[derive(Clone, Debug)]
pub struct SpanningTree {
    /// Dart leading from the parent to each vertex; basepoint carries none.
    pub parent_dart: Vec<Option<Dart>>,
    /// Non-tree edges in deterministic order; each contributes one basis loop.
    pub cobasis: Vec<usize>,
    /// Edge index -> position in `cobasis`, if non-tree.
    slot: Vec<Option<usize>>,
}

impl MarkedGraph {
    pub fn new(
        rank: usize,
        vertex_count: usize,
        edges: Vec<Edge>,
        basepoint: usize,
        marking: Vec<DartPath>,
    ) -> Result<Self> {
        if rank < 1 {
            return Err(Error::Invalid("rank must be at least 1".into()));
        }
        if basepoint >= vertex_count {
            return Err(Error::Invalid("basepoint out of range".into()));
        }
        for (i, e) in edges.iter().enumerate() {
            if e.u >= vertex_count || e.v >= vertex_count {
                return Err(Error::Invalid(format!("edge {i} endpoint out of range")));
            }
            if !(e.len > 0.0) || !e.len.is_finite() {
                return Err(Error::Invalid(format!("edge {i} length must be positive")));
            }
        }
        if marking.len() != rank {
            return Err(Error::Invalid(format!(
                "expected {rank} marking loops, got {}",
                marking.len()
            )));
        }
        let graph = GraphShape { vertex_count, edges: &edges };
        if !graph.connected() {
            return Err(Error::Invalid("graph is not connected".into()));
        }
        if graph.betti() != rank {
            return Err(Error::Invalid(format!(
                "first Betti number {} does not match rank {rank}",
                graph.betti()
            )));
        }
        if let Some(v) = (0..vertex_count).find(|&v| graph.degree(v) < 2) {
            return Err(Error::Invalid(format!("vertex {v} has valence < 2")));
        }
        for (i, path) in marking.iter().enumerate() {
            check_path(&graph, path)
                .map_err(|e| Error::Invalid(format!("marking loop {i}: {e}")))?;
            if path.is_empty() {
                return Err(Error::Invalid(format!("marking loop {i} is empty")));
            }
            let (s, t) = (graph.dart_source(path[0]), graph.dart_target(*path.last().unwrap()));
            if s != basepoint || t != basepoint {
                return Err(Error::Invalid(format!(
                    "marking loop {i} is not based at the basepoint"
                )));
            }
        }
        let marking: Vec<DartPath> = marking.iter().map(|p| reduce_path(p)).collect();
        let tree = graph.spanning_tree(basepoint);
        // Express marking loops in the spanning-tree basis and invert: the
        // marking must identify the fundamental group with the free group.
        let expressed: Vec<Word> = marking
            .iter()
            .map(|p| graph.express_in_tree_basis(p, &tree))
            .collect();
        let inverse_marking = invert_basis_images(&expressed, rank).ok_or_else(|| {
            Error::Invalid("marking loops do not generate the fundamental group".into())
        })?;
        Ok(MarkedGraph { rank, vertex_count, edges, basepoint, marking, inverse_marking, tree })
    }

    /// The rose: one vertex, `rank` loops, petal `k` marked by generator `k`.
    pub fn rose(rank: usize, lengths: &[f64]) -> Result<Self> {
        if lengths.len() != rank {
            return Err(Error::Invalid("one length per petal required".into()));
        }
        let edges = lengths.iter().map(|&len| Edge { u: 0, v: 0, len }).collect();
        let marking = (0..rank).map(|k| vec![Dart::new(k, false)]).collect();
        MarkedGraph::new(rank, 1, edges, 0, marking)
    }

    /// Unit-volume rose with equal petal lengths.
    pub fn standard_rose(rank: usize) -> Self {
        MarkedGraph::rose(rank, &vec![1.0 / rank as f64; rank]).expect("valid rose")
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    pub fn marking(&self) -> &[DartPath] {
        &self.marking
    }

    pub fn tree(&self) -> &SpanningTree {
        &self.tree
    }

    pub fn inverse_marking(&self) -> &[Word] {
        &self.inverse_marking
    }

    pub fn edge_len(&self, e: usize) -> f64 {
        self.edges[e].len
    }

    pub fn volume(&self) -> f64 {
        self.edges.iter().map(|e| e.len).sum()
    }

    /// Rescales all edge lengths to total volume one.
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.volume())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.len *= factor;
        }
        g
    }

    pub fn shape(&self) -> GraphShape<'_> {
        GraphShape { vertex_count: self.vertex_count, edges: &self.edges }
    }

    pub fn dart_source(&self, d: Dart) -> usize {
        self.shape().dart_source(d)
    }

    pub fn dart_target(&self, d: Dart) -> usize {
        self.shape().dart_target(d)
    }

    pub fn path_len(&self, p: &[Dart]) -> f64 {
        p.iter().map(|d| self.edge_len(d.edge())).sum()
    }

    /// The immersed loop of a conjugacy class: marking paths concatenated
    /// per letter, then reduced cyclically. Errors on the trivial class.
    pub fn class_loop(&self, alpha: &ConjugacyClass) -> Result<DartPath> {
        if alpha.is_trivial() {
            return Err(Error::TrivialWord);
        }
        let mut raw: DartPath = Vec::new();
        for &x in alpha.cyclic_word().letters() {
            let path = &self.marking[x.unsigned_abs() as usize - 1];
            if x > 0 {
                raw.extend(path.iter().copied());
            } else {
                raw.extend(path.iter().rev().map(|d| d.reverse()));
            }
        }
        let mut loop_path = reduce_path(&raw);
        cyclic_reduce_path(&mut loop_path);
        if loop_path.is_empty() {
            return Err(Error::Invalid("marking collapsed a nontrivial class".into()));
        }
        Ok(loop_path)
    }

    /// Length of the immersed loop representing a class.
    pub fn class_length(&self, alpha: &ConjugacyClass) -> Result<f64> {
        Ok(self.path_len(&self.class_loop(alpha)?))
    }

    /// The word of a based loop at the basepoint, through the marking inverse.
    pub fn based_loop_word(&self, path: &[Dart]) -> Word {
        let expr = self.shape().express_in_tree_basis(path, &self.tree);
        substitute_words(&self.inverse_marking, &expr)
    }

    /// The conjugacy class of a free (not based) loop.
    pub fn loop_class(&self, cycle: &[Dart]) -> ConjugacyClass {
        let start = self.dart_source(cycle[0]);
        let to_start = self.shape().tree_path(self.basepoint, start, &self.tree);
        let mut based = to_start.clone();
        based.extend(cycle.iter().copied());
        based.extend(to_start.iter().rev().map(|d| d.reverse()));
        ConjugacyClass::from_word(&self.based_loop_word(&reduce_path(&based)))
    }

    /// Contracts valence-2 vertices (other than the basepoint) by merging
    /// their two edges; marking paths are rewritten accordingly.
    pub fn simplified(&self) -> Self {
        let mut g = self.clone();
        'outer: loop {
            let shape = GraphShape { vertex_count: g.vertex_count, edges: &g.edges };
            for v in 0..g.vertex_count {
                if v == g.basepoint || shape.degree(v) != 2 {
                    continue;
                }
                let darts = shape.darts_at(v);
                let (d1, d2) = (darts[0], darts[1]);
                if d1.edge() == d2.edge() {
                    continue;
                }
                g = g.contract_valence_two(v, d1, d2);
                continue 'outer;
            }
            return g;
        }
    }

    fn contract_valence_two(&self, v: usize, d1: Dart, d2: Dart) -> Self {
        // Replace the two edges meeting at v by one edge traversing
        // d1.reverse() then d2.
        let (e1, e2) = (d1.edge(), d2.edge());
        let new_edge = Edge {
            u: self.dart_target(d1),
            v: self.dart_target(d2),
            len: self.edge_len(e1) + self.edge_len(e2),
        };
        let merged_fwd: Vec<Dart> = vec![d1.reverse(), d2];
        let mut edges: Vec<Edge> = Vec::with_capacity(self.edges.len() - 1);
        let mut remap: Vec<Option<usize>> = vec![None; self.edges.len()];
        for (i, e) in self.edges.iter().enumerate() {
            if i != e1 && i != e2 {
                remap[i] = Some(edges.len());
                edges.push(*e);
            }
        }
        let merged_index = edges.len();
        edges.push(new_edge);
        let rewrite = |path: &[Dart]| -> DartPath {
            let mut out = Vec::with_capacity(path.len());
            let mut i = 0;
            while i < path.len() {
                let d = path[i];
                if let Some(ni) = remap[d.edge()] {
                    out.push(Dart::new(ni, d.is_reversed()));
                    i += 1;
                } else {
                    let fwd = i + 1 < path.len()
                        && path[i] == merged_fwd[0]
                        && path[i + 1] == merged_fwd[1];
                    let bwd = i + 1 < path.len()
                        && path[i] == merged_fwd[1].reverse()
                        && path[i + 1] == merged_fwd[0].reverse();
                    assert!(fwd || bwd, "path does not cross the contracted vertex cleanly");
                    out.push(Dart::new(merged_index, bwd));
                    i += 2;
                }
            }
            out
        };
        let marking: Vec<DartPath> = self.marking.iter().map(|p| rewrite(p)).collect();
        let mut vertex_map: Vec<usize> = Vec::with_capacity(self.vertex_count);
        let mut next = 0usize;
        for u in 0..self.vertex_count {
            vertex_map.push(if u == v { usize::MAX } else { next });
            if u != v {
                next += 1;
            }
        }
        let edges: Vec<Edge> = edges
            .into_iter()
            .map(|e| Edge { u: vertex_map[e.u], v: vertex_map[e.v], len: e.len })
            .collect();
        MarkedGraph::new(self.rank, next, edges, vertex_map[self.basepoint], marking)
            .expect("contraction preserves validity")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rank = None;
        let mut vertices = None;
        let mut basepoint = 0usize;
        let mut edges: Vec<Edge> = Vec::new();
        let mut marking: Vec<(usize, DartPath)> = Vec::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse(format!("line {}: {msg}", lineno + 1));
            let mut tokens = line.split_whitespace();
            let key = tokens.next().unwrap();
            match key {
                "rank" => rank = Some(parse_num(tokens.next(), "rank").map_err(err)?),
                "vertices" => {
                    vertices = Some(parse_num(tokens.next(), "vertices").map_err(err)?)
                }
                "basepoint" => basepoint = parse_num(tokens.next(), "basepoint").map_err(err)?,
                "edge" => {
                    let u = parse_num(tokens.next(), "edge source").map_err(err)?;
                    let v = parse_num(tokens.next(), "edge target").map_err(err)?;
                    let len: f64 = tokens
                        .next()
                        .ok_or_else(|| err("missing edge length".into()))?
                        .parse()
                        .map_err(|_| err("bad edge length".into()))?;
                    edges.push(Edge { u, v, len });
                }
                "marking" => {
                    let rank = rank.ok_or_else(|| err("rank must precede marking".into()))?;
                    let gen = tokens.next().ok_or_else(|| err("missing generator".into()))?;
                    let word = Word::parse(gen, rank).map_err(|e| err(e.to_string()))?;
                    let k = match word.letters() {
                        &[x] if x > 0 => x as usize,
                        _ => return Err(err("marking generator must be one positive letter".into())),
                    };
                    let mut path = Vec::new();
                    for tok in tokens {
                        let (rev, num) = match tok.as_bytes().first() {
                            Some(b'e') => (false, &tok[1..]),
                            Some(b'E') => (true, &tok[1..]),
                            _ => return Err(err(format!("bad dart token {tok:?}"))),
                        };
                        let e: usize =
                            num.parse().map_err(|_| err(format!("bad dart token {tok:?}")))?;
                        path.push(Dart::new(e, rev));
                    }
                    marking.push((k, path));
                }
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
        }
        let rank = rank.ok_or_else(|| Error::Parse("missing rank".into()))?;
        let vertices = vertices.ok_or_else(|| Error::Parse("missing vertices".into()))?;
        let mut paths: Vec<Option<DartPath>> = vec![None; rank];
        for (k, p) in marking {
            if k == 0 || k > rank {
                return Err(Error::Parse(format!("marking generator {k} out of range")));
            }
            if paths[k - 1].replace(p).is_some() {
                return Err(Error::Parse(format!("duplicate marking for generator {k}")));
            }
        }
        let marking: Vec<DartPath> = paths
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| Error::Parse(format!("missing marking {}", i + 1))))
            .collect::<Result<_>>()?;
        MarkedGraph::new(rank, vertices, edges, basepoint, marking)
    }
}

fn parse_num(tok: Option<&str>, what: &str) -> std::result::Result<usize, String> {
    tok.ok_or_else(|| format!("missing {what}"))?
        .parse()
        .map_err(|_| format!("bad {what}"))
}

impl fmt::Display for MarkedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rank {}", self.rank)?;
        writeln!(f, "vertices {}", self.vertex_count)?;
        writeln!(f, "basepoint {}", self.basepoint)?;
        for e in &self.edges {
            writeln!(f, "edge {} {} {}", e.u, e.v, e.len)?;
        }
        for (i, path) in self.marking.iter().enumerate() {
            write!(f, "marking {}", Word::generator(i + 1))?;
            for d in path {
                write!(f, " {}{}", if d.is_reversed() { 'E' } else { 'e' }, d.edge())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Borrowed combinatorial view of a graph.
pub struct GraphShape<'a> {
    pub vertex_count: usize,
    pub edges: &'a [Edge],
}

impl GraphShape<'_> {
    pub fn dart_source(&self, d: Dart) -> usize {
        let e = &self.edges[d.edge()];
        if d.is_reversed() {
            e.v
        } else {
            e.u
        }
    }

    pub fn dart_target(&self, d: Dart) -> usize {
        self.dart_source(d.reverse())
    }

    pub fn darts_at(&self, v: usize) -> Vec<Dart> {
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.u == v {
                out.push(Dart::new(i, false));
            }
            if e.v == v {
                out.push(Dart::new(i, true));
            }
        }
        out
    }

    pub fn degree(&self, v: usize) -> usize {
        self.darts_at(v).len()
    }

    pub fn betti(&self) -> usize {
        self.edges.len() + 1 - self.vertex_count
    }

    pub fn connected(&self) -> bool {
        if self.vertex_count == 0 {
            return false;
        }
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for d in self.darts_at(v) {
                let u = self.dart_target(d);
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.vertex_count
    }

    /// Breadth-first spanning tree with deterministic dart ordering.
    pub fn spanning_tree(&self, root: usize) -> SpanningTree {
        let mut parent_dart: Vec<Option<Dart>> = vec![None; self.vertex_count];
        let mut reached = vec![false; self.vertex_count];
        reached[root] = true;
        let mut tree_edges = vec![false; self.edges.len()];
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            let mut darts = self.darts_at(v);
            darts.sort();
            for d in darts {
                let u = self.dart_target(d);
                if !reached[u] {
                    reached[u] = true;
                    parent_dart[u] = Some(d);
                    tree_edges[d.edge()] = true;
                    queue.push_back(u);
                }
            }
        }
        let mut cobasis = Vec::new();
        let mut slot = vec![None; self.edges.len()];
        for (i, &in_tree) in tree_edges.iter().enumerate() {
            if !in_tree {
                slot[i] = Some(cobasis.len());
                cobasis.push(i);
            }
        }
        SpanningTree { parent_dart, cobasis, slot }
    }

    /// Tree geodesic between two vertices.
    pub fn tree_path(&self, from: usize, to: usize, tree: &SpanningTree) -> DartPath {
        let ascend = |mut v: usize| {
            let mut path = Vec::new();
            while let Some(d) = tree.parent_dart[v] {
                path.push(d);
                v = self.dart_source(d);
            }
            path.reverse();
            path
        };
        let (pf, pt) = (ascend(from), ascend(to));
        let mut common = 0;
        while common < pf.len() && common < pt.len() && pf[common] == pt[common] {
            common += 1;
        }
        let mut out: DartPath = pf[common..].iter().rev().map(|d| d.reverse()).collect();
        out.extend(pt[common..].iter().copied());
        out
    }

    /// The word, over one letter per non-tree edge, spelled by the non-tree
    /// crossings of a based loop.
    pub fn express_in_tree_basis(&self, path: &[Dart], tree: &SpanningTree) -> Word {
        let mut letters: Vec<Letter> = Vec::new();
        for d in path {
            if let Some(i) = tree.slot[d.edge()] {
                let sign = if d.is_reversed() { -1 } else { 1 };
                letters.push(sign * (i + 1) as Letter);
            }
        }
        Word::reduce(&letters)
    }
}

fn check_path(graph: &GraphShape, path: &[Dart]) -> std::result::Result<(), String> {
    if path.iter().any(|d| d.edge() >= graph.edges.len()) {
        return Err("dart out of range".into());
    }
    for pair in path.windows(2) {
        if graph.dart_target(pair[0]) != graph.dart_source(pair[1]) {
            return Err("path is not continuous".into());
        }
    }
    Ok(())
}

/// Cancels adjacent dart/reverse-dart pairs.
pub fn reduce_path(path: &[Dart]) -> DartPath {
    let mut out: DartPath = Vec::with_capacity(path.len());
    for &d in path {
        if out.last().is_some_and(|&p| p == d.reverse()) {
            out.pop();
        } else {
            out.push(d);
        }
    }
    out
}

/// Rotates away cancellations across the wrap-around point.
pub fn cyclic_reduce_path(path: &mut DartPath) {
    while path.len() >= 2 && path.first().unwrap().reverse() == *path.last().unwrap() {
        path.pop();
        path.remove(0);
    }
}

pub(crate) fn substitute_words(images: &[Word], w: &Word) -> Word {
    let mut out = Word::identity();
    for &x in w.letters() {
        let img = &images[x.unsigned_abs() as usize - 1];
        out = out.concat(&if x > 0 { img.clone() } else { img.inverse() });
    }
    out
}

/// Re-marks `g` by precomposition so that classes measure through `phi`:
/// `len(alpha | act(phi, g)) = len(phi^-1(alpha) | g)`.
pub fn act(phi: &Automorphism, g: &MarkedGraph) -> MarkedGraph {
    assert_eq!(phi.rank(), g.rank(), "rank mismatch");
    let marking: Vec<DartPath> = (1..=g.rank())
        .map(|k| {
            let word = phi.apply_inverse(&Word::generator(k));
            let mut raw: DartPath = Vec::new();
            for &x in word.letters() {
                let path = &g.marking()[x.unsigned_abs() as usize - 1];
                if x > 0 {
                    raw.extend(path.iter().copied());
                } else {
                    raw.extend(path.iter().rev().map(|d| d.reverse()));
                }
            }
            reduce_path(&raw)
        })
        .collect();
    MarkedGraph::new(g.rank(), g.vertex_count(), g.edges().to_vec(), g.basepoint(), marking)
        .expect("acting preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::parse_word;

    fn class(s: &str) -> ConjugacyClass {
        ConjugacyClass::from_word(&parse_word(s, 3).unwrap())
    }

    #[test]
    fn rose_construction_and_volume() {
        let rose = MarkedGraph::standard_rose(3);
        assert_eq!(rose.vertex_count(), 1);
        assert_eq!(rose.edge_count(), 3);
        assert!((rose.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn class_loop_measures_petals() {
        let rose = MarkedGraph::standard_rose(3);
        assert!((rose.class_length(&class("a")).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((rose.class_length(&class("ab")).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        // cyclic reduction before measuring
        assert!((rose.class_length(&class("abA")).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(rose.class_length(&ConjugacyClass::from_word(&Word::identity())).is_err());
    }

    #[test]
    fn loop_word_round_trip_on_rose() {
        let rose = MarkedGraph::standard_rose(3);
        for s in ["a", "ab", "abC", "aabbcc"] {
            let c = class(s);
            let l = rose.class_loop(&c).unwrap();
            assert_eq!(rose.loop_class(&l), c, "{s}");
        }
    }

    #[test]
    fn theta_graph_validates() {
        let edges = vec![
            Edge { u: 0, v: 1, len: 0.4 },
            Edge { u: 0, v: 1, len: 0.3 },
            Edge { u: 0, v: 1, len: 0.3 },
        ];
        let marking = vec![
            vec![Dart::new(0, false), Dart::new(1, true)],
            vec![Dart::new(0, false), Dart::new(2, true)],
        ];
        let theta = MarkedGraph::new(2, 2, edges, 0, marking).unwrap();
        assert_eq!(theta.rank(), 2);
        let c = ConjugacyClass::from_word(&parse_word("a", 2).unwrap());
        assert!((theta.class_length(&c).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_markings() {
        let edges = vec![Edge { u: 0, v: 0, len: 0.5 }, Edge { u: 0, v: 0, len: 0.5 }];
        let marking = vec![vec![Dart::new(0, false)], vec![Dart::new(0, false)]];
        assert!(MarkedGraph::new(2, 1, edges, 0, marking).is_err());
    }

    #[test]
    fn parse_print_round_trip() {
        let rose = MarkedGraph::standard_rose(3);
        let text = rose.to_string();
        let back = MarkedGraph::parse(&text).unwrap();
        assert_eq!(back.to_string(), text);
        assert!(MarkedGraph::parse("rank 3\nvertices 1\nedge 0 0 nope\n").is_err());
        assert!(MarkedGraph::parse("nonsense 1\n").is_err());
    }

    #[test]
    fn act_length_contract() {
        use crate::automorphism::nielsen_moves;
        let rose = MarkedGraph::rose(3, &[0.5, 0.25, 0.25]).unwrap();
        for phi in nielsen_moves(3) {
            let moved = act(&phi, &rose);
            for s in ["a", "ab", "ac", "abC", "bc"] {
                let alpha = class(s);
                let lhs = moved.class_length(&alpha).unwrap();
                let pulled =
                    ConjugacyClass::from_word(&phi.apply_inverse(alpha.cyclic_word()));
                let rhs = rose.class_length(&pulled).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "{phi:?} {s}");
            }
        }
    }

    #[test]
    fn simplify_contracts_subdivision() {
        let edges = vec![
            Edge { u: 0, v: 1, len: 0.2 },
            Edge { u: 1, v: 0, len: 0.2 },
            Edge { u: 0, v: 0, len: 0.3 },
            Edge { u: 0, v: 0, len: 0.3 },
        ];
        let marking = vec![
            vec![Dart::new(0, false), Dart::new(1, false)],
            vec![Dart::new(2, false)],
            vec![Dart::new(3, false)],
        ];
        let g = MarkedGraph::new(3, 2, edges, 0, marking).unwrap();
        let s = g.simplified();
        assert_eq!(s.vertex_count(), 1);
        assert_eq!(s.edge_count(), 3);
        for name in ["a", "b", "c", "ab"] {
            let c = class(name);
            let lg = g.class_length(&c).unwrap();
            let ls = s.class_length(&c).unwrap();
            assert!((lg - ls).abs() < 1e-12);
        }
    }
}
