//! The Lipschitz geometry of Outer space: candidate loops, the asymmetric
//! metric, the thick part, factor projections, and finite covers.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::marked_graph::{reduce_path, Dart, DartPath, Edge, MarkedGraph};
use crate::stallings::SubgroupGraph;
use crate::words::Word;
use crate::ConjugacyClass;

/// Length of the immersed loop representing `alpha` in `g`.
pub fn length_of_class(g: &MarkedGraph, alpha: &ConjugacyClass) -> Result<f64> {
    g.class_length(alpha)
}

/// The candidate conjugacy classes of a marked graph: embedded circles,
/// figure eights (two circles meeting at one vertex), and barbells (two
/// disjoint circles joined by an embedded path). The supremum of length
/// ratios defining the Lipschitz metric is attained on this finite list.
pub fn candidate_loops(g: &MarkedGraph) -> Vec<ConjugacyClass> {
    // Candidates are classes, which only see the underlying metric marked
    // graph; contracting valence-2 vertices first keeps the edge-subset
    // enumeration small even for heavily subdivided graphs.
    let simplified = g.simplified();
    if simplified.edge_count() < g.edge_count() {
        return candidate_loops(&simplified);
    }
    let circles = embedded_circles(g);
    let mut classes: BTreeSet<ConjugacyClass> = BTreeSet::new();
    for c in &circles {
        classes.insert(g.loop_class(&c.darts));
    }
    for (i, c1) in circles.iter().enumerate() {
        for c2 in circles.iter().skip(i + 1) {
            let shared: Vec<usize> = c1
                .vertices
                .iter()
                .filter(|v| c2.vertices.contains(v))
                .copied()
                .collect();
            match shared.len() {
                1 => {
                    // figure eight at the shared vertex, both relative orientations
                    let v = shared[0];
                    let l1 = c1.rotate_to(v, g);
                    let l2 = c2.rotate_to(v, g);
                    classes.insert(g.loop_class(&concat(&l1, &l2)));
                    classes.insert(g.loop_class(&concat(&l1, &invert(&l2))));
                }
                0 => {
                    for p in connecting_paths(g, c1, c2) {
                        let start = g.dart_source(p[0]);
                        let end = g.dart_target(*p.last().unwrap());
                        let l1 = c1.rotate_to(start, g);
                        let l2 = c2.rotate_to(end, g);
                        for l2 in [l2.clone(), invert(&l2)] {
                            let mut loop_path = l1.clone();
                            loop_path.extend(p.iter().copied());
                            loop_path.extend(l2.iter().copied());
                            loop_path.extend(p.iter().rev().map(|d| d.reverse()));
                            classes.insert(g.loop_class(&loop_path));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    classes.into_iter().collect()
}

fn concat(a: &[Dart], b: &[Dart]) -> DartPath {
    let mut out = a.to_vec();
    out.extend_from_slice(b);
    out
}

fn invert(p: &[Dart]) -> DartPath {
    p.iter().rev().map(|d| d.reverse()).collect()
}

struct Circle {
    darts: DartPath,
    vertices: Vec<usize>,
}

impl Circle {
    fn rotate_to(&self, v: usize, g: &MarkedGraph) -> DartPath {
        let pos = self
            .darts
            .iter()
            .position(|&d| g.dart_source(d) == v)
            .expect("vertex on circle");
        let mut out = self.darts[pos..].to_vec();
        out.extend_from_slice(&self.darts[..pos]);
        out
    }
}

/// Embedded circles: connected edge subsets in which every incident vertex
/// has exactly two edge-ends.
fn embedded_circles(g: &MarkedGraph) -> Vec<Circle> {
    let ne = g.edge_count();
    let mut out = Vec::new();
    for mask in 1u64..(1 << ne) {
        let edges: Vec<usize> = (0..ne).filter(|&i| mask & (1 << i) != 0).collect();
        let mut degree = vec![0usize; g.vertex_count()];
        for &e in &edges {
            degree[g.edges()[e].u] += 1;
            degree[g.edges()[e].v] += 1;
        }
        if degree.iter().any(|&d| d != 0 && d != 2) {
            continue;
        }
        // walk the cycle; require it to use every chosen edge (connectivity)
        let first = edges[0];
        let mut darts = vec![Dart::new(first, false)];
        let mut used = vec![false; ne];
        used[first] = true;
        loop {
            let cur = *darts.last().unwrap();
            let v = g.dart_target(cur);
            if v == g.dart_source(darts[0]) {
                break;
            }
            let next = edges.iter().copied().find(|&e| {
                !used[e] && (g.edges()[e].u == v || g.edges()[e].v == v)
            });
            match next {
                Some(e) => {
                    let fwd = Dart::new(e, false);
                    let d = if g.dart_source(fwd) == v { fwd } else { fwd.reverse() };
                    used[e] = true;
                    darts.push(d);
                }
                None => break,
            }
        }
        if darts.len() != edges.len() {
            continue;
        }
        if g.dart_target(*darts.last().unwrap()) != g.dart_source(darts[0]) {
            continue;
        }
        let vertices: Vec<usize> = darts.iter().map(|&d| g.dart_source(d)).collect();
        out.push(Circle { darts, vertices });
    }
    out
}

/// Embedded paths from `c1` to `c2` whose interiors avoid both circles.
fn connecting_paths(g: &MarkedGraph, c1: &Circle, c2: &Circle) -> Vec<DartPath> {
    let mut out = Vec::new();
    let forbidden: Vec<usize> = c1.vertices.iter().chain(&c2.vertices).copied().collect();
    for &start in &c1.vertices {
        let mut path: DartPath = Vec::new();
        let mut visited = vec![false; g.vertex_count()];
        visited[start] = true;
        dfs(g, start, c2, &forbidden, &mut path, &mut visited, &mut out);
    }
    out
}

fn dfs(
    g: &MarkedGraph,
    v: usize,
    target: &Circle,
    forbidden: &[usize],
    path: &mut DartPath,
    visited: &mut Vec<bool>,
    out: &mut Vec<DartPath>,
) {
    for d in g.shape().darts_at(v) {
        let u = g.dart_target(d);
        if target.vertices.contains(&u) {
            let mut p = path.clone();
            p.push(d);
            out.push(p);
            continue;
        }
        if visited[u] || forbidden.contains(&u) {
            continue;
        }
        visited[u] = true;
        path.push(d);
        dfs(g, u, target, forbidden, path, visited, out);
        path.pop();
        visited[u] = false;
    }
}

/// The asymmetric Lipschitz distance `log sup len(alpha|H) / len(alpha|G)`,
/// with the supremum taken over the candidate loops of `G`.
pub fn lipschitz_distance(g: &MarkedGraph, h: &MarkedGraph) -> Result<f64> {
    Ok(lipschitz_distance_witnessed(g, h)?.0)
}

pub fn lipschitz_distance_witnessed(
    g: &MarkedGraph,
    h: &MarkedGraph,
) -> Result<(f64, ConjugacyClass)> {
    if g.rank() != h.rank() {
        return Err(Error::Invalid("rank mismatch".into()));
    }
    let mut best: Option<(f64, ConjugacyClass)> = None;
    for alpha in candidate_loops(g) {
        let ratio = h.class_length(&alpha)? / g.class_length(&alpha)?;
        if best.as_ref().map_or(true, |(b, _)| ratio > *b) {
            best = Some((ratio, alpha));
        }
    }
    let (ratio, witness) = best.expect("graphs have candidate loops");
    Ok((ratio.ln(), witness))
}

/// `d(G, H) + d(H, G)`: a genuine metric.
pub fn symmetrized_distance(g: &MarkedGraph, h: &MarkedGraph) -> Result<f64> {
    Ok(lipschitz_distance(g, h)? + lipschitz_distance(h, g)?)
}

/// Shortest class length and a witness; the minimum over candidates attains
/// the systole.
pub fn systole(g: &MarkedGraph) -> (f64, ConjugacyClass) {
    let mut best: Option<(f64, ConjugacyClass)> = None;
    for alpha in candidate_loops(g) {
        let len = g.class_length(&alpha).expect("candidates are nontrivial");
        if best.as_ref().map_or(true, |(b, _)| len < *b) {
            best = Some((len, alpha));
        }
    }
    best.expect("graphs have candidate loops")
}

/// True iff the systole is at least `epsilon`, with the shortest witness.
pub fn thick_check(g: &MarkedGraph, epsilon: f64) -> Result<(bool, ConjugacyClass)> {
    if !(epsilon > 0.0) {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let (sys, witness) = systole(g);
    Ok((sys >= epsilon, witness))
}


/// Free factors spanned by the proper, connected, noncontractible subgraphs,
/// as folded subgroup graphs over the marking's basis.
pub fn factor_projection(g: &MarkedGraph) -> Vec<SubgroupGraph> {
    let ne = g.edge_count();
    let mut seen_bases: BTreeSet<Vec<Word>> = BTreeSet::new();
    let mut out: Vec<SubgroupGraph> = Vec::new();
    for mask in 1u64..(1 << ne) {
        let edges: Vec<usize> = (0..ne).filter(|&i| mask & (1 << i) != 0).collect();
        let Some(basis) = subgraph_basis(g, &edges) else { continue };
        if basis.is_empty() || basis.len() >= g.rank() {
            continue;
        }
        if seen_bases.insert(basis.clone()) {
            let graph = SubgroupGraph::new(g.rank(), &basis).expect("valid basis words");
            if !out.contains(&graph) {
                out.push(graph);
            }
        }
    }
    out
}

/// A free basis (as words via the marking) of the fundamental group of the
/// subgraph spanned by `edges`, or `None` when disconnected.
fn subgraph_basis(g: &MarkedGraph, edges: &[usize]) -> Option<Vec<Word>> {
    let mut vertices: Vec<usize> =
        edges.iter().flat_map(|&e| [g.edges()[e].u, g.edges()[e].v]).collect();
    vertices.sort_unstable();
    vertices.dedup();
    let root = vertices[0];
    // spanning tree of the subgraph by BFS over the chosen edges
    let mut parent: std::collections::HashMap<usize, Dart> = std::collections::HashMap::new();
    let mut reached: BTreeSet<usize> = BTreeSet::from([root]);
    let mut tree_edge = vec![false; g.edge_count()];
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &e in edges {
            for d in [Dart::new(e, false), Dart::new(e, true)] {
                if g.dart_source(d) == v {
                    let u = g.dart_target(d);
                    if reached.insert(u) {
                        parent.insert(u, d);
                        tree_edge[e] = true;
                        queue.push_back(u);
                    }
                }
            }
        }
    }
    if reached.len() != vertices.len() {
        return None;
    }
    let path_from_root = |mut v: usize| -> DartPath {
        let mut p = Vec::new();
        while v != root {
            let d = parent[&v];
            p.push(d);
            v = g.dart_source(d);
        }
        p.reverse();
        p
    };
    let anchor = g.shape().tree_path(g.basepoint(), root, g.tree());
    let mut basis = Vec::new();
    for &e in edges {
        if tree_edge[e] {
            continue;
        }
        let d = Dart::new(e, false);
        let mut loop_path = anchor.clone();
        loop_path.extend(path_from_root(g.dart_source(d)));
        loop_path.push(d);
        loop_path.extend(invert(&path_from_root(g.dart_target(d))));
        loop_path.extend(invert(&anchor));
        basis.push(g.based_loop_word(&reduce_path(&loop_path)));
    }
    Some(basis)
}

/// The cover of `g` associated to a finite-index subgroup, marked by the
/// subgroup's spanning-tree basis. Edge lengths pull back; pass
/// `normalize` to rescale the total volume to one.
pub fn cover(g: &MarkedGraph, subgroup: &SubgroupGraph, normalize: bool) -> Result<MarkedGraph> {
    if subgroup.rank_of_alphabet() != g.rank() {
        return Err(Error::Invalid("rank mismatch".into()));
    }
    let n = subgroup.index().ok_or(Error::InfiniteIndex)?;
    // Dart cocycle: tree darts carry the identity, the j-th cobasis dart
    // carries the j-th inverse-marking word.
    let transport = |d: Dart, coset: usize| -> usize {
        let w = dart_word(g, d);
        let mut c = coset;
        for &x in w.letters() {
            c = subgroup.transition(c, x).expect("full cover");
        }
        c
    };
    let nv = g.vertex_count();
    let vertex_id = |v: usize, c: usize| c * nv + v;
    let mut edges = Vec::with_capacity(g.edge_count() * n);
    let mut lift_of = vec![vec![0usize; n]; g.edge_count()];
    for (i, e) in g.edges().iter().enumerate() {
        for c in 0..n {
            let c2 = transport(Dart::new(i, false), c);
            lift_of[i][c] = edges.len();
            edges.push(Edge {
                u: vertex_id(e.u, c),
                v: vertex_id(e.v, c2),
                len: e.len,
            });
        }
    }
    // Lift a based loop starting over coset 0.
    let lift_path = |path: &[Dart]| -> DartPath {
        let mut out = Vec::with_capacity(path.len());
        let mut c = 0usize;
        for &d in path {
            let next = transport(d, c);
            let base = if d.is_reversed() { next } else { c };
            out.push(Dart::new(lift_of[d.edge()][base], d.is_reversed()));
            c = next;
        }
        out
    };
    let basis = subgroup.basis();
    let marking: Vec<DartPath> = basis
        .iter()
        .map(|h| {
            let mut raw: DartPath = Vec::new();
            for &x in h.letters() {
                let path = &g.marking()[x.unsigned_abs() as usize - 1];
                let path: DartPath = if x > 0 { path.clone() } else { invert(path) };
                raw.extend(path);
            }
            reduce_path(&lift_path(&raw))
        })
        .collect();
    let covered = MarkedGraph::new(
        basis.len(),
        nv * n,
        edges,
        vertex_id(g.basepoint(), 0),
        marking,
    )?;
    Ok(if normalize { covered.normalized() } else { covered })
}

/// The group element read along one dart: trivial for spanning-tree darts,
/// the corresponding basis word for cobasis darts.
fn dart_word(g: &MarkedGraph, d: Dart) -> Word {
    let tree = g.tree();
    match tree.cobasis.iter().position(|&e| e == d.edge()) {
        None => Word::identity(),
        Some(j) => {
            // the stored basis loop orientation is the forward dart
            let base = &g.inverse_marking()[j];
            // inverse_marking[j] is the preimage of tree-basis letter j+1,
            // i.e. the word whose marking loop crosses dart j forward once;
            // conjugate positioning is already built into the word.
            if d.is_reversed() {
                base.inverse()
            } else {
                base.clone()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::{enumerate_conjugacy_classes, parse_word};

    fn class(s: &str) -> ConjugacyClass {
        ConjugacyClass::from_word(&parse_word(s, 3).unwrap())
    }

    #[test]
    fn rose_candidates() {
        let rose = MarkedGraph::standard_rose(3);
        let cands = candidate_loops(&rose);
        // petals a, b, c plus figure eights ab, aB, ac, aC, bc, bC
        for s in ["a", "b", "c", "ab", "aB", "ac", "aC", "bc", "bC"] {
            assert!(cands.contains(&class(s)), "{s} missing");
        }
        assert_eq!(cands.len(), 9);
    }

    #[test]
    fn theta_candidates_are_three_circles() {
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
        assert_eq!(candidate_loops(&theta).len(), 3);
    }

    #[test]
    fn distance_examples_from_roses() {
        let g = MarkedGraph::rose(3, &[1.0 / 3.0; 3]).unwrap();
        let h = MarkedGraph::rose(3, &[0.5, 0.25, 0.25]).unwrap();
        let d_gh = lipschitz_distance(&g, &h).unwrap();
        let d_hg = lipschitz_distance(&h, &g).unwrap();
        assert!((d_gh - (1.5f64).ln()).abs() < 1e-12, "{d_gh}");
        assert!((d_hg - (4.0f64 / 3.0).ln()).abs() < 1e-12, "{d_hg}");
        assert!((symmetrized_distance(&g, &h).unwrap() - 2.0f64.ln()).abs() < 1e-12);
        assert!(lipschitz_distance(&g, &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn distance_agrees_with_class_enumeration_oracle() {
        let g = MarkedGraph::rose(3, &[1.0 / 3.0; 3]).unwrap();
        let h = MarkedGraph::rose(3, &[0.5, 0.25, 0.25]).unwrap();
        let classes = enumerate_conjugacy_classes(3, 6);
        let mut best: f64 = 0.0;
        for alpha in &classes {
            let r = h.class_length(alpha).unwrap() / g.class_length(alpha).unwrap();
            best = best.max(r);
        }
        assert!((lipschitz_distance(&g, &h).unwrap() - best.ln()).abs() < 1e-12);
    }

    #[test]
    fn thick_part_examples() {
        let rose = MarkedGraph::standard_rose(3);
        let (ok, witness) = thick_check(&rose, 1.0 / 3.0).unwrap();
        assert!(ok);
        assert_eq!(witness, class("a"));
        let (ok, _) = thick_check(&rose, 0.34).unwrap();
        assert!(!ok);
        assert!(thick_check(&rose, 0.0).is_err());
    }

    #[test]
    fn rose_factors() {
        let rose = MarkedGraph::standard_rose(3);
        let factors = factor_projection(&rose);
        assert_eq!(factors.len(), 6);
        let expected: Vec<SubgroupGraph> = [
            vec!["a"],
            vec!["b"],
            vec!["c"],
            vec!["a", "b"],
            vec!["a", "c"],
            vec!["b", "c"],
        ]
        .iter()
        .map(|gens| {
            let words: Vec<Word> = gens.iter().map(|s| parse_word(s, 3).unwrap()).collect();
            SubgroupGraph::new(3, &words).unwrap()
        })
        .collect();
        for f in &expected {
            assert!(factors.contains(f));
        }
    }

    #[test]
    fn factors_are_proper_nontrivial() {
        let edges = vec![
            Edge { u: 0, v: 1, len: 0.2 },
            Edge { u: 0, v: 1, len: 0.2 },
            Edge { u: 0, v: 0, len: 0.3 },
            Edge { u: 1, v: 1, len: 0.3 },
        ];
        let marking = vec![
            vec![Dart::new(0, false), Dart::new(1, true)],
            vec![Dart::new(2, false)],
            vec![Dart::new(0, false), Dart::new(3, false), Dart::new(0, true)],
        ];
        let g = MarkedGraph::new(3, 2, edges, 0, marking).unwrap();
        let factors = factor_projection(&g);
        assert!(!factors.is_empty());
        for f in &factors {
            let r = f.subgroup_rank();
            assert!(r >= 1 && r < 3);
        }
    }

    #[test]
    fn index_two_cover_shape() {
        let rose = MarkedGraph::standard_rose(3);
        let sub = SubgroupGraph::new(
            3,
            &["aa", "b", "abA", "c", "acA"]
                .iter()
                .map(|s| parse_word(s, 3).unwrap())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let cov = cover(&rose, &sub, false).unwrap();
        assert_eq!(cov.vertex_count(), 2);
        assert_eq!(cov.edge_count(), 6);
        assert_eq!(cov.rank(), 5);
        assert!((cov.volume() - 2.0).abs() < 1e-12);
        // class lengths in the cover match the cyclic lengths downstairs
        let h_basis = sub.basis();
        for (i, b) in h_basis.iter().enumerate() {
            let c = ConjugacyClass::from_word(&Word::generator(i + 1));
            let len = cov.class_length(&c).unwrap();
            let (core, _) = b.cyclic_split();
            let expect = core.len() as f64 / 3.0;
            assert!((len - expect).abs() < 1e-12, "basis {b} len {len} != {expect}");
        }
    }

    #[test]
    fn index_one_cover_is_marked_isometric() {
        let g = MarkedGraph::rose(3, &[0.5, 0.3, 0.2]).unwrap();
        let sub = SubgroupGraph::new(
            3,
            &["a", "b", "c"].iter().map(|s| parse_word(s, 3).unwrap()).collect::<Vec<_>>(),
        )
        .unwrap();
        let cov = cover(&g, &sub, false).unwrap();
        assert!(symmetrized_distance(&g, &cov).unwrap().abs() < 1e-9);
    }

    #[test]
    fn infinite_index_cover_errors() {
        let rose = MarkedGraph::standard_rose(3);
        let sub = SubgroupGraph::new(
            3,
            &["a", "b"].iter().map(|s| parse_word(s, 3).unwrap()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(matches!(cover(&rose, &sub, false), Err(Error::InfiniteIndex)));
    }
}
