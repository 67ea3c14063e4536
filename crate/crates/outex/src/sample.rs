//! Seeded generators for experiments and tests: words, automorphisms, and
//! random marked graphs.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::automorphism::{nielsen_moves, Automorphism};
use crate::marked_graph::{reduce_path, Dart, DartPath, Edge, MarkedGraph};
use crate::words::{Letter, Word};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// The shipped infinite-order example: a -> b, b -> c, c -> ab. Its
/// abelianization has characteristic polynomial x^3 - x - 1 with no root of
/// unity, so no power is inner.
pub fn tribonacci() -> Automorphism {
    let w = |s: &str| Word::parse(s, 3).unwrap();
    Automorphism::new(3, vec![w("b"), w("c"), w("ab")], vec![w("cA"), w("a"), w("b")]).unwrap()
}

/// The basis 3-cycle a -> b -> c -> a, of order three.
pub fn basis_cycle() -> Automorphism {
    let w = |s: &str| Word::parse(s, 3).unwrap();
    Automorphism::new(3, vec![w("b"), w("c"), w("a")], vec![w("c"), w("a"), w("b")]).unwrap()
}

/// An automorphism preserving the proper free factor <a, b> (and fixing c):
/// a -> ab, b -> a, c -> c.
pub fn invariant_factor() -> Automorphism {
    let w = |s: &str| Word::parse(s, 3).unwrap();
    Automorphism::new(3, vec![w("ab"), w("a"), w("c")], vec![w("b"), w("Ba"), w("c")]).unwrap()
}

pub fn random_word(rng: &mut StdRng, rank: usize, len: usize) -> Word {
    let raw: Vec<Letter> = (0..len)
        .map(|_| {
            let k = rng.gen_range(1..=rank as Letter);
            if rng.gen() {
                k
            } else {
                -k
            }
        })
        .collect();
    Word::reduce(&raw)
}

/// A random composition of `depth` elementary Nielsen moves.
pub fn random_automorphism(rng: &mut StdRng, rank: usize, depth: usize) -> Automorphism {
    let moves = nielsen_moves(rank);
    let mut phi = Automorphism::identity(rank);
    for _ in 0..depth {
        let m = &moves[rng.gen_range(0..moves.len())];
        phi = if rng.gen() { phi.compose(m) } else { m.compose(&phi) };
    }
    phi
}

/// A volume-one rose with random petal lengths and a random marking.
pub fn random_marked_rose(rng: &mut StdRng, rank: usize, depth: usize) -> MarkedGraph {
    let lengths: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.5..1.5)).collect();
    let rose = MarkedGraph::rose(rank, &lengths).unwrap().normalized();
    let phi = random_automorphism(rng, rank, depth);
    crate::marked_graph::act(&phi, &rose)
}

/// A random connected core graph of the requested rank with at most
/// `max_edges` edges, unit volume, marked by a random automorphism composed
/// with the spanning-tree basis identification.
pub fn random_marked_graph(
    rng: &mut StdRng,
    rank: usize,
    max_edges: usize,
    depth: usize,
) -> MarkedGraph {
    loop {
        let max_extra = max_edges.saturating_sub(rank).min(2);
        let vertices = 1 + rng.gen_range(0..=max_extra);
        let edge_count = vertices + rank - 1;
        if edge_count > max_edges {
            continue;
        }
        // random spanning tree then random extra endpoints
        let mut edges: Vec<Edge> = Vec::with_capacity(edge_count);
        for v in 1..vertices {
            let u = rng.gen_range(0..v);
            edges.push(Edge { u, v, len: rng.gen_range(0.5..1.5) });
        }
        while edges.len() < edge_count {
            let u = rng.gen_range(0..vertices);
            let v = rng.gen_range(0..vertices);
            edges.push(Edge { u, v, len: rng.gen_range(0.5..1.5) });
        }
        let shape = crate::marked_graph::GraphShape { vertex_count: vertices, edges: &edges };
        if (0..vertices).any(|v| shape.degree(v) < 3) {
            continue;
        }
        let tree = shape.spanning_tree(0);
        if tree.cobasis.len() != rank {
            continue;
        }
        // basis loop paths for each non-tree edge
        let loops: Vec<DartPath> = tree
            .cobasis
            .iter()
            .map(|&e| {
                let d = Dart::new(e, false);
                let mut p = shape.tree_path(0, shape.dart_source(d), &tree);
                p.push(d);
                p.extend(shape.tree_path(shape.dart_target(d), 0, &tree));
                reduce_path(&p)
            })
            .collect();
        let phi = random_automorphism(rng, rank, depth);
        let marking: Vec<DartPath> = (1..=rank)
            .map(|k| {
                let word = phi.apply(&Word::generator(k));
                let mut raw: DartPath = Vec::new();
                for &x in word.letters() {
                    let lp = &loops[x.unsigned_abs() as usize - 1];
                    if x > 0 {
                        raw.extend(lp.iter().copied());
                    } else {
                        raw.extend(lp.iter().rev().map(|d| d.reverse()));
                    }
                }
                reduce_path(&raw)
            })
            .collect();
        match MarkedGraph::new(rank, vertices, edges, 0, marking) {
            Ok(g) => return g.normalized(),
            Err(_) => continue,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_automorphisms_are_valid() {
        assert_eq!(tribonacci().rank(), 3);
        let sigma = basis_cycle();
        let cubed = sigma.compose(&sigma).compose(&sigma);
        assert!(cubed.is_identity());
        let psi = invariant_factor();
        assert_eq!(psi.apply(&Word::parse("c", 3).unwrap()), Word::parse("c", 3).unwrap());
    }

    #[test]
    fn random_graphs_are_valid_and_varied() {
        let mut r = rng(11);
        let mut saw_multi_vertex = false;
        for _ in 0..40 {
            let g = random_marked_graph(&mut r, 3, 6, 5);
            assert_eq!(g.rank(), 3);
            assert!(g.edge_count() <= 6);
            assert!((g.volume() - 1.0).abs() < 1e-9);
            saw_multi_vertex |= g.vertex_count() > 1;
        }
        assert!(saw_multi_vertex);
    }
}
