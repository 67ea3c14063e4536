//! Stallings subgroup graphs: folded based core graphs representing
//! finitely generated subgroups of the free group, with membership,
//! finite-index detection, spanning-tree bases, and induced automorphisms.

use std::collections::{HashMap, VecDeque};

use crate::automorphism::Automorphism;
use crate::error::{Error, Result};
use crate::words::{Letter, Word};

/// A folded based core graph over the rank-`r` alphabet. Vertex 0 is the
/// basepoint; `transitions[v][d]` follows the directed label `d`, where
/// label `2(k-1)` reads generator `k` and `2(k-1)+1` reads its inverse.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SubgroupGraph {
    rank: usize,
    transitions: Vec<Vec<Option<usize>>>,
}

#[inline]
fn dir_of(x: Letter) -> usize {
    let k = x.unsigned_abs() as usize - 1;
    2 * k + usize::from(x < 0)
}

#[inline]
fn flip(d: usize) -> usize {
    d ^ 1
}

#[inline]
fn letter_of(d: usize) -> Letter {
    let k = (d / 2 + 1) as Letter;
    if d % 2 == 0 {
        k
    } else {
        -k
    }
}

impl SubgroupGraph {
    /// Folded core graph of the subgroup generated by `gens`.
    pub fn new(rank: usize, gens: &[Word]) -> Result<Self> {
        for g in gens {
            if !g.fits_rank(rank) {
                return Err(Error::Invalid(format!(
                    "generator {g} uses letters outside rank {rank}"
                )));
            }
        }
        // Wedge of loops at the basepoint, one subdivided loop per generator.
        let mut next_vertex = 1usize;
        let mut edges: Vec<(usize, usize, usize)> = Vec::new(); // (u, dir, v) with dir even
        for g in gens {
            let letters = g.letters();
            if letters.is_empty() {
                continue;
            }
            let mut cur = 0usize;
            for (i, &x) in letters.iter().enumerate() {
                let tgt = if i + 1 == letters.len() { 0 } else { next_vertex };
                if i + 1 != letters.len() {
                    next_vertex += 1;
                }
                let d = dir_of(x);
                if d % 2 == 0 {
                    edges.push((cur, d, tgt));
                } else {
                    edges.push((tgt, flip(d), cur));
                }
                cur = tgt;
            }
        }
        let folded = fold(next_vertex, edges, rank);
        Ok(folded.trim_and_normalize())
    }

    pub fn rank_of_alphabet(&self) -> usize {
        self.rank
    }

    pub fn vertex_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn transition(&self, v: usize, x: Letter) -> Option<usize> {
        self.transitions[v][dir_of(x)]
    }

    /// Reads `w` from the basepoint; `Some(end_vertex)` if every letter has a
    /// transition.
    pub fn trace(&self, w: &Word) -> Option<usize> {
        let mut v = 0usize;
        for &x in w.letters() {
            v = self.transition(v, x)?;
        }
        Some(v)
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.trace(w) == Some(0)
    }

    /// `Some(n)` when the graph is a degree-`n` cover of the rose (every
    /// vertex has all `2r` directions), `None` for infinite index.
    pub fn index(&self) -> Option<usize> {
        let full = self
            .transitions
            .iter()
            .all(|row| row.iter().all(|t| t.is_some()));
        full.then_some(self.transitions.len())
    }

    /// Breadth-first spanning tree from the basepoint, following directions
    /// in label order. Returns, per vertex, the path from the basepoint as a
    /// word, plus the list of non-tree directed edges `(v, dir)` with their
    /// positive orientation.
    fn spanning_tree(&self) -> (Vec<Word>, Vec<(usize, usize)>) {
        let n = self.transitions.len();
        let mut path: Vec<Option<Word>> = vec![None; n];
        path[0] = Some(Word::identity());
        let mut order = VecDeque::new();
        order.push_back(0usize);
        let mut tree_edges: Vec<(usize, usize)> = Vec::new(); // (vertex, dir) used by tree
        while let Some(v) = order.pop_front() {
            for d in 0..2 * self.rank {
                if let Some(u) = self.transitions[v][d] {
                    if path[u].is_none() {
                        let w = path[v]
                            .as_ref()
                            .unwrap()
                            .concat(&Word::reduce(&[letter_of(d)]));
                        path[u] = Some(w);
                        tree_edges.push((v, d));
                        tree_edges.push((u, flip(d)));
                        order.push_back(u);
                    }
                }
            }
        }
        let paths: Vec<Word> = path.into_iter().map(|p| p.expect("connected")).collect();
        let mut non_tree = Vec::new();
        for v in 0..n {
            for d in (0..2 * self.rank).step_by(2) {
                if self.transitions[v][d].is_some() && !tree_edges.contains(&(v, d)) {
                    non_tree.push((v, d));
                }
            }
        }
        (paths, non_tree)
    }

    /// A free basis of the subgroup: one element per non-tree edge,
    /// `path(base -> v) * label * path(w -> base)`.
    pub fn basis(&self) -> Vec<Word> {
        let (paths, non_tree) = self.spanning_tree();
        non_tree
            .iter()
            .map(|&(v, d)| {
                let w = self.transitions[v][d].unwrap();
                paths[v]
                    .concat(&Word::reduce(&[letter_of(d)]))
                    .concat(&paths[w].inverse())
            })
            .collect()
    }

    /// Rank of the subgroup, from the Euler characteristic of the core graph.
    pub fn subgroup_rank(&self) -> usize {
        let edges: usize = self
            .transitions
            .iter()
            .map(|row| row.iter().step_by(2).flatten().count())
            .sum();
        edges + 1 - self.transitions.len()
    }

    /// Rewrites a member of the subgroup in the `basis()` free basis: the
    /// letters record which non-tree edges the trace crosses. `None` when
    /// `w` is not in the subgroup.
    pub fn express(&self, w: &Word) -> Option<Word> {
        if !self.contains(w) {
            return None;
        }
        let (_, non_tree) = self.spanning_tree();
        let lookup: HashMap<(usize, usize), usize> = non_tree
            .iter()
            .enumerate()
            .map(|(i, &(v, d))| ((v, d), i))
            .collect();
        let mut out: Vec<Letter> = Vec::new();
        let mut v = 0usize;
        for &x in w.letters() {
            let d = dir_of(x);
            let u = self.transitions[v][d].expect("membership checked");
            if let Some(&i) = lookup.get(&(v, d)) {
                out.push((i + 1) as Letter);
            } else if let Some(&i) = lookup.get(&(u, flip(d))) {
                out.push(-((i + 1) as Letter));
            }
            v = u;
        }
        Some(Word::reduce(&out))
    }

    /// The restriction of `phi` to this finite-index-or-not subgroup,
    /// expressed in the spanning-tree basis. Errors unless `phi` preserves
    /// the subgroup on both sides.
    pub fn induced_automorphism(&self, phi: &Automorphism) -> Result<Automorphism> {
        let basis = self.basis();
        let mut images = Vec::with_capacity(basis.len());
        let mut inverse_images = Vec::with_capacity(basis.len());
        for b in &basis {
            let img = phi.apply(b);
            let pre = phi.apply_inverse(b);
            let img = self.express(&img).ok_or(Error::SubgroupNotPreserved)?;
            let pre = self.express(&pre).ok_or(Error::SubgroupNotPreserved)?;
            images.push(img);
            inverse_images.push(pre);
        }
        Automorphism::new(basis.len(), images, inverse_images)
            .map_err(|_| Error::SubgroupNotPreserved)
    }

    fn trim_and_normalize(mut self) -> Self {
        // Core with basepoint: repeatedly remove valence <= 1 vertices other
        // than the basepoint.
        loop {
            let n = self.transitions.len();
            let mut degree = vec![0usize; n];
            for v in 0..n {
                for d in 0..2 * self.rank {
                    if self.transitions[v][d].is_some() {
                        degree[v] += 1;
                    }
                }
            }
            let Some(dead) = (1..n).find(|&v| degree[v] <= 1) else { break };
            for v in 0..n {
                for d in 0..2 * self.rank {
                    if self.transitions[v][d] == Some(dead) {
                        self.transitions[v][d] = None;
                    }
                }
            }
            self.transitions.remove(dead);
            for row in &mut self.transitions {
                for t in row.iter_mut() {
                    if let Some(u) = t {
                        if *u > dead {
                            *u -= 1;
                        }
                    }
                }
            }
        }
        // Renumber in breadth-first label order for a canonical form.
        let n = self.transitions.len();
        let mut remap = vec![usize::MAX; n];
        remap[0] = 0;
        let mut next = 1usize;
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for d in 0..2 * self.rank {
                if let Some(u) = self.transitions[v][d] {
                    if remap[u] == usize::MAX {
                        remap[u] = next;
                        next += 1;
                        queue.push_back(u);
                    }
                }
            }
        }
        let mut out = vec![vec![None; 2 * self.rank]; n];
        for v in 0..n {
            for d in 0..2 * self.rank {
                if let Some(u) = self.transitions[v][d] {
                    out[remap[v]][d] = Some(remap[u]);
                }
            }
        }
        SubgroupGraph { rank: self.rank, transitions: out }
    }
}

struct FoldState {
    parent: Vec<usize>,
}

impl FoldState {
    fn find(&mut self, v: usize) -> usize {
        if self.parent[v] != v {
            let root = self.find(self.parent[v]);
            self.parent[v] = root;
            root
        } else {
            v
        }
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // Keep the smaller representative so the basepoint survives as 0.
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
    }
}

fn fold(vertices: usize, edges: Vec<(usize, usize, usize)>, rank: usize) -> SubgroupGraph {
    let mut uf = FoldState { parent: (0..vertices).collect() };
    loop {
        // transitions under the current identification; merge conflicts.
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut merged = false;
        for &(u, d, v) in &edges {
            let (ru, rv) = (uf.find(u), uf.find(v));
            for (key, tgt) in [((ru, d), rv), ((rv, flip(d)), ru)] {
                match seen.get(&key) {
                    Some(&t) if t != tgt => {
                        uf.union(t, tgt);
                        merged = true;
                        break;
                    }
                    _ => {
                        seen.insert(key, tgt);
                    }
                }
            }
            if merged {
                break;
            }
        }
        if !merged {
            break;
        }
    }
    // Compact to representative numbering.
    let mut remap: HashMap<usize, usize> = HashMap::new();
    remap.insert(uf.find(0), 0);
    let mut n = 1usize;
    let mut ordered_roots = vec![uf.find(0)];
    for v in 0..vertices {
        let r = uf.find(v);
        if !remap.contains_key(&r) {
            remap.insert(r, n);
            ordered_roots.push(r);
            n += 1;
        }
    }
    let mut transitions = vec![vec![None; 2 * rank]; n];
    for &(u, d, v) in &edges {
        let (ru, rv) = (remap[&uf.find(u)], remap[&uf.find(v)]);
        transitions[ru][d] = Some(rv);
        transitions[rv][flip(d)] = Some(ru);
    }
    SubgroupGraph { rank, transitions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::parse_word;

    fn w(s: &str) -> Word {
        parse_word(s, 3).unwrap()
    }

    fn graph(gens: &[&str]) -> SubgroupGraph {
        let gens: Vec<Word> = gens.iter().map(|s| w(s)).collect();
        SubgroupGraph::new(3, &gens).unwrap()
    }

    #[test]
    fn rose_for_full_group() {
        let g = graph(&["a", "b", "c"]);
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.index(), Some(1));
        assert_eq!(g.subgroup_rank(), 3);
    }

    #[test]
    fn two_generator_subgroup() {
        let g = graph(&["a", "b"]);
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.index(), None);
        assert_eq!(g.subgroup_rank(), 2);
        assert!(g.contains(&w("abAB")));
        assert!(!g.contains(&w("c")));
        assert!(!g.contains(&w("ac")));
    }

    #[test]
    fn index_two_kernel() {
        // kernel of F_3 -> Z/2 sending a -> 1, b, c -> 0
        let g = graph(&["aa", "b", "abA", "c", "acA"]);
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.index(), Some(2));
        assert_eq!(g.subgroup_rank(), 5);
        assert!(g.contains(&w("aa")));
        assert!(!g.contains(&w("a")));
        assert!(g.contains(&w("ba")) == false);
        assert!(g.contains(&w("bc")));
    }

    #[test]
    fn membership_matches_parity_oracle() {
        let g = graph(&["aa", "b", "abA", "c", "acA"]);
        // membership iff the a-exponent is even
        let mut count = 0;
        for letters in enumerate(4) {
            let word = Word::reduce(&letters);
            let parity: i64 = word.abelianization(3)[0] % 2;
            assert_eq!(g.contains(&word), parity == 0, "{word}");
            count += 1;
        }
        assert!(count > 100);
    }

    fn enumerate(len: usize) -> Vec<Vec<Letter>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            let mut next = Vec::new();
            for prefix in &out {
                for k in [1i32, -1, 2, -2, 3, -3] {
                    let mut p = prefix.clone();
                    p.push(k);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }

    #[test]
    fn basis_elements_are_members_and_express_round_trips() {
        let g = graph(&["aa", "b", "abA", "c", "acA"]);
        let basis = g.basis();
        assert_eq!(basis.len(), 5);
        for (i, b) in basis.iter().enumerate() {
            assert!(g.contains(b));
            let expr = g.express(b).unwrap();
            assert_eq!(expr.letters(), [(i + 1) as Letter], "basis {i} -> {expr}");
        }
        // a word of H expressed and substituted back equals itself
        let member = w("aabcACAA");
        if g.contains(&member) {
            let expr = g.express(&member).unwrap();
            let mut back = Word::identity();
            for &x in expr.letters() {
                let b = &basis[x.unsigned_abs() as usize - 1];
                back = back.concat(&if x > 0 { b.clone() } else { b.inverse() });
            }
            assert_eq!(back, member);
        }
    }

    #[test]
    fn induced_automorphism_identity_and_inner() {
        let g = graph(&["aa", "b", "abA", "c", "acA"]);
        let id = Automorphism::identity(3);
        let induced = g.induced_automorphism(&id).unwrap();
        assert!(induced.is_identity());

        // conjugation by an element of H restricts to an inner automorphism
        let ih = Automorphism::inner(3, &w("b"));
        let induced = g.induced_automorphism(&ih).unwrap();
        assert!(induced.is_inner().is_some());
    }

    #[test]
    fn induced_automorphism_rejects_non_invariant() {
        // <a, b> is not preserved by the basis 3-cycle
        let g = graph(&["a", "b"]);
        let sigma = Automorphism::new(
            3,
            vec![w("b"), w("c"), w("a")],
            vec![w("c"), w("a"), w("b")],
        )
        .unwrap();
        assert!(matches!(
            g.induced_automorphism(&sigma),
            Err(Error::SubgroupNotPreserved)
        ));
    }

    #[test]
    fn trivial_subgroup() {
        let g = SubgroupGraph::new(3, &[]).unwrap();
        assert_eq!(g.vertex_count(), 1);
        assert!(g.contains(&Word::identity()));
        assert!(!g.contains(&w("a")));
        assert_eq!(g.subgroup_rank(), 0);
        assert_eq!(g.index(), None);
    }
}
