//! Whitehead automorphisms, tuple length minimization, primitivity and
//! simplicity tests.
//!
//! Minimization relies on peak reduction: a tuple of conjugacy classes that
//! is not of minimal total length in its `Aut(F)`-orbit admits a Whitehead
//! automorphism strictly decreasing the total length, so greedy descent
//! reaches the global minimum. The minimal level set is connected under
//! length-preserving Whitehead moves, which the orbit searches below
//! traverse breadth-first with a node budget.

use std::collections::{HashSet, VecDeque};

use crate::automorphism::Automorphism;
use crate::error::{Error, Result};
use crate::words::{ConjugacyClass, Letter, Word};

/// Default node budget for minimal-level orbit searches.
pub const DEFAULT_ORBIT_BUDGET: usize = 200_000;

/// A type-II Whitehead automorphism `(A, a)`: the multiplier `a` lies in the
/// cut set `A` and `a^-1` does not. It sends each letter `u` to
/// `a^[u^-1 in A] u a^-[u in A]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WhiteheadMove {
    pub multiplier: Letter,
    pub cut: Vec<Letter>,
}

impl WhiteheadMove {
    pub fn contains(&self, x: Letter) -> bool {
        self.cut.contains(&x)
    }

    pub fn apply_letter(&self, u: Letter) -> Vec<Letter> {
        let a = self.multiplier;
        if u == a || u == -a {
            return vec![u];
        }
        let mut out = Vec::with_capacity(3);
        if self.contains(-u) {
            out.push(a);
        }
        out.push(u);
        if self.contains(u) {
            out.push(-a);
        }
        out
    }

    pub fn apply_word(&self, w: &Word) -> Word {
        let mut raw = Vec::with_capacity(3 * w.len());
        for &u in w.letters() {
            raw.extend(self.apply_letter(u));
        }
        Word::reduce(&raw)
    }

    pub fn apply_class(&self, c: &ConjugacyClass) -> ConjugacyClass {
        ConjugacyClass::from_word(&self.apply_word(c.cyclic_word()))
    }

    pub fn automorphism(&self, rank: usize) -> Automorphism {
        let images: Vec<Word> =
            (1..=rank).map(|k| self.apply_word(&Word::generator(k))).collect();
        let inv = self.inverse();
        let inverse_images: Vec<Word> =
            (1..=rank).map(|k| inv.apply_word(&Word::generator(k))).collect();
        Automorphism::new(rank, images, inverse_images).expect("whitehead move is an automorphism")
    }

    /// `(A, a)^-1 = ((A \ {a}) + {a^-1}, a^-1)`.
    pub fn inverse(&self) -> WhiteheadMove {
        let mut cut: Vec<Letter> =
            self.cut.iter().copied().filter(|&x| x != self.multiplier).collect();
        cut.push(-self.multiplier);
        cut.sort_unstable();
        WhiteheadMove { multiplier: -self.multiplier, cut }
    }
}

/// All signed letters of the rank-`r` basis.
pub fn letter_alphabet(rank: usize) -> Vec<Letter> {
    let mut l = Vec::with_capacity(2 * rank);
    for k in 1..=rank as Letter {
        l.push(k);
        l.push(-k);
    }
    l
}

/// Enumerates the nontrivial type-II Whitehead automorphisms. Cut sets `{a}`
/// (identity) and `L \ {a^-1}` (inner) act trivially on conjugacy classes
/// and are skipped.
pub fn whitehead_moves(rank: usize) -> Vec<WhiteheadMove> {
    let letters = letter_alphabet(rank);
    let mut moves = Vec::new();
    for &a in &letters {
        let others: Vec<Letter> =
            letters.iter().copied().filter(|&x| x != a && x != -a).collect();
        let n = others.len();
        for mask in 1..(1u32 << n) - 1 {
            let mut cut = vec![a];
            for (i, &x) in others.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    cut.push(x);
                }
            }
            cut.sort_unstable();
            moves.push(WhiteheadMove { multiplier: a, cut });
        }
    }
    moves
}

/// A letter permutation, possibly composed with inversions: the length
/// preserving (type I) Whitehead automorphisms used to traverse minimal
/// level sets. Elementary generators suffice for breadth-first search.
fn type_one_moves(rank: usize) -> Vec<Vec<Letter>> {
    // Encoded as the images of the positive letters 1..=rank.
    let mut moves = Vec::new();
    for i in 1..=rank as Letter {
        let mut img: Vec<Letter> = (1..=rank as Letter).collect();
        img[(i - 1) as usize] = -i;
        moves.push(img);
    }
    for i in 0..rank {
        for j in i + 1..rank {
            let mut img: Vec<Letter> = (1..=rank as Letter).collect();
            img.swap(i, j);
            moves.push(img);
        }
    }
    moves
}

fn apply_letter_map(map: &[Letter], c: &ConjugacyClass) -> ConjugacyClass {
    let raw: Vec<Letter> = c
        .cyclic_word()
        .letters()
        .iter()
        .map(|&x| {
            let img = map[(x.unsigned_abs() - 1) as usize];
            if x > 0 {
                img
            } else {
                -img
            }
        })
        .collect();
    ConjugacyClass::from_word(&Word::reduce(&raw))
}

fn total_len(tuple: &[ConjugacyClass]) -> usize {
    tuple.iter().map(|c| c.len()).sum()
}

#[derive(Clone, Debug)]
pub struct Minimized {
    pub tuple: Vec<ConjugacyClass>,
    pub total_length: usize,
    pub moves: Vec<WhiteheadMove>,
}

/// Greedy Whitehead minimization of a tuple of conjugacy classes under a
/// common automorphism sequence. Steepest descent with first-in-enumeration
/// tie breaking; by peak reduction the result has minimal total length in
/// the `Aut(F)`-orbit of the tuple.
pub fn minimize_tuple(tuple: &[ConjugacyClass], rank: usize) -> Minimized {
    let moves = whitehead_moves(rank);
    let mut cur: Vec<ConjugacyClass> = tuple.to_vec();
    let mut cur_len = total_len(&cur);
    let mut applied = Vec::new();
    loop {
        let mut best: Option<(usize, Vec<ConjugacyClass>, &WhiteheadMove)> = None;
        for m in &moves {
            let cand: Vec<ConjugacyClass> = cur.iter().map(|c| m.apply_class(c)).collect();
            let l = total_len(&cand);
            if l < cur_len && best.as_ref().map_or(true, |(bl, _, _)| l < *bl) {
                best = Some((l, cand, m));
            }
        }
        match best {
            Some((l, cand, m)) => {
                cur = cand;
                cur_len = l;
                applied.push(m.clone());
            }
            None => return Minimized { tuple: cur, total_length: cur_len, moves: applied },
        }
    }
}

/// Breadth-first search of the minimal level set of `start` under length
/// preserving Whitehead moves (types I and II), stopping early when `found`
/// returns true. `start` must already be length-minimal.
pub fn search_min_level<F>(
    start: &[ConjugacyClass],
    rank: usize,
    budget: usize,
    mut found: F,
) -> Result<bool>
where
    F: FnMut(&[ConjugacyClass]) -> bool,
{
    let level = total_len(start);
    let moves = whitehead_moves(rank);
    let perms = type_one_moves(rank);
    let mut visited: HashSet<Vec<ConjugacyClass>> = HashSet::new();
    let mut queue: VecDeque<Vec<ConjugacyClass>> = VecDeque::new();
    if found(start) {
        return Ok(true);
    }
    visited.insert(start.to_vec());
    queue.push_back(start.to_vec());
    while let Some(cur) = queue.pop_front() {
        let mut neighbors: Vec<Vec<ConjugacyClass>> = Vec::new();
        for m in &moves {
            neighbors.push(cur.iter().map(|c| m.apply_class(c)).collect());
        }
        for p in &perms {
            neighbors.push(cur.iter().map(|c| apply_letter_map(p, c)).collect());
        }
        for next in neighbors {
            if total_len(&next) != level || visited.contains(&next) {
                continue;
            }
            if visited.len() >= budget {
                return Err(Error::BudgetExhausted {
                    what: "minimal-level Whitehead orbit search".into(),
                    budget,
                });
            }
            if found(&next) {
                return Ok(true);
            }
            visited.insert(next.clone());
            queue.push_back(next);
        }
    }
    Ok(false)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// True iff `w` is part of some free basis. Abelianization pre-filter (the
/// image must be a primitive integer vector), then Whitehead minimization
/// reaching length 1.
pub fn is_primitive(w: &Word, rank: usize) -> Result<bool> {
    if w.is_identity() {
        return Err(Error::TrivialWord);
    }
    let v = w.abelianization(rank);
    let g = v.iter().copied().fold(0, gcd);
    if g != 1 {
        return Ok(false);
    }
    let min = minimize_tuple(&[ConjugacyClass::from_word(w)], rank);
    Ok(min.total_length == 1)
}

/// The Whitehead graph of a cyclic word: vertices are the `2r` letters, and
/// each cyclic adjacency `(x, y)` contributes the edge `{x, y^-1}`.
pub struct WhiteheadGraph {
    letters: Vec<Letter>,
    adj: Vec<Vec<usize>>,
}

impl WhiteheadGraph {
    pub fn new(c: &ConjugacyClass, rank: usize) -> Self {
        let letters = letter_alphabet(rank);
        let index =
            |x: Letter| letters.iter().position(|&y| y == x).expect("letter in alphabet");
        let mut adj = vec![Vec::new(); letters.len()];
        let w = c.cyclic_word().letters();
        let n = w.len();
        for i in 0..n {
            let x = w[i];
            let y = w[(i + 1) % n];
            let (u, v) = (index(x), index(-y));
            adj[u].push(v);
            adj[v].push(u);
        }
        WhiteheadGraph { letters, adj }
    }

    fn used(&self) -> Vec<usize> {
        (0..self.letters.len()).filter(|&i| !self.adj[i].is_empty()).collect()
    }

    fn connected_on(&self, vertices: &[usize], skip: Option<usize>) -> bool {
        let keep: Vec<usize> = vertices.iter().copied().filter(|&v| Some(v) != skip).collect();
        let Some(&start) = keep.first() else { return true };
        let mut seen = HashSet::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(v) = stack.pop() {
            for &u in &self.adj[v] {
                if Some(u) != skip && keep.contains(&u) && seen.insert(u) {
                    stack.push(u);
                }
            }
        }
        seen.len() == keep.len()
    }

    /// Connectivity of the subgraph induced on the letters actually used.
    pub fn is_connected(&self) -> bool {
        self.connected_on(&self.used(), None)
    }

    pub fn has_cut_vertex(&self) -> bool {
        let used = self.used();
        used.iter().any(|&v| !self.connected_on(&used, Some(v)))
    }
}

fn support(c: &ConjugacyClass) -> HashSet<usize> {
    c.cyclic_word().letters().iter().map(|x| x.unsigned_abs() as usize).collect()
}

/// True iff `w` lies in a proper free factor. Minimizes, then applies the
/// Whitehead graph criterion: at minimal length a simple element has a
/// disconnected or cut-vertex Whitehead graph, so a connected graph without
/// cut vertices decides false outright. Otherwise the minimal level set is
/// searched for a representative omitting a generator.
pub fn is_simple(w: &Word, rank: usize, budget: usize) -> Result<bool> {
    if w.is_identity() {
        return Err(Error::TrivialWord);
    }
    let min = minimize_tuple(&[ConjugacyClass::from_word(w)], rank);
    let c = &min.tuple[0];
    if support(c).len() < rank {
        return Ok(true);
    }
    let graph = WhiteheadGraph::new(c, rank);
    if graph.is_connected() && !graph.has_cut_vertex() {
        return Ok(false);
    }
    search_min_level(&min.tuple, rank, budget, |tuple| support(&tuple[0]).len() < rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::parse_word;

    fn class(s: &str) -> ConjugacyClass {
        ConjugacyClass::from_word(&parse_word(s, 3).unwrap())
    }

    fn w(s: &str) -> Word {
        parse_word(s, 3).unwrap()
    }

    #[test]
    fn move_count_and_automorphisms() {
        // 2r * (2^(2r-2) - 2) nontrivial cut sets for r = 3
        assert_eq!(whitehead_moves(3).len(), 6 * 14);
        for m in whitehead_moves(3).iter().step_by(7) {
            let phi = m.automorphism(3);
            assert_eq!(phi.rank(), 3);
        }
    }

    #[test]
    fn minimize_examples() {
        let m = minimize_tuple(&[class("a")], 3);
        assert_eq!(m.total_length, 1);
        assert!(m.moves.is_empty());

        let m = minimize_tuple(&[class("abA")], 3);
        assert_eq!(m.total_length, 1);
        assert_eq!(m.tuple[0], class("b"));

        // Nielsen images of a generator are primitive, so minimize to length 1.
        let m = minimize_tuple(&[class("ab")], 3);
        assert_eq!(m.total_length, 1);
    }

    #[test]
    fn minimize_never_increases_and_is_stable() {
        for s in ["aab", "abAB", "aabbcc", "abcABC", "acbACB"] {
            let c = class(s);
            let m = minimize_tuple(&[c.clone()], 3);
            assert!(m.total_length <= c.len());
            let again = minimize_tuple(&m.tuple, 3);
            assert_eq!(again.total_length, m.total_length);
        }
    }

    #[test]
    fn primitivity_basics() {
        assert!(is_primitive(&w("a"), 3).unwrap());
        assert!(!is_primitive(&w("aa"), 3).unwrap());
        assert!(!is_primitive(&w("abAB"), 3).unwrap());
        assert!(is_primitive(&w("ab"), 3).unwrap());
        assert!(is_primitive(&Word::identity(), 3).is_err());
    }

    #[test]
    fn simplicity_basics() {
        // commutator of a, b lies in the proper factor <a, b> of F_3
        assert!(is_simple(&w("abAB"), 3, DEFAULT_ORBIT_BUDGET).unwrap());
        // primitive elements are simple
        assert!(is_simple(&w("ab"), 3, DEFAULT_ORBIT_BUDGET).unwrap());
        assert!(is_simple(&w("a"), 3, DEFAULT_ORBIT_BUDGET).unwrap());
        // a^2 b^2 c^2 fills F_3: connected Whitehead graph without cut vertex
        assert!(!is_simple(&w("aabbcc"), 3, DEFAULT_ORBIT_BUDGET).unwrap());
        assert!(is_simple(&Word::identity(), 3, DEFAULT_ORBIT_BUDGET).is_err());
    }

    #[test]
    fn primitive_implies_simple_small_words() {
        let mut checked = 0;
        for len in 1..=4usize {
            enumerate_words(len, &mut |word| {
                if is_primitive(&word, 3).unwrap() {
                    assert!(is_simple(&word, 3, DEFAULT_ORBIT_BUDGET).unwrap(), "{word}");
                    checked += 1;
                }
            });
        }
        assert!(checked > 10);
    }

    fn enumerate_words(len: usize, f: &mut impl FnMut(Word)) {
        fn rec(prefix: &mut Vec<Letter>, len: usize, f: &mut impl FnMut(Word)) {
            if prefix.len() == len {
                f(Word::reduce(prefix));
                return;
            }
            for k in [1, -1, 2, -2, 3, -3] {
                if prefix.last().is_some_and(|&p| p == -k) {
                    continue;
                }
                prefix.push(k);
                rec(prefix, len, f);
                prefix.pop();
            }
        }
        rec(&mut Vec::new(), len, f);
    }

    #[test]
    fn whitehead_graph_of_filling_word() {
        let g = WhiteheadGraph::new(&class("aabbcc"), 3);
        assert!(g.is_connected());
        assert!(!g.has_cut_vertex());
        let g = WhiteheadGraph::new(&class("ab"), 3);
        assert!(!g.is_connected() || g.has_cut_vertex());
    }
}
