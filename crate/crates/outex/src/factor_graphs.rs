//! Finite balls of the primitive loop graph, and distance upper bounds for
//! the co-surface graph.
//!
//! Vertices are primitive conjugacy classes; two classes are adjacent when
//! they are jointly part of a free basis. Joint-basis pairs are in
//! particular realized by disjoint simple closed curves on a common
//! once-punctured surface, so every distance computed here is an upper
//! bound for the co-surface distance. Exact co-surface adjacency (joint
//! realization on one surface) is not decided.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::whitehead::{is_primitive, minimize_tuple, search_min_level};
use crate::words::{enumerate_conjugacy_classes, ConjugacyClass};

/// Outcome of an adjacency test under a search budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adjacency {
    Joined,
    NotJoined,
    /// the minimal-level orbit search ran out of budget
    Indeterminate,
}

/// True iff the pair is jointly part of a free basis: the pair minimizes to
/// total length 2 on two distinct generators. Greedy minimization reaches
/// the minimal level; when it lands on an ambiguous pair (equal letters)
/// the minimal level set is searched under `budget`.
pub fn pl_adjacent(
    alpha: &ConjugacyClass,
    beta: &ConjugacyClass,
    rank: usize,
    budget: usize,
) -> Result<Adjacency> {
    if alpha.is_trivial() || beta.is_trivial() {
        return Err(Error::TrivialWord);
    }
    if alpha == beta {
        return Ok(Adjacency::NotJoined);
    }
    let min = minimize_tuple(&[alpha.clone(), beta.clone()], rank);
    if min.total_length != 2 {
        return Ok(Adjacency::NotJoined);
    }
    let distinct = |tuple: &[ConjugacyClass]| {
        let a = tuple[0].cyclic_word().letters()[0].unsigned_abs();
        let b = tuple[1].cyclic_word().letters()[0].unsigned_abs();
        a != b
    };
    if distinct(&min.tuple) {
        return Ok(Adjacency::Joined);
    }
    // Equal letters at minimal level happen only off-basis (a joint basis
    // pair has independent abelianizations), but confirm by searching the
    // level set for a distinct-letter representative.
    match search_min_level(&min.tuple, rank, budget, |t| distinct(t)) {
        Ok(true) => Ok(Adjacency::Joined),
        Ok(false) => Ok(Adjacency::NotJoined),
        Err(Error::BudgetExhausted { .. }) => Ok(Adjacency::Indeterminate),
        Err(e) => Err(e),
    }
}

/// A finite ball of the primitive loop graph: all primitive classes of
/// cyclic length at most `length_bound`, with joint-basis edges.
#[derive(Clone, Debug)]
pub struct PlBall {
    pub length_bound: usize,
    pub vertices: Vec<ConjugacyClass>,
    /// adjacency lists by vertex index, sorted
    pub edges: Vec<Vec<usize>>,
    /// pairs whose adjacency test was indeterminate under the budget
    pub indeterminate: Vec<(usize, usize)>,
}

pub fn build_pl_ball(rank: usize, length_bound: usize, budget: usize) -> Result<PlBall> {
    let vertices: Vec<ConjugacyClass> = enumerate_conjugacy_classes(rank, length_bound)
        .into_iter()
        .filter(|c| is_primitive(c.cyclic_word(), rank).unwrap_or(false))
        .collect();
    let n = vertices.len();
    let pair_results: Vec<((usize, usize), Adjacency)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let adj = pl_adjacent(&vertices[i], &vertices[j], rank, budget)
                .expect("nontrivial primitives");
            ((i, j), adj)
        })
        .collect();
    let mut edges = vec![Vec::new(); n];
    let mut indeterminate = Vec::new();
    for ((i, j), adj) in pair_results {
        match adj {
            Adjacency::Joined => {
                edges[i].push(j);
                edges[j].push(i);
            }
            Adjacency::NotJoined => {}
            Adjacency::Indeterminate => indeterminate.push((i, j)),
        }
    }
    for adj in &mut edges {
        adj.sort_unstable();
    }
    indeterminate.sort_unstable();
    Ok(PlBall { length_bound, vertices, edges, indeterminate })
}

impl PlBall {
    pub fn vertex_index(&self, c: &ConjugacyClass) -> Option<usize> {
        self.vertices.iter().position(|v| v == c)
    }

    /// Breadth-first distance inside the ball; `None` when unreachable.
    pub fn distance(&self, from: usize, to: usize) -> Option<usize> {
        if from == to {
            return Some(0);
        }
        let mut dist: HashMap<usize, usize> = HashMap::from([(from, 0)]);
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            let dv = dist[&v];
            for &u in &self.edges[v] {
                if !dist.contains_key(&u) {
                    if u == to {
                        return Some(dv + 1);
                    }
                    dist.insert(u, dv + 1);
                    queue.push_back(u);
                }
            }
        }
        None
    }

    /// Adjacency-list text export, one vertex per line.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.vertices.iter().enumerate() {
            out.push_str(&format!("{i} {v}:"));
            for &j in &self.edges[i] {
                out.push_str(&format!(" {j}"));
            }
            out.push('\n');
        }
        if !self.indeterminate.is_empty() {
            out.push_str("# indeterminate pairs:");
            for &(i, j) in &self.indeterminate {
                out.push_str(&format!(" {i}-{j}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Upper bound for the co-surface distance between two primitive classes:
/// the breadth-first distance in the primitive-loop ball of the given
/// length bound. `Ok(None)` when the ball does not connect them.
pub fn cs_distance_upper(
    ball: &PlBall,
    alpha: &ConjugacyClass,
    beta: &ConjugacyClass,
) -> Result<Option<usize>> {
    let i = ball
        .vertex_index(alpha)
        .ok_or_else(|| Error::Invalid(format!("{alpha} is not a ball vertex")))?;
    let j = ball
        .vertex_index(beta)
        .ok_or_else(|| Error::Invalid(format!("{beta} is not a ball vertex")))?;
    Ok(ball.distance(i, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::parse_word;

    fn class(s: &str) -> ConjugacyClass {
        ConjugacyClass::from_word(&parse_word(s, 3).unwrap())
    }

    const BUDGET: usize = 100_000;

    #[test]
    fn basis_pairs_are_adjacent() {
        assert_eq!(pl_adjacent(&class("a"), &class("b"), 3, BUDGET).unwrap(), Adjacency::Joined);
        // a and aba^-1 rotate to a and b
        assert_eq!(
            pl_adjacent(&class("a"), &class("abA"), 3, BUDGET).unwrap(),
            Adjacency::Joined
        );
        // a class is never joined to itself
        assert_eq!(
            pl_adjacent(&class("a"), &class("a"), 3, BUDGET).unwrap(),
            Adjacency::NotJoined
        );
    }

    #[test]
    fn ball_of_radius_one_is_complete_on_generators() {
        let ball = build_pl_ball(3, 1, BUDGET).unwrap();
        assert_eq!(ball.vertices.len(), 3);
        for i in 0..3 {
            assert_eq!(ball.edges[i].len(), 2);
        }
        assert!(ball.indeterminate.is_empty());
    }

    #[test]
    fn vertex_sets_grow_and_match_primitivity_filter() {
        let b1 = build_pl_ball(3, 1, BUDGET).unwrap();
        let b2 = build_pl_ball(3, 2, BUDGET).unwrap();
        let b3 = build_pl_ball(3, 3, BUDGET).unwrap();
        assert!(b1.vertices.len() <= b2.vertices.len());
        assert!(b2.vertices.len() <= b3.vertices.len());
        let expected: Vec<ConjugacyClass> = enumerate_conjugacy_classes(3, 3)
            .into_iter()
            .filter(|c| is_primitive(c.cyclic_word(), 3).unwrap())
            .collect();
        assert_eq!(b3.vertices, expected);
    }

    #[test]
    fn distances_are_metric_and_pl_edges_give_one() {
        let ball = build_pl_ball(3, 3, BUDGET).unwrap();
        let a = ball.vertex_index(&class("a")).unwrap();
        let b = ball.vertex_index(&class("b")).unwrap();
        assert_eq!(ball.distance(a, a), Some(0));
        assert_eq!(ball.distance(a, b), Some(1));
        // triangle inequality on a sample of triples
        let n = ball.vertices.len().min(12);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if let (Some(ij), Some(jk), Some(ik)) =
                        (ball.distance(i, j), ball.distance(j, k), ball.distance(i, k))
                    {
                        assert!(ik <= ij + jk);
                    }
                }
            }
        }
    }

    #[test]
    fn cs_upper_bound_api() {
        let ball = build_pl_ball(3, 2, BUDGET).unwrap();
        assert_eq!(cs_distance_upper(&ball, &class("a"), &class("a")).unwrap(), Some(0));
        assert_eq!(cs_distance_upper(&ball, &class("a"), &class("b")).unwrap(), Some(1));
        assert!(cs_distance_upper(&ball, &class("aa"), &class("b")).is_err());
    }
}
