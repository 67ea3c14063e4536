//! Finite-scale coarse geometry: four-point hyperbolicity estimates, Gromov
//! products, aligned triples, alignment-preserving-map verification, metric
//! properness profiles, and quasi-isometry constant fitting.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Exhaustive-scan ceiling: triples (or quadruples) are enumerated fully up
/// to this many vertices and sampled with a fixed seed beyond it.
pub const EXHAUSTIVE_VERTEX_BUDGET: usize = 300;

/// A finite connected weighted graph with cached all-pairs distances.
#[derive(Clone, Debug)]
pub struct FiniteMetricGraph {
    n: usize,
    dist: Vec<f64>,
}

impl FiniteMetricGraph {
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("graph needs at least one vertex".into()));
        }
        let mut dist = vec![f64::INFINITY; n * n];
        for v in 0..n {
            dist[v * n + v] = 0.0;
        }
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Invalid("edge endpoint out of range".into()));
            }
            if !(w > 0.0) {
                return Err(Error::Invalid("edge weights must be positive".into()));
            }
            let cur = dist[u * n + v];
            if w < cur {
                dist[u * n + v] = w;
                dist[v * n + u] = w;
            }
        }
        // Floyd-Warshall; graphs stay in the hundreds of vertices
        for k in 0..n {
            for i in 0..n {
                let dik = dist[i * n + k];
                if dik.is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let alt = dik + dist[k * n + j];
                    if alt < dist[i * n + j] {
                        dist[i * n + j] = alt;
                    }
                }
            }
        }
        if dist.iter().any(|d| d.is_infinite()) {
            return Err(Error::Invalid("graph is not connected".into()));
        }
        Ok(FiniteMetricGraph { n, dist })
    }

    /// Parses a whitespace-separated edge list `u v weight`, one per line.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_vertex = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse(format!("line {}: {msg}", lineno + 1));
            let mut it = line.split_whitespace();
            let u: usize = it
                .next()
                .ok_or_else(|| err("missing source"))?
                .parse()
                .map_err(|_| err("bad source"))?;
            let v: usize = it
                .next()
                .ok_or_else(|| err("missing target"))?
                .parse()
                .map_err(|_| err("bad target"))?;
            let w: f64 = match it.next() {
                None => 1.0,
                Some(tok) => tok.parse().map_err(|_| err("bad weight"))?,
            };
            if it.next().is_some() {
                return Err(err("trailing tokens"));
            }
            max_vertex = max_vertex.max(u).max(v);
            edges.push((u, v, w));
        }
        if edges.is_empty() {
            return Err(Error::Parse("empty edge list".into()));
        }
        FiniteMetricGraph::new(max_vertex + 1, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn distance(&self, u: usize, v: usize) -> f64 {
        self.dist[u * self.n + v]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// `(x|y)_b = (d(x,b) + d(y,b) - d(x,y)) / 2`.
    pub fn gromov_product(&self, x: usize, y: usize, base: usize) -> f64 {
        0.5 * (self.distance(x, base) + self.distance(y, base) - self.distance(x, y))
    }

    /// Vertices lying on some geodesic between `u` and `v`.
    pub fn geodesic_vertices(&self, u: usize, v: usize) -> Vec<usize> {
        let duv = self.distance(u, v);
        (0..self.n)
            .filter(|&w| (self.distance(u, w) + self.distance(w, v) - duv).abs() < 1e-9)
            .collect()
    }

    /// Minimum over vertices of the maximal distance to the three sides of
    /// the triangle `(a, b, c)`: a coarse barycenter.
    pub fn barycenter(&self, a: usize, b: usize, c: usize) -> (usize, f64) {
        let sides =
            [self.geodesic_vertices(a, b), self.geodesic_vertices(b, c), self.geodesic_vertices(a, c)];
        let mut best = (0usize, f64::INFINITY);
        for w in 0..self.n {
            let worst = sides
                .iter()
                .map(|side| {
                    side.iter().map(|&s| self.distance(w, s)).fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max);
            if worst < best.1 {
                best = (w, worst);
            }
        }
        best
    }
}

/// Four-point hyperbolicity estimate: the largest defect
/// `(largest - middle) / 2` of the three pair sums over sampled quadruples.
/// Exhaustive below the vertex budget, seeded sampling above it (a lower
/// estimate).
pub fn delta_fourpoint(g: &FiniteMetricGraph) -> f64 {
    let n = g.vertex_count();
    let defect = |w: usize, x: usize, y: usize, z: usize| -> f64 {
        let s1 = g.distance(w, x) + g.distance(y, z);
        let s2 = g.distance(w, y) + g.distance(x, z);
        let s3 = g.distance(w, z) + g.distance(x, y);
        let mut s = [s1, s2, s3];
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (s[2] - s[1]) / 2.0
    };
    if n <= EXHAUSTIVE_VERTEX_BUDGET {
        (0..n)
            .into_par_iter()
            .map(|w| {
                let mut best: f64 = 0.0;
                for x in w + 1..n {
                    for y in x + 1..n {
                        for z in y + 1..n {
                            best = best.max(defect(w, x, y, z));
                        }
                    }
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    } else {
        let mut rng = StdRng::seed_from_u64(0x5eed);
        let mut best: f64 = 0.0;
        for _ in 0..2_000_000 {
            let q: Vec<usize> = (0..4).map(|_| rng.gen_range(0..n)).collect();
            best = best.max(defect(q[0], q[1], q[2], q[3]));
        }
        best
    }
}

/// `d(a,b) + d(b,c) <= d(a,c) + k`.
pub fn aligned(g: &FiniteMetricGraph, a: usize, b: usize, c: usize, k: f64) -> bool {
    g.distance(a, b) + g.distance(b, c) <= g.distance(a, c) + k
}

/// A total vertex map between two finite metric graphs.
#[derive(Clone, Debug)]
pub struct CoarseMap {
    pub source: FiniteMetricGraph,
    pub target: FiniteMetricGraph,
    pub images: Vec<usize>,
}

impl CoarseMap {
    pub fn new(source: FiniteMetricGraph, target: FiniteMetricGraph, images: Vec<usize>) -> Result<Self> {
        if images.len() != source.vertex_count() {
            return Err(Error::Invalid("one image per source vertex required".into()));
        }
        if images.iter().any(|&v| v >= target.vertex_count()) {
            return Err(Error::Invalid("image out of range".into()));
        }
        Ok(CoarseMap { source, target, images })
    }

    /// Quotient of `g` collapsing each listed edge to a point.
    pub fn collapse(g: &FiniteMetricGraph, edges: &[(usize, usize, f64)], collapsed: &[bool]) -> Result<Self> {
        let n = g.vertex_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, v: usize) -> usize {
            if p[v] != v {
                let r = find(p, p[v]);
                p[v] = r;
                r
            } else {
                v
            }
        }
        for (i, &(u, v, _)) in edges.iter().enumerate() {
            if collapsed[i] {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru.max(rv)] = ru.min(rv);
                }
            }
        }
        let mut ids: std::collections::BTreeMap<usize, usize> = Default::default();
        let mut images = Vec::with_capacity(n);
        for v in 0..n {
            let r = find(&mut parent, v);
            let next = ids.len();
            images.push(*ids.entry(r).or_insert(next));
        }
        let m = ids.len();
        let quotient_edges: Vec<(usize, usize, f64)> = edges
            .iter()
            .enumerate()
            .filter(|&(i, _)| !collapsed[i])
            .map(|(_, &(u, v, w))| (images[u], images[v], w))
            .filter(|&(u, v, _)| u != v)
            .collect();
        let target = if quotient_edges.is_empty() {
            FiniteMetricGraph::new(1, &[])?
        } else {
            FiniteMetricGraph::new(m, &quotient_edges)?
        };
        Ok(CoarseMap { source: g.clone(), target, images })
    }

    pub fn image_distance(&self, u: usize, v: usize) -> f64 {
        self.target.distance(self.images[u], self.images[v])
    }
}

/// Largest image alignment defect `d(pa,pb) + d(pb,pc) - d(pa,pc)` over the
/// `k_in`-aligned source triples: images are `K`-aligned for the returned
/// `K` and no smaller constant. Exact when the scan is exhaustive.
pub fn alignment_constant(p: &CoarseMap, k_in: f64) -> f64 {
    let n = p.source.vertex_count();
    if n <= EXHAUSTIVE_VERTEX_BUDGET {
        (0..n)
            .into_par_iter()
            .map(|a| {
                let mut worst: f64 = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        if aligned(&p.source, a, b, c, k_in) {
                            let defect = p.image_distance(a, b) + p.image_distance(b, c)
                                - p.image_distance(a, c);
                            worst = worst.max(defect);
                        }
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    } else {
        let mut rng = StdRng::seed_from_u64(0xa11e);
        let mut worst: f64 = 0.0;
        for _ in 0..5_000_000 {
            let (a, b, c) =
                (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            if aligned(&p.source, a, b, c, k_in) {
                let defect =
                    p.image_distance(a, b) + p.image_distance(b, c) - p.image_distance(a, c);
                worst = worst.max(defect);
            }
        }
        worst
    }
}

/// The constant produced by composing alignment-preserving maps through a
/// `delta`-hyperbolic middle space: images of `0`-aligned triples under the
/// composition are aligned up to `K_p + 2 (6 delta + K_q) Lip(p)`.
pub fn composition_alignment_bound(k_q: f64, k_p: f64, delta: f64, lip_p: f64) -> f64 {
    k_p + 2.0 * (6.0 * delta + k_q) * lip_p
}

/// For each unit source-distance bucket `D`, the minimum image distance
/// among pairs at source distance at least `D`: the metric properness
/// profile. Nondecreasing in `D` by construction.
pub fn properness_profile(p: &CoarseMap) -> Vec<(f64, f64)> {
    let n = p.source.vertex_count();
    let max_d = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .map(|(u, v)| p.source.distance(u, v))
        .fold(0.0, f64::max);
    let buckets = max_d.floor() as usize + 1;
    let mut minima = vec![f64::INFINITY; buckets];
    for u in 0..n {
        for v in 0..n {
            let d = p.source.distance(u, v);
            let img = p.image_distance(u, v);
            let bucket = d.floor() as usize;
            if img < minima[bucket] {
                minima[bucket] = img;
            }
        }
    }
    // suffix minimum: pairs at distance >= D
    let mut out = Vec::with_capacity(buckets);
    let mut suffix = f64::INFINITY;
    for b in (0..buckets).rev() {
        suffix = suffix.min(minima[b]);
        out.push((b as f64, suffix));
    }
    out.reverse();
    out
}

/// Least `K >= 1` with `d/K - K <= d' <= K d + K` over all vertex pairs.
pub fn qi_constants_fit(p: &CoarseMap) -> f64 {
    let n = p.source.vertex_count();
    let mut k: f64 = 1.0;
    for u in 0..n {
        for v in 0..n {
            let d = p.source.distance(u, v);
            let dp = p.image_distance(u, v);
            // upper: dp <= K d + K  =>  K >= dp / (d + 1)
            k = k.max(dp / (d + 1.0));
            // lower: d/K - K <= dp  =>  K^2 + dp K - d >= 0
            k = k.max((-dp + (dp * dp + 4.0 * d).sqrt()) / 2.0);
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> FiniteMetricGraph {
        let edges: Vec<(usize, usize, f64)> =
            (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        FiniteMetricGraph::new(n, &edges).unwrap()
    }

    fn cycle_graph(n: usize) -> FiniteMetricGraph {
        let mut edges: Vec<(usize, usize, f64)> =
            (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        edges.push((n - 1, 0, 1.0));
        FiniteMetricGraph::new(n, &edges).unwrap()
    }

    /// A rooted binary tree with `depth` levels.
    fn tree_graph(depth: usize) -> FiniteMetricGraph {
        let mut edges = Vec::new();
        let n = (1usize << (depth + 1)) - 1;
        for v in 1..n {
            edges.push((v, (v - 1) / 2, 1.0));
        }
        FiniteMetricGraph::new(n, &edges).unwrap()
    }

    #[test]
    fn gromov_product_examples() {
        let g = path_graph(7);
        // (x|x)_b = d(x,b)
        assert_eq!(g.gromov_product(5, 5, 1), g.distance(5, 1));
        // base on a geodesic between the points
        assert_eq!(g.gromov_product(0, 6, 3), 0.0);
        // tree: product equals distance from base to the tripod center
        let t = tree_graph(3);
        let (x, y, base) = (7, 9, 2);
        // center of the tripod (7, 9, 2) is vertex 1
        assert_eq!(t.gromov_product(x, y, base), t.distance(base, 1));
    }

    #[test]
    fn trees_are_zero_hyperbolic_and_cycles_grow() {
        assert_eq!(delta_fourpoint(&tree_graph(4)), 0.0);
        let d16 = delta_fourpoint(&cycle_graph(16));
        let d32 = delta_fourpoint(&cycle_graph(32));
        let d64 = delta_fourpoint(&cycle_graph(64));
        assert!(d16 > 0.0);
        // linear growth: doubling n doubles the defect
        assert!((d32 / d16 - 2.0).abs() < 0.3, "{d16} {d32}");
        assert!((d64 / d32 - 2.0).abs() < 0.3, "{d32} {d64}");
    }

    #[test]
    fn alignment_basics() {
        let g = path_graph(9);
        assert!(aligned(&g, 0, 4, 8, 0.0));
        assert!(!aligned(&g, 0, 5, 3, 0.0));
        // k at least twice the diameter makes everything aligned
        let k = 2.0 * g.diameter();
        assert!(aligned(&g, 0, 8, 4, k));
        // monotone in k
        for k in 0..6 {
            if aligned(&g, 2, 6, 3, k as f64) {
                assert!(aligned(&g, 2, 6, 3, (k + 1) as f64));
            }
        }
    }

    #[test]
    fn alignment_constant_identity_and_constant_map() {
        let g = path_graph(20);
        let ident = CoarseMap::new(g.clone(), g.clone(), (0..20).collect()).unwrap();
        assert_eq!(alignment_constant(&ident, 0.0), 0.0);
        let point = FiniteMetricGraph::new(1, &[]).unwrap();
        let constant = CoarseMap::new(g.clone(), point, vec![0; 20]).unwrap();
        assert_eq!(alignment_constant(&constant, 0.0), 0.0);
    }

    #[test]
    fn collapse_map_alignment_matches_direct_scan() {
        let n = 12;
        let mut edges: Vec<(usize, usize, f64)> =
            (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        edges.push((0, 6, 1.0));
        let g = FiniteMetricGraph::new(n, &edges).unwrap();
        let mut collapsed = vec![false; edges.len()];
        collapsed[3] = true;
        collapsed[8] = true;
        let p = CoarseMap::collapse(&g, &edges, &collapsed).unwrap();
        let got = alignment_constant(&p, 0.0);
        // direct triple scan
        let mut want: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if aligned(&g, a, b, c, 0.0) {
                        let defect = p.image_distance(a, b) + p.image_distance(b, c)
                            - p.image_distance(a, c);
                        want = want.max(defect);
                    }
                }
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn properness_profiles() {
        let g = path_graph(16);
        let ident = CoarseMap::new(g.clone(), g.clone(), (0..16).collect()).unwrap();
        for (d, c) in properness_profile(&ident) {
            assert_eq!(c, d);
        }
        let point = FiniteMetricGraph::new(1, &[]).unwrap();
        let constant = CoarseMap::new(g, point, vec![0; 16]).unwrap();
        for (_, c) in properness_profile(&constant) {
            assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn qi_fit_examples() {
        let g = path_graph(10);
        let ident = CoarseMap::new(g.clone(), g.clone(), (0..10).collect()).unwrap();
        assert!((qi_constants_fit(&ident) - 1.0).abs() < 1e-12);
        // doubled metric: the least K over these pairs per the two bounds
        let doubled = {
            let edges: Vec<(usize, usize, f64)> =
                (0..9).map(|i| (i, i + 1, 2.0)).collect();
            FiniteMetricGraph::new(10, &edges).unwrap()
        };
        let scale = CoarseMap::new(g.clone(), doubled, (0..10).collect()).unwrap();
        let k = qi_constants_fit(&scale);
        // brute-force minimization over a K grid agrees
        let valid = |k: f64| -> bool {
            (0..10).all(|u| {
                (0..10).all(|v| {
                    let d = g.distance(u, v);
                    let dp = scale.image_distance(u, v);
                    d / k - k <= dp + 1e-12 && dp <= k * d + k + 1e-12
                })
            })
        };
        assert!(valid(k));
        assert!(!valid(k - 0.01));
        // the pair (0, 9) forces K >= 18/10
        assert!(k >= 1.8 - 1e-12);
    }

    #[test]
    fn edge_list_parsing() {
        let g = FiniteMetricGraph::parse_edge_list("0 1 1.0\n1 2 2.5\n# comment\n2 0\n").unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert!(FiniteMetricGraph::parse_edge_list("0 x\n").is_err());
        assert!(FiniteMetricGraph::parse_edge_list("").is_err());
        assert!(FiniteMetricGraph::parse_edge_list("0 1 1 1\n").is_err());
    }

    #[test]
    fn barycenter_of_tree_triple() {
        let t = tree_graph(3);
        let (center, radius) = t.barycenter(7, 9, 2);
        assert_eq!(radius, 0.0);
        assert_eq!(center, 1);
    }
}
