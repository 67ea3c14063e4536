//! Gate structures, optimal maps, discretized folding paths, legal length,
//! projections to folding paths, and the flaring inequalities.
//!
//! A folding path is generated from an optimal all-tension map by folding
//! every illegal turn at unit speed and rescaling to volume one. The
//! discretization targets a fixed time step but splits automatically at
//! edge-consumption and gate-splitting events, so each recorded step map is
//! an exact local homothety.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::marked_graph::{
    cyclic_reduce_path, reduce_path, Dart, DartPath, Edge, GraphShape, MarkedGraph,
};
use crate::outer_space::{candidate_loops, lipschitz_distance};
use crate::words::Word;
use crate::ConjugacyClass;
use crate::TOL;

/// Default discretization step.
pub const DEFAULT_DT: f64 = 1.0 / 64.0;

/// `m = (2r - 1)(18 m' (3r - 3) + 6)`: the illegality threshold used by the
/// right projection to a folding path. `m_breve` bounds the number of
/// illegal turns of any illegal turn structure.
pub fn illegality_constant(rank: usize, m_breve: u64) -> u64 {
    let r = rank as u64;
    (2 * r - 1) * (18 * m_breve * (3 * r - 3) + 6)
}

/// Default bound for `m_breve`: the number of turns at a rose vertex.
pub fn default_m_breve(rank: usize) -> u64 {
    (rank * (2 * rank - 1)) as u64
}

/// A partition of the directions at each vertex into gates. Turns inside a
/// single gate are illegal.
#[derive(Clone, Debug)]
pub struct GateStructure {
    /// gate id per dart; darts at distinct vertices never share a gate id
    gate_of: HashMap<Dart, u32>,
    /// number of gates per vertex
    per_vertex: Vec<Vec<Vec<Dart>>>,
}

impl GateStructure {
    /// Groups darts by key within each vertex; keys typically identify the
    /// image germ of the dart under a map.
    fn from_keys(g: &GraphShape, key: impl Fn(Dart) -> DartPath) -> Self {
        let mut gate_of = HashMap::new();
        let mut per_vertex = Vec::with_capacity(g.vertex_count);
        let mut next_gate = 0u32;
        for v in 0..g.vertex_count {
            let mut groups: Vec<(DartPath, Vec<Dart>)> = Vec::new();
            for d in g.darts_at(v) {
                let k = key(d);
                match groups.iter_mut().find(|(gk, _)| *gk == k) {
                    Some((_, members)) => members.push(d),
                    None => groups.push((k, vec![d])),
                }
            }
            let mut gates = Vec::new();
            for (_, members) in groups {
                for &d in &members {
                    gate_of.insert(d, next_gate);
                }
                next_gate += 1;
                gates.push(members);
            }
            per_vertex.push(gates);
        }
        GateStructure { gate_of, per_vertex }
    }

    pub fn same_gate(&self, d1: Dart, d2: Dart) -> bool {
        self.gate_of.get(&d1) == self.gate_of.get(&d2) && self.gate_of.contains_key(&d1)
    }

    /// A turn is a pair of directions at one vertex; it is illegal when both
    /// lie in the same gate. The turn taken by a path between consecutive
    /// darts `d` then `e` is `{d.reverse(), e}`.
    pub fn turn_is_illegal(&self, incoming: Dart, outgoing: Dart) -> bool {
        self.same_gate(incoming.reverse(), outgoing)
    }

    pub fn gates_at(&self, v: usize) -> &[Vec<Dart>] {
        &self.per_vertex[v]
    }

    pub fn min_gates(&self) -> usize {
        self.per_vertex.iter().map(|g| g.len()).min().unwrap_or(0)
    }

    pub fn vertex_count(&self) -> usize {
        self.per_vertex.len()
    }
}

/// A map between marked graphs sending each edge to an edge path at constant
/// speed. `stretch(e) = len_target(image) / len_source(e)`.
#[derive(Clone, Debug)]
pub struct ChangeOfMarking {
    pub source: MarkedGraph,
    pub target: MarkedGraph,
    /// image of each source edge, traversed forward
    pub edge_maps: Vec<DartPath>,
}

impl ChangeOfMarking {
    pub fn stretch(&self, e: usize) -> f64 {
        self.target.path_len(&self.edge_maps[e]) / self.source.edge_len(e)
    }

    pub fn stretches(&self) -> Vec<f64> {
        (0..self.source.edge_count()).map(|e| self.stretch(e)).collect()
    }

    pub fn lipschitz(&self) -> f64 {
        self.stretches().into_iter().fold(0.0, f64::max)
    }

    pub fn image_of_dart(&self, d: Dart) -> DartPath {
        let p = &self.edge_maps[d.edge()];
        if d.is_reversed() {
            p.iter().rev().map(|x| x.reverse()).collect()
        } else {
            p.clone()
        }
    }

    pub fn image_of_path(&self, path: &[Dart]) -> DartPath {
        let mut out = Vec::new();
        for &d in path {
            out.extend(self.image_of_dart(d));
        }
        reduce_path(&out)
    }

    /// Gates on the source: two directions are identified exactly when their
    /// image germs (first image darts) agree.
    pub fn induced_gates(&self) -> GateStructure {
        GateStructure::from_keys(&self.source.shape(), |d| {
            self.image_of_dart(d).first().copied().into_iter().collect()
        })
    }

    /// Checks that mapping marking loops forward reproduces the target
    /// lengths of every basis class of word length at most `max_len`.
    pub fn marking_agreement(&self, max_len: usize) -> Result<()> {
        for alpha in crate::words::enumerate_conjugacy_classes(self.source.rank(), max_len) {
            let mut image = self.image_of_path(&self.source.class_loop(&alpha)?);
            cyclic_reduce_path(&mut image);
            let via_map = self.target.path_len(&image);
            let direct = self.target.class_length(&alpha)?;
            if (via_map - direct).abs() > TOL * (1.0 + direct) {
                return Err(Error::Invalid(format!(
                    "map disagrees with target marking on {alpha}: {via_map} vs {direct}"
                )));
            }
        }
        Ok(())
    }

    /// Composition `other` after `self` (paths through the middle graph).
    pub fn then(&self, other: &ChangeOfMarking) -> ChangeOfMarking {
        let edge_maps = (0..self.source.edge_count())
            .map(|e| other.image_of_path(&self.edge_maps[e]))
            .collect();
        ChangeOfMarking {
            source: self.source.clone(),
            target: other.target.clone(),
            edge_maps,
        }
    }
}

/// Options for optimal-map search and folding-path generation.
#[derive(Clone, Debug)]
pub struct FoldOptions {
    pub dt: f64,
    /// hill-climbing iteration budget per refinement round
    pub descent_budget: usize,
    /// rounds of target subdivision when the descent stalls
    pub refinement_rounds: usize,
    /// bound on the number of recorded fold steps
    pub max_steps: usize,
    /// relative tolerance accepted between the map's Lipschitz constant and
    /// the candidate distance certificate
    pub certificate_tol: f64,
}

impl Default for FoldOptions {
    fn default() -> Self {
        FoldOptions {
            dt: DEFAULT_DT,
            descent_budget: 20_000,
            refinement_rounds: 6,
            max_steps: 4_000,
            certificate_tol: 1e-7,
        }
    }
}

/// A discretized folding path from `G` to (within tolerance of) `H`.
#[derive(Clone, Debug)]
pub struct FoldingPath {
    /// grid times, starting at 0 on the first folded graph
    pub times: Vec<f64>,
    /// volume-one graphs along the path
    pub graphs: Vec<MarkedGraph>,
    /// step maps between consecutive graphs
    pub steps: Vec<ChangeOfMarking>,
    /// gate structure on each non-terminal graph
    pub gates: Vec<GateStructure>,
    /// uniform rescaling emitted before folding proper, when the optimal map
    /// is not already maximally stretched on every edge
    pub rescale_prefix: Option<RescalePrefix>,
    pub dt: f64,
}

#[derive(Clone, Debug)]
pub struct RescalePrefix {
    pub from: MarkedGraph,
    pub log_stretch: f64,
}

impl FoldingPath {
    pub fn total_log_stretch(&self) -> f64 {
        self.rescale_prefix.as_ref().map_or(0.0, |p| p.log_stretch)
            + self.times.last().copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty() && self.rescale_prefix.is_none()
    }
}

// ---------------------------------------------------------------------------
// Optimal maps by anchored descent
// ---------------------------------------------------------------------------

/// Mutable copy of the target graph supporting edge subdivision. All stored
/// dart paths must be rewritten through the returned rewrites.
#[derive(Clone)]
struct Refined {
    vertex_count: usize,
    edges: Vec<Edge>,
    marking: Vec<DartPath>,
    basepoint: usize,
    rank: usize,
}

impl Refined {
    fn of(g: &MarkedGraph) -> Self {
        Refined {
            vertex_count: g.vertex_count(),
            edges: g.edges().to_vec(),
            marking: g.marking().to_vec(),
            basepoint: g.basepoint(),
            rank: g.rank(),
        }
    }

    fn shape(&self) -> GraphShape<'_> {
        GraphShape { vertex_count: self.vertex_count, edges: &self.edges }
    }

    fn path_len(&self, p: &[Dart]) -> f64 {
        p.iter().map(|d| self.edges[d.edge()].len).sum()
    }

    /// Splits edge `e` at `offset` from its source; rewrites own marking and
    /// returns a rewrite to apply to any other stored paths.
    fn subdivide(&mut self, e: usize, offset: f64) -> impl Fn(&[Dart]) -> DartPath {
        let old = self.edges[e];
        let w = self.vertex_count;
        self.vertex_count += 1;
        self.edges[e] = Edge { u: old.u, v: w, len: offset };
        let tail = self.edges.len();
        self.edges.push(Edge { u: w, v: old.v, len: old.len - offset });
        let rewrite = move |p: &[Dart]| -> DartPath {
            let mut out = Vec::with_capacity(p.len() + 4);
            for &d in p {
                if d.edge() == e {
                    if d.is_reversed() {
                        out.push(Dart::new(tail, true));
                        out.push(Dart::new(e, true));
                    } else {
                        out.push(Dart::new(e, false));
                        out.push(Dart::new(tail, false));
                    }
                } else {
                    out.push(d);
                }
            }
            out
        };
        for m in &mut self.marking {
            *m = rewrite(m);
        }
        rewrite
    }

    fn to_marked_graph(&self) -> MarkedGraph {
        MarkedGraph::new(
            self.rank,
            self.vertex_count,
            self.edges.clone(),
            self.basepoint,
            self.marking.clone(),
        )
        .expect("refinement preserves validity")
    }
}

fn loop_path_of_word(target: &Refined, w: &Word) -> DartPath {
    let mut raw = Vec::new();
    for &x in w.letters() {
        let m = &target.marking[x.unsigned_abs() as usize - 1];
        if x > 0 {
            raw.extend(m.iter().copied());
        } else {
            raw.extend(m.iter().rev().map(|d| d.reverse()));
        }
    }
    raw
}

fn edge_words(g: &MarkedGraph) -> Vec<Word> {
    (0..g.edge_count())
        .map(|e| {
            let d = Dart::new(e, false);
            let to_u = g.shape().tree_path(g.basepoint(), g.dart_source(d), g.tree());
            let from_v = g.shape().tree_path(g.dart_target(d), g.basepoint(), g.tree());
            let mut p = to_u;
            p.push(d);
            p.extend(from_v);
            g.based_loop_word(&reduce_path(&p))
        })
        .collect()
}

fn build_edge_maps(
    g: &MarkedGraph,
    target: &Refined,
    words: &[Word],
    anchors: &[DartPath],
) -> Vec<DartPath> {
    (0..g.edge_count())
        .map(|e| {
            let d = Dart::new(e, false);
            let (u, v) = (g.dart_source(d), g.dart_target(d));
            let mut p: DartPath = anchors[u].iter().rev().map(|x| x.reverse()).collect();
            p.extend(loop_path_of_word(target, &words[e]));
            p.extend(anchors[v].iter().copied());
            reduce_path(&p)
        })
        .collect()
}

/// Computes an optimal change-of-marking map from `g` to `h`, certified
/// against the candidate-loop distance. The returned target is a subdivided
/// copy of `h` (the same point of Outer space).
///
/// Descent: each edge stretch is piecewise linear in any one anchor
/// position with slope in `{-2, 0, +2}` per unit, so an exact line search
/// along each direction at the anchor tip finds the one-dimensional optimum
/// exactly; the target is subdivided at interior optima. For a one-vertex
/// source the maximal stretch is convex along tree geodesics and the search
/// reaches the global optimum; multi-vertex sources may stall on plateaus,
/// which the certificate reports as an error.
pub fn optimal_map(g: &MarkedGraph, h: &MarkedGraph, opts: &FoldOptions) -> Result<ChangeOfMarking> {
    let lambda_opt = lipschitz_distance(g, h)?.exp();
    let words = edge_words(g);
    let mut target = Refined::of(h);
    let mut anchors: Vec<DartPath> = vec![Vec::new(); g.vertex_count()];
    let mut maps = build_edge_maps(g, &target, &words, &anchors);

    let lambda_of = |target: &Refined, maps: &[DartPath]| -> f64 {
        maps.iter()
            .enumerate()
            .map(|(e, p)| target.path_len(p) / g.edge_len(e))
            .fold(0.0, f64::max)
    };

    let mut iterations = 0usize;
    loop {
        let lambda = lambda_of(&target, &maps);
        if lambda <= lambda_opt * (1.0 + opts.certificate_tol) {
            return Ok(ChangeOfMarking {
                source: g.clone(),
                target: target.to_marked_graph(),
                edge_maps: maps,
            });
        }
        if iterations >= opts.descent_budget {
            return Err(Error::TensionBudget(opts.descent_budget));
        }
        iterations += 1;

        // exact line search over every (vertex, outgoing dart) direction
        let mut best: Option<(usize, Dart, f64, f64)> = None; // (vertex, dart, t, lambda)
        for v in 0..g.vertex_count() {
            let tip = anchors[v]
                .last()
                .map_or(target.basepoint, |&d| target.shape().dart_target(d));
            for d in target.shape().darts_at(tip) {
                if let Some((t, value)) = line_search(g, &target, &maps, v, d) {
                    if best.as_ref().map_or(true, |&(_, _, _, b)| value < b - 1e-13) {
                        best = Some((v, d, t, value));
                    }
                }
            }
        }
        let Some((v, d, t, value)) = best else {
            return Err(Error::TensionBudget(iterations));
        };
        if value >= lambda - 1e-13 {
            return Err(Error::TensionBudget(iterations));
        }
        // move anchor v by t along d, subdividing at interior optima
        let full = target.edges[d.edge()].len;
        let step_dart = if (t - full).abs() <= 1e-12 {
            d
        } else {
            let offset = if d.is_reversed() { full - t } else { t };
            let rewrite = target.subdivide(d.edge(), offset);
            for m in &mut maps {
                *m = rewrite(m);
            }
            for a in &mut anchors {
                *a = rewrite(a);
            }
            // after subdividing, the first part of d covers exactly t
            if d.is_reversed() {
                // the new tail edge carries the far part; reversed dart of
                // the original edge now starts with the tail piece
                Dart::new(target.edges.len() - 1, true)
            } else {
                d
            }
        };
        anchors[v].push(step_dart);
        anchors[v] = reduce_path(&anchors[v]);
        maps = build_edge_maps(g, &target, &words, &anchors);
    }
}

/// Exact minimizer of the maximal stretch along the ray moving anchor `v`
/// into dart `d`, using the constant per-edge slopes valid across the dart.
/// Returns the best interior or full-dart position and its value, or `None`
/// when the direction cannot be entered.
fn line_search(
    g: &MarkedGraph,
    target: &Refined,
    maps: &[DartPath],
    v: usize,
    d: Dart,
) -> Option<(f64, f64)> {
    let full = target.edges[d.edge()].len;
    if full <= 1e-12 {
        return None;
    }
    // slope coefficient per source edge
    let mut lines: Vec<(f64, f64)> = Vec::with_capacity(maps.len()); // (value_at_0, slope)
    for (e, p) in maps.iter().enumerate() {
        let shape = g.shape();
        let fwd = Dart::new(e, false);
        let (eu, ev) = (shape.dart_source(fwd), shape.dart_target(fwd));
        let mut c = 0i32;
        if eu == v {
            // moving the start of the image: shrink when it begins with d
            c += if p.first() == Some(&d) { -1 } else { 1 };
        }
        if ev == v {
            c += if p.last() == Some(&d.reverse()) { -1 } else { 1 };
        }
        let len0 = target.path_len(p);
        lines.push((len0 / g.edge_len(e), c as f64 / g.edge_len(e)));
    }
    // candidate positions: dart end plus every pairwise crossing
    let mut candidates: Vec<f64> = vec![full];
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a1, b1) = lines[i];
            let (a2, b2) = lines[j];
            if (b1 - b2).abs() > 1e-13 {
                let t = (a2 - a1) / (b1 - b2);
                if t > 1e-12 && t < full - 1e-12 {
                    candidates.push(t);
                }
            }
        }
    }
    let eval = |t: f64| -> f64 {
        lines.iter().map(|&(a, b)| a + b * t).fold(0.0, f64::max)
    };
    let mut best: Option<(f64, f64)> = None;
    for t in candidates {
        // a degenerate move would cancel an image entirely
        if lines.iter().any(|&(a, b)| a + b * t <= 1e-12) {
            continue;
        }
        let value = eval(t);
        if best.map_or(true, |(_, bv)| value < bv - 1e-13) {
            best = Some((t, value));
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Folding proper
// ---------------------------------------------------------------------------

struct FoldState {
    target: Refined,
    /// current graph data (volume one)
    vertex_count: usize,
    edges: Vec<Edge>,
    basepoint: usize,
    marking: Vec<DartPath>,
    /// image in `target` of each current edge (forward), a `lambda`-homothety
    images: Vec<DartPath>,
    lambda: f64,
}

impl FoldState {
    fn shape(&self) -> GraphShape<'_> {
        GraphShape { vertex_count: self.vertex_count, edges: &self.edges }
    }

    fn image_of_dart(&self, d: Dart) -> DartPath {
        let p = &self.images[d.edge()];
        if d.is_reversed() {
            p.iter().rev().map(|x| x.reverse()).collect()
        } else {
            p.clone()
        }
    }

    fn gates(&self) -> GateStructure {
        GateStructure::from_keys(&self.shape(), |d| {
            self.image_of_dart(d).first().copied().into_iter().collect()
        })
    }

    fn to_marked_graph(&self) -> MarkedGraph {
        MarkedGraph::new(
            self.marking.len(),
            self.vertex_count,
            self.edges.clone(),
            self.basepoint,
            self.marking.clone(),
        )
        .expect("fold state stays a valid marked graph")
    }

    #[cfg(debug_assertions)]
    fn validate(&self, context: &str) {
        let shape = self.shape();
        let tshape = self.target.shape();
        for (e, img) in self.images.iter().enumerate() {
            let want = self.lambda * self.edges[e].len;
            let got = self.target.path_len(img);
            assert!(
                (want - got).abs() <= 1e-6 * (1.0 + want),
                "{context}: edge {e} image length {got} != lambda*len {want}"
            );
            for w in img.windows(2) {
                assert_eq!(
                    tshape.dart_target(w[0]),
                    tshape.dart_source(w[1]),
                    "{context}: edge {e} image not continuous"
                );
                assert_ne!(w[1], w[0].reverse(), "{context}: edge {e} image backtracks");
            }
        }
        for v in 0..self.vertex_count {
            let mut start: Option<usize> = None;
            for d in shape.darts_at(v) {
                let img = self.image_of_dart(d);
                let s = tshape.dart_source(img[0]);
                match start {
                    None => start = Some(s),
                    Some(prev) => assert_eq!(
                        prev, s,
                        "{context}: vertex {v} image is inconsistent across darts"
                    ),
                }
            }
        }
    }

    #[cfg(not(debug_assertions))]
    fn validate(&self, _context: &str) {}
}

/// One gate with at least two members, scheduled for folding.
struct FoldGroup {
    vertex: usize,
    darts: Vec<Dart>,
    /// common image prefix of all member darts (whole target darts)
    prefix: DartPath,
    prefix_len: f64,
}

fn illegal_groups(state: &FoldState, gates: &GateStructure) -> Vec<FoldGroup> {
    let mut groups = Vec::new();
    for v in 0..state.vertex_count {
        for gate in gates.gates_at(v) {
            if gate.len() < 2 {
                continue;
            }
            let images: Vec<DartPath> = gate.iter().map(|&d| state.image_of_dart(d)).collect();
            let mut prefix_darts = 0usize;
            'scan: loop {
                let Some(&first) = images[0].get(prefix_darts) else { break };
                for img in &images[1..] {
                    if img.get(prefix_darts) != Some(&first) {
                        break 'scan;
                    }
                }
                prefix_darts += 1;
            }
            let prefix: DartPath = images[0][..prefix_darts].to_vec();
            let prefix_len = state.target.path_len(&prefix);
            groups.push(FoldGroup { vertex: v, darts: gate.clone(), prefix, prefix_len });
        }
    }
    groups
}

struct StepOutcome {
    new_graph: MarkedGraph,
    step: ChangeOfMarking,
    log_stretch: f64,
}

/// Folds every illegal turn by `s` (graph-side length) and rescales to
/// volume one. `s` must respect the caller's event bounds: no group folds
/// past its common image prefix and no edge loses more than its length.
fn fold_by(state: &mut FoldState, groups: &[FoldGroup], s: f64) -> StepOutcome {
    let before = state.to_marked_graph();
    let lambda = state.lambda;
    let want = lambda * s;

    // Cut the target at metric position lambda*s along each group prefix,
    // subdividing a target edge when the cut lands in its interior.
    let group_darts: Vec<Vec<Dart>> = groups.iter().map(|g| g.darts.clone()).collect();
    let group_home: Vec<usize> = groups.iter().map(|g| g.vertex).collect();
    let mut groups: Vec<DartPath> = groups.iter().map(|g| g.prefix.clone()).collect();
    // Phase 1: make every cut point a target vertex, subdividing as needed.
    // Later subdivisions rewrite all stored paths, so dart counts are only
    // taken afterwards.
    for gi in 0..groups.len() {
        let mut acc = 0.0;
        let mut pos = 0usize;
        loop {
            assert!(pos < groups[gi].len(), "fold exceeds common prefix");
            let d = groups[gi][pos];
            let dl = state.target.edges[d.edge()].len;
            if acc + dl >= want - 1e-12 {
                let need = want - acc;
                if (dl - need).abs() > 1e-12 {
                    let e = d.edge();
                    let offset = if d.is_reversed() { dl - need } else { need };
                    let rewrite = state.target.subdivide(e, offset);
                    for img in &mut state.images {
                        *img = rewrite(img);
                    }
                    for g in &mut groups {
                        *g = rewrite(g);
                    }
                }
                break;
            }
            acc += dl;
            pos += 1;
        }
    }
    // Phase 2: dart counts covering exactly lambda*s along each prefix.
    let mut prefix_cut: Vec<usize> = Vec::with_capacity(groups.len());
    for prefix in &groups {
        let mut acc = 0.0;
        let mut pos = 0usize;
        while acc + 1e-12 < want {
            acc += state.target.edges[prefix[pos].edge()].len;
            pos += 1;
        }
        prefix_cut.push(pos);
    }

    let mut group_of_dart: HashMap<Dart, usize> = HashMap::new();
    for (gi, darts) in group_darts.iter().enumerate() {
        for &d in darts {
            group_of_dart.insert(d, gi);
        }
    }

    // Assemble the new graph: old vertices keep ids, each group adds one.
    let old_vertices = state.vertex_count;
    let group_vertex = |gi: usize| old_vertices + gi;
    let mut uf = UnionFind::new(old_vertices + groups.len());

    struct NewEdge {
        u: usize,
        v: usize,
        len: f64,
        image: DartPath,
    }
    let mut new_edges: Vec<NewEdge> = Vec::new();
    let mut folded_edge_of_group: Vec<usize> = Vec::new();
    for (gi, prefix) in groups.iter().enumerate() {
        folded_edge_of_group.push(new_edges.len());
        new_edges.push(NewEdge {
            u: group_home[gi],
            v: group_vertex(gi),
            len: s,
            image: prefix[..prefix_cut[gi]].to_vec(),
        });
    }
    let mut middle_of_edge: Vec<Option<usize>> = Vec::new();
    for e in 0..state.edges.len() {
        let front = group_of_dart.get(&Dart::new(e, false)).copied();
        let back = group_of_dart.get(&Dart::new(e, true)).copied();
        let cut = s * (usize::from(front.is_some()) + usize::from(back.is_some())) as f64;
        let remaining = state.edges[e].len - cut;
        let mut image = state.images[e].clone();
        if let Some(gi) = front {
            image.drain(..prefix_cut[gi]);
        }
        if let Some(gi) = back {
            let keep = image.len() - prefix_cut[gi];
            image.truncate(keep);
        }
        let u = front.map_or(state.edges[e].u, group_vertex);
        let v = back.map_or(state.edges[e].v, group_vertex);
        if remaining <= 1e-12 {
            uf.union(u, v);
            middle_of_edge.push(None);
        } else {
            middle_of_edge.push(Some(new_edges.len()));
            new_edges.push(NewEdge { u, v, len: remaining, image });
        }
    }

    let (vertex_of, next_vertex) = uf.compact();
    let edges: Vec<Edge> = new_edges
        .iter()
        .map(|e| Edge { u: vertex_of[e.u], v: vertex_of[e.v], len: e.len })
        .collect();
    let basepoint = vertex_of[state.basepoint];
    let images: Vec<DartPath> = new_edges.into_iter().map(|e| e.image).collect();

    // Rewrite each old dart as a path of new darts.
    let dart_rewrite = |d: Dart| -> DartPath {
        let e = d.edge();
        let front = group_of_dart.get(&Dart::new(e, false)).copied();
        let back = group_of_dart.get(&Dart::new(e, true)).copied();
        let mut out: DartPath = Vec::new();
        if let Some(gi) = front {
            out.push(Dart::new(folded_edge_of_group[gi], false));
        }
        if let Some(mid) = middle_of_edge[e] {
            out.push(Dart::new(mid, false));
        }
        if let Some(gi) = back {
            out.push(Dart::new(folded_edge_of_group[gi], true));
        }
        if d.is_reversed() {
            out.reverse();
            for x in &mut out {
                *x = x.reverse();
            }
        }
        out
    };
    let rewrite_path = |p: &[Dart]| -> DartPath {
        let mut out = Vec::new();
        for &d in p {
            out.extend(dart_rewrite(d));
        }
        reduce_path(&out)
    };
    let marking: Vec<DartPath> = state.marking.iter().map(|m| rewrite_path(m)).collect();
    let step_maps: Vec<DartPath> =
        (0..state.edges.len()).map(|e| dart_rewrite(Dart::new(e, false))).collect();

    // Rescale to volume one.
    let volume: f64 = edges.iter().map(|e| e.len).sum();
    let log_stretch = -volume.ln();
    state.vertex_count = next_vertex;
    state.edges = edges
        .into_iter()
        .map(|e| Edge { u: e.u, v: e.v, len: e.len / volume })
        .collect();
    state.basepoint = basepoint;
    state.marking = marking;
    state.images = images;
    state.lambda = lambda * volume;

    let new_graph = state.to_marked_graph();
    let step = ChangeOfMarking {
        source: before,
        target: new_graph.clone(),
        edge_maps: step_maps,
    };
    StepOutcome { new_graph, step, log_stretch }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, v: usize) -> usize {
        if self.parent[v] != v {
            let r = self.find(self.parent[v]);
            self.parent[v] = r;
            r
        } else {
            v
        }
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[drop] = keep;
        }
    }

    /// Maps every element to a compact id, representatives first-come.
    fn compact(&mut self) -> (Vec<usize>, usize) {
        let n = self.parent.len();
        let mut id: HashMap<usize, usize> = HashMap::new();
        let mut out = vec![0usize; n];
        let mut next = 0usize;
        for v in 0..n {
            let r = self.find(v);
            let e = *id.entry(r).or_insert_with(|| {
                let k = next;
                next += 1;
                k
            });
            out[v] = e;
        }
        (out, next)
    }
}

/// One discrete folding move on `map`'s source: folds all illegal turns by
/// up to `dt` of path time, splitting earlier at edge-consumption or
/// gate-splitting events. Returns the new graph and the step map.
pub fn fold_step(
    source_map: &ChangeOfMarking,
    dt: f64,
) -> Result<(MarkedGraph, ChangeOfMarking)> {
    if !(dt > 0.0) {
        return Err(Error::Invalid("dt must be positive".into()));
    }
    let mut state = state_from_map(source_map)?;
    let gates = state.gates();
    let groups = illegal_groups(&state, &gates);
    if groups.is_empty() {
        let g = state.to_marked_graph();
        let id = identity_map(&g);
        return Ok((g, id));
    }
    let s = fold_amount(&state, &groups, dt);
    let outcome = fold_by(&mut state, &groups, s);
    Ok((outcome.new_graph, outcome.step))
}

fn identity_map(g: &MarkedGraph) -> ChangeOfMarking {
    ChangeOfMarking {
        source: g.clone(),
        target: g.clone(),
        edge_maps: (0..g.edge_count()).map(|e| vec![Dart::new(e, false)]).collect(),
    }
}

fn state_from_map(map: &ChangeOfMarking) -> Result<FoldState> {
    let stretches = map.stretches();
    let lambda = map.lipschitz();
    for (e, s) in stretches.iter().enumerate() {
        if (s - lambda).abs() > 1e-7 * lambda {
            return Err(Error::Invalid(format!(
                "edge {e} is not maximally stretched; rescale first"
            )));
        }
    }
    Ok(FoldState {
        target: Refined::of(&map.target),
        vertex_count: map.source.vertex_count(),
        edges: map.source.edges().to_vec(),
        basepoint: map.source.basepoint(),
        marking: map.source.marking().to_vec(),
        images: map.edge_maps.clone(),
        lambda,
    })
}

/// The graph-side fold length realizing a time step of at most `dt`,
/// clipped at every event bound.
fn fold_amount(state: &FoldState, groups: &[FoldGroup], dt: f64) -> f64 {
    // time dt corresponds to shrinking the volume to e^{-dt}
    let merged: f64 = groups.iter().map(|g| (g.darts.len() - 1) as f64).sum();
    let mut s = (1.0 - (-dt).exp()) / merged;
    // never fold past a group's common image prefix
    for g in groups {
        s = s.min(g.prefix_len / state.lambda);
    }
    // never cut more than an edge's length
    let mut cut_ends = vec![0usize; state.edges.len()];
    for g in groups {
        for &d in &g.darts {
            cut_ends[d.edge()] += 1;
        }
    }
    for (e, &ends) in cut_ends.iter().enumerate() {
        if ends > 0 {
            s = s.min(state.edges[e].len / ends as f64);
        }
    }
    s
}

/// Generates the discretized folding path from `g` to `h`: an optimal map,
/// an optional uniform rescaling onto the tension graph, then unit-speed
/// folding until the remaining stretch is trivial.
pub fn folding_path(g: &MarkedGraph, h: &MarkedGraph, opts: &FoldOptions) -> Result<FoldingPath> {
    let map = optimal_map(g, h, opts)?;
    folding_path_from_map(map, opts)
}

pub fn folding_path_from_map(map: ChangeOfMarking, opts: &FoldOptions) -> Result<FoldingPath> {
    let g = map.source.clone();
    let lambda = map.lipschitz();
    let terminal_tol = 1e-9;
    if lambda <= 1.0 + terminal_tol {
        return Ok(FoldingPath {
            times: vec![0.0],
            graphs: vec![g],
            steps: Vec::new(),
            gates: Vec::new(),
            rescale_prefix: None,
            dt: opts.dt,
        });
    }
    // Rescale onto the tension graph when needed: new lengths proportional
    // to image lengths make every edge maximally stretched.
    let stretches = map.stretches();
    let uniform = stretches.iter().all(|s| (s - lambda).abs() <= 1e-9 * lambda);
    let (mut state, prefix) = if uniform {
        (state_from_map(&map)?, None)
    } else {
        let image_lens: Vec<f64> = map
            .edge_maps
            .iter()
            .map(|p| -> f64 { p.iter().map(|d| map.target.edge_len(d.edge())).sum() })
            .collect();
        let volume: f64 = image_lens.iter().sum();
        if image_lens.iter().any(|&l| l <= 0.0) {
            return Err(Error::Invalid(
                "optimal map collapses an edge; no folding path emitted".into(),
            ));
        }
        let rescaled_edges: Vec<Edge> = g
            .edges()
            .iter()
            .zip(&image_lens)
            .map(|(e, &l)| Edge { u: e.u, v: e.v, len: l / volume })
            .collect();
        let rescaled = MarkedGraph::new(
            g.rank(),
            g.vertex_count(),
            rescaled_edges,
            g.basepoint(),
            g.marking().to_vec(),
        )?;
        let log_stretch = lipschitz_distance(&g, &rescaled)?;
        let state = FoldState {
            target: Refined::of(&map.target),
            vertex_count: rescaled.vertex_count(),
            edges: rescaled.edges().to_vec(),
            basepoint: rescaled.basepoint(),
            marking: rescaled.marking().to_vec(),
            images: map.edge_maps.clone(),
            lambda: volume,
        };
        (state, Some(RescalePrefix { from: g.clone(), log_stretch }))
    };

    let mut path = FoldingPath {
        times: vec![0.0],
        graphs: vec![state.to_marked_graph()],
        steps: Vec::new(),
        gates: Vec::new(),
        rescale_prefix: prefix,
        dt: opts.dt,
    };
    let mut t = 0.0;
    while state.lambda > 1.0 + terminal_tol {
        if path.steps.len() >= opts.max_steps {
            return Err(Error::BudgetExhausted {
                what: "folding path generation".into(),
                budget: opts.max_steps,
            });
        }
        let gates = state.gates();
        let groups = illegal_groups(&state, &gates);
        if groups.is_empty() {
            return Err(Error::Invalid(
                "map is an immersion but not an isometry; cannot fold".into(),
            ));
        }
        let remaining = state.lambda.ln();
        let goal = opts.dt.min(remaining);
        let s = fold_amount(&state, &groups, goal);
        path.gates.push(gates);
        let outcome = fold_by(&mut state, &groups, s);
        state.validate(&format!("after step {}", path.steps.len()));
        t += outcome.log_stretch;
        path.times.push(t);
        path.graphs.push(outcome.new_graph);
        path.steps.push(outcome.step);
    }
    Ok(path)
}

// ---------------------------------------------------------------------------
// Legal length, projections, flaring
// ---------------------------------------------------------------------------

/// Metric lengths of the maximal legal segments of the immersed loop of
/// `alpha`, in loop order. A cyclically legal loop yields one segment
/// carrying the whole length.
pub fn legal_segments(
    g: &MarkedGraph,
    gates: &GateStructure,
    alpha: &ConjugacyClass,
) -> Result<Vec<f64>> {
    Ok(decompose(g, gates, alpha)?.0)
}

/// Maximal legal segment lengths plus the number of illegal turns of the
/// cyclic loop.
fn decompose(
    g: &MarkedGraph,
    gates: &GateStructure,
    alpha: &ConjugacyClass,
) -> Result<(Vec<f64>, usize)> {
    let loop_darts = g.class_loop(alpha)?;
    let n = loop_darts.len();
    let mut breaks: Vec<usize> = Vec::new(); // i: turn between dart i and i+1 is illegal
    for i in 0..n {
        let d = loop_darts[i];
        let e = loop_darts[(i + 1) % n];
        if gates.turn_is_illegal(d, e) {
            breaks.push(i);
        }
    }
    if breaks.is_empty() {
        return Ok((vec![g.path_len(&loop_darts)], 0));
    }
    let mut segments = Vec::with_capacity(breaks.len());
    for w in 0..breaks.len() {
        let from = (breaks[w] + 1) % n;
        let to = breaks[(w + 1) % breaks.len()]; // inclusive
        let mut len = 0.0;
        let mut i = from;
        loop {
            len += g.edge_len(loop_darts[i].edge());
            if i == to {
                break;
            }
            i = (i + 1) % n;
        }
        segments.push(len);
    }
    Ok((segments, breaks.len()))
}

/// Sum of the maximal legal segments of length at least 3.
pub fn legal_length(
    g: &MarkedGraph,
    gates: &GateStructure,
    alpha: &ConjugacyClass,
) -> Result<f64> {
    Ok(legal_segments(g, gates, alpha)?
        .into_iter()
        .filter(|&l| l >= 3.0 - TOL)
        .sum())
}

/// Supremum of lengths of immersed subpaths of the loop containing no legal
/// subsegment of length 3. Infinite when the loop has no long legal run
/// (powers of the loop wrap indefinitely).
pub fn max_illegal_segment(
    g: &MarkedGraph,
    gates: &GateStructure,
    alpha: &ConjugacyClass,
) -> Result<f64> {
    let (segments, breaks) = decompose(g, gates, alpha)?;
    if breaks == 0 {
        // cyclically legal: subpaths of length >= 3 contain a legal
        // 3-segment, so the supremum of illegal lengths is 3 (not attained)
        return Ok(3.0);
    }
    let long: Vec<usize> = (0..segments.len()).filter(|&i| segments[i] >= 3.0 - TOL).collect();
    if long.is_empty() {
        // powers of the loop cross no legal 3-segment: unbounded
        return Ok(f64::INFINITY);
    }
    let mut best: f64 = 0.0;
    for w in 0..long.len() {
        let from = long[w];
        let to = long[(w + 1) % long.len()];
        let mut gap = 0.0;
        let mut i = (from + 1) % segments.len();
        while i != to {
            gap += segments[i];
            i = (i + 1) % segments.len();
        }
        // plus up to (but excluding) 3 inside each bounding long segment
        best = best.max(gap + 6.0);
    }
    Ok(best)
}

/// The projections of a class to a folding path over the discrete grid:
/// `left` is the first time its loop has a legal segment of length 3;
/// `right` is the last time it has an immersed illegal segment of length
/// `m`. Empty-set conventions: `left = +inf`, `right = ` the initial time.
pub fn left_right_projection(
    path: &FoldingPath,
    alpha: &ConjugacyClass,
    m: f64,
) -> Result<(f64, f64)> {
    let mut left = f64::INFINITY;
    let mut right = path.times[0];
    for (k, gates) in path.gates.iter().enumerate() {
        let g = &path.graphs[k];
        if left.is_infinite() && legal_length(g, gates, alpha)? > 0.0 {
            left = path.times[k];
        }
        if max_illegal_segment(g, gates, alpha)? > m {
            right = path.times[k];
        }
    }
    Ok((left, right))
}

#[derive(Clone, Debug)]
pub struct FlareRow {
    pub t_a: f64,
    pub t_b: f64,
    pub class: ConjugacyClass,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FlareReport {
    pub rows: Vec<FlareRow>,
    pub violations: usize,
}

/// Verifies `leg(alpha|G_b) >= (1/3) e^{b-a} leg(alpha|G_a)` on every grid
/// pair, with multiplicative discretization slack `e^{2 dt}`.
pub fn check_legal_flare(path: &FoldingPath, alpha: &ConjugacyClass) -> Result<FlareReport> {
    let mut report = FlareReport::default();
    let n = path.gates.len();
    let mut leg = Vec::with_capacity(n);
    for k in 0..n {
        leg.push(legal_length(&path.graphs[k], &path.gates[k], alpha)?);
    }
    let slack = (2.0 * path.dt).exp();
    for a in 0..n {
        for b in a + 1..n {
            let (ta, tb) = (path.times[a], path.times[b]);
            let lhs = leg[b];
            let rhs = leg[a] * (tb - ta).exp() / 3.0;
            let margin = lhs - rhs / slack;
            if margin < -TOL {
                report.violations += 1;
            }
            report.rows.push(FlareRow {
                t_a: ta,
                t_b: tb,
                class: alpha.clone(),
                lhs,
                rhs,
                margin,
            });
        }
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub enum ContainmentFlare {
    /// preconditions fail: nothing to check
    NotApplicable { reason: String },
    Checked {
        /// margin of `leg(beta|G_s) >= (2/m) len(beta|G_s)`
        legal_margin: f64,
        /// per later grid time: margin of the exponential growth bound
        growth: Vec<FlareRow>,
        violations: usize,
    },
}

/// Checks the containment flaring inequalities at `s` (a grid index) for
/// `beta` `k`-almost contained in `alpha`, with illegality threshold `m`.
pub fn check_containment_flare(
    path: &FoldingPath,
    alpha: &ConjugacyClass,
    beta: &ConjugacyClass,
    k: f64,
    s_index: usize,
    m: f64,
) -> Result<ContainmentFlare> {
    let (_, right) = left_right_projection(path, alpha, m)?;
    let t_s = path.times[s_index];
    if t_s < right - TOL {
        return Ok(ContainmentFlare::NotApplicable {
            reason: format!("s = {t_s} lies before the right projection {right}"),
        });
    }
    let g_s = &path.graphs[s_index];
    if !crate::bundle::almost_contained(beta, alpha, g_s, k)? {
        return Ok(ContainmentFlare::NotApplicable {
            reason: "beta is not k-almost contained in alpha at G_s".into(),
        });
    }
    let len_s = g_s.class_length(beta)?;
    if len_s < 3.0 * k + 3.0 * m {
        return Ok(ContainmentFlare::NotApplicable {
            reason: format!("len(beta|G_s) = {len_s} < 3k + 3m"),
        });
    }
    let leg_s = legal_length(g_s, &path.gates[s_index], beta)?;
    let legal_margin = leg_s - (2.0 / m) * len_s;
    let mut growth = Vec::new();
    let mut violations = usize::from(legal_margin < -TOL);
    let slack = (2.0 * path.dt).exp();
    for t in s_index + 1..path.graphs.len() {
        let lhs = path.graphs[t].class_length(beta)?;
        let rhs = (2.0 / (3.0 * m)) * len_s * (path.times[t] - t_s).exp();
        let margin = lhs - rhs / slack;
        if margin < -TOL {
            violations += 1;
        }
        growth.push(FlareRow {
            t_a: t_s,
            t_b: path.times[t],
            class: beta.clone(),
            lhs,
            rhs,
            margin,
        });
    }
    Ok(ContainmentFlare::Checked { legal_margin, growth, violations })
}

/// Lower estimate of the bounded-backtracking constant of a map: the
/// maximal excursion of images of geodesic segments (sampled from loop
/// lifts of length at most `sample_len`) away from the geodesic between the
/// image endpoints, measured at vertex points of the universal cover.
pub fn bbt_estimate(map: &ChangeOfMarking, sample_len: f64) -> f64 {
    let g = &map.source;
    let classes = candidate_loops(g);
    let mut best: f64 = 0.0;
    for alpha in classes {
        let Ok(loop_darts) = g.class_loop(&alpha) else { continue };
        let loop_len = g.path_len(&loop_darts);
        let copies = (sample_len / loop_len).ceil() as usize + 1;
        let mut line: DartPath = Vec::new();
        for _ in 0..copies {
            line.extend(loop_darts.iter().copied());
        }
        // windows starting at each dart boundary, capped at sample_len
        for start in 0..loop_darts.len() {
            let mut window: DartPath = Vec::new();
            let mut len = 0.0;
            for &d in line[start..].iter() {
                window.push(d);
                len += g.edge_len(d.edge());
                if len >= sample_len {
                    break;
                }
            }
            best = best.max(excursion(map, &window));
        }
    }
    best
}

/// Max distance of the image path's vertices from the tightened geodesic
/// between its endpoints, inside the tree-like universal cover of the
/// target. In a tree, `d(x, [a,b])` is the Gromov product `(a|b)_x`.
fn excursion(map: &ChangeOfMarking, segment: &[Dart]) -> f64 {
    let image: DartPath = segment.iter().flat_map(|&d| map.image_of_dart(d)).collect();
    let h = &map.target;
    let mut best: f64 = 0.0;
    // cumulative unreduced positions of each vertex point along the image
    for cut in 1..image.len() {
        let (front, back) = image.split_at(cut);
        let d_a_x = h.path_len(&reduce_path(front));
        let d_x_b = h.path_len(&reduce_path(back));
        let d_a_b = h.path_len(&reduce_path(&image));
        let product = 0.5 * (d_a_x + d_x_b - d_a_b);
        best = best.max(product);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marked_graph::act;
    use crate::sample;
    use crate::words::{enumerate_conjugacy_classes, parse_word};

    fn class(s: &str) -> ConjugacyClass {
        ConjugacyClass::from_word(&parse_word(s, 3).unwrap())
    }

    #[test]
    fn illegality_constant_values() {
        assert_eq!(illegality_constant(3, 15), 8130);
        assert_eq!(illegality_constant(2, 1), 180);
        // monotone on a grid
        for r in 2..5 {
            for mb in 1..5 {
                assert!(illegality_constant(r, mb) < illegality_constant(r + 1, mb));
                assert!(illegality_constant(r, mb) < illegality_constant(r, mb + 1));
            }
        }
        assert_eq!(default_m_breve(3), 15);
    }

    #[test]
    fn marked_isometry_has_singleton_gates_and_zero_bbt() {
        let rose = MarkedGraph::standard_rose(3);
        let id = identity_map(&rose);
        let gates = id.induced_gates();
        assert_eq!(gates.min_gates(), 6);
        for v in 0..gates.vertex_count() {
            for gate in gates.gates_at(v) {
                assert_eq!(gate.len(), 1);
            }
        }
        assert!(bbt_estimate(&id, 4.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_map_between_roses_is_certified() {
        let g = MarkedGraph::rose(3, &[0.5, 0.25, 0.25]).unwrap();
        let h = MarkedGraph::standard_rose(3);
        let map = optimal_map(&g, &h, &FoldOptions::default()).unwrap();
        let d = lipschitz_distance(&g, &h).unwrap();
        assert!((map.lipschitz().ln() - d).abs() < 1e-7);
        map.marking_agreement(3).unwrap();
    }

    #[test]
    fn two_petal_fold_shares_gate() {
        // marking with petals a and b starting with the same target letter
        let rose = MarkedGraph::standard_rose(2);
        let twisted = {
            // phi: a -> ab, b -> a ... target marking loops both start with a
            let phi = crate::automorphism::Automorphism::new(
                2,
                vec![parse_word("ab", 2).unwrap(), parse_word("a", 2).unwrap()],
                vec![parse_word("b", 2).unwrap(), parse_word("Ba", 2).unwrap()],
            )
            .unwrap();
            act(&phi, &MarkedGraph::rose(2, &[0.6, 0.4]).unwrap())
        };
        let map = optimal_map(&twisted, &rose, &FoldOptions::default()).unwrap();
        let gates = map.induced_gates();
        // some gate holds two or more directions: an illegal turn to fold
        let max_gate = (0..gates.vertex_count())
            .flat_map(|v| gates.gates_at(v))
            .map(|g| g.len())
            .max()
            .unwrap();
        assert!(max_gate >= 2, "expected a foldable turn");
        assert!(gates.min_gates() >= 2);
    }

    #[test]
    fn folding_path_trivial_when_equal() {
        let g = MarkedGraph::standard_rose(3);
        let path = folding_path(&g, &g, &FoldOptions::default()).unwrap();
        assert!(path.is_empty());
        assert_eq!(path.graphs.len(), 1);
    }

    #[test]
    fn folding_path_telescopes_between_roses() {
        let g = MarkedGraph::standard_rose(3);
        let phi = sample::tribonacci();
        let h = act(&phi, &g).normalized();
        let opts = FoldOptions::default();
        let path = folding_path(&g, &h, &opts).unwrap();
        let d = lipschitz_distance(&g, &h).unwrap();
        assert!(
            (path.total_log_stretch() - d).abs() <= 2.0 * opts.dt,
            "telescoping: {} vs {}",
            path.total_log_stretch(),
            d
        );
        // every graph on the path has volume one
        for gr in &path.graphs {
            assert!((gr.volume() - 1.0).abs() < 1e-9);
        }
        // terminal graph is marked-isometric to h
        let last = path.graphs.last().unwrap();
        assert!(crate::outer_space::symmetrized_distance(last, &h).unwrap() < 1e-6);
        // step maps are uniform homotheties matching the time increments
        for (k, step) in path.steps.iter().enumerate() {
            let dt_k = path.times[k + 1] - path.times[k];
            for s in step.stretches() {
                assert!((s.ln() - dt_k).abs() < 1e-7, "step {k}: {} vs {dt_k}", s.ln());
            }
        }
    }

    #[test]
    fn gate_consistency_along_path() {
        let g = MarkedGraph::standard_rose(3);
        let h = act(&sample::tribonacci(), &g).normalized();
        let path = folding_path(&g, &h, &FoldOptions::default()).unwrap();
        // composite of the first steps induces the stored gates at time 0
        let upto = path.steps.len().min(6);
        for k in 1..=upto {
            let mut composite = path.steps[0].clone();
            for step in &path.steps[1..k] {
                composite = composite.then(step);
            }
            let induced = composite.induced_gates();
            let stored = &path.gates[0];
            let shape = path.graphs[0].shape();
            for v in 0..path.graphs[0].vertex_count() {
                for d1 in shape.darts_at(v) {
                    for d2 in shape.darts_at(v) {
                        assert_eq!(
                            stored.same_gate(d1, d2),
                            induced.same_gate(d1, d2),
                            "gate mismatch at step {k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn legal_flare_holds_along_generated_path() {
        let g = MarkedGraph::standard_rose(3);
        let h = act(&sample::tribonacci(), &g).normalized();
        let path = folding_path(&g, &h, &FoldOptions::default()).unwrap();
        for alpha in enumerate_conjugacy_classes(3, 4) {
            let report = check_legal_flare(&path, &alpha).unwrap();
            assert_eq!(report.violations, 0, "class {alpha}");
        }
    }

    #[test]
    fn legal_length_examples() {
        let rose = MarkedGraph::standard_rose(3);
        let id = identity_map(&rose);
        let gates = id.induced_gates();
        // all turns legal: one segment carrying the whole length
        let segs = legal_segments(&rose, &gates, &class("ab")).unwrap();
        assert_eq!(segs.len(), 1);
        // length 2/3 < 3: whole loop legal but short
        assert!(legal_length(&rose, &gates, &class("ab")).unwrap() - 2.0 / 3.0 < 1e-12);
        // long legal loop counts fully
        let long = class("abababababab");
        let expect = rose.class_length(&long).unwrap();
        assert!(expect >= 3.0);
        assert!((legal_length(&rose, &gates, &long).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn projection_conventions() {
        let g = MarkedGraph::standard_rose(3);
        let h = act(&sample::tribonacci(), &g).normalized();
        let path = folding_path(&g, &h, &FoldOptions::default()).unwrap();
        let m = illegality_constant(3, default_m_breve(3)) as f64;
        // a short class never has an illegal segment of metric length m
        let (_, right) = left_right_projection(&path, &class("a"), m).unwrap();
        assert_eq!(right, path.times[0]);
        // a long legal power of a is legal from the start
        let long = ConjugacyClass::from_word(&parse_word("a", 3).unwrap().pow(12));
        let (left, _) = left_right_projection(&path, &long, m).unwrap();
        assert!(left.is_finite());
    }
}
