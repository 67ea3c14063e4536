//! Automorphisms of the free group as generator-image tables with verified
//! inverses.

use std::fmt;

use crate::error::{Error, Result};
use crate::words::{parse_word, ConjugacyClass, Letter, Word};

/// An automorphism of the rank-`r` free group, stored as the images of the
/// basis together with the images under the inverse. The inverse is supplied
/// (or built structurally) rather than computed, and is verified at
/// construction.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Automorphism {
    rank: usize,
    images: Vec<Word>,
    inverse_images: Vec<Word>,
}

impl Automorphism {
    pub fn new(rank: usize, images: Vec<Word>, inverse_images: Vec<Word>) -> Result<Self> {
        if images.len() != rank || inverse_images.len() != rank {
            return Err(Error::Invalid(format!(
                "expected {rank} images, got {} and {} inverse images",
                images.len(),
                inverse_images.len()
            )));
        }
        for (i, w) in images.iter().chain(inverse_images.iter()).enumerate() {
            if !w.fits_rank(rank) {
                return Err(Error::Invalid(format!(
                    "image #{i} uses a generator outside rank {rank}"
                )));
            }
        }
        let phi = Automorphism { rank, images, inverse_images };
        for k in 1..=rank {
            let x = Word::generator(k);
            let round = phi.apply(&phi.apply_inverse(&x));
            if round != x {
                return Err(Error::Invalid(format!(
                    "inverse check failed on generator {}",
                    Word::generator(k)
                )));
            }
            let round = phi.apply_inverse(&phi.apply(&x));
            if round != x {
                return Err(Error::Invalid(format!(
                    "inverse check failed on generator {} (other side)",
                    Word::generator(k)
                )));
            }
        }
        Ok(phi)
    }

    pub fn identity(rank: usize) -> Self {
        let images: Vec<Word> = (1..=rank).map(Word::generator).collect();
        Automorphism { rank, images: images.clone(), inverse_images: images }
    }

    /// Conjugation by `w`: `x -> w x w^-1`.
    pub fn inner(rank: usize, w: &Word) -> Self {
        let images = (1..=rank).map(|k| Word::generator(k).conjugate_by(w)).collect();
        let wi = w.inverse();
        let inverse_images = (1..=rank).map(|k| Word::generator(k).conjugate_by(&wi)).collect();
        Automorphism { rank, images, inverse_images }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn inverse_images(&self) -> &[Word] {
        &self.inverse_images
    }

    pub fn inverse(&self) -> Self {
        Automorphism {
            rank: self.rank,
            images: self.inverse_images.clone(),
            inverse_images: self.images.clone(),
        }
    }

    /// Substitutes images for letters and reduces.
    pub fn apply(&self, w: &Word) -> Word {
        substitute(&self.images, w)
    }

    pub fn apply_inverse(&self, w: &Word) -> Word {
        substitute(&self.inverse_images, w)
    }

    pub fn apply_class(&self, c: &ConjugacyClass) -> ConjugacyClass {
        ConjugacyClass::from_word(&self.apply(c.cyclic_word()))
    }

    /// Composition `self . other`: applies `other` first.
    pub fn compose(&self, other: &Automorphism) -> Self {
        debug_assert_eq!(self.rank, other.rank);
        let images = other.images.iter().map(|w| self.apply(w)).collect();
        let inverse_images =
            self.inverse_images.iter().map(|w| other.apply_inverse(w)).collect();
        Automorphism { rank: self.rank, images, inverse_images }
    }

    pub fn is_identity(&self) -> bool {
        self.images
            .iter()
            .enumerate()
            .all(|(i, w)| w.letters() == [(i + 1) as Letter])
    }

    /// Decides exactly whether `self` is the inner automorphism `i_w` for
    /// some `w`, returning the conjugator if so.
    pub fn is_inner(&self) -> Option<Word> {
        inner_conjugator(&self.images)
    }

    /// Abelianized image as a rank x rank integer matrix, columns indexed by
    /// generators.
    pub fn abelianization_matrix(&self) -> Vec<Vec<i64>> {
        self.images.iter().map(|w| w.abelianization(self.rank)).collect()
    }

    /// Parses `r` comma-separated image words, e.g. `b, c, ab`.
    pub fn parse_images(s: &str, rank: usize) -> Result<Vec<Word>> {
        let images: Vec<Word> = s
            .split(',')
            .map(|part| parse_word(part, rank))
            .collect::<Result<_>>()?;
        if images.len() != rank {
            return Err(Error::Parse(format!(
                "expected {rank} comma-separated words, got {}",
                images.len()
            )));
        }
        Ok(images)
    }
}

fn substitute(images: &[Word], w: &Word) -> Word {
    let mut raw: Vec<Letter> = Vec::new();
    for &x in w.letters() {
        let img = &images[x.unsigned_abs() as usize - 1];
        if x > 0 {
            raw.extend_from_slice(img.letters());
        } else {
            raw.extend(img.letters().iter().rev().map(|&y| -y));
        }
    }
    Word::reduce(&raw)
}

impl fmt::Debug for Automorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Aut[")?;
        for (i, w) in self.images.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} -> {}", Word::generator(i + 1), w)?;
        }
        write!(f, "]")
    }
}

/// Elementary Nielsen moves: the standard generating set of `Aut(F_r)` used
/// by the oracle searches. Each move carries its own inverse.
pub fn nielsen_moves(rank: usize) -> Vec<Automorphism> {
    let mut moves = Vec::new();
    let gen = |k: usize| Word::generator(k);
    // inversions x_i -> x_i^-1
    for i in 1..=rank {
        let mut images: Vec<Word> = (1..=rank).map(gen).collect();
        images[i - 1] = gen(i).inverse();
        moves.push(Automorphism {
            rank,
            images: images.clone(),
            inverse_images: images,
        });
    }
    // transpositions x_i <-> x_j
    for i in 1..=rank {
        for j in i + 1..=rank {
            let mut images: Vec<Word> = (1..=rank).map(gen).collect();
            images.swap(i - 1, j - 1);
            moves.push(Automorphism {
                rank,
                images: images.clone(),
                inverse_images: images,
            });
        }
    }
    // right multiplications x_i -> x_i x_j, i != j
    for i in 1..=rank {
        for j in 1..=rank {
            if i == j {
                continue;
            }
            let mut images: Vec<Word> = (1..=rank).map(gen).collect();
            images[i - 1] = gen(i).concat(&gen(j));
            let mut inv: Vec<Word> = (1..=rank).map(gen).collect();
            inv[i - 1] = gen(i).concat(&gen(j).inverse());
            moves.push(Automorphism { rank, images, inverse_images: inv });
        }
    }
    moves
}

/// Exact inner-automorphism detection from a generator-image table: returns
/// `w` with `images[j] = w x_j w^-1` for all `j`, if one exists.
///
/// If the table is `i_w` then the first image cyclically reduces to `x_1`
/// with a unique conjugator `v`; any solution is then `w = v x_1^k`, and
/// the exponent `k` is pinned by the remaining generators.
pub fn inner_conjugator(images: &[Word]) -> Option<Word> {
    let rank = images.len();
    let x1: Letter = 1;
    let (core, v) = images[0].cyclic_split();
    if core.letters() != [x1] {
        return None;
    }
    // Candidate conjugators are v * x1^k. Conjugating the requirement by
    // v^-1 turns it into x1^-k * z_i * x1^k = x_i for z_i = v^-1 phi(x_i) v.
    let mut k: Option<i64> = None;
    for i in 2..=rank {
        let z = images[i - 1].conjugate_by(&v.inverse());
        // z must literally be x1^k x_i x1^-k, which is reduced for all k.
        let n = z.len();
        if n % 2 == 0 {
            return None;
        }
        let mid = n / 2;
        let letters = z.letters();
        if letters[mid].unsigned_abs() as usize != i {
            return None;
        }
        let mut ki: i64 = 0;
        for j in 0..mid {
            if letters[j].unsigned_abs() != 1 || letters[j] != letters[0] {
                return None;
            }
            if letters[n - 1 - j] != -letters[j] {
                return None;
            }
            ki += letters[j].signum() as i64;
        }
        match k {
            None => k = Some(ki),
            Some(prev) if prev != ki => return None,
            _ => {}
        }
    }
    let k = k.unwrap_or(0);
    let w = v.concat(&Word::generator(1).pow(k));
    // Full verification guards the rank-1 edge cases.
    if (1..=rank).all(|j| images[j - 1] == Word::generator(j).conjugate_by(&w)) {
        Some(w)
    } else {
        None
    }
}

/// Given the images `u_1..u_r` of a basis under some automorphism, computes
/// the inverse images, or `None` when the words do not form a basis (or the
/// plateau search budget runs out).
///
/// Nielsen reduction with mirrored bookkeeping: elementary moves shrink the
/// image tuple to a signed permutation of the basis while the mirror tuple
/// accumulates the preimages. Plateaus are crossed by a bounded
/// breadth-first search over length-preserving moves.
pub fn invert_basis_images(images: &[Word], rank: usize) -> Option<Vec<Word>> {
    #[derive(Clone, PartialEq, Eq, Hash)]
    struct State {
        w: Vec<Word>,
        p: Vec<Word>,
    }

    fn moves(st: &State) -> Vec<State> {
        let r = st.w.len();
        let mut out = Vec::new();
        for i in 0..r {
            let mut s = st.clone();
            s.w[i] = s.w[i].inverse();
            s.p[i] = s.p[i].inverse();
            out.push(s);
            for j in 0..r {
                if i == j {
                    continue;
                }
                for inv in [false, true] {
                    let wj = if inv { st.w[j].inverse() } else { st.w[j].clone() };
                    let pj = if inv { st.p[j].inverse() } else { st.p[j].clone() };
                    let mut s = st.clone();
                    s.w[i] = s.w[i].concat(&wj);
                    s.p[i] = s.p[i].concat(&pj);
                    out.push(s);
                    let mut s = st.clone();
                    s.w[i] = wj.concat(&s.w[i]);
                    s.p[i] = pj.concat(&s.p[i]);
                    out.push(s);
                }
            }
        }
        out
    }

    fn total(st: &State) -> usize {
        st.w.iter().map(Word::len).sum()
    }

    fn finish(st: &State, images: &[Word], rank: usize) -> Option<Vec<Word>> {
        let mut inverse = vec![None; rank];
        for (wi, pi) in st.w.iter().zip(&st.p) {
            let &[x] = wi.letters() else { return None };
            let slot = x.unsigned_abs() as usize - 1;
            if inverse[slot].is_some() {
                return None;
            }
            inverse[slot] = Some(if x > 0 { pi.clone() } else { pi.inverse() });
        }
        let inverse: Vec<Word> = inverse.into_iter().collect::<Option<_>>()?;
        // Round-trip verification makes a wrong answer impossible.
        for k in 1..=rank {
            let x = Word::generator(k);
            if substitute(images, &substitute(&inverse, &x)) != x
                || substitute(&inverse, &substitute(images, &x)) != x
            {
                return None;
            }
        }
        Some(inverse)
    }

    if images.len() != rank {
        return None;
    }
    let mut st = State {
        w: images.to_vec(),
        p: (1..=rank).map(Word::generator).collect(),
    };
    let budget = 50_000usize;
    loop {
        // Greedy strict descent.
        loop {
            let cur = total(&st);
            match moves(&st).into_iter().filter(|s| total(s) < cur).min_by_key(total) {
                Some(better) => st = better,
                None => break,
            }
        }
        if total(&st) == rank {
            return finish(&st, images, rank);
        }
        // Plateau crossing: breadth-first over length-preserving moves until
        // some state admits a strict decrease.
        let level = total(&st);
        let mut visited: std::collections::HashSet<Vec<Word>> = std::collections::HashSet::new();
        let mut queue = std::collections::VecDeque::from([st.clone()]);
        visited.insert(st.w.clone());
        let mut progressed = None;
        'bfs: while let Some(cur) = queue.pop_front() {
            for next in moves(&cur) {
                let t = total(&next);
                if t < level {
                    progressed = Some(next);
                    break 'bfs;
                }
                if t == level && visited.insert(next.w.clone()) {
                    if visited.len() > budget {
                        return None;
                    }
                    queue.push_back(next);
                }
            }
        }
        match progressed {
            Some(next) => st = next,
            None => return None,
        }
    }
}
