//! Freely and cyclically reduced words over a fixed free basis.
//!
//! A letter is a nonzero `i32`: the generator with index `k >= 1` is `k`,
//! its inverse is `-k`. The ASCII grammar maps generator `k` to the `k`-th
//! lowercase letter (`a..z`) and its inverse to the corresponding uppercase
//! letter, so `A` parses as the inverse of `a`. The empty word prints as `1`.

use std::fmt;

use crate::error::Error;

pub type Letter = i32;

pub const MAX_RANK: usize = 26;

#[inline]
pub fn inverse_letter(x: Letter) -> Letter {
    -x
}

/// A freely reduced word in the free group.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn identity() -> Self {
        Word { letters: Vec::new() }
    }

    /// Free reduction: cancels adjacent inverse pairs until none remain.
    pub fn reduce(raw: &[Letter]) -> Self {
        let mut out: Vec<Letter> = Vec::with_capacity(raw.len());
        for &x in raw {
            debug_assert!(x != 0, "letter indices are nonzero");
            if out.last().is_some_and(|&y| y == -x) {
                out.pop();
            } else {
                out.push(x);
            }
        }
        Word { letters: out }
    }

    pub fn generator(index: usize) -> Self {
        Word { letters: vec![index as Letter] }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Word { letters: self.letters.iter().rev().map(|&x| -x).collect() }
    }

    pub fn concat(&self, other: &Word) -> Self {
        let mut raw = Vec::with_capacity(self.len() + other.len());
        raw.extend_from_slice(&self.letters);
        raw.extend_from_slice(&other.letters);
        Word::reduce(&raw)
    }

    pub fn pow(&self, n: i64) -> Self {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut raw = Vec::new();
        for _ in 0..n.unsigned_abs() {
            raw.extend_from_slice(&base.letters);
        }
        Word::reduce(&raw)
    }

    pub fn conjugate_by(&self, u: &Word) -> Self {
        u.concat(self).concat(&u.inverse())
    }

    /// Largest generator index used, or 0 for the identity.
    pub fn max_index(&self) -> usize {
        self.letters.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// True if every letter index lies in `1..=rank`.
    pub fn fits_rank(&self, rank: usize) -> bool {
        self.max_index() <= rank
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(&f), Some(&l)) => f != -l,
            _ => true,
        }
    }

    /// Splits `self` as `conjugator * core * conjugator^-1` with `core`
    /// cyclically reduced. For the identity both parts are trivial.
    pub fn cyclic_split(&self) -> (Word, Word) {
        let n = self.letters.len();
        let mut i = 0;
        while i * 2 + 1 < n && self.letters[i] == -self.letters[n - 1 - i] {
            i += 1;
        }
        let conjugator = Word { letters: self.letters[..i].to_vec() };
        let core = Word { letters: self.letters[i..n - i].to_vec() };
        debug_assert!(core.is_cyclically_reduced());
        (core, conjugator)
    }

    /// Exponent vector of the image in Z^rank.
    pub fn abelianization(&self, rank: usize) -> Vec<i64> {
        let mut v = vec![0i64; rank];
        for &x in &self.letters {
            let idx = x.unsigned_abs() as usize - 1;
            v[idx] += x.signum() as i64;
        }
        v
    }

    pub fn parse(s: &str, rank: usize) -> Result<Word, Error> {
        parse_word(s, rank)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("1");
        }
        for &x in &self.letters {
            let idx = x.unsigned_abs() as usize;
            if idx > MAX_RANK {
                return Err(fmt::Error);
            }
            let c = (b'a' + (idx as u8 - 1)) as char;
            if x > 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{}", c.to_ascii_uppercase())?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

pub fn parse_word(s: &str, rank: usize) -> Result<Word, Error> {
    let s = s.trim();
    if s == "1" || s.is_empty() {
        return Ok(Word::identity());
    }
    let mut raw = Vec::with_capacity(s.len());
    for (pos, c) in s.chars().enumerate() {
        let x = match c {
            'a'..='z' => (c as u8 - b'a') as Letter + 1,
            'A'..='Z' => -((c as u8 - b'A') as Letter + 1),
            _ => {
                return Err(Error::Parse(format!(
                    "invalid character {c:?} at column {} in word {s:?}",
                    pos + 1
                )))
            }
        };
        if x.unsigned_abs() as usize > rank {
            return Err(Error::Parse(format!(
                "letter {c:?} at column {} exceeds rank {rank}",
                pos + 1
            )));
        }
        raw.push(x);
    }
    Ok(Word::reduce(&raw))
}

/// A conjugacy class, stored as a cyclically reduced representative together
/// with the lexicographically least rotation among the rotations of the word
/// and of its inverse. Equality and hashing use only the canonical rotation,
/// so a class and its inverse compare equal.
#[derive(Clone)]
pub struct ConjugacyClass {
    cyclic_word: Word,
    canonical: Vec<Letter>,
}

impl PartialEq for ConjugacyClass {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for ConjugacyClass {}

impl std::hash::Hash for ConjugacyClass {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl PartialOrd for ConjugacyClass {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ConjugacyClass {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // shortest first, then alphabetically with `a < A < b < B`
        let key = |c: &ConjugacyClass| -> Vec<(u32, bool)> {
            c.canonical.iter().map(|&x| (x.unsigned_abs(), x < 0)).collect()
        };
        (self.canonical.len(), key(self), &self.canonical).cmp(&(
            other.canonical.len(),
            key(other),
            &other.canonical,
        ))
    }
}

impl ConjugacyClass {
    /// Cyclically reduces `w` and forms its class. The trivial word yields
    /// the distinguished empty class.
    pub fn from_word(w: &Word) -> Self {
        let (core, _) = w.cyclic_split();
        let canonical = canonical_rotation(core.letters());
        ConjugacyClass { cyclic_word: core, canonical }
    }

    pub fn parse(s: &str, rank: usize) -> Result<Self, Error> {
        Ok(ConjugacyClass::from_word(&parse_word(s, rank)?))
    }

    pub fn cyclic_word(&self) -> &Word {
        &self.cyclic_word
    }

    pub fn canonical(&self) -> &[Letter] {
        &self.canonical
    }

    pub fn len(&self) -> usize {
        self.cyclic_word.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.cyclic_word.is_identity()
    }
}

impl fmt::Display for ConjugacyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.cyclic_word)
    }
}

impl fmt::Debug for ConjugacyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Class[{}]", self.cyclic_word)
    }
}

/// All distinct nontrivial conjugacy classes with cyclic length up to
/// `max_len`, in deterministic order. Every cyclically reduced word is
/// generated; one canonical representative per class is kept.
pub fn enumerate_conjugacy_classes(rank: usize, max_len: usize) -> Vec<ConjugacyClass> {
    let mut out = Vec::new();
    let alphabet: Vec<Letter> = (1..=rank as Letter).flat_map(|k| [k, -k]).collect();
    let mut stack: Vec<Letter> = Vec::new();
    fn rec(
        stack: &mut Vec<Letter>,
        target: usize,
        alphabet: &[Letter],
        out: &mut Vec<ConjugacyClass>,
    ) {
        if stack.len() == target {
            if stack.first().is_some_and(|&f| f == -*stack.last().unwrap()) && target > 1 {
                return;
            }
            let canon = canonical_rotation(stack);
            if canon == *stack {
                let word = Word::reduce(stack);
                debug_assert_eq!(word.len(), target);
                out.push(ConjugacyClass::from_word(&word));
            }
            return;
        }
        for &x in alphabet {
            if stack.last().is_some_and(|&p| p == -x) {
                continue;
            }
            stack.push(x);
            rec(stack, target, alphabet, out);
            stack.pop();
        }
    }
    for len in 1..=max_len {
        rec(&mut stack, len, &alphabet, &mut out);
    }
    out
}

/// Least rotation over both the word and its inverse.
fn canonical_rotation(letters: &[Letter]) -> Vec<Letter> {
    let fwd = least_rotation(letters);
    let inv: Vec<Letter> = letters.iter().rev().map(|&x| -x).collect();
    let bwd = least_rotation(&inv);
    fwd.min(bwd)
}

fn least_rotation(s: &[Letter]) -> Vec<Letter> {
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let at = |i: usize| s[i % n];
    let mut best = 0usize;
    for start in 1..n {
        for k in 0..n {
            match at(start + k).cmp(&at(best + k)) {
                std::cmp::Ordering::Less => {
                    best = start;
                    break;
                }
                std::cmp::Ordering::Greater => break,
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    (0..n).map(|k| at(best + k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        parse_word(s, 3).unwrap()
    }

    #[test]
    fn reduce_cancels() {
        assert_eq!(Word::reduce(&[1, 2, -2, 3]), w("ac"));
        assert_eq!(Word::reduce(&[1, -1]), Word::identity());
        assert_eq!(w("abBA"), Word::identity());
    }

    #[test]
    fn print_parse_round_trip() {
        for s in ["1", "a", "abc", "aBcA", "ccBA"] {
            assert_eq!(w(s).to_string(), s);
        }
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(parse_word("a b", 3).is_err());
        assert!(parse_word("d", 3).is_err());
        assert!(parse_word("a1", 3).is_err());
    }

    #[test]
    fn cyclic_split_examples() {
        let (core, conj) = w("abA").cyclic_split();
        assert_eq!(core, w("b"));
        assert_eq!(conj, w("a"));
        let (core, conj) = w("ab").cyclic_split();
        assert_eq!(core, w("ab"));
        assert!(conj.is_identity());
        let (core, conj) = Word::identity().cyclic_split();
        assert!(core.is_identity() && conj.is_identity());
    }

    #[test]
    fn class_equality_is_rotation_and_inversion_invariant() {
        let c1 = ConjugacyClass::from_word(&w("abc"));
        let c2 = ConjugacyClass::from_word(&w("bca"));
        let c3 = ConjugacyClass::from_word(&w("CBA"));
        assert_eq!(c1, c2);
        assert_eq!(c1, c3);
        assert_ne!(c1, ConjugacyClass::from_word(&w("acb")));
    }

    #[test]
    fn booth_least_rotation() {
        assert_eq!(least_rotation(&[2, 1, 3]), vec![1, 3, 2]);
        assert_eq!(least_rotation(&[1, 1, -2]), vec![-2, 1, 1]);
        // ties among rotations of periodic words
        assert_eq!(least_rotation(&[1, 2, 1, 2]), vec![1, 2, 1, 2]);
    }

    fn arb_raw() -> impl Strategy<Value = Vec<Letter>> {
        prop::collection::vec((1i32..=3, prop::bool::ANY).prop_map(|(k, s)| if s { k } else { -k }), 0..64)
    }

    proptest! {
        #[test]
        fn reduce_is_idempotent(raw in arb_raw()) {
            let once = Word::reduce(&raw);
            let twice = Word::reduce(once.letters());
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn w_times_w_inverse_is_trivial(raw in arb_raw()) {
            let u = Word::reduce(&raw);
            prop_assert!(u.concat(&u.inverse()).is_identity());
        }

        #[test]
        fn cyclic_split_reassembles(raw in arb_raw()) {
            let u = Word::reduce(&raw);
            let (core, conj) = u.cyclic_split();
            prop_assert!(core.len() <= u.len());
            let back = conj.concat(&core).concat(&conj.inverse());
            prop_assert_eq!(back, u);
        }

        #[test]
        fn conjugation_preserves_class(raw in arb_raw(), conj in arb_raw()) {
            let c = Word::reduce(&raw);
            let u = Word::reduce(&conj);
            let lhs = ConjugacyClass::from_word(&c.conjugate_by(&u));
            let rhs = ConjugacyClass::from_word(&c);
            prop_assert_eq!(lhs, rhs);
        }
    }
}
