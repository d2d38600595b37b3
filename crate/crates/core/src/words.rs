//! Finite words, lazily generated infinite words and occurrence counting.
//!
//! Positions are 1-indexed throughout: `w.symbol(1)` is the first symbol and
//! `w.slice(i, j)` is `w[i..j]`, empty when `j = i - 1`.
//!
//! Words are stored packed, `ceil(log2 b)` bits per symbol, so that large
//! prefixes and enumeration scratch space stay small.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Symbol = u8;

/// Alphabet `{0, .., b-1}` with `2 <= b <= 256`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Alphabet(u32);

impl Alphabet {
    pub const BINARY: Alphabet = Alphabet(2);

    pub fn new(size: u32) -> Result<Self> {
        if (2..=256).contains(&size) {
            Ok(Alphabet(size))
        } else {
            Err(Error::BadAlphabet(size))
        }
    }

    pub fn size(self) -> u32 {
        self.0
    }

    pub fn contains(self, s: Symbol) -> bool {
        u32::from(s) < self.0
    }

    pub fn check(self, s: u32) -> Result<Symbol> {
        if s < self.0 {
            Ok(s as Symbol)
        } else {
            Err(Error::SymbolOutOfRange { symbol: s, size: self.0 })
        }
    }

    fn bits(self) -> u32 {
        32 - (self.0 - 1).leading_zeros()
    }

    /// All words of length `len` in lexicographic order.
    pub fn words(self, len: usize) -> impl Iterator<Item = FiniteWord> {
        let b = u64::from(self.0);
        let total = b.checked_pow(len as u32).expect("too many words to list");
        (0..total).map(move |code| FiniteWord::from_code(self, code, len))
    }
}

impl TryFrom<u32> for Alphabet {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for u32 {
    fn from(a: Alphabet) -> u32 {
        a.0
    }
}

/// A finite word over an [`Alphabet`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FiniteWord {
    alphabet: Alphabet,
    len: usize,
    data: Vec<u64>,
}

impl FiniteWord {
    pub fn empty(alphabet: Alphabet) -> Self {
        FiniteWord { alphabet, len: 0, data: Vec::new() }
    }

    pub fn with_capacity(alphabet: Alphabet, cap: usize) -> Self {
        let per = Self::per_word(alphabet);
        FiniteWord { alphabet, len: 0, data: Vec::with_capacity(cap.div_ceil(per)) }
    }

    pub fn from_symbols(alphabet: Alphabet, symbols: &[Symbol]) -> Result<Self> {
        let mut w = Self::with_capacity(alphabet, symbols.len());
        for &s in symbols {
            w.push(alphabet.check(u32::from(s))?);
        }
        Ok(w)
    }

    /// Parses a digit string (`0-9a-z`), or comma separated integers.
    pub fn parse(alphabet: Alphabet, text: &str) -> Result<Self> {
        let mut w = Self::empty(alphabet);
        if text.contains(',') {
            for part in text.split(',') {
                let v: u32 = part
                    .trim()
                    .parse()
                    .map_err(|_| Error::BadStreamSpec(text.to_string()))?;
                w.push(alphabet.check(v)?);
            }
        } else {
            for c in text.chars() {
                let v = c.to_digit(36).ok_or_else(|| Error::BadStreamSpec(text.to_string()))?;
                w.push(alphabet.check(v)?);
            }
        }
        Ok(w)
    }

    /// The word of length `len` whose base-b value is `code`, most significant symbol first.
    pub fn from_code(alphabet: Alphabet, mut code: u64, len: usize) -> Self {
        let b = u64::from(alphabet.size());
        let mut syms = vec![0 as Symbol; len];
        for slot in syms.iter_mut().rev() {
            *slot = (code % b) as Symbol;
            code /= b;
        }
        Self::from_symbols(alphabet, &syms).expect("digits are in range")
    }

    /// Base-b value of the word, most significant symbol first.
    pub fn code(&self) -> u64 {
        let b = u64::from(self.alphabet.size());
        self.iter().fold(0u64, |acc, s| acc * b + u64::from(s))
    }

    fn per_word(alphabet: Alphabet) -> usize {
        (64 / alphabet.bits()) as usize
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, s: Symbol) {
        debug_assert!(self.alphabet.contains(s));
        let per = Self::per_word(self.alphabet);
        let bits = self.alphabet.bits();
        let (word, slot) = (self.len / per, self.len % per);
        if word == self.data.len() {
            self.data.push(0);
        }
        self.data[word] |= u64::from(s) << (slot as u32 * bits);
        self.len += 1;
    }

    /// 0-indexed access used by the hot loops.
    #[inline]
    pub fn at(&self, idx: usize) -> Symbol {
        let per = Self::per_word(self.alphabet);
        let bits = self.alphabet.bits();
        let mask = (1u64 << bits) - 1;
        ((self.data[idx / per] >> ((idx % per) as u32 * bits)) & mask) as Symbol
    }

    /// `w[i]`, 1-indexed.
    pub fn symbol(&self, i: usize) -> Option<Symbol> {
        (1..=self.len).contains(&i).then(|| self.at(i - 1))
    }

    /// `w[i..j]`, defined for `1 <= i <= j + 1 <= |w| + 1`.
    pub fn slice(&self, i: usize, j: usize) -> Result<FiniteWord> {
        if i == 0 || i > j + 1 || j > self.len {
            return Err(Error::BadRange { start: i, end: j, len: self.len });
        }
        let mut out = FiniteWord::with_capacity(self.alphabet, j + 1 - i);
        for idx in (i - 1)..j {
            out.push(self.at(idx));
        }
        Ok(out)
    }

    pub fn prefix(&self, n: usize) -> FiniteWord {
        self.slice(1, n.min(self.len)).expect("prefix range is valid")
    }

    pub fn iter(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.len).map(move |i| self.at(i))
    }

    pub fn to_vec(&self) -> Vec<Symbol> {
        self.iter().collect()
    }

    pub fn concat(&self, other: &FiniteWord) -> Result<FiniteWord> {
        same_alphabet(self, other)?;
        let mut out = self.clone();
        for s in other.iter() {
            out.push(s);
        }
        Ok(out)
    }

    pub fn is_prefix_of(&self, other: &FiniteWord) -> bool {
        self.alphabet == other.alphabet
            && self.len <= other.len
            && (0..self.len).all(|i| self.at(i) == other.at(i))
    }

    /// Re-reads the word over the alphabet `A^r` (lexicographic isomorphism);
    /// a trailing incomplete block is dropped.
    pub fn reblock(&self, r: usize) -> Result<FiniteWord> {
        let size = u64::from(self.alphabet.size())
            .checked_pow(r as u32)
            .filter(|&s| s <= 256)
            .ok_or_else(|| Error::InvalidParameters(format!("alphabet^{r} exceeds 256 symbols")))?;
        let big = Alphabet::new(size as u32)?;
        let mut out = FiniteWord::with_capacity(big, self.len / r);
        for block in 0..self.len / r {
            let b = u64::from(self.alphabet.size());
            let code = (0..r).fold(0u64, |acc, k| acc * b + u64::from(self.at(block * r + k)));
            out.push(code as Symbol);
        }
        Ok(out)
    }
}

impl fmt::Display for FiniteWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.alphabet.size() <= 36 {
            for s in self.iter() {
                let c = char::from_digit(u32::from(s), 36).expect("digit below 36");
                write!(f, "{c}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.iter().map(|s| s.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

impl fmt::Debug for FiniteWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteWord(b={}, \"{}\")", self.alphabet.size(), self)
    }
}

fn same_alphabet(w: &FiniteWord, u: &FiniteWord) -> Result<()> {
    if w.alphabet != u.alphabet {
        return Err(Error::AlphabetMismatch { left: w.alphabet.size(), right: u.alphabet.size() });
    }
    Ok(())
}

fn matches_at(w: &FiniteWord, u: &FiniteWord, start: usize) -> bool {
    (0..u.len()).all(|k| w.at(start + k) == u.at(k))
}

/// Number of (possibly overlapping) occurrences of `u` in `w`.
pub fn occ(w: &FiniteWord, u: &FiniteWord) -> Result<usize> {
    same_alphabet(w, u)?;
    if u.is_empty() {
        return Err(Error::EmptyPattern);
    }
    if u.len() > w.len() {
        return Ok(0);
    }
    Ok((0..=w.len() - u.len()).filter(|&i| matches_at(w, u, i)).count())
}

/// Number of occurrences of `u` in `w` at positions `i = 1 mod |u|`.
pub fn alocc(w: &FiniteWord, u: &FiniteWord) -> Result<usize> {
    same_alphabet(w, u)?;
    if u.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let r = u.len();
    Ok((0..w.len() / r).filter(|&blk| matches_at(w, u, blk * r)).count())
}

/// A lazily generated infinite (or, for `Explicit`, finite) word.
///
/// Spec strings: `champernowne:<base>`, `periodic:<digits>[:<base>]`,
/// `explicit:<digits>[:<base>]`, `prng:<base>:<seed>`. Without an explicit
/// base, digit strings are read over the smallest alphabet (at least binary)
/// that contains them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WordStream {
    Champernowne(Alphabet),
    Periodic(FiniteWord),
    Explicit(FiniteWord),
    Prng { alphabet: Alphabet, seed: u64 },
}

impl WordStream {
    pub fn alphabet(&self) -> Alphabet {
        match self {
            WordStream::Champernowne(a) => *a,
            WordStream::Periodic(w) | WordStream::Explicit(w) => w.alphabet(),
            WordStream::Prng { alphabet, .. } => *alphabet,
        }
    }

    /// Number of available symbols, `None` when infinite.
    pub fn available(&self) -> Option<usize> {
        match self {
            WordStream::Explicit(w) => Some(w.len()),
            _ => None,
        }
    }

    pub fn reader(&self) -> StreamReader {
        StreamReader::new(self.clone())
    }

    /// Symbol at position `i >= 1`, computed without generating the prefix
    /// (except for explicit words, which are stored).
    pub fn symbol_at(&self, i: usize) -> Result<Symbol> {
        assert!(i >= 1, "positions are 1-indexed");
        match self {
            WordStream::Champernowne(a) => Ok(champernowne_symbol(*a, (i - 1) as u64)),
            WordStream::Periodic(p) => Ok(p.at((i - 1) % p.len())),
            WordStream::Explicit(w) => w
                .symbol(i)
                .ok_or(Error::StreamExhausted { available: w.len(), requested: i }),
            WordStream::Prng { alphabet, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_word_pos((i - 1) as u128);
                Ok((rng.next_u32() % alphabet.size()) as Symbol)
            }
        }
    }

    /// The first `n` symbols.
    pub fn prefix(&self, n: usize) -> Result<FiniteWord> {
        if let Some(avail) = self.available() {
            if avail < n {
                return Err(Error::StreamExhausted { available: avail, requested: n });
            }
        }
        let mut reader = self.reader();
        let mut out = FiniteWord::with_capacity(self.alphabet(), n);
        for _ in 0..n {
            out.push(reader.next_symbol().expect("availability checked"));
        }
        Ok(out)
    }
}

fn champernowne_symbol(a: Alphabet, mut pos: u64) -> Symbol {
    let b = u64::from(a.size());
    // one-digit numerals 0..b-1
    if pos < b {
        return pos as Symbol;
    }
    pos -= b;
    let mut digits = 2u32;
    let mut first = b; // smallest numeral with `digits` digits
    loop {
        let count = first * (b - 1);
        let span = count * u64::from(digits);
        if pos < span {
            let number = first + pos / u64::from(digits);
            let k = (pos % u64::from(digits)) as u32;
            return ((number / b.pow(digits - 1 - k)) % b) as Symbol;
        }
        pos -= span;
        first *= b;
        digits += 1;
    }
}

impl FromStr for WordStream {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let bad = || Error::BadStreamSpec(spec.to_string());
        let parts: Vec<&str> = spec.split(':').collect();
        let base = |s: &str| -> Result<Alphabet> { Alphabet::new(s.parse().map_err(|_| bad())?) };
        let digits = |text: &str, b: Option<&str>| -> Result<FiniteWord> {
            let alphabet = match b {
                Some(b) => base(b)?,
                None => {
                    let max = if text.contains(',') {
                        text.split(',').filter_map(|p| p.trim().parse::<u32>().ok()).max()
                    } else {
                        text.chars().filter_map(|c| c.to_digit(36)).max()
                    };
                    Alphabet::new(max.unwrap_or(0).max(1) + 1)?
                }
            };
            FiniteWord::parse(alphabet, text)
        };
        match parts.as_slice() {
            ["champernowne", b] => Ok(WordStream::Champernowne(base(b)?)),
            ["periodic", text] | ["periodic", text, _] => {
                let w = digits(text, parts.get(2).copied())?;
                if w.is_empty() {
                    return Err(bad());
                }
                Ok(WordStream::Periodic(w))
            }
            ["explicit", text] | ["explicit", text, _] => {
                Ok(WordStream::Explicit(digits(text, parts.get(2).copied())?))
            }
            ["prng", b, seed] => Ok(WordStream::Prng {
                alphabet: base(b)?,
                seed: seed.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for WordStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WordStream::Champernowne(a) => write!(f, "champernowne:{}", a.size()),
            WordStream::Periodic(w) => write!(f, "periodic:{}:{}", w, w.alphabet().size()),
            WordStream::Explicit(w) => write!(f, "explicit:{}:{}", w, w.alphabet().size()),
            WordStream::Prng { alphabet, seed } => write!(f, "prng:{}:{}", alphabet.size(), seed),
        }
    }
}

/// Sequential cursor over a [`WordStream`] with one-symbol lookahead.
#[derive(Clone, Debug)]
pub struct StreamReader {
    stream: WordStream,
    position: usize,
    state: ReaderState,
}

#[derive(Clone, Debug)]
enum ReaderState {
    Stored,
    Champernowne { digits: Vec<Symbol>, next_number: u64 },
    Prng(Box<ChaCha8Rng>, Option<Symbol>),
}

impl StreamReader {
    pub fn new(stream: WordStream) -> Self {
        let state = match &stream {
            WordStream::Champernowne(_) => {
                ReaderState::Champernowne { digits: Vec::new(), next_number: 0 }
            }
            WordStream::Prng { seed, .. } => {
                ReaderState::Prng(Box::new(ChaCha8Rng::seed_from_u64(*seed)), None)
            }
            _ => ReaderState::Stored,
        };
        StreamReader { stream, position: 0, state }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.stream.alphabet()
    }

    /// Symbols consumed so far.
    pub fn position(&self) -> usize {
        self.position
    }

    /// Next symbol without consuming it; `None` once an explicit word is exhausted.
    pub fn peek(&mut self) -> Option<Symbol> {
        match (&self.stream, &mut self.state) {
            (WordStream::Explicit(w), _) => w.symbol(self.position + 1),
            (WordStream::Periodic(p), _) => Some(p.at(self.position % p.len())),
            (WordStream::Champernowne(a), ReaderState::Champernowne { digits, next_number }) => {
                if digits.is_empty() {
                    let b = u64::from(a.size());
                    let mut n = *next_number;
                    *next_number += 1;
                    digits.push((n % b) as Symbol);
                    n /= b;
                    while n > 0 {
                        digits.push((n % b) as Symbol);
                        n /= b;
                    }
                }
                digits.last().copied()
            }
            (WordStream::Prng { alphabet, .. }, ReaderState::Prng(rng, cached)) => {
                if cached.is_none() {
                    *cached = Some((rng.next_u32() % alphabet.size()) as Symbol);
                }
                *cached
            }
            _ => unreachable!("reader state matches its stream"),
        }
    }

    /// Consumes the symbol returned by the last `peek`.
    pub fn advance(&mut self) {
        match &mut self.state {
            ReaderState::Champernowne { digits, .. } => {
                digits.pop();
            }
            ReaderState::Prng(_, cached) => *cached = None,
            ReaderState::Stored => {}
        }
        self.position += 1;
    }

    pub fn next_symbol(&mut self) -> Option<Symbol> {
        let s = self.peek()?;
        self.advance();
        Some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(b: u32, s: &str) -> FiniteWord {
        FiniteWord::parse(Alphabet::new(b).unwrap(), s).unwrap()
    }

    #[test]
    fn occurrence_examples() {
        // a = 0 over a binary alphabet
        assert_eq!(occ(&w(2, "00000"), &w(2, "00")).unwrap(), 4);
        assert_eq!(alocc(&w(2, "00000"), &w(2, "00")).unwrap(), 2);
        assert_eq!(occ(&w(4, "012"), &w(4, "3")).unwrap(), 0);
        assert_eq!(occ(&w(2, "010101"), &w(2, "01")).unwrap(), 3);
        assert_eq!(alocc(&w(2, "010101"), &w(2, "01")).unwrap(), 3);
        assert_eq!(occ(&w(2, "01"), &w(2, "010")).unwrap(), 0);
    }

    #[test]
    fn occurrence_errors() {
        assert!(matches!(occ(&w(2, "01"), &w(2, "")), Err(Error::EmptyPattern)));
        assert!(matches!(alocc(&w(2, "01"), &w(2, "")), Err(Error::EmptyPattern)));
        assert!(matches!(
            occ(&w(2, "01"), &w(3, "0")),
            Err(Error::AlphabetMismatch { .. })
        ));
    }

    #[test]
    fn slicing_is_one_indexed() {
        let x = w(10, "0123456789");
        assert_eq!(x.symbol(1), Some(0));
        assert_eq!(x.symbol(10), Some(9));
        assert_eq!(x.symbol(0), None);
        assert_eq!(x.slice(3, 5).unwrap().to_string(), "234");
        assert!(x.slice(4, 3).unwrap().is_empty());
        assert!(x.slice(5, 3).is_err());
        assert!(x.slice(1, 11).is_err());
    }

    #[test]
    fn champernowne_prefixes() {
        let s: WordStream = "champernowne:10".parse().unwrap();
        assert_eq!(s.prefix(20).unwrap().to_string(), "01234567891011121314");
        let s: WordStream = "champernowne:2".parse().unwrap();
        assert_eq!(s.prefix(10).unwrap().to_string(), "0110111001");
        let p: WordStream = "periodic:01".parse().unwrap();
        assert_eq!(p.prefix(5).unwrap().to_string(), "01010");
    }

    #[test]
    fn explicit_exhaustion() {
        let s: WordStream = "explicit:0110".parse().unwrap();
        assert_eq!(s.prefix(4).unwrap().to_string(), "0110");
        assert!(matches!(s.prefix(5), Err(Error::StreamExhausted { available: 4, requested: 5 })));
        let mut r = s.reader();
        for _ in 0..4 {
            r.next_symbol().unwrap();
        }
        assert_eq!(r.peek(), None);
    }

    #[test]
    fn stream_spec_round_trip() {
        for spec in ["champernowne:3", "periodic:0120:3", "explicit:0110:2", "prng:5:42"] {
            let s: WordStream = spec.parse().unwrap();
            assert_eq!(s.to_string(), spec);
        }
        assert!("nonsense:2".parse::<WordStream>().is_err());
        assert!("prng:1:4".parse::<WordStream>().is_err());
    }

    #[test]
    fn random_access_matches_sequential() {
        for spec in ["champernowne:2", "champernowne:3", "champernowne:10", "prng:2:7", "prng:7:1"] {
            let s: WordStream = spec.parse().unwrap();
            let p = s.prefix(3000).unwrap();
            for i in [1, 2, 3, 10, 11, 99, 100, 101, 1000, 2999, 3000] {
                assert_eq!(s.symbol_at(i).unwrap(), p.symbol(i).unwrap(), "{spec} at {i}");
            }
        }
    }

    fn brute_occ(w: &[u8], u: &[u8]) -> usize {
        if u.len() > w.len() {
            return 0;
        }
        w.windows(u.len()).filter(|win| *win == u).count()
    }

    fn word_strategy(b: u32, max: usize) -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0..b as u8, 0..max)
    }

    proptest! {
        #[test]
        fn occ_bounds(ws in word_strategy(2, 40), us in word_strategy(2, 5)) {
            prop_assume!(!us.is_empty() && us.len() <= ws.len());
            let a = Alphabet::BINARY;
            let (x, u) = (FiniteWord::from_symbols(a, &ws).unwrap(), FiniteWord::from_symbols(a, &us).unwrap());
            let o = occ(&x, &u).unwrap();
            let al = alocc(&x, &u).unwrap();
            prop_assert_eq!(o, brute_occ(&ws, &us));
            prop_assert!(al <= o);
            prop_assert!(o <= ws.len() - us.len() + 1);
            if us.len() == 1 {
                prop_assert_eq!(o, al);
            }
        }

        #[test]
        fn aligned_counts_partition(ws in word_strategy(3, 60), l in 1usize..4) {
            let a = Alphabet::new(3).unwrap();
            let x = FiniteWord::from_symbols(a, &ws).unwrap();
            let total: usize = a.words(l).map(|u| alocc(&x, &u).unwrap()).sum();
            prop_assert_eq!(total, ws.len() / l);
        }

        #[test]
        fn aligned_counts_are_block_counts(ws in word_strategy(2, 60), r in 1usize..5) {
            let a = Alphabet::BINARY;
            let cut = ws.len() - ws.len() % r;
            let x = FiniteWord::from_symbols(a, &ws[..cut]).unwrap();
            let blocks = x.reblock(r).unwrap();
            for u in a.words(r) {
                let sym = FiniteWord::from_symbols(blocks.alphabet(), &[u.code() as u8]).unwrap();
                prop_assert_eq!(alocc(&x, &u).unwrap(), occ(&blocks, &sym).unwrap());
            }
        }

        #[test]
        fn packing_round_trip(b in 2u32..=256, raw in prop::collection::vec(any::<u8>(), 0..200)) {
            let a = Alphabet::new(b).unwrap();
            let syms: Vec<u8> = raw.iter().map(|&s| (u32::from(s) % b) as u8).collect();
            prop_assert_eq!(FiniteWord::from_symbols(a, &syms).unwrap().to_vec(), syms);
        }
    }
}
