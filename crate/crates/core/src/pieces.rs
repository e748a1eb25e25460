//! Pieces, concatenations and the finite decomposition calculus.
//!
//! A piece is a function on `[0, duration)`. A [`PieceSequence`] glues pieces
//! from a finite [`Alphabet`] end to end. Pieces are interned: two pieces get
//! the same symbol exactly when their durations agree and their profiles agree
//! on a fixed 256-point grid to within `1e-12`. Symbol equality is therefore
//! function equality for every profile this crate constructs.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const INTERN_GRID: usize = 256;
const INTERN_TOL: f64 = 1e-12;
/// Grid point used as the sort key when looking up interned pieces.
const SIGNATURE_NODE: usize = 97;
/// Sample count per sub-interval when comparing two different pieces.
const COMPARE_SAMPLES: usize = 16;

/// Shape of a piece on its interval, in local coordinate `t ∈ [0, duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant { value: f64 },
    /// Straight line from `start` at `t = 0` to `end` at `t = duration`.
    Linear { start: f64, end: f64 },
    /// `mid + amp·(w(t/duration) − 1/2)` with `w(s) = (1 − cos 2πs)/2`.
    RaisedCosine { mid: f64, amp: f64 },
    /// `inner(duration − t)`.
    Reflected { inner: Box<Profile> },
}

impl Profile {
    #[inline]
    pub fn eval(&self, t: f64, duration: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Linear { start, end } => start + (end - start) * t / duration,
            Profile::RaisedCosine { mid, amp } => {
                let w = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * t / duration).cos());
                mid + amp * (w - 0.5)
            }
            Profile::Reflected { inner } => inner.eval(duration - t, duration),
        }
    }

    /// The profile of `t ↦ self(duration − t)`, simplified where the shape
    /// allows it.
    pub fn reflect(&self) -> Profile {
        match self {
            Profile::Constant { .. } | Profile::RaisedCosine { .. } => self.clone(),
            Profile::Linear { start, end } => Profile::Linear {
                start: *end,
                end: *start,
            },
            Profile::Reflected { inner } => (**inner).clone(),
        }
    }

    pub fn scaled(&self, lambda: f64) -> Profile {
        match self {
            Profile::Constant { value } => Profile::Constant { value: lambda * value },
            Profile::Linear { start, end } => Profile::Linear {
                start: lambda * start,
                end: lambda * end,
            },
            Profile::RaisedCosine { mid, amp } => Profile::RaisedCosine {
                mid: lambda * mid,
                amp: lambda * amp,
            },
            Profile::Reflected { inner } => Profile::Reflected {
                inner: Box::new(inner.scaled(lambda)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub id: usize,
    pub duration: f64,
    pub profile: Profile,
}

impl Piece {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.profile.eval(t, self.duration)
    }

    fn signature(&self) -> f64 {
        self.eval(SIGNATURE_NODE as f64 / INTERN_GRID as f64 * self.duration)
    }

    fn same_function(&self, duration: f64, profile: &Profile) -> bool {
        if (self.duration - duration).abs() > INTERN_TOL * duration.max(1.0) {
            return false;
        }
        (0..INTERN_GRID).all(|i| {
            let t = i as f64 / INTERN_GRID as f64 * duration;
            (self.eval(t) - profile.eval(t, duration)).abs() <= INTERN_TOL
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// A finite set of interned pieces; ids are indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Piece>", into = "Vec<Piece>")]
pub struct Alphabet {
    pieces: Vec<Piece>,
    index: BTreeMap<Key, Vec<usize>>,
}

impl From<Vec<Piece>> for Alphabet {
    fn from(pieces: Vec<Piece>) -> Self {
        let mut a = Alphabet::default();
        for p in pieces {
            a.pieces.push(Piece {
                id: a.pieces.len(),
                duration: p.duration,
                profile: p.profile,
            });
            let last = a.pieces.len() - 1;
            let sig = a.pieces[last].signature();
            a.index.entry(Key(sig)).or_default().push(last);
        }
        a
    }
}

impl From<Alphabet> for Vec<Piece> {
    fn from(a: Alphabet) -> Self {
        a.pieces
    }
}

impl Alphabet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn get(&self, id: usize) -> Option<&Piece> {
        self.pieces.get(id)
    }

    /// Return the symbol of an equal existing piece, or add a new one.
    pub fn intern(&mut self, duration: f64, profile: Profile) -> Result<usize> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(invalid(format!("piece duration must be positive, got {duration}")));
        }
        let probe = Piece {
            id: usize::MAX,
            duration,
            profile,
        };
        let sig = probe.signature();
        if !sig.is_finite() {
            return Err(invalid("piece profile is not finite"));
        }
        let lo = Key(sig - INTERN_TOL);
        let hi = Key(sig + INTERN_TOL);
        for ids in self.index.range(lo..=hi).map(|(_, v)| v) {
            for &id in ids {
                if self.pieces[id].same_function(duration, &probe.profile) {
                    return Ok(id);
                }
            }
        }
        let id = self.pieces.len();
        self.pieces.push(Piece { id, ..probe });
        self.index.entry(Key(sig)).or_default().push(id);
        Ok(id)
    }
}

/// A concatenation `W_1 | W_2 | …` over a finite alphabet, translated so that
/// it starts at `start_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceSequence {
    alphabet: Alphabet,
    symbols: Vec<usize>,
    start_offset: f64,
}

impl PieceSequence {
    pub fn new(alphabet: Alphabet, symbols: Vec<usize>, start_offset: f64) -> Result<Self> {
        if let Some(&bad) = symbols.iter().find(|&&s| s >= alphabet.len()) {
            return Err(invalid(format!(
                "symbol {bad} not in alphabet of size {}",
                alphabet.len()
            )));
        }
        if !start_offset.is_finite() {
            return Err(invalid("start offset must be finite"));
        }
        Ok(PieceSequence {
            alphabet,
            symbols,
            start_offset,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn start_offset(&self) -> f64 {
        self.start_offset
    }

    fn duration(&self, pos: usize) -> f64 {
        self.alphabet.pieces[self.symbols[pos]].duration
    }

    /// Cumulative start offsets; entry `i` is where piece `i` begins and the
    /// final entry is the total length.
    pub fn offsets(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.symbols.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for i in 0..self.symbols.len() {
            acc += self.duration(i);
            out.push(acc);
        }
        out
    }

    pub fn total_length(&self) -> f64 {
        *self.offsets().last().unwrap()
    }

    pub fn concatenate(&self) -> Concatenation<'_> {
        Concatenation {
            seq: self,
            offsets: self.offsets(),
        }
    }

    /// Audit the finite decomposition property of the represented sequence.
    pub fn check_fdp(&self) -> FdpReport {
        let mut usage = vec![0usize; self.alphabet.len()];
        let mut invalid_symbols = 0;
        for &s in &self.symbols {
            match usage.get_mut(s) {
                Some(c) => *c += 1,
                None => invalid_symbols += 1,
            }
        }
        let total = self.total_length();
        let time_fraction = usage
            .iter()
            .enumerate()
            .map(|(id, &c)| {
                if total > 0.0 {
                    c as f64 * self.alphabet.pieces[id].duration / total
                } else {
                    0.0
                }
            })
            .collect();
        FdpReport {
            pass: invalid_symbols == 0 && !self.alphabet.is_empty(),
            alphabet_size: self.alphabet.len(),
            used_symbols: usage.iter().filter(|&&c| c > 0).count(),
            usage_counts: usage,
            time_fraction,
        }
    }

    /// Look for two positions in the first `prefix_len` symbols that share a
    /// backward context of length at least `ell`, whose forward
    /// concatenations agree as functions on `[0, ell)`, but whose next pieces
    /// differ.
    ///
    /// The witness returned is the lexicographically smallest position pair.
    pub fn check_simple_fdp(&self, ell: f64, prefix_len: usize) -> Result<SimpleFdpVerdict> {
        if !(ell > 0.0) || !ell.is_finite() {
            return Err(invalid(format!("window length must be positive, got {ell}")));
        }
        if prefix_len > self.symbols.len() {
            return Err(invalid(format!(
                "prefix {prefix_len} longer than sequence of {} symbols",
                self.symbols.len()
            )));
        }
        let syms = &self.symbols[..prefix_len];
        let offsets = self.offsets();
        let slack = 1e-12 * ell.max(1.0);

        // Group admissible positions by the minimal backward context.
        let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        let mut start = 0usize;
        for pos in 0..prefix_len {
            if offsets[prefix_len] - offsets[pos] < ell - slack {
                break;
            }
            if offsets[pos] < ell - slack {
                continue;
            }
            // shrink the window [start, pos) while it still covers ell
            while offsets[pos] - offsets[start + 1] >= ell - slack {
                start += 1;
            }
            groups.entry(syms[start..pos].to_vec()).or_default().push(pos);
        }

        let mut compatible: HashMap<(usize, usize), bool> = HashMap::new();
        let mut best: Option<(usize, usize)> = None;
        let mut contexts = 0usize;
        let mut positions = 0usize;
        for members in groups.values() {
            contexts += 1;
            positions += members.len();
            let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &p in members {
                buckets.entry(syms[p]).or_default().push(p);
            }
            if buckets.len() < 2 {
                continue;
            }
            let keys: Vec<usize> = buckets.keys().copied().collect();
            for (ai, &a) in keys.iter().enumerate() {
                for &b in &keys[ai + 1..] {
                    let ok = *compatible
                        .entry((a, b))
                        .or_insert_with(|| self.pieces_agree_initially(a, b, ell));
                    if !ok {
                        continue;
                    }
                    for &i in &buckets[&a] {
                        for &j in &buckets[&b] {
                            let pair = (i.min(j), i.max(j));
                            if best.is_some_and(|w| w <= pair) {
                                continue;
                            }
                            if self.forward_agree(i, j, ell, prefix_len, &offsets) {
                                best = Some(pair);
                            }
                        }
                    }
                }
            }
        }
        Ok(match best {
            None => SimpleFdpVerdict::HoldsOnPrefix {
                contexts,
                positions,
            },
            Some((first, second)) => {
                let mut s = 0;
                while offsets[first] - offsets[s + 1] >= ell - slack {
                    s += 1;
                }
                SimpleFdpVerdict::Violated(FdpWitness {
                    first,
                    second,
                    context: syms[s..first].to_vec(),
                    first_next: syms[first],
                    second_next: syms[second],
                })
            }
        })
    }

    fn pieces_agree_initially(&self, a: usize, b: usize, ell: f64) -> bool {
        let pa = &self.alphabet.pieces[a];
        let pb = &self.alphabet.pieces[b];
        let len = ell.min(pa.duration).min(pb.duration);
        segments_agree(pa, 0.0, pb, 0.0, len)
    }

    fn forward_agree(&self, i: usize, j: usize, ell: f64, end: usize, offsets: &[f64]) -> bool {
        if offsets[end] - offsets[i] < ell || offsets[end] - offsets[j] < ell {
            return false;
        }
        let (mut pi, mut pj) = (i, j);
        let (mut oi, mut oj) = (0.0, 0.0);
        let mut covered = 0.0;
        let eps = 1e-12 * ell.max(1.0);
        while covered < ell - eps {
            let a = &self.alphabet.pieces[self.symbols[pi]];
            let b = &self.alphabet.pieces[self.symbols[pj]];
            let seg = (a.duration - oi).min(b.duration - oj).min(ell - covered);
            if !(a.id == b.id && (oi - oj).abs() <= eps) && !segments_agree(a, oi, b, oj, seg) {
                return false;
            }
            covered += seg;
            oi += seg;
            oj += seg;
            if oi >= a.duration - eps {
                pi += 1;
                oi = 0.0;
            }
            if oj >= b.duration - eps {
                pj += 1;
                oj = 0.0;
            }
            if (pi >= end || pj >= end) && covered < ell - eps {
                return false;
            }
        }
        true
    }

    /// Test whether the symbol sequence (durations included, via interning)
    /// becomes periodic with some period `q ≤ max_period` starting no later
    /// than half way through.
    pub fn falsify_eventual_periodicity(&self, max_period: usize) -> Result<PeriodicityVerdict> {
        let n = self.symbols.len();
        if max_period == 0 {
            return Err(invalid("maximal period must be positive"));
        }
        if n < 3 * max_period {
            return Err(invalid(format!(
                "prefix of {n} symbols is shorter than 3 × max period {max_period}"
            )));
        }
        let s = &self.symbols;
        let mut breaks = Vec::with_capacity(max_period);
        for q in 1..=max_period {
            let last_break = (0..n - q).rev().find(|&i| s[i] != s[i + q]);
            let start = last_break.map_or(0, |i| i + 1);
            if start <= n / 2 {
                return Ok(PeriodicityVerdict::Consistent { period: q, start });
            }
            breaks.push(PeriodBreak {
                period: q,
                position: last_break.unwrap(),
            });
        }
        Ok(PeriodicityVerdict::Falsified { breaks })
    }

    /// The sequence read backwards with every profile reflected; the result
    /// evaluates to `t ↦ self(total − t)`.
    pub fn reverse(&self) -> PieceSequence {
        let mut alphabet = Alphabet::new();
        let map: Vec<usize> = self
            .alphabet
            .pieces
            .iter()
            .map(|p| {
                alphabet
                    .intern(p.duration, p.profile.reflect())
                    .expect("reflected piece of a valid piece is valid")
            })
            .collect();
        PieceSequence {
            alphabet,
            symbols: self.symbols.iter().rev().map(|&s| map[s]).collect(),
            start_offset: -(self.start_offset + self.total_length()),
        }
    }

    /// Write the sequence as JSON lines: one header record carrying the
    /// alphabet, then one record per symbol.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = JsonlHeader {
            alphabet: self.alphabet.pieces.clone(),
            start_offset: self.start_offset,
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        let offsets = self.offsets();
        for (i, &sym) in self.symbols.iter().enumerate() {
            let rec = JsonlSymbol {
                sym,
                dur: self.duration(i),
                enter_x: self.start_offset + offsets[i],
            };
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<PieceSequence> {
        let mut lines = input.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| invalid("empty piece sequence file"))?
            .map_err(|e| invalid(e.to_string()))?;
        let header: JsonlHeader =
            serde_json::from_str(&header_line).map_err(|e| invalid(format!("bad header: {e}")))?;
        let mut alphabet = Alphabet::new();
        for (expected, p) in header.alphabet.into_iter().enumerate() {
            if p.id != expected {
                return Err(invalid(format!("alphabet ids must be 0..n, found {} at {expected}", p.id)));
            }
            let id = alphabet.intern(p.duration, p.profile)?;
            if id != expected {
                return Err(invalid(format!("alphabet entries {id} and {expected} are equal pieces")));
            }
        }
        let mut symbols = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| invalid(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: JsonlSymbol =
                serde_json::from_str(&line).map_err(|e| invalid(format!("line {}: {e}", n + 2)))?;
            let piece = alphabet
                .get(rec.sym)
                .ok_or_else(|| invalid(format!("line {}: unknown symbol {}", n + 2, rec.sym)))?;
            if (piece.duration - rec.dur).abs() > 1e-9 * piece.duration.max(1.0) {
                return Err(invalid(format!("line {}: duration disagrees with alphabet", n + 2)));
            }
            symbols.push(rec.sym);
        }
        PieceSequence::new(alphabet, symbols, header.start_offset)
    }
}

fn segments_agree(a: &Piece, oa: f64, b: &Piece, ob: f64, len: f64) -> bool {
    (0..=COMPARE_SAMPLES).all(|k| {
        // left endpoint plus interior points; the right end belongs to the
        // next segment
        let t = if k == 0 {
            0.0
        } else {
            (k as f64 - 0.5) / COMPARE_SAMPLES as f64 * len
        };
        (a.eval(oa + t) - b.eval(ob + t)).abs() <= INTERN_TOL
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JsonlHeader {
    alphabet: Vec<Piece>,
    start_offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JsonlSymbol {
    sym: usize,
    dur: f64,
    enter_x: f64,
}

/// Evaluator for a concatenation on `[0, total)`.
pub struct Concatenation<'a> {
    seq: &'a PieceSequence,
    offsets: Vec<f64>,
}

impl Concatenation<'_> {
    pub fn total_length(&self) -> f64 {
        *self.offsets.last().unwrap()
    }

    /// Index of the piece covering local position `x`.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let total = self.total_length();
        if !(x >= 0.0 && x < total) {
            return Err(Error::OutOfRange { x, total });
        }
        let idx = self.offsets.partition_point(|&o| o <= x) - 1;
        Ok((idx, x - self.offsets[idx]))
    }

    /// Value at local position `x ∈ [0, total)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (idx, t) = self.locate(x)?;
        Ok(self.seq.alphabet.pieces[self.seq.symbols[idx]].eval(t))
    }

    /// Value at absolute position `x` (shifted by the start offset).
    pub fn eval_absolute(&self, x: f64) -> Result<f64> {
        self.eval(x - self.seq.start_offset)
    }

    /// Distance from local position `x` to the nearest piece boundary.
    pub fn boundary_distance(&self, x: f64) -> f64 {
        let idx = self.offsets.partition_point(|&o| o <= x);
        let right = self.offsets.get(idx).map_or(f64::INFINITY, |o| o - x);
        let left = if idx > 0 { x - self.offsets[idx - 1] } else { f64::INFINITY };
        left.min(right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdpReport {
    pub pass: bool,
    pub alphabet_size: usize,
    pub used_symbols: usize,
    pub usage_counts: Vec<usize>,
    /// Fraction of the total length spent in each symbol.
    pub time_fraction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdpWitness {
    pub first: usize,
    pub second: usize,
    pub context: Vec<usize>,
    pub first_next: usize,
    pub second_next: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum SimpleFdpVerdict {
    HoldsOnPrefix { contexts: usize, positions: usize },
    Violated(FdpWitness),
}

impl SimpleFdpVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, SimpleFdpVerdict::HoldsOnPrefix { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodBreak {
    pub period: usize,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum PeriodicityVerdict {
    /// Every candidate period breaks in the second half of the prefix.
    Falsified { breaks: Vec<PeriodBreak> },
    /// The tail from `start` repeats with `period` (not a proof).
    Consistent { period: usize, start: usize },
}

impl PeriodicityVerdict {
    pub fn is_falsified(&self) -> bool {
        matches!(self, PeriodicityVerdict::Falsified { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_alphabet(pieces: &[(f64, f64)]) -> Alphabet {
        let mut a = Alphabet::new();
        for &(dur, v) in pieces {
            a.intern(dur, Profile::Constant { value: v }).unwrap();
        }
        a
    }

    fn word(alphabet: Alphabet, text: &str) -> PieceSequence {
        let syms = text.bytes().map(|b| (b - b'A') as usize).collect();
        PieceSequence::new(alphabet, syms, 0.0).unwrap()
    }

    fn fibonacci(n: usize) -> String {
        let (mut a, mut b) = (String::from("A"), String::from("AB"));
        while b.len() < n {
            let next = format!("{b}{a}");
            a = b;
            b = next;
        }
        b[..n].to_string()
    }

    #[test]
    fn interning_merges_equal_pieces() {
        let mut a = Alphabet::new();
        let x = a.intern(1.0, Profile::RaisedCosine { mid: 0.5, amp: 0.1 }).unwrap();
        let y = a.intern(1.0, Profile::RaisedCosine { mid: 0.5 + 1e-14, amp: 0.1 }).unwrap();
        let z = a.intern(1.0, Profile::RaisedCosine { mid: 0.5 + 1e-6, amp: 0.1 }).unwrap();
        let w = a.intern(2.0, Profile::RaisedCosine { mid: 0.5, amp: 0.1 }).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, z);
        assert_ne!(x, w);
        assert_eq!(a.len(), 3);
        assert!(a.intern(0.0, Profile::Constant { value: 0.0 }).is_err());
    }

    #[test]
    fn concatenation_examples() {
        let mut a = Alphabet::new();
        a.intern(1.0, Profile::Linear { start: 0.0, end: 1.0 }).unwrap();
        let single = PieceSequence::new(a.clone(), vec![0], 0.0).unwrap();
        assert_eq!(single.concatenate().eval(0.25).unwrap(), 0.25);

        a.intern(2.0, Profile::Linear { start: 10.0, end: 12.0 }).unwrap();
        let two = PieceSequence::new(a, vec![0, 1], 0.0).unwrap();
        let c = two.concatenate();
        assert_eq!(c.locate(1.5).unwrap(), (1, 0.5));
        assert_eq!(c.eval(1.5).unwrap(), 10.5);
        assert_eq!(two.total_length(), 3.0);
        assert!(c.eval(3.0).is_err());
        assert!(c.eval(-0.1).is_err());
    }

    #[test]
    fn invalid_symbols_rejected() {
        let a = constant_alphabet(&[(1.0, 0.0)]);
        assert!(PieceSequence::new(a, vec![0, 1], 0.0).is_err());
    }

    #[test]
    fn fdp_report_counts() {
        let s = word(constant_alphabet(&[(1.0, 0.0), (2.0, 1.0)]), "ABAAB");
        let r = s.check_fdp();
        assert!(r.pass);
        assert_eq!(r.alphabet_size, 2);
        assert_eq!(r.usage_counts, vec![3, 2]);
        assert!((r.time_fraction.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_word_is_simple() {
        let s = word(constant_alphabet(&[(1.0, 0.0), (1.0, 1.0)]), &"AB".repeat(200));
        let v = s.check_simple_fdp(2.0, s.len()).unwrap();
        assert!(v.holds(), "{v:?}");
    }

    #[test]
    fn constructed_counterexample_is_found() {
        // B (length 2, value 0) equals A|A (A: length 1, value 0) as a
        // function, so the context "AB" of length 3 is followed once by A and
        // once by B with identical forward windows.
        let s = word(constant_alphabet(&[(1.0, 0.0), (2.0, 0.0)]), "ABAABBA");
        match s.check_simple_fdp(3.0, s.len()).unwrap() {
            SimpleFdpVerdict::Violated(w) => {
                assert_eq!((w.first, w.second), (2, 5));
                assert_eq!(w.context, vec![0, 1]);
                assert_eq!((w.first_next, w.second_next), (0, 1));
            }
            other => panic!("expected violation, got {other:?}"),
        }
        // with window 1 the earliest ambiguous pair is (1, 3) after context "A"
        match s.check_simple_fdp(1.0, s.len()).unwrap() {
            SimpleFdpVerdict::Violated(w) => assert_eq!((w.first, w.second, w.context), (1, 3, vec![0])),
            other => panic!("expected violation, got {other:?}"),
        }
        // distinct values make the pieces distinguishable again
        let s = word(constant_alphabet(&[(1.0, 0.0), (2.0, 1.0)]), "ABAABBA");
        assert!(s.check_simple_fdp(3.0, s.len()).unwrap().holds());
        assert!(s.check_simple_fdp(1.0, s.len()).unwrap().holds());
    }

    #[test]
    fn simple_fdp_violation_persists_in_longer_prefixes() {
        let s = word(constant_alphabet(&[(1.0, 0.0), (2.0, 0.0)]), "ABAABBABAB");
        let first_bad = (0..=s.len())
            .find(|&n| !s.check_simple_fdp(1.0, n).unwrap().holds())
            .unwrap();
        for n in first_bad..=s.len() {
            assert!(!s.check_simple_fdp(1.0, n).unwrap().holds());
        }
        assert!(s.check_simple_fdp(1.0, s.len() + 1).is_err());
    }

    #[test]
    fn fibonacci_word_is_simple_and_aperiodic() {
        let s = word(constant_alphabet(&[(1.0, 0.0), (1.0, 1.0)]), &fibonacci(500));
        assert!(s.falsify_eventual_periodicity(20).unwrap().is_falsified());
        assert!(s.check_simple_fdp(3.0, 500).unwrap().holds());
    }

    #[test]
    fn periodicity_examples() {
        let ab = constant_alphabet(&[(1.0, 0.0), (1.0, 1.0)]);
        let s = word(ab.clone(), &"AB".repeat(50));
        assert_eq!(
            s.falsify_eventual_periodicity(20).unwrap(),
            PeriodicityVerdict::Consistent { period: 2, start: 0 }
        );
        // AAB(AB)^n is A(AB)^(n+1): the tail is already periodic from index 1.
        let s = word(ab.clone(), &format!("AAB{}", "AB".repeat(50)));
        assert_eq!(
            s.falsify_eventual_periodicity(20).unwrap(),
            PeriodicityVerdict::Consistent { period: 2, start: 1 }
        );
        let s = word(ab.clone(), &format!("BBB{}", "AB".repeat(50)));
        assert_eq!(
            s.falsify_eventual_periodicity(20).unwrap(),
            PeriodicityVerdict::Consistent { period: 2, start: 2 }
        );
        let short = word(ab, "ABAB");
        assert!(short.falsify_eventual_periodicity(2).is_err());
    }

    #[test]
    fn consistent_period_reproduces_tail() {
        let ab = constant_alphabet(&[(1.0, 0.0), (1.0, 1.0), (0.5, 2.0)]);
        let s = word(ab, &format!("CABBA{}", "ABC".repeat(40)));
        if let PeriodicityVerdict::Consistent { period, start } = s.falsify_eventual_periodicity(10).unwrap() {
            let syms = s.symbols();
            let block = &syms[start..start + period];
            let rebuilt: Vec<usize> = (start..syms.len()).map(|i| block[(i - start) % period]).collect();
            assert_eq!(&syms[start..], &rebuilt[..]);
        } else {
            panic!("expected a period");
        }
    }

    #[test]
    fn reverse_reflects_profiles() {
        let mut a = Alphabet::new();
        a.intern(1.0, Profile::Linear { start: 0.0, end: 1.0 }).unwrap();
        a.intern(0.5, Profile::RaisedCosine { mid: 2.0, amp: 0.3 }).unwrap();
        a.intern(2.0, Profile::Reflected {
            inner: Box::new(Profile::Linear { start: 5.0, end: 3.0 }),
        })
        .unwrap();
        let s = PieceSequence::new(a, vec![0, 1, 2, 1, 0, 0], 1.25).unwrap();
        let r = s.reverse();
        let total = s.total_length();
        assert_eq!(r.total_length(), total);
        let (cs, cr) = (s.concatenate(), r.concatenate());
        for i in 1..200 {
            let x = i as f64 * total / 200.0;
            if cs.boundary_distance(total - x) < 1e-9 {
                continue;
            }
            assert!((cr.eval(x).unwrap() - cs.eval(total - x).unwrap()).abs() < 1e-12);
        }
        let rr = r.reverse();
        assert_eq!(rr.start_offset(), s.start_offset());
        let crr = rr.concatenate();
        for i in 0..200 {
            let x = i as f64 * total / 200.0;
            assert!((crr.eval(x).unwrap() - cs.eval(x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_single_piece_reverses_to_itself() {
        let mut a = Alphabet::new();
        a.intern(1.0, Profile::RaisedCosine { mid: 0.0, amp: 1.0 }).unwrap();
        let s = PieceSequence::new(a, vec![0], 0.0).unwrap();
        let r = s.reverse();
        for i in 0..50 {
            let x = i as f64 / 50.0;
            assert!((r.concatenate().eval(x).unwrap() - s.concatenate().eval(x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let s = word(constant_alphabet(&[(1.0, 0.0), (2.0, 1.0)]), "ABBA");
        let mut buf = Vec::new();
        s.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(2).unwrap().contains(r#""enter_x":1.0"#));
        let back = PieceSequence::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, s);
        let bad = text.replace(r#"{"sym":1,"dur":2.0"#, r#"{"sym":1,"dur":3.0"#);
        assert!(PieceSequence::read_jsonl(bad.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn length_is_additive(durs in proptest::collection::vec(0.1f64..3.0, 1..6),
                              picks in proptest::collection::vec(0usize..100, 1..40)) {
            let mut a = Alphabet::new();
            for (i, d) in durs.iter().enumerate() {
                a.intern(*d, Profile::Constant { value: i as f64 }).unwrap();
            }
            let n = a.len();
            let syms: Vec<usize> = picks.iter().map(|p| p % n).collect();
            let expected: f64 = syms.iter().map(|&s| a.get(s).unwrap().duration).sum();
            let s = PieceSequence::new(a, syms, 0.0).unwrap();
            prop_assert_eq!(s.total_length(), expected);
        }
    }
}
