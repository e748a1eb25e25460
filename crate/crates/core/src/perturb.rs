//! Box partitions of the torus, the discontinuous approximants `f_{ε,n}`, and
//! the symbolic itinerary of the flow through the boxes.
//!
//! Boxes live in sheared coordinates. Let `p` be the axis with the largest
//! `|α_p|`. A point is written `Φ(t) = Σ_{j≠p} t_j e_j + t_d α` with
//! `t_j ∈ [0,1)` and `t_d ∈ [0, 1/|α_p|)`; `Φ` is a bijection onto `T^d`.
//! Along the flow `t_d` advances at unit rate and the transverse coordinates
//! are frozen until `t_d` wraps, when they rotate by `α_j/|α_p|`. An
//! axis-aligned grid in `t` therefore gives parallelepipeds that the flow
//! crosses in exactly `ℓ_d` time units.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::pieces::{Alphabet, PieceSequence, PeriodicityVerdict, Profile, SimpleFdpVerdict};
use crate::sampling::{sup_distance, SamplingFunction, TrigTerm};
use crate::torus::{reduce_unit, FlowParams, TorusPoint};

/// Scan points per axis when estimating the variation on a box.
pub const DEFAULT_SCAN_POINTS: usize = 16;
const MAX_AXIS_COUNT: usize = 1 << 16;
const MAX_BOX_COUNT: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PartitionRecord {
    flow: FlowParams,
    counts: Vec<usize>,
}

/// A tiling of `T^d` by sheared boxes, `counts[j]` slots along axis `j`.
/// Along the pivot axis the slots subdivide `t_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRecord", into = "PartitionRecord")]
pub struct BoxPartition {
    flow: FlowParams,
    pivot: usize,
    counts: Vec<usize>,
    /// `|α_p|`
    rate: f64,
    sign: f64,
    ell_d: f64,
}

impl TryFrom<PartitionRecord> for BoxPartition {
    type Error = Error;

    fn try_from(r: PartitionRecord) -> Result<Self> {
        BoxPartition::with_counts(r.flow, r.counts)
    }
}

impl From<BoxPartition> for PartitionRecord {
    fn from(b: BoxPartition) -> Self {
        PartitionRecord {
            flow: b.flow,
            counts: b.counts,
        }
    }
}

/// Axis with the largest `|α_j|` (first one on ties).
pub fn pivot_axis(alpha: &[f64]) -> usize {
    let mut best = 0;
    for (j, a) in alpha.iter().enumerate() {
        if a.abs() > alpha[best].abs() {
            best = j;
        }
    }
    best
}

/// Smallest admissible slot count along the pivot, so that `ℓ_d < 1`.
pub fn min_pivot_count(alpha: &[f64]) -> usize {
    let rate = alpha[pivot_axis(alpha)].abs();
    ((1.0 / rate).floor() as usize + 1).max(2)
}

impl BoxPartition {
    pub fn with_counts(flow: FlowParams, counts: Vec<usize>) -> Result<Self> {
        let d = flow.dim();
        if counts.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: counts.len(),
            });
        }
        let pivot = pivot_axis(flow.alpha());
        let rate = flow.alpha()[pivot].abs();
        for (j, &c) in counts.iter().enumerate() {
            let min = if j == pivot { min_pivot_count(flow.alpha()) } else { 2 };
            if c < min || c > MAX_AXIS_COUNT {
                return Err(invalid(format!(
                    "count {c} on axis {j} outside [{min}, {MAX_AXIS_COUNT}]"
                )));
            }
        }
        let ell_d = 1.0 / (rate * counts[pivot] as f64);
        Ok(BoxPartition {
            sign: flow.alpha()[pivot].signum(),
            flow,
            pivot,
            counts,
            rate,
            ell_d,
        })
    }

    /// Smallest partition for the flow: two slots per transverse axis and the
    /// minimal pivot count.
    pub fn minimal(flow: FlowParams) -> Result<Self> {
        let mut counts = vec![2; flow.dim()];
        counts[pivot_axis(flow.alpha())] = min_pivot_count(flow.alpha());
        BoxPartition::with_counts(flow, counts)
    }

    pub fn flow(&self) -> &FlowParams {
        &self.flow
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn box_count(&self) -> usize {
        self.counts.iter().product()
    }

    /// Residence time of the flow in every box.
    pub fn ell_d(&self) -> f64 {
        self.ell_d
    }

    /// Side lengths of a box in sheared coordinates; the pivot entry is `ℓ_d`.
    pub fn ell(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| if j == self.pivot { self.ell_d } else { 1.0 / self.counts[j] as f64 })
            .collect()
    }

    /// `max_j ℓ_j`, the same for every box.
    pub fn delta(&self) -> f64 {
        self.ell().into_iter().fold(0.0, f64::max)
    }

    /// Rotation of the transverse coordinates each time `t_d` wraps.
    pub fn transverse_rotation(&self) -> Vec<f64> {
        self.flow.alpha().iter().map(|a| a / self.rate).collect()
    }

    /// Row-major flat index of a slot multi-index.
    pub fn flat_index(&self, slots: &[usize]) -> usize {
        slots.iter().zip(&self.counts).fold(0, |acc, (s, c)| acc * c + s)
    }

    pub fn slots(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            out[j] = index % self.counts[j];
            index /= self.counts[j];
        }
        out
    }

    /// Sheared coordinates of a torus point; entry `pivot` holds `t_d`.
    pub fn sheared(&self, x: &[f64]) -> Vec<f64> {
        let td = reduce_unit(self.sign * x[self.pivot]) / self.rate;
        x.iter()
            .zip(self.flow.alpha())
            .enumerate()
            .map(|(j, (xj, aj))| if j == self.pivot { td } else { reduce_unit(xj - td * aj) })
            .collect()
    }

    /// The torus point `Φ(t)`.
    pub fn unshear(&self, t: &[f64]) -> TorusPoint {
        let td = t[self.pivot];
        TorusPoint::new(
            self.flow
                .alpha()
                .iter()
                .enumerate()
                .map(|(j, aj)| if j == self.pivot { td * aj } else { t[j] + td * aj })
                .collect(),
        )
    }

    /// Box containing `x` and the position `t_d/ℓ_d − slot ∈ [0,1)` inside it.
    pub fn locate(&self, x: &[f64]) -> (usize, f64) {
        let r = reduce_unit(self.sign * x[self.pivot]);
        let scaled = r * self.counts[self.pivot] as f64;
        let slot_d = (scaled.floor() as usize).min(self.counts[self.pivot] - 1);
        let td = r / self.rate;
        let mut index = 0;
        for j in 0..self.dim() {
            let c = self.counts[j];
            let s = if j == self.pivot {
                slot_d
            } else {
                let u = reduce_unit(x[j] - td * self.flow.alpha()[j]);
                ((u * c as f64).floor() as usize).min(c - 1)
            };
            index = index * c + s;
        }
        (index, scaled - slot_d as f64)
    }

    /// Corner `γ = Φ(lower corner)` of a box.
    pub fn gamma(&self, index: usize) -> TorusPoint {
        let ell = self.ell();
        let t: Vec<f64> = self.slots(index).iter().zip(&ell).map(|(&s, l)| s as f64 * l).collect();
        self.unshear(&t)
    }

    /// Whether `x` lies in box `index`, decided in sheared coordinates.
    pub fn contains(&self, index: usize, x: &[f64]) -> bool {
        let t = self.sheared(x);
        let ell = self.ell();
        self.slots(index).iter().zip(&t).zip(&ell).all(|((&s, &tj), &l)| {
            let lo = s as f64 * l;
            tj >= lo && tj < lo + l
        })
    }

    /// `(inf, sup)` of `f` over a `k^d` grid on the closure of box `index`.
    pub fn scan_box(&self, f: &SamplingFunction, index: usize, k: usize) -> (f64, f64) {
        let d = self.dim();
        let ell = self.ell();
        let lo: Vec<f64> = self.slots(index).iter().zip(&ell).map(|(&s, l)| s as f64 * l).collect();
        let step: Vec<f64> = ell.iter().map(|l| l / (k - 1) as f64).collect();
        let alpha = self.flow.alpha();
        let mut inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        let mut x = vec![0.0; d];
        let mut t = vec![0.0; d];
        let total = k.pow(d as u32);
        for mut flat in 0..total {
            for j in (0..d).rev() {
                t[j] = lo[j] + (flat % k) as f64 * step[j];
                flat /= k;
            }
            let td = t[self.pivot];
            for j in 0..d {
                let v = if j == self.pivot { td * alpha[j] } else { t[j] + td * alpha[j] };
                x[j] = reduce_unit(v);
            }
            let v = f.eval_coords(&x);
            inf = inf.min(v);
            sup = sup.max(v);
        }
        (inf, sup)
    }

    /// Per-box scans in box order.
    pub fn scan_all(&self, f: &SamplingFunction, k: usize) -> Vec<(f64, f64)> {
        (0..self.box_count())
            .into_par_iter()
            .map(|b| self.scan_box(f, b, k))
            .collect()
    }

    fn refined(&self) -> Option<BoxPartition> {
        let counts: Vec<usize> = self.counts.iter().map(|c| c * 2).collect();
        if counts.iter().any(|&c| c > MAX_AXIS_COUNT) || counts.iter().product::<usize>() > MAX_BOX_COUNT {
            return None;
        }
        BoxPartition::with_counts(self.flow.clone(), counts).ok()
    }
}

fn max_variation(scans: &[(f64, f64)]) -> f64 {
    scans.iter().fold(0.0, |m, (lo, hi)| m.max(hi - lo))
}

/// Variation bound a partition must meet on the scan grid: `ε/2` less a
/// margin of `ε/8` for scan error.
pub fn variation_target(eps: f64) -> f64 {
    eps / 2.0 - eps / 8.0
}

/// Amplitude of the box profiles, `min(ε/8, 1/n)`.
pub fn profile_amplitude(eps: f64, n: usize) -> f64 {
    (eps / 8.0).min(1.0 / n as f64)
}

fn check_eps_n(eps: f64, n: usize) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("epsilon must be positive, got {eps}")));
    }
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    Ok(())
}

/// Refine from the minimal partition, doubling every count, until the
/// scanned variation on every box is below [`variation_target`] and
/// `δ ≤ 1/n`.
pub fn build_partition(f: &SamplingFunction, p: &FlowParams, eps: f64, n: usize) -> Result<BoxPartition> {
    build_partition_with(f, p, eps, n, DEFAULT_SCAN_POINTS)
}

pub fn build_partition_with(
    f: &SamplingFunction,
    p: &FlowParams,
    eps: f64,
    n: usize,
    scan_points: usize,
) -> Result<BoxPartition> {
    check_eps_n(eps, n)?;
    if !f.is_continuous() {
        return Err(Error::NotContinuous);
    }
    if scan_points < 2 {
        return Err(invalid("need at least two scan points per axis"));
    }
    f.check_dim(p.dim())?;
    let target = variation_target(eps);
    let mut part = BoxPartition::minimal(p.clone())?;
    loop {
        let fine_enough = part.delta() <= 1.0 / n as f64;
        let variation = if fine_enough {
            max_variation(&part.scan_all(f, scan_points))
        } else {
            f64::INFINITY
        };
        if variation < target {
            return Ok(part);
        }
        match part.refined() {
            Some(next) => part = next,
            None => {
                return Err(Error::UnresolvedVariation {
                    variation,
                    counts: part.counts.clone(),
                })
            }
        }
    }
}

/// Profile of `f_{ε,n}` on one box: `mid + amp·(w(t_d/ℓ_d) − 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxProfile {
    pub index: usize,
    pub mid: f64,
    pub amp: f64,
}

impl BoxProfile {
    /// Value at relative position `s = t_d/ℓ_d ∈ [0,1)`.
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        let w = 0.5 * (1.0 - (2.0 * PI * s).cos());
        self.mid + self.amp * (w - 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BoxStepRecord {
    partition: BoxPartition,
    amp: f64,
    mids: Vec<f64>,
}

/// The step-like function `f_{ε,n}`: on each box a raised cosine in `t_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxStepRecord", into = "BoxStepRecord")]
pub struct BoxStep {
    partition: BoxPartition,
    amp: f64,
    mids: Vec<f64>,
}

impl TryFrom<BoxStepRecord> for BoxStep {
    type Error = Error;

    fn try_from(r: BoxStepRecord) -> Result<Self> {
        BoxStep::new(r.partition, r.mids, r.amp)
    }
}

impl From<BoxStep> for BoxStepRecord {
    fn from(b: BoxStep) -> Self {
        BoxStepRecord {
            partition: b.partition,
            amp: b.amp,
            mids: b.mids,
        }
    }
}

impl BoxStep {
    pub fn new(partition: BoxPartition, mids: Vec<f64>, amp: f64) -> Result<Self> {
        if mids.len() != partition.box_count() {
            return Err(invalid(format!(
                "{} midpoints for {} boxes",
                mids.len(),
                partition.box_count()
            )));
        }
        if !amp.is_finite() || mids.iter().any(|m| !m.is_finite()) {
            return Err(invalid("box profile parameters must be finite"));
        }
        Ok(BoxStep { partition, amp, mids })
    }

    pub fn partition(&self) -> &BoxPartition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn amp(&self) -> f64 {
        self.amp
    }

    pub fn mids(&self) -> &[f64] {
        &self.mids
    }

    pub fn profile(&self, index: usize) -> BoxProfile {
        BoxProfile {
            index,
            mid: self.mids[index],
            amp: self.amp,
        }
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.mids.iter().fold(0.0f64, |m, v| m.max(v.abs())) + self.amp.abs() / 2.0
    }

    pub fn eval_coords(&self, x: &[f64]) -> f64 {
        let (b, s) = self.partition.locate(x);
        self.profile(b).value(s)
    }

    /// `λ·f_{ε,n}` as a box-step function on the same partition.
    pub fn scaled(&self, lambda: f64) -> BoxStep {
        BoxStep {
            partition: self.partition.clone(),
            amp: lambda * self.amp,
            mids: self.mids.iter().map(|m| lambda * m).collect(),
        }
    }

    /// Partition and profiles with explicit box corners and side lengths.
    pub fn export(&self) -> PartitionExport {
        let ell = self.partition.ell();
        PartitionExport {
            flow: self.partition.flow.clone(),
            pivot: self.partition.pivot,
            counts: self.partition.counts.clone(),
            delta: self.partition.delta(),
            boxes: (0..self.partition.box_count())
                .map(|b| BoxRecord {
                    gamma: self.partition.gamma(b),
                    ell: ell.clone(),
                    mid: self.mids[b],
                    amp: self.amp,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub gamma: TorusPoint,
    pub ell: Vec<f64>,
    pub mid: f64,
    pub amp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionExport {
    pub flow: FlowParams,
    pub pivot: usize,
    pub counts: Vec<usize>,
    pub delta: f64,
    pub boxes: Vec<BoxRecord>,
}

/// `f_{ε,n}` on a partition: per box `m_B = (inf + sup)/2` from the scan and
/// amplitude `min(ε/8, 1/n)`.
pub fn build_fepsn(f: &SamplingFunction, partition: &BoxPartition, eps: f64, n: usize) -> Result<BoxStep> {
    check_eps_n(eps, n)?;
    f.check_dim(partition.dim())?;
    let scans = partition.scan_all(f, DEFAULT_SCAN_POINTS);
    let mids = scans.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    BoxStep::new(partition.clone(), mids, profile_amplitude(eps, n))
}

/// Record of the generic terms added by [`ensure_aperiodic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AperiodicityAdjustment {
    pub rank_before: usize,
    pub rank_after: usize,
    pub added: Vec<TrigTerm>,
}

/// Rank over the rationals of a set of integer vectors.
pub fn integer_rank(vectors: &[Vec<i64>]) -> usize {
    let mut rows: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().map(|&k| k as f64).collect())
        .collect();
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(pr) = (rank..rows.len()).find(|&r| rows[r][c] != 0.0) else {
            continue;
        };
        rows.swap(rank, pr);
        for r in 0..rows.len() {
            if r != rank && rows[r][c] != 0.0 {
                let factor = rows[r][c] / rows[rank][c];
                for k in c..cols {
                    let v = rows[rank][k];
                    rows[r][k] -= factor * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// If the trigonometric spectrum of `f` spans fewer than `min(2, d)`
/// directions, add `cos(2πx_j)` terms with total coefficient `ε/16` until it
/// does. Functions without a finite spectrum are returned unchanged.
pub fn ensure_aperiodic(
    f: &SamplingFunction,
    d: usize,
    eps: f64,
) -> Result<(SamplingFunction, Option<AperiodicityAdjustment>)> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    f.check_dim(d)?;
    let Some(mut support) = f.trig_support() else {
        return Ok((f.clone(), None));
    };
    let target = d.min(2);
    let rank_before = integer_rank(&support);
    if rank_before >= target {
        return Ok((f.clone(), None));
    }
    let mut axes = Vec::new();
    for j in 0..d {
        if integer_rank(&support) >= target {
            break;
        }
        let mut e = vec![0; d];
        e[j] = 1;
        support.push(e);
        if integer_rank(&support) > rank_before + axes.len() {
            axes.push(j);
        } else {
            support.pop();
        }
    }
    let coeff = eps / 16.0 / axes.len() as f64;
    let added: Vec<TrigTerm> = axes
        .iter()
        .map(|&j| {
            let mut k = vec![0; d];
            k[j] = 1;
            TrigTerm::cos(k, coeff)
        })
        .collect();
    let adjusted = with_terms(f, &added, 1.0)?;
    Ok((
        adjusted,
        Some(AperiodicityAdjustment {
            rank_before,
            rank_after: integer_rank(&support),
            added,
        }),
    ))
}

fn with_terms(f: &SamplingFunction, added: &[TrigTerm], outer: f64) -> Result<SamplingFunction> {
    let extra = || {
        added.iter().map(|t| TrigTerm {
            k: t.k.clone(),
            cos: t.cos / outer,
            sin: t.sin / outer,
        })
    };
    match f {
        SamplingFunction::Constant { value } => {
            let d = added[0].k.len();
            let mut terms = vec![TrigTerm::cos(vec![0; d], *value)];
            terms.extend(extra());
            Ok(SamplingFunction::trig(terms))
        }
        SamplingFunction::TrigPoly { terms } => {
            let mut terms = terms.clone();
            terms.extend(extra());
            Ok(SamplingFunction::trig(terms))
        }
        SamplingFunction::Scaled { lambda, inner } if *lambda != 0.0 => Ok(SamplingFunction::scaled(
            *lambda,
            with_terms(inner, added, outer * lambda)?,
        )),
        _ => Err(invalid("cannot add trigonometric terms to this sampling function")),
    }
}

/// A flow itinerary: the piece sequence plus the box visited by each piece.
#[derive(Debug, Clone, PartialEq)]
pub struct Itinerary {
    pub sequence: PieceSequence,
    pub boxes: Vec<usize>,
}

/// Boxes visited by `x ↦ ω + xα` on `[0, T]`, one piece per full visit.
/// Visits cut by `0` or `T` are dropped; the sequence starts at the first
/// full entry time.
pub fn itinerary(fepsn: &BoxStep, p: &FlowParams, length: f64) -> Result<Itinerary> {
    let part = &fepsn.partition;
    if p.alpha() != part.flow.alpha() {
        return Err(invalid("flow frequency differs from the partition's"));
    }
    if !(length >= 10.0 * part.ell_d) || !length.is_finite() {
        return Err(invalid(format!(
            "itinerary length must be at least 10·ℓ_d = {}, got {length}",
            10.0 * part.ell_d
        )));
    }
    let count = ((length / part.ell_d) + 1e-9).floor() as usize;
    let it = itinerary_symbols(fepsn, p, count + 1)?;
    // keep visits that end by `length`
    let keep = it
        .sequence
        .symbols()
        .iter()
        .enumerate()
        .take_while(|(i, _)| it.sequence.start_offset() + (*i as f64 + 1.0) * part.ell_d <= length + 1e-12)
        .count();
    truncate(it, keep)
}

fn truncate(it: Itinerary, keep: usize) -> Result<Itinerary> {
    let seq = &it.sequence;
    Ok(Itinerary {
        sequence: PieceSequence::new(seq.alphabet().clone(), seq.symbols()[..keep].to_vec(), seq.start_offset())?,
        boxes: it.boxes[..keep].to_vec(),
    })
}

/// The first `count` full visits of the flow from `ω`.
pub fn itinerary_symbols(fepsn: &BoxStep, p: &FlowParams, count: usize) -> Result<Itinerary> {
    let part = &fepsn.partition;
    if p.alpha() != part.flow.alpha() {
        return Err(invalid("flow frequency differs from the partition's"));
    }
    let d = part.dim();
    let nd = part.counts[part.pivot];
    let omega = p.omega().coords();
    let r = reduce_unit(part.sign * omega[part.pivot]) * nd as f64;
    let t0 = part.sheared(omega);
    let beta = part.transverse_rotation();
    let mut first = r.floor() as usize;
    if r > first as f64 {
        first += 1;
    }
    let start_offset = (first as f64 - r) * part.ell_d;

    let mut alphabet = Alphabet::new();
    let mut symbol_of: HashMap<usize, usize> = HashMap::new();
    let mut symbols = Vec::with_capacity(count);
    let mut boxes = Vec::with_capacity(count);
    let mut slots = vec![0usize; d];
    for g in first..first + count {
        let roof = g / nd;
        for j in 0..d {
            slots[j] = if j == part.pivot {
                g % nd
            } else {
                let u = reduce_unit(t0[j] + roof as f64 * beta[j]);
                ((u * part.counts[j] as f64).floor() as usize).min(part.counts[j] - 1)
            };
        }
        let b = part.flat_index(&slots);
        let sym = match symbol_of.get(&b) {
            Some(&s) => s,
            None => {
                let prof = fepsn.profile(b);
                let s = alphabet.intern(
                    part.ell_d,
                    Profile::RaisedCosine {
                        mid: prof.mid,
                        amp: prof.amp,
                    },
                )?;
                symbol_of.insert(b, s);
                s
            }
        };
        symbols.push(sym);
        boxes.push(b);
    }
    Ok(Itinerary {
        sequence: PieceSequence::new(alphabet, symbols, start_offset)?,
        boxes,
    })
}

/// Knobs for [`verify_construction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {
    pub symbols: usize,
    pub max_period: usize,
    /// `ℓ` for the simple-FDP check as a multiple of the largest duration.
    pub ell_factor: f64,
    /// Grid size per axis of the sup-distance scan.
    pub sup_grid: usize,
    pub scan_points: usize,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            symbols: 10_000,
            max_period: 200,
            ell_factor: 3.0,
            sup_grid: 128,
            scan_points: DEFAULT_SCAN_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub eps: f64,
    pub n: usize,
    pub counts: Vec<usize>,
    pub delta: f64,
    pub checks: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Run every checkable property of the construction and collect verdicts.
pub fn verify_construction(
    f: &SamplingFunction,
    fepsn: &BoxStep,
    p: &FlowParams,
    eps: f64,
    n: usize,
    params: &VerifyParams,
) -> Result<VerificationReport> {
    check_eps_n(eps, n)?;
    let part = &fepsn.partition;
    let d = part.dim();
    let mut checks = Vec::new();
    let mut push = |name: &str, pass: bool, detail: serde_json::Value| {
        checks.push(CheckOutcome {
            name: name.to_string(),
            pass,
            detail,
        })
    };

    let scans = part.scan_all(f, params.scan_points);
    let variation = max_variation(&scans);
    push(
        "small_variation",
        variation < eps / 2.0,
        json!({"max_variation": variation, "bound": eps / 2.0, "scan_points": params.scan_points}),
    );

    let sup = sup_distance(f, &SamplingFunction::BoxStep(Arc::new(fepsn.clone())), d, params.sup_grid)?;
    push(
        "good_approximation",
        sup < eps,
        json!({"sup_distance": sup, "bound": eps, "grid": params.sup_grid}),
    );

    let half_amp = fepsn.amp.abs() / 2.0;
    let slack = profile_amplitude(eps, n);
    let interval_ok = half_amp <= slack / 2.0
        && scans
            .iter()
            .zip(&fepsn.mids)
            .all(|((lo, hi), m)| m - half_amp >= lo - slack && m + half_amp <= hi + slack);
    push(
        "value_interval",
        interval_ok && fepsn.amp != 0.0,
        json!({"amp": fepsn.amp, "allowed_slack": slack}),
    );

    let it = itinerary_symbols(fepsn, p, params.symbols)?;
    let seq = &it.sequence;
    let durations_ok = seq
        .alphabet()
        .pieces()
        .iter()
        .all(|pc| (pc.duration - part.ell_d).abs() <= 1e-9);
    push(
        "residence",
        durations_ok,
        json!({"ell_d": part.ell_d, "visits": seq.len()}),
    );

    let fdp = seq.check_fdp();
    let mut box_visits = vec![0usize; part.box_count()];
    for &b in &it.boxes {
        box_visits[b] += 1;
    }
    let area = 1.0 / part.box_count() as f64;
    let equidistribution = box_visits
        .iter()
        .map(|&c| (c as f64 / it.boxes.len().max(1) as f64 - area).abs())
        .fold(0.0, f64::max);
    push(
        "fdp",
        fdp.pass && fdp.alphabet_size <= part.box_count(),
        json!({
            "alphabet_size": fdp.alphabet_size,
            "used_symbols": fdp.used_symbols,
            "box_count": part.box_count(),
            "equidistribution_max_deviation": equidistribution,
        }),
    );

    let max_dur = seq
        .alphabet()
        .pieces()
        .iter()
        .fold(0.0, |m: f64, pc| m.max(pc.duration));
    let ell = params.ell_factor * max_dur;
    let fwd = seq.check_simple_fdp(ell, seq.len())?;
    push("simple_fdp_forward", fwd.holds(), fdp_detail(&fwd, ell));
    let rev_seq = seq.reverse();
    let rev = rev_seq.check_simple_fdp(ell, rev_seq.len())?;
    push("simple_fdp_reverse", rev.holds(), fdp_detail(&rev, ell));

    let per = seq.falsify_eventual_periodicity(params.max_period.min(seq.len() / 3).max(1))?;
    push(
        "not_eventually_periodic",
        per.is_falsified(),
        match &per {
            PeriodicityVerdict::Falsified { breaks } => json!({
                "verdict": "falsified",
                "max_period": params.max_period,
                "latest_break": breaks.iter().map(|b| b.position).max(),
            }),
            PeriodicityVerdict::Consistent { period, start } => json!({
                "verdict": "consistent",
                "period": period,
                "start": start,
            }),
        },
    );

    Ok(VerificationReport {
        eps,
        n,
        counts: part.counts.clone(),
        delta: part.delta(),
        checks,
    })
}

fn fdp_detail(v: &SimpleFdpVerdict, ell: f64) -> serde_json::Value {
    json!({"ell": ell, "result": v})
}
