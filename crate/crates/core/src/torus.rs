//! The torus `T^d = R^d / Z^d`, the translation flow `x ↦ ω + xα`, and
//! diagnostics on the frequency vector.
//!
//! Minimality of the flow is not decidable from a floating-point `α`. What we
//! can do is search for integer relations `k·α ≈ 0` up to a bound; finding
//! none is the operational evidence of minimality recorded by experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Reduce a real number to `[0, 1)`.
///
/// Values that land within rounding of 1 reduce to 0, so the result is always
/// strictly below 1 and the reduction is idempotent.
#[inline]
pub fn reduce_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point of `T^d` with every coordinate in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    /// Build a point from arbitrary real coordinates, reducing each modulo 1.
    pub fn new(coords: Vec<f64>) -> Self {
        TorusPoint(coords.into_iter().map(reduce_unit).collect())
    }

    pub fn origin(d: usize) -> Self {
        TorusPoint(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Translate by a real vector and reduce.
    pub fn translate(&self, shift: &[f64]) -> TorusPoint {
        TorusPoint(
            self.0
                .iter()
                .zip(shift)
                .map(|(c, s)| reduce_unit(c + s))
                .collect(),
        )
    }
}

impl From<Vec<f64>> for TorusPoint {
    fn from(v: Vec<f64>) -> Self {
        TorusPoint::new(v)
    }
}

impl From<TorusPoint> for Vec<f64> {
    fn from(p: TorusPoint) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FlowRecord {
    d: usize,
    alpha: Vec<f64>,
    omega: Vec<f64>,
}

/// Torus dimension, frequency vector and base point of the translation flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlowRecord", into = "FlowRecord")]
pub struct FlowParams {
    alpha: Vec<f64>,
    omega: TorusPoint,
}

impl TryFrom<FlowRecord> for FlowParams {
    type Error = Error;

    fn try_from(r: FlowRecord) -> Result<Self> {
        if r.alpha.len() != r.d {
            return Err(Error::DimensionMismatch {
                expected: r.d,
                got: r.alpha.len(),
            });
        }
        if r.omega.len() != r.d {
            return Err(Error::DimensionMismatch {
                expected: r.d,
                got: r.omega.len(),
            });
        }
        FlowParams::new(r.alpha, r.omega)
    }
}

impl From<FlowParams> for FlowRecord {
    fn from(p: FlowParams) -> Self {
        FlowRecord {
            d: p.dim(),
            alpha: p.alpha,
            omega: p.omega.into(),
        }
    }
}

impl FlowParams {
    pub fn new(alpha: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(invalid("torus dimension must be at least 1"));
        }
        if alpha.len() != omega.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                got: omega.len(),
            });
        }
        if alpha.iter().chain(&omega).any(|v| !v.is_finite()) {
            return Err(invalid("flow parameters must be finite"));
        }
        if alpha.iter().all(|&a| a == 0.0) {
            return Err(invalid("frequency vector must be nonzero"));
        }
        Ok(FlowParams {
            alpha,
            omega: TorusPoint::new(omega),
        })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn omega(&self) -> &TorusPoint {
        &self.omega
    }

    /// Same frequency, different base point.
    pub fn with_omega(&self, omega: TorusPoint) -> Self {
        assert_eq!(omega.dim(), self.dim(), "base point dimension");
        FlowParams {
            alpha: self.alpha.clone(),
            omega,
        }
    }

    /// `(ω + xα) mod 1`.
    pub fn flow(&self, x: f64) -> Result<TorusPoint> {
        if !x.is_finite() {
            return Err(invalid(format!("flow time must be finite, got {x}")));
        }
        Ok(self.flow_unchecked(x))
    }

    #[inline]
    pub(crate) fn flow_unchecked(&self, x: f64) -> TorusPoint {
        TorusPoint(
            self.omega
                .0
                .iter()
                .zip(&self.alpha)
                .map(|(w, a)| reduce_unit(w + x * a))
                .collect(),
        )
    }

    /// Write `(ω + xα) mod 1` into `out` without allocating.
    #[inline]
    pub(crate) fn flow_into(&self, x: f64, out: &mut [f64]) {
        for ((o, w), a) in out.iter_mut().zip(&self.omega.0).zip(&self.alpha) {
            *o = reduce_unit(w + x * a);
        }
    }
}

/// Exhaustive search for a nonzero integer vector `k` with `|k|_∞ ≤ bound`
/// and `|k·α| < tol`.
///
/// Among all relations found the one returned has the smallest `|k|_∞`, its
/// first nonzero entry positive, and is lexicographically smallest among those.
pub fn find_rational_dependence(alpha: &[f64], bound: u32, tol: f64) -> Result<Option<Vec<i64>>> {
    if alpha.is_empty() {
        return Err(invalid("empty frequency vector"));
    }
    if bound == 0 || bound > 10_000 {
        return Err(invalid(format!("search bound must be in 1..=10000, got {bound}")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let d = alpha.len();
    let b = bound as i64;

    // Enumerate all but one "pivot" coordinate; the pivot range that can
    // close the relation is solved for directly.
    let pivot = (0..d)
        .max_by(|&i, &j| alpha[i].abs().total_cmp(&alpha[j].abs()))
        .unwrap();
    let mut hits: Vec<Vec<i64>> = Vec::new();

    if alpha[pivot] == 0.0 {
        // alpha is the zero vector; every e_j is a relation.
        let mut k = vec![0; d];
        k[0] = 1;
        return Ok(Some(k));
    }

    let others: Vec<usize> = (0..d).filter(|&j| j != pivot).collect();
    let mut prefix = vec![-b; others.len()];
    loop {
        let partial: f64 = others
            .iter()
            .zip(&prefix)
            .map(|(&j, &kj)| kj as f64 * alpha[j])
            .sum();
        let a = alpha[pivot];
        let lo = ((-partial - tol) / a).min((-partial + tol) / a);
        let hi = ((-partial - tol) / a).max((-partial + tol) / a);
        let kp_lo = (lo.floor() as i64).max(-b);
        let kp_hi = (hi.ceil() as i64).min(b);
        for kp in kp_lo..=kp_hi {
            let mut k = vec![0i64; d];
            for (&j, &kj) in others.iter().zip(&prefix) {
                k[j] = kj;
            }
            k[pivot] = kp;
            if k.iter().all(|&v| v == 0) {
                continue;
            }
            let dot: f64 = k.iter().zip(alpha).map(|(&ki, &ai)| ki as f64 * ai).sum();
            if dot.abs() < tol {
                hits.push(normalize_sign(k));
            }
        }
        // odometer increment over the non-pivot coordinates
        let mut i = 0;
        loop {
            if i == prefix.len() {
                return Ok(select_canonical(hits));
            }
            prefix[i] += 1;
            if prefix[i] <= b {
                break;
            }
            prefix[i] = -b;
            i += 1;
        }
    }
}

fn normalize_sign(mut k: Vec<i64>) -> Vec<i64> {
    if let Some(&first) = k.iter().find(|&&v| v != 0) {
        if first < 0 {
            k.iter_mut().for_each(|v| *v = -*v);
        }
    }
    k
}

fn select_canonical(hits: Vec<Vec<i64>>) -> Option<Vec<i64>> {
    hits.into_iter().min_by(|a, b| {
        let na = a.iter().map(|v| v.abs()).max().unwrap_or(0);
        let nb = b.iter().map(|v| v.abs()).max().unwrap_or(0);
        na.cmp(&nb).then_with(|| a.cmp(b))
    })
}

/// How base points are drawn for averages over `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaScheme {
    /// Product grid with `⌈count^{1/d}⌉` nodes per axis.
    Grid,
    /// Halton sequence in the first `d` prime bases.
    LowDiscrepancy,
    /// ChaCha8 stream seeded by the caller.
    SeededRandom,
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// Deterministic base points for quadrature over the torus.
///
/// `seed` only affects [`OmegaScheme::SeededRandom`].
pub fn sample_omegas(d: usize, count: usize, scheme: OmegaScheme, seed: u64) -> Result<Vec<TorusPoint>> {
    if d == 0 {
        return Err(invalid("torus dimension must be at least 1"));
    }
    if count == 0 {
        return Err(invalid("omega count must be at least 1"));
    }
    match scheme {
        OmegaScheme::Grid => {
            let mut m = 1usize;
            while m.checked_pow(d as u32).is_some_and(|p| p < count) {
                m += 1;
            }
            let total = m.pow(d as u32);
            Ok((0..total)
                .map(|mut idx| {
                    // lexicographic with the first coordinate varying slowest
                    let mut c = vec![0.0; d];
                    for j in (0..d).rev() {
                        c[j] = (idx % m) as f64 / m as f64;
                        idx /= m;
                    }
                    TorusPoint(c)
                })
                .collect())
        }
        OmegaScheme::LowDiscrepancy => {
            if d > PRIMES.len() {
                return Err(invalid(format!("low-discrepancy scheme supports d <= {}", PRIMES.len())));
            }
            Ok((0..count as u64)
                .map(|i| TorusPoint(PRIMES[..d].iter().map(|&b| radical_inverse(i, b)).collect()))
                .collect())
        }
        OmegaScheme::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..count)
                .map(|_| TorusPoint::new((0..d).map(|_| rng.gen::<f64>()).collect()))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sqrt2_flow(omega: Vec<f64>) -> FlowParams {
        FlowParams::new(vec![1.0, 2f64.sqrt()], omega).unwrap()
    }

    #[test]
    fn flow_examples() {
        let p = sqrt2_flow(vec![0.0, 0.0]);
        assert_eq!(p.flow(0.0).unwrap().coords(), &[0.0, 0.0]);
        let q = p.flow(1.0).unwrap();
        assert_eq!(q.coords()[0], 0.0);
        assert!((q.coords()[1] - (2f64.sqrt() - 1.0)).abs() < 1e-15);

        let p = sqrt2_flow(vec![0.5, 0.25]);
        let q = p.flow(0.5).unwrap();
        assert_eq!(q.coords()[0], 0.0);
        assert!((q.coords()[1] - (0.25 + 0.5 * 2f64.sqrt())).abs() < 1e-15);
        assert!((q.coords()[1] - 0.95711).abs() < 1e-5);
    }

    #[test]
    fn flow_rejects_non_finite() {
        let p = sqrt2_flow(vec![0.0, 0.0]);
        assert!(p.flow(f64::NAN).is_err());
        assert!(p.flow(f64::INFINITY).is_err());
    }

    #[test]
    fn params_invariants() {
        assert!(FlowParams::new(vec![], vec![]).is_err());
        assert!(FlowParams::new(vec![0.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(FlowParams::new(vec![1.0], vec![0.0, 0.0]).is_err());
        let p = FlowParams::new(vec![1.0, 0.5], vec![1.25, -0.25]).unwrap();
        assert_eq!(p.omega().coords(), &[0.25, 0.75]);
    }

    #[test]
    fn reduction_near_one_maps_to_zero() {
        let just_below = 1.0 - f64::EPSILON / 2.0;
        assert!(reduce_unit(-f64::EPSILON / 4.0) < 1.0);
        assert_eq!(reduce_unit(just_below), just_below);
        assert_eq!(reduce_unit(-1e-300), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"d":2,"alpha":[1.0,1.41421356237],"omega":[0.0,0.0]}"#;
        let p: FlowParams = serde_json::from_str(text).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(serde_json::to_string(&p).unwrap(), text);
        let bad = r#"{"d":3,"alpha":[1.0,1.41421356237],"omega":[0.0,0.0]}"#;
        assert!(serde_json::from_str::<FlowParams>(bad).is_err());
    }

    #[test]
    fn rational_dependence_examples() {
        assert_eq!(find_rational_dependence(&[1.0, 2.0], 3, 1e-9).unwrap(), Some(vec![2, -1]));
        assert_eq!(find_rational_dependence(&[0.5, 0.25], 4, 1e-9).unwrap(), Some(vec![1, -2]));
        assert_eq!(find_rational_dependence(&[1.0, 2f64.sqrt()], 50, 1e-9).unwrap(), None);
    }

    #[test]
    fn rational_dependence_matches_brute_force() {
        // Plain scan over the whole box as an oracle for the pivot solver.
        let alpha = [1.0, 2f64.sqrt()];
        let mut best = None;
        for k1 in -50i64..=50 {
            for k2 in -50i64..=50 {
                if (k1, k2) != (0, 0) && (k1 as f64 * alpha[0] + k2 as f64 * alpha[1]).abs() < 1e-9 {
                    best = Some((k1, k2));
                }
            }
        }
        assert_eq!(best, None);
        let r = find_rational_dependence(&[0.3, 0.2, 0.5], 5, 1e-9).unwrap().unwrap();
        let dot: f64 = r.iter().zip([0.3, 0.2, 0.5]).map(|(&k, a)| k as f64 * a).sum();
        assert!(dot.abs() < 1e-9);
        assert_eq!(r.iter().map(|v| v.abs()).max(), Some(1));
    }

    #[test]
    fn rational_dependence_preconditions() {
        assert!(find_rational_dependence(&[1.0], 0, 1e-9).is_err());
        assert!(find_rational_dependence(&[1.0], 10_001, 1e-9).is_err());
        assert!(find_rational_dependence(&[1.0, 2.0], 3, 0.0).is_err());
    }

    #[test]
    fn grid_samples() {
        let one = sample_omegas(1, 4, OmegaScheme::Grid, 0).unwrap();
        let c: Vec<f64> = one.iter().map(|p| p.coords()[0]).collect();
        assert_eq!(c, vec![0.0, 0.25, 0.5, 0.75]);
        let two = sample_omegas(2, 4, OmegaScheme::Grid, 0).unwrap();
        let c: Vec<Vec<f64>> = two.iter().map(|p| p.coords().to_vec()).collect();
        assert_eq!(c, vec![vec![0.0, 0.0], vec![0.0, 0.5], vec![0.5, 0.0], vec![0.5, 0.5]]);
        assert_eq!(sample_omegas(2, 5, OmegaScheme::Grid, 0).unwrap().len(), 9);
        assert_eq!(sample_omegas(3, 64, OmegaScheme::Grid, 0).unwrap().len(), 64);
    }

    #[test]
    fn seeded_and_halton_are_deterministic() {
        let a = sample_omegas(2, 100, OmegaScheme::SeededRandom, 7).unwrap();
        let b = sample_omegas(2, 100, OmegaScheme::SeededRandom, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_omegas(2, 100, OmegaScheme::SeededRandom, 8).unwrap();
        assert_ne!(a, c);
        let h = sample_omegas(2, 4, OmegaScheme::LowDiscrepancy, 0).unwrap();
        assert_eq!(h[1].coords(), &[0.5, 1.0 / 3.0]);
        assert!(h.iter().flat_map(|p| p.coords()).all(|&v| (0.0..1.0).contains(&v)));
    }

    proptest! {
        #[test]
        fn flow_is_additive(x in -1e3f64..1e3, y in -1e3f64..1e3, w0 in 0f64..1.0, w1 in 0f64..1.0) {
            let p = sqrt2_flow(vec![w0, w1]);
            let direct = p.flow(x + y).unwrap();
            let stepped = p.with_omega(p.flow(x).unwrap()).flow(y).unwrap();
            for (a, b) in direct.coords().iter().zip(stepped.coords()) {
                let diff = (a - b).abs();
                // compare on the circle
                prop_assert!(diff.min(1.0 - diff) < 1e-11);
            }
        }

        #[test]
        fn reduction_is_idempotent(x in -1e6f64..1e6) {
            let r = reduce_unit(x);
            prop_assert!((0.0..1.0).contains(&r));
            prop_assert_eq!(reduce_unit(r), r);
        }

        #[test]
        fn relation_found_is_valid(a in 1i64..6, b in 1i64..6, s in 0.1f64..3.0) {
            let alpha = [a as f64 * s, b as f64 * s];
            let k = find_rational_dependence(&alpha, 6, 1e-9).unwrap().unwrap();
            let dot = k[0] as f64 * alpha[0] + k[1] as f64 * alpha[1];
            prop_assert!(dot.abs() < 1e-9);
        }
    }
}
