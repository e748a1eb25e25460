//! Transfer matrices for `−u'' + V u = E u`, the right half-line m-function,
//! and the Floquet discriminant.
//!
//! The potential is sampled on a uniform grid and taken constant on each step
//! (the mean of the two endpoint samples). Each step is then solved exactly:
//! with `k² = E − v`,
//!
//! ```text
//! B = [[cos kh, sin(kh)/k], [−k sin kh, cos kh]]
//! ```
//!
//! so every block has unit determinant up to rounding.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sampling::{sample_count, PotentialTrace, SamplingFunction};
use crate::torus::FlowParams;

/// Below this `|k|h` the blocks use their Taylor series in `k²`.
const SERIES_THRESHOLD: f64 = 1e-6;
/// Steps between rescalings of an accumulated product.
pub const RENORM_INTERVAL: usize = 1000;
/// Largest admissible sampling step.
pub const MAX_STEP: f64 = 0.1;

pub(crate) trait Entry: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn scale(self, s: f64) -> Self;
    fn norm_sqr(self) -> f64;
    fn to_complex(self) -> Complex64;
}

impl Entry for f64 {
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Entry for Complex64 {
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Row-major `[a, b, c, d]` for `[[a, b], [c, d]]`.
type Block<T> = [T; 4];

#[inline]
fn mul<T: Entry>(l: &Block<T>, r: &Block<T>) -> Block<T> {
    [
        l[0] * r[0] + l[1] * r[2],
        l[0] * r[1] + l[1] * r[3],
        l[2] * r[0] + l[3] * r[2],
        l[2] * r[1] + l[3] * r[3],
    ]
}

fn real_block(e: f64, v: f64, h: f64) -> Block<f64> {
    let k2 = e - v;
    if k2.abs() * h * h < SERIES_THRESHOLD * SERIES_THRESHOLD {
        let z = k2 * h * h;
        let c = 1.0 - z / 2.0 + z * z / 24.0;
        let sk = h * (1.0 - z / 6.0 + z * z / 120.0);
        return [c, sk, -k2 * sk, c];
    }
    if k2 > 0.0 {
        let k = k2.sqrt();
        let (s, c) = (k * h).sin_cos();
        [c, s / k, -k * s, c]
    } else {
        let kappa = (-k2).sqrt();
        let (sh, ch) = ((kappa * h).sinh(), (kappa * h).cosh());
        [ch, sh / kappa, kappa * sh, ch]
    }
}

fn complex_block(e: Complex64, v: f64, h: f64) -> Block<Complex64> {
    let k2 = e - v;
    if k2.norm() * h * h < SERIES_THRESHOLD * SERIES_THRESHOLD {
        let z = k2 * h * h;
        let c = 1.0 - z / 2.0 + z * z / 24.0;
        let sk = (1.0 - z / 6.0 + z * z / 120.0) * h;
        return [c, sk, -k2 * sk, c];
    }
    let k = k2.sqrt();
    let kh = k * h;
    let (s, c) = (kh.sin(), kh.cos());
    [c, s / k, -k * s, c]
}

/// Left-multiply the blocks of all steps, rescaling every
/// [`RENORM_INTERVAL`] steps. Returns the scaled product and the log of the
/// scale removed.
fn accumulate<T: Entry>(values: &[f64], block: impl Fn(f64) -> Block<T>, identity: Block<T>) -> (Block<T>, f64) {
    let mut m = identity;
    let mut log_scale = 0.0;
    let mut last_v = f64::NAN;
    let mut b = identity;
    for (i, w) in values.windows(2).enumerate() {
        let v = 0.5 * (w[0] + w[1]);
        if v != last_v {
            b = block(v);
            last_v = v;
        }
        m = mul(&b, &m);
        if (i + 1) % RENORM_INTERVAL == 0 {
            let s = m.iter().fold(0.0f64, |a, x| a.max(x.norm_sqr())).sqrt();
            if s > 0.0 && s.is_finite() {
                m = m.map(|x| x.scale(1.0 / s));
                log_scale += s.ln();
            }
        }
    }
    (m, log_scale)
}

const REAL_ID: Block<f64> = [1.0, 0.0, 0.0, 1.0];
const COMPLEX_ID: Block<Complex64> = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 0.0),
    Complex64::new(0.0, 0.0),
    Complex64::new(1.0, 0.0),
];

/// Product of step blocks over the samples, as a complex block and the log
/// of a removed scalar factor.
pub(crate) fn scaled_product(values: &[f64], step: f64, energy: Complex64) -> (Block<Complex64>, f64) {
    if energy.im == 0.0 {
        let (m, ls) = accumulate(values, |v| real_block(energy.re, v, step), REAL_ID);
        (m.map(Entry::to_complex), ls)
    } else {
        accumulate(values, |v| complex_block(energy, v, step), COMPLEX_ID)
    }
}

/// Largest singular value of a 2×2 complex matrix.
pub(crate) fn operator_norm(m: &Block<Complex64>) -> f64 {
    let s: f64 = m.iter().map(|x| x.norm_sqr()).sum();
    let det = (m[0] * m[3] - m[1] * m[2]).norm();
    let disc = (s * s - 4.0 * det * det).max(0.0);
    ((s + disc.sqrt()) / 2.0).sqrt()
}

/// `log ‖M‖` for the transfer matrix over the samples, without overflow.
pub(crate) fn log_norm(values: &[f64], step: f64, energy: Complex64) -> f64 {
    let (m, ls) = scaled_product(values, step, energy);
    ls + operator_norm(&m).ln()
}

/// `M(x, E)`: carries `(u(0), u'(0))` to `(u(x), u'(x))`.
///
/// The matrix is `exp(log_scale) · entries`. Products that would overflow
/// keep a nonzero `log_scale`; otherwise it is zero and `entries` is the
/// matrix itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub entries: [[Complex64; 2]; 2],
    pub log_scale: f64,
    pub x: f64,
    pub energy: Complex64,
}

/// Largest scale folded back into the entries.
const FOLD_LIMIT: f64 = 300.0;

impl TransferMatrix {
    pub fn identity(energy: Complex64) -> Self {
        TransferMatrix {
            entries: [[1.0.into(), 0.0.into()], [0.0.into(), 1.0.into()]],
            log_scale: 0.0,
            x: 0.0,
            energy,
        }
    }

    fn from_scaled(b: Block<Complex64>, log_scale: f64, x: f64, energy: Complex64) -> Self {
        let (b, log_scale) = if log_scale <= FOLD_LIMIT {
            let s = log_scale.exp();
            (b.map(|z| z * s), 0.0)
        } else {
            (b, log_scale)
        };
        TransferMatrix {
            entries: [[b[0], b[1]], [b[2], b[3]]],
            log_scale,
            x,
            energy,
        }
    }

    fn block(&self) -> Block<Complex64> {
        let e = &self.entries;
        [e[0][0], e[0][1], e[1][0], e[1][1]]
    }

    /// The matrix with the scale applied; entries may be infinite.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let s = self.log_scale.exp();
        self.entries.map(|row| row.map(|z| z * s))
    }

    pub fn det(&self) -> Complex64 {
        let e = &self.entries;
        (e[0][0] * e[1][1] - e[0][1] * e[1][0]) * (2.0 * self.log_scale).exp()
    }

    /// `|det − 1|` relative to the size of the products forming the
    /// determinant. Computed on the scaled entries, so it stays finite.
    pub fn det_defect(&self) -> f64 {
        let e = &self.entries;
        let target = (-2.0 * self.log_scale).exp();
        let ad = (e[0][0] * e[1][1]).norm();
        let bc = (e[0][1] * e[1][0]).norm();
        let det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
        (det - target).norm() / ad.max(bc).max(target)
    }

    pub fn trace(&self) -> Complex64 {
        (self.entries[0][0] + self.entries[1][1]) * self.log_scale.exp()
    }

    pub fn norm(&self) -> f64 {
        self.log_norm().exp()
    }

    pub fn log_norm(&self) -> f64 {
        operator_norm(&self.block()).ln() + self.log_scale
    }

    /// `self · rhs`, covering `rhs.x + self.x`.
    pub fn compose(&self, rhs: &TransferMatrix) -> TransferMatrix {
        let b = mul(&self.block(), &rhs.block());
        TransferMatrix::from_scaled(b, self.log_scale + rhs.log_scale, self.x + rhs.x, self.energy)
    }

    /// Largest imaginary part among the scaled entries, relative to their size.
    pub fn max_imag(&self) -> f64 {
        let size = self.entries.iter().flatten().fold(1.0f64, |m, z| m.max(z.norm()));
        self.entries.iter().flatten().fold(0.0f64, |m, z| m.max(z.im.abs())) / size
    }
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step <= MAX_STEP) {
        return Err(invalid(format!("step must lie in (0, {MAX_STEP}], got {step}")));
    }
    Ok(())
}

fn check_energy(energy: Complex64) -> Result<()> {
    if !(energy.re.is_finite() && energy.im.is_finite()) {
        return Err(invalid("energy must be finite"));
    }
    Ok(())
}

/// Transfer matrix over the whole trace.
pub fn propagate(trace: &PotentialTrace, energy: Complex64) -> Result<TransferMatrix> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    check_step(trace.step)?;
    check_energy(energy)?;
    let (b, ls) = scaled_product(&trace.values, trace.step, energy);
    Ok(TransferMatrix::from_scaled(b, ls, trace.length(), energy))
}

/// Samples of `V` at `x1 + i·h'`, where `h' ≤ h` divides `x2 − x1`.
fn samples_between(f: &SamplingFunction, p: &FlowParams, x1: f64, x2: f64, step: f64) -> (Vec<f64>, f64) {
    let len = x2 - x1;
    let n = ((len / step) - 1e-9).ceil().max(1.0) as usize;
    let h = len / n as f64;
    let mut x = vec![0.0; p.dim()];
    let values = (0..=n)
        .map(|i| {
            p.flow_into(x1 + i as f64 * h, &mut x);
            f.eval_coords(&x)
        })
        .collect();
    (values, h)
}

/// `M(x2, E, ω) M(x1, E, ω)⁻¹`: propagation from `x1` to `x2` along the flow.
/// The step is shrunk so that it divides `x2 − x1`.
pub fn cocycle_step(
    f: &SamplingFunction,
    p: &FlowParams,
    energy: Complex64,
    x1: f64,
    x2: f64,
    step: f64,
) -> Result<TransferMatrix> {
    check_step(step)?;
    check_energy(energy)?;
    if !(x1.is_finite() && x2.is_finite()) || x1 > x2 {
        return Err(invalid(format!("need finite x1 ≤ x2, got {x1}, {x2}")));
    }
    f.check_dim(p.dim())?;
    if x1 == x2 {
        return Ok(TransferMatrix::identity(energy));
    }
    let (values, h) = samples_between(f, p, x1, x2, step);
    let (b, ls) = scaled_product(&values, h, energy);
    Ok(TransferMatrix::from_scaled(b, ls, x2 - x1, energy))
}

/// Value of `m_+(E)` with its convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MFunctionValue {
    pub m: Complex64,
    pub energy: Complex64,
    pub horizon: f64,
    /// `|m(X) − m(X/2)|`, the change when the horizon is halved.
    pub error_estimate: f64,
}

/// Settings for [`m_plus`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MParams {
    /// Horizon `X`; `None` picks [`auto_horizon`].
    pub horizon: Option<f64>,
    pub step: f64,
    /// Target accuracy; the call fails when the error estimate exceeds
    /// `100·tol`.
    pub tol: f64,
}

impl Default for MParams {
    fn default() -> Self {
        MParams {
            horizon: None,
            step: 0.005,
            tol: 1e-6,
        }
    }
}

/// `clamp(12 / Im √E, 20, 2000)`.
pub fn auto_horizon(energy: Complex64) -> f64 {
    (12.0 / energy.sqrt().im).clamp(20.0, 2000.0)
}

/// Frozen-coefficient seed `i √(E − v)`.
fn seed(energy: Complex64, v: f64) -> Complex64 {
    Complex64::i() * (energy - v).sqrt()
}

/// Integrate the Riccati equation `m' = (V − E) − m²` backwards over the
/// samples, step by step with the exact Möbius map of each block.
fn riccati_backward(values: &[f64], step: f64, energy: Complex64) -> Complex64 {
    let n = values.len() - 1;
    let mut m = seed(energy, values[n]);
    let mut last_v = f64::NAN;
    let (mut c, mut sk, mut ks) = (Complex64::default(), Complex64::default(), Complex64::default());
    for i in (0..n).rev() {
        let v = 0.5 * (values[i] + values[i + 1]);
        if v != last_v {
            // the inverse of [[c, s/k], [−k s, c]] is [[c, −s/k], [k s, c]]
            let b = complex_block(energy, v, step);
            c = b[0];
            sk = b[1];
            ks = -b[2];
            last_v = v;
        }
        m = (ks + c * m) / (c - sk * m);
    }
    m
}

/// `m_+(E)` on the right half-line for the flow through `ω` (Im E > 0).
pub fn m_plus(f: &SamplingFunction, p: &FlowParams, energy: Complex64, params: &MParams) -> Result<MFunctionValue> {
    check_energy(energy)?;
    if !(energy.im > 0.0) {
        return Err(invalid(format!("m-function needs Im E > 0, got {energy}")));
    }
    check_step(params.step)?;
    if !(params.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    f.check_dim(p.dim())?;
    let horizon = params.horizon.unwrap_or_else(|| auto_horizon(energy));
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    // an even number of steps so that X/2 is a sample point
    let half = ((horizon / 2.0 / params.step) - 1e-9).ceil().max(1.0) as usize;
    let n = 2 * half;
    let h = horizon / n as f64;
    let mut x = vec![0.0; p.dim()];
    let values: Vec<f64> = (0..=n)
        .map(|i| {
            p.flow_into(i as f64 * h, &mut x);
            f.eval_coords(&x)
        })
        .collect();
    let m = riccati_backward(&values, h, energy);
    let m_half = riccati_backward(&values[..=half], h, energy);
    let error_estimate = (m - m_half).norm();
    let limit = 100.0 * params.tol;
    if !(error_estimate <= limit) {
        return Err(Error::NonContraction {
            estimate: error_estimate,
            limit,
        });
    }
    if !(m.im > 0.0) {
        return Err(Error::NotHerglotz { im_m: m.im });
    }
    Ok(MFunctionValue {
        m,
        energy,
        horizon,
        error_estimate,
    })
}

/// The seed at `X` pulled back through `M(X)⁻¹`, an independent route to
/// `m_+` using the forward transfer matrix.
pub fn mobius_cross_check(
    f: &SamplingFunction,
    p: &FlowParams,
    energy: Complex64,
    horizon: f64,
    step: f64,
) -> Result<Complex64> {
    check_energy(energy)?;
    check_step(step)?;
    f.check_dim(p.dim())?;
    let half = ((horizon / 2.0 / step) - 1e-9).ceil().max(1.0) as usize;
    let n = 2 * half;
    let h = horizon / n as f64;
    let mut x = vec![0.0; p.dim()];
    let values: Vec<f64> = (0..=n)
        .map(|i| {
            p.flow_into(i as f64 * h, &mut x);
            f.eval_coords(&x)
        })
        .collect();
    let (b, _) = scaled_product(&values, h, energy);
    let mx = seed(energy, values[n]);
    // M⁻¹ = [[d, −b], [−c, a]] applied to (1, m_X)
    let u = b[3] - b[1] * mx;
    let du = -b[2] + b[0] * mx;
    Ok(du / u)
}

/// `Δ(E) = tr M(T, E)` for a trace covering exactly one period.
pub fn floquet_discriminant(periodic_trace: &PotentialTrace, energy: f64) -> Result<f64> {
    let m = propagate(periodic_trace, Complex64::new(energy, 0.0))?;
    Ok(m.trace().re)
}

/// Samples of one period `[0, T]` of `V`, with `⌈T/h⌉` equal steps.
pub fn periodic_trace(f: &SamplingFunction, p: &FlowParams, period: f64, step: f64) -> Result<PotentialTrace> {
    check_step(step)?;
    if !(period > 0.0) || !period.is_finite() {
        return Err(invalid("period must be positive"));
    }
    f.check_dim(p.dim())?;
    let (values, h) = samples_between(f, p, 0.0, period, step);
    debug_assert_eq!(values.len(), sample_count(period, h));
    PotentialTrace::new(values, h, p.omega().clone())
}
