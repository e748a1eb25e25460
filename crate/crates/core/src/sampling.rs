//! Sampling functions on the torus and the potentials they induce along the
//! flow.
//!
//! A [`SamplingFunction`] is a small expression tree: constants,
//! trigonometric polynomials, box-step functions from the perturbation
//! construction, scalar multiples, and mollifications of any of these.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::perturb::BoxStep;
use crate::quadrature::{gauss_legendre, integrate};
use crate::torus::{reduce_unit, FlowParams, TorusPoint};

/// One term `cos·cos(2π k·x) + sin·sin(2π k·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k: Vec<i64>,
    pub cos: f64,
    pub sin: f64,
}

impl TrigTerm {
    pub fn cos(k: Vec<i64>, coeff: f64) -> Self {
        TrigTerm { k, cos: coeff, sin: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SamplingFunction {
    Constant { value: f64 },
    TrigPoly { terms: Vec<TrigTerm> },
    BoxStep(Arc<BoxStep>),
    Scaled { lambda: f64, inner: Box<SamplingFunction> },
    Mollified(Mollified),
}

impl SamplingFunction {
    pub fn constant(value: f64) -> Self {
        SamplingFunction::Constant { value }
    }

    pub fn trig(terms: Vec<TrigTerm>) -> Self {
        SamplingFunction::TrigPoly { terms }
    }

    /// `cos(2πx₁) + … + cos(2πx_d)`.
    pub fn cosine_sum(d: usize) -> Self {
        SamplingFunction::trig(
            (0..d)
                .map(|j| {
                    let mut k = vec![0; d];
                    k[j] = 1;
                    TrigTerm::cos(k, 1.0)
                })
                .collect(),
        )
    }

    pub fn scaled(lambda: f64, inner: SamplingFunction) -> Self {
        SamplingFunction::Scaled {
            lambda,
            inner: Box::new(inner),
        }
    }

    /// Torus dimension the function is tied to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            SamplingFunction::Constant { .. } => None,
            SamplingFunction::TrigPoly { terms } => terms.first().map(|t| t.k.len()),
            SamplingFunction::BoxStep(b) => Some(b.dim()),
            SamplingFunction::Scaled { inner, .. } => inner.dim(),
            SamplingFunction::Mollified(m) => m.inner.dim(),
        }
    }

    /// Check that the function can be evaluated on `T^d`.
    pub fn check_dim(&self, d: usize) -> Result<()> {
        if let SamplingFunction::TrigPoly { terms } = self {
            if let Some(t) = terms.iter().find(|t| t.k.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: t.k.len(),
                });
            }
        }
        match self.dim() {
            Some(fd) if fd != d => Err(Error::DimensionMismatch { expected: d, got: fd }),
            _ => Ok(()),
        }
    }

    pub fn is_continuous(&self) -> bool {
        match self {
            SamplingFunction::Constant { .. }
            | SamplingFunction::TrigPoly { .. }
            | SamplingFunction::Mollified(_) => true,
            SamplingFunction::BoxStep(_) => false,
            SamplingFunction::Scaled { lambda, inner } => *lambda == 0.0 || inner.is_continuous(),
        }
    }

    /// A finite upper bound on `sup |f|`.
    pub fn sup_norm_bound(&self) -> f64 {
        match self {
            SamplingFunction::Constant { value } => value.abs(),
            SamplingFunction::TrigPoly { terms } => terms.iter().map(|t| t.cos.hypot(t.sin)).sum(),
            SamplingFunction::BoxStep(b) => b.sup_norm_bound(),
            SamplingFunction::Scaled { lambda, inner } => lambda.abs() * inner.sup_norm_bound(),
            SamplingFunction::Mollified(m) => m.inner.sup_norm_bound(),
        }
    }

    pub fn evaluate(&self, p: &TorusPoint) -> f64 {
        self.eval_coords(p.coords())
    }

    /// Evaluate at reduced coordinates (`[0,1)^d`).
    pub fn eval_coords(&self, x: &[f64]) -> f64 {
        match self {
            SamplingFunction::Constant { value } => *value,
            SamplingFunction::TrigPoly { terms } => terms
                .iter()
                .map(|t| {
                    let phase: f64 = t.k.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
                    if t.sin == 0.0 {
                        t.cos * (2.0 * PI * phase).cos()
                    } else {
                        let (s, c) = (2.0 * PI * phase).sin_cos();
                        t.cos * c + t.sin * s
                    }
                })
                .sum(),
            SamplingFunction::BoxStep(b) => b.eval_coords(x),
            SamplingFunction::Scaled { lambda, inner } => lambda * inner.eval_coords(x),
            SamplingFunction::Mollified(m) => m.eval_coords(x),
        }
    }

    /// Convolve with the tensor-product mollifier at scale `scale`, using an
    /// `order`-point Gauss–Legendre rule per axis.
    pub fn mollify(&self, scale: f64, order: usize) -> Result<SamplingFunction> {
        Ok(SamplingFunction::Mollified(Mollified::new(self.clone(), scale, order)?))
    }

    /// Integer frequencies carried by the function (empty for constants).
    /// `None` when the function has no finite trigonometric spectrum.
    pub fn trig_support(&self) -> Option<Vec<Vec<i64>>> {
        match self {
            SamplingFunction::Constant { .. } => Some(Vec::new()),
            SamplingFunction::TrigPoly { terms } => Some(
                terms
                    .iter()
                    .filter(|t| (t.cos != 0.0 || t.sin != 0.0) && t.k.iter().any(|&k| k != 0))
                    .map(|t| t.k.clone())
                    .collect(),
            ),
            SamplingFunction::BoxStep(_) => None,
            SamplingFunction::Scaled { lambda, inner } => {
                if *lambda == 0.0 {
                    Some(Vec::new())
                } else {
                    inner.trig_support()
                }
            }
            SamplingFunction::Mollified(m) => m.inner.trig_support(),
        }
    }
}

/// Normalizing constant `C` of the bump `C·exp(1/(x²−1))`.
pub fn mollifier_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / integrate(bump, -1.0, 1.0, 64, 20))
}

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (1.0 / (x * x - 1.0)).exp()
    } else {
        0.0
    }
}

/// The unit-mass bump supported on `(-1, 1)`.
pub fn mollifier_eta(x: f64) -> f64 {
    mollifier_constant() * bump(x)
}

/// `η_ε(x) = η(x/ε)/ε`.
pub fn mollifier_eta_eps(x: f64, eps: f64) -> f64 {
    mollifier_eta(x / eps) / eps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MollifiedRecord {
    inner: Box<SamplingFunction>,
    scale: f64,
    order: usize,
}

/// `η_ε ⊗ … ⊗ η_ε ∗ f` evaluated by product quadrature.
///
/// The per-axis weights are `w_i η(z_i)` renormalized to sum to one, so the
/// discrete kernel is a convex combination of translates and fixes constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MollifiedRecord", into = "MollifiedRecord")]
pub struct Mollified {
    inner: Box<SamplingFunction>,
    scale: f64,
    order: usize,
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<MollifiedRecord> for Mollified {
    type Error = Error;

    fn try_from(r: MollifiedRecord) -> Result<Self> {
        Mollified::new(*r.inner, r.scale, r.order)
    }
}

impl From<Mollified> for MollifiedRecord {
    fn from(m: Mollified) -> Self {
        MollifiedRecord {
            inner: m.inner,
            scale: m.scale,
            order: m.order,
        }
    }
}

impl Mollified {
    pub fn new(inner: SamplingFunction, scale: f64, order: usize) -> Result<Self> {
        if !(scale > 0.0 && scale < 0.5) {
            return Err(invalid(format!("mollification scale must lie in (0, 0.5), got {scale}")));
        }
        if order < 8 {
            return Err(invalid(format!("quadrature order must be at least 8, got {order}")));
        }
        let (nodes, w) = gauss_legendre(order);
        let raw: Vec<f64> = nodes.iter().zip(&w).map(|(z, w)| w * mollifier_eta(*z)).collect();
        let total: f64 = raw.iter().sum();
        Ok(Mollified {
            inner: Box::new(inner),
            scale,
            order,
            offsets: nodes.iter().map(|z| z * scale).collect(),
            weights: raw.iter().map(|w| w / total).collect(),
        })
    }

    pub fn inner(&self) -> &SamplingFunction {
        &self.inner
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn eval_coords(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let q = self.order;
        let mut idx = vec![0usize; d];
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            for j in 0..d {
                w *= self.weights[idx[j]];
                y[j] = reduce_unit(x[j] - self.offsets[idx[j]]);
            }
            acc += w * self.inner.eval_coords(&y);
            let mut j = 0;
            loop {
                if j == d {
                    return acc;
                }
                idx[j] += 1;
                if idx[j] < q {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }
}

/// Visit every node `i/n` of the uniform `n^d` grid, row by row, and collect
/// one reduction per row (first coordinate fixed) in row order.
fn grid_rows<F>(d: usize, n: usize, per_point: F) -> Vec<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|row| {
            let mut x = vec![0.0; d];
            x[0] = row as f64 / n as f64;
            let inner = n.pow(d as u32 - 1);
            let mut sup = 0.0f64;
            let mut sum = 0.0;
            for mut idx in 0..inner {
                for j in (1..d).rev() {
                    x[j] = (idx % n) as f64 / n as f64;
                    idx /= n;
                }
                let v = per_point(&x);
                sup = sup.max(v);
                sum += v;
            }
            (sup, sum)
        })
        .collect()
}

fn grid_dim(f: &SamplingFunction, g: &SamplingFunction, d: usize, grid_n: usize) -> Result<()> {
    if grid_n < 2 {
        return Err(invalid("grid size must be at least 2"));
    }
    if d == 0 {
        return Err(invalid("torus dimension must be at least 1"));
    }
    f.check_dim(d)?;
    g.check_dim(d)
}

/// `max |f − g|` over the uniform `grid_n^d` grid; a lower bound for the sup norm.
pub fn sup_distance(f: &SamplingFunction, g: &SamplingFunction, d: usize, grid_n: usize) -> Result<f64> {
    grid_dim(f, g, d, grid_n)?;
    let rows = grid_rows(d, grid_n, |x| (f.eval_coords(x) - g.eval_coords(x)).abs());
    Ok(rows.iter().fold(0.0, |m, r| m.max(r.0)))
}

/// Mean of `|f − g|` over the uniform `grid_n^d` grid.
pub fn l1_distance(f: &SamplingFunction, g: &SamplingFunction, d: usize, grid_n: usize) -> Result<f64> {
    grid_dim(f, g, d, grid_n)?;
    let rows = grid_rows(d, grid_n, |x| (f.eval_coords(x) - g.eval_coords(x)).abs());
    let total: f64 = rows.iter().map(|r| r.1).sum();
    Ok(total / (grid_n as f64).powi(d as i32))
}

/// Samples `V(i·h) = f(ω + i·h·α)`, `i = 0..=⌊X/h⌋`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTrace {
    pub values: Vec<f64>,
    pub step: f64,
    pub origin: TorusPoint,
}

impl PotentialTrace {
    pub fn new(values: Vec<f64>, step: f64, origin: TorusPoint) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if !(step > 0.0) {
            return Err(invalid("trace step must be positive"));
        }
        Ok(PotentialTrace { values, step, origin })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Length covered by the samples, `(len − 1)·h`.
    pub fn length(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 * self.step
    }

    pub fn scaled(&self, lambda: f64) -> PotentialTrace {
        PotentialTrace {
            values: self.values.iter().map(|v| lambda * v).collect(),
            step: self.step,
            origin: self.origin.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,V\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e}", i as f64 * self.step, v);
        }
        out
    }
}

/// Number of samples `⌊X/h⌋ + 1`, tolerant of `X/h` landing a hair below an
/// integer.
pub(crate) fn sample_count(length: f64, step: f64) -> usize {
    let r = length / step;
    let n = r.round();
    if (r - n).abs() < 1e-9 * n.max(1.0) {
        n as usize + 1
    } else {
        r.floor() as usize + 1
    }
}

pub fn trace_potential(f: &SamplingFunction, p: &FlowParams, length: f64, step: f64) -> Result<PotentialTrace> {
    if !(step > 0.0 && step <= 0.1) {
        return Err(invalid(format!("trace step must lie in (0, 0.1], got {step}")));
    }
    if !(length >= step) || !length.is_finite() {
        return Err(invalid(format!("trace length must be finite and at least the step, got {length}")));
    }
    f.check_dim(p.dim())?;
    let n = sample_count(length, step);
    let mut x = vec![0.0; p.dim()];
    let values = (0..n)
        .map(|i| {
            p.flow_into(i as f64 * step, &mut x);
            f.eval_coords(&x)
        })
        .collect();
    PotentialTrace::new(values, step, p.omega().clone())
}

/// Grid-aligned `t ∈ (0, t_max]` with `sup |V(x) − V(x − t)| < ε` over the
/// overlap of the trace with its shift.
pub fn find_almost_periods(trace: &PotentialTrace, eps: f64, t_max: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    if !(t_max > 0.0) || t_max > trace.length() / 2.0 + 1e-12 {
        return Err(invalid(format!(
            "t_max must lie in (0, X/2] = (0, {}], got {t_max}",
            trace.length() / 2.0
        )));
    }
    let v = &trace.values;
    let max_lag = ((t_max / trace.step) + 1e-9).floor() as usize;
    let hits: Vec<usize> = (1..=max_lag)
        .into_par_iter()
        .filter(|&lag| v[lag..].iter().zip(v).all(|(a, b)| (a - b).abs() < eps))
        .collect();
    Ok(hits.into_iter().map(|lag| lag as f64 * trace.step).collect())
}
