//! Lyapunov exponent estimators and energy sweeps.
//!
//! Two estimators are provided: the growth rate `(1/X) log ‖M(X, E, ω)‖`
//! averaged over base points, and `−∫ Re m_+(E, ω) dω` for energies off the
//! real axis.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::propagation::{log_norm, m_plus, MParams, MAX_STEP};
use crate::sampling::{trace_potential, SamplingFunction};
use crate::torus::{sample_omegas, FlowParams, OmegaScheme, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LyapunovMethod {
    Growth,
    MIntegral,
}

impl LyapunovMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            LyapunovMethod::Growth => "growth",
            LyapunovMethod::MIntegral => "m-integral",
        }
    }
}

/// Horizon, step, and base-point sampling shared by both estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub horizon: f64,
    pub step: f64,
    pub omega_count: usize,
    pub omega_scheme: OmegaScheme,
    pub seed: u64,
    /// Accuracy target of the m-function (m-integral method only).
    pub m_tol: f64,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        LyapunovParams {
            horizon: 1000.0,
            step: 0.005,
            omega_count: 16,
            omega_scheme: OmegaScheme::LowDiscrepancy,
            seed: 0,
            m_tol: 1e-6,
        }
    }
}

impl LyapunovParams {
    pub fn omegas(&self, d: usize) -> Result<Vec<TorusPoint>> {
        sample_omegas(d, self.omega_count, self.omega_scheme, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub energy: Complex64,
    /// Mean estimate clamped at zero.
    pub value: f64,
    /// Mean estimate before clamping.
    pub raw: f64,
    pub method: LyapunovMethod,
    pub horizon: f64,
    pub omega_count: usize,
    /// Sample standard deviation across base points.
    pub spread: f64,
}

fn check_common(p: &FlowParams, f: &SamplingFunction, horizon: f64, step: f64, omegas: &[TorusPoint]) -> Result<()> {
    if omegas.is_empty() {
        return Err(invalid("need at least one base point"));
    }
    if let Some(w) = omegas.iter().find(|w| w.dim() != p.dim()) {
        return Err(invalid(format!("base point of dimension {} on T^{}", w.dim(), p.dim())));
    }
    if !(step > 0.0 && step <= MAX_STEP) {
        return Err(invalid(format!("step must lie in (0, {MAX_STEP}], got {step}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    f.check_dim(p.dim())
}

fn summarize(energy: Complex64, samples: &[f64], method: LyapunovMethod, horizon: f64) -> LyapunovEstimate {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let spread = if samples.len() > 1 {
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    LyapunovEstimate {
        energy,
        value: mean.max(0.0),
        raw: mean,
        method,
        horizon,
        omega_count: samples.len(),
        spread,
    }
}

fn growth_from_traces(energy: Complex64, traces: &[Vec<f64>], step: f64, horizon: f64) -> LyapunovEstimate {
    let samples: Vec<f64> = traces.iter().map(|v| log_norm(v, step, energy) / horizon).collect();
    summarize(energy, &samples, LyapunovMethod::Growth, horizon)
}

fn traces_for(f: &SamplingFunction, p: &FlowParams, horizon: f64, step: f64, omegas: &[TorusPoint]) -> Result<Vec<Vec<f64>>> {
    omegas
        .par_iter()
        .map(|w| Ok(trace_potential(f, &p.with_omega(w.clone()), horizon, step)?.values))
        .collect()
}

/// Mean over `omegas` of `(1/X) log ‖M(X, E, ω)‖`.
pub fn lyapunov_growth(
    f: &SamplingFunction,
    p: &FlowParams,
    energy: Complex64,
    horizon: f64,
    step: f64,
    omegas: &[TorusPoint],
) -> Result<LyapunovEstimate> {
    check_common(p, f, horizon, step, omegas)?;
    let traces = traces_for(f, p, horizon, step, omegas)?;
    Ok(growth_from_traces(energy, &traces, step, horizon))
}

/// `−mean_ω Re m_+(E, ω)` for `Im E > 0`.
pub fn lyapunov_via_m(
    f: &SamplingFunction,
    p: &FlowParams,
    energy: Complex64,
    horizon: f64,
    step: f64,
    omegas: &[TorusPoint],
    tol: f64,
) -> Result<LyapunovEstimate> {
    check_common(p, f, horizon, step, omegas)?;
    let params = MParams {
        horizon: Some(horizon),
        step,
        tol,
    };
    let samples: Vec<f64> = omegas
        .par_iter()
        .map(|w| m_plus(f, &p.with_omega(w.clone()), energy, &params).map(|m| -m.m.re))
        .collect::<Result<_>>()?;
    Ok(summarize(energy, &samples, LyapunovMethod::MIntegral, horizon))
}

/// One grid point of a sweep; `estimate` is absent when the estimator failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub energy: Complex64,
    pub estimate: Option<LyapunovEstimate>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCurve {
    pub method: LyapunovMethod,
    pub step: f64,
    pub points: Vec<CurvePoint>,
}

impl LyapunovCurve {
    pub fn values(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.estimate.as_ref().map(|e| e.value)).collect()
    }

    /// Columns `E_re,E_im,L,spread,method,X,h,omega_count`; failed points
    /// carry `NaN` values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("E_re,E_im,L,spread,method,X,h,omega_count\n");
        for pt in &self.points {
            let (l, spread, x, count) = match &pt.estimate {
                Some(e) => (e.value, e.spread, e.horizon, e.omega_count),
                None => (f64::NAN, f64::NAN, f64::NAN, 0),
            };
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{}",
                pt.energy.re,
                pt.energy.im,
                l,
                spread,
                self.method.as_str(),
                x,
                self.step,
                count
            );
        }
        out
    }
}

/// Independent estimates on an energy grid with strictly increasing real
/// parts. Results do not depend on the thread count.
pub fn sweep_curve(
    f: &SamplingFunction,
    p: &FlowParams,
    grid: &[Complex64],
    method: LyapunovMethod,
    params: &LyapunovParams,
) -> Result<LyapunovCurve> {
    if grid.is_empty() {
        return Err(invalid("energy grid is empty"));
    }
    if grid.windows(2).any(|w| !(w[1].re > w[0].re)) {
        return Err(invalid("energy grid must be strictly increasing"));
    }
    let omegas = params.omegas(p.dim())?;
    check_common(p, f, params.horizon, params.step, &omegas)?;
    let points: Vec<CurvePoint> = match method {
        LyapunovMethod::Growth => {
            let traces = traces_for(f, p, params.horizon, params.step, &omegas)?;
            grid.par_iter()
                .map(|&e| CurvePoint {
                    energy: e,
                    estimate: Some(growth_from_traces(e, &traces, params.step, params.horizon)),
                    error: None,
                })
                .collect()
        }
        LyapunovMethod::MIntegral => grid
            .par_iter()
            .map(|&e| match lyapunov_via_m(f, p, e, params.horizon, params.step, &omegas, params.m_tol) {
                Ok(est) => CurvePoint {
                    energy: e,
                    estimate: Some(est),
                    error: None,
                },
                Err(err) => CurvePoint {
                    energy: e,
                    estimate: None,
                    error: Some(err.to_string()),
                },
            })
            .collect(),
    };
    Ok(LyapunovCurve {
        method,
        step: params.step,
        points,
    })
}

/// `count` real energies evenly spaced over `[min, max]`, shifted by `i·shift`.
pub fn energy_grid(min: f64, max: f64, count: usize, shift: f64) -> Result<Vec<Complex64>> {
    if count == 0 || !(min.is_finite() && max.is_finite()) {
        return Err(invalid("energy grid needs a finite range and at least one point"));
    }
    if count == 1 {
        return Ok(vec![Complex64::new(min, shift)]);
    }
    if !(max > min) {
        return Err(invalid("energy grid needs max > min"));
    }
    Ok((0..count)
        .map(|i| Complex64::new(min + (max - min) * i as f64 / (count - 1) as f64, shift))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn flow1() -> FlowParams {
        FlowParams::new(vec![1.0], vec![0.0]).unwrap()
    }

    fn flow2() -> FlowParams {
        FlowParams::new(vec![1.0, 2f64.sqrt()], vec![0.0, 0.0]).unwrap()
    }

    fn origin() -> Vec<TorusPoint> {
        vec![TorusPoint::origin(1)]
    }

    #[test]
    fn free_growth_closed_forms() {
        let zero = SamplingFunction::constant(0.0);
        let l = lyapunov_growth(&zero, &flow1(), c(-4.0, 0.0), 200.0, 0.01, &origin()).unwrap();
        assert!((l.value - 2.0).abs() < 0.02);
        let l = lyapunov_growth(&zero, &flow1(), c(1.0, 0.0), 1000.0, 0.01, &origin()).unwrap();
        assert!(l.value <= 0.05);
        let two = SamplingFunction::constant(2.0);
        let l = lyapunov_growth(&two, &flow1(), c(1.0, 0.0), 1000.0, 0.01, &origin()).unwrap();
        assert!((l.value - 1.0).abs() < 0.02);
    }

    #[test]
    fn huge_growth_does_not_overflow() {
        let f = SamplingFunction::constant(100.0);
        let l = lyapunov_growth(&f, &flow1(), c(0.0, 0.0), 1000.0, 0.01, &origin()).unwrap();
        assert!((l.value - 10.0).abs() < 0.01, "{}", l.value);
    }

    #[test]
    fn m_integral_closed_forms() {
        let zero = SamplingFunction::constant(0.0);
        let l = lyapunov_via_m(&zero, &flow1(), c(0.0, 1.0), 50.0, 0.01, &origin(), 1e-6).unwrap();
        assert!((l.value - 0.5f64.sqrt()).abs() < 1e-10);
        let l = lyapunov_via_m(&zero, &flow1(), c(4.0, 1.0), 100.0, 0.01, &origin(), 1e-6).unwrap();
        assert!((l.value - 0.24809839340235612).abs() < 1e-10);
        let shifted = SamplingFunction::constant(3.0);
        let m = lyapunov_via_m(&shifted, &flow1(), c(3.0, 1.0), 50.0, 0.01, &origin(), 1e-6).unwrap();
        assert!((m.value - 0.5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn conjugate_energies_agree() {
        let f = SamplingFunction::cosine_sum(2);
        let omegas = sample_omegas(2, 4, OmegaScheme::LowDiscrepancy, 0).unwrap();
        let a = lyapunov_growth(&f, &flow2(), c(0.7, 0.4), 200.0, 0.01, &omegas).unwrap();
        let b = lyapunov_growth(&f, &flow2(), c(0.7, -0.4), 200.0, 0.01, &omegas).unwrap();
        assert!((a.raw - b.raw).abs() < 1e-10);
    }

    #[test]
    fn scaled_function_matches_scaled_trace() {
        let f = SamplingFunction::cosine_sum(2);
        let g = SamplingFunction::scaled(1.7, f.clone());
        let omegas = sample_omegas(2, 3, OmegaScheme::LowDiscrepancy, 0).unwrap();
        let direct = lyapunov_growth(&g, &flow2(), c(0.3, 0.0), 100.0, 0.01, &omegas).unwrap();
        let traces: Vec<Vec<f64>> = omegas
            .iter()
            .map(|w| {
                trace_potential(&f, &flow2().with_omega(w.clone()), 100.0, 0.01)
                    .unwrap()
                    .scaled(1.7)
                    .values
            })
            .collect();
        let via_trace = growth_from_traces(c(0.3, 0.0), &traces, 0.01, 100.0);
        assert_eq!(direct, via_trace);
    }

    #[test]
    fn sweep_free_grid() {
        let params = LyapunovParams {
            horizon: 500.0,
            step: 0.01,
            omega_count: 1,
            ..Default::default()
        };
        let grid = energy_grid(-1.0, 1.0, 3, 0.0).unwrap();
        let curve = sweep_curve(&SamplingFunction::constant(0.0), &flow1(), &grid, LyapunovMethod::Growth, &params)
            .unwrap();
        let v: Vec<f64> = curve.values().into_iter().map(Option::unwrap).collect();
        assert!((v[0] - 1.0).abs() < 0.02 && v[1] < 0.05 && v[2] < 0.05);
        let single = sweep_curve(
            &SamplingFunction::constant(0.0),
            &flow1(),
            &grid[..1],
            LyapunovMethod::Growth,
            &params,
        )
        .unwrap();
        let direct = lyapunov_growth(
            &SamplingFunction::constant(0.0),
            &flow1(),
            grid[0],
            500.0,
            0.01,
            &params.omegas(1).unwrap(),
        )
        .unwrap();
        assert_eq!(single.points[0].estimate.as_ref().unwrap(), &direct);
        assert!(sweep_curve(
            &SamplingFunction::constant(0.0),
            &flow1(),
            &[c(1.0, 0.0), c(0.0, 0.0)],
            LyapunovMethod::Growth,
            &params
        )
        .is_err());
    }

    #[test]
    fn sweep_records_failures() {
        let params = LyapunovParams {
            horizon: 5.0,
            step: 0.01,
            omega_count: 2,
            m_tol: 1e-12,
            ..Default::default()
        };
        let grid = vec![c(0.5, 0.05), c(1.0, 2.0)];
        let curve = sweep_curve(&SamplingFunction::cosine_sum(2), &flow2(), &grid, LyapunovMethod::MIntegral, &params)
            .unwrap();
        assert!(curve.points[0].estimate.is_none() && curve.points[0].error.is_some());
        assert!(curve.to_csv().lines().nth(1).unwrap().contains("NaN"));
    }

    #[test]
    fn sweep_is_thread_count_independent() {
        let params = LyapunovParams {
            horizon: 100.0,
            step: 0.01,
            omega_count: 4,
            ..Default::default()
        };
        let grid = energy_grid(-1.0, 3.0, 12, 0.0).unwrap();
        let f = SamplingFunction::cosine_sum(2);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sweep_curve(&f, &flow2(), &grid, LyapunovMethod::Growth, &params).unwrap().to_csv())
        };
        assert_eq!(run(1), run(8));
    }
}
