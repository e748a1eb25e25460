//! The zero-Lyapunov measure `M_R(f)`, its coupling integral, and the
//! mollification experiment.
//!
//! `L(E) = 0` cannot be observed numerically, so an energy counts as zero
//! Lyapunov when the growth estimate is below a threshold `tau`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lyapunov::{sweep_curve, LyapunovMethod, LyapunovParams};
use crate::sampling::{l1_distance, sup_distance, SamplingFunction};
use crate::torus::FlowParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MREstimate {
    #[serde(rename = "R")]
    pub r: f64,
    pub tau: f64,
    pub grid_n: usize,
    /// `(2R/grid_n) · #{flags}`.
    pub measure: f64,
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
    /// `L(E) < tau`.
    pub flags: Vec<bool>,
    /// Energies where the estimator failed; they are not flagged.
    pub failures: usize,
}

impl MREstimate {
    /// Same sweep, different threshold.
    pub fn rethreshold(&self, tau: f64) -> MREstimate {
        let flags: Vec<bool> = self.values.iter().map(|&v| v < tau).collect();
        MREstimate {
            tau,
            measure: measure_of(self.r, self.grid_n, &flags),
            flags,
            ..self.clone()
        }
    }

    /// Columns `E,L,flag`.
    pub fn flags_csv(&self) -> String {
        let mut out = String::from("E,L,flag\n");
        for ((e, l), f) in self.energies.iter().zip(&self.values).zip(&self.flags) {
            let _ = writeln!(out, "{:.16e},{:.16e},{}", e, l, u8::from(*f));
        }
        out
    }
}

fn measure_of(r: f64, grid_n: usize, flags: &[bool]) -> f64 {
    2.0 * r / grid_n as f64 * flags.iter().filter(|&&f| f).count() as f64
}

/// Midpoints of `grid_n` equal cells covering `[−R, R]`.
pub fn mr_energies(r: f64, grid_n: usize) -> Vec<f64> {
    let w = 2.0 * r / grid_n as f64;
    (0..grid_n).map(|i| -r + (i as f64 + 0.5) * w).collect()
}

pub fn estimate_mr(
    f: &SamplingFunction,
    p: &FlowParams,
    r: f64,
    tau: f64,
    grid_n: usize,
    params: &LyapunovParams,
) -> Result<MREstimate> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("R must be positive, got {r}")));
    }
    if !(tau > 0.0) {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    if grid_n < 16 {
        return Err(invalid(format!("grid_n must be at least 16, got {grid_n}")));
    }
    let energies = mr_energies(r, grid_n);
    let grid: Vec<Complex64> = energies.iter().map(|&e| Complex64::new(e, 0.0)).collect();
    let curve = sweep_curve(f, p, &grid, LyapunovMethod::Growth, params)?;
    let values: Vec<f64> = curve
        .points
        .iter()
        .map(|pt| pt.estimate.as_ref().map_or(f64::NAN, |e| e.value))
        .collect();
    let flags: Vec<bool> = values.iter().map(|&v| v < tau).collect();
    Ok(MREstimate {
        r,
        tau,
        grid_n,
        measure: measure_of(r, grid_n, &flags),
        failures: values.iter().filter(|v| v.is_nan()).count(),
        energies,
        values,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingIntegralEstimate {
    #[serde(rename = "Lambda")]
    pub lambda_max: f64,
    pub lambda_nodes: Vec<f64>,
    pub per_node: Vec<MREstimate>,
    pub integral: f64,
}

/// Trapezoid rule for `∫_0^Λ M_R(λf) dλ` on `lambda_n` equal intervals.
#[allow(clippy::too_many_arguments)]
pub fn coupling_integral(
    f: &SamplingFunction,
    p: &FlowParams,
    r: f64,
    lambda_max: f64,
    lambda_n: usize,
    tau: f64,
    grid_n: usize,
    params: &LyapunovParams,
) -> Result<CouplingIntegralEstimate> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(invalid(format!("Lambda must be positive, got {lambda_max}")));
    }
    if lambda_n < 4 {
        return Err(invalid(format!("lambda_n must be at least 4, got {lambda_n}")));
    }
    let nodes: Vec<f64> = (0..=lambda_n)
        .map(|i| lambda_max * i as f64 / lambda_n as f64)
        .collect();
    let per_node = nodes
        .iter()
        .map(|&lam| estimate_mr(&SamplingFunction::scaled(lam, f.clone()), p, r, tau, grid_n, params))
        .collect::<Result<Vec<_>>>()?;
    let w = lambda_max / lambda_n as f64;
    let integral = per_node
        .iter()
        .enumerate()
        .map(|(i, est)| {
            let weight = if i == 0 || i == lambda_n { 0.5 } else { 1.0 };
            weight * est.measure
        })
        .sum::<f64>()
        * w;
    Ok(CouplingIntegralEstimate {
        lambda_max,
        lambda_nodes: nodes,
        per_node,
        integral,
    })
}

/// Settings for [`semicontinuity_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicontinuityParams {
    /// Strictly decreasing mollification scales.
    pub scales: Vec<f64>,
    pub quadrature_order: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub tau: f64,
    pub grid_n: usize,
    /// Grid size per axis for the distance scans.
    pub distance_grid: usize,
    /// `(Λ, lambda_n)` when the coupling integral should be reported.
    pub coupling: Option<(f64, usize)>,
    pub lyapunov: LyapunovParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicontinuityRow {
    pub eps_m: f64,
    pub l1_to_ftilde: f64,
    pub sup_to_f: f64,
    pub mr: f64,
    pub coupling_integral: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicontinuityReport {
    pub rows: Vec<SemicontinuityRow>,
}

impl SemicontinuityReport {
    /// Columns `eps_m,l1_to_ftilde,sup_to_f,mr,coupling_integral`; a missing
    /// coupling integral is written as `NaN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps_m,l1_to_ftilde,sup_to_f,mr,coupling_integral\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.eps_m,
                r.l1_to_ftilde,
                r.sup_to_f,
                r.mr,
                r.coupling_integral.unwrap_or(f64::NAN)
            );
        }
        out
    }
}

/// Mollify `f_tilde` at each scale and tabulate distances and `M_R`. No
/// verdict is drawn.
pub fn semicontinuity_experiment(
    f_tilde: &SamplingFunction,
    f_original: &SamplingFunction,
    p: &FlowParams,
    params: &SemicontinuityParams,
) -> Result<SemicontinuityReport> {
    if params.scales.len() < 3 {
        return Err(invalid("need at least three mollification scales"));
    }
    if params.scales.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("mollification scales must be strictly decreasing"));
    }
    let d = p.dim();
    let rows = params
        .scales
        .iter()
        .map(|&eps_m| {
            let g = f_tilde.mollify(eps_m, params.quadrature_order)?;
            let l1 = l1_distance(&g, f_tilde, d, params.distance_grid)?;
            let sup = sup_distance(&g, f_original, d, params.distance_grid)?;
            let mr = estimate_mr(&g, p, params.r, params.tau, params.grid_n, &params.lyapunov)?.measure;
            let coupling = match params.coupling {
                Some((lam, n)) => Some(
                    coupling_integral(&g, p, params.r, lam, n, params.tau, params.grid_n, &params.lyapunov)?.integral,
                ),
                None => None,
            };
            Ok(SemicontinuityRow {
                eps_m,
                l1_to_ftilde: l1,
                sup_to_f: sup,
                mr,
                coupling_integral: coupling,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SemicontinuityReport { rows })
}
