use std::path::Path;

use quasispec_core::{
    FlowParams, LyapunovMethod, LyapunovParams, OmegaScheme, SamplingFunction, VerifyParams,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

/// Everything a run depends on. Missing sections and fields take the values
/// of [`Default`], and the resolved form is what gets fingerprinted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub flow: FlowParams,
    pub f: SamplingFunction,
    pub energy: EnergyConfig,
    pub lyapunov: LyapunovConfig,
    pub mfun: MfunConfig,
    pub mr: MrConfig,
    pub coupling: CouplingConfig,
    pub perturb: PerturbConfig,
    pub pieces: PiecesConfig,
    pub mollify: MollifyConfig,
    pub semicontinuity: SemicontinuityConfig,
    pub minimality: MinimalityConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            flow: FlowParams::new(vec![1.0, std::f64::consts::SQRT_2], vec![0.0, 0.0])
                .expect("default flow is valid"),
            f: SamplingFunction::cosine_sum(2),
            energy: EnergyConfig::default(),
            lyapunov: LyapunovConfig::default(),
            mfun: MfunConfig::default(),
            mr: MrConfig::default(),
            coupling: CouplingConfig::default(),
            perturb: PerturbConfig::default(),
            pieces: PiecesConfig::default(),
            mollify: MollifyConfig::default(),
            semicontinuity: SemicontinuityConfig::default(),
            minimality: MinimalityConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    /// Imaginary part added to every grid energy.
    pub shift: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            min: -4.0,
            max: 4.0,
            count: 200,
            shift: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovConfig {
    pub method: LyapunovMethod,
    pub horizon: f64,
    pub step: f64,
    pub omega_count: usize,
    pub omega_scheme: OmegaScheme,
    pub seed: u64,
    pub m_tol: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        let p = LyapunovParams::default();
        LyapunovConfig {
            method: LyapunovMethod::Growth,
            horizon: p.horizon,
            step: p.step,
            omega_count: p.omega_count,
            omega_scheme: p.omega_scheme,
            seed: p.seed,
            m_tol: p.m_tol,
        }
    }
}

impl LyapunovConfig {
    pub fn params(&self) -> LyapunovParams {
        LyapunovParams {
            horizon: self.horizon,
            step: self.step,
            omega_count: self.omega_count,
            omega_scheme: self.omega_scheme,
            seed: self.seed,
            m_tol: self.m_tol,
        }
    }
}

/// `m_+` at one energy for every base point of the lyapunov section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfunConfig {
    pub energy_re: f64,
    pub energy_im: f64,
    /// `null` selects the horizon from `Im √E`.
    pub horizon: Option<f64>,
    pub step: f64,
    pub tol: f64,
}

impl Default for MfunConfig {
    fn default() -> Self {
        MfunConfig {
            energy_re: 2.0,
            energy_im: 1.0,
            horizon: None,
            step: 0.005,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MrConfig {
    #[serde(rename = "R")]
    pub r: f64,
    pub tau: f64,
    pub grid_n: usize,
}

impl Default for MrConfig {
    fn default() -> Self {
        MrConfig {
            r: 2.0,
            tau: 0.05,
            grid_n: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(rename = "Lambda")]
    pub lambda_max: f64,
    /// Number of trapezoid intervals on `[0, Λ]`.
    pub lambda_n: usize,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            lambda_max: 2.0,
            lambda_n: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub eps: f64,
    pub n: usize,
    /// Add small generic cosines when the frequencies of `f` span too little.
    pub adjust_aperiodic: bool,
    pub symbols: usize,
    pub max_period: usize,
    pub ell_factor: f64,
    pub sup_grid: usize,
    pub scan_points: usize,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        let v = VerifyParams::default();
        PerturbConfig {
            eps: 0.4,
            n: 4,
            adjust_aperiodic: true,
            symbols: v.symbols,
            max_period: v.max_period,
            ell_factor: v.ell_factor,
            sup_grid: v.sup_grid,
            scan_points: v.scan_points,
        }
    }
}

impl PerturbConfig {
    pub fn verify_params(&self) -> VerifyParams {
        VerifyParams {
            symbols: self.symbols,
            max_period: self.max_period,
            ell_factor: self.ell_factor,
            sup_grid: self.sup_grid,
            scan_points: self.scan_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PiecesConfig {
    /// JSONL itinerary; `null` builds one from the perturb section.
    pub input: Option<String>,
    /// Window length; `null` means `ell_factor` times the longest piece.
    pub ell: Option<f64>,
    pub ell_factor: f64,
    /// Symbols examined; `null` means all.
    pub prefix: Option<usize>,
    pub max_period: usize,
    pub reversed: bool,
}

impl Default for PiecesConfig {
    fn default() -> Self {
        PiecesConfig {
            input: None,
            ell: None,
            ell_factor: 3.0,
            prefix: None,
            max_period: 200,
            reversed: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MollifySource {
    /// The configured `f`.
    F,
    /// The box-step perturbation built from the perturb section.
    Fepsn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MollifyConfig {
    pub source: MollifySource,
    pub scales: Vec<f64>,
    pub order: usize,
    pub distance_grid: usize,
}

impl Default for MollifyConfig {
    fn default() -> Self {
        MollifyConfig {
            source: MollifySource::Fepsn,
            scales: vec![0.1, 0.05, 0.025, 0.0125],
            order: 32,
            distance_grid: 64,
        }
    }
}

/// Mollified box-step sweep. `R` and `tau` come from the mr section and the
/// base-point scheme from the lyapunov section; the horizon is kept short
/// because every potential sample costs `order^d` box evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemicontinuityConfig {
    pub scales: Vec<f64>,
    pub order: usize,
    pub distance_grid: usize,
    pub grid_n: usize,
    pub horizon: f64,
    pub step: f64,
    pub omega_count: usize,
    pub include_coupling: bool,
}

impl Default for SemicontinuityConfig {
    fn default() -> Self {
        SemicontinuityConfig {
            scales: vec![0.1, 0.05, 0.025],
            order: 32,
            distance_grid: 64,
            grid_n: 32,
            horizon: 100.0,
            step: 0.01,
            omega_count: 4,
            include_coupling: false,
        }
    }
}

/// Integer relations `k·α ≈ 0` are searched up to `|k|_∞ ≤ bound`; finding
/// none is the operational stand-in for a minimal flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimalityConfig {
    pub bound: u32,
    pub tol: f64,
}

impl Default for MinimalityConfig {
    fn default() -> Self {
        MinimalityConfig { bound: 10, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Used when `--out` is not given; `null` means the working directory.
    pub dir: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.f.check_dim(self.flow.dim())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
