use std::path::Path;

use ifes::banach::{SolveReport, StabilityReport};
use ifes::classes::{HypothesisReport, MembershipVerdict};
use ifes::equation::Residual;
use ifes::tarski::UniquenessReport;
use ifes::{DerivedConstants64, TarskiResult64};
use serde::Serialize;

use crate::specfile::Method;

#[derive(Clone, Debug, Serialize)]
pub struct Resolution {
    pub grid: usize,
    pub levels: Option<usize>,
    pub mode: &'static str,
    pub tol: f64,
    pub max_iter: usize,
    /// Verification points per grid cell.
    pub refine: usize,
}

/// [`SolveReport`] without the per-step history.
#[derive(Clone, Debug, Serialize)]
pub struct BanachSummary {
    pub iterations: usize,
    pub final_step: f64,
    pub converged: bool,
    pub residual: Residual<f64>,
    pub class_verdict: MembershipVerdict<f64>,
    pub contraction_estimate: f64,
    pub clamp_count: usize,
}

impl From<&SolveReport<f64>> for BanachSummary {
    fn from(r: &SolveReport<f64>) -> Self {
        Self {
            iterations: r.iterations,
            final_step: r.final_step,
            converged: r.converged,
            residual: r.residual,
            class_verdict: r.class_verdict.clone(),
            contraction_estimate: r.contraction_estimate,
            clamp_count: r.clamp_count,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityCase {
    pub size: f64,
    pub perturbation: String,
    pub report: StabilityReport<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub nodes: usize,
    pub residual: Residual<f64>,
    pub monotone: bool,
    /// All values inside `[c, d]`.
    pub self_map: bool,
    /// Smallest value, compared against `δ` for the order-preserving class.
    pub min_value: f64,
    pub above_floor: bool,
    pub class_verdict: Option<MembershipVerdict<f64>>,
}

/// Everything a run produced, written as `report.json`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunReport {
    pub command: String,
    pub spec: Option<String>,
    pub method: Option<Method>,
    /// Statement the run is checking, for bundled examples.
    pub claim: Option<String>,
    pub hypotheses: Option<HypothesisReport>,
    pub constants: Option<DerivedConstants64>,
    pub banach: Option<BanachSummary>,
    pub stability: Vec<StabilityCase>,
    pub tarski: Option<TarskiResult64>,
    pub uniqueness: Option<UniquenessReport<f64>>,
    pub verify: Option<VerifyReport>,
    pub notes: Vec<String>,
    pub files: Vec<String>,
    pub resolution: Option<Resolution>,
    pub seed: u64,
    pub wall_clock_s: f64,
    pub exit_code: u8,
}

impl RunReport {
    pub fn new(command: &str, seed: u64) -> Self {
        Self { command: command.to_string(), seed, ..Self::default() }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, json + "\n")
    }
}
