//! Run configuration: one JSON document, overridden field by field from the
//! command line.

use std::fs;
use std::path::{Path, PathBuf};

use hopf_dbc::{ContinuationSettings, FloquetSettings, SimSettings};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticsConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for KineticsConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.0,
        }
    }
}

/// Amplitudes of the two seed orbits that start a branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub r0: f64,
    pub r1: f64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { r0: 0.01, r1: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StabilityMethod {
    /// Reduced closed form; sign of mu2 when sigma > 0. Points beyond
    /// `closed_form_r_max` or past the first decrease of r stay unknown.
    ClosedForm,
    /// Truncated Floquet problem on the stored profiles (sigma = 0 only).
    Numeric,
    /// Closed form up to `closed_form_r_max` on the stretch leaving the Hopf
    /// point, numeric elsewhere when profiles are available.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub method: StabilityMethod,
    pub closed_form_r_max: f64,
    /// Exponents with smaller real part count as undecided.
    pub resolution: f64,
    pub floquet: FloquetSettings,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            method: StabilityMethod::ClosedForm,
            closed_form_r_max: 0.1,
            resolution: 1e-10,
            floquet: FloquetSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub mu: f64,
    /// Initial boundary value; the bulk starts as `amplitude * e^{-x}`.
    pub init_amplitude: f64,
    /// Size of the seeded uniform perturbation added to the initial bulk.
    pub init_noise: f64,
    /// Peak-to-peak size below which the late signal counts as steady.
    pub amp_tol: f64,
    pub settings: SimSettings,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            mu: 0.05,
            init_amplitude: 0.05,
            init_noise: 0.0,
            amp_tol: 1e-6,
            settings: SimSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Branch point to reconstruct; `None` gives the trivial state at `mu`.
    pub index: Option<usize>,
    pub mu: f64,
    pub x_max: f64,
    pub x_points: usize,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            index: None,
            mu: 0.0,
            x_max: 30.0,
            x_points: 121,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub points: usize,
    /// Amplitude window of the branch fit.
    pub r_window: [f64; 2],
    /// Continuation settings of each fitted branch.
    pub ds_max: f64,
    pub max_points: usize,
    /// Worker threads; `0` uses all cores.
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gamma_min: -0.1,
            gamma_max: 0.05,
            points: 16,
            r_window: [0.02, 0.1],
            ds_max: 0.01,
            max_points: 40,
            threads: 0,
        }
    }
}

/// File locations. They do not enter the config hash.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Main output; stdout when absent.
    pub out: Option<PathBuf>,
    /// Branch CSV read by `stability` and `reconstruct`.
    pub branch: Option<PathBuf>,
    /// Profile sidecar written by `continue`, read by `stability` and `reconstruct`.
    pub profiles: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    /// JSON summary of `simulate` and `reconstruct`.
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kinetics: KineticsConfig,
    pub sigma: f64,
    pub grid_n: usize,
    /// Seed of the perturbation added to simulation initial data.
    pub seed: u64,
    pub seeds: SeedConfig,
    pub continuation: ContinuationSettings,
    pub stability: StabilityConfig,
    pub simulate: SimulateConfig,
    pub reconstruct: ReconstructConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kinetics: KineticsConfig::default(),
            sigma: 0.0,
            grid_n: 256,
            seed: 0,
            seeds: SeedConfig::default(),
            continuation: ContinuationSettings::default(),
            stability: StabilityConfig::default(),
            simulate: SimulateConfig::default(),
            reconstruct: ReconstructConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let k = &self.kinetics;
        if !(k.alpha > 0.0 && k.alpha.is_finite() && k.beta.is_finite() && k.gamma.is_finite()) {
            return bad(format!("kinetics need alpha > 0 and finite beta, gamma (got {k:?})"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if self.grid_n < 4 || !self.grid_n.is_power_of_two() {
            return bad(format!("grid_n must be a power of two >= 4, got {}", self.grid_n));
        }
        if !(self.seeds.r0 > 0.0 && self.seeds.r0 < self.seeds.r1) {
            return bad(format!("seed amplitudes need 0 < r0 < r1 (got {:?})", self.seeds));
        }
        self.continuation.validate()?;
        self.simulate.settings.validate()?;
        let st = &self.stability;
        if !(st.closed_form_r_max >= 0.0 && st.resolution >= 0.0 && st.floquet.truncation >= 1) {
            return bad(format!("invalid stability settings {st:?}"));
        }
        let sim = &self.simulate;
        if !(sim.mu.is_finite() && sim.init_amplitude.is_finite() && sim.init_noise >= 0.0 && sim.amp_tol >= 0.0) {
            return bad(format!("invalid simulation initial data {sim:?}"));
        }
        let rc = &self.reconstruct;
        if !(rc.x_max > 0.0 && rc.x_points >= 4) {
            return bad(format!("reconstruction needs x_max > 0 and x_points >= 4 (got {rc:?})"));
        }
        let sw = &self.sweep;
        if !(sw.gamma_min <= sw.gamma_max && sw.points >= 1) {
            return bad(format!("sweep needs gamma_min <= gamma_max and points >= 1 (got {sw:?})"));
        }
        if !(0.0 <= sw.r_window[0] && sw.r_window[0] < sw.r_window[1]) {
            return bad(format!("sweep r_window must be increasing (got {:?})", sw.r_window));
        }
        if !(sw.ds_max >= self.continuation.ds_min && sw.max_points >= 2) {
            return bad(format!("sweep needs ds_max >= ds_min and max_points >= 2 (got {sw:?})"));
        }
        Ok(())
    }

    /// Canonical JSON without file locations and thread counts, neither of
    /// which changes results.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        c.sweep.threads = 0;
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
