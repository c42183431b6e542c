//! JSON run configuration. Key names carry their units.

#![allow(non_snake_case)]

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rydgate::atomdata::SpeciesData;
use rydgate::dynamics::Flavor;
use rydgate::excitation::{ExcitationConfig, Hyperfine, Measured};
use rydgate::gatephase::RabiTiming;
use rydgate::units::{ghz, mhz, micron, microsecond, microwatt, millitesla, milliwatt};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub power_459_uW: f64,
    pub power_1038_mW: f64,
    pub waist_459_um: f64,
    pub waist_1038_um: f64,
    pub detuning_GHz: f64,
    pub rydberg_n: u32,
    pub bias_field_mT: f64,
}

impl SiteConfig {
    fn operating_point(p459: f64, p1038: f64) -> Self {
        SiteConfig {
            power_459_uW: p459,
            power_1038_mW: p1038,
            waist_459_um: 3.0,
            waist_1038_um: 3.7,
            detuning_GHz: 0.83,
            rydberg_n: 82,
            bias_field_mT: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sites {
    pub control: SiteConfig,
    pub target: SiteConfig,
}

impl Default for Sites {
    fn default() -> Self {
        Sites { control: SiteConfig::operating_point(22.0, 1.9), target: SiteConfig::operating_point(21.0, 2.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredSite {
    pub diff_ground_MHz: f64,
    pub omega_r_MHz: f64,
}

impl MeasuredSite {
    pub fn to_measured(self) -> Measured {
        Measured { diff_ground: mhz(self.diff_ground_MHz), omega_r: mhz(self.omega_r_MHz) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredConfig {
    pub control: MeasuredSite,
    pub target: MeasuredSite,
}

impl MeasuredConfig {
    pub fn operating_point() -> Self {
        MeasuredConfig {
            control: MeasuredSite { diff_ground_MHz: 0.86, omega_r_MHz: 0.67 },
            target: MeasuredSite { diff_ground_MHz: 0.81, omega_r_MHz: 0.65 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerHyperfine {
    Resolved,
    Collapsed,
}

impl From<LedgerHyperfine> for Hyperfine {
    fn from(h: LedgerHyperfine) -> Self {
        match h {
            LedgerHyperfine::Resolved => Hyperfine::Resolved,
            LedgerHyperfine::Collapsed => Hyperfine::Collapsed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingChoice {
    HyperfineFree,
    HyperfineResolved,
}

impl From<TimingChoice> for RabiTiming {
    fn from(t: TimingChoice) -> Self {
        match t {
            TimingChoice::HyperfineFree => RabiTiming::HyperfineFree,
            TimingChoice::HyperfineResolved => RabiTiming::HyperfineResolved,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub enabled: bool,
    /// φ_R = nπ.
    pub n: i64,
    pub t_gap_min_us: f64,
    pub t_gap_max_us: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { enabled: false, n: 1, t_gap_min_us: 0.5, t_gap_max_us: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub t_gap_us: f64,
    /// None is a perfect blockade.
    pub blockade_MHz: Option<f64>,
    /// Analysis phase θ; None takes φ11 - φ10.
    pub theta_rad: Option<f64>,
    /// Use these (φ00, φ01, φ10, φ11) instead of computing them.
    pub phases_rad: Option<[f64; 4]>,
    pub ledger: LedgerHyperfine,
    pub timing: TimingChoice,
    pub solver: SolverConfig,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            t_gap_us: 3.57,
            blockade_MHz: Some(23.0),
            theta_rad: None,
            phases_rad: None,
            ledger: LedgerHyperfine::Resolved,
            timing: TimingChoice::HyperfineFree,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellConfig {
    pub theta_points: usize,
    pub shots: u32,
    pub trials: usize,
    pub retention_control: f64,
    pub retention_target: f64,
    /// Parity curve to fit instead of the modelled one (CSV with theta_rad, parity).
    pub parity_csv: Option<PathBuf>,
}

impl Default for BellConfig {
    fn default() -> Self {
        BellConfig { theta_points: 73, shots: 50, trials: 200, retention_control: 0.996, retention_target: 0.993, parity_csv: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    P459,
    P1038,
    Delta1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub axes: [ScanAxis; 2],
    /// Fractional range, applied to both axes.
    pub range: [f64; 2],
    pub points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { axes: [ScanAxis::P459, ScanAxis::P1038], range: [-0.2, 0.2], points: 41 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsFlavor {
    FullLadder,
    AdiabaticTwoLevel,
}

impl From<DynamicsFlavor> for Flavor {
    fn from(f: DynamicsFlavor) -> Self {
        match f {
            DynamicsFlavor::FullLadder => Flavor::FullLadder,
            DynamicsFlavor::AdiabaticTwoLevel => Flavor::AdiabaticTwoLevel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub rise_time_ns: f64,
    pub leg2_lead_lag_ns: f64,
    pub flavor: DynamicsFlavor,
    /// Effective-p couplings: hyperfine-resolved match or hyperfine-free.
    pub couplings: LedgerHyperfine,
    pub rtol: f64,
    pub atol: f64,
    pub sample_ns: f64,
    /// Gap grid for the π-gap-π scan: start, stop, count.
    pub gap_grid_us: (f64, f64, usize),
    /// Pulse-length grid for the Rabi scan: start, stop, count.
    pub rabi_grid_us: (f64, f64, usize),
    /// Extra two-photon detuning for the π-gap-π scan, MHz.
    pub two_photon_offset_MHz: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            rise_time_ns: 20.0,
            leg2_lead_lag_ns: 0.0,
            flavor: DynamicsFlavor::FullLadder,
            couplings: LedgerHyperfine::Resolved,
            rtol: 1e-10,
            atol: 1e-10,
            sample_ns: 10.0,
            gap_grid_us: (0.0, 5.0, 51),
            rabi_grid_us: (0.0, 3.0, 61),
            two_photon_offset_MHz: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: PathBuf::from("out"), format: Format::Csv }
    }
}

/// Everything a run needs. Missing sections take the reference operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub species_file: Option<PathBuf>,
    pub sites: Sites,
    pub measured: Option<MeasuredConfig>,
    pub gate: GateConfig,
    pub bell: BellConfig,
    pub scan: ScanConfig,
    pub dynamics: DynamicsConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            species_file: None,
            sites: Sites::default(),
            measured: Some(MeasuredConfig::operating_point()),
            gate: GateConfig::default(),
            bell: BellConfig::default(),
            scan: ScanConfig::default(),
            dynamics: DynamicsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        for (name, s) in [("control", &self.sites.control), ("target", &self.sites.target)] {
            let vals = [s.power_459_uW, s.power_1038_mW, s.waist_459_um, s.waist_1038_um, s.detuning_GHz, s.bias_field_mT];
            if vals.iter().any(|v| !v.is_finite()) {
                return bad(format!("sites.{name}: non-finite value"));
            }
            if s.power_459_uW < 0.0 || s.power_1038_mW < 0.0 {
                return bad(format!("sites.{name}: negative power"));
            }
            if s.waist_459_um <= 0.0 || s.waist_1038_um <= 0.0 {
                return bad(format!("sites.{name}: waists must be positive"));
            }
            if s.detuning_GHz == 0.0 {
                return bad(format!("sites.{name}: detuning_GHz must be nonzero"));
            }
        }
        if self.gate.t_gap_us < 0.0 {
            return bad("gate.t_gap_us must be >= 0".into());
        }
        if let Some(b) = self.gate.blockade_MHz {
            if !(b > 0.0) {
                return bad("gate.blockade_MHz must be positive (omit for a perfect blockade)".into());
            }
        }
        if self.scan.points < 2 || !(self.scan.range[1] > self.scan.range[0]) || self.scan.range[0] <= -1.0 {
            return bad("scan: need points >= 2 and -1 < range[0] < range[1]".into());
        }
        if self.scan.axes[0] == self.scan.axes[1] {
            return bad("scan.axes must differ".into());
        }
        if self.bell.theta_points < 4 || self.bell.shots == 0 {
            return bad("bell: need theta_points >= 4 and shots >= 1".into());
        }
        let d = &self.dynamics;
        if d.rise_time_ns < 0.0 || !(d.rtol > 0.0) || !(d.atol > 0.0) || d.gap_grid_us.2 == 0 || d.rabi_grid_us.2 < 8 {
            return bad("dynamics: bad rise time, tolerances or grids".into());
        }
        Ok(())
    }

    pub fn species(&self) -> Result<SpeciesData> {
        match &self.species_file {
            None => Ok(SpeciesData::cesium()),
            Some(p) => SpeciesData::from_path(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
        }
    }

    pub fn excitation(&self, site: &SiteConfig) -> Result<ExcitationConfig> {
        let mut cfg = ExcitationConfig::for_species(
            self.species()?,
            microwatt(site.power_459_uW),
            milliwatt(site.power_1038_mW),
            micron(site.waist_459_um),
            micron(site.waist_1038_um),
            ghz(site.detuning_GHz),
            site.rydberg_n,
        );
        cfg.bias_field = millitesla(site.bias_field_mT);
        Ok(cfg)
    }

    pub fn control(&self) -> Result<ExcitationConfig> {
        self.excitation(&self.sites.control)
    }

    pub fn target(&self) -> Result<ExcitationConfig> {
        self.excitation(&self.sites.target)
    }

    pub fn t_gap(&self) -> f64 {
        microsecond(self.gate.t_gap_us)
    }

    pub fn blockade(&self) -> f64 {
        self.gate.blockade_MHz.map(mhz).unwrap_or(f64::INFINITY)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let c = RunConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn unknown_key_rejected() {
        let r: std::result::Result<RunConfig, _> = serde_json::from_str(r#"{"sites": {"control": {"power_459": 1}}}"#);
        assert!(r.is_err());
    }
}
