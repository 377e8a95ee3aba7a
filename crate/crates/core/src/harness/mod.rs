//! Seeded campaigns over scenarios, mobility levels, schemes and
//! CSI/hardware variants, with paired channel realizations per drop.

pub mod checks;
pub mod report;

use std::fmt;
use std::io::Read;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamform::{beamformers_from_channels, reference_beamformers, BeamformerSet, Scheme, DEFAULT_ITERATIONS};
use crate::channel::{ChannelGenerator, ChannelSnapshot, ScenarioConfig};
use crate::codec::{decode_csi, encode_csi, overhead_fraction, CodecConfig, Signaling};
use crate::impairments::{load_profile, ImpairmentProfile};
use crate::link::frame::{aggregate_all, capture_csi, fetch_frame_channels, simulate_frame};
use crate::link::{calibrate_mcs_thresholds, mcs, FramePlan, LinkOptions, ThroughputReport};
use crate::linalg::CMat;
use crate::{seed, Error, Result};

pub use report::{emit_report, gain_table, ReportFormat, ResultRow, ResultTable};

pub const CAMPAIGN_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsiMode {
    /// Estimated at the MS, compressed and fed back through the codec.
    Quantized,
    /// True channels on every subcarrier.
    Perfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardwareMode {
    Ideal,
    EvmModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateModel {
    /// CSI from the training frame, applied 20 ms later.
    Standard,
    /// CSI taken from the first beamformed subframe.
    Emulated,
}

macro_rules! kebab_display {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = serde_json::to_string(self).map_err(|_| fmt::Error)?;
                f.write_str(s.trim_matches('"'))
            }
        }
    )*};
}
kebab_display!(CsiMode, HardwareMode, UpdateModel);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub label: String,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityLevel {
    pub label: String,
    pub doppler_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum HardwareProfileSpec {
    Flat { tx_evm: f64, rx_evm: f64, cpe_std_deg: f64 },
    Synthetic,
    File { path: PathBuf },
}

impl HardwareProfileSpec {
    pub fn load(&self) -> Result<ImpairmentProfile> {
        let p = match self {
            HardwareProfileSpec::Flat { tx_evm, rx_evm, cpe_std_deg } => {
                for (field, v) in [("tx_evm", tx_evm), ("rx_evm", rx_evm)] {
                    if !(0.0..1.0).contains(v) {
                        return Err(Error::config(field, "must lie in [0, 1)"));
                    }
                }
                ImpairmentProfile::flat(*tx_evm, *rx_evm, *cpe_std_deg)
            }
            HardwareProfileSpec::Synthetic => ImpairmentProfile::synthetic(),
            HardwareProfileSpec::File { path } => load_profile(std::fs::File::open(path)?)?,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub version: u32,
    pub scenarios: Vec<ScenarioSpec>,
    pub mobility: Vec<MobilityLevel>,
    pub schemes: Vec<Scheme>,
    pub csi_modes: Vec<CsiMode>,
    pub hardware_modes: Vec<HardwareMode>,
    pub update_models: Vec<UpdateModel>,
    pub drops: usize,
    pub hardware_profile: HardwareProfileSpec,
    pub codec: CodecConfig,
    pub plan: FramePlan,
    pub signaling: Signaling,
    /// Feedback interval of the standard and emulated update models.
    pub standard_interval_s: f64,
    pub emulated_interval_s: f64,
    pub max_sinr_iterations: usize,
    pub mcs_gap_db: f64,
    pub master_seed: u64,
}

/// MCS gap of the built-in campaign. Covers the implementation loss of a
/// practical receiver on top of the coded-modulation capacity, so that
/// stream rates stay below the table ceiling at the simulated SNRs.
pub const CAMPAIGN_GAP_DB: f64 = 10.0;

/// Scenario defaults shared by the built-in campaign: a short indoor delay
/// profile (15 ns RMS) so that one beamformer per eight subcarriers stays
/// valid, and a small time-varying share of the direct-link power.
fn campaign_scenario(isolation_db: f64, rician_k_db: Option<f64>) -> ScenarioConfig {
    ScenarioConfig {
        isolation_db,
        rician_k_db,
        rms_delay_spread_s: 15e-9,
        varying_fraction: 0.02,
        ..ScenarioConfig::default()
    }
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            version: CAMPAIGN_VERSION,
            scenarios: vec![
                ScenarioSpec { label: "nlos-like".into(), config: campaign_scenario(15.0, None) },
                ScenarioSpec { label: "los-like".into(), config: campaign_scenario(5.0, Some(6.0)) },
            ],
            mobility: vec![
                MobilityLevel { label: "none".into(), doppler_hz: 0.0 },
                MobilityLevel { label: "one-person".into(), doppler_hz: 4.0 },
                MobilityLevel { label: "two-persons".into(), doppler_hz: 8.0 },
            ],
            schemes: Scheme::ALL.to_vec(),
            csi_modes: vec![CsiMode::Quantized],
            hardware_modes: vec![HardwareMode::EvmModel],
            update_models: vec![UpdateModel::Standard],
            drops: 30,
            hardware_profile: HardwareProfileSpec::Flat { tx_evm: 0.02, rx_evm: 0.02, cpe_std_deg: 1.5 },
            codec: CodecConfig::testbed(),
            plan: FramePlan::default(),
            signaling: Signaling::Standard,
            standard_interval_s: 23e-3,
            emulated_interval_s: 3e-3,
            max_sinr_iterations: DEFAULT_ITERATIONS,
            mcs_gap_db: CAMPAIGN_GAP_DB,
            master_seed: 1,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CAMPAIGN_VERSION {
            return Err(Error::config("version", format!("unsupported version {}", self.version)));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "at least one scheme is required"));
        }
        if self.drops == 0 {
            return Err(Error::config("drops", "must be at least 1"));
        }
        if self.scenarios.is_empty() || self.mobility.is_empty() {
            return Err(Error::config("scenarios", "need at least one scenario and mobility level"));
        }
        if self.hardware_modes.is_empty() {
            return Err(Error::config("hardware_modes", "at least one hardware mode is required"));
        }
        let needs_csi = self.schemes.iter().any(|s| !s.is_reference());
        if needs_csi && (self.csi_modes.is_empty() || self.update_models.is_empty()) {
            return Err(Error::config("csi_modes", "CSI-driven schemes need a CSI mode and update model"));
        }
        for s in &self.scenarios {
            s.config.validate()?;
            if s.config.num_subcarriers != self.codec.nc {
                return Err(Error::config("codec.nc", "must equal the scenario subcarrier count"));
            }
        }
        for m in &self.mobility {
            if !(m.doppler_hz >= 0.0 && m.doppler_hz.is_finite()) {
                return Err(Error::config("mobility.doppler_hz", "must be finite and >= 0"));
            }
        }
        self.codec.validate()?;
        self.plan.validate(self.codec.nc)?;
        if !(self.standard_interval_s > 0.0 && self.emulated_interval_s > 0.0) {
            return Err(Error::config("standard_interval_s", "update intervals must be positive"));
        }
        Ok(())
    }

    pub fn load<R: Read>(source: R) -> Result<Self> {
        let cfg: CampaignConfig = serde_json::from_reader(source).map_err(Error::from_json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn update_interval(&self, update: UpdateModel) -> f64 {
        match update {
            UpdateModel::Standard => self.standard_interval_s,
            UpdateModel::Emulated => self.emulated_interval_s,
        }
    }

    pub fn overhead(&self, update: UpdateModel) -> Result<f64> {
        overhead_fraction(&self.codec, self.update_interval(update), self.signaling)
    }

    /// Seed of drop `drop` in scenario `label`; independent of mobility so
    /// that the static channel part is shared across mobility levels.
    pub fn drop_seed(&self, label: &str, drop: usize) -> u64 {
        seed::derive(self.master_seed, &[seed::label(label), drop as u64])
    }
}

/// One simulated (scheme, variant) within a drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub mobility: String,
    pub drop: usize,
    pub scheme: Scheme,
    /// `None` for reference schemes, which use no CSI.
    pub csi: Option<CsiMode>,
    pub hardware: HardwareMode,
    pub update: Option<UpdateModel>,
    pub report: ThroughputReport,
}

impl RunRecord {
    pub fn mean_rate(&self) -> f64 {
        self.report.mean_rate()
    }

    pub fn mean_shannon(&self) -> f64 {
        self.report.mean_shannon()
    }
}

/// Everything needed to simulate one drop.
#[derive(Debug, Clone)]
pub struct DropContext {
    pub scenario: String,
    pub mobility: String,
    pub drop: usize,
    pub seed: u64,
    pub training: ChannelSnapshot,
    pub frame: Vec<ChannelSnapshot>,
    pub noise_power: f64,
}

impl DropContext {
    pub fn new(cfg: &CampaignConfig, scenario: &ScenarioSpec, mobility: &MobilityLevel, drop: usize) -> Result<Self> {
        let seed = cfg.drop_seed(&scenario.label, drop);
        let scfg = ScenarioConfig {
            doppler_hz: mobility.doppler_hz,
            rng_seed: seed,
            ..scenario.config.clone()
        };
        let mut gen = ChannelGenerator::new(scfg)?;
        let training = gen.snapshot_at(cfg.plan.training_time_s)?;
        let frame = fetch_frame_channels(&mut gen, &cfg.plan)?;
        Ok(DropContext {
            scenario: scenario.label.clone(),
            mobility: mobility.label.clone(),
            drop,
            seed,
            training,
            frame,
            noise_power: scenario.config.noise_power,
        })
    }

    /// Snapshot from which CSI is taken under `update`.
    pub fn csi_snapshot(&self, update: UpdateModel) -> &ChannelSnapshot {
        match update {
            UpdateModel::Standard => &self.training,
            UpdateModel::Emulated => &self.frame[0],
        }
    }
}

/// Transmitter-side channel knowledge, `[group][ms]` 2×6, with the
/// subcarrier grouping it was reported at.
pub struct CsiView {
    pub anchors: Vec<usize>,
    pub ng: usize,
    pub channels: Vec<Vec<CMat>>,
}

/// CSI available at the transmitters for one snapshot. Capture noise uses a
/// seed that does not depend on the capture time, so a static channel yields
/// identical feedback at the training frame and at the first subframe.
pub fn acquire_csi(
    snap: &ChannelSnapshot,
    mode: CsiMode,
    codec: &CodecConfig,
    profile: &ImpairmentProfile,
    opts: &LinkOptions,
    capture_seed: u64,
) -> Result<CsiView> {
    let nc = snap.num_subcarriers();
    match mode {
        CsiMode::Perfect => {
            let agg = aggregate_all(snap);
            Ok(CsiView {
                anchors: (0..nc).collect(),
                ng: 1,
                channels: (0..nc).map(|s| agg.iter().map(|hk| hk[s].clone()).collect()).collect(),
            })
        }
        CsiMode::Quantized => {
            let mut rng = seed::rng(capture_seed, &[seed::label("capture")]);
            let est = capture_csi(snap, profile, opts, &mut rng);
            let decoded = est
                .iter()
                .map(|hk| {
                    let c = encode_csi(hk, codec, opts.noise_power)?;
                    decode_csi(&c.payload, c.bit_count, codec)
                })
                .collect::<Result<Vec<_>>>()?;
            let anchors = codec.anchors();
            let channels = (0..anchors.len())
                .map(|g| decoded.iter().map(|d| d.effective_channel(g, opts.noise_power)).collect())
                .collect();
            Ok(CsiView { anchors, ng: codec.ng, channels })
        }
    }
}

/// Beamformer sets (time slots) of `scheme`; `csi` is ignored by the
/// reference schemes.
pub fn scheme_slots(scheme: Scheme, csi: Option<&CsiView>, sigma2: f64, iterations: usize) -> Result<Vec<BeamformerSet>> {
    match scheme {
        Scheme::TdmaMimo => (0..3).map(|l| reference_beamformers(scheme, l)).collect(),
        Scheme::FrSimo | Scheme::FrMimo => Ok(vec![reference_beamformers(scheme, 0)?]),
        Scheme::Ia | Scheme::Comp => {
            let csi = csi.ok_or_else(|| Error::contract(format!("{scheme} needs CSI")))?;
            Ok(vec![beamformers_from_channels(scheme, &csi.anchors, &csi.channels, sigma2, iterations)?])
        }
    }
}

fn link_options(cfg: &CampaignConfig, noise_power: f64) -> Result<LinkOptions> {
    let mut opts = LinkOptions::new(noise_power);
    if cfg.mcs_gap_db != mcs::DEFAULT_GAP_DB {
        opts.mcs = calibrate_mcs_thresholds(&mcs::default_skeleton(), cfg.mcs_gap_db, mcs::DEFAULT_TARGET_FER)?;
    }
    Ok(opts)
}

fn profile_for(mode: HardwareMode, evm: &ImpairmentProfile) -> ImpairmentProfile {
    match mode {
        HardwareMode::Ideal => ImpairmentProfile::ideal(),
        HardwareMode::EvmModel => evm.clone(),
    }
}

/// Simulates one CSI-driven scheme of a drop under `update`.
#[allow(clippy::too_many_arguments)]
pub fn run_csi_scheme(
    cfg: &CampaignConfig,
    ctx: &DropContext,
    scheme: Scheme,
    csi_mode: CsiMode,
    update: UpdateModel,
    profile: &ImpairmentProfile,
    opts: &LinkOptions,
) -> Result<ThroughputReport> {
    let csi = acquire_csi(ctx.csi_snapshot(update), csi_mode, &cfg.codec, profile, opts, ctx.seed)?;
    let slots = scheme_slots(scheme, Some(&csi), ctx.noise_power, cfg.max_sinr_iterations)?;
    let frame_seed = seed::derive(ctx.seed, &[seed::label("frame")]);
    simulate_frame(&slots, csi.ng, &ctx.frame, &cfg.plan, profile, opts, frame_seed)
}

/// Re-runs a scheme with beamformers computed from first-subframe CSI,
/// evaluated on all subframes of the same frame.
pub fn emulate_short_update(
    cfg: &CampaignConfig,
    ctx: &DropContext,
    scheme: Scheme,
    csi_mode: CsiMode,
    profile: &ImpairmentProfile,
    opts: &LinkOptions,
) -> Result<ThroughputReport> {
    if ctx.frame.is_empty() {
        return Err(Error::contract("no stored subframe channels"));
    }
    run_csi_scheme(cfg, ctx, scheme, csi_mode, UpdateModel::Emulated, profile, opts)
}

/// All configured schemes and variants of one drop. Every scheme sees the
/// same channels and the same payload and noise seeds.
pub fn run_drop(
    cfg: &CampaignConfig,
    scenario: &ScenarioSpec,
    mobility: &MobilityLevel,
    drop: usize,
    evm: &ImpairmentProfile,
) -> Result<Vec<RunRecord>> {
    let ctx = DropContext::new(cfg, scenario, mobility, drop)?;
    let opts = link_options(cfg, ctx.noise_power)?;
    let frame_seed = seed::derive(ctx.seed, &[seed::label("frame")]);
    let mut out = Vec::new();
    for &hw in &cfg.hardware_modes {
        let profile = profile_for(hw, evm);
        for &scheme in &cfg.schemes {
            let record = |csi, update, report| RunRecord {
                scenario: ctx.scenario.clone(),
                mobility: ctx.mobility.clone(),
                drop,
                scheme,
                csi,
                hardware: hw,
                update,
                report,
            };
            if scheme.is_reference() {
                let slots = scheme_slots(scheme, None, ctx.noise_power, 0)?;
                let report = simulate_frame(&slots, 1, &ctx.frame, &cfg.plan, &profile, &opts, frame_seed)?;
                out.push(record(None, None, report));
                continue;
            }
            for &csi in &cfg.csi_modes {
                for &update in &cfg.update_models {
                    let report = run_csi_scheme(cfg, &ctx, scheme, csi, update, &profile, &opts)?;
                    out.push(record(Some(csi), Some(update), report));
                }
            }
        }
    }
    Ok(out)
}

/// Results of a whole campaign, ordered by (scenario, mobility, drop) and
/// then by the order of `run_drop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    pub records: Vec<RunRecord>,
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let evm = cfg.hardware_profile.load()?;
    let jobs: Vec<(usize, usize, usize)> = (0..cfg.scenarios.len())
        .flat_map(|s| (0..cfg.mobility.len()).flat_map(move |m| (0..cfg.drops).map(move |d| (s, m, d))))
        .collect();
    let chunks = jobs
        .par_iter()
        .map(|&(s, m, d)| run_drop(cfg, &cfg.scenarios[s], &cfg.mobility[m], d, &evm))
        .collect::<Result<Vec<_>>>()?;
    Ok(CampaignResult {
        config: cfg.clone(),
        records: chunks.into_iter().flatten().collect(),
    })
}

/// Filter over campaign records; `None` fields match anything.
#[derive(Debug, Clone, Default)]
pub struct Select<'a> {
    pub scenario: Option<&'a str>,
    pub mobility: Option<&'a str>,
    pub scheme: Option<Scheme>,
    pub csi: Option<Option<CsiMode>>,
    pub hardware: Option<HardwareMode>,
    pub update: Option<Option<UpdateModel>>,
}

impl Select<'_> {
    pub fn matches(&self, r: &RunRecord) -> bool {
        self.scenario.is_none_or(|x| r.scenario == x)
            && self.mobility.is_none_or(|x| r.mobility == x)
            && self.scheme.is_none_or(|x| r.scheme == x)
            && self.csi.is_none_or(|x| r.csi == x)
            && self.hardware.is_none_or(|x| r.hardware == x)
            && self.update.is_none_or(|x| r.update == x)
    }
}

impl CampaignResult {
    /// Matching records sorted by drop index.
    pub fn select(&self, sel: &Select<'_>) -> Vec<&RunRecord> {
        let mut v: Vec<&RunRecord> = self.records.iter().filter(|r| sel.matches(r)).collect();
        v.sort_by_key(|r| r.drop);
        v
    }

    /// Per-drop mean sum rate of the matching records.
    pub fn drop_rates(&self, sel: &Select<'_>) -> Vec<f64> {
        self.select(sel).iter().map(|r| r.mean_rate()).collect()
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
