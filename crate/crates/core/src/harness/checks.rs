//! Trend checks evaluated on campaign results. The campaign command derives
//! its exit status from them and the acceptance tests reuse them.

use serde::Serialize;

use super::{median, CampaignConfig, CampaignResult, CsiMode, HardwareMode, MobilityLevel, ScenarioSpec, Select, UpdateModel};
use crate::beamform::Scheme;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckOutcome { name: name.to_string(), passed, detail }
    }
}

/// SNR at which the degrees-of-freedom check is defined, in dB.
pub const DOF_SNR_DB: f64 = 50.0;
pub const DOF_RATIO_RANGE: [f64; 2] = [1.35, 1.65];

/// Campaign for the degrees-of-freedom check: ideal hardware, perfect CSI,
/// no Doppler and every link at [`DOF_SNR_DB`].
pub fn dof_config(base: &CampaignConfig) -> CampaignConfig {
    let mut cfg = base.clone();
    let mut scenario = cfg.scenarios[0].clone();
    scenario.config.snr_range_db = [DOF_SNR_DB, DOF_SNR_DB];
    cfg.scenarios = vec![scenario];
    cfg.mobility = vec![MobilityLevel { label: "none".into(), doppler_hz: 0.0 }];
    cfg.schemes = vec![Scheme::Ia, Scheme::TdmaMimo];
    cfg.csi_modes = vec![CsiMode::Perfect];
    cfg.hardware_modes = vec![HardwareMode::Ideal];
    cfg.update_models = vec![UpdateModel::Standard];
    cfg
}

/// Full grid for the hardware, mobility, emulation and ordering checks on
/// the first scenario of `base`.
pub fn trend_config(base: &CampaignConfig) -> CampaignConfig {
    let mut cfg = base.clone();
    cfg.scenarios.truncate(1);
    cfg.schemes = Scheme::ALL.to_vec();
    cfg.csi_modes = vec![CsiMode::Quantized];
    cfg.hardware_modes = vec![HardwareMode::Ideal, HardwareMode::EvmModel];
    cfg.update_models = vec![UpdateModel::Standard, UpdateModel::Emulated];
    cfg
}

/// Lookup helpers over one scenario of a campaign.
struct View<'a> {
    res: &'a CampaignResult,
    scenario: &'a str,
    csi: CsiMode,
}

impl View<'_> {
    fn rates(&self, mobility: &str, scheme: Scheme, hw: HardwareMode, update: UpdateModel) -> Vec<f64> {
        let reference = scheme.is_reference();
        self.res.drop_rates(&Select {
            scenario: Some(self.scenario),
            mobility: Some(mobility),
            scheme: Some(scheme),
            hardware: Some(hw),
            csi: Some(if reference { None } else { Some(self.csi) }),
            update: Some(if reference { None } else { Some(update) }),
        })
    }

    fn need(&self, mobility: &str, scheme: Scheme, hw: HardwareMode, update: UpdateModel) -> Result<Vec<f64>> {
        let v = self.rates(mobility, scheme, hw, update);
        if v.is_empty() {
            return Err(Error::contract(format!(
                "no records for {scheme} {hw} {update} at {mobility} in {}",
                self.scenario
            )));
        }
        Ok(v)
    }

    /// Median-based gain of `scheme` over the best reference, overhead deducted.
    fn gain(&self, mobility: &str, scheme: Scheme, update: UpdateModel) -> Result<f64> {
        let hw = HardwareMode::EvmModel;
        let best = Scheme::REFERENCES
            .iter()
            .map(|&s| self.need(mobility, s, hw, update).map(|v| median(&v)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let overhead = self.res.config.overhead(update)?;
        Ok(median(&self.need(mobility, scheme, hw, update)?) * (1.0 - overhead) / best - 1.0)
    }
}

fn relative_loss(ideal: &[f64], impaired: &[f64]) -> Vec<f64> {
    ideal
        .iter()
        .zip(impaired)
        .map(|(a, b)| if *a > 0.0 { (a - b) / a } else { 0.0 })
        .collect()
}

fn fraction(v: &[bool]) -> f64 {
    v.iter().filter(|&&x| x).count() as f64 / v.len() as f64
}

/// IA over TDMA-MIMO sum-throughput ratio with the Shannon metric.
pub fn check_dof(res: &CampaignResult, scenario: &str, mobility: &str) -> Result<CheckOutcome> {
    let shannon = |scheme: Scheme| -> Result<f64> {
        let recs = res.select(&Select {
            scenario: Some(scenario),
            mobility: Some(mobility),
            scheme: Some(scheme),
            hardware: Some(HardwareMode::Ideal),
            ..Default::default()
        });
        let v: Vec<f64> = recs
            .iter()
            .filter(|r| scheme.is_reference() || r.csi == Some(CsiMode::Perfect))
            .map(|r| r.mean_shannon())
            .collect();
        if v.is_empty() {
            return Err(Error::contract(format!("no ideal perfect-CSI records for {scheme}")));
        }
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    };
    let (ia, tdma) = (shannon(Scheme::Ia)?, shannon(Scheme::TdmaMimo)?);
    let ratio = ia / tdma;
    let passed = (DOF_RATIO_RANGE[0]..=DOF_RATIO_RANGE[1]).contains(&ratio);
    Ok(CheckOutcome::new(
        "dof-trend",
        passed,
        format!("IA {ia:.3} / TDMA-MIMO {tdma:.3} = {ratio:.4} (want {:?})", DOF_RATIO_RANGE),
    ))
}

/// Relative impairment loss of IA exceeds that of CoMP in at least 70 % of
/// drops, and both losses are positive in median.
pub fn check_hardware_sensitivity(res: &CampaignResult, scenario: &str, stationary: &str) -> Result<CheckOutcome> {
    let v = View { res, scenario, csi: CsiMode::Quantized };
    let loss = |s: Scheme| -> Result<Vec<f64>> {
        let ideal = v.need(stationary, s, HardwareMode::Ideal, UpdateModel::Standard)?;
        let evm = v.need(stationary, s, HardwareMode::EvmModel, UpdateModel::Standard)?;
        Ok(relative_loss(&ideal, &evm))
    };
    let (ia, comp) = (loss(Scheme::Ia)?, loss(Scheme::Comp)?);
    let wins: Vec<bool> = ia.iter().zip(&comp).map(|(a, b)| a > b).collect();
    let frac = fraction(&wins);
    let (mi, mc) = (median(&ia), median(&comp));
    Ok(CheckOutcome::new(
        "hardware-sensitivity",
        frac >= 0.7 && mi > 0.0 && mc > 0.0,
        format!("IA loss {mi:.3}, CoMP loss {mc:.3} (medians); IA loses more in {:.0}% of drops", 100.0 * frac),
    ))
}

/// IA gain non-increasing over mobility levels (ordered by Doppler) and a
/// smaller CoMP gain drop between the first and last level.
pub fn check_mobility(res: &CampaignResult, scenario: &str, levels: &[&str]) -> Result<CheckOutcome> {
    let v = View { res, scenario, csi: CsiMode::Quantized };
    let ia = levels
        .iter()
        .map(|m| v.gain(m, Scheme::Ia, UpdateModel::Standard))
        .collect::<Result<Vec<_>>>()?;
    let comp = levels
        .iter()
        .map(|m| v.gain(m, Scheme::Comp, UpdateModel::Standard))
        .collect::<Result<Vec<_>>>()?;
    let monotone = ia.windows(2).all(|w| w[1] <= w[0]);
    let (n, last) = (ia.len(), ia.len() - 1);
    let ia_drop = ia[0] - ia[last];
    let comp_drop = comp[0] - comp[last];
    let fmt = |g: &[f64]| g.iter().map(|x| format!("{x:+.3}")).collect::<Vec<_>>().join(" ");
    Ok(CheckOutcome::new(
        "mobility-ordering",
        n >= 2 && monotone && comp_drop < ia_drop,
        format!(
            "IA gain [{}], CoMP gain [{}]; drop IA {ia_drop:.3} vs CoMP {comp_drop:.3}",
            fmt(&ia),
            fmt(&comp)
        ),
    ))
}

/// Short-update emulation at `mobile` restores IA to 95 % of its stationary
/// median, and CoMP gains no more from it than IA (median paired gain).
pub fn check_emulation(res: &CampaignResult, scenario: &str, stationary: &str, mobile: &str) -> Result<CheckOutcome> {
    let v = View { res, scenario, csi: CsiMode::Quantized };
    let hw = HardwareMode::EvmModel;
    let still = median(&v.need(stationary, Scheme::Ia, hw, UpdateModel::Standard)?);
    let improvement = |s: Scheme| -> Result<(f64, f64)> {
        let std = v.need(mobile, s, hw, UpdateModel::Standard)?;
        let emu = v.need(mobile, s, hw, UpdateModel::Emulated)?;
        let paired: Vec<f64> = emu.iter().zip(&std).map(|(e, s)| e - s).collect();
        Ok((median(&emu), median(&paired)))
    };
    let (ia_emu, ia_gain) = improvement(Scheme::Ia)?;
    let (_, comp_gain) = improvement(Scheme::Comp)?;
    Ok(CheckOutcome::new(
        "short-update-emulation",
        ia_emu >= 0.95 * still && comp_gain <= ia_gain,
        format!(
            "emulated IA {ia_emu:.3} vs stationary {still:.3} ({:.1}%); improvement IA {ia_gain:.3}, CoMP {comp_gain:.3}",
            100.0 * ia_emu / still
        ),
    ))
}

/// Median ordering CoMP ≥ IA ≥ TDMA-MIMO ≥ FR-SIMO ≥ FR-MIMO.
pub fn check_scheme_ordering(res: &CampaignResult, scenario: &str, stationary: &str) -> Result<CheckOutcome> {
    let v = View { res, scenario, csi: CsiMode::Quantized };
    let order = [Scheme::Comp, Scheme::Ia, Scheme::TdmaMimo, Scheme::FrSimo, Scheme::FrMimo];
    let meds = order
        .iter()
        .map(|&s| Ok(median(&v.need(stationary, s, HardwareMode::EvmModel, UpdateModel::Standard)?)))
        .collect::<Result<Vec<f64>>>()?;
    let detail = order
        .iter()
        .zip(&meds)
        .map(|(s, m)| format!("{s} {m:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(CheckOutcome::new("scheme-ordering", meds.windows(2).all(|w| w[0] >= w[1]), detail))
}

fn fixed_snr(s: &ScenarioSpec, db: f64) -> bool {
    s.config.snr_range_db == [db, db]
}

/// Every check that the grid of `res` supports. Scenarios at a fixed
/// 50 dB SNR get the degrees-of-freedom check; every scenario gets the
/// trend checks whose cells are present.
pub fn campaign_checks(res: &CampaignResult) -> Vec<CheckOutcome> {
    let cfg = &res.config;
    let mut levels: Vec<&MobilityLevel> = cfg.mobility.iter().collect();
    levels.sort_by(|a, b| a.doppler_hz.total_cmp(&b.doppler_hz));
    let stationary = levels.iter().find(|m| m.doppler_hz == 0.0).map(|m| m.label.as_str());
    let mobile = levels.last().filter(|m| m.doppler_hz > 0.0).map(|m| m.label.as_str());
    let hw_both = cfg.hardware_modes.contains(&HardwareMode::Ideal) && cfg.hardware_modes.contains(&HardwareMode::EvmModel);
    let evm = cfg.hardware_modes.contains(&HardwareMode::EvmModel);
    let quant = cfg.csi_modes.contains(&CsiMode::Quantized);
    let all_schemes = Scheme::ALL.iter().all(|s| cfg.schemes.contains(s));
    let emulated = cfg.update_models.contains(&UpdateModel::Emulated);
    let standard = cfg.update_models.contains(&UpdateModel::Standard);

    let mut out = Vec::new();
    let mut push = |scenario: &str, r: Result<CheckOutcome>| {
        out.push(r.unwrap_or_else(|e| CheckOutcome::new("error", false, e.to_string())));
        if let Some(last) = out.last_mut() {
            last.name = format!("{scenario}/{}", last.name);
        }
    };
    for s in &cfg.scenarios {
        let l = s.label.as_str();
        if let Some(st) = stationary {
            if fixed_snr(s, DOF_SNR_DB)
                && cfg.hardware_modes.contains(&HardwareMode::Ideal)
                && cfg.csi_modes.contains(&CsiMode::Perfect)
                && cfg.schemes.contains(&Scheme::Ia)
                && cfg.schemes.contains(&Scheme::TdmaMimo)
            {
                push(l, check_dof(res, l, st));
            }
            if hw_both && quant && standard && cfg.schemes.contains(&Scheme::Ia) && cfg.schemes.contains(&Scheme::Comp) {
                push(l, check_hardware_sensitivity(res, l, st));
            }
            if evm && quant && standard && all_schemes {
                push(l, check_scheme_ordering(res, l, st));
            }
            if let Some(mo) = mobile {
                if evm && quant && standard && emulated && all_schemes {
                    push(l, check_emulation(res, l, st, mo));
                }
            }
        }
        if levels.len() >= 2 && evm && quant && standard && all_schemes {
            let labels: Vec<&str> = levels.iter().map(|m| m.label.as_str()).collect();
            push(l, check_mobility(res, l, &labels));
        }
    }
    out
}
