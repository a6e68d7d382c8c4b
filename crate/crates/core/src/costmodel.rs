//! Mining and split-view attack cost calculator.
//!
//! Expected hashes per block at difficulty `D` are `2^48 * D / (2^16 - 1)`.
//! Electricity per block multiplies that by joules per hash and the price
//! of a joule; the rig count to produce a block in `S` seconds divides it
//! by `H * S`. All prices are historical inputs, not live data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("{name} must be positive and finite, got {value}")]
    Domain { name: &'static str, value: f64 },
}

/// One week in seconds.
pub const WEEK_SECS: f64 = 7.0 * 24.0 * 3600.0;
/// Per-block time that spreads `k = 6` blocks over a week the way the
/// historical figures do (1.4 days).
pub const ECLIPSE_WEEK_BLOCK_SECS: f64 = 120_960.0;
/// Network hash rate on 5 December 2017, hashes per second.
pub const DEC_2017_NETWORK_HASHRATE: f64 = 11_918_845e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningParams {
    pub difficulty: f64,
    pub joules_per_hash: f64,
    pub usd_per_joule: f64,
    /// Hashes per second of one rig.
    pub rig_hashrate: f64,
    pub rig_cost: f64,
    /// Block reward in bitcoins.
    pub block_reward: f64,
    pub btc_usd: f64,
}

impl MiningParams {
    /// December 2017: Antminer S9, 0.10 USD/kWh, difficulty 1,347,001,430,558.
    pub fn december_2017() -> Self {
        MiningParams {
            difficulty: 1_347_001_430_558.0,
            joules_per_hash: 9.82e-11,
            usd_per_joule: 2.8e-8,
            rig_hashrate: 14e12,
            rig_cost: 2_400.0,
            block_reward: 12.5,
            btc_usd: 11_620.0,
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        for (name, value) in [
            ("difficulty", self.difficulty),
            ("joules_per_hash", self.joules_per_hash),
            ("usd_per_joule", self.usd_per_joule),
            ("rig_hashrate", self.rig_hashrate),
            ("rig_cost", self.rig_cost),
            ("block_reward", self.block_reward),
            ("btc_usd", self.btc_usd),
        ] {
            positive(name, value)?;
        }
        Ok(())
    }
}

impl Default for MiningParams {
    fn default() -> Self {
        Self::december_2017()
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, CostError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CostError::Domain { name, value })
    }
}

pub fn expected_hashes_per_block(difficulty: f64) -> Result<f64, CostError> {
    let d = positive("difficulty", difficulty)?;
    Ok(2f64.powi(48) * d / 65_535.0)
}

pub fn electricity_cost_per_block(p: &MiningParams) -> Result<f64, CostError> {
    p.validate()?;
    Ok(expected_hashes_per_block(p.difficulty)? * p.joules_per_hash * p.usd_per_joule)
}

/// Rigs needed to find one block in `seconds_per_block`, before rounding.
pub fn rigs_required_exact(p: &MiningParams, seconds_per_block: f64) -> Result<f64, CostError> {
    p.validate()?;
    let s = positive("seconds_per_block", seconds_per_block)?;
    Ok(expected_hashes_per_block(p.difficulty)? / (p.rig_hashrate * s))
}

pub fn rigs_required(p: &MiningParams, seconds_per_block: f64) -> Result<u64, CostError> {
    Ok(rigs_required_exact(p, seconds_per_block)?.ceil() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EclipseCost {
    pub k: u32,
    pub seconds_per_block: f64,
    pub rigs: u64,
    pub electricity: f64,
    pub hardware: f64,
    pub forfeited_rewards: f64,
    /// Electricity plus hardware.
    pub total: f64,
    pub total_with_forfeit: f64,
}

/// Cost of mining `k` blocks privately within `window_secs` for an eclipsed
/// victim: `window / k` seconds per block.
pub fn eclipse_splitview_cost(p: &MiningParams, k: u32, window_secs: f64) -> Result<EclipseCost, CostError> {
    if k == 0 {
        return Err(CostError::Domain { name: "k", value: 0.0 });
    }
    let window = positive("window_secs", window_secs)?;
    let seconds_per_block = window / f64::from(k);
    let electricity = f64::from(k) * electricity_cost_per_block(p)?;
    let rigs = rigs_required(p, seconds_per_block)?;
    let hardware = rigs as f64 * p.rig_cost;
    let forfeited_rewards = f64::from(k) * p.block_reward * p.btc_usd;
    let total = electricity + hardware;
    Ok(EclipseCost {
        k,
        seconds_per_block,
        rigs,
        electricity,
        hardware,
        forfeited_rewards,
        total,
        total_with_forfeit: total + forfeited_rewards,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorityCost {
    pub usd_per_hour_electricity: f64,
    pub rigs: u64,
    pub hardware_usd: f64,
}

/// Matching the whole network's hash rate (hashes per second).
///
/// The rig count is rounded to the nearest whole rig, never below one.
pub fn majority_attack_cost(p: &MiningParams, network_hashrate: f64) -> Result<MajorityCost, CostError> {
    p.validate()?;
    let rate = positive("network_hashrate", network_hashrate)?;
    let rigs = ((rate / p.rig_hashrate).round() as u64).max(1);
    Ok(MajorityCost {
        usd_per_hour_electricity: rate * 3600.0 * p.joules_per_hash * p.usd_per_joule,
        rigs,
        hardware_usd: rigs as f64 * p.rig_cost,
    })
}

/// `(seconds, exact rigs)` for each block time in `seconds`.
pub fn rig_curve(p: &MiningParams, seconds: &[f64]) -> Result<Vec<(f64, f64)>, CostError> {
    seconds.iter().map(|&s| Ok((s, rigs_required_exact(p, s)?))).collect()
}

/// Least-squares fit of `y = a + b x`. Returns `(a, b, r_squared)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|(_, y)| (y - my).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (a, b, r2)
}

/// Slope of log10(rigs) against log10(seconds).
pub fn log_log_slope(curve: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = curve.iter().map(|(s, n)| (s.log10(), n.log10())).collect();
    linear_fit(&logs).1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(actual: f64, expected: f64, rel: f64) -> bool {
        ((actual - expected) / expected).abs() <= rel
    }

    #[test]
    fn unit_difficulty() {
        let h = expected_hashes_per_block(1.0).unwrap();
        assert!(close(h, 4.295e9, 1e-3));
        assert_eq!(expected_hashes_per_block(2.0).unwrap(), 2.0 * h);
        assert!(expected_hashes_per_block(0.0).is_err());
        assert!(expected_hashes_per_block(-1.0).is_err());
        assert!(expected_hashes_per_block(f64::NAN).is_err());
    }

    #[test]
    fn historical_block_cost() {
        let p = MiningParams::december_2017();
        assert!(close(expected_hashes_per_block(p.difficulty).unwrap(), 5.786e21, 1e-3));
        let c = electricity_cost_per_block(&p).unwrap();
        assert!(close(c, 15_908.0, 0.005), "{c}");
        assert!(close(6.0 * c, 95_448.0, 0.005));
        let zero_j = MiningParams { joules_per_hash: 0.0, ..p };
        assert!(electricity_cost_per_block(&zero_j).is_err());
    }

    #[test]
    fn rigs_scale_inversely() {
        let p = MiningParams::december_2017();
        assert_eq!(rigs_required(&p, ECLIPSE_WEEK_BLOCK_SECS).unwrap(), 3_417);
        assert!(close(rigs_required(&p, 10_800.0).unwrap() as f64, 38_263.0, 0.01));
        let a = rigs_required_exact(&p, 1_000.0).unwrap();
        let b = rigs_required_exact(&p, 2_000.0).unwrap();
        assert!(close(a, 2.0 * b, 1e-12));
        assert!(rigs_required(&p, 0.0).is_err());
    }

    #[test]
    fn eclipse_breakdown() {
        let p = MiningParams::december_2017();
        let week = eclipse_splitview_cost(&p, 6, 6.0 * ECLIPSE_WEEK_BLOCK_SECS).unwrap();
        assert_eq!(week.hardware, 8_200_800.0);
        assert_eq!(week.forfeited_rewards, 871_500.0);
        assert!(close(week.total, 8.3e6, 0.01));
        let capped = eclipse_splitview_cost(&p, 6, 6.0 * 10_800.0).unwrap();
        assert!(close(capped.hardware, 91.8e6, 0.01));
        assert!(eclipse_splitview_cost(&p, 0, 1.0).is_err());
        assert!(eclipse_splitview_cost(&p, 6, 0.0).is_err());
    }

    #[test]
    fn majority() {
        let p = MiningParams::december_2017();
        let m = majority_attack_cost(&p, DEC_2017_NETWORK_HASHRATE).unwrap();
        assert!(close(m.usd_per_hour_electricity, 117_979.0, 0.005));
        assert_eq!(m.rigs, 851_346);
        assert!(close(m.hardware_usd, 2_043e6, 0.01));
        assert_eq!(majority_attack_cost(&p, p.rig_hashrate).unwrap().rigs, 1);
        let half = majority_attack_cost(&p, DEC_2017_NETWORK_HASHRATE / 2.0).unwrap();
        assert!(close(half.usd_per_hour_electricity * 2.0, m.usd_per_hour_electricity, 1e-12));
    }

    #[test]
    fn curve_slope_is_minus_one() {
        let p = MiningParams::december_2017();
        let secs: Vec<f64> = (0..=6).map(|e| 10f64.powi(e)).collect();
        let slope = log_log_slope(&rig_curve(&p, &secs).unwrap());
        assert!((slope + 1.0).abs() < 1e-9);
    }
}
