use std::fmt::Write;

use anyhow::Result;
use contour::costmodel::{
    eclipse_splitview_cost, electricity_cost_per_block, log_log_slope, majority_attack_cost, rig_curve, MiningParams,
    DEC_2017_NETWORK_HASHRATE, ECLIPSE_WEEK_BLOCK_SECS,
};
use serde_json::json;

use crate::util::emit;
use crate::{Ctx, Outcome};

const CAVEAT: &str = "note: prices and hash rates are volatile; defaults are December 2017 figures, \
                      pass current values to get current costs";

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long, default_value_t = MiningParams::december_2017().difficulty)]
    difficulty: f64,
    #[arg(long, default_value_t = MiningParams::december_2017().joules_per_hash)]
    joules_per_hash: f64,
    #[arg(long, default_value_t = MiningParams::december_2017().usd_per_joule)]
    usd_per_joule: f64,
    /// Hashes per second of one rig.
    #[arg(long, default_value_t = MiningParams::december_2017().rig_hashrate)]
    rig_hashrate: f64,
    /// Price of one rig in USD.
    #[arg(long, default_value_t = MiningParams::december_2017().rig_cost)]
    rig_cost: f64,
    /// Block reward in BTC.
    #[arg(long, default_value_t = MiningParams::december_2017().block_reward)]
    block_reward: f64,
    #[arg(long, default_value_t = MiningParams::december_2017().btc_usd)]
    btc_usd: f64,
    /// Blocks the adversary must mine.
    #[arg(long, default_value_t = 6)]
    k: u32,
    /// Time the adversary has for all `k` blocks, seconds.
    #[arg(long, default_value_t = 6.0 * ECLIPSE_WEEK_BLOCK_SECS)]
    window_secs: f64,
    /// Victim's staleness limit; also priced as the per-block deadline.
    #[arg(long, default_value_t = 10_800.0)]
    max_block_interval_secs: f64,
    /// Network hash rate for the majority attack, hashes per second.
    #[arg(long, default_value_t = DEC_2017_NETWORK_HASHRATE)]
    network_hashrate: f64,
    /// Also print rigs needed for block times 10^0 .. 10^6 s.
    #[arg(long)]
    curve: bool,
}

pub fn run(ctx: &Ctx, a: Args) -> Result<Outcome> {
    let p = MiningParams {
        difficulty: a.difficulty,
        joules_per_hash: a.joules_per_hash,
        usd_per_joule: a.usd_per_joule,
        rig_hashrate: a.rig_hashrate,
        rig_cost: a.rig_cost,
        block_reward: a.block_reward,
        btc_usd: a.btc_usd,
    };
    let per_block = electricity_cost_per_block(&p)?;
    let window = eclipse_splitview_cost(&p, a.k, a.window_secs)?;
    let capped = eclipse_splitview_cost(&p, a.k, f64::from(a.k) * a.max_block_interval_secs)?;
    let majority = majority_attack_cost(&p, a.network_hashrate)?;
    let curve = if a.curve {
        let secs: Vec<f64> = (0..=6).map(|e| 10f64.powi(e)).collect();
        Some(rig_curve(&p, &secs)?)
    } else {
        None
    };

    let mut text = String::new();
    let _ = writeln!(text, "electricity per block      {per_block:>16.2} USD");
    for (label, c) in [("within window", &window), ("within staleness limit", &capped)] {
        let _ = writeln!(text, "split view, {} blocks {label} ({:.0} s/block)", c.k, c.seconds_per_block);
        let _ = writeln!(text, "  rigs                     {:>16}", c.rigs);
        let _ = writeln!(text, "  electricity              {:>16.2} USD", c.electricity);
        let _ = writeln!(text, "  hardware                 {:>16.2} USD", c.hardware);
        let _ = writeln!(text, "  total                    {:>16.2} USD", c.total);
        let _ = writeln!(text, "  forfeited rewards        {:>16.2} USD", c.forfeited_rewards);
    }
    let _ = writeln!(text, "majority attack");
    let _ = writeln!(text, "  electricity per hour     {:>16.2} USD", majority.usd_per_hour_electricity);
    let _ = writeln!(text, "  rigs                     {:>16}", majority.rigs);
    let _ = writeln!(text, "  hardware                 {:>16.2} USD", majority.hardware_usd);
    if let Some(curve) = &curve {
        let _ = writeln!(text, "rigs per block time");
        for (s, n) in curve {
            let _ = writeln!(text, "  {s:>9.0} s  {n:>16.1}");
        }
        let _ = writeln!(text, "  log-log slope {:.4}", log_log_slope(curve));
    }
    text.push_str(CAVEAT);

    emit(
        ctx.json,
        json!({
            "params": p,
            "electricity_per_block": per_block,
            "split_view": window,
            "split_view_capped": capped,
            "majority": majority,
            "curve": curve,
            "note": CAVEAT,
        }),
        text,
    );
    Ok(Outcome::Ok)
}
