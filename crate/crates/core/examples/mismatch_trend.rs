//! Prints dev EER under matched and mismatched conditions, and fixed-threshold
//! HTERs, on synthetic corpora.
//!
//! cargo run --release --example mismatch_trend -- [seeds] [chain]

use std::time::Instant;

use spkver::corpus::{SynthSource, SynthSpec};
use spkver::eval::{collect_cell, compute_thresholds, evaluate_cell, evaluate_fixed_cell, ConditionPair, ProtocolConfig, TrainingModels};
use spkver::features::ParamChain;
use spkver::pipeline::FrontendConfig;

fn main() -> spkver::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let chain: ParamChain = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or_default();
    let cfg = ProtocolConfig::default();
    let eer_pairs = ["S1cM1S1cM1", "S1cM1S1cM2", "S1cM1S2cM1", "S1cM1S1sM1"];
    let test_pairs = ["S1cM1S1cM2", "S1cM1S2cM1", "S1cM1S2cM2", "S1cM1S1sM2"];
    let start = Instant::now();
    let mut eer_sum = vec![[0.0; 2]; eer_pairs.len()];
    let mut hter_sum = [[0.0; 2]; 2];
    for seed in 0..seeds {
        let source = SynthSource::new(SynthSpec { seed, ..SynthSpec::default() }, FrontendConfig::default())?;
        let models = TrainingModels { source: &source, min_train_seconds: 0.0 };
        let mut line = format!("seed {seed} {chain}:");
        for (i, p) in eer_pairs.iter().enumerate() {
            let cell = collect_cell(&source, &models, ConditionPair::parse(p, None)?, &chain, &cfg)?;
            for (j, cohort) in [true, false].into_iter().enumerate() {
                let o = evaluate_cell(&cell, cohort, &cfg)?;
                eer_sum[i][j] += o.dev.eer.unwrap() / seeds as f64;
                line += &format!(" {p}/{}={:.2}", if cohort { "on" } else { "off" }, 100.0 * o.dev.eer.unwrap());
            }
        }
        println!("{line}");
        for (j, cohort) in [true, false].into_iter().enumerate() {
            let matched = collect_cell(&source, &models, ConditionPair::parse("S1cM1S1cM1", None)?, &chain, &cfg)?;
            let mism = collect_cell(&source, &models, ConditionPair::parse("S1cM1S2cM2", None)?, &chain, &cfg)?;
            let fm = compute_thresholds(&matched, cohort, &cfg)?;
            let fx = compute_thresholds(&mism, cohort, &cfg)?;
            let (mut hm, mut hx) = (0.0, 0.0);
            for p in test_pairs {
                let cell = collect_cell(&source, &models, ConditionPair::parse(p, None)?, &chain, &cfg)?;
                hm += evaluate_fixed_cell(&cell, &fm)?.value / test_pairs.len() as f64;
                hx += evaluate_fixed_cell(&cell, &fx)?.value / test_pairs.len() as f64;
            }
            hter_sum[j][0] += hm / seeds as f64;
            hter_sum[j][1] += hx / seeds as f64;
            println!("  cohort {cohort}: HTER fixed matched {:.2} fixed mismatched {:.2}", 100.0 * hm, 100.0 * hx);
        }
    }
    for (p, e) in eer_pairs.iter().zip(&eer_sum) {
        println!("mean EER {p}: on {:.2} off {:.2}", 100.0 * e[0], 100.0 * e[1]);
    }
    for (c, h) in ["on", "off"].iter().zip(&hter_sum) {
        println!("mean HTER cohort {c}: fixed matched {:.2} fixed mismatched {:.2}", 100.0 * h[0], 100.0 * h[1]);
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
