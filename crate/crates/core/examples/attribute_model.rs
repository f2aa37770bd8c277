//! Trains the attribute model on synthetic rooms and compares its
//! orientation accuracy with the three heuristic baselines.
//!
//! ```text
//! cargo run --release --example attribute_model -- [epochs]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roomdiff::apm::{heuristic_orientation, orientation_accuracy, train_apm, ApmTrainConfig, HeuristicKind};
use roomdiff::layout::CategoryPalette;
use roomdiff::synth::{apm_samples, generate_indexed, orientation_stats, DatasetConfig, Split, SplitCounts};

fn main() -> roomdiff::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let palette = CategoryPalette::desk();
    let config = DatasetConfig {
        scenes: 600,
        ..Default::default()
    };
    let scenes = (0..config.scenes)
        .map(|i| generate_indexed(&config, &palette, i))
        .collect::<roomdiff::Result<Vec<_>>>()?;
    let counts = SplitCounts::from_ratios(config.scenes, config.ratios)?;
    let train = &scenes[counts.range(Split::Train)];
    let test = apm_samples(&scenes[counts.range(Split::Test)]);

    let trained = train_apm(
        &apm_samples(train),
        &ApmTrainConfig {
            epochs,
            ..Default::default()
        },
    )?;
    for r in &trained.log {
        println!("epoch {:>2} loss {:.4} (height {:.4}, elevation {:.4}, orientation {:.4})", r.epoch, r.total, r.l_s, r.l_p, r.l_r);
    }

    let stats = orientation_stats(train);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    println!("attribute model  {:.3}", orientation_accuracy(&trained.model, &test)?);
    for kind in [HeuristicKind::Inward, HeuristicKind::Majority, HeuristicKind::Random] {
        let hits = test
            .iter()
            .filter(|s| heuristic_orientation(kind, &s.mask, &s.map, &stats, &mut rng) == s.target.orientation)
            .count();
        println!("{:<16} {:.3}", format!("{kind:?}").to_lowercase(), hits as f64 / test.len() as f64);
    }
    Ok(())
}
