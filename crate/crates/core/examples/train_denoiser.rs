//! Trains a small mixed-condition denoiser and samples one map per
//! condition kind for a held-out room.
//!
//! ```text
//! cargo run --release --example train_denoiser -- [iterations]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roomdiff::diffusion::{sample_layout, train_denoiser, DiffusionTrainConfig};
use roomdiff::layout::io::map_to_text;
use roomdiff::layout::{CategoryPalette, ConditionKind, ConditionSpec};
use roomdiff::synth::{diffusion_samples, generate_indexed, DatasetConfig};

fn main() -> roomdiff::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let palette = CategoryPalette::desk();
    let data = DatasetConfig {
        scenes: 400,
        ..Default::default()
    };
    let scenes = (0..data.scenes)
        .map(|i| generate_indexed(&data, &palette, i))
        .collect::<roomdiff::Result<Vec<_>>>()?;
    let (train, held_out) = scenes.split_at(data.scenes - 1);

    let config = DiffusionTrainConfig {
        iterations,
        log_every: (iterations / 10).max(1),
        ..Default::default()
    };
    let trained = train_denoiser(&diffusion_samples(train), &config)?;
    for r in &trained.log {
        println!("step {:>6} t-bucket {} loss {:.5}", r.step, r.t_bucket, r.loss);
    }

    let target = &held_out[0];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    println!("target ({}):\n{}", target.layout.room_type(), map_to_text(target.layout.map()));
    for kind in ConditionKind::ALL {
        let cond = ConditionSpec::derive(kind, &target.arch, target.layout.room_type())?;
        let map = sample_layout(&trained.model, &cond, &trained.schedule, 0.25, &mut rng)?;
        println!("condition {kind}:\n{}", map_to_text(&map));
    }
    Ok(())
}
