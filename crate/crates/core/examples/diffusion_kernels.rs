//! Forward noising and the closed-form posterior on a tiny map, followed by
//! ancestral sampling with a denoiser that always predicts the true map.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roomdiff::diffusion::{forward_marginal, posterior, sample_from, sample_layout, FixedMapDenoiser, NoiseSchedule, ScheduleKind};
use roomdiff::layout::io::map_to_text;
use roomdiff::layout::{one_hot, ConditionSpec, RoomType, SemanticMap};

fn main() -> roomdiff::Result<()> {
    let k = 6;
    #[rustfmt::skip]
    let cells = vec![
        0, 0, 0, 0, 0, 0,
        0, 1, 1, 1, 2, 0,
        0, 1, 4, 4, 1, 0,
        0, 1, 5, 1, 1, 0,
        0, 3, 1, 1, 1, 0,
        0, 0, 0, 0, 0, 0,
    ];
    let map = SemanticMap::new(6, 6, 0.25, k, cells)?;
    let x0 = one_hot(&map, k)?;
    let sched = NoiseSchedule::new(20, ScheduleKind::Cosine)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    for t in [1, 5, 10, 20] {
        let q = forward_marginal(&x0, t, &sched)?;
        let x_t = SemanticMap::new(6, 6, 0.25, k, sample_from(&q, &mut rng))?;
        let kept = x_t.cells().iter().zip(map.cells()).filter(|(a, b)| a == b).count();
        println!("t = {t:>2}  alpha_bar {:.3}  cells kept {kept}/36", sched.alpha_bar(t));
        if t > 1 {
            let post = posterior(x_t.cells(), &x0, t, &sched)?;
            println!("  q(x_{} | x_t, x_0) at the bed cell: {:.3?}", t - 1, post.at(2, 2));
        }
    }

    let oracle = FixedMapDenoiser::new(&map)?;
    let cond = ConditionSpec::unconditional(6, 6, RoomType::Bedroom);
    let sample = sample_layout(&oracle, &cond, &sched, 0.25, &mut rng)?;
    println!("oracle sample equals the target: {}", sample == map);
    print!("{}", map_to_text(&sample));
    Ok(())
}
