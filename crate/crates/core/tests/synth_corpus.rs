use std::collections::BTreeMap;

use roomdiff::layout::CategoryPalette;
use roomdiff::synth::{generate_indexed, DatasetConfig, RoomGrammar};

#[test]
fn ten_thousand_scene_histogram_matches_grammar_priors() {
    let palette = CategoryPalette::desk();
    let config = DatasetConfig {
        scenes: 10_000,
        seed: 99,
        ..Default::default()
    };

    // scenes cycle through the grammars, so each contributes a third
    let mut expected: BTreeMap<u8, f64> = BTreeMap::new();
    for g in RoomGrammar::defaults() {
        for (cat, n) in g.expected_counts(&palette) {
            *expected.entry(cat).or_default() += n;
        }
    }
    let mut observed: BTreeMap<u8, f64> = BTreeMap::new();
    for i in 0..config.scenes {
        let scene = generate_indexed(&config, &palette, i).unwrap();
        for inst in scene.layout.instances() {
            *observed.entry(inst.category).or_default() += 1.0;
        }
    }

    let normalize = |m: &BTreeMap<u8, f64>| {
        let z: f64 = m.values().sum();
        m.iter().map(|(&k, &v)| (k, v / z)).collect::<BTreeMap<_, _>>()
    };
    let (p, q) = (normalize(&expected), normalize(&observed));
    let l1: f64 = palette
        .object_indices()
        .map(|c| (p.get(&c).unwrap_or(&0.0) - q.get(&c).unwrap_or(&0.0)).abs())
        .sum();
    assert!(l1 < 0.02, "L1 {l1}: expected {p:?} observed {q:?}");
}

#[test]
fn bedrooms_have_exactly_one_bed() {
    let palette = CategoryPalette::desk();
    let bed = palette.index_of("bed").unwrap();
    let config = DatasetConfig {
        scenes: 300,
        grammars: vec![RoomGrammar::bedroom()],
        ..Default::default()
    };
    for i in 0..config.scenes {
        let scene = generate_indexed(&config, &palette, i).unwrap();
        assert_eq!(scene.layout.instances().iter().filter(|o| o.category == bed).count(), 1);
    }
}
