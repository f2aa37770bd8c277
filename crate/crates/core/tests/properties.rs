use proptest::prelude::*;
use roomdiff::extraction::{compute_thresholds, extract_instances};
use roomdiff::layout::io::{decode_png, encode_png, map_from_json, map_to_json};
use roomdiff::layout::{CategoryPalette, SemanticMap};
use roomdiff::synth::{generate_indexed, DatasetConfig};

fn arb_map() -> impl Strategy<Value = SemanticMap> {
    (1usize..20, 1usize..20).prop_flat_map(|(h, w)| {
        proptest::collection::vec(0u8..12, h * w).prop_map(move |cells| SemanticMap::new(h, w, 0.25, 12, cells).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn map_files_round_trip(map in arb_map()) {
        prop_assert_eq!(map_from_json(&map_to_json(&map).unwrap()).unwrap(), map.clone());
        let mut png = Vec::new();
        encode_png(&map, &CategoryPalette::desk(), &mut png).unwrap();
        prop_assert_eq!(decode_png(&png[..], 0.25, 12).unwrap(), map);
    }

    #[test]
    fn extraction_recovers_every_annotated_instance(seed in any::<u64>(), index in 0usize..500) {
        let config = DatasetConfig { scenes: 500, seed, ..Default::default() };
        let scene = generate_indexed(&config, &CategoryPalette::desk(), index).unwrap();
        let thresholds = compute_thresholds(std::slice::from_ref(&scene.layout)).unwrap();
        let got = extract_instances(scene.layout.map(), &thresholds).unwrap();
        prop_assert_eq!(got.len(), scene.annotations.len());
        for a in &scene.annotations {
            prop_assert!(got.iter().any(|e| e.mask == a.mask), "annotation mask not extracted");
        }
    }
}
