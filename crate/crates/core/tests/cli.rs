use std::path::Path;

use roomdiff::cli::main_with_args;
use roomdiff::layout::io::read_map_json;
use roomdiff::layout::CategoryPalette;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("roomdiff").chain(args.iter().copied()))
}

fn small_run(out: &str) {
    assert_eq!(run(&["--out", out, "synth", "--scenes", "30"]), 0);
    assert_eq!(
        run(&["--out", out, "train-denoiser", "--iterations", "5", "--steps", "10", "--mode", "arch", "--checkpoint", &format!("{out}/arch.json")]),
        0
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    small_run(out);
    let arch = format!("{out}/arch.json");
    let dataset = format!("{out}/dataset");

    // floor condition against an arch-only checkpoint
    assert_eq!(run(&["--out", out, "generate", "--checkpoint", &arch, "--condition", "floor", "--masks-from", &dataset]), 4);
    assert_eq!(run(&["--out", out, "generate", "--checkpoint", &arch, "--condition", "arch", "--count", "2", "--masks-from", &dataset]), 0);

    // checkpoint whose palette differs from the run's palette
    assert_eq!(run(&["--out", out, "--palette", "full", "generate", "--checkpoint", &arch, "--condition", "arch", "--masks-from", &dataset]), 4);
    let garbage = tmp.path().join("garbage.json");
    std::fs::write(&garbage, "{\"version\": 1}").unwrap();
    assert_eq!(run(&["--out", out, "generate", "--checkpoint", garbage.to_str().unwrap()]), 4);

    // configuration errors
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"seven\"").unwrap();
    assert_eq!(run(&["--config", bad.to_str().unwrap(), "synth"]), 2);
    assert_eq!(run(&["--out", out, "generate", "--checkpoint", &arch, "--condition", "walls"]), 2);
    assert_eq!(run(&["--out", out, "train-denoiser", "--schedule", "sigmoid"]), 2);
    assert_eq!(run(&["--out", out, "generate", "--checkpoint", &arch, "--condition", "arch"]), 2);

    // missing inputs are data errors
    assert_eq!(run(&["--out", out, "train-apm", "--dataset", &format!("{out}/nowhere")]), 3);
    assert_eq!(run(&["--out", out, "evaluate", "--scenes", &format!("{out}/nowhere")]), 3);
}

#[test]
fn commands_are_idempotent_and_stamp_their_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    small_run(out);
    let arch = format!("{out}/arch.json");
    let dataset = format!("{out}/dataset");
    let gen = |dir: &str| {
        assert_eq!(
            run(&["--out", out, "--seed", "5", "generate", "--checkpoint", &arch, "--condition", "arch", "--count", "3", "--masks-from", &dataset, "--output", dir]),
            0
        );
    };
    let (a, b) = (format!("{out}/a"), format!("{out}/b"));
    gen(&a);
    gen(&b);
    for i in 0..3 {
        for ext in ["json", "png"] {
            let name = format!("sample_{i:04}.{ext}");
            assert_eq!(std::fs::read(Path::new(&a).join(&name)).unwrap(), std::fs::read(Path::new(&b).join(&name)).unwrap());
        }
    }
    let stamp = std::fs::read_to_string(Path::new(&a).join("generate.config.toml")).unwrap();
    assert!(stamp.contains("seed = 5"), "{stamp}");
    assert!(stamp.contains("condition = \"arch\""), "{stamp}");
}

#[test]
fn render_writes_palette_colors_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(run(&["--out", out, "synth", "--scenes", "10"]), 0);
    let record = format!("{out}/dataset/splits/train/scene_000000.json");
    let png_path = tmp.path().join("map.png");
    assert_eq!(run(&["--out", out, "render", &record, "--output", png_path.to_str().unwrap()]), 0);

    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&record).unwrap()).unwrap();
    let map_path = tmp.path().join("map.json");
    std::fs::write(&map_path, value["map"].to_string()).unwrap();
    let map = read_map_json(&map_path).unwrap();

    let palette = CategoryPalette::desk();
    let mut decoder = png::Decoder::new(std::fs::File::open(&png_path).unwrap());
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).unwrap();
    assert_eq!((frame.height as usize, frame.width as usize), (map.height(), map.width()));
    for r in 0..map.height() {
        for c in 0..map.width() {
            let o = r * frame.line_size + c * 3;
            assert_eq!(buf[o..o + 3], palette.color(map.get(r, c) as usize), "cell ({r}, {c})");
        }
    }
}

#[test]
fn scene_render_marks_floor_and_objects() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    small_run(out);
    let arch = format!("{out}/arch.json");
    let samples = format!("{out}/gen");
    assert_eq!(
        run(&["--out", out, "generate", "--checkpoint", &arch, "--condition", "arch", "--count", "2", "--masks-from", &format!("{out}/dataset"), "--output", &samples]),
        0
    );
    assert_eq!(run(&["--out", out, "train-apm", "--epochs", "1"]), 0);
    assert_eq!(run(&["--out", out, "assemble", "--samples", &samples]), 0);
    let png_path = tmp.path().join("scene.png");
    let scene = format!("{samples}/scenes/scene_0000.json");
    assert_eq!(run(&["--out", out, "render", "--scene", &scene, "--output", png_path.to_str().unwrap()]), 0);
    let map = roomdiff::layout::io::read_map_png(&png_path, 0.25, 12).unwrap();
    assert!(map.count(1) > 0, "rendered footprint has no floor");
}

#[test]
fn shipped_configs_parse_and_match_defaults() {
    use roomdiff::cli::RunConfig;
    let desk = RunConfig::from_toml(include_str!("../../../configs/desk.toml")).unwrap();
    let defaults = RunConfig::default();
    assert_eq!(desk.denoiser, defaults.denoiser);
    assert_eq!(desk.apm, defaults.apm);
    assert_eq!(desk.synth, defaults.synth);
    assert_eq!(desk.generate, defaults.generate);
    let smoke = RunConfig::from_toml(include_str!("../../../configs/smoke.toml")).unwrap();
    assert_eq!((smoke.synth.scenes, smoke.denoiser.iterations), (60, 50));
}
