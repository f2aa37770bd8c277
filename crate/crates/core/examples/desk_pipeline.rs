//! The whole pipeline through the command-line entry point: synthesize,
//! train both models, generate under every condition kind, assemble and
//! evaluate. Pass a run directory and optionally a TOML config.
//!
//! ```text
//! cargo run --release --example desk_pipeline -- runs/desk [config.toml]
//! ```

use roomdiff::cli::main_with_args;

fn run(args: Vec<String>) {
    println!("$ roomdiff {}", args.join(" "));
    let code = main_with_args(std::iter::once("roomdiff".to_string()).chain(args));
    if code != 0 {
        std::process::exit(code);
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut argv = std::env::args().skip(1);
    let out = argv.next().unwrap_or_else(|| "runs/desk".into());
    let mut global = vec!["--out", out.as_str()];
    let config = argv.next();
    if let Some(c) = &config {
        global.extend(["--config", c.as_str()]);
    }
    let with = |rest: &[&str]| global.iter().chain(rest).map(|s| s.to_string()).collect::<Vec<_>>();
    let dataset = format!("{out}/dataset");

    run(with(&["synth"]));
    run(with(&["train-denoiser"]));
    run(with(&["train-apm"]));
    for kind in ["arch", "floor", "none"] {
        let samples = format!("{out}/generated/{kind}");
        run(with(&["generate", "--condition", kind, "--masks-from", &dataset]));
        run(with(&["assemble", "--samples", &samples]));
        run(with(&["evaluate", "--scenes", &format!("{samples}/scenes")]));
        println!("{}", std::fs::read_to_string(format!("{samples}/scenes/report.csv")).unwrap_or_default());
    }
}
