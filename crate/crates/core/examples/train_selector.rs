//! Trains a reduced mask selection network on synthetic pairs and compares
//! it with the colour-histogram heuristic on the held-out split.
//!
//! `cargo run --release --example train_selector -- [videos] [epochs] [model.json]`

use std::time::Instant;

use masktrack::msn::{heuristic_accuracy, save_model, train, MsnArch, PairSample, PerturbConfig, TrainConfig};
use masktrack::synth::{benchmark_scenes, generate, selection_pairs, BenchmarkConfig};

fn main() -> masktrack::Result<()> {
    let mut args = std::env::args().skip(1);
    let videos: usize = args.next().map_or(20, |s| s.parse().expect("videos"));
    let epochs: usize = args.next().map_or(6, |s| s.parse().expect("epochs"));
    let model_path = args.next();

    let scenes = benchmark_scenes(&BenchmarkConfig { videos, ..Default::default() }, 99);
    let clips = scenes.iter().map(generate).collect::<masktrack::Result<Vec<_>>>()?;
    let pairs = selection_pairs(&clips, &PerturbConfig::default(), 1)?;
    println!("{} pairs ({} ambiguous discarded)", pairs.samples.len(), pairs.discarded);

    let config = TrainConfig {
        arch: MsnArch::reduced(),
        epochs,
        batch_size: 64,
        learning_rate: 1e-3,
        ..Default::default()
    };
    let start = Instant::now();
    let outcome = train(&pairs.samples, &config)?;
    for e in &outcome.history {
        println!(
            "epoch {:2}  lr {:.0e}  train {:.4}  val {:.4}  acc {:.3}",
            e.epoch, e.learning_rate, e.train_loss, e.val_loss, e.val_accuracy
        );
    }
    let val: Vec<&PairSample> = outcome.validation_indices.iter().map(|&i| &pairs.samples[i]).collect();
    println!("heuristic acc {:.3}", heuristic_accuracy(&val)?);
    println!("trained in {:.1}s", start.elapsed().as_secs_f64());
    if let Some(path) = model_path {
        save_model(&outcome.model, path.as_ref())?;
        println!("saved {path}");
    }
    Ok(())
}
