//! Tracks noisy synthetic videos with each mask selector and reports mAP.
//! Propagation uses true motion corrupted by boundary noise, so errors
//! accumulate unless fresh segmentations are picked when they are better.
//!
//! `cargo run --release --example selection_benchmark -- [videos] [prop-noise] [model.json]`

use masktrack::cli::{merge_video, track_video, PropagatorKind, RunConfig};
use masktrack::eval::{evaluate, track_iou};
use masktrack::msn::load_model;
use masktrack::pipeline::{Direction, SelectorKind, TrackFile};
use masktrack::synth::dataset::gt_file;
use masktrack::synth::{benchmark_scenes, degrade, generate, BenchmarkConfig, NoiseConfig};

fn main() -> masktrack::Result<()> {
    let mut args = std::env::args().skip(1);
    let videos: usize = args.next().map_or(6, |s| s.parse().expect("videos"));
    let level: f64 = args.next().map_or(0.3, |s| s.parse().expect("prop-noise"));
    let model = args.next().map(|p| load_model(p.as_ref())).transpose()?;

    let scenes = benchmark_scenes(&BenchmarkConfig { videos, ..Default::default() }, 7);
    let clips = scenes.iter().map(generate).collect::<masktrack::Result<Vec<_>>>()?;
    let noise = NoiseConfig::benchmark();
    let proposals = clips
        .iter()
        .map(|v| degrade(&v.info(), &v.gt, &noise, v.video_id))
        .collect::<masktrack::Result<Vec<_>>>()?;
    let gt = gt_file(&clips);

    let mut config = RunConfig::default();
    config.propagation.kind = PropagatorKind::Oracle;
    config.propagation.noise = level;
    for kind in SelectorKind::ALL {
        if kind == SelectorKind::Msn && model.is_none() {
            continue;
        }
        config.pipeline.selector = kind;
        let mut forward = Vec::new();
        let mut merged = Vec::new();
        for (v, p) in clips.iter().zip(&proposals) {
            let f = track_video(v, p, Direction::Forward, &config, model.as_ref())?;
            let b = track_video(v, p, Direction::Backward, &config, model.as_ref())?;
            merged.push(merge_video(&f, &b, &config, Some(v), model.as_ref())?.0);
            forward.push(f);
        }
        let both = evaluate(&TrackFile { videos: merged }.to_results(), &gt)?;
        let results = TrackFile { videos: forward }.to_results();
        let report = evaluate(&results, &gt)?;
        // Mean over ground-truth tracks of the best video IoU any prediction reaches.
        let mut best_iou = 0.0;
        for g in &gt.annotations {
            let mut best: f64 = 0.0;
            for r in results.iter().filter(|r| r.video_id == g.video_id) {
                best = best.max(track_iou(&r.segmentations, &g.segmentations)?);
            }
            best_iou += best / gt.annotations.len() as f64;
        }
        println!(
            "{:12} mAP {:.4}  best IoU {:.3}  merged mAP {:.4}",
            kind.name(),
            report.map,
            best_iou,
            both.map
        );
    }
    Ok(())
}
