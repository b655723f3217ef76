//! An object whose detections only start on frame 10: the forward pass
//! finds it late, the backward pass carries it to the first frame, and the
//! merge keeps one track covering the whole video.

use masktrack::cli::{merge_video, track_video, RunConfig};
use masktrack::pipeline::{Direction, SelectorKind};
use masktrack::synth::{degrade, generate, late10};

fn main() -> masktrack::Result<()> {
    let (scene, noise) = late10();
    let video = generate(&scene)?;
    let proposals = degrade(&video.info(), &video.gt, &noise, 10)?;
    let mut config = RunConfig::default();
    config.pipeline.selector = SelectorKind::Heuristic;

    let fwd = track_video(&video, &proposals, Direction::Forward, &config, None)?;
    let bwd = track_video(&video, &proposals, Direction::Backward, &config, None)?;
    let (merged, report) = merge_video(&fwd, &bwd, &config, Some(&video), None)?;
    for (name, tracks) in [("forward", &fwd), ("backward", &bwd), ("merged", &merged)] {
        for t in &tracks.tracks {
            let frames: Vec<usize> = t.covered_frames().collect();
            println!(
                "{name:8} track {} covers frames {:?}..={:?} ({} of {})",
                t.id,
                frames.first(),
                frames.last(),
                frames.len(),
                video.len()
            );
        }
    }
    println!("merge edges {:?}", report.resolutions);
    Ok(())
}
