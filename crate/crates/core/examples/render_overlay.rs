//! Draws ground-truth tracks of a synthetic video as coloured overlays with
//! class labels and writes the frames as PNG files.
//!
//! `cargo run --example render_overlay -- [out-dir]`

use masktrack::cli::render::render_video;
use masktrack::eval::ResultEntry;
use masktrack::synth::dataset::{frame_path, save_png};
use masktrack::synth::{benchmark_scenes, generate, BenchmarkConfig};

fn main() -> masktrack::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "render_out".into());
    let scenes = benchmark_scenes(&BenchmarkConfig { videos: 1, ..Default::default() }, 4);
    let video = generate(&scenes[0])?;
    let entries: Vec<ResultEntry> = video
        .gt
        .iter()
        .map(|g| ResultEntry {
            video_id: g.video_id,
            track_id: Some(g.id),
            category_id: g.category_id,
            score: 1.0,
            segmentations: g.segmentations.clone(),
        })
        .collect();
    let refs: Vec<&ResultEntry> = entries.iter().collect();
    let frames = render_video(&video.frames, &refs)?;
    for (t, img) in frames.iter().enumerate() {
        save_png(&frame_path(out.as_ref(), video.video_id, t), img)?;
    }
    println!("{} frames with {} tracks in {out}/", frames.len(), entries.len());
    Ok(())
}
