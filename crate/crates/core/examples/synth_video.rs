//! Generates a random benchmark scene and its degraded proposal stream, and
//! writes the frames as PNG files.
//!
//! `cargo run --example synth_video -- [out-dir]`

use masktrack::mask::mask_iou;
use masktrack::synth::dataset::save_dataset;
use masktrack::synth::{benchmark_scenes, degrade, generate, BenchmarkConfig, NoiseConfig};

fn main() -> masktrack::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synth_out".into());
    let scenes = benchmark_scenes(&BenchmarkConfig { videos: 1, ..Default::default() }, 5);
    let video = generate(&scenes[0])?;
    for g in &video.gt {
        let visible = g.segmentations.iter().filter(|s| s.is_some()).count();
        println!("object {} class {} visible on {visible}/{} frames", g.id, g.category_id, video.len());
    }

    let proposals = degrade(&video.info(), &video.gt, &NoiseConfig::benchmark(), 1)?;
    let mut ious = Vec::new();
    for p in &proposals.proposals {
        let best = video
            .gt
            .iter()
            .filter_map(|g| g.segmentations[p.frame].as_ref())
            .map(|g| mask_iou(g, &p.segmentation))
            .collect::<masktrack::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        ious.push(best);
    }
    let matched: Vec<f64> = ious.iter().copied().filter(|&x| x > 0.5).collect();
    println!(
        "{} proposals, {} spurious, mean IoU of the rest {:.3}",
        ious.len(),
        ious.len() - matched.len(),
        matched.iter().sum::<f64>() / matched.len().max(1) as f64
    );
    save_dataset(out.as_ref(), &scenes, &[video])?;
    println!("wrote {out}/");
    Ok(())
}
