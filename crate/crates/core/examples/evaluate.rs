//! Scores ground truth against itself, a shifted copy and a half-length copy.

use masktrack::eval::{evaluate, ResultEntry};
use masktrack::mask::translate;
use masktrack::synth::dataset::gt_file;
use masktrack::synth::{benchmark_scenes, generate, BenchmarkConfig};

fn main() -> masktrack::Result<()> {
    let scenes = benchmark_scenes(&BenchmarkConfig { videos: 3, ..Default::default() }, 2);
    let videos = scenes.iter().map(generate).collect::<masktrack::Result<Vec<_>>>()?;
    let gt = gt_file(&videos);

    let variant = |f: &dyn Fn(usize, &masktrack::mask::RleMask) -> Option<masktrack::mask::RleMask>| {
        gt.annotations
            .iter()
            .map(|a| ResultEntry {
                video_id: a.video_id,
                track_id: Some(a.id),
                category_id: a.category_id,
                score: 0.9,
                segmentations: a
                    .segmentations
                    .iter()
                    .enumerate()
                    .map(|(t, s)| s.as_ref().and_then(|m| f(t, m)))
                    .collect(),
            })
            .collect::<Vec<_>>()
    };
    let exact = variant(&|_, m| Some(m.clone()));
    let shifted = variant(&|_, m| Some(translate(&m.to_dense(), 2, 1).to_rle()));
    let half = variant(&|t, m| (t % 2 == 0).then(|| m.clone()));
    for (name, preds) in [("exact", exact), ("shifted", shifted), ("every other frame", half)] {
        println!("== {name}\n{}", evaluate(&preds, &gt)?);
    }
    Ok(())
}
