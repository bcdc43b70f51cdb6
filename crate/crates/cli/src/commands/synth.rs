use std::path::Path;

use objreid_core::formats::{cloud_to_string, trajectory_to_string, write_features, FeatureTable};
use objreid_core::par;
use objreid_core::synthgen::{gen_dataset, SynthConfig};

use super::{class_counts, Context};
use crate::error::CliError;
use crate::layout::{self, CameraFile, FrameEntry, SequenceEntry};
use crate::manifest::{Manifest, OutDir};

/// Write a full synthetic dataset tree, plus ground-truth instances,
/// observations and their features.
pub fn run(ctx: &Context, out: &Path) -> Result<Manifest, CliError> {
    let cfg = SynthConfig { seed: ctx.cfg.stage_seed("synth"), ..ctx.cfg.synth.clone() };
    let data = gen_dataset(ctx.exec, &cfg)?;
    let mut o = OutDir::create(out)?;
    o.write_json(layout::CAMERA, &CameraFile { intrinsics: cfg.camera, sensor_to_camera: data.rig })?;

    let mut entries = Vec::new();
    for seq in &data.sequences {
        let dir = seq.sequence_id.clone();
        o.write(&layout::trajectory(&dir), trajectory_to_string(&seq.trajectory).as_bytes())?;
        o.write_jsonl(&layout::annotations(&dir), &seq.annotations)?;
        let frames: Vec<FrameEntry> =
            seq.frames.iter().map(|f| FrameEntry { frame_id: f.frame_id, timestamp: f.timestamp }).collect();
        o.write_jsonl(&layout::frames(&dir), &frames)?;
        let texts = par::map(ctx.exec, &seq.frames, |f| cloud_to_string(&f.cloud));
        for (f, text) in seq.frames.iter().zip(texts) {
            o.write(&layout::cloud(&dir, f.frame_id), text.as_bytes())?;
        }
        entries.push(SequenceEntry { sequence_id: seq.sequence_id.clone(), weather: seq.weather, dir });
    }
    o.write_json(layout::SEQUENCES, &entries)?;

    let records: Vec<_> = data.observations.iter().map(|g| g.record.clone()).collect();
    o.write_json("gt/instances.json", &data.instances)?;
    o.write_jsonl("gt/observations.jsonl", &records)?;
    let rows: Vec<(u64, Vec<f64>)> = data.observations.iter().map(|g| (g.record.obs_id, g.feature.clone())).collect();
    let table = FeatureTable::from_rows(cfg.conditions.dim, &rows).map_err(CliError::Data)?;
    write_features(&o.path("features.clvr"), &table)?;
    o.record("features.clvr")?;
    o.record("features.clvr.jsonl")?;

    let mut m = Manifest::new("synth", &ctx.cfg);
    m.counts = class_counts(&records);
    m.note("sequences", data.sequences.len());
    m.note("instances", data.instances.len());
    m.note("observations", records.len());
    o.finish(m, &ctx.cfg)
}
