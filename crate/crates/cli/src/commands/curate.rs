use std::path::Path;

use objreid_core::curation::{
    cluster_instances, fit_instance_box, generate_observations_with, to_global, FrameAnnotation, FrameInput,
    GlobalInstance,
};
use objreid_core::formats::{read_cloud, read_json, read_jsonl, read_trajectory};
use objreid_core::par;

use super::{class_counts, Context};
use crate::error::CliError;
use crate::layout::{self, CameraFile, FrameEntry, SequenceEntry};
use crate::manifest::{Manifest, OutDir};

/// Annotations to global instances, then instances to per-frame observations.
pub fn run(ctx: &Context, data: &Path, out: &Path) -> Result<Manifest, CliError> {
    let cam: CameraFile = read_json(&data.join(layout::CAMERA))?;
    let sequences: Vec<SequenceEntry> = read_json(&data.join(layout::SEQUENCES))?;
    let mut manifest = Manifest::new("curate", &ctx.cfg);
    manifest.input(data)?;

    let mut boxes = Vec::new();
    let mut frames: Vec<FrameInput> = Vec::new();
    for seq in &sequences {
        let traj = read_trajectory(&data.join(layout::trajectory(&seq.dir)))?;
        let anns: Vec<FrameAnnotation> = read_jsonl(&data.join(layout::annotations(&seq.dir)))?;
        if let Some(bad) = anns.iter().find(|a| a.sequence_id != seq.sequence_id) {
            return Err(CliError::Data(format!(
                "annotation for sequence {:?} found in {:?}",
                bad.sequence_id, seq.sequence_id
            )));
        }
        boxes.extend(to_global(&anns, &traj)?);
        let entries: Vec<FrameEntry> = read_jsonl(&data.join(layout::frames(&seq.dir)))?;
        let loaded = par::map(ctx.exec, &entries, |f| -> Result<FrameInput, CliError> {
            let pose = traj.pose_at(f.timestamp)?;
            let cloud = read_cloud(&data.join(layout::cloud(&seq.dir, f.frame_id)))?;
            Ok(FrameInput {
                sequence_id: seq.sequence_id.clone(),
                frame_id: f.frame_id,
                timestamp: f.timestamp,
                weather: seq.weather,
                cam_pose: pose.compose(&cam.sensor_to_camera),
                cloud: cloud.iter().map(|p| pose.transform_point(p)).collect(),
            })
        });
        for f in loaded {
            frames.push(f?);
        }
    }
    if boxes.is_empty() {
        log::warn!("no annotations found under {}; writing empty outputs", data.display());
    }

    let cc = &ctx.cfg.curation;
    let clusters = cluster_instances(&boxes, &cc.dbscan)?;
    let mut instances = Vec::with_capacity(clusters.len());
    for (id, c) in clusters.iter().enumerate() {
        let members: Vec<_> = c.members.iter().map(|&i| boxes[i].bbox).collect();
        instances.push(GlobalInstance {
            instance_id: id as u64,
            class_name: c.class_name.clone(),
            bbox: fit_instance_box(&members)?,
            support_count: members.len(),
        });
    }
    let clustered: usize = clusters.iter().map(|c| c.members.len()).sum();
    let observations = generate_observations_with(ctx.exec, &instances, &frames, &cam.intrinsics, &cc.observation, 0);

    let mut o = OutDir::create(out)?;
    o.write_json("instances.json", &instances)?;
    o.write_jsonl("observations.jsonl", &observations)?;
    manifest.counts = class_counts(&observations);
    for inst in &instances {
        manifest.counts.entry(inst.class_name.clone()).or_default();
    }
    manifest.note("annotations", boxes.len());
    manifest.note("noise_annotations", boxes.len() - clustered);
    manifest.note("instances", instances.len());
    manifest.note("frames", frames.len());
    manifest.note("observations", observations.len());
    o.finish(manifest, &ctx.cfg)
}
