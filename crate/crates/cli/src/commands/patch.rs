use std::collections::BTreeMap;
use std::path::Path;

use objreid_core::curation::{refine_bbox_to_mask, ObservationRecord};
use objreid_core::formats::read_jsonl;
use objreid_core::geometry::BBox2D;
use objreid_core::par;
use objreid_core::patchgen::{augment, foreground_filter, make_patch, AppliedParams, Mask, PatchSpec, RasterImage};
use objreid_core::seed;
use serde::{Deserialize, Serialize};

use super::{class_counts, Context};
use crate::error::CliError;
use crate::layout;
use crate::manifest::{Manifest, OutDir};

/// One line of `patches.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub obs_id: u64,
    pub file: String,
    /// Box actually cropped, after optional mask refinement.
    pub bbox2d: BBox2D,
    pub refined: bool,
    pub spec: PatchSpec,
    /// Absent for the plain patch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augment: Option<AppliedParams>,
}

struct FrameOut {
    files: Vec<(String, Vec<u8>)>,
    records: Vec<PatchRecord>,
    refine_failures: usize,
}

/// Cut one patch per observation (plus augmented copies) from the frame images.
pub fn run(
    ctx: &Context,
    images: &Path,
    observations: &Path,
    masks: Option<&Path>,
    out: &Path,
) -> Result<Manifest, CliError> {
    let obs: Vec<ObservationRecord> = read_jsonl(observations)?;
    let pc = &ctx.cfg.patch;
    pc.augment.validate()?;
    let mut manifest = Manifest::new("patch", &ctx.cfg);
    manifest.input(observations)?;
    manifest.input(images)?;
    if let Some(m) = masks {
        manifest.input(m)?;
    }

    let mut by_frame: BTreeMap<(&str, u64), Vec<&ObservationRecord>> = BTreeMap::new();
    for o in &obs {
        by_frame.entry((o.sequence_id.as_str(), o.frame_id)).or_default().push(o);
    }
    let frames: Vec<_> = by_frame.into_iter().collect();
    let aug_root = ctx.cfg.stage_seed("augment");

    let results = par::map(ctx.exec, &frames, |((seq, frame), group)| -> Result<FrameOut, CliError> {
        let img = RasterImage::load_png(&layout::frame_image(images, seq, *frame))?;
        let mask = match masks {
            Some(root) => Some(Mask::load_png(&layout::frame_mask(root, seq, *frame))?),
            None => None,
        };
        let mut fo = FrameOut { files: Vec::new(), records: Vec::new(), refine_failures: 0 };
        for o in group {
            let mut bbox = o.bbox2d;
            let mut refined = false;
            if let (Some(m), true) = (&mask, pc.refine_with_mask) {
                match refine_bbox_to_mask(&o.bbox2d, m) {
                    Ok(b) => {
                        bbox = b;
                        refined = true;
                    }
                    Err(e) => {
                        log::debug!("observation {}: keeping original box ({e})", o.obs_id);
                        fo.refine_failures += 1;
                    }
                }
            }
            let (mut patch, spec) = make_patch(&img, &bbox, &pc.crop, o.obs_id);
            if let (Some(m), Some(mode)) = (&mask, pc.mask_filter) {
                let (mpatch, _) = make_patch(&m.to_image(), &bbox, &pc.crop, o.obs_id);
                patch = foreground_filter(&patch, &Mask::from_image(&mpatch), mode)?;
            }
            let file = format!("{}.png", o.obs_id);
            fo.files.push((file.clone(), patch.encode_png()?));
            fo.records.push(PatchRecord { obs_id: o.obs_id, file, bbox2d: bbox, refined, spec, augment: None });
            for k in 0..pc.augment_copies {
                let mut rng = seed::rng(seed::derive(seed::derive(aug_root, o.obs_id), k as u64));
                let (aug, params) = augment(&img, &bbox, &pc.crop, &pc.augment, &mut rng)?;
                let file = format!("{}_aug{k}.png", o.obs_id);
                fo.files.push((file.clone(), aug.encode_png()?));
                fo.records.push(PatchRecord {
                    obs_id: o.obs_id,
                    file,
                    bbox2d: bbox,
                    refined,
                    spec,
                    augment: Some(params),
                });
            }
        }
        Ok(fo)
    });

    let mut o = OutDir::create(out)?;
    let mut records = Vec::new();
    let mut refine_failures = 0;
    for r in results {
        let r = r?;
        for (name, bytes) in &r.files {
            o.write(&format!("patches/{name}"), bytes)?;
        }
        records.extend(r.records);
        refine_failures += r.refine_failures;
    }
    records.sort_by(|a, b| a.obs_id.cmp(&b.obs_id).then(a.file.cmp(&b.file)));
    o.write_jsonl("patches.jsonl", &records)?;
    manifest.counts = class_counts(&obs);
    manifest.note("patches", records.len());
    manifest.note("refine_failures", refine_failures);
    o.finish(manifest, &ctx.cfg)
}
