use super::CurationError;
use crate::geometry::BBox2D;
use crate::patchgen::Mask;

/// Shrink `bbox` to the tight box of mask pixels inside it. Pixel `(u, v)`
/// covers `[u, u+1] × [v, v+1]` and counts as inside when its index range
/// overlaps the box.
pub fn refine_bbox_to_mask(bbox: &BBox2D, mask: &Mask) -> Result<BBox2D, CurationError> {
    let (w, h) = (mask.width(), mask.height());
    let u0 = bbox.x_min.floor().max(0.0) as u32;
    let v0 = bbox.y_min.floor().max(0.0) as u32;
    let u1 = (bbox.x_max.ceil().max(0.0) as u32).min(w);
    let v1 = (bbox.y_max.ceil().max(0.0) as u32).min(h);
    let mut found: Option<(u32, u32, u32, u32)> = None;
    for v in v0..v1 {
        for u in u0..u1 {
            if mask.get(u, v) {
                found = Some(match found {
                    None => (u, v, u, v),
                    Some((a, b, c, d)) => (a.min(u), b.min(v), c.max(u), d.max(v)),
                });
            }
        }
    }
    let (a, b, c, d) = found.ok_or(CurationError::EmptyMask)?;
    let tight = BBox2D::new(f64::from(a), f64::from(b), f64::from(c + 1), f64::from(d + 1))?;
    // keep the result inside the input box
    Ok(BBox2D::new(
        tight.x_min.max(bbox.x_min),
        tight.y_min.max(bbox.y_min),
        tight.x_max.min(bbox.x_max),
        tight.y_max.min(bbox.y_max),
    )?)
}
