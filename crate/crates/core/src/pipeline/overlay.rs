//! Bounding-box overlays drawn onto a copy of a screenshot.

use std::path::Path;

use image::{Rgba, RgbaImage};

use crate::episode::BoundingBox;

const STROKE: u32 = 3;
const RED: Rgba<u8> = Rgba([255, 0, 0, 255]);

/// Draws `bbox` (clamped to the image) as a red outline and saves to `out`.
pub fn draw_box(screenshot: &Path, bbox: &BoundingBox, out: &Path) -> Result<(), image::ImageError> {
    let mut img = image::open(screenshot)?.to_rgba8();
    outline(&mut img, bbox);
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).map_err(image::ImageError::IoError)?;
    }
    img.save(out)
}

pub fn outline(img: &mut RgbaImage, bbox: &BoundingBox) {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return;
    }
    let x0 = bbox.min.x.min(w - 1);
    let y0 = bbox.min.y.min(h - 1);
    let x1 = bbox.max.x.min(w - 1);
    let y1 = bbox.max.y.min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let edge = x < x0 + STROKE || x + STROKE > x1 || y < y0 + STROKE || y + STROKE > y1;
            if edge {
                img.put_pixel(x, y, RED);
            }
        }
    }
}
