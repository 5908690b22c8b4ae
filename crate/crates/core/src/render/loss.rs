use crate::error::{Error, Result};
use crate::image::{Mask, RgbImage};

/// Masked photometric L1 distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskedL1 {
    /// Sum of absolute channel differences over masked pixels, divided by
    /// the masked pixel count.
    pub value: f64,
    /// Set when the mask selects no pixel; `value` is then 0.
    pub empty_mask: bool,
}

pub fn masked_l1(a: &RgbImage, b: &RgbImage, mask: &Mask) -> Result<MaskedL1> {
    let dims = |w, h| (w, h);
    if dims(a.width, a.height) != dims(b.width, b.height)
        || dims(a.width, a.height) != dims(mask.width, mask.height)
    {
        return Err(Error::DimensionMismatch(format!(
            "image size mismatch: {}x{}, {}x{}, mask {}x{}",
            a.width, a.height, b.width, b.height, mask.width, mask.height
        )));
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for ((pa, pb), &m) in a.data.iter().zip(&b.data).zip(&mask.data) {
        if m {
            count += 1;
            sum += (0..3).map(|k| (pa[k] as f64 - pb[k] as f64).abs()).sum::<f64>();
        }
    }
    Ok(if count == 0 {
        MaskedL1 { value: 0.0, empty_mask: true }
    } else {
        MaskedL1 { value: sum / count as f64, empty_mask: false }
    })
}
