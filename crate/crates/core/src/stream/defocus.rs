use crate::color::ColorRgb8;
use crate::image::RgbImage;

/// Box blur with a `(2r+1)²` kernel. Samples outside the image take the
/// value of the nearest edge pixel, and each channel mean is rounded down.
pub fn defocus(rgb: &RgbImage, radius: usize) -> RgbImage {
    if radius == 0 || rgb.pixels.is_empty() {
        return rgb.clone();
    }
    let (w, h) = rgb.dims();
    let r = radius as i64;
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;

    // Horizontal window sums, unnormalized.
    let mut rows = vec![[0u32; 3]; w * h];
    for y in 0..h {
        let line = &rgb.pixels[y * w..(y + 1) * w];
        let mut acc = [0u32; 3];
        for k in -r..=r {
            let c = line[clamp(k, w)];
            acc[0] += c.r as u32;
            acc[1] += c.g as u32;
            acc[2] += c.b as u32;
        }
        for x in 0..w {
            rows[y * w + x] = acc;
            let add = line[clamp(x as i64 + r + 1, w)];
            let sub = line[clamp(x as i64 - r, w)];
            acc[0] = acc[0] + add.r as u32 - sub.r as u32;
            acc[1] = acc[1] + add.g as u32 - sub.g as u32;
            acc[2] = acc[2] + add.b as u32 - sub.b as u32;
        }
    }

    let area = ((2 * radius + 1) * (2 * radius + 1)) as u32;
    // Exact 32-bit division by a fixed divisor as a multiply and shift.
    let m = u64::MAX / area as u64 + 1;
    let div = |a: u32| ((a as u128 * m as u128) >> 64) as u8;
    let mut out = RgbImage::filled(w, h, ColorRgb8::BLACK);
    // Vertical pass with one running sum per column, swept row by row.
    let mut acc = vec![[0u32; 3]; w];
    for k in -r..=r {
        let src = &rows[clamp(k, h) * w..][..w];
        for (a, s) in acc.iter_mut().zip(src) {
            for c in 0..3 {
                a[c] += s[c];
            }
        }
    }
    for y in 0..h {
        let dst = &mut out.pixels[y * w..][..w];
        for (o, a) in dst.iter_mut().zip(&acc) {
            *o = ColorRgb8::new(div(a[0]), div(a[1]), div(a[2]));
        }
        let add = &rows[clamp(y as i64 + r + 1, h) * w..][..w];
        let sub = &rows[clamp(y as i64 - r, h) * w..][..w];
        for ((a, ad), sb) in acc.iter_mut().zip(add).zip(sub) {
            for c in 0..3 {
                a[c] = a[c] + ad[c] - sb[c];
            }
        }
    }
    out
}
