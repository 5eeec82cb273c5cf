//! RGBA8 pixel buffers and the handful of drawing primitives the built-in
//! art and the compositor need.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::fnv1a;

pub type Rgba = [u8; 4];

pub const WHITE: Rgba = [255, 255, 255, 255];
pub const TRANSPARENT: Rgba = [0, 0, 0, 0];

/// Straight-alpha RGBA8 image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl core::fmt::Debug for Raster {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "Raster({}x{}, #{:016x})",
            self.width,
            self.height,
            self.content_hash()
        )
    }
}

impl Raster {
    pub fn new(width: u32, height: u32, fill: Rgba) -> Self {
        let mut data = vec![0u8; width as usize * height as usize * 4];
        for px in data.chunks_exact_mut(4) {
            px.copy_from_slice(&fill);
        }
        Raster {
            width,
            height,
            data,
        }
    }

    /// Wraps raw RGBA8 bytes; `None` if the length does not match.
    pub fn from_rgba(width: u32, height: u32, data: Vec<u8>) -> Option<Self> {
        (data.len() == width as usize * height as usize * 4).then_some(Raster {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_rgba(&self) -> &[u8] {
        &self.data
    }

    pub fn into_rgba(self) -> Vec<u8> {
        self.data
    }

    pub fn content_hash(&self) -> u64 {
        let mut h =
            fnv1a(&self.width.to_le_bytes()) ^ fnv1a(&self.height.to_le_bytes()).rotate_left(17);
        h ^= fnv1a(&self.data);
        h
    }

    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    pub fn get(&self, x: u32, y: u32) -> Rgba {
        let i = self.index(x, y);
        [
            self.data[i],
            self.data[i + 1],
            self.data[i + 2],
            self.data[i + 3],
        ]
    }

    pub fn put(&mut self, x: u32, y: u32, px: Rgba) {
        let i = self.index(x, y);
        self.data[i..i + 4].copy_from_slice(&px);
    }

    /// Source-over blend of `src` onto the pixel at (x, y). Coordinates
    /// outside the raster are ignored.
    pub fn blend(&mut self, x: i64, y: i64, src: Rgba) {
        if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
            return;
        }
        let (x, y) = (x as u32, y as u32);
        let dst = self.get(x, y);
        self.put(x, y, over(src, dst));
    }

    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgba) {
        for y in y0.max(0)..y1.min(i64::from(self.height)) {
            for x in x0.max(0)..x1.min(i64::from(self.width)) {
                self.blend(x, y, color);
            }
        }
    }

    pub fn fill_circle(&mut self, cx: f64, cy: f64, r: f64, color: Rgba) {
        let (x0, x1) = (libm::floor(cx - r) as i64, libm::ceil(cx + r) as i64);
        let (y0, y1) = (libm::floor(cy - r) as i64, libm::ceil(cy + r) as i64);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                if dx * dx + dy * dy <= r * r {
                    self.blend(x, y, color);
                }
            }
        }
    }

    pub fn stroke_circle(&mut self, cx: f64, cy: f64, r: f64, width: f64, color: Rgba) {
        let outer = r + width / 2.0;
        let inner = (r - width / 2.0).max(0.0);
        let (x0, x1) = (
            libm::floor(cx - outer) as i64,
            libm::ceil(cx + outer) as i64,
        );
        let (y0, y1) = (
            libm::floor(cy - outer) as i64,
            libm::ceil(cy + outer) as i64,
        );
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                let d2 = dx * dx + dy * dy;
                if d2 <= outer * outer && d2 >= inner * inner {
                    self.blend(x, y, color);
                }
            }
        }
    }

    /// Thick line segment as a capsule.
    pub fn line(&mut self, ax: f64, ay: f64, bx: f64, by: f64, width: f64, color: Rgba) {
        let half = width / 2.0;
        let x0 = libm::floor(ax.min(bx) - half) as i64;
        let x1 = libm::ceil(ax.max(bx) + half) as i64;
        let y0 = libm::floor(ay.min(by) - half) as i64;
        let y1 = libm::ceil(ay.max(by) + half) as i64;
        let (vx, vy) = (bx - ax, by - ay);
        let len2 = vx * vx + vy * vy;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (px, py) = (x as f64 + 0.5 - ax, y as f64 + 0.5 - ay);
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    ((px * vx + py * vy) / len2).clamp(0.0, 1.0)
                };
                let (dx, dy) = (px - t * vx, py - t * vy);
                if dx * dx + dy * dy <= half * half {
                    self.blend(x, y, color);
                }
            }
        }
    }

    /// Even-odd polygon fill.
    pub fn fill_polygon(&mut self, points: &[(f64, f64)], color: Rgba) {
        if points.len() < 3 {
            return;
        }
        let y_min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let y_max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let x_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let x_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        for y in libm::floor(y_min) as i64..=libm::ceil(y_max) as i64 {
            for x in libm::floor(x_min) as i64..=libm::ceil(x_max) as i64 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut inside = false;
                let mut j = points.len() - 1;
                for i in 0..points.len() {
                    let (xi, yi) = points[i];
                    let (xj, yj) = points[j];
                    if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                    j = i;
                }
                if inside {
                    self.blend(x, y, color);
                }
            }
        }
    }

    /// Mirror image around the vertical axis.
    pub fn flipped(&self) -> Raster {
        let mut out = Raster::new(self.width, self.height, TRANSPARENT);
        for y in 0..self.height {
            for x in 0..self.width {
                out.put(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }

    /// Axis-aligned sub-image; the rectangle must lie inside the raster.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Raster {
        let mut out = Raster::new(w, h, TRANSPARENT);
        for j in 0..h {
            for i in 0..w {
                out.put(i, j, self.get(x + i, y + j));
            }
        }
        out
    }

    /// Copies `src` onto this raster at (x, y), replacing pixels.
    pub fn paste(&mut self, src: &Raster, x: u32, y: u32) {
        for j in 0..src.height.min(self.height.saturating_sub(y)) {
            for i in 0..src.width.min(self.width.saturating_sub(x)) {
                self.put(x + i, y + j, src.get(i, j));
            }
        }
    }

    pub fn is_opaque(&self) -> bool {
        self.data.chunks_exact(4).all(|px| px[3] == 255)
    }
}

/// Straight-alpha source-over with integer rounding.
pub fn over(src: Rgba, dst: Rgba) -> Rgba {
    let sa = u32::from(src[3]);
    if sa == 255 {
        return src;
    }
    if sa == 0 {
        return dst;
    }
    let da = u32::from(dst[3]);
    // out_a = sa + da * (1 - sa), scaled by 255.
    let out_a = sa * 255 + da * (255 - sa);
    if out_a == 0 {
        return TRANSPARENT;
    }
    let mut out = [0u8; 4];
    for c in 0..3 {
        let num = u32::from(src[c]) * sa * 255 + u32::from(dst[c]) * da * (255 - sa);
        out[c] = ((num + out_a / 2) / out_a) as u8;
    }
    out[3] = ((out_a + 127) / 255) as u8;
    out
}

/// Draws `text` as a deterministic block pattern: every character maps to
/// a 3x5 cell grid chosen by hashing the character. Used to label
/// placeholders and stub images without shipping a font.
pub fn draw_glyph_text(raster: &mut Raster, x: i64, y: i64, text: &str, cell: i64, color: Rgba) {
    let mut cx = x;
    for ch in text.chars() {
        if ch == ' ' {
            cx += 2 * cell;
            continue;
        }
        let mut buf = [0u8; 4];
        let bits = fnv1a(ch.encode_utf8(&mut buf).as_bytes());
        for row in 0..5 {
            for col in 0..3 {
                if bits >> (row * 3 + col) & 1 == 1 {
                    raster.fill_rect(
                        cx + col * cell,
                        y + row * cell,
                        cx + (col + 1) * cell,
                        y + (row + 1) * cell,
                        color,
                    );
                }
            }
        }
        cx += 4 * cell;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn over_extremes() {
        assert_eq!(over([10, 20, 30, 255], WHITE), [10, 20, 30, 255]);
        assert_eq!(over([10, 20, 30, 0], WHITE), WHITE);
        assert_eq!(over([0, 0, 0, 128], WHITE), [127, 127, 127, 255]);
        assert_eq!(over([200, 0, 0, 100], TRANSPARENT), [200, 0, 0, 100]);
    }

    #[test]
    fn shapes_stay_in_bounds() {
        let mut r = Raster::new(8, 8, WHITE);
        r.fill_circle(0.0, 0.0, 20.0, [0, 0, 0, 255]);
        r.line(-5.0, -5.0, 50.0, 50.0, 3.0, [1, 1, 1, 255]);
        assert!(r.is_opaque());
    }

    #[test]
    fn flip_and_crop() {
        let mut r = Raster::new(3, 2, WHITE);
        r.put(0, 0, [1, 2, 3, 255]);
        assert_eq!(r.flipped().get(2, 0), [1, 2, 3, 255]);
        assert_eq!(r.crop(0, 0, 1, 1).get(0, 0), [1, 2, 3, 255]);
        assert!(Raster::from_rgba(2, 2, vec![0; 15]).is_none());
    }
}
