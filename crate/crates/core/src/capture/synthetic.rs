//! Deterministic, procedurally generated screen content.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FrameSource, RawFrame, SourceUnavailable, Timestamp, CHANNELS};
use crate::config::scale_dim;

/// One step of a synthetic screen script.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptFrame {
    /// Show the screen identified by this key. Equal keys render identical pixels.
    Show(u64),
    /// The source cannot deliver a frame on this call.
    Unavailable,
}

/// Frame source replaying a script of screens. Once the script is exhausted
/// the last shown screen stays up, like an idle desktop.
pub struct SyntheticSource {
    seed: u64,
    native_w: u32,
    native_h: u32,
    scale: f64,
    script: Vec<ScriptFrame>,
    pos: usize,
    last: Option<u64>,
    cache: HashMap<u64, Arc<Vec<u8>>>,
}

impl SyntheticSource {
    pub fn new(seed: u64, native_w: u32, native_h: u32, script: Vec<ScriptFrame>) -> Self {
        Self {
            seed,
            native_w,
            native_h,
            scale: 1.0,
            script,
            pos: 0,
            last: None,
            cache: HashMap::new(),
        }
    }

    /// A screen that never changes.
    pub fn static_screen(seed: u64, native_w: u32, native_h: u32) -> Self {
        Self::new(seed, native_w, native_h, vec![ScriptFrame::Show(0)])
    }

    /// Sequence of screens by key, one per call.
    pub fn from_keys(seed: u64, native_w: u32, native_h: u32, keys: &[u64]) -> Self {
        Self::new(
            seed,
            native_w,
            native_h,
            keys.iter().copied().map(ScriptFrame::Show).collect(),
        )
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self.cache.clear();
        self
    }

    /// Scaled pixels for `key`, exactly as `next_frame` would deliver them.
    pub fn pixels_for(&mut self, key: u64) -> Arc<Vec<u8>> {
        if let Some(p) = self.cache.get(&key) {
            return Arc::clone(p);
        }
        let native = render(self.seed, key, self.native_w, self.native_h);
        let (w, h) = self.scaled_dims();
        let scaled = if (w, h) == (self.native_w, self.native_h) {
            native
        } else {
            scale_nearest(&native, self.native_w, self.native_h, w, h)
        };
        let scaled = Arc::new(scaled);
        self.cache.insert(key, Arc::clone(&scaled));
        scaled
    }

    fn scaled_dims(&self) -> (u32, u32) {
        (
            scale_dim(self.native_w, self.scale),
            scale_dim(self.native_h, self.scale),
        )
    }
}

impl FrameSource for SyntheticSource {
    fn native_resolution(&self) -> (u32, u32) {
        (self.native_w, self.native_h)
    }

    fn next_frame(&mut self, captured_at: Timestamp) -> Result<RawFrame, SourceUnavailable> {
        let step = match self.script.get(self.pos) {
            Some(step) => {
                self.pos += 1;
                *step
            }
            None => ScriptFrame::Show(self.last.unwrap_or(0)),
        };
        let key = match step {
            ScriptFrame::Show(key) => key,
            ScriptFrame::Unavailable => {
                return Err(SourceUnavailable("scripted outage".into()));
            }
        };
        self.last = Some(key);
        let pixels = self.pixels_for(key);
        let (width, height) = self.scaled_dims();
        Ok(RawFrame {
            captured_at,
            width,
            height,
            pixels: pixels.as_ref().clone(),
            native_w: self.native_w,
            native_h: self.native_h,
        })
    }
}

/// Renders a flat background with a handful of rectangles. The key's bytes
/// are stamped into the first pixels so distinct keys never collide.
fn render(seed: u64, key: u64, w: u32, h: u32) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let (w, h) = (w as usize, h as usize);
    let mut px = vec![0u8; w * h * CHANNELS];

    let bg: [u8; 3] = rng.random();
    for p in px.chunks_exact_mut(CHANNELS) {
        p.copy_from_slice(&bg);
    }
    for _ in 0..6 {
        let x0 = rng.random_range(0..w);
        let y0 = rng.random_range(0..h);
        let x1 = rng.random_range(x0..=w);
        let y1 = rng.random_range(y0..=h);
        let color: [u8; 3] = rng.random();
        for y in y0..y1 {
            let row = &mut px[(y * w + x0) * CHANNELS..(y * w + x1) * CHANNELS];
            for p in row.chunks_exact_mut(CHANNELS) {
                p.copy_from_slice(&color);
            }
        }
    }
    for (i, b) in key.to_le_bytes().iter().enumerate().take(w) {
        px[i * CHANNELS] = *b;
    }
    px
}

/// Nearest-neighbour resample of an RGB buffer, sampling pixel centres.
pub fn scale_nearest(src: &[u8], src_w: u32, src_h: u32, dst_w: u32, dst_h: u32) -> Vec<u8> {
    let (sw, sh, dw, dh) = (src_w as u64, src_h as u64, dst_w as u64, dst_h as u64);
    let mut out = Vec::with_capacity((dw * dh) as usize * CHANNELS);
    for y in 0..dh {
        let sy = ((2 * y + 1) * sh / (2 * dh)).min(sh - 1);
        for x in 0..dw {
            let sx = ((2 * x + 1) * sw / (2 * dw)).min(sw - 1);
            let i = ((sy * sw + sx) as usize) * CHANNELS;
            out.extend_from_slice(&src[i..i + CHANNELS]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use chrono::DateTime;

    use super::*;

    fn at() -> Timestamp {
        DateTime::parse_from_rfc3339("2024-03-01T09:00:00Z").unwrap()
    }

    #[test]
    fn frame_dimensions_follow_scale() {
        let mut src = SyntheticSource::static_screen(1, 640, 480).with_scale(0.75);
        let f = src.next_frame(at()).unwrap();
        assert_eq!((f.width, f.height), (480, 360));
        assert_eq!(f.pixels.len(), 480 * 360 * CHANNELS);
        assert_eq!((f.native_w, f.native_h), (640, 480));
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut a = SyntheticSource::from_keys(9, 400, 320, &[1, 2, 1]);
        let mut b = SyntheticSource::from_keys(9, 400, 320, &[1, 2, 1]);
        let fa: Vec<_> = (0..3).map(|_| a.next_frame(at()).unwrap().pixels).collect();
        let fb: Vec<_> = (0..3).map(|_| b.next_frame(at()).unwrap().pixels).collect();
        assert_eq!(fa, fb);
        assert_eq!(fa[0], fa[2]);
        assert_ne!(fa[0], fa[1]);
    }

    #[test]
    fn exhausted_script_holds_last_screen() {
        let mut s = SyntheticSource::new(
            3,
            400,
            320,
            vec![ScriptFrame::Show(4), ScriptFrame::Unavailable, ScriptFrame::Show(5)],
        );
        let first = s.next_frame(at()).unwrap().pixels;
        assert!(s.next_frame(at()).is_err());
        let third = s.next_frame(at()).unwrap().pixels;
        let fourth = s.next_frame(at()).unwrap().pixels;
        assert_ne!(first, third);
        assert_eq!(third, fourth);
    }

    #[test]
    fn nearest_neighbour_picks_pixel_centres() {
        // 4x1 image: values 0,1,2,3 -> downscale to 2x1 samples pixels 1 and 3
        let src: Vec<u8> = (0..4u8).flat_map(|v| [v, v, v]).collect();
        assert_eq!(scale_nearest(&src, 4, 1, 2, 1), vec![1, 1, 1, 3, 3, 3]);
        // identity
        assert_eq!(scale_nearest(&src, 4, 1, 4, 1), src);
        // upscale 2x repeats
        let two: Vec<u8> = [7u8, 9].iter().flat_map(|&v| [v, v, v]).collect();
        assert_eq!(
            scale_nearest(&two, 2, 1, 4, 1),
            [7u8, 7, 9, 9].iter().flat_map(|&v| [v, v, v]).collect::<Vec<_>>()
        );
    }
}
