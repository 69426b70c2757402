use crate::error::{Error, Result};
use crate::raster::Frame;

use super::{MapKind, ProbabilityMap};

/// Per-pixel, per-channel temporal median of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    pub image: Frame,
}

/// Lower median for even counts.
pub fn build_background(frames: &[Frame]) -> Result<BackgroundModel> {
    if frames.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: frames.len(),
        });
    }
    let (w, h) = frames[0].dims();
    if let Some(f) = frames.iter().find(|f| f.dims() != (w, h)) {
        return Err(Error::dims((w, h), f.dims()));
    }
    let n = frames.len();
    let mut buf = vec![0f32; n];
    let mut out = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let mut px = [0f32; 3];
        for (c, v) in px.iter_mut().enumerate() {
            for (b, f) in buf.iter_mut().zip(frames) {
                *b = f.pixels()[i][c];
            }
            let (_, m, _) = buf.select_nth_unstable_by((n - 1) / 2, f32::total_cmp);
            *v = *m;
        }
        out.push(px);
    }
    Ok(BackgroundModel {
        image: Frame::from_pixels(w, h, out)?,
    })
}

/// Channel-max absolute difference between background and frame.
pub fn dynamic_similarity(bg: &BackgroundModel, f: &Frame) -> Result<ProbabilityMap> {
    if bg.image.dims() != f.dims() {
        return Err(Error::dims(bg.image.dims(), f.dims()));
    }
    let data = bg
        .image
        .pixels()
        .iter()
        .zip(f.pixels())
        .map(|(b, p)| (0..3).map(|c| (b[c] as f64 - p[c] as f64).abs()).fold(0.0, f64::max))
        .collect();
    Ok(ProbabilityMap {
        width: f.width(),
        height: f.height(),
        kind: MapKind::Dynamic,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solid(w: usize, h: usize, rgb: [f32; 3]) -> Frame {
        Frame::from_pixels(w, h, vec![rgb; w * h]).unwrap()
    }

    fn random_frame(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Frame {
        Frame::from_pixels(
            w,
            h,
            (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_frames() {
        let f = solid(4, 3, [0.2, 0.4, 0.6]);
        let bg = build_background(&[f.clone(), f.clone(), f.clone()]).unwrap();
        assert_eq!(bg.image, f);
        let m = dynamic_similarity(&bg, &f).unwrap();
        assert!(m.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn median_of_three() {
        let a = solid(1, 1, [0.1; 3]);
        let b = solid(1, 1, [0.9; 3]);
        let bg = build_background(&[a.clone(), b, a]).unwrap();
        assert_eq!(bg.image.get(0, 0), [0.1; 3]);
    }

    #[test]
    fn lower_median_for_even_count() {
        let fs: Vec<_> = [0.1, 0.2, 0.3, 0.4].iter().map(|&v| solid(1, 1, [v; 3])).collect();
        assert_eq!(build_background(&fs).unwrap().image.get(0, 0), [0.2; 3]);
    }

    #[test]
    fn errors() {
        let a = solid(2, 2, [0.0; 3]);
        assert!(matches!(
            build_background(&[a.clone(), a.clone()]),
            Err(Error::InsufficientSamples { .. })
        ));
        let b = solid(3, 2, [0.0; 3]);
        assert!(matches!(
            build_background(&[a.clone(), a.clone(), b.clone()]),
            Err(Error::DimensionMismatch { .. })
        ));
        let bg = build_background(&[a.clone(), a.clone(), a]).unwrap();
        assert!(dynamic_similarity(&bg, &b).is_err());
    }

    #[test]
    fn channel_max_difference() {
        let bg = BackgroundModel {
            image: solid(1, 1, [0.0, 0.0, 0.0]),
        };
        let f = solid(1, 1, [0.2, 0.5, 0.1]);
        assert_eq!(dynamic_similarity(&bg, &f).unwrap().data[0], 0.5f32 as f64);
    }

    #[test]
    fn random_frames_match_naive_loop_and_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (w, h) = (17, 5);
        let bg_img = random_frame(&mut rng, w, h);
        let f = random_frame(&mut rng, w, h);
        let m = dynamic_similarity(&BackgroundModel { image: bg_img.clone() }, &f).unwrap();
        let m2 = dynamic_similarity(&BackgroundModel { image: f.clone() }, &bg_img).unwrap();
        assert_eq!(m.data, m2.data);
        for y in 0..h {
            for x in 0..w {
                let (b, p) = (bg_img.get(x, y), f.get(x, y));
                let mut best = 0.0f64;
                for c in 0..3 {
                    best = best.max((b[c] as f64 - p[c] as f64).abs());
                }
                assert_eq!(m.get(x, y), best);
                assert!((0.0..=1.0).contains(&best));
            }
        }
    }
}
