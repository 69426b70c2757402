//! Player segmentation: static background, dynamic-pixel similarity, team color
//! models and the per-pixel player posterior.

mod background;
mod gmm;
mod localize;

pub use background::{build_background, dynamic_similarity, BackgroundModel};
pub use gmm::{fit_gmm, gmm_likelihood, ColorModel, ColorRole, GaussianComponent, GmmConfig, GmmFit};
pub use localize::{localize_players, LocalizeConfig, PlayerDetection};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    Foreground,
    Background,
    Dynamic,
    Player,
}

/// Per-pixel scalar field with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub kind: MapKind,
    pub data: Vec<f64>,
}

impl ProbabilityMap {
    pub fn filled(width: usize, height: usize, kind: MapKind, value: f64) -> Self {
        ProbabilityMap {
            width,
            height,
            kind,
            data: vec![value; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, kind: MapKind, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", width * height),
                got: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Format("probability outside [0, 1]".into()));
        }
        Ok(ProbabilityMap {
            width,
            height,
            kind,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        crate::raster::encode_pgm(self.width, self.height, &self.data)
    }
}

/// P_player = P_fg · M_dyn / (P_fg + P_bg), zero where the denominator vanishes.
pub fn player_probability(
    p_fg: &ProbabilityMap,
    p_bg: &ProbabilityMap,
    m_dyn: &ProbabilityMap,
) -> Result<ProbabilityMap> {
    for m in [p_bg, m_dyn] {
        if m.dims() != p_fg.dims() {
            return Err(Error::dims(p_fg.dims(), m.dims()));
        }
    }
    let data = p_fg
        .data
        .iter()
        .zip(&p_bg.data)
        .zip(&m_dyn.data)
        .map(|((&fg, &bg), &dy)| {
            let den = fg + bg;
            if den < 1e-12 {
                0.0
            } else {
                (fg * dy / den).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(ProbabilityMap {
        width: p_fg.width,
        height: p_fg.height,
        kind: MapKind::Player,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(kind: MapKind, data: Vec<f64>) -> ProbabilityMap {
        ProbabilityMap::from_data(data.len(), 1, kind, data).unwrap()
    }

    #[test]
    fn zero_foreground_gives_zero() {
        let fg = map(MapKind::Foreground, vec![0.0; 4]);
        let bg = map(MapKind::Background, vec![0.3, 0.0, 1.0, 0.5]);
        let dy = map(MapKind::Dynamic, vec![1.0; 4]);
        let p = player_probability(&fg, &bg, &dy).unwrap();
        assert!(p.data.iter().all(|&v| v == 0.0));
        assert_eq!(p.kind, MapKind::Player);
    }

    #[test]
    fn equal_halves() {
        let p = player_probability(
            &map(MapKind::Foreground, vec![0.5]),
            &map(MapKind::Background, vec![0.5]),
            &map(MapKind::Dynamic, vec![0.8]),
        )
        .unwrap();
        assert!((p.data[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn matches_naive_loop_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (w, h) = (13, 9);
        let mut gen =
            |k| ProbabilityMap::from_data(w, h, k, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap();
        let (fg, bg, dy) = (
            gen(MapKind::Foreground),
            gen(MapKind::Background),
            gen(MapKind::Dynamic),
        );
        let p = player_probability(&fg, &bg, &dy).unwrap();
        for y in 0..h {
            for x in 0..w {
                let (a, b, m) = (fg.get(x, y), bg.get(x, y), dy.get(x, y));
                let expect = if a + b < 1e-12 { 0.0 } else { a * m / (a + b) };
                assert_eq!(p.get(x, y), expect);
                assert!(p.get(x, y) <= m);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = ProbabilityMap::filled(2, 2, MapKind::Foreground, 0.1);
        let b = ProbabilityMap::filled(2, 3, MapKind::Background, 0.1);
        assert!(matches!(
            player_probability(&a, &b, &a),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
