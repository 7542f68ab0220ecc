//! End-to-end layout estimation: cubemap, line detection, initialization
//! and confidence maximization.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{self, PeakConfig};
use crate::error::{Error, Result};
use crate::geometry::{make_cubemap, EquirectImage, Face, FaceMap};
use crate::hough::{HoughVectors, ManhattanLine};
use crate::layout::{
    init_layout, line_targets, params_to_tile_lines, sgd_optimize, LayoutParams, LineTargets, SgdConfig,
    DEFAULT_CAMERA_HEIGHT, DEFAULT_DECAY, DEFAULT_LR, DEFAULT_STEPS,
};

pub const DEFAULT_TILE_SIZE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    /// Standard Hough transform on Canny edges.
    Hts,
    /// Probabilistic Hough transform on Canny edges.
    Htp,
    /// Lines of a known ground-truth layout.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub detector: Detector,
    pub size: usize,
    pub bin_scale: usize,
    pub lr: f64,
    pub steps: usize,
    pub decay: f64,
    pub seed: u64,
    pub camera_height: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            detector: Detector::Hts,
            size: DEFAULT_TILE_SIZE,
            bin_scale: 1,
            lr: DEFAULT_LR,
            steps: DEFAULT_STEPS,
            decay: DEFAULT_DECAY,
            seed: 0,
            camera_height: DEFAULT_CAMERA_HEIGHT,
        }
    }
}

impl EstimateConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.size < 8 || self.size % 8 != 0 {
            return bad(format!("tile size must be a positive multiple of 8, got {}", self.size));
        }
        if ![1, 2, 4].contains(&self.bin_scale) {
            return bad(format!("bin_scale must be 1, 2 or 4, got {}", self.bin_scale));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.decay.is_finite() && self.decay > 0.0) {
            return bad(format!("decay must be positive, got {}", self.decay));
        }
        if !(self.camera_height.is_finite() && self.camera_height > 0.0) {
            return bad(format!("camera height must be positive, got {}", self.camera_height));
        }
        Ok(())
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr: self.lr,
            steps: self.steps,
        }
    }
}

/// Lines used for initialization and the confidence vectors optimized
/// against.
#[derive(Debug, Clone)]
pub struct Detection {
    pub lines: FaceMap<Vec<ManhattanLine>>,
    pub vectors: LineTargets,
}

/// Runs a classical detector on the six tiles of a panorama.
pub fn detect_lines(img: &EquirectImage, cfg: &EstimateConfig) -> Result<FaceMap<Vec<ManhattanLine>>> {
    let cube = make_cubemap(img, cfg.size);
    let per_face: Vec<Result<Vec<ManhattanLine>>> = Face::ALL
        .par_iter()
        .map(|&face| {
            let tile = &cube[face].raster;
            match cfg.detector {
                Detector::Hts => detect::detect_hts(tile, detect::HTS_THRESHOLD),
                Detector::Htp => detect::detect_htp(
                    tile,
                    detect::HTP_THRESHOLD,
                    detect::HTP_MIN_LEN,
                    detect::HTP_MAX_GAP,
                    &mut detect::face_rng(cfg.seed, face),
                ),
                Detector::Oracle => Err(Error::InvalidArgument(
                    "the oracle detector needs a ground-truth layout".into(),
                )),
            }
        })
        .collect();
    let mut out: FaceMap<Vec<ManhattanLine>> = FaceMap::default();
    for (face, lines) in Face::ALL.into_iter().zip(per_face) {
        out[face] = lines?;
    }
    Ok(out)
}

/// Detection for a panorama. The oracle detector takes its lines from `gt`.
pub fn detect(img: Option<&EquirectImage>, gt: Option<&LayoutParams>, cfg: &EstimateConfig) -> Result<Detection> {
    cfg.validate()?;
    match cfg.detector {
        Detector::Oracle => {
            let gt = gt.ok_or_else(|| {
                Error::InvalidArgument("the oracle detector needs a ground-truth layout".into())
            })?;
            gt.validate()?;
            let lines = params_to_tile_lines(gt, cfg.size);
            let vectors = line_targets(&lines, cfg.size, cfg.bin_scale, cfg.decay);
            Ok(Detection { lines, vectors })
        }
        _ => {
            let img = img.ok_or_else(|| Error::InvalidArgument("no panorama to detect lines in".into()))?;
            let lines = detect_lines(img, cfg)?;
            let vectors = lines.map(|_, l| {
                detect::vectors_from_lines(l, cfg.size, cfg.size, cfg.bin_scale, cfg.decay)
            });
            Ok(Detection { lines, vectors })
        }
    }
}

/// Confidence vectors of one tile, as stored in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileVectors {
    pub face: Face,
    #[serde(flatten)]
    pub vectors: HoughVectors,
}

pub fn vectors_to_json(v: &LineTargets) -> Vec<TileVectors> {
    v.iter()
        .map(|(face, vectors)| TileVectors {
            face,
            vectors: vectors.clone(),
        })
        .collect()
}

/// Per-face vectors from JSON; every face must appear exactly once.
pub fn vectors_from_json(tiles: Vec<TileVectors>) -> Result<LineTargets> {
    let mut slots: [Option<HoughVectors>; 6] = Default::default();
    for t in tiles {
        let slot = &mut slots[t.face.index()];
        if slot.is_some() {
            return Err(Error::InvalidArgument(format!("face {} listed twice", t.face.name())));
        }
        *slot = Some(t.vectors);
    }
    let mut out = Vec::with_capacity(6);
    for (face, slot) in Face::ALL.into_iter().zip(slots) {
        out.push(slot.ok_or_else(|| Error::InvalidArgument(format!("face {} missing", face.name())))?);
    }
    let arr: [HoughVectors; 6] = out.try_into().expect("six faces");
    Ok(FaceMap(arr))
}

/// Detection from confidence vectors alone: lines are read off their
/// prominent peaks.
pub fn detection_from_vectors(vectors: LineTargets) -> Detection {
    let lines = vectors.map(|_, v| detect::peaks_to_lines(v, &PeakConfig::for_bin_scale(v.bin_scale)));
    Detection { lines, vectors }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub layout: LayoutParams,
    pub initial: LayoutParams,
    pub score: f64,
    pub initial_score: f64,
    pub aborted: bool,
}

/// Initializes from the detected lines and optimizes against the vectors.
pub fn estimate_from_detection(det: &Detection, cfg: &EstimateConfig) -> Result<Estimate> {
    cfg.validate()?;
    let t0 = init_layout(&det.lines, cfg.size, cfg.camera_height)?;
    optimize_from(&t0, det, cfg)
}

/// Optimizes a given starting layout against the detection's vectors.
pub fn optimize_from(t0: &LayoutParams, det: &Detection, cfg: &EstimateConfig) -> Result<Estimate> {
    let r = sgd_optimize(t0, &det.vectors, cfg.sgd())?;
    Ok(Estimate {
        layout: r.params,
        initial: t0.clone(),
        score: r.score,
        initial_score: r.initial_score,
        aborted: r.aborted,
    })
}

/// Full pipeline on a panorama.
pub fn estimate(img: Option<&EquirectImage>, gt: Option<&LayoutParams>, cfg: &EstimateConfig) -> Result<Estimate> {
    let det = detect(img, gt, cfg)?;
    estimate_from_detection(&det, cfg)
}

/// Scales every wall coordinate and the room height by an independent
/// factor in `[1 - frac, 1 + frac)`, redrawing until the layout is valid.
pub fn perturb<R: Rng>(t: &LayoutParams, frac: f64, rng: &mut R) -> Result<LayoutParams> {
    for _ in 0..1000 {
        let mut x = t.to_vector();
        for v in x.iter_mut() {
            *v *= 1.0 + rng.gen_range(-frac..frac);
        }
        let p = LayoutParams::from_vector(&x, t.camera_height);
        if p.is_valid() {
            return Ok(p);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no valid perturbation of the layout within ±{frac}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::iou3d;
    use crate::synth::{random_room, render_equirect, RenderStyle, RoomSpec};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn config_validation() {
        assert!(EstimateConfig::default().validate().is_ok());
        let bad = EstimateConfig {
            bin_scale: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EstimateConfig {
            decay: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn oracle_pipeline_recovers_room() {
        let spec = random_room(5, 6).unwrap();
        let cfg = EstimateConfig {
            detector: Detector::Oracle,
            ..Default::default()
        };
        let est = estimate(None, Some(&spec.layout), &cfg).unwrap();
        assert!(iou3d(&est.layout, &spec.layout) > 0.98);
        assert!(est.score >= est.initial_score);
        assert!(estimate(None, None, &cfg).is_err());
    }

    #[test]
    fn vectors_only_detection_recovers_room() {
        let spec = random_room(11, 4).unwrap();
        let cfg = EstimateConfig::default();
        let vectors = line_targets(&params_to_tile_lines(&spec.layout, cfg.size), cfg.size, 1, 0.3);
        let det = detection_from_vectors(vectors);
        let est = estimate_from_detection(&det, &cfg).unwrap();
        assert!(iou3d(&est.layout, &spec.layout) > 0.97);
    }

    #[test]
    fn hts_pipeline_on_wireframe_cuboid() {
        let spec = RoomSpec::new(LayoutParams::cuboid(2.6, 3.1, 2.2, 2.8, 2.9), RenderStyle::Wireframe);
        let (img, _) = render_equirect(&spec, 1024, 512).unwrap();
        let est = estimate(Some(&img), None, &EstimateConfig::default()).unwrap();
        assert!(iou3d(&est.layout, &spec.layout) > 0.9, "{:?}", est.layout);
    }

    #[test]
    fn vectors_json_round_trip() {
        let t = random_room(2, 4).unwrap().layout;
        let v = crate::layout::layout_targets(&t, 32, 2, 0.5);
        let text = serde_json::to_string(&vectors_to_json(&v)).unwrap();
        assert!(text.contains("\"face\":\"front\""));
        let back = vectors_from_json(serde_json::from_str(&text).unwrap()).unwrap();
        for face in Face::ALL {
            assert_eq!(back[face], v[face]);
        }
        let mut partial = vectors_to_json(&v);
        partial.pop();
        assert!(vectors_from_json(partial).is_err());
    }

    #[test]
    fn perturbation_is_bounded_and_valid() {
        let t = random_room(3, 8).unwrap().layout;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = perturb(&t, 0.05, &mut rng).unwrap();
            assert!(p.is_valid());
            for (a, b) in p.to_vector().iter().zip(t.to_vector()) {
                assert!((a / b - 1.0).abs() <= 0.05);
            }
        }
    }
}
