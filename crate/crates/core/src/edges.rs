//! Synthetic sheet-edge detections in the tactile image, driven by the
//! ground-truth feed trace. Stands in for the learned edge detector.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::feed::FeedLog;
use crate::rng::{derive, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Probability that a visible edge is detected in a frame.
    pub recall: f64,
    /// Probability of one spurious detection per frame.
    pub false_positive_rate: f64,
    /// Standard deviation of the reported center, px.
    pub jitter_px: f64,
    /// Sheet travel over which the edge is inside the tactile image, mm.
    pub window_mm: f64,
    /// Image scale along the feed direction, px/mm.
    pub px_per_mm: f64,
    /// Row reached by the edge halfway through the visible window.
    pub threshold_row: f64,
    /// Column of the edge center.
    pub column: f64,
    pub image_width: u32,
    pub image_height: u32,
    /// Detections closer than this to a stronger one in the same frame are dropped, px.
    pub nms_px: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            recall: 0.919,
            false_positive_rate: 0.0,
            jitter_px: 1.0,
            window_mm: 0.9,
            px_per_mm: 27.8,
            threshold_row: 240.0,
            column: 320.0,
            image_width: 640,
            image_height: 480,
            nms_px: 10.0,
        }
    }
}

impl DetectorParams {
    pub fn with_recall(mut self, recall: f64) -> Self {
        self.recall = recall;
        self
    }

    pub fn noiseless(mut self) -> Self {
        self.recall = 1.0;
        self.false_positive_rate = 0.0;
        self.jitter_px = 0.0;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDetection {
    pub frame: u64,
    /// (column, row), px.
    pub center: [f64; 2],
    /// (u_min, v_min, u_max, v_max), px.
    pub bbox: [f64; 4],
    pub confidence: f64,
}

impl EdgeDetection {
    pub fn row(&self) -> f64 {
        self.center[1]
    }

    pub fn is_well_formed(&self) -> bool {
        self.center.iter().chain(self.bbox.iter()).all(|x| x.is_finite())
            && (0.0..=1.0).contains(&self.confidence)
            && self.bbox[0] <= self.bbox[2]
            && self.bbox[1] <= self.bbox[3]
    }
}

/// Row of an edge whose sheet has travelled `progress` mm, if it is visible.
pub fn edge_row(progress: f64, l_c: f64, det: &DetectorParams) -> Option<f64> {
    let lo = l_c - det.window_mm;
    if progress < lo || progress > l_c {
        return None;
    }
    Some(det.threshold_row + (progress - (l_c - 0.5 * det.window_mm)) * det.px_per_mm)
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn make(frame: u64, col: f64, row: f64, conf: f64, det: &DetectorParams) -> EdgeDetection {
    let w = det.image_width as f64;
    let h = det.image_height as f64;
    EdgeDetection {
        frame,
        center: [col, row],
        bbox: [
            (col - 0.3 * w).max(0.0),
            (row - 6.0).clamp(0.0, h),
            (col + 0.3 * w).min(w),
            (row + 6.0).clamp(0.0, h),
        ],
        confidence: conf,
    }
}

/// Detections for one frame.
pub fn detect_frame(frame: u64, progress: Option<f64>, l_c: f64, det: &DetectorParams, seed: u64) -> Vec<EdgeDetection> {
    let mut rng = seeded(derive(seed, frame));
    let mut out = Vec::new();
    if let Some(row) = progress.and_then(|p| edge_row(p, l_c, det)) {
        if rng.random::<f64>() < det.recall {
            let col = det.column + det.jitter_px * gaussian(&mut rng);
            let r = row + det.jitter_px * gaussian(&mut rng);
            let conf = 0.6 + 0.4 * rng.random::<f64>();
            out.push(make(frame, col, r, conf, det));
        }
    }
    if det.false_positive_rate > 0.0 && rng.random::<f64>() < det.false_positive_rate {
        let col = rng.random::<f64>() * det.image_width as f64;
        let row = rng.random::<f64>() * det.image_height as f64;
        let conf = 0.3 + 0.5 * rng.random::<f64>();
        out.push(make(frame, col, row, conf, det));
    }
    suppress_duplicates(out, det.nms_px)
}

/// Keeps the most confident detection among those whose centers lie within `radius`.
pub fn suppress_duplicates(mut dets: Vec<EdgeDetection>, radius: f64) -> Vec<EdgeDetection> {
    dets.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.center[1].total_cmp(&b.center[1]))
            .then(a.center[0].total_cmp(&b.center[0]))
    });
    let mut kept: Vec<EdgeDetection> = Vec::with_capacity(dets.len());
    for d in dets {
        let close = kept.iter().any(|k| {
            let dx = k.center[0] - d.center[0];
            let dy = k.center[1] - d.center[1];
            (dx * dx + dy * dy).sqrt() < radius
        });
        if !close {
            kept.push(d);
        }
    }
    kept
}

/// Per-tick detections over a whole feed trace. Frame `i` samples the
/// trace's tick `i`; the generator for each frame is derived from the seed
/// and frame index, so streaming and batch generation agree.
pub fn edge_event_stream(trace: &FeedLog, det: &DetectorParams, seed: u64) -> Vec<EdgeDetection> {
    let mut out = Vec::new();
    for t in &trace.ticks {
        let visible = if t.fed < trace.total_sheets { Some(t.progress) } else { None };
        out.extend(detect_frame(t.tick, visible, trace.l_c, det, seed));
    }
    out
}

/// Groups a detection list into frames `first..=last`, empty frames included.
pub fn frames(dets: &[EdgeDetection], first: u64, last: u64) -> Vec<Vec<EdgeDetection>> {
    let mut out = vec![Vec::new(); (last.saturating_sub(first) + 1) as usize];
    for d in dets {
        if d.frame >= first && d.frame <= last {
            out[(d.frame - first) as usize].push(*d);
        }
    }
    out
}

pub fn to_jsonl(dets: &[EdgeDetection]) -> String {
    let mut s = String::new();
    for d in dets {
        s.push_str(&serde_json::to_string(d).expect("detections serialize"));
        s.push('\n');
    }
    s
}
