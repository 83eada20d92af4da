//! Tactile sheet counting: edge tracks across frames, count on appearance,
//! held once the edge center crosses the threshold row.

use serde::{Deserialize, Serialize};

use crate::edges::EdgeDetection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackParams {
    /// Association gate on center distance, px.
    pub gate_px: f64,
    /// Frames a track survives without a matching detection.
    pub ttl: u64,
    /// Pixel row the edge center must reach to count as held.
    pub threshold_row: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self { gate_px: 25.0, ttl: 5, threshold_row: 240.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    pub center: [f64; 2],
    pub last_frame: u64,
    pub held: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CounterState {
    pub count: u32,
    pub active_tracks: Vec<Track>,
    pub next_id: u64,
    pub held_total: u32,
    /// Last frame processed.
    pub frame: Option<u64>,
    /// Id of the newest track and whether it has been held.
    pub newest: Option<(u64, bool)>,
    /// Diagnostics from the most recent frame.
    pub rejected: Vec<String>,
}

impl CounterState {
    pub fn new() -> Self {
        Self::default()
    }

    /// True when the newest counted edge is held, or has left the image.
    pub fn newest_settled(&self) -> bool {
        match self.newest {
            None => false,
            Some((id, held)) => held || !self.active_tracks.iter().any(|t| t.id == id),
        }
    }

    /// Per-frame snapshot line.
    pub fn snapshot_json(&self) -> String {
        serde_json::json!({
            "frame": self.frame,
            "count": self.count,
            "held": self.held_total,
            "tracks": self.active_tracks.len(),
            "rejected": self.rejected,
        })
        .to_string()
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Processes the detections of one frame. Detections from other frames
/// or with non-finite coordinates are rejected and reported in `rejected`.
pub fn count_step(state: &CounterState, frame_index: u64, frame: &[EdgeDetection], params: &TrackParams) -> CounterState {
    let mut s = state.clone();
    s.rejected.clear();
    if let Some(prev) = s.frame {
        if frame_index <= prev {
            s.rejected.push(format!("frame {frame_index} is not after frame {prev}"));
            return s;
        }
    }
    s.frame = Some(frame_index);

    let mut dets: Vec<EdgeDetection> = Vec::with_capacity(frame.len());
    for (i, d) in frame.iter().enumerate() {
        if !d.is_well_formed() {
            s.rejected.push(format!("detection {i}: malformed"));
        } else if d.frame != frame_index {
            s.rejected.push(format!("detection {i}: frame {} in frame {frame_index}", d.frame));
        } else {
            dets.push(*d);
        }
    }
    // canonical order so that input permutation cannot matter
    dets.sort_by(|a, b| {
        a.center[1]
            .total_cmp(&b.center[1])
            .then(a.center[0].total_cmp(&b.center[0]))
            .then(a.confidence.total_cmp(&b.confidence))
    });

    let mut pairs: Vec<(f64, u64, usize, usize)> = Vec::new();
    for (ti, t) in s.active_tracks.iter().enumerate() {
        for (di, d) in dets.iter().enumerate() {
            let dd = dist(t.center, d.center);
            if dd <= params.gate_px {
                pairs.push((dd, t.id, di, ti));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; dets.len()];
    let mut track_used = vec![false; s.active_tracks.len()];
    for &(_, _, di, ti) in &pairs {
        if det_used[di] || track_used[ti] {
            continue;
        }
        det_used[di] = true;
        track_used[ti] = true;
        let t = &mut s.active_tracks[ti];
        t.center = dets[di].center;
        t.last_frame = frame_index;
    }
    for (di, d) in dets.iter().enumerate() {
        if det_used[di] {
            continue;
        }
        let id = s.next_id;
        s.next_id += 1;
        s.count += 1;
        s.active_tracks.push(Track { id, center: d.center, last_frame: frame_index, held: false });
        s.newest = Some((id, false));
    }
    for t in s.active_tracks.iter_mut() {
        if !t.held && t.center[1] >= params.threshold_row {
            t.held = true;
            s.held_total += 1;
            if let Some((id, h)) = s.newest.as_mut() {
                if *id == t.id {
                    *h = true;
                }
            }
        }
    }
    s.active_tracks.retain(|t| frame_index - t.last_frame <= params.ttl);
    s
}

/// Runs the counter over consecutive frames and returns the final state.
pub fn count_frames(frames: &[Vec<EdgeDetection>], first_frame: u64, params: &TrackParams) -> CounterState {
    let mut s = CounterState::new();
    for (i, f) in frames.iter().enumerate() {
        s = count_step(&s, first_frame + i as u64, f, params);
    }
    s
}

/// Fraction of trials whose final count equals the true count.
pub fn counting_accuracy(trials: &[(u32, u32)]) -> f64 {
    assert!(!trials.is_empty(), "counting accuracy needs at least one trial");
    trials.iter().filter(|(c, t)| c == t).count() as f64 / trials.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(frame: u64, row: f64) -> EdgeDetection {
        EdgeDetection { frame, center: [320.0, row], bbox: [0.0, row - 6.0, 640.0, row + 6.0], confidence: 0.9 }
    }

    #[test]
    fn empty_stream_counts_nothing() {
        let s = count_frames(&vec![Vec::new(); 20], 1, &TrackParams::default());
        assert_eq!(s.count, 0);
    }

    #[test]
    fn single_edge_crossing() {
        let frames: Vec<Vec<EdgeDetection>> = (0..4).map(|i| vec![det(i + 1, 225.0 + 9.0 * i as f64)]).collect();
        let s = count_frames(&frames, 1, &TrackParams::default());
        assert_eq!(s.count, 1);
        assert_eq!(s.held_total, 1);
        assert!(s.active_tracks[0].held);
    }

    #[test]
    fn missed_frame_is_debounced() {
        let frames = vec![vec![det(1, 220.0)], vec![], vec![det(3, 238.0)], vec![det(4, 247.0)]];
        assert_eq!(count_frames(&frames, 1, &TrackParams::default()).count, 1);
    }

    #[test]
    fn malformed_detection_is_rejected() {
        let mut bad = det(1, 230.0);
        bad.confidence = f64::NAN;
        let s = count_step(&CounterState::new(), 1, &[bad], &TrackParams::default());
        assert_eq!(s.count, 0);
        assert_eq!(s.rejected.len(), 1);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(counting_accuracy(&[(10, 10), (3, 3)]), 1.0);
        assert_eq!(counting_accuracy(&[(10, 10), (9, 10)]), 0.5);
    }
}
