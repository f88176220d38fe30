use crate::error::{Error, Result};
use crate::flow::FlowRecord;
use crate::window::WindowGrid;

/// Three contiguous time segments of one capture.
#[derive(Clone, Debug, PartialEq)]
pub struct ChronoSplit {
    pub train: Vec<FlowRecord>,
    pub val: Vec<FlowRecord>,
    pub test: Vec<FlowRecord>,
    /// Grid origin shared by all three segments.
    pub origin: f64,
    /// Start of the validation and test segments (window edges).
    pub boundaries: [f64; 2],
    /// Segments that received no flows.
    pub warnings: Vec<String>,
}

/// Splits time-sorted flows by start time. Boundary `k` is the start time of
/// the flow at index `round(cum_ratio_k · n)`, moved down to the edge of the
/// window containing it, so no window straddles two segments.
pub fn chronological_split(flows: &[FlowRecord], ratios: [f64; 3], window_size: f64) -> Result<ChronoSplit> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must be in [0, 1] and sum to 1, got {ratios:?}"
        )));
    }
    if window_size.is_nan() || window_size <= 0.0 {
        return Err(Error::Config(format!("window_size must be > 0, got {window_size}")));
    }
    let n = flows.len();
    let origin = flows.first().map_or(0.0, |f| f.start_time);
    let grid = WindowGrid {
        origin,
        size: window_size,
    };
    let boundary = |cum: f64| {
        let idx = (cum * n as f64).round() as usize;
        if idx >= n {
            f64::INFINITY
        } else {
            grid.start(grid.index_of(flows[idx].start_time))
        }
    };
    let b1 = boundary(ratios[0]);
    let b2 = boundary(ratios[0] + ratios[1]).max(b1);
    let mut split = ChronoSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        origin,
        boundaries: [b1, b2],
        warnings: Vec::new(),
    };
    for f in flows {
        let seg = if f.start_time < b1 {
            &mut split.train
        } else if f.start_time < b2 {
            &mut split.val
        } else {
            &mut split.test
        };
        seg.push(f.clone());
    }
    for (name, seg) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        if seg.is_empty() {
            split.warnings.push(format!("{name} split received no flows"));
        }
    }
    Ok(split)
}
