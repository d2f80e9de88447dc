//! Peak detection on sampled curves.
//!
//! Used for both transmission traces and mode histograms. A peak is a local
//! maximum (plateaus count once, at their center) whose prominence, measured
//! against the higher of the two lowest points reached before climbing back
//! above it on either side, is a large enough fraction of its height.

/// Detection settings. `min_separation` and `max_width` are in the units of
/// the abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Minimum prominence as a fraction of peak height, in `[0, 1]`.
    pub prominence: f64,
    /// Peaks closer than this are merged into the taller one.
    pub min_separation: f64,
    /// Peaks wider than this at half prominence are rejected.
    pub max_width: Option<f64>,
    /// Maxima lower than this are ignored.
    pub min_height: f64,
}

/// A detected maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPeak {
    /// Grid index of the sampled maximum.
    pub index: usize,
    /// Refined abscissa.
    pub x: f64,
    /// Sampled height.
    pub height: f64,
    /// Absolute prominence.
    pub prominence: f64,
    /// Full width at half prominence.
    pub width: f64,
    /// Whether parabolic refinement succeeded.
    pub refined: bool,
    /// Whether other candidate maxima within `min_separation` were absorbed.
    pub merged: bool,
}

/// Indices of local maxima; for a flat top, the middle sample.
pub fn local_maxima(y: &[f64]) -> Vec<usize> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Prominence of the maximum at `peak`.
pub fn prominence(y: &[f64], peak: usize) -> f64 {
    let h = y[peak];
    let mut left_min = h;
    for k in (0..peak).rev() {
        if y[k] > h {
            break;
        }
        left_min = left_min.min(y[k]);
    }
    let mut right_min = h;
    for &v in &y[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Full width at `level`, with linear interpolation at the crossings. The
/// search stops at the trace ends.
fn width_at(x: &[f64], y: &[f64], peak: usize, level: f64) -> f64 {
    let mut left = x[0];
    for k in (0..peak).rev() {
        if y[k] < level {
            let f = (level - y[k]) / (y[k + 1] - y[k]);
            left = x[k] + f * (x[k + 1] - x[k]);
            break;
        }
    }
    let mut right = x[x.len() - 1];
    for k in peak + 1..y.len() {
        if y[k] < level {
            let f = (y[k - 1] - level) / (y[k - 1] - y[k]);
            right = x[k - 1] + f * (x[k] - x[k - 1]);
            break;
        }
    }
    right - left
}

/// Vertex of the parabola through three samples on a uniform grid, as an
/// offset in grid steps. `None` if the samples are not concave.
fn parabolic_offset(a: f64, b: f64, c: f64) -> Option<f64> {
    let denom = a - 2.0 * b + c;
    if !(denom < 0.0) {
        return None;
    }
    let off = 0.5 * (a - c) / denom;
    (off.abs() <= 1.0).then_some(off)
}

fn refine(x: &[f64], y: &[f64], i: usize) -> (f64, bool) {
    if i == 0 || i + 1 >= y.len() {
        return (x[i], false);
    }
    let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
    let off = if a > 0.0 && b > 0.0 && c > 0.0 {
        parabolic_offset(a.ln(), b.ln(), c.ln())
    } else {
        parabolic_offset(a, b, c)
    };
    match off {
        Some(o) if o >= 0.0 => (x[i] + o * (x[i + 1] - x[i]), true),
        Some(o) => (x[i] + o * (x[i] - x[i - 1]), true),
        None => (x[i], false),
    }
}

/// Detect peaks in `y(x)`; `x` must be ascending. Returned in ascending `x`.
pub fn find_peaks(x: &[f64], y: &[f64], opts: &PeakOptions) -> Vec<RawPeak> {
    assert_eq!(x.len(), y.len(), "abscissa and ordinate lengths differ");
    let mut candidates: Vec<RawPeak> = local_maxima(y)
        .into_iter()
        .filter_map(|i| {
            let h = y[i];
            if !(h > 0.0) || h < opts.min_height {
                return None;
            }
            let prom = prominence(y, i);
            if prom < opts.prominence * h {
                return None;
            }
            let width = width_at(x, y, i, h - 0.5 * prom);
            if opts.max_width.is_some_and(|w| width > w) {
                return None;
            }
            let (xr, refined) = refine(x, y, i);
            Some(RawPeak { index: i, x: xr, height: h, prominence: prom, width, refined, merged: false })
        })
        .collect();

    // Greedy merge: tallest first, absorb anything within min_separation.
    candidates.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.index.cmp(&b.index)));
    let mut kept: Vec<RawPeak> = Vec::with_capacity(candidates.len());
    for c in candidates {
        match kept.iter_mut().find(|k| (k.x - c.x).abs() < opts.min_separation) {
            Some(k) => k.merged = true,
            None => kept.push(c),
        }
    }
    kept.sort_by(|a, b| a.x.total_cmp(&b.x));
    kept
}
