//! Empirical ROC curves, histograms, and integration-gain estimation.
//!
//! A curve is built by sweeping the threshold over every observed detector
//! value (no distributional assumptions) and counting strict exceedances in
//! the on and off series. The smallest resolvable false-alarm probability is
//! 1/n_off; interpolation below 10 off-window exceedances is flagged.

use crate::detectors::DetectorSeries;
use std::io::{BufRead, Write};
use thiserror::Error;

/// Errors from ROC construction and evaluation.
#[derive(Debug, Error)]
pub enum RocError {
    #[error("mismatched series: {0}")]
    MismatchedSeries(String),
    #[error("empty detector series")]
    EmptySeries,
    #[error("target p_fa {target:e} is outside the resolvable range [{lo:e}, {hi:e}]")]
    UnresolvablePfa { target: f64, lo: f64, hi: f64 },
    #[error("gain objective has no interior minimum on the scan grid")]
    NoInteriorMinimum,
    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One threshold point of a ROC curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub p_fa: f64,
    pub p_d: f64,
}

/// Ordered (threshold, p_fa, p_d) sweep; thresholds increase, probabilities
/// are nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub n_windows_on: usize,
    pub n_windows_off: usize,
    pub window_len: usize,
}

impl RocCurve {
    /// Smallest false-alarm probability this curve can resolve; 0 when the
    /// off-window count is unknown (e.g. a curve read back from CSV).
    pub fn pfa_floor(&self) -> f64 {
        if self.n_windows_off == 0 {
            0.0
        } else {
            1.0 / self.n_windows_off as f64
        }
    }

    /// Area under the curve by trapezoid in (p_fa, p_d).
    pub fn auc(&self) -> f64 {
        // points run from (1,1) down to (0,0); integrate in decreasing p_fa
        let mut area = 0.0;
        for pair in self.points.windows(2) {
            area += (pair[0].p_fa - pair[1].p_fa) * 0.5 * (pair[0].p_d + pair[1].p_d);
        }
        area
    }
}

/// Builds the empirical ROC curve from matched on/off series.
///
/// Thresholds are the sorted, deduplicated union of the observed values with
/// one extra point just below the minimum, so the sweep includes the (1, 1)
/// and (0, 0) endpoints. Exceedance is strict (value > threshold).
pub fn roc_from_series(on: &DetectorSeries, off: &DetectorSeries) -> Result<RocCurve, RocError> {
    if on.values.is_empty() || off.values.is_empty() {
        return Err(RocError::EmptySeries);
    }
    if on.detector_id != off.detector_id {
        return Err(RocError::MismatchedSeries(format!(
            "{} vs {}",
            on.detector_id, off.detector_id
        )));
    }
    if on.window_len != off.window_len {
        return Err(RocError::MismatchedSeries(format!(
            "window_len {} vs {}",
            on.window_len, off.window_len
        )));
    }
    let mut on_sorted = on.values.clone();
    let mut off_sorted = off.values.clone();
    on_sorted.sort_by(f64::total_cmp);
    off_sorted.sort_by(f64::total_cmp);

    let mut thresholds: Vec<f64> = Vec::with_capacity(on_sorted.len() + off_sorted.len() + 1);
    let global_min = on_sorted[0].min(off_sorted[0]);
    thresholds.push(next_down(global_min));
    thresholds.extend_from_slice(&on_sorted);
    thresholds.extend_from_slice(&off_sorted);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let exceeding = |sorted: &[f64], t: f64| {
        // strict '>' via partition point over the sorted values
        sorted.len() - sorted.partition_point(|v| *v <= t)
    };
    let points = thresholds
        .iter()
        .map(|&t| RocPoint {
            threshold: t,
            p_fa: exceeding(&off_sorted, t) as f64 / off_sorted.len() as f64,
            p_d: exceeding(&on_sorted, t) as f64 / on_sorted.len() as f64,
        })
        .collect();
    Ok(RocCurve {
        points,
        n_windows_on: on.values.len(),
        n_windows_off: off.values.len(),
        window_len: on.window_len,
    })
}

fn next_down(x: f64) -> f64 {
    if x.is_finite() {
        f64::from_bits(if x > 0.0 {
            x.to_bits() - 1
        } else if x < 0.0 {
            x.to_bits() + 1
        } else {
            (-f64::MIN_POSITIVE).to_bits()
        })
    } else {
        x
    }
}

/// Detection probability read off a curve at a target false-alarm rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdAtPfa {
    pub p_d: f64,
    /// Fewer than 10 off windows exceeded the implied threshold, so the
    /// estimate rides on a handful of events.
    pub low_resolution: bool,
}

/// Interpolates p_d at `target_pfa`, linearly in log(p_fa) between the
/// distinct observed p_fa levels (taking the best p_d at each level).
pub fn pd_at_pfa(curve: &RocCurve, target_pfa: f64) -> Result<PdAtPfa, RocError> {
    let floor = curve.pfa_floor();
    if !target_pfa.is_finite()
        || target_pfa <= 0.0
        || target_pfa > 1.0
        || (floor > 0.0 && target_pfa < floor)
    {
        return Err(RocError::UnresolvablePfa {
            target: target_pfa,
            lo: floor,
            hi: 1.0,
        });
    }
    // staircase of (pfa, best pd) with strictly decreasing pfa
    let mut stair: Vec<(f64, f64)> = Vec::new();
    for p in &curve.points {
        match stair.last_mut() {
            Some((pfa, pd)) if *pfa == p.p_fa => {
                *pd = pd.max(p.p_d);
            }
            _ => stair.push((p.p_fa, p.p_d)),
        }
    }
    // points are threshold-ascending, so pfa descends along `stair`
    let positive: Vec<(f64, f64)> = stair.iter().copied().filter(|(pfa, _)| *pfa > 0.0).collect();
    let lo = positive.last().map(|v| v.0).unwrap_or(1.0);
    if target_pfa < lo {
        return Err(RocError::UnresolvablePfa {
            target: target_pfa,
            lo,
            hi: 1.0,
        });
    }
    let low_resolution = target_pfa * curve.n_windows_off as f64 > 0.0
        && (target_pfa * curve.n_windows_off as f64) < 10.0;
    // exact hit or bracket
    for pair in positive.windows(2) {
        let (hi_pfa, hi_pd) = pair[0];
        let (lo_pfa, lo_pd) = pair[1];
        if target_pfa == hi_pfa {
            return Ok(PdAtPfa {
                p_d: hi_pd,
                low_resolution,
            });
        }
        if target_pfa < hi_pfa && target_pfa >= lo_pfa {
            let w = (target_pfa.ln() - lo_pfa.ln()) / (hi_pfa.ln() - lo_pfa.ln());
            return Ok(PdAtPfa {
                p_d: lo_pd + w * (hi_pd - lo_pd),
                low_resolution,
            });
        }
    }
    if let Some(&(pfa, pd)) = positive.last() {
        if target_pfa == pfa {
            return Ok(PdAtPfa {
                p_d: pd,
                low_resolution,
            });
        }
    }
    Err(RocError::UnresolvablePfa {
        target: target_pfa,
        lo,
        hi: 1.0,
    })
}

/// Result of an integration-gain scan.
#[derive(Debug, Clone)]
pub struct GainEstimate {
    /// Sample-count factor k at the objective minimum: radar B needs k times
    /// the samples of radar A for matching detection probabilities.
    pub factor: f64,
    pub objective: f64,
    /// Full (k, objective) trace of the scan, for reporting.
    pub trace: Vec<(f64, f64)>,
}

/// Points per octave of the geometric gain grid; resolves a factor-8 gain to
/// about 1%.
pub const GAIN_GRID_PER_OCTAVE: usize = 65;

/// Scans k over a geometric grid spanning [1/32, 32] and minimizes
/// `sum_i (pd_a(pfa_i) - pd_b(pfa_i; k N_b))^2`.
///
/// `pd_a` evaluates radar A at its fixed sample count; `pd_b_scaled(k, grid)`
/// evaluates radar B at k times its sample count. Errors if the minimum sits
/// on the grid edge (the radars are too far apart to match within the span).
pub fn integration_gain<E>(
    pd_a: impl Fn(&[f64]) -> Result<Vec<f64>, E>,
    pd_b_scaled: impl Fn(f64, &[f64]) -> Result<Vec<f64>, E>,
    pfa_grid: &[f64],
) -> Result<GainEstimate, E>
where
    E: From<RocError>,
{
    let reference = pd_a(pfa_grid)?;
    let octaves = 10; // 2^-5 .. 2^5
    let steps = octaves * GAIN_GRID_PER_OCTAVE;
    let mut trace = Vec::with_capacity(steps + 1);
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=steps {
        let k = 2.0_f64.powf(-5.0 + i as f64 / GAIN_GRID_PER_OCTAVE as f64);
        let scaled = pd_b_scaled(k, pfa_grid)?;
        let objective: f64 = reference
            .iter()
            .zip(scaled.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        if objective < best.1 {
            best = (i, objective);
        }
        trace.push((k, objective));
    }
    if best.0 == 0 || best.0 == steps {
        return Err(RocError::NoInteriorMinimum.into());
    }
    Ok(GainEstimate {
        factor: trace[best.0].0,
        objective: best.1,
        trace,
    })
}

/// One histogram bin with per-condition counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistBin {
    pub left: f64,
    pub right: f64,
    pub count_on: usize,
    pub count_off: usize,
}

/// Histograms plus the summary statistics printed by the CLI.
#[derive(Debug, Clone)]
pub struct Summary {
    pub bins: Vec<HistBin>,
    pub mean_on: f64,
    pub mean_off: f64,
    pub se_on: f64,
    pub se_off: f64,
}

/// Equal-width binning over the pooled range of both series.
pub fn summarize(on: &DetectorSeries, off: &DetectorSeries, bins: usize) -> Result<Summary, RocError> {
    if on.values.is_empty() || off.values.is_empty() || bins == 0 {
        return Err(RocError::EmptySeries);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in on.values.iter().chain(off.values.iter()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let index = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
    let mut out: Vec<HistBin> = (0..bins)
        .map(|b| HistBin {
            left: lo + b as f64 * width,
            right: lo + (b + 1) as f64 * width,
            count_on: 0,
            count_off: 0,
        })
        .collect();
    for &v in &on.values {
        out[index(v)].count_on += 1;
    }
    for &v in &off.values {
        out[index(v)].count_off += 1;
    }
    Ok(Summary {
        bins: out,
        mean_on: on.mean(),
        mean_off: off.mean(),
        se_on: on.standard_error(),
        se_off: off.standard_error(),
    })
}

// --- CSV schemas -----------------------------------------------------------
//
// All floating-point fields are written with 17 significant digits so that
// rereading reproduces the exact f64 values.

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `roc.csv`: threshold,p_fa,p_d.
pub fn write_roc_csv<W: Write>(curve: &RocCurve, mut w: W) -> Result<(), RocError> {
    writeln!(w, "threshold,p_fa,p_d")?;
    for p in &curve.points {
        writeln!(w, "{},{},{}", fmt(p.threshold), fmt(p.p_fa), fmt(p.p_d))?;
    }
    Ok(())
}

/// Reads the `roc.csv` schema back; window counts are unknown after a round
/// trip, so the curve's resolution floor is taken from its smallest positive
/// p_fa instead.
pub fn read_roc_csv<R: BufRead>(r: R) -> Result<RocCurve, RocError> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(RocError::Csv {
        line: 1,
        message: "empty file".into(),
    })?;
    let header = header?;
    if header.trim() != "threshold,p_fa,p_d" {
        return Err(RocError::Csv {
            line: 1,
            message: format!("expected header 'threshold,p_fa,p_d', found {header:?}"),
        });
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(RocError::Csv {
                line: idx + 1,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64, RocError> {
            s.trim().parse().map_err(|_| RocError::Csv {
                line: idx + 1,
                message: format!("not a number: {s:?}"),
            })
        };
        let (threshold, p_fa, p_d) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
        if !(0.0..=1.0).contains(&p_fa) || !(0.0..=1.0).contains(&p_d) {
            return Err(RocError::Csv {
                line: idx + 1,
                message: "probabilities must lie in [0, 1]".into(),
            });
        }
        points.push(RocPoint {
            threshold,
            p_fa,
            p_d,
        });
    }
    if points.is_empty() {
        return Err(RocError::Csv {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok(RocCurve {
        points,
        n_windows_on: 0,
        n_windows_off: 0,
        window_len: 0,
    })
}

/// Writes `series.csv`: window_index,value,condition — the on series first,
/// then the off series.
pub fn write_series_csv<W: Write>(
    on: &DetectorSeries,
    off: &DetectorSeries,
    mut w: W,
) -> Result<(), RocError> {
    writeln!(w, "window_index,value,condition")?;
    for series in [on, off] {
        for (i, v) in series.values.iter().enumerate() {
            writeln!(w, "{},{},{}", i, fmt(*v), series.condition.as_str())?;
        }
    }
    Ok(())
}

/// Writes `hist.csv`: bin_left,bin_right,count_on,count_off.
pub fn write_hist_csv<W: Write>(summary: &Summary, mut w: W) -> Result<(), RocError> {
    writeln!(w, "bin_left,bin_right,count_on,count_off")?;
    for b in &summary.bins {
        writeln!(
            w,
            "{},{},{},{}",
            fmt(b.left),
            fmt(b.right),
            b.count_on,
            b.count_off
        )?;
    }
    Ok(())
}
