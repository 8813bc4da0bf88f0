//! Straight-line, quadratic and piecewise-quadratic least squares.

use serde::{Deserialize, Serialize};

use super::lsq::{design, least_squares};
use super::{freq_label, FitReport};
use crate::error::{invalid, Error, Result};
use crate::machine::FREQ_EPS;
use crate::power::{BaselineCoeffs, BaselineSegment};

/// A breakpoint is accepted only if it reduces the SSE at least this much.
pub const BREAKPOINT_SSE_RATIO: f64 = 4.0;

/// SSE below this fraction of `sum(y^2)` is treated as an exact fit.
const EXACT_FIT_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub report: FitReport,
}

/// Ordinary least-squares line through `(x, y)`. Empty `labels` become `x=<value>`.
pub fn fit_line(xs: &[f64], ys: &[f64], labels: Vec<String>) -> Result<LineFit> {
    let labels = match labels.len() {
        0 => xs.iter().map(|x| format!("x={x}")).collect(),
        n if n == xs.len() => labels,
        n => return Err(invalid(format!("{n} labels for {} points", xs.len()))),
    };
    let coeffs = least_squares(design(xs, |x| [1.0, x]), ys)?;
    let (intercept, slope) = (coeffs[0], coeffs[1]);
    let residuals = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    Ok(LineFit {
        intercept,
        slope,
        report: FitReport::new(&[("intercept", intercept), ("slope", slope)], labels, residuals),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFit {
    /// `[w0, w1, w2]` for `w0 + w1 f + w2 f^2`.
    pub coeffs: [f64; 3],
    pub report: FitReport,
}

impl QuadraticFit {
    pub fn eval(&self, f: f64) -> f64 {
        let [w0, w1, w2] = self.coeffs;
        w0 + w1 * f + w2 * f * f
    }
}

fn distinct_count(xs: &[f64]) -> usize {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= FREQ_EPS);
    v.len()
}

/// Quadratic least squares on `(f, y)` pairs with caller-supplied labels.
pub(crate) fn fit_quadratic_labeled(points: &[(f64, f64)], labels: Vec<String>) -> Result<QuadraticFit> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let distinct = distinct_count(&xs);
    if distinct < 3 {
        return Err(Error::Degenerate(format!(
            "quadratic fit needs >= 3 distinct frequencies, got {distinct}"
        )));
    }
    let c = least_squares(design(&xs, |f| [1.0, f, f * f]), &ys)?;
    let coeffs = [c[0], c[1], c[2]];
    let residuals = points
        .iter()
        .map(|&(f, y)| y - (coeffs[0] + coeffs[1] * f + coeffs[2] * f * f))
        .collect();
    Ok(QuadraticFit {
        coeffs,
        report: FitReport::new(
            &[("w0", coeffs[0]), ("w1", coeffs[1]), ("w2", coeffs[2])],
            labels,
            residuals,
        ),
    })
}

/// Fits `y = w0 + w1 f + w2 f^2` by Householder QR on the basis `{1, f, f^2}`.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<QuadraticFit> {
    let labels = points.iter().map(|p| freq_label(p.0)).collect();
    fit_quadratic_labeled(points, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Breakpoint {
    Auto,
    At(f64),
}

impl std::str::FromStr for Breakpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Breakpoint::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|f| f.is_finite() && *f > 0.0)
            .map(Breakpoint::At)
            .ok_or_else(|| Error::Invalid(format!("breakpoint must be `auto` or a frequency in GHz, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFit {
    /// Segments spanning the data range.
    pub baseline: BaselineCoeffs,
    /// Chosen breakpoint, `None` for a single segment.
    pub breakpoint: Option<f64>,
    pub report: FitReport,
}

type Points = Vec<(f64, f64)>;

fn split_at(points: &[(f64, f64)], b: f64) -> (Points, Points) {
    points.iter().partition(|p| p.0 <= b + FREQ_EPS)
}

fn two_segment(points: &[(f64, f64)], b: f64) -> Result<(QuadraticFit, QuadraticFit)> {
    let (lo, hi) = split_at(points, b);
    Ok((fit_quadratic(&lo)?, fit_quadratic(&hi)?))
}

fn admissible(points: &[(f64, f64)], b: f64) -> bool {
    let (lo, hi) = split_at(points, b);
    let d = |v: &[(f64, f64)]| distinct_count(&v.iter().map(|p| p.0).collect::<Vec<_>>());
    d(&lo) >= 3 && d(&hi) >= 3
}

/// Quadratic fit with an optional breakpoint; the boundary point belongs to
/// the lower segment.
///
/// With [`Breakpoint::Auto`] every interior data frequency that leaves at
/// least three distinct frequencies on each side is tried and the lowest
/// total SSE wins, but the split is kept only if it beats the single
/// quadratic by [`BREAKPOINT_SSE_RATIO`].
pub fn fit_piecewise_quadratic(points: &[(f64, f64)], breakpoint: Breakpoint) -> Result<PiecewiseFit> {
    let single = fit_quadratic(points)?;
    let lower = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let upper = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mut notes = Vec::new();

    let chosen = match breakpoint {
        Breakpoint::At(b) => {
            if !admissible(points, b) {
                return Err(Error::Degenerate(format!(
                    "breakpoint {b} GHz leaves fewer than 3 distinct frequencies on one side"
                )));
            }
            Some(b)
        }
        Breakpoint::Auto => {
            let mut candidates: Vec<f64> = points.iter().map(|p| p.0).collect();
            candidates.sort_by(f64::total_cmp);
            candidates.dedup_by(|a, b| (*a - *b).abs() <= FREQ_EPS);
            let mut best: Option<(f64, f64)> = None;
            for &b in &candidates {
                if !admissible(points, b) {
                    continue;
                }
                let (lo, hi) = two_segment(points, b)?;
                let sse = lo.report.sse + hi.report.sse;
                if best.is_none_or(|(_, s)| sse < s) {
                    best = Some((b, sse));
                }
            }
            match best {
                None => {
                    notes.push("no admissible breakpoint (need >= 3 frequencies per side); using a single segment".into());
                    None
                }
                Some((b, sse_two)) => {
                    let sum_sq: f64 = points.iter().map(|p| p.1 * p.1).sum();
                    let exact = single.report.sse <= EXACT_FIT_FLOOR * sum_sq;
                    if !exact && BREAKPOINT_SSE_RATIO * sse_two <= single.report.sse {
                        notes.push(format!(
                            "breakpoint {b:.3} GHz: two-segment SSE {sse_two:e} vs single {:e}",
                            single.report.sse
                        ));
                        Some(b)
                    } else {
                        notes.push(format!(
                            "best breakpoint {b:.3} GHz rejected: two-segment SSE {sse_two:e} vs single {:e}",
                            single.report.sse
                        ));
                        None
                    }
                }
            }
        }
    };

    let seg = |upper_ghz: f64, q: &QuadraticFit| BaselineSegment {
        upper_ghz,
        w0: q.coeffs[0],
        w1: q.coeffs[1],
        w2: q.coeffs[2],
    };
    let (baseline, mut report) = match chosen {
        None => {
            let b = BaselineCoeffs {
                lower_ghz: lower,
                segments: vec![seg(upper, &single)],
            };
            (b, single.report)
        }
        Some(b) => {
            let (lo, hi) = two_segment(points, b)?;
            let baseline = BaselineCoeffs {
                lower_ghz: lower,
                segments: vec![seg(b, &lo), seg(upper, &hi)],
            };
            let mut used = lo.report.used;
            used.extend(hi.report.used);
            let mut residuals = lo.report.residuals;
            residuals.extend(hi.report.residuals);
            let params = [
                ("seg0.upper_ghz", b),
                ("seg0.w0", lo.coeffs[0]),
                ("seg0.w1", lo.coeffs[1]),
                ("seg0.w2", lo.coeffs[2]),
                ("seg1.upper_ghz", upper),
                ("seg1.w0", hi.coeffs[0]),
                ("seg1.w1", hi.coeffs[1]),
                ("seg1.w2", hi.coeffs[2]),
            ];
            (baseline, FitReport::new(&params, used, residuals))
        }
    };
    report.notes = notes;
    Ok(PiecewiseFit {
        baseline,
        breakpoint: chosen,
        report,
    })
}
