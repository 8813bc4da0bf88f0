//! Chip power as a function of active cores, core clock and Uncore clock.
//!
//! ```text
//! P_base(fu)    = W0b + W1b fu + W2b fu^2                (piecewise in fu)
//! P_core(fc, n) = W0c + (W1c fc + W2c fc^2) eps(n)^alpha
//! P_chip        = P_base(fu) + n P_core(fc, n)
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::machine::{FreqRange, FREQ_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineSegment {
    /// Inclusive upper Uncore clock bound of this segment.
    pub upper_ghz: f64,
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
}

impl BaselineSegment {
    pub fn eval(&self, f: f64) -> f64 {
        self.w0 + self.w1 * f + self.w2 * f * f
    }
}

/// Uncore-dependent baseline power, one quadratic per segment.
///
/// A frequency belongs to the first segment whose upper bound is not below
/// it, so a boundary value belongs to the lower segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCoeffs {
    pub lower_ghz: f64,
    pub segments: Vec<BaselineSegment>,
}

impl BaselineCoeffs {
    pub fn single(lower_ghz: f64, upper_ghz: f64, w: [f64; 3]) -> Self {
        Self {
            lower_ghz,
            segments: vec![BaselineSegment {
                upper_ghz,
                w0: w[0],
                w1: w[1],
                w2: w[2],
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(invalid("baseline needs at least one segment"));
        }
        let mut prev = self.lower_ghz;
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.upper_ghz > prev || (i == 0 && s.upper_ghz >= prev)) {
                return Err(invalid(format!(
                    "baseline segment bounds must increase strictly (segment {i} upper {} after {prev})",
                    s.upper_ghz
                )));
            }
            if ![s.w0, s.w1, s.w2].iter().all(|w| w.is_finite()) {
                return Err(invalid(format!("baseline segment {i} has non-finite coefficients")));
            }
            prev = s.upper_ghz;
        }
        Ok(())
    }

    pub fn upper_ghz(&self) -> f64 {
        self.segments.last().map_or(self.lower_ghz, |s| s.upper_ghz)
    }

    pub fn segment_for(&self, f_uncore: f64) -> Result<&BaselineSegment> {
        if f_uncore < self.lower_ghz - FREQ_EPS {
            return Err(self.range_error(f_uncore));
        }
        self.segments
            .iter()
            .find(|s| f_uncore <= s.upper_ghz + FREQ_EPS)
            .ok_or_else(|| self.range_error(f_uncore))
    }

    fn range_error(&self, f: f64) -> Error {
        Error::OutOfRange {
            what: "f_uncore",
            value: f,
            min: self.lower_ghz,
            max: self.upper_ghz(),
        }
    }
}

/// Baseline power in W at the given Uncore clock.
pub fn p_base(f_uncore: f64, b: &BaselineCoeffs) -> Result<f64> {
    Ok(b.segment_for(f_uncore)?.eval(f_uncore))
}

/// Per-core power coefficients of one kernel; coefficients may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreCoeffs {
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    /// Damping exponent applied to the parallel efficiency.
    pub alpha: f64,
}

impl CoreCoeffs {
    pub fn dynamic(&self, f: f64) -> f64 {
        self.w1 * f + self.w2 * f * f
    }

    /// Per-core power without range checks.
    pub fn eval(&self, f_core: f64, eps: f64) -> f64 {
        self.w0 + self.dynamic(f_core) * damping(eps, self.alpha)
    }
}

/// `eps^alpha`, exactly 1 when either `eps = 1` or `alpha = 0`.
pub fn damping(eps: f64, alpha: f64) -> f64 {
    if eps == 1.0 || alpha == 0.0 {
        1.0
    } else {
        eps.powf(alpha)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 + 1e-12 {
        Ok(())
    } else {
        Err(invalid(format!("parallel efficiency must lie in (0, 1], got {eps}")))
    }
}

/// Per-core power in W; only the dynamic part is damped.
pub fn p_core(f_core: f64, eps: f64, c: &CoreCoeffs, core_range: &FreqRange) -> Result<f64> {
    core_range.check("f_core", f_core)?;
    check_eps(eps)?;
    Ok(c.eval(f_core, eps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    /// Kernel-independent baseline.
    pub baseline: BaselineCoeffs,
    /// Supported core clock range.
    pub core_range: FreqRange,
    pub per_kernel_core: BTreeMap<String, CoreCoeffs>,
}

impl PowerParams {
    pub fn core(&self, kernel: &str) -> Result<&CoreCoeffs> {
        self.per_kernel_core
            .get(kernel)
            .ok_or_else(|| Error::UnknownKernel(kernel.to_string()))
    }
}

/// Chip power in W with `n` active cores (`n = 0` gives the baseline).
pub fn p_chip(
    n: u32,
    f_core: f64,
    f_uncore: f64,
    eps: f64,
    p: &PowerParams,
    kernel: &str,
) -> Result<f64> {
    let core = p.core(kernel)?;
    let base = p_base(f_uncore, &p.baseline)?;
    let per_core = p_core(f_core, eps, core, &p.core_range)?;
    Ok(base + n as f64 * per_core)
}

/// Reference coefficient sets for the two test-bed chips (single socket).
pub mod reference {
    use super::*;

    pub const SNB_BASE: [f64; 3] = [14.62, 1.07, 1.02];
    pub const SNB_DGEMM: CoreCoeffs = CoreCoeffs {
        w0: 1.42,
        w1: -0.52,
        w2: 1.51,
        alpha: 0.0,
    };
    pub const SNB_STREAM: CoreCoeffs = CoreCoeffs {
        w0: 1.33,
        w1: 0.80,
        w2: 1.22,
        alpha: 0.4,
    };
    pub const BDW_BASE_LOW: [f64; 3] = [27.2, -6.45, 5.71];
    pub const BDW_BASE_HIGH: [f64; 3] = [70.8, -44.1, 13.1];
    /// Uncore clock at which the two BDW baseline fits meet (inclusive low side).
    pub const BDW_BREAK_GHZ: f64 = 1.7;
    pub const BDW_DGEMM: CoreCoeffs = CoreCoeffs {
        w0: -0.11,
        w1: -1.46,
        w2: 1.47,
        alpha: 0.0,
    };
    pub const BDW_STREAM: CoreCoeffs = CoreCoeffs {
        w0: 0.45,
        w1: 2.95,
        w2: -0.24,
        alpha: 0.5,
    };

    pub fn snb_baseline() -> BaselineCoeffs {
        BaselineCoeffs::single(1.2, 2.7, SNB_BASE)
    }

    pub fn bdw_baseline() -> BaselineCoeffs {
        let seg = |upper_ghz, w: [f64; 3]| BaselineSegment {
            upper_ghz,
            w0: w[0],
            w1: w[1],
            w2: w[2],
        };
        BaselineCoeffs {
            lower_ghz: 1.2,
            segments: vec![seg(BDW_BREAK_GHZ, BDW_BASE_LOW), seg(2.8, BDW_BASE_HIGH)],
        }
    }

    pub fn snb_params() -> PowerParams {
        PowerParams {
            baseline: snb_baseline(),
            core_range: FreqRange::new(1.2, 2.7, 0.1),
            per_kernel_core: BTreeMap::from([
                ("dgemm".to_string(), SNB_DGEMM),
                ("stream".to_string(), SNB_STREAM),
            ]),
        }
    }

    pub fn bdw_params() -> PowerParams {
        PowerParams {
            baseline: bdw_baseline(),
            core_range: FreqRange::new(1.2, 2.3, 0.1),
            per_kernel_core: BTreeMap::from([
                ("dgemm".to_string(), BDW_DGEMM),
                ("stream".to_string(), BDW_STREAM),
            ]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::reference::*;
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn baseline_examples() {
        // 14.62 + 1.07 * 2.7 + 1.02 * 2.7^2
        let snb = p_base(2.7, &snb_baseline()).unwrap();
        assert_relative_eq!(snb, 24.9448, max_relative = 1e-12);
        assert!((snb - 24.94).abs() < 5e-3);
        // 27.2 - 6.45 * 1.2 + 5.71 * 1.44
        let bdw = p_base(1.2, &bdw_baseline()).unwrap();
        assert_relative_eq!(bdw, 27.6824, max_relative = 1e-12);
        let flat = BaselineCoeffs::single(1.0, 3.0, [20.0, 0.0, 0.0]);
        for f in [1.0, 1.7, 2.3, 3.0] {
            assert_eq!(p_base(f, &flat).unwrap(), 20.0);
        }
    }

    #[test]
    fn boundary_belongs_to_lower_segment() {
        let b = bdw_baseline();
        let low = BDW_BASE_LOW[0] + BDW_BASE_LOW[1] * 1.7 + BDW_BASE_LOW[2] * 1.7 * 1.7;
        assert_eq!(p_base(1.7, &b).unwrap(), low);
        let high = BDW_BASE_HIGH[0] + BDW_BASE_HIGH[1] * 1.8 + BDW_BASE_HIGH[2] * 1.8 * 1.8;
        assert_eq!(p_base(1.8, &b).unwrap(), high);
    }

    #[test]
    fn baseline_out_of_range() {
        let err = p_base(3.0, &bdw_baseline()).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { min, max, .. } if min == 1.2 && max == 2.8));
        assert!(p_base(1.1, &bdw_baseline()).is_err());
    }

    #[test]
    fn core_examples() {
        let r = FreqRange::new(1.2, 2.7, 0.1);
        // 1.42 - 0.52 * 2.7 + 1.51 * 7.29
        let p = p_core(2.7, 1.0, &SNB_DGEMM, &r).unwrap();
        assert_relative_eq!(p, 11.0239, max_relative = 1e-12);
        let heavy = CoreCoeffs { alpha: 1.7, ..SNB_STREAM };
        assert_eq!(damping(1.0, heavy.alpha), 1.0);
        assert_eq!(p_core(2.0, 1.0, &heavy, &r).unwrap(), heavy.w0 + heavy.dynamic(2.0));
        let undamped = CoreCoeffs { alpha: 0.0, ..SNB_STREAM };
        assert_eq!(
            p_core(2.0, 0.3, &undamped, &r).unwrap(),
            p_core(2.0, 1.0, &undamped, &r).unwrap()
        );
        assert!(p_core(2.8, 1.0, &SNB_DGEMM, &r).is_err());
        assert!(p_core(2.0, 0.0, &SNB_DGEMM, &r).is_err());
        assert!(p_core(2.0, 1.5, &SNB_DGEMM, &r).is_err());
    }

    #[test]
    fn damping_reduces_dynamic_power() {
        let r = FreqRange::new(1.2, 2.7, 0.1);
        let full = p_core(2.0, 1.0, &SNB_STREAM, &r).unwrap();
        let damped = p_core(2.0, 0.7, &SNB_STREAM, &r).unwrap();
        assert!(damped < full);
    }

    #[test]
    fn chip_examples() {
        let p = snb_params();
        assert_eq!(
            p_chip(0, 2.7, 2.7, 1.0, &p, "dgemm").unwrap(),
            p_base(2.7, &p.baseline).unwrap()
        );
        let full = p_chip(8, 2.7, 2.7, 1.0, &p, "dgemm").unwrap();
        assert!((full - 113.1).abs() < 0.05, "{full}");
        let low = p_chip(8, 1.4, 1.4, 1.0, &p, "dgemm").unwrap();
        assert!((low - 47.3).abs() < 0.05, "{low}");
        assert!(matches!(
            p_chip(8, 2.7, 2.7, 1.0, &p, "graph500"),
            Err(Error::UnknownKernel(_))
        ));
    }

    #[test]
    fn chip_power_is_affine_in_cores() {
        let p = bdw_params();
        let d: Vec<f64> = (0..18)
            .map(|n| {
                p_chip(n + 1, 2.0, 2.4, 0.8, &p, "stream").unwrap()
                    - p_chip(n, 2.0, 2.4, 0.8, &p, "stream").unwrap()
            })
            .collect();
        for x in &d {
            assert_relative_eq!(*x, d[0], max_relative = 1e-12);
        }
    }
}
