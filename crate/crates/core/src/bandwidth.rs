//! Measured saturated memory bandwidth versus clock settings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::machine::FREQ_EPS;

/// Which clock the bandwidth is interpolated along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthAxis {
    /// Varies with the core clock only (slaved-Uncore machines).
    Core,
    /// Varies with the Uncore clock only; the core clock is ignored.
    Uncore,
    /// Full two-dimensional grid, bilinear between grid nodes.
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRow {
    pub f_core_ghz: f64,
    pub f_uncore_ghz: f64,
    pub bandwidth_gbs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTable {
    pub axis: BandwidthAxis,
    pub rows: Vec<BandwidthRow>,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= FREQ_EPS
}

/// Piecewise-linear interpolation over `(x, y)` points sorted by `x`.
/// `None` when `x` lies outside the tabulated span.
fn interp_1d(points: &[(f64, f64)], x: f64) -> Option<f64> {
    if let Some(&(_, y)) = points.iter().find(|(px, _)| same(*px, x)) {
        return Some(y);
    }
    let hi = points.iter().position(|(px, _)| *px > x)?;
    if hi == 0 {
        return None;
    }
    let (x0, y0) = points[hi - 1];
    let (x1, y1) = points[hi];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

impl BandwidthTable {
    pub fn new(axis: BandwidthAxis, rows: Vec<BandwidthRow>) -> Result<Self> {
        let t = Self { axis, rows };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(invalid("bandwidth table has no rows"));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !(r.bandwidth_gbs.is_finite() && r.bandwidth_gbs > 0.0) {
                return Err(invalid(format!("bandwidth row {i}: bandwidth must be > 0")));
            }
            if !(r.f_core_ghz > 0.0 && r.f_uncore_ghz > 0.0) {
                return Err(invalid(format!("bandwidth row {i}: frequencies must be > 0")));
            }
            for other in &self.rows[..i] {
                let dup = match self.axis {
                    BandwidthAxis::Core => same(other.f_core_ghz, r.f_core_ghz),
                    BandwidthAxis::Uncore => same(other.f_uncore_ghz, r.f_uncore_ghz),
                    BandwidthAxis::Bilinear => {
                        same(other.f_core_ghz, r.f_core_ghz)
                            && same(other.f_uncore_ghz, r.f_uncore_ghz)
                    }
                };
                if dup {
                    return Err(invalid(format!(
                        "bandwidth row {i} duplicates frequency pair ({}, {}) on the {:?} axis",
                        r.f_core_ghz, r.f_uncore_ghz, self.axis
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads `f_core_ghz,f_uncore_ghz,bandwidth_gbs` CSV.
    pub fn read_csv<R: Read>(reader: R, axis: BandwidthAxis) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["f_core_ghz", "f_uncore_ghz", "bandwidth_gbs"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Schema(format!(
                "bandwidth table header must be `{}`, found `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            rows.push(rec?);
        }
        Self::new(axis, rows)
    }

    /// Writes the table as CSV with the same header `read_csv` expects.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn axis_points(&self, pick: impl Fn(&BandwidthRow) -> f64) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (pick(r), r.bandwidth_gbs)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }

    fn extrapolation(&self, f_core: f64, f_uncore: f64, detail: impl Into<String>) -> Error {
        Error::Extrapolation {
            f_core,
            f_uncore,
            detail: detail.into(),
        }
    }

    /// Saturated bandwidth in GB/s at the given clocks.
    pub fn lookup(&self, f_core: f64, f_uncore: f64) -> Result<f64> {
        match self.axis {
            BandwidthAxis::Core => {
                let pts = self.axis_points(|r| r.f_core_ghz);
                interp_1d(&pts, f_core).ok_or_else(|| {
                    self.extrapolation(f_core, f_uncore, self.span_detail(&pts, "f_core"))
                })
            }
            BandwidthAxis::Uncore => {
                let pts = self.axis_points(|r| r.f_uncore_ghz);
                interp_1d(&pts, f_uncore).ok_or_else(|| {
                    self.extrapolation(f_core, f_uncore, self.span_detail(&pts, "f_uncore"))
                })
            }
            BandwidthAxis::Bilinear => self.lookup_bilinear(f_core, f_uncore),
        }
    }

    fn span_detail(&self, pts: &[(f64, f64)], name: &str) -> String {
        format!(
            "{name} must lie within [{}, {}]",
            pts.first().map_or(f64::NAN, |p| p.0),
            pts.last().map_or(f64::NAN, |p| p.0)
        )
    }

    fn node(&self, c: f64, u: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| same(r.f_core_ghz, c) && same(r.f_uncore_ghz, u))
            .map(|r| r.bandwidth_gbs)
    }

    fn lookup_bilinear(&self, f_core: f64, f_uncore: f64) -> Result<f64> {
        if let Some(bw) = self.node(f_core, f_uncore) {
            return Ok(bw);
        }
        let bracket = |values: Vec<f64>, x: f64| -> Option<(f64, f64)> {
            let mut v = values;
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup_by(|a, b| same(*a, *b));
            if let Some(&e) = v.iter().find(|&&g| same(g, x)) {
                return Some((e, e));
            }
            let hi = v.iter().position(|&g| g > x)?;
            (hi > 0).then(|| (v[hi - 1], v[hi]))
        };
        let (c0, c1) = bracket(self.rows.iter().map(|r| r.f_core_ghz).collect(), f_core)
            .ok_or_else(|| self.extrapolation(f_core, f_uncore, "f_core outside the grid"))?;
        let (u0, u1) = bracket(self.rows.iter().map(|r| r.f_uncore_ghz).collect(), f_uncore)
            .ok_or_else(|| self.extrapolation(f_core, f_uncore, "f_uncore outside the grid"))?;
        let corner = |c, u| {
            self.node(c, u).ok_or_else(|| {
                self.extrapolation(
                    f_core,
                    f_uncore,
                    format!("grid node ({c}, {u}) missing for bilinear interpolation"),
                )
            })
        };
        let lerp = |a: f64, b: f64, x0: f64, x1: f64, x: f64| {
            if x1 == x0 {
                a
            } else {
                a + (b - a) * (x - x0) / (x1 - x0)
            }
        };
        let low = lerp(corner(c0, u0)?, corner(c1, u0)?, c0, c1, f_core);
        let high = lerp(corner(c0, u1)?, corner(c1, u1)?, c0, c1, f_core);
        Ok(lerp(low, high, u0, u1, f_uncore))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c: f64, u: f64, bw: f64) -> BandwidthRow {
        BandwidthRow {
            f_core_ghz: c,
            f_uncore_ghz: u,
            bandwidth_gbs: bw,
        }
    }

    #[test]
    fn exact_row_and_midpoint() {
        let t = BandwidthTable::new(
            BandwidthAxis::Core,
            vec![row(1.2, 1.2, 40.0), row(2.2, 2.2, 60.0)],
        )
        .unwrap();
        assert_eq!(t.lookup(1.2, 1.2).unwrap(), 40.0);
        assert_eq!(t.lookup(2.2, 2.2).unwrap(), 60.0);
        assert!((t.lookup(1.7, 1.7).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn below_table_is_an_error() {
        let t = BandwidthTable::new(
            BandwidthAxis::Core,
            vec![row(1.2, 1.2, 40.0), row(2.2, 2.2, 60.0)],
        )
        .unwrap();
        assert!(matches!(t.lookup(1.1, 1.1), Err(Error::Extrapolation { .. })));
        assert!(matches!(t.lookup(2.3, 2.3), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn uncore_axis_ignores_core_clock() {
        let t = BandwidthTable::new(
            BandwidthAxis::Uncore,
            vec![row(2.3, 1.2, 40.0), row(2.3, 2.8, 56.0)],
        )
        .unwrap();
        assert_eq!(t.lookup(1.2, 2.0).unwrap(), t.lookup(2.3, 2.0).unwrap());
        assert!((t.lookup(1.2, 2.0).unwrap() - 48.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_pairs_rejected() {
        let err = BandwidthTable::new(
            BandwidthAxis::Bilinear,
            vec![row(1.2, 1.2, 40.0), row(1.2, 1.2, 41.0)],
        );
        assert!(err.is_err());
        assert!(BandwidthTable::new(BandwidthAxis::Core, vec![]).is_err());
    }

    #[test]
    fn bilinear_grid() {
        let t = BandwidthTable::new(
            BandwidthAxis::Bilinear,
            vec![
                row(1.0, 1.0, 10.0),
                row(2.0, 1.0, 20.0),
                row(1.0, 2.0, 30.0),
                row(2.0, 2.0, 40.0),
            ],
        )
        .unwrap();
        assert!((t.lookup(1.5, 1.5).unwrap() - 25.0).abs() < 1e-12);
        assert!((t.lookup(1.0, 1.5).unwrap() - 20.0).abs() < 1e-12);
        assert!(t.lookup(2.5, 1.5).is_err());
    }

    #[test]
    fn csv_header_is_enforced() {
        let good = "f_core_ghz,f_uncore_ghz,bandwidth_gbs\n1.2,1.2,40\n2.2,2.2,60\n";
        let t = BandwidthTable::read_csv(good.as_bytes(), BandwidthAxis::Core).unwrap();
        assert_eq!(t.rows.len(), 2);
        let bad = "core,uncore,bw\n1.2,1.2,40\n";
        assert!(matches!(
            BandwidthTable::read_csv(bad.as_bytes(), BandwidthAxis::Core),
            Err(Error::Schema(_))
        ));
    }
}
