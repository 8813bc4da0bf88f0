use std::fmt;

use crate::error::{invalid, Result};

/// A rate unit such as `GF/s` or `MUP/s`: optional SI prefix, base work
/// name, `/s`. Internally all performance values are work items per second.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfUnit {
    label: String,
    scale: f64,
}

impl PerfUnit {
    pub fn parse(label: &str) -> Result<Self> {
        let base = label
            .strip_suffix("/s")
            .filter(|b| !b.is_empty())
            .ok_or_else(|| invalid(format!("performance unit `{label}` must look like `<work>/s`")))?;
        let mut chars = base.chars();
        let first = chars.next().expect("non-empty");
        let has_rest = chars.next().is_some();
        let scale = match first {
            'k' if has_rest => 1e3,
            'M' if has_rest => 1e6,
            'G' if has_rest => 1e9,
            'T' if has_rest => 1e12,
            _ => 1.0,
        };
        Ok(Self {
            label: label.to_string(),
            scale,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Work items per second represented by one unit.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn to_base(&self, v: f64) -> f64 {
        v * self.scale
    }

    pub fn from_base(&self, v: f64) -> f64 {
        v / self.scale
    }
}

impl fmt::Display for PerfUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}
