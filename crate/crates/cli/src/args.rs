use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ecm_energy::explore::{frequency_path, DEFAULT_GRID_STEP};
use ecm_energy::fit::DEFAULT_EFFICIENCY_CUTOFF;
use ecm_energy::stats::DEFAULT_MAX_CV;
use ecm_energy::{Bins, Breakpoint, Objective};

#[derive(Debug, Parser)]
#[command(name = "ecm-energy", version, about = "Fit, predict and optimize chip performance and energy models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model file from measurement records.
    Fit(FitArgs),
    /// Predict performance, power and energy at one operating point.
    Predict(PredictArgs),
    /// Search the operating-point grid for the best point.
    Optimize(OptimizeArgs),
    /// Energy versus performance along a one-parameter sweep.
    Zplot(ZplotArgs),
    /// Statistics of fitted parameters across chips.
    Fleet(FleetArgs),
    /// Relative model error against measurement records.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file (written atomically); standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Machine description (JSON).
    #[arg(long)]
    pub machine: PathBuf,
    /// Kernel catalog (JSON).
    #[arg(long)]
    pub kernels: PathBuf,
    /// Measurement records (CSV).
    #[arg(long)]
    pub measurements: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Chip to fit when the records cover several.
    #[arg(long)]
    pub chip: Option<String>,
    /// Minimum parallel efficiency of points used in the zero-core extrapolation.
    #[arg(long, default_value_t = DEFAULT_EFFICIENCY_CUTOFF, value_parser = parse_fraction)]
    pub efficiency_cutoff: f64,
    /// Baseline breakpoint: `auto` or an Uncore clock in GHz.
    #[arg(long, default_value = "auto", value_parser = parse_breakpoint)]
    pub breakpoint: Breakpoint,
    /// Largest accepted coefficient of variation among repeated rows.
    #[arg(long, default_value_t = DEFAULT_MAX_CV, value_parser = parse_positive)]
    pub max_cv: f64,
    /// Comma-separated kernels used for the zero-core extrapolation (default: all scalable kernels).
    #[arg(long, value_delimiter = ',')]
    pub baseline_kernels: Option<Vec<String>>,
    /// Fit timestamp (RFC 3339); defaults to SOURCE_DATE_EPOCH or the current time.
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub kernel: String,
    /// Active cores.
    #[arg(long)]
    pub n: u32,
    /// Core clock in GHz.
    #[arg(long)]
    pub f_core: f64,
    /// Uncore clock in GHz; follows the core on slaved machines and defaults to the maximum otherwise.
    #[arg(long)]
    pub f_uncore: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub kernel: String,
    /// min-energy, max-performance or min-edp.
    #[arg(long, default_value = "min-energy", value_parser = parse_objective)]
    pub objective: Objective,
    /// Frequency step of the search grid in GHz.
    #[arg(long, default_value_t = DEFAULT_GRID_STEP, value_parser = parse_positive)]
    pub grid_step: f64,
    /// Core-count range `lo:hi` (default: all cores).
    #[arg(long, value_parser = parse_core_range)]
    pub cores: Option<(u32, u32)>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ZplotArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub kernel: String,
    /// Core counts: `8`, `1:8` or `1,2,4` (default: all cores).
    #[arg(long, value_parser = parse_counts)]
    pub n: Option<Counts>,
    /// Core clocks in GHz: `2.0`, `1.2:2.7:0.1` or `1.2,2.0` (default: maximum).
    #[arg(long, value_parser = parse_freqs)]
    pub f_core: Option<Freqs>,
    /// Uncore clocks in GHz, same syntax (independent machines only).
    #[arg(long, value_parser = parse_freqs)]
    pub f_uncore: Option<Freqs>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct FleetArgs {
    /// Model files, one per chip.
    #[arg(long, num_args = 1.., required = true)]
    pub models: Vec<PathBuf>,
    /// Directory receiving one histogram CSV per parameter.
    #[arg(long)]
    pub histograms: Option<PathBuf>,
    /// Histogram bins: `auto` or a count.
    #[arg(long, default_value = "auto", value_parser = parse_bins)]
    pub bins: Bins,
    /// Pairwise parameter correlations (CSV).
    #[arg(long)]
    pub correlations: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub measurements: PathBuf,
    /// Only records of this chip (default: the model's chip).
    #[arg(long)]
    pub chip: Option<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counts(pub Vec<u32>);

#[derive(Debug, Clone, PartialEq)]
pub struct Freqs(pub Vec<f64>);

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("`{s}` is not a number"))
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err("expected a fraction in (0, 1], e.g. 0.9".into())
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("expected a positive number".into())
    }
}

fn parse_breakpoint(s: &str) -> Result<Breakpoint, String> {
    s.parse().map_err(|_| "expected `auto` or an Uncore clock in GHz, e.g. 1.7".to_string())
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse().map_err(|_| "expected min-energy, max-performance or min-edp".to_string())
}

fn parse_bins(s: &str) -> Result<Bins, String> {
    s.parse().map_err(|_| "expected `auto` or a positive bin count".to_string())
}

fn parse_count(s: &str) -> Result<u32, String> {
    match s.trim().parse::<u32>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("`{s}` is not a core count >= 1")),
    }
}

fn parse_core_range(s: &str) -> Result<(u32, u32), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected `lo:hi`, e.g. 1:8")?;
    let (lo, hi) = (parse_count(lo)?, parse_count(hi)?);
    if lo > hi {
        return Err(format!("empty core range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn parse_counts(s: &str) -> Result<Counts, String> {
    if s.contains(':') {
        let (lo, hi) = parse_core_range(s)?;
        return Ok(Counts((lo..=hi).collect()));
    }
    s.split(',').map(parse_count).collect::<Result<_, _>>().map(Counts)
}

fn parse_freqs(s: &str) -> Result<Freqs, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (parse_positive(start)?, parse_positive(end)?, parse_positive(step)?);
            frequency_path(start, end, step).map(Freqs).map_err(|e| e.to_string())
        }
        [single] => single
            .split(',')
            .map(parse_positive)
            .collect::<Result<_, _>>()
            .map(Freqs),
        _ => Err("expected `f`, `f1,f2,...` or `start:end:step` in GHz".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sweeps() {
        assert_eq!(parse_counts("1:4").unwrap(), Counts(vec![1, 2, 3, 4]));
        assert_eq!(parse_counts("2,8").unwrap(), Counts(vec![2, 8]));
        assert!(parse_counts("0").is_err());
        assert_eq!(parse_freqs("1.2:1.5:0.1").unwrap(), Freqs(vec![1.2, 1.3, 1.4, 1.5]));
        assert_eq!(parse_freqs("2.0").unwrap(), Freqs(vec![2.0]));
        assert!(parse_freqs("1:2").is_err());
        assert_eq!(parse_core_range("2:6").unwrap(), (2, 6));
        assert!(parse_core_range("6:2").is_err());
    }
}
