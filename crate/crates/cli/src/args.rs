use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "bgt", version, about = "Bernoulli group testing landscape experiments", args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for output files and the run manifest; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (default: BGT_THREADS, then all cores).
    #[arg(long, global = true, env = "BGT_THREADS")]
    pub threads: Option<usize>,
    /// Largest enumeration (number of k-subsets) any exact routine may attempt.
    #[arg(long, global = true, value_parser = parse_count)]
    pub caps: Option<u64>,
    /// JSON object whose keys mirror the long flags of the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Sample an instance, apply COMP and serialize both.
    Gen(GenArgs),
    /// Run one chain or an ensemble of chains.
    Mcmc(McmcArgs),
    /// Exact phi curve, Z table, b-OGP search and bottleneck ratios.
    Landscape(LandscapeArgs),
    /// Solve the first moment function on a grid.
    Fmf(FmfArgs),
    /// Scan the (alpha, C) plane for the parameter assumptions.
    Region(RegionArgs),
    /// The critical constant C* for a given alpha.
    CriticalC(CriticalArgs),
    /// Random MAX k-set cover: exact and greedy Phi_k, flatness counts.
    Cover(CoverArgs),
    /// Certify the shape of G-breve on a grid.
    Gfun(GfunArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InstanceArgs {
    #[arg(long, value_parser = parse_count)]
    pub n: u64,
    /// Number of infected; overrides --alpha.
    #[arg(long, value_parser = parse_count)]
    pub k: Option<u64>,
    /// k = floor(n^alpha) when --k is absent.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "C")]
    pub c: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Also write the bit-packed binary instance (needs --out).
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Glauber,
    Metropolis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Uniform,
    Disjoint,
}

#[derive(Debug, Args, Serialize)]
pub struct McmcArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Absolute inverse temperature.
    #[arg(long, conflicts_with = "beta_scale")]
    pub beta: Option<f64>,
    /// beta = s * k * ln(p / k).
    #[arg(long)]
    pub beta_scale: Option<f64>,
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub steps: u64,
    /// Number of chains; more than one writes an ensemble summary.
    #[arg(long, default_value_t = 1)]
    pub chains: u64,
    #[arg(long, value_enum, default_value_t = RuleArg::Glauber)]
    pub rule: RuleArg,
    #[arg(long, value_enum, default_value_t = InitArg::Uniform)]
    pub init: InitArg,
    #[arg(long)]
    pub stop_overlap: Option<usize>,
    #[arg(long)]
    pub stop_zero: bool,
    #[arg(long, value_parser = parse_count, default_value = "1")]
    pub record_every: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct LandscapeArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Search for b-OGP parameters and certify them.
    #[arg(long)]
    pub bogp: bool,
    /// Write Z_{t,l} for every t and l.
    #[arg(long)]
    pub z_table: bool,
    /// Bottleneck ratios at these inverse temperatures (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub bottleneck_beta: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub eps1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    /// Floored when every grid point is a multiple of 1/k, continuous otherwise.
    Auto,
    Floored,
    Continuous,
}

#[derive(Debug, Args, Serialize)]
pub struct FmfArgs {
    #[arg(long, value_parser = parse_count)]
    pub n: u64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long = "C")]
    pub c: f64,
    /// Conditioning constant; defaults to a_inf(alpha, C) + 0.01.
    #[arg(long)]
    pub a: Option<f64>,
    /// start:stop:step; defaults to multiples of 1/k up to 1/2.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid>,
    #[arg(long)]
    pub compare_unconditional: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0.0)]
    pub c_r: f64,
    #[arg(long, default_value_t = 0.0)]
    pub c_s: f64,
    #[arg(long, default_value_t = 0.0)]
    pub c_i: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct RegionArgs {
    #[arg(long, value_parser = parse_range, default_value = "0.000001:0.02")]
    pub alpha_range: (f64, f64),
    #[arg(long = "C-range", value_parser = parse_range, default_value = "1.01:1.99")]
    pub c_range: (f64, f64),
    #[arg(long, default_value_t = 40)]
    pub n_alpha: usize,
    #[arg(long = "n-C", default_value_t = 99)]
    pub n_c: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CriticalArgs {
    #[arg(long)]
    pub alpha: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CoverArgs {
    /// Universe size P.
    #[arg(long = "P")]
    pub universe: Option<usize>,
    /// Number of sets M.
    #[arg(long = "M")]
    pub sets: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Derive (P, M, k) from a population size instead.
    #[arg(long, value_parser = parse_count)]
    pub n: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub random_trials: usize,
    /// Count flat k-subsets at this uncovered fraction.
    #[arg(long)]
    pub flat_y: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub c_dl: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GfunArgs {
    #[arg(long)]
    pub y: f64,
    #[arg(long, default_value_t = bgt_core::gfunc::DEFAULT_G_POINTS)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Integers, also written as `1e10` or `1_000`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.replace('_', "");
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
        Ok(f as u64)
    } else {
        Err(format!("'{s}' is not a nonnegative integer"))
    }
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.parse::<f64>().map_err(|_| format!("bad grid component '{p}'")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [start, stop, step] if step > 0.0 && stop >= start => Ok(Grid { start, stop, step }),
        _ => Err("grid must be start:stop:step with step > 0 and stop >= start".into()),
    }
}

pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.parse::<f64>().map_err(|_| format!("bad range component '{p}'")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b] if a <= b => Ok((a, b)),
        _ => Err("range must be lo:hi with lo <= hi".into()),
    }
}
