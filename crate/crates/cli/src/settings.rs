//! Flat run settings. Every key of the TOML config file has a flag of the
//! same name (`latency_budget_us` ↔ `--latency-budget-us`); flags win.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use super::Failure;
use zsnas::bench::{SweepAxis, TauConfig, TauProxy};
use zsnas::proxies::{InputSource, ProxyConfig};
use zsnas::search::{Schedule, SearchConfig, Weights};
use zsnas::{CellArch, MacroConfig};

#[derive(Args, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// TOML file with any of the keys below; flags override it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Root seed for every random draw.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Latency lookup table (CSV).
    #[arg(long)]
    pub lut: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cell architecture string.
    #[arg(long)]
    pub arch: Option<String>,

    #[arg(long)]
    pub latency_budget_us: Option<f64>,
    #[arg(long)]
    pub flops_budget: Option<f64>,
    /// κ rank weight (default 1).
    #[arg(long)]
    pub wk: Option<f64>,
    /// Linear-region rank weight (default 1).
    #[arg(long)]
    pub wr: Option<f64>,
    /// FLOPs rank weight (default 0).
    #[arg(long)]
    pub wf: Option<f64>,
    /// Latency rank weight (default 0).
    #[arg(long)]
    pub wl: Option<f64>,
    /// `per-edge` (default) or `global`.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Supernet hardware cost per edge: `mean` (default), `min` or `max`.
    #[arg(long)]
    pub aggregate: Option<String>,

    /// NTK batch size (default 32).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// NTK initializations averaged into κ (default 3).
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Inputs for the linear-region count (default 1000).
    #[arg(long)]
    pub lr_samples: Option<usize>,
    /// Side of the square linear-region inputs (default 8).
    #[arg(long)]
    pub lr_resolution: Option<usize>,
    /// Image batch file used instead of Gaussian inputs.
    #[arg(long)]
    pub input_batch: Option<PathBuf>,

    /// Stem channels (default 16).
    #[arg(long)]
    pub stem_channels: Option<usize>,
    /// Cells per stage (default 5).
    #[arg(long)]
    pub cells: Option<usize>,
    /// Classifier outputs (default 10).
    #[arg(long)]
    pub classes: Option<usize>,
    /// Side of the square input images (default 32).
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Small macro preset: one cell per stage, 8x8 inputs.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub desk: Option<bool>,

    /// Benchmark accuracies (JSON-lines).
    #[arg(long)]
    pub bench: Option<PathBuf>,
    /// `kappa`, `lr`, `flops`, `latency` or `combined`.
    #[arg(long)]
    pub proxy: Option<String>,
    /// `batch-size` (default) or `repeats`.
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    pub axis_values: Option<Vec<usize>>,
    /// Benchmark records scored per sweep point (default 500).
    #[arg(long)]
    pub sample: Option<usize>,

    /// Report entries (JSON-lines).
    #[arg(long)]
    pub entries: Option<PathBuf>,
    /// Emit a latency table template for the macro instead of an estimate.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub template: Option<bool>,
}

macro_rules! overlay {
    ($flags:ident, $file:ident; $($f:ident),* $(,)?) => {
        Settings {
            config: $flags.config,
            $($f: $flags.$f.or($file.$f),)*
        }
    };
}

fn parse<T: std::str::FromStr<Err = zsnas::Error>>(v: Option<&str>, default: T) -> Result<T, Failure> {
    Ok(v.map(str::parse).transpose()?.unwrap_or(default))
}

impl Settings {
    /// Fills unset flags from `--config`, if given.
    pub fn with_config_file(self) -> Result<Settings, Failure> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Failure::io(&path, e))?;
        let file: Settings = toml::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let flags = self;
        Ok(overlay!(flags, file;
            seed, threads, lut, out, arch, latency_budget_us, flops_budget, wk, wr, wf, wl, schedule,
            aggregate, batch_size, repeats, lr_samples, lr_resolution, input_batch, stem_channels, cells,
            classes, resolution, desk, bench, proxy, axis, axis_values, sample, entries, template,
        ))
    }

    pub fn require_arch(&self) -> Result<CellArch, Failure> {
        let s = self.arch.as_deref().ok_or_else(|| Failure::input("this command needs --arch"))?;
        Ok(s.parse()?)
    }

    pub fn macro_config(&self) -> Result<MacroConfig, Failure> {
        let base = if self.desk.unwrap_or(false) {
            MacroConfig::desk()
        } else {
            MacroConfig::default()
        };
        let r = self.resolution.unwrap_or(base.input[1]);
        let m = MacroConfig {
            stem_channels: self.stem_channels.unwrap_or(base.stem_channels),
            cells_per_stage: self.cells.unwrap_or(base.cells_per_stage),
            num_classes: self.classes.unwrap_or(base.num_classes),
            input: [base.input[0], r, r],
        };
        m.validate()?;
        Ok(m)
    }

    pub fn proxy_config(&self) -> Result<ProxyConfig, Failure> {
        let d = ProxyConfig::default();
        let lr = self.lr_resolution.unwrap_or(d.lr_input[1]);
        let input_source = match &self.input_batch {
            Some(p) => InputSource::from_file(p)?,
            None => InputSource::Gaussian,
        };
        let cfg = ProxyConfig {
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            ntk_repeats: self.repeats.unwrap_or(d.ntk_repeats),
            lr_samples: self.lr_samples.unwrap_or(d.lr_samples),
            lr_input: [d.lr_input[0], lr, lr],
            seed: self.seed.unwrap_or(d.seed),
            input_source,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn weights(&self) -> Weights {
        let d = Weights::default();
        Weights {
            kappa: self.wk.unwrap_or(d.kappa),
            regions: self.wr.unwrap_or(d.regions),
            flops: self.wf.unwrap_or(d.flops),
            latency: self.wl.unwrap_or(d.latency),
        }
    }

    pub fn search_config(&self) -> Result<SearchConfig, Failure> {
        Ok(SearchConfig {
            macro_config: self.macro_config()?,
            proxy: self.proxy_config()?,
            weights: self.weights(),
            latency_budget_us: self.latency_budget_us,
            flops_budget: self.flops_budget,
            schedule: parse(self.schedule.as_deref(), Schedule::default())?,
            hardware_aggregate: parse(self.aggregate.as_deref(), Default::default())?,
        })
    }

    pub fn tau_config(&self) -> Result<TauConfig, Failure> {
        let d = TauConfig::default();
        Ok(TauConfig {
            macro_config: self.macro_config()?,
            proxy: self.proxy_config()?,
            sample: self.sample.unwrap_or(d.sample),
            weights: self.weights(),
        })
    }

    /// Proxy, axis and axis values; the default axis values are the
    /// current batch size or repeat count alone.
    pub fn sweep(&self) -> Result<(TauProxy, SweepAxis, Vec<usize>), Failure> {
        let proxy = parse(self.proxy.as_deref(), TauProxy::Kappa)?;
        let axis = parse(self.axis.as_deref(), SweepAxis::default())?;
        let values = match &self.axis_values {
            Some(v) => v.clone(),
            None => {
                let p = self.proxy_config()?;
                vec![match axis {
                    SweepAxis::BatchSize => p.batch_size,
                    SweepAxis::Repeats => p.ntk_repeats,
                }]
            }
        };
        Ok((proxy, axis, values))
    }
}
