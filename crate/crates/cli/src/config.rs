//! Run configuration: built-in defaults, overridden by a TOML file,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spillover::freqdomain::{parse_bands, validate_partition, BandSpec, Standardization, MIN_N_FREQ};
use spillover::ingest::{CalendarRules, Transform};
use spillover::Execution;

use crate::args::CommandArgs;
use crate::error::{CliError, CliResult, Context};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SPILLOVER_OUT";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub execution: Execution,
    pub data: DataConfig,
    pub rv: RvConfig,
    pub model: ModelConfig,
    pub connect: ConnectConfig,
    pub rolling: RollingSection,
    pub bootstrap: BootstrapSection,
    pub synth: SynthConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Tick CSVs for `rv`; a single panel CSV for the other commands.
    pub inputs: Vec<PathBuf>,
    /// Symbols for the tick files, in order; defaults to the file stems.
    pub symbols: Vec<String>,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RvConfig {
    pub spacing_minutes: u32,
    /// Session bounds as `HH:MM` in UTC; an end of `24:00` means midnight.
    pub session_start: String,
    pub session_end: String,
    pub calendar: CalendarRules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub lags: usize,
    pub intercept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectConfig {
    pub htrunc: usize,
    pub nfreq: usize,
    /// Bands in days, `short:long` pairs with `inf` allowed.
    pub bands: String,
    pub standardization: Standardization,
    /// Check that the bands partition (0, pi] and report the reconciliation
    /// of band totals against the time-domain total.
    pub reconcile: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollingSection {
    pub window: usize,
    pub step: usize,
    /// Per-variable and pairwise series as well as totals.
    pub directional: bool,
    /// Measures whose first-band / second-band ratio gets a trend line.
    pub ratios: Vec<String>,
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    /// 0 disables the bootstrap.
    pub replications: usize,
    pub significance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub k: usize,
    pub length: usize,
    /// Generating model as written by `fit`; a built-in model otherwise.
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

impl Default for RvConfig {
    fn default() -> Self {
        Self {
            spacing_minutes: 5,
            session_start: "00:00".into(),
            session_end: "24:00".into(),
            calendar: CalendarRules::us_futures(),
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            lags: 2,
            intercept: true,
        }
    }
}

impl Default for ConnectConfig {
    fn default() -> Self {
        Self {
            htrunc: spillover::varcore::DEFAULT_H_TRUNC,
            nfreq: spillover::freqdomain::DEFAULT_N_FREQ,
            bands: "1:5,5:inf".into(),
            standardization: Standardization::Global,
            reconcile: true,
        }
    }
}

impl Default for RollingSection {
    fn default() -> Self {
        Self {
            window: 500,
            step: 1,
            directional: true,
            ratios: vec!["within_total".into()],
            events: None,
        }
    }
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self {
            replications: 0,
            significance: 0.10,
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            k: 3,
            length: 1000,
            model: None,
        }
    }
}

impl RunConfig {
    /// Defaults, then the file named by `--config`, then the flags.
    pub fn resolve(args: &CommandArgs) -> CliResult<Self> {
        let mut config = match &args.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        config.apply_flags(args);
        if config.output.dir.is_none() {
            config.output.dir = Some(
                std::env::var_os(OUT_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("out")),
            );
        }
        config.validate()?;
        Ok(config)
    }

    /// Parse a TOML file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: Self = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.data.inputs.iter_mut().for_each(rebase);
        config.rolling.events.iter_mut().for_each(rebase);
        config.synth.model.iter_mut().for_each(rebase);
        config.output.dir.iter_mut().for_each(rebase);
        Ok(config)
    }

    fn apply_flags(&mut self, args: &CommandArgs) {
        if !args.inputs.is_empty() {
            self.data.inputs = args.inputs.clone();
        }
        set(&mut self.model.lags, args.lags);
        set(&mut self.rolling.window, args.window);
        set(&mut self.rolling.step, args.step);
        set(&mut self.connect.bands, args.bands.clone());
        set(&mut self.connect.htrunc, args.htrunc);
        set(&mut self.connect.nfreq, args.nfreq);
        set(&mut self.bootstrap.replications, args.boot);
        set(&mut self.bootstrap.significance, args.significance);
        set(&mut self.seed, args.seed);
        set(&mut self.data.transform, args.transform);
        if args.events.is_some() {
            self.rolling.events = args.events.clone();
        }
        if args.out.is_some() {
            self.output.dir = args.out.clone();
        }
    }

    /// Range checks that need no data, so bad settings fail before any
    /// computation.
    pub fn validate(&self) -> CliResult<()> {
        if self.model.lags == 0 {
            return Err(CliError::usage("lags must be at least 1"));
        }
        if self.connect.htrunc == 0 {
            return Err(CliError::usage("htrunc must be at least 1"));
        }
        if self.connect.nfreq < MIN_N_FREQ {
            return Err(CliError::usage(format!("nfreq must be at least {MIN_N_FREQ}")));
        }
        if self.rolling.window == 0 || self.rolling.step == 0 {
            return Err(CliError::usage("window and step must be at least 1"));
        }
        if self.rv.spacing_minutes == 0 {
            return Err(CliError::usage("spacing_minutes must be at least 1"));
        }
        if self.bootstrap.replications > 0 {
            self.bootstrap_config()
                .expect("replications set")
                .validate()
                .context(|| "bootstrap".to_string())?;
        }
        if self.synth.k < 2 || self.synth.length == 0 {
            return Err(CliError::usage("synth needs k >= 2 and length >= 1"));
        }
        self.rv.calendar.validate().context(|| "calendar".to_string())?;
        self.bands()?;
        Ok(())
    }

    pub fn bands(&self) -> CliResult<Vec<BandSpec>> {
        let bands = parse_bands(&self.connect.bands).context(|| "bands".to_string())?;
        if self.connect.reconcile {
            validate_partition(&bands).context(|| format!("bands `{}`", self.connect.bands))?;
        }
        Ok(bands)
    }

    pub fn bootstrap_config(&self) -> Option<spillover::dynamics::BootstrapConfig> {
        (self.bootstrap.replications > 0).then_some(spillover::dynamics::BootstrapConfig {
            replications: self.bootstrap.replications,
            significance: self.bootstrap.significance,
            seed: self.seed,
            execution: self.execution,
        })
    }

    pub fn out_dir(&self) -> &Path {
        self.output.dir.as_deref().expect("resolved config has an output directory")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
