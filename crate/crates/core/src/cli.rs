//! Experiment configuration, regime presets and data emission.
//!
//! Settings are resolved in three layers: a regime preset, then a flat TOML
//! config file, then command-line flags. [`run`] executes the pipeline for
//! the requested sectors and writes one file per series.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::gaussian::{
    correlation_profile, covariance, entropy_scan_covariance, scan_lengths, CovarianceData,
    GaussianError,
};
use crate::potential::{ModelParams, PotentialError};
use crate::spectral::{build_hessian, eigendecompose, NormalModes, SpectralError};
use crate::statics::{
    energy_profile, solve_kink, vacuum_configuration, FieldConfiguration, Sector, StaticsError,
};

/// Chain length shared by all regime presets.
pub const PRESET_SITES: usize = 501;

/// Significant digits kept in emitted numbers.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Statics(#[from] StaticsError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Potential(_) => 2,
            CliError::Statics(StaticsError::Potential(_)) => 2,
            CliError::Statics(_) => 3,
            CliError::Spectral(_) => 4,
            CliError::Gaussian(GaussianError::Spectral(_)) => 4,
            CliError::Gaussian(GaussianError::BlockLength { .. })
            | CliError::Gaussian(GaussianError::AnchorOutOfRange { .. }) => 2,
            CliError::Gaussian(_) => 3,
            CliError::Io { .. } => 5,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Subsreg,
    Balreg,
    Elasreg,
}

impl Preset {
    pub fn coupling(self) -> f64 {
        match self {
            Preset::Subsreg => 1e4,
            Preset::Balreg => 1e5,
            Preset::Elasreg => 1e6,
        }
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "subsreg" => Ok(Preset::Subsreg),
            "balreg" => Ok(Preset::Balreg),
            "elasreg" => Ok(Preset::Elasreg),
            other => Err(CliError::Config(format!("unknown preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SectorChoice {
    Vacuum,
    Kink,
    Both,
}

impl SectorChoice {
    pub fn sectors(self) -> Vec<Sector> {
        match self {
            SectorChoice::Vacuum => vec![Sector::Vacuum],
            SectorChoice::Kink => vec![Sector::Kink],
            SectorChoice::Both => vec![Sector::Vacuum, Sector::Kink],
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    Profile,
    Energy,
    Correlations,
    EntropyScan,
    Spectrum,
}

impl OutputKind {
    pub const ALL: [OutputKind; 5] = [
        OutputKind::Profile,
        OutputKind::Energy,
        OutputKind::Correlations,
        OutputKind::EntropyScan,
        OutputKind::Spectrum,
    ];

    fn needs_modes(self) -> bool {
        matches!(
            self,
            OutputKind::Correlations | OutputKind::EntropyScan | OutputKind::Spectrum
        )
    }

    fn needs_covariance(self) -> bool {
        matches!(self, OutputKind::Correlations | OutputKind::EntropyScan)
    }
}

impl FromStr for OutputKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        <OutputKind as ValueEnum>::from_str(s, true)
            .map_err(|_| CliError::Config(format!("unknown output '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub params: ModelParams,
    pub sector: SectorChoice,
    pub outputs: BTreeSet<OutputKind>,
    pub scan_stride: usize,
    pub anchor_sites: Vec<usize>,
    pub output_format: OutputFormat,
    pub output_path: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.scan_stride == 0 {
            return Err(CliError::Config("scan stride must be at least 1".into()));
        }
        if self.outputs.is_empty() {
            return Err(CliError::Config("no outputs requested".into()));
        }
        let n = self.params.n_sites();
        if let Some(&m) = self.anchor_sites.iter().find(|&&m| m >= n) {
            return Err(CliError::Config(format!("anchor site {m} outside 0..{n}")));
        }
        Ok(())
    }
}

/// Regime preset on the 501-site chain with every output enabled.
pub fn preset(name: &str, a: f64) -> Result<ExperimentSpec, CliError> {
    let regime: Preset = name.parse()?;
    preset_for(regime, a)
}

pub fn preset_for(regime: Preset, a: f64) -> Result<ExperimentSpec, CliError> {
    Ok(ExperimentSpec {
        params: ModelParams::new(PRESET_SITES, regime.coupling(), a)?,
        sector: SectorChoice::Both,
        outputs: OutputKind::ALL.into_iter().collect(),
        scan_stride: 1,
        anchor_sites: vec![0],
        output_format: OutputFormat::Csv,
        output_path: PathBuf::from("out"),
    })
}

/// Optional settings from one layer. Also the schema of the config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub preset: Option<String>,
    pub a: Option<f64>,
    pub g: Option<f64>,
    pub sites: Option<usize>,
    pub sector: Option<SectorChoice>,
    pub outputs: Option<OutputList>,
    pub stride: Option<usize>,
    pub anchor: Option<Vec<usize>>,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
}

/// Outputs given either as a TOML array or as a comma-separated string.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OutputList {
    List(Vec<String>),
    Joined(String),
}

impl OutputList {
    fn resolve(&self) -> Result<BTreeSet<OutputKind>, CliError> {
        let items: Vec<&str> = match self {
            OutputList::List(v) => v.iter().map(String::as_str).collect(),
            OutputList::Joined(s) => s.split(',').filter(|t| !t.trim().is_empty()).collect(),
        };
        items.into_iter().map(str::parse).collect()
    }
}

impl Overrides {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Fields set here win over `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        Overrides {
            preset: self.preset.or(base.preset),
            a: self.a.or(base.a),
            g: self.g.or(base.g),
            sites: self.sites.or(base.sites),
            sector: self.sector.or(base.sector),
            outputs: self.outputs.or(base.outputs),
            stride: self.stride.or(base.stride),
            anchor: self.anchor.or(base.anchor),
            format: self.format.or(base.format),
            out: self.out.or(base.out),
        }
    }

    /// Builds the spec on top of the named preset (`subsreg` when none is
    /// given) with `a = 0` unless set.
    pub fn resolve(self) -> Result<ExperimentSpec, CliError> {
        let a = self.a.unwrap_or(0.0);
        let mut spec = preset(self.preset.as_deref().unwrap_or("subsreg"), a)?;
        let sites = self.sites.unwrap_or(spec.params.n_sites());
        let g = self.g.unwrap_or(spec.params.g());
        spec.params = ModelParams::new(sites, g, a)?;
        if let Some(s) = self.sector {
            spec.sector = s;
        }
        if let Some(o) = &self.outputs {
            spec.outputs = o.resolve()?;
        }
        if let Some(s) = self.stride {
            spec.scan_stride = s;
        }
        if let Some(anchor) = self.anchor {
            spec.anchor_sites = anchor;
        }
        if let Some(f) = self.format {
            spec.output_format = f;
        }
        if let Some(out) = self.out {
            spec.output_path = out;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "dsg-chain",
    version,
    about = "Kinks, normal modes and block entanglement of a double sine-Gordon chain"
)]
pub struct Args {
    /// Regime preset
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Substrate family parameter in [0, 1]
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Elastic coupling
    #[arg(long)]
    pub g: Option<f64>,
    /// Number of lattice sites (N + 1)
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long, value_enum)]
    pub sector: Option<SectorChoice>,
    /// Comma-separated subset of profile,energy,correlations,entropy-scan,spectrum
    #[arg(long)]
    pub outputs: Option<String>,
    /// Step between scanned block lengths
    #[arg(long)]
    pub stride: Option<usize>,
    /// Anchor site for a correlation profile (repeatable)
    #[arg(long)]
    pub anchor: Vec<usize>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat TOML file with the same keys as the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Args {
    pub fn overrides(&self) -> Overrides {
        let preset = self.preset.map(|p| {
            p.to_possible_value()
                .expect("no skipped variants")
                .get_name()
                .to_string()
        });
        Overrides {
            preset,
            a: self.a,
            g: self.g,
            sites: self.sites,
            sector: self.sector,
            outputs: self.outputs.clone().map(OutputList::Joined),
            stride: self.stride,
            anchor: (!self.anchor.is_empty()).then(|| self.anchor.clone()),
            format: self.format,
            out: self.out.clone(),
        }
    }

    pub fn to_spec(&self) -> Result<ExperimentSpec, CliError> {
        let file = match &self.config {
            Some(path) => Overrides::load(path)?,
            None => Overrides::default(),
        };
        self.overrides().over(file).resolve()
    }
}

/// Per-sector products of the pipeline.
struct SectorData {
    sector: Sector,
    config: FieldConfiguration,
    modes: Option<NormalModes>,
    cov: Option<CovarianceData>,
}

fn solve_sector(spec: &ExperimentSpec, sector: Sector) -> Result<SectorData, CliError> {
    let config = match sector {
        Sector::Vacuum => vacuum_configuration(&spec.params),
        Sector::Kink => solve_kink(&spec.params)?,
    };
    let modes = if spec.outputs.iter().any(|o| o.needs_modes()) {
        Some(eigendecompose(&build_hessian(&config))?)
    } else {
        None
    };
    let cov = match &modes {
        Some(m) if spec.outputs.iter().any(|o| o.needs_covariance()) => Some(covariance(m)?),
        _ => None,
    };
    Ok(SectorData {
        sector,
        config,
        modes,
        cov,
    })
}

/// A normal mode at or below [`crate::spectral::SOFT_MODE_THRESHOLD`]; its correlations are
/// large and only as accurate as the curvature that sets it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftMode {
    pub sector: Sector,
    pub mode: usize,
    pub omega_sq: f64,
}

/// Everything a run produces before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct Computation {
    /// Sectors whose static configuration was computed, in order.
    pub sectors: Vec<Sector>,
    pub soft_modes: Vec<SoftMode>,
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub sectors: Vec<Sector>,
    pub soft_modes: Vec<SoftMode>,
    pub files: Vec<PathBuf>,
}

/// A named table of equally long columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<(String, Column)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Index(Vec<usize>),
    Real(Vec<f64>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Index(v) => v.len(),
            Column::Real(v) => v.len(),
        }
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Column::Index(v) => v[i].to_string(),
            Column::Real(v) => format_number(v[i]),
        }
    }

    fn json(&self) -> Value {
        match self {
            Column::Index(v) => Value::from(v.clone()),
            Column::Real(v) => Value::Array(
                v.iter()
                    .map(|&x| {
                        serde_json::Number::from_f64(round_significant(x))
                            .map(Value::Number)
                            .unwrap_or(Value::Null)
                    })
                    .collect(),
            ),
        }
    }
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|(h, _)| h.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|(_, c)| c.cell(i)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut map = Map::new();
        for (h, c) in &self.columns {
            map.insert(h.clone(), c.json());
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(map)).expect("finite data");
        text.push('\n');
        text
    }
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("valid float")
}

/// Shortest round-trip text of the value rounded to 12 significant digits.
/// Plain notation for magnitudes in `[1e-5, 1e16)`, exponent form otherwise.
pub fn format_number(x: f64) -> String {
    let r = round_significant(x);
    let m = r.abs();
    if r == 0.0 {
        "0".into()
    } else if (1e-5..1e16).contains(&m) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// Runs the pipeline and returns the tables without touching the filesystem.
pub fn compute_tables(spec: &ExperimentSpec) -> Result<Computation, CliError> {
    spec.validate()?;
    let data: Vec<SectorData> = spec
        .sector
        .sectors()
        .into_iter()
        .map(|s| solve_sector(spec, s))
        .collect::<Result<_, _>>()?;
    let primary = data.last().expect("at least one sector");
    let mut tables = Vec::new();
    let n = spec.params.n_sites();

    for kind in &spec.outputs {
        match kind {
            OutputKind::Profile => tables.push(Table {
                name: "profile".into(),
                columns: vec![
                    ("site".into(), Column::Index((0..n).collect())),
                    ("phi".into(), Column::Real(primary.config.phi().to_vec())),
                ],
            }),
            OutputKind::Energy => tables.push(Table {
                name: "energy".into(),
                columns: vec![
                    ("site".into(), Column::Index((0..n).collect())),
                    (
                        "energy".into(),
                        Column::Real(energy_profile(&primary.config).per_site),
                    ),
                ],
            }),
            OutputKind::Correlations => {
                for &m in &spec.anchor_sites {
                    let mut columns = vec![(
                        "separation".to_string(),
                        Column::Index((0..n - m).collect()),
                    )];
                    for d in &data {
                        let cov = d.cov.as_ref().expect("covariance computed");
                        columns.push((
                            format!("xi_{}", d.sector),
                            Column::Real(correlation_profile(cov, m)?),
                        ));
                    }
                    tables.push(Table {
                        name: format!("correlations_m{m}"),
                        columns,
                    });
                }
            }
            OutputKind::EntropyScan => {
                let lengths = scan_lengths(n, spec.scan_stride);
                for d in &data {
                    let cov = d.cov.as_ref().expect("covariance computed");
                    let scan = entropy_scan_covariance(cov, &lengths)?;
                    tables.push(Table {
                        name: format!("entropy_{}", d.sector),
                        columns: vec![
                            ("ell".into(), Column::Index(scan.lengths)),
                            ("entropy".into(), Column::Real(scan.entropy)),
                        ],
                    });
                }
            }
            OutputKind::Spectrum => {
                for d in &data {
                    let modes = d.modes.as_ref().expect("modes computed");
                    tables.push(Table {
                        name: format!("spectrum_{}", d.sector),
                        columns: vec![
                            ("mode".into(), Column::Index((0..modes.len()).collect())),
                            ("omega_sq".into(), Column::Real(modes.omega_sq().to_vec())),
                            ("omega".into(), Column::Real(modes.omega().to_vec())),
                        ],
                    });
                }
            }
        }
    }
    let soft_modes = data
        .iter()
        .filter_map(|d| d.modes.as_ref().map(|m| (d.sector, m)))
        .flat_map(|(sector, m)| {
            m.soft_modes().into_iter().map(move |k| SoftMode {
                sector,
                mode: k,
                omega_sq: m.omega_sq()[k],
            })
        })
        .collect();
    Ok(Computation {
        sectors: data.iter().map(|d| d.sector).collect(),
        soft_modes,
        tables,
    })
}

/// Computes every requested series, then writes them. Files written by a
/// failed run are removed.
pub fn run(spec: &ExperimentSpec) -> Result<RunReport, CliError> {
    let Computation {
        sectors,
        soft_modes,
        tables,
    } = compute_tables(spec)?;
    let dir = &spec.output_path;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::with_capacity(tables.len());
    for table in &tables {
        let path = dir.join(format!("{}.{}", table.name, spec.output_format.extension()));
        let text = match spec.output_format {
            OutputFormat::Csv => table.to_csv(),
            OutputFormat::Json => table.to_json(),
        };
        if let Err(e) = fs::write(&path, text) {
            for written in files.iter().chain(std::iter::once(&path)) {
                let _ = fs::remove_file(written);
            }
            return Err(CliError::io(&path, e));
        }
        files.push(path);
    }
    Ok(RunReport {
        sectors,
        soft_modes,
        files,
    })
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.files {
            writeln!(f, "{}", p.display())?;
        }
        Ok(())
    }
}
