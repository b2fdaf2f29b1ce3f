//! Run configuration and deterministic result files.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::avqds::DynConfig;
use crate::avqite::ItConfig;
use crate::berry::{symmetry_report, BerryResult, SymmetryReport};
use crate::berry::{make_loop_schedule, run_berry};
use crate::ed::{infidelities, DenseFamily, LoopInfidelity, DEFAULT_ED_DT};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// First line of every CSV file.
pub const CSV_VERSION_LINE: &str = "# berryloop-v1";

pub const TRAJECTORY_COLUMNS: [&str; 12] = [
    "step", "t", "rho", "energy", "l2", "n_theta", "cnot", "depth", "phi_g1", "phi_g2", "infid_f",
    "infid_ft",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(flatten)]
    pub dynamics: DynConfig,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            period: 100.0,
            dynamics: DynConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "delta")]
    Delta,
    #[serde(rename = "T")]
    Period,
    #[serde(rename = "dt_max")]
    DtMax,
    /// Constant step size.
    #[serde(rename = "dt")]
    FixedDt,
    #[serde(rename = "l2_cut")]
    L2Cut,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Delta => "delta",
            SweepAxis::Period => "T",
            SweepAxis::DtMax => "dt_max",
            SweepAxis::FixedDt => "dt",
            SweepAxis::L2Cut => "l2_cut",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "delta" => SweepAxis::Delta,
            "T" | "t" | "period" => SweepAxis::Period,
            "dt_max" | "dt-max" => SweepAxis::DtMax,
            "dt" => SweepAxis::FixedDt,
            "l2_cut" | "l2-cut" => SweepAxis::L2Cut,
            other => return Err(Error::Config(format!("unknown sweep axis `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("berryloop-out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub ground_prep: ItConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Step of the exact propagation behind the infidelity columns; `null` skips it.
    #[serde(default = "default_ed_dt")]
    pub ed_dt: Option<f64>,
}

fn default_ed_dt() -> Option<f64> {
    Some(DEFAULT_ED_DT)
}

impl RunConfig {
    pub fn new(model: ModelParams) -> Self {
        Self {
            model,
            protocol: Protocol::default(),
            ground_prep: ItConfig::default(),
            sweep: None,
            output: OutputConfig::default(),
            ed_dt: default_ed_dt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.model.validate().map_err(wrap)?;
        if !(self.protocol.period > 0.0 && self.protocol.period.is_finite()) {
            return Err(Error::Config(format!(
                "T must be positive, got {}",
                self.protocol.period
            )));
        }
        self.protocol.dynamics.validate().map_err(wrap)?;
        self.ground_prep.validate().map_err(wrap)?;
        if let Some(dt) = self.ed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("ed_dt must be positive, got {dt}")));
            }
        }
        if let Some(sw) = &self.sweep {
            for &v in &sw.values {
                self.at(sw.axis, v)?;
            }
        }
        Ok(())
    }

    /// Single-run configuration at one point of a sweep axis.
    pub fn at(&self, axis: SweepAxis, value: f64) -> Result<RunConfig> {
        let mut c = self.clone();
        c.sweep = None;
        match axis {
            SweepAxis::Delta => c.model.delta = value,
            SweepAxis::Period => c.protocol.period = value,
            SweepAxis::DtMax => c.protocol.dynamics.dt_max = Some(value),
            SweepAxis::FixedDt => c.protocol.dynamics.fixed_dt = Some(value),
            SweepAxis::L2Cut => c.protocol.dynamics.l2_cut = value,
        }
        c.validate()?;
        Ok(c)
    }

    /// Every run this configuration describes, with its axis value.
    pub fn points(&self) -> Result<Vec<(Option<f64>, RunConfig)>> {
        match &self.sweep {
            None => {
                self.validate()?;
                Ok(vec![(None, self.clone())])
            }
            Some(sw) => sw
                .values
                .iter()
                .map(|&v| Ok((Some(v), self.at(sw.axis, v)?)))
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Pretty JSON whose floats carry 17 significant digits.
struct FixedDigits(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_float(value).as_bytes())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FixedDigits(serde_json::ser::PrettyFormatter::new()),
    );
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Internal(format!("json serialization: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|_| Error::Internal("json is not utf-8".into()))
}

/// One finished run ready to be written.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub axis_value: Option<f64>,
    pub config: RunConfig,
    pub result: BerryResult,
    pub infidelity: Option<LoopInfidelity>,
}

/// Runs one single-run configuration, filling the infidelity columns when
/// `config.ed_dt` is set.
pub fn execute(config: &RunConfig, axis_value: Option<f64>) -> Result<RunOutput> {
    if config.sweep.is_some() {
        return Err(Error::Config("execute takes a single-run configuration".into()));
    }
    config.validate()?;
    let dyn_cfg = &config.protocol.dynamics;
    let mut result = run_berry(
        &config.model,
        config.protocol.period,
        &config.ground_prep,
        dyn_cfg,
    )?;
    let infidelity = match config.ed_dt {
        Some(dt) if dyn_cfg.keep_snapshots => {
            let family = DenseFamily::from_params(&config.model)?;
            let schedule = make_loop_schedule(config.protocol.period, dyn_cfg)?;
            Some(infidelities(&mut result.trajectory, &family, &schedule, dt)?)
        }
        _ => None,
    };
    Ok(RunOutput {
        axis_value,
        config: config.clone(),
        result,
        infidelity,
    })
}

#[derive(Serialize)]
struct ResultFile<'a> {
    result: &'a BerryResult,
    symmetry: Option<SymmetryReport>,
    infidelity: Option<LoopInfidelity>,
    warnings: &'a [crate::berry::Warning],
    config: &'a RunConfig,
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn trajectory_csv(result: &BerryResult) -> String {
    let mut out = String::new();
    out.push_str(CSV_VERSION_LINE);
    out.push('\n');
    out.push_str(&TRAJECTORY_COLUMNS.join(","));
    out.push('\n');
    for r in &result.trajectory.steps {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            format_float(r.t),
            format_float(r.rho),
            format_float(r.energy),
            format_float(r.l2),
            r.n_theta,
            r.cnot,
            r.depth,
            format_float(r.phi_g1),
            format_float(r.phi_g2),
            opt_float(r.infid_f),
            opt_float(r.infid_ft),
        );
    }
    out
}

pub fn result_json(run: &RunOutput) -> Result<String> {
    to_json_string(&ResultFile {
        result: &run.result,
        symmetry: symmetry_report(&run.result.trajectory).ok(),
        infidelity: run.infidelity,
        warnings: &run.result.warnings,
        config: &run.config,
    })
}

pub fn summary_csv(axis: SweepAxis, runs: &[RunOutput]) -> String {
    let mut out = String::new();
    out.push_str(CSV_VERSION_LINE);
    out.push('\n');
    let _ = writeln!(out, "{},phi_b_principal,max_infid_f,max_cnot,max_depth", axis.name());
    for run in runs {
        let steps = &run.result.trajectory.steps;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            opt_float(run.axis_value),
            format_float(run.result.phi_b_principal),
            opt_float(run.infidelity.map(|i| i.max_infid_f)),
            steps.iter().map(|r| r.cnot).max().unwrap_or(0),
            steps.iter().map(|r| r.depth).max().unwrap_or(0),
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_run(dir: &Path, run: &RunOutput, formats: &[Format]) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        written.push(write_file(&dir.join("trajectory.csv"), &trajectory_csv(&run.result))?);
    }
    if formats.contains(&Format::Json) {
        written.push(write_file(&dir.join("result.json"), &result_json(run)?)?);
    }
    Ok(written)
}

/// Writes a single run into `config.output.dir`, or one `point_NNN` directory
/// per sweep value plus `summary.csv`. Returns the files written, in order.
pub fn write_results(runs: &[RunOutput], config: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = &config.output.dir;
    let formats = &config.output.formats;
    match &config.sweep {
        None => {
            let run = runs
                .first()
                .ok_or_else(|| Error::Config("no run to write".into()))?;
            write_run(dir, run, formats)
        }
        Some(sw) => {
            create_dir(dir)?;
            let mut written = Vec::new();
            for (k, run) in runs.iter().enumerate() {
                written.extend(write_run(&dir.join(format!("point_{k:03}")), run, formats)?);
            }
            written.push(write_file(&dir.join("summary.csv"), &summary_csv(sw.axis, runs))?);
            Ok(written)
        }
    }
}
