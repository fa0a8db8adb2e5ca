//! Serialization of reports and artifacts, plus the content-addressed stage cache.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use serde_json::Value;
use sha2::{Digest, Sha256};

use pairwave_core::condensate::CondensateSolution;
use pairwave_core::linalg::{CMat, CVec, C64};

use crate::config::RunConfig;
use crate::CliError;

/// Pretty JSON formatter that prints every float with 17 significant digits.
struct ExactFloats<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.inner.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

/// Serialize with exact floats; object keys come out sorted because `Value` maps are ordered.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let fmt = ExactFloats {
        inner: serde_json::ser::PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn complex_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

/// kernel.json: dimension plus row-major [re, im] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    #[serde(rename = "M")]
    pub m: usize,
    pub solver: String,
    pub data: Vec<[f64; 2]>,
}

impl KernelFile {
    pub fn new(k: &CMat, solver: &str) -> Self {
        let m = k.nrows();
        let data = (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| complex_pair(k[(i, j)]))
            .collect();
        Self {
            m,
            solver: solver.to_string(),
            data,
        }
    }

    pub fn matrix(&self) -> Result<CMat, CliError> {
        if self.data.len() != self.m * self.m {
            return Err(CliError::Dependency {
                stage: "riccati",
                detail: format!("kernel.json holds {} entries for M = {}", self.data.len(), self.m),
            });
        }
        Ok(CMat::from_fn(self.m, self.m, |i, j| {
            let [re, im] = self.data[i * self.m + j];
            C64::new(re, im)
        }))
    }
}

/// Cached condensate; enough to rebuild the quadratic model exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondensateFile {
    pub phi: Vec<[f64; 2]>,
    pub mu: f64,
    pub e_h: f64,
    pub residual: f64,
    pub iterations: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

impl CondensateFile {
    pub fn new(sol: &CondensateSolution) -> Self {
        Self {
            phi: sol.phi.iter().map(|&z| complex_pair(z)).collect(),
            mu: sol.mu,
            e_h: sol.e_h,
            residual: sol.residual,
            iterations: sol.iterations,
            n: sol.n,
        }
    }

    pub fn solution(&self) -> CondensateSolution {
        CondensateSolution {
            phi: CVec::from_iterator(self.phi.len(), self.phi.iter().map(|&[re, im]| C64::new(re, im))),
            mu: self.mu,
            e_h: self.e_h,
            residual: self.residual,
            iterations: self.iterations,
            n: self.n,
            trace: Vec::new(),
        }
    }
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Stages whose outputs are cached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CachedStage {
    Hartree,
    Riccati,
}

impl CachedStage {
    pub fn name(self) -> &'static str {
        match self {
            CachedStage::Hartree => "hartree",
            CachedStage::Riccati => "riccati",
        }
    }
}

/// Cache directory of a stage: `<output>/cache/<stage>-<sha256 of its inputs>`.
pub fn cache_dir(cfg: &RunConfig, stage: CachedStage) -> PathBuf {
    let inputs = match stage {
        CachedStage::Hartree => serde_json::json!({ "basis": cfg.basis, "model": cfg.model }),
        CachedStage::Riccati => serde_json::json!({
            "basis": cfg.basis,
            "model": cfg.model,
            "riccati": cfg.riccati,
        }),
    };
    let digest = Sha256::digest(to_json_string(&inputs).as_bytes());
    cfg.output
        .directory
        .join("cache")
        .join(format!("{}-{:x}", stage.name(), digest))
}

pub fn read_cached<T: for<'de> Deserialize<'de>>(cfg: &RunConfig, stage: CachedStage, file: &str) -> Result<T, CliError> {
    let path = cache_dir(cfg, stage).join(file);
    let text = fs::read_to_string(&path).map_err(|_| CliError::Dependency {
        stage: stage.name(),
        detail: format!("missing {}; run `pairwave {}` first", path.display(), stage.name()),
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Dependency {
        stage: stage.name(),
        detail: format!("unreadable {}: {e}", path.display()),
    })
}

/// Strip the timing block for comparisons between runs.
pub fn without_timing(report: &Value) -> Value {
    let mut v = report.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timing");
    }
    v
}
