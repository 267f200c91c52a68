//! Experiment configuration files and the inputs they reference.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use entropywalks::ising::IsingFile;
use entropywalks::subset::{homogenize, DensityFile, SpinFile};
use entropywalks::{IsingModel, SpinDensity, SubsetDensity};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Certify,
    Contraction,
    Mlsi,
    Mix,
    Scale,
    Exchange,
    Walk,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

/// Where the distribution comes from: a file, or one of the built-in
/// families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    File {
        path: PathBuf,
    },
    Uniform {
        n: usize,
        k: usize,
    },
    Product {
        n: usize,
        k: usize,
        lambda: Vec<f64>,
    },
    CurieWeiss {
        n: usize,
        delta: f64,
        #[serde(default)]
        h: Option<Vec<f64>>,
    },
    RankOne {
        u: Vec<f64>,
        h: Vec<f64>,
    },
}

/// A parsed config file. `params` stays a free-form map; each kind reads
/// the keys it understands and rejects the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub input: Option<InputSpec>,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_csv: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|_| RunError::InputNotFound(path.to_path_buf()))?;
        let mut config: Self = serde_json::from_str(&text).map_err(|e| RunError::ConfigParse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: strip_position(&e),
        })?;
        // relative paths are taken from the config's own directory
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(InputSpec::File { path: p }) = &mut config.input {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = &mut config.output_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(config)
    }
}

/// serde_json appends "at line L column C"; the error carries those
/// separately.
fn strip_position(e: &serde_json::Error) -> String {
    let text = e.to_string();
    match text.rsplit_once(" at line ") {
        Some((head, _)) => head.to_string(),
        None => text,
    }
}

/// A distribution ready for dispatch.
#[derive(Clone, Debug)]
pub enum Model {
    Density(SubsetDensity),
    Spin(SpinDensity),
    Ising(IsingModel),
}

impl Model {
    /// The set-system view: spin laws are homogenized.
    pub fn density(&self) -> Result<SubsetDensity, RunError> {
        match self {
            Model::Density(mu) => Ok(mu.clone()),
            Model::Spin(s) => Ok(homogenize(s)?),
            Model::Ising(m) => Ok(homogenize(&m.spin_density()?)?),
        }
    }

    pub fn ising(&self) -> Result<&IsingModel, RunError> {
        match self {
            Model::Ising(m) => Ok(m),
            _ => Err(RunError::Invalid("this kind needs an Ising input".into())),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InputFile {
    Ising(IsingFile),
    Density(DensityFile),
    Spin(SpinFile),
}

/// Builds the model and returns the raw bytes that identify it.
pub fn load_input(spec: &InputSpec) -> Result<(Model, Vec<u8>), RunError> {
    let model = match spec {
        InputSpec::File { path } => {
            let bytes = std::fs::read(path).map_err(|_| RunError::InputNotFound(path.clone()))?;
            let file: InputFile = serde_json::from_slice(&bytes).map_err(|e| RunError::ConfigParse {
                path: path.clone(),
                line: e.line(),
                column: e.column(),
                message: strip_position(&e),
            })?;
            let model = match file {
                InputFile::Ising(f) => Model::Ising(IsingModel::from_file(&f)?),
                InputFile::Density(f) => Model::Density(SubsetDensity::from_file(&f)?),
                InputFile::Spin(f) => Model::Spin(SpinDensity::from_file(&f)?),
            };
            return Ok((model, bytes));
        }
        InputSpec::Uniform { n, k } => Model::Density(SubsetDensity::uniform(*n, *k)?),
        InputSpec::Product { n, k, lambda } => Model::Density(SubsetDensity::product(*n, *k, lambda)?),
        InputSpec::CurieWeiss { n, delta, h } => Model::Ising(match h {
            Some(h) => IsingModel::curie_weiss_with_field(*n, *delta, h.clone())?,
            None => IsingModel::curie_weiss(*n, *delta)?,
        }),
        InputSpec::RankOne { u, h } => Model::Ising(IsingModel::rank_one(u.clone(), h.clone())?),
    };
    let bytes = serde_json::to_vec(spec).expect("input spec serializes");
    Ok((model, bytes))
}

/// Typed access to `params` that tracks which keys were read.
pub struct Params<'a> {
    map: &'a Map<String, Value>,
    used: Vec<&'static str>,
}

impl<'a> Params<'a> {
    pub fn new(map: &'a Map<String, Value>) -> Self {
        Self { map, used: Vec::new() }
    }

    pub fn get<T: serde::de::DeserializeOwned>(&mut self, key: &'static str) -> Result<Option<T>, RunError> {
        self.used.push(key);
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| RunError::Invalid(format!("params.{key}: {e}"))),
        }
    }

    pub fn or<T: serde::de::DeserializeOwned>(&mut self, key: &'static str, default: T) -> Result<T, RunError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: serde::de::DeserializeOwned>(&mut self, key: &'static str) -> Result<T, RunError> {
        self.get(key)?.ok_or_else(|| RunError::Invalid(format!("params.{key} is required")))
    }

    /// Fails on keys no accessor asked for, which are almost always typos.
    pub fn finish(self) -> Result<(), RunError> {
        match self.map.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(RunError::Invalid(format!("unknown parameter params.{k}"))),
            None => Ok(()),
        }
    }
}
