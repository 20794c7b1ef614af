//! JSON model files:
//! `{"states": [..], "rates": [[from, to, w], ..], "observables": {name: [..]}}`.
//! States in `rates` are given by label or by position.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::error::Category;

use super::ModelError;
use crate::markov::{Generator, Observable, StateSpace};

/// A generator with named observables.
#[derive(Debug, Clone)]
pub struct Model {
    pub generator: Generator,
    pub observables: BTreeMap<String, Observable>,
}

impl Model {
    pub fn observable(&self, name: &str) -> Result<&Observable, ModelError> {
        self.observables
            .get(name)
            .ok_or_else(|| ModelError::Schema(format!("observable '{name}' not found")))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StateRef {
    Index(usize),
    Label(String),
}

struct PositiveRate(f64);

impl<'de> Deserialize<'de> for PositiveRate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let w = f64::deserialize(deserializer)?;
        if w.is_finite() && w > 0.0 {
            Ok(PositiveRate(w))
        } else {
            Err(serde::de::Error::custom(format!("rate {w} must be strictly positive")))
        }
    }
}

#[derive(Deserialize)]
struct ModelFile {
    states: Vec<String>,
    rates: Vec<(StateRef, StateRef, PositiveRate)>,
    #[serde(default)]
    observables: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize)]
struct ModelFileOut<'a> {
    states: &'a [String],
    rates: Vec<(&'a str, &'a str, f64)>,
    observables: BTreeMap<&'a str, &'a [f64]>,
}

pub(crate) fn classify(e: serde_json::Error) -> ModelError {
    let text = e.to_string();
    let message = match text.rfind(" at line ") {
        Some(cut) => text[..cut].to_string(),
        None => text,
    };
    if e.classify() == Category::Data && message.starts_with("missing field") {
        ModelError::Schema(message)
    } else {
        ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(classify)?;
    let space = StateSpace::new(file.states.iter().cloned())?;
    let resolve = |r: &StateRef| -> Result<usize, ModelError> {
        match r {
            StateRef::Index(i) if *i < space.len() => Ok(*i),
            StateRef::Index(i) => Err(ModelError::Schema(format!("rate references state index {i} out of range"))),
            StateRef::Label(l) => space
                .index_of(l)
                .ok_or_else(|| ModelError::Schema(format!("rate references unknown state '{l}'"))),
        }
    };
    let mut triples = Vec::with_capacity(file.rates.len());
    for (from, to, w) in &file.rates {
        triples.push((resolve(from)?, resolve(to)?, w.0));
    }
    let n = space.len();
    let generator = Generator::build(space, triples)?;
    let mut observables = BTreeMap::new();
    for (name, values) in file.observables {
        if values.len() != n {
            return Err(ModelError::Schema(format!(
                "observable '{name}' has {} entries for {n} states",
                values.len()
            )));
        }
        observables.insert(name, Observable::new(values)?);
    }
    Ok(Model { generator, observables })
}

pub fn load_model(path: &Path) -> Result<Model, ModelError> {
    parse_model(&std::fs::read_to_string(path)?)
}

/// Floats are written in shortest round-trip form, so loading reproduces
/// every value bit for bit.
pub fn write_model<W: Write>(
    generator: &Generator,
    observables: &BTreeMap<String, Observable>,
    out: W,
) -> Result<(), ModelError> {
    let labels = generator.space().labels();
    let file = ModelFileOut {
        states: labels,
        rates: generator
            .edges()
            .map(|(x, y, w)| (labels[x].as_str(), labels[y].as_str(), w))
            .collect(),
        observables: observables.iter().map(|(k, v)| (k.as_str(), v.values())).collect(),
    };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &file).map_err(|e| ModelError::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

pub fn save_model(
    generator: &Generator,
    observables: &BTreeMap<String, Observable>,
    path: &Path,
) -> Result<(), ModelError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(generator, observables, &mut out)?;
    out.flush()?;
    Ok(())
}
