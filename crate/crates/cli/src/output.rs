use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::CliError;
use crate::Command;

/// CSV destination with `#` comment lines.
pub struct Sink {
    out: Box<dyn Write>,
    name: String,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => {
                let name = p.display().to_string();
                let file = File::create(p).map_err(|e| CliError::io(&name, e))?;
                Ok(Self {
                    out: Box::new(BufWriter::new(file)),
                    name,
                })
            }
            None => Ok(Self {
                out: Box::new(BufWriter::new(io::stdout())),
                name: "<stdout>".into(),
            }),
        }
    }

    fn fail(&self, e: io::Error) -> CliError {
        CliError::io(&self.name, e)
    }

    /// Reproducibility header: version and the fully resolved command.
    pub fn header(&mut self, command: &Command) -> Result<(), CliError> {
        self.comment(&format!("neqresponse {}", env!("CARGO_PKG_VERSION")))?;
        self.comment(&format!("config: {command:?}"))
    }

    pub fn comment(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.out, "# {}", text.replace('\n', " ")).map_err(|e| self.fail(e))
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) -> Result<(), CliError> {
        let line = cells.iter().map(|c| c.as_ref()).collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}").map_err(|e| self.fail(e))
    }

    pub fn raw(&mut self, text: &str) -> Result<(), CliError> {
        self.out.write_all(text.as_bytes()).map_err(|e| self.fail(e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| self.fail(e))
    }
}

/// Shortest representation that reads back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
