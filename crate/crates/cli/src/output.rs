use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The run header every output carries: tool version, subcommand with its
/// arguments, and the resolved config.
pub struct Header<'a> {
    pub command: &'a str,
    pub args: Value,
    pub config: &'a RunConfig,
}

impl Header<'_> {
    fn json(&self) -> Value {
        json!({
            "hrg_version": VERSION,
            "command": self.command,
            "args": self.args,
            "config": self.config,
        })
    }
}

pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json<T: Serialize>(out: &mut dyn Write, header: &Header, result: &T) -> io::Result<()> {
    let mut doc = header.json();
    doc["result"] = serde_json::to_value(result)?;
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)?;
    out.flush()
}

/// CSV preceded by `#` lines holding the header as JSON.
pub fn write_csv<T: Serialize>(
    out: &mut dyn Write,
    header: &Header,
    rows: &[T],
    trailer: &[String],
) -> io::Result<()> {
    writeln!(out, "# hrg {} {}", VERSION, header.command)?;
    writeln!(out, "# args: {}", header.args)?;
    writeln!(out, "# config: {}", serde_json::to_string(header.config)?)?;
    {
        let mut w = csv::Writer::from_writer(&mut *out);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    for line in trailer {
        writeln!(out, "# {line}")?;
    }
    out.flush()
}
