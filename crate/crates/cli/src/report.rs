// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exit codes, input loading and the JSON report envelope.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use boundedcp::{BarError, BoundedSeries};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::series_io::parse_series;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

/// A failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<BarError> for Failure {
    fn from(e: BarError) -> Self {
        let code = match e {
            BarError::InvalidConfig(_) | BarError::UnsupportedLevel(_) => EXIT_USAGE,
            BarError::OutOfDomain { .. }
            | BarError::InvalidSeries(_)
            | BarError::DegenerateSeries(_)
            | BarError::Infeasible(_) => EXIT_DATA,
            BarError::NonpositiveVariance(_)
            | BarError::SingularMatrix(_)
            | BarError::OptimizerFailure(_)
            | BarError::EmptySet => EXIT_NUMERICAL,
        };
        Self { code, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Provenance block embedded in every JSON report.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub seed: u64,
    pub library_version: &'static str,
    pub input_sha256: Option<String>,
    /// Unix seconds; `null` when the seed was given explicitly so that seeded
    /// runs are byte-reproducible.
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
}

impl Manifest {
    pub fn new(command: &'static str, config: &impl Serialize, seed: u64, explicit_seed: bool) -> Self {
        Self {
            command,
            config: serde_json::to_value(config).expect("config serializes"),
            seed,
            library_version: env!("CARGO_PKG_VERSION"),
            input_sha256: None,
            started_at: (!explicit_seed).then(unix_now),
            finished_at: None,
        }
    }

    pub fn finish(mut self) -> Self {
        if self.started_at.is_some() {
            self.finished_at = Some(unix_now());
        }
        self
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Serialize)]
pub struct InputInfo {
    pub n: usize,
    #[serde(rename = "N")]
    pub upper_bound: u32,
}

#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub manifest: &'a Manifest,
    pub input: Option<InputInfo>,
    pub result: T,
}

/// A parsed input series with its checksum.
pub struct Input {
    pub series: BoundedSeries,
    pub sha256: String,
}

/// Reads `path` (`-` for stdin). Without an explicit bound, `N` is the
/// observed maximum and a warning is printed.
pub fn load_series(path: &Path, upper_bound: Option<u32>) -> CliResult<Input> {
    let mut bytes = Vec::new();
    let read = if path == Path::new("-") {
        std::io::stdin().read_to_end(&mut bytes)
    } else {
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes))
    };
    read.map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Failure::data(format!("{}: not UTF-8: {e}", path.display())))?;
    let (counts, _) = parse_series(text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let nb = match upper_bound {
        Some(nb) => nb,
        None => {
            let max = counts.iter().copied().max().unwrap_or(0);
            eprintln!(
                "warning: --upper-bound not given; using the observed maximum N = {max}. \
                 A wrong N biases every estimate."
            );
            max
        }
    };
    let series = BoundedSeries::new(counts, nb)?;
    Ok(Input { series, sha256: format!("{:x}", Sha256::digest(&bytes)) })
}

/// Writes `text` to `path`, or stdout for `-`.
pub fn emit(path: &Path, text: &str) -> CliResult<()> {
    let res = if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes()).and_then(|_| out.flush())
    } else {
        std::fs::write(path, text)
    };
    res.map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
