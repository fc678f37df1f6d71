//! Output plumbing: number formatting, CSV tables, key-value records and
//! the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

/// `printf("%.12g")`: 12 significant digits, trailing zeros dropped,
/// scientific notation below 1e-4 and from 1e12 up.
pub fn fmt_num(x: f64) -> String {
    fmt_g(x, 12)
}

fn fmt_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // the exponent after rounding to `digits` significant digits
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A CSV table built in memory and written in one go.
pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer
            .write_record(header.iter().map(|h| h.as_ref()))
            .expect("in-memory write");
        Csv { writer }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.writer.write_record(cells).expect("in-memory write");
    }

    pub fn into_string(self) -> String {
        let bytes = self.writer.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("cells are UTF-8")
    }
}

/// `key=value` lines in insertion order.
#[derive(Default)]
pub struct Record {
    text: String,
}

impl Record {
    pub fn put(&mut self, key: impl AsRef<str>, value: impl AsRef<str>) {
        let _ = writeln!(self.text, "{}={}", key.as_ref(), value.as_ref());
    }

    pub fn num(&mut self, key: impl AsRef<str>, value: f64) {
        self.put(key, fmt_num(value));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Creates `dir` (and parents) if needed.
pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("--out {}: cannot create directory: {e}", dir.display())))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("{}: cannot write: {e}", path.display())))
}

/// Provenance written next to every output set. Re-running with the same
/// fields reproduces the outputs byte for byte; only `timestamp_unix`
/// changes between runs.
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub version: &'static str,
}

impl RunManifest {
    pub fn render(&self, timestamp: u64) -> String {
        let mut r = Record::default();
        r.put("command", &self.command);
        r.put("args", self.args.join(" "));
        r.put("config", &self.config);
        r.put("seed", self.seed.to_string());
        r.put("out_dir", self.out_dir.display().to_string());
        r.put("version", self.version);
        r.put("timestamp_unix", timestamp.to_string());
        r.text
    }

    /// Writes `manifest.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        write_file(&dir.join("manifest.txt"), &self.render(now))
    }
}
