//! Output formatting shared by all subcommands.
//!
//! Reported floats carry 12 significant digits. Every file starts with the
//! same metadata block (tool version, seed, numeric policy, input hash) and
//! contains nothing that varies between identical runs.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Map, Value};

use sdc_core::witness::sha256_hex;
use sdc_core::NumericPolicy;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `x` with 12 significant digits in the shortest plain notation.
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" {
            "0".to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, exponent) = s.split_once('e').expect("scientific notation");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exponent}")
    }
}

/// Rounds to 12 significant digits so JSON numbers match the CSV text.
pub fn round12(x: f64) -> f64 {
    fmt_float(x).parse().unwrap_or(x)
}

/// Recursively rounds every float in a JSON value.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64().map(|x| json!(round12(x))).unwrap_or(Value::Number(n)),
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub policy: NumericPolicy,
    pub input_sha256: String,
}

impl Metadata {
    /// `inputs` is the canonical JSON of everything the command read: parsed
    /// parameters plus the contents of input files.
    pub fn new(command: &str, seed: u64, policy: NumericPolicy, inputs: &Value) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            seed,
            policy,
            input_sha256: sha256_hex(inputs.to_string().as_bytes()),
        }
    }

    pub fn csv_lines(&self) -> String {
        let policy = serde_json::to_string(&self.policy).expect("policy serializes");
        format!(
            "# tool={} version={}\n# command={}\n# seed={}\n# policy={}\n# input_sha256={}\n",
            self.tool, self.version, self.command, self.seed, policy, self.input_sha256
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// CSV table: header row plus data rows, cells already formatted.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// `quantity,value` rows for a flat JSON object.
pub fn summary_table(summary: &Map<String, Value>) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in summary {
        let cell = match v {
            Value::Number(n) => n.as_f64().map(fmt_float).unwrap_or_else(|| n.to_string()),
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        t.push(vec![k.clone(), cell]);
    }
    t
}

pub struct Report {
    pub metadata: Metadata,
    /// Scalar results, shown as comment lines above CSV tables.
    pub summary: Map<String, Value>,
    pub table: Option<Table>,
    /// Extra structured content for JSON output only.
    pub extra: Map<String, Value>,
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut root = Map::new();
                root.insert("metadata".into(), serde_json::to_value(&self.metadata).expect("metadata serializes"));
                root.insert("summary".into(), round_json(Value::Object(self.summary.clone())));
                if let Some(t) = &self.table {
                    let rows: Vec<Value> = t
                        .rows
                        .iter()
                        .map(|r| {
                            let obj: Map<String, Value> = t
                                .header
                                .iter()
                                .zip(r)
                                .map(|(h, c)| (h.clone(), cell_to_json(c)))
                                .collect();
                            Value::Object(obj)
                        })
                        .collect();
                    root.insert("rows".into(), Value::Array(rows));
                }
                for (k, v) in &self.extra {
                    root.insert(k.clone(), v.clone());
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = self.metadata.csv_lines();
                let table = match &self.table {
                    Some(t) => {
                        for row in summary_table(&self.summary).rows {
                            s.push_str(&format!("# {}={}\n", row[0], row[1]));
                        }
                        t.clone()
                    }
                    None => summary_table(&self.summary),
                };
                s.push_str(&table.to_csv());
                s
            }
        }
    }
}

fn cell_to_json(cell: &str) -> Value {
    if let Ok(i) = cell.parse::<i64>() {
        return json!(i);
    }
    if let Ok(x) = cell.parse::<f64>() {
        return json!(x);
    }
    match cell {
        "true" => json!(true),
        "false" => json!(false),
        _ => json!(cell),
    }
}

/// Writes to `path`, or stdout when absent.
pub fn emit(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing to stdout")
        }
    }
}
