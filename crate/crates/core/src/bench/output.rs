//! CSV and JSON artifacts of a run.
//!
//! Every CSV starts with a metadata line
//! `# schema=<name>/<version> experiment=<kind> config_hash=<sha256>`,
//! followed by a header row. Adding columns bumps the version.
//!
//! * `<kind>_trials.csv`: one row per trial.
//! * `<kind>_summary.csv`: `loss,kl,d,n_train,metric,p,completed,diverged,failed,median,q25,q75`,
//!   one row per cell and metric (`lp_error` per order, `abs_val_gap`).
//! * `nn_bounds_summary.csv`: `side,d,n,order,weighted,within_hypothesis,trials,estimate,stderr,scaled,bound,verdict`.
//! * `<kind>_record.json`: the full [`RunRecord`].
//! * `timing.csv`: wall-clock seconds per cell. The only output that varies
//!   between identical runs.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentKind;
use super::plot::render_summary_svg;
use super::run::{CellSummary, RunRecord, TrialRecord};
use super::BenchError;
use crate::analysis::{fmt, EvalReport};

pub const TRIALS_SCHEMA: &str = "dre-trials/1";
pub const SUMMARY_SCHEMA: &str = "dre-summary/1";
pub const NN_SCHEMA: &str = "dre-nn/1";

pub const SUMMARY_COLUMNS: [&str; 12] = [
    "loss", "kl", "d", "n_train", "metric", "p", "completed", "diverged", "failed", "median", "q25", "q75",
];
pub const NN_COLUMNS: [&str; 12] = [
    "side",
    "d",
    "n",
    "order",
    "weighted",
    "within_hypothesis",
    "trials",
    "estimate",
    "stderr",
    "scaled",
    "bound",
    "verdict",
];

fn meta_line(schema: &str, kind: ExperimentKind, hash: &str) -> String {
    format!("# schema={schema} experiment={} config_hash={hash}\n", kind.name())
}

fn to_csv(meta: String, header: &[String], rows: &[Vec<String>]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(meta.into_bytes());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| BenchError::Runtime(e.to_string()))
}

pub fn trials_csv(record: &RunRecord, p_orders: &[f64]) -> Result<String, BenchError> {
    let eval_header = EvalReport::csv_header(p_orders);
    // loss, n_train and d come from the cell key
    let keep = |i: usize| !matches!(i, 0 | 2 | 3);
    let mut header: Vec<String> = [
        "loss",
        "kl",
        "d",
        "n_train",
        "trial",
        "status",
        "epochs_run",
        "best_epoch",
        "stop_reason",
        "best_val_loss",
        "val_gap",
        "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(eval_header.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, h)| h.clone()));
    let width = header.len();
    let rows: Vec<Vec<String>> = record
        .trials
        .iter()
        .map(|t: &TrialRecord| {
            let mut row = vec![
                t.key.loss.clone(),
                fmt(t.key.kl),
                t.key.d.to_string(),
                t.key.n_train.to_string(),
                t.trial.to_string(),
                serde_plain(&t.status),
            ];
            match &t.train {
                Some(s) => row.extend([
                    s.epochs_run.to_string(),
                    s.best_epoch.to_string(),
                    s.stop_reason.to_string(),
                    fmt(s.best_val_loss),
                    s.val_gap.map(fmt).unwrap_or_default(),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 5)),
            }
            row.push(t.error.clone().unwrap_or_default());
            if let Some(e) = &t.eval {
                row.extend(e.csv_row().into_iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, v)| v));
            }
            row.resize(width, String::new());
            row
        })
        .collect();
    to_csv(meta_line(TRIALS_SCHEMA, record.experiment, &record.config_hash), &header, &rows)
}

fn serde_plain<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn summary_rows(c: &CellSummary) -> Vec<Vec<String>> {
    let key = [c.key.loss.clone(), fmt(c.key.kl), c.key.d.to_string(), c.key.n_train.to_string()];
    let counts = [c.completed.to_string(), c.diverged.to_string(), c.failed.to_string()];
    let mut rows = Vec::new();
    for (p, q) in &c.lp {
        let mut r = key.to_vec();
        r.extend(["lp_error".to_string(), fmt(*p)]);
        r.extend(counts.clone());
        r.extend([fmt(q.median), fmt(q.q25), fmt(q.q75)]);
        rows.push(r);
    }
    if let Some(q) = &c.abs_val_gap {
        let mut r = key.to_vec();
        r.extend(["abs_val_gap".to_string(), String::new()]);
        r.extend(counts);
        r.extend([fmt(q.median), fmt(q.q25), fmt(q.q75)]);
        rows.push(r);
    }
    rows
}

pub fn summary_csv(record: &RunRecord) -> Result<String, BenchError> {
    if let Some(nn) = &record.nn {
        let mut rows = Vec::new();
        let cells = nn
            .upper
            .iter()
            .map(|c| (&c.estimate, c.within_hypothesis))
            .chain(nn.lower.trend.iter().map(|e| (e, true)));
        for (e, within) in cells {
            rows.push(vec![
                serde_plain(&e.side),
                e.d.to_string(),
                e.n.to_string(),
                fmt(e.order),
                e.weighted.to_string(),
                within.to_string(),
                e.trials.to_string(),
                fmt(e.estimate),
                fmt(e.stderr),
                fmt(e.scaled),
                fmt(e.bound),
                e.verdict.to_string(),
            ]);
        }
        let header: Vec<String> = NN_COLUMNS.iter().map(|s| s.to_string()).collect();
        return to_csv(meta_line(NN_SCHEMA, record.experiment, &record.config_hash), &header, &rows);
    }
    let rows: Vec<Vec<String>> = record.cells.iter().flat_map(summary_rows).collect();
    let header: Vec<String> = SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect();
    to_csv(meta_line(SUMMARY_SCHEMA, record.experiment, &record.config_hash), &header, &rows)
}

/// Metadata and rows of a summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub schema: String,
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl SummaryTable {
    pub fn column(&self, name: &str) -> Result<usize, BenchError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BenchError::Config(format!("summary CSV lacks column {name:?}")))
    }
}

pub fn parse_summary_csv(text: &str) -> Result<SummaryTable, BenchError> {
    let (meta, body) = text
        .split_once('\n')
        .ok_or_else(|| BenchError::Config("summary CSV is empty".into()))?;
    let meta = meta
        .strip_prefix("# ")
        .ok_or_else(|| BenchError::Config("summary CSV lacks its metadata line".into()))?;
    let mut schema = None;
    let mut experiment = None;
    let mut hash = String::new();
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("schema", v)) => schema = Some(v.to_string()),
            Some(("experiment", v)) => experiment = ExperimentKind::from_name(v),
            Some(("config_hash", v)) => hash = v.to_string(),
            _ => {}
        }
    }
    let schema = schema.ok_or_else(|| BenchError::Config("metadata line has no schema".into()))?;
    if schema != SUMMARY_SCHEMA && schema != NN_SCHEMA {
        return Err(BenchError::Config(format!("unsupported summary schema {schema}")));
    }
    let experiment = experiment.ok_or_else(|| BenchError::Config("metadata line has no known experiment".into()))?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    Ok(SummaryTable {
        schema,
        experiment,
        config_hash: hash,
        header,
        rows,
    })
}

fn timing_csv(record: &RunRecord) -> String {
    let mut s = String::from("loss,kl,d,n_train,wall_clock_s\n");
    for c in &record.cells {
        s.push_str(&format!(
            "{},{},{},{},{:.3}\n",
            c.key.loss,
            fmt(c.key.kl),
            c.key.d,
            c.key.n_train,
            c.wall_clock_s
        ));
    }
    s
}

/// Writes every artifact of `record` into `dir` and returns the paths.
pub fn write_run(record: &RunRecord, p_orders: &[f64], dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(dir)?;
    let name = record.experiment.name();
    let mut written = Vec::new();
    let mut put = |file: String, contents: String| -> Result<(), BenchError> {
        let path = dir.join(file);
        fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };
    let summary = summary_csv(record)?;
    put(format!("{name}_record.json"), serde_json::to_string_pretty(record)?)?;
    if record.nn.is_none() {
        put(format!("{name}_trials.csv"), trials_csv(record, p_orders)?)?;
        put("timing.csv".into(), timing_csv(record))?;
    }
    put(format!("{name}.svg"), render_summary_svg(&parse_summary_csv(&summary)?)?)?;
    put(format!("{name}_summary.csv"), summary)?;
    Ok(written)
}
