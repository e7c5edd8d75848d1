//! CSV formats for measures, rewards, metrics, plans and result records.
//!
//! | file          | header                                          |
//! |---------------|-------------------------------------------------|
//! | measure       | `index,weight`                                  |
//! | reward table  | `state,action,value`                            |
//! | reward set    | `reward,state,action,value`                     |
//! | ground metric | `row,col,value`                                 |
//! | plan          | `row,col,mass`                                  |
//! | records       | `kind,variable,seed,metric,value,converged,wall_ms` |
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64`. Files are written whole to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lab::{sort_records, ExperimentKind, ResultRecord};
use crate::ot::{GroundMetric, TransportPlan};
use crate::reward::{DiscreteMeasure, RewardTable};

pub const RECORDS_HEADER: &str = "kind,variable,seed,metric,value,converged,wall_ms";

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// `x` with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_rows(text: &str, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if found != header {
        return Err(parse_err(format!(
            "expected header `{}`, found `{}`",
            header.join(","),
            found.join(",")
        )));
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| parse_err(e.to_string()))?;
            Ok(r.iter().map(|s| s.trim().to_string()).collect())
        })
        .collect()
}

fn field<T: std::str::FromStr>(
    row: &[String],
    column: usize,
    line: usize,
    name: &str,
) -> Result<T> {
    row[column]
        .parse()
        .map_err(|_| parse_err(format!("row {line}: cannot parse {name} `{}`", row[column])))
}

/// Fills a dense `rows × cols` table from `(row, col, value)` triples, each
/// cell exactly once. The shape is taken from the largest indices.
fn dense(triples: Vec<(usize, usize, f64)>, what: &str) -> Result<(usize, usize, Vec<f64>)> {
    if triples.is_empty() {
        return Err(parse_err(format!("{what} file has no rows")));
    }
    let rows = triples.iter().map(|t| t.0).max().unwrap() + 1;
    let cols = triples.iter().map(|t| t.1).max().unwrap() + 1;
    let mut values = vec![f64::NAN; rows * cols];
    let mut seen = vec![false; rows * cols];
    for (r, c, v) in triples {
        if std::mem::replace(&mut seen[r * cols + c], true) {
            return Err(parse_err(format!("{what} entry ({r}, {c}) appears twice")));
        }
        values[r * cols + c] = v;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(parse_err(format!(
            "{what} entry ({}, {}) is missing",
            k / cols,
            k % cols
        )));
    }
    Ok((rows, cols, values))
}

fn triples(text: &str, header: &[&str]) -> Result<Vec<(usize, usize, f64)>> {
    read_rows(text, header)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok((
                field(row, 0, i + 1, header[0])?,
                field(row, 1, i + 1, header[1])?,
                field(row, 2, i + 1, header[2])?,
            ))
        })
        .collect()
}

pub fn measure_to_csv(measure: &DiscreteMeasure) -> String {
    let mut out = String::from("index,weight\n");
    for (i, w) in measure.weights().iter().enumerate() {
        writeln!(out, "{i},{}", format_float(*w)).unwrap();
    }
    out
}

pub fn measure_from_csv(text: &str) -> Result<DiscreteMeasure> {
    let rows = read_rows(text, &["index", "weight"])?;
    let mut weights = vec![f64::NAN; rows.len()];
    for (i, row) in rows.iter().enumerate() {
        let index: usize = field(row, 0, i + 1, "index")?;
        if index >= rows.len() || !weights[index].is_nan() {
            return Err(parse_err(format!(
                "row {}: index {index} is out of range or repeated",
                i + 1
            )));
        }
        weights[index] = field(row, 1, i + 1, "weight")?;
    }
    DiscreteMeasure::new(weights)
}

pub fn reward_to_csv(reward: &RewardTable) -> String {
    let mut out = String::from("state,action,value\n");
    for s in 0..reward.num_states() {
        for a in 0..reward.num_actions() {
            writeln!(out, "{s},{a},{}", format_float(reward.get(s, a))).unwrap();
        }
    }
    out
}

pub fn reward_from_csv(text: &str) -> Result<RewardTable> {
    let (ns, na, values) = dense(triples(text, &["state", "action", "value"])?, "reward")?;
    RewardTable::new(ns, na, values)
}

pub fn reward_set_to_csv(rewards: &[RewardTable]) -> String {
    let mut out = String::from("reward,state,action,value\n");
    for (k, reward) in rewards.iter().enumerate() {
        for s in 0..reward.num_states() {
            for a in 0..reward.num_actions() {
                writeln!(out, "{k},{s},{a},{}", format_float(reward.get(s, a))).unwrap();
            }
        }
    }
    out
}

/// Reward tables keyed by the `reward` column, in increasing key order.
/// Keys must be `0..m`; every table must have the same shape.
pub fn reward_set_from_csv(text: &str) -> Result<Vec<RewardTable>> {
    let header = ["reward", "state", "action", "value"];
    let mut groups: Vec<Vec<(usize, usize, f64)>> = Vec::new();
    for (i, row) in read_rows(text, &header)?.iter().enumerate() {
        let k: usize = field(row, 0, i + 1, "reward")?;
        if k >= groups.len() {
            groups.resize(k + 1, Vec::new());
        }
        groups[k].push((
            field(row, 1, i + 1, "state")?,
            field(row, 2, i + 1, "action")?,
            field(row, 3, i + 1, "value")?,
        ));
    }
    if groups.is_empty() {
        return Err(parse_err("reward set file has no rows"));
    }
    let mut out = Vec::with_capacity(groups.len());
    for (k, g) in groups.into_iter().enumerate() {
        let (ns, na, values) = dense(g, &format!("reward {k}"))?;
        out.push(RewardTable::new(ns, na, values)?);
    }
    if out
        .iter()
        .any(|r| r.num_states() != out[0].num_states() || r.num_actions() != out[0].num_actions())
    {
        return Err(parse_err("rewards in the set have different shapes"));
    }
    Ok(out)
}

fn matrix_to_csv(header: &str, size: usize, values: &[f64]) -> String {
    let mut out = format!("{header}\n");
    for i in 0..size {
        for j in 0..size {
            writeln!(out, "{i},{j},{}", format_float(values[i * size + j])).unwrap();
        }
    }
    out
}

pub fn metric_to_csv(metric: &GroundMetric) -> String {
    matrix_to_csv("row,col,value", metric.size(), metric.costs())
}

pub fn metric_from_csv(text: &str) -> Result<GroundMetric> {
    let (rows, cols, values) = dense(triples(text, &["row", "col", "value"])?, "metric")?;
    if rows != cols {
        return Err(parse_err(format!("metric is {rows} x {cols}, not square")));
    }
    GroundMetric::new(rows, values)
}

pub fn plan_to_csv(plan: &TransportPlan) -> String {
    matrix_to_csv("row,col,mass", plan.size(), plan.coupling())
}

/// The coupling matrix of a plan file, row-major.
pub fn plan_from_csv(text: &str) -> Result<(usize, Vec<f64>)> {
    let (rows, cols, values) = dense(triples(text, &["row", "col", "mass"])?, "plan")?;
    if rows != cols {
        return Err(parse_err(format!("plan is {rows} x {cols}, not square")));
    }
    Ok((rows, values))
}

fn record_line(r: &ResultRecord) -> String {
    let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{}\n",
        r.kind,
        format_float(r.variable),
        seed,
        r.metric,
        format_float(r.value),
        r.converged,
        r.wall_ms
    )
}

/// Header plus one line per record, in canonical order.
pub fn records_to_csv(records: &[ResultRecord]) -> String {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut out = format!("{RECORDS_HEADER}\n");
    for r in &sorted {
        out.push_str(&record_line(r));
    }
    out
}

pub fn write_records(records: &[ResultRecord], path: &Path) -> Result<()> {
    write_atomic(path, &records_to_csv(records))
}

pub fn records_from_csv(text: &str) -> Result<Vec<ResultRecord>> {
    let header: Vec<&str> = RECORDS_HEADER.split(',').collect();
    read_rows(text, &header)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 1;
            let kind = ExperimentKind::parse(&row[0])
                .ok_or_else(|| parse_err(format!("row {line}: unknown kind `{}`", row[0])))?;
            let seed = if row[2].is_empty() {
                None
            } else {
                Some(field(row, 2, line, "seed")?)
            };
            Ok(ResultRecord {
                kind,
                variable: field(row, 1, line, "variable")?,
                seed,
                metric: row[3].clone(),
                value: field(row, 4, line, "value")?,
                converged: field(row, 5, line, "converged")?,
                wall_ms: field(row, 6, line, "wall_ms")?,
            })
        })
        .collect()
}

/// SHA-256 over the records file with the trailing `wall_ms` field of every
/// line removed, as lowercase hex.
pub fn records_digest(csv_text: &str) -> String {
    let mut hasher = Sha256::new();
    for line in csv_text.split_inclusive('\n') {
        let body = line.strip_suffix('\n').unwrap_or(line);
        let kept = body.rsplit_once(',').map_or(body, |(head, _)| head);
        hasher.update(kept.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_records_give_header_only() {
        assert_eq!(records_to_csv(&[]), format!("{RECORDS_HEADER}\n"));
    }

    #[test]
    fn digest_ignores_wall_time() {
        let a = "h,wall_ms\nx,1\ny,20\n";
        let b = "h,wall_ms\nx,7\ny,3\n";
        let c = "h,wall_ms\nx,7\nz,3\n";
        assert_eq!(records_digest(a), records_digest(b));
        assert_ne!(records_digest(a), records_digest(c));
    }

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn malformed_inputs_are_parse_errors() {
        assert!(matches!(
            measure_from_csv("idx,weight\n0,1\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            measure_from_csv("index,weight\n0,abc\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            measure_from_csv("index,weight\n0,0.5\n0,0.5\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            reward_from_csv("state,action,value\n0,0,1\n1,1,1\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            metric_from_csv("row,col,value\n0,0,0\n0,1,1\n1,0,1\n1,1,0\n0,1,1\n"),
            Err(Error::Parse(_))
        ));
        // parses but violates the measure invariant
        assert!(matches!(
            measure_from_csv("index,weight\n0,0.5\n1,0.4\n"),
            Err(Error::InvalidArgument(_))
        ));
    }
}
