//! CSV and JSON writers for results, bound tables and Monte Carlo reports.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use anyhow::Result;
use cache_regret_core::bounds::BoundReport;
use cache_regret_core::RunResult;
use serde::{Deserialize, Serialize};

/// Significant digits of every serialized real.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// `x` rounded to [`SIGNIFICANT_DIGITS`] and printed in the shortest form
/// that reads back to the rounded value.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("valid float");
    if rounded == 0.0 {
        return "0".into();
    }
    rounded.to_string()
}

pub fn round_sig(x: f64) -> f64 {
    fmt_num(x).parse().unwrap_or(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => anyhow::bail!("format must be csv or json, got `{other}`"),
        }
    }
}

/// One checkpoint of one run, as serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub policy: String,
    pub replication: usize,
    pub seed: u64,
    pub t: usize,
    pub cum_reward: f64,
    pub hindsight_reward: f64,
    pub regret: f64,
    pub avg_regret: f64,
}

pub const RESULT_HEADER: [&str; 8] = [
    "policy",
    "replication",
    "seed",
    "t",
    "cum_reward",
    "hindsight_reward",
    "regret",
    "avg_regret",
];

pub fn result_rows(results: &[RunResult]) -> Vec<ResultRow> {
    results
        .iter()
        .flat_map(|r| {
            r.checkpoints.iter().map(move |c| ResultRow {
                policy: r.policy.clone(),
                replication: r.replication,
                seed: r.seed,
                t: c.t,
                cum_reward: round_sig(c.cum_reward),
                hindsight_reward: round_sig(c.hindsight_reward),
                regret: round_sig(c.regret),
                avg_regret: round_sig(c.avg_regret()),
            })
        })
        .collect()
}

/// `# key=value` lines written ahead of the header.
pub type Meta<'a> = &'a [(&'a str, String)];

fn write_meta(out: &mut impl Write, meta: Meta<'_>) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

pub fn write_results_csv(mut out: impl Write, results: &[RunResult], meta: Meta<'_>) -> Result<()> {
    write_meta(&mut out, meta)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for row in result_rows(results) {
        w.write_record([
            row.policy,
            row.replication.to_string(),
            row.seed.to_string(),
            row.t.to_string(),
            fmt_num(row.cum_reward),
            fmt_num(row.hindsight_reward),
            fmt_num(row.regret),
            fmt_num(row.avg_regret),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonResults<'a> {
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<&'a str, &'a str>,
    rows: Vec<ResultRow>,
}

pub fn write_results_json(mut out: impl Write, results: &[RunResult], meta: Meta<'_>) -> Result<()> {
    let doc = JsonResults {
        meta: meta.iter().map(|(k, v)| (*k, v.as_str())).collect(),
        rows: result_rows(results),
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

/// Reads a results CSV back, skipping `#` lines.
pub fn read_results_csv(input: impl Read) -> Result<Vec<ResultRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub const BOUND_HEADER: [&str; 10] = ["name", "setting", "T", "C", "N", "d", "J", "r", "value", "side"];

pub fn write_bounds_csv(mut out: impl Write, rows: &[BoundReport], meta: Meta<'_>) -> Result<()> {
    write_meta(&mut out, meta)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUND_HEADER)?;
    for b in rows {
        let p = &b.params;
        w.write_record([
            b.name.clone(),
            b.setting.name().to_string(),
            p.horizon.to_string(),
            p.capacity.to_string(),
            p.n_files.to_string(),
            p.d.to_string(),
            p.n_caches.to_string(),
            p.r.to_string(),
            fmt_num(b.value),
            b.side.name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header and rows of already formatted fields.
pub fn write_table(mut out: impl Write, header: &[&str], rows: &[Vec<String>], meta: Meta<'_>) -> Result<()> {
    write_meta(&mut out, meta)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON counterpart of [`write_table`]: one object per row, numeric cells
/// as numbers.
pub fn write_table_json(mut out: impl Write, header: &[&str], rows: &[Vec<String>], meta: Meta<'_>) -> Result<()> {
    use serde_json::{Map, Value};
    let cell = |s: &str| match s.parse::<f64>() {
        Ok(x) if x.is_finite() => serde_json::Number::from_f64(x).map_or_else(|| Value::from(s), Value::Number),
        _ => Value::from(s),
    };
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| Value::Object(header.iter().zip(r).map(|(k, v)| (k.to_string(), cell(v))).collect::<Map<_, _>>()))
        .collect();
    let mut doc = Map::new();
    if !meta.is_empty() {
        doc.insert(
            "meta".into(),
            Value::Object(meta.iter().map(|(k, v)| (k.to_string(), Value::from(v.as_str()))).collect()),
        );
    }
    doc.insert("rows".into(), Value::Array(rows));
    serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cache_regret_core::model::Checkpoint;

    fn run(policy: &str, rep: usize, points: &[(usize, f64, f64)]) -> RunResult {
        RunResult {
            policy: policy.into(),
            replication: rep,
            seed: 99,
            horizon: points.last().unwrap().0,
            per_slot_reward: vec![],
            cumulative_reward: points.last().unwrap().1,
            hindsight_reward: points.last().unwrap().2,
            checkpoints: points.iter().map(|&(t, q, h)| Checkpoint::new(t, q, h)).collect(),
        }
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(3.969483569), "3.96948357");
        assert_eq!(fmt_num(500.0), "500");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-1.0 / 3.0), "-0.333333333");
        assert_eq!(fmt_num(123456789012.0), "123456789000");
    }

    #[test]
    fn empty_results_give_header_only() {
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &[], &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "policy,replication,seed,t,cum_reward,hindsight_reward,regret,avg_regret\n"
        );
    }

    #[test]
    fn csv_round_trip() {
        let results = vec![
            run("lru", 0, &[(1, 0.0, 1.0), (10, 3.0, 6.0)]),
            run("ftpl", 1, &[(1, 1.0, 1.0), (10, 5.123456789123, 6.0)]),
        ];
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &results, &[("generated_unix", "0".into())]).unwrap();
        let back = read_results_csv(buf.as_slice()).unwrap();
        assert_eq!(back, result_rows(&results));
        assert_eq!(back.len(), 4);
    }

    #[test]
    fn json_mirrors_csv() {
        let results = vec![run("oga", 0, &[(4, 1.5, 2.0)])];
        let mut buf = Vec::new();
        write_results_json(&mut buf, &results, &[]).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["rows"][0]["policy"], "oga");
        assert_eq!(v["rows"][0]["avg_regret"], 0.125);
    }
}
