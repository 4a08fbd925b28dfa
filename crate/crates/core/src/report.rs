//! Report emission: JSON with floats rounded to 6 significant digits and the
//! CSV tables derived from an experiment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Number, Value};

use crate::error::{Error, Result};
use crate::evaluation::FairnessTable;
use crate::experiment::{AblationRow, ExperimentOutcome, ExperimentReport, PreparedData, RegimeSummary};
use crate::federation::RoundTelemetry;

pub const SIGNIFICANT_DIGITS: usize = 6;

/// Rounds to `digits` significant digits; non-finite values pass through.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            *v = Number::from_f64(round_sig(x, SIGNIFICANT_DIGITS)).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON in struct-field order with every float rounded.
pub fn to_rounded_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    format!("{}", round_sig(x, SIGNIFICANT_DIGITS))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// CSV-quote a field if needed.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn telemetry_csv(telemetry: &[RoundTelemetry]) -> String {
    let k = telemetry.first().map_or(0, |t| t.per_client_accuracy.len());
    let mut out = String::from("round,global_acc");
    for j in 1..=k {
        let _ = write!(out, ",client{j}_acc");
    }
    out.push_str(",weight_delta_l2,lr,bytes_up,bytes_down\n");
    for t in telemetry {
        let _ = write!(out, "{},{}", t.round, fmt(t.global_accuracy));
        for a in &t.per_client_accuracy {
            let _ = write!(out, ",{}", fmt(*a));
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            fmt(t.weight_delta_l2),
            fmt(t.lr),
            t.bytes_up,
            t.bytes_down
        );
    }
    out
}

pub fn summary_csv(rows: &[RegimeSummary]) -> String {
    let mut out = String::from("method,accuracy_mean,accuracy_std,auc_mean,f1_mean,comm_mb\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            field(&r.method),
            fmt(r.accuracy_mean),
            fmt(r.accuracy_std),
            fmt(r.auc_mean),
            fmt(r.f1_mean),
            fmt(r.comm_mb)
        );
    }
    out
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("mu,accuracy_mean,accuracy_std,convergence_rounds_mean,convergence_rounds_std,runs\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt(r.mu),
            fmt(r.accuracy_mean),
            fmt(r.accuracy_std),
            fmt(r.convergence_rounds_mean),
            fmt(r.convergence_rounds_std),
            r.runs
        );
    }
    out
}

pub fn fairness_csv(table: &FairnessTable) -> String {
    let mut out = String::from("client_id,client,local_accuracy,federated_accuracy,improvement_pp\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.client_id,
            field(&r.name),
            fmt(r.local_accuracy),
            fmt(r.federated_accuracy),
            fmt(r.improvement_pp)
        );
    }
    let _ = writeln!(
        out,
        ",std,{},{},{}",
        fmt(table.local_std),
        fmt(table.federated_std),
        fmt_opt(table.std_reduction)
    );
    out
}

pub fn clients_csv(data: &PreparedData) -> String {
    let mut out = String::from("client_id,client,samples,mean_age,age_std,disease_rate\n");
    for c in &data.summary.clients {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.client_id,
            field(&c.name),
            c.samples,
            fmt(c.mean_age),
            fmt(c.age_std),
            fmt(c.disease_rate)
        );
    }
    out
}

pub fn telemetry_file_name(regime: &str, mu: f64, seed: u64) -> String {
    format!("telemetry_{regime}_{mu}_{seed}.csv")
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn report_json(report: &ExperimentReport) -> Result<String> {
    to_rounded_json(report)
}

/// Writes report.json, the CSV tables, per-run telemetry and timings.json.
/// Returns the written paths in emission order.
pub fn emit_report(outcome: &ExperimentOutcome, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let report = &outcome.report;
    let mut written = Vec::new();
    write(dir, "report.json", &report_json(report)?, &mut written)?;
    if !report.regimes.is_empty() {
        write(dir, "summary.csv", &summary_csv(&report.regimes), &mut written)?;
    }
    if let Some(rows) = &report.ablation {
        write(dir, "ablation.csv", &ablation_csv(rows), &mut written)?;
    }
    if let Some(table) = &report.fairness {
        write(dir, "fairness.csv", &fairness_csv(table), &mut written)?;
    }
    let mut names = std::collections::BTreeSet::new();
    for run in &outcome.runs {
        if let (Some(t), Some(mu)) = (&run.telemetry, run.mu) {
            let name = telemetry_file_name(run.regime.as_str(), mu, run.seed);
            if names.insert(name.clone()) {
                write(dir, &name, &telemetry_csv(t), &mut written)?;
            }
        }
    }
    let timings = json!({
        "total_seconds": outcome.total_seconds,
        "runs": outcome.runs.iter().map(|r| json!({
            "regime": r.regime.as_str(),
            "mu": r.mu,
            "seed": r.seed,
            "seconds": r.seconds,
        })).collect::<Vec<_>>(),
    });
    write(dir, "timings.json", &to_rounded_json(&timings)?, &mut written)?;
    Ok(written)
}

#[derive(Serialize)]
struct PartitionMembers<'a> {
    client_id: u32,
    name: &'a str,
    member_indices: &'a [usize],
    train_indices: &'a [usize],
    test_indices: &'a [usize],
}

/// Client membership, the summary table and heterogeneity measures.
pub fn partition_json(data: &PreparedData) -> Result<String> {
    let members: Vec<PartitionMembers<'_>> = data
        .clients
        .iter()
        .map(|c| PartitionMembers {
            client_id: c.client_id,
            name: &c.name,
            member_indices: &c.member_indices,
            train_indices: &c.split.train_indices,
            test_indices: &c.split.test_indices,
        })
        .collect();
    to_rounded_json(&json!({
        "summary": data.summary,
        "heterogeneity": data.heterogeneity,
        "members": members,
    }))
}

/// Writes partition.json and clients.csv.
pub fn emit_partition(data: &PreparedData, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut written = Vec::new();
    write(dir, "partition.json", &partition_json(data)?, &mut written)?;
    write(dir, "clients.csv", &clients_csv(data), &mut written)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_six_significant_digits() {
        assert_eq!(round_sig(0.833333333, 6), 0.833333);
        assert_eq!(round_sig(123456789.0, 6), 123457000.0);
        assert_eq!(round_sig(-0.000123456789, 6), -0.000123457);
        assert_eq!(round_sig(0.0, 6), 0.0);
        assert!(round_sig(f64::NAN, 6).is_nan());
    }

    #[test]
    fn json_rounding_keeps_integers_and_key_order() {
        let v = json!({"z": 1, "a": 0.1234567891, "m": [2.0000001, 7]});
        let s = to_rounded_json(&v).unwrap();
        let z = s.find("\"z\"").unwrap();
        let a = s.find("\"a\"").unwrap();
        assert!(z < a);
        assert!(s.contains("0.123457"));
        assert!(s.contains("2.0"));
        assert!(s.contains("7\n") || s.contains("7,") || s.contains("7\r") || s.contains("  7"));
    }

    #[test]
    fn telemetry_header_lists_every_client() {
        let t = vec![RoundTelemetry {
            round: 1,
            global_accuracy: 0.5,
            per_client_accuracy: vec![0.25, 0.75],
            weight_delta_l2: 0.1,
            lr: 0.1,
            bytes_up: 112,
            bytes_down: 112,
        }];
        let csv = telemetry_csv(&t);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "round,global_acc,client1_acc,client2_acc,weight_delta_l2,lr,bytes_up,bytes_down"
        );
        assert_eq!(lines.next().unwrap(), "1,0.5,0.25,0.75,0.1,0.1,112,112");
    }

    #[test]
    fn csv_fields_with_commas_are_quoted() {
        assert_eq!(field("a,b"), "\"a,b\"");
        assert_eq!(field("plain"), "plain");
        assert_eq!(
            telemetry_file_name("fedprox", 0.05, 42),
            "telemetry_fedprox_0.05_42.csv"
        );
    }
}
