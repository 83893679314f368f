use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::runner::config::Scheme;
use crate::runner::exec::AggregateRow;

/// Reads every aggregate row from the given CSV files.
pub fn read_rows<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<AggregateRow>> {
    let mut rows = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let err = |e: csv::Error| Error::InvalidDataset(format!("{}: {e}", path.display()));
        let mut reader = csv::Reader::from_path(path).map_err(err)?;
        for row in reader.deserialize() {
            rows.push(row.map_err(err)?);
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no aggregate rows to report".into()));
    }
    Ok(rows)
}

const SCHEME_ORDER: [Scheme; 6] = [Scheme::Plain, Scheme::Pf, Scheme::St, Scheme::Mtl, Scheme::Advt, Scheme::AdvtSs];
const TASK_ORDER: [&str; 4] = ["none", "clu", "par", "comp"];

fn rank(row: &AggregateRow) -> (usize, usize) {
    let s = SCHEME_ORDER.iter().position(|s| s.name() == row.scheme).unwrap_or(SCHEME_ORDER.len());
    let t = TASK_ORDER.iter().position(|&t| t == row.task).unwrap_or(TASK_ORDER.len());
    (s, t)
}

fn display_name(scheme: &str, task: &str) -> String {
    let base = match scheme {
        "plain" => "GCN",
        "pf" => "P&F",
        "st" => "ST",
        "mtl" => "MTL",
        "advt" => "AdvT",
        "advt_ss" => "AdvT",
        other => other,
    };
    let mut chars = task.chars();
    let task = match chars.next() {
        Some(c) if task != "none" => c.to_uppercase().chain(chars).collect::<String>(),
        _ => return base.to_string(),
    };
    let sep = if scheme == "advt_ss" { "+" } else { "-" };
    format!("{base}{sep}{task}")
}

fn cell(mean: f64, std: f64) -> String {
    if std.is_nan() {
        format!("{:.2}", 100.0 * mean)
    } else {
        format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * std)
    }
}

/// Markdown table with one row per (scheme, task) and one column per
/// dataset, plus an attacked-accuracy column where attacks were run.
/// Values are percentages.
///
/// In each column the two best means are set in bold when they exceed
/// the plain GCN row of that column by more than `min_gain` points. A
/// column without a plain row flags its best two when it has more than
/// one entry.
pub fn format_table(rows: &[AggregateRow], min_gain: f64) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no aggregate rows to report".into()));
    }
    let mut sorted: Vec<&AggregateRow> = rows.iter().collect();
    sorted.sort_by_key(|r| rank(r));
    let mut row_keys: Vec<(String, String)> = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    let mut values: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for r in &sorted {
        let key = (r.scheme.clone(), r.task.clone());
        let ri = row_keys.iter().position(|k| *k == key).unwrap_or_else(|| {
            row_keys.push(key);
            row_keys.len() - 1
        });
        let mut put = |col: String, v: (f64, f64)| {
            let ci = columns.iter().position(|c| *c == col).unwrap_or_else(|| {
                columns.push(col);
                columns.len() - 1
            });
            if values.insert((ri, ci), v).is_some() {
                log::warn!("duplicate row for {} {} in column {}; keeping the last", r.scheme, r.task, columns[ci]);
            }
        };
        put(r.dataset.clone(), (r.mean, r.std));
        if let (Some(m), Some(s)) = (r.attacked_mean, r.attacked_std) {
            put(format!("{} (attacked)", r.dataset), (m, s));
        }
    }

    let baseline = row_keys.iter().position(|(s, t)| s == "plain" && t == "none");
    let mut flagged = vec![vec![false; columns.len()]; row_keys.len()];
    for ci in 0..columns.len() {
        let mut present: Vec<(usize, f64)> = (0..row_keys.len())
            .filter_map(|ri| values.get(&(ri, ci)).map(|v| (ri, v.0)))
            .filter(|(_, m)| !m.is_nan())
            .collect();
        present.sort_by(|a, b| b.1.total_cmp(&a.1));
        let base = baseline.and_then(|b| values.get(&(b, ci))).map(|v| v.0);
        for &(ri, m) in present.iter().take(2) {
            flagged[ri][ci] = match base {
                Some(b) => 100.0 * (m - b) > min_gain,
                None => present.len() > 1,
            };
        }
    }

    let mut header = vec!["Method".to_string()];
    header.extend(columns.iter().cloned());
    let mut lines = vec![header];
    for (ri, (scheme, task)) in row_keys.iter().enumerate() {
        let mut line = vec![display_name(scheme, task)];
        for ci in 0..columns.len() {
            line.push(match values.get(&(ri, ci)) {
                Some(&(m, _)) if m.is_nan() => "-".to_string(),
                Some(&(m, s)) if flagged[ri][ci] => format!("**{}**", cell(m, s)),
                Some(&(m, s)) => cell(m, s),
                None => "-".to_string(),
            });
        }
        lines.push(line);
    }
    let widths: Vec<usize> = (0..=columns.len())
        .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
        .collect();
    let render = |line: &[String]| {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("| {} |", cells.join(" | "))
    };
    let mut out = vec![render(&lines[0])];
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push(format!("|-{}-|", rule.join("-|-")));
    out.extend(lines[1..].iter().map(|l| render(l)));
    Ok(out.join("\n") + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &str, task: &str, dataset: &str, mean: f64) -> AggregateRow {
        AggregateRow {
            name: format!("{scheme}-{task}-{dataset}"),
            dataset: dataset.into(),
            scheme: scheme.into(),
            task: task.into(),
            completed: 10,
            failed: 0,
            mean,
            std: 0.005,
            attacked_mean: None,
            attacked_std: None,
            wall_time_s: 1.0,
            config: "{}".into(),
        }
    }

    #[test]
    fn single_row_table() {
        let t = format_table(&[row("plain", "none", "cora", 0.81)], 0.0).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].contains("GCN") && lines[2].contains("81.00 ± 0.50"));
        assert!(!t.contains("**"));
    }

    #[test]
    fn flags_rows_that_beat_the_baseline() {
        let rows = [row("plain", "none", "pubmed", 0.791), row("mtl", "par", "pubmed", 0.800)];
        let t = format_table(&rows, 0.0).unwrap();
        assert!(t.contains("| **80.00 ± 0.50** |"));
        assert!(t.contains("| 79.10 ± 0.50 "));
        let worse = [row("plain", "none", "pubmed", 0.791), row("mtl", "par", "pubmed", 0.789)];
        assert!(!format_table(&worse, 0.0).unwrap().contains("**"));
        assert!(!format_table(&rows, 1.0).unwrap().contains("**"));
    }

    #[test]
    fn rows_follow_scheme_order_and_columns_datasets() {
        let mut adv = row("advt_ss", "comp", "cora", 0.79);
        adv.attacked_mean = Some(0.47);
        adv.attacked_std = Some(0.03);
        let rows = [
            adv,
            row("mtl", "par", "cora", 0.815),
            row("plain", "none", "citeseer", 0.7085),
            row("plain", "none", "cora", 0.81),
            row("pf", "clu", "cora", 0.818),
        ];
        let t = format_table(&rows, 0.0).unwrap();
        let names: Vec<&str> = t.lines().skip(2).map(|l| l.split('|').nth(1).unwrap().trim()).collect();
        assert_eq!(names, ["GCN", "P&F-Clu", "MTL-Par", "AdvT+Comp"]);
        assert!(t.lines().next().unwrap().contains("cora (attacked)"));
        assert!(t.contains("47.00 ± 3.00"));
        assert!(format_table(&[], 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.agg.csv");
        let mut r = row("st", "none", "cora", 0.8);
        r.std = f64::NAN;
        r.config = r#"{"a.b": 1, "c": "x,y"}"#.into();
        let mut w = csv::Writer::from_path(&path).unwrap();
        w.serialize(&r).unwrap();
        w.flush().unwrap();
        let back = read_rows(&[&path]).unwrap();
        assert_eq!(back[0].config, r.config);
        assert!(back[0].std.is_nan());
        assert_eq!(back[0].attacked_mean, None);
        assert!(format_table(&back, 0.0).unwrap().contains("| 80.00 "));
    }
}
