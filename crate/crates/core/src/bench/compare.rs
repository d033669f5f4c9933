use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use super::{BenchError, Summary};
use crate::metrics::MetricName;

/// Reads `summary.json`, given either the file or the run directory.
pub fn load_summary(path: &Path) -> Result<Summary, BenchError> {
    let file = if path.is_dir() { path.join("summary.json") } else { path.to_path_buf() };
    let bytes = fs::read(&file).map_err(|e| BenchError::io(&file, e))?;
    serde_json::from_slice(&bytes).map_err(|e| BenchError::Output {
        path: file,
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub label: String,
    pub value: f64,
    /// Dense rank, 1 = best.
    pub rank: usize,
    /// Shares its rank with another entry.
    pub tied: bool,
}

impl RankEntry {
    pub fn is_best(&self) -> bool {
        self.rank == 1
    }

    pub fn is_second(&self) -> bool {
        self.rank == 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRanking {
    pub metric: MetricName,
    /// Ordered by rank, then label.
    pub entries: Vec<RankEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub scenario_fingerprint: String,
    /// Run labels in input order.
    pub labels: Vec<String>,
    pub rankings: Vec<MetricRanking>,
}

impl CompareReport {
    pub fn ranking(&self, metric: MetricName) -> &MetricRanking {
        self.rankings
            .iter()
            .find(|r| r.metric == metric)
            .expect("every metric is ranked")
    }
}

fn labels(runs: &[Summary]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for r in runs {
        *seen.entry(r.agent.name()).or_default() += 1;
    }
    runs.iter()
        .map(|r| {
            if seen[r.agent.name()] > 1 {
                format!("{}@seed{}", r.agent.name(), r.seed)
            } else {
                r.agent.name().to_string()
            }
        })
        .collect()
}

/// Ranks runs on the final-episode metrics. Smaller wins except for throughput.
pub fn compare(runs: &[Summary]) -> Result<CompareReport, BenchError> {
    if runs.len() < 2 {
        return Err(BenchError::Validation("compare needs at least two result files".into()));
    }
    let fp = &runs[0].scenario_fingerprint;
    if let Some(other) = runs.iter().find(|r| &r.scenario_fingerprint != fp) {
        return Err(BenchError::Validation(format!(
            "scenario fingerprints differ ({} vs {}): runs are not comparable",
            &fp[..12.min(fp.len())],
            &other.scenario_fingerprint[..12.min(other.scenario_fingerprint.len())]
        )));
    }
    let labels = labels(runs);
    let rankings = MetricName::ALL
        .into_iter()
        .map(|metric| {
            let mut entries: Vec<(String, f64)> = labels
                .iter()
                .cloned()
                .zip(runs.iter().map(|r| r.final_metrics.get(metric)))
                .collect();
            entries.sort_by(|a, b| {
                let ord = a.1.total_cmp(&b.1);
                let ord = if metric.smaller_is_better() { ord } else { ord.reverse() };
                ord.then_with(|| a.0.cmp(&b.0))
            });
            let mut out: Vec<RankEntry> = Vec::with_capacity(entries.len());
            for (label, value) in entries {
                let rank = match out.last() {
                    Some(prev) if prev.value == value => prev.rank,
                    Some(prev) => prev.rank + 1,
                    None => 1,
                };
                out.push(RankEntry {
                    label,
                    value,
                    rank,
                    tied: false,
                });
            }
            for i in 0..out.len() {
                let r = out[i].rank;
                out[i].tied = out.iter().filter(|e| e.rank == r).count() > 1;
            }
            MetricRanking { metric, entries: out }
        })
        .collect();
    Ok(CompareReport {
        scenario_fingerprint: fp.clone(),
        labels,
        rankings,
    })
}

impl fmt::Display for CompareReport {
    /// One row per run, one column per metric; `*` marks the best value,
    /// `+` the second best and `=` a tie.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.labels.iter().map(String::len).max().unwrap_or(5).max(5);
        write!(f, "{:width$}", "agent")?;
        for r in &self.rankings {
            write!(f, "  {:>16}", format!("{}{}", r.metric.name(), if r.metric.smaller_is_better() { "↓" } else { "↑" }))?;
        }
        writeln!(f)?;
        for label in &self.labels {
            write!(f, "{label:width$}")?;
            for r in &self.rankings {
                let e = r.entries.iter().find(|e| &e.label == label).expect("ranked");
                let mark = match (e.is_best(), e.is_second()) {
                    (true, _) => "*",
                    (_, true) => "+",
                    _ => " ",
                };
                let tie = if e.tied { "=" } else { " " };
                let value = if r.metric == MetricName::Throughput {
                    format!("{}", e.value)
                } else {
                    format!("{:.3}", e.value)
                };
                write!(f, "  {value:>13} {mark}{tie}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "scenario {}", self.scenario_fingerprint)
    }
}
