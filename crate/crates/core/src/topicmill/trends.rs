use serde::{Deserialize, Serialize};

use super::{TermWeight, TopicModel};

/// Topic-by-year count matrix with per-year shares and running totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTrends {
    pub years: Vec<i32>,
    pub topics: Vec<i64>,
    pub labels: Vec<String>,
    /// `counts[t][y]`: members of topic `t` published in `years[y]`.
    pub counts: Vec<Vec<u64>>,
    /// Column-normalized counts; all zero for a year with no records.
    pub shares: Vec<Vec<f64>>,
    /// Running total of `counts` along the year axis.
    pub cumulative: Vec<Vec<u64>>,
    pub undated: u64,
    pub out_of_range: u64,
}

/// Builds the matrix over `range` (inclusive), defaulting to the span of dated members.
pub fn trends(model: &TopicModel, range: Option<(i32, i32)>) -> TopicTrends {
    let dated = model.topics.iter().flat_map(|t| t.year_counts.keys().copied());
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            let years: Vec<i32> = dated.collect();
            match (years.iter().min(), years.iter().max()) {
                (Some(&a), Some(&b)) => (a, b),
                _ => (0, -1),
            }
        }
    };
    let years: Vec<i32> = if lo <= hi { (lo..=hi).collect() } else { Vec::new() };
    let mut counts = Vec::with_capacity(model.topics.len());
    let mut out_of_range = 0;
    for topic in &model.topics {
        let row: Vec<u64> = years.iter().map(|y| topic.year_counts.get(y).copied().unwrap_or(0)).collect();
        let dated: u64 = topic.year_counts.values().sum();
        out_of_range += dated - row.iter().sum::<u64>();
        counts.push(row);
    }
    let column_totals: Vec<u64> = (0..years.len()).map(|y| counts.iter().map(|r| r[y]).sum()).collect();
    let shares = counts
        .iter()
        .map(|row| {
            row.iter()
                .zip(&column_totals)
                .map(|(&c, &total)| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                .collect()
        })
        .collect();
    let cumulative = counts
        .iter()
        .map(|row| {
            row.iter()
                .scan(0u64, |acc, &c| {
                    *acc += c;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    TopicTrends {
        years,
        topics: model.topics.iter().map(|t| t.id).collect(),
        labels: model.topics.iter().map(|t| t.label.clone()).collect(),
        counts,
        shares,
        cumulative,
        undated: model.topics.iter().map(|t| t.undated).sum(),
        out_of_range,
    }
}

#[derive(Serialize)]
struct LongRow<'a> {
    topic: i64,
    label: &'a str,
    year: i32,
    count: u64,
    share: f64,
    cumulative: u64,
}

impl TopicTrends {
    pub fn column_totals(&self) -> Vec<u64> {
        (0..self.years.len()).map(|y| self.counts.iter().map(|r| r[y]).sum()).collect()
    }

    /// Heatmap feed: `topic,label,<year>...` with one count row per topic.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["topic".to_string(), "label".to_string()];
        header.extend(self.years.iter().map(i32::to_string));
        w.write_record(&header).expect("in-memory write");
        for (i, row) in self.counts.iter().enumerate() {
            let mut rec = vec![self.topics[i].to_string(), self.labels[i].clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Stacked-area feed: one JSON object per topic and year.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.counts.iter().enumerate() {
            for (y, &count) in row.iter().enumerate() {
                let line = LongRow {
                    topic: self.topics[i],
                    label: &self.labels[i],
                    year: self.years[y],
                    count,
                    share: self.shares[i][y],
                    cumulative: self.cumulative[i][y],
                };
                out.push_str(&serde_json::to_string(&line).expect("plain data"));
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCloudEntry {
    pub topic: i64,
    pub label: String,
    pub terms: Vec<TermWeight>,
}

pub fn word_cloud(model: &TopicModel) -> Vec<WordCloudEntry> {
    model
        .topics
        .iter()
        .map(|t| WordCloudEntry {
            topic: t.id,
            label: t.label.clone(),
            terms: t.terms.clone(),
        })
        .collect()
}
