use serde::{Deserialize, Serialize};

use super::SelectorReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusEntry {
    pub feature: String,
    pub column_index: usize,
    /// Number of reports whose top-K contains the feature.
    pub frequency: usize,
    /// Sum over reports of `top_k - rank` with 0-based rank.
    pub borda: usize,
    pub selectors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusReport {
    pub top_k: usize,
    pub n_reports: usize,
    pub entries: Vec<ConsensusEntry>,
}

impl ConsensusReport {
    pub fn top(&self, k: usize) -> Vec<String> {
        self.entries.iter().take(k).map(|e| e.feature.clone()).collect()
    }

    /// CSV with one row per feature and a 0/1 membership column per selector.
    pub fn to_csv(&self, selectors: &[String]) -> String {
        let mut out = String::from("feature,frequency,borda");
        for s in selectors {
            out.push(',');
            out.push_str(s);
        }
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!("{},{},{}", e.feature, e.frequency, e.borda));
            for s in selectors {
                out.push_str(if e.selectors.contains(s) { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

/// Aggregate the selected prefix of each report's top-K. Features are ordered
/// by frequency, then Borda score, then position in `columns`.
pub fn consensus_rank(reports: &[SelectorReport], columns: &[String], top_k: usize) -> Result<ConsensusReport> {
    if reports.is_empty() {
        return Err(Error::invalid("consensus needs at least one report"));
    }
    let mut freq = vec![0usize; columns.len()];
    let mut borda = vec![0usize; columns.len()];
    let mut members: Vec<Vec<String>> = vec![Vec::new(); columns.len()];
    for rep in reports {
        let take = rep.n_selected.min(top_k).min(rep.ranked_features.len());
        for (rank, (name, _)) in rep.ranked_features[..take].iter().enumerate() {
            let j = columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
            freq[j] += 1;
            borda[j] += top_k - rank;
            members[j].push(rep.selector_name.clone());
        }
    }
    let mut idx: Vec<usize> = (0..columns.len()).filter(|&j| freq[j] > 0).collect();
    idx.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then(borda[b].cmp(&borda[a])).then(a.cmp(&b)));
    Ok(ConsensusReport {
        top_k,
        n_reports: reports.len(),
        entries: idx
            .into_iter()
            .map(|j| ConsensusEntry {
                feature: columns[j].clone(),
                column_index: j,
                frequency: freq[j],
                borda: borda[j],
                selectors: std::mem::take(&mut members[j]),
            })
            .collect(),
    })
}
