use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{benjamini_hochberg, mann_whitney_u, DEFAULT_EXACT_CUTOFF};
use crate::{Error, OtuTable, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenEntry {
    pub otu_id: String,
    pub u: f64,
    pub p_value: f64,
    pub q_value: f64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub entries: Vec<ScreenEntry>,
    pub threshold: f64,
    /// The two labels compared; `U` is reported for the first.
    pub groups: (String, String),
}

impl ScreeningResult {
    pub fn retained_indices(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.retained)
            .map(|(j, _)| j)
            .collect()
    }

    /// `true` when nothing passed the threshold. Callers treat this as a
    /// warning rather than an error.
    pub fn nothing_retained(&self) -> bool {
        !self.entries.iter().any(|e| e.retained)
    }

    pub fn write_report<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(out);
        w.write_record(["otu_id", "U", "p", "q", "retained"])?;
        for e in &self.entries {
            w.write_record([
                e.otu_id.clone(),
                e.u.to_string(),
                e.p_value.to_string(),
                e.q_value.to_string(),
                e.retained.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Two distinct labels of a binary-labelled table, sorted.
pub(crate) fn binary_labels(labels: &[String]) -> Result<(String, String)> {
    let mut distinct: Vec<&String> = labels.iter().collect();
    distinct.sort();
    distinct.dedup();
    match distinct.as_slice() {
        [a, b] => Ok(((*a).clone(), (*b).clone())),
        other => Err(Error::NonBinaryLabels(other.len())),
    }
}

/// Per-OTU rank test on relative abundances between the two classes,
/// Benjamini-Hochberg adjustment, and retention where `q < threshold`.
pub fn screen_otus(table: &OtuTable, threshold: f64) -> Result<ScreeningResult> {
    let labels = table.labels().ok_or(Error::MissingLabels)?;
    let (first, second) = binary_labels(labels)?;
    let rel = table.relative_abundance::<f64>();
    let tests = (0..table.n_otus())
        .into_par_iter()
        .map(|j| {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (row, label) in rel.iter().zip(labels) {
                if *label == first {
                    a.push(row[j]);
                } else {
                    b.push(row[j]);
                }
            }
            mann_whitney_u(&a, &b, DEFAULT_EXACT_CUTOFF)
        })
        .collect::<Result<Vec<_>>>()?;
    let p: Vec<f64> = tests.iter().map(|t| t.p_value).collect();
    let q = benjamini_hochberg(&p)?;
    let entries: Vec<ScreenEntry> = tests
        .iter()
        .zip(&q)
        .zip(table.otu_ids())
        .map(|((t, &q), id)| ScreenEntry {
            otu_id: id.clone(),
            u: t.u,
            p_value: t.p_value,
            q_value: q,
            retained: q < threshold,
        })
        .collect();
    if entries.iter().all(|e| !e.retained) {
        log::warn!("screening at q < {threshold} retained no OTUs");
    }
    Ok(ScreeningResult {
        entries,
        threshold,
        groups: (first, second),
    })
}
