use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Count table with samples as rows and OTUs as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtuTable {
    counts: Vec<Vec<u64>>,
    sample_ids: Vec<String>,
    otu_ids: Vec<String>,
    labels: Option<Vec<String>>,
    groups: Option<Vec<String>>,
    totals: Vec<u64>,
}

/// How to read a delimited table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableFormat {
    /// Field separator; sniffed from the header line when `None`.
    pub delimiter: Option<u8>,
    /// Name of the column holding class labels.
    pub label_column: Option<String>,
    /// Name of the column holding group ids (e.g. a patient id for paired samples).
    pub group_column: Option<String>,
}

impl TableFormat {
    pub fn with_labels(column: impl Into<String>) -> Self {
        Self {
            label_column: Some(column.into()),
            ..Self::default()
        }
    }
}

impl OtuTable {
    pub fn new(
        counts: Vec<Vec<u64>>,
        sample_ids: Vec<String>,
        otu_ids: Vec<String>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if counts.len() != sample_ids.len() {
            return Err(Error::Misaligned {
                expected: sample_ids.len(),
                found: counts.len(),
            });
        }
        for row in &counts {
            if row.len() != otu_ids.len() {
                return Err(Error::Misaligned {
                    expected: otu_ids.len(),
                    found: row.len(),
                });
            }
        }
        if let Some(l) = &labels {
            if l.len() != sample_ids.len() {
                return Err(Error::Misaligned {
                    expected: sample_ids.len(),
                    found: l.len(),
                });
            }
        }
        let mut seen = HashSet::new();
        for (i, id) in sample_ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateSample {
                    line: i + 2,
                    id: id.clone(),
                });
            }
        }
        let totals = counts.iter().map(|r| r.iter().sum()).collect();
        Ok(Self {
            counts,
            sample_ids,
            otu_ids,
            labels,
            groups: None,
            totals,
        })
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        if groups.len() != self.n_samples() {
            return Err(Error::Misaligned {
                expected: self.n_samples(),
                found: groups.len(),
            });
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_otus(&self) -> usize {
        self.otu_ids.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn count(&self, sample: usize, otu: usize) -> u64 {
        self.counts[sample][otu]
    }

    /// One OTU's counts across samples.
    pub fn column(&self, otu: usize) -> Vec<u64> {
        self.counts.iter().map(|r| r[otu]).collect()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn otu_ids(&self) -> &[String] {
        &self.otu_ids
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    /// Per-sample read totals `Nᵢ`.
    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    /// `nᵢⱼ / Nᵢ`; rows with a zero total map to zeros.
    pub fn relative_abundance<T: Scalar>(&self) -> Vec<Vec<T>> {
        self.counts
            .iter()
            .zip(&self.totals)
            .map(|(row, &total)| {
                if total == 0 {
                    vec![T::zero(); row.len()]
                } else {
                    let n = T::lit(total as f64);
                    row.iter().map(|&c| T::lit(c as f64) / n).collect()
                }
            })
            .collect()
    }

    /// Sub-table with the given sample rows, in the given order.
    pub fn select_samples(&self, rows: &[usize]) -> OtuTable {
        let pick = |v: &Vec<String>| rows.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        OtuTable {
            counts: rows.iter().map(|&i| self.counts[i].clone()).collect(),
            sample_ids: pick(&self.sample_ids),
            otu_ids: self.otu_ids.clone(),
            labels: self.labels.as_ref().map(pick),
            groups: self.groups.as_ref().map(pick),
            totals: rows.iter().map(|&i| self.totals[i]).collect(),
        }
    }

    /// Sub-table with the given OTU columns. Totals are kept as read depth
    /// of the original table unless `recompute_totals` is set.
    pub fn select_otus(&self, cols: &[usize], recompute_totals: bool) -> OtuTable {
        let counts: Vec<Vec<u64>> = self
            .counts
            .iter()
            .map(|r| cols.iter().map(|&j| r[j]).collect())
            .collect();
        let totals = if recompute_totals {
            counts.iter().map(|r: &Vec<u64>| r.iter().sum()).collect()
        } else {
            self.totals.clone()
        };
        OtuTable {
            counts,
            sample_ids: self.sample_ids.clone(),
            otu_ids: cols.iter().map(|&j| self.otu_ids[j].clone()).collect(),
            labels: self.labels.clone(),
            groups: self.groups.clone(),
            totals,
        }
    }

    /// Writes the table in the same layout [`load_table`] reads.
    pub fn write_delimited<W: Write>(
        &self,
        out: W,
        delimiter: u8,
        label_column: &str,
    ) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(out);
        let mut header = vec!["sample_id".to_string()];
        header.extend(self.otu_ids.iter().cloned());
        if self.labels.is_some() {
            header.push(label_column.to_string());
        }
        w.write_record(&header)?;
        for (i, row) in self.counts.iter().enumerate() {
            let mut rec = vec![self.sample_ids[i].clone()];
            rec.extend(row.iter().map(u64::to_string));
            if let Some(l) = &self.labels {
                rec.push(l[i].clone());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sniff_delimiter(first_line: &str) -> u8 {
    if first_line.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn parse_count(raw: &str, line: usize, column: usize) -> Result<u64> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let bad = || Error::NonIntegerCount {
        line,
        column,
        value: s.to_string(),
    };
    match s.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(Error::NegativeCount {
            line,
            column,
            value: s.to_string(),
        }),
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        _ => Err(bad()),
    }
}

/// Reads a delimited OTU table: first column sample ids, one column per OTU,
/// optional label and group columns named by `format`.
pub fn load_table<R: Read>(source: R, format: &TableFormat) -> Result<OtuTable> {
    let mut buf = BufReader::new(source);
    let mut first = String::new();
    buf.read_line(&mut first)?;
    if first.trim().is_empty() {
        return Err(Error::EmptyTable);
    }
    let delimiter = format.delimiter.unwrap_or_else(|| sniff_delimiter(&first));
    let chained = first.as_bytes().chain(buf);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(chained);

    let mut records = reader.records();
    let header = records.next().ok_or(Error::EmptyTable)??;
    let width = header.len();
    if width < 2 {
        return Err(Error::Malformed(
            "header needs a sample id column and at least one OTU".into(),
        ));
    }
    let find = |name: &Option<String>| -> Result<Option<usize>> {
        match name {
            None => Ok(None),
            Some(n) => header
                .iter()
                .position(|h| h == n)
                .map(Some)
                .ok_or_else(|| Error::Malformed(format!("column `{n}` not found in header"))),
        }
    };
    let label_col = find(&format.label_column)?;
    let group_col = find(&format.group_column)?;
    let otu_cols: Vec<usize> = (1..width)
        .filter(|&c| Some(c) != label_col && Some(c) != group_col)
        .collect();
    if otu_cols.is_empty() {
        return Err(Error::Malformed("no OTU columns".into()));
    }
    let otu_ids: Vec<String> = otu_cols.iter().map(|&c| header[c].to_string()).collect();

    let mut counts = Vec::new();
    let mut sample_ids = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut seen = HashSet::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(Error::RaggedRow {
                line,
                expected: width,
                found: rec.len(),
            });
        }
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateSample { line, id });
        }
        let row = otu_cols
            .iter()
            .map(|&c| parse_count(&rec[c], line, c + 1))
            .collect::<Result<Vec<_>>>()?;
        counts.push(row);
        sample_ids.push(id);
        if let Some(c) = label_col {
            labels.push(rec[c].to_string());
        }
        if let Some(c) = group_col {
            groups.push(rec[c].to_string());
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyTable);
    }
    let table = OtuTable::new(counts, sample_ids, otu_ids, label_col.map(|_| labels))?;
    if group_col.is_some() {
        table.with_groups(groups)
    } else {
        Ok(table)
    }
}

/// Drops shallow samples, then rare OTUs, until neither rule removes anything.
///
/// Each pass removes samples with `Nᵢ < min_reads`, then OTUs whose mean
/// relative abundance over the remaining samples is below
/// `min_mean_rel_abundance`; totals are recomputed from the surviving OTUs.
pub fn filter_table(
    table: &OtuTable,
    min_reads: u64,
    min_mean_rel_abundance: f64,
) -> Result<OtuTable> {
    if min_mean_rel_abundance.is_nan() || min_mean_rel_abundance < 0.0 {
        return Err(Error::InvalidConfig(
            "min_mean_rel_abundance must be >= 0".into(),
        ));
    }
    let mut current = table.clone();
    loop {
        let keep_rows: Vec<usize> = (0..current.n_samples())
            .filter(|&i| current.totals[i] >= min_reads)
            .collect();
        if keep_rows.is_empty() {
            return Err(Error::EmptyResult("samples pass the filter"));
        }
        let after_rows = current.select_samples(&keep_rows);
        let rel = after_rows.relative_abundance::<f64>();
        let n = after_rows.n_samples() as f64;
        let keep_cols: Vec<usize> = (0..after_rows.n_otus())
            .filter(|&j| rel.iter().map(|r| r[j]).sum::<f64>() / n >= min_mean_rel_abundance)
            .collect();
        if keep_cols.is_empty() {
            return Err(Error::EmptyResult("OTUs pass the filter"));
        }
        let next = after_rows.select_otus(&keep_cols, true);
        if next.n_samples() == current.n_samples() && next.n_otus() == current.n_otus() {
            return Ok(next);
        }
        current = next;
    }
}
