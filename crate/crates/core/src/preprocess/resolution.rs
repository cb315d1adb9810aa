use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, OtuTable, Result, Scalar};

/// Per-sample read depth relative to the average depth, `tᵢ = Nᵢ / N̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ResolutionVector<T> {
    values: Vec<T>,
    reference_depth: f64,
}

impl<T: Scalar> ResolutionVector<T> {
    /// Scales `totals` by their own mean.
    pub fn from_totals(totals: &[u64], sample_ids: Option<&[String]>) -> Result<Self> {
        if totals.is_empty() {
            return Err(Error::EmptyTable);
        }
        if let Some(i) = totals.iter().position(|&n| n == 0) {
            let sample = sample_ids.map_or_else(|| format!("#{i}"), |ids| ids[i].clone());
            return Err(Error::ZeroTotal { sample });
        }
        let mean = totals.iter().map(|&n| n as f64).sum::<f64>() / totals.len() as f64;
        Self::with_reference(totals, mean)
    }

    /// Scales `totals` by an externally fixed average depth (e.g. the
    /// training set's `N̄` when resolving test samples).
    pub fn with_reference(totals: &[u64], reference_depth: f64) -> Result<Self> {
        if !(reference_depth.is_finite() && reference_depth > 0.0) {
            return Err(Error::NonFinite("reference depth"));
        }
        if let Some(i) = totals.iter().position(|&n| n == 0) {
            return Err(Error::ZeroTotal {
                sample: format!("#{i}"),
            });
        }
        Ok(Self {
            values: totals
                .iter()
                .map(|&n| T::lit(n as f64 / reference_depth))
                .collect(),
            reference_depth,
        })
    }

    /// Wraps precomputed resolutions (already on the unit-mean scale).
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|&t| !t.is_finite() || t <= T::zero()) {
            return Err(Error::NonFinite("resolutions must be positive and finite"));
        }
        Ok(Self {
            values,
            reference_depth: f64::NAN,
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `N̄` used for scaling, when built from read totals.
    pub fn reference_depth(&self) -> f64 {
        self.reference_depth
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::from_usize_lossy(self.values.len())
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            values: rows.iter().map(|&i| self.values[i]).collect(),
            reference_depth: self.reference_depth,
        }
    }
}

pub fn compute_resolutions<T: Scalar>(table: &OtuTable) -> Result<ResolutionVector<T>> {
    ResolutionVector::from_totals(table.totals(), Some(table.sample_ids()))
}

/// Writes `sample_id,resolution` rows.
pub fn write_resolutions<W: Write>(
    out: W,
    sample_ids: &[String],
    values: &[f64],
    delimiter: u8,
) -> Result<()> {
    if sample_ids.len() != values.len() {
        return Err(Error::Misaligned {
            expected: sample_ids.len(),
            found: values.len(),
        });
    }
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(out);
    w.write_record(["sample_id", "resolution"])?;
    for (id, v) in sample_ids.iter().zip(values) {
        w.write_record([id.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `sample_id,resolution` file into a lookup table.
pub fn read_resolutions<R: Read>(source: R, delimiter: u8) -> Result<HashMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut map = HashMap::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Malformed(
                "resolution rows need a sample id and a value".into(),
            ));
        }
        let value: f64 = rec[1].parse().map_err(|_| {
            Error::Malformed(format!(
                "resolution `{}` of sample `{}` is not a number",
                &rec[1], &rec[0]
            ))
        })?;
        if map.insert(rec[0].to_string(), value).is_some() {
            return Err(Error::Malformed(format!(
                "sample `{}` has two resolutions",
                &rec[0]
            )));
        }
    }
    Ok(map)
}

impl ResolutionVector<f64> {
    /// Looks up the resolution of every sample of `table`.
    pub fn for_table(lookup: &HashMap<String, f64>, table: &OtuTable) -> Result<Self> {
        let values = table
            .sample_ids()
            .iter()
            .map(|id| {
                lookup
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Malformed(format!("no resolution for sample `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        let t = ResolutionVector::<f64>::from_totals(&[100, 300], None).unwrap();
        assert_eq!(t.values(), &[0.5, 1.5]);
        let t = ResolutionVector::<f64>::from_totals(&[200, 200, 800], None).unwrap();
        assert_eq!(t.values(), &[0.5, 0.5, 2.0]);
        let t = ResolutionVector::<f64>::from_totals(&[7, 7, 7], None).unwrap();
        assert_eq!(t.values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_total_names_sample() {
        let ids = vec!["a".to_string(), "b".to_string()];
        match ResolutionVector::<f64>::from_totals(&[5, 0], Some(&ids)) {
            Err(Error::ZeroTotal { sample }) => assert_eq!(sample, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resolution_file_round_trip() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        write_resolutions(&mut buf, &ids, &[0.75, 1.0 / 3.0], b',').unwrap();
        let map = read_resolutions(buf.as_slice(), b',').unwrap();
        assert_eq!(map["a"], 0.75);
        assert_eq!(map["b"], 1.0 / 3.0);
        let table = OtuTable::new(
            vec![vec![1], vec![2]],
            vec!["b".into(), "a".into()],
            vec!["o".into()],
            None,
        )
        .unwrap();
        assert_eq!(
            ResolutionVector::for_table(&map, &table).unwrap().values(),
            &[1.0 / 3.0, 0.75]
        );
        let other = OtuTable::new(vec![vec![1]], vec!["c".into()], vec!["o".into()], None).unwrap();
        assert!(ResolutionVector::for_table(&map, &other).is_err());
        assert!(read_resolutions("sample_id,resolution\na,x\n".as_bytes(), b',').is_err());
    }

    proptest! {
        #[test]
        fn mean_is_one(totals in prop::collection::vec(1u64..1_000_000, 1..200)) {
            let t = ResolutionVector::<f64>::from_totals(&totals, None).unwrap();
            prop_assert!((t.mean() - 1.0).abs() < 1e-12);
            prop_assert!(t.values().iter().all(|&v| v > 0.0));
        }
    }
}
