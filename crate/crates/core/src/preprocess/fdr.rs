use crate::{Error, Result};

/// Benjamini-Hochberg step-up q-values, returned in input order.
pub fn benjamini_hochberg(p_values: &[f64]) -> Result<Vec<f64>> {
    for (index, &value) in p_values.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidPValue { index, value });
        }
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank0, &i) in order.iter().enumerate().rev() {
        let adj = p_values[i] * m as f64 / (rank0 + 1) as f64;
        running = running.min(adj).min(1.0);
        q[i] = running;
    }
    Ok(q)
}
