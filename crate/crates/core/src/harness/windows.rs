use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::CompensatedSum;
use crate::line_store::{parse_fields_into, ByteAddressedFile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllWindowsMean {
    /// Average of the `K` window means.
    pub mean: f64,
    /// Number of non-wrapping windows, `K = N - n + 1`.
    pub windows: u64,
    pub records: u64,
}

/// Mean over all non-wrapping windows of `n` consecutive records, in one
/// sequential pass. Only the last `n` values are held. `on_window` receives
/// each window mean in order.
pub fn exact_all_windows_mean(
    path: &Path,
    n: usize,
    mut on_window: impl FnMut(f64),
) -> Result<AllWindowsMean> {
    if n == 0 {
        return Err(Error::config("window size must be positive"));
    }
    let mut file = ByteAddressedFile::open(path)?;
    let mut ring: VecDeque<f64> = VecDeque::with_capacity(n);
    // Window sum kept as running additions and subtractions; the
    // compensation keeps drift at rounding level over long files.
    let mut window = CompensatedSum::new();
    let mut total = CompensatedSum::new();
    let mut windows = 0u64;
    let mut fields = Vec::with_capacity(4);
    let summary = file.sequential_scan(|rec| {
        parse_fields_into(&rec.raw, rec.origin_offset, &mut fields)?;
        let x = fields[0];
        if ring.len() == n {
            let old = ring.pop_front().expect("full ring");
            window.add(-old);
        }
        ring.push_back(x);
        window.add(x);
        if ring.len() == n {
            let m = window.value() / n as f64;
            total.add(m);
            windows += 1;
            on_window(m);
        }
        Ok(())
    })?;
    if windows == 0 {
        return Err(Error::config(format!(
            "window size {n} exceeds the {} records of the store",
            summary.records
        )));
    }
    Ok(AllWindowsMean {
        mean: total.value() / windows as f64,
        windows,
        records: summary.records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: &[f64]) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        let s: String = values.iter().map(|v| format!("{v}\n")).collect();
        std::fs::write(f.path(), s).unwrap();
        f
    }

    #[test]
    fn constant_file() {
        let f = store(&[4.5; 20]);
        let r = exact_all_windows_mean(f.path(), 7, |_| {}).unwrap();
        assert_eq!(r.mean, 4.5);
        assert_eq!(r.windows, 14);
    }

    #[test]
    fn small_example() {
        let f = store(&[1.0, 2.0, 3.0, 4.0]);
        let mut seen = Vec::new();
        let r = exact_all_windows_mean(f.path(), 2, |m| seen.push(m)).unwrap();
        assert_eq!(seen, vec![1.5, 2.5, 3.5]);
        assert_eq!(r.mean, 2.5);
        assert!(exact_all_windows_mean(f.path(), 5, |_| {}).is_err());
    }

    #[test]
    fn matches_weight_counting() {
        let values: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 7.0 - 3.0).collect();
        let f = store(&values);
        let n = 13;
        let k = values.len() - n + 1;
        let mut counts = vec![0usize; values.len()];
        for s in 0..k {
            for c in &mut counts[s..s + n] {
                *c += 1;
            }
        }
        let want: f64 = values.iter().zip(&counts).map(|(v, &c)| v * c as f64).sum::<f64>() / (n * k) as f64;
        let got = exact_all_windows_mean(f.path(), n, |_| {}).unwrap().mean;
        assert!((got - want).abs() < 1e-12);
    }
}
