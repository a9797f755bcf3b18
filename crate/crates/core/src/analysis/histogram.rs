use serde::Serialize;

use crate::error::{Error, Result};

const SCALE_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

fn bin_count(width: f64) -> usize {
    ((SCALE_MAX / width) - 1e-9).ceil().max(1.0) as usize
}

/// Bins normalized choices into `[k*w, (k+1)*w)`; the last bin is closed
/// at 100. Values outside `[0, 100]` land in the nearest edge bin.
pub fn choice_histogram(values: &[f64], width: f64) -> Result<Vec<Bin>> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::invalid(format!(
            "bin width must be positive, got {width}"
        )));
    }
    let n = bin_count(width);
    let edge = |k: usize| if k >= n { SCALE_MAX } else { k as f64 * width };
    let mut bins: Vec<Bin> = (0..n)
        .map(|k| Bin {
            lo: edge(k),
            hi: edge(k + 1),
            count: 0,
        })
        .collect();
    for &v in values {
        let mut k = ((v / width).floor().max(0.0) as usize).min(n - 1);
        // keep the index consistent with the stored edges under rounding
        while k > 0 && v < bins[k].lo {
            k -= 1;
        }
        while k + 1 < n && v >= bins[k].hi {
            k += 1;
        }
        bins[k].count += 1;
    }
    Ok(bins)
}
