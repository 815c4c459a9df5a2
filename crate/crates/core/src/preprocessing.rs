//! Image-to-series chain: row-major unfolding, z-scoring, cumulative
//! summation, then fixed-length windowing.

use serde::{Deserialize, Serialize};

use crate::error::{HmmError, Result};
use crate::model::ObservationSequence;

/// A 2-D scalar field, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(HmmError::InvalidImage(format!("empty {rows}x{cols} grid")));
        }
        if values.len() != rows * cols {
            return Err(HmmError::InvalidImage(format!(
                "{} values for a {rows}x{cols} grid",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HmmError::InvalidImage(format!(
                "non-finite value at row {}, column {}",
                i / cols,
                i % cols
            )));
        }
        Ok(ImageGrid { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != cols) {
            return Err(HmmError::InvalidImage(format!(
                "row {r} has {} columns, expected {cols}",
                rows[r].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowingConfig {
    pub window_length: usize,
    pub stride: usize,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        WindowingConfig {
            window_length: 1000,
            stride: 1000,
        }
    }
}

impl WindowingConfig {
    /// Non-overlapping windows of `window_length`.
    pub fn non_overlapping(window_length: usize) -> Self {
        WindowingConfig {
            window_length,
            stride: window_length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_length < 2 {
            return Err(HmmError::InvalidConfig("window length must be at least 2".into()));
        }
        if self.stride < 1 {
            return Err(HmmError::InvalidConfig("stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Row-major concatenation: `out[r·cols + c] = image[r][c]`.
pub fn unfold_horizontal(image: &ImageGrid) -> Vec<f64> {
    image.values.clone()
}

/// `(x - mean) / std` with the population (divide-by-N) standard deviation.
pub fn zscore(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(HmmError::SequenceTooShort { len: n, min: 2 });
    }
    if let Some((i, x)) = series.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(HmmError::InvalidObservation(format!(
            "non-finite value {x} at index {i}"
        )));
    }
    let nf = n as f64;
    let mut mean = series.iter().sum::<f64>() / nf;
    // second pass removes the rounding error of the first
    mean += series.iter().map(|x| x - mean).sum::<f64>() / nf;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    let std = var.sqrt();
    if !(std > 0.0 && std.is_finite()) {
        return Err(HmmError::DegenerateVariance);
    }
    Ok(series.iter().map(|x| (x - mean) / std).collect())
}

/// Running sum: `out[t] = Σ_{i≤t} fluct[i]`.
pub fn cumulative_sum(fluct: &[f64]) -> Result<ObservationSequence> {
    if fluct.is_empty() {
        return Err(HmmError::EmptySequence);
    }
    let mut acc = 0.0;
    Ok(ObservationSequence::Continuous(
        fluct
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect(),
    ))
}

/// First differences with the first element kept: inverse of [`cumulative_sum`].
pub fn difference(series: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    series
        .iter()
        .map(|&x| {
            let d = x - prev;
            prev = x;
            d
        })
        .collect()
}

/// z-score followed by cumulative sum.
pub fn fluctuation_profile(series: &[f64]) -> Result<ObservationSequence> {
    cumulative_sum(&zscore(series)?)
}

/// Windows at offsets `0, stride, 2·stride, …`; a trailing remainder shorter
/// than the window is dropped.
pub fn window(series: &ObservationSequence, config: &WindowingConfig) -> Result<Vec<ObservationSequence>> {
    config.validate()?;
    let len = series.len();
    if config.window_length > len {
        return Err(HmmError::WindowTooLong {
            window: config.window_length,
            len,
        });
    }
    Ok((0..=len - config.window_length)
        .step_by(config.stride)
        .map(|start| series.slice(start, config.window_length))
        .collect())
}

/// unfold → zscore (once, over the whole image) → cumulative sum → window.
pub fn preprocess(image: &ImageGrid, config: &WindowingConfig) -> Result<Vec<ObservationSequence>> {
    config.validate()?;
    let profile = fluctuation_profile(&unfold_horizontal(image))?;
    window(&profile, config)
}
