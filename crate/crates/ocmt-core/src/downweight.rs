//! Exponential down-weighting of observations. The most recent observation
//! keeps weight one; older observations are scaled by λ^(T−t). Selection and
//! estimation procedures receive the weighted observations wholesale, so
//! weighting happens before any projection.

use ndarray::Array2;
use thiserror::Error;

use crate::data::TimeSeriesDataset;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("down-weighting coefficient must lie in (0, 1], got {lambda}")]
    InvalidLambda { lambda: f64 },
    #[error("weight grid must be non-empty")]
    EmptyGrid,
    #[error("weight grid entry {value} outside (0, 1]")]
    GridEntryOutOfRange { value: f64 },
}

/// The named λ grids plus an escape hatch for user-supplied ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridLabel {
    None,
    Light,
    Heavy,
    Custom,
}

impl std::fmt::Display for GridLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GridLabel::None => "none",
            GridLabel::Light => "light",
            GridLabel::Heavy => "heavy",
            GridLabel::Custom => "custom",
        })
    }
}

/// An ascending grid of down-weighting coefficients in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    pub grid: Vec<f64>,
    pub label: GridLabel,
}

impl WeightScheme {
    /// Validate and sort a user-supplied grid. A grid equal to {1} is the
    /// no-weighting scheme regardless of how it was supplied.
    pub fn custom(mut grid: Vec<f64>) -> Result<Self, WeightError> {
        if grid.is_empty() {
            return Err(WeightError::EmptyGrid);
        }
        for &v in &grid {
            if !(v > 0.0 && v <= 1.0) {
                return Err(WeightError::GridEntryOutOfRange { value: v });
            }
        }
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        let label = if grid == [1.0] {
            GridLabel::None
        } else {
            GridLabel::Custom
        };
        Ok(Self { grid, label })
    }
}

/// The grids used throughout the simulation study.
pub fn standard_grid(label: GridLabel) -> WeightScheme {
    let grid = match label {
        GridLabel::Light => vec![0.975, 0.98, 0.985, 0.99, 0.995, 1.0],
        GridLabel::Heavy => vec![0.95, 0.96, 0.97, 0.98, 0.99, 1.0],
        GridLabel::None => vec![1.0],
        GridLabel::Custom => panic!("custom grids come from WeightScheme::custom"),
    };
    WeightScheme { grid, label }
}

/// A dataset together with its exponentially down-weighted copy.
#[derive(Debug, Clone)]
pub struct WeightedDataset {
    pub base: TimeSeriesDataset,
    pub lambda: f64,
    pub wy: ndarray::Array1<f64>,
    pub wx: Array2<f64>,
    pub wz: Array2<f64>,
}

impl WeightedDataset {
    /// Repackage the weighted observations as a dataset so selectors can run
    /// on them unchanged.
    pub fn as_dataset(&self) -> TimeSeriesDataset {
        let mut ds = self.base.clone();
        ds.y = self.wy.clone();
        ds.x = self.wx.clone();
        ds.z = self.wz.clone();
        ds
    }
}

/// Scale observation t (1-based) by λ^(T−t); the final observation is
/// unscaled.
pub fn apply_weights(
    data: &TimeSeriesDataset,
    lambda: f64,
) -> Result<WeightedDataset, WeightError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(WeightError::InvalidLambda { lambda });
    }
    let t_len = data.t_len();
    let weight = |t: usize| lambda.powi((t_len - 1 - t) as i32);
    let mut wy = data.y.clone();
    let mut wx = data.x.clone();
    let mut wz = data.z.clone();
    for t in 0..t_len {
        let w = weight(t);
        wy[t] *= w;
        for j in 0..wx.ncols() {
            wx[[t, j]] *= w;
        }
        for j in 0..wz.ncols() {
            wz[[t, j]] *= w;
        }
    }
    Ok(WeightedDataset {
        base: data.clone(),
        lambda,
        wy,
        wx,
        wz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};

    fn toy(t: usize) -> TimeSeriesDataset {
        let y = Array1::from_iter((0..t).map(|i| 1.0 + i as f64));
        let x = Array2::from_shape_fn((t, 2), |(i, j)| (i + 1) as f64 * (j + 1) as f64);
        TimeSeriesDataset::with_intercept_only(y, x, "y", vec!["x1".into(), "x2".into()])
            .unwrap()
    }

    #[test]
    fn lambda_one_is_identity() {
        let ds = toy(5);
        let w = apply_weights(&ds, 1.0).unwrap();
        assert_eq!(w.wy, ds.y);
        assert_eq!(w.wx, ds.x);
        assert_eq!(w.wz, ds.z);
    }

    #[test]
    fn half_weights_match_direct_powers() {
        let ds = TimeSeriesDataset::with_intercept_only(
            array![1.0, 1.0, 1.0],
            array![[1.0], [1.0], [1.0]],
            "y",
            vec!["x1".into()],
        )
        .unwrap();
        let w = apply_weights(&ds, 0.5).unwrap();
        assert_eq!(w.wy.to_vec(), vec![0.25, 0.5, 1.0]);
    }

    #[test]
    fn oldest_observation_gets_highest_power() {
        let ds = toy(120);
        let w = apply_weights(&ds, 0.975).unwrap();
        let want = 0.975_f64.powi(119);
        assert!((w.wy[0] / ds.y[0] - want).abs() < 1e-15);
        assert_eq!(w.wy[119], ds.y[119]);
    }

    #[test]
    fn rejects_out_of_range_lambda() {
        let ds = toy(4);
        for lambda in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(apply_weights(&ds, lambda).is_err(), "lambda={lambda}");
        }
    }

    #[test]
    fn named_grids_match_published_values() {
        assert_eq!(
            standard_grid(GridLabel::Light).grid,
            vec![0.975, 0.98, 0.985, 0.99, 0.995, 1.0]
        );
        assert_eq!(
            standard_grid(GridLabel::Heavy).grid,
            vec![0.95, 0.96, 0.97, 0.98, 0.99, 1.0]
        );
        assert_eq!(standard_grid(GridLabel::None).grid, vec![1.0]);
    }

    #[test]
    fn custom_grid_is_sorted_and_validated() {
        let s = WeightScheme::custom(vec![1.0, 0.9, 0.95]).unwrap();
        assert_eq!(s.grid, vec![0.9, 0.95, 1.0]);
        assert_eq!(s.label, GridLabel::Custom);
        assert!(WeightScheme::custom(vec![]).is_err());
        assert!(WeightScheme::custom(vec![0.5, 1.2]).is_err());
        assert!(WeightScheme::custom(vec![0.0]).is_err());
    }

    #[test]
    fn custom_unit_grid_normalizes_to_none() {
        let s = WeightScheme::custom(vec![1.0, 1.0]).unwrap();
        assert_eq!(s.grid, vec![1.0]);
        assert_eq!(s.label, GridLabel::None);
    }

    #[test]
    fn as_dataset_carries_weighted_columns() {
        let ds = toy(6);
        let w = apply_weights(&ds, 0.9).unwrap();
        let wd = w.as_dataset();
        assert_eq!(wd.y, w.wy);
        assert_eq!(wd.x, w.wx);
        assert_eq!(wd.z, w.wz);
        assert_eq!(wd.x_names, ds.x_names);
    }
}
