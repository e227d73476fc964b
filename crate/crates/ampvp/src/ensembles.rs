//! Variance profiles and the Gaussian matrix models built on them.
//!
//! Symmetric model: `A = V ∘ G` with `G_ij ~ N(0, 1/n)` drawn for `i <= j` and
//! mirrored. The diagonal has the same variance `1/n` as the off-diagonal
//! entries (no GOE doubling).
//!
//! Rectangular model: `A = V ∘ G` with `G_ij ~ N(0, 1/m)`, all entries independent.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{AmpError, Result};
use crate::rng::{purpose, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Symmetric,
    Rectangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VarianceProfile<T: Scalar> {
    values: Array2<T>,
    kind: ProfileKind,
    bound: T,
}

impl<T: Scalar> VarianceProfile<T> {
    pub fn new(values: Array2<T>, kind: ProfileKind) -> Result<Self> {
        if values.is_empty() {
            return Err(AmpError::InvalidProfile("empty profile".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < T::zero()) {
            return Err(AmpError::InvalidProfile(format!("entry {v} is negative or not finite")));
        }
        if kind == ProfileKind::Symmetric {
            let n = values.nrows();
            if values.ncols() != n {
                return Err(AmpError::Shape(format!("symmetric profile must be square, got {}x{}", n, values.ncols())));
            }
            for i in 0..n {
                for j in i + 1..n {
                    if values[[i, j]] != values[[j, i]] {
                        return Err(AmpError::InvalidProfile(format!("V[{i},{j}] != V[{j},{i}]")));
                    }
                }
            }
        }
        let max = values.iter().fold(T::zero(), |m, &v| m.max(v));
        Ok(Self { values, kind, bound: max.max(T::of(2.0)) })
    }

    pub fn constant(rows: usize, cols: usize, value: T, kind: ProfileKind) -> Result<Self> {
        Self::new(Array2::from_elem((rows, cols), value), kind)
    }

    /// Entries `|N(mean, sd²)|`, mirrored from the upper triangle when symmetric.
    pub fn iid_abs_gaussian(rows: usize, cols: usize, mean: f64, sd: f64, seed: u64, kind: ProfileKind) -> Result<Self> {
        let mut rng = stream(seed, purpose::PROFILE, 0);
        let mut values = Array2::zeros((rows, cols));
        match kind {
            ProfileKind::Rectangular => {
                for v in values.iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *v = T::of((mean + sd * g).abs());
                }
            }
            ProfileKind::Symmetric => {
                if rows != cols {
                    return Err(AmpError::Shape(format!("symmetric profile must be square, got {rows}x{cols}")));
                }
                for i in 0..rows {
                    for j in i..cols {
                        let g: f64 = rng.sample(StandardNormal);
                        let x = T::of((mean + sd * g).abs());
                        values[[i, j]] = x;
                        values[[j, i]] = x;
                    }
                }
            }
        }
        Self::new(values, kind)
    }

    /// Piecewise-constant profile; `values[a][b]` fills the block of row group `a` and column group `b`.
    pub fn block(row_sizes: &[usize], col_sizes: &[usize], values: &[Vec<T>], kind: ProfileKind) -> Result<Self> {
        if values.len() != row_sizes.len() || values.iter().any(|r| r.len() != col_sizes.len()) {
            return Err(AmpError::Shape("block values must be row_sizes.len() x col_sizes.len()".into()));
        }
        let m: usize = row_sizes.iter().sum();
        let n: usize = col_sizes.iter().sum();
        let row_group = expand_groups(row_sizes);
        let col_group = expand_groups(col_sizes);
        let out = Array2::from_shape_fn((m, n), |(i, j)| values[row_group[i]][col_group[j]]);
        Self::new(out, kind)
    }

    /// Dense, row-major, header-free CSV.
    pub fn from_csv(path: &Path, kind: ProfileKind) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut rows: Vec<Vec<T>> = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map(T::of)
                        .map_err(|e| AmpError::InvalidProfile(format!("{}:{}: {e}", path.display(), line + 1)))
                })
                .collect::<Result<Vec<T>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(AmpError::Shape(format!("{}:{}: ragged row", path.display(), line + 1)));
                }
            }
            rows.push(row);
        }
        let ncols = rows.first().map_or(0, |r| r.len());
        let flat: Vec<T> = rows.concat();
        let values = Array2::from_shape_vec((flat.len() / ncols.max(1), ncols), flat)
            .map_err(|e| AmpError::Shape(e.to_string()))?;
        Self::new(values, kind)
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// The sup-norm bound `K = max(2, max V)`.
    pub fn bound(&self) -> T {
        self.bound
    }

    /// Entrywise `V² / norm`.
    pub fn squared_over(&self, norm: usize) -> Array2<T> {
        let c = T::one() / T::of_usize(norm);
        self.values.mapv(|v| v * v * c)
    }

    /// Every row and column has positive norm.
    pub fn has_positive_margins(&self) -> bool {
        self.values.rows().into_iter().all(|r| r.iter().any(|v| *v > T::zero()))
            && self.values.columns().into_iter().all(|c| c.iter().any(|v| *v > T::zero()))
    }
}

fn expand_groups(sizes: &[usize]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(g, &s)| std::iter::repeat_n(g, s)).collect()
}

/// Profile description used in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum ProfileSpec {
    Constant { rows: usize, cols: usize, value: f64 },
    IidAbsGaussian { rows: usize, cols: usize, mean: f64, sd: f64, seed: u64 },
    Block { row_sizes: Vec<usize>, col_sizes: Vec<usize>, values: Vec<Vec<f64>> },
    Csv { path: std::path::PathBuf },
}

impl ProfileSpec {
    pub fn build<T: Scalar>(&self, kind: ProfileKind) -> Result<VarianceProfile<T>> {
        match self {
            ProfileSpec::Constant { rows, cols, value } => VarianceProfile::constant(*rows, *cols, T::of(*value), kind),
            ProfileSpec::IidAbsGaussian { rows, cols, mean, sd, seed } => {
                VarianceProfile::iid_abs_gaussian(*rows, *cols, *mean, *sd, *seed, kind)
            }
            ProfileSpec::Block { row_sizes, col_sizes, values } => {
                let vals: Vec<Vec<T>> = values.iter().map(|r| r.iter().map(|&v| T::of(v)).collect()).collect();
                VarianceProfile::block(row_sizes, col_sizes, &vals, kind)
            }
            ProfileSpec::Csv { path } => VarianceProfile::from_csv(path, kind),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixScale {
    SymmetricOneOverN,
    RectangularOneOverM,
}

/// Law of the standardized entries `√m·G_ij` (only the ridge experiments use non-Gaussian entries).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryDistribution {
    #[default]
    Gaussian,
    Rademacher,
    /// Student t with the given degrees of freedom (> 2), rescaled to unit variance.
    StudentT(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SampledMatrix<T: Scalar> {
    pub values: Array2<T>,
    pub scale: MatrixScale,
    pub seed: u64,
}

impl<T: Scalar> SampledMatrix<T> {
    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }
}

pub fn sample_symmetric<T: Scalar>(profile: &VarianceProfile<T>, seed: u64) -> Result<SampledMatrix<T>> {
    if profile.kind() != ProfileKind::Symmetric {
        return Err(AmpError::Shape("sample_symmetric needs a symmetric profile".into()));
    }
    let n = profile.shape().0;
    let sd = 1.0 / (n as f64).sqrt();
    let v = profile.values();
    let mut rng = stream(seed, purpose::MATRIX, 0);
    let mut a = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let g: f64 = rng.sample(StandardNormal);
            let x = v[[i, j]] * T::of(g * sd);
            a[[i, j]] = x;
            a[[j, i]] = x;
        }
    }
    Ok(SampledMatrix { values: a, scale: MatrixScale::SymmetricOneOverN, seed })
}

pub fn sample_rectangular<T: Scalar>(profile: &VarianceProfile<T>, seed: u64) -> Result<SampledMatrix<T>> {
    sample_rectangular_with(profile, seed, EntryDistribution::Gaussian)
}

pub fn sample_rectangular_with<T: Scalar>(
    profile: &VarianceProfile<T>,
    seed: u64,
    dist: EntryDistribution,
) -> Result<SampledMatrix<T>> {
    if profile.kind() != ProfileKind::Rectangular {
        return Err(AmpError::Shape("sample_rectangular needs a rectangular profile".into()));
    }
    let (m, n) = profile.shape();
    let sd = 1.0 / (m as f64).sqrt();
    let mut rng = stream(seed, purpose::MATRIX, 0);
    let v = profile.values();
    let mut a = Array2::<T>::zeros((m, n));
    match dist {
        EntryDistribution::Gaussian => {
            for (x, &vij) in a.iter_mut().zip(v.iter()) {
                let g: f64 = rng.sample(StandardNormal);
                *x = vij * T::of(g * sd);
            }
        }
        EntryDistribution::Rademacher => {
            for (x, &vij) in a.iter_mut().zip(v.iter()) {
                let g = if rng.random::<bool>() { sd } else { -sd };
                *x = vij * T::of(g);
            }
        }
        EntryDistribution::StudentT(dof) => {
            if !(dof > 2.0) {
                return Err(AmpError::InvalidParameter(format!("t degrees of freedom must exceed 2, got {dof}")));
            }
            let t = StudentT::new(dof).map_err(|e| AmpError::InvalidParameter(e.to_string()))?;
            let unit = (dof / (dof - 2.0)).sqrt();
            for (x, &vij) in a.iter_mut().zip(v.iter()) {
                let g: f64 = t.sample(&mut rng);
                *x = vij * T::of(g / unit * sd);
            }
        }
    }
    Ok(SampledMatrix { values: a, scale: MatrixScale::RectangularOneOverM, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskMode {
    RowAndColumn,
    RowOnly,
    ColumnOnly,
}

/// Copy of `a` with the rows and/or columns in `p` set to zero.
pub fn mask_leave_out<T: Scalar>(a: &SampledMatrix<T>, p: &[usize], mode: MaskMode) -> Result<SampledMatrix<T>> {
    let (m, n) = a.dim();
    if mode == MaskMode::RowAndColumn && (a.scale != MatrixScale::SymmetricOneOverN || m != n) {
        return Err(AmpError::Shape("row-and-column masking needs a symmetric matrix".into()));
    }
    let len = if mode == MaskMode::ColumnOnly { n } else { m };
    if let Some(&k) = p.iter().find(|&&k| k >= len) {
        return Err(AmpError::IndexOutOfRange { index: k, len });
    }
    let mut out = a.clone();
    for &k in p {
        if mode != MaskMode::ColumnOnly {
            out.values.row_mut(k).fill(T::zero());
        }
        if mode != MaskMode::RowOnly {
            out.values.column_mut(k).fill(T::zero());
        }
    }
    Ok(out)
}
