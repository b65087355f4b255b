//! Cepstral parameterizations applied on top of the per-frame LPC analysis.

mod chain;

pub use chain::{
    Base, Lifter, Normalization, ParamChain, BPL_HALF_GAIN, PF_ALPHA, PF_BETA, STANDARD_CHAINS,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frontend::{lpc_to_cepstrum, FrameLpc};

/// Columns with a standard deviation below this are left unscaled by
/// [`sigma_normalize`].
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Utterance features: one row per frame, one column per coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
    chain_id: String,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>, chain_id: impl Into<String>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "feature matrix must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature matrix has non-finite values".into()));
        }
        Ok(Self {
            data,
            chain_id: chain_id.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], chain_id: impl Into<String>) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidArgument("ragged feature rows".into()));
        }
        let data = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        Self::new(data, chain_id)
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn chain_id(&self) -> &str {
        &self.chain_id
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.frames() as f64;
        self.data.column_iter().map(|c| c.sum() / n).collect()
    }

    /// Population (divisor N) standard deviation of each column.
    pub fn column_std(&self) -> Vec<f64> {
        let n = self.frames() as f64;
        self.data
            .column_iter()
            .map(|c| {
                let m = c.sum() / n;
                (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
            })
            .collect()
    }

    /// Stacks several utterances (same chain and dimension) row-wise.
    pub fn vstack(parts: &[FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to stack".into()))?;
        let dim = first.dim();
        let mut rows = 0;
        for p in parts {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if p.chain_id != first.chain_id {
                return Err(Error::ChainMismatch {
                    model: first.chain_id.clone(),
                    features: p.chain_id.clone(),
                });
            }
            rows += p.frames();
        }
        let mut data = DMatrix::zeros(rows, dim);
        let mut at = 0;
        for p in parts {
            data.rows_mut(at, p.frames()).copy_from(&p.data);
            at += p.frames();
        }
        Ok(FeatureMatrix {
            data,
            chain_id: first.chain_id.clone(),
        })
    }

    fn with_data(&self, data: DMatrix<f64>) -> FeatureMatrix {
        FeatureMatrix {
            data,
            chain_id: self.chain_id.clone(),
        }
    }
}

/// Adaptive component weighted cepstrum: the cepstrum of `N(z) / A(z)`, where
/// `N(z) = sum_{k=0}^{P-1} (P-k) a_k z^-k` gives every pole of `1/A` unit
/// residue. `N` is scaled to a monic polynomial before taking its cepstrum.
pub fn acw_cepstrum(lpc: &FrameLpc, ncep: usize) -> Vec<f64> {
    let p = lpc.order();
    let numerator: Vec<f64> = (1..p)
        .map(|k| (p - k) as f64 * lpc.coeffs[k - 1] / p as f64)
        .collect();
    let c_a = lpc_to_cepstrum(&lpc.coeffs, ncep);
    let c_b = lpc_to_cepstrum(&numerator, ncep);
    c_a.iter().zip(&c_b).map(|(a, b)| a - b).collect()
}

/// Weights cepstral coefficients `c[1..]` by `w(n)`; `first_index` is the
/// cepstral index of `c[0]`.
pub fn lifter(c: &[f64], kind: &Lifter, len: usize, first_index: usize) -> Result<Vec<f64>> {
    if first_index == 0 || first_index + c.len() - 1 > len {
        return Err(Error::InvalidArgument(format!(
            "lifter length {len} does not cover indices {first_index}..{}",
            first_index + c.len().saturating_sub(1)
        )));
    }
    Ok(c.iter()
        .enumerate()
        .map(|(i, v)| v * kind.weight(first_index + i, len))
        .collect())
}

/// Cepstral mean subtraction.
pub fn cms(f: &FeatureMatrix) -> FeatureMatrix {
    let means = f.column_means();
    let mut data = f.data.clone();
    for (mut col, m) in data.column_iter_mut().zip(&means) {
        col.add_scalar_mut(-m);
    }
    f.with_data(data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaNormalized {
    pub features: FeatureMatrix,
    /// Columns whose deviation was below [`SIGMA_FLOOR`] and were left as is.
    pub unscaled_columns: Vec<usize>,
}

/// Divides every column by its population standard deviation. Means are not
/// removed.
pub fn sigma_normalize(f: &FeatureMatrix) -> SigmaNormalized {
    let std = f.column_std();
    let mut data = f.data.clone();
    let mut unscaled = Vec::new();
    for (j, (mut col, s)) in data.column_iter_mut().zip(&std).enumerate() {
        if *s < SIGMA_FLOOR {
            unscaled.push(j);
        } else {
            col.scale_mut(1.0 / s);
        }
    }
    if !unscaled.is_empty() {
        log::warn!("sigma normalization: columns {unscaled:?} have zero deviation, left unscaled");
    }
    SigmaNormalized {
        features: f.with_data(data),
        unscaled_columns: unscaled,
    }
}

/// Removes the first `k` columns.
pub fn drop_coefficients(f: &FeatureMatrix, k: usize) -> Result<FeatureMatrix> {
    if k >= f.dim() {
        return Err(Error::DropTooMany { k, dim: f.dim() });
    }
    Ok(f.with_data(f.data.columns(k, f.dim() - k).into_owned()))
}

/// LPC analysis of one retained frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnalysis {
    pub lpc: FrameLpc,
    pub cepstrum: Vec<f64>,
}

/// Runs a chain over an utterance's frames.
///
/// Stage order is fixed: base cepstrum, coefficient drop, lifter, then the
/// utterance normalizations in the order listed by the chain.
pub fn apply_chain(frames: &[FrameAnalysis], chain: &ParamChain) -> Result<FeatureMatrix> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidArgument("no frames to parameterize".into()))?;
    let order = first.cepstrum.len();
    if chain.drop_first >= order {
        return Err(Error::DropTooMany {
            k: chain.drop_first,
            dim: order,
        });
    }
    let weights: Option<Vec<f64>> = chain
        .lifter
        .map(|l| (chain.drop_first + 1..=order).map(|n| l.weight(n, order)).collect());

    let dim = order - chain.drop_first;
    let mut data = DMatrix::zeros(frames.len(), dim);
    for (i, fa) in frames.iter().enumerate() {
        if fa.cepstrum.len() != order {
            return Err(Error::DimensionMismatch {
                expected: order,
                found: fa.cepstrum.len(),
            });
        }
        let acw;
        let base: &[f64] = match chain.base {
            Base::Lpcc => &fa.cepstrum,
            Base::Acw => {
                acw = acw_cepstrum(&fa.lpc, order);
                &acw
            }
        };
        for (j, v) in base[chain.drop_first..].iter().enumerate() {
            data[(i, j)] = match &weights {
                Some(w) => v * w[j],
                None => *v,
            };
        }
    }
    let mut f = FeatureMatrix::new(data, chain.to_string())?;
    for n in &chain.normalizations {
        f = match n {
            Normalization::Cms => cms(&f),
            Normalization::Sigma => sigma_normalize(&f).features,
        };
    }
    Ok(f)
}
