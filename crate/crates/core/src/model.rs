//! Covariance speaker models, the arithmetic-harmonic sphericity measure,
//! likelihood mapping and cohort normalization.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const LIKELIHOOD_SCALE: f64 = 2.0;
pub const COHORT_SIZE: usize = 5;
/// Relative ridge, as a fraction of the mean eigenvalue `trace / D`.
pub const RIDGE_EPS: f64 = 1e-8;

/// A symmetric positive-definite matrix with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    /// `name` labels the matrix in the error when factorization fails.
    pub fn new(matrix: DMatrix<f64>, name: &str) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::NotPositiveDefinite(format!(
                "{name} ({}x{}, not square)",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite(format!("{name} (non-finite entries)")));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let chol = Cholesky::new(sym.clone())
            .ok_or_else(|| Error::NotPositiveDefinite(name.to_string()))?;
        Ok(Self { matrix: sym, chol })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `tr(self^-1 * other)` via the Cholesky factor.
    pub fn trace_solve(&self, other: &DMatrix<f64>) -> f64 {
        self.chol.solve(other).trace()
    }
}

/// Population covariance `(1/N) sum (f_i - mean)(f_i - mean)^T`.
pub fn covariance(f: &FeatureMatrix) -> DMatrix<f64> {
    let x = f.matrix();
    let n = x.nrows() as f64;
    let means = f.column_means();
    let mut centered = x.clone();
    for (mut col, m) in centered.column_iter_mut().zip(&means) {
        col.add_scalar_mut(-m);
    }
    let mut c = centered.transpose() * &centered;
    c /= n;
    c
}

#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub spd: SpdMatrix,
    pub regularized: bool,
    pub n_frames: usize,
}

/// Covariance with a ridge of `RIDGE_EPS * trace / D` added when the smallest
/// eigenvalue falls below that level.
pub fn estimate_covariance(f: &FeatureMatrix, name: &str) -> Result<CovarianceEstimate> {
    if f.frames() < 2 {
        return Err(Error::TooFewFrames(f.frames()));
    }
    let mut c = covariance(f);
    let d = c.nrows();
    let trace = c.trace();
    if trace.is_nan() || trace <= 0.0 {
        return Err(Error::DegenerateModel);
    }
    let ridge = RIDGE_EPS * trace / d as f64;
    let min_eig = SymmetricEigen::new(c.clone()).eigenvalues.min();
    let regularized = min_eig < ridge;
    if regularized {
        for i in 0..d {
            c[(i, i)] += ridge;
        }
    }
    Ok(CovarianceEstimate {
        spd: SpdMatrix::new(c, name)?,
        regularized,
        n_frames: f.frames(),
    })
}

#[derive(Debug, Clone)]
pub struct SpeakerModel {
    pub speaker_id: String,
    pub chain_id: String,
    pub n_frames: usize,
    pub regularized: bool,
    covariance: SpdMatrix,
}

impl SpeakerModel {
    pub fn new(
        speaker_id: impl Into<String>,
        chain_id: impl Into<String>,
        covariance: SpdMatrix,
        n_frames: usize,
        regularized: bool,
    ) -> Self {
        Self {
            speaker_id: speaker_id.into(),
            chain_id: chain_id.into(),
            n_frames,
            regularized,
            covariance,
        }
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn covariance(&self) -> &SpdMatrix {
        &self.covariance
    }

    pub fn distance(&self, test: &SpdMatrix) -> Result<f64> {
        sphericity_distance(&self.covariance, test)
    }
}

pub fn train_covariance(f: &FeatureMatrix, speaker_id: &str) -> Result<SpeakerModel> {
    let est = estimate_covariance(f, &format!("model covariance of {speaker_id}"))?;
    Ok(SpeakerModel::new(
        speaker_id,
        f.chain_id(),
        est.spd,
        est.n_frames,
        est.regularized,
    ))
}

/// Arithmetic-harmonic sphericity measure
/// `log(tr(T M^-1) tr(M T^-1)) - 2 log D`.
///
/// Zero exactly when the matrices are proportional; clamped at zero against
/// rounding.
pub fn sphericity_distance(model: &SpdMatrix, test: &SpdMatrix) -> Result<f64> {
    if model.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: test.dim(),
        });
    }
    let d = model.dim() as f64;
    let a = model.trace_solve(test.matrix());
    let b = test.trace_solve(model.matrix());
    Ok(((a * b).ln() - 2.0 * d.ln()).max(0.0))
}

/// `exp(-a d)`.
pub fn likelihood(distance: f64, a: f64) -> f64 {
    (-a * distance).exp()
}

/// Claimed-speaker likelihood minus the best cohort likelihood. An empty
/// cohort leaves the score unchanged.
pub fn normalize_score(likelihood: f64, cohort: &[f64]) -> f64 {
    match cohort.iter().copied().reduce(f64::max) {
        Some(best) => likelihood - best,
        None => likelihood,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortSet {
    pub speaker_id: String,
    pub cohort_ids: Vec<String>,
}

/// Picks, for every speaker with a selection sentence, the `k` other models
/// that score highest on that sentence. Ties go to the lower speaker id.
pub fn select_cohorts(
    models: &BTreeMap<String, SpeakerModel>,
    selection: &BTreeMap<String, SpdMatrix>,
    k: usize,
    a: f64,
) -> Result<BTreeMap<String, CohortSet>> {
    let mut out = BTreeMap::new();
    for (speaker, sentence) in selection {
        let mut scored: Vec<(f64, &String)> = models
            .iter()
            .filter(|(id, _)| *id != speaker)
            .map(|(id, m)| Ok((likelihood(m.distance(sentence)?, a), id)))
            .collect::<Result<_>>()?;
        if scored.len() < k {
            log::warn!(
                "speaker {speaker}: only {} other models available for a cohort of {k}",
                scored.len()
            );
        }
        scored.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(y.1)));
        out.insert(
            speaker.clone(),
            CohortSet {
                speaker_id: speaker.clone(),
                cohort_ids: scored.into_iter().take(k).map(|(_, id)| id.clone()).collect(),
            },
        );
    }
    Ok(out)
}

const MODEL_MAGIC: &[u8; 8] = b"SPKVCOV\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAX_MODEL_DIM: usize = 1024;

/// Serializes a model: magic, version, id, chain, D, frame count,
/// regularized flag, then the upper triangle row-major as f64 LE.
pub fn encode_model(model: &SpeakerModel) -> Vec<u8> {
    let d = model.dim();
    let mut out = Vec::with_capacity(64 + d * (d + 1) * 4);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    for s in [&model.speaker_id, &model.chain_id] {
        out.extend_from_slice(&(s.len() as u16).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(model.n_frames as u64).to_le_bytes());
    out.push(u8::from(model.regularized));
    let c = model.covariance.matrix();
    for i in 0..d {
        for j in i..d {
            out.extend_from_slice(&c[(i, j)].to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::ModelFile(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::ModelFile(format!("{what} is not UTF-8")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<SpeakerModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MODEL_MAGIC {
        return Err(Error::ModelFile("bad magic".into()));
    }
    let version = r.u32()?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFile(format!("unsupported format version {version}")));
    }
    let speaker_id = r.string("speaker id")?;
    let chain_id = r.string("chain id")?;
    let d = r.u32()? as usize;
    if d == 0 || d > MAX_MODEL_DIM {
        return Err(Error::ModelFile(format!("dimension {d} out of range")));
    }
    let n_frames = usize::try_from(r.u64()?)
        .map_err(|_| Error::ModelFile("frame count overflows".into()))?;
    let regularized = match r.take(1)?[0] {
        0 => false,
        1 => true,
        other => return Err(Error::ModelFile(format!("bad regularized flag {other}"))),
    };
    let mut c = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::ModelFile(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let spd = SpdMatrix::new(c, &format!("stored covariance of {speaker_id}"))?;
    Ok(SpeakerModel::new(speaker_id, chain_id, spd, n_frames, regularized))
}

pub fn write_model(path: &std::path::Path, model: &SpeakerModel) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &std::path::Path) -> Result<SpeakerModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
