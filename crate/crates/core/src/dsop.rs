//! Dunford-Schwartz operators on sequences indexed by the natural numbers.
//!
//! On the counting measure space an operator is Dunford-Schwartz when it is
//! simultaneously a contraction of `l_1` and of `l_inf`. For a matrix this is
//! the pair of conditions
//!
//! ```text
//! max_r sum_c |t_rc| <= 1     (l_inf -> l_inf norm)
//! max_c sum_r |t_rc| <= 1     (l_1 -> l_1 norm)
//! ```
//!
//! Besides explicit matrices, structural forms (shifts, permutations, convex
//! combinations, powers, compositions) are kept symbolic so they can act at
//! any horizon. Every [`DsOperator`] value is certified on construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seqcore::TruncatedSequence;
use crate::sparse::{MatrixError, SparseMatrix};

/// Slack used when certifying matrices produced by floating point arithmetic
/// on already certified operators (products, flattening, deserialization).
pub const ARITHMETIC_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DsError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("not a Dunford-Schwartz contraction: {failing} (row norm {row_norm}, column norm {col_norm})")]
    NotContraction { row_norm: f64, col_norm: f64, failing: &'static str },
    #[error("modulus is not available for {0} operators; flatten with to_matrix first")]
    UnsupportedForm(&'static str),
    #[error("input support {support} (tail {tail}) is incompatible with operator domain 1..{dim}")]
    IncompatibleSupport { support: usize, dim: usize, tail: String },
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftDirection {
    /// `(Tx)_s = x_{s+1}`.
    Left,
    /// `(Tx)_1 = 0`, `(Tx)_s = x_{s-1}`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignMode {
    Nonnegative,
    Signed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DsForm {
    Matrix(SparseMatrix),
    Shift(ShiftDirection),
    /// `(Tx)_i = x_{map[i]}` on `1..map.len()` (stored 0-based); fixes every
    /// coordinate past the map.
    Permutation(Vec<usize>),
    ConvexCombination { weights: Vec<f64>, parts: Vec<DsOperator> },
    Power { base: Box<DsOperator>, exponent: u32 },
    /// `parts[0] ∘ parts[1] ∘ ...`: the last part acts first.
    Compose(Vec<DsOperator>),
}

/// Operator norm bounds recorded at certification time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Max absolute row sum (or an upper bound for structural forms).
    pub row_norm: f64,
    /// Max absolute column sum (or an upper bound for structural forms).
    pub col_norm: f64,
    #[serde(default = "yes")]
    pub certified: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsOperator {
    form: DsForm,
    cert: Certificate,
}

/// Accepts `matrix` iff both its `l_1` and `l_inf` operator norms are at most
/// `1 + tolerance`.
pub fn certify_ds(matrix: SparseMatrix, tolerance: f64) -> Result<DsOperator, DsError> {
    let row_norm = matrix.max_abs_row_sum();
    let col_norm = matrix.max_abs_col_sum();
    let limit = 1.0 + tolerance.max(0.0);
    let failing = match (row_norm <= limit, col_norm <= limit) {
        (true, true) => None,
        (false, true) => Some("max absolute row sum exceeds 1"),
        (true, false) => Some("max absolute column sum exceeds 1"),
        (false, false) => Some("max absolute row and column sums exceed 1"),
    };
    match failing {
        Some(failing) => Err(DsError::NotContraction { row_norm, col_norm, failing }),
        None => Ok(DsOperator {
            form: DsForm::Matrix(matrix),
            cert: Certificate { row_norm, col_norm, certified: true },
        }),
    }
}

impl DsOperator {
    pub fn identity(dim: usize) -> Self {
        Self::permutation_zero_based((0..dim).collect()).expect("identity is a permutation")
    }

    pub fn shift(direction: ShiftDirection) -> Self {
        Self { form: DsForm::Shift(direction), cert: unit_cert() }
    }

    pub fn shift_left() -> Self {
        Self::shift(ShiftDirection::Left)
    }

    pub fn shift_right() -> Self {
        Self::shift(ShiftDirection::Right)
    }

    /// Permutation from a 1-based image list: `(Tx)_i = x_{images[i-1]}`.
    pub fn permutation(images: &[usize]) -> Result<Self, DsError> {
        if images.contains(&0) {
            return Err(DsError::InvalidOperator("permutation images are 1-based".into()));
        }
        Self::permutation_zero_based(images.iter().map(|i| i - 1).collect())
    }

    /// Transposition of positions `i` and `j` (1-based) acting on `1..dim`.
    pub fn transposition(i: usize, j: usize, dim: usize) -> Result<Self, DsError> {
        if i == 0 || j == 0 || i > dim || j > dim {
            return Err(DsError::InvalidOperator(format!("transposition ({i} {j}) outside 1..{dim}")));
        }
        let mut map: Vec<usize> = (0..dim).collect();
        map.swap(i - 1, j - 1);
        Self::permutation_zero_based(map)
    }

    fn permutation_zero_based(map: Vec<usize>) -> Result<Self, DsError> {
        let mut seen = vec![false; map.len()];
        for &i in &map {
            if i >= map.len() || std::mem::replace(&mut seen[i], true) {
                return Err(DsError::InvalidOperator(format!("{:?} is not a permutation", map)));
            }
        }
        Ok(Self { form: DsForm::Permutation(map), cert: unit_cert() })
    }

    pub fn convex_combination(weights: Vec<f64>, parts: Vec<DsOperator>) -> Result<Self, DsError> {
        if parts.is_empty() || weights.len() != parts.len() {
            return Err(DsError::InvalidOperator(
                "convex combination needs one weight per part and at least one part".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DsError::InvalidOperator("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > ARITHMETIC_SLACK {
            return Err(DsError::InvalidOperator(format!("weights sum to {total}, not 1")));
        }
        let row_norm = weights.iter().zip(&parts).map(|(w, p)| w * p.cert.row_norm).sum();
        let col_norm = weights.iter().zip(&parts).map(|(w, p)| w * p.cert.col_norm).sum();
        Ok(Self {
            form: DsForm::ConvexCombination { weights, parts },
            cert: Certificate { row_norm, col_norm, certified: true },
        })
    }

    pub fn power(base: DsOperator, exponent: u32) -> Result<Self, DsError> {
        if exponent == 0 {
            return Err(DsError::InvalidOperator("power exponent must be positive".into()));
        }
        let cert = Certificate {
            row_norm: base.cert.row_norm.powi(exponent as i32),
            col_norm: base.cert.col_norm.powi(exponent as i32),
            certified: true,
        };
        Ok(Self { form: DsForm::Power { base: Box::new(base), exponent }, cert })
    }

    pub fn compose(parts: Vec<DsOperator>) -> Result<Self, DsError> {
        if parts.is_empty() {
            return Err(DsError::InvalidOperator("composition needs at least one part".into()));
        }
        let cert = Certificate {
            row_norm: parts.iter().map(|p| p.cert.row_norm).product(),
            col_norm: parts.iter().map(|p| p.cert.col_norm).product(),
            certified: true,
        };
        Ok(Self { form: DsForm::Compose(parts), cert })
    }

    pub fn form(&self) -> &DsForm {
        &self.form
    }

    pub fn certificate(&self) -> Certificate {
        self.cert
    }

    /// The explicit matrix, when the operator is in matrix form.
    pub fn matrix(&self) -> Option<&SparseMatrix> {
        match &self.form {
            DsForm::Matrix(m) => Some(m),
            _ => None,
        }
    }

    pub fn form_name(&self) -> &'static str {
        match &self.form {
            DsForm::Matrix(_) => "matrix",
            DsForm::Shift(ShiftDirection::Left) => "shift_left",
            DsForm::Shift(ShiftDirection::Right) => "shift_right",
            DsForm::Permutation(_) => "permutation",
            DsForm::ConvexCombination { .. } => "convex_combination",
            DsForm::Power { .. } => "power",
            DsForm::Compose(_) => "compose",
        }
    }

    /// Size of the finite block the operator acts on, if any. Shifts act on
    /// all of the natural numbers.
    pub fn dim(&self) -> Option<usize> {
        match &self.form {
            DsForm::Matrix(m) => Some(m.dim()),
            DsForm::Permutation(map) => Some(map.len()),
            DsForm::Shift(_) => None,
            DsForm::Power { base, .. } => base.dim(),
            DsForm::ConvexCombination { parts, .. } | DsForm::Compose(parts) => {
                parts.iter().map(|p| p.dim()).try_fold(0, |acc, d| d.map(|d| acc.max(d)))
            }
        }
    }

    /// The positive operator `|T|` dominating `T`: entrywise absolute value
    /// for matrices; shifts and permutations are already positive.
    pub fn modulus(&self) -> Result<Self, DsError> {
        match &self.form {
            DsForm::Matrix(m) => Ok(Self { form: DsForm::Matrix(m.map_values(f64::abs)), cert: self.cert }),
            DsForm::Shift(_) | DsForm::Permutation(_) => Ok(self.clone()),
            DsForm::ConvexCombination { .. } => Err(DsError::UnsupportedForm("convex_combination")),
            DsForm::Power { .. } => Err(DsError::UnsupportedForm("power")),
            DsForm::Compose(_) => Err(DsError::UnsupportedForm("compose")),
        }
    }

    /// Exact image `T x`.
    pub fn apply(&self, x: &TruncatedSequence) -> Result<TruncatedSequence, DsError> {
        match &self.form {
            DsForm::Matrix(m) => {
                let dense = finite_block(x, m.dim())?;
                Ok(TruncatedSequence::finite(m.mul_vec(&dense)))
            }
            DsForm::Shift(ShiftDirection::Left) => {
                let values = x.values().get(1..).unwrap_or(&[]).to_vec();
                Ok(TruncatedSequence::new(values, x.tail()).expect("shift keeps entries finite"))
            }
            DsForm::Shift(ShiftDirection::Right) => {
                let mut values = Vec::with_capacity(x.len() + 1);
                values.push(0.0);
                values.extend_from_slice(x.values());
                Ok(TruncatedSequence::new(values, x.tail()).expect("shift keeps entries finite"))
            }
            DsForm::Permutation(map) => {
                let dense = finite_block(x, map.len())?;
                Ok(TruncatedSequence::finite(map.iter().map(|&j| dense[j]).collect()))
            }
            DsForm::ConvexCombination { weights, parts } => {
                let mut acc: Option<TruncatedSequence> = None;
                for (w, part) in weights.iter().zip(parts) {
                    let image = part.apply(x)?;
                    acc = Some(match acc {
                        None => image.scale(*w),
                        Some(a) => a.combine(1.0, &image, *w),
                    });
                }
                Ok(acc.expect("at least one part"))
            }
            DsForm::Power { base, exponent } => {
                let mut y = base.apply(x)?;
                for _ in 1..*exponent {
                    y = base.apply(&y)?;
                }
                Ok(y)
            }
            DsForm::Compose(parts) => {
                let mut iter = parts.iter().rev();
                let mut y = iter.next().expect("at least one part").apply(x)?;
                for part in iter {
                    y = part.apply(&y)?;
                }
                Ok(y)
            }
        }
    }

    /// `T^k x`.
    pub fn apply_power(&self, x: &TruncatedSequence, k: u32) -> Result<TruncatedSequence, DsError> {
        let mut y = x.clone();
        for _ in 0..k {
            y = self.apply(&y)?;
        }
        Ok(y)
    }

    /// Compression of the operator to coordinates `1..dim`, as a certified
    /// matrix. Exact on inputs supported in `1..dim`, except that mass moving
    /// across the boundary (the left shift's inflow from `dim + 1`, the right
    /// shift's outflow from `dim`) is dropped.
    pub fn to_matrix(&self, dim: usize) -> Result<Self, DsError> {
        let matrix = self.compressed(dim);
        certify_ds(matrix, ARITHMETIC_SLACK)
    }

    fn compressed(&self, dim: usize) -> SparseMatrix {
        match &self.form {
            DsForm::Matrix(m) => m.resized(dim),
            DsForm::Shift(ShiftDirection::Left) => {
                SparseMatrix::from_triplets(dim, (1..dim).map(|i| (i - 1, i, 1.0))).expect("in range")
            }
            DsForm::Shift(ShiftDirection::Right) => {
                SparseMatrix::from_triplets(dim, (1..dim).map(|i| (i, i - 1, 1.0))).expect("in range")
            }
            DsForm::Permutation(map) => SparseMatrix::from_triplets(
                dim,
                (0..dim).filter_map(|i| {
                    let j = map.get(i).copied().unwrap_or(i);
                    (j < dim).then_some((i, j, 1.0))
                }),
            )
            .expect("in range"),
            DsForm::ConvexCombination { weights, parts } => {
                let terms: Vec<_> = weights.iter().zip(parts).map(|(w, p)| (*w, p.compressed(dim))).collect();
                SparseMatrix::weighted_sum(dim, &terms)
            }
            DsForm::Power { base, exponent } => base.compressed(dim).pow(*exponent),
            DsForm::Compose(parts) => parts
                .iter()
                .map(|p| p.compressed(dim))
                .reduce(|a, b| a.matmul(&b))
                .expect("at least one part"),
        }
    }

    /// Transpose of a matrix-form operator (still Dunford-Schwartz: the row
    /// and column norms swap).
    pub fn transpose(&self) -> Result<Self, DsError> {
        match &self.form {
            DsForm::Matrix(m) => Ok(Self {
                form: DsForm::Matrix(m.transpose()),
                cert: Certificate { row_norm: self.cert.col_norm, col_norm: self.cert.row_norm, certified: true },
            }),
            _ => Err(DsError::UnsupportedForm(self.form_name())),
        }
    }
}

fn unit_cert() -> Certificate {
    Certificate { row_norm: 1.0, col_norm: 1.0, certified: true }
}

/// Dense copy of `x` on `1..dim`, provided `x` vanishes outside that block.
pub(crate) fn finite_block(x: &TruncatedSequence, dim: usize) -> Result<Vec<f64>, DsError> {
    let support = x.support_len();
    if !x.tail().is_zero() || support > dim {
        return Err(DsError::IncompatibleSupport { support, dim, tail: format!("{:?}", x.tail()) });
    }
    Ok(x.dense_prefix(dim).expect("zero tail is exact"))
}

/// Deterministic random Dunford-Schwartz matrix.
///
/// Entries are drawn with probability `density`, rows and columns are
/// alternately rescaled toward absolute sums `<= 1` (at most 100 rounds), and a
/// final global scale forces certification at tolerance zero. In signed mode
/// each entry's sign is flipped with probability 1/2 afterwards.
pub fn random_ds(dim: usize, density: f64, sign_mode: SignMode, seed: u64) -> DsOperator {
    assert!(dim >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dense = vec![vec![0.0; dim]; dim];
    for row in dense.iter_mut() {
        for v in row.iter_mut() {
            if rng.gen::<f64>() < density {
                // (0, 1]
                *v = 1.0 - rng.gen::<f64>();
            }
        }
    }
    for _ in 0..100 {
        let mut changed = false;
        for row in dense.iter_mut() {
            let s: f64 = row.iter().sum();
            if s > 1.0 {
                row.iter_mut().for_each(|v| *v /= s);
                changed = true;
            }
        }
        for c in 0..dim {
            let s: f64 = dense.iter().map(|row| row[c]).sum();
            if s > 1.0 {
                dense.iter_mut().for_each(|row| row[c] /= s);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if sign_mode == SignMode::Signed {
        for v in dense.iter_mut().flatten() {
            if rng.gen::<bool>() {
                *v = -*v;
            }
        }
    }
    let mut matrix = SparseMatrix::from_dense(&dense).expect("finite square matrix");
    let worst = matrix.max_abs_row_sum().max(matrix.max_abs_col_sum());
    if worst > 1.0 {
        matrix = matrix.map_values(|v| v / worst);
    }
    // Rounding in the rescale can leave a sum one ulp above 1.
    while matrix.max_abs_row_sum() > 1.0 || matrix.max_abs_col_sum() > 1.0 {
        matrix = matrix.map_values(|v| v * (1.0 - f64::EPSILON));
    }
    certify_ds(matrix, 0.0).expect("random_ds output is certified by construction")
}

/// Random doubly stochastic matrix: a convex combination of `parts` random
/// permutations with random weights, flattened to matrix form.
pub fn random_doubly_stochastic(dim: usize, parts: usize, seed: u64) -> DsOperator {
    assert!(dim >= 1 && parts >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..parts).map(|_| 1.0 - rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[1..].iter().sum();
    weights[0] = 1.0 - head;
    let perms = (0..parts)
        .map(|_| {
            let mut map: Vec<usize> = (0..dim).collect();
            for i in (1..dim).rev() {
                map.swap(i, rng.gen_range(0..=i));
            }
            DsOperator::permutation_zero_based(map).expect("shuffle is a permutation")
        })
        .collect();
    DsOperator::convex_combination(weights, perms)
        .and_then(|t| t.to_matrix(dim))
        .expect("convex combination of permutations is doubly stochastic")
}

/// Serialized operator: `{form, dim, entries: [[r, c, v], ...], cert}` with
/// 1-based indices. Structural forms use the extra fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorRecord {
    pub form: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub permutation: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<OperatorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<u32>,
    pub cert: Certificate,
}

impl From<&DsOperator> for OperatorRecord {
    fn from(op: &DsOperator) -> Self {
        let mut record = OperatorRecord {
            form: op.form_name().to_string(),
            dim: op.dim(),
            entries: Vec::new(),
            permutation: Vec::new(),
            weights: Vec::new(),
            parts: Vec::new(),
            exponent: None,
            cert: op.cert,
        };
        match &op.form {
            DsForm::Matrix(m) => record.entries = m.triplets().map(|(r, c, v)| (r + 1, c + 1, v)).collect(),
            DsForm::Shift(_) => {}
            DsForm::Permutation(map) => record.permutation = map.iter().map(|i| i + 1).collect(),
            DsForm::ConvexCombination { weights, parts } => {
                record.weights = weights.clone();
                record.parts = parts.iter().map(OperatorRecord::from).collect();
            }
            DsForm::Power { base, exponent } => {
                record.parts = vec![OperatorRecord::from(base.as_ref())];
                record.exponent = Some(*exponent);
            }
            DsForm::Compose(parts) => record.parts = parts.iter().map(OperatorRecord::from).collect(),
        }
        record
    }
}

impl TryFrom<OperatorRecord> for DsOperator {
    type Error = DsError;

    fn try_from(r: OperatorRecord) -> Result<Self, Self::Error> {
        let parts = || -> Result<Vec<DsOperator>, DsError> {
            r.parts.iter().cloned().map(DsOperator::try_from).collect()
        };
        match r.form.as_str() {
            "matrix" => {
                let dim = r.dim.ok_or_else(|| DsError::InvalidOperator("matrix record without dim".into()))?;
                let mut triplets = Vec::with_capacity(r.entries.len());
                for &(row, col, v) in &r.entries {
                    if row == 0 || col == 0 {
                        return Err(DsError::InvalidOperator("matrix entries are 1-based".into()));
                    }
                    triplets.push((row - 1, col - 1, v));
                }
                certify_ds(SparseMatrix::from_triplets(dim, triplets)?, ARITHMETIC_SLACK)
            }
            "shift_left" => Ok(DsOperator::shift_left()),
            "shift_right" => Ok(DsOperator::shift_right()),
            "permutation" => DsOperator::permutation(&r.permutation),
            "convex_combination" => DsOperator::convex_combination(r.weights.clone(), parts()?),
            "power" => {
                let base = parts()?
                    .into_iter()
                    .next()
                    .ok_or_else(|| DsError::InvalidOperator("power record without base".into()))?;
                DsOperator::power(base, r.exponent.unwrap_or(0))
            }
            "compose" => DsOperator::compose(parts()?),
            other => Err(DsError::InvalidOperator(format!("unknown operator form {other:?}"))),
        }
    }
}

impl Serialize for DsOperator {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        OperatorRecord::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DsOperator {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let record = OperatorRecord::deserialize(deserializer)?;
        DsOperator::try_from(record).map_err(serde::de::Error::custom)
    }
}

/// Applies `T` to a dense vector on `1..dim`, for operators with a finite
/// block. Used by the averaging engine's fast path.
pub(crate) fn dense_apply_into(op: &DsOperator, x: &[f64], out: &mut [f64]) -> bool {
    match &op.form {
        DsForm::Matrix(m) if m.dim() == x.len() => {
            m.mul_vec_into(x, out);
            true
        }
        DsForm::Permutation(map) if map.len() == x.len() => {
            for (o, &j) in out.iter_mut().zip(map) {
                *o = x[j];
            }
            true
        }
        _ => false,
    }
}
