//! Exact dense linear-algebra engine for small qubit registers.
//!
//! Everything in the protocol layer is checked against states built here:
//! GHZ resources, BB84 preparations, Bell projections, partial traces, and
//! Born-rule measurements, all on dense complex vectors/matrices. Registers
//! stay tiny (at most 12 qubits combined in a tensor product), so no sparse
//! or stabilizer backend is needed.
//!
//! Conventions, fixed once to avoid silent transposition bugs:
//!
//! * qubit ordering is big-endian: qubit 0 is the most significant bit of the
//!   amplitude index, so `tensor(a, b)` places `a`'s qubits first;
//! * polarization maps to the computational basis as `H = |0>`, `V = |1>`;
//!   with that map the two common spellings of the Bell states
//!   `(|01> +- |10>)/sqrt(2)` and `(|HV> +- |VH>)/sqrt(2)` are the same
//!   states, and this module treats them as such;
//! * all values are immutable after construction and operations are pure
//!   functions, so everything is safe to share across threads.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::protocol::{Basis, Bb84Symbol, BsmOutcome};

/// Absolute tolerance for normalization, Hermiticity, and trace checks.
pub const NORM_TOL: f64 = 1e-10;
/// Eigenvalue floor for positive-semidefiniteness checks.
pub const PSD_TOL: f64 = 1e-9;
/// Outcome probabilities below this are flagged as null rather than
/// producing a renormalized post-state; exact-zero branches are routine when
/// enumerating projective outcomes.
pub const NULL_OUTCOME_TOL: f64 = 1e-12;
/// Largest register a tensor product may produce.
pub const MAX_TENSOR_QUBITS: usize = 12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, thiserror::Error)]
pub enum QuantumError {
    #[error("qubit count {0} outside the supported range {1}..={2}")]
    QubitCount(usize, usize, usize),
    #[error("tensor product would have {0} qubits (limit {MAX_TENSOR_QUBITS})")]
    Capacity(usize),
    #[error("amplitude vector has length {0}, expected a power of two {1}")]
    BadDimension(usize, usize),
    #[error("state norm {0} differs from 1 beyond tolerance")]
    NotNormalized(f64),
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("trace {0} differs from 1 beyond tolerance")]
    BadTrace(f64),
    #[error("matrix has eigenvalue {0:.3e} below {}", -PSD_TOL)]
    NotPositive(f64),
    #[error("eigenvalue {0} exceeds 1; not a valid POVM element")]
    NotContractive(f64),
    #[error("qubit index {0} out of range for {1} qubits")]
    QubitIndex(usize, usize),
    #[error("qubit indices must be distinct")]
    DuplicateIndex,
    #[error("operator acts on {0} qubits but the state has {1}")]
    DimensionMismatch(usize, usize),
    #[error("mixing weight {0} outside [0, 1]")]
    BadWeight(f64),
    #[error("keep set must be non-empty")]
    EmptyKeepSet,
}

fn num_qubits_for(dim: usize) -> Result<usize, QuantumError> {
    let n = dim.trailing_zeros() as usize;
    if dim == 0 || dim != 1 << n {
        return Err(QuantumError::BadDimension(dim, dim.next_power_of_two()));
    }
    Ok(n)
}

/// Bit of `index` addressing `qubit` in an `n`-qubit register (big-endian).
#[inline]
fn bit_of(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

fn check_hermitian(matrix: &DMatrix<Complex64>) -> Result<(), QuantumError> {
    let mut worst = 0.0f64;
    for r in 0..matrix.nrows() {
        for c in r..matrix.ncols() {
            let delta = (matrix[(r, c)] - matrix[(c, r)].conj()).norm();
            worst = worst.max(delta);
        }
    }
    if worst > NORM_TOL {
        return Err(QuantumError::NotHermitian(worst));
    }
    Ok(())
}

/// Real eigenvalues of a Hermitian matrix, unordered.
fn hermitian_eigenvalues(matrix: &DMatrix<Complex64>) -> DVector<f64> {
    matrix.clone().symmetric_eigen().eigenvalues
}

/// Normalized pure state on a small register.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amplitudes: DVector<Complex64>,
}

impl PureState {
    /// Build a state from raw amplitudes, checking length and normalization.
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self, QuantumError> {
        let num_qubits = num_qubits_for(amplitudes.len())?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(PureState {
            num_qubits,
            amplitudes,
        })
    }

    fn from_normalized(amplitudes: DVector<Complex64>) -> Self {
        let num_qubits = num_qubits_for(amplitudes.len()).expect("power-of-two dimension");
        PureState {
            num_qubits,
            amplitudes,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Kronecker composition; `self`'s qubits come first.
    pub fn tensor(&self, other: &PureState) -> Result<PureState, QuantumError> {
        let total = self.num_qubits + other.num_qubits;
        if total > MAX_TENSOR_QUBITS {
            return Err(QuantumError::Capacity(total));
        }
        Ok(PureState::from_normalized(
            self.amplitudes.kronecker(&other.amplitudes),
        ))
    }

    pub fn to_density(&self) -> DensityOperator {
        let matrix = &self.amplitudes * self.amplitudes.adjoint();
        DensityOperator {
            num_qubits: self.num_qubits,
            matrix,
        }
    }

    /// Apply a projector and renormalize.
    ///
    /// Returns the outcome probability and the post-measurement state, or
    /// `None` for the state when the probability falls below
    /// [`NULL_OUTCOME_TOL`]. The operator must be idempotent (a projector)
    /// for the probability to follow the Born rule on this fast path.
    pub fn project(
        &self,
        op: &MeasurementOperator,
    ) -> Result<(f64, Option<PureState>), QuantumError> {
        if op.num_qubits != self.num_qubits {
            return Err(QuantumError::DimensionMismatch(
                op.num_qubits,
                self.num_qubits,
            ));
        }
        let projected = &op.matrix * &self.amplitudes;
        let probability = projected.norm_squared();
        if probability < NULL_OUTCOME_TOL {
            return Ok((probability, None));
        }
        let scale = Complex64::new(1.0 / probability.sqrt(), 0.0);
        Ok((
            probability,
            Some(PureState::from_normalized(projected * scale)),
        ))
    }

    /// Contract one qubit against a bra `<b| = conj(b0)<0| + conj(b1)<1|`,
    /// removing it from the register.
    ///
    /// Returns the squared norm of the contracted vector (the outcome weight
    /// when the bra is one element of an orthonormal basis) together with the
    /// renormalized remainder; the remainder is `None` below
    /// [`NULL_OUTCOME_TOL`]. Remaining qubits keep their relative order.
    pub fn project_out_qubit(
        &self,
        qubit: usize,
        bra: &[Complex64; 2],
    ) -> Result<(f64, Option<PureState>), QuantumError> {
        if qubit >= self.num_qubits {
            return Err(QuantumError::QubitIndex(qubit, self.num_qubits));
        }
        if self.num_qubits == 1 {
            // Contracting the last qubit leaves a scalar; expose it as the
            // weight with no remaining state.
            let amp = bra[0].conj() * self.amplitudes[0] + bra[1].conj() * self.amplitudes[1];
            return Ok((amp.norm_sqr(), None));
        }
        let n = self.num_qubits;
        let out_dim = 1 << (n - 1);
        let shift = n - 1 - qubit;
        let low_mask = (1usize << shift) - 1;
        let mut out = DVector::from_element(out_dim, Complex64::new(0.0, 0.0));
        for r in 0..out_dim {
            let low = r & low_mask;
            let high = (r >> shift) << (shift + 1);
            let base = high | low;
            out[r] = bra[0].conj() * self.amplitudes[base]
                + bra[1].conj() * self.amplitudes[base | (1 << shift)];
        }
        let weight = out.norm_squared();
        if weight < NULL_OUTCOME_TOL {
            return Ok((weight, None));
        }
        let scale = Complex64::new(1.0 / weight.sqrt(), 0.0);
        Ok((weight, Some(PureState::from_normalized(out * scale))))
    }

    /// Measure one qubit in the Z or X basis and remove it from the register.
    ///
    /// `r` in `[0, 1)` selects the outcome by inverse CDF over the two Born
    /// probabilities, so callers drive sampling with their own randomness and
    /// this stays a pure function. Outcomes with probability below
    /// [`NULL_OUTCOME_TOL`] are never selected. The post-state is `None` only
    /// when the measured qubit was the last one.
    pub fn measure_remove_qubit(
        &self,
        qubit: usize,
        basis: Basis,
        r: f64,
    ) -> Result<(u8, Option<PureState>), QuantumError> {
        let bras: [[Complex64; 2]; 2] = match basis {
            Basis::Z => [
                [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            ],
            Basis::X => [
                [
                    Complex64::new(FRAC_1_SQRT_2, 0.0),
                    Complex64::new(FRAC_1_SQRT_2, 0.0),
                ],
                [
                    Complex64::new(FRAC_1_SQRT_2, 0.0),
                    Complex64::new(-FRAC_1_SQRT_2, 0.0),
                ],
            ],
        };
        let (w0, post0) = self.project_out_qubit(qubit, &bras[0])?;
        let (w1, post1) = self.project_out_qubit(qubit, &bras[1])?;
        let pick_zero = if r < w0 {
            w0 >= NULL_OUTCOME_TOL || w1 < NULL_OUTCOME_TOL
        } else {
            w1 < NULL_OUTCOME_TOL && w0 >= NULL_OUTCOME_TOL
        };
        if pick_zero {
            Ok((0, post0))
        } else {
            Ok((1, post1))
        }
    }

    /// Contract an ordered qubit pair against a two-qubit bra, removing both.
    ///
    /// The bra is indexed big-endian over the pair: entry `2*a + b` multiplies
    /// the component with `pair.0 = a`, `pair.1 = b`.
    pub fn project_out_pair(
        &self,
        pair: (usize, usize),
        bra: &[Complex64; 4],
    ) -> Result<(f64, Option<PureState>), QuantumError> {
        let (a, b) = pair;
        if a >= self.num_qubits {
            return Err(QuantumError::QubitIndex(a, self.num_qubits));
        }
        if b >= self.num_qubits {
            return Err(QuantumError::QubitIndex(b, self.num_qubits));
        }
        if a == b {
            return Err(QuantumError::DuplicateIndex);
        }
        let n = self.num_qubits;
        let out_dim = 1 << (n - 2);
        let shift_a = n - 1 - a;
        let shift_b = n - 1 - b;
        if n == 2 {
            let mut amp = Complex64::new(0.0, 0.0);
            for s in 0..4 {
                let idx = ((s >> 1) << shift_a) | ((s & 1) << shift_b);
                amp += bra[s].conj() * self.amplitudes[idx];
            }
            return Ok((amp.norm_sqr(), None));
        }
        // Insert the pair's bits into the compacted remainder index.
        let (hi, lo) = if shift_a > shift_b {
            (shift_a, shift_b)
        } else {
            (shift_b, shift_a)
        };
        let expand = |r: usize| -> usize {
            let low = r & ((1 << lo) - 1);
            let mid = (r >> lo) & ((1 << (hi - 1 - lo)) - 1);
            let high = r >> (hi - 1);
            (high << (hi + 1)) | (mid << (lo + 1)) | low
        };
        let mut out = DVector::from_element(out_dim, Complex64::new(0.0, 0.0));
        for r in 0..out_dim {
            let base = expand(r);
            let mut amp = Complex64::new(0.0, 0.0);
            for (s, coeff) in bra.iter().enumerate() {
                let idx = base | ((s >> 1) << shift_a) | ((s & 1) << shift_b);
                amp += coeff.conj() * self.amplitudes[idx];
            }
            out[r] = amp;
        }
        let weight = out.norm_squared();
        if weight < NULL_OUTCOME_TOL {
            return Ok((weight, None));
        }
        let scale = Complex64::new(1.0 / weight.sqrt(), 0.0);
        Ok((weight, Some(PureState::from_normalized(out * scale))))
    }
}

/// Single-qubit BB84 state.
pub fn basis_state(symbol: Bb84Symbol) -> PureState {
    let (a0, a1) = match symbol {
        Bb84Symbol::Zero => (1.0, 0.0),
        Bb84Symbol::One => (0.0, 1.0),
        Bb84Symbol::Plus => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        Bb84Symbol::Minus => (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    };
    PureState::from_normalized(DVector::from_vec(vec![
        Complex64::new(a0, 0.0),
        Complex64::new(a1, 0.0),
    ]))
}

/// `(|0..0> + |1..1>)/sqrt(2)` on `n` qubits, `2 <= n <= 8`.
pub fn ghz_state(n: usize) -> Result<PureState, QuantumError> {
    if !(2..=8).contains(&n) {
        return Err(QuantumError::QubitCount(n, 2, 8));
    }
    let dim = 1 << n;
    let mut amplitudes = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    amplitudes[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amplitudes[dim - 1] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Ok(PureState::from_normalized(amplitudes))
}

/// GHZ state mixed with white noise:
/// `p |GHZ_n><GHZ_n| + (1-p)/2^n * I`.
pub fn werner_ghz(n: usize, p: f64) -> Result<DensityOperator, QuantumError> {
    ghz_state(n)?.to_density().depolarized(p)
}

/// Density operator on a small register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    num_qubits: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    /// Build from a raw matrix, checking Hermiticity, unit trace, and
    /// positive semidefiniteness.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self, QuantumError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(QuantumError::BadDimension(matrix.ncols(), matrix.nrows()));
        }
        let num_qubits = num_qubits_for(matrix.nrows())?;
        let op = DensityOperator { num_qubits, matrix };
        op.validate()?;
        Ok(op)
    }

    /// Re-check the type invariants on an existing operator.
    pub fn validate(&self) -> Result<(), QuantumError> {
        check_hermitian(&self.matrix)?;
        let trace = self.matrix.trace();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(QuantumError::BadTrace(trace.re));
        }
        let min = hermitian_eigenvalues(&self.matrix).min();
        if min < -PSD_TOL {
            return Err(QuantumError::NotPositive(min));
        }
        Ok(())
    }

    pub fn from_pure(state: &PureState) -> Self {
        state.to_density()
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.matrix
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
    }

    /// Kronecker composition; `self`'s qubits come first.
    pub fn tensor(&self, other: &DensityOperator) -> Result<DensityOperator, QuantumError> {
        let total = self.num_qubits + other.num_qubits;
        if total > MAX_TENSOR_QUBITS {
            return Err(QuantumError::Capacity(total));
        }
        Ok(DensityOperator {
            num_qubits: total,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// Depolarizing mixture `p * rho + (1-p)/2^n * I`.
    pub fn depolarized(&self, p: f64) -> Result<DensityOperator, QuantumError> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(QuantumError::BadWeight(p));
        }
        let dim = self.dim();
        let mut matrix = &self.matrix * Complex64::new(p, 0.0);
        let floor = Complex64::new((1.0 - p) / dim as f64, 0.0);
        for i in 0..dim {
            matrix[(i, i)] += floor;
        }
        Ok(DensityOperator {
            num_qubits: self.num_qubits,
            matrix,
        })
    }

    /// Born-rule measurement with one POVM element.
    ///
    /// The probability is `tr(op * rho)`; the post-state is
    /// `op * rho * op^dag` renormalized, or flagged `None` when the
    /// probability falls below [`NULL_OUTCOME_TOL`].
    pub fn measure(&self, op: &MeasurementOperator) -> Result<MeasurementOutcome, QuantumError> {
        if op.num_qubits != self.num_qubits {
            return Err(QuantumError::DimensionMismatch(
                op.num_qubits,
                self.num_qubits,
            ));
        }
        let product = &op.matrix * &self.matrix;
        let probability = product.trace().re;
        if probability < NULL_OUTCOME_TOL {
            return Ok(MeasurementOutcome {
                probability: probability.max(0.0),
                post_state: None,
            });
        }
        let post = &product * op.matrix.adjoint();
        let scale = Complex64::new(1.0 / post.trace().re, 0.0);
        Ok(MeasurementOutcome {
            probability,
            post_state: Some(DensityOperator {
                num_qubits: self.num_qubits,
                matrix: post * scale,
            }),
        })
    }

    /// Reduced operator on `keep`, tracing out everything else.
    ///
    /// The output qubits follow the order of the `keep` list.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator, QuantumError> {
        if keep.is_empty() {
            return Err(QuantumError::EmptyKeepSet);
        }
        let n = self.num_qubits;
        for (i, &q) in keep.iter().enumerate() {
            if q >= n {
                return Err(QuantumError::QubitIndex(q, n));
            }
            if keep[..i].contains(&q) {
                return Err(QuantumError::DuplicateIndex);
            }
        }
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let k = keep.len();
        let out_dim = 1usize << k;
        let trace_dim = 1usize << traced.len();

        // Map (kept bits, traced bits) back to a full register index.
        let compose = |kept_idx: usize, traced_idx: usize| -> usize {
            let mut full = 0usize;
            for (j, &q) in keep.iter().enumerate() {
                full |= bit_of(kept_idx, j, k) << (n - 1 - q);
            }
            for (j, &q) in traced.iter().enumerate() {
                full |= bit_of(traced_idx, j, traced.len()) << (n - 1 - q);
            }
            full
        };

        let mut matrix = DMatrix::from_element(out_dim, out_dim, Complex64::new(0.0, 0.0));
        for r in 0..out_dim {
            for c in 0..out_dim {
                let mut sum = Complex64::new(0.0, 0.0);
                for t in 0..trace_dim {
                    sum += self.matrix[(compose(r, t), compose(c, t))];
                }
                matrix[(r, c)] = sum;
            }
        }
        Ok(DensityOperator {
            num_qubits: k,
            matrix,
        })
    }
}

/// Result of a single-element measurement.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub probability: f64,
    /// `None` flags a null outcome (probability below [`NULL_OUTCOME_TOL`]).
    pub post_state: Option<DensityOperator>,
}

/// A labeled POVM element (Hermitian, positive, eigenvalues at most 1).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOperator {
    num_qubits: usize,
    matrix: DMatrix<Complex64>,
    label: String,
}

impl MeasurementOperator {
    pub fn new(matrix: DMatrix<Complex64>, label: impl Into<String>) -> Result<Self, QuantumError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(QuantumError::BadDimension(matrix.ncols(), matrix.nrows()));
        }
        let num_qubits = num_qubits_for(matrix.nrows())?;
        check_hermitian(&matrix)?;
        let eigenvalues = hermitian_eigenvalues(&matrix);
        let min = eigenvalues.min();
        if min < -PSD_TOL {
            return Err(QuantumError::NotPositive(min));
        }
        let max = eigenvalues.max();
        if max > 1.0 + PSD_TOL {
            return Err(QuantumError::NotContractive(max));
        }
        Ok(MeasurementOperator {
            num_qubits,
            matrix,
            label: label.into(),
        })
    }

    /// Rank-one projector `|state><state|`.
    pub fn projector_onto(state: &PureState, label: impl Into<String>) -> Self {
        MeasurementOperator {
            num_qubits: state.num_qubits(),
            matrix: &state.amplitudes * state.amplitudes.adjoint(),
            label: label.into(),
        }
    }

    /// Complement `I - sum(ops)` of a partial projector set.
    pub fn complement(
        ops: &[&MeasurementOperator],
        label: impl Into<String>,
    ) -> Result<Self, QuantumError> {
        let first = ops.first().ok_or(QuantumError::EmptyKeepSet)?;
        let mut matrix = DMatrix::identity(first.matrix.nrows(), first.matrix.ncols());
        for op in ops {
            if op.num_qubits != first.num_qubits {
                return Err(QuantumError::DimensionMismatch(
                    op.num_qubits,
                    first.num_qubits,
                ));
            }
            matrix -= &op.matrix;
        }
        MeasurementOperator::new(matrix, label)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Bell projector `|psi+-><psi+-|` on a qubit pair, identity elsewhere.
///
/// `pair.0` is the more significant qubit of the embedded two-qubit block.
pub fn bell_projector(
    outcome: BsmOutcome,
    pair: (usize, usize),
    num_qubits: usize,
) -> Result<MeasurementOperator, QuantumError> {
    let sign = match outcome {
        BsmOutcome::PsiPlus => 1.0,
        BsmOutcome::PsiMinus => -1.0,
        BsmOutcome::Failure => return Err(QuantumError::EmptyKeepSet),
    };
    let (a, b) = pair;
    if a >= num_qubits {
        return Err(QuantumError::QubitIndex(a, num_qubits));
    }
    if b >= num_qubits {
        return Err(QuantumError::QubitIndex(b, num_qubits));
    }
    if a == b {
        return Err(QuantumError::DuplicateIndex);
    }
    // |psi+-> over the pair subspace, big-endian: index 1 = |01>, 2 = |10>.
    let mut pair_vec = [Complex64::new(0.0, 0.0); 4];
    pair_vec[1] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    pair_vec[2] = Complex64::new(sign * FRAC_1_SQRT_2, 0.0);

    let dim = 1usize << num_qubits;
    let sub = |i: usize| (bit_of(i, a, num_qubits) << 1) | bit_of(i, b, num_qubits);
    let rest_mask = {
        let mut mask = usize::MAX >> (usize::BITS as usize - num_qubits);
        mask &= !(1 << (num_qubits - 1 - a));
        mask &= !(1 << (num_qubits - 1 - b));
        mask
    };
    let mut matrix = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for r in 0..dim {
        let vr = pair_vec[sub(r)];
        if vr.norm_sqr() == 0.0 {
            continue;
        }
        for c in 0..dim {
            if (r & rest_mask) != (c & rest_mask) {
                continue;
            }
            let vc = pair_vec[sub(c)];
            matrix[(r, c)] = vr * vc.conj();
        }
    }
    let label = match outcome {
        BsmOutcome::PsiPlus => format!("psi+({a},{b})"),
        _ => format!("psi-({a},{b})"),
    };
    Ok(MeasurementOperator {
        num_qubits,
        matrix,
        label,
    })
}
