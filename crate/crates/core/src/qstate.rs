//! Dense state-vector simulation of one qudit and of the Bob ⊗ Eve pair.
//!
//! A [`JointState`] stores its `d²` amplitudes as a `d × d` matrix whose row
//! index is Bob's computational label and whose column index is Eve's, so a
//! local operator `O` on Bob acts as `O·Ψ` and on Eve as `Ψ·Oᵀ`. The
//! flattened, row-major view (Bob first) is [`JointState::amplitudes`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::galois::GfElement;
use crate::mub::MubTable;
use crate::pauli::Operator;

const NORM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct QuditState(DVector<Complex64>);

impl QuditState {
    /// Wraps amplitudes, rejecting vectors whose norm is not 1 within `1e-9`.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let state = Self::from_amplitudes_unchecked(amplitudes);
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    pub(crate) fn from_amplitudes_unchecked(amplitudes: Vec<Complex64>) -> Self {
        QuditState(DVector::from_vec(amplitudes))
    }

    /// Computational basis vector `e_t`.
    pub fn basis_state(d: usize, t: usize) -> Self {
        let mut v = DVector::zeros(d);
        v[t] = Complex64::new(1.0, 0.0);
        QuditState(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QuditState) -> Complex64 {
        self.0.dotc(&other.0)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &QuditState) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// Which half of a [`JointState`] an operation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    Bob,
    Eve,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointState(DMatrix<Complex64>);

impl JointState {
    pub fn product(bob: &QuditState, eve: &QuditState) -> Self {
        JointState(bob.as_vector() * eve.as_vector().transpose())
    }

    /// From `d²` row-major amplitudes (index `t_B · d + t_E`).
    pub fn new(d: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: amplitudes.len(),
            });
        }
        let state = JointState(DMatrix::from_row_slice(d, d, &amplitudes));
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Row-major amplitudes, Bob index first.
    pub fn amplitudes(&self) -> Vec<Complex64> {
        let d = self.dim();
        (0..d * d).map(|i| self.0[(i / d, i % d)]).collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn inner(&self, other: &JointState) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn fidelity(&self, other: &JointState) -> f64 {
        self.inner(other).norm_sqr()
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome<S> {
    pub outcome: GfElement,
    pub probability: f64,
    pub post_state: S,
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_basis(tab: &MubTable, k: usize) -> Result<()> {
    if k >= tab.len() {
        return Err(Error::IndexOutOfRange {
            what: "basis index",
            value: k as u64,
            min: 0,
            max: tab.dim() as u64,
        });
    }
    Ok(())
}

pub fn apply(op: &Operator, s: &QuditState) -> Result<QuditState> {
    check_dim(op.dim(), s.dim())?;
    Ok(QuditState(op.matrix() * &s.0))
}

pub fn apply_local(op: &Operator, which: Subsystem, s: &JointState) -> Result<JointState> {
    check_dim(op.dim(), s.dim())?;
    let out = match which {
        Subsystem::Bob => op.matrix() * &s.0,
        Subsystem::Eve => &s.0 * op.matrix().transpose(),
    };
    Ok(JointState(out))
}

/// Born probabilities of each outcome `t` when measuring in basis `k`.
pub fn basis_probabilities(s: &QuditState, tab: &MubTable, k: usize) -> Result<Vec<f64>> {
    check_dim(tab.dim(), s.dim())?;
    check_basis(tab, k)?;
    let coords = tab.basis_matrix(k).ad_mul(&s.0);
    Ok(coords.iter().map(|c| c.norm_sqr()).collect())
}

/// Draws an index from unnormalized weights.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last_nonzero = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_nonzero = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last_nonzero
}

/// Projective measurement in basis `k`; the post-state is the projected,
/// renormalized vector (it keeps the phase of `⟨v^k_t|s⟩`).
pub fn measure_in_basis<R: Rng + ?Sized>(
    s: &QuditState,
    tab: &MubTable,
    k: usize,
    rng: &mut R,
) -> Result<MeasurementOutcome<QuditState>> {
    check_dim(tab.dim(), s.dim())?;
    check_basis(tab, k)?;
    let coords = tab.basis_matrix(k).ad_mul(&s.0);
    let probs: Vec<f64> = coords.iter().map(|c| c.norm_sqr()).collect();
    let t = sample_index(&probs, rng);
    let amp = coords[t];
    let phase = amp / amp.norm();
    let post = tab.basis_matrix(k).column(t) * phase;
    Ok(MeasurementOutcome {
        outcome: GfElement::from_label(t as u32),
        probability: probs[t],
        post_state: QuditState(post),
    })
}

/// Probabilities of measuring one half of a joint state in basis `k`.
pub fn subsystem_probabilities(
    s: &JointState,
    which: Subsystem,
    tab: &MubTable,
    k: usize,
) -> Result<Vec<f64>> {
    let coords = subsystem_coords(s, which, tab, k)?;
    Ok(match which {
        Subsystem::Bob => coords.row_iter().map(|r| r.norm_squared()).collect(),
        Subsystem::Eve => coords.column_iter().map(|c| c.norm_squared()).collect(),
    })
}

// Bob: (B† Ψ)[t, e]; Eve: (Ψ B̄)[b, t].
fn subsystem_coords(
    s: &JointState,
    which: Subsystem,
    tab: &MubTable,
    k: usize,
) -> Result<DMatrix<Complex64>> {
    check_dim(tab.dim(), s.dim())?;
    check_basis(tab, k)?;
    let basis = tab.basis_matrix(k);
    Ok(match which {
        Subsystem::Bob => basis.ad_mul(&s.0),
        Subsystem::Eve => &s.0 * basis.conjugate(),
    })
}

pub fn measure_subsystem<R: Rng + ?Sized>(
    s: &JointState,
    which: Subsystem,
    tab: &MubTable,
    k: usize,
    rng: &mut R,
) -> Result<MeasurementOutcome<JointState>> {
    let coords = subsystem_coords(s, which, tab, k)?;
    let basis = tab.basis_matrix(k);
    let (t, probability, post) = match which {
        Subsystem::Bob => {
            let probs: Vec<f64> = coords.row_iter().map(|r| r.norm_squared()).collect();
            let t = sample_index(&probs, rng);
            let rest = coords.row(t) / Complex64::new(probs[t].sqrt(), 0.0);
            (t, probs[t], basis.column(t) * rest)
        }
        Subsystem::Eve => {
            let probs: Vec<f64> = coords.column_iter().map(|c| c.norm_squared()).collect();
            let t = sample_index(&probs, rng);
            let rest = coords.column(t) / Complex64::new(probs[t].sqrt(), 0.0);
            (t, probs[t], rest * basis.column(t).transpose())
        }
    };
    Ok(MeasurementOutcome {
        outcome: GfElement::from_label(t as u32),
        probability,
        post_state: JointState(post),
    })
}

/// Controlled shift with Bob's qudit as control and Eve's as target, both in
/// the dual basis (`k = 1`):
///
/// * direct: `|v^1_{t1}⟩|v^1_{t2}⟩ → |v^1_{t1}⟩|v^1_{t2⊖t1}⟩`
/// * inverse: `|v^1_{t1}⟩|v^1_{t2}⟩ → |v^1_{t1}⟩|v^1_{t2⊕t1}⟩`
///
/// Applied as `(F⊗F)·P·(F⊗F)†` where `F` is the dual basis matrix and `P`
/// the label permutation.
pub fn controlled_shift(s: &JointState, tab: &MubTable, inverse: bool) -> Result<JointState> {
    check_dim(tab.dim(), s.dim())?;
    let f = tab.field();
    let dual = tab.basis_matrix(1);
    let coords = dual.ad_mul(&s.0) * dual.conjugate();
    let d = tab.dim();
    let mut shifted = DMatrix::zeros(d, d);
    for t1 in f.elements() {
        for t2 in f.elements() {
            let target = if inverse {
                f.add(t2, t1)
            } else {
                f.sub(t2, t1)
            };
            shifted[(t1.value() as usize, target.value() as usize)] =
                coords[(t1.value() as usize, t2.value() as usize)];
        }
    }
    Ok(JointState(dual * shifted * dual.transpose()))
}

/// The controlled shift as an explicit `d² × d²` unitary on row-major
/// (Bob-first) amplitudes.
pub fn controlled_shift_matrix(tab: &MubTable, inverse: bool) -> Operator {
    let d = tab.dim();
    let n = d * d;
    let mut m = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut basis = vec![Complex64::new(0.0, 0.0); n];
        basis[col] = Complex64::new(1.0, 0.0);
        let input = JointState(DMatrix::from_row_slice(d, d, &basis));
        let out = controlled_shift(&input, tab, inverse).expect("dimensions agree");
        for (row, a) in out.amplitudes().into_iter().enumerate() {
            m[(row, col)] = a;
        }
    }
    Operator::from_matrix(m)
}
