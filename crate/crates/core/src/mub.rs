//! Complete sets of `d + 1` mutually unbiased bases in prime-power dimension.
//!
//! Basis `k = 0` is the computational basis. For `k = 1..=d` the vector
//! `|v^k_t⟩` has amplitude
//!
//! ```text
//! (1/√d) · ω^{⊖q⊙t} · (ω^{(k−1)⊙q⊙q})^{1/2}
//! ```
//!
//! at computational index `q`, with `ω = e^{2πi/p}` and the field operations
//! taken in GF(p^m). In odd characteristic the square root is `ω` raised to
//! the exponent halved in the field. In characteristic two the root is a
//! fourth root of unity and its sign has to be fixed explicitly; see
//! [`sqrt_phase`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::galois::{FieldSpec, GfElement};
use crate::qstate::QuditState;

/// How the characteristic-two square-root sign is determined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// `Π_{n: q_n≠0} i^{(k−1)⊙2^n⊙2^n} · ω^{(k−1)⊙2^n⊙(q mod 2^n)}`.
    #[default]
    Corrected,
    /// Drops the `ω` cross factors, keeping only the `i` powers. This does not
    /// produce mutually unbiased bases for `d ≥ 4` and exists as a negative
    /// control.
    Uncorrected,
}

/// `ω = e^{2πi/p}`.
pub fn root_of_unity(p: u32) -> Complex64 {
    unit_phase(1, p)
}

/// `e^{2πi·r/n}`, exact for the quarter turns.
fn unit_phase(r: u32, n: u32) -> Complex64 {
    let r = r % n;
    if r == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if 2 * r == n {
        return Complex64::new(-1.0, 0.0);
    }
    if 4 * r == n {
        return Complex64::new(0.0, 1.0);
    }
    if 4 * r == 3 * n {
        return Complex64::new(0.0, -1.0);
    }
    Complex64::from_polar(1.0, 2.0 * PI * r as f64 / n as f64)
}

/// `ω^g`, which only depends on the low digit `g_0 = g mod p`.
pub fn omega_pow(f: &FieldSpec, g: GfElement) -> Complex64 {
    unit_phase(f.digit(g, 0), f.p())
}

/// `i^g` for a characteristic-two exponent, using the integer label mod 4.
pub fn i_pow(g: GfElement) -> Complex64 {
    unit_phase(g.value() % 4, 4)
}

/// `(−1)^g`, i.e. `ω^g` at `p = 2`: the parity of the low digit.
pub fn minus_one_pow(g: GfElement) -> f64 {
    if g.value().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn check_basis(f: &FieldSpec, k: usize, allow_zero: bool) -> Result<()> {
    let d = f.order() as usize;
    if k > d || (!allow_zero && k == 0) {
        return Err(Error::IndexOutOfRange {
            what: "basis index",
            value: k as u64,
            min: if allow_zero { 0 } else { 1 },
            max: d as u64,
        });
    }
    Ok(())
}

/// `(k − 1)` as a field element, for `k` in `1..=d`.
pub(crate) fn basis_element(k: usize) -> GfElement {
    GfElement::from_label(k as u32 - 1)
}

/// The square root `(ω^{(k−1)⊙q⊙q})^{1/2}` used in basis `k ≥ 1`.
///
/// For odd `p` this is `ω^{((k−1)⊙q⊙q) ⊘ 2}`. For `p = 2`, `i`-powers take
/// the integer label of the exponent mod 4 and `ω = −1` powers take its low
/// digit; `(q mod 2^n)` is the label truncated to its low `n` bits.
pub fn sqrt_phase(f: &FieldSpec, k: usize, q: GfElement) -> Result<Complex64> {
    sqrt_phase_with(f, k, q, SignConvention::Corrected)
}

pub fn sqrt_phase_with(
    f: &FieldSpec,
    k: usize,
    q: GfElement,
    convention: SignConvention,
) -> Result<Complex64> {
    check_basis(f, k, false)?;
    f.element(q.value() as u64)?;
    let km1 = basis_element(k);
    if f.p() != 2 {
        let exponent = f.half(f.mul3(km1, q, q))?;
        return Ok(omega_pow(f, exponent));
    }
    let mut phase = Complex64::new(1.0, 0.0);
    for n in 0..f.m() {
        if f.digit(q, n) == 0 {
            continue;
        }
        let two_n = f.monomial(n);
        phase *= i_pow(f.mul3(km1, two_n, two_n));
        if convention == SignConvention::Corrected {
            let low_bits = GfElement::from_label(q.value() % (1 << n));
            phase *= minus_one_pow(f.mul3(km1, two_n, low_bits));
        }
    }
    Ok(phase)
}

/// The vector `|v^k_t⟩` in computational coordinates.
pub fn mub_vector(f: &FieldSpec, k: usize, t: GfElement) -> Result<QuditState> {
    mub_vector_with(f, k, t, SignConvention::Corrected)
}

pub fn mub_vector_with(
    f: &FieldSpec,
    k: usize,
    t: GfElement,
    convention: SignConvention,
) -> Result<QuditState> {
    check_basis(f, k, true)?;
    f.element(t.value() as u64)?;
    let d = f.order() as usize;
    if k == 0 {
        return Ok(QuditState::basis_state(d, t.value() as usize));
    }
    let norm = 1.0 / (d as f64).sqrt();
    let amplitudes = f
        .elements()
        .map(|q| {
            let phase = omega_pow(f, f.mul(f.neg(q), t)) * sqrt_phase_with(f, k, q, convention)?;
            Ok(phase * norm)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuditState::from_amplitudes_unchecked(amplitudes))
}

/// All `d + 1` bases, indexed `[k][t]`.
#[derive(Clone, Debug)]
pub struct MubTable {
    field: FieldSpec,
    convention: SignConvention,
    bases: Vec<Vec<QuditState>>,
    // column t of matrices[k] is |v^k_t⟩
    matrices: Vec<DMatrix<Complex64>>,
}

/// Result of checking the unbiasedness condition over every vector pair.
#[derive(Clone, Debug, Serialize)]
pub struct MubReport {
    pub p: u32,
    pub m: u32,
    pub d: u32,
    pub max_deviation: f64,
    pub tol: f64,
    pub pairs_checked: u64,
    pub passed: bool,
}

impl MubTable {
    pub fn build(field: &FieldSpec) -> Self {
        Self::build_with(field, SignConvention::Corrected)
    }

    pub fn build_with(field: &FieldSpec, convention: SignConvention) -> Self {
        let d = field.order() as usize;
        let bases: Vec<Vec<QuditState>> = (0..=d)
            .map(|k| {
                field
                    .elements()
                    .map(|t| mub_vector_with(field, k, t, convention).expect("indices in range"))
                    .collect()
            })
            .collect();
        let matrices = bases
            .iter()
            .map(|basis| DMatrix::from_fn(d, d, |q, t| basis[t].amplitudes()[q]))
            .collect();
        MubTable {
            field: field.clone(),
            convention,
            bases,
            matrices,
        }
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn convention(&self) -> SignConvention {
        self.convention
    }

    pub fn dim(&self) -> usize {
        self.field.order() as usize
    }

    /// Number of bases, `d + 1`.
    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn basis(&self, k: usize) -> &[QuditState] {
        &self.bases[k]
    }

    pub fn vector(&self, k: usize, t: GfElement) -> &QuditState {
        &self.bases[k][t.value() as usize]
    }

    /// Matrix whose column `t` is `|v^k_t⟩`.
    pub fn basis_matrix(&self, k: usize) -> &DMatrix<Complex64> {
        &self.matrices[k]
    }

    /// Maximum over all vector pairs of `| |⟨v^k_t|v^{k'}_{t'}⟩| − target |`,
    /// where the target is `1/√d` across bases and `δ_{t,t'}` within one.
    pub fn max_deviation(&self) -> f64 {
        let d = self.dim();
        let unbiased = 1.0 / (d as f64).sqrt();
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            for k2 in k..self.len() {
                let gram = self.matrices[k].adjoint() * &self.matrices[k2];
                for t in 0..d {
                    for t2 in 0..d {
                        let target = match (k == k2, t == t2) {
                            (false, _) => unbiased,
                            (true, true) => 1.0,
                            (true, false) => 0.0,
                        };
                        worst = worst.max((gram[(t, t2)].norm() - target).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn verify(&self, tol: f64) -> MubReport {
        let n = (self.len() * self.dim()) as u64;
        let max_deviation = self.max_deviation();
        MubReport {
            p: self.field.p(),
            m: self.field.m(),
            d: self.field.order(),
            max_deviation,
            tol,
            pairs_checked: n * (n + 1) / 2,
            passed: max_deviation <= tol,
        }
    }

    /// Export as `{p, m, d, reduction_poly, bases: [[[re, im], …], …]}`.
    pub fn to_export(&self) -> MubExport {
        MubExport {
            p: self.field.p(),
            m: self.field.m(),
            d: self.field.order(),
            reduction_poly: self.field.reduction_poly().to_vec(),
            bases: self
                .bases
                .iter()
                .map(|basis| {
                    basis
                        .iter()
                        .map(|v| v.amplitudes().iter().map(|a| [a.re, a.im]).collect())
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MubExport {
    pub p: u32,
    pub m: u32,
    pub d: u32,
    pub reduction_poly: Vec<u32>,
    pub bases: Vec<Vec<Vec<[f64; 2]>>>,
}
