//! Generalized Pauli operators, the commuting subgroups they split into, and
//! an exhaustive numerical check of the identities that make the
//! characteristic-two square-root sign consistent.
//!
//! `V^j_l = V^j_0 · V^0_l = Σ_t ω^{(t⊕l)⊙j} |t⊕l⟩⟨t|`: a shift by `l`
//! followed by a diagonal phase. With this ordering the composition law reads
//!
//! ```text
//! V^j_l · V^{j'}_{l'} = ω^{⊖(l⊙j')} · V^{j⊕j'}_{l⊕l'}
//! ```
//!
//! (the sign of the exponent is invisible when `p = 2`).
//!
//! For `k ≥ 1` the subgroup element diagonal in basis `k` is
//! `U^k_l = (ω^{⊖(k−1)⊙l⊙l})^{1/2} · V^{(k−1)⊙l}_l`, where the root of
//! `ω^{⊖x}` is the complex conjugate of the root [`sqrt_phase`] assigns to
//! `ω^x`. The `k = 0` subgroup is the diagonal family `U^0_l = V^l_0`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::galois::{FieldSpec, GfElement};
use crate::mub::{
    basis_element, i_pow, minus_one_pow, omega_pow, sqrt_phase_with, MubTable, SignConvention,
};

/// A dense square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(DMatrix<Complex64>);

impl Operator {
    pub fn identity(d: usize) -> Self {
        Operator(DMatrix::identity(d, d))
    }

    pub fn from_matrix(m: DMatrix<Complex64>) -> Self {
        assert!(m.is_square(), "operators are square");
        Operator(m)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matmul(&self, other: &Operator) -> Operator {
        Operator(&self.0 * &other.0)
    }

    pub fn adjoint(&self) -> Operator {
        Operator(self.0.adjoint())
    }

    pub fn scale(&self, c: Complex64) -> Operator {
        Operator(&self.0 * c)
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Operator(self.0.kronecker(&other.0))
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |O·O† − I|` entrywise.
    pub fn unitarity_deviation(&self) -> f64 {
        let product = Operator(&self.0 * self.0.adjoint());
        product.max_abs_diff(&Operator::identity(self.dim()))
    }
}

/// `V^j_l`.
pub fn pauli_v(f: &FieldSpec, j: GfElement, l: GfElement) -> Operator {
    let d = f.order() as usize;
    let mut m = DMatrix::zeros(d, d);
    for t in f.elements() {
        let row = f.add(t, l);
        m[(row.value() as usize, t.value() as usize)] = omega_pow(f, f.mul(row, j));
    }
    Operator(m)
}

/// The encoding operator `V^a_0 = diag(ω^{t⊙a})`.
pub fn z_shift(f: &FieldSpec, a: GfElement) -> Operator {
    pauli_v(f, a, GfElement::ZERO)
}

/// Scalar in `V^j_l · V^{j'}_{l'} = c · V^{j⊕j'}_{l⊕l'}`.
pub fn composition_phase(f: &FieldSpec, l: GfElement, j_prime: GfElement) -> Complex64 {
    omega_pow(f, f.neg(f.mul(l, j_prime)))
}

/// `(k−1)⊙2^n⊙2^n` as an integer label.
fn diagonal_exponent(f: &FieldSpec, k: usize, n: u32) -> u32 {
    let two_n = f.monomial(n);
    f.mul3(basis_element(k), two_n, two_n).value()
}

/// `φ(k, k', l) = (−1)^{Σ_n l_n ((k−1)⊙2^n⊙2^n)((k'−1)⊙2^n⊙2^n)}`, with the
/// exponent products taken as integers. Characteristic two only.
pub fn phi(f: &FieldSpec, k: usize, k_prime: usize, l: GfElement) -> Result<i8> {
    if f.p() != 2 {
        return Err(Error::EvenCharacteristicOnly(f.p()));
    }
    let d = f.order() as usize;
    for kk in [k, k_prime] {
        if kk == 0 || kk > d {
            return Err(Error::IndexOutOfRange {
                what: "basis index",
                value: kk as u64,
                min: 1,
                max: d as u64,
            });
        }
    }
    let mut parity = 0u32;
    for n in 0..f.m() {
        let ln = f.digit(l, n);
        parity ^= ln & diagonal_exponent(f, k, n) & diagonal_exponent(f, k_prime, n) & 1;
    }
    Ok(if parity == 0 { 1 } else { -1 })
}

/// `U^k_l`.
pub fn u_operator(f: &FieldSpec, k: usize, l: GfElement) -> Result<Operator> {
    u_operator_with(f, k, l, SignConvention::Corrected)
}

pub fn u_operator_with(
    f: &FieldSpec,
    k: usize,
    l: GfElement,
    convention: SignConvention,
) -> Result<Operator> {
    let d = f.order() as usize;
    if k > d {
        return Err(Error::IndexOutOfRange {
            what: "basis index",
            value: k as u64,
            min: 0,
            max: d as u64,
        });
    }
    f.element(l.value() as u64)?;
    if k == 0 {
        return Ok(pauli_v(f, l, GfElement::ZERO));
    }
    let phase = sqrt_phase_with(f, k, l, convention)?.conj();
    Ok(pauli_v(f, f.mul(basis_element(k), l), l).scale(phase))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    pub max_deviation: Option<f64>,
    pub cases: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AppendixReport {
    pub p: u32,
    pub m: u32,
    pub d: u32,
    pub tol: f64,
    pub convention: SignConvention,
    pub passed: bool,
    pub checks: Vec<IdentityCheck>,
}

impl AppendixReport {
    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }
}

struct Sweep {
    tol: f64,
    checks: Vec<IdentityCheck>,
}

impl Sweep {
    fn record(&mut self, name: &'static str, max_deviation: f64, cases: u64) {
        let status = if max_deviation <= self.tol {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        self.checks.push(IdentityCheck {
            name,
            status,
            max_deviation: Some(max_deviation),
            cases,
            note: None,
        });
    }

    fn skip(&mut self, name: &'static str, note: &'static str) {
        self.checks.push(IdentityCheck {
            name,
            status: CheckStatus::Skipped,
            max_deviation: None,
            cases: 0,
            note: Some(note),
        });
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

/// Runs every identity exhaustively over all index combinations for `f`.
pub fn verify_appendix(f: &FieldSpec, tol: f64) -> Result<AppendixReport> {
    verify_appendix_with(f, tol, SignConvention::Corrected)
}

pub fn verify_appendix_with(
    f: &FieldSpec,
    tol: f64,
    convention: SignConvention,
) -> Result<AppendixReport> {
    let d = f.order() as usize;
    let du = d as u64;
    let els: Vec<GfElement> = f.elements().collect();
    let tab = MubTable::build_with(f, convention);
    let sq = |k: usize, q: GfElement| sqrt_phase_with(f, k, q, convention).expect("k in 1..=d");
    let mut sweep = Sweep {
        tol,
        checks: Vec::new(),
    };

    // ω^j ω^l = ω^{j⊕l}
    let dev = max_of(els.iter().flat_map(|&j| {
        els.iter()
            .map(move |&l| (omega_pow(f, j) * omega_pow(f, l) - omega_pow(f, f.add(j, l))).norm())
    }));
    sweep.record("omega_additivity", dev, du * du);

    // Σ_j ω^{j⊙l} = d δ_{l,0}
    let dev = max_of(els.iter().map(|&l| {
        let sum: Complex64 = els.iter().map(|&j| omega_pow(f, f.mul(j, l))).sum();
        let want = if l.is_zero() { d as f64 } else { 0.0 };
        (sum - want).norm()
    }));
    sweep.record("character_sum", dev, du);

    // V^j_l · V^{j'}_{l'} = ω^{⊖ l⊙j'} V^{j⊕j'}_{l⊕l'}
    let v: Vec<Operator> = els
        .iter()
        .flat_map(|&j| els.iter().map(move |&l| pauli_v(f, j, l)))
        .collect();
    let v_at = |j: GfElement, l: GfElement| &v[j.value() as usize * d + l.value() as usize];
    let dev = els
        .par_iter()
        .map(|&j| {
            let mut worst: f64 = 0.0;
            for &l in &els {
                for &j2 in &els {
                    for &l2 in &els {
                        let lhs = v_at(j, l).matmul(v_at(j2, l2));
                        let rhs =
                            v_at(f.add(j, j2), f.add(l, l2)).scale(composition_phase(f, l, j2));
                        worst = worst.max(lhs.max_abs_diff(&rhs));
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    sweep.record("composition_law", dev, du.pow(4));

    let u: Vec<Vec<Operator>> = (0..=d)
        .map(|k| {
            els.iter()
                .map(|&l| u_operator_with(f, k, l, convention))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let dev = max_of(
        v.iter()
            .chain(u.iter().flatten())
            .map(Operator::unitarity_deviation),
    );
    sweep.record("unitarity", dev, du * du + (du + 1) * du);

    // U^k_l U^k_{l'} = U^k_{l⊕l'}
    let dev = (0..=d)
        .into_par_iter()
        .map(|k| {
            let mut worst: f64 = 0.0;
            for &l in &els {
                for &l2 in &els {
                    let lhs = u[k][l.value() as usize].matmul(&u[k][l2.value() as usize]);
                    worst = worst.max(lhs.max_abs_diff(&u[k][f.add(l, l2).value() as usize]));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    sweep.record("subgroup_law", dev, (du + 1) * du * du);

    // U^k_l = Σ_t ω^{t⊙l} |v^k_t⟩⟨v^k_t|
    let dev = max_of((0..=d).flat_map(|k| {
        let basis = tab.basis_matrix(k);
        let u = &u;
        els.iter().map(move |&l| {
            let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                d,
                f.elements().map(|t| omega_pow(f, f.mul(t, l))),
            ));
            let spectral = Operator::from_matrix(basis * phases * basis.adjoint());
            u[k][l.value() as usize].max_abs_diff(&spectral)
        })
    }));
    sweep.record("diagonal_form", dev, (du + 1) * du);

    // U^k_l ∝ V^{(k−1)⊙l}_l with unit-modulus scalar, equal at l = 0
    let dev = max_of((1..=d).flat_map(|k| {
        let u = &u;
        els.iter().map(move |&l| {
            let ratio =
                u[k][l.value() as usize].matmul(&v_at(f.mul(basis_element(k), l), l).adjoint());
            let c = ratio.matrix()[(0, 0)];
            let scalar_dev = ratio.max_abs_diff(&Operator::identity(d).scale(c));
            let modulus_dev = (c.norm() - 1.0).abs();
            let identity_dev = if l.is_zero() { (c - 1.0).norm() } else { 0.0 };
            scalar_dev.max(modulus_dev).max(identity_dev)
        })
    }));
    sweep.record("phase_at_identity", dev, du * du);

    // (ω^{a})^{1/2} squared gives ω^{a} back
    let dev = max_of((1..=d).flat_map(|k| {
        els.iter().map(move |&q| {
            let s = sq(k, q);
            (s * s - omega_pow(f, f.mul3(basis_element(k), q, q))).norm()
        })
    }));
    sweep.record("sqrt_squares", dev, du * du);

    // (ω^{(k−1)qq})^{1/2} (ω^{(k−1)q'q'})^{1/2} = ω^{(k−1)qq'} (ω^{(k−1)(q⊕q')(q⊕q')})^{1/2}
    // For odd p the cross term belongs on the left; for p = 2 it is ±1 and
    // both forms agree.
    let all = els.as_slice();
    let odd = f.p() != 2;
    let dev = max_of((1..=d).flat_map(|k| {
        all.iter().flat_map(move |&q| {
            all.iter().map(move |&q2| {
                let cross = omega_pow(f, f.mul3(basis_element(k), q, q2));
                let pair = sq(k, q) * sq(k, q2);
                let joint = sq(k, f.add(q, q2));
                if odd {
                    (pair * cross - joint).norm()
                } else {
                    (pair - cross * joint).norm()
                }
            })
        })
    }));
    sweep.record("sqrt_product", dev, du * du * du);

    if f.p() == 2 {
        verify_even_identities(f, &tab, &sq, &mut sweep)?;
    } else {
        const NOTE: &str = "skipped (odd p)";
        for name in [
            "i_power_law",
            "sqrt_sign_rewrite",
            "phi_product",
            "phi_properties",
        ] {
            sweep.skip(name, NOTE);
        }
        verify_odd_inner_products(f, &tab, &mut sweep);
    }

    let passed = sweep.checks.iter().all(|c| c.status != CheckStatus::Fail);
    Ok(AppendixReport {
        p: f.p(),
        m: f.m(),
        d: f.order(),
        tol,
        convention,
        passed,
        checks: sweep.checks,
    })
}

fn verify_even_identities(
    f: &FieldSpec,
    tab: &MubTable,
    sq: &dyn Fn(usize, GfElement) -> Complex64,
    sweep: &mut Sweep,
) -> Result<()> {
    let d = f.order() as usize;
    let du = d as u64;
    let els: Vec<GfElement> = f.elements().collect();
    let phi = |k, k2, l| phi(f, k, k2, l).map(|s| s as f64);

    // i^j i^l = (−1)^{j_0 l_0} i^{j⊕l}
    let dev = max_of(els.iter().flat_map(|&j| {
        els.iter().map(move |&l| {
            let sign = if f.digit(j, 0) * f.digit(l, 0) % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            (i_pow(j) * i_pow(l) - i_pow(f.add(j, l)) * sign).norm()
        })
    }));
    sweep.record("i_power_law", dev, du * du);

    // product form vs Π_n (−1)^{Σ_{h<n} q_n q_h ((k−1)⊙2^n⊙2^h)} i^{q_n (k−1)⊙2^n⊙2^n}
    let mut dev: f64 = 0.0;
    for k in 1..=d {
        for &q in &els {
            let mut rewritten = Complex64::new(1.0, 0.0);
            for n in 0..f.m() {
                let qn = f.digit(q, n);
                for h in 0..n {
                    let cross = f.mul3(basis_element(k), f.monomial(n), f.monomial(h));
                    if qn * f.digit(q, h) == 1 {
                        rewritten *= minus_one_pow(cross);
                    }
                }
                if qn == 1 {
                    rewritten *= i_pow(GfElement::from_label(diagonal_exponent(f, k, n)));
                }
            }
            dev = dev.max((sq(k, q) - rewritten).norm());
        }
    }
    sweep.record("sqrt_sign_rewrite", dev, du * du);

    // (ω^{(k−1)ll})^{1/2} (ω^{(k'−1)ll})^{1/2} = φ(k,k',l) (ω^{((k−1)⊕(k'−1))ll})^{1/2}
    let mut dev: f64 = 0.0;
    for k in 1..=d {
        for k2 in 1..=d {
            let sum_k = f.add(basis_element(k), basis_element(k2)).value() as usize + 1;
            for &l in &els {
                let lhs = sq(k, l) * sq(k2, l);
                dev = dev.max((lhs - sq(sum_k, l) * phi(k, k2, l)?).norm());
            }
        }
    }
    sweep.record("phi_product", dev, du * du * du);

    // φ(k,k',0) = 1; φ symmetric; φ(q)φ(q') = φ(q⊕q'); φ(k,k,q) = ω^{(k−1)qq}
    let mut dev: f64 = 0.0;
    for k in 1..=d {
        dev = dev.max((phi(k, k, GfElement::ZERO)? - 1.0).abs());
        for &q in &els {
            let want = omega_pow(f, f.mul3(basis_element(k), q, q));
            dev = dev.max((want - phi(k, k, q)?).norm());
        }
        for k2 in 1..=d {
            dev = dev.max((phi(k, k2, GfElement::ZERO)? - 1.0).abs());
            for &q in &els {
                let pq = phi(k, k2, q)?;
                dev = dev.max((pq - phi(k2, k, q)?).abs());
                for &q2 in &els {
                    dev = dev.max((pq * phi(k, k2, q2)? - phi(k, k2, f.add(q, q2))?).abs());
                }
            }
        }
    }
    sweep.record("phi_properties", dev, du * du * du * du);

    // ⟨v^{k'}_{t'}|v^k_t⟩ = (1/d) Σ_q φ(k,k',q) φ(k',k',q) ω^{q⊙(t⊕t')} (ω^{((k−1)⊕(k'−1))qq})^{1/2}
    let mut expansion_dev: f64 = 0.0;
    let mut condition_dev: f64 = 0.0;
    for k in 1..=d {
        for k2 in 1..=d {
            let sum_k = f.add(basis_element(k), basis_element(k2)).value() as usize + 1;
            let weights: Vec<Complex64> = els
                .iter()
                .map(|&q| Ok(sq(sum_k, q) * phi(k, k2, q)? * phi(k2, k2, q)?))
                .collect::<Result<_>>()?;
            for &t in &els {
                for &t2 in &els {
                    let formula: Complex64 = els
                        .iter()
                        .zip(&weights)
                        .map(|(&q, w)| w * omega_pow(f, f.mul(q, f.add(t, t2))))
                        .sum::<Complex64>()
                        / d as f64;
                    let direct = tab.vector(k2, t2).inner(tab.vector(k, t));
                    expansion_dev = expansion_dev.max((formula - direct).norm());
                    condition_dev = condition_dev.max(mub_condition_dev(d, k, k2, t, t2, formula));
                }
            }
        }
    }
    sweep.record("inner_product_expansion", expansion_dev, du.pow(4));
    sweep.record("mub_condition", condition_dev, du.pow(4));
    Ok(())
}

fn mub_condition_dev(
    d: usize,
    k: usize,
    k2: usize,
    t: GfElement,
    t2: GfElement,
    ip: Complex64,
) -> f64 {
    let target = if k != k2 {
        1.0 / (d as f64).sqrt()
    } else if t == t2 {
        1.0
    } else {
        0.0
    };
    (ip.norm() - target).abs()
}

// ⟨v^{k'}_{t'}|v^k_t⟩ = (1/d) Σ_q ω^{q⊙(t'⊖t)} ω^{(((k−1)⊖(k'−1))⊙q⊙q) ⊘ 2}
fn verify_odd_inner_products(f: &FieldSpec, tab: &MubTable, sweep: &mut Sweep) {
    let d = f.order() as usize;
    let du = d as u64;
    let els: Vec<GfElement> = f.elements().collect();
    let mut expansion_dev: f64 = 0.0;
    let mut condition_dev: f64 = 0.0;
    for k in 1..=d {
        for k2 in 1..=d {
            let diff = f.sub(basis_element(k), basis_element(k2));
            let weights: Vec<Complex64> = els
                .iter()
                .map(|&q| omega_pow(f, f.half(f.mul3(diff, q, q)).expect("odd p")))
                .collect();
            for &t in &els {
                for &t2 in &els {
                    let formula: Complex64 = els
                        .iter()
                        .zip(&weights)
                        .map(|(&q, w)| w * omega_pow(f, f.mul(q, f.sub(t2, t))))
                        .sum::<Complex64>()
                        / d as f64;
                    let direct = tab.vector(k2, t2).inner(tab.vector(k, t));
                    expansion_dev = expansion_dev.max((formula - direct).norm());
                    condition_dev = condition_dev.max(mub_condition_dev(d, k, k2, t, t2, formula));
                }
            }
        }
    }
    sweep.record("inner_product_expansion", expansion_dev, du.pow(4));
    sweep.record("mub_condition", condition_dev, du.pow(4));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mub::{mub_vector, root_of_unity};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn field(d: u64) -> FieldSpec {
        FieldSpec::with_order(d).unwrap()
    }

    #[test]
    fn v00_is_identity() {
        for d in [2, 3, 4, 9] {
            let f = field(d);
            assert_eq!(
                pauli_v(&f, GfElement::ZERO, GfElement::ZERO),
                Operator::identity(d as usize)
            );
        }
    }

    #[test]
    fn qubit_z_and_x() {
        let f = field(2);
        let z = pauli_v(&f, GfElement::ONE, GfElement::ZERO);
        let x = pauli_v(&f, GfElement::ZERO, GfElement::ONE);
        let zm =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let xm =
            DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(z.matrix(), &zm);
        assert_eq!(x.matrix(), &xm);
    }

    #[test]
    fn z_shift_examples() {
        let f = field(3);
        assert_eq!(z_shift(&f, GfElement::ZERO), Operator::identity(3));
        let w = root_of_unity(3);
        let z = z_shift(&f, GfElement::ONE);
        for (t, want) in [c(1.0, 0.0), w, w * w].into_iter().enumerate() {
            assert!((z.matrix()[(t, t)] - want).norm() < 1e-15);
        }
        assert_eq!(
            z_shift(&f, GfElement::ONE),
            pauli_v(&f, GfElement::ONE, GfElement::ZERO)
        );
    }

    #[test]
    fn composition_law_small_exhaustive() {
        for d in [2, 3, 4, 5, 7, 8, 9, 16] {
            let f = field(d);
            let step = if d == 16 { 5 } else { 1 };
            for j in f.elements() {
                for l in f.elements().step_by(step) {
                    for j2 in f.elements().step_by(step) {
                        for l2 in f.elements() {
                            let lhs = pauli_v(&f, j, l).matmul(&pauli_v(&f, j2, l2));
                            let rhs = pauli_v(&f, f.add(j, j2), f.add(l, l2))
                                .scale(composition_phase(&f, l, j2));
                            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn positive_exponent_composition_fails_for_odd_p() {
        // the literal ω^{l⊙j'} form only holds in characteristic two
        let f = field(3);
        let (l, j2) = (GfElement::ONE, GfElement::ONE);
        let lhs = pauli_v(&f, GfElement::ZERO, l).matmul(&pauli_v(&f, j2, GfElement::ZERO));
        let rhs = pauli_v(&f, j2, l).scale(omega_pow(&f, f.mul(l, j2)));
        assert!(lhs.max_abs_diff(&rhs) > 1.0);
    }

    #[test]
    fn phi_errors_and_values() {
        assert!(matches!(
            phi(&field(3), 1, 1, GfElement::ZERO),
            Err(Error::EvenCharacteristicOnly(3))
        ));
        let f = field(8);
        assert!(phi(&f, 0, 1, GfElement::ONE).is_err());
        for k in 1..=8 {
            for k2 in 1..=8 {
                assert_eq!(phi(&f, k, k2, GfElement::ZERO).unwrap(), 1);
            }
        }
        // d=2: φ(2,2,1) = (−1)^{1·1·1}
        assert_eq!(phi(&field(2), 2, 2, GfElement::ONE).unwrap(), -1);
    }

    #[test]
    fn u_identity_at_zero() {
        for d in [2, 3, 4, 5, 8] {
            let f = field(d);
            for k in 0..=d as usize {
                let u = u_operator(&f, k, GfElement::ZERO).unwrap();
                assert!(u.max_abs_diff(&Operator::identity(d as usize)) < 1e-15);
            }
        }
    }

    #[test]
    fn u_is_diagonal_in_its_basis() {
        for d in [2, 3, 4, 8, 9] {
            let f = field(d);
            for k in 0..=d as usize {
                for l in f.elements() {
                    let u = u_operator(&f, k, l).unwrap();
                    for t in f.elements() {
                        let v = mub_vector(&f, k, t).unwrap();
                        let uv = u.matrix() * v.as_vector();
                        let want = v.as_vector() * omega_pow(&f, f.mul(t, l));
                        assert!((uv - want).norm() < 1e-12, "d={d} k={k} l={l} t={t}");
                    }
                }
            }
        }
    }

    #[test]
    fn u_operator_range() {
        let f = field(4);
        assert!(u_operator(&f, 5, GfElement::ONE).is_err());
        assert!(u_operator(&f, 1, GfElement::from_label(4)).is_err());
    }

    #[test]
    fn appendix_suite_small_dimensions() {
        for (d, tol) in [(2, 1e-12), (3, 1e-12), (4, 1e-9), (5, 1e-9)] {
            let report = verify_appendix(&field(d), tol).unwrap();
            let failures: Vec<_> = report.failures().collect();
            assert!(report.passed, "d={d}: {failures:?}");
        }
    }

    #[test]
    fn odd_dimension_skips_phi() {
        let report = verify_appendix(&field(3), 1e-9).unwrap();
        for name in [
            "phi_product",
            "phi_properties",
            "i_power_law",
            "sqrt_sign_rewrite",
        ] {
            let check = report.check(name).unwrap();
            assert_eq!(check.status, CheckStatus::Skipped);
            assert_eq!(check.note, Some("skipped (odd p)"));
        }
        assert_eq!(
            report.check("composition_law").unwrap().status,
            CheckStatus::Pass
        );
    }

    #[test]
    fn uncorrected_sign_fails_subgroup_law() {
        for d in [4, 8] {
            let report =
                verify_appendix_with(&field(d), 1e-9, SignConvention::Uncorrected).unwrap();
            assert!(!report.passed);
            let subgroup = report.check("subgroup_law").unwrap();
            let diagonal = report.check("diagonal_form").unwrap();
            assert!(
                subgroup.status == CheckStatus::Fail || diagonal.status == CheckStatus::Fail,
                "d={d}"
            );
        }
    }

    #[test]
    fn report_serializes() {
        let report = verify_appendix(&field(2), 1e-12).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["passed"], serde_json::json!(true));
        assert_eq!(json["checks"][0]["name"], "omega_additivity");
        assert_eq!(json["checks"][0]["status"], "pass");
    }
}
