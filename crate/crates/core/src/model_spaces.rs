//! Weighted bilateral sequence spaces and their shifts.
//!
//! Four weight families realize the model spaces as weighted `ℓ²(ℤ)`:
//!
//! | kind           | `n ≥ 0`              | `n ≤ −1`                  |
//! |----------------|----------------------|---------------------------|
//! | `Ell2R`        | `1/(1−r²)`           | `r^{−2n−2}/(1−r²)`        |
//! | `Ell2RMinus`   | `(1−r²)/r^{2n}`      | `1−r²`                    |
//! | `Ell2A`        | `1/(1+a²r^{−2n−2})`  | same                      |
//! | `Ell2ADual`    | `1+a²r^{2n}`         | same                      |
//!
//! `Ell2R` is the coefficient space of `H²_r(𝔹,E)` after the reindexing
//! `m = −n−1`, on which the model operator is the backward shift. `Ell2A`
//! carries coefficients in the natural Laurent order, where the model
//! operator is the forward shift.
//!
//! All sequence operations are exact finite sums: there are no truncation
//! parameters.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::alpha_class::{check_radius, OperatorInstance};
use crate::error::{invalid, Error, Result};
use crate::linalg::{c, cr, CMatrix, CVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    #[serde(rename = "ell2_r")]
    Ell2R,
    #[serde(rename = "ell2_r_minus")]
    Ell2RMinus,
    #[serde(rename = "ell2_a")]
    Ell2A,
    #[serde(rename = "ell2_a_dual")]
    Ell2ADual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFamily {
    pub kind: WeightKind,
    pub r: f64,
    /// Only used by the `a` families.
    pub a: f64,
}

/// `ln(1 + eᵗ)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl WeightFamily {
    pub fn new(kind: WeightKind, r: f64, a: f64) -> Result<Self> {
        check_radius(r, "r")?;
        if matches!(kind, WeightKind::Ell2A | WeightKind::Ell2ADual) && !(a > 0.0 && a.is_finite()) {
            return Err(invalid(format!("a must be positive, got {a}")));
        }
        Ok(Self { kind, r, a })
    }

    pub fn ell2_r(r: f64) -> Self {
        Self::new(WeightKind::Ell2R, r, 1.0).expect("valid radius")
    }

    pub fn ell2_r_minus(r: f64) -> Self {
        Self::new(WeightKind::Ell2RMinus, r, 1.0).expect("valid radius")
    }

    pub fn ell2_a(r: f64, a: f64) -> Self {
        Self::new(WeightKind::Ell2A, r, a).expect("valid parameters")
    }

    pub fn ell2_a_dual(r: f64, a: f64) -> Self {
        Self::new(WeightKind::Ell2ADual, r, a).expect("valid parameters")
    }

    /// Natural logarithm of the weight at index `n`.
    pub fn ln_weight(&self, n: i64) -> f64 {
        let lr = self.r.ln();
        let l1 = (1.0 - self.r * self.r).ln();
        let nf = n as f64;
        match self.kind {
            WeightKind::Ell2R => {
                if n >= 0 {
                    -l1
                } else {
                    (-2.0 * nf - 2.0) * lr - l1
                }
            }
            WeightKind::Ell2RMinus => {
                if n >= 0 {
                    l1 - 2.0 * nf * lr
                } else {
                    l1
                }
            }
            WeightKind::Ell2A => -softplus(2.0 * self.a.ln() - (2.0 * nf + 2.0) * lr),
            WeightKind::Ell2ADual => softplus(2.0 * self.a.ln() + 2.0 * nf * lr),
        }
    }

    pub fn weight(&self, n: i64) -> f64 {
        match self.kind {
            // Direct evaluation keeps these exact in the common range.
            WeightKind::Ell2R => {
                let s = 1.0 / (1.0 - self.r * self.r);
                if n >= 0 {
                    s
                } else {
                    s * self.r.powi((-2 * n - 2) as i32)
                }
            }
            WeightKind::Ell2RMinus => {
                let s = 1.0 - self.r * self.r;
                if n >= 0 {
                    s / self.r.powi((2 * n) as i32)
                } else {
                    s
                }
            }
            WeightKind::Ell2A => 1.0 / (1.0 + self.a * self.a * self.r.powi((-2 * n - 2) as i32)),
            WeightKind::Ell2ADual => 1.0 + self.a * self.a * self.r.powi((2 * n) as i32),
        }
    }
}

/// Weight of `zⁿ` in `H²_r(𝔹,E)` in Laurent order: `r^{2n}/(1−r²)` for
/// `n ≥ 0`, `1/(1−r²)` for `n ≤ −1`.
pub fn h2r_laurent_ln_weight(r: f64, n: i64) -> f64 {
    WeightFamily::ell2_r(r).ln_weight(-n - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `gₙ = fₙ₋₁`
    Forward,
    /// `gₙ = fₙ₊₁`
    Backward,
}

impl Direction {
    fn offset(self) -> i64 {
        match self {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }
}

/// A finitely supported bilateral sequence of vectors in `ℂ^dim_E`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqVector {
    dim_e: usize,
    terms: BTreeMap<i64, Vec<C64>>,
}

impl SeqVector {
    pub fn zero(dim_e: usize) -> Self {
        Self {
            dim_e,
            terms: BTreeMap::new(),
        }
    }

    /// Scalar unit sequence `δₙ`.
    pub fn delta(n: i64) -> Self {
        let mut s = Self::zero(1);
        s.terms.insert(n, vec![cr(1.0)]);
        s
    }

    pub fn from_terms(dim_e: usize, terms: impl IntoIterator<Item = (i64, Vec<C64>)>) -> Result<Self> {
        if dim_e == 0 {
            return Err(invalid("dim_E must be positive"));
        }
        let mut s = Self::zero(dim_e);
        for (n, v) in terms {
            s.insert(n, v)?;
        }
        Ok(s)
    }

    /// Sets the coefficient at `n`; exact zero vectors are not stored.
    pub fn insert(&mut self, n: i64, v: Vec<C64>) -> Result<()> {
        if v.len() != self.dim_e {
            return Err(Error::DimMismatch {
                expected: self.dim_e,
                found: v.len(),
            });
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("sequence coefficients must be finite"));
        }
        if v.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            self.terms.remove(&n);
        } else {
            self.terms.insert(n, v);
        }
        Ok(())
    }

    pub fn dim_e(&self) -> usize {
        self.dim_e
    }

    pub fn get(&self, n: i64) -> Option<&[C64]> {
        self.terms.get(&n).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &[C64])> {
        self.terms.iter().map(|(&n, v)| (n, v.as_slice()))
    }

    pub fn support_len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Exact reindexing by the shift in `direction`.
    pub fn shifted(&self, direction: Direction) -> Self {
        let off = direction.offset();
        Self {
            dim_e: self.dim_e,
            terms: self.terms.iter().map(|(&n, v)| (n + off, v.clone())).collect(),
        }
    }

    pub fn forward(&self) -> Self {
        self.shifted(Direction::Forward)
    }

    pub fn backward(&self) -> Self {
        self.shifted(Direction::Backward)
    }

    /// `‖f₀‖²`.
    pub fn coefficient_norm2(&self, n: i64) -> f64 {
        self.get(n).map(vec_norm2).unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sequence serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn vec_norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Serialize, Deserialize)]
struct SeqTermJson {
    n: i64,
    v: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct SeqJson {
    #[serde(rename = "dim_E")]
    dim_e: usize,
    terms: Vec<SeqTermJson>,
}

impl Serialize for SeqVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeqJson {
            dim_e: self.dim_e,
            terms: self
                .iter()
                .map(|(n, v)| SeqTermJson {
                    n,
                    v: v.iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SeqVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SeqJson::deserialize(d)?;
        let mut seen = std::collections::BTreeSet::new();
        for t in &raw.terms {
            if !seen.insert(t.n) {
                return Err(serde::de::Error::custom(format!("duplicate index {}", t.n)));
            }
        }
        SeqVector::from_terms(
            raw.dim_e,
            raw.terms
                .into_iter()
                .map(|t| (t.n, t.v.iter().map(|e| c(e[0], e[1])).collect())),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// `Σₙ weight(n)·‖fₙ‖²`.
pub fn seq_norm2(f: &SeqVector, w: &WeightFamily) -> f64 {
    f.iter().map(|(n, v)| w.weight(n) * vec_norm2(v)).sum()
}

/// `(1+ρ²)‖Sf‖² − ‖S²f‖² − ρ²‖f‖²` for the shift `S` in `direction`.
pub fn hereditary_form_on_shift(f: &SeqVector, w: &WeightFamily, direction: Direction, rho: f64) -> f64 {
    let sf = f.shifted(direction);
    let ssf = sf.shifted(direction);
    let p = rho * rho;
    (1.0 + p) * seq_norm2(&sf, w) - seq_norm2(&ssf, w) - p * seq_norm2(f, w)
}

/// Coefficient of `‖f_m‖²` in [`hereditary_form_on_shift`].
pub fn hereditary_bracket(w: &WeightFamily, direction: Direction, rho: f64, m: i64) -> f64 {
    let off = direction.offset();
    let p = rho * rho;
    (1.0 + p) * w.weight(m + off) - w.weight(m + 2 * off) - p * w.weight(m)
}

/// Closed form of the forward-shift bracket on `ell2_a` at `ρ = r`:
/// `x(P−1)²(P+1) / ((1+x)(1+xP)(1+xP²))` with `P = r²`, `x = a²r^{−2m−6}`.
pub fn ell2_a_forward_bracket(r: f64, a: f64, m: i64) -> f64 {
    let p = r * r;
    let x = a * a * r.powi((-2 * m - 6) as i32);
    x * (p - 1.0).powi(2) * (p + 1.0) / ((1.0 + x) * (1.0 + x * p) * (1.0 + x * p * p))
}

/// `Σₙ ⟨fₙ, g₋ₙ₋₁⟩_E`, linear in `f`, conjugate-linear in `g`.
pub fn duality_pairing(f: &SeqVector, g: &SeqVector) -> Result<C64> {
    if f.dim_e() != g.dim_e() {
        return Err(Error::DimMismatch {
            expected: f.dim_e(),
            found: g.dim_e(),
        });
    }
    let mut acc = c(0.0, 0.0);
    for (n, u) in f.iter() {
        if let Some(v) = g.get(-n - 1) {
            acc += u.iter().zip(v).map(|(a, b)| a * b.conj()).sum::<C64>();
        }
    }
    Ok(acc)
}

/// The space paired with `w` by [`duality_pairing`] (weights `1/w(−n−1)`)
/// and the shift on it dual to `direction`.
///
/// The pairing maps index `n` to `−n−1`, so a shift by `±1` on one side is
/// dual to the shift in the same direction on the other.
pub fn dual_shift(w: &WeightFamily, direction: Direction) -> (WeightFamily, Direction) {
    let kind = match w.kind {
        WeightKind::Ell2R => WeightKind::Ell2RMinus,
        WeightKind::Ell2RMinus => WeightKind::Ell2R,
        WeightKind::Ell2A => WeightKind::Ell2ADual,
        WeightKind::Ell2ADual => WeightKind::Ell2A,
    };
    (WeightFamily { kind, ..*w }, direction)
}

/// Squared norms of the identity map `J_a : H²_r(𝔹,E) → H²(𝔹,E,a)` and of
/// its inverse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JaNorms {
    pub norm2: f64,
    pub inv_norm2: f64,
}

/// `J_a f = f`: the coefficients are unchanged, only the norm differs.
pub fn j_a_apply(f: &SeqVector) -> SeqVector {
    f.clone()
}

fn check_ra(r: f64, a: f64) -> Result<()> {
    check_radius(r, "r")?;
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("a must be positive, got {a}")))
    }
}

/// `‖J_a‖² = (1−r²)/min{a²r⁻², 1}`, `‖J_a⁻¹‖² = (1+a²r⁻²)/(1−r²)`.
pub fn j_a_norms(r: f64, a: f64) -> Result<JaNorms> {
    check_ra(r, a)?;
    let q = a * a / (r * r);
    Ok(JaNorms {
        norm2: (1.0 - r * r) / q.min(1.0),
        inv_norm2: (1.0 + q) / (1.0 - r * r),
    })
}

/// Supremum of the basis ratios `‖zⁿ‖²_a / ‖zⁿ‖²_{H²_r}` (and the inverse
/// ratios) over `|n| ≤ window`. Both ratio sequences are monotone on each
/// half-line, so the window supremum converges to the operator norm.
pub fn j_a_norms_on_window(r: f64, a: f64, window: i64) -> Result<JaNorms> {
    check_ra(r, a)?;
    let wa = WeightFamily::ell2_a(r, a);
    let mut norm2 = 0.0f64;
    let mut inv_norm2 = 0.0f64;
    for n in -window..=window {
        let ln_ratio = wa.ln_weight(n) - h2r_laurent_ln_weight(r, n);
        norm2 = norm2.max(ln_ratio.exp());
        inv_norm2 = inv_norm2.max((-ln_ratio).exp());
    }
    Ok(JaNorms { norm2, inv_norm2 })
}

/// `K_a = ‖J_a‖·‖J_a⁻¹‖`.
pub fn k_a(r: f64, a: f64) -> Result<f64> {
    let n = j_a_norms(r, a)?;
    Ok((n.norm2 * n.inv_norm2).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMin {
    pub a: f64,
    pub k: f64,
    /// Ratio between consecutive grid points of the finest level.
    pub step_ratio: f64,
}

/// Minimizes `K_a` over a logarithmic grid on `[a_lo, a_hi]`, zooming into
/// the neighbourhood of the current argmin `levels` times.
pub fn k_a_grid_min(r: f64, a_lo: f64, a_hi: f64, points: usize, levels: usize) -> Result<GridMin> {
    check_ra(r, a_lo)?;
    check_ra(r, a_hi)?;
    if points < 3 || a_hi <= a_lo {
        return Err(invalid("grid needs at least 3 points on a non-empty interval"));
    }
    let (mut lo, mut hi) = (a_lo.ln(), a_hi.ln());
    let mut best = GridMin {
        a: f64::NAN,
        k: f64::INFINITY,
        step_ratio: f64::NAN,
    };
    for _ in 0..levels.max(1) {
        let h = (hi - lo) / (points - 1) as f64;
        let mut idx = 0;
        let mut kmin = f64::INFINITY;
        for i in 0..points {
            let a = (lo + h * i as f64).exp();
            let k = k_a(r, a)?;
            if k < kmin {
                kmin = k;
                idx = i;
            }
        }
        let center = lo + h * idx as f64;
        best = GridMin {
            a: center.exp(),
            k: kmin,
            step_ratio: h.exp(),
        };
        lo = center - h;
        hi = center + h;
    }
    Ok(best)
}

/// Finite matrix of a shift, compressed to the coordinate window
/// `[n_min, n_max]` in the orthonormal basis `δₙ/√w(n)` (tensor `I_E`).
#[derive(Clone, Debug)]
pub struct WindowCompression {
    pub matrix: CMatrix,
    pub r: f64,
    pub n_min: i64,
    pub n_max: i64,
    /// The window drops the edge column, so the compression is never
    /// invertible.
    pub boundary_defect: bool,
}

pub fn window_compression(
    w: &WeightFamily,
    direction: Direction,
    n_min: i64,
    n_max: i64,
    dim_e: usize,
) -> Result<WindowCompression> {
    if n_min > n_max {
        return Err(invalid("window requires n_min ≤ n_max"));
    }
    if dim_e == 0 {
        return Err(invalid("dim_E must be positive"));
    }
    let len = (n_max - n_min + 1) as usize;
    let mut m = CMatrix::zeros(len * dim_e, len * dim_e);
    let off = direction.offset();
    for n in n_min..=n_max {
        let target = n + off;
        if target < n_min || target > n_max {
            continue;
        }
        let entry = (w.weight(target) / w.weight(n)).sqrt();
        let col = (n - n_min) as usize;
        let row = (target - n_min) as usize;
        for e in 0..dim_e {
            m.set(row * dim_e + e, col * dim_e + e, cr(entry));
        }
    }
    Ok(WindowCompression {
        matrix: m,
        r: w.r,
        n_min,
        n_max,
        boundary_defect: true,
    })
}

/// `⟨k_λ, k_μ⟩` in `ell2_r` for the eigenvectors `(k_λ)ₙ = λⁿ` of the
/// backward shift: `1 / ((1 − λμ̄)(λμ̄ − r²))`.
pub fn shift_kernel(r: f64, lambda: C64, mu: C64) -> C64 {
    let w = lambda * mu.conj();
    cr(1.0) / ((cr(1.0) - w) * (w - cr(r * r)))
}

/// Restriction of the backward shift on `ell2_r ⊗ E` to the invariant
/// subspace spanned by `k_λ ⊗ e` for the given nodes.
#[derive(Clone, Debug)]
pub struct ShiftPart {
    pub op: OperatorInstance,
    /// `α(T*,T)` predicted by the model: the compression of `f ↦ ‖f₀‖²`.
    pub alpha_expected: CMatrix,
    pub gram_condition: f64,
}

pub fn shift_part(r: f64, nodes: &[(C64, CVector)]) -> Result<ShiftPart> {
    check_radius(r, "r")?;
    let d = nodes.len();
    if d == 0 {
        return Err(invalid("shift_part needs at least one node"));
    }
    let e_dim = nodes[0].1.len();
    for (lam, e) in nodes {
        if e.len() != e_dim {
            return Err(Error::DimMismatch {
                expected: e_dim,
                found: e.len(),
            });
        }
        let m = lam.norm();
        if !(m > r && m < 1.0) {
            return Err(invalid(format!("node {lam} is not inside the open annulus")));
        }
    }
    // G_ij = ⟨v_j, v_i⟩ with v_j = k_{λ_j} ⊗ e_j.
    let gram = DMatrix::from_fn(d, d, |i, j| {
        shift_kernel(r, nodes[j].0, nodes[i].0) * nodes[i].1.dotc(&nodes[j].1)
    });
    let gram = (&gram + gram.adjoint()) * cr(0.5);
    let eig = CMatrix::from_inner(gram.clone()).herm_eig()?;
    let gram_condition = if eig.min() > 0.0 {
        eig.max() / eig.min()
    } else {
        f64::INFINITY
    };
    let chol = Cholesky::new(gram).ok_or(Error::Singular {
        condition: gram_condition,
    })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or(Error::Singular {
            condition: gram_condition,
        })?;
    let lambda = DMatrix::from_diagonal(&CVector::from_iterator(d, nodes.iter().map(|n| n.0)));
    let t = l.adjoint() * lambda * l_inv.adjoint();
    let e_gram = DMatrix::from_fn(d, d, |i, j| nodes[i].1.dotc(&nodes[j].1));
    let alpha_expected = CMatrix::from_inner(&l_inv * e_gram * l_inv.adjoint()).symmetrized();
    Ok(ShiftPart {
        op: OperatorInstance::new(CMatrix::from_inner(t), r)?,
        alpha_expected,
        gram_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alpha_class::{alpha_form, is_in_c_alpha};
    use proptest::prelude::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn norm_examples() {
        let r = 0.5;
        assert!(approx(seq_norm2(&SeqVector::delta(0), &WeightFamily::ell2_r(r)), 1.0 / (1.0 - r * r), 1e-15));
        let a = 0.7;
        assert!(approx(seq_norm2(&SeqVector::delta(0), &WeightFamily::ell2_a_dual(r, a)), 1.0 + a * a, 1e-15));
        assert_eq!(seq_norm2(&SeqVector::zero(2), &WeightFamily::ell2_r(r)), 0.0);
    }

    #[test]
    fn ln_weight_matches_weight() {
        for kind in [WeightKind::Ell2R, WeightKind::Ell2RMinus, WeightKind::Ell2A, WeightKind::Ell2ADual] {
            let w = WeightFamily::new(kind, 0.6, 0.8).unwrap();
            for n in -20..=20 {
                assert!(approx(w.ln_weight(n).exp(), w.weight(n), 1e-12), "{kind:?} {n}");
            }
        }
    }

    #[test]
    fn shift_examples() {
        assert_eq!(SeqVector::delta(0).forward(), SeqVector::delta(1));
        assert_eq!(SeqVector::delta(0).backward(), SeqVector::delta(-1));
    }

    #[test]
    fn hereditary_examples() {
        let r = 0.5;
        let b = hereditary_form_on_shift(&SeqVector::delta(0), &WeightFamily::ell2_r(r), Direction::Backward, r);
        assert!(approx(b, 1.0, 1e-14));

        let f = hereditary_form_on_shift(&SeqVector::delta(0), &WeightFamily::ell2_r_minus(r), Direction::Forward, r);
        let r2 = r * r;
        let expected = (1.0 - r2) * ((1.0 + r2) / r2 - 1.0 / (r2 * r2) - r2);
        assert!(approx(f, expected, 1e-14));
        assert!(approx(expected, (1.0 - r2).powi(2) * (r2 * r2 - 1.0) / (r2 * r2), 1e-14));
        assert!(approx(f, -8.4375, 1e-14));

        let s = 0.3;
        let g = hereditary_form_on_shift(&SeqVector::delta(-1), &WeightFamily::ell2_r(r), Direction::Backward, s);
        assert!(approx(g, r * r - s * s, 1e-14));
    }

    #[test]
    fn ell2_a_bracket_closed_form() {
        for &r in &[0.2, 0.5, 0.8] {
            for &a in &[0.1, 1.0, 3.0] {
                let w = WeightFamily::ell2_a(r, a);
                for m in -8..=8 {
                    let direct = hereditary_bracket(&w, Direction::Forward, r, m);
                    let closed = ell2_a_forward_bracket(r, a, m);
                    assert!((direct - closed).abs() <= 1e-12 * closed.abs().max(1e-3), "{r} {a} {m}: {direct} vs {closed}");
                    assert!(closed >= 0.0);
                }
            }
        }
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(duality_pairing(&SeqVector::delta(0), &SeqVector::delta(-1)).unwrap(), cr(1.0));
        assert_eq!(duality_pairing(&SeqVector::delta(0), &SeqVector::delta(0)).unwrap(), cr(0.0));
        let g2 = SeqVector::from_terms(2, [(0, vec![cr(1.0), cr(0.0)])]).unwrap();
        assert!(matches!(duality_pairing(&SeqVector::delta(0), &g2), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn forward_is_not_dual_to_backward_under_the_reflection_pairing() {
        // ⟨Bδ₀, δ₀⟩ = 1 but ⟨δ₀, Fδ₀⟩ = 0.
        let d = SeqVector::delta(0);
        assert_eq!(duality_pairing(&d.backward(), &d).unwrap(), cr(1.0));
        assert_eq!(duality_pairing(&d, &d.forward()).unwrap(), cr(0.0));
        assert_eq!(duality_pairing(&d, &d.backward()).unwrap(), cr(1.0));
    }

    #[test]
    fn dual_weights_are_reflected_reciprocals() {
        for kind in [WeightKind::Ell2R, WeightKind::Ell2A] {
            let w = WeightFamily::new(kind, 0.55, 1.3).unwrap();
            let (wd, _) = dual_shift(&w, Direction::Forward);
            for n in -30..=30 {
                assert!((w.ln_weight(n) + wd.ln_weight(-n - 1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn j_a_examples() {
        let n = j_a_norms(0.5, 0.5).unwrap();
        assert!(approx(n.norm2, 0.75, 1e-15));
        assert!(approx(n.inv_norm2, 8.0 / 3.0, 1e-15));
        let n = j_a_norms(0.4, 0.9).unwrap();
        assert!(approx(n.norm2, 1.0 - 0.16, 1e-15));
        assert!(approx(k_a(0.37, 0.37).unwrap(), 2f64.sqrt(), 1e-15));
        assert!(j_a_norms(0.5, 0.0).is_err());
    }

    #[test]
    fn k_a_grows_away_from_r() {
        let r = 0.4;
        let mut prev = k_a(r, r).unwrap();
        for i in 1..40 {
            let a = r * 1.3f64.powi(i);
            let k = k_a(r, a).unwrap();
            assert!(k > prev);
            prev = k;
        }
        assert!(prev > 100.0);
    }

    #[test]
    fn k_a_grid_finds_r() {
        let g = k_a_grid_min(0.3, 1e-3, 10.0, 1001, 4).unwrap();
        assert!((g.a / 0.3).ln().abs() <= g.step_ratio.ln() + 1e-15);
        assert!((g.k - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn window_compression_examples() {
        let r = 0.5;
        let w = WeightFamily::ell2_r(r);
        let wc = window_compression(&w, Direction::Backward, -2, 2, 1).unwrap();
        assert!(wc.boundary_defect);
        let m = &wc.matrix;
        for i in 0..5 {
            for j in 0..5 {
                let n = j as i64 - 2;
                let expected = if i + 1 == j { (w.weight(n - 1) / w.weight(n)).sqrt() } else { 0.0 };
                assert!((m.get(i, j).re - expected).abs() < 1e-15);
            }
        }
        // Contractive structure: entries r on the far negative side, 1 elsewhere.
        assert!((m.get(0, 1).re - r).abs() < 1e-15);
        assert!((m.get(3, 4).re - 1.0).abs() < 1e-15);

        let a = 0.8;
        let wa = WeightFamily::ell2_a(r, a);
        let wc = window_compression(&wa, Direction::Forward, 0, 1, 1).unwrap();
        let om = |n: i32| 1.0 / (1.0 + a * a * r.powi(-2 * n - 2));
        assert!((wc.matrix.get(1, 0).re - (om(1) / om(0)).sqrt()).abs() < 1e-15);

        let wc = window_compression(&w, Direction::Forward, 3, 3, 1).unwrap();
        assert_eq!(wc.matrix, CMatrix::zeros(1, 1));
    }

    #[test]
    fn kernel_matches_truncated_series() {
        let r = 0.45;
        let w = WeightFamily::ell2_r(r);
        let (lam, mu) = (c(0.5, 0.3), c(-0.2, 0.6));
        let mut sum = c(0.0, 0.0);
        for n in -400i32..=400 {
            sum += lam.powi(n) * mu.conj().powi(n) * w.weight(n as i64);
        }
        assert!((sum - shift_kernel(r, lam, mu)).norm() < 1e-10);
    }

    #[test]
    fn shift_part_is_member_with_predicted_defect() {
        let r = 0.4;
        let nodes = vec![
            (c(0.6, 0.1), crate::linalg::real_vector(&[1.0])),
            (c(-0.3, 0.5), crate::linalg::real_vector(&[1.0])),
            (c(0.1, -0.8), crate::linalg::real_vector(&[1.0])),
        ];
        let p = shift_part(r, &nodes).unwrap();
        let a = alpha_form(&p.op);
        assert!((&a - &p.alpha_expected).opnorm() < 1e-10);
        assert!(is_in_c_alpha(&p.op, 1e-10).unwrap().is_member());
        let rank = a.herm_eig().unwrap().eigenvalues.iter().filter(|&&v| v > 1e-9).count();
        assert_eq!(rank, 1);
    }

    fn arb_seq(dim_e: usize, span: i64) -> impl Strategy<Value = SeqVector> {
        proptest::collection::btree_map(
            -span..=span,
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim_e),
            0..8,
        )
        .prop_map(move |m| {
            SeqVector::from_terms(dim_e, m.into_iter().map(|(n, v)| (n, v.into_iter().map(|(a, b)| c(a, b)).collect())))
                .unwrap()
        })
    }

    proptest! {
        #[test]
        fn backward_inverts_forward(f in arb_seq(2, 20)) {
            prop_assert_eq!(f.forward().backward(), f.clone());
            prop_assert_eq!(f.backward().forward(), f);
        }

        #[test]
        fn backward_on_ell2_r_has_defect_f0(f in arb_seq(2, 12), r in 0.1f64..0.9) {
            let w = WeightFamily::ell2_r(r);
            let v = hereditary_form_on_shift(&f, &w, Direction::Backward, r);
            let scale = seq_norm2(&f, &w).max(1.0);
            prop_assert!((v - f.coefficient_norm2(0)).abs() <= 1e-12 * scale);
        }

        #[test]
        fn pairing_is_bounded_by_dual_norms(f in arb_seq(1, 10), g in arb_seq(1, 10), r in 0.1f64..0.9) {
            let w = WeightFamily::ell2_r(r);
            let (wd, _) = dual_shift(&w, Direction::Backward);
            let p = duality_pairing(&f, &g).unwrap().norm();
            prop_assert!(p <= (seq_norm2(&f, &w) * seq_norm2(&g, &wd)).sqrt() * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn json_round_trip(f in arb_seq(3, 50)) {
            prop_assert_eq!(SeqVector::from_json(&f.to_json()).unwrap(), f);
        }
    }
}
