//! Hereditary forms and class membership.
//!
//! For `0 < r < 1` the hereditary form of `α(t) = (1−t)(t−r²)` is
//! `α(T*,T) = −T*²T² + (1+r²)T*T − r²I`. `C_α` is the set of invertible `T`
//! with `α(T*,T) ⪰ 0`; `C_{1,r}` is the set with `‖T‖ ≤ 1` and
//! `‖T⁻¹‖ ≤ 1/r`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, CVector};

/// A square invertible matrix together with the inner radius `r` of the
/// annulus `r < |z| < 1`.
#[derive(Clone, Debug)]
pub struct OperatorInstance {
    t: CMatrix,
    t_inv: CMatrix,
    r: f64,
}

impl OperatorInstance {
    pub fn new(t: CMatrix, r: f64) -> Result<Self> {
        if !t.is_square() {
            return Err(invalid("operator matrix must be square"));
        }
        check_radius(r, "r")?;
        let t_inv = t.inverse()?;
        Ok(Self { t, t_inv, r })
    }

    pub fn t(&self) -> &CMatrix {
        &self.t
    }

    pub fn t_inv(&self) -> &CMatrix {
        &self.t_inv
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Same operator, conjugated by a unitary: `U* T U`.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        Self::new(&(&u.adjoint() * &self.t) * u, self.r)
    }
}

pub(crate) fn check_radius(r: f64, name: &str) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1), got {r}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    In,
    Out,
    Borderline,
}

/// Outcome of a membership test. `margin` is signed: positive inside the
/// class, negative outside. `Borderline` iff `|margin| ≤ tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub verdict: Verdict,
    pub margin: f64,
    pub tolerance: f64,
}

impl Membership {
    pub fn from_margin(margin: f64, tolerance: f64) -> Self {
        let verdict = if margin.abs() <= tolerance {
            Verdict::Borderline
        } else if margin > 0.0 {
            Verdict::In
        } else {
            Verdict::Out
        };
        Self {
            verdict,
            margin,
            tolerance,
        }
    }

    /// `In` or `Borderline`.
    pub fn is_member(&self) -> bool {
        self.verdict != Verdict::Out
    }
}

/// `−T*²T² + (1+s²)T*T − s²I`, symmetrized.
pub fn hereditary_form(t: &CMatrix, s: f64) -> CMatrix {
    let n = t.nrows();
    let t2 = t * t;
    let tt = &t.adjoint() * t;
    let t2t2 = &t2.adjoint() * &t2;
    let form = &(&tt.scale_real(1.0 + s * s) - &t2t2) - &CMatrix::identity(n).scale_real(s * s);
    form.symmetrized()
}

/// `α(T*,T)`.
pub fn alpha_form(op: &OperatorInstance) -> CMatrix {
    hereditary_form(op.t(), op.r())
}

/// `β(T*,T)` for `β(t) = (1−t)(t−s²)`.
pub fn beta_form(op: &OperatorInstance, s: f64) -> Result<CMatrix> {
    check_radius(s, "s")?;
    Ok(hereditary_form(op.t(), s))
}

/// `(1+s²)‖Tx‖² − ‖T²x‖² − s²‖x‖²`, the scalar form of the hereditary
/// expression evaluated at a vector.
pub fn hereditary_value(t: &CMatrix, s: f64, x: &CVector) -> f64 {
    let tx = t.mul_vec(x);
    let t2x = t.mul_vec(&tx);
    (1.0 + s * s) * tx.norm_squared() - t2x.norm_squared() - s * s * x.norm_squared()
}

fn psd_membership(form: &CMatrix, tol: f64) -> Result<Membership> {
    let eig = form.herm_eig()?;
    let scale = eig.min().abs().max(eig.max().abs()).max(1.0);
    Ok(Membership::from_margin(eig.min(), tol * scale))
}

/// PSD test of `α(T*,T)`; `margin` is its smallest eigenvalue.
pub fn is_in_c_alpha(op: &OperatorInstance, tol: f64) -> Result<Membership> {
    psd_membership(&alpha_form(op), tol)
}

/// PSD test of `β(T*,T)`.
pub fn is_in_c_beta(op: &OperatorInstance, s: f64, tol: f64) -> Result<Membership> {
    psd_membership(&beta_form(op, s)?, tol)
}

/// Norm test for `C_{1,r}`; `margin = min(1 − ‖T‖, 1/r − ‖T⁻¹‖)`.
pub fn is_in_c_1r(op: &OperatorInstance, tol: f64) -> Membership {
    let margin = (1.0 - op.t().opnorm()).min(1.0 / op.r() - op.t_inv().opnorm());
    Membership::from_margin(margin, tol)
}

/// `(r T⁻¹, r)`. `T ∈ C_α` iff `r T⁻¹ ∈ C_α`.
pub fn invert_scale(op: &OperatorInstance) -> Result<OperatorInstance> {
    OperatorInstance::new(op.t_inv().scale_real(op.r()), op.r())
}

/// Defect operator `D = α(T*,T)^{1/2}` and the defect space.
#[derive(Clone, Debug)]
pub struct DefectData {
    pub alpha_form: CMatrix,
    pub d: CMatrix,
    pub defect_rank: usize,
    /// Orthonormal columns spanning the range of `D` (`n × defect_rank`).
    pub defect_basis: CMatrix,
    pub min_eig: f64,
}

impl DefectData {
    /// `D²`, using the clipped square root.
    pub fn d_squared(&self) -> CMatrix {
        &self.d * &self.d
    }
}

/// Computes [`DefectData`]. Fails with `NotPsd` when the operator is outside
/// `C_α` beyond the tolerance window.
pub fn defect(op: &OperatorInstance, psd_tol: f64, rank_tol: f64) -> Result<DefectData> {
    let alpha = alpha_form(op);
    let eig = alpha.herm_eig()?;
    let scale = eig.min().abs().max(eig.max().abs()).max(1.0);
    if eig.min() < -psd_tol * scale {
        return Err(Error::NotPsd {
            min_eig: eig.min(),
            threshold: psd_tol * scale,
        });
    }
    let d = alpha.psd_sqrt(psd_tol)?;
    let cut = rank_tol * scale;
    let cols: Vec<CVector> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, &v)| v > cut)
        .map(|(j, _)| eig.eigenvectors.column(j))
        .collect();
    let defect_rank = cols.len();
    Ok(DefectData {
        alpha_form: alpha,
        d,
        defect_rank,
        defect_basis: CMatrix::from_columns(op.dim(), &cols),
        min_eig: eig.min(),
    })
}

/// `‖r⁻²(T²)* D̃² T² − D²‖₂`, where `D̃` is the defect operator of `rT⁻¹`.
pub fn reflected_defect_residual(op: &OperatorInstance, psd_tol: f64) -> Result<f64> {
    let d = alpha_form(op).psd_sqrt(psd_tol)?;
    let reflected = invert_scale(op)?;
    let dt = alpha_form(&reflected).psd_sqrt(psd_tol)?;
    let t2 = op.t() * op.t();
    let lhs = (&(&t2.adjoint() * &(&dt * &dt)) * &t2).scale_real(1.0 / (op.r() * op.r()));
    Ok((&lhs - &(&d * &d)).opnorm())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZeroDefectReport {
    pub is_zero_defect: bool,
    pub is_normal: bool,
    pub eigenvalue_moduli: Vec<f64>,
    pub alpha_norm: f64,
    pub normality_residual: f64,
    /// Largest distance of an eigenvalue modulus from `{r, 1}`.
    pub modulus_deviation: f64,
}

impl ZeroDefectReport {
    /// A zero-defect operator must be normal with eigenvalues on the two
    /// boundary circles.
    pub fn is_consistent(&self, modulus_tol: f64) -> bool {
        !self.is_zero_defect || (self.is_normal && self.modulus_deviation <= modulus_tol)
    }
}

/// Finite-dimensional zero-defect classification: `α(T*,T) = 0` forces `T`
/// normal with every eigenvalue of modulus `r` or `1`.
pub fn classify_zero_defect(
    op: &OperatorInstance,
    tol: f64,
    normality_tol: f64,
) -> Result<ZeroDefectReport> {
    let alpha_norm = alpha_form(op).opnorm();
    let t = op.t();
    let normality_residual = (&(&t.adjoint() * t) - &(t * &t.adjoint())).opnorm();
    let eigenvalue_moduli: Vec<f64> = t.eigenvalues()?.iter().map(|z| z.norm()).collect();
    let modulus_deviation = eigenvalue_moduli
        .iter()
        .map(|&m| (m - 1.0).abs().min((m - op.r()).abs()))
        .fold(0.0, f64::max);
    Ok(ZeroDefectReport {
        is_zero_defect: alpha_norm <= tol,
        is_normal: normality_residual <= normality_tol,
        eigenvalue_moduli,
        alpha_norm,
        normality_residual,
        modulus_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::linalg::{c, cr, real_vector};
    use crate::sampling::{random_unitary, CalphaSampler};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-10;

    fn op(t: CMatrix, r: f64) -> OperatorInstance {
        OperatorInstance::new(t, r).unwrap()
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(OperatorInstance::new(CMatrix::identity(2), 1.0).is_err());
        assert!(OperatorInstance::new(CMatrix::identity(2), 0.0).is_err());
        assert!(OperatorInstance::new(CMatrix::zeros(2, 2), 0.5).is_err());
        assert!(OperatorInstance::new(CMatrix::zeros(2, 3), 0.5).is_err());
    }

    #[test]
    fn unitary_and_scaled_unitary_have_zero_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(&mut rng, 4);
        for r in [0.2, 0.5, 0.9] {
            assert!(alpha_form(&op(u.clone(), r)).opnorm() < 1e-13);
            assert!(alpha_form(&op(u.scale_real(r), r)).opnorm() < 1e-13);
        }
    }

    #[test]
    fn t1_form_at_e1() {
        let r = 0.5;
        let a = alpha_form(&op(catalog::t1_matrix(), r));
        let e1 = real_vector(&[1.0, 0.0]);
        assert!((a.quad_form(&e1) + r * r / 4.0).abs() < 1e-12);
        let m = is_in_c_alpha(&op(catalog::t1_matrix(), r), TOL).unwrap();
        assert_eq!(m.verdict, Verdict::Out);
        assert!(m.margin <= -1.0 / 16.0 + 1e-12);
    }

    #[test]
    fn beta_form_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(&mut rng, 3);
        let (r, s) = (0.6, 0.8);
        let b = beta_form(&op(u.scale_real(r), r), s).unwrap();
        let expected = (1.0 - r * r) * (r * r - s * s);
        assert!(b.max_abs_diff(&CMatrix::identity(3).scale_real(expected)) < 1e-13);

        let t = op(catalog::t2_matrix(0.4), 0.4);
        assert!(beta_form(&t, 0.4).unwrap().max_abs_diff(&alpha_form(&t)) == 0.0);

        let (r, s) = (0.7, 0.5);
        let d = op(CMatrix::from_real_diagonal(&[1.0, s]), r);
        assert!(is_in_c_beta(&d, s, TOL).unwrap().is_member());
        assert!(beta_form(&d, 1.5).is_err());
    }

    #[test]
    fn c_alpha_examples() {
        let r = 0.4;
        let m = is_in_c_alpha(&op(CMatrix::from_real_diagonal(&[1.0, r]), r), TOL).unwrap();
        assert_eq!(m.verdict, Verdict::Borderline);
        assert!(m.margin.abs() < 1e-15);

        let lam = c(0.5, 0.4);
        let m = is_in_c_alpha(&op(CMatrix::from_diagonal(&[lam]), r), TOL).unwrap();
        let t = lam.norm_sqr();
        assert_eq!(m.verdict, Verdict::In);
        assert!((m.margin - (1.0 - t) * (t - r * r)).abs() < 1e-15);
    }

    #[test]
    fn c_1r_examples() {
        let t2 = op(catalog::t2_matrix(0.8), 0.8);
        assert!(is_in_c_1r(&t2, TOL).is_member());
        let d = op(CMatrix::from_real_diagonal(&[1.01, 0.9]), 0.5);
        assert_eq!(is_in_c_1r(&d, TOL).verdict, Verdict::Out);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(&mut rng, 3);
        assert!(is_in_c_1r(&op(u.scale_real(0.5), 0.5), TOL).is_member());
    }

    #[test]
    fn invert_scale_examples() {
        let r = 0.3;
        let d = op(CMatrix::from_real_diagonal(&[1.0, r]), r);
        let inv = invert_scale(&d).unwrap();
        assert!(inv.t().max_abs_diff(&CMatrix::from_real_diagonal(&[r, 1.0])) < 1e-15);
        let back = invert_scale(&inv).unwrap();
        assert!(back.t().max_abs_diff(d.t()) < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(&mut rng, 3);
        let ru = op(u.scale_real(r), r);
        assert!(invert_scale(&ru).unwrap().t().max_abs_diff(&u.adjoint()) < 1e-12);

        for r in [0.6, 0.8, 0.9] {
            let t2 = op(catalog::t2_matrix(r), r);
            let a = is_in_c_alpha(&t2, TOL).unwrap().verdict;
            let b = is_in_c_alpha(&invert_scale(&t2).unwrap(), TOL).unwrap().verdict;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn defect_examples() {
        let r = 0.5;
        let d = defect(&op(CMatrix::from_real_diagonal(&[1.0, r]), r), TOL, TOL).unwrap();
        assert_eq!(d.defect_rank, 0);
        assert!(d.d.opnorm() < 1e-7);

        let lam = ((1.0 + r * r) / 2.0f64).sqrt();
        let d = defect(&op(CMatrix::from_diagonal(&[cr(lam)]), r), TOL, TOL).unwrap();
        assert_eq!(d.defect_rank, 1);
        assert!((d.d.get(0, 0).re - (1.0 - r * r) / 2.0).abs() < 1e-14);

        assert!(matches!(
            defect(&op(catalog::t1_matrix(), 0.5), TOL, TOL),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn defect_rank_counts_eigenvalues_above_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sampler = CalphaSampler::default();
        for _ in 0..30 {
            let m = sampler.sample(&mut rng);
            let d = defect(&m, TOL, TOL).unwrap();
            let eig = d.alpha_form.herm_eig().unwrap();
            let cut = TOL * eig.max().abs().max(eig.min().abs()).max(1.0);
            let count = eig.eigenvalues.iter().filter(|&&v| v > cut).count();
            assert_eq!(d.defect_rank, count);
            let basis = &d.defect_basis;
            let gram = &basis.adjoint() * basis;
            assert!((&gram - &CMatrix::identity(count)).opnorm() < 1e-10);
            // The basis spans the range of D.
            let proj = basis * &basis.adjoint();
            assert!((&(&proj * &d.d) - &d.d).opnorm() < 1e-6);
        }
    }

    #[test]
    fn reflected_defect_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sampler = CalphaSampler::default();
        for _ in 0..50 {
            let m = sampler.sample(&mut rng);
            assert!(reflected_defect_residual(&m, TOL).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn quadratic_form_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let sampler = CalphaSampler::default();
        for _ in 0..50 {
            let m = sampler.sample(&mut rng);
            let a = alpha_form(&m);
            let x = CVector::from_fn(m.dim(), |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let lhs = a.quad_form(&x);
            let rhs = hereditary_value(m.t(), m.r(), &x);
            assert!((lhs - rhs).abs() <= 1e-10 * x.norm_squared().max(1.0));
        }
    }

    #[test]
    fn zero_defect_examples() {
        let r = 0.45;
        let theta = 1.1f64;
        let t = CMatrix::from_diagonal(&[cr(1.0), cr(r), c(theta.cos(), theta.sin())]);
        let rep = classify_zero_defect(&op(t, r), 1e-10, 1e-7).unwrap();
        assert!(rep.is_zero_defect && rep.is_normal);
        assert!(rep.modulus_deviation < 1e-12);
        assert!(rep.is_consistent(1e-7));

        let rep = classify_zero_defect(&op(catalog::t2_matrix(0.8), 0.8), 1e-10, 1e-7).unwrap();
        assert!(!rep.is_zero_defect);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(&mut rng, 3).direct_sum(&random_unitary(&mut rng, 2).scale_real(r));
        let w = random_unitary(&mut rng, 5);
        let m = op(&(&w.adjoint() * &u) * &w, r);
        let rep = classify_zero_defect(&m, 1e-10, 1e-7).unwrap();
        assert!(rep.is_zero_defect && rep.is_normal && rep.is_consistent(1e-7));
    }
}
