//! Reference operators and sequences with exactly known values.
//!
//! Expected values are closed-form expressions evaluated when an entry is
//! built; [`CatalogEntry::run`] recomputes each one through the module that
//! owns the quantity.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::alpha_class::{
    alpha_form, beta_form, classify_zero_defect, is_in_c_1r, is_in_c_alpha, OperatorInstance,
};
use crate::asymptotics::limit_gramians;
use crate::config::Tolerances;
use crate::error::{invalid, Result};
use crate::linalg::{real_vector, CMatrix, CVector, C64};
use crate::model_spaces::{hereditary_form_on_shift, Direction, SeqVector, WeightFamily};
use crate::sampling::{on_circle, random_unitary};

/// Tolerance for values computed by exact finite arithmetic.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for values that go through an eigensolver.
pub const SPECTRAL_TOL: f64 = 1e-8;

/// `[[1/√2, 0], [1/2, 1/√2]]`.
pub fn t1_matrix() -> CMatrix {
    CMatrix::from_real_rows(&[&[FRAC_1_SQRT_2, 0.0], &[0.5, FRAC_1_SQRT_2]])
}

/// `[[√r, 0], [1−r, √r]]`.
pub fn t2_matrix(r: f64) -> CMatrix {
    let s = r.sqrt();
    CMatrix::from_real_rows(&[&[s, 0.0], &[1.0 - r, s]])
}

/// How an expected value is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// A closed-form expression for the quantity.
    ClosedForm,
    /// Follows from how the entry was constructed.
    Construction,
    /// Direct scalar evaluation.
    Elementary,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// `x*α(T*,T)x`.
    AlphaFormAt { x: Vec<f64> },
    /// Smallest eigenvalue of `β(T*,T)`.
    BetaMinEig { s: f64 },
    /// 1 if the operator is a member of `C_{1,r}`, else 0.
    InC1r,
    /// 1 if the operator is a member of `C_α`, else 0.
    InCalpha,
    /// Hereditary form with parameter `rho` of the shift on the payload sequence.
    ShiftForm {
        weight: WeightFamily,
        direction: Direction,
        rho: f64,
    },
    /// 1 if the operator has zero defect and is normal with eigenvalue
    /// moduli in `{r, 1}`, else 0.
    ZeroDefectNormal,
    /// `‖Q₋‖₂`.
    QMinusNorm,
}

#[derive(Clone, Debug, Serialize)]
pub struct Expected {
    pub description: String,
    pub value: f64,
    pub origin: Origin,
    pub tolerance: f64,
    pub check: Check,
}

#[derive(Clone, Debug)]
pub enum Payload {
    Operator(OperatorInstance),
    Sequence(SeqVector),
}

impl Serialize for Payload {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        #[serde(rename_all = "snake_case")]
        enum P<'a> {
            Operator { matrix: &'a CMatrix, r: f64 },
            Sequence(&'a SeqVector),
        }
        match self {
            Payload::Operator(op) => P::Operator {
                matrix: op.t(),
                r: op.r(),
            },
            Payload::Sequence(f) => P::Sequence(f),
        }
        .serialize(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub payload: Payload,
    pub expected: Vec<Expected>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub description: String,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl CatalogEntry {
    fn new(name: &str, params: &[(&str, f64)], payload: Payload) -> Self {
        Self {
            name: name.to_string(),
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            payload,
            expected: Vec::new(),
        }
    }

    fn expect(mut self, description: &str, value: f64, origin: Origin, tolerance: f64, check: Check) -> Self {
        self.expected.push(Expected {
            description: description.to_string(),
            value,
            origin,
            tolerance,
            check,
        });
        self
    }

    pub fn operator(&self) -> Option<&OperatorInstance> {
        match &self.payload {
            Payload::Operator(op) => Some(op),
            Payload::Sequence(_) => None,
        }
    }

    fn compute(&self, check: &Check) -> Result<f64> {
        let tol = Tolerances::default();
        let need_op = || self.operator().ok_or_else(|| invalid("check needs an operator payload"));
        Ok(match check {
            Check::AlphaFormAt { x } => alpha_form(need_op()?).quad_form(&real_vector(x)),
            Check::BetaMinEig { s } => beta_form(need_op()?, *s)?.herm_eig()?.min(),
            Check::InC1r => flag(is_in_c_1r(need_op()?, EXACT_TOL).is_member()),
            Check::InCalpha => flag(is_in_c_alpha(need_op()?, tol.psd)?.is_member()),
            Check::ShiftForm { weight, direction, rho } => match &self.payload {
                Payload::Sequence(f) => hereditary_form_on_shift(f, weight, *direction, *rho),
                Payload::Operator(_) => return Err(invalid("check needs a sequence payload")),
            },
            Check::ZeroDefectNormal => {
                let rep = classify_zero_defect(need_op()?, SPECTRAL_TOL, tol.normality)?;
                flag(rep.is_zero_defect && rep.is_normal && rep.modulus_deviation <= SPECTRAL_TOL)
            }
            Check::QMinusNorm => limit_gramians(need_op()?, tol.gramian, tol.max_doublings)?.q_minus.opnorm(),
        })
    }

    /// Recomputes every expected value.
    pub fn run(&self) -> Vec<CheckOutcome> {
        self.expected
            .iter()
            .map(|e| {
                let computed = self.compute(&e.check).unwrap_or(f64::NAN);
                CheckOutcome {
                    description: e.description.clone(),
                    expected: e.value,
                    computed,
                    tolerance: e.tolerance,
                    pass: (computed - e.value).abs() <= e.tolerance,
                }
            })
            .collect()
    }
}

fn operator(t: CMatrix, r: f64) -> Result<Payload> {
    Ok(Payload::Operator(OperatorInstance::new(t, r)?))
}

pub fn t1(r: f64) -> Result<CatalogEntry> {
    let e = CatalogEntry::new("t1", &[("r", r)], operator(t1_matrix(), r)?)
        .expect("alpha form at e1 is -r^2/4", -r * r / 4.0, Origin::ClosedForm, EXACT_TOL, Check::AlphaFormAt { x: vec![1.0, 0.0] })
        .expect("member of C_1r iff r <= 1/2", flag(r <= 0.5), Origin::ClosedForm, 0.0, Check::InC1r)
        .expect("not a member of C_alpha", 0.0, Origin::ClosedForm, 0.0, Check::InCalpha);
    Ok(e)
}

pub fn t2(r: f64) -> Result<CatalogEntry> {
    let form = (r - 1.0).powi(2) * (r * r - 3.0 * r + 1.0);
    let mut e = CatalogEntry::new("t2", &[("r", r)], operator(t2_matrix(r), r)?)
        .expect("alpha form at e1 is (r-1)^2 (r^2-3r+1)", form, Origin::ClosedForm, EXACT_TOL, Check::AlphaFormAt { x: vec![1.0, 0.0] })
        .expect("member of C_1r", 1.0, Origin::ClosedForm, 0.0, Check::InC1r);
    if r > 0.5 {
        e = e.expect("not a member of C_alpha for r > 1/2", 0.0, Origin::ClosedForm, 0.0, Check::InCalpha);
    }
    Ok(e)
}

/// Sequence and scalar witnesses for the inclusions between the classes.
pub fn shift_witnesses(r: f64, s: f64) -> Result<Vec<CatalogEntry>> {
    let w_minus = WeightFamily::new(crate::model_spaces::WeightKind::Ell2RMinus, r, 1.0)?;
    let w_r = WeightFamily::ell2_r(r);
    let r2 = r * r;
    let f_witness = CatalogEntry::new("forward_shift_witness", &[("r", r)], Payload::Sequence(SeqVector::delta(0))).expect(
        "alpha form of the forward shift on ell2_r_minus at delta_0 is (1-r^2)^2 (r^4-1)/r^4",
        (1.0 - r2).powi(2) * (r2 * r2 - 1.0) / (r2 * r2),
        Origin::ClosedForm,
        EXACT_TOL,
        Check::ShiftForm {
            weight: w_minus,
            direction: Direction::Forward,
            rho: r,
        },
    );
    let b_identity = CatalogEntry::new("backward_shift_identity", &[("r", r)], Payload::Sequence(SeqVector::delta(0))).expect(
        "alpha form of the backward shift on ell2_r at delta_0 is |f_0|^2 = 1",
        1.0,
        Origin::ClosedForm,
        EXACT_TOL,
        Check::ShiftForm {
            weight: w_r,
            direction: Direction::Backward,
            rho: r,
        },
    );
    let b_beta = CatalogEntry::new("backward_shift_beta", &[("r", r), ("s", s)], Payload::Sequence(SeqVector::delta(-1))).expect(
        "beta form of the backward shift on ell2_r at delta_-1 is r^2 - s^2",
        r2 - s * s,
        Origin::ClosedForm,
        EXACT_TOL,
        Check::ShiftForm {
            weight: w_r,
            direction: Direction::Backward,
            rho: s,
        },
    );
    let scaled_identity = CatalogEntry::new("scaled_identity_beta", &[("r", r), ("s", s)], operator(CMatrix::identity(2).scale_real(r), r)?)
        .expect(
            "smallest eigenvalue of the beta form of rI is (1-r^2)(r^2-s^2)",
            (1.0 - r2) * (r2 - s * s),
            Origin::ClosedForm,
            EXACT_TOL,
            Check::BetaMinEig { s },
        )
        .expect("rI is a member of C_alpha", 1.0, Origin::Elementary, 0.0, Check::InCalpha);
    Ok(vec![f_witness, b_identity, b_beta, scaled_identity])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuliPattern {
    /// Each eigenvalue modulus drawn from `{r, 1}`.
    Mixed,
    /// All moduli 1.
    Unitary,
    /// Half on each circle.
    Split,
}

/// Random normal matrix `W* diag(λ) W` with `|λᵢ| ∈ {r, 1}`.
pub fn normal_model(r: f64, pattern: ModuliPattern, dim: usize, seed: u64) -> Result<CatalogEntry> {
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diag: Vec<C64> = (0..dim)
        .map(|i| {
            let rho = match pattern {
                ModuliPattern::Mixed => {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        r
                    }
                }
                ModuliPattern::Unitary => 1.0,
                ModuliPattern::Split => {
                    if i % 2 == 0 {
                        1.0
                    } else {
                        r
                    }
                }
            };
            on_circle(&mut rng, rho)
        })
        .collect();
    let w = random_unitary(&mut rng, dim);
    let t = &(&w.adjoint() * &CMatrix::from_diagonal(&diag)) * &w;
    let mut e = CatalogEntry::new("normal_model", &[("r", r), ("dim", dim as f64), ("seed", seed as f64)], operator(t, r)?).expect(
        "zero defect, normal, moduli in {r, 1}",
        1.0,
        Origin::Construction,
        0.0,
        Check::ZeroDefectNormal,
    );
    if pattern == ModuliPattern::Unitary {
        e = e.expect("Q_minus vanishes", 0.0, Origin::Construction, SPECTRAL_TOL, Check::QMinusNorm);
    }
    Ok(e)
}

/// `diag(1, r)`.
pub fn boundary_diagonal(r: f64) -> Result<CatalogEntry> {
    Ok(CatalogEntry::new("boundary_diagonal", &[("r", r)], operator(CMatrix::from_real_diagonal(&[1.0, r]), r)?).expect(
        "zero defect, normal, moduli in {r, 1}",
        1.0,
        Origin::Elementary,
        0.0,
        Check::ZeroDefectNormal,
    ))
}

/// The default catalog.
pub fn all() -> Result<Vec<CatalogEntry>> {
    let golden = (3.0 - 5f64.sqrt()) / 2.0;
    let mut v = vec![t1(0.5)?, t1(0.25)?, t2(0.8)?, t2(0.3)?, t2(golden)?];
    v.extend(shift_witnesses(0.5, 0.6)?);
    v.extend(shift_witnesses(0.5, 0.4)?);
    v.push(normal_model(0.5, ModuliPattern::Mixed, 6, 42)?);
    v.push(normal_model(0.5, ModuliPattern::Unitary, 4, 7)?);
    v.push(normal_model(0.3, ModuliPattern::Split, 5, 11)?);
    v.push(boundary_diagonal(0.5)?);
    Ok(v)
}

/// Unit first basis vector of `ℂ^n`.
pub fn e1(n: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[0] = C64::new(1.0, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_all_pass(e: &CatalogEntry) {
        for o in e.run() {
            assert!(o.pass, "{} / {}: expected {} computed {}", e.name, o.description, o.expected, o.computed);
        }
    }

    #[test]
    fn default_catalog_passes() {
        for e in all().unwrap() {
            assert_all_pass(&e);
        }
    }

    #[test]
    fn quoted_values() {
        assert!((t1(0.5).unwrap().expected[0].value + 0.0625).abs() < 1e-15);
        assert!((t1(0.25).unwrap().expected[0].value + 0.015625).abs() < 1e-15);
        assert!((t2(0.8).unwrap().expected[0].value + 0.0304).abs() < 1e-12);
        assert!((t2(0.3).unwrap().expected[0].value - 0.0931).abs() < 1e-12);
        let w = shift_witnesses(0.5, 0.6).unwrap();
        assert!((w[0].expected[0].value + 8.4375).abs() < 1e-12);
        assert!((w[3].expected[0].value + 0.0825).abs() < 1e-12);
        let w = shift_witnesses(0.5, 0.4).unwrap();
        assert!((w[2].expected[0].value - 0.09).abs() < 1e-12);
    }

    #[test]
    fn t1_outside_c1r_for_large_r() {
        assert_all_pass(&t1(0.7).unwrap());
    }

    #[test]
    fn t2_family() {
        for r in [0.55, 0.7, 0.9, 0.2] {
            assert_all_pass(&t2(r).unwrap());
        }
    }

    #[test]
    fn normal_models_are_seed_deterministic() {
        let a = normal_model(0.4, ModuliPattern::Mixed, 5, 3).unwrap();
        let b = normal_model(0.4, ModuliPattern::Mixed, 5, 3).unwrap();
        assert_eq!(a.operator().unwrap().t(), b.operator().unwrap().t());
        assert_all_pass(&a);
    }

    #[test]
    fn entries_serialize() {
        let text = serde_json::to_string(&t1(0.5).unwrap()).unwrap();
        assert!(text.contains("\"closed_form\"") && text.contains("\"matrix\""));
        let _ = e1(3);
    }
}
