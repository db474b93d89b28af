//! Randomized invariant suites with per-suite summaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::alpha_class::{alpha_form, beta_form, classify_zero_defect, is_in_c_beta, OperatorInstance};
use crate::asymptotics::{
    broken_line, norm_identity_residual, norm_identity_residual_vec, series_defect_neg, series_defect_pos, ModelData,
};
use crate::catalog::{self, ModuliPattern};
use crate::config::Tolerances;
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::lifting::{gramian_residual, intertwining_residual, lifting_isometry_residual};
use crate::linalg::{c, norm2, CMatrix, CVector};
use crate::model_spaces::{
    dual_shift, duality_pairing, j_a_norms, j_a_norms_on_window, k_a_grid_min, seq_norm2, Direction, SeqVector, WeightFamily,
    WeightKind,
};
use crate::sampling::{boundary_normal, conjugate_random, random_unit_vector, CalphaSampler};
use crate::spectral_bounds::{k_ratio, RandomRational};

pub const SUITES: [&str; 9] = [
    "identities",
    "gramians",
    "catalog",
    "kbound",
    "duality",
    "ja",
    "inclusion",
    "zero_defect",
    "concavity",
];

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub samples: usize,
    pub passed: usize,
    pub failed: usize,
    /// Largest residual (or ratio, for `kbound`) over the suite.
    pub max_value: f64,
    pub tolerance: f64,
}

impl SuiteSummary {
    fn from_values(suite: &str, values: &[f64], tolerance: f64) -> Self {
        let passed = values.iter().filter(|v| **v <= tolerance).count();
        Self {
            suite: suite.to_string(),
            samples: values.len(),
            passed,
            failed: values.len() - passed,
            max_value: values.iter().copied().fold(0.0, crate::exec::nan_max),
            tolerance,
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

/// Random members of `C_α` for the suites: sampler output, with every tenth
/// slot replaced by a random normal model with boundary spectrum.
pub fn member_suite(seed: u64, n: usize, sampler: &CalphaSampler) -> Vec<OperatorInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            if i % 10 == 9 {
                let r = rng.random_range(sampler.r_range.0..sampler.r_range.1);
                let dim = rng.random_range(sampler.min_dim..=sampler.max_dim);
                let entry = catalog::normal_model(r, ModuliPattern::Mixed, dim, rng.random()).expect("valid model");
                entry.operator().expect("operator payload").clone()
            } else {
                sampler.sample(&mut rng)
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityResiduals {
    pub series_pos: f64,
    pub series_neg: f64,
    pub norm_vector: f64,
    pub norm_operator: f64,
    pub lifting: f64,
    pub intertwining: f64,
    pub gramian_fixed_point: f64,
    pub gramian_total: f64,
}

impl IdentityResiduals {
    pub fn max_identity(&self) -> f64 {
        [
            self.series_pos,
            self.series_neg,
            self.norm_vector,
            self.norm_operator,
            self.lifting,
            self.intertwining,
        ]
        .into_iter()
        .fold(0.0, crate::exec::nan_max)
    }

    pub fn max_gramian(&self) -> f64 {
        crate::exec::nan_max(self.gramian_fixed_point, self.gramian_total)
    }
}

/// All identity residuals for one operator and one vector.
pub fn identity_residuals(op: &OperatorInstance, x: &CVector, tol: &Tolerances) -> Result<IdentityResiduals> {
    let m = ModelData::new(op, tol)?;
    let n = tol.window;
    let scale = norm2(x).max(1.0);
    Ok(IdentityResiduals {
        series_pos: series_defect_pos(&m, x, n)?.residual() / scale,
        series_neg: series_defect_neg(&m, x, n)?.residual() / scale,
        norm_vector: norm_identity_residual_vec(&m, x, n)? / scale,
        norm_operator: norm_identity_residual(&m, n),
        lifting: lifting_isometry_residual(&m, x, n)? / scale,
        intertwining: intertwining_residual(&m, x, n)?,
        gramian_fixed_point: m.gramians.residual,
        gramian_total: gramian_residual(&m, 1e-11, tol.max_doublings)?,
    })
}

fn identity_values(seed: u64, n: usize, tol: &Tolerances, exec: Execution) -> Vec<Option<IdentityResiduals>> {
    let ops = member_suite(seed, n, &CalphaSampler::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let xs: Vec<CVector> = ops.iter().map(|op| random_unit_vector(&mut rng, op.dim())).collect();
    let pairs: Vec<(OperatorInstance, CVector)> = ops.into_iter().zip(xs).collect();
    exec.map(&pairs, |(op, x)| identity_residuals(op, x, tol).ok())
}

pub fn run_suite(name: &str, seed: u64, n: usize, tol: &Tolerances, exec: Execution) -> Result<SuiteSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "identities" => {
            let v: Vec<f64> = identity_values(seed, n, tol, exec)
                .iter()
                .map(|r| r.map_or(f64::INFINITY, |r| r.max_identity()))
                .collect();
            Ok(SuiteSummary::from_values(name, &v, 1e-7))
        }
        "gramians" => {
            let v: Vec<f64> = identity_values(seed, n, tol, exec)
                .iter()
                .map(|r| r.map_or(f64::INFINITY, |r| r.max_gramian()))
                .collect();
            Ok(SuiteSummary::from_values(name, &v, 1e-7))
        }
        "catalog" => {
            let mut v = Vec::new();
            for e in catalog::all()? {
                for o in e.run() {
                    v.push(if o.pass { 0.0 } else { f64::INFINITY });
                }
            }
            Ok(SuiteSummary::from_values(name, &v, 0.0))
        }
        "kbound" => {
            let sampler = CalphaSampler::with_dims(1, 6);
            let shape = RandomRational::default();
            let pairs: Vec<_> = (0..n)
                .map(|_| {
                    let op = sampler.sample(&mut rng);
                    let f = shape.sample(&mut rng, op.r());
                    (op, f)
                })
                .collect();
            let m = tol.boundary_samples;
            let v = exec.map(&pairs, |(op, f)| {
                k_ratio(f, op, m, Execution::Sequential).map_or(f64::INFINITY, |k| k.ratio)
            });
            Ok(SuiteSummary::from_values(name, &v, 2f64.sqrt() + 1e-6))
        }
        "duality" => {
            let mut v = Vec::new();
            for kind in [WeightKind::Ell2R, WeightKind::Ell2A] {
                for _ in 0..n {
                    let r = rng.random_range(0.1..0.9);
                    let w = WeightFamily::new(kind, r, rng.random_range(0.1..3.0))?;
                    let dir = if rng.random_bool(0.5) { Direction::Forward } else { Direction::Backward };
                    let dim = rng.random_range(1..=3);
                    let f = random_seq(&mut rng, dim);
                    let g = random_seq(&mut rng, dim);
                    let (wd, dual_dir) = dual_shift(&w, dir);
                    let lhs = duality_pairing(&f.shifted(dir), &g)?;
                    let rhs = duality_pairing(&f, &g.shifted(dual_dir))?;
                    let bound = (seq_norm2(&f, &w) * seq_norm2(&g, &wd)).sqrt();
                    let bounded = duality_pairing(&f, &g)?.norm() <= bound * (1.0 + 1e-12);
                    let scale = term_scale(&f, &g);
                    v.push(if bounded { (lhs - rhs).norm() / scale } else { f64::INFINITY });
                }
            }
            Ok(SuiteSummary::from_values(name, &v, 4.0 * f64::EPSILON))
        }
        "ja" => {
            let mut v = Vec::new();
            for _ in 0..n {
                let r = rng.random_range(0.05..0.9);
                let a = (rng.random_range(0.05f64.ln()..5f64.ln())).exp();
                let closed = j_a_norms(r, a)?;
                let brute = j_a_norms_on_window(r, a, 200)?;
                v.push(((closed.norm2 - brute.norm2) / closed.norm2).abs());
                v.push(((closed.inv_norm2 - brute.inv_norm2) / closed.inv_norm2).abs());
            }
            let r = rng.random_range(0.05..0.9);
            let g = k_a_grid_min(r, 1e-3, 10.0, 1001, 4)?;
            let at_r = (g.a / r).ln().abs() <= g.step_ratio.ln() * (1.0 + 1e-9);
            v.push(if at_r && (g.k - 2f64.sqrt()).abs() <= 1e-6 { 0.0 } else { f64::INFINITY });
            Ok(SuiteSummary::from_values(name, &v, 1e-12))
        }
        "inclusion" => {
            let mut v = Vec::new();
            let per = (n / 100).max(1);
            for i in 0..10 {
                for j in 0..10 {
                    let r = 0.1 + 0.08 * i as f64;
                    let s = 0.1 + 0.08 * j as f64;
                    if s <= r {
                        let sampler = CalphaSampler::default();
                        for _ in 0..per {
                            let (op, _) = sampler.sample_with_r(&mut rng, r);
                            let m = is_in_c_beta(&op, s, tol.psd)?;
                            v.push(if m.is_member() { 0.0 } else { -m.margin });
                        }
                    } else {
                        let op = OperatorInstance::new(CMatrix::identity(2).scale_real(r), r)?;
                        let min = beta_form(&op, s)?.herm_eig()?.min();
                        let expected = (1.0 - r * r) * (r * r - s * s);
                        v.push(if min < 0.0 { (min - expected).abs() } else { f64::INFINITY });
                    }
                }
            }
            Ok(SuiteSummary::from_values(name, &v, 1e-12))
        }
        "zero_defect" => {
            let mut v = Vec::new();
            for k in 0..n {
                let r = rng.random_range(0.1..0.9);
                let dim = rng.random_range(1..=8);
                let op = if k % 2 == 0 {
                    catalog::normal_model(r, ModuliPattern::Mixed, dim, rng.random())?
                        .operator()
                        .expect("operator payload")
                        .clone()
                } else {
                    let b = boundary_normal(&mut rng, r, dim);
                    conjugate_random(&mut rng, &b, r)?
                };
                let rep = classify_zero_defect(&op, 1e-12, tol.normality)?;
                let bad = !rep.is_zero_defect || !rep.is_normal || rep.modulus_deviation > 1e-8;
                v.push(if bad { f64::INFINITY } else { rep.modulus_deviation });
            }
            Ok(SuiteSummary::from_values(name, &v, 1e-8))
        }
        "concavity" => {
            let ops = member_suite(seed, n, &CalphaSampler::default());
            let mut v = Vec::new();
            for op in &ops {
                let x = random_unit_vector(&mut rng, op.dim());
                let bl = broken_line(op, &x, -10, 10, tol.concavity)?;
                v.push((-bl.worst_defect).max(0.0));
            }
            let t1 = OperatorInstance::new(catalog::t1_matrix(), 0.5)?;
            let bl = broken_line(&t1, &catalog::e1(2), -10, 10, tol.concavity)?;
            v.push(if bl.concave { f64::INFINITY } else { 0.0 });
            Ok(SuiteSummary::from_values(name, &v, tol.concavity))
        }
        other => Err(invalid(format!("unknown suite {other:?}; expected one of {}", SUITES.join(", ")))),
    }
}

/// Random sequence supported in `[−12, 12]`.
pub fn random_seq<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> SeqVector {
    let len = rng.random_range(0..8);
    let terms: Vec<(i64, Vec<_>)> = (0..len)
        .map(|_| {
            (
                rng.random_range(-12..=12),
                (0..dim).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
            )
        })
        .collect();
    SeqVector::from_terms(dim, terms).expect("finite terms")
}

/// `Σ |fₙ|·|g₋ₙ₋₁|`-sized scale for pairing comparisons.
fn term_scale(f: &SeqVector, g: &SeqVector) -> f64 {
    let nf: f64 = f.iter().map(|(_, v)| v.iter().map(|z| z.norm()).sum::<f64>()).sum();
    let ng: f64 = g.iter().map(|(_, v)| v.iter().map(|z| z.norm()).sum::<f64>()).sum();
    (nf * ng).max(1.0)
}

/// `‖α(T*,T)‖₂`.
pub fn alpha_norm(op: &OperatorInstance) -> f64 {
    alpha_form(op).opnorm()
}
