//! Closed-form and fast-path results checked against slow direct computations.

use annulus_core::alpha_class::{alpha_form, invert_scale, is_in_c_alpha};
use annulus_core::asymptotics::{series_defect_neg, series_defect_pos, ModelData};
use annulus_core::lifting::{output_series_at, output_transform};
use annulus_core::linalg::{c, cr, norm2};
use annulus_core::sampling::{random_unitary, random_vector, CalphaSampler};
use annulus_core::spectral_bounds::{k_ratio, LaurentRational};
use annulus_core::{CMatrix, CVector, Execution, Tolerances, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn samples(seed: u64, n: usize) -> Vec<(ModelData, CVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = CalphaSampler::with_dims(2, 5);
    let tol = Tolerances::default();
    (0..n)
        .map(|_| {
            let op = sampler.sample(&mut rng);
            let x = random_vector(&mut rng, op.dim());
            (ModelData::new(&op, &tol).unwrap(), x)
        })
        .collect()
}

fn iterate(m: &CMatrix, x: &CVector, steps: usize) -> CVector {
    let mut y = x.clone();
    for _ in 0..steps {
        y = m.mul_vec(&y);
    }
    y
}

#[test]
fn limit_gramians_match_plain_iteration() {
    for (m, x) in samples(11, 40) {
        let steps = 4000;
        let plus = norm2(&iterate(m.op.t(), &x, steps));
        let minus = norm2(&iterate(m.reflected.t(), &x, steps));
        let scale = norm2(&x);
        assert!((plus - m.gramians.l_plus(&x)).abs() <= 1e-7 * scale, "L+ {plus} vs {}", m.gramians.l_plus(&x));
        assert!((minus - m.gramians.l_minus(&x)).abs() <= 1e-7 * scale, "L- {minus} vs {}", m.gramians.l_minus(&x));
    }
}

#[test]
fn defect_series_match_long_direct_sums() {
    for (m, x) in samples(12, 25) {
        let r2 = m.r() * m.r();
        let d = &m.defect.d;
        let mut pos = 0.0;
        let mut y = x.clone();
        for _ in 0..4000 {
            pos += norm2(&d.mul_vec(&y));
            y = m.op.t().mul_vec(&y);
        }
        let mut neg = 0.0;
        let mut z = x.clone();
        for _ in 0..4000 {
            z = m.reflected.t().mul_vec(&z);
            neg += norm2(&d.mul_vec(&z)) / r2;
        }
        let p = series_defect_pos(&m, &x, 16).unwrap();
        let q = series_defect_neg(&m, &x, 16).unwrap();
        let scale = norm2(&x);
        assert!((pos - p.total()).abs() <= 1e-7 * scale, "{pos} vs {}", p.total());
        assert!((neg - q.total()).abs() <= 1e-7 * scale, "{neg} vs {}", q.total());
    }
}

#[test]
fn output_series_matches_resolvent_on_both_sides() {
    for (m, x) in samples(13, 20) {
        let oc = output_transform(&m, &x, 400).unwrap();
        let r = m.r();
        for z in [c(1.7, 0.4), c(-0.3, -2.0), c(0.4 * r, 0.2 * r), c(0.0, -0.5 * r)] {
            let resolvent = (&CMatrix::identity(m.dim()).scale(z) - m.op.t()).inverse().unwrap();
            let direct = m.defect.d.mul_vec(&resolvent.mul_vec(&x));
            let series = output_series_at(&oc, z).unwrap();
            let err = (series - &direct).norm() / direct.norm().max(1.0);
            assert!(err <= 1e-9, "z={z} r={r} err={err:e} dim={}", m.dim());
        }
        assert!(output_series_at(&oc, cr(0.5 * (1.0 + r))).is_none());
    }
}

#[test]
fn monomials_respect_the_trivial_bounds() {
    // ‖Tᵏ‖ ≤ 1 and ‖T⁻ᵏ‖ ≤ r⁻ᵏ, so zᵏ and z⁻ᵏ never beat ratio 1.
    for (m, _) in samples(14, 20) {
        for k in [1, 3, -1, -2] {
            let f = LaurentRational::scalar_laurent(&[(k, cr(1.0))]);
            let rep = k_ratio(&f, &m.op, 512, Execution::Sequential).unwrap();
            assert!(rep.ratio <= 1.0 + 1e-9, "k={k}: {}", rep.ratio);
        }
    }
}

#[test]
fn unitary_conjugation_preserves_everything() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let tol = Tolerances::default();
    for (m, x) in samples(16, 20) {
        let u = random_unitary(&mut rng, m.dim());
        let conj = m.op.conjugated(&u).unwrap();
        let a = is_in_c_alpha(&m.op, tol.psd).unwrap();
        let b = is_in_c_alpha(&conj, tol.psd).unwrap();
        assert!((a.margin - b.margin).abs() < 1e-9);
        let mc = ModelData::new(&conj, &tol).unwrap();
        let ux = u.adjoint().mul_vec(&x);
        assert!((m.gramians.l_plus(&x) - mc.gramians.l_plus(&ux)).abs() < 1e-8);
        assert!((m.gramians.l_minus(&x) - mc.gramians.l_minus(&ux)).abs() < 1e-8);
    }
}

#[test]
fn reflection_is_an_involution_on_the_class() {
    for (m, _) in samples(17, 30) {
        let back = invert_scale(&invert_scale(&m.op).unwrap()).unwrap();
        assert!(back.t().max_abs_diff(m.op.t()) < 1e-10);
        let alpha = alpha_form(&m.reflected);
        assert!(alpha.herm_eig().unwrap().min() > -1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn asymptotic_limits_are_shift_covariant(seed in 0u64..10_000, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let (m, x) = samples(seed, 1).pop().unwrap();
        let r2 = m.r() * m.r();
        let tx = m.op.t().mul_vec(&x);
        let g = &m.gramians;
        let s = 1.0 + norm2(&x);
        prop_assert!((g.l_plus(&tx) - g.l_plus(&x)).abs() <= 1e-8 * s);
        prop_assert!((g.l_minus(&tx) - r2 * g.l_minus(&x)).abs() <= 1e-8 * s);
        let k = C64::new(re, im);
        let kx = &x * k;
        prop_assert!((g.l_plus(&kx) - k.norm_sqr() * g.l_plus(&x)).abs() <= 1e-8 * s * (1.0 + k.norm_sqr()));
        prop_assert!(g.l_plus(&x) + g.l_minus(&x) <= norm2(&x) * (1.0 + 1e-9));
    }
}
