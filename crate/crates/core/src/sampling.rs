//! Seeded random matrices and random members of `C_α`.
//!
//! Members are drawn from four constructions: finite parts of the model
//! backward shift (non-normal, positive defect), those parts summed with
//! boundary-normal blocks, normal matrices with spectrum in the closed
//! annulus, and accepted perturbations of the above. All except the shift
//! parts are conjugated by a random unitary.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::alpha_class::{alpha_form, OperatorInstance};
use crate::error::Result;
use crate::linalg::{c, CMatrix, CVector, C64};
use crate::model_spaces::shift_part;

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Ginibre matrix scaled by `1/√n`.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let s = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |_, _| complex_normal(rng) * s)
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| complex_normal(rng))
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    let v = random_vector(rng, n);
    let norm = v.norm();
    v / c(norm, 0.0)
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    random_matrix(rng, n).symmetrized()
}

/// Random PSD matrix `G G*` with a random rank in `1..=n`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let k = rng.random_range(1..=n);
    let g = CMatrix::from_fn(n, k, |_, _| complex_normal(rng));
    (&g * &g.adjoint()).symmetrized()
}

/// Haar-distributed unitary via QR with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g: DMatrix<C64> = DMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..n {
        let d = rr[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    CMatrix::from_inner(q)
}

/// Uniform point on the circle of radius `rho`.
pub fn on_circle<R: Rng + ?Sized>(rng: &mut R, rho: f64) -> C64 {
    C64::from_polar(rho, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Random member generator.
#[derive(Clone, Debug)]
pub struct CalphaSampler {
    pub min_dim: usize,
    pub max_dim: usize,
    pub r_range: (f64, f64),
    /// Eigenvalue moduli of the non-normal parts stay this fraction of
    /// `1 − r` away from both circles.
    pub interior_margin: f64,
}

impl Default for CalphaSampler {
    fn default() -> Self {
        Self {
            min_dim: 2,
            max_dim: 8,
            r_range: (0.15, 0.85),
            interior_margin: 0.1,
        }
    }
}

/// Which construction produced a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    ShiftPart,
    ShiftPartWithBoundary,
    Normal,
    Perturbed,
}

impl CalphaSampler {
    pub fn with_dims(min_dim: usize, max_dim: usize) -> Self {
        Self {
            min_dim,
            max_dim,
            ..Self::default()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> OperatorInstance {
        self.sample_tagged(rng).0
    }

    pub fn sample_tagged<R: Rng + ?Sized>(&self, rng: &mut R) -> (OperatorInstance, SampleKind) {
        let r = rng.random_range(self.r_range.0..self.r_range.1);
        self.sample_with_r(rng, r)
    }

    pub fn sample_with_r<R: Rng + ?Sized>(&self, rng: &mut R, r: f64) -> (OperatorInstance, SampleKind) {
        loop {
            let dim = rng.random_range(self.min_dim..=self.max_dim);
            let kind = match rng.random_range(0..4) {
                0 => SampleKind::ShiftPart,
                1 if dim >= 2 => SampleKind::ShiftPartWithBoundary,
                2 => SampleKind::Normal,
                _ => SampleKind::Perturbed,
            };
            let built = match kind {
                SampleKind::ShiftPart => self.shift_part(rng, r, dim),
                SampleKind::ShiftPartWithBoundary => {
                    let k = rng.random_range(1..dim);
                    self.shift_part(rng, r, k).and_then(|p| {
                        let b = boundary_normal(rng, r, dim - k);
                        conjugate_random(rng, &p.t().direct_sum(&b), r)
                    })
                }
                SampleKind::Normal => {
                    let t = annulus_normal(rng, r, dim, true);
                    conjugate_random(rng, &t, r)
                }
                SampleKind::Perturbed => self.perturbed(rng, r, dim),
            };
            if let Ok(op) = built {
                return (op, kind);
            }
        }
    }

    fn interior_modulus<R: Rng + ?Sized>(&self, rng: &mut R, r: f64) -> f64 {
        let m = self.interior_margin * (1.0 - r);
        rng.random_range(r + m..1.0 - m)
    }

    /// Restriction of the model shift to `dim` random kernel directions.
    pub fn shift_part<R: Rng + ?Sized>(&self, rng: &mut R, r: f64, dim: usize) -> Result<OperatorInstance> {
        let e_dim = rng.random_range(1..=dim.min(3));
        let nodes: Vec<(C64, CVector)> = (0..dim)
            .map(|_| {
                let rho = self.interior_modulus(rng, r);
                (on_circle(rng, rho), random_unit_vector(rng, e_dim))
            })
            .collect();
        let part = shift_part(r, &nodes)?;
        if part.gram_condition > 1e8 {
            return Err(crate::error::invalid("ill-conditioned kernel gram"));
        }
        Ok(part.op)
    }

    fn perturbed<R: Rng + ?Sized>(&self, rng: &mut R, r: f64, dim: usize) -> Result<OperatorInstance> {
        let base = if rng.random_bool(0.5) {
            self.shift_part(rng, r, dim)?
        } else {
            // Interior spectrum so that α(T*,T) is strictly positive.
            let d: Vec<C64> = (0..dim)
                .map(|_| {
                    let rho = self.interior_modulus(rng, r);
                    on_circle(rng, rho)
                })
                .collect();
            conjugate_random(rng, &CMatrix::from_diagonal(&d), r)?
        };
        let z = random_matrix(rng, dim);
        let mut eps = 0.05 * (1.0 - r);
        for _ in 0..12 {
            let t = base.t() + &z.scale_real(eps);
            if let Ok(op) = OperatorInstance::new(t, r) {
                let eig = alpha_form(&op).herm_eig()?;
                if eig.min() > 1e-9 * eig.max().abs().max(1.0) {
                    return Ok(op);
                }
            }
            eps *= 0.5;
        }
        Ok(base)
    }
}

/// `U ⊕ rV` style block: random unitary part and random `r·unitary` part.
pub fn boundary_normal<R: Rng + ?Sized>(rng: &mut R, r: f64, dim: usize) -> CMatrix {
    let d: Vec<C64> = (0..dim)
        .map(|_| {
            let rho = if rng.random_bool(0.5) { 1.0 } else { r };
            on_circle(rng, rho)
        })
        .collect();
    CMatrix::from_diagonal(&d)
}

/// Diagonal matrix with eigenvalues in the closed annulus; with
/// `allow_boundary` about a third of them land on the circles.
pub fn annulus_normal<R: Rng + ?Sized>(rng: &mut R, r: f64, dim: usize, allow_boundary: bool) -> CMatrix {
    let d: Vec<C64> = (0..dim)
        .map(|_| {
            let rho = match rng.random_range(0..6) {
                0 if allow_boundary => 1.0,
                1 if allow_boundary => r,
                _ => rng.random_range(r..1.0),
            };
            on_circle(rng, rho)
        })
        .collect();
    CMatrix::from_diagonal(&d)
}

/// `W* T W` for a random unitary `W`.
pub fn conjugate_random<R: Rng + ?Sized>(rng: &mut R, t: &CMatrix, r: f64) -> Result<OperatorInstance> {
    let w = random_unitary(rng, t.nrows());
    OperatorInstance::new(&(&w.adjoint() * t) * &w, r)
}
