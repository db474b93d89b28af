//! The output transform `x ↦ D(z−T)⁻¹x` in coefficient form.
//!
//! In Laurent order the coefficient of `zⁿ` is `cₙ = D T^{−n−1} x`: the
//! expansion is `−Σ_{n≥0} cₙzⁿ` for `|z| < r` and `Σ_{n≤−1} cₙzⁿ` for
//! `|z| > 1`. The weight of `zⁿ` in `H²_r(𝔹,𝔇)` is `r^{2n}/(1−r²)` for
//! `n ≥ 0` and `1/(1−r²)` for `n ≤ −1`, so the norm splits into the two
//! defect series.
//!
//! Coefficients with `n ≥ 0` grow like `r^{−n}`; they are stored in the
//! scaled form `r^{n+1}cₙ = D(rT⁻¹)^{n+1}x`.

use crate::asymptotics::{series_defect_neg, series_defect_pos, ModelData};
use crate::error::{Error, Result};
use crate::linalg::{cr, norm2, CMatrix, CVector, C64};
use crate::model_spaces::SeqVector;

#[derive(Clone, Debug)]
pub struct OutputCoefficients {
    pub r: f64,
    pub window: usize,
    /// `D Tᵐ x` for `m = 0..N`, i.e. `c_{−m−1}`.
    pub outer: Vec<CVector>,
    /// `D (rT⁻¹)^{k} x` for `k = 1..=N`, i.e. `r^k c_{k−1}`.
    pub inner_scaled: Vec<CVector>,
    pub remainder_pos: f64,
    pub remainder_neg: f64,
}

impl OutputCoefficients {
    /// `cₙ = D T^{−n−1} x` for `−N ≤ n ≤ N−1`.
    pub fn coeff(&self, n: i64) -> Option<CVector> {
        let w = self.window as i64;
        if n < -w || n >= w {
            None
        } else if n < 0 {
            Some(self.outer[(-n - 1) as usize].clone())
        } else {
            let s = &self.inner_scaled[n as usize];
            Some(s / cr(self.r.powi(n as i32 + 1)))
        }
    }

    /// `√wₙ · cₙ`, finite for every window size.
    pub fn weighted(&self, n: i64) -> Option<CVector> {
        let w = self.window as i64;
        let s = 1.0 / (1.0 - self.r * self.r).sqrt();
        if n < -w || n >= w {
            None
        } else if n < 0 {
            Some(&self.outer[(-n - 1) as usize] * cr(s))
        } else {
            Some(&self.inner_scaled[n as usize] * cr(s / self.r))
        }
    }

    /// SeqVector in `ell2_r` order (index `m = −n−1` holds `D Tᵐ x`), with
    /// coefficients expressed in the orthonormal defect basis.
    pub fn to_seq_vector(&self, defect_basis: &CMatrix) -> SeqVector {
        let k = defect_basis.ncols();
        let mut out = SeqVector::zero(k);
        if k == 0 {
            return out;
        }
        let proj = defect_basis.adjoint();
        let w = self.window as i64;
        for n in -w..w {
            let v = proj.mul_vec(&self.coeff(n).expect("index inside window"));
            let _ = out.insert(-n - 1, v.iter().copied().collect());
        }
        out
    }
}

pub fn output_transform(m: &ModelData, x: &CVector, window: usize) -> Result<OutputCoefficients> {
    if x.len() != m.dim() {
        return Err(Error::DimMismatch {
            expected: m.dim(),
            found: x.len(),
        });
    }
    let d = &m.defect.d;
    let mut outer = Vec::with_capacity(window);
    let mut y = x.clone();
    for _ in 0..window {
        outer.push(d.mul_vec(&y));
        y = m.op.t().mul_vec(&y);
    }
    let mut inner_scaled = Vec::with_capacity(window);
    let mut z = x.clone();
    for _ in 0..window {
        z = m.reflected.t().mul_vec(&z);
        inner_scaled.push(d.mul_vec(&z));
    }
    let p = series_defect_pos(m, x, window)?;
    let q = series_defect_neg(m, x, window)?;
    Ok(OutputCoefficients {
        r: m.r(),
        window,
        outer,
        inner_scaled,
        remainder_pos: p.remainder,
        remainder_neg: q.remainder,
    })
}

/// Truncated Laurent expansion of the output at `z`, with the sign of each
/// region. `None` on the closed annulus.
pub fn output_series_at(oc: &OutputCoefficients, z: C64) -> Option<CVector> {
    let dim = oc.outer.first()?.len();
    let mut acc = CVector::zeros(dim);
    if z.norm() < oc.r {
        // cₙzⁿ = r^{−n−1} sₙ zⁿ = sₙ (z/r)ⁿ / r
        let w = z / cr(oc.r);
        let mut wn = cr(1.0 / oc.r);
        for s in &oc.inner_scaled {
            acc -= s * wn;
            wn *= w;
        }
        Some(acc)
    } else if z.norm() > 1.0 {
        let zi = cr(1.0) / z;
        let mut zn = zi;
        for c in &oc.outer {
            acc += c * zn;
            zn *= zi;
        }
        Some(acc)
    } else {
        None
    }
}

/// `‖Σ ± cₙzⁿ − D(z−T)⁻¹x‖ / max(1, ‖D(z−T)⁻¹x‖)`.
pub fn resolvent_residual(m: &ModelData, oc: &OutputCoefficients, x: &CVector, z: C64) -> Result<f64> {
    let series = output_series_at(oc, z).ok_or_else(|| crate::error::invalid("z must lie off the closed annulus"))?;
    let resolvent = (&CMatrix::identity(m.dim()).scale(z) - m.op.t()).inverse()?;
    let direct = m.defect.d.mul_vec(&resolvent.mul_vec(x));
    Ok((series - &direct).norm() / direct.norm().max(1.0))
}

/// `‖O x‖²` in `H²_r(𝔹,𝔇)`, closed with the exact remainders.
pub fn output_norm2(oc: &OutputCoefficients) -> f64 {
    let r2 = oc.r * oc.r;
    let pos: f64 = oc.outer.iter().map(norm2).sum::<f64>() + oc.remainder_pos;
    let neg: f64 = oc.inner_scaled.iter().map(norm2).sum::<f64>() / r2 + oc.remainder_neg;
    (pos + neg) / (1.0 - r2)
}

/// `|‖x‖² − ‖Ox‖² − L⁺(T,x) − L⁻(T,x)|`.
pub fn lifting_isometry_residual(m: &ModelData, x: &CVector, window: usize) -> Result<f64> {
    let oc = output_transform(m, x, window)?;
    Ok((norm2(x) - output_norm2(&oc) - m.gramians.l_plus(x) - m.gramians.l_minus(x)).abs())
}

/// Weighted sup over the window of `‖c'ₙ − c_{n−1}‖`, where `c'` are the
/// coefficients of `O(Tx)`: the output of `Tx` is the output of `x` shifted
/// one step in Laurent order.
pub fn intertwining_residual(m: &ModelData, x: &CVector, window: usize) -> Result<f64> {
    let oc = output_transform(m, x, window)?;
    let tx = m.op.t().mul_vec(x);
    let ot = output_transform(m, &tx, window)?;
    let w = window as i64;
    let mut sup = 0.0f64;
    for n in (-w + 1)..w {
        // √wₙ c_{n−1} = √(wₙ/w_{n−1}) · √w_{n−1}c_{n−1}, the ratio being r for n ≥ 1.
        let ratio = if n >= 1 { oc.r } else { 1.0 };
        let shifted = oc.weighted(n - 1).expect("inside window") * cr(ratio);
        let diff = ot.weighted(n).expect("inside window") - shifted;
        sup = sup.max(diff.norm());
    }
    Ok(sup / x.norm().max(1.0))
}

/// `Σ_{k≥0} (Pᵏ)* X Pᵏ` by doubling, stopping once the added block is below
/// `tol` relative to the running sum. Round-off on the part of `P` with
/// unimodular spectrum doubles with every step, so `tol` has to stay well
/// above machine precision.
fn stein_sum(p: &CMatrix, x: &CMatrix, tol: f64, max_doublings: usize) -> Result<CMatrix> {
    let mut sum = x.symmetrized();
    let mut pk = p.clone();
    let mut size = f64::INFINITY;
    for _ in 0..max_doublings {
        let add = (&(&pk.adjoint() * &sum) * &pk).symmetrized();
        size = add.opnorm();
        sum = &sum + &add;
        if size <= tol * sum.opnorm().max(1.0) {
            return Ok(sum);
        }
        pk = &pk * &pk;
    }
    Err(Error::NoConvergence {
        what: "output gramian",
        iterations: max_doublings,
        residual: size,
    })
}

/// `O*O` as a convergent matrix series, computed without the remainder
/// identities.
pub fn output_gramian(m: &ModelData, tol: f64, max_doublings: usize) -> Result<CMatrix> {
    let r2 = m.r() * m.r();
    let d2 = m.defect.d_squared();
    let pos = stein_sum(m.op.t(), &d2, tol, max_doublings)?;
    let s = m.reflected.t();
    let inner = stein_sum(s, &d2, tol, max_doublings)?;
    let neg = (&(&s.adjoint() * &inner) * s).scale_real(1.0 / r2);
    Ok((&pos + &neg).scale_real(1.0 / (1.0 - r2)).symmetrized())
}

/// `‖O*O + Q₊ + Q₋ − I‖₂`.
pub fn gramian_residual(m: &ModelData, tol: f64, max_doublings: usize) -> Result<f64> {
    let g = output_gramian(m, tol, max_doublings)?;
    let total = &(&g + &m.gramians.q_plus) + &m.gramians.q_minus;
    Ok((&total - &CMatrix::identity(m.dim())).opnorm())
}
