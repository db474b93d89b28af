//! Limit gramians, the defect series and the broken-line diagnostic.
//!
//! `Q₊ = lim (Tⁿ)*Tⁿ` and `Q₋ = lim r^{2n}(T⁻ⁿ)*T⁻ⁿ` represent
//! `L⁺(T,x) = x*Q₊x` and `L⁻(T,x) = x*Q₋x`. Both series of defects are
//! summed over a finite window and closed with their exact remainders.

use serde::{Deserialize, Serialize};

use crate::alpha_class::{defect, invert_scale, is_in_c_1r, DefectData, OperatorInstance};
use crate::config::Tolerances;
use crate::error::{invalid, Error, Result};
use crate::linalg::{norm2, CMatrix, CVector};

#[derive(Clone, Debug)]
pub struct AsymptoticData {
    pub q_plus: CMatrix,
    pub q_minus: CMatrix,
    /// Doublings used by the slower of the two limits.
    pub iterations: usize,
    /// `max(‖T*Q₊T − Q₊‖₂, ‖r²(T⁻¹)*Q₋T⁻¹ − Q₋‖₂)`.
    pub residual: f64,
}

impl AsymptoticData {
    pub fn l_plus(&self, x: &CVector) -> f64 {
        self.q_plus.quad_form(x)
    }

    pub fn l_minus(&self, x: &CVector) -> f64 {
        self.q_minus.quad_form(x)
    }
}

/// `lim (Pⁿ)*Pⁿ` by repeated squaring. Returns the limit and the number of
/// doublings.
fn power_gramian(p: &CMatrix, tol: f64, max_doublings: usize) -> Result<(CMatrix, usize)> {
    let mut pk = p.clone();
    let mut q = (&pk.adjoint() * &pk).symmetrized();
    let mut change = f64::INFINITY;
    for k in 1..=max_doublings {
        pk = &pk * &pk;
        if !pk.is_finite() {
            break;
        }
        let next = (&pk.adjoint() * &pk).symmetrized();
        change = (&next - &q).opnorm();
        q = next;
        if change <= tol {
            let fixed = (&(&(&p.adjoint() * &q) * p) - &q).opnorm();
            if fixed <= tol {
                return Ok((q, k));
            }
        }
    }
    Err(Error::NoConvergence {
        what: "limit gramian",
        iterations: max_doublings,
        residual: change,
    })
}

pub fn limit_gramians(op: &OperatorInstance, tol: f64, max_doublings: usize) -> Result<AsymptoticData> {
    if !is_in_c_1r(op, 1e-8).is_member() {
        return Err(invalid("limit gramians need ‖T‖ ≤ 1 and ‖T⁻¹‖ ≤ 1/r"));
    }
    let (q_plus, i1) = power_gramian(op.t(), tol, max_doublings)?;
    let reflected = invert_scale(op)?;
    let (q_minus, i2) = power_gramian(reflected.t(), tol, max_doublings)?;
    let r1 = (&(&(&op.t().adjoint() * &q_plus) * op.t()) - &q_plus).opnorm();
    let r2 = (&(&(&reflected.t().adjoint() * &q_minus) * reflected.t()) - &q_minus).opnorm();
    Ok(AsymptoticData {
        q_plus,
        q_minus,
        iterations: i1.max(i2),
        residual: r1.max(r2),
    })
}

/// Everything the series and lifting computations need about one operator.
#[derive(Clone, Debug)]
pub struct ModelData {
    pub op: OperatorInstance,
    /// `rT⁻¹`.
    pub reflected: OperatorInstance,
    pub defect: DefectData,
    pub gramians: AsymptoticData,
}

impl ModelData {
    pub fn new(op: &OperatorInstance, tol: &Tolerances) -> Result<Self> {
        let defect = defect(op, tol.psd, tol.defect_rank)?;
        let gramians = limit_gramians(op, tol.gramian, tol.max_doublings)?;
        Ok(Self {
            op: op.clone(),
            reflected: invert_scale(op)?,
            defect,
            gramians,
        })
    }

    pub fn r(&self) -> f64 {
        self.op.r()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    fn check_vector(&self, x: &CVector) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimMismatch {
                expected: self.dim(),
                found: x.len(),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub partial: f64,
    pub remainder: f64,
    pub rhs: f64,
}

impl SeriesReport {
    pub fn residual(&self) -> f64 {
        (self.partial + self.remainder - self.rhs).abs()
    }

    pub fn total(&self) -> f64 {
        self.partial + self.remainder
    }
}

/// `Σ_{n=0}^{N−1} ‖DTⁿx‖²` with remainder `‖T^{N+1}x‖² − r²‖T^N x‖² + (r²−1)L⁺`.
pub fn series_defect_pos(m: &ModelData, x: &CVector, n: usize) -> Result<SeriesReport> {
    m.check_vector(x)?;
    let r2 = m.r() * m.r();
    let t = m.op.t();
    let lp = m.gramians.l_plus(x);
    let mut y = x.clone();
    let mut partial = 0.0;
    for _ in 0..n {
        partial += norm2(&m.defect.d.mul_vec(&y));
        y = t.mul_vec(&y);
    }
    let ty = t.mul_vec(&y);
    Ok(SeriesReport {
        partial,
        remainder: norm2(&ty) - r2 * norm2(&y) + (r2 - 1.0) * lp,
        rhs: norm2(&t.mul_vec(x)) - r2 * norm2(x) + (r2 - 1.0) * lp,
    })
}

/// `Σ_{n=−N}^{−1} r^{−2n−2}‖DTⁿx‖²`, evaluated on the scaled iterates
/// `z_k = (rT⁻¹)^k x`.
pub fn series_defect_neg(m: &ModelData, x: &CVector, n: usize) -> Result<SeriesReport> {
    m.check_vector(x)?;
    let r = m.r();
    let r2 = r * r;
    let s = m.reflected.t();
    let lm = m.gramians.l_minus(x);
    let tx = m.op.t().mul_vec(x);
    // z_{k−1} and z_k
    let mut prev = tx.clone() / crate::linalg::cr(r);
    let mut z = x.clone();
    let mut partial = 0.0;
    for _ in 0..n {
        let next = s.mul_vec(&z);
        partial += norm2(&m.defect.d.mul_vec(&next)) / r2;
        prev = std::mem::replace(&mut z, next);
    }
    Ok(SeriesReport {
        partial,
        remainder: norm2(&z) - r2 * norm2(&prev) + (r2 - 1.0) * lm,
        rhs: norm2(x) - norm2(&tx) + (r2 - 1.0) * lm,
    })
}

/// `|‖x‖² − (S₊ + S₋)/(1−r²) − L⁺ − L⁻|` from the two series.
pub fn norm_identity_residual_vec(m: &ModelData, x: &CVector, n: usize) -> Result<f64> {
    let p = series_defect_pos(m, x, n)?;
    let q = series_defect_neg(m, x, n)?;
    let r2 = m.r() * m.r();
    Ok((norm2(x) - (p.total() + q.total()) / (1.0 - r2) - m.gramians.l_plus(x) - m.gramians.l_minus(x)).abs())
}

/// `‖I − G − Q₊ − Q₋‖₂`, with `G` the operator form of both series over a
/// window of `n` terms each, closed with the operator remainders.
pub fn norm_identity_residual(m: &ModelData, n: usize) -> f64 {
    let d = m.dim();
    let r2 = m.r() * m.r();
    let d2 = m.defect.d_squared();
    let q_plus = &m.gramians.q_plus;
    let q_minus = &m.gramians.q_minus;
    let gram = |p: &CMatrix| &p.adjoint() * p;

    let mut pos = CMatrix::zeros(d, d);
    let mut p = CMatrix::identity(d);
    for _ in 0..n {
        pos = &pos + &(&(&p.adjoint() * &d2) * &p);
        p = m.op.t() * &p;
    }
    let tp = m.op.t() * &p;
    let pos = &(&pos + &gram(&tp)) - &(&gram(&p).scale_real(r2) - &q_plus.scale_real(r2 - 1.0));

    let s = m.reflected.t();
    let mut neg = CMatrix::zeros(d, d);
    let mut prev = m.op.t().scale_real(1.0 / m.r());
    let mut z = CMatrix::identity(d);
    for _ in 0..n {
        let next = s * &z;
        neg = &neg + &(&(&next.adjoint() * &d2) * &next).scale_real(1.0 / r2);
        prev = std::mem::replace(&mut z, next);
    }
    let neg = &(&neg + &gram(&z)) - &(&gram(&prev).scale_real(r2) - &q_minus.scale_real(r2 - 1.0));

    let g = (&pos + &neg).scale_real(1.0 / (1.0 - r2));
    (&(&(&CMatrix::identity(d) - &g) - q_plus) - q_minus).opnorm()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BrokenLinePoint {
    pub n: i64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BrokenLine {
    pub points: Vec<BrokenLinePoint>,
    pub concave: bool,
    /// Most negative normalized second difference (≥ 0 when concave).
    pub worst_defect: f64,
    /// Index `n` of the first vertex of the worst triple.
    pub worst_at: Option<i64>,
}

impl BrokenLine {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,x,y\n");
        for p in &self.points {
            out.push_str(&format!("{},{:e},{:e}\n", p.n, p.x, p.y));
        }
        out
    }
}

/// Vertices `(r^{2n}, ‖Tⁿx‖²)` for `n_min ≤ n ≤ n_max` and their discrete
/// concavity. Slopes decrease along the line iff
/// `(1+r²)y_{n+1} − y_{n+2} − r²yₙ ≥ 0` for every triple; each triple is
/// compared against `tol` times its largest `y`.
pub fn broken_line(op: &OperatorInstance, x: &CVector, n_min: i64, n_max: i64, tol: f64) -> Result<BrokenLine> {
    if n_min > n_max {
        return Err(invalid("window requires n_min ≤ n_max"));
    }
    if x.len() != op.dim() {
        return Err(Error::DimMismatch {
            expected: op.dim(),
            found: x.len(),
        });
    }
    let r = op.r();
    let power_vec = |n: i64| -> CVector {
        let (m, k) = if n >= 0 { (op.t(), n) } else { (op.t_inv(), -n) };
        let mut v = x.clone();
        for _ in 0..k {
            v = m.mul_vec(&v);
        }
        v
    };
    let points: Vec<BrokenLinePoint> = (n_min..=n_max)
        .map(|n| BrokenLinePoint {
            n,
            x: r.powi((2 * n) as i32),
            y: norm2(&power_vec(n)),
        })
        .collect();
    let r2 = r * r;
    let mut worst = f64::INFINITY;
    let mut worst_at = None;
    for w in points.windows(3) {
        let (a, b, c) = (w[0].y, w[1].y, w[2].y);
        let scale = a.max(b).max(c);
        let second = (1.0 + r2) * b - c - r2 * a;
        let normalized = if scale > 0.0 { second / scale } else { 0.0 };
        if normalized < worst {
            worst = normalized;
            worst_at = Some(w[0].n);
        }
    }
    if worst_at.is_none() {
        worst = 0.0;
    }
    Ok(BrokenLine {
        points,
        concave: worst >= -tol,
        worst_defect: worst,
        worst_at,
    })
}
