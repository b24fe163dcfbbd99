//! Pointwise tensor algebra and the covariant operator zoo.
//!
//! Conventions, fixed once and verified by the adjointness and curvature
//! tests at the bottom:
//!
//! * Gamma^k_ij = (1/2) g^kl (d_i g_lj + d_j g_li - d_l g_ij)
//! * R_ijkl = (1/2)(dd_jk g_il + dd_il g_jk - dd_jl g_ik - dd_ik g_jl)
//!           + g_pq (Gamma^p_jk Gamma^q_il - Gamma^p_jl Gamma^q_ik),
//!   so the round metric of curvature c gives R_ijkl = c (g_ik g_jl - g_il g_jk).
//! * Ric_ij = g^ab R_aibj, positive on spheres; scal = g^ij Ric_ij.
//! * (div h)(x) = -(D_i h)(e^i, x); (div* w)(x,y) = ((D_x w)(y) + (D_y w)(x))/2.
//! * (dD a)(x,y,z) = (D_y a)(x,z) - (D_z a)(x,y)
//! * (deltaD A)(x,y) = (D_i A)(x,y,e^i) + (D_i A)(y,x,e^i), the exact formal
//!   adjoint of dD (no extra factor; see `adjointness_of_dd_and_deltad`).
//! * Laplacians are geometers' sign: Delta f = -tr D df has positive spectrum.

use crate::field::{unpack, TensorField};
use crate::manifold::DiscreteManifold;
use crate::Real;
use rayon::prelude::*;

/// Pointwise inverse and determinant of a symmetric (0,2) field.
pub fn sym_inverse_det(g: &TensorField) -> (TensorField, Vec<Real>) {
    let d = g.dims;
    let n = g.n_nodes;
    let mut inv = TensorField::zeros(2, d, n);
    let mut det = vec![0.0; n];
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d * d];
    for t in 0..n {
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] = g.comp(i * d + j)[t];
            }
        }
        let dt = invert_small(&mut a, &mut b, d);
        det[t] = dt;
        for i in 0..d {
            for j in 0..d {
                inv.comp_mut(i * d + j)[t] = b[i * d + j];
            }
        }
    }
    (inv, det)
}

/// Gauss-Jordan with partial pivoting for d <= 4; returns the determinant and
/// leaves the inverse in `b`. `a` is destroyed.
fn invert_small(a: &mut [Real], b: &mut [Real], d: usize) -> Real {
    b.fill(0.0);
    for i in 0..d {
        b[i * d + i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..d {
        let mut piv = col;
        for r in col + 1..d {
            if a[r * d + col].abs() > a[piv * d + col].abs() {
                piv = r;
            }
        }
        if piv != col {
            for k in 0..d {
                a.swap(col * d + k, piv * d + k);
                b.swap(col * d + k, piv * d + k);
            }
            det = -det;
        }
        let p = a[col * d + col];
        det *= p;
        let ip = 1.0 / p;
        for k in 0..d {
            a[col * d + k] *= ip;
            b[col * d + k] *= ip;
        }
        for r in 0..d {
            if r == col {
                continue;
            }
            let f = a[r * d + col];
            if f != 0.0 {
                for k in 0..d {
                    a[r * d + k] -= f * a[col * d + k];
                    b[r * d + k] -= f * b[col * d + k];
                }
            }
        }
    }
    det
}

/// Gamma^k_ij from an inverse metric and metric derivatives dg[a,i,j] = d_a g_ij.
pub fn christoffel(g_inv: &TensorField, dg: &TensorField) -> TensorField {
    let d = g_inv.dims;
    let n = g_inv.n_nodes;
    let mut out = TensorField::zeros(3, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let k = c / (d * d);
        let i = (c / d) % d;
        let j = c % d;
        for l in 0..d {
            let gi = g_inv.comp(k * d + l);
            let t1 = dg.comp((i * d + l) * d + j);
            let t2 = dg.comp((j * d + l) * d + i);
            let t3 = dg.comp((l * d + i) * d + j);
            for (s, (((&gv, &a), &b), &cc)) in
                dst.iter_mut().zip(gi.iter().zip(t1).zip(t2).zip(t3))
            {
                *s += 0.5 * gv * (a + b - cc);
            }
        }
    });
    out
}

/// Fully covariant curvature R_ijkl from the metric, Christoffel symbols and
/// second metric derivatives ddg[a,b,i,j] = d_a d_b g_ij.
pub fn riemann_from(g: &TensorField, gamma: &TensorField, ddg: &TensorField) -> TensorField {
    let d = g.dims;
    let n = g.n_nodes;
    let mut out = TensorField::zeros(4, d, n);
    let cidx2 = |a: usize, b: usize| a * d + b;
    let cidx4 = |a: usize, b: usize, c: usize, e: usize| ((a * d + b) * d + c) * d + e;
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let i = c / (d * d * d);
        let j = (c / (d * d)) % d;
        let k = (c / d) % d;
        let l = c % d;
        let h1 = ddg.comp(cidx4(j, k, i, l));
        let h2 = ddg.comp(cidx4(i, l, j, k));
        let h3 = ddg.comp(cidx4(j, l, i, k));
        let h4 = ddg.comp(cidx4(i, k, j, l));
        for (t, s) in dst.iter_mut().enumerate() {
            *s = 0.5 * (h1[t] + h2[t] - h3[t] - h4[t]);
        }
        for p in 0..d {
            for q in 0..d {
                let gpq = g.comp(cidx2(p, q));
                let gjk = gamma.comp((p * d + j) * d + k);
                let gil = gamma.comp((q * d + i) * d + l);
                let gjl = gamma.comp((p * d + j) * d + l);
                let gik = gamma.comp((q * d + i) * d + k);
                for (t, s) in dst.iter_mut().enumerate() {
                    *s += gpq[t] * (gjk[t] * gil[t] - gjl[t] * gik[t]);
                }
            }
        }
    });
    out
}

pub fn ricci_from(g_inv: &TensorField, riemann: &TensorField) -> TensorField {
    let d = g_inv.dims;
    let n = g_inv.n_nodes;
    let mut out = TensorField::zeros(2, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let i = c / d;
        let j = c % d;
        for a in 0..d {
            for b in 0..d {
                let gi = g_inv.comp(a * d + b);
                let r = riemann.comp(((a * d + i) * d + b) * d + j);
                for (t, s) in dst.iter_mut().enumerate() {
                    *s += gi[t] * r[t];
                }
            }
        }
    });
    out
}

/// g^ij h_ij pointwise.
pub fn trace_sym2(g_inv: &TensorField, h: &TensorField) -> Vec<Real> {
    let d = g_inv.dims;
    let n = g_inv.n_nodes;
    let mut out = vec![0.0; n];
    for i in 0..d {
        for j in 0..d {
            let gi = g_inv.comp(i * d + j);
            let hc = h.comp(i * d + j);
            for t in 0..n {
                out[t] += gi[t] * hc[t];
            }
        }
    }
    out
}

/// Raise one slot: out[.. a ..] = g^{ab} t[.. b ..].
pub fn raise_slot(g_inv: &TensorField, t: &TensorField, slot: usize) -> TensorField {
    let d = t.dims;
    let n = t.n_nodes;
    let v = t.valence;
    let mut out = TensorField::zeros(v, d, n);
    let stride = d.pow((v - 1 - slot) as u32);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let a = (c / stride) % d;
        let base = c - a * stride;
        for b in 0..d {
            let gi = g_inv.comp(a * d + b);
            let tc = t.comp(base + b * stride);
            for (t0, s) in dst.iter_mut().enumerate() {
                *s += gi[t0] * tc[t0];
            }
        }
    });
    out
}

/// Raise every slot.
pub fn raise_all(g_inv: &TensorField, t: &TensorField) -> TensorField {
    let mut cur = t.clone();
    for s in 0..t.valence {
        cur = raise_slot(g_inv, &cur, s);
    }
    cur
}

/// Pointwise full contraction <t, s> with all slots raised on s.
pub fn pointwise_inner(g_inv: &TensorField, t: &TensorField, s: &TensorField) -> Vec<Real> {
    assert_eq!(t.valence, s.valence);
    let up = raise_all(g_inv, s);
    let n = t.n_nodes;
    let mut out = vec![0.0; n];
    for c in 0..t.comps() {
        let a = t.comp(c);
        let b = up.comp(c);
        for t0 in 0..n {
            out[t0] += a[t0] * b[t0];
        }
    }
    out
}

pub fn norm2_pointwise(g_inv: &TensorField, t: &TensorField) -> Vec<Real> {
    pointwise_inner(g_inv, t, t)
}

/// Rcheck_ij = R_ipqr R_j^pqr.
pub fn rcheck_from(g_inv: &TensorField, riemann: &TensorField) -> TensorField {
    let d = g_inv.dims;
    let n = g_inv.n_nodes;
    let mut up = riemann.clone();
    for s in 1..4 {
        up = raise_slot(g_inv, &up, s);
    }
    let mut out = TensorField::zeros(2, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let i = c / d;
        let j = c % d;
        for p in 0..d {
            for q in 0..d {
                for r in 0..d {
                    let a = riemann.comp(((i * d + p) * d + q) * d + r);
                    let b = up.comp(((j * d + p) * d + q) * d + r);
                    for (t0, s) in dst.iter_mut().enumerate() {
                        *s += a[t0] * b[t0];
                    }
                }
            }
        }
    });
    out
}

/// Covariant derivative, direction slot first: (D t)[a, I] = d_a t_I - sum_s
/// Gamma^m_{a i_s} t_{I, i_s -> m}.
pub fn cov_deriv(m: &DiscreteManifold, t: &TensorField) -> TensorField {
    let mut out = m.partial_derivs(t);
    let dim = m.dim;
    let v = t.valence;
    let n = t.n_nodes;
    let comps_t = t.comps();
    out.data.par_chunks_mut(n).enumerate().for_each(|(ac, dst)| {
        let a = ac / comps_t;
        let c = ac % comps_t;
        let mut idx = [0usize; 8];
        unpack(c, v, dim, &mut idx[..v]);
        for s in 0..v {
            let i_s = idx[s];
            let stride = dim.pow((v - 1 - s) as u32);
            let base = c - i_s * stride;
            for mm in 0..dim {
                let gam = m.gamma.comp((mm * dim + a) * dim + i_s);
                let tc = t.comp(base + mm * stride);
                for (x, (&gv, &tv)) in dst.iter_mut().zip(gam.iter().zip(tc)) {
                    *x -= gv * tv;
                }
            }
        }
    });
    out
}

/// Contract the first two slots with the inverse metric and negate:
/// out = -g^{ab} t[a, b, rest]. Applied to D t this is D* t (and div on
/// symmetric 2-tensors).
fn neg_contract_01(g_inv: &TensorField, t: &TensorField) -> TensorField {
    let d = t.dims;
    let n = t.n_nodes;
    let v = t.valence - 2;
    let rest = d.pow(v as u32);
    let mut out = TensorField::zeros(v, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        for a in 0..d {
            for b in 0..d {
                let gi = g_inv.comp(a * d + b);
                let tc = t.comp((a * d + b) * rest + c);
                for (t0, s) in dst.iter_mut().enumerate() {
                    *s -= gi[t0] * tc[t0];
                }
            }
        }
    });
    out
}

/// Formal adjoint of D: (D* t)(rest) = -(D_a t)(e^a, rest).
pub fn dstar(m: &DiscreteManifold, t: &TensorField) -> TensorField {
    let dt = cov_deriv(m, t);
    neg_contract_01(&m.g_inv, &dt)
}

/// Divergence of a symmetric 2-tensor (same contraction as `dstar`).
pub fn div_sym2(m: &DiscreteManifold, h: &TensorField) -> TensorField {
    dstar(m, h)
}

/// (div* w)(x,y) = ((D_x w)(y) + (D_y w)(x)) / 2, adjoint of div.
pub fn div_star(m: &DiscreteManifold, w: &TensorField) -> TensorField {
    assert_eq!(w.valence, 1);
    let dw = cov_deriv(m, w);
    let d = m.dim;
    let n = w.n_nodes;
    let mut out = TensorField::zeros(2, d, n);
    for i in 0..d {
        for j in 0..d {
            let a = dw.comp(i * d + j);
            let b = dw.comp(j * d + i);
            let dst = out.comp_mut(i * d + j);
            for t0 in 0..n {
                dst[t0] = 0.5 * (a[t0] + b[t0]);
            }
        }
    }
    out
}

/// (dD a)(x,y,z) = (D_y a)(x,z) - (D_z a)(x,y) on (0,2) fields.
pub fn d_d(m: &DiscreteManifold, a: &TensorField) -> TensorField {
    assert_eq!(a.valence, 2);
    let da = cov_deriv(m, a);
    let d = m.dim;
    let n = a.n_nodes;
    let mut out = TensorField::zeros(3, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let x = c / (d * d);
        let y = (c / d) % d;
        let z = c % d;
        let t1 = da.comp((y * d + x) * d + z);
        let t2 = da.comp((z * d + x) * d + y);
        for (t0, s) in dst.iter_mut().enumerate() {
            *s = t1[t0] - t2[t0];
        }
    });
    out
}

/// (deltaD A)(x,y) = (D_i A)(x,y,e^i) + (D_i A)(y,x,e^i); formal adjoint of
/// dD with no extra normalization.
pub fn delta_d(m: &DiscreteManifold, a: &TensorField) -> TensorField {
    assert_eq!(a.valence, 3);
    let da = cov_deriv(m, a); // [w, x, y, z]
    let d = m.dim;
    let n = a.n_nodes;
    let mut out = TensorField::zeros(2, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let x = c / d;
        let y = c % d;
        for w in 0..d {
            for i in 0..d {
                let gi = m.g_inv.comp(w * d + i);
                let t1 = da.comp(((w * d + x) * d + y) * d + i);
                let t2 = da.comp(((w * d + y) * d + x) * d + i);
                for (t0, s) in dst.iter_mut().enumerate() {
                    *s += gi[t0] * (t1[t0] + t2[t0]);
                }
            }
        }
    });
    out
}

/// Connection/rough Laplacian D*D.
pub fn rough_laplacian(m: &DiscreteManifold, t: &TensorField) -> TensorField {
    let dt = cov_deriv(m, t);
    let ddt = cov_deriv(m, &dt);
    neg_contract_01(&m.g_inv, &ddt)
}

/// Scalar Laplacian with positive spectrum: Delta f = -g^{ab} (D df)_{ab}.
pub fn laplace_scalar(m: &DiscreteManifold, f: &[Real]) -> Vec<Real> {
    let sf = TensorField { valence: 0, dims: m.dim, n_nodes: f.len(), data: f.to_vec() };
    let r = rough_laplacian(m, &sf);
    r.data
}

/// Symmetrized composition (h o k)_ij = (h_i^m k_mj + k_i^m h_mj) / 2.
pub fn compose_sym2(m: &DiscreteManifold, h: &TensorField, k: &TensorField) -> TensorField {
    let d = m.dim;
    let n = h.n_nodes;
    let hu = raise_slot(&m.g_inv, h, 1); // h_i{}^m in slot 1
    let ku = raise_slot(&m.g_inv, k, 1);
    let mut out = TensorField::zeros(2, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let i = c / d;
        let j = c % d;
        for mm in 0..d {
            let a1 = hu.comp(i * d + mm);
            let b1 = k.comp(mm * d + j);
            let a2 = ku.comp(i * d + mm);
            let b2 = h.comp(mm * d + j);
            for (t0, s) in dst.iter_mut().enumerate() {
                *s += 0.5 * (a1[t0] * b1[t0] + a2[t0] * b2[t0]);
            }
        }
    });
    out
}

/// Multiply every component by a scalar node array.
pub fn scalar_mul(t: &TensorField, f: &[Real]) -> TensorField {
    let mut out = t.clone();
    let n = t.n_nodes;
    for c in 0..t.comps() {
        let dst = out.comp_mut(c);
        for t0 in 0..n {
            dst[t0] *= f[t0];
        }
    }
    out
}

/// f * g for a scalar node array and the metric (conformal direction).
pub fn scalar_times_metric(m: &DiscreteManifold, f: &[Real]) -> TensorField {
    scalar_mul(&m.g, f)
}

pub fn max_abs_diff(a: &TensorField, b: &TensorField) -> Real {
    debug_assert_eq!(a.data.len(), b.data.len());
    a.data
        .iter()
        .zip(&b.data)
        .fold(0.0, |m, (&x, &y)| m.max((x - y).abs()))
}

/// ||a - b||_L2 / (||a||_L2 + ||b||_L2); the standard residual for identity
/// checks, 0.5 when one side is identically zero and the other is not.
pub fn l2_rel_residual(m: &DiscreteManifold, a: &TensorField, b: &TensorField) -> Real {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    let num = m.l2_norm2(&d).sqrt();
    let den = m.l2_norm2(a).sqrt() + m.l2_norm2(b).sqrt();
    num / den
}

/// Ratio <A, dD h> / <deltaD A, h> on supplied probe fields; 1 when the
/// discrete operators are exactly adjoint.
pub fn adjointness_ratio(m: &DiscreteManifold, h: &TensorField, k: &TensorField) -> Real {
    let a = d_d(m, k);
    let lhs = m.l2_inner(&a, &d_d(m, h));
    let rhs = m.l2_inner(&delta_d(m, &a), h);
    lhs / rhs
}
