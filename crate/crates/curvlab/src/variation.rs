//! First variation of the curvature pipeline in a metric direction h.
//!
//! Everything is linear in h and evaluated at the base geometry of a
//! `DiscreteManifold`:
//!
//! * C(x,y,z) = ((D_x h)(y,z) + (D_y h)(x,z) - (D_z h)(x,y)) / 2, the lowered
//!   variation of the Levi-Civita connection; Pi is C with the last slot
//!   raised.
//! * Rbar(x,y,z,t) = (D_y C)(x,z,t) - (D_x C)(y,z,t) + R(x,y,z,h#(t)), the
//!   variation of the fully covariant curvature. It inherits the algebraic
//!   curvature symmetries even though the formula shows none of them.
//! * rbar(x,y) = g^{ab} Rbar(x,a,y,b), the variation seen by the Ricci trace.
//! * the variation of the operator D* applied to the frozen curvature, valid
//!   where DR = 0 (true on every geometry built by this crate), and the
//!   companion curvature-times-Pi block L; their difference W is what pairs
//!   against dD h in the second variation.
//! * scalar variations of |R|^2 and |R|^q.
//!
//! `space_form_variation_identities` cross-checks all of the above against
//! closed forms valid on constant-curvature backgrounds. The returned
//! residuals are relative L2 errors and sit at the discretization floor.

use crate::field::TensorField;
use crate::manifold::DiscreteManifold;
use crate::ops::{
    cov_deriv, d_d, delta_d, div_star, div_sym2, dstar, l2_rel_residual, laplace_scalar,
    norm2_pointwise, pointwise_inner, raise_all, raise_slot, rough_laplacian, scalar_mul,
    trace_sym2,
};
use crate::Real;
use rayon::prelude::*;

/// C(x,y,z), symmetric in (x,y).
pub fn christoffel_variation(m: &DiscreteManifold, h: &TensorField) -> TensorField {
    assert_eq!(h.valence, 2);
    let dh = cov_deriv(m, h);
    let d = m.dim;
    let n = h.n_nodes;
    let mut out = TensorField::zeros(3, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let x = c / (d * d);
        let y = (c / d) % d;
        let z = c % d;
        let t1 = dh.comp((x * d + y) * d + z);
        let t2 = dh.comp((y * d + x) * d + z);
        let t3 = dh.comp((z * d + x) * d + y);
        for (t0, s) in dst.iter_mut().enumerate() {
            *s = 0.5 * (t1[t0] + t2[t0] - t3[t0]);
        }
    });
    out
}

pub fn curvature_variation(m: &DiscreteManifold, h: &TensorField) -> TensorField {
    let c_low = christoffel_variation(m, h);
    curvature_variation_from(m, &c_low, h)
}

fn curvature_variation_from(
    m: &DiscreteManifold,
    c_low: &TensorField,
    h: &TensorField,
) -> TensorField {
    let dc = cov_deriv(m, c_low); // dc[a, x, z, t]
    let hup = raise_slot(&m.g_inv, h, 0); // h#[s, t]
    let d = m.dim;
    let n = h.n_nodes;
    let r = &m.riemann;
    let mut out = TensorField::zeros(4, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let x = c / (d * d * d);
        let y = (c / (d * d)) % d;
        let z = (c / d) % d;
        let t = c % d;
        let a1 = dc.comp(((y * d + x) * d + z) * d + t);
        let a2 = dc.comp(((x * d + y) * d + z) * d + t);
        for (t0, s) in dst.iter_mut().enumerate() {
            *s = a1[t0] - a2[t0];
        }
        for q in 0..d {
            let rr = r.comp(((x * d + y) * d + z) * d + q);
            let hh = hup.comp(q * d + t);
            for (t0, s) in dst.iter_mut().enumerate() {
                *s += rr[t0] * hh[t0];
            }
        }
    });
    out
}

/// g^{ab} Rbar(x, a, y, b).
pub fn ricci_variation(m: &DiscreteManifold, rbar: &TensorField) -> TensorField {
    assert_eq!(rbar.valence, 4);
    let d = m.dim;
    let n = rbar.n_nodes;
    let mut out = TensorField::zeros(2, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let x = c / d;
        let y = c % d;
        for a in 0..d {
            for b in 0..d {
                let gi = m.g_inv.comp(a * d + b);
                let t = rbar.comp(((x * d + a) * d + y) * d + b);
                for (t0, s) in dst.iter_mut().enumerate() {
                    *s += gi[t0] * t[t0];
                }
            }
        }
    });
    out
}

/// t[s] = g^{ab} Pi(a, b, s): the frame trace of the connection variation.
fn pi_frame_trace(m: &DiscreteManifold, pi: &TensorField) -> TensorField {
    let d = m.dim;
    let n = pi.n_nodes;
    let mut out = TensorField::zeros(1, d, n);
    for s in 0..d {
        for a in 0..d {
            for b in 0..d {
                let gi = m.g_inv.comp(a * d + b);
                let pc = pi.comp((a * d + b) * d + s);
                let dst = out.comp_mut(s);
                for t0 in 0..n {
                    dst[t0] += gi[t0] * pc[t0];
                }
            }
        }
    }
    out
}

/// Variation of D* applied to the frozen curvature: the four single-Pi
/// insertions into R, summed over a frame. Assumes DR = 0 at the base.
pub fn dstar_operator_variation(m: &DiscreteManifold, pi: &TensorField) -> TensorField {
    let d = m.dim;
    let n = pi.n_nodes;
    let r = &m.riemann;
    let t1 = pi_frame_trace(m, pi);
    let pi_u0 = raise_slot(&m.g_inv, pi, 0);
    let mut out = TensorField::zeros(3, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let j = c / (d * d);
        let k = (c / d) % d;
        let l = c % d;
        for s in 0..d {
            let a1 = t1.comp(s);
            let b1 = r.comp(((s * d + j) * d + k) * d + l);
            for (t0, o) in dst.iter_mut().enumerate() {
                *o += a1[t0] * b1[t0];
            }
        }
        for a in 0..d {
            for s in 0..d {
                let p2 = pi_u0.comp((a * d + j) * d + s);
                let r2 = r.comp(((a * d + s) * d + k) * d + l);
                let p3 = pi_u0.comp((a * d + k) * d + s);
                let r3 = r.comp(((a * d + j) * d + s) * d + l);
                let p4 = pi_u0.comp((a * d + l) * d + s);
                let r4 = r.comp(((a * d + j) * d + k) * d + s);
                for (t0, o) in dst.iter_mut().enumerate() {
                    *o += p2[t0] * r2[t0] + p3[t0] * r3[t0] + p4[t0] * r4[t0];
                }
            }
        }
    });
    out
}

/// L(w,y,z): the six curvature-times-Pi contractions left over when the
/// derivative in D*(Rbar) is pushed onto the Ricci variation. Antisymmetric
/// in (y,z), like dD of a symmetric 2-tensor.
pub fn l_field(m: &DiscreteManifold, pi: &TensorField) -> TensorField {
    let d = m.dim;
    let n = pi.n_nodes;
    let r = &m.riemann;
    let ric = &m.ricci;
    let t1 = pi_frame_trace(m, pi);
    let pi_u0 = raise_slot(&m.g_inv, pi, 0); // g^{ab} Pi(b, ., .)
    let pi_u1 = raise_slot(&m.g_inv, pi, 1); // g^{ab} Pi(., b, .)
    let mut out = TensorField::zeros(3, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let w = c / (d * d);
        let y = (c / d) % d;
        let z = c % d;
        for s in 0..d {
            let a1 = t1.comp(s);
            let b1 = r.comp(((y * d + z) * d + s) * d + w);
            // g^{ab} R(z, a, b, .) = -Ric(z, .): first-pair antisymmetry is
            // exact for the assembled curvature
            let q4 = ric.comp(z * d + s);
            let p4 = pi.comp((y * d + w) * d + s);
            let q6 = ric.comp(y * d + s);
            let p6 = pi.comp((z * d + w) * d + s);
            for (t0, o) in dst.iter_mut().enumerate() {
                *o += a1[t0] * b1[t0] - q4[t0] * p4[t0] + q6[t0] * p6[t0];
            }
        }
        for a in 0..d {
            for s in 0..d {
                let p2 = pi_u0.comp((a * d + w) * d + s);
                let r2 = r.comp(((y * d + z) * d + a) * d + s);
                let p3 = pi_u1.comp((y * d + a) * d + s);
                let r3 = r.comp(((z * d + a) * d + s) * d + w);
                let p5 = pi_u1.comp((z * d + a) * d + s);
                let r5 = r.comp(((a * d + y) * d + s) * d + w);
                for (t0, o) in dst.iter_mut().enumerate() {
                    *o += p2[t0] * r2[t0] + p3[t0] * r3[t0] + p5[t0] * r5[t0];
                }
            }
        }
    });
    out
}

/// d/dt of Rcheck_xy = R_xijk R_y{}^{ijk}: two curvature-variation pairings
/// minus one inverse-metric variation per raised slot.
pub fn rcheck_variation(m: &DiscreteManifold, h: &TensorField, rbar: &TensorField) -> TensorField {
    let d = m.dim;
    let n = h.n_nodes;
    let gi = &m.g_inv;
    let r = &m.riemann;
    let up123 = {
        let t = raise_slot(gi, r, 1);
        let t = raise_slot(gi, &t, 2);
        raise_slot(gi, &t, 3)
    };
    let up23 = {
        let t = raise_slot(gi, r, 2);
        raise_slot(gi, &t, 3)
    };
    let up13 = {
        let t = raise_slot(gi, r, 1);
        raise_slot(gi, &t, 3)
    };
    let up12 = {
        let t = raise_slot(gi, r, 1);
        raise_slot(gi, &t, 2)
    };
    let hup = raise_all(gi, h);
    let mut out = TensorField::zeros(2, d, n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(c, dst)| {
        let x = c / d;
        let y = c % d;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let ci = ((x * d + i) * d + j) * d + k;
                    let cj = ((y * d + i) * d + j) * d + k;
                    let a1 = rbar.comp(ci);
                    let b1 = up123.comp(cj);
                    let a2 = up123.comp(ci);
                    let b2 = rbar.comp(cj);
                    for (t0, s) in dst.iter_mut().enumerate() {
                        *s += a1[t0] * b1[t0] + a2[t0] * b2[t0];
                    }
                }
            }
        }
        for q in 0..d {
            for mm in 0..d {
                let hc = hup.comp(q * d + mm);
                for u in 0..d {
                    for v in 0..d {
                        let a1 = r.comp(((x * d + q) * d + u) * d + v);
                        let b1 = up23.comp(((y * d + mm) * d + u) * d + v);
                        let a2 = r.comp(((x * d + u) * d + q) * d + v);
                        let b2 = up13.comp(((y * d + u) * d + mm) * d + v);
                        let a3 = r.comp(((x * d + u) * d + v) * d + q);
                        let b3 = up12.comp(((y * d + u) * d + v) * d + mm);
                        for (t0, s) in dst.iter_mut().enumerate() {
                            *s -= hc[t0] * (a1[t0] * b1[t0] + a2[t0] * b2[t0] + a3[t0] * b3[t0]);
                        }
                    }
                }
            }
        }
    });
    out
}

/// (|R|^2)'(h) = 2 (R, Rbar) - 4 (Rcheck, h), pointwise.
pub fn norm2_variation(m: &DiscreteManifold, h: &TensorField, rbar: &TensorField) -> Vec<Real> {
    let a = pointwise_inner(&m.g_inv, &m.riemann, rbar);
    let b = pointwise_inner(&m.g_inv, &m.rcheck, h);
    a.iter().zip(&b).map(|(&x, &y)| 2.0 * x - 4.0 * y).collect()
}

/// (|R|^q)'(h) = (q/2) |R|^{q-2} (|R|^2)'(h), pointwise, for any real q. Used
/// with q = p and q = p - 2.
pub fn norm_power_variation(m: &DiscreteManifold, q: Real, norm2_prime: &[Real]) -> Vec<Real> {
    let n2 = norm2_pointwise(&m.g_inv, &m.riemann);
    n2.iter()
        .zip(norm2_prime)
        .map(|(&r2, &v)| 0.5 * q * r2.powf(0.5 * (q - 2.0)) * v)
        .collect()
}

/// All first-variation fields of one direction h, computed once and shared.
pub struct VariationPack {
    /// Lowered connection variation C.
    pub c_low: TensorField,
    /// C with the last slot raised.
    pub pi: TensorField,
    /// Curvature variation (0,4).
    pub rbar: TensorField,
    /// g^{ab} Rbar(x,a,y,b).
    pub ricci_bar: TensorField,
    /// Variation of D* applied to the frozen curvature.
    pub dstar_prime: TensorField,
    /// Curvature-times-Pi block.
    pub l_term: TensorField,
    /// dstar_prime - l_term; pairs against dD h in the second variation.
    pub w_term: TensorField,
    /// (|R|^2)'(h) pointwise.
    pub norm2_prime: Vec<Real>,
}

pub fn variation_pack(m: &DiscreteManifold, h: &TensorField) -> VariationPack {
    let c_low = christoffel_variation(m, h);
    let pi = raise_slot(&m.g_inv, &c_low, 2);
    let rbar = curvature_variation_from(m, &c_low, h);
    let ricci_bar = ricci_variation(m, &rbar);
    let dstar_prime = dstar_operator_variation(m, &pi);
    let l_term = l_field(m, &pi);
    let mut w_term = dstar_prime.clone();
    w_term.axpy(-1.0, &l_term);
    let norm2_prime = norm2_variation(m, h, &rbar);
    VariationPack { c_low, pi, rbar, ricci_bar, dstar_prime, l_term, w_term, norm2_prime }
}

/// Cross-checks of the variation fields against constant-curvature closed
/// forms. Each entry is (name, relative L2 residual).
pub fn space_form_variation_identities(
    m: &DiscreteManifold,
    h: &TensorField,
    p: Real,
) -> Vec<(String, Real)> {
    let c = m.curvature;
    let nn = m.dim as Real;
    let g = &m.g;
    let pack = variation_pack(m, h);
    let trh = trace_sym2(&m.g_inv, h);
    let dtr = m.diff_scalar(&trh);
    let ddtr = div_star(m, &dtr); // Hessian of tr h, exactly symmetric
    let lap_tr = laplace_scalar(m, &trh);
    let delh = div_sym2(m, h);
    let dsds = div_star(m, &delh); // delta* delta h
    let ddh = rough_laplacian(m, h);

    let mut out = Vec::new();

    // d/dt Rcheck = 2c^2(n+1) h - 4c^2 tr(h) g + 2c (D*D h - 2 delta*delta h - Dd tr h)
    let lhs = rcheck_variation(m, h, &pack.rbar);
    let mut rhs = h.scaled(2.0 * c * c * (nn + 1.0));
    rhs.axpy(-4.0 * c * c, &scalar_mul(g, &trh));
    rhs.axpy(-4.0 * c, &dsds);
    rhs.axpy(-2.0 * c, &ddtr);
    rhs.axpy(2.0 * c, &ddh);
    out.push(("rcheck-variation-closed-form".to_string(), l2_rel_residual(m, &lhs, &rhs)));

    // deltaD W = c(n-2) deltaD dD h + 2c Dd tr h + 2c (Lap tr h) g
    let lhs = delta_d(m, &pack.w_term);
    let ddd = delta_d(m, &d_d(m, h));
    let mut rhs = ddd.scaled(c * (nn - 2.0));
    rhs.axpy(2.0 * c, &ddtr);
    rhs.axpy(2.0 * c, &scalar_mul(g, &lap_tr));
    out.push(("w-divergence-closed-form".to_string(), l2_rel_residual(m, &lhs, &rhs)));

    // D* Rbar = -dD rbar - L
    let lhs = dstar(m, &pack.rbar);
    let mut rhs = d_d(m, &pack.ricci_bar);
    rhs.scale(-1.0);
    rhs.axpy(-1.0, &pack.l_term);
    out.push(("dstar-curvature-variation-split".to_string(), l2_rel_residual(m, &lhs, &rhs)));

    // rbar = (n-1)c h - delta*delta h - Dd tr(h)/2 + D*D h / 2
    let mut rhs = h.scaled((nn - 1.0) * c);
    rhs.axpy(-1.0, &dsds);
    rhs.axpy(-0.5, &ddtr);
    rhs.axpy(0.5, &ddh);
    out.push((
        "ricci-variation-closed-form".to_string(),
        l2_rel_residual(m, &pack.ricci_bar, &rhs),
    ));

    // deltaD dD h = 2 D*D h - 2 delta*delta h + 2nc h - 2c tr(h) g
    let mut rhs = ddh.scaled(2.0);
    rhs.axpy(-2.0, &dsds);
    rhs.axpy(2.0 * nn * c, h);
    rhs.axpy(-2.0 * c, &scalar_mul(g, &trh));
    out.push(("dd-deltad-weitzenbock".to_string(), l2_rel_residual(m, &ddd, &rhs)));

    // (|R|^p)' = -2pc |R|^{p-2} (tr delta*delta h - Lap tr h + (n-1)c tr h)
    let lhs = norm_power_variation(m, p, &pack.norm2_prime);
    let n2 = norm2_pointwise(&m.g_inv, &m.riemann);
    let tr_dsds = trace_sym2(&m.g_inv, &dsds);
    let rhs: Vec<Real> = (0..m.n_nodes())
        .map(|t| {
            -2.0 * p
                * c
                * n2[t].powf(0.5 * (p - 2.0))
                * (tr_dsds[t] - lap_tr[t] + (nn - 1.0) * c * trh[t])
        })
        .collect();
    let lf = TensorField::from_scalar_values(m.dim, lhs);
    let rf = TensorField::from_scalar_values(m.dim, rhs);
    out.push(("norm-power-variation-closed-form".to_string(), l2_rel_residual(m, &lf, &rf)));

    out
}
