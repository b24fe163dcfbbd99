//! Variational calculus of R_p on products of two round spheres.
//!
//! Every operator here is the separable-field transcription of its dense
//! counterpart in [`crate::variation`], [`crate::functional`] and
//! [`crate::hessian`]: same formulas, same slot conventions, evaluated on
//! [`crate::sep::SepTensor`] blocks instead of grid arrays. The norm |R| is
//! constant on the carrier, so the norm-power prefactors collapse to
//! constants while their variations stay genuine fields.
//!
//! The symmetric 2-tensors on M1 x M2 split into five interaction classes:
//! trace-free blocks on each factor, the mixed block, and a conformal part
//! per factor sharing one scalar,
//!
//!   h = h1 + f g1 + htilde + h2 - f g2,
//!
//! with the second variation block-diagonal across the classes except for
//! the conformal pair. [`product_split`] extracts the classes exactly;
//! [`second_variation`] assembles the full six-term Hessian of R_p along
//! any two separable directions and applies the closed volume correction
//! for V^alpha R_p with alpha = p/m - 1.

use crate::coeff::{Coeff, Quadratic};
use crate::field::TensorField;
use crate::hessian::SecondVariation;
use crate::sep::{
    self, contract, contract_prod, permute, tensor_prod, PatternBlock, ProductSphere, SepTensor,
    SepTerm,
};
use crate::{functional, Real, Result};

/// First-variation fields of one direction h on the product, mirroring
/// [`crate::variation::VariationPack`]. The connection variation is kept
/// fully lowered; the raised-slot bookkeeping of the dense pack moves into
/// explicit inverse-metric contractions.
pub struct ProductVariationPack {
    pub c_low: SepTensor,
    pub rbar: SepTensor,
    pub ricci_bar: SepTensor,
    pub dstar_prime: SepTensor,
    pub l_term: SepTensor,
    pub w_term: SepTensor,
    pub norm2_prime: SepTensor,
}

/// C(x,y,z) = (D_x h(y,z) + D_y h(x,z) - D_z h(x,y)) / 2.
pub fn christoffel_variation(pm: &ProductSphere, h: &SepTensor) -> SepTensor {
    debug_assert_eq!(h.valence, 2);
    let dh = sep::cov_deriv(pm, h);
    let mut out = dh.scaled(0.5);
    out.axpy(0.5, &permute(&dh, &[1, 0, 2]));
    out.axpy(-0.5, &permute(&dh, &[2, 0, 1]));
    out
}

/// Rbar(x,y,z,t) = (D_y C)(x,z,t) - (D_x C)(y,z,t) + R(x,y,z,·) h#(·,t).
pub fn curvature_variation_from(
    pm: &ProductSphere,
    c_low: &SepTensor,
    h: &SepTensor,
) -> SepTensor {
    let dc = sep::cov_deriv(pm, c_low);
    let mut out = permute(&dc, &[1, 0, 2, 3]);
    out.axpy(-1.0, &dc);
    out.axpy(1.0, &contract_prod(pm, &pm.riemann, h, 3, 0));
    out
}

pub fn curvature_variation(pm: &ProductSphere, h: &SepTensor) -> SepTensor {
    let c_low = christoffel_variation(pm, h);
    curvature_variation_from(pm, &c_low, h)
}

/// g^{ab} Rbar(x, a, y, b).
pub fn ricci_variation(pm: &ProductSphere, rbar: &SepTensor) -> SepTensor {
    debug_assert_eq!(rbar.valence, 4);
    contract(pm, rbar, 1, 3)
}

/// Variation of D* applied to the frozen curvature: the four single-C
/// insertions into R over a frame, each raised slot written as an explicit
/// inverse-metric contraction. Assumes DR = 0 at the base.
pub fn dstar_operator_variation(pm: &ProductSphere, c_low: &SepTensor) -> SepTensor {
    let r = &pm.riemann;
    // frame trace g^{ab} C(a,b,s')
    let ct = contract(pm, c_low, 0, 1);
    // t1^s R(s,j,k,l)
    let mut out = contract_prod(pm, &ct, r, 0, 0);
    // C(b,j,s') g^{ba} g^{s's} R(a,s,k,l)
    let w = contract_prod(pm, c_low, r, 0, 0);
    out.axpy(1.0, &contract(pm, &w, 1, 2));
    // C(b,k,s') g^{ba} g^{s's} R(a,j,s,l)
    let w2 = contract(pm, &w, 1, 3);
    out.axpy(1.0, &permute(&w2, &[1, 0, 2]));
    // C(b,l,s') g^{ba} g^{s's} R(a,j,k,s)
    let w3 = contract(pm, &w, 1, 4);
    out.axpy(1.0, &permute(&w3, &[2, 0, 1]));
    out
}

/// L(w,y,z): the six curvature-times-C contractions left over when the
/// derivative in D*(Rbar) is pushed onto the Ricci variation.
pub fn l_field(pm: &ProductSphere, c_low: &SepTensor) -> SepTensor {
    let r = &pm.riemann;
    let ric = &pm.ricci;
    let ct = contract(pm, c_low, 0, 1);
    // t1^s R(y,z,s,w)
    let mut out = permute(&contract_prod(pm, &ct, r, 0, 2), &[1, 2, 0]);
    // - Ric(z,s) g^{ss'} C(y,w,s') + Ric(y,s) g^{ss'} C(z,w,s')
    let rc = contract_prod(pm, ric, c_low, 1, 2);
    out.axpy(-1.0, &permute(&rc, &[2, 1, 0]));
    out.axpy(1.0, &permute(&rc, &[1, 2, 0]));
    // C(b,w,s') g^{ba} g^{s's} R(y,z,a,s)
    let w1 = contract_prod(pm, c_low, r, 0, 2);
    out.axpy(1.0, &contract(pm, &w1, 1, 4));
    // C(y,b,s') g^{ba} g^{s's} R(z,a,s,w)
    let w2 = contract_prod(pm, c_low, r, 1, 1);
    out.axpy(1.0, &permute(&contract(pm, &w2, 1, 3), &[1, 2, 0]));
    // C(z,b,s') g^{ba} g^{s's} R(a,y,s,w)
    let w3 = contract_prod(pm, c_low, r, 1, 0);
    out.axpy(1.0, &permute(&contract(pm, &w3, 1, 3), &[2, 1, 0]));
    out
}

/// d/dt of Rcheck_xy = R_xijk R_y{}^{ijk}: two curvature-variation pairings
/// minus one inverse-metric variation per raised slot.
pub fn rcheck_variation(pm: &ProductSphere, h: &SepTensor, rbar: &SepTensor) -> SepTensor {
    let r = &pm.riemann;
    // rbar(x,i,j,k) R(y,i,j,k) fully raised on the second factor, plus the
    // transpose
    let w = contract_prod(pm, rbar, r, 1, 1);
    let t = contract(pm, &contract(pm, &w, 1, 4), 1, 3);
    let mut out = t.clone();
    out.axpy(1.0, &permute(&t, &[1, 0]));
    // inverse-metric variation: one raised pair h##(q,m) against each of the
    // three raised curvature slots
    for slot in [1usize, 2, 3] {
        let w1 = contract_prod(pm, h, r, 0, slot);
        let w2 = contract_prod(pm, &w1, r, 0, slot);
        let piece = contract(pm, &contract(pm, &w2, 1, 4), 1, 3);
        out.axpy(-1.0, &piece);
    }
    out
}

/// (|R|^2)'(h) = 2 (R, Rbar) - 4 (Rcheck, h), a separable scalar.
pub fn norm2_variation(pm: &ProductSphere, h: &SepTensor, rbar: &SepTensor) -> SepTensor {
    let mut out = sep::pointwise_inner(pm, &pm.riemann, rbar).scaled(2.0);
    out.axpy(-4.0, &sep::pointwise_inner(pm, &pm.rcheck, h));
    out
}

/// (|R|^q)'(h) = (q/2) |R|^{q-2} (|R|^2)'(h); the base norm is constant on
/// the carrier.
pub fn norm_power_variation(pm: &ProductSphere, q: Real, norm2_prime: &SepTensor) -> SepTensor {
    norm2_prime.scaled(0.5 * q * pm.r_norm2.powf(0.5 * (q - 2.0)))
}

pub fn variation_pack(pm: &ProductSphere, h: &SepTensor) -> ProductVariationPack {
    let c_low = christoffel_variation(pm, h);
    let rbar = curvature_variation_from(pm, &c_low, h);
    let ricci_bar = ricci_variation(pm, &rbar);
    let dstar_prime = dstar_operator_variation(pm, &c_low);
    let l_term = l_field(pm, &c_low);
    let mut w_term = dstar_prime.clone();
    w_term.axpy(-1.0, &l_term);
    let norm2_prime = norm2_variation(pm, h, &rbar);
    ProductVariationPack { c_low, rbar, ricci_bar, dstar_prime, l_term, w_term, norm2_prime }
}

pub fn rp_value(pm: &ProductSphere, p: Real) -> Result<Real> {
    functional::check_exponent(p)?;
    Ok(pm.r_norm2.powf(0.5 * p) * pm.volume)
}

pub fn tilde_rp(pm: &ProductSphere, p: Real) -> Result<Real> {
    let alpha = p / pm.m as Real - 1.0;
    Ok(pm.volume.powf(alpha) * rp_value(pm, p)?)
}

/// Gradient of R_p at the product metric: -p deltaD(D*(s R)) - p s Rcheck
/// + |R|^p g / 2 with s = |R|^{p-2} constant. The divergence block is a
/// discretization-floor residual kept for honesty.
pub fn rp_gradient(pm: &ProductSphere, p: Real) -> Result<SepTensor> {
    functional::check_exponent(p)?;
    let s = pm.r_norm2.powf(0.5 * (p - 2.0));
    let u = sep::dstar(pm, &pm.riemann).scaled(s);
    let mut grad = sep::delta_d(pm, &u).scaled(-p);
    grad.axpy(-p * s, &pm.rcheck);
    grad.axpy(0.5 * pm.r_norm2.powf(0.5 * p), &pm.g);
    Ok(grad)
}

/// L2 size of the unit-volume-constrained gradient relative to the metric
/// term of the unconstrained one; zero iff the product is critical.
pub fn criticality_residual(pm: &ProductSphere, p: Real) -> Result<Real> {
    let n = pm.dim as Real;
    let mut grad = rp_gradient(pm, p)?;
    let rp0 = rp_value(pm, p)?;
    grad.axpy(p / n - 0.5, &pm.g.scaled(rp0 / pm.volume));
    let scale = pm.g.scaled(0.5 * pm.r_norm2.powf(0.5 * p));
    Ok((pm.l2_norm2(&grad) / pm.l2_norm2(&scale)).sqrt())
}

/// | ∫ tr grad - (n/2 - p) R_p | / R_p.
pub fn trace_identity_gap(pm: &ProductSphere, p: Real) -> Result<Real> {
    let n = pm.dim as Real;
    let grad = rp_gradient(pm, p)?;
    let tr = sep::trace_sym2(pm, &grad);
    let lhs = pm.integrate(&tr);
    let rp0 = rp_value(pm, p)?;
    Ok((lhs - (0.5 * n - p) * rp0).abs() / rp0.abs())
}

/// Second variation of R_p and of V^alpha R_p along g + t h1, paired
/// against h2; the product transcription of [`crate::hessian::rp_hessian`].
pub fn second_variation(
    pm: &ProductSphere,
    p: Real,
    h1: &SepTensor,
    h2: &SepTensor,
) -> Result<SecondVariation> {
    functional::check_exponent(p)?;
    let n = pm.dim as Real;

    let pack = variation_pack(pm, h1);
    let s = pm.r_norm2.powf(0.5 * (p - 2.0));
    let s_prime = norm_power_variation(pm, p - 2.0, &pack.norm2_prime);
    let rp_prime = norm_power_variation(pm, p, &pack.norm2_prime);
    let rp_field = pm.r_norm2.powf(0.5 * p);

    // U'(h1) = s [(D*)'(h1) R + D* Rbar] - (d s')^a R_{a...}
    let mut uprime = pack.dstar_prime.clone();
    uprime.axpy(1.0, &sep::dstar(pm, &pack.rbar));
    let mut uprime = uprime.scaled(s);
    let ds_prime = sep::cov_deriv(pm, &s_prime);
    uprime.axpy(-1.0, &sep::contract_first(pm, &ds_prime, &pm.riemann));

    let dd_h2 = sep::d_d(pm, h2);
    let t1 = -p * pm.l2_inner(&uprime, &dd_h2);

    let rcheck_h2 = sep::pointwise_inner(pm, &pm.rcheck, h2);
    let t2 = -p * pm.integrate(&tensor_prod(&s_prime, &rcheck_h2));

    let rc_var = rcheck_variation(pm, h1, &pack.rbar);
    let t3 = -p * s * pm.l2_inner(&rc_var, h2);

    let tr1 = sep::trace_sym2(pm, h1);
    let tr2 = sep::trace_sym2(pm, h2);
    let t4 = 0.5 * pm.integrate(&tensor_prod(&rp_prime, &tr2));

    let t5 = 0.5 * rp_field * pm.l2_inner(h1, h2);

    let grad0 = rp_gradient(pm, p)?;
    let comp = sep::compose_sym2(pm, &grad0, h2);
    let g0_h2 = sep::pointwise_inner(pm, &grad0, h2);
    let t6 = -2.0 * pm.l2_inner(&comp, h1) + 0.5 * pm.integrate(&tensor_prod(&tr1, &g0_h2));

    let raw_terms = [t1, t2, t3, t4, t5, t6];
    let raw: Real = raw_terms.iter().sum();

    let alpha = 2.0 * p / n - 1.0;
    let rp0 = rp_value(pm, p)?;
    let vol = pm.volume;
    let tau1 = pm.integrate(&tr1);
    let tau2 = pm.integrate(&tr2);
    let trtr = pm.integrate(&tensor_prod(&tr1, &tr2));
    let inner12 = pm.l2_inner(h1, h2);
    let volume_correction = alpha * rp0 / vol
        * (0.25 * trtr - 0.5 * inner12 - p * tau1 * tau2 / (2.0 * n * vol));
    let total = vol.powf(alpha) * (raw + volume_correction);

    Ok(SecondVariation { total, raw, raw_terms, volume_correction })
}

/// The five interaction classes of a symmetric 2-tensor on the product.
/// The conformal scalar takes the antisymmetrized factor traces, so the
/// reassembly h1 + f g1 + htilde + h2 - f g2 is exact for any input and the
/// per-block traces vanish exactly when the input is trace-free.
pub struct ProductSplit {
    pub h1: SepTensor,
    pub h2: SepTensor,
    pub htilde: SepTensor,
    /// Shared conformal scalar.
    pub f: SepTensor,
}

pub fn product_split(pm: &ProductSphere, h: &SepTensor) -> ProductSplit {
    debug_assert_eq!(h.valence, 2);
    let b11 = h.filter_blocks(|p| p == [0, 0]);
    let b22 = h.filter_blocks(|p| p == [1, 1]);
    let htilde = h.filter_blocks(|p| p == [0, 1] || p == [1, 0]);
    let mm = pm.m as Real;
    let tr1 = sep::trace_sym2(pm, &b11);
    let tr2 = sep::trace_sym2(pm, &b22);
    let mut f = tr1.scaled(0.5 / mm);
    f.axpy(-0.5 / mm, &tr2);
    let mut h1 = b11;
    h1.axpy(-1.0, &tensor_prod(&f, &pm.g_factor(0)));
    let mut h2 = b22;
    h2.axpy(1.0, &tensor_prod(&f, &pm.g_factor(1)));
    ProductSplit { h1, h2, htilde, f }
}

pub fn reassemble(pm: &ProductSphere, split: &ProductSplit) -> SepTensor {
    let mut out = split.h1.clone();
    out.axpy(1.0, &split.h2);
    out.axpy(1.0, &split.htilde);
    out.axpy(1.0, &tensor_prod(&split.f, &pm.g_factor(0)));
    out.axpy(-1.0, &tensor_prod(&split.f, &pm.g_factor(1)));
    out
}

/// Closed form of the scale-invariant second variation on a trace-free,
/// divergence-free direction supported on one factor's index block:
/// V^alpha p s [ |D*D h|^2 + m c |Dh|^2 + 2 (m-2) c^2 |h|^2 ].
pub fn factor_tt_second_variation(pm: &ProductSphere, p: Real, h: &SepTensor) -> Result<Real> {
    functional::check_exponent(p)?;
    let mm = pm.m as Real;
    let c = pm.curvature;
    let s = pm.r_norm2.powf(0.5 * (p - 2.0));
    let ddh = sep::rough_laplacian(pm, h);
    let dh = sep::cov_deriv(pm, h);
    let q1 = pm.l2_norm2(&ddh);
    let q2 = pm.l2_norm2(&dh);
    let q3 = pm.l2_norm2(h);
    let alpha = p / mm - 1.0;
    Ok(pm.volume.powf(alpha) * p * s * (q1 + mm * c * q2 + 2.0 * (mm - 2.0) * c * c * q3))
}

/// Pattern-restricted energy (c/2) K of a mixed-block direction: K is the
/// quarter of the dD-energy carried by the components whose outer slots sit
/// on one factor,
/// K = 1/4 ∫ sum_{x,z same factor} |dD h(x,y,z)|^2 dv.
pub fn mixed_k_term(pm: &ProductSphere, h: &SepTensor) -> Real {
    let dd = sep::d_d(pm, h);
    let same_outer = dd.filter_blocks(|p| p[0] == p[2]);
    0.25 * pm.l2_norm2(&same_outer)
}

/// Closed form on a divergence-free mixed-block direction:
/// V^alpha p s [ |D*D h|^2 + (m-1) c |Dh|^2 + 2 (m-1) c^2 |h|^2 - (c/2) K ].
pub fn mixed_tt_second_variation(pm: &ProductSphere, p: Real, h: &SepTensor) -> Result<Real> {
    functional::check_exponent(p)?;
    let mm = pm.m as Real;
    let c = pm.curvature;
    let s = pm.r_norm2.powf(0.5 * (p - 2.0));
    let ddh = sep::rough_laplacian(pm, h);
    let dh = sep::cov_deriv(pm, h);
    let q1 = pm.l2_norm2(&ddh);
    let q2 = pm.l2_norm2(&dh);
    let q3 = pm.l2_norm2(h);
    let k = mixed_k_term(pm, h);
    let alpha = p / mm - 1.0;
    Ok(pm.volume.powf(alpha)
        * p
        * s
        * (q1 + (mm - 1.0) * c * q2 + 2.0 * (mm - 1.0) * c * c * q3 - 0.5 * c * k))
}

/// Coefficient set of the conformal product sector, all rational in the
/// factor dimension m and the exponent p. `a` scales the single-factor
/// block; (a1, u1, b1, d1) the antisymmetric combination f(g1 - g2) and
/// (a2, u2, b2, d2) the symmetric one f(g1 + g2), as
///   H = p s [ a_i (|Lap1 f|^2 + |Lap2 f|^2 resp. |Lap f|^2)
///             + u_i <Lap1 f, Lap2 f> + b_i c |df|^2 + d_i c^2 |f|^2 ].
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCoeffs<C: Coeff> {
    pub m: usize,
    pub p: C,
    pub a: C,
    pub a1: C,
    pub u1: C,
    pub b1: C,
    pub d1: C,
    pub a2: C,
    pub u2: C,
    pub b2: C,
    pub d2: C,
}

pub fn product_coeffs<C: Coeff>(m: usize, p: C) -> ProductCoeffs<C> {
    let mm = C::from_int(m as i64);
    let m1 = C::from_int(m as i64 - 1);
    let two = C::from_int(2);
    let a = (mm.clone() + p.clone() - two.clone()) / mm.clone();
    let a1 = m1.clone() * a.clone() + mm.clone();
    let u1 = two.clone() / mm.clone()
        * (C::from_int(3) * mm.clone() * mm.clone()
            - C::from_int(3) * mm.clone()
            - two.clone()
            - p.clone() * m1.clone());
    let b1 = -two.clone() * m1.clone() * (mm.clone() + C::from_int(3));
    let d1 = C::from_int(4) * mm.clone() * m1.clone();
    let a2 = a1.clone();
    let u2 = two.clone() * mm.clone();
    let b2 = -two.clone() * m1.clone() * (two.clone() * p.clone() - mm.clone() - C::one());
    let d2 = C::from_int(4) * mm.clone() * m1.clone() * (p.clone() - mm.clone());
    ProductCoeffs { m, p, a, a1, u1, b1, d1, a2, u2, b2, d2 }
}

impl<C: Coeff> ProductCoeffs<C> {
    /// Spectrum quadratic of the antisymmetric conformal combination,
    /// evaluated at a factor eigenvalue ratio x = mu / c.
    pub fn q1(&self) -> Quadratic<C> {
        Quadratic { a: self.a1.clone(), b: self.b1.clone(), c: self.d1.clone() }
    }

    /// Spectrum quadratic of the symmetric conformal combination at a
    /// product eigenvalue ratio x = lambda / c.
    pub fn q2(&self) -> Quadratic<C> {
        Quadratic { a: self.a2.clone(), b: self.b2.clone(), c: self.d2.clone() }
    }
}

/// Coefficients (a, b, d) of the single-factor conformal block
/// p (m-1) s [ a |Lap1 f|^2 - b c |df1|^2 + d c^2 |f|^2 ] + cross terms.
pub fn conformal_block_coeffs<C: Coeff>(m: usize, p: C) -> (C, C, C) {
    let mm = C::from_int(m as i64);
    let two = C::from_int(2);
    let a = (mm.clone() + p.clone() - two.clone()) / mm.clone();
    let b = two.clone() * (p.clone() + C::one());
    let d = mm.clone() * (p - mm + two);
    (a, b, d)
}

/// Probe constructors shared by the tests and the report drivers.
pub mod probes {
    use super::*;
    use crate::manifold::DiscreteManifold;
    use crate::{decompose, ops};

    /// Killing one-form of an ambient rotation, co-closed on the sphere.
    pub fn rotation_one_form(m: &DiscreteManifold, i: usize, j: usize) -> TensorField {
        let di = m.diff_scalar(&m.ambient[i]);
        let dj = m.diff_scalar(&m.ambient[j]);
        let mut out = ops::scalar_mul(&dj, &m.ambient[i]);
        out.axpy(-1.0, &ops::scalar_mul(&di, &m.ambient[j]));
        out
    }

    /// Trace-free divergence-free tensor on one factor, y-independent.
    pub fn factor_tt(pm: &ProductSphere, which: u8, seed: u64) -> SepTensor {
        let fam = decompose::tt_family(pm.fac(which), seed, 1);
        let ones = vec![1.0; pm.fac(1 - which).n_nodes()];
        SepTensor::factor_sym2(pm, which, &fam[0], &ones)
    }

    /// Mixed-block tensor from Killing one-forms on each factor;
    /// divergence-free and trace-free by construction.
    pub fn killing_mixed(pm: &ProductSphere, i1: usize, j1: usize, i2: usize, j2: usize) -> SepTensor {
        let w1 = rotation_one_form(&pm.f1, i1, j1);
        let w2 = rotation_one_form(&pm.f2, i2, j2);
        SepTensor::mixed_sym2(&w1, &w2)
    }

    /// Mixed-block tensor from exact one-forms; trace-free but not
    /// divergence-free, exercising the delta* delta terms.
    pub fn gradient_mixed(pm: &ProductSphere, i1: usize, i2: usize) -> SepTensor {
        let w1 = pm.f1.diff_scalar(&pm.f1.ambient[i1]);
        let w2 = pm.f2.diff_scalar(&pm.f2.ambient[i2]);
        SepTensor::mixed_sym2(&w1, &w2)
    }

    /// Separable scalar from factor harmonics of the given degrees.
    pub fn separable_harmonic(
        pm: &ProductSphere,
        l1: usize,
        v1: usize,
        l2: usize,
        v2: usize,
    ) -> Result<SepTensor> {
        let f1 = decompose::sphere_harmonic(&pm.f1, l1, v1)?;
        let f2 = decompose::sphere_harmonic(&pm.f2, l2, v2)?;
        Ok(SepTensor::separable_scalar(pm, &f1, &f2))
    }

    /// f g1 or f g2 for a separable scalar f.
    pub fn conformal_direction(pm: &ProductSphere, which: u8, f: &SepTensor) -> SepTensor {
        tensor_prod(f, &pm.g_factor(which))
    }

    /// Lie-derivative direction delta* omega for a separable one-form
    /// omega = f1 df2-type mixture.
    pub fn gauge_direction(pm: &ProductSphere, seed: u64) -> SepTensor {
        let pick = |k: u64, n: usize| (k % n as u64) as usize;
        let i1 = pick(seed, 4);
        let i2 = pick(seed / 4, 4);
        let w1 = pm.f1.diff_scalar(&pm.f1.ambient[i1]);
        let f2: Vec<Real> = pm.f2.ambient[i2].clone();
        let mut w = SepTensor {
            valence: 1,
            blocks: vec![PatternBlock {
                pattern: vec![0],
                terms: vec![SepTerm {
                    t1: w1,
                    t2: TensorField::from_scalar_values(pm.f2.dim, f2),
                }],
            }],
        };
        let w2 = rotation_one_form(&pm.f2, pick(seed / 16, 4), pick(seed / 64 + 1, 4));
        let f1: Vec<Real> = pm.f1.ambient[pick(seed / 256, 4)].clone();
        w.axpy(
            0.8,
            &SepTensor {
                valence: 1,
                blocks: vec![PatternBlock {
                    pattern: vec![1],
                    terms: vec![SepTerm {
                        t1: TensorField::from_scalar_values(pm.f1.dim, f1),
                        t2: w2,
                    }],
                }],
            },
        );
        sep::div_star(pm, &w)
    }
}
