//! Separable tensor fields on product-of-spheres carriers.
//!
//! A tensor field on M1 x M2 never materializes on the product grid. It is
//! stored as a sum of separable terms grouped by slot pattern: each block
//! fixes which index slots live on which factor, and a term is an outer
//! product of one dense field per factor, evaluated implicitly. The
//! pointwise algebra and the covariant operator zoo of [`crate::ops`] lift
//! to this representation term by term because the product connection is
//! the direct sum of the factor connections and the metric has no mixed
//! block: covariant derivatives never mix factor assignments, metric
//! contractions vanish across slots with different assignments, and L2
//! pairings factor into products of per-factor integrals.
//!
//! Conventions match the dense fields: all slots are coordinate covariant,
//! raising happens through explicit inverse-metric contractions, and within
//! a term the factor fields carry their slots in the order induced by the
//! overall slot order. `permute` uses out[K] = in[K o perm]: in-slot s takes
//! the index of out-slot perm[s].
//!
//! Blocks stay sorted by pattern and terms with an exactly zero factor are
//! dropped, so identical pipelines produce identical block layouts and the
//! sequential reductions are bit-reproducible at any thread count.

use crate::field::{unpack, TensorField};
use crate::manifold::{build_sphere, DiscreteManifold};
use crate::{ops, Error, Real, Result};

#[derive(Debug, Clone)]
pub struct SepTerm {
    pub t1: TensorField,
    pub t2: TensorField,
}

#[derive(Debug, Clone)]
pub struct PatternBlock {
    /// Slot assignment: 0 = first factor, 1 = second. Length = valence.
    pub pattern: Vec<u8>,
    pub terms: Vec<SepTerm>,
}

#[derive(Debug, Clone)]
pub struct SepTensor {
    pub valence: usize,
    pub blocks: Vec<PatternBlock>,
}

/// Two round spheres of equal dimension and curvature with the block fields
/// of the product geometry precomputed. |R|^2 is constant on the carrier;
/// the stored scalar is its quadrature mean and `r_norm2_spread` bounds the
/// pointwise deviation (discretization floor).
#[derive(Debug)]
pub struct ProductSphere {
    pub f1: DiscreteManifold,
    pub f2: DiscreteManifold,
    /// Factor dimension m; the product has dimension 2m.
    pub m: usize,
    pub dim: usize,
    pub curvature: Real,
    pub volume: Real,
    pub g: SepTensor,
    pub riemann: SepTensor,
    pub ricci: SepTensor,
    pub rcheck: SepTensor,
    pub r_norm2: Real,
    pub r_norm2_spread: Real,
}

pub fn build_product_sphere(m: usize, curvature: Real, res: usize) -> Result<ProductSphere> {
    if curvature <= 0.0 {
        return Err(Error::Config("product carrier needs positive curvature".into()));
    }
    let f1 = build_sphere(m, curvature, res)?;
    let f2 = build_sphere(m, curvature, res)?;
    let g = block_diag2(&f1, &f2, &f1.g, &f2.g);
    let riemann = SepTensor {
        valence: 4,
        blocks: vec![
            PatternBlock {
                pattern: vec![0, 0, 0, 0],
                terms: vec![SepTerm { t1: f1.riemann.clone(), t2: const_scalar(&f2, 1.0) }],
            },
            PatternBlock {
                pattern: vec![1, 1, 1, 1],
                terms: vec![SepTerm { t1: const_scalar(&f1, 1.0), t2: f2.riemann.clone() }],
            },
        ],
    };
    let ricci = block_diag2(&f1, &f2, &f1.ricci, &f2.ricci);
    let rcheck = block_diag2(&f1, &f2, &f1.rcheck, &f2.rcheck);
    let mean = |v: &[Real]| v.iter().sum::<Real>() / v.len() as Real;
    let mu1 = mean(&f1.r_norm2);
    let mu2 = mean(&f2.r_norm2);
    let spread = |v: &[Real], mu: Real| v.iter().fold(0.0_f64, |a, &x| a.max((x - mu).abs()));
    let r_norm2_spread = spread(&f1.r_norm2, mu1) + spread(&f2.r_norm2, mu2);
    let volume = f1.volume * f2.volume;
    Ok(ProductSphere {
        m,
        dim: 2 * m,
        curvature,
        volume,
        g,
        riemann,
        ricci,
        rcheck,
        r_norm2: mu1 + mu2,
        r_norm2_spread,
        f1,
        f2,
    })
}

fn block_diag2(
    f1: &DiscreteManifold,
    f2: &DiscreteManifold,
    a: &TensorField,
    b: &TensorField,
) -> SepTensor {
    SepTensor {
        valence: 2,
        blocks: vec![
            PatternBlock {
                pattern: vec![0, 0],
                terms: vec![SepTerm { t1: a.clone(), t2: const_scalar(f2, 1.0) }],
            },
            PatternBlock {
                pattern: vec![1, 1],
                terms: vec![SepTerm { t1: const_scalar(f1, 1.0), t2: b.clone() }],
            },
        ],
    }
}

pub fn const_scalar(m: &DiscreteManifold, v: Real) -> TensorField {
    TensorField::from_scalar_values(m.dim, vec![v; m.n_nodes()])
}

impl ProductSphere {
    pub fn fac(&self, which: u8) -> &DiscreteManifold {
        if which == 0 {
            &self.f1
        } else {
            &self.f2
        }
    }

    /// The metric of one factor as a product field (the other block zero).
    pub fn g_factor(&self, which: u8) -> SepTensor {
        let (pattern, t1, t2) = if which == 0 {
            (vec![0, 0], self.f1.g.clone(), const_scalar(&self.f2, 1.0))
        } else {
            (vec![1, 1], const_scalar(&self.f1, 1.0), self.f2.g.clone())
        };
        SepTensor { valence: 2, blocks: vec![PatternBlock { pattern, terms: vec![SepTerm { t1, t2 }] }] }
    }

    /// Integral over the product of a separable scalar.
    pub fn integrate(&self, s: &SepTensor) -> Real {
        debug_assert_eq!(s.valence, 0);
        let mut out = 0.0;
        for b in &s.blocks {
            for t in &b.terms {
                out += self.f1.integrate_dv(t.t1.comp(0)) * self.f2.integrate_dv(t.t2.comp(0));
            }
        }
        out
    }

    pub fn l2_inner(&self, a: &SepTensor, b: &SepTensor) -> Real {
        debug_assert_eq!(a.valence, b.valence);
        let mut out = 0.0;
        for ba in &a.blocks {
            for bb in &b.blocks {
                if ba.pattern != bb.pattern {
                    continue;
                }
                for ta in &ba.terms {
                    for tb in &bb.terms {
                        out += self.f1.l2_inner(&ta.t1, &tb.t1) * self.f2.l2_inner(&ta.t2, &tb.t2);
                    }
                }
            }
        }
        out
    }

    pub fn l2_norm2(&self, a: &SepTensor) -> Real {
        // the Gram accumulation over separable terms can round a zero norm
        // to a tiny negative number
        self.l2_inner(a, a).max(0.0)
    }

    /// ||a - b|| / (||a|| + ||b||), the residual convention of
    /// [`ops::l2_rel_residual`] on separable fields.
    pub fn l2_rel_residual(&self, a: &SepTensor, b: &SepTensor) -> Real {
        let mut d = a.clone();
        d.axpy(-1.0, b);
        let num = self.l2_norm2(&d).max(0.0).sqrt();
        let den = self.l2_norm2(a).max(0.0).sqrt() + self.l2_norm2(b).max(0.0).sqrt();
        num / den
    }
}

impl SepTensor {
    pub fn zero(valence: usize) -> SepTensor {
        SepTensor { valence, blocks: Vec::new() }
    }

    /// Constant scalar field on the product.
    pub fn constant(pm: &ProductSphere, v: Real) -> SepTensor {
        SepTensor {
            valence: 0,
            blocks: vec![PatternBlock {
                pattern: Vec::new(),
                terms: vec![SepTerm { t1: const_scalar(&pm.f1, v), t2: const_scalar(&pm.f2, 1.0) }],
            }],
        }
    }

    /// f1(x) f2(y) as a separable scalar.
    pub fn separable_scalar(pm: &ProductSphere, f1: &[Real], f2: &[Real]) -> SepTensor {
        SepTensor {
            valence: 0,
            blocks: vec![PatternBlock {
                pattern: Vec::new(),
                terms: vec![SepTerm {
                    t1: TensorField::from_scalar_values(pm.f1.dim, f1.to_vec()),
                    t2: TensorField::from_scalar_values(pm.f2.dim, f2.to_vec()),
                }],
            }],
        }
    }

    /// Symmetric 2-tensor supported on one factor's index block: a on the
    /// chosen factor times a scalar weight on the other.
    pub fn factor_sym2(pm: &ProductSphere, which: u8, a: &TensorField, w: &[Real]) -> SepTensor {
        debug_assert_eq!(a.valence, 2);
        let (t1, t2, pattern) = if which == 0 {
            (a.clone(), TensorField::from_scalar_values(pm.f2.dim, w.to_vec()), vec![0, 0])
        } else {
            (TensorField::from_scalar_values(pm.f1.dim, w.to_vec()), a.clone(), vec![1, 1])
        };
        SepTensor { valence: 2, blocks: vec![PatternBlock { pattern, terms: vec![SepTerm { t1, t2 }] }] }
    }

    /// Symmetric mixed-block 2-tensor from one-forms on each factor:
    /// h(X, Y) = w1(X1) w2(Y2) + w1(Y1) w2(X2).
    pub fn mixed_sym2(w1: &TensorField, w2: &TensorField) -> SepTensor {
        debug_assert_eq!(w1.valence, 1);
        debug_assert_eq!(w2.valence, 1);
        let term = || SepTerm { t1: w1.clone(), t2: w2.clone() };
        SepTensor {
            valence: 2,
            blocks: vec![
                PatternBlock { pattern: vec![0, 1], terms: vec![term()] },
                PatternBlock { pattern: vec![1, 0], terms: vec![term()] },
            ],
        }
    }

    pub fn scale(&mut self, s: Real) {
        for b in &mut self.blocks {
            for t in &mut b.terms {
                t.t1.scale(s);
            }
        }
    }

    pub fn scaled(&self, s: Real) -> SepTensor {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn axpy(&mut self, a: Real, other: &SepTensor) {
        debug_assert_eq!(self.valence, other.valence);
        for b in &other.blocks {
            let terms: Vec<SepTerm> = b
                .terms
                .iter()
                .map(|t| SepTerm { t1: t.t1.scaled(a), t2: t.t2.clone() })
                .collect();
            self.push_block(b.pattern.clone(), terms);
        }
        self.normalize();
    }

    pub fn push_block(&mut self, pattern: Vec<u8>, terms: Vec<SepTerm>) {
        debug_assert_eq!(pattern.len(), self.valence);
        if let Some(b) = self.blocks.iter_mut().find(|b| b.pattern == pattern) {
            b.terms.extend(terms);
        } else {
            self.blocks.push(PatternBlock { pattern, terms });
        }
    }

    pub fn block(&self, pattern: &[u8]) -> Option<&PatternBlock> {
        self.blocks.iter().find(|b| b.pattern == pattern)
    }

    /// Sort blocks, merge duplicate patterns, drop exactly-zero terms.
    pub fn normalize(&mut self) {
        self.blocks.sort_by(|a, b| a.pattern.cmp(&b.pattern));
        let mut merged: Vec<PatternBlock> = Vec::with_capacity(self.blocks.len());
        for b in self.blocks.drain(..) {
            match merged.last_mut() {
                Some(last) if last.pattern == b.pattern => last.terms.extend(b.terms),
                _ => merged.push(b),
            }
        }
        for b in &mut merged {
            b.terms.retain(|t| t.t1.max_abs() != 0.0 && t.t2.max_abs() != 0.0);
        }
        merged.retain(|b| !b.terms.is_empty());
        self.blocks = merged;
    }

    /// Restriction to the blocks whose pattern satisfies the predicate.
    pub fn filter_blocks(&self, pred: impl Fn(&[u8]) -> bool) -> SepTensor {
        SepTensor {
            valence: self.valence,
            blocks: self.blocks.iter().filter(|b| pred(&b.pattern)).cloned().collect(),
        }
    }
}

/// Positions of the slots assigned to `which`, ascending.
fn positions(pattern: &[u8], which: u8) -> Vec<usize> {
    pattern.iter().enumerate().filter(|(_, &f)| f == which).map(|(i, _)| i).collect()
}

/// Rank of slot `pos` within the slots of its own factor.
fn local_slot(pattern: &[u8], pos: usize) -> usize {
    pattern[..pos].iter().filter(|&&f| f == pattern[pos]).count()
}

fn permute_dense(t: &TensorField, perm: &[usize]) -> TensorField {
    debug_assert_eq!(perm.len(), t.valence);
    if t.valence <= 1 {
        return t.clone();
    }
    let d = t.dims;
    let v = t.valence;
    let mut out = TensorField::zeros(v, d, t.n_nodes);
    let mut kidx = [0usize; 8];
    let mut iidx = [0usize; 8];
    for c in 0..t.comps() {
        unpack(c, v, d, &mut kidx[..v]);
        for s in 0..v {
            iidx[s] = kidx[perm[s]];
        }
        out.comp_mut(c).copy_from_slice(t.at(&iidx[..v]));
    }
    out
}

fn outer_dense(a: &TensorField, b: &TensorField) -> TensorField {
    debug_assert_eq!(a.n_nodes, b.n_nodes);
    debug_assert_eq!(a.dims, b.dims);
    let n = a.n_nodes;
    let mut out = TensorField::zeros(a.valence + b.valence, a.dims, n);
    let cb = b.comps();
    for ca in 0..a.comps() {
        let x = a.comp(ca);
        for c in 0..cb {
            let y = b.comp(c);
            let dst = out.comp_mut(ca * cb + c);
            for i in 0..n {
                dst[i] = x[i] * y[i];
            }
        }
    }
    out
}

/// out[rest] = g^{xy} t[.. x@i .. y@j ..] for i < j.
fn contract_pair_dense(g_inv: &TensorField, t: &TensorField, i: usize, j: usize) -> TensorField {
    debug_assert!(i < j && j < t.valence);
    let d = t.dims;
    let v = t.valence;
    let n = t.n_nodes;
    let mut out = TensorField::zeros(v - 2, d, n);
    let mut ridx = [0usize; 8];
    let mut tidx = [0usize; 10];
    for c in 0..out.comps() {
        unpack(c, v - 2, d, &mut ridx[..v - 2]);
        let dst = out.comp_mut(c);
        for x in 0..d {
            for y in 0..d {
                let mut s = 0;
                for (q, slot) in tidx[..v].iter_mut().enumerate() {
                    *slot = if q == i {
                        x
                    } else if q == j {
                        y
                    } else {
                        let val = ridx[s];
                        s += 1;
                        val
                    };
                }
                let gi = g_inv.comp(x * d + y);
                let tc = t.at(&tidx[..v]);
                for nd in 0..n {
                    dst[nd] += gi[nd] * tc[nd];
                }
            }
        }
    }
    out
}

/// out[a-rest ++ b-rest] = g^{xy} a[.. x@ia ..] b[.. y@ib ..].
fn contract_prod_dense(
    g_inv: &TensorField,
    a: &TensorField,
    b: &TensorField,
    ia: usize,
    ib: usize,
) -> TensorField {
    let d = a.dims;
    let n = a.n_nodes;
    let va = a.valence;
    let vb = b.valence;
    let mut out = TensorField::zeros(va + vb - 2, d, n);
    let ra = d.pow((va - 1) as u32);
    let rb = d.pow((vb - 1) as u32);
    let mut aidx = [0usize; 8];
    let mut bidx = [0usize; 8];
    let mut fidx = [0usize; 8];
    for c in 0..out.comps() {
        let ca = c / rb;
        let cb = c % rb;
        debug_assert!(ca < ra);
        unpack(ca, va - 1, d, &mut aidx[..va - 1]);
        unpack(cb, vb - 1, d, &mut bidx[..vb - 1]);
        let dst = out.comp_mut(c);
        for x in 0..d {
            for y in 0..d {
                let mut s = 0;
                for (q, slot) in fidx[..va].iter_mut().enumerate() {
                    *slot = if q == ia {
                        x
                    } else {
                        let val = aidx[s];
                        s += 1;
                        val
                    };
                }
                let ac = a.at(&fidx[..va]);
                let mut s = 0;
                for (q, slot) in fidx[..vb].iter_mut().enumerate() {
                    *slot = if q == ib {
                        y
                    } else {
                        let val = bidx[s];
                        s += 1;
                        val
                    };
                }
                let bc = b.at(&fidx[..vb]);
                let gi = g_inv.comp(x * d + y);
                for nd in 0..n {
                    dst[nd] += gi[nd] * ac[nd] * bc[nd];
                }
            }
        }
    }
    out
}

/// out[K] = t[K o perm]: in-slot s takes the index of out-slot perm[s].
pub fn permute(t: &SepTensor, perm: &[usize]) -> SepTensor {
    debug_assert_eq!(perm.len(), t.valence);
    let v = t.valence;
    let mut out = SepTensor::zero(v);
    for b in &t.blocks {
        let mut newpat = vec![0u8; v];
        for s in 0..v {
            newpat[perm[s]] = b.pattern[s];
        }
        // in-factor slot r reads the out index at out-slot perm[old_pos[r]],
        // i.e. at that slot's rank within its factor; this is exactly the
        // dense permute convention, no inversion.
        let mut perms: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for f in 0..2u8 {
            let old_pos = positions(&b.pattern, f);
            perms[f as usize] = old_pos.iter().map(|&r| local_slot(&newpat, perm[r])).collect();
        }
        let p1 = &perms[0];
        let p2 = &perms[1];
        let terms = b
            .terms
            .iter()
            .map(|t| SepTerm { t1: permute_dense(&t.t1, p1), t2: permute_dense(&t.t2, p2) })
            .collect();
        out.push_block(newpat, terms);
    }
    out.normalize();
    out
}

pub fn tensor_prod(a: &SepTensor, b: &SepTensor) -> SepTensor {
    let mut out = SepTensor::zero(a.valence + b.valence);
    for ba in &a.blocks {
        for bb in &b.blocks {
            let mut pattern = ba.pattern.clone();
            pattern.extend(&bb.pattern);
            let mut terms = Vec::with_capacity(ba.terms.len() * bb.terms.len());
            for ta in &ba.terms {
                for tb in &bb.terms {
                    terms.push(SepTerm {
                        t1: outer_dense(&ta.t1, &tb.t1),
                        t2: outer_dense(&ta.t2, &tb.t2),
                    });
                }
            }
            out.push_block(pattern, terms);
        }
    }
    out.normalize();
    out
}

/// g^{xy} t[.. x@i .. y@j ..]; zero across mismatched factor assignments.
pub fn contract(pm: &ProductSphere, t: &SepTensor, i: usize, j: usize) -> SepTensor {
    debug_assert!(i < j && j < t.valence);
    let mut out = SepTensor::zero(t.valence - 2);
    for b in &t.blocks {
        if b.pattern[i] != b.pattern[j] {
            continue;
        }
        let f = b.pattern[i];
        let li = local_slot(&b.pattern, i);
        let lj = local_slot(&b.pattern, j);
        let mut pattern: Vec<u8> = Vec::with_capacity(t.valence - 2);
        for (q, &pf) in b.pattern.iter().enumerate() {
            if q != i && q != j {
                pattern_push(&mut pattern, pf);
            }
        }
        let g_inv = &pm.fac(f).g_inv;
        let terms = b
            .terms
            .iter()
            .map(|t| {
                if f == 0 {
                    SepTerm { t1: contract_pair_dense(g_inv, &t.t1, li, lj), t2: t.t2.clone() }
                } else {
                    SepTerm { t1: t.t1.clone(), t2: contract_pair_dense(g_inv, &t.t2, li, lj) }
                }
            })
            .collect();
        out.push_block(pattern, terms);
    }
    out.normalize();
    out
}

#[inline]
fn pattern_push(p: &mut Vec<u8>, f: u8) {
    p.push(f);
}

/// g^{xy} a[.. x@ia ..] b[.. y@ib ..] with result slots a-rest ++ b-rest.
pub fn contract_prod(
    pm: &ProductSphere,
    a: &SepTensor,
    b: &SepTensor,
    ia: usize,
    ib: usize,
) -> SepTensor {
    let mut out = SepTensor::zero(a.valence + b.valence - 2);
    for ba in &a.blocks {
        for bb in &b.blocks {
            if ba.pattern[ia] != bb.pattern[ib] {
                continue;
            }
            let f = ba.pattern[ia];
            let la = local_slot(&ba.pattern, ia);
            let lb = local_slot(&bb.pattern, ib);
            let mut pattern: Vec<u8> = Vec::with_capacity(out.valence);
            for (q, &pf) in ba.pattern.iter().enumerate() {
                if q != ia {
                    pattern.push(pf);
                }
            }
            for (q, &pf) in bb.pattern.iter().enumerate() {
                if q != ib {
                    pattern.push(pf);
                }
            }
            let g_inv = &pm.fac(f).g_inv;
            let mut terms = Vec::with_capacity(ba.terms.len() * bb.terms.len());
            for ta in &ba.terms {
                for tb in &bb.terms {
                    let (t1, t2) = if f == 0 {
                        (
                            contract_prod_dense(g_inv, &ta.t1, &tb.t1, la, lb),
                            outer_dense(&ta.t2, &tb.t2),
                        )
                    } else {
                        (
                            outer_dense(&ta.t1, &tb.t1),
                            contract_prod_dense(g_inv, &ta.t2, &tb.t2, la, lb),
                        )
                    };
                    terms.push(SepTerm { t1, t2 });
                }
            }
            out.push_block(pattern, terms);
        }
    }
    out.normalize();
    out
}

/// Pointwise full contraction <a, b> with all of b's slots raised; a
/// separable scalar.
pub fn pointwise_inner(pm: &ProductSphere, a: &SepTensor, b: &SepTensor) -> SepTensor {
    debug_assert_eq!(a.valence, b.valence);
    let mut out = SepTensor::zero(0);
    for ba in &a.blocks {
        for bb in &b.blocks {
            if ba.pattern != bb.pattern {
                continue;
            }
            let mut terms = Vec::with_capacity(ba.terms.len() * bb.terms.len());
            for ta in &ba.terms {
                for tb in &bb.terms {
                    let s1 = ops::pointwise_inner(&pm.f1.g_inv, &ta.t1, &tb.t1);
                    let s2 = ops::pointwise_inner(&pm.f2.g_inv, &ta.t2, &tb.t2);
                    terms.push(SepTerm {
                        t1: TensorField::from_scalar_values(pm.f1.dim, s1),
                        t2: TensorField::from_scalar_values(pm.f2.dim, s2),
                    });
                }
            }
            out.push_block(Vec::new(), terms);
        }
    }
    out.normalize();
    out
}

/// Covariant derivative with the direction slot first; one block per factor
/// direction.
pub fn cov_deriv(pm: &ProductSphere, t: &SepTensor) -> SepTensor {
    let mut out = SepTensor::zero(t.valence + 1);
    for b in &t.blocks {
        let mut p0 = Vec::with_capacity(t.valence + 1);
        p0.push(0u8);
        p0.extend(&b.pattern);
        let terms0 = b
            .terms
            .iter()
            .map(|tm| SepTerm { t1: ops::cov_deriv(&pm.f1, &tm.t1), t2: tm.t2.clone() })
            .collect();
        out.push_block(p0, terms0);
        let mut p1 = Vec::with_capacity(t.valence + 1);
        p1.push(1u8);
        p1.extend(&b.pattern);
        let terms1 = b
            .terms
            .iter()
            .map(|tm| SepTerm { t1: tm.t1.clone(), t2: ops::cov_deriv(&pm.f2, &tm.t2) })
            .collect();
        out.push_block(p1, terms1);
    }
    out.normalize();
    out
}

/// (dD a)(x,y,z) = (D_y a)(x,z) - (D_z a)(x,y).
pub fn d_d(pm: &ProductSphere, a: &SepTensor) -> SepTensor {
    debug_assert_eq!(a.valence, 2);
    let da = cov_deriv(pm, a);
    let mut out = permute(&da, &[1, 0, 2]);
    out.axpy(-1.0, &permute(&da, &[2, 0, 1]));
    out
}

/// (deltaD A)(x,y) = (D_i A)(x,y,e^i) + (D_i A)(y,x,e^i).
pub fn delta_d(pm: &ProductSphere, a: &SepTensor) -> SepTensor {
    debug_assert_eq!(a.valence, 3);
    let da = cov_deriv(pm, a);
    let mut out = contract(pm, &da, 0, 3);
    out.axpy(1.0, &contract(pm, &permute(&da, &[0, 2, 1, 3]), 0, 3));
    out
}

/// Formal adjoint of D: -(D_a t)(e^a, rest).
pub fn dstar(pm: &ProductSphere, t: &SepTensor) -> SepTensor {
    let dt = cov_deriv(pm, t);
    contract(pm, &dt, 0, 1).scaled(-1.0)
}

pub fn div_sym2(pm: &ProductSphere, h: &SepTensor) -> SepTensor {
    dstar(pm, h)
}

/// (div* w)(x,y) = ((D_x w)(y) + (D_y w)(x)) / 2.
pub fn div_star(pm: &ProductSphere, w: &SepTensor) -> SepTensor {
    debug_assert_eq!(w.valence, 1);
    let dw = cov_deriv(pm, w);
    let mut out = dw.scaled(0.5);
    out.axpy(0.5, &permute(&dw, &[1, 0]));
    out
}

pub fn rough_laplacian(pm: &ProductSphere, t: &SepTensor) -> SepTensor {
    let ddt = cov_deriv(pm, &cov_deriv(pm, t));
    contract(pm, &ddt, 0, 1).scaled(-1.0)
}

/// Symmetrized composition through the inverse metric.
pub fn compose_sym2(pm: &ProductSphere, h: &SepTensor, k: &SepTensor) -> SepTensor {
    let mut out = contract_prod(pm, h, k, 1, 0).scaled(0.5);
    out.axpy(0.5, &contract_prod(pm, k, h, 1, 0));
    out
}

pub fn trace_sym2(pm: &ProductSphere, h: &SepTensor) -> SepTensor {
    contract(pm, h, 0, 1)
}

/// f g for a separable scalar f.
pub fn scalar_times_metric(pm: &ProductSphere, f: &SepTensor) -> SepTensor {
    debug_assert_eq!(f.valence, 0);
    tensor_prod(f, &pm.g)
}

/// w^a T_{a ...} for a one-form w.
pub fn contract_first(pm: &ProductSphere, w: &SepTensor, t: &SepTensor) -> SepTensor {
    debug_assert_eq!(w.valence, 1);
    contract_prod(pm, w, t, 0, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn carrier() -> ProductSphere {
        build_product_sphere(3, 1.0, 8).unwrap()
    }

    fn harmonic(m: &DiscreteManifold, i: usize) -> Vec<Real> {
        m.ambient[i].clone()
    }

    fn harmonic2(m: &DiscreteManifold, i: usize, j: usize) -> Vec<Real> {
        (0..m.n_nodes()).map(|t| m.ambient[i][t] * m.ambient[j][t]).collect()
    }

    fn probe_scalar(pm: &ProductSphere) -> SepTensor {
        let mut s = SepTensor::separable_scalar(pm, &harmonic(&pm.f1, 0), &harmonic2(&pm.f2, 1, 2));
        s.axpy(0.7, &SepTensor::separable_scalar(pm, &harmonic2(&pm.f1, 0, 3), &harmonic(&pm.f2, 2)));
        s
    }

    fn probe_sym2(pm: &ProductSphere) -> SepTensor {
        let f = probe_scalar(pm);
        let df = cov_deriv(pm, &f);
        let mut h = div_star(pm, &df);
        h.axpy(0.8, &scalar_times_metric(pm, &f));
        h
    }

    #[test]
    fn carrier_block_fields_match_space_form_values() {
        let pm = carrier();
        let c = pm.curvature;
        let mm = pm.m as Real;
        // |R|^2 = 2 m (m-1) c^2 per factor, constant across the carrier
        let expect = 2.0 * 2.0 * mm * (mm - 1.0) * c * c;
        assert!((pm.r_norm2 - expect).abs() < 1e-9, "{} vs {expect}", pm.r_norm2);
        assert!(pm.r_norm2_spread < 1e-9, "spread {}", pm.r_norm2_spread);
        // Rcheck = 2 (m-1) c^2 g blockwise
        let res = pm.l2_rel_residual(&pm.rcheck, &pm.g.scaled(2.0 * (mm - 1.0) * c * c));
        assert!(res < 1e-10, "{res}");
        // tr g = 2m
        let tr = trace_sym2(&pm, &pm.g);
        let total = pm.integrate(&tr);
        assert!((total - 2.0 * mm * pm.volume).abs() < 1e-8 * pm.volume);
        // metric inner product of the probe against itself is positive
        let h = probe_sym2(&pm);
        assert!(pm.l2_norm2(&h) > 0.0);
    }

    #[test]
    fn permute_and_contract_agree_with_dense_composition() {
        let pm = carrier();
        let h = probe_sym2(&pm);
        let dh = cov_deriv(&pm, &h);
        // double transpose of the derivative slots is the identity
        let p = permute(&permute(&dh, &[1, 0, 2]), &[1, 0, 2]);
        let res = pm.l2_rel_residual(&p, &dh);
        assert!(res < 1e-14, "{res}");
        // trace commutes with the metric factor: <g, h> = tr h
        let trh = trace_sym2(&pm, &h);
        let gh = pointwise_inner(&pm, &pm.g, &h);
        let mut diff = trh.clone();
        diff.axpy(-1.0, &gh);
        let norm = pm.l2_norm2(&diff).sqrt();
        assert!(norm < 1e-10 * (1.0 + pm.l2_norm2(&trh).sqrt()), "{norm}");
        // compose with the metric is the identity
        let comp = compose_sym2(&pm, &pm.g, &h);
        let res = pm.l2_rel_residual(&comp, &h);
        assert!(res < 1e-12, "{res}");
    }

    #[test]
    fn metric_is_parallel_and_laplacian_splits() {
        let pm = build_product_sphere(3, 1.0, 10).unwrap();
        let dg = cov_deriv(&pm, &pm.g);
        assert!(pm.l2_norm2(&dg).sqrt() < 1e-9);
        // Delta(f1 f2) = (Delta1 f1) f2 + f1 (Delta2 f2): first factor ell=1
        // harmonic, second ell=2, eigenvalue m c + 2(m+1) c
        let f = SepTensor::separable_scalar(&pm, &harmonic(&pm.f1, 1), &harmonic2(&pm.f2, 0, 2));
        let lap = rough_laplacian(&pm, &f).scaled(-1.0); // geometers' sign
        let mm = pm.m as Real;
        let lam = -(mm * pm.curvature + 2.0 * (mm + 1.0) * pm.curvature);
        let res = pm.l2_rel_residual(&lap, &f.scaled(lam));
        assert!(res < 1e-7, "{res}");
    }

    #[test]
    fn dd_and_deltad_are_adjoint_on_products() {
        let pm = carrier();
        let h = probe_sym2(&pm);
        let f2 = probe_scalar(&pm);
        let k = scalar_times_metric(&pm, &f2);
        let a = d_d(&pm, &k);
        let lhs = pm.l2_inner(&a, &d_d(&pm, &h));
        let rhs = pm.l2_inner(&delta_d(&pm, &a), &h);
        assert!(lhs.abs() > 1e-8, "degenerate pairing {lhs}");
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");

        let w = cov_deriv(&pm, &probe_scalar(&pm));
        let lhs = pm.l2_inner(&div_sym2(&pm, &h), &w);
        let rhs = pm.l2_inner(&h, &div_star(&pm, &w));
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn factor_bridge_operators_reduce_to_dense_factor_results() {
        let pm = carrier();
        let m1 = &pm.f1;
        // y-independent probe supported on the first factor block
        let f: Vec<Real> = (0..m1.n_nodes()).map(|t| m1.ambient[0][t] * m1.ambient[2][t]).collect();
        let sf = TensorField::from_scalar_values(m1.dim, f.clone());
        let df = ops::cov_deriv(m1, &sf);
        let mut a = ops::cov_deriv(m1, &df);
        a.axpy(0.9, &ops::scalar_mul(&m1.g, &f));
        let ones = vec![1.0; pm.f2.n_nodes()];
        let h = SepTensor::factor_sym2(&pm, 0, &a, &ones);

        // dD and deltaD dD restrict to the factor operators on the all-first
        // patterns, with nothing elsewhere
        let dd = d_d(&pm, &h);
        let dense = ops::d_d(m1, &a);
        for b in &dd.blocks {
            if b.pattern == vec![0, 0, 0] {
                let mut acc = TensorField::zeros(3, m1.dim, m1.n_nodes());
                for t in &b.terms {
                    // factor-2 part is constant 1 here
                    assert!((t.t2.max_abs() - 1.0).abs() < 1e-14);
                    acc.axpy(1.0, &t.t1);
                }
                assert!(ops::max_abs_diff(&acc, &dense) < 1e-10);
            } else {
                for t in &b.terms {
                    let sz = t.t1.max_abs() * t.t2.max_abs();
                    assert!(sz < 1e-12, "stray block {:?}: {sz}", b.pattern);
                }
            }
        }
        let ddd = delta_d(&pm, &dd);
        let dense_ddd = ops::delta_d(m1, &dense);
        let expect = SepTensor::factor_sym2(&pm, 0, &dense_ddd, &ones);
        let res = pm.l2_rel_residual(&ddd, &expect);
        assert!(res < 1e-10, "{res}");

        // rough Laplacian likewise
        let rl = rough_laplacian(&pm, &h);
        let dense_rl = ops::rough_laplacian(m1, &a);
        let expect = SepTensor::factor_sym2(&pm, 0, &dense_rl, &ones);
        let res = pm.l2_rel_residual(&rl, &expect);
        assert!(res < 1e-10, "{res}");
    }

    #[test]
    fn l2_pairings_factor_over_the_product() {
        let pm = carrier();
        // <f1 f2, k1 k2>_L2 = <f1,k1>_1 <f2,k2>_2 for separable scalars
        let f = SepTensor::separable_scalar(&pm, &harmonic(&pm.f1, 0), &harmonic(&pm.f2, 1));
        let k = SepTensor::separable_scalar(&pm, &harmonic2(&pm.f1, 0, 1), &harmonic(&pm.f2, 1));
        let lhs = pm.l2_inner(&f, &k);
        let i1 = pm.f1.integrate_dv(
            &(0..pm.f1.n_nodes())
                .map(|t| pm.f1.ambient[0][t] * pm.f1.ambient[0][t] * pm.f1.ambient[1][t])
                .collect::<Vec<_>>(),
        );
        let i2 = pm.f2.integrate_dv(
            &(0..pm.f2.n_nodes()).map(|t| pm.f2.ambient[1][t] * pm.f2.ambient[1][t]).collect::<Vec<_>>(),
        );
        assert!((lhs - i1 * i2).abs() < 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {}", i1 * i2);
    }
}
