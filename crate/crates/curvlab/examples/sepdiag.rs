//! Scratch diagnostic for the product variation layer.

use curvlab::field::TensorField;
use curvlab::ops::raise_slot;
use curvlab::product::{self, probes};
use curvlab::sep::{self, build_product_sphere, PatternBlock, SepTensor, SepTerm};
use curvlab::variation;

fn first_block(pm: &sep::ProductSphere, t: &SepTensor, v: usize) -> SepTensor {
    let pattern = vec![0u8; v];
    t.filter_blocks(|p| p == pattern.as_slice())
}

fn lift(pm: &sep::ProductSphere, t: &TensorField) -> SepTensor {
    SepTensor {
        valence: t.valence,
        blocks: vec![PatternBlock {
            pattern: vec![0u8; t.valence],
            terms: vec![SepTerm { t1: t.clone(), t2: sep::const_scalar(&pm.f2, 1.0) }],
        }],
    }
}

fn main() {
    let pm = build_product_sphere(3, 1.0, 10).unwrap();
    let m1 = &pm.f1;
    let d = m1.dim;
    let n = m1.n_nodes();

    let h_dense = {
        let fsc: Vec<f64> =
            (0..n).map(|t| m1.ambient[0][t] * m1.ambient[2][t]).collect();
        let df = m1.diff_scalar(&fsc);
        let mut hh = curvlab::ops::div_star(m1, &df);
        hh.axpy(0.9, &curvlab::ops::scalar_times_metric(m1, &fsc));
        hh
    };
    let ones = vec![1.0; pm.f2.n_nodes()];
    let hsep = SepTensor::factor_sym2(&pm, 0, &h_dense, &ones);

    let pack = product::variation_pack(&pm, &hsep);
    let dense = variation::variation_pack(m1, &h_dense);

    // residuals of each pack field, same convention as the bridge test
    let fields: [(&str, &SepTensor, &TensorField, usize); 5] = [
        ("christoffel", &pack.c_low, &dense.c_low, 3),
        ("curvature", &pack.rbar, &dense.rbar, 4),
        ("ricci", &pack.ricci_bar, &dense.ricci_bar, 2),
        ("dstar_prime", &pack.dstar_prime, &dense.dstar_prime, 3),
        ("l_term", &pack.l_term, &dense.l_term, 3),
    ];
    for (name, got, want, v) in fields {
        let first = first_block(&pm, got, v);
        let expect = lift(&pm, want);
        println!("{name}: rel residual {:.3e}", pm.l2_rel_residual(&first, &expect));
    }

    // ---- piecewise l_field comparison ----
    let c_low_sep = product::christoffel_variation(&pm, &hsep);
    let r = &m1.riemann;
    let ric = &m1.ricci;
    let pi = &dense.pi;
    let pi_u0 = raise_slot(&m1.g_inv, pi, 0);
    let pi_u1 = raise_slot(&m1.g_inv, pi, 1);

    // dense pieces, one at a time, output layout (w, y, z)
    let mut dp: Vec<TensorField> = (0..6).map(|_| TensorField::zeros(3, d, n)).collect();
    // frame trace t1[s] = g^{ab} Pi(a,b,s)
    let mut t1 = TensorField::zeros(1, d, n);
    for s in 0..d {
        for a in 0..d {
            for b in 0..d {
                let gi = m1.g_inv.comp(a * d + b);
                let pc = pi.comp((a * d + b) * d + s);
                let dst = t1.comp_mut(s);
                for t0 in 0..n {
                    dst[t0] += gi[t0] * pc[t0];
                }
            }
        }
    }
    for w in 0..d {
        for y in 0..d {
            for z in 0..d {
                let c = (w * d + y) * d + z;
                for s in 0..d {
                    let a1 = t1.comp(s);
                    let b1 = r.comp(((y * d + z) * d + s) * d + w);
                    let q4 = ric.comp(z * d + s);
                    let p4 = pi.comp((y * d + w) * d + s);
                    let q6 = ric.comp(y * d + s);
                    let p6 = pi.comp((z * d + w) * d + s);
                    for t0 in 0..n {
                        dp[0].comp_mut(c)[t0] += a1[t0] * b1[t0];
                        dp[3].comp_mut(c)[t0] -= q4[t0] * p4[t0];
                        dp[5].comp_mut(c)[t0] += q6[t0] * p6[t0];
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
                        for t0 in 0..n {
                            dp[1].comp_mut(c)[t0] += p2[t0] * r2[t0];
                            dp[2].comp_mut(c)[t0] += p3[t0] * r3[t0];
                            dp[4].comp_mut(c)[t0] += p5[t0] * r5[t0];
                        }
                    }
                }
            }
        }
    }

    // sep pieces in the same order
    let ct = sep::contract(&pm, &c_low_sep, 0, 1);
    let sp0 = sep::permute(&sep::contract_prod(&pm, &ct, &pm.riemann, 0, 2), &[1, 2, 0]);
    let w1 = sep::contract_prod(&pm, &c_low_sep, &pm.riemann, 0, 2);
    let sp1 = sep::contract(&pm, &w1, 1, 4);
    let w2 = sep::contract_prod(&pm, &c_low_sep, &pm.riemann, 1, 1);
    let sp2 = sep::permute(&sep::contract(&pm, &w2, 1, 3), &[1, 2, 0]);
    let rc = sep::contract_prod(&pm, &pm.ricci, &c_low_sep, 1, 2);
    let sp3 = sep::permute(&rc, &[2, 1, 0]).scaled(-1.0);
    let w3 = sep::contract_prod(&pm, &c_low_sep, &pm.riemann, 1, 0);
    let sp4 = sep::permute(&sep::contract(&pm, &w3, 1, 3), &[2, 1, 0]);
    let sp5 = sep::permute(&rc, &[1, 2, 0]);

    for (i, sp) in [sp0, sp1, sp2, sp3, sp4, sp5].iter().enumerate() {
        let first = first_block(&pm, sp, 3);
        let expect = lift(&pm, &dp[i]);
        let res = pm.l2_rel_residual(&first, &expect);
        println!(
            "l piece {i}: rel residual {:.3e}  (|sep| {:.4e}, |dense| {:.4e})",
            res,
            pm.l2_norm2(&first).sqrt(),
            pm.l2_norm2(&expect).sqrt()
        );
    }
}
