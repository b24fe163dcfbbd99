//! Coefficient-fitting diagnostics for the product variation rows.
//!
//! Probes are built with mixed spectral content so that candidate fields are
//! linearly independent; single-harmonic probes make every Laplacian-type
//! candidate proportional to the field and the fits degenerate.

use curvlab::decompose::sphere_harmonic;
use curvlab::field::TensorField;
use curvlab::manifold::DiscreteManifold;
use curvlab::product::{self, probes};
use curvlab::sep::{self, build_product_sphere, tensor_prod, ProductSphere, SepTensor};
use curvlab::Real;

fn solve(a: &mut Vec<Vec<Real>>, b: &mut Vec<Real>) -> Vec<Real> {
    let n = b.len();
    for k in 0..n {
        let mut piv = k;
        for r in k + 1..n {
            if a[r][k].abs() > a[piv][k].abs() {
                piv = r;
            }
        }
        a.swap(k, piv);
        b.swap(k, piv);
        let akk = a[k][k];
        if akk.abs() < 1e-250 {
            continue;
        }
        for r in 0..n {
            if r == k {
                continue;
            }
            let f = a[r][k] / akk;
            for c in k..n {
                a[r][c] -= f * a[k][c];
            }
            b[r] -= f * b[k];
        }
    }
    (0..n).map(|k| if a[k][k].abs() < 1e-250 { 0.0 } else { b[k] / a[k][k] }).collect()
}

fn fit(pm: &ProductSphere, label: &str, lhs: &SepTensor, cands: &[(&str, SepTensor)]) {
    let n = cands.len();
    let mut gram = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            gram[i][j] = pm.l2_inner(&cands[i].1, &cands[j].1);
        }
        rhs[i] = pm.l2_inner(&cands[i].1, lhs);
    }
    let coef = solve(&mut gram, &mut rhs);
    let mut resid = lhs.clone();
    for (ci, (_, f)) in coef.iter().zip(cands) {
        resid.axpy(-ci, f);
    }
    let rel = pm.l2_norm2(&resid).sqrt() / pm.l2_norm2(lhs).sqrt().max(1e-300);
    let parts: Vec<String> =
        cands.iter().zip(&coef).map(|((nm, _), c)| format!("{c:+.6} {nm}")).collect();
    println!("{label}\n    = {}   [resid {rel:.2e}]", parts.join(" "));
}

/// Co-closed one-form on a round factor: u times a rotation Killing form,
/// with u invariant under that rotation's flow.
fn co_closed(m: &DiscreteManifold, kind: usize) -> TensorField {
    let rot = |i: usize, j: usize| probes::rotation_one_form(m, i, j);
    match kind {
        0 => rot(0, 1),
        1 => {
            // u = a2 a3, invariant under the (0,1)-rotation
            let u: Vec<Real> =
                (0..m.n_nodes()).map(|t| m.ambient[2][t] * m.ambient[3][t]).collect();
            curvlab::ops::scalar_mul(&rot(0, 1), &u)
        }
        2 => {
            let u: Vec<Real> = (0..m.n_nodes())
                .map(|t| m.ambient[0][t] * m.ambient[0][t] - m.ambient[1][t] * m.ambient[1][t])
                .collect();
            curvlab::ops::scalar_mul(&rot(2, 3), &u)
        }
        _ => {
            let u: Vec<Real> = (0..m.n_nodes()).map(|t| m.ambient[1][t]).collect();
            curvlab::ops::scalar_mul(&rot(0, 2), &u)
        }
    }
}

fn mixed_probe(pm: &ProductSphere, k1: usize, k2: usize) -> SepTensor {
    SepTensor::mixed_sym2(&co_closed(&pm.f1, k1), &co_closed(&pm.f2, k2))
}

/// E1-restricted rough Laplacian: both derivative slots on the first factor.
fn lap_e(pm: &ProductSphere, t: &SepTensor, which: u8) -> SepTensor {
    let d1 = sep::cov_deriv(pm, t).filter_blocks(|p| p[0] == which);
    let d2 = sep::cov_deriv(pm, &d1).filter_blocks(|p| p[0] == which);
    sep::contract(pm, &d2, 0, 1).scaled(-1.0)
}

fn hess_blocks(pm: &ProductSphere, f: &SepTensor) -> (SepTensor, SepTensor, SepTensor) {
    let df = sep::cov_deriv(pm, f);
    let hess = sep::div_star(pm, &df);
    (
        hess.filter_blocks(|p| p[0] == 0 && p[1] == 0),
        hess.filter_blocks(|p| p[0] == 1 && p[1] == 1),
        hess.filter_blocks(|p| p[0] != p[1]),
    )
}

fn lap_parts(pm: &ProductSphere, f: &SepTensor) -> (SepTensor, SepTensor) {
    let df = sep::cov_deriv(pm, f);
    let d1 = df.filter_blocks(|p| p[0] == 0);
    let d2 = df.filter_blocks(|p| p[0] == 1);
    (sep::dstar(pm, &d1).scaled(-1.0), sep::dstar(pm, &d2).scaled(-1.0))
}

fn main() {
    let c: Real = 1.3;
    let pm = build_product_sphere(3, c, 10).unwrap();
    let m = pm.m as Real;

    // verify the co-closed constructions
    for kind in 0..4 {
        let w = co_closed(&pm.f1, kind);
        let delta = {
            // one-form divergence via trace of the symmetrized derivative
            let ds = curvlab::ops::div_star(&pm.f1, &w);
            curvlab::ops::trace_sym2(&pm.f1.g_inv, &ds)
        };
        let nrm: Real = pm.f1.l2_norm2(&w).sqrt();
        let dn = pm.f1.integrate_dv(&delta.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
        println!("co_closed kind {kind}: |w| {nrm:.3e}, |delta w| {dn:.3e}");
    }

    // ---- mixed (htilde) rows on multi-band div-free probes ----
    let mut ht = mixed_probe(&pm, 1, 0);
    ht.axpy(0.8, &mixed_probe(&pm, 0, 2));
    ht.axpy(0.5, &mixed_probe(&pm, 2, 3));

    {
        let lhs = sep::delta_d(&pm, &sep::d_d(&pm, &ht));
        let cands = vec![
            ("D*Dh", sep::rough_laplacian(&pm, &ht)),
            ("c h", ht.scaled(c)),
        ];
        fit(&pm, "dDdD on htilde (div-free, multi-band)", &lhs, &cands);

        let pack = product::variation_pack(&pm, &ht);
        let cands = vec![
            ("D*Dh", sep::rough_laplacian(&pm, &ht)),
            ("c h", ht.scaled(c)),
        ];
        fit(&pm, "ricci' on htilde", &pack.ricci_bar, &cands);

        let lhs = product::rcheck_variation(&pm, &ht, &pack.rbar);
        let cands = vec![
            ("c D*Dh", sep::rough_laplacian(&pm, &ht).scaled(c)),
            ("c2 h", ht.scaled(c * c)),
            ("D*Dh", sep::rough_laplacian(&pm, &ht)),
        ];
        fit(&pm, "Rcheck' on htilde", &lhs, &cands);

        let np = product::norm_power_variation(&pm, 2.5, &pack.norm2_prime);
        println!("(|R|^p)' on htilde multi-band: |field| = {:.3e}", pm.l2_norm2(&np).sqrt());
    }

    // ---- factor-block (h1) rows: y-independent + y-dependent mixture ----
    let h1_a = probes::factor_tt(&pm, 0, 11);
    let h1_b = {
        let base = probes::factor_tt(&pm, 0, 7);
        let w = sphere_harmonic(&pm.f2, 1, 0).unwrap();
        let b = base.filter_blocks(|p| p == [0, 0]);
        let mut out = SepTensor::zero(2);
        for blk in &b.blocks {
            for t in &blk.terms {
                let mut t2 = t.t2.clone();
                for (dst, wv) in t2.comp_mut(0).iter_mut().zip(&w) {
                    *dst *= wv;
                }
                out.push_block(blk.pattern.clone(), vec![sep::SepTerm { t1: t.t1.clone(), t2 }]);
            }
        }
        out
    };
    let mut h1_mix = h1_a.clone();
    h1_mix.axpy(0.7, &h1_b);

    for (nm, h) in [("h1 y-indep", &h1_a), ("h1 mixture", &h1_mix)] {
        let lhs = sep::delta_d(&pm, &sep::d_d(&pm, h));
        let cands = vec![
            ("D*Dh", sep::rough_laplacian(&pm, h)),
            ("lapE1 h", lap_e(&pm, h, 0)),
            ("c h", h.scaled(c)),
        ];
        fit(&pm, &format!("dDdD on {nm}"), &lhs, &cands);

        let pack = product::variation_pack(&pm, h);
        let cands = vec![
            ("D*Dh", sep::rough_laplacian(&pm, h)),
            ("lapE1 h", lap_e(&pm, h, 0)),
            ("c h", h.scaled(c)),
        ];
        fit(&pm, &format!("ricci' on {nm}"), &pack.ricci_bar, &cands);

        let lhs = product::rcheck_variation(&pm, h, &pack.rbar);
        let cands = vec![
            ("c D*Dh", sep::rough_laplacian(&pm, h).scaled(c)),
            ("c lapE1 h", lap_e(&pm, h, 0).scaled(c)),
            ("c2 h", h.scaled(c * c)),
        ];
        fit(&pm, &format!("Rcheck' on {nm}"), &lhs, &cands);

        let np = product::norm_power_variation(&pm, 2.5, &pack.norm2_prime);
        println!("(|R|^p)' on {nm}: |field| = {:.3e}", pm.l2_norm2(&np).sqrt());
    }

    // multi-band y-independent factor TT probe: pins the Laplacian split in
    // rows where a single spectral band leaves it ambiguous
    {
        let m1 = &pm.f1;
        let raw = curvlab::decompose::sym_outer(&co_closed(m1, 0), &co_closed(m1, 2));
        let tt = curvlab::decompose::tt_project(m1, &raw);
        let tr = curvlab::ops::trace_sym2(&m1.g_inv, &tt);
        let dv = curvlab::ops::div_sym2(m1, &tt);
        println!(
            "band-3 TT probe: |tt| {:.3e}, |tr| {:.3e}, |div| {:.3e}",
            m1.l2_norm2(&tt).sqrt(),
            m1.integrate_dv(&tr.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt(),
            m1.l2_norm2(&dv).sqrt()
        );
        let ones = vec![1.0; pm.f2.n_nodes()];
        let mut h = SepTensor::factor_sym2(&pm, 0, &tt, &ones);
        h.axpy(0.9, &h1_a);

        let lhs = sep::delta_d(&pm, &sep::d_d(&pm, &h));
        let cands = vec![
            ("D*Dh", sep::rough_laplacian(&pm, &h)),
            ("c h", h.scaled(c)),
        ];
        fit(&pm, "dDdD on h1 multi-band y-indep", &lhs, &cands);

        let pack = product::variation_pack(&pm, &h);
        let cands = vec![
            ("D*Dh", sep::rough_laplacian(&pm, &h)),
            ("c h", h.scaled(c)),
        ];
        fit(&pm, "ricci' on h1 multi-band y-indep", &pack.ricci_bar, &cands);

        let lhs = product::rcheck_variation(&pm, &h, &pack.rbar);
        let cands = vec![
            ("c lapE1 h", lap_e(&pm, &h, 0).scaled(c)),
            ("c2 h", h.scaled(c * c)),
        ];
        fit(&pm, "Rcheck' on h1 multi-band y-indep", &lhs, &cands);

        // factor closed form on the new band
        for p in [2.0, 3.0] {
            let sv = product::second_variation(&pm, p, &h, &h).unwrap();
            let closed = product::factor_tt_second_variation(&pm, p, &h).unwrap();
            println!(
                "factor closed form, band-3 y-indep, p={p}: rel {:.2e}",
                ((sv.total - closed) / sv.total).abs()
            );
        }

        // and on the y-dependent mixture, for the record
        let mut hy = h.clone();
        hy.axpy(0.8, &h1_b);
        let lhs = product::rcheck_variation(&pm, &hy, &product::variation_pack(&pm, &hy).rbar);
        let cands = vec![
            ("c lapE1 h", lap_e(&pm, &hy, 0).scaled(c)),
            ("c2 h", hy.scaled(c * c)),
            ("c D*Dh", sep::rough_laplacian(&pm, &hy).scaled(c)),
        ];
        fit(&pm, "Rcheck' on h1 multi-band y-dep", &lhs, &cands);
    }

    // non-TT y-independent factor block: norm-power row
    let h1_gen = {
        let m1 = &pm.f1;
        let f: Vec<Real> =
            (0..m1.n_nodes()).map(|t| m1.ambient[0][t] * m1.ambient[2][t]).collect();
        let df = m1.diff_scalar(&f);
        let mut h = curvlab::ops::div_star(m1, &df);
        let tr = curvlab::ops::trace_sym2(&m1.g_inv, &h);
        let tf: Vec<Real> = tr.iter().map(|v| -v / m).collect();
        h.axpy(1.0, &curvlab::ops::scalar_times_metric(m1, &tf));
        let ones = vec![1.0; pm.f2.n_nodes()];
        SepTensor::factor_sym2(&pm, 0, &h, &ones)
    };
    {
        let p = 2.5;
        let pack = product::variation_pack(&pm, &h1_gen);
        let np = product::norm_power_variation(&pm, p, &pack.norm2_prime);
        let s = pm.r_norm2.powf(0.5 * (p - 2.0));
        let dd = sep::div_star(&pm, &sep::div_sym2(&pm, &h1_gen));
        let cands = vec![
            ("s c tr(d*del h)", sep::trace_sym2(&pm, &dd).scaled(s * c)),
        ];
        fit(&pm, "(|R|^p)' on h1 gen (p=2.5)", &np, &cands);
    }

    // ---- conformal (fg1) rows on a two-harmonic scalar ----
    let f = {
        let mut f = probes::separable_harmonic(&pm, 2, 0, 0, 0).unwrap();
        f.axpy(0.9, &probes::separable_harmonic(&pm, 1, 0, 1, 1).unwrap());
        f.axpy(0.6, &probes::separable_harmonic(&pm, 2, 1, 2, 0).unwrap());
        f
    };
    {
        let fg1 = probes::conformal_direction(&pm, 0, &f);
        let (l1, l2) = lap_parts(&pm, &f);
        let (h11, h22, hmix) = hess_blocks(&pm, &f);

        let lhs = sep::delta_d(&pm, &sep::d_d(&pm, &fg1));
        let cands = vec![
            ("L1f g1", tensor_prod(&l1, &pm.g_factor(0))),
            ("L2f g1", tensor_prod(&l2, &pm.g_factor(0))),
            ("L1f g2", tensor_prod(&l1, &pm.g_factor(1))),
            ("L2f g2", tensor_prod(&l2, &pm.g_factor(1))),
            ("hess11", h11.clone()),
            ("hess22", h22.clone()),
            ("hessmix", hmix.clone()),
            ("c f g1", tensor_prod(&f, &pm.g_factor(0)).scaled(c)),
            ("c f g2", tensor_prod(&f, &pm.g_factor(1)).scaled(c)),
        ];
        fit(&pm, "dDdD on f g1 (two-harmonic f)", &lhs, &cands);

        let pack = product::variation_pack(&pm, &fg1);
        let cands = vec![
            ("L1f g1", tensor_prod(&l1, &pm.g_factor(0))),
            ("L2f g1", tensor_prod(&l2, &pm.g_factor(0))),
            ("L1f g2", tensor_prod(&l1, &pm.g_factor(1))),
            ("L2f g2", tensor_prod(&l2, &pm.g_factor(1))),
            ("hess11", h11.clone()),
            ("hess22", h22.clone()),
            ("hessmix", hmix.clone()),
            ("c f g1", tensor_prod(&f, &pm.g_factor(0)).scaled(c)),
            ("c f g2", tensor_prod(&f, &pm.g_factor(1)).scaled(c)),
        ];
        fit(&pm, "ricci' on f g1", &pack.ricci_bar, &cands);

        let lhs = product::rcheck_variation(&pm, &fg1, &pack.rbar);
        let cands: Vec<(&str, SepTensor)> = vec![
            ("c L1f g1", tensor_prod(&l1, &pm.g_factor(0)).scaled(c)),
            ("c L2f g1", tensor_prod(&l2, &pm.g_factor(0)).scaled(c)),
            ("c L1f g2", tensor_prod(&l1, &pm.g_factor(1)).scaled(c)),
            ("c L2f g2", tensor_prod(&l2, &pm.g_factor(1)).scaled(c)),
            ("c hess11", h11.scaled(c)),
            ("c hess22", h22.scaled(c)),
            ("c hessmix", hmix.scaled(c)),
            ("c2 f g1", tensor_prod(&f, &pm.g_factor(0)).scaled(c * c)),
            ("c2 f g2", tensor_prod(&f, &pm.g_factor(1)).scaled(c * c)),
        ];
        fit(&pm, "Rcheck' on f g1", &lhs, &cands);

        let p = 2.5;
        let np = product::norm_power_variation(&pm, p, &pack.norm2_prime);
        let s = pm.r_norm2.powf(0.5 * (p - 2.0));
        let cands = vec![
            ("s c L1f", l1.scaled(s * c)),
            ("s c L2f", l2.scaled(s * c)),
            ("s c2 f", f.scaled(s * c * c)),
        ];
        fit(&pm, "(|R|^p)' on f g1 (p=2.5)", &np, &cands);
    }

    // ---- K adjudication over varied mixed probes ----
    println!();
    let kprobes: Vec<(String, SepTensor)> = vec![
        ("kill+kill".into(), mixed_probe(&pm, 0, 0)),
        ("uxi+kill".into(), mixed_probe(&pm, 1, 0)),
        ("kill+uxi".into(), mixed_probe(&pm, 0, 2)),
        ("uxi+uxi".into(), mixed_probe(&pm, 1, 2)),
        ("mix a".into(), {
            let mut h = mixed_probe(&pm, 0, 0);
            h.axpy(0.6, &mixed_probe(&pm, 1, 2));
            h
        }),
        ("mix b".into(), {
            let mut h = mixed_probe(&pm, 2, 3);
            h.axpy(-0.4, &mixed_probe(&pm, 1, 0));
            h
        }),
    ];
    let p = 2.0;
    let mm = m;
    let s = pm.r_norm2.powf(0.5 * (p - 2.0));
    let alpha = p / mm - 1.0;
    let mut rows: Vec<[Real; 6]> = Vec::new();
    let mut vals: Vec<Real> = Vec::new();
    for (nm, h) in &kprobes {
        let sv = product::second_variation(&pm, p, h, h).unwrap();
        let lhs = sv.total / (pm.volume.powf(alpha) * p * s);
        let ddh = sep::rough_laplacian(&pm, h);
        let dh = sep::cov_deriv(&pm, h);
        let q1 = pm.l2_norm2(&ddh);
        let q2 = pm.l2_norm2(&dh);
        let q3 = pm.l2_norm2(h);
        let dd = sep::d_d(&pm, h);
        let k02 = 0.25 * pm.l2_norm2(&dd.filter_blocks(|q| q[0] == q[2]));
        let k12 = 0.25 * pm.l2_norm2(&dd.filter_blocks(|q| q[1] == q[2]));
        let k01 = 0.25 * pm.l2_norm2(&dd.filter_blocks(|q| q[0] == q[1]));
        let deficit = q1 + (mm - 1.0) * c * q2 + 2.0 * (mm - 1.0) * c * c * q3 - lhs;
        println!(
            "{nm}: deficit/c {:.6}  K[0==2] {:.6}  K[1==2] {:.6}  K[0==1] {:.6}",
            deficit / c,
            k02,
            k12,
            k01
        );
        rows.push([q1, c * q2, c * c * q3, c * k02, c * k12, c * k01]);
        vals.push(lhs);
    }
    // least-squares over the 6 probes for the full model
    let nb = 6;
    let mut gram = vec![vec![0.0; nb]; nb];
    let mut rhs = vec![0.0; nb];
    for (r, v) in rows.iter().zip(&vals) {
        for i in 0..nb {
            for j in 0..nb {
                gram[i][j] += r[i] * r[j];
            }
            rhs[i] += r[i] * v;
        }
    }
    let coef = solve(&mut gram, &mut rhs);
    println!(
        "H/(V^a p s) fit: {:+.6}|D*Dh|^2 {:+.6}c|Dh|^2 {:+.6}c2|h|^2 {:+.6}cK02 {:+.6}cK12 {:+.6}cK01",
        coef[0], coef[1], coef[2], coef[3], coef[4], coef[5]
    );

    // ---- conformal quadratic grids, overdetermined ----
    println!();
    let combos: [(usize, usize, usize, usize); 9] = [
        (1, 0, 0, 0),
        (0, 0, 1, 0),
        (1, 0, 1, 1),
        (2, 0, 0, 0),
        (0, 0, 2, 0),
        (2, 0, 1, 1),
        (1, 0, 2, 1),
        (2, 0, 2, 1),
        (2, 1, 2, 0),
    ];
    for p in [2.0, 3.0, 6.0] {
        let mut samples: Vec<(Real, Real, [Real; 3])> = Vec::new();
        for &(l1, v1, l2, v2) in &combos {
            let f = probes::separable_harmonic(&pm, l1, v1, l2, v2).unwrap();
            let fg1 = probes::conformal_direction(&pm, 0, &f);
            let fg2 = probes::conformal_direction(&pm, 1, &f);
            let h11 = product::second_variation(&pm, p, &fg1, &fg1).unwrap().total;
            let h12 = product::second_variation(&pm, p, &fg1, &fg2).unwrap().total;
            let h22 = product::second_variation(&pm, p, &fg2, &fg2).unwrap().total;
            let mu1 = curvlab::decompose::harmonic_eigenvalue(pm.f1.dim, c, l1);
            let mu2 = curvlab::decompose::harmonic_eigenvalue(pm.f2.dim, c, l2);
            let s = pm.r_norm2.powf(0.5 * (p - 2.0));
            let alpha = p / m - 1.0;
            let nf = pm.l2_norm2(&f);
            let scale = pm.volume.powf(alpha) * p * s * c * c * nf;
            samples.push((mu1 / c, mu2 / c, [h11 / scale, h12 / scale, h22 / scale]));
        }
        for (bi, bname) in ["H11", "H12", "H22"].iter().enumerate() {
            let nb = 6;
            let mut gram = vec![vec![0.0; nb]; nb];
            let mut rhs = vec![0.0; nb];
            let basis = |x1: Real, x2: Real| [x1 * x1, x2 * x2, x1 * x2, x1, x2, 1.0];
            for &(x1, x2, v) in &samples {
                let b = basis(x1, x2);
                for i in 0..nb {
                    for j in 0..nb {
                        gram[i][j] += b[i] * b[j];
                    }
                    rhs[i] += b[i] * v[bi];
                }
            }
            let coef = solve(&mut gram, &mut rhs);
            // residual of the overdetermined fit
            let mut worst: Real = 0.0;
            for &(x1, x2, v) in &samples {
                let b = basis(x1, x2);
                let pred: Real = (0..nb).map(|i| coef[i] * b[i]).sum();
                worst = worst.max((pred - v[bi]).abs());
            }
            println!(
                "p={p} {bname} = {:+.4} x1^2 {:+.4} x2^2 {:+.4} x1x2 {:+.4} x1 {:+.4} x2 {:+.4}   [worst {worst:.2e}]",
                coef[0], coef[1], coef[2], coef[3], coef[4], coef[5]
            );
        }
    }
}
