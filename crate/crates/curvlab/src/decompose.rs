//! Probe constructors and the splitting of symmetric 2-tensors into trace,
//! conformal-Killing, and transverse-traceless parts.
//!
//! The split is the York decomposition h = h_tt + L ω + (tr h / n) g with
//! L ω = δ*ω - (div ω / n) g the trace-free deformation of a vector
//! potential. ω solves the conformal Killing system δ(L ω) = δ(h - tr part),
//! which is semi-definite with the conformal Killing fields as kernel;
//! conjugate gradients started at zero stays orthogonal to the kernel, so
//! the system is solvable exactly for the divergence we need to remove.

use crate::field::TensorField;
use crate::manifold::{Chart, DiscreteManifold};
use crate::{ops, Error, Real, Result};
use rand::Rng;

/// Scalar spherical harmonic of degree l on the round sphere, built from
/// harmonic polynomials in the ambient coordinates. `variant` enumerates a
/// fixed list per degree; out-of-range variants are an error.
pub fn sphere_harmonic(m: &DiscreteManifold, l: usize, variant: usize) -> Result<Vec<Real>> {
    if !m.is_sphere() {
        return Err(Error::Config("scalar harmonics need the sphere chart".into()));
    }
    let a = &m.ambient;
    let d = a.len(); // dim + 1 ambient coordinates
    let n = m.n_nodes();
    let pick = |f: &dyn Fn(usize) -> Real| -> Vec<Real> { (0..n).map(f).collect() };
    let pairs: Vec<(usize, usize)> =
        (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let triples: Vec<(usize, usize, usize)> = (0..d)
        .flat_map(|i| {
            (i + 1..d).flat_map(move |j| (j + 1..d).map(move |k| (i, j, k)))
        })
        .collect();
    match l {
        0 => {
            if variant > 0 {
                return Err(Error::Config("degree 0 has one variant".into()));
            }
            Ok(vec![1.0; n])
        }
        1 => {
            if variant >= d {
                return Err(Error::Config(format!("degree 1 has {d} variants")));
            }
            Ok(a[variant].clone())
        }
        2 => {
            // x_i x_j for i < j, then x_i^2 - x_{i+1}^2.
            if variant < pairs.len() {
                let (i, j) = pairs[variant];
                Ok(pick(&|t| a[i][t] * a[j][t]))
            } else if variant < pairs.len() + d - 1 {
                let i = variant - pairs.len();
                Ok(pick(&|t| a[i][t] * a[i][t] - a[i + 1][t] * a[i + 1][t]))
            } else {
                Err(Error::Config("degree 2 variant out of range".into()))
            }
        }
        3 => {
            // x_i x_j x_k distinct, then x_0 (x_i^2 - x_j^2) for 0 < i < j.
            if variant < triples.len() {
                let (i, j, k) = triples[variant];
                Ok(pick(&|t| a[i][t] * a[j][t] * a[k][t]))
            } else {
                let v = variant - triples.len();
                let inner: Vec<(usize, usize)> =
                    (1..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
                if v < inner.len() {
                    let (i, j) = inner[v];
                    Ok(pick(&|t| a[0][t] * (a[i][t] * a[i][t] - a[j][t] * a[j][t])))
                } else {
                    Err(Error::Config("degree 3 variant out of range".into()))
                }
            }
        }
        4 => {
            // Distinct quadruples, then (x_0^2 - x_1^2)(x_2^2 - x_3^2) and
            // x_0 x_1 (x_2^2 - x_3^2).
            let quads: Vec<[usize; 4]> = (0..d)
                .flat_map(|i| {
                    (i + 1..d).flat_map(move |j| {
                        (j + 1..d).flat_map(move |k| (k + 1..d).map(move |l| [i, j, k, l]))
                    })
                })
                .collect();
            if variant < quads.len() {
                let q = quads[variant];
                Ok(pick(&|t| a[q[0]][t] * a[q[1]][t] * a[q[2]][t] * a[q[3]][t]))
            } else if variant == quads.len() {
                Ok(pick(&|t| {
                    (a[0][t] * a[0][t] - a[1][t] * a[1][t])
                        * (a[2][t] * a[2][t] - a[3][t] * a[3][t])
                }))
            } else if variant == quads.len() + 1 {
                Ok(pick(&|t| {
                    a[0][t] * a[1][t] * (a[2][t] * a[2][t] - a[3][t] * a[3][t])
                }))
            } else {
                Err(Error::Config("degree 4 variant out of range".into()))
            }
        }
        _ => Err(Error::Config(format!("harmonic degree {l} not implemented"))),
    }
}

/// Eigenvalue of the positive scalar Laplacian on degree-l harmonics at
/// curvature c: l (l + n - 1) c.
pub fn harmonic_eigenvalue(dim: usize, c: Real, l: usize) -> Real {
    (l * (l + dim - 1)) as Real * c
}

/// Gaussian bump exp(-|x - center|^2 / sigma^2) on the box chart.
pub fn box_bump(m: &DiscreteManifold, center: [Real; 3], sigma: Real) -> Result<Vec<Real>> {
    match m.chart {
        Chart::BallBox { .. } => Ok((0..m.n_nodes())
            .map(|t| {
                let mut q = 0.0;
                for a in 0..3 {
                    let d = m.coords[a][t] - center[a];
                    q += d * d;
                }
                (-q / (sigma * sigma)).exp()
            })
            .collect()),
        Chart::SphereAngles => Err(Error::Config("box bumps need the box chart".into())),
    }
}

/// Polarized plane wave on the box chart carried to the curved metric:
/// ψ^((2-n)/2) Re[e exp(i k·x)] with e a flat transverse-traceless
/// polarization. The conformal weight makes the field exactly
/// divergence-free and trace-free for g = ψ δ. Returns the field and its
/// closed-form coordinate derivative (the global field is not periodic, so
/// spectral differentiation does not apply to it).
pub fn conformal_tt_wave(
    m: &DiscreteManifold,
    kvec: [i32; 3],
    polarization: usize,
) -> Result<(TensorField, TensorField)> {
    let (l, _) = match m.chart {
        Chart::BallBox { half_width, support_radius } => (half_width, support_radius),
        Chart::SphereAngles => {
            return Err(Error::Config("flat TT waves need the box chart".into()))
        }
    };
    if kvec == [0, 0, 0] {
        return Err(Error::Config("wave vector must be nonzero".into()));
    }
    if polarization >= 2 {
        return Err(Error::Config("two polarizations per wave vector".into()));
    }
    let kv: [Real; 3] = {
        let base = std::f64::consts::PI / l; // box period 2l
        [kvec[0] as Real * base, kvec[1] as Real * base, kvec[2] as Real * base]
    };
    let norm = |v: [Real; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let cross = |a: [Real; 3], b: [Real; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let seed = if kvec[0] == 0 && kvec[1] == 0 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let mut u = cross(kv, seed);
    let nu = norm(u);
    for v in &mut u {
        *v /= nu;
    }
    let mut v = cross(kv, u);
    let nv = norm(v);
    for w in &mut v {
        *w /= nv;
    }
    // e_+ = u u - v v, e_x = u v + v u: trace-free and k-transverse.
    let mut e = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            e[i][j] = if polarization == 0 {
                u[i] * u[j] - v[i] * v[j]
            } else {
                u[i] * v[j] + v[i] * u[j]
            };
        }
    }

    let n = m.n_nodes();
    let ac = m.curvature.abs();
    // W = psi^(-1/2) = sqrt(|c|) (1 - |x|^2) / 2, dW_a = -sqrt(|c|) x_a.
    let mut h = TensorField::zeros(2, 3, n);
    let mut dh = TensorField::zeros(3, 3, n);
    for t in 0..n {
        let x = [m.coords[0][t], m.coords[1][t], m.coords[2][t]];
        let u2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let w = ac.sqrt() * (1.0 - u2) / 2.0;
        let phase = kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2];
        let (sp, cp) = phase.sin_cos();
        for i in 0..3 {
            for j in 0..3 {
                h.comp_mut(i * 3 + j)[t] = w * e[i][j] * cp;
                for a in 0..3 {
                    dh.comp_mut((a * 3 + i) * 3 + j)[t] =
                        -ac.sqrt() * x[a] * e[i][j] * cp - w * e[i][j] * kv[a] * sp;
                }
            }
        }
    }
    Ok((h, dh))
}

/// York split of a symmetric 2-tensor, with the conformal Killing potential
/// solved by conjugate gradients to `tol` (relative residual) or `max_iter`.
pub struct TtSplit {
    /// Transverse-traceless part.
    pub tt: TensorField,
    /// Trace-free deformation L ω of the potential.
    pub ck_lie: TensorField,
    /// (tr h / n) g.
    pub trace_part: TensorField,
    /// The vector potential ω.
    pub potential: TensorField,
    /// Final relative CG residual = |δ(tt)| / |δ(h - trace part)|.
    pub residual: Real,
    pub iterations: usize,
}

/// Symmetric product of two one-forms, (a . b)_ij = a_i b_j + a_j b_i.
/// Unlike Hessians, metric multiples, or Killing-type deformations, these
/// probes carry a transverse-traceless component in general.
pub fn sym_outer(a: &TensorField, b: &TensorField) -> TensorField {
    assert_eq!(a.valence, 1);
    assert_eq!(b.valence, 1);
    let d = a.dims;
    let n = a.n_nodes;
    let mut out = TensorField::zeros(2, d, n);
    for i in 0..d {
        for j in 0..d {
            let ai = a.comp(i);
            let bj = b.comp(j);
            let aj = a.comp(j);
            let bi = b.comp(i);
            let o = out.comp_mut(i * d + j);
            for t in 0..n {
                o[t] = ai[t] * bj[t] + aj[t] * bi[t];
            }
        }
    }
    out
}

/// L ω = δ*ω - (div ω / n) g.
pub fn ck_deformation(m: &DiscreteManifold, om: &TensorField) -> TensorField {
    let mut l = ops::div_star(m, om);
    let mut div = ops::trace_sym2(&m.g_inv, &l);
    let n = m.dim as Real;
    for v in &mut div {
        *v = -*v / n;
    }
    l.axpy(1.0, &ops::scalar_times_metric(m, &div));
    l
}

pub fn tt_split(m: &DiscreteManifold, h: &TensorField, tol: Real, max_iter: usize) -> TtSplit {
    let n = m.dim as Real;
    let mut tr = ops::trace_sym2(&m.g_inv, h);
    for v in &mut tr {
        *v /= n;
    }
    let trace_part = ops::scalar_times_metric(m, &tr);
    let mut h0 = h.clone();
    h0.axpy(-1.0, &trace_part);

    let b = ops::div_sym2(m, &h0);
    let b_norm = m.l2_norm2(&b).sqrt();
    let h_scale = m.l2_norm2(h).sqrt();
    let mut om = TensorField::zeros(1, m.dim, m.n_nodes());
    let mut iterations = 0;
    let mut residual = 0.0;
    // An input whose divergence is rounding dust has nothing to solve for.
    if b_norm > 1e-11 * h_scale {
        // On the box chart the second-order symbol scales with the inverse
        // conformal factor, uniformly over components, so scaling it back
        // out is an effective Jacobi step. The angle chart has no shared
        // pointwise scale (the coordinate frame degenerates toward the
        // poles component by component) and is left unpreconditioned.
        let jw: Vec<Real> = match m.chart {
            Chart::BallBox { .. } => (0..m.n_nodes())
                .map(|t| {
                    let mut s = 0.0;
                    for a in 0..m.dim {
                        s += m.g_inv.comp(a * m.dim + a)[t];
                    }
                    m.dim as Real / s
                })
                .collect(),
            Chart::SphereAngles => vec![1.0; m.n_nodes()],
        };
        let mut x = om.clone();
        let mut r = b.clone();
        let mut z = ops::scalar_mul(&r, &jw);
        let mut p = z.clone();
        let mut rz = m.l2_inner(&r, &z);
        // The operator is semi-definite (deformations of conformal Killing
        // fields vanish), and the collocation discretization is symmetric
        // only on well-resolved fields: once the search direction picks up
        // aliased near-kernel content, conjugacy corrupts and the
        // recurrence can stall or blow up. Keep the best iterate, restart
        // the recurrence from it on a stall or on runaway search
        // directions, and give up after restarts stop helping.
        let mut best = m.l2_norm2(&r);
        let mut since_best = 0;
        let mut restarts_left = 8;
        residual = best.sqrt() / b_norm;
        while residual > tol && iterations < max_iter {
            let ap = ops::div_sym2(m, &ck_deformation(m, &p));
            let alpha = rz / m.l2_inner(&p, &ap);
            x.axpy(alpha, &p);
            r.axpy(-alpha, &ap);
            z = ops::scalar_mul(&r, &jw);
            let rz2 = m.l2_inner(&r, &z);
            let beta = rz2 / rz;
            rz = rz2;
            p.scale(beta);
            p.axpy(1.0, &z);
            iterations += 1;
            let rn = m.l2_norm2(&r);
            if rn < best * (1.0 - 1e-3) {
                best = rn;
                om.clone_from(&x);
                since_best = 0;
                residual = rn.sqrt() / b_norm;
            } else {
                since_best += 1;
            }
            let runaway = m.l2_norm2(&p) > 1e8 * m.l2_norm2(&z).max(1e-300);
            if since_best > 150 || runaway {
                if restarts_left == 0 {
                    break;
                }
                restarts_left -= 1;
                since_best = 0;
                x.clone_from(&om);
                r = b.clone();
                r.axpy(-1.0, &ops::div_sym2(m, &ck_deformation(m, &x)));
                z = ops::scalar_mul(&r, &jw);
                p = z.clone();
                rz = m.l2_inner(&r, &z);
            }
        }
    }
    let ck_lie = ck_deformation(m, &om);
    let mut tt = h0;
    tt.axpy(-1.0, &ck_lie);
    if b_norm > 0.0 {
        // Report the residual of the tensor actually returned, not the
        // recurrence value.
        residual = m.l2_norm2(&ops::div_sym2(m, &tt)).sqrt() / b_norm;
    }
    TtSplit { tt, ck_lie, trace_part, potential: om, residual, iterations }
}

/// The transverse-traceless part with default solver settings.
pub fn tt_project(m: &DiscreteManifold, h: &TensorField) -> TensorField {
    tt_split(m, h, 1e-10, 2000).tt
}

fn rng_coeffs<const K: usize>(rng: &mut impl Rng) -> [Real; K] {
    let mut out = [0.0; K];
    for v in &mut out {
        *v = rng.gen_range(-1.0..1.0);
    }
    out
}

fn seeded_scalar(m: &DiscreteManifold, rng: &mut impl Rng) -> Vec<Real> {
    match m.chart {
        Chart::SphereAngles => {
            // A single degree-2 harmonic. Products of two of these are the
            // lowest scalar-built fields with a transverse-traceless part
            // (gradients of lower degrees pair into pure trace and
            // deformation directions), and their bandwidth stays resolved
            // at the resolutions the probes run at.
            let variants = (0..)
                .take_while(|&v| sphere_harmonic(m, 2, v).is_ok())
                .count();
            let v = rng.gen_range(0..variants);
            sphere_harmonic(m, 2, v).unwrap()
        }
        Chart::BallBox { .. } => {
            // Family probes enter pairwise products, which narrows the
            // effective width by sqrt(2) and doubles the exponential decay
            // rate, so a wider bump keeps the product both resolved and
            // negligible at the chart faces.
            let c: [Real; 3] = [
                rng.gen_range(-0.03..0.03),
                rng.gen_range(-0.03..0.03),
                rng.gen_range(-0.03..0.03),
            ];
            box_bump(m, c, 0.16).unwrap()
        }
    }
}

/// Deterministic family of `count` L2-orthonormal transverse-traceless
/// fields, seeded probes projected by [`tt_split`] and Gram-Schmidt
/// orthonormalized.
pub fn tt_family(m: &DiscreteManifold, seed: u64, count: usize) -> Vec<TensorField> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<TensorField> = Vec::with_capacity(count);
    while out.len() < count {
        let w = rng_coeffs::<2>(&mut rng);
        let f1 = seeded_scalar(m, &mut rng);
        let f2 = seeded_scalar(m, &mut rng);
        let f3 = seeded_scalar(m, &mut rng);
        let f4 = seeded_scalar(m, &mut rng);
        let mut h = sym_outer(&m.diff_scalar(&f1), &m.diff_scalar(&f2));
        h.scale(w[0]);
        h.axpy(w[1], &sym_outer(&m.diff_scalar(&f3), &m.diff_scalar(&f4)));
        let mut tt = tt_project(m, &h);
        for prev in &out {
            let c = m.l2_inner(&tt, prev);
            tt.axpy(-c, prev);
        }
        let norm2 = m.l2_norm2(&tt);
        // A seed can project to nearly nothing; skip it rather than divide
        // by dust.
        if norm2.sqrt() > 1e-3 * m.l2_norm2(&h).sqrt() {
            tt.scale(1.0 / norm2.sqrt());
            out.push(tt);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_ball, build_sphere};
    use crate::ops::{div_sym2, laplace_scalar, scalar_mul, trace_sym2};

    #[test]
    fn harmonics_have_round_laplacian_eigenvalues() {
        for (dim, c, res) in [(3usize, 1.0, 10usize), (4, 1.3, 8)] {
            let m = build_sphere(dim, c, res).unwrap();
            for l in 0..=4usize {
                let mut variant = 0;
                while let Ok(y) = sphere_harmonic(&m, l, variant) {
                    let lam = harmonic_eigenvalue(dim, c, l);
                    let ly = laplace_scalar(&m, &y);
                    let scale = y.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
                    let err = ly
                        .iter()
                        .zip(&y)
                        .map(|(&a, &b)| (a - lam * b).abs())
                        .fold(0.0_f64, |a, b| a.max(b));
                    assert!(err < 1e-8 * scale.max(1.0) * lam.abs().max(1.0),
                        "dim {dim} l {l} variant {variant}: {err}");
                    variant += 1;
                }
                assert!(variant > 0, "degree {l} has no variants");
            }
        }
    }

    #[test]
    fn conformal_weight_makes_waves_transverse() {
        let m = build_ball(-1.0, 12, 0.56, 0.45).unwrap();
        for (k, pol) in [([1, 0, 0], 0), ([2, 1, 0], 1), ([1, 1, 1], 0)] {
            let (h, dh) = conformal_tt_wave(&m, k, pol).unwrap();
            // Trace vanishes pointwise for any weight.
            let tr = trace_sym2(&m.g_inv, &h);
            let scale = h.max_abs();
            for &v in &tr {
                assert!(v.abs() < 1e-12 * scale);
            }
            // Divergence through the closed-form derivative: the spectral
            // route does not apply to this non-periodic global field.
            let dim = 3;
            let n = m.n_nodes();
            let mut worst = 0.0_f64;
            for j in 0..dim {
                for t in 0..n {
                    let mut div = 0.0;
                    for a in 0..dim {
                        for b in 0..dim {
                            let gab = m.g_inv.comp(a * dim + b)[t];
                            let mut cov = dh.comp((a * dim + b) * dim + j)[t];
                            for s in 0..dim {
                                cov -= m.gamma.comp((s * dim + a) * dim + b)[t]
                                    * h.comp(s * dim + j)[t]
                                    + m.gamma.comp((s * dim + a) * dim + j)[t]
                                        * h.comp(b * dim + s)[t];
                            }
                            div -= gab * cov;
                        }
                    }
                    worst = worst.max(div.abs());
                }
            }
            assert!(worst < 1e-10 * scale, "k {k:?} pol {pol}: {worst}");
        }
    }

    #[test]
    fn york_split_on_sphere() {
        // The one-form product of two degree-2 harmonics carries a genuine
        // transverse part; the Hessian, metric, and deformation summands
        // project away entirely.
        let m = build_sphere(3, 1.0, 10).unwrap();
        let f1 = sphere_harmonic(&m, 2, 0).unwrap();
        let f2 = sphere_harmonic(&m, 1, 2).unwrap();
        let f3 = sphere_harmonic(&m, 2, 5).unwrap();
        let df1 = m.diff_scalar(&f1);
        let mut h = sym_outer(&df1, &m.diff_scalar(&f3));
        h.axpy(0.5, &ops::cov_deriv(&m, &df1));
        h.axpy(0.7, &ops::scalar_times_metric(&m, &f3));
        h.axpy(0.4, &ops::div_star(&m, &scalar_mul(&m.diff_scalar(&f2), &f3)));
        let split = tt_split(&m, &h, 1e-9, 4000);
        assert!(split.residual < crate::TOL_IDENTITY, "residual {}", split.residual);
        let kept = m.l2_norm2(&split.tt) / m.l2_norm2(&h);
        assert!(kept > 0.05, "kept fraction {kept}");

        // Pieces recombine to h.
        let mut sum = split.tt.clone();
        sum.axpy(1.0, &split.ck_lie);
        sum.axpy(1.0, &split.trace_part);
        assert!(ops::max_abs_diff(&sum, &h) < 1e-11 * h.max_abs());

        // tt is trace-free and divergence-free, and L2-orthogonal to both
        // other pieces.
        let tr = trace_sym2(&m.g_inv, &split.tt);
        let scale = split.tt.max_abs();
        for &v in &tr {
            assert!(v.abs() < 1e-10 * scale);
        }
        let div_in = m.l2_norm2(&div_sym2(&m, &h)).sqrt();
        let div_tt = m.l2_norm2(&div_sym2(&m, &split.tt)).sqrt();
        assert!(div_tt < 1e-6 * div_in, "div {div_tt} vs input {div_in}");
        let n_tt = m.l2_norm2(&split.tt).sqrt();
        let n_ck = m.l2_norm2(&split.ck_lie).sqrt();
        let n_trp = m.l2_norm2(&split.trace_part).sqrt();
        assert!(m.l2_inner(&split.tt, &split.ck_lie).abs() < 1e-6 * n_tt * n_ck);
        assert!(m.l2_inner(&split.tt, &split.trace_part).abs() < 1e-6 * n_tt * n_trp);

        // A coarser grid leaves less aliased content for the solver to
        // fight and the same split goes much deeper.
        let mc = build_sphere(3, 1.0, 8).unwrap();
        let g1 = sphere_harmonic(&mc, 2, 0).unwrap();
        let g3 = sphere_harmonic(&mc, 2, 5).unwrap();
        let mut hc = sym_outer(&mc.diff_scalar(&g1), &mc.diff_scalar(&g3));
        hc.axpy(0.5, &ops::cov_deriv(&mc, &mc.diff_scalar(&g1)));
        let splitc = tt_split(&mc, &hc, 1e-10, 4000);
        assert!(splitc.residual < 1e-8, "coarse residual {}", splitc.residual);
    }

    #[test]
    fn york_split_on_box_chart() {
        let m = build_ball(-1.0, 24, 0.56, 0.45).unwrap();
        let (wave, _) = conformal_tt_wave(&m, [2, 1, 0], 0).unwrap();
        let env = box_bump(&m, [0.0, 0.01, -0.02], 0.13).unwrap();
        let h = scalar_mul(&wave, &env);
        let split = tt_split(&m, &h, 1e-9, 4000);
        assert!(split.residual < 1e-9, "residual {}", split.residual);
        let div_in = m.l2_norm2(&div_sym2(&m, &h)).sqrt();
        let div_tt = m.l2_norm2(&div_sym2(&m, &split.tt)).sqrt();
        assert!(div_tt < 1e-8 * div_in.max(1.0));
        // The conformal weight makes the wave TT before enveloping, so only
        // the envelope gradient has to be repaired and most of the size
        // survives the projection.
        let kept = m.l2_norm2(&split.tt) / m.l2_norm2(&h);
        assert!(kept > 0.5, "kept fraction {kept}");
    }

    #[test]
    fn tt_family_is_orthonormal() {
        let m = build_sphere(3, 1.0, 8).unwrap();
        let fam = tt_family(&m, 7, 5);
        for (i, a) in fam.iter().enumerate() {
            for (j, b) in fam.iter().enumerate() {
                let g = m.l2_inner(a, b);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-9, "gram[{i}][{j}] = {g}");
            }
            let div = m.l2_norm2(&div_sym2(&m, a)).sqrt();
            assert!(div < 1e-7, "family member {i} divergence {div}");
        }
    }
}
