//! Discrete models of the constant-curvature geometries.
//!
//! Spheres use polar-angle charts with offset nodes, so no grid point sits on
//! a coordinate singularity and every smooth tensor component extends to the
//! doubled periodic grid through the reflection rules below. Hyperbolic space
//! uses the Poincaré ball in a periodic box chart: the base metric enters
//! through closed-form derivatives, while perturbations are compactly
//! supported inside the box and can be differentiated spectrally.
//!
//! The reflection data per polar axis consists of the partner map (where the
//! remaining coordinates land when the angle runs past its endpoint) and the
//! per-coordinate parity J (how coordinate vector components transform). For
//! a tensor component the extension sign is the product of J entries over its
//! index slots.

use crate::field::{unpack, TensorField};
use crate::grid::{pairwise_map_sum, Axis, GridShape};
use crate::{ops, Error, Real, Result};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifoldSpec {
    /// Round sphere S^dim of constant sectional curvature `curvature` > 0.
    Sphere { dim: usize, curvature: Real },
    /// Real hyperbolic 3-space of curvature `curvature` < 0 on a ball chart.
    Hyperbolic { curvature: Real },
    /// Berger sphere with fiber scale t. Not a grid geometry: handled by the
    /// algebraic scan in [`crate::stability`].
    Berger { t: Real },
}

#[derive(Debug, Clone, Copy)]
pub enum Chart {
    SphereAngles,
    BallBox { half_width: Real, support_radius: Real },
}

#[derive(Debug, Clone, Copy)]
enum Refl {
    Keep,
    Reverse,
    HalfShift,
}

#[derive(Debug, Clone)]
pub struct DiscreteManifold {
    pub name: String,
    pub dim: usize,
    pub curvature: Real,
    pub chart: Chart,
    pub shape: GridShape,
    pub axes: Vec<Axis>,
    /// Per axis: parity J of coordinate components under that axis's
    /// reflection (all +1 for periodic axes).
    pub parity: Vec<Vec<Real>>,
    /// Per axis: partner node table (None for periodic axes).
    pub partner: Vec<Option<Vec<u32>>>,
    line_offs: Vec<Vec<u32>>,
    /// Node coordinate values, one vector per axis.
    pub coords: Vec<Vec<Real>>,
    /// Ambient coordinate scalars of the unit sphere (empty for the ball).
    pub ambient: Vec<Vec<Real>>,
    /// Conformal factor of the ball chart metric (None for spheres).
    pub conformal_factor: Option<Vec<Real>>,

    pub g: TensorField,
    pub g_inv: TensorField,
    pub sqrt_det: Vec<Real>,
    /// dg[a,i,j] = d_a g_ij, closed form.
    pub dg: TensorField,
    /// ddg[a,b,i,j] = d_a d_b g_ij, closed form.
    pub ddg: TensorField,
    /// gamma[k,i,j] = Gamma^k_ij.
    pub gamma: TensorField,
    pub riemann: TensorField,
    pub ricci: TensorField,
    pub rcheck: TensorField,
    pub r_norm2: Vec<Real>,
    pub scal: Real,

    /// Coordinate quadrature weights including the sin^m moment measure.
    pub coord_weights: Vec<Real>,
    /// Product of sin^m factors (1 in the box chart); sqrt_det = measure *
    /// dens_ratio with dens_ratio smooth across the polar axes.
    pub measure: Vec<Real>,
    pub dens_ratio: Vec<Real>,
    pub volume: Real,
}

pub fn build_manifold(spec: ManifoldSpec, res: usize) -> Result<DiscreteManifold> {
    match spec {
        ManifoldSpec::Sphere { dim, curvature } => build_sphere(dim, curvature, res),
        ManifoldSpec::Hyperbolic { curvature } => build_ball(curvature, res, 0.56, 0.45),
        ManifoldSpec::Berger { .. } => Err(Error::BergerNeedsScan),
    }
}

/// Closed volume of the round n-sphere of curvature c.
pub fn sphere_volume(dim: usize, c: Real) -> Real {
    let r = 1.0 / c.sqrt();
    match dim {
        3 => 2.0 * std::f64::consts::PI.powi(2) * r.powi(3),
        4 => 8.0 / 3.0 * std::f64::consts::PI.powi(2) * r.powi(4),
        _ => panic!("unsupported sphere dimension {dim}"),
    }
}

/// Curvature of the unit-volume round metric in the conformal class of the
/// curvature-c round sphere: scaling g by V^(-2/n) multiplies c by V^(2/n).
pub fn unit_volume_curvature(dim: usize, c: Real) -> Real {
    c * sphere_volume(dim, c).powf(2.0 / dim as Real)
}

pub fn build_sphere(dim: usize, curvature: Real, res: usize) -> Result<DiscreteManifold> {
    if !(dim == 3 || dim == 4) {
        return Err(Error::Config(format!("sphere dimension {dim} not supported")));
    }
    if curvature <= 0.0 {
        return Err(Error::Config("sphere curvature must be positive".into()));
    }
    let n = res;
    let mut axes: Vec<Axis> = (0..dim - 1)
        .map(|a| Axis::offset_angle(n, (dim - 1 - a) as u32))
        .collect();
    axes.push(Axis::periodic(n, 0.0, 2.0 * std::f64::consts::PI));
    let dims: Vec<usize> = axes.iter().map(|a| a.n).collect();
    let shape = GridShape::new(&dims);

    // Reflection rule past the far pole of angle axis a: every later polar
    // angle reverses and the azimuth shifts by pi; coordinate components of
    // axes a..dim-2 flip sign, the azimuth direction is preserved.
    let mut parity = Vec::with_capacity(dim);
    let mut partner: Vec<Option<Vec<u32>>> = Vec::with_capacity(dim);
    for a in 0..dim - 1 {
        let mut j = vec![1.0; dim];
        for (d, slot) in j.iter_mut().enumerate().take(dim - 1) {
            if d >= a {
                *slot = -1.0;
            }
        }
        parity.push(j);
        let map: Vec<Refl> = (0..dim)
            .map(|d| {
                if d == a {
                    Refl::Keep
                } else if d == dim - 1 {
                    Refl::HalfShift
                } else if d > a {
                    Refl::Reverse
                } else {
                    Refl::Keep
                }
            })
            .collect();
        partner.push(Some(partner_table(&shape, &map)));
    }
    parity.push(vec![1.0; dim]);
    partner.push(None);

    let coords = broadcast_coords(&shape, &axes);
    let n_nodes = shape.n_nodes;
    let r2 = 1.0 / curvature;

    // Diagonal metric g_dd = r^2 * prod_{a<d} sin^2(x_a) and its closed-form
    // coordinate derivatives.
    let sin: Vec<Vec<Real>> =
        (0..dim - 1).map(|a| coords[a].iter().map(|&x| x.sin()).collect()).collect();
    let prod_sin2 = |skip: &[usize], upto: usize, i: usize| -> Real {
        let mut p = 1.0;
        for (a, sa) in sin.iter().enumerate().take(upto) {
            if !skip.contains(&a) {
                p *= sa[i] * sa[i];
            }
        }
        p
    };

    let mut g = TensorField::zeros(2, dim, n_nodes);
    let mut dg = TensorField::zeros(3, dim, n_nodes);
    let mut ddg = TensorField::zeros(4, dim, n_nodes);
    for d in 0..dim {
        let gd: Vec<Real> = (0..n_nodes).map(|i| r2 * prod_sin2(&[], d, i)).collect();
        g.comp_mut(g_cidx(dim, &[d, d])).copy_from_slice(&gd);
        for b in 0..d {
            let dgd: Vec<Real> = (0..n_nodes)
                .map(|i| r2 * (2.0 * coords[b][i]).sin() * prod_sin2(&[b], d, i))
                .collect();
            dg.comp_mut(g_cidx(dim, &[b, d, d])).copy_from_slice(&dgd);
            for c in 0..d {
                let val: Vec<Real> = if b == c {
                    (0..n_nodes)
                        .map(|i| r2 * 2.0 * (2.0 * coords[b][i]).cos() * prod_sin2(&[b], d, i))
                        .collect()
                } else {
                    (0..n_nodes)
                        .map(|i| {
                            r2 * (2.0 * coords[b][i]).sin()
                                * (2.0 * coords[c][i]).sin()
                                * prod_sin2(&[b, c], d, i)
                        })
                        .collect()
                };
                ddg.comp_mut(g_cidx(dim, &[c, b, d, d])).copy_from_slice(&val);
            }
        }
    }

    // Ambient coordinates of the unit sphere, for probe scalars and harmonics.
    let mut ambient: Vec<Vec<Real>> = Vec::with_capacity(dim + 1);
    for k in 0..=dim {
        let vals: Vec<Real> = (0..n_nodes)
            .map(|i| {
                let mut v = 1.0;
                for sa in sin.iter().take(k.min(dim - 1)) {
                    v *= sa[i];
                }
                if k < dim {
                    v * coords[k][i].cos()
                } else {
                    v * coords[dim - 1][i].sin()
                }
            })
            .collect();
        ambient.push(vals);
    }

    let measure: Vec<Real> = (0..n_nodes)
        .map(|i| {
            let mut m = 1.0;
            for (a, sa) in sin.iter().enumerate() {
                m *= sa[i].powi((dim - 1 - a) as i32);
            }
            m
        })
        .collect();

    finish_build(DiscreteBase {
        name: format!("sphere{dim}"),
        dim,
        curvature,
        chart: Chart::SphereAngles,
        shape,
        axes,
        parity,
        partner,
        coords,
        ambient,
        conformal_factor: None,
        g,
        dg,
        ddg,
        measure,
    })
}

pub fn build_ball(curvature: Real, res: usize, half_width: Real, support_radius: Real) -> Result<DiscreteManifold> {
    if curvature >= 0.0 {
        return Err(Error::Config("ball chart curvature must be negative".into()));
    }
    let dim = 3usize;
    let l = half_width;
    // Corner of the box must stay inside the unit ball.
    if l * l * dim as Real >= 1.0 {
        return Err(Error::Config("box corners leave the Poincaré ball".into()));
    }
    let axes: Vec<Axis> = (0..dim).map(|_| Axis::periodic(res, -l, 2.0 * l)).collect();
    let dims: Vec<usize> = axes.iter().map(|a| a.n).collect();
    let shape = GridShape::new(&dims);
    let coords = broadcast_coords(&shape, &axes);
    let n_nodes = shape.n_nodes;

    // g = psi * delta with psi = 4 / (|c| (1 - |x|^2)^2); all derivatives in
    // closed form through w_a = d_a log(psi) / 2.
    let ac = curvature.abs();
    let mut psi = vec![0.0; n_nodes];
    let mut w = vec![[0.0; 3]; n_nodes];
    let mut dw = vec![[[0.0; 3]; 3]; n_nodes];
    for i in 0..n_nodes {
        let x = [coords[0][i], coords[1][i], coords[2][i]];
        let u = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let om = 1.0 - u;
        psi[i] = 4.0 / (ac * om * om);
        for a in 0..3 {
            w[i][a] = 2.0 * x[a] / om;
        }
        for a in 0..3 {
            for b in 0..3 {
                dw[i][a][b] =
                    if a == b { 2.0 / om } else { 0.0 } + 4.0 * x[a] * x[b] / (om * om);
            }
        }
    }

    let mut g = TensorField::zeros(2, dim, n_nodes);
    let mut dg = TensorField::zeros(3, dim, n_nodes);
    let mut ddg = TensorField::zeros(4, dim, n_nodes);
    for d in 0..dim {
        let gc = g.comp_mut(g_cidx(dim, &[d, d]));
        gc.copy_from_slice(&psi);
        for a in 0..dim {
            let dgc = dg.comp_mut(g_cidx(dim, &[a, d, d]));
            for i in 0..n_nodes {
                dgc[i] = 2.0 * psi[i] * w[i][a];
            }
            for b in 0..dim {
                let ddgc = ddg.comp_mut(g_cidx(dim, &[b, a, d, d]));
                for i in 0..n_nodes {
                    ddgc[i] = 4.0 * psi[i] * w[i][a] * w[i][b] + 2.0 * psi[i] * dw[i][a][b];
                }
            }
        }
    }

    finish_build(DiscreteBase {
        name: "hyperbolic3".into(),
        dim,
        curvature,
        chart: Chart::BallBox { half_width: l, support_radius },
        shape,
        axes,
        parity: vec![vec![1.0; dim]; dim],
        partner: vec![None; dim],
        coords,
        ambient: Vec::new(),
        conformal_factor: Some(psi),
        g,
        dg,
        ddg,
        measure: vec![1.0; n_nodes],
    })
}

struct DiscreteBase {
    name: String,
    dim: usize,
    curvature: Real,
    chart: Chart,
    shape: GridShape,
    axes: Vec<Axis>,
    parity: Vec<Vec<Real>>,
    partner: Vec<Option<Vec<u32>>>,
    coords: Vec<Vec<Real>>,
    ambient: Vec<Vec<Real>>,
    conformal_factor: Option<Vec<Real>>,
    g: TensorField,
    dg: TensorField,
    ddg: TensorField,
    measure: Vec<Real>,
}

fn finish_build(base: DiscreteBase) -> Result<DiscreteManifold> {
    let DiscreteBase {
        name,
        dim,
        curvature,
        chart,
        shape,
        axes,
        parity,
        partner,
        coords,
        ambient,
        conformal_factor,
        g,
        dg,
        ddg,
        measure,
    } = base;
    let n_nodes = shape.n_nodes;
    let (g_inv, det) = ops::sym_inverse_det(&g);
    let sqrt_det: Vec<Real> = det.iter().map(|&d| d.sqrt()).collect();
    let gamma = ops::christoffel(&g_inv, &dg);
    let riemann = ops::riemann_from(&g, &gamma, &ddg);
    let ricci = ops::ricci_from(&g_inv, &riemann);
    let scal_field = ops::trace_sym2(&g_inv, &ricci);
    let scal = scal_field[0];
    let rcheck = ops::rcheck_from(&g_inv, &riemann);
    let r_norm2 = ops::norm2_pointwise(&g_inv, &riemann);

    let coord_weights = {
        let mut w = vec![0.0; n_nodes];
        let mut idx = vec![0usize; dim];
        for (i, slot) in w.iter_mut().enumerate() {
            shape.unflat(i, &mut idx);
            let mut acc = 1.0;
            for (a, ax) in axes.iter().enumerate() {
                acc *= ax.weights[idx[a]];
            }
            *slot = acc;
        }
        w
    };
    let dens_ratio: Vec<Real> =
        sqrt_det.iter().zip(&measure).map(|(&s, &m)| s / m).collect();
    let volume = pairwise_map_sum(0, n_nodes, |i| coord_weights[i] * dens_ratio[i]);

    let line_offs = (0..dim)
        .map(|a| shape.line_offsets(a).into_iter().map(|o| o as u32).collect())
        .collect();

    Ok(DiscreteManifold {
        name,
        dim,
        curvature,
        chart,
        shape,
        axes,
        parity,
        partner,
        line_offs,
        coords,
        ambient,
        conformal_factor,
        g,
        g_inv,
        sqrt_det,
        dg,
        ddg,
        gamma,
        riemann,
        ricci,
        rcheck,
        r_norm2,
        scal,
        coord_weights,
        measure,
        dens_ratio,
        volume,
    })
}

fn g_cidx(dim: usize, idx: &[usize]) -> usize {
    let mut c = 0;
    for &i in idx {
        c = c * dim + i;
    }
    c
}

fn broadcast_coords(shape: &GridShape, axes: &[Axis]) -> Vec<Vec<Real>> {
    let mut out = Vec::with_capacity(axes.len());
    let mut idx = vec![0usize; axes.len()];
    for (a, ax) in axes.iter().enumerate() {
        let mut v = vec![0.0; shape.n_nodes];
        for (i, slot) in v.iter_mut().enumerate() {
            shape.unflat(i, &mut idx);
            *slot = ax.nodes[idx[a]];
        }
        out.push(v);
    }
    out
}

fn partner_table(shape: &GridShape, map: &[Refl]) -> Vec<u32> {
    let mut tab = vec![0u32; shape.n_nodes];
    let mut idx = vec![0usize; map.len()];
    let mut jdx = vec![0usize; map.len()];
    for (flat, slot) in tab.iter_mut().enumerate() {
        shape.unflat(flat, &mut idx);
        for (d, r) in map.iter().enumerate() {
            jdx[d] = match r {
                Refl::Keep => idx[d],
                Refl::Reverse => shape.dims[d] - 1 - idx[d],
                Refl::HalfShift => (idx[d] + shape.dims[d] / 2) % shape.dims[d],
            };
        }
        *slot = shape.flat(&jdx) as u32;
    }
    tab
}

impl DiscreteManifold {
    pub fn n_nodes(&self) -> usize {
        self.shape.n_nodes
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.chart, Chart::SphereAngles)
    }

    /// Integral of a scalar node array against dv_g.
    pub fn integrate_dv(&self, f: &[Real]) -> Real {
        debug_assert_eq!(f.len(), self.n_nodes());
        pairwise_map_sum(0, self.n_nodes(), |i| {
            f[i] * self.coord_weights[i] * self.dens_ratio[i]
        })
    }

    /// Plain coordinate quadrature (measure weights included, no metric
    /// density). Callers supply their own density factor, e.g. for perturbed
    /// metrics.
    pub fn quad(&self, f: impl Fn(usize) -> Real + Copy) -> Real {
        pairwise_map_sum(0, self.n_nodes(), |i| f(i) * self.coord_weights[i])
    }

    pub fn l2_inner(&self, t: &TensorField, s: &TensorField) -> Real {
        let p = ops::pointwise_inner(&self.g_inv, t, s);
        self.integrate_dv(&p)
    }

    pub fn l2_norm2(&self, t: &TensorField) -> Real {
        self.l2_inner(t, t)
    }

    /// Coordinate partial derivatives of every component, with the doubled
    /// grid extension handled through partner lines and parity signs.
    pub fn partial_derivs(&self, t: &TensorField) -> TensorField {
        let n_nodes = self.n_nodes();
        let v = t.valence;
        let comps = t.comps();
        let mut out = TensorField::zeros(v + 1, self.dim, n_nodes);
        out.data.par_chunks_mut(n_nodes).enumerate().for_each(|(ac, dst)| {
            let a = ac / comps;
            let c = ac % comps;
            self.diff_axis_component(a, self.parity_sign(a, v, c), t.comp(c), dst);
        });
        out
    }

    pub fn diff_scalar(&self, vals: &[Real]) -> TensorField {
        let t = TensorField { valence: 0, dims: self.dim, n_nodes: vals.len(), data: vals.to_vec() };
        self.partial_derivs(&t)
    }

    fn parity_sign(&self, a: usize, valence: usize, c: usize) -> Real {
        if self.axes[a].diff_b.is_none() {
            return 1.0;
        }
        let mut idx = [0usize; 8];
        unpack(c, valence, self.dim, &mut idx[..valence]);
        let mut s = 1.0;
        for &i in &idx[..valence] {
            s *= self.parity[a][i];
        }
        s
    }

    fn diff_axis_component(&self, a: usize, sign: Real, src: &[Real], dst: &mut [Real]) {
        let ax = &self.axes[a];
        let n = ax.n;
        let stride = self.shape.strides[a];
        let mut line = vec![0.0; n];
        let mut part = vec![0.0; n];
        let mut dl = vec![0.0; n];
        match &self.partner[a] {
            Some(tab) => {
                for &o in &self.line_offs[a] {
                    let o = o as usize;
                    for i in 0..n {
                        line[i] = src[o + i * stride];
                    }
                    for (q, p) in part.iter_mut().enumerate() {
                        *p = src[tab[o + q * stride] as usize];
                    }
                    ax.diff_line(&line, &part, sign, &mut dl);
                    for i in 0..n {
                        dst[o + i * stride] = dl[i];
                    }
                }
            }
            None => {
                for &o in &self.line_offs[a] {
                    let o = o as usize;
                    for i in 0..n {
                        line[i] = src[o + i * stride];
                    }
                    ax.diff_line(&line, &line, 1.0, &mut dl);
                    for i in 0..n {
                        dst[o + i * stride] = dl[i];
                    }
                }
            }
        }
    }

    /// The geometry of g + t h on the same chart. Every derived field
    /// (inverse, density, Christoffel symbols, curvature stack, volume) is
    /// recomputed from scratch; the metric family is linear in t, so the
    /// coordinate-derivative stack is dg + t dh with dh, ddh supplied by the
    /// caller (computed once per family, reused across stencil points).
    ///
    /// The result is a raw geometry carrier, not a model space: `curvature`
    /// is NaN so that anything consuming the model constant downstream fails
    /// loudly, and `scal` is the node-0 value of a generally non-constant
    /// function. `ambient` and `conformal_factor` stay chart data of the
    /// base.
    pub fn perturbed_with(
        &self,
        h: &TensorField,
        dh: &TensorField,
        ddh: &TensorField,
        t: Real,
    ) -> DiscreteManifold {
        let mut g = self.g.clone();
        g.axpy(t, h);
        let mut dg = self.dg.clone();
        dg.axpy(t, dh);
        let mut ddg = self.ddg.clone();
        ddg.axpy(t, ddh);
        finish_build(DiscreteBase {
            name: format!("{}#perturbed", self.name),
            dim: self.dim,
            curvature: Real::NAN,
            chart: self.chart,
            shape: self.shape.clone(),
            axes: self.axes.clone(),
            parity: self.parity.clone(),
            partner: self.partner.clone(),
            coords: self.coords.clone(),
            ambient: self.ambient.clone(),
            conformal_factor: self.conformal_factor.clone(),
            g,
            dg,
            ddg,
            measure: self.measure.clone(),
        })
        .expect("perturbed rebuild cannot fail on a valid base")
    }

    /// One-off variant of [`perturbed_with`](Self::perturbed_with) that
    /// differentiates h itself.
    pub fn perturbed(&self, h: &TensorField, t: Real) -> DiscreteManifold {
        let dh = self.partial_derivs(h);
        let ddh = self.partial_derivs(&dh);
        self.perturbed_with(h, &dh, &ddh, t)
    }

    /// The unit-volume member of the model family: same chart and resolution,
    /// curvature scaled so the total volume is 1. Sphere charts only.
    pub fn unit_volume(&self) -> Result<DiscreteManifold> {
        match self.chart {
            Chart::SphereAngles => {
                build_sphere(self.dim, unit_volume_curvature(self.dim, self.curvature), self.axes[0].n)
            }
            Chart::BallBox { .. } => Err(Error::Config(
                "unit-volume normalization is not defined on the ball chart".into(),
            )),
        }
    }

    /// Independent consistency checks of the stored geometry: metric
    /// derivatives, Christoffel symbols through a second route, the constant
    /// curvature identity, and the volume. Returns (name, relative residual).
    pub fn self_check(&self) -> Vec<(String, Real)> {
        let mut out = Vec::new();
        match self.chart {
            Chart::SphereAngles => {
                // Spectral differentiation of the metric against the stored
                // closed-form derivatives.
                let dg_s = self.partial_derivs(&self.g);
                let mut err: Real = 0.0;
                for (a, b) in dg_s.data.iter().zip(&self.dg.data) {
                    err = err.max((a - b).abs());
                }
                out.push(("metric-derivative-two-path".into(), err / self.g.max_abs()));

                // Closed-form Christoffel symbols of the polar chart.
                let mut gerr: Real = 0.0;
                let n = self.n_nodes();
                let dim = self.dim;
                let mut closed = TensorField::zeros(3, dim, n);
                for b in 0..dim {
                    for d in 0..dim {
                        if b == d {
                            continue;
                        }
                        if b < d {
                            // Gamma^d_bd = cot(x_b), Gamma^b_dd = -sin x_b cos x_b * prod_{b<a<d} sin^2 x_a
                            let c1 = closed.comp_mut(g_cidx(dim, &[d, b, d]));
                            for i in 0..n {
                                c1[i] = 1.0 / self.coords[b][i].tan();
                            }
                            let c2 = closed.comp_mut(g_cidx(dim, &[d, d, b]));
                            for i in 0..n {
                                c2[i] = 1.0 / self.coords[b][i].tan();
                            }
                            let c3 = closed.comp_mut(g_cidx(dim, &[b, d, d]));
                            for i in 0..n {
                                let mut p = 1.0;
                                for a in b + 1..d {
                                    let s = self.coords[a][i].sin();
                                    p *= s * s;
                                }
                                c3[i] = -self.coords[b][i].sin() * self.coords[b][i].cos() * p;
                            }
                        }
                    }
                }
                for (x, y) in closed.data.iter().zip(&self.gamma.data) {
                    gerr = gerr.max((x - y).abs());
                }
                out.push(("christoffel-two-path".into(), gerr / closed.max_abs().max(1.0)));
            }
            Chart::BallBox { .. } => {
                // Conformal-form Christoffel symbols vs the generic formula.
                let n = self.n_nodes();
                let dim = self.dim;
                let mut closed = TensorField::zeros(3, dim, n);
                let psi = self.conformal_factor.as_ref().unwrap();
                let _ = psi;
                let mut werr: Real = 0.0;
                let mut wvec = vec![[0.0; 3]; n];
                for (i, wv) in wvec.iter_mut().enumerate() {
                    let u = (0..3).map(|a| self.coords[a][i] * self.coords[a][i]).sum::<Real>();
                    for a in 0..3 {
                        wv[a] = 2.0 * self.coords[a][i] / (1.0 - u);
                    }
                }
                for k in 0..dim {
                    for i2 in 0..dim {
                        for j in 0..dim {
                            let cc = closed.comp_mut(g_cidx(dim, &[k, i2, j]));
                            for (idx, slot) in cc.iter_mut().enumerate() {
                                let w = &wvec[idx];
                                let mut v = 0.0;
                                if i2 == k {
                                    v += w[j];
                                }
                                if j == k {
                                    v += w[i2];
                                }
                                if i2 == j {
                                    v -= w[k];
                                }
                                *slot = v;
                            }
                        }
                    }
                }
                for (x, y) in closed.data.iter().zip(&self.gamma.data) {
                    werr = werr.max((x - y).abs());
                }
                out.push(("christoffel-two-path".into(), werr / closed.max_abs().max(1.0)));
            }
        }

        // Constant-curvature identity R = c (g o g).
        let mut cerr: Real = 0.0;
        let dim = self.dim;
        let n = self.n_nodes();
        let mut idx = [0usize; 4];
        for c in 0..self.riemann.comps() {
            unpack(c, 4, dim, &mut idx);
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            let gik = self.g.comp(g_cidx(dim, &[i, k]));
            let gjl = self.g.comp(g_cidx(dim, &[j, l]));
            let gil = self.g.comp(g_cidx(dim, &[i, l]));
            let gjk = self.g.comp(g_cidx(dim, &[j, k]));
            let r = self.riemann.comp(c);
            for t in 0..n {
                let model = self.curvature * (gik[t] * gjl[t] - gil[t] * gjk[t]);
                cerr = cerr.max((r[t] - model).abs());
            }
        }
        out.push(("constant-curvature-identity".into(), cerr / self.riemann.max_abs()));

        if let Chart::SphereAngles = self.chart {
            let vol = sphere_volume(self.dim, self.curvature);
            out.push(("volume-closed-form".into(), (self.volume - vol).abs() / vol));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere3_volume_and_self_checks() {
        let m = build_sphere(3, 1.0, 12).unwrap();
        assert!((m.volume - 2.0 * PI * PI).abs() < 1e-12 * m.volume);
        for (name, res) in m.self_check() {
            assert!(res < 1e-9, "{name}: {res}");
        }
        assert!((m.scal - 6.0).abs() < 1e-9);
        // |R|^2 = 2 n (n-1) c^2 = 12 pointwise
        for &v in &m.r_norm2 {
            assert!((v - 12.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere4_volume_and_self_checks() {
        let m = build_sphere(4, 1.0, 8).unwrap();
        assert!((m.volume - 8.0 / 3.0 * PI * PI).abs() < 1e-12 * m.volume);
        for (name, res) in m.self_check() {
            assert!(res < 1e-9, "{name}: {res}");
        }
        assert!((m.scal - 12.0).abs() < 1e-8);
        for &v in &m.r_norm2 {
            assert!((v - 24.0).abs() < 1e-8);
        }
    }

    #[test]
    fn sphere_curvature_parameter_scales_metric() {
        let c = 2.5;
        let m = build_sphere(3, c, 8).unwrap();
        for (name, res) in m.self_check() {
            assert!(res < 1e-9, "{name}: {res}");
        }
        for &v in &m.r_norm2 {
            assert!((v - 12.0 * c * c).abs() < 1e-8);
        }
    }

    #[test]
    fn unit_volume_rescale_hits_volume_one() {
        let m = build_sphere(3, 1.0, 8).unwrap().unit_volume().unwrap();
        assert!((m.volume - 1.0).abs() < 1e-12);
        let expect = (2.0 * PI * PI).powf(2.0 / 3.0);
        assert!((m.curvature - expect).abs() < 1e-12);
    }

    #[test]
    fn ball_chart_self_checks() {
        let m = build_ball(-1.0, 16, 0.56, 0.45).unwrap();
        for (name, res) in m.self_check() {
            assert!(res < 1e-9, "{name}: {res}");
        }
        assert!((m.scal + 6.0).abs() < 1e-9);
        for &v in &m.r_norm2 {
            assert!((v - 12.0).abs() < 1e-8);
        }
    }

    #[test]
    fn ambient_scalars_lie_on_unit_sphere() {
        for (dim, res) in [(3usize, 8usize), (4, 6)] {
            let m = build_sphere(dim, 1.7, res).unwrap();
            assert_eq!(m.ambient.len(), dim + 1);
            for i in 0..m.n_nodes() {
                let s: Real = m.ambient.iter().map(|a| a[i] * a[i]).sum();
                assert!((s - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn partner_tables_are_involutions() {
        let m = build_sphere(4, 1.0, 6).unwrap();
        for tab in m.partner.iter().flatten() {
            for (i, &p) in tab.iter().enumerate() {
                assert_eq!(tab[p as usize] as usize, i);
            }
        }
    }

    #[test]
    fn spectral_derivative_of_ambient_scalar_is_exact() {
        // On the unit 3-sphere, f = cos(chi) has df = (-sin chi, 0, 0).
        let m = build_sphere(3, 1.0, 10).unwrap();
        let f = m.ambient[0].clone();
        let df = m.diff_scalar(&f);
        for i in 0..m.n_nodes() {
            assert!((df.comp(0)[i] + m.coords[0][i].sin()).abs() < 1e-11);
            assert!(df.comp(1)[i].abs() < 1e-11);
            assert!(df.comp(2)[i].abs() < 1e-11);
        }
        // A full product harmonic: f = x1 = sin chi cos theta.
        let f2 = m.ambient[1].clone();
        let df2 = m.diff_scalar(&f2);
        for i in 0..m.n_nodes() {
            let (chi, th) = (m.coords[0][i], m.coords[1][i]);
            assert!((df2.comp(0)[i] - chi.cos() * th.cos()).abs() < 1e-11);
            assert!((df2.comp(1)[i] + chi.sin() * th.sin()).abs() < 1e-11);
            assert!(df2.comp(2)[i].abs() < 1e-11);
        }
    }

    #[test]
    fn berger_spec_refuses_grid_build() {
        assert!(matches!(
            build_manifold(ManifoldSpec::Berger { t: 0.8 }, 8),
            Err(Error::BergerNeedsScan)
        ));
    }
}
