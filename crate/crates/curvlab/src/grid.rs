//! Tensor-product grids with spectrally exact differentiation and quadrature.
//!
//! Two axis families cover every chart in the crate:
//!
//! * offset angle axes on (0, pi) with nodes (j + 1/2) pi/N, used for the
//!   polar angles of spheres. Functions on them are smooth restrictions of
//!   functions on the doubled periodic interval, so differentiation works on
//!   the doubled grid. The extension rule for a tensor component F along axis
//!   `a` is ext[N + j] = sign * P[N - 1 - j], where P is the component on the
//!   partner line (the line whose remaining coordinates are the reflection
//!   images) and sign is the product of per-index reflection parities. The
//!   reversal is folded into the B matrix below, so callers only gather the
//!   partner line in its natural order.
//! * periodic axes (azimuthal angles, box coordinates), differentiated by the
//!   standard even-N Fourier matrix with the Nyquist mode zeroed.
//!
//! All differentiation uses dense precomputed matrices; no FFT dependency and
//! a fixed floating-point evaluation order, which keeps byte-level
//! determinism trivial.

use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisKind {
    /// Nodes (j+1/2) pi/N on (0, pi); quadrature matched to the measure
    /// sin^m(theta) d theta.
    OffsetAngle { measure_power: u32 },
    /// Nodes offset-uniform on [start, start + period).
    Periodic { start: Real, period: Real },
}

#[derive(Debug, Clone)]
pub struct Axis {
    pub kind: AxisKind,
    pub n: usize,
    pub nodes: Vec<Real>,
    /// Quadrature weights against the axis measure (sin^m included for
    /// offset axes, plain spacing for periodic axes).
    pub weights: Vec<Real>,
    /// Same-line differentiation matrix, n x n row-major.
    pub diff_a: Vec<Real>,
    /// Partner-line differentiation matrix (offset axes only), with the
    /// index reversal of the extension rule already folded in.
    pub diff_b: Option<Vec<Real>>,
}

impl Axis {
    pub fn offset_angle(n: usize, measure_power: u32) -> Axis {
        assert!(n >= 4 && n % 2 == 0, "offset axis needs even n >= 4");
        let nodes: Vec<Real> =
            (0..n).map(|j| (j as Real + 0.5) * std::f64::consts::PI / n as Real).collect();
        let weights = moment_weights(n, measure_power);
        let (a, b) = doubled_diff_matrices(n);
        Axis {
            kind: AxisKind::OffsetAngle { measure_power },
            n,
            nodes,
            weights,
            diff_a: a,
            diff_b: Some(b),
        }
    }

    pub fn periodic(n: usize, start: Real, period: Real) -> Axis {
        assert!(n >= 4 && n % 2 == 0, "periodic axis needs even n >= 4");
        let h = period / n as Real;
        let nodes: Vec<Real> = (0..n).map(|j| start + (j as Real + 0.5) * h).collect();
        let weights = vec![h; n];
        let a = periodic_diff_matrix(n, period);
        Axis { kind: AxisKind::Periodic { start, period }, n, nodes, weights, diff_a: a, diff_b: None }
    }

    /// d/dx of one line of samples. `partner` must be the partner line in its
    /// natural index order (same line for periodic axes, where it is ignored),
    /// `sign` the reflection parity of the tensor component.
    pub fn diff_line(&self, line: &[Real], partner: &[Real], sign: Real, out: &mut [Real]) {
        let n = self.n;
        debug_assert_eq!(line.len(), n);
        debug_assert_eq!(out.len(), n);
        match &self.diff_b {
            None => {
                for i in 0..n {
                    let row = &self.diff_a[i * n..(i + 1) * n];
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += row[j] * line[j];
                    }
                    out[i] = acc;
                }
            }
            Some(b) => {
                debug_assert_eq!(partner.len(), n);
                for i in 0..n {
                    let ra = &self.diff_a[i * n..(i + 1) * n];
                    let rb = &b[i * n..(i + 1) * n];
                    let mut acc_a = 0.0;
                    let mut acc_b = 0.0;
                    for j in 0..n {
                        acc_a += ra[j] * line[j];
                        acc_b += rb[j] * partner[j];
                    }
                    out[i] = acc_a + sign * acc_b;
                }
            }
        }
    }
}

/// Exact Fourier differentiation matrix on n equispaced nodes of a period-L
/// interval, Nyquist mode dropped. Entry [i][j] depends only on i - j.
fn periodic_diff_matrix(n: usize, period: Real) -> Vec<Real> {
    let mut kernel = vec![0.0; n];
    let scale = 2.0 * std::f64::consts::PI / period;
    for (d, slot) in kernel.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in 1..n / 2 {
            acc -= 2.0 * k as Real * (k as Real * d as Real * 2.0 * std::f64::consts::PI / n as Real).sin();
        }
        *slot = scale * acc / n as Real;
    }
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = kernel[(i + n - j) % n];
        }
    }
    m
}

/// A and B blocks of the doubled-grid derivative for an offset angle axis:
/// out = A * line + sign * B * partner. Derived from the exact 2N-point
/// Fourier matrix on [0, 2 pi) with the extension rule folded into B.
fn doubled_diff_matrices(n: usize) -> (Vec<Real>, Vec<Real>) {
    let m2 = periodic_diff_matrix(2 * n, 2.0 * std::f64::consts::PI);
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = m2[i * 2 * n + j];
            // ext[N + j'] = sign * partner[N-1-j']  =>  column N + (N-1-q)
            b[i * n + j] = m2[i * 2 * n + (2 * n - 1 - j)];
        }
    }
    (a, b)
}

/// Quadrature weights on offset nodes matched to the moments of sin^m:
/// w_j = mu_0 / N + (2/N) sum_k mu_k cos(k theta_j) with
/// mu_k = int_0^pi sin^m(t) cos(k t) dt. Exact for integrands band-limited
/// below the doubled-grid Nyquist frequency.
fn moment_weights(n: usize, m: u32) -> Vec<Real> {
    let mu = |k: usize| -> Real {
        let k2 = (k * k) as Real;
        match m {
            1 => {
                if k % 2 == 0 {
                    2.0 / (1.0 - k2)
                } else {
                    0.0
                }
            }
            2 => match k {
                0 => std::f64::consts::PI / 2.0,
                2 => -std::f64::consts::PI / 4.0,
                _ => 0.0,
            },
            3 => {
                if k % 2 == 0 {
                    1.5 / (1.0 - k2) - 1.5 / (9.0 - k2)
                } else {
                    0.0
                }
            }
            _ => panic!("unsupported measure power {m}"),
        }
    };
    (0..n)
        .map(|j| {
            let theta = (j as Real + 0.5) * std::f64::consts::PI / n as Real;
            let mut w = mu(0) / n as Real;
            for k in 1..n {
                w += 2.0 / n as Real * mu(k) * (k as Real * theta).cos();
            }
            w
        })
        .collect()
}

/// Shape bookkeeping for a row-major tensor-product grid.
#[derive(Debug, Clone)]
pub struct GridShape {
    pub dims: Vec<usize>,
    pub strides: Vec<usize>,
    pub n_nodes: usize,
}

impl GridShape {
    pub fn new(dims: &[usize]) -> GridShape {
        let mut strides = vec![1usize; dims.len()];
        for d in (0..dims.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * dims[d + 1];
        }
        let n_nodes = dims.iter().product();
        GridShape { dims: dims.to_vec(), strides, n_nodes }
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unflat(&self, mut flat: usize, idx: &mut [usize]) {
        for d in 0..self.dims.len() {
            idx[d] = flat / self.strides[d];
            flat %= self.strides[d];
        }
    }

    /// Base flat offsets of all lines along `axis` (one per combination of
    /// the remaining coordinates), in increasing flat order.
    pub fn line_offsets(&self, axis: usize) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.n_nodes / self.dims[axis]);
        let mut idx = vec![0usize; self.dims.len()];
        loop {
            offs.push(self.flat(&idx));
            // increment mixed-radix counter skipping `axis`
            let mut d = self.dims.len();
            loop {
                if d == 0 {
                    return offs;
                }
                d -= 1;
                if d == axis {
                    continue;
                }
                idx[d] += 1;
                if idx[d] < self.dims[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

/// Sequential pairwise summation: deterministic and accurate independent of
/// thread count.
pub fn pairwise_sum(v: &[Real]) -> Real {
    if v.len() <= 32 {
        let mut acc = 0.0;
        for x in v {
            acc += x;
        }
        return acc;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Pairwise sum of f(i) over [lo, hi).
pub fn pairwise_map_sum<F: Fn(usize) -> Real + Copy>(lo: usize, hi: usize, f: F) -> Real {
    if hi - lo <= 32 {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    pairwise_map_sum(lo, mid, f) + pairwise_map_sum(mid, hi, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn periodic_diff_is_exact_on_band_limited_modes() {
        let n = 16;
        let ax = Axis::periodic(n, 0.0, 2.0 * PI);
        for k in 1..=(n / 2 - 1) {
            let f: Vec<Real> = ax.nodes.iter().map(|&x| (k as Real * x).sin()).collect();
            let mut out = vec![0.0; n];
            ax.diff_line(&f, &f, 1.0, &mut out);
            for (i, &x) in ax.nodes.iter().enumerate() {
                let exact = k as Real * (k as Real * x).cos();
                assert!((out[i] - exact).abs() < 1e-11, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn box_axis_diff_carries_period_scale() {
        let l = 0.56;
        let ax = Axis::periodic(24, -l, 2.0 * l);
        let w = PI / l; // one full period over the box
        let f: Vec<Real> = ax.nodes.iter().map(|&x| (w * x).cos()).collect();
        let mut out = vec![0.0; 24];
        ax.diff_line(&f, &f, 1.0, &mut out);
        for (i, &x) in ax.nodes.iter().enumerate() {
            assert!((out[i] + w * (w * x).sin()).abs() < 1e-10);
        }
    }

    // On a single offset line the extension rule with partner = self covers
    // functions even (sign +1) or odd (sign -1) under theta -> 2 pi - theta
    // ... i.e. the parity classes cos(k theta) / sin(k theta).
    #[test]
    fn offset_diff_is_exact_on_parity_classes() {
        let n = 12;
        let ax = Axis::offset_angle(n, 1);
        for k in 1..n {
            let c: Vec<Real> = ax.nodes.iter().map(|&t| (k as Real * t).cos()).collect();
            let s: Vec<Real> = ax.nodes.iter().map(|&t| (k as Real * t).sin()).collect();
            let mut dc = vec![0.0; n];
            let mut ds = vec![0.0; n];
            ax.diff_line(&c, &c, 1.0, &mut dc);
            ax.diff_line(&s, &s, -1.0, &mut ds);
            for i in 0..n {
                assert!((dc[i] + k as Real * s[i]).abs() < 1e-10, "cos k={k}");
                assert!((ds[i] - k as Real * c[i]).abs() < 1e-10, "sin k={k}");
            }
        }
    }

    #[test]
    fn moment_weights_integrate_low_modes_exactly() {
        for (m, checks) in [
            (1u32, vec![(0usize, 2.0), (2, -2.0 / 3.0), (4, -2.0 / 15.0)]),
            (2, vec![(0, PI / 2.0), (2, -PI / 4.0), (4, 0.0)]),
            (3, vec![(0, 4.0 / 3.0), (2, -4.0 / 5.0), (4, 4.0 / 35.0)]),
        ] {
            let ax = Axis::offset_angle(20, m);
            for (k, exact) in checks {
                let approx: Real = ax
                    .nodes
                    .iter()
                    .zip(&ax.weights)
                    .map(|(&t, &w)| w * (k as Real * t).cos())
                    .sum();
                assert!((approx - exact).abs() < 1e-13, "m={m} k={k}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn line_offsets_enumerate_disjoint_lines() {
        let shape = GridShape::new(&[3, 4, 5]);
        for axis in 0..3 {
            let offs = shape.line_offsets(axis);
            assert_eq!(offs.len(), shape.n_nodes / shape.dims[axis]);
            let mut seen = vec![false; shape.n_nodes];
            for &o in &offs {
                for i in 0..shape.dims[axis] {
                    let f = o + i * shape.strides[axis];
                    assert!(!seen[f]);
                    seen[f] = true;
                }
            }
            assert!(seen.iter().all(|&b| b));
        }
    }

    #[test]
    fn pairwise_sum_matches_closed_form() {
        let v: Vec<Real> = (1..=10_000).map(|i| i as Real).collect();
        assert_eq!(pairwise_sum(&v), 10_000.0 * 10_001.0 / 2.0);
        assert_eq!(pairwise_map_sum(1, 10_001, |i| i as Real), 10_000.0 * 10_001.0 / 2.0);
    }
}
