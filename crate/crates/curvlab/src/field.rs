//! Dense tensor fields on a tensor-product grid.
//!
//! A field of valence v over an n_dim-coordinate chart stores all n_dim^v
//! components as contiguous node arrays (component-major). All index slots
//! are coordinate-frame covariant slots; raising happens explicitly through
//! contraction with the inverse metric, so the container itself carries no
//! variance bookkeeping.

use crate::Real;

#[derive(Debug, Clone)]
pub struct TensorField {
    pub valence: usize,
    pub dims: usize,
    pub n_nodes: usize,
    pub data: Vec<Real>,
}

impl TensorField {
    pub fn zeros(valence: usize, dims: usize, n_nodes: usize) -> TensorField {
        let comps = dims.pow(valence as u32);
        TensorField { valence, dims, n_nodes, data: vec![0.0; comps * n_nodes] }
    }

    pub fn scalar(n_nodes: usize, dims: usize) -> TensorField {
        TensorField::zeros(0, dims, n_nodes)
    }

    pub fn from_scalar_values(dims: usize, values: Vec<Real>) -> TensorField {
        TensorField { valence: 0, dims, n_nodes: values.len(), data: values }
    }

    #[inline]
    pub fn comps(&self) -> usize {
        self.dims.pow(self.valence as u32)
    }

    #[inline]
    pub fn comp(&self, c: usize) -> &[Real] {
        &self.data[c * self.n_nodes..(c + 1) * self.n_nodes]
    }

    #[inline]
    pub fn comp_mut(&mut self, c: usize) -> &mut [Real] {
        &mut self.data[c * self.n_nodes..(c + 1) * self.n_nodes]
    }

    /// Row-major component index for a multi-index.
    #[inline]
    pub fn cidx(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.valence);
        let mut c = 0;
        for &i in idx {
            debug_assert!(i < self.dims);
            c = c * self.dims + i;
        }
        c
    }

    pub fn at(&self, idx: &[usize]) -> &[Real] {
        self.comp(self.cidx(idx))
    }

    pub fn scale(&mut self, s: Real) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn axpy(&mut self, a: Real, x: &TensorField) {
        debug_assert_eq!(self.data.len(), x.data.len());
        for (d, s) in self.data.iter_mut().zip(&x.data) {
            *d += a * s;
        }
    }

    pub fn scaled(&self, s: Real) -> TensorField {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn max_abs(&self) -> Real {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }
}

/// Unpack a row-major component index into a multi-index.
#[inline]
pub fn unpack(mut c: usize, valence: usize, dims: usize, idx: &mut [usize]) {
    for s in (0..valence).rev() {
        idx[s] = c % dims;
        c /= dims;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_indexing_round_trips() {
        let t = TensorField::zeros(3, 4, 2);
        let mut idx = [0usize; 3];
        for c in 0..t.comps() {
            unpack(c, 3, 4, &mut idx);
            assert_eq!(t.cidx(&idx), c);
        }
    }

    #[test]
    fn axpy_and_scale_compose() {
        let n = 5;
        let mut a = TensorField::zeros(1, 3, n);
        let mut b = TensorField::zeros(1, 3, n);
        for (i, x) in a.data.iter_mut().enumerate() {
            *x = i as Real;
        }
        for (i, x) in b.data.iter_mut().enumerate() {
            *x = 2.0 * i as Real;
        }
        b.axpy(-2.0, &a);
        assert_eq!(b.max_abs(), 0.0);
        a.scale(0.0);
        assert_eq!(a.max_abs(), 0.0);
    }
}
