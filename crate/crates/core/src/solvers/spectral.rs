//! Perron-Frobenius eigenvalue of a nonnegative matrix.
//!
//! The matrix is split into strongly connected components; the spectral
//! radius is the largest over the irreducible diagonal blocks. Each block
//! is handled by power iteration on `I + B_c`, which is primitive, so the
//! iteration cannot oscillate the way it does on bipartite patterns like
//! `[[0, a], [b, 0]]`. For a positive iterate `x`, the Collatz-Wielandt
//! ratios `min_i (Ax)_i / x_i` and `max_i (Ax)_i / x_i` bracket the
//! eigenvalue, and the iteration stops once the bracket is narrower than
//! `tol`.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::Result;
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    /// Midpoint of the final bracket.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn spectral_radius(b: &DenseMatrix, tol: f64, max_iter: usize) -> Result<SpectralRadius> {
    b.check_nonnegative_square()?;
    let n = b.rows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
    for _ in 0..n {
        graph.add_node(());
    }
    for i in 0..n {
        for j in 0..n {
            if b[(i, j)] > 0.0 {
                graph.add_edge(NodeIndex::new(i), NodeIndex::new(j), ());
            }
        }
    }

    let mut result = SpectralRadius {
        value: 0.0,
        lower: 0.0,
        upper: 0.0,
        iterations: 0,
        converged: true,
    };
    for component in tarjan_scc(&graph) {
        let idx: Vec<usize> = component.iter().map(|v| v.index()).collect();
        if idx.len() == 1 && b[(idx[0], idx[0])] == 0.0 {
            // acyclic node, contributes a zero eigenvalue
            continue;
        }
        let block = b.principal_submatrix(&idx);
        let est = irreducible_radius(&block, tol, max_iter);
        result.value = result.value.max(est.value);
        result.lower = result.lower.max(est.lower);
        result.upper = result.upper.max(est.upper);
        result.iterations += est.iterations;
        result.converged &= est.converged;
    }
    Ok(result)
}

fn irreducible_radius(block: &DenseMatrix, tol: f64, max_iter: usize) -> SpectralRadius {
    let n = block.rows();
    let mut x = vec![1.0; n];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for k in 1..=max_iter {
        // y = (I + B) x
        let mut y = block.mul_vec(&x);
        y.iter_mut().zip(&x).for_each(|(yi, xi)| *yi += xi);
        lo = f64::INFINITY;
        hi = 0.0f64;
        for (yi, xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= tol * hi.max(1.0) {
            return SpectralRadius {
                value: 0.5 * (lo + hi) - 1.0,
                lower: lo - 1.0,
                upper: hi - 1.0,
                iterations: k,
                converged: true,
            };
        }
        let top = y.iter().fold(0.0f64, |a, &v| a.max(v));
        x = y.into_iter().map(|v| v / top).collect();
    }
    SpectralRadius {
        value: 0.5 * (lo + hi) - 1.0,
        lower: lo - 1.0,
        upper: hi - 1.0,
        iterations: max_iter,
        converged: false,
    }
}
