//! Dense eigendecomposition of `P` through its symmetrisation
//! `S = M^{1/2} P M^{-1/2}`, and the functional calculus built on it.

use faer::{Col, Mat, Side};

use crate::error::{LabError, Result};
use crate::markov::MarkovOperator;

/// Largest vertex count accepted by the dense backend.
pub const DEFAULT_DENSE_CAP: usize = 4000;

/// Eigenpairs of `P` in `L^2(m)`: `P = sum_j lambda_j phi_j <phi_j, .>_m`
/// with `phi_j = M^{-1/2} u_j` and `u_j` the orthonormal eigenvectors of `S`.
pub struct SpectralDecomposition {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Columns are the Euclidean-orthonormal eigenvectors of `S`.
    vectors: Mat<f64>,
    sqrt_m: Vec<f64>,
    /// `max_j ||S u_j - lambda_j u_j||_inf`.
    pub residual: f64,
}

pub fn spectral_decompose(op: &MarkovOperator<'_>) -> Result<SpectralDecomposition> {
    spectral_decompose_with_cap(op, DEFAULT_DENSE_CAP)
}

pub fn spectral_decompose_with_cap(op: &MarkovOperator<'_>, cap: usize) -> Result<SpectralDecomposition> {
    let g = op.graph();
    let n = g.vertex_count();
    if n > cap {
        return Err(LabError::DenseCap { vertices: n, cap });
    }
    let sqrt_m: Vec<f64> = g.measures().iter().map(|m| m.sqrt()).collect();
    let mut s = Mat::<f64>::zeros(n, n);
    for x in 0..n {
        s[(x, x)] = op.alpha();
        let (targets, probs) = op.row(x);
        for (&y, &p) in targets.iter().zip(probs) {
            s[(x, y)] += sqrt_m[x] * p / sqrt_m[y];
        }
    }
    // symmetrise rounding noise before handing to the solver
    for x in 0..n {
        for y in 0..x {
            let v = 0.5 * (s[(x, y)] + s[(y, x)]);
            s[(x, y)] = v;
            s[(y, x)] = v;
        }
    }
    let eig = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LabError::Eigen(format!("{e:?}")))?;
    let eigenvalues: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    let vectors = eig.U().to_owned();

    let mut residual: f64 = 0.0;
    for j in 0..n {
        for x in 0..n {
            let mut su = op.alpha() * vectors[(x, j)];
            let (targets, probs) = op.row(x);
            for (&y, &p) in targets.iter().zip(probs) {
                su += sqrt_m[x] * p / sqrt_m[y] * vectors[(y, j)];
            }
            residual = residual.max((su - eigenvalues[j] * vectors[(x, j)]).abs());
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        vectors,
        sqrt_m,
        residual,
    })
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `phi_j(x)`, normalised in `L^2(m)`.
    pub fn eigenfunction(&self, j: usize) -> Vec<f64> {
        (0..self.len())
            .map(|x| self.vectors[(x, j)] / self.sqrt_m[x])
            .collect()
    }

    /// Coefficients `<phi_j, f>_m` for every `j`.
    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let h = Col::<f64>::from_fn(self.len(), |x| f[x] * self.sqrt_m[x]);
        let c = self.vectors.transpose() * &h;
        c.iter().copied().collect()
    }

    /// `F(P) f = sum_j F(lambda_j) <phi_j, f>_m phi_j`.
    pub fn apply_fn<F: Fn(f64) -> f64>(&self, f: &[f64], func: F) -> Vec<f64> {
        let coeffs = self.coefficients(f);
        let scaled = Col::<f64>::from_fn(self.len(), |j| coeffs[j] * func(self.eigenvalues[j]));
        let out = &self.vectors * &scaled;
        out.iter().zip(&self.sqrt_m).map(|(o, s)| o / s).collect()
    }

    /// Sum of eigenvalues, equal to `trace P`.
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Largest eigenvalue strictly below `1 - kernel_tol`.
    pub fn second_largest(&self, kernel_tol: f64) -> Option<f64> {
        self.eigenvalues
            .iter()
            .rev()
            .copied()
            .find(|&l| 1.0 - l > kernel_tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;
    use crate::markov::make_walk;
    use crate::vicsek::build_vicsek;

    #[test]
    fn two_vertex_lazy_spectrum() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let op = make_walk(&g, 0.5).unwrap();
        let sd = spectral_decompose(&op).unwrap();
        assert!(sd.eigenvalues[0].abs() < 1e-14);
        assert!((sd.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn path_of_three_spectrum() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let op = make_walk(&g, 0.5).unwrap();
        let sd = spectral_decompose(&op).unwrap();
        assert!(sd.eigenvalues.iter().all(|&l| (-1e-12..=1.0 + 1e-12).contains(&l)));
        assert!((sd.eigenvalues[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_identity_on_vicsek() {
        let v = build_vicsek(2, 2).unwrap();
        let op = make_walk(&v.graph, 0.5).unwrap();
        let sd = spectral_decompose(&op).unwrap();
        let n = v.graph.vertex_count() as f64;
        assert!((sd.trace() - 0.5 * n).abs() < 1e-9);
        assert!(sd.residual < 1e-8);
    }

    #[test]
    fn cap_is_enforced() {
        let v = build_vicsek(2, 1).unwrap();
        let op = make_walk(&v.graph, 0.5).unwrap();
        assert!(matches!(
            spectral_decompose_with_cap(&op, 10),
            Err(LabError::DenseCap { vertices: 21, cap: 10 })
        ));
    }

    #[test]
    fn identity_function_reproduces_p() {
        let v = build_vicsek(2, 1).unwrap();
        let op = make_walk(&v.graph, 0.5).unwrap();
        let sd = spectral_decompose(&op).unwrap();
        let f: Vec<f64> = (0..21).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = sd.apply_fn(&f, |l| l);
        let b = op.apply(&f);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
