//! Uniform grids on intervals and rectangles, trapezoid quadrature and the
//! coefficient fields `a`, `b`, `c` (plus the optional perturbation weight `d`).

use std::sync::Arc;

use serde::Serialize;

use crate::error::{LabError, Result};

/// A uniform tensor grid on `(0, Lx)` or `(0, Lx) × (0, Ly)`.
///
/// Nodes are ordered lexicographically with `x` fastest, boundary nodes
/// included. Quadrature is the (tensorized) trapezoid rule, so every weight
/// is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    lengths: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    axis_weights: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl GridDomain {
    pub fn build_uniform_grid(dim: usize, lengths: &[f64], counts: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(LabError::Usage(format!("dim must be 1 or 2, got {dim}")));
        }
        if lengths.len() != dim || counts.len() != dim {
            return Err(LabError::Usage(format!(
                "expected {dim} lengths and counts, got {} and {}",
                lengths.len(),
                counts.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(LabError::Usage(format!(
                "lengths must be positive, got {l}"
            )));
        }
        if let Some(n) = counts.iter().find(|n| **n < 3) {
            return Err(LabError::Usage(format!(
                "node counts must be at least 3 per axis, got {n}"
            )));
        }
        let spacing: Vec<f64> = lengths
            .iter()
            .zip(counts)
            .map(|(l, n)| l / (*n - 1) as f64)
            .collect();
        let axis_weights: Vec<Vec<f64>> = counts
            .iter()
            .zip(&spacing)
            .map(|(&n, &h)| {
                (0..n)
                    .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
                    .collect()
            })
            .collect();
        let weights = if dim == 1 {
            axis_weights[0].clone()
        } else {
            let (wx, wy) = (&axis_weights[0], &axis_weights[1]);
            wy.iter()
                .flat_map(|&y| wx.iter().map(move |&x| x * y))
                .collect()
        };
        Ok(GridDomain {
            lengths: lengths.to_vec(),
            counts: counts.to_vec(),
            spacing,
            axis_weights,
            weights,
        })
    }

    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Self::build_uniform_grid(1, &[length], &[n])
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::build_uniform_grid(2, &[lx, ly], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn axis_weights(&self, axis: usize) -> &[f64] {
        &self.axis_weights[axis]
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    /// `|Ω|`.
    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Coordinates of node `k`; `y` is 0 on 1-D grids.
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let nx = self.counts[0];
        let (i, j) = (k % nx, k / nx);
        let x = i as f64 * self.spacing[0];
        let y = if self.dim() == 2 {
            j as f64 * self.spacing[1]
        } else {
            0.0
        };
        (x, y)
    }

    /// Evaluates `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.node_count())
            .map(|k| {
                let (x, y) = self.coords(k);
                f(x, y)
            })
            .collect()
    }

    pub fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() == self.node_count() {
            Ok(())
        } else {
            Err(LabError::LengthMismatch {
                expected: self.node_count(),
                got: f.len(),
            })
        }
    }

    /// `Σ wᵢ fᵢ`.
    pub fn integral(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        Ok(self.weights.iter().zip(f).map(|(w, x)| w * x).sum())
    }
}

/// Nodal samples of the coefficients. `a`, `b`, `c` are positive at every
/// node; `d` is only required to be finite.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    grid: Arc<GridDomain>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Option<Vec<f64>>,
}

fn check_positive(grid: &GridDomain, field: &'static str, v: &[f64]) -> Result<()> {
    grid.check_len(v)?;
    match v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        Some(node) => Err(LabError::NotPositive {
            field,
            node,
            value: v[node],
        }),
        None => Ok(()),
    }
}

impl CoefficientField {
    pub fn new(
        grid: Arc<GridDomain>,
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
        d: Option<Vec<f64>>,
    ) -> Result<Self> {
        check_positive(&grid, "a", &a)?;
        check_positive(&grid, "b", &b)?;
        check_positive(&grid, "c", &c)?;
        if let Some(d) = &d {
            grid.check_len(d)?;
            if let Some(node) = d.iter().position(|x| !x.is_finite()) {
                return Err(LabError::NonFiniteNode {
                    quantity: "coefficient d",
                    node,
                });
            }
        }
        Ok(CoefficientField { grid, a, b, c, d })
    }

    pub fn constant(grid: Arc<GridDomain>, a: f64, b: f64, c: f64) -> Result<Self> {
        let n = grid.node_count();
        Self::new(grid, vec![a; n], vec![b; n], vec![c; n], None)
    }

    /// Same fields with `d` replaced.
    pub fn with_d(&self, d: Vec<f64>) -> Result<Self> {
        Self::new(
            Arc::clone(&self.grid),
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            Some(d),
        )
    }

    /// Same fields with `c` multiplied by `k > 0`.
    pub fn scale_c(&self, k: f64) -> Result<Self> {
        Self::new(
            Arc::clone(&self.grid),
            self.a.clone(),
            self.b.clone(),
            self.c.iter().map(|x| k * x).collect(),
            self.d.clone(),
        )
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn d(&self) -> Option<&[f64]> {
        self.d.as_deref()
    }

    pub fn norms(&self) -> NormBundle {
        let g = &self.grid;
        let l1 = |v: &[f64]| g.weights().iter().zip(v).map(|(w, x)| w * x.abs()).sum();
        let max_ratio = |num: &[f64], den: &[f64]| {
            num.iter()
                .zip(den)
                .map(|(n, d)| n / d)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        NormBundle {
            a_l1: l1(&self.a),
            b_l1: l1(&self.b),
            c_l1: l1(&self.c),
            c_over_a_inf: max_ratio(&self.c, &self.a),
            c_over_b_inf: max_ratio(&self.c, &self.b),
        }
    }

    /// `min(min a, min b)`.
    pub fn ess_inf_ab(&self) -> f64 {
        self.a
            .iter()
            .chain(&self.b)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// The norms that enter the two threshold constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBundle {
    pub a_l1: f64,
    pub b_l1: f64,
    pub c_l1: f64,
    /// `‖c/a‖_∞`
    pub c_over_a_inf: f64,
    /// `‖c/b‖_∞`
    pub c_over_b_inf: f64,
}

impl NormBundle {
    /// All norms equal to one, as for `a = b = c ≡ 1` on a unit domain.
    pub fn unit() -> Self {
        NormBundle {
            a_l1: 1.0,
            b_l1: 1.0,
            c_l1: 1.0,
            c_over_a_inf: 1.0,
            c_over_b_inf: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interval_weights() {
        let g = GridDomain::build_uniform_grid(1, &[1.0], &[5]).unwrap();
        assert_eq!(g.weights(), &[0.125, 0.25, 0.25, 0.25, 0.125]);
        assert_eq!(g.weights().iter().sum::<f64>(), 1.0);
        assert_eq!(g.node_count(), 5);
    }

    #[test]
    fn square_weights() {
        let g = GridDomain::build_uniform_grid(2, &[1.0, 1.0], &[3, 3]).unwrap();
        let h2 = 0.25;
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.weights()[0], h2 / 4.0);
        assert_eq!(g.weights()[1], h2 / 2.0);
        assert_eq!(g.weights()[4], h2);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rectangle_measure_and_ordering() {
        let g = GridDomain::build_uniform_grid(2, &[2.0, 1.0], &[5, 3]).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 2.0).abs() < 1e-12 * 2.0);
        assert_eq!(g.node_count(), 15);
        assert_eq!(g.coords(1), (0.5, 0.0));
        assert_eq!(g.coords(5), (0.0, 0.5));
        assert_eq!(g.coords(14), (2.0, 1.0));
        assert!(g.weights().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn grid_usage_errors() {
        assert!(GridDomain::build_uniform_grid(1, &[1.0], &[2]).is_err());
        assert!(GridDomain::build_uniform_grid(1, &[0.0], &[5]).is_err());
        assert!(GridDomain::build_uniform_grid(2, &[1.0, -1.0], &[5, 5]).is_err());
        assert!(GridDomain::build_uniform_grid(3, &[1.0; 3], &[5; 3]).is_err());
        assert!(GridDomain::build_uniform_grid(2, &[1.0], &[5, 5]).is_err());
    }

    #[test]
    fn quadrature() {
        let sq = GridDomain::rectangle(1.0, 1.0, 9, 7).unwrap();
        assert!((sq.integral(&vec![1.0; sq.node_count()]).unwrap() - 1.0).abs() < 1e-14);

        let g = GridDomain::interval(1.0, 11).unwrap();
        let f = g.sample(|x, _| x);
        assert!((g.integral(&f).unwrap() - 0.5).abs() < 1e-15);

        // trapezoid error bound (b-a) h²/12 max|f''| with f'' = 2
        let g = GridDomain::interval(1.0, 101).unwrap();
        let f = g.sample(|x, _| x * x);
        let err = (g.integral(&f).unwrap() - 1.0 / 3.0).abs();
        assert!(err <= 2.0 / 12.0e4 + 1e-15, "{err}");
        assert!(err <= 2e-5);

        assert!(matches!(
            g.integral(&[1.0; 3]),
            Err(LabError::LengthMismatch {
                expected: 101,
                got: 3
            })
        ));
    }

    #[test]
    fn norms_of_constants() {
        let g = Arc::new(GridDomain::rectangle(1.0, 1.0, 5, 5).unwrap());
        let n = CoefficientField::constant(g.clone(), 1.0, 1.0, 1.0)
            .unwrap()
            .norms();
        for v in [n.a_l1, n.b_l1, n.c_l1, n.c_over_a_inf, n.c_over_b_inf] {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let n = CoefficientField::constant(g, 1.0, 1.0, 2.0)
            .unwrap()
            .norms();
        assert_eq!(n.c_over_a_inf, 2.0);
        assert!((n.c_l1 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn positivity_violation_names_field_and_node() {
        let g = Arc::new(GridDomain::interval(1.0, 5).unwrap());
        let mut a = vec![1.0; 5];
        a[3] = 0.0;
        let err =
            CoefficientField::new(g.clone(), a, vec![1.0; 5], vec![1.0; 5], None).unwrap_err();
        match err {
            LabError::NotPositive { field, node, .. } => {
                assert_eq!(field, "a");
                assert_eq!(node, 3);
            }
            other => panic!("{other}"),
        }
        let mut c = vec![1.0; 5];
        c[0] = -2.0;
        assert!(matches!(
            CoefficientField::new(g.clone(), vec![1.0; 5], vec![1.0; 5], c, None),
            Err(LabError::NotPositive {
                field: "c",
                node: 0,
                ..
            })
        ));
        assert!(CoefficientField::new(g, vec![1.0; 4], vec![1.0; 5], vec![1.0; 5], None).is_err());
    }

    fn random_field(rng: &mut ChaCha8Rng, g: &Arc<GridDomain>) -> CoefficientField {
        let n = g.node_count();
        let mut v = || {
            (0..n)
                .map(|_| rng.random_range(0.1..3.0))
                .collect::<Vec<_>>()
        };
        let (a, b, c) = (v(), v(), v());
        CoefficientField::new(g.clone(), a, b, c, None).unwrap()
    }

    #[test]
    fn ratio_norm_bounds_l1_ratio() {
        let g = Arc::new(GridDomain::rectangle(2.0, 1.0, 9, 5).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = random_field(&mut rng, &g).norms();
            assert!(1.0 / n.c_over_a_inf <= n.a_l1 / n.c_l1 * (1.0 + 1e-14));
            assert!(1.0 / n.c_over_b_inf <= n.b_l1 / n.c_l1 * (1.0 + 1e-14));
        }
    }

    #[test]
    fn norms_scale_with_c() {
        let g = Arc::new(GridDomain::interval(3.0, 17).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random_field(&mut rng, &g);
        let n1 = f.norms();
        let n3 = f.scale_c(3.0).unwrap().norms();
        assert!((n3.c_l1 - 3.0 * n1.c_l1).abs() < 1e-12 * n3.c_l1);
        assert!((n3.c_over_a_inf - 3.0 * n1.c_over_a_inf).abs() < 1e-12 * n3.c_over_a_inf);
        assert!((n3.c_over_b_inf - 3.0 * n1.c_over_b_inf).abs() < 1e-12 * n3.c_over_b_inf);
        assert_eq!(n3.a_l1, n1.a_l1);
    }
}
