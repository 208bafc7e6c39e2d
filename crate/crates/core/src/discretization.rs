//! The discrete energy of the Neumann system and its first two variations.
//!
//! The stiffness operator is the 3-point (1-D) or 5-point (2-D) Laplacian
//! with ghost-node reflection at the boundary, each row multiplied by the
//! node's quadrature weight, plus the weighted mass term. With that scaling
//! `A_a` is symmetric positive definite, `⟨A_a u, u⟩ = ‖u‖²_{a,h}`, and the
//! gradient below is exactly the differential of the discrete energy
//!
//! ```text
//! I(u,v) = ½(⟨A_a u,u⟩ + ⟨A_b v,v⟩) − λ Σ wᵢcᵢF(uᵢ,vᵢ) − μ Σ wᵢdᵢG(uᵢ,vᵢ).
//! ```

use std::sync::Arc;

use crate::domain::{CoefficientField, GridDomain};
use crate::error::{LabError, Result};
use crate::linalg;
use crate::nonlinearity::Nonlinearity;

/// Nodal values `(u, v)` stored contiguously: `u` first, then `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    nodes: usize,
    data: Vec<f64>,
}

impl StatePair {
    pub fn zeros(nodes: usize) -> Self {
        StatePair {
            nodes,
            data: vec![0.0; 2 * nodes],
        }
    }

    pub fn constant(nodes: usize, s: f64, t: f64) -> Self {
        let mut data = vec![s; 2 * nodes];
        data[nodes..].fill(t);
        StatePair { nodes, data }
    }

    pub fn from_parts(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(LabError::LengthMismatch {
                expected: u.len(),
                got: v.len(),
            });
        }
        let nodes = u.len();
        let mut data = u;
        data.extend(v);
        Ok(StatePair { nodes, data })
    }

    /// Reinterprets a flat `[u, v]` vector.
    pub fn from_flat(data: Vec<f64>) -> Self {
        assert!(
            data.len().is_multiple_of(2),
            "flat state must have even length"
        );
        StatePair {
            nodes: data.len() / 2,
            data,
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn u(&self) -> &[f64] {
        &self.data[..self.nodes]
    }

    pub fn v(&self) -> &[f64] {
        &self.data[self.nodes..]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Euclidean norm of the stacked nodal vector.
    pub fn norm(&self) -> f64 {
        linalg::norm(&self.data)
    }

    pub fn dot(&self, other: &StatePair) -> f64 {
        linalg::dot(&self.data, &other.data)
    }

    /// `self + alpha * dir`
    pub fn plus(&self, alpha: f64, dir: &StatePair) -> StatePair {
        let mut out = self.clone();
        linalg::axpy(alpha, &dir.data, &mut out.data);
        out
    }

    pub fn scaled(&self, k: f64) -> StatePair {
        StatePair {
            nodes: self.nodes,
            data: self.data.iter().map(|x| k * x).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `A_a`, acting on `u`.
    A,
    /// `A_b`, acting on `v`.
    B,
}

/// The extra term `μ d G(u,v)` of the perturbed system.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub mu: f64,
    pub g: Nonlinearity,
}

/// Grid, coefficients, nonlinearity and parameter λ. Immutable once built.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    coeffs: CoefficientField,
    nl: Nonlinearity,
    lambda: f64,
    perturbation: Option<Perturbation>,
    // nodal products with the quadrature weights
    wa: Vec<f64>,
    wb: Vec<f64>,
    wc: Vec<f64>,
    wd: Option<Vec<f64>>,
}

impl DiscreteSystem {
    pub fn new(coeffs: CoefficientField, nl: Nonlinearity, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(LabError::Usage(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        let w = coeffs.grid().weights();
        let times_w = |v: &[f64]| -> Vec<f64> { w.iter().zip(v).map(|(a, b)| a * b).collect() };
        Ok(DiscreteSystem {
            wa: times_w(coeffs.a()),
            wb: times_w(coeffs.b()),
            wc: times_w(coeffs.c()),
            wd: coeffs.d().map(times_w),
            coeffs,
            nl,
            lambda,
            perturbation: None,
        })
    }

    /// Adds `μ d G` to the system. Requires the coefficient field to carry `d`.
    pub fn with_perturbation(&self, mu: f64, g: Nonlinearity) -> Result<Self> {
        if self.wd.is_none() {
            return Err(LabError::Usage(
                "perturbation needs the coefficient field d".into(),
            ));
        }
        if !mu.is_finite() {
            return Err(LabError::Usage(format!("mu must be finite, got {mu}")));
        }
        let mut out = self.clone();
        out.perturbation = Some(Perturbation { mu, g });
        Ok(out)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut out = Self::new(self.coeffs.clone(), self.nl.clone(), lambda)?;
        out.perturbation = self.perturbation.clone();
        Ok(out)
    }

    pub fn with_nonlinearity(&self, nl: Nonlinearity) -> Result<Self> {
        let mut out = Self::new(self.coeffs.clone(), nl, self.lambda)?;
        out.perturbation = self.perturbation.clone();
        Ok(out)
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        self.coeffs.grid()
    }

    pub fn coeffs(&self) -> &CoefficientField {
        &self.coeffs
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn perturbation(&self) -> Option<&Perturbation> {
        self.perturbation.as_ref()
    }

    pub fn nodes(&self) -> usize {
        self.wa.len()
    }

    fn check_state(&self, state: &StatePair) -> Result<()> {
        if state.nodes() != self.nodes() {
            return Err(LabError::LengthMismatch {
                expected: self.nodes(),
                got: state.nodes(),
            });
        }
        Ok(())
    }

    /// Weighted Neumann Laplacian (no mass term), accumulated into `out`.
    fn laplacian_into(&self, x: &[f64], out: &mut [f64]) {
        let grid = self.grid();
        let counts = grid.counts();
        let h = grid.spacing();
        match counts.len() {
            1 => edges_1d(x, out, 1, 0, counts[0], 1.0 / h[0]),
            _ => {
                let (nx, ny) = (counts[0], counts[1]);
                let (wx, wy) = (grid.axis_weights(0), grid.axis_weights(1));
                for (j, &wyj) in wy.iter().enumerate() {
                    edges_1d(x, out, 1, j * nx, nx, wyj / h[0]);
                }
                for (i, &wxi) in wx.iter().enumerate() {
                    edges_1d(x, out, nx, i, ny, wxi / h[1]);
                }
            }
        }
    }

    fn diag_laplacian(&self) -> Vec<f64> {
        let grid = self.grid();
        let counts = grid.counts();
        let h = grid.spacing();
        let edge_count = |i: usize, n: usize| if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
        match counts.len() {
            1 => (0..counts[0])
                .map(|i| edge_count(i, counts[0]) / h[0])
                .collect(),
            _ => {
                let (nx, ny) = (counts[0], counts[1]);
                let (wx, wy) = (grid.axis_weights(0), grid.axis_weights(1));
                (0..nx * ny)
                    .map(|k| {
                        let (i, j) = (k % nx, k / nx);
                        wy[j] * edge_count(i, nx) / h[0] + wx[i] * edge_count(j, ny) / h[1]
                    })
                    .collect()
            }
        }
    }

    /// `A_a w` or `A_b w`.
    pub fn stiffness_apply(&self, w: &[f64], side: Side) -> Result<Vec<f64>> {
        self.grid().check_len(w)?;
        let mut out = vec![0.0; w.len()];
        self.stiffness_into(w, side, &mut out);
        Ok(out)
    }

    fn stiffness_into(&self, w: &[f64], side: Side, out: &mut [f64]) {
        let mass = match side {
            Side::A => &self.wa,
            Side::B => &self.wb,
        };
        for ((o, m), x) in out.iter_mut().zip(mass).zip(w) {
            *o = m * x;
        }
        self.laplacian_into(w, out);
    }

    /// Block operator `diag(A_a, A_b)` on a flat `[u, v]` vector.
    pub fn quadratic_apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.nodes();
        let (xu, xv) = x.split_at(n);
        let (ou, ov) = out.split_at_mut(n);
        self.stiffness_into(xu, Side::A, ou);
        self.stiffness_into(xv, Side::B, ov);
    }

    /// Diagonal of `diag(A_a, A_b)`.
    pub fn quadratic_diagonal(&self) -> Vec<f64> {
        let lap = self.diag_laplacian();
        let mut out: Vec<f64> = lap.iter().zip(&self.wa).map(|(l, m)| l + m).collect();
        out.extend(lap.iter().zip(&self.wb).map(|(l, m)| l + m));
        out
    }

    /// `‖u‖²_{a,h} + ‖v‖²_{b,h}`.
    pub fn quadratic_form(&self, state: &StatePair) -> f64 {
        let mut out = vec![0.0; state.as_flat().len()];
        self.quadratic_apply(state.as_flat(), &mut out);
        linalg::dot(&out, state.as_flat())
    }

    /// Discrete energy-norm distance normalized by `√nodes`.
    pub fn energy_distance(&self, x: &StatePair, y: &StatePair) -> f64 {
        let diff = x.plus(-1.0, y);
        (self.quadratic_form(&diff).max(0.0) / self.nodes() as f64).sqrt()
    }

    pub fn energy(&self, state: &StatePair) -> Result<f64> {
        self.check_state(state)?;
        let quad = 0.5 * self.quadratic_form(state);
        let (u, v) = (state.u(), state.v());
        let mut nonlinear = 0.0;
        for i in 0..self.nodes() {
            let f = self.nl.value(u[i], v[i]);
            if !f.is_finite() {
                return Err(LabError::NonFiniteNode {
                    quantity: "F(u,v)",
                    node: i,
                });
            }
            nonlinear += self.wc[i] * f;
        }
        let mut e = quad - self.lambda * nonlinear;
        if let (Some(p), Some(wd)) = (&self.perturbation, &self.wd) {
            let mut pert = 0.0;
            for i in 0..self.nodes() {
                let g = p.g.value(u[i], v[i]);
                if !g.is_finite() {
                    return Err(LabError::NonFiniteNode {
                        quantity: "G(u,v)",
                        node: i,
                    });
                }
                pert += wd[i] * g;
            }
            e -= p.mu * pert;
        }
        if !e.is_finite() {
            return Err(LabError::NonFiniteNode {
                quantity: "energy",
                node: 0,
            });
        }
        Ok(e)
    }

    /// Residual of the discrete weak form; zero exactly at discrete solutions.
    pub fn energy_gradient(&self, state: &StatePair) -> Result<StatePair> {
        self.check_state(state)?;
        let n = self.nodes();
        let mut out = vec![0.0; 2 * n];
        self.quadratic_apply(state.as_flat(), &mut out);
        let (u, v) = (state.u(), state.v());
        let (gu, gv) = out.split_at_mut(n);
        for i in 0..n {
            let (fs, ft) = self.nl.gradient(u[i], v[i]);
            gu[i] -= self.lambda * self.wc[i] * fs;
            gv[i] -= self.lambda * self.wc[i] * ft;
        }
        if let (Some(p), Some(wd)) = (&self.perturbation, &self.wd) {
            for i in 0..n {
                let (gs, gt) = p.g.gradient(u[i], v[i]);
                gu[i] -= p.mu * wd[i] * gs;
                gv[i] -= p.mu * wd[i] * gt;
            }
        }
        if let Some(k) = out.iter().position(|x| !x.is_finite()) {
            return Err(LabError::NonFiniteNode {
                quantity: "energy gradient",
                node: k % n,
            });
        }
        Ok(StatePair::from_flat(out))
    }

    /// Nodal second derivatives of the nonlinear part at `state`, ready for
    /// repeated Hessian products.
    pub fn linearize(&self, state: &StatePair) -> Result<Linearization<'_>> {
        self.check_state(state)?;
        let n = self.nodes();
        let (u, v) = (state.u(), state.v());
        let mut hss = vec![0.0; n];
        let mut hst = vec![0.0; n];
        let mut htt = vec![0.0; n];
        for i in 0..n {
            let h = self.nl.hessian(u[i], v[i]);
            let k = self.lambda * self.wc[i];
            hss[i] = k * h.ss;
            hst[i] = k * h.st;
            htt[i] = k * h.tt;
        }
        if let (Some(p), Some(wd)) = (&self.perturbation, &self.wd) {
            for i in 0..n {
                let h = p.g.hessian(u[i], v[i]);
                let k = p.mu * wd[i];
                hss[i] += k * h.ss;
                hst[i] += k * h.st;
                htt[i] += k * h.tt;
            }
        }
        for (i, x) in hss.iter().chain(&hst).chain(&htt).enumerate() {
            if !x.is_finite() {
                return Err(LabError::NonFiniteNode {
                    quantity: "second derivative of F",
                    node: i % n,
                });
            }
        }
        Ok(Linearization {
            sys: self,
            hss,
            hst,
            htt,
        })
    }

    /// Second variation of the energy at `state` applied to `direction`.
    pub fn energy_hessian_apply(
        &self,
        state: &StatePair,
        direction: &StatePair,
    ) -> Result<StatePair> {
        self.check_state(direction)?;
        let lin = self.linearize(state)?;
        let mut out = vec![0.0; 2 * self.nodes()];
        lin.apply(direction.as_flat(), &mut out);
        Ok(StatePair::from_flat(out))
    }

    /// The three quantities of the test-with-the-solution identity:
    /// `(‖u‖²_a + ‖v‖²_b, λ Σ wc(F_s u + F_t v), μ Σ wd(G_s u + G_t v))`.
    pub fn tested_terms(&self, state: &StatePair) -> Result<(f64, f64, f64)> {
        self.check_state(state)?;
        let (u, v) = (state.u(), state.v());
        let mut nonlinear = 0.0;
        for i in 0..self.nodes() {
            let (fs, ft) = self.nl.gradient(u[i], v[i]);
            nonlinear += self.wc[i] * (fs * u[i] + ft * v[i]);
        }
        let mut pert = 0.0;
        if let (Some(p), Some(wd)) = (&self.perturbation, &self.wd) {
            for i in 0..self.nodes() {
                let (gs, gt) = p.g.gradient(u[i], v[i]);
                pert += wd[i] * (gs * u[i] + gt * v[i]);
            }
            pert *= p.mu;
        }
        Ok((self.quadratic_form(state), self.lambda * nonlinear, pert))
    }
}

/// Adds the weighted second-difference rows along one grid line.
/// `stride`/`offset` select the line, `scale` is `w_perp / h`.
fn edges_1d(x: &[f64], out: &mut [f64], stride: usize, offset: usize, n: usize, scale: f64) {
    for e in 0..n - 1 {
        let (p, q) = (offset + e * stride, offset + (e + 1) * stride);
        let flux = scale * (x[p] - x[q]);
        out[p] += flux;
        out[q] -= flux;
    }
}

/// The Hessian of the energy frozen at one state.
pub struct Linearization<'a> {
    sys: &'a DiscreteSystem,
    hss: Vec<f64>,
    hst: Vec<f64>,
    htt: Vec<f64>,
}

impl Linearization<'_> {
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.sys.quadratic_apply(x, out);
        let n = self.hss.len();
        let (p, q) = x.split_at(n);
        let (ou, ov) = out.split_at_mut(n);
        for i in 0..n {
            ou[i] -= self.hss[i] * p[i] + self.hst[i] * q[i];
            ov[i] -= self.hst[i] * p[i] + self.htt[i] * q[i];
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = self.sys.quadratic_diagonal();
        let n = self.hss.len();
        for i in 0..n {
            d[i] -= self.hss[i];
            d[n + i] -= self.htt[i];
        }
        d
    }
}
