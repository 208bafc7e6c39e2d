//! The coupled potential `F(s, t)`, its derivatives and a sampled checker
//! for the growth hypotheses at the origin and at infinity.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::expr::{Dual2, Expr};

/// Second partial derivatives of `F`. The cross entry is stored once.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Hessian {
    pub ss: f64,
    pub st: f64,
    pub tt: f64,
}

/// A twice-differentiable scalar potential of two variables.
///
/// Only `value` and `gradient` are required. The default `hessian`
/// differentiates the gradient numerically, see [`fd_hessian`].
pub trait Potential: Send + Sync {
    fn value(&self, s: f64, t: f64) -> f64;
    fn gradient(&self, s: f64, t: f64) -> (f64, f64);
    fn hessian(&self, s: f64, t: f64) -> Hessian {
        fd_hessian(self, s, t)
    }
}

/// Central-difference Hessian built from the analytic gradient, with step
/// `h = max(1e-6, 1e-6 (|s| + |t|))`. The mixed entry averages both orders.
pub fn fd_hessian<P: Potential + ?Sized>(p: &P, s: f64, t: f64) -> Hessian {
    let h = (1e-6 * (s.abs() + t.abs())).max(1e-6);
    let (fs_sp, ft_sp) = p.gradient(s + h, t);
    let (fs_sm, ft_sm) = p.gradient(s - h, t);
    let (fs_tp, ft_tp) = p.gradient(s, t + h);
    let (fs_tm, ft_tm) = p.gradient(s, t - h);
    let inv = 0.5 / h;
    Hessian {
        ss: (fs_sp - fs_sm) * inv,
        st: 0.5 * ((fs_tp - fs_tm) * inv + (ft_sp - ft_sm) * inv),
        tt: (ft_tp - ft_tm) * inv,
    }
}

/// `ln(1 + s²t²)`.
#[derive(Debug, Clone, Copy)]
pub struct LogCoupled;

impl Potential for LogCoupled {
    fn value(&self, s: f64, t: f64) -> f64 {
        (s * s * t * t).ln_1p()
    }
    fn gradient(&self, s: f64, t: f64) -> (f64, f64) {
        let q = 1.0 + s * s * t * t;
        (2.0 * s * t * t / q, 2.0 * s * s * t / q)
    }
    fn hessian(&self, s: f64, t: f64) -> Hessian {
        let p = s * s * t * t;
        let q2 = (1.0 + p) * (1.0 + p);
        Hessian {
            ss: 2.0 * t * t * (1.0 - p) / q2,
            st: 4.0 * s * t / q2,
            tt: 2.0 * s * s * (1.0 - p) / q2,
        }
    }
}

/// `ln(1 + (s² + t²)²)`.
#[derive(Debug, Clone, Copy)]
pub struct LogRadial;

impl Potential for LogRadial {
    fn value(&self, s: f64, t: f64) -> f64 {
        let q = s * s + t * t;
        (q * q).ln_1p()
    }
    fn gradient(&self, s: f64, t: f64) -> (f64, f64) {
        let q = s * s + t * t;
        let k = 4.0 * q / (1.0 + q * q);
        (k * s, k * t)
    }
    fn hessian(&self, s: f64, t: f64) -> Hessian {
        let q = s * s + t * t;
        let den = 1.0 + q * q;
        let a = 4.0 * q / den;
        let b = 8.0 / den - 16.0 * q * q / (den * den);
        Hessian {
            ss: a + b * s * s,
            st: b * s * t,
            tt: a + b * t * t,
        }
    }
}

/// `ln(1 + s⁴ + t⁴)`.
#[derive(Debug, Clone, Copy)]
pub struct LogQuartic;

impl Potential for LogQuartic {
    fn value(&self, s: f64, t: f64) -> f64 {
        (s.powi(4) + t.powi(4)).ln_1p()
    }
    fn gradient(&self, s: f64, t: f64) -> (f64, f64) {
        let d = 1.0 + s.powi(4) + t.powi(4);
        (4.0 * s.powi(3) / d, 4.0 * t.powi(3) / d)
    }
    fn hessian(&self, s: f64, t: f64) -> Hessian {
        let d = 1.0 + s.powi(4) + t.powi(4);
        let d2 = d * d;
        Hessian {
            ss: 12.0 * s * s / d - 16.0 * s.powi(6) / d2,
            st: -16.0 * s.powi(3) * t.powi(3) / d2,
            tt: 12.0 * t * t / d - 16.0 * t.powi(6) / d2,
        }
    }
}

/// A user expression in `s` and `t`; the gradient comes from dual numbers,
/// the Hessian from the finite-difference fallback.
#[derive(Debug, Clone)]
pub struct ExprPotential {
    expr: Expr,
}

impl Potential for ExprPotential {
    fn value(&self, s: f64, t: f64) -> f64 {
        self.expr.eval(&[s, t])
    }
    fn gradient(&self, s: f64, t: f64) -> (f64, f64) {
        let r = self.expr.eval(&[Dual2::var(s, 0), Dual2::var(t, 1)]);
        (r.d[0], r.d[1])
    }
}

struct Scaled {
    inner: Arc<dyn Potential>,
    factor: f64,
}

impl Potential for Scaled {
    fn value(&self, s: f64, t: f64) -> f64 {
        self.factor * self.inner.value(s, t)
    }
    fn gradient(&self, s: f64, t: f64) -> (f64, f64) {
        let (a, b) = self.inner.gradient(s, t);
        (self.factor * a, self.factor * b)
    }
    fn hessian(&self, s: f64, t: f64) -> Hessian {
        let h = self.inner.hessian(s, t);
        Hessian {
            ss: self.factor * h.ss,
            st: self.factor * h.st,
            tt: self.factor * h.tt,
        }
    }
}

/// Names accepted by [`Nonlinearity::catalog`].
pub const CATALOG: &[&str] = &["log-coupled", "log-radial", "log-quartic"];

/// A named, shareable potential.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    analytic_hessian: bool,
    inner: Arc<dyn Potential>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("analytic_hessian", &self.analytic_hessian)
            .finish()
    }
}

impl Nonlinearity {
    /// `F(s,t) = ln(1 + s²t²)`.
    pub fn catalog_log() -> Self {
        Self::with_potential("log-coupled", true, LogCoupled)
    }

    pub fn catalog(name: &str) -> Option<Self> {
        Some(match name {
            "log-coupled" => Self::catalog_log(),
            "log-radial" => Self::with_potential("log-radial", true, LogRadial),
            "log-quartic" => Self::with_potential("log-quartic", true, LogQuartic),
            _ => return None,
        })
    }

    /// Every catalog entry, in [`CATALOG`] order.
    pub fn all_catalog() -> Vec<Self> {
        CATALOG.iter().filter_map(|n| Self::catalog(n)).collect()
    }

    pub fn from_expression(source: &str) -> Result<Self> {
        let expr = Expr::parse(source, &["s", "t"])?;
        Ok(Self::with_potential(
            source.trim(),
            false,
            ExprPotential { expr },
        ))
    }

    /// A catalog name if it matches one, otherwise an expression in `s`, `t`.
    pub fn resolve(source: &str) -> Result<Self> {
        match Self::catalog(source.trim()) {
            Some(nl) => Ok(nl),
            None => Self::from_expression(source),
        }
    }

    /// Wraps a custom potential. Its Hessian is treated as a fallback unless
    /// `analytic_hessian` is set.
    pub fn with_potential(
        name: &str,
        analytic_hessian: bool,
        potential: impl Potential + 'static,
    ) -> Self {
        Nonlinearity {
            name: name.to_string(),
            analytic_hessian,
            inner: Arc::new(potential),
        }
    }

    /// `k·F`.
    pub fn scaled(&self, factor: f64) -> Self {
        Nonlinearity {
            name: format!("{}*{}", factor, self.name),
            analytic_hessian: self.analytic_hessian,
            inner: Arc::new(Scaled {
                inner: Arc::clone(&self.inner),
                factor,
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.analytic_hessian
    }

    #[inline]
    pub fn value(&self, s: f64, t: f64) -> f64 {
        self.inner.value(s, t)
    }

    #[inline]
    pub fn gradient(&self, s: f64, t: f64) -> (f64, f64) {
        self.inner.gradient(s, t)
    }

    #[inline]
    pub fn hessian(&self, s: f64, t: f64) -> Hessian {
        self.inner.hessian(s, t)
    }

    /// `F(s,t)`, rejecting non-finite arguments.
    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        check_finite("eval", s, t)?;
        Ok(self.value(s, t))
    }

    /// `(F_s, F_t)`, rejecting non-finite arguments.
    pub fn grad(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        check_finite("grad", s, t)?;
        Ok(self.gradient(s, t))
    }

    pub fn hess(&self, s: f64, t: f64) -> Result<Hessian> {
        check_finite("hess", s, t)?;
        Ok(self.hessian(s, t))
    }
}

fn check_finite(what: &'static str, s: f64, t: f64) -> Result<()> {
    if s.is_finite() && t.is_finite() {
        Ok(())
    } else {
        Err(LabError::NonFiniteInput { what, s, t })
    }
}

/// `n` points log-spaced over `[lo, hi]`, endpoints included.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "reasons", rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail(Vec<String>),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

/// Sampled evidence for the sign and growth hypotheses. Never a proof.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    /// `F ≥ 0` at every sample and `F(0,0) = 0`.
    pub f_plus_ok: bool,
    pub origin_value: f64,
    pub min_value: f64,
    /// Some sample had `F ≠ 0`. When false the report says "no nonzero
    /// sample found"; sampling can never establish `F ≡ 0`.
    pub nonzero_found: bool,
    /// `(r, max_θ max(|F_s|,|F_t|)/(|s|+|t|))` for radii below 1.
    pub f0_profile: Vec<(f64, f64)>,
    /// The same ratio for radii at or above 1.
    pub f_inf_profile: Vec<(f64, f64)>,
    /// Largest sampled ratio: the constant `M` of `|∇F| ≤ M(|s|+|t|)`.
    pub m_estimate: f64,
    pub tol: f64,
    pub verdict: Verdict,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

/// Gradient-to-radius ratio with the 0/0 case at the origin defined as 0.
pub fn gradient_ratio(nl: &Nonlinearity, s: f64, t: f64) -> f64 {
    let r = s.abs() + t.abs();
    if r == 0.0 {
        return 0.0;
    }
    let (fs, ft) = nl.gradient(s, t);
    fs.abs().max(ft.abs()) / r
}

/// Samples `(r cos θ, r sin θ)` on each radius and reports the decay of the
/// gradient ratio at the smallest and largest radius.
pub fn check_hypotheses(
    nl: &Nonlinearity,
    radii: &[f64],
    angles_per_radius: usize,
    tol: f64,
) -> Result<HypothesisReport> {
    if radii.is_empty() {
        return Err(LabError::Usage("radii list is empty".into()));
    }
    if angles_per_radius < 8 {
        return Err(LabError::Usage(format!(
            "angles_per_radius must be at least 8, got {angles_per_radius}"
        )));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(LabError::Usage("radii must be positive and finite".into()));
    }
    if radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(LabError::Usage("radii must be sorted ascending".into()));
    }

    let origin_value = nl.value(0.0, 0.0);
    let mut min_value = origin_value;
    let mut nonzero_found = false;
    let mut profile = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut worst = 0.0f64;
        for k in 0..angles_per_radius {
            let theta = 2.0 * PI * k as f64 / angles_per_radius as f64;
            let (s, t) = (r * theta.cos(), r * theta.sin());
            let f = nl.value(s, t);
            if f.is_nan() {
                min_value = f64::NAN;
            } else {
                min_value = min_value.min(f);
            }
            nonzero_found |= f != 0.0;
            let ratio = gradient_ratio(nl, s, t);
            worst = if ratio.is_nan() {
                f64::NAN
            } else {
                worst.max(ratio)
            };
        }
        profile.push((r, worst));
    }

    let f_plus_ok = origin_value == 0.0 && min_value >= 0.0;
    let m_estimate = profile.iter().map(|p| p.1).fold(0.0, f64::max);
    let first = profile[0];
    let last = profile[profile.len() - 1];

    let mut reasons = Vec::new();
    if !f_plus_ok {
        reasons.push(format!(
            "sign hypothesis violated: F(0,0) = {origin_value}, min sampled F = {min_value}"
        ));
    }
    if !nonzero_found {
        reasons.push("no nonzero sample found: F vanished at every sample".to_string());
    }
    if !(first.1 < tol) {
        reasons.push(format!(
            "gradient ratio at r = {:e} is {:e}, not below {tol:e} (decay at the origin)",
            first.0, first.1
        ));
    }
    if !(last.1 < tol) {
        reasons.push(format!(
            "gradient ratio at r = {:e} is {:e}, not below {tol:e} (decay at infinity)",
            last.0, last.1
        ));
    }

    let (f0_profile, f_inf_profile) = profile.into_iter().partition(|p| p.0 < 1.0);
    Ok(HypothesisReport {
        f_plus_ok,
        origin_value,
        min_value,
        nonzero_found,
        f0_profile,
        f_inf_profile,
        m_estimate,
        tol,
        verdict: if reasons.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail(reasons)
        },
    })
}

/// Sampled check of `max(|G_s|,|G_t|) ≤ C (1 + |s|^p + |t|^p)`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub exponent: f64,
    /// Largest sampled ratio, a lower bound for the constant `C`.
    pub c_estimate: f64,
    pub profile: Vec<(f64, f64)>,
    pub ok: bool,
}

/// Passes when every ratio is finite and the ratio does not grow over the
/// last decade of sampled radii.
pub fn check_growth_bound(
    g: &Nonlinearity,
    exponent: f64,
    radii: &[f64],
    angles_per_radius: usize,
) -> Result<GrowthReport> {
    if !(exponent > 1.0) {
        return Err(LabError::Usage(format!(
            "growth exponent must exceed 1, got {exponent}"
        )));
    }
    if radii.len() < 2 || angles_per_radius < 8 {
        return Err(LabError::Usage(
            "growth check needs at least 2 radii and 8 angles".into(),
        ));
    }
    let profile: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let worst = (0..angles_per_radius)
                .map(|k| {
                    let theta = 2.0 * PI * k as f64 / angles_per_radius as f64;
                    let (s, t) = (r * theta.cos(), r * theta.sin());
                    let (gs, gt) = g.gradient(s, t);
                    gs.abs().max(gt.abs()) / (1.0 + s.abs().powf(exponent) + t.abs().powf(exponent))
                })
                .fold(
                    0.0,
                    |acc: f64, x| if x.is_nan() { f64::NAN } else { acc.max(x) },
                );
            (r, worst)
        })
        .collect();
    let finite = profile.iter().all(|p| p.1.is_finite());
    let r_max = radii[radii.len() - 1];
    let last = profile[profile.len() - 1].1;
    let decade_before = profile
        .iter()
        .filter(|p| p.0 <= r_max / 10.0)
        .map(|p| p.1)
        .next_back()
        .unwrap_or(profile[0].1);
    let c_estimate = profile.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(GrowthReport {
        exponent,
        c_estimate,
        ok: finite && last <= 1.01 * decade_before + 1e-300,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn log_coupled_values() {
        let nl = Nonlinearity::catalog_log();
        assert_eq!(nl.eval(0.0, 0.0).unwrap(), 0.0);
        assert!((nl.eval(1.0, 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((nl.eval(2.0, 0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(nl.eval(0.0, 7.0).unwrap(), 0.0);
        assert_eq!(nl.grad(1.0, 1.0).unwrap(), (1.0, 1.0));
        for t in [-3.0, 0.0, 0.5, 1e8] {
            assert_eq!(nl.grad(0.0, t).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn value_at_the_threshold_maximizer() {
        // x = s⁴ solves 2x/(1+x) = ln(1+x); bisection gives x ≈ 3.9216.
        let (mut lo, mut hi) = (1.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 2.0 * mid / (1.0 + mid) - mid.ln_1p() > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = lo.powf(0.25);
        assert!((s - 1.4072).abs() < 1e-4);
        let nl = Nonlinearity::catalog_log();
        let exact = nl.eval(s, s).unwrap();
        assert!((exact - lo.ln_1p()).abs() < 1e-14);
        assert!((exact - 1.5937).abs() < 1e-4, "{exact}");
        // the four-digit rounding of the maximizer costs about 7e-5
        let v = nl.eval(1.4072, 1.4072).unwrap();
        assert!((v - 1.5937).abs() < 2e-4, "{v}");
    }

    #[test]
    fn gradient_decays_at_infinity() {
        let nl = Nonlinearity::catalog_log();
        let (fs, ft) = nl.grad(1e6, 1e6).unwrap();
        assert!(rel(fs, 2e-6) < 1e-9);
        assert!(rel(ft, 2e-6) < 1e-9);
        assert!(fs / 2e6 < 1e-11);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let nl = Nonlinearity::catalog_log();
        assert!(matches!(
            nl.eval(f64::NAN, 1.0),
            Err(LabError::NonFiniteInput { .. })
        ));
        assert!(nl.grad(1.0, f64::INFINITY).is_err());
        assert!(nl.hess(f64::NEG_INFINITY, 0.0).is_err());
    }

    #[test]
    fn catalog_lookup() {
        for name in CATALOG {
            let nl = Nonlinearity::catalog(name).unwrap();
            assert_eq!(nl.name(), *name);
            assert!(nl.has_analytic_hessian());
        }
        assert!(Nonlinearity::catalog("cubic").is_none());
        let e = Nonlinearity::resolve("s^2 + t^2").unwrap();
        assert!(!e.has_analytic_hessian());
        assert_eq!(e.value(1.0, 2.0), 5.0);
        assert!(Nonlinearity::resolve("s^2 + w").is_err());
    }

    fn random_point(rng: &mut ChaCha8Rng) -> (f64, f64) {
        // |s| + |t| log-uniform in [1e-2, 1e2]
        let r = 10f64.powf(rng.random_range(-2.0..2.0));
        let w = rng.random_range(0.0..1.0);
        let sx = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let sy = if rng.random::<bool>() { 1.0 } else { -1.0 };
        (sx * r * w, sy * r * (1.0 - w))
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for nl in Nonlinearity::all_catalog() {
            for _ in 0..100 {
                let (s, t) = random_point(&mut rng);
                let h = 1e-6 * (1.0 + s.abs() + t.abs());
                let fd_s = (nl.value(s + h, t) - nl.value(s - h, t)) / (2.0 * h);
                let fd_t = (nl.value(s, t + h) - nl.value(s, t - h)) / (2.0 * h);
                let (gs, gt) = nl.gradient(s, t);
                let scale = gs
                    .abs()
                    .max(gt.abs())
                    .max(1e-3 * nl.value(s, t).abs())
                    .max(1e-8);
                assert!(
                    (gs - fd_s).abs() / scale <= 1e-6 && (gt - fd_t).abs() / scale <= 1e-6,
                    "{} at ({s},{t}): ({gs},{gt}) vs ({fd_s},{fd_t})",
                    nl.name()
                );
            }
        }
    }

    #[test]
    fn analytic_hessians_match_fallback() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for nl in Nonlinearity::all_catalog() {
            for _ in 0..100 {
                let (s, t) = random_point(&mut rng);
                let a = nl.hessian(s, t);
                let b = fd_hessian(&*nl.inner, s, t);
                let scale = a.ss.abs().max(a.st.abs()).max(a.tt.abs()).max(1e-6);
                for (x, y) in [(a.ss, b.ss), (a.st, b.st), (a.tt, b.tt)] {
                    assert!(
                        (x - y).abs() / scale < 1e-5,
                        "{}: {a:?} vs {b:?}",
                        nl.name()
                    );
                }
            }
        }
    }

    #[test]
    fn expression_gradient_is_exact() {
        let e = Nonlinearity::from_expression("ln(1 + s^2*t^2)").unwrap();
        let c = Nonlinearity::catalog_log();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (s, t) = random_point(&mut rng);
            let (a, b) = e.gradient(s, t);
            let (x, y) = c.gradient(s, t);
            assert!(rel(a, x) < 1e-13 || (a - x).abs() < 1e-300);
            assert!(rel(b, y) < 1e-13 || (b - y).abs() < 1e-300);
            let h1 = e.hessian(s, t);
            let h2 = c.hessian(s, t);
            let scale = h2.ss.abs().max(h2.st.abs()).max(h2.tt.abs()).max(1e-6);
            assert!((h1.st - h2.st).abs() / scale < 1e-5);
        }
    }

    #[test]
    fn subquadratic_bound_holds() {
        let nl = Nonlinearity::catalog_log();
        let report = check_hypotheses(&nl, &log_spaced(1e-4, 1e4, 81), 64, 1e-2).unwrap();
        let m = report.m_estimate;
        assert!(m > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10_000 {
            let (s, t) = random_point(&mut rng);
            assert!(nl.value(s, t) <= 2.0 * m * (s * s + t * t));
        }
    }

    #[test]
    fn hypotheses_pass_for_log_coupled() {
        let radii = log_spaced(1e-4, 1e4, 81);
        for nl in Nonlinearity::all_catalog() {
            let report = check_hypotheses(&nl, &radii, 64, 1e-2).unwrap();
            assert!(report.passed(), "{}: {:?}", nl.name(), report.verdict);
            assert!(report.nonzero_found && report.f_plus_ok);
            assert!(report.f0_profile[0].1 < 1e-6);
            assert!(report.f_inf_profile.last().unwrap().1 < 1e-6);
        }
    }

    #[test]
    fn hypotheses_fail_for_quadratic() {
        let nl = Nonlinearity::from_expression("s^2 + t^2").unwrap();
        let report = check_hypotheses(&nl, &log_spaced(1e-4, 1e4, 81), 64, 1e-2).unwrap();
        let Verdict::Fail(reasons) = &report.verdict else {
            panic!("quadratic should fail");
        };
        assert!(reasons.iter().any(|r| r.contains("infinity")));
        assert!((report.f_inf_profile.last().unwrap().1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hypotheses_flag_identically_zero() {
        let nl = Nonlinearity::from_expression("0").unwrap();
        let report = check_hypotheses(&nl, &log_spaced(1e-4, 1e4, 9), 8, 1e-2).unwrap();
        assert!(!report.nonzero_found);
        let Verdict::Fail(reasons) = &report.verdict else {
            panic!("zero should fail");
        };
        assert!(reasons
            .iter()
            .any(|r| r.contains("no nonzero sample found")));
    }

    #[test]
    fn hypotheses_usage_errors() {
        let nl = Nonlinearity::catalog_log();
        assert!(matches!(
            check_hypotheses(&nl, &[], 16, 1e-2),
            Err(LabError::Usage(_))
        ));
        assert!(check_hypotheses(&nl, &[1.0], 4, 1e-2).is_err());
        assert!(check_hypotheses(&nl, &[2.0, 1.0], 16, 1e-2).is_err());
        assert!(check_hypotheses(&nl, &[-1.0, 1.0], 16, 1e-2).is_err());
    }

    #[test]
    fn ratio_at_origin_is_zero() {
        let nl = Nonlinearity::from_expression("s^2 + t^2").unwrap();
        assert_eq!(gradient_ratio(&nl, 0.0, 0.0), 0.0);
    }

    #[test]
    fn growth_bound_check() {
        let radii = log_spaced(1e-3, 1e4, 36);
        let log = Nonlinearity::catalog_log();
        assert!(check_growth_bound(&log, 2.0, &radii, 32).unwrap().ok);
        let quartic = Nonlinearity::from_expression("s^4 + t^4").unwrap();
        assert!(!check_growth_bound(&quartic, 2.0, &radii, 32).unwrap().ok);
        assert!(check_growth_bound(&quartic, 3.0, &radii, 32).unwrap().ok);
        let expo = Nonlinearity::from_expression("exp(s)").unwrap();
        assert!(!check_growth_bound(&expo, 2.0, &radii, 32).unwrap().ok);
    }

    #[test]
    fn scaling_doubles_everything() {
        let nl = Nonlinearity::catalog_log();
        let two = nl.scaled(2.0);
        assert_eq!(two.value(0.3, 1.7), 2.0 * nl.value(0.3, 1.7));
        let (a, b) = nl.gradient(0.3, 1.7);
        assert_eq!(two.gradient(0.3, 1.7), (2.0 * a, 2.0 * b));
    }
}
