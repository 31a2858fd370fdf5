//! Special functions: erf, the Gauss hypergeometric function with complex
//! conjugate parameters, spherical functions of the disk, and the radial
//! Fourier transform together with its inversion.

use std::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::quad::{self, GaussLegendre, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("hypergeometric series did not converge within {terms} terms")]
    NoConvergence { terms: usize },
    #[error("hypergeometric series lost precision (estimated relative error {estimate:e})")]
    PrecisionLoss { estimate: f64 },
    #[error("complex intermediate left an imaginary residue of {0:e}")]
    ImaginaryResidue(f64),
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("spectral grid does not resolve the transform: |W(lambda_max)| / max |W| = {ratio:e} at lambda_max = {lambda_max}")]
    Unresolved { lambda_max: f64, ratio: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
}

// ---------------------------------------------------------------------------
// Error function

/// The error function, via a positive-term series for |x| < 3 and the
/// Laplace continued fraction of erfc beyond.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax == 0.0 {
        return x;
    }
    let v = if ax < 3.0 {
        erf_series(ax)
    } else {
        1.0 - erfc_cf(ax)
    };
    v.copysign(x)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x < 3.0 {
        1.0 - erf(x)
    } else {
        erfc_cf(x)
    }
}

fn erf_series(x: f64) -> f64 {
    // erf x = (2/√π) e^{-x²} Σ 2^n x^{2n+1} / (1·3···(2n+1))
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

fn erfc_cf(x: f64) -> f64 {
    // erfc x = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), modified Lentz.
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 * 0.5;
        d = x + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

// ---------------------------------------------------------------------------
// Double-double arithmetic for the hypergeometric series.
//
// For large λ the series terms grow to ~cosh(πλ/2) before cancelling down to
// an O(1) sum, so plain doubles lose everything past λ ≈ 15.

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let e = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: e }
    }

    fn quick_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd {
            hi: s,
            lo: b - (s - a),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let t = Dd::two_sum(self.lo, o.lo);
        let s = Dd::quick_two_sum(s.hi, s.lo + t.hi);
        Dd::quick_two_sum(s.hi, s.lo + t.lo)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi))
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        Dd::quick_two_sum(q1, q2).add(Dd::from(q3))
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

#[derive(Debug, Clone, Copy)]
struct Cdd {
    re: Dd,
    im: Dd,
}

impl Cdd {
    fn new(re: f64, im: f64) -> Cdd {
        Cdd {
            re: Dd::from(re),
            im: Dd::from(im),
        }
    }

    fn add(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re.add(o.re),
            im: self.im.add(o.im),
        }
    }

    fn mul(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    fn scale(self, s: Dd) -> Cdd {
        Cdd {
            re: self.re.mul(s),
            im: self.im.mul(s),
        }
    }

    fn abs_f64(self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }

    fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

const MAX_SERIES_TERMS: usize = 400_000;

/// `F(a, b; c; y)` for complex `a`, `b`, real `c` and `0 ≤ |y| < 1`, summed in
/// double-double. Returns the sum and the largest term modulus.
fn hyp2f1_series(
    a: Complex64,
    b: Complex64,
    c: f64,
    y: f64,
) -> Result<(Complex64, f64), SpecFunError> {
    let yd = Dd::from(y);
    let mut term = Cdd::new(1.0, 0.0);
    let mut sum = term;
    let mut max_term: f64 = 1.0;
    let mut k = 0usize;
    loop {
        let kd = Dd::from(k as f64);
        let ak = Cdd {
            re: Dd::from(a.re).add(kd),
            im: Dd::from(a.im),
        };
        let bk = Cdd {
            re: Dd::from(b.re).add(kd),
            im: Dd::from(b.im),
        };
        let den = Dd::from(c).add(kd).mul(kd.add(Dd::ONE));
        term = term.mul(ak).mul(bk).scale(yd.div(den));
        sum = sum.add(term);
        k += 1;
        let tmod = term.abs_f64();
        max_term = max_term.max(tmod);
        // Once the term ratio settles below one, the remaining tail is bounded
        // by a geometric series.
        let ratio = (a + k as f64).norm() * (b + k as f64).norm()
            / ((c + k as f64) * (k as f64 + 1.0))
            * y.abs();
        if ratio < 1.0 {
            let tail = tmod * ratio / (1.0 - ratio);
            let s = sum.abs_f64();
            if tail <= 1e-17 * s || tail == 0.0 {
                break;
            }
        }
        if k >= MAX_SERIES_TERMS {
            return Err(SpecFunError::NoConvergence { terms: k });
        }
    }
    Ok((sum.to_c64(), max_term))
}

/// `F(a, conj a; c; x)` for real `x ≤ 0`, which is real.
///
/// Direct series for `|x| < 0.5`; otherwise the Pfaff transformation
/// `F(a, b; c; x) = (1 - x)^{-a} F(a, c - b; c; x/(x - 1))`, whose argument
/// lies in `[1/3, 1)`.
pub fn hyp2f1_conjugate(a_re: f64, a_im: f64, c: f64, x: f64) -> Result<f64, SpecFunError> {
    if !(x <= 0.0) || !x.is_finite() {
        return Err(SpecFunError::Domain(format!(
            "hyp2f1_conjugate needs finite x <= 0, got {x}"
        )));
    }
    if c <= 0.0 && c.fract() == 0.0 {
        return Err(SpecFunError::Domain(format!(
            "c = {c} is a non-positive integer"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let a = Complex64::new(a_re, a_im);
    if x > -0.5 {
        hyp2f1_direct(a, c, x)
    } else {
        hyp2f1_pfaff(a, c, x)
    }
}

fn hyp2f1_direct(a: Complex64, c: f64, x: f64) -> Result<f64, SpecFunError> {
    let (s, max_term) = hyp2f1_series(a, a.conj(), c, x)?;
    check_precision(s.re, max_term)?;
    check_imaginary(s)?;
    Ok(s.re)
}

fn hyp2f1_pfaff(a: Complex64, c: f64, x: f64) -> Result<f64, SpecFunError> {
    let b = Complex64::new(c, 0.0) - a.conj();
    let y = x / (x - 1.0);
    let (s, max_term) = hyp2f1_series(a, b, c, y)?;
    // (1 - x)^{-a}
    let l = (1.0 - x).ln();
    let pref = Complex64::from_polar((-a.re * l).exp(), -a.im * l);
    let v = pref * s;
    check_precision(v.re, max_term * pref.norm())?;
    check_imaginary(v)?;
    Ok(v.re)
}

fn check_precision(value: f64, max_term: f64) -> Result<(), SpecFunError> {
    // Double-double carries ~1e-31 per operation; a few thousand terms keep
    // the absolute error far below 1e-20 times the largest term.
    let estimate = 1e-28 * max_term / value.abs().max(1e-300);
    if estimate > 1e-12 {
        return Err(SpecFunError::PrecisionLoss { estimate });
    }
    Ok(())
}

fn check_imaginary(v: Complex64) -> Result<(), SpecFunError> {
    let res = v.im.abs() / v.re.abs().max(1.0);
    if res > 1e-10 {
        return Err(SpecFunError::ImaginaryResidue(res));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Spherical functions

/// Evaluation route for the spherical functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SphericalEvalMethod {
    /// `F(ν, 1-ν; 1; -sinh² r)` through [`hyp2f1_conjugate`].
    SeriesHypergeometric,
    /// Trapezoidal rule on the boundary integral
    /// `(1/2π) ∫ ((1-|z|²)/|z-b|²)^{(1+iλ)/2} dθ`. Only defined for `(0,0)`.
    BoundaryIntegral,
    /// Mehler-type integral representation on `[0, r]`, evaluated by
    /// Gauss-Legendre after a square-root substitution.
    #[default]
    Mehler,
}

/// `Φ_λ(tanh r)` with the default method.
pub fn spherical_phi(lambda: f64, r: f64) -> Result<f64, SpecFunError> {
    spherical_phi_with(SphericalEvalMethod::default(), lambda, r)
}

pub fn spherical_phi_with(
    method: SphericalEvalMethod,
    lambda: f64,
    r: f64,
) -> Result<f64, SpecFunError> {
    check_radius(r)?;
    match method {
        SphericalEvalMethod::SeriesHypergeometric => {
            hyp2f1_conjugate(0.5, 0.5 * lambda, 1.0, -r.sinh().powi(2))
        }
        SphericalEvalMethod::BoundaryIntegral => boundary_integral_phi(lambda, r),
        SphericalEvalMethod::Mehler => Ok(mehler_phi00(lambda, r)),
    }
}

/// Jacobi-type spherical function `Φ_λ^{(α,β)}(ω)`.
pub fn spherical_phi_ab(
    lambda: f64,
    alpha: i32,
    beta: i32,
    omega: f64,
) -> Result<f64, SpecFunError> {
    spherical_phi_ab_with(SphericalEvalMethod::default(), lambda, alpha, beta, omega)
}

pub fn spherical_phi_ab_with(
    method: SphericalEvalMethod,
    lambda: f64,
    alpha: i32,
    beta: i32,
    omega: f64,
) -> Result<f64, SpecFunError> {
    check_radius(omega)?;
    if alpha + 1 <= 0 {
        return Err(SpecFunError::Domain(format!(
            "alpha + 1 = {} must be positive",
            alpha + 1
        )));
    }
    match (method, alpha, beta) {
        (SphericalEvalMethod::Mehler, 0, 0) => Ok(mehler_phi00(lambda, omega)),
        (SphericalEvalMethod::Mehler, 1, 1) => Ok(mehler_phi11(lambda, omega)),
        (SphericalEvalMethod::BoundaryIntegral, 0, 0) => boundary_integral_phi(lambda, omega),
        _ => {
            let rho = (alpha + beta + 1) as f64;
            hyp2f1_conjugate(
                0.5 * rho,
                0.5 * lambda,
                alpha as f64 + 1.0,
                -omega.sinh().powi(2),
            )
        }
    }
}

fn check_radius(r: f64) -> Result<(), SpecFunError> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(SpecFunError::Domain(format!(
            "radius must be finite and >= 0, got {r}"
        )));
    }
    Ok(())
}

fn boundary_integral_phi(lambda: f64, r: f64) -> Result<f64, SpecFunError> {
    if r == 0.0 {
        return Ok(1.0);
    }
    let t = r.tanh();
    let one_m = 1.0 - t * t;
    // The real part of the integrand is even in θ, so integrate over [0, π].
    // The Poisson kernel peaks at θ = 0 with width ~ 1 - t; breakpoints at
    // multiples of that width let the adaptive rule resolve it.
    let f = |theta: f64| -> f64 {
        let den = (1.0 - t) * (1.0 - t) + 4.0 * t * (0.5 * theta).sin().powi(2);
        let lp = (one_m / den).ln();
        (0.5 * lp).exp() * (0.5 * lambda * lp).cos()
    };
    let width = 1.0 - t;
    let breaks: Vec<f64> = (0..12)
        .map(|k| width * 2f64.powi(k))
        .filter(|&b| b < PI)
        .collect();
    let v = quad::adaptive(f, 0.0, PI, &breaks, 1e-15, 1e-14)?;
    Ok(v / PI)
}

const MEHLER_LADDER: [usize; 8] = [48, 64, 96, 128, 256, 512, 1024, 2048];

fn mehler_rule(lambda: f64, t: f64) -> Arc<GaussLegendre> {
    let need = 1.2 * lambda.abs() * t + 40.0;
    let n = MEHLER_LADDER
        .iter()
        .copied()
        .find(|&n| n as f64 >= need)
        .unwrap_or_else(|| (need.ceil() as usize).next_power_of_two());
    GaussLegendre::cached(n)
}

/// Visits `(s, jac, g)` with `s = t(1-u²)`, `jac = 2tu`, and
/// `g = cosh 2t - cosh 2s` evaluated without cancellation.
fn mehler_nodes<F: FnMut(f64, f64, f64, f64)>(rule: &GaussLegendre, t: f64, mut visit: F) {
    for (u, w) in rule.mapped(0.0, 1.0) {
        let s = t * (1.0 - u * u);
        let g = 2.0 * (t + s).sinh() * (t * u * u).sinh();
        visit(s, 2.0 * t * u, g, w);
    }
}

/// `Φ_λ^{(0,0)}(t) = (2√2/π) ∫_0^t cos(λs) (cosh 2t - cosh 2s)^{-1/2} ds`.
pub(crate) fn mehler_phi00(lambda: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let rule = mehler_rule(lambda, t);
    let mut acc = 0.0;
    mehler_nodes(&rule, t, |s, jac, g, w| {
        acc += w * (lambda * s).cos() * jac / g.sqrt();
    });
    2.0 * SQRT_2 / PI * acc
}

/// `Φ_λ^{(1,1)}(t) = (8√2/π) sinh^{-2}(2t) ∫_0^t cos(λs) √(cosh 2t - cosh 2s) ds`.
pub(crate) fn mehler_phi11(lambda: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let rule = mehler_rule(lambda, t);
    let mut acc = 0.0;
    mehler_nodes(&rule, t, |s, jac, g, w| {
        acc += w * (lambda * s).cos() * jac * g.sqrt();
    });
    8.0 * SQRT_2 / PI * acc / (2.0 * t).sinh().powi(2)
}

/// Mehler nodes for one radius `t`, sized for every `|λ| ≤ λ_max`, so that
/// `Φ_λ^{(0,0)}(t)` and `Φ_λ^{(1,1)}(t)` become cosine sums sharing `cos(λs)`.
#[derive(Debug, Clone)]
pub(crate) struct MehlerTable {
    s: Vec<f64>,
    a00: Vec<f64>,
    a11: Vec<f64>,
}

impl MehlerTable {
    pub(crate) fn new(t: f64, lambda_max: f64) -> Self {
        if t == 0.0 {
            return Self {
                s: vec![0.0],
                a00: vec![1.0],
                a11: vec![1.0],
            };
        }
        let rule = mehler_rule(lambda_max, t);
        let c11 = 8.0 * SQRT_2 / PI / (2.0 * t).sinh().powi(2);
        let mut table = Self {
            s: Vec::with_capacity(rule.len()),
            a00: Vec::with_capacity(rule.len()),
            a11: Vec::with_capacity(rule.len()),
        };
        mehler_nodes(&rule, t, |s, jac, g, w| {
            table.s.push(s);
            table.a00.push(2.0 * SQRT_2 / PI * w * jac / g.sqrt());
            table.a11.push(c11 * w * jac * g.sqrt());
        });
        table
    }

    /// `(Φ_λ^{(0,0)}(t), Φ_λ^{(1,1)}(t))`.
    pub(crate) fn eval(&self, lambda: f64) -> (f64, f64) {
        let (mut p00, mut p11) = (0.0, 0.0);
        for ((&s, &a), &b) in self.s.iter().zip(&self.a00).zip(&self.a11) {
            let c = (lambda * s).cos();
            p00 += a * c;
            p11 += b * c;
        }
        (p00, p11)
    }
}

/// The Plancherel weight `λ tanh(πλ/2)`.
pub fn plancherel_weight(lambda: f64) -> f64 {
    lambda * (0.5 * PI * lambda).tanh()
}

// ---------------------------------------------------------------------------
// Spectral grid and radial Fourier transform

/// Gauss-Legendre rule on `[0, λ_max]` for even spectral integrands.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    lambda_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SpectralGrid {
    pub const DEFAULT_LAMBDA_MAX: f64 = 100.0;
    pub const DEFAULT_NODES: usize = 1000;

    pub fn new(lambda_max: f64, n_lambda: usize) -> Result<Self, SpecFunError> {
        if !(lambda_max > 0.0 && lambda_max.is_finite()) || n_lambda == 0 {
            return Err(SpecFunError::Domain(format!(
                "spectral grid needs lambda_max > 0 and n_lambda > 0, got {lambda_max}, {n_lambda}"
            )));
        }
        let rule = GaussLegendre::cached(n_lambda);
        let (nodes, weights) = rule.mapped(0.0, lambda_max).unzip();
        Ok(Self {
            lambda_max,
            nodes,
            weights,
        })
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_{-λmax}^{λmax} f` for even `f`, as twice the half-line rule.
    pub fn integrate_even<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        2.0 * self.integrate_half(f)
    }

    pub fn integrate_half<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| w * f(l))
            .sum()
    }

    /// Weighted sum of precomputed samples at the nodes, times two.
    pub fn sum_even(&self, samples: &[f64]) -> f64 {
        2.0 * self
            .weights
            .iter()
            .zip(samples)
            .map(|(w, s)| w * s)
            .sum::<f64>()
    }
}

impl Default for SpectralGrid {
    fn default() -> Self {
        Self::new(Self::DEFAULT_LAMBDA_MAX, Self::DEFAULT_NODES).expect("default spectral grid")
    }
}

/// A radial profile `w(r)` on `[0, r_max]`, integrable against `sinh 2r`.
pub trait RadialProfile: Sync {
    fn value(&self, r: f64) -> f64;
    /// Radius beyond which `|w(r)| sinh 2r` is negligible.
    fn r_max(&self) -> f64;
}

/// Abel transform `A(s) = ∫_s^∞ w(r) sinh 2r (cosh 2r - cosh 2s)^{-1/2} dr`
/// tabulated on Gauss-Legendre nodes in `s`. The radial Fourier transform is
/// then the cosine transform `2√2 ∫_0^∞ cos(λs) A(s) ds`.
#[derive(Debug, Clone)]
pub struct AbelTable {
    s: Vec<f64>,
    weighted: Vec<f64>,
}

impl AbelTable {
    pub fn build<P: RadialProfile + ?Sized>(w: &P) -> Self {
        let r_max = w.r_max();
        if r_max <= 0.0 {
            return Self {
                s: Vec::new(),
                weighted: Vec::new(),
            };
        }
        let panels = ((r_max / 0.05).ceil() as usize).max(8);
        let rule = GaussLegendre::cached(24);
        let h = r_max / panels as f64;
        let mut s_nodes = Vec::with_capacity(panels * rule.len());
        let mut s_weights = Vec::with_capacity(panels * rule.len());
        for p in 0..panels {
            let lo = p as f64 * h;
            for (x, wx) in rule.mapped(lo, lo + h) {
                s_nodes.push(x);
                s_weights.push(wx);
            }
        }
        let inner = GaussLegendre::cached(64);
        let weighted: Vec<f64> = s_nodes
            .par_iter()
            .zip(s_weights.par_iter())
            .map(|(&s, &ws)| ws * abel_at(w, s, r_max, &inner))
            .collect();
        Self {
            s: s_nodes,
            weighted,
        }
    }

    /// `W̃(λ) = 2√2 ∫ cos(λs) A(s) ds`.
    pub fn transform(&self, lambda: f64) -> f64 {
        let acc: f64 = self
            .s
            .iter()
            .zip(&self.weighted)
            .map(|(&s, &a)| a * (lambda * s).cos())
            .sum();
        2.0 * SQRT_2 * acc
    }
}

fn abel_at<P: RadialProfile + ?Sized>(w: &P, s: f64, r_max: f64, rule: &GaussLegendre) -> f64 {
    // r = s + v², dr = 2v dv; cosh 2r - cosh 2s = 2 sinh(r + s) sinh(v²).
    let vmax = (r_max - s).max(0.0).sqrt();
    if vmax == 0.0 {
        return 0.0;
    }
    let panels = ((vmax / 0.25).ceil() as usize).max(2);
    let h = vmax / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = p as f64 * h;
        for (v, wv) in rule.mapped(lo, lo + h) {
            let v2 = v * v;
            let r = s + v2;
            let g = 2.0 * (r + s).sinh() * v2.sinh();
            acc += wv * w.value(r) * (2.0 * r).sinh() * 2.0 * v / g.sqrt();
        }
    }
    acc
}

/// `W̃(λ) = π ∫_0^∞ w(r) Φ_λ(tanh r) sinh 2r dr` through the Abel-cosine route.
pub fn radial_fourier<P: RadialProfile + ?Sized>(w: &P, lambda: f64) -> f64 {
    AbelTable::build(w).transform(lambda)
}

/// The same transform by direct adaptive quadrature against `Φ_λ`; slower,
/// used as an independent route.
pub fn radial_fourier_direct<P: RadialProfile + ?Sized>(
    w: &P,
    lambda: f64,
    tol: f64,
) -> Result<f64, SpecFunError> {
    let r_max = w.r_max();
    if r_max <= 0.0 {
        return Ok(0.0);
    }
    let v = quad::adaptive(
        |r| w.value(r) * mehler_phi00(lambda, r) * (2.0 * r).sinh(),
        0.0,
        r_max,
        &[],
        tol,
        tol,
    )?;
    Ok(PI * v)
}

/// Samples of `W̃` on the nodes of a spectral grid.
#[derive(Debug, Clone)]
pub struct SpectralSamples {
    grid: SpectralGrid,
    values: Vec<f64>,
}

/// Largest `|W̃(λ_max)| / max|W̃|` accepted as resolved.
pub const SPECTRAL_TAIL_RATIO: f64 = 1e-3;

impl SpectralSamples {
    pub fn from_table(table: &AbelTable, grid: &SpectralGrid) -> Self {
        let values = grid
            .nodes()
            .par_iter()
            .map(|&l| table.transform(l))
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &SpectralGrid, values: Vec<f64>) -> Result<Self, SpecFunError> {
        if values.len() != grid.len() {
            return Err(SpecFunError::Domain(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Tail ratio `|W̃(λ_max)| / max|W̃|`, or 0 for an identically zero transform.
    pub fn tail_ratio(&self) -> f64 {
        let peak = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return 0.0;
        }
        let tail = self.values.last().map(|v| v.abs()).unwrap_or(0.0);
        tail / peak
    }

    pub fn check_resolved(&self) -> Result<(), SpecFunError> {
        let ratio = self.tail_ratio();
        if ratio > SPECTRAL_TAIL_RATIO {
            return Err(SpecFunError::Unresolved {
                lambda_max: self.grid.lambda_max(),
                ratio,
            });
        }
        Ok(())
    }
}

/// Inversion `w(r) = (1/4π) ∫_ℝ W̃(λ) Φ_λ(r) λ tanh(πλ/2) dλ`.
pub fn radial_fourier_invert(samples: &SpectralSamples, r: f64) -> Result<f64, SpecFunError> {
    check_radius(r)?;
    samples.check_resolved()?;
    let grid = samples.grid();
    let integrand: Vec<f64> = grid
        .nodes()
        .par_iter()
        .zip(samples.values().par_iter())
        .map(|(&l, &wt)| wt * mehler_phi00(l, r) * plancherel_weight(l))
        .collect();
    Ok(grid.sum_even(&integrand) / (4.0 * PI))
}
