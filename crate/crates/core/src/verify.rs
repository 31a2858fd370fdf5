//! Brute-force oracles for the closed forms used elsewhere in the crate.
//!
//! Every oracle takes a different route from the code it checks: direct
//! quadrature on the disk instead of spectral sums, geodesic polar
//! coordinates about the evaluation point instead of the origin, and
//! Monte-Carlo sampling as a scheme-independent cross-check.

use std::cell::RefCell;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::io::{self, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bumps::{m_of_r_omega, psi_lambda, BumpConfig, BumpError};
use crate::field::io::fmt_f64;
use crate::geometry::{dist_disk, horocyclic_inner, DiskPoint, GeometryError};
use crate::kernels::{mexican_hat_wbar, xi_invariance, KernelError, RadialKernel};
use crate::quad::{self, GaussLegendre, QuadError};
use crate::specfun::{spherical_phi, spherical_phi_with, SpecFunError, SphericalEvalMethod};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("invalid quadrature specification: {0}")]
    Spec(String),
    #[error("parameter {name} = {value} violates {constraint}")]
    Parameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("quadrature tolerance not met: {0}")]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Bump(#[from] BumpError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Gauss-Legendre in the geodesic radius and in the angle.
    TensorGaussLegendre { n_r: usize, n_theta: usize },
    /// Nested adaptive Gauss-Kronrod with the given absolute and relative
    /// tolerance.
    AdaptiveRadial { tol: f64 },
    MonteCarlo { n_samples: usize, seed: u64 },
}

/// Integration domain, all centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `|z| < a`.
    EuclideanBall(f64),
    /// Geodesic radius below `ω`.
    HyperbolicBall(f64),
    /// The whole disk, truncated at geodesic radius `r_max`.
    HalfLine(f64),
}

impl Domain {
    fn radius(&self) -> Result<f64, VerifyError> {
        let bad = |c| Err(VerifyError::Spec(c));
        match *self {
            Domain::EuclideanBall(a) if a > 0.0 && a < 1.0 => Ok(a.atanh()),
            Domain::EuclideanBall(a) => bad(format!("Euclidean radius {a} outside (0, 1)")),
            Domain::HyperbolicBall(r) | Domain::HalfLine(r) if r > 0.0 && r.is_finite() => Ok(r),
            Domain::HyperbolicBall(r) | Domain::HalfLine(r) => {
                bad(format!("geodesic radius {r} must be finite and > 0"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    pub domain: Domain,
}

/// An integral value, with a standard error for Monte-Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Samples per Monte-Carlo stream; stream `k` uses sub-seed `k` of the
/// master seed, so results do not depend on the thread count.
const MC_CHUNK: usize = 8192;

/// `∫ f dm` over the domain with `dm = ½ sinh 2r dr dθ` in geodesic polar
/// coordinates.
pub fn disk_integral<F>(f: F, spec: QuadratureSpec) -> Result<Estimate, VerifyError>
where
    F: Fn(DiskPoint) -> f64 + Sync,
{
    let big_r = spec.domain.radius()?;
    let point = |r: f64, th: f64| DiskPoint::from_polar(r, th);
    match spec.scheme {
        Scheme::TensorGaussLegendre { n_r, n_theta } => {
            if n_r == 0 || n_theta == 0 {
                return Err(VerifyError::Spec("node counts must be positive".into()));
            }
            let rr = GaussLegendre::cached(n_r);
            let rt = GaussLegendre::cached(n_theta);
            let mut total = 0.0;
            for (r, wr) in rr.mapped(0.0, big_r) {
                let mut ring = 0.0;
                for (th, wt) in rt.mapped(0.0, TAU) {
                    ring += wt * f(point(r, th)?);
                }
                total += wr * 0.5 * (2.0 * r).sinh() * ring;
            }
            Ok(Estimate {
                value: total,
                std_error: None,
            })
        }
        Scheme::AdaptiveRadial { tol } => {
            if !(tol > 0.0) {
                return Err(VerifyError::Spec(format!("tolerance {tol} must be > 0")));
            }
            let failure: RefCell<Option<VerifyError>> = RefCell::new(None);
            let value = quad::adaptive(
                |r| {
                    let ring = quad::adaptive(
                        |th| match point(r, th) {
                            Ok(p) => f(p),
                            Err(e) => {
                                failure.borrow_mut().get_or_insert(e.into());
                                0.0
                            }
                        },
                        0.0,
                        TAU,
                        &[],
                        tol,
                        tol,
                    );
                    match ring {
                        Ok(v) => 0.5 * (2.0 * r).sinh() * v,
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e.into());
                            0.0
                        }
                    }
                },
                0.0,
                big_r,
                &[],
                tol,
                tol,
            )?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            Ok(Estimate {
                value,
                std_error: None,
            })
        }
        Scheme::MonteCarlo { n_samples, seed } => {
            if n_samples < 2 {
                return Err(VerifyError::Spec("Monte-Carlo needs at least 2 samples".into()));
            }
            // Radial density ∝ sinh 2r on [0, R]; inverse CDF
            // r = ½ acosh(1 + u (cosh 2R - 1)). The area is π sinh² R.
            let c = (2.0 * big_r).cosh() - 1.0;
            let area = PI * big_r.sinh().powi(2);
            let chunks = n_samples.div_ceil(MC_CHUNK);
            let partial: Vec<Result<(f64, f64), VerifyError>> = (0..chunks)
                .into_par_iter()
                .map(|k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    let n = MC_CHUNK.min(n_samples - k * MC_CHUNK);
                    let (mut s, mut s2) = (0.0, 0.0);
                    for _ in 0..n {
                        let u: f64 = rng.gen();
                        let th: f64 = rng.gen::<f64>() * TAU;
                        let r = 0.5 * (1.0 + u * c).acosh();
                        let v = f(point(r, th)?);
                        s += v;
                        s2 += v * v;
                    }
                    Ok((s, s2))
                })
                .collect();
            let (mut s, mut s2) = (0.0, 0.0);
            for p in partial {
                let (a, b) = p?;
                s += a;
                s2 += b;
            }
            let n = n_samples as f64;
            let mean = s / n;
            let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
            Ok(Estimate {
                value: area * mean,
                std_error: Some(area * (var / n).sqrt()),
            })
        }
    }
}

/// `∫_0^∞ (2πσ²)^{-1/2} e^{-(log Δ)²/σ²} dΔ/Δ`, which equals `1/√2`.
pub fn log_variable_factor(sigma: f64) -> Result<f64, VerifyError> {
    check_sigma(sigma)?;
    let u = 8.0 * sigma;
    let norm = 1.0 / (2.0 * PI * sigma * sigma).sqrt();
    let v = quad::adaptive(
        |d| norm * (-(d.ln() / sigma).powi(2)).exp() / d,
        (-u).exp(),
        u.exp(),
        &[1.0],
        1e-15,
        1e-13,
    )?;
    Ok(v)
}

fn check_sigma(sigma: f64) -> Result<(), VerifyError> {
    if sigma > 0.0 && sigma <= 2.0 {
        Ok(())
    } else {
        Err(VerifyError::Parameter {
            name: "sigma",
            value: sigma,
            constraint: "must lie in (0, 2] for the truncated radial integral",
        })
    }
}

/// `π ∫_0^∞ e^{-x²/(2σ²)} sinh 2x dx` by adaptive quadrature.
fn gaussian_disk_factor(sigma: f64) -> Result<f64, VerifyError> {
    // Past x_max the integrand is below e^{-41} times its scale.
    let s2 = sigma * sigma;
    let x_max = 2.0 * s2 + (4.0 * s2 * s2 + 82.0 * s2).sqrt();
    let v = quad::adaptive(
        |x| (-x * x / (2.0 * s2)).exp() * (2.0 * x).sinh(),
        0.0,
        x_max,
        &[],
        1e-16,
        1e-13,
    )?;
    Ok(PI * v)
}

/// `W̄` of the three-dimensional Mexican hat as the product of the
/// log-variable factor and the disk factor for each Gaussian.
pub fn mexican_hat_oracle(sigma1: f64, sigma2: f64, a: f64) -> Result<f64, VerifyError> {
    check_sigma(sigma1)?;
    check_sigma(sigma2)?;
    let xi = |s: f64| -> Result<f64, VerifyError> {
        Ok(log_variable_factor(s)? * gaussian_disk_factor(s)?)
    };
    Ok(xi(sigma1)? - a * xi(sigma2)?)
}

/// `sinh² d` for the point at geodesic distance `rho` from a point at
/// radius `r`, at angle `phi` measured from the direction pointing away
/// from the origin.
fn sinh2_distance(r: f64, rho: f64, phi: f64) -> f64 {
    (r - rho).sinh().powi(2) + (2.0 * r).sinh() * (2.0 * rho).sinh() * (0.5 * phi).cos().powi(2)
}

/// `∫_{B(0,ω)} w(d(z, z')) dm(z')` for `|z| = tanh r`, in geodesic polar
/// coordinates `(ρ, φ)` about `z`: circles of radius `ρ < ω - r` lie inside
/// the ball, and for `|ω - r| < ρ < ω + r` the arc inside has length
/// `2 arccos c` with `c = (cosh 2r cosh 2ρ - cosh 2ω)/(sinh 2r sinh 2ρ)`.
pub fn m_oracle(kernel: &RadialKernel, r: f64, omega: f64, tol: f64) -> Result<f64, VerifyError> {
    if !(r >= 0.0 && omega >= 0.0) {
        return Err(VerifyError::Parameter {
            name: "radius",
            value: r.min(omega),
            constraint: "must be >= 0",
        });
    }
    if omega == 0.0 || kernel.is_zero() {
        return Ok(0.0);
    }
    let reach = kernel.truncation_radius();
    let density = |rho: f64| kernel.eval(rho) * 0.5 * (2.0 * rho).sinh();
    let mut total = 0.0;
    let inner = (omega - r).max(0.0).min(reach);
    if inner > 0.0 {
        total += TAU * quad::adaptive(density, 0.0, inner, &[], tol * 1e-3, tol)?;
    }
    if r > 0.0 {
        let lo = (omega - r).abs();
        let hi = (omega + r).min(lo.max(reach));
        if hi > lo {
            // ρ = lo + (hi - lo)(1 - cos πv)/2 removes the square-root
            // endpoint behaviour of the arc length.
            let arc = |v: f64| {
                let rho = lo + (hi - lo) * 0.5 * (1.0 - (PI * v).cos());
                let jac = (hi - lo) * 0.5 * PI * (PI * v).sin();
                if rho == 0.0 {
                    return 0.0;
                }
                let c = ((2.0 * r).cosh() * (2.0 * rho).cosh() - (2.0 * omega).cosh())
                    / ((2.0 * r).sinh() * (2.0 * rho).sinh());
                2.0 * c.clamp(-1.0, 1.0).acos() * density(rho) * jac
            };
            total += quad::adaptive(arc, 0.0, 1.0, &[], tol * 1e-3, tol)?;
        }
    }
    Ok(total)
}

/// The same integral as [`m_oracle`], for an arbitrary point `z`, by
/// integrating over the ball about the origin with `spec`.
pub fn m_oracle_at(
    kernel: &RadialKernel,
    z: DiskPoint,
    omega: f64,
    scheme: Scheme,
) -> Result<Estimate, VerifyError> {
    disk_integral(
        |p| kernel.eval(dist_disk(z, p)),
        QuadratureSpec {
            scheme,
            domain: Domain::HyperbolicBall(omega),
        },
    )
}

/// Real and imaginary parts of `∫_{B(0,ω)} e^{(iλ+1)⟨z,1⟩} dm(z)` by tensor
/// Gauss-Legendre quadrature.
pub fn psi_oracle(lambda: f64, omega: f64, n: usize) -> Result<(f64, f64), VerifyError> {
    let one = num_complex::Complex64::new(1.0, 0.0);
    let spec = QuadratureSpec {
        scheme: Scheme::TensorGaussLegendre {
            n_r: n,
            n_theta: 2 * n,
        },
        domain: Domain::HyperbolicBall(omega),
    };
    let h = |p: DiskPoint| horocyclic_inner(p, one).unwrap_or(f64::NAN);
    let re = disk_integral(|p| h(p).exp() * (lambda * h(p)).cos(), spec)?.value;
    let im = disk_integral(|p| h(p).exp() * (lambda * h(p)).sin(), spec)?.value;
    if !(re.is_finite() && im.is_finite()) {
        return Err(VerifyError::Spec("horocyclic inner product undefined".into()));
    }
    Ok((re, im))
}

/// Largest relative residual `|(w ∗ Φ_λ)(z) - W̃(λ) Φ_λ(z)| / |W̃(λ) Φ_λ(z)|`
/// over the given points, with the convolution integrated in geodesic polar
/// coordinates about each point to tolerance `tol`.
pub fn convolution_eigen_oracle(
    kernel: &RadialKernel,
    lambda: f64,
    points: &[DiskPoint],
    tol: f64,
) -> Result<f64, VerifyError> {
    if kernel.is_zero() {
        return Ok(0.0);
    }
    let wt = kernel.fourier(lambda);
    let reach = kernel.truncation_radius();
    let ring_rule = GaussLegendre::cached(96);
    let mut worst: f64 = 0.0;
    for &z in points {
        let (r, _) = z.to_polar();
        let ring = |rho: f64| {
            // Symmetric in φ, so integrate over [0, π] and double.
            2.0 * ring_rule.integrate(0.0, PI, |phi| {
                let d = sinh2_distance(r, rho, phi).sqrt().asinh();
                spherical_phi(lambda, d).unwrap_or(f64::NAN)
            })
        };
        let conv = quad::adaptive(
            |rho| kernel.eval(rho) * 0.5 * (2.0 * rho).sinh() * ring(rho),
            0.0,
            reach,
            &kernel.family().sign_changes(),
            tol * 1e-3,
            tol,
        )?;
        let want = wt * spherical_phi(lambda, r)?;
        worst = worst.max((conv - want).abs() / want.abs());
    }
    Ok(worst)
}

/// One row of the verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub main_value: f64,
    pub oracle_value: f64,
    pub rel_err: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Relative error against the oracle; absolute when the oracle is zero.
    pub fn new(check: &str, main_value: f64, oracle_value: f64, tol: f64) -> Self {
        let diff = (main_value - oracle_value).abs();
        let rel_err = if oracle_value == 0.0 {
            diff
        } else {
            diff / oracle_value.abs()
        };
        Self {
            check: check.to_string(),
            main_value,
            oracle_value,
            rel_err,
            tol,
            pass: rel_err <= tol,
        }
    }
}

/// Runs the oracle suite.
pub fn run_suite() -> Result<Vec<CheckRow>, VerifyError> {
    let mut rows = Vec::new();

    rows.push(CheckRow::new(
        "mexican_hat_wbar(0.1,0.2,1)",
        mexican_hat_wbar(0.1, 0.2, 1.0)?,
        mexican_hat_oracle(0.1, 0.2, 1.0)?,
        1e-4,
    ));
    rows.push(CheckRow::new(
        "mexican_hat_wbar(0.1,0.1,1)",
        mexican_hat_wbar(0.1, 0.1, 1.0)?,
        0.0,
        1e-12,
    ));
    rows.push(CheckRow::new(
        "log_variable_factor(0.1)",
        FRAC_1_SQRT_2,
        log_variable_factor(0.1)?,
        1e-8,
    ));

    let omega: f64 = 0.7;
    let area = disk_integral(
        |_| 1.0,
        QuadratureSpec {
            scheme: Scheme::TensorGaussLegendre {
                n_r: 32,
                n_theta: 8,
            },
            domain: Domain::HyperbolicBall(omega),
        },
    )?;
    rows.push(CheckRow::new(
        "ball_area(0.7)",
        PI * omega.sinh().powi(2),
        area.value,
        1e-12,
    ));

    let gauss = |p: DiskPoint| (-(p.to_polar().0 / 0.3).powi(2)).exp();
    let tensor = disk_integral(
        gauss,
        QuadratureSpec {
            scheme: Scheme::TensorGaussLegendre {
                n_r: 64,
                n_theta: 16,
            },
            domain: Domain::HalfLine(3.0),
        },
    )?;
    let mc = disk_integral(
        gauss,
        QuadratureSpec {
            scheme: Scheme::MonteCarlo {
                n_samples: 200_000,
                seed: 7,
            },
            domain: Domain::HalfLine(3.0),
        },
    )?;
    let se = mc.std_error.unwrap_or(f64::INFINITY);
    rows.push(CheckRow::new(
        "gaussian_tensor_vs_monte_carlo",
        tensor.value,
        mc.value,
        3.0 * se / mc.value.abs(),
    ));

    for (l, w) in [(0.0, 0.2), (2.0, 0.5), (5.0, 1.0)] {
        let (re, im) = psi_oracle(l, w, 200)?;
        rows.push(CheckRow::new(
            &format!("psi_lambda({l},{w})"),
            psi_lambda(l, w)?,
            re,
            1e-6,
        ));
        rows.push(CheckRow::new(
            &format!("psi_lambda_imag({l},{w})"),
            im,
            0.0,
            1e-10,
        ));
    }

    for (l, r) in [(0.5, 0.1), (2.0, 1.0), (10.0, 2.5)] {
        rows.push(CheckRow::new(
            &format!("phi_series_vs_boundary({l},{r})"),
            spherical_phi_with(SphericalEvalMethod::SeriesHypergeometric, l, r)?,
            spherical_phi_with(SphericalEvalMethod::BoundaryIntegral, l, r)?,
            1e-8,
        ));
    }

    let exp02 = RadialKernel::exponential(0.2)?;
    let bump = BumpConfig::new(1.0, 0.04, exp02.clone(), 0.04, 0.05)?;
    for (r, w) in [(0.0, 0.18), (0.1, 0.18), (0.18, 0.18), (0.5, 0.3)] {
        rows.push(CheckRow::new(
            &format!("m_of_r_omega({r},{w})"),
            m_of_r_omega(&bump, r, w)?,
            m_oracle(&exp02, r, w, 1e-12)?,
            1e-3,
        ));
    }

    let points: Vec<DiskPoint> = [(0.0, 0.0), (0.3, 1.0)]
        .iter()
        .map(|&(r, t)| DiskPoint::from_polar(r, t))
        .collect::<Result<_, _>>()?;
    rows.push(CheckRow::new(
        "convolution_eigen_residual(0.7)",
        convolution_eigen_oracle(&exp02, 0.7, &points, 1e-9)?,
        0.0,
        1e-3,
    ));

    let dog = RadialKernel::diff_gaussians(0.1, 0.2, 1.0)?;
    rows.push(CheckRow::new(
        "xi_invariance_dog(0.5)",
        xi_invariance(&dog, DiskPoint::new(0.5, 0.0)?)?,
        xi_invariance(&dog, DiskPoint::ORIGIN)?,
        1e-3,
    ));

    Ok(rows)
}

/// Writes `check,main_value,oracle_value,rel_err,tol,pass`.
pub fn write_table<W: Write>(mut out: W, rows: &[CheckRow]) -> io::Result<()> {
    writeln!(out, "check,main_value,oracle_value,rel_err,tol,pass")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.check,
            fmt_f64(r.main_value),
            fmt_f64(r.oracle_value),
            fmt_f64(r.rel_err),
            fmt_f64(r.tol),
            r.pass
        )?;
    }
    Ok(())
}
