//! Radial connectivity kernels `w(d)` on the disk.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::geometry::{dist_disk, DiskPoint};
use crate::quad::{self, GaussLegendre, QuadError};
use crate::specfun::{erf, AbelTable, RadialProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel parameter {name} = {value} violates {constraint}")]
    Parameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("kernel is not integrable against the disk measure: {0}")]
    Integrability(String),
    #[error("unknown kernel family '{0}'")]
    UnknownFamily(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// `e^{-r/b}`.
    Exponential {
        b: f64,
    },
    /// `(1/√b)(1 - 2r²/b²) e^{-r²/b}`.
    Gabor {
        b: f64,
    },
    /// Gabor profile with Gaussian width `b` instead of `√b`:
    /// `(1/√b)(1 - 2r²/b²) e^{-r²/b²}`.
    GaborSquaredWidth {
        b: f64,
    },
    /// `e^{-r²/σ1²}/√(2πσ1²) - A e^{-r²/σ2²}/√(2πσ2²)`.
    DiffGaussians {
        sigma1: f64,
        sigma2: f64,
        a: f64,
    },
    /// Same as `DiffGaussians` with `2σ²` in the exponents.
    MexicanHat3D {
        sigma1: f64,
        sigma2: f64,
        a: f64,
    },
    Zero,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Exponential { .. } => "exponential",
            KernelFamily::Gabor { .. } => "gabor",
            KernelFamily::GaborSquaredWidth { .. } => "gabor_b2",
            KernelFamily::DiffGaussians { .. } => "dog",
            KernelFamily::MexicanHat3D { .. } => "mexican_hat_3d",
            KernelFamily::Zero => "zero",
        }
    }

    fn eval(&self, r: f64) -> f64 {
        match *self {
            KernelFamily::Exponential { b } => (-r / b).exp(),
            KernelFamily::Gabor { b } => {
                (1.0 - 2.0 * r * r / (b * b)) * (-r * r / b).exp() / b.sqrt()
            }
            KernelFamily::GaborSquaredWidth { b } => {
                (1.0 - 2.0 * r * r / (b * b)) * (-r * r / (b * b)).exp() / b.sqrt()
            }
            KernelFamily::DiffGaussians { sigma1, sigma2, a } => {
                gauss(r, sigma1, sigma1 * sigma1) - a * gauss(r, sigma2, sigma2 * sigma2)
            }
            KernelFamily::MexicanHat3D { sigma1, sigma2, a } => {
                gauss(r, sigma1, 2.0 * sigma1 * sigma1)
                    - a * gauss(r, sigma2, 2.0 * sigma2 * sigma2)
            }
            KernelFamily::Zero => 0.0,
        }
    }

    /// Non-increasing upper bound of `|w|` on `[r, ∞)`, used for truncation.
    fn envelope(&self, r: f64) -> f64 {
        match *self {
            KernelFamily::Exponential { b } => (-r / b).exp(),
            KernelFamily::Gabor { b } => {
                (1.0 + 2.0 * r * r / (b * b)) * (-r * r / b).exp() / b.sqrt()
            }
            KernelFamily::GaborSquaredWidth { b } => {
                (1.0 + 2.0 * r * r / (b * b)) * (-r * r / (b * b)).exp() / b.sqrt()
            }
            KernelFamily::DiffGaussians { sigma1, sigma2, a } => {
                gauss(r, sigma1, sigma1 * sigma1) + a * gauss(r, sigma2, sigma2 * sigma2)
            }
            KernelFamily::MexicanHat3D { sigma1, sigma2, a } => {
                gauss(r, sigma1, 2.0 * sigma1 * sigma1)
                    + a * gauss(r, sigma2, 2.0 * sigma2 * sigma2)
            }
            KernelFamily::Zero => 0.0,
        }
    }

    /// Radii in `(0, ∞)` where the profile changes sign.
    pub fn sign_changes(&self) -> Vec<f64> {
        let dog = |s1: f64, s2: f64, a: f64, k: f64| -> Vec<f64> {
            // s1⁻¹ e^{-r²/(k s1²)} = A s2⁻¹ e^{-r²/(k s2²)}
            let lhs = (s2 / (a * s1)).ln();
            let rate = 1.0 / (k * s1 * s1) - 1.0 / (k * s2 * s2);
            if a > 0.0 && lhs > 0.0 && rate > 0.0 {
                vec![(lhs / rate).sqrt()]
            } else {
                Vec::new()
            }
        };
        match *self {
            KernelFamily::Gabor { b } | KernelFamily::GaborSquaredWidth { b } => {
                vec![b / 2f64.sqrt()]
            }
            KernelFamily::DiffGaussians { sigma1, sigma2, a } => dog(sigma1, sigma2, a, 1.0),
            KernelFamily::MexicanHat3D { sigma1, sigma2, a } => dog(sigma1, sigma2, a, 2.0),
            _ => Vec::new(),
        }
    }

    fn validate(&self) -> Result<(), KernelError> {
        let param = |name, value: f64, constraint| {
            Err(KernelError::Parameter {
                name,
                value,
                constraint,
            })
        };
        match *self {
            KernelFamily::Exponential { b } => {
                if !(b > 0.0) {
                    return param("kernel.b", b, "b > 0");
                }
                if !(b < 0.5) {
                    return Err(KernelError::Integrability(format!(
                        "exponential kernel needs b < 0.5 to decay faster than the e^{{2r}} growth of the measure, got b = {b}"
                    )));
                }
            }
            KernelFamily::Gabor { b } | KernelFamily::GaborSquaredWidth { b } => {
                if !(b > 0.0 && b.is_finite()) {
                    return param("kernel.b", b, "b > 0");
                }
            }
            KernelFamily::DiffGaussians { sigma1, sigma2, a }
            | KernelFamily::MexicanHat3D { sigma1, sigma2, a } => {
                if !(sigma1 > 0.0) {
                    return param("kernel.sigma1", sigma1, "sigma1 > 0");
                }
                if !(sigma2 >= sigma1 && sigma2.is_finite()) {
                    return param("kernel.sigma2", sigma2, "sigma1 <= sigma2");
                }
                if !(0.0..=1.0).contains(&a) {
                    return param("kernel.A", a, "0 <= A <= 1");
                }
            }
            KernelFamily::Zero => {}
        }
        Ok(())
    }
}

fn gauss(r: f64, sigma: f64, denom: f64) -> f64 {
    (-r * r / denom).exp() / (2.0 * PI * sigma * sigma).sqrt()
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelFamily::Exponential { b }
            | KernelFamily::Gabor { b }
            | KernelFamily::GaborSquaredWidth { b } => write!(f, "{}(b={b})", self.name()),
            KernelFamily::DiffGaussians { sigma1, sigma2, a }
            | KernelFamily::MexicanHat3D { sigma1, sigma2, a } => {
                write!(
                    f,
                    "{}(sigma1={sigma1}, sigma2={sigma2}, A={a})",
                    self.name()
                )
            }
            KernelFamily::Zero => write!(f, "zero"),
        }
    }
}

/// An admissible radial kernel `c · w(r)` with lazily cached norm and
/// spectral data.
#[derive(Debug)]
pub struct RadialKernel {
    family: KernelFamily,
    scale: f64,
    r_max: f64,
    l1: OnceLock<f64>,
    abel: OnceLock<Arc<AbelTable>>,
}

impl Clone for RadialKernel {
    fn clone(&self) -> Self {
        let k = Self {
            family: self.family,
            scale: self.scale,
            r_max: self.r_max,
            l1: OnceLock::new(),
            abel: OnceLock::new(),
        };
        if let Some(v) = self.l1.get() {
            let _ = k.l1.set(*v);
        }
        if let Some(t) = self.abel.get() {
            let _ = k.abel.set(t.clone());
        }
        k
    }
}

/// Truncation threshold for `|w(r)| sinh 2r` relative to its peak.
const TRUNCATION_TOL: f64 = 1e-15;
const R_CAP: f64 = 200.0;

impl RadialKernel {
    pub fn new(family: KernelFamily) -> Result<Self, KernelError> {
        family.validate()?;
        let r_max = truncation_radius(&family)?;
        Ok(Self {
            family,
            scale: 1.0,
            r_max,
            l1: OnceLock::new(),
            abel: OnceLock::new(),
        })
    }

    pub fn exponential(b: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Exponential { b })
    }

    pub fn gabor(b: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Gabor { b })
    }

    pub fn gabor_squared_width(b: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::GaborSquaredWidth { b })
    }

    pub fn diff_gaussians(sigma1: f64, sigma2: f64, a: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::DiffGaussians { sigma1, sigma2, a })
    }

    pub fn mexican_hat_3d(sigma1: f64, sigma2: f64, a: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::MexicanHat3D { sigma1, sigma2, a })
    }

    pub fn zero() -> Self {
        Self::new(KernelFamily::Zero).expect("zero kernel is admissible")
    }

    /// The kernel multiplied by a constant.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            family: self.family,
            scale: self.scale * c,
            r_max: self.r_max,
            l1: OnceLock::new(),
            abel: OnceLock::new(),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, KernelFamily::Zero) || self.scale == 0.0
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.scale * self.family.eval(r)
    }

    pub fn truncation_radius(&self) -> f64 {
        self.r_max
    }

    /// `‖w‖_{L¹} = π ∫_0^∞ |w(r)| sinh 2r dr`.
    pub fn l1_norm(&self) -> Result<f64, KernelError> {
        if let Some(v) = self.l1.get() {
            return Ok(*v);
        }
        let v = self.radial_integral(|x| x.abs())?;
        Ok(*self.l1.get_or_init(|| v))
    }

    /// `π ∫_0^∞ w(r) sinh 2r dr`, the integral of the kernel over the disk.
    pub fn disk_integral(&self) -> Result<f64, KernelError> {
        self.radial_integral(|x| x)
    }

    fn radial_integral<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64, KernelError> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let breaks = self.family.sign_changes();
        let v = quad::adaptive(
            |r| g(self.eval(r)) * (2.0 * r).sinh(),
            0.0,
            self.r_max,
            &breaks,
            1e-14,
            1e-12,
        )?;
        Ok(PI * v)
    }

    /// Abel transform table behind the radial Fourier transform, built once.
    pub fn abel_table(&self) -> Arc<AbelTable> {
        self.abel
            .get_or_init(|| Arc::new(AbelTable::build(self)))
            .clone()
    }

    /// Radial Fourier transform `W̃(λ)`.
    pub fn fourier(&self, lambda: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.abel_table().transform(lambda)
    }
}

impl RadialProfile for RadialKernel {
    fn value(&self, r: f64) -> f64 {
        self.eval(r)
    }

    fn r_max(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.r_max
        }
    }
}

fn truncation_radius(family: &KernelFamily) -> Result<f64, KernelError> {
    match *family {
        KernelFamily::Zero => Ok(0.0),
        KernelFamily::Exponential { b } => {
            // ∫_R^∞ e^{-r/b} sinh 2r dr ≤ e^{-cR}/(2c) with c = 1/b - 2.
            let c = 1.0 / b - 2.0;
            let r = (1.0 / (2.0 * c * TRUNCATION_TOL)).ln() / c;
            if r > R_CAP {
                return Err(KernelError::Integrability(format!(
                    "exponential kernel with b = {b} decays too slowly: truncation radius {r:.1} exceeds {R_CAP}"
                )));
            }
            Ok(r.max(1.0))
        }
        _ => {
            let step = 0.01;
            let n = (R_CAP / step) as usize;
            let vals: Vec<f64> = (0..=n)
                .map(|k| {
                    let r = k as f64 * step;
                    family.envelope(r) * (2.0 * r).sinh()
                })
                .collect();
            let peak = vals.iter().cloned().fold(0.0, f64::max);
            let last = vals
                .iter()
                .rposition(|&v| v > TRUNCATION_TOL * peak)
                .unwrap_or(0);
            if last == n {
                return Err(KernelError::Integrability(format!(
                    "{family} does not decay below {TRUNCATION_TOL:e} of its peak by r = {R_CAP}"
                )));
            }
            Ok((last + 1) as f64 * step)
        }
    }
}

/// Direct 2D quadrature of `Ξ(p) = ∫_D w(d(p, z')) dm(z')`, in hyperbolic
/// polar coordinates about the origin (not about `p`).
pub fn xi_invariance(kernel: &RadialKernel, p: DiskPoint) -> Result<f64, KernelError> {
    if kernel.is_zero() {
        return Ok(0.0);
    }
    let (rho_p, _) = p.to_polar();
    let reach = kernel.truncation_radius();
    let lo = (rho_p - reach).max(0.0);
    let hi = rho_p + reach;
    let mut breaks = vec![lo, rho_p, hi];
    breaks.retain(|&b| b >= lo && b <= hi);
    breaks.dedup();
    let rule = GaussLegendre::cached(16);
    let panels_per_piece = 48;
    let n_phi = 2048;
    let h_phi = TAU / n_phi as f64;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let h = (b - a) / panels_per_piece as f64;
        for k in 0..panels_per_piece {
            let a0 = a + k as f64 * h;
            for (rho, wr) in rule.mapped(a0, a0 + h) {
                let t = rho.tanh();
                let mut ring = 0.0;
                for j in 0..n_phi {
                    let phi = j as f64 * h_phi;
                    let q = DiskPoint::new(t * phi.cos(), t * phi.sin())
                        .map_err(|e| KernelError::Integrability(e.to_string()))?;
                    ring += kernel.eval(dist_disk(p, q));
                }
                total += wr * ring * h_phi * 0.5 * (2.0 * rho).sinh();
            }
        }
    }
    Ok(total)
}

/// Closed form `W̄ = (π^{3/2}/2)(σ1 e^{2σ1²} erf(√2 σ1) - A σ2 e^{2σ2²} erf(√2 σ2))`
/// for the three-dimensional Mexican hat.
pub fn mexican_hat_wbar(sigma1: f64, sigma2: f64, a: f64) -> Result<f64, KernelError> {
    KernelFamily::MexicanHat3D { sigma1, sigma2, a }.validate()?;
    let term = |s: f64| s * (2.0 * s * s).exp() * erf(2f64.sqrt() * s);
    Ok(0.5 * PI.powf(1.5) * (term(sigma1) - a * term(sigma2)))
}

/// Parse a family from config values.
pub fn family_from_name(
    name: &str,
    b: Option<f64>,
    sigma1: Option<f64>,
    sigma2: Option<f64>,
    a: Option<f64>,
) -> Result<KernelFamily, KernelError> {
    let need = |v: Option<f64>, key: &'static str| {
        v.ok_or(KernelError::Parameter {
            name: key,
            value: f64::NAN,
            constraint: "required for this family",
        })
    };
    Ok(match name {
        "exponential" => KernelFamily::Exponential {
            b: need(b, "kernel.b")?,
        },
        "gabor" => KernelFamily::Gabor {
            b: need(b, "kernel.b")?,
        },
        "gabor_b2" => KernelFamily::GaborSquaredWidth {
            b: need(b, "kernel.b")?,
        },
        "dog" | "diff_gaussians" => KernelFamily::DiffGaussians {
            sigma1: need(sigma1, "kernel.sigma1")?,
            sigma2: need(sigma2, "kernel.sigma2")?,
            a: need(a, "kernel.A")?,
        },
        "mexican_hat_3d" => KernelFamily::MexicanHat3D {
            sigma1: need(sigma1, "kernel.sigma1")?,
            sigma2: need(sigma2, "kernel.sigma2")?,
            a: need(a, "kernel.A")?,
        },
        "zero" => KernelFamily::Zero,
        other => return Err(KernelError::UnknownFamily(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert_eq!(RadialKernel::exponential(0.2).unwrap().eval(0.0), 1.0);
        let b = 0.3;
        assert!(RadialKernel::gabor(b).unwrap().eval(b / 2f64.sqrt()).abs() < 1e-14);
        let g2 = RadialKernel::gabor_squared_width(b).unwrap();
        assert!(g2.eval(b / 2f64.sqrt()).abs() < 1e-14);
        assert!((g2.eval(b) + (-1.0f64).exp() / b.sqrt()).abs() < 1e-15);
        let w = RadialKernel::diff_gaussians(0.1, 0.2, 1.0).unwrap();
        let want = 1.0 / (2.0 * PI * 0.01f64).sqrt() - 1.0 / (2.0 * PI * 0.04f64).sqrt();
        assert!((w.eval(0.0) - want).abs() < 1e-14);
    }

    #[test]
    fn admissibility_is_enforced() {
        assert!(matches!(
            RadialKernel::exponential(0.9),
            Err(KernelError::Integrability(_))
        ));
        assert!(matches!(
            RadialKernel::exponential(0.5),
            Err(KernelError::Integrability(_))
        ));
        assert!(RadialKernel::exponential(-1.0).is_err());
        assert!(RadialKernel::gabor(0.0).is_err());
        assert!(RadialKernel::diff_gaussians(0.3, 0.2, 1.0).is_err());
        assert!(RadialKernel::diff_gaussians(0.1, 0.2, 1.5).is_err());
        assert!(RadialKernel::exponential(0.45).is_ok());
    }

    #[test]
    fn l1_norm_examples() {
        assert_eq!(RadialKernel::zero().l1_norm().unwrap(), 0.0);
        let b = 0.2;
        let w = RadialKernel::exponential(b).unwrap();
        // π ∫ e^{-r/b} sinh 2r dr = (π/2)(1/(1/b - 2) - 1/(1/b + 2))
        let want = 0.5 * PI * (1.0 / (1.0 / b - 2.0) - 1.0 / (1.0 / b + 2.0));
        assert!((w.l1_norm().unwrap() - want).abs() < 1e-12);
        let g = RadialKernel::gabor(0.2).unwrap();
        let n = g.l1_norm().unwrap();
        assert!((g.scaled(-2.5).l1_norm().unwrap() - 2.5 * n).abs() < 1e-12 * n);
        assert!(n > g.disk_integral().unwrap().abs());
    }

    #[test]
    fn sign_changes_match_a_scan() {
        for k in [
            RadialKernel::gabor(0.2).unwrap(),
            RadialKernel::gabor(0.4).unwrap(),
            RadialKernel::gabor_squared_width(0.2).unwrap(),
            RadialKernel::diff_gaussians(0.1, 0.2, 1.0).unwrap(),
            RadialKernel::mexican_hat_3d(0.1, 0.2, 1.0).unwrap(),
        ] {
            let mut flips = Vec::new();
            let mut prev = k.eval(0.0);
            for i in 1..20000 {
                let r = i as f64 * 1e-4;
                let v = k.eval(r);
                if v.signum() != prev.signum() && v != 0.0 {
                    flips.push(r);
                }
                prev = if v != 0.0 { v } else { prev };
            }
            assert_eq!(flips.len(), 1, "{:?}", k.family());
            let analytic = k.family().sign_changes();
            assert!((flips[0] - analytic[0]).abs() < 2e-4);
        }
        assert!(RadialKernel::exponential(0.3)
            .unwrap()
            .family()
            .sign_changes()
            .is_empty());
    }

    #[test]
    fn xi_is_independent_of_the_centre() {
        let w = RadialKernel::diff_gaussians(0.1, 0.2, 1.0).unwrap();
        let at_origin = xi_invariance(&w, DiskPoint::ORIGIN).unwrap();
        let radial = w.disk_integral().unwrap();
        assert!((at_origin - radial).abs() < 1e-6 * radial.abs());
        let p = DiskPoint::from_polar(0.5, 2.0).unwrap();
        let at_p = xi_invariance(&w, p).unwrap();
        assert!((at_p - at_origin).abs() < 1e-3 * at_origin.abs());
        assert_eq!(xi_invariance(&RadialKernel::zero(), p).unwrap(), 0.0);
    }

    #[test]
    fn mexican_hat_wbar_examples() {
        assert!(mexican_hat_wbar(0.15, 0.15, 1.0).unwrap().abs() < 1e-12);
        let s: f64 = 0.3;
        let single = 0.5 * PI.powf(1.5) * s * (2.0 * s * s).exp() * erf(2f64.sqrt() * s);
        assert!((mexican_hat_wbar(s, 0.5, 0.0).unwrap() - single).abs() < 1e-15);
        assert!(mexican_hat_wbar(0.3, 0.2, 1.0).is_err());
    }

    #[test]
    fn family_parsing() {
        assert_eq!(
            family_from_name("gabor", Some(0.2), None, None, None).unwrap(),
            KernelFamily::Gabor { b: 0.2 }
        );
        assert_eq!(
            family_from_name("gabor_b2", Some(0.2), None, None, None).unwrap(),
            KernelFamily::GaborSquaredWidth { b: 0.2 }
        );
        assert!(family_from_name("exponential", None, None, None, None).is_err());
        assert!(matches!(
            family_from_name("cauchy", None, None, None, None),
            Err(KernelError::UnknownFamily(_))
        ));
    }

    proptest! {
        #[test]
        fn kernels_are_finite_and_continuous(r in 0.0f64..5.0, b in 0.05f64..0.45) {
            for k in [RadialKernel::exponential(b).unwrap(), RadialKernel::gabor(b).unwrap()] {
                let v = k.eval(r);
                prop_assert!(v.is_finite());
                prop_assert!((k.eval(r + 1e-9) - v).abs() < 1e-6);
            }
            prop_assert!(RadialKernel::exponential(b).unwrap().eval(r) > 0.0);
        }
    }
}
