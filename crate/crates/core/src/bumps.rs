//! Radially symmetric stationary pulses of the Heaviside-limit field
//! `αV = w ∗ H(V - κ) + I`, their existence curve `N(ω)` and the linear
//! stability spectrum.
//!
//! Radii are geodesic (`z = tanh r · e^{iθ}`). The input is the Gaussian
//! `I(r) = 𝓘 e^{-r²/(2σ²)}`.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{KernelError, RadialKernel};
use crate::quad::GaussLegendre;
use crate::specfun::{
    mehler_phi11, plancherel_weight, MehlerTable, SpecFunError, SpectralGrid, SpectralSamples,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BumpError {
    #[error("bump parameter {name} = {value} violates {constraint}")]
    Parameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("N(omega) - alpha*kappa has no sign change on [{lo}, {hi}] ({samples} samples)")]
    NoRoot { lo: f64, hi: f64, samples: usize },
    #[error("bump at omega = {omega} is inconsistent: {reason}")]
    Consistency { omega: f64, reason: String },
    #[error("stability is indeterminate at omega = {omega}: |N'| = {n_prime:e} is below {floor:e}")]
    Indeterminate { omega: f64, n_prime: f64, floor: f64 },
    #[error("stability verdicts disagree at omega = {omega}: identity N' = {identity:e}, finite difference N' = {numeric:e}")]
    SignMismatch {
        omega: f64,
        identity: f64,
        numeric: f64,
    },
    #[error(transparent)]
    Spectral(#[from] SpecFunError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Spectral grid used for bump computations unless overridden.
pub const BUMP_LAMBDA_MAX: f64 = 200.0;
pub const BUMP_LAMBDA_NODES: usize = 2000;
/// Gauss-Legendre nodes for the `θ'` integrals on `[0, π]`.
pub const THETA_NODES: usize = 256;
/// `|N'(ω)|` below this is reported as indeterminate.
pub const N_PRIME_FLOOR: f64 = 1e-8;
/// Root tolerance on `|N(ω) - ακ|`.
pub const ROOT_TOL: f64 = 1e-8;

/// Parameters of the stationary-pulse problem together with the kernel's
/// transform sampled on the spectral grid.
#[derive(Debug, Clone)]
pub struct BumpConfig {
    alpha: f64,
    kappa: f64,
    kernel: RadialKernel,
    input_amplitude: f64,
    input_sigma: f64,
    samples: SpectralSamples,
    // `w_k W̃(λ_k) λ_k tanh(πλ_k/2)` per node.
    weighted: Vec<f64>,
}

impl BumpConfig {
    pub fn new(
        alpha: f64,
        kappa: f64,
        kernel: RadialKernel,
        input_amplitude: f64,
        input_sigma: f64,
    ) -> Result<Self, BumpError> {
        let grid = SpectralGrid::new(BUMP_LAMBDA_MAX, BUMP_LAMBDA_NODES)?;
        Self::with_grid(alpha, kappa, kernel, input_amplitude, input_sigma, &grid)
    }

    pub fn with_grid(
        alpha: f64,
        kappa: f64,
        kernel: RadialKernel,
        input_amplitude: f64,
        input_sigma: f64,
        grid: &SpectralGrid,
    ) -> Result<Self, BumpError> {
        let positive = |name, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(BumpError::Parameter {
                    name,
                    value,
                    constraint: "must be finite and > 0",
                })
            }
        };
        positive("alpha", alpha)?;
        positive("input.sigma", input_sigma)?;
        if !kappa.is_finite() {
            return Err(BumpError::Parameter {
                name: "kappa",
                value: kappa,
                constraint: "must be finite",
            });
        }
        if !(input_amplitude >= 0.0 && input_amplitude.is_finite()) {
            return Err(BumpError::Parameter {
                name: "input.amplitude",
                value: input_amplitude,
                constraint: "must be finite and >= 0",
            });
        }
        let samples = SpectralSamples::from_table(&kernel.abel_table(), grid);
        if !kernel.is_zero() {
            samples.check_resolved()?;
        }
        let weighted = grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .zip(samples.values())
            .map(|((&l, &w), &wt)| w * wt * plancherel_weight(l))
            .collect();
        Ok(Self {
            alpha,
            kappa,
            kernel,
            input_amplitude,
            input_sigma,
            samples,
            weighted,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn kernel(&self) -> &RadialKernel {
        &self.kernel
    }

    pub fn input_amplitude(&self) -> f64 {
        self.input_amplitude
    }

    pub fn input_sigma(&self) -> f64 {
        self.input_sigma
    }

    pub fn spectral(&self) -> &SpectralGrid {
        self.samples.grid()
    }

    pub fn spectral_tail_ratio(&self) -> f64 {
        self.samples.tail_ratio()
    }

    /// A copy with a different input amplitude, reusing the spectral samples.
    pub fn with_input_amplitude(&self, amplitude: f64) -> Result<Self, BumpError> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(BumpError::Parameter {
                name: "input.amplitude",
                value: amplitude,
                constraint: "must be finite and >= 0",
            });
        }
        Ok(Self {
            input_amplitude: amplitude,
            ..self.clone()
        })
    }

    /// `I(r) = 𝓘 e^{-r²/(2σ²)}`.
    pub fn input(&self, r: f64) -> f64 {
        self.input_amplitude * (-r * r / (2.0 * self.input_sigma.powi(2))).exp()
    }

    /// `𝒟(ω) = |I'(ω)| = 𝓘 (ω/σ²) e^{-ω²/(2σ²)}`.
    pub fn input_slope(&self, omega: f64) -> f64 {
        self.input(omega) * omega / self.input_sigma.powi(2)
    }

    /// Spectral sum `2 Σ_k weighted_k f(λ_k)`.
    fn spectral_sum<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let nodes = self.spectral().nodes();
        2.0 * nodes
            .iter()
            .zip(&self.weighted)
            .map(|(&l, &w)| w * f(l))
            .sum::<f64>()
    }

    fn table(&self, t: f64) -> MehlerTable {
        MehlerTable::new(t, self.spectral().lambda_max())
    }
}

fn check_omega(omega: f64) -> Result<(), BumpError> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(BumpError::Parameter {
            name: "omega",
            value: omega,
            constraint: "must be finite and > 0",
        })
    }
}

fn check_radius(r: f64) -> Result<(), BumpError> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(BumpError::Parameter {
            name: "r",
            value: r,
            constraint: "must be finite and >= 0",
        })
    }
}

/// `M(r, ω) = ∫_{B(0,ω)} w(d(z_r, z')) dm(z')` by the spectral formula
/// `¼ sinh²ω cosh²ω ∫_ℝ W̃(λ) Φ_λ(r) Φ_λ^{(1,1)}(ω) λ tanh(πλ/2) dλ`.
pub fn m_of_r_omega(cfg: &BumpConfig, r: f64, omega: f64) -> Result<f64, BumpError> {
    check_radius(r)?;
    check_omega(omega)?;
    let pre = 0.25 * (omega.sinh() * omega.cosh()).powi(2);
    let at_omega = cfg.table(omega);
    let sum = if r == omega {
        cfg.spectral_sum(|l| {
            let (p00, p11) = at_omega.eval(l);
            p00 * p11
        })
    } else {
        let at_r = cfg.table(r);
        cfg.spectral_sum(|l| at_r.eval(l).0 * at_omega.eval(l).1)
    };
    Ok(pre * sum)
}

/// `Ψ_λ(ω) = ∫_{B(0,ω)} e^{(iλ+1)⟨z,1⟩} dm(z) = π sinh²ω cosh²ω Φ_λ^{(1,1)}(ω)`.
pub fn psi_lambda(lambda: f64, omega: f64) -> Result<f64, BumpError> {
    check_radius(omega)?;
    if omega == 0.0 {
        return Ok(0.0);
    }
    Ok(PI * (omega.sinh() * omega.cosh()).powi(2) * mehler_phi11(lambda, omega))
}

/// `-∂M/∂r (r, ω)` as the flux of `w(d(0, ·))` through the boundary of the
/// ball of radius `ω` centred at distance `r` from the origin:
/// `-½ sinh 2ω ∫_0^{2π} w(d(θ)) cos θ dθ`, where `θ` is measured at the
/// centre from the direction pointing away from the origin.
pub fn m_r_at(cfg: &BumpConfig, r: f64, omega: f64) -> Result<f64, BumpError> {
    check_radius(r)?;
    check_omega(omega)?;
    // sinh² d = sinh²(r - ω) + sinh 2r sinh 2ω cos²(θ/2).
    let (a, c) = ((r - omega).sinh().powi(2), (2.0 * r).sinh() * (2.0 * omega).sinh());
    let flux = GaussLegendre::cached(THETA_NODES).integrate(0.0, PI, |th| {
        let d = (a + c * (0.5 * th).cos().powi(2)).sqrt().asinh();
        cfg.kernel.eval(d) * th.cos()
    });
    Ok(-(2.0 * omega).sinh() * flux)
}

/// `ℳ_r(ω) = -∂M/∂r` at `r = ω`, by the boundary flux of [`m_r_at`].
pub fn m_r(cfg: &BumpConfig, omega: f64) -> Result<f64, BumpError> {
    m_r_at(cfg, omega, omega)
}

/// `ℳ_r(ω)` by the spectral formula
/// `(1/64) sinh³(2ω) ∫_ℝ W̃(λ)(1+λ²) Φ_λ^{(1,1)}(ω)² λ tanh(πλ/2) dλ`.
///
/// The integrand decays only like `λ^{-3}` for kernels with a cusp at the
/// origin, so truncation at `λ_max` leaves a relative error near
/// `1e-3` for the exponential kernel on the default grid.
pub fn m_r_spectral(cfg: &BumpConfig, omega: f64) -> Result<f64, BumpError> {
    check_omega(omega)?;
    let pre = (2.0 * omega).sinh().powi(3) / 64.0;
    let table = cfg.table(omega);
    Ok(pre * cfg.spectral_sum(|l| (1.0 + l * l) * table.eval(l).1.powi(2)))
}

/// Geodesic distance between `tanh ω` and `tanh ω · e^{2iθ'}`.
fn chord_distance(t: f64, theta: f64) -> f64 {
    let s = theta.sin();
    let num = 2.0 * t * s.abs();
    let den = ((1.0 - t * t).powi(2) + 4.0 * t * t * s * s).sqrt();
    (num / den).min(1.0 - f64::EPSILON).atanh()
}

/// `∫_0^π w(d(θ')) cos(2nθ') dθ'` on the circle of radius `ω`.
fn circle_moment(kernel: &RadialKernel, omega: f64, n: usize) -> f64 {
    let t = omega.tanh();
    GaussLegendre::cached(THETA_NODES).integrate(0.0, PI, |th| {
        kernel.eval(chord_distance(t, th)) * (2.0 * n as f64 * th).cos()
    })
}

/// `𝒲₀(ω) = sinh 2ω ∫_0^π w(d(θ')) dθ'`, the kernel mass on the circle of
/// radius `ω` seen from a point of that circle.
pub fn w0_omega(cfg: &BumpConfig, omega: f64) -> Result<f64, BumpError> {
    check_omega(omega)?;
    Ok((2.0 * omega).sinh() * circle_moment(&cfg.kernel, omega, 0))
}

/// One sample of the existence curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub omega: f64,
    pub n: f64,
    pub m: f64,
    pub i: f64,
}

/// `N(ω) = M(ω, ω) + I(ω)`.
pub fn n_of_omega(cfg: &BumpConfig, omega: f64) -> Result<f64, BumpError> {
    Ok(m_of_r_omega(cfg, omega, omega)? + cfg.input(omega))
}

pub fn existence_curve(cfg: &BumpConfig, omegas: &[f64]) -> Result<Vec<CurvePoint>, BumpError> {
    omegas
        .iter()
        .map(|&omega| {
            let m = m_of_r_omega(cfg, omega, omega)?;
            let i = cfg.input(omega);
            Ok(CurvePoint {
                omega,
                n: m + i,
                m,
                i,
            })
        })
        .collect()
}

/// Scan range and resolution for [`solve_pulse_width`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

impl Default for RootBracket {
    fn default() -> Self {
        Self {
            lo: 1e-3,
            hi: 3.0,
            samples: 600,
        }
    }
}

/// All roots of `N(ω) = ακ` in the bracket, in increasing order, located by
/// a uniform scan followed by bisection.
pub fn solve_pulse_width(cfg: &BumpConfig, bracket: RootBracket) -> Result<Vec<f64>, BumpError> {
    let RootBracket { lo, hi, samples } = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || samples < 2 {
        return Err(BumpError::Parameter {
            name: "bracket",
            value: hi - lo,
            constraint: "needs 0 < lo < hi and at least 2 samples",
        });
    }
    let target = cfg.alpha * cfg.kappa;
    let f = |w: f64| n_of_omega(cfg, w).map(|n| n - target);
    let grid: Vec<f64> = (0..samples)
        .map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.par_iter().map(|&w| f(w)).collect::<Result<_, _>>()?;
    let mut roots = Vec::new();
    for k in 0..samples - 1 {
        let (mut a, mut b) = (grid[k], grid[k + 1]);
        let (mut fa, fb) = (values[k], values[k + 1]);
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb > 0.0 || (fb == 0.0 && k + 1 < samples - 1) {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let fm = f(mid)?;
            if fa * fm <= 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
            if fm.abs() < ROOT_TOL * 1e-2 || b - a < 1e-15 {
                break;
            }
        }
        let root = 0.5 * (a + b);
        let residual = f(root)?;
        if residual.abs() >= ROOT_TOL {
            return Err(BumpError::Consistency {
                omega: root,
                reason: format!("bisection stalled with |N - alpha*kappa| = {residual:e}"),
            });
        }
        roots.push(root);
    }
    if roots.is_empty() {
        return Err(BumpError::NoRoot { lo, hi, samples });
    }
    Ok(roots)
}

/// A stationary pulse of half-width `ω` with its radial profile and the
/// quantities entering its stability.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSolution {
    pub omega: f64,
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    /// `ℳ_r(ω) = -∂M/∂r(ω, ω)`.
    pub m_r: f64,
    pub w0_omega: f64,
    /// `𝒟(ω) = |I'(ω)|`.
    pub d_omega: f64,
    /// `|V'(ω)| = (ℳ_r + 𝒟)/α`.
    pub v_prime: f64,
    /// Whether `V` is non-increasing on the radial grid.
    pub monotone: bool,
}

/// Number of profile points inside and outside the pulse.
const PROFILE_INNER: usize = 100;
const PROFILE_OUTER: usize = 300;

/// Radial grid on `[0, max(5ω, 3)]`, quadratically refined towards `ω`.
pub fn profile_grid(omega: f64) -> Vec<f64> {
    let outer = (5.0 * omega).max(3.0);
    let mut r = Vec::with_capacity(PROFILE_INNER + PROFILE_OUTER + 1);
    for k in 0..PROFILE_INNER {
        let s = 1.0 - k as f64 / PROFILE_INNER as f64;
        r.push(omega * (1.0 - s * s));
    }
    for k in 0..=PROFILE_OUTER {
        let s = k as f64 / PROFILE_OUTER as f64;
        r.push(omega + (outer - omega) * s * s);
    }
    r
}

/// Far-field radius at which the profile must have decayed.
pub const FAR_RADIUS: f64 = 5.0;

/// `V(r) = (M(r, ω) + I(r))/α` on `rgrid` (default [`profile_grid`]), with
/// the threshold-crossing structure checked.
pub fn bump_profile(
    cfg: &BumpConfig,
    omega: f64,
    rgrid: Option<&[f64]>,
) -> Result<BumpSolution, BumpError> {
    check_omega(omega)?;
    let default;
    let r: &[f64] = match rgrid {
        Some(g) => g,
        None => {
            default = profile_grid(omega);
            &default
        }
    };
    for &x in r {
        check_radius(x)?;
    }
    let v_at = |x: f64| m_of_r_omega(cfg, x, omega).map(|m| (m + cfg.input(x)) / cfg.alpha);
    let v: Vec<f64> = r.par_iter().map(|&x| v_at(x)).collect::<Result<_, _>>()?;

    let inconsistent = |reason: String| BumpError::Consistency { omega, reason };
    let at_edge = v_at(omega)?;
    if (at_edge - cfg.kappa).abs() > 1e-6 {
        return Err(inconsistent(format!(
            "V(omega) = {at_edge} differs from kappa = {}",
            cfg.kappa
        )));
    }
    for (&x, &y) in r.iter().zip(&v) {
        let bad = (x < omega && y <= cfg.kappa) || (x > omega && y >= cfg.kappa);
        if bad {
            return Err(inconsistent(format!(
                "V({x}) = {y} is on the wrong side of kappa"
            )));
        }
    }
    let far = v_at(FAR_RADIUS)?;
    if far.abs() > 1e-3 * cfg.kappa.abs().max(1e-12) {
        return Err(inconsistent(format!("V({FAR_RADIUS}) = {far:e} has not decayed")));
    }

    let m_r = m_r(cfg, omega)?;
    let d_omega = cfg.input_slope(omega);
    Ok(BumpSolution {
        omega,
        monotone: v.windows(2).all(|p| p[1] <= p[0]),
        r: r.to_vec(),
        v,
        m_r,
        w0_omega: w0_omega(cfg, omega)?,
        d_omega,
        v_prime: (m_r + d_omega) / cfg.alpha,
    })
}

/// Discrete spectrum `β_n` of the linearisation about a pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySpectrum {
    pub beta: Vec<f64>,
    /// `|∫_0^{2π} w sin(nθ) dθ|` scaled like `β_n`; zero up to rounding.
    pub imaginary: Vec<f64>,
    /// The essential spectrum `-α`.
    pub essential: f64,
}

/// `β_n = -α + (sinh 2ω / |V'(ω)|) ∫_0^π w(d(θ')) cos(2nθ') dθ'`
/// for `n = 0..=n_max`.
pub fn stability_spectrum(
    cfg: &BumpConfig,
    sol: &BumpSolution,
    n_max: usize,
) -> Result<StabilitySpectrum, BumpError> {
    let omega = sol.omega;
    let scale = (2.0 * omega).sinh() / sol.v_prime;
    let t = omega.tanh();
    let full = GaussLegendre::cached(2 * THETA_NODES);
    let mut beta = Vec::with_capacity(n_max + 1);
    let mut imaginary = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        beta.push(-cfg.alpha + scale * circle_moment(&cfg.kernel, omega, n));
        // Imaginary part of the full-circle form with e^{-inθ}.
        let sine = full.integrate(0.0, 2.0 * PI, |th| {
            cfg.kernel.eval(chord_distance(t, 0.5 * th)) * (n as f64 * th).sin()
        });
        imaginary.push((0.5 * scale * sine).abs());
    }
    Ok(StabilitySpectrum {
        beta,
        imaginary,
        essential: -cfg.alpha,
    })
}

/// `β_n` from the full-circle integral
/// `-α + (sinh 2ω / 2|V'|) · ½ ∫_0^{2π} w(d(θ)) e^{-inθ} dθ`, real part.
pub fn beta_full_circle(cfg: &BumpConfig, sol: &BumpSolution, n: usize) -> f64 {
    let omega = sol.omega;
    let t = omega.tanh();
    let rule = GaussLegendre::cached(THETA_NODES);
    let f = |th: f64| cfg.kernel.eval(chord_distance(t, 0.5 * th)) * (n as f64 * th).cos();
    let integral = rule.integrate(0.0, PI, f) + rule.integrate(PI, 2.0 * PI, f);
    -cfg.alpha + (2.0 * omega).sinh() / sol.v_prime * 0.5 * integral
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// `𝒲₀(ω) - ℳ_r(ω) - 𝒟(ω)`.
    pub n_prime: f64,
    /// Central-difference derivative of `N`.
    pub n_prime_numeric: f64,
    /// `𝒟 - (𝒲₀ - ℳ_r)`; positive when stable.
    pub margin: f64,
    pub beta0: f64,
}

/// Step of the central difference for `N'`.
pub const N_PRIME_STEP: f64 = 1e-4;

/// Stable iff `𝒟(ω) > 𝒲₀(ω) - ℳ_r(ω)`, equivalently `N'(ω) < 0`.
pub fn stability_check(cfg: &BumpConfig, sol: &BumpSolution) -> Result<StabilityVerdict, BumpError> {
    let omega = sol.omega;
    let n_prime = sol.w0_omega - sol.m_r - sol.d_omega;
    let h = N_PRIME_STEP.min(0.5 * omega);
    let n_prime_numeric =
        (n_of_omega(cfg, omega + h)? - n_of_omega(cfg, omega - h)?) / (2.0 * h);
    if n_prime.abs() < N_PRIME_FLOOR {
        return Err(BumpError::Indeterminate {
            omega,
            n_prime,
            floor: N_PRIME_FLOOR,
        });
    }
    if n_prime.signum() != n_prime_numeric.signum() {
        return Err(BumpError::SignMismatch {
            omega,
            identity: n_prime,
            numeric: n_prime_numeric,
        });
    }
    let margin = sol.d_omega - (sol.w0_omega - sol.m_r);
    Ok(StabilityVerdict {
        stable: n_prime < 0.0,
        n_prime,
        n_prime_numeric,
        margin,
        beta0: -cfg.alpha + sol.w0_omega / sol.v_prime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(amplitude: f64) -> BumpConfig {
        BumpConfig::new(
            1.0,
            0.04,
            RadialKernel::exponential(0.2).unwrap(),
            amplitude,
            0.05,
        )
        .unwrap()
    }

    fn narrow(lo: f64, hi: f64) -> RootBracket {
        RootBracket {
            lo,
            hi,
            samples: 14,
        }
    }

    #[test]
    fn psi_limits_and_parity() {
        assert_eq!(psi_lambda(2.0, 0.0).unwrap(), 0.0);
        assert!(psi_lambda(2.0, 1e-6).unwrap().abs() < 1e-11);
        for (l, w) in [(0.5, 0.3), (3.0, 1.2)] {
            assert_eq!(psi_lambda(l, w).unwrap(), psi_lambda(-l, w).unwrap());
        }
        // Small balls: area π sinh²ω.
        let w: f64 = 1e-3;
        let area = PI * w.sinh().powi(2);
        assert!((psi_lambda(0.0, w).unwrap() / area - 1.0).abs() < 1e-5);
    }

    #[test]
    fn small_ball_limit_and_curve_start() {
        // A smooth kernel: at the cusp of the exponential kernel the
        // truncated spectral inversion converges only like 1/λ_max.
        let k = RadialKernel::gabor_squared_width(0.3).unwrap();
        let smooth = BumpConfig::new(1.0, 0.04, k.clone(), 0.04, 0.05).unwrap();
        let w: f64 = 1e-3;
        let m = m_of_r_omega(&smooth, 0.0, w).unwrap();
        let ratio = m / (PI * w.sinh().powi(2)) / k.eval(0.0);
        assert!((ratio - 1.0).abs() < 1e-2, "{ratio}");

        let c = cfg(0.04);
        let curve = existence_curve(&c, &[1e-4]).unwrap();
        assert!((curve[0].n - 0.04).abs() < 1e-4);
        assert_eq!(curve[0].n, curve[0].m + curve[0].i);
    }

    #[test]
    fn m_decreases_in_r_and_flux_matches_differences() {
        let c = cfg(0.0);
        let h = 1e-4;
        for (r, w) in [(0.05, 0.2), (0.3, 0.2), (0.2, 0.3), (0.7, 0.1), (0.25, 0.25)] {
            let fd = (m_of_r_omega(&c, r + h, w).unwrap() - m_of_r_omega(&c, r - h, w).unwrap())
                / (2.0 * h);
            let flux = m_r_at(&c, r, w).unwrap();
            assert!(fd < 0.0 && flux > 0.0);
            assert!((fd + flux).abs() < 1e-3 * flux, "{r} {w}: {fd} {flux}");
            // The sign of ∂M/∂r is symmetric in (r, ω).
            let swapped = m_r_at(&c, w, r).unwrap();
            assert_eq!(flux.signum(), swapped.signum());
        }
        // Spectral and flux forms of ℳ_r agree to the truncation level.
        for w in [0.1, 0.5] {
            let (a, b) = (m_r(&c, w).unwrap(), m_r_spectral(&c, w).unwrap());
            assert!((a - b).abs() < 2e-3 * a, "{w}: {a} {b}");
        }
    }

    #[test]
    fn no_root_when_curve_stays_above_threshold() {
        let c = cfg(1.0);
        let curve = existence_curve(&c, &[0.1, 0.15, 0.17, 0.2, 0.3]).unwrap();
        assert!(curve.iter().all(|p| p.n > 0.04));
        assert!(matches!(
            solve_pulse_width(&c, narrow(0.05, 0.4)),
            Err(BumpError::NoRoot { .. })
        ));
    }

    #[test]
    fn two_roots_sorted_with_opposite_stability() {
        let c = cfg(0.06);
        let roots = solve_pulse_width(&c, RootBracket {
            lo: 0.01,
            hi: 0.3,
            samples: 30,
        })
        .unwrap();
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!(roots[0] < roots[1]);
        for &w in &roots {
            assert!((n_of_omega(&c, w).unwrap() - 0.04).abs() < ROOT_TOL);
        }
        let verdicts: Vec<StabilityVerdict> = roots
            .iter()
            .map(|&w| stability_check(&c, &bump_profile(&c, w, None).unwrap()).unwrap())
            .collect();
        // The input-dominated narrow pulse is stable, the wide one is not.
        assert!(verdicts[0].stable && verdicts[0].n_prime < 0.0);
        assert!(!verdicts[1].stable && verdicts[1].n_prime > 0.0);
        for v in &verdicts {
            assert_eq!(v.beta0 < 0.0, v.stable);
        }
    }

    #[test]
    fn profile_spectrum_and_algebra() {
        let c = cfg(0.04);
        let roots = solve_pulse_width(&c, narrow(0.12, 0.25)).unwrap();
        assert_eq!(roots.len(), 1);
        let omega = roots[0];
        assert!((omega - 0.18).abs() < 0.02);
        let sol = bump_profile(&c, omega, None).unwrap();
        assert!(sol.monotone);
        let k = sol.r.iter().position(|&x| x == omega).unwrap();
        assert!((sol.v[k] - 0.04).abs() < 1e-6);
        assert!(sol.m_r > 0.0);

        let sp = stability_spectrum(&c, &sol, 10).unwrap();
        assert!(sp.imaginary.iter().all(|&x| x < 1e-12));
        assert!(sp.beta[1..].iter().all(|&b| b <= sp.beta[0]));
        assert_eq!(sp.essential, -1.0);
        for n in 0..=10 {
            assert!((beta_full_circle(&c, &sol, n) - sp.beta[n]).abs() < 1e-10);
        }
        // 𝒲₀(ω) = (β₀ + α)|V'(ω)|.
        assert!(((sp.beta[0] + 1.0) * sol.v_prime - sol.w0_omega).abs() < 1e-12);
        let v = stability_check(&c, &sol).unwrap();
        assert_eq!(v.beta0, sp.beta[0]);
        assert!((v.n_prime - v.n_prime_numeric).abs() < 1e-4 * v.n_prime.abs());
    }

    #[test]
    fn bad_parameters_rejected() {
        let k = RadialKernel::exponential(0.2).unwrap();
        assert!(BumpConfig::new(0.0, 0.04, k.clone(), 0.04, 0.05).is_err());
        assert!(BumpConfig::new(1.0, 0.04, k.clone(), -1.0, 0.05).is_err());
        assert!(BumpConfig::new(1.0, 0.04, k, 0.04, 0.0).is_err());
        let c = cfg(0.04);
        assert!(m_of_r_omega(&c, 0.1, 0.0).is_err());
        assert!(m_of_r_omega(&c, -0.1, 0.2).is_err());
    }
}
