//! Stationary solutions: the homogeneous scalar equation, contraction
//! certificates, Picard iteration for `αV = h₁h₂ K S(V) + I`, and decay-rate
//! checks around a stationary state.

use thiserror::Error;

use crate::field::analysis::{max_abs_diff, sup_norm};
use crate::field::ode::{integrate, Dopri5Options, OdeError, OdeSystem};
use crate::field::{FieldError, FieldModel, FiringRate};
use crate::kernels::{KernelError, RadialKernel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StationaryError {
    #[error("Picard iteration diverging: residual grew for {streak} consecutive iterations (residual {residual:e} at iteration {iteration})")]
    Divergence {
        iteration: usize,
        residual: f64,
        streak: usize,
    },
    #[error("Picard iteration stopped after {iterations} iterations with residual {residual:e} > {tol:e}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },
    #[error("initial guess has {got} values, model has {want}")]
    Dimension { got: usize, want: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Consecutive residual increases tolerated before giving up.
pub const DIVERGENCE_STREAK: usize = 10;

struct Homogeneous<'a, F> {
    alpha: f64,
    wbar: f64,
    rate: FiringRate,
    input: &'a F,
}

impl<F: Fn(f64) -> f64> OdeSystem for Homogeneous<'_, F> {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = -self.alpha * y[0] + self.wbar * self.rate.eval(y[0]) + (self.input)(t);
    }
}

/// Integrates `V' = -αV + W̄ S(V) + I(t)` and returns `V` at `times`.
pub fn solve_homogeneous<F: Fn(f64) -> f64>(
    alpha: f64,
    wbar: f64,
    rate: FiringRate,
    input: &F,
    v0: f64,
    times: &[f64],
    opts: &Dopri5Options,
) -> Result<Vec<f64>, StationaryError> {
    let sys = Homogeneous {
        alpha,
        wbar,
        rate,
        input,
    };
    let (states, _) = integrate(&sys, 0.0, &[v0], times, opts, |_, _, _| {})?;
    Ok(states.into_iter().map(|s| s[0]).collect())
}

/// Which slope convention a certificate was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeConvention {
    /// `S(μV)` with a unit-gain sigmoid, `S'_m = 1/4`.
    ExternalGain,
    /// Gain inside `S`; `μ` is reported as 1 and `S'_m` is the composite slope.
    InternalGain,
}

/// Data behind the Banach contraction condition `μ S'_m 𝒲₀ < α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionCertificate {
    pub mu: f64,
    pub s_prime_max: f64,
    pub w0: f64,
    pub alpha: f64,
    pub margin: f64,
    pub convention: SlopeConvention,
}

impl ContractionCertificate {
    pub fn new(mu: f64, s_prime_max: f64, w0: f64, alpha: f64) -> Self {
        Self {
            mu,
            s_prime_max,
            w0,
            alpha,
            margin: alpha - mu * s_prime_max * w0,
            convention: SlopeConvention::ExternalGain,
        }
    }

    /// Certificate for a sigmoid firing rate whose gain `μ` is moved outside
    /// as `S(μV)`; the margin equals the composite-slope margin.
    pub fn for_rate(rate: FiringRate, w0: f64, alpha: f64) -> Self {
        match rate {
            FiringRate::Sigmoid { mu } | FiringRate::ShiftedSigmoid { mu } => {
                Self::new(mu, 0.25, w0, alpha)
            }
            FiringRate::Heaviside { .. } => Self {
                convention: SlopeConvention::InternalGain,
                ..Self::new(1.0, rate.slope_max(), w0, alpha)
            },
        }
    }

    /// Certificate using the kernel's continuous `L¹` norm as `𝒲₀`.
    pub fn for_kernel(
        rate: FiringRate,
        kernel: &RadialKernel,
        alpha: f64,
    ) -> Result<Self, StationaryError> {
        Ok(Self::for_rate(rate, kernel.l1_norm()?, alpha))
    }

    /// Certificate for a discretised model, using its effective `𝒲₀`.
    pub fn for_model(model: &FieldModel) -> Result<Self, StationaryError> {
        Ok(Self::for_rate(model.rate(), model.w0()?, model.alpha()))
    }

    pub fn is_contraction(&self) -> bool {
        self.margin > 0.0
    }

    /// Gain at which the margin vanishes.
    pub fn threshold_mu(&self) -> f64 {
        self.alpha / (self.s_prime_max * self.w0)
    }

    /// Contraction factor `μ S'_m 𝒲₀ / α` of the Picard map.
    pub fn picard_factor(&self) -> f64 {
        self.mu * self.s_prime_max * self.w0 / self.alpha
    }

    /// Exponent of the decay envelope, `μ 𝒲₀ S'_m - α`.
    pub fn decay_rate(&self) -> f64 {
        -self.margin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardResult {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Residual `‖αV - G(V) - I‖_∞` of each iterate, starting with the guess.
    pub residuals: Vec<f64>,
    pub certified: bool,
}

/// Solves `αV = h₁h₂ K S(V) + I` by plain fixed-point iteration
/// `V ← (G(V) + I)/α` starting from `guess`, with the model's static input.
pub fn picard_stationary(
    model: &FieldModel,
    guess: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<PicardResult, StationaryError> {
    picard_with_input(model, &model.input_at(0.0), guess, tol, max_iter)
}

/// [`picard_stationary`] with an explicit input vector in place of the
/// model's input.
pub fn picard_with_input(
    model: &FieldModel,
    input: &[f64],
    guess: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<PicardResult, StationaryError> {
    let n = model.grid().len();
    for len in [guess.len(), input.len()] {
        if len != n {
            return Err(StationaryError::Dimension { got: len, want: n });
        }
    }
    let cert = ContractionCertificate::for_model(model)?;
    if !cert.is_contraction() {
        log::warn!(
            "contraction margin {:.3e} <= 0; Picard iteration is uncertified",
            cert.margin
        );
    }
    let alpha = model.alpha();
    let mut v = guess.to_vec();
    let mut g = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residuals = Vec::new();
    let mut streak = 0;
    for it in 0..=max_iter {
        model.coupling(&v, &mut g);
        for k in 0..n {
            next[k] = (g[k] + input[k]) / alpha;
        }
        let res = alpha * max_abs_diff(&v, &next);
        if let Some(&prev) = residuals.last() {
            streak = if res > prev { streak + 1 } else { 0 };
        }
        residuals.push(res);
        if res < tol {
            return Ok(PicardResult {
                values: v,
                iterations: it,
                residual: res,
                residuals,
                certified: cert.is_contraction(),
            });
        }
        if streak >= DIVERGENCE_STREAK {
            return Err(StationaryError::Divergence {
                iteration: it,
                residual: res,
                streak,
            });
        }
        std::mem::swap(&mut v, &mut next);
    }
    Err(StationaryError::NoConvergence {
        iterations: max_iter,
        residual: *residuals.last().unwrap_or(&f64::NAN),
        tol,
    })
}

/// Comparison of a trajectory against the envelope
/// `‖V(t) - V⁰‖_∞ ≤ e^{(μ𝒲₀S'_m - α)t} ‖V(0) - V⁰‖_∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
    pub envelope: Vec<f64>,
    pub inside: Vec<bool>,
    /// Least-squares slope of `log ‖V(t) - V⁰‖` (over strictly positive
    /// deviations); `None` with fewer than two usable points.
    pub fitted_rate: Option<f64>,
    pub predicted_rate: f64,
}

impl StabilityReport {
    pub fn all_inside(&self) -> bool {
        self.inside.iter().all(|&b| b)
    }
}

pub fn verify_stability_rate(
    times: &[f64],
    states: &[Vec<f64>],
    stationary: &[f64],
    cert: &ContractionCertificate,
    rel_tol: f64,
) -> StabilityReport {
    let deviations: Vec<f64> = states
        .iter()
        .map(|s| max_abs_diff(s, stationary))
        .collect();
    let t0 = times.first().copied().unwrap_or(0.0);
    let x0 = deviations.first().copied().unwrap_or(0.0);
    let rate = cert.decay_rate();
    let envelope: Vec<f64> = times
        .iter()
        .map(|&t| (rate * (t - t0)).exp() * x0)
        .collect();
    let inside = deviations
        .iter()
        .zip(&envelope)
        .map(|(&d, &e)| d <= e * (1.0 + rel_tol))
        .collect();
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&deviations)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    let fitted_rate = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let lm = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
        sxy / sxx
    });
    StabilityReport {
        times: times.to_vec(),
        deviations,
        envelope,
        inside,
        fitted_rate,
        predicted_rate: rate,
    }
}

/// Largest difference between node values, for constancy checks.
pub fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    hi - lo
}

/// `‖αV - G(V) - I‖_∞` for a candidate stationary state.
pub fn stationary_residual(model: &FieldModel, v: &[f64]) -> f64 {
    let mut g = vec![0.0; v.len()];
    model.coupling(v, &mut g);
    let input = model.input_at(0.0);
    let r: Vec<f64> = (0..v.len())
        .map(|k| model.alpha() * v[k] - g[k] - input[k])
        .collect();
    sup_norm(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::analysis::rotate_steps;
    use crate::field::{
        AngularRule, ExternalInput, FieldGrid, InitialCondition, InputConvention, Simulation,
    };
    use crate::kernels::mexican_hat_wbar;
    use num_complex::Complex64;
    use std::f64::consts::TAU;

    fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
        assert!(f(lo) * f(hi) <= 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn tight() -> Dopri5Options {
        Dopri5Options {
            rtol: 1e-11,
            atol: 1e-13,
            ..Default::default()
        }
    }

    #[test]
    fn homogeneous_linear_decay() {
        let v = solve_homogeneous(
            0.3,
            0.0,
            FiringRate::Sigmoid { mu: 1.0 },
            &|_| 0.0,
            2.0,
            &[1.0, 5.0],
            &tight(),
        )
        .unwrap();
        assert!((v[1] - 2.0 * (-1.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn homogeneous_converges_to_scalar_root() {
        let (alpha, wbar, i) = (0.5, 0.8, 0.2);
        let rate = FiringRate::Sigmoid { mu: 1.0 };
        let v = solve_homogeneous(alpha, wbar, rate, &|_| i, 0.0, &[200.0], &tight()).unwrap()[0];
        let root = bisect(|x| alpha * x - wbar * rate.eval(x) - i, -10.0, 10.0);
        assert!((v - root).abs() < 1e-9);

        // Mexican-hat W̄ from the closed form.
        let wbar = mexican_hat_wbar(0.1, 0.2, 1.0).unwrap();
        let rate = FiringRate::Sigmoid { mu: 2.0 };
        let v = solve_homogeneous(0.1, wbar, rate, &|_| 0.05, 0.0, &[800.0], &tight()).unwrap()[0];
        let residual = 0.1 * v - wbar * rate.eval(v) - 0.05;
        assert!(residual.abs() < 1e-10, "{residual}");
    }

    #[test]
    fn certificate_margin_and_threshold() {
        let c = ContractionCertificate::for_rate(FiringRate::Sigmoid { mu: 0.0 }, 3.0, 0.1);
        assert_eq!(c.margin, 0.1);
        let c = ContractionCertificate::for_rate(FiringRate::Sigmoid { mu: 1.0 }, 3.0, 0.1);
        let mu_star = c.threshold_mu();
        let below = ContractionCertificate::for_rate(FiringRate::Sigmoid { mu: 0.99 * mu_star }, 3.0, 0.1);
        let above = ContractionCertificate::for_rate(FiringRate::Sigmoid { mu: 1.01 * mu_star }, 3.0, 0.1);
        assert!(below.is_contraction() && !above.is_contraction());
        // Both conventions give the same margin.
        let internal = 0.1 - FiringRate::Sigmoid { mu: 2.0 }.slope_max() * 3.0;
        let c = ContractionCertificate::for_rate(FiringRate::Sigmoid { mu: 2.0 }, 3.0, 0.1);
        assert!((c.margin - internal).abs() < 1e-15);
    }

    fn model(kernel: RadialKernel, mu: f64, input: ExternalInput) -> FieldModel {
        let g = FieldGrid::new(0.5, 8, 12).unwrap();
        FieldModel::with_rule(
            g,
            &kernel,
            FiringRate::Sigmoid { mu },
            0.1,
            input,
            AngularRule::Periodic,
        )
        .unwrap()
    }

    fn half_threshold_model(input: ExternalInput) -> FieldModel {
        let k = RadialKernel::exponential(0.2).unwrap();
        let probe = model(k.clone(), 1.0, input);
        let mu = 0.5 * ContractionCertificate::for_model(&probe).unwrap().threshold_mu();
        model(k, mu, input)
    }

    #[test]
    fn zero_kernel_gives_input_over_alpha() {
        let inp = ExternalInput::GaussianBump {
            i0: 0.3,
            sigma: 0.2,
            convention: InputConvention::SigmaSq,
        };
        let m = model(RadialKernel::zero(), 5.0, inp);
        let r = picard_stationary(&m, &vec![1.0; m.grid().len()], 1e-12, 100).unwrap();
        let want = m.input_at(0.0);
        for (a, b) in r.values.iter().zip(want) {
            assert_eq!(*a, b / 0.1);
        }
    }

    #[test]
    fn picard_unique_and_monotone() {
        let m = half_threshold_model(ExternalInput::Constant(0.05));
        let n = m.grid().len();
        let tol = 1e-11;
        let a = picard_stationary(&m, &vec![0.0; n], tol, 10_000).unwrap();
        let b = picard_stationary(&m, &vec![10.0; n], tol, 10_000).unwrap();
        assert!(a.certified);
        // Distance to the fixed point is at most residual / (α·margin-ratio).
        let factor = ContractionCertificate::for_model(&m).unwrap().picard_factor();
        let bound = 2.0 * tol / (0.1 * (1.0 - factor));
        assert!(max_abs_diff(&a.values, &b.values) < bound);
        for r in [&a.residuals, &b.residuals] {
            assert!(r.windows(2).skip(1).all(|w| w[1] < w[0]));
            assert!(r[r.len() - 1] / r[r.len() - 2] <= factor + 1e-9);
        }
        assert!(stationary_residual(&m, &a.values) < 2.0 * tol);
    }

    #[test]
    fn constant_input_fixed_point_is_constant_on_rings() {
        let m = half_threshold_model(ExternalInput::Constant(0.05));
        let g = m.grid().clone();
        let fp = picard_stationary(&m, &vec![0.0; g.len()], 1e-12, 10_000).unwrap();
        for i in 0..=g.n() {
            let ring: Vec<f64> = (0..=g.m()).map(|j| fp.values[g.index(i, j)]).collect();
            assert!(spread(&ring) < 1e-10, "ring {i}: {}", spread(&ring));
        }
    }

    #[test]
    fn picard_matches_long_simulation_and_rotation() {
        let inp = ExternalInput::RotatingBump {
            i0: 0.1,
            sigma: 0.1,
            r0: 0.3,
            omega0: 0.0,
            convention: InputConvention::SigmaSq,
        };
        let m = half_threshold_model(inp);
        let fp = picard_stationary(&m, &vec![0.0; m.grid().len()], 1e-10, 10_000).unwrap();
        let mut sim = Simulation::new(&m, InitialCondition::Zero, vec![400.0]);
        sim.ode = tight();
        let tr = sim.run().unwrap();
        let d = max_abs_diff(tr.last(), &fp.values);
        assert!(d < 1e-6, "{d} {}", sup_norm(&fp.values));

        // The state rotated by k angular steps solves the problem with the
        // input rotated by k steps.
        let g = m.grid().clone();
        for steps in [1, 3, 7] {
            let rot_input = rotate_steps(&g, &m.input_at(0.0), steps);
            let rotated = rotate_steps(&g, &fp.values, steps);
            let mut gv = vec![0.0; g.len()];
            m.coupling(&rotated, &mut gv);
            let res = (0..g.len())
                .map(|i| (0.1 * rotated[i] - gv[i] - rot_input[i]).abs())
                .fold(0.0, f64::max);
            assert!(res < 1e-9, "{steps}: {res}");
        }
    }

    #[test]
    fn subgroup_invariant_input_gives_invariant_fixed_point() {
        // Three bumps at angles 0, 2π/3, 4π/3 on an M = 12 grid.
        let m = half_threshold_model(ExternalInput::Zero);
        let g = m.grid().clone();
        let input: Vec<f64> = (0..g.len())
            .map(|x| {
                let (i, j) = g.coords(x);
                let z = Complex64::from_polar(g.radii()[i], g.angles()[j]);
                (0..3)
                    .map(|c| {
                        let centre = Complex64::from_polar(0.3, c as f64 * TAU / 3.0);
                        0.1 * (-(z - centre).norm_sqr() / 0.0225).exp()
                    })
                    .sum()
            })
            .collect();
        assert!(max_abs_diff(&rotate_steps(&g, &input, 4), &input) < 1e-15);
        let fp = picard_with_input(&m, &input, &vec![0.0; g.len()], 1e-12, 10_000).unwrap();
        assert!(max_abs_diff(&rotate_steps(&g, &fp.values, 4), &fp.values) < 1e-10);
        assert!(max_abs_diff(&rotate_steps(&g, &fp.values, 1), &fp.values) > 1e-4);
    }

    #[test]
    fn divergence_is_detected() {
        // Strongly excitatory kernel with a huge gain: Picard oscillates.
        let k = RadialKernel::exponential(0.3).unwrap().scaled(-50.0);
        let g = FieldGrid::new(0.5, 6, 8).unwrap();
        let m = FieldModel::new(g, &k, FiringRate::Sigmoid { mu: 50.0 }, 0.1, ExternalInput::Zero)
            .unwrap();
        let r = picard_stationary(&m, &vec![0.01; m.grid().len()], 1e-12, 5000);
        assert!(matches!(
            r,
            Err(StationaryError::Divergence { .. }) | Err(StationaryError::NoConvergence { .. })
        ));
    }

    #[test]
    fn stability_report_trivial_and_envelope() {
        let cert = ContractionCertificate::new(1.0, 0.25, 0.2, 0.1);
        let s = vec![1.0, 2.0];
        let rep = verify_stability_rate(&[0.0, 1.0], &[s.clone(), s.clone()], &s, &cert, 1e-3);
        assert!(rep.all_inside());
        assert!(rep.fitted_rate.is_none());
        let states: Vec<Vec<f64>> = (0..5)
            .map(|k| vec![1.0 + (-0.2 * k as f64).exp(), 2.0])
            .collect();
        let times: Vec<f64> = (0..5).map(|k| k as f64).collect();
        let rep = verify_stability_rate(&times, &states, &s, &cert, 1e-3);
        assert!(rep.all_inside());
        assert!((rep.fitted_rate.unwrap() + 0.2).abs() < 1e-12);
    }
}
