use std::time::Instant;

use super::analysis::sup_norm;
use super::ode::{integrate, Dopri5Options, OdeStats};
use super::{FieldError, FieldGrid, FieldModel, InitialCondition};

/// Slack added to the norm bound to absorb integration error.
pub const BOUND_SLACK: f64 = 1e-6;

/// A time-domain run of a [`FieldModel`].
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub model: &'a FieldModel,
    pub initial: InitialCondition,
    pub times: Vec<f64>,
    pub ode: Dopri5Options,
    /// Fail with [`FieldError::BoundViolated`] when a snapshot leaves the
    /// a-priori envelope.
    pub check_bounds: bool,
}

/// Envelope data recorded during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub w0: f64,
    pub rho: f64,
    pub initial_norm: f64,
    /// Largest `‖V(t)‖ - envelope(t)` over snapshots (negative when inside).
    pub worst_excess: f64,
    /// First accepted step time at which `‖V‖_∞ < ρ`, when starting outside.
    pub entry_time: Option<f64>,
    /// `(1/α) log((2‖V₀‖ - ρ)/ρ)` when starting outside the ball.
    pub entry_bound: Option<f64>,
    /// Size of the step that crossed into the ball.
    pub entry_step: Option<f64>,
}

impl BoundsReport {
    /// The norm envelope `e^{-αt}‖V₀‖ + (ρ/2)(1 - e^{-αt})`.
    pub fn envelope(&self, alpha: f64, t: f64) -> f64 {
        let e = (-alpha * t).exp();
        e * self.initial_norm + 0.5 * self.rho * (1.0 - e)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: FieldGrid,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: OdeStats,
    pub bounds: BoundsReport,
    pub wall_seconds: f64,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl<'a> Simulation<'a> {
    pub fn new(model: &'a FieldModel, initial: InitialCondition, times: Vec<f64>) -> Self {
        Self {
            model,
            initial,
            times,
            ode: Dopri5Options::default(),
            check_bounds: true,
        }
    }

    pub fn run(&self) -> Result<Trajectory, FieldError> {
        let started = Instant::now();
        let model = self.model;
        let grid = model.grid().clone();
        let v0 = self.initial.realize(&grid)?;
        let alpha = model.alpha();
        let w0 = model.w0()?;
        let rho = model.attracting_radius()?;
        let initial_norm = sup_norm(&v0);
        let outside = initial_norm >= rho;
        let mut entry_time = None;
        let mut entry_step = None;

        let (states, stats) = integrate(model, 0.0, &v0, &self.times, &self.ode, |t, y, h| {
            if outside && entry_time.is_none() && sup_norm(y) < rho {
                entry_time = Some(t);
                entry_step = Some(h);
            }
        })?;

        let mut bounds = BoundsReport {
            w0,
            rho,
            initial_norm,
            worst_excess: f64::NEG_INFINITY,
            entry_time,
            entry_bound: outside.then(|| ((2.0 * initial_norm - rho) / rho).ln() / alpha),
            entry_step,
        };
        for (&t, s) in self.times.iter().zip(&states) {
            let norm = sup_norm(s);
            let env = bounds.envelope(alpha, t);
            bounds.worst_excess = bounds.worst_excess.max(norm - env);
            if self.check_bounds && norm > env + BOUND_SLACK {
                return Err(FieldError::BoundViolated {
                    t,
                    norm,
                    bound: env + BOUND_SLACK,
                });
            }
        }
        if self.check_bounds {
            if let (Some(entry), Some(bound), Some(h)) =
                (bounds.entry_time, bounds.entry_bound, bounds.entry_step)
            {
                if entry > bound + h {
                    return Err(FieldError::EntryTime { entry, bound });
                }
            }
        }
        log::debug!(
            "simulation: {} accepted / {} rejected steps, {} rhs evaluations",
            stats.accepted,
            stats.rejected,
            stats.rhs_evals
        );
        Ok(Trajectory {
            grid,
            times: self.times.clone(),
            states,
            stats,
            bounds,
            wall_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// Snapshot times `{0, T/4, T/2, 3T/4, T}`.
pub fn default_snapshots(t_end: f64) -> Vec<f64> {
    (0..=4).map(|k| t_end * k as f64 / 4.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ExternalInput, FiringRate, InputConvention};
    use crate::kernels::RadialKernel;

    fn small_grid() -> FieldGrid {
        FieldGrid::new(0.5, 8, 8).unwrap()
    }

    #[test]
    fn zero_input_shifted_sigmoid_stays_at_rest() {
        let k = RadialKernel::gabor(0.2).unwrap();
        let m = FieldModel::new(
            small_grid(),
            &k,
            FiringRate::ShiftedSigmoid { mu: 10.0 },
            0.1,
            ExternalInput::Zero,
        )
        .unwrap();
        let tr = Simulation::new(&m, InitialCondition::Zero, default_snapshots(100.0))
            .run()
            .unwrap();
        assert!(tr.states.iter().all(|s| s.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn entry_time_respects_logarithmic_bound() {
        let k = RadialKernel::exponential(0.1).unwrap();
        let inp = ExternalInput::GaussianBump {
            i0: 0.1,
            sigma: 0.05,
            convention: InputConvention::SigmaSq,
        };
        let m =
            FieldModel::new(small_grid(), &k, FiringRate::Sigmoid { mu: 10.0 }, 0.1, inp).unwrap();
        let rho = m.attracting_radius().unwrap();
        let sim = Simulation::new(
            &m,
            InitialCondition::Constant(3.0 * rho),
            vec![0.0, 10.0, 40.0],
        );
        let tr = sim.run().unwrap();
        let (e, b) = (
            tr.bounds.entry_time.unwrap(),
            tr.bounds.entry_bound.unwrap(),
        );
        assert!(
            e <= b + tr.bounds.entry_step.unwrap(),
            "entry {e} bound {b}"
        );
        assert!(tr.bounds.worst_excess <= BOUND_SLACK);
    }

    #[test]
    fn fixed_and_adaptive_agree_on_short_gabor_run() {
        let k = RadialKernel::gabor(0.2).unwrap();
        let m = FieldModel::new(
            small_grid(),
            &k,
            FiringRate::Sigmoid { mu: 10.0 },
            0.1,
            ExternalInput::Zero,
        )
        .unwrap();
        let ic = InitialCondition::Noise {
            amplitude: 0.01,
            seed: 3,
        };
        let mut a = Simulation::new(&m, ic.clone(), vec![5.0]);
        a.ode = Dopri5Options {
            rtol: 1e-10,
            atol: 1e-12,
            ..Default::default()
        };
        let mut b = Simulation::new(&m, ic, vec![5.0]);
        b.ode = Dopri5Options {
            fixed_step: Some(0.01),
            ..Default::default()
        };
        let (x, y) = (a.run().unwrap(), b.run().unwrap());
        let diff = x
            .last()
            .iter()
            .zip(y.last())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff}");
    }
}
