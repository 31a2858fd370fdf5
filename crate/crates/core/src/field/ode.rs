//! Dormand–Prince 5(4) integrator with FSAL and a PI step-size controller.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow: h = {h:e} < {h_min:e} at t = {t}")]
    StepUnderflow { t: f64, h: f64, h_min: f64 },
    #[error("non-finite derivative at t = {t} (component {index})")]
    NonFinite { t: f64, index: usize },
    #[error("exceeded {0} steps")]
    MaxSteps(usize),
    #[error("invalid integrator setting: {0}")]
    Setting(String),
}

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Take steps of exactly this size (shortened only to land on output
    /// times) and skip error control.
    pub fixed_step: Option<f64>,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-8,
            h_init: None,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
            fixed_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates from `t0` and records the state at each of `t_out`
/// (non-decreasing, all `≥ t0`). `observer` sees every accepted step.
pub fn integrate<S, O>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_out: &[f64],
    opts: &Dopri5Options,
    mut observer: O,
) -> Result<(Vec<Vec<f64>>, OdeStats), OdeError>
where
    S: OdeSystem + ?Sized,
    O: FnMut(f64, &[f64], f64),
{
    let n = sys.dim();
    if y0.len() != n {
        return Err(OdeError::Setting(format!(
            "initial state has {} components, system has {n}",
            y0.len()
        )));
    }
    if t_out.windows(2).any(|w| w[1] < w[0]) || t_out.first().is_some_and(|&t| t < t0) {
        return Err(OdeError::Setting(
            "output times must be non-decreasing and >= t0".into(),
        ));
    }
    if let Some(h) = opts.fixed_step {
        if !(h > 0.0) {
            return Err(OdeError::Setting(format!(
                "fixed step must be positive, got {h}"
            )));
        }
    }

    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    sys.rhs(t, &y, &mut k1);
    stats.rhs_evals += 1;
    check_finite(t, &k1)?;

    let mut h = match (opts.fixed_step, opts.h_init) {
        (Some(h), _) => h,
        (None, Some(h)) => h,
        (None, None) => initial_step(sys, t, &y, &k1, opts, &mut tmp, &mut k2, &mut stats),
    }
    .min(opts.h_max);
    let mut err_prev: f64 = 1e-4;
    let mut out = Vec::with_capacity(t_out.len());

    for &target in t_out {
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(OdeError::MaxSteps(opts.max_steps));
            }
            let remaining = target - t;
            // Land exactly on the output time; avoid a sliver step afterwards.
            let (h_step, last) = if h >= remaining * (1.0 - 1e-12) {
                (remaining, true)
            } else if opts.fixed_step.is_none() && h > 0.5 * remaining {
                (0.5 * remaining, false)
            } else {
                (h, false)
            };
            if opts.fixed_step.is_none() && h_step < opts.h_min && !last {
                return Err(OdeError::StepUnderflow {
                    t,
                    h: h_step,
                    h_min: opts.h_min,
                });
            }

            // Stages.
            for i in 0..n {
                tmp[i] = y[i] + h_step * A21 * k1[i];
            }
            sys.rhs(t + C2 * h_step, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + h_step * (A31 * k1[i] + A32 * k2[i]);
            }
            sys.rhs(t + C3 * h_step, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h_step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            sys.rhs(t + C4 * h_step, &tmp, &mut k4);
            for i in 0..n {
                tmp[i] = y[i] + h_step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            sys.rhs(t + C5 * h_step, &tmp, &mut k5);
            for i in 0..n {
                tmp[i] = y[i]
                    + h_step
                        * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            sys.rhs(t + h_step, &tmp, &mut k6);
            for i in 0..n {
                y_new[i] = y[i]
                    + h_step
                        * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            let t_new = if last { target } else { t + h_step };
            sys.rhs(t_new, &y_new, &mut k7);
            stats.rhs_evals += 6;

            if let Some(hf) = opts.fixed_step {
                check_finite(t_new, &k7)?;
                t = t_new;
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                stats.accepted += 1;
                observer(t, &y, h_step);
                h = hf;
                continue;
            }

            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = h_step
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                // Shrink hard; a non-finite estimate usually means the trial
                // state blew up.
                stats.rejected += 1;
                h = 0.1 * h_step;
                if h < opts.h_min {
                    let idx = k7.iter().position(|v| !v.is_finite()).unwrap_or(0);
                    return Err(OdeError::NonFinite {
                        t: t_new,
                        index: idx,
                    });
                }
                continue;
            }

            if err <= 1.0 {
                t = t_new;
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                stats.accepted += 1;
                observer(t, &y, h_step);
                // PI controller (Hairer & Wanner, β = 0.04).
                let err_c = err.max(1e-10);
                let fac = 0.9 * err_c.powf(-0.17) * err_prev.powf(0.04);
                let fac = fac.clamp(0.2, 10.0);
                h = (h_step * fac).min(opts.h_max);
                err_prev = err_c;
            } else {
                stats.rejected += 1;
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                h = h_step * fac;
                if h < opts.h_min {
                    return Err(OdeError::StepUnderflow {
                        t,
                        h,
                        h_min: opts.h_min,
                    });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn check_finite(t: f64, v: &[f64]) -> Result<(), OdeError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(OdeError::NonFinite { t, index }),
        None => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    f0: &[f64],
    opts: &Dopri5Options,
    y1: &mut [f64],
    f1: &mut [f64],
    stats: &mut OdeStats,
) -> f64 {
    let n = y.len().max(1) as f64;
    let sc = |i: usize| opts.atol + opts.rtol * y[i].abs();
    let d0 = (y
        .iter()
        .enumerate()
        .map(|(i, v)| (v / sc(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let d1 = (f0
        .iter()
        .enumerate()
        .map(|(i, v)| (v / sc(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    for i in 0..y.len() {
        y1[i] = y[i] + h0 * f0[i];
    }
    sys.rhs(t + h0, y1, f1);
    stats.rhs_evals += 1;
    let d2 = (f1
        .iter()
        .zip(f0)
        .enumerate()
        .map(|(i, (a, b))| ((a - b) / sc(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}
