//! Command execution. Building objects from the configuration happens
//! before any numerical work, so constructor failures surface as
//! configuration errors (exit 2) and everything after as numerical ones
//! (exit 1).

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use thiserror::Error;

use hypfield::bumps::{
    bump_profile, existence_curve, solve_pulse_width, stability_check, stability_spectrum,
    BumpConfig, RootBracket,
};
use hypfield::field::io::{fmt_f64, write_meta, write_trajectory_csv};
use hypfield::field::{
    default_snapshots, AngularRule, Dopri5Options, ExternalInput, FieldGrid, FieldModel,
    FiringRate, InitialCondition, InputConvention, KernelMatrix, Simulation,
};
use hypfield::kernels::{family_from_name, mexican_hat_wbar, KernelFamily, RadialKernel};
use hypfield::specfun::SpectralGrid;
use hypfield::stationary::{picard_stationary, solve_homogeneous, ContractionCertificate};
use hypfield::verify::{run_suite, write_table};

use crate::config::{invalid, ConfigError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Stationary,
    Homogeneous,
    BumpCurve,
    BumpProfile,
    BumpStability,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Stationary => "stationary",
            Command::Homogeneous => "homogeneous",
            Command::BumpCurve => "bump-curve",
            Command::BumpProfile => "bump-profile",
            Command::BumpStability => "bump-stability",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid configuration: {0}")]
    Setup(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => 2,
            RunError::Numerical(_) | RunError::Io(_) => 1,
        }
    }

    /// Short machine-readable class for the `error:` line.
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) | RunError::Setup(_) => "config",
            RunError::Numerical(_) => "numerical",
            RunError::Io(_) => "io",
        }
    }
}

fn setup<E: Display>(e: E) -> RunError {
    RunError::Setup(e.to_string())
}

fn numerical<E: Display>(e: E) -> RunError {
    RunError::Numerical(e.to_string())
}

/// Files written by a run.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
}

pub fn run(command: Command, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, RunError> {
    let started = Instant::now();
    fs::create_dir_all(out_dir)
        .map_err(|e| RunError::Io(format!("{}: {e}", out_dir.display())))?;
    let name = match cfg.raw("output.name") {
        "" => command.name().to_string(),
        n => n.to_string(),
    };
    let mut out = Writer {
        dir: out_dir.to_path_buf(),
        name,
        files: Vec::new(),
        notes: Vec::new(),
    };
    // A failed verification still writes its table and sidecar.
    let mut deferred = None;
    match command {
        Command::Simulate => simulate(cfg, &mut out)?,
        Command::Stationary => stationary(cfg, &mut out)?,
        Command::Homogeneous => homogeneous(cfg, &mut out)?,
        Command::BumpCurve => bump_curve(cfg, &mut out)?,
        Command::BumpProfile => bump_profile_cmd(cfg, &mut out)?,
        Command::BumpStability => bump_stability_cmd(cfg, &mut out)?,
        Command::Verify => deferred = verify(&mut out)?,
    }
    let outcome = out.finish(cfg, command, started)?;
    match deferred {
        Some(e) => Err(e),
        None => Ok(outcome),
    }
}

struct Writer {
    dir: PathBuf,
    name: String,
    files: Vec<PathBuf>,
    notes: Vec<(String, String)>,
}

impl Writer {
    fn write(&mut self, file: String, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(file);
        fs::write(&path, bytes).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }

    fn note(&mut self, key: &str, value: impl Display) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    /// Writes the `.meta` sidecar: run facts as comments, then every
    /// configuration key, so the file doubles as a `--config` input.
    fn finish(
        mut self,
        cfg: &RunConfig,
        command: Command,
        started: Instant,
    ) -> Result<Outcome, RunError> {
        let mut buf = Vec::new();
        let mut facts = vec![
            ("command".to_string(), command.name().to_string()),
            ("preset".to_string(), cfg.preset().unwrap_or("none").to_string()),
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ];
        facts.append(&mut self.notes);
        facts.push((
            "wall_seconds".to_string(),
            format!("{:.3}", started.elapsed().as_secs_f64()),
        ));
        for (k, v) in &facts {
            buf.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
        write_meta(&mut buf, &cfg.entries()).map_err(|e| RunError::Io(e.to_string()))?;
        let meta = format!("{}.meta", self.name);
        self.write(meta, &buf)?;
        Ok(Outcome { files: self.files })
    }
}

fn kernel(cfg: &RunConfig) -> Result<RadialKernel, RunError> {
    let family = family_from_name(
        cfg.raw("kernel.family"),
        Some(cfg.f64("kernel.b")?),
        Some(cfg.f64("kernel.sigma1")?),
        Some(cfg.f64("kernel.sigma2")?),
        Some(cfg.f64("kernel.A")?),
    )
    .map_err(setup)?;
    RadialKernel::new(family).map_err(setup)
}

fn rate(cfg: &RunConfig) -> Result<FiringRate, RunError> {
    let r = match cfg.raw("rate.kind") {
        "sigmoid" => FiringRate::Sigmoid {
            mu: cfg.f64("rate.mu")?,
        },
        "shifted_sigmoid" => FiringRate::ShiftedSigmoid {
            mu: cfg.f64("rate.mu")?,
        },
        _ => FiringRate::Heaviside {
            kappa: cfg.f64("rate.kappa")?,
        },
    };
    r.validate().map_err(setup)?;
    Ok(r)
}

fn convention(cfg: &RunConfig) -> InputConvention {
    match cfg.raw("input.convention") {
        "two_sigma_sq" => InputConvention::TwoSigmaSq,
        _ => InputConvention::SigmaSq,
    }
}

fn input(cfg: &RunConfig) -> Result<ExternalInput, RunError> {
    let i0 = cfg.f64("input.i0")?;
    let x = match cfg.raw("input.kind") {
        "zero" => ExternalInput::Zero,
        "constant" => ExternalInput::Constant(i0),
        "gaussian" => ExternalInput::GaussianBump {
            i0,
            sigma: cfg.f64("input.sigma")?,
            convention: convention(cfg),
        },
        _ => ExternalInput::RotatingBump {
            i0,
            sigma: cfg.f64("input.sigma")?,
            r0: cfg.f64("input.r0")?,
            omega0: cfg.f64("input.omega0")?,
            convention: convention(cfg),
        },
    };
    x.validate().map_err(setup)?;
    Ok(x)
}

fn initial(cfg: &RunConfig) -> Result<InitialCondition, RunError> {
    Ok(match cfg.raw("init.kind") {
        "zero" => InitialCondition::Zero,
        "constant" => InitialCondition::Constant(cfg.f64("init.value")?),
        _ => {
            let amplitude = cfg.f64("init.amplitude")?;
            if !(amplitude >= 0.0 && amplitude.is_finite()) {
                return Err(invalid("init.amplitude", cfg.raw("init.amplitude"), "must be >= 0").into());
            }
            InitialCondition::Noise {
                amplitude,
                seed: cfg.get("seed")?,
            }
        }
    })
}

fn model(cfg: &RunConfig, out: &mut Writer) -> Result<FieldModel, RunError> {
    let grid = FieldGrid::new(cfg.f64("grid.a")?, cfg.get("grid.n")?, cfg.get("grid.m")?)
        .map_err(setup)?;
    let kernel = kernel(cfg)?;
    let rule = AngularRule::from_name(cfg.raw("grid.angular_rule")).unwrap_or_default();
    let matrix =
        KernelMatrix::assemble_with(&grid, &kernel, rule, cfg.get("grid.matrix_cap")?).map_err(setup)?;
    out.note("nodes", grid.len());
    FieldModel::with_matrix(grid, matrix, &kernel, rate(cfg)?, cfg.positive("model.alpha")?, input(cfg)?)
        .map_err(setup)
}

fn ode(cfg: &RunConfig) -> Result<Dopri5Options, RunError> {
    let fixed = cfg.f64("ode.fixed_step")?;
    if fixed < 0.0 {
        return Err(invalid("ode.fixed_step", cfg.raw("ode.fixed_step"), "must be >= 0").into());
    }
    let h_max = cfg.f64("ode.h_max")?;
    if !(h_max > 0.0) {
        return Err(invalid("ode.h_max", cfg.raw("ode.h_max"), "must be > 0").into());
    }
    Ok(Dopri5Options {
        rtol: cfg.positive("ode.rtol")?,
        atol: cfg.positive("ode.atol")?,
        h_max,
        max_steps: cfg.get("ode.max_steps")?,
        fixed_step: (fixed > 0.0).then_some(fixed),
        ..Dopri5Options::default()
    })
}

fn snapshot_times(cfg: &RunConfig, fallback: impl FnOnce(f64) -> Vec<f64>) -> Result<Vec<f64>, RunError> {
    let t_end = cfg.f64("time.t_end")?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid("time.t_end", cfg.raw("time.t_end"), "must be finite and >= 0").into());
    }
    let times = cfg.list("time.snapshots")?;
    if times.is_empty() {
        return Ok(fallback(t_end));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid(
            "time.snapshots",
            cfg.raw("time.snapshots"),
            "must be non-negative and non-decreasing",
        )
        .into());
    }
    Ok(times)
}

fn simulate(cfg: &RunConfig, out: &mut Writer) -> Result<(), RunError> {
    let model = model(cfg, out)?;
    let mut sim = Simulation::new(&model, initial(cfg)?, snapshot_times(cfg, default_snapshots)?);
    sim.ode = ode(cfg)?;
    sim.check_bounds = cfg.get("ode.check_bounds")?;
    let traj = sim.run().map_err(numerical)?;
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &traj.grid, &traj.times, &traj.states)
        .map_err(|e| RunError::Io(e.to_string()))?;
    out.write(format!("{}.csv", out.name), &buf)?;
    out.note("accepted_steps", traj.stats.accepted);
    out.note("rejected_steps", traj.stats.rejected);
    out.note("w0", fmt_f64(traj.bounds.w0));
    out.note("attracting_radius", fmt_f64(traj.bounds.rho));
    out.note("worst_bound_excess", fmt_f64(traj.bounds.worst_excess));
    if let Some(t) = traj.bounds.entry_time {
        out.note("entry_time", fmt_f64(t));
    }
    Ok(())
}

fn stationary(cfg: &RunConfig, out: &mut Writer) -> Result<(), RunError> {
    let model = model(cfg, out)?;
    let guess = initial(cfg)?.realize(model.grid()).map_err(setup)?;
    let tol = cfg.positive("stationary.tol")?;
    let max_iter = cfg.get("stationary.max_iter")?;
    let cert = ContractionCertificate::for_model(&model).map_err(numerical)?;
    let res = picard_stationary(&model, &guess, tol, max_iter).map_err(numerical)?;
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, model.grid(), &[f64::INFINITY], &[res.values])
        .map_err(|e| RunError::Io(e.to_string()))?;
    out.write(format!("{}.csv", out.name), &buf)?;
    out.note("certified", res.certified);
    out.note("contraction_margin", fmt_f64(cert.margin));
    out.note("iterations", res.iterations);
    out.note("residual", fmt_f64(res.residual));
    Ok(())
}

fn homogeneous(cfg: &RunConfig, out: &mut Writer) -> Result<(), RunError> {
    let kernel = kernel(cfg)?;
    let wbar = match cfg.auto_f64("homogeneous.wbar")? {
        Some(w) => w,
        None => match kernel.family() {
            KernelFamily::MexicanHat3D { sigma1, sigma2, a } => {
                mexican_hat_wbar(sigma1, sigma2, a).map_err(setup)?
            }
            _ => kernel.disk_integral().map_err(numerical)?,
        },
    };
    let level = match input(cfg)? {
        ExternalInput::Zero => 0.0,
        ExternalInput::Constant(c) => c,
        _ => {
            return Err(invalid(
                "input.kind",
                cfg.raw("input.kind"),
                "the homogeneous equation needs a spatially constant input (zero or constant)",
            )
            .into())
        }
    };
    let samples: usize = cfg.get("homogeneous.samples")?;
    let times = snapshot_times(cfg, |t| {
        let n = samples.max(2);
        (0..n).map(|k| t * k as f64 / (n - 1) as f64).collect()
    })?;
    let v = solve_homogeneous(
        cfg.positive("model.alpha")?,
        wbar,
        rate(cfg)?,
        &|_| level,
        cfg.f64("homogeneous.v0")?,
        &times,
        &ode(cfg)?,
    )
    .map_err(numerical)?;
    let mut s = String::from("t,V\n");
    for (t, v) in times.iter().zip(&v) {
        s.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*v)));
    }
    out.write(format!("{}.csv", out.name), s.as_bytes())?;
    out.note("wbar", fmt_f64(wbar));
    Ok(())
}

fn bump_config(cfg: &RunConfig, amplitude: Option<f64>) -> Result<BumpConfig, RunError> {
    let amplitude = match (cfg.raw("input.kind"), amplitude) {
        (_, Some(a)) => a,
        ("zero", None) => 0.0,
        ("gaussian", None) => cfg.f64("input.i0")?,
        (kind, None) => {
            return Err(invalid("input.kind", kind, "bump analysis needs a zero or gaussian input").into())
        }
    };
    if cfg.raw("input.kind") == "gaussian" && cfg.raw("input.convention") != "two_sigma_sq" {
        return Err(invalid(
            "input.convention",
            cfg.raw("input.convention"),
            "bump analysis uses the input e^{-r²/(2σ²)}; set two_sigma_sq",
        )
        .into());
    }
    let grid = SpectralGrid::new(cfg.positive("bump.lambda_max")?, cfg.get("bump.lambda_nodes")?)
        .map_err(setup)?;
    BumpConfig::with_grid(
        cfg.positive("model.alpha")?,
        cfg.f64("rate.kappa")?,
        kernel(cfg)?,
        amplitude,
        cfg.positive("input.sigma")?,
        &grid,
    )
    .map_err(setup)
}

fn bracket(cfg: &RunConfig) -> Result<RootBracket, RunError> {
    let lo = cfg.positive("bump.omega_min")?;
    let hi = cfg.positive("bump.omega_max")?;
    if hi <= lo {
        return Err(invalid("bump.omega_max", cfg.raw("bump.omega_max"), "must exceed bump.omega_min").into());
    }
    Ok(RootBracket {
        lo,
        hi,
        samples: cfg.get("bump.scan_samples")?,
    })
}

fn bump_curve(cfg: &RunConfig, out: &mut Writer) -> Result<(), RunError> {
    let amplitudes = cfg.list("bump.amplitudes")?;
    let br = bracket(cfg)?;
    let points: usize = cfg.get("bump.curve_points")?;
    if points < 2 {
        return Err(invalid("bump.curve_points", cfg.raw("bump.curve_points"), "must be >= 2").into());
    }
    let omegas: Vec<f64> = (0..points)
        .map(|k| br.lo + (br.hi - br.lo) * k as f64 / (points - 1) as f64)
        .collect();
    let configs: Vec<(Option<f64>, BumpConfig)> = if amplitudes.is_empty() {
        vec![(None, bump_config(cfg, None)?)]
    } else {
        amplitudes
            .iter()
            .map(|&a| Ok((Some(a), bump_config(cfg, Some(a))?)))
            .collect::<Result<_, RunError>>()?
    };
    out.note("level", fmt_f64(cfg.f64("model.alpha")? * cfg.f64("rate.kappa")?));
    for (amp, bc) in &configs {
        let curve = existence_curve(bc, &omegas).map_err(numerical)?;
        let mut s = String::from("omega,N,M,I\n");
        for p in &curve {
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(p.omega),
                fmt_f64(p.n),
                fmt_f64(p.m),
                fmt_f64(p.i)
            ));
        }
        let file = match amp {
            None => format!("{}.csv", out.name),
            Some(a) => format!("{}-I{a}.csv", out.name),
        };
        out.note("curve", format!("{file} (amplitude {})", bc.input_amplitude()));
        out.write(file, s.as_bytes())?;
    }
    Ok(())
}

/// The root of `N(ω) = ακ` selected by `bump.omega`.
fn select_root(cfg: &RunConfig, bc: &BumpConfig, out: &mut Writer) -> Result<f64, RunError> {
    let roots = solve_pulse_width(bc, bracket(cfg)?).map_err(numerical)?;
    let list: Vec<String> = roots.iter().map(|&r| fmt_f64(r)).collect();
    out.note("roots", list.join(" "));
    let omega = match cfg.auto_f64("bump.omega")? {
        None => roots[0],
        Some(target) => roots
            .iter()
            .copied()
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
            .expect("solve_pulse_width returns at least one root"),
    };
    out.note("omega", fmt_f64(omega));
    Ok(omega)
}

fn bump_profile_cmd(cfg: &RunConfig, out: &mut Writer) -> Result<(), RunError> {
    let bc = bump_config(cfg, None)?;
    let omega = select_root(cfg, &bc, out)?;
    let sol = bump_profile(&bc, omega, None).map_err(numerical)?;
    let mut s = String::from("r,V\n");
    for (r, v) in sol.r.iter().zip(&sol.v) {
        s.push_str(&format!("{},{}\n", fmt_f64(*r), fmt_f64(*v)));
    }
    out.write(format!("{}.csv", out.name), s.as_bytes())?;
    out.note("m_r", fmt_f64(sol.m_r));
    out.note("d_omega", fmt_f64(sol.d_omega));
    out.note("v_prime", fmt_f64(sol.v_prime));
    out.note("monotone", sol.monotone);
    Ok(())
}

fn bump_stability_cmd(cfg: &RunConfig, out: &mut Writer) -> Result<(), RunError> {
    let bc = bump_config(cfg, None)?;
    let omega = select_root(cfg, &bc, out)?;
    let sol = bump_profile(&bc, omega, None).map_err(numerical)?;
    let spec = stability_spectrum(&bc, &sol, cfg.get("bump.n_max")?).map_err(numerical)?;
    let verdict = stability_check(&bc, &sol).map_err(numerical)?;
    let mut s = String::from("n,beta_n\n");
    for (n, b) in spec.beta.iter().enumerate() {
        s.push_str(&format!("{n},{}\n", fmt_f64(*b)));
    }
    s.push_str(if verdict.stable {
        "verdict,stable\n"
    } else {
        "verdict,unstable\n"
    });
    out.write(format!("{}.csv", out.name), s.as_bytes())?;
    out.note("n_prime", fmt_f64(verdict.n_prime));
    out.note("n_prime_numeric", fmt_f64(verdict.n_prime_numeric));
    out.note("stability_margin", fmt_f64(verdict.margin));
    out.note("essential_spectrum", fmt_f64(spec.essential));
    let worst_im = spec.imaginary.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    out.note("max_imaginary", fmt_f64(worst_im));
    Ok(())
}

fn verify(out: &mut Writer) -> Result<Option<RunError>, RunError> {
    let rows = run_suite().map_err(numerical)?;
    let mut buf = Vec::new();
    write_table(&mut buf, &rows).map_err(|e| RunError::Io(e.to_string()))?;
    out.write(format!("{}.csv", out.name), &buf)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    out.note("checks", rows.len());
    out.note("failed", failed.len());
    Ok((!failed.is_empty())
        .then(|| RunError::Numerical(format!("oracle checks failed: {}", failed.join(" ")))))
}
