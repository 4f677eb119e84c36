//! Experiment runner: builds the configured model, walks the time grid,
//! emits CSV, and reports summary statistics.
//!
//! Every record carries the same quantity computed by two routes. The
//! `coherence_*` columns hold the central-system coherence from the
//! echo-identity route; the `fidelity_*` columns hold the independent
//! reference (joint/oracle dynamics, a closed-form limit, or the exact
//! propagation) mapped to the same normalization, so
//! `identity_residual = |coherence − fidelity|` row by row. A run fails
//! with a numerical-invariant error when any residual exceeds the
//! configured tolerance; for the `oscillator-markov` and `shorttime` kinds
//! the reference is an approximate law or a validity diagnostic, and the
//! default tolerance admits any gap the columns can express.

use std::path::{Path, PathBuf};

use crate::config::{
    BathSpec, CouplingSpec, ExperimentConfig, ModelParams, Oracle, SweepSpec,
};
use crate::dephasing::{DephasingModel, InitialProduct};
use crate::ensemble::{gue, random_state, rng_from_seed};
use crate::error::{Error, Result};
use crate::oscillator::{
    branch_overlap, markov_reference, CatStateSpec, FockOracle, OscillatorBathModel,
};
use crate::shorttime::ShortTimeModel;
use crate::{tol, C64};

/// One emitted row; CSV columns follow the field order exactly.
#[derive(Debug, Clone, Copy)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub coherence_re: f64,
    pub coherence_im: f64,
    pub coherence_abs: f64,
    pub fidelity_re: f64,
    pub fidelity_im: f64,
    pub fidelity_abs: f64,
    pub identity_residual: f64,
}

impl TimeSeriesRecord {
    pub const CSV_HEADER: &'static str = "t,coherence_re,coherence_im,coherence_abs,\
                                          fidelity_re,fidelity_im,fidelity_abs,identity_residual";

    fn from_pair(t: f64, coherence: C64, fidelity: C64) -> Self {
        TimeSeriesRecord {
            t,
            coherence_re: coherence.re,
            coherence_im: coherence.im,
            coherence_abs: coherence.norm(),
            fidelity_re: fidelity.re,
            fidelity_im: fidelity.im,
            fidelity_abs: fidelity.norm(),
            identity_residual: (coherence - fidelity).norm(),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.t,
            self.coherence_re,
            self.coherence_im,
            self.coherence_abs,
            self.fidelity_re,
            self.fidelity_im,
            self.fidelity_abs,
            self.identity_residual
        )
    }
}

/// Result of a single `run`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub csv_path: PathBuf,
    pub rows: usize,
    pub max_residual: f64,
    pub fitted_decay_rate: f64,
}

/// Result of a `sweep`: one (value, rate, max residual) triple per point.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub summary_path: PathBuf,
    pub points: Vec<(f64, f64, f64)>,
}

/// Computes the full record set for a config; deterministic given the seed.
pub fn compute_records(config: &ExperimentConfig) -> Result<Vec<TimeSeriesRecord>> {
    let grid = config.time_grid();
    match &config.model {
        ModelParams::Dephasing(p) => dephasing_records(config, p, &grid),
        ModelParams::PiPulse(p) => pipulse_records(config, p, &grid),
        ModelParams::Oscillator(p) => oscillator_records(config, p, &grid),
        ModelParams::Markov(p) => markov_records(config, p, &grid),
        ModelParams::ShortTime(p) => shorttime_records(config, p, &grid),
    }
}

fn require_seed(config: &ExperimentConfig) -> Result<u64> {
    config.seed.ok_or_else(|| {
        Error::config_value(format!(
            "kind {} draws random instances; a seed is required",
            config.kind.as_str()
        ))
    })
}

fn average_over_samples(
    grid: &[f64],
    samples: usize,
    mut one_sample: impl FnMut(&mut Vec<(C64, C64)>) -> Result<()>,
) -> Result<Vec<TimeSeriesRecord>> {
    let mut sums: Vec<(C64, C64)> = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); grid.len()];
    let mut pair_buf: Vec<(C64, C64)> = Vec::with_capacity(grid.len());
    for _ in 0..samples {
        pair_buf.clear();
        one_sample(&mut pair_buf)?;
        for (sum, pair) in sums.iter_mut().zip(pair_buf.iter()) {
            sum.0 += pair.0;
            sum.1 += pair.1;
        }
    }
    let weight = 1.0 / samples as f64;
    Ok(grid
        .iter()
        .zip(sums.iter())
        .map(|(&t, &(c, f))| TimeSeriesRecord::from_pair(t, weight * c, weight * f))
        .collect())
}

fn dephasing_records(
    config: &ExperimentConfig,
    p: &crate::config::DephasingParams,
    grid: &[f64],
) -> Result<Vec<TimeSeriesRecord>> {
    let mut rng = rng_from_seed(require_seed(config)?);
    let h_env = gue(p.dim_env, 1.0, &mut rng)?;
    let model = match &p.coupling {
        CouplingSpec::Gue { scale } => {
            let mut couplings = Vec::with_capacity(p.n_levels);
            for _ in 0..p.n_levels {
                couplings.push(gue(p.dim_env, 1.0, &mut rng)?.scaled(*scale));
            }
            DephasingModel::new(p.eps.clone(), h_env, couplings)?
        }
        CouplingSpec::Proportional(factors) => {
            DephasingModel::proportional(p.eps.clone(), h_env, factors.clone())?
        }
    };
    let phase_rate = p.eps[0] - p.eps[1];
    average_over_samples(grid, config.ensemble_samples, |pairs| {
        let chi0 = random_state(p.dim_env, &mut rng)?;
        let init = InitialProduct::uniform(p.n_levels, chi0.clone())?;
        let rho01_0 = init.coherence(0, 1)?;
        for &t in grid {
            let coherence = model.coherence_factorized(&init, 0, 1, t)?;
            let echo = model.echo_amplitude(&chi0, 0, 1, t)?;
            let fidelity = C64::new(0.0, -phase_rate * t).exp() * echo * rho01_0;
            pairs.push((coherence, fidelity));
        }
        Ok(())
    })
}

fn pipulse_records(
    config: &ExperimentConfig,
    p: &crate::config::PiPulseParams,
    grid: &[f64],
) -> Result<Vec<TimeSeriesRecord>> {
    let mut rng = rng_from_seed(require_seed(config)?);
    let h_env = gue(p.dim_env, 1.0, &mut rng)?;
    let couplings = vec![
        gue(p.dim_env, 1.0, &mut rng)?.scaled(p.coupling_scale),
        gue(p.dim_env, 1.0, &mut rng)?.scaled(p.coupling_scale),
    ];
    let model = DephasingModel::new(vec![0.0, 0.0], h_env, couplings)?;
    let spectrum_0 = model.branch_hamiltonian(0)?.spectrum()?;
    let spectrum_1 = model.branch_hamiltonian(1)?.spectrum()?;
    average_over_samples(grid, config.ensemble_samples, |pairs| {
        let chi0 = random_state(p.dim_env, &mut rng)?;
        for &t in grid {
            let coherence = model.pi_pulse_coherence(&chi0, t)?;
            // Four-propagator oracle: ⟨χ0|U_0†U_1†U_0U_1|χ0⟩ with half-time
            // propagators, composed as explicit matrices.
            let half = 0.5 * t;
            let u0 = spectrum_0.propagator(half)?;
            let u1 = spectrum_1.propagator(half)?;
            let echo_op = u0
                .adjoint()
                .compose(&u1.adjoint())?
                .compose(&u0)?
                .compose(&u1)?;
            let fidelity = 0.5 * echo_op.matrix_element(&chi0, &chi0)?;
            pairs.push((coherence, fidelity));
        }
        Ok(())
    })
}

fn build_oscillator_model(
    omega_c: f64,
    bath: &BathSpec,
    fock_cutoff: usize,
) -> Result<OscillatorBathModel> {
    match bath {
        BathSpec::Flat { n_modes, omega_min, omega_max, gamma } => {
            OscillatorBathModel::ohmic_flat_bath(omega_c, *n_modes, *omega_min, *omega_max, *gamma)?
                .with_fock_cutoff(fock_cutoff)
        }
        BathSpec::Explicit { omega, g } => {
            OscillatorBathModel::new(omega_c, omega.clone(), g.clone(), fock_cutoff)
        }
    }
}

/// Steps per grid interval and the dt to request so that `ceil` resolves to
/// exactly that many integrator steps.
fn aligned_step(grid_dt: f64, flow_dt: f64, intervals: usize) -> (usize, f64) {
    let per = (grid_dt / flow_dt).ceil().max(1.0) as usize;
    let total = per * intervals;
    let duration = grid_dt * intervals as f64;
    (per, duration / (total as f64 - 0.5))
}

fn gaussian_coherences(
    model: &OscillatorBathModel,
    spec: &CatStateSpec,
    grid: &[f64],
    flow_step: Option<f64>,
) -> Result<Vec<C64>> {
    let t_max = *grid.last().expect("nonempty grid");
    if t_max == 0.0 {
        return Err(Error::invalid("t_max must be positive"));
    }
    let flow_dt = flow_step.unwrap_or_else(|| model.default_flow_step(t_max));
    let intervals = grid.len() - 1;
    let (per, dt_request) = aligned_step(t_max / intervals as f64, flow_dt, intervals);
    let traj_1 = model.classical_trajectory(spec.z1, t_max, dt_request)?;
    let traj_2 = model.classical_trajectory(spec.z2, t_max, dt_request)?;
    let needed = per * intervals + 1;
    if traj_1.samples().len() < needed || traj_2.samples().len() < needed {
        return Err(Error::invariant(format!(
            "trajectory sampling misaligned with the time grid: {} samples, {needed} needed",
            traj_1.samples().len()
        )));
    }
    (0..grid.len())
        .map(|i| {
            let k = i * per;
            Ok(0.5 * branch_overlap(&traj_1.samples()[k], &traj_2.samples()[k])?)
        })
        .collect()
}

fn oscillator_records(
    _config: &ExperimentConfig,
    p: &crate::config::OscillatorParams,
    grid: &[f64],
) -> Result<Vec<TimeSeriesRecord>> {
    let model = build_oscillator_model(p.omega_c, &p.bath, p.fock_cutoff)?;
    let spec = CatStateSpec::new(p.z1, p.z2);
    let coherences = gaussian_coherences(&model, &spec, grid, p.flow_step)?;
    let fidelities: Vec<C64> = match p.oracle {
        Oracle::Fock => {
            let oracle = FockOracle::new(&model, &spec, tol::DIM_CAP)?;
            grid.iter().map(|&t| oracle.coherence(t)).collect::<Result<_>>()?
        }
        Oracle::Driven => {
            let t_max = *grid.last().expect("nonempty grid");
            let dt = p.flow_step.unwrap_or_else(|| model.default_flow_step(t_max));
            grid.iter()
                .map(|&t| {
                    if t == 0.0 {
                        Ok(C64::new(0.5, 0.0))
                    } else {
                        Ok(0.5 * model.driven_echo_amplitude(&spec, t, dt.min(t))?)
                    }
                })
                .collect::<Result<_>>()?
        }
        Oracle::None => coherences.clone(),
    };
    Ok(grid
        .iter()
        .zip(coherences.iter().zip(fidelities.iter()))
        .map(|(&t, (&c, &f))| TimeSeriesRecord::from_pair(t, c, f))
        .collect())
}

fn markov_records(
    _config: &ExperimentConfig,
    p: &crate::config::MarkovParams,
    grid: &[f64],
) -> Result<Vec<TimeSeriesRecord>> {
    let bath = BathSpec::Flat {
        n_modes: p.n_modes,
        omega_min: p.omega_min,
        omega_max: p.omega_max,
        gamma: p.gamma,
    };
    let model = build_oscillator_model(p.omega_c, &bath, 1)?;
    let spec = CatStateSpec::new(p.z1, p.z2);
    let coherences = gaussian_coherences(&model, &spec, grid, p.flow_step)?;
    Ok(grid
        .iter()
        .zip(coherences.iter())
        .map(|(&t, &c)| {
            let reference = 0.5 * markov_reference(p.gamma, p.omega_c, &spec, t);
            TimeSeriesRecord::from_pair(t, c, reference)
        })
        .collect())
}

fn shorttime_records(
    config: &ExperimentConfig,
    p: &crate::config::ShortTimeParams,
    grid: &[f64],
) -> Result<Vec<TimeSeriesRecord>> {
    let mut rng = rng_from_seed(require_seed(config)?);
    let h_c = gue(p.dim_central, 1.0, &mut rng)?.scaled(p.central_scale);
    let s_op = gue(p.dim_central, 1.0, &mut rng)?;
    let h_env = gue(p.dim_env, 1.0, &mut rng)?;
    let v_env = gue(p.dim_env, 1.0, &mut rng)?.scaled(p.coupling_scale);
    let model = ShortTimeModel::new(h_c, s_op, h_env, v_env)?;
    let values = model.s_values();
    let (s_lo, s_hi) = (values[0], values[values.len() - 1]);
    average_over_samples(grid, config.ensemble_samples, |pairs| {
        let b0 = random_state(p.dim_env, &mut rng)?;
        for &t in grid {
            let coherence = model.shorttime_coherence(s_lo, s_hi, &b0, t)?;
            let exact = model.exact_coherence(s_lo, s_hi, &b0, t)?;
            pairs.push((coherence, exact));
        }
        Ok(())
    })
}

/// Decay-rate summary statistic. For `oscillator-markov`, a one-parameter
/// fit of ln|2·coherence|² against the closed-form shape
/// u(t) = (1 − e^{-γt})/γ, whose coefficient estimates γ|z₁−z₂|²; for every
/// other kind, the least-squares slope of −ln(coherence_abs) over the
/// leading grid prefix where the coherence still exceeds e^{-2} of its
/// initial value.
pub fn fitted_decay_rate(config: &ExperimentConfig, records: &[TimeSeriesRecord]) -> f64 {
    if let ModelParams::Markov(p) = &config.model {
        let gamma = p.gamma;
        let mut num = 0.0;
        let mut den = 0.0;
        for r in records {
            let m = 2.0 * r.coherence_abs;
            if !(m > 1e-300) || r.t == 0.0 {
                continue;
            }
            let u = (1.0 - (-gamma * r.t).exp()) / gamma;
            let y = 2.0 * m.ln();
            num += u * y;
            den += u * u;
        }
        return if den > 0.0 { -num / den } else { 0.0 };
    }
    let initial = match records.first() {
        Some(r) if r.coherence_abs > 0.0 => r.coherence_abs,
        _ => return 0.0,
    };
    let threshold = initial * (-2.0_f64).exp();
    let mut points: Vec<(f64, f64)> = Vec::new();
    for r in records {
        if r.coherence_abs < threshold || !(r.coherence_abs > 1e-300) {
            break;
        }
        points.push((r.t, r.coherence_abs.ln()));
    }
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in points {
        num += (t - t_mean) * (y - y_mean);
        den += (t - t_mean) * (t - t_mean);
    }
    if den > 0.0 {
        -num / den
    } else {
        0.0
    }
}

/// Enforces the row invariants: finite fields, amplitudes within 1 + 1e-9,
/// and every identity residual within the tolerance.
pub fn validate_records(records: &[TimeSeriesRecord], residual_tol: f64) -> Result<()> {
    const ABS_CAP: f64 = 1.0 + 1e-9;
    for r in records {
        let fields = [
            r.t,
            r.coherence_re,
            r.coherence_im,
            r.coherence_abs,
            r.fidelity_re,
            r.fidelity_im,
            r.fidelity_abs,
            r.identity_residual,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::invariant(format!(
                "non-finite record at t = {}",
                r.t
            )));
        }
        if r.coherence_abs > ABS_CAP || r.fidelity_abs > ABS_CAP {
            return Err(Error::invariant(format!(
                "amplitude above 1 at t = {}: coherence_abs = {}, fidelity_abs = {}",
                r.t, r.coherence_abs, r.fidelity_abs
            )));
        }
        if r.identity_residual > residual_tol {
            return Err(Error::invariant(format!(
                "identity residual {:.3e} exceeds tolerance {:.1e} at t = {}",
                r.identity_residual, residual_tol, r.t
            )));
        }
    }
    Ok(())
}

/// Writes records as CSV: header line, then one `csv_row` per record.
pub fn write_csv(path: &Path, records: &[TimeSeriesRecord]) -> Result<()> {
    let mut text = String::with_capacity(records.len() * 200 + 128);
    text.push_str(TimeSeriesRecord::CSV_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn resolve_out(config: &ExperimentConfig, out_override: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = out_override {
        return Ok(p.to_path_buf());
    }
    if let Some(p) = &config.out {
        return Ok(PathBuf::from(p));
    }
    Err(Error::config_value(
        "no output path: set the out key or pass --out",
    ))
}

/// Runs one experiment: compute, write CSV, then gate on the row invariants.
/// The CSV is left in place when the gate fails, for inspection.
pub fn run(
    config: &ExperimentConfig,
    out_override: Option<&Path>,
    quiet: bool,
) -> Result<RunOutcome> {
    let csv_path = resolve_out(config, out_override)?;
    let records = compute_records(config)?;
    write_csv(&csv_path, &records)?;
    let max_residual = records
        .iter()
        .map(|r| r.identity_residual)
        .fold(0.0, f64::max);
    let rate = fitted_decay_rate(config, &records);
    validate_records(&records, config.residual_tol)?;
    if !quiet {
        println!(
            "run kind={} rows={} max_residual={:.6e} fitted_decay_rate={:.6e} out={}",
            config.kind.as_str(),
            records.len(),
            max_residual,
            rate,
            csv_path.display()
        );
    }
    Ok(RunOutcome {
        csv_path,
        rows: records.len(),
        max_residual,
        fitted_decay_rate: rate,
    })
}

/// Returns a copy of the config with the sweep axis set to `value`.
pub fn apply_axis(config: &ExperimentConfig, axis: &str, value: f64) -> Result<ExperimentConfig> {
    let mut cfg = config.clone();
    match (&mut cfg.model, axis) {
        (ModelParams::Dephasing(p), "coupling_scale") => match &mut p.coupling {
            CouplingSpec::Gue { scale } => *scale = value,
            CouplingSpec::Proportional(_) => {
                return Err(Error::config_value(
                    "coupling_scale axis requires GUE couplings",
                ))
            }
        },
        (ModelParams::Dephasing(p), "factor") => match &mut p.coupling {
            CouplingSpec::Proportional(factors) if factors.len() == 2 => factors[1] = value,
            _ => {
                return Err(Error::config_value(
                    "factor axis requires a 2-level proportional model",
                ))
            }
        },
        (ModelParams::PiPulse(p), "coupling_scale") => p.coupling_scale = value,
        (ModelParams::ShortTime(p), "coupling_scale") => p.coupling_scale = value,
        (ModelParams::Oscillator(p), "separation") => {
            p.z2 = shifted_label(p.z1, p.z2, value);
        }
        (ModelParams::Oscillator(p), "gamma") => match &mut p.bath {
            BathSpec::Flat { gamma, .. } => *gamma = value,
            BathSpec::Explicit { .. } => {
                return Err(Error::config_value("gamma axis requires a flat bath"))
            }
        },
        (ModelParams::Markov(p), "separation") => {
            p.z2 = shifted_label(p.z1, p.z2, value);
        }
        (ModelParams::Markov(p), "gamma") => p.gamma = value,
        _ => {
            return Err(Error::config_value(format!(
                "axis {axis:?} is not valid for kind {}",
                cfg.kind.as_str()
            )))
        }
    }
    Ok(cfg)
}

fn shifted_label(z1: C64, z2: C64, separation: f64) -> C64 {
    let delta = z2 - z1;
    let direction = if delta.norm() > 0.0 {
        delta / delta.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    z1 + separation * direction
}

/// Runs the configured sweep: one CSV per value plus a summary CSV.
pub fn sweep(
    config: &ExperimentConfig,
    out_override: Option<&Path>,
    quiet: bool,
) -> Result<SweepOutcome> {
    let spec: &SweepSpec = config.sweep.as_ref().ok_or_else(|| {
        Error::config_value("sweep requires sweep_axis and sweep_values in the config")
    })?;
    let dir = resolve_out(config, out_override)?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut points = Vec::with_capacity(spec.values.len());
    for (i, &value) in spec.values.iter().enumerate() {
        let cfg = apply_axis(config, &spec.axis, value)?;
        let records = compute_records(&cfg)?;
        let path = dir.join(format!("point_{i:03}.csv"));
        write_csv(&path, &records)?;
        let max_residual = records
            .iter()
            .map(|r| r.identity_residual)
            .fold(0.0, f64::max);
        let rate = fitted_decay_rate(&cfg, &records);
        validate_records(&records, config.residual_tol)?;
        if !quiet {
            println!(
                "sweep {}={} rate={:.6e} max_residual={:.6e} out={}",
                spec.axis,
                value,
                rate,
                max_residual,
                path.display()
            );
        }
        points.push((value, rate, max_residual));
    }
    let summary_path = dir.join("summary.csv");
    let mut text = String::from("value,fitted_decay_rate,max_residual\n");
    for &(v, rate, resid) in &points {
        text.push_str(&format!("{v:.16e},{rate:.16e},{resid:.16e}\n"));
    }
    std::fs::write(&summary_path, text)
        .map_err(|e| Error::io(summary_path.display().to_string(), e))?;
    if !quiet {
        println!("sweep summary: {}", summary_path.display());
    }
    Ok(SweepOutcome { dir, summary_path, points })
}
