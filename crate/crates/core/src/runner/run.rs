use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::config::{
    uses_one_component, ControlConfig, ControlMode, ExperimentConfig, FidelityMethod, MatrixForm, ModelConfig,
    Observable, PulseShape, SchemeChoice,
};
use super::RunError;
use crate::adiabatic::scaled_control;
use crate::control::{apply_lab_leo, apply_leo, parity_operator, zeno_evolution, LeoSpec, PulseSequence};
use crate::lindyn::{
    basis_vector, pauli, pq_partition, propagate_with, CMat, CVec, Generator, Scheme, TimeGrid,
};
use crate::models::{
    constant_fn, derive_seed, qsd_coefficients, qsd_fidelity_closed, qsd_fidelity_exact, spin_bath_generator,
    spin_bath_kernel, QsdModel, QsdSpec, SpinBathSpec,
};
use crate::one_component::{kernel_from_blocks, solve_p, PhaseAccumulator};

/// Provenance of one run, written next to the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    /// SHA-256 of the normalized configuration document.
    pub config_hash: String,
    pub seed: u64,
    pub version: &'static str,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
}

/// Time series of the requested observables, one row per sampled time.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// `t` followed by the observable columns.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub meta: RunMeta,
}

impl RunResult {
    /// CSV with a header row and 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    pub fn meta_json(&self) -> String {
        let m = &self.meta;
        let doc = serde_json::json!({
            "config_hash": m.config_hash,
            "seed": m.seed,
            "version": m.version,
            "wall_time_s": m.wall_time_s,
            "warnings": m.warnings,
            "columns": self.columns,
        });
        serde_json::to_string_pretty(&doc).expect("metadata always serializes")
    }

    /// Writes the CSV to `path` and the metadata to `<path>.meta.json`.
    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        let io = |p: &Path| {
            let p = p.display().to_string();
            move |source| RunError::Io { path: p, source }
        };
        std::fs::write(path, self.to_csv()).map_err(io(path))?;
        let meta = meta_path(path);
        std::fs::write(&meta, self.meta_json()).map_err(io(&meta))
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub(crate) fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    s.into()
}

pub(crate) fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(cfg.to_toml_string().as_bytes()).iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").expect("writing to a String");
        s
    })
}

/// Columns collected by a pipeline before they are arranged in config order.
#[derive(Default)]
struct Series {
    times: Vec<f64>,
    abs_p: Vec<f64>,
    p: Vec<Complex64>,
    leakage: Vec<f64>,
    phase: Vec<Complex64>,
    fidelity: Vec<f64>,
    fidelity_stderr: Option<Vec<f64>>,
    survival: Vec<f64>,
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn scheme(s: SchemeChoice) -> Scheme {
    match s {
        SchemeChoice::Rk4 => Scheme::Rk4,
        SchemeChoice::MidpointMagnus => Scheme::MidpointMagnus,
    }
}

fn build_pulses(c: &ControlConfig, seed: u64) -> crate::Result<PulseSequence> {
    let pulsed = matches!(c.mode, ControlMode::LeoRotating | ControlMode::LeoLab | ControlMode::ScaledHamiltonian);
    if !pulsed {
        return Ok(PulseSequence::none());
    }
    let seq = match c.shape {
        PulseShape::Ideal => PulseSequence::ideal(c.strength, c.period, c.sign)?,
        PulseShape::Rect if c.noise > 0.0 => PulseSequence::noisy(c.strength, c.duration, c.period, c.noise, c.sign, 0)?,
        PulseShape::Rect => PulseSequence::regular(c.strength, c.duration, c.period, c.sign)?,
    };
    // pulse randomness gets its own stream, disjoint from trajectory indices
    Ok(seq.with_seed(derive_seed(seed, u64::MAX)))
}

fn complex_matrix(re_part: &[Vec<f64>], im_part: &[Vec<f64>]) -> CMat {
    let n = re_part.len();
    CMat::from_fn(n, n, |i, j| Complex64::new(re_part[i][j], im_part[i][j]))
}

fn square(m: &Option<Vec<Vec<f64>>>) -> Option<DMatrix<f64>> {
    m.as_ref().map(|rows| DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j]))
}

/// The generator and target of the models that are solved by propagation
/// or the scalar memory equation.
fn linear_system(model: &ModelConfig) -> crate::Result<(Generator, CVec, Option<SpinBathSpec>)> {
    match model {
        ModelConfig::GenericMatrix { form, matrix_re, matrix_im, target_re, target_im } => {
            let m = complex_matrix(matrix_re, matrix_im);
            let gen = match form {
                MatrixForm::Hamiltonian => Generator::constant_hamiltonian(m),
                MatrixForm::Generator => Generator::constant(m),
            };
            let target: CVec = CVec::from_iterator(
                target_re.len(),
                target_re.iter().zip(target_im).map(|(a, b)| Complex64::new(*a, *b)),
            );
            // normalized to 1e-9 by validation; tighten to machine precision
            let target = &target / re(target.norm());
            Ok((gen, target, None))
        }
        ModelConfig::SpinBath { omega, omegas, jz, jperp, bz, bxy } => {
            let spec = SpinBathSpec {
                omega: constant_fn(*omega),
                omegas: omegas.clone(),
                jz: jz.iter().copied().map(constant_fn).collect(),
                jperp: jperp.iter().copied().map(constant_fn).collect(),
                bz: square(bz),
                bxy: square(bxy),
            };
            let gen = spin_bath_generator(&spec)?;
            Ok((gen, basis_vector(omegas.len() + 1, 0), Some(spec)))
        }
        _ => unreachable!("only called for linear-system models"),
    }
}

fn one_component(cfg: &ExperimentConfig, grid: &TimeGrid, pulses: &PulseSequence, out: &mut Series) -> Result<(), RunError> {
    let (gen, target, bath) = linear_system(&cfg.model).map_err(RunError::numerical("model setup"))?;
    let analytic = bath.as_ref().and_then(|spec| spin_bath_kernel(spec, grid).ok());
    let (kernel, phase) = match analytic {
        Some(pair) => pair,
        None => {
            let blocks = pq_partition(&gen, &target).map_err(RunError::numerical("partition"))?;
            let kernel = kernel_from_blocks(&blocks, grid).map_err(RunError::numerical("memory kernel"))?;
            let phase = PhaseAccumulator::from_blocks(&blocks, grid, &[]).map_err(RunError::numerical("phase"))?;
            (kernel, phase)
        }
    };
    let phase = if cfg.control.mode == ControlMode::LeoRotating {
        phase.with_control(pulses, 2.0, |t| pulses.value(t))
    } else {
        phase
    };
    let sol = solve_p(&kernel, &phase, grid).map_err(RunError::numerical("one-component solve"))?;
    out.p = sol.big_p().to_vec();
    out.abs_p = out.p.iter().map(|z| z.norm()).collect();
    out.leakage = sol.leakage().iter().map(|z| z.norm()).collect();
    out.phase = phase.c().to_vec();
    Ok(())
}

fn full_propagation(cfg: &ExperimentConfig, grid: &TimeGrid, pulses: &PulseSequence, out: &mut Series) -> Result<(), RunError> {
    let (gen, target, _) = linear_system(&cfg.model).map_err(RunError::numerical("model setup"))?;
    let sch = scheme(cfg.solver.scheme);
    let states = match cfg.control.mode {
        ControlMode::LeoRotating => {
            let spec = LeoSpec::new(target.clone(), pulses.clone()).map_err(RunError::numerical("control setup"))?;
            let ctl = apply_leo(&gen, &spec).map_err(RunError::numerical("control setup"))?;
            propagate_with(&ctl, &target, grid, sch).map_err(RunError::numerical("propagation"))?
        }
        ControlMode::ParityKick => {
            let per = (cfg.control.period / grid.dt()).round() as usize;
            let parity = parity_operator(&target);
            let mut states = vec![target.clone()];
            let mut k = 0;
            while k < grid.n_steps() {
                let steps = per.min(grid.n_steps() - k);
                let leg = TimeGrid::new(grid.time(k), grid.time(k + steps), steps).map_err(RunError::numerical("kick grid"))?;
                let kicked = &parity * states.last().expect("non-empty");
                let seg = propagate_with(&gen, &kicked, &leg, sch).map_err(RunError::numerical("propagation"))?;
                states.extend(seg.into_iter().skip(1));
                k += steps;
            }
            states
        }
        _ => propagate_with(&gen, &target, grid, sch).map_err(RunError::numerical("propagation"))?,
    };
    out.p = states.iter().map(|x| target.dotc(x)).collect();
    out.abs_p = out.p.iter().map(|z| z.norm()).collect();
    Ok(())
}

fn zeno(cfg: &ExperimentConfig, grid: &TimeGrid, out: &mut Series) -> Result<(), RunError> {
    let (gen, target, _) = linear_system(&cfg.model).map_err(RunError::numerical("model setup"))?;
    let n = cfg.control.projections;
    let run = zeno_evolution(&gen, &target, grid, n, |_| target.clone()).map_err(RunError::numerical("projected evolution"))?;
    let per = grid.n_steps() / n;
    out.times = (0..=n).map(|j| grid.time(j * per)).collect();
    let mut acc = 1.0;
    out.survival = std::iter::once(1.0)
        .chain((0..n).map(|j| {
            acc *= run.survivals.get(j).copied().unwrap_or(0.0);
            acc
        }))
        .collect();
    Ok(())
}

fn two_level(cfg: &ExperimentConfig, grid: &TimeGrid, pulses: &PulseSequence, out: &mut Series) -> Result<(), RunError> {
    let ModelConfig::TwoLevelAdiabatic { sweep_rate: v, gap: w } = cfg.model else { unreachable!() };
    let h = move |t: f64| (pauli::z() * re(v * t) + pauli::x() * re(w)) * re(0.5);
    let gen = Generator::from_hamiltonian(2, h);
    let ground = |t: f64| {
        let e = SymmetricEigen::new(h(t));
        e.eigenvectors.column(e.eigenvalues.imin()).into_owned()
    };
    let driven = match cfg.control.mode {
        ControlMode::ScaledHamiltonian => scaled_control(&gen, pulses),
        ControlMode::LeoLab => apply_lab_leo(&gen, pulses, 0).map_err(RunError::numerical("control setup"))?,
        _ => gen,
    };
    let states = propagate_with(&driven, &ground(grid.t0()), grid, scheme(cfg.solver.scheme))
        .map_err(RunError::numerical("propagation"))?;
    out.abs_p = states.iter().enumerate().map(|(k, x)| ground(grid.time(k)).dotc(x).norm()).collect();
    out.fidelity = out.abs_p.iter().map(|a| a * a).collect();
    Ok(())
}

fn qsd(cfg: &ExperimentConfig, grid: &TimeGrid, pulses: &PulseSequence, seed: u64, out: &mut Series) -> Result<(), RunError> {
    let ModelConfig::QsdMultilevel { energies, couplings_re, couplings_im, gamma, amplitudes_re, amplitudes_im, fidelity } =
        &cfg.model
    else {
        unreachable!()
    };
    let spec = QsdSpec {
        energies: energies.iter().copied().map(constant_fn).collect(),
        couplings: couplings_re.iter().zip(couplings_im).map(|(a, b)| Complex64::new(*a, *b)).collect(),
        gamma: *gamma,
        target: amplitudes_re.iter().zip(amplitudes_im).map(|(a, b)| Complex64::new(*a, *b)).collect(),
    };
    let norm: f64 = spec.target.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let spec = QsdSpec { target: spec.target.iter().map(|a| a / norm).collect(), ..spec };
    match fidelity {
        FidelityMethod::MonteCarlo => {
            let model = QsdModel::new(&spec, pulses, grid).map_err(RunError::numerical("QSD coefficients"))?;
            let series = model
                .fidelity_mc(cfg.ensemble.n_traj, seed, cfg.output.stride)
                .map_err(RunError::numerical("QSD ensemble"))?;
            out.times = series.times;
            out.fidelity = series.values;
            out.fidelity_stderr = series.stderr;
        }
        method => {
            let coeffs = qsd_coefficients(&spec, pulses, grid).map_err(RunError::numerical("QSD coefficients"))?;
            let series = if *method == FidelityMethod::Closed {
                qsd_fidelity_closed(&spec, &coeffs)
            } else {
                qsd_fidelity_exact(&spec, &coeffs)
            }
            .map_err(RunError::numerical("QSD fidelity"))?;
            out.fidelity = series.values;
        }
    }
    Ok(())
}

/// Runs `cfg` with its own master seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, RunError> {
    run_experiment_seeded(cfg, cfg.ensemble.master_seed)
}

/// Runs `cfg` with `seed` in place of the configured master seed.
pub fn run_experiment_seeded(cfg: &ExperimentConfig, seed: u64) -> Result<RunResult, RunError> {
    let start = Instant::now();
    let s = &cfg.solver;
    let grid = TimeGrid::with_step(s.t_start, s.t_end, s.dt).map_err(RunError::numerical("time grid"))?;
    let pulses = build_pulses(&cfg.control, seed).map_err(RunError::numerical("pulse sequence"))?;
    let mut out = Series::default();
    match &cfg.model {
        ModelConfig::QsdMultilevel { .. } => qsd(cfg, &grid, &pulses, seed, &mut out)?,
        ModelConfig::TwoLevelAdiabatic { .. } => two_level(cfg, &grid, &pulses, &mut out)?,
        _ if cfg.control.mode == ControlMode::Zeno => zeno(cfg, &grid, &mut out)?,
        _ if uses_one_component(cfg) => one_component(cfg, &grid, &pulses, &mut out)?,
        _ => full_propagation(cfg, &grid, &pulses, &mut out)?,
    }
    let (columns, rows) = arrange(cfg, &grid, &pulses, &out);
    Ok(RunResult {
        columns,
        rows,
        meta: RunMeta {
            config_hash: config_hash(cfg),
            seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: start.elapsed().as_secs_f64(),
            warnings: cfg.warnings(),
        },
    })
}

/// Lays the collected series out as CSV columns in config order, sampling
/// every `stride`-th grid point.
fn arrange(cfg: &ExperimentConfig, grid: &TimeGrid, pulses: &PulseSequence, out: &Series) -> (Vec<String>, Vec<Vec<f64>>) {
    let zeno = cfg.control.mode == ControlMode::Zeno;
    let presampled = zeno || out.fidelity_stderr.is_some();
    let (times, picks): (Vec<f64>, Vec<usize>) = if presampled {
        (out.times.clone(), (0..out.times.len()).collect())
    } else {
        let picks: Vec<usize> = (0..grid.len()).step_by(cfg.output.stride).collect();
        (picks.iter().map(|&k| grid.time(k)).collect(), picks)
    };
    let mut columns = vec!["t".to_string()];
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let take = |v: &[f64]| picks.iter().map(|&k| v[k]).collect::<Vec<f64>>();
    let take_c = |v: &[Complex64]| -> (Vec<f64>, Vec<f64>) { picks.iter().map(|&k| (v[k].re, v[k].im)).unzip() };
    for &o in &cfg.output.observables {
        match o {
            Observable::AbsP => cols.push(take(&out.abs_p)),
            Observable::Leakage => cols.push(take(&out.leakage)),
            Observable::Fidelity => cols.push(take(&out.fidelity)),
            Observable::Survival => cols.push(take(&out.survival)),
            Observable::Control => cols.push(times.iter().map(|&t| pulses.value(t)).collect()),
            Observable::P | Observable::Phase => {
                let (r, i) = take_c(if o == Observable::P { &out.p } else { &out.phase });
                cols.push(r);
                cols.push(i);
            }
        }
        match o {
            Observable::P | Observable::Phase => {
                columns.push(format!("re_{}", o.name()));
                columns.push(format!("im_{}", o.name()));
            }
            _ => columns.push(o.name().to_string()),
        }
        if o == Observable::Fidelity {
            if let Some(se) = &out.fidelity_stderr {
                columns.push("fidelity_stderr".into());
                cols.push(take(se));
            }
        }
    }
    let rows = (0..times.len())
        .map(|r| std::iter::once(times[r]).chain(cols.iter().map(|c| c[r])).collect())
        .collect();
    (columns, rows)
}
