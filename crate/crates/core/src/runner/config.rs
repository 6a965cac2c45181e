use std::collections::BTreeSet;
use std::fmt;

use toml::{Table, Value};

use crate::control::SignPolicy;

/// One schema violation, located by its dotted key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every violation found in a document, not just the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl ConfigErrors {
    pub fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self(vec![ConfigIssue { path: path.into(), message: message.into() }])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixForm {
    /// The matrix is `H`; the dynamics is `∂ₜX = −iHX`.
    Hamiltonian,
    /// The matrix is `M` itself.
    Generator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityMethod {
    /// The printed four-term expression.
    Closed,
    /// Exact Gaussian average of the linear-QSD overlap.
    Exact,
    /// Trajectory ensemble.
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    GenericMatrix {
        form: MatrixForm,
        matrix_re: Vec<Vec<f64>>,
        matrix_im: Vec<Vec<f64>>,
        target_re: Vec<f64>,
        target_im: Vec<f64>,
    },
    /// `H(t) = (v t σ_z + w σ_x)/2`, started in its ground state.
    TwoLevelAdiabatic { sweep_rate: f64, gap: f64 },
    SpinBath {
        omega: f64,
        omegas: Vec<f64>,
        jz: Vec<f64>,
        jperp: Vec<f64>,
        bz: Option<Vec<Vec<f64>>>,
        bxy: Option<Vec<Vec<f64>>>,
    },
    QsdMultilevel {
        energies: Vec<f64>,
        couplings_re: Vec<f64>,
        couplings_im: Vec<f64>,
        gamma: f64,
        amplitudes_re: Vec<f64>,
        amplitudes_im: Vec<f64>,
        fidelity: FidelityMethod,
    },
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::GenericMatrix { .. } => "generic_matrix",
            Self::TwoLevelAdiabatic { .. } => "two_level_adiabatic",
            Self::SpinBath { .. } => "spin_bath",
            Self::QsdMultilevel { .. } => "qsd_multilevel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    Rk4,
    MidpointMagnus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// One-component solve where the model supports it, otherwise full.
    Auto,
    OneComponent,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub scheme: SchemeChoice,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    None,
    LeoRotating,
    LeoLab,
    ScaledHamiltonian,
    ParityKick,
    Zeno,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseShape {
    Rect,
    Ideal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub mode: ControlMode,
    pub shape: PulseShape,
    pub strength: f64,
    pub duration: f64,
    pub period: f64,
    pub noise: f64,
    pub sign: SignPolicy,
    /// Number of projections in `zeno` mode.
    pub projections: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    AbsP,
    P,
    Leakage,
    Phase,
    Fidelity,
    Survival,
    Control,
}

impl Observable {
    const ALL: [(&'static str, Observable); 7] = [
        ("abs_p", Observable::AbsP),
        ("p", Observable::P),
        ("leakage", Observable::Leakage),
        ("phase", Observable::Phase),
        ("fidelity", Observable::Fidelity),
        ("survival", Observable::Survival),
        ("control", Observable::Control),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, o)| *o == self).map(|(n, _)| *n).unwrap_or("?")
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().find(|(n, _)| *n == s).map(|(_, o)| *o)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub observables: Vec<Observable>,
    pub stride: usize,
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub solver: SolverConfig,
    pub control: ControlConfig,
    pub ensemble: EnsembleConfig,
    pub output: OutputConfig,
}

/// Reads keys from one table, remembering which were consumed so the rest
/// can be reported as unknown.
struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
    used: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &str, required: bool, issues: &mut Vec<ConfigIssue>) -> Self {
        let table = match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                issues.push(issue(name, "expected a table"));
                None
            }
            None => {
                if required {
                    issues.push(issue(name, "missing section"));
                }
                None
            }
        };
        Self { path: name.to_string(), table, used: BTreeSet::new() }
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{}", self.path, k)
    }

    fn raw(&mut self, k: &str) -> Option<&'a Value> {
        self.used.insert(k.to_string());
        self.table.and_then(|t| t.get(k))
    }

    fn get<T>(&mut self, k: &str, issues: &mut Vec<ConfigIssue>, conv: impl Fn(&Value) -> Option<T>, what: &str) -> Option<T> {
        let v = self.raw(k)?;
        let out = conv(v);
        if out.is_none() {
            issues.push(issue(&self.key(k), &format!("expected {what}, found {}", v.type_str())));
        }
        out
    }

    fn required<T>(&mut self, k: &str, issues: &mut Vec<ConfigIssue>, conv: impl Fn(&Value) -> Option<T>, what: &str) -> Option<T> {
        if self.table.is_some() && self.table.and_then(|t| t.get(k)).is_none() {
            self.used.insert(k.to_string());
            issues.push(issue(&self.key(k), "missing key"));
            return None;
        }
        self.get(k, issues, conv, what)
    }

    fn finish(self, issues: &mut Vec<ConfigIssue>) {
        if let Some(t) = self.table {
            for k in t.keys().filter(|k| !self.used.contains(*k)) {
                issues.push(issue(&self.key(k), "unknown key"));
            }
        }
    }
}

fn issue(path: &str, message: &str) -> ConfigIssue {
    ConfigIssue { path: path.to_string(), message: message.to_string() }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    v.as_integer().and_then(|i| usize::try_from(i).ok())
}

/// Seeds use the full 64 bits; negative TOML integers are read as their
/// two's-complement bit pattern.
fn as_seed(v: &Value) -> Option<u64> {
    v.as_integer().map(|i| i as u64)
}

fn as_str(v: &Value) -> Option<String> {
    v.as_str().map(str::to_string)
}

fn as_vec(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(as_f64).collect()
}

fn as_matrix(v: &Value) -> Option<Vec<Vec<f64>>> {
    v.as_array()?.iter().map(as_vec).collect()
}

fn as_strings(v: &Value) -> Option<Vec<String>> {
    v.as_array()?.iter().map(as_str).collect()
}

fn choice<T: Copy>(sec: &Section, k: &str, s: Option<String>, options: &[(&str, T)], default: T, issues: &mut Vec<ConfigIssue>) -> T {
    let Some(s) = s else { return default };
    match options.iter().find(|(n, _)| *n == s) {
        Some((_, v)) => *v,
        None => {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            issues.push(issue(&sec.key(k), &format!("unknown value \"{s}\", expected one of {}", names.join(", "))));
            default
        }
    }
}

const FORMS: [(&str, MatrixForm); 2] = [("hamiltonian", MatrixForm::Hamiltonian), ("generator", MatrixForm::Generator)];
const FIDELITIES: [(&str, FidelityMethod); 3] = [
    ("closed", FidelityMethod::Closed),
    ("exact", FidelityMethod::Exact),
    ("mc", FidelityMethod::MonteCarlo),
];
const SCHEMES: [(&str, SchemeChoice); 2] = [("rk4", SchemeChoice::Rk4), ("midpoint_magnus", SchemeChoice::MidpointMagnus)];
const METHODS: [(&str, Method); 3] = [("auto", Method::Auto), ("one_component", Method::OneComponent), ("full", Method::Full)];
const MODES: [(&str, ControlMode); 6] = [
    ("none", ControlMode::None),
    ("leo_rotating", ControlMode::LeoRotating),
    ("leo_lab", ControlMode::LeoLab),
    ("scaled_hamiltonian", ControlMode::ScaledHamiltonian),
    ("parity_kick", ControlMode::ParityKick),
    ("zeno", ControlMode::Zeno),
];
const SHAPES: [(&str, PulseShape); 2] = [("rect", PulseShape::Rect), ("ideal", PulseShape::Ideal)];
const SIGNS: [(&str, SignPolicy); 3] = [
    ("constant", SignPolicy::Constant),
    ("periodic_flip", SignPolicy::PeriodicFlip),
    ("random_flip", SignPolicy::RandomFlip),
];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|(_, o)| *o == v).map(|(n, _)| *n).unwrap_or("?")
}

fn parse_model(root: &Table, issues: &mut Vec<ConfigIssue>) -> Option<ModelConfig> {
    let mut s = Section::new(root, "model", true, issues);
    s.table?;
    let Some(kind) = s.required("type", issues, as_str, "a string") else {
        s.finish(issues);
        return None;
    };
    let model = (|| Some(match kind.as_str() {
        "generic_matrix" => {
            let form = s.get("form", issues, as_str, "a string");
            let form = choice(&s, "form", form, &FORMS, MatrixForm::Hamiltonian, issues);
            let matrix_re = s.required("matrix_re", issues, as_matrix, "an array of number arrays");
            let matrix_im = s.get("matrix_im", issues, as_matrix, "an array of number arrays");
            let target_re = s.required("target_re", issues, as_vec, "an array of numbers");
            let target_im = s.get("target_im", issues, as_vec, "an array of numbers");
            let (matrix_re, target_re) = (matrix_re?, target_re?);
            let n = matrix_re.len();
            let matrix_im = matrix_im.unwrap_or_else(|| vec![vec![0.0; n]; n]);
            let target_im = target_im.unwrap_or_else(|| vec![0.0; target_re.len()]);
            if n == 0 || matrix_re.iter().any(|r| r.len() != n) {
                issues.push(issue("model.matrix_re", "must be a non-empty square matrix"));
            } else if matrix_im.len() != n || matrix_im.iter().any(|r| r.len() != n) {
                issues.push(issue("model.matrix_im", &format!("must be {n}×{n} like matrix_re")));
            }
            if target_re.len() != n {
                issues.push(issue("model.target_re", &format!("needs {n} entries")));
            } else if target_im.len() != n {
                issues.push(issue("model.target_im", &format!("needs {n} entries")));
            } else {
                let norm: f64 = target_re.iter().zip(&target_im).map(|(a, b)| a * a + b * b).sum();
                if (norm - 1.0).abs() > 1e-9 {
                    issues.push(issue("model.target_re", &format!("target must be normalized, Σ|a|² = {norm}")));
                }
            }
            ModelConfig::GenericMatrix { form, matrix_re, matrix_im, target_re, target_im }
        }
        "two_level_adiabatic" => {
            let sweep_rate = s.required("sweep_rate", issues, as_f64, "a number");
            let gap = s.required("gap", issues, as_f64, "a number");
            if let Some(g) = gap {
                if !(g > 0.0) {
                    issues.push(issue("model.gap", "must be positive"));
                }
            }
            ModelConfig::TwoLevelAdiabatic { sweep_rate: sweep_rate?, gap: gap? }
        }
        "spin_bath" => {
            let omega = s.required("omega", issues, as_f64, "a number");
            let omegas = s.required("omegas", issues, as_vec, "an array of numbers");
            let jz = s.required("jz", issues, as_vec, "an array of numbers");
            let jperp = s.required("jperp", issues, as_vec, "an array of numbers");
            let bz = s.get("bz", issues, as_matrix, "an array of number arrays");
            let bxy = s.get("bxy", issues, as_matrix, "an array of number arrays");
            let (omegas, jz, jperp) = (omegas?, jz?, jperp?);
            let n = omegas.len();
            if n == 0 {
                issues.push(issue("model.omegas", "needs at least one bath spin"));
            }
            for (k, v) in [("jz", &jz), ("jperp", &jperp)] {
                if v.len() != n {
                    issues.push(issue(&format!("model.{k}"), &format!("needs {n} entries")));
                }
            }
            for (k, m) in [("bz", &bz), ("bxy", &bxy)] {
                if let Some(m) = m {
                    let square = m.len() == n && m.iter().all(|r| r.len() == n);
                    let symmetric = square && (0..n).all(|i| m[i][i] == 0.0 && (0..i).all(|j| m[i][j] == m[j][i]));
                    if !symmetric {
                        issues.push(issue(&format!("model.{k}"), &format!("must be a symmetric {n}×{n} matrix with zero diagonal")));
                    }
                }
            }
            ModelConfig::SpinBath { omega: omega?, omegas, jz, jperp, bz, bxy }
        }
        "qsd_multilevel" => {
            let energies = s.required("energies", issues, as_vec, "an array of numbers");
            let couplings_re = s.required("couplings_re", issues, as_vec, "an array of numbers");
            let couplings_im = s.get("couplings_im", issues, as_vec, "an array of numbers");
            let gamma = s.required("gamma", issues, as_f64, "a number");
            let amplitudes_re = s.required("amplitudes_re", issues, as_vec, "an array of numbers");
            let amplitudes_im = s.get("amplitudes_im", issues, as_vec, "an array of numbers");
            let fidelity = s.get("fidelity", issues, as_str, "a string");
            let fidelity = choice(&s, "fidelity", fidelity, &FIDELITIES, FidelityMethod::MonteCarlo, issues);
            let (energies, couplings_re, amplitudes_re) = (energies?, couplings_re?, amplitudes_re?);
            let n = energies.len();
            let couplings_im = couplings_im.unwrap_or_else(|| vec![0.0; couplings_re.len()]);
            let amplitudes_im = amplitudes_im.unwrap_or_else(|| vec![0.0; amplitudes_re.len()]);
            if n < 2 {
                issues.push(issue("model.energies", "needs at least two levels"));
            }
            if couplings_re.len() + 1 != n || couplings_im.len() != couplings_re.len() {
                issues.push(issue("model.couplings_re", &format!("needs {} entries (levels 1..n)", n.saturating_sub(1))));
            }
            if amplitudes_re.len() != n || amplitudes_im.len() != n {
                issues.push(issue("model.amplitudes_re", &format!("needs {n} entries")));
            } else {
                let norm: f64 = amplitudes_re.iter().zip(&amplitudes_im).map(|(a, b)| a * a + b * b).sum();
                if (norm - 1.0).abs() > 1e-9 {
                    issues.push(issue("model.amplitudes_re", &format!("amplitudes must be normalized, Σ|a_j|² = {norm}")));
                }
            }
            if let Some(g) = gamma {
                if !(g > 0.0) {
                    issues.push(issue("model.gamma", "must be positive"));
                }
            }
            ModelConfig::QsdMultilevel { energies, couplings_re, couplings_im, gamma: gamma?, amplitudes_re, amplitudes_im, fidelity }
        }
        other => {
            issues.push(issue(
                "model.type",
                &format!("unknown model \"{other}\", expected generic_matrix, two_level_adiabatic, spin_bath or qsd_multilevel"),
            ));
            return None;
        }
    }))();
    s.finish(issues);
    model
}

fn parse_solver(root: &Table, issues: &mut Vec<ConfigIssue>) -> Option<SolverConfig> {
    let mut s = Section::new(root, "solver", true, issues);
    s.table?;
    let t_start = s.get("t_start", issues, as_f64, "a number").unwrap_or(0.0);
    let t_end = s.required("t_end", issues, as_f64, "a number");
    let dt = s.required("dt", issues, as_f64, "a number");
    let scheme = s.get("scheme", issues, as_str, "a string");
    let scheme = choice(&s, "scheme", scheme, &SCHEMES, SchemeChoice::MidpointMagnus, issues);
    let method = s.get("method", issues, as_str, "a string");
    let method = choice(&s, "method", method, &METHODS, Method::Auto, issues);
    s.finish(issues);
    let (t_end, dt) = (t_end?, dt?);
    if let Err(e) = crate::lindyn::TimeGrid::with_step(t_start, t_end, dt) {
        issues.push(issue("solver.dt", &e.to_string()));
    }
    Some(SolverConfig { t_start, t_end, dt, scheme, method })
}

fn parse_control(root: &Table, issues: &mut Vec<ConfigIssue>) -> ControlConfig {
    let mut s = Section::new(root, "control", false, issues);
    let mode = s.get("mode", issues, as_str, "a string");
    let mode = choice(&s, "mode", mode, &MODES, ControlMode::None, issues);
    let shape = s.get("shape", issues, as_str, "a string");
    let shape = choice(&s, "shape", shape, &SHAPES, PulseShape::Rect, issues);
    let sign = s.get("sign", issues, as_str, "a string");
    let sign = choice(&s, "sign", sign, &SIGNS, SignPolicy::Constant, issues);
    let pulsed = matches!(mode, ControlMode::LeoRotating | ControlMode::LeoLab | ControlMode::ScaledHamiltonian);
    let needs_period = pulsed || mode == ControlMode::ParityKick;
    let mut num = |s: &mut Section, k: &str, needed: bool| {
        if needed {
            s.required(k, issues, as_f64, "a number")
        } else {
            s.get(k, issues, as_f64, "a number")
        }
    };
    let strength = num(&mut s, "strength", pulsed).unwrap_or(0.0);
    let duration = num(&mut s, "duration", pulsed && shape == PulseShape::Rect).unwrap_or(0.0);
    let period = num(&mut s, "period", needs_period).unwrap_or(1.0);
    let noise = num(&mut s, "noise", false).unwrap_or(0.0);
    let projections = if mode == ControlMode::Zeno {
        s.required("projections", issues, as_usize, "a non-negative integer").unwrap_or(1)
    } else {
        s.get("projections", issues, as_usize, "a non-negative integer").unwrap_or(1)
    };
    s.finish(issues);
    if needs_period && !(period > 0.0) {
        issues.push(issue("control.period", "must be positive"));
    }
    if pulsed && shape == PulseShape::Rect && !(duration > 0.0 && duration <= period) {
        issues.push(issue("control.duration", "must lie in (0, period]"));
    }
    if !(0.0..=1.0).contains(&noise) {
        issues.push(issue("control.noise", "must lie in [0, 1]"));
    }
    if noise > 0.0 && shape == PulseShape::Ideal {
        issues.push(issue("control.noise", "noisy pulses need shape = \"rect\""));
    }
    if mode == ControlMode::Zeno && projections == 0 {
        issues.push(issue("control.projections", "must be positive"));
    }
    ControlConfig { mode, shape, strength, duration, period, noise, sign, projections }
}

fn parse_ensemble(root: &Table, issues: &mut Vec<ConfigIssue>) -> EnsembleConfig {
    let mut s = Section::new(root, "ensemble", false, issues);
    let n_traj = s.get("n_traj", issues, as_usize, "a non-negative integer").unwrap_or(1000);
    let master_seed = s.get("master_seed", issues, as_seed, "an integer").unwrap_or(0);
    s.finish(issues);
    EnsembleConfig { n_traj, master_seed }
}

fn parse_output(root: &Table, issues: &mut Vec<ConfigIssue>) -> OutputConfig {
    let mut s = Section::new(root, "output", false, issues);
    let path = s.get("path", issues, as_str, "a string");
    let names = s.get("observables", issues, as_strings, "an array of strings");
    let stride = s.get("stride", issues, as_usize, "a positive integer").unwrap_or(1);
    s.finish(issues);
    if stride == 0 {
        issues.push(issue("output.stride", "must be positive"));
    }
    let mut observables = Vec::new();
    for n in names.unwrap_or_default() {
        match Observable::parse(&n) {
            Some(o) if observables.contains(&o) => issues.push(issue("output.observables", &format!("\"{n}\" listed twice"))),
            Some(o) => observables.push(o),
            None => issues.push(issue("output.observables", &format!("unknown observable \"{n}\""))),
        }
    }
    OutputConfig { path, observables, stride }
}

/// Cross-section rules: which control modes and observables each model
/// supports.
fn check_combination(cfg: &ExperimentConfig, issues: &mut Vec<ConfigIssue>) {
    use ControlMode as C;
    use Observable as O;
    let mode = cfg.control.mode;
    let mode_ok = match &cfg.model {
        ModelConfig::GenericMatrix { .. } | ModelConfig::SpinBath { .. } => {
            matches!(mode, C::None | C::LeoRotating | C::ParityKick | C::Zeno)
        }
        ModelConfig::TwoLevelAdiabatic { .. } => matches!(mode, C::None | C::LeoLab | C::ScaledHamiltonian),
        ModelConfig::QsdMultilevel { .. } => matches!(mode, C::None | C::LeoRotating),
    };
    if !mode_ok {
        issues.push(issue(
            "control.mode",
            &format!("mode \"{}\" is not available for {}", name_of(&MODES, mode), cfg.model.kind()),
        ));
    }
    if let ModelConfig::GenericMatrix { form: MatrixForm::Generator, .. } = cfg.model {
        if matches!(mode, C::ParityKick | C::Zeno) {
            issues.push(issue("control.mode", "parity kicks and projections need form = \"hamiltonian\""));
        }
    }
    if cfg.solver.method == Method::OneComponent
        && !(matches!(cfg.model, ModelConfig::GenericMatrix { .. } | ModelConfig::SpinBath { .. })
            && matches!(mode, C::None | C::LeoRotating))
    {
        issues.push(issue("solver.method", "one_component needs generic_matrix or spin_bath with mode none or leo_rotating"));
    }
    let one_component = uses_one_component(cfg);
    if cfg.output.observables.is_empty() {
        issues.push(issue("output.observables", "request at least one observable"));
    }
    for &o in &cfg.output.observables {
        let ok = match o {
            O::Control => mode != C::Zeno,
            O::Survival => mode == C::Zeno,
            _ if mode == C::Zeno => false,
            O::AbsP => !matches!(cfg.model, ModelConfig::QsdMultilevel { .. }),
            O::P => matches!(cfg.model, ModelConfig::GenericMatrix { .. } | ModelConfig::SpinBath { .. }),
            O::Leakage | O::Phase => one_component,
            O::Fidelity => matches!(cfg.model, ModelConfig::QsdMultilevel { .. } | ModelConfig::TwoLevelAdiabatic { .. }),
        };
        if !ok {
            issues.push(issue(
                "output.observables",
                &format!("\"{}\" is not produced by this model/control/method combination", o.name()),
            ));
        }
    }
    if let ModelConfig::QsdMultilevel { fidelity: FidelityMethod::MonteCarlo, .. } = cfg.model {
        if cfg.ensemble.n_traj < 2 {
            issues.push(issue("ensemble.n_traj", "Monte Carlo needs at least two trajectories"));
        }
    }
    if cfg.control.shape == PulseShape::Ideal && mode != C::None && !(one_component && mode == C::LeoRotating) {
        issues.push(issue("control.shape", "ideal kicks are only resolved by the one-component solve with mode leo_rotating"));
    }
    if mode == C::Zeno {
        let steps = ((cfg.solver.t_end - cfg.solver.t_start) / cfg.solver.dt).round() as usize;
        if cfg.control.projections > 0 && steps % cfg.control.projections != 0 {
            issues.push(issue("control.projections", &format!("must divide the {steps} solver steps")));
        }
    }
    if mode == C::ParityKick {
        let ratio = cfg.control.period / cfg.solver.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            issues.push(issue("control.period", "parity kicks need a period that is a multiple of solver.dt"));
        }
    }
}

/// Whether the run goes through the scalar memory equation.
pub(crate) fn uses_one_component(cfg: &ExperimentConfig) -> bool {
    let model_ok = matches!(cfg.model, ModelConfig::GenericMatrix { .. } | ModelConfig::SpinBath { .. });
    let mode_ok = matches!(cfg.control.mode, ControlMode::None | ControlMode::LeoRotating);
    model_ok && mode_ok && cfg.solver.method != Method::Full
}

impl ExperimentConfig {
    /// Soft problems that do not prevent a run.
    pub fn warnings(&self) -> Vec<String> {
        let c = &self.control;
        let mut out = Vec::new();
        let pulsed = matches!(c.mode, ControlMode::LeoRotating | ControlMode::LeoLab | ControlMode::ScaledHamiltonian);
        if pulsed && c.shape == PulseShape::Rect && self.solver.dt > 0.25 * c.duration {
            out.push(format!(
                "solver.dt = {} exceeds a quarter of the pulse width {}; pulse edges are sub-sampled",
                self.solver.dt, c.duration
            ));
        }
        out
    }

    /// Serializes to the same document dialect [`parse_config`] reads,
    /// with every default spelled out.
    pub fn to_table(&self) -> Table {
        fn arr(v: &[f64]) -> Value {
            Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
        }
        fn mat(m: &[Vec<f64>]) -> Value {
            Value::Array(m.iter().map(|r| arr(r)).collect())
        }
        let mut model = Table::new();
        model.insert("type".into(), self.model.kind().into());
        match &self.model {
            ModelConfig::GenericMatrix { form, matrix_re, matrix_im, target_re, target_im } => {
                model.insert("form".into(), name_of(&FORMS, *form).into());
                model.insert("matrix_re".into(), mat(matrix_re));
                model.insert("matrix_im".into(), mat(matrix_im));
                model.insert("target_re".into(), arr(target_re));
                model.insert("target_im".into(), arr(target_im));
            }
            ModelConfig::TwoLevelAdiabatic { sweep_rate, gap } => {
                model.insert("sweep_rate".into(), (*sweep_rate).into());
                model.insert("gap".into(), (*gap).into());
            }
            ModelConfig::SpinBath { omega, omegas, jz, jperp, bz, bxy } => {
                model.insert("omega".into(), (*omega).into());
                model.insert("omegas".into(), arr(omegas));
                model.insert("jz".into(), arr(jz));
                model.insert("jperp".into(), arr(jperp));
                if let Some(b) = bz {
                    model.insert("bz".into(), mat(b));
                }
                if let Some(b) = bxy {
                    model.insert("bxy".into(), mat(b));
                }
            }
            ModelConfig::QsdMultilevel { energies, couplings_re, couplings_im, gamma, amplitudes_re, amplitudes_im, fidelity } => {
                model.insert("energies".into(), arr(energies));
                model.insert("couplings_re".into(), arr(couplings_re));
                model.insert("couplings_im".into(), arr(couplings_im));
                model.insert("gamma".into(), (*gamma).into());
                model.insert("amplitudes_re".into(), arr(amplitudes_re));
                model.insert("amplitudes_im".into(), arr(amplitudes_im));
                model.insert("fidelity".into(), name_of(&FIDELITIES, *fidelity).into());
            }
        }
        let s = &self.solver;
        let mut solver = Table::new();
        solver.insert("t_start".into(), s.t_start.into());
        solver.insert("t_end".into(), s.t_end.into());
        solver.insert("dt".into(), s.dt.into());
        solver.insert("scheme".into(), name_of(&SCHEMES, s.scheme).into());
        solver.insert("method".into(), name_of(&METHODS, s.method).into());
        let c = &self.control;
        let mut control = Table::new();
        control.insert("mode".into(), name_of(&MODES, c.mode).into());
        control.insert("shape".into(), name_of(&SHAPES, c.shape).into());
        control.insert("strength".into(), c.strength.into());
        control.insert("duration".into(), c.duration.into());
        control.insert("period".into(), c.period.into());
        control.insert("noise".into(), c.noise.into());
        control.insert("sign".into(), name_of(&SIGNS, c.sign).into());
        control.insert("projections".into(), (c.projections as i64).into());
        let mut ensemble = Table::new();
        ensemble.insert("n_traj".into(), (self.ensemble.n_traj as i64).into());
        ensemble.insert("master_seed".into(), (self.ensemble.master_seed as i64).into());
        let mut output = Table::new();
        if let Some(p) = &self.output.path {
            output.insert("path".into(), p.clone().into());
        }
        output.insert(
            "observables".into(),
            Value::Array(self.output.observables.iter().map(|o| o.name().into()).collect()),
        );
        output.insert("stride".into(), (self.output.stride as i64).into());
        let mut root = Table::new();
        root.insert("model".into(), model.into());
        root.insert("solver".into(), solver.into());
        root.insert("control".into(), control.into());
        root.insert("ensemble".into(), ensemble.into());
        root.insert("output".into(), output.into());
        root
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_table()).expect("config tables always serialize")
    }
}

/// Validates an already-parsed document.
pub fn config_from_table(root: &Table) -> Result<ExperimentConfig, ConfigErrors> {
    let mut issues = Vec::new();
    for k in root.keys() {
        if !["model", "solver", "control", "ensemble", "output"].contains(&k.as_str()) {
            issues.push(issue(k, "unknown section"));
        }
    }
    let model = parse_model(root, &mut issues);
    let solver = parse_solver(root, &mut issues);
    let control = parse_control(root, &mut issues);
    let ensemble = parse_ensemble(root, &mut issues);
    let output = parse_output(root, &mut issues);
    let (Some(model), Some(solver)) = (model, solver) else {
        return Err(ConfigErrors(issues));
    };
    let cfg = ExperimentConfig { model, solver, control, ensemble, output };
    check_combination(&cfg, &mut issues);
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(issues))
    }
}

/// Parses and validates a TOML experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors::single("<document>", e.message().to_string())
    })?;
    config_from_table(&root)
}
