use std::path::PathBuf;

use leakfree::runner::{
    parse_config, parse_sweep_values, run_experiment, run_experiment_seeded, run_sweep, ExperimentConfig,
};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn example(name: &str) -> ExperimentConfig {
    let text = std::fs::read_to_string(configs_dir().join(name)).unwrap();
    parse_config(&text).unwrap()
}

const MINIMAL: &str = r#"
[model]
type = "generic_matrix"
matrix_re = [[0.0, 1.0], [1.0, 0.0]]
target_re = [1.0, 0.0]

[solver]
t_end = 1.0
dt = 0.01

[output]
observables = ["abs_p"]
"#;

fn small_figure(n_traj: usize) -> ExperimentConfig {
    let mut cfg = example("ten_level_figure.toml");
    cfg.ensemble.n_traj = n_traj;
    cfg.solver.t_end = 2.0;
    cfg
}

#[test]
fn minimal_config_is_valid() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.output.stride, 1);
    assert_eq!(cfg.solver.t_start, 0.0);
}

#[test]
fn misspelled_key_is_named_with_its_location() {
    let text = r#"
[model]
type = "generic_matrix"
matrix_re = [[0.0, 1.0], [1.0, 0.0]]
target_re = [1.0, 0.0]

[solver]
t_end = 1.0
dt = 0.01

[control]
mode = "leo_rotating"
strenght = 3.0
duration = 0.01
period = 0.02

[output]
observables = ["abs_p"]
"#;
    let err = parse_config(text).unwrap_err();
    let unknown = err.0.iter().find(|i| i.path == "control.strenght").expect("typo reported");
    assert!(unknown.message.contains("unknown key"));
    assert!(err.0.iter().any(|i| i.path == "control.strength" && i.message.contains("missing")));
}

#[test]
fn unnormalized_amplitudes_are_rejected() {
    let text = r#"
[model]
type = "qsd_multilevel"
energies = [1.0, 0.0]
couplings_re = [0.1]
amplitudes_re = [0.6, 0.7416198487095663]
gamma = 0.5
fidelity = "closed"

[solver]
t_end = 1.0
dt = 0.01

[output]
observables = ["fidelity"]
"#;
    let err = parse_config(text).unwrap_err();
    assert!(err.0.iter().any(|i| i.path == "model.amplitudes_re" && i.message.contains("normalized")), "{err}");
}

#[test]
fn every_violation_is_reported() {
    let text = r#"
[model]
type = "generic_matrix"
matrix_re = [[0.0, 1.0], [1.0, 0.0]]
target_re = "up"

[solver]
dt = -1.0
colour = "blue"

[output]
observables = ["abs_p", "entropy"]
stride = 0
"#;
    let err = parse_config(text).unwrap_err();
    let paths: Vec<&str> = err.0.iter().map(|i| i.path.as_str()).collect();
    for p in ["model.target_re", "solver.t_end", "solver.colour", "output.observables", "output.stride"] {
        assert!(paths.contains(&p), "{p} missing from {paths:?}");
    }
}

#[test]
fn type_mismatch_and_bad_combinations() {
    let bad_type = MINIMAL.replace("dt = 0.01", "dt = \"small\"");
    assert!(parse_config(&bad_type).unwrap_err().0.iter().any(|i| i.path == "solver.dt"));
    let bad_mode = MINIMAL.replace("[output]", "[control]\nmode = \"scaled_hamiltonian\"\nstrength = 1.0\nduration = 0.01\nperiod = 0.02\n\n[output]");
    assert!(parse_config(&bad_mode).unwrap_err().0.iter().any(|i| i.path == "control.mode"));
    let bad_obs = MINIMAL.replace("[\"abs_p\"]", "[\"fidelity\"]");
    assert!(parse_config(&bad_obs).is_err());
    let bad_dt = MINIMAL.replace("dt = 0.01", "dt = 0.3");
    assert!(parse_config(&bad_dt).unwrap_err().0.iter().any(|i| i.path == "solver.dt"));
}

#[test]
fn example_configs_round_trip() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = parse_config(&std::fs::read_to_string(&path).unwrap()).unwrap();
            let again = parse_config(&cfg.to_toml_string()).unwrap();
            assert_eq!(cfg, again, "{}", path.display());
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn cosine_smoke_run() {
    let res = run_experiment(&example("cosine.toml")).unwrap();
    assert_eq!(res.columns, ["t", "abs_p", "re_p", "im_p"]);
    let t = res.column("t").unwrap();
    let a = res.column("abs_p").unwrap();
    let err = t.iter().zip(&a).map(|(t, a)| (a - t.cos().abs()).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-3, "{err}");
    assert_eq!(*t.last().unwrap(), 10.0);
}

#[test]
fn figure_config_reports_ensemble_errors() {
    let res = run_experiment(&small_figure(20)).unwrap();
    assert_eq!(res.columns, ["t", "fidelity", "fidelity_stderr"]);
    let se = res.column("fidelity_stderr").unwrap();
    assert!(se[0] < 1e-12);
    assert!(se[1..].iter().all(|s| *s > 0.0));
    let csv = res.to_csv();
    assert_eq!(csv.lines().count(), 1 + 5);
    assert!(csv.lines().nth(1).unwrap().starts_with("0.0000000000000000e0,"));
}

#[test]
fn same_seed_same_bytes() {
    let cfg = small_figure(16);
    let a = run_experiment(&cfg).unwrap().to_csv();
    let b = run_experiment(&cfg).unwrap().to_csv();
    assert_eq!(a, b);
    let c = run_experiment_seeded(&cfg, cfg.ensemble.master_seed + 1).unwrap().to_csv();
    assert_ne!(a, c);
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = small_figure(24);
    let run_on = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| run_experiment(&cfg).unwrap().to_csv())
    };
    assert_eq!(run_on(1), run_on(4));
}

#[test]
fn empty_sweep_is_a_single_run() {
    let cfg = small_figure(8);
    let sweep = run_sweep(&cfg, &[]).unwrap();
    assert_eq!(sweep.cells.len(), 1);
    assert_eq!(sweep.cells[0].1.to_csv(), run_experiment(&cfg).unwrap().to_csv());
}

#[test]
fn strength_sweep_runs_every_cell() {
    let mut cfg = example("ten_level_figure.toml");
    cfg.model = match cfg.model {
        leakfree::runner::ModelConfig::QsdMultilevel { energies, couplings_re, couplings_im, gamma, amplitudes_re, amplitudes_im, .. } => {
            leakfree::runner::ModelConfig::QsdMultilevel {
                energies,
                couplings_re,
                couplings_im,
                gamma,
                amplitudes_re,
                amplitudes_im,
                fidelity: leakfree::runner::FidelityMethod::Exact,
            }
        }
        other => other,
    };
    cfg.solver.t_end = 1.0;
    let axis = parse_sweep_values("control.strength=0,pi,2pi,4pi").unwrap();
    assert_eq!(axis.values.len(), 4);
    let gamma = parse_sweep_values("model.gamma=0.2,0.5,2,5").unwrap();
    let sweep = run_sweep(&cfg, &[axis, gamma]).unwrap();
    assert_eq!(sweep.cells.len(), 16);
    let summary = sweep.summary_csv();
    assert_eq!(summary.lines().count(), 17);
    assert!(summary.starts_with("cell,control.strength,model.gamma,final_t,final_fidelity\n"));
    let zero_phi: Vec<f64> = sweep.cells[..4].iter().map(|(_, r)| *r.column("fidelity").unwrap().last().unwrap()).collect();
    assert!(zero_phi.windows(2).all(|w| w[0] != w[1]), "gamma must vary across cells: {zero_phi:?}");
}

#[test]
fn unresolvable_sweep_key_is_a_config_error() {
    let cfg = parse_config(MINIMAL).unwrap();
    let axis = parse_sweep_values("model.nonexistent=1,2").unwrap();
    let err = run_sweep(&cfg, &[axis]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
