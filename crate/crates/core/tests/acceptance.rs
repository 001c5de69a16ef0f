//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the terminal.

mod common;

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::Rng;
use squid_uqcm::dynamics::{apply_pulse, build_generator, evolve_exact, evolve_oracle};
use squid_uqcm::hilbert::{equal_up_to_global_phase, inner_product};
use squid_uqcm::protocol::{
    build_uqcm_schedule, cnot_cavity_control, initial_state, process_one, process_two, run_uqcm,
    RunOptions,
};
use squid_uqcm::validate::random_state;
use squid_uqcm::verify::{
    bloch_samples, clone_fidelities, phase_aligned_deviation, step_conformance, target_state,
    universality_sweep, Stats, SweepOptions,
};
use squid_uqcm::{
    BasisSpec, CouplingConfig, InputQubit, Level, PulseKind, PulseOp, PureState, Qubit, C64,
};

const FIVE_SIXTHS: f64 = 5.0 / 6.0;
const SEED: u64 = 20240607;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn cfg() -> CouplingConfig {
    CouplingConfig::default()
}

fn inputs() -> Vec<InputQubit> {
    bloch_samples(100, SEED)
        .into_iter()
        .map(|(t, p)| InputQubit::from_bloch(t, p))
        .collect()
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn clone_fidelity() -> Outcome {
    let qs = inputs();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for q in &qs {
        let (fin, _) = run_uqcm(q, &cfg()).unwrap();
        let r = clone_fidelities(&fin, q).unwrap();
        worst = worst
            .max((r.fidelity_squid2 - FIVE_SIXTHS).abs())
            .max((r.fidelity_squid3 - FIVE_SIXTHS).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-9 && elapsed < 1.0,
        format!("max |F - 5/6| = {worst:.3e} (< 1e-9), 100 runs in {elapsed:.3} s (< 1 s)"),
    )
}

fn universality() -> Outcome {
    let f2: Vec<f64> = inputs()
        .iter()
        .map(|q| {
            let (fin, _) = run_uqcm(q, &cfg()).unwrap();
            clone_fidelities(&fin, q).unwrap().fidelity_squid2
        })
        .collect();
    let var = Stats::of(&f2).variance;
    outcome(var < 1e-18, format!("Var(F2) = {var:.3e} (< 1e-18)"))
}

fn final_state_conformance() -> Outcome {
    let spec = BasisSpec::protocol();
    let mut worst = f64::INFINITY;
    for q in inputs()
        .iter()
        .chain([InputQubit::plus(), InputQubit::minus()].iter())
    {
        let (fin, _) = run_uqcm(q, &cfg()).unwrap();
        let target = target_state(q, &spec).unwrap();
        worst = worst.min(inner_product(&fin, &target).unwrap().norm());
    }
    outcome(
        worst >= 1.0 - 1e-9,
        format!("min |<run|target>| = {worst:.15} (>= 1 - 1e-9)"),
    )
}

fn step_conformance_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut snapshots = 0;
    for q in [InputQubit::plus(), InputQubit::minus()] {
        let (_, trace) = run_uqcm(&q, &cfg()).unwrap();
        for row in step_conformance(&trace, &q).unwrap() {
            if row.step >= 1 {
                snapshots += 1;
            }
            worst = worst
                .max(row.phase_aligned_deviation)
                .max(1.0 - row.overlap);
        }
    }
    outcome(
        worst <= 1e-10 && snapshots == 20,
        format!("{snapshots} snapshots, max deviation up to global phase {worst:.3e} (<= 1e-10)"),
    )
}

fn on_squid1(levels: [C64; 3], photons: usize) -> PureState {
    let g = Level::G.ket();
    let mut cavity = [C64::new(0.0, 0.0); 2];
    cavity[photons] = C64::new(1.0, 0.0);
    PureState::product(BasisSpec::protocol(), &[levels, g, g], &cavity).unwrap()
}

fn cnot_truth_table() -> Outcome {
    let (p, m) = (Qubit::plus().levels(), Qubit::minus().levels());
    let mut worst = 0.0f64;
    for (input, want) in [
        (on_squid1(p, 0), on_squid1(p, 0)),
        (on_squid1(m, 0), on_squid1(m, 0)),
        (on_squid1(p, 1), on_squid1(m, 1)),
        (on_squid1(m, 1), on_squid1(p, 1)),
    ] {
        let once = cnot_cavity_control(&input, 0, &cfg()).unwrap();
        let twice = cnot_cavity_control(&once, 0, &cfg()).unwrap();
        worst = worst
            .max(max_diff(once.amplitudes(), want.amplitudes()))
            .max(max_diff(twice.amplitudes(), input.amplitudes()));
    }
    outcome(
        worst <= 1e-12,
        format!("max amplitude error {worst:.3e} (<= 1e-12), CNOT^2 = I"),
    )
}

fn process_tables() -> Outcome {
    let neg = |l: [C64; 3]| l.map(|x| -x);
    let (p, m) = (Qubit::plus().levels(), Qubit::minus().levels());
    let (g, i) = (Level::G.ket(), Level::I.ket());
    let mut worst = 0.0f64;
    for (input, want) in [(p, neg(i)), (m, g)] {
        let (out, _) = process_one(&on_squid1(input, 0), 0, &cfg()).unwrap();
        worst = worst.max(max_diff(out.amplitudes(), on_squid1(want, 0).amplitudes()));
    }
    for (input, want) in [(g, m), (i, neg(p))] {
        let (out, _) = process_two(&on_squid1(input, 0), 0, &cfg()).unwrap();
        worst = worst.max(max_diff(out.amplitudes(), on_squid1(want, 0).amplitudes()));
    }
    let t1 = process_one(&on_squid1(g, 0), 0, &cfg()).unwrap().1;
    let t2 = process_two(&on_squid1(g, 0), 0, &cfg()).unwrap().1;
    outcome(
        worst <= 1e-10 && t1 == t2,
        format!("max amplitude error {worst:.3e} (<= 1e-10), elapsed {t1} vs {t2}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let spec = BasisSpec::protocol();
    let mut rng = common::rng(SEED);
    let mut report = Vec::new();
    let mut passed = true;
    let kinds = [
        PulseKind::Jc,
        PulseKind::DriveGe,
        PulseKind::DriveIe,
        PulseKind::Raman {
            phi1: 0.0,
            phi2: 0.0,
        },
        PulseKind::FreeEvolve,
    ];
    for kind in kinds {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let target = rng.random_range(0..3);
            let duration = rng.random_range(0.0..3.0);
            let kind = match kind {
                PulseKind::Raman { .. } => PulseKind::Raman {
                    phi1: rng.random_range(0.0..2.0 * PI),
                    phi2: rng.random_range(0.0..2.0 * PI),
                },
                other => other,
            };
            let op = PulseOp::new(kind, target, duration);
            let raman = matches!(kind, PulseKind::Raman { .. });
            let psi = random_state(spec, &mut rng, raman.then_some(target));
            let closed = apply_pulse(&psi, &op, &cfg()).unwrap();
            let exact = if raman {
                evolve_oracle(&psi, &op, &cfg()).unwrap()
            } else {
                let h = build_generator(&op, &spec, &cfg()).unwrap();
                evolve_exact(&psi, &h, duration).unwrap()
            };
            worst = worst.max(max_diff(closed.amplitudes(), exact.amplitudes()));
        }
        passed &= worst <= 1e-9;
        report.push(format!("{}={worst:.1e}", kind.name()));
    }
    outcome(
        passed,
        format!("max amplitude difference {} (<= 1e-9)", report.join(" ")),
    )
}

/// Populations grouped by everything JC on `k` conserves: the other SQUIDs,
/// whether `k` sits in `|i>`, and photons plus `k`'s excitation.
fn jc_sectors(
    psi: &PureState,
    k: usize,
) -> std::collections::BTreeMap<(Vec<Level>, bool, usize), f64> {
    let mut out = std::collections::BTreeMap::new();
    for (idx, a) in psi.amplitudes().iter().enumerate() {
        let (mut levels, n) = psi.spec().decode(idx).unwrap();
        let own = levels[k];
        levels[k] = Level::G;
        let key = (levels, own == Level::I, n + usize::from(own == Level::E));
        *out.entry(key).or_insert(0.0) += a.norm_sqr();
    }
    out
}

fn physical_invariants() -> Outcome {
    let schedule = build_uqcm_schedule(&cfg()).unwrap();
    let mut norm_err = 0.0f64;
    let mut high_photon = 0.0f64;
    let mut sector_err = 0.0f64;
    let mut ops = 0usize;
    for q in inputs().iter().take(20) {
        let mut s = initial_state(q, &cfg(), &RunOptions::default()).unwrap();
        for slot in &schedule.slots {
            for lane in &slot.lanes {
                for op in &lane.ops {
                    let next = apply_pulse(&s, op, &cfg()).unwrap();
                    if op.kind == PulseKind::Jc {
                        let (before, after) =
                            (jc_sectors(&s, op.target), jc_sectors(&next, op.target));
                        for (key, p) in &before {
                            sector_err = sector_err.max((p - after[key]).abs());
                        }
                    }
                    s = next;
                    ops += 1;
                    norm_err = norm_err.max((s.norm() - 1.0).abs());
                    high_photon = high_photon.max(s.photon_population_at_least(2));
                }
            }
        }
    }
    let mut rng = common::rng(SEED + 1);
    for _ in 0..100 {
        let k = rng.random_range(0..3);
        let s = random_state(BasisSpec::protocol(), &mut rng, None);
        let out = apply_pulse(&s, &PulseOp::jc(k, rng.random_range(0.0..5.0)), &cfg()).unwrap();
        let (before, after) = (jc_sectors(&s, k), jc_sectors(&out, k));
        for (key, p) in &before {
            sector_err = sector_err.max((p - after[key]).abs());
        }
        norm_err = norm_err.max((out.norm() - 1.0).abs());
    }
    outcome(
        norm_err <= 1e-12 && sector_err <= 1e-12 && high_photon < 1e-12,
        format!(
            "{ops} protocol ops: |norm - 1| {norm_err:.1e} (<= 1e-12), JC sector drift {sector_err:.1e} (<= 1e-12), P(n >= 2) {high_photon:.1e} (< 1e-12)"
        ),
    )
}

fn linearity() -> Outcome {
    let (_, plus) = run_uqcm(&InputQubit::plus(), &cfg()).unwrap();
    let (_, minus) = run_uqcm(&InputQubit::minus(), &cfg()).unwrap();
    let (plus, minus) = (
        &plus.step(10).unwrap().state,
        &minus.step(10).unwrap().state,
    );
    let mut worst = 0.0f64;
    for (theta, phi) in bloch_samples(20, SEED + 2) {
        let q = InputQubit::from_bloch(theta, phi);
        let (fin, _) = run_uqcm(&q, &cfg()).unwrap();
        let combo: Vec<C64> = plus
            .amplitudes()
            .iter()
            .zip(minus.amplitudes())
            .map(|(a, b)| q.alpha() * a + q.beta() * b)
            .collect();
        let combo = PureState::from_amplitudes(*fin.spec(), combo).unwrap();
        worst = worst.max(phase_aligned_deviation(&fin, &combo).unwrap());
        assert!(equal_up_to_global_phase(&fin, &combo, 1e-10).unwrap());
    }
    outcome(
        worst <= 1e-10,
        format!("max deviation up to one global phase {worst:.3e} (<= 1e-10)"),
    )
}

fn determinism() -> Outcome {
    let opts = SweepOptions {
        jobs: 4,
        ..SweepOptions::default()
    };
    let serial = SweepOptions {
        jobs: 1,
        ..SweepOptions::default()
    };
    let a = universality_sweep(50, 7, &cfg(), &opts).unwrap();
    let b = universality_sweep(50, 7, &cfg(), &serial).unwrap();
    let jittered = SweepOptions {
        timing_jitter: 0.01,
        ..opts
    };
    let c = universality_sweep(20, 7, &cfg(), &jittered).unwrap();
    let d = universality_sweep(20, 7, &cfg(), &jittered).unwrap();
    let library = a.to_csv() == b.to_csv()
        && serde_json::to_vec(&a.summary_json()).unwrap()
            == serde_json::to_vec(&b.summary_json()).unwrap()
        && c.to_csv() == d.to_csv();

    let bin = env!("CARGO_BIN_EXE_clone-sim");
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap().stdout;
    let trace = |name: &str| {
        let path = dir.path().join(name);
        Command::new(bin)
            .args(["trace", "--theta", "1.2", "--phi", "0.4", "--trace"])
            .arg(&path)
            .status()
            .unwrap();
        std::fs::read(path).unwrap()
    };
    let sweep = [
        "sweep",
        "-n",
        "30",
        "--seed",
        "11",
        "--jobs",
        "3",
        "--timing-jitter",
        "0.02",
    ];
    let cli = run(&sweep) == run(&sweep)
        && run(&["run", "--theta", "0.7", "--phi", "2.1"])
            == run(&["run", "--theta", "0.7", "--phi", "2.1"])
        && trace("a.json") == trace("b.json")
        && !run(&sweep).is_empty();
    outcome(
        library && cli,
        format!(
            "library sweeps byte-identical: {library}; CLI run/sweep/trace byte-identical: {cli}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("clone fidelity", clone_fidelity),
        ("universality", universality),
        ("final-state conformance", final_state_conformance),
        ("step conformance", step_conformance_check),
        ("CNOT truth table", cnot_truth_table),
        ("process tables", process_tables),
        ("oracle equivalence", oracle_equivalence),
        ("physical invariants", physical_invariants),
        ("linearity", linearity),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {:>2} ({name}): {}", k + 1, result.detail);
        failures += usize::from(!result.passed);
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
