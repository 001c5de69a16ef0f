//! Self-check suite run by `clone-sim validate`: closed forms against the
//! generator route, gate tables, step conformance and clone fidelities.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{apply_pulse, evolve_oracle, CouplingConfig, PulseOp};
use crate::error::Result;
use crate::hilbert::{inner_product, BasisSpec, Level, PureState, Qubit, C64, ONE, ZERO};
use crate::protocol::{
    build_uqcm_schedule, cnot_cavity_control, execute_schedule, initial_state, process_one,
    process_two, run_uqcm, InputQubit, RunOptions,
};
use crate::verify::{bloch_samples, clone_fidelities, step_conformance, target_state};

const FIVE_SIXTHS: f64 = 5.0 / 6.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub op: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(
        module: &'static str,
        op: impl Into<String>,
        max_deviation: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            module,
            op: op.into(),
            max_deviation,
            tolerance,
            passed: max_deviation.is_finite() && max_deviation <= tolerance,
        }
    }
}

/// Normalized state with i.i.d. uniform real and imaginary parts.
/// With `no_excited_on`, that SQUID's `|e>` amplitudes are zeroed first.
pub fn random_state(
    spec: BasisSpec,
    rng: &mut impl Rng,
    no_excited_on: Option<usize>,
) -> PureState {
    let amps: Vec<C64> = (0..spec.dimension())
        .map(|idx| match no_excited_on {
            Some(k) if spec.level_at(idx, k) == Level::E => ZERO,
            _ => C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        })
        .collect();
    let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    PureState::from_amplitudes(spec, amps.iter().map(|a| a / n).collect()).expect("normalized")
}

/// One representative op of every primitive, with random duration and phases.
pub fn random_ops(rng: &mut impl Rng, target: usize) -> Vec<PulseOp> {
    let mut t = || rng.random_range(0.0..3.0);
    let (t1, t2, t3, t4, t5) = (t(), t(), t(), t(), t());
    let phi1 = rng.random_range(0.0..2.0 * PI);
    let phi2 = rng.random_range(0.0..2.0 * PI);
    vec![
        PulseOp::jc(target, t1),
        PulseOp::drive_ge(target, t2),
        PulseOp::drive_ie(target, t3),
        PulseOp::raman(target, t4, phi1, phi2),
        PulseOp::free_evolve(target, t5),
    ]
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn oracle_checks(cfg: &CouplingConfig, samples: usize, seed: u64) -> Result<Vec<Check>> {
    let spec = BasisSpec::protocol();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = ["jc", "drive_ge", "drive_ie", "raman", "free_evolve"];
    let mut oracle = [0.0f64; 5];
    let mut unitarity = [0.0f64; 5];
    for _ in 0..samples {
        let target = rng.random_range(0..3);
        let ops = random_ops(&mut rng, target);
        for (k, op) in ops.iter().enumerate() {
            let a = random_state(spec, &mut rng, Some(target));
            let b = random_state(spec, &mut rng, Some(target));
            let ua = apply_pulse(&a, op, cfg)?;
            let ub = apply_pulse(&b, op, cfg)?;
            let exact = evolve_oracle(&a, op, cfg)?;
            oracle[k] = oracle[k].max(max_diff(ua.amplitudes(), exact.amplitudes()));
            let before = inner_product(&a, &b)?;
            let after = inner_product(&ua, &ub)?;
            unitarity[k] = unitarity[k]
                .max((after - before).norm())
                .max((ua.norm() - 1.0).abs());
        }
    }
    let mut checks = Vec::new();
    for k in 0..5 {
        checks.push(Check::new(
            "dynamics",
            format!("oracle_equivalence[{}]", names[k]),
            oracle[k],
            1e-9,
        ));
        checks.push(Check::new(
            "dynamics",
            format!("unitarity[{}]", names[k]),
            unitarity[k],
            1e-12,
        ));
    }
    Ok(checks)
}

fn on_squid1(levels: [C64; 3], cavity: &[C64]) -> PureState {
    let g = Level::G.ket();
    PureState::product(BasisSpec::protocol(), &[levels, g, g], cavity).expect("normalized")
}

fn cnot_check(cfg: &CouplingConfig) -> Result<Check> {
    let (p, m) = (Qubit::plus().levels(), Qubit::minus().levels());
    let vac = [ONE];
    let one = [ZERO, ONE];
    let mut worst = 0.0f64;
    for (input, want) in [
        (on_squid1(p, &vac), on_squid1(p, &vac)),
        (on_squid1(m, &vac), on_squid1(m, &vac)),
        (on_squid1(p, &one), on_squid1(m, &one)),
        (on_squid1(m, &one), on_squid1(p, &one)),
    ] {
        let out = cnot_cavity_control(&input, 0, cfg)?;
        let back = cnot_cavity_control(&out, 0, cfg)?;
        worst = worst
            .max(max_diff(out.amplitudes(), want.amplitudes()))
            .max(max_diff(back.amplitudes(), input.amplitudes()));
    }
    Ok(Check::new("protocol", "cnot_truth_table", worst, 1e-12))
}

fn process_checks(cfg: &CouplingConfig) -> Result<Vec<Check>> {
    let s = |x: Qubit, k: f64| [x.g * k, x.i * k, ZERO];
    let vac = [ONE];
    let plus = on_squid1(Qubit::plus().levels(), &vac);
    let minus = on_squid1(Qubit::minus().levels(), &vac);
    let g = on_squid1(Level::G.ket(), &vac);
    let i = on_squid1(Level::I.ket(), &vac);
    let neg_i = on_squid1([ZERO, -ONE, ZERO], &vac);
    let neg_plus = on_squid1(s(Qubit::plus(), -1.0), &vac);

    let mut p1 = 0.0f64;
    for (input, want) in [(&plus, &neg_i), (&minus, &g)] {
        p1 = p1.max(max_diff(
            process_one(input, 0, cfg)?.0.amplitudes(),
            want.amplitudes(),
        ));
    }
    let mut p2 = 0.0f64;
    for (input, want) in [(&g, &minus), (&i, &neg_plus)] {
        p2 = p2.max(max_diff(
            process_two(input, 0, cfg)?.0.amplitudes(),
            want.amplitudes(),
        ));
    }
    let t1 = process_one(&g, 0, cfg)?.1;
    let t2 = process_two(&g, 0, cfg)?.1;
    Ok(vec![
        Check::new("protocol", "process_one_table", p1, 1e-10),
        Check::new("protocol", "process_two_table", p2, 1e-10),
        Check::new("protocol", "process_timing_equal", (t1 - t2).abs(), 0.0),
    ])
}

fn conformance_checks(cfg: &CouplingConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (name, q) in [("plus", InputQubit::plus()), ("minus", InputQubit::minus())] {
        let (_, trace) = run_uqcm(&q, cfg)?;
        let rows = step_conformance(&trace, &q)?;
        let aligned = rows
            .iter()
            .map(|r| r.phase_aligned_deviation)
            .fold(0.0, f64::max);
        let overlap = rows.iter().map(|r| 1.0 - r.overlap).fold(0.0, f64::max);
        let raw = rows.iter().map(|r| r.raw_deviation).fold(0.0, f64::max);
        out.push(Check::new(
            "protocol",
            format!("step_conformance[{name}]"),
            aligned.max(overlap),
            1e-10,
        ));
        out.push(Check::new(
            "protocol",
            format!("step_signs[{name}]"),
            raw,
            1e-10,
        ));
    }
    Ok(out)
}

fn fidelity_checks(cfg: &CouplingConfig, seed: u64) -> Result<Vec<Check>> {
    let spec = BasisSpec::protocol();
    let mut target_dev = 0.0f64;
    let mut run_dev = 0.0f64;
    let mut overlap_dev = 0.0f64;
    let mut truncation = 0.0f64;
    let schedule = build_uqcm_schedule(cfg)?;
    for (theta, phi) in bloch_samples(20, seed) {
        let q = InputQubit::from_bloch(theta, phi);
        let t = clone_fidelities(&target_state(&q, &spec)?, &q)?;
        target_dev = target_dev
            .max((t.fidelity_squid2 - FIVE_SIXTHS).abs())
            .max((t.fidelity_squid3 - FIVE_SIXTHS).abs());

        let initial = initial_state(&q, cfg, &RunOptions::default())?;
        let (fin, _) = execute_schedule(&initial, &schedule, cfg, true, |_, s| {
            truncation = truncation.max(s.photon_population_at_least(2));
        })?;
        let r = clone_fidelities(&fin, &q)?;
        run_dev = run_dev
            .max((r.fidelity_squid2 - FIVE_SIXTHS).abs())
            .max((r.fidelity_squid3 - FIVE_SIXTHS).abs());
        overlap_dev = overlap_dev.max(1.0 - r.target_overlap);
    }
    Ok(vec![
        Check::new("verify", "target_fidelity", target_dev, 1e-12),
        Check::new("verify", "run_fidelity", run_dev, 1e-9),
        Check::new("verify", "target_overlap", overlap_dev, 1e-9),
        Check::new("protocol", "photon_truncation", truncation, 1e-12),
    ])
}

/// Runs every check. Errors are only returned for invalid configurations.
pub fn run_validation(cfg: &CouplingConfig) -> Result<Vec<Check>> {
    cfg.validate()?;
    let mut checks = oracle_checks(cfg, 100, 0x5eed)?;
    checks.push(cnot_check(cfg)?);
    checks.extend(process_checks(cfg)?);
    checks.extend(conformance_checks(cfg)?);
    checks.extend(fidelity_checks(cfg, 7)?);
    Ok(checks)
}
