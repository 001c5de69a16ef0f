//! Reference states, clone fidelities and universality sweeps.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::CouplingConfig;
use crate::error::{Error, Result};
use crate::hilbert::{
    inner_product, partial_trace, qubit_expectation, BasisSpec, Level, PureState, Qubit,
    StateBuilder, Subsystem, C64, LEAKAGE_THRESHOLD, ONE, ZERO,
};
use crate::protocol::{
    run_uqcm_with, step_label, InputQubit, RunOptions, StepTrace, SQUID2, SQUID3,
};

/// Summary of one cloning run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloneReport {
    pub fidelity_squid2: f64,
    pub fidelity_squid3: f64,
    /// `|<final|target>|`
    pub target_overlap: f64,
    /// `|<A|A_perp>|` between the ancilla states read off the final state.
    pub ancilla_orthogonality: f64,
    /// Population outside `{g, i}^3 (x) {|0>, |1>}`.
    pub leakage: f64,
    pub leakage_flagged: bool,
}

impl CloneReport {
    pub fn to_json(&self) -> serde_json::Value {
        use crate::sig12;
        serde_json::json!({
            "fidelity_squid2": sig12(self.fidelity_squid2),
            "fidelity_squid3": sig12(self.fidelity_squid3),
            "target_overlap": sig12(self.target_overlap),
            "ancilla_orthogonality": sig12(self.ancilla_orthogonality),
            "leakage": sig12(self.leakage),
            "leakage_flagged": self.leakage_flagged,
        })
    }
}

fn r(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn combo(a: C64, x: [C64; 3], b: C64, y: [C64; 3]) -> [C64; 3] {
    [
        a * x[0] + b * y[0],
        a * x[1] + b * y[1],
        a * x[2] + b * y[2],
    ]
}

const VAC: [C64; 1] = [ONE];
const ONE_PHOTON: [C64; 2] = [ZERO, ONE];

fn plus() -> [C64; 3] {
    Qubit::plus().levels()
}

fn minus() -> [C64; 3] {
    Qubit::minus().levels()
}

/// Adds `coef * |s1> |Phi>_23 |cavity>` with `|Phi> = (|+-> + |-+>)/sqrt 2`.
fn add_phi(b: &mut StateBuilder, coef: C64, s1: [C64; 3], cavity: &[C64]) -> Result<()> {
    let h = coef * FRAC_1_SQRT_2;
    b.add_product(h, &[s1, plus(), minus()], cavity)?;
    b.add_product(h, &[s1, minus(), plus()], cavity)?;
    Ok(())
}

fn protocol_spec(spec: &BasisSpec) -> Result<()> {
    if spec.num_squids() != 3 {
        return Err(Error::domain(format!(
            "cloning states need 3 SQUIDs, basis has {}",
            spec.num_squids()
        )));
    }
    Ok(())
}

/// The ideal cloner output for input `q`:
/// `alpha (sqrt(2/3)|++>|A_perp> + sqrt(1/3)|Phi>|A>) + beta (sqrt(2/3)|-->|A> + sqrt(1/3)|Phi>|A_perp>)`
/// with `|A> = |g>1|0>f`, `|A_perp> = |g>1|1>f`.
pub fn target_state(q: &InputQubit, spec: &BasisSpec) -> Result<PureState> {
    reference_state(10, q, spec)
}

/// Analytic state after protocol step `step` (0 = prepared input) of the
/// ideal protocol, built directly from its amplitudes.
pub fn reference_state(step: u8, q: &InputQubit, spec: &BasisSpec) -> Result<PureState> {
    protocol_spec(spec)?;
    let (a, bt) = (q.alpha(), q.beta());
    let g = Level::G.ket();
    let i = Level::I.ket();
    let e = Level::E.ket();
    let psi = combo(a, plus(), bt, minus());
    let flipped = combo(a, minus(), bt, plus());
    let s23 = (2.0f64 / 3.0).sqrt();
    let s13 = (1.0f64 / 3.0).sqrt();
    let s16 = (1.0f64 / 6.0).sqrt();
    let im = C64::new(0.0, 1.0);

    let mut b = StateBuilder::new(*spec);
    match step {
        0 => {
            b.add_product(ONE, &[psi, g, g], &VAC)?;
        }
        1 => {
            let s2 = combo(r(s23), g, im * s13, e);
            b.add_product(ONE, &[psi, s2, g], &VAC)?;
        }
        2 => {
            b.add_product(ONE, &[psi, g, g], &[r(s23), r(s13)])?;
        }
        3 => {
            b.add_product(r(s23), &[psi, g, g], &VAC)?;
            b.add_product(r(s13), &[flipped, g, g], &ONE_PHOTON)?;
        }
        4 => {
            b.add_product(r(s23), &[psi, g, g], &VAC)?;
            b.add_product(r(s16), &[flipped, g, g], &ONE_PHOTON)?;
            b.add_product(-im * s16, &[flipped, e, g], &VAC)?;
        }
        5 => {
            b.add_product(r(s23), &[psi, g, g], &VAC)?;
            b.add_product(-im * s16, &[flipped, g, e], &VAC)?;
            b.add_product(-im * s16, &[flipped, e, g], &VAC)?;
        }
        6 => {
            b.add_product(r(s23), &[psi, g, g], &VAC)?;
            b.add_product(r(-s16), &[flipped, g, i], &VAC)?;
            b.add_product(r(-s16), &[flipped, i, g], &VAC)?;
        }
        7 => {
            b.add_product(r(s23), &[combo(-a, i, bt, g), minus(), minus()], &VAC)?;
            add_phi(&mut b, r(s13), combo(a, g, -bt, i), &VAC)?;
        }
        8 => {
            b.add_product(r(s23), &[combo(im * a, e, bt, g), minus(), minus()], &VAC)?;
            add_phi(&mut b, r(s13), combo(a, g, im * bt, e), &VAC)?;
        }
        9 => {
            b.add_product(r(s23), &[g, minus(), minus()], &[bt, a])?;
            add_phi(&mut b, r(s13), g, &[a, bt])?;
        }
        10 => {
            b.add_product(a * s23, &[g, plus(), plus()], &ONE_PHOTON)?;
            add_phi(&mut b, a * s13, g, &VAC)?;
            b.add_product(bt * s23, &[g, minus(), minus()], &VAC)?;
            add_phi(&mut b, bt * s13, g, &ONE_PHOTON)?;
        }
        _ => return Err(Error::domain(format!("no protocol step {step}"))),
    }
    b.build()
}

/// `<c2 c3|_{23} |psi>` as a vector over SQUID1 (x) cavity.
fn relative_state(state: &PureState, c2: &[C64; 3], c3: &[C64; 3]) -> Vec<C64> {
    let spec = state.spec();
    let nc = spec.cavity_dim();
    let mut out = vec![ZERO; 3 * nc];
    for (idx, amp) in state.amplitudes().iter().enumerate() {
        let l1 = spec.level_at(idx, 0).index();
        let l2 = spec.level_at(idx, SQUID2).index();
        let l3 = spec.level_at(idx, SQUID3).index();
        out[l1 * nc + spec.photons_at(idx)] += c2[l2].conj() * c3[l3].conj() * amp;
    }
    out
}

fn axpy(a: C64, x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

/// `|<A|A_perp>|` for the normalized ancilla states correlated with the clone
/// pairs `|++>`, `|-->` and `|Phi>`.
fn ancilla_overlap(state: &PureState, q: &InputQubit) -> f64 {
    let (a, b) = (q.alpha(), q.beta());
    let s23 = (2.0f64 / 3.0).sqrt();
    let s13 = (1.0f64 / 3.0).sqrt();
    let pp = relative_state(state, &plus(), &plus());
    let mm = relative_state(state, &minus(), &minus());
    let phi: Vec<C64> = relative_state(state, &plus(), &minus())
        .iter()
        .zip(relative_state(state, &minus(), &plus()))
        .map(|(x, y)| (x + y) * FRAC_1_SQRT_2 / s13)
        .collect();
    // phi = alpha A + beta A_perp
    let (anc, anc_perp) = if a.norm() >= b.norm() {
        let perp: Vec<C64> = pp.iter().map(|x| x / (a * s23)).collect();
        let anc: Vec<C64> = axpy(-b, &perp, &phi).iter().map(|x| x / a).collect();
        (anc, perp)
    } else {
        let anc: Vec<C64> = mm.iter().map(|x| x / (b * s23)).collect();
        let perp: Vec<C64> = axpy(-a, &anc, &phi).iter().map(|x| x / b).collect();
        (anc, perp)
    };
    let n1: f64 = anc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let n2: f64 = anc_perp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return 1.0;
    }
    let ip: C64 = anc.iter().zip(&anc_perp).map(|(x, y)| x.conj() * y).sum();
    (ip.norm() / (n1 * n2)).clamp(0.0, 1.0)
}

/// Per-clone fidelities `<psi_in| Tr_{not k}(final) |psi_in>` for SQUID2 and
/// SQUID3, plus overlap with the ideal output. Leakage is reported, not fatal.
pub fn clone_fidelities(final_state: &PureState, q: &InputQubit) -> Result<CloneReport> {
    let spec = final_state.spec();
    protocol_spec(spec)?;
    let psi = q.qubit();
    let fid = |k: usize| -> Result<f64> {
        let rho = partial_trace(final_state, &[Subsystem::Squid(k)])?;
        Ok(qubit_expectation(&psi, &rho).clamp(0.0, 1.0))
    };
    let target = target_state(q, spec)?;
    let leakage = final_state.leakage();
    Ok(CloneReport {
        fidelity_squid2: fid(SQUID2)?,
        fidelity_squid3: fid(SQUID3)?,
        target_overlap: inner_product(final_state, &target)?.norm().clamp(0.0, 1.0),
        ancilla_orthogonality: ancilla_overlap(final_state, q),
        leakage,
        leakage_flagged: leakage > LEAKAGE_THRESHOLD,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sample: usize,
    pub theta: f64,
    pub phi: f64,
    pub f2: f64,
    pub f3: f64,
    pub target_overlap: f64,
    pub leakage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stats {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    pub timing_jitter: f64,
    pub fock_cutoff: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            jobs: 0,
            timing_jitter: 0.0,
            fock_cutoff: BasisSpec::DEFAULT_FOCK_CUTOFF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub n: usize,
    pub rows: Vec<SweepRow>,
    pub f2: Stats,
    pub f3: Stats,
}

pub const SWEEP_CSV_HEADER: &str = "sample,theta,phi,f2,f3,target_overlap,leakage";

/// Formats with 12 significant digits.
pub fn fmt12(x: f64) -> String {
    let v = crate::sig12(x);
    if v == 0.0 {
        "0".to_string()
    } else if (1e-4..1e6).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.sample,
                fmt12(r.theta),
                fmt12(r.phi),
                fmt12(r.f2),
                fmt12(r.f3),
                fmt12(r.target_overlap),
                fmt12(r.leakage)
            ));
        }
        out
    }

    /// `{min, max, mean, variance, seed, n}` over the SQUID2 fidelities.
    pub fn summary_json(&self) -> serde_json::Value {
        use crate::sig12;
        serde_json::json!({
            "min": sig12(self.f2.min),
            "max": sig12(self.f2.max),
            "mean": sig12(self.f2.mean),
            "variance": sig12(self.f2.variance),
            "seed": self.seed,
            "n": self.n,
        })
    }
}

/// `n` Bloch-sphere angles, uniform in area: `theta = acos(1 - 2u)`,
/// `phi = 2 pi v`, with `(u, v)` drawn in order from ChaCha8 seeded by `seed`.
pub fn bloch_samples(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            ((1.0 - 2.0 * u).acos(), 2.0 * PI * v)
        })
        .collect()
}

/// Seed for the timing jitter of one sweep sample.
pub fn sample_jitter_seed(seed: u64, sample: usize) -> u64 {
    seed.wrapping_add((sample as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Clone report for one Bloch-sphere point; shared by `run` and `sweep`.
pub fn run_point(
    theta: f64,
    phi: f64,
    cfg: &CouplingConfig,
    opts: &RunOptions,
) -> Result<CloneReport> {
    let q = InputQubit::from_bloch(theta, phi);
    let (final_state, _) = run_uqcm_with(&q, cfg, opts)?;
    clone_fidelities(&final_state, &q)
}

/// Runs the cloner on `n` seeded Bloch-sphere inputs.
pub fn universality_sweep(
    n: usize,
    seed: u64,
    cfg: &CouplingConfig,
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if n == 0 {
        return Err(Error::Config("sweep needs at least one sample".into()));
    }
    cfg.validate()?;
    let samples = bloch_samples(n, seed);
    let run = |(k, &(theta, phi)): (usize, &(f64, f64))| -> Result<SweepRow> {
        let run_opts = RunOptions {
            fock_cutoff: opts.fock_cutoff,
            timing_jitter: opts.timing_jitter,
            jitter_seed: sample_jitter_seed(seed, k),
            ..RunOptions::default()
        };
        let report = run_point(theta, phi, cfg, &run_opts)?;
        Ok(SweepRow {
            sample: k,
            theta,
            phi,
            f2: report.fidelity_squid2,
            f3: report.fidelity_squid3,
            target_overlap: report.target_overlap,
            leakage: report.leakage,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        samples
            .par_iter()
            .enumerate()
            .map(run)
            .collect::<Result<_>>()
    })?;
    rows.sort_by_key(|r| r.sample);
    let f2: Vec<f64> = rows.iter().map(|r| r.f2).collect();
    let f3: Vec<f64> = rows.iter().map(|r| r.f3).collect();
    Ok(SweepReport {
        seed,
        n,
        f2: Stats::of(&f2),
        f3: Stats::of(&f3),
        rows,
    })
}

/// Agreement of one trace snapshot with its reference state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepConformance {
    pub step: u8,
    pub label: String,
    /// `|<snapshot|reference>|`
    pub overlap: f64,
    /// Max amplitude difference after removing the best global phase.
    pub phase_aligned_deviation: f64,
    /// Max amplitude difference with no phase removed.
    pub raw_deviation: f64,
}

/// Largest `|a_k - e^{i theta} b_k|` with `theta` the phase of `<b|a>`.
pub fn phase_aligned_deviation(a: &PureState, b: &PureState) -> Result<f64> {
    let ip = inner_product(b, a)?;
    let phase = if ip.norm() > 0.0 { ip / ip.norm() } else { ONE };
    Ok(max_deviation(
        a,
        &b.amplitudes().iter().map(|x| x * phase).collect::<Vec<_>>(),
    ))
}

fn max_deviation(a: &PureState, b: &[C64]) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Compares every snapshot (input and steps 1..=10) with its reference.
pub fn step_conformance(trace: &StepTrace, q: &InputQubit) -> Result<Vec<StepConformance>> {
    (0..=10u8)
        .map(|step| {
            let label = step_label(step);
            let entry = trace
                .get(&label)
                .ok_or_else(|| Error::domain(format!("trace has no snapshot labelled {label}")))?;
            let reference = reference_state(step, q, entry.state.spec())?;
            Ok(StepConformance {
                step,
                label,
                overlap: inner_product(&entry.state, &reference)?.norm(),
                phase_aligned_deviation: phase_aligned_deviation(&entry.state, &reference)?,
                raw_deviation: max_deviation(&entry.state, reference.amplitudes()),
            })
        })
        .collect()
}
