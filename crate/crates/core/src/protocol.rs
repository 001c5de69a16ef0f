//! Composite operations built from the primitives, and the ten-step cloning
//! schedule.
//!
//! SQUID indices are 0-based: [`SQUID1`] is the input, [`SQUID2`] and
//! [`SQUID3`] receive the clones, and SQUID1 together with the cavity ends up
//! as the ancilla.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, apply_jc, apply_pulse, CouplingConfig, PulseKind, PulseOp};
use crate::error::{Error, Result};
use crate::hilbert::{BasisSpec, Level, PureState, Qubit, C64, LEAKAGE_THRESHOLD, NORM_TOLERANCE};

pub const SQUID1: usize = 0;
pub const SQUID2: usize = 1;
pub const SQUID3: usize = 2;

/// Raman phase difference `phi1 - phi2` of Process 1.
pub const PROCESS_ONE_PHASE: f64 = 3.0 * PI / 2.0;
/// Raman phase difference `phi1 - phi2` of Process 2.
pub const PROCESS_TWO_PHASE: f64 = PI / 2.0;

/// The qubit to be cloned, `alpha |+> + beta |->`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputQubit {
    alpha: C64,
    beta: C64,
}

impl InputQubit {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() >= NORM_TOLERANCE {
            return Err(Error::Config(format!(
                "|alpha|^2 + |beta|^2 = {n}, expected 1"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Scales `(alpha, beta)` to unit norm.
    pub fn normalized(alpha: C64, beta: C64) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Config(
                "input amplitudes are zero or non-finite".into(),
            ));
        }
        Ok(Self {
            alpha: alpha / n,
            beta: beta / n,
        })
    }

    /// `(cos(theta/2), e^{i phi} sin(theta/2))`
    pub fn from_bloch(theta: f64, phi: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Self {
            alpha: C64::new(c, 0.0),
            beta: C64::from_polar(s, phi),
        }
    }

    pub fn plus() -> Self {
        Self {
            alpha: C64::new(1.0, 0.0),
            beta: C64::new(0.0, 0.0),
        }
    }

    pub fn minus() -> Self {
        Self {
            alpha: C64::new(0.0, 0.0),
            beta: C64::new(1.0, 0.0),
        }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    /// Same state in `(g, i)` amplitudes.
    pub fn qubit(&self) -> Qubit {
        Qubit::from_pm(self.alpha, self.beta)
    }
}

/// How the input qubit is written onto SQUID1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepMode {
    /// Amplitudes are injected directly.
    #[default]
    Ideal,
    /// A Raman pulse and a free-evolution wait; exact up to a global phase.
    Pulsed,
}

fn require_ground(state: &PureState, squid: usize, what: &str) -> Result<()> {
    let pop = state.level_population(squid, Level::G)?;
    if 1.0 - pop > NORM_TOLERANCE {
        return Err(Error::Precondition(format!(
            "{what}: SQUID{} must be in |g> (|g> population {pop})",
            squid + 1
        )));
    }
    Ok(())
}

/// Shortest wait `t2 >= 0` such that `omega_gi (t + t2)` is a multiple of 2 pi.
pub fn closing_wait(t: f64, omega_gi: f64) -> f64 {
    let periods = omega_gi * t / (2.0 * PI);
    let m = (periods - 1e-9).ceil().max(0.0);
    (2.0 * PI * m / omega_gi - t).max(0.0)
}

/// Pulses that take `|g>` to `q` up to a global phase.
pub fn input_pulses(squid: usize, q: &InputQubit, cfg: &CouplingConfig) -> Vec<PulseOp> {
    let target = q.qubit();
    let area = target.i.norm().atan2(target.g.norm());
    let rel = if target.g.norm() > 0.0 && target.i.norm() > 0.0 {
        target.i.arg() - target.g.arg()
    } else {
        0.0
    };
    // Raman then a closing wait maps |g> to cos|g> + i e^{-i dphi} sin|i>.
    let dphi = FRAC_PI_2 - rel;
    let t1 = area / cfg.lambda_prime;
    vec![
        PulseOp::raman(squid, t1, dphi, 0.0),
        PulseOp::free_evolve(squid, closing_wait(t1, cfg.omega_gi)),
    ]
}

/// Writes `q` onto a SQUID that is currently in `|g>`.
pub fn prepare_input(
    state: &PureState,
    squid: usize,
    q: &InputQubit,
    cfg: &CouplingConfig,
    mode: PrepMode,
) -> Result<PureState> {
    require_ground(state, squid, "input preparation")?;
    match mode {
        PrepMode::Ideal => {
            let spec = *state.spec();
            let stride = spec.squid_stride(squid);
            let qb = q.qubit();
            let src = state.amplitudes();
            let mut out = vec![C64::new(0.0, 0.0); src.len()];
            for idx in (0..spec.dimension()).filter(|&i| spec.level_at(i, squid) == Level::G) {
                out[idx] += src[idx] * qb.g;
                out[idx + stride] += src[idx] * qb.i;
            }
            PureState::from_amplitudes(spec, out)
        }
        PrepMode::Pulsed => input_pulses(squid, q, cfg)
            .iter()
            .try_fold(state.clone(), |s, op| apply_pulse(&s, op, cfg)),
    }
}

/// Cavity-controlled NOT on the `{|+>, |->}` qubit of `squid`: a full
/// `pi / lambda` SQUID-cavity cycle.
pub fn cnot_cavity_control(
    state: &PureState,
    squid: usize,
    cfg: &CouplingConfig,
) -> Result<PureState> {
    let high = state.photon_population_at_least(2);
    if high > LEAKAGE_THRESHOLD {
        return Err(Error::Leakage {
            context: "CNOT control: photon number >= 2".into(),
            population: high,
            threshold: LEAKAGE_THRESHOLD,
        });
    }
    dynamics::check_excited_population(state, squid, "CNOT target")?;
    apply_jc(state, squid, PI / cfg.lambda, cfg)
}

/// Raman pulse length and closing wait shared by both processes.
pub fn raman_process_timing(cfg: &CouplingConfig) -> (f64, f64) {
    let t1 = 3.0 * PI / (4.0 * cfg.lambda_prime);
    (t1, closing_wait(t1, cfg.omega_gi))
}

pub fn process_ops(squid: usize, phase: f64, cfg: &CouplingConfig) -> [PulseOp; 2] {
    let (t1, t2) = raman_process_timing(cfg);
    [
        PulseOp::raman(squid, t1, phase, 0.0),
        PulseOp::free_evolve(squid, t2),
    ]
}

fn run_process(
    state: &PureState,
    squid: usize,
    phase: f64,
    cfg: &CouplingConfig,
) -> Result<(PureState, f64)> {
    let ops = process_ops(squid, phase, cfg);
    let out = ops
        .iter()
        .try_fold(state.clone(), |s, op| apply_pulse(&s, op, cfg))?;
    Ok((out, ops.iter().map(|o| o.duration).sum()))
}

/// `|+> -> -|i>`, `|-> -> |g>`. Returns the new state and the elapsed time.
pub fn process_one(
    state: &PureState,
    squid: usize,
    cfg: &CouplingConfig,
) -> Result<(PureState, f64)> {
    run_process(state, squid, PROCESS_ONE_PHASE, cfg)
}

/// `|g> -> |->`, `|i> -> -|+>`. Takes as long as [`process_one`].
pub fn process_two(
    state: &PureState,
    squid: usize,
    cfg: &CouplingConfig,
) -> Result<(PureState, f64)> {
    run_process(state, squid, PROCESS_TWO_PHASE, cfg)
}

/// Drive area `Omega_ge t` taking `|g>` to `sqrt(2/3)|g> + i sqrt(1/3)|e>`
/// under the `cos|g> - i sin|e>` convention.
pub fn step1_drive_area() -> f64 {
    2.0 * PI - (1.0f64 / 3.0).sqrt().asin()
}

pub fn step1_prepare_squid2(state: &PureState, cfg: &CouplingConfig) -> Result<PureState> {
    require_ground(state, SQUID2, "step 1")?;
    apply_pulse(
        state,
        &PulseOp::drive_ge(SQUID2, step1_drive_area() / cfg.omega_ge),
        cfg,
    )
}

/// Ops applied to one SQUID, back to back, within a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub target: usize,
    pub ops: Vec<PulseOp>,
}

impl Lane {
    pub fn new(target: usize, ops: Vec<PulseOp>) -> Self {
        Self { target, ops }
    }

    pub fn single(op: PulseOp) -> Self {
        Self::new(op.target, vec![op])
    }

    pub fn duration(&self) -> f64 {
        self.ops.iter().map(|o| o.duration).sum()
    }

    pub fn uses_cavity(&self) -> bool {
        self.ops.iter().any(PulseOp::uses_cavity)
    }
}

/// Lanes that run simultaneously on disjoint subsystems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    /// Protocol step (1..=10) this slot belongs to.
    pub step: u8,
    pub label: String,
    pub lanes: Vec<Lane>,
}

impl Slot {
    pub fn new(step: u8, label: impl Into<String>, lanes: Vec<Lane>) -> Self {
        Self {
            step,
            label: label.into(),
            lanes,
        }
    }

    pub fn duration(&self) -> f64 {
        self.lanes.iter().map(Lane::duration).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let mut targets: Vec<usize> = self.lanes.iter().map(|l| l.target).collect();
        targets.sort_unstable();
        if targets.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain(format!(
                "slot {}: two lanes share a SQUID",
                self.label
            )));
        }
        if self.lanes.iter().filter(|l| l.uses_cavity()).count() > 1 {
            return Err(Error::domain(format!(
                "slot {}: more than one lane couples to the cavity",
                self.label
            )));
        }
        for lane in &self.lanes {
            for op in &lane.ops {
                if op.target != lane.target {
                    return Err(Error::domain(format!(
                        "slot {}: op on SQUID{} inside lane for SQUID{}",
                        self.label,
                        op.target + 1,
                        lane.target + 1
                    )));
                }
                if !(op.duration.is_finite() && op.duration >= 0.0) {
                    return Err(Error::domain(format!(
                        "slot {}: invalid duration {}",
                        self.label, op.duration
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub slots: Vec<Slot>,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        self.slots.iter().try_for_each(Slot::validate)
    }

    /// Sum of slot durations.
    pub fn total_duration(&self) -> f64 {
        self.slots.iter().map(Slot::duration).sum()
    }

    /// Copy with every slot's ops stretched by `1 + jitter * u`, `u` uniform
    /// on `[-1, 1]` and drawn per slot from a ChaCha8 stream seeded by `seed`.
    pub fn with_jitter(&self, jitter: f64, seed: u64) -> Result<Schedule> {
        if !(jitter.is_finite() && (0.0..1.0).contains(&jitter)) {
            return Err(Error::Config(format!(
                "timing jitter must lie in [0, 1), got {jitter}"
            )));
        }
        if jitter == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for slot in &mut out.slots {
            let factor = 1.0 + jitter * (2.0 * rng.random::<f64>() - 1.0);
            for op in slot.lanes.iter_mut().flat_map(|l| l.ops.iter_mut()) {
                op.duration *= factor;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let slots: Vec<serde_json::Value> = self
            .slots
            .iter()
            .map(|s| {
                serde_json::json!({
                    "step": s.step,
                    "label": s.label,
                    "duration": crate::sig12(s.duration()),
                    "lanes": s.lanes.iter().map(|l| serde_json::json!({
                        "target": l.target,
                        "ops": l.ops.iter().map(op_json).collect::<Vec<_>>(),
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::Value::Array(slots)
    }
}

fn op_json(op: &PulseOp) -> serde_json::Value {
    let mut v = serde_json::json!({
        "variant": op.kind.name(),
        "target": op.target,
        "duration": crate::sig12(op.duration),
    });
    if let PulseKind::Raman { phi1, phi2 } = op.kind {
        v["phi1"] = crate::sig12(phi1).into();
        v["phi2"] = crate::sig12(phi2).into();
    }
    v
}

/// `total_duration` as a free function.
pub fn total_duration(schedule: &Schedule) -> f64 {
    schedule.total_duration()
}

/// The cloning protocol as 11 slots: steps 1..=9, then the two step-10 CNOTs
/// one after the other since they share the cavity.
pub fn build_uqcm_schedule(cfg: &CouplingConfig) -> Result<Schedule> {
    cfg.validate()?;
    let cnot = PI / cfg.lambda;
    let ie_flip = FRAC_PI_2 / cfg.omega_ie;
    let slots = vec![
        Slot::new(
            1,
            "step1: drive SQUID2 g<->e",
            vec![Lane::single(PulseOp::drive_ge(
                SQUID2,
                step1_drive_area() / cfg.omega_ge,
            ))],
        ),
        Slot::new(
            2,
            "step2: SQUID2-cavity swap",
            vec![Lane::single(PulseOp::jc(SQUID2, FRAC_PI_2 / cfg.lambda))],
        ),
        Slot::new(
            3,
            "step3: CNOT cavity->SQUID1",
            vec![Lane::single(PulseOp::jc(SQUID1, cnot))],
        ),
        Slot::new(
            4,
            "step4: SQUID2-cavity half swap",
            vec![Lane::single(PulseOp::jc(SQUID2, PI / (4.0 * cfg.lambda)))],
        ),
        Slot::new(
            5,
            "step5: SQUID3-cavity swap",
            vec![Lane::single(PulseOp::jc(SQUID3, FRAC_PI_2 / cfg.lambda))],
        ),
        Slot::new(
            6,
            "step6: drive SQUID2 and SQUID3 i<->e",
            vec![
                Lane::single(PulseOp::drive_ie(SQUID2, ie_flip)),
                Lane::single(PulseOp::drive_ie(SQUID3, ie_flip)),
            ],
        ),
        Slot::new(
            7,
            "step7: process 1 on SQUID1, process 2 on SQUID2 and SQUID3",
            vec![
                Lane::new(SQUID1, process_ops(SQUID1, PROCESS_ONE_PHASE, cfg).to_vec()),
                Lane::new(SQUID2, process_ops(SQUID2, PROCESS_TWO_PHASE, cfg).to_vec()),
                Lane::new(SQUID3, process_ops(SQUID3, PROCESS_TWO_PHASE, cfg).to_vec()),
            ],
        ),
        Slot::new(
            8,
            "step8: drive SQUID1 i<->e",
            vec![Lane::single(PulseOp::drive_ie(SQUID1, ie_flip))],
        ),
        Slot::new(
            9,
            "step9: SQUID1-cavity swap",
            vec![Lane::single(PulseOp::jc(SQUID1, FRAC_PI_2 / cfg.lambda))],
        ),
        Slot::new(
            10,
            "step10a: CNOT cavity->SQUID2",
            vec![Lane::single(PulseOp::jc(SQUID2, cnot))],
        ),
        Slot::new(
            10,
            "step10b: CNOT cavity->SQUID3",
            vec![Lane::single(PulseOp::jc(SQUID3, cnot))],
        ),
    ];
    let schedule = Schedule { slots };
    schedule.validate()?;
    Ok(schedule)
}

/// Snapshot taken after a protocol step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub label: String,
    /// 0 for the prepared input, otherwise the protocol step.
    pub step: u8,
    pub elapsed: f64,
    pub state: PureState,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepTrace {
    pub entries: Vec<TraceEntry>,
}

impl StepTrace {
    pub fn get(&self, label: &str) -> Option<&TraceEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn step(&self, step: u8) -> Option<&TraceEntry> {
        self.entries.iter().find(|e| e.step == step)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.entries
                .iter()
                .map(|e| {
                    serde_json::json!({
                        "label": e.label,
                        "t_elapsed": crate::sig12(e.elapsed),
                        "state": e.state.to_dump(),
                    })
                })
                .collect(),
        )
    }
}

pub fn step_label(step: u8) -> String {
    if step == 0 {
        "input".to_string()
    } else {
        format!("step{step}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub fock_cutoff: usize,
    pub prep: PrepMode,
    /// Fractional per-slot timing error, see [`Schedule::with_jitter`].
    pub timing_jitter: f64,
    pub jitter_seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            fock_cutoff: BasisSpec::DEFAULT_FOCK_CUTOFF,
            prep: PrepMode::Ideal,
            timing_jitter: 0.0,
            jitter_seed: 0,
        }
    }
}

fn apply_slot(
    state: &PureState,
    slot: &Slot,
    cfg: &CouplingConfig,
    strict: bool,
) -> Result<PureState> {
    let mut s = state.clone();
    for lane in &slot.lanes {
        for op in &lane.ops {
            // Imperfect runs leave residual |e> population; the effective
            // Raman map then acts on it as the identity.
            s = if strict {
                apply_pulse(&s, op, cfg)?
            } else {
                dynamics::apply_pulse_relaxed(&s, op, cfg)?
            };
        }
    }
    let n = s.norm();
    if (n - 1.0).abs() >= NORM_TOLERANCE {
        return Err(Error::domain(format!("norm drifted to {n}")));
    }
    Ok(s)
}

/// Runs `schedule` from `initial`, snapshotting after each protocol step and
/// calling `on_slot` after every slot.
///
/// With `strict` set, Raman pulses refuse targets with `|e>` population.
pub fn execute_schedule(
    initial: &PureState,
    schedule: &Schedule,
    cfg: &CouplingConfig,
    strict: bool,
    mut on_slot: impl FnMut(&Slot, &PureState),
) -> Result<(PureState, StepTrace)> {
    schedule.validate()?;
    let mut trace = StepTrace {
        entries: vec![TraceEntry {
            label: step_label(0),
            step: 0,
            elapsed: 0.0,
            state: initial.clone(),
        }],
    };
    let mut state = initial.clone();
    let mut elapsed = 0.0;
    for (k, slot) in schedule.slots.iter().enumerate() {
        state = apply_slot(&state, slot, cfg, strict).map_err(|e| e.at_step(&slot.label))?;
        elapsed += slot.duration();
        on_slot(slot, &state);
        let step_done = schedule
            .slots
            .get(k + 1)
            .is_none_or(|next| next.step != slot.step);
        if step_done {
            trace.entries.push(TraceEntry {
                label: step_label(slot.step),
                step: slot.step,
                elapsed,
                state: state.clone(),
            });
        }
    }
    Ok((state, trace))
}

/// `|g>1 |g>2 |g>3 |0>f` with `q` written onto SQUID1.
pub fn initial_state(q: &InputQubit, cfg: &CouplingConfig, opts: &RunOptions) -> Result<PureState> {
    let spec = BasisSpec::new(3, opts.fock_cutoff)?;
    prepare_input(&PureState::ground(spec), SQUID1, q, cfg, opts.prep)
}

/// Full protocol with default options.
pub fn run_uqcm(q: &InputQubit, cfg: &CouplingConfig) -> Result<(PureState, StepTrace)> {
    run_uqcm_with(q, cfg, &RunOptions::default())
}

pub fn run_uqcm_with(
    q: &InputQubit,
    cfg: &CouplingConfig,
    opts: &RunOptions,
) -> Result<(PureState, StepTrace)> {
    let schedule = build_uqcm_schedule(cfg)?.with_jitter(opts.timing_jitter, opts.jitter_seed)?;
    let initial = initial_state(q, cfg, opts).map_err(|e| e.at_step("input"))?;
    execute_schedule(
        &initial,
        &schedule,
        cfg,
        opts.timing_jitter == 0.0,
        |_, _| {},
    )
}
