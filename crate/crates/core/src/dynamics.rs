//! Primitive SQUID evolutions as closed-form maps, plus a Hamiltonian route
//! (`build_generator` + `evolve_exact`) that reproduces each map by
//! eigendecomposition and serves as an independent cross-check.
//!
//! Phase conventions follow the interaction-picture maps: resonant exchanges
//! pick up `-i sin`, and the two-photon Raman map carries the `e^{-i w_gi t}`
//! factor on the `|i>` row. Free evolution is `|i> -> e^{-i w_gi t} |i>`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{BasisSpec, Level, PureState, Subsystem, C64, LEAKAGE_THRESHOLD, ONE, ZERO};

/// Coupling constants, all in angular frequency of the simulation time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    /// SQUID-cavity coupling on g<->e.
    pub lambda: f64,
    /// Classical Rabi rate on g<->e.
    pub omega_ge: f64,
    /// Classical Rabi rate on i<->e.
    pub omega_ie: f64,
    /// Effective two-photon Raman coupling between g and i.
    pub lambda_prime: f64,
    /// g-i level splitting.
    pub omega_gi: f64,
    /// Common single-photon detuning of the Raman pair. Metadata only.
    pub delta: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            omega_ge: 1.0,
            omega_ie: 1.0,
            lambda_prime: 1.0,
            omega_gi: 20.0,
            delta: 100.0,
        }
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda", self.lambda),
            ("omega_ge", self.omega_ge),
            ("omega_ie", self.omega_ie),
            ("lambda_prime", self.lambda_prime),
            ("omega_gi", self.omega_gi),
            ("delta", self.delta),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Which primitive a [`PulseOp`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PulseKind {
    /// Resonant SQUID-cavity exchange on g<->e.
    Jc,
    /// Resonant classical drive on g<->e.
    DriveGe,
    /// Resonant classical drive on i<->e.
    DriveIe,
    /// Two-photon Raman pulse pair with initial phases `phi1`, `phi2`.
    Raman { phi1: f64, phi2: f64 },
    /// Drives off; `|i>` accumulates phase at `omega_gi`.
    FreeEvolve,
}

impl PulseKind {
    pub fn name(&self) -> &'static str {
        match self {
            PulseKind::Jc => "jc",
            PulseKind::DriveGe => "drive_ge",
            PulseKind::DriveIe => "drive_ie",
            PulseKind::Raman { .. } => "raman",
            PulseKind::FreeEvolve => "free_evolve",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseOp {
    #[serde(flatten)]
    pub kind: PulseKind,
    /// 0-based SQUID index.
    pub target: usize,
    pub duration: f64,
}

impl PulseOp {
    pub fn new(kind: PulseKind, target: usize, duration: f64) -> Self {
        Self {
            kind,
            target,
            duration,
        }
    }

    pub fn jc(target: usize, duration: f64) -> Self {
        Self::new(PulseKind::Jc, target, duration)
    }

    pub fn drive_ge(target: usize, duration: f64) -> Self {
        Self::new(PulseKind::DriveGe, target, duration)
    }

    pub fn drive_ie(target: usize, duration: f64) -> Self {
        Self::new(PulseKind::DriveIe, target, duration)
    }

    pub fn raman(target: usize, duration: f64, phi1: f64, phi2: f64) -> Self {
        Self::new(PulseKind::Raman { phi1, phi2 }, target, duration)
    }

    pub fn free_evolve(target: usize, duration: f64) -> Self {
        Self::new(PulseKind::FreeEvolve, target, duration)
    }

    pub fn uses_cavity(&self) -> bool {
        matches!(self.kind, PulseKind::Jc)
    }

    /// Tensor factors the op acts on.
    pub fn subsystems(&self) -> Vec<Subsystem> {
        let mut s = vec![Subsystem::Squid(self.target)];
        if self.uses_cavity() {
            s.push(Subsystem::Cavity);
        }
        s
    }

    pub fn with_duration(self, duration: f64) -> Self {
        Self { duration, ..self }
    }

    fn check(&self, spec: &BasisSpec) -> Result<()> {
        spec.check_squid(self.target)?;
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::domain(format!(
                "pulse duration must be finite and >= 0, got {}",
                self.duration
            )));
        }
        Ok(())
    }
}

type Local = [[C64; 3]; 3];

fn rotation(a: usize, b: usize, angle: f64) -> Local {
    let mut u = [[ZERO; 3]; 3];
    for (k, row) in u.iter_mut().enumerate() {
        row[k] = ONE;
    }
    let (s, c) = angle.sin_cos();
    u[a][a] = C64::new(c, 0.0);
    u[b][b] = C64::new(c, 0.0);
    u[a][b] = C64::new(0.0, -s);
    u[b][a] = C64::new(0.0, -s);
    u
}

/// Closed-form single-SQUID map for every variant except `Jc`, as a 3x3
/// matrix over `(g, i, e)` with `u[out][in]`.
pub fn local_unitary(op: &PulseOp, cfg: &CouplingConfig) -> Option<[[C64; 3]; 3]> {
    let t = op.duration;
    let (g, i, e) = (0, 1, 2);
    match op.kind {
        PulseKind::Jc => None,
        PulseKind::DriveGe => Some(rotation(g, e, cfg.omega_ge * t)),
        PulseKind::DriveIe => Some(rotation(i, e, cfg.omega_ie * t)),
        PulseKind::FreeEvolve => {
            let mut u = rotation(g, e, 0.0);
            u[i][i] = C64::from_polar(1.0, -cfg.omega_gi * t);
            Some(u)
        }
        PulseKind::Raman { phi1, phi2 } => {
            let dphi = phi1 - phi2;
            let (s, c) = (cfg.lambda_prime * t).sin_cos();
            let free = C64::from_polar(1.0, -cfg.omega_gi * t);
            let mut u = rotation(g, e, 0.0);
            u[g][g] = C64::new(c, 0.0);
            u[i][g] = free * C64::from_polar(s, -(dphi - FRAC_PI_2));
            u[g][i] = C64::from_polar(s, dphi + FRAC_PI_2);
            u[i][i] = free * c;
            Some(u)
        }
    }
}

fn apply_local(state: &PureState, squid: usize, u: &Local) -> PureState {
    let spec = *state.spec();
    let stride = spec.squid_stride(squid);
    let src = state.amplitudes();
    let mut out = src.to_vec();
    for base in (0..spec.dimension()).filter(|&idx| spec.level_at(idx, squid) == Level::G) {
        let v = [src[base], src[base + stride], src[base + 2 * stride]];
        for (r, row) in u.iter().enumerate() {
            out[base + r * stride] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        }
    }
    state.with_amplitudes(out)
}

/// Resonant SQUID-cavity exchange.
///
/// Each block `{|g, n+1>, |e, n>}` of the target rotates by `lambda sqrt(n+1) t`
/// with the `-i sin` convention. `|i, n>`, `|g, 0>` and `|e, n_max>` are left alone.
pub fn apply_jc(
    state: &PureState,
    squid: usize,
    duration: f64,
    cfg: &CouplingConfig,
) -> Result<PureState> {
    let spec = *state.spec();
    PulseOp::jc(squid, duration).check(&spec)?;
    let two_strides = 2 * spec.squid_stride(squid);
    let src = state.amplitudes();
    let mut out = src.to_vec();
    for g_idx in 0..spec.dimension() {
        let n_plus_1 = spec.photons_at(g_idx);
        if n_plus_1 == 0 || spec.level_at(g_idx, squid) != Level::G {
            continue;
        }
        let e_idx = g_idx + two_strides - 1;
        let (s, c) = (cfg.lambda * (n_plus_1 as f64).sqrt() * duration).sin_cos();
        let (a_g, a_e) = (src[g_idx], src[e_idx]);
        let mis = C64::new(0.0, -s);
        out[g_idx] = a_g * c + a_e * mis;
        out[e_idx] = a_e * c + a_g * mis;
    }
    Ok(state.with_amplitudes(out))
}

pub fn apply_drive_ge(
    state: &PureState,
    squid: usize,
    duration: f64,
    cfg: &CouplingConfig,
) -> Result<PureState> {
    apply_pulse(state, &PulseOp::drive_ge(squid, duration), cfg)
}

pub fn apply_drive_ie(
    state: &PureState,
    squid: usize,
    duration: f64,
    cfg: &CouplingConfig,
) -> Result<PureState> {
    apply_pulse(state, &PulseOp::drive_ie(squid, duration), cfg)
}

/// Effective g<->i Raman map. The target must carry no more than
/// [`LEAKAGE_THRESHOLD`] population on `|e>`.
pub fn apply_raman(
    state: &PureState,
    squid: usize,
    duration: f64,
    phi1: f64,
    phi2: f64,
    cfg: &CouplingConfig,
) -> Result<PureState> {
    apply_pulse(state, &PulseOp::raman(squid, duration, phi1, phi2), cfg)
}

pub fn apply_free_evolution(
    state: &PureState,
    squid: usize,
    duration: f64,
    cfg: &CouplingConfig,
) -> Result<PureState> {
    apply_pulse(state, &PulseOp::free_evolve(squid, duration), cfg)
}

pub(crate) fn check_excited_population(state: &PureState, squid: usize, what: &str) -> Result<()> {
    let pop = state.level_population(squid, Level::E)?;
    if pop > LEAKAGE_THRESHOLD {
        return Err(Error::Leakage {
            context: format!("{what} on SQUID{}: |e> population", squid + 1),
            population: pop,
            threshold: LEAKAGE_THRESHOLD,
        });
    }
    Ok(())
}

/// Applies any primitive via its closed form.
pub fn apply_pulse(state: &PureState, op: &PulseOp, cfg: &CouplingConfig) -> Result<PureState> {
    if let PulseKind::Raman { .. } = op.kind {
        op.check(state.spec())?;
        check_excited_population(state, op.target, "Raman pulse")?;
    }
    apply_pulse_relaxed(state, op, cfg)
}

/// [`apply_pulse`] without the Raman `|e>`-population gate.
pub(crate) fn apply_pulse_relaxed(
    state: &PureState,
    op: &PulseOp,
    cfg: &CouplingConfig,
) -> Result<PureState> {
    op.check(state.spec())?;
    match local_unitary(op, cfg) {
        Some(u) => Ok(apply_local(state, op.target, &u)),
        None => apply_jc(state, op.target, op.duration, cfg),
    }
}

fn local_generator(op: &PulseOp, cfg: &CouplingConfig) -> Option<Local> {
    let mut h = [[ZERO; 3]; 3];
    let (g, i, e) = (0, 1, 2);
    match op.kind {
        PulseKind::Jc => return None,
        PulseKind::DriveGe => {
            h[g][e] = C64::new(cfg.omega_ge, 0.0);
            h[e][g] = h[g][e];
        }
        PulseKind::DriveIe => {
            h[i][e] = C64::new(cfg.omega_ie, 0.0);
            h[e][i] = h[i][e];
        }
        PulseKind::FreeEvolve => h[i][i] = C64::new(cfg.omega_gi, 0.0),
        PulseKind::Raman { phi1, phi2 } => {
            let dphi = phi1 - phi2;
            h[g][i] = -C64::from_polar(cfg.lambda_prime, dphi);
            h[i][g] = h[g][i].conj();
        }
    }
    Some(h)
}

/// Full-space Hermitian generator `H` of a primitive.
///
/// For every variant except `Raman`, `exp(-i H t)` is the closed-form map.
/// The Raman map is not a one-parameter group (its `e^{-i w_gi t}` factor does
/// not commute with the g<->i coupling), so for `Raman` this returns the
/// coupling in the frame co-rotating with `|i>`; the lab-frame map is
/// `exp(-i H_free t) exp(-i H t)`, see [`frame_generator`].
pub fn build_generator(
    op: &PulseOp,
    spec: &BasisSpec,
    cfg: &CouplingConfig,
) -> Result<DMatrix<C64>> {
    spec.check_squid(op.target)?;
    let dim = spec.dimension();
    let stride = spec.squid_stride(op.target);
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    match local_generator(op, cfg) {
        Some(local) => {
            for base in (0..dim).filter(|&idx| spec.level_at(idx, op.target) == Level::G) {
                for (r, row) in local.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        h[(base + r * stride, base + c * stride)] += *v;
                    }
                }
            }
        }
        None => {
            // lambda (a^dagger |g><e| + a |e><g|)
            for g_idx in 0..dim {
                let n = spec.photons_at(g_idx);
                if n == 0 || spec.level_at(g_idx, op.target) != Level::G {
                    continue;
                }
                let e_idx = g_idx + 2 * stride - 1;
                let amp = C64::new(cfg.lambda * (n as f64).sqrt(), 0.0);
                h[(g_idx, e_idx)] = amp;
                h[(e_idx, g_idx)] = amp;
            }
        }
    }
    Ok(h)
}

/// Second factor of the lab-frame map for variants that need one (Raman):
/// the free-evolution generator of the same SQUID.
pub fn frame_generator(
    op: &PulseOp,
    spec: &BasisSpec,
    cfg: &CouplingConfig,
) -> Result<Option<DMatrix<C64>>> {
    match op.kind {
        PulseKind::Raman { .. } => Ok(Some(build_generator(
            &PulseOp::free_evolve(op.target, op.duration),
            spec,
            cfg,
        )?)),
        _ => Ok(None),
    }
}

/// Largest entrywise deviation of `h` from its adjoint.
pub fn hermiticity_error(h: &DMatrix<C64>) -> f64 {
    (h - h.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `exp(-i H t) |psi>` via Hermitian eigendecomposition.
pub fn evolve_exact(
    state: &PureState,
    generator: &DMatrix<C64>,
    duration: f64,
) -> Result<PureState> {
    let dim = state.spec().dimension();
    if generator.nrows() != dim || generator.ncols() != dim {
        return Err(Error::domain(format!(
            "generator is {}x{}, state dimension is {dim}",
            generator.nrows(),
            generator.ncols()
        )));
    }
    let herr = hermiticity_error(generator);
    if herr > 1e-12 {
        return Err(Error::domain(format!(
            "generator is not Hermitian (max deviation {herr:.3e})"
        )));
    }
    let eig = SymmetricEigen::new(generator.clone());
    let v = &eig.eigenvectors;
    let psi = DVector::from_column_slice(state.amplitudes());
    let mut coeffs = v.adjoint() * psi;
    for (c, w) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        *c *= C64::from_polar(1.0, -w * duration);
    }
    let out = v * coeffs;
    Ok(state.with_amplitudes(out.iter().copied().collect()))
}

/// A primitive evaluated through its generator(s) rather than its closed form.
pub fn evolve_oracle(state: &PureState, op: &PulseOp, cfg: &CouplingConfig) -> Result<PureState> {
    op.check(state.spec())?;
    let h = build_generator(op, state.spec(), cfg)?;
    let mut out = evolve_exact(state, &h, op.duration)?;
    if let Some(frame) = frame_generator(op, state.spec(), cfg)? {
        out = evolve_exact(&out, &frame, op.duration)?;
    }
    Ok(out)
}

/// Dense JSON dump `[[[re, im], ...], ...]` of a generator, for debugging.
pub fn generator_to_json(h: &DMatrix<C64>) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..h.nrows())
        .map(|r| {
            (0..h.ncols())
                .map(|c| [h[(r, c)].re, h[(r, c)].im])
                .collect()
        })
        .collect();
    serde_json::json!(rows)
}
