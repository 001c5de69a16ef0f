//! Basis bookkeeping and state algebra for N three-level SQUIDs sharing one
//! truncated cavity mode.
//!
//! Flat basis order: SQUID1 is the slowest index, the cavity photon number the
//! fastest. Levels are enumerated `g = 0`, `i = 1`, `e = 2`. For three SQUIDs
//! and cutoff `n_max` the index of `(l1, l2, l3, n)` is
//! `((l1 * 3 + l2) * 3 + l3) * (n_max + 1) + n`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance on `| ||psi|| - 1 |` enforced when states are constructed.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Largest population on `|e>` that still counts as "inside the qubit subspace".
pub const LEAKAGE_THRESHOLD: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// One of the three Lambda-type SQUID levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    G = 0,
    I = 1,
    E = 2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G, Level::I, Level::E];

    pub fn from_index(i: usize) -> Result<Level> {
        match i {
            0 => Ok(Level::G),
            1 => Ok(Level::I),
            2 => Ok(Level::E),
            _ => Err(Error::domain(format!("level index {i} out of range 0..3"))),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column vector of this level in the `(g, i, e)` basis.
    pub fn ket(self) -> [C64; 3] {
        let mut v = [ZERO; 3];
        v[self.index()] = ONE;
        v
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Level::G => "g",
            Level::I => "i",
            Level::E => "e",
        };
        f.write_str(s)
    }
}

/// A tensor factor of the full Hilbert space. SQUIDs are 0-based: SQUID1 is `Squid(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subsystem {
    Squid(usize),
    Cavity,
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subsystem::Squid(k) => write!(f, "SQUID{}", k + 1),
            Subsystem::Cavity => f.write_str("cavity"),
        }
    }
}

/// Shape of the product space: `3^num_squids x (fock_cutoff + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisSpec {
    num_squids: usize,
    fock_cutoff: usize,
}

impl BasisSpec {
    /// Photon cutoff used by the cloning protocol. One photon suffices; the
    /// `n = 2` shell is kept so truncation errors show up as population there.
    pub const DEFAULT_FOCK_CUTOFF: usize = 2;

    pub fn new(num_squids: usize, fock_cutoff: usize) -> Result<Self> {
        if num_squids == 0 {
            return Err(Error::Config("need at least one SQUID".into()));
        }
        if fock_cutoff == 0 {
            return Err(Error::Config("fock_cutoff must be >= 1".into()));
        }
        if num_squids > 12 {
            return Err(Error::Config(format!(
                "{num_squids} SQUIDs is too many for a dense state"
            )));
        }
        Ok(Self {
            num_squids,
            fock_cutoff,
        })
    }

    /// Three SQUIDs, cutoff 2.
    pub fn protocol() -> Self {
        Self {
            num_squids: 3,
            fock_cutoff: Self::DEFAULT_FOCK_CUTOFF,
        }
    }

    pub fn num_squids(&self) -> usize {
        self.num_squids
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn cavity_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dimension(&self) -> usize {
        3usize.pow(self.num_squids as u32) * self.cavity_dim()
    }

    /// Dimensions of the tensor factors in canonical order (SQUIDs, then cavity).
    pub fn factor_dims(&self) -> Vec<usize> {
        let mut d = vec![3; self.num_squids];
        d.push(self.cavity_dim());
        d
    }

    /// Flat-index distance between neighbouring levels of `squid`.
    pub fn squid_stride(&self, squid: usize) -> usize {
        3usize.pow((self.num_squids - 1 - squid) as u32) * self.cavity_dim()
    }

    pub fn check_squid(&self, squid: usize) -> Result<()> {
        if squid >= self.num_squids {
            return Err(Error::domain(format!(
                "SQUID index {squid} out of range (have {})",
                self.num_squids
            )));
        }
        Ok(())
    }

    pub fn basis_index(&self, levels: &[Level], photons: usize) -> Result<usize> {
        if levels.len() != self.num_squids {
            return Err(Error::domain(format!(
                "expected {} levels, got {}",
                self.num_squids,
                levels.len()
            )));
        }
        if photons > self.fock_cutoff {
            return Err(Error::domain(format!(
                "photon number {photons} exceeds cutoff {}",
                self.fock_cutoff
            )));
        }
        let squid_part = levels.iter().fold(0, |acc, l| acc * 3 + l.index());
        Ok(squid_part * self.cavity_dim() + photons)
    }

    /// Same as [`basis_index`](Self::basis_index) with raw level numbers.
    pub fn basis_index_raw(&self, levels: &[usize], photons: usize) -> Result<usize> {
        let levels = levels
            .iter()
            .map(|&l| Level::from_index(l))
            .collect::<Result<Vec<_>>>()?;
        self.basis_index(&levels, photons)
    }

    pub fn decode(&self, index: usize) -> Result<(Vec<Level>, usize)> {
        if index >= self.dimension() {
            return Err(Error::domain(format!(
                "index {index} out of range (dimension {})",
                self.dimension()
            )));
        }
        let photons = index % self.cavity_dim();
        let mut rest = index / self.cavity_dim();
        let mut levels = vec![Level::G; self.num_squids];
        for slot in levels.iter_mut().rev() {
            *slot = Level::ALL[rest % 3];
            rest /= 3;
        }
        Ok((levels, photons))
    }

    /// Level of one SQUID at a flat index (no range check).
    pub fn level_at(&self, index: usize, squid: usize) -> Level {
        Level::ALL[(index / self.squid_stride(squid)) % 3]
    }

    pub fn photons_at(&self, index: usize) -> usize {
        index % self.cavity_dim()
    }

    /// Mixed-radix digits of `index`, one per tensor factor.
    fn digits(&self, index: usize, out: &mut [usize]) {
        let dims = self.num_squids + 1;
        out[dims - 1] = index % self.cavity_dim();
        let mut rest = index / self.cavity_dim();
        for k in (0..self.num_squids).rev() {
            out[k] = rest % 3;
            rest /= 3;
        }
    }

    fn check_same(&self, other: &BasisSpec) -> Result<()> {
        if self != other {
            return Err(Error::domain(format!(
                "basis mismatch: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

/// A pure state of the `{g, i}` qubit carried by a single SQUID.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Qubit {
    pub g: C64,
    pub i: C64,
}

impl Qubit {
    pub fn new(g: C64, i: C64) -> Self {
        Self { g, i }
    }

    /// `|+> = (|i> + |g>)/sqrt 2`
    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(C64::new(h, 0.0), C64::new(h, 0.0))
    }

    /// `|-> = (|i> - |g>)/sqrt 2`
    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(C64::new(-h, 0.0), C64::new(h, 0.0))
    }

    /// `alpha |+> + beta |->`
    pub fn from_pm(alpha: C64, beta: C64) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::new((alpha - beta) * h, (alpha + beta) * h)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.g.norm_sqr() + self.i.norm_sqr()
    }

    /// Embedding into the three-level `(g, i, e)` space.
    pub fn levels(&self) -> [C64; 3] {
        [self.g, self.i, ZERO]
    }
}

/// Normalized amplitude vector over a [`BasisSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    spec: BasisSpec,
    amps: Vec<C64>,
}

impl PureState {
    pub fn basis(spec: BasisSpec, levels: &[Level], photons: usize) -> Result<Self> {
        let idx = spec.basis_index(levels, photons)?;
        let mut amps = vec![ZERO; spec.dimension()];
        amps[idx] = ONE;
        Ok(Self { spec, amps })
    }

    /// All SQUIDs in `|g>`, cavity in vacuum.
    pub fn ground(spec: BasisSpec) -> Self {
        let mut amps = vec![ZERO; spec.dimension()];
        amps[0] = ONE;
        Self { spec, amps }
    }

    pub fn from_amplitudes(spec: BasisSpec, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != spec.dimension() {
            return Err(Error::domain(format!(
                "expected {} amplitudes, got {}",
                spec.dimension(),
                amps.len()
            )));
        }
        let state = Self { spec, amps };
        let n = state.norm();
        if !n.is_finite() || (n - 1.0).abs() >= NORM_TOLERANCE {
            return Err(Error::domain(format!("state is not normalized (norm {n})")));
        }
        Ok(state)
    }

    /// Tensor product of per-SQUID three-level vectors and a cavity vector.
    pub fn product(spec: BasisSpec, squids: &[[C64; 3]], cavity: &[C64]) -> Result<Self> {
        let mut b = StateBuilder::new(spec);
        b.add_product(ONE, squids, cavity)?;
        b.build()
    }

    /// Wraps amplitudes produced by a norm-preserving map of `self`.
    pub(crate) fn with_amplitudes(&self, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), self.amps.len());
        let out = Self {
            spec: self.spec,
            amps,
        };
        debug_assert!(
            (out.norm() - 1.0).abs() < 1e-10,
            "norm drifted to {}",
            out.norm()
        );
        out
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, levels: &[Level], photons: usize) -> Result<C64> {
        Ok(self.amps[self.spec.basis_index(levels, photons)?])
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescales to unit norm. The only place drift is ever repaired.
    pub fn renormalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::domain(
                "cannot renormalize a zero or non-finite state",
            ));
        }
        self.amps.iter_mut().for_each(|a| *a /= n);
        Ok(())
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        let p = C64::from_polar(1.0, theta);
        self.with_amplitudes(self.amps.iter().map(|a| a * p).collect())
    }

    /// Total probability of basis states matching `pred(levels, photons)`.
    pub fn population_where(&self, mut pred: impl FnMut(&[Level], usize) -> bool) -> f64 {
        let mut levels = vec![Level::G; self.spec.num_squids];
        let mut total = 0.0;
        for (idx, a) in self.amps.iter().enumerate() {
            for (k, l) in levels.iter_mut().enumerate() {
                *l = self.spec.level_at(idx, k);
            }
            if pred(&levels, self.spec.photons_at(idx)) {
                total += a.norm_sqr();
            }
        }
        total
    }

    pub fn level_population(&self, squid: usize, level: Level) -> Result<f64> {
        self.spec.check_squid(squid)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.spec.level_at(*idx, squid) == level)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Population in photon-number states `n >= min_photons`.
    pub fn photon_population_at_least(&self, min_photons: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.spec.photons_at(*idx) >= min_photons)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Population outside `{g, i}^N (x) {|0>, |1>}`.
    pub fn leakage(&self) -> f64 {
        self.population_where(|levels, n| n > 1 || levels.contains(&Level::E))
    }

    pub fn inner_product(&self, other: &PureState) -> Result<C64> {
        inner_product(self, other)
    }

    pub fn to_dump(&self) -> StateDump {
        StateDump {
            basis: BasisDump {
                num_squids: self.spec.num_squids,
                fock_cutoff: self.spec.fock_cutoff,
            },
            amplitudes: self
                .amps
                .iter()
                .map(|a| [crate::sig12(a.re), crate::sig12(a.im)])
                .collect(),
        }
    }
}

/// Accumulates an (unnormalized) superposition of product terms; `build`
/// checks the result is normalized.
#[derive(Debug, Clone)]
pub struct StateBuilder {
    spec: BasisSpec,
    amps: Vec<C64>,
}

impl StateBuilder {
    pub fn new(spec: BasisSpec) -> Self {
        Self {
            spec,
            amps: vec![ZERO; spec.dimension()],
        }
    }

    /// Adds `coef * |s1> (x) ... (x) |sN> (x) |cavity>`.
    pub fn add_product(
        &mut self,
        coef: C64,
        squids: &[[C64; 3]],
        cavity: &[C64],
    ) -> Result<&mut Self> {
        if squids.len() != self.spec.num_squids {
            return Err(Error::domain(format!(
                "expected {} SQUID factors, got {}",
                self.spec.num_squids,
                squids.len()
            )));
        }
        if cavity.len() > self.spec.cavity_dim() {
            return Err(Error::domain(format!(
                "cavity vector of length {} exceeds cutoff {}",
                cavity.len(),
                self.spec.fock_cutoff
            )));
        }
        let mut digits = vec![0; self.spec.num_squids + 1];
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            self.spec.digits(idx, &mut digits);
            let n = digits[self.spec.num_squids];
            let Some(&c) = cavity.get(n) else { continue };
            let mut term = coef * c;
            for (k, v) in squids.iter().enumerate() {
                term *= v[digits[k]];
            }
            *amp += term;
        }
        Ok(self)
    }

    pub fn build(self) -> Result<PureState> {
        PureState::from_amplitudes(self.spec, self.amps)
    }
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner_product(a: &PureState, b: &PureState) -> Result<C64> {
    a.spec.check_same(&b.spec)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// `|<a|b>|^2`
pub fn fidelity_pure(a: &PureState, b: &PureState) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr())
}

/// True iff `a` and `e^{i theta} b` are within `tol` in 2-norm for some theta.
///
/// The optimal theta is `arg <b|a>`; the residual is summed directly rather
/// than through `2 (1 - |<a|b>|)`, which cancels catastrophically near 1.
pub fn equal_up_to_global_phase(a: &PureState, b: &PureState, tol: f64) -> Result<bool> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let ip = inner_product(b, a)?;
    let phase = if ip.norm() > 0.0 { ip / ip.norm() } else { ONE };
    let dist = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y * phase).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(dist <= tol)
}

/// Reduced state on a subset of tensor factors.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    kept: Vec<Subsystem>,
    dims: Vec<usize>,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn kept(&self) -> &[Subsystem] {
        &self.kept
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let adj = self.entries.adjoint();
        (&self.entries - adj)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }
}

fn canonical_keep(spec: &BasisSpec, keep: &[Subsystem]) -> Result<Vec<Subsystem>> {
    if keep.is_empty() {
        return Err(Error::domain(
            "partial trace needs at least one kept subsystem",
        ));
    }
    let mut kept = keep.to_vec();
    kept.sort();
    kept.dedup();
    if kept.len() != keep.len() {
        return Err(Error::domain("duplicate subsystem in selection"));
    }
    for s in &kept {
        if let Subsystem::Squid(k) = s {
            spec.check_squid(*k)?;
        }
    }
    Ok(kept)
}

/// Traces out every factor not listed in `keep`.
///
/// The result is ordered canonically (SQUIDs ascending, cavity last)
/// regardless of the order of `keep`.
pub fn partial_trace(state: &PureState, keep: &[Subsystem]) -> Result<DensityMatrix> {
    let spec = state.spec;
    let kept = canonical_keep(&spec, keep)?;
    let factor_dims = spec.factor_dims();
    let factor_of = |s: &Subsystem| match s {
        Subsystem::Squid(k) => *k,
        Subsystem::Cavity => spec.num_squids,
    };
    let kept_factors: Vec<usize> = kept.iter().map(factor_of).collect();
    let env_factors: Vec<usize> = (0..factor_dims.len())
        .filter(|f| !kept_factors.contains(f))
        .collect();
    let dims: Vec<usize> = kept_factors.iter().map(|&f| factor_dims[f]).collect();
    let kept_dim: usize = dims.iter().product();
    let env_dim: usize = env_factors.iter().map(|&f| factor_dims[f]).product();

    // psi reshaped as (kept x env); rho = M M^dagger.
    let mut m = DMatrix::<C64>::zeros(kept_dim, env_dim);
    let mut digits = vec![0; factor_dims.len()];
    for (idx, a) in state.amps.iter().enumerate() {
        spec.digits(idx, &mut digits);
        let row = kept_factors
            .iter()
            .fold(0, |acc, &f| acc * factor_dims[f] + digits[f]);
        let col = env_factors
            .iter()
            .fold(0, |acc, &f| acc * factor_dims[f] + digits[f]);
        m[(row, col)] = *a;
    }
    let entries = &m * m.adjoint();
    Ok(DensityMatrix {
        kept,
        dims,
        entries,
    })
}

/// `<psi| rho |psi>` for a single-SQUID reduced state and a `{g, i}` qubit.
///
/// Fails with [`Error::Leakage`] when `rho` carries more than
/// [`LEAKAGE_THRESHOLD`] population on `|e>`.
pub fn fidelity_against_dm(psi: &Qubit, rho: &DensityMatrix) -> Result<f64> {
    if rho.dims != [3] || !matches!(rho.kept.as_slice(), [Subsystem::Squid(_)]) {
        return Err(Error::domain(
            "qubit fidelity needs the reduced state of exactly one SQUID",
        ));
    }
    let e_pop = rho.get(2, 2).re;
    if e_pop > LEAKAGE_THRESHOLD {
        return Err(Error::Leakage {
            context: format!("reduced state of {}", rho.kept[0]),
            population: e_pop,
            threshold: LEAKAGE_THRESHOLD,
        });
    }
    Ok(qubit_expectation(psi, rho))
}

/// `<psi| rho |psi>` over the `{g, i}` block, without the leakage gate.
pub(crate) fn qubit_expectation(psi: &Qubit, rho: &DensityMatrix) -> f64 {
    let v = [psi.g, psi.i];
    let mut acc = ZERO;
    for (r, vr) in v.iter().enumerate() {
        for (c, vc) in v.iter().enumerate() {
            acc += vr.conj() * rho.get(r, c) * vc;
        }
    }
    acc.re
}

/// JSON layout of a state: `{"basis": {...}, "amplitudes": [[re, im], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub basis: BasisDump,
    pub amplitudes: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisDump {
    pub num_squids: usize,
    pub fock_cutoff: usize,
}

impl StateDump {
    /// Rebuilds the state. Dumps are rounded to 12 significant digits, so the
    /// norm is checked loosely and then repaired explicitly.
    pub fn into_state(self) -> Result<PureState> {
        let spec = BasisSpec::new(self.basis.num_squids, self.basis.fock_cutoff)?;
        if self.amplitudes.len() != spec.dimension() {
            return Err(Error::domain(format!(
                "dump has {} amplitudes, basis needs {}",
                self.amplitudes.len(),
                spec.dimension()
            )));
        }
        let amps: Vec<C64> = self
            .amplitudes
            .iter()
            .map(|[re, im]| C64::new(*re, *im))
            .collect();
        let mut state = PureState { spec, amps };
        if (state.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "dumped state has norm {}",
                state.norm()
            )));
        }
        state.renormalize()?;
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn basis_index_examples() {
        let spec = BasisSpec::protocol();
        assert_eq!(spec.dimension(), 81);
        assert_eq!(spec.basis_index(&[Level::G; 3], 0).unwrap(), 0);
        assert_eq!(spec.basis_index(&[Level::E; 3], 2).unwrap(), 80);
        assert_eq!(
            spec.basis_index(&[Level::G, Level::I, Level::E], 1)
                .unwrap(),
            16
        );
        assert_eq!(spec.basis_index_raw(&[0, 1, 2], 1).unwrap(), 16);
    }

    #[test]
    fn basis_index_rejects_out_of_range() {
        let spec = BasisSpec::protocol();
        assert!(matches!(
            spec.basis_index(&[Level::G; 3], 3),
            Err(Error::Domain(_))
        ));
        assert!(spec.basis_index(&[Level::G; 2], 0).is_err());
        assert!(spec.basis_index_raw(&[0, 3, 0], 0).is_err());
        assert!(spec.decode(81).is_err());
        assert!(BasisSpec::new(3, 0).is_err());
        assert!(BasisSpec::new(0, 2).is_err());
    }

    #[test]
    fn decode_inverts_index_exhaustively() {
        for cutoff in 1..=3 {
            let spec = BasisSpec::new(3, cutoff).unwrap();
            for idx in 0..spec.dimension() {
                let (levels, n) = spec.decode(idx).unwrap();
                assert_eq!(spec.basis_index(&levels, n).unwrap(), idx);
                for (k, l) in levels.iter().enumerate() {
                    assert_eq!(spec.level_at(idx, k), *l);
                }
            }
        }
    }

    fn single(spec: BasisSpec, q: [C64; 3]) -> PureState {
        PureState::product(spec, &[q], &[ONE]).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let spec = BasisSpec::protocol();
        let ggg = PureState::basis(spec, &[Level::G; 3], 0).unwrap();
        let igg = PureState::basis(spec, &[Level::I, Level::G, Level::G], 0).unwrap();
        assert!((inner_product(&ggg, &ggg).unwrap() - ONE).norm() < 1e-15);
        assert_eq!(inner_product(&ggg, &igg).unwrap(), ZERO);

        let one = BasisSpec::new(1, 1).unwrap();
        let plus = single(one, Qubit::plus().levels());
        let g = single(one, Level::G.ket());
        assert!((inner_product(&plus, &g).unwrap() - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((fidelity_pure(&plus, &g).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inner_product_conjugate_linear_in_first_argument() {
        let one = BasisSpec::new(1, 1).unwrap();
        let a = single(one, [c(0.6, 0.0), c(0.0, 0.8), ZERO]);
        let b = single(one, [ZERO, ONE, ZERO]);
        // <a|b> = conj(0.8 i) = -0.8 i
        assert!((inner_product(&a, &b).unwrap() - c(0.0, -0.8)).norm() < 1e-15);
    }

    #[test]
    fn mismatched_specs_are_rejected() {
        let a = PureState::ground(BasisSpec::protocol());
        let b = PureState::ground(BasisSpec::new(3, 1).unwrap());
        assert!(inner_product(&a, &b).is_err());
        assert!(fidelity_pure(&a, &b).is_err());
        assert!(equal_up_to_global_phase(&a, &b, 1e-9).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let spec = BasisSpec::protocol();
        let psi = PureState::product(
            spec,
            &[
                Qubit::plus().levels(),
                [c(0.6, 0.0), ZERO, c(0.0, 0.8)],
                Level::G.ket(),
            ],
            &[c(0.0, FRAC_1_SQRT_2), c(FRAC_1_SQRT_2, 0.0)],
        )
        .unwrap();
        let rotated = psi.with_global_phase(1.234);
        assert!((fidelity_pure(&psi, &rotated).unwrap() - 1.0).abs() < 1e-12);
        let other = PureState::basis(spec, &[Level::E; 3], 2).unwrap();
        assert_eq!(fidelity_pure(&psi, &other).unwrap(), 0.0);
    }

    #[test]
    fn global_phase_comparison() {
        let spec = BasisSpec::protocol();
        let psi = PureState::product(
            spec,
            &[Qubit::minus().levels(), Level::I.ket(), Level::G.ket()],
            &[ONE],
        )
        .unwrap();
        let neg = psi.with_global_phase(std::f64::consts::PI);
        assert!(equal_up_to_global_phase(&psi, &neg, 1e-9).unwrap());

        let perp = PureState::product(
            spec,
            &[Qubit::plus().levels(), Level::I.ket(), Level::G.ket()],
            &[ONE],
        )
        .unwrap();
        assert!(!equal_up_to_global_phase(&psi, &perp, 1e-9).unwrap());

        let mut amps = psi.amplitudes().to_vec();
        amps[5] += c(1e-14, 0.0);
        let mut tweaked = PureState { spec, amps };
        tweaked.renormalize().unwrap();
        assert!(equal_up_to_global_phase(&psi, &tweaked, 1e-9).unwrap());
        assert!(equal_up_to_global_phase(&psi, &tweaked, 0.0).is_err());
    }

    #[test]
    fn unnormalized_amplitudes_rejected() {
        let spec = BasisSpec::new(1, 1).unwrap();
        assert!(PureState::from_amplitudes(spec, vec![ONE; 6]).is_err());
        assert!(PureState::from_amplitudes(spec, vec![ONE; 5]).is_err());
    }

    #[test]
    fn partial_trace_of_product_state() {
        let spec = BasisSpec::protocol();
        let psi = PureState::ground(spec);
        let rho = partial_trace(&psi, &[Subsystem::Squid(1)]).unwrap();
        assert_eq!(rho.dims(), &[3]);
        assert!((rho.get(0, 0) - ONE).norm() < 1e-15);
        assert!((rho.trace() - ONE).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_selection() {
        let psi = PureState::ground(BasisSpec::protocol());
        assert!(partial_trace(&psi, &[]).is_err());
        assert!(partial_trace(&psi, &[Subsystem::Squid(3)]).is_err());
        assert!(partial_trace(&psi, &[Subsystem::Cavity, Subsystem::Cavity]).is_err());
    }

    #[test]
    fn partial_trace_order_is_canonical() {
        let spec = BasisSpec::protocol();
        let psi = PureState::product(
            spec,
            &[Level::G.ket(), Level::I.ket(), Level::G.ket()],
            &[ZERO, ONE],
        )
        .unwrap();
        let rho = partial_trace(&psi, &[Subsystem::Cavity, Subsystem::Squid(1)]).unwrap();
        assert_eq!(rho.kept(), &[Subsystem::Squid(1), Subsystem::Cavity]);
        assert_eq!(rho.dims(), &[3, 3]);
        // |i>|1> -> row 1*3 + 1
        assert!((rho.get(4, 4) - ONE).norm() < 1e-15);
    }

    #[test]
    fn qubit_fidelity_examples() {
        let spec = BasisSpec::new(1, 1).unwrap();
        let plus = single(spec, Qubit::plus().levels());
        let rho = partial_trace(&plus, &[Subsystem::Squid(0)]).unwrap();
        assert!((fidelity_against_dm(&Qubit::plus(), &rho).unwrap() - 1.0).abs() < 1e-15);

        // I/2 on the qubit via a Bell-like state with the cavity
        let spec = BasisSpec::new(1, 1).unwrap();
        let mut b = StateBuilder::new(spec);
        let h = c(FRAC_1_SQRT_2, 0.0);
        b.add_product(h, &[Level::G.ket()], &[ONE]).unwrap();
        b.add_product(h, &[Level::I.ket()], &[ZERO, ONE]).unwrap();
        let mixed = b.build().unwrap();
        let rho = partial_trace(&mixed, &[Subsystem::Squid(0)]).unwrap();
        assert!((fidelity_against_dm(&Qubit::plus(), &rho).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn qubit_fidelity_flags_leakage() {
        let spec = BasisSpec::new(1, 1).unwrap();
        let e = single(
            spec,
            [
                c(0.99999, 0.0),
                ZERO,
                c((1.0f64 - 0.99999f64.powi(2)).sqrt(), 0.0),
            ],
        );
        let rho = partial_trace(&e, &[Subsystem::Squid(0)]).unwrap();
        assert!(matches!(
            fidelity_against_dm(&Qubit::plus(), &rho),
            Err(Error::Leakage { .. })
        ));
        let rho2 = partial_trace(&e, &[Subsystem::Cavity]).unwrap();
        assert!(matches!(
            fidelity_against_dm(&Qubit::plus(), &rho2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn dump_round_trip() {
        let spec = BasisSpec::protocol();
        let psi = PureState::product(
            spec,
            &[
                Qubit::plus().levels(),
                Level::I.ket(),
                [c(0.6, 0.0), ZERO, c(0.0, 0.8)],
            ],
            &[ONE],
        )
        .unwrap();
        let json = serde_json::to_string(&psi.to_dump()).unwrap();
        assert!(json.starts_with(r#"{"basis":{"num_squids":3,"fock_cutoff":2},"amplitudes":[["#));
        let back: StateDump = serde_json::from_str(&json).unwrap();
        let back = back.into_state().unwrap();
        assert!(equal_up_to_global_phase(&psi, &back, 1e-9).unwrap());
    }
}
