//! Reference implementations shared by the integration tests. Nothing here
//! calls into the library's numerics: matrices are dense row-major vectors,
//! Hamiltonians are assembled from projectors and exponentiated by a
//! scaled-and-squared Taylor series.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const G: usize = 0;
pub const I: usize = 1;
pub const E: usize = 2;

/// Three SQUIDs and a cavity truncated at `nmax` photons; SQUID1 is the
/// most significant digit, the cavity the least.
#[derive(Clone, Copy, Debug)]
pub struct Space {
    pub squids: usize,
    pub nmax: usize,
}

impl Space {
    pub fn new(squids: usize, nmax: usize) -> Self {
        Self { squids, nmax }
    }

    pub fn dim(&self) -> usize {
        3usize.pow(self.squids as u32) * (self.nmax + 1)
    }

    pub fn index(&self, levels: &[usize], n: usize) -> usize {
        let mut idx = 0;
        for &l in levels {
            idx = idx * 3 + l;
        }
        idx * (self.nmax + 1) + n
    }

    pub fn labels(&self, idx: usize) -> (Vec<usize>, usize) {
        let n = idx % (self.nmax + 1);
        let mut rest = idx / (self.nmax + 1);
        let mut levels = vec![0; self.squids];
        for k in (0..self.squids).rev() {
            levels[k] = rest % 3;
            rest /= 3;
        }
        (levels, n)
    }
}

#[derive(Clone, Debug)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<C>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![C::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for k in 0..n {
            m.a[k * n + k] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn at(&self, r: usize, c: usize) -> C {
        self.a[r * self.n + c]
    }

    pub fn add_at(&mut self, r: usize, c: usize, v: C) {
        self.a[r * self.n + c] += v;
    }

    pub fn mul(&self, o: &Mat) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let x = self.a[r * n + k];
                if x == C::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    out.a[r * n + c] += x * o.a[k * n + c];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: C) -> Mat {
        Mat {
            n: self.n,
            a: self.a.iter().map(|x| x * s).collect(),
        }
    }

    pub fn plus(&self, o: &Mat) -> Mat {
        Mat {
            n: self.n,
            a: self.a.iter().zip(&o.a).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self.a[r * self.n + c] * v[c]).sum())
            .collect()
    }

    fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|c| (0..self.n).map(|r| self.at(r, c).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `exp(self)` by scaling and squaring a 30-term Taylor series.
    pub fn expm(&self) -> Mat {
        let mut squarings = 0;
        let mut norm = self.norm1();
        while norm > 0.25 {
            norm /= 2.0;
            squarings += 1;
        }
        let a = self.scale(C::new(0.5f64.powi(squarings), 0.0));
        let mut sum = Mat::identity(self.n);
        let mut term = Mat::identity(self.n);
        for k in 1..30 {
            term = term.mul(&a).scale(C::new(1.0 / k as f64, 0.0));
            sum = sum.plus(&term);
        }
        for _ in 0..squarings {
            sum = sum.mul(&sum);
        }
        sum
    }

    /// `exp(-i self t)`.
    pub fn propagator(&self, t: f64) -> Mat {
        self.scale(C::new(0.0, -t)).expm()
    }
}

/// Couplings used by the oracle; mirrors the library defaults.
#[derive(Clone, Copy, Debug)]
pub struct Couplings {
    pub lambda: f64,
    pub omega_ge: f64,
    pub omega_ie: f64,
    pub lambda_prime: f64,
    pub omega_gi: f64,
}

impl Default for Couplings {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            omega_ge: 1.0,
            omega_ie: 1.0,
            lambda_prime: 1.0,
            omega_gi: 20.0,
        }
    }
}

/// Sums `coef * |a><b|` on SQUID `k` over every other label.
fn local_term(sp: Space, k: usize, terms: &[(usize, usize, C)]) -> Mat {
    let mut h = Mat::zeros(sp.dim());
    for col in 0..sp.dim() {
        let (levels, n) = sp.labels(col);
        for &(a, b, coef) in terms {
            if levels[k] == b {
                let mut l = levels.clone();
                l[k] = a;
                h.add_at(sp.index(&l, n), col, coef);
            }
        }
    }
    h
}

pub fn h_jc(sp: Space, k: usize, c: &Couplings) -> Mat {
    // lambda (|e><g| a + |g><e| a^dag)
    let mut h = Mat::zeros(sp.dim());
    for col in 0..sp.dim() {
        let (levels, n) = sp.labels(col);
        if levels[k] == G && n >= 1 {
            let mut l = levels.clone();
            l[k] = E;
            h.add_at(
                sp.index(&l, n - 1),
                col,
                C::new(c.lambda * (n as f64).sqrt(), 0.0),
            );
        }
        if levels[k] == E && n < sp.nmax {
            let mut l = levels.clone();
            l[k] = G;
            h.add_at(
                sp.index(&l, n + 1),
                col,
                C::new(c.lambda * ((n + 1) as f64).sqrt(), 0.0),
            );
        }
    }
    h
}

pub fn h_drive_ge(sp: Space, k: usize, c: &Couplings) -> Mat {
    let w = C::new(c.omega_ge, 0.0);
    local_term(sp, k, &[(G, E, w), (E, G, w)])
}

pub fn h_drive_ie(sp: Space, k: usize, c: &Couplings) -> Mat {
    let w = C::new(c.omega_ie, 0.0);
    local_term(sp, k, &[(I, E, w), (E, I, w)])
}

pub fn h_free(sp: Space, k: usize, c: &Couplings) -> Mat {
    local_term(sp, k, &[(I, I, C::new(c.omega_gi, 0.0))])
}

/// Rotating-frame effective g<->i coupling.
pub fn h_raman_frame(sp: Space, k: usize, dphi: f64, c: &Couplings) -> Mat {
    let up = C::from_polar(-c.lambda_prime, dphi);
    local_term(sp, k, &[(G, I, up), (I, G, up.conj())])
}

pub enum Prim {
    Jc,
    DriveGe,
    DriveIe,
    Raman { phi1: f64, phi2: f64 },
    Free,
}

pub fn propagate(sp: Space, k: usize, prim: &Prim, t: f64, c: &Couplings, v: &[C]) -> Vec<C> {
    match prim {
        Prim::Jc => h_jc(sp, k, c).propagator(t).apply(v),
        Prim::DriveGe => h_drive_ge(sp, k, c).propagator(t).apply(v),
        Prim::DriveIe => h_drive_ie(sp, k, c).propagator(t).apply(v),
        Prim::Free => h_free(sp, k, c).propagator(t).apply(v),
        Prim::Raman { phi1, phi2 } => {
            let rotated = h_raman_frame(sp, k, phi1 - phi2, c).propagator(t).apply(v);
            h_free(sp, k, c).propagator(t).apply(&rotated)
        }
    }
}

/// Reduced density matrix on the listed SQUIDs (in order), by explicit
/// summation over every pair of full-space indices.
pub fn reduce_to_squids(sp: Space, psi: &[C], keep: &[usize]) -> Vec<Vec<C>> {
    let d = 3usize.pow(keep.len() as u32);
    let mut rho = vec![vec![C::new(0.0, 0.0); d]; d];
    let key = |levels: &[usize]| keep.iter().fold(0, |acc, &k| acc * 3 + levels[k]);
    for a in 0..sp.dim() {
        let (la, na) = sp.labels(a);
        for b in 0..sp.dim() {
            let (lb, nb) = sp.labels(b);
            let traced_equal = na == nb
                && (0..sp.squids)
                    .filter(|k| !keep.contains(k))
                    .all(|k| la[k] == lb[k]);
            if traced_equal {
                rho[key(&la)][key(&lb)] += psi[a] * psi[b].conj();
            }
        }
    }
    rho
}

/// `<psi| rho |psi>` for a qubit `psi = (g, i)` against a 3x3 single-SQUID rho.
pub fn qubit_fidelity(rho: &[Vec<C>], g: C, i: C) -> f64 {
    let v = [g, i, C::new(0.0, 0.0)];
    let mut acc = C::new(0.0, 0.0);
    for r in 0..3 {
        for c in 0..3 {
            acc += v[r].conj() * rho[r][c] * v[c];
        }
    }
    acc.re
}

pub fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
    let v: Vec<C> = (0..dim)
        .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[C], b: &[C]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
