//! Deterministic synthetic LTI test systems.
//!
//! Fitting algorithms are exercised against exact rational data: random
//! stable pole-residue systems sampled along the imaginary axis. Everything
//! is seeded, so test suites and the demo presets are reproducible.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::FrequencyDataset;
use crate::C64;

/// Strictly proper rational system in pole-residue form plus an optional
/// constant term. Poles are closed under conjugation and residues follow.
#[derive(Debug, Clone)]
pub struct RationalSystem {
    pub poles: Vec<C64>,
    pub residues: Vec<C64>,
    pub d: f64,
}

impl RationalSystem {
    pub fn eval(&self, s: C64) -> C64 {
        let mut h = C64::new(self.d, 0.0);
        for (p, r) in self.poles.iter().zip(&self.residues) {
            h += r / (s - p);
        }
        h
    }

    /// McMillan degree (number of poles).
    pub fn order(&self) -> usize {
        self.poles.len()
    }

    /// True when every pole has strictly negative real part.
    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|p| p.re < 0.0)
    }

    /// Largest real part over the poles.
    pub fn stability_margin(&self) -> f64 {
        self.poles.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random asymptotically stable system with `cc_pairs` complex-conjugate
/// pole pairs and `real_poles` real poles, resonances spread over roughly
/// one decade of (normalized) frequency.
pub fn random_stable_system(
    rng: &mut impl Rng,
    cc_pairs: usize,
    real_poles: usize,
) -> RationalSystem {
    system_with_damping(rng, cc_pairs, real_poles, 0.05, 0.6)
}

/// Random stable system with lightly damped resonances: damping ratios in
/// `[5·10⁻⁴, 10⁻²]`, the regime where unconstrained greedy fits routinely
/// produce unstable poles once the data carries small perturbations.
pub fn lightly_damped_system(rng: &mut impl Rng, cc_pairs: usize) -> RationalSystem {
    system_with_damping(rng, cc_pairs, 0, 5e-4, 1e-2)
}

fn system_with_damping(
    rng: &mut impl Rng,
    cc_pairs: usize,
    real_poles: usize,
    zeta_min: f64,
    zeta_max: f64,
) -> RationalSystem {
    let mut poles = Vec::new();
    let mut residues = Vec::new();
    for i in 0..cc_pairs {
        // spread resonant frequencies over [0.5, 6] with jitter
        let base = 0.5 + 5.5 * (i as f64 + rng.gen_range(0.1..0.9)) / cc_pairs as f64;
        let zeta = zeta_min * (zeta_max / zeta_min).powf(rng.gen_range(0.0..1.0));
        let p = C64::new(-zeta * base, base);
        let r = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        // keep residues bounded away from zero so the degree is genuine
        let r = if r.norm() < 0.1 { r + C64::new(0.3, 0.2) } else { r };
        poles.push(p);
        poles.push(p.conj());
        residues.push(r);
        residues.push(r.conj());
    }
    for _ in 0..real_poles {
        let p = -10f64.powf(rng.gen_range(-1.0..0.5));
        let r = rng.gen_range(0.2..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        poles.push(C64::new(p, 0.0));
        residues.push(C64::new(r, 0.0));
    }
    RationalSystem { poles, residues, d: 0.0 }
}

/// Logarithmically spaced frequency grid on `[fmin, fmax]`, `n ≥ 2` points.
pub fn log_freq_grid(fmin: f64, fmax: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && fmin > 0.0 && fmax > fmin);
    let lf = fmin.ln();
    let step = (fmax.ln() - lf) / (n - 1) as f64;
    (0..n).map(|i| (lf + step * i as f64).exp()).collect()
}

/// Samples a system at `jλ` over the given angular frequencies.
pub fn sample(sys: &RationalSystem, freqs: &[f64]) -> FrequencyDataset {
    let values = freqs.iter().map(|&l| sys.eval(C64::new(0.0, l))).collect();
    FrequencyDataset::new(freqs.to_vec(), values).expect("valid synthetic grid")
}

/// Adds deterministic complex perturbations of relative magnitude `level`
/// (relative to `max |h|`) to every response sample.
pub fn perturb(ds: &FrequencyDataset, level: f64, rng: &mut impl Rng) -> FrequencyDataset {
    let h_max = ds.values().iter().map(|h| h.norm()).fold(0.0_f64, f64::max);
    let values: Vec<C64> = ds
        .values()
        .iter()
        .map(|h| {
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let mag = rng.gen_range(0.0..1.0) * level * h_max;
            h + C64::new(mag * phi.cos(), mag * phi.sin())
        })
        .collect();
    FrequencyDataset::new(ds.freqs().to_vec(), values).expect("perturbation keeps grid valid")
}
