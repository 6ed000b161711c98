//! Loewner matrices on imaginary-axis data: the complex Loewner/shifted
//! Loewner pair with its raw interpolatory surrogate model, and the real
//! "quasi-Loewner" matrix whose null direction carries the real-valued
//! barycentric weights of the greedy fitting loop.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::barycentric::DescriptorRealization;
use crate::error::{Error, Result};
use crate::C64;

/// Complex Loewner and shifted-Loewner matrices built from disjoint left and
/// right data partitions `(μᵢ, H(jμᵢ))`, `(η_l, H(jη_l))`.
#[derive(Debug, Clone)]
pub struct LoewnerPair {
    pub l: DMatrix<C64>,
    pub ls: DMatrix<C64>,
    pub left_pts: Vec<f64>,
    pub right_pts: Vec<f64>,
    /// Column of left values `H(jμᵢ)`.
    pub vvec: DVector<C64>,
    /// Row of right values `H(jη_l)`.
    pub wvec: RowDVector<C64>,
}

/// Builds the Loewner pair
/// `L(i,l) = (H(jμᵢ) − H(jη_l)) / (jμᵢ − jη_l)` and
/// `Ls(i,l) = (jμᵢH(jμᵢ) − jη_lH(jη_l)) / (jμᵢ − jη_l)`.
pub fn loewner_pair(left: &[(f64, C64)], right: &[(f64, C64)]) -> Result<LoewnerPair> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::validation("empty Loewner partition"));
    }
    for (mu, _) in left {
        if right.iter().any(|(eta, _)| eta == mu) {
            return Err(Error::validation(format!(
                "left and right partitions share the point {mu}"
            )));
        }
    }
    let nl = left.len();
    let nr = right.len();
    let mut l = DMatrix::from_element(nl, nr, C64::new(0.0, 0.0));
    let mut ls = DMatrix::from_element(nl, nr, C64::new(0.0, 0.0));
    for (i, &(mu, hl)) in left.iter().enumerate() {
        let jmu = C64::new(0.0, mu);
        for (j, &(eta, hr)) in right.iter().enumerate() {
            let jeta = C64::new(0.0, eta);
            let denom = jmu - jeta;
            l[(i, j)] = (hl - hr) / denom;
            ls[(i, j)] = (jmu * hl - jeta * hr) / denom;
        }
    }
    Ok(LoewnerPair {
        l,
        ls,
        left_pts: left.iter().map(|p| p.0).collect(),
        right_pts: right.iter().map(|p| p.0).collect(),
        vvec: DVector::from_iterator(nl, left.iter().map(|p| p.1)),
        wvec: RowDVector::from_iterator(nr, right.iter().map(|p| p.1)),
    })
}

/// Splits dataset samples into left/right partitions by alternating index
/// (even → left, odd → right), the default interleaving.
pub fn alternate_partition(freqs: &[f64], values: &[C64]) -> (Vec<(f64, C64)>, Vec<(f64, C64)>) {
    let mut left = Vec::with_capacity(freqs.len() / 2 + 1);
    let mut right = Vec::with_capacity(freqs.len() / 2 + 1);
    for (i, (&f, &h)) in freqs.iter().zip(values).enumerate() {
        if i % 2 == 0 {
            left.push((f, h));
        } else {
            right.push((f, h));
        }
    }
    (left, right)
}

/// Raw Loewner surrogate `(Ê, Â, B̂, Ĉ) = (−L, −Ls, V, W)`, reduced by
/// projecting onto the dominant column/row spaces of the stacked Loewner
/// matrices: singular values `> rank_tol·σ₁` of `[L  Ls]` (rows) and
/// `[L; Ls]` (columns) determine the retained order.
pub fn loewner_rom(pair: &LoewnerPair, rank_tol: f64) -> Result<DescriptorRealization> {
    let nl = pair.l.nrows();
    let nr = pair.l.ncols();
    if nl != nr {
        return Err(Error::validation(format!(
            "raw Loewner surrogate needs a square pencil, got {nl}×{nr}"
        )));
    }
    // row space of [L Ls]
    let mut horiz = DMatrix::from_element(nl, 2 * nr, C64::new(0.0, 0.0));
    horiz.view_mut((0, 0), (nl, nr)).copy_from(&pair.l);
    horiz.view_mut((0, nr), (nl, nr)).copy_from(&pair.ls);
    let svd_h = horiz
        .svd(true, false);
    // column space of [L; Ls]
    let mut vert = DMatrix::from_element(2 * nl, nr, C64::new(0.0, 0.0));
    vert.view_mut((0, 0), (nl, nr)).copy_from(&pair.l);
    vert.view_mut((nl, 0), (nl, nr)).copy_from(&pair.ls);
    let svd_v = vert.svd(false, true);

    let count = |sv: &DVector<f64>| -> usize {
        let s0 = sv[0];
        if s0 == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > rank_tol * s0).count()
    };
    let r = count(&svd_h.singular_values).min(count(&svd_v.singular_values));
    if r == 0 {
        return Err(Error::Degenerate(
            "Loewner matrices vanish below the rank tolerance".into(),
        ));
    }
    // the reduced E is a projection of L alone; if L vanishes the pencil is
    // singular and the surrogate degenerates to order-0 behavior
    if pair.l.norm() <= rank_tol * svd_h.singular_values[0] {
        return Err(Error::Degenerate(
            "Loewner matrix is zero: constant data admits only an order-0 model".into(),
        ));
    }
    let y = svd_h.u.expect("left factors").columns(0, r).into_owned();
    let x = svd_v
        .v_t
        .expect("right factors")
        .rows(0, r)
        .into_owned()
        .adjoint();

    let ya = y.adjoint();
    let e = -(&ya * &pair.l * &x);
    let a = -(&ya * &pair.ls * &x);
    let b = &ya * &pair.vvec;
    let c = &pair.wvec * &x;
    Ok(DescriptorRealization::Complex { e, a, b, c })
}

/// Real rearrangement of the Loewner least-squares system. Row block 1
/// carries the real part of the linearized interpolation error at each test
/// point, row block 2 the imaginary part; columns interleave `(αᵢ, βᵢ)`,
/// the real and imaginary parts of the barycentric weights.
#[derive(Debug, Clone)]
pub struct RealQuasiLoewner {
    m: DMatrix<f64>,
    support: Vec<(f64, C64)>,
    test: Vec<(f64, C64)>,
}

impl RealQuasiLoewner {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn support(&self) -> &[(f64, C64)] {
        &self.support
    }

    pub fn test_points(&self) -> &[(f64, C64)] {
        &self.test
    }

    /// Dumps the matrix as CSV (debug aid).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.m.nrows() {
            let row: Vec<String> = (0..self.m.ncols()).map(|j| format!("{:.17e}", self.m[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Builds the real quasi-Loewner matrix of shape `2(V−ℓ) × 2ℓ` from the
/// current support pairs `(λᵢ, hᵢ)` and test pairs `(ζ_l, H(jζ_l))`.
///
/// The entries are arranged so that for weights `x = [α₁, β₁, …]` the
/// product `𝕃_real·x` equals the stacked real and imaginary parts of the
/// linearized error `E(jζ_l) = Σᵢ (H−hᵢ)/(jζ_l−jλᵢ)·wᵢ + (H−hᵢ*)/(jζ_l+jλᵢ)·wᵢ*`.
pub fn real_quasi_loewner(
    support: &[(f64, C64)],
    test: &[(f64, C64)],
) -> Result<RealQuasiLoewner> {
    let ell = support.len();
    let nt = test.len();
    if ell == 0 || nt == 0 {
        return Err(Error::validation("empty support or test set"));
    }
    for (l, _) in support {
        if test.iter().any(|(z, _)| z == l) {
            return Err(Error::validation(format!(
                "support frequency {l} also appears in the test set"
            )));
        }
    }
    let mut m = DMatrix::zeros(2 * nt, 2 * ell);
    for (l_idx, &(zeta, hz)) in test.iter().enumerate() {
        for (i, &(lambda, hi)) in support.iter().enumerate() {
            let u = hz.re - hi.re;
            let v = hz.im - hi.im;
            let vp = hz.im + hi.im;
            let dm = zeta - lambda;
            let dp = zeta + lambda;
            // real part of E
            m[(l_idx, 2 * i)] = v / dm + vp / dp;
            m[(l_idx, 2 * i + 1)] = u / dm - u / dp;
            // imaginary part of E
            m[(nt + l_idx, 2 * i)] = -u / dm - u / dp;
            m[(nt + l_idx, 2 * i + 1)] = v / dm - vp / dp;
        }
    }
    Ok(RealQuasiLoewner {
        m,
        support: support.to_vec(),
        test: test.to_vec(),
    })
}

/// Direct evaluation of the linearized error `E(jζ)` for given complex
/// weights; the quasi-Loewner matrix row pairs must reproduce its real and
/// imaginary parts. Used as an independent oracle.
pub fn linearized_error(support: &[(f64, C64)], weights: &[C64], zeta: f64, hz: C64) -> C64 {
    let jz = C64::new(0.0, zeta);
    let mut e = C64::new(0.0, 0.0);
    for (&(lambda, hi), &w) in support.iter().zip(weights) {
        let jl = C64::new(0.0, lambda);
        e += (hz - hi) / (jz - jl) * w;
        e += (hz - hi.conj()) / (jz + jl) * w.conj();
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn constant_data_gives_zero_loewner_matrix() {
        let c = C64::new(0.7, -0.2);
        let left: Vec<(f64, C64)> = vec![(1.0, c), (3.0, c)];
        let right: Vec<(f64, C64)> = vec![(2.0, c), (4.0, c)];
        let pair = loewner_pair(&left, &right).unwrap();
        assert!(pair.l.norm() == 0.0);
    }

    #[test]
    fn identity_like_data_gives_all_ones() {
        // H(jμ) = jμ → L(i,l) = 1 exactly
        let left: Vec<(f64, C64)> = vec![(1.0, C64::new(0.0, 1.0)), (3.0, C64::new(0.0, 3.0))];
        let right: Vec<(f64, C64)> = vec![(2.0, C64::new(0.0, 2.0)), (5.0, C64::new(0.0, 5.0))];
        let pair = loewner_pair(&left, &right).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((pair.l[(i, j)] - C64::new(1.0, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn entries_match_divided_difference_oracle() {
        let sys = synth::random_stable_system(&mut synth::seeded_rng(11), 3, 1);
        let freqs = synth::log_freq_grid(0.2, 8.0, 14);
        let ds = synth::sample(&sys, &freqs);
        let (left, right) = alternate_partition(ds.freqs(), ds.values());
        let pair = loewner_pair(&left, &right).unwrap();
        for (i, &(mu, hl)) in left.iter().enumerate() {
            for (j, &(eta, hr)) in right.iter().enumerate() {
                let denom = C64::new(0.0, mu) - C64::new(0.0, eta);
                let expect_l = (hl - hr) / denom;
                let expect_ls = (C64::new(0.0, mu) * hl - C64::new(0.0, eta) * hr) / denom;
                assert!((pair.l[(i, j)] - expect_l).norm() <= 1e-15 * expect_l.norm().max(1.0));
                assert!((pair.ls[(i, j)] - expect_ls).norm() <= 1e-15 * expect_ls.norm().max(1.0));
            }
        }
        // coincident points are rejected
        assert!(loewner_pair(&left, &left).is_err());
    }

    #[test]
    fn rom_interpolates_first_order_data() {
        // H(s) = 1/(s+1) sampled at 8 interleaved points
        let h = |s: C64| 1.0 / (s + 1.0);
        let freqs: Vec<f64> = (1..=8).map(|i| i as f64 * 0.5).collect();
        let values: Vec<C64> = freqs.iter().map(|&f| h(C64::new(0.0, f))).collect();
        let (left, right) = alternate_partition(&freqs, &values);
        let pair = loewner_pair(&left, &right).unwrap();
        let rom = loewner_rom(&pair, 1e-12).unwrap();
        assert_eq!(rom.dim(), 1, "expected order-1 reduction");
        for &f in &freqs {
            let s = C64::new(0.0, f);
            let tf = rom.transfer(s).unwrap();
            assert!((tf - h(s)).norm() < 1e-8, "mismatch at {f}: {tf} vs {}", h(s));
        }
    }

    #[test]
    fn rom_recovers_random_stable_order() {
        let sys = synth::random_stable_system(&mut synth::seeded_rng(23), 3, 0);
        let freqs = synth::log_freq_grid(0.2, 10.0, 40);
        let ds = synth::sample(&sys, &freqs);
        let (left, right) = alternate_partition(ds.freqs(), ds.values());
        let pair = loewner_pair(&left, &right).unwrap();
        let rom = loewner_rom(&pair, 1e-10).unwrap();
        assert_eq!(rom.dim(), sys.order(), "order mismatch");
        for v in 0..ds.len() {
            let s = ds.point(v);
            let tf = rom.transfer(s).unwrap();
            let expect = sys.eval(s);
            assert!(
                (tf - expect).norm() < 1e-7 * expect.norm().max(1.0),
                "interpolation error at λ = {}",
                ds.freqs()[v]
            );
        }
    }

    #[test]
    fn constant_data_rom_is_degenerate() {
        let c = C64::new(0.3, 0.0);
        let left: Vec<(f64, C64)> = vec![(1.0, c), (3.0, c)];
        let right: Vec<(f64, C64)> = vec![(2.0, c), (4.0, c)];
        let pair = loewner_pair(&left, &right).unwrap();
        assert!(matches!(loewner_rom(&pair, 1e-12), Err(Error::Degenerate(_))));
    }

    #[test]
    fn quasi_loewner_shape() {
        // V = 10 samples, ℓ = 3 support → 14 × 6
        let support: Vec<(f64, C64)> = (0..3).map(|i| (1.0 + i as f64, C64::new(0.1, 0.2))).collect();
        let test: Vec<(f64, C64)> = (0..7).map(|i| (10.0 + i as f64, C64::new(0.3, -0.1))).collect();
        let q = real_quasi_loewner(&support, &test).unwrap();
        assert_eq!((q.matrix().nrows(), q.matrix().ncols()), (14, 6));
    }

    #[test]
    fn quasi_loewner_matches_linearized_error() {
        let sys = synth::random_stable_system(&mut synth::seeded_rng(5), 4, 0);
        let freqs = synth::log_freq_grid(0.1, 9.0, 24);
        let ds = synth::sample(&sys, &freqs);
        let support: Vec<(f64, C64)> = (0..4)
            .map(|i| (ds.freqs()[i * 6], ds.values()[i * 6]))
            .collect();
        let test: Vec<(f64, C64)> = (0..ds.len())
            .filter(|v| v % 6 != 0)
            .map(|v| (ds.freqs()[v], ds.values()[v]))
            .collect();
        let q = real_quasi_loewner(&support, &test).unwrap();

        let mut rng_state = 0.77_f64;
        let mut next = move || {
            rng_state = (rng_state * 877.13 + 0.1234).fract();
            rng_state * 2.0 - 1.0
        };
        for _ in 0..20 {
            let weights: Vec<C64> = (0..4).map(|_| C64::new(next(), next())).collect();
            let x = DVector::from_iterator(
                8,
                weights.iter().flat_map(|w| [w.re, w.im]),
            );
            let prod = q.matrix() * &x;
            for (l_idx, &(zeta, hz)) in test.iter().enumerate() {
                let e = linearized_error(&support, &weights, zeta, hz);
                assert!(
                    (prod[l_idx] - e.re).abs() <= 1e-12,
                    "Re mismatch at test point {l_idx}: {} vs {}",
                    prod[l_idx],
                    e.re
                );
                assert!(
                    (prod[test.len() + l_idx] - e.im).abs() <= 1e-12,
                    "Im mismatch at test point {l_idx}"
                );
            }
        }
    }

    #[test]
    fn real_data_zeroes_alpha_columns_of_real_block() {
        // hᵢ and H real → every (Re-block, α-column) entry vanishes
        let support: Vec<(f64, C64)> = vec![(1.0, C64::new(0.4, 0.0)), (2.0, C64::new(-0.2, 0.0))];
        let test: Vec<(f64, C64)> = vec![(1.5, C64::new(0.9, 0.0)), (3.0, C64::new(0.1, 0.0))];
        let q = real_quasi_loewner(&support, &test).unwrap();
        for l in 0..2 {
            for i in 0..2 {
                assert_eq!(q.matrix()[(l, 2 * i)], 0.0);
            }
        }
    }

    #[test]
    fn shared_point_is_rejected() {
        let support: Vec<(f64, C64)> = vec![(1.0, C64::new(0.0, 0.0))];
        let test: Vec<(f64, C64)> = vec![(1.0, C64::new(1.0, 0.0))];
        assert!(real_quasi_loewner(&support, &test).is_err());
    }
}
