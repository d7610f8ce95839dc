//! Energy functional, Hamiltonian and Lagrange-multiplier algebra for orbital pairs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{build_schrodinger, Grid};

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalPair {
    pub grid: Grid,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub orthonormalized: bool,
}

impl OrbitalPair {
    pub fn new(grid: Grid, u1: Vec<f64>, u2: Vec<f64>) -> Result<Self> {
        grid.check_len(&u1)?;
        grid.check_len(&u2)?;
        Ok(Self {
            grid,
            u1,
            u2,
            orthonormalized: false,
        })
    }

    pub fn gram(&self) -> [[f64; 2]; 2] {
        let g = &self.grid;
        let s11 = g.dot(&self.u1, &self.u1);
        let s22 = g.dot(&self.u2, &self.u2);
        let s12 = g.dot(&self.u1, &self.u2);
        [[s11, s12], [s12, s22]]
    }

    /// max |Gram − I|.
    pub fn orthonormality_error(&self) -> f64 {
        let s = self.gram();
        (s[0][0] - 1.0).abs().max((s[1][1] - 1.0).abs()).max(s[0][1].abs())
    }

    /// (u1, u2) ↦ (m00 u1 + m10 u2, m01 u1 + m11 u2), i.e. the pair times the matrix m.
    pub fn mixed(&self, m: [[f64; 2]; 2]) -> Self {
        let (u1, u2) = mix(&self.u1, &self.u2, m);
        Self {
            grid: self.grid.clone(),
            u1,
            u2,
            orthonormalized: false,
        }
    }

    pub fn rotated(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let mut out = self.mixed([[c, -s], [s, c]]);
        out.orthonormalized = self.orthonormalized;
        out
    }

    pub fn density(&self) -> Vec<f64> {
        density(self)
    }
}

pub(crate) fn mix(u1: &[f64], u2: &[f64], m: [[f64; 2]; 2]) -> (Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = u1.iter().zip(u2).map(|(x, y)| m[0][0] * x + m[1][0] * y).collect();
    let b: Vec<f64> = u1.iter().zip(u2).map(|(x, y)| m[0][1] * x + m[1][1] * y).collect();
    (a, b)
}

pub fn density(pair: &OrbitalPair) -> Vec<f64> {
    pair.u1.iter().zip(&pair.u2).map(|(a, b)| a * a + b * b).collect()
}

/// ρ^{q} with 0^{q} = 0.
pub(crate) fn power(rho: f64, q: f64) -> f64 {
    if rho > 0.0 {
        rho.powf(q)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit {
    #[serde(rename = "E")]
    pub total: f64,
    #[serde(rename = "T")]
    pub kinetic: f64,
    #[serde(rename = "P")]
    pub potential: f64,
    #[serde(skip)]
    pub p: f64,
}

/// ∫|u'|² from forward differences on every cell edge, including the two edges to the
/// zero Dirichlet ghosts; equals ⟨−D_xx u, u⟩ exactly.
pub fn kinetic(u: &[f64], grid: &Grid) -> f64 {
    let h = grid.h();
    let n = u.len();
    let mut s = u[0] * u[0] + u[n - 1] * u[n - 1];
    for k in 0..n - 1 {
        let d = u[k + 1] - u[k];
        s += d * d;
    }
    s / h
}

fn check_finite(u: &[f64]) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid("orbital samples contain non-finite values"))
    }
}

pub fn energy(pair: &OrbitalPair, p: f64) -> Result<EnergySplit> {
    check_finite(&pair.u1)?;
    check_finite(&pair.u2)?;
    if !pair.orthonormalized && pair.orthonormality_error() > 1e-9 {
        log::warn!("energy evaluated on a pair that is not orthonormal");
    }
    let g = &pair.grid;
    let t = kinetic(&pair.u1, g) + kinetic(&pair.u2, g);
    let rho = density(pair);
    let rp: Vec<f64> = rho.iter().map(|&r| power(r, p)).collect();
    let pot = g.integrate(&rp)?;
    Ok(EnergySplit {
        total: t - pot / p,
        kinetic: t,
        potential: pot,
        p,
    })
}

/// Energy of one orbital: ∫|u'|² − (1/p)∫|u|^{2p}.
pub fn energy_single(u: &[f64], grid: &Grid, p: f64) -> Result<EnergySplit> {
    grid.check_len(u)?;
    check_finite(u)?;
    let t = kinetic(u, grid);
    let rp: Vec<f64> = u.iter().map(|&v| power(v * v, p)).collect();
    let pot = grid.integrate(&rp)?;
    Ok(EnergySplit {
        total: t - pot / p,
        kinetic: t,
        potential: pot,
        p,
    })
}

/// (−D_xx − ρ^{p−1}) u.
pub fn hamiltonian_apply(u: &[f64], rho: &[f64], p: f64, grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(u)?;
    grid.check_len(rho)?;
    let v: Vec<f64> = rho.iter().map(|&r| -power(r, p - 1.0)).collect();
    build_schrodinger(&v, grid)?.apply(u)
}

/// Hu with V = −ρ^{p−1} given as `attract` = ρ^{p−1}; writes into `out`.
pub(crate) fn apply_h(u: &[f64], attract: &[f64], inv_h2: f64, out: &mut [f64]) {
    let n = u.len();
    let at = |k: usize| if k < n { u[k] } else { 0.0 };
    for k in 0..n {
        let left = if k == 0 { 0.0 } else { u[k - 1] };
        out[k] = (2.0 * u[k] - left - at(k + 1)) * inv_h2 - attract[k] * u[k];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierMatrix {
    pub m: [[f64; 2]; 2],
}

impl MultiplierMatrix {
    pub fn symmetric(a: f64, b: f64, d: f64) -> Self {
        Self { m: [[a, b], [b, d]] }
    }

    /// Ascending eigenvalues and the orthogonal matrix whose columns are the eigenvectors.
    pub fn eigen(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let [[a, b], [_, d]] = self.m;
        let mean = 0.5 * (a + d);
        let half = 0.5 * (a - d);
        let r = half.hypot(b);
        let (l1, l2) = (mean - r, mean + r);
        // rotation angle of the lower eigenvector
        let theta = 0.5 * (-2.0 * b).atan2(d - a);
        let (s, c) = theta.sin_cos();
        let mut v = [[c, -s], [s, c]];
        // ensure column 0 belongs to l1
        let rq = |x: f64, y: f64| a * x * x + 2.0 * b * x * y + d * y * y;
        if rq(v[0][0], v[1][0]) > rq(v[0][1], v[1][1]) {
            v = [[v[0][1], v[0][0]], [v[1][1], v[1][0]]];
        }
        ([l1, l2], v)
    }
}

/// Λ_ij = (⟨Hu_i,u_j⟩ + ⟨Hu_j,u_i⟩)/2.
pub fn multiplier_matrix(pair: &OrbitalPair, p: f64) -> Result<MultiplierMatrix> {
    let g = &pair.grid;
    let rho = density(pair);
    let hu1 = hamiltonian_apply(&pair.u1, &rho, p, g)?;
    let hu2 = hamiltonian_apply(&pair.u2, &rho, p, g)?;
    let l11 = g.dot(&hu1, &pair.u1);
    let l22 = g.dot(&hu2, &pair.u2);
    let l12 = 0.5 * (g.dot(&hu1, &pair.u2) + g.dot(&hu2, &pair.u1));
    Ok(MultiplierMatrix::symmetric(l11, l12, l22))
}

/// max_i ‖Hu_i − Σ_j Λ_ij u_j‖_∞.
pub fn projected_residual(pair: &OrbitalPair, p: f64, lambda: &MultiplierMatrix) -> Result<f64> {
    let g = &pair.grid;
    let rho = density(pair);
    let hu1 = hamiltonian_apply(&pair.u1, &rho, p, g)?;
    let hu2 = hamiltonian_apply(&pair.u2, &rho, p, g)?;
    let l = lambda.m;
    let mut worst = 0.0_f64;
    for k in 0..g.len() {
        let r1 = hu1[k] - l[0][0] * pair.u1[k] - l[0][1] * pair.u2[k];
        let r2 = hu2[k] - l[1][0] * pair.u1[k] - l[1][1] * pair.u2[k];
        worst = worst.max(r1.abs()).max(r2.abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub musum_gap: f64,
    pub ratio_gap: f64,
    pub virial_gap: f64,
}

/// Gaps of the multiplier-sum, (p+1)/(3−p) and virial identities.
pub fn identities(split: &EnergySplit, mu1: f64, mu2: f64) -> IdentityReport {
    let p = split.p;
    let (e, t, pot) = (split.total, split.kinetic, split.potential);
    let sum = mu1 + mu2;
    IdentityReport {
        musum_gap: (sum - (p * e + (1.0 - p) * t)).abs(),
        ratio_gap: (sum - e * (p + 1.0) / (3.0 - p)).abs(),
        virial_gap: (2.0 * t - (p - 1.0) / p * pot).abs(),
    }
}

pub fn identity_report(gs: &crate::solver::GroundState) -> IdentityReport {
    identities(&gs.split, gs.mu1, gs.mu2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sup_norm;
    use crate::solitons::{w_star, SolitonSpec};
    use crate::solver::lowdin_orthonormalize;
    use proptest::prelude::*;

    fn grid40() -> Grid {
        Grid::new(40.0, 1601).unwrap()
    }

    #[test]
    fn density_basics() {
        let g = grid40();
        let ws = g.sample(w_star);
        let pair = OrbitalPair::new(g.clone(), ws.clone(), vec![0.0; g.len()]).unwrap();
        let rho = density(&pair);
        assert!((rho[g.center_index()] - 0.125).abs() < 1e-15);
        let zero = OrbitalPair::new(g.clone(), vec![0.0; g.len()], vec![0.0; g.len()]).unwrap();
        assert!(density(&zero).iter().all(|&r| r == 0.0));
        let s = energy(&zero, 2.0).unwrap();
        assert_eq!((s.total, s.kinetic, s.potential), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_soliton_energy() {
        let g = grid40();
        let s = energy_single(&g.sample(w_star), &g, 2.0).unwrap();
        assert!((s.total + 1.0 / 48.0).abs() < 5e-4);
        assert!((s.total - (s.kinetic - s.potential / 2.0)).abs() <= 1e-12 * s.total.abs());
    }

    #[test]
    fn virial_of_exact_soliton_is_second_order() {
        let gap = |h: f64| {
            let g = Grid::with_spacing(60.0, h).unwrap();
            let s = energy_single(&g.sample(w_star), &g, 2.0).unwrap();
            identities(&s, 0.0, 0.0).virial_gap
        };
        let (g1, g2) = (gap(0.05), gap(0.025));
        assert!(g1 < 1e-5, "gap = {g1}");
        assert!((g1 / g2 - 4.0).abs() < 0.5);
    }

    #[test]
    fn dilation_stationarity_of_soliton() {
        let g = grid40();
        let e = |lam: f64| {
            let u = g.sample(|x| lam.sqrt() * w_star(lam * x));
            energy_single(&u, &g, 2.0).unwrap().total
        };
        let d = 1e-3;
        let slope = (e(1.0 + d) - e(1.0 - d)) / (2.0 * d);
        assert!(slope.abs() < 1e-5, "dE/dλ = {slope}");
    }

    #[test]
    fn hamiltonian_on_solitons() {
        let g = grid40();
        let ws = g.sample(w_star);
        let rho: Vec<f64> = ws.iter().map(|w| w * w).collect();
        let hu = hamiltonian_apply(&ws, &rho, 2.0, &g).unwrap();
        let n = g.len();
        let err = hu[1..n - 1].iter().zip(&ws[1..n - 1]).fold(0.0_f64, |m, (a, b)| m.max((a + b / 16.0).abs()));
        assert!(err < 0.01 * g.h() * g.h());
        let zero = hamiltonian_apply(&vec![0.0; g.len()], &rho, 2.0, &g).unwrap();
        assert_eq!(sup_norm(&zero), 0.0);

        let g = Grid::with_spacing(60.0, 0.05).unwrap();
        let spec = SolitonSpec::new(1.9, -0.09).unwrap();
        let u = spec.sample(&g, 0.0);
        let rho: Vec<f64> = u.iter().map(|w| w * w).collect();
        let hu = hamiltonian_apply(&u, &rho, 1.9, &g).unwrap();
        let n = g.len();
        let err = hu[1..n - 1].iter().zip(&u[1..n - 1]).fold(0.0_f64, |m, (a, b)| m.max((a - spec.mu * b).abs()));
        assert!(err < 0.01 * g.h() * g.h(), "err = {err}");
    }

    #[test]
    fn apply_h_matches_operator() {
        let g = Grid::new(3.0, 31).unwrap();
        let u = g.sample(|x| (-x * x).exp() + 0.1 * x);
        let rho = g.sample(|x| 0.5 * (-x * x / 3.0).exp());
        let a: Vec<f64> = rho.iter().map(|&r| power(r, 0.7)).collect();
        let mut out = vec![0.0; g.len()];
        apply_h(&u, &a, 1.0 / (g.h() * g.h()), &mut out);
        let reference = hamiltonian_apply(&u, &rho, 1.7, &g).unwrap();
        for (x, y) in out.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn far_pair_multipliers_decouple() {
        let g = Grid::with_spacing(100.0, 0.05).unwrap();
        let raw = OrbitalPair::new(g.clone(), g.sample(|x| w_star(x + 30.0)), g.sample(|x| w_star(x - 30.0))).unwrap();
        let pair = lowdin_orthonormalize(&raw).unwrap();
        let l = multiplier_matrix(&pair, 2.0).unwrap();
        assert!((l.m[0][0] + 1.0 / 16.0).abs() < 1e-4);
        assert!((l.m[1][1] + 1.0 / 16.0).abs() < 1e-4);
        assert!(l.m[0][1].abs() <= 1e-5);
        assert_eq!(l.m[0][1], l.m[1][0]);
    }

    #[test]
    fn two_bump_energy_at_p2() {
        let g = Grid::with_spacing(100.0, 0.05).unwrap();
        let raw = OrbitalPair::new(g.clone(), g.sample(|x| w_star(x + 30.0)), g.sample(|x| w_star(x - 30.0))).unwrap();
        let pair = lowdin_orthonormalize(&raw).unwrap();
        let e = energy(&pair, 2.0).unwrap().total;
        assert!((e + 1.0 / 24.0).abs() < 1e-3);
    }

    #[test]
    fn multiplier_eigen_ordering() {
        let l = MultiplierMatrix::symmetric(-0.05, 0.01, -0.09);
        let ([a, b], v) = l.eigen();
        assert!(a <= b);
        for (col, lam) in [(0, a), (1, b)] {
            let (x, y) = (v[0][col], v[1][col]);
            let r0 = l.m[0][0] * x + l.m[0][1] * y - lam * x;
            let r1 = l.m[1][0] * x + l.m[1][1] * y - lam * y;
            assert!(r0.abs() < 1e-15 && r1.abs() < 1e-15);
        }
    }

    fn wavy_pair() -> OrbitalPair {
        let g = Grid::with_spacing(90.0, 0.05).unwrap();
        let raw = OrbitalPair::new(
            g.clone(),
            g.sample(|x| w_star(x + 6.0) + 0.3 * w_star(x - 5.0)),
            g.sample(|x| -w_star(x + 6.0) + w_star(x - 5.0)),
        )
        .unwrap();
        lowdin_orthonormalize(&raw).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn rotation_invariance(theta in -3.2f64..3.2) {
            let pair = wavy_pair();
            let rot = pair.rotated(theta);
            let (r0, r1) = (density(&pair), density(&rot));
            for (a, b) in r0.iter().zip(&r1) {
                prop_assert!((a - b).abs() < 1e-13);
            }
            let (e0, e1) = (energy(&pair, 1.9).unwrap(), energy(&rot, 1.9).unwrap());
            prop_assert!((e0.total - e1.total).abs() <= 1e-12 * e0.total.abs());
            let l0 = multiplier_matrix(&pair, 1.9).unwrap().m;
            let l1 = multiplier_matrix(&rot, 1.9).unwrap().m;
            // Λ(U R) = Rᵀ Λ(U) R for the mixing matrix R
            let (s, c) = theta.sin_cos();
            let r = [[c, -s], [s, c]];
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            v += r[a][i] * l0[a][b] * r[b][j];
                        }
                    }
                    prop_assert!((v - l1[i][j]).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn translation_invariance(shift in 1usize..40) {
            let pair = wavy_pair();
            let n = pair.u1.len();
            let move_by = |u: &[f64]| {
                let mut out = vec![0.0; n];
                out[shift..].copy_from_slice(&u[..n - shift]);
                out
            };
            let moved = OrbitalPair::new(pair.grid.clone(), move_by(&pair.u1), move_by(&pair.u2)).unwrap();
            let (e0, e1) = (energy(&pair, 1.9).unwrap().total, energy(&moved, 1.9).unwrap().total);
            prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs());
        }
    }
}
