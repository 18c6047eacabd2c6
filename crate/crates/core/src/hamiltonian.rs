//! Kerr parametric oscillator Hamiltonians (rotating frame, ħ = 1).
//!
//! Two realizations of the same operator live here:
//!
//! * [`single_kpo_h`], [`coupled_h`] and [`chain_h`] assemble an explicit
//!   sparse [`Operator`] from lifted ladder operators. They are the reference
//!   definition and feed the eigensolvers.
//! * [`KerrChain`] caches the occupation tables of a product space once and
//!   applies `H(params)·ψ` row by row, so the integrator never rebuilds a
//!   matrix when the drives change.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{annihilation, creation, lift, parity_sector, Operator, ProductSpace};
use crate::par::{self, Execution};
use crate::states::Parity;

/// Single-oscillator controls: Kerr `K > 0` and two-photon drive `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpoParams {
    pub kerr: f64,
    pub drive: C64,
}

impl KpoParams {
    pub fn new(kerr: f64, drive: C64) -> Result<Self> {
        if !(kerr > 0.0) {
            return Err(Error::InvalidParameter(format!("Kerr must be positive, got {kerr}")));
        }
        Ok(Self { kerr, drive })
    }

    pub fn undriven(kerr: f64) -> Self {
        Self {
            kerr,
            drive: C64::new(0.0, 0.0),
        }
    }

    /// Principal-branch `α = √(ε/K)`.
    pub fn alpha(&self) -> C64 {
        (self.drive / self.kerr).sqrt()
    }
}

/// Nearest-neighbour coupler: cross-Kerr `K₁₂ ≥ 0` and mixing drive `ε₁₂`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingParams {
    pub cross_kerr: f64,
    pub mixing: C64,
}

impl CouplingParams {
    pub fn off() -> Self {
        Self::default()
    }
}

/// `N` oscillators with `N − 1` nearest-neighbour couplers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub kpo: Vec<KpoParams>,
    pub couplers: Vec<CouplingParams>,
}

impl ChainParams {
    pub fn new(kpo: Vec<KpoParams>, couplers: Vec<CouplingParams>) -> Result<Self> {
        let p = Self { kpo, couplers };
        p.check()?;
        Ok(p)
    }

    pub fn n_modes(&self) -> usize {
        self.kpo.len()
    }

    fn check(&self) -> Result<()> {
        if self.kpo.is_empty() {
            return Err(Error::EmptyModeSelection);
        }
        if self.couplers.len() + 1 != self.kpo.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kpo.len() - 1,
                got: self.couplers.len(),
            });
        }
        if let Some(k) = self.kpo.iter().find(|k| !(k.kerr > 0.0)) {
            return Err(Error::InvalidParameter(format!("Kerr must be positive, got {}", k.kerr)));
        }
        if let Some(c) = self.couplers.iter().find(|c| c.cross_kerr < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cross-Kerr must be non-negative, got {}",
                c.cross_kerr
            )));
        }
        Ok(())
    }

    fn check_space(&self, space: &ProductSpace) -> Result<()> {
        self.check()?;
        if space.n_modes() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes(),
                got: space.n_modes(),
            });
        }
        Ok(())
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `−K a†²a² + ε a†² + ε* a²`.
pub fn single_kpo_h(p: KpoParams, dim: usize) -> Result<Operator> {
    chain_h(&ChainParams::new(vec![p], vec![])?, &ProductSpace::single(dim)?)
}

/// Two oscillators with cross-Kerr and two-mode mixing:
/// `H₁ + H₂ − K₁₂ n₁n₂ + ε₁₂ a₁†a₂† + ε₁₂* a₁a₂`.
pub fn coupled_h(p1: KpoParams, p2: KpoParams, coupling: CouplingParams, dims: [usize; 2]) -> Result<Operator> {
    chain_h(
        &ChainParams::new(vec![p1, p2], vec![coupling])?,
        &ProductSpace::new(&dims)?,
    )
}

/// Nearest-neighbour chain `Σ H_j − Σ K_{j,j+1} n_j n_{j+1} + Σ (ε_{j,j+1} a_j†a_{j+1}† + h.c.)`.
pub fn chain_h(p: &ChainParams, space: &ProductSpace) -> Result<Operator> {
    p.check_space(space)?;
    let n = space.n_modes();
    let mut a = Vec::with_capacity(n);
    let mut ad = Vec::with_capacity(n);
    for j in 0..n {
        let d = space.dim(j);
        a.push(lift(&annihilation(d)?, j, space)?);
        ad.push(lift(&creation(d)?, j, space)?);
    }
    let mut h = Operator::zero(space);
    for (j, k) in p.kpo.iter().enumerate() {
        let ad2 = ad[j].compose(&ad[j])?;
        let a2 = a[j].compose(&a[j])?;
        h = h
            .add(&ad2.compose(&a2)?.scale(c(-k.kerr)))?
            .add(&ad2.scale(k.drive))?
            .add(&a2.scale(k.drive.conj()))?;
    }
    for (j, cp) in p.couplers.iter().enumerate() {
        let nj = ad[j].compose(&a[j])?;
        let nk = ad[j + 1].compose(&a[j + 1])?;
        let pair_up = ad[j].compose(&ad[j + 1])?;
        let pair_down = a[j].compose(&a[j + 1])?;
        h = h
            .add(&nj.compose(&nk)?.scale(c(-cp.cross_kerr)))?
            .add(&pair_up.scale(cp.mixing))?
            .add(&pair_down.scale(cp.mixing.conj()))?;
    }
    Ok(h)
}

/// Relative tolerance for the coupler constraint check.
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// Relative residual of `ε_c = ±K_c·α_j·α_{j+1}`, best sign.
pub fn constraint_residual(p: &ChainParams, coupler: usize) -> f64 {
    let cp = &p.couplers[coupler];
    let target = cp.cross_kerr * p.kpo[coupler].alpha() * p.kpo[coupler + 1].alpha();
    let scale = cp.mixing.norm().max(target.norm());
    if scale == 0.0 {
        return 0.0;
    }
    let r = (cp.mixing - target).norm().min((cp.mixing + target).norm());
    r / scale
}

/// Energy of the degenerate manifold, `Σ K_j|α_j|⁴ + Σ K_c|α_j|²|α_{j+1}|²`.
///
/// This is the top of the spectrum: every completed-square term of the
/// Hamiltonian is negative semidefinite.
pub fn ground_energy(p: &ChainParams) -> Result<f64> {
    p.check()?;
    for j in 0..p.couplers.len() {
        let residual = constraint_residual(p, j);
        if residual > CONSTRAINT_TOL {
            return Err(Error::ConstraintViolation { coupler: j, residual });
        }
    }
    let x: Vec<f64> = p.kpo.iter().map(|k| k.alpha().norm_sqr()).collect();
    let single: f64 = p.kpo.iter().zip(&x).map(|(k, x)| k.kerr * x * x).sum();
    let cross: f64 = p
        .couplers
        .iter()
        .enumerate()
        .map(|(j, cp)| cp.cross_kerr * x[j] * x[j + 1])
        .sum();
    Ok(single + cross)
}

/// `K₁₂ = E_J^C (δ₁δ₂)²/16` for a SQUID coupler.
pub fn cross_kerr_from_circuit(ejc: f64, delta1: f64, delta2: f64) -> Result<f64> {
    if ejc < 0.0 || delta1 < 0.0 || delta2 < 0.0 {
        return Err(Error::InvalidParameter("circuit parameters must be non-negative".into()));
    }
    let d = delta1 * delta2;
    Ok(ejc * d * d / 16.0)
}

/// Sorted (descending) eigenvalues of a Hermitian matrix.
pub fn eigenvalues_desc(m: DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Spectrum of `H` restricted to one total-parity sector, descending.
pub fn sector_spectrum(p: &ChainParams, space: &ProductSpace, parity: Parity) -> Result<Vec<f64>> {
    let h = chain_h(p, space)?;
    let basis = parity_sector(space, parity.is_even());
    Ok(eigenvalues_desc(h.submatrix(&basis)))
}

const PAR_MIN_ROWS: usize = 4096;
const PAR_CHUNK: usize = 1024;

/// Cached structure of the chain Hamiltonian on a fixed product space.
///
/// Only the scalar controls change between calls to [`KerrChain::apply`].
#[derive(Clone, Debug)]
pub struct KerrChain {
    space: ProductSpace,
    strides: Vec<usize>,
    dims: Vec<usize>,
    // occupation of mode j at row r: occ[j * total + r]
    occ: Vec<u16>,
    // √(n(n−1)) and √((n+1)(n+2)) per mode, indexed by n
    up2: Vec<Vec<f64>>,
    down2: Vec<Vec<f64>>,
    sqrt_n: Vec<f64>,
}

impl KerrChain {
    pub fn new(space: &ProductSpace) -> Self {
        let total = space.total_dim();
        let n = space.n_modes();
        let mut occ = vec![0u16; n * total];
        for j in 0..n {
            for r in 0..total {
                occ[j * total + r] = space.occupation(r, j) as u16;
            }
        }
        let dims = space.dims();
        let up2 = dims
            .iter()
            .map(|&d| (0..d).map(|k| ((k * k.saturating_sub(1)) as f64).sqrt()).collect())
            .collect();
        let down2 = dims
            .iter()
            .map(|&d| (0..d).map(|k| (((k + 1) * (k + 2)) as f64).sqrt()).collect())
            .collect();
        let max_d = dims.iter().copied().max().unwrap_or(2) + 1;
        Self {
            space: space.clone(),
            strides: (0..n).map(|j| space.stride(j)).collect(),
            dims,
            occ,
            up2,
            down2,
            sqrt_n: (0..max_d).map(|k| (k as f64).sqrt()).collect(),
        }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    /// `out = scale · H(p) · psi`.
    pub fn apply_into(&self, p: &ChainParams, psi: &[C64], out: &mut [C64], scale: C64, exec: Execution) {
        let total = self.space.total_dim();
        assert_eq!(psi.len(), total);
        assert_eq!(out.len(), total);
        assert_eq!(p.n_modes(), self.dims.len(), "parameter/space mode count mismatch");
        let exec = if total < PAR_MIN_ROWS { Execution::Sequential } else { exec };
        par::fill_chunks(exec, out, PAR_CHUNK, |offset, chunk| self.rows(p, psi, offset, chunk, scale));
    }

    pub fn apply(&self, p: &ChainParams, psi: &[C64], exec: Execution) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply_into(p, psi, &mut out, C64::new(1.0, 0.0), exec);
        out
    }

    // rows offset..offset+out.len(), one pass per term
    fn rows(&self, p: &ChainParams, psi: &[C64], offset: usize, out: &mut [C64], scale: C64) {
        let total = self.space.total_dim();
        let range = offset..offset + out.len();
        let occ = |j: usize| &self.occ[j * total + range.start..j * total + range.end];
        let mut diag = vec![0.0; out.len()];
        for (j, k) in p.kpo.iter().enumerate() {
            for (d, &n) in diag.iter_mut().zip(occ(j)) {
                let n = n as f64;
                *d -= k.kerr * n * (n - 1.0);
            }
        }
        for (c, cp) in p.couplers.iter().enumerate() {
            for ((d, &n1), &n2) in diag.iter_mut().zip(occ(c)).zip(occ(c + 1)) {
                *d -= cp.cross_kerr * (n1 as f64) * (n2 as f64);
            }
        }
        for ((o, d), x) in out.iter_mut().zip(&diag).zip(&psi[range.clone()]) {
            *o = scale * (d * x);
        }
        for (j, k) in p.kpo.iter().enumerate() {
            if k.drive == C64::new(0.0, 0.0) {
                continue;
            }
            let (up, down) = (scale * k.drive, scale * k.drive.conj());
            let (s2, dim) = (2 * self.strides[j], self.dims[j]);
            let (up2, down2) = (&self.up2[j], &self.down2[j]);
            for (i, (o, &n)) in out.iter_mut().zip(occ(j)).enumerate() {
                let (r, n) = (offset + i, n as usize);
                if n >= 2 {
                    *o += up * up2[n] * psi[r - s2];
                }
                if n + 2 < dim {
                    *o += down * down2[n] * psi[r + s2];
                }
            }
        }
        for (c, cp) in p.couplers.iter().enumerate() {
            if cp.mixing == C64::new(0.0, 0.0) {
                continue;
            }
            let (up, down) = (scale * cp.mixing, scale * cp.mixing.conj());
            let shift = self.strides[c] + self.strides[c + 1];
            let (d1, d2) = (self.dims[c], self.dims[c + 1]);
            let sq = &self.sqrt_n;
            for (i, ((o, &n1), &n2)) in out.iter_mut().zip(occ(c)).zip(occ(c + 1)).enumerate() {
                let (r, n1, n2) = (offset + i, n1 as usize, n2 as usize);
                if n1 >= 1 && n2 >= 1 {
                    *o += up * (sq[n1] * sq[n2]) * psi[r - shift];
                }
                if n1 + 1 < d1 && n2 + 1 < d2 {
                    *o += down * (sq[n1 + 1] * sq[n2 + 1]) * psi[r + shift];
                }
            }
        }
    }

    /// `⟨ψ|H|ψ⟩`, real part.
    pub fn energy(&self, p: &ChainParams, psi: &[C64], exec: Execution) -> f64 {
        let hpsi = self.apply(p, psi, exec);
        crate::fockspace::dot(psi, &hpsi).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{norm2, parity_operator, Modes, StateVector};
    use crate::states::{cat, coherent_product, multimode_cat, Parity, SignPattern};
    use proptest::prelude::*;

    fn residual(h: &Operator, psi: &StateVector, e: f64) -> f64 {
        let hv = h.apply(psi.amps());
        let r: Vec<C64> = hv.iter().zip(psi.amps()).map(|(x, y)| x - e * y).collect();
        norm2(&r)
    }

    fn constrained(alphas: &[C64], kerr: &[f64], cross: &[f64], signs: &[f64]) -> ChainParams {
        let kpo = alphas
            .iter()
            .zip(kerr)
            .map(|(&a, &k)| KpoParams::new(k, k * a * a).unwrap())
            .collect();
        let couplers = cross
            .iter()
            .enumerate()
            .map(|(j, &kc)| CouplingParams {
                cross_kerr: kc,
                mixing: signs[j] * kc * alphas[j] * alphas[j + 1],
            })
            .collect();
        ChainParams::new(kpo, couplers).unwrap()
    }

    #[test]
    fn undriven_kpo_spectrum() {
        let h = single_kpo_h(KpoParams::undriven(1.0), 8).unwrap();
        let sp = h.space().clone();
        for n in [0, 1] {
            let v = StateVector::fock(&sp, &[n]).unwrap();
            assert!(h.apply(v.amps()).iter().all(|z| z.norm() == 0.0));
        }
        assert!((h.get(3, 3) - c(-6.0)).norm() < 1e-12);
    }

    #[test]
    fn cats_are_eigenstates_of_driven_kpo() {
        let a = c(1.5);
        // the residual is set by the dropped Fock tail, so go well past the default cutoff
        let dim = 35;
        let h = single_kpo_h(KpoParams::new(1.0, a * a).unwrap(), dim).unwrap();
        for parity in [Parity::Even, Parity::Odd] {
            let s = cat(a, parity, dim).unwrap();
            assert!(residual(&h, &s, 1.5f64.powi(4)) < 1e-8);
        }
    }

    #[test]
    fn completed_square_form() {
        let dim = 15;
        let (k, eps) = (0.8, C64::new(0.6, -0.9));
        let h = single_kpo_h(KpoParams::new(k, eps).unwrap(), dim).unwrap();
        let sp = h.space().clone();
        let alpha2 = eps / k;
        let a = annihilation(dim).unwrap();
        let ad = creation(dim).unwrap();
        let id = Operator::identity(&sp);
        let left = ad.compose(&ad).unwrap().sub(&id.scale(alpha2.conj())).unwrap();
        let right = a.compose(&a).unwrap().sub(&id.scale(alpha2)).unwrap();
        let alt = left
            .compose(&right)
            .unwrap()
            .scale(c(-k))
            .add(&id.scale(c(k * alpha2.norm_sqr())))
            .unwrap();
        assert!(h.sub(&alt).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn uncoupled_equals_sum_of_lifts() {
        let p1 = KpoParams::new(1.0, C64::new(0.5, 0.2)).unwrap();
        let p2 = KpoParams::new(0.7, C64::new(-0.3, 0.4)).unwrap();
        let dims = [6, 7];
        let sp = ProductSpace::new(&dims).unwrap();
        let h = coupled_h(p1, p2, CouplingParams::off(), dims).unwrap();
        let sum = lift(&single_kpo_h(p1, 6).unwrap(), 0, &sp)
            .unwrap()
            .add(&lift(&single_kpo_h(p2, 7).unwrap(), 1, &sp).unwrap())
            .unwrap();
        assert!(h.sub(&sum).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn coherent_pairs_are_degenerate_under_constraint() {
        let (a1, a2) = (c(1.2), C64::new(0.4, 0.9));
        let dims = [30, 30];
        for s in [1.0, -1.0] {
            let p = constrained(&[a1, a2], &[1.0, 0.8], &[0.6], &[s]);
            let h = chain_h(&p, &ProductSpace::new(&dims).unwrap()).unwrap();
            let e = ground_energy(&p).unwrap();
            let want = 1.0 * a1.norm_sqr().powi(2) + 0.8 * a2.norm_sqr().powi(2) + 0.6 * a1.norm_sqr() * a2.norm_sqr();
            assert!((e - want).abs() < 1e-12);
            for sign in [1.0, -1.0] {
                let psi = coherent_product(&[sign * a1, sign * s * a2], &dims).unwrap();
                assert!(residual(&h, &psi, e) < 1e-8);
            }
        }
    }

    #[test]
    fn constraint_leaves_a_twofold_top_manifold() {
        // K = K12 = 1, α1 = α2 = 1.5 at dims (20, 20)
        let a = c(1.5);
        let p = constrained(&[a, a], &[1.0, 1.0], &[1.0], &[1.0]);
        let sp = ProductSpace::new(&[20, 20]).unwrap();
        let even = sector_spectrum(&p, &sp, Parity::Even).unwrap();
        let odd = sector_spectrum(&p, &sp, Parity::Odd).unwrap();
        let e = ground_energy(&p).unwrap();
        assert!((even[0] - e).abs() < 1e-8, "{} vs {e}", even[0]);
        assert!((odd[0] - e).abs() < 1e-8, "{} vs {e}", odd[0]);
        // the rest of each sector sits well below the manifold
        assert!(even[0] - even[1] > 1.0);
        assert!(odd[0] - odd[1] > 1.0);
    }

    #[test]
    fn chain_reduces_to_coupled() {
        let p1 = KpoParams::new(1.0, C64::new(0.5, 0.2)).unwrap();
        let p2 = KpoParams::new(0.7, C64::new(-0.3, 0.4)).unwrap();
        let cp = CouplingParams { cross_kerr: 0.4, mixing: C64::new(0.1, -0.2) };
        let a = coupled_h(p1, p2, cp, [5, 6]).unwrap();
        let b = chain_h(&ChainParams::new(vec![p1, p2], vec![cp]).unwrap(), &ProductSpace::new(&[5, 6]).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn three_mode_chain_eigenstates_and_energy() {
        let al = [c(1.2); 3];
        let p = constrained(&al, &[1.0; 3], &[1.0, 1.0], &[1.0, 1.0]);
        // 14 levels leave a tail residual near 1e-3 at α = 1.2; 24 brings it under 1e-7
        let dims = [24; 3];
        let sp = ProductSpace::new(&dims).unwrap();
        let h = chain_h(&p, &sp).unwrap();
        let e = ground_energy(&p).unwrap();
        assert!((e - (3.0 * 1.44f64.powi(2) + 2.0 * 1.44 * 1.44)).abs() < 1e-12);
        for parity in [Parity::Even, Parity::Odd] {
            let s = multimode_cat(&al, &SignPattern::all_plus(3), parity, &dims).unwrap();
            assert!(residual(&h, &s, e) < 1e-7);
        }
    }

    #[test]
    fn three_mode_energy_matches_eigensolver() {
        let al = [c(0.7), c(0.6), c(0.5)];
        let p = constrained(&al, &[1.0, 1.2, 0.9], &[0.7, 0.5], &[1.0, -1.0]);
        let sp = ProductSpace::new(&[12, 12, 12]).unwrap();
        let top = sector_spectrum(&p, &sp, Parity::Even).unwrap()[0];
        assert!((top - ground_energy(&p).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn ground_energy_examples_and_errors() {
        let one = ChainParams::new(vec![KpoParams::new(1.0, c(4.0)).unwrap()], vec![]).unwrap();
        assert!((ground_energy(&one).unwrap() - 16.0).abs() < 1e-12);
        let two = constrained(&[c(1.0), c(1.0)], &[1.0, 1.0], &[1.0], &[1.0]);
        assert!((ground_energy(&two).unwrap() - 3.0).abs() < 1e-12);
        let mut bad = two.clone();
        bad.couplers[0].mixing *= 1.01;
        assert!(matches!(ground_energy(&bad), Err(Error::ConstraintViolation { coupler: 0, .. })));
    }

    #[test]
    fn cross_kerr_formula() {
        assert_eq!(cross_kerr_from_circuit(0.0, 0.3, 0.4).unwrap(), 0.0);
        assert!((cross_kerr_from_circuit(16.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let k1 = cross_kerr_from_circuit(3.0, 0.2, 0.5).unwrap();
        let k2 = cross_kerr_from_circuit(3.0, 0.4, 0.5).unwrap();
        assert!((k2 - 4.0 * k1).abs() < 1e-15);
        assert!(cross_kerr_from_circuit(-1.0, 0.2, 0.5).is_err());
    }

    #[test]
    fn per_mode_parity_commutes_without_mixing() {
        let p = ChainParams::new(
            vec![KpoParams::new(1.0, c(0.8)).unwrap(), KpoParams::new(0.9, C64::new(0.1, 0.5)).unwrap()],
            vec![CouplingParams { cross_kerr: 0.7, mixing: c(0.0) }],
        )
        .unwrap();
        let sp = ProductSpace::new(&[7, 8]).unwrap();
        let h = chain_h(&p, &sp).unwrap();
        for j in 0..2 {
            let pj = parity_operator(&sp, &Modes::Subset(vec![j])).unwrap();
            assert!(h.commutator(&pj).unwrap().max_abs() < 1e-12);
        }
        let mut q = p.clone();
        q.couplers[0].mixing = c(0.3);
        let h = chain_h(&q, &sp).unwrap();
        let p0 = parity_operator(&sp, &Modes::Subset(vec![0])).unwrap();
        assert!(h.commutator(&p0).unwrap().max_abs() > 0.1);
    }

    fn arb_params(modes: usize) -> impl Strategy<Value = ChainParams> {
        (
            proptest::collection::vec((0.2f64..2.0, -2.0f64..2.0, -2.0f64..2.0), modes),
            proptest::collection::vec((0.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), modes - 1),
        )
            .prop_map(|(k, cp)| {
                ChainParams::new(
                    k.into_iter().map(|(k, r, i)| KpoParams::new(k, C64::new(r, i)).unwrap()).collect(),
                    cp.into_iter()
                        .map(|(k, r, i)| CouplingParams { cross_kerr: k, mixing: C64::new(r, i) })
                        .collect(),
                )
                .unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn builders_are_hermitian_and_conserve_total_parity(p in arb_params(3)) {
            let sp = ProductSpace::new(&[4, 5, 3]).unwrap();
            let h = chain_h(&p, &sp).unwrap();
            prop_assert!(h.hermiticity_defect() < 1e-12);
            let par = parity_operator(&sp, &Modes::All).unwrap();
            prop_assert!(h.commutator(&par).unwrap().max_abs() < 1e-12);
        }

        #[test]
        fn fused_apply_matches_sparse_builder(
            p in arb_params(3),
            v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 60),
        ) {
            let sp = ProductSpace::new(&[4, 5, 3]).unwrap();
            let psi: Vec<C64> = v.iter().map(|&(r, i)| C64::new(r, i)).collect();
            let reference = chain_h(&p, &sp).unwrap().apply(&psi);
            let chain = KerrChain::new(&sp);
            for exec in [Execution::Sequential, Execution::Parallel] {
                let fused = chain.apply(&p, &psi, exec);
                for (a, b) in fused.iter().zip(&reference) {
                    prop_assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fused_apply_parallel_is_bitwise_deterministic() {
        let sp = ProductSpace::new(&[20, 20, 12]).unwrap();
        let chain = KerrChain::new(&sp);
        let p = constrained(&[c(1.0), C64::new(0.3, 0.8), c(0.7)], &[1.0, 0.9, 1.1], &[0.5, 0.8], &[1.0, -1.0]);
        let psi: Vec<C64> = (0..sp.total_dim())
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let a = chain.apply(&p, &psi, Execution::Sequential);
        let b = chain.apply(&p, &psi, Execution::Parallel);
        assert_eq!(a, b);
    }
}
