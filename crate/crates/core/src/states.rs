//! Coherent, cat, proto-Bell, Bell-cat and multi-mode cat states.
//!
//! Every factory renormalizes after truncation and then fixes the global
//! phase so the first non-negligible amplitude is real and positive.
//! Composite states are assembled from the analytically phased ingredients
//! before that convention is applied, so relative phases are never touched.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{default_dim, ProductSpace, StateVector};

/// Photon-number parity of a state or sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    #[serde(rename = "+", alias = "even")]
    Even,
    #[serde(rename = "-", alias = "odd")]
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn is_even(self) -> bool {
        self == Parity::Even
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// A ±1 choice, used for constraint signs and per-mode sign patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn times(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Coherent amplitude `α = √(r/K)·e^{iφ/2}` for a drive `ε = r·e^{iφ}`.
///
/// The drive phase lives on `[0, 4π)`, which covers both sheets of `α`:
/// advancing `φ` by `2π` maps `α → −α`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Displacement {
    magnitude: f64,
    drive_phase: f64,
}

impl Displacement {
    pub fn from_drive(drive_magnitude: f64, drive_phase: f64, kerr: f64) -> Result<Self> {
        if !(kerr > 0.0) || drive_magnitude < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "need K > 0 and r ≥ 0, got K = {kerr}, r = {drive_magnitude}"
            )));
        }
        Ok(Self {
            magnitude: (drive_magnitude / kerr).sqrt(),
            drive_phase: drive_phase.rem_euclid(4.0 * PI),
        })
    }

    pub fn from_alpha(alpha: C64) -> Self {
        Self {
            magnitude: alpha.norm(),
            drive_phase: (2.0 * alpha.arg()).rem_euclid(4.0 * PI),
        }
    }

    pub fn alpha(&self) -> C64 {
        C64::from_polar(self.magnitude, self.drive_phase / 2.0)
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn drive_phase(&self) -> f64 {
        self.drive_phase
    }

    /// Two-photon drive `ε = K α²` realizing this displacement.
    pub fn epsilon(&self, kerr: f64) -> C64 {
        let a = self.alpha();
        kerr * a * a
    }
}

/// The four maximally entangled two-mode cat states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellKind {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    /// Total photon-number parity: even for Φ±, odd for Ψ±.
    pub fn parity(self) -> Parity {
        match self {
            BellKind::PhiPlus | BellKind::PhiMinus => Parity::Even,
            BellKind::PsiPlus | BellKind::PsiMinus => Parity::Odd,
        }
    }

    /// Sign `s` of the mixing-drive constraint `ε₁₂ = s·K₁₂·α₁α₂` whose
    /// proto-Bell state approximates this Bell state.
    pub fn constraint_sign(self) -> Sign {
        match self {
            BellKind::PhiPlus | BellKind::PsiPlus => Sign::Plus,
            BellKind::PhiMinus | BellKind::PsiMinus => Sign::Minus,
        }
    }

    pub fn from_parts(parity: Parity, sign: Sign) -> BellKind {
        match (parity, sign) {
            (Parity::Even, Sign::Plus) => BellKind::PhiPlus,
            (Parity::Even, Sign::Minus) => BellKind::PhiMinus,
            (Parity::Odd, Sign::Plus) => BellKind::PsiPlus,
            (Parity::Odd, Sign::Minus) => BellKind::PsiMinus,
        }
    }
}

/// Per-mode signs `σ_j` of a multi-mode cat; `σ_1` is always `+`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Sign>", into = "Vec<Sign>")]
pub struct SignPattern(Vec<Sign>);

impl SignPattern {
    pub fn new(signs: Vec<Sign>) -> Result<Self> {
        match signs.first() {
            None => Err(Error::EmptyModeSelection),
            Some(Sign::Minus) => Err(Error::InvalidParameter(
                "sign pattern must start with + (global sign is redundant)".into(),
            )),
            Some(Sign::Plus) => Ok(Self(signs)),
        }
    }

    pub fn all_plus(modes: usize) -> Self {
        Self(vec![Sign::Plus; modes.max(1)])
    }

    pub fn signs(&self) -> &[Sign] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Pattern extended by one mode with `σ_{N} = s·σ_{N−1}`.
    pub fn extended(&self, step: Sign) -> Self {
        let last = *self.0.last().expect("non-empty");
        let mut v = self.0.clone();
        v.push(last.times(step));
        Self(v)
    }
}

impl TryFrom<Vec<Sign>> for SignPattern {
    type Error = Error;
    fn try_from(v: Vec<Sign>) -> Result<Self> {
        SignPattern::new(v)
    }
}

impl From<SignPattern> for Vec<Sign> {
    fn from(p: SignPattern) -> Self {
        p.0
    }
}

/// `N±_α = √(2(1 ± e^{−2|α|²}))` generalized to `Σ|α_j|²`.
pub fn cat_normalization(sum_abs_sq: f64, parity: Parity) -> f64 {
    (2.0 * (1.0 + parity.sign() * (-2.0 * sum_abs_sq).exp())).sqrt()
}

// Analytic Fock amplitudes e^{−|α|²/2} αⁿ/√(n!), truncated, not renormalized.
fn coherent_amps(alpha: C64, dim: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        amps.push(c);
    }
    amps
}

fn check_truncation(alpha: C64, dim: usize) {
    let need = default_dim(alpha.norm());
    if dim < need {
        log::warn!("Fock cutoff {dim} below recommended {need} for |α| = {:.3}", alpha.norm());
    }
}

fn kron_all(factors: &[Vec<C64>]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for x in &out {
            for y in f {
                next.push(x * y);
            }
        }
        out = next;
    }
    out
}

fn finish(space: ProductSpace, amps: Vec<C64>) -> Result<StateVector> {
    Ok(StateVector::from_amplitudes(space, amps)?.with_canonical_phase())
}

pub fn coherent(alpha: C64, dim: usize) -> Result<StateVector> {
    let space = ProductSpace::single(dim)?;
    check_truncation(alpha, dim);
    finish(space, coherent_amps(alpha, dim))
}

/// Product coherent state `|α_1, ..., α_N⟩`.
pub fn coherent_product(alphas: &[C64], dims: &[usize]) -> Result<StateVector> {
    let space = ProductSpace::new(dims)?;
    if alphas.len() != dims.len() {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            got: alphas.len(),
        });
    }
    let factors: Vec<_> = alphas
        .iter()
        .zip(dims)
        .map(|(&a, &d)| {
            check_truncation(a, d);
            coherent_amps(a, d)
        })
        .collect();
    finish(space, kron_all(&factors))
}

// (⊗|σ_jα_j⟩ ± ⊗|−σ_jα_j⟩), truncated, analytic phase, not normalized.
fn superposition_amps(alphas: &[C64], parity: Parity, dims: &[usize]) -> Vec<C64> {
    let plus: Vec<_> = alphas.iter().zip(dims).map(|(&a, &d)| coherent_amps(a, d)).collect();
    let minus: Vec<_> = alphas.iter().zip(dims).map(|(&a, &d)| coherent_amps(-a, d)).collect();
    let s = parity.sign();
    kron_all(&plus)
        .into_iter()
        .zip(kron_all(&minus))
        .map(|(p, m)| p + s * m)
        .collect()
}

/// Normalized single-mode cat with analytic phase (no phase convention).
pub(crate) fn cat_amps(alpha: C64, parity: Parity, dim: usize) -> Result<Vec<C64>> {
    if parity == Parity::Odd && alpha.norm() == 0.0 {
        return Err(Error::DegenerateNormalization("odd cat at α = 0"));
    }
    let raw = superposition_amps(&[alpha], parity, &[dim]);
    let n = crate::fockspace::norm2(&raw);
    if !(n > 0.0) {
        return Err(Error::DegenerateNormalization("cat amplitude below truncation resolution"));
    }
    Ok(raw.into_iter().map(|z| z / n).collect())
}

/// `(|α⟩ ± |−α⟩)/N±_α`.
pub fn cat(alpha: C64, parity: Parity, dim: usize) -> Result<StateVector> {
    check_truncation(alpha, dim);
    let space = ProductSpace::single(dim)?;
    finish(space, cat_amps(alpha, parity, dim)?)
}

/// Proto-Bell state `(|α₁, sα₂⟩ ± |−α₁, −sα₂⟩)/N±`.
pub fn proto_bell(alpha1: C64, alpha2: C64, sign: Sign, parity: Parity, dims: [usize; 2]) -> Result<StateVector> {
    if parity == Parity::Odd && alpha1.norm() + alpha2.norm() == 0.0 {
        return Err(Error::DegenerateNormalization("odd proto-Bell state at zero amplitude"));
    }
    let alphas = [alpha1, sign.value() * alpha2];
    alphas.iter().zip(&dims).for_each(|(&a, &d)| check_truncation(a, d));
    let space = ProductSpace::new(&dims)?;
    finish(space, superposition_amps(&alphas, parity, &dims))
}

/// Bell cat states, e.g. `Φ± = (|C⁺,C⁺⟩ ± |C⁻,C⁻⟩)/√2`.
pub fn bell_cat(kind: BellKind, alpha1: C64, alpha2: C64, dims: [usize; 2]) -> Result<StateVector> {
    if alpha1.norm() == 0.0 || alpha2.norm() == 0.0 {
        return Err(Error::DegenerateNormalization("Bell cat needs non-zero amplitudes"));
    }
    check_truncation(alpha1, dims[0]);
    check_truncation(alpha2, dims[1]);
    let p1 = cat_amps(alpha1, Parity::Even, dims[0])?;
    let m1 = cat_amps(alpha1, Parity::Odd, dims[0])?;
    let p2 = cat_amps(alpha2, Parity::Even, dims[1])?;
    let m2 = cat_amps(alpha2, Parity::Odd, dims[1])?;
    let (first, second, s) = match kind {
        BellKind::PhiPlus => ((&p1, &p2), (&m1, &m2), 1.0),
        BellKind::PhiMinus => ((&p1, &p2), (&m1, &m2), -1.0),
        BellKind::PsiPlus => ((&p1, &m2), (&m1, &p2), 1.0),
        BellKind::PsiMinus => ((&p1, &m2), (&m1, &p2), -1.0),
    };
    let a = kron_all(&[first.0.clone(), first.1.clone()]);
    let b = kron_all(&[second.0.clone(), second.1.clone()]);
    let amps = a
        .into_iter()
        .zip(b)
        .map(|(x, y)| (x + s * y) / SQRT_2)
        .collect();
    finish(ProductSpace::new(&dims)?, amps)
}

/// Coefficients of the even proto-Bell state over `{Φ⁺, Φ⁻}`:
/// `ν± = (N⁺₁N⁺₂ ± N⁻₁N⁻₂)/(2√2·N⁺₁₂)`.
pub fn nu_coefficients(alpha1: C64, alpha2: C64) -> (f64, f64) {
    let (x1, x2) = (alpha1.norm_sqr(), alpha2.norm_sqr());
    let pp = cat_normalization(x1, Parity::Even) * cat_normalization(x2, Parity::Even);
    let mm = cat_normalization(x1, Parity::Odd) * cat_normalization(x2, Parity::Odd);
    let n12 = cat_normalization(x1 + x2, Parity::Even);
    let denom = 2.0 * SQRT_2 * n12;
    ((pp + mm) / denom, (pp - mm) / denom)
}

/// `C±(ᾱ, σ̄) = (⊗|σ_jα_j⟩ ± ⊗|−σ_jα_j⟩)/N±`.
pub fn multimode_cat(alphas: &[C64], sigma: &SignPattern, parity: Parity, dims: &[usize]) -> Result<StateVector> {
    if alphas.len() != sigma.len() || alphas.len() != dims.len() {
        return Err(Error::DimensionMismatch {
            expected: alphas.len(),
            got: if sigma.len() != alphas.len() { sigma.len() } else { dims.len() },
        });
    }
    if parity == Parity::Odd && alphas.iter().all(|a| a.norm() == 0.0) {
        return Err(Error::DegenerateNormalization("odd multi-mode cat at zero amplitude"));
    }
    let signed: Vec<C64> = alphas
        .iter()
        .zip(sigma.signs())
        .map(|(&a, s)| s.value() * a)
        .collect();
    signed.iter().zip(dims).for_each(|(&a, &d)| check_truncation(a, d));
    let space = ProductSpace::new(dims)?;
    finish(space, superposition_amps(&signed, parity, dims))
}
