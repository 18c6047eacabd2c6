//! Truncated Fock spaces, state vectors and sparse operators.
//!
//! Multi-mode bases are ordered row-major over `(n_1, ..., n_N)` with mode 1
//! varying slowest, so the flat index of `|n_1, ..., n_N⟩` is
//! `Σ n_j · stride_j` with `stride_N = 1`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Default per-mode truncation for a coherent amplitude of modulus `alpha`:
/// `ceil(|α|² + 7|α| + 10)`.
pub fn default_dim(alpha: f64) -> usize {
    let a = alpha.abs();
    (a * a + 7.0 * a + 10.0).ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeSpace {
    dim: usize,
}

impl ModeSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductSpace {
    modes: Vec<ModeSpace>,
    strides: Vec<usize>,
    total_dim: usize,
}

impl ProductSpace {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::EmptyModeSelection);
        }
        let modes = dims
            .iter()
            .map(|&d| ModeSpace::new(d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_modes(modes))
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(&[dim])
    }

    fn from_modes(modes: Vec<ModeSpace>) -> Self {
        let mut strides = vec![1; modes.len()];
        for j in (0..modes.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * modes[j + 1].dim;
        }
        let total_dim = modes.iter().map(|m| m.dim).product();
        Self {
            modes,
            strides,
            total_dim,
        }
    }

    pub fn modes(&self) -> &[ModeSpace] {
        &self.modes
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.dim).collect()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.modes[mode].dim
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    /// Flat index of the Fock state with the given occupations.
    pub fn index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.modes.len(),
                got: occupations.len(),
            });
        }
        let mut idx = 0;
        for (j, &n) in occupations.iter().enumerate() {
            if n >= self.modes[j].dim {
                return Err(Error::DimensionMismatch {
                    expected: self.modes[j].dim,
                    got: n + 1,
                });
            }
            idx += n * self.strides[j];
        }
        Ok(idx)
    }

    /// Occupation of `mode` in basis state `index`.
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % self.modes[mode].dim
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        (0..self.modes.len())
            .map(|j| self.occupation(index, j))
            .collect()
    }

    /// The space of `self` followed by the modes of `other`.
    pub fn concat(&self, other: &ProductSpace) -> ProductSpace {
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        Self::from_modes(modes)
    }

    /// Same space with every mode enlarged by `extra` levels.
    pub fn bumped(&self, extra: usize) -> ProductSpace {
        let modes = self
            .modes
            .iter()
            .map(|m| ModeSpace { dim: m.dim + extra })
            .collect();
        Self::from_modes(modes)
    }
}

/// Normalized amplitude vector over a [`ProductSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: ProductSpace,
    amps: Vec<C64>,
}

pub(crate) fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

impl StateVector {
    /// Normalizes `amps`; an all-zero vector is rejected.
    pub fn from_amplitudes(space: ProductSpace, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                got: amps.len(),
            });
        }
        let n = norm2(&amps);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateNormalization("zero or non-finite norm"));
        }
        let amps = amps.into_iter().map(|z| z / n).collect();
        Ok(Self { space, amps })
    }

    /// Wraps amplitudes without renormalizing. Used for propagated states,
    /// whose norm is an observable in its own right.
    pub fn from_raw(space: ProductSpace, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                got: amps.len(),
            });
        }
        Ok(Self { space, amps })
    }

    pub fn fock(space: &ProductSpace, occupations: &[usize]) -> Result<Self> {
        let idx = space.index(occupations)?;
        let mut amps = vec![ZERO; space.total_dim()];
        amps[idx] = ONE;
        Ok(Self {
            space: space.clone(),
            amps,
        })
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn amp(&self, occupations: &[usize]) -> Result<C64> {
        Ok(self.amps[self.space.index(occupations)?])
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(dot(&self.amps, &other.amps))
    }

    /// `⟨self|op|self⟩`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(dot(&self.amps, &op.apply(&self.amps)))
    }

    /// Multiplies by a global phase so that the first amplitude with
    /// non-negligible modulus is real and positive.
    pub fn with_canonical_phase(mut self) -> Self {
        let max = self.amps.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(z) = self.amps.iter().find(|z| z.norm() > 1e-12 * max) {
            let ph = z.conj() / z.norm();
            for a in &mut self.amps {
                *a *= ph;
            }
        }
        self
    }

    /// Population of the top two Fock levels of each mode.
    pub fn edge_populations(&self) -> Vec<f64> {
        let sp = &self.space;
        (0..sp.n_modes())
            .map(|j| {
                let d = sp.dim(j);
                self.amps
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| sp.occupation(*i, j) + 2 >= d)
                    .map(|(_, z)| z.norm_sqr())
                    .sum()
            })
            .collect()
    }
}

/// Kronecker product in mode order `a` then `b`.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let space = a.space.concat(&b.space);
    let mut amps = Vec::with_capacity(space.total_dim());
    for x in &a.amps {
        for y in &b.amps {
            amps.push(x * y);
        }
    }
    StateVector::from_amplitudes(space, amps)
}

/// Sparse complex matrix (CSR) over a [`ProductSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: ProductSpace,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl Operator {
    /// Duplicate entries are summed; exact zeros are dropped.
    pub fn from_triplets(space: ProductSpace, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let n = space.total_dim();
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); n];
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            *rows[r].entry(c).or_insert(ZERO) += v;
        }
        Self::from_rows(space, rows)
    }

    fn from_rows(space: ProductSpace, rows: Vec<BTreeMap<usize, C64>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != ZERO {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            space,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(space: &ProductSpace) -> Self {
        let n = space.total_dim();
        Self::from_triplets(space.clone(), (0..n).map(|i| (i, i, ONE)))
    }

    pub fn zero(space: &ProductSpace) -> Self {
        Self::from_triplets(space.clone(), std::iter::empty())
    }

    pub fn diagonal(space: &ProductSpace, f: impl Fn(usize) -> C64) -> Self {
        let n = space.total_dim();
        Self::from_triplets(space.clone(), (0..n).map(|i| (i, i, f(i))))
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[s..e]
            .iter()
            .copied()
            .zip(self.values[s..e].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(j, _)| j == c).map_or(ZERO, |(_, v)| v)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim());
        (0..self.dim())
            .map(|r| self.row(r).map(|(c, a)| a * v[c]).sum())
            .collect()
    }

    pub fn apply_state(&self, psi: &StateVector) -> Result<Vec<C64>> {
        if psi.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(self.apply(psi.amps()))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.space.clone(),
            self.triplets().map(|(r, c, v)| (c, r, v.conj())),
        )
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self::from_triplets(
            self.space.clone(),
            self.triplets().chain(other.triplets()),
        ))
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Operator) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        let rows = (0..self.dim())
            .map(|r| {
                let mut acc = BTreeMap::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        *acc.entry(c).or_insert(ZERO) += a * b;
                    }
                }
                acc
            })
            .collect();
        Ok(Self::from_rows(self.space.clone(), rows))
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `‖M − M†‖_max`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Restriction to the given basis indices (in the given order).
    pub fn submatrix(&self, basis: &[usize]) -> DMatrix<C64> {
        let mut pos = vec![usize::MAX; self.dim()];
        for (k, &i) in basis.iter().enumerate() {
            pos[i] = k;
        }
        let n = basis.len();
        let mut m = DMatrix::zeros(n, n);
        for (k, &r) in basis.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    m[(k, pos[c])] += v;
                }
            }
        }
        m
    }
}

fn single_mode(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Result<Operator> {
    let space = ProductSpace::single(dim)?;
    Ok(Operator::from_triplets(space, triplets))
}

/// Lowering operator, `⟨n−1|a|n⟩ = √n`.
pub fn annihilation(dim: usize) -> Result<Operator> {
    single_mode(dim, (1..dim).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))))
}

pub fn creation(dim: usize) -> Result<Operator> {
    single_mode(dim, (1..dim).map(|n| (n, n - 1, C64::new((n as f64).sqrt(), 0.0))))
}

pub fn number(dim: usize) -> Result<Operator> {
    single_mode(dim, (0..dim).map(|n| (n, n, C64::new(n as f64, 0.0))))
}

pub fn identity(dim: usize) -> Result<Operator> {
    single_mode(dim, (0..dim).map(|n| (n, n, ONE)))
}

/// Embeds a single-mode operator acting on `mode` into `space`.
pub fn lift(op: &Operator, mode: usize, space: &ProductSpace) -> Result<Operator> {
    if op.space().n_modes() != 1 {
        return Err(Error::NotSingleMode(op.space().n_modes()));
    }
    if mode >= space.n_modes() {
        return Err(Error::ModeIndexOutOfRange {
            index: mode,
            modes: space.n_modes(),
        });
    }
    let d = space.dim(mode);
    if op.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: op.dim(),
        });
    }
    let stride = space.stride(mode);
    let n = space.total_dim();
    let mut triplets = Vec::with_capacity(n * (op.nnz() / d + 1));
    for i in 0..n {
        let ni = space.occupation(i, mode);
        let base = i - ni * stride;
        for (m, v) in op.row(ni) {
            triplets.push((i, base + m * stride, v));
        }
    }
    Ok(Operator::from_triplets(space.clone(), triplets))
}

/// Which modes a parity operator counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Modes {
    All,
    Subset(Vec<usize>),
}

/// Diagonal `(−1)^(Σ n_j)` over the selected modes.
pub fn parity_operator(space: &ProductSpace, modes: &Modes) -> Result<Operator> {
    let selected: Vec<usize> = match modes {
        Modes::All => (0..space.n_modes()).collect(),
        Modes::Subset(s) => {
            if s.is_empty() {
                return Err(Error::EmptyModeSelection);
            }
            for &j in s {
                if j >= space.n_modes() {
                    return Err(Error::ModeIndexOutOfRange {
                        index: j,
                        modes: space.n_modes(),
                    });
                }
            }
            s.clone()
        }
    };
    Ok(Operator::diagonal(space, |i| {
        let total: usize = selected.iter().map(|&j| space.occupation(i, j)).sum();
        if total.is_multiple_of(2) {
            ONE
        } else {
            -ONE
        }
    }))
}

/// Basis indices with even (`true`) or odd total occupation.
pub fn parity_sector(space: &ProductSpace, even: bool) -> Vec<usize> {
    (0..space.total_dim())
        .filter(|&i| {
            let total: usize = (0..space.n_modes()).map(|j| space.occupation(i, j)).sum();
            total.is_multiple_of(2) == even
        })
        .collect()
}
