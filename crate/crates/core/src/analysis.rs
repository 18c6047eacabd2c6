//! Fidelities, geometric phases and phase-space maps.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{default_dim, StateVector};
use crate::par::{self, Execution};
use crate::states::{cat_amps, Parity};

/// `|⟨ψ|φ⟩|²`.
pub fn fidelity(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    Ok(psi.inner(phi)?.norm_sqr())
}

/// Geometric phase of `|C±⟩` for one `2π` loop of the drive phase at fixed `|α|`:
/// `φ_B± = −π|α|²(1 ∓ e^{−2|α|²})/(1 ± e^{−2|α|²})`.
pub fn berry_phase_per_loop(alpha_mag: f64, parity: Parity) -> f64 {
    let x = alpha_mag * alpha_mag;
    let e = (-2.0 * x).exp();
    let ratio = match parity {
        Parity::Even => (1.0 - e) / (1.0 + e),
        Parity::Odd => (1.0 + e) / (1.0 - e),
    };
    -PI * x * ratio
}

/// `Δφ_B,1 = φ_B⁺ − φ_B⁻ = 2π|α|²/sinh(2|α|²)`.
///
/// Evaluated in the closed form; the difference of the two per-parity
/// expressions loses all digits at large `|α|`.
pub fn delta_berry_per_loop(alpha_mag: f64) -> f64 {
    let x = alpha_mag * alpha_mag;
    if x == 0.0 {
        return PI;
    }
    2.0 * PI * x / (2.0 * x).sinh()
}

/// Berry-phase difference after `loops` rotations; `loops` must be even and positive.
pub fn delta_berry(alpha_mag: f64, loops: usize) -> Result<f64> {
    if loops == 0 {
        return Err(Error::InvalidParameter("loop count must be positive".into()));
    }
    if loops % 2 == 1 {
        return Err(Error::OddLoopCount(loops));
    }
    if !(alpha_mag > 0.0) {
        return Err(Error::InvalidParameter(format!("|α| must be positive, got {alpha_mag}")));
    }
    Ok(loops as f64 * delta_berry_per_loop(alpha_mag))
}

/// Berry phase `i∮⟨C±|∂_φ C±⟩dφ` of a single-mode cat carried along
/// `α(φ)`, `φ ∈ [0, 2π]`, evaluated from truncated Fock amplitudes.
///
/// In the analytic gauge the connection reduces to `−⟨n⟩·d arg α/dφ`.
/// `⟨n⟩` is summed over `dim` levels and the loop integral uses the
/// trapezoid rule on `nodes` points, which is spectrally accurate for closed
/// paths.
pub fn berry_phase_numerical<F>(path: F, parity: Parity, dim: usize, nodes: usize) -> Result<f64>
where
    F: Fn(f64) -> C64,
{
    if nodes < 2 {
        return Err(Error::InvalidParameter("need at least two quadrature nodes".into()));
    }
    let h = 1e-3;
    let mut total = 0.0;
    for k in 0..nodes {
        let phi = 2.0 * PI * k as f64 / nodes as f64;
        let alpha = path(phi);
        let amps = cat_amps(alpha, parity, dim)?;
        let mean_n: f64 = amps.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum();
        let d = (-path(phi + 2.0 * h) + 8.0 * path(phi + h) - 8.0 * path(phi - h) + path(phi - 2.0 * h)) / (12.0 * h);
        total += -mean_n * (d / alpha).im;
    }
    Ok(total * 2.0 * PI / nodes as f64)
}

/// Wrap to `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Remove `2π` jumps from a sequence of wrapped phases.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let prev = phases[i - 1];
            offset += wrap_phase(p - prev) - (p - prev);
        }
        out.push(p + offset);
    }
    out
}

const MIN_OVERLAP: f64 = 1e-10;

/// Relative phase picked up between the odd and even components:
/// `arg[(⟨odd|ψ_f⟩/⟨even|ψ_f⟩)/(⟨odd|ψ_i⟩/⟨even|ψ_i⟩)]`, wrapped.
///
/// Dynamical phases cancel when both basis states are degenerate.
pub fn extract_relative_phase(
    psi_final: &StateVector,
    basis_even: &StateVector,
    basis_odd: &StateVector,
    psi_initial: &StateVector,
) -> Result<f64> {
    let overlaps = [
        basis_even.inner(psi_final)?,
        basis_odd.inner(psi_final)?,
        basis_even.inner(psi_initial)?,
        basis_odd.inner(psi_initial)?,
    ];
    if let Some(z) = overlaps.iter().find(|z| z.norm() < MIN_OVERLAP) {
        return Err(Error::UndefinedPhase(z.norm()));
    }
    let [ef, of, ei, oi] = overlaps;
    Ok(wrap_phase(((of / ef) / (oi / ei)).arg()))
}

/// Rectangular sampling of the complex plane, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub n_re: usize,
    pub n_im: usize,
}

impl PhaseSpaceGrid {
    pub fn new(re_range: (f64, f64), im_range: (f64, f64), n_re: usize, n_im: usize) -> Result<Self> {
        let finite = [re_range.0, re_range.1, im_range.0, im_range.1].iter().all(|x| x.is_finite());
        if n_re < 2 || n_im < 2 || !finite || re_range.0 >= re_range.1 || im_range.0 >= im_range.1 {
            return Err(Error::InvalidParameter("grid needs finite increasing ranges and n ≥ 2 per axis".into()));
        }
        Ok(Self { re_range, im_range, n_re, n_im })
    }

    /// Square grid `[−half, half]²` with `n` points per axis.
    pub fn square(half: f64, n: usize) -> Result<Self> {
        Self::new((-half, half), (-half, half), n, n)
    }

    pub fn len(&self) -> usize {
        self.n_re * self.n_im
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn re_step(&self) -> f64 {
        (self.re_range.1 - self.re_range.0) / (self.n_re - 1) as f64
    }

    pub fn im_step(&self) -> f64 {
        (self.im_range.1 - self.im_range.0) / (self.n_im - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.re_step() * self.im_step()
    }

    /// Point of flat index `k`; the imaginary axis runs fastest.
    pub fn point(&self, k: usize) -> C64 {
        let (i, j) = (k / self.n_im, k % self.n_im);
        C64::new(
            self.re_range.0 + i as f64 * self.re_step(),
            self.im_range.0 + j as f64 * self.im_step(),
        )
    }
}

/// Real values over a [`PhaseSpaceGrid`]; `NaN` marks undefined cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
}

impl Field {
    /// `(point, value)` in grid order.
    pub fn cells(&self) -> impl Iterator<Item = (C64, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &v)| (self.grid.point(k), v))
    }

    /// Grid sum times cell area, skipping undefined cells.
    pub fn integral(&self) -> f64 {
        self.values.iter().filter(|v| v.is_finite()).sum::<f64>() * self.grid.cell_area()
    }

    /// Location and value of the largest defined cell.
    pub fn argmax(&self) -> Option<(C64, f64)> {
        self.cells()
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Displacements `D(β)` generated by the truncated ladder operators.
///
/// `a − a†` is diagonalized once; a displacement of any `β` then costs two
/// dense products, using `D(β) = R(θ)·exp(|β|(a† − a))·R(θ)†` with
/// `R(θ) = e^{iθn}`, `θ = arg β`.
struct Displacer {
    vecs: DMatrix<C64>,
    vals: DVector<f64>,
}

impl Displacer {
    fn new(dim: usize) -> Self {
        // i(a − a†) is Hermitian
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for n in 1..dim {
            let s = (n as f64).sqrt();
            m[(n - 1, n)] = C64::new(0.0, s);
            m[(n, n - 1)] = C64::new(0.0, -s);
        }
        let eig = m.symmetric_eigen();
        Self {
            vecs: eig.eigenvectors,
            vals: eig.eigenvalues,
        }
    }

    /// `D(−β)·ψ` up to the final diagonal phase `R(θ)`, which no caller needs.
    fn undisplace(&self, beta: C64, psi: &DVector<C64>) -> DVector<C64> {
        let (r, theta) = beta.to_polar();
        let u = DVector::from_iterator(
            psi.len(),
            psi.iter().enumerate().map(|(k, z)| z * C64::from_polar(1.0, -theta * k as f64)),
        );
        // exp(r(a − a†)) = exp(−i r M) with M = i(a − a†)
        let mut w = self.vecs.ad_mul(&u);
        for (k, z) in w.iter_mut().enumerate() {
            *z *= C64::from_polar(1.0, -r * self.vals[k]);
        }
        &self.vecs * w
    }
}

/// `W(β) = (2/π)⟨ψ|D(β)(−1)^n D†(β)|ψ⟩`.
///
/// The displacement is the exponential of truncated ladder operators on a
/// working space of `dim + default_dim(max |β|)` levels, so the cutoff of
/// the state itself never clips the displaced vector.
pub fn wigner(psi: &StateVector, grid: &PhaseSpaceGrid, exec: Execution) -> Result<Field> {
    let sp = psi.space();
    if sp.n_modes() != 1 {
        return Err(Error::NotSingleMode(sp.n_modes()));
    }
    // D(−β)ψ spreads to amplitudes near |β|; evaluate in a space padded to cover the grid
    let dim = sp.total_dim();
    let reach = (0..grid.len()).map(|k| grid.point(k).norm()).fold(0.0, f64::max);
    let work = dim + default_dim(reach);
    let displacer = Displacer::new(work);
    let mut v = DVector::zeros(work);
    v.rows_mut(0, dim).copy_from_slice(psi.amps());
    let values = par::map_range(exec, grid.len(), |k| {
        let phi = displacer.undisplace(grid.point(k), &v);
        let parity: f64 = phi
            .iter()
            .enumerate()
            .map(|(n, z)| if n % 2 == 0 { z.norm_sqr() } else { -z.norm_sqr() })
            .sum();
        2.0 / PI * parity
    });
    Ok(Field { grid: grid.clone(), values })
}

/// Cells with `|α|` below this are left undefined in [`bell_projection_map`].
pub const BELL_MAP_MIN_ALPHA: f64 = 1e-6;

/// `|⟨Φ⁺_{α,α₂}|Ψ⟩|` for `Re α ≥ 0` and `|⟨Φ⁻_{−α,α₂}|Ψ⟩|` for `Re α < 0`.
pub fn bell_projection_map(psi: &StateVector, grid: &PhaseSpaceGrid, alpha2: C64, exec: Execution) -> Result<Field> {
    let sp = psi.space();
    if sp.n_modes() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: sp.n_modes() });
    }
    let (d1, d2) = (sp.dim(0), sp.dim(1));
    let plus2 = cat_amps(alpha2, Parity::Even, d2)?;
    let minus2 = cat_amps(alpha2, Parity::Odd, d2)?;
    // contract mode 2 against its cats once
    let contract = |c: &[C64]| -> Vec<C64> {
        (0..d1)
            .map(|i| (0..d2).map(|j| c[j].conj() * psi.amps()[i * d2 + j]).sum())
            .collect()
    };
    let vp = contract(&plus2);
    let vm = contract(&minus2);
    let values = par::map_range(exec, grid.len(), |k| {
        let alpha = grid.point(k);
        if alpha.norm() < BELL_MAP_MIN_ALPHA {
            return f64::NAN;
        }
        let (a, s) = if alpha.re >= 0.0 { (alpha, 1.0) } else { (-alpha, -1.0) };
        let (Ok(p1), Ok(m1)) = (cat_amps(a, Parity::Even, d1), cat_amps(a, Parity::Odd, d1)) else {
            return f64::NAN;
        };
        let ip: C64 = p1.iter().zip(&vp).map(|(x, y)| x.conj() * y).sum();
        let im: C64 = m1.iter().zip(&vm).map(|(x, y)| x.conj() * y).sum();
        ((ip + s * im) * FRAC_1_SQRT_2).norm()
    });
    Ok(Field { grid: grid.clone(), values })
}
