//! Schrödinger propagation `i dψ/dt = H(t)ψ` under a [`DriveSchedule`].
//!
//! The integrator is the Dormand-Prince 5(4) pair with FSAL and a standard
//! step-size controller. Every breakpoint of the schedule (segment
//! boundaries, ramp-window edges) and every requested sample time is a
//! mandatory step endpoint, so discontinuous controls are applied exactly.
//!
//! The local error is measured in the RMS norm
//! `√(mean(|e_i|/(atol + rtol·max(|y_i|, |ŷ_i|)))²)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analysis::fidelity;
use crate::error::{Error, Result};
use crate::fockspace::{ProductSpace, StateVector};
use crate::hamiltonian::{eigenvalues_desc, KerrChain};
use crate::par::{self, Execution};
use crate::protocol::DriveSchedule;
use crate::states::Parity;

/// Which scalar series to record besides norm and total parity.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordSet {
    pub mode_parity: bool,
    pub energy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Store the state every this many accepted steps; 0 stores only the
    /// initial state, the sample times and the final state.
    pub store_every: usize,
    /// Mandatory output times, each with a stored state.
    pub sample_times: Vec<f64>,
    pub record: RecordSet,
    pub max_steps: usize,
    /// Population of the top two Fock levels above which a leak is reported.
    pub leak_threshold: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            store_every: 0,
            sample_times: Vec::new(),
            record: RecordSet::default(),
            max_steps: 50_000_000,
            leak_threshold: 1e-8,
            exec: Execution::default(),
        }
    }
}

impl EvolveConfig {
    fn check(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidParameter("tolerances and max_step must be positive".into()));
        }
        Ok(())
    }
}

/// Time series of one propagation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub norm: Vec<f64>,
    pub total_parity: Vec<f64>,
    /// One series per mode, empty unless requested.
    pub mode_parity: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    /// `(index into times, state)`.
    pub stored: Vec<(usize, StateVector)>,
    pub final_state: StateVector,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest top-two-level population of any mode along the run.
    pub max_edge_population: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn parity_drift(&self) -> f64 {
        let p0 = self.total_parity[0];
        self.total_parity.iter().map(|p| (p - p0).abs()).fold(0.0, f64::max)
    }

    pub fn stored_at(&self, t: f64) -> Option<&StateVector> {
        self.stored
            .iter()
            .find(|(i, _)| (self.times[*i] - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|(_, s)| s)
    }
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const MIN_STEP_REL: f64 = 1e-14;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const MINUS_I: C64 = C64 { re: 0.0, im: -1.0 };

// Per-row signs used by the cheap observables.
struct Observables {
    total_sign: Vec<f64>,
    mode_sign: Vec<Vec<f64>>,
    edge_rows: Vec<Vec<usize>>,
}

impl Observables {
    fn new(space: &ProductSpace) -> Self {
        let n = space.total_dim();
        let m = space.n_modes();
        let mut total_sign = vec![1.0; n];
        let mut mode_sign = vec![vec![1.0; n]; m];
        let mut edge_rows = vec![Vec::new(); m];
        for r in 0..n {
            let mut sum = 0;
            for j in 0..m {
                let k = space.occupation(r, j);
                sum += k;
                if k % 2 == 1 {
                    mode_sign[j][r] = -1.0;
                }
                if k + 2 >= space.dim(j) {
                    edge_rows[j].push(r);
                }
            }
            if sum % 2 == 1 {
                total_sign[r] = -1.0;
            }
        }
        Self { total_sign, mode_sign, edge_rows }
    }

    fn weighted(sign: &[f64], y: &[C64]) -> f64 {
        sign.iter().zip(y).map(|(s, z)| s * z.norm_sqr()).sum()
    }

    fn edge(&self, y: &[C64]) -> f64 {
        self.edge_rows
            .iter()
            .map(|rows| rows.iter().map(|&r| y[r].norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

struct Recorder<'a> {
    cfg: &'a EvolveConfig,
    obs: Observables,
    chain: &'a KerrChain,
    schedule: &'a DriveSchedule,
    space: ProductSpace,
    traj: Trajectory,
}

impl Recorder<'_> {
    /// `y` is the state in the frame rotating at the accumulated reference
    /// phase `theta`; the physical state is `e^{−iθ}y`.
    fn record(&mut self, t: f64, y: &[C64], theta: f64, lo: f64, hi: f64, store: bool) -> Result<()> {
        let tr = &mut self.traj;
        tr.times.push(t);
        tr.norm.push(y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        tr.total_parity.push(Observables::weighted(&self.obs.total_sign, y));
        if self.cfg.record.mode_parity {
            for (j, s) in self.obs.mode_sign.iter().enumerate() {
                tr.mode_parity[j].push(Observables::weighted(s, y));
            }
        }
        if self.cfg.record.energy {
            let p = self.schedule.evaluate_within(t, lo, hi).params();
            tr.energy.push(self.chain.energy(&p, y, self.cfg.exec));
        }
        let edge = self.obs.edge(y);
        if edge > tr.max_edge_population {
            if edge > self.cfg.leak_threshold && tr.max_edge_population <= self.cfg.leak_threshold {
                let msg = format!("truncation leak: top-level population {edge:.3e} at t = {t}");
                log::warn!("{msg}");
                tr.warnings.push(msg);
            }
            tr.max_edge_population = edge;
        }
        if store {
            let idx = tr.times.len() - 1;
            tr.stored.push((idx, StateVector::from_raw(self.space.clone(), unrotate(y, theta))?));
        }
        Ok(())
    }
}

fn unrotate(y: &[C64], theta: f64) -> Vec<C64> {
    let w = C64::from_polar(1.0, -theta);
    y.iter().map(|z| z * w).collect()
}

/// Moves the reference energy `c` to `⟨H⟩` of `y`, given `k0 = −i(H − c)y`,
/// and corrects `k0` to match.
fn retarget(c: &mut f64, y: &[C64], k0: &mut [C64]) {
    let (mut yy, mut yk) = (0.0, 0.0);
    for (a, b) in y.iter().zip(k0.iter()) {
        yy += a.norm_sqr();
        yk += (a.conj() * b).im;
    }
    if !(yy > 0.0) {
        return;
    }
    let shift = -yk / yy;
    if shift.is_finite() {
        k0.iter_mut().zip(y).for_each(|(k, y)| *k += C64::new(0.0, shift) * y);
        *c += shift;
    }
}

fn axpy(y: &mut [C64], a: f64, x: &[C64]) {
    if a != 0.0 {
        y.iter_mut().zip(x).for_each(|(y, x)| *y += x * a);
    }
}

fn error_norm(err: &[C64], y: &[C64], y_new: &[C64], cfg: &EvolveConfig) -> f64 {
    let s: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = cfg.abs_tol + cfg.rel_tol * a.norm_sqr().max(b.norm_sqr()).sqrt();
            e.norm_sqr() / (sc * sc)
        })
        .sum();
    (s / err.len() as f64).sqrt()
}

/// Propagates `psi0` over the whole schedule.
pub fn propagate(schedule: &DriveSchedule, psi0: &StateVector, cfg: &EvolveConfig) -> Result<Trajectory> {
    cfg.check()?;
    let space = psi0.space().clone();
    if space.n_modes() != schedule.n_modes() {
        return Err(Error::DimensionMismatch { expected: schedule.n_modes(), got: space.n_modes() });
    }
    let chain = KerrChain::new(&space);
    let n = space.total_dim();
    let modes = space.n_modes();
    let mut rec = Recorder {
        cfg,
        obs: Observables::new(&space),
        chain: &chain,
        schedule,
        space: space.clone(),
        traj: Trajectory {
            times: Vec::new(),
            norm: Vec::new(),
            total_parity: Vec::new(),
            mode_parity: if cfg.record.mode_parity { vec![Vec::new(); modes] } else { Vec::new() },
            energy: Vec::new(),
            stored: Vec::new(),
            final_state: psi0.clone(),
            accepted_steps: 0,
            rejected_steps: 0,
            max_edge_population: 0.0,
            warnings: Vec::new(),
        },
    };

    // pieces split further at sample times
    let mut samples: Vec<f64> = cfg.sample_times.clone();
    samples.sort_by(f64::total_cmp);
    let mut pieces: Vec<(f64, f64, f64, f64)> = Vec::new(); // (a, b, lo, hi)
    for (lo, hi) in schedule.intervals() {
        let mut a = lo;
        for &s in samples.iter().filter(|&&s| s > lo && s < hi) {
            pieces.push((a, s, lo, hi));
            a = s;
        }
        pieces.push((a, hi, lo, hi));
    }

    let mut y = psi0.amps().to_vec();
    let first = pieces.first().map_or((0.0, 0.0), |p| (p.2, p.3));
    rec.record(0.0, &y, 0.0, first.0, first.1, true)?;

    let mut k: Vec<Vec<C64>> = vec![vec![ZERO; n]; 7];
    let mut tmp = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];
    let mut err = vec![ZERO; n];
    let mut h_prev: Option<f64> = None;
    // The RHS is −i(H − c)y with c tracking ⟨H⟩, so the populated
    // components rotate slowly and the integrator's amplitude error on them
    // stays small; θ = ∫c dt restores the global phase.
    let mut c = 0.0;
    let mut theta = 0.0;

    let rhs = |t: f64, lo: f64, hi: f64, c: f64, y: &[C64], out: &mut [C64]| {
        let p = schedule.evaluate_within(t, lo, hi).params();
        chain.apply_into(&p, y, out, MINUS_I, cfg.exec);
        if c != 0.0 {
            let ic = C64::new(0.0, c);
            out.iter_mut().zip(y).for_each(|(o, y)| *o += ic * y);
        }
    };

    for &(a, b, lo, hi) in &pieces {
        let span = b - a;
        if span <= 0.0 {
            continue;
        }
        let mut t = a;
        rhs(t, lo, hi, c, &y, &mut k[0]);
        retarget(&mut c, &y, &mut k[0]);
        let mut h = match h_prev {
            Some(h) => h,
            None => {
                // Hairer's first guess: 1% of the scaled ratio |y|/|f|
                let d0 = error_norm(&y, &y, &y, cfg);
                let d1 = error_norm(&k[0], &y, &y, cfg);
                if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }
            }
        }
        .min(cfg.max_step)
        .min(span);
        loop {
            let remaining = b - t;
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h <= MIN_STEP_REL * t.abs().max(1.0) {
                return Err(Error::IntegrationFailure { time: t, step: h });
            }
            // stages
            for s in 1..7 {
                let row: &[f64] = match s {
                    1 => &A2,
                    2 => &A3,
                    3 => &A4,
                    4 => &A5,
                    5 => &A6,
                    _ => &B,
                };
                tmp.copy_from_slice(&y);
                for (kj, &aij) in k.iter().zip(row) {
                    axpy(&mut tmp, h * aij, kj);
                }
                let ts = match (C[s] == 1.0, last) {
                    (true, true) => b,
                    (true, false) => t + h,
                    _ => t + C[s] * h,
                };
                if s == 6 {
                    y_new.copy_from_slice(&tmp);
                }
                rhs(ts, lo, hi, c, &tmp, &mut k[s]);
            }
            err.iter_mut().for_each(|x| *x = ZERO);
            for (kj, &ej) in k.iter().zip(&E) {
                axpy(&mut err, h * ej, kj);
            }
            let en = error_norm(&err, &y, &y_new, cfg);
            if !en.is_finite() {
                rec.traj.rejected_steps += 1;
                h *= FAC_MIN;
                continue;
            }
            let fac = if en == 0.0 { FAC_MAX } else { (SAFETY * en.powf(-0.2)).clamp(FAC_MIN, FAC_MAX) };
            if en <= 1.0 {
                t = if last { b } else { t + h };
                theta += c * h;
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                retarget(&mut c, &y, &mut k[0]);
                rec.traj.accepted_steps += 1;
                if rec.traj.accepted_steps > cfg.max_steps {
                    return Err(Error::IntegrationFailure { time: t, step: h });
                }
                let store = cfg.store_every > 0 && rec.traj.accepted_steps.is_multiple_of(cfg.store_every);
                let at_sample = last && samples.contains(&b);
                let at_end = last && (b - schedule.duration()).abs() <= 1e-12 * b.abs().max(1.0);
                rec.record(t, &y, theta, lo, hi, store || at_sample || at_end)?;
                if !last {
                    h_prev = Some(h);
                }
                h = (h * fac).min(cfg.max_step);
                if last {
                    break;
                }
            } else {
                rec.traj.rejected_steps += 1;
                h *= fac.min(1.0);
            }
        }
    }
    rec.traj.final_state = StateVector::from_raw(space, unrotate(&y, theta))?;
    Ok(rec.traj)
}

/// Relative tolerance for treating the top eigenvalues as one manifold.
pub const DEGENERACY_TOL: f64 = 1e-6;

/// Gap between the top (degenerate) manifold and the next distinct level
/// inside the given total-parity sector, at each time.
pub fn gap_scan(
    schedule: &DriveSchedule,
    times: &[f64],
    parity: Parity,
    dims: &[usize],
    exec: Execution,
) -> Result<Vec<f64>> {
    let space = ProductSpace::new(dims)?;
    let basis = crate::fockspace::parity_sector(&space, parity.is_even());
    let gaps = par::map(exec, times, |&t| -> Result<f64> {
        let p = schedule.evaluate(t).params();
        let h = crate::hamiltonian::chain_h(&p, &space)?;
        let ev = eigenvalues_desc(h.submatrix(&basis));
        if ev.iter().any(|e| !e.is_finite()) {
            return Err(Error::Eigensolver(format!("non-finite eigenvalue at t = {t}")));
        }
        let top = ev[0];
        let tol = DEGENERACY_TOL * top.abs().max(1.0);
        ev.iter()
            .find(|&&e| top - e > tol)
            .map(|e| top - e)
            .ok_or_else(|| Error::Eigensolver(format!("no level below the top manifold at t = {t}")))
    });
    gaps.into_iter().collect()
}

/// `|⟨ψ(t)|target(t)⟩|²` at every stored state, as `(t, F)`.
pub fn record_fidelity<F>(traj: &Trajectory, target: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<StateVector>,
{
    if traj.stored.is_empty() {
        return Err(Error::MissingState(0));
    }
    traj.stored
        .iter()
        .map(|(i, psi)| {
            let t = traj.times[*i];
            Ok((t, fidelity(psi, &target(t)?)?))
        })
        .collect()
}
