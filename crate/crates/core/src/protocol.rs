//! Drive schedules and the protocol factories built on them.
//!
//! A [`DriveSchedule`] is an initial [`Setting`] plus an ordered list of
//! [`Segment`]s. Each mode drive is stored in polar form `ε = r·e^{iφ}` with
//! an unwrapped phase, so `α = √(r/K)·e^{iφ/2}` stays on the right sheet
//! through rotations. Couplers either carry a free mixing drive or follow the
//! constraint `ε_c = s·K_c·α_j·α_{j+1}`, recomputed at every evaluation.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analysis::delta_berry;
use crate::error::{Error, Result};
use crate::fockspace::{default_dim, StateVector};
use crate::hamiltonian::{ChainParams, CouplingParams, KpoParams};
use crate::states::{
    bell_cat, cat, coherent_product, multimode_cat, proto_bell, BellKind, Displacement, Parity, Sign, SignPattern,
};

/// Polar two-photon drive of one mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeDrive {
    pub kerr: f64,
    pub magnitude: f64,
    pub phase: f64,
}

impl ModeDrive {
    pub fn alpha(&self) -> C64 {
        C64::from_polar((self.magnitude / self.kerr).sqrt(), self.phase / 2.0)
    }

    pub fn epsilon(&self) -> C64 {
        C64::from_polar(self.magnitude, self.phase)
    }
}

/// How a coupler's mixing drive is determined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CouplerLaw {
    Free(C64),
    Constrained(Sign),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplerDrive {
    pub cross_kerr: f64,
    pub law: CouplerLaw,
}

/// Every control of a chain at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Setting {
    pub modes: Vec<ModeDrive>,
    pub couplers: Vec<CouplerDrive>,
}

impl Setting {
    /// All modes undriven, all couplers off and constrained with `+`.
    pub fn idle(kerr: &[f64]) -> Result<Self> {
        if kerr.is_empty() {
            return Err(Error::EmptyModeSelection);
        }
        if let Some(k) = kerr.iter().find(|k| !(**k > 0.0)) {
            return Err(Error::InvalidParameter(format!("Kerr must be positive, got {k}")));
        }
        Ok(Self {
            modes: kerr.iter().map(|&k| ModeDrive { kerr: k, magnitude: 0.0, phase: 0.0 }).collect(),
            couplers: vec![CouplerDrive { cross_kerr: 0.0, law: CouplerLaw::Constrained(Sign::Plus) }; kerr.len() - 1],
        })
    }

    /// Chain sitting at amplitudes `alphas`, every coupler constrained with
    /// its `(K_c, sign)`.
    pub fn prepared(kerr: &[f64], alphas: &[C64], couplers: &[(f64, Sign)]) -> Result<Self> {
        let mut s = Self::idle(kerr)?;
        if alphas.len() != kerr.len() || couplers.len() + 1 != kerr.len() {
            return Err(Error::DimensionMismatch { expected: kerr.len(), got: alphas.len() });
        }
        for (j, (&a, m)) in alphas.iter().zip(s.modes.iter_mut()).enumerate() {
            if let Target::Drive { magnitude, phase, .. } = Target::drive_for_alpha(j, a, m.kerr) {
                m.magnitude = magnitude;
                m.phase = phase;
            }
        }
        for (c, &(kc, sign)) in s.couplers.iter_mut().zip(couplers) {
            if !(kc >= 0.0) {
                return Err(Error::InvalidParameter(format!("cross-Kerr must be ≥ 0, got {kc}")));
            }
            *c = CouplerDrive { cross_kerr: kc, law: CouplerLaw::Constrained(sign) };
        }
        Ok(s)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// `α_j` on the branch selected by the unwrapped drive phase.
    pub fn alphas(&self) -> Vec<C64> {
        self.modes.iter().map(ModeDrive::alpha).collect()
    }

    pub fn mixing(&self, coupler: usize) -> C64 {
        let c = &self.couplers[coupler];
        match c.law {
            CouplerLaw::Free(v) => v,
            CouplerLaw::Constrained(s) => {
                s.value() * c.cross_kerr * self.modes[coupler].alpha() * self.modes[coupler + 1].alpha()
            }
        }
    }

    pub fn params(&self) -> ChainParams {
        ChainParams {
            kpo: self
                .modes
                .iter()
                .map(|m| KpoParams { kerr: m.kerr, drive: m.epsilon() })
                .collect(),
            couplers: (0..self.couplers.len())
                .map(|c| CouplingParams {
                    cross_kerr: self.couplers[c].cross_kerr,
                    mixing: self.mixing(c),
                })
                .collect(),
        }
    }

    fn check_mode(&self, j: usize) -> Result<()> {
        if j >= self.n_modes() {
            return Err(Error::ModeIndexOutOfRange { index: j, modes: self.n_modes() });
        }
        Ok(())
    }

    fn check_coupler(&self, c: usize) -> Result<()> {
        if c >= self.couplers.len() {
            return Err(Error::ModeIndexOutOfRange { index: c, modes: self.couplers.len() });
        }
        Ok(())
    }
}

/// A control that ramps or steps to a new value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    /// Drive of `mode` to `magnitude·e^{i·phase}`; the phase is adopted at
    /// the start of the change, which must happen from zero drive unless it
    /// already matches.
    Drive { mode: usize, magnitude: f64, phase: f64 },
    Kerr { mode: usize, value: f64 },
    CrossKerr { coupler: usize, value: f64 },
    Law { coupler: usize, law: CouplerLaw },
}

impl Target {
    /// Drive realizing `α` for a mode of Kerr `kerr`, on the sheet of `α`.
    pub fn drive_for_alpha(mode: usize, alpha: C64, kerr: f64) -> Self {
        let d = Displacement::from_alpha(alpha);
        Target::Drive {
            mode,
            magnitude: kerr * d.magnitude() * d.magnitude(),
            phase: d.drive_phase(),
        }
    }
}

/// A [`Target`] active over the fraction `window` of its segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ramp {
    pub target: Target,
    pub window: (f64, f64),
}

impl Ramp {
    pub fn full(target: Target) -> Self {
        Self { target, window: (0.0, 1.0) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SegmentKind {
    /// Instantaneous reassignment.
    Step(Vec<Target>),
    Hold,
    TanhRamp(Vec<Ramp>),
    LinearRamp(Vec<Ramp>),
    /// `φ_mode` advances by `2π` per loop at a constant rate.
    Rotate { mode: usize, loops: usize, track_coupler: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
}

/// `(tanh(8s − 4) + 1)/(tanh 4 + 1)`, equal to 1 at `s = 1`.
pub fn tanh_shape(s: f64) -> f64 {
    ((8.0 * s - 4.0).tanh() + 1.0) / (4.0f64.tanh() + 1.0)
}

/// `final·(tanh(8t/τ − 4) + 1)/(tanh 4 + 1)`.
pub fn tanh_ramp_value(t: f64, tau: f64, final_value: C64) -> C64 {
    final_value * tanh_shape(t / tau)
}

/// Tanh ramp of the given targets over `tau`.
pub fn tanh_ramp(tau: f64, ramps: Vec<Ramp>) -> Result<Segment> {
    if !(tau > 0.0) {
        return Err(Error::InvalidSchedule(format!("ramp duration must be positive, got {tau}")));
    }
    Ok(Segment { kind: SegmentKind::TanhRamp(ramps), duration: tau })
}

pub fn linear_ramp(tau: f64, ramps: Vec<Ramp>) -> Result<Segment> {
    if !(tau > 0.0) {
        return Err(Error::InvalidSchedule(format!("ramp duration must be positive, got {tau}")));
    }
    Ok(Segment { kind: SegmentKind::LinearRamp(ramps), duration: tau })
}

pub fn step(targets: Vec<Target>) -> Segment {
    Segment { kind: SegmentKind::Step(targets), duration: 0.0 }
}

pub fn hold(duration: f64) -> Result<Segment> {
    if !(duration > 0.0) {
        return Err(Error::InvalidSchedule(format!("hold duration must be positive, got {duration}")));
    }
    Ok(Segment { kind: SegmentKind::Hold, duration })
}

/// `loops` full turns of mode `mode`'s drive phase, `period` per turn.
///
/// Odd counts flip `α → −α` and imprint the parity phase on odd states; they
/// are rejected unless `allow_odd` is set.
pub fn rotation_loop(mode: usize, loops: usize, period: f64, track_coupler: bool, allow_odd: bool) -> Result<Segment> {
    if loops == 0 || !(period > 0.0) {
        return Err(Error::InvalidSchedule("rotation needs at least one loop and a positive period".into()));
    }
    if loops % 2 == 1 && !allow_odd {
        return Err(Error::OddLoopCount(loops));
    }
    Ok(Segment {
        kind: SegmentKind::Rotate { mode, loops, track_coupler },
        duration: loops as f64 * period,
    })
}

/// Steps the mixing drive of `coupler` to zero and ramps its cross-Kerr
/// linearly to zero over `tau_off` (stepped too when `tau_off = 0`).
pub fn diabatic_switchoff(coupler: usize, tau_off: f64) -> Result<Vec<Segment>> {
    if tau_off < 0.0 || !tau_off.is_finite() {
        return Err(Error::InvalidSchedule(format!("switch-off time must be ≥ 0, got {tau_off}")));
    }
    let off = Target::Law { coupler, law: CouplerLaw::Free(C64::new(0.0, 0.0)) };
    let kc = Target::CrossKerr { coupler, value: 0.0 };
    if tau_off == 0.0 {
        return Ok(vec![step(vec![off, kc])]);
    }
    Ok(vec![step(vec![off]), linear_ramp(tau_off, vec![Ramp::full(kc)])?])
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum WindowPhase {
    Before,
    Inside(f64),
    After,
}

/// Initial setting plus segments, evaluated in closed form at any `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveSchedule {
    initial: Setting,
    segments: Vec<Segment>,
    starts: Vec<f64>,
    // setting in force when each segment begins
    entry: Vec<Setting>,
    exit: Setting,
}

impl DriveSchedule {
    pub fn new(initial: Setting, segments: Vec<Segment>) -> Result<Self> {
        let mut starts = Vec::with_capacity(segments.len());
        let mut entry = Vec::with_capacity(segments.len());
        let mut t = 0.0;
        let mut cur = initial.clone();
        for seg in &segments {
            validate(seg, &cur)?;
            starts.push(t);
            entry.push(cur.clone());
            cur = apply_segment(seg, &cur, seg.duration, &|_, _| WindowPhase::After);
            t += seg.duration;
        }
        Ok(Self { initial, segments, starts, entry, exit: cur })
    }

    pub fn initial(&self) -> &Setting {
        &self.initial
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn final_setting(&self) -> &Setting {
        &self.exit
    }

    pub fn n_modes(&self) -> usize {
        self.initial.n_modes()
    }

    pub fn duration(&self) -> f64 {
        self.starts.last().zip(self.segments.last()).map_or(0.0, |(s, g)| s + g.duration)
    }

    /// Setting at `t`, right-continuous at steps and window edges.
    pub fn evaluate(&self, t: f64) -> Setting {
        for (i, seg) in self.segments.iter().enumerate().rev() {
            let (s, e) = (self.starts[i], self.starts[i] + seg.duration);
            if seg.duration > 0.0 && t >= s && t < e {
                return apply_segment(seg, &self.entry[i], t - s, &|w0, w1| {
                    let (a, b) = (s + w0 * seg.duration, s + w1 * seg.duration);
                    if t < a {
                        WindowPhase::Before
                    } else if t >= b {
                        WindowPhase::After
                    } else {
                        WindowPhase::Inside((t - a) / (b - a))
                    }
                });
            }
        }
        if t < 0.0 {
            return self.initial.clone();
        }
        // past the end, or inside a run of zero-length steps
        let mut cur = self.initial.clone();
        for (i, seg) in self.segments.iter().enumerate() {
            if self.starts[i] > t || (seg.duration > 0.0 && self.starts[i] + seg.duration > t) {
                break;
            }
            cur = apply_segment(seg, &self.entry[i], seg.duration, &|_, _| WindowPhase::After);
        }
        cur
    }

    /// Breakpoints splitting `[0, duration]` into pieces on which every
    /// control is smooth: segment boundaries and ramp-window edges.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.duration <= 0.0 {
                continue;
            }
            let s = self.starts[i];
            let mut cuts = vec![s, s + seg.duration];
            if let SegmentKind::TanhRamp(r) | SegmentKind::LinearRamp(r) = &seg.kind {
                for ramp in r {
                    cuts.push(s + ramp.window.0 * seg.duration);
                    cuts.push(s + ramp.window.1 * seg.duration);
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            out.extend(cuts.windows(2).map(|w| (w[0], w[1])));
        }
        out
    }

    /// Setting at `t` inside the smooth piece `[lo, hi]` from [`Self::intervals`],
    /// using the piece's own formula at both endpoints.
    pub fn evaluate_within(&self, t: f64, lo: f64, hi: f64) -> Setting {
        let mid = 0.5 * (lo + hi);
        let i = self
            .segments
            .iter()
            .enumerate()
            .rposition(|(i, g)| g.duration > 0.0 && self.starts[i] <= mid && mid < self.starts[i] + g.duration);
        let Some(i) = i else { return self.evaluate(t) };
        let seg = &self.segments[i];
        let s = self.starts[i];
        apply_segment(seg, &self.entry[i], t - s, &|w0, w1| {
            let (a, b) = (s + w0 * seg.duration, s + w1 * seg.duration);
            if hi <= a {
                WindowPhase::Before
            } else if lo >= b {
                WindowPhase::After
            } else {
                WindowPhase::Inside(((t - a) / (b - a)).clamp(0.0, 1.0))
            }
        })
    }

    /// Largest `|α_j|` reached by each mode at any segment boundary.
    pub fn max_alphas(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.initial.alphas().iter().map(|a| a.norm()).collect();
        for s in self.entry.iter().chain(std::iter::once(&self.exit)) {
            for (x, a) in m.iter_mut().zip(s.alphas()) {
                *x = x.max(a.norm());
            }
        }
        m
    }

    /// Same schedule with one more, initially idle, mode of Kerr `kerr` and
    /// an idle coupler to it.
    pub fn with_appended_mode(&self, kerr: f64, phase: f64) -> Result<Self> {
        let mut init = self.initial.clone();
        if !(kerr > 0.0) {
            return Err(Error::InvalidParameter(format!("Kerr must be positive, got {kerr}")));
        }
        init.modes.push(ModeDrive { kerr, magnitude: 0.0, phase });
        init.couplers.push(CouplerDrive { cross_kerr: 0.0, law: CouplerLaw::Constrained(Sign::Plus) });
        Self::new(init, self.segments.clone())
    }

    pub fn then(&self, more: Vec<Segment>) -> Result<Self> {
        let mut segs = self.segments.clone();
        segs.extend(more);
        Self::new(self.initial.clone(), segs)
    }
}

fn validate(seg: &Segment, cur: &Setting) -> Result<()> {
    let check_target = |t: &Target| -> Result<()> {
        match *t {
            Target::Drive { mode, magnitude, .. } => {
                cur.check_mode(mode)?;
                if magnitude < 0.0 || !magnitude.is_finite() {
                    return Err(Error::InvalidSchedule(format!("bad drive magnitude {magnitude}")));
                }
            }
            Target::Kerr { mode, value } => {
                cur.check_mode(mode)?;
                if !(value > 0.0) {
                    return Err(Error::InvalidSchedule(format!("Kerr must stay positive, got {value}")));
                }
            }
            Target::CrossKerr { coupler, value } => {
                cur.check_coupler(coupler)?;
                if value < 0.0 {
                    return Err(Error::InvalidSchedule(format!("cross-Kerr must be ≥ 0, got {value}")));
                }
            }
            Target::Law { coupler, .. } => cur.check_coupler(coupler)?,
        }
        Ok(())
    };
    match &seg.kind {
        SegmentKind::Step(targets) => {
            if seg.duration != 0.0 {
                return Err(Error::InvalidSchedule("step segments have zero duration".into()));
            }
            targets.iter().try_for_each(check_target)
        }
        SegmentKind::Hold => positive(seg.duration),
        SegmentKind::TanhRamp(ramps) | SegmentKind::LinearRamp(ramps) => {
            positive(seg.duration)?;
            for r in ramps {
                check_target(&r.target)?;
                let (a, b) = r.window;
                if !(0.0 <= a && a < b && b <= 1.0) {
                    return Err(Error::InvalidSchedule(format!("ramp window ({a}, {b}) not inside [0, 1]")));
                }
                if let Target::Law { .. } = r.target {
                    return Err(Error::InvalidSchedule("coupler laws can only be stepped".into()));
                }
                if let Target::Drive { mode, phase, .. } = r.target {
                    let m = cur.modes[mode];
                    if m.magnitude > 0.0 && (m.phase - phase).abs() > 1e-12 {
                        return Err(Error::InvalidSchedule(format!(
                            "ramp on mode {mode} changes the drive phase while the drive is on"
                        )));
                    }
                }
            }
            Ok(())
        }
        SegmentKind::Rotate { mode, .. } => {
            positive(seg.duration)?;
            cur.check_mode(*mode)
        }
    }
}

fn positive(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(format!("segment duration must be positive, got {d}")))
    }
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

// Setting `dt` into `seg`, starting from `entry`. `window` places a ramp window
// (as fractions of the segment) relative to the evaluation point.
fn apply_segment(seg: &Segment, entry: &Setting, dt: f64, window: &dyn Fn(f64, f64) -> WindowPhase) -> Setting {
    let mut s = entry.clone();
    match &seg.kind {
        SegmentKind::Hold => {}
        SegmentKind::Step(targets) => {
            for t in targets {
                set_target(&mut s, entry, t, 1.0);
            }
        }
        SegmentKind::TanhRamp(ramps) | SegmentKind::LinearRamp(ramps) => {
            let tanh = matches!(seg.kind, SegmentKind::TanhRamp(_));
            for r in ramps {
                let frac = match window(r.window.0, r.window.1) {
                    WindowPhase::Before => continue,
                    WindowPhase::After => 1.0,
                    WindowPhase::Inside(x) if tanh => tanh_shape(x),
                    WindowPhase::Inside(x) => x,
                };
                set_target(&mut s, entry, &r.target, frac);
            }
        }
        SegmentKind::Rotate { mode, loops, track_coupler } => {
            let period = seg.duration / *loops as f64;
            s.modes[*mode].phase = entry.modes[*mode].phase + 2.0 * PI * dt / period;
            if !track_coupler {
                for c in [mode.wrapping_sub(1), *mode] {
                    if c < s.couplers.len() && dt < seg.duration {
                        s.couplers[c].law = CouplerLaw::Free(entry.mixing(c));
                    }
                }
            }
        }
    }
    s
}

fn set_target(s: &mut Setting, entry: &Setting, t: &Target, frac: f64) {
    match *t {
        Target::Drive { mode, magnitude, phase } => {
            s.modes[mode].magnitude = lerp(entry.modes[mode].magnitude, magnitude, frac);
            s.modes[mode].phase = phase;
        }
        Target::Kerr { mode, value } => s.modes[mode].kerr = lerp(entry.modes[mode].kerr, value, frac),
        Target::CrossKerr { coupler, value } => {
            s.couplers[coupler].cross_kerr = lerp(entry.couplers[coupler].cross_kerr, value, frac)
        }
        Target::Law { coupler, law } => s.couplers[coupler].law = law,
    }
}

/// A named state preparation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Fock { occupations: Vec<usize> },
    Coherent { alphas: Vec<C64> },
    Cat { alpha: C64, parity: Parity },
    ProtoBell { alpha1: C64, alpha2: C64, sign: Sign, parity: Parity },
    Bell { bell: BellKind, alpha1: C64, alpha2: C64 },
    MultimodeCat { alphas: Vec<C64>, sigma: SignPattern, parity: Parity },
}

impl StateSpec {
    pub fn n_modes(&self) -> usize {
        match self {
            StateSpec::Fock { occupations } => occupations.len(),
            StateSpec::Coherent { alphas } | StateSpec::MultimodeCat { alphas, .. } => alphas.len(),
            StateSpec::Cat { .. } => 1,
            StateSpec::ProtoBell { .. } | StateSpec::Bell { .. } => 2,
        }
    }

    /// Total photon-number parity, if definite.
    pub fn parity(&self) -> Option<Parity> {
        match self {
            StateSpec::Fock { occupations } => Some(if occupations.iter().sum::<usize>() % 2 == 0 {
                Parity::Even
            } else {
                Parity::Odd
            }),
            StateSpec::Coherent { alphas } => alphas.iter().all(|a| a.norm() == 0.0).then_some(Parity::Even),
            StateSpec::Cat { parity, .. } | StateSpec::ProtoBell { parity, .. } | StateSpec::MultimodeCat { parity, .. } => {
                Some(*parity)
            }
            StateSpec::Bell { bell, .. } => Some(bell.parity()),
        }
    }

    /// Per-mode `|α|` needed to hold the state (0 for Fock modes).
    pub fn alpha_magnitudes(&self) -> Vec<f64> {
        match self {
            StateSpec::Fock { occupations } => occupations.iter().map(|&n| (n as f64).sqrt()).collect(),
            StateSpec::Coherent { alphas } | StateSpec::MultimodeCat { alphas, .. } => {
                alphas.iter().map(|a| a.norm()).collect()
            }
            StateSpec::Cat { alpha, .. } => vec![alpha.norm()],
            StateSpec::ProtoBell { alpha1, alpha2, .. } | StateSpec::Bell { alpha1, alpha2, .. } => {
                vec![alpha1.norm(), alpha2.norm()]
            }
        }
    }

    pub fn build(&self, dims: &[usize]) -> Result<StateVector> {
        if dims.len() != self.n_modes() {
            return Err(Error::DimensionMismatch { expected: self.n_modes(), got: dims.len() });
        }
        match self {
            StateSpec::Fock { occupations } => {
                StateVector::fock(&crate::fockspace::ProductSpace::new(dims)?, occupations)
            }
            StateSpec::Coherent { alphas } => coherent_product(alphas, dims),
            StateSpec::Cat { alpha, parity } => cat(*alpha, *parity, dims[0]),
            StateSpec::ProtoBell { alpha1, alpha2, sign, parity } => {
                proto_bell(*alpha1, *alpha2, *sign, *parity, [dims[0], dims[1]])
            }
            StateSpec::Bell { bell, alpha1, alpha2 } => bell_cat(*bell, *alpha1, *alpha2, [dims[0], dims[1]]),
            StateSpec::MultimodeCat { alphas, sigma, parity } => multimode_cat(alphas, sigma, *parity, dims),
        }
    }
}

/// Initial state, schedule and intended final state.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec {
    pub initial: StateSpec,
    pub schedule: DriveSchedule,
    pub target: StateSpec,
}

impl ProtocolSpec {
    pub fn new(initial: StateSpec, schedule: DriveSchedule, target: StateSpec) -> Result<Self> {
        let n = schedule.n_modes();
        if initial.n_modes() != n || target.n_modes() != n {
            return Err(Error::DimensionMismatch { expected: n, got: initial.n_modes().min(target.n_modes()) });
        }
        if let (Some(a), Some(b)) = (initial.parity(), target.parity()) {
            if a != b {
                return Err(Error::InvalidParameter(format!(
                    "initial parity {a:?} differs from target parity {b:?}; total parity is conserved"
                )));
            }
        }
        Ok(Self { initial, schedule, target })
    }

    /// Default per-mode cutoffs covering every amplitude the protocol visits.
    pub fn default_dims(&self) -> Vec<usize> {
        let sched = self.schedule.max_alphas();
        let a = self.initial.alpha_magnitudes();
        let b = self.target.alpha_magnitudes();
        (0..sched.len())
            .map(|j| default_dim(sched[j].max(a[j]).max(b[j])))
            .collect()
    }
}

/// Delay of the second drive's ramp for `Ψ` preparations, as a fraction of `τ`.
pub const DEFAULT_STAGGER: f64 = 0.25;

/// Adiabatic Bell-state preparation from `|0,0⟩` (`Φ±`) or `|1,0⟩` (`Ψ±`).
pub fn bell_init_protocol(kind: BellKind, alpha_f: [C64; 2], kerr: [f64; 2], k12: f64, tau: f64) -> Result<ProtocolSpec> {
    bell_init_protocol_with_stagger(kind, alpha_f, kerr, k12, tau, DEFAULT_STAGGER)
}

/// As [`bell_init_protocol`], with an explicit `Ψ` stagger `δ ∈ [0, 1)`: the
/// second drive ramps over `[δτ, τ]`. Ignored for `Φ±`.
pub fn bell_init_protocol_with_stagger(
    kind: BellKind,
    alpha_f: [C64; 2],
    kerr: [f64; 2],
    k12: f64,
    tau: f64,
    stagger: f64,
) -> Result<ProtocolSpec> {
    if alpha_f.iter().any(|a| a.norm() == 0.0) {
        return Err(Error::InvalidParameter("target amplitudes must be non-zero".into()));
    }
    if !(0.0..1.0).contains(&stagger) {
        return Err(Error::InvalidParameter(format!("stagger must lie in [0, 1), got {stagger}")));
    }
    if k12 < 0.0 {
        return Err(Error::InvalidParameter(format!("cross-Kerr must be ≥ 0, got {k12}")));
    }
    let s = kind.constraint_sign();
    let mut init = Setting::idle(&kerr)?;
    init.couplers[0].law = CouplerLaw::Constrained(s);
    let second = if kind.parity() == Parity::Odd { (stagger, 1.0) } else { (0.0, 1.0) };
    let segments = vec![
        step(vec![Target::CrossKerr { coupler: 0, value: k12 }]),
        tanh_ramp(
            tau,
            vec![
                Ramp::full(Target::drive_for_alpha(0, alpha_f[0], kerr[0])),
                Ramp { target: Target::drive_for_alpha(1, alpha_f[1], kerr[1]), window: second },
            ],
        )?,
    ];
    let initial = StateSpec::Fock { occupations: if kind.parity() == Parity::Even { vec![0, 0] } else { vec![1, 0] } };
    let target = StateSpec::Bell { bell: kind, alpha1: alpha_f[0], alpha2: alpha_f[1] };
    ProtocolSpec::new(initial, DriveSchedule::new(init, segments)?, target)
}

/// Appends one mode to a prepared chain: `K_{N−1,N}` is stepped on, then
/// `ε_N` and the constrained `ε_{N−1,N}` are tanh-ramped over `tau`.
///
/// A two-mode Bell target is continued as the corresponding multi-mode cat.
pub fn multimode_append_protocol(
    existing: &ProtocolSpec,
    alpha_n: C64,
    kerr_n: f64,
    cross_kerr: f64,
    tau: f64,
    sign: Sign,
) -> Result<ProtocolSpec> {
    if alpha_n.norm() == 0.0 {
        return Err(Error::InvalidParameter("appended amplitude must be non-zero".into()));
    }
    let prepared = existing.schedule.final_setting().params();
    crate::hamiltonian::ground_energy(&prepared)?;
    let StateSpec::Fock { occupations } = &existing.initial else {
        return Err(Error::InvalidParameter("appending needs a Fock initial state".into()));
    };
    let (alphas, sigma, parity) = match &existing.target {
        StateSpec::MultimodeCat { alphas, sigma, parity } => (alphas.clone(), sigma.clone(), *parity),
        StateSpec::Bell { bell, alpha1, alpha2 } => (
            vec![*alpha1, *alpha2],
            SignPattern::new(vec![Sign::Plus, bell.constraint_sign()])?,
            bell.parity(),
        ),
        StateSpec::ProtoBell { alpha1, alpha2, sign, parity } => {
            (vec![*alpha1, *alpha2], SignPattern::new(vec![Sign::Plus, *sign])?, *parity)
        }
        other => {
            return Err(Error::InvalidParameter(format!("cannot extend a {other:?} target")));
        }
    };
    let n = existing.schedule.n_modes();
    let drive = Target::drive_for_alpha(n, alpha_n, kerr_n);
    let Target::Drive { phase, .. } = drive else { unreachable!() };
    let base = existing.schedule.with_appended_mode(kerr_n, phase)?;
    let schedule = base.then(vec![
        step(vec![
            Target::CrossKerr { coupler: n - 1, value: cross_kerr },
            Target::Law { coupler: n - 1, law: CouplerLaw::Constrained(sign) },
        ]),
        tanh_ramp(tau, vec![Ramp::full(drive)])?,
    ])?;
    let mut occ = occupations.clone();
    occ.push(0);
    let mut alphas = alphas;
    alphas.push(alpha_n);
    ProtocolSpec::new(
        StateSpec::Fock { occupations: occ },
        schedule,
        StateSpec::MultimodeCat { alphas, sigma: sigma.extended(sign), parity },
    )
}

/// Idle chain prepared into `C±(ᾱ, σ̄)` by a Bell step on modes 1-2 followed
/// by one append per further mode, each with ramp time `tau`.
pub fn multimode_protocol(
    alphas: &[C64],
    sigma: &SignPattern,
    parity: Parity,
    kerr: &[f64],
    cross_kerr: &[f64],
    tau: f64,
) -> Result<ProtocolSpec> {
    let n = alphas.len();
    if n < 2 || sigma.len() != n || kerr.len() != n || cross_kerr.len() != n - 1 {
        return Err(Error::DimensionMismatch { expected: n, got: sigma.len().min(kerr.len()) });
    }
    let steps: Vec<Sign> = sigma.signs().windows(2).map(|w| w[0].times(w[1])).collect();
    let mut spec = bell_init_protocol(
        BellKind::from_parts(parity, steps[0]),
        [alphas[0], alphas[1]],
        [kerr[0], kerr[1]],
        cross_kerr[0],
        tau,
    )?;
    for j in 2..n {
        spec = multimode_append_protocol(&spec, alphas[j], kerr[j], cross_kerr[j - 1], tau, steps[j - 1])?;
    }
    Ok(spec)
}

/// `|α|` at which `Δφ_B,2M(|α|)` equals `target`, by bisection on `|α|²`.
///
/// `Δφ_B,2M` falls monotonically from `2Mπ` at `|α| → 0` towards zero, so
/// targets outside `(0, 2Mπ)` are unattainable.
pub fn solve_alpha_for_phase(target: f64, loops: usize) -> Result<f64> {
    let max = delta_berry(1e-12, loops)?;
    if !(target > 0.0 && target < max) {
        return Err(Error::PhaseOutOfRange { target, max });
    }
    let f = |x: f64| delta_berry(x.sqrt(), loops).map(|v| v - target);
    let (mut lo, mut hi) = (1e-12, 1.0);
    while f(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::PhaseOutOfRange { target, max });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).sqrt())
}
