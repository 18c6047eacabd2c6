//! One runner per experiment kind. Sweeps distribute points over the worker
//! pool and run each point sequentially; single runs parallelize inside the
//! propagation instead.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::{anyhow, Context};
use catforge::analysis::{
    berry_phase_numerical, berry_phase_per_loop, bell_projection_map, delta_berry, extract_relative_phase, fidelity,
    wigner, wrap_phase, PhaseSpaceGrid,
};
use catforge::evolver::{gap_scan, propagate, EvolveConfig, Trajectory};
use catforge::fockspace::{default_dim, tensor, ProductSpace, StateVector};
use catforge::hamiltonian::{chain_h, coupled_h, single_kpo_h, ChainParams, CouplingParams, KerrChain, KpoParams};
use catforge::par;
use catforge::protocol::{
    bell_init_protocol_with_stagger, diabatic_switchoff, multimode_protocol, rotation_loop, solve_alpha_for_phase,
    DriveSchedule, Setting,
};
use catforge::states::{bell_cat, cat, coherent, proto_bell, BellKind, Parity, Sign, SignPattern};
use catforge::{Execution, C64};

use crate::artifact::{point_name, FieldOut, Outcome, Table};
use crate::config::*;

/// Gap samples along a Bell ramp.
const GAP_SAMPLES: usize = 41;
/// Above this Hilbert-space size a multimode run is flagged as expensive.
const LARGE_DIM: usize = 100_000;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![b];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn bell_kind(b: BellName) -> BellKind {
    match b {
        BellName::PhiPlus => BellKind::PhiPlus,
        BellName::PhiMinus => BellKind::PhiMinus,
        BellName::PsiPlus => BellKind::PsiPlus,
        BellName::PsiMinus => BellKind::PsiMinus,
    }
}

/// Numerical settings shared by every propagation of a run.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub numerics: Numerics,
    /// Total truncation increase: config plus command line.
    pub dims_bump: usize,
}

impl Ctx {
    pub fn new(numerics: Numerics, extra_bump: usize) -> Self {
        let dims_bump = numerics.dims_bump + extra_bump;
        Self { numerics, dims_bump }
    }

    fn dims(&self, defaults: Vec<usize>) -> Vec<usize> {
        self.numerics.dims.clone().unwrap_or(defaults).into_iter().map(|d| d + self.dims_bump).collect()
    }

    fn evolve(&self, exec: Execution) -> EvolveConfig {
        EvolveConfig {
            rel_tol: self.numerics.rel_tol,
            abs_tol: self.numerics.abs_tol,
            max_step: self.numerics.max_step.unwrap_or(f64::INFINITY),
            exec,
            ..Default::default()
        }
    }
}

/// Outer (over points) and inner (within a propagation) execution modes.
fn split(points: usize) -> (Execution, Execution) {
    if points > 1 {
        (Execution::Parallel, Execution::Sequential)
    } else {
        (Execution::Sequential, Execution::Parallel)
    }
}

fn tagged(label: &str, tr: &Trajectory) -> Vec<String> {
    tr.warnings.iter().map(|w| format!("{label}: {w}")).collect()
}

pub fn run(exp: &Experiment, ctx: &Ctx) -> anyhow::Result<Outcome> {
    match exp {
        Experiment::BerryCurve(b) => berry_curve(b),
        Experiment::BellInit(b) => bell_init(b, ctx),
        Experiment::Switchoff(s) => switchoff(s, ctx),
        Experiment::Rotation(r) => rotation(r, ctx),
        Experiment::Multimode(m) => multimode(m, ctx),
        Experiment::Properties(p) => properties(p, ctx),
    }
}

fn berry_curve(b: &BerryCurve) -> anyhow::Result<Outcome> {
    let mut out = Outcome::default();
    let mut t = Table::new("berry", &["alpha", "phi_b_even", "phi_b_odd", "delta_phi"]);
    for a in linspace(b.alpha_min, b.alpha_max, b.points) {
        t.push(vec![
            a,
            berry_phase_per_loop(a, Parity::Even),
            berry_phase_per_loop(a, Parity::Odd),
            delta_berry(a, b.loops)?,
        ]);
    }
    out.tables.push(t);
    match solve_alpha_for_phase(b.target_phase, b.loops) {
        Ok(root) => out.scalar("root_alpha", root),
        Err(e) => out.warnings.push(format!("no root for target phase: {e}")),
    }
    out.scalar("delta_phi_at_alpha_max", delta_berry(b.alpha_max, b.loops)?);
    Ok(out)
}

struct BellPoint {
    alpha_f: f64,
    k12_tau: f64,
    fid: f64,
    min_gap: f64,
    norm_drift: f64,
    parity_drift: f64,
    warnings: Vec<String>,
}

fn bell_init(b: &BellInit, ctx: &Ctx) -> anyhow::Result<Outcome> {
    let kind = bell_kind(b.bell);
    let points: Vec<(f64, f64)> = b.alpha_f.iter().flat_map(|&a| b.k12_tau.iter().map(move |&t| (a, t))).collect();
    let (outer, inner) = split(points.len());
    let results = par::map(outer, &points, |&(a, kt)| -> anyhow::Result<BellPoint> {
        let label = format!("alpha_f={a}, k12_tau={kt}");
        let run = || -> anyhow::Result<BellPoint> {
            let tau = kt / b.cross_kerr;
            let p = bell_init_protocol_with_stagger(kind, [re(a), re(a)], b.kerr, b.cross_kerr, tau, b.stagger)?;
            let dims = ctx.dims(p.default_dims());
            let tr = propagate(&p.schedule, &p.initial.build(&dims)?, &ctx.evolve(inner))?;
            let fid = fidelity(&tr.final_state, &p.target.build(&dims)?)?;
            let mut warnings = tagged(&label, &tr);
            let times = linspace(0.0, tau, GAP_SAMPLES);
            let min_gap = match gap_scan(&p.schedule, &times, kind.parity(), &dims, inner) {
                Ok(g) => g.into_iter().fold(f64::INFINITY, f64::min),
                Err(e) => {
                    warnings.push(format!("{label}: gap scan failed: {e}"));
                    f64::NAN
                }
            };
            Ok(BellPoint {
                alpha_f: a,
                k12_tau: kt,
                fid,
                min_gap,
                norm_drift: tr.norm_drift(),
                parity_drift: tr.parity_drift(),
                warnings,
            })
        };
        run().with_context(|| label.clone())
    });
    let mut out = Outcome::default();
    let mut t = Table::new(
        "grid",
        &["alpha_f", "k12_tau", "fidelity", "infidelity", "log10_infidelity", "min_gap", "norm_drift", "parity_drift"],
    );
    for r in results {
        let r = r?;
        let infid = 1.0 - r.fid;
        let axes = [("alpha_f", r.alpha_f), ("k12_tau", r.k12_tau)];
        out.scalar(point_name("fidelity", &axes), r.fid);
        out.scalar(point_name("infidelity", &axes), infid);
        t.push(vec![r.alpha_f, r.k12_tau, r.fid, infid, infid.log10(), r.min_gap, r.norm_drift, r.parity_drift]);
        out.warnings.extend(r.warnings);
    }
    out.scalar("max_norm_drift", t.rows.iter().map(|r| r[6]).fold(0.0, f64::max));
    out.scalar("max_parity_drift", t.rows.iter().map(|r| r[7]).fold(0.0, f64::max));
    out.tables.push(t);
    Ok(out)
}

fn switchoff(s: &Switchoff, ctx: &Ctx) -> anyhow::Result<Outcome> {
    let kind = bell_kind(s.bell);
    let a = re(s.alpha);
    let dims = ctx.dims(vec![default_dim(s.alpha); 2]);
    let phi = bell_cat(kind, a, a, [dims[0], dims[1]])?;
    let (outer, inner) = split(s.k12_tau_off.len());
    let results = par::map(outer, &s.k12_tau_off, |&off| -> anyhow::Result<(f64, Trajectory)> {
        let go = || -> anyhow::Result<(f64, Trajectory)> {
            let set = Setting::prepared(&s.kerr, &[a, a], &[(s.cross_kerr, kind.constraint_sign())])?;
            let sched = DriveSchedule::new(set, diabatic_switchoff(0, off / s.cross_kerr)?)?;
            let tr = propagate(&sched, &phi, &ctx.evolve(inner))?;
            Ok((fidelity(&tr.final_state, &phi)?, tr))
        };
        go().with_context(|| format!("k12_tau_off={off}"))
    });
    let mut out = Outcome::default();
    let mut t = Table::new("switchoff", &["k12_tau_off", "fidelity", "infidelity", "norm_drift", "parity_drift"]);
    for (&off, r) in s.k12_tau_off.iter().zip(results) {
        let (f, tr) = r?;
        out.scalar(point_name("fidelity", &[("k12_tau_off", off)]), f);
        out.scalar(point_name("infidelity", &[("k12_tau_off", off)]), 1.0 - f);
        t.push(vec![off, f, 1.0 - f, tr.norm_drift(), tr.parity_drift()]);
        out.warnings.extend(tagged(&format!("k12_tau_off={off}"), &tr));
    }
    out.tables.push(t);
    Ok(out)
}

/// Sum of `|ψ_k|²` weighted by `(−1)^{n_mode}`.
fn mode_parity(psi: &StateVector, mode: usize) -> f64 {
    let sp = psi.space();
    psi.amps()
        .iter()
        .enumerate()
        .map(|(k, z)| if sp.occupation(k, mode).is_multiple_of(2) { z.norm_sqr() } else { -z.norm_sqr() })
        .sum()
}

/// `psi` with every component odd in mode 0 multiplied by `e^{iθ}`.
fn imprint_mode0(psi: &StateVector, theta: f64) -> catforge::Result<StateVector> {
    let sp = psi.space();
    let w = C64::from_polar(1.0, theta);
    let amps = psi
        .amps()
        .iter()
        .enumerate()
        .map(|(k, &z)| if sp.occupation(k, 0) % 2 == 1 { z * w } else { z })
        .collect();
    StateVector::from_amplitudes(sp.clone(), amps)
}

fn rotation(r: &Rotation, ctx: &Ctx) -> anyhow::Result<Outcome> {
    let (outer, inner) = split(r.alpha1.len());
    let results = par::map(outer, &r.alpha1, |&a1| rotation_one(r, a1, ctx, inner).with_context(|| format!("alpha1={a1}")));
    let mut out = Outcome::default();
    for res in results {
        let o = res?;
        out.scalars.extend(o.scalars);
        out.tables.extend(o.tables);
        out.fields.extend(o.fields);
        out.warnings.extend(o.warnings);
    }
    Ok(out)
}

fn rotation_one(r: &Rotation, a1: f64, ctx: &Ctx, exec: Execution) -> anyhow::Result<Outcome> {
    let two = r.alpha2.is_some();
    let (alphas, kerr, couplers) = match r.alpha2 {
        Some(a2) => (vec![re(a1), re(a2)], r.kerr.to_vec(), vec![(r.cross_kerr, Sign::Plus)]),
        None => (vec![re(a1)], vec![r.kerr[0]], Vec::new()),
    };
    let dims = ctx.dims(alphas.iter().map(|a| default_dim(a.norm())).collect());
    let set = Setting::prepared(&kerr, &alphas, &couplers)?;
    let sched = DriveSchedule::new(set, vec![rotation_loop(0, r.loops, r.period, r.track_coupler, false)?])?;
    let total = sched.duration();

    let (initial, flipped, basis_even, basis_odd) = if two {
        let d = [dims[0], dims[1]];
        let (x, y) = (alphas[0], alphas[1]);
        (
            bell_cat(BellKind::PhiPlus, x, y, d)?,
            bell_cat(BellKind::PhiMinus, x, y, d)?,
            tensor(&cat(x, Parity::Even, d[0])?, &cat(y, Parity::Even, d[1])?)?,
            tensor(&cat(x, Parity::Odd, d[0])?, &cat(y, Parity::Odd, d[1])?)?,
        )
    } else {
        let x = alphas[0];
        (coherent(x, dims[0])?, coherent(-x, dims[0])?, cat(x, Parity::Even, dims[0])?, cat(x, Parity::Odd, dims[0])?)
    };

    let table_times = linspace(0.0, total, r.samples);
    let frame_times = r.frames.as_ref().map(|f| linspace(0.0, total, f.count)).unwrap_or_default();
    let mut interior: Vec<f64> =
        table_times.iter().chain(&frame_times).copied().filter(|&t| t > 0.0 && t < total).collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    let cfg = EvolveConfig { sample_times: interior, ..ctx.evolve(exec) };
    let tr = propagate(&sched, &initial, &cfg)?;
    let at = |t: f64| tr.stored_at(t).ok_or_else(|| anyhow!("no stored state at t = {t}"));

    let axis = [("alpha1", a1)];
    let mut out = Outcome::default();
    let dphi = delta_berry(a1, r.loops)?;
    let expected = imprint_mode0(&initial, -dphi)?;
    let fin = &tr.final_state;
    out.scalar(point_name("fidelity_initial", &axis), fidelity(fin, &initial)?);
    out.scalar(point_name("fidelity_flipped", &axis), fidelity(fin, &flipped)?);
    out.scalar(point_name("fidelity_expected", &axis), fidelity(fin, &expected)?);
    let expected_phase = wrap_phase(-dphi);
    out.scalar(point_name("expected_phase", &axis), expected_phase);
    match extract_relative_phase(fin, &basis_even, &basis_odd, &initial) {
        Ok(p) => {
            out.scalar(point_name("relative_phase", &axis), p);
            out.scalar(point_name("phase_deviation", &axis), wrap_phase(p - expected_phase));
        }
        Err(e) => out.warnings.push(format!("alpha1={a1}: relative phase undefined: {e}")),
    }
    out.scalar(point_name("norm_drift", &axis), tr.norm_drift());
    out.scalar(point_name("parity_drift", &axis), tr.parity_drift());
    out.warnings.extend(tagged(&format!("alpha1={a1}"), &tr));

    let mut t = Table::new(
        format!("rotation_alpha1_{a1}"),
        &["t", "fidelity_initial", "fidelity_flipped", "mode1_parity", "norm"],
    );
    for &time in &table_times {
        let psi = at(time)?;
        t.push(vec![time, fidelity(psi, &initial)?, fidelity(psi, &flipped)?, mode_parity(psi, 0), psi.norm()]);
    }
    out.tables.push(t);

    if let Some(f) = &r.frames {
        let grid = PhaseSpaceGrid::square(f.half_width, f.points)?;
        for (k, &time) in frame_times.iter().enumerate() {
            let psi = at(time)?;
            let (kind, field) = if two {
                ("projection", bell_projection_map(psi, &grid, alphas[1], exec)?)
            } else {
                ("wigner", wigner(psi, &grid, exec)?)
            };
            out.fields.push(FieldOut {
                name: format!("{kind}_alpha1_{a1}_frame{k:02}"),
                labels: BTreeMap::from([("alpha1".into(), a1), ("t".into(), time), ("frame".into(), k as f64)]),
                field,
            });
        }
    }
    Ok(out)
}

fn multimode(m: &Multimode, ctx: &Ctx) -> anyhow::Result<Outcome> {
    let n = m.alphas.len();
    let alphas: Vec<C64> = m.alphas.iter().map(|&a| re(a)).collect();
    let sigma = SignPattern::new(m.sigma.iter().map(|s| if *s == SignName::Plus { Sign::Plus } else { Sign::Minus }).collect())?;
    let parity = if m.parity == ParityName::Even { Parity::Even } else { Parity::Odd };
    let kerr = m.kerr.clone().unwrap_or(vec![1.0; n]);
    let cross = m.cross_kerr.clone().unwrap_or(vec![1.0; n - 1]);
    let p = multimode_protocol(&alphas, &sigma, parity, &kerr, &cross, m.tau)?;
    let dims = ctx.dims(p.default_dims());
    let mut out = Outcome::default();
    let total: usize = dims.iter().product();
    if total > LARGE_DIM {
        let w = format!("Hilbert space of {total} states (dims {dims:?}); expect a long run");
        log::warn!("{w}");
        out.warnings.push(w);
    }
    let tr = propagate(&p.schedule, &p.initial.build(&dims)?, &ctx.evolve(Execution::Parallel))?;
    let f = fidelity(&tr.final_state, &p.target.build(&dims)?)?;
    out.scalar("fidelity", f);
    out.scalar("infidelity", 1.0 - f);
    out.scalar("norm_drift", tr.norm_drift());
    out.scalar("parity_drift", tr.parity_drift());
    let mut t = Table::new("trajectory", &["t", "norm", "total_parity"]);
    for k in 0..tr.times.len() {
        t.push(vec![tr.times[k], tr.norm[k], tr.total_parity[k]]);
    }
    out.tables.push(t);
    out.warnings.extend(tagged("multimode", &tr));
    Ok(out)
}

fn eigen_residual(h: &catforge::fockspace::Operator, psi: &StateVector, e: f64) -> f64 {
    let hv = h.apply(psi.amps());
    hv.iter().zip(psi.amps()).map(|(a, b)| (a - e * b).norm_sqr()).sum::<f64>().sqrt()
}

fn properties(p: &Properties, ctx: &Ctx) -> anyhow::Result<Outcome> {
    let mut out = Outcome::default();
    let a = re(p.alpha);
    let x = p.alpha * p.alpha;
    let d = p.dim + ctx.dims_bump;

    // eigenstates of the single and coupled Hamiltonians
    let mut worst: f64 = 0.0;
    let h1 = single_kpo_h(KpoParams::new(1.0, a * a)?, d)?;
    let h2 = coupled_h(
        KpoParams::new(1.0, a * a)?,
        KpoParams::new(1.0, a * a)?,
        CouplingParams { cross_kerr: 1.0, mixing: a * a },
        [d, d],
    )?;
    for parity in [Parity::Even, Parity::Odd] {
        worst = worst.max(eigen_residual(&h1, &cat(a, parity, d)?, x * x));
        worst = worst.max(eigen_residual(&h2, &proto_bell(a, a, Sign::Plus, parity, [d, d])?, 3.0 * x * x));
    }
    out.scalar("eigen_residual_max", worst);
    out.scalar("hermiticity_defect", h2.hermiticity_defect());

    // Berry phase: closed form against quadrature over the truncated state
    let mut dev: f64 = 0.0;
    for mag in [0.5, 1.0, p.alpha, 2.0] {
        for parity in [Parity::Even, Parity::Odd] {
            let path = |phi: f64| C64::from_polar(mag, phi / 2.0);
            let q = berry_phase_numerical(path, parity, default_dim(mag) + 30, 64)?;
            dev = dev.max((q - berry_phase_per_loop(mag, parity)).abs());
        }
    }
    out.scalar("berry_quadrature_deviation", dev);
    out.scalar("root_alpha", solve_alpha_for_phase(PI, 2)?);
    out.scalar("delta_berry_at_3", delta_berry(3.0, 2)?);

    // odd-state small-amplitude limit
    let sp = ProductSpace::new(&[12, 12])?;
    let mut small = f64::INFINITY;
    for sign in [Sign::Plus, Sign::Minus] {
        let mut amps = vec![C64::new(0.0, 0.0); sp.total_dim()];
        amps[sp.index(&[1, 0])?] = re(std::f64::consts::FRAC_1_SQRT_2);
        amps[sp.index(&[0, 1])?] = re(sign.value() * std::f64::consts::FRAC_1_SQRT_2);
        let fock = StateVector::from_amplitudes(sp.clone(), amps)?;
        small = small.min(fidelity(&proto_bell(re(0.05), re(0.05), sign, Parity::Odd, [12, 12])?, &fock)?);
    }
    out.scalar("small_alpha_fidelity_min", small);

    // sequential and parallel matvec agree bitwise
    let chain_sp = ProductSpace::new(&[18, 18, 18])?;
    let kc = KerrChain::new(&chain_sp);
    let z = C64::new(0.9, 0.4);
    let params = ChainParams::new(
        vec![KpoParams::new(1.0, z * z)?; 3],
        vec![CouplingParams { cross_kerr: 0.5, mixing: 0.5 * z * z }; 2],
    )?;
    let psi = catforge::states::coherent_product(&[z; 3], &[18, 18, 18])?;
    let seq = kc.apply(&params, psi.amps(), Execution::Sequential);
    let parl = kc.apply(&params, psi.amps(), Execution::Parallel);
    let csr = chain_h(&params, &chain_sp)?.apply(psi.amps());
    out.scalar("matvec_exec_mismatch", seq.iter().zip(&parl).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max));
    out.scalar("matvec_operator_mismatch", seq.iter().zip(&csr).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max));

    // Wigner normalization
    let w = wigner(&cat(re(1.5), Parity::Odd, default_dim(1.5))?, &PhaseSpaceGrid::square(5.0, 81)?, Execution::Parallel)?;
    out.scalar("wigner_norm_error", (w.integral() - 1.0).abs());

    // a short Bell ramp: norm and parity conservation, truncation stability
    let kind = BellKind::PhiPlus;
    let proto = bell_init_protocol_with_stagger(kind, [re(1.0); 2], [1.0; 2], 1.0, 5.0, 0.25)?;
    let mut fids = Vec::new();
    let (mut nd, mut pd) = (0.0_f64, 0.0_f64);
    for extra in [0, 5] {
        let dims: Vec<usize> = ctx.dims(proto.default_dims()).into_iter().map(|d| d + extra).collect();
        let tr = propagate(&proto.schedule, &proto.initial.build(&dims)?, &ctx.evolve(Execution::Parallel))?;
        fids.push(fidelity(&tr.final_state, &proto.target.build(&dims)?)?);
        nd = nd.max(tr.norm_drift());
        pd = pd.max(tr.parity_drift());
        out.warnings.extend(tagged("bell ramp", &tr));
    }
    out.scalar("norm_drift", nd);
    out.scalar("parity_drift", pd);
    out.scalar("truncation_sensitivity", (fids[0] - fids[1]).abs());

    // the prepared Bell state is stationary under an instantaneous switch-off
    let d2 = ctx.dims(vec![default_dim(2.0); 2]);
    let phi = bell_cat(kind, re(2.0), re(2.0), [d2[0], d2[1]])?;
    let set = Setting::prepared(&[1.0, 1.0], &[re(2.0); 2], &[(1.0, Sign::Plus)])?;
    let tr = propagate(&DriveSchedule::new(set, diabatic_switchoff(0, 0.0)?)?, &phi, &ctx.evolve(Execution::Parallel))?;
    out.scalar("switchoff_zero_infidelity", (1.0 - fidelity(&tr.final_state, &phi)?).abs());
    Ok(out)
}
