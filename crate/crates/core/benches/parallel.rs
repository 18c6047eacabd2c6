//! Sequential vs data-parallel execution of the hot paths.
//!
//! Without the `parallel` feature both variants run the sequential code.

use std::hint::black_box;

use catforge::analysis::{wigner, PhaseSpaceGrid};
use catforge::evolver::{propagate, EvolveConfig};
use catforge::fockspace::ProductSpace;
use catforge::hamiltonian::{ChainParams, CouplingParams, KerrChain, KpoParams};
use catforge::par;
use catforge::protocol::bell_init_protocol;
use catforge::states::{cat, coherent_product, BellKind, Parity};
use catforge::{Execution, C64};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn chain(n: usize) -> ChainParams {
    let a = C64::new(1.2, 0.3);
    ChainParams::new(
        vec![KpoParams::new(1.0, a * a).unwrap(); n],
        vec![CouplingParams { cross_kerr: 0.5, mixing: 0.5 * a * a }; n - 1],
    )
    .unwrap()
}

fn matvec(c: &mut Criterion) {
    let mut g = c.benchmark_group("matvec");
    for dims in [vec![70, 70], vec![20, 20, 20]] {
        let space = ProductSpace::new(&dims).unwrap();
        let kc = KerrChain::new(&space);
        let p = chain(dims.len());
        let psi = coherent_product(&vec![C64::new(1.0, 0.5); dims.len()], &dims).unwrap();
        let mut out = vec![C64::new(0.0, 0.0); space.total_dim()];
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, format!("{dims:?}")), &exec, |b, &exec| {
                b.iter(|| kc.apply_into(&p, black_box(psi.amps()), &mut out, C64::new(0.0, -1.0), exec))
            });
        }
    }
    g.finish();
}

fn wigner_grid(c: &mut Criterion) {
    let mut g = c.benchmark_group("wigner");
    g.sample_size(10);
    let psi = cat(C64::new(1.5, 0.0), Parity::Odd, 25).unwrap();
    let grid = PhaseSpaceGrid::square(4.0, 41).unwrap();
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| wigner(black_box(&psi), &grid, exec).unwrap()));
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    let points: Vec<(f64, f64)> = [0.8, 1.0, 1.2, 1.4].iter().flat_map(|&a| [2.0, 4.0].map(|t| (a, t))).collect();
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| {
                par::map(exec, &points, |&(a, tau)| {
                    let alpha = C64::new(a, 0.0);
                    let p = bell_init_protocol(BellKind::PhiPlus, [alpha; 2], [1.0; 2], 1.0, tau).unwrap();
                    let dims = p.default_dims();
                    let cfg = EvolveConfig { exec: Execution::Sequential, ..Default::default() };
                    propagate(&p.schedule, &p.initial.build(&dims).unwrap(), &cfg).unwrap().final_state
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, matvec, wigner_grid, sweep);
criterion_main!(benches);
