use std::hint::black_box;

use berryloop::avqds::{rk4_step, CompiledFamily, DynConfig, PhaseAccumulator};
use berryloop::berry::{Half, LoopSchedule};
use berryloop::ed::{ed_propagate, DenseFamily};
use berryloop::model::{ground_prep_reference, hamiltonian_pool, TwistFamily};
use berryloop::{Ansatz, ModelParams, UnitOrigin};
use criterion::{criterion_group, criterion_main, Criterion};

fn setup(n_units: usize) -> (ModelParams, TwistFamily, Ansatz) {
    let p = ModelParams::four_site(-0.6, 10.0);
    let fam = TwistFamily::new(&p).unwrap();
    let pool = hamiltonian_pool(&p).unwrap();
    let mut a = Ansatz::new(ground_prep_reference(&p).unwrap());
    for k in 0..n_units {
        let g = pool.elements[(7 * k + 3) % pool.len()];
        a.push(g, 0.05 * (k as f64 + 1.0).sin(), UnitOrigin::Dynamics)
            .unwrap();
    }
    (p, fam, a)
}

fn tangent(c: &mut Criterion) {
    let (_, fam, a) = setup(100);
    let h = fam.at(0.3).compile();
    c.bench_function("tangent_n100", |b| {
        b.iter(|| black_box(a.tangent(&h).unwrap()))
    });
}

fn screening(c: &mut Criterion) {
    let (p, fam, a) = setup(100);
    let h = fam.at(0.3).compile();
    let pool = hamiltonian_pool(&p).unwrap();
    let t = a.tangent(&h).unwrap();
    let flow = DynConfig::default().solve().flow(&t).unwrap();
    c.bench_function("screen_hamiltonian_pool_n100", |b| {
        b.iter(|| black_box(flow.screen(&t, &pool.elements)))
    });
}

fn rk4(c: &mut Criterion) {
    let (_, fam, a) = setup(100);
    let compiled = CompiledFamily::new(&fam);
    let schedule = LoopSchedule::new(20.0).unwrap();
    let solve = DynConfig::default().solve();
    c.bench_function("rk4_step_n100", |b| {
        b.iter(|| {
            black_box(
                rk4_step(
                    &a,
                    |t| compiled.at(schedule.rho_at(t, Half::Forward)),
                    1.0,
                    0.05,
                    PhaseAccumulator::default(),
                    solve,
                    None,
                )
                .unwrap(),
            )
        })
    });
}

fn ed_step(c: &mut Criterion) {
    let p = ModelParams::four_site(-0.6, 10.0);
    let fam = DenseFamily::from_params(&p).unwrap();
    let g = fam.ground_state(0.0).unwrap().ground_state;
    let schedule = LoopSchedule::new(20.0).unwrap();
    c.bench_function("ed_propagate_100_steps", |b| {
        b.iter(|| black_box(ed_propagate(&g, &fam, &schedule, 1e-2, &[1.0]).unwrap()))
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = tangent, screening, rk4, ed_step
}
criterion_main!(kernels);
