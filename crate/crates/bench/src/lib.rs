//! Benchmark fixtures and groups.

use criterion::{BatchSize, Criterion, Throughput};
use lnlasso::{
    generate, DualSignal, PrimalSignal, Solver, SolverConfig, SyntheticInstance, SyntheticSpec,
    Topology,
};

pub fn instance(topology: Topology) -> SyntheticInstance {
    generate(&SyntheticSpec::new(topology, 0.4, 7)).expect("fixed spec is valid")
}

fn ramp(blocks: usize, dim: usize) -> Vec<f64> {
    (0..blocks * dim).map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0).collect()
}

pub fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("incidence");
    for topology in [Topology::standard_chain(), Topology::standard_grid()] {
        let inst = instance(topology);
        let g = &inst.graph;
        let d = inst.dataset.dim();
        let w = PrimalSignal::from_vec(d, ramp(g.num_nodes(), d)).unwrap();
        let u = DualSignal::from_vec(d, ramp(g.num_edges(), d)).unwrap();
        group.throughput(Throughput::Elements(g.num_edges() as u64));
        group.bench_function(format!("apply/{}", topology.name()), |b| {
            b.iter(|| g.apply_incidence(&w).unwrap())
        });
        group.bench_function(format!("adjoint/{}", topology.name()), |b| {
            b.iter(|| g.apply_incidence_adjoint(&u).unwrap())
        });
        group.bench_function(format!("tv/{}", topology.name()), |b| {
            b.iter(|| g.tv_norm(&w).unwrap())
        });
    }
    group.finish();
}

pub fn iterations(c: &mut Criterion) {
    let mut group = c.benchmark_group("solver");
    group.sample_size(20);
    for topology in [Topology::standard_chain(), Topology::standard_grid()] {
        let inst = instance(topology);
        for lambda in [1e-5, 1e-1] {
            let config = SolverConfig {
                max_iters: 100,
                rel_tol: 0.0,
                ..SolverConfig::new(lambda)
            };
            group.throughput(Throughput::Elements(config.max_iters as u64));
            group.bench_function(format!("100_iters/{}/lambda={lambda:e}", topology.name()), |b| {
                b.iter_batched(
                    || Solver::new(&inst.graph, &inst.dataset, &config).unwrap(),
                    |s| s.run().unwrap(),
                    BatchSize::SmallInput,
                )
            });
        }
    }
    group.finish();
}
