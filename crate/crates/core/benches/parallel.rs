//! Rayon vs sequential execution of the three data-parallel kernels.
//!
//! `cargo bench -p isogloss-core` runs both policies; building with
//! `--no-default-features` turns `Exec::Parallel` into the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use isogloss_core::field::{extract_contours, sample_starts, trace_gradient_line, TraceOptions};
use isogloss_core::sim2d::{
    Diffusivity, SchmidtSource, Side, SimConfig, Simulation, TidalBoundary,
};
use isogloss_core::special::erfc;
use isogloss_core::surface::FeatureSurface;
use isogloss_core::{BBox, Exec, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POLICIES: [(&str, Exec); 2] = [
    ("parallel", Exec::Parallel),
    ("sequential", Exec::Sequential),
];

fn erfc_surface(n: usize) -> FeatureSurface {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let pts: Vec<Point> = (0..n)
        .map(|_| Point::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..25.0)))
        .collect();
    let vals = pts.iter().map(|p| 0.5 * erfc(p.y * 0.15)).collect();
    FeatureSurface::new(pts, vals, true).unwrap()
}

fn rasterize(c: &mut Criterion) {
    let s = erfc_surface(400);
    let bbox = s.triangulation().bbox();
    let mut g = c.benchmark_group("rasterize_400x400");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| s.rasterize(bbox, 400, 400, f64::NAN, exec).unwrap())
        });
    }
    g.finish();
}

fn trace(c: &mut Criterion) {
    let s = erfc_surface(400);
    let grid = s
        .rasterize(s.triangulation().bbox(), 200, 200, f64::NAN, Exec::Parallel)
        .unwrap();
    let contours = extract_contours(&grid, &[0.9]).unwrap();
    let starts = sample_starts(&contours, 0.9, 45, 1).unwrap();
    let opts = TraceOptions::default();
    let mut g = c.benchmark_group("trace_45_paths");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map_slice(&starts, |&p| {
                    trace_gradient_line(&s, &contours, p, &opts).unwrap()
                })
            })
        });
    }
    g.finish();
}

fn sim_steps(c: &mut Criterion) {
    let mut cfg = SimConfig::new(BBox::new(0.0, 0.0, 400.0, 400.0), 400, 400, 1e9);
    cfg.diffusivity = Diffusivity::Constant { eta: 1.0 };
    cfg.tidal = TidalBoundary {
        edges: vec![Side::North],
        band: 1,
    };
    cfg.sources = vec![SchmidtSource {
        center: Point::new(200.0, 100.0),
        t_trigger: 0.0,
        radius: None,
    }];
    let mut g = c.benchmark_group("sim_400x400_20_steps");
    for (name, exec) in POLICIES {
        let base = Simulation::new(&cfg, exec).unwrap();
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched_ref(
                || base.clone(),
                |sim| {
                    for _ in 0..20 {
                        sim.step().unwrap();
                    }
                },
                criterion::BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, rasterize, trace, sim_steps);
criterion_main!(benches);
