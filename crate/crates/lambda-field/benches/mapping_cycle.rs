//! Mapping-cycle benchmarks: the data-parallel pipeline against the
//! sequential fallback at two population sizes, plus the planner on a
//! populated snapshot.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lambda_field::exec::ExecMode;
use lambda_field::geometry::Vec2;
use lambda_field::grid::GridFrame;
use lambda_field::particles::{MappingConfig, ObstacleKind};
use lambda_field::pipeline::MappingEngine;
use lambda_field::planner::{plan, PlannerConfig, RobotProfile};
use lambda_field::sensor::{cast_scan, SensorModel};
use lambda_field::world::{Agent, ScriptLeg, WorldState};

fn bench_world() -> WorldState {
    let mut world = WorldState::open_area(Vec2::new(-20.0, -20.0), Vec2::new(20.0, 20.0));
    world.walls.push(vec![
        Vec2::new(2.0, -8.0),
        Vec2::new(2.4, -8.0),
        Vec2::new(2.4, 8.0),
        Vec2::new(2.0, 8.0),
    ]);
    world.agents.push(Agent::new(
        ObstacleKind::Pedestrian,
        Vec2::new(-4.0, 3.0),
        vec![ScriptLeg { target: Vec2::new(4.0, 3.0), speed: 1.2 }],
    ));
    world.agents.push(Agent::new(
        ObstacleKind::Car,
        Vec2::new(-6.0, -3.0),
        vec![ScriptLeg { target: Vec2::new(6.0, -3.0), speed: 1.5 }],
    ));
    world
}

fn warmed_engine(population: usize, mode: ExecMode) -> (WorldState, MappingEngine, SensorModel) {
    let world = bench_world();
    let sensor = SensorModel::default();
    let frame = GridFrame::centered(200, 0.15, Vec2::ZERO).unwrap();
    let config = MappingConfig { population_size: population, ..Default::default() };
    let mut engine = MappingEngine::new(frame, 0.0, config, sensor, 7, mode);
    // Warm the population up so the benched cycle carries a realistic
    // mix of tracked particles.
    let mut w = world.clone();
    let profile = RobotProfile::default();
    for _ in 0..10 {
        let scan = cast_scan(&w, w.robot.pose, &sensor);
        engine.cycle(&scan);
        w.step(0.1, &profile);
    }
    (w, engine, sensor)
}

fn modes() -> Vec<(&'static str, ExecMode)> {
    #[cfg(feature = "parallel")]
    {
        vec![("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential", ExecMode::Sequential)]
    }
}

fn mapping_cycle(c: &mut Criterion) {
    let mut group = c.benchmark_group("mapping_cycle");
    group.sample_size(10);
    for population in [5_000usize, 20_000] {
        for (name, mode) in modes() {
            group.bench_with_input(
                BenchmarkId::new(name, population),
                &population,
                |b, &population| {
                    let (world, mut engine, sensor) = warmed_engine(population, mode);
                    let scan = cast_scan(&world, world.robot.pose, &sensor);
                    b.iter(|| {
                        let (snapshot, _) = engine.cycle(&scan);
                        snapshot.cells.len()
                    });
                },
            );
        }
    }
    group.finish();
}

fn planner_cycle(c: &mut Criterion) {
    let mut group = c.benchmark_group("planner");
    group.sample_size(10);
    for (name, mode) in modes() {
        group.bench_function(BenchmarkId::new(name, "plan"), |b| {
            let (world, mut engine, sensor) = warmed_engine(5_000, mode);
            let scan = cast_scan(&world, world.robot.pose, &sensor);
            let (snapshot, _) = engine.cycle(&scan);
            let profile = RobotProfile::default();
            let config = PlannerConfig { goal: Vec2::new(0.0, 8.0), ..Default::default() };
            b.iter(|| plan(&snapshot, world.robot.pose, &profile, &config, mode).command);
        });
    }
    group.finish();
}

criterion_group!(benches, mapping_cycle, planner_cycle);
criterion_main!(benches);
