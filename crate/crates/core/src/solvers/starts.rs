use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::StatePair;
use crate::domain::GridDomain;
use crate::thresholds::Point;

const SCALES: [f64; 3] = [0.5, 1.0, 2.0];

/// Highest cosine mode per axis used for random starts.
const MODES: usize = 3;

/// Constant states `(±s₀, ±t₀) × {0.5, 1, 2}` for every sign combination.
/// With `(s₀, t₀)` the maximizer of the `s_F` ratio the unscaled state has
/// negative energy once `λ > 1/s_F`. The mixed signs matter for potentials
/// that are even in each argument separately, whose solutions come in four
/// reflected copies.
pub fn constant_starts(grid: &GridDomain, anchor: Point) -> Vec<StatePair> {
    let n = grid.node_count();
    let mut out = Vec::with_capacity(4 * SCALES.len());
    for (ss, st) in [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
        for k in SCALES {
            out.push(StatePair::constant(n, ss * k * anchor.s, st * k * anchor.t));
        }
    }
    out
}

/// Smooth random states: each component is a random combination of the
/// lowest Neumann cosine modes, scaled to the anchor radius. Seeded, so the
/// same `(seed, count)` always gives the same states.
pub fn random_starts(grid: &GridDomain, anchor: Point, count: usize, seed: u64) -> Vec<StatePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = anchor.radius().max(1e-3);
    let lengths = grid.lengths();
    let lx = lengths[0];
    let ly = lengths.get(1).copied().unwrap_or(1.0);
    let ny_modes = if grid.dim() == 2 { MODES } else { 0 };
    (0..count)
        .map(|_| {
            let mut component = || {
                let mut coef = [[0.0; MODES + 1]; MODES + 1];
                for (k, row) in coef.iter_mut().enumerate() {
                    for (l, c) in row.iter_mut().enumerate().take(ny_modes + 1) {
                        *c = radius * rng.random_range(-1.0..1.0) / (1.0 + (k + l) as f64);
                    }
                }
                grid.sample(|x, y| {
                    let mut acc = 0.0;
                    for (k, row) in coef.iter().enumerate() {
                        let cx = (k as f64 * PI * x / lx).cos();
                        for (l, c) in row.iter().enumerate().take(ny_modes + 1) {
                            acc += c * cx * (l as f64 * PI * y / ly).cos();
                        }
                    }
                    acc
                })
            };
            let u = component();
            let v = component();
            StatePair::from_parts(u, v).expect("components share the grid")
        })
        .collect()
}

/// Constant starts followed by `count` random starts.
pub fn standard_starts(
    grid: &GridDomain,
    anchor: Point,
    count: usize,
    seed: u64,
) -> Vec<StatePair> {
    let mut out = constant_starts(grid, anchor);
    out.extend(random_starts(grid, anchor, count, seed));
    out
}
