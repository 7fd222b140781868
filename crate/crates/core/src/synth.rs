//! Deterministic generator for benchmark-style CVRP instances.
//!
//! Coordinates are integer points on the [0,100]^2 grid and demands are
//! uniform in 1..=9, matching the texture of the classic E/P series. The
//! capacity is sized so roughly `k` vehicles are needed:
//! `ceil(1.1 * total_demand / k)`, never below the largest single demand.
//! Everything is seeded, so the same spec always yields the same instance.

use crate::instance::Instance;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct SynthSpec {
    /// Series letter used in the name (E, P, ...).
    pub set: char,
    /// Node count including the depot, as in the classic naming scheme.
    pub n_nodes: usize,
    /// Vehicle count baked into the `-k` suffix and the capacity.
    pub k: usize,
    pub seed: u64,
}

pub fn synth_instance(spec: &SynthSpec) -> Instance {
    assert!(spec.n_nodes >= 2 && spec.k >= 1);
    let name = format!("{}-n{}-k{}", spec.set, spec.n_nodes, spec.k);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_nodes - 1;
    let depot = (
        rng.random_range(0..=100) as f64,
        rng.random_range(0..=100) as f64,
    );
    let mut customers = Vec::with_capacity(n);
    for _ in 0..n {
        let xy = (
            rng.random_range(0..=100) as f64,
            rng.random_range(0..=100) as f64,
        );
        let d: u32 = rng.random_range(1..=9);
        customers.push((xy, d));
    }
    let total: u64 = customers.iter().map(|&(_, d)| u64::from(d)).sum();
    let max_d = customers.iter().map(|&(_, d)| d).max().unwrap();
    let capacity = ((11 * total).div_ceil(10 * spec.k as u64) as u32).max(max_d);
    Instance::single_depot(name, depot, &customers, capacity, 0.0)
        .expect("generated data is always valid")
}

/// The fixed suite the experiment harness runs by default: 22 instances in
/// the style of the E and P series, 12 to 30 customers each.
pub fn benchmark_suite() -> Vec<Instance> {
    suite_specs().iter().map(synth_instance).collect()
}

pub fn suite_specs() -> Vec<SynthSpec> {
    let e = |n_nodes, k, seed| SynthSpec {
        set: 'E',
        n_nodes,
        k,
        seed,
    };
    let p = |n_nodes, k, seed| SynthSpec {
        set: 'P',
        n_nodes,
        k,
        seed,
    };
    vec![
        e(13, 4, 101),
        e(16, 3, 102),
        e(19, 4, 103),
        e(22, 4, 104),
        e(23, 3, 105),
        e(26, 4, 106),
        e(29, 5, 107),
        e(30, 3, 108),
        e(31, 4, 109),
        e(31, 5, 110),
        p(14, 2, 201),
        p(16, 5, 202),
        p(17, 3, 203),
        p(19, 2, 204),
        p(20, 2, 205),
        p(21, 2, 206),
        p(22, 2, 207),
        p(22, 6, 208),
        p(23, 5, 209),
        p(26, 5, 210),
        p(29, 4, 211),
        p(31, 6, 212),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_cvrplib;

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec {
            set: 'E',
            n_nodes: 13,
            k: 4,
            seed: 101,
        };
        let a = synth_instance(&spec);
        let b = synth_instance(&spec);
        assert_eq!(a, b);
        assert_eq!(a.name(), "E-n13-k4");
        assert_eq!(a.n_customers(), 12);
        assert_eq!(a.vehicle_bound(), 4);
    }

    #[test]
    fn suite_is_valid_and_roundtrips() {
        let suite = benchmark_suite();
        assert_eq!(suite.len(), 22);
        let mut names = std::collections::BTreeSet::new();
        for inst in &suite {
            assert!(names.insert(inst.name().to_string()), "duplicate name");
            let max_d = inst.customers().map(|u| inst.demand(u)).max().unwrap();
            assert!(inst.capacity() >= max_d);
            assert!(inst.n_customers() <= 30);
            let back = parse_cvrplib(&inst.to_vrp_string()).unwrap();
            assert_eq!(*inst, back);
        }
    }

    #[test]
    fn capacity_tracks_vehicle_count() {
        // More vehicles means smaller capacity for the same seed/customers.
        let few = synth_instance(&SynthSpec {
            set: 'T',
            n_nodes: 20,
            k: 2,
            seed: 7,
        });
        let many = synth_instance(&SynthSpec {
            set: 'T',
            n_nodes: 20,
            k: 6,
            seed: 7,
        });
        assert!(few.capacity() > many.capacity());
    }
}
