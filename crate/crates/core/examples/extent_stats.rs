//! Prints the spread of trajectory lengths for each built-in environment.

use subtask_core::simgen::{builtin_envs, generate_trajectory};

fn main() {
    for env in builtin_envs() {
        let ks: Vec<u64> = (0..50)
            .map(|seed| generate_trajectory(&env, seed, false).unwrap().1.extent().unwrap().0)
            .collect();
        let mean = ks.iter().sum::<u64>() as f64 / ks.len() as f64;
        let (_, gt) = generate_trajectory(&env, 0, false).unwrap();
        println!(
            "{:<10} N={} target={} K mean={mean:.1} min={} max={}  seed0={:?}",
            env.name,
            env.num_subtasks(),
            env.target_extent,
            ks.iter().min().unwrap(),
            ks.iter().max().unwrap(),
            gt.iter().map(|s| (s.start, s.end)).collect::<Vec<_>>()
        );
    }
}
