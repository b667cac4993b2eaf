use proptest::prelude::*;
use subtask_core::prompt::table::{columns, serialize_textual};
use subtask_core::prompt::make_one_shot_snippet;
use subtask_core::simgen::{builtin_env, check_phase_conditions, generate_trajectory, BUILTIN_ENV_NAMES};

fn env_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&BUILTIN_ENV_NAMES[..])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ground_truth_tiles_trajectory(name in env_name(), seed in any::<u64>()) {
        let env = builtin_env(name).unwrap();
        let (data, gt) = generate_trajectory(&env, seed, false).unwrap();
        data.validate().unwrap();
        prop_assert!(gt.validate().is_ok());
        prop_assert!(gt.tiles_range());
        prop_assert_eq!(gt.len(), env.num_subtasks());
        prop_assert_eq!(gt.steps(), data.last_step());
        for (s, d) in gt.iter().zip(env.descriptions()) {
            prop_assert_eq!(s.description.as_str(), d);
        }
        prop_assert_eq!(check_phase_conditions(&env, &data, &gt), Ok(()));
    }

    #[test]
    fn deterministic_per_seed(name in env_name(), seed in any::<u64>()) {
        let env = builtin_env(name).unwrap();
        let a = generate_trajectory(&env, seed, false).unwrap();
        let b = generate_trajectory(&env, seed, false).unwrap();
        prop_assert_eq!(a.0.to_json(), b.0.to_json());
        prop_assert_eq!(a.1, b.1);
    }

    #[test]
    fn textual_table_reparses(name in env_name(), seed in 0u64..1000) {
        let env = builtin_env(name).unwrap();
        let (data, _) = generate_trajectory(&env, seed, false).unwrap();
        let text = serialize_textual(&data);
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        prop_assert_eq!(header, columns(&data));
        let mut count = 0u64;
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            prop_assert_eq!(cells.len(), columns(&data).len());
            prop_assert_eq!(cells[0].parse::<u64>().unwrap(), i as u64);
            let step = &data.steps[i];
            for (c, v) in cells[1..].iter().zip(step.x.iter().chain(step.u.iter())) {
                prop_assert!((c.parse::<f64>().unwrap() - v).abs() <= 5e-4 + 1e-12);
            }
            let gripper: u8 = cells.last().unwrap().parse().unwrap();
            prop_assert!(gripper <= 1);
            count += 1;
        }
        prop_assert_eq!(Some(count - 1), data.last_step());
    }

    #[test]
    fn snippet_has_two_rows_per_boundary(name in env_name(), seed in 0u64..1000) {
        let env = builtin_env(name).unwrap();
        let (data, gt) = generate_trajectory(&env, seed, false).unwrap();
        let snippet = make_one_shot_snippet(&data, &gt).unwrap();
        let rows = snippet
            .lines()
            .filter(|l| l.split(',').next().is_some_and(|c| c.parse::<u64>().is_ok()))
            .count();
        prop_assert_eq!(rows, 2 * (gt.len() - 1));
        prop_assert!(rows < data.steps.len());
    }
}
