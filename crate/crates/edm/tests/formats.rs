use std::path::Path;

use edm::checkpoint::{checkpoint_to_string, load_checkpoint, save_checkpoint};
use edm::config::{RunConfig, Source};
use edm::dataset::{load_dataset, save_dataset};
use edm_core::autodiff::{Activation, Architecture};
use edm_core::data::{DatasetHeader, DemoDataset, DemoEpisode, DATASET_VERSION};
use edm_core::env::Transition;
use edm_core::policy::PolicyNet;
use edm_core::rng::stream;
use proptest::prelude::*;

fn any_finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -10.0f64..10.0
    ]
}

fn dataset() -> impl Strategy<Value = DemoDataset> {
    (1usize..5, 1usize..5, any::<bool>(), 1usize..4).prop_flat_map(
        |(dim, n_actions, triples, n_eps)| {
            let transition = (
                prop::collection::vec(any_finite(), dim),
                0..n_actions,
                prop::collection::vec(any_finite(), dim),
                any::<bool>(),
            )
                .prop_map(move |(state, action, next, done)| Transition {
                    state,
                    action,
                    next_state: triples.then_some(next),
                    done,
                });
            let episodes = prop::collection::vec(prop::collection::vec(transition, 1..6), n_eps);
            let ids = prop::collection::btree_set(any::<u64>(), n_eps);
            let header = (
                "[a-z][a-z0-9_-]{0,8}",
                "[a-z][a-z0-9 .:-]{0,12}[a-z0-9]",
                any_finite(),
                any_finite(),
                any_finite(),
                any::<u64>(),
            );
            (episodes, ids, header).prop_map(
                move |(eps, ids, (env_name, demonstrator, gamma, demo, random, seed))| {
                    let header = DatasetHeader {
                        env_name,
                        state_dim: dim,
                        n_actions,
                        gamma,
                        n_trajectories: n_eps,
                        demonstrator,
                        demonstrator_return: demo,
                        random_return: random,
                        seed,
                        version: DATASET_VERSION,
                    };
                    let episodes = ids
                        .into_iter()
                        .zip(eps)
                        .map(|(id, transitions)| DemoEpisode { id, transitions })
                        .collect();
                    DemoDataset::new(header, episodes).unwrap()
                },
            )
        },
    )
}

fn bits(ds: &DemoDataset) -> Vec<u64> {
    let h = &ds.header;
    let mut out = vec![
        h.gamma.to_bits(),
        h.demonstrator_return.to_bits(),
        h.random_return.to_bits(),
    ];
    for t in ds.transitions() {
        out.extend(
            t.state
                .iter()
                .chain(t.next_state.iter().flatten())
                .map(|v| v.to_bits()),
        );
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_round_trip_is_identity(ds in dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("set");
        save_dataset(&ds, &prefix).unwrap();
        let back = load_dataset(&prefix).unwrap();
        prop_assert_eq!(bits(&back), bits(&ds));
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), hidden in prop::collection::vec(1usize..6, 0..3)) {
        let arch = Architecture::new(3, hidden, 2, Activation::Tanh);
        let net = PolicyNet::new(arch, &mut stream(seed, "init", 0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&net, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        prop_assert_eq!(checkpoint_to_string(&back), checkpoint_to_string(&net));
        let b: Vec<u64> = back.params().flatten().iter().map(|v| v.to_bits()).collect();
        let a: Vec<u64> = net.params().flatten().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn flags_beat_file_beat_defaults(choices in prop::collection::vec((0u8..4, 1u32..500, 1u32..500), 5)) {
        const KEYS: [&str; 5] = ["seed", "train.iterations", "train.batch_size", "sgld.chain_length", "eval.episodes"];
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        let mut text = String::from("# generated\n");
        let mut flags = Vec::new();
        for (key, &(mode, in_file, in_flag)) in KEYS.iter().zip(&choices) {
            if mode & 1 != 0 {
                text.push_str(&format!("{key} = {in_file}\n"));
            }
            if mode & 2 != 0 {
                flags.push(format!("{key}={in_flag}"));
            }
        }
        std::fs::write(&file, &text).unwrap();
        let defaults = RunConfig::default();
        let cfg = RunConfig::resolve(Some(&file), &flags).unwrap();
        for (key, &(mode, in_file, in_flag)) in KEYS.iter().zip(&choices) {
            let (value, source) = match mode {
                0 => (defaults.get(key).unwrap(), Source::Default),
                1 => (in_file.to_string(), Source::File(file.clone())),
                _ => (in_flag.to_string(), Source::Flag),
            };
            prop_assert_eq!(cfg.get(key).unwrap(), value);
            prop_assert_eq!(cfg.source(key), source);
        }
    }
}

fn sweep_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("sweep.cfg");
    std::fs::write(
        &path,
        "seed = 3\nenv.width = 3\nenv.height = 3\nsweep.algos = edm,bc,rcal\nsweep.n_traj = 1,3\n\
         sweep.seeds = 2\ntrain.iterations = 40\ntrain.hidden = 8,8\neval.episodes = 20\n",
    )
    .unwrap();
    path
}

#[test]
fn sweep_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    let run = |out: &str| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_edm"))
            .args(["sweep", "--config", cfg.to_str().unwrap(), "--out", out])
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(status.status.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 2);
    let algos: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    let mut sorted = algos.clone();
    sorted.sort();
    assert_eq!(algos, sorted);
}
