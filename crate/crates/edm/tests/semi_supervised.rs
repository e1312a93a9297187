use edm::config::RunConfig;
use edm::envspec::build_expert;
use edm::pipeline::{evaluate, state_only_from, train_policy};
use edm_core::edm::Algorithm;
use edm_core::rng::derive_seed;
use rayon::prelude::*;

/// One demonstration plus the states of seven more: over 20 seeds the
/// extra states should not hurt on average.
#[test]
fn state_only_data_does_not_hurt_edm() {
    let cfg = RunConfig::default();
    let env = cfg.env.build().unwrap();
    let (expert, _) = build_expert(&env, &cfg.solver).unwrap();
    let pairs: Vec<(f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let data = env.generate(&expert, 1, seed).unwrap();
            let extra = env
                .generate(&expert, 7, derive_seed(seed, "state-only", 0))
                .unwrap();
            let states = state_only_from(&extra);
            let scaled = |extra: Option<&[Vec<f64>]>| {
                let out =
                    train_policy(&cfg, &env, &data, extra, Algorithm::Edm, seed, None).unwrap();
                evaluate(&cfg, &env, &out.net, &data, None, "edm", seed)
                    .unwrap()
                    .scaled_return
            };
            (scaled(None), scaled(Some(&states)))
        })
        .collect();
    let plain = pairs.iter().map(|p| p.0).sum::<f64>() / 20.0;
    let augmented = pairs.iter().map(|p| p.1).sum::<f64>() / 20.0;
    println!("plain EDM {plain:.3}, EDM + state-only {augmented:.3}");
    assert!(
        augmented >= plain,
        "plain EDM {plain:.3}, EDM + state-only {augmented:.3}"
    );
}
