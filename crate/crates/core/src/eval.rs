//! Rollout returns, the demonstrator/random scaling convention, and
//! action-matching metrics on held-out demonstrations.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{DatasetHeader, DemoDataset};
use crate::env::{rollout, ActionRule, Environment, Transition};
use crate::numeric::argmax;
use crate::rng::derive_seed;
use crate::{Error, Result};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

/// Live episodes per return estimate.
pub const EVAL_EPISODES: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnEstimate {
    pub mean: f64,
    /// Sample standard deviation (n − 1) over √n; zero for a single episode.
    pub stderr: f64,
    pub n_episodes: usize,
}

impl ReturnEstimate {
    /// Welford's update keeps identical samples exactly identical.
    pub fn from_samples(xs: &[f64]) -> Self {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (k, &x) in xs.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (x - mean);
        }
        let n = xs.len();
        let stderr = if n > 1 {
            (m2 / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            n_episodes: n,
        }
    }
}

/// Mean undiscounted return over independently seeded episodes.
pub fn average_return<E, P>(
    policy: &P,
    env: &E,
    n_episodes: usize,
    seed: u64,
) -> Result<ReturnEstimate>
where
    E: Environment + ?Sized,
    P: ActionRule + ?Sized,
{
    if n_episodes == 0 {
        return Err(Error::Contract(
            "average return needs at least one episode".into(),
        ));
    }
    let trajs = rollout(
        env,
        policy,
        n_episodes,
        env.horizon(),
        derive_seed(seed, "eval", 0),
    )?;
    let returns: Vec<f64> = trajs.iter().map(|t| t.total_return).collect();
    Ok(ReturnEstimate::from_samples(&returns))
}

/// Maps the random-policy reference to 0 and the demonstrator to 1.
pub fn scaled_return(raw: f64, header: &DatasetHeader) -> Result<f64> {
    let span = header.demonstrator_return - header.random_return;
    if span == 0.0 || !span.is_finite() {
        return Err(Error::UndefinedScaling(header.demonstrator_return));
    }
    Ok((raw - header.random_return) / span)
}

/// How per-class AUC/APR combine when there are more than two actions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    /// Unweighted mean over one-vs-rest problems.
    #[default]
    Macro,
    /// One pooled problem over every (state, action) score.
    Micro,
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reduction::Macro => "macro",
            Reduction::Micro => "micro",
        })
    }
}

impl FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "macro" => Ok(Reduction::Macro),
            "micro" => Ok(Reduction::Micro),
            other => Err(Error::Config(alloc::format!("unknown reduction `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionMatching {
    pub acc: f64,
    /// `None` when the held-out labels do not contain both classes.
    pub auc: Option<f64>,
    pub apr: Option<f64>,
    pub n_samples: usize,
}

/// ACC/AUC/APR of `policy` against the demonstrated actions of `heldout`.
pub fn action_matching_metrics<P: ActionRule + ?Sized>(
    policy: &P,
    heldout: &DemoDataset,
) -> Result<ActionMatching> {
    action_matching_with(
        policy,
        &heldout.transitions(),
        heldout.header.n_actions,
        Reduction::Macro,
    )
}

pub fn action_matching_with<P: ActionRule + ?Sized>(
    policy: &P,
    heldout: &[Transition],
    n_actions: usize,
    reduction: Reduction,
) -> Result<ActionMatching> {
    if heldout.is_empty() {
        return Err(Error::Contract(
            "action matching needs held-out transitions".into(),
        ));
    }
    let mut probs = Vec::with_capacity(heldout.len());
    for t in heldout {
        let p = policy.action_probs(&t.state)?;
        if p.len() != n_actions || t.action >= n_actions {
            return Err(Error::Dimension {
                context: "action-matching scores".into(),
                expected: n_actions,
                found: p.len(),
            });
        }
        probs.push(p);
    }
    let hits = probs
        .iter()
        .zip(heldout)
        .filter(|(p, t)| argmax(p) == t.action)
        .count();
    let acc = hits as f64 / heldout.len() as f64;

    let one_vs_rest = |c: usize| -> (Vec<f64>, Vec<bool>) {
        (
            probs.iter().map(|p| p[c]).collect(),
            heldout.iter().map(|t| t.action == c).collect(),
        )
    };
    let (auc, apr) = if n_actions == 2 {
        let (s, l) = one_vs_rest(1);
        (roc_auc(&s, &l), average_precision(&s, &l))
    } else {
        match reduction {
            Reduction::Macro => {
                let per_class: Vec<_> = (0..n_actions)
                    .map(one_vs_rest)
                    .map(|(s, l)| (roc_auc(&s, &l), average_precision(&s, &l)))
                    .collect();
                (
                    mean_defined(per_class.iter().map(|c| c.0)),
                    mean_defined(per_class.iter().map(|c| c.1)),
                )
            }
            Reduction::Micro => {
                let (mut s, mut l) = (Vec::new(), Vec::new());
                for c in 0..n_actions {
                    let (sc, lc) = one_vs_rest(c);
                    s.extend(sc);
                    l.extend(lc);
                }
                (roc_auc(&s, &l), average_precision(&s, &l))
            }
        }
    };
    Ok(ActionMatching {
        acc,
        auc,
        apr,
        n_samples: heldout.len(),
    })
}

/// Mean over the classes where the metric is defined.
fn mean_defined(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = xs.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Indices by descending score, grouped into runs of equal score.
fn threshold_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(alloc::vec![i]),
        }
    }
    groups
}

/// Area under the ROC curve by a trapezoidal sweep over distinct thresholds
/// (ties count one half). `None` unless both classes are present.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 || scores.len() != labels.len() {
        return None;
    }
    let (mut tp, mut fp, mut area) = (0.0, 0.0, 0.0);
    for g in threshold_groups(scores) {
        let dtp = g.iter().filter(|&&i| labels[i]).count() as f64;
        let dfp = g.len() as f64 - dtp;
        area += dfp * (tp + 0.5 * dtp);
        tp += dtp;
        fp += dfp;
    }
    debug_assert_eq!(fp, neg);
    Some(area / (pos * neg))
}

/// Step-wise area under the precision-recall curve,
/// `Σ_k (R_k − R_{k−1}) P_k` over distinct thresholds.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    if pos == 0.0 || pos == labels.len() as f64 || scores.len() != labels.len() {
        return None;
    }
    let (mut tp, mut seen, mut ap) = (0.0, 0.0, 0.0);
    for g in threshold_groups(scores) {
        let dtp = g.iter().filter(|&&i| labels[i]).count() as f64;
        tp += dtp;
        seen += g.len() as f64;
        ap += (dtp / pos) * (tp / seen);
    }
    Some(ap)
}

/// One row of evaluation output.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub algo: String,
    pub env: String,
    pub n_traj: usize,
    pub seed: u64,
    pub raw_return: ReturnEstimate,
    pub scaled_return: f64,
    pub matching: Option<ActionMatching>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DATASET_VERSION;
    use crate::env::{build_gridworld, single_state, UniformPolicy};
    use crate::solver::{finite_horizon_return, PolicyTable};
    use alloc::vec;

    fn header(demo: f64, random: f64) -> DatasetHeader {
        DatasetHeader {
            env_name: "t".into(),
            state_dim: 1,
            n_actions: 2,
            gamma: 0.9,
            n_trajectories: 0,
            demonstrator: "t".into(),
            demonstrator_return: demo,
            random_return: random,
            seed: 0,
            version: DATASET_VERSION,
        }
    }

    /// Mann–Whitney statistic by enumerating every positive–negative pair.
    fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        core::cmp::Ordering::Greater => 1.0,
                        core::cmp::Ordering::Equal => 0.5,
                        core::cmp::Ordering::Less => 0.0,
                    };
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn hand_case_auc() {
        let s = [0.9, 0.8, 0.7, 0.4, 0.3, 0.1];
        let l = [true, true, false, true, false, false];
        assert!((roc_auc(&s, &l).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert!((pairwise_auc(&s, &l) - 8.0 / 9.0).abs() < 1e-15);
        // precision at each recall step: 1/1, 2/2, 3/4
        let ap = (1.0 + 1.0 + 0.75) / 3.0;
        assert!((average_precision(&s, &l).unwrap() - ap).abs() < 1e-15);
    }

    #[test]
    fn constant_scores_are_uninformative() {
        let s = [0.5; 6];
        let l = [true, false, true, false, true, false];
        assert_eq!(roc_auc(&s, &l), Some(0.5));
        assert_eq!(average_precision(&s, &l), Some(0.5));
    }

    #[test]
    fn single_class_is_undefined() {
        assert_eq!(roc_auc(&[0.1, 0.2], &[true, true]), None);
        assert_eq!(average_precision(&[0.1, 0.2], &[false, false]), None);
    }

    #[test]
    fn scaling_conventions() {
        let h = header(10.0, 2.0);
        assert_eq!(scaled_return(10.0, &h).unwrap(), 1.0);
        assert_eq!(scaled_return(2.0, &h).unwrap(), 0.0);
        assert_eq!(scaled_return(6.0, &h).unwrap(), 0.5);
        assert!(matches!(
            scaled_return(1.0, &header(3.0, 3.0)),
            Err(Error::UndefinedScaling(_))
        ));
    }

    #[test]
    fn deterministic_returns_have_zero_stderr() {
        let mdp = single_state(1.0, 0.9, 1).with_horizon(10);
        let r = average_return(&UniformPolicy { n_actions: 1 }, &mdp, 50, 0).unwrap();
        assert_eq!(r.mean, 10.0);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.n_episodes, 50);
        let r = ReturnEstimate::from_samples(&[0.1; 7]);
        assert_eq!((r.mean, r.stderr), (0.1, 0.0));
    }

    #[test]
    fn uniform_gridworld_return_matches_exact_value() {
        let mdp = build_gridworld(4, 4, 0.1, 5.0, 0.2, 0.95)
            .unwrap()
            .with_horizon(60);
        let policy = PolicyTable::uniform(16, 4);
        let exact = finite_horizon_return(&mdp, &policy, 60).unwrap();
        let est = average_return(&policy, &mdp, EVAL_EPISODES, 7).unwrap();
        assert!(
            (est.mean - exact).abs() <= 3.0 * est.stderr,
            "{} vs {exact}",
            est.mean
        );
    }

    struct Table(Vec<Vec<f64>>);

    impl ActionRule for Table {
        fn action_probs(&self, features: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0[features[0] as usize].clone())
        }
    }

    fn transitions(actions: &[usize]) -> Vec<Transition> {
        actions
            .iter()
            .enumerate()
            .map(|(i, &a)| Transition {
                state: vec![i as f64],
                action: a,
                next_state: None,
                done: false,
            })
            .collect()
    }

    #[test]
    fn matching_the_demonstrator_scores_perfectly() {
        let actions = [0, 2, 1, 2, 0, 1];
        let table: Vec<Vec<f64>> = actions
            .iter()
            .map(|&a| {
                let mut p = vec![0.1; 3];
                p[a] = 0.8;
                p
            })
            .collect();
        for red in [Reduction::Macro, Reduction::Micro] {
            let m = action_matching_with(&Table(table.clone()), &transitions(&actions), 3, red)
                .unwrap();
            assert_eq!((m.acc, m.auc, m.apr), (1.0, Some(1.0), Some(1.0)));
        }
    }

    #[test]
    fn uniform_policy_on_balanced_binary_labels() {
        let m = action_matching_with(
            &UniformPolicy { n_actions: 2 },
            &transitions(&[0, 1, 0, 1]),
            2,
            Reduction::Macro,
        )
        .unwrap();
        assert_eq!(m.auc, Some(0.5));
        // ties go to action 0
        assert_eq!(m.acc, 0.5);
    }

    #[test]
    fn single_class_heldout_keeps_accuracy() {
        let m = action_matching_with(
            &UniformPolicy { n_actions: 2 },
            &transitions(&[1, 1, 1]),
            2,
            Reduction::Macro,
        )
        .unwrap();
        assert_eq!((m.acc, m.auc, m.apr), (0.0, None, None));
    }
}
