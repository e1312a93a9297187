//! Plain-text exports for inspection and plotting.

use std::fmt::Write as _;

use edm_core::env::{TabularMdp, ACTION_NAMES};
use edm_core::solver::{OccupancyMeasure, SoftQ};

use crate::text::fmt_f64;

/// Transition probabilities and rewards, one `(s, a)` block per line pair.
pub fn mdp_dump(mdp: &TabularMdp) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {}: {} states, {} actions, gamma {}",
        mdp.name(),
        mdp.n_states(),
        mdp.n_actions(),
        mdp.gamma()
    );
    let terminal: Vec<String> = (0..mdp.n_states())
        .filter(|&s| mdp.is_terminal(s))
        .map(|s| s.to_string())
        .collect();
    let _ = writeln!(out, "terminal: {}", terminal.join(" "));
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let name = match ACTION_NAMES.get(a) {
                Some(n) if mdp.n_actions() == ACTION_NAMES.len() => n.to_string(),
                _ => a.to_string(),
            };
            let row: Vec<String> = mdp
                .transition_row(s, a)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(n, p)| format!("{n}:{p}"))
                .collect();
            let _ = writeln!(
                out,
                "s{s} {name} R={} T={}",
                mdp.reward(s, a),
                row.join(" ")
            );
        }
    }
    out
}

fn state_action_csv(values: &[f64], n_actions: usize) -> String {
    let mut out = String::from("state,action,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", i / n_actions, i % n_actions, fmt_f64(*v));
    }
    out
}

pub fn q_csv(q: &SoftQ) -> String {
    state_action_csv(&q.q, q.n_actions)
}

pub fn occupancy_csv(occ: &OccupancyMeasure) -> String {
    state_action_csv(&occ.state_action, occ.n_actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use edm_core::env::build_chain;

    #[test]
    fn csv_layout() {
        let q = SoftQ::from_table(2, 2, vec![0.5, 1.0, 2.0, -1.0], 0.9).unwrap();
        let csv = q_csv(&q);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "state,action,value");
        assert!(lines[3].starts_with("1,0,2.0"));
    }

    #[test]
    fn dump_lists_every_pair() {
        let mdp = build_chain(3, 0.9, 1.0).unwrap();
        let dump = mdp_dump(&mdp);
        assert_eq!(dump.lines().filter(|l| l.starts_with('s')).count(), 6);
        assert!(dump.contains("terminal: 2"));
    }
}
