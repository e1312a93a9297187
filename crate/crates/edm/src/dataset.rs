//! Dataset file pair: `<prefix>.header` holds `key = value` metadata and
//! `<prefix>.transitions` one comma-separated record per line,
//!
//! ```text
//! episode_id,t,state…,action,next_state…,done
//! ```
//!
//! Records without a successor (pairs) drop the `next_state` fields; the
//! field count tells the two apart.

use std::path::{Path, PathBuf};

use edm_core::data::{DatasetHeader, DemoDataset, DemoEpisode, DATASET_VERSION};
use edm_core::env::Transition;

use crate::error::{parse_error, read, write, Error, Result};
use crate::text::{fmt_f64, key_values, parse_f64, parse_value};

pub fn header_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, "header")
}

pub fn transitions_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, "transitions")
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn header_to_string(h: &DatasetHeader) -> Result<String> {
    for (what, s) in [("env name", &h.env_name), ("demonstrator", &h.demonstrator)] {
        if s.contains(['\n', '\r', '#']) || s.trim() != s {
            return Err(Error::Config(format!(
                "{what} `{s}` cannot be stored in a header line"
            )));
        }
    }
    Ok(format!(
        "version = {}\nenv = {}\nstate_dim = {}\nn_actions = {}\ngamma = {}\nn_trajectories = {}\n\
         demonstrator = {}\ndemonstrator_return = {}\nrandom_return = {}\nseed = {}\n",
        h.version,
        h.env_name,
        h.state_dim,
        h.n_actions,
        fmt_f64(h.gamma),
        h.n_trajectories,
        h.demonstrator,
        fmt_f64(h.demonstrator_return),
        fmt_f64(h.random_return),
        h.seed,
    ))
}

pub fn transitions_to_string(ds: &DemoDataset) -> String {
    let mut out = String::new();
    for e in &ds.episodes {
        for (t, tr) in e.transitions.iter().enumerate() {
            let mut fields = vec![e.id.to_string(), t.to_string()];
            fields.extend(tr.state.iter().map(|v| fmt_f64(*v)));
            fields.push(tr.action.to_string());
            if let Some(next) = &tr.next_state {
                fields.extend(next.iter().map(|v| fmt_f64(*v)));
            }
            fields.push(u8::from(tr.done).to_string());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn save_dataset(ds: &DemoDataset, prefix: &Path) -> Result<()> {
    ds.validate()?;
    write(&header_path(prefix), &header_to_string(&ds.header)?)?;
    write(&transitions_path(prefix), &transitions_to_string(ds))
}

pub fn load_dataset(prefix: &Path) -> Result<DemoDataset> {
    let hp = header_path(prefix);
    let header = parse_header(&hp, &read(&hp)?)?;
    let tp = transitions_path(prefix);
    parse_transitions(&tp, &read(&tp)?, header)
}

pub fn parse_header(path: &Path, text: &str) -> Result<DatasetHeader> {
    let mut version = None;
    let mut env_name = None;
    let mut state_dim = None;
    let mut n_actions = None;
    let mut gamma = None;
    let mut n_trajectories = None;
    let mut demonstrator = None;
    let mut demonstrator_return = None;
    let mut random_return = None;
    let mut seed = None;
    for kv in key_values(path, text) {
        let (line, key, value) = kv?;
        let float = || {
            parse_f64(value)
                .ok_or_else(|| parse_error(path, line, format!("invalid number for `{key}`")))
        };
        match key {
            "version" => version = Some(parse_value::<u32>(path, line, key, value)?),
            "env" => env_name = Some(value.to_string()),
            "state_dim" => state_dim = Some(parse_value(path, line, key, value)?),
            "n_actions" => n_actions = Some(parse_value(path, line, key, value)?),
            "gamma" => gamma = Some(float()?),
            "n_trajectories" => n_trajectories = Some(parse_value(path, line, key, value)?),
            "demonstrator" => demonstrator = Some(value.to_string()),
            "demonstrator_return" => demonstrator_return = Some(float()?),
            "random_return" => random_return = Some(float()?),
            "seed" => seed = Some(parse_value(path, line, key, value)?),
            other => {
                return Err(parse_error(
                    path,
                    line,
                    format!("unknown header key `{other}`"),
                ))
            }
        }
    }
    let end = text.lines().count();
    let missing = |key: &str| parse_error(path, end, format!("header lacks `{key}`"));
    let version = version.ok_or_else(|| missing("version"))?;
    if version != DATASET_VERSION {
        return Err(parse_error(
            path,
            1,
            format!("dataset version {version} is not supported (expected {DATASET_VERSION})"),
        ));
    }
    Ok(DatasetHeader {
        env_name: env_name.ok_or_else(|| missing("env"))?,
        state_dim: state_dim.ok_or_else(|| missing("state_dim"))?,
        n_actions: n_actions.ok_or_else(|| missing("n_actions"))?,
        gamma: gamma.ok_or_else(|| missing("gamma"))?,
        n_trajectories: n_trajectories.ok_or_else(|| missing("n_trajectories"))?,
        demonstrator: demonstrator.ok_or_else(|| missing("demonstrator"))?,
        demonstrator_return: demonstrator_return.ok_or_else(|| missing("demonstrator_return"))?,
        random_return: random_return.ok_or_else(|| missing("random_return"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        version,
    })
}

pub fn parse_transitions(path: &Path, text: &str, header: DatasetHeader) -> Result<DemoDataset> {
    let d = header.state_dim;
    let (pair_len, triple_len) = (d + 4, 2 * d + 4);
    let mut episodes: Vec<DemoEpisode> = Vec::new();
    let mut last_valid = 0;
    let truncated = |last_valid: usize, why: String| {
        let at = if last_valid == 0 {
            "no valid record".to_string()
        } else {
            format!("last valid line is {last_valid}")
        };
        parse_error(
            path,
            last_valid + 1,
            format!("{why}; file looks truncated ({at})"),
        )
    };
    let n_lines = text.lines().count();
    let complete = text.is_empty() || text.ends_with('\n');
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if !complete && lineno == n_lines {
            return Err(truncated(
                last_valid,
                format!("line {lineno} is not newline-terminated"),
            ));
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != pair_len && fields.len() != triple_len {
            return Err(truncated(
                last_valid,
                format!(
                    "line {lineno} has {} fields, expected {pair_len} or {triple_len}",
                    fields.len()
                ),
            ));
        }
        let bad = |what: &str| parse_error(path, lineno, format!("invalid {what}"));
        let id: u64 = fields[0].parse().map_err(|_| bad("episode id"))?;
        let t: usize = fields[1].parse().map_err(|_| bad("time index"))?;
        let floats = |xs: &[&str]| {
            xs.iter()
                .map(|x| parse_f64(x))
                .collect::<Option<Vec<f64>>>()
        };
        let state = floats(&fields[2..2 + d]).ok_or_else(|| bad("state value"))?;
        let action: usize = fields[2 + d].parse().map_err(|_| bad("action"))?;
        let next_state = if fields.len() == triple_len {
            Some(floats(&fields[3 + d..3 + 2 * d]).ok_or_else(|| bad("next-state value"))?)
        } else {
            None
        };
        let done = match *fields.last().unwrap() {
            "0" => false,
            "1" => true,
            _ => return Err(bad("done flag (expected 0 or 1)")),
        };
        let episode = match episodes.last_mut() {
            Some(e) if e.id == id => e,
            _ => {
                if episodes.iter().any(|e| e.id == id) {
                    return Err(parse_error(
                        path,
                        lineno,
                        format!("episode {id} is not contiguous"),
                    ));
                }
                episodes.push(DemoEpisode {
                    id,
                    transitions: Vec::new(),
                });
                episodes.last_mut().unwrap()
            }
        };
        if t != episode.transitions.len() {
            return Err(parse_error(
                path,
                lineno,
                format!(
                    "episode {id} step {t} out of order (expected {})",
                    episode.transitions.len()
                ),
            ));
        }
        episode.transitions.push(Transition {
            state,
            action,
            next_state,
            done,
        });
        last_valid = lineno;
    }
    if episodes.len() != header.n_trajectories {
        return Err(truncated(
            last_valid,
            format!(
                "found {} of {} episodes",
                episodes.len(),
                header.n_trajectories
            ),
        ));
    }
    DemoDataset::new(header, episodes).map_err(|e| parse_error(path, last_valid, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(n: usize) -> DatasetHeader {
        DatasetHeader {
            env_name: "fixture".into(),
            state_dim: 2,
            n_actions: 3,
            gamma: 0.9,
            n_trajectories: n,
            demonstrator: "hand written".into(),
            demonstrator_return: 1.5,
            random_return: -0.5,
            seed: 7,
            version: DATASET_VERSION,
        }
    }

    #[test]
    fn hand_written_fixture() {
        let text = "0,0,0.5,-1,2,1e-3,0.25,0\n0,1,1e-3,0.25,1,1\n";
        let ds = parse_transitions(Path::new("f"), text, header(1)).unwrap();
        let t = &ds.episodes[0].transitions;
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].state, vec![0.5, -1.0]);
        assert_eq!(t[0].action, 2);
        assert_eq!(t[0].next_state, Some(vec![0.001, 0.25]));
        assert!(!t[0].done);
        assert_eq!(t[1].state, vec![0.001, 0.25]);
        assert_eq!(t[1].action, 1);
        assert_eq!(t[1].next_state, None);
        assert!(t[1].done);
    }

    #[test]
    fn truncation_names_last_valid_line() {
        let text = "0,0,0.5,-1,2,1e-3,0.25,0\n0,1,1e-3,0.25,1,0.5,0.5,0\n1,0,0.5,-1,2,1e";
        let err = parse_transitions(Path::new("f"), text, header(2))
            .unwrap_err()
            .to_string();
        assert!(err.contains("last valid line is 2"), "{err}");

        let text = "0,0,0.5,-1,2,1e-3,0.25,0\n";
        let err = parse_transitions(Path::new("f"), text, header(2))
            .unwrap_err()
            .to_string();
        assert!(err.contains("last valid line is 1"), "{err}");
    }

    #[test]
    fn malformed_records_report_their_line() {
        let text = "0,0,0.5,-1,2,1e-3,0.25,0\n0,1,x,0.25,1,1\n";
        let err = parse_transitions(Path::new("f"), text, header(1))
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("f:2:"), "{err}");
        let text = "0,0,0.5,-1,2,1e-3,0.25,0\n0,2,1e-3,0.25,1,1\n";
        assert!(parse_transitions(Path::new("f"), text, header(1)).is_err());
        let text = "0,0,0.5,-1,7,1e-3,0.25,0\n";
        assert!(parse_transitions(Path::new("f"), text, header(1)).is_err());
    }

    #[test]
    fn header_round_trip_and_version_check() {
        let h = header(3);
        let text = header_to_string(&h).unwrap();
        assert_eq!(parse_header(Path::new("h"), &text).unwrap(), h);
        let err =
            parse_header(Path::new("h"), &text.replace("version = 1", "version = 2")).unwrap_err();
        assert!(err.to_string().contains("not supported"));
        assert!(parse_header(Path::new("h"), &text.replace("seed = 7\n", "")).is_err());
    }
}
