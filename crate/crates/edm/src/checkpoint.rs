//! Policy checkpoints: an architecture header followed by one line per
//! parameter tensor (`name dims values…`), values at 17 significant digits.

use std::path::Path;

use edm_core::autodiff::{Activation, Architecture, ParamStore, Tensor};
use edm_core::policy::PolicyNet;

use crate::error::{parse_error, read, write, Result};
use crate::text::{fmt_f64, fmt_list, key_values, parse_f64, parse_list, parse_value};

pub const CHECKPOINT_VERSION: u32 = 1;
const SEPARATOR: &str = "---";

pub fn checkpoint_to_string(net: &PolicyNet) -> String {
    let arch = net.architecture();
    let mut out = String::new();
    out.push_str("# edm policy checkpoint\n");
    out.push_str(&format!("version = {CHECKPOINT_VERSION}\n"));
    out.push_str(&format!("input_dim = {}\n", arch.input_dim));
    out.push_str(&format!("hidden = {}\n", fmt_list(&arch.hidden)));
    out.push_str(&format!("output_dim = {}\n", arch.output_dim));
    out.push_str(&format!("activation = {}\n", arch.activation));
    out.push_str(SEPARATOR);
    out.push('\n');
    for p in net.params().params() {
        let v = p.value();
        out.push_str(p.name());
        out.push(' ');
        out.push_str(&fmt_list(v.shape()));
        for x in v.data() {
            out.push(' ');
            out.push_str(&fmt_f64(*x));
        }
        out.push('\n');
    }
    out
}

pub fn save_checkpoint(net: &PolicyNet, path: &Path) -> Result<()> {
    write(path, &checkpoint_to_string(net))
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyNet> {
    parse_checkpoint(path, &read(path)?)
}

pub fn parse_checkpoint(path: &Path, text: &str) -> Result<PolicyNet> {
    let split = text
        .lines()
        .position(|l| l.trim() == SEPARATOR)
        .ok_or_else(|| parse_error(path, text.lines().count(), "missing `---` after the header"))?;
    let header: String = text.lines().take(split).map(|l| format!("{l}\n")).collect();

    let (mut version, mut input, mut hidden, mut output, mut activation) =
        (None, None, None, None, None);
    for kv in key_values(path, &header) {
        let (line, key, value) = kv?;
        match key {
            "version" => version = Some(parse_value::<u32>(path, line, key, value)?),
            "input_dim" => input = Some(parse_value::<usize>(path, line, key, value)?),
            "output_dim" => output = Some(parse_value::<usize>(path, line, key, value)?),
            "hidden" => {
                hidden = Some(
                    parse_list::<usize>(value)
                        .ok_or_else(|| parse_error(path, line, "invalid hidden widths"))?,
                )
            }
            "activation" => activation = Some(parse_value::<Activation>(path, line, key, value)?),
            other => {
                return Err(parse_error(
                    path,
                    line,
                    format!("unknown header key `{other}`"),
                ))
            }
        }
    }
    let missing = |what: &str| parse_error(path, split + 1, format!("header lacks `{what}`"));
    match version.ok_or_else(|| missing("version"))? {
        CHECKPOINT_VERSION => {}
        v => {
            return Err(parse_error(
                path,
                1,
                format!("checkpoint version {v} is not supported"),
            ))
        }
    }
    let arch = Architecture::new(
        input.ok_or_else(|| missing("input_dim"))?,
        hidden.ok_or_else(|| missing("hidden"))?,
        output.ok_or_else(|| missing("output_dim"))?,
        activation.ok_or_else(|| missing("activation"))?,
    );

    let mut store = ParamStore::new();
    for (i, line) in text.lines().enumerate().skip(split + 1) {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let name = fields.next().unwrap_or_default();
        let shape: Vec<usize> = fields
            .next()
            .and_then(parse_list)
            .ok_or_else(|| parse_error(path, lineno, "invalid tensor shape"))?;
        let data = fields
            .map(parse_f64)
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| parse_error(path, lineno, "invalid tensor value"))?;
        let tensor =
            Tensor::new(shape, data).map_err(|e| parse_error(path, lineno, e.to_string()))?;
        store
            .insert(name, tensor)
            .map_err(|e| parse_error(path, lineno, e.to_string()))?;
    }
    Ok(PolicyNet::from_params(arch, store)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use edm_core::rng::stream;

    #[test]
    fn round_trip_is_bit_exact() {
        let arch = Architecture::new(5, vec![7, 3], 4, Activation::Tanh);
        let net = PolicyNet::new(arch, &mut stream(4, "net", 0));
        let text = checkpoint_to_string(&net);
        let back = parse_checkpoint(Path::new("mem"), &text).unwrap();
        assert_eq!(back.architecture(), net.architecture());
        let bits = |n: &PolicyNet| {
            n.params()
                .flatten()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&back), bits(&net));
        assert_eq!(checkpoint_to_string(&back), text);
    }

    #[test]
    fn damaged_files_are_rejected() {
        let arch = Architecture::new(2, vec![], 2, Activation::Elu);
        let net = PolicyNet::new(arch, &mut stream(0, "net", 0));
        let text = checkpoint_to_string(&net);
        let p = Path::new("mem");
        assert!(parse_checkpoint(p, &text.replace("version = 1", "version = 9")).is_err());
        assert!(parse_checkpoint(p, &text.replace("---", "")).is_err());
        let truncated: String = text
            .lines()
            .take(text.lines().count() - 1)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(parse_checkpoint(p, &truncated).is_err());
        assert!(parse_checkpoint(p, &text.replace("input_dim = 2", "input_dim = 3")).is_err());
    }
}
