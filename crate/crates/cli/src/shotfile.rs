//! The plain-text shot file format.
//!
//! One record per line, `key,bitstring`, where the bitstring holds exactly
//! `2n` characters from `{0,1}` in `D_1..D_2n` order (register `a` first,
//! little-endian within each register). Lines starting with `#` are
//! comments; an optional `key,bits` header is accepted and written.
//!
//! Loading validates against a caller-provided experiment spec, or infers
//! one from the file (keys in order of first appearance, width from the
//! first record).

use std::fs;
use std::path::Path;

use mobridge_core::{Dataset, ExperimentSpec, Shot};

use crate::error::{CliError, Result};

/// Parse shot-file text. `spec` of `None` infers the experiment layout.
pub fn parse_shot_file(text: &str, spec: Option<&ExperimentSpec>) -> Result<Dataset> {
    let mut shots: Vec<Shot> = Vec::new();
    let mut bit_count: Option<usize> = spec.map(ExperimentSpec::bit_count);
    let mut inferred_keys: Vec<u32> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "key,bits" {
            continue;
        }
        let (key_part, bits_part) = line.split_once(',').ok_or_else(|| {
            CliError::input(format!("line {line_no}: expected `key,bitstring`"))
        })?;
        let key: u32 = key_part.trim().parse().map_err(|_| {
            CliError::input(format!("line {line_no}: invalid key label `{key_part}`"))
        })?;

        let expected_bits = match bit_count {
            Some(b) => b,
            None => {
                if bits_part.len() % 2 != 0 || bits_part.is_empty() || bits_part.len() > 16 {
                    return Err(CliError::input(format!(
                        "line {line_no}: bitstring must have an even length in 2..=16, got {}",
                        bits_part.len()
                    )));
                }
                bit_count = Some(bits_part.len());
                bits_part.len()
            }
        };
        if bits_part.len() != expected_bits {
            return Err(CliError::input(format!(
                "line {line_no}: bitstring has {} bits, expected {expected_bits}",
                bits_part.len()
            )));
        }
        let mut bits = Vec::with_capacity(expected_bits);
        for c in bits_part.chars() {
            match c {
                '0' => bits.push(0u8),
                '1' => bits.push(1u8),
                _ => {
                    return Err(CliError::input(format!(
                        "line {line_no}: invalid character `{c}` in bitstring"
                    )))
                }
            }
        }
        match spec {
            Some(s) => {
                if s.key_index(key).is_none() {
                    return Err(CliError::input(format!("line {line_no}: key {key} not in spec")));
                }
            }
            None => {
                let modulus = 1u64 << (expected_bits / 2);
                if u64::from(key) >= modulus {
                    return Err(CliError::input(format!(
                        "line {line_no}: key {key} out of range for n={}",
                        expected_bits / 2
                    )));
                }
                if !inferred_keys.contains(&key) {
                    inferred_keys.push(key);
                }
            }
        }
        let shot = Shot::from_bits(key, &bits, expected_bits)
            .map_err(|e| CliError::input(format!("line {line_no}: {e}")))?;
        shots.push(shot);
    }

    if shots.is_empty() {
        return Err(CliError::input("no shots"));
    }

    let spec = match spec {
        Some(s) => s.clone(),
        None => {
            let bit_count = bit_count.expect("set by first record");
            let mut counts = vec![0usize; inferred_keys.len()];
            for shot in &shots {
                let ki = inferred_keys.iter().position(|&k| k == shot.key).unwrap();
                counts[ki] += 1;
            }
            // shots_per_key echoes the largest group; analysis paths use
            // actual group sizes
            let shots_per_key = counts.iter().copied().max().unwrap_or(1);
            ExperimentSpec::new(bit_count / 2, inferred_keys, shots_per_key)?
        }
    };
    Ok(Dataset::from_shots(spec, &shots)?)
}

pub fn load_dataset(path: &Path, spec: Option<&ExperimentSpec>) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse_shot_file(&text, spec)
}

/// Render a dataset in shot-file format (header plus grouped records).
pub fn dataset_to_string(ds: &Dataset) -> String {
    let bit_count = ds.spec().bit_count();
    let mut out = String::with_capacity(16 + ds.total_shots() * (bit_count + 4));
    out.push_str("key,bits\n");
    for shot in ds.shots() {
        out.push_str(&shot.key.to_string());
        out.push(',');
        for i in 0..bit_count {
            out.push(if shot.pattern >> i & 1 == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, dataset_to_string(ds))
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(())
}
