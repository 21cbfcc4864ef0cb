use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use cdc_core::stats::DECILE_LEVELS;

use crate::config::Config;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `# key=value` lines written above every CSV table.
pub fn metadata(config: &Config, command: &str) -> Vec<(String, String)> {
    vec![
        ("generator".into(), format!("cdc-cli {VERSION}")),
        ("command".into(), command.into()),
        ("seed".into(), config.seed.to_string()),
        ("params_sha256".into(), config.hash()),
    ]
}

/// Shortest representation that parses back to the same `f64`; empty for
/// missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn decile_names(prefix: &str) -> Vec<String> {
    DECILE_LEVELS
        .iter()
        .map(|q| format!("{prefix}d{}", (q * 100.0).round() as u32))
        .collect()
}

pub fn write_csv(path: &Path, meta: &[(String, String)], header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for (k, v) in meta {
        writeln!(file, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Ratio deciles by age, with their log columns.
pub fn decile_table(ages: &[u32], deciles: &[[f64; 9]]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["age".to_string()];
    header.extend(decile_names(""));
    header.extend(decile_names("log_"));
    let rows = ages
        .iter()
        .zip(deciles)
        .map(|(a, d)| {
            let mut r = vec![a.to_string()];
            r.extend(d.iter().map(|x| num(*x)));
            r.extend(d.iter().map(|x| num(x.ln())));
            r
        })
        .collect();
    (header, rows)
}

/// A decile CSV read back: metadata, ages and the nine ratio deciles.
#[derive(Debug, Clone, PartialEq)]
pub struct DecileFile {
    pub meta: BTreeMap<String, String>,
    pub ages: Vec<u32>,
    pub deciles: Vec<[f64; 9]>,
}

pub fn read_deciles(path: &Path) -> Result<DecileFile> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut meta = BTreeMap::new();
    let mut body = String::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if let Some(kv) = line.strip_prefix('#') {
            if let Some((k, v)) = kv.trim().split_once('=') {
                meta.insert(k.to_string(), v.to_string());
            }
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{}: missing column `{name}`", path.display()))
    };
    let age_col = col("age")?;
    let cols = decile_names("").iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;
    let mut ages = Vec::new();
    let mut deciles = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| -> Result<f64> {
            rec.get(c)
                .unwrap_or("")
                .parse()
                .with_context(|| format!("{}: data row {}: column {} is not a number", path.display(), i + 1, c + 1))
        };
        ages.push(
            rec.get(age_col)
                .unwrap_or("")
                .parse()
                .with_context(|| format!("{}: data row {}: bad age", path.display(), i + 1))?,
        );
        let mut d = [0.0; 9];
        for (k, c) in cols.iter().enumerate() {
            d[k] = field(*c)?;
        }
        deciles.push(d);
    }
    if ages.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(DecileFile { meta, ages, deciles })
}

/// For each decile, the first age from which `upper` stays at or above
/// `lower` through the last age; `None` if it ends below.
pub fn crossing_ages(ages: &[u32], lower: &[[f64; 9]], upper: &[[f64; 9]]) -> [Option<u32>; 9] {
    let mut out = [None; 9];
    for (d, slot) in out.iter_mut().enumerate() {
        for k in (0..ages.len()).rev() {
            if upper[k][d] >= lower[k][d] {
                *slot = Some(ages[k]);
            } else {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1 + 0.2, 1.0 / 3.0, 1e-300, -2.5e17] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "");
    }

    #[test]
    fn crossing_examples() {
        let ages = [65, 66, 67, 68];
        let si = vec![[1.0; 9]; 4];
        assert_eq!(crossing_ages(&ages, &si, &si), [Some(65); 9]);
        let mut cd = vec![[0.5; 9], [1.2; 9], [0.9; 9], [1.1; 9]];
        assert_eq!(crossing_ages(&ages, &si, &cd)[0], Some(68));
        cd[3] = [0.1; 9];
        assert_eq!(crossing_ages(&ages, &si, &cd)[0], None);
    }

    #[test]
    fn decile_file_round_trip() {
        let dir = std::env::temp_dir().join(format!("cdc-out-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.csv");
        let ages = [65, 66];
        let d = [[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9], [1.0 / 3.0; 9]];
        let (h, rows) = decile_table(&ages, &d);
        let meta = vec![("seed".to_string(), "4".to_string())];
        write_csv(&path, &meta, &h, &rows).unwrap();
        let back = read_deciles(&path).unwrap();
        assert_eq!(back.ages, ages);
        assert_eq!(back.deciles, d);
        assert_eq!(back.meta["seed"], "4");
        std::fs::remove_dir_all(dir).unwrap();
    }
}
