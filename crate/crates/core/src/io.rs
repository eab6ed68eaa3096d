//! Instance and matching files.
//!
//! Instances are JSON objects:
//!
//! ```text
//! {"reviewers": N, "papers": M, "affinities": [[...N rows of M reals...]],
//!  "load_ub": [N ints], "load_lb": [N ints] | null, "coverage": [M ints]}
//! ```
//!
//! `"affinities"` may be replaced by `"affinities_tsv": "path"`, a tab-separated
//! matrix resolved relative to the JSON file. Its first line is a header; when
//! the header has `M + 1` fields, every line starts with a label column that is
//! ignored. Matchings are CSV with header `paper,reviewer`, one row per
//! assignment, sorted. All writes go to a temporary file that is renamed into
//! place, so a failed write never leaves a partial file.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MatchingStats;
use crate::model::{Instance, Matching};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    reviewers: usize,
    papers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    affinities: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    affinities_tsv: Option<String>,
    load_ub: Vec<u32>,
    #[serde(default)]
    load_lb: Option<Vec<u32>>,
    coverage: Vec<u32>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Parses a tab-separated affinity matrix with a header line.
pub fn parse_affinity_tsv(text: &str, reviewers: usize, papers: usize) -> Result<Vec<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format("affinity TSV is empty".into()))?;
    let header_fields = header.split('\t').count();
    let labelled = if header_fields == papers + 1 {
        true
    } else if header_fields == papers {
        false
    } else {
        return Err(Error::Format(format!(
            "line 1: header has {header_fields} fields, expected {papers} or {}",
            papers + 1
        )));
    };
    let mut out = Vec::with_capacity(reviewers * papers);
    let mut rows = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let expected = papers + usize::from(labelled);
        if fields.len() != expected {
            return Err(Error::Format(format!(
                "line {lineno}: {} fields, expected {expected}",
                fields.len()
            )));
        }
        for (k, f) in fields.iter().enumerate().skip(usize::from(labelled)) {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "line {lineno}, field {}: {f:?} is not a number",
                    k + 1
                ))
            })?;
            out.push(v);
        }
        rows += 1;
    }
    if rows != reviewers {
        return Err(Error::Format(format!(
            "affinity TSV has {rows} data rows, expected {reviewers}"
        )));
    }
    Ok(out)
}

/// Parses an instance from JSON text; `base` resolves `affinities_tsv`.
pub fn parse_instance(text: &str, base: Option<&Path>) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text)?;
    let affinities = match (file.affinities, file.affinities_tsv) {
        (Some(rows), None) => {
            if rows.len() != file.reviewers {
                return Err(Error::Format(format!(
                    "\"affinities\" has {} rows, \"reviewers\" is {}",
                    rows.len(),
                    file.reviewers
                )));
            }
            let mut flat = Vec::with_capacity(file.reviewers * file.papers);
            for (i, row) in rows.into_iter().enumerate() {
                if row.len() != file.papers {
                    return Err(Error::Format(format!(
                        "\"affinities\" row {i} has {} entries, \"papers\" is {}",
                        row.len(),
                        file.papers
                    )));
                }
                flat.extend(row);
            }
            flat
        }
        (None, Some(tsv)) => {
            let path = match base {
                Some(b) => b.join(&tsv),
                None => tsv.into(),
            };
            let text = fs::read_to_string(&path).map_err(|e| {
                Error::Format(format!(
                    "cannot read \"affinities_tsv\" {}: {e}",
                    path.display()
                ))
            })?;
            parse_affinity_tsv(&text, file.reviewers, file.papers)?
        }
        (Some(_), Some(_)) => {
            return Err(Error::Format(
                "give only one of \"affinities\" and \"affinities_tsv\"".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Format(
                "missing field \"affinities\" (or \"affinities_tsv\")".into(),
            ))
        }
    };
    Instance::new(
        file.reviewers,
        file.papers,
        affinities,
        file.load_ub,
        file.load_lb,
        file.coverage,
    )
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)?;
    parse_instance(&text, path.parent())
}

/// JSON text of the instance with inline affinities.
pub fn instance_to_json(instance: &Instance) -> Result<String> {
    let file = InstanceFile {
        reviewers: instance.num_reviewers(),
        papers: instance.num_papers(),
        affinities: Some(
            (0..instance.num_reviewers())
                .map(|i| instance.affinity_row(i).to_vec())
                .collect(),
        ),
        affinities_tsv: None,
        load_ub: instance.load_ub().to_vec(),
        load_lb: instance.load_lb().map(<[u32]>::to_vec),
        coverage: instance.coverage().to_vec(),
    };
    let mut s = serde_json::to_string(&file)?;
    s.push('\n');
    Ok(s)
}

pub fn write_instance(instance: &Instance, path: &Path) -> Result<()> {
    write_atomic(path, instance_to_json(instance)?.as_bytes())
}

pub fn matching_to_csv(matching: &Matching) -> String {
    let mut out = String::from("paper,reviewer\n");
    for (r, p) in matching.assignments() {
        out.push_str(&format!("{p},{r}\n"));
    }
    out
}

/// Parses a matching CSV for an instance of the given shape.
pub fn parse_matching(text: &str, num_reviewers: usize, num_papers: usize) -> Result<Matching> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "paper,reviewer" => {}
        Some((_, h)) => {
            return Err(Error::Format(format!(
                "line 1: expected header \"paper,reviewer\", found {h:?}"
            )))
        }
        None => return Err(Error::Format("matching file is empty".into())),
    }
    let mut pairs = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Format(format!(
                "line {lineno}: expected 2 fields, found {}",
                fields.len()
            )));
        }
        let parse = |k: usize| -> Result<usize> {
            fields[k].parse().map_err(|_| {
                Error::Format(format!(
                    "line {lineno}, field {}: {:?} is not an index",
                    k + 1,
                    fields[k]
                ))
            })
        };
        let (p, r) = (parse(0)?, parse(1)?);
        pairs.push((r, p));
    }
    Matching::from_assignments(num_reviewers, num_papers, &pairs)
}

pub fn read_matching(path: &Path, num_reviewers: usize, num_papers: usize) -> Result<Matching> {
    parse_matching(&fs::read_to_string(path)?, num_reviewers, num_papers)
}

pub fn write_matching(matching: &Matching, path: &Path) -> Result<()> {
    write_atomic(path, matching_to_csv(matching).as_bytes())
}

/// Pretty JSON for any serializable report, with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Header of the benchmark table.
pub const BENCH_HEADER: &str =
    "Data,Bounds,Alg,Time (s),Obj,Min PS,Max PS,Mean PS,Std PS,Min RA,Max RA,Std RA";

/// One benchmark table row.
pub fn bench_row(data: &str, bounds: &str, alg: &str, stats: &MatchingStats) -> String {
    format!(
        "{data},{bounds},{alg},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{},{},{:.2}",
        stats.wall_time,
        stats.objective,
        stats.min_ps,
        stats.max_ps,
        stats.mean_ps,
        stats.std_ps,
        stats.min_ra,
        stats.max_ra,
        stats.std_ra
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{two_tier, two_tier_fair};

    #[test]
    fn instance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two_tier.json");
        let inst = two_tier();
        write_instance(&inst, &path).unwrap();
        assert_eq!(read_instance(&path).unwrap(), inst);
        let plain = inst.without_lower_bounds();
        write_instance(&plain, &path).unwrap();
        assert_eq!(read_instance(&path).unwrap(), plain);
    }

    #[test]
    fn missing_coverage_is_named() {
        let text =
            r#"{"reviewers":1,"papers":1,"affinities":[[0.5]],"load_ub":[1],"load_lb":null}"#;
        let err = parse_instance(text, None).unwrap_err().to_string();
        assert!(err.contains("coverage"), "{err}");
    }

    #[test]
    fn tsv_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("a.tsv"),
            "reviewer\tp0\tp1\nr0\t0.5\t-0.25\nr1\t1\t0\n",
        )
        .unwrap();
        let json = r#"{"reviewers":2,"papers":2,"affinities_tsv":"a.tsv","load_ub":[2,2],"load_lb":null,"coverage":[1,1]}"#;
        std::fs::write(dir.path().join("i.json"), json).unwrap();
        let inst = read_instance(&dir.path().join("i.json")).unwrap();
        let expected = Instance::from_rows(
            &[vec![0.5, -0.25], vec![1.0, 0.0]],
            vec![2, 2],
            None,
            vec![1, 1],
        )
        .unwrap();
        assert_eq!(inst, expected);
    }

    #[test]
    fn tsv_diagnostics() {
        let err = parse_affinity_tsv("a\tb\n0.1\tx\n", 1, 2)
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2, field 2"), "{err}");
        let err = parse_affinity_tsv("a\tb\tc\td\n", 1, 2)
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn matching_round_trip() {
        let m = two_tier_fair();
        let csv = matching_to_csv(&m);
        assert!(csv.starts_with("paper,reviewer\n0,0\n0,2\n"));
        assert_eq!(csv.lines().count(), 9);
        assert_eq!(parse_matching(&csv, 4, 4).unwrap(), m);
        assert!(parse_matching("paper,reviewer\n0,9\n", 4, 4).is_err());
        assert!(parse_matching("p,r\n", 4, 4).is_err());
    }

    #[test]
    fn bench_row_layout() {
        let stats = crate::metrics::compute_stats(&two_tier(), &two_tier_fair(), 1.234).unwrap();
        let row = bench_row("two_tier", "Up", "TPMS", &stats);
        assert_eq!(
            row,
            "two_tier,Up,TPMS,1.23,4.00,1.00,1.00,1.00,0.00,2,2,0.00"
        );
        assert_eq!(BENCH_HEADER.split(',').count(), row.split(',').count());
    }
}
