//! Text serializers: occurrence and report CSVs, aligned tables, per-state CSV and DOT files.

use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::bits;
use crate::classify::{build_graph, Evidence, StructureLabel};
use crate::cli::format::fmt_g;
use crate::ensemble::{ChainAnalysis, OccurrenceRow, ReportCell, ReportRow};
use crate::error::{Error, Result};
use crate::spectra::binomial;

pub const OCCURRENCE_HEADER: [&str; 8] = [
    "n",
    "sigma_p_nm",
    "manifold",
    "class",
    "count_mean",
    "freq_spectrum",
    "freq_manifold",
    "realizations",
];

pub const REPORT_HEADER: [&str; 7] = [
    "n",
    "manifold",
    "class",
    "sigma_p_nm",
    "kind",
    "percent",
    "display",
];

pub const STATES_HEADER: [&str; 8] = [
    "index",
    "energy_mhz",
    "manifold",
    "class",
    "degenerate",
    "min_entropy",
    "min_entropy_subset",
    "evidence",
];

/// Writes `contents` to `path` through a temporary file in the same directory,
/// so a failed write never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// `# line` comments followed by a CSV body; always ends with a newline.
fn csv_document(preamble: &[String], header: &[&str], records: Vec<Vec<String>>) -> String {
    let mut out = String::new();
    for line in preamble {
        out.push_str(&format!("# {line}\n"));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in records {
        w.write_record(&r).expect("in-memory write");
    }
    let body = w.into_inner().expect("in-memory flush");
    out.push_str(std::str::from_utf8(&body).expect("utf-8 fields"));
    out
}

pub fn occurrence_csv(preamble: &[String], rows: &[OccurrenceRow]) -> String {
    let records = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_g(r.sigma_p_nm),
                r.manifold.to_string(),
                r.class.as_str().to_string(),
                fmt_g(r.count_mean),
                fmt_g(r.freq_spectrum),
                fmt_g(r.freq_manifold),
                r.realizations.to_string(),
            ]
        })
        .collect();
    csv_document(preamble, &OCCURRENCE_HEADER, records)
}

#[derive(Deserialize)]
struct RawOccurrence {
    n: usize,
    sigma_p_nm: f64,
    manifold: usize,
    class: String,
    count_mean: f64,
    freq_spectrum: f64,
    freq_manifold: f64,
    realizations: u64,
}

/// Parses an occurrence CSV; returns its `#` preamble (without the marker) and rows.
pub fn parse_occurrence_csv(text: &str, origin: &str) -> Result<(Vec<String>, Vec<OccurrenceRow>)> {
    let parse_err = |reason: String| Error::Parse {
        path: origin.to_string(),
        reason,
    };
    let preamble = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_string())
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| parse_err(e.to_string()))?;
    if header.iter().ne(OCCURRENCE_HEADER) {
        return Err(parse_err(format!(
            "expected header `{}`, found `{}`",
            OCCURRENCE_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<RawOccurrence>().enumerate() {
        let r = rec.map_err(|e| parse_err(format!("record {}: {e}", i + 1)))?;
        let class: StructureLabel = r
            .class
            .parse()
            .map_err(|_| parse_err(format!("record {}: unknown class `{}`", i + 1, r.class)))?;
        rows.push(OccurrenceRow {
            n: r.n,
            sigma_p_nm: r.sigma_p_nm,
            manifold: r.manifold,
            class,
            count_mean: r.count_mean,
            freq_spectrum: r.freq_spectrum,
            freq_manifold: r.freq_manifold,
            realizations: r.realizations,
        });
    }
    Ok((preamble, rows))
}

fn cell_kind(cell: &ReportCell) -> (&'static str, String) {
    match cell {
        ReportCell::Blank => ("blank", String::new()),
        ReportCell::Baseline(p) => ("baseline", fmt_g(*p)),
        ReportCell::Delta(d) => ("delta", fmt_g(*d)),
    }
}

/// Long-format baseline/delta CSV: one record per `(row, σ_p)`.
pub fn report_csv(preamble: &[String], rows: &[ReportRow]) -> String {
    let mut records = Vec::new();
    for r in rows {
        for (sigma, cell) in &r.cells {
            let (kind, percent) = cell_kind(cell);
            records.push(vec![
                r.n.to_string(),
                r.manifold.to_string(),
                r.class.as_str().to_string(),
                fmt_g(*sigma),
                kind.to_string(),
                percent,
                cell.render(),
            ]);
        }
    }
    csv_document(preamble, &REPORT_HEADER, records)
}

/// Left-aligned columns separated by two spaces, trailing blanks trimmed.
pub fn align(table: &[Vec<String>]) -> String {
    let cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            table
                .iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in table {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            line.push_str(cell);
            if c + 1 < row.len() {
                let pad = widths[c] - cell.chars().count() + 2;
                line.extend(std::iter::repeat_n(' ', pad));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Aligned baseline/delta table, one block per chain length.
pub fn report_text(preamble: &[String], rows: &[ReportRow]) -> String {
    let mut out = String::new();
    for line in preamble {
        out.push_str(&format!("# {line}\n"));
    }
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    for n in ns {
        let block: Vec<&ReportRow> = rows.iter().filter(|r| r.n == n).collect();
        let mut table = vec![{
            let mut h = vec!["manifold".to_string(), "class".to_string()];
            h.extend(
                block[0]
                    .cells
                    .iter()
                    .map(|(s, _)| format!("{} nm", fmt_g(*s))),
            );
            h
        }];
        for r in &block {
            let mut line = vec![r.manifold.to_string(), r.class.as_str().to_string()];
            line.extend(r.cells.iter().map(|(_, c)| c.render()));
            table.push(line);
        }
        out.push_str(&format!("\nN = {n}\n"));
        out.push_str(&align(&table));
    }
    if rows.is_empty() {
        out.push_str("no reportable entries\n");
    }
    out
}

/// Per-manifold class counts of one analyzed chain as an aligned table.
pub fn census_text(preamble: &[String], analysis: &ChainAnalysis) -> String {
    let n = analysis.spec.n_spins;
    let counts = analysis.counts();
    let mut header = vec!["manifold".to_string(), "states".to_string()];
    header.extend(StructureLabel::ALL.iter().map(|l| l.as_str().to_string()));
    header.push("degenerate".into());
    let mut table = vec![header];
    let mut totals = [0u64; StructureLabel::ALL.len()];
    let mut total_degenerate = 0;
    let mut total_states = 0;
    for (k, row) in counts.iter().enumerate().take(n + 1) {
        let classified: u64 = row.iter().sum();
        if classified == 0 {
            continue;
        }
        let degenerate = analysis
            .in_manifold(k)
            .filter(|s| s.class.degenerate)
            .count();
        let mut line = vec![k.to_string(), binomial(n, k).to_string()];
        line.extend(row.iter().map(|c| c.to_string()));
        line.push(degenerate.to_string());
        table.push(line);
        for (t, c) in totals.iter_mut().zip(row) {
            *t += c;
        }
        total_degenerate += degenerate;
        total_states += binomial(n, k);
    }
    let mut line = vec!["total".to_string(), total_states.to_string()];
    line.extend(totals.iter().map(|c| c.to_string()));
    line.push(total_degenerate.to_string());
    table.push(line);

    let mut out = String::new();
    for l in preamble {
        out.push_str(&format!("# {l}\n"));
    }
    out.push_str(&align(&table));
    out
}

/// Evidence in 1-based spin notation: `{1,4} {2,3}`, `{1,3,5}|{2}|{4}` or `1-2-3`.
pub fn render_evidence(evidence: &Evidence) -> String {
    let set = |v: &[usize]| {
        format!(
            "{{{}}}",
            v.iter()
                .map(|q| (q + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    };
    match evidence {
        Evidence::SeparatingSubsets(masks) => masks
            .iter()
            .map(|&m| bits::format_subset(m))
            .collect::<Vec<_>>()
            .join(" "),
        Evidence::Components(cs) => cs.iter().map(|c| set(c)).collect::<Vec<_>>().join("|"),
        Evidence::SpanningPath(p) => p
            .iter()
            .map(|q| (q + 1).to_string())
            .collect::<Vec<_>>()
            .join("-"),
        Evidence::None => String::new(),
    }
}

pub fn states_csv(preamble: &[String], analysis: &ChainAnalysis) -> String {
    let records = analysis
        .states
        .iter()
        .map(|s| {
            let (e, mask) = s.profile.min_entropy();
            vec![
                s.index.to_string(),
                fmt_g(s.energy_mhz),
                s.manifold.to_string(),
                s.class.label.as_str().to_string(),
                s.class.degenerate.to_string(),
                fmt_g(e),
                bits::format_subset(mask),
                render_evidence(&s.class.evidence),
            ]
        })
        .collect();
    csv_document(preamble, &STATES_HEADER, records)
}

pub fn dot_file_name(index: usize) -> String {
    format!("state_{index:04}.dot")
}

/// DOT graph of every analyzed state (or only `only`) into `dir`.
pub fn write_dot_files(
    dir: &Path,
    analysis: &ChainAnalysis,
    threshold: f64,
    only: Option<&[usize]>,
) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = 0;
    for s in &analysis.states {
        if only.is_some_and(|ix| !ix.contains(&s.index)) {
            continue;
        }
        let g = build_graph(&s.profile, threshold);
        let comment = format!(
            "state {} E = {} MHz manifold {} class {}{}",
            s.index,
            fmt_g(s.energy_mhz),
            s.manifold,
            s.class.label,
            if s.class.degenerate {
                " (degenerate)"
            } else {
                ""
            }
        );
        let dot = g.to_dot(&format!("state_{}", s.index), Some(&comment));
        write_atomic(&dir.join(dot_file_name(s.index)), &dot)?;
        written += 1;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(class: StructureLabel, count: f64) -> OccurrenceRow {
        OccurrenceRow {
            n: 4,
            sigma_p_nm: 0.1,
            manifold: 2,
            class,
            count_mean: count,
            freq_spectrum: count / 16.0,
            freq_manifold: count / 8.0,
            realizations: 3,
        }
    }

    #[test]
    fn empty_occurrence_csv_is_header_only() {
        assert_eq!(
            occurrence_csv(&[], &[]),
            "n,sigma_p_nm,manifold,class,count_mean,freq_spectrum,freq_manifold,realizations\n"
        );
    }

    #[test]
    fn occurrence_csv_round_trips() {
        let rows = vec![
            row(StructureLabel::WLike, 2.0),
            row(StructureLabel::Separable, 1.0 / 3.0),
        ];
        let pre = vec!["n = 4".to_string(), "seed = 1".to_string()];
        let text = occurrence_csv(&pre, &rows);
        assert!(text.starts_with("# n = 4\n# seed = 1\nn,sigma_p_nm"));
        assert!(text.contains("4,0.1,2,W-like,2,0.125,0.25,3\n"));
        let (p, back) = parse_occurrence_csv(&text, "mem").unwrap();
        assert_eq!(p, pre);
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], rows[0]);
        assert!((back[1].count_mean - 1.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn bad_header_is_rejected() {
        let err = parse_occurrence_csv("a,b\n1,2\n", "x.csv").unwrap_err();
        assert!(err.to_string().contains("x.csv"));
    }

    #[test]
    fn unknown_class_is_rejected() {
        let text = "n,sigma_p_nm,manifold,class,count_mean,freq_spectrum,freq_manifold,realizations\n4,0,1,Blob,1,1,1,1\n";
        assert!(parse_occurrence_csv(text, "x").is_err());
    }

    #[test]
    fn aligned_columns() {
        let t = align(&[
            vec!["a".into(), "bb".into(), "c".into()],
            vec!["ddd".into(), "".into(), "e".into()],
        ]);
        assert_eq!(t, "a    bb  c\nddd      e\n");
    }

    #[test]
    fn evidence_rendering() {
        assert_eq!(
            render_evidence(&Evidence::SeparatingSubsets(vec![0b1001, 0b1])),
            "{1,4} {1}"
        );
        assert_eq!(
            render_evidence(&Evidence::Components(vec![vec![0, 2], vec![1]])),
            "{1,3}|{2}"
        );
        assert_eq!(
            render_evidence(&Evidence::SpanningPath(vec![1, 0, 2])),
            "2-1-3"
        );
    }

    #[test]
    fn atomic_write_replaces_and_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, "one\n").unwrap();
        write_atomic(&p, "two\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let missing = dir.path().join("no/such/dir/out.txt");
        let err = write_atomic(&missing, "x").unwrap_err();
        assert!(err.to_string().contains("out.txt"));
        assert!(!missing.exists());
    }
}
