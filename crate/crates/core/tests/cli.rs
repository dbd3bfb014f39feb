use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nvchain::cli::dump::{DumpEvidence, SpectrumDump};
use nvchain::cli::output::{parse_occurrence_csv, OCCURRENCE_HEADER};
use nvchain::StructureLabel;

fn nvchain(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvchain"))
        .args(args)
        .current_dir(dir)
        .env_remove("NVCHAIN_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// `(j, k, C)` edges of a DOT file, 1-based.
fn dot_edges(text: &str) -> Vec<(usize, usize, f64)> {
    text.lines()
        .filter(|l| l.contains("--"))
        .map(|l| {
            let (pair, rest) = l.trim().split_once(" [").unwrap();
            let (a, b) = pair.split_once(" -- ").unwrap();
            let w = rest.split("weight=").nth(1).unwrap().trim_end_matches("];");
            (a.parse().unwrap(), b.parse().unwrap(), w.parse().unwrap())
        })
        .collect()
}

#[test]
fn n_below_two_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvchain(&["classify", "--n", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`n`"), "{}", stderr(&o));
}

#[test]
fn unparsable_and_unknown_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvchain(&["ensemble", "--sigma", "0,abc"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`sigma`"));

    fs::write(dir.path().join("run.cfg"), "n = 4\ncolour = blue\n").unwrap();
    let o = nvchain(&["classify", "--config", "run.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`colour`"));

    let o = nvchain(&["classify", "--nonsense"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# regular chain\nn = 4\nrabi_mhz = 20\n",
    )
    .unwrap();
    let o = nvchain(&["classify", "--config", "run.cfg"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("# n = 4\n") && out.contains("# rabi_mhz = 20\n"));
    assert!(out
        .lines()
        .any(|l| l.starts_with("total  ") && l.contains(" 16 ")));

    let o = nvchain(&["classify", "--config", "run.cfg", "--n", "5"], dir.path());
    let out = stdout(&o);
    assert!(out.contains("# n = 5\n") && out.contains("# rabi_mhz = 20\n"));
    assert!(out
        .lines()
        .any(|l| l.starts_with("total  ") && l.contains(" 32 ")));
}

#[test]
fn five_chain_dot_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvchain(
        &[
            "classify",
            "--n",
            "5",
            "--sigma",
            "0",
            "--dot-dir",
            "graphs",
            "--dump",
            "d.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let dump = SpectrumDump::from_json(
        &fs::read_to_string(dir.path().join("d.json")).unwrap(),
        "d.json",
    )
    .unwrap();
    assert_eq!(fs::read_dir(dir.path().join("graphs")).unwrap().count(), 32);
    let read_dot =
        |i: usize| fs::read_to_string(dir.path().join(format!("graphs/state_{i:04}.dot"))).unwrap();

    // every W-like state is the complete graph on 5 nodes
    let w: Vec<_> = dump
        .states
        .iter()
        .filter(|s| s.class == StructureLabel::WLike)
        .collect();
    assert!(!w.is_empty());
    for s in w {
        let dot = read_dot(s.index);
        assert!(dot.starts_with(&format!("graph state_{} {{\n", s.index)));
        assert!((1..=5).all(|q| dot.contains(&format!("  {q};\n"))));
        assert_eq!(dot_edges(&dot).len(), 10);
        assert!(dot.ends_with("}\n"));
    }

    // the 1-excitation state where spins 2 and 4 split off individually: near-W3 on {1,3,5},
    // only residual edges at {2,4}
    let splits = |e: &DumpEvidence| match e {
        DumpEvidence::SeparatingSubsets(v) => {
            v.contains(&"{1,3,4,5}".to_string()) && v.contains(&"{1,2,3,5}".to_string())
        }
        _ => false,
    };
    let s = dump
        .states
        .iter()
        .find(|s| s.manifold == 1 && s.class == StructureLabel::Separable && splits(&s.evidence))
        .expect("state separating spins 2 and 4");
    let edges = dot_edges(&read_dot(s.index));
    for (a, b) in [(1, 3), (1, 5), (3, 5)] {
        let c = edges
            .iter()
            .find(|e| (e.0, e.1) == (a, b))
            .expect("triangle edge")
            .2;
        assert!((c - 2.0 / 3.0).abs() < 0.05, "C_{a}{b} = {c}");
    }
    for e in edges
        .iter()
        .filter(|e| [2, 4].contains(&e.0) || [2, 4].contains(&e.1))
    {
        assert!(e.2 < 0.05, "{e:?}");
    }
}

#[test]
fn dump_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvchain(
        &[
            "spectrum", "--n", "6", "--sigma", "0.2", "--seed", "11", "--out", "d.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = nvchain(&["verify", "--dump", "d.json"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("PASS\n"));

    // a tampered class is caught
    let text = fs::read_to_string(dir.path().join("d.json")).unwrap();
    let mut dump = SpectrumDump::from_json(&text, "d.json").unwrap();
    let victim = dump
        .states
        .iter_mut()
        .find(|s| s.class != StructureLabel::Separable)
        .unwrap();
    victim.class = StructureLabel::OtherConnected;
    fs::write(dir.path().join("bad.json"), dump.to_json()).unwrap();
    let o = nvchain(&["verify", "--dump", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).ends_with("FAIL\n"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for tag in ["a", "b"] {
        let dump = format!("{tag}.json");
        let csv = format!("{tag}.csv");
        let states = format!("{tag}-states.csv");
        let o = nvchain(
            &[
                "classify",
                "--n",
                "6",
                "--dump",
                &dump,
                "--states-csv",
                &states,
            ],
            dir.path(),
        );
        assert!(o.status.success());
        fs::write(dir.path().join(format!("{tag}.txt")), o.stdout).unwrap();
        let o = nvchain(
            &[
                "ensemble",
                "--n",
                "4,5",
                "--sigma",
                "0,0.4",
                "--realizations",
                "6",
                "--seed",
                "3",
                "--out",
                &csv,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for ext in [".json", ".csv", "-states.csv", ".txt"] {
        let a = fs::read(dir.path().join(format!("a{ext}"))).unwrap();
        let b = fs::read(dir.path().join(format!("b{ext}"))).unwrap();
        assert_eq!(a, b, "{ext}");
        assert_eq!(a.last(), Some(&b'\n'), "{ext}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "ensemble",
        "--n",
        "5",
        "--sigma",
        "0.1,0.8",
        "--realizations",
        "8",
        "--seed",
        "99",
    ];
    let one = Command::new(env!("CARGO_BIN_EXE_nvchain"))
        .args(args)
        .env("NVCHAIN_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_nvchain"))
        .args(args)
        .env("NVCHAIN_THREADS", "4")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn ensemble_csv_and_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvchain(
        &[
            "ensemble",
            "--n",
            "6",
            "--sigma",
            "0,0.2",
            "--realizations",
            "5",
            "--seed",
            "1",
            "--out",
            "occ.csv",
            "--report",
            "rep.csv",
            "--report-text",
            "rep.txt",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let occ = fs::read_to_string(dir.path().join("occ.csv")).unwrap();
    let (preamble, rows) = parse_occurrence_csv(&occ, "occ.csv").unwrap();
    assert!(preamble.contains(&"seed = 1".to_string()));
    assert_eq!(rows.len(), 2 * 7 * 6);
    for sigma in [0.0, 0.2] {
        let total: f64 = rows
            .iter()
            .filter(|r| r.sigma_p_nm == sigma)
            .map(|r| r.freq_spectrum)
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    let o = nvchain(
        &[
            "report",
            "--input",
            "occ.csv",
            "--out",
            "again.csv",
            "--text",
            "again.txt",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let strip = |name: &str| -> String {
        fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect()
    };
    assert_eq!(strip("rep.csv"), strip("again.csv"));
    assert_eq!(strip("rep.txt"), strip("again.txt"));
    assert!(strip("rep.txt").contains("W-like"));
}

#[test]
fn empty_input_gives_header_only_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("empty.csv"),
        format!("{}\n", OCCURRENCE_HEADER.join(",")),
    )
    .unwrap();
    let o = nvchain(&["report", "--input", "empty.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let body: Vec<String> = stdout(&o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    assert_eq!(
        body,
        vec!["n,manifold,class,sigma_p_nm,kind,percent,display".to_string()]
    );
}

#[test]
fn failed_writes_name_the_path_and_leave_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvchain(
        &["spectrum", "--n", "3", "--out", "missing/d.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing/d.json"), "{}", stderr(&o));
    assert!(!dir.path().join("missing").exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn oracle_table_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvchain(&["verify-oracles"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().skip(1).all(|l| l.ends_with("PASS")), "{out}");
}
