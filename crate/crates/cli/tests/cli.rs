//! Integration checks of the command line surface: the exit-code contract,
//! the circle-squaring demo's verifiable outcomes (6/7), and byte-identical
//! reruns of every subcommand (7/7).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use equideco::{make_ambient, Ambient, GridKind, PointSet, SiteFunction};
use equideco_cli::io;
use num_rational::Ratio;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_equideco");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad stdout JSON: {e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn shift(amb: &Ambient, s: &PointSet, steps: &[i64]) -> PointSet {
    PointSet::from_indices(
        amb,
        s.iter().map(|x| {
            let mut q = x;
            for (axis, &count) in steps.iter().enumerate() {
                for _ in 0..count {
                    q = amb.step(q, axis, 1).unwrap();
                }
            }
            q
        }),
    )
}

/// Fixture corpus on an 8x8 torus plus a 64-site line, written as files.
struct Fixtures {
    amb8: PathBuf,
    line64: PathBuf,
    a: PathBuf,
    b: PathBuf,
    f: PathBuf,
    far_a: PathBuf,
    far_b: PathBuf,
    small: PathBuf,
}

fn write_fixtures(dir: &Path) -> Fixtures {
    let amb = make_ambient(GridKind::Torus, vec![8, 8], vec![]).unwrap();
    let line = make_ambient(GridKind::Torus, vec![64], vec![]).unwrap();
    let a = PointSet::from_indices(&amb, (0..amb.len()).filter(|i| i % 3 == 0));
    let b = shift(&amb, &a, &[1, 1]);
    let f = SiteFunction::indicator_difference(&a, &b).unwrap();
    let far_a = PointSet::from_indices(&amb, [0, 1, 8, 9]);
    let far_b = shift(&amb, &far_a, &[4, 4]);
    let small = PointSet::from_indices(&amb, a.iter().take(a.len() - 2));

    let path = |name: &str| dir.join(name);
    let save = |name: &str, value: &Value| io::write_json(&path(name), value).unwrap();
    save("amb8.json", &io::encode_ambient(&amb));
    save("line64.json", &io::encode_ambient(&line));
    save("a.json", &io::encode_set(&a));
    save("b.json", &io::encode_set(&b));
    save("f.json", &io::encode_function(&f));
    save("far_a.json", &io::encode_set(&far_a));
    save("far_b.json", &io::encode_set(&far_b));
    save("small.json", &io::encode_set(&small));
    Fixtures {
        amb8: path("amb8.json"),
        line64: path("line64.json"),
        a: path("a.json"),
        b: path("b.json"),
        f: path("f.json"),
        far_a: path("far_a.json"),
        far_b: path("far_b.json"),
        small: path("small.json"),
    }
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixtures(dir.path());

    let ok = run(&["check-hall", "--function", arg(&fx.f), "--k", "2"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(stdout_json(&ok)["satisfied"], Value::Bool(true));

    let violated = run(&[
        "check-hall",
        "--input",
        arg(&fx.far_a),
        "--input2",
        arg(&fx.far_b),
        "--k",
        "1",
    ]);
    assert_eq!(code(&violated), 1);
    let doc = stdout_json(&violated);
    assert_eq!(doc["satisfied"], Value::Bool(false));
    assert!(doc["witness"].is_object());

    let missing = run(&["check-hall", "--function", "/nonexistent.json", "--k", "1"]);
    assert_eq!(code(&missing), 2);

    let unknown = run(&["no-such-command"]);
    assert_eq!(code(&unknown), 2);

    let bad_format = run(&["--format", "yaml", "check-hall", "--function", arg(&fx.f), "--k", "1"]);
    assert_eq!(code(&bad_format), 2);

    let conflicting = run(&[
        "check-hall",
        "--function",
        arg(&fx.f),
        "--input",
        arg(&fx.a),
        "--input2",
        arg(&fx.b),
        "--k",
        "1",
    ]);
    assert_eq!(code(&conflicting), 2);

    let flat = dir.path().join("fig.svg");
    let render_line = run(&["render", "--set", arg(&fx.f), "--output", arg(&flat)]);
    assert_eq!(code(&render_line), 2);

    let mismatch = run(&[
        "decompose",
        "--a",
        arg(&fx.a),
        "--b",
        arg(&fx.small),
        "--k",
        "2",
    ]);
    assert_eq!(code(&mismatch), 1);
    assert_eq!(stdout_json(&mismatch)["decomposed"], Value::Bool(false));

    let refused = run(&[
        "decompose",
        "--a",
        arg(&fx.far_a),
        "--b",
        arg(&fx.far_b),
        "--k",
        "1",
    ]);
    assert_eq!(code(&refused), 1);
    let doc = stdout_json(&refused);
    assert_eq!(doc["decomposed"], Value::Bool(false));
    assert_eq!(doc["hall"]["satisfied"], Value::Bool(false));
}

fn assert_bounded_discrepancy(block: &Value, n_max: i64) {
    let rows = block["rows"].as_array().unwrap();
    let limit = Ratio::from_integer(2);
    let mut seen = 0;
    for row in rows {
        let n = row["n"].as_i64().unwrap();
        if !(2..=n_max).contains(&n) {
            continue;
        }
        let worst = io::parse_ratio(row["worst"].as_str().unwrap()).unwrap();
        assert!(
            worst * Ratio::from_integer(n) <= limit,
            "worst({n}) * {n} = {} exceeds {limit}",
            worst * Ratio::from_integer(n)
        );
        seen += 1;
    }
    assert_eq!(seen, (n_max - 1) as usize);
}

#[test]
fn circle_squaring_demo_has_verifiable_outcomes() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let result = run(&["--out", arg(&out), "demo", "circle-square"]);
    let c = code(&result);
    assert!(
        c == 0 || c == 1,
        "demo must end in a decomposition or a witness, got {c}: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let doc = stdout_json(&result);
    assert_eq!(doc["schema"], Value::String(io::SCHEMA.into()));
    assert_bounded_discrepancy(&doc["disk_discrepancy"], 16);
    assert_bounded_discrepancy(&doc["square_discrepancy"], 16);

    let outcome = if c == 0 {
        assert_eq!(doc["decomposed"], Value::Bool(true));
        let pieces = out.join("pieces.json");
        assert!(pieces.exists());
        let verdict = run(&[
            "verify",
            "--pieces",
            arg(&pieces),
            "--a",
            arg(&out.join("a.json")),
            "--b",
            arg(&out.join("b.json")),
        ]);
        assert_eq!(code(&verdict), 0, "{}", String::from_utf8_lossy(&verdict.stderr));
        assert_eq!(stdout_json(&verdict)["valid"], Value::Bool(true));
        format!("decomposed into {} pieces, re-verified", doc["report"]["piece_count"])
    } else {
        assert_eq!(doc["decomposed"], Value::Bool(false));
        assert!(!doc["obstruction"].as_str().unwrap().is_empty());
        assert_eq!(doc["hall"]["satisfied"], Value::Bool(false));
        assert!(out.join("witness.json").exists());
        "obstructed with an emitted witness".to_string()
    };

    let tight = dir.path().join("tight");
    let obstructed = run(&["--out", arg(&tight), "demo", "circle-square", "--k", "3"]);
    assert_eq!(code(&obstructed), 1);
    let doc = stdout_json(&obstructed);
    assert_eq!(doc["decomposed"], Value::Bool(false));
    assert!(!doc["obstruction"].as_str().unwrap().is_empty());
    assert_eq!(doc["hall"]["satisfied"], Value::Bool(false));
    assert!(tight.join("witness.json").exists());

    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 120.0, "demo took {secs:.1}s");
    println!(
        "acceptance 6/7 circle-squaring demo: PASS (worst(n)*n <= 2 for n in 2..=16 \
         on both shapes, default run {outcome}, k=3 run obstructed with witness, {secs:.1}s)"
    );
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    if !dir.exists() {
        return Vec::new();
    }
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|entry| {
            let entry = entry.unwrap();
            assert!(entry.file_type().unwrap().is_file());
            (
                entry.file_name().into_string().unwrap(),
                fs::read(entry.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn subcommands_are_byte_identical_across_same_seed_runs() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixtures(dir.path());

    // artifacts some corpus entries consume: a flow, a family, pieces
    let seeded = dir.path().join("seeded");
    let flow_run = run(&[
        "--out",
        arg(&seeded),
        "real-flow",
        "--function",
        arg(&fx.f),
        "--k",
        "2",
    ]);
    assert_eq!(code(&flow_run), 0, "{}", String::from_utf8_lossy(&flow_run.stderr));
    let family_run = run(&[
        "--out",
        arg(&seeded),
        "tilings",
        "--ambient",
        arg(&fx.amb8),
        "--nested",
        "--n0",
        "3",
        "--stages",
        "1",
        "--schedule",
        "linear",
    ]);
    assert_eq!(code(&family_run), 0, "{}", String::from_utf8_lossy(&family_run.stderr));
    let pieces_run = run(&[
        "--out",
        arg(&seeded),
        "decompose",
        "--a",
        arg(&fx.a),
        "--b",
        arg(&fx.b),
        "--k",
        "2",
    ]);
    assert_eq!(code(&pieces_run), 0, "{}", String::from_utf8_lossy(&pieces_run.stderr));
    let flow = seeded.join("flow.json");
    let family = seeded.join("family.json");
    let pieces = seeded.join("pieces.json");

    let corpus: Vec<Vec<String>> = vec![
        vec!["check-hall", "--function", arg(&fx.f), "--k", "2"],
        vec![
            "check-hall",
            "--input",
            arg(&fx.a),
            "--input2",
            arg(&fx.b),
            "--k",
            "3",
        ],
        vec!["discrepancy", "--input", arg(&fx.a), "--n-max", "6"],
        vec!["tilings", "--ambient", arg(&fx.amb8), "--n", "3"],
        vec![
            "tilings",
            "--ambient",
            arg(&fx.line64),
            "--nested",
            "--n0",
            "2",
            "--stages",
            "2",
            "--schedule",
            "square",
        ],
        vec![
            "real-flow",
            "--function",
            arg(&fx.f),
            "--k",
            "2",
            "--delta",
            "1/16",
        ],
        vec!["real-flow", "--function", arg(&fx.f), "--k", "2"],
        vec!["round-flow", "--flow", arg(&flow), "--function", arg(&fx.f)],
        vec![
            "round-flow",
            "--flow",
            arg(&flow),
            "--function",
            arg(&fx.f),
            "--family",
            arg(&family),
        ],
        vec!["decompose", "--a", arg(&fx.a), "--b", arg(&fx.b), "--k", "2"],
        vec![
            "verify",
            "--pieces",
            arg(&pieces),
            "--a",
            arg(&fx.a),
            "--b",
            arg(&fx.b),
        ],
        vec!["oracle", "hall", "--function", arg(&fx.f), "--k", "2"],
        vec![
            "oracle",
            "equidecomposable",
            "--a",
            arg(&fx.a),
            "--b",
            arg(&fx.b),
            "--budget",
            "9",
        ],
        vec!["oracle", "flow-feasible", "--function", arg(&fx.f), "--cap", "4"],
        vec![
            "demo",
            "circle-square",
            "--side",
            "24",
            "--k",
            "8",
            "--n-max",
            "8",
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();

    for (i, case) in corpus.iter().enumerate() {
        let out = dir.path().join(format!("case{i}"));
        let mut args: Vec<String> = vec![
            "--seed".into(),
            "42".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ];
        args.extend(case.iter().cloned());
        let strs: Vec<&str> = args.iter().map(String::as_str).collect();

        let first = run(&strs);
        let first_files = dir_snapshot(&out);
        let second = run(&strs);
        let second_files = dir_snapshot(&out);

        assert_eq!(code(&first), code(&second), "exit drifted: {case:?}");
        assert!(
            code(&first) == 0 || code(&first) == 1,
            "corpus entry broke: {case:?}: {}",
            String::from_utf8_lossy(&first.stderr)
        );
        assert_eq!(first.stdout, second.stdout, "stdout drifted: {case:?}");
        assert_eq!(first_files, second_files, "artifacts drifted: {case:?}");
    }

    // render writes its figure to an explicit path rather than --out
    let fig = dir.path().join("fig.svg");
    let render_args = [
        "--seed",
        "42",
        "render",
        "--set",
        arg(&fx.a),
        "--flow",
        arg(&flow),
        "--output",
        arg(&fig),
    ];
    let first = run(&render_args);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let first_svg = fs::read(&fig).unwrap();
    let second = run(&render_args);
    let second_svg = fs::read(&fig).unwrap();
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first_svg, second_svg);

    println!(
        "acceptance 7/7 determinism: PASS ({} subcommand invocations plus render, \
         stdout and every artifact byte-identical across same-seed reruns)",
        corpus.len()
    );
}
