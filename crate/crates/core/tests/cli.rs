use std::process::Command;

fn tilepic(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tilepic"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 6] = [
    "--set",
    "n_cell=16,8,8",
    "--set",
    "steps=3",
    "--set",
    "warmup=1",
];

#[test]
fn run_writes_step_csv() {
    let out = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli_run.csv");
    let mut args = vec![
        "run",
        "--interp",
        "G0",
        "--deposit",
        "D0",
        "--comm",
        "C0",
        "--seed",
        "3",
    ];
    args.extend(SMALL);
    args.extend(["--out", out.to_str().unwrap()]);
    let o = tilepic(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = tilepic::metrics::read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("G0,D0,C0"));
}

#[test]
fn ablate_lists_every_combination() {
    let mut args = vec![
        "ablate",
        "--interp",
        "G0,G7",
        "--deposit",
        "all",
        "--ranks",
        "2,1,1",
    ];
    args.extend(SMALL);
    let o = tilepic(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    assert!(text.lines().nth(1).unwrap().starts_with("G0,D0,C2,2x1x1,"));
}

#[test]
fn verify_reports_and_exits_zero() {
    let mut args = vec!["verify", "--ranks", "2,1,1", "--deterministic", "true"];
    args.extend(SMALL);
    let o = tilepic(&args);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(o.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 4);
}

#[test]
fn bad_variant_is_an_error() {
    let o = tilepic(&["run", "--interp", "G1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown interpolation mode"));
}
