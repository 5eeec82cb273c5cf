use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use comicweave::codec::{decode_image, encode_png};
use comicweave_core::raster::Raster;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_comicweave"));
    c.env_remove("COMICWEAVE_CONFIG").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn generate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["generate", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn generate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = generate(dir, &["--length", "5", "--seed", "42"]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in ["strip.png", "document.json", "panel_0.png", "panel_4.png"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let strip = decode_image(&fs::read(a.join("strip.png")).unwrap()).unwrap();
    assert_eq!((strip.width(), strip.height()), (5 * 512 + 4 * 8, 512));

    let other = tmp.path().join("c");
    assert!(generate(&other, &["--length", "5", "--seed", "43"])
        .status
        .success());
    assert_ne!(
        fs::read(a.join("document.json")).unwrap(),
        fs::read(other.join("document.json")).unwrap()
    );
}

#[test]
fn failures_leave_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let res = generate(&out, &["--length", "5", "--layers", "nosuch"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("nosuch"));
    let res = generate(&out, &["--length", "5", "--layers", "grammar,redraw"]);
    assert!(!res.status.success());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
    assert!(
        !generate(&out, &["--length", "2", "--assets", "/no/such/dir"])
            .status
            .success()
    );
    assert!(
        !generate(&out, &["--length", "2", "--params", "{\"action\": 1}"])
            .status
            .success()
    );
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn zero_length_writes_only_a_document() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("empty");
    let res = generate(&out, &["--length", "0"]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, ["document.json"]);
    let doc: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("document.json")).unwrap()).unwrap();
    assert!(doc["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .all(|n| n["type"] != "Panel"));
}

#[test]
fn inspect_generated_document() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    assert!(generate(
        &out,
        &["--length", "5", "--seed", "42", "--layers", "grammar,arc"]
    )
    .status
    .success());
    let doc = out.join("document.json");
    let res = run(&["inspect", doc.to_str().unwrap(), "--tension", "--structure"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    let rows: Vec<(String, String)> = text
        .lines()
        .skip(2)
        .take(5)
        .map(|l| {
            let c: Vec<&str> = l.split_whitespace().collect();
            (c[2].to_string(), c[3].to_string())
        })
        .collect();
    let want: Vec<(String, String)> = [("E", "0"), ("I", "2"), ("L", "4"), ("P", "6"), ("R", "2")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(rows, want);
    assert!(text.contains("  6 |           *"));
    assert!(text.contains("[E I L P R]"));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"nodes\": [").unwrap();
    assert!(!run(&["inspect", bad.to_str().unwrap()]).status.success());
    assert!(!run(&["inspect", "/no/such/file.json"]).status.success());
}

#[test]
fn params_and_bilinear_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let params = r#"{"action": {"cast": 1, "start": {"blue": "eat"}}}"#;
    assert!(generate(
        &a,
        &["--length", "3", "--layers", "action", "--params", params]
    )
    .status
    .success());
    let doc = fs::read_to_string(a.join("document.json")).unwrap();
    assert!(doc.contains("\"eat\""));
    assert!(!doc.contains("\"pink\""));
    let file = tmp.path().join("p.json");
    fs::write(&file, params).unwrap();
    let at = format!("@{}", file.display());
    assert!(generate(
        &b,
        &[
            "--length",
            "3",
            "--layers",
            "action",
            "--params",
            &at,
            "--bilinear"
        ]
    )
    .status
    .success());
    assert_eq!(doc, fs::read_to_string(b.join("document.json")).unwrap());
}

#[test]
fn asset_import_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    fs::create_dir(&src).unwrap();
    for (i, name) in ["one.png", "two.png", "Three Four.png"].iter().enumerate() {
        fs::write(
            src.join(name),
            encode_png(&Raster::new(3, 3, [i as u8, 0, 0, 255])).unwrap(),
        )
        .unwrap();
    }
    let root = tmp.path().join("root");
    let res = run(&[
        "assets",
        "import",
        "--set",
        "mine",
        src.to_str().unwrap(),
        "--root",
        root.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(String::from_utf8(res.stdout).unwrap().trim(), "3");
    assert!(root.join("mine/three_four.png").exists());
    assert!(root.join("mine/manifest.json").exists());

    // The imported root feeds generation.
    let out = tmp.path().join("out");
    assert!(generate(
        &out,
        &[
            "--length",
            "1",
            "--layers",
            "",
            "--assets",
            root.to_str().unwrap()
        ]
    )
    .status
    .success());

    let missing = run(&[
        "assets",
        "import",
        "--set",
        "x",
        "/no/such/dir",
        "--root",
        root.to_str().unwrap(),
    ]);
    assert!(!missing.status.success());
}

#[test]
fn export_builtin_symbols() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&[
        "assets",
        "export-builtin",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let symbols = fs::read_dir(tmp.path().join("symbols"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "png")
        })
        .count();
    assert_eq!(symbols, 8);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

#[test]
fn serve_answers_and_rejects_busy_ports() {
    let tmp = tempfile::tempdir().unwrap();
    let port = free_port();
    let mut child = bin()
        .args(["serve", "--port", &port.to_string()])
        .env("COMICWEAVE_OUTPUT_DIR", tmp.path())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let url = format!("http://127.0.0.1:{port}/layers");
    let deadline = Instant::now() + Duration::from_secs(30);
    let status = loop {
        match ureq::get(&url).call() {
            Ok(resp) => break resp.status().as_u16(),
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(100)),
            Err(e) => panic!("server never came up: {e}"),
        }
    };
    assert_eq!(status, 200);

    let busy = bin()
        .args(["serve", "--port", &port.to_string()])
        .output()
        .unwrap();
    assert!(!busy.status.success());
    child.kill().unwrap();
    child.wait().unwrap();
}
