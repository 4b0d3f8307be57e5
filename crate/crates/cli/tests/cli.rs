use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_jingbing");

fn jingbing(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = jingbing(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Exit code and the single stderr line of a failing run.
fn fails(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = jingbing(dir, args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<_> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    assert!(lines[0].starts_with("error="), "{stderr}");
    (out.status.code().unwrap(), lines[0].to_string())
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["ca", "init", "--cert", "root.pem", "--key", "root.key"],
    );
    ok(
        d,
        &[
            "ca",
            "issue",
            "--ca-cert",
            "root.pem",
            "--ca-key",
            "root.key",
            "--subject",
            "CA",
            "--cert",
            "ca.pem",
            "--key",
            "ca.key",
        ],
    );
    ok(
        d,
        &[
            "ca",
            "issue",
            "--ca-cert",
            "root.pem",
            "--ca-key",
            "root.key",
            "--subject",
            "NY",
            "--cert",
            "ny.pem",
            "--key",
            "ny.key",
        ],
    );
    dir
}

fn spawn_server(d: &Path, data: &str, extra: &[&str]) -> (Child, String) {
    let mut child = Command::new(BIN)
        .current_dir(d)
        .args([
            "server",
            "--listen",
            "127.0.0.1:0",
            "--cert",
            "ny.pem",
            "--key",
            "ny.key",
            "--root",
            "root.pem",
            "--data",
            data,
        ])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.as_mut().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line.trim().strip_prefix("listening=").unwrap().to_string();
    (child, addr)
}

fn client_args<'a>(addr: &'a str, data: &'a str) -> Vec<&'a str> {
    vec![
        "client",
        "--connect",
        addr,
        "--cert",
        "ca.pem",
        "--key",
        "ca.key",
        "--root",
        "root.pem",
        "--data",
        data,
        "--paillier-bits",
        "512",
    ]
}

#[test]
fn worked_example_end_to_end() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("client.csv"), "id,col0\nalice,3\nbob,5\ncarol,7\n").unwrap();
    std::fs::write(d.join("server.csv"), "id\nbob\ncarol\ndave\n").unwrap();
    let (mut server, addr) = spawn_server(
        d,
        "server.csv",
        &["--max-sessions", "2", "--limits", "paper"],
    );

    let mut args = client_args(&addr, "client.csv");
    args.extend(["--limits", "paper", "--op", "0:sum", "--op", "0:sumsq"]);
    assert_eq!(ok(d, &args), "cardinality=2\ncol0.sum=12\ncol0.sumsq=74\n");
    args.extend(["--format", "human"]);
    let human = ok(d, &args);
    assert!(human.contains("Intersection with NY: 2 records"), "{human}");
    assert!(server.wait().unwrap().success());
}

#[test]
fn gendata_expected_matches_client_output() {
    let dir = setup();
    let d = dir.path();
    ok(
        d,
        &[
            "gendata",
            "--seed",
            "42",
            "--size-a",
            "40",
            "--size-b",
            "60",
            "--intersection",
            "15",
            "--columns",
            "2",
            "--out-dir",
            "gen",
        ],
    );
    let (mut server, addr) = spawn_server(d, "gen/server.csv", &["--max-sessions", "1"]);
    let mut args = client_args(&addr, "gen/client.csv");
    args.extend([
        "--bound", "31", "--op", "0:sum", "--op", "0:sumsq", "--op", "1:sum", "--op", "1:sumsq",
    ]);
    let out = ok(d, &args);
    assert_eq!(
        out,
        std::fs::read_to_string(d.join("gen/expected.txt")).unwrap()
    );
    assert!(server.wait().unwrap().success());
}

#[test]
fn transcripts_written_and_verifiable() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("client.csv"), "id,col0\nalice,3\nbob,5\n").unwrap();
    std::fs::write(d.join("server.csv"), "id\nbob\n").unwrap();
    let (mut server, addr) = spawn_server(
        d,
        "server.csv",
        &["--max-sessions", "1", "--transcript-dir", "srv"],
    );
    let mut args = client_args(&addr, "client.csv");
    args.extend(["--op", "0:sum", "--transcript-dir", "cli"]);
    ok(d, &args);
    assert!(server.wait().unwrap().success());
    for (sub, signed) in [("srv", "true"), ("cli", "false")] {
        let files: Vec<PathBuf> = std::fs::read_dir(d.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        assert_eq!(files.len(), 1);
        let out = ok(
            d,
            &[
                "transcript",
                "verify",
                "--root",
                "root.pem",
                files[0].to_str().unwrap(),
            ],
        );
        assert_eq!(
            out,
            format!("client=CA server=NY messages=8 server_signed={signed}\n")
        );
    }
}

#[test]
fn validation_errors_exit_2_before_connecting() {
    let dir = setup();
    let d = dir.path();
    // a port that is bound but never accepts; any connection attempt would queue
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap().to_string();

    let rows: String = (0..21).map(|i| format!("r{i},1\n")).collect();
    std::fs::write(d.join("big.csv"), format!("id,col0\n{rows}")).unwrap();
    let mut args = client_args(&addr, "big.csv");
    args.extend(["--limits", "paper", "--op", "0:sum"]);
    let (code, line) = fails(d, &args);
    assert_eq!(code, 2);
    assert!(
        line.starts_with("error=validation reason=validation-failed"),
        "{line}"
    );

    for (name, body, reason) in [
        ("dup.csv", "id,col0\na,1\na,2\n", "duplicate-identifier"),
        ("neg.csv", "id,col0\na,-1\n", "non-integer-value"),
        ("hdr.csv", "ident,col0\na,1\n", "bad-header"),
        ("big_value.csv", "id,col0\na,32\n", "bound-exceeded"),
    ] {
        std::fs::write(d.join(name), body).unwrap();
        let mut args = client_args(&addr, name);
        args.extend(["--limits", "paper", "--op", "0:sum"]);
        let (code, line) = fails(d, &args);
        assert_eq!(code, 2, "{line}");
        assert!(line.contains(&format!("reason={reason}")), "{line}");
    }

    std::fs::write(d.join("ok.csv"), "id,col0\na,1\n").unwrap();
    let mut args = client_args(&addr, "ok.csv");
    args.extend(["--op", "1:sum"]);
    assert_eq!(fails(d, &args).0, 2);

    assert_eq!(
        listener.accept().unwrap_err().kind(),
        std::io::ErrorKind::WouldBlock
    );
}

#[test]
fn connection_refused_exits_5() {
    let dir = setup();
    let d = dir.path();
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    std::fs::write(d.join("ok.csv"), "id,col0\na,1\n").unwrap();
    let addr = format!("127.0.0.1:{port}");
    let mut args = client_args(&addr, "ok.csv");
    args.extend(["--op", "0:sum"]);
    let (code, line) = fails(d, &args);
    assert_eq!(code, 5);
    assert!(
        line.starts_with("error=io reason=connection-failed"),
        "{line}"
    );
}

#[test]
fn foreign_root_exits_3() {
    let dir = setup();
    let d = dir.path();
    ok(
        d,
        &["ca", "init", "--cert", "other.pem", "--key", "other.key"],
    );
    ok(
        d,
        &[
            "ca",
            "issue",
            "--ca-cert",
            "other.pem",
            "--ca-key",
            "other.key",
            "--subject",
            "CA",
            "--cert",
            "rogue.pem",
            "--key",
            "rogue.key",
        ],
    );
    std::fs::write(d.join("server.csv"), "id\nbob\n").unwrap();
    std::fs::write(d.join("client.csv"), "id,col0\nbob,1\n").unwrap();
    let (mut server, addr) = spawn_server(d, "server.csv", &["--max-sessions", "1"]);
    // the rogue client trusts its own root, so only the server objects
    let (code, line) = fails(
        d,
        &[
            "client",
            "--connect",
            &addr,
            "--cert",
            "rogue.pem",
            "--key",
            "rogue.key",
            "--root",
            "other.pem",
            "--data",
            "client.csv",
            "--op",
            "0:sum",
            "--paillier-bits",
            "512",
        ],
    );
    assert_eq!(code, 3, "{line}");
    assert!(line.starts_with("error=handshake"), "{line}");
    let out = Command::new(BIN)
        .current_dir(d)
        .args([
            "client",
            "--connect",
            &addr,
            "--cert",
            "ca.pem",
            "--key",
            "ca.key",
            "--root",
            "other.pem",
            "--data",
            "client.csv",
            "--op",
            "0:sum",
        ])
        .output()
        .unwrap();
    // a certificate that does not chain to the configured root is caught locally
    assert_eq!(out.status.code(), Some(2));
    server.kill().unwrap();
    server.wait().unwrap();
}

#[test]
fn ca_refuses_to_overwrite_and_checks_subject() {
    let dir = setup();
    let d = dir.path();
    let (code, line) = fails(d, &["ca", "init", "--cert", "root.pem", "--key", "new.key"]);
    assert_eq!(code, 5);
    assert!(line.contains("reason=exists"));
    let (code, line) = fails(
        d,
        &[
            "ca",
            "issue",
            "--ca-cert",
            "root.pem",
            "--ca-key",
            "root.key",
            "--subject",
            "ny",
            "--cert",
            "x.pem",
            "--key",
            "x.key",
        ],
    );
    assert_eq!(code, 2);
    assert!(line.contains("reason=invalid-subject"), "{line}");
}

#[test]
fn gendata_infeasible_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, line) = fails(
        dir.path(),
        &[
            "gendata",
            "--seed",
            "1",
            "--size-a",
            "100",
            "--size-b",
            "100",
            "--intersection",
            "101",
            "--out-dir",
            "x",
        ],
    );
    assert_eq!(code, 2);
    assert!(line.contains("reason=infeasible-params"));
}

#[test]
fn gendata_is_reproducible_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a", "b"] {
        ok(
            d,
            &[
                "gendata",
                "--seed",
                "9",
                "--size-a",
                "30",
                "--size-b",
                "20",
                "--intersection",
                "5",
                "--columns",
                "3",
                "--out-dir",
                out,
            ],
        );
    }
    for f in ["client.csv", "server.csv", "expected.txt"] {
        assert_eq!(
            std::fs::read(d.join("a").join(f)).unwrap(),
            std::fs::read(d.join("b").join(f)).unwrap()
        );
    }
}
