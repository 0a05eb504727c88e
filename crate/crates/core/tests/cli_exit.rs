use std::process::Command;

fn netrepair(args: &[&str], out: &std::path::Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_netrepair"))
        .args(args)
        .env("NETREPAIR_OUTPUT_DIR", out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let help = netrepair(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--net_arch", "--pretrained", "--method", "--auto", "--additional_param", "--input_logs", "--testonly", "--all", "--depth", "--dataset"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
    assert!(text.contains("apricot"));

    assert_eq!(netrepair(&["--depth", "34", "--dataset", "synthetic", "--method", "dl2"], dir.path()).status.code(), Some(1));
    assert_eq!(netrepair(&["--bogus"], dir.path()).status.code(), Some(1));

    let ok = netrepair(&["--testonly", "--net_arch", "cnn-small", "--dataset", "synthetic:3:10:5:8"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.path().join("report.txt").is_file());
    assert!(dir.path().join("report.csv").is_file());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("Baseline Acc."));

    let partial = netrepair(
        &["--pretrained", "missing.air", "--dataset", "synthetic:3:10:5:8", "--method", "dl2"],
        dir.path(),
    );
    assert_eq!(partial.status.code(), Some(2));
}
