use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rosarch"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn scan_writes_artifact_and_job_file() {
    let out = tempfile::tempdir().unwrap();
    let o = run(bin().arg("scan").arg(fixture("synthetic_example")).arg("-o").arg(out.path()));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let scan: serde_json::Value = serde_json::from_slice(&std::fs::read(out.path().join("scan.json")).unwrap()).unwrap();
    assert_eq!(scan["nodes"].as_array().unwrap().len(), 6);
    assert!(out.path().join("scan.log").is_file());
    let job = std::fs::read_to_string(out.path().join("job.toml")).unwrap();
    assert!(job.contains("max_inheritance_depth = 3"));
}

#[test]
fn scan_of_empty_dir_is_fine() {
    let repo = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = run(bin().arg("scan").arg(repo.path()).arg("-o").arg(out.path()));
    assert_eq!(code(&o), 0);
    let scan: serde_json::Value = serde_json::from_slice(&std::fs::read(out.path().join("scan.json")).unwrap()).unwrap();
    assert!(scan["nodes"].as_array().unwrap().is_empty());
}

#[test]
fn missing_root_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let o = run(bin().args(["scan", "/definitely/not/here", "-o"]).arg(out.path()));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("does not exist"));
}

#[test]
fn bad_glob_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let o = run(bin().arg("scan").arg(fixture("synthetic_example")).args(["--include", "src/[", "-o"]).arg(out.path()));
    assert_eq!(code(&o), 2);
}

#[test]
fn recover_without_sources_exits_3() {
    let repo = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = run(bin().arg("recover").arg(repo.path()).arg("-o").arg(out.path()));
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn recover_counts_with_and_without_launch() {
    let out = tempfile::tempdir().unwrap();
    let o = run(bin().arg("recover").arg(fixture("synthetic_example")).arg("--no-launch").arg("-o").arg(out.path()));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(out.path().join("component")).unwrap().count(), 6);
    assert!(!out.path().join("system").exists() || std::fs::read_dir(out.path().join("system")).unwrap().count() == 0);

    let o = run(bin().arg("recover").arg(fixture("synthetic_example")).arg("-o").arg(out.path()));
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_dir(out.path().join("system")).unwrap().count(), 3);
}

#[test]
fn launch_root_and_arguments() {
    let out = tempfile::tempdir().unwrap();
    let o = run(bin()
        .arg("recover")
        .arg(fixture("synthetic_example"))
        .args(["--launch-root", "skeleton_bringup/launch/system.launch.py", "--arg", "use_monitor=true", "-o"])
        .arg(out.path()));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let names: Vec<String> = std::fs::read_dir(out.path().join("system"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["system.puml"]);
    let text = std::fs::read_to_string(out.path().join("system/system.puml")).unwrap();
    assert!(text.contains("\"monitor : MonitorNode\""));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("job");
    let config = dir.path().join("job.toml");
    std::fs::write(
        &config,
        format!(
            "repo_root = {:?}\noutput_dir = {:?}\n[scan]\nmax_inheritance_depth = 4\n[launch]\nenabled = false\n",
            fixture("degraded_example").display().to_string(),
            out.display().to_string()
        ),
    )
    .unwrap();
    let o = run(bin().arg("recover").arg("--config").arg(&config));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("component/PlannerNode.puml").is_file());
    assert!(!out.join("system/planning.puml").exists());

    let o = run(bin().arg("recover").arg("--config").arg(&config).args(["--max-depth", "3"]));
    assert_eq!(code(&o), 0);
    assert!(!out.join("component/PlannerNode.puml").exists());
    assert!(std::fs::read_to_string(out.join("job.toml")).unwrap().contains("max_inheritance_depth = 3"));
}

#[test]
fn llm_mode_needs_a_source() {
    let out = tempfile::tempdir().unwrap();
    let o = run(bin().arg("recover").arg(fixture("synthetic_example")).args(["--mode", "llm", "-o"]).arg(out.path()));
    assert_eq!(code(&o), 1);
}

#[test]
fn unreachable_endpoint_falls_back() {
    let out = tempfile::tempdir().unwrap();
    let o = run(bin()
        .arg("recover")
        .arg(fixture("synthetic_example"))
        .args(["--no-launch", "--mode", "llm", "--llm-endpoint", "http://127.0.0.1:9/v1/chat/completions", "-o"])
        .arg(out.path()));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(out.path().join("component/FooNode.puml")).unwrap();
    assert!(text.contains("'@provenance deterministic-fallback"));
    assert!(out.path().join("transcripts/atomic_FooNode.json").is_file());
}

#[test]
fn self_evaluation_scores_one() {
    let job = tempfile::tempdir().unwrap();
    let o = run(bin().arg("recover").arg(fixture("synthetic_example")).arg("-o").arg(job.path()));
    assert_eq!(code(&o), 0);
    let report = tempfile::tempdir().unwrap();
    let o = run(bin().arg("evaluate").arg(job.path()).arg(job.path()).arg("-o").arg(report.path()));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("atomic average: P=1.00 R=1.00 F1=1.00"), "{stdout}");
    assert!(report.path().join("report.md").is_file());
    assert!(!job.path().join("report.json").exists());
}

#[test]
fn unpaired_models_exit_4() {
    let job = tempfile::tempdir().unwrap();
    run(bin().arg("recover").arg(fixture("synthetic_example")).arg("--no-launch").arg("-o").arg(job.path()));
    let reference = fixture("synthetic_example/reference");
    let o = run(bin().arg("evaluate").arg(job.path()).arg(&reference));
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("system/Compose_example"));
    // scored as empty instead
    let o = run(bin().arg("evaluate").arg(job.path()).arg(&reference).arg("--missing-as-empty"));
    assert_eq!(code(&o), 0);
    // or compared on the level that exists on both sides
    let o = run(bin().arg("evaluate").arg(job.path().join("component")).arg(reference.join("component")));
    assert_eq!(code(&o), 0);
}

#[test]
fn explicit_pairing() {
    let gen = tempfile::tempdir().unwrap();
    let reference = fixture("synthetic_example/reference/component");
    std::fs::copy(reference.join("FooNode.puml"), gen.path().join("foo.puml")).unwrap();
    let only_foo = tempfile::tempdir().unwrap();
    std::fs::copy(reference.join("FooNode.puml"), only_foo.path().join("FooNode.puml")).unwrap();
    let o = run(bin().arg("evaluate").arg(gen.path()).arg(only_foo.path()));
    assert_eq!(code(&o), 4);
    let o = run(bin().arg("evaluate").arg(gen.path()).arg(only_foo.path()).args(["--pair", "foo=FooNode"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn empty_reference_dir_exits_4() {
    let gen = fixture("synthetic_example/reference/component");
    let empty = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = run(bin().arg("evaluate").arg(&gen).arg(empty.path()).arg("-o").arg(out.path()));
    assert_eq!(code(&o), 4);
}

#[cfg(unix)]
fn fake_renderer(dir: &Path) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let script = dir.join("fake-plantuml");
    std::fs::write(
        &script,
        "#!/bin/sh\n# last argument is the diagram\nfor f; do :; done\necho \"$f\" >> \"$(dirname \"$0\")/calls\"\nprintf 'PNG' > \"${f%.puml}.png\"\n",
    )
    .unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    script
}

#[cfg(unix)]
#[test]
fn render_is_incremental() {
    let tools = tempfile::tempdir().unwrap();
    let renderer = fake_renderer(tools.path());
    let job = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(job.path().join("component")).unwrap();
    std::fs::copy(
        fixture("synthetic_example/reference/component/FooNode.puml"),
        job.path().join("component/FooNode.puml"),
    )
    .unwrap();
    let o = run(bin().arg("render").arg(job.path()).arg("--renderer").arg(&renderer));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(job.path().join("component/FooNode.png").is_file());
    let o = run(bin().arg("render").arg(job.path()).arg("--renderer").arg(&renderer));
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("rendered 0, up to date 1"));
    let calls = std::fs::read_to_string(tools.path().join("calls")).unwrap();
    assert_eq!(calls.lines().count(), 1);
}

#[test]
fn missing_renderer_exits_5() {
    let job = tempfile::tempdir().unwrap();
    std::fs::copy(
        fixture("synthetic_example/reference/component/FooNode.puml"),
        job.path().join("FooNode.puml"),
    )
    .unwrap();
    let o = run(bin().arg("render").arg(job.path()).args(["--renderer", "no-such-plantuml-binary"]));
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("install PlantUML"));
}
