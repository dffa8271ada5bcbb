use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::Failure;

const INSTALL_HINT: &str = "install PlantUML (https://plantuml.com/download) and put `plantuml` on PATH, \
or point --renderer / ROSARCH_PLANTUML at a command that accepts `-tpng <file>`";

fn puml_files(dir: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        let Ok(entries) = std::fs::read_dir(dir) else { return };
        let mut paths: Vec<PathBuf> = entries.filter_map(Result::ok).map(|e| e.path()).collect();
        paths.sort();
        for p in paths {
            if p.is_dir() {
                walk(&p, out);
            } else if p.extension().is_some_and(|x| x == "puml") {
                out.push(p);
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, &mut out);
    out
}

fn up_to_date(puml: &Path, png: &Path) -> bool {
    let modified = |p: &Path| std::fs::metadata(p).and_then(|m| m.modified()).ok();
    matches!((modified(puml), modified(png)), (Some(src), Some(out)) if out >= src)
}

/// Renders every diagram below `dir` to a PNG next to it.
pub fn render(dir: &Path, renderer: Option<&str>, force: bool) -> Result<(), Failure> {
    if !dir.is_dir() {
        return Err(Failure::new(1, format!("{}: not a directory", dir.display())));
    }
    let renderer = renderer
        .map(str::to_string)
        .or_else(|| std::env::var("ROSARCH_PLANTUML").ok())
        .unwrap_or_else(|| "plantuml".to_string());
    let mut words = renderer.split_whitespace();
    let program = words.next().ok_or_else(|| Failure::new(5, format!("empty renderer command; {INSTALL_HINT}")))?;
    let fixed: Vec<&str> = words.collect();

    let (mut rendered, mut skipped) = (0, 0);
    for puml in puml_files(dir) {
        let png = puml.with_extension("png");
        if !force && up_to_date(&puml, &png) {
            skipped += 1;
            continue;
        }
        let status = Command::new(program).args(&fixed).arg("-tpng").arg(&puml).status();
        match status {
            Ok(s) if s.success() => rendered += 1,
            Ok(s) => return Err(Failure::new(1, format!("{}: renderer exited with {s}", puml.display()))),
            Err(e) if e.kind() == ErrorKind::NotFound => {
                return Err(Failure::new(5, format!("renderer `{program}` not found; {INSTALL_HINT}")))
            }
            Err(e) => return Err(Failure::new(1, format!("{program}: {e}"))),
        }
    }
    println!("rendered {rendered}, up to date {skipped}");
    Ok(())
}
