//! Compiles and runs a C program against the generated header and the
//! static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "enpgf.h"

int main(void) {
    EnpgfPriors priors = {{0.1, 0.01}, {1.0, 0.5}, {0.1, 0.01}};
    EnpgfFilterOptions opts = enpgf_filter_options_default();
    opts.ensemble_size = 20;
    opts.seed = 4;
    EnpgfFilter *f = NULL;
    if (enpgf_filter_new(2, &priors, &opts, &f) != ENPGF_STATUS_OK) return 1;
    uint64_t counts[6] = {0, 1, 2, 0, 1, 1};
    if (enpgf_filter_assimilate(f, counts, 3, 2) != ENPGF_STATUS_OK) return 2;
    double alpha[4];
    if (enpgf_filter_alpha_mean(f, alpha, 4) != ENPGF_STATUS_OK) return 3;
    if (enpgf_filter_step(f) != 3) return 4;
    enpgf_filter_free(f);
    opts.ensemble_size = 1;
    if (enpgf_filter_new(2, &priors, &opts, &f) != ENPGF_STATUS_INVALID_ARGUMENT) return 5;
    if (enpgf_last_error() == NULL) return 6;
    printf("%s %.6f\n", enpgf_version(), alpha[0]);
    return 0;
}
"#;

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libenpgf_ffi.a");
    lib.exists().then_some(lib)
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/enpgf.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 12, "{exports:?}");
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for ty in ["EnpgfStatus", "EnpgfFilter", "EnpgfPriors", "EnpgfFilterOptions"] {
        assert!(header.contains(ty), "{ty} missing from header");
    }
}

#[test]
fn c_program_links_and_runs() {
    let lib = static_lib().expect("static library next to the test binary");
    let cc = compiler().expect("a C compiler");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(env!("CARGO_PKG_VERSION")), "{text}");
}
