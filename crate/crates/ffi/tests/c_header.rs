//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler is on the path.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "rewardot.h"

int main(void) {
    double costs[4] = {0.0, 1.0, 1.0, 0.0};
    double wa[2] = {1.0, 0.0};
    double wb[2] = {0.25, 0.75};
    RwMetric *metric = NULL;
    RwMeasure *a = NULL, *b = NULL;
    if (rw_metric_new(costs, 2, &metric) != RW_STATUS_OK) return 10;
    if (rw_measure_new(wa, 2, &a) != RW_STATUS_OK) return 11;
    if (rw_measure_new(wb, 2, &b) != RW_STATUS_OK) return 12;
    double d = -1.0;
    if (rw_exact_distance(a, b, metric, 1.0, &d) != RW_STATUS_OK) return 13;
    if (fabs(d - 0.75) > 1e-12) return 14;
    double bad[2] = {0.9, 0.9};
    RwMeasure *c = NULL;
    if (rw_measure_new(bad, 2, &c) != RW_STATUS_INVALID_ARGUMENT) return 15;
    if (rw_last_error()[0] == '\0') return 16;
    rw_measure_free(a);
    rw_measure_free(b);
    rw_metric_free(metric);
    printf("%.17g\n", d);
    return 0;
}
"#;

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
}

#[test]
fn c_program_links_against_static_library() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Integration test binaries live in target/<profile>/deps.
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("librewardot_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.75");
}
