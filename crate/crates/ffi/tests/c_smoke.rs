//! Compiles a small C program against the generated header and the static
//! library and runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "hmmclass.h"

int main(void) {
    const char *json =
        "{\"n_states\":2,\"pi\":[0.5,0.5],\"trans\":[[0.9,0.1],[0.1,0.9]],"
        "\"emission\":{\"kind\":\"gaussian\",\"means\":[0.0,4.0],\"variances\":[1.0,1.0]}}";
    HmcModel *m = NULL;
    if (hmc_model_from_json(json, &m) != HMC_STATUS_OK) {
        fprintf(stderr, "load: %s\n", hmc_last_error_message());
        return 1;
    }
    double xs[3] = {0.1, 3.9, 4.2};
    double ll = 0.0;
    if (hmc_model_log_likelihood(m, xs, 3, &ll) != HMC_STATUS_OK || !isfinite(ll)) return 2;
    if (hmc_model_log_likelihood(m, NULL, 0, &ll) != HMC_STATUS_EMPTY_SEQUENCE) return 3;
    hmc_model_free(m);
    printf("%.17g\n", ll);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<test-binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libhmmclass_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    let ll: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(ll.is_finite() && ll < 0.0);
}
