use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vidtldr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vidtldr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn vidtldr")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn subcommands_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("base.cfg"), "run.id = base\nout.dir = base\n").unwrap();
    fs::write(
        d.join("vt.cfg"),
        "run.id = vt\nrun.mode = vidtldr\nrun.schedule = 8,8,8,8\nout.dir = vt\n",
    )
    .unwrap();

    let o = vidtldr(&["run", "base.cfg", "vt.cfg"], d);
    assert!(o.status.success(), "{o:?}");
    assert!(d.join("base/metrics.csv").exists() && d.join("vt/metrics.csv").exists());

    let o = vidtldr(&["compare", "base", "vt", "--out", "cmp.csv"], d);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(fs::read_to_string(d.join("cmp.csv")).unwrap(), stdout(&o));

    let o = vidtldr(&["flops", "vt.cfg"], d);
    assert!(o.status.success());
    assert!(stdout(&o).contains("total,64,32,"));

    let o = vidtldr(&["temporal-bias", "vt.cfg"], d);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("frame_index,ratio_attentiveness"));
    assert!(d.join("vt/frame_ratio.csv").exists());

    let o = vidtldr(&["dump-saliency", "vt.cfg"], d);
    assert!(o.status.success());
    let sal = fs::read_to_string(d.join("vt/saliency.csv")).unwrap();
    assert_eq!(sal.lines().count(), 65);
}

#[test]
fn failures_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("typo.cfg"), "run.shedule = 1\n").unwrap();
    fs::write(
        d.join("infeasible.cfg"),
        "run.mode = tome\nrun.schedule = 40,40\n",
    )
    .unwrap();
    fs::write(d.join("a.cfg"), "out.dir = same\n").unwrap();
    fs::write(d.join("b.cfg"), "out.dir = same\nrun.seed = 2\n").unwrap();

    let cases: [(&[&str], i32, &str); 6] = [
        (&["run", "typo.cfg"], 2, "unknown key"),
        (&["run", "infeasible.cfg"], 3, "infeasible schedule"),
        (&["run", "missing.cfg"], 4, "missing.cfg"),
        (&["run", "a.cfg", "b.cfg"], 3, "shared"),
        (&["compare", "x", "y"], 4, "manifest"),
        (&["flops", "typo.cfg"], 2, "line 1"),
    ];
    for (args, code, needle) in cases {
        let o = vidtldr(args, d);
        assert_eq!(o.status.code(), Some(code), "{args:?}: {o:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
    }
    assert!(!vidtldr(&["bogus"], d).status.success());
}
