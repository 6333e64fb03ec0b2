//! Helpers shared by the CLI test suites.
#![allow(dead_code)] // each test target uses its own subset

use std::path::Path;
use std::process::{Command, Output};

/// A command for the compiled `pairtok` binary.
pub fn pairtok() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pairtok"))
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("pairtok binary runs")
}

pub fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed (exit {:?}):\n{}",
        out.status.code(),
        stderr_str(out)
    );
}

pub fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

pub fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

pub fn stderr_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) {
    let mut text = String::new();
    for line in lines {
        text.push_str(line.as_ref());
        text.push('\n');
    }
    std::fs::write(path, text).expect("write test file");
}

pub fn read_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .expect("read test file")
        .lines()
        .map(String::from)
        .collect()
}
