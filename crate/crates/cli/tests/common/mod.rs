#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn ust(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ust"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("spawn ust")
}

pub fn ust_ok(cwd: &Path, args: &[&str]) -> String {
    let out = ust(cwd, args);
    assert!(
        out.status.success(),
        "ust {args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// 64-bit FNV-1a, for pinning file contents.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf29ce484222325, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x100000001b3)
    })
}
