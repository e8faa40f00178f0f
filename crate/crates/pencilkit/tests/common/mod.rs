#![allow(dead_code)]

use pencilkit::cli::corpus;
use pencilkit::cli::{Problem, ProblemFile};
use pencilkit::sampling::Settings;

pub fn settings(points: usize) -> Settings {
    Settings::default().with_points(points)
}

/// Builds a bundled problem with the given settings.
pub fn problem(name: &str, s: &Settings) -> Problem {
    let e = corpus::find(name).unwrap_or_else(|| panic!("no corpus entry {name}"));
    let file = ProblemFile::parse(e.source).unwrap();
    Problem::build(&file, s).unwrap()
}
