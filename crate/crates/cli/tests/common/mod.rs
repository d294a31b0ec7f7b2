use std::path::PathBuf;
use std::process::{Command, Output};

#[allow(dead_code)]
pub fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[allow(dead_code)]
pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.out"))
}

pub fn hcat(args: &[String]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcat")).args(args).output().expect("hcat runs")
}

/// Name, arguments and expected exit code of every golden run.
pub fn golden_cases() -> Vec<(&'static str, Vec<String>, i32)> {
    let s = |v: &[&str]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>();
    vec![
        ("classify_h2", s(&["classify", "--h", "powerlaw:alpha=2"]), 0),
        (
            "profile_h15",
            s(&["profile", "--h", "powerlaw:alpha=1.5", "--r0", "2", "--xmax", "40"]),
            0,
        ),
        (
            "compare_csv",
            s(&[
                "compare", "--h", "powerlaw:alpha=2", "--f", "scale:2:powerlaw:alpha=2", "--xmax",
                "1e3", "--format", "csv",
            ]),
            0,
        ),
        ("certify_h2", s(&["certify", "--h", "powerlaw:alpha=2"]), 0),
        ("certify_const", s(&["certify", "--h", "expr:-1"]), 0),
        (
            "mesh_expr",
            s(&["mesh", "--h", "expr:-(1-y^2)^2*(2-y^2)", "--rings", "4", "--segments", "6", "--xmax", "10"]),
            0,
        ),
        (
            "sweep_h2",
            s(&["sweep", "--h", "powerlaw:alpha=2", "--r-list", "0.5,1,2", "--xmax", "1e5"]),
            0,
        ),
        (
            "equiv_scaled",
            s(&["equiv", "--h", "powerlaw:alpha=2", "--f", "scale:0.5:powerlaw:alpha=2"]),
            0,
        ),
        (
            "table_profile",
            vec![
                "profile".into(),
                "--h".into(),
                format!("table:{}", fixture("quartic.csv")),
                "--xmax".into(),
                "5".into(),
                "--branch".into(),
                "lower".into(),
            ],
            0,
        ),
        ("config_profile", vec!["profile".into(), "--config".into(), fixture("run.toml")], 0),
    ]
}
