//! Acceptance suite: one PASS/FAIL line per criterion. Criteria 1 to 11 run
//! through `validate` on the shipped config; criterion 12 repeats the run and
//! compares the rendered reports byte for byte.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use occupation_cli::commands::cmd_validate;
use occupation_cli::output::{write, write_csv};
use occupation_cli::{Format, LoadedConfig, Report};

fn render(r: &Report) -> Vec<u8> {
    let mut buf = Vec::new();
    write(Format::Json, &r.meta, &r.table, &mut buf).expect("json report");
    write_csv(&r.table, &mut buf).expect("csv report");
    buf
}

fn main() -> ExitCode {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/validate.toml");
    let cfg = LoadedConfig::load(&path).expect("shipped validation config");

    let start = Instant::now();
    let first = cmd_validate(&cfg, None).expect("validation run");
    let elapsed = start.elapsed();
    for line in &first.summary {
        println!("{line}");
    }

    let second = cmd_validate(&cfg, None).expect("repeated validation run");
    let (a, b) = (render(&first), render(&second));
    let same = a == b;
    println!(
        "{} criterion 12: reproducibility (two runs with seed {}, {} report bytes, identical: {same}; first run {:.1} s)",
        if same { "PASS" } else { "FAIL" },
        first.meta.seed.unwrap_or_default(),
        a.len(),
        elapsed.as_secs_f64(),
    );

    let failed = first.summary.iter().filter(|l| l.starts_with("FAIL")).count() + usize::from(!same);
    println!("{} of {} criteria passed", first.summary.len() + 1 - failed, first.summary.len() + 1);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
