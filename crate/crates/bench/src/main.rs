use std::process::ExitCode;
use std::time::Instant;

use ldc_bench::{
    compare_fixture, csv_string, fixture, parse_cli, run_spec, CliError, RunSpec, USAGE,
};

fn print_report_table(spec: &RunSpec, reports: &[ldc::scheme::RunReport]) {
    println!(
        "domain={:?} b=({},{}) mode={:?} s={}/{} gamma={}/{}",
        spec.domain,
        spec.b[0],
        spec.b[1],
        spec.mode,
        spec.s.num,
        spec.s.den,
        spec.gamma.num,
        spec.gamma.den
    );
    println!(
        "{:>8} {:>8} {:>10} {:>10} {}",
        "DOF_H",
        "DOF_w",
        "lambda_H",
        "lambda_w",
        (1..=6)
            .map(|i| format!("{:>10}", format!("h{i}")))
            .collect::<String>()
    );
    for r in reports {
        let mut line = format!(
            "{:>8} {:>8} {:>10.5} {:>10.5}",
            r.dof_h, r.dof_w, r.lambda_h, r.lambda_w
        );
        for k in 0..6 {
            match r.levels.get(k) {
                Some(l) => line.push_str(&format!(" {:>9.5}", l.lambda)),
                None => line.push_str(&format!(" {:>9}", "-")),
            }
        }
        println!("{line}");
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let spec = match parse_cli(&args) {
        Ok(s) => s,
        Err(CliError::Usage) => {
            eprint!("{USAGE}");
            return ExitCode::from(2);
        }
        Err(CliError::Bad(msg)) => {
            eprintln!("error: {msg}\n");
            eprint!("{USAGE}");
            return ExitCode::from(2);
        }
    };

    if let Some(path) = &spec.dump_mesh {
        let row = &spec.rows[0];
        return match ldc::build_mesh(&spec.domain, row.coarse_n).and_then(|m| {
            let mut f = std::fs::File::create(path)?;
            m.write_dump(&mut f)?;
            Ok(())
        }) {
            Ok(()) => {
                println!(
                    "wrote coarse mesh (1/{}) to {}",
                    row.coarse_n,
                    path.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        };
    }

    let started = Instant::now();
    let reports = match run_spec(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    print_report_table(&spec, &reports);
    eprintln!(
        "# {} row(s) in {:.1?}; per-level times: {:?}; ordering: {}",
        reports.len(),
        started.elapsed(),
        reports
            .iter()
            .map(|r| r.levels.iter().map(|l| l.wall_time).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        reports.first().map(|r| r.ordering).unwrap_or("-")
    );

    if let Some(path) = &spec.out {
        if let Err(e) = std::fs::write(path, csv_string(&reports)) {
            eprintln!("error writing {}: {e}", path.display());
            return ExitCode::from(2);
        }
        println!("wrote {}", path.display());
    }

    if let Some(id) = spec.table {
        match compare_fixture(&reports, fixture(id), spec.tol) {
            Ok(cmp) if cmp.pass => {
                println!(
                    "table {id}: PASS (max |diff| = {:.2e} <= tol {:.1e}, DOF columns exact)",
                    cmp.max_diff, spec.tol
                );
            }
            Ok(cmp) => {
                println!("table {id}: FAIL (max |diff| = {:.2e})", cmp.max_diff);
                for f in &cmp.failures {
                    println!("  {f}");
                }
                return ExitCode::from(1);
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(2);
            }
        }
    }
    ExitCode::SUCCESS
}
