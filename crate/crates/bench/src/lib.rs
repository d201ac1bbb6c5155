//! Benchmark harness for the multilevel defect-correction eigensolver:
//! CLI parsing, embedded fixture tables, CSV emission, and fixture
//! comparison with exact DOF matching.

use std::path::PathBuf;
use std::sync::OnceLock;

use ldc::error::Result as LdcResult;
use ldc::mesh::unknowns_for;
use ldc::scheme::{plan_parallel_schedule, plan_schedule, RunReport, SchemeConfig, SchemeMode};
use ldc::{reference_lambda, DomainSpec, Frac, ProblemCoeffs};

pub const USAGE: &str = "\
ldc-bench: multilevel local defect-correction eigenvalue benchmarks

USAGE:
    ldc-bench [--config PATH] [FLAGS]

FLAGS:
    --domain {lshape|slit}    computational domain (default lshape)
    --b X,Y                   convection vector (default 0,3)
    --H 1/N                   coarse grid size as an exact dyadic fraction
    --levels N                number of local correction levels
    --mode {two-grid|three-level|multilevel|parallel|symmetric}
    --table K                 reproduce benchmark table K (1..8) and compare
    --s P/Q                   rate parameter s (default 2/3 lshape, 1/2 slit)
    --gamma P/Q               rate parameter gamma (same defaults as --s)
    --tol X                   comparison tolerance for --table (default 5e-3)
    --out PATH.csv            write results as CSV
    --dump-mesh PATH          write the coarse mesh in plain text and exit
    --config PATH             key = value file; flags override it

EXIT CODE: 0 on success/comparison pass, 1 on comparison failure,
2 on configuration errors.
";

#[derive(Debug)]
pub enum CliError {
    /// No arguments: print usage.
    Usage,
    Bad(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage => f.write_str("no arguments"),
            CliError::Bad(m) => f.write_str(m),
        }
    }
}

/// One benchmark row: a coarse grid plus a level count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowPlan {
    pub coarse_n: u32,
    pub levels: usize,
}

/// Parsed CLI/config state, one-to-one with a sequence of scheme configs.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub domain: DomainSpec,
    pub b: [f64; 2],
    pub mode: SchemeMode,
    pub s: Frac,
    pub gamma: Frac,
    pub rows: Vec<RowPlan>,
    pub table: Option<u8>,
    pub out: Option<PathBuf>,
    pub tol: f64,
    pub dump_mesh: Option<PathBuf>,
}

fn parse_domain(v: &str) -> Result<DomainSpec, CliError> {
    match v {
        "lshape" => Ok(DomainSpec::LShape),
        "slit" => Ok(DomainSpec::Slit),
        other => Err(CliError::Bad(format!("unknown domain '{other}'"))),
    }
}

fn parse_mode(v: &str) -> Result<SchemeMode, CliError> {
    match v {
        "two-grid" => Ok(SchemeMode::TwoGrid),
        "three-level" => Ok(SchemeMode::ThreeLevel),
        "multilevel" => Ok(SchemeMode::Multilevel),
        "parallel" => Ok(SchemeMode::Parallel),
        "symmetric" => Ok(SchemeMode::Symmetric),
        other => Err(CliError::Bad(format!("unknown mode '{other}'"))),
    }
}

fn parse_b(v: &str) -> Result<[f64; 2], CliError> {
    let (x, y) = v
        .split_once(',')
        .ok_or_else(|| CliError::Bad(format!("--b expects X,Y, got '{v}'")))?;
    let px = x
        .trim()
        .parse()
        .map_err(|_| CliError::Bad(format!("bad number '{x}'")))?;
    let py = y
        .trim()
        .parse()
        .map_err(|_| CliError::Bad(format!("bad number '{y}'")))?;
    Ok([px, py])
}

/// Exact fraction `1/N`; dyadic schedules do not tolerate float rounding.
fn parse_unit_fraction(v: &str) -> Result<u32, CliError> {
    let (num, den) = v
        .split_once('/')
        .ok_or_else(|| CliError::Bad(format!("malformed fraction '{v}' (expected 1/N)")))?;
    if num.trim() != "1" {
        return Err(CliError::Bad(format!(
            "grid sizes must be unit fractions, got '{v}'"
        )));
    }
    den.trim()
        .parse()
        .map_err(|_| CliError::Bad(format!("malformed fraction '{v}'")))
}

fn parse_frac(v: &str) -> Result<Frac, CliError> {
    let (num, den) = v
        .split_once('/')
        .ok_or_else(|| CliError::Bad(format!("malformed fraction '{v}' (expected P/Q)")))?;
    let n = num
        .trim()
        .parse()
        .map_err(|_| CliError::Bad(format!("malformed fraction '{v}'")))?;
    let d: i64 = den
        .trim()
        .parse()
        .map_err(|_| CliError::Bad(format!("malformed fraction '{v}'")))?;
    if d <= 0 {
        return Err(CliError::Bad(format!(
            "fraction '{v}' must have a positive denominator"
        )));
    }
    Ok(Frac::new(n, d))
}

fn default_rate(domain: &DomainSpec) -> Frac {
    match domain {
        DomainSpec::Slit => Frac::new(1, 2),
        _ => Frac::new(2, 3),
    }
}

/// Parses argv-style arguments plus an optional `key = value` config file
/// (flags override the file). Empty input yields `CliError::Usage`.
pub fn parse_cli(args: &[String]) -> Result<RunSpec, CliError> {
    if args.is_empty() {
        return Err(CliError::Usage);
    }
    // collect key/value pairs; config file contents come first so that
    // explicit flags override them
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut it = args.iter();
    let mut cli_pairs: Vec<(String, String)> = Vec::new();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::Bad(format!("unknown argument '{arg}'")))?;
        if key == "help" {
            return Err(CliError::Usage);
        }
        let value = it
            .next()
            .ok_or_else(|| CliError::Bad(format!("flag --{key} needs a value")))?;
        if key == "config" {
            let text = std::fs::read_to_string(value)
                .map_err(|e| CliError::Bad(format!("cannot read config {value}: {e}")))?;
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    CliError::Bad(format!("config line '{line}' is not key = value"))
                })?;
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else {
            cli_pairs.push((key.to_string(), value.clone()));
        }
    }
    pairs.extend(cli_pairs);

    let mut domain: Option<DomainSpec> = None;
    let mut b: Option<[f64; 2]> = None;
    let mut mode: Option<SchemeMode> = None;
    let mut coarse_n: Option<u32> = None;
    let mut levels: Option<usize> = None;
    let mut table: Option<u8> = None;
    let mut s: Option<Frac> = None;
    let mut gamma: Option<Frac> = None;
    let mut tol: Option<f64> = None;
    let mut out: Option<PathBuf> = None;
    let mut dump_mesh: Option<PathBuf> = None;
    for (k, v) in &pairs {
        match k.as_str() {
            "domain" => domain = Some(parse_domain(v)?),
            "b" => b = Some(parse_b(v)?),
            "mode" => mode = Some(parse_mode(v)?),
            "H" => coarse_n = Some(parse_unit_fraction(v)?),
            "levels" => {
                levels = Some(
                    v.parse()
                        .map_err(|_| CliError::Bad(format!("bad level count '{v}'")))?,
                )
            }
            "table" => {
                let id: u8 = v
                    .parse()
                    .map_err(|_| CliError::Bad(format!("bad table id '{v}'")))?;
                if !(1..=8).contains(&id) {
                    return Err(CliError::Bad(format!("table id {id} out of range 1..8")));
                }
                table = Some(id);
            }
            "s" => s = Some(parse_frac(v)?),
            "gamma" => gamma = Some(parse_frac(v)?),
            "tol" => {
                tol = Some(
                    v.parse()
                        .map_err(|_| CliError::Bad(format!("bad tolerance '{v}'")))?,
                )
            }
            "out" => out = Some(PathBuf::from(v)),
            "dump-mesh" => dump_mesh = Some(PathBuf::from(v)),
            other => return Err(CliError::Bad(format!("unknown flag '--{other}'"))),
        }
    }

    if let Some(id) = table {
        let fix = fixture(id);
        if let Some(d) = domain {
            if d != fix.domain {
                return Err(CliError::Bad(format!(
                    "--domain contradicts table {id} (which uses {:?})",
                    fix.domain
                )));
            }
        }
        if let Some(bv) = b {
            if bv != fix.b {
                return Err(CliError::Bad(format!(
                    "--b contradicts table {id} (which uses {:?})",
                    fix.b
                )));
            }
        }
        if let Some(m) = mode {
            if m != fix.mode {
                return Err(CliError::Bad(format!(
                    "--mode contradicts table {id} (which uses {:?})",
                    fix.mode
                )));
            }
        }
        if coarse_n.is_some() || levels.is_some() {
            return Err(CliError::Bad(
                "--H/--levels cannot be combined with --table (rows are fixed)".into(),
            ));
        }
        let rows = fix
            .rows
            .iter()
            .map(|r| {
                coarse_n_for(&fix.domain, r.dof_h).map(|n| RowPlan {
                    coarse_n: n,
                    levels: r.levels.len(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let domain = fix.domain;
        return Ok(RunSpec {
            domain,
            b: fix.b,
            mode: fix.mode,
            s: s.unwrap_or_else(|| default_rate(&domain)),
            gamma: gamma.unwrap_or_else(|| default_rate(&domain)),
            rows,
            table: Some(id),
            out,
            tol: tol.unwrap_or(5e-3),
            dump_mesh,
        });
    }

    let domain = domain.unwrap_or(DomainSpec::LShape);
    let mode = mode.unwrap_or(SchemeMode::Multilevel);
    let levels = levels.unwrap_or(match mode {
        SchemeMode::TwoGrid => 0,
        SchemeMode::ThreeLevel => 1,
        _ => 3,
    });
    Ok(RunSpec {
        domain,
        b: b.unwrap_or([0.0, 3.0]),
        mode,
        s: s.unwrap_or_else(|| default_rate(&domain)),
        gamma: gamma.unwrap_or_else(|| default_rate(&domain)),
        rows: vec![RowPlan {
            coarse_n: coarse_n.unwrap_or(16),
            levels,
        }],
        table: None,
        out,
        tol: tol.unwrap_or(5e-3),
        dump_mesh,
    })
}

fn coarse_n_for(domain: &DomainSpec, dof_h: usize) -> Result<u32, CliError> {
    for p in 1..=10u32 {
        let n = 1u32 << p;
        if unknowns_for(domain.region(), 1.0 / n as f64).is_ok_and(|u| u == dof_h) {
            return Ok(n);
        }
    }
    Err(CliError::Bad(format!(
        "no dyadic grid has {dof_h} unknowns on {domain:?}"
    )))
}

/// Builds the scheme configuration for one row of a run spec.
pub fn build_config(spec: &RunSpec, row: &RowPlan) -> LdcResult<SchemeConfig> {
    let planned_levels = row.levels.max(1);
    let mut cfg = match spec.mode {
        SchemeMode::Parallel => plan_parallel_schedule(
            spec.domain,
            row.coarse_n,
            planned_levels,
            spec.s,
            spec.gamma,
            1,
            None,
        )?,
        _ => plan_schedule(
            spec.domain,
            row.coarse_n,
            planned_levels,
            spec.s,
            spec.gamma,
            1,
            None,
        )?,
    };
    cfg.mode = spec.mode;
    if spec.mode == SchemeMode::TwoGrid {
        cfg.levels = 0;
        cfg.primal_subdomains.clear();
        cfg.adjoint_subdomains.clear();
    } else {
        cfg.levels = row.levels;
        cfg.primal_subdomains.truncate(row.levels);
        cfg.adjoint_subdomains.truncate(row.levels);
    }
    cfg.coeffs = ProblemCoeffs::convection_diffusion(spec.b);
    cfg.lambda_ref = reference_lambda(&spec.domain, spec.b);
    cfg.validate()?;
    Ok(cfg)
}

/// Runs every row of the run plan in order.
pub fn run_spec(spec: &RunSpec) -> LdcResult<Vec<RunReport>> {
    spec.rows
        .iter()
        .map(|row| ldc::run(&build_config(spec, row)?))
        .collect()
}

// ---------------------------------------------------------------------------
// fixtures

/// One benchmark table transcribed verbatim.
#[derive(Debug, Clone)]
pub struct FixtureTable {
    pub id: u8,
    pub domain: DomainSpec,
    pub b: [f64; 2],
    pub mode: SchemeMode,
    pub rows: Vec<FixtureRow>,
}

#[derive(Debug, Clone)]
pub struct FixtureRow {
    pub dof_h: usize,
    pub dof_w: usize,
    pub lambda_h: f64,
    pub lambda_w: f64,
    /// Populated level cells, in level order.
    pub levels: Vec<f64>,
}

const FIXTURE_TEXTS: [&str; 8] = [
    include_str!("../fixtures/table1.txt"),
    include_str!("../fixtures/table2.txt"),
    include_str!("../fixtures/table3.txt"),
    include_str!("../fixtures/table4.txt"),
    include_str!("../fixtures/table5.txt"),
    include_str!("../fixtures/table6.txt"),
    include_str!("../fixtures/table7.txt"),
    include_str!("../fixtures/table8.txt"),
];

fn parse_fixture(text: &str) -> FixtureTable {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().expect("fixture header");
    let mut parts = header.split_whitespace();
    assert_eq!(parts.next(), Some("table"));
    let id: u8 = parts.next().unwrap().parse().unwrap();
    let domain = match parts.next().unwrap() {
        "lshape" => DomainSpec::LShape,
        "slit" => DomainSpec::Slit,
        other => panic!("fixture domain {other}"),
    };
    let b = {
        let (x, y) = parts.next().unwrap().split_once(',').unwrap();
        [x.parse().unwrap(), y.parse().unwrap()]
    };
    let mode = match parts.next().unwrap() {
        "multilevel" => SchemeMode::Multilevel,
        "parallel" => SchemeMode::Parallel,
        other => panic!("fixture mode {other}"),
    };
    let rows = lines
        .map(|line| {
            let cells: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(cells.len(), 10, "fixture row '{line}'");
            FixtureRow {
                dof_h: cells[0].parse().unwrap(),
                dof_w: cells[1].parse().unwrap(),
                lambda_h: cells[2].parse().unwrap(),
                lambda_w: cells[3].parse().unwrap(),
                levels: cells[4..]
                    .iter()
                    .take_while(|c| **c != "-")
                    .map(|c| c.parse().unwrap())
                    .collect(),
            }
        })
        .collect();
    FixtureTable {
        id,
        domain,
        b,
        mode,
        rows,
    }
}

/// The table with the given id (1..=8).
pub fn fixture(id: u8) -> &'static FixtureTable {
    static ALL: OnceLock<Vec<FixtureTable>> = OnceLock::new();
    let all = ALL.get_or_init(|| FIXTURE_TEXTS.iter().map(|t| parse_fixture(t)).collect());
    &all[id as usize - 1]
}

// ---------------------------------------------------------------------------
// CSV

pub const CSV_HEADER: &str =
    "DOF_H,DOF_w,lambda_H,lambda_w,lambda_wh1,lambda_wh2,lambda_wh3,lambda_wh4,lambda_wh5,lambda_wh6";

/// Serializes reports with 5 decimal places (the tables' precision);
/// absent level cells stay empty.
pub fn csv_string(reports: &[RunReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{:.5},{:.5}",
            r.dof_h, r.dof_w, r.lambda_h, r.lambda_w
        ));
        for k in 0..6 {
            out.push(',');
            if let Some(l) = r.levels.get(k) {
                out.push_str(&format!("{:.5}", l.lambda));
            }
        }
        out.push('\n');
    }
    out
}

pub fn emit_csv(reports: &[RunReport], path: &std::path::Path) -> std::io::Result<()> {
    std::fs::write(path, csv_string(reports))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub dof_h: usize,
    pub dof_w: usize,
    pub lambda_h: f64,
    pub lambda_w: f64,
    pub levels: Vec<f64>,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(format!("bad CSV header: {other:?}")),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 10 {
                return Err(format!("bad CSV row '{line}'"));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("{e} in '{line}'"));
            Ok(CsvRow {
                dof_h: cells[0].parse().map_err(|e| format!("{e}"))?,
                dof_w: cells[1].parse().map_err(|e| format!("{e}"))?,
                lambda_h: parse(cells[2])?,
                lambda_w: parse(cells[3])?,
                levels: cells[4..]
                    .iter()
                    .filter(|c| !c.is_empty())
                    .map(|c| parse(c))
                    .collect::<Result<_, _>>()?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// fixture comparison

#[derive(Debug)]
pub struct Comparison {
    pub pass: bool,
    pub max_diff: f64,
    /// Human-readable description of each failing cell.
    pub failures: Vec<String>,
}

/// Per-cell comparison: eigenvalues within `tol` absolute, DOF columns
/// exact. The shapes must match.
pub fn compare_fixture(
    reports: &[RunReport],
    fixture: &FixtureTable,
    tol: f64,
) -> Result<Comparison, String> {
    if reports.len() != fixture.rows.len() {
        return Err(format!(
            "shape mismatch: {} computed rows vs {} fixture rows",
            reports.len(),
            fixture.rows.len()
        ));
    }
    let mut failures = Vec::new();
    let mut max_diff = 0.0f64;
    for (i, (rep, want)) in reports.iter().zip(&fixture.rows).enumerate() {
        if rep.levels.len() != want.levels.len() {
            return Err(format!(
                "shape mismatch in row {}: {} computed levels vs {} fixture cells",
                i + 1,
                rep.levels.len(),
                want.levels.len()
            ));
        }
        if rep.dof_h != want.dof_h {
            failures.push(format!(
                "row {} DOF_H: {} != {}",
                i + 1,
                rep.dof_h,
                want.dof_h
            ));
        }
        if rep.dof_w != want.dof_w {
            failures.push(format!(
                "row {} DOF_w: {} != {}",
                i + 1,
                rep.dof_w,
                want.dof_w
            ));
        }
        let mut cells = vec![("lambda_H".to_string(), rep.lambda_h, want.lambda_h)];
        cells.push(("lambda_w".to_string(), rep.lambda_w, want.lambda_w));
        for (k, (lv, fv)) in rep.levels.iter().zip(&want.levels).enumerate() {
            cells.push((format!("lambda_wh{}", k + 1), lv.lambda, *fv));
        }
        for (name, got, want_v) in cells {
            let d = (got - want_v).abs();
            max_diff = max_diff.max(d);
            if d > tol {
                failures.push(format!(
                    "row {} {name}: computed {got:.5}, fixture {want_v:.5} (|diff| = {d:.2e})",
                    i + 1
                ));
            }
        }
    }
    Ok(Comparison {
        pass: failures.is_empty(),
        max_diff,
        failures,
    })
}
