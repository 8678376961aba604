use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use delpezzo::analytics::{asymptotic_report, geometric_grid, report_csv, run_grid};
use delpezzo::arith::{lemma_pr1_residual, log_growth_exponent, CongruenceSpec};
use delpezzo::checks::{odd_phi_star, run_all, Scale};
use delpezzo::montecarlo::check_volume_identity;
use delpezzo::oracle::{count_exhaustive, count_projection, exhaustive_points, projection_points, Method};
use delpezzo::peyre::{assemble_c, DEFAULT_SAMPLES, DEFAULT_TRUNCATION};
use delpezzo::torsor::{count_torsor, torsor_points, verify_bijection};
use delpezzo::{ProjectivePoint, SurfaceId, SurfaceSpec};

#[derive(Parser)]
#[command(name = "delpezzo", version, about = "Rational point counts and Peyre constants for three singular del Pezzo surfaces")]
struct Cli {
    /// Worker count; falls back to DELPEZZO_SHARDS, then to the number of cores.
    #[arg(long, global = true, env = "DELPEZZO_SHARDS")]
    shards: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count points of height at most B off the lines.
    Count {
        #[arg(long)]
        surface: SurfaceId,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        bound: u64,
        /// Write the points, one per line, to this file.
        #[arg(long)]
        dump_points: Option<PathBuf>,
        /// Write the accepted torsor tuples, one per line; torsor method only.
        #[arg(long)]
        dump_torsor: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Compare the torsor image with a direct search.
    VerifyBijection {
        #[arg(long)]
        surface: SurfaceId,
        #[arg(long)]
        bound: u64,
        #[arg(long, default_value = "projection")]
        oracle: Method,
    },
    /// Assemble the predicted leading constant.
    Peyre {
        #[arg(long)]
        surface: SurfaceId,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
        truncation: u64,
    },
    /// Compare the torsor-side volume with α·ω_∞·B(log B)^r.
    CheckVolume {
        #[arg(long)]
        surface: SurfaceId,
        #[arg(long)]
        bound: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Count on a geometric grid and fit N(B)/B against a polynomial in log B.
    Fit {
        #[arg(long)]
        surface: SurfaceId,
        #[arg(long)]
        bmin: u64,
        #[arg(long)]
        bmax: u64,
        #[arg(long, default_value_t = 16)]
        points_per_decade: u32,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        tolerance: f64,
        /// Also write B, count, prediction, ratio as CSV to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Residual series of a congruence-weighted multiplicative sum, as CSV.
    CheckSection2 {
        #[arg(long, default_value_t = 1_000_000)]
        tmax: u64,
        #[arg(long, default_value_t = 20)]
        points_per_decade: u32,
    },
    /// Run the verification suite.
    Selftest {
        /// Use the full acceptance scale instead of the quick one.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: &'static str,
    params: BTreeMap<&'static str, String>,
    version: &'static str,
    seed: Option<u64>,
    shards: usize,
    wall_time: f64,
    output_sha256: String,
}

struct Outcome {
    stdout: String,
    mismatch: bool,
}

fn ok(stdout: String) -> Result<Outcome, String> {
    Ok(Outcome { stdout, mismatch: false })
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| e.to_string())
}

fn line(v: &[i64]) -> String {
    let mut s = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    s.push('\n');
    s
}

fn dump(path: &PathBuf, points: &[ProjectivePoint]) -> Result<(), String> {
    let text: String = points.iter().map(|p| line(p.coords())).collect();
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(command: &Command, shards: usize) -> Result<Outcome, String> {
    match command {
        Command::Count { surface, method, bound, dump_points, dump_torsor, json: as_json } => {
            if dump_torsor.is_some() && *method != Method::Torsor {
                return Err("--dump-torsor requires --method torsor".into());
            }
            let s = SurfaceSpec::new(*surface);
            let mut rec = match method {
                Method::Exhaustive => count_exhaustive(&s, *bound).map_err(|e| e.to_string())?,
                Method::Projection => count_projection(&s, *bound, shards).map_err(|e| e.to_string())?,
                Method::Torsor => count_torsor(*surface, *bound, shards).map_err(|e| e.to_string())?,
            };
            eprintln!("{surface} {method} B={bound}: {} points in {:.3}s", rec.count, rec.elapsed.unwrap_or(0.0));
            rec.elapsed = None;
            if let Some(path) = dump_points {
                let points = match method {
                    Method::Exhaustive => exhaustive_points(&s, *bound).map_err(|e| e.to_string())?,
                    Method::Projection => projection_points(&s, *bound, shards).map_err(|e| e.to_string())?,
                    Method::Torsor => {
                        let mut v = torsor_points(*surface, *bound, shards)
                            .map_err(|e| e.to_string())?
                            .into_iter()
                            .map(|(_, x)| ProjectivePoint::normalize(&x).map_err(|e| e.to_string()))
                            .collect::<Result<Vec<_>, _>>()?;
                        v.sort();
                        v
                    }
                };
                dump(path, &points)?;
            }
            if let Some(path) = dump_torsor {
                let tuples = torsor_points(*surface, *bound, shards).map_err(|e| e.to_string())?;
                let body: String = tuples.iter().map(|(eta, _)| line(eta)).collect();
                std::fs::write(path, body).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            if *as_json {
                ok(json(&rec)?)
            } else {
                ok(format!("{} {} {} {}\n", rec.surface, rec.method, rec.bound, rec.count))
            }
        }
        Command::VerifyBijection { surface, bound, oracle } => {
            if *oracle == Method::Torsor {
                return Err("the oracle must be exhaustive or projection".into());
            }
            let r = verify_bijection(*surface, *bound, *oracle, shards).map_err(|e| e.to_string())?;
            let diff = r.missing.len() + r.extra.len() + r.duplicates.len() + r.non_primitive as usize;
            eprintln!("equal={}, diff={diff}", r.ok());
            Ok(Outcome { stdout: json(&r)?, mismatch: !r.ok() })
        }
        Command::Peyre { surface, samples, seed, truncation } => {
            let b = assemble_c(*surface, *samples, *seed, *truncation, shards).map_err(|e| e.to_string())?;
            eprintln!("{surface}: c = {:.6e} ± {:.1e}", b.c_total, b.c_stderr);
            ok(json(&b)?)
        }
        Command::CheckVolume { surface, bound, samples, seed } => {
            let r = check_volume_identity(*surface, *bound, *samples, *seed, shards).map_err(|e| e.to_string())?;
            eprintln!("{surface} B={bound}: z = {:+.3}", r.z_score);
            Ok(Outcome { stdout: json(&r)?, mismatch: r.z_score.is_nan() || r.z_score.abs() > 3.0 })
        }
        Command::Fit { surface, bmin, bmax, points_per_decade, samples, seed, tolerance, csv } => {
            let bounds = geometric_grid(*bmin, *bmax, *points_per_decade).map_err(|e| e.to_string())?;
            let grid: Vec<(u64, u64)> = run_grid(*surface, &bounds, Method::Torsor, shards)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|r| (r.bound, r.count))
                .collect();
            let p = assemble_c(*surface, *samples, *seed, DEFAULT_TRUNCATION, shards).map_err(|e| e.to_string())?;
            let report = asymptotic_report(&grid, &p, *tolerance).map_err(|e| e.to_string())?;
            if let Some(path) = csv {
                std::fs::write(path, report_csv(&report)).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            eprintln!(
                "{surface}: leading {:.4e} vs c {:.4e} ({:+.1}%), diagnosis {:?}",
                report.leading_coeff,
                report.predicted_c,
                100.0 * report.relative_deviation,
                report.diagnosis
            );
            ok(json(&report)?)
        }
        Command::CheckSection2 { tmax, points_per_decade } => {
            let f = odd_phi_star();
            let spec = CongruenceSpec::new(5, 1, 1, 2).map_err(|e| e.to_string())?;
            let ints: Vec<f64> = (1..=*tmax).map(|n| n as f64).collect();
            let series = lemma_pr1_residual(&f, &spec, &ints, DEFAULT_TRUNCATION).map_err(|e| e.to_string())?;
            let exponent = log_growth_exponent(&series, 100.0).map_err(|e| e.to_string())?;
            let rows = geometric_grid(1, *tmax, *points_per_decade).map_err(|e| e.to_string())?;
            let mut out = String::from("t,M(t),main,residual\n");
            for t in rows {
                let r = &series[t as usize - 1];
                out.push_str(&format!("{},{},{},{}\n", r.t, r.sum, r.main, r.residual));
            }
            let limit = f.c2 + 0.5;
            eprintln!("q=5, m=2: log-growth exponent {exponent:.3} (limit {limit})");
            Ok(Outcome { stdout: out, mismatch: exponent > limit })
        }
        Command::Selftest { full } => {
            let scale = if *full { Scale::acceptance(shards) } else { Scale::desk(shards) };
            let outcomes = run_all(&scale, |o| eprintln!("{}", o.line()));
            let mismatch = outcomes.iter().any(|o| !o.acceptable());
            Ok(Outcome { stdout: json(&outcomes)?, mismatch })
        }
    }
}

fn describe(command: &Command) -> (&'static str, BTreeMap<&'static str, String>, Option<u64>) {
    let mut p = BTreeMap::new();
    let mut seed = None;
    let name = match command {
        Command::Count { surface, method, bound, dump_points, dump_torsor, json } => {
            p.insert("surface", surface.to_string());
            p.insert("method", method.to_string());
            p.insert("bound", bound.to_string());
            p.insert("json", json.to_string());
            if let Some(d) = dump_points {
                p.insert("dump_points", d.display().to_string());
            }
            if let Some(d) = dump_torsor {
                p.insert("dump_torsor", d.display().to_string());
            }
            "count"
        }
        Command::VerifyBijection { surface, bound, oracle } => {
            p.insert("surface", surface.to_string());
            p.insert("bound", bound.to_string());
            p.insert("oracle", oracle.to_string());
            "verify-bijection"
        }
        Command::Peyre { surface, samples, seed: s, truncation } => {
            p.insert("surface", surface.to_string());
            p.insert("samples", samples.to_string());
            p.insert("truncation", truncation.to_string());
            seed = Some(*s);
            "peyre"
        }
        Command::CheckVolume { surface, bound, samples, seed: s } => {
            p.insert("surface", surface.to_string());
            p.insert("bound", bound.to_string());
            p.insert("samples", samples.to_string());
            seed = Some(*s);
            "check-volume"
        }
        Command::Fit { surface, bmin, bmax, points_per_decade, samples, seed: s, tolerance, csv } => {
            p.insert("surface", surface.to_string());
            p.insert("bmin", bmin.to_string());
            p.insert("bmax", bmax.to_string());
            p.insert("points_per_decade", points_per_decade.to_string());
            p.insert("samples", samples.to_string());
            p.insert("tolerance", tolerance.to_string());
            if let Some(c) = csv {
                p.insert("csv", c.display().to_string());
            }
            seed = Some(*s);
            "fit"
        }
        Command::CheckSection2 { tmax, points_per_decade } => {
            p.insert("tmax", tmax.to_string());
            p.insert("points_per_decade", points_per_decade.to_string());
            "check-section2"
        }
        Command::Selftest { full } => {
            p.insert("full", full.to_string());
            seed = Some(0);
            "selftest"
        }
    };
    (name, p, seed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let shards = match cli.shards {
        Some(0) => {
            eprintln!("error: --shards must be positive");
            return ExitCode::from(2);
        }
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let start = Instant::now();
    let (subcommand, params, seed) = describe(&cli.command);
    let outcome = match run(&cli.command, shards) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    print!("{}", outcome.stdout);
    let manifest = RunManifest {
        subcommand,
        params,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        shards,
        wall_time: start.elapsed().as_secs_f64(),
        output_sha256: format!("{:x}", Sha256::digest(outcome.stdout.as_bytes())),
    };
    if let Ok(m) = serde_json::to_string(&manifest) {
        eprintln!("{m}");
    }
    if outcome.mismatch {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
