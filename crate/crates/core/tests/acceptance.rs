//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::SQRT_2;
use std::process::Command;
use std::time::{Duration, Instant};

use hadamard_spectral::eig::{eigen_expansion_residual, PerturbationPath};
use hadamard_spectral::matrix::Matrix;
use hadamard_spectral::perm::{all_perms, Perm};
use hadamard_spectral::verify::{
    check_block_l, check_cycle_lifting, check_dec14b, check_dec15a, check_dec15b,
    check_determinant_section, check_dot_prod, check_eigen_expansion, check_eigh, check_invar_lem,
    check_jan11, check_jen3a, check_offdiag_expansion, pick_block_count, random_partition,
    random_perm, CheckOptions, CheckReport, Jan11Variant, SymFn,
};
use hadamard_spectral::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_031;

struct Outcome {
    pass: bool,
    detail: String,
}

fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Runs `count` reports and summarizes them; the first error or failing
/// report is quoted in the detail line.
fn tally(
    count: usize,
    limit: Option<Duration>,
    mut next: impl FnMut(usize) -> Result<CheckReport>,
) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut min_order = f64::INFINITY;
    let mut failures = 0;
    let mut first = None;
    for i in 0..count {
        match next(i) {
            Ok(r) => {
                worst = worst.max(r.worst_residual());
                if let Some(o) = r.order_estimate {
                    min_order = min_order.min(o);
                }
                if !r.pass {
                    failures += 1;
                    first.get_or_insert_with(|| format!("{} {:?}", r.name, r.params));
                }
            }
            Err(e) => {
                failures += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    let elapsed = start.elapsed();
    let slow = limit.is_some_and(|l| elapsed >= l);
    let mut detail = format!("{count} instances, worst residual {worst:.3e}");
    if min_order.is_finite() {
        detail += &format!(", min order {min_order:.3}");
    }
    detail += &format!(", {:.2}s", elapsed.as_secs_f64());
    if let Some(l) = limit {
        detail += &format!(" (limit {}s)", l.as_secs());
    }
    if let Some(f) = first {
        detail += &format!("; {failures} failed, first: {f}");
    }
    Outcome {
        pass: failures == 0 && !slow,
        detail,
    }
}

fn both(a: Outcome, b: Outcome) -> Outcome {
    Outcome {
        pass: a.pass && b.pass,
        detail: format!("{} | {}", a.detail, b.detail),
    }
}

/// Cycles through `n ∈ {3, 4}`, `k ∈ {1, 2, 3}`.
fn grid_point(i: usize) -> (usize, usize) {
    (3 + i % 2, 1 + (i / 2) % 3)
}

fn criterion_1() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(1);
    tally(1000, Some(Duration::from_secs(5)), |i| {
        check_eigh(&mut r, 2 + i % 7, &opts)
    })
}

fn criterion_2() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(2);
    let points: Vec<(usize, usize)> = [3, 4]
        .iter()
        .flat_map(|&n| (1..=3).map(move |k| (n, k)))
        .collect();
    // each report covers every σ of its k
    tally(100 * points.len(), Some(Duration::from_secs(30)), |i| {
        let (n, k) = points[i / 100];
        check_jen3a(&mut r, n, k, &opts)
    })
}

fn criterion_3() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(3);
    // k = 1 exercises the fixed branch only; k ≥ 2 reaches both
    tally(200, None, |i| {
        let (n, k) = grid_point(i);
        check_dot_prod(&mut r, n, k.max(2), &opts)
    })
}

fn criterion_4() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(4);
    tally(100, None, |i| {
        let (n, k) = grid_point(i);
        let p = random_partition(n, pick_block_count(n, &mut r), &opts, &mut r)?;
        check_invar_lem(&mut r, k, &p, &opts)
    })
}

fn criterion_5() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(5);
    let random = tally(50, None, |i| {
        let n = 2 + i % 5;
        let p = random_partition(n, pick_block_count(n, &mut r), &opts, &mut r)?;
        check_eigen_expansion(&mut r, &p, &opts)
    });
    let m = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).scale(1.0 / SQRT_2);
    let closed = PerturbationPath::new(vec![2.0, 1.0], m, opts.scales.clone()).and_then(|path| {
        opts.scales
            .iter()
            .map(|&t| Ok((eigen_expansion_residual(&path, t)? / (t * t / 2.0) - 1.0).abs()))
            .collect::<Result<Vec<f64>>>()
    });
    let closed = match closed {
        Ok(dev) => {
            let worst = dev.iter().fold(0.0, |m: f64, &d| m.max(d));
            Outcome {
                pass: worst < 0.1,
                detail: format!("n=2 closed form: max relative deviation from t²/2 {worst:.3e}"),
            }
        }
        Err(e) => Outcome {
            pass: false,
            detail: format!("n=2 closed form: {e}"),
        },
    };
    both(random, closed)
}

fn criterion_6() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(6);
    tally(50, None, |_| {
        let p = random_partition(4, pick_block_count(4, &mut r), &opts, &mut r)?;
        check_offdiag_expansion(&mut r, &p, &opts)
    })
}

fn criterion_7() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(7);
    tally(50, None, |i| {
        let (n, k) = grid_point(i);
        let p = random_partition(n, pick_block_count(n, &mut r), &opts, &mut r)?;
        let sigmas: Vec<Perm> = if k <= 2 {
            all_perms(k)
        } else {
            vec![random_perm(k, &mut r), random_perm(k, &mut r)]
        };
        check_dec14b(&mut r, k, &p, &sigmas, &opts)
    })
}

type InstanceRun =
    dyn FnMut(&mut ChaCha8Rng, usize, &hadamard_spectral::BlockPartition) -> Result<CheckReport>;

fn criterion_8() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(8);
    let mut runs: Vec<(String, Box<InstanceRun>)> = Vec::new();
    for part in 1..=2u8 {
        let o = opts.clone();
        runs.push((
            format!("dec15a part {part}"),
            Box::new(move |r, k, p| check_dec15a(r, part, k, p, &o)),
        ));
    }
    for v in Jan11Variant::ALL {
        let o = opts.clone();
        runs.push((
            format!("jan11 {}", v.as_str()),
            Box::new(move |r, k, p| check_jan11(r, v, k, p, &o)),
        ));
    }
    {
        let o = opts.clone();
        runs.push((
            "cycle lifting".into(),
            Box::new(move |r, k, p| check_cycle_lifting(r, k, p, &o)),
        ));
    }
    let mut pass = true;
    let mut details = Vec::new();
    for (label, run) in &mut runs {
        let out = tally(100, None, |i| {
            let (n, k) = grid_point(i);
            let p = random_partition(n, pick_block_count(n, &mut r), &opts, &mut r)?;
            run(&mut r, k, &p)
        });
        pass &= out.pass;
        details.push(format!("{label}: {}", out.detail));
    }
    Outcome {
        pass,
        detail: details.join(" | "),
    }
}

fn criterion_9() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(9);
    let mut pass = true;
    let mut details = Vec::new();
    for part in 1..=3u8 {
        let out = tally(100, None, |i| {
            let (n, k) = grid_point(i);
            let p = random_partition(n, pick_block_count(n, &mut r), &opts, &mut r)?;
            check_dec15b(&mut r, part, k, &p, &opts)
        });
        pass &= out.pass;
        details.push(format!("part {part}: {}", out.detail));
    }
    Outcome {
        pass,
        detail: details.join(" | "),
    }
}

fn criterion_10() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(10);
    // every report draws 200 multi-index pairs per family
    tally(30, None, |i| {
        let s = 2 + i % 2;
        let n = 2 + (i / 2) % 3;
        let p = random_partition(n, pick_block_count(n, &mut r), &opts, &mut r)?;
        check_determinant_section(&mut r, s, &p, &opts)
    })
}

fn criterion_11() -> Outcome {
    let opts = CheckOptions::default();
    let mut r = rng(11);
    tally(56, None, |i| {
        let n = 2 + (i / 4) % 7;
        let f = SymFn::ALL[i % 2];
        let s = 1 + (i / 2) % 2;
        let p = random_partition(n, pick_block_count(n, &mut r), &opts, &mut r)?;
        check_block_l(f, p.mu(), s, &opts)
    })
}

fn criterion_12() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("tempdir: {e}"),
            }
        }
    };
    let mut outputs = Vec::new();
    let start = Instant::now();
    for run in 0..2 {
        let path = dir.path().join(format!("run{run}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_hadamard-spectral"))
            .args(["suite", "run", "--seed", &SEED.to_string(), "--json"])
            .arg(&path)
            .env_remove("SUITE_SEED")
            .output();
        let code = match status {
            Ok(o) => o.status.code(),
            Err(e) => {
                return Outcome {
                    pass: false,
                    detail: format!("spawn: {e}"),
                }
            }
        };
        if code != Some(0) {
            return Outcome {
                pass: false,
                detail: format!("run {run} exited with {code:?}"),
            };
        }
        match std::fs::read(&path) {
            Ok(bytes) => outputs.push(bytes),
            Err(e) => {
                return Outcome {
                    pass: false,
                    detail: format!("read {}: {e}", path.display()),
                }
            }
        }
    }
    let per_run = start.elapsed().as_secs_f64() / 2.0;
    let identical = outputs[0] == outputs[1];
    Outcome {
        pass: identical && per_run < 120.0,
        detail: format!(
            "exit 0 twice, {:.2}s per run (limit 120s), JSON {}",
            per_run,
            if identical {
                "byte-identical"
            } else {
                "differs between runs"
            }
        ),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 12] = [
        ("eigensolver reconstruction and orthogonality", criterion_1),
        ("jen3a over all σ", criterion_2),
        ("dot-prod closed form vs brute force", criterion_3),
        ("invarLem conjugation invariance", criterion_4),
        ("eigenvalue expansion remainder order", criterion_5),
        ("off-diagonal projector expansion order", criterion_6),
        ("dec14b difference quotient order", criterion_7),
        ("dec15a, jan11a/abc and cycle lifting", criterion_8),
        ("dec15b parts 1-3", criterion_9),
        ("determinant family and sum tensor", criterion_10),
        (
            "block invariance of symmetric function derivatives",
            criterion_11,
        ),
        (
            "default suite runtime, exit code and determinism",
            criterion_12,
        ),
    ];
    let mut failed = 0;
    for (i, (label, run)) in criteria.iter().enumerate() {
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {label}: {}",
            if out.pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
