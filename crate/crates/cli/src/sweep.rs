//! Grid evaluation.
//!
//! A sweep is split into independent work units that run on a rayon pool.
//! Temperature sweeps of the exact and GRWA models share one diagonalisation
//! per curve, so each curve is a unit; everything else is one unit per grid
//! point. Results are gathered in unit order and sorted by grid value before
//! emission, so the output does not depend on the number of workers.

use equiprobe_core::dicke::{self, DickeParams};
use equiprobe_core::grwa::{self, GrwaEngine, GrwaOptions};
use equiprobe_core::operators::ProbeParams;
use equiprobe_core::thermal::{self, converge_nmax, ConvergenceOptions, SnrEngine, Spectrum};
use equiprobe_core::{baseline, Error, SectorMode, SnrOptions};
use rayon::prelude::*;

use crate::config::{Axis, Model, Point, Quantity, SweepConfig};
use crate::error::{CliError, Result};
use crate::output::{curve_label, Curve, Failure, Rows, SeriesValue, SnrRow, SweepOutput, ValueRow};

#[derive(Debug, Clone, Copy)]
enum Unit {
    Curve(usize),
    Point(usize, usize),
}

#[derive(Debug, Default)]
struct Piece {
    snr: Vec<SnrRow>,
    value: Vec<ValueRow>,
    failures: Vec<(f64, Error)>,
}

fn rel_change(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn probe(point: &Point) -> std::result::Result<ProbeParams, Error> {
    ProbeParams::new(point.n_spins, point.epsilon, 1.0, point.g)
}

fn snr_options(cfg: &SweepConfig) -> SnrOptions {
    SnrOptions {
        fd_step: cfg.tol.fd_step,
        sectors: cfg.sector,
        variance: cfg.variance,
        delta: cfg.delta,
        dimension_cap: cfg.tol.dimension_cap,
    }
}

fn grwa_options(cfg: &SweepConfig) -> GrwaOptions {
    GrwaOptions { fd_step: cfg.tol.fd_step, sectors: cfg.sector, variance: cfg.variance, delta: cfg.delta }
}

fn convergence(cfg: &SweepConfig) -> ConvergenceOptions {
    ConvergenceOptions {
        start: cfg.tol.nmax_start,
        cap: cfg.tol.nmax_cap,
        ln_z_tol: cfg.tol.ln_z_tol,
        obs_tol: cfg.tol.obs_tol,
    }
}

fn finite(x: f64, what: &str) -> std::result::Result<f64, Error> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Domain(format!("{what} is not finite")))
    }
}

fn failed_snr_row(grid_value: f64, point: &Point) -> SnrRow {
    let beta = point.beta_omega.unwrap_or(f64::NAN);
    SnrRow {
        grid_value,
        beta_omega: beta,
        snr: None,
        snr_weak: baseline::weak_snr(point.n_spins, point.epsilon, beta).snr,
        delta_snr: None,
        n_max: None,
        converged: false,
        phase: None,
        eta: None,
    }
}

fn failed_value_row(grid_value: f64, point: &Point, index: usize) -> ValueRow {
    ValueRow {
        grid_value,
        beta_omega: point.beta_omega,
        index,
        value: None,
        reference: None,
        n_max: None,
        converged: false,
    }
}

/// Runs every curve of `cfg` on a pool of `jobs` workers (all cores when
/// `None`).
pub fn run_sweep(cfg: &SweepConfig, jobs: Option<usize>) -> Result<SweepOutput> {
    let curves = cfg.curves();
    let grid = &cfg.grid.values;
    // Resolve everything up front so configuration problems surface before
    // any numerics run.
    let points: Vec<Vec<Point>> = curves
        .iter()
        .map(|c| grid.iter().map(|&v| cfg.resolve(c, v)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let per_curve = matches!(cfg.grid.axis, Axis::BetaOmega | Axis::TemperatureMk)
        && matches!(cfg.model, Model::RabiExact | Model::Grwa)
        && matches!(cfg.quantity, Quantity::Snr | Quantity::Jz);
    let units: Vec<Unit> = if per_curve {
        (0..curves.len()).map(Unit::Curve).collect()
    } else {
        (0..curves.len()).flat_map(|c| (0..grid.len()).map(move |g| Unit::Point(c, g))).collect()
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config("--jobs", e.to_string()))?;
    let pieces: Vec<(usize, Piece)> = pool.install(|| {
        units
            .par_iter()
            .map(|&u| match u {
                Unit::Curve(c) => (c, curve_piece(cfg, grid, &points[c])),
                Unit::Point(c, g) => (c, point_piece(cfg, grid[g], &points[c][g])),
            })
            .collect()
    });

    let mut out_curves = Vec::with_capacity(curves.len());
    let mut failures = Vec::new();
    let mut snr_rows: Vec<Vec<SnrRow>> = vec![Vec::new(); curves.len()];
    let mut value_rows: Vec<Vec<ValueRow>> = vec![Vec::new(); curves.len()];
    let labels: Vec<String> = curves
        .iter()
        .map(|c| curve_label(&c.iter().map(|&(axis, value)| SeriesValue { axis, value }).collect::<Vec<_>>()))
        .collect();
    for (c, piece) in pieces {
        snr_rows[c].extend(piece.snr);
        value_rows[c].extend(piece.value);
        for (grid_value, e) in piece.failures {
            let code = CliError::Core(e.clone()).exit_code();
            log::warn!("{} at {} = {grid_value}: {e}", labels[c], cfg.grid.axis.as_str());
            failures.push(Failure { curve: labels[c].clone(), grid_value, message: e.to_string(), exit_code: code });
        }
    }
    for (c, curve) in curves.iter().enumerate() {
        let rows = if matches!(cfg.quantity, Quantity::Snr | Quantity::Asymptote) {
            let mut r = std::mem::take(&mut snr_rows[c]);
            r.sort_by(|a, b| a.grid_value.total_cmp(&b.grid_value));
            Rows::Snr(r)
        } else {
            let mut r = std::mem::take(&mut value_rows[c]);
            r.sort_by(|a, b| a.grid_value.total_cmp(&b.grid_value).then(a.index.cmp(&b.index)));
            Rows::Value(r)
        };
        out_curves.push(Curve {
            label: labels[c].clone(),
            series: curve.iter().map(|&(axis, value)| SeriesValue { axis, value }).collect(),
            rows,
        });
    }
    Ok(SweepOutput {
        schema_version: crate::config::SCHEMA_VERSION,
        figure: cfg.figure.clone(),
        model: cfg.model,
        quantity: cfg.quantity,
        grid_axis: cfg.grid.axis,
        delta: cfg.delta,
        curves: out_curves,
        failures,
    })
}

/// Fock cutoff for a GRWA engine: doubled until `ln Z` and `<Jz>` at the
/// hottest temperature settle.
fn converge_grwa(cfg: &SweepConfig, p: &ProbeParams, beta: f64) -> std::result::Result<(GrwaEngine, usize), Error> {
    let opts = grwa_options(cfg);
    if let Some(n) = cfg.tol.n_max {
        return Ok((GrwaEngine::new(p, n, opts)?, n));
    }
    let mut n = cfg.tol.nmax_start;
    let mut prev = GrwaEngine::new(p, n, opts)?;
    loop {
        let next_n = 2 * n;
        if next_n > cfg.tol.nmax_cap {
            return Err(Error::Truncation(format!("GRWA did not converge up to n_max = {n} (beta = {beta})")));
        }
        let next = GrwaEngine::new(p, next_n, opts)?;
        let a = rel_change(prev.ln_z(beta), next.ln_z(beta), 1e-300);
        let b = rel_change(prev.mean_jz(beta), next.mean_jz(beta), 1e-12);
        if a < cfg.tol.ln_z_tol && b < cfg.tol.obs_tol {
            return Ok((next, next_n));
        }
        prev = next;
        n = next_n;
    }
}

/// One temperature curve of the exact or GRWA model.
fn curve_piece(cfg: &SweepConfig, grid: &[f64], points: &[Point]) -> Piece {
    let mut piece = Piece::default();
    let fail_all = |piece: &mut Piece, e: Error| {
        for (&v, pt) in grid.iter().zip(points) {
            match cfg.quantity {
                Quantity::Snr => piece.snr.push(failed_snr_row(v, pt)),
                _ => piece.value.push(failed_value_row(v, pt, 0)),
            }
            piece.failures.push((v, e.clone()));
        }
    };
    let p = match probe(&points[0]) {
        Ok(p) => p,
        Err(e) => {
            fail_all(&mut piece, e);
            return piece;
        }
    };
    let hottest = points.iter().filter_map(|pt| pt.beta_omega).fold(f64::INFINITY, f64::min);
    match cfg.model {
        Model::RabiExact => {
            let opts = snr_options(cfg);
            let n_max = match cfg.tol.n_max {
                Some(n) => n,
                None => match converge_nmax(&p, hottest, opts, convergence(cfg)) {
                    Ok(c) => c.n_max,
                    Err(e) => {
                        fail_all(&mut piece, e);
                        return piece;
                    }
                },
            };
            let engines = SnrEngine::new(&p, n_max, opts).and_then(|fine| {
                let coarse = SnrEngine::new(&p, (n_max / 2).max(1), opts)?;
                Ok((fine, coarse))
            });
            let (fine, coarse) = match engines {
                Ok(e) => e,
                Err(e) => {
                    fail_all(&mut piece, e);
                    return piece;
                }
            };
            for (&v, pt) in grid.iter().zip(points) {
                let beta = pt.beta_omega.expect("validated");
                match cfg.quantity {
                    Quantity::Snr => {
                        let row = fine.snr(beta).and_then(|d| {
                            let s = finite(d.point.snr, "SNR")?;
                            let check = coarse.snr(beta).map(|c| c.point.snr).unwrap_or(f64::NAN);
                            Ok(SnrRow {
                                grid_value: v,
                                beta_omega: beta,
                                snr: Some(s),
                                snr_weak: d.point.snr_weak,
                                delta_snr: Some(d.point.delta_snr),
                                n_max: Some(n_max),
                                converged: rel_change(s, check, 1e-300) <= cfg.tol.obs_tol,
                                phase: None,
                                eta: None,
                            })
                        });
                        match row {
                            Ok(r) => piece.snr.push(r),
                            Err(e) => {
                                piece.snr.push(failed_snr_row(v, pt));
                                piece.failures.push((v, e));
                            }
                        }
                    }
                    _ => {
                        let m = fine.observables(beta).mean_jz;
                        let check = coarse.observables(beta).mean_jz;
                        piece.value.push(ValueRow {
                            grid_value: v,
                            beta_omega: Some(beta),
                            index: 0,
                            value: Some(m),
                            reference: Some(baseline::weak_snr(p.n_spins, p.epsilon, beta).mean_jz),
                            n_max: Some(n_max),
                            converged: rel_change(m, check, 1e-12) <= cfg.tol.obs_tol,
                        });
                    }
                }
            }
        }
        Model::Grwa => {
            let (engine, n_max) = match converge_grwa(cfg, &p, hottest) {
                Ok(e) => e,
                Err(e) => {
                    fail_all(&mut piece, e);
                    return piece;
                }
            };
            let exact = match cfg.quantity {
                Quantity::Jz => cfg
                    .sector
                    .decomposition(p.n_spins)
                    .and_then(|d| Spectrum::compute(&p, &d, n_max, cfg.tol.dimension_cap))
                    .ok(),
                _ => None,
            };
            for (&v, pt) in grid.iter().zip(points) {
                let beta = pt.beta_omega.expect("validated");
                match cfg.quantity {
                    Quantity::Snr => match engine.snr(beta).and_then(|s| finite(s.snr, "SNR").map(|_| s)) {
                        Ok(s) => piece.snr.push(SnrRow {
                            grid_value: v,
                            beta_omega: beta,
                            snr: Some(s.snr),
                            snr_weak: s.snr_weak,
                            delta_snr: Some(s.delta_snr),
                            n_max: Some(n_max),
                            converged: true,
                            phase: None,
                            eta: None,
                        }),
                        Err(e) => {
                            piece.snr.push(failed_snr_row(v, pt));
                            piece.failures.push((v, e));
                        }
                    },
                    _ => piece.value.push(ValueRow {
                        grid_value: v,
                        beta_omega: Some(beta),
                        index: 0,
                        value: Some(engine.mean_jz(beta)),
                        reference: exact.as_ref().map(|s| s.observables(beta).mean_jz),
                        n_max: Some(n_max),
                        converged: true,
                    }),
                }
            }
        }
        _ => unreachable!("per-curve units only exist for the exact and GRWA models"),
    }
    piece
}

/// Levels of every included sector merged in ascending order.
fn merged_levels(
    p: &ProbeParams,
    sectors: SectorMode,
    n_max: usize,
    count: usize,
    exact: bool,
) -> std::result::Result<Vec<f64>, Error> {
    let decomposition = sectors.decomposition(p.n_spins)?;
    let lambda = if exact { 0.0 } else { grwa::solve_lambda(p.epsilon, p.omega, p.g, grwa::LAMBDA_TOL)?.lambda };
    let mut all = Vec::new();
    for s in &decomposition.sectors {
        if exact {
            all.extend(thermal::exact_levels(p, s.twice_j, n_max, count)?);
        } else {
            all.extend(grwa::block_levels(&grwa::build_grwa_blocks(p, s.twice_j, lambda, n_max)?).into_iter().take(count));
        }
    }
    all.sort_by(|a, b| a.total_cmp(b));
    all.truncate(count);
    Ok(all)
}

/// Doubles the Fock cutoff until every value changes by less than `obs_tol`
/// relative, after discounting an absolute `noise` the values carry anyway.
fn converge_by_doubling<F>(cfg: &SweepConfig, noise: f64, mut f: F) -> std::result::Result<(usize, Vec<f64>), Error>
where
    F: FnMut(usize) -> std::result::Result<Vec<f64>, Error>,
{
    if let Some(n) = cfg.tol.n_max {
        return Ok((n, f(n)?));
    }
    let mut n = cfg.tol.nmax_start;
    let mut prev = f(n)?;
    loop {
        if 2 * n > cfg.tol.nmax_cap {
            return Err(Error::Truncation(format!("no convergence up to n_max = {n}")));
        }
        let next = f(2 * n)?;
        let worst = prev.iter().zip(&next).map(|(a, b)| ((a - b).abs() - noise).max(0.0) / a.abs().max(b.abs()).max(1e-12)).fold(0.0, f64::max);
        if worst < cfg.tol.obs_tol {
            return Ok((2 * n, next));
        }
        prev = next;
        n *= 2;
    }
}

fn point_piece(cfg: &SweepConfig, v: f64, pt: &Point) -> Piece {
    let mut piece = Piece::default();
    let result = match cfg.quantity {
        Quantity::Snr | Quantity::Asymptote => snr_point(cfg, v, pt).map(|r| piece.snr.push(r)),
        _ => value_points(cfg, v, pt).map(|r| piece.value.extend(r)),
    };
    if let Err(e) = result {
        match cfg.quantity {
            Quantity::Snr | Quantity::Asymptote => piece.snr.push(failed_snr_row(v, pt)),
            Quantity::Levels => piece.value.extend((0..cfg.level_count).map(|i| failed_value_row(v, pt, i))),
            _ => piece.value.push(failed_value_row(v, pt, 0)),
        }
        piece.failures.push((v, e));
    }
    piece
}

fn snr_point(cfg: &SweepConfig, v: f64, pt: &Point) -> std::result::Result<SnrRow, Error> {
    let beta = pt.beta_omega.expect("validated");
    let n = pt.n_spins;
    let weak = baseline::weak_snr(n, pt.epsilon, beta).snr;
    let mut row = SnrRow {
        grid_value: v,
        beta_omega: beta,
        snr: None,
        snr_weak: weak,
        delta_snr: None,
        n_max: None,
        converged: true,
        phase: None,
        eta: None,
    };
    let snr = match (cfg.model, cfg.quantity) {
        (Model::Weak, _) => weak,
        (Model::Dicke, _) => {
            let dp = DickeParams::new(pt.epsilon, 1.0, pt.gbar, n)?;
            let (point, sol) = dicke::dicke_snr(&dp, beta)?;
            row.phase = Some(sol.phase.as_str().to_string());
            row.eta = Some(sol.eta);
            point.snr
        }
        (Model::Grwa, Quantity::Asymptote) => {
            let derivs = grwa::ground_energy_derivs(&probe(pt)?)?;
            grwa::asymptotic_snr(n, &derivs, beta)?
        }
        (Model::RabiExact, _) => {
            let p = probe(pt)?;
            let opts = snr_options(cfg);
            match cfg.tol.n_max {
                Some(n_max) => {
                    let fine = SnrEngine::new(&p, n_max, opts)?.snr(beta)?.point.snr;
                    let coarse = SnrEngine::new(&p, (n_max / 2).max(1), opts)?.snr(beta)?.point.snr;
                    row.n_max = Some(n_max);
                    row.converged = rel_change(fine, coarse, 1e-300) <= cfg.tol.obs_tol;
                    fine
                }
                None => {
                    let c = converge_nmax(&p, beta, opts, convergence(cfg))?;
                    row.n_max = Some(c.n_max);
                    c.detail.point.snr
                }
            }
        }
        (Model::Grwa, _) => {
            let (engine, n_max) = converge_grwa(cfg, &probe(pt)?, beta)?;
            row.n_max = Some(n_max);
            engine.snr(beta)?.snr
        }
    };
    let snr = finite(snr, "SNR")?;
    row.snr = Some(snr);
    row.delta_snr = Some(cfg.delta.apply(snr, weak, n));
    Ok(row)
}

fn value_points(cfg: &SweepConfig, v: f64, pt: &Point) -> std::result::Result<Vec<ValueRow>, Error> {
    let row = |index: usize, value: f64, reference: Option<f64>, n_max: Option<usize>| ValueRow {
        grid_value: v,
        beta_omega: pt.beta_omega,
        index,
        value: Some(value),
        reference,
        n_max,
        converged: true,
    };
    match cfg.quantity {
        Quantity::Jz => {
            let beta = pt.beta_omega.expect("validated");
            let weak = baseline::weak_snr(pt.n_spins, pt.epsilon, beta).mean_jz;
            Ok(vec![match cfg.model {
                Model::Weak => row(0, weak, None, None),
                Model::Dicke => {
                    let dp = DickeParams::new(pt.epsilon, 1.0, pt.gbar, pt.n_spins)?;
                    row(0, dicke::dicke_observables(&dp, beta)?.mean_jz, Some(weak), None)
                }
                Model::RabiExact => {
                    let c = converge_nmax(&probe(pt)?, beta, snr_options(cfg), convergence(cfg))?;
                    row(0, c.detail.observables.mean_jz, Some(weak), Some(c.n_max))
                }
                Model::Grwa => {
                    let p = probe(pt)?;
                    let (engine, n_max) = converge_grwa(cfg, &p, beta)?;
                    let exact = thermal::thermal_observables(&p, beta, n_max, cfg.sector)?.mean_jz;
                    row(0, engine.mean_jz(beta), Some(exact), Some(n_max))
                }
            }])
        }
        Quantity::Levels => {
            let p = probe(pt)?;
            let count = cfg.level_count;
            let own_exact = cfg.model == Model::RabiExact;
            let (n_max, own) = converge_by_doubling(cfg, 0.0, |n| merged_levels(&p, cfg.sector, n, count, own_exact))?;
            let other = merged_levels(&p, cfg.sector, n_max, count, !own_exact)?;
            Ok(own.iter().enumerate().map(|(i, &e)| row(i, e, other.get(i).copied(), Some(n_max))).collect())
        }
        Quantity::Lambda => {
            let sol = grwa::solve_lambda(pt.epsilon, 1.0, pt.g, grwa::LAMBDA_TOL)?;
            Ok(vec![row(0, sol.lambda, Some(grwa::lambda_closed_form(pt.epsilon, 1.0, pt.g)), None)])
        }
        Quantity::Curvature => {
            let p = probe(pt)?;
            let step = 1e-2;
            let scale = 1.0 + pt.n_spins as f64 * (pt.epsilon + pt.g);
            let noise = 64.0 * f64::EPSILON * scale / (step * step);
            let (n_max, exact) = converge_by_doubling(cfg, noise, |n| Ok(vec![thermal::exact_ground_curvature(&p, n, step)?]))?;
            let variational = grwa::ground_energy_derivs(&p).map(|d| d.d2e_deps2);
            Ok(vec![match cfg.model {
                Model::Grwa => row(0, variational?, Some(exact[0]), Some(n_max)),
                _ => row(0, exact[0], variational.ok(), Some(n_max)),
            }])
        }
        Quantity::Snr | Quantity::Asymptote => unreachable!("handled by snr_point"),
    }
}

/// Grid interval `[a, b]` across which the `phase` column changes, found by
/// bisection over the sorted rows. `None` when the phase never changes.
pub fn phase_boundary(rows: &[SnrRow]) -> Option<(f64, f64)> {
    let first = rows.first()?.phase.as_deref()?;
    let last = rows.last()?.phase.as_deref()?;
    if first == last {
        return None;
    }
    let (mut lo, mut hi) = (0usize, rows.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if rows[mid].phase.as_deref() == Some(first) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((rows[lo].grid_value, rows[hi].grid_value))
}

/// Grid interval with the largest jump in `delta_snr`.
pub fn largest_jump(rows: &[SnrRow]) -> Option<(f64, f64, f64)> {
    rows.windows(2)
        .filter_map(|w| Some((w[0].grid_value, w[1].grid_value, (w[1].delta_snr? - w[0].delta_snr?).abs())))
        .max_by(|a, b| a.2.total_cmp(&b.2))
}
