//! The experiment drivers. Each runs the cases its configuration lists,
//! writes CSV tables into the output directory and returns a [`Report`].

use std::path::Path;
use std::sync::Arc;

use crate::diagnostics::{conserved_totals, energy, linf_error, max_abs};
use crate::error::{Error, Result};
use crate::mesh::build_mesh;
use crate::physics::{wave_system, InitialCondition, WaveSystem};
use crate::solver::{BoundaryCondition, Discretization, DiscretizationOptions, FluxKind, Formulation, SolutionField};
use crate::timeint::{integrate, step_count, LowStorageRk, OdeSystem, RkScheme, VolumeWeighted};

use super::config::{BoundarySpec, Experiment, RunConfig};
use super::output::{sci, write_csv, Check, Report};

type WaveDisc = Discretization<f64, WaveSystem<f64>>;

/// Runaway level at which stability runs stop.
pub const BLOW_UP: f64 = 1e12;
/// Growth of the standard form's residual that counts as instability.
pub const STANDARD_GROWTH: f64 = 1e3;
/// Required drop of the error from the lowest to the highest degree of the
/// spectral-convergence window.
pub const SPECTRAL_ORDERS: f64 = 2.0;
/// Accepted error ratio when the time step is halved at the time-error floor.
pub const HALVING_RATIO: (f64, f64) = (6.0, 10.0);
/// Degree window over which spectral decay is measured.
pub const SPECTRAL_WINDOW: (usize, usize) = (4, 10);

/// One solver setup out of the cross product the configuration lists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub degree: usize,
    pub dt: f64,
    pub flux: FluxKind,
    pub formulation: Formulation,
}

/// Discretisation and initial condition of `case`.
pub fn setup(cfg: &RunConfig, case: &Case) -> Result<(WaveDisc, InitialCondition<f64>)> {
    let mut mesh_cfg = cfg.mesh.clone();
    mesh_cfg.degree = case.degree;
    let mesh = build_mesh(&mesh_cfg)?;
    let ic = cfg.physics.initial_condition::<f64>()?;
    let boundary = match cfg.physics.boundary {
        BoundarySpec::Exact => BoundaryCondition::Exact(Arc::new(ic)),
        BoundarySpec::Zero => BoundaryCondition::Zero,
    };
    let options = DiscretizationOptions {
        flux: case.flux,
        formulation: case.formulation,
        boundary,
    };
    Ok((Discretization::new(mesh, wave_system(cfg.physics.wave_speed)?, options), ic))
}

fn steps_for(cfg: &RunConfig, dt: f64) -> usize {
    let n = step_count(cfg.run.t_final, dt);
    cfg.run.max_steps.map_or(n, |cap| n.min(cap))
}

/// Final state of a run from the projected initial condition. Runs advance
/// the volume-weighted state so the totals are conserved to roundoff.
pub fn run_to_end(cfg: &RunConfig, case: &Case) -> Result<(WaveDisc, InitialCondition<f64>, SolutionField<f64>, f64)> {
    let (mut disc, ic) = setup(cfg, case)?;
    let field = disc.project(&ic, 0.0)?;
    let (m, nn, ne) = (field.n_eq(), field.nodes_per_element(), field.n_elements());
    let mut y = field.volume_weighted();
    let t = integrate(&mut VolumeWeighted(&mut disc), &mut y, 0.0, case.dt, steps_for(cfg, case.dt), |_, _, _| Ok(()))?;
    let field = SolutionField::from_volume_weighted(m, nn, ne, y)?;
    Ok((disc, ic, field, t))
}

/// L-infinity error of the final state against the exact solution.
pub fn final_error(cfg: &RunConfig, case: &Case) -> Result<f64> {
    let (disc, ic, field, t) = run_to_end(cfg, case)?;
    linf_error(&disc, field.q_all(), &ic, t)
}

fn prepare(cfg: &RunConfig, experiment: Experiment) -> Result<()> {
    if cfg.experiment != experiment {
        return Err(Error::InvalidConfig(format!(
            "configuration is for '{}', not '{}'",
            cfg.experiment.as_str(),
            experiment.as_str()
        )));
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    Ok(())
}

fn finish(mut report: Report, dir: &Path) -> Result<Report> {
    report.write_summary(dir)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub degree: usize,
    pub dt: f64,
    /// NaN when the run failed.
    pub error: f64,
}

/// Final error of every (degree, dt) pair; failed runs are recorded as NaN.
pub fn convergence_rows(cfg: &RunConfig) -> Vec<ConvergenceRow> {
    let mut rows = Vec::new();
    for &degree in &cfg.run.degrees {
        for &dt in &cfg.run.dt {
            let case = Case {
                degree,
                dt,
                flux: cfg.run.fluxes[0],
                formulation: cfg.run.formulations[0],
            };
            let error = final_error(cfg, &case).unwrap_or(f64::NAN);
            rows.push(ConvergenceRow { degree, dt, error });
        }
    }
    rows
}

/// `log10(e_lo / e_hi)` over the degree window at one time step, or NaN if
/// the decrease is not monotone (or a run failed).
pub fn spectral_orders(rows: &[ConvergenceRow], dt: f64, window: (usize, usize)) -> f64 {
    let mut e: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.dt == dt && (window.0..=window.1).contains(&r.degree))
        .map(|r| (r.degree, r.error))
        .collect();
    e.sort_by_key(|p| p.0);
    if e.len() < 2 || e.windows(2).any(|w| !(w[1].1 < w[0].1)) {
        return f64::NAN;
    }
    (e[0].1 / e[e.len() - 1].1).log10()
}

/// `e(2 dt) / e(dt)` at one degree for the two smallest time steps, if they
/// are a halving apart.
pub fn halving_ratio(rows: &[ConvergenceRow], degree: usize) -> Option<f64> {
    let mut e: Vec<(f64, f64)> = rows.iter().filter(|r| r.degree == degree).map(|r| (r.dt, r.error)).collect();
    e.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (small, big) = (e.first()?, e.get(1)?);
    ((big.0 / small.0 - 2.0).abs() < 1e-9).then(|| big.1 / small.1)
}

/// Error against the exact solution over degrees and time steps.
pub fn run_convergence(cfg: &RunConfig) -> Result<Report> {
    prepare(cfg, Experiment::Convergence)?;
    let dir = &cfg.output.dir;
    let rows = convergence_rows(cfg);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.degree.to_string(), sci(r.dt), sci(r.error)])
        .collect();
    let path = dir.join("convergence.csv");
    write_csv(&path, &["N", "dt", "linf_error"], &table)?;

    let mut report = Report::new(Experiment::Convergence);
    report.files.push(path);
    let smallest_dt = cfg.run.dt.iter().copied().fold(f64::INFINITY, f64::min);
    let has = |n: usize| cfg.run.degrees.contains(&n);
    if has(SPECTRAL_WINDOW.0) && has(SPECTRAL_WINDOW.1) {
        let orders = spectral_orders(&rows, smallest_dt, SPECTRAL_WINDOW);
        report.checks.push(Check::at_least("spectral_orders", orders, SPECTRAL_ORDERS));
    }
    // The time error only dominates once the spatial error has converged.
    for &n in cfg.run.degrees.iter().filter(|&&n| n >= SPECTRAL_WINDOW.1) {
        if let Some(ratio) = halving_ratio(&rows, n) {
            let mut c = Check::at_least(format!("halving_ratio_N{n}"), ratio, HALVING_RATIO.0);
            c.passed &= ratio <= HALVING_RATIO.1;
            report.checks.push(c);
        }
    }
    if has(2) {
        let worst = max_abs(&rows.iter().filter(|r| r.degree == 2).map(|r| r.error).collect::<Vec<_>>());
        report.checks.push(Check::at_most("linf_error_N2", worst, 1.0));
    }
    // With a single case there is nothing to compare; the run must still
    // produce a finite error.
    if report.checks.is_empty() {
        let worst = max_abs(&rows.iter().map(|r| r.error).collect::<Vec<_>>());
        report.checks.push(Check::at_most("linf_error", worst, cfg.run.tolerance));
    }
    finish(report, dir)
}

/// Wraps a discretisation and remembers `max |(JQ)_t|` of the first
/// evaluation after being armed (the first Runge-Kutta stage of a step).
struct ResidualProbe<'a> {
    disc: &'a mut WaveDisc,
    armed: bool,
    value: f64,
}

impl OdeSystem<f64> for ResidualProbe<'_> {
    fn rhs(&mut self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        self.disc.evaluate_volume_weighted(t, y, dydt)?;
        if self.armed {
            self.value = max_abs(self.disc.last_jq_dot());
            self.armed = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow {
    pub step: usize,
    pub time: f64,
    pub normalized: f64,
}

/// Residual history of one run, normalised by the residual after the first
/// step, so row 1 is exactly 1. Stops early once the residual exceeds
/// [`BLOW_UP`] or the state stops being finite (recorded as NaN).
pub fn residual_history(cfg: &RunConfig, case: &Case) -> Result<Vec<ResidualRow>> {
    let (mut disc, ic) = setup(cfg, case)?;
    let mut y = disc.project(&ic, 0.0)?.volume_weighted();
    let steps = steps_for(cfg, case.dt);
    let mut rk = LowStorageRk::new(RkScheme::williamson3(), y.len());
    let mut probe = ResidualProbe {
        disc: &mut disc,
        armed: false,
        value: 0.0,
    };
    let time = |n: usize| case.dt * n as f64;
    let mut rows = Vec::new();
    let mut normalizer = f64::NAN;
    // The residual of the state after step n is the first stage of step n+1.
    let mut record = |n: usize, raw: f64, rows: &mut Vec<ResidualRow>| -> bool {
        if n == 1 {
            normalizer = raw;
        }
        let normalized = if normalizer > 0.0 { raw / normalizer } else { f64::NAN };
        rows.push(ResidualRow {
            step: n,
            time: time(n),
            normalized,
        });
        normalized.is_finite() && normalized <= BLOW_UP
    };
    for n in 1..=steps {
        probe.armed = true;
        let outcome = rk.step(&mut probe, time(n - 1), case.dt, &mut y);
        if n >= 2 && !record(n - 1, probe.value, &mut rows) {
            return Ok(rows);
        }
        if let Err(e) = outcome {
            if matches!(e, Error::Integration { .. }) {
                record(n, f64::NAN, &mut rows);
                return Ok(rows);
            }
            return Err(e);
        }
    }
    let mut scratch = vec![0.0; y.len()];
    probe.rhs(time(steps), &y, &mut scratch)?;
    record(steps, max_abs(probe.disc.last_jq_dot()), &mut rows);
    Ok(rows)
}

/// Largest normalised residual, NaN-propagating.
pub fn peak_residual(rows: &[ResidualRow]) -> f64 {
    max_abs(&rows.iter().map(|r| r.normalized).collect::<Vec<_>>())
}

/// Long-time residual growth of each formulation.
pub fn run_stability(cfg: &RunConfig) -> Result<Report> {
    prepare(cfg, Experiment::Stability)?;
    let dir = &cfg.output.dir;
    let mut report = Report::new(Experiment::Stability);
    let mut table = Vec::new();
    for &degree in &cfg.run.degrees {
        for &dt in &cfg.run.dt {
            for &flux in &cfg.run.fluxes {
                for &formulation in &cfg.run.formulations {
                    let case = Case {
                        degree,
                        dt,
                        flux,
                        formulation,
                    };
                    let rows = residual_history(cfg, &case)?;
                    let cadence = cfg.run.cadence.max(1);
                    let last = rows.last().map(|r| r.step);
                    for r in rows.iter().filter(|r| r.step % cadence == 0 || r.step == 1 || Some(r.step) == last) {
                        table.push(vec![r.step.to_string(), sci(r.time), sci(r.normalized), formulation.as_str().into()]);
                    }
                    let peak = peak_residual(&rows);
                    let label = format!("N{degree}_{}_{}", flux.as_str(), formulation.as_str());
                    report.checks.push(match formulation {
                        Formulation::Skew => Check::at_most(format!("peak_residual_{label}"), peak, cfg.run.tolerance),
                        // The conservative form is expected to blow up.
                        Formulation::Standard => {
                            let mut c = Check::at_least(format!("peak_residual_{label}"), peak, STANDARD_GROWTH);
                            c.passed |= !peak.is_finite();
                            c
                        }
                    });
                }
            }
        }
    }
    let path = dir.join("stability.csv");
    write_csv(&path, &["step", "time", "normalized_residual", "formulation"], &table)?;
    report.files.push(path);
    finish(report, dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalsRow {
    pub time: f64,
    pub totals: Vec<f64>,
}

/// Conserved totals every `cadence` steps (and at both ends).
pub fn totals_history(cfg: &RunConfig, case: &Case) -> Result<Vec<TotalsRow>> {
    let (mut disc, ic) = setup(cfg, case)?;
    let field = disc.project(&ic, 0.0)?;
    let (m, nn, ne) = (field.n_eq(), field.nodes_per_element(), field.n_elements());
    let rule = disc.rule().clone();
    let steps = steps_for(cfg, case.dt);
    let cadence = cfg.run.cadence.max(1);
    let mut y = field.volume_weighted();
    let mut rows = Vec::new();
    integrate(&mut VolumeWeighted(&mut disc), &mut y, 0.0, case.dt, steps, |n, t, y| {
        if n % cadence == 0 || n == steps {
            let f = SolutionField::from_volume_weighted(m, nn, ne, y.to_vec())?;
            rows.push(TotalsRow {
                time: t,
                totals: conserved_totals(&f, &rule),
            });
        }
        Ok(())
    })?;
    Ok(rows)
}

/// Largest `|total(t) - total(0)|` of each equation.
pub fn max_drift(rows: &[TotalsRow]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    (0..first.totals.len())
        .map(|c| rows.iter().fold(0.0f64, |m, r| m.max((r.totals[c] - first.totals[c]).abs())))
        .collect()
}

/// Drift of the conserved totals on a periodic mesh.
pub fn run_conservation(cfg: &RunConfig) -> Result<Report> {
    prepare(cfg, Experiment::Conservation)?;
    let dir = &cfg.output.dir;
    let mut report = Report::new(Experiment::Conservation);
    for &degree in &cfg.run.degrees {
        for &dt in &cfg.run.dt {
            for &flux in &cfg.run.fluxes {
                for &formulation in &cfg.run.formulations {
                    let case = Case {
                        degree,
                        dt,
                        flux,
                        formulation,
                    };
                    let rows = totals_history(cfg, &case)?;
                    let drift = max_drift(&rows);
                    let mut table: Vec<Vec<String>> = rows
                        .iter()
                        .map(|r| std::iter::once(sci(r.time)).chain(r.totals.iter().map(|&v| sci(v))).collect())
                        .collect();
                    table.push(std::iter::once("max_drift".to_string()).chain(drift.iter().map(|&v| sci(v))).collect());
                    let label = format!("N{degree}_{}_{}_dt{}", flux.as_str(), formulation.as_str(), sci(dt));
                    let path = dir.join(format!("conservation_{label}.csv"));
                    write_csv(&path, &["time", "p_tot", "u_tot", "v_tot", "w_tot"], &table)?;
                    report.files.push(path);
                    let worst = max_abs(&drift);
                    report.checks.push(Check::at_most(format!("max_drift_{label}"), worst, cfg.run.tolerance));
                }
            }
        }
    }
    finish(report, dir)
}

/// Preservation of a constant state on the moving mesh.
pub fn run_freestream(cfg: &RunConfig) -> Result<Report> {
    prepare(cfg, Experiment::Freestream)?;
    let dir = &cfg.output.dir;
    let mut report = Report::new(Experiment::Freestream);
    let mut table = Vec::new();
    for &degree in &cfg.run.degrees {
        let mut by_flux = Vec::new();
        for &flux in &cfg.run.fluxes {
            for &dt in &cfg.run.dt {
                for &formulation in &cfg.run.formulations {
                    let case = Case {
                        degree,
                        dt,
                        flux,
                        formulation,
                    };
                    let err = final_error(cfg, &case)?;
                    table.push(vec![degree.to_string(), flux.as_str().into(), sci(err)]);
                    report.checks.push(Check::at_most(
                        format!("linf_error_N{degree}_{}_{}", flux.as_str(), formulation.as_str()),
                        err,
                        cfg.run.tolerance,
                    ));
                    by_flux.push((flux, dt, formulation, err));
                }
            }
        }
        for &(_, dt, formulation, up) in by_flux.iter().filter(|r| r.0 == FluxKind::Upwind) {
            if let Some(&(_, _, _, cen)) = by_flux.iter().find(|r| r.0 == FluxKind::Central && r.1 == dt && r.2 == formulation) {
                report.checks.push(Check::at_most(
                    format!("flux_agreement_N{degree}_{}", formulation.as_str()),
                    (up - cen).abs(),
                    // Roundoff perturbs the constant state, so the jump terms
                    // are not exactly zero and the fluxes differ at roundoff level.
                    cfg.run.tolerance,
                ));
            }
        }
    }
    let path = dir.join("freestream.csv");
    write_csv(&path, &["N", "flux", "linf_error"], &table)?;
    report.files.push(path);
    finish(report, dir)
}

/// Any configuration: energy, totals and (for initial conditions with an
/// exact solution) the error every `cadence` steps.
pub fn run_custom(cfg: &RunConfig) -> Result<Report> {
    prepare(cfg, Experiment::Custom)?;
    let dir = &cfg.output.dir;
    let mut report = Report::new(Experiment::Custom);
    let mut table = Vec::new();
    for &degree in &cfg.run.degrees {
        for &dt in &cfg.run.dt {
            for &flux in &cfg.run.fluxes {
                for &formulation in &cfg.run.formulations {
                    let case = Case {
                        degree,
                        dt,
                        flux,
                        formulation,
                    };
                    let (mut disc, ic) = setup(cfg, &case)?;
                    // Reference projections need a discretisation that is not
                    // borrowed by the integrator.
                    let (reference, _) = setup(cfg, &case)?;
                    let exact = !matches!(ic, InitialCondition::SphericalPulse { .. });
                    let field = disc.project(&ic, 0.0)?;
                    let (m, nn, ne) = (field.n_eq(), field.nodes_per_element(), field.n_elements());
                    let rule = disc.rule().clone();
                    let steps = steps_for(cfg, dt);
                    let cadence = cfg.run.cadence.max(1);
                    let mut y = field.volume_weighted();
                    let mut worst_error = 0.0f64;
                    let outcome = integrate(&mut VolumeWeighted(&mut disc), &mut y, 0.0, dt, steps, |n, t, y| {
                        if n % cadence == 0 || n == steps {
                            let f = SolutionField::from_volume_weighted(m, nn, ne, y.to_vec())?;
                            let err = if exact { linf_error(&reference, f.q_all(), &ic, t)? } else { f64::NAN };
                            if exact {
                                worst_error = max_abs(&[worst_error, err]);
                            }
                            let mut row = vec![
                                degree.to_string(),
                                sci(dt),
                                flux.as_str().into(),
                                formulation.as_str().into(),
                                n.to_string(),
                                sci(t),
                                sci(energy(&f, &rule)),
                            ];
                            row.extend(conserved_totals(&f, &rule).iter().map(|&v| sci(v)));
                            row.push(sci(err));
                            table.push(row);
                        }
                        Ok(())
                    });
                    let label = format!("N{degree}_{}_{}_dt{}", flux.as_str(), formulation.as_str(), sci(dt));
                    let measured = match outcome {
                        Ok(_) if exact => worst_error,
                        Ok(_) => 0.0,
                        Err(Error::Integration { .. }) => f64::NAN,
                        Err(e) => return Err(e),
                    };
                    report.checks.push(if exact {
                        Check::at_most(format!("linf_error_{label}"), measured, cfg.run.tolerance)
                    } else {
                        // Without a reference solution the run only has to stay finite.
                        Check::at_most(format!("finite_{label}"), measured, 0.0)
                    });
                }
            }
        }
    }
    let path = dir.join("custom.csv");
    write_csv(
        &path,
        &["N", "dt", "flux", "formulation", "step", "time", "energy", "p_tot", "u_tot", "v_tot", "w_tot", "linf_error"],
        &table,
    )?;
    report.files.push(path);
    finish(report, dir)
}

/// Dispatches on the configuration's experiment.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    match cfg.experiment {
        Experiment::Convergence => run_convergence(cfg),
        Experiment::Stability => run_stability(cfg),
        Experiment::Conservation => run_conservation(cfg),
        Experiment::Freestream => run_freestream(cfg),
        Experiment::Custom => run_custom(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshConfig;

    fn small(experiment: Experiment, dir: &Path) -> RunConfig {
        let mut c = RunConfig::preset(experiment);
        c.mesh = MeshConfig {
            elements: [2, 2, 2],
            periodic: c.mesh.periodic,
            ..MeshConfig::default()
        };
        c.run.degrees = vec![2];
        c.run.dt = vec![1e-2];
        c.run.t_final = 0.05;
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn spectral_orders_need_monotone_decay() {
        let row = |degree, error| ConvergenceRow { degree, dt: 1e-3, error };
        let good = [row(4, 1e-2), row(6, 1e-3), row(8, 1e-4), row(10, 5e-5), row(12, 1e-3)];
        assert!((spectral_orders(&good, 1e-3, (4, 10)) - 2.30103).abs() < 1e-5);
        let bumpy = [row(4, 1e-2), row(6, 1e-3), row(8, 2e-3), row(10, 1e-5)];
        assert!(spectral_orders(&bumpy, 1e-3, (4, 10)).is_nan());
        let failed = [row(4, 1e-2), row(10, f64::NAN)];
        assert!(spectral_orders(&failed, 1e-3, (4, 10)).is_nan());
    }

    #[test]
    fn halving_ratio_uses_two_smallest_steps() {
        let rows = [
            ConvergenceRow { degree: 8, dt: 4e-3, error: 64.0 },
            ConvergenceRow { degree: 8, dt: 2e-3, error: 8.0 },
            ConvergenceRow { degree: 8, dt: 1e-3, error: 1.0 },
        ];
        assert_eq!(halving_ratio(&rows, 8), Some(8.0));
        assert_eq!(halving_ratio(&rows, 6), None);
        assert_eq!(halving_ratio(&rows[..1], 8), None);
        let uneven = [rows[0], rows[2]];
        assert_eq!(halving_ratio(&uneven, 8), None);
    }

    #[test]
    fn drift_is_measured_from_the_first_row() {
        let rows = vec![
            TotalsRow { time: 0.0, totals: vec![1.0, 0.0] },
            TotalsRow { time: 0.1, totals: vec![1.5, -0.25] },
            TotalsRow { time: 0.2, totals: vec![0.75, 0.0] },
        ];
        assert_eq!(max_drift(&rows), vec![0.5, 0.25]);
        assert!(max_drift(&[]).is_empty());
    }

    #[test]
    fn residual_history_starts_at_one() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(Experiment::Stability, dir.path());
        cfg.run.max_steps = Some(4);
        let case = Case {
            degree: 2,
            dt: 1e-2,
            flux: FluxKind::Central,
            formulation: Formulation::Skew,
        };
        let rows = residual_history(&cfg, &case).unwrap();
        assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(rows[0].normalized, 1.0);
        assert!((rows[3].time - 0.04).abs() < 1e-15);
        assert!(rows.iter().all(|r| r.normalized.is_finite()));
    }

    #[test]
    fn drivers_write_their_tables() {
        let dir = tempfile::tempdir().unwrap();
        let r = run(&small(Experiment::Freestream, dir.path())).unwrap();
        assert!(r.passed(), "{r}");
        let text = std::fs::read_to_string(dir.path().join("freestream.csv")).unwrap();
        assert_eq!(text.lines().next(), Some("N,flux,linf_error"));
        assert_eq!(text.lines().count(), 3);

        let r = run(&small(Experiment::Conservation, dir.path())).unwrap();
        assert!(r.passed(), "{r}");
        let name = format!("conservation_N2_upwind_skew_dt{}.csv", sci(1e-2));
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.lines().last().unwrap().starts_with("max_drift,"));

        let mut cfg = small(Experiment::Custom, dir.path());
        cfg.physics.initial_condition = "constant_pi".into();
        let r = run(&cfg).unwrap();
        assert!(r.passed(), "{r}");
        assert!(dir.path().join("custom_summary.csv").exists());
    }

    #[test]
    fn rejects_mismatched_experiment() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(Experiment::Freestream, dir.path());
        assert!(run_conservation(&cfg).is_err());
    }
}
