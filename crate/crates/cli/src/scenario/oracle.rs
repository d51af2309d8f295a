use madelung_lab::oracle::{
    energy, evolve_with, harmonic_state, Dispersion, Potential, PropagatorState, SplitStep,
};
use madelung_lab::WaveField64;

use super::{packet, usage, whole_steps, Context, Result};
use crate::manifest::{series, Check, Verdict};
use crate::sweep::fit_order;

/// Norm is checked after every chunk of this many steps.
const NORM_CHUNK: usize = 10;

pub(super) fn run(cx: &mut Context) -> Result<()> {
    let cfg = cx.cfg;
    let sec = &cfg.oracle;
    let c = cx.constants()?;
    let grid = cx.line_grid()?;
    let dt = cfg.dt.unwrap_or(1e-3);
    let steps = cfg.steps.unwrap_or(10_000);
    let omega = cfg.omega();
    if sec.order_levels < 2 {
        return Err(usage(
            "oracle.order_levels",
            "need at least 2 levels for an order fit",
        ));
    }
    if sec.reference_divisor < 2 {
        return Err(usage("oracle.reference_divisor", "must be at least 2"));
    }
    let u = cx.core(Potential::Harmonic { omega }.realize(&grid, &c))?;
    let psi0 = cx.core(packet(grid, sec.packet))?;

    // unitarity and energy over the full run
    let run = || -> madelung_lab::Result<_> {
        let stepper = SplitStep::new(&u, dt, &c, Dispersion::Spectral)?;
        let mut st = PropagatorState::new(&psi0, dt, c)?;
        let e0 = energy(&st.psi, &u, &c)?;
        let mut drift: f64 = 0.0;
        let mut done = 0;
        while done < steps {
            let k = NORM_CHUNK.min(steps - done);
            st = evolve_with(&stepper, st, k)?;
            done += k;
            drift = drift.max((st.psi.norm_sqr() - 1.0).abs());
        }
        let e1 = energy(&st.psi, &u, &c)?;
        Ok((st.psi, drift, e0, e1))
    };
    let (r, _) = cx.timed("unitarity", run);
    let (psi_end, max_drift, e0, e1) = cx.core(r)?;
    cx.metric("norm_drift", max_drift);
    cx.metric("energy_initial", e0);
    cx.metric("energy_drift_rel", ((e1 - e0) / e0).abs());
    let rho0 = psi0.density();
    let rho1 = psi_end.density();
    cx.csv("oracle_density.csv", |w| {
        writeln!(w, "x,rho_initial,rho_final")?;
        for (i, (a, b)) in rho0.values().iter().zip(rho1.values()).enumerate() {
            writeln!(w, "{:e},{a:e},{b:e}", grid.coord(0, i))?;
        }
        Ok(())
    })?;

    // convergence against a fine reference
    let t_end = sec.order_time;
    let dts: Vec<f64> = (0..sec.order_levels)
        .rev()
        .map(|k| dt * (1u64 << k) as f64)
        .collect();
    let dt_ref = dt / sec.reference_divisor as f64;
    for &h in dts.iter().chain([&dt_ref]) {
        if whole_steps(t_end, h).is_none() {
            return Err(usage(
                "oracle.order_time",
                format!("{t_end} is not a whole number of steps of {h}"),
            ));
        }
    }
    let evolve = |h: f64| -> madelung_lab::Result<WaveField64> {
        let n = whole_steps(t_end, h).expect("checked above");
        let stepper = SplitStep::new(&u, h, &c, Dispersion::Spectral)?;
        Ok(evolve_with(&stepper, PropagatorState::new(&psi0, h, c)?, n)?.psi)
    };
    let (errors, _) = cx.timed("order", || -> madelung_lab::Result<Vec<f64>> {
        let reference = evolve(dt_ref)?;
        dts.iter()
            .map(|&h| evolve(h)?.l2_distance(&reference))
            .collect()
    });
    let errors = cx.core(errors)?;
    let order = fit_order(&dts, &errors);
    cx.metric("order_dts", series(&dts));
    cx.metric("order_errors", series(&errors));
    cx.metric("order", order);
    cx.metric(
        "l2_error_vs_reference",
        *errors.last().expect("at least two levels"),
    );
    cx.csv("oracle_order.csv", |w| {
        writeln!(w, "dt,l2_error")?;
        for (h, e) in dts.iter().zip(&errors) {
            writeln!(w, "{h:e},{e:e}")?;
        }
        Ok(())
    })?;

    // ground state over whole periods; dt is adjusted so a period is a whole number of steps
    let period = std::f64::consts::TAU / omega;
    let per_period = (period / dt).round().max(1.0) as usize;
    let dt_p = period / per_period as f64;
    let ground = cx.core(harmonic_state(&grid, [0, 0], [omega, omega], &c))?;
    let (stationary, _) = cx.timed("stationary", || -> madelung_lab::Result<Vec<(f64, f64)>> {
        let stepper = SplitStep::new(&u, dt_p, &c, Dispersion::Spectral)?;
        let mut st = PropagatorState::new(&ground, dt_p, c)?;
        let start = st.psi.density();
        let mut prev = start.clone();
        let mut rows = Vec::with_capacity(sec.periods);
        for _ in 0..sec.periods {
            st = evolve_with(&stepper, st, per_period)?;
            let rho = st.psi.density();
            rows.push((rho.l2_distance(&prev)?, rho.l2_distance(&start)?));
            prev = rho;
        }
        Ok(rows)
    });
    let stationary = cx.core(stationary)?;
    let worst = stationary.iter().fold(0.0f64, |m, r| m.max(r.0));
    cx.metric("stationary_dt", dt_p);
    cx.metric(
        "stationary_l2_per_period",
        series(&stationary.iter().map(|r| r.0).collect::<Vec<_>>()),
    );
    cx.metric("stationary_l2_max", worst);
    cx.csv("oracle_stationary.csv", |w| {
        writeln!(w, "period,l2_from_previous,l2_from_initial")?;
        for (k, (a, b)) in stationary.iter().enumerate() {
            writeln!(w, "{},{a:e},{b:e}", k + 1)?;
        }
        Ok(())
    })?;

    let dev = cfg.tolerance("order_deviation", 0.2);
    cx.verdict(Verdict::new(
        8,
        "oracle-integrity",
        vec![
            Check::at_most(
                &format!("norm drift over {steps} steps"),
                max_drift,
                cfg.tolerance("norm_drift", 1e-9),
            ),
            Check::at_least("fitted dt order", order, 2.0 - dev),
            Check::at_most("fitted dt order", order, 2.0 + dev),
            Check::at_most(
                "ground-state density L2 change per period",
                worst,
                cfg.tolerance("stationary_l2", 1e-8),
            ),
        ],
    ));
    Ok(())
}
