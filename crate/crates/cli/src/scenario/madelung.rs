use madelung_lab::madelung::{
    decompose, madelung_residual, MadelungResidual, MadelungStepper, TimeDerivatives,
};
use madelung_lab::oracle::{evolve_with, Dispersion, Potential, PropagatorState, SplitStep};
use madelung_lab::{Constants, Grid64, ScalarField64};

use super::{packet, usage, whole_steps, Context, Result};
use crate::config::Packet;
use crate::manifest::{Check, Verdict};

/// Residuals at `t` from oracle snapshots at `t - dt`, `t`, `t + dt`.
fn residual_at(
    grid: Grid64,
    p: Packet,
    omega: f64,
    dt: f64,
    t: f64,
    c: &Constants<f64>,
) -> madelung_lab::Result<MadelungResidual<f64>> {
    let u = Potential::Harmonic { omega }.realize(&grid, c)?;
    let stepper = SplitStep::new(&u, dt, c, Dispersion::Spectral)?;
    let n = whole_steps(t, dt).expect("checked by caller");
    let st = evolve_with(
        &stepper,
        PropagatorState::new(&packet(grid, p)?, dt, *c)?,
        n - 1,
    )?;
    let before = decompose(&st.psi, c)?;
    let st = evolve_with(&stepper, st, 1)?;
    let now = decompose(&st.psi, c)?;
    let st = evolve_with(&stepper, st, 1)?;
    let after = decompose(&st.psi, c)?;
    madelung_residual(&now, &u, &TimeDerivatives::centered(&before, &after, dt)?)
}

pub(super) fn run(cx: &mut Context) -> Result<()> {
    let cfg = cx.cfg;
    let sec = &cfg.madelung;
    let c = cx.constants()?;
    let grid = cx.line_grid()?;
    let (hw, n) = cfg.grid();
    let dt = cfg.dt.unwrap_or(1e-3);
    let omega = cfg.omega();
    let f = sec.refine_factor;
    if f < 2 {
        return Err(usage("madelung.refine_factor", "must be at least 2"));
    }
    for (key, step) in [
        ("dt", dt),
        ("dt", dt / f as f64),
        ("madelung.madelung_dt", sec.madelung_dt),
    ] {
        if whole_steps(sec.t_eval, step).is_none_or(|k| k < 2) {
            return Err(usage(
                key,
                format!(
                    "t_eval = {} is not a whole number (>= 2) of steps of {step}",
                    sec.t_eval
                ),
            ));
        }
    }
    let fine = Grid64::centered_line(hw, n * f).map_err(|e| usage("grid", e))?;

    let (res, _) = cx.timed("residuals", || -> madelung_lab::Result<_> {
        Ok((
            residual_at(grid, sec.packet, omega, dt, sec.t_eval, &c)?,
            residual_at(fine, sec.packet, omega, dt / f as f64, sec.t_eval, &c)?,
        ))
    });
    let (coarse, refined) = cx.core(res)?;
    let cont_ratio = coarse.continuity / refined.continuity;
    let mom_ratio = coarse.momentum / refined.momentum;
    cx.metric("continuity_residual", coarse.continuity);
    cx.metric("momentum_residual", coarse.momentum);
    cx.metric("continuity_residual_refined", refined.continuity);
    cx.metric("momentum_residual_refined", refined.momentum);
    cx.metric("continuity_refinement_ratio", cont_ratio);
    cx.metric("momentum_refinement_ratio", mom_ratio);
    cx.csv("madelung_residuals.csv", |w| {
        writeln!(w, "points,dt,continuity,momentum")?;
        writeln!(
            w,
            "{n},{dt:e},{:e},{:e}",
            coarse.continuity, coarse.momentum
        )?;
        writeln!(
            w,
            "{},{:e},{:e},{:e}",
            n * f,
            dt / f as f64,
            refined.continuity,
            refined.momentum
        )
    })?;

    // free packet: direct Madelung integration against the oracle
    let (direct, _) = cx.timed(
        "direct",
        || -> madelung_lab::Result<(ScalarField64, ScalarField64, f64)> {
            let psi0 = packet(grid, sec.free_packet)?;
            let zero = ScalarField64::zeros(grid);
            let stepper = MadelungStepper::new(&zero, sec.madelung_dt, &c)?;
            let mut st = decompose(&psi0, &c)?;
            for _ in 0..whole_steps(sec.t_eval, sec.madelung_dt).expect("checked above") {
                st = stepper.step(&st)?;
            }
            let oracle = SplitStep::new(&zero, dt, &c, Dispersion::Spectral)?;
            let n = whole_steps(sec.t_eval, dt).expect("checked above");
            let out = evolve_with(&oracle, PropagatorState::new(&psi0, dt, c)?, n)?;
            Ok((st.rho().clone(), out.psi.density(), st.renorm_drift()))
        },
    );
    let (rho_m, rho_o, renorm) = cx.core(direct)?;
    let l2 = cx.core(rho_m.l2_distance(&rho_o))?;
    cx.metric("direct_density_l2", l2);
    cx.metric("direct_renorm_drift", renorm);
    cx.csv("madelung_density.csv", |w| {
        writeln!(w, "x,rho_madelung,rho_oracle")?;
        for (i, (a, b)) in rho_m.values().iter().zip(rho_o.values()).enumerate() {
            writeln!(w, "{:e},{a:e},{b:e}", grid.coord(0, i))?;
        }
        Ok(())
    })?;

    let tol = cfg.tolerance("residual", 1e-3);
    let ratio = cfg.tolerance("refinement_ratio", 2.0);
    let runtime = cx.timings_total();
    cx.verdict(Verdict::new(
        3,
        "madelung-consistency",
        vec![
            Check::at_most("continuity residual", coarse.continuity, tol),
            Check::at_most("momentum residual", coarse.momentum, tol),
            Check::at_least(
                "continuity residual ratio under refinement",
                cont_ratio,
                ratio,
            ),
            Check::at_least("momentum residual ratio under refinement", mom_ratio, ratio),
            Check::at_most(
                "direct Madelung density L2 vs oracle",
                l2,
                cfg.tolerance("direct_density_l2", 1e-3),
            ),
            Check::at_most("runtime seconds", runtime, cfg.tolerance("runtime_s", 30.0)),
        ],
    ));
    Ok(())
}
