use madelung_lab::bohm::{
    run_equivariance, run_relaxation, EquivarianceSetup, GuidanceMode, RelaxationSetup,
    MIN_EQUIVARIANCE_SAMPLES,
};

use super::{Context, Result};
use crate::config::Guidance;
use crate::manifest::{series, Capping, Check, Verdict};

fn mode(g: Guidance) -> GuidanceMode {
    match g {
        Guidance::VelocityField => GuidanceMode::VelocityField,
        Guidance::WaveGradient => GuidanceMode::WaveGradient,
    }
}

pub(super) fn equivariance(cx: &mut Context) -> Result<()> {
    let cfg = cx.cfg;
    let sec = &cfg.equivariance;
    let (half_width, points) = cfg.grid();
    let setup = EquivarianceSetup {
        half_width,
        points,
        omega: cfg.omega(),
        trajectories: sec.trajectories,
        bins: sec.bins,
        checkpoints: sec.checkpoints,
        steps_per_checkpoint: sec.steps_per_checkpoint,
        cell_spacings: sec.cell_spacings,
        mode: mode(sec.guidance),
        seed: cfg.seed(),
        constants: cx.constants()?,
    };
    let (report, runtime) = cx.timed("ensemble", || run_equivariance(&setup));
    let report = cx.core(report)?;
    let max_l1 = report.max_l1();
    let all_l1 = report.l1.iter().fold(0.0f64, |m, &v| m.max(v));
    cx.metric("times", series(&report.times));
    cx.metric("l1", series(&report.l1));
    cx.metric("max_l1", max_l1);
    cx.metric("h_coarse", series(&report.h_coarse));
    cx.metric("order_preserved", report.order_preserved);
    cx.capping(Capping {
        capped_trajectories: report.capped_trajectories as u64,
        capped_events: report.capped_events,
        degraded: report.degraded,
    });
    cx.csv_with("equivariance.csv", |w| report.write_csv(w))?;
    cx.csv_with("equivariance_final_positions.csv", |w| {
        report.ensemble.write_history_csv(w)
    })?;

    cx.verdict(Verdict::new(
        4,
        "equivariance",
        vec![
            Check::at_least(
                "trajectories",
                sec.trajectories as f64,
                MIN_EQUIVARIANCE_SAMPLES as f64,
            ),
            Check::at_most("L1 at every checkpoint", all_l1, cfg.tolerance("l1", 0.03)),
            Check::holds("not degraded by node capping", !report.degraded),
            Check::at_most("runtime seconds", runtime, cfg.tolerance("runtime_s", 60.0)),
        ],
    ));
    Ok(())
}

pub(super) fn relaxation(cx: &mut Context) -> Result<()> {
    let cfg = cx.cfg;
    let sec = &cfg.relaxation;
    let (half_width, points) = cfg.grid();
    let setup = RelaxationSetup {
        half_width,
        points,
        omega: sec.omega,
        lowest_mode: sec.lowest_mode,
        uniform_half_width: sec.uniform_half_width,
        trajectories: sec.trajectories,
        cell_spacings: sec.cell_spacings,
        checkpoints: sec.checkpoints,
        steps_per_checkpoint: sec.steps_per_checkpoint,
        bootstrap: sec.bootstrap,
        mode: mode(sec.guidance),
        seed: cfg.seed(),
        constants: cx.constants()?,
    };
    let (report, _) = cx.timed("ensemble", || run_relaxation(&setup));
    let report = cx.core(report)?;
    let best = report.best_drop();
    let increases = report.significant_increases();
    cx.metric("times", series(&report.times));
    cx.metric("h_coarse", series(&report.h));
    cx.metric(
        "increment_lo",
        series(
            &report
                .increment_band
                .iter()
                .map(|b| b[0])
                .collect::<Vec<_>>(),
        ),
    );
    cx.metric(
        "increment_hi",
        series(
            &report
                .increment_band
                .iter()
                .map(|b| b[1])
                .collect::<Vec<_>>(),
        ),
    );
    cx.metric("best_drop", best);
    cx.metric("final_drop", report.final_drop());
    cx.metric("significant_increases", increases);
    cx.capping(Capping {
        capped_trajectories: report.capped_trajectories as u64,
        capped_events: report.capped_events,
        degraded: report.degraded,
    });
    cx.csv_with("relaxation.csv", |w| report.write_csv(w))?;

    cx.verdict(Verdict::new(
        5,
        "relaxation",
        vec![
            Check::at_least(
                "drop of coarse-grained H within one period",
                best,
                cfg.tolerance("h_drop", 0.5),
            ),
            Check::at_most(
                "significant increases between checkpoints",
                increases as f64,
                0.0,
            ),
            Check::holds("not degraded by node capping", !report.degraded),
        ],
    ));
    Ok(())
}
