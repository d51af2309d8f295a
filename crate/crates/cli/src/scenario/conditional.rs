use madelung_lab::bohm::{
    propagate_ensemble, stream_rng, GuidanceField, GuidanceMode, GuidanceStream, TrajectoryEnsemble,
};
use madelung_lab::conditional::{
    conditional_guiding_velocity, propagate_pair, run_pair_equivariance, write_pairs_csv,
    ConfigStream, ConfigWaveField, PairEquivarianceSetup, ParticlePair,
};
use madelung_lab::oracle::{OracleSeries, Potential};
use madelung_lab::{Constants, Grid64, WaveField64};
use rand::Rng;

use super::{packet, usage, Context, Result};
use crate::manifest::{Capping, Check, Verdict};

/// One row of the identity check.
struct Sample {
    x: [f64; 2],
    full: [f64; 2],
    cond: [f64; 2],
    capped: bool,
}

fn single_trajectory(
    w: &WaveField64,
    grid: Grid64,
    omega: f64,
    dt: f64,
    steps: usize,
    x0: f64,
    c: Constants<f64>,
) -> madelung_lab::Result<Vec<f64>> {
    let u = Potential::Harmonic { omega }.realize(&grid, &c)?;
    let mut s = GuidanceStream::new(
        OracleSeries::new(w, &u, dt / 2.0, &c)?,
        c,
        GuidanceMode::WaveGradient,
        0.0,
    )?;
    let e = TrajectoryEnsemble::new(grid, vec![[x0, 0.0]], 0, c)?.with_history();
    let e = propagate_ensemble(e, &mut s, steps)?;
    Ok(e.history()
        .unwrap_or_default()
        .iter()
        .map(|h| h.positions[0][0])
        .collect())
}

pub(super) fn run(cx: &mut Context) -> Result<()> {
    let cfg = cx.cfg;
    let sec = &cfg.conditional;
    let c = cx.constants()?;
    let grid = cx.line_grid()?;
    let omega = cfg.omega();
    if sec.configurations == 0 {
        return Err(usage("conditional.configurations", "must be positive"));
    }
    if !(sec.sample_box > 0.0) {
        return Err(usage("conditional.sample_box", "must be positive"));
    }
    if sec.product_steps == 0 || !(sec.product_dt > 0.0) {
        return Err(usage(
            "conditional.product_steps",
            "product run needs positive dt and steps",
        ));
    }
    let [pa, pb] = sec.packets;
    let a = cx.core(packet(grid, pa))?;
    let b = cx.core(packet(grid, pb))?;

    // conditional slice velocity against the full configuration gradient
    let (samples, _) = cx.timed("identity", || -> madelung_lab::Result<Vec<Sample>> {
        let psi = ConfigWaveField::symmetrized(&a, &b, c)?;
        let full = GuidanceField::new(psi.wave(), psi.constants(), GuidanceMode::WaveGradient)?;
        let mut rng = stream_rng(cfg.seed(), 0);
        let l = sec.sample_box;
        (0..sec.configurations)
            .map(|_| {
                let x = [rng.random_range(-l..l), rng.random_range(-l..l)];
                let v = full.velocity_at(x);
                let v1 = conditional_guiding_velocity(&psi, x, 0)?;
                let v2 = conditional_guiding_velocity(&psi, x, 1)?;
                Ok(Sample {
                    x,
                    full: v.v,
                    cond: [v1.v[0], v2.v[0]],
                    capped: v.capped || v1.capped || v2.capped,
                })
            })
            .collect()
    });
    let samples = cx.core(samples)?;
    let checked: Vec<&Sample> = samples.iter().filter(|s| !s.capped).collect();
    let velocity_err = checked.iter().fold(0.0f64, |m, s| {
        m.max((s.full[0] - s.cond[0]).abs())
            .max((s.full[1] - s.cond[1]).abs())
    });
    let fraction = checked.len() as f64 / samples.len() as f64;
    cx.metric("configurations_checked", checked.len());
    cx.metric("velocity_max_abs_diff", velocity_err);
    cx.csv("conditional_identity.csv", |w| {
        writeln!(
            w,
            "x1,x2,v1_full,v2_full,v1_conditional,v2_conditional,capped"
        )?;
        for s in &samples {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{}",
                s.x[0], s.x[1], s.full[0], s.full[1], s.cond[0], s.cond[1], s.capped as u8
            )?;
        }
        Ok(())
    })?;

    // product state: each member of the pair follows its own one-body trajectory
    let (dt, steps) = (sec.product_dt, sec.product_steps);
    let [x1, x2] = sec.product_start;
    let (product, _) = cx.timed("product", || -> madelung_lab::Result<_> {
        let psi = ConfigWaveField::product(&a, &b, c)?;
        let plane = *psi.grid();
        let u = Potential::Harmonic { omega }.realize(&plane, &c)?;
        let mut stream =
            ConfigStream::new(OracleSeries::new(psi.wave(), &u, dt / 2.0, &c)?, c, 0.0)?;
        let pair = ParticlePair::new(plane, [x1, x2])?.with_history();
        let pair = propagate_pair(pair, &mut stream, steps)?;
        let s1 = single_trajectory(&a, grid, omega, dt, steps, x1, c)?;
        let s2 = single_trajectory(&b, grid, omega, dt, steps, x2, c)?;
        Ok((pair, s1, s2))
    });
    let (pair, s1, s2) = cx.core(product)?;
    let history = pair.history().unwrap_or_default();
    let complete = history.len() == steps + 1 && s1.len() == steps + 1 && s2.len() == steps + 1;
    let trajectory_err = history
        .iter()
        .zip(s1.iter().zip(&s2))
        .fold(0.0f64, |m, ((_, x), (y1, y2))| {
            m.max((x[0] - y1).abs()).max((x[1] - y2).abs())
        });
    cx.metric("trajectory_max_abs_diff", trajectory_err);
    cx.metric("product_pair_capped_events", pair.capped_events());
    cx.csv_with("conditional_pair_trajectory.csv", |w| {
        write_pairs_csv(std::slice::from_ref(&pair), w)
    })?;
    cx.csv("conditional_single_trajectories.csv", |w| {
        writeln!(w, "t,x1_single,x2_single")?;
        for (k, (y1, y2)) in s1.iter().zip(&s2).enumerate() {
            writeln!(w, "{:e},{y1:e},{y2:e}", k as f64 * dt)?;
        }
        Ok(())
    })?;

    // pair ensemble stays |Ψ|²-distributed under the conditional guidance
    let setup = PairEquivarianceSetup {
        half_width: sec.pair_half_width,
        points: sec.pair_points,
        omega,
        pairs: sec.pairs,
        bins: sec.pair_bins,
        steps: sec.pair_steps,
        seed: cfg.seed(),
        constants: c,
    };
    let (pairs, _) = cx.timed("pair_equivariance", || run_pair_equivariance(&setup));
    let pairs = cx.core(pairs)?;
    cx.metric("pair_l1_initial", pairs.l1_initial);
    cx.metric("pair_l1_final", pairs.l1_final);
    cx.capping(Capping {
        capped_trajectories: pairs.capped_trajectories as u64,
        capped_events: pairs.capped_events,
        degraded: pairs.degraded,
    });

    let mut checks = vec![
        Check::at_most(
            "conditional vs configuration velocity",
            velocity_err,
            cfg.tolerance("velocity", 1e-6),
        ),
        Check::at_least(
            "fraction of configurations checked",
            fraction,
            cfg.tolerance("checked_fraction", 0.99),
        ),
        Check::at_most(
            "pair vs single-particle trajectories",
            trajectory_err,
            cfg.tolerance("trajectory", 1e-6),
        ),
    ];
    if !complete {
        checks.push(Check::holds("trajectory histories complete", false));
    }
    cx.verdict(Verdict::new(7, "conditional-guidance", checks));
    Ok(())
}
