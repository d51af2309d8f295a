use madelung_lab::madelung::quantum_potential_gradient;
use madelung_lab::twofluid::{
    average_window, fit_curvature_coefficient, relative_error_vs_grad_q, write_convergence_csv,
    ConvergenceRow, TwoFluidConfig,
};
use madelung_lab::ScalarField64;

use super::{usage, Context, Result};
use crate::manifest::{series, Check, Verdict};

pub(super) fn run(cx: &mut Context) -> Result<()> {
    let cfg = cx.cfg;
    let sec = &cfg.twofluid;
    let c = cx.constants()?;
    let grid = cx.line_grid()?;
    let d = cfg.diffusion();
    if !(sec.width > 0.0) {
        return Err(usage("twofluid.width", "must be positive"));
    }
    if sec
        .coefficient_diffusions
        .iter()
        .any(|&v| !(v.is_finite() && v > 0.0))
    {
        return Err(usage(
            "twofluid.coefficient_diffusions",
            "values must be positive",
        ));
    }
    let s = sec.width;
    let norm = 1.0 / (std::f64::consts::TAU * s * s).sqrt();
    let rho = ScalarField64::from_fn(grid, |x, _| norm * (-x * x / (2.0 * s * s)).exp());
    let window = |diffusion: f64, delta_t: f64| {
        TwoFluidConfig::new(diffusion, delta_t, sec.n_micro, sec.micro_substeps)
            .map_err(|e| usage("twofluid", e))
    };

    // the configured δt, then halved `halvings` times
    let dts: Vec<f64> = (0..=sec.halvings)
        .map(|k| sec.delta_t / (1u64 << k) as f64)
        .collect();
    let windows = dts
        .iter()
        .map(|&h| window(d, h))
        .collect::<Result<Vec<_>>>()?;
    let (main, t_main) = cx.timed("emergence", || average_window(&[rho.clone()], &windows[0]));
    let main = cx.core(main)?;
    let rel_err = cx.core(relative_error_vs_grad_q(&main.mean, &rho, &c))?;
    let (rest, _) = cx.timed("halvings", || -> madelung_lab::Result<Vec<f64>> {
        windows[1..]
            .iter()
            .map(|w| relative_error_vs_grad_q(&average_window(&[rho.clone()], w)?.mean, &rho, &c))
            .collect()
    });
    let mut errors = vec![rel_err];
    errors.extend(cx.core(rest)?);
    let decreasing = errors.windows(2).all(|p| p[1] < p[0]);
    cx.metric("rel_err_vs_gradQ", rel_err);
    cx.metric("rel_err_delta_t", series(&dts));
    cx.metric("rel_err_series", series(&errors));
    cx.metric("sigma_tracking", main.tracking);
    cx.metric("sigma_mass_drift", main.mass_drift);
    cx.metric("diffusion", d);
    let rows: Vec<ConvergenceRow<f64>> = dts
        .iter()
        .zip(&errors)
        .map(|(&delta_t, &e)| ConvergenceRow {
            delta_t,
            n_micro: sec.n_micro,
            diffusion: d,
            rel_err_vs_grad_q: e,
        })
        .collect();
    cx.csv_with("twofluid_convergence.csv", |w| {
        write_convergence_csv(w, &rows)
    })?;
    let grad_q = cx.core(quantum_potential_gradient(&rho, &c))?;
    cx.csv("twofluid_fields.csv", |w| {
        writeln!(w, "x,rho,mean_du_dt,gradQ_over_m")?;
        for i in 0..grid.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e}",
                grid.coord(0, i),
                rho.values()[i],
                main.mean.component(0)[i],
                grad_q.component(0)[i] / c.mass
            )?;
        }
        Ok(())
    })?;

    // coefficient of -∇(∇²√ρ/√ρ) for several D at the configured δt
    let coef_windows = sec
        .coefficient_diffusions
        .iter()
        .map(|&dd| window(dd, sec.delta_t))
        .collect::<Result<Vec<_>>>()?;
    let (coeffs, _) = cx.timed("coefficients", || -> madelung_lab::Result<Vec<f64>> {
        coef_windows
            .iter()
            .map(|w| fit_curvature_coefficient(&average_window(&[rho.clone()], w)?.mean, &rho))
            .collect()
    });
    let coeffs = cx.core(coeffs)?;
    let rel: Vec<f64> = coeffs
        .iter()
        .zip(&sec.coefficient_diffusions)
        .map(|(k, dd)| (k / (2.0 * dd * dd) - 1.0).abs())
        .collect();
    cx.metric(
        "coefficient_diffusions",
        series(&sec.coefficient_diffusions),
    );
    cx.metric("coefficient_fit", series(&coeffs));
    cx.metric("coefficient_rel_dev", series(&rel));
    cx.csv("twofluid_coefficients.csv", |w| {
        writeln!(w, "D,coefficient,two_D_squared,rel_dev")?;
        for ((dd, k), r) in sec.coefficient_diffusions.iter().zip(&coeffs).zip(&rel) {
            writeln!(w, "{dd:e},{k:e},{:e},{r:e}", 2.0 * dd * dd)?;
        }
        Ok(())
    })?;

    let mut emergence = vec![
        Check::at_most(
            "rel. error vs grad Q",
            rel_err,
            cfg.tolerance("rel_err_vs_gradQ", 1e-3),
        ),
        Check::holds(
            &format!(
                "error strictly decreases over {} halvings of delta_t",
                sec.halvings
            ),
            decreasing,
        ),
        Check::at_most("runtime seconds", t_main, cfg.tolerance("runtime_s", 10.0)),
    ];
    if sec.halvings == 0 {
        emergence.push(Check::at_least("halvings of delta_t", 0.0, 1.0));
    }
    cx.verdict(Verdict::new(1, "quantum-potential-emergence", emergence));
    let tol = cfg.tolerance("coefficient_rel", 5e-3);
    cx.verdict(Verdict::new(
        2,
        "diffusion-coefficient",
        sec.coefficient_diffusions
            .iter()
            .zip(&rel)
            .map(|(dd, r)| Check::at_most(&format!("|fit/(2D^2) - 1| at D = {dd}"), *r, tol))
            .collect(),
    ));
    Ok(())
}
