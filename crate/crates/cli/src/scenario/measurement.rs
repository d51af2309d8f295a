use madelung_lab::oracle::{
    density_mass_between, density_mean, pointer_marginal, pointer_measurement_evolve,
    pointer_measurement_stepped, product_initial_state, stationary_states, GaussianPointer,
    Potential,
};
use madelung_lab::{Complex64, Grid64};

use super::{usage, Context, Result};
use crate::manifest::{series, Check, Verdict};

pub(super) fn run(cx: &mut Context) -> Result<()> {
    let cfg = cx.cfg;
    let sec = &cfg.measurement;
    let c = cx.constants()?;
    let xgrid = cx.line_grid()?;
    let ygrid = Grid64::centered_line(sec.pointer_half_width, sec.pointer_points)
        .map_err(|e| usage("measurement", e))?;
    let [a, b] = sec.superposition;
    if a == b {
        return Err(usage(
            "measurement.superposition",
            "needs two distinct eigenstates",
        ));
    }
    if sec.stepped_steps == 0 {
        return Err(usage("measurement.stepped_steps", "must be positive"));
    }
    let lambda = cfg.coupling();
    let t = sec.duration;
    let u = cx.core(Potential::Harmonic { omega: cfg.omega() }.realize(&xgrid, &c))?;
    let count = sec.eigenstate.max(a).max(b) + 1;
    let states = cx.core(stationary_states(&u, &c, count))?;
    let pointer = GaussianPointer::new(ygrid, sec.pointer_center, sec.pointer_width)
        .map_err(|e| usage("measurement.pointer_center", e))?;
    let coeffs = |ks: &[usize]| {
        let amp = Complex64::new(1.0 / (ks.len() as f64).sqrt(), 0.0);
        let mut v = vec![Complex64::new(0.0, 0.0); count];
        for &k in ks {
            v[k] = amp;
        }
        v
    };

    // single eigenstate: the pointer moves by λ ε_k T
    let k = sec.eigenstate;
    let single = cx.core(pointer_measurement_evolve(
        &coeffs(&[k]),
        &states,
        &pointer,
        lambda,
        t,
        &c,
    ))?;
    let single = cx.core(pointer_marginal(&single))?;
    let mean = cx.core(density_mean(&single))?;
    let shift = mean - sec.pointer_center;
    let expected = lambda * states[k].energy * t;
    let spacing = ygrid.spacing(0);
    cx.metric("eigenstate_energy", states[k].energy);
    cx.metric("pointer_shift", shift);
    cx.metric("pointer_shift_expected", expected);
    cx.metric(
        "pointer_shift_error_spacings",
        (shift - expected).abs() / spacing,
    );

    // equal superposition: two lobes split at the midpoint of their expected centers
    let split = sec.pointer_center + lambda * t * (states[a].energy + states[b].energy) / 2.0;
    let (lo_k, hi_k) = if states[a].energy <= states[b].energy {
        (a, b)
    } else {
        (b, a)
    };
    let lobes = |m: &madelung_lab::ScalarField64| {
        let lo = ygrid.origin(0);
        let hi = lo + ygrid.extent(0);
        [
            density_mass_between(m, lo, split),
            density_mass_between(m, split, hi + spacing),
        ]
    };
    let sup = coeffs(&[a, b]);
    let closed = cx.core(pointer_measurement_evolve(
        &sup, &states, &pointer, lambda, t, &c,
    ))?;
    let closed = cx.core(pointer_marginal(&closed))?;
    let closed_lobes = lobes(&closed);
    let (stepped, _) = cx.timed("stepped", || -> madelung_lab::Result<_> {
        let psi0 = product_initial_state(&sup, &states, &pointer)?;
        pointer_marginal(&pointer_measurement_stepped(
            &psi0,
            &u,
            lambda,
            t,
            sec.stepped_steps,
            &c,
        )?)
    });
    let stepped = cx.core(stepped)?;
    let stepped_lobes = lobes(&stepped);
    let closed_err = closed_lobes
        .iter()
        .fold(0.0f64, |m, v| m.max((v - 0.5).abs()));
    let stepped_err = stepped_lobes
        .iter()
        .fold(0.0f64, |m, v| m.max((v - 0.5).abs()));
    cx.metric("lobe_states", vec![lo_k, hi_k]);
    cx.metric("closed_lobe_masses", series(&closed_lobes));
    cx.metric("stepped_lobe_masses", series(&stepped_lobes));
    cx.metric("closed_lobe_error", closed_err);
    cx.metric("stepped_lobe_error", stepped_err);
    cx.csv("pointer_marginal.csv", |w| {
        writeln!(w, "y,single,superposition_closed,superposition_stepped")?;
        for i in 0..ygrid.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e}",
                ygrid.coord(0, i),
                single.values()[i],
                closed.values()[i],
                stepped.values()[i]
            )?;
        }
        Ok(())
    })?;

    cx.verdict(Verdict::new(
        6,
        "pointer-measurement",
        vec![
            Check::at_most(
                "|pointer shift - lambda eps T| in grid spacings",
                (shift - expected).abs() / spacing,
                cfg.tolerance("pointer_shift_spacings", 1.0),
            ),
            Check::at_most(
                "closed-form lobe mass error",
                closed_err,
                cfg.tolerance("closed_lobe", 1e-3),
            ),
            Check::at_most(
                "stepped 2D lobe mass error",
                stepped_err,
                cfg.tolerance("stepped_lobe", 2e-2),
            ),
        ],
    ));
    Ok(())
}
