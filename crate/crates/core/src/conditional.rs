//! Two particles on a line. The configuration-space wave function `Ψ(x₁, x₂)` lives on a
//! 2D grid whose axis `i` is the coordinate of particle `i` (0 or 1); both particles have
//! the same mass.
//!
//! The conditional wave function of particle `i` is the slice of `Ψ` with the other
//! coordinate held at the other particle's actual position, and particle `i` is guided by
//! it alone: `v_i = (ħ/m) Im(∂φ⁽ⁱ⁾/φ⁽ⁱ⁾)`.

use std::io::Write;

use num_complex::Complex;
use num_traits::Float;

use crate::bohm::{
    propagate_ensemble, sample_equilibrium, GuidanceField, GuidanceMode, GuidanceStream,
    HistogramGrid, TrajectoryEnsemble, Velocity,
};
use crate::bohm::{refine_tolerance, rk4_adaptive, time_weights};
use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::GridSpec;
use crate::interp::Stencil;
use crate::oracle::{harmonic_state, OracleSeries, Potential, WaveSeries};
use crate::scalar::Real;

/// Slice norms below this leave the conditional wave function undefined.
pub const CONDITIONAL_NORM_MIN: f64 = 1e-10;
/// Allowed deviation of `∫∫|Ψ|²` from one.
pub const CONFIG_NORM_TOLERANCE: f64 = 1e-9;

/// Normalized two-particle wave function.
#[derive(Debug, Clone)]
pub struct ConfigWaveField<T> {
    psi: WaveField<T>,
    constants: Constants<T>,
}

impl<T: Real> ConfigWaveField<T> {
    /// `psi` must be on a 2D grid and normalized to [`CONFIG_NORM_TOLERANCE`].
    pub fn new(psi: WaveField<T>, constants: Constants<T>) -> Result<Self> {
        if psi.grid().dims() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: psi.grid().dims(),
            });
        }
        psi.ensure_finite()?;
        let n = psi.norm_sqr();
        if Float::abs(n - T::one()) > T::lit(CONFIG_NORM_TOLERANCE) {
            return Err(Error::Config(format!(
                "configuration wave function has norm² {n}, expected 1"
            )));
        }
        Ok(Self { psi, constants })
    }

    /// Normalizes `psi` first.
    pub fn normalized(psi: WaveField<T>, constants: Constants<T>) -> Result<Self> {
        Self::new(psi.normalized()?, constants)
    }

    /// `ψa(x₁) ψb(x₂)`.
    pub fn product(a: &WaveField<T>, b: &WaveField<T>, constants: Constants<T>) -> Result<Self> {
        Self::normalized(outer(a, b)?, constants)
    }

    /// `(ψa(x₁) ψb(x₂) + ψb(x₁) ψa(x₂)) / √2`, renormalized.
    pub fn symmetrized(
        a: &WaveField<T>,
        b: &WaveField<T>,
        constants: Constants<T>,
    ) -> Result<Self> {
        Self::normalized(outer(a, b)?.add(&outer(b, a)?)?, constants)
    }

    pub fn wave(&self) -> &WaveField<T> {
        &self.psi
    }

    pub fn into_wave(self) -> WaveField<T> {
        self.psi
    }

    pub fn grid(&self) -> &GridSpec<T> {
        self.psi.grid()
    }

    pub fn constants(&self) -> &Constants<T> {
        &self.constants
    }
}

fn outer<T: Real>(a: &WaveField<T>, b: &WaveField<T>) -> Result<WaveField<T>> {
    if a.grid().dims() != 1 || b.grid().dims() != 1 {
        return Err(Error::Config("single-particle factors must be 1D".into()));
    }
    let grid = GridSpec::product(a.grid(), b.grid())?;
    let values = a
        .values()
        .iter()
        .flat_map(|&u| b.values().iter().map(move |&w| u * w))
        .collect();
    WaveField::new(grid, values)
}

fn check_particle(i: usize) -> Result<()> {
    if i > 1 {
        return Err(Error::Config(format!(
            "particle index must be 0 or 1, got {i}"
        )));
    }
    Ok(())
}

/// Unnormalized slice of `Ψ` along axis `i`, with the other axis interpolated linearly at
/// `other`.
fn slice<T: Real>(psi: &WaveField<T>, i: usize, other: T) -> Result<WaveField<T>> {
    let g = psi.grid();
    let j = 1 - i;
    let line = g.axis_grid(i)?;
    let st = Stencil::new_unchecked(&g.axis_grid(j)?, other, T::zero());
    let ny = g.points(1);
    let v = psi.values();
    let values = (0..g.points(i))
        .map(|a| {
            (0..st.len).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
                let b = st.nodes[k];
                let idx = if i == 0 { a * ny + b } else { b * ny + a };
                acc + v[idx] * st.weights[k]
            })
        })
        .collect();
    WaveField::new(line, values)
}

/// Conditional wave function with its `L²` norm.
#[derive(Debug, Clone)]
pub struct Conditional<T> {
    /// Unnormalized slice on the 1D grid of particle `i`.
    pub wave: WaveField<T>,
    pub norm: T,
}

/// `φ⁽ⁱ⁾(x) = Ψ(…, x, …)` with the other coordinate fixed at `other`.
pub fn conditional_wavefunction<T: Real>(
    psi: &ConfigWaveField<T>,
    i: usize,
    other: T,
) -> Result<Conditional<T>> {
    check_particle(i)?;
    if !other.is_finite() {
        return Err(Error::NonFinite {
            what: "conditioning position",
            index: 1 - i,
        });
    }
    let wave = slice(&psi.psi, i, other)?;
    let norm = Float::sqrt(wave.norm_sqr());
    if !(norm >= T::lit(CONDITIONAL_NORM_MIN)) {
        return Err(Error::ConditionalUndefined {
            norm: norm.as_f64(),
        });
    }
    Ok(Conditional { wave, norm })
}

/// Velocity along its own axis of a particle guided by the 1D wave `phi`.
fn slice_velocity<T: Real>(
    phi: &WaveField<T>,
    x: T,
    constants: &Constants<T>,
) -> Result<Velocity<T>> {
    Ok(GuidanceField::new(phi, constants, GuidanceMode::WaveGradient)?.velocity_at([x, T::zero()]))
}

/// `(ħ/m) Im(∂φ⁽ⁱ⁾/φ⁽ⁱ⁾)` at `x[i]` for the configuration `x = (x₁, x₂)`.
///
/// `φ⁽ⁱ⁾` and its spectral derivative are interpolated linearly, so the result coincides
/// with [`configuration_velocity`] up to roundoff.
pub fn conditional_guiding_velocity<T: Real>(
    psi: &ConfigWaveField<T>,
    x: [T; 2],
    i: usize,
) -> Result<Velocity<T>> {
    let cond = conditional_wavefunction(psi, i, x[1 - i])?;
    slice_velocity(&cond.wave, x[i], &psi.constants)
}

/// Full configuration-space guidance `(ħ/m) Im(∇Ψ/Ψ)` at `x`.
pub fn configuration_velocity<T: Real>(psi: &ConfigWaveField<T>, x: [T; 2]) -> Result<Velocity<T>> {
    Ok(GuidanceField::new(&psi.psi, &psi.constants, GuidanceMode::WaveGradient)?.velocity_at(x))
}

/// The actual positions of two particles.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticlePair<T> {
    grid: GridSpec<T>,
    x: [T; 2],
    t: T,
    capped_events: u64,
    history: Option<Vec<(T, [T; 2])>>,
}

impl<T: Real> ParticlePair<T> {
    /// Positions are wrapped into the configuration grid.
    pub fn new(grid: GridSpec<T>, x: [T; 2]) -> Result<Self> {
        if grid.dims() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: grid.dims(),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "particle position",
                index,
            });
        }
        Ok(Self {
            x: [grid.wrap(0, x[0]), grid.wrap(1, x[1])],
            grid,
            t: T::zero(),
            capped_events: 0,
            history: None,
        })
    }

    pub fn with_history(mut self) -> Self {
        self.history = Some(vec![(self.t, self.x)]);
        self
    }

    pub fn positions(&self) -> [T; 2] {
        self.x
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn capped_events(&self) -> u64 {
        self.capped_events
    }

    pub fn history(&self) -> Option<&[(T, [T; 2])]> {
        self.history.as_deref()
    }
}

/// `pair_id,t,x1,x2` for every recorded step of every pair.
pub fn write_pairs_csv<T: Real, W: Write>(pairs: &[ParticlePair<T>], mut out: W) -> Result<()> {
    writeln!(out, "pair_id,t,x1,x2")?;
    for (id, p) in pairs.iter().enumerate() {
        let current = [(p.t, p.x)];
        for (t, x) in p.history.as_deref().unwrap_or(&current) {
            writeln!(out, "{id},{t:e},{:e},{:e}", x[0], x[1])?;
        }
    }
    Ok(())
}

/// Configuration-space snapshots every `dt/2` for pair integration.
pub struct ConfigStream<T: Real, S> {
    series: S,
    constants: Constants<T>,
    current: WaveField<T>,
    t: T,
}

impl<T: Real, S: WaveSeries<T>> ConfigStream<T, S> {
    /// Pulls the first snapshot, taken to be at `t0`.
    pub fn new(mut series: S, constants: Constants<T>, t0: T) -> Result<Self> {
        let current = series.next_wave()?;
        if current.grid().dims() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: current.grid().dims(),
            });
        }
        Ok(Self {
            series,
            constants,
            current,
            t: t0,
        })
    }

    pub fn dt(&self) -> T {
        T::lit(2.0) * self.series.interval()
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn current(&self) -> &WaveField<T> {
        &self.current
    }
}

/// Velocities of both particles from their conditional waves, with `Ψ` interpolated
/// quadratically in time between three snapshots.
fn pair_velocity<T: Real>(
    waves: [&WaveField<T>; 3],
    theta: T,
    x: [T; 2],
    c: &Constants<T>,
) -> Velocity<T> {
    let w = time_weights(theta);
    let mut v = [T::zero(); 2];
    let mut capped = false;
    for i in 0..2 {
        let phi = waves
            .iter()
            .zip(w)
            .filter(|(_, wk)| *wk != T::zero())
            .map(|(psi, wk)| slice(psi, i, x[1 - i]).map(|s| s.scale(Complex::new(wk, T::zero()))))
            .reduce(|a, b| a?.add(&b?));
        match phi.map(|p| p.and_then(|p| slice_velocity(&p, x[i], c))) {
            Some(Ok(vi)) => {
                v[i] = vi.v[0];
                capped |= vi.capped;
            }
            _ => capped = true,
        }
    }
    Velocity { v, capped }
}

/// Advances the pair by `steps` RK4 steps of `stream.dt()`, each particle moved by its own
/// conditional wave function. Step refinement follows
/// [`propagate_ensemble`](crate::bohm::propagate_ensemble).
pub fn propagate_pair<T: Real, S: WaveSeries<T>>(
    mut pair: ParticlePair<T>,
    stream: &mut ConfigStream<T, S>,
    steps: usize,
) -> Result<ParticlePair<T>> {
    pair.grid.ensure_same(stream.current.grid())?;
    let dt = stream.dt();
    let tol = refine_tolerance(&pair.grid);
    for _ in 0..steps {
        let mid = stream.series.next_wave()?;
        let end = stream.series.next_wave()?;
        let waves = [&stream.current, &mid, &end];
        let c = stream.constants;
        let (q, ev) = rk4_adaptive(pair.x, dt, tol, &|theta, x| {
            pair_velocity(waves, theta, x, &c)
        });
        pair.x = [pair.grid.wrap(0, q[0]), pair.grid.wrap(1, q[1])];
        pair.capped_events += ev as u64;
        stream.current = end;
        stream.t += dt;
        pair.t = stream.t;
        if let Some(h) = pair.history.as_mut() {
            h.push((pair.t, pair.x));
        }
    }
    Ok(pair)
}

/// Pair ensemble in a harmonic trap, `U(x₁) + U(x₂)`, with
/// `Ψ₀ ∝ φ₀(x₁)φ₀(x₂) + φ₁(x₁)φ₀(x₂) + i φ₀(x₁)φ₁(x₂)`, run for one period. The
/// configuration has a single node that circles the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEquivarianceSetup {
    pub half_width: f64,
    pub points: usize,
    pub omega: f64,
    pub pairs: usize,
    pub bins: usize,
    pub steps: usize,
    pub seed: u64,
    pub constants: Constants<f64>,
}

impl Default for PairEquivarianceSetup {
    fn default() -> Self {
        Self {
            half_width: 12.0,
            points: 128,
            omega: 1.0,
            pairs: 10_000,
            bins: 32,
            steps: 200,
            seed: 1,
            constants: Constants::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairEquivarianceReport {
    pub l1_initial: f64,
    pub l1_final: f64,
    pub capped_trajectories: usize,
    pub capped_events: u64,
    pub degraded: bool,
}

/// Joint-histogram `L1` distance to `|Ψ|²` over `bins × bins` cells.
fn joint_l1(ens: &TrajectoryEnsemble<f64>, psi: &WaveField<f64>, bins: usize) -> Result<f64> {
    let mut hist = HistogramGrid::aligned(ens.grid(), bins)?;
    hist.fill(ens.positions(), None);
    let rho = hist.density_masses(&psi.density())?;
    Ok(hist
        .masses()
        .iter()
        .zip(&rho)
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Pairs drawn from `|Ψ₀|²` and moved by the configuration-space guidance, which equals the
/// pair of conditional velocities.
pub fn run_pair_equivariance(setup: &PairEquivarianceSetup) -> Result<PairEquivarianceReport> {
    let c = setup.constants;
    let grid = GridSpec::centered_plane(setup.half_width, setup.points)?;
    let w = [setup.omega; 2];
    let s01 = harmonic_state(&grid, [0, 1], w, &c)?;
    let s10 = harmonic_state(&grid, [1, 0], w, &c)?;
    let s00 = harmonic_state(&grid, [0, 0], w, &c)?;
    let psi0 = s00
        .add(&s10)?
        .add(&s01.scale(Complex::new(0.0, 1.0)))?
        .normalized()?;
    let u = Potential::Harmonic { omega: setup.omega }.realize(&grid, &c)?;
    if setup.steps == 0 {
        return Err(Error::Config("pair run needs at least one step".into()));
    }
    let dt = std::f64::consts::TAU / setup.omega / setup.steps as f64;
    let series = OracleSeries::new(&psi0, &u, dt / 2.0, &c)?;
    let mut stream = GuidanceStream::new(series, c, GuidanceMode::WaveGradient, 0.0)?;
    let ens = sample_equilibrium(&psi0.density(), setup.pairs, setup.seed, c)?;
    let l1_initial = joint_l1(&ens, &psi0, setup.bins)?;
    let ens = propagate_ensemble(ens, &mut stream, setup.steps)?;
    let l1_final = joint_l1(&ens, stream.current_wave(), setup.bins)?;
    Ok(PairEquivarianceReport {
        l1_initial,
        l1_final,
        capped_trajectories: ens.capped_trajectories(),
        capped_events: ens.capped_events(),
        degraded: ens.degraded(),
    })
}
