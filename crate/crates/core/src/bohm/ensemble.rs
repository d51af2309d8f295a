use std::io::Write;

use num_traits::Float;

use rayon::prelude::*;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::oracle::WaveSeries;
use crate::scalar::Real;

use super::guidance::{GuidanceField, GuidanceStream, Velocity};

/// Fraction of capped trajectories above which a run is degraded.
pub const DEGRADED_FRACTION: f64 = 1e-3;

/// Positions of all trajectories at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub t: T,
    pub positions: Vec<[T; 2]>,
}

/// Trajectories guided by a common wave function.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble<T> {
    grid: GridSpec<T>,
    positions: Vec<[T; 2]>,
    seed: u64,
    constants: Constants<T>,
    t: T,
    capped: Vec<bool>,
    capped_events: u64,
    history: Option<Vec<Snapshot<T>>>,
}

impl<T: Real> TrajectoryEnsemble<T> {
    /// Positions are wrapped into the grid's periodic domain.
    pub fn new(
        grid: GridSpec<T>,
        positions: Vec<[T; 2]>,
        seed: u64,
        constants: Constants<T>,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config(
                "an ensemble needs at least one trajectory".into(),
            ));
        }
        let dims = grid.dims();
        let positions: Vec<[T; 2]> = positions
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                if p.iter().take(dims).any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        what: "trajectory position",
                        index: i,
                    });
                }
                Ok(wrap(&grid, p))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            capped: vec![false; positions.len()],
            grid,
            positions,
            seed,
            constants,
            t: T::zero(),
            capped_events: 0,
            history: None,
        })
    }

    /// Starts recording a snapshot now and after every propagation step.
    pub fn with_history(mut self) -> Self {
        self.history = Some(vec![Snapshot {
            t: self.t,
            positions: self.positions.clone(),
        }]);
        self
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[T; 2]] {
        &self.positions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn constants(&self) -> &Constants<T> {
        &self.constants
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn history(&self) -> Option<&[Snapshot<T>]> {
        self.history.as_deref()
    }

    /// Total number of capped velocity evaluations.
    pub fn capped_events(&self) -> u64 {
        self.capped_events
    }

    /// Number of trajectories that hit the cap at least once.
    pub fn capped_trajectories(&self) -> usize {
        self.capped.iter().filter(|&&c| c).count()
    }

    pub fn capped_mask(&self) -> &[bool] {
        &self.capped
    }

    /// More than 0.1% of trajectories were capped.
    pub fn degraded(&self) -> bool {
        self.capped_trajectories() as f64 > DEGRADED_FRACTION * self.len() as f64
    }

    /// `traj_id,t,x[,y]`, one row per trajectory per recorded snapshot.
    pub fn write_history_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let two_d = self.grid.dims() == 2;
        writeln!(
            out,
            "{}",
            if two_d {
                "traj_id,t,x,y"
            } else {
                "traj_id,t,x"
            }
        )?;
        let current = [Snapshot {
            t: self.t,
            positions: self.positions.clone(),
        }];
        let snaps = self.history.as_deref().unwrap_or(&current);
        for (id, _) in self.positions.iter().enumerate() {
            for s in snaps {
                let p = s.positions[id];
                if two_d {
                    writeln!(out, "{id},{:e},{:e},{:e}", s.t, p[0], p[1])?;
                } else {
                    writeln!(out, "{id},{:e},{:e}", s.t, p[0])?;
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn wrap<T: Real>(grid: &GridSpec<T>, p: [T; 2]) -> [T; 2] {
    let y = if grid.dims() == 2 {
        grid.wrap(1, p[1])
    } else {
        T::zero()
    };
    [grid.wrap(0, p[0]), y]
}

/// A step is split when `dt·max|k_i - k_1|` over its RK4 stages exceeds this many grid
/// spacings.
pub const REFINE_TOLERANCE: f64 = 0.05;
/// Deepest step halving.
pub const MAX_REFINE_DEPTH: u32 = 12;

/// Quadratic Lagrange weights through `θ = 0, 1/2, 1`.
#[inline]
pub(crate) fn time_weights<T: Real>(theta: T) -> [T; 3] {
    let (half, one, two, four) = (T::lit(0.5), T::one(), T::lit(2.0), T::lit(4.0));
    [
        two * (theta - half) * (theta - one),
        -four * theta * (theta - one),
        two * theta * (theta - half),
    ]
}

#[inline]
fn add<T: Real>(p: [T; 2], k: [T; 2], a: T) -> [T; 2] {
    [p[0] + a * k[0], p[1] + a * k[1]]
}

/// One RK4 step of length `dt` for `dx/dt = v(θ, x)` with `θ ∈ [0, 1]` the fraction of the
/// step. Returns the new position and the number of capped stage evaluations.
///
/// Steps whose stage velocities differ by more than `tol` (times `1/dt`) are redone as two
/// half steps, down to [`MAX_REFINE_DEPTH`] halvings.
pub(crate) fn rk4_adaptive<T: Real>(
    p: [T; 2],
    dt: T,
    tol: T,
    v: &impl Fn(T, [T; 2]) -> Velocity<T>,
) -> ([T; 2], u32) {
    substep(p, T::zero(), T::one(), dt, tol, v, 0)
}

fn substep<T: Real>(
    p: [T; 2],
    theta0: T,
    dtheta: T,
    dt: T,
    tol: T,
    v: &impl Fn(T, [T; 2]) -> Velocity<T>,
    depth: u32,
) -> ([T; 2], u32) {
    let h = dtheta * dt;
    let half = T::lit(0.5);
    let tm = theta0 + half * dtheta;
    let k1 = v(theta0, p);
    let k2 = v(tm, add(p, k1.v, half * h));
    let k3 = v(tm, add(p, k2.v, half * h));
    let k4 = v(theta0 + dtheta, add(p, k3.v, h));
    let k = [k1, k2, k3, k4];
    let spread = k[1..].iter().fold(T::zero(), |m, ki| {
        let d0 = ki.v[0] - k1.v[0];
        let d1 = ki.v[1] - k1.v[1];
        Float::max(m, Float::sqrt(d0 * d0 + d1 * d1))
    }) * Float::abs(h);
    if depth < MAX_REFINE_DEPTH && spread > tol {
        let d = half * dtheta;
        let (q, e1) = substep(p, theta0, d, dt, tol, v, depth + 1);
        let (q, e2) = substep(q, tm, d, dt, tol, v, depth + 1);
        return (q, e1 + e2);
    }
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let q = [
        p[0] + sixth * (k1.v[0] + two * k2.v[0] + two * k3.v[0] + k4.v[0]),
        p[1] + sixth * (k1.v[1] + two * k2.v[1] + two * k3.v[1] + k4.v[1]),
    ];
    (q, k.iter().filter(|k| k.capped).count() as u32)
}

/// Guidance at fraction `θ` of a step: the snapshot fields at `θ = 0, 1/2, 1`, otherwise
/// `Ψ` and `∇Ψ` interpolated quadratically in time.
#[inline]
fn step_velocity<T: Real>(fields: [&GuidanceField<T>; 3], theta: T, x: [T; 2]) -> Velocity<T> {
    if theta == T::zero() {
        fields[0].velocity_at(x)
    } else if theta == T::lit(0.5) {
        fields[1].velocity_at(x)
    } else if theta == T::one() {
        fields[2].velocity_at(x)
    } else {
        GuidanceField::blended_velocity_at(fields, time_weights(theta), x)
    }
}

/// Refinement tolerance in length units for a grid.
pub(crate) fn refine_tolerance<T: Real>(grid: &GridSpec<T>) -> T {
    let h_min = (0..grid.dims())
        .map(|a| grid.spacing(a))
        .fold(T::infinity(), Float::min);
    T::lit(REFINE_TOLERANCE) * h_min
}

/// Advances every trajectory by `steps` RK4 steps of size `stream.dt()` along
/// `dx/dt = (ħ/m) Im(∇Ψ/Ψ)`, with `Ψ` taken from the stream at `t`, `t + dt/2` and `t + dt`.
///
/// Trajectories are independent and run in parallel; results do not depend on the
/// number of threads.
pub fn propagate_ensemble<T: Real, S: WaveSeries<T>>(
    mut ens: TrajectoryEnsemble<T>,
    stream: &mut GuidanceStream<T, S>,
    steps: usize,
) -> Result<TrajectoryEnsemble<T>> {
    ens.grid.ensure_same(stream.current().grid())?;
    let dt = stream.dt();
    let grid = ens.grid;
    let tol = refine_tolerance(&grid);
    for _ in 0..steps {
        let (mid, end) = stream.advance()?;
        let start = stream.replace_current(end);
        let end = stream.current();
        let events: u64 = ens
            .positions
            .par_iter_mut()
            .zip(ens.capped.par_iter_mut())
            .map(|(p, capped)| {
                let fields = [&start, &mid, end];
                let (q, ev) =
                    rk4_adaptive(*p, dt, tol, &|theta, x| step_velocity(fields, theta, x));
                *p = wrap(&grid, q);
                *capped |= ev > 0;
                ev as u64
            })
            .sum();
        ens.capped_events += events;
        ens.t = stream.t();
        if let Some(h) = ens.history.as_mut() {
            h.push(Snapshot {
                t: ens.t,
                positions: ens.positions.clone(),
            });
        }
    }
    Ok(ens)
}
