//! Ensemble runs in a harmonic trap: equivariance from an equilibrium start and relaxation
//! from a uniform start.

use std::io::Write;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::{ScalarField, WaveField};
use crate::grid::GridSpec;
use crate::oracle::{harmonic_state, OracleSeries, Potential};

use super::ensemble::{propagate_ensemble, TrajectoryEnsemble};
use super::guidance::{GuidanceMode, GuidanceStream};
use super::histogram::{histogram_l1, relative_entropy, HistogramGrid};
use super::sampling::{sample_equilibrium, stream_rng};

/// Equivariance run: `Ψ₀ = (φ₀ + φ₁)/√2` in the trap `½mω²x²`, ensemble drawn from `|Ψ₀|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceSetup {
    pub half_width: f64,
    pub points: usize,
    pub omega: f64,
    pub trajectories: usize,
    pub bins: usize,
    /// Checkpoints spread evenly over one period `2π/ω`.
    pub checkpoints: usize,
    pub steps_per_checkpoint: usize,
    /// Coarse-graining cell for the reported `H̄`, in grid spacings.
    pub cell_spacings: usize,
    pub mode: GuidanceMode,
    pub seed: u64,
    pub constants: Constants<f64>,
}

impl Default for EquivarianceSetup {
    fn default() -> Self {
        Self {
            half_width: 12.0,
            points: 512,
            omega: 1.0,
            trajectories: 100_000,
            bins: 64,
            checkpoints: 10,
            steps_per_checkpoint: 50,
            cell_spacings: 8,
            mode: GuidanceMode::WaveGradient,
            seed: 1,
            constants: Constants::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EquivarianceReport {
    /// Checkpoint times, starting with `t = 0`.
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub h_coarse: Vec<f64>,
    pub capped_trajectories: usize,
    pub capped_events: u64,
    pub degraded: bool,
    /// Sorted order of the trajectories was the same at every checkpoint.
    pub order_preserved: bool,
    pub ensemble: TrajectoryEnsemble<f64>,
}

impl EquivarianceReport {
    /// Largest `L1` after `t = 0`.
    pub fn max_l1(&self) -> f64 {
        self.l1.iter().skip(1).fold(0.0, |m: f64, &v| m.max(v))
    }

    /// `t,L1,H_coarse`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,L1,H_coarse")?;
        for ((t, l), h) in self.times.iter().zip(&self.l1).zip(&self.h_coarse) {
            writeln!(out, "{t:e},{l:e},{h:e}")?;
        }
        Ok(())
    }
}

fn superposition(states: &[WaveField<f64>], coeffs: &[Complex<f64>]) -> Result<WaveField<f64>> {
    let mut acc = states[0].scale(coeffs[0]);
    for (s, &c) in states.iter().zip(coeffs).skip(1) {
        acc = acc.add(&s.scale(c))?;
    }
    acc.normalized()
}

fn is_sorted_by_rank(positions: &[[f64; 2]], rank: &[usize]) -> bool {
    rank.windows(2)
        .all(|w| positions[w[0]][0] <= positions[w[1]][0])
}

pub fn run_equivariance(setup: &EquivarianceSetup) -> Result<EquivarianceReport> {
    let c = setup.constants;
    let grid = GridSpec::centered_line(setup.half_width, setup.points)?;
    let w = [setup.omega, setup.omega];
    let phi0 = harmonic_state(&grid, [0, 0], w, &c)?;
    let phi1 = harmonic_state(&grid, [1, 0], w, &c)?;
    let psi0 = superposition(&[phi0, phi1], &[Complex::new(1.0, 0.0); 2])?;
    let u = Potential::Harmonic { omega: setup.omega }.realize(&grid, &c)?;

    let period = std::f64::consts::TAU / setup.omega;
    let steps = setup.checkpoints * setup.steps_per_checkpoint;
    if steps == 0 {
        return Err(Error::Config(
            "equivariance run needs at least one step".into(),
        ));
    }
    let dt = period / steps as f64;
    let series = OracleSeries::new(&psi0, &u, dt / 2.0, &c)?;
    let mut stream = GuidanceStream::new(series, c, setup.mode, 0.0)?;

    let mut ens = sample_equilibrium(&psi0.density(), setup.trajectories, setup.seed, c)?;
    let mut rank: Vec<usize> = (0..ens.len()).collect();
    rank.sort_by(|&a, &b| ens.positions()[a][0].total_cmp(&ens.positions()[b][0]));
    let cell = setup.cell_spacings as f64 * grid.spacing(0);
    let h_of = |e: &TrajectoryEnsemble<f64>, psi: &WaveField<f64>| -> Result<f64> {
        super::histogram::coarse_grained_h(e, psi, cell)
    };

    let mut times = vec![0.0];
    let mut l1 = vec![histogram_l1(&ens, &psi0, setup.bins)?];
    let mut h_coarse = vec![h_of(&ens, &psi0)?];
    let mut order_preserved = true;
    for _ in 0..setup.checkpoints {
        ens = propagate_ensemble(ens, &mut stream, setup.steps_per_checkpoint)?;
        let psi = stream.current_wave();
        times.push(stream.t());
        l1.push(histogram_l1(&ens, psi, setup.bins)?);
        h_coarse.push(h_of(&ens, psi)?);
        order_preserved &= is_sorted_by_rank(ens.positions(), &rank);
    }
    Ok(EquivarianceReport {
        times,
        l1,
        h_coarse,
        capped_trajectories: ens.capped_trajectories(),
        capped_events: ens.capped_events(),
        degraded: ens.degraded(),
        order_preserved,
        ensemble: ens,
    })
}

/// Relaxation run: `Ψ₀ = Σ c_k φ_{n_x}(x) φ_{n_y}(y)` over a 4×4 block of trap modes with
/// equal moduli and random phases, ensemble uniform on a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSetup {
    pub half_width: f64,
    pub points: usize,
    /// Trap frequencies along `x` and `y`; a period refers to `2π/ω_x`.
    pub omega: [f64; 2],
    /// Lowest quantum number of the 4×4 mode block on each axis.
    pub lowest_mode: usize,
    /// Initial positions are uniform on `[-a_x, a_x] × [-a_y, a_y]`.
    pub uniform_half_width: [f64; 2],
    pub trajectories: usize,
    pub cell_spacings: usize,
    pub checkpoints: usize,
    pub steps_per_checkpoint: usize,
    pub bootstrap: usize,
    pub mode: GuidanceMode,
    pub seed: u64,
    pub constants: Constants<f64>,
}

impl Default for RelaxationSetup {
    fn default() -> Self {
        let wy = 3f64.sqrt();
        Self {
            half_width: 6.0,
            points: 768,
            omega: [1.0, wy],
            lowest_mode: 0,
            uniform_half_width: [2.4, 2.4 / wy.sqrt()],
            trajectories: 50_000,
            cell_spacings: 8,
            checkpoints: 10,
            steps_per_checkpoint: 32,
            bootstrap: 200,
            mode: GuidanceMode::WaveGradient,
            seed: 1,
            constants: Constants::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelaxationReport {
    pub times: Vec<f64>,
    pub h: Vec<f64>,
    /// 2.5% and 97.5% bootstrap quantiles of `H̄(t_{k+1}) - H̄(t_k)`.
    pub increment_band: Vec<[f64; 2]>,
    /// The increment was positive and its whole 95% band lay above zero.
    pub significant_increase: Vec<bool>,
    pub capped_trajectories: usize,
    pub capped_events: u64,
    pub degraded: bool,
}

impl RelaxationReport {
    /// `1 - min_{t>0} H̄(t) / H̄(0)`.
    pub fn best_drop(&self) -> f64 {
        let min = self.h.iter().skip(1).fold(f64::INFINITY, |m, &v| m.min(v));
        1.0 - min / self.h[0]
    }

    /// `1 - H̄(T) / H̄(0)`.
    pub fn final_drop(&self) -> f64 {
        1.0 - self.h[self.h.len() - 1] / self.h[0]
    }

    pub fn significant_increases(&self) -> usize {
        self.significant_increase.iter().filter(|&&s| s).count()
    }

    /// `t,H_coarse,dH_lo,dH_hi`; the band columns refer to the step ending at `t`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,H_coarse,dH_lo,dH_hi")?;
        for (k, (t, h)) in self.times.iter().zip(&self.h).enumerate() {
            match k.checked_sub(1).map(|j| self.increment_band[j]) {
                Some([lo, hi]) => writeln!(out, "{t:e},{h:e},{lo:e},{hi:e}")?,
                None => writeln!(out, "{t:e},{h:e},,")?,
            }
        }
        Ok(())
    }
}

/// Initial wave function of a relaxation run; phases come from stream 0 of `seed`.
pub fn relaxation_state(
    setup: &RelaxationSetup,
    grid: &GridSpec<f64>,
    c: &Constants<f64>,
) -> Result<WaveField<f64>> {
    let mut rng = stream_rng(setup.seed, u64::MAX);
    let lo = setup.lowest_mode;
    let mut states = Vec::with_capacity(16);
    let mut coeffs = Vec::with_capacity(16);
    for nx in lo..lo + 4 {
        for ny in lo..lo + 4 {
            states.push(harmonic_state(grid, [nx, ny], setup.omega, c)?);
            let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            coeffs.push(Complex::from_polar(1.0, theta));
        }
    }
    superposition(&states, &coeffs)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

pub fn run_relaxation(setup: &RelaxationSetup) -> Result<RelaxationReport> {
    let c = setup.constants;
    let grid = GridSpec::centered_plane(setup.half_width, setup.points)?;
    let psi0 = relaxation_state(setup, &grid, &c)?;
    let [wx, wy] = setup.omega;
    let trap = ScalarField::from_fn(grid, |x, y| {
        0.5 * c.mass * (wx * wx * x * x + wy * wy * y * y)
    });
    let steps = setup.checkpoints * setup.steps_per_checkpoint;
    if steps == 0 || setup.bootstrap < 2 {
        return Err(Error::Config(
            "relaxation run needs steps and at least two resamples".into(),
        ));
    }
    let dt = std::f64::consts::TAU / wx / steps as f64;
    let series = OracleSeries::new(&psi0, &trap, dt / 2.0, &c)?;
    let mut stream = GuidanceStream::new(series, c, setup.mode, 0.0)?;

    let a = setup.uniform_half_width;
    let positions = (0..setup.trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(setup.seed, i as u64);
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            [a[0] * (2.0 * x - 1.0), a[1] * (2.0 * y - 1.0)]
        })
        .collect();
    let mut ens = TrajectoryEnsemble::new(grid, positions, setup.seed, c)?;

    let cell = setup.cell_spacings as f64 * grid.spacing(0);
    let hist = HistogramGrid::with_cell_size(&grid, cell)?;
    let mut times = vec![0.0];
    let mut cells: Vec<Vec<u32>> = Vec::with_capacity(setup.checkpoints + 1);
    let mut rho_cells: Vec<Vec<f64>> = Vec::with_capacity(setup.checkpoints + 1);
    let snap =
        |ens: &TrajectoryEnsemble<f64>, psi: &WaveField<f64>| -> Result<(Vec<u32>, Vec<f64>)> {
            let idx = ens
                .positions()
                .iter()
                .map(|&p| hist.bin_of(p) as u32)
                .collect();
            Ok((idx, hist.density_masses(&psi.density())?))
        };
    let (i0, r0) = snap(&ens, &psi0)?;
    cells.push(i0);
    rho_cells.push(r0);
    for _ in 0..setup.checkpoints {
        ens = propagate_ensemble(ens, &mut stream, setup.steps_per_checkpoint)?;
        let (i, r) = snap(&ens, stream.current_wave())?;
        times.push(stream.t());
        cells.push(i);
        rho_cells.push(r);
    }

    let n_cells = hist.bins();
    let h_with = |weights: Option<&[f64]>| -> Vec<f64> {
        cells
            .iter()
            .zip(&rho_cells)
            .map(|(idx, rho)| {
                let mut p = vec![0.0; n_cells];
                for (k, &b) in idx.iter().enumerate() {
                    p[b as usize] += weights.map_or(1.0, |w| w[k]);
                }
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= total);
                relative_entropy(&p, rho)
            })
            .collect()
    };
    let h = h_with(None);
    let n = setup.trajectories;
    let boot: Vec<Vec<f64>> = (0..setup.bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(setup.seed ^ 0x5eed_b007, b as u64);
            let mut w = vec![0.0; n];
            for _ in 0..n {
                w[rng.random_range(0..n)] += 1.0;
            }
            h_with(Some(&w))
        })
        .collect();
    let mut increment_band = Vec::with_capacity(setup.checkpoints);
    let mut significant_increase = Vec::with_capacity(setup.checkpoints);
    for k in 0..setup.checkpoints {
        let mut d: Vec<f64> = boot.iter().map(|hb| hb[k + 1] - hb[k]).collect();
        d.sort_by(f64::total_cmp);
        let band = [percentile(&d, 0.025), percentile(&d, 0.975)];
        significant_increase.push(h[k + 1] > h[k] && band[0] > 0.0);
        increment_band.push(band);
    }
    Ok(RelaxationReport {
        times,
        h,
        increment_band,
        significant_increase,
        capped_trajectories: ens.capped_trajectories(),
        capped_events: ens.capped_events(),
        degraded: ens.degraded(),
    })
}
