//! Conservative finite-volume reference solver for 1D viscous Burgers.
//!
//! Godunov flux for f(u) = u²/2, second-order central viscous term treated
//! explicitly, SSP-RK3 (Shu-Osher) time stepping under a CFL bound with
//! safety factor 0.4, Dirichlet ghost cells u = 0 at both ends.
//!
//! Shu-Osher stages:
//! ```text
//! u1    = u  +        dt L(u)
//! u2    = 3/4 u + 1/4 u1 + 1/4 dt L(u1)
//! u_new = 1/3 u + 2/3 u2 + 2/3 dt L(u2)
//! ```

use thiserror::Error;

use crate::tasks::BurgersTask;

#[derive(Debug, Error)]
pub enum FvError {
    #[error("finite-volume solution blew up at t = {t:.4} (max |u| = {max_u:.3e})")]
    BlowUp { t: f64, max_u: f64 },
}

/// Uniform finite-volume grid of cell averages on [0, 1].
#[derive(Clone, Debug)]
pub struct FvGrid {
    pub nx: usize,
    pub dx: f64,
    pub u: Vec<f64>,
    pub nu: f64,
    pub dt: f64,
    pub t: f64,
}

const CFL_SAFETY: f64 = 0.4;

impl FvGrid {
    pub fn new(nx: usize, nu: f64, u: Vec<f64>) -> FvGrid {
        assert_eq!(u.len(), nx);
        let dx = 1.0 / nx as f64;
        let mut g = FvGrid {
            nx,
            dx,
            u,
            nu,
            dt: 0.0,
            t: 0.0,
        };
        g.dt = g.cfl_dt();
        g
    }

    /// Largest stable step: 0.4·min(dx/max|u|, dx²/(2ν)).
    pub fn cfl_dt(&self) -> f64 {
        let max_u = self.u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let adv = if max_u > 0.0 {
            self.dx / max_u
        } else {
            f64::INFINITY
        };
        let visc = if self.nu > 0.0 {
            self.dx * self.dx / (2.0 * self.nu)
        } else {
            f64::INFINITY
        };
        CFL_SAFETY * adv.min(visc)
    }

    pub fn mass(&self) -> f64 {
        self.u.iter().sum::<f64>() * self.dx
    }
}

/// Exact Riemann flux for f(u) = u²/2: the minimum of f over [uL, uR] when
/// uL ≤ uR (zero if the interval straddles the sonic point), the maximum of
/// the endpoint fluxes otherwise.
pub fn godunov_flux(ul: f64, ur: f64) -> f64 {
    let f = |u: f64| 0.5 * u * u;
    if ul <= ur {
        if ul <= 0.0 && 0.0 <= ur {
            0.0
        } else {
            f(ul).min(f(ur))
        }
    } else {
        f(ul).max(f(ur))
    }
}

/// Spatial operator L(u) plus the exact rate of total-mass change implied by
/// its boundary fluxes (the interior fluxes telescope).
fn rhs(u: &[f64], dx: f64, nu: f64) -> (Vec<f64>, f64) {
    let nx = u.len();
    let ghost = 0.0; // Dirichlet u = 0
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= nx {
            ghost
        } else {
            u[i as usize]
        }
    };
    // interface fluxes F_{i-1/2} for i = 0..=nx
    let mut flux = Vec::with_capacity(nx + 1);
    for i in 0..=nx {
        flux.push(godunov_flux(at(i as isize - 1), at(i as isize)));
    }
    let mut l = Vec::with_capacity(nx);
    for i in 0..nx {
        let adv = -(flux[i + 1] - flux[i]) / dx;
        let visc = nu * (at(i as isize + 1) - 2.0 * u[i] + at(i as isize - 1)) / (dx * dx);
        l.push(adv + visc);
    }
    // mass rate from the two boundary interfaces only
    let visc_left = nu * (u[0] - ghost) / dx;
    let visc_right = nu * (ghost - u[nx - 1]) / dx;
    let mass_rate = -(flux[nx] - flux[0]) + (visc_right - visc_left);
    (l, mass_rate)
}

/// One SSP-RK3 step at the grid's `dt`. The CFL invariant must hold.
pub fn fv_step(grid: &FvGrid) -> FvGrid {
    assert!(
        grid.dt <= grid.cfl_dt() * (1.0 + 1e-12),
        "fv_step: CFL violation (dt = {}, bound = {})",
        grid.dt,
        grid.cfl_dt()
    );
    let dt = grid.dt;
    let dx = grid.dx;
    let nu = grid.nu;
    let (l0, _) = rhs(&grid.u, dx, nu);
    let u1: Vec<f64> = grid
        .u
        .iter()
        .zip(&l0)
        .map(|(&u, &l)| u + dt * l)
        .collect();
    let (l1, _) = rhs(&u1, dx, nu);
    let u2: Vec<f64> = grid
        .u
        .iter()
        .zip(u1.iter().zip(&l1))
        .map(|(&u, (&v1, &l))| 0.75 * u + 0.25 * v1 + 0.25 * dt * l)
        .collect();
    let (l2, _) = rhs(&u2, dx, nu);
    let u_new: Vec<f64> = grid
        .u
        .iter()
        .zip(u2.iter().zip(&l2))
        .map(|(&u, (&v2, &l))| u / 3.0 + 2.0 / 3.0 * v2 + 2.0 / 3.0 * dt * l)
        .collect();
    let mut out = FvGrid {
        nx: grid.nx,
        dx,
        u: u_new,
        nu,
        dt,
        t: grid.t + dt,
        };
    out.dt = out.cfl_dt();
    out
}

/// Mass change over one step predicted from boundary fluxes alone
/// (dt/6 · (m0 + m1 + 4 m2) under the Shu-Osher combination).
pub fn step_boundary_mass_change(grid: &FvGrid) -> f64 {
    let dt = grid.dt;
    let (l0, m0) = rhs(&grid.u, grid.dx, grid.nu);
    let u1: Vec<f64> = grid
        .u
        .iter()
        .zip(&l0)
        .map(|(&u, &l)| u + dt * l)
        .collect();
    let (l1, m1) = rhs(&u1, grid.dx, grid.nu);
    let u2: Vec<f64> = grid
        .u
        .iter()
        .zip(u1.iter().zip(&l1))
        .map(|(&u, (&v1, &l))| 0.75 * u + 0.25 * v1 + 0.25 * dt * l)
        .collect();
    let (_, m2) = rhs(&u2, grid.dx, grid.nu);
    dt * (m0 + m1 + 4.0 * m2) / 6.0
}

/// Space-time reference field stored as snapshots on a uniform time grid;
/// queries interpolate bilinearly (linear in x between cell centers with the
/// Dirichlet value at the walls, linear in t between snapshots).
#[derive(Clone, Debug)]
pub struct BurgersSnapshots {
    pub nx: usize,
    pub dx: f64,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl BurgersSnapshots {
    pub fn value(&self, x: f64, t: f64) -> f64 {
        let row = |k: usize, x: f64| -> f64 {
            let u = &self.rows[k];
            // cell centers at (i + 1/2) dx, walls pinned to 0
            let s = x / self.dx - 0.5;
            if s <= -0.5 {
                return 0.0;
            }
            if s >= self.nx as f64 - 0.5 {
                return 0.0;
            }
            if s < 0.0 {
                // between the left wall and the first cell center
                return lerp(0.0, u[0], x / (0.5 * self.dx));
            }
            if s > self.nx as f64 - 1.0 {
                let frac = (x - (self.nx as f64 - 0.5) * self.dx) / (0.5 * self.dx);
                return lerp(u[self.nx - 1], 0.0, frac);
            }
            let i = s.floor() as usize;
            let frac = s - i as f64;
            lerp(u[i], u[(i + 1).min(self.nx - 1)], frac)
        };
        let t_end = *self.times.last().unwrap();
        let tt = t.clamp(0.0, t_end);
        let dt_snap = t_end / (self.times.len() - 1) as f64;
        let k = ((tt / dt_snap).floor() as usize).min(self.times.len() - 2);
        let frac = (tt - self.times[k]) / dt_snap;
        lerp(row(k, x), row(k + 1, x), frac)
    }
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

/// Exact cell averages of the task's initial condition via its antiderivative.
fn initial_cell_averages(task: &BurgersTask, nx: usize) -> Vec<f64> {
    use crate::tasks::BurgersIc;
    let dx = 1.0 / nx as f64;
    let anti: Box<dyn Fn(f64) -> f64> = match task.ic {
        BurgersIc::SineMix { theta1, theta2 } => {
            let pi = std::f64::consts::PI;
            Box::new(move |x: f64| {
                -(pi * x).cos() / pi - theta1 * (2.0 * pi * x).cos() / (2.0 * pi)
                    - theta2 * (4.0 * pi * x).cos() / (4.0 * pi)
            })
        }
        BurgersIc::Traveling { a, c, x0 } => {
            let nu = task.nu;
            Box::new(move |x: f64| c * x - 2.0 * nu * ((a * (x - x0) / (2.0 * nu)).cosh().ln()))
        }
    };
    (0..nx)
        .map(|i| (anti((i + 1) as f64 * dx) - anti(i as f64 * dx)) / dx)
        .collect()
}

/// Integrate the task from its initial condition to `t_end`, storing
/// `n_snapshots + 1` uniformly spaced rows (including t = 0).
pub fn solve_burgers_reference(
    task: &BurgersTask,
    nx: usize,
    t_end: f64,
    n_snapshots: usize,
) -> Result<BurgersSnapshots, FvError> {
    assert!(nx >= 16, "solve_burgers_reference: nx must be >= 16");
    let mut grid = FvGrid::new(nx, task.nu, initial_cell_averages(task, nx));
    let dt_snap = t_end / n_snapshots as f64;
    let mut times = vec![0.0];
    let mut rows = vec![grid.u.clone()];
    for k in 1..=n_snapshots {
        let target = k as f64 * dt_snap;
        while grid.t < target - 1e-14 {
            let max_u = grid.u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            if max_u > 1e3 {
                return Err(FvError::BlowUp { t: grid.t, max_u });
            }
            grid.dt = grid.cfl_dt().min(target - grid.t);
            grid = fv_step(&grid);
        }
        times.push(target);
        rows.push(grid.u.clone());
    }
    Ok(BurgersSnapshots {
        nx,
        dx: grid.dx,
        times,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::BurgersIc;

    fn sine_task() -> BurgersTask {
        BurgersTask {
            ic: BurgersIc::SineMix {
                theta1: 0.0,
                theta2: 0.0,
            },
            nu: 0.01,
            t_end: 1.0,
        }
    }

    #[test]
    fn godunov_cases() {
        assert_eq!(godunov_flux(0.0, 0.0), 0.0);
        // shock with positive speed carries the left state
        assert_eq!(godunov_flux(1.0, 0.0), 0.5);
        // transonic rarefaction takes the sonic-point flux
        assert_eq!(godunov_flux(-1.0, 1.0), 0.0);
    }

    #[test]
    fn godunov_is_consistent() {
        for u in [-2.0, -0.3, 0.0, 0.7, 1.9] {
            assert_eq!(godunov_flux(u, u), 0.5 * u * u);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let mut grid = FvGrid::new(64, 0.01, vec![0.0; 64]);
        grid.dt = 1e-4;
        let next = fv_step(&grid);
        assert!(next.u.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn interior_mass_conservation() {
        let task = sine_task();
        let grid = FvGrid::new(128, task.nu, initial_cell_averages(&task, 128));
        let before = grid.mass();
        let predicted = step_boundary_mass_change(&grid);
        let after = fv_step(&grid).mass();
        assert!(
            ((after - before) - predicted).abs() <= 1e-12,
            "mass change {} vs boundary prediction {}",
            after - before,
            predicted
        );
    }

    #[test]
    fn initial_mass_is_two_over_pi() {
        let task = sine_task();
        let grid = FvGrid::new(256, task.nu, initial_cell_averages(&task, 256));
        assert!((grid.mass() - 2.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn max_abs_nonincreasing() {
        let task = sine_task();
        let snaps = solve_burgers_reference(&task, 128, 1.0, 20).unwrap();
        let max_abs: Vec<f64> = snaps
            .rows
            .iter()
            .map(|r| r.iter().fold(0.0f64, |m, &v| m.max(v.abs())))
            .collect();
        for w in max_abs.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn cfl_violation_is_contract_violation() {
        let task = sine_task();
        let mut grid = FvGrid::new(64, task.nu, initial_cell_averages(&task, 64));
        grid.dt = grid.cfl_dt() * 10.0;
        let res = std::panic::catch_unwind(|| fv_step(&grid));
        assert!(res.is_err());
    }

    #[test]
    fn interpolation_hits_cell_centers() {
        let task = sine_task();
        let snaps = solve_burgers_reference(&task, 64, 0.5, 10).unwrap();
        let k = 4;
        let t = snaps.times[k];
        for i in [0, 13, 31, 63] {
            let x = (i as f64 + 0.5) * snaps.dx;
            assert!((snaps.value(x, t) - snaps.rows[k][i]).abs() < 1e-14);
        }
        // walls pinned to the Dirichlet value
        assert_eq!(snaps.value(0.0, t), 0.0);
        assert_eq!(snaps.value(1.0, t), 0.0);
    }
}
