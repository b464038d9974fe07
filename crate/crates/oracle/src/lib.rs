//! Slow, self-contained reference solvers for small grids.
//!
//! Nothing here depends on the production crate. Interpolation, wall
//! handling and the control minimization are written out directly so that
//! agreement with the fast solver means something.

use std::fmt;

pub const MAX_CELLS_PER_SIDE: usize = 25;
pub const MAX_STEPS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    TooLarge { n1: usize, n2: usize, nt: usize },
    Invalid(&'static str),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::TooLarge { n1, n2, nt } => write!(
                f,
                "oracle grid {n1}x{n2} with {nt} steps exceeds {MAX_CELLS_PER_SIDE}x{MAX_CELLS_PER_SIDE}x{MAX_STEPS}"
            ),
            OracleError::Invalid(why) => write!(f, "invalid oracle input: {why}"),
        }
    }
}

impl std::error::Error for OracleError {}

/// Cell-centered grid on `[0, w] x [0, h]` with at most 25x25 cells and 60 steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
    pub dt: f64,
    pub nt: usize,
}

impl OracleGrid {
    pub fn new(w: f64, h: f64, n1: usize, n2: usize, horizon: f64, nt: usize) -> Result<Self, OracleError> {
        if n1 > MAX_CELLS_PER_SIDE || n2 > MAX_CELLS_PER_SIDE || nt > MAX_STEPS {
            return Err(OracleError::TooLarge { n1, n2, nt });
        }
        if n1 < 2 || n2 < 2 || nt < 1 || !(w > 0.0 && h > 0.0 && horizon > 0.0) {
            return Err(OracleError::Invalid("need at least 2x2 cells, 1 step, positive extents"));
        }
        Ok(OracleGrid {
            n1,
            n2,
            h1: w / n1 as f64,
            h2: h / n2 as f64,
            dt: horizon / nt as f64,
            nt,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h1
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h2
    }

    fn boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n1 - 1 || j == self.n2 - 1
    }
}

/// Value table `table[n][j][i]`.
pub type Table = Vec<Vec<Vec<f64>>>;

/// Bilinear value of `v` (indexed `[j][i]`) at `(x, y)` after clamping to the centers.
fn sample(og: &OracleGrid, v: &[Vec<f64>], x: f64, y: f64) -> f64 {
    let fx = (x / og.h1 - 0.5).max(0.0).min((og.n1 - 1) as f64);
    let fy = (y / og.h2 - 0.5).max(0.0).min((og.n2 - 1) as f64);
    let mut i = fx.floor() as usize;
    let mut j = fy.floor() as usize;
    if i == og.n1 - 1 {
        i -= 1;
    }
    if j == og.n2 - 1 {
        j -= 1;
    }
    let (a, b) = (fx - i as f64, fy - j as f64);
    (1.0 - a) * (1.0 - b) * v[j][i] + a * (1.0 - b) * v[j][i + 1] + (1.0 - a) * b * v[j + 1][i] + a * b * v[j + 1][i + 1]
}

/// Backward problem for [`brute_force_value`].
pub enum Problem<'a> {
    /// `φ(T) = terminal`, running cost `running(x, y, n)`, diffusion `sigma`.
    FiniteHorizon {
        running: &'a dyn Fn(f64, f64, usize) -> f64,
        terminal: &'a dyn Fn(f64, f64) -> f64,
        sigma: f64,
    },
    /// Unit running cost; boundary cells with `exit(i, j, n)` are held at zero.
    MinimumTime { exit: &'a dyn Fn(usize, usize, usize) -> bool },
}

/// Dynamic-programming recursion for the value function.
///
/// `velocity(i, j, k, n)` is the already wall-projected velocity of control
/// `k` at cell `(i, j)` and level `n`. Boundary cells are walls held at
/// `wall`, and every interpolated value is capped at `wall`.
pub fn brute_force_value(
    og: &OracleGrid,
    problem: &Problem<'_>,
    controls: usize,
    velocity: &dyn Fn(usize, usize, usize, usize) -> (f64, f64),
    wall: f64,
) -> Table {
    let (n1, n2, nt) = (og.n1, og.n2, og.nt);
    let pinned = |i: usize, j: usize, n: usize| -> Option<f64> {
        if !og.boundary(i, j) {
            return None;
        }
        match problem {
            Problem::MinimumTime { exit } if exit(i, j, n) => Some(0.0),
            _ => Some(wall),
        }
    };
    let mut table = vec![vec![vec![0.0; n1]; n2]; nt + 1];
    for j in 0..n2 {
        for i in 0..n1 {
            table[nt][j][i] = match (pinned(i, j, nt), problem) {
                (Some(v), _) => v,
                (None, Problem::FiniteHorizon { terminal, .. }) => terminal(og.x(i), og.y(j)).min(wall),
                (None, Problem::MinimumTime { .. }) => wall,
            };
        }
    }
    let (xlo, xhi) = (og.x(0), og.x(n1 - 1));
    let (ylo, yhi) = (og.y(0), og.y(n2 - 1));
    for n in (1..=nt).rev() {
        for j in 0..n2 {
            for i in 0..n1 {
                if let Some(v) = pinned(i, j, n - 1) {
                    table[n - 1][j][i] = v;
                    continue;
                }
                let ell = match problem {
                    Problem::FiniteHorizon { running, .. } => running(og.x(i), og.y(j), n),
                    Problem::MinimumTime { .. } => 1.0,
                };
                let mut best = f64::INFINITY;
                for k in 0..controls {
                    let (vx, vy) = velocity(i, j, k, n);
                    let fx = (og.x(i) + og.dt * vx).max(xlo).min(xhi);
                    let fy = (og.y(j) + og.dt * vy).max(ylo).min(yhi);
                    let q = sample(og, &table[n], fx, fy).min(wall) + og.dt * ell;
                    if q < best {
                        best = q;
                    }
                }
                if let Problem::FiniteHorizon { sigma, .. } = problem {
                    if *sigma > 0.0 {
                        let c = table[n][j][i];
                        let nb = |a: usize, b: usize| if og.boundary(a, b) { c } else { table[n][b][a] };
                        let lap = nb(i + 1, j) + nb(i - 1, j) + nb(i, j + 1) + nb(i, j - 1) - 4.0 * c;
                        best += sigma * og.dt / (og.h1 * og.h2) * lap;
                    }
                }
                table[n - 1][j][i] = best.min(wall);
            }
        }
    }
    table
}

/// Unit-circle controls with boundary projection: outward components on
/// closed sides are removed. `open(i, j)` marks exit cells whose outward
/// motion is allowed.
pub fn projected_unit_controls<'a>(
    og: &OracleGrid,
    controls: usize,
    open: &'a dyn Fn(usize, usize) -> bool,
) -> impl Fn(usize, usize, usize, usize) -> (f64, f64) + 'a {
    let dirs: Vec<(f64, f64)> = (0..controls)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / controls as f64;
            (a.cos(), a.sin())
        })
        .collect();
    let (n1, n2) = (og.n1, og.n2);
    move |i, j, k, _n| {
        let (mut x, mut y) = dirs[k];
        let free = open(i, j);
        if !free {
            if (i == 0 && x < 0.0) || (i == n1 - 1 && x > 0.0) {
                x = 0.0;
            }
            if (j == 0 && y < 0.0) || (j == n2 - 1 && y > 0.0) {
                y = 0.0;
            }
        }
        (x, y)
    }
}

/// Godunov fast sweeping for `|∇u| = 1` with `u = 0` on `targets`.
///
/// Cells where `blocked(i, j)` holds are obstacles. Returns `u[j][i]`, with
/// `f64::INFINITY` where no target is reachable.
pub fn fast_sweep_distance(
    og: &OracleGrid,
    targets: &[(usize, usize)],
    blocked: &dyn Fn(usize, usize) -> bool,
) -> Vec<Vec<f64>> {
    let (n1, n2) = (og.n1, og.n2);
    let (h1, h2) = (og.h1, og.h2);
    let mut u = vec![vec![f64::INFINITY; n1]; n2];
    let mut fixed = vec![vec![false; n1]; n2];
    for &(i, j) in targets {
        u[j][i] = 0.0;
        fixed[j][i] = true;
    }
    let orders: [(bool, bool); 4] = [(false, false), (true, false), (false, true), (true, true)];
    loop {
        let mut change: f64 = 0.0;
        for &(rev_i, rev_j) in &orders {
            for jj in 0..n2 {
                let j = if rev_j { n2 - 1 - jj } else { jj };
                for ii in 0..n1 {
                    let i = if rev_i { n1 - 1 - ii } else { ii };
                    if fixed[j][i] || blocked(i, j) {
                        continue;
                    }
                    let a = {
                        let l = if i > 0 { u[j][i - 1] } else { f64::INFINITY };
                        let r = if i + 1 < n1 { u[j][i + 1] } else { f64::INFINITY };
                        l.min(r)
                    };
                    let b = {
                        let d = if j > 0 { u[j - 1][i] } else { f64::INFINITY };
                        let t = if j + 1 < n2 { u[j + 1][i] } else { f64::INFINITY };
                        d.min(t)
                    };
                    let cand = eikonal_update(a, b, h1, h2);
                    if cand < u[j][i] {
                        change = change.max(if u[j][i].is_finite() { u[j][i] - cand } else { f64::INFINITY });
                        u[j][i] = cand;
                    }
                }
            }
        }
        if change < 1e-14 {
            break;
        }
    }
    u
}

/// Solves `((u - a)/h1)² + ((u - b)/h2)² = 1` for the upwind root.
fn eikonal_update(a: f64, b: f64, h1: f64, h2: f64) -> f64 {
    if !a.is_finite() && !b.is_finite() {
        return f64::INFINITY;
    }
    let one_sided = (a + h1).min(b + h2);
    if !a.is_finite() || !b.is_finite() {
        return one_sided;
    }
    let (p, q) = (1.0 / (h1 * h1), 1.0 / (h2 * h2));
    let sa = p + q;
    let sb = -2.0 * (a * p + b * q);
    let sc = a * a * p + b * b * q - 1.0;
    let disc = sb * sb - 4.0 * sa * sc;
    if disc < 0.0 {
        return one_sided;
    }
    let u = (-sb + disc.sqrt()) / (2.0 * sa);
    if u >= a.max(b) {
        u
    } else {
        one_sided
    }
}
