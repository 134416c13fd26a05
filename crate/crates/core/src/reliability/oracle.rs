use super::forward::forward_unchecked;
use super::{check_unit, ReliabilityError, ReliabilityParams, StatTriple};

const POLISH_STARTS: usize = 8;
const EXACT_SSR: f64 = 1e-20;
const RIDGE_GAP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleVerdict {
    Unique,
    Multiple(usize),
    /// Exact fits lie on the unidentifiable set `r = g` or `θ ∈ {0, 1}`.
    Ridge,
    NoExactFit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleFit {
    /// Best polished fit, ordered so that `g <= r`.
    pub best: Option<ReliabilityParams>,
    pub ssr: f64,
    /// Best raw grid node, before polishing.
    pub grid_best: ReliabilityParams,
    pub grid_ssr: f64,
    pub exact: Vec<ReliabilityParams>,
    pub verdict: OracleVerdict,
    pub step: f64,
}

impl OracleFit {
    pub fn residual(&self, stats: &StatTriple) -> Option<f64> {
        self.best.map(|p| p.max_residual(stats))
    }
}

fn residuals(x: [f64; 3], s: &StatTriple) -> [f64; 3] {
    let f = forward_unchecked(x[0], x[1], x[2]);
    [f.re - s.re, f.ve_bar - s.ve_bar, f.ma - s.ma]
}

fn ssr(v: [f64; 3]) -> f64 {
    v.iter().map(|e| e * e).sum()
}

/// Each equation is linear in θ, so θ is profiled out in closed form.
fn profiled(r: f64, g: f64, s: &StatTriple) -> (f64, f64) {
    let base = [g.powi(4) - s.re, g - s.ve_bar, (1.0 - g).powi(4) - s.ma];
    let slope = [
        r.powi(4) - g.powi(4),
        r - g,
        (1.0 - r).powi(4) - (1.0 - g).powi(4),
    ];
    let ss: f64 = slope.iter().map(|v| v * v).sum();
    let theta = if ss > 0.0 {
        (-(base[0] * slope[0] + base[1] * slope[1] + base[2] * slope[2]) / ss).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let v = [
        base[0] + theta * slope[0],
        base[1] + theta * slope[1],
        base[2] + theta * slope[2],
    ];
    (theta, ssr(v))
}

fn jacobian(x: [f64; 3]) -> [[f64; 3]; 3] {
    let [t, r, g] = x;
    [
        [
            r.powi(4) - g.powi(4),
            4.0 * t * r.powi(3),
            4.0 * (1.0 - t) * g.powi(3),
        ],
        [r - g, t, 1.0 - t],
        [
            (1.0 - r).powi(4) - (1.0 - g).powi(4),
            -4.0 * t * (1.0 - r).powi(3),
            -4.0 * (1.0 - t) * (1.0 - g).powi(3),
        ],
    ]
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Levenberg-Marquardt on the box `[0, 1]³`.
fn polish(start: [f64; 3], s: &StatTriple) -> ([f64; 3], f64) {
    let mut x = start;
    let mut res = residuals(x, s);
    let mut cost = ssr(res);
    let mut lambda = 1e-3;
    for _ in 0..300 {
        if cost < 1e-30 {
            break;
        }
        let j = jacobian(x);
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for a in 0..3 {
            for b in 0..3 {
                jtj[a][b] = (0..3).map(|i| j[i][a] * j[i][b]).sum();
            }
            jtr[a] = -(0..3).map(|i| j[i][a] * res[i]).sum::<f64>();
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for (d, row) in damped.iter_mut().enumerate() {
                row[d] += lambda * (jtj[d][d] + 1e-12);
            }
            let Some(step) = solve3(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [
                (x[0] + step[0]).clamp(0.0, 1.0),
                (x[1] + step[1]).clamp(0.0, 1.0),
                (x[2] + step[2]).clamp(0.0, 1.0),
            ];
            let trial_res = residuals(trial, s);
            let trial_cost = ssr(trial_res);
            if trial_cost < cost {
                x = trial;
                res = trial_res;
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x, cost)
}

fn ordered(x: [f64; 3]) -> ReliabilityParams {
    let [t, r, g] = x;
    if r < g {
        ReliabilityParams::new(1.0 - t, g, r)
    } else {
        ReliabilityParams::new(t, r, g)
    }
}

/// Brute-force least squares over an `(r, g)` grid with `g < r`, θ profiled
/// out, then the best local minima polished by Levenberg-Marquardt.
pub fn oracle_grid_solve(
    stats: StatTriple,
    resolution: usize,
) -> Result<OracleFit, ReliabilityError> {
    if resolution < 100 {
        return Err(ReliabilityError::ResolutionTooLow(resolution));
    }
    check_unit("re", stats.re)?;
    check_unit("ve_bar", stats.ve_bar)?;
    check_unit("ma", stats.ma)?;

    let n = resolution + 1;
    let step = 1.0 / resolution as f64;
    let idx = |i: usize, j: usize| i * n + j;
    let mut cost = vec![f64::INFINITY; n * n];
    let mut theta = vec![0.0; n * n];
    // i indexes r, j indexes g
    for i in 0..n {
        let r = i as f64 * step;
        for j in 0..i {
            let (t, c) = profiled(r, j as f64 * step, &stats);
            cost[idx(i, j)] = c;
            theta[idx(i, j)] = t;
        }
    }

    let mut grid_arg = idx(1, 0);
    let mut minima = Vec::new();
    for i in 1..n {
        for j in 0..i {
            let c = cost[idx(i, j)];
            if c < cost[grid_arg] {
                grid_arg = idx(i, j);
            }
            let mut is_min = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                        continue;
                    }
                    if cost[idx(ni as usize, nj as usize)] < c {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                minima.push((c, i, j));
            }
        }
    }
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    minima.truncate(POLISH_STARTS);

    let grid_best = {
        let (i, j) = (grid_arg / n, grid_arg % n);
        ReliabilityParams::new(theta[grid_arg], i as f64 * step, j as f64 * step)
    };
    let grid_ssr = cost[grid_arg];

    let mut best: Option<(ReliabilityParams, f64)> = None;
    let mut exact: Vec<ReliabilityParams> = Vec::new();
    for &(_, i, j) in &minima {
        let start = [theta[idx(i, j)], i as f64 * step, j as f64 * step];
        let (x, c) = polish(start, &stats);
        let p = ordered(x);
        if best.is_none_or(|(_, bc)| c < bc) {
            best = Some((p, c));
        }
        if c <= EXACT_SSR && !exact.iter().any(|q| q.max_abs_diff(&p) < 1e-6) {
            exact.push(p);
        }
    }

    let on_ridge = |p: &ReliabilityParams| {
        p.r - p.g < RIDGE_GAP || p.theta < RIDGE_GAP || p.theta > 1.0 - RIDGE_GAP
    };
    let verdict = if exact.iter().any(on_ridge) {
        OracleVerdict::Ridge
    } else {
        match exact.len() {
            0 => OracleVerdict::NoExactFit,
            1 => OracleVerdict::Unique,
            k => OracleVerdict::Multiple(k),
        }
    };

    let (best, ssr) = match best {
        Some((p, c)) => (Some(p), c),
        None => (Some(grid_best), grid_ssr),
    };
    Ok(OracleFit {
        best,
        ssr,
        grid_best,
        grid_ssr,
        exact,
        verdict,
        step,
    })
}
