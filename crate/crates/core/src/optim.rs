//! Small local optimizers used for kernel fitting, density fitting and
//! acquisition refinement. All maximize.

/// Projected gradient ascent on a box with Barzilai–Borwein step sizes and
/// Armijo backtracking. `f` returns the objective and its gradient, or
/// `None` where the objective is undefined (treated as a failed step).
pub fn box_gradient_ascent<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_iter: usize,
) -> Option<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let project = |x: &mut [f64]| {
        for ((xi, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
            *xi = xi.clamp(*lo, *hi);
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let mut step = 1.0;
    for _ in 0..max_iter {
        let mut trial = vec![0.0; x.len()];
        let pg_norm = x
            .iter()
            .zip(&g)
            .zip(lower.iter().zip(upper))
            .map(|((xi, gi), (lo, hi))| ((xi + gi).clamp(*lo, *hi) - xi).abs())
            .fold(0.0, f64::max);
        if pg_norm < 1e-7 {
            break;
        }
        let mut accepted = None;
        let mut alpha = step;
        for _ in 0..40 {
            for i in 0..x.len() {
                trial[i] = x[i] + alpha * g[i];
            }
            project(&mut trial);
            let dir: f64 = trial.iter().zip(&x).zip(&g).map(|((t, xi), gi)| (t - xi) * gi).sum();
            if dir <= 0.0 {
                break;
            }
            if let Some((ft, gt)) = f(&trial) {
                if ft >= fx + 1e-4 * dir {
                    accepted = Some((ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((ft, gt)) = accepted else { break };
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yk: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yk).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy < 0.0 { (ss / -sy).clamp(1e-6, 1e3) } else { 1.0 };
        let improvement = ft - fx;
        x.clone_from(&trial);
        fx = ft;
        g = gt;
        if improvement.abs() < 1e-10 * (1.0 + fx.abs()) {
            break;
        }
    }
    Some((x, fx))
}

/// Nelder–Mead simplex maximization without bounds. Returns the best vertex
/// and its value.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], initial_step: f64, max_evals: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() { f64::NEG_INFINITY } else { v }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += initial_step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    let mut evals = n + 1;
    while evals < max_evals {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = simplex
            .iter()
            .skip(1)
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (best - worst).abs() <= 1e-12 * (1.0 + best.abs()) && spread < 1e-9 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr);
        evals += 1;
        if fr > simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe);
            evals += 1;
            simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr > simplex[n].1 {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc > simplex[n].1.max(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&x_best) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    *v = eval(x);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    simplex.swap_remove(0)
}

/// Golden-section search for a maximum of `f` on `[a, b]` using exactly
/// `iterations` interval reductions. Returns the best point evaluated and
/// its value.
pub fn golden_section_max<F>(mut f: F, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fd > fc { (d, fd) } else { (c, fc) };
    for _ in 0..iterations {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    best
}
