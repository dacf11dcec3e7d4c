//! Derivative-free box-constrained minimizers with explicit evaluation budgets.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best point found and the number of objective evaluations spent.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
}

fn better(a: f64, b: f64) -> bool {
    // NaN never wins
    a < b || (b.is_nan() && !a.is_nan())
}

/// Stratified initial population: one point per stratum in every coordinate.
fn latin_hypercube(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let mut pop = vec![vec![0.0; bounds.len()]; n];
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (x, s) in pop.iter_mut().zip(strata) {
            x[j] = lo + (hi - lo) * (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pop
}

/// Differential evolution (current-to-pbest/1/bin), generation-synchronous so that
/// the sequence of evaluated points depends only on `seed`.
pub fn differential_evolution(
    bounds: &[(f64, f64)],
    budget: usize,
    seed: u64,
    f: &mut dyn FnMut(&[f64]) -> f64,
    stop: &dyn Fn() -> bool,
) -> Minimum {
    const WEIGHT: f64 = 0.6;
    const CROSSOVER: f64 = 0.9;
    // share of the population the guiding point is drawn from
    const GREED: f64 = 0.25;
    let d = bounds.len();
    let np = (4 * d).clamp(8, 40).min(budget.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pop = latin_hypercube(&mut rng, bounds, np);
    let mut evaluations = 0;
    let mut fit = Vec::with_capacity(np);
    for x in &pop {
        if evaluations >= budget || stop() {
            break;
        }
        fit.push(f(x));
        evaluations += 1;
    }
    pop.truncate(fit.len());
    if pop.len() >= 4 {
        'outer: while evaluations < budget && !stop() {
            let mut ranked: Vec<usize> = (0..pop.len()).collect();
            ranked.sort_by(|&a, &b| {
                if better(fit[a], fit[b]) {
                    Ordering::Less
                } else if better(fit[b], fit[a]) {
                    Ordering::Greater
                } else {
                    Ordering::Equal
                }
            });
            let top = ((pop.len() as f64 * GREED).ceil() as usize).max(1);
            let trials: Vec<Vec<f64>> = (0..pop.len())
                .map(|i| {
                    let mut pick = |exclude: &[usize]| loop {
                        let r = rng.random_range(0..pop.len());
                        if !exclude.contains(&r) {
                            break r;
                        }
                    };
                    let r1 = pick(&[i]);
                    let r2 = pick(&[i, r1]);
                    let guide = ranked[rng.random_range(0..top)];
                    let jrand = rng.random_range(0..d);
                    (0..d)
                        .map(|j| {
                            let (lo, hi) = bounds[j];
                            let x = pop[i][j];
                            if j != jrand && rng.random::<f64>() >= CROSSOVER {
                                return x;
                            }
                            let v = x + WEIGHT * (pop[guide][j] - x) + WEIGHT * (pop[r1][j] - pop[r2][j]);
                            // pull violations halfway back towards the parent
                            if v < lo {
                                0.5 * (lo + x)
                            } else if v > hi {
                                0.5 * (hi + x)
                            } else {
                                v
                            }
                        })
                        .collect()
                })
                .collect();
            let mut scores = Vec::with_capacity(trials.len());
            for t in &trials {
                if evaluations >= budget || stop() {
                    break;
                }
                scores.push(f(t));
                evaluations += 1;
            }
            for (i, (t, s)) in trials.into_iter().zip(scores.iter()).enumerate() {
                if !better(fit[i], *s) {
                    pop[i] = t;
                    fit[i] = *s;
                }
            }
            if scores.len() < pop.len() {
                break 'outer;
            }
        }
    }
    let Some(b) = (0..fit.len()).reduce(|b, i| if better(fit[i], fit[b]) { i } else { b }) else {
        return Minimum {
            x: bounds.iter().map(|b| b.0).collect(),
            f: f64::INFINITY,
            evaluations,
        };
    };
    Minimum {
        x: pop[b].clone(),
        f: fit[b],
        evaluations,
    }
}

fn clamp_into(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Nelder-Mead started at `x0` (with known value `f0`), projecting every trial point
/// onto the box. Parameters with `lo == hi` stay fixed.
pub fn nelder_mead(
    x0: &[f64],
    f0: f64,
    bounds: &[(f64, f64)],
    budget: usize,
    f: &mut dyn FnMut(&[f64]) -> f64,
    stop: &dyn Fn() -> bool,
) -> Minimum {
    let free: Vec<usize> = (0..x0.len()).filter(|&j| bounds[j].1 > bounds[j].0).collect();
    let mut evaluations = 0;
    let mut best = Minimum {
        x: x0.to_vec(),
        f: f0,
        evaluations: 0,
    };
    if free.is_empty() || budget == 0 {
        return best;
    }
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for &j in &free {
        if evaluations >= budget || stop() {
            break;
        }
        let (lo, hi) = bounds[j];
        let step = 0.1 * (hi - lo);
        let mut x = x0.to_vec();
        x[j] = if x0[j] + step <= hi { x0[j] + step } else { x0[j] - step };
        clamp_into(&mut x, bounds);
        let fx = eval(&x, &mut evaluations);
        simplex.push((x, fx));
    }
    if simplex.len() == free.len() + 1 {
        let n = x0.len();
        while evaluations < budget && !stop() {
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Greater));
            let spread = simplex[simplex.len() - 1].1 - simplex[0].1;
            if spread.abs() < 1e-14 {
                break;
            }
            let worst = simplex.len() - 1;
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..worst] {
                for j in 0..n {
                    centroid[j] += x[j] / worst as f64;
                }
            }
            let along = |t: f64| {
                let mut y: Vec<f64> = (0..n).map(|j| centroid[j] + t * (simplex[worst].0[j] - centroid[j])).collect();
                clamp_into(&mut y, bounds);
                y
            };
            let xr = along(-1.0);
            let fr = eval(&xr, &mut evaluations);
            if better(fr, simplex[0].1) {
                if evaluations >= budget || stop() {
                    simplex[worst] = (xr, fr);
                    break;
                }
                let xe = along(-2.0);
                let fe = eval(&xe, &mut evaluations);
                simplex[worst] = if better(fe, fr) { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if better(fr, simplex[worst - 1].1) {
                simplex[worst] = (xr, fr);
                continue;
            }
            if evaluations >= budget || stop() {
                break;
            }
            let outside = better(fr, simplex[worst].1);
            let xc = along(if outside { -0.5 } else { 0.5 });
            let fc = eval(&xc, &mut evaluations);
            let accept = if outside { fc <= fr } else { better(fc, simplex[worst].1) };
            if accept {
                simplex[worst] = (xc, fc);
                continue;
            }
            // shrink towards the best vertex
            let x_best = simplex[0].0.clone();
            for v in simplex.iter_mut().skip(1) {
                if evaluations >= budget || stop() {
                    break;
                }
                let mut y: Vec<f64> = (0..n).map(|j| x_best[j] + 0.5 * (v.0[j] - x_best[j])).collect();
                clamp_into(&mut y, bounds);
                let fy = eval(&y, &mut evaluations);
                *v = (y, fy);
            }
        }
    }
    for (x, fx) in simplex {
        if better(fx, best.f) {
            best = Minimum {
                x,
                f: fx,
                evaluations: 0,
            };
        }
    }
    best.evaluations = evaluations;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn de_respects_budget_and_bounds() {
        let b = [(-2.0, 2.0), (-1.0, 3.0)];
        let mut count = 0;
        let mut f = |x: &[f64]| {
            count += 1;
            assert!(x[0] >= -2.0 && x[0] <= 2.0 && x[1] >= -1.0 && x[1] <= 3.0);
            rosen(x)
        };
        let m = differential_evolution(&b, 300, 1, &mut f, &|| false);
        assert_eq!(m.evaluations, 300);
        assert_eq!(count, 300);
        assert!(m.f < 0.05, "{m:?}");
    }

    #[test]
    fn initial_population_is_stratified() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bounds = [(0.0, 1.0), (-2.0, 2.0), (5.0, 5.0)];
        let pop = latin_hypercube(&mut rng, &bounds, 8);
        for (j, &(lo, hi)) in bounds.iter().enumerate().take(2) {
            let mut cells: Vec<usize> = pop.iter().map(|x| ((x[j] - lo) / (hi - lo) * 8.0) as usize).collect();
            cells.sort();
            assert_eq!(cells, (0..8).collect::<Vec<_>>());
        }
        assert!(pop.iter().all(|x| x[2] == 5.0));
    }

    #[test]
    fn de_single_evaluation() {
        let b = [(0.0, 1.0)];
        let m = differential_evolution(&b, 1, 5, &mut |x: &[f64]| x[0], &|| false);
        assert_eq!(m.evaluations, 1);
        let again = differential_evolution(&b, 1, 5, &mut |x: &[f64]| x[0], &|| false);
        assert_eq!(m, again);
    }

    #[test]
    fn nelder_mead_refines() {
        let b = [(-2.0, 2.0), (-1.0, 3.0)];
        let x0 = [0.5, 0.5];
        let m = nelder_mead(&x0, rosen(&x0), &b, 400, &mut |x: &[f64]| rosen(x), &|| false);
        assert!(m.evaluations <= 400);
        assert!(m.f < 1e-4, "{m:?}");
    }

    #[test]
    fn nelder_mead_stays_in_box() {
        let b = [(0.0, 1.0), (0.0, 1.0)];
        let x0 = [0.5, 0.5];
        let target = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let m = nelder_mead(&x0, target(&x0), &b, 200, &mut |x: &[f64]| {
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
            target(x)
        }, &|| false);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && m.x[1].abs() < 1e-6);
    }

    #[test]
    fn zero_budget_returns_start() {
        let m = nelder_mead(&[0.3], 1.0, &[(0.0, 1.0)], 0, &mut |_: &[f64]| 0.0, &|| false);
        assert_eq!(m.x, vec![0.3]);
        assert_eq!(m.evaluations, 0);
    }
}
