//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use morphin::{Direction, PageHinkleyConfig};

pub struct PhOracle {
    pub mean: Vec<f64>,
    pub cum_dec: Vec<f64>,
    pub cum_inc: Vec<f64>,
    pub first_alarm: Option<usize>,
}

/// Detector statistics recomputed for every prefix of `values`, up to and
/// including the first alarm.
///
/// Prefix means come from plain sums. Each clamped cumulant is evaluated
/// through its closed form, the largest suffix sum of the per-sample
/// deviations (or zero), instead of the detector's recursion.
pub fn ph_oracle(cfg: &PageHinkleyConfig, values: &[f64]) -> PhOracle {
    let n = values.len();
    let mut sum = 0.0;
    let mut means = Vec::with_capacity(n);
    for (i, &x) in values.iter().enumerate() {
        sum += x;
        means.push(sum / (i + 1) as f64);
    }
    let mut out = PhOracle {
        mean: Vec::new(),
        cum_dec: Vec::new(),
        cum_inc: Vec::new(),
        first_alarm: None,
    };
    for t in 0..n {
        let (mut best_dec, mut best_inc) = (0.0f64, 0.0f64);
        let (mut run_dec, mut run_inc) = (0.0, 0.0);
        for j in (0..=t).rev() {
            run_dec += means[j] - values[j] - cfg.delta;
            run_inc += values[j] - means[j] - cfg.delta;
            best_dec = best_dec.max(run_dec);
            best_inc = best_inc.max(run_inc);
        }
        out.mean.push(means[t]);
        out.cum_dec.push(best_dec);
        out.cum_inc.push(best_inc);
        let h = cfg.threshold_h;
        let fired = t + 1 > cfg.min_samples
            && match cfg.direction {
                Direction::DecreaseOnly => best_dec > h,
                Direction::IncreaseOnly => best_inc > h,
                Direction::TwoSided => best_dec > h || best_inc > h,
            };
        if fired {
            out.first_alarm = Some(t);
            break;
        }
    }
    out
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Fewest moves between two cells of an obstacle-free grid. With jumps the
/// agent also moves two cells at once, clamped at the border.
pub fn grid_distance(
    (h, w): (usize, usize),
    from: (usize, usize),
    to: (usize, usize),
    jumps: bool,
) -> usize {
    use std::collections::VecDeque;
    let mut dist = vec![usize::MAX; h * w];
    let idx = |r: usize, c: usize| r * w + c;
    dist[idx(from.0, from.1)] = 0;
    let mut queue = VecDeque::from([from]);
    let reach: &[usize] = if jumps { &[1, 2] } else { &[1] };
    while let Some((r, c)) = queue.pop_front() {
        let d = dist[idx(r, c)];
        for &k in reach {
            let next = [
                (r.saturating_sub(k), c),
                ((r + k).min(h - 1), c),
                (r, c.saturating_sub(k)),
                (r, (c + k).min(w - 1)),
            ];
            for (nr, nc) in next {
                if dist[idx(nr, nc)] == usize::MAX {
                    dist[idx(nr, nc)] = d + 1;
                    queue.push_back((nr, nc));
                }
            }
        }
    }
    dist[idx(to.0, to.1)]
}
