mod common;

use common::grid_distance;
use morphin::config::{ExperimentSpec, Scenario};
use morphin::envs::{Cell, Environment, Gridworld, GridworldConfig, Traffic, TrafficConfig};
use morphin::harness::{self, run_trial};
use morphin::stats::welch_t_test;
use morphin::{ActionId, Agent, AgentConfig, AgentKind, StateId};

#[test]
fn shortest_paths_match_reference_search() {
    let cfg = GridworldConfig::default();
    let centre = Cell(4, 4);
    for (corner, basic, jumps) in [(Cell(0, 0), 8, 4), (Cell(8, 8), 8, 4)] {
        assert_eq!(cfg.shortest_path(centre, corner, 4), Some(basic));
        assert_eq!(cfg.shortest_path(centre, corner, 8), Some(jumps));
    }
    for r in 0..9 {
        for c in 0..9 {
            for (n, jumps) in [(4, false), (8, true)] {
                let want = grid_distance((9, 9), (4, 4), (r, c), jumps);
                assert_eq!(cfg.shortest_path(centre, Cell(r, c), n), Some(want), "({r},{c}) jumps={jumps}");
            }
        }
    }
}

#[test]
fn uniform_exploration_at_full_epsilon() {
    let mut agent = Agent::new(AgentKind::Baseline, AgentConfig::default(), 4, 1, 99);
    let mut counts = [0usize; 4];
    let n = 10_000;
    for _ in 0..n {
        let (a, explored) = agent.select_action(StateId(0), 1.0).unwrap();
        assert!(explored);
        counts[a.0] += 1;
    }
    let sd = (n as f64 * 0.25 * 0.75).sqrt();
    for c in counts {
        assert!((c as f64 - 2500.0).abs() < 3.0 * sd, "{counts:?}");
    }
}

// One green step serving lane 1 from queue 3 with capacity 2 and unit
// arrival rate leaves 1 + Poisson(1) cars.
#[test]
fn queue_after_one_step_is_shifted_poisson() {
    let cfg = TrafficConfig {
        drift_schedule: vec![],
        ..TrafficConfig::default()
    };
    let mut env = Traffic::new(cfg, 5).unwrap();
    env.reset();
    env.set_rates((1.0, 0.0));
    let n = 100_000;
    let (mut sum, mut ones) = (0.0, 0usize);
    for _ in 0..n {
        env.set_queues((3, 0));
        env.step(ActionId(0)).unwrap();
        let q = env.queues().0;
        sum += q as f64;
        ones += (q == 1) as usize;
    }
    let mean = sum / n as f64;
    assert!((mean - 2.0).abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
    let p0 = (-1.0f64).exp();
    let share = ones as f64 / n as f64;
    assert!((share - p0).abs() < 3.0 * (p0 * (1.0 - p0) / n as f64).sqrt(), "P(q=1) {share}");
}

fn sample(mean: f64, sd: f64, n: usize) -> Vec<f64> {
    // Alternating +-c has sample variance c^2 * n / (n - 1).
    let c = sd * ((n - 1) as f64 / n as f64).sqrt();
    (0..n).map(|i| if i % 2 == 0 { mean + c } else { mean - c }).collect()
}

fn welch_closed_form(ma: f64, sa: f64, na: f64, mb: f64, sb: f64, nb: f64) -> (f64, f64) {
    let (ua, ub) = (sa * sa / na, sb * sb / nb);
    let t = (ma - mb) / (ua + ub).sqrt();
    let df = (ua + ub).powi(2) / (ua * ua / (na - 1.0) + ub * ub / (nb - 1.0));
    (t, df)
}

// Two-sided tail of Student's t by Simpson quadrature, normalized by the
// half-line integral so no gamma function is needed.
fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let g = |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let integral = |lo: f64| {
        // x = lo + u / (1 - u) maps [0, 1) onto [lo, inf).
        let f = |u: f64| if u >= 1.0 { 0.0 } else { g(lo + u / (1.0 - u)) / ((1.0 - u) * (1.0 - u)) };
        let n = 200_000;
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    integral(t.abs()) / integral(0.0)
}

#[test]
fn welch_matches_closed_form() {
    let a = sample(40_000.0, 500.0, 30);
    let b = sample(23_000.0, 500.0, 30);
    let w = welch_t_test(&a, &b).unwrap();
    let (t, df) = welch_closed_form(40_000.0, 500.0, 30.0, 23_000.0, 500.0, 30.0);
    assert!((w.t - t).abs() < 1e-9 * t.abs());
    assert!((w.df - df).abs() < 1e-9);
    assert!(w.p_value < 1e-10);

    let a = sample(10.0, 2.0, 12);
    let b = sample(11.5, 3.0, 20);
    let w = welch_t_test(&a, &b).unwrap();
    let (t, df) = welch_closed_form(10.0, 2.0, 12.0, 11.5, 3.0, 20.0);
    assert!((w.t - t).abs() < 1e-9);
    assert!((w.df - df).abs() < 1e-9);
    let p = t_two_sided_p(t, df);
    assert!((w.p_value - p).abs() < 1e-6, "{} vs {p}", w.p_value);
}

fn greedy_path_len(cfg: &GridworldConfig, q: &morphin::QTable) -> Option<usize> {
    let mut env = Gridworld::new(cfg.clone()).unwrap();
    env.on_episode_start(0, false).unwrap();
    let mut s = env.reset();
    for n in 1..=50 {
        let a = q.max_over_actions(s).unwrap().1;
        let t = env.step(a).unwrap();
        if env.position() == env.goal() {
            return Some(n);
        }
        if t.terminal {
            return None;
        }
        s = t.next_state;
    }
    None
}

#[test]
fn baseline_learns_stationary_gridworld() {
    let mut spec = ExperimentSpec::preset(Scenario::GridworldGoals);
    spec.gridworld.goal_swap_period = None;
    spec.episodes = 300;
    spec.trials = 100;
    spec.base_seed = 7;
    let recs = harness::run_trials(&spec, AgentKind::Baseline).unwrap();
    let optimal = recs
        .iter()
        .filter(|r| greedy_path_len(&spec.gridworld, &r.final_q) == Some(8))
        .count();
    assert!(optimal >= 95, "{optimal}/100 trials on the 8-step path");
}

#[test]
fn trials_are_order_independent() {
    for scenario in [Scenario::GridworldGoals, Scenario::GridworldActions, Scenario::Traffic] {
        let mut spec = ExperimentSpec::desk(scenario);
        spec.trials = 6;
        spec.episodes = spec.episodes.min(700);
        for kind in AgentKind::ALL {
            let seq = harness::run_trials_sequential(&spec, kind).unwrap();
            let par = harness::run_trials(&spec, kind).unwrap();
            assert_eq!(seq, par);
            assert_eq!(run_trial(&spec, kind, 4).unwrap(), seq[4]);
        }
    }
}
