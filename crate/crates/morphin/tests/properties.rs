mod common;

use common::{close, ph_oracle};
use morphin::agents::{current_epsilon, dynamic_alpha};
use morphin::envs::{Environment, Gridworld, GridworldConfig};
use morphin::{
    ActionId, Agent, AgentConfig, AgentKind, Direction, PageHinkleyConfig, PageHinkleyState, QTable, StateId,
};
use proptest::prelude::*;

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![
        Just(Direction::DecreaseOnly),
        Just(Direction::IncreaseOnly),
        Just(Direction::TwoSided),
    ]
}

fn ph_config() -> impl Strategy<Value = PageHinkleyConfig> {
    (0.0..2.0f64, 1.0..400.0f64, direction(), 0usize..60).prop_map(|(delta, h, direction, min_samples)| {
        PageHinkleyConfig {
            delta,
            threshold_h: h,
            direction,
            min_samples,
        }
    })
}

// Piecewise-constant level plus noise, so alarms actually happen.
fn stream() -> impl Strategy<Value = Vec<f64>> {
    (
        -100.0..100.0f64,
        -100.0..100.0f64,
        1usize..400,
        prop::collection::vec(-5.0..5.0f64, 1..600),
    )
        .prop_map(|(a, b, at, noise)| {
            noise
                .iter()
                .enumerate()
                .map(|(i, n)| if i < at { a + n } else { b + n })
                .collect()
        })
}

fn run_until_alarm(cfg: &PageHinkleyConfig, xs: &[f64]) -> (Vec<PageHinkleyState>, Option<usize>) {
    let mut st = PageHinkleyState::new();
    let mut states = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let fired = st.update(cfg, x).unwrap();
        states.push(st);
        if fired {
            return (states, Some(i));
        }
    }
    (states, None)
}

fn random_table(actions: usize, states: usize, vals: &[f64]) -> QTable {
    let mut q = QTable::zeros(actions, states);
    for a in 0..actions {
        for s in 0..states {
            q.set(StateId(s), ActionId(a), vals[(a * states + s) % vals.len()]).unwrap();
        }
    }
    q
}

fn agent_cfg() -> impl Strategy<Value = AgentConfig> {
    (0.01..0.5f64, 0.0..0.5f64, 0.0..10.0f64, 0.0..0.5f64, 0.0..0.2f64).prop_map(
        |(alpha, extra, k, eps_min, decay)| AgentConfig {
            alpha_base: alpha,
            alpha_max: (alpha + extra + 1e-3).min(1.0),
            k,
            epsilon_min: eps_min,
            decay_rate: decay,
            ..AgentConfig::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn detector_matches_recomputation(cfg in ph_config(), xs in stream()) {
        let (states, alarm) = run_until_alarm(&cfg, &xs);
        let oracle = ph_oracle(&cfg, &xs);
        prop_assert_eq!(alarm, oracle.first_alarm);
        prop_assert_eq!(states.len(), oracle.mean.len());
        for (i, st) in states.iter().enumerate() {
            prop_assert!(close(st.running_mean, oracle.mean[i], 1e-9));
            prop_assert!(close(st.cum_dec, oracle.cum_dec[i], 1e-9));
            prop_assert!(close(st.cum_inc, oracle.cum_inc[i], 1e-9));
        }
    }

    #[test]
    fn larger_threshold_never_alarms_earlier(cfg in ph_config(), extra in 0.0..200.0f64, xs in stream()) {
        let hi = PageHinkleyConfig { threshold_h: cfg.threshold_h + extra, ..cfg };
        let (_, lo_alarm) = run_until_alarm(&cfg, &xs);
        let (_, hi_alarm) = run_until_alarm(&hi, &xs);
        match (lo_alarm, hi_alarm) {
            (Some(l), Some(h)) => prop_assert!(l <= h),
            (None, Some(_)) => prop_assert!(false, "higher threshold fired first"),
            _ => {}
        }
    }

    #[test]
    fn no_alarm_during_warm_up(cfg in ph_config(), xs in stream()) {
        if let (_, Some(i)) = run_until_alarm(&cfg, &xs) {
            prop_assert!(i + 1 > cfg.min_samples);
        }
    }

    #[test]
    fn expansion_keeps_old_values(
        actions in 1usize..6,
        states in 1usize..20,
        extra in 1usize..5,
        vals in prop::collection::vec(-50.0..50.0f64, 1..40),
    ) {
        let before = random_table(actions, states, &vals);
        let mut after = before.clone();
        after.expand_actions(actions + extra).unwrap();
        for s in 0..states {
            for a in 0..actions {
                prop_assert_eq!(after.get(StateId(s), ActionId(a)).unwrap(), before.get(StateId(s), ActionId(a)).unwrap());
            }
            for a in actions..actions + extra {
                prop_assert_eq!(after.get(StateId(s), ActionId(a)).unwrap(), 0.0);
            }
            let (old_max, old_arg) = before.max_over_actions(StateId(s)).unwrap();
            if old_max > 0.0 {
                prop_assert_eq!(after.max_over_actions(StateId(s)).unwrap().1, old_arg);
            }
        }
    }

    #[test]
    fn dynamic_alpha_bounded_and_monotone(cfg in agent_cfg(), a in 0.0..50.0f64, b in 0.0..50.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x = dynamic_alpha(&cfg, lo);
        let y = dynamic_alpha(&cfg, hi);
        prop_assert!(x >= cfg.alpha_base && y <= cfg.alpha_max);
        prop_assert!(x <= y);
        prop_assert_eq!(dynamic_alpha(&cfg, -lo), x);
    }

    #[test]
    fn epsilon_bounded_and_decreasing(cfg in agent_cfg(), e in 0u64..5000) {
        let now = current_epsilon(&cfg, e);
        let next = current_epsilon(&cfg, e + 1);
        prop_assert!(now >= cfg.epsilon_min && now <= 1.0);
        prop_assert!(next <= now);
    }

    #[test]
    fn degenerate_adaptive_agent_matches_baseline(seed in any::<u64>()) {
        let base = AgentConfig::default();
        let degenerate = AgentConfig {
            alpha_max: base.alpha_base + 1e-12,
            ph: PageHinkleyConfig { threshold_h: f64::INFINITY, ..base.ph },
            ..base
        };
        let grid = GridworldConfig { max_steps_per_episode: 30, ..GridworldConfig::default() };
        let mut agents = [
            (Agent::new(AgentKind::Morphin, degenerate, 4, grid.state_count(), seed), Gridworld::new(grid.clone()).unwrap()),
            (Agent::new(AgentKind::Baseline, base, 4, grid.state_count(), seed), Gridworld::new(grid.clone()).unwrap()),
        ];
        for (agent, env) in agents.iter_mut() {
            let mut s = env.reset();
            let mut ep_reward = 0.0;
            let mut eps = agent.epsilon();
            for _ in 0..100 {
                let (a, explored) = agent.select_action(s, eps).unwrap();
                let t = env.step(a).unwrap();
                agent.learn(t, eps, explored).unwrap();
                ep_reward += t.reward;
                s = t.next_state;
                if t.terminal {
                    agent.end_episode(ep_reward).unwrap();
                    ep_reward = 0.0;
                    eps = agent.epsilon();
                    s = env.reset();
                }
            }
        }
        let (m, b) = (agents[0].0.q(), agents[1].0.q());
        for s in 0..grid.state_count() {
            for a in 0..4 {
                let (x, y) = (m.get(StateId(s), ActionId(a)).unwrap(), b.get(StateId(s), ActionId(a)).unwrap());
                prop_assert!((x - y).abs() <= 1e-6, "state {} action {}: {} vs {}", s, a, x, y);
            }
        }
    }
}

// Learned values for the first goal survive an action expansion and are
// still there after the adaptive agent restarts exploration.
#[test]
fn expansion_preserves_learned_policy() {
    let cfg = AgentConfig::default();
    let mut agent = Agent::new(AgentKind::Morphin, cfg, 4, 81, 11);
    let q_before = {
        let mut q = QTable::zeros(4, 81);
        for s in 0..81 {
            q.set(StateId(s), ActionId(s % 4), 10.0 + s as f64).unwrap();
        }
        q
    };
    for s in 0..81 {
        for a in 0..4 {
            let t = morphin::Transition {
                state: StateId(s),
                action: ActionId(a),
                reward: q_before.get(StateId(s), ActionId(a)).unwrap(),
                next_state: StateId(s),
                terminal: true,
            };
            // Repeated terminal updates converge on the reward.
            for _ in 0..2000 {
                agent.learn(t, 0.0, false).unwrap();
            }
        }
    }
    let learned = agent.q().clone();
    for _ in 0..5 {
        agent.end_episode(-1.0).unwrap();
    }
    agent.on_actions_expanded(8).unwrap();
    assert_eq!(agent.decay_counter(), 0);
    for s in 0..81 {
        for a in 0..4 {
            assert_eq!(agent.q().get(StateId(s), ActionId(a)).unwrap(), learned.get(StateId(s), ActionId(a)).unwrap());
        }
        assert_eq!(agent.q().max_over_actions(StateId(s)).unwrap().1, ActionId(s % 4));
    }
}
