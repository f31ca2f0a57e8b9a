use proptest::prelude::*;

use relaybound_core::mdp::{policy_evaluate, policy_improve, Rounding};
use relaybound_core::relay::{harvest_energy, lambda_max, rd_success_prob, residual_energy, snr_sr};
use relaybound_core::{
    build_mdp, policy_iteration, upper_bound, Action, FiniteChannel, MdpModel, RelayModel, State, StateClass,
    SystemParams,
};

fn params() -> impl Strategy<Value = SystemParams> {
    (0.01f64..5.0, 1e-4f64..1e-2, 0.5f64..2.0, 0.1f64..0.9, 0.5f64..3.0, 0.5f64..20.0)
        .prop_map(|(ps, n, t, eta, rate, b)| SystemParams::new(ps, n, t, eta, rate, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sr_snr_non_increasing_in_ratio(h in 0.0f64..10.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0, p in params()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(snr_sr(h, hi, &p).unwrap() <= snr_sr(h, lo, &p).unwrap() + 1e-12);
    }

    #[test]
    fn rd_success_non_decreasing_in_energy(u in 0.0f64..5.0, du in 0.0f64..5.0, p in params(), n in 1usize..40) {
        let g = FiniteChannel::equiprobable_exponential(n).unwrap();
        prop_assert!(rd_success_prob(u + du, &g, &p) >= rd_success_prob(u, &g, &p));
    }

    #[test]
    fn reward_and_energy_bounds(p in params(), frac_e in 0.0f64..=1.0, ci in 0usize..30,
                                lam in 0.0f64..=1.0, frac_u in 0.0f64..=1.0) {
        let relay = RelayModel::rayleigh(p, 30).unwrap();
        let s = State { energy: frac_e * p.battery_capacity(), channel_index: ci };
        let h = relay.h(&s);
        let avail = harvest_energy(s.energy, h, lam, &p).unwrap();
        prop_assert!(avail >= s.energy && avail <= p.battery_capacity());
        let a = Action { ps_ratio: lam, transmit_energy: frac_u * avail };
        let r = relay.reward(&s, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        let left = residual_energy(s.energy, h, &a, &p).unwrap();
        prop_assert!(left >= 0.0 && left <= p.battery_capacity());

        // more energy at a decodable ratio never hurts
        if let Some(lm) = lambda_max(h, &p) {
            let weak = Action { ps_ratio: lm, transmit_energy: frac_u * harvest_energy(s.energy, h, lm, &p).unwrap() };
            let strong = Action { ps_ratio: lm, transmit_energy: harvest_energy(s.energy, h, lm, &p).unwrap() };
            prop_assert!(relay.reward(&s, &strong).unwrap() >= relay.reward(&s, &weak).unwrap());
        }
        if relay.classify(&s) == StateClass::C1 {
            prop_assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn enumerated_actions_land_on_the_grid(p in params(), n_b in 2usize..7) {
        let relay = RelayModel::rayleigh(p, 12).unwrap();
        let m = build_mdp(&relay, n_b).unwrap();
        for s in 0..m.n_states() {
            let st = m.state(s);
            let e = m.grid().level(st.level);
            let h = relay.h_channel.gain(st.channel);
            let cls = relay.classify(&State { energy: e, channel_index: st.channel });
            prop_assert!(!m.actions(s).is_empty());
            prop_assert_eq!(m.actions(s)[0].ps_ratio, 1.0);
            prop_assert_eq!(m.actions(s)[0].target_level, 0);
            for a in m.actions(s) {
                let lm = lambda_max(h, &p);
                prop_assert!(a.ps_ratio == 1.0 || Some(a.ps_ratio) == lm);
                let left = residual_energy(e, h, &a.action(), &p).unwrap();
                prop_assert!((left - m.grid().level(a.target_level)).abs() <= 1e-9 * (1.0 + p.battery_capacity()));
                if cls == StateClass::C1 {
                    prop_assert_eq!(a.reward, 0.0);
                }
            }
            for a in 0..m.actions(s).len() {
                let row = m.transition_row(s, a);
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bound_dominates_heuristic_and_nests(p in params()) {
        let relay = RelayModel::rayleigh(p, 16).unwrap();
        let heur = relay.heuristic_average_success();
        let mut bounds = Vec::new();
        for n_b in [3, 5, 9] {
            let m = build_mdp(&relay, n_b).unwrap();
            let res = policy_iteration(&m, &m.default_rule()).unwrap();
            let pu = upper_bound(&m, &res).unwrap();
            prop_assert!(pu >= heur - 1e-9, "N_b={} bound {} below heuristic {}", n_b, pu, heur);
            prop_assert!(pu <= 1.0 + 1e-12);
            for w in res.gain_history.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
            bounds.push(pu);
        }
        // 3 -> 5 -> 9 levels nest
        prop_assert!(bounds[1] <= bounds[0] + 1e-9);
        prop_assert!(bounds[2] <= bounds[1] + 1e-9);
    }
}

#[test]
fn optimal_rule_is_a_fixed_point() {
    let relay = RelayModel::rayleigh(SystemParams::default().with_battery_capacity(4.0).unwrap(), 40).unwrap();
    let m = MdpModel::build(&relay, 5, Rounding::ExactUp).unwrap();
    let res = policy_iteration(&m, &m.default_rule()).unwrap();
    let eval = policy_evaluate(&m, &res.rule).unwrap();
    assert_eq!(policy_improve(&m, &res.rule, &eval), res.rule);
    assert!(res.iterations <= 10_000);
}
