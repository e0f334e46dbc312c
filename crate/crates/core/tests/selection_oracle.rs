mod common;

use blockmads::search::{cycle_select, SelectionMethod, SelectionState, Selector};
use common::{fixture, Reference};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn each_method_matches_reference_from_fresh_state(seed in any::<u64>()) {
        let fx = fixture(seed);
        for method in SelectionMethod::ALL {
            let mut sel = Selector::new(&fx.view, &fx.evaluated);
            let mut reference = Reference::new(&fx.view, &fx.evaluated);
            let (mut s1, mut s2) = (SelectionState::new(), SelectionState::new());
            prop_assert_eq!(
                sel.select(method, &mut s1, fx.delta_mesh),
                reference.select(method, &mut s2, fx.delta_mesh),
                "method {}", method
            );
            prop_assert_eq!(s1, s2);
        }
    }

    #[test]
    fn method_sequences_match_reference(seed in any::<u64>(), picks in prop::collection::vec(1u8..=6, 1..12)) {
        let fx = fixture(seed);
        let mut sel = Selector::new(&fx.view, &fx.evaluated);
        let mut reference = Reference::new(&fx.view, &fx.evaluated);
        let (mut s1, mut s2) = (SelectionState::new(), SelectionState::new());
        for id in picks {
            let method = SelectionMethod::from_id(id).unwrap();
            prop_assert_eq!(
                sel.select(method, &mut s1, fx.delta_mesh),
                reference.select(method, &mut s2, fx.delta_mesh)
            );
            prop_assert_eq!(&s1, &s2);
        }
    }

    #[test]
    fn isolation_and_density_numbers_match_reference(seed in any::<u64>()) {
        let fx = fixture(seed);
        let mut sel = Selector::new(&fx.view, &fx.evaluated);
        let reference = Reference::new(&fx.view, &fx.evaluated);
        let iso: Vec<usize> = (0..fx.view.len()).map(|i| reference.n_iso(i)).collect();
        let dens: Vec<usize> = (0..fx.view.len()).map(|i| reference.n_density(i)).collect();
        prop_assert_eq!(sel.isolation_numbers(), &iso[..]);
        prop_assert_eq!(sel.density_numbers(), &dens[..]);
    }

    #[test]
    fn cycle_select_respects_q_and_never_repeats(seed in any::<u64>(), q in 1usize..10) {
        let fx = fixture(seed);
        let cycle = [
            SelectionMethod::DistanceConstrained,
            SelectionMethod::FeasibilityMargin,
            SelectionMethod::MostIsolated,
            SelectionMethod::PopulatedArea,
        ];
        let mut state = SelectionState::new();
        let picks = cycle_select(&fx.view, &fx.evaluated, q, &cycle, &mut state, fx.delta_mesh);
        prop_assert!(picks.len() <= q);
        let mut seen = std::collections::HashSet::new();
        for (i, _) in &picks {
            prop_assert!(seen.insert(*i));
            let x = &fx.view.get(*i).x;
            prop_assert!(!fx.evaluated.iter().any(|e| e == x));
        }
        if let Some(m) = state.c_margin {
            prop_assert!(m <= 0.0);
        }
    }
}

#[test]
fn cycle_select_matches_reference_cycle() {
    for seed in 0..50 {
        let fx = fixture(seed);
        let cycle = [SelectionMethod::Best, SelectionMethod::MostDistant, SelectionMethod::PopulatedArea];
        let mut state = SelectionState::new();
        let got = cycle_select(&fx.view, &fx.evaluated, 5, &cycle, &mut state, fx.delta_mesh);

        let mut reference = Reference::new(&fx.view, &fx.evaluated);
        let mut ref_state = SelectionState::new();
        let mut expected = Vec::new();
        let (mut failures, mut k) = (0, 0);
        while expected.len() < 5 && failures < cycle.len() {
            let method = cycle[k % cycle.len()];
            k += 1;
            match reference.select(method, &mut ref_state, fx.delta_mesh) {
                Some(s) => {
                    expected.push((s, method));
                    failures = 0;
                }
                None => failures += 1,
            }
        }
        assert_eq!(got, expected, "seed {seed}");
    }
}
