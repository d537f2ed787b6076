mod common;

use cakecut::allocation::{audit_envy_free, audit_proportional, structure_flags, Allocation};
use cakecut::efficiency::{
    audit_pareto_sp, dominates, find_improvement_exchange, improve_until_stable,
};
use cakecut::experiments::random_instance;
use cakecut::mechanisms::{run_envelope_um, run_ll, run_mww, run_um, run_ww};
use cakecut::{CakeInstance, Oracle, SinglePeakedValuation, AUDIT_TOL};
use proptest::prelude::*;

fn valuation() -> impl Strategy<Value = SinglePeakedValuation> {
    (0.0f64..=1.0, 1.05f64..8.0)
        .prop_map(|(p, h)| SinglePeakedValuation::from_peak_density(p, h).unwrap())
}

fn instance(common_slope: bool) -> impl Strategy<Value = CakeInstance> {
    (1usize..=5, any::<u64>())
        .prop_map(move |(n, seed)| random_instance(n, seed, common_slope).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn total_mass_is_one(v in valuation()) {
        prop_assert!((v.eval(0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eval_is_additive(v in valuation(), a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let mut xs = [a, b, c];
        xs.sort_by(f64::total_cmp);
        let [x, y, z] = xs;
        let whole = v.eval(x, z).unwrap();
        let parts = v.eval(x, y).unwrap() + v.eval(y, z).unwrap();
        prop_assert!((whole - parts).abs() < 1e-12);
    }

    #[test]
    fn cut_inverts_eval(v in valuation(), x in 0.0f64..1.0, frac in 0.0f64..=1.0) {
        let target = frac * v.eval(x, 1.0).unwrap();
        let y = v.cut(x, target).unwrap();
        prop_assert!(y >= x && y <= 1.0);
        prop_assert!((v.eval(x, y).unwrap() - target).abs() < 1e-11);
    }

    #[test]
    fn density_is_single_peaked(v in valuation(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (da, db) = (v.density_at(lo).unwrap(), v.density_at(hi).unwrap());
        if hi <= v.peak() {
            prop_assert!(da <= db + 1e-12);
        } else if lo >= v.peak() {
            prop_assert!(da + 1e-12 >= db);
        }
    }

    #[test]
    fn recovery_round_trip(v in valuation()) {
        let inst = CakeInstance::new_waste_tolerant(vec![v]).unwrap();
        let mut oracle = Oracle::new(&inst);
        let s = oracle.recover_structure(0).unwrap();
        prop_assert!((s.peak - v.peak()).abs() < 1e-9);
        prop_assert!((s.left - v.left()).abs() < 1e-9);
        prop_assert!((s.right - v.right()).abs() < 1e-9);
        prop_assert!((s.peak_density - v.peak_density()).abs() < 1e-8 * v.peak_density());
        prop_assert_eq!(oracle.log().cut_count(), 2);
    }

    #[test]
    fn ww_value_table_is_flat(inst in instance(false)) {
        let n = inst.len() as f64;
        let r = run_ww(&inst).unwrap();
        for i in 0..inst.len() {
            for j in 0..inst.len() {
                prop_assert!((r.allocation.value_of(&inst, i, j) - 1.0 / n).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mww_is_envy_free_and_beats_ww(inst in instance(false)) {
        let ww = run_ww(&inst).unwrap();
        let mww = run_mww(&inst).unwrap();
        prop_assert!(audit_envy_free(&inst, &mww.allocation, AUDIT_TOL).unwrap().passed);
        for (m, w) in mww.utilities.iter().zip(&ww.utilities) {
            prop_assert!(*m >= w - 1e-9);
        }
    }

    #[test]
    fn mww_shares_each_segment_evenly(inst in instance(false)) {
        let r = run_mww(&inst).unwrap();
        for w in r.marks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let interested: Vec<usize> = (0..inst.len())
                .filter(|&i| {
                    let (l, rr) = inst.agent(i).support();
                    (b.min(rr) - a.max(l)).max(0.0) > 0.5 * (b - a)
                })
                .collect();
            for &i in &interested {
                let whole = inst.agent(i).eval(a, b).unwrap();
                for &j in &interested {
                    let share: f64 = r.allocation.piece(j)
                        .iter()
                        .map(|iv| (iv.start.max(a), iv.end.min(b)))
                        .filter(|(s, e)| e > s)
                        .map(|(s, e)| inst.agent(i).eval(s, e).unwrap())
                        .sum();
                    prop_assert!((share - whole / interested.len() as f64).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn ll_is_proportional_and_po(inst in instance(true)) {
        let r = run_ll(&inst).unwrap();
        prop_assert!(audit_proportional(&inst, &r.allocation, AUDIT_TOL).unwrap().passed);
        let flags = structure_flags(&inst, &r.allocation).unwrap();
        prop_assert!(flags.connected && flags.peak_preserving && flags.non_wasteful);
        prop_assert!(audit_pareto_sp(&inst, &r.allocation).unwrap().is_po());
    }

    #[test]
    fn um_reaches_the_envelope(inst in instance(true)) {
        let r = run_um(&inst).unwrap();
        let sum: f64 = r.utilities.iter().sum();
        prop_assert!((sum - inst.envelope_area()).abs() < 1e-9);
        prop_assert!(audit_pareto_sp(&inst, &r.allocation).unwrap().is_po());
    }

    #[test]
    fn envelope_matches_um_on_common_slopes(inst in instance(true)) {
        let um = run_um(&inst).unwrap();
        let env = run_envelope_um(&inst).unwrap();
        for (a, b) in um.utilities.iter().zip(&env.utilities) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn envelope_area_any_slopes(inst in instance(false)) {
        let env = run_envelope_um(&inst).unwrap();
        let sum: f64 = env.utilities.iter().sum();
        prop_assert!((sum - inst.envelope_area()).abs() < 1e-9);
    }

    #[test]
    fn exchanges_dominate(inst in instance(true), seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let alloc = common::random_allocation(inst.len(), &mut rng);
        let verdict = audit_pareto_sp(&inst, &alloc).unwrap();
        match find_improvement_exchange(&inst, &alloc).unwrap() {
            Some(next) => {
                prop_assert!(!verdict.is_po());
                let before = alloc.utilities(&inst).unwrap();
                let after = next.utilities(&inst).unwrap();
                prop_assert!(dominates(&after, &before, 1e-12), "{:?} -> {:?}", before, after);
            }
            None => prop_assert!(verdict.is_po()),
        }
    }

    #[test]
    fn exchanges_terminate_at_po(inst in instance(true), seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let alloc = common::random_allocation(inst.len(), &mut rng);
        let path = improve_until_stable(&inst, &alloc, 10_000).unwrap();
        prop_assert!(path.steps() <= path.bound(), "{} > {}", path.steps(), path.bound());
        prop_assert!(audit_pareto_sp(&inst, &path.allocation).unwrap().is_po());
    }

    #[test]
    fn normalization_is_idempotent(n in 1usize..5, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let alloc = common::random_allocation(n, &mut rng);
        prop_assert_eq!(alloc.normalized(), alloc.clone());
        let again = Allocation::new(alloc.pieces().to_vec()).unwrap();
        prop_assert_eq!(again, alloc);
    }
}
