use cantor_tits::certify::*;
use cantor_tits::fixtures::*;
use cantor_tits::giet::{blow_up, one_sided_orbit, rotation, swap_halves, Exactness, Side};
use cantor_tits::maps::PAHomeo;
use cantor_tits::rational::{q, qi, Q};
use cantor_tits::space::{hausdorff_distance, CompactSet, PointSet, Region, Span};
use cantor_tits::walk::*;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn interval_set() -> impl Strategy<Value = Vec<(Q, Q)>> {
    proptest::collection::vec((0i64..60, 0i64..8), 1..6)
        .prop_map(|v| v.into_iter().map(|(a, l)| (q(a, 7), q(a + l, 7))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn normalization_is_idempotent(pairs in interval_set()) {
        let k = CompactSet::make(pairs).unwrap();
        let again = CompactSet::make(k.intervals().iter().map(|i| (i.lo.clone(), i.hi.clone())).collect()).unwrap();
        prop_assert_eq!(k.intervals(), again.intervals());
    }

    #[test]
    fn gaps_and_intervals_are_dual(pairs in interval_set()) {
        let k = CompactSet::make(pairs).unwrap();
        let gaps = k.bounded_gaps_to_depth(0);
        prop_assert_eq!(gaps.len(), k.intervals().len() - 1);
        for (i, (a, b)) in gaps.iter().enumerate() {
            prop_assert_eq!(a, &k.intervals()[i].hi);
            prop_assert_eq!(b, &k.intervals()[i + 1].lo);
            prop_assert!(k.is_gap(a, b));
        }
    }

    #[test]
    fn hausdorff_is_a_metric(a in interval_set(), b in interval_set(), c in interval_set()) {
        let (a, b, c) = (CompactSet::make(a).unwrap(), CompactSet::make(b).unwrap(), CompactSet::make(c).unwrap());
        let ab = hausdorff_distance(&a, &b);
        prop_assert_eq!(&ab, &hausdorff_distance(&b, &a));
        prop_assert!(hausdorff_distance(&a, &a).is_zero());
        prop_assert_eq!(ab.is_zero(), a.intervals() == b.intervals());
        prop_assert!(ab <= hausdorff_distance(&a, &c) + hausdorff_distance(&c, &b));
    }

    #[test]
    fn neighbourhoods_grow_with_eps(pts in proptest::collection::btree_set(0usize..64, 1..5), e1 in 1i64..40, e2 in 1i64..40) {
        let k = CompactSet::ternary_cantor(TERNARY_DEPTH);
        let cells = k.cells(6);
        let a = PointSet::new(pts.iter().map(|&i| cells[i].lo.clone()).collect(), &k).unwrap();
        let (lo, hi) = (q(e1.min(e2), 81), q(e1.max(e2), 81));
        let small = k.epsilon_neighborhood(&a, &lo).unwrap();
        let large = k.epsilon_neighborhood(&a, &hi).unwrap();
        prop_assert!(k.region_subset(&small, &large));
        prop_assert!(small.difference(&large).is_void());
    }
}

#[test]
fn ternary_refines_by_one_ifs_step() {
    for d in 0..6 {
        let k = CompactSet::ternary_cantor(d);
        let mut refined: Vec<(Q, Q)> = k
            .intervals()
            .iter()
            .flat_map(|i| [(&i.lo / qi(3), &i.hi / qi(3)), (&i.lo / qi(3) + q(2, 3), &i.hi / qi(3) + q(2, 3))])
            .collect();
        refined.sort();
        let next = CompactSet::ternary_cantor(d + 1);
        let want: Vec<(Q, Q)> = next.intervals().iter().map(|i| (i.lo.clone(), i.hi.clone())).collect();
        assert_eq!(refined, want, "depth {d}");
    }
}

/// Lebesgue measure pulled back through the blow-up: each component gets
/// the length of the interval it was cut from.
fn lebesgue_on_components(cuts: &[Q], b: &Q) -> Vec<Q> {
    cuts.iter().enumerate().map(|(i, c)| cuts.get(i + 1).unwrap_or(b) - c).collect()
}

#[test]
fn iet_blow_ups_preserve_lebesgue() {
    for g in [rotation(1, 3), rotation(2, 5), swap_halves()] {
        let out = blow_up(std::slice::from_ref(&g), 4, &q(1, 3)).unwrap();
        assert_eq!(out.exactness, Exactness::Exact);
        let mut cuts: Vec<Q> = out.blown_points.iter().map(|(c, _)| c.clone()).collect();
        cuts.push(g.a().clone());
        cuts.sort();
        cuts.dedup();
        let masses = lebesgue_on_components(&cuts, g.b());
        assert_eq!(masses.len(), out.space.intervals().len());
        assert_eq!(masses.iter().sum::<Q>(), qi(1));
        let model = WalkModel::uniform(out.induced.clone(), 0).unwrap();
        let res = invariance_residual(&CellMeasure::exact(1, masses), &model).unwrap();
        assert_eq!(res.exact_max, Some(Q::zero()));
    }
}

#[test]
fn closed_sided_orbits_are_finite_and_stable() {
    for g in [rotation(1, 3), rotation(3, 7), swap_halves()] {
        let gens = [g.clone()];
        for x in [q(0, 1), q(1, 3), q(1, 2), q(5, 7)] {
            for side in [Side::Left, Side::Right] {
                let Ok(orbit) = one_sided_orbit(&gens, &x, side, 64) else { continue };
                assert!(orbit.closed);
                for h in [g.clone(), g.inverse()] {
                    for p in &orbit.points {
                        assert!(orbit.points.contains(&h.limit(p, side)), "{p} leaves the orbit");
                    }
                }
            }
        }
    }
}

#[test]
fn stationary_estimates_conserve_mass_and_entropy_sign() {
    for model in [free_model(3), klein_model(3), g3_model(3), a1_model(3)] {
        let mu = estimate_stationary_measure(&model, 4000, 4, 4).unwrap();
        assert!((mu.total() - 1.0).abs() < 1e-12);
        let (d, _) = compatible_depth(model.space(), model.gens(), 4);
        if d == 0 {
            continue;
        }
        let h = estimate_entropy(&mu, &model, d).unwrap();
        assert!(h.h_estimate >= -1e-9, "{}", h.h_estimate);
    }
}

#[test]
fn repulsor_count_is_bounded_on_every_run() {
    let model = free_model(11);
    let k = model.space().clone();
    let delta = default_delta(&k);
    for run in 0..24 {
        let scan = contraction_scan(&mut model.run(run), 3, 30, &delta).unwrap();
        assert!(scan.bound_holds);
        assert!(Q::from_integer((scan.repulsors as i64).into()) * &delta <= k.diam());
    }
}

#[test]
fn exact_measures_have_zero_residual() {
    let model = klein_model(0);
    let MeasureOutcome::Certified(c) = solve_invariant_measure(model.gens(), 1, 6).unwrap() else { panic!() };
    let res = invariance_residual(&c.measure, &model).unwrap();
    assert_eq!(res.exact_max, Some(Q::zero()));
    let model = g3_model(0);
    let MeasureOutcome::Certified(c) = solve_invariant_measure(model.gens(), 2, 4).unwrap() else { panic!() };
    assert_eq!(invariance_residual(&c.measure, &model).unwrap().exact_max, Some(Q::zero()));
}

fn near(x: &Q, pts: &[PeriodicPoint], r: &Q) -> bool {
    pts.iter().any(|p| (x - &p.point).abs() <= *r)
}

/// Forward orbits under g and g⁻¹ from random depth-6 cell endpoints.
fn orbits_converge(c: &MorseSmaleCertificate, seed: u64) {
    let k = c.g.space();
    let mut ends: Vec<Q> = k.cells(6).iter().flat_map(|i| [i.lo.clone(), i.hi.clone()]).collect();
    ends.sort();
    ends.dedup();
    let r = q(1, 729);
    let inv = c.g.invert();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..500 {
        let x0 = ends[(rng.next_u64() % ends.len() as u64) as usize].clone();
        for f in [&c.g, &inv] {
            let mut x = x0.clone();
            let hit = (0..=200).any(|_| {
                let done = near(&x, &c.periodic, &r);
                x = f.apply_member(&x);
                done
            });
            assert!(hit, "orbit of {x0} misses the periodic points");
        }
    }
}

fn check_derived_inclusion(c: &MorseSmaleCertificate) {
    let k = c.g.space();
    assert!(k.region_subset(&c.g.image(&k.complement(&c.a)), &c.b));
    let gi = c.g.invert();
    assert!(k.region_subset(&gi.image(&k.complement(&c.b)), &c.a));
}

#[test]
fn morse_smale_certificates_attract_orbits() {
    let top = Region::from_spans(vec![Span { lo: q(7, 9), hi: qi(1), lo_open: true, hi_open: false }]);
    let MorseSmaleOutcome::Certified(c) = check_morse_smale(&a1(), &top, &Region::from_spans(vec![Span::open(q(-1, 9), q(4, 9))])).unwrap()
    else {
        panic!()
    };
    check_derived_inclusion(&c);
    orbits_converge(&c, 1);
    for seed in [0, 5, 9] {
        let c = find_morse_smale(&free_model(seed).with_seed(seed), &q(1, 27), 40, 20).unwrap().expect("certificate");
        check_derived_inclusion(&c);
        orbits_converge(&c, seed);
    }
}

#[test]
fn verified_pairs_pass_the_word_check() {
    let c = assemble_free_pair(&free_model(2), &q(1, 27), &Budgets::default()).unwrap().certificate.expect("certificate");
    assert!(verify_ping_pong(&c).ok);
    assert!(free_group_sanity(&c.a1, &c.a2, 8).unwrap().ok);
}

#[test]
fn identity_powers_never_certify() {
    let id = PAHomeo::identity(ternary());
    let k = ternary();
    assert!(!check_morse_smale(&id, &Region::empty(), &k.whole()).unwrap().is_certified());
}
