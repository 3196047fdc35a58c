use proptest::prelude::*;

use super::*;
use crate::fixtures::{self, a1, a2, g3, h, r, ternary};
use crate::rational::{q, qi};

fn cyl(word: &str) -> Region {
    let k = ternary();
    let iv = k.cell(&k.parse_address(word).unwrap());
    Region::closed(iv.lo, iv.hi)
}

/// Gap oracle on the ternary set from digit arithmetic alone: (p, q) is a
/// bounded gap iff q − p = 3^-k and p − 3^-k is the left end of a depth
/// k−1 cell.
fn ternary_gap_oracle(p: &Q, q_: &Q) -> bool {
    let len = q_ - p;
    let mut k = 0u32;
    let mut unit = qi(1);
    while unit > len {
        unit /= qi(3);
        k += 1;
    }
    if unit != len || k == 0 {
        return false;
    }
    let scaled = (p - &unit) * crate::rational::pow(&qi(3), k - 1);
    if !scaled.is_integer() || scaled < qi(0) {
        return false;
    }
    let mut n: i64 = scaled.to_integer().try_into().unwrap();
    for _ in 0..k - 1 {
        if n % 3 == 1 {
            return false;
        }
        n /= 3;
    }
    n == 0
}

fn oracle_break_pairs(f: &PAHomeo, depth: u32) -> Vec<BreakPair> {
    let k = f.space();
    k.bounded_gaps_to_depth(depth)
        .into_iter()
        .filter(|(a, b)| {
            let (fa, fb) = (f.apply(a).unwrap(), f.apply(b).unwrap());
            let (p, q_) = if fa < fb { (fa, fb) } else { (fb, fa) };
            !ternary_gap_oracle(&p, &q_)
        })
        .map(|(a, b)| BreakPair { a, b })
        .collect()
}

#[test]
fn fixture_formulas() {
    let hh = h();
    assert_eq!(hh.apply(&q(1, 3)).unwrap(), qi(1));
    assert_eq!(hh.apply(&q(7, 9)).unwrap(), q(1, 9));
    assert_eq!(r().apply(&qi(0)).unwrap(), qi(1));
    assert_eq!(r().apply(&q(2, 9)).unwrap(), q(7, 9));
    assert_eq!(a1().apply(&q(1, 4)).unwrap(), q(1, 4));
    assert_eq!(a1().apply(&qi(1)).unwrap(), qi(1));
    assert!(hh.apply(&q(1, 2)).is_err());
    // 20 → 02 keeps the address length, so the middle slope is 1
    assert_eq!(g3().slopes(), vec![q(1, 3), qi(1), qi(3)]);
    assert_eq!(g3().invert().slopes(), vec![qi(3), qi(1), q(1, 3)]);
}

#[test]
fn images_of_regions() {
    let k = ternary();
    let off22 = k.complement(&cyl("22"));
    let img = a1().image(&off22);
    assert!(k.region_eq(&img, &cyl("020").union(&cyl("022"))));
    assert!(k.region_subset(&img, &cyl("02")));
    assert!(k.region_eq(&r().image(&cyl("0")), &cyl("2")));
    let id = PAHomeo::identity(k.clone());
    assert!(k.region_eq(&id.image(&cyl("20")), &cyl("20")));
}

#[test]
fn group_laws_on_fixtures() {
    let id = PAHomeo::identity(ternary());
    assert_eq!(h().compose(&h()).unwrap(), id);
    for f in [h(), r(), g3(), a1(), a2()] {
        assert_eq!(f.compose(&f.invert()).unwrap(), id, "{:?}", f.label());
        assert_eq!(f.invert().compose(&f).unwrap(), id);
        assert_eq!(f.invert().invert(), f);
    }
    assert_eq!(r().invert(), r());
    assert_eq!(a1().invert().apply(&q(1, 4)).unwrap(), q(1, 4));
    assert!(h().compose(&h()).unwrap().is_identity());
    assert_eq!(h().compose(&g3()).unwrap().label(), &["H".to_string(), "G3".to_string()]);
}

#[test]
fn break_pair_examples() {
    let bp = |a: (i64, i64), b: (i64, i64)| BreakPair { a: q(a.0, a.1), b: q(b.0, b.1) };
    assert_eq!(g3().break_pairs(), vec![]);
    assert_eq!(h().break_pairs(), vec![bp((1, 3), (2, 3))]);
    assert_eq!(a1().break_pairs(), vec![bp((7, 9), (8, 9)), bp((25, 27), (26, 27))]);
    assert_eq!(a2().break_pairs(), vec![bp((1, 27), (2, 27))]);
    assert_eq!(h().compose(&g3()).unwrap().break_pairs(), vec![bp((7, 9), (8, 9))]);
    for f in [h(), r(), g3(), a1(), a2(), h().compose(&g3()).unwrap(), a1().compose(&a2().invert()).unwrap()] {
        assert_eq!(f.break_pairs(), oracle_break_pairs(&f, 7));
    }
}

#[test]
fn regularity_examples() {
    assert!(g3().is_regular_on(&qi(0), &qi(1)).unwrap());
    assert!(!h().is_regular_on(&q(1, 3), &q(2, 3)).unwrap());
    assert!(h().is_regular_on(&qi(0), &q(1, 3)).unwrap());
    assert!(h().is_regular_on(&qi(1), &qi(0)).is_err());
    assert_eq!(regularity_radius(&[h()]).unwrap(), Some(q(1, 3)));
    assert_eq!(regularity_radius(&[g3()]).unwrap(), None);
    assert_eq!(regularity_radius(&[a1(), a2()]).unwrap(), Some(q(1, 27)));
    assert!(regularity_radius(&[]).is_err());
}

#[test]
fn slopes_and_distortion() {
    let k = ternary();
    assert_eq!(g3().slope_range(&cyl("0")).unwrap(), (q(1, 3), q(1, 3)));
    assert_eq!(g3().slope_range(&k.whole()).unwrap(), (q(1, 3), qi(3)));
    assert_eq!(a1().slope_range(&cyl("222")).unwrap(), (qi(9), qi(9)));
    assert!(g3().slope_range(&Region::closed(q(2, 5), q(3, 5))).is_err());
    assert_eq!(g3().distortion(&cyl("0")).unwrap(), Some(qi(1)));
    assert!(g3().distortion(&k.whole()).unwrap().unwrap() >= qi(9));
    assert_eq!(r().distortion(&k.whole()).unwrap(), Some(qi(1)));
    assert!(g3().distortion(&Region::closed(qi(0), qi(0))).is_err());
}

#[test]
fn table_validation() {
    let k = ternary();
    let bad = PrefixTable::new(&[("0", "2", 1), ("0", "0", 1)]);
    assert!(PAHomeo::from_prefix_table(&bad, k.clone(), "x").is_err());
    let incomplete = PrefixTable::new(&[("0", "0", 1), ("20", "2", 1)]);
    assert!(PAHomeo::from_prefix_table(&incomplete, k.clone(), "x").is_err());
    let shallow = Arc::new(CompactSet::ternary_cantor(2));
    assert!(matches!(
        PAHomeo::from_prefix_table(&fixtures::a1_table(), shallow, "A1"),
        Err(Error::Depth(_))
    ));
    let overlap = vec![
        Branch::new(qi(0), q(1, 3), qi(1), q(2, 3)),
        Branch::new(q(2, 3), qi(1), qi(1), qi(0)),
    ];
    assert!(PAHomeo::from_branches(k.clone(), overlap, vec![]).is_err());
    let good = vec![
        Branch::new(qi(0), q(1, 3), qi(1), q(2, 3)),
        Branch::new(q(2, 3), qi(1), qi(1), q(-2, 3)),
    ];
    assert_eq!(PAHomeo::from_branches(k.clone(), good, vec![]).unwrap(), h());
    // a slope-2 map does not send cells onto cells
    let stretch = vec![Branch::new(qi(0), q(1, 3), qi(2), qi(0)), Branch::new(q(2, 3), qi(1), q(1, 2), q(1, 2))];
    assert!(PAHomeo::from_branches(k, stretch, vec![]).is_err());
}

#[test]
fn explicit_space_maps() {
    let k = Arc::new(CompactSet::make(vec![(qi(0), qi(1)), (qi(2), qi(3))]).unwrap());
    let swap = vec![Branch::new(qi(0), qi(1), qi(1), qi(2)), Branch::new(qi(2), qi(3), qi(1), qi(-2))];
    let f = PAHomeo::from_branches(k.clone(), swap, vec![]).unwrap();
    assert_eq!(f.break_pairs(), vec![BreakPair { a: qi(1), b: qi(2) }]);
    assert!(f.compose(&f).unwrap().is_identity());
    let leaky = vec![Branch::new(qi(0), qi(1), qi(2), qi(0)), Branch::new(qi(2), qi(3), qi(1), qi(0))];
    assert!(PAHomeo::from_branches(k, leaky, vec![]).is_err());
}

// ---- properties ----------------------------------------------------------------

fn pool() -> Vec<PAHomeo> {
    let mut v = fixtures::free_generators();
    v.extend([h(), r(), g3(), g3().invert()]);
    v
}

fn word(idx: &[usize]) -> PAHomeo {
    let p = pool();
    idx.iter().fold(PAHomeo::identity(ternary()), |acc, &i| p[i].compose(&acc).unwrap())
}

fn word_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..8, 0..6)
}

/// Cell endpoints of depth ≤ 4, which are all points of K.
fn point_strategy() -> impl Strategy<Value = Q> {
    (0usize..16, any::<bool>()).prop_map(|(i, right)| {
        let iv = ternary().cells(4)[i].clone();
        if right { iv.hi } else { iv.lo }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compose_is_associative(a in word_strategy(), b in word_strategy(), c in word_strategy()) {
        let (f, g, hh) = (word(&a), word(&b), word(&c));
        prop_assert_eq!(f.compose(&g).unwrap().compose(&hh).unwrap(), f.compose(&g.compose(&hh).unwrap()).unwrap());
    }

    #[test]
    fn compose_matches_pointwise(a in word_strategy(), x in point_strategy()) {
        let p = pool();
        let direct = a.iter().fold(x.clone(), |y, &i| p[i].apply(&y).unwrap());
        prop_assert_eq!(word(&a).apply(&x).unwrap(), direct);
    }

    #[test]
    fn break_inclusion(a in word_strategy(), b in word_strategy()) {
        let (hh, g) = (word(&a), word(&b));
        let mut allowed = g.break_points();
        let ginv = g.invert();
        allowed.extend(hh.break_points().iter().map(|x| ginv.apply(x).unwrap()));
        for x in hh.compose(&g).unwrap().break_points() {
            prop_assert!(allowed.contains(&x));
        }
    }

    #[test]
    fn regular_segments_map_onto_segments(a in word_strategy(), x in point_strategy(), y in point_strategy()) {
        let f = word(&a);
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        if f.is_regular_on(&lo, &hi).unwrap() {
            let k = ternary();
            let (fa, fb) = (f.apply(&lo).unwrap(), f.apply(&hi).unwrap());
            let want = Region::closed(fa.clone().min(fb.clone()), fa.max(fb));
            prop_assert!(k.region_eq(&f.image(&Region::closed(lo, hi)), &want));
        }
    }

    #[test]
    fn slope_duality(a in word_strategy(), i in 0usize..8, d in 1u32..3) {
        let f = word(&a);
        let k = ternary();
        let cell = k.cells(d)[i % (1 << d)].clone();
        let s = Region::closed(cell.lo, cell.hi);
        let (lo, hi) = f.slope_range(&s).unwrap();
        let (ilo, ihi) = f.invert().slope_range(&f.image(&s)).unwrap();
        prop_assert_eq!((ilo, ihi), (qi(1) / hi, qi(1) / lo));
    }

    #[test]
    fn chain_rule(a in word_strategy(), x in point_strategy()) {
        let f = word(&a);
        let d = f.slope_at(&x).unwrap();
        let e = f.invert().slope_at(&f.apply(&x).unwrap()).unwrap();
        prop_assert_eq!(d * e, qi(1));
    }

    #[test]
    fn distortion_is_submultiplicative(a in word_strategy(), b in word_strategy(), i in 0usize..4) {
        let (g, hh) = (word(&a), word(&b));
        let k = ternary();
        let cell = k.cells(2)[i].clone();
        let s = Region::closed(cell.lo, cell.hi);
        let lhs = g.compose(&hh).unwrap().distortion(&s).unwrap().unwrap();
        let r1 = g.distortion(&hh.image(&s)).unwrap().unwrap();
        let r2 = hh.distortion(&s).unwrap().unwrap();
        prop_assert!(lhs <= r1 * r2);
    }
}

#[test]
fn r0_soundness() {
    let gens = fixtures::free_generators();
    let r0 = regularity_radius(&gens).unwrap().unwrap();
    // every gap of size < r0 lies in a window shorter than r0
    let k = ternary();
    for (a, _) in k.bounded_gaps_to_depth(7) {
        let lo = a.clone();
        let hi = &a + &r0 - q(1, 100000);
        for g in &gens {
            assert!(g.is_regular_on(&lo, &hi).unwrap());
        }
    }
}
