use proptest::prelude::*;

use clustertail::exec::{self, Mode};
use clustertail::geometry::{cone_distance_l1, solve_ja};
use clustertail::measures::{enumerate_assignments, enumerate_types, g_value, g_value_factorized};
use clustertail::model::reference;
use clustertail::stats::fit_line;
use clustertail::verify::sweep_with;
use clustertail::{DimSet, Error, Model, OffspringLaw, RareEventSet, Seed};

fn model_2d(alphas: [f64; 4], means: [f64; 4]) -> Model {
    let law = |k: usize| OffspringLaw::zeta_tail_with_mean(alphas[k], means[k]).unwrap();
    Model::from_laws(vec![vec![law(0), law(1)], vec![law(2), law(3)]]).unwrap()
}

fn arb_model() -> impl Strategy<Value = Model> {
    (
        prop::array::uniform4(1.2f64..4.0),
        prop::array::uniform4(0.02f64..0.45),
    )
        .prop_map(|(a, m)| model_2d(a, m))
}

fn arb_box() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (0.0f64..5.0, 0.0f64..5.0, 0.05f64..3.0, 0.05f64..3.0)
        .prop_filter("away from origin", |(x, y, _, _)| x + y > 0.1)
        .prop_map(|(x, y, w, h)| (vec![x, y], vec![x + w, y + h]))
}

fn ray_meets(g: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    let (mut t_lo, mut t_hi) = (0.0f64, f64::INFINITY);
    for k in 0..2 {
        if g[k] <= 0.0 {
            if lo[k] > 0.0 {
                return false;
            }
        } else {
            t_lo = t_lo.max(lo[k] / g[k]);
            t_hi = t_hi.min(hi[k] / g[k]);
        }
    }
    t_lo <= t_hi
}

fn cross(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

// In the plane a box meets the wedge spanned by two rays iff one of the rays
// meets it or one of its corners lies inside the wedge.
fn wedge_meets(g0: &[f64], g1: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    if ray_meets(g0, lo, hi) || ray_meets(g1, lo, hi) {
        return true;
    }
    let (a, b) = if cross(g0, g1) >= 0.0 { (g0, g1) } else { (g1, g0) };
    [[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]]
        .iter()
        .any(|c| cross(a, c) >= 0.0 && cross(c, b) >= 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cone_distance_scales(m in arb_model(), x in prop::array::uniform2(0.0f64..10.0), a in 0.1f64..20.0) {
        for set in DimSet::nonempty_subsets(2) {
            let (d1, _) = cone_distance_l1(&x, set, &m).unwrap();
            let y = [a * x[0], a * x[1]];
            let (d2, _) = cone_distance_l1(&y, set, &m).unwrap();
            prop_assert!((d2 - a * d1).abs() <= 1e-7 * (1.0 + a * d1));
        }
    }

    #[test]
    fn larger_cone_is_closer(m in arb_model(), x in prop::array::uniform2(0.0f64..10.0)) {
        let full = cone_distance_l1(&x, DimSet::full(2), &m).unwrap().0;
        for i in 0..2 {
            let single = cone_distance_l1(&x, DimSet::singleton(i), &m).unwrap().0;
            prop_assert!(full <= single + 1e-9);
        }
    }

    #[test]
    fn set_scaling_preserves_membership(b in arb_box(), x in prop::array::uniform2(0.0f64..10.0), a in 0.1f64..20.0) {
        let set = RareEventSet::rect(&b.0, &b.1).unwrap();
        let y = [a * x[0], a * x[1]];
        prop_assert_eq!(set.contains(&x), set.scaled(a).contains(&y));
    }

    #[test]
    fn solve_ja_matches_brute_force(m in arb_model(), b in arb_box()) {
        let set = RareEventSet::rect(&b.0, &b.1).unwrap();
        let g0 = m.expected_cluster(0);
        let g1 = m.expected_cluster(1);
        let mut hits: Vec<(f64, DimSet)> = Vec::new();
        if ray_meets(&g0, &b.0, &b.1) {
            hits.push((m.alpha_of(DimSet::singleton(0)), DimSet::singleton(0)));
        }
        if ray_meets(&g1, &b.0, &b.1) {
            hits.push((m.alpha_of(DimSet::singleton(1)), DimSet::singleton(1)));
        }
        if wedge_meets(&g0, &g1, &b.0, &b.1) {
            hits.push((m.alpha_of(DimSet::full(2)), DimSet::full(2)));
        }
        hits.sort_by(|x, y| x.0.total_cmp(&y.0));
        match solve_ja(&set, &m) {
            Ok(sol) => {
                prop_assert_eq!(sol.jset, hits[0].1);
                // the LP witness may sit on the boundary up to solver tolerance
                let r = &set.boxes()[sol.witness.box_index];
                let near = sol.witness.point.iter().zip(r.lo.iter().zip(&r.hi))
                    .all(|(v, (lo, hi))| *lo - 1e-7 <= *v && *v <= *hi + 1e-7);
                prop_assert!(near);
            }
            Err(Error::NoConeIntersects) => prop_assert!(hits.is_empty()),
            Err(Error::NonUniqueArgmin { .. }) => {
                prop_assert!(hits.len() >= 2 && (hits[1].0 - hits[0].0).abs() < 1e-9)
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn g_is_homogeneous(m in arb_model(), w in prop::array::uniform2(0.01f64..5.0), c in 0.1f64..10.0, t in 1u32..4) {
        let source = DimSet::full(2);
        let target = DimSet::from_bits(t);
        let base = g_value(source, target, &w, &m);
        let scaled = g_value(source, target, &[c * w[0], c * w[1]], &m);
        let expect = c.powi(target.len() as i32) * base;
        prop_assert!((scaled - expect).abs() <= 1e-10 * expect.abs().max(1e-300));
        let fact = g_value_factorized(source, target, &w, &m);
        prop_assert!((fact - base).abs() <= 1e-12 * base.abs().max(1e-300));
    }

    #[test]
    fn assignments_are_disjoint_covers(s in 1u32..32, t in 0u32..32) {
        let (source, target) = (DimSet::from_bits(s), DimSet::from_bits(t));
        let all = enumerate_assignments(source, target);
        prop_assert_eq!(all.len(), source.len().pow(target.len() as u32));
        for parts in &all {
            prop_assert_eq!(parts.len(), source.len());
            let mut seen = DimSet::EMPTY;
            for p in parts {
                prop_assert!(seen.intersection(*p).is_empty());
                seen = seen.union(*p);
            }
            prop_assert_eq!(seen, target);
        }
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), all.len());
    }

    #[test]
    fn survival_is_monotone(alpha in 1.05f64..6.0, mean in 0.01f64..0.9, x in 0.0f64..1e4, dx in 0.0f64..1e4) {
        let law = OffspringLaw::zeta_tail_with_mean(alpha, mean).unwrap();
        let (a, b) = (law.survival(x), law.survival(x + dx));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
    }

    #[test]
    fn rate_decreases_in_n(m in arb_model(), n in 1u32..10_000, f in 2u32..10, bits in 1u32..4) {
        // survival is a step function, so compare on the integer grid
        let set = DimSet::from_bits(bits);
        let a = m.rate_lambda(set, n as f64).unwrap();
        let b = m.rate_lambda(set, (n * f) as f64).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn slope_invariant_under_rescaling(
        ns in prop::collection::vec(1.0f64..1e4, 3..8),
        p in prop::collection::vec(1e-6f64..1.0, 8),
        c in 0.01f64..100.0,
    ) {
        let mut ns = ns;
        ns.sort_by(f64::total_cmp);
        ns.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-6);
        prop_assume!(ns.len() >= 3);
        let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
        let xs: Vec<f64> = ns.iter().map(|n| (c * n).ln()).collect();
        let y: Vec<f64> = p[..ns.len()].iter().map(|v| v.ln()).collect();
        let a = fit_line(&x, &y).unwrap();
        let b = fit_line(&xs, &y).unwrap();
        prop_assert!((a.slope - b.slope).abs() <= 1e-8 * (1.0 + a.slope.abs()));
        prop_assert!((a.slope_se - b.slope_se).abs() <= 1e-8 * (1.0 + a.slope_se));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sweeps_agree_across_modes(seed in any::<u64>(), samples in 1u64..20_000) {
        let m = reference::r2();
        let set = RareEventSet::rect(&[1.0, 0.0], &[1e9, 1e9]).unwrap();
        let run = |mode| exec::with_mode(mode, || {
            sweep_with(&m, 0, &[2, 4, 8], samples, Seed(seed), |x, n| set.contains_scaled(x, n))
        });
        prop_assert_eq!(run(Mode::Sequential), run(Mode::Parallel));
    }
}

#[test]
fn type_counts_are_fubini_multiples() {
    // |J| times the number of ordered set partitions of the remaining |J| - 1
    let fubini = [1usize, 1, 3, 13, 75];
    for k in 1..=5 {
        let set = DimSet::full(k);
        assert_eq!(enumerate_types(set).unwrap().len(), k * fubini[k - 1]);
    }
}
