use gbpf_core::covariance::{admissible_region, check_assumption, CovarianceFunction, FamilyTag};
use gbpf_core::field::FieldSpec;
use gbpf_core::gbp::GbpModel;
use gbpf_core::marginal::{
    build_partition, cell_probability, find_balanced_subset, Atom, BalanceTarget, ContinuousLaw, DiscreteLaw,
    ExponentialLaw, IntervalUnion, Marginal, NormalLaw, Partition, PartitionMode, SupportSet, UniformLaw,
};
use gbpf_core::process::ProcessSpec;
use gbpf_core::stats::{autocovariance, field_correlogram, Centering, Normalization};
use proptest::prelude::*;

const HORIZON: u64 = 2000;

/// A covariance instance from one of the parametric families, with `p`.
fn family_instance() -> impl Strategy<Value = (f64, CovarianceFunction)> {
    let p = 0.15f64..0.85;
    prop_oneof![
        (p.clone(), 0.05f64..0.99, 0.05f64..2.0).prop_map(|(p, f, theta)| {
            (p, CovarianceFunction::exponential(f * p * (1.0 - p), theta).unwrap())
        }),
        (p.clone(), 0.05f64..0.99, 0.05f64..2.0, 0.2f64..0.99).prop_map(|(p, f, theta, alpha)| {
            (p, CovarianceFunction::stretched_exponential(f * p * (1.0 - p), theta, alpha).unwrap())
        }),
        (p.clone(), 0.01f64..0.5, 0.05f64..0.95, 0.01f64..0.5, 0.05f64..0.95).prop_map(|(p, c1, r1, c2, r2)| {
            (p, CovarianceFunction::two_exponential(c1 * p, r1, c2 * p, r2).unwrap())
        }),
        (p, 0.05f64..0.99, 0.55f64..0.95).prop_map(|(p, f, h)| {
            (p, CovarianceFunction::power_law(f * p * (1.0 - p), h).unwrap())
        }),
    ]
}

fn passing_instance() -> impl Strategy<Value = (f64, CovarianceFunction)> {
    family_instance().prop_filter("passes the validity check", |(p, c)| {
        check_assumption(c, *p, HORIZON).map(|r| r.pass).unwrap_or(false)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, max_global_rejects: 100_000, ..ProptestConfig::default() })]

    #[test]
    fn passing_covariances_have_monotone_ratios((p, c) in passing_instance()) {
        let t = c.table(HORIZON as usize + 1).unwrap();
        for x in 0..(HORIZON as usize - 2) {
            prop_assert!(t[x + 1] <= t[x]);
            if t[x + 2] > 1e-200 {
                prop_assert!(t[x + 1] / t[x] <= (t[x + 2] / t[x + 1]) * (1.0 + 1e-12));
            }
        }
        let cs = |x: usize| p + t[x - 1] / p;
        for a in 1..=5usize {
            for x in 1..(HORIZON as usize - 6 - a) {
                prop_assert!(cs(x + a) / cs(x) <= (cs(x + 1 + a) / cs(x + 1)) * (1.0 + 1e-12), "a={} x={}", a, x);
            }
        }
    }

    #[test]
    fn passing_covariances_are_well_defined((p, c) in passing_instance()) {
        let g = GbpModel::new(p, c).unwrap();
        let w = g.verify_well_defined(10).unwrap();
        prop_assert!(w.ok, "min {} at {:?}", w.min_value, w.witness);
    }

    #[test]
    fn renewal_tables_match_subset_sums((p, c) in passing_instance()) {
        let g = GbpModel::new(p, c).unwrap();
        let t = g.build_gap_tables(12).unwrap();
        for k in 1..=12i64 {
            let zeros: Vec<i64> = (2..=k).collect();
            let d = g.d_operator(&[1, k + 1], &zeros).unwrap();
            prop_assert!((t.gap()[k as usize - 1] - d).abs() <= 1e-10);
            let zeros: Vec<i64> = (1..k).collect();
            let h = p * g.d_operator(&[k], &zeros).unwrap();
            prop_assert!((t.first()[k as usize - 1] - h).abs() <= 1e-10);
        }
    }

    #[test]
    fn configuration_law_is_consistent((p, c) in passing_instance(), k in 1usize..=8) {
        let g = GbpModel::new(p, c).unwrap();
        let mut total = 0.0;
        for mask in 0u32..1 << k {
            let ones: Vec<i64> = (0..k).filter(|j| mask >> j & 1 == 1).map(|j| j as i64 + 1).collect();
            let zeros: Vec<i64> = (0..k).filter(|j| mask >> j & 1 == 0).map(|j| j as i64 + 1).collect();
            let base = g.config_probability(&ones, &zeros).unwrap();
            total += base;
            let j = k as i64 + 1;
            let mut z = zeros.clone();
            z.push(j);
            let mut o = ones.clone();
            o.push(j);
            let split = g.config_probability(&ones, &z).unwrap() + g.config_probability(&o, &zeros).unwrap();
            prop_assert!((split - base).abs() <= 1e-12);
        }
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn adding_an_index_lowers_l((p, c) in passing_instance(), mask in 1u32..256, i in 1i64..=8) {
        let g = GbpModel::new(p, c).unwrap();
        prop_assume!(mask >> (i - 1) & 1 == 0);
        let a: Vec<i64> = (1..=8).filter(|j| mask >> (j - 1) & 1 == 1).collect();
        let mut ai = a.clone();
        ai.push(i);
        ai.sort_unstable();
        prop_assert!(g.l_operator(&a) - g.l_operator(&ai) > 0.0);
        prop_assert!(g.d_operator(&a, &[i]).unwrap() > 0.0);
    }
}

fn region_draw() -> impl Strategy<Value = (f64, CovarianceFunction)> {
    let p = 0.1f64..0.9;
    prop_oneof![
        (p.clone(), 0.01f64..0.999, 0.05f64..3.0).prop_map(|(p, f, theta)| {
            (p, CovarianceFunction::exponential(f * p * (1.0 - p), theta).unwrap())
        }),
        (p.clone(), 0.01f64..0.999, 0.01f64..0.999, 0.01f64..0.99, 0.01f64..0.99).prop_map(|(p, f, s, r1, r2)| {
            let budget = (p.powf(1.5) - p * p) * f;
            (p, CovarianceFunction::two_exponential(budget * s / r1, r1, budget * (1.0 - s) / r2, r2).unwrap())
        }),
        (p.clone(), 0.01f64..0.999, 0.51f64..0.99).prop_map(|(p, f, h)| {
            let c = f * gbpf_core::covariance::power_law_c_bound(p, h);
            (p, CovarianceFunction::power_law(c, h).unwrap())
        }),
        (p, 0.001f64..0.999, 0.05f64..1.0, 0.001f64..0.999).prop_map(|(p, f, theta, s)| {
            // c e^theta inside (pq/2, pq), then alpha inside its interval when it is non-empty
            let pq = p * (1.0 - p);
            let c = pq * (0.5 + 0.5 * f) * (-theta).exp();
            let lo = (pq / (c * (-theta).exp())).log2();
            let alpha = (lo + (1.0 - lo) * s).clamp(1e-3, 0.999);
            (p, CovarianceFunction::stretched_exponential(c, theta, alpha).unwrap())
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 400, ..ProptestConfig::default() })]

    #[test]
    fn region_membership_implies_pass((p, c) in region_draw()) {
        let region = admissible_region(c.family(), p).unwrap();
        let verdict = region.contains(&c).unwrap();
        if verdict.admitted() {
            prop_assert!(check_assumption(&c, p, HORIZON).unwrap().pass, "{:?} at p={}", c, p);
        }
        if c.family() == FamilyTag::PowerLaw || c.family() == FamilyTag::TwoExponential {
            prop_assert!(verdict.inside);
        }
    }
}

type Cdf = Box<dyn Fn(f64) -> f64>;
type PartialMean = Box<dyn Fn(f64, f64) -> f64>;

fn law(kind: u8) -> (Marginal, Cdf, PartialMean) {
    // cdf and the closed-form partial first moment on (a, b]
    match kind {
        0 => (
            Marginal::continuous(UniformLaw::new(0.0, 1.0).unwrap()),
            Box::new(|x: f64| x.clamp(0.0, 1.0)),
            Box::new(|a: f64, b: f64| {
                let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
                (b * b - a * a) / 2.0
            }),
        ),
        1 => (
            Marginal::continuous(ExponentialLaw::new(1.0).unwrap()),
            Box::new(|x: f64| if x <= 0.0 { 0.0 } else { 1.0 - (-x).exp() }),
            Box::new(|a: f64, b: f64| {
                let g = |x: f64| if x <= 0.0 { 1.0 } else if x.is_infinite() { 0.0 } else { (x + 1.0) * (-x).exp() };
                g(a) - g(b)
            }),
        ),
        _ => {
            let n = NormalLaw::standard();
            let phi = |x: f64| if x.is_infinite() { 0.0 } else { (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() };
            (
                Marginal::continuous(n.clone()),
                Box::new(move |x: f64| n.cdf(x)),
                Box::new(move |a: f64, b: f64| phi(a) - phi(b)),
            )
        }
    }
}

fn union_moments(set: &IntervalUnion, cdf: &dyn Fn(f64) -> f64, mom: &dyn Fn(f64, f64) -> f64) -> (f64, f64) {
    set.parts().iter().fold((0.0, 0.0), |(m, s), q| (m + cdf(q.hi) - cdf(q.lo), s + mom(q.lo, q.hi)))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 50, ..ProptestConfig::default() })]

    #[test]
    fn balanced_subset_contract(kind in 0u8..3, p in 0.05f64..0.95, lo_q in 0.0f64..0.4, width in 0.3f64..0.6) {
        let (m, cdf, mom) = law(kind);
        let ContinuousLawRef(l) = continuous(&m);
        let lo = if lo_q == 0.0 { f64::NEG_INFINITY } else { l.quantile(lo_q) };
        let hi = l.quantile((lo_q + width).min(0.999));
        let a = IntervalUnion::interval(lo.max(l.support().0), hi).unwrap();
        let sub = find_balanced_subset(&m, &a, p, BalanceTarget::Coordinate(0)).unwrap();
        let (mass_a, mean_a) = union_moments(&a, &*cdf, &*mom);
        let (mass_s, mean_s) = union_moments(&sub, &*cdf, &*mom);
        prop_assert!((mass_s - p * mass_a).abs() < 1e-8, "mass {} vs {}", mass_s, p * mass_a);
        prop_assert!((mean_s - p * mean_a).abs() < 1e-6, "mean {} vs {}", mean_s, p * mean_a);
        prop_assert!(sub.difference(&a).parts().iter().all(|q| cdf(q.hi) - cdf(q.lo) < 1e-12));
    }

    #[test]
    fn nested_partitions_are_complete_and_balanced(kind in 0u8..3, p1 in 0.1f64..0.9, p2 in 0.1f64..0.9, symmetric in any::<bool>()) {
        let (m, _, _) = law(kind);
        let mode = if symmetric && kind != 1 {
            PartitionMode::SymmetricNested { center: if kind == 0 { 0.5 } else { 0.0 }, balanced_axes: vec![0, 1] }
        } else {
            PartitionMode::BalancedNested { balanced_axes: vec![0] }
        };
        let axes = match &mode {
            PartitionMode::SymmetricNested { .. } => vec![0, 1],
            _ => vec![0],
        };
        let part = build_partition(&m, &[p1, p2], mode).unwrap();
        let total: f64 = part.masses().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-8);
        let mu = m.mean().unwrap()[0];
        for k in 0..axes.len() {
            prop_assert!(part.balance_residual(&axes[k..=k], 0, mu) <= 1e-6);
        }
        prop_assert!(part.balance_residual(&axes, 0, mu) <= 1e-6);
        // pairwise disjoint
        for a in 0..4 {
            for b in a + 1..4 {
                let both = part.cell(a).intersect(part.cell(b));
                prop_assert!(m.set_mass(&both).unwrap() <= 1e-10);
            }
        }
    }
}

struct ContinuousLawRef(gbpf_core::marginal::Law);

fn continuous(m: &Marginal) -> ContinuousLawRef {
    match m {
        Marginal::Continuous(l) => ContinuousLawRef(l.clone()),
        _ => unreachable!(),
    }
}

fn exp_process(c: f64, a_mass: f64) -> ProcessSpec {
    let a = -a_mass.ln();
    let m = Marginal::continuous(ExponentialLaw::new(1.0).unwrap());
    let g = GbpModel::new_unchecked(a_mass, CovarianceFunction::exponential(c, 0.3).unwrap()).unwrap();
    ProcessSpec::new(m, SupportSet::interval(a, f64::INFINITY).unwrap(), g).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 50, ..ProptestConfig::default() })]

    #[test]
    fn factor_is_rank_one(p in 0.1f64..0.9, f in 0.01f64..0.9) {
        let s = exp_process(f * p * (1.0 - p), p);
        let d = s.theoretical_cov();
        prop_assert!(d[0][0] >= 0.0);
        let m = Marginal::Product(vec![
            std::sync::Arc::new(UniformLaw::new(0.0, 1.0).unwrap()),
            std::sync::Arc::new(ExponentialLaw::new(2.0).unwrap()),
        ]);
        let set = SupportSet::union_of_boxes(vec![gbpf_core::marginal::BoxSet::new(vec![
            IntervalUnion::interval(0.0, 0.5).unwrap(),
            IntervalUnion::interval(0.0, (2.0f64).ln() / 2.0 * 2.0 * p.max(0.2)).unwrap(),
        ])]).unwrap();
        let mass = m.set_mass(&set).unwrap();
        let g = GbpModel::new_unchecked(mass, CovarianceFunction::exponential(0.5 * mass * (1.0 - mass), 0.3).unwrap()).unwrap();
        let s2 = ProcessSpec::new(m, set, g).unwrap();
        let d = s2.theoretical_cov();
        prop_assert!((d[0][1] - d[1][0]).abs() < 1e-15);
        prop_assert!(d[0][0] >= 0.0 && d[1][1] >= 0.0);
        prop_assert!((d[0][0] * d[1][1] - d[0][1] * d[1][0]).abs() < 1e-12);
    }

    #[test]
    fn density_weights_average_to_one(p in 0.15f64..0.85, f in 0.01f64..0.9, gaps in proptest::collection::vec(1i64..5, 1..6)) {
        let s = exp_process(f * p * (1.0 - p), p);
        let mut idx = vec![0i64];
        for g in gaps {
            idx.push(idx.last().unwrap() + g);
        }
        let k = idx.len();
        let mut total = 0.0;
        for mask in 0u32..1 << k {
            let pattern: Vec<bool> = (0..k).map(|j| mask >> j & 1 == 1).collect();
            let mass: f64 = pattern.iter().map(|&b| if b { p } else { 1.0 - p }).product();
            total += mass * s.joint_density_weight(&pattern, &idx).unwrap();
        }
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn characteristic_function_oracles_agree(
        p in 0.15f64..0.85,
        f in 0.01f64..0.9,
        thetas in proptest::collection::vec(-3.0f64..3.0, 4),
        gaps in proptest::collection::vec(1i64..4, 3),
        k in 2usize..=4,
    ) {
        let s = exp_process(f * p * (1.0 - p), p);
        let mut idx = vec![1i64];
        for g in &gaps {
            idx.push(idx.last().unwrap() + g);
        }
        let th: Vec<Vec<f64>> = thetas.iter().map(|t| vec![*t]).collect();
        let a = s.joint_cf(&th[..k], &idx[..k]).unwrap();
        let b = s.joint_cf_closed_form(&th[..k], &idx[..k]).unwrap();
        prop_assert!((a - b).norm() <= 1e-9);
        if k == 2 {
            let (ea, ec) = s.restricted_cfs(&th[0]).unwrap();
            let (fa, fc) = s.restricted_cfs(&th[1]).unwrap();
            let m0 = s.marginal().cf(&th[0]).unwrap();
            let m1 = s.marginal().cf(&th[1]).unwrap();
            let c = s.gbp().cov_at((idx[1] - idx[0]) as u64);
            let pair = m0 * m1 + (ea - ec) * (fa - fc) * c;
            prop_assert!((a - pair).norm() <= 1e-9);
        }
    }

    #[test]
    fn field_covariance_matches_enumeration(
        n in 1usize..=3,
        seed_vals in proptest::collection::vec(-2.0f64..2.0, 8),
        probs in proptest::collection::vec(0.2f64..0.8, 3),
        lag_code in proptest::collection::vec(0usize..3, 3),
    ) {
        let probs = &probs[..n];
        let atoms = (0..1usize << n)
            .map(|m| Atom { label: m as i64, value: seed_vals[m], prob: cell_probability(probs, m) })
            .collect();
        let marginal = Marginal::Discrete(DiscreteLaw::new("atoms", atoms).unwrap());
        let cells = (0..1i64 << n).map(|m| SupportSet::integers([m])).collect();
        let part = Partition::new(&marginal, probs.to_vec(), cells).unwrap();
        let gbps = probs
            .iter()
            .map(|&p| GbpModel::new_unchecked(p, CovarianceFunction::exponential(0.3 * p * (1.0 - p), 0.4).unwrap()).unwrap())
            .collect();
        let f = FieldSpec::new(marginal, part, gbps, vec![8; n]).unwrap();
        let lag: Vec<i64> = lag_code[..n].iter().map(|&c| [0, 1, -3][c]).collect();
        let a = f.theoretical_field_cov(&lag).unwrap()[0][0];
        let b = f.field_cov_oracle(&lag).unwrap()[0][0];
        prop_assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn one_axis_correlogram_is_pair_count_autocovariance() {
    let f = gbpf_core::presets::preset("gauss-field-6.3").unwrap().field().unwrap().clone();
    // a single axis field built from the first axis of the preset
    let m = f.marginal().clone();
    let part = build_partition(&m, &[0.4], PartitionMode::BalancedNested { balanced_axes: vec![] }).unwrap();
    let one = FieldSpec::new(m, part, vec![f.gbps()[0].clone()], vec![400]).unwrap();
    let sample = gbpf_core::field::simulate_field(one, 17).unwrap();
    let corr = field_correlogram(&sample, 0, &[40]).unwrap();
    let auto = autocovariance(&sample.values, 1, 40, &Centering::SampleMean, Normalization::PairCount).unwrap();
    for k in 0..=40i64 {
        let a = auto.matrices[k as usize][0][0];
        assert!((corr.get(&[k]).unwrap() - a).abs() < 1e-12);
        assert!((corr.get(&[-k]).unwrap() - a).abs() < 1e-12);
    }
}
