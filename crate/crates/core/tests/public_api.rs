use condmt::global_tests::{GlobalMethod, TestOptions};
use condmt::{combine, conditional_test, select, Dataset, PValueVector, StudyRecord};
use proptest::prelude::*;

fn pv(v: &[f64]) -> PValueVector {
    PValueVector::new(v.to_vec()).unwrap()
}

/// P(χ²_{2m} ≥ x) = e^{−x/2} Σ_{j<m} (x/2)^j / j!.
fn chisq_even_sf(x: f64, m: usize) -> f64 {
    let h = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..m {
        term *= h / j as f64;
        sum += term;
    }
    (-h).exp() * sum
}

fn rescaled(v: &[f64], tau: f64) -> Vec<f64> {
    v.iter().filter(|&&p| p <= tau).map(|&p| p / tau).collect()
}

fn cond(v: &[f64], tau: f64, m: GlobalMethod) -> f64 {
    conditional_test(&pv(v), tau, m, &TestOptions::default()).unwrap().p_combined
}

#[test]
fn table1_golden_values() {
    let mut v = vec![0.001, 0.001];
    v.extend(std::iter::repeat_n(1.0, 98));
    assert_eq!(cond(&v, 1.0, GlobalMethod::Bonferroni), 0.1);
    assert_eq!(cond(&v, 0.5, GlobalMethod::Bonferroni), 0.004);
    let f = cond(&v, 0.5, GlobalMethod::Fisher);
    assert!((f - 5.4e-5).abs() / 5.4e-5 < 0.02, "{f}");
    assert!(cond(&v, 1.0, GlobalMethod::Fisher) >= 0.999);
}

#[test]
fn empty_selection_gives_one() {
    for m in [GlobalMethod::Bonferroni, GlobalMethod::Fisher, GlobalMethod::Simes] {
        let r = conditional_test(&pv(&[0.6, 0.9]), 0.5, m, &TestOptions::default()).unwrap();
        assert_eq!((r.p_combined, r.n_used), (1.0, 0), "{m}");
    }
}

#[test]
fn dataset_file_round_trip() {
    let records = vec![
        StudyRecord::new("a", Some("g1".into()), 0.25, 0.1).unwrap(),
        StudyRecord::new("b", None, -1.5e-3, 2.0).unwrap(),
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, condmt::write_csv(&records)).unwrap();
    assert_eq!(Dataset::from_path(&path).unwrap().records, records);
}

fn pvalues() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1e-12..1.0f64, Just(1.0), Just(0.25)], 1..60)
}

proptest! {
    #[test]
    fn bonferroni_matches_formula(v in pvalues(), tau in 0.05..1.0f64) {
        let s = rescaled(&v, tau);
        let want = if s.is_empty() {
            1.0
        } else {
            (s.len() as f64 * s.iter().copied().fold(f64::INFINITY, f64::min)).min(1.0)
        };
        let got = cond(&v, tau, GlobalMethod::Bonferroni);
        prop_assert!((got - want).abs() <= 1e-15 * want.max(1e-300), "{} vs {}", got, want);
    }

    #[test]
    fn sidak_and_simes_match_formulas(v in pvalues(), tau in 0.05..1.0f64) {
        let mut s = rescaled(&v, tau);
        prop_assume!(!s.is_empty());
        s.sort_by(f64::total_cmp);
        let m = s.len() as f64;
        let sidak = 1.0 - (1.0 - s[0]).powf(m);
        let simes = s.iter().enumerate().map(|(i, &p)| m * p / (i + 1) as f64).fold(f64::INFINITY, f64::min).min(1.0);
        prop_assert!((cond(&v, tau, GlobalMethod::Sidak) - sidak).abs() < 1e-12);
        prop_assert!((cond(&v, tau, GlobalMethod::Simes) - simes).abs() < 1e-12);
    }

    #[test]
    fn fisher_matches_even_chisq(v in pvalues(), tau in 0.05..1.0f64) {
        let s = rescaled(&v, tau);
        prop_assume!(!s.is_empty());
        let t: f64 = s.iter().map(|p| -2.0 * p.ln()).sum();
        let want = chisq_even_sf(t, s.len());
        let got = cond(&v, tau, GlobalMethod::Fisher);
        prop_assert!((got - want).abs() <= 1e-10 * want.max(1e-6), "{} vs {}", got, want);
    }

    #[test]
    fn selection_keeps_exactly_the_small_values(v in pvalues(), tau in 0.01..1.0f64) {
        let sel = select(&pv(&v), tau).unwrap();
        let idx: Vec<usize> = (0..v.len()).filter(|&i| v[i] <= tau).collect();
        prop_assert_eq!(sel.indices(), &idx[..]);
        for (&i, &c) in sel.indices().iter().zip(sel.conditional_values()) {
            prop_assert_eq!(c, v[i] / tau);
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn smaller_inputs_never_raise_the_combined_p(v in pvalues(), k in any::<prop::sample::Index>(), f in 0.0..1.0f64) {
        let mut w = v.clone();
        let i = k.index(v.len());
        w[i] *= f;
        for m in [GlobalMethod::Bonferroni, GlobalMethod::Fisher, GlobalMethod::Simes, GlobalMethod::Sidak] {
            let a = combine(m, &v, &TestOptions::default()).unwrap().p_combined;
            let b = combine(m, &w, &TestOptions::default()).unwrap().p_combined;
            prop_assert!(b <= a + 1e-12, "{}: {} -> {}", m, a, b);
        }
    }
}
