use difuzz_core::proximity::{
    priorityw_all, score_trace, select_ots_and_cfw, simw, w_denominator, GMaxCov, BETA,
};
use difuzz_core::schedule::{capability_w, ets_energy, temperature};
use proptest::prelude::*;

/// Every increasing index tuple drawn from `0..n`.
fn subsets(n: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

/// Best weighted common subsequence by enumerating every pair of index
/// subsets. Returns the best value and the smallest `W` among the optimal
/// alignments (taken over `a`).
fn exhaustive(a: &[(u8, f64)], b: &[(u8, f64)]) -> (f64, f64) {
    let (sa, sb) = (subsets(a.len()), subsets(b.len()));
    let mut best = 0.0f64;
    let mut best_w = a.iter().map(|(_, w)| 1.0 / w).sum::<f64>();
    for ia in &sa {
        for ib in sb.iter().filter(|ib| ib.len() == ia.len()) {
            if ia.iter().zip(ib).any(|(&i, &j)| a[i].0 != b[j].0) {
                continue;
            }
            let value: f64 = ia
                .iter()
                .zip(ib)
                .map(|(&i, &j)| (a[i].1 + b[j].1) / 2.0)
                .sum();
            let missing: f64 = (0..a.len())
                .filter(|i| !ia.contains(i))
                .map(|i| 1.0 / a[i].1)
                .sum();
            let w = value + missing;
            if value > best {
                best = value;
                best_w = w;
            } else if value == best {
                best_w = best_w.min(w);
            }
        }
    }
    (best, best_w)
}

/// Weights that are multiples of 1/64, so sums are exact in binary.
fn dyadic_seq(max: usize) -> impl Strategy<Value = Vec<(u8, f64)>> {
    prop::collection::vec((0..4u8, 1..=64u32), 0..=max).prop_map(|v| {
        v.into_iter()
            .map(|(k, w)| (k, f64::from(w) / 64.0))
            .collect()
    })
}

fn ets_strategy() -> impl Strategy<Value = Vec<(u8, f64)>> {
    (
        1..=8usize,
        Just((0..12u8).collect::<Vec<_>>()).prop_shuffle(),
    )
        .prop_flat_map(|(n, keys)| {
            prop::collection::vec(0.05..=1.0f64, n)
                .prop_map(move |ws| keys.iter().copied().zip(ws).collect::<Vec<_>>())
        })
}

fn cov(ets: &[(u8, f64)], trace: &[u8]) -> f64 {
    score_trace(ets, trace).unwrap().seqcovw
}

fn is_subsequence(ets: &[(u8, f64)], trace: &[u8]) -> bool {
    let mut it = trace.iter();
    ets.iter().all(|(k, _)| it.any(|t| t == k))
}

fn geometric_mean(v: &[f64]) -> f64 {
    v.iter().product::<f64>().powf(1.0 / v.len() as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simw_matches_exhaustive_search(a in dyadic_seq(8), b in dyadic_seq(8)) {
        let dp = simw(&a, &b);
        let (best, best_w) = exhaustive(&a, &b);
        prop_assert_eq!(dp.value, best);
        let w = w_denominator(&a, &dp).unwrap();
        prop_assert!((w - best_w).abs() < 1e-9, "W {} vs {}", w, best_w);
        for pair in dp.matched.windows(2) {
            prop_assert!(pair[0] < pair[1]);
        }
    }

    #[test]
    fn seqcov_bounds_and_full_coverage(ets in ets_strategy(), trace in prop::collection::vec(0..14u8, 0..16)) {
        let c = cov(&ets, &trace);
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert_eq!(c == 1.0, is_subsequence(&ets, &trace));
        let mut full = trace.clone();
        full.extend(ets.iter().map(|(k, _)| *k));
        prop_assert_eq!(cov(&ets, &full), 1.0);
    }

    #[test]
    fn seqcov_grows_with_next_element(ets in ets_strategy(), trace in prop::collection::vec(0..14u8, 0..16)) {
        let projected: Vec<u8> = trace.iter().copied().filter(|t| ets.iter().any(|(k, _)| k == t)).collect();
        let keyed: Vec<(u8, f64)> = ets.clone();
        let sim = difuzz_core::proximity::simw_trace(&keyed, &projected);
        let next = sim.matched.last().map_or(0, |i| i + 1);
        if next < ets.len() {
            let mut longer = trace.clone();
            longer.push(ets[next].0);
            prop_assert!(cov(&ets, &longer) >= cov(&ets, &trace) - 1e-12);
        }
    }

    #[test]
    fn priority_matches_recount(etss in prop::collection::vec(dyadic_seq(6).prop_filter("non-empty", |v| !v.is_empty()), 2..5)) {
        let n = etss.len();
        let mut ratio = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let (sij, wij) = exhaustive(&etss[i], &etss[j]);
                    let (_, wji) = exhaustive(&etss[j], &etss[i]);
                    ratio[i][j] = sij / wij.max(wji);
                }
            }
        }
        let positive: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| ratio[i][j])
            .filter(|r| *r > 0.0)
            .collect();
        let expected: Vec<u32> = if positive.is_empty() {
            vec![0; n]
        } else {
            let eps = geometric_mean(&positive);
            (0..n)
                .map(|i| (0..n).filter(|&j| j != i && ratio[i][j] > 0.0 && ratio[i][j] >= eps * (1.0 - 1e-9)).count() as u32)
                .collect()
        };
        prop_assert_eq!(priorityw_all(&etss).unwrap(), expected);
    }

    #[test]
    fn cfw_branches(
        raw in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64, 0..5u32), 1..6),
        scale in 0.01..100.0f64,
    ) {
        let n = raw.len();
        let seqcov: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let gmax: Vec<f64> = raw.iter().map(|r| r.0.max(r.1)).collect();
        let prio: Vec<u32> = raw.iter().map(|r| r.2.min(n as u32 - 1)).collect();
        let out = select_ots_and_cfw(&seqcov, &prio, &gmax, BETA).unwrap();
        let best = seqcov.iter().cloned().fold(f64::MIN, f64::max);
        let ots = seqcov.iter().position(|v| *v == best).unwrap();
        prop_assert_eq!(out.ots, ots);
        let reaching = gmax.iter().filter(|g| **g >= 0.5).count();
        let p = f64::from(prio[ots]) / n as f64;
        let expected = if reaching * 2 < n {
            (best + p) / 2.0
        } else {
            (best + p + 1.0 - gmax[ots]) / 3.0
        };
        prop_assert!((out.cfw - expected).abs() < 1e-12);
        let scaled: Vec<f64> = seqcov.iter().map(|v| v * scale).collect();
        prop_assert_eq!(select_ots_and_cfw(&scaled, &prio, &gmax, BETA).unwrap().ots, ots);
    }

    #[test]
    fn gmax_never_decreases(updates in prop::collection::vec((0..4usize, 0.0..=1.0f64), 0..50)) {
        let mut g = GMaxCov::new(4);
        let mut prev = g.values().to_vec();
        for (i, v) in updates {
            g.update(i, v);
            for (a, b) in prev.iter().zip(g.values()) {
                prop_assert!(b >= a);
            }
            prop_assert!(g.values()[i] >= v);
            prev = g.values().to_vec();
        }
    }

    #[test]
    fn schedule_monotonicity(t1 in 0.0..1e5f64, dt in 1e-3..1e4f64, tx in 1.0..1e4f64, c1 in 0.0..=1.0f64, dc in 0.0..=1.0f64, base in 1..1000u64) {
        prop_assert!(temperature(t1 + dt, tx) < temperature(t1, tx) || temperature(t1 + dt, tx) == 0.0);
        let c2 = (c1 + dc).min(1.0);
        let temp = temperature(t1, tx);
        if temp < 1.0 {
            prop_assert!(capability_w(c1, temp) <= capability_w(c2, temp));
        }
        let hot = temperature(t1, tx);
        let cold = temperature(t1 + dt, tx);
        if c1 > 0.5 {
            prop_assert!(capability_w(c1, cold) >= capability_w(c1, hot));
        } else {
            prop_assert!(capability_w(c1, cold) <= capability_w(c1, hot));
        }
        prop_assert!(ets_energy(base, c1) <= ets_energy(base, c2));
        prop_assert_eq!(capability_w(c1, 1.0), 0.5);
    }
}

#[test]
fn schedule_fixed_points() {
    assert!((temperature(0.0, 7200.0) - 1.0).abs() < 1e-9);
    assert!((temperature(7200.0, 7200.0) - 0.05).abs() < 1e-9);
    assert_eq!(ets_energy(1000, 1.0), 1024 * ets_energy(1000, 0.0));
}
