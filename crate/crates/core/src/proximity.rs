//! Weighted sequence-coverage metrics between ETSs and execution traces.
//!
//! `SIMW(a, b)` is the best total of `(weight_a + weight_b) / 2` over common
//! subsequences of `a` and `b`; when `b` is a trace its elements borrow the
//! weights of `a`. `W(a, b)` adds `1 / weight` for each element of `a` left
//! out of the best common subsequence, so `SIMW / W` is 1 exactly when `a` is
//! fully covered.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProximityError {
    #[error("element {index} has weight {weight}, expected a value in (0, 1]")]
    BadWeight { index: usize, weight: f64 },
}

/// Best weighted common subsequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Simw {
    pub value: f64,
    /// Positions in the first sequence that form the witness, ascending.
    pub matched: Vec<usize>,
}

#[derive(Clone, Copy)]
enum Step {
    Diag,
    Up,
    Left,
}

/// Weighted LCS over an `n x m` grid. `score(i, j)` is the gain of pairing
/// `a[i]` with `b[j]` (None when they differ). Among optimal subsequences
/// the one maximizing the summed inverse weights of matched `a` elements is
/// kept, which minimizes `W`.
fn weighted_lcs(
    n: usize,
    m: usize,
    score: impl Fn(usize, usize) -> Option<f64>,
    inv: impl Fn(usize) -> f64,
) -> Simw {
    let better = |x: (f64, f64), y: (f64, f64)| x.0 > y.0 || (x.0 == y.0 && x.1 > y.1);
    let width = m + 1;
    let mut dp = vec![(0.0f64, 0.0f64); (n + 1) * width];
    let mut step = vec![Step::Up; (n + 1) * width];
    for i in 1..=n {
        for j in 1..=m {
            let up = dp[(i - 1) * width + j];
            let left = dp[i * width + j - 1];
            let (mut best, mut how) = if better(left, up) {
                (left, Step::Left)
            } else {
                (up, Step::Up)
            };
            if let Some(s) = score(i - 1, j - 1) {
                let d = dp[(i - 1) * width + j - 1];
                let diag = (d.0 + s, d.1 + inv(i - 1));
                if better(diag, best) || (diag.0 == best.0 && diag.1 == best.1) {
                    best = diag;
                    how = Step::Diag;
                }
            }
            dp[i * width + j] = best;
            step[i * width + j] = how;
        }
    }
    let mut matched = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        match step[i * width + j] {
            Step::Diag => {
                matched.push(i - 1);
                i -= 1;
                j -= 1;
            }
            Step::Up => i -= 1,
            Step::Left => j -= 1,
        }
    }
    matched.reverse();
    Simw {
        value: dp[n * width + m].0,
        matched,
    }
}

/// SIMW between two weighted sequences.
pub fn simw<K: PartialEq>(a: &[(K, f64)], b: &[(K, f64)]) -> Simw {
    weighted_lcs(
        a.len(),
        b.len(),
        |i, j| (a[i].0 == b[j].0).then(|| (a[i].1 + b[j].1) / 2.0),
        |i| 1.0 / a[i].1,
    )
}

/// SIMW between a weighted sequence and an unweighted trace.
pub fn simw_trace<K: PartialEq>(ets: &[(K, f64)], trace: &[K]) -> Simw {
    weighted_lcs(
        ets.len(),
        trace.len(),
        |i, j| (ets[i].0 == trace[j]).then(|| (ets[i].1 + ets[i].1) / 2.0),
        |i| 1.0 / ets[i].1,
    )
}

fn check_weights<K>(seq: &[(K, f64)]) -> Result<(), ProximityError> {
    for (index, (_, w)) in seq.iter().enumerate() {
        if !(*w > 0.0 && *w <= 1.0) {
            return Err(ProximityError::BadWeight { index, weight: *w });
        }
    }
    Ok(())
}

/// `W = SIMW + sum of 1/weight over elements of `seq` outside the witness`.
pub fn w_denominator<K>(seq: &[(K, f64)], sim: &Simw) -> Result<f64, ProximityError> {
    check_weights(seq)?;
    let mut in_witness = vec![false; seq.len()];
    for &i in &sim.matched {
        in_witness[i] = true;
    }
    let missing: f64 = seq
        .iter()
        .zip(&in_witness)
        .filter(|(_, hit)| !**hit)
        .map(|((_, w), _)| 1.0 / w)
        .sum();
    Ok(sim.value + missing)
}

/// SIMW, W and SeqCovW of one ETS against one trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageScore {
    pub simw: f64,
    pub w: f64,
    pub seqcovw: f64,
}

pub fn score_trace<K: PartialEq>(
    ets: &[(K, f64)],
    trace: &[K],
) -> Result<CoverageScore, ProximityError> {
    // Trace entries outside the ETS alphabet can never pair up.
    let projected: Vec<&K> = trace
        .iter()
        .filter(|t| ets.iter().any(|(k, _)| k == *t))
        .collect();
    let keyed: Vec<(&K, f64)> = ets.iter().map(|(k, w)| (k, *w)).collect();
    let sim = simw_trace(&keyed, &projected);
    let w = w_denominator(&keyed, &sim)?;
    let seqcovw = if w > 0.0 {
        (sim.value / w).min(1.0)
    } else {
        0.0
    };
    Ok(CoverageScore {
        simw: sim.value,
        w,
        seqcovw,
    })
}

pub fn seqcovw<K: PartialEq>(ets: &[(K, f64)], trace: &[K]) -> Result<f64, ProximityError> {
    score_trace(ets, trace).map(|s| s.seqcovw)
}

/// `SIMW(i, j) / max(W(i, j), W(j, i))` for every ordered pair, `0` on the
/// diagonal.
pub fn similarity_ratios<K: PartialEq>(
    etss: &[Vec<(K, f64)>],
) -> Result<Vec<Vec<f64>>, ProximityError> {
    let n = etss.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let ij = simw(&etss[i], &etss[j]);
            let ji = simw(&etss[j], &etss[i]);
            let denom = w_denominator(&etss[i], &ij)?.max(w_denominator(&etss[j], &ji)?);
            out[i][j] = if denom > 0.0 { ij.value / denom } else { 0.0 };
        }
    }
    Ok(out)
}

/// Relative tolerance when comparing a ratio against the threshold, so that
/// ratios equal to their own geometric mean are not lost to rounding.
const RATIO_TOLERANCE: f64 = 1e-12;

/// PriorityW for every ETS: how many other ETSs have a similarity ratio at
/// or above the geometric mean of all positive pairwise ratios.
pub fn priorityw_all<K: PartialEq>(etss: &[Vec<(K, f64)>]) -> Result<Vec<u32>, ProximityError> {
    let ratios = similarity_ratios(etss)?;
    let positive: Vec<f64> = ratios
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| *j != i))
        .map(|(_, r)| *r)
        .filter(|r| *r > 0.0)
        .collect();
    if positive.is_empty() {
        return Ok(vec![0; etss.len()]);
    }
    let epsilon = (positive.iter().map(|r| r.ln()).sum::<f64>() / positive.len() as f64).exp();
    let threshold = epsilon * (1.0 - RATIO_TOLERANCE);
    Ok(ratios
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(j, r)| *j != i && **r > 0.0 && **r >= threshold)
                .count() as u32
        })
        .collect())
}

/// Running per-ETS maximum of SeqCovW.
#[derive(Debug, Clone, PartialEq)]
pub struct GMaxCov(Vec<f64>);

impl GMaxCov {
    pub fn new(n: usize) -> Self {
        GMaxCov(vec![0.0; n])
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        GMaxCov(values)
    }

    pub fn update(&mut self, ets: usize, seqcov: f64) {
        if seqcov > self.0[ets] {
            self.0[ets] = seqcov;
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn count_at_least(&self, beta: f64) -> usize {
        self.0.iter().filter(|g| **g >= beta).count()
    }
}

/// Coverage threshold above which gMaxCovW starts to count in CFW.
pub const BETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outstanding {
    /// Index of the ETS with the highest SeqCovW (lowest index on ties).
    pub ots: usize,
    pub cfw: f64,
}

/// Picks the outstanding target sequence and computes CFW from its metrics.
/// gMaxCovW only contributes once at least half of the ETSs reach `beta`.
pub fn select_ots_and_cfw(
    seqcov: &[f64],
    priorities: &[u32],
    gmax: &[f64],
    beta: f64,
) -> Option<Outstanding> {
    let n = seqcov.len();
    if n == 0 {
        return None;
    }
    let mut ots = 0;
    for (i, v) in seqcov.iter().enumerate() {
        if *v > seqcov[ots] {
            ots = i;
        }
    }
    let covered = gmax.iter().filter(|g| **g >= beta).count();
    let priority = f64::from(priorities[ots]) / n as f64;
    let cfw = if 2 * covered < n {
        (seqcov[ots] + priority) / 2.0
    } else {
        (seqcov[ots] + priority + (1.0 - gmax[ots])) / 3.0
    };
    Some(Outstanding {
        ots,
        cfw: cfw.clamp(0.0, 1.0),
    })
}
