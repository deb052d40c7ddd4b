//! Repeated-measures one-way ANOVA, the Wilcoxon signed-rank test and the
//! study report built from per-run metric rows.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use libm::{fabs, sqrt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{MetricName, MetricRow, Unit};
use crate::runlog::Condition;
use crate::special::{f_upper_tail, normal_cdf};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("need at least 2 conditions, got {0}")]
    TooFewConditions(usize),
    #[error("subject {row} has {got} cells, expected {expected}")]
    MissingCells { row: usize, got: usize, expected: usize },
    #[error("cell ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("degenerate data: {0}")]
    Degenerate(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    alpha: f64,
}

impl SignificanceConfig {
    /// `None` unless `0 < alpha < 1`.
    pub fn new(alpha: f64) -> Option<Self> {
        (alpha > 0.0 && alpha < 1.0).then_some(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df1: u32,
    pub df2: u32,
    pub p: f64,
    pub ss_conditions: f64,
    pub ss_subjects: f64,
    pub ss_error: f64,
    pub ss_total: f64,
    /// Error variance was zero while condition means differed; `f` is
    /// infinite and `p` is 0.
    pub degenerate: bool,
}

impl fmt::Display for AnovaResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F({},{}) = {:.2}, p {}", self.df1, self.df2, self.f, PValue(self.p))
    }
}

/// p-value in reporting style with its relation: `= 0.042` or `< 0.001`.
pub struct PValue(pub f64);

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 < 0.001 {
            f.write_str("< 0.001")
        } else {
            write!(f, "= {:.3}", self.0)
        }
    }
}

/// One-way within-subjects ANOVA over an `n × k` matrix (subjects × conditions).
pub fn rm_anova<R: AsRef<[f64]>>(data: &[R]) -> Result<AnovaResult, StatsError> {
    let n = data.len();
    if n < 2 {
        return Err(StatsError::TooFewSubjects(n));
    }
    let k = data[0].as_ref().len();
    if k < 2 {
        return Err(StatsError::TooFewConditions(k));
    }
    for (row, r) in data.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != k {
            return Err(StatsError::MissingCells { row, got: r.len(), expected: k });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite { row, col });
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let grand = data.iter().flat_map(|r| r.as_ref().iter()).sum::<f64>() / (nf * kf);
    let col_means: Vec<f64> = (0..k).map(|j| data.iter().map(|r| r.as_ref()[j]).sum::<f64>() / nf).collect();
    let row_means: Vec<f64> = data.iter().map(|r| r.as_ref().iter().sum::<f64>() / kf).collect();

    let sq = |v: f64| v * v;
    let ss_total: f64 = data.iter().flat_map(|r| r.as_ref().iter()).map(|&v| sq(v - grand)).sum();
    let ss_conditions = nf * col_means.iter().map(|&m| sq(m - grand)).sum::<f64>();
    let ss_subjects = kf * row_means.iter().map(|&m| sq(m - grand)).sum::<f64>();
    // residuals computed directly rather than by subtraction, so a perfect
    // additive fit gives exactly zero instead of rounding noise
    let ss_error: f64 = data
        .iter()
        .zip(&row_means)
        .flat_map(|(r, &rm)| r.as_ref().iter().zip(&col_means).map(move |(&v, &cm)| sq(v - rm - cm + grand)))
        .sum();

    let df1 = (k - 1) as u32;
    let df2 = ((k - 1) * (n - 1)) as u32;
    let ms_cond = ss_conditions / df1 as f64;
    let ms_err = ss_error / df2 as f64;
    let scale = ss_total.max(f64::MIN_POSITIVE);
    let cond_zero = ss_conditions <= 1e-12 * scale;
    let err_zero = ss_error <= 1e-12 * scale;
    let result =
        |f, p, degenerate| AnovaResult { f, df1, df2, p, ss_conditions, ss_subjects, ss_error, ss_total, degenerate };
    match (err_zero, cond_zero) {
        (true, true) => Err(StatsError::Degenerate("no condition or error variance")),
        (true, false) => Ok(result(f64::INFINITY, 0.0, true)),
        (false, true) => Ok(result(0.0, 1.0, false)),
        (false, false) => {
            let f = ms_cond / ms_err;
            Ok(result(f, f_upper_tail(f, df1 as f64, df2 as f64), false))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub w: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub n_effective: usize,
    pub p: f64,
    pub method: WilcoxonMethod,
}

impl fmt::Display for WilcoxonResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W = {:.1}, p {} (n = {})", self.w, PValue(self.p), self.n_effective)
    }
}

/// Largest effective sample size for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 25;

/// Average ranks of `|d|`, doubled so tied ranks stay integral.
/// Returns the doubled ranks in input order and the tie-group sizes.
fn doubled_ranks(abs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0u64; abs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && abs[order[j]] == abs[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share rank (i+1+j)/2
        let doubled = (i + 1 + j) as u64;
        for &o in &order[i..j] {
            ranks[o] = doubled;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Two-sided Wilcoxon signed-rank test on paired differences `a - b`.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<WilcoxonResult, StatsError> {
    let diffs: Vec<f64> = pairs.iter().map(|&(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if let Some(row) = pairs.iter().position(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(StatsError::NonFinite { row, col: 0 });
    }
    if diffs.is_empty() {
        return Err(StatsError::Degenerate("all differences are zero"));
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| fabs(*d)).collect();
    let (ranks, ties) = doubled_ranks(&abs);
    let plus2: u64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).sum();
    let total2 = (n * (n + 1)) as u64;
    let w_plus = plus2 as f64 / 2.0;
    let w_minus = (total2 - plus2) as f64 / 2.0;
    let mean2 = total2 / 2;

    let (p, method) = if n <= EXACT_LIMIT {
        // counts[s] = number of sign patterns whose doubled positive sum is s
        let mut counts = vec![0.0f64; total2 as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let observed = plus2.abs_diff(mean2);
        let extreme: f64 =
            counts.iter().enumerate().filter(|(s, _)| (*s as u64).abs_diff(mean2) >= observed).map(|(_, c)| c).sum();
        ((extreme / libm::pow(2.0, n as f64)).min(1.0), WilcoxonMethod::Exact)
    } else {
        let nf = n as f64;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let mu = nf * (nf + 1.0) / 4.0;
        let dev = w_plus - mu;
        let z = (dev - 0.5 * dev.signum()) / sqrt(var);
        ((2.0 * (1.0 - normal_cdf(fabs(z)))).min(1.0), WilcoxonMethod::NormalApprox)
    };
    Ok(WilcoxonResult { w: w_plus.min(w_minus), w_plus, w_minus, n_effective: n, p, method })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub condition: Condition,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation across subjects.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    /// What is compared, e.g. `tactile vs gesture` or `road 1 vs road 2`.
    pub label: String,
    pub anova: AnovaResult,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: MetricName,
    pub unit: Unit,
    pub cells: Vec<CellSummary>,
    pub omnibus: Option<TestRow>,
    pub contrasts: Vec<TestRow>,
    pub road_contrast: Option<TestRow>,
    /// Subjects dropped because a cell was missing.
    pub excluded_subjects: Vec<u32>,
}

/// Paired subjective ratings, e.g. one questionnaire item under two interfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedScores {
    pub name: String,
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonRow {
    pub name: String,
    pub result: WilcoxonResult,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub alpha: f64,
    pub metrics: Vec<MetricReport>,
    pub wilcoxon: Vec<WilcoxonRow>,
    pub warnings: Vec<String>,
}

impl StudyReport {
    pub fn metric(&self, name: MetricName) -> Option<&MetricReport> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
    };
    (mean, sd)
}

type Cells = BTreeMap<(u32, Condition, u32), Vec<f64>>;

fn metric_report(
    metric: MetricName,
    cells: &Cells,
    config: &SignificanceConfig,
    warnings: &mut Vec<String>,
) -> MetricReport {
    let conditions: BTreeSet<Condition> = cells.keys().map(|k| k.1).collect();
    let roads: BTreeSet<u32> = cells.keys().map(|k| k.2).collect();
    let subjects: BTreeSet<u32> = cells.keys().map(|k| k.0).collect();
    let cell_value =
        |s: u32, c: Condition, r: u32| cells.get(&(s, c, r)).map(|v| v.iter().sum::<f64>() / v.len() as f64);

    let (complete, excluded): (Vec<u32>, Vec<u32>) = subjects
        .iter()
        .partition(|&&s| conditions.iter().all(|&c| roads.iter().all(|&r| cells.contains_key(&(s, c, r)))));
    if !excluded.is_empty() {
        warnings.push(format!("{metric}: {} subject(s) with missing cells excluded", excluded.len()));
    }

    // per subject, per condition, averaged over roads
    let by_condition: Vec<Vec<f64>> = complete
        .iter()
        .map(|&s| {
            conditions
                .iter()
                .map(|&c| roads.iter().map(|&r| cell_value(s, c, r).unwrap_or(0.0)).sum::<f64>() / roads.len() as f64)
                .collect()
        })
        .collect();

    let summaries = conditions
        .iter()
        .enumerate()
        .map(|(j, &condition)| {
            let col: Vec<f64> = by_condition.iter().map(|r| r[j]).collect();
            let (mean, sd) = if col.is_empty() { (f64::NAN, f64::NAN) } else { mean_sd(&col) };
            CellSummary { condition, n: col.len(), mean, sd }
        })
        .collect();

    let mut test = |label: String, matrix: &[Vec<f64>]| match rm_anova(matrix) {
        Ok(anova) => Some(TestRow { label, significant: anova.p < config.alpha(), anova }),
        Err(e) => {
            warnings.push(format!("{metric}: {label}: {e}"));
            None
        }
    };

    let names: Vec<Condition> = conditions.iter().copied().collect();
    let mut omnibus = None;
    let mut contrasts = Vec::new();
    if names.len() >= 2 && complete.len() >= 2 {
        let label = names.iter().map(|c| c.name()).collect::<Vec<_>>().join(" vs ");
        omnibus = test(label, &by_condition);
        if names.len() > 2 {
            for a in 0..names.len() {
                for b in a + 1..names.len() {
                    let m: Vec<Vec<f64>> = by_condition.iter().map(|r| vec![r[a], r[b]]).collect();
                    contrasts.extend(test(format!("{} vs {}", names[a], names[b]), &m));
                }
            }
        }
    }

    let road_list: Vec<u32> = roads.iter().copied().collect();
    let road_contrast = if road_list.len() >= 2 && complete.len() >= 2 {
        let m: Vec<Vec<f64>> = complete
            .iter()
            .map(|&s| {
                road_list
                    .iter()
                    .map(|&r| {
                        names.iter().map(|&c| cell_value(s, c, r).unwrap_or(0.0)).sum::<f64>() / names.len() as f64
                    })
                    .collect()
            })
            .collect();
        let label = road_list.iter().map(|r| format!("road {r}")).collect::<Vec<_>>().join(" vs ");
        test(label, &m)
    } else {
        None
    };

    MetricReport {
        metric,
        unit: metric.unit(),
        cells: summaries,
        omnibus,
        contrasts,
        road_contrast,
        excluded_subjects: excluded,
    }
}

/// Per-metric condition summaries and tests. Subjects are averaged over
/// roads before the condition tests; the road contrast averages over
/// conditions.
pub fn build_report(rows: &[MetricRow], scores: &[PairedScores], config: &SignificanceConfig) -> StudyReport {
    let mut warnings = Vec::new();
    let mut by_metric: BTreeMap<MetricName, Cells> = BTreeMap::new();
    for r in rows {
        by_metric.entry(r.metric).or_default().entry((r.subject, r.condition, r.road)).or_default().push(r.value);
    }
    if by_metric.is_empty() && scores.is_empty() {
        warnings.push(String::from("no metric rows"));
    }
    let metrics =
        by_metric.iter().map(|(&metric, cells)| metric_report(metric, cells, config, &mut warnings)).collect();
    let wilcoxon = scores
        .iter()
        .filter_map(|s| match wilcoxon_signed_rank(&s.pairs) {
            Ok(result) => Some(WilcoxonRow { name: s.name.clone(), significant: result.p < config.alpha(), result }),
            Err(e) => {
                warnings.push(format!("{}: {e}", s.name));
                None
            }
        })
        .collect();
    StudyReport { alpha: config.alpha(), metrics, wilcoxon, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let subject: f64 = rng.random_range(-2.0..2.0);
                (0..k).map(|j| subject + j as f64 * 0.2 + rng.random_range(-1.0..1.0)).collect()
            })
            .collect()
    }

    #[test]
    fn paper_degrees_of_freedom() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = rm_anova(&random_matrix(&mut rng, 32, 3)).unwrap();
        assert_eq!((r.df1, r.df2), (2, 62));
        let r = rm_anova(&random_matrix(&mut rng, 32, 2)).unwrap();
        assert_eq!((r.df1, r.df2), (1, 31));
    }

    #[test]
    fn equal_condition_means_give_zero_f() {
        let data = vec![vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0], vec![2.0, 3.0, 1.0]];
        let r = rm_anova(&data).unwrap();
        assert_eq!((r.f, r.p), (0.0, 1.0));
        assert!(r.ss_error > 0.0);

        let flat: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64; 3]).collect();
        assert_eq!(rm_anova(&flat), Err(StatsError::Degenerate("no condition or error variance")));
    }

    #[test]
    fn degenerate_error_variance() {
        // purely additive: every subject shifted equally by condition
        let data = vec![vec![1.0, 2.0, 3.0], vec![5.0, 6.0, 7.0], vec![0.0, 1.0, 2.0]];
        let r = rm_anova(&data).unwrap();
        assert!(r.degenerate && r.p == 0.0 && r.f.is_infinite());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert_eq!(rm_anova(&[vec![1.0, 2.0]]), Err(StatsError::TooFewSubjects(1)));
        assert_eq!(rm_anova(&[vec![1.0], vec![2.0]]), Err(StatsError::TooFewConditions(1)));
        assert!(matches!(rm_anova(&[vec![1.0, 2.0], vec![2.0]]), Err(StatsError::MissingCells { row: 1, .. })));
        assert!(matches!(
            rm_anova(&[vec![1.0, 2.0], vec![f64::NAN, 1.0]]),
            Err(StatsError::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn two_condition_anova_is_squared_paired_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = random_matrix(&mut rng, 12, 2);
        let d: Vec<f64> = data.iter().map(|r| r[0] - r[1]).collect();
        let (m, sd) = mean_sd(&d);
        let t = m / (sd / sqrt(d.len() as f64));
        assert_relative_eq!(rm_anova(&data).unwrap().f, t * t, max_relative = 1e-10);
    }

    fn brute_force_p(diffs: &[f64]) -> f64 {
        let d: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
        let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
        // average ranks by counting
        let rank = |x: f64| {
            let below = abs.iter().filter(|&&a| a < x).count() as f64;
            let equal = abs.iter().filter(|&&a| a == x).count() as f64;
            below + (equal + 1.0) / 2.0
        };
        let ranks: Vec<f64> = abs.iter().map(|&a| rank(a)).collect();
        let n = d.len();
        let mu = n as f64 * (n as f64 + 1.0) / 4.0;
        let obs: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if (s - mu).abs() >= (obs - mu).abs() - 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn wilcoxon_small_examples() {
        let r = wilcoxon_signed_rank(&[(1.0, 0.0), (0.0, 1.0)]).unwrap();
        assert_eq!((r.w, r.w_plus, r.w_minus, r.p, r.method), (1.5, 1.5, 1.5, 1.0, WilcoxonMethod::Exact));
        let pairs: Vec<(f64, f64)> = (0..32).map(|i| (5.0 + i as f64 * 0.1, 2.0)).collect();
        let r = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(r.w, 0.0);
        assert!(r.p < 0.001);
        assert_eq!(wilcoxon_signed_rank(&[(1.0, 1.0)]), Err(StatsError::Degenerate("all differences are zero")));
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 1..=12 {
            for _ in 0..5 {
                let diffs: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=4) as f64).collect();
                if diffs.iter().all(|d| *d == 0.0) {
                    continue;
                }
                let pairs: Vec<(f64, f64)> = diffs.iter().map(|&d| (d, 0.0)).collect();
                let r = wilcoxon_signed_rank(&pairs).unwrap();
                assert_eq!(r.method, WilcoxonMethod::Exact);
                assert_relative_eq!(r.p, brute_force_p(&diffs), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn exact_and_normal_agree_near_the_switch() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for n in 20..=25 {
            for _ in 0..10 {
                let pairs: Vec<(f64, f64)> =
                    (0..n).map(|_| (rng.random_range(-1.0..1.3), rng.random_range(-1.0..1.0))).collect();
                let exact = wilcoxon_signed_rank(&pairs).unwrap();
                let abs: Vec<f64> = pairs.iter().map(|(a, b)| (a - b).abs()).collect();
                let (_, ties) = doubled_ranks(&abs);
                let nf = n as f64;
                let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0
                    - ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
                let dev = exact.w_plus - nf * (nf + 1.0) / 4.0;
                let z = (dev.abs() - 0.5) / var.sqrt();
                let approx = 2.0 * (1.0 - normal_cdf(z.abs()));
                assert!((exact.p - approx).abs() < 0.01, "n={n}: {} vs {approx}", exact.p);
            }
        }
    }

    #[test]
    fn report_shapes() {
        let mut rows = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in 0..32 {
            for c in Condition::ALL {
                for road in [1, 2] {
                    let v = 1.0 + if c == Condition::Tactile { 0.2 } else { 0.0 } + rng.random_range(-0.1..0.1);
                    rows.push(MetricRow {
                        subject: s,
                        condition: c,
                        road,
                        metric: MetricName::BrakeResponseTime,
                        value: v,
                    });
                }
            }
        }
        let report = build_report(&rows, &[], &SignificanceConfig::default());
        let m = report.metric(MetricName::BrakeResponseTime).unwrap();
        let omni = m.omnibus.as_ref().unwrap();
        assert_eq!((omni.anova.df1, omni.anova.df2), (2, 62));
        assert!(omni.significant);
        assert_eq!(m.contrasts.len(), 3);
        assert!(m.contrasts.iter().all(|c| (c.anova.df1, c.anova.df2) == (1, 31)));
        assert_eq!(m.contrasts[0].label, "baseline vs tactile");
        let road = m.road_contrast.as_ref().unwrap();
        assert_eq!((road.anova.df1, road.anova.df2), (1, 31));

        let single = build_report(
            &[],
            &[PairedScores { name: "ease".into(), pairs: vec![(5.0, 3.0)] }],
            &SignificanceConfig::default(),
        );
        assert_eq!(single.wilcoxon.len(), 1);
        assert!(single.metrics.is_empty());

        let empty = build_report(&[], &[], &SignificanceConfig::default());
        assert!(empty.metrics.is_empty() && empty.wilcoxon.is_empty());
        assert_eq!(empty.warnings.len(), 1);
    }

    #[test]
    fn unbalanced_subjects_excluded() {
        let mut rows = Vec::new();
        for s in 0..4 {
            for c in [Condition::Tactile, Condition::Gesture] {
                if s == 3 && c == Condition::Gesture {
                    continue;
                }
                rows.push(MetricRow {
                    subject: s,
                    condition: c,
                    road: 1,
                    metric: MetricName::TaskCompletionTime,
                    value: s as f64 + if c == Condition::Gesture { 0.5 } else { 0.1 * s as f64 },
                });
            }
        }
        let report = build_report(&rows, &[], &SignificanceConfig::default());
        let m = report.metric(MetricName::TaskCompletionTime).unwrap();
        assert_eq!(m.excluded_subjects, [3]);
        assert_eq!(m.omnibus.as_ref().unwrap().anova.df2, 2);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn formatting() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = rm_anova(&random_matrix(&mut rng, 32, 3)).unwrap();
        let s = alloc::format!("{r}");
        assert!(s.starts_with("F(2,62) = "), "{s}");
        assert_eq!(alloc::format!("{}", PValue(0.0004)), "< 0.001");
        assert_eq!(alloc::format!("{}", PValue(0.0416)), "= 0.042");
    }

    proptest! {
        #[test]
        fn ss_decomposition_closes(seed in any::<u64>(), n in 2usize..40, k in 2usize..6) {
            let data = random_matrix(&mut ChaCha8Rng::seed_from_u64(seed), n, k);
            let r = rm_anova(&data).unwrap();
            let sum = r.ss_conditions + r.ss_subjects + r.ss_error;
            prop_assert!((sum - r.ss_total).abs() <= 1e-9 * r.ss_total);
            prop_assert!(r.f >= 0.0 && (0.0..=1.0).contains(&r.p));
        }

        #[test]
        fn anova_shift_and_scale_invariant(seed in any::<u64>(), shift in -100.0f64..100.0, scale in 0.01f64..100.0) {
            let data = random_matrix(&mut ChaCha8Rng::seed_from_u64(seed), 10, 3);
            let r = rm_anova(&data).unwrap();
            let shifted: Vec<Vec<f64>> = data.iter().map(|row| row.iter().map(|v| v + shift).collect()).collect();
            let scaled: Vec<Vec<f64>> = data.iter().map(|row| row.iter().map(|v| v * scale).collect()).collect();
            let (rs, rc) = (rm_anova(&shifted).unwrap(), rm_anova(&scaled).unwrap());
            prop_assert!((rs.f - r.f).abs() <= 1e-8 * r.f.max(1.0));
            prop_assert!((rs.p - r.p).abs() <= 1e-8);
            prop_assert!((rc.f - r.f).abs() <= 1e-8 * r.f.max(1.0));
        }

        #[test]
        fn wilcoxon_monotone_invariant(pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..30)) {
            prop_assume!(pairs.iter().any(|(a, b)| a != b));
            let r = wilcoxon_signed_rank(&pairs).unwrap();
            // an increasing affine map keeps both the signs and the ranks of the differences
            let mapped: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (3.0 * a + 7.0, 3.0 * b + 7.0)).collect();
            let m = wilcoxon_signed_rank(&mapped).unwrap();
            prop_assert_eq!(r.w, m.w);
            prop_assert!(r.w <= (r.n_effective * (r.n_effective + 1)) as f64 / 4.0 + 1e-12);
        }
    }
}
