//! Day clustering and unexpected-pattern detection.
//!
//! Days are compared pairwise with the day-similarity field. Each day's row
//! of the similarity matrix serves as its feature vector for fuzzy c-means.
//! A day's extraneousness index (EI) is half the L1 distance between its
//! membership vector and the membership vector of the centroid the calendar
//! expects it to belong to; a day is unexpected when its EI exceeds the
//! largest EI seen on the training days.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::write_pgm;
use crate::perceptron::{ActivityLevelSeries, DaySimilaritySrf};

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    days: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.days.len()
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Pairwise day similarities with a forced unit diagonal.
pub fn build_similarity_matrix(
    series: &[ActivityLevelSeries],
    dsrf: &DaySimilaritySrf,
) -> Result<SimilarityMatrix> {
    if series.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "similarity matrix needs >= 2 days, got {}",
            series.len()
        )));
    }
    let n = series.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let s = dsrf.day_similarity(&series[i], &series[j])?;
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    Ok(SimilarityMatrix {
        days: series.iter().map(|s| s.day).collect(),
        values,
    })
}

/// Similarities of one day against every training day, in training order.
pub fn similarity_row(
    day: &ActivityLevelSeries,
    training: &[ActivityLevelSeries],
    dsrf: &DaySimilaritySrf,
) -> Result<Vec<f64>> {
    training
        .iter()
        .map(|t| dsrf.day_similarity(day, t))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcmConfig {
    pub clusters: usize,
    pub fuzzifier: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FcmConfig {
    fn default() -> Self {
        Self {
            clusters: 3,
            fuzzifier: 2.0,
            tol: 1e-6,
            max_iter: 300,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub fuzzifier: f64,
    /// One membership vector per fitted row.
    pub memberships: Vec<Vec<f64>>,
    /// Objective after each iteration.
    pub objective: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Fuzzy memberships of `point` against fixed `centroids`. A point that
/// coincides with one or more centroids belongs to them exclusively.
pub fn memberships(point: &[f64], centroids: &[Vec<f64>], fuzzifier: f64) -> Vec<f64> {
    let d2: Vec<f64> = centroids.iter().map(|c| sq_dist(point, c)).collect();
    let zeros = d2.iter().filter(|&&d| d == 0.0).count();
    if zeros > 0 {
        return d2
            .iter()
            .map(|&d| if d == 0.0 { 1.0 / zeros as f64 } else { 0.0 })
            .collect();
    }
    // u_k = 1 / sum_j (d_k / d_j)^(2/(m-1)), written on squared distances
    let e = 1.0 / (fuzzifier - 1.0);
    let inv: Vec<f64> = d2.iter().map(|&d| d.powf(-e)).collect();
    let total: f64 = inv.iter().sum();
    inv.iter().map(|v| v / total).collect()
}

fn objective(rows: &[Vec<f64>], centroids: &[Vec<f64>], u: &[Vec<f64>], m: f64) -> f64 {
    rows.iter()
        .zip(u)
        .map(|(x, ui)| {
            centroids
                .iter()
                .zip(ui)
                .map(|(c, &uik)| uik.powf(m) * sq_dist(x, c))
                .sum::<f64>()
        })
        .sum()
}

fn centroids_of(rows: &[Vec<f64>], u: &[Vec<f64>], c: usize, m: f64) -> Vec<Vec<f64>> {
    let dim = rows[0].len();
    (0..c)
        .map(|k| {
            let mut num = vec![0.0; dim];
            let mut den = 0.0;
            for (x, ui) in rows.iter().zip(u) {
                let w = ui[k].powf(m);
                den += w;
                for (n, xv) in num.iter_mut().zip(x) {
                    *n += w * xv;
                }
            }
            if den > 0.0 {
                num.iter_mut().for_each(|v| *v /= den);
            }
            num
        })
        .collect()
}

/// Standard fuzzy c-means on feature rows, starting from a seeded random
/// membership matrix. Stops when the objective changes by less than `tol`.
pub fn fcm_fit(rows: &[Vec<f64>], cfg: &FcmConfig) -> Result<ClusterModel> {
    if cfg.clusters < 2 {
        return Err(Error::InvalidParameter(format!(
            "need >= 2 clusters, got {}",
            cfg.clusters
        )));
    }
    if !(cfg.fuzzifier > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fuzzifier must exceed 1, got {}",
            cfg.fuzzifier
        )));
    }
    if rows.len() < cfg.clusters {
        return Err(Error::InvalidParameter(format!(
            "{} rows cannot form {} clusters",
            rows.len(),
            cfg.clusters
        )));
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let (c, m) = (cfg.clusters, cfg.fuzzifier);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u: Vec<Vec<f64>> = rows
        .iter()
        .map(|_| {
            let raw: Vec<f64> = (0..c).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let mut history = Vec::new();
    let mut centroids = centroids_of(rows, &u, c, m);
    for _ in 0..cfg.max_iter {
        centroids = centroids_of(rows, &u, c, m);
        u = rows.iter().map(|x| memberships(x, &centroids, m)).collect();
        let j = objective(rows, &centroids, &u, m);
        let done = history
            .last()
            .is_some_and(|&prev: &f64| (prev - j).abs() < cfg.tol);
        history.push(j);
        if done {
            break;
        }
    }
    Ok(ClusterModel {
        centroids,
        fuzzifier: m,
        memberships: u,
        objective: history,
    })
}

pub fn fcm_fit_matrix(matrix: &SimilarityMatrix, cfg: &FcmConfig) -> Result<ClusterModel> {
    fcm_fit(&matrix.rows(), cfg)
}

impl ClusterModel {
    pub fn clusters(&self) -> usize {
        self.centroids.len()
    }

    /// Memberships of a new row against the frozen centroids.
    pub fn membership_of(&self, row: &[f64]) -> Result<Vec<f64>> {
        let dim = self.centroids[0].len();
        if row.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                actual: row.len(),
            });
        }
        Ok(memberships(row, &self.centroids, self.fuzzifier))
    }

    /// Membership vector of centroid `k` itself.
    pub fn centroid_membership(&self, k: usize) -> Vec<f64> {
        memberships(&self.centroids[k], &self.centroids, self.fuzzifier)
    }
}

const UNIT_SUM_TOL: f64 = 1e-6;

/// Half the L1 distance between two unit-sum membership vectors, in `[0, 1]`.
pub fn extraneousness_index(u_day: &[f64], u_expected: &[f64]) -> Result<f64> {
    if u_day.len() != u_expected.len() {
        return Err(Error::LengthMismatch {
            expected: u_expected.len(),
            actual: u_day.len(),
        });
    }
    for u in [u_day, u_expected] {
        let s: f64 = u.iter().sum();
        if (s - 1.0).abs() > UNIT_SUM_TOL || u.iter().any(|&v| v < -UNIT_SUM_TOL) {
            return Err(Error::NotNormalized(s));
        }
    }
    let l1: f64 = u_day
        .iter()
        .zip(u_expected)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((l1 / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DayClass {
    Working,
    Entertainment,
    Leisure,
}

impl DayClass {
    pub const ALL: [DayClass; 3] = [
        DayClass::Working,
        DayClass::Entertainment,
        DayClass::Leisure,
    ];

    /// Calendar rule: Monday to Thursday work, Friday and Saturday nights
    /// out, Sunday leisure.
    pub fn of_weekday(wd: Weekday) -> Self {
        match wd {
            Weekday::Mon | Weekday::Tue | Weekday::Wed | Weekday::Thu => DayClass::Working,
            Weekday::Fri | Weekday::Sat => DayClass::Entertainment,
            Weekday::Sun => DayClass::Leisure,
        }
    }

    pub fn of_date(d: NaiveDate) -> Self {
        Self::of_weekday(d.weekday())
    }

    pub fn name(self) -> &'static str {
        match self {
            DayClass::Working => "working",
            DayClass::Entertainment => "entertainment",
            DayClass::Leisure => "leisure",
        }
    }
}

impl fmt::Display for DayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DayClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DayClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown day class '{s}'")))
    }
}

/// Names each cluster after the calendar class of the days that belong to it
/// most. With as many clusters as classes the assignment is a bijection
/// maximizing agreement; otherwise each cluster takes its majority class.
pub fn name_clusters(model: &ClusterModel, classes: &[DayClass]) -> Vec<DayClass> {
    let c = model.clusters();
    let mut counts = vec![[0usize; 3]; c];
    for (u, class) in model.memberships.iter().zip(classes) {
        let k = argmax(u);
        counts[k][*class as usize] += 1;
    }
    if c == DayClass::ALL.len() {
        let mut best = (0usize, [0usize, 1, 2]);
        for perm in permutations3() {
            let score: usize = (0..3).map(|k| counts[k][perm[k]]).sum();
            if score > best.0 {
                best = (score, perm);
            }
        }
        return best.1.iter().map(|&i| DayClass::ALL[i]).collect();
    }
    counts
        .iter()
        .map(|row| {
            let i = (0..3)
                .max_by_key(|&i| (row[i], std::cmp::Reverse(i)))
                .unwrap_or(0);
            DayClass::ALL[i]
        })
        .collect()
}

fn permutations3() -> [[usize; 3]; 6] {
    [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ]
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub date: NaiveDate,
    pub ei: f64,
    pub expected_class: DayClass,
    pub expected_cluster: usize,
    pub memberships: Vec<f64>,
    pub flagged: bool,
    pub threshold: f64,
}

/// EI differences below this are not significant; it is also the precision
/// of the EI report. A day is flagged when its EI exceeds the threshold by
/// more than this.
pub const EI_RESOLUTION: f64 = 1e-4;

pub fn exceeds(ei: f64, threshold: f64) -> bool {
    ei > threshold + EI_RESOLUTION
}

/// Days whose EI exceeds `threshold`, sorted by EI descending then date.
pub fn detect_unexpected(reports: &[AnomalyReport], threshold: f64) -> Vec<AnomalyReport> {
    let mut out: Vec<AnomalyReport> = reports
        .iter()
        .filter(|r| exceeds(r.ei, threshold))
        .cloned()
        .map(|mut r| {
            r.flagged = true;
            r.threshold = threshold;
            r
        })
        .collect();
    sort_reports(&mut out);
    out
}

pub fn sort_reports(reports: &mut [AnomalyReport]) {
    reports.sort_by(|a, b| {
        b.ei.partial_cmp(&a.ei)
            .unwrap_or(Ordering::Equal)
            .then(a.date.cmp(&b.date))
    });
}

/// Fitted clustering of training days plus everything needed to score new days.
#[derive(Debug, Clone)]
pub struct AnomalyDetector {
    pub dsrf: DaySimilaritySrf,
    pub training: Vec<ActivityLevelSeries>,
    pub matrix: SimilarityMatrix,
    pub model: ClusterModel,
    /// Class assigned to each cluster.
    pub cluster_classes: Vec<DayClass>,
    /// Largest EI among the training days.
    pub threshold: f64,
}

impl AnomalyDetector {
    pub fn fit(
        training: Vec<ActivityLevelSeries>,
        dsrf: DaySimilaritySrf,
        cfg: &FcmConfig,
    ) -> Result<Self> {
        let matrix = build_similarity_matrix(&training, &dsrf)?;
        let model = fcm_fit_matrix(&matrix, cfg)?;
        let classes: Vec<DayClass> = training.iter().map(|s| DayClass::of_date(s.day)).collect();
        let cluster_classes = name_clusters(&model, &classes);
        let mut det = Self {
            dsrf,
            training,
            matrix,
            model,
            cluster_classes,
            threshold: 0.0,
        };
        let mut max_ei: f64 = 0.0;
        for (i, u) in det.model.memberships.iter().enumerate() {
            let (_, _, ei) = det.score_memberships(det.training[i].day, u)?;
            max_ei = max_ei.max(ei);
        }
        det.threshold = max_ei;
        Ok(det)
    }

    /// Cluster the calendar expects for `date`, if any cluster carries its class.
    pub fn expected_cluster(&self, date: NaiveDate) -> Option<(DayClass, usize)> {
        let class = DayClass::of_date(date);
        self.cluster_classes
            .iter()
            .position(|&c| c == class)
            .map(|k| (class, k))
    }

    fn score_memberships(&self, date: NaiveDate, u: &[f64]) -> Result<(DayClass, usize, f64)> {
        let (class, k) = self.expected_cluster(date).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "no cluster represents the {} class expected on {date}",
                DayClass::of_date(date)
            ))
        })?;
        let ei = extraneousness_index(u, &self.model.centroid_membership(k))?;
        Ok((class, k, ei))
    }

    /// EI report for one day; `flagged` applies the training-max threshold.
    pub fn evaluate(&self, day: &ActivityLevelSeries) -> Result<AnomalyReport> {
        let row = similarity_row(day, &self.training, &self.dsrf)?;
        let u = self.model.membership_of(&row)?;
        let (class, k, ei) = self.score_memberships(day.day, &u)?;
        Ok(AnomalyReport {
            date: day.day,
            ei,
            expected_class: class,
            expected_cluster: k,
            memberships: u,
            flagged: exceeds(ei, self.threshold),
            threshold: self.threshold,
        })
    }

    pub fn evaluate_all(&self, days: &[ActivityLevelSeries]) -> Result<Vec<AnomalyReport>> {
        days.iter().map(|d| self.evaluate(d)).collect()
    }
}

/// `date,<class per cluster>...` with one membership row per report.
pub fn write_membership_csv<W: Write>(
    mut w: W,
    reports: &[AnomalyReport],
    cluster_classes: &[DayClass],
) -> std::io::Result<()> {
    let header: Vec<String> = cluster_classes
        .iter()
        .enumerate()
        .map(|(k, c)| format!("c{k}_{c}"))
        .collect();
    writeln!(w, "date,{}", header.join(","))?;
    for r in reports {
        let vals: Vec<String> = r.memberships.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(w, "{},{}", r.date, vals.join(","))?;
    }
    Ok(())
}

/// Unexpected-pattern table: `date,ei,expected_class,flagged`.
pub fn write_ei_csv<W: Write>(mut w: W, reports: &[AnomalyReport]) -> std::io::Result<()> {
    writeln!(w, "date,ei,expected_class,flagged")?;
    for r in reports {
        writeln!(
            w,
            "{},{:.4},{},{}",
            r.date, r.ei, r.expected_class, r.flagged
        )?;
    }
    Ok(())
}

/// Membership matrix as an image: one column per day, one row per cluster,
/// white for full membership.
pub fn write_membership_pgm<W: Write>(
    w: W,
    reports: &[AnomalyReport],
    clusters: usize,
) -> std::io::Result<()> {
    let mut values = Vec::with_capacity(reports.len() * clusters);
    for k in 0..clusters {
        values.extend(
            reports
                .iter()
                .map(|r| r.memberships.get(k).copied().unwrap_or(0.0)),
        );
    }
    write_pgm(w, reports.len(), clusters, &values, Some(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn identical_days_give_ones() {
        let d = DaySimilaritySrf::default();
        let s = ActivityLevelSeries {
            day: date("2015-03-02"),
            levels: vec![1.0, 2.0, 3.0, 5.0, 6.0, 4.0, 2.0],
        };
        let mut d1 = s.clone();
        d1.day = date("2015-03-03");
        let m = build_similarity_matrix(&[s.clone(), d1], &d).unwrap();
        // identical trails give jaccard 1; activation maps that below 1
        let one = d.similarity(&s.levels, &s.levels).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), one);
        assert!(build_similarity_matrix(&[s], &d).is_err());
    }

    #[test]
    fn singularity_rule() {
        let cs = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.0]];
        assert_eq!(memberships(&[1.0, 1.0], &cs, 2.0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn equidistant_point_splits_evenly() {
        let cs = vec![
            vec![1.0, 0.0],
            vec![-0.5, 3f64.sqrt() / 2.0],
            vec![-0.5, -(3f64.sqrt()) / 2.0],
        ];
        let u = memberships(&[0.0, 0.0], &cs, 2.0);
        for v in u {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    fn three_groups(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[0.0, 0.0, 0.0], [5.0, 0.0, 1.0], [0.0, 5.0, -1.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (g, c) in centers.iter().enumerate() {
            for _ in 0..15 {
                rows.push(c.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect());
                labels.push(g);
            }
        }
        (rows, labels)
    }

    #[test]
    fn separated_groups_are_recovered() {
        let (rows, labels) = three_groups(2);
        let model = fcm_fit(&rows, &FcmConfig::default()).unwrap();
        let mut map = [usize::MAX; 3];
        for (u, &g) in model.memberships.iter().zip(&labels) {
            let k = argmax(u);
            assert!(u[k] >= 0.8, "weak membership {u:?}");
            if map[g] == usize::MAX {
                map[g] = k;
            }
            assert_eq!(map[g], k);
            assert_abs_diff_eq!(u.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
        assert!(model
            .objective
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        // frozen centroids give the same memberships for the same rows
        for (row, u) in rows.iter().zip(&model.memberships) {
            assert_eq!(&model.membership_of(row).unwrap(), u);
        }
        let k = argmax(&model.memberships[0]);
        let at_center = model.membership_of(&model.centroids[k]).unwrap();
        assert_eq!(at_center[k], 1.0);
    }

    #[test]
    fn fcm_is_deterministic_and_validates() {
        let (rows, _) = three_groups(4);
        let a = fcm_fit(&rows, &FcmConfig::default()).unwrap();
        let b = fcm_fit(&rows, &FcmConfig::default()).unwrap();
        assert_eq!(a, b);
        let bad_c = FcmConfig {
            clusters: 1,
            ..FcmConfig::default()
        };
        assert!(fcm_fit(&rows, &bad_c).is_err());
        let bad_m = FcmConfig {
            fuzzifier: 1.0,
            ..FcmConfig::default()
        };
        assert!(fcm_fit(&rows, &bad_m).is_err());
    }

    #[test]
    fn ei_examples() {
        assert_eq!(
            extraneousness_index(&[0.2, 0.5, 0.3], &[0.2, 0.5, 0.3]).unwrap(),
            0.0
        );
        assert_eq!(
            extraneousness_index(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(),
            1.0
        );
        assert_abs_diff_eq!(
            extraneousness_index(&[0.5, 0.3, 0.2], &[0.6, 0.2, 0.2]).unwrap(),
            0.1,
            epsilon = 1e-12
        );
        assert!(matches!(
            extraneousness_index(&[0.5, 0.3, 0.3], &[0.6, 0.2, 0.2]),
            Err(Error::NotNormalized(_))
        ));
    }

    fn unit_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.001f64..1.0, 3).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn ei_bounded_and_permutation_invariant(a in unit_vec(), b in unit_vec(), rot in 0usize..3) {
            let ei = extraneousness_index(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&ei));
            let pa: Vec<f64> = (0..3).map(|k| a[(k + rot) % 3]).collect();
            let pb: Vec<f64> = (0..3).map(|k| b[(k + rot) % 3]).collect();
            prop_assert!((extraneousness_index(&pa, &pb).unwrap() - ei).abs() < 1e-12);
        }
    }

    #[test]
    fn calendar_classes() {
        assert_eq!(DayClass::of_date(date("2015-09-07")), DayClass::Working); // Monday
        assert_eq!(DayClass::of_date(date("2015-09-10")), DayClass::Working); // Thursday
        assert_eq!(
            DayClass::of_date(date("2015-09-11")),
            DayClass::Entertainment
        );
        assert_eq!(
            DayClass::of_date(date("2015-09-12")),
            DayClass::Entertainment
        );
        assert_eq!(DayClass::of_date(date("2015-09-13")), DayClass::Leisure);
    }

    fn report(d: &str, ei: f64) -> AnomalyReport {
        AnomalyReport {
            date: date(d),
            ei,
            expected_class: DayClass::Working,
            expected_cluster: 0,
            memberships: vec![1.0, 0.0, 0.0],
            flagged: false,
            threshold: 0.0,
        }
    }

    #[test]
    fn detection_threshold_and_ordering() {
        let reports = vec![
            report("2015-01-03", 0.4),
            report("2015-01-01", 0.8),
            report("2015-01-02", 0.8),
            report("2015-01-04", 0.5),
        ];
        assert!(detect_unexpected(&reports, 0.9).is_empty());
        let flagged = detect_unexpected(&reports, 0.45);
        let dates: Vec<String> = flagged.iter().map(|r| r.date.to_string()).collect();
        assert_eq!(dates, ["2015-01-01", "2015-01-02", "2015-01-04"]);
        assert!(flagged.iter().all(|r| r.flagged && r.threshold == 0.45));
        // equal to the threshold, or above it by less than the resolution,
        // is not unexpected
        assert_eq!(detect_unexpected(&reports, 0.5).len(), 2);
        assert_eq!(
            detect_unexpected(&reports, 0.5 - EI_RESOLUTION / 2.0).len(),
            2
        );
    }

    #[test]
    fn cluster_naming_is_a_bijection() {
        let model = ClusterModel {
            centroids: vec![vec![0.0]; 3],
            fuzzifier: 2.0,
            memberships: vec![
                vec![0.1, 0.8, 0.1],
                vec![0.1, 0.7, 0.2],
                vec![0.9, 0.05, 0.05],
                vec![0.2, 0.6, 0.2],
                vec![0.1, 0.1, 0.8],
            ],
            objective: vec![],
        };
        let classes = [
            DayClass::Working,
            DayClass::Working,
            DayClass::Leisure,
            DayClass::Entertainment,
            DayClass::Entertainment,
        ];
        let names = name_clusters(&model, &classes);
        assert_eq!(
            names,
            vec![
                DayClass::Leisure,
                DayClass::Working,
                DayClass::Entertainment
            ]
        );
    }

    #[test]
    fn exports() {
        let reports = vec![report("2015-01-01", 0.8123)];
        let mut out = Vec::new();
        write_ei_csv(&mut out, &reports).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "date,ei,expected_class,flagged\n2015-01-01,0.8123,working,false\n"
        );
        let mut pgm = Vec::new();
        write_membership_pgm(&mut pgm, &reports, 3).unwrap();
        assert_eq!(String::from_utf8(pgm).unwrap(), "P2\n1 3\n255\n255\n0\n0\n");
    }
}
