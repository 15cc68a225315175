use std::collections::BTreeMap;
use std::io::Write;

use logchain_core::node::{TimingKind, TimingRecord};
use serde::Serialize;

/// Linear-interpolation quantile (type 7) of sorted data.
///
/// # Panics
/// If `sorted` is empty or `p` is outside `[0, 1]`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    assert!((0.0..=1.0).contains(&p), "quantile level {p} outside [0, 1]");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SixNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl SixNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KindSummary {
    pub kind: TimingKind,
    pub count: usize,
    #[serde(flatten)]
    pub stats: SixNumber,
}

/// Six-number summary per block kind present in `records`.
pub fn summarize(records: &[TimingRecord]) -> Vec<KindSummary> {
    let mut by_kind: BTreeMap<TimingKind, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_kind.entry(r.kind).or_default().push(r.seconds);
    }
    by_kind
        .into_iter()
        .filter_map(|(kind, v)| SixNumber::of(&v).map(|stats| KindSummary { kind, count: v.len(), stats }))
        .collect()
}

/// Median over all internal (non-SB) records.
pub fn internal_median(records: &[TimingRecord]) -> Option<f64> {
    let v: Vec<f64> = records.iter().filter(|r| r.kind.is_internal()).map(|r| r.seconds).collect();
    SixNumber::of(&v).map(|s| s.median)
}

/// Largest ratio between medians of internal kinds with at least
/// `min_count` records. `None` when fewer than two kinds qualify.
pub fn internal_median_ratio(summary: &[KindSummary], min_count: usize) -> Option<f64> {
    let medians: Vec<f64> =
        summary.iter().filter(|s| s.kind.is_internal() && s.count >= min_count).map(|s| s.stats.median).collect();
    if medians.len() < 2 {
        return None;
    }
    let hi = medians.iter().copied().fold(f64::MIN, f64::max);
    let lo = medians.iter().copied().fold(f64::MAX, f64::min);
    Some(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Two-sample Kolmogorov-Smirnov statistic: the largest gap between the
/// empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Large-sample critical value of the two-sample statistic at level `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

pub fn write_timings_csv(records: &[TimingRecord], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "seconds"])?;
    for r in records {
        w.write_record([r.kind.as_str(), &format!("{:.9}", r.seconds)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(summary: &[KindSummary], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "count", "min", "q1", "median", "mean", "q3", "max"])?;
    for s in summary {
        let st = s.stats;
        let mut rec = vec![s.kind.as_str().to_string(), s.count.to_string()];
        rec.extend([st.min, st.q1, st.median, st.mean, st.q3, st.max].iter().map(|x| format!("{x:.9}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(kind: TimingKind, seconds: f64) -> TimingRecord {
        TimingRecord { kind, seconds }
    }

    #[test]
    fn constant_durations() {
        let s = SixNumber::of(&[0.25; 7]).unwrap();
        assert_eq!(s, SixNumber { min: 0.25, q1: 0.25, median: 0.25, mean: 0.25, q3: 0.25, max: 0.25 });
    }

    #[test]
    fn one_to_four() {
        let s = SixNumber::of(&[4.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        assert_eq!((s.min, s.max), (1.0, 4.0));
        assert!(SixNumber::of(&[]).is_none());
    }

    #[test]
    fn per_kind_tables() {
        use TimingKind::*;
        let records = [rec(Db, 1.0), rec(Db, 3.0), rec(Tb, 2.0), rec(Sb, 20.0), rec(Agb, 0.5)];
        let s = summarize(&records);
        let kinds: Vec<_> = s.iter().map(|k| (k.kind, k.count)).collect();
        assert_eq!(kinds, [(Agb, 1), (Db, 2), (Tb, 1), (Sb, 1)]);
        assert_eq!(internal_median(&records), Some(1.5));
        assert_eq!(internal_median_ratio(&s, 1), Some(4.0));
        assert_eq!(internal_median_ratio(&s, 2), None);

        let mut out = Vec::new();
        write_summary_csv(&s, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("kind,count,min,q1,median,mean,q3,max\nAGB,1,"));
        let mut out = Vec::new();
        write_timings_csv(&records, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 6);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[2.5, 3.5]) - 0.5).abs() < 1e-12);
        // Tabulated c(0.01) = 1.628.
        assert!((ks_critical(100, 100, 0.01) - 1.628 * 0.02f64.sqrt()).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn six_numbers_are_ordered(v in proptest::collection::vec(0.0f64..1e3, 1..200)) {
            let s = SixNumber::of(&v).unwrap();
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            prop_assert!(s.min <= s.mean + 1e-9 && s.mean <= s.max + 1e-9);
        }
    }
}
