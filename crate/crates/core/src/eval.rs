//! Frame accuracies, confusion matrices and result tables.
//!
//! Accuracies are computed over all labeled frames pooled together (not
//! averaged per song). Reported percentages are rounded half-up to two
//! decimals in exact integer arithmetic.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dsp::FeatureKind;
use crate::error::{Error, Result};
use crate::labeling::{class_to_category, FrameLabelSequence, MASKED, NUM_CLASSES};
use crate::score::DynamicCategory;

pub type Confusion = [[u64; NUM_CLASSES]; NUM_CLASSES];

pub const AVERAGING: &str = "global_frames";

fn check_lengths(predictions: &[u8], labels: &FrameLabelSequence) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch(predictions.len(), labels.len()));
    }
    Ok(())
}

/// Labeled frames and those with `|pred - label| <= tolerance`.
fn counts(predictions: &[u8], labels: &FrameLabelSequence, tolerance: u8) -> Result<(u64, u64)> {
    if tolerance > 2 {
        return Err(Error::BadTolerance(tolerance));
    }
    check_lengths(predictions, labels)?;
    let (mut total, mut hits) = (0u64, 0u64);
    for (&p, &l) in predictions.iter().zip(&labels.classes) {
        if l == MASKED {
            continue;
        }
        total += 1;
        if (p as i16 - l as i16).unsigned_abs() <= tolerance as u16 {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::AllMasked);
    }
    Ok((hits, total))
}

/// Percentage of labeled frames predicted within `tolerance` (0, 1 or 2) classes.
pub fn relaxed_accuracy(predictions: &[u8], labels: &FrameLabelSequence, tolerance: u8) -> Result<f64> {
    let (hits, total) = counts(predictions, labels, tolerance)?;
    Ok(100.0 * hits as f64 / total as f64)
}

/// Cell `(i, j)` counts labeled frames with label `i` and prediction `j`.
pub fn confusion_matrix(predictions: &[u8], labels: &FrameLabelSequence) -> Result<Confusion> {
    check_lengths(predictions, labels)?;
    let mut m = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    let mut any = false;
    for (&p, &l) in predictions.iter().zip(&labels.classes) {
        if l == MASKED {
            continue;
        }
        if p as usize >= NUM_CLASSES || l as usize >= NUM_CLASSES {
            return Err(Error::InvalidConfig(format!("class out of range: label {l}, prediction {p}")));
        }
        m[l as usize][p as usize] += 1;
        any = true;
    }
    if !any {
        return Err(Error::AllMasked);
    }
    Ok(m)
}

/// `100 * hits / total` in hundredths, rounded half-up.
pub fn percent_hundredths(hits: u64, total: u64) -> u64 {
    (20_000 * hits + total) / (2 * total)
}

pub fn format_hundredths(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub feature: FeatureKind,
    pub sequence_length: usize,
    pub hop_seconds: f64,
}

impl RunConfig {
    /// Hop in tenths of a millisecond, the resolution used for grouping and display.
    fn resolution_key(&self) -> u64 {
        num_traits::Float::round(self.hop_seconds * 10_000.0) as u64
    }

    fn feature_rank(&self) -> u8 {
        match self.feature {
            FeatureKind::LogMel => 0,
            FeatureKind::BarkLoudness => 1,
            FeatureKind::Chroma => 2,
        }
    }

    fn sort_key(&self) -> (u8, usize, u64) {
        (self.feature_rank(), self.sequence_length, self.resolution_key())
    }

    pub fn feature_label(&self) -> &'static str {
        match self.feature {
            FeatureKind::LogMel => "log-Mel",
            FeatureKind::BarkLoudness => "Bark",
            FeatureKind::Chroma => "chroma",
        }
    }

    /// `17.4 ms`, `30 ms`.
    pub fn resolution_label(&self) -> String {
        let tenths = self.resolution_key();
        if tenths.is_multiple_of(10) {
            format!("{} ms", tenths / 10)
        } else {
            format!("{}.{} ms", tenths / 10, tenths % 10)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub acc_pm1: f64,
    pub acc_pm2: f64,
    pub confusion: Confusion,
    pub masked_frame_count: u64,
    pub config: RunConfig,
    pub averaging: String,
}

impl EvalReport {
    /// Pools any number of (predictions, labels) pairs into one report.
    pub fn from_runs<'a>(
        config: RunConfig,
        runs: impl IntoIterator<Item = (&'a [u8], &'a FrameLabelSequence)>,
    ) -> Result<Self> {
        let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for (pred, labels) in runs {
            match confusion_matrix(pred, labels) {
                Ok(m) => {
                    for i in 0..NUM_CLASSES {
                        for j in 0..NUM_CLASSES {
                            confusion[i][j] += m[i][j];
                        }
                    }
                }
                Err(Error::AllMasked) => {}
                Err(e) => return Err(e),
            }
        }
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::AllMasked);
        }
        let within = |t: usize| -> u64 {
            let mut s = 0;
            for (i, row) in confusion.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    if i.abs_diff(j) <= t {
                        s += c;
                    }
                }
            }
            s
        };
        let pct = |h: u64| 100.0 * h as f64 / total as f64;
        Ok(EvalReport {
            acc: pct(within(0)),
            acc_pm1: pct(within(1)),
            acc_pm2: pct(within(2)),
            confusion,
            masked_frame_count: total,
            config,
            averaging: AVERAGING.into(),
        })
    }

    pub fn hits(&self, tolerance: usize) -> u64 {
        let mut s = 0;
        for (i, row) in self.confusion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if i.abs_diff(j) <= tolerance {
                    s += c;
                }
            }
        }
        s
    }

    /// Rounded percentage for tolerance 0, 1 or 2, e.g. `"60.71"`.
    pub fn formatted(&self, tolerance: usize) -> String {
        format_hundredths(percent_hundredths(self.hits(tolerance), self.masked_frame_count))
    }
}

/// One table row per (feature, sequence length, resolution), sorted log-Mel
/// before Bark, then by sequence length and resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<EvalReport>,
}

pub const REPORT_HEADER: [&str; 6] =
    ["Seq Length", "Temporal Resolution", "Perceptual Feature", "Acc", "Acc(±1)", "Acc(±2)"];

impl ReportTable {
    pub fn cells(&self) -> Vec<[String; 6]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    format!("{}", r.config.sequence_length),
                    r.config.resolution_label(),
                    r.config.feature_label().into(),
                    r.formatted(0),
                    r.formatted(1),
                    r.formatted(2),
                ]
            })
            .collect()
    }

    /// Plain-text table: text columns left-aligned, numbers right-aligned,
    /// two spaces between columns, `\n` line endings.
    pub fn render_text(&self) -> String {
        let cells = self.cells();
        let mut widths = REPORT_HEADER.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let mut line = |fields: [&str; 6]| {
            let mut s = String::new();
            for (k, f) in fields.iter().enumerate() {
                let pad = widths[k] - f.chars().count();
                if k > 0 {
                    s.push_str("  ");
                }
                if k < 3 {
                    s.push_str(f);
                    s.extend(core::iter::repeat_n(' ', pad));
                } else {
                    s.extend(core::iter::repeat_n(' ', pad));
                    s.push_str(f);
                }
            }
            let _ = writeln!(out, "{}", s.trim_end());
        };
        line(REPORT_HEADER);
        for row in &cells {
            line([&row[0], &row[1], &row[2], &row[3], &row[4], &row[5]]);
        }
        out
    }
}

/// Groups runs by configuration and pools frames within each group.
pub fn build_report(runs: &[(Vec<u8>, FrameLabelSequence, RunConfig)]) -> Result<ReportTable> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("runs"));
    }
    let mut groups: BTreeMap<(u8, usize, u64), Vec<usize>> = BTreeMap::new();
    for (i, (_, _, cfg)) in runs.iter().enumerate() {
        groups.entry(cfg.sort_key()).or_default().push(i);
    }
    let rows = groups
        .values()
        .map(|idx| {
            let cfg = runs[idx[0]].2;
            EvalReport::from_runs(cfg, idx.iter().map(|&i| (runs[i].0.as_slice(), &runs[i].1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportTable { rows })
}

/// Labeled seconds per absolute category across label files.
pub fn duration_statistics(files: &[FrameLabelSequence]) -> BTreeMap<DynamicCategory, f64> {
    let mut seconds = [0.0f64; NUM_CLASSES];
    for f in files {
        let mut per_class = [0u64; NUM_CLASSES];
        for &c in &f.classes {
            if (c as usize) < NUM_CLASSES {
                per_class[c as usize] += 1;
            }
        }
        for (s, &n) in seconds.iter_mut().zip(&per_class) {
            *s += n as f64 * f.hop_seconds;
        }
    }
    (0..NUM_CLASSES)
        .map(|c| (class_to_category(c as u8).expect("class index below 10"), seconds[c]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn seq(classes: Vec<u8>) -> FrameLabelSequence {
        FrameLabelSequence { classes, hop_seconds: 0.02 }
    }

    #[test]
    fn identity_is_perfect() {
        let l = seq(vec![0, 3, 9, MASKED, 5]);
        for t in 0..=2 {
            assert_eq!(relaxed_accuracy(&[0, 3, 9, 1, 5], &l, t).unwrap(), 100.0);
        }
    }

    #[test]
    fn hand_count() {
        let l = seq(vec![3, 3, 4]);
        let p = [4, 2, 4];
        assert_eq!(format_hundredths(percent_hundredths(1, 3)), "33.33");
        assert!((relaxed_accuracy(&p, &l, 0).unwrap() - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(relaxed_accuracy(&p, &l, 1).unwrap(), 100.0);
    }

    #[test]
    fn errors() {
        assert_eq!(relaxed_accuracy(&[1], &seq(vec![MASKED]), 0), Err(Error::AllMasked));
        assert_eq!(relaxed_accuracy(&[1], &seq(vec![1]), 3), Err(Error::BadTolerance(3)));
        assert_eq!(relaxed_accuracy(&[1, 2], &seq(vec![1]), 0), Err(Error::LengthMismatch(2, 1)));
        assert_eq!(confusion_matrix(&[1], &seq(vec![MASKED])), Err(Error::AllMasked));
    }

    #[test]
    fn confusion_cells() {
        let m = confusion_matrix(&[6], &seq(vec![3])).unwrap();
        assert_eq!(m[3][6], 1);
        assert_eq!(m.iter().flatten().sum::<u64>(), 1);
        let m = confusion_matrix(&[0, 1, 2], &seq(vec![0, 1, 2])).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(m[i][j], u64::from(i == j && i < 3));
            }
        }
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_hundredths(percent_hundredths(1, 8)), "12.50");
        assert_eq!(format_hundredths(percent_hundredths(1, 80000)), "0.00");
        assert_eq!(format_hundredths(percent_hundredths(1, 40000)), "0.00");
        // 0.625 % is an exact tie and rounds up
        assert_eq!(format_hundredths(percent_hundredths(1, 160)), "0.63");
        assert_eq!(format_hundredths(percent_hundredths(1, 3)), "33.33");
        assert_eq!(format_hundredths(percent_hundredths(2, 3)), "66.67");
        assert_eq!(format_hundredths(percent_hundredths(2096, 10000)), "20.96");
        assert_eq!(format_hundredths(percent_hundredths(1, 1)), "100.00");
        assert_eq!(format_hundredths(percent_hundredths(1, 2000)), "0.05");
    }

    #[test]
    fn durations() {
        assert!(duration_statistics(&[]).values().all(|&v| v == 0.0));
        let stats = duration_statistics(&[seq(vec![3; 100])]);
        assert!((stats[&DynamicCategory::P] - 2.0).abs() < 1e-12);
        assert_eq!(stats.len(), 10);
    }

    #[test]
    fn report_ordering() {
        let l = seq(vec![3, 4]);
        let bark = RunConfig { feature: FeatureKind::BarkLoudness, sequence_length: 4096, hop_seconds: 0.016 };
        let mel = RunConfig { feature: FeatureKind::LogMel, sequence_length: 4096, hop_seconds: 0.0174 };
        let t = build_report(&[(vec![3, 4], l.clone(), bark), (vec![3, 3], l, mel)]).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].config.feature, FeatureKind::LogMel);
        assert_eq!(t.cells()[0][1], "17.4 ms");
        assert_eq!(t.cells()[1][1], "16 ms");
    }
}
