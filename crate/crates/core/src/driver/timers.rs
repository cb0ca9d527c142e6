use std::fmt::Write as _;
use std::time::{Duration, Instant};

/// Wall-clock accumulators for the loop stages. `push_comm` is part of
/// `push` and `phibc` is part of `field_solve`.
#[derive(Clone, Copy, Debug, Default)]
pub struct StageTimers {
    pub gather: Duration,
    pub push: Duration,
    pub push_comm: Duration,
    pub scatter: Duration,
    pub field_solve: Duration,
    pub phibc: Duration,
    pub other: Duration,
}

pub fn timed<R>(acc: &mut Duration, f: impl FnOnce() -> R) -> R {
    let t = Instant::now();
    let r = f();
    *acc += t.elapsed();
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimerRow {
    pub category: &'static str,
    pub seconds: f64,
    pub percent: f64,
    /// Category whose time already contains this one.
    pub included_in: Option<&'static str>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimerReport {
    pub rows: Vec<TimerRow>,
    pub total_seconds: f64,
}

impl TimerReport {
    pub fn new(t: &StageTimers, total: Duration) -> Self {
        let total_seconds = total.as_secs_f64();
        let pct = |s: f64| {
            if total_seconds > 0.0 {
                100.0 * s / total_seconds
            } else {
                0.0
            }
        };
        let row = |category, d: Duration, included_in| {
            let seconds = d.as_secs_f64();
            TimerRow {
                category,
                seconds,
                percent: pct(seconds),
                included_in,
            }
        };
        TimerReport {
            rows: vec![
                row("gather", t.gather, None),
                row("particle-push", t.push, None),
                row("particle-push-comm", t.push_comm, Some("particle-push")),
                row("scatter", t.scatter, None),
                row("field-solve", t.field_solve, None),
                row("field-solve-phibc", t.phibc, Some("field-solve")),
                row("other", t.other, None),
            ],
            total_seconds,
        }
    }

    /// Fraction of the total covered by the top-level categories.
    pub fn coverage(&self) -> f64 {
        let s: f64 = self
            .rows
            .iter()
            .filter(|r| r.included_in.is_none())
            .map(|r| r.seconds)
            .sum();
        if self.total_seconds > 0.0 {
            s / self.total_seconds
        } else {
            1.0
        }
    }

    pub fn seconds(&self, category: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.category == category)
            .map(|r| r.seconds)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("category,seconds,percent,included_in\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.6},{:.4},{}",
                r.category,
                r.seconds,
                r.percent,
                r.included_in.unwrap_or("")
            );
        }
        let _ = writeln!(s, "total,{:.6},100.0000,", self.total_seconds);
        s
    }

    pub fn to_table(&self) -> String {
        let mut marks = Vec::new();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<22} {:>14} {:>14}",
            "Category", "Time (s)", "Percentage (%)"
        );
        let _ = writeln!(s, "{}", "-".repeat(52));
        for r in &self.rows {
            let name = match r.included_in {
                Some(parent) => {
                    marks.push((r.category, parent));
                    format!("{}{}", r.category, "*".repeat(marks.len()))
                }
                None => r.category.to_string(),
            };
            let _ = writeln!(s, "{:<22} {:>14.2} {:>14.2}", name, r.seconds, r.percent);
        }
        let _ = writeln!(s, "{}", "-".repeat(52));
        let _ = writeln!(
            s,
            "{:<22} {:>14.2} {:>14.2}",
            "total", self.total_seconds, 100.0
        );
        for (i, (_, parent)) in marks.iter().enumerate() {
            let _ = writeln!(s, "{} Included in the `{parent}' time.", "*".repeat(i + 1));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nesting_and_coverage() {
        let t = StageTimers {
            gather: Duration::from_secs(1),
            push: Duration::from_secs(4),
            push_comm: Duration::from_secs(1),
            scatter: Duration::from_secs(1),
            field_solve: Duration::from_secs(3),
            phibc: Duration::from_secs(1),
            other: Duration::from_secs(1),
        };
        let r = TimerReport::new(&t, Duration::from_secs(10));
        assert!((r.coverage() - 1.0).abs() < 1e-12);
        assert!((r.rows[1].percent - 40.0).abs() < 1e-12);
        let text = r.to_table();
        assert!(text.contains("particle-push-comm*"));
        assert!(text.contains("field-solve-phibc**"));
        assert!(text.contains("* Included in the `particle-push' time."));
        assert!(text.contains("** Included in the `field-solve' time."));
        assert_eq!(r.to_csv().lines().count(), 9);
    }
}
