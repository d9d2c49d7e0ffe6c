use cascadeflow_core::calibration::{expected_cost, FixedHistogram};
use cascadeflow_core::Target;
use serde::{Deserialize, Serialize};

/// Point-in-time view of the gateway's counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub total: u64,
    pub student_count: u64,
    pub teacher_count: u64,
    pub degraded_count: u64,
    pub student_fraction: f64,
    pub mean_student_latency_ms: f64,
    pub mean_total_latency_ms: f64,
    pub estimated_cost: f64,
    pub score_histogram: FixedHistogram,
}

/// Counters behind one lock so every snapshot is internally consistent.
#[derive(Debug, Clone)]
pub(crate) struct StatsAccumulator {
    student_count: u64,
    teacher_count: u64,
    degraded_count: u64,
    student_latency_sum: f64,
    total_latency_sum: f64,
    histogram: FixedHistogram,
}

impl StatsAccumulator {
    pub fn new(histogram: FixedHistogram) -> Self {
        Self {
            student_count: 0,
            teacher_count: 0,
            degraded_count: 0,
            student_latency_sum: 0.0,
            total_latency_sum: 0.0,
            histogram,
        }
    }

    pub fn record(
        &mut self,
        target: Target,
        degraded: bool,
        score: f64,
        student_ms: f64,
        total_ms: f64,
    ) {
        match target {
            Target::Student => self.student_count += 1,
            Target::Teacher => self.teacher_count += 1,
        }
        self.degraded_count += degraded as u64;
        self.student_latency_sum += student_ms;
        self.total_latency_sum += total_ms;
        self.histogram.record(score);
    }

    pub fn reset(&mut self) {
        let mut histogram = self.histogram.clone();
        histogram.reset();
        *self = Self::new(histogram);
    }

    pub fn snapshot(&self, student_cost: f64, teacher_cost: f64) -> RuntimeStats {
        let total = self.student_count + self.teacher_count;
        let per = |sum: f64| if total == 0 { 0.0 } else { sum / total as f64 };
        RuntimeStats {
            total,
            student_count: self.student_count,
            teacher_count: self.teacher_count,
            degraded_count: self.degraded_count,
            student_fraction: per(self.student_count as f64),
            mean_student_latency_ms: per(self.student_latency_sum),
            mean_total_latency_ms: per(self.total_latency_sum),
            estimated_cost: expected_cost(
                self.student_count,
                self.teacher_count,
                student_cost,
                teacher_cost,
            )
            .unwrap_or(0.0),
            score_histogram: self.histogram.clone(),
        }
    }
}
