use alloc::vec::Vec;

use super::Match;
use crate::math::ceil;

/// Robust down-weighting of far matches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutlierFilter {
    /// Keep the fraction `ratio` of matches with the smallest distance.
    Trimmed { ratio: f64 },
    /// `w = 1 / (1 + d² / scale²)`.
    Cauchy { scale: f64 },
    None,
}

impl Default for OutlierFilter {
    fn default() -> Self {
        OutlierFilter::Trimmed { ratio: 0.85 }
    }
}

impl OutlierFilter {
    pub fn is_valid(&self) -> bool {
        match *self {
            OutlierFilter::Trimmed { ratio } => ratio > 0.0 && ratio <= 1.0,
            OutlierFilter::Cauchy { scale } => scale > 0.0 && scale.is_finite(),
            OutlierFilter::None => true,
        }
    }
}

/// One weight per match, in match order.
///
/// Trimming ranks by squared distance; equal distances keep match order.
pub fn weight_outliers(matches: &[Match], filter: &OutlierFilter) -> Vec<f64> {
    match *filter {
        OutlierFilter::None => alloc::vec![1.0; matches.len()],
        OutlierFilter::Cauchy { scale } => {
            let inv = 1.0 / (scale * scale);
            matches
                .iter()
                .map(|m| 1.0 / (1.0 + m.squared_distance * inv))
                .collect()
        }
        OutlierFilter::Trimmed { ratio } => {
            let n = matches.len();
            let keep = (ceil(ratio * n as f64 - 1e-9) as usize).clamp(1.min(n), n);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                matches[a]
                    .squared_distance
                    .total_cmp(&matches[b].squared_distance)
                    .then(a.cmp(&b))
            });
            let mut w = alloc::vec![0.0; n];
            for &i in &order[..keep] {
                w[i] = 1.0;
            }
            w
        }
    }
}
