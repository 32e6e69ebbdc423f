use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

use super::dataset::{QualityMetric, QualityRecord, TaskProfile, HEURISTICS};
use super::regression::{fit_lift_model, loo_rmse, LiftModel};
use super::stats::pearson;

/// Pearson correlations, heuristics × quality metrics. `None` where a
/// column has zero variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub heuristics: Vec<String>,
    pub metrics: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, heuristic: &str, metric: QualityMetric) -> Option<f64> {
        let i = self.heuristics.iter().position(|h| h == heuristic)?;
        let j = self.metrics.iter().position(|m| m == metric.name())?;
        self.values[i][j]
    }
}

/// Pairs each profile with its quality record, in profile order.
fn align<'a>(
    profiles: &'a [TaskProfile],
    quality: &'a [QualityRecord],
) -> Result<Vec<(&'a TaskProfile, &'a QualityRecord)>> {
    let by_name: BTreeMap<&str, &QualityRecord> =
        quality.iter().map(|q| (q.name.as_str(), q)).collect();
    if by_name.len() != quality.len() {
        return Err(Error::NameMismatch(
            "duplicate task in quality records".into(),
        ));
    }
    if profiles.len() != quality.len() {
        return Err(Error::NameMismatch(format!(
            "{} profiles but {} quality records",
            profiles.len(),
            quality.len()
        )));
    }
    profiles
        .iter()
        .map(|p| {
            by_name
                .get(p.name.as_str())
                .map(|q| (p, *q))
                .ok_or_else(|| Error::NameMismatch(format!("no quality record for {}", p.name)))
        })
        .collect()
}

pub fn correlation_report(
    profiles: &[TaskProfile],
    quality: &[QualityRecord],
) -> Result<CorrelationMatrix> {
    let pairs = align(profiles, quality)?;
    let features: Vec<[f64; 14]> = pairs.iter().map(|(p, _)| p.features()).collect();
    let mut values = Vec::with_capacity(HEURISTICS.len());
    for h in 0..HEURISTICS.len() {
        let xs: Vec<f64> = features.iter().map(|f| f[h]).collect();
        let row = QualityMetric::ALL
            .iter()
            .map(|&m| {
                let ys: Vec<f64> = pairs.iter().map(|(_, q)| q.get(m)).collect();
                pearson(&xs, &ys)
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    Ok(CorrelationMatrix {
        heuristics: HEURISTICS.iter().map(|s| s.to_string()).collect(),
        metrics: QualityMetric::ALL
            .iter()
            .map(|m| m.name().to_owned())
            .collect(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmseMode {
    InSample,
    LeaveOneOut,
}

/// One target's fit, with and without the average base score as an extra feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftRow {
    pub target: String,
    pub rmse_without: f64,
    /// `None` when the target is the average base score itself.
    pub rmse_with_base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loo_without: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loo_with_base: Option<f64>,
    pub model: LiftModel,
}

pub fn lift_table(
    profiles: &[TaskProfile],
    quality: &[QualityRecord],
    mode: RmseMode,
) -> Result<Vec<LiftRow>> {
    let pairs = align(profiles, quality)?;
    let names: Vec<String> = HEURISTICS.iter().map(|s| s.to_string()).collect();
    let raw: Vec<Vec<f64>> = pairs.iter().map(|(p, _)| p.features().to_vec()).collect();

    let mut names_base = names.clone();
    names_base.push(QualityMetric::AvgBaseScore.name().to_owned());
    let raw_base: Vec<Vec<f64>> = raw
        .iter()
        .zip(&pairs)
        .map(|(r, (_, q))| {
            let mut r = r.clone();
            r.push(q.avg_base_score);
            r
        })
        .collect();

    let mut rows = Vec::with_capacity(QualityMetric::ALL.len());
    for metric in QualityMetric::ALL {
        let y: Vec<f64> = pairs.iter().map(|(_, q)| q.get(metric)).collect();
        let model = fit_lift_model(&names, &raw, &y, metric.name())?;
        let with_base = metric != QualityMetric::AvgBaseScore;
        let rmse_with_base = if with_base {
            Some(fit_lift_model(&names_base, &raw_base, &y, metric.name())?.train_rmse)
        } else {
            None
        };
        let (loo_without, loo_with_base) = match mode {
            RmseMode::InSample => (None, None),
            RmseMode::LeaveOneOut => (
                Some(loo_rmse(&names, &raw, &y)?),
                if with_base {
                    Some(loo_rmse(&names_base, &raw_base, &y)?)
                } else {
                    None
                },
            ),
        };
        rows.push(LiftRow {
            target: metric.name().to_owned(),
            rmse_without: model.train_rmse,
            rmse_with_base,
            loo_without,
            loo_with_base,
            model,
        });
    }
    Ok(rows)
}
