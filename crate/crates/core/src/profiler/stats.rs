use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} actuals",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput("rmse vectors"));
    }
    let sse: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).powi(2))
        .sum();
    Ok((sse / predicted.len() as f64).sqrt())
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewRows {
            need: 2,
            got: xs.len(),
        });
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Column-wise z-scores. Constant columns are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScored {
    /// Rows of the normalized matrix, kept columns only.
    pub rows: Vec<Vec<f64>>,
    /// Original indices of the kept columns.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

pub fn zscore(matrix: &[Vec<f64>]) -> Result<ZScored> {
    if matrix.len() < 2 {
        return Err(Error::TooFewRows {
            need: 2,
            got: matrix.len(),
        });
    }
    let width = matrix[0].len();
    if let Some(bad) = matrix.iter().position(|r| r.len() != width) {
        return Err(Error::DimensionMismatch(format!(
            "row {bad} has {} columns, expected {width}",
            matrix[bad].len()
        )));
    }
    let mut out = ZScored {
        rows: vec![Vec::new(); matrix.len()],
        kept: Vec::new(),
        dropped: Vec::new(),
        means: Vec::new(),
        stds: Vec::new(),
    };
    for j in 0..width {
        let col: Vec<f64> = matrix.iter().map(|r| r[j]).collect();
        let m = mean(&col);
        let s = population_std(&col);
        if s <= 1e-12 * m.abs().max(1.0) {
            out.dropped.push(j);
            continue;
        }
        out.kept.push(j);
        out.means.push(m);
        out.stds.push(s);
        for (row, x) in out.rows.iter_mut().zip(&col) {
            row.push((x - m) / s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zscore_one_two_three() {
        let z = zscore(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let col: Vec<f64> = z.rows.iter().map(|r| r[0]).collect();
        let expected = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        for (a, b) in col.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((z.stds[0] - 0.816_496_580_927_726).abs() < 1e-12);
    }

    #[test]
    fn zscore_drops_constant_columns() {
        let z = zscore(&[vec![0.1, 5.0], vec![0.1, 6.0], vec![0.1, 9.0]]).unwrap();
        assert_eq!(z.dropped, [0]);
        assert_eq!(z.kept, [1]);
        assert!(zscore(&[vec![1.0]]).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0];
        assert!((pearson(&xs, &xs).unwrap().unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap().unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &[1.0, 3.0, 2.0]).unwrap().unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(pearson(&xs, &[2.0, 2.0, 2.0]).unwrap(), None);
    }
}
