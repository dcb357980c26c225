use super::features::FeatureMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// L2 penalty on the standardized coefficients (the intercept is free).
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop when the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Keep columns whose share of total absolute weight exceeds this.
    pub threshold: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            l2: 1e-2,
            max_epochs: 3000,
            grad_tol: 1e-6,
            threshold: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Per column: name, standardized coefficient and normalized importance.
    pub importances: Vec<(String, f64, f64)>,
    pub kept: Vec<String>,
    pub converged: bool,
    pub epochs: usize,
}

fn standardize(x: &FeatureMatrix) -> Vec<Vec<f64>> {
    x.columns
        .iter()
        .map(|c| {
            let n = c.len() as f64;
            let mean = c.iter().sum::<f64>() / n;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 1e-12 * mean.abs().max(1.0) {
                c.iter().map(|v| (v - mean) / sd).collect()
            } else {
                vec![0.0; c.len()]
            }
        })
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gradient of the penalized mean log-likelihood at `(b, w)`.
fn gradient(z: &[Vec<f64>], y: &[bool], b: f64, w: &[f64], l2: f64, margin: &mut [f64]) -> (f64, Vec<f64>) {
    let n = y.len();
    margin.iter_mut().for_each(|m| *m = b);
    for (col, &wj) in z.iter().zip(w) {
        if wj != 0.0 {
            for (m, &v) in margin.iter_mut().zip(col) {
                *m += wj * v;
            }
        }
    }
    // residual y - p
    for (m, &yi) in margin.iter_mut().zip(y) {
        *m = yi as u8 as f64 - sigmoid(*m);
    }
    let gb = margin.iter().sum::<f64>() / n as f64;
    let gw = z
        .iter()
        .zip(w)
        .map(|(col, &wj)| col.iter().zip(margin.iter()).map(|(v, r)| v * r).sum::<f64>() / n as f64 - l2 * wj)
        .collect();
    (gb, gw)
}

/// Fits an L2-regularized logistic regression on standardized columns by
/// accelerated gradient ascent and keeps the columns carrying more than
/// `threshold` of the total absolute coefficient weight.
pub fn select_features(x: &FeatureMatrix, y: &[bool], cfg: &SelectionConfig) -> SelectionReport {
    let z = standardize(x);
    let p = z.len();
    // Lipschitz bound of the gradient for unit-variance columns
    let step = 1.0 / (0.25 * (p as f64 + 1.0) + cfg.l2);
    let mut b = 0.0;
    let mut w = vec![0.0; p];
    let (mut b_prev, mut w_prev) = (b, w.clone());
    let mut margin = vec![0.0; y.len()];
    let mut converged = false;
    let mut epochs = 0;
    for k in 0..cfg.max_epochs {
        epochs = k + 1;
        let mom = k as f64 / (k as f64 + 3.0);
        let vb = b + mom * (b - b_prev);
        let vw: Vec<f64> = w.iter().zip(&w_prev).map(|(a, c)| a + mom * (a - c)).collect();
        let (gb, gw) = gradient(&z, y, vb, &vw, cfg.l2, &mut margin);
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        b_prev = b;
        w_prev = std::mem::take(&mut w);
        b = vb + step * gb;
        w = vw.iter().zip(&gw).map(|(v, g)| v + step * g).collect();
        if gmax < cfg.grad_tol {
            converged = true;
            break;
        }
    }
    let total: f64 = w.iter().map(|v| v.abs()).sum();
    let importances: Vec<(String, f64, f64)> = x
        .names
        .iter()
        .zip(&w)
        .map(|(n, &c)| (n.clone(), c, if total > 0.0 { c.abs() / total } else { 0.0 }))
        .collect();
    let kept = importances
        .iter()
        .filter(|(_, _, imp)| *imp > cfg.threshold)
        .map(|(n, _, _)| n.clone())
        .collect();
    SelectionReport {
        importances,
        kept,
        converged,
        epochs,
    }
}

pub fn write_importances(report: &SelectionReport, out: impl std::io::Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "coefficient", "importance", "kept"])?;
    for (name, coef, imp) in &report.importances {
        let kept = report.kept.contains(name);
        w.write_record([name.clone(), format!("{coef:.9}"), format!("{imp:.9}"), kept.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted(n: usize, seed: u64) -> (FeatureMatrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signal: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<bool> = signal.iter().map(|&s| s > 0.1).collect();
        let mut columns = vec![signal];
        for _ in 0..6 {
            columns.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
        columns.push(vec![3.0; n]);
        let names = (0..columns.len()).map(|i| format!("c{i}")).collect();
        (FeatureMatrix { names, columns, n_rows: n }, y)
    }

    #[test]
    fn planted_signal_is_kept() {
        let (x, y) = planted(2000, 4);
        let r = select_features(&x, &y, &SelectionConfig::default());
        assert!(r.kept.contains(&"c0".to_string()));
        let top = r.importances.iter().max_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
        assert_eq!(top.0, "c0");
        let constant = r.importances.iter().find(|e| e.0 == "c7").unwrap();
        assert_eq!(constant.2, 0.0);
        assert!(!r.kept.contains(&"c7".to_string()));
        let sum: f64 = r.importances.iter().map(|e| e.2).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_rescaling_does_not_change_importances() {
        let (x, y) = planted(800, 9);
        let mut scaled = x.clone();
        for v in scaled.columns[2].iter_mut() {
            *v = 40.0 * *v - 7.0;
        }
        let cfg = SelectionConfig::default();
        let a = select_features(&x, &y, &cfg);
        let b = select_features(&scaled, &y, &cfg);
        for (p, q) in a.importances.iter().zip(&b.importances) {
            assert!((p.2 - q.2).abs() < 1e-9);
        }
        assert_eq!(a.kept, b.kept);
    }
}
