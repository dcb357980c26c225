use crate::data::{CaseConfig, SeriesFrame};
use serde::{Deserialize, Serialize};

pub const BASE_FEATURES: [&str; 5] = ["D", "F", "VRE", "VRE-D", "Crit"];

/// Column-major feature table; one row per hour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub n_rows: usize,
}

/// Column name of base feature `base` shifted by `offset` hours; `D[+1]` at
/// hour h holds D at hour h+1.
pub fn feature_name(base: &str, offset: i64) -> String {
    if offset == 0 {
        format!("{base}[0]")
    } else {
        format!("{base}[{offset:+}]")
    }
}

impl FeatureMatrix {
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    /// Keeps the named columns in the given order.
    pub fn select(&self, names: &[String]) -> Option<FeatureMatrix> {
        let columns = names
            .iter()
            .map(|n| self.column(n).map(<[f64]>::to_vec))
            .collect::<Option<Vec<_>>>()?;
        Some(FeatureMatrix {
            names: names.to_vec(),
            columns,
            n_rows: self.n_rows,
        })
    }

    pub fn rows(&self, range: std::ops::Range<usize>) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
            n_rows: range.len(),
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }
}

/// Base features per hour with lead and lag copies for offsets
/// `-max_lag..=max_lag`; edges repeat the boundary value.
pub fn build_features(frame: &SeriesFrame, case: &CaseConfig, max_lag: usize) -> FeatureMatrix {
    let n = frame.horizon_len();
    let d = &frame.demand;
    let f: Vec<f64> = (0..n).map(|h| frame.capacity_factor.iter().map(|cf| cf[h]).sum()).collect();
    let vre: Vec<f64> = (0..n).map(|h| frame.vre_potential(h, case)).collect();
    let ratio: Vec<f64> = (0..n).map(|h| if d[h] > 0.0 { vre[h] / d[h] } else { 0.0 }).collect();
    let crit: Vec<f64> = (0..n)
        .map(|h| {
            let cap = vre[h] + case.thermal_capacity;
            if cap > 0.0 {
                d[h] / cap
            } else {
                0.0
            }
        })
        .collect();
    let bases = [d.clone(), f, vre, ratio, crit];

    let lag = max_lag as i64;
    let mut names = Vec::with_capacity(bases.len() * (2 * max_lag + 1));
    let mut columns = Vec::with_capacity(names.capacity());
    for (name, base) in BASE_FEATURES.iter().zip(&bases) {
        for off in -lag..=lag {
            names.push(feature_name(name, off));
            columns.push(
                (0..n as i64)
                    .map(|h| base[(h + off).clamp(0, n as i64 - 1) as usize])
                    .collect(),
            );
        }
    }
    FeatureMatrix { names, columns, n_rows: n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CasePreset;

    #[test]
    fn base_formulas_and_shape() {
        let case = CasePreset::BessSolar.config();
        let frame = SeriesFrame::new(vec![500.0, 0.0, 300.0], vec!["solar".into()], vec![vec![0.5, 0.2, 0.0]]).unwrap();
        let x = build_features(&frame, &case, 10);
        assert_eq!(x.n_cols(), 105);
        assert_eq!(x.column("VRE[0]").unwrap()[0], 500.0);
        assert_eq!(x.column("VRE-D[0]").unwrap()[0], 1.0);
        assert!((x.column("Crit[0]").unwrap()[0] - 500.0 / 980.0).abs() < 1e-15);
        assert_eq!(x.column("VRE-D[0]").unwrap()[1], 0.0);
        let mut uniq = x.names.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 105);
    }

    #[test]
    fn shifts_and_edges() {
        let case = CasePreset::BessWind.config();
        let demand: Vec<f64> = (0..30).map(|h| h as f64).collect();
        let frame = SeriesFrame::new(demand, vec!["wind".into()], vec![vec![0.1; 30]]).unwrap();
        let x = build_features(&frame, &case, 10);
        let base = x.column("D[0]").unwrap();
        let lead = x.column("D[+1]").unwrap();
        let lag = x.column("D[-3]").unwrap();
        for h in 3..29 {
            assert_eq!(lead[h], base[h + 1]);
            assert_eq!(lag[h], base[h - 3]);
        }
        assert_eq!(lead[29], 29.0);
        assert_eq!(lag[0], 0.0);
        assert_eq!(x.column("D[+10]").unwrap()[25], 29.0);
    }
}
